use super::grammar::{parse_action, HouseAction, Label};
use super::{Family, HouseholdTask};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Receptacle {
    pub label: Label,
    pub openable: bool,
    pub open: bool,
    pub contents: Vec<usize>,
}

impl Receptacle {
    pub fn accessible(&self) -> bool {
        !self.openable || self.open
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loc {
    In(usize),
    Held,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Thing {
    pub label: Label,
    pub heated: bool,
    pub cooled: bool,
    pub cleaned: bool,
    pub location: Loc,
}

/// Objects that stay where they are placed.
pub fn is_fixed(name: &str) -> bool {
    matches!(name, "desklamp" | "floorlamp")
}

pub fn transformer_for(verb: &str) -> Option<&'static str> {
    match verb {
        "heat" => Some("microwave"),
        "cool" => Some("fridge"),
        "clean" => Some("sinkbasin"),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HouseholdWorld {
    pub receptacles: Vec<Receptacle>,
    pub objects: Vec<Thing>,
    pub at: Option<usize>,
    pub held: Option<usize>,
    /// Name of the object held when a lamp was last switched on.
    pub examined: Option<String>,
}

/// "a x 1, a y 2, and a z 3" in the simulator's listing style.
pub fn list_phrase(items: &[String]) -> String {
    match items.len() {
        0 => "nothing".to_string(),
        1 => format!("a {}", items[0]),
        n => {
            let head: Vec<String> = items[..n - 1].iter().map(|s| format!("a {s}")).collect();
            format!("{}, and a {}", head.join(", "), items[n - 1])
        }
    }
}

impl HouseholdWorld {
    pub fn receptacle(&self, label: &Label) -> Option<usize> {
        self.receptacles.iter().position(|r| &r.label == label)
    }

    pub fn object(&self, label: &Label) -> Option<usize> {
        self.objects.iter().position(|o| &o.label == label)
    }

    pub fn initial_observation(&self) -> String {
        let names: Vec<String> = self.receptacles.iter().map(|r| r.label.to_string()).collect();
        format!(
            "You are in the middle of a room. Looking quickly around you, you see {}.",
            list_phrase(&names)
        )
    }

    fn contents_phrase(&self, r: usize) -> String {
        let names: Vec<String> = self.receptacles[r]
            .contents
            .iter()
            .map(|&o| self.objects[o].label.to_string())
            .collect();
        list_phrase(&names)
    }

    fn arrival_text(&self, r: usize) -> String {
        let rec = &self.receptacles[r];
        if rec.openable && !rec.open {
            format!("The {} is closed.", rec.label)
        } else if rec.openable {
            format!("The {} is open. In it, you see {}.", rec.label, self.contents_phrase(r))
        } else {
            format!("On the {}, you see {}.", rec.label, self.contents_phrase(r))
        }
    }

    /// Apply one action line. Returns `None` (and leaves the state untouched) when illegal.
    pub fn apply(&mut self, action: &str) -> Option<String> {
        let a = parse_action(action)?;
        self.apply_parsed(&a)
    }

    pub fn apply_parsed(&mut self, a: &HouseAction) -> Option<String> {
        match a {
            HouseAction::GoTo(r) => {
                let r = self.receptacle(r)?;
                if self.at == Some(r) {
                    return None;
                }
                self.at = Some(r);
                Some(self.arrival_text(r))
            }
            HouseAction::Open(r) => {
                let r = self.receptacle(r)?;
                let rec = &self.receptacles[r];
                if self.at != Some(r) || !rec.openable || rec.open {
                    return None;
                }
                self.receptacles[r].open = true;
                let label = &self.receptacles[r].label;
                Some(format!(
                    "You open the {label}. The {label} is open. In it, you see {}.",
                    self.contents_phrase(r)
                ))
            }
            HouseAction::Close(r) => {
                let r = self.receptacle(r)?;
                let rec = &self.receptacles[r];
                if self.at != Some(r) || !rec.openable || !rec.open {
                    return None;
                }
                self.receptacles[r].open = false;
                Some(format!("You close the {}.", self.receptacles[r].label))
            }
            HouseAction::Take(o, r) => {
                let (o, r) = (self.object(o)?, self.receptacle(r)?);
                if self.held.is_some()
                    || self.at != Some(r)
                    || !self.receptacles[r].accessible()
                    || self.objects[o].location != Loc::In(r)
                    || is_fixed(&self.objects[o].label.name)
                {
                    return None;
                }
                self.receptacles[r].contents.retain(|&x| x != o);
                self.objects[o].location = Loc::Held;
                self.held = Some(o);
                Some(format!(
                    "You pick up the {} from the {}.",
                    self.objects[o].label, self.receptacles[r].label
                ))
            }
            HouseAction::Put(o, r) => {
                let (o, r) = (self.object(o)?, self.receptacle(r)?);
                if self.held != Some(o) || self.at != Some(r) || !self.receptacles[r].accessible() {
                    return None;
                }
                self.receptacles[r].contents.push(o);
                self.objects[o].location = Loc::In(r);
                self.held = None;
                Some(format!(
                    "You put the {} in/on the {}.",
                    self.objects[o].label, self.receptacles[r].label
                ))
            }
            HouseAction::Transform(verb, o, r) => {
                let (o, r) = (self.object(o)?, self.receptacle(r)?);
                if self.held != Some(o) || self.at != Some(r) {
                    return None;
                }
                if transformer_for(verb.as_str()) != Some(self.receptacles[r].label.name.as_str()) {
                    return None;
                }
                let t = &mut self.objects[o];
                match verb.as_str() {
                    "heat" => t.heated = true,
                    "cool" => t.cooled = true,
                    _ => t.cleaned = true,
                }
                Some(format!(
                    "You {} the {} using the {}.",
                    verb.as_str(),
                    self.objects[o].label,
                    self.receptacles[r].label
                ))
            }
            HouseAction::Use(o) => {
                let o = self.object(o)?;
                let lamp = &self.objects[o];
                if !is_fixed(&lamp.label.name) {
                    return None;
                }
                let Loc::In(r) = lamp.location else { return None };
                if self.at != Some(r) {
                    return None;
                }
                self.examined = self.held.map(|h| self.objects[h].label.name.clone());
                Some(format!("You turn on the {}.", self.objects[o].label))
            }
        }
    }

    pub fn satisfies(&self, task: &HouseholdTask) -> bool {
        let placed = |pred: &dyn Fn(&Thing) -> bool| {
            self.objects
                .iter()
                .filter(|o| o.label.name == task.target && pred(o))
                .filter(|o| match o.location {
                    Loc::In(r) => self.receptacles[r].label.name == task.destination,
                    Loc::Held => false,
                })
                .count()
        };
        match task.family {
            Family::Pick => placed(&|_| true) >= 1,
            Family::Pick2 => placed(&|_| true) >= 2,
            Family::Heat => placed(&|o| o.heated) >= 1,
            Family::Cool => placed(&|o| o.cooled) >= 1,
            Family::Clean => placed(&|o| o.cleaned) >= 1,
            Family::Look => self.examined.as_deref() == Some(task.target.as_str()),
        }
    }

    /// Every object is in exactly one place and receptacle contents agree with object locations.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut held_count = 0;
        for (i, o) in self.objects.iter().enumerate() {
            match o.location {
                Loc::Held => {
                    held_count += 1;
                    if self.held != Some(i) {
                        return Err(format!("{} marked held but agent holds {:?}", o.label, self.held));
                    }
                }
                Loc::In(r) => {
                    let n = self.receptacles[r].contents.iter().filter(|&&x| x == i).count();
                    if n != 1 {
                        return Err(format!("{} listed {n} times in {}", o.label, self.receptacles[r].label));
                    }
                }
            }
        }
        if held_count > 1 || (held_count == 0 && self.held.is_some()) {
            return Err("held object mismatch".into());
        }
        for (ri, r) in self.receptacles.iter().enumerate() {
            for &o in &r.contents {
                if self.objects[o].location != Loc::In(ri) {
                    return Err(format!("{} lists {} which is elsewhere", r.label, self.objects[o].label));
                }
            }
        }
        Ok(())
    }
}
