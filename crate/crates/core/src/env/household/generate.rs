use super::grammar::Label;
use super::solve::oracle_solve;
use super::world::{HouseholdWorld, Loc, Receptacle, Thing};
use super::{instruction_templates, Family, HouseholdTask};
use crate::env::EnvError;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const OPENABLE: [&str; 5] = ["cabinet", "drawer", "fridge", "microwave", "safe"];
const MAX_OPENABLE: usize = 3;

pub const TARGETS: [(Family, &[&str]); 6] = [
    (
        Family::Pick,
        &[
            "spraybottle", "keychain", "cellphone", "book", "pen", "pencil", "creditcard", "soapbar", "candle",
            "vase", "remotecontrol", "apple",
        ],
    ),
    (
        Family::Clean,
        &["lettuce", "plate", "bowl", "cloth", "fork", "spoon", "knife", "mug", "pan", "apple"],
    ),
    (Family::Heat, &["apple", "egg", "mug", "potato", "tomato", "bread", "cup", "plate"]),
    (Family::Cool, &["apple", "lettuce", "pan", "pot", "mug", "tomato", "potato", "bottle"]),
    (Family::Look, &["bowl", "pen", "book", "cd", "alarmclock", "pillow", "statue", "creditcard"]),
    (
        Family::Pick2,
        &["cellphone", "book", "pillow", "soapbar", "creditcard", "cd", "pencil", "keychain"],
    ),
];

const PLACE_DESTS: [&str; 15] = [
    "sidetable", "countertop", "diningtable", "shelf", "drawer", "cabinet", "sofa", "bed", "dresser", "toilet",
    "coffeetable", "desk", "armchair", "safe", "garbagecan",
];
const TRANSFORM_DESTS: [&str; 7] = [
    "countertop", "diningtable", "cabinet", "shelf", "sidetable", "garbagecan", "drawer",
];
const SOURCES: [&str; 16] = [
    "countertop", "diningtable", "cabinet", "drawer", "shelf", "sidetable", "garbagecan", "fridge", "microwave",
    "sinkbasin", "sofa", "bed", "dresser", "desk", "coffeetable", "armchair",
];
const LAMP_HOLDERS: [&str; 3] = ["desk", "sidetable", "dresser"];
const FILLER_RECEPTACLES: [&str; 15] = [
    "countertop", "cabinet", "drawer", "shelf", "stoveburner", "coffeemachine", "toaster", "sidetable",
    "diningtable", "garbagecan", "armchair", "bed", "dresser", "sofa", "desk",
];
const FILLER_OBJECTS: [&str; 15] = [
    "saltshaker", "peppershaker", "spatula", "houseplant", "newspaper", "watch", "tissuebox", "dishsponge",
    "ladle", "kettle", "winebottle", "papertowelroll", "toiletpaper", "box", "laptop",
];

/// A same-kind object that is easy to confuse with `name`.
pub fn similar_object(name: &str) -> &'static str {
    match name {
        "apple" => "tomato",
        "tomato" => "apple",
        "egg" => "potato",
        "potato" => "egg",
        "mug" => "cup",
        "cup" => "mug",
        "bread" => "egg",
        "plate" => "bowl",
        "bowl" => "plate",
        "lettuce" => "cabbage",
        "pan" => "pot",
        "pot" => "pan",
        "bottle" => "vase",
        "vase" => "bottle",
        "cloth" => "towel",
        "fork" => "spoon",
        "spoon" => "fork",
        "knife" => "butterknife",
        "spraybottle" => "soapbottle",
        "soapbar" => "soapbottle",
        "keychain" => "creditcard",
        "creditcard" => "keychain",
        "cellphone" => "remotecontrol",
        "remotecontrol" => "cellphone",
        "book" => "cd",
        "cd" => "book",
        "pen" => "pencil",
        "pencil" => "pen",
        "candle" => "vase",
        "alarmclock" => "watch",
        "pillow" => "cloth",
        "statue" => "vase",
        _ => "box",
    }
}

fn is_openable(name: &str) -> bool {
    OPENABLE.contains(&name)
}

fn mix(seed: u64, family: Family, attempt: u64) -> u64 {
    let mut x = seed ^ ((family as u64 + 1) << 56) ^ attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).copied().expect("non-empty vocabulary")
}

/// Deterministically generate a solvable task and its initial world.
pub fn generate_task(family: Family, seed: u64) -> Result<(HouseholdTask, HouseholdWorld), EnvError> {
    const ATTEMPTS: u64 = 64;
    for attempt in 0..ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, family, attempt));
        if let Some((task, world)) = try_generate(family, seed, &mut rng) {
            if !world.satisfies(&task) && oracle_solve(&task, &world).is_some() {
                return Ok((task, world));
            }
        }
    }
    Err(EnvError::Unsolvable(ATTEMPTS as usize))
}

fn try_generate(family: Family, seed: u64, rng: &mut ChaCha8Rng) -> Option<(HouseholdTask, HouseholdWorld)> {
    let targets = TARGETS.iter().find(|(f, _)| *f == family).map(|(_, t)| *t)?;
    let target = pick(rng, targets);
    let transformer = family.transform().and_then(|v| super::transformer_for(v.as_str()));

    let mut names: Vec<&str> = Vec::new();
    let destination = match family {
        Family::Look => {
            names.push(pick(rng, &LAMP_HOLDERS));
            "desklamp"
        }
        Family::Pick | Family::Pick2 => {
            let d = pick(rng, &PLACE_DESTS);
            names.push(d);
            d
        }
        _ => {
            let mut dests: Vec<&str> = TRANSFORM_DESTS.to_vec();
            if family == Family::Heat {
                dests.push("fridge");
            }
            let d = pick(rng, &dests);
            names.push(d);
            d
        }
    };
    if let Some(t) = transformer {
        if !names.contains(&t) {
            names.push(t);
        }
    }
    let source_ok = |s: &str| s != destination && Some(s) != transformer;
    let sources: Vec<&str> = SOURCES.iter().copied().filter(|s| source_ok(s)).collect();
    let source1 = pick(rng, &sources);
    names.push(source1);
    let source2 = if family == Family::Pick2 && rng.gen_bool(0.5) {
        let s = pick(rng, &sources);
        names.push(s);
        Some(s)
    } else {
        None
    };
    if names.iter().filter(|n| is_openable(n)).count() > MAX_OPENABLE {
        return None;
    }

    let total = rng.gen_range(5..=7usize);
    let mut guard = 0;
    while names.len() < total && guard < 100 {
        guard += 1;
        let n = pick(rng, &FILLER_RECEPTACLES);
        if is_openable(n) && names.iter().filter(|x| is_openable(x)).count() >= MAX_OPENABLE {
            continue;
        }
        // Fillers must not accidentally be the destination type of a placement task.
        if n == destination {
            continue;
        }
        names.push(n);
    }

    // Assign ids per receptacle name in creation order.
    let mut counters: BTreeMap<&str, u32> = BTreeMap::new();
    let mut created: Vec<Label> = Vec::new();
    for n in &names {
        let c = counters.entry(n).or_insert(0);
        *c += 1;
        created.push(Label::new(n, *c));
    }
    let source1_label = created[names.iter().position(|n| *n == source1)?].clone();
    let source2_label = source2.map(|s| {
        created.iter().rev().find(|l| l.name == s).cloned().expect("source2 created")
    });
    let lamp_holder = if family == Family::Look { Some(created[0].clone()) } else { None };

    let mut sorted = created.clone();
    sorted.sort_by(|a, b| a.name.cmp(&b.name).then(b.id.cmp(&a.id)));
    let mut world = HouseholdWorld {
        receptacles: sorted
            .iter()
            .map(|l| Receptacle {
                label: l.clone(),
                openable: is_openable(&l.name),
                open: false,
                contents: Vec::new(),
            })
            .collect(),
        objects: Vec::new(),
        at: None,
        held: None,
        examined: None,
    };

    let mut obj_ids: BTreeMap<String, u32> = BTreeMap::new();
    let mut place = |world: &mut HouseholdWorld, rng: &mut ChaCha8Rng, name: &str, at: &Label| {
        let id = obj_ids.entry(name.to_string()).or_insert_with(|| rng.gen_range(1..=3));
        let label = Label::new(name, *id);
        *id += 1;
        let r = world.receptacle(at).expect("receptacle exists");
        world.objects.push(Thing {
            label,
            heated: false,
            cooled: false,
            cleaned: false,
            location: Loc::In(r),
        });
        let o = world.objects.len() - 1;
        world.receptacles[r].contents.push(o);
    };

    place(&mut world, rng, target, &source1_label);
    place(&mut world, rng, similar_object(target), &source1_label);
    if family == Family::Pick2 {
        let at = source2_label.unwrap_or_else(|| source1_label.clone());
        place(&mut world, rng, target, &at);
    }
    if let Some(holder) = &lamp_holder {
        place(&mut world, rng, "desklamp", holder);
    }
    let n_fill = rng.gen_range(2..=4usize);
    let mut fillers: Vec<&str> = FILLER_OBJECTS
        .iter()
        .copied()
        .filter(|f| *f != target && *f != similar_object(target))
        .collect();
    fillers.shuffle(rng);
    for f in fillers.into_iter().take(n_fill) {
        let at = world.receptacles.choose(rng).expect("receptacles").label.clone();
        place(&mut world, rng, f, &at);
    }
    // Listing order inside receptacles is alphabetical.
    let objects = world.objects.clone();
    for r in &mut world.receptacles {
        r.contents.sort_by(|&a, &b| objects[a].label.cmp(&objects[b].label));
    }

    let templates = instruction_templates(family);
    let tpl = pick(rng, &templates);
    let instruction = tpl.replace("{t}", target).replace("{d}", destination);
    let task = HouseholdTask {
        family,
        target: target.to_string(),
        destination: destination.to_string(),
        instruction,
        seed,
    };
    Some((task, world))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        for f in Family::ALL {
            for seed in 0..20 {
                let (t1, w1) = generate_task(f, seed).unwrap();
                let (t2, w2) = generate_task(f, seed).unwrap();
                assert_eq!(t1, t2);
                assert_eq!(w1, w2);
                assert!((5..=7).contains(&w1.receptacles.len()));
                assert!(w1.receptacles.iter().filter(|r| r.openable).count() <= MAX_OPENABLE);
                w1.check_invariants().unwrap();
                assert_eq!(super::super::parse_instruction(&t1.instruction).unwrap().0, f);
            }
        }
    }

    #[test]
    fn similar_distractor_is_present() {
        for f in Family::ALL {
            let (t, w) = generate_task(f, 7).unwrap();
            let sim = similar_object(&t.target);
            assert!(w.objects.iter().any(|o| o.label.name == sim), "{f:?}");
        }
    }
}
