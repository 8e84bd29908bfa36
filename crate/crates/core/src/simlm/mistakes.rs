//! Spotting the injected mistakes in trajectories, and the advice that fixes each one.

use super::shop::{parse_page, ShopPage};
use super::text::Turn;
use crate::domain::Domain;
use crate::env::household::{parse_action, parse_instruction, verb_of, HouseAction};
use crate::env::shop::{parse_instruction as parse_shop, tokens};
use crate::env::CorruptionMode;

/// Phrase whose presence in the prompt guidance suppresses a mistake.
pub fn marker(domain: Domain, m: CorruptionMode) -> &'static str {
    use CorruptionMode::*;
    match (domain, m) {
        (Domain::Household, WrongPreposition) => "in/on [receptacle]",
        (Domain::Shop, WrongPreposition) => "exact words",
        (_, ActionLoop) => "different action",
        (Domain::Household, WrongObject) => "similar object",
        (Domain::Shop, WrongObject) => "matches every requirement",
        (Domain::Household, SkipSubgoal) => "before placing",
        (Domain::Shop, SkipSubgoal) => "before buying",
    }
}

pub(crate) fn tip_for(domain: Domain, m: CorruptionMode) -> &'static str {
    use CorruptionMode::*;
    match (domain, m) {
        (Domain::Household, WrongPreposition) => {
            "Always write in/on in a put action, as in put [object] [id] in/on [receptacle] [id]; a put with only in or on does nothing."
        }
        (Domain::Shop, WrongPreposition) => "Click options using the exact words shown on the page, in the same case.",
        (_, ActionLoop) => "If an action does not change anything, try a different action instead of repeating it.",
        (Domain::Household, WrongObject) => {
            "Take exactly the object named in the task; a similar object with a different name does not count."
        }
        (Domain::Shop, WrongObject) => {
            "Click an item only if its title matches every requirement of the instruction and its price is below the limit."
        }
        (Domain::Household, SkipSubgoal) => "Make sure the object is heated, cooled or cleaned as the task asks before placing it.",
        (Domain::Shop, SkipSubgoal) => "Select every option the instruction asks for before buying.",
    }
}

pub(crate) fn reflection_for(domain: Domain, m: CorruptionMode) -> &'static str {
    use CorruptionMode::*;
    match (domain, m) {
        (Domain::Household, WrongPreposition) => {
            "I wrote a put action without in/on. Next time I will always write in/on, as in put [object] [id] in/on [receptacle] [id]."
        }
        (Domain::Shop, WrongPreposition) => {
            "I clicked an option in the wrong case. Next time I will click options using the exact words shown on the page."
        }
        (_, ActionLoop) => "I repeated an action that did nothing. Next time I will try a different action when an action does not work.",
        (Domain::Household, WrongObject) => {
            "I took a similar object instead of the one the task names. Next time I will take the exact object and ignore any similar object."
        }
        (Domain::Shop, WrongObject) => {
            "I clicked an item that did not fit the instruction. Next time I will click an item only if it matches every requirement."
        }
        (Domain::Household, SkipSubgoal) => {
            "I placed the object without changing it first. Next time I will heat, cool or clean it as asked before placing it."
        }
        (Domain::Shop, SkipSubgoal) => "I bought the item without its options. Next time I will select every option before buying.",
    }
}

pub(crate) const FALLBACK_REFLECTION: &str =
    "I ran out of steps without finishing. Next time I will try a different action as soon as progress stops.";

pub(crate) fn positive_tips(domain: Domain, skill: &str) -> &'static [&'static str] {
    match (domain, skill) {
        (Domain::Household, "find") => &["Check receptacles one by one and open closed ones to look inside."],
        (Domain::Household, "take") => &["Go to the receptacle that holds the object before taking it."],
        (Domain::Household, "put") => {
            &["Go to the target receptacle first and write put [object] [id] in/on [receptacle] [id]."]
        }
        (Domain::Household, "heat") => &["You can directly heat an object with a microwave by taking the corresponding action."],
        (Domain::Household, "cool") => &["You can directly cool an object with a fridge, even while the fridge is closed."],
        (Domain::Household, "clean") => &["You can directly clean an object with a sinkbasin."],
        (Domain::Household, "use") => &["Stand at the receptacle that holds the desklamp and use it while holding the object."],
        (Domain::Household, _) => &[
            "Open closed receptacles to look inside them.",
            "Write put actions as put [object] [id] in/on [receptacle] [id].",
        ],
        (Domain::Shop, "search_item") => &["Search with the attributes and the product name from the instruction."],
        (Domain::Shop, "select_item") => &["Check the title and the price of each result before clicking an item."],
        (Domain::Shop, "select_item_attributes") => {
            &["Click each option the instruction names, using the exact words shown on the page."]
        }
        (Domain::Shop, "purchase_item") => &["Click [Buy Now] once the item and its options are selected."],
        (Domain::Shop, _) => &[
            "Search with the attributes and the product name from the instruction.",
            "Click each option the instruction names, using the exact words shown on the page.",
        ],
    }
}

/// What one trajectory view shows: the instruction if visible, the skill's own turns
/// and every turn including earlier history.
#[derive(Debug, Clone, Default)]
pub(crate) struct Evidence {
    pub instruction: String,
    pub segment: Vec<Turn>,
    pub all: Vec<Turn>,
}

fn env(ts: &[Turn]) -> Vec<&Turn> {
    ts.iter().filter(|t| t.is_env()).collect()
}

fn looped(ts: &[Turn]) -> bool {
    env(ts).windows(2).any(|w| w[0].action == w[1].action)
}

fn taken(ts: &[Turn]) -> Option<String> {
    env(ts).iter().find_map(|t| match parse_action(&t.action) {
        Some(HouseAction::Take(o, _)) => Some(o.name),
        _ => None,
    })
}

fn transformed(ts: &[Turn]) -> bool {
    env(ts)
        .iter()
        .any(|t| matches!(parse_action(&t.action), Some(HouseAction::Transform(..))) && t.obs != "Nothing happens.")
}

fn puts(ts: &[Turn]) -> bool {
    env(ts).iter().any(|t| verb_of(&t.action) == Some("put"))
}

/// Household mistakes in `f`, judged against a success when one is given.
pub(crate) fn household_mistakes(f: &Evidence, s: Option<&Evidence>) -> Vec<CorruptionMode> {
    let mut out = Vec::new();
    if env(&f.segment)
        .iter()
        .any(|t| verb_of(&t.action) == Some("put") && parse_action(&t.action).is_none())
    {
        out.push(CorruptionMode::WrongPreposition);
    }
    if looped(&f.segment) {
        out.push(CorruptionMode::ActionLoop);
    }
    let parsed = parse_instruction(&f.instruction);
    let wrong = match (taken(&f.segment), s) {
        (Some(a), Some(s)) => taken(&s.segment).is_some_and(|b| a != b),
        (Some(a), None) => parsed.as_ref().is_some_and(|(_, t, _)| *t != a),
        _ => false,
    };
    if wrong {
        out.push(CorruptionMode::WrongObject);
    }
    let needs = match s {
        Some(s) => transformed(&s.all),
        None => parsed.is_some_and(|(fam, _, _)| fam.transform().is_some()),
    };
    if needs && !transformed(&f.all) && puts(&f.segment) {
        out.push(CorruptionMode::SkipSubgoal);
    }
    out
}

fn click(t: &Turn) -> Option<&str> {
    t.action.strip_prefix("click[")?.strip_suffix(']')
}

fn item_click(t: &Turn) -> Option<&str> {
    click(t).filter(|x| x.starts_with("B0") && x.len() == 10)
}

fn option_clicks(ts: &[Turn]) -> usize {
    ts.iter().filter(|t| t.obs.starts_with("You have clicked ")).count()
}

pub(crate) fn shop_mistakes(f: &Evidence, s: Option<&Evidence>) -> Vec<CorruptionMode> {
    let mut out = Vec::new();
    let upper = |x: &str| x.chars().any(|c| c.is_ascii_alphabetic()) && x == x.to_uppercase();
    if env(&f.segment)
        .iter()
        .any(|t| t.obs == "Invalid action!" && click(t).is_some_and(upper))
    {
        out.push(CorruptionMode::WrongPreposition);
    }
    if looped(&f.segment) {
        out.push(CorruptionMode::ActionLoop);
    }
    let fi = f.segment.iter().find_map(item_click);
    let wrong = match s {
        Some(s) => match (fi, s.segment.iter().find_map(item_click)) {
            (Some(a), Some(b)) => a != b,
            _ => false,
        },
        None => wrong_item_against_instruction(f),
    };
    if wrong {
        out.push(CorruptionMode::WrongObject);
    }
    let bought = f.segment.iter().any(|t| t.action == "click[Buy Now]");
    let needs = match s {
        Some(s) => option_clicks(&s.all) > 0,
        None => parse_shop(&f.instruction).is_some_and(|i| !i.options_text.is_empty()),
    };
    if bought && needs && option_clicks(&f.all) == 0 {
        out.push(CorruptionMode::SkipSubgoal);
    }
    out
}

fn wrong_item_against_instruction(f: &Evidence) -> bool {
    let Some(ins) = parse_shop(&f.instruction) else { return false };
    f.all.iter().filter(|t| item_click(t).is_some()).any(|t| {
        let ShopPage::Item { groups } = parse_page(&t.obs) else { return false };
        let lines: Vec<&str> = t.obs.lines().collect();
        let title = lines.get(2 + groups.len()).copied().unwrap_or_default();
        let price: f64 = lines
            .get(3 + groups.len())
            .and_then(|p| p.strip_prefix("Price: $"))
            .and_then(|p| p.parse().ok())
            .unwrap_or(f64::MAX);
        let have = tokens(title);
        !(tokens(&ins.need).iter().all(|w| have.contains(w)) && price <= ins.price_cap)
    })
}
