//! Answers to offline-stage prompts: discovery, segmentation, primitives and tips.

use super::mistakes::{household_mistakes, positive_tips, shop_mistakes, tip_for, Evidence};
use super::text::{parse_episode, section_after, task_blocks, Episode, Turn};
use crate::discovery::{parse_call, SEGMENT_REQUEST};
use crate::distill::parse_primitive_response;
use crate::domain::Domain;
use crate::env::household::{parse_action, parse_instruction, verb_of, HouseAction};
use crate::templates::Stage;

const HOUSEHOLD_SKILLS: [&str; 7] = [
    "find(object)",
    "take(object)",
    "put(object, receptacle)",
    "heat(object)",
    "cool(object)",
    "clean(object)",
    "use(object)",
];
const SHOP_SKILLS: [&str; 4] = ["search_item()", "select_item()", "select_item_attributes()", "purchase_item()"];

type Block = (String, Vec<Turn>);

fn trial_episode(domain: Domain, block: &str) -> Episode {
    let text = block
        .split_once('\n')
        .filter(|(l, _)| l.ends_with("trial:"))
        .map(|(_, r)| r)
        .unwrap_or(block);
    parse_episode(domain, text)
}

fn arg(toks: &[&str], i: usize) -> String {
    toks.get(i).copied().unwrap_or("object").to_string()
}

fn segment_household(ep: &Episode) -> Vec<Block> {
    let target = ep
        .instruction
        .as_deref()
        .and_then(parse_instruction)
        .map(|(_, t, _)| t)
        .unwrap_or_else(|| "object".into());
    let mut out: Vec<Block> = Vec::new();
    let mut pending: Vec<Turn> = Vec::new();
    for t in ep.turns.iter().filter(|t| t.is_env()) {
        let toks: Vec<&str> = t.action.split_whitespace().collect();
        let obj = arg(&toks, 1);
        match verb_of(&t.action) {
            Some(v @ ("take" | "use")) => {
                if !pending.is_empty() {
                    out.push((format!("find({obj})"), std::mem::take(&mut pending)));
                }
                out.push((format!("{v}({obj})"), vec![t.clone()]));
            }
            Some("put") => {
                let dest = arg(&toks, toks.len().saturating_sub(2).max(2));
                pending.push(t.clone());
                out.push((format!("put({obj}, {dest})"), std::mem::take(&mut pending)));
            }
            Some(v @ ("heat" | "cool" | "clean")) => {
                pending.push(t.clone());
                out.push((format!("{v}({obj})"), std::mem::take(&mut pending)));
            }
            _ => pending.push(t.clone()),
        }
    }
    if !pending.is_empty() {
        out.push((format!("find({target})"), pending));
    }
    out
}

fn shop_skill(action: &str, prev: Option<&str>) -> &'static str {
    let x = action.strip_prefix("click[").and_then(|r| r.strip_suffix(']'));
    match x {
        None => "search_item",
        Some("Back to Search") => "search_item",
        Some("Next >") => "select_item",
        Some("Buy Now") => "purchase_item",
        Some("< Prev") => match prev {
            Some("select_item_attributes") => "select_item_attributes",
            _ => "select_item",
        },
        Some(id) if id.starts_with("B0") && id.len() == 10 => "select_item",
        Some(_) => "select_item_attributes",
    }
}

fn segment_shop(ep: &Episode) -> Vec<Block> {
    let mut out: Vec<Block> = Vec::new();
    for t in ep.turns.iter().filter(|t| t.is_env()) {
        let prev = out.last().map(|(n, _)| n.trim_end_matches("()"));
        let s = shop_skill(&t.action, prev);
        match out.last_mut() {
            Some((n, v)) if n.trim_end_matches("()") == s => v.push(t.clone()),
            _ => out.push((format!("{s}()"), vec![t.clone()])),
        }
    }
    out
}

fn render_blocks(domain: Domain, blocks: &[Block]) -> String {
    let mut s = String::new();
    for (inv, ts) in blocks {
        s.push_str(&format!("- {inv}:\n"));
        for t in ts {
            let obs = t.obs.lines().next().unwrap_or("");
            match domain {
                Domain::Household => s.push_str(&format!("    > {}\n    {obs}\n", t.action)),
                Domain::Shop => s.push_str(&format!("    Action: {}\n    Observation: {obs}\n", t.action)),
            }
        }
    }
    s
}

fn discovery(domain: Domain, body: &str) -> String {
    let mut used: Vec<String> = Vec::new();
    let mut out = String::new();
    let blocks = task_blocks(body);
    for (i, b) in blocks.iter().enumerate() {
        let ep = trial_episode(domain, b);
        let segs = match domain {
            Domain::Household => segment_household(&ep),
            Domain::Shop => segment_shop(&ep),
        };
        for (inv, _) in &segs {
            if let Some((n, _)) = parse_call(inv) {
                used.push(n);
            }
        }
        out.push_str(&format!("Task {}:\n{}\n", i + 1, render_blocks(domain, &segs)));
    }
    if body.contains(SEGMENT_REQUEST) {
        return out;
    }
    let existing: Vec<String> = section_after(body, "Here is the list of subtasks to start with:")
        .map(|s| s.lines().filter_map(|l| l.trim().strip_prefix("- ")).map(str::to_string).collect())
        .unwrap_or_default();
    let canon: &[&str] = match domain {
        Domain::Household => &HOUSEHOLD_SKILLS,
        Domain::Shop => &SHOP_SKILLS,
    };
    let name_of = |sig: &str| sig.split('(').next().unwrap_or("").to_string();
    let mut list: Vec<String> = canon
        .iter()
        .filter(|sig| used.contains(&name_of(sig)) || existing.iter().any(|e| name_of(e) == name_of(sig)))
        .map(|s| s.to_string())
        .collect();
    for e in existing {
        if !list.iter().any(|l| name_of(l) == name_of(&e)) {
            list.push(e);
        }
    }
    out.push_str("Subtasks:\n");
    for l in list {
        out.push_str(&format!("- {l}\n"));
    }
    out
}

fn household_pattern(action: &str) -> Option<String> {
    Some(match parse_action(action)? {
        HouseAction::GoTo(_) => "go to [receptacle] [id]".into(),
        HouseAction::Open(_) => "open [receptacle] [id]".into(),
        HouseAction::Close(_) => "close [receptacle] [id]".into(),
        HouseAction::Take(..) => "take [object] [id] from [receptacle] [id]".into(),
        HouseAction::Put(..) => "put [object] [id] in/on [receptacle] [id]".into(),
        HouseAction::Transform(v, ..) => format!("{} [object] [id] with [receptacle] [id]", v.as_str()),
        HouseAction::Use(_) => "use [object] [id]".into(),
    })
}

fn shop_pattern(t: &Turn) -> Option<String> {
    if t.obs == "Invalid action!" {
        return None;
    }
    if t.action.starts_with("search[") {
        return Some("search[Query]".into());
    }
    let x = t.action.strip_prefix("click[")?.strip_suffix(']')?;
    Some(match x {
        "Back to Search" | "Next >" | "< Prev" | "Buy Now" | "Description" | "Features" | "Reviews" => t.action.clone(),
        id if id.starts_with("B0") && id.len() == 10 => "click[Item ID]".into(),
        _ => "click[Option]".into(),
    })
}

fn primitives(domain: Domain, body: &str) -> String {
    let blocks = task_blocks(body);
    let mut head: Option<String> = None;
    let mut found: Vec<(String, String)> = Vec::new();
    for b in &blocks {
        let Some((h, view)) = b.split_once("\n> > ").and_then(|(_, r)| r.split_once('\n')) else {
            continue;
        };
        let inv = h.split(':').next().unwrap_or(h).trim().to_string();
        head.get_or_insert(inv);
        let ep = parse_episode(domain, view);
        for t in ep.turns.iter().filter(|t| t.is_env()) {
            let p = match domain {
                Domain::Household => household_pattern(&t.action),
                Domain::Shop => shop_pattern(t),
            };
            if let Some(p) = p {
                if !found.iter().any(|(q, _)| *q == p) {
                    found.push((p, t.action.clone()));
                }
            }
        }
    }
    let Some(inv) = head else { return String::new() };
    let name = parse_call(&inv).map(|(n, _)| n).unwrap_or_default();
    let existing = section_after(body, "Here is the list of environment-specific actions to start with:")
        .and_then(|s| parse_primitive_response(s).ok())
        .and_then(|m| m.get(&name).cloned())
        .unwrap_or_default();
    let mut all: Vec<(String, String)> = existing.into_iter().map(|p| (p.pattern, p.example)).collect();
    for (p, e) in found {
        if !all.iter().any(|(q, _)| *q == p) {
            all.push((p, e));
        }
    }
    let mut s = format!("> > {inv}\nEnvironment-specific actions:\n");
    for (p, e) in all {
        match domain {
            Domain::Household => s.push_str(&format!("    - {p}\n    Example: {e}\n")),
            Domain::Shop => s.push_str(&format!("    {p}\n    # Example {e}\n")),
        }
    }
    s
}

fn evidence(domain: Domain, view: &str) -> (String, Evidence) {
    let ep = parse_episode(domain, view);
    let skill = ep
        .invocation
        .as_deref()
        .and_then(parse_call)
        .map(|(n, _)| n)
        .unwrap_or_else(|| crate::discovery::PSEUDO_SKILL.to_string());
    let all: Vec<Turn> = ep.all_turns().cloned().collect();
    let ev = Evidence {
        instruction: ep.instruction.clone().unwrap_or_default(),
        segment: ep.turns.clone(),
        all,
    };
    (skill, ev)
}

fn tips(domain: Domain, body: &str, contrastive: bool) -> String {
    let mut found: Vec<String> = Vec::new();
    let mut summary = Vec::new();
    for (i, b) in task_blocks(body).iter().enumerate() {
        let Some(at) = b.rfind("Success trial:\n") else { continue };
        let (skill, success) = evidence(domain, &b[at + "Success trial:\n".len()..]);
        let failure = b
            .strip_prefix("Failure trial:\n")
            .map(|_| evidence(domain, b["Failure trial:\n".len()..at].trim_end()).1);
        let mistakes = match (&failure, contrastive) {
            (Some(f), true) => match domain {
                Domain::Household => household_mistakes(f, Some(&success)),
                Domain::Shop => shop_mistakes(f, Some(&success)),
            },
            _ => Vec::new(),
        };
        summary.push(if mistakes.is_empty() {
            format!("In task {}, the trial follows the expected steps for {skill}.", i + 1)
        } else {
            let names: Vec<&str> = mistakes.iter().map(|m| m.as_str()).collect();
            format!("In task {}, the failed trial shows {}, which the successful trial avoids.", i + 1, names.join(" and "))
        });
        for m in mistakes {
            found.push(tip_for(domain, m).to_string());
        }
        found.extend(positive_tips(domain, &skill).iter().map(|s| s.to_string()));
    }
    let mut list: Vec<String> = section_after(body, "Here is the list of tips to start with:")
        .map(|s| s.lines().filter_map(|l| l.trim().strip_prefix("- ")).map(str::to_string).collect())
        .unwrap_or_default();
    for t in found {
        if !list.contains(&t) {
            list.push(t);
        }
    }
    let mut s = summary.join(" ");
    s.push_str("\n\nTips:\n");
    for t in list {
        s.push_str(&format!("- {t}\n"));
    }
    s
}

pub(crate) fn respond(stage: Stage, domain: Domain, body: &str) -> String {
    match stage {
        Stage::Discovery => discovery(domain, body),
        Stage::Primitives => primitives(domain, body),
        Stage::TipsContrastive => tips(domain, body, true),
        Stage::TipsNonContrastive => tips(domain, body, false),
    }
}
