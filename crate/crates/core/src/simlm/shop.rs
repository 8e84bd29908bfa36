//! Shop policies: page parsing and the four-skill routine.

use super::text::{Episode, Turn};
use crate::discovery::parse_call;
use crate::distill::fewshot::SHOP_BASE_THOUGHT;
use crate::env::shop::{done_report, parse_instruction, tokens, ParsedInstruction};
use crate::env::CorruptionMode;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ShopPage {
    Search,
    Results { items: Vec<(String, String, f64)>, next: bool },
    Item { groups: Vec<(String, Vec<String>)> },
    Detail,
    Done,
    Other,
}

pub(crate) fn parse_page(text: &str) -> ShopPage {
    let lines: Vec<&str> = text.lines().collect();
    if text.starts_with("WebShop\nInstruction:") {
        return ShopPage::Search;
    }
    if text.starts_with("Thank you") {
        return ShopPage::Done;
    }
    if lines.contains(&"[Buy Now]") {
        let groups = lines
            .iter()
            .skip(2)
            .take_while(|l| l.contains(" [") && l.ends_with(']'))
            .filter_map(|l| {
                let (name, vals) = l.split_once(" [")?;
                let vals = vals.strip_suffix(']')?.split("][").map(str::to_string).collect();
                Some((name.to_string(), vals))
            })
            .collect();
        return ShopPage::Item { groups };
    }
    if lines.get(1).is_some_and(|l| l.starts_with("Page ")) {
        let mut items = Vec::new();
        let mut i = 2;
        while i < lines.len() {
            let id = lines[i].strip_prefix('[').and_then(|r| r.strip_suffix(']'));
            match id {
                Some(id) if id.starts_with("B0") => {
                    let title = lines.get(i + 1).copied().unwrap_or_default().to_string();
                    let price = lines
                        .get(i + 2)
                        .and_then(|p| p.strip_prefix('$'))
                        .and_then(|p| p.parse().ok())
                        .unwrap_or(f64::MAX);
                    items.push((id.to_string(), title, price));
                    i += 3;
                }
                _ => i += 1,
            }
        }
        return ShopPage::Results {
            items,
            next: lines.contains(&"[Next >]"),
        };
    }
    if text.starts_with("[Back to Search]\n[< Prev]") {
        return ShopPage::Detail;
    }
    ShopPage::Other
}

fn is_page(obs: &str) -> bool {
    !obs.is_empty() && obs != "OK." && obs != "Invalid action!" && !obs.starts_with("You have clicked ")
}

/// Page text the agent is looking at. Base turns carry it after `Current Page:`.
pub(crate) fn current_page(ep: &Episode) -> String {
    for t in ep.all_turns().collect::<Vec<&Turn>>().into_iter().rev() {
        let obs = match t.obs.split_once("Current Page:\n") {
            Some((_, p)) => p,
            None => t.obs.as_str(),
        };
        if is_page(obs) {
            return obs.to_string();
        }
    }
    ep.init.clone()
}

/// Option values clicked since the current item was opened.
fn clicked(ep: &Episode) -> Vec<String> {
    let mut out = Vec::new();
    for t in ep.all_turns() {
        let target = t.action.strip_prefix("click[").and_then(|r| r.strip_suffix(']'));
        if let Some(v) = t.obs.strip_prefix("You have clicked ").and_then(|r| r.strip_suffix('.')) {
            out.push(v.to_string());
        } else if target.is_some_and(|x| x == "Back to Search" || x.starts_with("B0")) {
            out.clear();
        }
    }
    out
}

fn matches(ins: &ParsedInstruction, title: &str, price: f64) -> bool {
    let have = tokens(title);
    tokens(&ins.need).iter().all(|t| have.contains(t)) && price <= ins.price_cap
}

/// Per option group, the longest value the instruction asks for.
pub(crate) fn wanted(ins: &ParsedInstruction, groups: &[(String, Vec<String>)]) -> Vec<String> {
    groups
        .iter()
        .filter_map(|(_, vals)| {
            vals.iter()
                .filter(|v| ins.options_text.contains(v.as_str()))
                .max_by_key(|v| v.len())
                .cloned()
        })
        .collect()
}

fn pick_item(ins: &ParsedInstruction, items: &[(String, String, f64)], wrong: bool) -> Option<String> {
    if wrong {
        if let Some((id, _, _)) = items.iter().find(|(_, t, p)| !matches(ins, t, *p)) {
            return Some(id.clone());
        }
    }
    items.iter().find(|(_, t, p)| matches(ins, t, *p)).map(|(id, _, _)| id.clone())
}

fn option_click(v: &str, wrong: bool) -> String {
    if wrong {
        format!("click[{}]", v.to_uppercase())
    } else {
        format!("click[{v}]")
    }
}

fn looped(ep: &Episode, mistake: Option<CorruptionMode>) -> Option<String> {
    if mistake != Some(CorruptionMode::ActionLoop) || ep.env_count() != 1 {
        return None;
    }
    let last = ep.last_turn()?;
    last.is_env().then(|| last.action.clone())
}

enum Next {
    Act(String),
    Ready,
}

fn instruction(ep: &Episode) -> Option<ParsedInstruction> {
    ep.instruction.as_deref().and_then(parse_instruction)
}

pub(crate) fn skill_line(ep: &Episode, mistake: Option<CorruptionMode>) -> String {
    let inv = ep.invocation.clone().unwrap_or_default();
    let (Some((name, _)), Some(ins)) = (parse_call(&inv), instruction(ep)) else {
        return "think[I do not know this subtask.]".into();
    };
    if let Some(a) = looped(ep, mistake) {
        return a;
    }
    let page = parse_page(&current_page(ep));
    let wrong_obj = mistake == Some(CorruptionMode::WrongObject);
    let next = match (name.as_str(), &page) {
        ("search_item", ShopPage::Search) => Next::Act(format!("search[{}]", ins.need)),
        ("search_item", ShopPage::Results { .. }) => Next::Ready,
        ("search_item", ShopPage::Done) => Next::Ready,
        ("search_item", _) => Next::Act("click[Back to Search]".into()),
        ("select_item", ShopPage::Results { items, next }) => match pick_item(&ins, items, wrong_obj) {
            Some(id) => Next::Act(format!("click[{id}]")),
            None if *next => Next::Act("click[Next >]".into()),
            None => Next::Ready,
        },
        ("select_item_attributes", ShopPage::Item { groups }) => {
            let done = clicked(ep);
            match wanted(&ins, groups).into_iter().find(|v| !done.contains(v)) {
                Some(v) => Next::Act(option_click(&v, mistake == Some(CorruptionMode::WrongPreposition))),
                None => Next::Ready,
            }
        }
        ("purchase_item", ShopPage::Item { .. }) => Next::Act("click[Buy Now]".into()),
        (_, ShopPage::Detail) => Next::Act("click[< Prev]".into()),
        _ => Next::Ready,
    };
    match next {
        Next::Act(a) => a,
        Next::Ready => format!("Done[{}]", done_report(&name)),
    }
}

pub(crate) fn flat_line(ep: &Episode, mistake: Option<CorruptionMode>) -> String {
    let Some(ins) = instruction(ep) else {
        return "think[I cannot read the task.]".into();
    };
    if ep.turns.is_empty() {
        return format!("think[{SHOP_BASE_THOUGHT}]");
    }
    if let Some(a) = looped(ep, mistake) {
        return a;
    }
    match parse_page(&current_page(ep)) {
        ShopPage::Search => format!("search[{}]", ins.need),
        ShopPage::Results { items, next } => match pick_item(&ins, &items, mistake == Some(CorruptionMode::WrongObject)) {
            Some(id) => format!("click[{id}]"),
            None if next => "click[Next >]".into(),
            None => "think[No item matches the instruction.]".into(),
        },
        ShopPage::Item { groups } => {
            let done = clicked(ep);
            let pending = wanted(&ins, &groups).into_iter().find(|v| !done.contains(v));
            match pending {
                Some(v) if mistake != Some(CorruptionMode::SkipSubgoal) => {
                    option_click(&v, mistake == Some(CorruptionMode::WrongPreposition))
                }
                _ => "click[Buy Now]".into(),
            }
        }
        ShopPage::Detail => "click[< Prev]".into(),
        ShopPage::Done | ShopPage::Other => "think[The purchase is complete.]".into(),
    }
}

pub(crate) fn base_line(ep: &Episode) -> String {
    if ep.turns.is_empty() {
        return format!("think[{SHOP_BASE_THOUGHT}]");
    }
    let last = ep.turns.iter().rev().find(|t| t.is_call()).and_then(|t| parse_call(&t.action));
    let name = last.map(|(n, _)| n);
    match name.as_deref() {
        None => "search_item()".into(),
        Some("search_item") => "select_item()".into(),
        Some("select_item") => {
            let wants = match (instruction(ep), parse_page(&current_page(ep))) {
                (Some(ins), ShopPage::Item { groups }) => !wanted(&ins, &groups).is_empty(),
                _ => false,
            };
            if wants {
                "select_item_attributes()".into()
            } else {
                "purchase_item()".into()
            }
        }
        Some("select_item_attributes") => "purchase_item()".into(),
        _ => "Done".into(),
    }
}

pub(crate) fn repeat_line(ep: &Episode) -> String {
    match instruction(ep) {
        Some(ins) => format!("search[{}]", ins.need),
        None => "search[item]".into(),
    }
}
