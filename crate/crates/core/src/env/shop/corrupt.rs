use super::catalog::Catalog;
use super::world::{Page, ShopWorld};
use super::ShopTask;
use crate::env::{CorruptionMode, EnvError};

fn is_option_click(catalog: &Catalog, a: &str) -> bool {
    let Some(x) = a.strip_prefix("click[").and_then(|r| r.strip_suffix(']')) else {
        return false;
    };
    !matches!(
        x,
        "Back to Search" | "< Prev" | "Next >" | "Buy Now" | "Description" | "Features" | "Reviews"
    ) && catalog.item(x).is_none()
}

fn replay_score(catalog: &Catalog, task: &ShopTask, actions: &[String]) -> (u32, u32) {
    let mut w = ShopWorld::default();
    for a in actions {
        let _ = w.apply(catalog, task, a);
    }
    if w.page == Page::Done {
        w.score
    } else {
        (0, 1)
    }
}

/// Inject one failure of the given class into an expert shop action sequence.
pub fn corrupt_shop(
    catalog: &Catalog,
    task: &ShopTask,
    actions: &[String],
    mode: CorruptionMode,
    seed: u64,
) -> Result<Vec<String>, EnvError> {
    let inapplicable = || EnvError::Inapplicable(mode);
    match mode {
        CorruptionMode::WrongPreposition => {
            // Shop analogue of a syntax slip: an option clicked with altered case.
            let i = actions
                .iter()
                .position(|a| is_option_click(catalog, a))
                .ok_or_else(inapplicable)?;
            let mut out = actions.to_vec();
            let inner = &actions[i]["click[".len()..actions[i].len() - 1];
            let upper = inner.to_uppercase();
            if upper == inner {
                return Err(inapplicable());
            }
            out[i] = format!("click[{upper}]");
            Ok(out)
        }
        CorruptionMode::ActionLoop => {
            if actions.len() < 2 {
                return Err(inapplicable());
            }
            let i = (seed as usize) % (actions.len() - 1);
            let mut out = actions[..=i].to_vec();
            out.push(actions[i].clone());
            Ok(out)
        }
        CorruptionMode::WrongObject => {
            let mut w = ShopWorld::default();
            for (i, a) in actions.iter().enumerate() {
                let is_item_click = a
                    .strip_prefix("click[")
                    .and_then(|r| r.strip_suffix(']'))
                    .is_some_and(|x| catalog.item(x).is_some());
                if is_item_click && matches!(w.page, Page::Results { .. }) {
                    for c in w.clickables(catalog) {
                        let alt = format!("click[{c}]");
                        if catalog.item(&c).is_none() || alt == *a {
                            continue;
                        }
                        let mut out = actions.to_vec();
                        out[i] = alt;
                        let (m, t) = replay_score(catalog, task, &out);
                        if m < t {
                            return Ok(out);
                        }
                    }
                    return Err(inapplicable());
                }
                let _ = w.apply(catalog, task, a);
            }
            Err(inapplicable())
        }
        CorruptionMode::SkipSubgoal => {
            if !actions.iter().any(|a| is_option_click(catalog, a)) {
                return Err(inapplicable());
            }
            Ok(actions.iter().filter(|a| !is_option_click(catalog, a)).cloned().collect())
        }
    }
}
