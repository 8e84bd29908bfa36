use super::catalog::Catalog;
use super::world::{Page, ShopWorld};
use super::ShopTask;
use std::collections::{HashSet, VecDeque};

const MAX_DEPTH: usize = 12;

/// Shortest action sequence that buys a fully matching item, by breadth-first search
/// over the task query and every clickable element.
pub fn oracle_solve(catalog: &Catalog, task: &ShopTask) -> Option<Vec<String>> {
    let start = ShopWorld::default();
    let mut seen: HashSet<ShopWorld> = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(start.clone());
    queue.push_back((start, Vec::<String>::new()));
    while let Some((w, path)) = queue.pop_front() {
        if path.len() >= MAX_DEPTH {
            continue;
        }
        let actions: Vec<String> = match w.page {
            Page::Search => vec![format!("search[{}]", task.query())],
            Page::Done => continue,
            _ => w.clickables(catalog).into_iter().map(|c| format!("click[{c}]")).collect(),
        };
        for a in actions {
            let mut next = w.clone();
            if next.apply(catalog, task, &a).is_none() {
                continue;
            }
            let mut p = path.clone();
            p.push(a);
            if next.page == Page::Done {
                let (m, t) = next.score;
                if m == t {
                    return Some(p);
                }
                continue;
            }
            if seen.insert(next.clone()) {
                queue.push_back((next, p));
            }
        }
    }
    None
}
