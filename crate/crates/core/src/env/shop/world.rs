use super::catalog::Catalog;
use super::ShopTask;
use std::collections::BTreeMap;

pub const PAGE_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetailKind {
    Description,
    Features,
    Reviews,
}

impl DetailKind {
    fn button(self) -> &'static str {
        match self {
            DetailKind::Description => "Description",
            DetailKind::Features => "Features",
            DetailKind::Reviews => "Reviews",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Page {
    Search,
    Results { page: usize },
    Item { item: usize, page: usize },
    Detail { item: usize, page: usize, kind: DetailKind },
    Done,
}

/// Navigation state. Scores are kept as an exact fraction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ShopWorld {
    pub page: Page,
    pub results: Vec<usize>,
    pub selected: BTreeMap<String, String>,
    pub purchased: Option<usize>,
    pub score: (u32, u32),
}

impl Default for ShopWorld {
    fn default() -> Self {
        ShopWorld {
            page: Page::Search,
            results: Vec::new(),
            selected: BTreeMap::new(),
            purchased: None,
            score: (0, 1),
        }
    }
}

/// Fraction of requirements met: each required option, product identity, and price.
pub fn shop_score(catalog: &Catalog, item: usize, selected: &BTreeMap<String, String>, task: &ShopTask) -> (u32, u32) {
    let it = &catalog.items[item];
    let total = task.required_options.len() as u32 + 2;
    let mut met = task
        .required_options
        .iter()
        .filter(|v| selected.values().any(|s| s == *v))
        .count() as u32;
    if it.template == task.template && it.has_attributes(&task.required_attributes) {
        met += 1;
    }
    if it.price <= task.price_cap {
        met += 1;
    }
    (met, total)
}

fn page_count(n: usize) -> usize {
    n.div_ceil(PAGE_SIZE).max(1)
}

impl ShopWorld {
    pub fn search_page(task: &ShopTask) -> String {
        format!("WebShop\nInstruction:\n{}\n[Search]", task.instruction)
    }

    pub fn render(&self, catalog: &Catalog, task: &ShopTask) -> String {
        match &self.page {
            Page::Search => Self::search_page(task),
            Page::Results { page } => {
                let mut lines = vec![
                    "[Back to Search]".to_string(),
                    format!("Page {} (Total results: {})", page + 1, self.results.len()),
                ];
                if *page > 0 {
                    lines.push("[< Prev]".into());
                }
                if page + 1 < page_count(self.results.len()) {
                    lines.push("[Next >]".into());
                }
                for &i in self.results.iter().skip(page * PAGE_SIZE).take(PAGE_SIZE) {
                    let it = &catalog.items[i];
                    lines.push(format!("[{}]", it.item_id));
                    lines.push(it.title.clone());
                    lines.push(format!("${:.2}", it.price));
                }
                lines.join("\n")
            }
            Page::Item { item, .. } => {
                let it = &catalog.items[*item];
                let mut lines = vec!["[Back to Search]".to_string(), "[< Prev]".to_string()];
                for g in &it.options {
                    let vals: String = g.values.iter().map(|v| format!("[{v}]")).collect();
                    lines.push(format!("{} {vals}", g.name));
                }
                lines.push(it.title.clone());
                lines.push(format!("Price: ${:.2}", it.price));
                lines.push("Rating: N.A.".into());
                lines.extend(["[Description]", "[Features]", "[Reviews]", "[Buy Now]"].map(String::from));
                lines.join("\n")
            }
            Page::Detail { item, kind, .. } => {
                let it = &catalog.items[*item];
                let body = match kind {
                    DetailKind::Description => it.title.clone(),
                    DetailKind::Features => it.attributes.iter().map(|a| format!("- {a}")).collect::<Vec<_>>().join("\n"),
                    DetailKind::Reviews => "No reviews yet.".to_string(),
                };
                format!("[Back to Search]\n[< Prev]\n{body}")
            }
            Page::Done => {
                let (m, t) = self.score;
                format!("Thank you for shopping with us!\nYour score: {:.3}", m as f64 / t as f64)
            }
        }
    }

    /// Every clickable label on the current page, in display order.
    pub fn clickables(&self, catalog: &Catalog) -> Vec<String> {
        match &self.page {
            Page::Search | Page::Done => Vec::new(),
            Page::Results { page } => {
                let mut v = vec!["Back to Search".to_string()];
                if *page > 0 {
                    v.push("< Prev".into());
                }
                if page + 1 < page_count(self.results.len()) {
                    v.push("Next >".into());
                }
                for &i in self.results.iter().skip(page * PAGE_SIZE).take(PAGE_SIZE) {
                    v.push(catalog.items[i].item_id.clone());
                }
                v
            }
            Page::Item { item, .. } => {
                let mut v = vec!["Back to Search".to_string(), "< Prev".to_string()];
                for g in &catalog.items[*item].options {
                    v.extend(g.values.iter().cloned());
                }
                v.extend(["Description", "Features", "Reviews", "Buy Now"].map(String::from));
                v
            }
            Page::Detail { .. } => vec!["Back to Search".to_string(), "< Prev".to_string()],
        }
    }

    /// Apply one action; `None` means invalid and the state is unchanged.
    pub fn apply(&mut self, catalog: &Catalog, task: &ShopTask, action: &str) -> Option<String> {
        let action = action.trim();
        if let Some(q) = action.strip_prefix("search[").and_then(|r| r.strip_suffix(']')) {
            if self.page != Page::Search || q.trim().is_empty() {
                return None;
            }
            self.results = catalog.search(q);
            self.page = Page::Results { page: 0 };
            return Some(self.render(catalog, task));
        }
        let x = action.strip_prefix("click[").and_then(|r| r.strip_suffix(']'))?;
        if !self.clickables(catalog).iter().any(|c| c == x) {
            return None;
        }
        match (self.page.clone(), x) {
            (_, "Back to Search") => {
                self.page = Page::Search;
                self.results.clear();
                self.selected.clear();
            }
            (Page::Results { page }, "Next >") => self.page = Page::Results { page: page + 1 },
            (Page::Results { page }, "< Prev") => self.page = Page::Results { page: page - 1 },
            (Page::Results { page }, id) => {
                self.page = Page::Item {
                    item: catalog.item(id)?,
                    page,
                };
                self.selected.clear();
            }
            (Page::Item { page, .. }, "< Prev") => self.page = Page::Results { page },
            (Page::Item { item, page }, b @ ("Description" | "Features" | "Reviews")) => {
                let kind = match b {
                    "Description" => DetailKind::Description,
                    "Features" => DetailKind::Features,
                    _ => DetailKind::Reviews,
                };
                debug_assert_eq!(kind.button(), b);
                self.page = Page::Detail { item, page, kind };
            }
            (Page::Item { item, .. }, "Buy Now") => {
                self.score = shop_score(catalog, item, &self.selected, task);
                self.purchased = Some(item);
                self.page = Page::Done;
            }
            (Page::Item { item, .. }, value) => {
                let group = catalog.items[item].group_of(value)?.to_string();
                self.selected.insert(group, value.to_string());
                return Some(format!("You have clicked {value}."));
            }
            (Page::Detail { item, page, .. }, "< Prev") => self.page = Page::Item { item, page },
            _ => return None,
        }
        Some(self.render(catalog, task))
    }
}
