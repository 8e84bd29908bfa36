use crate::domain::Domain;
use crate::executor::Termination;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Rendered in place of a percentage for a cell with no episodes.
pub const EMPTY_CELL: &str = "—";

/// Household table columns and the task types they aggregate.
pub const HOUSEHOLD_COLUMNS: [(&str, &str); 6] = [
    ("Pick", "pick"),
    ("Clean", "clean"),
    ("Heat", "heat"),
    ("Cool", "cool"),
    ("Look", "look"),
    ("Pick2", "pick2"),
];

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub task_id: String,
    pub task_type: String,
    pub success: bool,
    pub score: f64,
    pub turns_used: usize,
    pub termination: Termination,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Cell {
    pub episodes: usize,
    pub successes: usize,
    pub success_rate_percent: Option<i64>,
    pub mean_score_percent: Option<i64>,
}

impl Cell {
    fn from_episodes<'a>(eps: impl IntoIterator<Item = &'a EpisodeSummary>) -> Self {
        let (mut n, mut s, mut score) = (0usize, 0usize, 0.0f64);
        for e in eps {
            n += 1;
            s += e.success as usize;
            score += e.score;
        }
        Cell {
            episodes: n,
            successes: s,
            success_rate_percent: percent(s, n),
            mean_score_percent: (n > 0).then(|| (100.0 * score / n as f64).round() as i64),
        }
    }
}

/// 100 × num / den rounded half away from zero, on integers. `None` when `den` is 0.
pub fn percent(num: usize, den: usize) -> Option<i64> {
    if den == 0 {
        return None;
    }
    let (n, d) = (num as i128, den as i128);
    Some(((200 * n + d) / (2 * d)) as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SuiteMetrics {
    pub per_type: BTreeMap<String, Cell>,
    pub overall: Cell,
    #[serde(default)]
    pub terminations: BTreeMap<Termination, usize>,
}

pub fn compute_metrics(results: &[EpisodeSummary]) -> SuiteMetrics {
    let mut groups: BTreeMap<&str, Vec<&EpisodeSummary>> = BTreeMap::new();
    let mut terminations = BTreeMap::new();
    for r in results {
        groups.entry(&r.task_type).or_default().push(r);
        *terminations.entry(r.termination).or_insert(0) += 1;
    }
    SuiteMetrics {
        per_type: groups
            .into_iter()
            .map(|(k, v)| (k.to_string(), Cell::from_episodes(v)))
            .collect(),
        overall: Cell::from_episodes(results),
        terminations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Household,
    Shop,
}

impl From<Domain> for Layout {
    fn from(d: Domain) -> Self {
        match d {
            Domain::Household => Layout::Household,
            Domain::Shop => Layout::Shop,
        }
    }
}

impl std::str::FromStr for Layout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "household" => Ok(Layout::Household),
            "shop" => Ok(Layout::Shop),
            o => Err(format!("unknown layout `{o}`")),
        }
    }
}

fn show(v: Option<i64>) -> String {
    v.map_or_else(|| EMPTY_CELL.to_string(), |x| x.to_string())
}

fn pad_left(s: &str, w: usize) -> String {
    format!("{}{s}", " ".repeat(w.saturating_sub(s.chars().count())))
}

fn pad_right(s: &str, w: usize) -> String {
    format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())))
}

const COL: usize = 7;

/// Aligned table with one row per labelled run.
pub fn render_comparison(rows: &[(&str, &SuiteMetrics)], layout: Layout) -> String {
    let label_w = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(6);
    let header: Vec<&str> = match layout {
        Layout::Household => HOUSEHOLD_COLUMNS.iter().map(|(h, _)| *h).chain(["All"]).collect(),
        Layout::Shop => vec!["SR", "Score"],
    };
    let mut out = pad_right("", label_w);
    for h in &header {
        out.push_str(&pad_left(h, COL));
    }
    out.push('\n');
    for (label, m) in rows {
        let cells: Vec<String> = match layout {
            Layout::Household => HOUSEHOLD_COLUMNS
                .iter()
                .map(|(_, t)| show(m.per_type.get(*t).and_then(|c| c.success_rate_percent)))
                .chain([show(m.overall.success_rate_percent)])
                .collect(),
            Layout::Shop => vec![show(m.overall.success_rate_percent), show(m.overall.mean_score_percent)],
        };
        out.push_str(&pad_right(label, label_w));
        for c in &cells {
            out.push_str(&pad_left(c, COL));
        }
        out.push('\n');
    }
    out
}

/// Success-rate table for a single run.
pub fn render_report(metrics: &SuiteMetrics, layout: Layout) -> String {
    render_comparison(&[("SR", metrics)], layout)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(task_type: &str, success: bool, score: f64) -> EpisodeSummary {
        EpisodeSummary {
            task_id: format!("{task_type}-{success}"),
            task_type: task_type.into(),
            success,
            score,
            turns_used: 1,
            termination: if success { Termination::TaskSuccess } else { Termination::BudgetExhausted },
            trials: 1,
            diagnostic: None,
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(percent(122, 134), Some(91));
        assert_eq!(percent(0, 10), Some(0));
        assert_eq!(percent(1, 8), Some(13));
        assert_eq!(percent(3, 8), Some(38));
        assert_eq!(percent(1, 200), Some(1));
        assert_eq!(percent(0, 0), None);
    }

    #[test]
    fn suite_of_four() {
        let r = vec![ep("pick", true, 1.0), ep("pick", false, 0.0), ep("cool", true, 1.0), ep("cool", false, 0.0)];
        let m = compute_metrics(&r);
        assert_eq!(m.overall.success_rate_percent, Some(50));
        assert_eq!(m.per_type["pick"].episodes, 2);
        assert_eq!(m.terminations[&Termination::TaskSuccess], 2);
    }

    #[test]
    fn mean_score() {
        let m = compute_metrics(&[ep("x", true, 1.0), ep("x", false, 0.2)]);
        assert_eq!(m.overall.mean_score_percent, Some(60));
    }

    #[test]
    fn household_layout() {
        let m = compute_metrics(&[ep("pick", true, 1.0), ep("heat", false, 0.0)]);
        let t = render_report(&m, Layout::Household);
        assert_eq!(
            t,
            "         Pick  Clean   Heat   Cool   Look  Pick2    All\nSR        100      —      0      —      —      —     50\n"
        );
    }

    #[test]
    fn shop_layout() {
        let m = compute_metrics(&[ep("shampoo", true, 1.0), ep("shampoo", false, 0.5)]);
        assert_eq!(render_report(&m, Layout::Shop), "           SR  Score\nSR         50     75\n");
        assert_eq!(render_report(&SuiteMetrics::default(), Layout::Shop), "           SR  Score\nSR          —      —\n");
    }
}
