use super::DistillError;
use crate::discovery::{SkillSpec, STAGE_MAX_TOKENS};
use crate::domain::Domain;
use crate::gateway::{Gateway, PromptRequest};
use crate::templates;
use serde::{Deserialize, Serialize};
use tracing::debug;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipOrigin {
    Contrastive,
    NonContrastive,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tip {
    pub text: String,
    pub origin: TipOrigin,
}

impl Tip {
    /// Collapses internal whitespace so the text stays on one line.
    pub fn new(text: &str, origin: TipOrigin) -> Self {
        Tip {
            text: text.split_whitespace().collect::<Vec<_>>().join(" "),
            origin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TipMode {
    Contrastive,
    NonContrastive,
}

impl TipMode {
    pub fn origin(self) -> TipOrigin {
        match self {
            TipMode::Contrastive => TipOrigin::Contrastive,
            TipMode::NonContrastive => TipOrigin::NonContrastive,
        }
    }
}

fn strip_enumeration(s: &str) -> &str {
    let s = s.trim_start();
    for p in ["- ", "* ", "• "] {
        if let Some(r) = s.strip_prefix(p) {
            return r;
        }
    }
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let r = &s[digits..];
        if let Some(r) = r.strip_prefix(". ").or_else(|| r.strip_prefix(") ")) {
            return r;
        }
    }
    s
}

pub fn normalize_tip(s: &str) -> String {
    strip_enumeration(s.trim())
        .trim()
        .trim_end_matches(['.', '!', '?', ';', ',', ':'])
        .trim()
        .to_lowercase()
}

/// Append new tips whose normalized text is not already present.
pub fn merge_tips(existing: &[Tip], new: &[Tip]) -> Vec<Tip> {
    let mut out = existing.to_vec();
    let mut seen: Vec<String> = out.iter().map(|t| normalize_tip(&t.text)).collect();
    for t in new {
        let n = normalize_tip(&t.text);
        if n.is_empty() || seen.contains(&n) {
            continue;
        }
        seen.push(n);
        out.push(t.clone());
    }
    out
}

/// Bullets after the final `Tips:` marker.
pub fn parse_tips(response: &str) -> Vec<String> {
    let body = match response.rfind("Tips:") {
        Some(i) => &response[i + "Tips:".len()..],
        None => return Vec::new(),
    };
    let mut out = Vec::new();
    for line in body.lines() {
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        let stripped = strip_enumeration(l);
        if stripped.len() == l.len() {
            if out.is_empty() {
                continue;
            }
            break;
        }
        if !stripped.trim().is_empty() {
            out.push(stripped.trim().to_string());
        }
    }
    out
}

/// One item of a tip batch: a success view and, when contrasting, a failure view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairView {
    pub success: String,
    pub failure: Option<String>,
}

pub fn render_tip_prompt(
    domain: Domain,
    mode: TipMode,
    whole_task: bool,
    batch: &[PairView],
    existing: &[Tip],
) -> String {
    let mut parts = Vec::new();
    for (i, v) in batch.iter().enumerate() {
        let mut s = format!("Task {}:\n", i + 1);
        if let (TipMode::Contrastive, Some(f)) = (mode, &v.failure) {
            s.push_str(&format!("Failure trial:\n{}\n\n", f.trim_end()));
        }
        s.push_str(&format!("Success trial:\n{}", v.success.trim_end()));
        parts.push(s);
    }
    let list = if existing.is_empty() {
        "Here is no list of tips to start with.".to_string()
    } else {
        let lines: Vec<String> = existing.iter().map(|t| format!("- {}", t.text)).collect();
        format!("Here is the list of tips to start with:\n{}", lines.join("\n"))
    };
    let body = format!("{}\n\n{list}", parts.join("\n\n"));
    templates::stage_prompt(templates::tips(domain, mode == TipMode::Contrastive, whole_task), &body)
}

/// Iterate over views in batches, accumulating a skill's tip list.
pub fn distill_tips(
    domain: Domain,
    skill: &SkillSpec,
    views: &[PairView],
    mode: TipMode,
    batch: usize,
    gateway: &Gateway,
) -> Result<Vec<Tip>, DistillError> {
    let usable: Vec<PairView> = views
        .iter()
        .filter(|v| mode == TipMode::NonContrastive || v.failure.is_some())
        .cloned()
        .collect();
    if usable.is_empty() {
        return Err(DistillError::NoPairsForSkill(skill.name.clone()));
    }
    let mut tips: Vec<Tip> = Vec::new();
    for (iter, chunk) in usable.chunks(batch.max(1)).enumerate() {
        let prompt = render_tip_prompt(domain, mode, skill.is_pseudo(), chunk, &tips);
        let resp = gateway.complete(&PromptRequest::user(prompt, STAGE_MAX_TOKENS, vec![]))?;
        let new: Vec<Tip> = parse_tips(&resp.text).iter().map(|t| Tip::new(t, mode.origin())).collect();
        tips = merge_tips(&tips, &new);
        debug!(skill = %skill.name, iter, n = tips.len(), "tip iteration");
    }
    Ok(tips)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Tip {
        Tip::new(s, TipOrigin::Contrastive)
    }

    #[test]
    fn normalization_dedup() {
        assert_eq!(merge_tips(&[t("A.")], &[t("a")]), vec![t("A.")]);
        assert_eq!(merge_tips(&[], &[t("x"), t("y")]), vec![t("x"), t("y")]);
        assert_eq!(merge_tips(&[t("1. Check the sink.")], &[t("- check the sink")]).len(), 1);
        let x = vec![t("a"), t("b")];
        assert_eq!(merge_tips(&x, &x), x);
    }

    #[test]
    fn parses_bullets_after_last_marker() {
        let r = "New summarization: In task 1, ...\n\nTips:\n- Try a different action.\n- Mug should be heated by a microwave rather than a stoveburner.\n\nNote: trailing";
        assert_eq!(
            parse_tips(r),
            vec![
                "Try a different action.",
                "Mug should be heated by a microwave rather than a stoveburner."
            ]
        );
        assert!(parse_tips("no marker").is_empty());
        assert_eq!(parse_tips("Tips:\n- a\nTips:\n1. b\n2) c"), vec!["b", "c"]);
    }

    #[test]
    fn tip_text_is_single_line() {
        assert_eq!(Tip::new("a\nb  c", TipOrigin::Human).text, "a b c");
    }

    #[test]
    fn prompt_lists_existing_tips() {
        let v = [PairView {
            success: "S".into(),
            failure: Some("F".into()),
        }];
        let p = render_tip_prompt(Domain::Household, TipMode::Contrastive, false, &v, &[t("x")]);
        assert!(p.contains("Task 1:\nFailure trial:\nF\n\nSuccess trial:\nS\n\nHere is the list of tips to start with:\n- x"));
        let p = render_tip_prompt(Domain::Household, TipMode::NonContrastive, false, &v, &[]);
        assert!(!p.contains("Failure trial:\nF"));
        assert!(p.ends_with("Here is no list of tips to start with.\n\nNew summarization: "));
    }
}
