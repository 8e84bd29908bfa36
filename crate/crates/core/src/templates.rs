//! Prompt templates. Stage prompts are fixed instruction-plus-example preambles;
//! policy prompts use `{{placeholder}}` slots.

use crate::domain::Domain;

pub const HOUSEHOLD_SKILL_DISCOVERY: &str = include_str!("templates/household_skill_discovery.txt");
pub const SHOP_SKILL_DISCOVERY: &str = include_str!("templates/shop_skill_discovery.txt");
pub const HOUSEHOLD_PRIMITIVE_DISCOVERY: &str = include_str!("templates/household_primitive_discovery.txt");
pub const SHOP_PRIMITIVE_DISCOVERY: &str = include_str!("templates/shop_primitive_discovery.txt");
pub const HOUSEHOLD_TIPS_CONTRASTIVE: &str = include_str!("templates/household_tips_contrastive.txt");
pub const HOUSEHOLD_TIPS_NC: &str = include_str!("templates/household_tips_nc.txt");
pub const SHOP_TIPS_CONTRASTIVE: &str = include_str!("templates/shop_tips_contrastive.txt");
pub const SHOP_TIPS_NC: &str = include_str!("templates/shop_tips_nc.txt");
pub const HOUSEHOLD_TASK_TIPS_CONTRASTIVE: &str = include_str!("templates/household_task_tips_contrastive.txt");
pub const HOUSEHOLD_TASK_TIPS_NC: &str = include_str!("templates/household_task_tips_nc.txt");
pub const SHOP_TASK_TIPS_CONTRASTIVE: &str = include_str!("templates/shop_task_tips_contrastive.txt");
pub const SHOP_TASK_TIPS_NC: &str = include_str!("templates/shop_task_tips_nc.txt");
pub const HOUSEHOLD_BASE: &str = include_str!("templates/household_base.txt");
pub const SHOP_BASE: &str = include_str!("templates/shop_base.txt");
pub const HOUSEHOLD_SKILL: &str = include_str!("templates/household_skill.txt");
pub const SHOP_SKILL: &str = include_str!("templates/shop_skill.txt");
pub const REFLECTION: &str = include_str!("templates/reflection.txt");

pub fn skill_discovery(domain: Domain) -> &'static str {
    match domain {
        Domain::Household => HOUSEHOLD_SKILL_DISCOVERY,
        Domain::Shop => SHOP_SKILL_DISCOVERY,
    }
}

pub fn primitive_discovery(domain: Domain) -> &'static str {
    match domain {
        Domain::Household => HOUSEHOLD_PRIMITIVE_DISCOVERY,
        Domain::Shop => SHOP_PRIMITIVE_DISCOVERY,
    }
}

/// Tip distillation preamble. `whole_task` selects the variant used without skills.
pub fn tips(domain: Domain, contrastive: bool, whole_task: bool) -> &'static str {
    match (domain, contrastive, whole_task) {
        (Domain::Household, true, false) => HOUSEHOLD_TIPS_CONTRASTIVE,
        (Domain::Household, false, false) => HOUSEHOLD_TIPS_NC,
        (Domain::Shop, true, false) => SHOP_TIPS_CONTRASTIVE,
        (Domain::Shop, false, false) => SHOP_TIPS_NC,
        (Domain::Household, true, true) => HOUSEHOLD_TASK_TIPS_CONTRASTIVE,
        (Domain::Household, false, true) => HOUSEHOLD_TASK_TIPS_NC,
        (Domain::Shop, true, true) => SHOP_TASK_TIPS_CONTRASTIVE,
        (Domain::Shop, false, true) => SHOP_TASK_TIPS_NC,
    }
}

/// Every stage preamble, for prompt classification.
pub fn all_stage_templates() -> [(&'static str, Stage, Domain); 12] {
    use Domain::*;
    [
        (HOUSEHOLD_SKILL_DISCOVERY, Stage::Discovery, Household),
        (SHOP_SKILL_DISCOVERY, Stage::Discovery, Shop),
        (HOUSEHOLD_PRIMITIVE_DISCOVERY, Stage::Primitives, Household),
        (SHOP_PRIMITIVE_DISCOVERY, Stage::Primitives, Shop),
        (HOUSEHOLD_TIPS_CONTRASTIVE, Stage::TipsContrastive, Household),
        (HOUSEHOLD_TIPS_NC, Stage::TipsNonContrastive, Household),
        (SHOP_TIPS_CONTRASTIVE, Stage::TipsContrastive, Shop),
        (SHOP_TIPS_NC, Stage::TipsNonContrastive, Shop),
        (HOUSEHOLD_TASK_TIPS_CONTRASTIVE, Stage::TipsContrastive, Household),
        (HOUSEHOLD_TASK_TIPS_NC, Stage::TipsNonContrastive, Household),
        (SHOP_TASK_TIPS_CONTRASTIVE, Stage::TipsContrastive, Shop),
        (SHOP_TASK_TIPS_NC, Stage::TipsNonContrastive, Shop),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Discovery,
    Primitives,
    TipsContrastive,
    TipsNonContrastive,
}

/// Replace every `{{key}}` slot.
pub fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in values {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

/// Preamble followed by the new material and the response cue.
pub fn stage_prompt(preamble: &str, body: &str) -> String {
    format!("{}\n\n{}\n\nNew summarization: ", preamble.trim_end(), body.trim_end())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_replaces_all_slots() {
        assert_eq!(fill("a {{x}} b {{x}} {{y}}", &[("x", "1"), ("y", "2")]), "a 1 b 1 2");
    }

    #[test]
    fn stage_templates_are_distinct_prefixes() {
        let all = all_stage_templates();
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                if i != j {
                    assert!(!a.0.trim_end().starts_with(b.0.trim_end()), "{i} {j}");
                }
            }
        }
    }

    #[test]
    fn policy_templates_have_slots() {
        for t in [HOUSEHOLD_SKILL, SHOP_SKILL] {
            for k in ["{{tips}}", "{{primitives}}", "{{examples}}"] {
                assert!(t.contains(k));
            }
        }
        for t in [HOUSEHOLD_BASE, SHOP_BASE] {
            assert!(t.contains("{{skill_list}}") && t.contains("{{examples}}"));
        }
        assert!(REFLECTION.contains("{{transcript}}"));
    }
}
