use super::primitives::PrimitiveSpec;
use super::tips::{normalize_tip, Tip};
use super::DistillError;
use crate::discovery::{parse_call, SkillSet, SkillSpec};
use crate::domain::Domain;
use crate::templates;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AblationFlags {
    pub sd: bool,
    pub pd: bool,
    pub td: bool,
    pub contrastive: bool,
}

impl AblationFlags {
    pub const FULL: AblationFlags = AblationFlags {
        sd: true,
        pd: true,
        td: true,
        contrastive: true,
    };
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self::FULL
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SkillKnowledge {
    #[serde(default)]
    pub primitives: Vec<PrimitiveSpec>,
    #[serde(default)]
    pub tips: Vec<Tip>,
    #[serde(default)]
    pub fewshot: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub skills: Vec<SkillSpec>,
    pub per_skill: BTreeMap<String, SkillKnowledge>,
    #[serde(default)]
    pub base_fewshot: Vec<String>,
    #[serde(default)]
    pub ablation_provenance: AblationFlags,
}

impl KnowledgeBase {
    /// Knowledge with no tips or primitives: the plain few-shot baseline.
    pub fn flat(fewshot: Vec<String>) -> Self {
        let s = SkillSpec::pseudo_task();
        KnowledgeBase {
            per_skill: BTreeMap::from([(
                s.name.clone(),
                SkillKnowledge {
                    fewshot,
                    ..Default::default()
                },
            )]),
            skills: vec![s],
            base_fewshot: Vec::new(),
            ablation_provenance: AblationFlags {
                sd: false,
                pd: false,
                td: false,
                contrastive: false,
            },
        }
    }

    pub fn skill_set(&self) -> SkillSet {
        SkillSet::new(self.skills.clone())
    }

    pub fn is_pseudo(&self) -> bool {
        self.skill_set().is_pseudo()
    }

    pub fn knowledge(&self, skill: &str) -> Option<&SkillKnowledge> {
        self.per_skill.get(skill)
    }

    pub fn validate(&self) -> Result<(), DistillError> {
        let bad = |r: String| Err(DistillError::MalformedKb(r));
        let names: BTreeSet<&str> = self.skills.iter().map(|s| s.name.as_str()).collect();
        if names.len() != self.skills.len() {
            return bad("duplicate skill names".into());
        }
        let keys: BTreeSet<&str> = self.per_skill.keys().map(String::as_str).collect();
        if names != keys {
            return bad(format!("per_skill keys {keys:?} differ from skills {names:?}"));
        }
        for (name, k) in &self.per_skill {
            let patterns: BTreeSet<&str> = k.primitives.iter().map(|p| p.pattern.as_str()).collect();
            if patterns.len() != k.primitives.len() {
                return bad(format!("{name}: duplicate primitive patterns"));
            }
            let tips: BTreeSet<String> = k.tips.iter().map(|t| normalize_tip(&t.text)).collect();
            if tips.len() != k.tips.len() {
                return bad(format!("{name}: duplicate tips"));
            }
            if k.tips.iter().any(|t| t.text.trim().is_empty() || t.text.contains('\n')) {
                return bad(format!("{name}: tip text must be one non-empty line"));
            }
        }
        for ex in &self.base_fewshot {
            for line in ex.lines() {
                let call = line
                    .strip_prefix("> call: ")
                    .or_else(|| line.strip_prefix("Action: ").filter(|a| !a.starts_with("think[")));
                if let Some((name, _)) = call.and_then(parse_call) {
                    if !names.contains(name.as_str()) {
                        return bad(format!("base example calls unknown skill `{name}`"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), DistillError> {
        if let Some(d) = path.parent() {
            if !d.as_os_str().is_empty() {
                std::fs::create_dir_all(d).map_err(|e| DistillError::Io(e.to_string()))?;
            }
        }
        let text = serde_json::to_string_pretty(self).expect("kb serializes") + "\n";
        std::fs::write(path, text).map_err(|e| DistillError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, DistillError> {
        let text = std::fs::read_to_string(path).map_err(|e| DistillError::Io(format!("{}: {e}", path.display())))?;
        let kb: KnowledgeBase = serde_json::from_str(&text).map_err(|e| DistillError::MalformedKb(e.to_string()))?;
        kb.validate()?;
        Ok(kb)
    }
}

pub const HOUSEHOLD_PRIMITIVE_HEADER: &str = "You can think about your plan in the first step, and after that you can only select from the following actions in your response (please strictly follow the syntax):";
pub const SHOP_PRIMITIVE_HEADER: &str = "Please only generate following actions in your response:";

fn guidance(domain: Domain, k: &SkillKnowledge, flags: AblationFlags) -> (String, String) {
    let tips: &[Tip] = if flags.td { &k.tips } else { &[] };
    let prims: &[PrimitiveSpec] = if flags.pd { &k.primitives } else { &[] };
    if tips.is_empty() && prims.is_empty() {
        return (String::new(), String::new());
    }
    let mut t = " Please consider the following tips to solve new tasks:".to_string();
    for (i, tip) in tips.iter().enumerate() {
        t.push_str(&format!("\n{}. {}", i + 1, tip.text));
    }
    let mut p = String::new();
    if !prims.is_empty() {
        let header = match domain {
            Domain::Household => HOUSEHOLD_PRIMITIVE_HEADER,
            Domain::Shop => SHOP_PRIMITIVE_HEADER,
        };
        p.push_str(&format!("\n{}. {header}", tips.len() + 1));
        for prim in prims {
            p.push_str(&format!("\n    {}", prim.pattern));
            if !prim.example.is_empty() {
                match domain {
                    Domain::Household => p.push_str(&format!("\n    # Example:\n        {}", prim.example)),
                    Domain::Shop => p.push_str(&format!("\n    # Example {}", prim.example)),
                }
            }
        }
    }
    (t, p)
}

/// The fixed part of a skill-policy prompt.
pub fn build_skill_prompt(domain: Domain, k: &SkillKnowledge, flags: AblationFlags) -> String {
    let tpl = match domain {
        Domain::Household => templates::HOUSEHOLD_SKILL,
        Domain::Shop => templates::SHOP_SKILL,
    };
    let (tips, prims) = guidance(domain, k, flags);
    let examples = k.fewshot.join("\n");
    templates::fill(tpl, &[("tips", &tips), ("primitives", &prims), ("examples", &examples)])
}

pub fn skill_list(domain: Domain, skills: &[SkillSpec]) -> String {
    let sigs: Vec<String> = skills.iter().map(SkillSpec::signature).collect();
    match (domain, sigs.as_slice()) {
        (Domain::Household, [init @ .., last]) if !init.is_empty() => format!("{} and {last}", init.join(", ")),
        _ => sigs.join(", "),
    }
}

/// The fixed part of the base-policy prompt.
pub fn build_base_prompt(domain: Domain, kb: &KnowledgeBase) -> String {
    let tpl = match domain {
        Domain::Household => templates::HOUSEHOLD_BASE,
        Domain::Shop => templates::SHOP_BASE,
    };
    let examples = kb.base_fewshot.join("\n");
    templates::fill(
        tpl,
        &[("skill_list", &skill_list(domain, &kb.skills)), ("examples", &examples)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distill::tips::TipOrigin;

    fn heat() -> SkillKnowledge {
        SkillKnowledge {
            primitives: vec![
                PrimitiveSpec {
                    pattern: "go to [receptacle] [id]".into(),
                    example: "go to countertop 1".into(),
                },
                PrimitiveSpec {
                    pattern: "heat [object] [id] with [receptacle] [id]".into(),
                    example: "heat egg 1 with microwave 1".into(),
                },
            ],
            tips: vec![Tip::new("Use a microwave.", TipOrigin::Contrastive)],
            fewshot: vec!["EX1\n".into(), "EX2\n".into()],
        }
    }

    #[test]
    fn skill_prompt_layout() {
        let p = build_skill_prompt(Domain::Household, &heat(), AblationFlags::FULL);
        assert!(p.starts_with(
            "Interact with a household to complete a given task. Please consider the following tips to solve new tasks:\n1. Use a microwave.\n2. You can think"
        ));
        assert!(p.contains("\n    heat [object] [id] with [receptacle] [id]\n    # Example:\n        heat egg 1 with microwave 1\n\nHere are some examples.\n\nEX1\n\nEX2\n"));
    }

    #[test]
    fn flags_drop_sections() {
        let no_td = AblationFlags { td: false, ..AblationFlags::FULL };
        let p = build_skill_prompt(Domain::Household, &heat(), no_td);
        assert!(!p.contains("microwave."));
        assert!(p.contains("1. You can think"));
        let none = AblationFlags { td: false, pd: false, ..AblationFlags::FULL };
        let p = build_skill_prompt(Domain::Household, &heat(), none);
        assert_eq!(p, "Interact with a household to complete a given task.\n\nHere are some examples.\n\nEX1\n\nEX2\n");
    }

    #[test]
    fn base_header_lists_skills() {
        let skills = vec![
            SkillSpec::new("find", &["object"]),
            SkillSpec::new("take", &["object"]),
            SkillSpec::new("put", &["object", "receptacle"]),
        ];
        assert_eq!(skill_list(Domain::Household, &skills), "find(object), take(object) and put(object, receptacle)");
        assert_eq!(skill_list(Domain::Household, &skills[..1]), "find(object)");
        assert_eq!(skill_list(Domain::Shop, &skills[..2]), "find(object), take(object)");
    }

    #[test]
    fn kb_roundtrip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.json");
        let mut kb = KnowledgeBase {
            skills: vec![SkillSpec::new("heat", &["object"])],
            per_skill: BTreeMap::from([("heat".to_string(), heat())]),
            base_fewshot: vec!["> call: heat(egg)\nSubprocedure finished.\n".into()],
            ablation_provenance: AblationFlags::FULL,
        };
        kb.save(&path).unwrap();
        assert_eq!(KnowledgeBase::load(&path).unwrap(), kb);
        kb.per_skill.insert("cool".into(), SkillKnowledge::default());
        assert!(matches!(kb.validate(), Err(DistillError::MalformedKb(_))));
        kb.per_skill.remove("cool");
        kb.base_fewshot = vec!["> call: cool(egg)\n".into()];
        assert!(kb.validate().is_err());
    }
}
