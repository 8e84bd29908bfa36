use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SkillSpec {
    pub name: String,
    pub params: Vec<String>,
}

impl SkillSpec {
    pub fn new(name: &str, params: &[&str]) -> Self {
        SkillSpec {
            name: name.to_string(),
            params: params.iter().map(|p| p.to_string()).collect(),
        }
    }

    /// Declared form, e.g. `put(object, receptacle)`.
    pub fn signature(&self) -> String {
        format!("{}({})", self.name, self.params.join(", "))
    }

    /// The pseudo-skill covering a whole task, used when skill discovery is ablated.
    pub fn pseudo_task() -> Self {
        SkillSpec::new(PSEUDO_SKILL, &[])
    }

    pub fn is_pseudo(&self) -> bool {
        self.name == PSEUDO_SKILL
    }
}

pub const PSEUDO_SKILL: &str = "task";

impl fmt::Display for SkillSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.signature())
    }
}

/// Invocation form, e.g. `put(apple, sidetable)`.
pub fn invocation(name: &str, args: &[String]) -> String {
    format!("{}({})", name, args.join(", "))
}

fn normalize_name(s: &str) -> Option<String> {
    let n = s.trim().to_lowercase().replace([' ', '-'], "_");
    let ok = !n.is_empty()
        && n.chars().next().is_some_and(|c| c.is_ascii_lowercase())
        && n.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    ok.then_some(n)
}

/// Parse `name(a, b)` into a name and argument list. Names are normalized to snake case.
pub fn parse_call(s: &str) -> Option<(String, Vec<String>)> {
    let s = s.trim();
    let open = s.find('(')?;
    let inner = s[open + 1..].strip_suffix(')')?;
    if inner.contains('(') || inner.contains(')') {
        return None;
    }
    let name = normalize_name(&s[..open])?;
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|a| a.trim().to_string()).collect()
    };
    if args.iter().any(String::is_empty) {
        return None;
    }
    Some((name, args))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SkillSet {
    pub skills: Vec<SkillSpec>,
}

impl SkillSet {
    pub fn new(skills: Vec<SkillSpec>) -> Self {
        SkillSet { skills }
    }

    pub fn get(&self, name: &str) -> Option<&SkillSpec> {
        self.skills.iter().find(|s| s.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.skills.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn is_pseudo(&self) -> bool {
        self.skills.len() == 1 && self.skills[0].is_pseudo()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(d) = path.parent() {
            if !d.as_os_str().is_empty() {
                std::fs::create_dir_all(d)?;
            }
        }
        std::fs::write(path, serde_json::to_string_pretty(self).expect("skills serialize") + "\n")
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn call_parsing() {
        assert_eq!(
            parse_call("put(apple, sidetable)"),
            Some(("put".into(), vec!["apple".into(), "sidetable".into()]))
        );
        assert_eq!(parse_call("search_item()"), Some(("search_item".into(), vec![])));
        assert_eq!(parse_call("Select Item()"), Some(("select_item".into(), vec![])));
        assert_eq!(parse_call("find apple"), None);
        assert_eq!(parse_call("find(a,)"), None);
        assert_eq!(parse_call("9x()"), None);
    }

    #[test]
    fn signature_format() {
        assert_eq!(SkillSpec::new("put", &["object", "receptacle"]).signature(), "put(object, receptacle)");
        assert_eq!(SkillSpec::new("search_item", &[]).signature(), "search_item()");
    }
}
