use super::{segment_view, DistillError};
use crate::discovery::{Segment, SkillSpec, STAGE_MAX_TOKENS};
use crate::domain::Domain;
use crate::gateway::{Gateway, PromptRequest};
use crate::templates;
use crate::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use tracing::{debug, warn};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub pattern: String,
    pub example: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Piece {
    Lit(String),
    Hole,
}

fn placeholder_pieces(pattern: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']') else { break };
        if open > 0 {
            out.push(Piece::Lit(rest[..open].to_string()));
        }
        out.push(Piece::Hole);
        rest = &rest[open + close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Lit(rest.to_string()));
    }
    out
}

/// Brackets kept as literal syntax, their content a placeholder: `click[Item ID]`.
fn bracket_pieces(pattern: &str) -> Vec<Piece> {
    let mut out = Vec::new();
    let mut rest = pattern;
    while let Some(open) = rest.find('[') {
        let Some(close) = rest[open..].find(']') else { break };
        out.push(Piece::Lit(rest[..=open].to_string()));
        out.push(Piece::Hole);
        out.push(Piece::Lit("]".into()));
        rest = &rest[open + close + 1..];
    }
    if !rest.is_empty() {
        out.push(Piece::Lit(rest.to_string()));
    }
    out
}

fn match_pieces(pieces: &[Piece], s: &str) -> bool {
    match pieces.split_first() {
        None => s.is_empty(),
        Some((Piece::Lit(l), rest)) => s.strip_prefix(l.as_str()).is_some_and(|r| match_pieces(rest, r)),
        Some((Piece::Hole, rest)) => {
            for (i, c) in s.char_indices() {
                if c == '[' || c == ']' {
                    return false;
                }
                let end = i + c.len_utf8();
                if match_pieces(rest, &s[end..]) {
                    return true;
                }
            }
            false
        }
    }
}

/// Whether `example` instantiates `pattern`.
pub fn pattern_matches(pattern: &str, example: &str) -> bool {
    let (p, e) = (pattern.trim(), example.trim());
    p == e || match_pieces(&placeholder_pieces(p), e) || match_pieces(&bracket_pieces(p), e)
}

impl PrimitiveSpec {
    pub fn is_valid(&self) -> bool {
        self.example.is_empty() || pattern_matches(&self.pattern, &self.example)
    }
}

/// Collect `> > name(...)` blocks and their action lines.
pub fn parse_primitive_response(response: &str) -> Result<BTreeMap<String, Vec<PrimitiveSpec>>, DistillError> {
    let mut out: BTreeMap<String, Vec<PrimitiveSpec>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (n, raw) in response.lines().enumerate() {
        let line = raw.trim();
        if let Some(h) = line.strip_prefix("> > ") {
            let head = h.split(':').next().unwrap_or(h);
            current = crate::discovery::parse_call(head).map(|(name, _)| name);
            if let Some(c) = &current {
                out.entry(c.clone()).or_default();
            }
            continue;
        }
        let Some(skill) = &current else { continue };
        if line.is_empty() || line.starts_with("Environment-specific actions") {
            continue;
        }
        let example = line
            .strip_prefix("Example:")
            .or_else(|| line.strip_prefix("# Example:"))
            .or_else(|| line.strip_prefix("# Example"));
        let list = out.get_mut(skill).expect("entry created at header");
        match example {
            Some(ex) => {
                let Some(last) = list.last_mut() else {
                    return Err(DistillError::MalformedBlock(n + 1));
                };
                if last.example.is_empty() {
                    last.example = ex.trim().to_string();
                }
            }
            None if line.starts_with('>') => current = None,
            None => {
                let pattern = line.strip_prefix("- ").unwrap_or(line).trim().to_string();
                list.push(PrimitiveSpec {
                    pattern,
                    example: String::new(),
                });
            }
        }
    }
    Ok(out)
}

/// Union by pattern, first example kept. Examples that do not fit their pattern are cleared.
pub fn merge_primitives(existing: &[PrimitiveSpec], new: Vec<PrimitiveSpec>) -> Vec<PrimitiveSpec> {
    let mut out = existing.to_vec();
    for mut p in new {
        if p.pattern.is_empty() {
            continue;
        }
        if !p.is_valid() {
            warn!(pattern = %p.pattern, example = %p.example, "primitive example does not match its pattern");
            p.example.clear();
        }
        match out.iter_mut().find(|x| x.pattern == p.pattern) {
            Some(x) if x.example.is_empty() => x.example = p.example,
            Some(_) => {}
            None => out.push(p),
        }
    }
    out
}

pub fn render_primitive_block(domain: Domain, skill: &SkillSpec, prims: &[PrimitiveSpec]) -> String {
    let mut s = format!("> > {}\nEnvironment-specific actions:\n", skill.signature());
    for p in prims {
        match domain {
            Domain::Household => {
                s.push_str(&format!("    - {}\n", p.pattern));
                if !p.example.is_empty() {
                    s.push_str(&format!("    Example: {}\n", p.example));
                }
            }
            Domain::Shop => {
                s.push_str(&format!("    {}\n", p.pattern));
                if !p.example.is_empty() {
                    s.push_str(&format!("    # Example {}\n", p.example));
                }
            }
        }
    }
    s
}

/// Natural-language gloss of a skill call in segment headers.
pub fn describe(name: &str, args: &[String]) -> String {
    let verb = name.replace('_', " ");
    match args {
        [] => verb,
        [a] => format!("{verb} the {a}"),
        [a, b, ..] => format!("{verb} the {a} in/on the {b}"),
    }
}

pub fn render_primitive_prompt(
    domain: Domain,
    skill: &SkillSpec,
    batch: &[(&Trajectory, &Segment)],
    existing: &[PrimitiveSpec],
) -> String {
    let mut parts = Vec::new();
    for (i, (t, seg)) in batch.iter().enumerate() {
        let inv = seg.invocation();
        let history = if seg.skill == crate::discovery::PSEUDO_SKILL {
            t.render()
        } else {
            segment_view(t, seg)
        };
        parts.push(format!(
            "Task {}:\nSuccess trial:\nPlan for Completing the Task:\n1. {inv}\n\nSegmented Interaction History:\n> > {inv}: {}\n{}",
            i + 1,
            describe(&seg.skill, &seg.args),
            history.trim_end()
        ));
    }
    let list = if existing.is_empty() {
        "Here is no list of environment-specific actions to start with.".to_string()
    } else {
        format!(
            "Here is the list of environment-specific actions to start with:\n\n{}",
            render_primitive_block(domain, skill, existing).trim_end()
        )
    };
    let body = format!("{}\n\n{list}", parts.join("\n\n"));
    templates::stage_prompt(templates::primitive_discovery(domain), &body)
}

/// Iterate over a skill's success segments, accumulating its primitive list.
pub fn discover_primitives(
    domain: Domain,
    skill: &SkillSpec,
    segments: &[(&Trajectory, &Segment)],
    batch: usize,
    gateway: &Gateway,
) -> Result<Vec<PrimitiveSpec>, DistillError> {
    let mut prims: Vec<PrimitiveSpec> = Vec::new();
    for (iter, chunk) in segments.chunks(batch.max(1)).enumerate() {
        let prompt = render_primitive_prompt(domain, skill, chunk, &prims);
        let resp = gateway.complete(&PromptRequest::user(prompt, STAGE_MAX_TOKENS, vec![]))?;
        match parse_primitive_response(&resp.text) {
            Ok(mut map) => {
                let new = map.remove(&skill.name).unwrap_or_default();
                prims = merge_primitives(&prims, new);
            }
            Err(e) => warn!(skill = %skill.name, iter, error = %e, "skipping primitive response"),
        }
        debug!(skill = %skill.name, iter, n = prims.len(), "primitive iteration");
    }
    if prims.is_empty() {
        return Err(DistillError::NoPrimitivesFound(skill.name.clone()));
    }
    Ok(prims)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_matching() {
        assert!(pattern_matches("go to [receptacle] [id]", "go to garbagecan 1"));
        assert!(pattern_matches(
            "take [object] [id] from [receptacle] [id]",
            "take apple 3 from garbagecan 1"
        ));
        assert!(!pattern_matches("go to [receptacle] [id]", "open fridge 1"));
        assert!(pattern_matches("click[Item ID]", "click[B078GWRC1J]"));
        assert!(pattern_matches("search[Query]", "search[3 ounce deodorant]"));
        assert!(pattern_matches("click[Back to Search]", "click[Back to Search]"));
        assert!(!pattern_matches("search[Query]", "click[x]"));
    }

    const RESPONSE: &str = "New summarization:\n\n> > find(object)\nEnvironment-specific actions:\n    - go to [receptacle] [id]\n    Example: go to garbagecan 1\n\n> > take(object)\nEnvironment-specific actions:\n    - take [object] [id] from [receptacle] [id]\n    Example: take apple 3 from garbagecan 1\n\n> > put(object, receptacle)\nEnvironment-specific actions:\n\n> > heat(object)\nEnvironment-specific actions:\n    - heat [object] [id] with [receptacle] [id]\n";

    #[test]
    fn parses_blocks() {
        let m = parse_primitive_response(RESPONSE).unwrap();
        assert_eq!(
            m["take"],
            vec![PrimitiveSpec {
                pattern: "take [object] [id] from [receptacle] [id]".into(),
                example: "take apple 3 from garbagecan 1".into()
            }]
        );
        assert_eq!(m["find"][0].pattern, "go to [receptacle] [id]");
        assert!(m["put"].is_empty());
        assert_eq!(m["heat"][0].example, "");
    }

    #[test]
    fn parses_shop_blocks() {
        let r = "> > search_item()\nEnvironment-specific actions:\n    search[Query]\n    # Example search[bright citrus deodorant]\n    click[Back to Search]\n    # Example click[Back to Search]\n";
        let m = parse_primitive_response(r).unwrap();
        assert_eq!(m["search_item"].len(), 2);
        assert!(m["search_item"].iter().all(PrimitiveSpec::is_valid));
    }

    #[test]
    fn dangling_example_is_malformed() {
        assert!(matches!(
            parse_primitive_response("> > find(object)\n    Example: go to x 1\n"),
            Err(DistillError::MalformedBlock(2))
        ));
    }

    #[test]
    fn union_keeps_first_example() {
        let a = vec![PrimitiveSpec {
            pattern: "go to [r] [i]".into(),
            example: "go to desk 1".into(),
        }];
        let b = vec![
            PrimitiveSpec {
                pattern: "go to [r] [i]".into(),
                example: "go to shelf 2".into(),
            },
            PrimitiveSpec {
                pattern: "open [r] [i]".into(),
                example: "close drawer 1".into(),
            },
        ];
        let m = merge_primitives(&a, b);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].example, "go to desk 1");
        assert_eq!(m[1].example, "");
    }
}
