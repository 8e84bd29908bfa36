use super::generate::similar_object;
use super::grammar::{parse_action, HouseAction};
use super::world::HouseholdWorld;
use crate::env::{CorruptionMode, EnvError};

/// Inject one failure of the given class into an expert action sequence.
/// The result is replayed against the same world to produce the failure log.
pub fn corrupt_household(
    world: &HouseholdWorld,
    actions: &[String],
    mode: CorruptionMode,
    seed: u64,
) -> Result<Vec<String>, EnvError> {
    let inapplicable = || EnvError::Inapplicable(mode);
    match mode {
        CorruptionMode::WrongPreposition => {
            let i = actions
                .iter()
                .position(|a| a.starts_with("put ") && a.contains(" in/on "))
                .ok_or_else(inapplicable)?;
            let mut out = actions.to_vec();
            out[i] = out[i].replacen(" in/on ", " on ", 1);
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
            for (i, a) in actions.iter().enumerate() {
                let Some(HouseAction::Take(obj, rec)) = parse_action(a) else { continue };
                let Some(r) = world.receptacle(&rec) else { continue };
                let sim_name = similar_object(&obj.name);
                let Some(&wrong) = world.receptacles[r]
                    .contents
                    .iter()
                    .find(|&&o| world.objects[o].label.name == sim_name)
                else {
                    continue;
                };
                let wrong = world.objects[wrong].label.to_string();
                let right = obj.to_string();
                let mut out = actions[..i].to_vec();
                for (j, b) in actions.iter().enumerate().skip(i) {
                    if j > i && b.starts_with("take ") {
                        out.extend(actions[j..].iter().cloned());
                        return Ok(out);
                    }
                    out.push(replace_label(b, &right, &wrong));
                }
                return Ok(out);
            }
            Err(inapplicable())
        }
        CorruptionMode::SkipSubgoal => {
            let i = actions
                .iter()
                .position(|a| matches!(parse_action(a), Some(HouseAction::Transform(..))))
                .ok_or_else(inapplicable)?;
            let mut out = actions.to_vec();
            out.remove(i);
            Ok(out)
        }
    }
}

/// Replace a whole `name id` label, not a prefix of a longer one.
fn replace_label(action: &str, from: &str, to: &str) -> String {
    let toks: Vec<&str> = action.split(' ').collect();
    let f: Vec<&str> = from.split(' ').collect();
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if i + 1 < toks.len() && toks[i] == f[0] && toks[i + 1] == f[1] {
            out.push(to.to_string());
            i += 2;
        } else {
            out.push(toks[i].to_string());
            i += 1;
        }
    }
    out.join(" ")
}
