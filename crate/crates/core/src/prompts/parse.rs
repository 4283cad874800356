use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PlannedStep, ProposedSequence, SkillLabels};
use crate::world::Skill;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseError {
    #[error("response does not start with a Description line")]
    MissingDescription,
    #[error("bad iteration numbering: {detail}")]
    BadIterationNumbering { detail: String },
    #[error("unknown skill `{text}`")]
    UnknownSkill { text: String },
    #[error("label {label} is {expected}, but the response names {named}")]
    LabelNameMismatch {
        label: char,
        expected: String,
        named: String,
    },
    #[error("choice `{text}` is not one of the offered skills")]
    UnexpectedChoice { text: String },
}

fn strip_prefix_ci<'a>(line: &'a str, prefix: &str) -> Option<&'a str> {
    let head = line.get(..prefix.len())?;
    head.eq_ignore_ascii_case(prefix).then(|| &line[prefix.len()..])
}

fn clean(line: &str) -> &str {
    line.trim()
        .trim_matches(|c| matches!(c, '`' | '"' | '\'' | '*'))
        .trim()
}

/// `Iteration 12:` optionally followed by the output on the same line.
fn iteration_header(line: &str) -> Option<(Result<u32, String>, &str)> {
    let rest = strip_prefix_ci(line, "iteration")?;
    let (num, tail) = rest.split_once(':')?;
    let num = num.trim();
    let parsed = num.parse::<u32>().map_err(|_| num.to_string());
    Some((parsed, tail.trim()))
}

/// Parses `L. move to blue bowl`, `move to blue bowl`, or a bare `L`.
fn parse_output(body: &str, labels: &SkillLabels) -> Result<Skill, ParseError> {
    let body = clean(body).trim_end_matches('.').trim();
    let unknown = || ParseError::UnknownSkill {
        text: body.to_string(),
    };
    let mut chars = body.chars();
    let first = chars.next().ok_or_else(unknown)?;
    let after = chars.as_str();
    let labelled = first.is_ascii_alphabetic() && (after.is_empty() || after.starts_with('.'));
    if labelled {
        let label = first.to_ascii_uppercase();
        let by_label = labels.skill_of(label).ok_or_else(unknown)?.clone();
        let name = after.trim_start_matches('.').trim();
        if name.is_empty() {
            return Ok(by_label);
        }
        let named: Skill = name.parse().map_err(|_| unknown())?;
        if !labels.contains(&named) {
            return Err(unknown());
        }
        if named != by_label {
            return Err(ParseError::LabelNameMismatch {
                label,
                expected: by_label.spoken_name(),
                named: named.spoken_name(),
            });
        }
        return Ok(by_label);
    }
    let named: Skill = body.parse().map_err(|_| unknown())?;
    if labels.contains(&named) {
        Ok(named)
    } else {
        Err(unknown())
    }
}

/// Parses a chain-of-thought response whose first step must be numbered
/// `expected_start`.
pub fn parse_response(
    text: &str,
    labels: &SkillLabels,
    expected_start: u32,
) -> Result<ProposedSequence, ParseError> {
    let mut lines = text.lines().map(clean).filter(|l| !l.is_empty());
    let description = lines
        .next()
        .and_then(|l| strip_prefix_ci(l, "description:"))
        .ok_or(ParseError::MissingDescription)?
        .trim()
        .to_string();

    let bad = |detail: String| ParseError::BadIterationNumbering { detail };
    let mut steps: Vec<PlannedStep> = Vec::new();
    let mut pending: Option<u32> = None;

    for line in lines {
        if let Some((num, tail)) = iteration_header(line) {
            if let Some(open) = pending {
                return Err(bad(format!("iteration {open} has no output")));
            }
            let num = num.map_err(|n| bad(format!("`{n}` is not an iteration number")))?;
            let want = steps.last().map_or(expected_start, |s| s.iteration + 1);
            if num != want {
                return Err(bad(format!("expected iteration {want}, found {num}")));
            }
            pending = Some(num);
            if let Some(body) = strip_prefix_ci(tail, "output:") {
                let skill = parse_output(body, labels)?;
                steps.push(PlannedStep {
                    iteration: num,
                    skill,
                });
                pending = None;
            }
        } else if let Some(body) = strip_prefix_ci(line, "output:") {
            let Some(iteration) = pending.take() else {
                return Err(bad("output without an iteration header".to_string()));
            };
            let skill = parse_output(body, labels)?;
            steps.push(PlannedStep { iteration, skill });
        }
        // anything else (explanations, blank filler) is ignored
    }
    if let Some(open) = pending {
        return Err(bad(format!("iteration {open} has no output")));
    }
    if steps.is_empty() {
        return Err(bad("no iterations in response".to_string()));
    }
    let terminated = steps.last().is_some_and(|s| s.skill == Skill::Done);
    Ok(ProposedSequence {
        description,
        steps,
        raw_text: text.to_string(),
        terminated,
    })
}

/// Renders a sequence in the response format [`parse_response`] accepts.
pub fn render_response(description: &str, steps: &[PlannedStep], labels: &SkillLabels) -> String {
    let mut out = format!("Description: {description}\n");
    for step in steps {
        out.push_str(&format!(
            "Iteration {}:\n    Output: {}\n",
            step.iteration,
            labels.labelled(&step.skill)
        ));
    }
    out
}

/// Reads a conflict-resolution answer; it must name one of `options`.
pub fn parse_choice(text: &str, labels: &SkillLabels, options: &[Skill]) -> Result<Skill, ParseError> {
    let body = text
        .lines()
        .map(clean)
        .filter_map(|l| strip_prefix_ci(l, "output:"))
        .next_back()
        .ok_or_else(|| ParseError::UnknownSkill {
            text: text.trim().to_string(),
        })?;
    let skill = parse_output(body, labels)?;
    if options.contains(&skill) {
        Ok(skill)
    } else {
        Err(ParseError::UnexpectedChoice {
            text: skill.spoken_name(),
        })
    }
}
