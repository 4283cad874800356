//! Prompt construction and response parsing.
//!
//! The system prompt is fixed per pipeline configuration. The user prompt
//! carries the labelled skill set, the initial object list, the instruction,
//! affordance feedback, the optional observation, and the executed history,
//! ending with an `Iteration t:` / `Output:` cue. Responses are a
//! `Description:` line followed by `Iteration N:` / `Output: L. skill` pairs.

mod parse;

pub use parse::{parse_choice, parse_response, render_response, ParseError};

use serde::{Deserialize, Serialize};

use crate::planner::PipelineConfig;
use crate::world::{SceneDescription, Skill, WorldState};

const SYSTEM_TEMPLATE: &str = include_str!("system_prompt.txt");

const COT_LINE: &str =
    "You should describe the reasoning behind your decision and consider the high-level goal of the task before making a choice.\n";
const SA_LINE: &str = "Previous Affordance Feedback: A record of action names, their failure reasons, and some suggestion from previous iterations. Please consider this information when making your decision.\n";
const OBS_LINE: &str = "Current Observation: An image of the robot's current environment.\n";

/// Appended to the user prompt after a malformed response.
pub const FORMAT_REMINDER: &str = "Reminder: answer with a first line \"Description: ...\" followed by \"Iteration N:\" and \"Output: [character]. [action]\" lines, starting from the current iteration.";

/// Letter-labelled skills for one scenario: the eleven fixed skills in listing
/// order, then one move-to skill per bowl.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillLabels {
    pub entries: Vec<(char, Skill)>,
}

impl SkillLabels {
    pub fn for_state(state: &WorldState) -> Self {
        let mut bowls: Vec<_> = state.bowls.iter().collect();
        bowls.sort_by_key(|b| b.id);
        let skills = Skill::FIXED
            .iter()
            .cloned()
            .chain(bowls.iter().map(|b| Skill::move_to(&b.color)));
        let entries = ('A'..='Z').zip(skills).collect();
        SkillLabels { entries }
    }

    pub fn label_of(&self, skill: &Skill) -> Option<char> {
        self.entries.iter().find(|(_, s)| s == skill).map(|(c, _)| *c)
    }

    pub fn skill_of(&self, label: char) -> Option<&Skill> {
        let label = label.to_ascii_uppercase();
        self.entries.iter().find(|(c, _)| *c == label).map(|(_, s)| s)
    }

    pub fn contains(&self, skill: &Skill) -> bool {
        self.label_of(skill).is_some()
    }

    /// `J. grasp spoon`
    pub fn labelled(&self, skill: &Skill) -> String {
        match self.label_of(skill) {
            Some(c) => format!("{c}. {}", skill.spoken_name()),
            None => skill.spoken_name(),
        }
    }

    /// `['A. scoop', 'B. stir', ...]`
    pub fn skill_set_line(&self) -> String {
        let items: Vec<String> = self
            .entries
            .iter()
            .map(|(c, s)| format!("'{c}. {}'", s.spoken_name()))
            .collect();
        format!("[{}]", items.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedStep {
    pub iteration: u32,
    pub skill: Skill,
}

/// A parsed model plan: the reasoning line and the remaining skills, one per
/// iteration, starting at the iteration it was requested for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposedSequence {
    pub description: String,
    pub steps: Vec<PlannedStep>,
    pub raw_text: String,
    /// False when the last step is not DONE.
    pub terminated: bool,
}

impl ProposedSequence {
    pub fn first(&self) -> &PlannedStep {
        &self.steps[0]
    }

    pub fn start_iteration(&self) -> u32 {
        self.steps[0].iteration
    }

    pub fn last_iteration(&self) -> u32 {
        self.steps.last().map_or(0, |s| s.iteration)
    }

    pub fn skill_at(&self, iteration: u32) -> Option<&Skill> {
        self.steps
            .iter()
            .find(|s| s.iteration == iteration)
            .map(|s| &s.skill)
    }
}

/// Affordance feedback gathered during an episode, keyed by iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackLog {
    pub entries: Vec<(u32, String)>,
}

impl FeedbackLog {
    pub fn push(&mut self, iteration: u32, line: String) {
        self.entries.push((iteration, line));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One line per iteration: `In iteration 3, Cannot do ... Cannot do ...`
    pub fn rendered_lines(&self) -> Vec<String> {
        let mut out: Vec<(u32, Vec<&str>)> = Vec::new();
        for (it, line) in &self.entries {
            match out.iter_mut().find(|(i, _)| i == it) {
                Some((_, lines)) => lines.push(line),
                None => out.push((*it, vec![line])),
            }
        }
        out.into_iter()
            .map(|(it, lines)| format!("In iteration {it}, {}", lines.join(" ")))
            .collect()
    }
}

/// What the planner sees of the current scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub scene: SceneDescription,
    pub image: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub image: Option<Vec<u8>>,
}

pub fn build_system_prompt(config: &PipelineConfig) -> String {
    SYSTEM_TEMPLATE
        .replace("{{COT}}", if config.use_cot { COT_LINE } else { "" })
        .replace("{{SA}}", if config.use_sa { SA_LINE } else { "" })
        .replace("{{OBS}}", if config.use_observation { OBS_LINE } else { "" })
}

/// `['white_bowl (with kidney beans)', 'blue_bowl (with tofu pudding)']`
pub fn object_list_line(state: &WorldState) -> String {
    let mut bowls: Vec<_> = state.bowls.iter().collect();
    bowls.sort_by_key(|b| b.id);
    let items: Vec<String> = bowls
        .iter()
        .map(|b| format!("'{} (with {})'", b.name(), b.contents))
        .collect();
    format!("[{}]", items.join(", "))
}

/// Everything the user prompt needs about the task itself.
#[derive(Debug, Clone, Copy)]
pub struct TaskView<'a> {
    pub instruction: &'a str,
    pub initial_state: &'a WorldState,
    pub labels: &'a SkillLabels,
}

fn task_body(
    task: TaskView<'_>,
    config: &PipelineConfig,
    history: &[Skill],
    feedback: &FeedbackLog,
    observation: Option<&Observation>,
) -> String {
    let mut out = String::from("Your task:\n");
    out.push_str(&format!("    Skill set: {}\n", task.labels.skill_set_line()));
    out.push_str(&format!(
        "    Initial object list: {}\n",
        object_list_line(task.initial_state)
    ));
    out.push_str(&format!("    Instruction: {}\n", task.instruction));
    if config.use_sa && !feedback.is_empty() {
        out.push_str("    Previous Affordance Feedback: \n");
        for line in feedback.rendered_lines() {
            out.push_str(&format!("        {line}\n"));
        }
    }
    if let Some(obs) = observation.filter(|_| config.use_observation) {
        out.push_str("    Current Observation:\n");
        for line in &obs.scene.lines {
            out.push_str(&format!("        {line}\n"));
        }
        if obs.image.is_some() {
            out.push_str("        [image attached]\n");
        }
    }
    out.push('\n');
    for (i, skill) in history.iter().enumerate() {
        out.push_str(&format!(
            "    Iteration {}:\n        Output: {}\n",
            i + 1,
            task.labels.labelled(skill)
        ));
    }
    out
}

pub fn build_user_prompt(
    task: TaskView<'_>,
    config: &PipelineConfig,
    history: &[Skill],
    feedback: &FeedbackLog,
    observation: Option<Observation>,
) -> PromptBundle {
    let mut user_text = task_body(task, config, history, feedback, observation.as_ref());
    user_text.push_str(&format!("    Iteration {}:\n        Output:", history.len() + 1));
    PromptBundle {
        system_text: build_system_prompt(config),
        user_text,
        image: observation
            .and_then(|o| o.image)
            .filter(|_| config.use_observation),
    }
}

/// Asks the model to pick one of two conflicting skills for `iteration`.
pub fn build_conflict_prompt(
    task: TaskView<'_>,
    config: &PipelineConfig,
    history: &[Skill],
    feedback: &FeedbackLog,
    observation: Option<Observation>,
    proposed: &Skill,
    majority: &Skill,
) -> PromptBundle {
    let mut user_text = task_body(task, config, history, feedback, observation.as_ref());
    let iteration = history.len() + 1;
    user_text.push_str(&format!(
        "Your plans disagree on the action for iteration {iteration}. Reconsider and choose between the conflicting skills:\n    {}\n    {}\nAnswer with exactly one line: Output: [character]. [action]",
        task.labels.labelled(proposed),
        task.labels.labelled(majority),
    ));
    PromptBundle {
        system_text: build_system_prompt(config),
        user_text,
        image: observation
            .and_then(|o| o.image)
            .filter(|_| config.use_observation),
    }
}
