use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One atomic robot action. `MoveToBowl` carries the bowl color.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Skill {
    Scoop,
    Stir,
    DropFood,
    PullBowlCloser,
    OpenDumbwaiter,
    CloseDumbwaiter,
    StartDumbwaiter,
    PutBowlIntoDumbwaiter,
    Done,
    GraspSpoon,
    PutSpoonBack,
    MoveToBowl(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Scoop,
    Stir,
    DropFood,
    PullBowlCloser,
    OpenDumbwaiter,
    CloseDumbwaiter,
    StartDumbwaiter,
    PutBowlIntoDumbwaiter,
    Done,
    GraspSpoon,
    PutSpoonBack,
    MoveToBowl,
}

impl Skill {
    /// The eleven parameterless skills in skill-set listing order.
    pub const FIXED: [Skill; 11] = [
        Skill::Scoop,
        Skill::Stir,
        Skill::DropFood,
        Skill::PullBowlCloser,
        Skill::OpenDumbwaiter,
        Skill::CloseDumbwaiter,
        Skill::StartDumbwaiter,
        Skill::PutBowlIntoDumbwaiter,
        Skill::Done,
        Skill::GraspSpoon,
        Skill::PutSpoonBack,
    ];

    pub fn move_to(color: &str) -> Skill {
        Skill::MoveToBowl(color.to_string())
    }

    pub fn kind(&self) -> SkillKind {
        match self {
            Skill::Scoop => SkillKind::Scoop,
            Skill::Stir => SkillKind::Stir,
            Skill::DropFood => SkillKind::DropFood,
            Skill::PullBowlCloser => SkillKind::PullBowlCloser,
            Skill::OpenDumbwaiter => SkillKind::OpenDumbwaiter,
            Skill::CloseDumbwaiter => SkillKind::CloseDumbwaiter,
            Skill::StartDumbwaiter => SkillKind::StartDumbwaiter,
            Skill::PutBowlIntoDumbwaiter => SkillKind::PutBowlIntoDumbwaiter,
            Skill::Done => SkillKind::Done,
            Skill::GraspSpoon => SkillKind::GraspSpoon,
            Skill::PutSpoonBack => SkillKind::PutSpoonBack,
            Skill::MoveToBowl(_) => SkillKind::MoveToBowl,
        }
    }

    /// `move_to_white_bowl`, `pull_bowl_closer`, `done`.
    pub fn snake_name(&self) -> String {
        match self {
            Skill::MoveToBowl(c) => format!("move_to_{c}_bowl"),
            Skill::Done => "done".to_string(),
            other => other.spoken_name().replace(' ', "_"),
        }
    }

    /// `move to white bowl`, `pull bowl closer`, `DONE`.
    pub fn spoken_name(&self) -> String {
        match self {
            Skill::Scoop => "scoop".into(),
            Skill::Stir => "stir".into(),
            Skill::DropFood => "drop food".into(),
            Skill::PullBowlCloser => "pull bowl closer".into(),
            Skill::OpenDumbwaiter => "open dumbwaiter".into(),
            Skill::CloseDumbwaiter => "close dumbwaiter".into(),
            Skill::StartDumbwaiter => "start dumbwaiter".into(),
            Skill::PutBowlIntoDumbwaiter => "put bowl into dumbwaiter".into(),
            Skill::Done => "DONE".into(),
            Skill::GraspSpoon => "grasp spoon".into(),
            Skill::PutSpoonBack => "put spoon back".into(),
            Skill::MoveToBowl(c) => format!("move to {c} bowl"),
        }
    }

    pub fn is_dumbwaiter_op(&self) -> bool {
        matches!(
            self,
            Skill::OpenDumbwaiter
                | Skill::CloseDumbwaiter
                | Skill::StartDumbwaiter
                | Skill::PutBowlIntoDumbwaiter
        )
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.snake_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown skill name `{0}`")]
pub struct UnknownSkill(pub String);

impl FromStr for Skill {
    type Err = UnknownSkill;

    /// Accepts both `grasp_spoon` and `grasp spoon`, any letter case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s
            .trim()
            .trim_end_matches('.')
            .replace('_', " ")
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase();
        if let Some(skill) = Skill::FIXED
            .iter()
            .find(|k| k.spoken_name().to_lowercase() == norm)
        {
            return Ok(skill.clone());
        }
        if let Some(color) = norm
            .strip_prefix("move to ")
            .and_then(|rest| rest.strip_suffix(" bowl"))
        {
            if !color.is_empty() && !color.contains(' ') {
                return Ok(Skill::MoveToBowl(color.to_string()));
            }
        }
        Err(UnknownSkill(s.to_string()))
    }
}

impl Serialize for Skill {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.snake_name())
    }
}

impl<'de> Deserialize<'de> for Skill {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
