use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{FailureReason, SuccessJudgment};
use crate::planner::PipelineConfig;
use crate::scenarios::TaskCategory;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub successes: usize,
    pub total: usize,
    pub rate: f64,
}

impl CellStats {
    fn add(&mut self, success: bool) {
        self.total += 1;
        self.successes += usize::from(success);
        self.rate = self.successes as f64 / self.total as f64;
    }

    fn cell(&self) -> String {
        if self.total == 0 {
            "-".into()
        } else {
            format!("{}/{} ({:.1}%)", self.successes, self.total, 100.0 * self.rate)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    pub conflicts: usize,
    pub toward_majority: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub config: String,
    pub categories: BTreeMap<TaskCategory, CellStats>,
    pub overall: CellStats,
    pub failures: BTreeMap<FailureReason, usize>,
    pub consistency: ConsistencyStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub episodes: usize,
}

/// Groups judgments by config, then by category. Rows follow the preset
/// order; unrecognized configs come after in name order.
pub fn aggregate(judgments: &[SuccessJudgment]) -> Report {
    let mut rows: BTreeMap<(usize, String), ReportRow> = BTreeMap::new();
    for j in judgments {
        let rank = PipelineConfig::PRESETS
            .iter()
            .position(|p| *p == j.config)
            .unwrap_or(PipelineConfig::PRESETS.len());
        let row = rows.entry((rank, j.config.clone())).or_insert_with(|| ReportRow {
            config: j.config.clone(),
            categories: BTreeMap::new(),
            overall: CellStats::default(),
            failures: BTreeMap::new(),
            consistency: ConsistencyStats::default(),
        });
        row.categories.entry(j.category).or_default().add(j.success);
        row.overall.add(j.success);
        for r in &j.failure_reasons {
            *row.failures.entry(*r).or_default() += 1;
        }
        row.consistency.conflicts += j.conflicts;
        row.consistency.toward_majority += j.conflicts_toward_majority;
        row.consistency.correct += j.conflicts_correct;
    }
    Report {
        rows: rows.into_values().collect(),
        episodes: judgments.len(),
    }
}

fn title(config: &str) -> String {
    config
        .parse::<PipelineConfig>()
        .map(|c| c.title())
        .unwrap_or_else(|_| config.to_string())
}

impl Report {
    /// `config,category,successes,total,rate`, with an `overall` row per config.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config,category,successes,total,rate\n");
        for row in &self.rows {
            let cells = row
                .categories
                .iter()
                .map(|(c, s)| (c.as_str(), s))
                .chain([("overall", &row.overall)]);
            for (category, s) in cells {
                let _ = writeln!(out, "{},{category},{},{},{:.4}", row.config, s.successes, s.total, s.rate);
            }
        }
        out
    }

    /// Methods as rows, categories as columns, then failure and
    /// consistency breakdowns.
    pub fn to_table(&self) -> String {
        let mut header = vec!["Method".to_string()];
        header.extend(TaskCategory::ALL.iter().map(|c| c.title().to_string()));
        header.push("Overall".into());
        let mut lines = vec![header];
        for row in &self.rows {
            let mut line = vec![title(&row.config)];
            for c in TaskCategory::ALL {
                line.push(row.categories.get(&c).map_or("-".into(), CellStats::cell));
            }
            line.push(row.overall.cell());
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|i| lines.iter().map(|l| l[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (n, line) in lines.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:<w$}"))
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            if n == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                let _ = writeln!(out, "{}", rule.join("-+-"));
            }
        }
        let _ = writeln!(out, "\n{} episodes judged.", self.episodes);
        for row in &self.rows {
            let failures: Vec<String> = row
                .failures
                .iter()
                .map(|(r, n)| format!("{}={n}", r.as_str()))
                .collect();
            let _ = writeln!(
                out,
                "{}: failures [{}]; conflicts {} (toward majority {}, matching oracle {})",
                title(&row.config),
                failures.join(", "),
                row.consistency.conflicts,
                row.consistency.toward_majority,
                row.consistency.correct
            );
        }
        out
    }
}
