//! Guardian-facing progress reports. Built purely from stored history, so the
//! same history always renders to the same bytes.

use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use arpa_core::dataset::Label;

use crate::store::{next_level, ChildProfile, ProgressRecord};

pub const REPORT_VERSION: u32 = 1;
/// Attempts per correct-rate window.
pub const WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStat {
    /// 1-based attempt numbers, inclusive.
    pub first_attempt: usize,
    pub last_attempt: usize,
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
    pub correct: usize,
    pub correct_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterReport {
    pub letter_id: String,
    pub level: u64,
    pub attempts: usize,
    pub correct: usize,
    pub correct_rate: f64,
    /// Level after each attempt.
    pub trajectory: Vec<u64>,
    pub windows: Vec<WindowStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChildReport {
    pub version: u32,
    pub child: ChildProfile,
    pub letters: Vec<LetterReport>,
}

fn rate(correct: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        correct as f64 / n as f64
    }
}

fn letter_report(rec: &ProgressRecord) -> LetterReport {
    let mut level = 0;
    let trajectory = rec
        .history
        .iter()
        .map(|a| {
            level = next_level(level, a.label);
            level
        })
        .collect();
    let windows = rec
        .history
        .chunks(WINDOW)
        .enumerate()
        .map(|(w, chunk)| {
            let correct = chunk.iter().filter(|a| a.label == Label::Correct).count();
            WindowStat {
                first_attempt: w * WINDOW + 1,
                last_attempt: w * WINDOW + chunk.len(),
                from: chunk[0].timestamp,
                to: chunk[chunk.len() - 1].timestamp,
                correct,
                correct_rate: rate(correct, chunk.len()),
            }
        })
        .collect();
    let correct = rec.history.iter().filter(|a| a.label == Label::Correct).count();
    LetterReport {
        letter_id: rec.letter_id.clone(),
        level: rec.level,
        attempts: rec.history.len(),
        correct,
        correct_rate: rate(correct, rec.history.len()),
        trajectory,
        windows,
    }
}

pub fn build_report(child: &ChildProfile, progress: &[ProgressRecord]) -> ChildReport {
    ChildReport {
        version: REPORT_VERSION,
        child: child.clone(),
        letters: progress.iter().map(letter_report).collect(),
    }
}

pub fn render_json(r: &ChildReport) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn render_markdown(r: &ChildReport) -> String {
    let mut s = String::new();
    let c = &r.child;
    let _ = writeln!(s, "# Progress report: {}\n", c.display_name);
    let _ = writeln!(s, "- Age: {}", c.age_years);
    let _ = writeln!(s, "- Gender: {}", serde_json::to_value(c.gender).unwrap().as_str().unwrap_or(""));
    let _ = writeln!(s, "- Registered by: {}", serde_json::to_value(c.guardian_role).unwrap().as_str().unwrap_or(""));
    let _ = writeln!(s, "- Registered on: {}\n", ts(&c.created_at));
    if r.letters.is_empty() {
        let _ = writeln!(s, "No attempts recorded yet.");
        return s;
    }
    let _ = writeln!(s, "| Letter | Level | Attempts | Correct | Correct rate |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for l in &r.letters {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.1}% |",
            l.letter_id,
            l.level,
            l.attempts,
            l.correct,
            100.0 * l.correct_rate
        );
    }
    for l in &r.letters {
        let _ = writeln!(s, "\n## {}\n", l.letter_id);
        let levels: Vec<String> = l.trajectory.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "Level after each attempt: {}\n", levels.join(", "));
        let _ = writeln!(s, "| Attempts | From | To | Correct | Correct rate |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for w in &l.windows {
            let _ = writeln!(
                s,
                "| {}-{} | {} | {} | {} | {:.1}% |",
                w.first_attempt,
                w.last_attempt,
                ts(&w.from),
                ts(&w.to),
                w.correct,
                100.0 * w.correct_rate
            );
        }
    }
    s
}
