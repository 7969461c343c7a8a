use std::collections::BTreeMap;
use std::fmt::Write as _;

use pathgen::{SearchStats, Target, Value};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TargetReport {
    Node { node: u32 },
    Edge { from: u32, to: u32 },
}

impl From<Target> for TargetReport {
    fn from(t: Target) -> Self {
        match t {
            Target::Node(n) => TargetReport::Node { node: n.0 },
            Target::Edge(a, b) => TargetReport::Edge { from: a.0, to: b.0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalReport {
    pub target: TargetReport,
    pub constraints: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Vector,
    Infeasible,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    /// Randomized restarts.
    pub attempts: u64,
    pub checks: u64,
    pub prunes: u64,
    /// Partial paths examined.
    pub steps: u64,
}

impl From<SearchStats> for StatsReport {
    fn from(s: SearchStats) -> Self {
        StatsReport { attempts: s.attempts, checks: s.checks, prunes: s.prunes, steps: s.steps }
    }
}

/// Result of one `gen` or `check` invocation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub program: String,
    pub goal: GoalReport,
    pub seed: u64,
    pub strategy: String,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<BTreeMap<String, Value>>,
    pub path: Vec<u32>,
    pub stats: StatsReport,
    /// Path-length bound of an exhaustive `check`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    /// Seed of the search that produced the result when several ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winning_seed: Option<u64>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let target = match self.goal.target {
            TargetReport::Node { node } => format!("node {node}"),
            TargetReport::Edge { from, to } => format!("edge {from}:{to}"),
        };
        let _ = writeln!(s, "program:  {}", self.program);
        let _ = writeln!(s, "target:   {target}");
        for c in &self.goal.constraints {
            let _ = writeln!(s, "require:  {c}");
        }
        let _ = writeln!(s, "seed:     {}", self.seed);
        if let Some(w) = self.winning_seed {
            let _ = writeln!(s, "won by:   seed {w}");
        }
        let _ = writeln!(s, "strategy: {}", self.strategy);
        let verdict = match (self.outcome, self.bound) {
            (Outcome::Vector, _) => "vector found".to_string(),
            (Outcome::Infeasible, Some(l)) => format!("no witness within bound {l}"),
            (Outcome::Infeasible, None) => "infeasible".to_string(),
            (Outcome::BudgetExhausted, _) => "budget exhausted".to_string(),
        };
        let _ = writeln!(s, "outcome:  {verdict}");
        if let Some(v) = &self.vector {
            for (name, value) in v {
                let _ = writeln!(s, "  {name} = {value}");
            }
            let path: Vec<String> = self.path.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "path:     {}", path.join(" -> "));
        }
        let st = &self.stats;
        let _ = writeln!(
            s,
            "stats:    attempts {} checks {} prunes {} steps {}",
            st.attempts, st.checks, st.prunes, st.steps
        );
        s
    }
}

/// Per-strategy aggregate over seeded trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub strategy: String,
    pub trials: u64,
    pub found: u64,
    pub infeasible: u64,
    pub exhausted: u64,
    pub mean_attempts: f64,
    pub mean_steps: f64,
    pub mean_checks: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub program: String,
    pub goal: GoalReport,
    pub seed: u64,
    pub trials: u64,
    pub rows: Vec<BenchRow>,
    /// Strategies ordered by mean solver checks, fewest first.
    pub ranking: Vec<String>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} trials from seed {} on {}", self.trials, self.seed, self.program);
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>10} {:>9} {:>13} {:>11} {:>12}",
            "strategy", "found", "infeasible", "exhausted", "mean attempts", "mean steps", "mean checks"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<10} {:>6} {:>10} {:>9} {:>13.2} {:>11.2} {:>12.2}",
                r.strategy, r.found, r.infeasible, r.exhausted, r.mean_attempts, r.mean_steps, r.mean_checks
            );
        }
        let _ = writeln!(s, "ranking by mean checks: {}", self.ranking.join(" < "));
        s
    }
}
