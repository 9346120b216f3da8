use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cse::eliminate_common_subexpressions;
use super::steps::*;
use super::OpCount;
use crate::method::CollisionRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    ConservedQuantityRewriting,
    CollapseConservedCentralMoments,
    PropagateLogarithms,
    Cse,
    ExpressionPropagation,
    UnusedElimination,
}

impl Step {
    pub const ALL: [Step; 6] = [
        Step::ConservedQuantityRewriting,
        Step::CollapseConservedCentralMoments,
        Step::PropagateLogarithms,
        Step::Cse,
        Step::ExpressionPropagation,
        Step::UnusedElimination,
    ];

    pub fn apply(self, rule: &CollisionRule) -> CollisionRule {
        match self {
            Step::ConservedQuantityRewriting => conserved_quantity_rewrite(rule),
            Step::CollapseConservedCentralMoments => collapse_conserved_central_moments(rule),
            Step::PropagateLogarithms => propagate_logarithms(rule),
            Step::Cse => rule.with_assignments(eliminate_common_subexpressions(&rule.assignments)),
            Step::ExpressionPropagation => expression_propagation(rule),
            Step::UnusedElimination => unused_elimination(rule),
        }
    }
}

/// Ordered set of enabled steps. Unused elimination, when enabled, always
/// runs last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplificationConfig {
    steps: Vec<Step>,
}

impl SimplificationConfig {
    pub fn new(steps: impl IntoIterator<Item = Step>) -> Self {
        let mut steps: Vec<Step> = steps.into_iter().collect();
        steps.dedup();
        // unused elimination runs once, last
        if steps.contains(&Step::UnusedElimination) {
            steps.retain(|s| *s != Step::UnusedElimination);
            steps.push(Step::UnusedElimination);
        }
        SimplificationConfig { steps }
    }

    /// No simplification ("N").
    pub fn none() -> Self {
        Self::new([])
    }

    /// Every step except common subexpression elimination ("S").
    pub fn standard() -> Self {
        Self::new(Step::ALL.into_iter().filter(|s| *s != Step::Cse))
    }

    /// Every step ("S+CSE"). Propagation also runs before common
    /// subexpression elimination, so that hoisted temporaries do not hide
    /// cancellations between terms.
    pub fn full() -> Self {
        Self::new([
            Step::ConservedQuantityRewriting,
            Step::CollapseConservedCentralMoments,
            Step::PropagateLogarithms,
            Step::ExpressionPropagation,
            Step::Cse,
            Step::ExpressionPropagation,
            Step::UnusedElimination,
        ])
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn without(&self, step: Step) -> Self {
        Self::new(self.steps.iter().copied().filter(|s| *s != step))
    }
}

impl Default for SimplificationConfig {
    fn default() -> Self {
        Self::full()
    }
}

/// Named configurations accepted on the command line.
impl FromStr for SimplificationConfig {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "N" | "NONE" => Ok(Self::none()),
            "S" => Ok(Self::standard()),
            "S+CSE" | "FULL" => Ok(Self::full()),
            _ => Err(format!("unknown simplification level `{s}` (expected N, S or S+CSE)")),
        }
    }
}

impl fmt::Display for SimplificationConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::none() {
            f.write_str("N")
        } else if *self == Self::standard() {
            f.write_str("S")
        } else if *self == Self::full() {
            f.write_str("S+CSE")
        } else {
            write!(f, "{:?}", self.steps)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PipelineReport {
    pub before: OpCount,
    pub after: OpCount,
}

/// Applies the configured steps repeatedly until the rule stops changing.
pub fn run_pipeline(rule: &CollisionRule, config: &SimplificationConfig) -> (CollisionRule, PipelineReport) {
    let before = rule.op_count();
    let mut cur = rule.clone();
    for _ in 0..8 {
        let mut next = cur.clone();
        for step in &config.steps {
            next = step.apply(&next);
        }
        let done = next.assignments == cur.assignments;
        cur = next;
        if done {
            break;
        }
    }
    let after = cur.op_count();
    (cur, PipelineReport { before, after })
}

pub fn simplify(rule: &CollisionRule, config: &SimplificationConfig) -> CollisionRule {
    run_pipeline(rule, config).0
}
