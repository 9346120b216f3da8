//! Operation-count tables over the method presets.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_pipeline, OpCount, SimplificationConfig};
use crate::lattice::{make_stencil, StencilName};
use crate::method::{derive_collision_rule, preset, regularize, MethodError, MethodPreset, Regularization};

#[derive(Debug, Clone, Serialize)]
pub struct OpCountRow {
    pub stencil: String,
    pub method: String,
    pub n: OpCount,
    pub s: OpCount,
    pub s_cse: OpCount,
}

#[derive(Debug, Clone, Serialize)]
pub struct OpCountTable {
    pub rows: Vec<OpCountRow>,
}

/// Counts for each stencil and method at the three simplification levels.
pub fn opcount_table(stencils: &[StencilName], methods: &[MethodPreset]) -> Result<OpCountTable, MethodError> {
    let jobs: Vec<(StencilName, MethodPreset)> =
        stencils.iter().flat_map(|s| methods.iter().map(move |m| (*s, *m))).collect();
    let rows = jobs
        .par_iter()
        .map(|(name, m)| {
            let st = make_stencil(*name);
            let rule = derive_collision_rule(&preset(*m, &st))?;
            let (_, s) = run_pipeline(&rule, &SimplificationConfig::standard());
            let (_, s_cse) = run_pipeline(&rule, &SimplificationConfig::full());
            Ok(OpCountRow {
                stencil: name.to_string(),
                method: m.short_name().to_string(),
                n: rule.op_count(),
                s: s.after,
                s_cse: s_cse.after,
            })
        })
        .collect::<Result<Vec<_>, MethodError>>()?;
    Ok(OpCountTable { rows })
}

impl OpCountTable {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:<7} {:>8} {:>8} {:>8}", "stencil", "method", "N", "S", "S+CSE");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<8} {:<7} {:>8} {:>8} {:>8}",
                r.stencil, r.method, r.n.total, r.s.total, r.s_cse.total
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("op-count table serializes")
    }

    pub fn get(&self, stencil: &str, method: &str) -> Option<&OpCountRow> {
        self.rows.iter().find(|r| r.stencil == stencil && r.method == method)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SavingsRow {
    pub stencil: String,
    pub method: String,
    pub unregularized: usize,
    pub full: usize,
    pub higher_order: usize,
    pub higher_order_from: u32,
    /// Relative savings of full regularization, `1 - full/unregularized`.
    pub savings_full: f64,
    pub savings_higher_order: f64,
}

/// Relative savings from regularization after simplification (without CSE).
pub fn regularization_savings(
    stencil: StencilName,
    methods: &[MethodPreset],
    higher_order_from: u32,
) -> Result<Vec<SavingsRow>, MethodError> {
    let st = make_stencil(stencil);
    let cfg = SimplificationConfig::standard();
    methods
        .par_iter()
        .map(|m| {
            let spec = preset(*m, &st);
            let count = |spec| -> Result<usize, MethodError> {
                let rule = derive_collision_rule(&spec)?;
                Ok(run_pipeline(&rule, &cfg).1.after.total)
            };
            let unregularized = count(spec.clone())?;
            let full = count(regularize(&spec, Regularization::Full))?;
            let higher_order = count(regularize(&spec, Regularization::HigherOrder(higher_order_from)))?;
            let rel = |x: usize| 1.0 - x as f64 / unregularized as f64;
            Ok(SavingsRow {
                stencil: stencil.to_string(),
                method: m.short_name().to_string(),
                unregularized,
                full,
                higher_order,
                higher_order_from,
                savings_full: rel(full),
                savings_higher_order: rel(higher_order),
            })
        })
        .collect()
}

pub fn render_savings(rows: &[SavingsRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<8} {:<7} {:>8} {:>8} {:>8} {:>9} {:>9}", "stencil", "method", "unreg", "full", "ho", "sav.full", "sav.ho");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<8} {:<7} {:>8} {:>8} {:>8} {:>8.1}% {:>8.1}%",
            r.stencil,
            r.method,
            r.unregularized,
            r.full,
            r.higher_order,
            100.0 * r.savings_full,
            100.0 * r.savings_higher_order
        );
    }
    out
}
