//! Command-line plumbing and the two benchmark applications.

pub mod cli;
mod config;
mod dambreak;
mod init;
mod tgv;

use thiserror::Error;

use crate::kernelgen::KernelError;

pub use config::{BasisName, EquilibriumSpec, RateValue, RegularizationSpec, ResolvedSpec, SpecFile};
pub use dambreak::{dambreak_run, DamBreakConfig, DamBreakMethod, DamBreakResult, Snapshot};
pub use init::{equilibrium_field, macroscopic, EquilibriumInit};
pub use tgv::{tgv_init, tgv_run, TgvConfig, TgvSeries};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("derivation failed: {0}")]
    Derivation(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("simulation produced non-finite values at step {step}")]
    NonFinite { step: usize },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Compensated (Kahan) summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut k = KahanSum::default();
        for v in iter {
            k.add(v);
        }
        k
    }
}
