//! Decaying Taylor-Green vortex.

use std::f64::consts::PI;
use std::path::Path;

use super::init::{equilibrium_field, macroscopic};
use super::{HarnessError, KahanSum, ResolvedSpec};
use crate::kernelgen::{Field, KernelTape};
use crate::lattice::Stencil;
use crate::method::StorageFormat;
use crate::symexpr::{rational_to_f64, Env, Symbol};

#[derive(Debug, Clone, PartialEq)]
pub struct TgvConfig {
    /// Domain side in cells.
    pub l: usize,
    pub u0: f64,
    pub nu: f64,
    pub steps: usize,
    /// Record every `stride` steps.
    pub stride: usize,
}

impl Default for TgvConfig {
    fn default() -> Self {
        TgvConfig { l: 64, u0: 0.25, nu: 1.0 / 6.0, steps: 15_000, stride: 1 }
    }
}

impl TgvConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.u0 > 0.0 && self.u0 < 0.3) {
            return Err(HarnessError::Config(format!("u0 = {} must lie in (0, 0.3)", self.u0)));
        }
        if !(self.nu > 0.0) {
            return Err(HarnessError::Config(format!("nu = {} must be positive", self.nu)));
        }
        if self.l < 4 || self.stride == 0 {
            return Err(HarnessError::Config("L must be at least 4 and stride positive".into()));
        }
        Ok(())
    }

    pub fn omega(&self) -> f64 {
        1.0 / (3.0 * self.nu + 0.5)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.l as f64
    }

    /// Analytic `E(t)/E₀`.
    pub fn analytic(&self, t: f64) -> f64 {
        let k = self.wavenumber();
        (-4.0 * self.nu * k * k * t).exp()
    }

    /// Density deviation and velocity at `t = 0`.
    pub fn initial_state(&self, x: usize, y: usize) -> (f64, [f64; 3]) {
        let k = self.wavenumber();
        let (x, y) = (k * x as f64, k * y as f64);
        let ux = self.u0 * x.cos() * y.sin();
        let uy = -self.u0 * x.sin() * y.cos();
        let d = -0.75 * self.u0 * self.u0 * ((2.0 * x).cos() + (2.0 * y).cos());
        (d, [ux, uy, 0.0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TgvSeries {
    pub steps: Vec<usize>,
    /// Simulated `E/E₀`.
    pub energy: Vec<f64>,
    pub analytic: Vec<f64>,
    pub e0: f64,
}

impl TgvSeries {
    /// Largest relative deviation from the analytic decay over samples
    /// with `E/E₀ > floor`.
    pub fn max_relative_error(&self, floor: f64) -> f64 {
        self.energy
            .iter()
            .zip(&self.analytic)
            .filter(|(e, _)| **e > floor)
            .map(|(e, a)| (e / a - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Median `E/E₀` over the final `window` samples.
    pub fn plateau(&self, window: usize) -> f64 {
        let n = self.energy.len();
        let mut tail: Vec<f64> = self.energy[n.saturating_sub(window.max(1))..].to_vec();
        tail.sort_by(f64::total_cmp);
        tail[tail.len() / 2]
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "energy_ratio", "analytic_ratio"])?;
        for ((s, e), a) in self.steps.iter().zip(&self.energy).zip(&self.analytic) {
            w.write_record([s.to_string(), format!("{e:e}"), format!("{a:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn domain(cfg: &TgvConfig, st: &Stencil) -> Vec<usize> {
    // three-dimensional stencils run on a z-invariant slab
    if st.dim == 3 {
        vec![cfg.l, cfg.l, 4]
    } else {
        vec![cfg.l, cfg.l]
    }
}

fn parameters(cfg: &TgvConfig, spec: &ResolvedSpec) -> Env {
    let mut p = spec.parameters.clone();
    p.insert(Symbol::new("omega"), cfg.omega());
    p
}

/// Equilibrium populations for the analytic `t = 0` state.
pub fn tgv_init(cfg: &TgvConfig, spec: &ResolvedSpec) -> Result<Field, HarnessError> {
    cfg.validate()?;
    let st = &spec.method.stencil;
    equilibrium_field(&spec.method, &domain(cfg, st), &parameters(cfg, spec), |[x, y, _]| cfg.initial_state(x, y))
}

/// Total kinetic energy `Σ ρ|u|²/2`, compensated.
pub fn kinetic_energy(f: &Field, st: &Stencil, background_density: f64) -> f64 {
    (0..f.cells())
        .map(|c| {
            let (rho, j) = macroscopic(f, st, c, background_density);
            let jj: f64 = j.iter().map(|v| v * v).sum();
            0.5 * jj / rho
        })
        .collect::<KahanSum>()
        .value()
}

pub fn tgv_run(cfg: &TgvConfig, spec: &ResolvedSpec) -> Result<TgvSeries, HarnessError> {
    let (_, tape) = spec.tape()?;
    tgv_run_with(cfg, spec, &tape)
}

pub(crate) fn tgv_run_with(cfg: &TgvConfig, spec: &ResolvedSpec, tape: &KernelTape) -> Result<TgvSeries, HarnessError> {
    let st = &spec.method.stencil;
    let base = match spec.method.storage {
        StorageFormat::ZeroCentered => rational_to_f64(&spec.method.equilibrium.background_density),
        StorageFormat::Absolute => 0.0,
    };
    let params = parameters(cfg, spec);
    let mut f = tgv_init(cfg, spec)?;
    let mut g = f.clone();
    let e0 = kinetic_energy(&f, st, base);
    let mut out = TgvSeries { steps: vec![0], energy: vec![1.0], analytic: vec![1.0], e0 };
    for step in 1..=cfg.steps {
        tape.execute_step(&f, &mut g, &params)?;
        std::mem::swap(&mut f, &mut g);
        if step % cfg.stride == 0 || step == cfg.steps {
            let e = kinetic_energy(&f, st, base);
            if !e.is_finite() {
                return Err(HarnessError::NonFinite { step });
            }
            out.steps.push(step);
            out.energy.push(e / e0);
            out.analytic.push(cfg.analytic(step as f64));
        }
    }
    Ok(out)
}
