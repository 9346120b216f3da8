//! Circular dam break on D2Q9 shallow-water methods.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::init::{equilibrium_field, macroscopic};
use super::{EquilibriumSpec, HarnessError, KahanSum, RegularizationSpec, ResolvedSpec, SpecFile};
use crate::equilibrium::ShallowWaterVariant;
use crate::kernelgen::Field;
use crate::lattice::StencilName;
use crate::method::StorageFormat;
use crate::symexpr::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DamBreakMethod {
    /// Central moments relaxed against the discrete shallow-water equilibrium.
    CentralMoment,
    /// Cumulants relaxed against the Maxwellian with `c_s² = g h / 2`.
    Cumulant,
}

/// Physical setup; lengths in metres, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields, default)]
pub struct DamBreakConfig {
    pub side: f64,
    pub cells: usize,
    pub radius: f64,
    pub column_height: f64,
    pub ambient_depth: f64,
    pub dt: f64,
    pub viscosity: f64,
    pub gravity: f64,
    pub steps: usize,
    /// Snapshot times.
    pub times: Vec<f64>,
    pub method: DamBreakMethod,
}

impl Default for DamBreakConfig {
    fn default() -> Self {
        DamBreakConfig {
            side: 40.0,
            cells: 100,
            radius: 2.5,
            column_height: 2.5,
            ambient_depth: 0.5,
            dt: 0.05,
            viscosity: 1.0,
            gravity: 9.81,
            steps: 60,
            times: vec![1.0, 2.0, 3.0],
            method: DamBreakMethod::CentralMoment,
        }
    }
}

impl DamBreakConfig {
    pub fn dx(&self) -> f64 {
        self.side / self.cells as f64
    }

    pub fn lattice_viscosity(&self) -> f64 {
        self.viscosity * self.dt / (self.dx() * self.dx())
    }

    pub fn omega_s(&self) -> f64 {
        1.0 / (3.0 * self.lattice_viscosity() + 0.5)
    }

    /// Gravity in lattice units, heights kept in metres.
    pub fn lattice_gravity(&self) -> f64 {
        self.gravity * self.dt * self.dt / (self.dx() * self.dx())
    }

    /// Initial depth at cell `(x, y)`; cell centres sit at `(i + ½)Δx`.
    pub fn initial_depth(&self, x: usize, y: usize) -> f64 {
        let c = 0.5 * self.side;
        let px = (x as f64 + 0.5) * self.dx() - c;
        let py = (y as f64 + 0.5) * self.dx() - c;
        if px * px + py * py <= self.radius * self.radius {
            self.column_height
        } else {
            self.ambient_depth
        }
    }

    pub fn spec(&self) -> Result<ResolvedSpec, HarnessError> {
        let g = self.lattice_gravity();
        let (preset, equilibrium) = match self.method {
            DamBreakMethod::CentralMoment => {
                ("CM", EquilibriumSpec::ShallowWaterDiscrete { g, variant: ShallowWaterVariant::MassConserving })
            }
            DamBreakMethod::Cumulant => ("K", EquilibriumSpec::ShallowWaterMaxwellian { g }),
        };
        let mut file = SpecFile::from_json(&format!(r#"{{"stencil": "{}", "preset": "{preset}"}}"#, StencilName::D2Q9))?;
        file.storage = Some(StorageFormat::Absolute);
        file.equilibrium = Some(equilibrium);
        file.regularization = RegularizationSpec::Full;
        let mut spec = file.resolve()?;
        spec.parameters.insert(Symbol::new("omega"), self.omega_s());
        Ok(spec)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let positive = [self.side, self.radius, self.column_height, self.ambient_depth, self.dt, self.viscosity, self.gravity];
        if positive.iter().any(|v| !(*v > 0.0)) || self.cells < 4 {
            return Err(HarnessError::Config("dam-break lengths, times and gravity must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    /// Depth per cell, row-major in `y`.
    pub depth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamBreakResult {
    pub cells: usize,
    pub dx: f64,
    pub snapshots: Vec<Snapshot>,
    pub initial_volume: f64,
    pub final_volume: f64,
    pub final_depth: Vec<f64>,
}

impl Snapshot {
    /// Depth along `y = side/2`, averaging the two rows that straddle it.
    pub fn cross_section(&self, n: usize) -> Vec<f64> {
        let (a, b) = (n / 2 - 1, n / 2);
        (0..n).map(|x| 0.5 * (self.depth[x + n * a] + self.depth[x + n * b])).collect()
    }
}

impl DamBreakResult {
    pub fn snapshot_at(&self, time: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.time - time).abs() < 1e-9)
    }

    /// Cross sections of all snapshots: `x, h(t₁), h(t₂), …`.
    pub fn write_cross_sections(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["x".to_string()];
        header.extend(self.snapshots.iter().map(|s| format!("h_t{}", s.time)));
        w.write_record(&header)?;
        let sections: Vec<Vec<f64>> = self.snapshots.iter().map(|s| s.cross_section(self.cells)).collect();
        for x in 0..self.cells {
            let mut row = vec![format!("{}", (x as f64 + 0.5) * self.dx)];
            row.extend(sections.iter().map(|s| format!("{:e}", s[x])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_field(&self, snapshot: &Snapshot, path: &Path) -> Result<(), HarnessError> {
        let n = self.cells;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "h"])?;
        for y in 0..n {
            for x in 0..n {
                let (px, py) = ((x as f64 + 0.5) * self.dx, (y as f64 + 0.5) * self.dx);
                w.write_record([px.to_string(), py.to_string(), format!("{:e}", snapshot.depth[x + n * y])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `cross_sections.csv` and one `depth_t<T>.csv` per snapshot.
    pub fn write_all(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        self.write_cross_sections(&dir.join("cross_sections.csv"))?;
        for s in &self.snapshots {
            self.write_field(s, &dir.join(format!("depth_t{}.csv", s.time)))?;
        }
        Ok(())
    }
}

fn depths(f: &Field, spec: &ResolvedSpec) -> Vec<f64> {
    (0..f.cells()).map(|c| macroscopic(f, &spec.method.stencil, c, 0.0).0).collect()
}

pub fn dambreak_run(cfg: &DamBreakConfig) -> Result<DamBreakResult, HarnessError> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let (_, tape) = spec.tape()?;
    let n = cfg.cells;
    let mut f = equilibrium_field(&spec.method, &[n, n], &spec.parameters, |[x, y, _]| {
        (cfg.initial_depth(x, y) - 1.0, [0.0; 3])
    })?;
    let mut g = f.clone();
    let volume = |d: &[f64]| d.iter().copied().collect::<KahanSum>().value();
    let initial_volume = volume(&depths(&f, &spec));
    let mut snapshots = Vec::new();
    for step in 1..=cfg.steps {
        tape.execute_step(&f, &mut g, &spec.parameters)?;
        std::mem::swap(&mut f, &mut g);
        let t = step as f64 * cfg.dt;
        if cfg.times.iter().any(|s| (s - t).abs() < 1e-9) {
            let depth = depths(&f, &spec);
            if depth.iter().any(|v| !v.is_finite()) {
                return Err(HarnessError::NonFinite { step });
            }
            snapshots.push(Snapshot { step, time: (t * 1e6).round() / 1e6, depth });
        }
    }
    let final_depth = depths(&f, &spec);
    if final_depth.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::NonFinite { step: cfg.steps });
    }
    Ok(DamBreakResult {
        cells: n,
        dx: cfg.dx(),
        snapshots,
        initial_volume,
        final_volume: volume(&final_depth),
        final_depth,
    })
}
