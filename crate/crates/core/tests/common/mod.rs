#![allow(dead_code)]

use lbmforge::equilibrium::random_state;
use lbmforge::lattice::{make_stencil, Stencil, StencilName};
use lbmforge::method::{derive_collision_rule, preset, CollisionRule, MethodPreset, MethodSpec, StorageFormat};
use lbmforge::symexpr::{rational_to_f64, Env};
use rand::Rng;

pub const STENCILS: [StencilName; 3] = [StencilName::D2Q9, StencilName::D3Q19, StencilName::D3Q27];

/// The three collision regimes: absolute storage, zero-centered with the
/// deviation equilibrium, zero-centered with the absolute equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Absolute,
    ZeroCenteredDelta,
    ZeroCenteredAbsolute,
}

pub const REGIMES: [Regime; 3] = [Regime::Absolute, Regime::ZeroCenteredDelta, Regime::ZeroCenteredAbsolute];

pub fn with_regime(spec: &MethodSpec, regime: Regime) -> MethodSpec {
    let mut s = spec.clone();
    let eq = s.equilibrium.clone();
    match regime {
        Regime::Absolute => {
            s.storage = StorageFormat::Absolute;
            s.equilibrium = eq.absolute();
        }
        Regime::ZeroCenteredDelta => {
            s.storage = StorageFormat::ZeroCentered;
            s.equilibrium = eq.delta();
        }
        Regime::ZeroCenteredAbsolute => {
            s.storage = StorageFormat::ZeroCentered;
            s.equilibrium = eq.absolute();
        }
    }
    s
}

pub fn preset_spec(name: StencilName, m: MethodPreset) -> MethodSpec {
    preset(m, &make_stencil(name))
}

pub fn derive(spec: &MethodSpec) -> CollisionRule {
    derive_collision_rule(spec).unwrap_or_else(|e| panic!("derivation failed: {e}"))
}

pub fn weights(st: &Stencil) -> Vec<f64> {
    st.weights.iter().map(rational_to_f64).collect()
}

/// A random state (`ρ ∈ [0.9, 1.1]`, small velocity, perturbed populations)
/// in the rule's storage format.
pub fn state_for<R: Rng>(rule: &CollisionRule, rng: &mut R) -> Vec<f64> {
    let st = &rule.method.stencil;
    let mut x = random_state(st, 0.05, rng);
    if rule.method.storage == StorageFormat::ZeroCentered {
        for (v, w) in x.iter_mut().zip(weights(st)) {
            *v -= w;
        }
    }
    x
}

/// Absolute populations from a state stored in `rule`'s format.
pub fn absolute(rule: &CollisionRule, x: &[f64]) -> Vec<f64> {
    if rule.method.storage == StorageFormat::ZeroCentered {
        x.iter().zip(weights(&rule.method.stencil)).map(|(v, w)| v + w).collect()
    } else {
        x.to_vec()
    }
}

/// Every parameter of the rule bound to a value drawn from `rates`.
pub fn params_with<R: Rng>(rule: &CollisionRule, rng: &mut R) -> Env {
    rule.parameters().into_iter().map(|s| (s, rng.gen_range(0.2..1.9))).collect()
}

pub fn uniform_params(rule: &CollisionRule, v: f64) -> Env {
    rule.parameters().into_iter().map(|s| (s, v)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Zeroth and first moments of a population vector.
pub fn mass_momentum(st: &Stencil, f: &[f64]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for (i, v) in f.iter().enumerate() {
        m[0] += v;
        for a in 0..3 {
            m[a + 1] += f64::from(st.velocities[i][a]) * v;
        }
    }
    m
}
