//! JSON method specifications.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::equilibrium::{shallow_water_equilibrium, shallow_water_maxwellian, Equilibrium, ShallowWaterVariant};
use crate::kernelgen::{apply_streaming, compile_tape, KernelTape, StreamingPattern};
use crate::lattice::{
    default_polynomial_basis, make_stencil, monomial_basis, moment_order, orthogonalize_basis, SpaceKind,
    StencilName,
};
use crate::method::{
    derive_collision_rule, preset, regularize, validate, CollisionRule, ConservedMode, MethodPreset, MethodSpec,
    Regularization, StorageFormat,
};
use crate::simplify::{simplify, SimplificationConfig};
use crate::symexpr::{Env, Expr, Rational, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisName {
    Monomial,
    Orthogonal,
    WeightedOrthogonal,
    CmDefault,
    CumulantDefault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EquilibriumSpec {
    Maxwellian {
        #[serde(default)]
        delta: bool,
    },
    ShallowWaterDiscrete {
        g: f64,
        #[serde(default = "mass_conserving")]
        variant: ShallowWaterVariant,
    },
    ShallowWaterMaxwellian {
        g: f64,
    },
}

fn mass_conserving() -> ShallowWaterVariant {
    ShallowWaterVariant::MassConserving
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizationSpec {
    #[default]
    None,
    Full,
    HigherOrder(u32),
}

/// A relaxation rate given as a number, a rational string like `"1/3"`,
/// or a symbol name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateValue {
    Number(f64),
    Text(String),
}

impl RateValue {
    fn to_expr(&self) -> Result<Expr, String> {
        match self {
            RateValue::Number(v) => {
                Rational::from_float(*v).map(Expr::num).ok_or_else(|| format!("rate {v} is not finite"))
            }
            RateValue::Text(s) => {
                if let Ok(r) = s.parse::<Rational>() {
                    return Ok(Expr::num(r));
                }
                let ok = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                    && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if ok {
                    Ok(Expr::sym(s))
                } else {
                    Err(format!("rate `{s}` is neither a number nor a symbol name"))
                }
            }
        }
    }
}

/// The on-disk method description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default)]
    pub name: Option<String>,
    pub stencil: StencilName,
    /// SRT, O-MRT, WO-MRT, CM or K; supplies space, basis and equilibrium
    /// unless given explicitly.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub space: Option<SpaceKind>,
    #[serde(default)]
    pub basis: Option<BasisName>,
    #[serde(default)]
    pub storage: Option<StorageFormat>,
    #[serde(default)]
    pub equilibrium: Option<EquilibriumSpec>,
    #[serde(default)]
    pub regularization: RegularizationSpec,
    /// Rate overrides by basis index.
    #[serde(default)]
    pub rates: BTreeMap<usize, RateValue>,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default)]
    pub simplification: Option<String>,
    #[serde(default)]
    pub streaming: Option<StreamingPattern>,
}

/// A spec file resolved into a method and its runtime settings.
#[derive(Debug, Clone)]
pub struct ResolvedSpec {
    pub name: String,
    pub method: MethodSpec,
    pub parameters: Env,
    pub simplification: SimplificationConfig,
    pub streaming: StreamingPattern,
}

impl SpecFile {
    pub fn from_json(text: &str) -> Result<SpecFile, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            HarnessError::Config(format!("at `{path}`: {}", e.inner()))
        })
    }

    pub fn load(path: &Path) -> Result<SpecFile, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut file = SpecFile::from_json(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // Unnamed specs take their file stem.
        if file.name.is_none() {
            file.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        Ok(file)
    }

    pub fn resolve(&self) -> Result<ResolvedSpec, HarnessError> {
        let cfg = |m: String| HarnessError::Config(m);
        let st = make_stencil(self.stencil);
        let kind = self
            .preset
            .as_deref()
            .map(|p| p.parse::<MethodPreset>().map_err(|e| cfg(format!("at `preset`: {e}"))))
            .transpose()?;
        let mut spec = match kind {
            Some(k) => preset(k, &st),
            None => {
                let space = self.space.ok_or_else(|| cfg("at `space`: required when no preset is given".into()))?;
                let basis = self.basis.unwrap_or(match space {
                    SpaceKind::Population => BasisName::Monomial,
                    SpaceKind::RawMoment => BasisName::Orthogonal,
                    SpaceKind::CentralMoment => BasisName::CmDefault,
                    SpaceKind::Cumulant => BasisName::CumulantDefault,
                });
                let mut s = preset(MethodPreset::CentralMoment, &st);
                s.space = space;
                s.basis = build_basis(basis, &st).with_kind(space);
                s.equilibrium = Equilibrium::maxwellian(st.dim);
                s
            }
        };
        if kind.is_some() {
            if let Some(space) = self.space {
                spec.space = space;
                spec.basis = spec.basis.with_kind(space);
            }
            if let Some(b) = self.basis {
                spec.basis = build_basis(b, &st).with_kind(spec.space);
            }
        }
        if let Some(s) = self.storage {
            spec.storage = s;
            // presets relax some spaces against the deviation equilibrium,
            // which only exists for zero-centered storage
            if s == StorageFormat::Absolute && self.equilibrium.is_none() {
                spec.equilibrium = spec.equilibrium.clone().absolute();
            }
        }
        let mut parameters = Env::new();
        if let Some(eq) = &self.equilibrium {
            let g = Expr::sym("g");
            spec.equilibrium = match eq {
                EquilibriumSpec::Maxwellian { delta } => {
                    let e = Equilibrium::maxwellian(st.dim);
                    if *delta {
                        e.delta()
                    } else {
                        e
                    }
                }
                EquilibriumSpec::ShallowWaterDiscrete { g: gv, variant } => {
                    parameters.insert(Symbol::new("g"), *gv);
                    shallow_water_equilibrium(&st, &g, *variant)
                        .map_err(|e| cfg(format!("at `equilibrium`: {e}")))?
                }
                EquilibriumSpec::ShallowWaterMaxwellian { g: gv } => {
                    parameters.insert(Symbol::new("g"), *gv);
                    shallow_water_maxwellian(&g)
                }
            };
        }
        if spec.equilibrium.symbols.density.name() == "h" {
            spec.conserved = ConservedMode::HeightVelocity;
        }
        spec.rates = default_rates(&spec);
        spec = match self.regularization {
            RegularizationSpec::None => spec,
            RegularizationSpec::Full => regularize(&spec, Regularization::Full),
            RegularizationSpec::HigherOrder(k) => regularize(&spec, Regularization::HigherOrder(k)),
        };
        for (&i, v) in &self.rates {
            let n = spec.rates.len();
            let slot = spec.rates.get_mut(i).ok_or_else(|| cfg(format!("at `rates.{i}`: index out of range (0..{n})")))?;
            *slot = v.to_expr().map_err(|e| cfg(format!("at `rates.{i}`: {e}")))?;
        }
        validate(&spec).map_err(|errs| {
            cfg(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))
        })?;
        for (k, v) in &self.parameters {
            parameters.insert(Symbol::new(k), *v);
        }
        let simplification = match &self.simplification {
            Some(s) => s.parse().map_err(|e: String| cfg(format!("at `simplification`: {e}")))?,
            None => SimplificationConfig::full(),
        };
        let name = self.name.clone().unwrap_or_else(|| {
            let m = kind.map(|k| k.short_name().to_string()).unwrap_or_else(|| spec.space.to_string());
            format!("{m}_{}", self.stencil).to_ascii_lowercase().replace('-', "_")
        });
        Ok(ResolvedSpec { name, method: spec, parameters, simplification, streaming: self.streaming.unwrap_or_default() })
    }
}

fn build_basis(b: BasisName, st: &crate::lattice::Stencil) -> crate::lattice::CollisionSpaceBasis {
    match b {
        BasisName::Monomial => monomial_basis(st),
        BasisName::Orthogonal => orthogonalize_basis(st, false),
        BasisName::WeightedOrthogonal => orthogonalize_basis(st, true),
        BasisName::CmDefault | BasisName::CumulantDefault => default_polynomial_basis(st),
    }
}

/// A single shear-governing rate `omega` for all non-conserved quantities.
fn default_rates(spec: &MethodSpec) -> Vec<Expr> {
    if spec.space == SpaceKind::Population {
        return vec![Expr::sym("omega")];
    }
    spec.basis
        .polynomials
        .iter()
        .map(|p| if moment_order(p).unwrap_or(0) <= 1 { Expr::one() } else { Expr::sym("omega") })
        .collect()
}

impl ResolvedSpec {
    /// Derives and simplifies the collision rule.
    pub fn rule(&self) -> Result<CollisionRule, HarnessError> {
        let raw = derive_collision_rule(&self.method).map_err(|e| HarnessError::Derivation(e.to_string()))?;
        Ok(simplify(&raw, &self.simplification))
    }

    pub fn tape(&self) -> Result<(CollisionRule, KernelTape), HarnessError> {
        let rule = self.rule()?;
        let tape = compile_tape(&apply_streaming(&rule, self.streaming))?;
        Ok((rule, tape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_preset_spec() {
        let s = SpecFile::from_json(r#"{"stencil": "D2Q9", "preset": "SRT"}"#).unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.method.space, SpaceKind::Population);
        assert_eq!(r.name, "srt_d2q9");
        assert_eq!(r.rule().unwrap().parameters(), vec![Symbol::new("omega")]);
    }

    #[test]
    fn unknown_field_reports_its_path() {
        let err = SpecFile::from_json(r#"{"stencil": "D2Q9", "equilibrium": {"kind": "maxwellian", "dleta": true}}"#)
            .unwrap_err();
        let HarnessError::Config(m) = err else { panic!() };
        assert!(m.contains("equilibrium") && m.contains("dleta"), "{m}");
        assert_eq!(HarnessError::Config(m).exit_code(), 2);
    }

    #[test]
    fn regularization_and_overrides() {
        let s = SpecFile::from_json(
            r#"{"stencil": "D2Q9", "space": "central-moment", "basis": "cm-default",
                "regularization": "full", "rates": {"8": "omega_4"}, "storage": "absolute"}"#,
        )
        .unwrap();
        let r = s.resolve().unwrap();
        let params = r.rule().unwrap().parameters();
        assert_eq!(params, vec![Symbol::new("omega"), Symbol::new("omega_4")]);
    }

    #[test]
    fn invalid_combination_is_a_config_error() {
        let s = SpecFile::from_json(
            r#"{"stencil": "D2Q9", "preset": "K", "equilibrium": {"kind": "maxwellian", "delta": true}}"#,
        )
        .unwrap();
        assert!(matches!(s.resolve(), Err(HarnessError::Config(_))));
        let s = SpecFile::from_json(r#"{"stencil": "D2Q9", "preset": "CM", "rates": {"40": 1}}"#).unwrap();
        assert!(matches!(s.resolve(), Err(HarnessError::Config(m)) if m.contains("rates.40")));
    }

    #[test]
    fn shallow_water_spec() {
        let s = SpecFile::from_json(
            r#"{"stencil": "D2Q9", "preset": "CM", "storage": "absolute", "regularization": "full",
                "equilibrium": {"kind": "shallow-water-discrete", "g": 0.15}}"#,
        )
        .unwrap();
        let r = s.resolve().unwrap();
        assert_eq!(r.method.conserved, ConservedMode::HeightVelocity);
        assert_eq!(r.parameters[&Symbol::new("g")], 0.15);
        let mut params = r.rule().unwrap().parameters();
        params.sort();
        assert_eq!(params, vec![Symbol::new("g"), Symbol::new("omega")]);
    }
}
