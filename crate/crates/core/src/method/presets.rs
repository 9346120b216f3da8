use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{default_rates, ConservedMode, MethodSpec, StorageFormat};
use crate::equilibrium::Equilibrium;
use crate::lattice::{default_polynomial_basis, monomial_basis, orthogonalize_basis, SpaceKind, Stencil};
use crate::symexpr::Expr;

/// Named method families, each with its customary collision space and basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodPreset {
    Srt,
    OrthogonalMrt,
    WeightedOrthogonalMrt,
    CentralMoment,
    Cumulant,
}

impl MethodPreset {
    pub const ALL: [MethodPreset; 5] = [
        MethodPreset::Srt,
        MethodPreset::OrthogonalMrt,
        MethodPreset::WeightedOrthogonalMrt,
        MethodPreset::CentralMoment,
        MethodPreset::Cumulant,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            MethodPreset::Srt => "SRT",
            MethodPreset::OrthogonalMrt => "O-MRT",
            MethodPreset::WeightedOrthogonalMrt => "WO-MRT",
            MethodPreset::CentralMoment => "CM",
            MethodPreset::Cumulant => "K",
        }
    }

    pub fn space(self) -> SpaceKind {
        match self {
            MethodPreset::Srt => SpaceKind::Population,
            MethodPreset::OrthogonalMrt | MethodPreset::WeightedOrthogonalMrt => SpaceKind::RawMoment,
            MethodPreset::CentralMoment => SpaceKind::CentralMoment,
            MethodPreset::Cumulant => SpaceKind::Cumulant,
        }
    }
}

impl fmt::Display for MethodPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for MethodPreset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "SRT" => Ok(MethodPreset::Srt),
            "O-MRT" | "OMRT" => Ok(MethodPreset::OrthogonalMrt),
            "WO-MRT" | "WOMRT" => Ok(MethodPreset::WeightedOrthogonalMrt),
            "CM" => Ok(MethodPreset::CentralMoment),
            "K" | "CUMULANT" => Ok(MethodPreset::Cumulant),
            _ => Err(format!("unknown method `{s}` (expected SRT, O-MRT, WO-MRT, CM or K)")),
        }
    }
}

/// The operation-count configuration: zero-centered storage; deviation
/// equilibrium for population and raw-moment methods, absolute equilibrium
/// for central-moment and cumulant methods; fully symbolic rates.
pub fn preset(kind: MethodPreset, st: &Stencil) -> MethodSpec {
    let basis = match kind {
        MethodPreset::Srt => monomial_basis(st),
        MethodPreset::OrthogonalMrt => orthogonalize_basis(st, false),
        MethodPreset::WeightedOrthogonalMrt => orthogonalize_basis(st, true),
        MethodPreset::CentralMoment | MethodPreset::Cumulant => default_polynomial_basis(st),
    }
    .with_kind(kind.space());
    let rates = match kind {
        MethodPreset::Srt => vec![Expr::sym("omega")],
        _ => default_rates(&basis),
    };
    let eq = Equilibrium::maxwellian(st.dim);
    let equilibrium = match kind.space() {
        SpaceKind::Population | SpaceKind::RawMoment => eq.delta(),
        _ => eq,
    };
    MethodSpec {
        stencil: st.clone(),
        storage: StorageFormat::ZeroCentered,
        space: kind.space(),
        basis,
        rates,
        equilibrium,
        source: None,
        conserved: ConservedMode::DensityVelocity,
    }
}
