//! Model parameters for the quasilinear Schrödinger equation
//!
//! ```text
//! i ∂t z = -Δz + V(x) z - k Δ(|z|²) z - θ |z|^{p-2} z
//! ```
//!
//! together with the mass constraint `½∫|u|² = λ` used by the ground-state
//! solver, and the classification of parameter regimes in which the computed
//! standing wave is orbitally stable.

use crate::error::Error;
use crate::grid::{Grid, GridKind, RealField};

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    /// V ≡ 0 (the only choice on line grids).
    Zero,
    /// V(x) = |x|² (radial grids).
    Harmonic,
    /// Node-sampled nonnegative radial potential.
    TabulatedRadial(Vec<f64>),
}

impl PotentialSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialSpec::Zero => "zero",
            PotentialSpec::Harmonic => "harmonic",
            PotentialSpec::TabulatedRadial(_) => "tabulated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Ambient dimension N (1 line, 2 or 3 radial).
    pub dim: usize,
    /// Coefficient k ≥ 0 of the quasilinear term -k Δ(|z|²) z.
    pub k: f64,
    /// Coefficient θ > 0 of the focusing power term.
    pub theta: f64,
    /// Power p > 2 of the nonlinearity |z|^{p-2} z.
    pub p: f64,
    /// Constraint level: the solver fixes ½∫|u|² = λ > 0.
    pub lambda: f64,
    pub potential: PotentialSpec,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.dim == 0 || self.dim > 3 {
            return Err(Error::invalid_argument(format!("dimension must be 1, 2 or 3, got {}", self.dim)));
        }
        for (name, v) in [("k", self.k), ("theta", self.theta), ("p", self.p), ("lambda", self.lambda)] {
            if !v.is_finite() {
                return Err(Error::invalid_argument(format!("{name} must be finite, got {v}")));
            }
        }
        if self.k < 0.0 {
            return Err(Error::invalid_argument(format!("k must be nonnegative, got {}", self.k)));
        }
        if self.theta <= 0.0 {
            return Err(Error::invalid_argument(format!("theta must be positive, got {}", self.theta)));
        }
        if self.p <= 2.0 {
            return Err(Error::invalid_argument(format!("p must exceed 2, got {}", self.p)));
        }
        if self.lambda <= 0.0 {
            return Err(Error::invalid_argument(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.dim == 1 && self.potential != PotentialSpec::Zero {
            return Err(Error::invalid_argument(
                "one-dimensional runs support only the zero potential".to_string(),
            ));
        }
        if let PotentialSpec::TabulatedRadial(vals) = &self.potential {
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid_argument(
                    "tabulated potential entries must be finite and nonnegative".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Stability regime of a parameter set, decided by (N, p, k) alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// N ≥ 2, 2 < p < 2 + 4/N, k > 0: mass-subcritical radial case.
    StableRadial,
    /// N = 1, 4 ≤ p < 6: the one-dimensional case.
    Stable1D,
    /// Anything else: the run is allowed but the stability guarantee is not.
    OutOfTheory,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::StableRadial => "stable-radial",
            Regime::Stable1D => "stable-1d",
            Regime::OutOfTheory => "out-of-theory",
        }
    }

    pub fn is_covered(&self) -> bool {
        !matches!(self, Regime::OutOfTheory)
    }
}

/// Classify the regime; `explain_regime` gives the reason in words.
pub fn classify_regime(dim: usize, p: f64, k: f64) -> Regime {
    if dim >= 2 && p > 2.0 && p < 2.0 + 4.0 / dim as f64 && k > 0.0 {
        Regime::StableRadial
    } else if dim == 1 && (4.0..6.0).contains(&p) {
        Regime::Stable1D
    } else {
        Regime::OutOfTheory
    }
}

pub fn explain_regime(dim: usize, p: f64, k: f64) -> String {
    match classify_regime(dim, p, k) {
        Regime::StableRadial => format!(
            "N = {dim} with 2 < p = {p} < 2 + 4/N = {} and k = {k} > 0: radial minimizers exist and the standing wave is orbitally stable",
            2.0 + 4.0 / dim as f64
        ),
        Regime::Stable1D => format!(
            "N = 1 with 4 <= p = {p} < 6: the constrained minimum is negative and the standing wave is orbitally stable"
        ),
        Regime::OutOfTheory => {
            let mut why = Vec::new();
            if dim == 1 {
                if p < 4.0 {
                    why.push(format!("p = {p} < 4"));
                }
                if p >= 6.0 {
                    why.push(format!("p = {p} >= 6"));
                }
            } else {
                if p >= 2.0 + 4.0 / dim as f64 {
                    why.push(format!("p = {p} >= 2 + 4/N = {}", 2.0 + 4.0 / dim as f64));
                }
                if k <= 0.0 {
                    why.push(format!("k = {k} <= 0"));
                }
            }
            if why.is_empty() {
                why.push("parameters outside the supported hypotheses".to_string());
            }
            format!("no stability guarantee: {}", why.join(", "))
        }
    }
}

/// Sample the potential on a grid. Tabulated potentials must match the grid
/// length; harmonic means V = |x|² (V = r² on a ray).
pub fn potential_values(grid: &Grid, spec: &PotentialSpec) -> Result<RealField, Error> {
    match spec {
        PotentialSpec::Zero => Ok(grid.sample(|_| 0.0)),
        PotentialSpec::Harmonic => Ok(grid.sample(|x| x * x)),
        PotentialSpec::TabulatedRadial(vals) => {
            if grid.kind() != GridKind::Radial {
                return Err(Error::invalid_argument(
                    "tabulated radial potential requires a radial grid".to_string(),
                ));
            }
            if vals.len() != grid.len() {
                return Err(Error::invalid_argument(format!(
                    "tabulated potential has {} entries but the grid has {} nodes",
                    vals.len(),
                    grid.len()
                )));
            }
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid_argument(
                    "tabulated potential entries must be finite and nonnegative".to_string(),
                ));
            }
            Ok(grid.real_field(vals.clone()))
        }
    }
}

/// A validated (grid, parameters) pair with the potential already sampled:
/// the working object every solver routine takes.
#[derive(Debug, Clone)]
pub struct Problem<'g> {
    pub grid: &'g Grid,
    pub params: ModelParams,
    /// Potential samples; `None` for V ≡ 0 so hot loops can skip the term.
    pub(crate) v: Option<RealField>,
    pub regime: Regime,
}

impl<'g> Problem<'g> {
    pub fn new(grid: &'g Grid, params: ModelParams) -> Result<Self, Error> {
        params.validate()?;
        let grid_dim_ok = match grid.kind() {
            GridKind::Line => params.dim == 1,
            GridKind::Radial => params.dim == grid.dim(),
        };
        if !grid_dim_ok {
            return Err(Error::invalid_argument(format!(
                "model dimension N = {} does not match the grid (kind {:?}, N = {})",
                params.dim,
                grid.kind(),
                grid.dim()
            )));
        }
        let v = match &params.potential {
            PotentialSpec::Zero => None,
            spec => Some(potential_values(grid, spec)?),
        };
        let regime = classify_regime(params.dim, params.p, params.k);
        Ok(Problem { grid, params, v, regime })
    }

    pub fn potential(&self) -> Option<&RealField> {
        self.v.as_ref()
    }

    pub(crate) fn v_slice(&self) -> Option<&[f64]> {
        self.v.as_ref().map(|f| f.values())
    }
}
