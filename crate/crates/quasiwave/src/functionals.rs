//! The variational quantities behind the solver:
//!
//! ```text
//! F1 = ½∫(|∇u|² + V|u|²)     F2 = ½∫|u|²
//! F3 = ¼∫|∇(u²)|²            F4 = (1/p)∫|u|^p
//! E  = F1 + k F3 - θ F4
//! ```
//!
//! `E` is minimized subject to `F2 = λ`; on line grids (V ≡ 0) it coincides
//! with the 1D action `∫ ½|u'|² + (k/4)|(u²)'|² - (θ/p)|u|^p`.
//!
//! All gradient-square integrals use the grid's staggered cell rule and all
//! node integrals its quadrature weights, so `energy_gradient` — the stencil
//! expression `-Δu + V u - k Δ(u²) u - θ|u|^{p-2} u` — is the *exact*
//! gradient of `evaluate(..).energy` in the weighted inner product for fields
//! satisfying the grid's Dirichlet conditions. Finite-difference gradient
//! checks therefore pass at rounding level, and energies are exactly
//! monotone along the well-stepped descent flow.

use crate::grid::{ComplexField, RealField};
use crate::model::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalValues {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    /// E = F1 + k F3 - θ F4.
    pub energy: f64,
}

impl FunctionalValues {
    /// F5 = F1 + μ F2 + k F3 - θ F4 (the action whose critical points solve
    /// the standing-wave equation with multiplier μ).
    pub fn f5(&self, problem: &Problem, mu: f64) -> f64 {
        self.f1 + mu * self.f2 + problem.params.k * self.f3 - problem.params.theta * self.f4
    }

    /// F6 = 2F1 + 2μF2 + 4kF3 - pθF4, the Nehari-type pairing ⟨F5'(u), u⟩.
    pub fn f6(&self, problem: &Problem, mu: f64) -> f64 {
        let p = &problem.params;
        2.0 * self.f1 + 2.0 * mu * self.f2 + 4.0 * p.k * self.f3 - p.p * p.theta * self.f4
    }
}

/// |u|^{p-2} u with cheap paths for the common integer powers.
#[inline]
pub(crate) fn power_term(u: f64, p: f64) -> f64 {
    if p == 4.0 {
        u * u * u
    } else if p == 3.0 {
        u.abs() * u
    } else {
        u.abs().powf(p - 2.0) * u
    }
}

/// |u|^p with cheap paths for the common integer powers.
#[inline]
pub(crate) fn abs_power(u: f64, p: f64) -> f64 {
    if p == 4.0 {
        let s = u * u;
        s * s
    } else if p == 3.0 {
        u * u * u.abs()
    } else {
        u.abs().powf(p)
    }
}

pub fn evaluate(problem: &Problem, u: &RealField) -> FunctionalValues {
    problem.grid.check_tag(u.tag, "evaluate");
    evaluate_slice(problem, u.values())
}

/// Kernel behind `evaluate`, shared with the solver hot loop.
pub(crate) fn evaluate_slice(problem: &Problem, uv: &[f64]) -> FunctionalValues {
    let grid = problem.grid;
    let cell = grid.cell_coefficients();
    let weights = grid.weights();
    let p = problem.params.p;

    let mut grad_u = 0.0;
    let mut grad_rho = 0.0;
    for j in 0..uv.len() - 1 {
        let du = uv[j + 1] - uv[j];
        let drho = uv[j + 1] * uv[j + 1] - uv[j] * uv[j];
        grad_u += cell[j] * du * du;
        grad_rho += cell[j] * drho * drho;
    }

    let mut vterm = 0.0;
    if let Some(v) = problem.v_slice() {
        for j in 0..uv.len() {
            vterm += weights[j] * v[j] * uv[j] * uv[j];
        }
    }
    let mut mass = 0.0;
    let mut pow = 0.0;
    for j in 0..uv.len() {
        mass += weights[j] * uv[j] * uv[j];
        pow += weights[j] * abs_power(uv[j], p);
    }

    let f1 = 0.5 * (grad_u + vterm);
    let f2 = 0.5 * mass;
    let f3 = 0.25 * grad_rho;
    let f4 = pow / p;
    let energy = f1 + problem.params.k * f3 - problem.params.theta * f4;
    FunctionalValues { f1, f2, f3, f4, energy }
}

/// Same functionals on a complex field: |∇z|² sums the staggered squares of
/// the real and imaginary parts, and the quasilinear density is ρ = |z|².
/// Restricts to `evaluate` on real data, and is what the time integrator
/// conserves.
pub fn evaluate_complex(problem: &Problem, z: &ComplexField) -> FunctionalValues {
    let grid = problem.grid;
    grid.check_tag(z.tag, "evaluate_complex");
    let zv = z.values();
    let cell = grid.cell_coefficients();
    let weights = grid.weights();
    let p = problem.params.p;

    let mut grad_z = 0.0;
    let mut grad_rho = 0.0;
    for j in 0..zv.len() - 1 {
        let dre = zv[j + 1].re - zv[j].re;
        let dim = zv[j + 1].im - zv[j].im;
        let drho = zv[j + 1].norm_sqr() - zv[j].norm_sqr();
        grad_z += cell[j] * (dre * dre + dim * dim);
        grad_rho += cell[j] * drho * drho;
    }

    let mut vterm = 0.0;
    if let Some(v) = problem.v_slice() {
        for j in 0..zv.len() {
            vterm += weights[j] * v[j] * zv[j].norm_sqr();
        }
    }
    let mut mass = 0.0;
    let mut pow = 0.0;
    for j in 0..zv.len() {
        let r2 = zv[j].norm_sqr();
        mass += weights[j] * r2;
        pow += weights[j] * abs_power(r2.sqrt(), p);
    }

    let f1 = 0.5 * (grad_z + vterm);
    let f2 = 0.5 * mass;
    let f3 = 0.25 * grad_rho;
    let f4 = pow / p;
    let energy = f1 + problem.params.k * f3 - problem.params.theta * f4;
    FunctionalValues { f1, f2, f3, f4, energy }
}

/// L²-gradient of E: `-Δu + V u - k Δ(u²) u - θ |u|^{p-2} u`.
pub fn energy_gradient(problem: &Problem, u: &RealField) -> RealField {
    problem.grid.check_tag(u.tag, "energy_gradient");
    let n = u.values().len();
    let mut rho = vec![0.0; n];
    let mut lap = vec![0.0; n];
    let mut out = vec![0.0; n];
    energy_gradient_into(problem, u.values(), &mut rho, &mut lap, &mut out);
    problem.grid.real_field(out)
}

/// In-place kernel shared with the solver hot loop. `rho` and `lap` are
/// scratch buffers of grid length.
pub(crate) fn energy_gradient_into(
    problem: &Problem,
    u: &[f64],
    rho: &mut [f64],
    lap: &mut [f64],
    out: &mut [f64],
) {
    let grid = problem.grid;
    let k = problem.params.k;
    let theta = problem.params.theta;
    let p = problem.params.p;

    for j in 0..u.len() {
        rho[j] = u[j] * u[j];
    }
    grid.laplacian_into(rho, lap);
    for j in 0..u.len() {
        out[j] = -k * lap[j] * u[j] - theta * power_term(u[j], p);
    }
    grid.laplacian_into(u, lap);
    if let Some(v) = problem.v_slice() {
        for j in 0..u.len() {
            out[j] += -lap[j] + v[j] * u[j];
        }
    } else {
        for j in 0..u.len() {
            out[j] -= lap[j];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    F1,
    F2,
    F3,
    F4,
}

/// Weak-form directional derivative ⟨F'(u), v⟩ evaluated with the same
/// quadratures as `evaluate`, so the degree-d homogeneity identities
/// ⟨F'(u), u⟩ = d·F(u) hold exactly.
pub fn directional_derivative(problem: &Problem, which: Functional, u: &RealField, v: &RealField) -> f64 {
    let grid = problem.grid;
    grid.check_tag(u.tag, "directional_derivative");
    grid.check_tag(v.tag, "directional_derivative");
    let (uv, vv) = (u.values(), v.values());
    let cell = grid.cell_coefficients();
    let weights = grid.weights();
    match which {
        Functional::F1 => {
            // ∫ ∇u·∇v + V u v
            let mut s = 0.0;
            for j in 0..uv.len() - 1 {
                s += cell[j] * (uv[j + 1] - uv[j]) * (vv[j + 1] - vv[j]);
            }
            if let Some(pot) = problem.v_slice() {
                for j in 0..uv.len() {
                    s += weights[j] * pot[j] * uv[j] * vv[j];
                }
            }
            s
        }
        Functional::F2 => grid.inner(u, v),
        Functional::F3 => {
            // ∫ ∇(u²)·∇(uv)
            let mut s = 0.0;
            for j in 0..uv.len() - 1 {
                let drho = uv[j + 1] * uv[j + 1] - uv[j] * uv[j];
                let duv = uv[j + 1] * vv[j + 1] - uv[j] * vv[j];
                s += cell[j] * drho * duv;
            }
            s
        }
        Functional::F4 => {
            let p = problem.params.p;
            let mut s = 0.0;
            for j in 0..uv.len() {
                s += weights[j] * power_term(uv[j], p) * vv[j];
            }
            s
        }
    }
}
