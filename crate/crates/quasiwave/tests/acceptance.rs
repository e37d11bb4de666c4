//! Acceptance gate: nine end-to-end checks covering the functional gradient,
//! the scaling identity, both ground-state solves, conservation, standing-wave
//! propagation, orbital stability, the orbit-distance oracle, and uniqueness
//! up to translation. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion does.

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quasiwave::evolution::{evolve, EvolveOptions};
use quasiwave::functionals::{energy_gradient, evaluate};
use quasiwave::ground_state::{
    solve, scaling_probe, GroundState, Initializer, SolverOptions,
};
use quasiwave::stability::{
    h_norm_real, orbit_distance, stability_experiment_with, standing_wave_check, OrbitNorm,
    Perturbation, PerturbationMode, StabilityOptions,
};
use quasiwave::{
    build_line_grid, build_radial_grid, Grid, ModelParams, PotentialSpec, Problem, RealField,
};

fn soliton_params(p: f64) -> ModelParams {
    ModelParams { dim: 1, k: 1.0, theta: 1.0, p, lambda: 0.5, potential: PotentialSpec::Zero }
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn check(&mut self, idx: usize, name: &str, pass: bool, detail: String) {
        println!("criterion {idx} ({name}): {} — {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failures.push(format!("criterion {idx} ({name}): {detail}"));
        }
    }
}

/// Smooth localized field with pinned endpoints: a Gaussian envelope times a
/// short random cosine mix.
fn random_smooth_field(grid: &Grid, rng: &mut ChaCha8Rng) -> RealField {
    let sigma: f64 = rng.random_range(1.5..3.0);
    let comps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.2..1.0),
                rng.random_range(0.2..2.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let mut vals: Vec<f64> = grid
        .coords()
        .iter()
        .map(|&x| {
            let env = (-x * x / (2.0 * sigma * sigma)).exp();
            env * comps.iter().map(|&(a, w, ph)| a * (w * x + ph).cos()).sum::<f64>()
        })
        .collect();
    let n = vals.len();
    vals[0] = 0.0;
    vals[n - 1] = 0.0;
    grid.real_field(vals)
}

/// ⟨grad E(u), v⟩ against the central difference (E(u+εv) − E(u−εv)) / 2ε.
fn gradient_check(problem: &Problem, u: &RealField, v: &RealField) -> f64 {
    let grid = problem.grid;
    let g = energy_gradient(problem, u);
    let pairing = grid.inner(&g, v);
    let eps = 1e-5;
    let uv = u.values();
    let vv = v.values();
    let plus: Vec<f64> = uv.iter().zip(vv).map(|(&a, &b)| a + eps * b).collect();
    let minus: Vec<f64> = uv.iter().zip(vv).map(|(&a, &b)| a - eps * b).collect();
    let ep = evaluate(problem, &grid.real_field(plus)).energy;
    let em = evaluate(problem, &grid.real_field(minus)).energy;
    let fd = (ep - em) / (2.0 * eps);
    (pairing - fd).abs() / fd.abs().max(1e-12)
}

fn criterion_1(gate: &mut Gate) {
    let start = Instant::now();
    let grid = build_line_grid(15.0, 1501).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for trial in 0..10u32 {
        // Rotate through model parameters so the check exercises every term.
        let params = ModelParams {
            dim: 1,
            k: [0.0, 0.7, 1.0, 1.3][trial as usize % 4],
            theta: [0.5, 1.0, 1.5][trial as usize % 3],
            p: [3.0, 4.0, 5.0][trial as usize % 3],
            lambda: 0.5,
            potential: PotentialSpec::Zero,
        };
        let problem = Problem::new(&grid, params).unwrap();
        let u = random_smooth_field(&grid, &mut rng);
        let v = random_smooth_field(&grid, &mut rng);
        worst = worst.max(gradient_check(&problem, &u, &v));
    }
    let dt = start.elapsed().as_secs_f64();
    gate.check(
        1,
        "functional gradient check",
        worst <= 1e-6 && dt < 10.0,
        format!("worst relative error {worst:.3e} (≤ 1e-6) over 10 fields in {dt:.2}s (< 10s)"),
    );
}

fn criterion_2(gate: &mut Gate) {
    let grid = build_line_grid(15.0, 4001).unwrap();
    let problem = Problem::new(&grid, soliton_params(4.0)).unwrap();
    // Gaussian projected exactly onto F2 = λ = 0.5.
    let raw = grid.sample(|x| (-x * x / 2.0).exp());
    let mass = grid.inner(&raw, &raw);
    let s = (2.0 * 0.5 / mass).sqrt();
    let psi = grid.real_field(raw.values().iter().map(|&v| s * v).collect());

    let xis = [0.25, 0.5, 1.0, 2.0, 4.0];
    let probe = scaling_probe(&problem, &psi, &xis).unwrap();
    let mut worst = 0.0f64;
    for smpl in &probe.samples {
        worst = worst.max((smpl.numeric - smpl.analytic).abs());
    }
    let certified = probe.first_negative_xi == Some(0.25)
        && probe.samples.iter().any(|s| s.xi == 0.25 && s.analytic < 0.0);

    // Negative-level certificates across the subcritical power range. The
    // crossover scale shrinks like ξ^{2-(p/2-1)} → 0 as p → 6, so the sweep
    // reaches down to ξ = 1e-5.
    let mut all_powers = true;
    for p in [2.5, 3.0, 3.5, 4.5, 5.0, 5.5] {
        let prob_p = Problem::new(&grid, soliton_params(p)).unwrap();
        let probe_p = scaling_probe(&prob_p, &psi, &[1e-5, 1e-4, 1e-3, 1e-2, 0.1, 0.25]).unwrap();
        all_powers &= probe_p.first_negative_xi.is_some();
    }
    gate.check(
        2,
        "scaling identity",
        worst <= 1e-4 && certified && all_powers,
        format!(
            "max |numeric − analytic| {worst:.3e} (≤ 1e-4); negative level at ξ=0.25: {certified}; \
             certificates across 2<p<6: {all_powers}"
        ),
    );
}

fn criterion_3(gate: &mut Gate) -> (Grid, GroundState) {
    let start = Instant::now();
    let grid = build_line_grid(15.0, 1501).unwrap();
    let problem = Problem::new(&grid, soliton_params(4.0)).unwrap();
    let h = grid.spacing();
    let opts = SolverOptions {
        tau: Some(0.45 * h * h),
        eps_residual: 1e-8,
        ..SolverOptions::default()
    };
    let gs = solve(&problem, &opts).unwrap();
    let dt = start.elapsed().as_secs_f64();
    // Converged energy and multiplier act as regression baselines.
    let m_ref = -0.009350883296;
    let gamma_ref = -0.0559171229;
    let pass = gs.residual <= 1e-8
        && gs.energy < 0.0
        && gs.gamma < 0.0
        && (gs.values.f2 - 0.5).abs() <= 1e-12
        && (gs.energy - m_ref).abs() <= 1e-8
        && (gs.gamma - gamma_ref).abs() <= 1e-6
        && dt < 60.0;
    gate.check(
        3,
        "1D ground state",
        pass,
        format!(
            "residual {:.2e} (≤ 1e-8), m = {:.9} (< 0, ref {m_ref}), γ = {:.8} (< 0), \
             |F2−λ| = {:.1e} (≤ 1e-12), {} iterations in {dt:.1}s (< 60s)",
            gs.residual,
            gs.energy,
            gs.gamma,
            (gs.values.f2 - 0.5).abs(),
            gs.iterations
        ),
    );
    (grid, gs)
}

fn criterion_4(gate: &mut Gate) {
    let start = Instant::now();
    let grid = build_radial_grid(2, 8.0, 1601).unwrap();
    let problem = Problem::new(
        &grid,
        ModelParams {
            dim: 2,
            k: 1.0,
            theta: 1.0,
            p: 3.0,
            lambda: 0.5,
            potential: PotentialSpec::Harmonic,
        },
    )
    .unwrap();
    let h = grid.spacing();
    let opts = SolverOptions {
        tau: Some(0.9 * h * h / 4.0),
        eps_residual: 1e-8,
        ..SolverOptions::default()
    };
    let gs = solve(&problem, &opts).unwrap();
    let dt = start.elapsed().as_secs_f64();
    let m_ref = 0.9483665996;
    let pass = gs.residual <= 1e-8
        && (gs.values.f2 - 0.5).abs() <= 1e-12
        && (gs.energy - m_ref).abs() <= 1e-6
        && dt < 120.0;
    gate.check(
        4,
        "radial ground state",
        pass,
        format!(
            "residual {:.2e} (≤ 1e-8), m = {:.9} (ref {m_ref}), |F2−λ| = {:.1e}, \
             {} iterations in {dt:.1}s (< 120s)",
            gs.residual,
            gs.energy,
            (gs.values.f2 - 0.5).abs(),
            gs.iterations
        ),
    );
}

fn criterion_5(gate: &mut Gate, grid: &Grid, gs: &GroundState) {
    let problem = Problem::new(grid, soliton_params(4.0)).unwrap();
    let z0 = grid.to_complex(&gs.u);
    let opts = EvolveOptions { dt: 1e-3, t_final: 10.0, ..EvolveOptions::default() };
    let (_, summary) = evolve(&problem, &z0, &opts, |_, _| {}).unwrap();
    gate.check(
        5,
        "conservation",
        summary.mass_drift <= 1e-8 && summary.energy_drift <= 1e-6,
        format!(
            "relative mass drift {:.2e} (≤ 1e-8), relative energy drift {:.2e} (≤ 1e-6) at T=10",
            summary.mass_drift, summary.energy_drift
        ),
    );
}

fn criterion_6(gate: &mut Gate, grid: &Grid, gs: &GroundState) {
    let problem = Problem::new(grid, soliton_params(4.0)).unwrap();
    let err1 = standing_wave_check(&problem, gs, 5.0, 1e-3, 1e-11, 50).unwrap();

    // At dt=1e-3 the deviation is not truncation: it is the residual-induced
    // drift ‖grad E(u0) − γu0‖·t ≈ 3e-8·t, and below that the per-step Picard
    // stopping defect, which accumulates to (t/dt)·picard_tol ∝ 1/dt. The
    // second-order check therefore runs on a profile polished to a residual of
    // 1e-11 and at steps large enough that the O(μ³dt³/12) per-step truncation
    // (μ ≈ 0.056) clears the 1e-11 defect by two decades: dt=0.05 → 1.8e-9.
    let h = grid.spacing();
    let polish_opts = SolverOptions {
        tau: Some(0.45 * h * h),
        eps_residual: 1e-11,
        init: Initializer::Custom(gs.u.clone()),
        ..SolverOptions::default()
    };
    let polished = solve(&problem, &polish_opts).unwrap();
    let err_a = standing_wave_check(&problem, &polished, 5.0, 5e-2, 1e-11, 1).unwrap();
    let err_b = standing_wave_check(&problem, &polished, 5.0, 2.5e-2, 1e-11, 2).unwrap();
    let ratio = err_a / err_b;
    let pass = err1 <= 1e-3 && (2.8..=5.2).contains(&ratio);
    gate.check(
        6,
        "standing-wave propagation",
        pass,
        format!(
            "max ‖z − e^{{iμt}}u0‖ = {err1:.3e} at dt=1e-3 (≤ 1e-3); on the polished profile \
             dt=5e-2 → {err_a:.3e}, dt=2.5e-2 → {err_b:.3e}, ratio {ratio:.2} (≈ 4)"
        ),
    );
}

fn criterion_7(gate: &mut Gate, grid: &Grid, gs: &GroundState) {
    let problem = Problem::new(grid, soliton_params(4.0)).unwrap();
    let base = StabilityOptions {
        perturbation: Perturbation { delta: 1e-2, mode: PerturbationMode::Bump },
        ..StabilityOptions::default()
    };
    let r1 = stability_experiment_with(&problem, gs, &base).unwrap();
    let half = StabilityOptions {
        perturbation: Perturbation { delta: 5e-3, mode: PerturbationMode::Bump },
        ..base
    };
    let r2 = stability_experiment_with(&problem, gs, &half).unwrap();
    let ratio = r2.max_distance / r1.max_distance;
    let pass = !r1.truncated
        && !r2.truncated
        && r1.max_distance <= 5.0 * 1e-2
        && r1.stable
        && (0.35..=0.65).contains(&ratio);
    gate.check(
        7,
        "orbital stability",
        pass,
        format!(
            "δ=1e-2: max d = {:.3e} (≤ 5e-2); δ=5e-3: max d = {:.3e}, ratio {ratio:.2} (≈ 0.5)",
            r1.max_distance, r2.max_distance
        ),
    );
}

/// Catmull–Rom resampling of node values onto a finer grid over the same
/// interval; endpoints pinned to zero.
fn resample_cubic(src_grid: &Grid, src: &[f64], dst: &Grid) -> Vec<f64> {
    let n = src.len();
    let h = src_grid.spacing();
    let l = src_grid.extent();
    let mut out: Vec<f64> = dst
        .coords()
        .iter()
        .map(|&x| {
            let t = (x + l) / h;
            let i = (t.floor() as isize).clamp(0, n as isize - 2) as usize;
            let f = t - i as f64;
            if f.abs() < 1e-12 {
                return src[i];
            }
            let pm1 = if i > 0 { src[i - 1] } else { 0.0 };
            let p0 = src[i];
            let p1 = src[i + 1];
            let p2 = if i + 2 < n { src[i + 2] } else { 0.0 };
            p0 + 0.5
                * f
                * (p1 - pm1
                    + f * (2.0 * pm1 - 5.0 * p0 + 4.0 * p1 - p2 + f * (3.0 * (p0 - p1) + p2 - pm1)))
        })
        .collect();
    let m = out.len();
    out[0] = 0.0;
    out[m - 1] = 0.0;
    out
}

/// H¹ inner product ⟨a, b⟩ = ∫ a̅'b' + ∫ a̅b at the quadrature level.
fn h1_inner(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let w = grid.weights();
    let c = grid.cell_coefficients();
    let mut s = Complex64::ZERO;
    for j in 0..a.len() {
        s += w[j] * a[j].conj() * b[j];
    }
    for j in 0..a.len() - 1 {
        s += c[j] * (a[j + 1] - a[j]).conj() * (b[j + 1] - b[j]);
    }
    s
}

fn criterion_8(gate: &mut Gate, grid: &Grid, gs: &GroundState) {
    let fine = build_line_grid(15.0, 4001).unwrap();
    let problem = Problem::new(&fine, soliton_params(4.0)).unwrap();
    let u4 = fine.real_field(resample_cubic(grid, gs.u.values(), &fine));
    let unorm = h_norm_real(&problem, OrbitNorm::H1, &u4);

    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let eta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let xi: f64 = rng.random_range(-3.0..3.0);
        let sh = fine.shift(&u4, xi).unwrap();
        let rot = Complex64::from_polar(1.0, eta);
        let z = fine.complex_field(sh.values().iter().map(|&u| rot * u).collect());
        let od = orbit_distance(&problem, &z, &u4, OrbitNorm::H1).unwrap();
        worst = worst.max(od.d);
    }
    let orbit_ok = worst <= 1e-6 * unorm;

    // z = 2u0 against an exhaustive (η, ξ)-lattice scan.
    let z2 = fine.complex_field(u4.values().iter().map(|&u| Complex64::new(2.0 * u, 0.0)).collect());
    let od2 = orbit_distance(&problem, &z2, &u4, OrbitNorm::H1).unwrap();
    let z2n = h1_inner(&fine, z2.values(), z2.values()).re;
    let n = fine.len() as i64;
    let h = fine.spacing();
    let mut brute2 = f64::INFINITY;
    for m in -(n - 1)..n {
        let sh = fine.shift(&u4, m as f64 * h).unwrap();
        let shc: Vec<Complex64> = sh.values().iter().map(|&u| Complex64::new(u, 0.0)).collect();
        let sh2 = h1_inner(&fine, &shc, &shc).re;
        let corr = h1_inner(&fine, &shc, z2.values());
        for q in 0..64 {
            let eta = std::f64::consts::TAU * q as f64 / 64.0;
            let d2 = z2n + sh2 - 2.0 * (Complex64::from_polar(1.0, -eta) * corr).re;
            brute2 = brute2.min(d2.max(0.0));
        }
    }
    let brute = brute2.sqrt();
    let scan_ok = (od2.d - brute).abs() <= 1e-9 * unorm;
    // Closed form: the best orbit point for 2u0 is u0 itself, at distance ‖u0‖.
    let closed_ok = (od2.d - unorm).abs() <= 1e-9 * unorm;

    gate.check(
        8,
        "orbit-distance oracle",
        orbit_ok && scan_ok && closed_ok,
        format!(
            "worst d over 20 orbit points {:.3e} (≤ {:.3e}); 2u0: refined {:.12} vs lattice scan \
             {:.12} vs ‖u0‖ {:.12}",
            worst,
            1e-6 * unorm,
            od2.d,
            brute,
            unorm
        ),
    );
}

fn criterion_9(gate: &mut Gate, grid: &Grid, gs: &GroundState) {
    let problem = Problem::new(grid, soliton_params(4.0)).unwrap();
    let h = grid.spacing();
    let opts = SolverOptions {
        tau: Some(0.45 * h * h),
        eps_residual: 1e-8,
        init: Initializer::Gaussian { width: 2.5 },
        ..SolverOptions::default()
    };
    let other = solve(&problem, &opts).unwrap();
    // Equality up to recentering: minimize over translation (and phase, which
    // stays ≈ 0 for same-sign real profiles) in H¹.
    let od = orbit_distance(&problem, &grid.to_complex(&other.u), &gs.u, OrbitNorm::H1).unwrap();
    gate.check(
        9,
        "uniqueness up to translation",
        od.d <= 1e-6,
        format!(
            "width-2.5 start lands d = {:.3e} (≤ 1e-6) from the width-1 profile, ξ* = {:.2e}",
            od.d,
            od.xi_star.unwrap_or(0.0)
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut gate = Gate { failures: Vec::new() };
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    let (grid, gs) = criterion_3(&mut gate);
    criterion_4(&mut gate);
    criterion_5(&mut gate, &grid, &gs);
    criterion_6(&mut gate, &grid, &gs);
    criterion_7(&mut gate, &grid, &gs);
    criterion_8(&mut gate, &grid, &gs);
    criterion_9(&mut gate, &grid, &gs);
    assert!(
        gate.failures.is_empty(),
        "acceptance failures:\n{}",
        gate.failures.join("\n")
    );
}
