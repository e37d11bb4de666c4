//! Configuration, command execution, and result files for reproducible runs.
//!
//! Configs are flat `key=value` lines ('#' starts a comment); command-line
//! flags override file values. Every run echoes its effective configuration
//! to the output directory and stamps each artifact with the regime tag and
//! a hash of that configuration, so results can always be traced back to the
//! exact inputs. Reruns with identical configs produce byte-identical files.
//!
//! Artifacts per run: `summary.txt` (key=value scalars), `series.csv`
//! (iteration or time series), `field_*.txt` (one node value per line, or
//! `re im` columns for complex fields), `config_effective.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::evolution::{self, EvolveOptions};
use crate::grid::{build_line_grid, build_radial_grid, ComplexField, Grid, GridKind, RealField};
use crate::ground_state::{self, Initializer, SolverOptions};
use crate::model::{classify_regime, ModelParams, PotentialSpec, Problem};
use crate::stability::{self, Perturbation, PerturbationMode, StabilityOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GroundState,
    Evolve,
    Stability,
    ScalingProbe,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Evolve => "evolve",
            Command::Stability => "stability",
            Command::ScalingProbe => "scaling-probe",
        }
    }

    pub fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "ground-state" => Ok(Command::GroundState),
            "evolve" => Ok(Command::Evolve),
            "stability" => Ok(Command::Stability),
            "scaling-probe" => Ok(Command::ScalingProbe),
            other => Err(Error::config(
                "command",
                format!("unknown command '{other}'; expected ground-state, evolve, stability, or scaling-probe"),
            )),
        }
    }
}

/// Every recognized key with its default (as written in a config file).
const DEFAULTS: &[(&str, &str)] = &[
    // model
    ("N", "1"),
    ("k", "1"),
    ("theta", "1"),
    ("p", "4"),
    ("lambda", "0.5"),
    ("potential", "zero"),
    // grid
    ("grid", "auto"),
    ("L", "15"),
    ("Rmax", "8"),
    ("n", "1501"),
    // ground-state solver
    ("tau", "auto"),
    ("max_iter", "5000000"),
    ("eps_energy", "1e-12"),
    ("eps_residual", "1e-8"),
    ("nonneg", "true"),
    ("recenter_every", "0"),
    ("init_width", "1"),
    ("log_every", "50000"),
    ("check_every", "200"),
    // evolution
    ("T", "10"),
    ("dt", "1e-3"),
    ("sample_every", "50"),
    ("picard_tol", "1e-10"),
    ("max_sweeps", "25"),
    ("max_retries", "8"),
    // stability
    ("delta", "1e-2"),
    ("mode", "bump"),
    ("seed", "1"),
    ("C", "5"),
    // scaling probe
    ("xi_list", "0.25,0.5,1,2,4"),
    // output
    ("out", "out"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub dim: usize,
    pub k: f64,
    pub theta: f64,
    pub p: f64,
    pub lambda: f64,
    pub potential: PotentialSpec,
    pub grid_kind: GridKind,
    pub l: f64,
    pub rmax: f64,
    pub n: usize,
    pub tau: Option<f64>,
    pub max_iter: u64,
    pub eps_energy: f64,
    pub eps_residual: f64,
    pub nonneg: bool,
    pub recenter_every: u64,
    pub init_width: f64,
    pub log_every: u64,
    pub check_every: u64,
    pub t_final: f64,
    pub dt: f64,
    pub sample_every: u64,
    pub picard_tol: f64,
    pub max_sweeps: u32,
    pub max_retries: u32,
    pub perturbation: Perturbation,
    pub verdict_factor: f64,
    pub xis: Vec<f64>,
    pub out: PathBuf,
    /// Normalized effective entries (defaults merged with inputs).
    entries: BTreeMap<String, String>,
}

fn parse_lines(text: &str) -> Result<Vec<(String, String)>, Error> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", idx + 1),
                format!("expected key=value, got '{line}'"),
            ));
        };
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn get_f64(map: &BTreeMap<String, String>, key: &str) -> Result<f64, Error> {
    let raw = &map[key];
    raw.parse::<f64>()
        .map_err(|_| Error::config(key, format!("expected a number, got '{raw}'")))
        .and_then(|v| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::config(key, format!("value must be finite, got '{raw}'")))
            }
        })
}

fn get_u64(map: &BTreeMap<String, String>, key: &str) -> Result<u64, Error> {
    let raw = &map[key];
    raw.parse::<u64>().map_err(|_| Error::config(key, format!("expected a nonnegative integer, got '{raw}'")))
}

fn get_bool(map: &BTreeMap<String, String>, key: &str) -> Result<bool, Error> {
    let raw = map[key].as_str();
    match raw {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(key, format!("expected true/false, got '{raw}'"))),
    }
}

/// Merge defaults, config-file text, and CLI overrides into a validated
/// configuration. Unknown keys are rejected.
pub fn parse_config(command: Command, text: &str, overrides: &[(String, String)]) -> Result<RunConfig, Error> {
    let mut map: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let mut apply = |pairs: Vec<(String, String)>| -> Result<(), Error> {
        for (key, value) in pairs {
            if !map.contains_key(&key) {
                return Err(Error::config(&key, "unknown configuration key"));
            }
            map.insert(key, value);
        }
        Ok(())
    };
    apply(parse_lines(text)?)?;
    apply(overrides.to_vec())?;

    let dim = get_u64(&map, "N")? as usize;
    if !(1..=3).contains(&dim) {
        return Err(Error::config("N", format!("dimension must be 1, 2, or 3, got {}", map["N"])));
    }
    let k = get_f64(&map, "k")?;
    if k < 0.0 {
        return Err(Error::config("k", "quasilinear coefficient k must be ≥ 0"));
    }
    let theta = get_f64(&map, "theta")?;
    if theta <= 0.0 {
        return Err(Error::config("theta", "theta must be > 0"));
    }
    let p = get_f64(&map, "p")?;
    if p <= 2.0 {
        return Err(Error::config("p", format!("exponent p must exceed 2, got {p}")));
    }
    let lambda = get_f64(&map, "lambda")?;
    if lambda <= 0.0 {
        return Err(Error::config("lambda", "constraint level lambda must be > 0"));
    }

    let potential = match map["potential"].as_str() {
        "zero" => PotentialSpec::Zero,
        "harmonic" => PotentialSpec::Harmonic,
        other => {
            return Err(Error::config(
                "potential",
                format!("expected zero or harmonic, got '{other}' (tabulated potentials are library-only)"),
            ))
        }
    };
    if dim == 1 && potential != PotentialSpec::Zero {
        return Err(Error::config("potential", "N=1 runs use potential=zero (free line)"));
    }

    let default_kind = if dim == 1 { GridKind::Line } else { GridKind::Radial };
    let grid_kind = match map["grid"].as_str() {
        "auto" => default_kind,
        "line" => GridKind::Line,
        "radial" => GridKind::Radial,
        other => return Err(Error::config("grid", format!("expected line, radial, or auto, got '{other}'"))),
    };
    if grid_kind != default_kind {
        return Err(Error::config(
            "grid",
            format!("grid kind '{}' does not match N={dim}", map["grid"]),
        ));
    }

    let l = get_f64(&map, "L")?;
    let rmax = get_f64(&map, "Rmax")?;
    let extent_key = if grid_kind == GridKind::Line { "L" } else { "Rmax" };
    let extent = if grid_kind == GridKind::Line { l } else { rmax };
    if extent <= 0.0 {
        return Err(Error::config(extent_key, "domain extent must be > 0"));
    }
    let n = get_u64(&map, "n")? as usize;
    if n < 3 {
        return Err(Error::config("n", "need at least 3 grid nodes"));
    }

    let tau = match map["tau"].as_str() {
        "auto" => None,
        raw => {
            let v = raw.parse::<f64>().map_err(|_| Error::config("tau", format!("expected a number or auto, got '{raw}'")))?;
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config("tau", "descent step tau must be > 0"));
            }
            Some(v)
        }
    };
    let max_iter = get_u64(&map, "max_iter")?;
    let eps_energy = get_f64(&map, "eps_energy")?;
    let eps_residual = get_f64(&map, "eps_residual")?;
    if eps_energy <= 0.0 || eps_residual <= 0.0 {
        return Err(Error::config("eps_residual", "tolerances must be > 0"));
    }
    let nonneg = get_bool(&map, "nonneg")?;
    let recenter_every = get_u64(&map, "recenter_every")?;
    if recenter_every > 0 && grid_kind != GridKind::Line {
        return Err(Error::config("recenter_every", "recentering applies to line grids only"));
    }
    let init_width = get_f64(&map, "init_width")?;
    if init_width <= 0.0 {
        return Err(Error::config("init_width", "initializer width must be > 0"));
    }
    let log_every = get_u64(&map, "log_every")?;
    let check_every = get_u64(&map, "check_every")?;

    let t_final = get_f64(&map, "T")?;
    let dt = get_f64(&map, "dt")?;
    if t_final <= 0.0 {
        return Err(Error::config("T", "time horizon T must be > 0"));
    }
    if dt <= 0.0 {
        return Err(Error::config("dt", "time step dt must be > 0"));
    }
    let steps = (t_final / dt).round();
    if steps < 1.0 || (t_final / dt - steps).abs() > 1e-9 * (t_final / dt).max(1.0) {
        return Err(Error::config("T", format!("T={t_final} is not a whole number of dt={dt} steps")));
    }
    let sample_every = get_u64(&map, "sample_every")?;
    if sample_every == 0 {
        return Err(Error::config("sample_every", "sample_every must be ≥ 1"));
    }
    let picard_tol = get_f64(&map, "picard_tol")?;
    if picard_tol <= 0.0 {
        return Err(Error::config("picard_tol", "picard_tol must be > 0"));
    }
    let max_sweeps = get_u64(&map, "max_sweeps")? as u32;
    let max_retries = get_u64(&map, "max_retries")? as u32;
    if max_sweeps == 0 {
        return Err(Error::config("max_sweeps", "max_sweeps must be ≥ 1"));
    }

    let delta = get_f64(&map, "delta")?;
    if delta < 0.0 {
        return Err(Error::config("delta", "perturbation delta must be ≥ 0"));
    }
    let seed = get_u64(&map, "seed")?;
    let mode = match map["mode"].as_str() {
        "scale" => PerturbationMode::Scale,
        "bump" => PerturbationMode::Bump,
        "random" => PerturbationMode::Random { seed },
        other => return Err(Error::config("mode", format!("expected scale, bump, or random, got '{other}'"))),
    };
    let verdict_factor = get_f64(&map, "C")?;
    if verdict_factor <= 0.0 {
        return Err(Error::config("C", "verdict factor C must be > 0"));
    }

    let mut xis = Vec::new();
    for part in map["xi_list"].split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let xi = part.parse::<f64>().map_err(|_| Error::config("xi_list", format!("bad entry '{part}'")))?;
        if !(xi > 0.0) || !xi.is_finite() {
            return Err(Error::config("xi_list", format!("scaling factors must be positive, got {part}")));
        }
        xis.push(xi);
    }
    if xis.is_empty() {
        return Err(Error::config("xi_list", "need at least one scaling factor"));
    }

    if command == Command::ScalingProbe && grid_kind != GridKind::Line {
        return Err(Error::config("command", "scaling-probe requires N=1 (line grid, zero potential)"));
    }

    let out = PathBuf::from(&map["out"]);
    // Backstop: the model's own validation (regime classification is total,
    // so this only rejects what the per-key checks above already reject).
    ModelParams { dim, k, theta, p, lambda, potential: potential.clone() }
        .validate()
        .map_err(|e| Error::config("model", e.to_string()))?;

    Ok(RunConfig {
        command,
        dim,
        k,
        theta,
        p,
        lambda,
        potential,
        grid_kind,
        l,
        rmax,
        n,
        tau,
        max_iter,
        eps_energy,
        eps_residual,
        nonneg,
        recenter_every,
        init_width,
        log_every,
        check_every,
        t_final,
        dt,
        sample_every,
        picard_tol,
        max_sweeps,
        max_retries,
        perturbation: Perturbation { delta, mode },
        verdict_factor,
        xis,
        out,
        entries: map,
    })
}

impl RunConfig {
    /// The normalized effective configuration (sorted key=value lines).
    pub fn effective_text(&self) -> String {
        let mut s = format!("command={}\n", self.command.name());
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// First 16 hex chars of the SHA-256 of the effective configuration,
    /// excluding the output directory: the hash identifies the computation,
    /// and the same run written elsewhere must stamp identical artifacts.
    pub fn config_hash(&self) -> String {
        let mut s = format!("command={}\n", self.command.name());
        for (k, v) in self.entries.iter().filter(|(k, _)| k.as_str() != "out") {
            let _ = writeln!(s, "{k}={v}");
        }
        let digest = Sha256::digest(s.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn build_grid(&self) -> Result<Grid, Error> {
        match self.grid_kind {
            GridKind::Line => build_line_grid(self.l, self.n),
            GridKind::Radial => build_radial_grid(self.dim, self.rmax, self.n),
        }
    }

    fn model_params(&self) -> ModelParams {
        ModelParams {
            dim: self.dim,
            k: self.k,
            theta: self.theta,
            p: self.p,
            lambda: self.lambda,
            potential: self.potential.clone(),
        }
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tau: self.tau,
            max_iter: self.max_iter,
            eps_energy: self.eps_energy,
            eps_residual: self.eps_residual,
            enforce_nonnegative: self.nonneg,
            recenter_every: self.recenter_every,
            init: Initializer::Gaussian { width: self.init_width },
            log_every: self.log_every,
            check_every: self.check_every,
        }
    }

    fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            dt: self.dt,
            t_final: self.t_final,
            picard_tol: self.picard_tol,
            max_sweeps: self.max_sweeps,
            max_retries: self.max_retries,
            sample_every: self.sample_every,
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_text(path: &Path, content: &str) -> Result<(), Error> {
    std::fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Artifacts {
    dir: PathBuf,
    stamp: String,
    summary: Vec<(String, String)>,
}

impl Artifacts {
    fn new(config: &RunConfig, regime_name: &str) -> Result<Self, Error> {
        std::fs::create_dir_all(&config.out).map_err(|e| Error::io(config.out.display().to_string(), e))?;
        let stamp = format!("# regime={} config={}\n", regime_name, config.config_hash());
        let mut art = Artifacts { dir: config.out.clone(), stamp, summary: Vec::new() };
        art.push("command", config.command.name());
        art.push("regime", regime_name);
        art.push("config_hash", config.config_hash());
        write_text(&config.out.join("config_effective.txt"), &config.effective_text())?;
        Ok(art)
    }

    fn push(&mut self, key: &str, value: impl Into<String>) {
        self.summary.push((key.to_string(), value.into()));
    }

    fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt(value));
    }

    fn write_summary(&self) -> Result<(), Error> {
        let mut s = String::new();
        for (k, v) in &self.summary {
            let _ = writeln!(s, "{k}={v}");
        }
        write_text(&self.dir.join("summary.txt"), &s)
    }

    fn write_series(&self, header: &str, rows: &[Vec<f64>]) -> Result<(), Error> {
        let mut s = self.stamp.clone();
        s.push_str(header);
        s.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(|&x| fmt(x)).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        write_text(&self.dir.join("series.csv"), &s)
    }

    fn field_header(&self, grid: &Grid) -> String {
        let kind = match grid.kind() {
            GridKind::Line => "line",
            GridKind::Radial => "radial",
        };
        format!(
            "{}# grid={} dim={} extent={} n={} h={}\n",
            self.stamp,
            kind,
            grid.dim(),
            fmt(grid.extent()),
            grid.len(),
            fmt(grid.spacing())
        )
    }

    fn write_real_field(&self, name: &str, grid: &Grid, f: &RealField) -> Result<(), Error> {
        let mut s = self.field_header(grid);
        for &v in f.values() {
            let _ = writeln!(s, "{}", fmt(v));
        }
        write_text(&self.dir.join(name), &s)
    }

    fn write_complex_field(&self, name: &str, grid: &Grid, f: &ComplexField) -> Result<(), Error> {
        let mut s = self.field_header(grid);
        for v in f.values() {
            let _ = writeln!(s, "{} {}", fmt(v.re), fmt(v.im));
        }
        write_text(&self.dir.join(name), &s)
    }
}

fn push_ground_state(art: &mut Artifacts, gs: &ground_state::GroundState) {
    art.push_f64("m", gs.energy);
    art.push_f64("gamma", gs.gamma);
    art.push_f64("mu", gs.mu);
    art.push_f64("residual", gs.residual);
    art.push("iterations", gs.iterations.to_string());
    art.push_f64("tau_final", gs.tau_final);
    art.push("halvings", gs.halvings.to_string());
    art.push_f64("f1", gs.values.f1);
    art.push_f64("f2", gs.values.f2);
    art.push_f64("f3", gs.values.f3);
    art.push_f64("f4", gs.values.f4);
}

/// Execute a validated run and write its artifacts. The summary is also
/// returned as text for display.
pub fn run(config: &RunConfig) -> Result<String, Error> {
    let grid = config.build_grid()?;
    let problem = Problem::new(&grid, config.model_params())?;
    let regime = classify_regime(config.dim, config.p, config.k);
    let mut art = Artifacts::new(config, regime.name())?;
    art.push("covered", if regime.is_covered() { "true" } else { "false" });

    match config.command {
        Command::GroundState => {
            let gs = ground_state::solve(&problem, &config.solver_options())?;
            push_ground_state(&mut art, &gs);
            let rows: Vec<Vec<f64>> =
                gs.log.iter().map(|r| vec![r.iteration as f64, r.energy, r.residual, r.gamma]).collect();
            art.write_series("iteration,energy,residual,gamma", &rows)?;
            art.write_real_field("field_u0.txt", &grid, &gs.u)?;
        }
        Command::Evolve => {
            let gs = ground_state::solve(&problem, &config.solver_options())?;
            push_ground_state(&mut art, &gs);
            let z0 = grid.to_complex(&gs.u);
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let (z, summary) = evolution::evolve(&problem, &z0, &config.evolve_options(), |t, z| {
                let cq = evolution::conserved_quantities(&problem, z);
                rows.push(vec![t, cq.mass, cq.energy]);
            })?;
            art.push_f64("T", config.t_final);
            art.push_f64("dt", config.dt);
            art.push("steps", summary.steps.to_string());
            art.push("substeps", summary.substeps.to_string());
            art.push("retries", summary.retries.to_string());
            art.push("max_sweeps_seen", summary.max_sweeps_seen.to_string());
            art.push_f64("mass_initial", summary.initial.mass);
            art.push_f64("mass_final", summary.final_state.mass);
            art.push_f64("energy_initial", summary.initial.energy);
            art.push_f64("energy_final", summary.final_state.energy);
            art.push_f64("mass_drift", summary.mass_drift);
            art.push_f64("energy_drift", summary.energy_drift);
            art.write_series("t,mass,energy", &rows)?;
            art.write_real_field("field_u0.txt", &grid, &gs.u)?;
            art.write_complex_field("field_z_final.txt", &grid, &z)?;
        }
        Command::Stability => {
            let sopts = StabilityOptions {
                perturbation: config.perturbation,
                t_final: config.t_final,
                dt: config.dt,
                sample_every: config.sample_every,
                picard_tol: config.picard_tol,
                verdict_factor: config.verdict_factor,
            };
            let (gs, report) = stability::stability_experiment(&problem, &config.solver_options(), &sopts)?;
            push_ground_state(&mut art, &gs);
            art.push_f64("delta", config.perturbation.delta);
            art.push("mode", config.perturbation.mode.name());
            if let PerturbationMode::Random { seed } = config.perturbation.mode {
                art.push("seed", seed.to_string());
            }
            art.push_f64("C", report.verdict_factor);
            art.push_f64("delta0", report.delta0);
            art.push_f64("max_distance", report.max_distance);
            art.push_f64("max_mass_dev", report.max_mass_dev);
            art.push_f64("max_energy_dev", report.max_energy_dev);
            art.push("stable", if report.stable { "true" } else { "false" });
            art.push("truncated", if report.truncated { "true" } else { "false" });
            art.push("verdict", report.verdict.clone());
            let rows: Vec<Vec<f64>> =
                report.series.iter().map(|s| vec![s.t, s.distance, s.mass, s.energy]).collect();
            art.write_series("t,distance,mass,energy", &rows)?;
            art.write_real_field("field_u0.txt", &grid, &gs.u)?;
        }
        Command::ScalingProbe => {
            // Constraint-projected Gaussian reference profile.
            let w2 = 2.0 * config.init_width * config.init_width;
            let raw = grid.sample(|x| (-x * x / w2).exp());
            let m = grid.integrate(&grid.real_field(raw.values().iter().map(|u| u * u).collect()));
            let s = (2.0 * config.lambda / m).sqrt();
            let psi = grid.real_field(raw.values().iter().map(|u| s * u).collect());
            let probe = ground_state::scaling_probe(&problem, &psi, &config.xis)?;
            art.push_f64("a", probe.a);
            art.push_f64("b", probe.b);
            art.push_f64("c", probe.c);
            let min_analytic = probe.samples.iter().fold(f64::INFINITY, |m, s| m.min(s.analytic));
            let max_abs_err =
                probe.samples.iter().fold(0.0f64, |m, s| m.max((s.numeric - s.analytic).abs()));
            art.push_f64("min_analytic", min_analytic);
            art.push_f64("max_abs_err", max_abs_err);
            match probe.first_negative_xi {
                Some(xi) => art.push("first_negative_xi", fmt(xi)),
                None => art.push("first_negative_xi", "none"),
            }
            art.push(
                "negative_level_certified",
                if probe.first_negative_xi.is_some() { "true" } else { "false" },
            );
            let rows: Vec<Vec<f64>> = probe
                .samples
                .iter()
                .map(|s| vec![s.xi, s.numeric, s.analytic, (s.numeric - s.analytic).abs()])
                .collect();
            art.write_series("xi,numeric,analytic,abs_err", &rows)?;
            art.write_real_field("field_psi.txt", &grid, &psi)?;
        }
    }

    art.write_summary()?;
    let mut text = String::new();
    for (k, v) in &art.summary {
        let _ = writeln!(text, "{k}={v}");
    }
    Ok(text)
}

const USAGE: &str = "usage: quasiwave <command> [--config <path>] [--key value ...]

commands:
  ground-state    constrained energy minimization on the configured grid
  evolve          propagate the ground state and track conserved quantities
  stability       perturb the ground state and record the orbit distance
  scaling-probe   scaling identity of the action on a reference profile

configuration is key=value lines; command-line flags override file values.
run `quasiwave <command>` with no config to use the built-in defaults.
";

/// Parse CLI arguments, execute, and return the summary text.
pub fn main_from_args(args: &[String]) -> Result<String, Error> {
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        return if args.is_empty() {
            Err(Error::config("command", format!("missing command\n{USAGE}")))
        } else {
            Ok(USAGE.to_string())
        };
    }
    let command = Command::parse(&args[0])?;
    let mut config_path: Option<String> = None;
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut i = 1;
    while i < args.len() {
        let flag = &args[i];
        let Some(key) = flag.strip_prefix("--") else {
            return Err(Error::config("args", format!("unexpected argument '{flag}'; flags look like --key value")));
        };
        let Some(value) = args.get(i + 1) else {
            return Err(Error::config(key, "flag is missing its value"));
        };
        if key == "config" {
            config_path = Some(value.clone());
        } else {
            overrides.push((key.to_string(), value.clone()));
        }
        i += 2;
    }
    let text = match &config_path {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read '{path}': {e}")))?,
        None => String::new(),
    };
    let config = parse_config(command, &text, &overrides)?;
    run(&config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU64, Ordering};

    static DIR_SEQ: AtomicU64 = AtomicU64::new(0);

    fn scratch_dir() -> PathBuf {
        let id = DIR_SEQ.fetch_add(1, Ordering::SeqCst);
        let dir = std::env::temp_dir().join(format!("quasiwave_test_{}_{id}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn minimal_config_is_valid_and_stable_regime() {
        let text = "p=4\nk=1\ntheta=1\nlambda=0.5\nN=1\n";
        let cfg = parse_config(Command::GroundState, text, &[]).unwrap();
        assert_eq!(cfg.dim, 1);
        assert_eq!(cfg.grid_kind, GridKind::Line);
        assert_eq!(classify_regime(cfg.dim, cfg.p, cfg.k).name(), "stable-1d");
    }

    #[test]
    fn rejects_subcritical_exponent_by_key() {
        let err = parse_config(Command::GroundState, "p=1.5\n", &[]).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "p"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_kind_mismatch_and_unknown_keys() {
        let err = parse_config(Command::GroundState, "N=2\ngrid=line\npotential=harmonic\n", &[]).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "grid"),
            other => panic!("{other:?}"),
        }
        let err = parse_config(Command::GroundState, "quux=1\n", &[]).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "quux"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_beat_file_values_and_comments_are_ignored() {
        let text = "# baseline\np=4   # quartic\nlambda=0.5\n\n";
        let cfg = parse_config(Command::GroundState, text, &ov(&[("p", "3"), ("theta", "2.5")])).unwrap();
        assert_eq!(cfg.p, 3.0);
        assert_eq!(cfg.theta, 2.5);
        assert_eq!(cfg.lambda, 0.5);
    }

    #[test]
    fn hash_tracks_effective_values() {
        let a = parse_config(Command::GroundState, "", &[]).unwrap();
        let b = parse_config(Command::GroundState, "p=4\n", &[]).unwrap();
        let c = parse_config(Command::GroundState, "p=3\n", &[]).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 16);
        // The output directory names where artifacts land, not what they are.
        let d = parse_config(Command::GroundState, "out=elsewhere\n", &[]).unwrap();
        assert_eq!(a.config_hash(), d.config_hash());
        assert_ne!(a.effective_text(), d.effective_text());
    }

    #[test]
    fn incommensurate_horizon_is_a_config_error() {
        let err = parse_config(Command::Evolve, "T=1\ndt=0.3\n", &[]).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "T"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scaling_probe_requires_line_geometry() {
        let err = parse_config(Command::ScalingProbe, "N=2\npotential=harmonic\n", &[]).unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "command"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ground_state_run_writes_coherent_artifacts() {
        let dir = scratch_dir();
        let overrides = ov(&[
            ("n", "201"),
            ("L", "10"),
            ("eps_residual", "1e-5"),
            ("tau", "1e-3"),
            ("out", dir.to_str().unwrap()),
        ]);
        let cfg = parse_config(Command::GroundState, "", &overrides).unwrap();
        let summary = run(&cfg).unwrap();
        assert!(summary.contains("regime=stable-1d"));
        let summary_file = std::fs::read_to_string(dir.join("summary.txt")).unwrap();
        assert_eq!(summary, summary_file);
        let m: f64 = summary_file
            .lines()
            .find_map(|l| l.strip_prefix("m="))
            .unwrap()
            .parse()
            .unwrap();
        assert!(m < 0.0);
        let series = std::fs::read_to_string(dir.join("series.csv")).unwrap();
        assert!(series.starts_with("# regime=stable-1d config="));
        assert!(series.lines().nth(1).unwrap().starts_with("iteration,energy,residual,gamma"));
        let field = std::fs::read_to_string(dir.join("field_u0.txt")).unwrap();
        assert_eq!(field.lines().filter(|l| !l.starts_with('#')).count(), 201);
        assert!(dir.join("config_effective.txt").exists());

        // Reruns are byte-identical.
        let dir2 = scratch_dir();
        let mut overrides2 = overrides.clone();
        for pair in overrides2.iter_mut() {
            if pair.0 == "out" {
                pair.1 = dir2.to_str().unwrap().to_string();
            }
        }
        let cfg2 = parse_config(Command::GroundState, "", &overrides2).unwrap();
        run(&cfg2).unwrap();
        let series2 = std::fs::read_to_string(dir2.join("series.csv")).unwrap();
        assert_eq!(series, series2);
        std::fs::remove_dir_all(&dir).ok();
        std::fs::remove_dir_all(&dir2).ok();
    }

    #[test]
    fn scaling_probe_run_reports_negative_certificate() {
        let dir = scratch_dir();
        let overrides = ov(&[("n", "1001"), ("out", dir.to_str().unwrap())]);
        let cfg = parse_config(Command::ScalingProbe, "", &overrides).unwrap();
        let summary = run(&cfg).unwrap();
        assert!(summary.contains("negative_level_certified=true"));
        let series = std::fs::read_to_string(dir.join("series.csv")).unwrap();
        assert!(series.lines().nth(1).unwrap().starts_with("xi,numeric,analytic,abs_err"));
        // xi rows: header stamp + csv header + 5 defaults.
        assert_eq!(series.lines().count(), 7);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn cli_args_route_to_the_runner() {
        let dir = scratch_dir();
        let cfg_file = dir.join("run.cfg");
        std::fs::write(&cfg_file, "n=201\nL=10\neps_residual=1e-4\ntau=1e-3\n").unwrap();
        let args: Vec<String> = [
            "ground-state",
            "--config",
            cfg_file.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let summary = main_from_args(&args).unwrap();
        assert!(summary.contains("command=ground-state"));
        assert!(dir.join("summary.txt").exists());
        std::fs::remove_dir_all(&dir).ok();

        assert!(matches!(
            main_from_args(&["ground-state".into(), "--config".into(), "/definitely/missing.cfg".into()]),
            Err(Error::Config { .. })
        ));
        assert!(main_from_args(&[]).is_err());
        assert!(main_from_args(&["--help".into()]).unwrap().contains("usage"));
    }
}
