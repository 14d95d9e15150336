//! Scenario runners behind the command line verbs: two-pixel sweeps,
//! 1D bound sweeps, unitary optimization, image reconstruction and the
//! self-check suite. Each runner writes CSV artifacts plus a manifest with
//! checksums so identical inputs reproduce byte-identical outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export;
use crate::fisher::{self, qfi_matrix};
use crate::inference::{mle_estimate, LikelihoodModel, MleOptions};
use crate::optim::{self, CgOptions, CgOutcome};
use crate::povm::{self, ScalarCcrbCost, UnitaryPoint};
use crate::scenario::{ScenarioConfig, Temperatures};
use crate::scene::CoherenceMatrix;

/// Record of one command invocation, written as `manifest.json` next to the
/// outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: Option<String>,
    pub command: String,
    pub seed: u64,
    pub out_dir: String,
    pub tool_version: String,
    pub wall_clock_s: f64,
    /// Output file name → SHA-256 of its bytes.
    pub outputs: BTreeMap<String, String>,
}

/// Collects output files under one directory and checksums them for the
/// manifest.
pub struct OutputWriter {
    dir: PathBuf,
    outputs: BTreeMap<String, String>,
}

impl OutputWriter {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            outputs: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.outputs
            .insert(name.to_string(), export::sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn finish(
        self,
        scenario: Option<&Path>,
        command: &str,
        seed: u64,
        started: Instant,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            scenario: scenario.map(|p| p.display().to_string()),
            command: command.to_string(),
            seed,
            out_dir: self.dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s: started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(manifest)
    }
}

/// A one-dimensional evaluation grid, parsed from either `start:stop:count`
/// or a comma-separated list of values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub values: Vec<f64>,
}

impl GridSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Config(format!("grid {text:?}: {msg}"));
        if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("expected start:stop:count"));
            }
            let start: f64 = parts[0].trim().parse().map_err(|_| bad("bad start"))?;
            let stop: f64 = parts[1].trim().parse().map_err(|_| bad("bad stop"))?;
            let count: usize = parts[2].trim().parse().map_err(|_| bad("bad count"))?;
            if count < 2 || !start.is_finite() || !stop.is_finite() {
                return Err(bad("need at least 2 finite grid points"));
            }
            let step = (stop - start) / (count - 1) as f64;
            Ok(Self {
                values: (0..count).map(|i| start + step * i as f64).collect(),
            })
        } else {
            let values: Vec<f64> = text
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<_>>()?;
            if values.is_empty() {
                return Err(bad("empty grid"));
            }
            Ok(Self { values })
        }
    }

    pub fn linear(start: f64, stop: f64, count: usize) -> Self {
        let step = (stop - start) / (count - 1) as f64;
        Self {
            values: (0..count).map(|i| start + step * i as f64).collect(),
        }
    }
}

/// Conjugate gradient budget scaled to the mode count: per-iteration cost
/// grows with the array size, so large arrays get a smaller budget.
pub fn cg_options_for(n: usize, seed: u64) -> CgOptions {
    let max_iters = if n <= 4 {
        400
    } else if n <= 10 {
        300
    } else {
        200
    };
    CgOptions {
        max_iters,
        seed,
        ..CgOptions::default()
    }
}

/// Scalar quantum bound `Tr(𝓕_Q⁻¹)` of a scene.
pub fn scalar_qcrb(coh: &CoherenceMatrix) -> Result<f64> {
    qfi_matrix(&fisher::covariance_from_coherence(coh))?.scalar_bound(None)
}

/// Minimizes the scalar classical bound over detection unitaries, optionally
/// warm-started.
pub fn optimize_ccrb(
    coh: &CoherenceMatrix,
    opts: &CgOptions,
    warm_start: Option<&DMatrix<Complex64>>,
) -> Result<CgOutcome> {
    let cost = ScalarCcrbCost::new(coh.clone(), None);
    match warm_start {
        Some(u0) => optim::minimize_from(&cost, u0.clone(), opts),
        None => optim::minimize(&cost, opts),
    }
}

fn fmt_bound(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.17e}")
    } else {
        "inf".to_string()
    }
}

/// Summary of a two-pixel sweep, returned for programmatic checks.
#[derive(Debug, Clone, Serialize)]
pub struct TwoPixelSummary {
    /// `φ` minimizing the classical bound on the grid.
    pub argmin_phi: f64,
    pub min_ccrb: f64,
    pub qcrb: f64,
    /// Gain factor of the classical Fisher matrix at the optimum.
    pub gain_at_min: f64,
    /// Local-measurement (`U = I`) bound divided by the optimized bound at
    /// temperature difference 10 K.
    pub penalty_ratio_10k: f64,
}

/// φ-sweep of the two-mode mixing family plus the local-measurement penalty
/// versus temperature difference. Writes `phi_sweep.csv` and
/// `local_penalty.csv`.
pub fn cmd_two_pixel_sweep(
    cfg: &ScenarioConfig,
    grid: &GridSpec,
    out: &mut OutputWriter,
) -> Result<TwoPixelSummary> {
    if cfg.num_pixels() != 2 || cfg.num_modes() != 2 {
        return Err(Error::Config(format!(
            "two-pixel sweep needs p = n = 2, got p = {}, n = {}",
            cfg.num_pixels(),
            cfg.num_modes()
        )));
    }
    let coh = cfg.coherence()?;
    let temps = cfg.temperature_map()?;
    let t_bar = temps.mean();
    let qcrb = scalar_qcrb(&coh)?;

    let mut csv = String::from("phi,cfi_11,cfi_22,ccrb,ccrb_scaled,qcrb,qcrb_scaled,gain\n");
    let mut argmin_phi = f64::NAN;
    let mut min_ccrb = f64::INFINITY;
    let mut gain_at_min = f64::NAN;
    for &phi in &grid.values {
        let u = UnitaryPoint::two_mode(phi);
        let tilde = povm::detection_coherence(&coh, &u)?;
        let dist = povm::outcome_distribution(&tilde)?;
        let cfi = povm::cfi_matrix(&dist)?;
        let (ccrb, gain) = match cfi.scalar_bound(None) {
            Ok(b) => (b, cfi.gain_factor()?),
            Err(Error::Unidentifiable { .. }) => (f64::INFINITY, f64::NAN),
            Err(e) => return Err(e),
        };
        if ccrb < min_ccrb {
            min_ccrb = ccrb;
            argmin_phi = phi;
            gain_at_min = gain;
        }
        let _ = writeln!(
            csv,
            "{phi:.17e},{:.17e},{:.17e},{},{},{:.17e},{:.17e},{}",
            cfi.matrix()[(0, 0)],
            cfi.matrix()[(1, 1)],
            fmt_bound(ccrb),
            fmt_bound(ccrb / (t_bar * t_bar)),
            qcrb,
            qcrb / (t_bar * t_bar),
            fmt_bound(gain),
        );
    }
    out.write("phi_sweep.csv", &csv)?;

    // local-measurement penalty versus temperature contrast
    let mut penalty = String::from("delta_t,ccrb_identity,ccrb_optimized,ratio\n");
    let mut penalty_ratio_10k = f64::NAN;
    for &dt in &[0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
        let mut cfg_dt = cfg.clone();
        cfg_dt.temperatures_k = Temperatures::PerPixel(vec![t_bar + dt / 2.0, t_bar - dt / 2.0]);
        let coh_dt = cfg_dt.coherence()?;
        let identity = match povm::scalar_ccrb(&coh_dt, &UnitaryPoint::identity(2), None) {
            Ok(b) => b,
            Err(Error::Unidentifiable { .. }) | Err(Error::Numerical(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let mut best = f64::INFINITY;
        for &phi in &grid.values {
            match povm::scalar_ccrb(&coh_dt, &UnitaryPoint::two_mode(phi), None) {
                Ok(b) if b < best => best = b,
                Ok(_) | Err(Error::Unidentifiable { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let ratio = identity / best;
        if dt == 10.0 {
            penalty_ratio_10k = ratio;
        }
        let _ = writeln!(
            penalty,
            "{dt:.17e},{},{},{}",
            fmt_bound(identity),
            fmt_bound(best),
            fmt_bound(ratio)
        );
    }
    out.write("local_penalty.csv", &penalty)?;

    Ok(TwoPixelSummary {
        argmin_phi,
        min_ccrb,
        qcrb,
        gain_at_min,
        penalty_ratio_10k,
    })
}

/// Which scenario field a bound sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Mu,
    PixelSize,
    PixelCount,
}

impl SweepVar {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "mu" => Ok(Self::Mu),
            "a" => Ok(Self::PixelSize),
            "p" => Ok(Self::PixelCount),
            other => Err(Error::Config(format!(
                "unknown sweep variable {other:?}; expected mu, a or p"
            ))),
        }
    }
}

/// One row of a bound sweep.
#[derive(Debug, Clone, Serialize)]
pub struct BoundSweepRow {
    pub value: f64,
    pub qcrb: f64,
    pub ccrb_image_opt: f64,
    pub ccrb_uniform_opt: f64,
    pub ccrb_initial: f64,
    pub trace_gamma: f64,
    pub stalled: bool,
}

fn apply_sweep_value(cfg: &ScenarioConfig, var: SweepVar, value: f64) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    match var {
        SweepVar::Mu => out.mu = value,
        SweepVar::PixelSize => out.pixel_size_m = value,
        SweepVar::PixelCount => {
            let p = value.round() as usize;
            if p == 0 || (value - p as f64).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "pixel-count sweep values must be positive integers, got {value}"
                )));
            }
            if out.py != 1 || out.ny != 1 {
                return Err(Error::Config("pixel-count sweep needs a 1D scenario".into()));
            }
            out.px = p;
            out.nx = p;
            if let Temperatures::PerPixel(_) = out.temperatures_k {
                return Err(Error::Config(
                    "pixel-count sweep needs a uniform temperature scene".into(),
                ));
            }
        }
    }
    Ok(out)
}

/// Sweeps one scenario variable, recording the quantum bound and classical
/// bounds under freshly optimized, uniform-optimized and random unitaries.
/// Bounds are scaled by `1/(T̄² N)`. Writes `bound_sweep.csv`.
pub fn cmd_bound_sweep(
    cfg: &ScenarioConfig,
    var: SweepVar,
    grid: &GridSpec,
    seed: u64,
    samples: u64,
    out: &mut OutputWriter,
) -> Result<Vec<BoundSweepRow>> {
    if cfg.py != 1 || cfg.ny != 1 {
        return Err(Error::Config("bound sweep needs a 1D scenario".into()));
    }
    let n_shots = samples.max(1) as f64;
    let mut rows = Vec::with_capacity(grid.values.len());
    for (idx, &value) in grid.values.iter().enumerate() {
        let cfg_v = apply_sweep_value(cfg, var, value)?;
        let coh = cfg_v.coherence()?;
        let t_bar = cfg_v.temperature_map()?.mean();
        let scale = 1.0 / (t_bar * t_bar * n_shots);
        let n = coh.num_modes();
        let qcrb = scalar_qcrb(&coh)? * scale;
        let trace_gamma = coh.trace();

        let row_seed = seed.wrapping_add(idx as u64);
        let u_init = optim::random_unitary(n, row_seed);
        let ccrb_initial = povm::scalar_ccrb(&coh, &UnitaryPoint::new(u_init.clone())?, None)
            .map(|b| b * scale)
            .unwrap_or(f64::INFINITY);

        // optimize at the uniform mean image, then warm-start the
        // image-specific optimization from that unitary
        let uniform_coh = {
            let mut cfg_u = cfg_v.clone();
            cfg_u.temperatures_k = Temperatures::Uniform(t_bar);
            cfg_u.coherence()?
        };
        let opts = cg_options_for(n, row_seed);
        let mut stalled = false;
        let (ccrb_uniform_opt, ccrb_image_opt) =
            match optimize_ccrb(&uniform_coh, &opts, Some(&u_init)) {
                Ok(unif) => {
                    stalled |= unif.stalled;
                    let at_uniform_u =
                        povm::scalar_ccrb(&coh, &UnitaryPoint::new_unchecked(unif.u.clone()), None)?
                            * scale;
                    match optimize_ccrb(&coh, &opts, Some(&unif.u)) {
                        Ok(img) => {
                            stalled |= img.stalled;
                            (at_uniform_u, img.cost * scale)
                        }
                        Err(Error::LineSearchStall(_)) => {
                            stalled = true;
                            (at_uniform_u, f64::NAN)
                        }
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::LineSearchStall(_)) => {
                    stalled = true;
                    (f64::NAN, f64::NAN)
                }
                Err(e) => return Err(e),
            };

        rows.push(BoundSweepRow {
            value,
            qcrb,
            ccrb_image_opt,
            ccrb_uniform_opt,
            ccrb_initial,
            trace_gamma,
            stalled,
        });
    }

    let mut csv = String::from(
        "value,qcrb,ccrb_image_opt,ccrb_uniform_opt,ccrb_initial,trace_gamma,status\n",
    );
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:.17e},{},{},{},{},{:.17e},{}",
            r.value,
            fmt_bound(r.qcrb),
            fmt_bound(r.ccrb_image_opt),
            fmt_bound(r.ccrb_uniform_opt),
            fmt_bound(r.ccrb_initial),
            r.trace_gamma,
            if r.stalled { "stalled" } else { "ok" },
        );
    }
    out.write("bound_sweep.csv", &csv)?;
    Ok(rows)
}

/// Result summary of a unitary optimization run.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeSummary {
    pub final_ccrb: f64,
    pub qcrb: f64,
    pub ratio: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stalled: bool,
}

/// Optimizes the detection unitary for the scenario's image and writes
/// `unitary.csv`, `cost_trace.csv` and `optimize_summary.json`.
pub fn cmd_optimize_unitary(
    cfg: &ScenarioConfig,
    seed: u64,
    out: &mut OutputWriter,
) -> Result<OptimizeSummary> {
    let coh = cfg.coherence()?;
    let n = coh.num_modes();
    let outcome = optimize_ccrb(&coh, &cg_options_for(n, seed), None)?;
    let qcrb = scalar_qcrb(&coh)?;
    let summary = OptimizeSummary {
        final_ccrb: outcome.cost,
        qcrb,
        ratio: outcome.cost / qcrb,
        iterations: outcome.iterations,
        converged: outcome.converged,
        stalled: outcome.stalled,
    };
    out.write("unitary.csv", &export::complex_matrix_csv(&outcome.u))?;
    let mut trace = String::from("iteration,ccrb\n");
    for (i, c) in outcome.trace.iter().enumerate() {
        let _ = writeln!(trace, "{i},{c:.17e}");
    }
    out.write("cost_trace.csv", &trace)?;
    out.write(
        "optimize_summary.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

/// How the reconstruction unitary is chosen.
#[derive(Debug, Clone)]
pub enum UnitarySelector {
    Identity,
    UniformOptimal,
    ImageOptimal,
    File(PathBuf),
}

impl UnitarySelector {
    pub fn parse(text: &str) -> Self {
        match text {
            "identity" => Self::Identity,
            "uniform-optimal" => Self::UniformOptimal,
            "image-optimal" => Self::ImageOptimal,
            other => Self::File(PathBuf::from(other)),
        }
    }
}

/// Resolves a [`UnitarySelector`] to a concrete detection unitary.
pub fn resolve_unitary(
    cfg: &ScenarioConfig,
    sel: &UnitarySelector,
    seed: u64,
) -> Result<UnitaryPoint> {
    let n = cfg.num_modes();
    match sel {
        UnitarySelector::Identity => Ok(UnitaryPoint::identity(n)),
        UnitarySelector::File(path) => {
            let u = export::read_unitary(path)?;
            if u.nrows() != n {
                return Err(Error::Config(format!(
                    "unitary file is {}×{}, scenario has n = {n}",
                    u.nrows(),
                    u.ncols()
                )));
            }
            UnitaryPoint::new(u)
        }
        UnitarySelector::UniformOptimal => {
            let unif = uniform_optimal(cfg, seed)?;
            UnitaryPoint::new(unif.u)
        }
        UnitarySelector::ImageOptimal => {
            // warm start from the uniform optimum so the image-specific
            // bound can only improve on it
            let unif = uniform_optimal(cfg, seed)?;
            let coh = cfg.coherence()?;
            let img = optimize_ccrb(&coh, &cg_options_for(n, seed), Some(&unif.u))?;
            UnitaryPoint::new(img.u)
        }
    }
}

fn uniform_optimal(cfg: &ScenarioConfig, seed: u64) -> Result<CgOutcome> {
    let t_bar = cfg.temperature_map()?.mean();
    let mut cfg_u = cfg.clone();
    cfg_u.temperatures_k = Temperatures::Uniform(t_bar);
    optimize_ccrb(&cfg_u.coherence()?, &cg_options_for(cfg.num_modes(), seed), None)
}

/// Reconstruction metrics over all replications.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructSummary {
    pub rmse: Vec<f64>,
    pub median_rmse: f64,
    pub samples: u64,
    pub replications: usize,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Per-replication seed, decorrelated from neighbouring seeds.
pub fn replication_seed(seed: u64, rep: usize) -> u64 {
    // splitmix64 step
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(rep as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Samples photon counts under the selected unitary and reconstructs the
/// temperature image by maximum likelihood, over `reps` replications. Writes
/// `reconstruction.csv` (first replication), `pixel_errors.csv` and
/// `reconstruct_metrics.json`.
pub fn cmd_reconstruct(
    cfg: &ScenarioConfig,
    sel: &UnitarySelector,
    samples: u64,
    seed: u64,
    reps: usize,
    full: bool,
    out: &mut OutputWriter,
) -> Result<ReconstructSummary> {
    if reps == 0 || samples == 0 {
        return Err(Error::Config("need samples ≥ 1 and reps ≥ 1".into()));
    }
    // paper-scale runs (10⁸ shots on 30 modes) take hours; require the
    // explicit opt-in flag
    if samples > 20_000_000 && !full {
        return Err(Error::Config(format!(
            "{samples} samples exceeds the desk-scale budget; pass --full to run anyway"
        )));
    }
    let coh = cfg.coherence()?;
    let truth = cfg.temperature_map()?;
    let u = resolve_unitary(cfg, sel, seed)?;
    let model = LikelihoodModel::new(&coh, &u)?;
    let dist = model.distribution(truth.values())?;

    let mle_opts = MleOptions {
        seed,
        ..MleOptions::default()
    };
    let fits: Vec<Result<Vec<f64>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rec = crate::inference::sample_outcomes(&dist, samples, replication_seed(seed, rep))?;
            Ok(mle_estimate(&model, &rec, &mle_opts)?.temperatures)
        })
        .collect();

    let p = truth.len();
    let mut rmse = Vec::with_capacity(reps);
    let mut first_image: Option<Vec<f64>> = None;
    for fit in fits {
        let temps = fit?;
        let sq: f64 = temps
            .iter()
            .zip(truth.values())
            .map(|(e, t)| (e - t) * (e - t))
            .sum();
        rmse.push((sq / p as f64).sqrt());
        if first_image.is_none() {
            first_image = Some(temps);
        }
    }
    let image = first_image.expect("reps >= 1");
    out.write("reconstruction.csv", &export::real_grid_csv(&image, cfg.px))?;
    let errors: Vec<f64> = image
        .iter()
        .zip(truth.values())
        .map(|(e, t)| e - t)
        .collect();
    out.write("pixel_errors.csv", &export::real_grid_csv(&errors, cfg.px))?;
    let summary = ReconstructSummary {
        median_rmse: median(&rmse),
        rmse,
        samples,
        replications: reps,
    };
    out.write(
        "reconstruct_metrics.json",
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

/// Consistency checks over the given scenario: probability normalization,
/// derivative closure, finite-difference agreement and the quantum/classical
/// bound ordering. Returns the list of check names on success.
pub fn cmd_check(cfg: &ScenarioConfig, seed: u64) -> Result<Vec<String>> {
    let coh = cfg.coherence()?;
    let n = coh.num_modes();
    let mut passed = Vec::new();
    let fail = |name: &str, detail: String| -> Error {
        Error::Numerical(format!("check {name} failed: {detail}"))
    };

    for trial in 0..4u64 {
        let u = if trial == 0 {
            UnitaryPoint::identity(n)
        } else {
            UnitaryPoint::new(optim::random_unitary(n, seed.wrapping_add(trial)))?
        };
        let tilde = povm::detection_coherence(&coh, &u)?;
        let dist = povm::outcome_distribution(&tilde)?;
        let norm: f64 = dist.probs.iter().sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(fail("normalization", format!("Σ P = {norm}")));
        }
        for i in 0..dist.num_params() {
            let col: f64 = (0..dist.num_outcomes()).map(|l| dist.dprobs[(l, i)]).sum();
            if col.abs() > 1e-12 {
                return Err(fail("derivative-closure", format!("column {i} sums to {col}")));
            }
        }
        // central FD against the analytic derivatives; the parameters are
        // temperatures of order 100 K, so a kelvin-scale step keeps the
        // difference well above roundoff
        let h = 1e-2;
        for i in 0..coh.num_params() {
            let probe = |s: f64| -> Result<Vec<f64>> {
                let g = tilde.gamma() + &tilde.dgamma()[i] * Complex64::new(s * h, 0.0);
                povm::outcome_probabilities(&g)
            };
            let (plus, minus) = (probe(1.0)?, probe(-1.0)?);
            let fds: Vec<f64> = (0..dist.num_outcomes())
                .map(|l| (plus[l] - minus[l]) / (2.0 * h))
                .collect();
            // scale by the largest derivative of this parameter: roundoff on
            // near-zero entries would otherwise dominate the relative error
            let scale = fds.iter().fold(1e-8f64, |m, f| m.max(f.abs()));
            for (l, fd) in fds.iter().enumerate() {
                let diff = (dist.dprobs[(l, i)] - fd).abs();
                if diff > 1e-5 * scale {
                    return Err(fail(
                        "finite-difference",
                        format!("outcome {l}, parameter {i}: {} vs {fd}", dist.dprobs[(l, i)]),
                    ));
                }
            }
        }
    }
    passed.push("normalization".to_string());
    passed.push("derivative-closure".to_string());
    passed.push("finite-difference".to_string());

    let qcrb = scalar_qcrb(&coh)?;
    for trial in 0..4u64 {
        let u = UnitaryPoint::new(optim::random_unitary(n, seed.wrapping_add(10 + trial)))?;
        match povm::scalar_ccrb(&coh, &u, None) {
            Ok(ccrb) => {
                if ccrb < qcrb * (1.0 - 1e-9) {
                    return Err(fail("bound-ordering", format!("CCRB {ccrb} < QCRB {qcrb}")));
                }
            }
            Err(Error::Unidentifiable { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    passed.push("bound-ordering".to_string());

    let qfi = qfi_matrix(&fisher::covariance_from_coherence(&coh))?;
    let eigs = nalgebra::SymmetricEigen::new(qfi.matrix().clone()).eigenvalues;
    let max_eig = eigs.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    if eigs.iter().any(|&e| e < -1e-10 * max_eig) {
        return Err(fail("qfi-psd", format!("negative eigenvalue in {eigs:?}")));
    }
    passed.push("qfi-psd".to_string());
    Ok(passed)
}
