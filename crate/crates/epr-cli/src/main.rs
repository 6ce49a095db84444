//! `epr` — ground-energy analyses of sparse state-graph models.
//!
//! Subcommands:
//!
//! * `exact`     — deterministic ground energy/gap of the full model or of
//!                 one side of the cavity/reservoir partition;
//! * `epr`       — trajectory-functional estimates: the propagator sum at a
//!                 single time, or the ground energy from a decay fit;
//! * `partition` — the full cavity/reservoir report: side energies, weights,
//!                 boundary couplings, phase and the finite-size prediction;
//! * `rpm`       — analytic multi-level landscape predictions (no model);
//! * `scan`      — sweep one family parameter into a CSV table + JSON sidecar;
//! * `exit`      — first-exit sampling against the absorbing-wall exit rate;
//! * `lemma`     — the exit-time integral identity, Monte Carlo vs quadrature.
//!
//! Every report embeds a format version, the exact invocation, and the build
//! id; nothing embeds a timestamp, so rerunning a command reproduces its
//! output byte for byte.

mod model;
mod report;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use epr_core::spectral::DENSE_GATE;
use epr_core::{
    coupling_report_from, estimate_ground_energy, estimate_propagator_sum, exit_rate_hamiltonian,
    check_exit_lemma, critical_condition, finite_size_prediction, ground_state, is_critical,
    partition_grounds, predict_phase_dilute, sample_first_exit, solve_e1f, subspace_ground,
    theorem_prediction, two_level_closed_form, EprEstimate, FirstExit, RpmSpec,
};
use model::{
    build_model, default_start, mc_seed, parse_levels, parse_mode, resolve_partition, BuiltModel,
    ModelArgs,
};
use report::{cell, finite, write_json, Csv, RunConfig};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "epr",
    version = report::BUILD,
    about = "Ground-energy analyses of sparse state-graph models: exact solvers, \
             trajectory estimators and analytic predictions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact ground energy and gap of the full model or one partition side.
    Exact(ExactCmd),
    /// Trajectory-functional estimates at one time or over a decay grid.
    Epr(EprCmd),
    /// Cavity/reservoir report: energies, weights, couplings, phase.
    Partition(PartitionCmd),
    /// Analytic multi-level landscape predictions.
    Rpm(RpmCmd),
    /// Sweep one family parameter into a CSV table (+ JSON sidecar).
    Scan(ScanCmd),
    /// First-exit statistics from the cavity vs the absorbing-wall rate.
    Exit(ExitCmd),
    /// Exit-time integral identity: Monte Carlo against quadrature.
    Lemma(LemmaCmd),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Exact(cmd) => run_exact(cmd),
        Command::Epr(cmd) => run_epr(cmd),
        Command::Partition(cmd) => run_partition(cmd),
        Command::Rpm(cmd) => run_rpm(cmd),
        Command::Scan(cmd) => run_scan(cmd),
        Command::Exit(cmd) => run_exit(cmd),
        Command::Lemma(cmd) => run_lemma(cmd),
    }
}

fn base_config(command: &str, m: &ModelArgs) -> RunConfig {
    RunConfig {
        command: command.to_string(),
        model_file: m.model.as_ref().map(|p| p.display().to_string()),
        family: m.family.clone(),
        n_bits: m.n_bits,
        gamma: Some(m.gamma),
        v1: Some(m.v1),
        v2: Some(m.v2),
        p1: m.p1,
        levels: m.levels.clone(),
        j: Some(m.j),
        seed: Some(m.seed),
        cavity: m.cavity.clone(),
        ..RunConfig::default()
    }
}

fn describe(built: &BuiltModel) -> String {
    let h = &built.h;
    let label = built.label.as_deref().unwrap_or("(unlabeled)");
    format!("{label} — M={}, N={}", h.dim(), h.size_scale())
}

fn solver_label(states: usize) -> &'static str {
    if states <= DENSE_GATE {
        "dense"
    } else {
        "iterative"
    }
}

// ---------------------------------------------------------------------------
// exact
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Subspace {
    Full,
    Cavity,
    Reservoir,
}

impl Subspace {
    fn name(self) -> &'static str {
        match self {
            Subspace::Full => "full",
            Subspace::Cavity => "cavity",
            Subspace::Reservoir => "reservoir",
        }
    }
}

#[derive(Args)]
struct ExactCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Which block to diagonalize.
    #[arg(long, value_enum, default_value_t = Subspace::Full)]
    subspace: Subspace,
    /// Relative residual tolerance for the eigensolver.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ExactResult {
    subspace: &'static str,
    states: usize,
    solver: &'static str,
    energy: f64,
    energy_density: f64,
    gap_energy: Option<f64>,
    residual: f64,
}

fn run_exact(cmd: ExactCmd) -> Result<()> {
    let built = build_model(&cmd.model)?;
    let h = &built.h;
    let n = h.size_scale();
    let (states, energy, gap, residual) = match cmd.subspace {
        Subspace::Full => {
            let g = ground_state(h, cmd.tol, None)?;
            (h.dim(), g.energy, g.gap_energy, g.residual)
        }
        Subspace::Cavity | Subspace::Reservoir => {
            let part = resolve_partition(h, &built, &cmd.model)?;
            let ids = if cmd.subspace == Subspace::Cavity {
                part.cavity()
            } else {
                part.reservoir()
            };
            let g = subspace_ground(h, ids, cmd.tol, None)?;
            (g.ids.len(), g.energy, g.gap_energy, g.residual)
        }
    };
    let result = ExactResult {
        subspace: cmd.subspace.name(),
        states,
        solver: solver_label(states),
        energy,
        energy_density: energy / n,
        gap_energy: finite(gap),
        residual,
    };
    println!("model: {}", describe(&built));
    println!("subspace: {} ({} states, {} solver)", result.subspace, states, result.solver);
    println!("energy = {:.12} (density {:.12})", result.energy, result.energy_density);
    match result.gap_energy {
        Some(g) => println!("gap energy = {g:.12}"),
        None => println!("gap energy = (none: single state)"),
    }
    println!("residual = {:.3e}", result.residual);
    if let Some(path) = &cmd.out {
        let mut config = base_config("exact", &cmd.model);
        config.subspace = Some(result.subspace.to_string());
        config.tol = cmd.tol;
        config.out = Some(path.display().to_string());
        write_json(path, &config, &result)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// epr
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EprCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Single horizon: estimate the propagator sum at this time.
    #[arg(long, conflicts_with = "t_grid")]
    t: Option<f64>,
    /// Ascending time grid "t1,t2,…" for the decay-rate fit.
    #[arg(long = "t-grid", value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    /// Trajectories per time point.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Contiguous worker blocks (the estimate is independent of the count).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Sampler: link-rate | uniform | uniform:RHO.
    #[arg(long, default_value = "link-rate")]
    mode: String,
    /// Start state (default: the deepest potential entry).
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PointResult {
    t: f64,
    mean: f64,
    std_error: f64,
    log_abs_mean: f64,
    mean_sign: f64,
}

impl PointResult {
    fn from(est: &EprEstimate) -> Self {
        Self {
            t: est.t,
            mean: est.mean(),
            std_error: est.std_error(),
            log_abs_mean: est.log_abs_mean,
            mean_sign: est.mean_sign,
        }
    }
}

#[derive(Serialize)]
struct EprSumResult {
    start: usize,
    mode: String,
    samples: u64,
    point: PointResult,
}

#[derive(Serialize)]
struct EprFitResult {
    start: usize,
    mode: String,
    samples_per_point: u64,
    energy: f64,
    std_error: f64,
    energy_density: f64,
    curvature_warning: bool,
    points: Vec<PointResult>,
}

fn run_epr(cmd: EprCmd) -> Result<()> {
    let built = build_model(&cmd.model)?;
    let h = &built.h;
    if cmd.workers == 0 {
        bail!("--workers must be at least 1");
    }
    if cmd.samples == 0 {
        bail!("--samples must be at least 1");
    }
    let mode = parse_mode(&cmd.mode, h)?;
    let start = cmd.start.unwrap_or_else(|| default_start(h));
    if start >= h.dim() {
        bail!("start state {start} out of range (M = {})", h.dim());
    }
    let seed = mc_seed(cmd.model.seed);
    println!("model: {}", describe(&built));
    println!("start = {start}, mode = {}, samples = {}", cmd.mode, cmd.samples);

    let mut config = base_config("epr", &cmd.model);
    config.mode = Some(cmd.mode.clone());
    config.start = Some(start);
    config.samples = Some(cmd.samples);
    config.workers = Some(cmd.workers);
    config.out = cmd.out.as_ref().map(|p| p.display().to_string());

    if let Some(t) = cmd.t {
        if !(t > 0.0) {
            bail!("--t must be positive");
        }
        let est = estimate_propagator_sum(h, start, t, cmd.samples, seed, cmd.workers, mode);
        let result = EprSumResult {
            start,
            mode: cmd.mode.clone(),
            samples: cmd.samples,
            point: PointResult::from(&est),
        };
        println!(
            "propagator sum at t={t}: {:.6e} ± {:.3e} (mean sign {:.3})",
            result.point.mean, result.point.std_error, result.point.mean_sign
        );
        if let Some(path) = &cmd.out {
            config.t = Some(t);
            write_json(path, &config, &result)?;
            println!("wrote {}", path.display());
        }
        return Ok(());
    }

    let grid = cmd.t_grid.clone().context("one of --t or --t-grid is required")?;
    let fit = estimate_ground_energy(h, start, &grid, cmd.samples, seed, cmd.workers, mode)?;
    let result = EprFitResult {
        start,
        mode: cmd.mode.clone(),
        samples_per_point: cmd.samples,
        energy: fit.energy,
        std_error: fit.std_error,
        energy_density: fit.energy / h.size_scale(),
        curvature_warning: fit.curvature_warning,
        points: fit.points.iter().map(PointResult::from).collect(),
    };
    println!(
        "fitted energy = {:.9} ± {:.3e} (density {:.9})",
        result.energy, result.std_error, result.energy_density
    );
    if result.curvature_warning {
        println!("warning: visible curvature — the grid is before the asymptotic regime");
    }
    for p in &result.points {
        println!(
            "  t={:<8} ln|mean|={:<14.6} ± {:.3e} (sign {:.3})",
            p.t,
            p.log_abs_mean,
            p.std_error / p.mean.abs(),
            p.mean_sign
        );
    }
    if let Some(path) = &cmd.out {
        config.t_grid = Some(grid);
        write_json(path, &config, &result)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// partition
// ---------------------------------------------------------------------------

#[derive(Args)]
struct PartitionCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Eigensolver tolerance; also the phase-degeneracy tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PartitionResult {
    states: usize,
    cavity_states: usize,
    cavity_connected: bool,
    pbar: f64,
    pibar: f64,
    e_tilde: f64,
    e_tilde_gap: Option<f64>,
    e_bar: f64,
    e_bar_gap: Option<f64>,
    e_full: f64,
    kout_simple: f64,
    kout_boundary: f64,
    exit_rate: Option<f64>,
    phase: String,
    theorem_density: f64,
    finite_size_energy: f64,
    predicted_density: f64,
}

fn run_partition(cmd: PartitionCmd) -> Result<()> {
    let built = build_model(&cmd.model)?;
    let h = &built.h;
    let n = h.size_scale();
    let part = resolve_partition(h, &built, &cmd.model)?;
    let grounds = partition_grounds(h, &part, cmd.tol, None)?;
    let coupling = coupling_report_from(h, &part, &grounds);
    let full = ground_state(h, cmd.tol, None)?;
    let (e_tilde, e_bar) = (grounds.reservoir.energy, grounds.cavity.energy);
    let (theorem_density, phase) =
        theorem_prediction(e_tilde, e_bar, n, cmd.tol.unwrap_or(1e-9));
    let finite_size_energy = finite_size_prediction(e_bar, part.pibar(), coupling.kout_simple);
    // The absorbing-wall rate only exists for a sign-free exit region; report
    // it when it does and omit it otherwise.
    let exit_rate = exit_rate_hamiltonian(h, &part, cmd.tol, None)
        .ok()
        .map(|r| r.star.energy);
    let result = PartitionResult {
        states: h.dim(),
        cavity_states: part.cavity().len(),
        cavity_connected: part.cavity_connected(),
        pbar: part.pbar(),
        pibar: part.pibar(),
        e_tilde,
        e_tilde_gap: finite(grounds.reservoir.gap_energy),
        e_bar,
        e_bar_gap: finite(grounds.cavity.gap_energy),
        e_full: full.energy,
        kout_simple: coupling.kout_simple,
        kout_boundary: coupling.kout_boundary,
        exit_rate,
        phase: phase.to_string(),
        theorem_density,
        finite_size_energy,
        predicted_density: e_tilde.min(finite_size_energy) / n,
    };
    println!("model: {}", describe(&built));
    println!(
        "partition: {} cavity states of {} (connected: {}), pbar = {:.6e}, pibar = {:.6e}",
        result.cavity_states, result.states, result.cavity_connected, result.pbar, result.pibar
    );
    println!("E_tilde = {:.9} (reservoir), E_bar = {:.9} (cavity)", e_tilde, e_bar);
    println!("E_full  = {:.9} (≤ min of the sides)", result.e_full);
    println!(
        "kout_simple = {:.9}, kout_boundary = {:.9}",
        result.kout_simple, result.kout_boundary
    );
    match result.exit_rate {
        Some(e) => println!("exit rate E* = {e:.9}"),
        None => println!("exit rate E* = (exit region not sign-free)"),
    }
    println!(
        "phase = {} (theorem density {:.9}); finite-size energy = {:.9} (density {:.9})",
        result.phase, result.theorem_density, result.finite_size_energy, result.predicted_density
    );
    if let Some(path) = &cmd.out {
        let mut config = base_config("partition", &cmd.model);
        config.tol = cmd.tol;
        config.out = Some(path.display().to_string());
        write_json(path, &config, &result)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rpm
// ---------------------------------------------------------------------------

#[derive(Args)]
struct RpmCmd {
    /// Level spec "v:p,v:p,…".
    #[arg(long, allow_hyphen_values = true)]
    levels: Option<String>,
    /// Two-level shortcut: deep level density.
    #[arg(long, allow_negative_numbers = true)]
    v1: Option<f64>,
    /// Two-level shortcut: shallow level density.
    #[arg(long, allow_negative_numbers = true)]
    v2: Option<f64>,
    /// Two-level shortcut: deep-level probability.
    #[arg(long)]
    p1: Option<f64>,
    /// Free kinetic ground density e0 < 0 (−Γ on the hypercube).
    #[arg(long, allow_negative_numbers = true)]
    e0: f64,
    /// Criticality / phase tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DiluteOut {
    e_tilde: f64,
    e_predicted: f64,
    phase: String,
}

#[derive(Serialize)]
struct RpmResult {
    levels: Vec<f64>,
    weights: Vec<f64>,
    e0_free: f64,
    energy_density: f64,
    balance_residual: f64,
    closed_form: Option<f64>,
    critical_w: f64,
    critical_target: f64,
    is_critical: bool,
    dilute: Option<DiluteOut>,
}

fn run_rpm(cmd: RpmCmd) -> Result<()> {
    let (levels, weights) = match (&cmd.levels, cmd.v1, cmd.v2, cmd.p1) {
        (Some(spec), _, _, _) => parse_levels(spec)?,
        (None, Some(v1), Some(v2), Some(p1)) => (vec![v1, v2], vec![p1, 1.0 - p1]),
        _ => bail!("give either --levels or all of --v1/--v2/--p1"),
    };
    let spec = RpmSpec::new(levels.clone(), weights.clone(), cmd.e0)?;
    let energy = solve_e1f(&spec);
    let closed_form = (levels.len() == 2)
        .then(|| two_level_closed_form(levels[0], levels[1], weights[0], cmd.e0));
    let dilute = match predict_phase_dilute(&spec, cmd.tol) {
        Ok(d) => Some(DiluteOut {
            e_tilde: d.e_tilde,
            e_predicted: d.e_predicted,
            phase: d.phase.to_string(),
        }),
        Err(_) => None,
    };
    let result = RpmResult {
        levels,
        weights,
        e0_free: cmd.e0,
        energy_density: energy,
        balance_residual: spec.balance_residual(energy),
        closed_form,
        critical_w: critical_condition(&spec),
        critical_target: 1.0 / cmd.e0,
        is_critical: is_critical(&spec, cmd.tol),
        dilute,
    };
    println!(
        "balance root e = {:.15} (residual {:.3e})",
        result.energy_density, result.balance_residual
    );
    if let Some(cf) = result.closed_form {
        println!("two-level closed form = {cf:.15}");
    }
    println!(
        "critical functional W = {:.12} vs 1/e0 = {:.12} (critical: {})",
        result.critical_w, result.critical_target, result.is_critical
    );
    if let Some(d) = &result.dilute {
        println!(
            "dilute: e_tilde = {:.12}, predicted density = {:.12}, phase = {}",
            d.e_tilde, d.e_predicted, d.phase
        );
    }
    if let Some(path) = &cmd.out {
        let config = RunConfig {
            command: "rpm".to_string(),
            levels: cmd.levels.clone(),
            v1: cmd.v1,
            v2: cmd.v2,
            p1: cmd.p1,
            e0: Some(cmd.e0),
            tol: Some(cmd.tol),
            out: Some(path.display().to_string()),
            ..RunConfig::default()
        };
        write_json(path, &config, &result)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ScanCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Parameter to sweep: gamma | v1 | v2 | p1 | j.
    #[arg(long)]
    param: String,
    /// Inclusive sweep range "a:b".
    #[arg(long, allow_hyphen_values = true)]
    range: String,
    /// Sweep points (≥ 2, endpoints included).
    #[arg(long, default_value_t = 9)]
    steps: usize,
    /// Comma subset of {exact, partition, epr}.
    #[arg(long, default_value = "exact,partition")]
    analyses: String,
    /// Time grid for the epr analysis.
    #[arg(long = "t-grid", value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "link-rate")]
    mode: String,
    #[arg(long)]
    start: Option<usize>,
    /// Eigensolver tolerance; also the phase-degeneracy tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// CSV output path; the JSON sidecar lands at "<out>.json".
    #[arg(long)]
    out: PathBuf,
}

const SCAN_COLUMNS: &[&str] = &[
    "param",
    "E_exact",
    "E_exact/N",
    "E_epr",
    "E_epr_err",
    "E_tilde",
    "E_bar",
    "pbar",
    "pibar",
    "kout_simple",
    "e_predicted",
    "phase",
];

#[derive(Serialize)]
struct ScanPoint {
    param: f64,
    e_exact: Option<f64>,
    e_exact_density: Option<f64>,
    e_epr: Option<f64>,
    e_epr_err: Option<f64>,
    e_tilde: Option<f64>,
    e_bar: Option<f64>,
    pbar: Option<f64>,
    pibar: Option<f64>,
    kout_simple: Option<f64>,
    e_predicted: Option<f64>,
    phase: Option<String>,
}

#[derive(Serialize)]
struct ScanResult {
    columns: Vec<String>,
    points: Vec<ScanPoint>,
}

fn apply_param(args: &mut ModelArgs, param: &str, value: f64) -> Result<()> {
    let family = args.family.as_deref().unwrap_or("two-level");
    match param {
        "gamma" => args.gamma = value,
        "v1" => {
            if family != "two-level" {
                bail!("--param v1 needs the two-level family");
            }
            args.v1 = value;
        }
        "v2" => {
            if family != "two-level" {
                bail!("--param v2 needs the two-level family");
            }
            args.v2 = value;
        }
        "p1" => {
            if family != "random" {
                bail!("--param p1 needs the random family");
            }
            args.p1 = Some(value);
        }
        "j" => {
            if family != "gaussian" {
                bail!("--param j needs the gaussian family");
            }
            args.j = value;
        }
        other => bail!("unknown scan parameter '{other}' (gamma, v1, v2, p1 or j)"),
    }
    Ok(())
}

fn run_scan(cmd: ScanCmd) -> Result<()> {
    if cmd.model.model.is_some() {
        bail!("scan sweeps a generative family; --model files have no free parameter");
    }
    if cmd.steps < 2 {
        bail!("--steps must be at least 2");
    }
    let (a, b) = cmd
        .range
        .split_once(':')
        .context("--range must look like a:b")
        .and_then(|(a, b)| {
            Ok((a.parse::<f64>().context("range start")?, b.parse::<f64>().context("range end")?))
        })?;
    let analyses: Vec<&str> = cmd.analyses.split(',').map(str::trim).collect();
    for a in &analyses {
        if !["exact", "partition", "epr"].contains(a) {
            bail!("unknown analysis '{a}' (exact, partition or epr)");
        }
    }
    let (with_exact, with_partition, with_epr) = (
        analyses.contains(&"exact"),
        analyses.contains(&"partition"),
        analyses.contains(&"epr"),
    );
    if with_epr && cmd.t_grid.is_none() {
        bail!("the epr analysis needs --t-grid");
    }

    let mut csv = Csv::new(SCAN_COLUMNS);
    let mut points = Vec::with_capacity(cmd.steps);
    for i in 0..cmd.steps {
        let value = a + (b - a) * i as f64 / (cmd.steps - 1) as f64;
        let mut args = cmd.model.clone();
        apply_param(&mut args, &cmd.param, value)?;
        let built = build_model(&args)?;
        let h = &built.h;
        let n = h.size_scale();

        let mut point = ScanPoint {
            param: value,
            e_exact: None,
            e_exact_density: None,
            e_epr: None,
            e_epr_err: None,
            e_tilde: None,
            e_bar: None,
            pbar: None,
            pibar: None,
            kout_simple: None,
            e_predicted: None,
            phase: None,
        };
        if with_exact {
            let g = ground_state(h, cmd.tol, None)?;
            point.e_exact = Some(g.energy);
            point.e_exact_density = Some(g.energy / n);
        }
        if with_partition {
            let part = resolve_partition(h, &built, &args)?;
            let grounds = partition_grounds(h, &part, cmd.tol, None)?;
            let coupling = coupling_report_from(h, &part, &grounds);
            let (e_tilde, e_bar) = (grounds.reservoir.energy, grounds.cavity.energy);
            let (_, phase) = theorem_prediction(e_tilde, e_bar, n, cmd.tol.unwrap_or(1e-9));
            let finite_size = finite_size_prediction(e_bar, part.pibar(), coupling.kout_simple);
            point.e_tilde = Some(e_tilde);
            point.e_bar = Some(e_bar);
            point.pbar = Some(part.pbar());
            point.pibar = Some(part.pibar());
            point.kout_simple = Some(coupling.kout_simple);
            point.e_predicted = Some(e_tilde.min(finite_size) / n);
            point.phase = Some(phase.to_string());
        }
        if with_epr {
            let mode = parse_mode(&cmd.mode, h)?;
            let start = cmd.start.unwrap_or_else(|| default_start(h));
            let fit = estimate_ground_energy(
                h,
                start,
                cmd.t_grid.as_ref().unwrap(),
                cmd.samples,
                mc_seed(args.seed),
                cmd.workers,
                mode,
            )?;
            point.e_epr = Some(fit.energy);
            point.e_epr_err = Some(fit.std_error);
        }
        println!(
            "{} = {:<10} E/N = {:<12} phase = {}",
            cmd.param,
            format!("{value:.6}"),
            point
                .e_exact_density
                .map(|e| format!("{e:.6}"))
                .unwrap_or_else(|| "-".to_string()),
            point.phase.as_deref().unwrap_or("-")
        );
        csv.push_row(vec![
            value.to_string(),
            cell(point.e_exact),
            cell(point.e_exact_density),
            cell(point.e_epr),
            cell(point.e_epr_err),
            cell(point.e_tilde),
            cell(point.e_bar),
            cell(point.pbar),
            cell(point.pibar),
            cell(point.kout_simple),
            cell(point.e_predicted),
            point.phase.clone().unwrap_or_default(),
        ]);
        points.push(point);
    }

    std::fs::write(&cmd.out, csv.render())
        .with_context(|| format!("writing {}", cmd.out.display()))?;
    let mut sidecar = cmd.out.clone().into_os_string();
    sidecar.push(".json");
    let sidecar = PathBuf::from(sidecar);
    let mut config = base_config("scan", &cmd.model);
    config.param = Some(cmd.param.clone());
    config.range = Some(cmd.range.clone());
    config.steps = Some(cmd.steps);
    config.analyses = Some(cmd.analyses.clone());
    config.t_grid = cmd.t_grid.clone();
    config.samples = Some(cmd.samples);
    config.workers = Some(cmd.workers);
    config.mode = Some(cmd.mode.clone());
    config.start = cmd.start;
    config.tol = cmd.tol;
    config.out = Some(cmd.out.display().to_string());
    let result = ScanResult {
        columns: SCAN_COLUMNS.iter().map(|s| s.to_string()).collect(),
        points,
    };
    write_json(&sidecar, &config, &result)?;
    println!("wrote {} ({} rows) and {}", cmd.out.display(), csv.len(), sidecar.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// exit
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ExitCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// First-exit draws.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    /// Censoring horizon (default: 50 / min boundary exit rate).
    #[arg(long = "t-max")]
    t_max: Option<f64>,
    /// Start state (default: the first cavity state).
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

/// Censoring-aware exponential-rate estimate restricted to exit times past
/// `threshold`: exits beyond it divided by the total time at risk beyond it.
/// Late times are where the exit-time tail becomes a pure exponential whose
/// rate is the absorbing-wall ground energy, so thresholding deep in the
/// tail discards the multi-mode transient without biasing the tail fit.
fn rate_beyond(taus: &[f64], censored: u64, t_max: f64, threshold: f64) -> Option<f64> {
    let mut exits = 0u64;
    let mut at_risk = censored as f64 * (t_max - threshold);
    for &tau in taus {
        if tau > threshold {
            exits += 1;
            at_risk += tau - threshold;
        }
    }
    (exits > 0 && at_risk > 0.0).then(|| exits as f64 / at_risk)
}

#[derive(Serialize)]
struct ExitResult {
    start: usize,
    samples: u64,
    t_max: f64,
    exit_rate: f64,
    exit_rate_gap: Option<f64>,
    uniform_energy: f64,
    exited: u64,
    censored: u64,
    mean_tau: Option<f64>,
    fitted_rate: Option<f64>,
    tail_threshold: Option<f64>,
    tail_rate: Option<f64>,
    relative_deviation: Option<f64>,
    histogram: Histogram,
}

fn run_exit(cmd: ExitCmd) -> Result<()> {
    let built = build_model(&cmd.model)?;
    let h = &built.h;
    let part = resolve_partition(h, &built, &cmd.model)?;
    let report = exit_rate_hamiltonian(h, &part, None, None)?;
    let t_max = cmd.t_max.unwrap_or(50.0 / part.min_boundary_exit_rate());
    let start = cmd.start.unwrap_or(part.cavity()[0]);
    let seed = mc_seed(cmd.model.seed);
    let mut taus = Vec::new();
    let mut censored = 0u64;
    for i in 0..cmd.samples {
        let mut rng = epr_core::rng::stream_rng(seed, i);
        match sample_first_exit(h, &part, start, t_max, &mut rng)? {
            FirstExit::Exited { tau, .. } => taus.push(tau),
            FirstExit::Censored { .. } => censored += 1,
        }
    }
    taus.sort_by(f64::total_cmp);
    let exited = taus.len() as u64;

    const BINS: usize = 40;
    let histogram = if taus.is_empty() {
        Histogram { edges: vec![], counts: vec![] }
    } else {
        let top = taus[taus.len() - 1];
        let edges: Vec<f64> = (0..=BINS).map(|i| top * i as f64 / BINS as f64).collect();
        let mut counts = vec![0u64; BINS];
        for &tau in &taus {
            let bin = ((tau / top * BINS as f64) as usize).min(BINS - 1);
            counts[bin] += 1;
        }
        Histogram { edges, counts }
    };

    let fitted_rate = rate_beyond(&taus, censored, t_max, 0.0);
    let tail_threshold = (!taus.is_empty()).then(|| taus[taus.len() * 9 / 10]);
    let tail_rate =
        tail_threshold.and_then(|t0| rate_beyond(&taus, censored, t_max, t0));
    let e_star = report.star.energy;
    let result = ExitResult {
        start,
        samples: cmd.samples,
        t_max,
        exit_rate: e_star,
        exit_rate_gap: finite(report.star.gap_energy),
        uniform_energy: report.uniform_energy,
        exited,
        censored,
        mean_tau: (exited > 0).then(|| taus.iter().sum::<f64>() / exited as f64),
        fitted_rate,
        tail_threshold,
        tail_rate,
        relative_deviation: tail_rate.map(|r| (r - e_star).abs() / e_star),
        histogram,
    };
    println!("model: {}", describe(&built));
    println!(
        "absorbing-wall exit rate E* = {:.9} (next level {:?}), uniform check = {:.3e}",
        result.exit_rate, result.exit_rate_gap, result.uniform_energy
    );
    println!(
        "{} draws from state {start}: {} exited, {} censored at t_max = {:.3}",
        cmd.samples, exited, censored, t_max
    );
    if let (Some(mean), Some(fitted)) = (result.mean_tau, result.fitted_rate) {
        println!("mean exit time = {mean:.6}, fitted rate = {fitted:.6}");
    }
    if let (Some(t0), Some(tail), Some(dev)) =
        (result.tail_threshold, result.tail_rate, result.relative_deviation)
    {
        println!("tail rate (beyond t = {t0:.4}) = {tail:.6}, deviation from E* = {:.2}%", 100.0 * dev);
    }
    if let Some(path) = &cmd.out {
        let mut config = base_config("exit", &cmd.model);
        config.samples = Some(cmd.samples);
        config.t_max = Some(t_max);
        config.start = Some(start);
        config.out = Some(path.display().to_string());
        write_json(path, &config, &result)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// lemma
// ---------------------------------------------------------------------------

#[derive(Args)]
struct LemmaCmd {
    #[command(flatten)]
    model: ModelArgs,
    /// Horizon of the identity.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Start state (default: the first cavity state).
    #[arg(long)]
    start: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct LemmaResult {
    t: f64,
    start: usize,
    samples: u64,
    lhs: f64,
    lhs_std_error: f64,
    rhs: f64,
    sigma_distance: f64,
    censored_fraction: f64,
    agrees: bool,
}

fn run_lemma(cmd: LemmaCmd) -> Result<()> {
    let built = build_model(&cmd.model)?;
    let h = &built.h;
    if !(cmd.t > 0.0) {
        bail!("--t must be positive");
    }
    let part = resolve_partition(h, &built, &cmd.model)?;
    let start = cmd.start.unwrap_or(part.cavity()[0]);
    let check = check_exit_lemma(
        h,
        &part,
        start,
        cmd.t,
        cmd.samples,
        mc_seed(cmd.model.seed),
        cmd.workers,
    )?;
    let sigma_distance = if check.lhs_std_error > 0.0 {
        (check.lhs - check.rhs).abs() / check.lhs_std_error
    } else {
        0.0
    };
    let result = LemmaResult {
        t: cmd.t,
        start,
        samples: cmd.samples,
        lhs: check.lhs,
        lhs_std_error: check.lhs_std_error,
        rhs: check.rhs,
        sigma_distance,
        censored_fraction: check.censored_fraction,
        agrees: check.agrees,
    };
    println!("model: {}", describe(&built));
    println!(
        "lhs (Monte Carlo) = {:.9} ± {:.3e}  ({:.1}% censored)",
        result.lhs,
        result.lhs_std_error,
        100.0 * result.censored_fraction
    );
    println!("rhs (quadrature)  = {:.9}", result.rhs);
    println!("distance = {:.2}σ, agrees: {}", result.sigma_distance, result.agrees);
    if let Some(path) = &cmd.out {
        let mut config = base_config("lemma", &cmd.model);
        config.t = Some(cmd.t);
        config.samples = Some(cmd.samples);
        config.workers = Some(cmd.workers);
        config.start = Some(start);
        config.out = Some(path.display().to_string());
        write_json(path, &config, &result)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
