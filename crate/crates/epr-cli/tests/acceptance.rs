//! Acceptance gate: one test per numbered claim, each printing a single
//! `criterion NN PASS/FAIL` line (run with `--nocapture` to see the lines as
//! they happen; failing criteria print their full evidence tables).
//!
//! Every tolerance is pinned in the body of its test. Two claims about
//! finite-size scaling (criteria 06 and 07) are stated here exactly as
//! required and fail honestly at the sizes they prescribe; the printed
//! tables carry the measured numbers.

use std::path::Path;
use std::process::Command;

use epr_core::rng::stream_rng;
use epr_core::spectral::DENSE_GATE;
use epr_core::{
    coupling_report_from, critical_condition, estimate_ground_energy, estimate_propagator_sum,
    exit_rate_hamiltonian, check_exit_lemma, ground_state, ground_state_with, partition_grounds,
    predict_phase_dilute, qrem, random_potential_model, sample_first_exit, solve_e1f,
    subspace_ground, two_level_closed_form, two_level_rpm, FirstExit, Hamiltonian, JumpMode,
    KineticSpec, Partition, RpmSpec, SolverPath,
};
use rand::Rng;

fn verdict(id: u32, ok: bool, detail: &str) {
    println!("criterion {id:02} {}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id:02} failed: {detail}");
}

/// The three reference models used by criteria 01 and 02: a 2-state system,
/// a 3-state path whose second link carries a positive kinetic entry (a
/// signed jump factor), and a 6-bit hypercube with two-point random potential.
fn reference_models() -> Vec<(&'static str, Hamiltonian, usize)> {
    let two = Hamiltonian::new(2, 1.0, vec![0.2, -0.4], &[(0, 1, -0.8)]).unwrap();
    let path =
        Hamiltonian::new(3, 3.0, vec![0.3, -0.2, 0.9], &[(0, 1, -0.7), (1, 2, 0.4)]).unwrap();
    let cube = random_potential_model(
        64,
        &[0.0, 0.15],
        &[0.5, 0.5],
        KineticSpec::Hypercube { gamma: 0.6 },
        3,
    )
    .unwrap();
    let cube_start = argmin_v(&cube);
    vec![("2-state", two, 1), ("3-path", path, 1), ("hypercube-N6", cube, cube_start)]
}

fn argmin_v(h: &Hamiltonian) -> usize {
    (0..h.dim()).min_by(|&a, &b| h.v(a).total_cmp(&h.v(b))).unwrap()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

#[test]
fn criterion_01_decay_fit_matches_diagonalization() {
    // Pinned: 3σ agreement, σ ≤ 0.05, ≤ 10⁶ trajectories per model.
    let mut worst_sigmas = 0.0f64;
    let mut worst_err = 0.0f64;
    for (name, h, start) in reference_models() {
        let exact = ground_state(&h, None, None).unwrap().energy;
        let samples = if h.dim() > 4 { 300_000 } else { 200_000 };
        let grid = vec![3.0, 4.5, 6.0];
        assert!(samples * grid.len() as u64 <= 1_000_000);
        let fit = estimate_ground_energy(&h, start, &grid, samples, 11, 8, JumpMode::LinkRate)
            .unwrap();
        let sigmas = (fit.energy - exact).abs() / fit.std_error;
        println!(
            "  {name}: exact {exact:.6}, fit {:.6} ± {:.6} ({sigmas:.2}σ)",
            fit.energy, fit.std_error
        );
        assert!(fit.std_error <= 0.05, "{name}: σ {} above 0.05", fit.std_error);
        worst_sigmas = worst_sigmas.max(sigmas);
        worst_err = worst_err.max(fit.std_error);
    }
    verdict(
        1,
        worst_sigmas <= 3.0,
        &format!(
            "trajectory decay fits match diagonalization on 3 models \
             (worst {worst_sigmas:.2}σ, worst σ {worst_err:.4}, ≤ 9e5 trajectories each)"
        ),
    );
}

#[test]
fn criterion_02_jump_modes_agree() {
    // Pinned: |Δ| ≤ 3·combined σ at t = 1.5 with 10⁵ trajectories per mode.
    let mut worst = 0.0f64;
    for (i, (name, h, start)) in reference_models().into_iter().enumerate() {
        let rho = 1.5 * h.max_eta();
        let a = estimate_propagator_sum(&h, start, 1.5, 100_000, 51 + 2 * i as u64, 8,
            JumpMode::LinkRate);
        let b = estimate_propagator_sum(&h, start, 1.5, 100_000, 52 + 2 * i as u64, 8,
            JumpMode::Uniform { rho });
        let sigmas = (a.mean() - b.mean()).abs() / a.std_error().hypot(b.std_error());
        println!(
            "  {name}: link-rate {:.5} ± {:.5}, uniform(ρ={rho}) {:.5} ± {:.5} ({sigmas:.2}σ)",
            a.mean(),
            a.std_error(),
            b.mean(),
            b.std_error()
        );
        worst = worst.max(sigmas);
    }
    verdict(2, worst <= 3.0, &format!("both samplers agree on 3 models (worst {worst:.2}σ)"));
}

#[test]
fn criterion_03_kernel_identities_hold_on_every_instance() {
    // Pinned: stationarity residual ≤ 1e-12; per-state measure dominance and
    // the partition measure bound on ≥ 50 generated instances.
    let mut instances: Vec<Hamiltonian> = Vec::new();
    for i in 0..30usize {
        let n_bits = 4 + (i % 5) as u32;
        let gamma = [0.3, 0.9, 1.5][i % 3];
        let p1 = [0.2, 0.5, 0.8][(i / 3) % 3];
        let v2 = [0.5, 1.0, 2.0][(i / 5) % 3];
        instances.push(
            random_potential_model(
                1 << n_bits,
                &[0.0, v2],
                &[p1, 1.0 - p1],
                KineticSpec::Hypercube { gamma },
                100 + i as u64,
            )
            .unwrap(),
        );
    }
    for i in 0..20usize {
        let m = [16, 48, 128, 256][i % 4];
        let eta = [0.05, 0.2, 0.7][i % 3];
        let p1 = [0.3, 0.6][(i / 4) % 2];
        instances.push(
            random_potential_model(
                m,
                &[-0.5, 1.0],
                &[p1, 1.0 - p1],
                KineticSpec::CompleteGraph { eta },
                200 + i as u64,
            )
            .unwrap(),
        );
    }
    assert!(instances.len() >= 50);

    let mut worst_residual = 0.0f64;
    for h in &instances {
        let pi = h.invariant_measure();
        let residual = h.stationarity_residual(&pi);
        assert!(residual <= 1e-12, "stationarity residual {residual}");
        worst_residual = worst_residual.max(residual);

        let (m, min_r) = (h.dim() as f64, h.min_r());
        for n in 0..h.dim() {
            assert!(
                pi[n] * m * min_r <= h.r(n) * (1.0 + 1e-12),
                "measure dominance violated at state {n}"
            );
        }
        for cavity in [vec![argmin_v(h)], (0..h.dim() / 2).collect::<Vec<_>>()] {
            let part = Partition::new(h, &cavity).unwrap();
            let max_cavity_r =
                cavity.iter().map(|&n| h.r(n)).fold(f64::NEG_INFINITY, f64::max);
            assert!(
                part.pibar() <= (max_cavity_r / min_r) * part.pbar() * (1.0 + 1e-12),
                "partition measure bound violated"
            );
        }
    }
    verdict(
        3,
        true,
        &format!(
            "stationarity and measure bounds hold on {} instances (worst residual {worst_residual:.2e})",
            instances.len()
        ),
    );
}

#[test]
fn criterion_04_balance_root_consistency() {
    // Pinned: |closed form − solver| ≤ 1e-10 and |balance residual| ≤ 1e-10
    // on 1000 draws; dilute-limit deviation strictly decreasing over
    // p₁ ∈ {1e-2, 1e-4, 1e-6}.
    let mut rng = stream_rng(4242, 0);
    let mut worst_gap = 0.0f64;
    let mut worst_residual = 0.0f64;
    for _ in 0..1000 {
        let v1 = rng.gen_range(-1.0..1.0);
        let v2 = v1 + rng.gen_range(0.1..2.0);
        let p1 = rng.gen_range(0.05..0.95);
        let e0 = -rng.gen_range(0.2..2.5);
        let spec = RpmSpec::new(vec![v1, v2], vec![p1, 1.0 - p1], e0).unwrap();
        let solved = solve_e1f(&spec);
        let closed = two_level_closed_form(v1, v2, p1, e0);
        worst_gap = worst_gap.max((solved - closed).abs());
        worst_residual = worst_residual.max(spec.balance_residual(solved).abs());
    }
    assert!(worst_gap <= 1e-10, "closed form vs solver gap {worst_gap}");
    assert!(worst_residual <= 1e-10, "balance residual {worst_residual}");

    let mut deviations = Vec::new();
    for p1 in [1e-2, 1e-4, 1e-6] {
        let spec = RpmSpec::new(vec![0.0, 1.0], vec![p1, 1.0 - p1], -0.5).unwrap();
        let predicted = predict_phase_dilute(&spec, 1e-9).unwrap().e_predicted;
        deviations.push((solve_e1f(&spec) - predicted).abs());
    }
    println!("  dilute deviations over p1 = 1e-2, 1e-4, 1e-6: {deviations:?}");
    let monotone = deviations.windows(2).all(|w| w[1] < w[0]);
    verdict(
        4,
        monotone,
        &format!(
            "1000 draws: closed form within {worst_gap:.2e}, residual ≤ {worst_residual:.2e}; \
             dilute deviation decreases monotonically"
        ),
    );
}

#[test]
fn criterion_05_balance_density_converges_to_diagonalization() {
    // Pinned: median |e_balance − E_exact/N| over 5 seeds strictly decreasing
    // across M ∈ {2⁸, 2¹⁰, 2¹²} and ≤ 0.05 at 2¹². Each instance's balance
    // equation uses its own empirical level fractions so the comparison
    // tracks the approximation error rather than disorder sampling noise.
    let gamma = 1.5;
    let mut medians = Vec::new();
    for n in [8u32, 10, 12] {
        let m = 1usize << n;
        let mut devs = Vec::new();
        for seed in 1..=5u64 {
            let h = random_potential_model(
                m,
                &[0.0, 1.0],
                &[0.3, 0.7],
                KineticSpec::Hypercube { gamma },
                seed,
            )
            .unwrap();
            let deep = h.potential().iter().filter(|&&v| v == 0.0).count();
            let p1 = deep as f64 / m as f64;
            let spec = RpmSpec::new(vec![0.0, 1.0], vec![p1, 1.0 - p1], -gamma).unwrap();
            let path = if m > 2048 { SolverPath::Iterative } else { SolverPath::Auto };
            let exact = ground_state_with(&h, None, None, path).unwrap().energy / n as f64;
            devs.push((solve_e1f(&spec) - exact).abs());
        }
        medians.push(median(devs));
    }
    println!("  medians over M = 2^8, 2^10, 2^12: {medians:?}");
    let ok = medians.windows(2).all(|w| w[1] < w[0]) && medians[2] <= 0.05;
    verdict(
        5,
        ok,
        &format!(
            "median balance-vs-exact deviation decreases {:.4} → {:.4} → {:.4} (≤ 0.05 at 2^12)",
            medians[0], medians[1], medians[2]
        ),
    );
}

#[test]
fn criterion_06_crossing_band_and_frozen_overlap() {
    // Pinned: |E_exact/N − min(v₁, v₂−Γ)| ≤ 5NΓ2^{−N} for |Γ−Γc| ≥ 0.2 over
    // N ∈ {8,10,12,14}; cavity weight of the ground state ≥ 0.9 at N = 12
    // for Γ ≤ Γc − 0.3. (v₁ = 0, v₂ = 1, Γc = 1.)
    let gammas = [0.2, 0.4, 0.6, 0.8, 1.2, 1.4, 1.6, 1.8];
    let mut band_failures = 0usize;
    let mut rows = 0usize;
    for n in [8u32, 10, 12, 14] {
        for gamma in gammas {
            let (h, _) = two_level_rpm(n, gamma, 0.0, 1.0, None).unwrap();
            let path = if h.dim() > DENSE_GATE { SolverPath::Iterative } else { SolverPath::Auto };
            let density = ground_state_with(&h, None, None, path).unwrap().energy / n as f64;
            let predicted = (1.0 - gamma).min(0.0);
            let diff = (density - predicted).abs();
            let band = 5.0 * n as f64 * gamma / (1u64 << n) as f64;
            rows += 1;
            if diff > band {
                band_failures += 1;
                println!(
                    "  band exceeded at N={n} Γ={gamma}: |{density:.5} − {predicted:.2}| = {diff:.5} > {band:.5}"
                );
            }
        }
    }
    let mut overlap_ok = true;
    for gamma in [0.2, 0.4, 0.6] {
        let (h, part) = two_level_rpm(12, gamma, 0.0, 1.0, None).unwrap();
        let vector = ground_state(&h, None, None).unwrap().vector;
        let weight: f64 = part.cavity().iter().map(|&n| vector[n] * vector[n]).sum();
        println!("  N=12 Γ={gamma}: cavity ground weight {weight:.6}");
        overlap_ok &= weight >= 0.9;
    }
    verdict(
        6,
        band_failures == 0 && overlap_ok,
        &format!(
            "crossing band holds on {}/{rows} (N,Γ) points; frozen-side cavity weight ≥ 0.9: {overlap_ok}",
            rows - band_failures
        ),
    );
}

#[test]
fn criterion_07_finite_size_coupling_ratio_at_crossing() {
    // Pinned: (E_exact − V₁)/(π̄·K_out) ∈ [0.5, 2.0] at Γ = Γc for
    // N ∈ {10, 12, 14}, with |ratio − 1| non-increasing in N.
    let mut ratios = Vec::new();
    for n in [10u32, 12, 14] {
        let (h, part) = two_level_rpm(n, 1.0, 0.0, 1.0, None).unwrap();
        let path = if h.dim() > DENSE_GATE { SolverPath::Iterative } else { SolverPath::Auto };
        let grounds = partition_grounds(&h, &part, None, None).unwrap();
        let coupling = coupling_report_from(&h, &part, &grounds);
        let full = ground_state_with(&h, None, None, path).unwrap().energy;
        let v1 = h.v(part.cavity()[0]);
        let ratio = (full - v1) / (part.pibar() * coupling.kout_simple);
        println!(
            "  N={n}: E = {full:.6}, V₁ = {v1}, π̄·K_out = {:.6e}, ratio = {ratio:.2}",
            part.pibar() * coupling.kout_simple
        );
        ratios.push(ratio);
    }
    let in_band = ratios.iter().all(|r| (0.5..=2.0).contains(r));
    let tightening = ratios
        .windows(2)
        .all(|w| (w[1] - 1.0).abs() <= (w[0] - 1.0).abs());
    verdict(
        7,
        in_band && tightening,
        &format!("coupling-law ratios at the crossing: {ratios:?} (band [0.5, 2.0], tightening {tightening})"),
    );
}

#[test]
fn criterion_08_exit_rates() {
    // Pinned: single-state cavity censored-MLE rate within 2% of R(n̄) at
    // 10⁵ draws; 4-state cavity tail rate (beyond the 0.9 quantile) within
    // 5% of E*; on every partition below, E* > 0 and |E**| ≤ 1e-10·‖H*‖.
    let single = two_level_rpm(6, 0.5, 0.0, 1.0, None).unwrap();
    let four = two_level_rpm(6, 0.6, 0.0, 1.0, Some(&[0, 1, 2, 4])).unwrap();
    let pair = two_level_rpm(6, 0.6, 0.0, 1.0, Some(&[0, 1])).unwrap();
    let gaussian = qrem(10, 0.8, 1.0, 11).unwrap();
    let gaussian_part = Partition::new(&gaussian, &[argmin_v(&gaussian)]).unwrap();

    let mut checked = 0usize;
    for (h, part) in [
        (&single.0, &single.1),
        (&four.0, &four.1),
        (&pair.0, &pair.1),
        (&gaussian, &gaussian_part),
    ] {
        let report = exit_rate_hamiltonian(h, part, None, None).unwrap();
        assert!(report.star.energy > 0.0, "exit rate must be positive");
        assert!(
            report.uniform_energy.abs() <= 1e-10 * report.star_norm,
            "uniform-potential variant must have exactly zero ground energy"
        );
        checked += 1;
    }

    let sample_exits = |h: &Hamiltonian, part: &Partition, start: usize, seed: u64| {
        let t_max = 50.0 / part.min_boundary_exit_rate();
        let mut taus = Vec::new();
        let mut censored = 0u64;
        for i in 0..100_000u64 {
            let mut rng = stream_rng(seed, i);
            match sample_first_exit(h, part, start, t_max, &mut rng).unwrap() {
                FirstExit::Exited { tau, .. } => taus.push(tau),
                FirstExit::Censored { .. } => censored += 1,
            }
        }
        taus.sort_by(f64::total_cmp);
        (taus, censored, t_max)
    };
    let rate_beyond = |taus: &[f64], censored: u64, t_max: f64, t0: f64| {
        let mut exits = 0u64;
        let mut at_risk = censored as f64 * (t_max - t0);
        for &tau in taus {
            if tau > t0 {
                exits += 1;
                at_risk += tau - t0;
            }
        }
        exits as f64 / at_risk
    };

    let (taus, censored, t_max) = sample_exits(&single.0, &single.1, 0, 808);
    let r_ref = single.0.r(0);
    let mle = rate_beyond(&taus, censored, t_max, 0.0);
    let single_dev = (mle / r_ref - 1.0).abs();
    println!("  single-state: rate {mle:.5} vs R = {r_ref} ({:.2}%)", 100.0 * single_dev);

    let report = exit_rate_hamiltonian(&four.0, &four.1, None, None).unwrap();
    let (taus, censored, t_max) = sample_exits(&four.0, &four.1, 0, 809);
    let t0 = taus[taus.len() * 9 / 10];
    let tail = rate_beyond(&taus, censored, t_max, t0);
    let tail_dev = (tail / report.star.energy - 1.0).abs();
    println!(
        "  4-state: tail rate {tail:.5} vs E* = {:.5} ({:.2}%)",
        report.star.energy,
        100.0 * tail_dev
    );

    verdict(
        8,
        single_dev <= 0.02 && tail_dev <= 0.05,
        &format!(
            "single-state rate off by {:.2}% (≤ 2%), 4-state tail off by {:.2}% (≤ 5%), \
             E*/E** checks on {checked} partitions",
            100.0 * single_dev,
            100.0 * tail_dev
        ),
    );
}

#[test]
fn criterion_09_exit_identity_balances() {
    // Pinned: Monte Carlo vs quadrature within 3σ for cavity sizes
    // {1, 2, 4} × horizons {0.5, 1, 2} at 10⁵ trajectories each.
    let cavities: [&[usize]; 3] = [&[0], &[0, 1], &[0, 1, 2, 4]];
    let mut worst = 0.0f64;
    for (ci, cavity) in cavities.iter().enumerate() {
        let (h, part) = two_level_rpm(6, 0.6, 0.0, 1.0, Some(cavity)).unwrap();
        for (ti, t) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let seed = 900 + 10 * ci as u64 + ti as u64;
            let check = check_exit_lemma(&h, &part, 0, t, 100_000, seed, 8).unwrap();
            let sigmas = (check.lhs - check.rhs).abs() / check.lhs_std_error;
            println!(
                "  |cavity| = {}, t = {t}: lhs {:.5} ± {:.5}, rhs {:.5} ({sigmas:.2}σ)",
                cavity.len(),
                check.lhs,
                check.lhs_std_error,
                check.rhs
            );
            assert!(check.agrees, "identity off by {sigmas:.2}σ");
            worst = worst.max(sigmas);
        }
    }
    verdict(9, true, &format!("exit identity balances on 9 configurations (worst {worst:.2}σ)"));
}

#[test]
fn criterion_10_cli_outputs_are_byte_stable() {
    // Pinned: byte-identical CSV and JSON when the same invocation runs twice.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let scan = |path: &Path| {
        let out = Command::new(env!("CARGO_BIN_EXE_epr"))
            .args([
                "scan", "--family", "two-level", "--N", "5", "--param", "gamma", "--range",
                "0.5:1.5", "--steps", "3", "--analyses", "exact,partition,epr", "--t-grid",
                "1,2,3", "--samples", "2000", "--seed", "3",
            ])
            .arg("--out")
            .arg(path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(path).unwrap(), std::fs::read(path.with_extension("csv.json")).unwrap())
    };
    let (csv1, json1) = scan(&csv);
    let (csv2, json2) = scan(&csv);
    let scan_stable = csv1 == csv2 && json1 == json2;

    let report = dir.path().join("exit.json");
    let exit = |path: &Path| {
        let out = Command::new(env!("CARGO_BIN_EXE_epr"))
            .args([
                "exit", "--family", "two-level", "--N", "5", "--gamma", "0.7", "--samples",
                "5000", "--seed", "9",
            ])
            .arg("--out")
            .arg(path)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let report_stable = exit(&report) == exit(&report);
    verdict(
        10,
        scan_stable && report_stable,
        "reruns reproduce CSV, sidecar, and JSON reports byte for byte",
    );
}

#[test]
fn criterion_11_gaussian_crossing_matches_histogram_prediction() {
    // Pinned: |Γ*(reservoir ground crosses V₁) − Γ_pred(empirical histogram)|
    // ≤ 0.1 on a seeded 14-bit Gaussian instance whose minimum is well
    // separated (the regime the dilute analytics address).
    let n = 14u32;
    let m = 1usize << n;
    let seed = 11u64;
    let h0 = qrem(n, 1.0, 1.0, seed).unwrap();
    let cavity = argmin_v(&h0);
    let v1 = h0.v(cavity);

    let mut levels: Vec<f64> = h0.potential().iter().map(|v| v / n as f64).collect();
    levels.sort_by(f64::total_cmp);
    let spec = RpmSpec::new(levels, vec![1.0 / m as f64; m], -1.0).unwrap();
    let gamma_pred = -1.0 / critical_condition(&spec);

    let part = Partition::new(&h0, &[cavity]).unwrap();
    let e_tilde = |gamma: f64| {
        let h = qrem(n, gamma, 1.0, seed).unwrap();
        subspace_ground(&h, part.reservoir(), None, None).unwrap().energy
    };
    let (mut lo, mut hi) = (0.05f64, 3.0f64);
    assert!(e_tilde(lo) > v1 && e_tilde(hi) < v1, "crossing not bracketed");
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if e_tilde(mid) > v1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma_star = 0.5 * (lo + hi);
    let delta = (gamma_star - gamma_pred).abs();
    verdict(
        11,
        delta <= 0.1,
        &format!(
            "reservoir-ground crossing Γ* = {gamma_star:.4} vs histogram prediction \
             Γ = {gamma_pred:.4} (|Δ| = {delta:.4} ≤ 0.1)"
        ),
    );
}
