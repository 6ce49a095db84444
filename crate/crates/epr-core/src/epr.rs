//! Probabilistic estimators built on Poisson-clocked jump trajectories.
//!
//! The central identity: the column sum Σ_n ⟨n|e^{−Ht}|n₀⟩ equals the
//! expectation of a multiplicative trajectory functional over the jump chain
//! started at n₀. Two samplers realize it:
//!
//! * [`JumpMode::LinkRate`] — dwell ~ Exp(R(n)), next state chosen with
//!   probability η/R(n); the functional is exp(∫ (R−V) ds) times the product
//!   of link signs.
//! * [`JumpMode::Uniform`] — dwell ~ Exp(ρ·A(n)), next state uniform over
//!   neighbors; the functional is exp(∫ (ρA−V) ds) times Π λ·η/ρ.
//!
//! Both have the same expectation; their variances differ. Weights are
//! accumulated in the log domain and averaged with a streaming shifted
//! summation, so nothing overflows even when the functional is astronomically
//! large. Ground energies come from the long-time decay rate of the mean,
//! fitted by weighted least squares over a time grid.
//!
//! The module also samples first-exit times from a cavity (whose tail rate is
//! the ground energy of the absorbing-wall operator), checks the exit-time
//! integral identity against quadrature, and reconstructs the propagator sum
//! from the boundary-coupling series.

use crate::fock::{FockError, Hamiltonian, Partition};
use crate::quad::adaptive_simpson;
use crate::rng::{stream_rng, worker_ranges};
use crate::spectral::{Propagator, SpectralError};
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EprError {
    /// The signed mean lost its signal: average sign too close to zero.
    #[error("sign collapse at t = {t}: mean sign {mean_sign:.3e}")]
    SignCollapse { t: f64, mean_sign: f64 },
    /// The estimated mean was non-positive, so its logarithm has no slope.
    #[error("non-positive mean estimate at t = {t}")]
    NonPositiveMean { t: f64 },
    /// The exit-time identity requires every link touching the cavity
    /// (internal and crossing) to carry a positive kinetic sign.
    #[error("state {state} carries a negative-sign link; the exit-time identity needs a \
             sign-free cavity region")]
    NonStoquasticRegion { state: usize },
    /// The requested start state is not inside the cavity.
    #[error("start state {state} is not in the cavity")]
    StateNotInCavity { state: usize },
    /// The coupling series did not decay to the tolerance within `k_max` terms.
    #[error("series truncation not converged after {k_max} terms (last/sum = {ratio:.3e})")]
    TruncationNotConverged { k_max: usize, ratio: f64 },
    /// A time grid was empty, too short, unsorted, or non-positive.
    #[error("bad time grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// How the Poisson clock and the jump kernel are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpMode {
    /// Dwell Exp(R(n)), kernel η/R(n); jump factor is the link sign only.
    LinkRate,
    /// Dwell Exp(ρ·A(n)), uniform kernel; jump factor is λ·η/ρ.
    Uniform { rho: f64 },
}

/// One sampled trajectory on [0, t): the jump chain, the sign of the
/// functional, and its log magnitude.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start: usize,
    /// Absolute jump times, strictly increasing, all < t.
    pub jump_times: Vec<f64>,
    /// Visited states; `states[0] == start`, one entry per jump after that.
    pub states: Vec<usize>,
    /// Product of the signs picked up at jumps (±1).
    pub sign: i8,
    /// ln of the functional's magnitude.
    pub log_weight: f64,
    /// Horizon the trajectory was run to.
    pub t: f64,
}

impl Trajectory {
    /// Time spent in each visited state (aligned with `states`); the last
    /// entry is the residual interval up to the horizon.
    pub fn living_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.states.len());
        let mut prev = 0.0;
        for &s in &self.jump_times {
            out.push(s - prev);
            prev = s;
        }
        out.push(self.t - prev);
        out
    }

    /// Recompute (log weight, sign) from the stored chain; used to validate
    /// the sampler's on-line bookkeeping.
    pub fn recompute_log_weight(&self, h: &Hamiltonian, mode: JumpMode) -> (f64, i8) {
        let mut logw = 0.0;
        let mut sign = 1i8;
        for (state, dwell) in self.states.iter().zip(self.living_times()) {
            let rate = match mode {
                JumpMode::LinkRate => h.r(*state),
                JumpMode::Uniform { rho } => rho * h.a(*state) as f64,
            };
            logw += (rate - h.v(*state)) * dwell;
        }
        for (k, &next) in self.states.iter().skip(1).enumerate() {
            let from = self.states[k];
            let link = h.links(from).iter().find(|l| l.to == next).expect("stored jump uses a link");
            sign *= link.lambda;
            if let JumpMode::Uniform { rho } = mode {
                logw += (link.eta / rho).ln();
            }
        }
        (logw, sign)
    }
}

/// Sample one trajectory of the chosen mode from `n0` over [0, t).
pub fn sample_trajectory(
    h: &Hamiltonian,
    n0: usize,
    t: f64,
    mode: JumpMode,
    rng: &mut impl Rng,
) -> Trajectory {
    assert!(n0 < h.dim(), "start state out of range");
    assert!(t > 0.0, "horizon must be positive");
    if let JumpMode::Uniform { rho } = mode {
        assert!(rho > 0.0, "uniform clock rate must be positive");
    }
    let mut n = n0;
    let mut now = 0.0f64;
    let mut log_weight = 0.0f64;
    let mut sign = 1i8;
    let mut jump_times = Vec::new();
    let mut states = vec![n0];
    loop {
        let rate = match mode {
            JumpMode::LinkRate => h.r(n),
            JumpMode::Uniform { rho } => rho * h.a(n) as f64,
        };
        let exponent = rate - h.v(n);
        let dwell = sample_exp(rate, rng);
        if now + dwell >= t {
            log_weight += exponent * (t - now);
            break;
        }
        log_weight += exponent * dwell;
        now += dwell;
        let link = match mode {
            JumpMode::LinkRate => pick_weighted(h, n, rng),
            JumpMode::Uniform { .. } => {
                let links = h.links(n);
                &links[rng.gen_range(0..links.len())]
            }
        };
        sign *= link.lambda;
        if let JumpMode::Uniform { rho } = mode {
            log_weight += (link.eta / rho).ln();
        }
        n = link.to;
        jump_times.push(now);
        states.push(n);
    }
    Trajectory { start: n0, jump_times, states, sign, log_weight, t }
}

fn sample_exp(rate: f64, rng: &mut impl Rng) -> f64 {
    // Inverse-CDF keeps the draw a single uniform, which makes stream
    // consumption easy to reason about.
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

fn pick_weighted<'h>(h: &'h Hamiltonian, n: usize, rng: &mut impl Rng) -> &'h crate::fock::Link {
    let links = h.links(n);
    let target: f64 = rng.gen::<f64>() * h.r(n);
    let mut acc = 0.0;
    for l in links {
        acc += l.eta;
        if target < acc {
            return l;
        }
    }
    links.last().unwrap()
}

// ---------------------------------------------------------------------------
// Log-domain accumulation.
// ---------------------------------------------------------------------------

/// Streaming shifted accumulator for signed values given as (ln|x|, sign):
/// Welford running mean/variance of sign·e^{ln|x| − shift} under a dynamic
/// shift, so the sum never overflows and the variance never suffers the
/// E[x²] − E[x]² cancellation.
#[derive(Debug, Clone)]
struct LogAccum {
    shift: f64,
    mean: f64,
    m2: f64,
    n: u64,
    sign_sum: i64,
}

impl LogAccum {
    fn new() -> Self {
        Self { shift: f64::NEG_INFINITY, mean: 0.0, m2: 0.0, n: 0, sign_sum: 0 }
    }

    fn push(&mut self, log_abs: f64, sign: i8) {
        if log_abs > self.shift {
            let f = rescale(self.shift, log_abs);
            self.mean *= f;
            self.m2 *= f * f;
            self.shift = log_abs;
        }
        self.sign_sum += i64::from(sign);
        self.push_value(f64::from(sign) * (log_abs - self.shift).exp());
    }

    /// An exact zero still counts as a sample.
    fn push_zero(&mut self) {
        self.push_value(0.0);
    }

    fn push_value(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combine two accumulators (Chan's parallel update), rescaled to the
    /// larger shift.
    fn merge(mut self, other: Self) -> Self {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let shift = self.shift.max(other.shift);
        let (fa, fb) = (rescale(self.shift, shift), rescale(other.shift, shift));
        let (ma, mb) = (self.mean * fa, other.mean * fb);
        let (qa, qb) = (self.m2 * fa * fa, other.m2 * fb * fb);
        let (na, nb) = (self.n as f64, other.n as f64);
        let d = mb - ma;
        self.shift = shift;
        self.mean = ma + d * nb / (na + nb);
        self.m2 = qa + qb + d * d * na * nb / (na + nb);
        self.n += other.n;
        self.sign_sum += other.sign_sum;
        self
    }
}

fn rescale(from: f64, to: f64) -> f64 {
    if from.is_finite() {
        (from - to).exp()
    } else {
        0.0
    }
}

/// Signed Monte Carlo estimate of the trajectory-functional mean, kept in the
/// log domain.
#[derive(Debug, Clone)]
pub struct EprEstimate {
    pub t: f64,
    pub samples: u64,
    pub mode: JumpMode,
    /// ln |mean|; −∞ when the signed sum cancels to exactly zero.
    pub log_abs_mean: f64,
    /// Sign of the mean.
    pub mean_positive: bool,
    /// ln of the standard error of the mean.
    pub log_std_error: f64,
    /// Average trajectory sign — the severity of sign cancellation.
    pub mean_sign: f64,
}

impl EprEstimate {
    pub fn mean(&self) -> f64 {
        let m = self.log_abs_mean.exp();
        if self.mean_positive {
            m
        } else {
            -m
        }
    }

    pub fn std_error(&self) -> f64 {
        self.log_std_error.exp()
    }

    fn from_accum(acc: &LogAccum, t: f64, mode: JumpMode) -> Self {
        let n = acc.n as f64;
        let log_abs_mean = if acc.mean == 0.0 {
            f64::NEG_INFINITY
        } else {
            acc.shift + acc.mean.abs().ln()
        };
        let var_shifted = if acc.n > 1 { (acc.m2 / (n - 1.0)).max(0.0) } else { 0.0 };
        let log_std_error = if var_shifted == 0.0 {
            f64::NEG_INFINITY
        } else {
            acc.shift + 0.5 * (var_shifted.ln() - n.ln())
        };
        EprEstimate {
            t,
            samples: acc.n,
            mode,
            log_abs_mean,
            mean_positive: acc.mean >= 0.0,
            log_std_error,
            mean_sign: acc.sign_sum as f64 / n,
        }
    }
}

/// Run `samples` independent trajectory streams split across `workers`
/// contiguous blocks. Stream j of the master seed drives trajectory
/// `stream_base + j`, so the set of trajectories is independent of the worker
/// count; partial sums are merged in block order.
fn parallel_accumulate<F>(samples: u64, seed: u64, stream_base: u64, workers: usize, f: F) -> LogAccum
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Option<(f64, i8)> + Sync,
{
    assert!(samples > 0, "need at least one sample");
    let ranges = worker_ranges(samples, workers);
    let parts: Vec<LogAccum> = ranges
        .into_par_iter()
        .map(|range| {
            let mut acc = LogAccum::new();
            for j in range {
                let mut rng = stream_rng(seed, stream_base + j);
                match f(&mut rng) {
                    Some((log_abs, sign)) => acc.push(log_abs, sign),
                    None => acc.push_zero(),
                }
            }
            acc
        })
        .collect();
    parts.into_iter().fold(LogAccum::new(), LogAccum::merge)
}

/// Estimate Σ_n ⟨n|e^{−Ht}|n₀⟩ by averaging the trajectory functional.
pub fn estimate_propagator_sum(
    h: &Hamiltonian,
    n0: usize,
    t: f64,
    samples: u64,
    seed: u64,
    workers: usize,
    mode: JumpMode,
) -> EprEstimate {
    let acc = parallel_accumulate(samples, seed, 0, workers, |rng| {
        let traj = sample_trajectory(h, n0, t, mode, rng);
        Some((traj.log_weight, traj.sign))
    });
    EprEstimate::from_accum(&acc, t, mode)
}

/// Weighted least-squares fit of the decay rate of the functional mean.
#[derive(Debug, Clone)]
pub struct EnergyFit {
    /// Fitted ground-energy estimate: the slope of −ln mean against t.
    pub energy: f64,
    /// Standard error of the slope, propagated from the per-point errors.
    pub std_error: f64,
    /// The per-time estimates the fit was built from.
    pub points: Vec<EprEstimate>,
    /// True when a quadratic term is statistically visible, i.e. the grid
    /// has not reached the asymptotic regime.
    pub curvature_warning: bool,
}

/// Estimate the ground energy from the decay of the functional mean over an
/// ascending time grid (at least 3 points). Point i consumes trajectory
/// streams [i·samples, (i+1)·samples), so the whole fit is reproducible for a
/// fixed (seed, samples) regardless of worker count.
pub fn estimate_ground_energy(
    h: &Hamiltonian,
    n0: usize,
    t_grid: &[f64],
    samples: u64,
    seed: u64,
    workers: usize,
    mode: JumpMode,
) -> Result<EnergyFit, EprError> {
    if t_grid.len() < 3 {
        return Err(EprError::BadGrid(format!("need at least 3 points, got {}", t_grid.len())));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid[0] <= 0.0 {
        return Err(EprError::BadGrid("grid must be positive and strictly ascending".into()));
    }
    let mut points = Vec::with_capacity(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        let acc = parallel_accumulate(samples, seed, i as u64 * samples, workers, |rng| {
            let traj = sample_trajectory(h, n0, t, mode, rng);
            Some((traj.log_weight, traj.sign))
        });
        points.push(EprEstimate::from_accum(&acc, t, mode));
    }
    for p in &points {
        if p.mean_sign.abs() < 0.01 {
            return Err(EprError::SignCollapse { t: p.t, mean_sign: p.mean_sign });
        }
        if !p.mean_positive || !p.log_abs_mean.is_finite() {
            return Err(EprError::NonPositiveMean { t: p.t });
        }
    }
    // y = −ln mean decays with slope = ground energy; σ_y by the delta method.
    let ys: Vec<f64> = points.iter().map(|p| -p.log_abs_mean).collect();
    let sigmas: Vec<f64> = points
        .iter()
        .map(|p| (p.log_std_error - p.log_abs_mean).exp().max(1e-15))
        .collect();
    let (slope, slope_err) = wls_slope(t_grid, &ys, &sigmas);
    let curvature_warning = quadratic_visible(t_grid, &ys, &sigmas);
    Ok(EnergyFit { energy: slope, std_error: slope_err, points, curvature_warning })
}

fn wls_slope(ts: &[f64], ys: &[f64], sigmas: &[f64]) -> (f64, f64) {
    let mut sw = 0.0;
    let mut st = 0.0;
    let mut stt = 0.0;
    let mut sy = 0.0;
    let mut sty = 0.0;
    for ((&t, &y), &s) in ts.iter().zip(ys).zip(sigmas) {
        let w = 1.0 / (s * s);
        sw += w;
        st += w * t;
        stt += w * t * t;
        sy += w * y;
        sty += w * t * y;
    }
    let denom = sw * stt - st * st;
    ((sw * sty - st * sy) / denom, (sw / denom).sqrt())
}

/// Fit y = a + bt + ct² by weighted normal equations and report whether the
/// quadratic coefficient is more than 3σ from zero.
fn quadratic_visible(ts: &[f64], ys: &[f64], sigmas: &[f64]) -> bool {
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for ((&t, &y), &s) in ts.iter().zip(ys).zip(sigmas) {
        let w = 1.0 / (s * s);
        let row = [1.0, t, t * t];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
            atb[i] += w * row[i] * y;
        }
    }
    let inv = match invert3(&ata) {
        Some(inv) => inv,
        None => return false,
    };
    let c: f64 = (0..3).map(|j| inv[2][j] * atb[j]).sum();
    let sigma_c = inv[2][2].max(0.0).sqrt();
    sigma_c > 0.0 && c.abs() > 3.0 * sigma_c
}

fn invert3(a: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let mut inv = [[0.0f64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            // Cofactor transpose.
            inv[j][i] = (a[i1][j1] * a[i2][j2] - a[i1][j2] * a[i2][j1]) / det;
        }
    }
    Some(inv)
}

// ---------------------------------------------------------------------------
// First exit from a cavity.
// ---------------------------------------------------------------------------

/// Outcome of one first-exit draw of the natural jump chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirstExit {
    /// The chain crossed the boundary at time `tau` via link `from → to`.
    Exited { tau: f64, from: usize, to: usize, jumps: usize },
    /// Still inside the cavity at the censoring horizon.
    Censored { t_max: f64, last: usize },
}

/// Run the natural chain (dwell Exp(R), kernel η/R) from `n0` until it leaves
/// the cavity or reaches `t_max`.
pub fn sample_first_exit(
    h: &Hamiltonian,
    partition: &Partition,
    n0: usize,
    t_max: f64,
    rng: &mut impl Rng,
) -> Result<FirstExit, EprError> {
    if !partition.is_cavity(n0) {
        return Err(EprError::StateNotInCavity { state: n0 });
    }
    let mut n = n0;
    let mut now = 0.0f64;
    let mut jumps = 0usize;
    loop {
        let dwell = sample_exp(h.r(n), rng);
        if now + dwell >= t_max {
            return Ok(FirstExit::Censored { t_max, last: n });
        }
        now += dwell;
        jumps += 1;
        let link = pick_weighted(h, n, rng);
        if !partition.is_cavity(link.to) {
            return Ok(FirstExit::Exited { tau: now, from: n, to: link.to, jumps });
        }
        n = link.to;
    }
}

// ---------------------------------------------------------------------------
// Exit-time integral identity.
// ---------------------------------------------------------------------------

/// Monte Carlo vs quadrature comparison of the exit-time identity.
#[derive(Debug, Clone)]
pub struct LemmaCheck {
    /// MC estimate of E[1_{exit ≤ t} · exp(∫₀^τ (R−V) ds)].
    pub lhs: f64,
    pub lhs_std_error: f64,
    /// ∫₀ᵗ Σ_{boundary b} R_out(b) [e^{−H̄x}]_{b,n₀} dx by adaptive quadrature.
    pub rhs: f64,
    /// Fraction of trajectories censored at the horizon (contributing zero).
    pub censored_fraction: f64,
    /// |lhs − rhs| within 3 standard errors (or within 1e-12 relative).
    pub agrees: bool,
}

/// Check the identity between the exit-censored trajectory functional and the
/// restricted-propagator boundary flux integral.
///
/// Requires the cavity region to be sign-free: every link incident to a
/// cavity state — internal or crossing — must have λ = +1, so the functional
/// carries no signs. The restricted operator H̄ keeps the original potential.
pub fn check_exit_lemma(
    h: &Hamiltonian,
    partition: &Partition,
    n0: usize,
    t: f64,
    samples: u64,
    seed: u64,
    workers: usize,
) -> Result<LemmaCheck, EprError> {
    if !partition.is_cavity(n0) {
        return Err(EprError::StateNotInCavity { state: n0 });
    }
    for &n in partition.cavity() {
        if h.links(n).iter().any(|l| l.lambda < 0) {
            return Err(EprError::NonStoquasticRegion { state: n });
        }
    }

    // Monte Carlo side: natural chain, weight accumulated with the full R,
    // value taken at the first boundary crossing, zero if censored.
    let acc = parallel_accumulate(samples, seed, 0, workers, |rng| {
        let mut n = n0;
        let mut now = 0.0f64;
        let mut logw = 0.0f64;
        loop {
            let dwell = sample_exp(h.r(n), rng);
            if now + dwell >= t {
                return None; // censored: contributes exactly zero
            }
            logw += (h.r(n) - h.v(n)) * dwell;
            now += dwell;
            let link = pick_weighted(h, n, rng);
            if !partition.is_cavity(link.to) {
                return Some((logw, 1));
            }
            n = link.to;
        }
    });
    let est = EprEstimate::from_accum(&acc, t, JumpMode::LinkRate);
    let lhs = est.mean();
    let lhs_std_error = est.std_error();
    let censored_fraction = 1.0 - est.mean_sign;

    // Quadrature side: boundary flux through the restricted propagator.
    let cavity = partition.cavity();
    let rhs = if cavity.len() == 1 {
        let n = cavity[0];
        let (r_out, v) = (partition.r_out(n), h.v(n));
        // ∫₀ᵗ R_out e^{−Vx} dx, with the V → 0 limit handled exactly.
        if v.abs() < 1e-300 {
            r_out * t
        } else {
            r_out * (1.0 - (-v * t).exp()) / v
        }
    } else {
        let sub = h.restrict(cavity)?;
        let prop = Propagator::new(&sub);
        let local = |global: usize| cavity.binary_search(&global).expect("cavity id");
        let mut e0 = vec![0.0f64; cavity.len()];
        e0[local(n0)] = 1.0;
        let boundary: Vec<(usize, f64)> = partition
            .cavity_boundary()
            .iter()
            .map(|&b| (local(b), partition.r_out(b)))
            .collect();
        let g = |x: f64| -> f64 {
            let col = prop.apply(&e0, x);
            boundary.iter().map(|&(b, r)| r * col[b]).sum()
        };
        adaptive_simpson(&g, 0.0, t, 1e-8)
    };

    let agrees = (lhs - rhs).abs() <= 3.0 * lhs_std_error
        || (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0);
    Ok(LemmaCheck { lhs, lhs_std_error, rhs, censored_fraction, agrees })
}

// ---------------------------------------------------------------------------
// Boundary-coupling series reconstruction.
// ---------------------------------------------------------------------------

/// Term-by-term reconstruction of the propagator sum from the side energies
/// and the boundary coupling.
#[derive(Debug, Clone)]
pub struct SeriesReconstruction {
    pub t: f64,
    /// Δ = Ẽ − Ē, the energy detuning entering the nested time integrals.
    pub delta: f64,
    /// Terms (−K_out·π̄)^k · J_k(t; Δ), starting at k = 0 (which is 1).
    pub terms: Vec<f64>,
    /// Σ terms.
    pub sum: f64,
    /// ln of the reconstructed value: −Ẽ·t + ln|sum|.
    pub log_abs_value: f64,
    /// e^{−Ẽt}·sum; may overflow for extreme parameters — the log form is
    /// the authoritative one.
    pub value: f64,
}

impl SeriesReconstruction {
    /// Decay-rate estimate between two reconstructions at different times.
    pub fn extracted_energy(&self, later: &SeriesReconstruction) -> f64 {
        -(later.log_abs_value - self.log_abs_value) / (later.t - self.t)
    }
}

/// Sum the boundary-coupling series at time t.
///
/// J_0 = 1 and J_k(t; Δ) = ∫₀ᵗ e^{Δs} s^{k−1}/(k−1)! ds; at Δ = 0 these
/// collapse to t^k/k! and the reconstruction is exactly exp(−(Ē + π̄K_out)t).
/// Fails if the last term has not decayed below 1e-12 of the partial sum.
pub fn series_reconstruction(
    e_tilde: f64,
    e_bar: f64,
    pibar: f64,
    kout: f64,
    t: f64,
    k_max: usize,
) -> Result<SeriesReconstruction, EprError> {
    assert!(t > 0.0, "time must be positive");
    assert!(k_max >= 1, "need at least one series term");
    let delta = e_tilde - e_bar;
    let x = -kout * pibar;
    let mut terms = Vec::with_capacity(k_max + 1);
    terms.push(1.0);
    if delta.abs() * t < 1e-14 {
        // J_k = t^k/k! by the stable running product.
        let mut jk = 1.0f64;
        for k in 1..=k_max {
            jk *= t / k as f64;
            terms.push(x.powi(k as i32) * jk);
        }
    } else {
        // ln((k−1)!) running sum guards the integrand against overflow.
        let mut ln_fact = 0.0f64; // ln((k−1)!) for the current k
        for k in 1..=k_max {
            if k > 1 {
                ln_fact += ((k - 1) as f64).ln();
            }
            let jk = if k == 1 {
                adaptive_simpson(&|s: f64| (delta * s).exp(), 0.0, t, 1e-12)
            } else {
                let f = |s: f64| -> f64 {
                    if s <= 0.0 {
                        0.0
                    } else {
                        (delta * s + (k as f64 - 1.0) * s.ln() - ln_fact).exp()
                    }
                };
                adaptive_simpson(&f, 0.0, t, 1e-12)
            };
            terms.push(x.powi(k as i32) * jk);
        }
    }
    let sum: f64 = terms.iter().sum();
    let last = terms[k_max].abs();
    if last > 1e-12 * sum.abs() {
        return Err(EprError::TruncationNotConverged { k_max, ratio: last / sum.abs() });
    }
    let log_abs_value = -e_tilde * t + sum.abs().ln();
    Ok(SeriesReconstruction { t, delta, terms, sum, log_abs_value, value: (-e_tilde * t).exp() * sum })
}
