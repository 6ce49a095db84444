//! Finite state graphs for lattice Hamiltonians H = K + V.
//!
//! A system lives on M basis states (dense ids `0..M`; spin configurations are
//! bitmasks). The potential V is a real value per state. The kinetic part K is
//! a sparse symmetric off-diagonal matrix; every stored link (n, n′) carries an
//! amplitude η > 0 and a sign λ = ±1 with K(n, n′) = −λ·η, so λ = +1 links
//! lower the energy of symmetric superpositions (stoquastic case) and λ = −1
//! links frustrate them.
//!
//! Derived per-state quantities used throughout the crate:
//!
//! * `A(n)` — number of links at n (active-link count),
//! * `R(n) = Σ_{n′~n} η(n, n′)` — weighted degree, the total jump rate of the
//!   natural continuous-time chain,
//! * transition kernel `P(n, n′) = η(n, n′)/R(n)` (row-stochastic),
//! * invariant measure `π(n) = R(n)/Σ_m R(m)`, which is stationary for P and
//!   obeys `π(n) ≤ (R(n)/min_m R(m))/M`.
//!
//! A [`Partition`] splits the states into a cavity F̄ and a reservoir F̃ and
//! carries the per-state link splits (A_in/A_out, R_in/R_out relative to each
//! state's own side), the internal boundaries, and the measure fractions
//! p̄ = |F̄|/M and π̄ = Σ_{F̄} π. [`Hamiltonian::restrict`] cuts a subsystem out
//! of the graph, and [`Hamiltonian::star`] builds the absorbing-wall operator
//! H* over the cavity (sign-free kinetic, potential = full weighted degree R)
//! whose ground energy is the asymptotic first-exit rate.

use thiserror::Error;

/// Errors raised while building or partitioning state graphs.
#[derive(Debug, Error)]
pub enum FockError {
    /// The adjacency graph does not connect all M states.
    #[error("state graph is disconnected: state {state} is not reachable from state 0")]
    DisconnectedGraph { state: usize },
    /// A state has no kinetic link at all (R(n) = 0), so the jump chain
    /// cannot leave it and the invariant measure is undefined.
    #[error("state {state} has no kinetic links")]
    IsolatedState { state: usize },
    /// The same unordered pair appeared twice in the link list.
    #[error("duplicate kinetic link ({i}, {j})")]
    DuplicateLink { i: usize, j: usize },
    /// A link (n, n) was supplied; diagonal terms belong to the potential.
    #[error("kinetic entry on the diagonal at state {state}")]
    DiagonalKinetic { state: usize },
    /// Fewer than two states.
    #[error("a state graph needs at least 2 states (got {m})")]
    TooSmall { m: usize },
    /// A link endpoint or an explicit state id is out of `0..M`.
    #[error("state id {id} out of range (M = {m})")]
    StateOutOfRange { id: usize, m: usize },
    /// A kinetic value of exactly zero encodes no link.
    #[error("kinetic link ({i}, {j}) has zero amplitude")]
    ZeroAmplitude { i: usize, j: usize },
    /// Potential length does not match M.
    #[error("potential has {got} entries, expected {m}")]
    PotentialLength { got: usize, m: usize },
    /// A partition needs a nonempty cavity.
    #[error("cavity is empty")]
    EmptyCavity,
    /// A partition needs a nonempty reservoir.
    #[error("reservoir is empty (cavity covers all states)")]
    EmptyReservoir,
    /// Level index out of `1..=m` for this potential.
    #[error("level index {l} out of range (the potential has {m} levels)")]
    LevelOutOfRange { l: usize, m: usize },
    /// An operation received an empty id set.
    #[error("empty state-id set")]
    EmptyStateSet,
}

/// One kinetic link as seen from a fixed state: partner id, amplitude η > 0,
/// sign λ = ±1. The matrix element is K = −λ·η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub to: usize,
    pub eta: f64,
    pub lambda: i8,
}

/// Sparse symmetric lattice Hamiltonian H = K + V over M ≥ 2 dense state ids.
///
/// Invariants (enforced by [`Hamiltonian::new`]): η > 0 on every link, no
/// diagonal kinetic entries, no duplicate links, every state has A(n) ≥ 1,
/// and the adjacency graph is connected. Restricted operators produced
/// internally (single-state subsystems) may relax the size and degree
/// invariants; they are documented where they occur.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    size_scale: f64,
    potential: Vec<f64>,
    adj: Vec<Vec<Link>>,
    weighted_degree: Vec<f64>,
    bipartite: bool,
}

impl Hamiltonian {
    /// Build a Hamiltonian from the potential and a list of signed kinetic
    /// matrix elements `(i, j, K(i,j))` with `i != j`. The sign convention is
    /// K = −λ·η: a negative stored value is a λ = +1 (stoquastic) link.
    ///
    /// `size_scale` is the extensive size parameter N used for densities
    /// (energy per N); it does not enter the matrix itself.
    pub fn new(
        m: usize,
        size_scale: f64,
        potential: Vec<f64>,
        links: &[(usize, usize, f64)],
    ) -> Result<Self, FockError> {
        if m < 2 {
            return Err(FockError::TooSmall { m });
        }
        if potential.len() != m {
            return Err(FockError::PotentialLength { got: potential.len(), m });
        }
        let mut adj: Vec<Vec<Link>> = vec![Vec::new(); m];
        for &(i, j, value) in links {
            for id in [i, j] {
                if id >= m {
                    return Err(FockError::StateOutOfRange { id, m });
                }
            }
            if i == j {
                return Err(FockError::DiagonalKinetic { state: i });
            }
            if value == 0.0 || !value.is_finite() {
                return Err(FockError::ZeroAmplitude { i, j });
            }
            if adj[i].iter().any(|l| l.to == j) {
                return Err(FockError::DuplicateLink { i: i.min(j), j: i.max(j) });
            }
            let lambda: i8 = if value < 0.0 { 1 } else { -1 };
            let eta = value.abs();
            adj[i].push(Link { to: j, eta, lambda });
            adj[j].push(Link { to: i, eta, lambda });
        }
        for row in &mut adj {
            row.sort_by_key(|l| l.to);
        }
        Self::from_adjacency(size_scale, potential, adj)
    }

    /// Finish construction from a symmetric adjacency structure, checking the
    /// degree and connectivity invariants.
    fn from_adjacency(
        size_scale: f64,
        potential: Vec<f64>,
        adj: Vec<Vec<Link>>,
    ) -> Result<Self, FockError> {
        let m = potential.len();
        if let Some(state) = adj.iter().position(|row| row.is_empty()) {
            return Err(FockError::IsolatedState { state });
        }
        // Single BFS: reachability and 2-colorability.
        let mut color = vec![-1i8; m];
        let mut queue = std::collections::VecDeque::new();
        color[0] = 0;
        queue.push_back(0usize);
        let mut seen = 1usize;
        let mut bipartite = true;
        while let Some(n) = queue.pop_front() {
            for l in &adj[n] {
                if color[l.to] < 0 {
                    color[l.to] = 1 - color[n];
                    seen += 1;
                    queue.push_back(l.to);
                } else if color[l.to] == color[n] {
                    bipartite = false;
                }
            }
        }
        if seen != m {
            let state = color.iter().position(|&c| c < 0).unwrap();
            return Err(FockError::DisconnectedGraph { state });
        }
        let weighted_degree = adj
            .iter()
            .map(|row| row.iter().map(|l| l.eta).sum())
            .collect();
        Ok(Self { size_scale, potential, adj, weighted_degree, bipartite })
    }

    /// Internal constructor for restricted operators. Permits M = 1 with an
    /// empty kinetic part; all multi-state invariants must hold already.
    pub(crate) fn from_parts_unchecked(
        size_scale: f64,
        potential: Vec<f64>,
        adj: Vec<Vec<Link>>,
    ) -> Self {
        let weighted_degree = adj
            .iter()
            .map(|row| row.iter().map(|l| l.eta).sum())
            .collect();
        Self { size_scale, potential, adj, weighted_degree, bipartite: true }
    }

    /// Number of basis states M.
    pub fn dim(&self) -> usize {
        self.potential.len()
    }

    /// Extensive size parameter N used for energy densities.
    pub fn size_scale(&self) -> f64 {
        self.size_scale
    }

    /// Potential value V(n).
    pub fn v(&self, n: usize) -> f64 {
        self.potential[n]
    }

    /// The whole potential vector.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Smallest potential value V₁ (the ground energy is always ≤ V₁).
    pub fn v_min(&self) -> f64 {
        self.potential.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Links at state n, sorted by partner id.
    pub fn links(&self, n: usize) -> &[Link] {
        &self.adj[n]
    }

    /// Active-link count A(n).
    pub fn a(&self, n: usize) -> usize {
        self.adj[n].len()
    }

    /// Weighted degree R(n) = Σ η over the links at n.
    pub fn r(&self, n: usize) -> f64 {
        self.weighted_degree[n]
    }

    pub fn min_r(&self) -> f64 {
        self.weighted_degree.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_r(&self) -> f64 {
        self.weighted_degree.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest link amplitude max η.
    pub fn max_eta(&self) -> f64 {
        self.adj
            .iter()
            .flat_map(|row| row.iter().map(|l| l.eta))
            .fold(0.0, f64::max)
    }

    /// Kinetic matrix element K(i, j) = −λ·η, or 0 when unlinked.
    pub fn kinetic(&self, i: usize, j: usize) -> f64 {
        self.adj[i]
            .iter()
            .find(|l| l.to == j)
            .map(|l| -f64::from(l.lambda) * l.eta)
            .unwrap_or(0.0)
    }

    /// Iterate the canonical link list as `(i, j, K(i,j))` with i < j.
    pub fn kinetic_links(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .filter(move |l| l.to > i)
                .map(move |l| (i, l.to, -f64::from(l.lambda) * l.eta))
        })
    }

    /// True when every link has λ = +1 (no sign problem).
    pub fn is_stoquastic(&self) -> bool {
        self.adj.iter().all(|row| row.iter().all(|l| l.lambda == 1))
    }

    /// True when the adjacency graph is 2-colorable. Bipartite adjacency makes
    /// the embedded discrete-time chain periodic; it is harmless for the
    /// continuous-time dynamics used here, so it is informational only.
    pub fn is_bipartite(&self) -> bool {
        self.bipartite
    }

    /// y = H x (dense vectors).
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(y.len(), self.dim());
        for (n, yn) in y.iter_mut().enumerate() {
            let mut acc = self.potential[n] * x[n];
            for l in &self.adj[n] {
                acc -= f64::from(l.lambda) * l.eta * x[l.to];
            }
            *yn = acc;
        }
    }

    /// ∞-norm of H: max over states of |V(n)| + R(n).
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim())
            .map(|n| self.potential[n].abs() + self.weighted_degree[n])
            .fold(0.0, f64::max)
    }

    /// Row-stochastic jump kernel P(n, n′) = η(n, n′)/R(n).
    pub fn transition_kernel(&self) -> TransitionKernel {
        let rows: Vec<Vec<(usize, f64)>> = (0..self.dim())
            .map(|n| {
                let r = self.weighted_degree[n];
                self.adj[n].iter().map(|l| (l.to, l.eta / r)).collect()
            })
            .collect();
        for row in &rows {
            let sum: f64 = row.iter().map(|&(_, p)| p).sum();
            assert!(
                (sum - 1.0).abs() <= 1e-12,
                "kernel row sum {sum} deviates from 1 beyond 1e-12"
            );
        }
        TransitionKernel { rows }
    }

    /// Invariant probability measure π(n) = R(n)/Σ_m R(m) of the jump kernel.
    ///
    /// Verifies stationarity (‖πᵀP − πᵀ‖∞ ≤ 1e-12) and the dominance bound
    /// π(n) ≤ (R(n)/min R)/M before returning.
    pub fn invariant_measure(&self) -> Vec<f64> {
        let total: f64 = self.weighted_degree.iter().sum();
        let pi: Vec<f64> = self.weighted_degree.iter().map(|r| r / total).collect();
        let res = self.stationarity_residual(&pi);
        assert!(res <= 1e-12, "invariant measure residual {res} exceeds 1e-12");
        let min_r = self.min_r();
        let m = self.dim() as f64;
        for (n, &p) in pi.iter().enumerate() {
            let bound = self.weighted_degree[n] / min_r / m;
            assert!(
                p <= bound * (1.0 + 1e-12),
                "measure bound violated at state {n}: {p} > {bound}"
            );
        }
        pi
    }

    /// ‖πᵀP − πᵀ‖∞ for a candidate measure π.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        let mut image = vec![0.0f64; self.dim()];
        for n in 0..self.dim() {
            let r = self.weighted_degree[n];
            for l in &self.adj[n] {
                image[l.to] += pi[n] * l.eta / r;
            }
        }
        image
            .iter()
            .zip(pi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Distinct potential levels in ascending order, merged with absolute
    /// tolerance 1e-12; weights are state counts divided by M.
    pub fn level_density(&self) -> LevelDensity {
        let m = self.dim();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| self.potential[a].total_cmp(&self.potential[b]));
        let mut levels = Vec::new();
        let mut counts = Vec::new();
        let mut state_level = vec![0usize; m];
        for &n in &order {
            let v = self.potential[n];
            match levels.last() {
                Some(&head) if (v - head) <= 1e-12 => {
                    *counts.last_mut().unwrap() += 1;
                }
                _ => {
                    levels.push(v);
                    counts.push(1usize);
                }
            }
            state_level[n] = levels.len() - 1;
        }
        let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / m as f64).collect();
        let total: f64 = weights.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12, "level weights sum to {total}");
        LevelDensity { levels, weights, counts, state_level }
    }

    /// Restrict the system to `ids`: keep the induced links and potential, and
    /// reindex states to `0..ids.len()` in ascending id order.
    ///
    /// A state that loses all its links — including the single-state case —
    /// is reported as [`FockError::IsolatedState`]; callers that accept the
    /// single-state convention (energy = V(n̄)) handle it explicitly.
    pub fn restrict(&self, ids: &[usize]) -> Result<Hamiltonian, FockError> {
        let ids = sorted_unique(ids, self.dim())?;
        if ids.len() == 1 {
            return Err(FockError::IsolatedState { state: ids[0] });
        }
        let mut local = vec![usize::MAX; self.dim()];
        for (k, &n) in ids.iter().enumerate() {
            local[n] = k;
        }
        let potential: Vec<f64> = ids.iter().map(|&n| self.potential[n]).collect();
        let adj: Vec<Vec<Link>> = ids
            .iter()
            .map(|&n| {
                self.adj[n]
                    .iter()
                    .filter(|l| local[l.to] != usize::MAX)
                    .map(|l| Link { to: local[l.to], ..*l })
                    .collect()
            })
            .collect();
        // Re-check the structural invariants on the induced graph, mapping
        // local ids back to the caller's ids in errors.
        match Hamiltonian::from_adjacency(self.size_scale, potential, adj) {
            Ok(h) => Ok(h),
            Err(FockError::IsolatedState { state }) => {
                Err(FockError::IsolatedState { state: ids[state] })
            }
            Err(FockError::DisconnectedGraph { state }) => {
                Err(FockError::DisconnectedGraph { state: ids[state] })
            }
            Err(e) => Err(e),
        }
    }

    /// Absorbing-wall operator H* over the cavity: kinetic entries −η on the
    /// cavity-internal links regardless of their sign in H, potential
    /// V*(n) = R(n) with the **full** weighted degree of the parent system.
    ///
    /// Its ground energy E* > 0 is the asymptotic decay rate of the
    /// first-exit-time density; replacing V* by R_in instead gives exactly 0
    /// (the chain never leaves) — both facts are asserted by the spectral
    /// layer. A single-state cavity is legal here: H* = [R(n̄)].
    pub fn star(&self, partition: &Partition) -> Result<Hamiltonian, FockError> {
        let ids = partition.cavity();
        let potential: Vec<f64> = ids.iter().map(|&n| self.r(n)).collect();
        let mut local = vec![usize::MAX; self.dim()];
        for (k, &n) in ids.iter().enumerate() {
            local[n] = k;
        }
        let adj: Vec<Vec<Link>> = ids
            .iter()
            .map(|&n| {
                self.adj[n]
                    .iter()
                    .filter(|l| local[l.to] != usize::MAX)
                    .map(|l| Link { to: local[l.to], eta: l.eta, lambda: 1 })
                    .collect()
            })
            .collect();
        if ids.len() == 1 {
            return Ok(Hamiltonian::from_parts_unchecked(self.size_scale, potential, adj));
        }
        match Hamiltonian::from_adjacency(self.size_scale, potential, adj) {
            Ok(h) => Ok(h),
            Err(FockError::IsolatedState { state }) => {
                Err(FockError::IsolatedState { state: ids[state] })
            }
            Err(FockError::DisconnectedGraph { state }) => {
                Err(FockError::DisconnectedGraph { state: ids[state] })
            }
            Err(e) => Err(e),
        }
    }
}

/// Row-stochastic jump kernel of the natural continuous-time chain.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    rows: Vec<Vec<(usize, f64)>>,
}

impl TransitionKernel {
    /// Jump probabilities `(target, probability)` out of state n.
    pub fn row(&self, n: usize) -> &[(usize, f64)] {
        &self.rows[n]
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }
}

/// Distinct potential levels with their state fractions.
#[derive(Debug, Clone)]
pub struct LevelDensity {
    /// Level values, ascending.
    pub levels: Vec<f64>,
    /// State fraction per level (counts/M); sums to 1.
    pub weights: Vec<f64>,
    /// State count per level.
    pub counts: Vec<usize>,
    /// Level index of every state.
    pub state_level: Vec<usize>,
}

impl LevelDensity {
    /// Number of distinct levels m.
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// A cavity/reservoir split of the state space with per-state link splits.
///
/// For every state, `a_in`/`r_in` count links that stay on the state's own
/// side and `a_out`/`r_out` links that cross to the other side; the boundary
/// of each side is the set of its states with at least one crossing link.
#[derive(Debug, Clone)]
pub struct Partition {
    cavity: Vec<usize>,
    reservoir: Vec<usize>,
    in_cavity: Vec<bool>,
    cavity_boundary: Vec<usize>,
    reservoir_boundary: Vec<usize>,
    a_in: Vec<usize>,
    a_out: Vec<usize>,
    r_in: Vec<f64>,
    r_out: Vec<f64>,
    r_out_pos: Vec<f64>,
    r_out_neg: Vec<f64>,
    pbar: f64,
    pibar: f64,
    cavity_connected: bool,
}

impl Partition {
    /// Split the states of `h` into the given cavity and its complement.
    /// Duplicate ids are tolerated; the cavity must be a nonempty proper
    /// subset. Also reports whether the cavity is internally connected.
    pub fn new(h: &Hamiltonian, cavity_ids: &[usize]) -> Result<Self, FockError> {
        let m = h.dim();
        if cavity_ids.is_empty() {
            return Err(FockError::EmptyCavity);
        }
        let cavity = sorted_unique(cavity_ids, m)?;
        if cavity.len() == m {
            return Err(FockError::EmptyReservoir);
        }
        let mut in_cavity = vec![false; m];
        for &n in &cavity {
            in_cavity[n] = true;
        }
        let reservoir: Vec<usize> = (0..m).filter(|&n| !in_cavity[n]).collect();

        let mut a_in = vec![0usize; m];
        let mut a_out = vec![0usize; m];
        let mut r_in = vec![0.0f64; m];
        let mut r_out = vec![0.0f64; m];
        let mut r_out_pos = vec![0.0f64; m];
        let mut r_out_neg = vec![0.0f64; m];
        for n in 0..m {
            for l in h.links(n) {
                if in_cavity[l.to] == in_cavity[n] {
                    a_in[n] += 1;
                    r_in[n] += l.eta;
                } else {
                    a_out[n] += 1;
                    r_out[n] += l.eta;
                    if l.lambda == 1 {
                        r_out_pos[n] += l.eta;
                    } else {
                        r_out_neg[n] += l.eta;
                    }
                }
            }
        }
        let cavity_boundary: Vec<usize> =
            cavity.iter().cloned().filter(|&n| a_out[n] > 0).collect();
        let reservoir_boundary: Vec<usize> =
            reservoir.iter().cloned().filter(|&n| a_out[n] > 0).collect();

        let total_r: f64 = (0..m).map(|n| h.r(n)).sum();
        let cavity_r: f64 = cavity.iter().map(|&n| h.r(n)).sum();
        let pbar = cavity.len() as f64 / m as f64;
        let pibar = cavity_r / total_r;

        // Connectivity of the induced cavity graph.
        let mut seen = vec![false; m];
        let mut queue = std::collections::VecDeque::new();
        seen[cavity[0]] = true;
        queue.push_back(cavity[0]);
        let mut reached = 1usize;
        while let Some(n) = queue.pop_front() {
            for l in h.links(n) {
                if in_cavity[l.to] && !seen[l.to] {
                    seen[l.to] = true;
                    reached += 1;
                    queue.push_back(l.to);
                }
            }
        }
        let cavity_connected = reached == cavity.len();

        Ok(Self {
            cavity,
            reservoir,
            in_cavity,
            cavity_boundary,
            reservoir_boundary,
            a_in,
            a_out,
            r_in,
            r_out,
            r_out_pos,
            r_out_neg,
            pbar,
            pibar,
            cavity_connected,
        })
    }

    /// Cavity = all states on potential level `l` (1-based index into the
    /// ascending level list of [`Hamiltonian::level_density`]).
    pub fn from_level(h: &Hamiltonian, l: usize) -> Result<Self, FockError> {
        let density = h.level_density();
        if l == 0 || l > density.len() {
            return Err(FockError::LevelOutOfRange { l, m: density.len() });
        }
        let ids: Vec<usize> = (0..h.dim())
            .filter(|&n| density.state_level[n] == l - 1)
            .collect();
        Self::new(h, &ids)
    }

    /// Cavity state ids, ascending.
    pub fn cavity(&self) -> &[usize] {
        &self.cavity
    }

    /// Reservoir state ids, ascending.
    pub fn reservoir(&self) -> &[usize] {
        &self.reservoir
    }

    pub fn is_cavity(&self, n: usize) -> bool {
        self.in_cavity[n]
    }

    /// Cavity states with at least one link into the reservoir (∂F̄).
    pub fn cavity_boundary(&self) -> &[usize] {
        &self.cavity_boundary
    }

    /// Reservoir states with at least one link into the cavity (∂F̃).
    pub fn reservoir_boundary(&self) -> &[usize] {
        &self.reservoir_boundary
    }

    /// Links from n staying on n's own side.
    pub fn a_in(&self, n: usize) -> usize {
        self.a_in[n]
    }

    /// Links from n crossing to the other side.
    pub fn a_out(&self, n: usize) -> usize {
        self.a_out[n]
    }

    /// Weighted degree of n within its own side.
    pub fn r_in(&self, n: usize) -> f64 {
        self.r_in[n]
    }

    /// Weighted degree of n toward the other side.
    pub fn r_out(&self, n: usize) -> f64 {
        self.r_out[n]
    }

    /// λ = +1 part of `r_out`.
    pub fn r_out_pos(&self, n: usize) -> f64 {
        self.r_out_pos[n]
    }

    /// λ = −1 part of `r_out`.
    pub fn r_out_neg(&self, n: usize) -> f64 {
        self.r_out_neg[n]
    }

    /// State fraction of the cavity, p̄ = |F̄|/M.
    pub fn pbar(&self) -> f64 {
        self.pbar
    }

    /// Invariant-measure fraction of the cavity, π̄ = Σ_{F̄} π(n).
    pub fn pibar(&self) -> f64 {
        self.pibar
    }

    /// Whether the induced cavity graph is connected.
    pub fn cavity_connected(&self) -> bool {
        self.cavity_connected
    }

    /// Smallest crossing weight on the cavity boundary, min_{∂F̄} R_out.
    pub fn min_boundary_exit_rate(&self) -> f64 {
        self.cavity_boundary
            .iter()
            .map(|&n| self.r_out[n])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sort, deduplicate and range-check a state id list.
fn sorted_unique(ids: &[usize], m: usize) -> Result<Vec<usize>, FockError> {
    if ids.is_empty() {
        return Err(FockError::EmptyStateSet);
    }
    let mut v = ids.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&id) = v.iter().find(|&&id| id >= m) {
        return Err(FockError::StateOutOfRange { id, m });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Path 0–1–2 with unit amplitudes.
    fn path3() -> Hamiltonian {
        Hamiltonian::new(3, 3.0, vec![0.0; 3], &[(0, 1, -1.0), (1, 2, -1.0)]).unwrap()
    }

    /// Hypercube over N bits, amplitude γ, zero potential.
    fn hypercube(n_bits: usize, gamma: f64) -> Hamiltonian {
        let m = 1usize << n_bits;
        let mut links = Vec::new();
        for n in 0..m {
            for b in 0..n_bits {
                let p = n ^ (1 << b);
                if p > n {
                    links.push((n, p, -gamma));
                }
            }
        }
        Hamiltonian::new(m, n_bits as f64, vec![0.0; m], &links).unwrap()
    }

    #[test]
    fn path_weighted_degrees_and_measure() {
        let h = path3();
        assert_eq!([h.r(0), h.r(1), h.r(2)], [1.0, 2.0, 1.0]);
        assert_eq!([h.a(0), h.a(1), h.a(2)], [1, 2, 1]);
        let pi = h.invariant_measure();
        assert_relative_eq!(pi[0], 0.25, max_relative = 1e-15);
        assert_relative_eq!(pi[1], 0.50, max_relative = 1e-15);
        assert_relative_eq!(pi[2], 0.25, max_relative = 1e-15);
        assert!(h.stationarity_residual(&pi) <= 1e-12);
    }

    #[test]
    fn kernel_rows_are_stochastic() {
        let h = Hamiltonian::new(
            3,
            3.0,
            vec![0.0, 0.5, -0.5],
            &[(0, 1, -1.0), (1, 2, -0.6), (0, 2, 0.8)],
        )
        .unwrap();
        let k = h.transition_kernel();
        for n in 0..3 {
            let sum: f64 = k.row(n).iter().map(|&(_, p)| p).sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
        // Signed link: λ = −1, η = 0.8 enters the kernel by amplitude only.
        assert_eq!(h.kinetic(0, 2), 0.8);
        assert!(!h.is_stoquastic());
        assert_relative_eq!(k.row(0)[1].1, 0.8 / 1.8, max_relative = 1e-15);
    }

    #[test]
    fn sign_convention_splits_value() {
        let h = Hamiltonian::new(2, 1.0, vec![0.0, 0.0], &[(0, 1, -2.5)]).unwrap();
        let l = h.links(0)[0];
        assert_eq!((l.eta, l.lambda), (2.5, 1));
        assert_eq!(h.kinetic(0, 1), -2.5);
        assert!(h.is_stoquastic());
    }

    #[test]
    fn construction_errors() {
        let e = Hamiltonian::new(1, 1.0, vec![0.0], &[]).unwrap_err();
        assert!(matches!(e, FockError::TooSmall { m: 1 }));

        let e = Hamiltonian::new(2, 1.0, vec![0.0; 2], &[(0, 0, -1.0)]).unwrap_err();
        assert!(matches!(e, FockError::DiagonalKinetic { state: 0 }));

        let e =
            Hamiltonian::new(2, 1.0, vec![0.0; 2], &[(0, 1, -1.0), (1, 0, -2.0)]).unwrap_err();
        assert!(matches!(e, FockError::DuplicateLink { i: 0, j: 1 }));

        let e = Hamiltonian::new(3, 1.0, vec![0.0; 3], &[(0, 1, -1.0)]).unwrap_err();
        assert!(matches!(e, FockError::IsolatedState { state: 2 }));

        let e = Hamiltonian::new(
            4,
            1.0,
            vec![0.0; 4],
            &[(0, 1, -1.0), (2, 3, -1.0)],
        )
        .unwrap_err();
        assert!(matches!(e, FockError::DisconnectedGraph { .. }));
    }

    #[test]
    fn level_merge_uses_absolute_tolerance() {
        let h = Hamiltonian::new(
            3,
            3.0,
            vec![0.0, 1e-13, 1.0],
            &[(0, 1, -1.0), (1, 2, -1.0)],
        )
        .unwrap();
        let d = h.level_density();
        assert_eq!(d.levels, vec![0.0, 1.0]);
        assert_eq!(d.counts, vec![2, 1]);
        assert_relative_eq!(d.weights[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(d.weights[1], 1.0 / 3.0, max_relative = 1e-15);
        assert_eq!(d.state_level, vec![0, 0, 1]);
    }

    #[test]
    fn hypercube_single_state_cavity_numbers() {
        let h = hypercube(3, 1.0);
        let p = Partition::new(&h, &[0]).unwrap();
        assert_eq!(p.cavity_boundary(), &[0]);
        assert_eq!(p.reservoir_boundary(), &[1, 2, 4]);
        assert_relative_eq!(p.r_out(0), 3.0, max_relative = 1e-15);
        assert_relative_eq!(p.pbar(), 1.0 / 8.0, max_relative = 1e-15);
        assert_relative_eq!(p.pibar(), 1.0 / 8.0, max_relative = 1e-15);
        assert!(p.cavity_connected());
        assert!(h.is_bipartite());
    }

    #[test]
    fn partition_splits_are_consistent() {
        let h = hypercube(4, 0.7);
        let p = Partition::new(&h, &[0, 1, 2, 3]).unwrap();
        for n in 0..h.dim() {
            assert_eq!(p.a_in(n) + p.a_out(n), h.a(n));
            assert_relative_eq!(p.r_in(n) + p.r_out(n), h.r(n), max_relative = 1e-14);
            assert_relative_eq!(
                p.r_out_pos(n) + p.r_out_neg(n),
                p.r_out(n),
                max_relative = 1e-14
            );
        }
        // Face {00xx} of the 4-cube: each cavity state has 2 internal and 2
        // crossing links.
        for &n in p.cavity() {
            assert_eq!((p.a_in(n), p.a_out(n)), (2, 2));
        }
        assert!(p.cavity_connected());
        // Measure-fraction bound: π̄ ≤ (max_{F̄} R/min R)·p̄.
        let max_cav_r = p.cavity().iter().map(|&n| h.r(n)).fold(0.0, f64::max);
        assert!(p.pibar() <= max_cav_r / h.min_r() * p.pbar() * (1.0 + 1e-12));
    }

    #[test]
    fn partition_errors() {
        let h = path3();
        assert!(matches!(
            Partition::new(&h, &[]).unwrap_err(),
            FockError::EmptyCavity
        ));
        assert!(matches!(
            Partition::new(&h, &[0, 1, 2]).unwrap_err(),
            FockError::EmptyReservoir
        ));
        assert!(matches!(
            Partition::new(&h, &[7]).unwrap_err(),
            FockError::StateOutOfRange { id: 7, m: 3 }
        ));
    }

    #[test]
    fn level_cavity_picks_lowest_level() {
        let h = Hamiltonian::new(
            4,
            2.0,
            vec![1.0, 0.0, 1.0, 0.0],
            &[(0, 1, -1.0), (1, 2, -1.0), (2, 3, -1.0), (3, 0, -1.0)],
        )
        .unwrap();
        let p = Partition::from_level(&h, 1).unwrap();
        assert_eq!(p.cavity(), &[1, 3]);
        assert!(!p.cavity_connected());
        let e = Partition::from_level(&h, 3).unwrap_err();
        assert!(matches!(e, FockError::LevelOutOfRange { l: 3, m: 2 }));
    }

    #[test]
    fn restrict_reindexes_and_flags_isolation() {
        let h = hypercube(3, 1.0);
        // Face {000, 001, 010, 011} stays connected.
        let sub = h.restrict(&[0, 1, 2, 3]).unwrap();
        assert_eq!(sub.dim(), 4);
        assert_eq!(sub.a(0), 2);
        assert_eq!(sub.kinetic(0, 1), -1.0);
        // Two antipodal states lose all links.
        let e = h.restrict(&[0, 7]).unwrap_err();
        assert!(matches!(e, FockError::IsolatedState { state: 0 }));
        // Single state: legal only through the explicit convention.
        let two = Hamiltonian::new(2, 1.0, vec![0.3, 0.9], &[(0, 1, -1.0)]).unwrap();
        let e = two.restrict(&[0]).unwrap_err();
        assert!(matches!(e, FockError::IsolatedState { state: 0 }));
    }

    #[test]
    fn star_has_full_degree_potential_and_positive_signs() {
        let h = Hamiltonian::new(
            4,
            2.0,
            vec![0.0, 0.0, 0.0, 0.0],
            &[(0, 1, 0.5), (0, 2, -1.0), (1, 3, -1.0), (2, 3, -2.0)],
        )
        .unwrap();
        let p = Partition::new(&h, &[0, 1]).unwrap();
        let star = h.star(&p).unwrap();
        // V* keeps the full parent weighted degree, kinetic flips to λ = +1.
        assert_relative_eq!(star.v(0), 1.5, max_relative = 1e-15);
        assert_relative_eq!(star.v(1), 1.5, max_relative = 1e-15);
        assert_eq!(star.kinetic(0, 1), -0.5);
        assert!(star.is_stoquastic());
        // Single-state cavity: H* = [R(n̄)].
        let p0 = Partition::new(&h, &[3]).unwrap();
        let star0 = h.star(&p0).unwrap();
        assert_eq!(star0.dim(), 1);
        assert_relative_eq!(star0.v(0), 3.0, max_relative = 1e-15);
    }
}
