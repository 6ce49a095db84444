//! Canonical model families used throughout the tests, benchmarks and the
//! command-line harness.
//!
//! Conventions shared by every builder:
//!
//! * the size scale N is log₂(M) and is stored on the Hamiltonian;
//! * level-based potentials are given as *intensive* densities v_l and are
//!   installed as V(n) = N·v_l(n), so energy densities E/N are comparable
//!   across sizes;
//! * the Gaussian landscape draws V directly with variance N·J²/2 (already
//!   extensive, no extra N factor);
//! * all randomness flows through seeded counter-mode streams, so a (family,
//!   parameters, seed) triple pins the instance exactly.

use crate::fock::{FockError, Hamiltonian, Partition};
use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Largest hypercube dimension the builders accept (adjacency stays in the
/// hundreds of megabytes).
pub const MAX_HYPERCUBE_BITS: u32 = 20;

/// Largest Gaussian-landscape dimension (dense diagonalization of nearby
/// sizes stays tractable).
pub const MAX_GAUSSIAN_BITS: u32 = 16;

/// Largest complete-graph state count.
pub const MAX_COMPLETE_STATES: usize = 4096;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("bit count {n_bits} outside the supported range 1..={max}")]
    SizeLimit { n_bits: u32, max: u32 },
    #[error("state count {m} outside the supported range 2..={max}")]
    StateLimit { m: usize, max: usize },
    #[error("hypercube kinetic needs a power-of-two state count, got {m}")]
    NotPowerOfTwo { m: usize },
    #[error("level values must be strictly ascending")]
    LevelsNotAscending,
    #[error("levels and weights must have equal nonzero length")]
    LengthMismatch,
    #[error("weights must be positive and sum to 1, got sum {sum}")]
    BadWeights { sum: f64 },
    #[error("two-level landscape needs v1 < v2")]
    BadLevels,
    #[error("kinetic amplitude must be positive, got {value}")]
    BadAmplitude { value: f64 },
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Kinetic graph used by the random-landscape builder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KineticSpec {
    /// N-bit hypercube, every link with amplitude Γ.
    Hypercube { gamma: f64 },
    /// Complete graph on M states, every link with amplitude η.
    CompleteGraph { eta: f64 },
}

impl std::fmt::Display for KineticSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KineticSpec::Hypercube { gamma } => write!(f, "hypercube:{gamma}"),
            KineticSpec::CompleteGraph { eta } => write!(f, "complete:{eta}"),
        }
    }
}

/// Descriptive record of how a model instance was built; rendered into the
/// `family` header of archived model files.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    HypercubeFree { n_bits: u32, gamma: f64 },
    TwoLevel { n_bits: u32, gamma: f64, v1: f64, v2: f64, cavity: Vec<usize> },
    RandomPotential { m: usize, levels: Vec<f64>, weights: Vec<f64>, kinetic: KineticSpec, seed: u64 },
    Gaussian { n_bits: u32, gamma: f64, j: f64, seed: u64 },
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelSpec::HypercubeFree { n_bits, gamma } => {
                write!(f, "hypercube-free N={n_bits} gamma={gamma}")
            }
            ModelSpec::TwoLevel { n_bits, gamma, v1, v2, cavity } => {
                write!(f, "two-level N={n_bits} gamma={gamma} v1={v1} v2={v2} cavity=")?;
                write_ids(f, cavity)
            }
            ModelSpec::RandomPotential { m, levels, weights, kinetic, seed } => {
                write!(f, "random-potential M={m} kinetic={kinetic} seed={seed} levels=")?;
                for (i, (l, w)) in levels.iter().zip(weights).enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{l}:{w}")?;
                }
                Ok(())
            }
            ModelSpec::Gaussian { n_bits, gamma, j, seed } => {
                write!(f, "gaussian N={n_bits} gamma={gamma} J={j} seed={seed}")
            }
        }
    }
}

fn write_ids(f: &mut std::fmt::Formatter<'_>, ids: &[usize]) -> std::fmt::Result {
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{id}")?;
    }
    Ok(())
}

fn hypercube_links(n_bits: u32, gamma: f64) -> Vec<(usize, usize, f64)> {
    let m = 1usize << n_bits;
    let mut links = Vec::with_capacity(m * n_bits as usize / 2);
    for n in 0..m {
        for b in 0..n_bits {
            let p = n ^ (1usize << b);
            if p > n {
                links.push((n, p, -gamma));
            }
        }
    }
    links
}

fn check_bits(n_bits: u32, max: u32) -> Result<(), ModelError> {
    if n_bits == 0 || n_bits > max {
        return Err(ModelError::SizeLimit { n_bits, max });
    }
    Ok(())
}

fn check_amplitude(value: f64) -> Result<(), ModelError> {
    if !(value > 0.0) {
        return Err(ModelError::BadAmplitude { value });
    }
    Ok(())
}

/// Free N-bit hypercube: zero potential, uniform kinetic amplitude Γ.
/// Ground energy −NΓ with the uniform vector.
pub fn hypercube_free(n_bits: u32, gamma: f64) -> Result<Hamiltonian, ModelError> {
    check_bits(n_bits, MAX_HYPERCUBE_BITS)?;
    check_amplitude(gamma)?;
    let m = 1usize << n_bits;
    Ok(Hamiltonian::new(m, n_bits as f64, vec![0.0; m], &hypercube_links(n_bits, gamma))?)
}

/// Two-level landscape on the hypercube: V = N·v1 on the cavity states
/// (default {0}), N·v2 elsewhere, kinetic amplitude Γ. Returns the model
/// together with the cavity/reservoir partition.
pub fn two_level_rpm(
    n_bits: u32,
    gamma: f64,
    v1: f64,
    v2: f64,
    cavity: Option<&[usize]>,
) -> Result<(Hamiltonian, Partition), ModelError> {
    check_bits(n_bits, MAX_HYPERCUBE_BITS)?;
    check_amplitude(gamma)?;
    if !(v1 < v2) {
        return Err(ModelError::BadLevels);
    }
    let m = 1usize << n_bits;
    let n = n_bits as f64;
    let cavity: Vec<usize> = cavity.map_or_else(|| vec![0], <[usize]>::to_vec);
    let mut potential = vec![n * v2; m];
    for &c in &cavity {
        if c >= m {
            return Err(ModelError::Fock(FockError::StateOutOfRange { id: c, m }));
        }
        potential[c] = n * v1;
    }
    let h = Hamiltonian::new(m, n, potential, &hypercube_links(n_bits, gamma))?;
    let partition = Partition::new(&h, &cavity).map_err(ModelError::Fock)?;
    Ok((h, partition))
}

fn validate_levels(levels: &[f64], weights: &[f64]) -> Result<(), ModelError> {
    if levels.is_empty() || levels.len() != weights.len() {
        return Err(ModelError::LengthMismatch);
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ModelError::LevelsNotAscending);
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(ModelError::BadWeights { sum });
    }
    Ok(())
}

fn draw_level(levels: &[f64], weights: &[f64], rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (&l, &w) in levels.iter().zip(weights) {
        acc += w;
        if u < acc {
            return l;
        }
    }
    *levels.last().unwrap()
}

/// Random multi-level landscape: V(n) = N·v with v drawn i.i.d. from the
/// given (levels, weights) distribution, on the chosen kinetic graph.
pub fn random_potential_model(
    m: usize,
    levels: &[f64],
    weights: &[f64],
    kinetic: KineticSpec,
    seed: u64,
) -> Result<Hamiltonian, ModelError> {
    validate_levels(levels, weights)?;
    let links = match kinetic {
        KineticSpec::Hypercube { gamma } => {
            check_amplitude(gamma)?;
            if !m.is_power_of_two() || m < 2 {
                return Err(ModelError::NotPowerOfTwo { m });
            }
            let n_bits = m.trailing_zeros();
            check_bits(n_bits, MAX_HYPERCUBE_BITS)?;
            hypercube_links(n_bits, gamma)
        }
        KineticSpec::CompleteGraph { eta } => {
            check_amplitude(eta)?;
            if m < 2 || m > MAX_COMPLETE_STATES {
                return Err(ModelError::StateLimit { m, max: MAX_COMPLETE_STATES });
            }
            let mut links = Vec::with_capacity(m * (m - 1) / 2);
            for i in 0..m {
                for j in (i + 1)..m {
                    links.push((i, j, -eta));
                }
            }
            links
        }
    };
    let n = (m as f64).log2();
    let mut rng = stream_rng(seed, 0);
    let potential: Vec<f64> = (0..m).map(|_| n * draw_level(levels, weights, &mut rng)).collect();
    Ok(Hamiltonian::new(m, n, potential, &links)?)
}

/// Redraw the potential of an existing model (kinetic structure unchanged)
/// from an intensive (levels, weights) distribution.
pub fn randomize_potential(
    h: &Hamiltonian,
    levels: &[f64],
    weights: &[f64],
    seed: u64,
) -> Result<Hamiltonian, ModelError> {
    validate_levels(levels, weights)?;
    let mut rng = stream_rng(seed, 0);
    let n = h.size_scale();
    let potential: Vec<f64> =
        (0..h.dim()).map(|_| n * draw_level(levels, weights, &mut rng)).collect();
    let links: Vec<(usize, usize, f64)> = h.kinetic_links().collect();
    Ok(Hamiltonian::new(h.dim(), n, potential, &links)?)
}

/// Gaussian landscape on the hypercube: V(n) i.i.d. Normal with mean 0 and
/// variance N·J²/2 (extensive), kinetic amplitude Γ.
pub fn qrem(n_bits: u32, gamma: f64, j: f64, seed: u64) -> Result<Hamiltonian, ModelError> {
    check_bits(n_bits, MAX_GAUSSIAN_BITS)?;
    check_amplitude(gamma)?;
    check_amplitude(j)?;
    let m = 1usize << n_bits;
    let n = n_bits as f64;
    let normal = Normal::new(0.0, (n / 2.0).sqrt() * j).expect("valid std");
    let mut rng = stream_rng(seed, 0);
    let potential: Vec<f64> = (0..m).map(|_| normal.sample(&mut rng)).collect();
    Ok(Hamiltonian::new(m, n, potential, &hypercube_links(n_bits, gamma))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_hypercube_structure() {
        let h = hypercube_free(4, 1.3).unwrap();
        assert_eq!(h.dim(), 16);
        assert!(h.is_bipartite());
        assert!(h.is_stoquastic());
        for n in 0..16 {
            assert_eq!(h.a(n), 4);
            assert_relative_eq!(h.r(n), 4.0 * 1.3, epsilon = 1e-12);
            assert_eq!(h.v(n), 0.0);
        }
        assert!(matches!(hypercube_free(0, 1.0), Err(ModelError::SizeLimit { .. })));
        assert!(matches!(hypercube_free(21, 1.0), Err(ModelError::SizeLimit { .. })));
        assert!(matches!(hypercube_free(3, 0.0), Err(ModelError::BadAmplitude { .. })));
    }

    #[test]
    fn two_level_landscape_and_partition() {
        let (h, part) = two_level_rpm(3, 0.9, -0.5, 0.25, None).unwrap();
        assert_eq!(part.cavity(), &[0]);
        assert_relative_eq!(h.v(0), 3.0 * -0.5, epsilon = 1e-12);
        for n in 1..8 {
            assert_relative_eq!(h.v(n), 3.0 * 0.25, epsilon = 1e-12);
        }
        assert_relative_eq!(part.pbar(), 1.0 / 8.0, epsilon = 1e-15);
        let (_, part) = two_level_rpm(3, 0.9, -0.5, 0.25, Some(&[0, 1])).unwrap();
        assert_eq!(part.cavity(), &[0, 1]);
        assert!(part.cavity_connected());
        assert!(matches!(two_level_rpm(3, 0.9, 0.5, 0.25, None), Err(ModelError::BadLevels)));
        assert!(matches!(
            two_level_rpm(3, 0.9, -0.5, 0.25, Some(&[99])),
            Err(ModelError::Fock(_))
        ));
    }

    #[test]
    fn random_landscape_matches_weights() {
        let m = 4096;
        let levels = [-1.0, 0.0, 2.0];
        let weights = [0.2, 0.5, 0.3];
        let h = random_potential_model(m, &levels, &weights, KineticSpec::Hypercube { gamma: 1.0 }, 5)
            .unwrap();
        let n = (m as f64).log2();
        for (&l, &w) in levels.iter().zip(&weights) {
            let count = (0..m).filter(|&s| (h.v(s) - n * l).abs() < 1e-9).count();
            let freq = count as f64 / m as f64;
            let sigma = (w * (1.0 - w) / m as f64).sqrt();
            assert!((freq - w).abs() <= 5.0 * sigma, "level {l}: freq {freq} vs weight {w}");
        }
        // Same seed, same landscape.
        let h2 = random_potential_model(m, &levels, &weights, KineticSpec::Hypercube { gamma: 1.0 }, 5)
            .unwrap();
        assert!((0..m).all(|s| h.v(s) == h2.v(s)));
    }

    #[test]
    fn random_landscape_validation() {
        let k = KineticSpec::Hypercube { gamma: 1.0 };
        assert!(matches!(
            random_potential_model(8, &[0.0, 1.0], &[0.5], k, 1),
            Err(ModelError::LengthMismatch)
        ));
        assert!(matches!(
            random_potential_model(8, &[1.0, 0.0], &[0.5, 0.5], k, 1),
            Err(ModelError::LevelsNotAscending)
        ));
        assert!(matches!(
            random_potential_model(8, &[0.0, 1.0], &[0.5, 0.6], k, 1),
            Err(ModelError::BadWeights { .. })
        ));
        assert!(matches!(
            random_potential_model(12, &[0.0, 1.0], &[0.5, 0.5], k, 1),
            Err(ModelError::NotPowerOfTwo { m: 12 })
        ));
    }

    #[test]
    fn complete_graph_kinetic() {
        let h = random_potential_model(
            5,
            &[0.0, 1.0],
            &[0.5, 0.5],
            KineticSpec::CompleteGraph { eta: 0.3 },
            2,
        )
        .unwrap();
        assert_eq!(h.dim(), 5);
        assert!(!h.is_bipartite());
        for n in 0..5 {
            assert_eq!(h.a(n), 4);
            assert_relative_eq!(h.r(n), 4.0 * 0.3, epsilon = 1e-12);
        }
        assert!(matches!(
            random_potential_model(9999, &[0.0, 1.0], &[0.5, 0.5], KineticSpec::CompleteGraph { eta: 0.3 }, 2),
            Err(ModelError::StateLimit { .. })
        ));
    }

    #[test]
    fn redraw_keeps_kinetic_structure() {
        let h = Hamiltonian::new(
            3,
            1.0,
            vec![0.0, 0.1, 0.3],
            &[(0, 1, -1.0), (1, 2, -1.0), (0, 2, 0.8)],
        )
        .unwrap();
        let r = randomize_potential(&h, &[-1.0, 1.0], &[0.5, 0.5], 9).unwrap();
        assert_eq!(r.dim(), h.dim());
        let a: Vec<_> = h.kinetic_links().collect();
        let b: Vec<_> = r.kinetic_links().collect();
        assert_eq!(a, b); // identical kinetic matrix, signs included
        assert!((0..3).any(|n| r.v(n) != h.v(n)));
        // Intensive levels are scaled by the stored size scale.
        assert!((0..3).all(|n| r.v(n) == -1.0 || r.v(n) == 1.0));
    }

    #[test]
    fn gaussian_landscape_moments() {
        let (n_bits, j) = (12u32, 1.4);
        let h = qrem(n_bits, 1.0, j, 77).unwrap();
        let m = h.dim();
        let n = n_bits as f64;
        let mean: f64 = (0..m).map(|s| h.v(s)).sum::<f64>() / m as f64;
        let var: f64 = (0..m).map(|s| (h.v(s) - mean).powi(2)).sum::<f64>() / m as f64;
        let target = n * j * j / 2.0;
        assert!(mean.abs() <= 4.0 * (target / m as f64).sqrt());
        assert!((var / target - 1.0).abs() <= 4.0 * (2.0 / m as f64).sqrt());
        let h2 = qrem(n_bits, 1.0, j, 77).unwrap();
        assert!((0..m).all(|s| h.v(s) == h2.v(s)));
        assert!(matches!(qrem(17, 1.0, 1.0, 0), Err(ModelError::SizeLimit { .. })));
    }

    #[test]
    fn spec_labels_render_stably() {
        let spec = ModelSpec::TwoLevel { n_bits: 10, gamma: 1.5, v1: 0.0, v2: 1.0, cavity: vec![0] };
        assert_eq!(spec.to_string(), "two-level N=10 gamma=1.5 v1=0 v2=1 cavity=0");
        let spec = ModelSpec::RandomPotential {
            m: 64,
            levels: vec![0.0, 1.0],
            weights: vec![0.25, 0.75],
            kinetic: KineticSpec::Hypercube { gamma: 2.0 },
            seed: 3,
        };
        assert_eq!(
            spec.to_string(),
            "random-potential M=64 kinetic=hypercube:2 seed=3 levels=0:0.25,1:0.75"
        );
        let spec = ModelSpec::Gaussian { n_bits: 14, gamma: 0.8, j: 1.0, seed: 42 };
        assert_eq!(spec.to_string(), "gaussian N=14 gamma=0.8 J=1 seed=42");
    }
}
