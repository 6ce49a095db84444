//! Shared model construction: either load an archive file or build one of
//! the generative families from flags, then resolve the cavity partition.

use anyhow::{bail, Context, Result};
use clap::Args;
use epr_core::{
    hypercube_free, parse_model, qrem, random_potential_model, two_level_rpm, Hamiltonian,
    JumpMode, KineticSpec, ModelSpec, Partition,
};
use std::path::PathBuf;

/// Sampling streams use a fixed mix of the user seed so trajectory counters
/// never collide with the landscape stream consumed by the model builders.
const MC_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn mc_seed(seed: u64) -> u64 {
    seed ^ MC_SEED_MIX
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model archive file to load (grammar documented in the README).
    #[arg(long, conflicts_with = "family")]
    pub model: Option<PathBuf>,

    /// Generative family: hypercube-free | two-level | random | gaussian.
    #[arg(long)]
    pub family: Option<String>,

    /// Hypercube bit count N (state count M = 2^N).
    #[arg(long = "N")]
    pub n_bits: Option<u32>,

    /// Kinetic amplitude per link.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    /// Deep level density (two-level family).
    #[arg(long, default_value_t = 0.0)]
    pub v1: f64,

    /// Shallow level density (two-level family).
    #[arg(long, default_value_t = 1.0)]
    pub v2: f64,

    /// Deep-level probability: overrides the weights of a two-entry --levels.
    #[arg(long)]
    pub p1: Option<f64>,

    /// Intensive level distribution "v:p,v:p,…" (random family).
    #[arg(long, allow_hyphen_values = true)]
    pub levels: Option<String>,

    /// Gaussian landscape strength J.
    #[arg(long, default_value_t = 1.0)]
    pub j: f64,

    /// Instance seed: landscapes consume stream 0, samplers a mixed seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Cavity spec: "level:L" (all states of the L-th lowest level, 1-based)
    /// or "ids:0,1,…". Defaults to a cavity stored in the model file, then
    /// to "level:1".
    #[arg(long)]
    pub cavity: Option<String>,
}

/// A constructed model plus the annotations that should follow it around.
pub struct BuiltModel {
    pub h: Hamiltonian,
    /// Family label for reports and archives.
    pub label: Option<String>,
    /// Cavity stored in a loaded archive, if any.
    pub file_cavity: Option<Vec<usize>>,
}

pub fn build_model(args: &ModelArgs) -> Result<BuiltModel> {
    if let Some(path) = &args.model {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading model file {}", path.display()))?;
        let parsed = parse_model(&text)
            .with_context(|| format!("parsing model file {}", path.display()))?;
        return Ok(BuiltModel { h: parsed.h, label: parsed.family, file_cavity: parsed.cavity });
    }
    let family = args.family.as_deref().unwrap_or("two-level");
    let n_bits = args.n_bits.context("--N is required when generating a model")?;
    let built = match family {
        "hypercube-free" => {
            let h = hypercube_free(n_bits, args.gamma)?;
            let label = ModelSpec::HypercubeFree { n_bits, gamma: args.gamma }.to_string();
            BuiltModel { h, label: Some(label), file_cavity: None }
        }
        "two-level" => {
            let cavity_ids = match args.cavity.as_deref() {
                Some(spec) if spec.starts_with("ids:") => Some(parse_ids(spec)?),
                _ => None,
            };
            let (h, part) =
                two_level_rpm(n_bits, args.gamma, args.v1, args.v2, cavity_ids.as_deref())?;
            let label = ModelSpec::TwoLevel {
                n_bits,
                gamma: args.gamma,
                v1: args.v1,
                v2: args.v2,
                cavity: part.cavity().to_vec(),
            }
            .to_string();
            BuiltModel { h, label: Some(label), file_cavity: None }
        }
        "random" => {
            let (levels, weights) = levels_from_args(args)?;
            let m = 1usize << n_bits;
            let kinetic = KineticSpec::Hypercube { gamma: args.gamma };
            let h = random_potential_model(m, &levels, &weights, kinetic, args.seed)?;
            let label = ModelSpec::RandomPotential {
                m,
                levels,
                weights,
                kinetic,
                seed: args.seed,
            }
            .to_string();
            BuiltModel { h, label: Some(label), file_cavity: None }
        }
        "gaussian" => {
            let h = qrem(n_bits, args.gamma, args.j, args.seed)?;
            let label = ModelSpec::Gaussian {
                n_bits,
                gamma: args.gamma,
                j: args.j,
                seed: args.seed,
            }
            .to_string();
            BuiltModel { h, label: Some(label), file_cavity: None }
        }
        other => bail!(
            "unknown family '{other}' (expected hypercube-free, two-level, random or gaussian)"
        ),
    };
    Ok(built)
}

/// Resolve the analysis partition: an explicit --cavity wins, then a cavity
/// stored in the model file, then the deepest potential level.
pub fn resolve_partition(h: &Hamiltonian, built: &BuiltModel, args: &ModelArgs) -> Result<Partition> {
    if let Some(spec) = args.cavity.as_deref() {
        return parse_cavity(h, spec);
    }
    if let Some(ids) = &built.file_cavity {
        return Ok(Partition::new(h, ids)?);
    }
    Ok(Partition::from_level(h, 1)?)
}

fn parse_cavity(h: &Hamiltonian, spec: &str) -> Result<Partition> {
    if let Some(level) = spec.strip_prefix("level:") {
        let l: usize = level.parse().context("cavity level must be an integer")?;
        return Ok(Partition::from_level(h, l)?);
    }
    if spec.starts_with("ids:") {
        let ids = parse_ids(spec)?;
        return Ok(Partition::new(h, &ids)?);
    }
    bail!("cavity spec must be 'level:L' or 'ids:0,1,…', got '{spec}'")
}

fn parse_ids(spec: &str) -> Result<Vec<usize>> {
    spec.strip_prefix("ids:")
        .unwrap_or(spec)
        .split(',')
        .map(|tok| tok.trim().parse::<usize>().context("cavity ids must be integers"))
        .collect()
}

/// Parse "v:p,v:p,…" into (levels, weights); --p1 overrides a two-entry split.
pub fn levels_from_args(args: &ModelArgs) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = args
        .levels
        .as_deref()
        .context("--levels \"v:p,v:p,…\" is required for this family")?;
    let (mut levels, mut weights) = parse_levels(spec)?;
    if let Some(p1) = args.p1 {
        if levels.len() != 2 {
            bail!("--p1 only applies to a two-entry --levels spec");
        }
        weights = vec![p1, 1.0 - p1];
    }
    // Keep the pairs sorted by level so the deepest level is first.
    let mut pairs: Vec<(f64, f64)> = levels.drain(..).zip(weights).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

pub fn parse_levels(spec: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut levels = Vec::new();
    let mut weights = Vec::new();
    for tok in spec.split(',') {
        let (v, p) = tok
            .split_once(':')
            .with_context(|| format!("level entry '{tok}' must look like v:p"))?;
        levels.push(v.trim().parse::<f64>().with_context(|| format!("bad level '{v}'"))?);
        weights.push(p.trim().parse::<f64>().with_context(|| format!("bad weight '{p}'"))?);
    }
    Ok((levels, weights))
}

/// Parse the sampler mode: link-rate | uniform | uniform:RHO. Bare "uniform"
/// uses the largest link amplitude as the clock rate.
pub fn parse_mode(spec: &str, h: &Hamiltonian) -> Result<JumpMode> {
    match spec {
        "link-rate" => Ok(JumpMode::LinkRate),
        "uniform" => Ok(JumpMode::Uniform { rho: h.max_eta() }),
        other => {
            if let Some(rho) = other.strip_prefix("uniform:") {
                let rho: f64 = rho.parse().context("uniform clock rate must be a number")?;
                if !(rho > 0.0) {
                    bail!("uniform clock rate must be positive");
                }
                Ok(JumpMode::Uniform { rho })
            } else {
                bail!("mode must be link-rate, uniform or uniform:RHO, got '{other}'")
            }
        }
    }
}

/// Default start state for samplers: the deepest potential entry.
pub fn default_start(h: &Hamiltonian) -> usize {
    (0..h.dim()).min_by(|&a, &b| h.v(a).total_cmp(&h.v(b))).unwrap()
}
