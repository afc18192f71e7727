//! Grand-canonical Metropolis–Hastings against the unit-intensity Poisson
//! reference measure.
//!
//! Moves: insert a uniform point (accept with min(1, |A|/(N+1) · e^{−βΔH})),
//! delete a uniform particle (min(1, N/|A| · e^{−βΔH})), or displace one by a
//! symmetric uniform offset (min(1, e^{−βΔH})). A forbidden move (ΔH = ∞) has
//! acceptance probability exactly zero — no float infinities enter the ratio.
//! The insert/delete formulas assume those two moves are proposed with equal
//! probability, which `MoveWeights` enforces.

use crate::configuration::{Configuration, ConfigurationError};
use crate::energy::Energy;
use crate::geometry::{BoxRegion, Point};
use crate::potential::PairPotential;
use crate::rng::CounterRng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("{what} must satisfy {requirement} (got {value})")]
    BadParameter {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("initial configuration has infinite energy")]
    InfeasibleStart,
    #[error("box volume {volume} exceeds the brute-force limit {limit}")]
    VolumeTooLarge { volume: f64, limit: f64 },
    #[error(transparent)]
    Configuration(#[from] ConfigurationError),
}

/// Inverse temperature and chemical-potential coefficient of H = ΣU + λN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsParams {
    pub beta: f64,
    pub lambda: f64,
}

impl GibbsParams {
    pub fn new(beta: f64, lambda: f64) -> Result<Self, SamplerError> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(SamplerError::BadParameter {
                what: "beta",
                requirement: ">= 0 and finite",
                value: beta,
            });
        }
        if !lambda.is_finite() {
            return Err(SamplerError::BadParameter {
                what: "lambda",
                requirement: "finite",
                value: lambda,
            });
        }
        Ok(GibbsParams { beta, lambda })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    Insert = 0,
    Delete = 1,
    Displace = 2,
}

/// Proposal mix and displacement scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveWeights {
    insert: f64,
    delete: f64,
    displace: f64,
    /// Half-width of the uniform displacement cube.
    pub sigma: f64,
}

impl MoveWeights {
    pub fn new(insert: f64, delete: f64, displace: f64, sigma: f64) -> Result<Self, SamplerError> {
        for (what, v) in [("insert", insert), ("delete", delete), ("displace", displace)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SamplerError::BadParameter {
                    what,
                    requirement: ">= 0",
                    value: v,
                });
            }
        }
        let sum = insert + delete + displace;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(SamplerError::BadParameter {
                what: "insert+delete+displace",
                requirement: "= 1",
                value: sum,
            });
        }
        if (insert - delete).abs() > 1e-12 {
            // The stated acceptance ratios presuppose symmetric proposal
            // probabilities for the dimension-changing pair.
            return Err(SamplerError::BadParameter {
                what: "insert-delete asymmetry",
                requirement: "insert = delete",
                value: insert - delete,
            });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(SamplerError::BadParameter {
                what: "sigma",
                requirement: "> 0",
                value: sigma,
            });
        }
        Ok(MoveWeights {
            insert,
            delete,
            displace,
            sigma,
        })
    }

    /// (1/4, 1/4, 1/2) with σ = (ρ(λ)−1)/2 where the separation threshold is
    /// available, falling back to 1/4 for non-divergent families.
    pub fn default_for(potential: &PairPotential, lambda: f64, dim: usize) -> Self {
        let sigma = potential
            .rho_threshold(lambda, dim)
            .map(|rho| (rho - 1.0) / 2.0)
            .unwrap_or(0.25);
        MoveWeights::new(0.25, 0.25, 0.5, sigma.max(1e-3)).expect("default weights are valid")
    }

    pub fn insert(&self) -> f64 {
        self.insert
    }

    pub fn delete(&self) -> f64 {
        self.delete
    }

    pub fn displace(&self) -> f64 {
        self.displace
    }
}

/// Proposal/acceptance counters per move kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
}

impl MoveStats {
    pub fn acceptance_rate(&self, kind: MoveKind) -> f64 {
        let k = kind as usize;
        if self.proposed[k] == 0 {
            0.0
        } else {
            self.accepted[k] as f64 / self.proposed[k] as f64
        }
    }

    pub fn total_proposed(&self) -> u64 {
        self.proposed.iter().sum()
    }
}

/// One Markov chain: configuration, its private random stream, counters, and
/// the running mean particle count that sets the sweep length.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub config: Configuration,
    rng: CounterRng,
    pub stats: MoveStats,
    pub sweeps_done: u64,
    mean_n: f64,
}

impl ChainState {
    /// `chain_index` keys the random stream: chains of one seed are mutually
    /// independent and reproducible regardless of scheduling.
    pub fn new(config: Configuration, seed: u64, chain_index: u64) -> Result<Self, SamplerError> {
        if config.cached_energy().is_infinite() {
            return Err(SamplerError::InfeasibleStart);
        }
        let mean_n = config.len() as f64;
        Ok(ChainState {
            config,
            rng: CounterRng::from_path(seed, &[0x43_48_41_49_4e, chain_index]),
            stats: MoveStats::default(),
            sweeps_done: 0,
            mean_n,
        })
    }

    /// Mean particle count over sweep ends since the chain was created.
    pub fn mean_count(&self) -> f64 {
        self.mean_n
    }
}

/// Acceptance probability from a finite ratio prefactor and βΔH; exact zero
/// for forbidden moves.
#[inline]
fn acceptance(prefactor: f64, beta: f64, delta: Energy) -> f64 {
    match delta {
        Energy::Infinite => 0.0,
        Energy::Finite(d) => {
            let r = prefactor * (-beta * d).exp();
            r.min(1.0)
        }
    }
}

/// One Metropolis–Hastings proposal.
pub fn step(
    chain: &mut ChainState,
    params: GibbsParams,
    weights: &MoveWeights,
    potential: &PairPotential,
) {
    let volume = chain.config.region().volume();
    let n = chain.config.len();
    let u = chain.rng.uniform();
    if u < weights.insert {
        chain.stats.proposed[MoveKind::Insert as usize] += 1;
        let x = {
            let region = chain.config.region().clone();
            region.sample_uniform(&mut chain.rng)
        };
        let delta = chain
            .config
            .delta_insert(x, potential, params.lambda)
            .expect("uniform sample lies in the box");
        let p = acceptance(volume / (n as f64 + 1.0), params.beta, delta);
        if p > 0.0 && chain.rng.uniform() < p {
            let d = delta.expect_finite("accepted insert");
            chain.config.apply_insert(x, d, potential, params.lambda);
            chain.stats.accepted[MoveKind::Insert as usize] += 1;
        }
    } else if u < weights.insert + weights.delete {
        chain.stats.proposed[MoveKind::Delete as usize] += 1;
        if n == 0 {
            return; // nothing to delete; counts as a rejected proposal
        }
        let idx = chain.rng.below(n);
        let delta = chain
            .config
            .delta_delete(idx, potential, params.lambda)
            .expect("index sampled in range on a feasible state");
        let p = acceptance(n as f64 / volume, params.beta, Energy::Finite(delta));
        if p > 0.0 && chain.rng.uniform() < p {
            chain.config.apply_delete(idx, delta, potential, params.lambda);
            chain.stats.accepted[MoveKind::Delete as usize] += 1;
        }
    } else {
        chain.stats.proposed[MoveKind::Displace as usize] += 1;
        if n == 0 {
            return;
        }
        let idx = chain.rng.below(n);
        let from = chain.config.points()[idx];
        let dim = chain.config.region().dim();
        let mut to: Point = from;
        for k in 0..dim {
            to[k] = from[k] + chain.rng.uniform_in(-weights.sigma, weights.sigma);
        }
        if !chain.config.region().contains(to) {
            return; // walked out of the box: reject
        }
        let delta = chain
            .config
            .delta_move(idx, to, potential)
            .expect("index and target validated");
        let p = acceptance(1.0, params.beta, delta);
        if p > 0.0 && chain.rng.uniform() < p {
            let d = delta.expect_finite("accepted move");
            chain.config.apply_move(idx, to, d, potential, params.lambda);
            chain.stats.accepted[MoveKind::Displace as usize] += 1;
        }
    }
}

/// Run `sweeps` sweeps; one sweep is round(mean count)+1 proposals, so chains
/// of different density get comparable per-sweep decorrelation. `sink` sees
/// the chain at the end of every `thin`-th sweep.
pub fn run(
    chain: &mut ChainState,
    params: GibbsParams,
    weights: &MoveWeights,
    potential: &PairPotential,
    sweeps: u64,
    thin: u64,
    mut sink: impl FnMut(&ChainState),
) -> Result<(), SamplerError> {
    if thin == 0 {
        return Err(SamplerError::BadParameter {
            what: "thin",
            requirement: ">= 1",
            value: 0.0,
        });
    }
    for s in 1..=sweeps {
        let steps = chain.mean_n.round().max(0.0) as u64 + 1;
        for _ in 0..steps {
            step(chain, params, weights, potential);
        }
        chain.sweeps_done += 1;
        let k = chain.sweeps_done as f64;
        chain.mean_n += (chain.config.len() as f64 - chain.mean_n) / k;
        if s % thin == 0 {
            sink(chain);
        }
    }
    Ok(())
}

/// Monte Carlo estimate of a conditional partition function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: u64,
}

/// Brute-force estimate of Z(β, λ | boundary) = E_π[e^{−βH(ω | ω_bdry)}]
/// under the unit Poisson process π on the box. Exact-in-expectation but
/// exponential-variance: restricted to small volumes (|A| ≤ 16).
pub fn conditional_partition_estimate(
    region: &BoxRegion,
    boundary: &[Point],
    params: GibbsParams,
    potential: &PairPotential,
    samples: u64,
    seed: u64,
) -> Result<PartitionEstimate, SamplerError> {
    const VOLUME_LIMIT: f64 = 16.0;
    let volume = region.volume();
    if volume > VOLUME_LIMIT {
        return Err(SamplerError::VolumeTooLarge {
            volume,
            limit: VOLUME_LIMIT,
        });
    }
    if samples < 2 {
        return Err(SamplerError::BadParameter {
            what: "samples",
            requirement: ">= 2",
            value: samples as f64,
        });
    }
    let mut rng = CounterRng::from_path(seed, &[0x5a_45_53_54, 0]);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..samples {
        let n = rng.poisson(volume);
        let points: Vec<Point> = (0..n).map(|_| region.sample_uniform(&mut rng)).collect();
        let cfg = Configuration::with_points(
            region.clone(),
            boundary,
            points,
            potential,
            params.lambda,
        )?;
        let w = match cfg.cached_energy() {
            Energy::Infinite => 0.0,
            Energy::Finite(h) => (-params.beta * h).exp(),
        };
        sum += w;
        sum2 += w * w;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sum2 / nf) - mean * mean).max(0.0);
    Ok(PartitionEstimate {
        mean,
        std_err: (var / nf).sqrt(),
        samples,
    })
}
