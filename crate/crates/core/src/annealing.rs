//! Temperature ladders driving β → ∞: run a chain (or several independent
//! replicas) through a strictly increasing β schedule at fixed λ, recording
//! per stage the statistics that diagnose concentration on ground-state-like
//! configurations — energy, counts, close-pair ("bad event") frequency, and
//! the frequency of local-minimality violations found by the window search.

use crate::configuration::{Configuration, Snapshot};
use crate::ground_state::{excitation_gap, GroundStateError, WindowTest};
use crate::observables::{bad_event, min_separation};
use crate::potential::{PairPotential, PotentialError};
use crate::sampler::{run, ChainState, GibbsParams, MoveWeights, SamplerError};
use crate::stats;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnnealError {
    #[error("{what} must satisfy {requirement} (got {value})")]
    BadParameter {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    GroundState(#[from] GroundStateError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Geometric,
    Linear,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage {
    pub beta: f64,
    pub sweeps: u64,
}

/// A strictly increasing β ladder; each stage equilibrates for a fixed number
/// of sweeps at its own temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    stages: Vec<Stage>,
}

impl Schedule {
    pub fn geometric(
        beta0: f64,
        factor: f64,
        n_stages: usize,
        sweeps: u64,
    ) -> Result<Self, AnnealError> {
        if !(factor > 1.0 && factor.is_finite()) {
            return Err(AnnealError::BadParameter {
                what: "factor",
                requirement: "> 1",
                value: factor,
            });
        }
        if !(beta0 > 0.0) {
            // β₀ = 0 would make every stage zero under a geometric map.
            return Err(AnnealError::BadParameter {
                what: "beta0",
                requirement: "> 0 for a geometric ladder",
                value: beta0,
            });
        }
        let stages = (0..n_stages)
            .map(|k| Stage {
                beta: beta0 * factor.powi(k as i32),
                sweeps,
            })
            .collect();
        Self::from_stages(ScheduleKind::Geometric, stages)
    }

    pub fn linear(
        beta0: f64,
        step: f64,
        n_stages: usize,
        sweeps: u64,
    ) -> Result<Self, AnnealError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(AnnealError::BadParameter {
                what: "step",
                requirement: "> 0",
                value: step,
            });
        }
        let stages = (0..n_stages)
            .map(|k| Stage {
                beta: beta0 + step * k as f64,
                sweeps,
            })
            .collect();
        Self::from_stages(ScheduleKind::Linear, stages)
    }

    pub fn explicit(stages: Vec<(f64, u64)>) -> Result<Self, AnnealError> {
        let stages = stages
            .into_iter()
            .map(|(beta, sweeps)| Stage { beta, sweeps })
            .collect();
        Self::from_stages(ScheduleKind::Explicit, stages)
    }

    fn from_stages(kind: ScheduleKind, stages: Vec<Stage>) -> Result<Self, AnnealError> {
        if stages.is_empty() {
            return Err(AnnealError::BadParameter {
                what: "stages",
                requirement: ">= 1",
                value: 0.0,
            });
        }
        let mut prev = f64::NEG_INFINITY;
        for s in &stages {
            if !(s.beta.is_finite() && s.beta >= 0.0) {
                return Err(AnnealError::BadParameter {
                    what: "beta",
                    requirement: ">= 0 and finite",
                    value: s.beta,
                });
            }
            if s.beta <= prev {
                return Err(AnnealError::BadParameter {
                    what: "beta",
                    requirement: "strictly increasing across stages",
                    value: s.beta,
                });
            }
            if s.sweeps == 0 {
                return Err(AnnealError::BadParameter {
                    what: "sweeps",
                    requirement: ">= 1 per stage",
                    value: 0.0,
                });
            }
            prev = s.beta;
        }
        Ok(Schedule { kind, stages })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }
}

/// Ground-state probe run on thinned samples: count a sample as failing when
/// the window search finds a gap below −delta.
#[derive(Debug, Clone)]
pub struct ProbeSpec {
    pub test: WindowTest,
    pub delta: f64,
    /// Probe every k-th thinned sample (1 = every sample).
    pub every: u64,
}

#[derive(Debug, Clone)]
pub struct AnnealOptions {
    /// Record observables every `thin`-th sweep.
    pub thin: u64,
    /// Bad-event scale; defaults to the potential's separation threshold ρ(λ).
    pub rho: Option<f64>,
    pub probe: Option<ProbeSpec>,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        AnnealOptions {
            thin: 1,
            rho: None,
            probe: None,
        }
    }
}

/// Everything measured during one ladder stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSummary {
    pub beta: f64,
    pub sweeps: u64,
    pub samples: u64,
    pub mean_h: f64,
    /// Batch-means standard error of mean_h.
    pub se_h: f64,
    pub mean_n: f64,
    /// Smallest pair separation seen in any thinned sample this stage.
    pub min_separation: f64,
    /// Acceptance rates within the stage, indexed insert/delete/displace.
    pub acceptance: [f64; 3],
    /// Fraction of thinned samples hitting the bad event at scale ρ.
    pub bad_fraction: f64,
    /// Fraction of probed samples whose excitation gap is below −delta.
    pub gap_fail_fraction: Option<f64>,
    pub final_snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderState {
    pub stages: Vec<StageSummary>,
}

/// Pooled replica results plus each chain's own ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaLadder {
    pub pooled: LadderState,
    pub per_chain: Vec<LadderState>,
}

fn resolve_rho(
    opts: &AnnealOptions,
    p: &PairPotential,
    lambda: f64,
    dim: usize,
) -> Result<f64, AnnealError> {
    let cap = p.range().max(1.0); // the bad-event scan is exact up to one cell reach
    match opts.rho {
        Some(r) => {
            if !(r > 0.0 && r <= cap) {
                return Err(AnnealError::BadParameter {
                    what: "rho",
                    requirement: "in (0, max(range, 1)]",
                    value: r,
                });
            }
            Ok(r)
        }
        None => Ok(p.rho_threshold(lambda, dim)?),
    }
}

/// One stage of sampling: run the chain at fixed β, recording observables on
/// thinned samples.
fn run_stage(
    chain: &mut ChainState,
    stage: Stage,
    lambda: f64,
    weights: &MoveWeights,
    p: &PairPotential,
    opts: &AnnealOptions,
    rho: f64,
) -> Result<StageSummary, AnnealError> {
    let params = GibbsParams::new(stage.beta, lambda)?;
    let proposed_before = chain.stats.proposed;
    let accepted_before = chain.stats.accepted;

    let mut hs: Vec<f64> = Vec::new();
    let mut ns: Vec<f64> = Vec::new();
    let mut minsep = f64::INFINITY;
    let mut bad = 0u64;
    let mut probed = 0u64;
    let mut probe_fails = 0u64;
    let mut probe_error: Option<GroundStateError> = None;

    run(
        chain,
        params,
        weights,
        p,
        stage.sweeps,
        opts.thin,
        |c: &ChainState| {
            let h = c
                .config
                .cached_energy()
                .expect_finite("chain states are always feasible");
            hs.push(h);
            ns.push(c.config.len() as f64);
            minsep = minsep.min(min_separation(&c.config));
            if bad_event(&c.config, rho) {
                bad += 1;
            }
            if let Some(probe) = &opts.probe {
                if probe_error.is_none() && (hs.len() as u64 - 1) % probe.every == 0 {
                    match excitation_gap(&c.config, &probe.test, p, lambda) {
                        Ok(report) => {
                            probed += 1;
                            if report.best_gap < -probe.delta {
                                probe_fails += 1;
                            }
                        }
                        Err(e) => probe_error = Some(e),
                    }
                }
            }
        },
    )?;
    if let Some(e) = probe_error {
        return Err(e.into());
    }

    let (mean_h, se_h) = stats::batch_means(&hs, 16);
    let samples = hs.len() as u64;
    let mut acceptance = [0.0; 3];
    for (k, rate) in acceptance.iter_mut().enumerate() {
        let prop = chain.stats.proposed[k] - proposed_before[k];
        let acc = chain.stats.accepted[k] - accepted_before[k];
        *rate = if prop == 0 { 0.0 } else { acc as f64 / prop as f64 };
    }
    Ok(StageSummary {
        beta: stage.beta,
        sweeps: stage.sweeps,
        samples,
        mean_h,
        se_h,
        mean_n: stats::mean(&ns),
        min_separation: minsep,
        acceptance,
        bad_fraction: if samples == 0 {
            0.0
        } else {
            bad as f64 / samples as f64
        },
        gap_fail_fraction: opts.probe.as_ref().map(|_| {
            if probed == 0 {
                0.0
            } else {
                probe_fails as f64 / probed as f64
            }
        }),
        final_snapshot: chain.config.to_snapshot(),
    })
}

/// Drive one chain through the ladder, carrying the configuration forward
/// from stage to stage. λ is fixed; the schedule's β supersedes `g0.beta`
/// after the first stage (the two must agree at the start only by
/// convention, not by requirement).
pub fn anneal(
    chain: &mut ChainState,
    schedule: &Schedule,
    g0: GibbsParams,
    weights: &MoveWeights,
    p: &PairPotential,
    opts: &AnnealOptions,
) -> Result<LadderState, AnnealError> {
    let dim = chain.config.region().dim();
    let rho = resolve_rho(opts, p, g0.lambda, dim)?;
    let mut stages = Vec::with_capacity(schedule.stages().len());
    for &stage in schedule.stages() {
        stages.push(run_stage(chain, stage, g0.lambda, weights, p, opts, rho)?);
    }
    Ok(LadderState { stages })
}

/// Independent replicas over the same ladder: chains run concurrently within
/// each stage, stage boundaries are synchronization barriers, and statistics
/// are pooled single-threaded after each stage. Chain k is seeded from
/// (seed, chain index k), so results are deterministic for any thread
/// interleaving. The pooled snapshot is chain 0's.
#[allow(clippy::too_many_arguments)]
pub fn replica_ladder(
    init: &Configuration,
    chains: usize,
    schedule: &Schedule,
    g0: GibbsParams,
    weights: &MoveWeights,
    p: &PairPotential,
    opts: &AnnealOptions,
    seed: u64,
) -> Result<ReplicaLadder, AnnealError> {
    if chains < 1 {
        return Err(AnnealError::BadParameter {
            what: "chains",
            requirement: ">= 1",
            value: chains as f64,
        });
    }
    let dim = init.region().dim();
    let rho = resolve_rho(opts, p, g0.lambda, dim)?;
    let mut states: Vec<ChainState> = (0..chains)
        .map(|k| ChainState::new(init.clone(), seed, k as u64))
        .collect::<Result<_, _>>()?;

    let mut per_chain: Vec<Vec<StageSummary>> = vec![Vec::new(); chains];
    for &stage in schedule.stages() {
        let results: Vec<Result<StageSummary, AnnealError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = states
                .iter_mut()
                .map(|chain| {
                    scope.spawn(move || {
                        run_stage(chain, stage, g0.lambda, weights, p, opts, rho)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for (k, res) in results.into_iter().enumerate() {
            per_chain[k].push(res?);
        }
    }

    let n_stages = schedule.stages().len();
    let mut pooled = Vec::with_capacity(n_stages);
    for s in 0..n_stages {
        let row: Vec<&StageSummary> = per_chain.iter().map(|c| &c[s]).collect();
        let chain_means_h: Vec<f64> = row.iter().map(|r| r.mean_h).collect();
        let se_h = if chains >= 2 {
            stats::std_dev(&chain_means_h) / (chains as f64).sqrt()
        } else {
            row[0].se_h
        };
        pooled.push(StageSummary {
            beta: row[0].beta,
            sweeps: row[0].sweeps,
            samples: row.iter().map(|r| r.samples).sum(),
            mean_h: stats::mean(&chain_means_h),
            se_h,
            mean_n: stats::mean(&row.iter().map(|r| r.mean_n).collect::<Vec<_>>()),
            min_separation: row
                .iter()
                .map(|r| r.min_separation)
                .fold(f64::INFINITY, f64::min),
            acceptance: {
                let mut a = [0.0; 3];
                for (i, slot) in a.iter_mut().enumerate() {
                    *slot = stats::mean(
                        &row.iter().map(|r| r.acceptance[i]).collect::<Vec<_>>(),
                    );
                }
                a
            },
            bad_fraction: stats::mean(
                &row.iter().map(|r| r.bad_fraction).collect::<Vec<_>>(),
            ),
            gap_fail_fraction: if row.iter().all(|r| r.gap_fail_fraction.is_some()) {
                Some(stats::mean(
                    &row.iter()
                        .map(|r| r.gap_fail_fraction.unwrap())
                        .collect::<Vec<_>>(),
                ))
            } else {
                None
            },
            final_snapshot: row[0].final_snapshot.clone(),
        });
    }

    Ok(ReplicaLadder {
        pooled: LadderState { stages: pooled },
        per_chain: per_chain
            .into_iter()
            .map(|stages| LadderState { stages })
            .collect(),
    })
}
