//! Run configuration: a single JSON document, schema-checked (unknown keys
//! rejected) and then semantically validated by the same constructors the
//! library exposes. Defaults are filled in by `resolve`, and the resolved
//! document is what runs and what gets echoed next to the artifacts, so a
//! run is a pure function of (resolved config, seed, version).

use crate::annealing::{ProbeSpec, Schedule};
use crate::geometry::{BoxRegion, Point};
use crate::ground_state::WindowTest;
use crate::potential::PairPotential;
use crate::sampler::{GibbsParams, MoveWeights};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("subcommand `{command}` requires the `{field}` block")]
    MissingBlock {
        command: &'static str,
        field: &'static str,
    },
}

fn invalid(field: &'static str, err: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: err.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Diverging shoulder above the hard core: j/(r−1)^alpha − well on
    /// (1, range], cut to zero beyond.
    HardCoreShoulder {
        j: f64,
        alpha: f64,
        #[serde(default)]
        well: f64,
        range: f64,
        depth_bound: f64,
    },
    /// No hard core: +bump on (0, r1], −well on (r1, r2], linear return to
    /// zero on (r2, range).
    SoftBump {
        bump: f64,
        well: f64,
        r1: f64,
        r2: f64,
        range: f64,
        depth_bound: f64,
    },
    /// Pure hard core, zero tail.
    HardRod,
    /// No interaction at all.
    Ideal,
}

impl PotentialSpec {
    pub fn build(&self) -> Result<PairPotential, ConfigError> {
        match *self {
            PotentialSpec::HardCoreShoulder {
                j,
                alpha,
                well,
                range,
                depth_bound,
            } => PairPotential::hard_core_shoulder(j, alpha, well, range, depth_bound)
                .map_err(|e| invalid("potential", e)),
            PotentialSpec::SoftBump {
                bump,
                well,
                r1,
                r2,
                range,
                depth_bound,
            } => PairPotential::soft_bump(bump, well, r1, r2, range, depth_bound)
                .map_err(|e| invalid("potential", e)),
            PotentialSpec::HardRod => Ok(PairPotential::hard_rod()),
            PotentialSpec::Ideal => Ok(PairPotential::ideal()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub bounds: Vec<[f64; 2]>,
}

impl BoxSpec {
    pub fn build(&self) -> Result<BoxRegion, ConfigError> {
        BoxRegion::new(&self.bounds).map_err(|e| invalid("box", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// No exterior particles.
    #[default]
    Empty,
    /// Explicit exterior points (full-dimensional coordinates).
    Fixed { points: Vec<Vec<f64>> },
    /// Exterior points on a pitch lattice in the collar just outside the box:
    /// every node beyond the walls by at least `margin` but within the
    /// interaction range, mirrored on all sides.
    Lattice { pitch: f64, margin: f64 },
}

impl BoundarySpec {
    /// Concrete exterior points for the given box; validation against the
    /// potential (collar truncation, mutual hard core) happens when the
    /// configuration is built.
    pub fn build(
        &self,
        region: &BoxRegion,
        potential: &PairPotential,
    ) -> Result<Vec<Point>, ConfigError> {
        match self {
            BoundarySpec::Empty => Ok(Vec::new()),
            BoundarySpec::Fixed { points } => {
                let dim = region.dim();
                points
                    .iter()
                    .map(|coords| {
                        if coords.len() != dim || coords.iter().any(|c| !c.is_finite()) {
                            return Err(invalid(
                                "boundary.points",
                                format!(
                                    "each point needs {dim} finite coordinates, got {coords:?}"
                                ),
                            ));
                        }
                        let mut p = [0.0; 3];
                        p[..dim].copy_from_slice(coords);
                        Ok(p)
                    })
                    .collect()
            }
            BoundarySpec::Lattice { pitch, margin } => {
                if !(*pitch > 0.0 && pitch.is_finite()) {
                    return Err(invalid("boundary.pitch", "pitch must be > 0"));
                }
                if !(*margin >= 0.0 && margin.is_finite()) {
                    return Err(invalid("boundary.margin", "margin must be >= 0"));
                }
                let reach = potential.range();
                if *margin >= reach {
                    return Err(invalid(
                        "boundary.margin",
                        format!("margin {margin} leaves no room within range {reach}"),
                    ));
                }
                // Nodes of the enlarged box's lattice that lie outside the
                // box but within reach of it, at least `margin` out.
                let dim = region.dim();
                let grown: Vec<[f64; 2]> = (0..dim)
                    .map(|k| [region.lo()[k] - reach, region.hi()[k] + reach])
                    .collect();
                let grown = BoxRegion::new(&grown).map_err(|e| invalid("boundary", e))?;
                let nodes = grown.lattice(*pitch, 0.0);
                Ok(nodes
                    .into_iter()
                    .filter(|&p| {
                        let d = region.distance_to(p);
                        d >= *margin && d > 0.0
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSpec {
    pub beta: f64,
    pub lambda: f64,
}

impl GibbsSpec {
    pub fn build(&self) -> Result<GibbsParams, ConfigError> {
        GibbsParams::new(self.beta, self.lambda).map_err(|e| invalid("gibbs", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Geometric {
        beta0: f64,
        factor: f64,
        stages: usize,
        sweeps: u64,
    },
    Linear {
        beta0: f64,
        step: f64,
        stages: usize,
        sweeps: u64,
    },
    Explicit { stages: Vec<(f64, u64)> },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Schedule, ConfigError> {
        match self {
            ScheduleSpec::Geometric {
                beta0,
                factor,
                stages,
                sweeps,
            } => Schedule::geometric(*beta0, *factor, *stages, *sweeps),
            ScheduleSpec::Linear {
                beta0,
                step,
                stages,
                sweeps,
            } => Schedule::linear(*beta0, *step, *stages, *sweeps),
            ScheduleSpec::Explicit { stages } => Schedule::explicit(stages.clone()),
        }
        .map_err(|e| invalid("schedule", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovesSpec {
    pub insert: f64,
    pub delete: f64,
    pub displace: f64,
    pub sigma: f64,
}

impl MovesSpec {
    pub fn build(&self) -> Result<MoveWeights, ConfigError> {
        MoveWeights::new(self.insert, self.delete, self.displace, self.sigma)
            .map_err(|e| invalid("moves", e))
    }

    fn from_weights(w: &MoveWeights) -> Self {
        MovesSpec {
            insert: w.insert(),
            delete: w.delete(),
            displace: w.displace(),
            sigma: w.sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub sweeps: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    /// Write a snapshot every this many thinned samples (0 = none).
    #[serde(default)]
    pub snapshot_every: u64,
    /// Bad-event scale for the ladder report; defaults to the potential's
    /// separation threshold, which divergent-shoulder families provide.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

fn default_thin() -> u64 {
    1
}

fn default_chains() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub window: Vec<[f64; 2]>,
    pub max_deletions: usize,
    pub max_insertions: usize,
    pub displacement_radius: f64,
    pub grid_pitch: f64,
    /// Gap threshold; defaults to 0.1·|λ| + 0.1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_every")]
    pub every: u64,
}

fn default_every() -> u64 {
    1
}

impl ProbeConfig {
    pub fn build(&self, lambda: f64) -> Result<ProbeSpec, ConfigError> {
        let window = BoxRegion::new(&self.window).map_err(|e| invalid("probe.window", e))?;
        let test = WindowTest::new(
            window,
            self.max_deletions,
            self.max_insertions,
            self.displacement_radius,
            self.grid_pitch,
        )
        .map_err(|e| invalid("probe", e))?;
        if self.every == 0 {
            return Err(invalid("probe.every", "must be >= 1"));
        }
        let delta = self.delta.unwrap_or(0.1 * lambda.abs() + 0.1);
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("probe.delta", "must be > 0"));
        }
        Ok(ProbeSpec {
            test,
            delta,
            every: self.every,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Path to the snapshot JSON to certify.
    pub snapshot: String,
    pub window: Vec<[f64; 2]>,
    pub max_deletions: usize,
    pub max_insertions: usize,
    pub displacement_radius: f64,
    pub grid_pitch: f64,
}

impl CheckSpec {
    pub fn build(&self) -> Result<WindowTest, ConfigError> {
        let window = BoxRegion::new(&self.window).map_err(|e| invalid("check.window", e))?;
        WindowTest::new(
            window,
            self.max_deletions,
            self.max_insertions,
            self.displacement_radius,
            self.grid_pitch,
        )
        .map_err(|e| invalid("check", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSpec {
    /// Directory of snapshot JSON files, processed in sorted filename order.
    pub snapshots: String,
    /// Bad-event scale; defaults to the potential's separation threshold.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub density_pitch: f64,
    pub delone_pitch: f64,
    #[serde(default)]
    pub delone_collar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    pub half_width: usize,
    pub target: f64,
    pub grid: Vec<u64>,
    pub sweeps: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub box_spec: Option<BoxSpec>,
    #[serde(default)]
    pub boundary: BoundarySpec,
    pub gibbs: GibbsSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moves: Option<MovesSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observables: Option<ObservablesSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleSpec>,
}

/// Parse and schema-check a config document. Semantic validation happens in
/// the `build` methods and in `resolve`.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

impl RunConfig {
    /// Fill defaults that depend on other parts of the config (the proposal
    /// mix and its displacement scale) and validate every block that is
    /// present. Resolution is idempotent: resolving a resolved config is the
    /// identity, which makes the emitted echo re-runnable bit for bit.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        let potential = self.potential.build()?;
        let params = self.gibbs.build()?;
        if let Some(b) = &self.box_spec {
            let region = b.build()?;
            self.boundary.build(&region, &potential)?;
            if self.moves.is_none() {
                let w =
                    MoveWeights::default_for(&potential, params.lambda, region.dim());
                self.moves = Some(MovesSpec::from_weights(&w));
            }
        }
        if let Some(m) = &self.moves {
            m.build()?;
        }
        if let Some(s) = &self.schedule {
            s.build()?;
        }
        if let Some(p) = &self.probe {
            p.build(params.lambda)?;
        }
        if let Some(c) = &self.check {
            c.build()?;
        }
        if let Some(o) = &self.observables {
            if !(o.density_pitch > 0.0 && o.delone_pitch > 0.0) {
                return Err(invalid(
                    "observables",
                    "density_pitch and delone_pitch must be > 0",
                ));
            }
        }
        if let Some(c) = &self.counterexample {
            if c.grid.is_empty() || c.grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid(
                    "counterexample.grid",
                    "must be nonempty and strictly increasing",
                ));
            }
            if c.levels < 1 {
                return Err(invalid("counterexample.levels", "must be >= 1"));
            }
            if !(c.target > 0.0 && c.target.is_finite()) {
                return Err(invalid("counterexample.target", "must be > 0"));
            }
            if c.sweeps < 8 || c.thin == 0 {
                return Err(invalid(
                    "counterexample",
                    "sweeps must be >= 8 and thin >= 1",
                ));
            }
        }
        Ok(())
    }

    pub fn emit(&self) -> String {
        let mut text =
            serde_json::to_string_pretty(self).expect("config serialization is total");
        text.push('\n');
        text
    }

    /// The box block, required by the sampling subcommands.
    pub fn require_box(&self, command: &'static str) -> Result<BoxRegion, ConfigError> {
        self.box_spec
            .as_ref()
            .ok_or(ConfigError::MissingBlock {
                command,
                field: "box",
            })?
            .build()
    }

    pub fn require_run(&self, command: &'static str) -> Result<RunSpec, ConfigError> {
        let run = self.run.ok_or(ConfigError::MissingBlock {
            command,
            field: "run",
        })?;
        if run.sweeps == 0 || run.thin == 0 || run.chains == 0 {
            return Err(invalid("run", "sweeps, thin, and chains must be >= 1"));
        }
        Ok(run)
    }
}

/// FNV-1a 64-bit hash, rendered as fixed-width hex; stamps artifacts with the
/// resolved config they came from.
pub fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}
