//! Executes the CLI subcommands against a run configuration and writes each
//! one's artifact set. Every artifact carries the tool version, the seed,
//! and a hash of the resolved configuration, so any output file can be
//! traced back to the exact inputs that produced it; files land via
//! temp-and-rename so a crash never leaves a half-written artifact under a
//! final name. Runs are deterministic: same config, same seed, same bytes.

use crate::annealing::{replica_ladder, AnnealOptions, StageSummary};
use crate::config::{fnv1a64, parse_config, ConfigError, RunConfig};
use crate::configuration::{Configuration, Snapshot, SnapshotMeta};
use crate::counterexample::{find_pump_threshold, nested_pump, PumpExperiment};
use crate::energy::Energy;
use crate::geometry::Point;
use crate::ground_state::{excitation_gap, GroundStateError, Verdict};
use crate::observables::{bad_event_fraction, delone_radii, min_separation, DensityAccumulator};
use crate::potential::PairPotential;
use crate::sampler::{run, ChainState, GibbsParams, MoveWeights};
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

impl RunnerError {
    /// Exit code the CLI maps this to: 2 for configuration problems, 3 for
    /// failures once a valid run is underway.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Runtime(_) => 3,
        }
    }
}

fn runtime(context: &str, err: impl std::fmt::Display) -> RunnerError {
    RunnerError::Runtime(format!("{context}: {err}"))
}

fn config_err(field: &'static str, err: impl std::fmt::Display) -> RunnerError {
    RunnerError::Config(ConfigError::Invalid {
        field,
        message: err.to_string(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sample,
    Anneal,
    Check,
    Observables,
    Counterexample,
}

/// Run one subcommand. The optional seed overrides the config's `seed`
/// before resolution, so the echoed config always shows the seed that ran.
/// Returns text for stdout when the subcommand produces any (`check` prints
/// its report).
pub fn execute(
    cmd: Command,
    config_text: &str,
    seed_override: Option<u64>,
    out_dir: &Path,
) -> Result<Option<String>, RunnerError> {
    let mut cfg = parse_config(config_text)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    cfg.resolve()?;
    let echoed = cfg.emit();
    let hash = fnv1a64(echoed.as_bytes());
    fs::create_dir_all(out_dir).map_err(|e| runtime("creating output directory", e))?;
    let art = Artifacts {
        out: out_dir.to_path_buf(),
        header: format!(
            "# gibbs-anneal {VERSION} seed={} config={hash}",
            cfg.seed
        ),
        meta: SnapshotMeta {
            version: VERSION.to_string(),
            seed: cfg.seed,
            config: hash,
        },
    };
    art.text("resolved-config.json", &echoed)?;
    match cmd {
        Command::Sample => sample(&cfg, &art),
        Command::Anneal => anneal(&cfg, &art),
        Command::Check => check(&cfg, &art),
        Command::Observables => observables(&cfg, &art),
        Command::Counterexample => counterexample(&cfg, &art),
    }
}

struct Artifacts {
    out: PathBuf,
    header: String,
    meta: SnapshotMeta,
}

impl Artifacts {
    fn text(&self, name: &str, body: &str) -> Result<(), RunnerError> {
        write_atomic(&self.out.join(name), body.as_bytes())
    }

    fn csv(&self, name: &str, columns: &str, rows: &[String]) -> Result<(), RunnerError> {
        let mut body = String::with_capacity(rows.len() * 32 + 128);
        let _ = writeln!(body, "{}", self.header);
        let _ = writeln!(body, "{columns}");
        for row in rows {
            let _ = writeln!(body, "{row}");
        }
        self.text(name, &body)
    }

    fn json(&self, name: &str, value: &serde_json::Value) -> Result<(), RunnerError> {
        let mut body =
            serde_json::to_string_pretty(value).map_err(|e| runtime("encoding JSON", e))?;
        body.push('\n');
        self.text(name, &body)
    }

    fn snapshot(&self, rel: &str, mut snap: Snapshot) -> Result<(), RunnerError> {
        snap.meta = Some(self.meta.clone());
        let mut body =
            serde_json::to_string_pretty(&snap).map_err(|e| runtime("encoding snapshot", e))?;
        body.push('\n');
        write_atomic(&self.out.join(rel), body.as_bytes())
    }

    fn subdir(&self, name: &str) -> Result<(), RunnerError> {
        fs::create_dir_all(self.out.join(name))
            .map_err(|e| runtime("creating output directory", e))
    }

    fn meta_value(&self) -> serde_json::Value {
        json!({
            "version": self.meta.version,
            "seed": self.meta.seed,
            "config": self.meta.config,
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), RunnerError> {
    let tmp = path.with_extension("tmp");
    let describe = |e| runtime(&format!("writing {}", path.display()), e);
    fs::write(&tmp, bytes).map_err(describe)?;
    fs::rename(&tmp, path).map_err(describe)
}

/// CSV cells carry finite numbers or literal `inf`; a quantity with no value
/// (an exhausted search) is an empty cell, never `nan`.
fn cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x}")
    }
}

fn energy_cell(e: Energy) -> String {
    match e.as_finite() {
        Some(v) => cell(v),
        None => "inf".to_string(),
    }
}

/// The common preamble of the sampling subcommands: build the box, exterior,
/// parameters, and proposal mix, and start from the empty interior.
struct SamplingSetup {
    potential: PairPotential,
    params: GibbsParams,
    weights: MoveWeights,
    init: Configuration,
}

fn sampling_setup(cfg: &RunConfig, command: &'static str) -> Result<SamplingSetup, RunnerError> {
    let potential = cfg.potential.build()?;
    let region = cfg.require_box(command)?;
    let params = cfg.gibbs.build()?;
    let boundary = cfg.boundary.build(&region, &potential)?;
    let weights = cfg
        .moves
        .as_ref()
        .expect("resolve() fills the move mix when a box is present")
        .build()?;
    let init = Configuration::empty(region, &boundary, &potential)
        .map_err(|e| config_err("boundary", e))?;
    Ok(SamplingSetup {
        potential,
        params,
        weights,
        init,
    })
}

fn sample(cfg: &RunConfig, art: &Artifacts) -> Result<Option<String>, RunnerError> {
    let setup = sampling_setup(cfg, "sample")?;
    let run_spec = cfg.require_run("sample")?;
    if run_spec.chains != 1 {
        return Err(config_err(
            "run.chains",
            "sample runs a single chain; use anneal for replicas",
        ));
    }
    let mut chain = ChainState::new(setup.init, cfg.seed, 0)
        .map_err(|e| runtime("starting chain", e))?;
    let every = run_spec.snapshot_every;
    let mut rows: Vec<String> = Vec::new();
    let mut snaps: Vec<(String, Snapshot)> = Vec::new();
    let mut k: u64 = 0;
    run(
        &mut chain,
        setup.params,
        &setup.weights,
        &setup.potential,
        run_spec.sweeps,
        run_spec.thin,
        |c| {
            k += 1;
            rows.push(format!(
                "{},{},{},{}",
                c.sweeps_done,
                c.config.len(),
                energy_cell(c.config.cached_energy()),
                cell(min_separation(&c.config)),
            ));
            if every > 0 && k % every == 0 {
                snaps.push((format!("snapshots/snapshot-{k:06}.json"), c.config.to_snapshot()));
            }
        },
    )
    .map_err(|e| runtime("sampling", e))?;
    art.csv("samples.csv", "sweep,n,h,min_separation", &rows)?;
    if every > 0 {
        art.subdir("snapshots")?;
        for (name, snap) in snaps {
            art.snapshot(&name, snap)?;
        }
    }
    art.snapshot("final.json", chain.config.to_snapshot())?;
    Ok(None)
}

fn anneal(cfg: &RunConfig, art: &Artifacts) -> Result<Option<String>, RunnerError> {
    let setup = sampling_setup(cfg, "anneal")?;
    let run_spec = cfg.require_run("anneal")?;
    let schedule = cfg
        .schedule
        .as_ref()
        .ok_or(ConfigError::MissingBlock {
            command: "anneal",
            field: "schedule",
        })?
        .build()?;
    // The minimality probe is mandatory: a ladder without it reports nothing
    // about whether cooling actually approached a ground state.
    let probe_cfg = cfg.probe.as_ref().ok_or(ConfigError::MissingBlock {
        command: "anneal",
        field: "probe",
    })?;
    let probe = probe_cfg.build(setup.params.lambda)?;
    probe
        .test
        .validate_for(&setup.init, &setup.potential, setup.params.lambda)
        .map_err(|e| config_err("probe", e))?;
    let dim = setup.init.region().dim();
    let rho = match run_spec.rho {
        Some(r) => {
            let cap = setup.potential.range().max(1.0);
            if !(r > 0.0 && r <= cap) {
                return Err(config_err(
                    "run.rho",
                    format!("must be in (0, {cap}] for this potential"),
                ));
            }
            r
        }
        None => setup
            .potential
            .rho_threshold(setup.params.lambda, dim)
            .map_err(|e| {
                config_err(
                    "run.rho",
                    format!("no derivable separation threshold ({e}); set run.rho explicitly"),
                )
            })?,
    };
    let opts = AnnealOptions {
        thin: run_spec.thin,
        rho: Some(rho),
        probe: Some(probe),
    };
    let ladder = replica_ladder(
        &setup.init,
        run_spec.chains,
        &schedule,
        setup.params,
        &setup.weights,
        &setup.potential,
        &opts,
        cfg.seed,
    )
    .map_err(|e| runtime("annealing", e))?;

    let columns = "stage,beta,sweeps,samples,mean_h,se_h,mean_n,min_separation,\
                   acc_insert,acc_delete,acc_displace,bad_fraction,gap_fraction";
    let stage_row = |k: usize, s: &StageSummary| {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            k + 1,
            cell(s.beta),
            s.sweeps,
            s.samples,
            cell(s.mean_h),
            cell(s.se_h),
            cell(s.mean_n),
            cell(s.min_separation),
            cell(s.acceptance[0]),
            cell(s.acceptance[1]),
            cell(s.acceptance[2]),
            cell(s.bad_fraction),
            s.gap_fail_fraction.map(cell).unwrap_or_default(),
        )
    };
    let rows: Vec<String> = ladder
        .pooled
        .stages
        .iter()
        .enumerate()
        .map(|(k, s)| stage_row(k, s))
        .collect();
    art.csv("ladder.csv", columns, &rows)?;
    art.subdir("snapshots")?;
    for (k, s) in ladder.pooled.stages.iter().enumerate() {
        art.snapshot(
            &format!("snapshots/stage-{:02}.json", k + 1),
            s.final_snapshot.clone(),
        )?;
    }
    let last = ladder
        .pooled
        .stages
        .last()
        .expect("schedules have at least one stage");
    art.snapshot("final.json", last.final_snapshot.clone())?;
    Ok(None)
}

fn classify_gap_error(e: GroundStateError) -> RunnerError {
    match e {
        GroundStateError::BadParameter { .. }
        | GroundStateError::WindowNotContained
        | GroundStateError::DisplacementTooLarge { .. }
        | GroundStateError::InfiniteEnergy => config_err("check", e),
        other => runtime("excitation search", other),
    }
}

fn check(cfg: &RunConfig, art: &Artifacts) -> Result<Option<String>, RunnerError> {
    let potential = cfg.potential.build()?;
    let params = cfg.gibbs.build()?;
    let spec = cfg.check.as_ref().ok_or(ConfigError::MissingBlock {
        command: "check",
        field: "check",
    })?;
    let test = spec.build()?;
    let text = fs::read_to_string(&spec.snapshot)
        .map_err(|e| config_err("check.snapshot", format!("{}: {e}", spec.snapshot)))?;
    let snap: Snapshot = serde_json::from_str(&text)
        .map_err(|e| config_err("check.snapshot", format!("{}: {e}", spec.snapshot)))?;
    let config = Configuration::from_snapshot(&snap, &potential, params.lambda)
        .map_err(|e| config_err("check.snapshot", format!("{}: {e}", spec.snapshot)))?;
    let report = excitation_gap(&config, &test, &potential, params.lambda)
        .map_err(classify_gap_error)?;

    let dim = snap.dimension;
    let strip = |p: &Point| p[..dim].to_vec();
    let value = json!({
        "meta": art.meta_value(),
        "snapshot": spec.snapshot,
        "particles": config.len(),
        "baseline": report.baseline,
        "best_gap": report.best_gap,
        "searched": report.searched,
        "tolerance": report.tolerance,
        "verdict": match report.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        },
        "perturbation": {
            "deleted": report.perturbation.deleted.iter().map(strip).collect::<Vec<_>>(),
            "inserted": report.perturbation.inserted.iter().map(strip).collect::<Vec<_>>(),
            "moved": report.perturbation.moved.iter().map(|(from, to)| {
                json!({"from": strip(from), "to": strip(to)})
            }).collect::<Vec<_>>(),
        },
    });
    art.json("report.json", &value)?;
    let mut stdout =
        serde_json::to_string_pretty(&value).map_err(|e| runtime("encoding JSON", e))?;
    stdout.push('\n');
    Ok(Some(stdout))
}

fn observables(cfg: &RunConfig, art: &Artifacts) -> Result<Option<String>, RunnerError> {
    let potential = cfg.potential.build()?;
    let params = cfg.gibbs.build()?;
    let spec = cfg.observables.as_ref().ok_or(ConfigError::MissingBlock {
        command: "observables",
        field: "observables",
    })?;

    let entries = fs::read_dir(&spec.snapshots)
        .map_err(|e| config_err("observables.snapshots", format!("{}: {e}", spec.snapshots)))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(config_err(
            "observables.snapshots",
            format!("no .json snapshots in {}", spec.snapshots),
        ));
    }

    let mut configs: Vec<(String, Configuration)> = Vec::with_capacity(paths.len());
    for path in &paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let text = fs::read_to_string(path)
            .map_err(|e| config_err("observables.snapshots", format!("{name}: {e}")))?;
        let snap: Snapshot = serde_json::from_str(&text)
            .map_err(|e| config_err("observables.snapshots", format!("{name}: {e}")))?;
        let config = Configuration::from_snapshot(&snap, &potential, params.lambda)
            .map_err(|e| config_err("observables.snapshots", format!("{name}: {e}")))?;
        if let Some((first_name, first)) = configs.first() {
            if config.region().bounds() != first.region().bounds() {
                return Err(config_err(
                    "observables.snapshots",
                    format!("{name} and {first_name} describe different boxes"),
                ));
            }
        }
        configs.push((name, config));
    }

    let rho = match spec.rho {
        Some(r) => {
            let cap = potential.range().max(1.0);
            if !(r > 0.0 && r <= cap) {
                return Err(config_err(
                    "observables.rho",
                    format!("must be in (0, {cap}] for this potential"),
                ));
            }
            r
        }
        None => {
            let dim = configs[0].1.region().dim();
            potential.rho_threshold(params.lambda, dim).map_err(|e| {
                config_err(
                    "observables.rho",
                    format!("no derivable separation threshold ({e}); set observables.rho"),
                )
            })?
        }
    };
    let fraction = bad_event_fraction(configs.iter().map(|(_, c)| c), rho);
    art.csv(
        "badfrac.csv",
        "rho,bad_fraction,snapshots",
        &[format!("{},{},{}", cell(rho), cell(fraction), configs.len())],
    )?;

    let mut delone_rows = Vec::with_capacity(configs.len());
    for (name, config) in &configs {
        let radii = delone_radii(config, spec.delone_pitch, spec.delone_collar)
            .map_err(|e| config_err("observables", e))?;
        delone_rows.push(format!(
            "{name},{},{}",
            cell(radii.packing),
            cell(radii.covering)
        ));
    }
    art.csv("delone.csv", "snapshot,packing,covering", &delone_rows)?;

    let mut acc = DensityAccumulator::new(configs[0].1.region(), spec.density_pitch)
        .map_err(|e| config_err("observables.density_pitch", e))?;
    for (_, config) in &configs {
        acc.add(config);
    }
    let field = acc.finish();
    let dim = configs[0].1.region().dim();
    let coord_names: Vec<&str> = ["x", "y", "z"][..dim].to_vec();
    let columns = format!("{},mean_count", coord_names.join(","));
    let density_rows: Vec<String> = field
        .nodes
        .iter()
        .zip(&field.mean_counts)
        .map(|(node, &count)| {
            let coords: Vec<String> = node[..dim].iter().map(|&c| cell(c)).collect();
            format!("{},{}", coords.join(","), cell(count))
        })
        .collect();
    art.csv("density.csv", &columns, &density_rows)?;

    let summary = json!({
        "meta": art.meta_value(),
        "snapshots": configs.len(),
        "rho": rho,
        "bad_fraction": fraction,
        "density_samples": field.samples,
    });
    art.json("observables.json", &summary)?;
    Ok(None)
}

fn counterexample(cfg: &RunConfig, art: &Artifacts) -> Result<Option<String>, RunnerError> {
    let potential = cfg.potential.build()?;
    let params = cfg.gibbs.build()?;
    let spec = cfg
        .counterexample
        .as_ref()
        .ok_or(ConfigError::MissingBlock {
            command: "counterexample",
            field: "counterexample",
        })?;
    let proto = PumpExperiment::new(spec.half_width, spec.grid[0], potential, params)
        .map_err(|e| config_err("counterexample", e))?;

    let threshold = find_pump_threshold(
        &proto,
        spec.target,
        &spec.grid,
        spec.sweeps,
        spec.thin,
        cfg.seed,
    )
    .map_err(|e| runtime("threshold search", e))?;
    let mut pump_rows = Vec::new();
    for report in &threshold.trace {
        for s in &report.segments {
            pump_rows.push(format!(
                "{},{},{},{}",
                report.boundary_count,
                s.segment,
                cell(s.mean),
                cell(s.se)
            ));
        }
    }
    art.csv("pump.csv", "n,segment,mean,stderr", &pump_rows)?;

    let cascade = nested_pump(
        &proto,
        spec.levels,
        spec.target,
        &spec.grid,
        spec.sweeps,
        spec.thin,
        cfg.seed,
    )
    .map_err(|e| runtime("nested construction", e))?;
    let cascade_rows: Vec<String> = cascade
        .levels
        .iter()
        .map(|l| {
            format!(
                "{},{},{},{},{}",
                l.level,
                l.pinned.map(|n| n.to_string()).unwrap_or_default(),
                cell(l.required),
                cell(l.measured),
                cell(l.se)
            )
        })
        .collect();
    art.csv("cascade.csv", "level,pinned,required,measured,se", &cascade_rows)?;

    let summary = json!({
        "meta": art.meta_value(),
        "target": spec.target,
        "threshold_pins": threshold.n_hat,
        "levels": cascade.levels.len(),
        "central_mean": cascade.central_mean,
        "central_se": cascade.central_se,
        "achieved": cascade.achieved,
        "cap_flagged": cascade.cap_flagged,
    });
    art.json("counterexample.json", &summary)?;
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("gibbs-runner-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    fn read(dir: &Path, name: &str) -> String {
        fs::read_to_string(dir.join(name))
            .unwrap_or_else(|e| panic!("missing artifact {name}: {e}"))
    }

    const SAMPLE_CFG: &str = r#"{
        "potential": {"family": "hard_core_shoulder",
                      "j": 1.0, "alpha": 1.0, "range": 1.5, "depth_bound": 1.0},
        "box": {"bounds": [[0, 6]]},
        "gibbs": {"beta": 1.0, "lambda": 0.0},
        "run": {"sweeps": 40, "thin": 4, "snapshot_every": 5}
    }"#;

    #[test]
    fn sample_writes_the_artifact_set() {
        let dir = tmp_dir("sample");
        execute(Command::Sample, SAMPLE_CFG, Some(9), &dir).unwrap();

        let echoed = read(&dir, "resolved-config.json");
        assert!(echoed.contains("\"seed\": 9"), "override lands in the echo");
        let hash = fnv1a64(echoed.as_bytes());

        let samples = read(&dir, "samples.csv");
        let mut lines = samples.lines();
        let header = lines.next().unwrap();
        assert_eq!(header, format!("# gibbs-anneal {VERSION} seed=9 config={hash}"));
        assert_eq!(lines.next().unwrap(), "sweep,n,h,min_separation");
        assert_eq!(lines.count(), 10); // 40 sweeps thinned by 4

        // 10 thinned samples, snapshot every 5th → two snapshots.
        let snap = read(&dir, "snapshots/snapshot-000005.json");
        assert!(snap.contains("\"seed\": 9"));
        assert!(dir.join("snapshots/snapshot-000010.json").exists());

        let final_snap: Snapshot =
            serde_json::from_str(&read(&dir, "final.json")).unwrap();
        let meta = final_snap.meta.expect("stamped");
        assert_eq!((meta.seed, meta.config), (9, hash));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn reruns_are_byte_identical_and_seeds_differ() {
        let a = tmp_dir("det-a");
        let b = tmp_dir("det-b");
        let c = tmp_dir("det-c");
        execute(Command::Sample, SAMPLE_CFG, Some(5), &a).unwrap();
        execute(Command::Sample, SAMPLE_CFG, Some(5), &b).unwrap();
        execute(Command::Sample, SAMPLE_CFG, Some(6), &c).unwrap();
        for name in ["resolved-config.json", "samples.csv", "final.json"] {
            assert_eq!(read(&a, name), read(&b, name), "{name} must not vary");
        }
        assert_ne!(read(&a, "samples.csv"), read(&c, "samples.csv"));
        for dir in [a, b, c] {
            fs::remove_dir_all(&dir).unwrap();
        }
    }

    #[test]
    fn config_problems_exit_2_runtime_problems_exit_3() {
        let dir = tmp_dir("errs");
        let bad_json = "{ not json";
        let err = execute(Command::Sample, bad_json, None, &dir).unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let no_box = r#"{
            "potential": {"family": "hard_rod"},
            "gibbs": {"beta": 1.0, "lambda": 0.0},
            "run": {"sweeps": 10}
        }"#;
        let err = execute(Command::Sample, no_box, None, &dir).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`box`"));

        let missing_snapshot = r#"{
            "potential": {"family": "hard_rod"},
            "gibbs": {"beta": 1.0, "lambda": 0.0},
            "check": {"snapshot": "/nonexistent/snap.json",
                      "window": [[0, 1]], "max_deletions": 0, "max_insertions": 0,
                      "displacement_radius": 0.1, "grid_pitch": 0.5}
        }"#;
        let err = execute(Command::Check, missing_snapshot, None, &dir).unwrap_err();
        assert_eq!(err.exit_code(), 2, "unreadable snapshot is a config error");
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn anneal_requires_probe_and_writes_ladder() {
        let dir = tmp_dir("anneal");
        let cfg = r#"{
            "potential": {"family": "hard_core_shoulder",
                          "j": 1.0, "alpha": 1.0, "range": 1.5, "depth_bound": 1.0},
            "box": {"bounds": [[0, 6]]},
            "gibbs": {"beta": 1.0, "lambda": 0.0},
            "schedule": {"kind": "geometric", "beta0": 1.0, "factor": 4.0,
                         "stages": 2, "sweeps": 30},
            "run": {"sweeps": 1, "thin": 2, "chains": 2},
            "probe": {"window": [[2, 4]], "max_deletions": 1, "max_insertions": 0,
                      "displacement_radius": 0.05, "grid_pitch": 1.0, "every": 5}
        }"#;
        execute(Command::Anneal, cfg, Some(3), &dir).unwrap();
        let ladder = read(&dir, "ladder.csv");
        let lines: Vec<&str> = ladder.lines().collect();
        assert!(lines[1].starts_with("stage,beta,"));
        assert_eq!(lines.len(), 4, "two stage rows");
        // Pooled samples count both chains: 2 × 30 sweeps / thin 2.
        assert!(lines[2].starts_with("1,1,30,30,"));
        assert!(lines[3].starts_with("2,4,30,30,"));
        assert!(dir.join("snapshots/stage-01.json").exists());
        assert!(dir.join("snapshots/stage-02.json").exists());
        assert!(dir.join("final.json").exists());

        let without_probe = cfg.replace(
            r#""probe": {"window": [[2, 4]], "max_deletions": 1, "max_insertions": 0,
                      "displacement_radius": 0.05, "grid_pitch": 1.0, "every": 5}"#,
            r#""seed": 0"#,
        );
        let err = execute(Command::Anneal, &without_probe, None, &dir).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`probe`"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn check_reports_a_planted_defect() {
        let dir = tmp_dir("check");
        fs::create_dir_all(&dir).unwrap();
        // One lone particle at positive chemical potential: deleting it wins.
        let snap = json!({
            "dimension": 1,
            "bounds": [[0.0, 4.0]],
            "points": [[2.0]],
            "boundary_points": []
        });
        let snap_path = dir.join("lone.json");
        fs::write(&snap_path, snap.to_string()).unwrap();
        let cfg = format!(
            r#"{{
                "potential": {{"family": "hard_rod"}},
                "gibbs": {{"beta": 1.0, "lambda": 1.0}},
                "check": {{"snapshot": {snap_path:?},
                          "window": [[1.2, 2.8]], "max_deletions": 1, "max_insertions": 0,
                          "displacement_radius": 0.3, "grid_pitch": 0.5}}
            }}"#
        );
        let stdout = execute(Command::Check, &cfg, Some(1), &dir)
            .unwrap()
            .expect("check prints its report");
        assert!(stdout.contains("\"verdict\": \"fail\""));
        let report: serde_json::Value =
            serde_json::from_str(&read(&dir, "report.json")).unwrap();
        assert_eq!(report["verdict"], "fail");
        assert!((report["best_gap"].as_f64().unwrap() + 1.0).abs() < 1e-9);
        assert_eq!(report["perturbation"]["deleted"][0][0], 2.0);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn observables_digest_a_snapshot_directory() {
        let dir = tmp_dir("obs");
        let snaps = dir.join("snaps");
        fs::create_dir_all(&snaps).unwrap();
        for (k, xs) in [vec![1.0, 2.5], vec![1.0, 2.25, 4.0]].iter().enumerate() {
            let snap = json!({
                "dimension": 1,
                "bounds": [[0.0, 5.0]],
                "points": xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(),
                "boundary_points": []
            });
            fs::write(snaps.join(format!("s{k}.json")), snap.to_string()).unwrap();
        }
        let cfg = format!(
            r#"{{
                "potential": {{"family": "hard_core_shoulder",
                              "j": 1.0, "alpha": 1.0, "range": 1.5, "depth_bound": 1.0}},
                "gibbs": {{"beta": 1.0, "lambda": 0.0}},
                "observables": {{"snapshots": {:?}, "rho": 1.4,
                                "density_pitch": 1.0, "delone_pitch": 0.5}}
            }}"#,
            snaps.to_str().unwrap()
        );
        execute(Command::Observables, &cfg, None, &dir).unwrap();
        // s1 has the pair at distance 1.25 < 1.4 → half the snapshots are bad.
        let badfrac = read(&dir, "badfrac.csv");
        assert!(badfrac.lines().nth(2).unwrap().starts_with("1.4,0.5,2"));
        let delone = read(&dir, "delone.csv");
        assert!(delone.contains("s0.json,1.5,"));
        assert!(delone.contains("s1.json,1.25,"));
        let density = read(&dir, "density.csv");
        assert_eq!(density.lines().nth(1).unwrap(), "x,mean_count");
        // Nodes keep their unit ball inside the box: 1..4 at pitch 1.
        assert_eq!(density.lines().count(), 6);
        assert!(density.contains("\n4,0.5"), "x=4 holds 4.0 in one of two snapshots");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn counterexample_writes_trace_and_cascade() {
        let dir = tmp_dir("pump");
        let cfg = r#"{
            "potential": {"family": "soft_bump",
                          "bump": 2.0, "well": 0.2, "r1": 0.3, "r2": 2.1,
                          "range": 2.5, "depth_bound": 0.2},
            "gibbs": {"beta": 1.0, "lambda": 0.0},
            "counterexample": {"half_width": 1, "target": 0.05, "grid": [0, 8],
                               "sweeps": 200, "thin": 2}
        }"#;
        execute(Command::Counterexample, cfg, Some(2), &dir).unwrap();
        let pump = read(&dir, "pump.csv");
        // Grid point 0 over segments −1..1 comes first; tiny target → the
        // scan stops there and the trace holds those three rows.
        assert_eq!(pump.lines().nth(1).unwrap(), "n,segment,mean,stderr");
        assert!(pump.lines().nth(2).unwrap().starts_with("0,-1,"));
        let cascade = read(&dir, "cascade.csv");
        assert!(cascade.lines().nth(2).unwrap().starts_with("1,0,0.05,"));
        let summary: serde_json::Value =
            serde_json::from_str(&read(&dir, "counterexample.json")).unwrap();
        assert_eq!(summary["threshold_pins"], 0);
        assert_eq!(summary["achieved"], true);
        fs::remove_dir_all(&dir).unwrap();
    }
}
