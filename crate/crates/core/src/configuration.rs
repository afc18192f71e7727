//! Finite particle configurations in a box with a fixed exterior condition.
//!
//! A `Configuration` owns the interior points ω_A, the truncated exterior
//! collar ω_{A^c} (fixed for its lifetime), a cell grid for neighbor queries,
//! and a cached conditional energy
//! `H(ω_A | ω_{A^c}) = Σ_{i<j} U(x_i, x_j) + λ·N + Σ_{i,b} U(x_i, y_b)`.
//!
//! Mutations go through delta queries (grid-accelerated) plus trusted applies;
//! a debug-mode audit recomputes the energy by the direct double loop every
//! few thousand mutations and panics on relative disagreement above 1e−9. The
//! cache is refreshed from the double loop periodically in all builds so
//! floating-point drift stays far below the audit tolerance.

use crate::energy::Energy;
use crate::geometry::{dist, validate_boundary, BoxRegion, CellGrid, GeometryError, Neighbor, Point};
use crate::potential::PairPotential;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigurationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point {point:?} lies outside the box")]
    OutsideRegion { point: Point },
    #[error("particle index {index} out of range (count {len})")]
    BadIndex { index: usize, len: usize },
    #[error("operation requires a feasible (finite-energy) configuration")]
    InfeasibleState,
    #[error("snapshot invalid: {what}")]
    BadSnapshot { what: String },
}

/// Provenance stamp every emitted artifact carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotMeta {
    pub version: String,
    pub seed: u64,
    /// Hash of the resolved configuration that produced the file.
    pub config: String,
}

/// On-disk form of a configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<SnapshotMeta>,
    pub dimension: usize,
    pub bounds: Vec<[f64; 2]>,
    pub points: Vec<Vec<f64>>,
    pub boundary_points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Configuration {
    region: BoxRegion,
    boundary: Vec<Point>,
    points: Vec<Point>,
    grid: CellGrid,
    reach: f64,
    cached: Energy,
    mutations: u64,
}

/// Debug audit cadence (mutations between double-loop comparisons).
const AUDIT_INTERVAL: u64 = 4096;
/// Cache refresh cadence in all builds.
const REFRESH_INTERVAL: u64 = 65536;

impl Configuration {
    /// Empty interior with a validated, R-collar-truncated exterior condition.
    pub fn empty(
        region: BoxRegion,
        boundary: &[Point],
        potential: &PairPotential,
    ) -> Result<Self, ConfigurationError> {
        let kept = validate_boundary(&region, potential.range(), potential.hard_core(), boundary)?;
        let mut grid = CellGrid::new(&region, potential.range());
        for (i, &b) in kept.iter().enumerate() {
            grid.insert_boundary(i as u32, b);
        }
        Ok(Configuration {
            region,
            boundary: kept,
            points: Vec::new(),
            grid,
            reach: potential.range(),
            cached: Energy::ZERO,
            mutations: 0,
        })
    }

    /// Configuration with given interior points. The cached energy may be
    /// infinite (hard-core violation); such configurations can be inspected
    /// but not mutated.
    pub fn with_points(
        region: BoxRegion,
        boundary: &[Point],
        points: Vec<Point>,
        potential: &PairPotential,
        lambda: f64,
    ) -> Result<Self, ConfigurationError> {
        let mut cfg = Configuration::empty(region, boundary, potential)?;
        for &x in &points {
            if !cfg.region.contains(x) {
                return Err(ConfigurationError::OutsideRegion { point: x });
            }
        }
        for (i, &x) in points.iter().enumerate() {
            cfg.grid.insert_interior(i as u32, x);
        }
        cfg.points = points;
        cfg.cached = cfg.energy_full(potential, lambda);
        Ok(cfg)
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn boundary(&self) -> &[Point] {
        &self.boundary
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cached H(ω_A | ω_{A^c}) for the (potential, λ) this configuration has
    /// been mutated under.
    pub fn cached_energy(&self) -> Energy {
        self.cached
    }

    pub(crate) fn grid(&self) -> &CellGrid {
        &self.grid
    }

    /// Interaction reach the cell grid was sized for: max(range, hard core, 1).
    pub(crate) fn reach(&self) -> f64 {
        self.reach
    }

    /// Conditional energy by the direct double loop — the oracle path; no
    /// grid, no cache.
    pub fn energy_full(&self, potential: &PairPotential, lambda: f64) -> Energy {
        let mut total = Energy::Finite(lambda * self.points.len() as f64);
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                total += potential.pair_energy(self.points[i], self.points[j]);
                if total.is_infinite() {
                    return Energy::Infinite;
                }
            }
            for &b in &self.boundary {
                total += potential.pair_energy(self.points[i], b);
                if total.is_infinite() {
                    return Energy::Infinite;
                }
            }
        }
        total
    }

    /// Grid-accelerated Σ U(x, ·) over interior points (minus `exclude`) and
    /// the boundary collar.
    fn interaction_sum(&self, x: Point, exclude: Option<usize>, potential: &PairPotential) -> Energy {
        debug_assert!(
            potential.range() <= self.reach,
            "potential range {} exceeds the grid reach {} this configuration was built for",
            potential.range(),
            self.reach
        );
        let mut sum = Energy::ZERO;
        let skip = exclude.map(|i| i as u32);
        self.grid.visit_neighbors(x, |n| match n {
            Neighbor::Interior(i) => {
                if Some(i) != skip {
                    sum += potential.pair_energy(x, self.points[i as usize]);
                }
            }
            Neighbor::Boundary(b) => {
                sum += potential.pair_energy(x, self.boundary[b as usize]);
            }
        });
        sum
    }

    /// ΔH for inserting a particle at `x`; `Infinite` means forbidden.
    pub fn delta_insert(
        &self,
        x: Point,
        potential: &PairPotential,
        lambda: f64,
    ) -> Result<Energy, ConfigurationError> {
        if !self.region.contains(x) {
            return Err(ConfigurationError::OutsideRegion { point: x });
        }
        Ok(Energy::Finite(lambda) + self.interaction_sum(x, None, potential))
    }

    /// ΔH for deleting particle `idx`; always finite on a feasible state.
    pub fn delta_delete(
        &self,
        idx: usize,
        potential: &PairPotential,
        lambda: f64,
    ) -> Result<f64, ConfigurationError> {
        if idx >= self.points.len() {
            return Err(ConfigurationError::BadIndex {
                index: idx,
                len: self.points.len(),
            });
        }
        match self.interaction_sum(self.points[idx], Some(idx), potential) {
            Energy::Finite(s) => Ok(-lambda - s),
            Energy::Infinite => Err(ConfigurationError::InfeasibleState),
        }
    }

    /// ΔH for moving particle `idx` to `to`; `Infinite` means forbidden.
    pub fn delta_move(
        &self,
        idx: usize,
        to: Point,
        potential: &PairPotential,
    ) -> Result<Energy, ConfigurationError> {
        if idx >= self.points.len() {
            return Err(ConfigurationError::BadIndex {
                index: idx,
                len: self.points.len(),
            });
        }
        if !self.region.contains(to) {
            return Err(ConfigurationError::OutsideRegion { point: to });
        }
        let old = match self.interaction_sum(self.points[idx], Some(idx), potential) {
            Energy::Finite(s) => s,
            Energy::Infinite => return Err(ConfigurationError::InfeasibleState),
        };
        Ok(self
            .interaction_sum(to, Some(idx), potential)
            .minus_finite(old))
    }

    /// Apply an insert whose finite ΔH was computed by `delta_insert`.
    pub fn apply_insert(&mut self, x: Point, delta: f64, potential: &PairPotential, lambda: f64) {
        let idx = self.points.len() as u32;
        self.points.push(x);
        self.grid.insert_interior(idx, x);
        self.cached += Energy::Finite(delta);
        self.after_mutation(potential, lambda);
    }

    /// Apply a delete whose ΔH was computed by `delta_delete`. The last
    /// particle is swapped into the hole, so indices above `idx` shift.
    pub fn apply_delete(&mut self, idx: usize, delta: f64, potential: &PairPotential, lambda: f64) {
        let last = self.points.len() - 1;
        let gone = self.points.swap_remove(idx);
        self.grid.remove_interior(idx as u32, gone);
        if idx != last {
            self.grid
                .rename_interior(last as u32, idx as u32, self.points[idx]);
        }
        self.cached += Energy::Finite(delta);
        self.after_mutation(potential, lambda);
    }

    /// Apply a displacement whose finite ΔH was computed by `delta_move`.
    pub fn apply_move(
        &mut self,
        idx: usize,
        to: Point,
        delta: f64,
        potential: &PairPotential,
        lambda: f64,
    ) {
        let from = self.points[idx];
        self.points[idx] = to;
        self.grid.move_interior(idx as u32, from, to);
        self.cached += Energy::Finite(delta);
        self.after_mutation(potential, lambda);
    }

    fn after_mutation(&mut self, potential: &PairPotential, lambda: f64) {
        self.mutations += 1;
        if self.mutations % REFRESH_INTERVAL == 0 {
            self.cached = self.energy_full(potential, lambda);
            return;
        }
        #[cfg(debug_assertions)]
        if self.mutations % AUDIT_INTERVAL == 0 {
            self.audit(potential, lambda);
        }
    }

    #[cfg(debug_assertions)]
    fn audit(&self, potential: &PairPotential, lambda: f64) {
        let full = self.energy_full(potential, lambda);
        match (self.cached, full) {
            (Energy::Finite(c), Energy::Finite(f)) => {
                let tol = 1e-9 * f.abs().max(1.0);
                assert!(
                    (c - f).abs() <= tol,
                    "energy cache drifted: cached {c}, recomputed {f}"
                );
            }
            (c, f) => assert!(
                c.is_infinite() == f.is_infinite(),
                "energy cache disagrees on infinity: cached {c}, recomputed {f}"
            ),
        }
    }

    /// Nearest distance from `x` to the fixed boundary collar, using only the
    /// grid neighborhood; `None` if no boundary point lies within one cell
    /// reach (i.e. the true distance exceeds max(R, 1)).
    pub(crate) fn boundary_distance_within_reach(&self, x: Point) -> Option<f64> {
        let mut best: Option<f64> = None;
        self.grid.visit_neighbors(x, |n| {
            if let Neighbor::Boundary(b) = n {
                let d = dist(x, self.boundary[b as usize]);
                if best.is_none_or(|cur| d < cur) {
                    best = Some(d);
                }
            }
        });
        best
    }

    pub fn to_snapshot(&self) -> Snapshot {
        let dim = self.region.dim();
        let strip = |p: &Point| p[..dim].to_vec();
        Snapshot {
            meta: None,
            dimension: dim,
            bounds: self.region.bounds(),
            points: self.points.iter().map(strip).collect(),
            boundary_points: self.boundary.iter().map(strip).collect(),
        }
    }

    /// Rebuild from a snapshot; the cached energy is recomputed under
    /// (potential, lambda) and may come back infinite for invalid snapshots —
    /// callers decide whether that is an error.
    pub fn from_snapshot(
        snap: &Snapshot,
        potential: &PairPotential,
        lambda: f64,
    ) -> Result<Self, ConfigurationError> {
        if snap.dimension != snap.bounds.len() {
            return Err(ConfigurationError::BadSnapshot {
                what: format!(
                    "dimension {} does not match bounds count {}",
                    snap.dimension,
                    snap.bounds.len()
                ),
            });
        }
        let region = BoxRegion::new(&snap.bounds)?;
        let lift = |coords: &Vec<f64>, what: &str| -> Result<Point, ConfigurationError> {
            if coords.len() != snap.dimension {
                return Err(ConfigurationError::BadSnapshot {
                    what: format!(
                        "{what} has {} coordinates, expected {}",
                        coords.len(),
                        snap.dimension
                    ),
                });
            }
            if coords.iter().any(|c| !c.is_finite()) {
                return Err(ConfigurationError::BadSnapshot {
                    what: format!("{what} has a non-finite coordinate"),
                });
            }
            let mut p = [0.0; 3];
            p[..coords.len()].copy_from_slice(coords);
            Ok(p)
        };
        let points = snap
            .points
            .iter()
            .map(|c| lift(c, "point"))
            .collect::<Result<Vec<_>, _>>()?;
        let boundary = snap
            .boundary_points
            .iter()
            .map(|c| lift(c, "boundary point"))
            .collect::<Result<Vec<_>, _>>()?;
        Configuration::with_points(region, &boundary, points, potential, lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn rod_box(len: f64) -> BoxRegion {
        BoxRegion::new(&[[0.0, len]]).unwrap()
    }

    #[test]
    fn hand_computed_energies() {
        let p = PairPotential::hard_rod();
        // Two rods, gap 1.5: no interaction, H = 2λ.
        let cfg = Configuration::with_points(
            rod_box(3.0),
            &[],
            vec![[0.5, 0.0, 0.0], [2.0, 0.0, 0.0]],
            &p,
            2.0,
        )
        .unwrap();
        assert_eq!(cfg.energy_full(&p, 2.0), Energy::Finite(4.0));
        assert_eq!(cfg.cached_energy(), Energy::Finite(4.0));
        // Overlapping rods: infinite.
        let bad = Configuration::with_points(
            rod_box(3.0),
            &[],
            vec![[0.5, 0.0, 0.0], [1.2, 0.0, 0.0]],
            &p,
            2.0,
        )
        .unwrap();
        assert!(bad.cached_energy().is_infinite());
    }

    #[test]
    fn boundary_cross_terms_count() {
        let shoulder = PairPotential::hard_core_shoulder(1.0, 1.0, 0.0, 2.0, 1.0).unwrap();
        // Interior at 2.8, pin at 4.0 (outside [0,3], inside collar): r = 1.2,
        // u = 1/0.2 = 5; H = λ + 5.
        let cfg = Configuration::with_points(
            rod_box(3.0),
            &[[4.0, 0.0, 0.0]],
            vec![[2.8, 0.0, 0.0]],
            &shoulder,
            0.25,
        )
        .unwrap();
        let h = cfg.cached_energy().expect_finite("H");
        assert!((h - 5.25).abs() < 1e-12, "H = {h}");
        // A pin within hard-core reach forces infinity.
        let cfg2 = Configuration::with_points(
            rod_box(3.0),
            &[[3.5, 0.0, 0.0]],
            vec![[2.8, 0.0, 0.0]],
            &shoulder,
            0.0,
        )
        .unwrap();
        assert!(cfg2.cached_energy().is_infinite());
    }

    #[test]
    fn deltas_match_full_recompute_on_random_walk() {
        // Mini oracle-equivalence run: random inserts/deletes/moves on a 2D
        // shoulder system, each delta checked against the double loop.
        let p = PairPotential::hard_core_shoulder(1.0, 1.0, 0.2, 1.5, 1.0).unwrap();
        let lambda = -0.4;
        let region = BoxRegion::new(&[[0.0, 6.0], [0.0, 6.0]]).unwrap();
        let boundary = [[6.8, 3.0, 0.0], [-0.9, 1.0, 0.0]];
        let mut cfg = Configuration::empty(region.clone(), &boundary, &p).unwrap();
        let mut rng = CounterRng::from_path(99, &[1]);
        let mut infinite_seen = 0;
        for step in 0..400 {
            let before = cfg.energy_full(&p, lambda);
            let choice = rng.below(3);
            if choice == 0 || cfg.is_empty() {
                let x = region.sample_uniform(&mut rng);
                let d = cfg.delta_insert(x, &p, lambda).unwrap();
                let mut trial = cfg.clone();
                trial.points.push(x);
                let after = trial_energy(&trial, &p, lambda);
                match d {
                    Energy::Finite(df) => {
                        let expect = after.expect_finite("after") - before.expect_finite("before");
                        assert!((df - expect).abs() <= 1e-9, "step {step}: insert delta");
                        cfg.apply_insert(x, df, &p, lambda);
                    }
                    Energy::Infinite => {
                        assert!(after.is_infinite(), "step {step}: insert infinity");
                        infinite_seen += 1;
                    }
                }
            } else if choice == 1 {
                let idx = rng.below(cfg.len());
                let df = cfg.delta_delete(idx, &p, lambda).unwrap();
                let mut trial = cfg.clone();
                trial.points.swap_remove(idx);
                let after = trial_energy(&trial, &p, lambda);
                let expect = after.expect_finite("after") - before.expect_finite("before");
                assert!((df - expect).abs() <= 1e-9, "step {step}: delete delta");
                cfg.apply_delete(idx, df, &p, lambda);
            } else {
                let idx = rng.below(cfg.len());
                let to = region.sample_uniform(&mut rng);
                let d = cfg.delta_move(idx, to, &p).unwrap();
                let mut trial = cfg.clone();
                trial.points[idx] = to;
                let after = trial_energy(&trial, &p, lambda);
                match d {
                    Energy::Finite(df) => {
                        let expect = after.expect_finite("after") - before.expect_finite("before");
                        assert!((df - expect).abs() <= 1e-9, "step {step}: move delta");
                        cfg.apply_move(idx, to, df, &p, lambda);
                    }
                    Energy::Infinite => {
                        assert!(after.is_infinite(), "step {step}: move infinity");
                        infinite_seen += 1;
                    }
                }
            }
            // Cache stays glued to the oracle.
            let full = cfg.energy_full(&p, lambda);
            let c = cfg.cached_energy().expect_finite("cache");
            let f = full.expect_finite("full");
            assert!((c - f).abs() <= 1e-9 * f.abs().max(1.0), "step {step}: cache drift");
        }
        assert!(infinite_seen > 0, "walk never exercised the hard core");
    }

    /// Double loop over a trial clone whose grid is stale — only points()
    /// and boundary() matter here.
    fn trial_energy(cfg: &Configuration, p: &PairPotential, lambda: f64) -> Energy {
        let mut total = Energy::Finite(lambda * cfg.points.len() as f64);
        for i in 0..cfg.points.len() {
            for j in (i + 1)..cfg.points.len() {
                total += p.pair_energy(cfg.points[i], cfg.points[j]);
            }
            for &b in &cfg.boundary {
                total += p.pair_energy(cfg.points[i], b);
            }
        }
        total
    }

    #[test]
    fn swap_delete_keeps_grid_consistent() {
        let p = PairPotential::hard_rod();
        let region = rod_box(10.0);
        let pts: Vec<Point> = (0..5).map(|i| [1.5 * i as f64 + 0.5, 0.0, 0.0]).collect();
        let mut cfg = Configuration::with_points(region, &[], pts, &p, 1.0).unwrap();
        let d = cfg.delta_delete(1, &p, 1.0).unwrap();
        cfg.apply_delete(1, d, &p, 1.0);
        assert_eq!(cfg.len(), 4);
        // The renamed particle (old index 4 at x=6.5) must still be findable:
        // inserting next to it must be forbidden.
        let overlap = cfg.delta_insert([6.6, 0.0, 0.0], &p, 1.0).unwrap();
        assert!(overlap.is_infinite());
        // And the cache still matches the oracle.
        assert_eq!(cfg.cached_energy(), cfg.energy_full(&p, 1.0));
    }

    #[test]
    fn domain_errors() {
        let p = PairPotential::hard_rod();
        let cfg = Configuration::with_points(rod_box(3.0), &[], vec![[1.0, 0.0, 0.0]], &p, 0.0)
            .unwrap();
        assert!(matches!(
            cfg.delta_insert([5.0, 0.0, 0.0], &p, 0.0),
            Err(ConfigurationError::OutsideRegion { .. })
        ));
        assert!(matches!(
            cfg.delta_delete(3, &p, 0.0),
            Err(ConfigurationError::BadIndex { .. })
        ));
        assert!(matches!(
            Configuration::with_points(rod_box(3.0), &[], vec![[9.0, 0.0, 0.0]], &p, 0.0),
            Err(ConfigurationError::OutsideRegion { .. })
        ));
    }

    #[test]
    fn snapshot_round_trip() {
        let p = PairPotential::hard_core_shoulder(1.0, 1.0, 0.0, 1.5, 1.0).unwrap();
        let region = BoxRegion::new(&[[0.0, 4.0], [0.0, 4.0]]).unwrap();
        let cfg = Configuration::with_points(
            region,
            &[[4.5, 2.0, 0.0]],
            vec![[1.0, 1.0, 0.0], [2.5, 2.5, 0.0]],
            &p,
            -1.0,
        )
        .unwrap();
        let snap = cfg.to_snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: Snapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(back, snap);
        let cfg2 = Configuration::from_snapshot(&back, &p, -1.0).unwrap();
        assert_eq!(cfg2.points(), cfg.points());
        assert_eq!(cfg2.boundary(), cfg.boundary());
        assert_eq!(cfg2.cached_energy(), cfg.cached_energy());
        // Unknown fields are rejected.
        let broken = r#"{"dimension":1,"bounds":[[0,1]],"points":[],"boundary_points":[],"extra":1}"#;
        assert!(serde_json::from_str::<Snapshot>(broken).is_err());
        // Mismatched coordinate counts are rejected.
        let snap_bad = Snapshot {
            meta: None,
            dimension: 2,
            bounds: vec![[0.0, 1.0], [0.0, 1.0]],
            points: vec![vec![0.5]],
            boundary_points: vec![],
        };
        assert!(Configuration::from_snapshot(&snap_bad, &p, 0.0).is_err());
    }
}
