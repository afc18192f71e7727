//! Geometric observables over configurations: minimum separations, Delone
//! (packing/covering) radii, empirical density fields, and the close-pair
//! "bad event" statistics used to watch separation laws emerge under cooling.

use crate::configuration::Configuration;
use crate::geometry::{dist, Point};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ObservablesError {
    #[error("{what} must satisfy {requirement} (got {value})")]
    BadParameter {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("no lattice nodes survive the collar trim")]
    EmptyNodeSet,
}

/// Smallest pairwise separation among interior particles; +∞ below two
/// particles. Cell-accelerated with a brute-force fallback: the grid scan is
/// exact whenever it finds any pair within one cell reach.
pub fn min_separation(cfg: &Configuration) -> f64 {
    let pts = cfg.points();
    if pts.len() < 2 {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    cfg.grid().visit_interior_pairs(|i, j| {
        let d = dist(pts[i as usize], pts[j as usize]);
        if d < best {
            best = d;
        }
    });
    if best <= cfg.reach() {
        // Every pair at distance ≤ reach is visited, so nothing unvisited can
        // undercut a visited pair within reach.
        return best;
    }
    brute_min_separation(pts)
}

fn brute_min_separation(pts: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d = dist(pts[i], pts[j]);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Smallest interior-to-boundary separation; +∞ if either side is empty.
pub fn min_boundary_separation(cfg: &Configuration) -> f64 {
    if cfg.is_empty() || cfg.boundary().is_empty() {
        return f64::INFINITY;
    }
    let mut best = f64::INFINITY;
    let mut all_within_reach = true;
    for &x in cfg.points() {
        match cfg.boundary_distance_within_reach(x) {
            Some(d) => {
                if d < best {
                    best = d;
                }
            }
            None => all_within_reach = false,
        }
    }
    if best <= cfg.reach() || all_within_reach {
        return best;
    }
    // Sparse case: some particle saw no boundary point in its cell ring and
    // nothing within reach was found — fall back to the exact double loop.
    let mut exact = f64::INFINITY;
    for &x in cfg.points() {
        for &b in cfg.boundary() {
            let d = dist(x, b);
            if d < exact {
                exact = d;
            }
        }
    }
    exact
}

/// The close-pair bad event at scale ρ: some interior pair, or some
/// interior-boundary pair, is closer than ρ. Exact for ρ within one cell
/// reach (ρ ≤ max(R, 1)), which the separation thresholds always satisfy.
pub fn bad_event(cfg: &Configuration, rho: f64) -> bool {
    assert!(
        rho > 0.0 && rho <= cfg.reach(),
        "bad_event scale {rho} outside the exact window (0, {}]",
        cfg.reach()
    );
    let pts = cfg.points();
    let mut found = false;
    cfg.grid().visit_interior_pairs(|i, j| {
        if !found && dist(pts[i as usize], pts[j as usize]) < rho {
            found = true;
        }
    });
    if found {
        return true;
    }
    cfg.points().iter().any(|&x| {
        cfg.boundary_distance_within_reach(x)
            .is_some_and(|d| d < rho)
    })
}

/// Fraction of sampled configurations hitting the bad event at scale ρ.
pub fn bad_event_fraction<'a>(
    samples: impl IntoIterator<Item = &'a Configuration>,
    rho: f64,
) -> f64 {
    let mut total = 0u64;
    let mut bad = 0u64;
    for cfg in samples {
        total += 1;
        if bad_event(cfg, rho) {
            bad += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

/// Packing radius (min pair separation) and covering radius (largest distance
/// from the collar-trimmed interior to the particle set).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeloneRadii {
    pub packing: f64,
    pub covering: f64,
}

/// Covering is evaluated on the pitch-h lattice over the box shrunk by
/// `collar`, so the reported value carries a discretization error of at most
/// h·√n/2 and ignores the collar strip (where the fixed exterior, not ω_A,
/// is responsible for coverage).
pub fn delone_radii(
    cfg: &Configuration,
    grid_pitch: f64,
    collar: f64,
) -> Result<DeloneRadii, ObservablesError> {
    if !(grid_pitch > 0.0 && grid_pitch.is_finite()) {
        return Err(ObservablesError::BadParameter {
            what: "grid_pitch",
            requirement: "> 0",
            value: grid_pitch,
        });
    }
    if !(collar >= 0.0 && collar.is_finite()) {
        return Err(ObservablesError::BadParameter {
            what: "collar",
            requirement: ">= 0",
            value: collar,
        });
    }
    let nodes = cfg.region().lattice(grid_pitch, collar);
    if nodes.is_empty() {
        return Err(ObservablesError::EmptyNodeSet);
    }
    let mut covering: f64 = 0.0;
    for node in nodes {
        let nearest = cfg
            .points()
            .iter()
            .map(|&p| dist(node, p))
            .fold(f64::INFINITY, f64::min);
        covering = covering.max(nearest);
    }
    Ok(DeloneRadii {
        packing: min_separation(cfg),
        covering,
    })
}

/// Mean unit-ball occupation numbers on a lattice of probe nodes. Nodes keep
/// a collar of 1 (the ball radius) from the box walls so every probe ball
/// lies inside A; for the unit-intensity ideal gas each entry converges to
/// the unit-ball volume.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub pitch: f64,
    pub nodes: Vec<Point>,
    pub mean_counts: Vec<f64>,
    pub samples: u64,
}

/// Streaming accumulator so long runs never hold their samples in memory.
#[derive(Debug, Clone)]
pub struct DensityAccumulator {
    pitch: f64,
    base: Point,
    counts: [usize; 3],
    dim: usize,
    nodes: Vec<Point>,
    sums: Vec<f64>,
    samples: u64,
}

impl DensityAccumulator {
    pub fn new(
        region: &crate::geometry::BoxRegion,
        pitch: f64,
    ) -> Result<Self, ObservablesError> {
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(ObservablesError::BadParameter {
                what: "pitch",
                requirement: "> 0",
                value: pitch,
            });
        }
        const COLLAR: f64 = 1.0; // probe-ball radius
        let nodes = region.lattice(pitch, COLLAR);
        if nodes.is_empty() {
            return Err(ObservablesError::EmptyNodeSet);
        }
        let dim = region.dim();
        let mut base = [0.0; 3];
        let mut counts = [1usize; 3];
        for k in 0..dim {
            base[k] = region.lo()[k] + COLLAR;
            let span = (region.hi()[k] - COLLAR) - base[k];
            counts[k] = (span / pitch + 1e-9).floor() as usize + 1;
        }
        debug_assert_eq!(counts[..dim].iter().product::<usize>(), nodes.len());
        let sums = vec![0.0; nodes.len()];
        Ok(DensityAccumulator {
            pitch,
            base,
            counts,
            dim,
            nodes,
            sums,
            samples: 0,
        })
    }

    /// Count, for every node, the particles in the open unit ball around it.
    pub fn add(&mut self, cfg: &Configuration) {
        self.samples += 1;
        for &p in cfg.points() {
            // Index window of nodes possibly within distance 1 of p.
            let mut lo_idx = [0usize; 3];
            let mut hi_idx = [0usize; 3];
            let mut empty = false;
            for k in 0..self.dim {
                let lo = ((p[k] - 1.0 - self.base[k]) / self.pitch).ceil().max(0.0);
                let hi = ((p[k] + 1.0 - self.base[k]) / self.pitch).floor();
                if hi < lo || hi < 0.0 || lo > (self.counts[k] - 1) as f64 {
                    empty = true;
                    break;
                }
                lo_idx[k] = lo as usize;
                hi_idx[k] = (hi as usize).min(self.counts[k] - 1);
            }
            if empty {
                continue;
            }
            let mut idx = lo_idx;
            loop {
                let flat = match self.dim {
                    1 => idx[0],
                    2 => idx[0] + self.counts[0] * idx[1],
                    _ => idx[0] + self.counts[0] * (idx[1] + self.counts[1] * idx[2]),
                };
                if crate::geometry::dist2(self.nodes[flat], p) < 1.0 {
                    self.sums[flat] += 1.0;
                }
                // Advance the index window odometer.
                let mut k = 0;
                loop {
                    idx[k] += 1;
                    if idx[k] <= hi_idx[k] {
                        break;
                    }
                    idx[k] = lo_idx[k];
                    k += 1;
                    if k == self.dim {
                        break;
                    }
                }
                if k == self.dim {
                    break;
                }
            }
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn finish(self) -> DensityField {
        let n = self.samples.max(1) as f64;
        DensityField {
            pitch: self.pitch,
            nodes: self.nodes,
            mean_counts: self.sums.iter().map(|s| s / n).collect(),
            samples: self.samples,
        }
    }
}

/// One-shot density field over a batch of configurations.
pub fn density_field<'a>(
    samples: impl IntoIterator<Item = &'a Configuration>,
    pitch: f64,
) -> Result<DensityField, ObservablesError> {
    let mut iter = samples.into_iter();
    let first = match iter.next() {
        Some(c) => c,
        None => {
            return Err(ObservablesError::BadParameter {
                what: "samples",
                requirement: ">= 1",
                value: 0.0,
            })
        }
    };
    let mut acc = DensityAccumulator::new(first.region(), pitch)?;
    acc.add(first);
    for cfg in iter {
        acc.add(cfg);
    }
    Ok(acc.finish())
}
