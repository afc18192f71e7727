//! Local-minimality certification: search a bounded window for energy-lowering
//! modifications (deletions, grid insertions, small displacements) holding the
//! exterior fixed. PASS is a budget-limited certificate ("no violation found"),
//! never a proof of global local optimality; FAIL is sound and re-verified
//! against the full energy oracle.

use crate::configuration::Configuration;
use crate::energy::Energy;
use crate::geometry::{dist, BoxRegion, Point};
use crate::potential::{PairPotential, PotentialError};
use crate::rng::CounterRng;
use thiserror::Error;

/// Hard cap on discrete candidates (deletion subsets × insertion subsets).
pub const CANDIDATE_CAP: u64 = 1_000_000;

/// Gaps within this of zero count as "no violation" — well above the 1e-9
/// incremental-energy audit tolerance, well below physical gaps.
pub const GAP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GroundStateError {
    #[error("{what} must satisfy {requirement} (got {value})")]
    BadParameter {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("window plus an interaction-range collar must fit inside the box")]
    WindowNotContained,
    #[error(
        "displacement radius {value} exceeds the safe limit {limit} \
         (half the gap between the separation threshold and the hard core)"
    )]
    DisplacementTooLarge { limit: f64, value: f64 },
    #[error("configuration has infinite energy; the gap is undefined")]
    InfiniteEnergy,
    #[error(
        "search would enumerate {candidates} discrete candidates (cap {cap}); \
         shrink the window, coarsen the insertion pitch, or lower the budgets"
    )]
    BudgetExceeded { candidates: u128, cap: u64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// A bounded test window with its perturbation budget.
///
/// The displacement radius is capped at (ρ(λ) − 1)/2 — half the gap between
/// the minimum-separation threshold and the hard core — so that displaced
/// particles keep one-per-unit-ball identity on well-separated configurations.
/// Families whose tail never crosses the threshold (no divergence at the core)
/// fall back to a flat cap of 1/2.
#[derive(Debug, Clone)]
pub struct WindowTest {
    window: BoxRegion,
    max_deletions: usize,
    max_insertions: usize,
    displacement_radius: f64,
    grid_pitch: f64,
}

impl WindowTest {
    pub fn new(
        window: BoxRegion,
        max_deletions: usize,
        max_insertions: usize,
        displacement_radius: f64,
        grid_pitch: f64,
    ) -> Result<Self, GroundStateError> {
        if !(displacement_radius > 0.0 && displacement_radius.is_finite()) {
            return Err(GroundStateError::BadParameter {
                what: "displacement_radius",
                requirement: "> 0 and finite",
                value: displacement_radius,
            });
        }
        if !(grid_pitch > 0.0 && grid_pitch.is_finite()) {
            return Err(GroundStateError::BadParameter {
                what: "grid_pitch",
                requirement: "> 0 and finite",
                value: grid_pitch,
            });
        }
        Ok(WindowTest {
            window,
            max_deletions,
            max_insertions,
            displacement_radius,
            grid_pitch,
        })
    }

    pub fn window(&self) -> &BoxRegion {
        &self.window
    }

    pub fn displacement_radius(&self) -> f64 {
        self.displacement_radius
    }

    /// The displacement cap for this potential at this chemical potential.
    pub fn displacement_limit(p: &PairPotential, lambda: f64, dim: usize) -> f64 {
        match p.rho_threshold(lambda, dim) {
            Ok(rho) => (rho - 1.0) / 2.0,
            Err(_) => 0.5,
        }
    }

    pub fn validate_for(
        &self,
        cfg: &Configuration,
        p: &PairPotential,
        lambda: f64,
    ) -> Result<(), GroundStateError> {
        if self.window.dim() != cfg.region().dim()
            || !self.window.fits_within(cfg.region(), p.range())
        {
            return Err(GroundStateError::WindowNotContained);
        }
        let limit = Self::displacement_limit(p, lambda, cfg.region().dim());
        if self.displacement_radius > limit + 1e-12 {
            return Err(GroundStateError::DisplacementTooLarge {
                limit,
                value: self.displacement_radius,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

/// The best modification found, as a diff against the original window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Perturbation {
    pub deleted: Vec<Point>,
    pub inserted: Vec<Point>,
    pub moved: Vec<(Point, Point)>,
}

impl Perturbation {
    pub fn is_identity(&self) -> bool {
        self.deleted.is_empty() && self.inserted.is_empty() && self.moved.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationReport {
    /// Conditional energy of the unmodified window given the exterior.
    pub baseline: f64,
    /// Most negative gap found; ≤ 0 because the identity is always searched.
    pub best_gap: f64,
    pub perturbation: Perturbation,
    /// Discrete candidates enumerated (each seeds one descent).
    pub searched: u64,
    pub verdict: Verdict,
    pub tolerance: f64,
}

/// Conditional window energy of candidate positions `w` given fixed context
/// points, excluding the λ|w| term (handled by the caller; it is constant
/// during displacement descent).
fn window_pair_energy(w: &[Point], context: &[Point], p: &PairPotential) -> Energy {
    let mut total = Energy::ZERO;
    for i in 0..w.len() {
        for j in (i + 1)..w.len() {
            total += p.pair_energy(w[i], w[j]);
            if total.is_infinite() {
                return total;
            }
        }
        for &c in context {
            total += p.pair_energy(w[i], c);
            if total.is_infinite() {
                return total;
            }
        }
    }
    total
}

/// Energy of one particle at `pos` against the rest of the window and the
/// context (the only terms a single-particle move changes).
fn particle_energy(
    pos: Point,
    skip: usize,
    w: &[Point],
    context: &[Point],
    p: &PairPotential,
) -> Energy {
    let mut total = Energy::ZERO;
    for (j, &other) in w.iter().enumerate() {
        if j == skip {
            continue;
        }
        total += p.pair_energy(pos, other);
        if total.is_infinite() {
            return total;
        }
    }
    for &c in context {
        total += p.pair_energy(pos, c);
        if total.is_infinite() {
            return total;
        }
    }
    total
}

/// Deterministic pattern descent: sweep particles axis by axis with a halving
/// step, each constrained to the closed r-ball about its anchor intersected
/// with the window. Accepts strict decreases only, so the result never exceeds
/// the starting energy.
fn descend(
    w: &mut [Point],
    anchors: &[Point],
    context: &[Point],
    p: &PairPotential,
    window: &BoxRegion,
    r: f64,
    start_energy: f64,
) -> f64 {
    let dim = window.dim();
    let mut current = start_energy;
    let mut step = r / 2.0;
    for _level in 0..12 {
        for _sweep in 0..4 {
            let mut improved = false;
            for i in 0..w.len() {
                let old = match particle_energy(w[i], i, w, context, p).as_finite() {
                    Some(v) => v,
                    None => continue, // cannot happen from a finite state
                };
                for axis in 0..dim {
                    for sign in [-1.0, 1.0] {
                        let mut cand = w[i];
                        cand[axis] += sign * step;
                        if dist(cand, anchors[i]) > r || !window.contains(cand) {
                            continue;
                        }
                        if let Some(new) =
                            particle_energy(cand, i, w, context, p).as_finite()
                        {
                            if new < old {
                                current += new - old;
                                w[i] = cand;
                                improved = true;
                                break;
                            }
                        }
                    }
                    if improved {
                        break;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        step /= 2.0;
    }
    current
}

/// Size-then-lexicographic enumeration of index subsets up to `k_max`; the
/// fixed order makes tie-breaking deterministic (first strictly better wins,
/// i.e. the smallest encoding).
fn subsets_up_to(n: usize, k_max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for k in 1..=k_max.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(idx.clone());
            // Advance the combination odometer.
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if idx[i] != i + n - k {
                    idx[i] += 1;
                    for j in (i + 1)..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    idx.clear();
                    break;
                }
            }
            if idx.is_empty() {
                break;
            }
        }
    }
    out
}

fn choose_sum(n: u128, k_max: usize) -> u128 {
    let mut total: u128 = 0;
    let mut c: u128 = 1;
    for k in 0..=k_max.min(n as usize) {
        if k > 0 {
            c = c.saturating_mul(n - (k as u128 - 1)) / k as u128;
        }
        total = total.saturating_add(c);
    }
    total
}

/// Search the window's perturbation family for the most energy-lowering
/// modification. The exterior (particles outside the window and the fixed
/// boundary) is held fixed; only context within interaction range of the
/// window enters the conditional energies, which is exact because the window
/// carries an R-collar inside the box.
pub fn excitation_gap(
    cfg: &Configuration,
    test: &WindowTest,
    p: &PairPotential,
    lambda: f64,
) -> Result<ExcitationReport, GroundStateError> {
    test.validate_for(cfg, p, lambda)?;
    if cfg.cached_energy().is_infinite() {
        return Err(GroundStateError::InfiniteEnergy);
    }
    let window = &test.window;
    let range = p.range();

    // Partition: window particles vs fixed context within reach.
    let mut window_pts: Vec<Point> = Vec::new();
    let mut context: Vec<Point> = Vec::new();
    for &x in cfg.points() {
        if window.contains(x) {
            window_pts.push(x);
        } else if window.distance_to(x) <= range {
            context.push(x);
        }
    }
    for &b in cfg.boundary() {
        if window.distance_to(b) <= range {
            context.push(b);
        }
    }

    // Estimate the node count before materializing the lattice, so an absurd
    // pitch fails with a budget error instead of exhausting memory.
    let node_estimate: u128 = if test.max_insertions > 0 {
        (0..window.dim())
            .map(|k| {
                let span = window.hi()[k] - window.lo()[k];
                (span / test.grid_pitch + 1e-9).floor() as u128 + 1
            })
            .product()
    } else {
        0
    };
    if node_estimate > CANDIDATE_CAP as u128 {
        return Err(GroundStateError::BudgetExceeded {
            candidates: node_estimate,
            cap: CANDIDATE_CAP,
        });
    }
    let nodes = if test.max_insertions > 0 {
        window.lattice(test.grid_pitch, 0.0)
    } else {
        Vec::new()
    };

    let del_count = choose_sum(window_pts.len() as u128, test.max_deletions);
    let ins_count = choose_sum(nodes.len() as u128, test.max_insertions);
    let candidates = del_count.saturating_mul(ins_count);
    if candidates > CANDIDATE_CAP as u128 {
        return Err(GroundStateError::BudgetExceeded {
            candidates,
            cap: CANDIDATE_CAP,
        });
    }

    let baseline_pairs = window_pair_energy(&window_pts, &context, p)
        .as_finite()
        .ok_or(GroundStateError::InfiniteEnergy)?;
    let baseline = baseline_pairs + lambda * window_pts.len() as f64;

    let del_subsets = subsets_up_to(window_pts.len(), test.max_deletions);
    let ins_subsets = subsets_up_to(nodes.len(), test.max_insertions);

    let mut searched: u64 = 0;
    let mut best_gap = f64::INFINITY;
    let mut best_w: Vec<Point> = Vec::new();
    let mut best_kept: Vec<usize> = Vec::new();
    let mut best_ins = 0usize;

    for del in &del_subsets {
        let kept: Vec<usize> =
            (0..window_pts.len()).filter(|i| !del.contains(i)).collect();
        for ins in &ins_subsets {
            searched += 1;
            let mut w: Vec<Point> = kept.iter().map(|&i| window_pts[i]).collect();
            w.extend(ins.iter().map(|&i| nodes[i]));
            let start = match window_pair_energy(&w, &context, p).as_finite() {
                Some(v) => v,
                None => continue, // infeasible skeleton; descent is undefined from +∞
            };
            let anchors = w.clone();
            let after = descend(
                &mut w,
                &anchors,
                &context,
                p,
                window,
                test.displacement_radius,
                start,
            );
            let gap = (after + lambda * w.len() as f64) - baseline;
            if gap < best_gap {
                best_gap = gap;
                best_w = w;
                best_kept = kept.clone();
                best_ins = ins.len();
            }
        }
    }

    debug_assert!(best_gap <= 0.0, "identity candidate bounds the gap at 0");
    let best_gap = best_gap.min(0.0);

    // Express the winner as a diff against the original window.
    let mut perturbation = Perturbation::default();
    let kept_set: Vec<bool> = {
        let mut v = vec![false; window_pts.len()];
        for &i in &best_kept {
            v[i] = true;
        }
        v
    };
    for (i, &orig) in window_pts.iter().enumerate() {
        if !kept_set[i] {
            perturbation.deleted.push(orig);
        }
    }
    for (slot, &i) in best_kept.iter().enumerate() {
        if best_w[slot] != window_pts[i] {
            perturbation.moved.push((window_pts[i], best_w[slot]));
        }
    }
    let survivors = best_kept.len();
    perturbation
        .inserted
        .extend_from_slice(&best_w[survivors..survivors + best_ins]);

    let verdict = if best_gap < -GAP_TOLERANCE {
        Verdict::Fail
    } else {
        Verdict::Pass
    };

    let report = ExcitationReport {
        baseline,
        best_gap,
        perturbation,
        searched,
        verdict,
        tolerance: GAP_TOLERANCE,
    };

    if verdict == Verdict::Fail {
        // Soundness: the stored perturbation must reproduce the gap through
        // the full (non-incremental) energy oracle.
        let full = verify_gap(cfg, &report, p, lambda)?;
        assert!(
            (full - report.best_gap).abs() <= 1e-9,
            "FAIL gap {} does not re-verify (full oracle: {full})",
            report.best_gap
        );
    }
    Ok(report)
}

/// Re-evaluate a report's perturbation from scratch: apply the diff to the
/// configuration and compare total energies computed by the O(N²) oracle.
pub fn verify_gap(
    cfg: &Configuration,
    report: &ExcitationReport,
    p: &PairPotential,
    lambda: f64,
) -> Result<f64, GroundStateError> {
    let original = cfg
        .cached_energy()
        .as_finite()
        .ok_or(GroundStateError::InfiniteEnergy)?;
    let mut pts: Vec<Point> = cfg.points().to_vec();
    let mut take = |target: Point| -> bool {
        if let Some(pos) = pts.iter().position(|&q| q == target) {
            pts.swap_remove(pos);
            true
        } else {
            false
        }
    };
    for &d in &report.perturbation.deleted {
        if !take(d) {
            return Err(GroundStateError::BadParameter {
                what: "perturbation",
                requirement: "deleted points must exist in the configuration",
                value: f64::NAN,
            });
        }
    }
    for &(from, _) in &report.perturbation.moved {
        if !take(from) {
            return Err(GroundStateError::BadParameter {
                what: "perturbation",
                requirement: "moved points must exist in the configuration",
                value: f64::NAN,
            });
        }
    }
    pts.extend(report.perturbation.moved.iter().map(|&(_, to)| to));
    pts.extend_from_slice(&report.perturbation.inserted);
    let candidate = Configuration::with_points(
        cfg.region().clone(),
        cfg.boundary(),
        pts,
        p,
        lambda,
    )
    .map_err(|_| GroundStateError::InfiniteEnergy)?;
    let modified = candidate
        .cached_energy()
        .as_finite()
        .ok_or(GroundStateError::InfiniteEnergy)?;
    Ok(modified - original)
}

/// Draw `samples` random r-perturbations: every window particle displaced
/// independently and uniformly in the open r-ball about its position,
/// redrawing any draw that lands inside another particle's hard core. A
/// particle that cannot be placed after many redraws stays put — the zero
/// displacement is admissible because every earlier placement was checked
/// against this particle's original position.
pub fn r_perturbations(
    cfg: &Configuration,
    window: &BoxRegion,
    r: f64,
    samples: usize,
    p: &PairPotential,
    lambda: f64,
    rng: &mut CounterRng,
) -> Result<Vec<Configuration>, GroundStateError> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(GroundStateError::BadParameter {
            what: "r",
            requirement: "> 0 and finite",
            value: r,
        });
    }
    let dim = cfg.region().dim();
    let hc2 = p.hard_core() * p.hard_core();
    let mut out = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut pts = cfg.points().to_vec();
        for i in 0..pts.len() {
            if !window.contains(cfg.points()[i]) {
                continue;
            }
            let orig = cfg.points()[i];
            let mut placed = false;
            for _try in 0..256 {
                let cand = displace_in_ball(orig, r, dim, cfg.region(), rng);
                let feasible = pts
                    .iter()
                    .enumerate()
                    .all(|(j, &q)| j == i || crate::geometry::dist2(cand, q) > hc2)
                    && cfg
                        .boundary()
                        .iter()
                        .all(|&b| crate::geometry::dist2(cand, b) > hc2);
                if feasible {
                    pts[i] = cand;
                    placed = true;
                    break;
                }
            }
            if !placed {
                pts[i] = orig; // zero displacement, always admissible
            }
        }
        let perturbed =
            Configuration::with_points(cfg.region().clone(), cfg.boundary(), pts, p, lambda)
                .map_err(|_| GroundStateError::InfiniteEnergy)?;
        out.push(perturbed);
    }
    Ok(out)
}

/// Uniform draw in the open r-ball about `center`, clipped to the box by
/// rejection (the center itself is interior, so the intersection has positive
/// volume and the loop terminates quickly).
fn displace_in_ball(
    center: Point,
    r: f64,
    dim: usize,
    region: &BoxRegion,
    rng: &mut CounterRng,
) -> Point {
    loop {
        let mut cand = center;
        let mut norm2 = 0.0;
        for item in cand.iter_mut().take(dim) {
            let d = rng.uniform_in(-r, r);
            *item += d;
            norm2 += d * d;
        }
        if norm2 < r * r && region.contains(cand) {
            return cand;
        }
    }
}

/// Gap distribution over a sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct GapSummary {
    pub gaps: Vec<f64>,
    pub tolerance: f64,
}

impl GapSummary {
    pub fn fail_fraction(&self) -> f64 {
        self.fraction_below(-self.tolerance)
    }

    /// Fraction of samples with gap strictly below `threshold`.
    pub fn fraction_below(&self, threshold: f64) -> f64 {
        if self.gaps.is_empty() {
            return 0.0;
        }
        self.gaps.iter().filter(|&&g| g < threshold).count() as f64 / self.gaps.len() as f64
    }

    pub fn mean_gap(&self) -> f64 {
        if self.gaps.is_empty() {
            return 0.0;
        }
        self.gaps.iter().sum::<f64>() / self.gaps.len() as f64
    }

    /// Histogram over [lo, hi) with equal bins; out-of-range gaps clamp to
    /// the edge bins so mass is conserved.
    pub fn histogram(&self, lo: f64, hi: f64, bins: usize) -> Vec<u64> {
        let mut counts = vec![0u64; bins.max(1)];
        let width = (hi - lo) / bins.max(1) as f64;
        for &g in &self.gaps {
            let idx = ((g - lo) / width).floor();
            let idx = (idx.max(0.0) as usize).min(counts.len() - 1);
            counts[idx] += 1;
        }
        counts
    }
}

pub fn gap_statistics<'a>(
    samples: impl IntoIterator<Item = &'a Configuration>,
    test: &WindowTest,
    p: &PairPotential,
    lambda: f64,
) -> Result<GapSummary, GroundStateError> {
    let mut gaps = Vec::new();
    for cfg in samples {
        gaps.push(excitation_gap(cfg, test, p, lambda)?.best_gap);
    }
    Ok(GapSummary {
        gaps,
        tolerance: GAP_TOLERANCE,
    })
}
