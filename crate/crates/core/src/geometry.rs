//! Points, axis-aligned boxes, and the cell grid used for neighbor queries.
//!
//! Points are `[f64; 3]` zero-padded beyond the active dimension, so distance
//! code is dimension-agnostic. The cell grid covers the box plus a one-cell
//! collar (cell edge ≥ max(interaction range, 1)), which guarantees that all
//! points within interaction range of a position — interior or fixed boundary —
//! sit in the 3^n cells adjacent to it.

use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 3];

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    dist2(a, b).sqrt()
}

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("dimension must be 1, 2, or 3 (got {0})")]
    BadDimension(usize),
    #[error("axis {axis}: bounds [{lo}, {hi}] are not a finite nonempty interval")]
    BadBounds { axis: usize, lo: f64, hi: f64 },
    #[error("boundary point {index} lies inside the box")]
    BoundaryInsideBox { index: usize },
    #[error("boundary points {i} and {j} violate the hard core (separation {sep})")]
    BoundaryHardCore { i: usize, j: usize, sep: f64 },
}

/// An open-interior axis-aligned box A ⊂ R^n, n ∈ {1,2,3}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    dim: usize,
    lo: Point,
    hi: Point,
}

impl BoxRegion {
    pub fn new(bounds: &[[f64; 2]]) -> Result<Self, GeometryError> {
        let dim = bounds.len();
        if !(1..=3).contains(&dim) {
            return Err(GeometryError::BadDimension(dim));
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for (axis, b) in bounds.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(GeometryError::BadBounds {
                    axis,
                    lo: b[0],
                    hi: b[1],
                });
            }
            lo[axis] = b[0];
            hi[axis] = b[1];
        }
        Ok(BoxRegion { dim, lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lo(&self) -> Point {
        self.lo
    }

    pub fn hi(&self) -> Point {
        self.hi
    }

    pub fn bounds(&self) -> Vec<[f64; 2]> {
        (0..self.dim).map(|k| [self.lo[k], self.hi[k]]).collect()
    }

    /// Lebesgue volume |A| in the active dimension.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.hi[k] - self.lo[k]).product()
    }

    /// Closed containment on the active axes.
    pub fn contains(&self, p: Point) -> bool {
        (0..self.dim).all(|k| self.lo[k] <= p[k] && p[k] <= self.hi[k])
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance_to(&self, p: Point) -> f64 {
        let mut d2 = 0.0;
        for k in 0..self.dim {
            let d = (self.lo[k] - p[k]).max(0.0).max(p[k] - self.hi[k]);
            d2 += d * d;
        }
        d2.sqrt()
    }

    /// Box shrunk by `margin` on every side; None if that empties an axis.
    pub fn shrink(&self, margin: f64) -> Option<BoxRegion> {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..self.dim {
            lo[k] = self.lo[k] + margin;
            hi[k] = self.hi[k] - margin;
            if lo[k] >= hi[k] {
                return None;
            }
        }
        Some(BoxRegion {
            dim: self.dim,
            lo,
            hi,
        })
    }

    /// Does `self` expanded by `margin` stay inside `outer`?
    pub fn fits_within(&self, outer: &BoxRegion, margin: f64) -> bool {
        self.dim == outer.dim
            && (0..self.dim).all(|k| {
                self.lo[k] - margin >= outer.lo[k] && self.hi[k] + margin <= outer.hi[k]
            })
    }

    /// Uniform point in the box (reference-measure intensity 1).
    pub fn sample_uniform(&self, rng: &mut CounterRng) -> Point {
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = rng.uniform_in(self.lo[k], self.hi[k]);
        }
        p
    }

    /// Axis-aligned lattice {lo + collar + k·pitch} ∩ (box shrunk by collar),
    /// in lexicographic order. Empty if the collar empties an axis.
    pub fn lattice(&self, pitch: f64, collar: f64) -> Vec<Point> {
        assert!(pitch > 0.0 && pitch.is_finite(), "pitch must be positive");
        let mut counts = [0usize; 3];
        for k in 0..self.dim {
            let span = (self.hi[k] - collar) - (self.lo[k] + collar);
            if span < 0.0 {
                return Vec::new();
            }
            // Tiny epsilon so an exact multiple of pitch keeps its endpoint.
            counts[k] = (span / pitch + 1e-9).floor() as usize + 1;
        }
        let mut nodes = Vec::new();
        let total: usize = counts[..self.dim].iter().product();
        for flat in 0..total {
            let mut rem = flat;
            let mut p = [0.0; 3];
            for k in 0..self.dim {
                let i = rem % counts[k];
                rem /= counts[k];
                p[k] = self.lo[k] + collar + i as f64 * pitch;
            }
            nodes.push(p);
        }
        nodes
    }
}

/// Validate a fixed exterior condition against the box: points inside A are an
/// error, points beyond the range collar are dropped (they cannot interact),
/// and remaining points must respect the hard core among themselves.
pub fn validate_boundary(
    region: &BoxRegion,
    range: f64,
    hard_core: f64,
    points: &[Point],
) -> Result<Vec<Point>, GeometryError> {
    let mut kept = Vec::new();
    for (index, &p) in points.iter().enumerate() {
        if region.contains(p) {
            return Err(GeometryError::BoundaryInsideBox { index });
        }
        if region.distance_to(p) <= range {
            kept.push(p);
        }
    }
    if hard_core > 0.0 {
        for i in 0..kept.len() {
            for j in (i + 1)..kept.len() {
                let sep = dist(kept[i], kept[j]);
                if sep <= hard_core {
                    return Err(GeometryError::BoundaryHardCore { i, j, sep });
                }
            }
        }
    }
    Ok(kept)
}

/// A neighbor reported by `CellGrid::visit_neighbors`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    Interior(u32),
    Boundary(u32),
}

/// Dense cell grid over the box plus a one-cell collar. Stores u32 indices for
/// two point classes: mutable interior particles and fixed boundary particles.
#[derive(Debug, Clone)]
pub struct CellGrid {
    dim: usize,
    lo: Point,
    cell: [f64; 3],
    n: [usize; 3],
    interior: Vec<Vec<u32>>,
    boundary: Vec<Vec<u32>>,
}

impl CellGrid {
    /// `reach` is the interaction radius the grid must resolve; cell edges are
    /// at least max(reach, 1) so one ring of neighbors covers it.
    pub fn new(region: &BoxRegion, reach: f64) -> Self {
        let edge_min = reach.max(1.0);
        let dim = region.dim();
        let mut lo = [0.0; 3];
        let mut cell = [1.0; 3];
        let mut n = [1usize; 3];
        for k in 0..dim {
            lo[k] = region.lo()[k] - edge_min;
            let extent = (region.hi()[k] + edge_min) - lo[k];
            let cells = (extent / edge_min).floor().max(1.0) as usize;
            n[k] = cells;
            cell[k] = extent / cells as f64;
        }
        let total: usize = n[..dim].iter().product();
        CellGrid {
            dim,
            lo,
            cell,
            n,
            interior: vec![Vec::new(); total],
            boundary: vec![Vec::new(); total],
        }
    }

    fn coords(&self, p: Point) -> [usize; 3] {
        let mut c = [0usize; 3];
        for k in 0..self.dim {
            let i = ((p[k] - self.lo[k]) / self.cell[k]).floor() as isize;
            c[k] = i.clamp(0, self.n[k] as isize - 1) as usize;
        }
        c
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        match self.dim {
            1 => c[0],
            2 => c[0] + self.n[0] * c[1],
            _ => c[0] + self.n[0] * (c[1] + self.n[1] * c[2]),
        }
    }

    pub fn insert_interior(&mut self, idx: u32, p: Point) {
        let f = self.flat(self.coords(p));
        self.interior[f].push(idx);
    }

    pub fn remove_interior(&mut self, idx: u32, p: Point) {
        let f = self.flat(self.coords(p));
        let cell = &mut self.interior[f];
        let pos = cell
            .iter()
            .position(|&i| i == idx)
            .expect("grid out of sync: index missing from its cell");
        cell.swap_remove(pos);
    }

    pub fn move_interior(&mut self, idx: u32, from: Point, to: Point) {
        let a = self.flat(self.coords(from));
        let b = self.flat(self.coords(to));
        if a == b {
            return;
        }
        self.remove_interior(idx, from);
        self.interior[b].push(idx);
    }

    /// After a swap-remove renames the last particle to `new_idx`.
    pub fn rename_interior(&mut self, old_idx: u32, new_idx: u32, p: Point) {
        let f = self.flat(self.coords(p));
        let cell = &mut self.interior[f];
        let pos = cell
            .iter()
            .position(|&i| i == old_idx)
            .expect("grid out of sync: renamed index missing");
        cell[pos] = new_idx;
    }

    pub fn insert_boundary(&mut self, idx: u32, p: Point) {
        let f = self.flat(self.coords(p));
        self.boundary[f].push(idx);
    }

    /// Visit interior and boundary indices in the 3^n cells around `p`.
    /// Covers every point within max(reach, 1) of `p`; callers filter by
    /// actual distance.
    pub fn visit_neighbors(&self, p: Point, mut visit: impl FnMut(Neighbor)) {
        let c = self.coords(p);
        let mut range = [(0usize, 0usize); 3];
        for k in 0..self.dim {
            range[k] = (c[k].saturating_sub(1), (c[k] + 1).min(self.n[k] - 1));
        }
        let mut cur = [0usize; 3];
        let zmax = if self.dim == 3 { range[2].1 } else { 0 };
        let zmin = if self.dim == 3 { range[2].0 } else { 0 };
        let ymax = if self.dim >= 2 { range[1].1 } else { 0 };
        let ymin = if self.dim >= 2 { range[1].0 } else { 0 };
        for z in zmin..=zmax {
            cur[2] = z;
            for y in ymin..=ymax {
                cur[1] = y;
                for x in range[0].0..=range[0].1 {
                    cur[0] = x;
                    let f = self.flat(cur);
                    for &i in &self.interior[f] {
                        visit(Neighbor::Interior(i));
                    }
                    for &i in &self.boundary[f] {
                        visit(Neighbor::Boundary(i));
                    }
                }
            }
        }
    }

    /// Visit each unordered interior pair residing in the same or adjacent
    /// cells exactly once. Finds every pair closer than max(reach, 1).
    pub fn visit_interior_pairs(&self, mut on_pair: impl FnMut(u32, u32)) {
        let total: usize = self.n[..self.dim].iter().product();
        // Half-neighborhood offsets: strictly "forward" cells plus self-cell.
        let offsets = forward_offsets(self.dim);
        for f in 0..total {
            let cell = &self.interior[f];
            if cell.is_empty() {
                continue;
            }
            for a in 0..cell.len() {
                for b in (a + 1)..cell.len() {
                    on_pair(cell[a], cell[b]);
                }
            }
            let c = self.unflat(f);
            for off in &offsets {
                let mut ok = true;
                let mut d = [0usize; 3];
                for k in 0..self.dim {
                    let v = c[k] as isize + off[k];
                    if v < 0 || v >= self.n[k] as isize {
                        ok = false;
                        break;
                    }
                    d[k] = v as usize;
                }
                if !ok {
                    continue;
                }
                let g = self.flat(d);
                for &i in cell {
                    for &j in &self.interior[g] {
                        on_pair(i, j);
                    }
                }
            }
        }
    }

    fn unflat(&self, mut f: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for k in 0..self.dim {
            c[k] = f % self.n[k];
            f /= self.n[k];
        }
        c
    }
}

/// Offsets o ∈ {−1,0,1}^dim that are lexicographically positive (from the
/// highest axis down), so each unordered cell pair is enumerated once.
fn forward_offsets(dim: usize) -> Vec<[isize; 3]> {
    let mut out = Vec::new();
    let axes = dim as u32;
    for code in 0..3usize.pow(axes) {
        let mut o = [0isize; 3];
        let mut rem = code;
        for k in 0..dim {
            o[k] = (rem % 3) as isize - 1;
            rem /= 3;
        }
        // Positive in reverse-lex order: highest nonzero axis must be +1.
        let mut sign = 0;
        for k in (0..dim).rev() {
            if o[k] != 0 {
                sign = o[k];
                break;
            }
        }
        if sign > 0 {
            out.push(o);
        }
    }
    out
}
