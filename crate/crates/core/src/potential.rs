//! Pair potentials: hard core, divergence near contact, finite range, and a
//! certified lower bound.
//!
//! Two production families plus two degenerate test families:
//!
//! * `hard_core_shoulder` — U = ∞ for r ≤ 1, then J/(r−1)^α − a on (1, R],
//!   0 beyond R. Diverges at contact, strictly decreasing on (1, R], bounded
//!   below by −a. The truncated tail may jump at R; nothing downstream needs
//!   continuity there, and the raw form keeps the threshold inversion
//!   ρ = 1 + (J/(T+a))^{1/α} exact.
//! * `soft_bump` — no hard core; plateau +h out to r1 < 1/3, well −w on
//!   (r1, r2] with r2 > 2, linear return to 0 at R. The density-pumping
//!   construction lives here. w = 0 is allowed as the ablation control.
//! * `hard_rod` — unit hard core, tail ≡ 0.
//! * `ideal` — no interaction at all (the Poisson reference in disguise).

use crate::energy::Energy;
use crate::geometry::{dist2, Point};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("{what} must satisfy {requirement} (got {value})")]
    BadParameter {
        what: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("evaluate requires a positive separation (got {0})")]
    NonPositiveRadius(f64),
    #[error("operation requires a unit-hard-core potential")]
    NoHardCore,
    #[error("operation requires a tail diverging at contact")]
    NonDivergentTail,
}

fn require(
    ok: bool,
    what: &'static str,
    requirement: &'static str,
    value: f64,
) -> Result<(), PotentialError> {
    if ok {
        Ok(())
    } else {
        Err(PotentialError::BadParameter {
            what,
            requirement,
            value,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    HardCoreShoulder,
    SoftBump,
    HardRod,
    Ideal,
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    HardCoreShoulder { j: f64, alpha: f64, well: f64 },
    SoftBump { plateau: f64, well: f64, r1: f64, r2: f64 },
    HardRod,
    Ideal,
}

/// A validated pair potential. `hard_core` is the exclusion diameter (1 or 0),
/// `range` the interaction radius R, `lower_bound` a certified m > 0 with
/// U ≥ −m everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPotential {
    family: Family,
    hard_core: f64,
    range: f64,
    lower_bound: f64,
}

impl PairPotential {
    pub fn hard_core_shoulder(
        j: f64,
        alpha: f64,
        well_depth: f64,
        range: f64,
        lower_bound: f64,
    ) -> Result<Self, PotentialError> {
        require(j.is_finite() && j > 0.0, "J", "> 0", j)?;
        require(alpha.is_finite() && alpha >= 1.0, "alpha", ">= 1", alpha)?;
        require(range.is_finite() && range > 1.0, "range", "> 1", range)?;
        require(
            lower_bound.is_finite() && lower_bound > 0.0,
            "lower_bound",
            "> 0",
            lower_bound,
        )?;
        require(
            well_depth.is_finite() && (0.0..=lower_bound).contains(&well_depth),
            "well_depth",
            "in [0, lower_bound]",
            well_depth,
        )?;
        Ok(PairPotential {
            family: Family::HardCoreShoulder {
                j,
                alpha,
                well: well_depth,
            },
            hard_core: 1.0,
            range,
            lower_bound,
        })
    }

    pub fn soft_bump(
        plateau: f64,
        well: f64,
        r1: f64,
        r2: f64,
        range: f64,
        lower_bound: f64,
    ) -> Result<Self, PotentialError> {
        require(plateau.is_finite() && plateau > 0.0, "plateau", "> 0", plateau)?;
        require(
            lower_bound.is_finite() && lower_bound > 0.0,
            "lower_bound",
            "> 0",
            lower_bound,
        )?;
        require(
            well.is_finite() && (0.0..=lower_bound).contains(&well),
            "well",
            "in [0, lower_bound]",
            well,
        )?;
        require(r1.is_finite() && r1 > 0.0 && r1 < 1.0 / 3.0, "r1", "in (0, 1/3)", r1)?;
        require(r2.is_finite() && r2 > 2.0, "r2", "> 2", r2)?;
        require(range.is_finite() && range >= r2, "range", ">= r2", range)?;
        Ok(PairPotential {
            family: Family::SoftBump {
                plateau,
                well,
                r1,
                r2,
            },
            hard_core: 0.0,
            range,
            lower_bound,
        })
    }

    /// Unit hard core, no tail.
    pub fn hard_rod() -> Self {
        PairPotential {
            family: Family::HardRod,
            hard_core: 1.0,
            range: 1.1,
            lower_bound: 1.0,
        }
    }

    /// No interaction; grand-canonical sampling against it is exactly Poisson.
    pub fn ideal() -> Self {
        PairPotential {
            family: Family::Ideal,
            hard_core: 0.0,
            range: 1.0,
            lower_bound: 1.0,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self.family {
            Family::HardCoreShoulder { .. } => FamilyKind::HardCoreShoulder,
            Family::SoftBump { .. } => FamilyKind::SoftBump,
            Family::HardRod => FamilyKind::HardRod,
            Family::Ideal => FamilyKind::Ideal,
        }
    }

    pub fn hard_core(&self) -> f64 {
        self.hard_core
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// Tail value for r strictly beyond the hard core. Total; collapses float
    /// overflow next to the core into the symbolic infinity. Exactly zero
    /// strictly beyond R; at r = R the family's own value applies (the
    /// truncated shoulder may jump there, the soft ramp reaches 0).
    fn tail(&self, r: f64) -> Energy {
        if r > self.range {
            return Energy::ZERO;
        }
        match self.family {
            Family::HardCoreShoulder { j, alpha, well } => {
                let gap = r - 1.0;
                let v = j / gap.powf(alpha) - well;
                Energy::from(v)
            }
            Family::SoftBump { .. } => Energy::Finite(self.tail_soft(r)),
            Family::HardRod | Family::Ideal => Energy::ZERO,
        }
    }

    fn tail_soft(&self, r: f64) -> f64 {
        let Family::SoftBump {
            plateau,
            well,
            r1,
            r2,
        } = self.family
        else {
            unreachable!()
        };
        if r <= r1 {
            plateau
        } else if r <= r2 {
            -well
        } else if r < self.range {
            -well * (self.range - r) / (self.range - r2)
        } else {
            0.0
        }
    }

    /// U at separation r. Errors for non-positive or NaN r; the hard core
    /// (r ≤ hard_core) is the symbolic infinity.
    pub fn evaluate(&self, r: f64) -> Result<Energy, PotentialError> {
        if !(r > 0.0) {
            return Err(PotentialError::NonPositiveRadius(r));
        }
        if r <= self.hard_core {
            return Ok(Energy::Infinite);
        }
        Ok(self.tail(r))
    }

    /// U for a concrete pair of points. Total: coincident points under a hard
    /// core are an overlap (∞), under a soft family they take the r → 0 value.
    #[inline]
    pub fn pair_energy(&self, a: Point, b: Point) -> Energy {
        let d2 = dist2(a, b);
        if self.hard_core > 0.0 {
            if d2 <= self.hard_core * self.hard_core {
                return Energy::Infinite;
            }
        } else if matches!(self.family, Family::Ideal) {
            return Energy::ZERO;
        }
        let r = d2.sqrt();
        if r > self.range {
            return Energy::ZERO;
        }
        if r == 0.0 {
            // Soft-bump only (ideal returned above, hard cores are overlaps);
            // the plateau extends to contact.
            return Energy::Finite(self.tail_soft(f64::MIN_POSITIVE));
        }
        self.tail(r)
    }

    /// Volume-packing bound ⌊(2R+1)^n⌋ on how many particles can interact
    /// with one particle in a unit-hard-core configuration: their unit-diameter
    /// exclusion balls are disjoint inside a ball of radius R + 1/2, and each
    /// occupies (1/(2R+1))^n of its volume.
    pub fn max_interacting_neighbors(&self, dim: usize) -> Result<usize, PotentialError> {
        if self.hard_core == 0.0 {
            return Err(PotentialError::NoHardCore);
        }
        assert!((1..=3).contains(&dim), "dimension must be 1..=3");
        Ok((2.0 * self.range + 1.0).powi(dim as i32).floor() as usize)
    }

    /// Largest ρ ∈ (1, R] such that U(ρ′) exceeds λ + i(n)·m + 1 for all
    /// ρ′ ∈ (1, ρ): erasing one particle of a pair closer than ρ lowers the
    /// local energy by at least one unit, no matter what else is within range.
    /// Bisection to relative tolerance 1e−10 on ρ − 1, returning the inner
    /// (valid) endpoint.
    pub fn rho_threshold(&self, lambda: f64, dim: usize) -> Result<f64, PotentialError> {
        let neighbors = self.max_interacting_neighbors(dim)?;
        if !matches!(self.family, Family::HardCoreShoulder { .. }) {
            return Err(PotentialError::NonDivergentTail);
        }
        assert!(lambda.is_finite(), "lambda must be finite");
        let threshold = lambda + neighbors as f64 * self.lower_bound + 1.0;
        let above = |gap: f64| -> bool {
            match self.tail(1.0 + gap) {
                Energy::Infinite => true,
                Energy::Finite(v) => v > threshold,
            }
        };
        let gap_max = self.range - 1.0;
        if above(gap_max) {
            // The inequality holds over the whole interaction range.
            return Ok(self.range);
        }
        let mut lo = 1e-12;
        while !above(lo) {
            lo /= 16.0;
            assert!(lo > 0.0, "tail failed to diverge near contact");
        }
        let mut hi = gap_max;
        while hi - lo > 1e-10 * lo {
            let mid = 0.5 * (lo + hi);
            if above(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(1.0 + lo)
    }
}
