//! Geometry of hierarchical K-ary partitions of an axis-aligned box.
//!
//! The search domain is a box. A cell at depth h with index i splits into
//! K children at depth h + 1 with indices K*i .. K*i + K - 1, cut along
//! the cell's largest side (lowest dimension on ties). Every cell carries
//! a representative point, the point at which the cell is evaluated: the
//! box center, except that for odd K the middle child reuses the parent's
//! representative verbatim so evaluations of the parent can be credited
//! to the child without re-sampling.

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::metric::SemiMetric;

/// Axis-aligned box with lower[j] < upper[j] in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "need matching nonempty bound vectors, got {} lower and {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for (j, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidDomain(format!(
                    "dimension {j} needs finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn unit_interval() -> Self {
        Self::new(vec![0.0], vec![1.0]).expect("unit interval is a valid box")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.side(j)).product()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn contained_in(&self, other: &Bounds) -> bool {
        self.dim() == other.dim()
            && self
                .lower
                .iter()
                .zip(&other.lower)
                .all(|(a, b)| a >= b)
            && self.upper.iter().zip(&other.upper).all(|(a, b)| a <= b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }
}

/// One region of the partition: its depth, its global index among the
/// K^depth cells of that depth, its box, and its representative point.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    depth: u32,
    index: BigUint,
    bounds: Bounds,
    representative: Vec<f64>,
}

impl Cell {
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn index(&self) -> &BigUint {
        &self.index
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn representative(&self) -> &[f64] {
        &self.representative
    }
}

/// The depth-0 cell covering the whole domain, evaluated at its center.
pub fn root_cell(domain: Bounds) -> Cell {
    let representative = domain.center();
    Cell {
        depth: 0,
        index: BigUint::ZERO,
        bounds: domain,
        representative,
    }
}

fn widest_dimension(sides: &[f64]) -> usize {
    let mut best = 0;
    for (j, s) in sides.iter().enumerate().skip(1) {
        if *s > sides[best] {
            best = j;
        }
    }
    best
}

/// Splits a cell into k children along its largest side (ties broken
/// toward the lowest dimension). Children tile the parent exactly: the
/// outer cut positions are the parent's own bounds, not recomputed.
/// For odd k the middle child keeps the parent's representative point
/// bit-for-bit; all other children are evaluated at their box center
/// along the cut dimension.
pub fn split(cell: &Cell, k: u32) -> Vec<Cell> {
    assert!(k >= 2, "branching factor must be at least 2, got {k}");
    let sides: Vec<f64> = (0..cell.bounds.dim()).map(|j| cell.bounds.side(j)).collect();
    let dim = widest_dimension(&sides);
    let lo = cell.bounds.lower[dim];
    let hi = cell.bounds.upper[dim];
    let step = (hi - lo) / f64::from(k);

    let mut cuts = Vec::with_capacity(k as usize + 1);
    cuts.push(lo);
    for c in 1..k {
        cuts.push(lo + f64::from(c) * step);
    }
    cuts.push(hi);

    let middle = if k % 2 == 1 { Some((k / 2) as usize) } else { None };
    (0..k as usize)
        .map(|c| {
            let mut lower = cell.bounds.lower.clone();
            let mut upper = cell.bounds.upper.clone();
            lower[dim] = cuts[c];
            upper[dim] = cuts[c + 1];
            let mut representative = cell.representative.clone();
            if Some(c) != middle {
                representative[dim] = 0.5 * (cuts[c] + cuts[c + 1]);
            }
            Cell {
                depth: cell.depth + 1,
                index: &cell.index * k + c as u32,
                bounds: Bounds { lower, upper },
                representative,
            }
        })
        .collect()
}

/// Semi-metric diameter of a cell measured from its center: the largest
/// distance from the center to any point of the box, which for the
/// max-norm family is scale * (max_side / 2) ^ exponent.
pub fn cell_l_diameter(cell: &Cell, metric: &SemiMetric) -> f64 {
    let max_side = (0..cell.bounds.dim())
        .map(|j| cell.bounds.side(j))
        .fold(0.0_f64, f64::max);
    metric.scale() * (0.5 * max_side).powf(metric.exponent())
}

/// Diameter that any depth-`depth` cell of the partition would have,
/// obtained by replaying `depth` largest-side splits of the domain.
/// All cells of one depth share the same side profile because splitting
/// always divides the largest side by the branching factor.
pub fn depth_diameter(
    domain: &Bounds,
    branching: u32,
    metric: &SemiMetric,
    depth: u32,
) -> f64 {
    assert!(branching >= 2, "branching factor must be at least 2");
    let mut sides: Vec<f64> = (0..domain.dim()).map(|j| domain.side(j)).collect();
    for _ in 0..depth {
        let d = widest_dimension(&sides);
        sides[d] /= f64::from(branching);
    }
    let max_side = sides.iter().copied().fold(0.0_f64, f64::max);
    metric.scale() * (0.5 * max_side).powf(metric.exponent())
}
