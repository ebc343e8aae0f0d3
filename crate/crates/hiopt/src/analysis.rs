//! Post-run instruments: regret against a reference optimum, an offline
//! check that every running mean stayed inside its confidence width, and
//! packing counts that measure how large the near-optimal set is at
//! every scale.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::metric::SemiMetric;
use crate::objectives::Objective;
use crate::optimizers::{Recommendation, RunTrace, StoSooParams, TraceEvent};
use crate::tree::NodeId;

/// sup f - f(recommended point), clamped below at 0. The supremum is the
/// objective's cached reference optimum; a recommendation that beats the
/// reference grid scores 0 rather than a negative regret.
pub fn regret(obj: &Objective, rec: &Recommendation) -> Result<f64> {
    Ok(regret_raw(obj, rec)?.max(0.0))
}

/// Unclamped regret; negative when the recommendation beats the cached
/// reference optimum (possible because the reference comes from a finite
/// grid).
pub fn regret_raw(obj: &Objective, rec: &Recommendation) -> Result<f64> {
    let (_, sup) = obj
        .known_max()
        .ok_or_else(|| Error::MissingKnownMax(obj.name().to_string()))?;
    Ok(sup - obj.true_value(&rec.point))
}

/// Replays a stochastic run offline and reports whether every node's
/// running mean stayed within sqrt(ln(n k / delta) / (2 pulls)) of the
/// true payoff at its representative point, at every evaluation time.
/// This is the confidence event whose probability the width constant is
/// chosen to keep above 1 - delta.
///
/// The trace must come from a run with the given parameters: expansions
/// credit the middle child with the parent's statistics exactly when
/// `reuse_middle` is set and the branching factor is odd.
pub fn xi_event_holds(trace: &RunTrace, obj: &Objective, params: &StoSooParams) -> Result<bool> {
    let width_constant = params.width_constant();
    let mut stats: BTreeMap<NodeId, (u64, f64)> = BTreeMap::new();
    let mut expanded: BTreeSet<NodeId> = BTreeSet::new();

    for event in &trace.events {
        match event {
            TraceEvent::Evaluation {
                node,
                point,
                reward,
                ..
            } => {
                if !reward.is_finite() {
                    return Err(Error::MalformedTrace(format!(
                        "non-finite reward {reward} at node {node}"
                    )));
                }
                if expanded.contains(node) {
                    return Err(Error::MalformedTrace(format!(
                        "evaluation of expanded node {node}"
                    )));
                }
                let entry = stats.entry(node.clone()).or_insert((0, 0.0));
                entry.0 += 1;
                entry.1 += reward;
                let mean = entry.1 / entry.0 as f64;
                let width = (width_constant / (2.0 * entry.0 as f64)).sqrt();
                if (mean - obj.true_value(point)).abs() > width {
                    return Ok(false);
                }
            }
            TraceEvent::Expansion { node, .. } => {
                if !expanded.insert(node.clone()) {
                    return Err(Error::MalformedTrace(format!(
                        "node {node} expanded twice"
                    )));
                }
                let parent = stats.get(node).copied().ok_or_else(|| {
                    Error::MalformedTrace(format!("expansion of unsampled node {node}"))
                })?;
                if params.reuse_middle && params.branching % 2 == 1 {
                    let mid = NodeId::new(
                        node.depth + 1,
                        &node.index * params.branching + params.branching / 2,
                    );
                    // inherited statistics were already checked as the
                    // parent's: same numbers, same payoff point
                    stats.insert(mid, parent);
                }
            }
        }
    }
    Ok(true)
}

/// Counts and the fitted scaling exponent of a packing experiment:
/// counts[i] points were packed into the epsilon[i]-near-optimal set.
#[derive(Debug, Clone, PartialEq)]
pub struct PackingReport {
    pub epsilons: Vec<f64>,
    pub counts: Vec<u64>,
    /// Least-squares slope of ln(count) against ln(1 / epsilon).
    pub fitted_exponent: f64,
}

impl PackingReport {
    /// CSV form: a fitted-exponent summary comment, a header, then one
    /// `epsilon,count` row per scale.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "# fitted_exponent={:.16e}", self.fitted_exponent)?;
        writeln!(out, "epsilon,count")?;
        for (eps, count) in self.epsilons.iter().zip(&self.counts) {
            writeln!(out, "{eps:.16e},{count}")?;
        }
        Ok(())
    }
}

/// Greedy packing of the set {x : f(x) >= sup f - epsilon} with
/// semi-metric balls of radius nu * epsilon, restricted to a regular
/// grid scan of a 1-D domain. Grid points are visited left to right; a
/// qualifying point is kept when its distance to the last kept point
/// exceeds one ball diameter (2 nu epsilon), which makes the kept
/// centers a valid packing. The count lower-bounds the true packing
/// number at grid resolution.
pub fn packing_number(
    obj: &Objective,
    metric: &SemiMetric,
    epsilon: f64,
    nu: f64,
    grid: u64,
) -> Result<u64> {
    if obj.domain().dim() != 1 {
        return Err(Error::UnsupportedDimension {
            supported: 1,
            got: obj.domain().dim(),
        });
    }
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidParams(format!(
            "epsilon must be finite and positive, got {epsilon}"
        )));
    }
    if nu <= 0.0 || !nu.is_finite() {
        return Err(Error::InvalidParams(format!(
            "nu must be finite and positive, got {nu}"
        )));
    }
    if grid < 2 {
        return Err(Error::InvalidParams(format!(
            "grid needs at least 2 points, got {grid}"
        )));
    }
    let (_, sup) = obj
        .known_max()
        .ok_or_else(|| Error::MissingKnownMax(obj.name().to_string()))?;
    let cut = sup - epsilon;
    let sep = metric.norm_separation(2.0 * nu * epsilon);
    let lo = obj.domain().lower()[0];
    let hi = obj.domain().upper()[0];

    let mut count = 0u64;
    let mut last = f64::NEG_INFINITY;
    for i in 0..grid {
        let x = lo + (hi - lo) * (i as f64 / (grid - 1) as f64);
        if obj.true_value(&[x]) >= cut && (count == 0 || x - last > sep) {
            count += 1;
            last = x;
        }
    }
    Ok(count)
}

/// Packing counts across several scales plus the fitted exponent.
pub fn packing_report(
    obj: &Objective,
    metric: &SemiMetric,
    epsilons: &[f64],
    nu: f64,
    grid: u64,
) -> Result<PackingReport> {
    let counts = epsilons
        .iter()
        .map(|&eps| packing_number(obj, metric, eps, nu, grid))
        .collect::<Result<Vec<u64>>>()?;
    let fitted_exponent = dimension_fit(epsilons, &counts)?;
    Ok(PackingReport {
        epsilons: epsilons.to_vec(),
        counts,
        fitted_exponent,
    })
}

/// Least-squares slope of ln(count) against ln(1 / epsilon). A slope
/// near 0 means the near-optimal set stays coverable by a bounded
/// number of balls at every scale; a slope of d means the packing
/// count grows like epsilon^-d.
pub fn dimension_fit(epsilons: &[f64], counts: &[u64]) -> Result<f64> {
    if epsilons.len() != counts.len() || epsilons.len() < 2 {
        return Err(Error::InvalidParams(format!(
            "need matching lists of at least 2 scales, got {} and {}",
            epsilons.len(),
            counts.len()
        )));
    }
    if epsilons.iter().any(|&e| e.is_nan() || e <= 0.0) {
        return Err(Error::InvalidParams("scales must be positive".into()));
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateCounts(format!(
            "count at epsilon {} is zero; the near-optimal set missed the scan grid",
            epsilons[i]
        )));
    }
    let xs: Vec<f64> = epsilons.iter().map(|e| (1.0 / e).ln()).collect();
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::InvalidParams(
            "scales must not all coincide".into(),
        ));
    }
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    Ok(least_squares_slope(&xs, &ys))
}

/// Ordinary least-squares slope of ys against xs.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        var += (x - mx) * (x - mx);
    }
    cov / var
}
