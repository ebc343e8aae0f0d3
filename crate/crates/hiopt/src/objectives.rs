//! Benchmark objectives and their observation noise.
//!
//! An objective bundles a domain, a deterministic payoff function, a
//! noise channel applied on top of every evaluation, and optionally a
//! cached global optimum used as the reference when scoring runs. The
//! three built-ins are classic 1-D test surfaces on [0, 1]: a product of
//! two sines with one global and several local peaks, a "garland" whose
//! sharp kinks are nowhere second-order smooth, and a function whose
//! upper and lower envelopes around x = 0 disagree so badly that no
//! quadratic smoothness assumption holds at the optimum.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::partition::Bounds;

/// Largest number of points grid_optimum will enumerate.
pub const GRID_GUARD: u128 = 100_000_000;

/// 0.5 * sin(13x) * sin(27x) + 0.5 on [0, 1]. Global max near x = 0.8675
/// with value near 0.9756.
pub fn two_sine_product(x: f64) -> f64 {
    0.5 * (13.0 * x).sin() * (27.0 * x).sin() + 0.5
}

/// 4x(1-x) * (3/4 + 1/4 * (1 - sqrt(|sin(60x)|))) on [0, 1]. The sqrt of
/// |sin| puts a dense garland of kinks on top of a parabola; the global
/// max sits at a kink near x = 0.5236.
pub fn garland(x: f64) -> f64 {
    4.0 * x * (1.0 - x) * (0.75 + 0.25 * (1.0 - (60.0 * x).sin().abs().sqrt()))
}

/// 1 - sqrt(x) + (-x^2 + sqrt(x)) * (sin(1/x^2) + 1) / 2 on [0, 1], with
/// value 1 at x = 0. Oscillates between envelopes 1 - sqrt(x) and
/// 1 - x^2 ever faster toward the maximizer at 0.
pub fn envelope_mismatch(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let s = x.sqrt();
    let x2 = x * x;
    if x2 == 0.0 {
        // x below ~1.5e-162: 1/x^2 overflows; the oscillating factor is
        // undefined at double precision, pin it to its midpoint 1/2
        return 1.0 - s + 0.5 * s;
    }
    1.0 - s + (-x2 + s) * ((1.0 / x2).sin() + 1.0) / 2.0
}

/// Additive observation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseChannel {
    /// Evaluations return the exact payoff.
    Zero,
    /// Gaussian noise rejection-sampled into [-bound, bound]. Rejection
    /// (rather than clipping) keeps the conditional mean of an
    /// observation equal to the payoff.
    TruncatedGaussian { sigma: f64, bound: f64 },
}

impl NoiseChannel {
    pub fn truncated_gaussian(sigma: f64, bound: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParams(format!(
                "noise sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "noise bound must be finite and positive, got {bound}"
            )));
        }
        Ok(Self::TruncatedGaussian { sigma, bound })
    }

    /// True when the channel never perturbs an evaluation.
    pub fn is_zero(&self) -> bool {
        match self {
            NoiseChannel::Zero => true,
            NoiseChannel::TruncatedGaussian { sigma, .. } => *sigma == 0.0,
        }
    }

    /// Bound on |observation - payoff|, infinite only for unbounded
    /// channels (none currently).
    pub fn amplitude(&self) -> f64 {
        match self {
            NoiseChannel::Zero => 0.0,
            NoiseChannel::TruncatedGaussian { sigma, bound } => {
                if *sigma == 0.0 {
                    0.0
                } else {
                    *bound
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseChannel::Zero => 0.0,
            NoiseChannel::TruncatedGaussian { sigma, bound } => {
                if *sigma == 0.0 {
                    return 0.0;
                }
                loop {
                    let z: f64 = StandardNormal.sample(rng);
                    let v = sigma * z;
                    if v.abs() <= *bound {
                        return v;
                    }
                }
            }
        }
    }
}

type PayoffFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named payoff over a box domain, observed through a noise channel.
#[derive(Clone)]
pub struct Objective {
    name: String,
    domain: Bounds,
    payoff: PayoffFn,
    noise: NoiseChannel,
    known_max: Option<(Vec<f64>, f64)>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("noise", &self.noise)
            .field("known_max", &self.known_max)
            .finish()
    }
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        domain: Bounds,
        payoff: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        noise: NoiseChannel,
    ) -> Self {
        Self {
            name: name.into(),
            domain,
            payoff: Arc::new(payoff),
            noise,
            known_max: None,
        }
    }

    pub fn two_sine(noise: NoiseChannel) -> Self {
        Self::new(
            "two-sine",
            Bounds::unit_interval(),
            |x| two_sine_product(x[0]),
            noise,
        )
    }

    pub fn garland(noise: NoiseChannel) -> Self {
        Self::new("garland", Bounds::unit_interval(), |x| garland(x[0]), noise)
    }

    pub fn envelope_mismatch(noise: NoiseChannel) -> Self {
        Self::new(
            "envelope-mismatch",
            Bounds::unit_interval(),
            |x| envelope_mismatch(x[0]),
            noise,
        )
    }

    /// Piecewise-linear objective through (x, value) knots with strictly
    /// increasing x. The domain is [first x, last x] and the cached
    /// optimum is the best knot, which is exact for linear interpolation.
    pub fn from_table(
        name: impl Into<String>,
        knots: Vec<(f64, f64)>,
        noise: NoiseChannel,
    ) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "need at least 2 knots, got {}",
                knots.len()
            )));
        }
        if knots.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidParams("knots must be finite".into()));
        }
        for pair in knots.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::InvalidParams(format!(
                    "knot positions must be strictly increasing, got {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        let domain = Bounds::new(vec![knots[0].0], vec![knots[knots.len() - 1].0])?;
        let best = knots
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .expect("nonempty");
        let known_max = (vec![knots[best].0], knots[best].1);
        let table = knots;
        let mut obj = Self::new(
            name,
            domain,
            move |x| interpolate(&table, x[0]),
            noise,
        );
        obj.known_max = Some(known_max);
        Ok(obj)
    }

    /// Reads knots from a CSV file of `x,value` lines; `#` comments and
    /// blank lines are skipped.
    pub fn from_table_csv(
        name: impl Into<String>,
        path: impl AsRef<Path>,
        noise: NoiseChannel,
    ) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        let mut knots = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let x = parts.next().and_then(|s| s.trim().parse::<f64>().ok());
            let v = parts.next().and_then(|s| s.trim().parse::<f64>().ok());
            match (x, v, parts.next()) {
                (Some(x), Some(v), None) => knots.push((x, v)),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected 'x,value', got '{line}'",
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_table(name, knots, noise)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Bounds {
        &self.domain
    }

    pub fn noise(&self) -> &NoiseChannel {
        &self.noise
    }

    pub fn known_max(&self) -> Option<(&[f64], f64)> {
        self.known_max.as_ref().map(|(x, v)| (x.as_slice(), *v))
    }

    pub fn set_known_max(&mut self, point: Vec<f64>, value: f64) {
        self.known_max = Some((point, value));
    }

    /// Noiseless payoff.
    pub fn true_value(&self, x: &[f64]) -> f64 {
        (self.payoff)(x)
    }

    /// One observation: payoff plus a noise draw.
    pub fn evaluate_noisy<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        (self.payoff)(x) + self.noise.sample(rng)
    }

    /// Scans a regular grid and caches the best point found as the
    /// objective's reference optimum.
    pub fn cache_known_max(&mut self, points_per_dim: u64) -> Result<()> {
        let best = grid_optimum(self, points_per_dim)?;
        self.known_max = Some(best);
        Ok(())
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let n = knots.len();
    if x <= knots[0].0 {
        return knots[0].1;
    }
    if x >= knots[n - 1].0 {
        return knots[n - 1].1;
    }
    // first knot strictly to the right of x
    let hi = knots.partition_point(|(kx, _)| *kx <= x);
    let (x0, v0) = knots[hi - 1];
    let (x1, v1) = knots[hi];
    let t = (x - x0) / (x1 - x0);
    v0 + t * (v1 - v0)
}

/// Exhaustive scan of a regular grid with points_per_dim points along
/// each axis (endpoints included), returning the best point and value.
/// Ties keep the first point in scan order. Refuses grids larger than
/// GRID_GUARD total points.
pub fn grid_optimum(obj: &Objective, points_per_dim: u64) -> Result<(Vec<f64>, f64)> {
    if points_per_dim < 2 {
        return Err(Error::InvalidParams(format!(
            "grid needs at least 2 points per dimension, got {points_per_dim}"
        )));
    }
    let dim = obj.domain.dim();
    let total = (points_per_dim as u128)
        .checked_pow(dim as u32)
        .unwrap_or(u128::MAX);
    if total > GRID_GUARD {
        return Err(Error::GridTooLarge {
            total,
            limit: GRID_GUARD,
        });
    }

    let lo = obj.domain.lower();
    let hi = obj.domain.upper();
    let coord = |j: usize, i: u64| -> f64 {
        lo[j] + (hi[j] - lo[j]) * (i as f64 / (points_per_dim - 1) as f64)
    };

    if dim == 1 {
        let mut best_x = lo[0];
        let mut best_v = f64::NEG_INFINITY;
        let mut point = [0.0_f64];
        for i in 0..points_per_dim {
            point[0] = coord(0, i);
            let v = (obj.payoff)(&point);
            if v > best_v {
                best_v = v;
                best_x = point[0];
            }
        }
        return Ok((vec![best_x], best_v));
    }

    let mut idx = vec![0u64; dim];
    let mut point: Vec<f64> = (0..dim).map(|j| coord(j, 0)).collect();
    let mut best_point = point.clone();
    let mut best_v = f64::NEG_INFINITY;
    loop {
        let v = (obj.payoff)(&point);
        if v > best_v {
            best_v = v;
            best_point = point.clone();
        }
        // odometer increment, last dimension fastest
        let mut j = dim;
        loop {
            if j == 0 {
                return Ok((best_point, best_v));
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < points_per_dim {
                point[j] = coord(j, idx[j]);
                break;
            }
            idx[j] = 0;
            point[j] = coord(j, 0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_sine_product_reference_points() {
        assert_eq!(two_sine_product(0.0), 0.5);
        // value at the published argmax location
        assert!((two_sine_product(0.867526) - 0.975599).abs() < 1e-6);
    }

    #[test]
    fn garland_reference_points() {
        assert_eq!(garland(0.0), 0.0);
        assert_eq!(garland(1.0), 0.0);
        // kinks touch the plain parabola where sin(60x) = 0
        let x = std::f64::consts::PI / 60.0;
        assert_relative_eq!(garland(x), 4.0 * x * (1.0 - x), max_relative = 1e-6);
    }

    #[test]
    fn envelope_mismatch_reference_points() {
        assert_eq!(envelope_mismatch(0.0), 1.0);
        assert_eq!(envelope_mismatch(1.0), 0.0);
        // squeezed between its envelopes everywhere
        for i in 1..2000 {
            let x = i as f64 / 2000.0;
            let v = envelope_mismatch(x);
            assert!(v <= 1.0 - x * x + 1e-15, "above upper envelope at {x}");
            assert!(v >= 1.0 - x.sqrt() - 1e-15, "below lower envelope at {x}");
        }
        // tiny x: no NaN, value approaches 1
        let v = envelope_mismatch(1e-300);
        assert!(v.is_finite() && v > 0.999999);
    }

    #[test]
    fn builtin_ranges_stay_in_unit_interval() {
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            for f in [two_sine_product, garland, envelope_mismatch] {
                let v = f(x);
                assert!((0.0..=1.0).contains(&v), "f({x}) = {v}");
            }
        }
    }

    #[test]
    fn grid_optimum_finds_frozen_two_sine_peak() {
        // 100001-point scan; the peak is resolved to ~1e-5
        let obj = Objective::two_sine(NoiseChannel::Zero);
        let (x, v) = grid_optimum(&obj, 100_001).unwrap();
        assert!((x[0] - 0.8675261867526186).abs() < 1e-4);
        assert!((v - 0.9755991438114728).abs() < 1e-6);
    }

    #[test]
    fn grid_optimum_exact_on_linear_and_constant() {
        let domain = Bounds::unit_interval();
        let linear = Objective::new("id", domain.clone(), |x| x[0], NoiseChannel::Zero);
        assert_eq!(grid_optimum(&linear, 11).unwrap(), (vec![1.0], 1.0));
        let constant = Objective::new("one", domain, |_| 1.0, NoiseChannel::Zero);
        // ties keep the first grid point
        assert_eq!(grid_optimum(&constant, 11).unwrap(), (vec![0.0], 1.0));
    }

    #[test]
    fn grid_optimum_walks_every_dimension() {
        let domain = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let obj = Objective::new(
            "bump",
            domain,
            |x| -(x[0] - 0.3).powi(2) - (x[1] - 0.7).powi(2),
            NoiseChannel::Zero,
        );
        let (p, v) = grid_optimum(&obj, 101).unwrap();
        assert_relative_eq!(p[0], 0.3, max_relative = 1e-12);
        assert_relative_eq!(p[1], 0.7, max_relative = 1e-12);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn grid_optimum_refuses_oversized_grids() {
        let domain = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let obj = Objective::new("z", domain, |_| 0.0, NoiseChannel::Zero);
        assert!(matches!(
            grid_optimum(&obj, 20_000),
            Err(Error::GridTooLarge { .. })
        ));
        let obj1 = Objective::two_sine(NoiseChannel::Zero);
        assert!(grid_optimum(&obj1, 1).is_err());
    }

    #[test]
    fn cache_known_max_stores_result() {
        let mut obj = Objective::garland(NoiseChannel::Zero);
        assert!(obj.known_max().is_none());
        obj.cache_known_max(10_001).unwrap();
        let (x, v) = obj.known_max().unwrap();
        assert!(v > 0.99 && x[0] > 0.5 && x[0] < 0.55);
    }

    #[test]
    fn zero_channel_is_exact_and_consumes_no_randomness() {
        let obj = Objective::two_sine(NoiseChannel::Zero);
        let mut rng_a = ChaCha8Rng::seed_from_u64(7);
        let mut rng_b = ChaCha8Rng::seed_from_u64(7);
        for i in 0..50 {
            let x = [i as f64 / 50.0];
            assert_eq!(obj.evaluate_noisy(&x, &mut rng_a), obj.true_value(&x));
        }
        assert_eq!(rng_a.random::<u64>(), rng_b.random::<u64>());
    }

    #[test]
    fn truncated_noise_respects_bound() {
        let noise = NoiseChannel::truncated_gaussian(2.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20_000 {
            let z = noise.sample(&mut rng);
            assert!(z.abs() <= 0.5);
        }
    }

    #[test]
    fn truncated_noise_is_centered() {
        let noise = NoiseChannel::truncated_gaussian(0.5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 1_000_000;
        let mean: f64 = (0..draws).map(|_| noise.sample(&mut rng)).sum::<f64>() / draws as f64;
        // truncation by rejection is symmetric, so the mean stays 0
        assert!(mean.abs() < 2.5e-3, "mean drifted to {mean}");
    }

    #[test]
    fn sigma_zero_truncated_equals_zero_channel() {
        let noise = NoiseChannel::truncated_gaussian(0.0, 1.0).unwrap();
        assert!(noise.is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(noise.sample(&mut rng), 0.0);
    }

    #[test]
    fn noise_parameter_validation() {
        assert!(NoiseChannel::truncated_gaussian(-1.0, 1.0).is_err());
        assert!(NoiseChannel::truncated_gaussian(1.0, 0.0).is_err());
        assert!(NoiseChannel::truncated_gaussian(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn table_objective_interpolates_linearly() {
        let obj = Objective::from_table(
            "ramp",
            vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.25)],
            NoiseChannel::Zero,
        )
        .unwrap();
        assert_eq!(obj.true_value(&[0.25]), 0.5);
        assert_relative_eq!(obj.true_value(&[0.75]), 0.625, max_relative = 1e-15);
        assert_eq!(obj.true_value(&[0.5]), 1.0);
        let (x, v) = obj.known_max().unwrap();
        assert_eq!((x[0], v), (0.5, 1.0));
    }

    #[test]
    fn table_objective_rejects_bad_knots() {
        assert!(Objective::from_table("t", vec![(0.0, 1.0)], NoiseChannel::Zero).is_err());
        assert!(Objective::from_table(
            "t",
            vec![(0.5, 1.0), (0.5, 2.0)],
            NoiseChannel::Zero
        )
        .is_err());
        assert!(Objective::from_table(
            "t",
            vec![(0.9, 1.0), (0.1, 2.0)],
            NoiseChannel::Zero
        )
        .is_err());
    }

    #[test]
    fn table_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("table.csv");
        std::fs::write(&path, "# knots\n0.0, 0.1\n0.5, 0.9\n\n1.0, 0.2\n").unwrap();
        let obj = Objective::from_table_csv("custom", &path, NoiseChannel::Zero).unwrap();
        assert_eq!(obj.true_value(&[0.5]), 0.9);
        assert_eq!(obj.domain().lower(), &[0.0]);
        assert_eq!(obj.domain().upper(), &[1.0]);

        std::fs::write(&path, "0.0,0.1\nnot,numbers,here\n").unwrap();
        assert!(Objective::from_table_csv("bad", &path, NoiseChannel::Zero).is_err());
    }
}
