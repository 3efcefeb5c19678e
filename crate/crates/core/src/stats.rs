//! Distribution of aggregated setpoints and goodness-of-fit measures.
//!
//! The sum of `n` independent uniform setpoints, rescaled to its support,
//! follows a Bates distribution (the mean of `n` standard uniforms,
//! stretched to `[a, b]`). [`BatesDistribution`] evaluates its density and
//! distribution function; [`predicted_ipf_distribution`] instantiates the
//! one matching a feeder under independent box sampling. The rest of the
//! module holds the comparison machinery: binned densities, the
//! Kolmogorov-Smirnov distance, inverter-circle acceptance geometry, and a
//! Pearson chi-square statistic for uniformity on the unit square.

use crate::grid::GridModel;
use std::io::{self, Write};
use thiserror::Error;

/// Errors from distribution construction and sample statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    /// Order outside `1..=MAX_ORDER`. The alternating-series evaluation is
    /// accurate to about 1e-9 in double precision up to order 60 and
    /// degrades beyond it, so larger orders are rejected.
    #[error("distribution order must be in 1..={}", BatesDistribution::MAX_ORDER)]
    InvalidOrder,
    /// Support bounds not finite or not increasing.
    #[error("support bounds must be finite with a < b")]
    InvalidSupport,
    /// An operation that needs sample data received none.
    #[error("sample set is empty")]
    EmptySample,
    /// A bin or cell count of zero was requested.
    #[error("bin or cell count must be positive")]
    BadPartition,
}

/// Compensated (Neumaier) accumulator for alternating series.
#[derive(Debug, Default, Clone, Copy)]
struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    fn add(&mut self, term: f64) {
        let t = self.sum + term;
        if self.sum.abs() >= term.abs() {
            self.comp += (self.sum - t) + term;
        } else {
            self.comp += (term - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(self) -> f64 {
        self.sum + self.comp
    }
}

/// Exact binomial coefficients `C(n, 0..=n)`, correctly rounded to `f64`.
fn binomial_row(n: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(n + 1);
    let mut c: u128 = 1;
    row.push(1.0);
    for k in 0..n {
        c = c * (n - k) as u128 / (k as u128 + 1);
        row.push(c as f64);
    }
    row
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// Mean of `n` independent uniforms, stretched to the support `[a, b]`.
///
/// Density and distribution function are evaluated with the piecewise
/// polynomial (alternating binomial) series in the sum domain `s = n t`,
/// summing only the terms below `s` and exploiting the `t -> 1 - t`
/// symmetry, which keeps the cancellation mild over the whole support.
#[derive(Debug, Clone)]
pub struct BatesDistribution {
    n: usize,
    a: f64,
    b: f64,
    binom: Vec<f64>,
    fact_nm1: f64,
    fact_n: f64,
}

impl BatesDistribution {
    /// Largest supported order; see [`StatsError::InvalidOrder`].
    pub const MAX_ORDER: usize = 60;

    pub fn new(n: usize, a: f64, b: f64) -> Result<Self, StatsError> {
        if n == 0 || n > Self::MAX_ORDER {
            return Err(StatsError::InvalidOrder);
        }
        if !a.is_finite() || !b.is_finite() || a >= b {
            return Err(StatsError::InvalidSupport);
        }
        let fact_nm1 = factorial(n - 1);
        Ok(Self {
            n,
            a,
            b,
            binom: binomial_row(n),
            fact_nm1,
            fact_n: fact_nm1 * n as f64,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let w = self.b - self.a;
        w * w / (12.0 * self.n as f64)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Probability density at `x` (zero outside the support).
    pub fn pdf(&self, x: f64) -> f64 {
        let w = self.b - self.a;
        self.standard_pdf((x - self.a) / w) / w
    }

    /// Distribution function at `x`, clamped to `[0, 1]` outside the
    /// support.
    pub fn cdf(&self, x: f64) -> f64 {
        let t = (x - self.a) / (self.b - self.a);
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else if t > 0.5 {
            1.0 - self.lower_cdf(1.0 - t)
        } else {
            self.lower_cdf(t)
        }
    }

    /// Density of the mean of `n` standard uniforms at `t`.
    fn standard_pdf(&self, t: f64) -> f64 {
        if !(0.0..=1.0).contains(&t) {
            return 0.0;
        }
        let t = if t > 0.5 { 1.0 - t } else { t };
        let s = self.n as f64 * t;
        let m = (s.floor() as usize).min(self.n);
        let mut acc = NeumaierSum::default();
        for k in 0..=m {
            let term = self.binom[k] * (s - k as f64).powi(self.n as i32 - 1);
            acc.add(if k % 2 == 0 { term } else { -term });
        }
        self.n as f64 * acc.total() / self.fact_nm1
    }

    /// Distribution function of the standardized mean for `t` in
    /// `(0, 0.5]`, where the series keeps its leading term dominant.
    fn lower_cdf(&self, t: f64) -> f64 {
        let s = self.n as f64 * t;
        let m = (s.floor() as usize).min(self.n);
        let mut acc = NeumaierSum::default();
        for k in 0..=m {
            let term = self.binom[k] * (s - k as f64).powi(self.n as i32);
            acc.add(if k % 2 == 0 { term } else { -term });
        }
        (acc.total() / self.fact_n).clamp(0.0, 1.0)
    }
}

/// Distribution of the aggregate active-power exchange predicted by
/// convolving the units' independent uniform setpoints: a Bates
/// distribution over `[-P_total, +P_total]`.
///
/// Losses shift the observed aggregate, so empirical samples should be
/// mean-centered (and the support re-centered accordingly) before
/// comparing against this prediction.
pub fn predicted_ipf_distribution(grid: &GridModel) -> Result<BatesDistribution, StatsError> {
    let p_total = grid.spec.total_installed_p_kw;
    BatesDistribution::new(grid.ders.len(), -p_total, p_total)
}

/// One bin of an empirical/predicted density comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBin {
    pub left: f64,
    pub right: f64,
    /// Relative frequency divided by bin width.
    pub empirical: f64,
    /// Predicted density at the bin midpoint.
    pub predicted: f64,
}

/// Bins `samples` into `n_bins` equal-width bins spanning the union of the
/// distribution's support and the sample range, and evaluates the
/// predicted density at each bin midpoint.
pub fn density_comparison(
    samples: &[f64],
    dist: &BatesDistribution,
    n_bins: usize,
) -> Result<Vec<DensityBin>, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if n_bins == 0 {
        return Err(StatsError::BadPartition);
    }
    let (mut lo, mut hi) = dist.support();
    for &x in samples {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let width = (hi - lo) / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &x in samples {
        let idx = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[idx] += 1;
    }
    let norm = 1.0 / (samples.len() as f64 * width);
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let left = lo + i as f64 * width;
            let right = lo + (i + 1) as f64 * width;
            DensityBin {
                left,
                right,
                empirical: c as f64 * norm,
                predicted: dist.pdf(0.5 * (left + right)),
            }
        })
        .collect())
}

/// Writes a density comparison as CSV:
/// `bin_left_kw, bin_right_kw, empirical_density, bates_density`.
pub fn write_density_csv<W: Write>(w: &mut W, bins: &[DensityBin]) -> io::Result<()> {
    writeln!(w, "bin_left_kw,bin_right_kw,empirical_density,bates_density")?;
    for bin in bins {
        writeln!(
            w,
            "{},{},{},{}",
            crate::numfmt::fmt_sig6(bin.left),
            crate::numfmt::fmt_sig6(bin.right),
            crate::numfmt::fmt_sig6(bin.empirical),
            crate::numfmt::fmt_sig6(bin.predicted),
        )?;
    }
    Ok(())
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and `dist`.
pub fn ks_distance(samples: &[f64], dist: &BatesDistribution) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = dist.cdf(x);
        d = d.max(f - i as f64 / n).max((i as f64 + 1.0) / n - f);
    }
    Ok(d)
}

/// Sample mean and (n-1)-normalized standard deviation. A single sample
/// has zero standard deviation by convention.
pub fn sample_mean_std(samples: &[f64]) -> Result<(f64, f64), StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return Ok((mean, 0.0));
    }
    let ss = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    Ok((mean, (ss / (n - 1.0)).sqrt()))
}

/// Probability that an independent box draw `(p, q)` uniform on
/// `[-r s, r s] x [-s, s]` lands inside the circle `p^2 + q^2 <= s^2`,
/// as a function of the ratio `r = p_inst / s_max` in `(0, 1]`.
///
/// Closed form of the circle-segment area over the box area:
/// `(r sqrt(1 - r^2) + asin r) / (2 r)`.
pub fn box_circle_acceptance(r: f64) -> f64 {
    assert!(r > 0.0 && r <= 1.0, "ratio must be in (0, 1]");
    (r * (1.0 - r * r).sqrt() + r.asin()) / (2.0 * r)
}

/// Probability that `n` independent events of probability `p` all occur;
/// the joint admissible fraction of `n` units under independent sampling.
pub fn joint_pass_probability(p: f64, n: usize) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    p.powi(n as i32)
}

/// Estimated probability that an independent draw over `n` units is
/// jointly feasible when the fraction `infeasible` of each unit's own
/// control range violates a constraint: `(1 - infeasible)^n`. Shows how
/// fast naive sampling collapses as units are added.
pub fn feasibility_collapse_estimate(infeasible: f64, n: usize) -> f64 {
    assert!(
        (0.0..=1.0).contains(&infeasible),
        "infeasible fraction must be in [0, 1]"
    );
    joint_pass_probability(1.0 - infeasible, n)
}

/// Distribution function of the active-power coordinate of a draw uniform
/// on the admissible disc segment, with both coordinates normalized by
/// `s_max` (`x` in `[-r, r]`, `r = p_inst / s_max`).
pub fn circle_marginal_cdf(x: f64, r: f64) -> f64 {
    assert!(r > 0.0 && r <= 1.0, "ratio must be in (0, 1]");
    let x = x.clamp(-r, r);
    let segment = |u: f64| u * (1.0 - u * u).sqrt() + u.asin();
    ((segment(x) + segment(r)) / (2.0 * segment(r))).clamp(0.0, 1.0)
}

/// Probability integral transform of an admissible `(p, q)` pair to the
/// unit square: pairs uniform on the disc segment map to pairs uniform on
/// `[0, 1]^2`.
pub fn uniformize_disc_point(p: f64, q: f64, s_max: f64, r: f64) -> (f64, f64) {
    let x = (p / s_max).clamp(-r, r);
    let u = circle_marginal_cdf(x, r);
    let w = (1.0 - x * x).sqrt();
    let v = ((q / s_max + w) / (2.0 * w)).clamp(0.0, 1.0);
    (u, v)
}

/// Pearson chi-square statistic of `points` against a uniform
/// `cells x cells` partition of the unit square.
pub fn chi_square_uniform(points: &[(f64, f64)], cells: usize) -> Result<f64, StatsError> {
    if points.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if cells == 0 {
        return Err(StatsError::BadPartition);
    }
    let mut counts = vec![0u64; cells * cells];
    for &(u, v) in points {
        let i = ((u * cells as f64) as usize).min(cells - 1);
        let j = ((v * cells as f64) as usize).min(cells - 1);
        counts[i * cells + j] += 1;
    }
    let expected = points.len() as f64 / (cells * cells) as f64;
    Ok(counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum())
}
