//! Reference multiple-testing procedures on per-vertex summaries.

use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::empirical_bayes::estimate_p0;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Bh,
    QValue,
    LocFdr,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Bh => "bh",
            Method::QValue => "qvalue",
            Method::LocFdr => "locfdr",
        }
    }
}

/// Per-vertex scores of one procedure; a vertex is discovered at threshold
/// `c` when its score is at most `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedScores {
    pub method: Method,
    pub scores: Vec<f64>,
}

fn check_p(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("no p-values"));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("p-value {bad} outside [0, 1]")));
    }
    Ok(())
}

/// `min_{j >= i} scale * N * p_(j) / j`, capped at 1, in input order.
fn step_up(p: &[f64], scale: f64) -> Vec<f64> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut out = vec![0.0; n];
    let mut running = f64::INFINITY;
    for (rank, &i) in order.iter().enumerate().rev() {
        let v = scale * (n as f64 / (rank + 1) as f64) * p[i];
        running = running.min(v);
        out[i] = running.min(1.0);
    }
    out
}

/// Benjamini-Hochberg step-up adjusted p-values.
pub fn bh_adjust(p: &[f64]) -> Result<AdjustedScores> {
    check_p(p)?;
    Ok(AdjustedScores { method: Method::Bh, scores: step_up(p, 1.0) })
}

/// Storey q-values; `p0` overrides the estimate from `lambda` when given.
pub fn storey_qvalue(p: &[f64], lambda: f64, p0: Option<f64>) -> Result<AdjustedScores> {
    check_p(p)?;
    let p0 = match p0 {
        Some(v) if (0.0..=1.0).contains(&v) => v,
        Some(v) => return Err(Error::invalid(format!("p0 must be in [0, 1], got {v}"))),
        None => estimate_p0(p, lambda)?,
    };
    Ok(AdjustedScores { method: Method::QValue, scores: step_up(p, p0) })
}

/// Minimum number of statistics for the density estimate.
pub const LOCFDR_MIN_POINTS: usize = 200;

/// Kernel-density local fdr with a theoretical `N(0, 1)` null.
///
/// Each t statistic is mapped to a z score through its own CDF, the mixture
/// density is a Gaussian kernel estimate with Silverman's bandwidth, and
/// `lfdr = min(1, p0 phi(z) / f(z))`. `p0` defaults to 1.
pub fn kernel_locfdr(t: &[f64], df: f64, p0: Option<f64>) -> Result<AdjustedScores> {
    if t.len() < LOCFDR_MIN_POINTS {
        return Err(Error::invalid(format!(
            "kernel locfdr needs at least {LOCFDR_MIN_POINTS} statistics, got {}",
            t.len()
        )));
    }
    let p0 = p0.unwrap_or(1.0);
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::invalid(format!("p0 must be in [0, 1], got {p0}")));
    }
    let tdist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    let std = Normal::standard();
    let z: Vec<f64> = t
        .iter()
        .map(|&v| {
            // Work in the nearer tail so extreme statistics keep precision.
            if v > 0.0 {
                -std.inverse_cdf(tdist.sf(v))
            } else {
                std.inverse_cdf(tdist.cdf(v))
            }
        })
        .map(|z| z.clamp(-38.0, 38.0))
        .collect();
    let bw = silverman_bandwidth(&z);
    let n = z.len() as f64;
    let scores = z
        .iter()
        .map(|&zi| {
            let dens: f64 = z.iter().map(|&zj| std.pdf((zi - zj) / bw)).sum::<f64>() / (n * bw);
            let l = p0 * std.pdf(zi) / dens;
            if l.is_finite() {
                l.clamp(0.0, 1.0)
            } else {
                1.0
            }
        })
        .collect();
    Ok(AdjustedScores { method: Method::LocFdr, scores })
}

fn silverman_bandwidth(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (n - 1.0);
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(sorted.len() - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * n.powf(-0.2);
    if bw > 0.0 {
        bw
    } else {
        1e-3
    }
}
