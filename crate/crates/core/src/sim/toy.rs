//! Two variables measured under two conditions, with a random chance that
//! the second variable shares the first one's means.
//!
//! Means are `N(0, 1)` across the system and observations add `N(0, sigma2)`
//! noise. Integrating the means out, `k` observations sharing one mean are
//! jointly normal with covariance `sigma2 I + J`.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, LN_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyConfig {
    pub n_pairs: usize,
    pub p0: f64,
    pub sigma2: f64,
    pub p_block: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p0) || !(0.0..=1.0).contains(&self.p_block) {
            return Err(Error::invalid("p0 and p_block must be in [0, 1]"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid("sigma2 must be positive"));
        }
        Ok(())
    }
}

/// Log density of observations that share one `N(0, 1)` mean.
fn log_shared(xs: &[f64], sigma2: f64) -> f64 {
    let k = xs.len() as f64;
    let s: f64 = xs.iter().sum();
    let ss: f64 = xs.iter().map(|x| x * x).sum();
    let log_det = (k - 1.0) * sigma2.ln() + (sigma2 + k).ln();
    let quad = (ss - s * s / (sigma2 + k)) / sigma2;
    -0.5 * (k * LN_2PI + log_det + quad)
}

fn ln_or_neg_inf(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `P(H0 | x1, y1)` from the first variable alone.
pub fn toy_lfdr1(x1: f64, y1: f64, cfg: &ToyConfig) -> f64 {
    let s2 = cfg.sigma2;
    let null = ln_or_neg_inf(cfg.p0) + log_shared(&[x1, y1], s2);
    let alt = ln_or_neg_inf(1.0 - cfg.p0) + log_shared(&[x1], s2) + log_shared(&[y1], s2);
    ratio(null, &[null, alt])
}

/// `P(H0 | x1, x2, y1, y2)` mixing over the null and blocking states.
pub fn toy_lfdr2(x1: f64, x2: f64, y1: f64, y2: f64, cfg: &ToyConfig) -> f64 {
    let s2 = cfg.sigma2;
    let (lp0, lp1) = (ln_or_neg_inf(cfg.p0), ln_or_neg_inf(1.0 - cfg.p0));
    let (lb, lu) = (ln_or_neg_inf(cfg.p_block), ln_or_neg_inf(1.0 - cfg.p_block));
    let g = |x: f64| log_shared(&[x], s2);
    let null_blocked = lp0 + lb + log_shared(&[x1, x2, y1, y2], s2);
    let null_free = lp0 + lu + log_shared(&[x1, y1], s2) + g(x2) + g(y2);
    let alt_blocked = lp1 + lb + log_shared(&[x1, x2], s2) + log_shared(&[y1, y2], s2);
    let alt_free = lp1 + lu + g(x1) + g(x2) + g(y1) + g(y2);
    let num = log_sum_exp(&[null_blocked, null_free]);
    ratio(num, &[null_blocked, null_free, alt_blocked, alt_free])
}

fn ratio(num: f64, all: &[f64]) -> f64 {
    if num == f64::NEG_INFINITY {
        return 0.0;
    }
    (num - log_sum_exp(all)).exp().min(1.0)
}

/// One simulated system of variable pairs with latent states.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySample {
    /// Rows of `(x1, x2, y1, y2)`.
    pub obs: Vec<[f64; 4]>,
    pub null: Vec<bool>,
    pub blocked: Vec<bool>,
}

pub fn simulate_toy<R: Rng + ?Sized>(cfg: &ToyConfig, rng: &mut R) -> Result<ToySample> {
    cfg.validate()?;
    let noise = Normal::new(0.0, cfg.sigma2.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = ToySample { obs: Vec::with_capacity(cfg.n_pairs), null: Vec::new(), blocked: Vec::new() };
    for _ in 0..cfg.n_pairs {
        let null = rng.random_bool(cfg.p0);
        let blocked = rng.random_bool(cfg.p_block);
        let mx1: f64 = StandardNormal.sample(rng);
        let my1: f64 = if null { mx1 } else { StandardNormal.sample(rng) };
        let (mx2, my2): (f64, f64) = if blocked {
            (mx1, my1)
        } else {
            (StandardNormal.sample(rng), StandardNormal.sample(rng))
        };
        let mut draw = |m: f64| m + noise.sample(rng);
        out.obs.push([draw(mx1), draw(mx2), draw(my1), draw(my2)]);
        out.null.push(null);
        out.blocked.push(blocked);
    }
    Ok(out)
}

/// Empirical FDR and mean score of the lists formed by ranking on each
/// score; entry `k - 1` describes the list of size `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCurve {
    pub fdr1: Vec<f64>,
    pub fdr2: Vec<f64>,
    pub mean_score1: Vec<f64>,
    pub mean_score2: Vec<f64>,
}

fn ranked(scores: &[f64], null: &[bool]) -> (Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut fdr = Vec::with_capacity(order.len());
    let mut mean = Vec::with_capacity(order.len());
    let (mut nulls, mut sum) = (0usize, 0.0);
    for (k, &i) in order.iter().enumerate() {
        nulls += null[i] as usize;
        sum += scores[i];
        fdr.push(nulls as f64 / (k + 1) as f64);
        mean.push(sum / (k + 1) as f64);
    }
    (fdr, mean)
}

/// Simulates `cfg.n_pairs` systems and ranks them by each score.
pub fn toy_fdr_curve<R: Rng + ?Sized>(cfg: &ToyConfig, rng: &mut R) -> Result<ToyCurve> {
    if cfg.n_pairs < 1000 {
        return Err(Error::invalid(format!("need at least 1000 pairs, got {}", cfg.n_pairs)));
    }
    let sample = simulate_toy(cfg, rng)?;
    let s1: Vec<f64> = sample.obs.iter().map(|o| toy_lfdr1(o[0], o[2], cfg)).collect();
    let s2: Vec<f64> = sample.obs.iter().map(|o| toy_lfdr2(o[0], o[1], o[2], o[3], cfg)).collect();
    let (fdr1, mean_score1) = ranked(&s1, &sample.null);
    let (fdr2, mean_score2) = ranked(&s2, &sample.null);
    Ok(ToyCurve { fdr1, fdr2, mean_score1, mean_score2 })
}
