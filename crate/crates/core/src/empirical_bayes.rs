//! Per-vertex two-sample t-tests and empirical-Bayes estimation of the
//! model hyperparameters from the whole data set.

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::engine::{GlobalHyperparams, ScaleSource};
use crate::error::{Error, Result};
use crate::graph::{Lattice, PatchShape};
use crate::model::DataMatrices;
use crate::numeric::order_free_sum;

/// Pooled-variance two-sample t-tests, one per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexTests {
    pub t: Vec<f64>,
    /// Two-sided p-values.
    pub p: Vec<f64>,
    /// `Ybar_v - Xbar_v`.
    pub effect: Vec<f64>,
    pub se: Vec<f64>,
    /// Vertices whose pooled variance was zero; these get `t = 0`, `p = 1`.
    pub degenerate: Vec<bool>,
    pub df: f64,
}

fn row_mean_and_ss(m: &DMatrix<f64>, i: usize, buf: &mut Vec<f64>) -> (f64, f64) {
    buf.clear();
    buf.extend(m.row(i).iter().copied());
    let mean = order_free_sum(buf) / m.ncols() as f64;
    buf.clear();
    buf.extend(m.row(i).iter().map(|x| (x - mean) * (x - mean)));
    (mean, order_free_sum(buf))
}

pub fn vertex_t_tests(data: &DataMatrices) -> Result<VertexTests> {
    let (mx, my) = (data.m_x() as f64, data.m_y() as f64);
    let df = mx + my - 2.0;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    let n = data.n_vertices();
    let mut out = VertexTests {
        t: Vec::with_capacity(n),
        p: Vec::with_capacity(n),
        effect: Vec::with_capacity(n),
        se: Vec::with_capacity(n),
        degenerate: Vec::with_capacity(n),
        df,
    };
    let mut buf = Vec::new();
    for v in 0..n {
        let (xbar, ssx) = row_mean_and_ss(data.x(), v, &mut buf);
        let (ybar, ssy) = row_mean_and_ss(data.y(), v, &mut buf);
        let pooled = (ssx + ssy) / df;
        let effect = ybar - xbar;
        out.effect.push(effect);
        if pooled > 0.0 {
            let se = (pooled * (1.0 / mx + 1.0 / my)).sqrt();
            let t = effect / se;
            out.se.push(se);
            out.t.push(t);
            out.p.push((2.0 * dist.sf(t.abs())).min(1.0));
            out.degenerate.push(false);
        } else {
            out.se.push(f64::MIN_POSITIVE);
            out.t.push(0.0);
            out.p.push(1.0);
            out.degenerate.push(true);
        }
    }
    Ok(out)
}

/// Storey's estimate `#{p > lambda} / ((1 - lambda) N)`, clipped to `[0, 1]`.
pub fn estimate_p0(p: &[f64], lambda: f64) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::invalid("no p-values"));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda must be in (0, 1), got {lambda}")));
    }
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("p-value {bad} outside [0, 1]")));
    }
    let above = p.iter().filter(|&&v| v > lambda).count() as f64;
    Ok((above / ((1.0 - lambda) * p.len() as f64)).clamp(0.0, 1.0))
}

/// How the shift-prior variance is obtained from the per-vertex effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftVarianceRule {
    /// `var(effect) - mean(se^2)` over all vertices.
    #[default]
    Moments,
    /// The same excess variance attributed to the non-null fraction only,
    /// i.e. divided by `1 - p0`.
    NonNullMoments,
}

/// Fixed values that replace the corresponding estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverrides {
    pub mu0: Option<f64>,
    pub tau2: Option<f64>,
    pub delta0: Option<f64>,
    pub sigma2: Option<f64>,
    pub p0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationConfig {
    /// Storey tuning parameter.
    pub lambda: f64,
    /// `df = n_patch + df_excess`.
    pub df_excess: f64,
    /// Factor applied to off-diagonal covariance entries.
    pub shrink: f64,
    /// Estimate `A` and `B` from each group separately.
    pub separate_scales: bool,
    pub tau2_floor: f64,
    pub sigma2_floor: f64,
    pub shift_variance: ShiftVarianceRule,
    pub overrides: HyperOverrides,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        EstimationConfig {
            lambda: 0.5,
            df_excess: 2.0,
            shrink: 0.9,
            separate_scales: false,
            tau2_floor: 1e-6,
            sigma2_floor: 1e-4,
            shift_variance: ShiftVarianceRule::Moments,
            overrides: HyperOverrides::default(),
        }
    }
}

/// How vertices are grouped into patches, which determines the shape of the
/// scale matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PatchLayout {
    /// Rectangular windows on a lattice; one stationary covariance is
    /// averaged over every window position.
    Lattice { lattice: Lattice, shape: PatchShape },
    /// Arbitrary patches of a general graph; each patch takes the pooled
    /// covariance of its own vertices.
    Graph,
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mut buf = xs.to_vec();
    let mean = order_free_sum(&mut buf) / n;
    let mut sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    order_free_sum(&mut sq) / (n - 1.0)
}

fn centred(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let mut buf = Vec::new();
    for i in 0..m.nrows() {
        buf.clear();
        buf.extend(m.row(i).iter().copied());
        let mean = order_free_sum(&mut buf) / m.ncols() as f64;
        out.row_mut(i).add_scalar_mut(-mean);
    }
    out
}

/// Average over every window position of the within-group covariance of the
/// window, from the given centred residual blocks.
fn stationary_covariance(blocks: &[&DMatrix<f64>], lattice: Lattice, shape: PatchShape, shrink: f64) -> DMatrix<f64> {
    let n = shape.size();
    let denom: f64 = blocks.iter().map(|m| m.ncols() as f64 - 1.0).sum();
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut count = 0.0;
    for r0 in 0..=lattice.rows - shape.rows {
        for c0 in 0..=lattice.cols - shape.cols {
            let w = lattice.window((r0, c0), shape);
            for i in 0..n {
                for j in i..n {
                    let s: f64 = blocks.iter().map(|m| m.row(w[i]).dot(&m.row(w[j]))).sum();
                    sum[(i, j)] += s / denom;
                }
            }
            count += 1.0;
        }
    }
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        let v = sum[(a, b)] / count;
        if i == j {
            v
        } else {
            v * shrink
        }
    })
}

/// Estimates every hyperparameter from the data.
///
/// * `mu0`: grand mean of all observations.
/// * `tau2`: variance across vertices of the per-vertex pooled means.
/// * `delta0`: zero.
/// * `sigma2`: method-of-moments deconvolution of the per-vertex effects.
/// * `p0`: Storey's estimate from the vertex p-values.
/// * `df`, `A`, `B`: `df = n_patch + 2` and `A = B = (df - n_patch - 1)`
///   times the pooled within-group covariance with shrunken off-diagonals.
pub fn estimate_hyperparams(data: &DataMatrices, layout: PatchLayout, cfg: &EstimationConfig) -> Result<GlobalHyperparams> {
    if data.m_x() < 2 || data.m_y() < 2 {
        return Err(Error::invalid("each group needs at least two replicates"));
    }
    if !(cfg.shrink > 0.0 && cfg.shrink <= 1.0) {
        return Err(Error::invalid(format!("shrink factor must be in (0, 1], got {}", cfg.shrink)));
    }
    if !(cfg.df_excess > 1.0) {
        return Err(Error::invalid("df excess must exceed 1 for a finite prior mean"));
    }
    let n = data.n_vertices();
    if n < 2 {
        return Err(Error::invalid("need at least two vertices to estimate hyperparameters"));
    }
    let tests = vertex_t_tests(data)?;

    let mut all: Vec<f64> = data.x().iter().chain(data.y().iter()).copied().collect();
    let mu0 = order_free_sum(&mut all) / all.len() as f64;

    let total = (data.m_x() + data.m_y()) as f64;
    let vertex_means: Vec<f64> = (0..n)
        .map(|v| {
            let mut row: Vec<f64> = data.x().row(v).iter().chain(data.y().row(v).iter()).copied().collect();
            order_free_sum(&mut row) / total
        })
        .collect();
    let tau2 = variance(&vertex_means).max(cfg.tau2_floor);

    let p0 = estimate_p0(&tests.p, cfg.lambda)?;

    let live: Vec<usize> = (0..n).filter(|&v| !tests.degenerate[v]).collect();
    let sigma2 = if live.len() >= 2 {
        let effects: Vec<f64> = live.iter().map(|&v| tests.effect[v]).collect();
        let mut se2: Vec<f64> = live.iter().map(|&v| tests.se[v] * tests.se[v]).collect();
        let excess = variance(&effects) - order_free_sum(&mut se2) / live.len() as f64;
        let p0_used = cfg.overrides.p0.unwrap_or(p0);
        let excess = match cfg.shift_variance {
            ShiftVarianceRule::Moments => excess,
            ShiftVarianceRule::NonNullMoments if p0_used < 1.0 => excess / (1.0 - p0_used),
            ShiftVarianceRule::NonNullMoments => excess,
        };
        excess.max(cfg.sigma2_floor)
    } else {
        cfg.sigma2_floor
    };

    let rx = centred(data.x());
    let ry = centred(data.y());
    let scale = match layout {
        PatchLayout::Lattice { lattice, shape } => {
            if lattice.n_vertices() != n {
                return Err(Error::invalid(format!(
                    "data has {n} rows but the {}x{} lattice has {} vertices",
                    lattice.rows,
                    lattice.cols,
                    lattice.n_vertices()
                )));
            }
            if shape.rows > lattice.rows || shape.cols > lattice.cols || shape.size() == 0 {
                return Err(Error::invalid("patch does not fit in the lattice"));
            }
            let n_patch = shape.size() as f64;
            let df = n_patch + cfg.df_excess;
            let factor = df - n_patch - 1.0;
            let fix = |c: DMatrix<f64>| -> Result<DMatrix<f64>> {
                let m = c * factor;
                if m.clone().cholesky().is_none() {
                    return Err(Error::domain(
                        "pooled covariance is not positive definite; the data may be constant",
                    ));
                }
                Ok(m)
            };
            if cfg.separate_scales {
                let a = fix(stationary_covariance(&[&rx], lattice, shape, cfg.shrink))?;
                let b = fix(stationary_covariance(&[&ry], lattice, shape, cfg.shrink))?;
                ScaleSource::Shared { df, a, b }
            } else {
                let a = fix(stationary_covariance(&[&rx, &ry], lattice, shape, cfg.shrink))?;
                ScaleSource::Shared { df, a: a.clone(), b: a }
            }
        }
        PatchLayout::Graph => ScaleSource::Pooled {
            df_excess: cfg.df_excess,
            shrink: cfg.shrink,
            resid_x: rx,
            resid_y: ry,
            shared: !cfg.separate_scales,
        },
    };

    let o = cfg.overrides;
    let h = GlobalHyperparams {
        mu0: o.mu0.unwrap_or(mu0),
        tau2: o.tau2.unwrap_or(tau2),
        delta0: o.delta0.unwrap_or(0.0),
        sigma2: o.sigma2.unwrap_or(sigma2),
        p0: o.p0.unwrap_or(p0),
        scale,
    };
    if !(h.tau2 > 0.0 && h.sigma2 > 0.0 && (0.0..=1.0).contains(&h.p0)) {
        return Err(Error::invalid("overridden hyperparameters are out of range"));
    }
    Ok(h)
}
