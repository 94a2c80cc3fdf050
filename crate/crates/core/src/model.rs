//! The mixture model on a patch: discrete states, prior mass, the
//! covariance-marginalised Gaussian predictive density, and the Laplace
//! approximation over the free block means.
//!
//! Given block means, replicates in each group are Gaussian with an
//! unstructured covariance carrying an inverse-Wishart prior; integrating the
//! covariance out leaves
//!
//! ```text
//! log f = df/2 log|A| + df/2 log|B| - (df+Mx)/2 log|A~| - (df+My)/2 log|B~| + C
//! A~ = A + (Mx-1) S1 + Mx (xbar - muX)(xbar - muX)'
//! ```
//!
//! and the analogue for `B~`. `C` depends only on the data shape and is
//! dropped everywhere.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::{is_symmetric, log_det_spd, normal_log_pdf, order_free_sum, LN_2PI};
use crate::optim::{self, BfgsOptions};
use crate::partition::Partition;

/// Hyperparameters of the model on one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Prior mean of the group-1 block means.
    pub mu0: f64,
    /// Prior variance of the group-1 block means.
    pub tau2: f64,
    /// Prior mean of block shifts.
    pub delta0: f64,
    /// Prior variance of block shifts.
    pub sigma2: f64,
    /// Inverse-Wishart degrees of freedom.
    pub df: f64,
    /// Inverse-Wishart scale for group 1.
    pub a: DMatrix<f64>,
    /// Inverse-Wishart scale for group 2.
    pub b: DMatrix<f64>,
    /// Prior probability that a block is unchanged.
    pub p0: f64,
}

impl Hyperparams {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for (name, v) in [("mu0", self.mu0), ("delta0", self.delta0)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(Error::invalid(format!("tau2 must be positive, got {}", self.tau2)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if !(self.df > n as f64 + 1.0) || !self.df.is_finite() {
            return Err(Error::invalid(format!("df must exceed {} for a {n}-vertex patch, got {}", n + 1, self.df)));
        }
        if !(0.0..=1.0).contains(&self.p0) {
            return Err(Error::invalid(format!("p0 must be in [0, 1], got {}", self.p0)));
        }
        for (name, m) in [("A", &self.a), ("B", &self.b)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::invalid(format!("{name} must be {n}x{n}")));
            }
            if !is_symmetric(m, 1e-10) {
                return Err(Error::invalid(format!("{name} is not symmetric")));
            }
            log_det_spd(m).map_err(|_| Error::invalid(format!("{name} is not positive definite")))?;
        }
        Ok(())
    }

    /// Copy with `A` and `B` restricted to the given rows/columns.
    pub fn restrict(&self, idx: &[usize]) -> Hyperparams {
        let sub = |m: &DMatrix<f64>| DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
        Hyperparams {
            a: sub(&self.a),
            b: sub(&self.b),
            ..self.clone()
        }
    }
}

/// A partition of the patch together with its block change indicators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DiscreteState {
    pub partition: Partition,
    pub delta: Vec<bool>,
}

impl DiscreteState {
    pub fn new(partition: Partition, delta: Vec<bool>) -> Result<Self> {
        if delta.len() != partition.n_blocks() {
            return Err(Error::invalid(format!(
                "delta has {} entries but partition has {} blocks",
                delta.len(),
                partition.n_blocks()
            )));
        }
        Ok(DiscreteState { partition, delta })
    }

    /// State with indicators read from the low bits of `mask` (bit k is block k).
    pub fn from_mask(partition: Partition, mask: u64) -> Self {
        let delta = (0..partition.n_blocks()).map(|k| mask >> k & 1 == 1).collect();
        DiscreteState { partition, delta }
    }

    pub fn n_shifted(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    /// Whether vertex `v` is null in this state.
    pub fn is_null_at(&self, v: usize) -> bool {
        !self.delta[self.partition.block_of(v)]
    }
}

/// Free mean parameters of a state: one group-1 mean per block, and a shift
/// for each block whose indicator is set (in block order).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMeans {
    pub phi: Vec<f64>,
    pub delta_vals: Vec<f64>,
}

/// Replicate observations: rows are vertices, columns are replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

impl DataMatrices {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::invalid(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::invalid("data has no vertices"));
        }
        if x.ncols() < 2 || y.ncols() < 2 {
            return Err(Error::invalid("each group needs at least two replicates"));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("data contain missing or non-finite values"));
        }
        Ok(DataMatrices { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn n_vertices(&self) -> usize {
        self.x.nrows()
    }

    pub fn m_x(&self) -> usize {
        self.x.ncols()
    }

    pub fn m_y(&self) -> usize {
        self.y.ncols()
    }

    /// Data restricted to the listed vertices, in that order.
    pub fn restrict_rows(&self, rows: &[usize]) -> Result<DataMatrices> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_vertices()) {
            return Err(Error::invalid(format!("vertex {bad} out of range")));
        }
        Ok(DataMatrices {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
        })
    }

    pub fn into_parts(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.x, self.y)
    }
}

/// Per-group mean vector and scatter matrix `sum_m (x_m - xbar)(x_m - xbar)'`.
///
/// Sums are accumulated in sorted order, so the result is bit-identical under
/// any permutation of replicate columns.
#[derive(Debug, Clone)]
pub(crate) struct GroupStats {
    pub mean: DVector<f64>,
    pub scatter: DMatrix<f64>,
}

pub(crate) fn group_stats(m: &DMatrix<f64>) -> GroupStats {
    let (n, reps) = m.shape();
    let mut buf = vec![0.0; reps];
    let mean = DVector::from_fn(n, |i, _| {
        buf.copy_from_slice(&m.row(i).iter().copied().collect::<Vec<_>>());
        order_free_sum(&mut buf) / reps as f64
    });
    let mut scatter = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            for (r, slot) in buf.iter_mut().enumerate() {
                *slot = (m[(i, r)] - mean[i]) * (m[(j, r)] - mean[j]);
            }
            let s = order_free_sum(&mut buf);
            scatter[(i, j)] = s;
            scatter[(j, i)] = s;
        }
    }
    GroupStats { mean, scatter }
}

/// Expands block means into per-vertex mean vectors for both groups.
pub fn mean_vectors(state: &DiscreteState, means: &BlockMeans) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = state.partition.n_blocks();
    if state.delta.len() != k {
        return Err(Error::invalid("delta length differs from block count"));
    }
    if means.phi.len() != k {
        return Err(Error::invalid(format!("expected {k} block means, got {}", means.phi.len())));
    }
    if means.delta_vals.len() != state.n_shifted() {
        return Err(Error::invalid(format!(
            "expected {} shifts, got {}",
            state.n_shifted(),
            means.delta_vals.len()
        )));
    }
    let mut shift = vec![0.0; k];
    let mut next = 0;
    for b in 0..k {
        if state.delta[b] {
            shift[b] = means.delta_vals[next];
            next += 1;
        }
    }
    let labels = state.partition.labels();
    let mu_x = labels.iter().map(|&b| means.phi[b]).collect();
    let mu_y = labels.iter().map(|&b| means.phi[b] + shift[b]).collect();
    Ok((mu_x, mu_y))
}

/// Log predictive density of the data given per-vertex means, with the
/// inverse-Wishart covariances integrated out (additive constant omitted).
pub fn log_pred_density_given_means(
    data: &DataMatrices,
    mu_x: &[f64],
    mu_y: &[f64],
    hyper: &Hyperparams,
) -> Result<f64> {
    let n = data.n_vertices();
    if mu_x.len() != n || mu_y.len() != n || hyper.dim() != n {
        return Err(Error::invalid(format!(
            "dimension mismatch: data {n}, muX {}, muY {}, hyperparameters {}",
            mu_x.len(),
            mu_y.len(),
            hyper.dim()
        )));
    }
    let df = hyper.df;
    let term = |m: &DMatrix<f64>, mu: &[f64], scale: &DMatrix<f64>| -> Result<f64> {
        let reps = m.ncols() as f64;
        let st = group_stats(m);
        let s1 = &st.scatter / (reps - 1.0);
        let r = DVector::from_fn(n, |i, _| st.mean[i] - mu[i]);
        let s2 = &r * r.transpose();
        let tilde = scale + s1 * (reps - 1.0) + s2 * reps;
        let ld_tilde = log_det_spd(&tilde).map_err(|_| Error::domain("updated scale matrix is not positive definite"))?;
        let ld_scale = log_det_spd(scale)?;
        Ok(0.5 * df * ld_scale - 0.5 * (df + reps) * ld_tilde)
    };
    Ok(term(data.x(), mu_x, &hyper.a)? + term(data.y(), mu_y, &hyper.b)?)
}

/// Log prior mass of a state: uniform over the `n_states` graph-respecting
/// partitions, independent Bernoulli indicators with `P(delta_k = 0) = p0`.
pub fn log_prior_mass(state: &DiscreteState, hyper: &Hyperparams, n_states: usize) -> Result<f64> {
    if n_states == 0 {
        return Err(Error::invalid("number of partitions must be positive"));
    }
    if state.delta.len() != state.partition.n_blocks() {
        return Err(Error::invalid("delta length differs from block count"));
    }
    let mut lp = -(n_states as f64).ln();
    for &d in &state.delta {
        let p = if d { 1.0 - hyper.p0 } else { hyper.p0 };
        if p <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        lp += p.ln();
    }
    Ok(lp)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaplaceOptions {
    pub bfgs: BfgsOptions,
}

#[derive(Debug, Clone)]
pub struct LaplaceResult {
    pub log_marginal: f64,
    /// Mode in parameter order `(phi_0.., delta_k for shifted blocks..)`.
    pub mode: Vec<f64>,
    pub log_integrand_at_mode: f64,
    /// `log|-H|` for the Hessian `H` of the log-integrand at the mode.
    pub log_det_neg_hessian: f64,
    pub iterations: usize,
}

/// Patch data reduced to what the state computations need, with the
/// state-independent parts of the predictive density precomputed.
///
/// With `A' = A + (Mx-1) S1` the rank-one term gives
/// `log|A~| = log|A'| + log(1 + Mx r' A'^-1 r)`, `r = xbar - muX`.
#[derive(Debug, Clone)]
pub struct PatchModel {
    n: usize,
    m_x: f64,
    m_y: f64,
    xbar: Vec<f64>,
    ybar: Vec<f64>,
    a_inv: Vec<f64>,
    b_inv: Vec<f64>,
    c_x: f64,
    c_y: f64,
    /// log predictive density at `muX = xbar`, `muY = ybar`.
    log_pred_base: f64,
    mu0: f64,
    tau2: f64,
    delta0: f64,
    sigma2: f64,
}

/// Block membership and parameter indexing for one discrete state.
#[derive(Debug, Clone)]
struct Layout {
    block_of: Vec<usize>,
    /// Parameter index of each block's shift, if shifted.
    shift_idx: Vec<Option<usize>>,
    k: usize,
    dim: usize,
}

impl Layout {
    fn new(state: &DiscreteState) -> Self {
        let k = state.partition.n_blocks();
        let mut next = k;
        let shift_idx = state
            .delta
            .iter()
            .map(|&d| {
                d.then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect();
        Layout {
            block_of: state.partition.labels().to_vec(),
            shift_idx,
            k,
            dim: next,
        }
    }
}

impl PatchModel {
    pub fn new(data: &DataMatrices, hyper: &Hyperparams) -> Result<Self> {
        let n = data.n_vertices();
        if hyper.dim() != n {
            return Err(Error::invalid(format!(
                "hyperparameter matrices are {}x{} but the patch has {n} vertices",
                hyper.dim(),
                hyper.dim()
            )));
        }
        let (m_x, m_y) = (data.m_x() as f64, data.m_y() as f64);
        let sx = group_stats(data.x());
        let sy = group_stats(data.y());
        let a_prime = &hyper.a + &sx.scatter;
        let b_prime = &hyper.b + &sy.scatter;
        let inv = |m: DMatrix<f64>| -> Result<(Vec<f64>, f64)> {
            let chol = m
                .cholesky()
                .ok_or_else(|| Error::domain("updated scale matrix is not positive definite"))?;
            let l = chol.l_dirty();
            let ld = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
            let inv = chol.inverse();
            Ok((inv.transpose().as_slice().to_vec(), ld))
        };
        let (a_inv, ld_ap) = inv(a_prime)?;
        let (b_inv, ld_bp) = inv(b_prime)?;
        let ld_a = log_det_spd(&hyper.a)?;
        let ld_b = log_det_spd(&hyper.b)?;
        let c_x = 0.5 * (hyper.df + m_x);
        let c_y = 0.5 * (hyper.df + m_y);
        let log_pred_base = 0.5 * hyper.df * (ld_a + ld_b) - c_x * ld_ap - c_y * ld_bp;
        Ok(PatchModel {
            n,
            m_x,
            m_y,
            xbar: sx.mean.iter().copied().collect(),
            ybar: sy.mean.iter().copied().collect(),
            a_inv,
            b_inv,
            c_x,
            c_y,
            log_pred_base,
            mu0: hyper.mu0,
            tau2: hyper.tau2,
            delta0: hyper.delta0,
            sigma2: hyper.sigma2,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    fn quad(&self, inv: &[f64], r: &[f64], out: &mut [f64]) -> f64 {
        let n = self.n;
        let mut q = 0.0;
        for i in 0..n {
            let row = &inv[i * n..(i + 1) * n];
            let v: f64 = row.iter().zip(r).map(|(a, b)| a * b).sum();
            out[i] = v;
            q += r[i] * v;
        }
        q
    }

    /// Negative log-integrand up to the constant returned by
    /// [`Self::log_integrand_constant`], with its gradient.
    fn objective(&self, layout: &Layout, theta: &[f64], grad: &mut [f64]) -> f64 {
        let n = self.n;
        let mut rx = vec![0.0; n];
        let mut ry = vec![0.0; n];
        for v in 0..n {
            let b = layout.block_of[v];
            let shift = layout.shift_idx[b].map_or(0.0, |i| theta[i]);
            rx[v] = self.xbar[v] - theta[b];
            ry[v] = self.ybar[v] - theta[b] - shift;
        }
        let mut px = vec![0.0; n];
        let mut py = vec![0.0; n];
        let qx = self.quad(&self.a_inv, &rx, &mut px);
        let qy = self.quad(&self.b_inv, &ry, &mut py);
        let dx = 1.0 + self.m_x * qx;
        let dy = 1.0 + self.m_y * qy;
        let mut f = self.c_x * dx.ln() + self.c_y * dy.ln();

        grad.iter_mut().for_each(|g| *g = 0.0);
        let wx = -2.0 * self.c_x * self.m_x / dx;
        let wy = -2.0 * self.c_y * self.m_y / dy;
        for v in 0..n {
            let b = layout.block_of[v];
            grad[b] += wx * px[v] + wy * py[v];
            if let Some(i) = layout.shift_idx[b] {
                grad[i] += wy * py[v];
            }
        }
        for b in 0..layout.k {
            let d = theta[b] - self.mu0;
            f += 0.5 * d * d / self.tau2;
            grad[b] += d / self.tau2;
            if let Some(i) = layout.shift_idx[b] {
                let d = theta[i] - self.delta0;
                f += 0.5 * d * d / self.sigma2;
                grad[i] += d / self.sigma2;
            }
        }
        f
    }

    fn log_integrand_constant(&self, layout: &Layout) -> f64 {
        let n_shift = layout.dim - layout.k;
        self.log_pred_base
            - 0.5 * layout.k as f64 * (LN_2PI + self.tau2.ln())
            - 0.5 * n_shift as f64 * (LN_2PI + self.sigma2.ln())
    }

    fn start(&self, layout: &Layout) -> Vec<f64> {
        let mut theta = vec![0.0; layout.dim];
        let mut sx = vec![0.0; layout.k];
        let mut sy = vec![0.0; layout.k];
        let mut cnt = vec![0.0; layout.k];
        for v in 0..self.n {
            let b = layout.block_of[v];
            sx[b] += self.xbar[v];
            sy[b] += self.ybar[v];
            cnt[b] += 1.0;
        }
        for b in 0..layout.k {
            theta[b] = sx[b] / cnt[b];
            if let Some(i) = layout.shift_idx[b] {
                theta[i] = (sy[b] - sx[b]) / cnt[b];
            }
        }
        theta
    }

    /// Log of the integrand (predictive density times mean priors) at the
    /// given parameters.
    pub fn log_integrand(&self, state: &DiscreteState, theta: &[f64]) -> Result<f64> {
        let layout = Layout::new(state);
        if theta.len() != layout.dim {
            return Err(Error::invalid(format!("expected {} parameters, got {}", layout.dim, theta.len())));
        }
        let mut g = vec![0.0; layout.dim];
        Ok(self.log_integrand_constant(&layout) - self.objective(&layout, theta, &mut g))
    }

    /// Gradient of [`Self::log_integrand`].
    pub fn log_integrand_grad(&self, state: &DiscreteState, theta: &[f64]) -> Result<Vec<f64>> {
        let layout = Layout::new(state);
        if theta.len() != layout.dim {
            return Err(Error::invalid(format!("expected {} parameters, got {}", layout.dim, theta.len())));
        }
        let mut g = vec![0.0; layout.dim];
        self.objective(&layout, theta, &mut g);
        Ok(g.into_iter().map(|v| -v).collect())
    }

    /// Laplace approximation of the log marginal density of the patch data
    /// given `state`, integrating over the free block means.
    pub fn laplace(&self, state: &DiscreteState, opts: &LaplaceOptions) -> Result<LaplaceResult> {
        if state.partition.len() != self.n || state.delta.len() != state.partition.n_blocks() {
            return Err(Error::invalid("state does not match the patch"));
        }
        let layout = Layout::new(state);
        let d = layout.dim;
        let x0 = self.start(&layout);
        let out = optim::minimize(|t, g| self.objective(&layout, t, g), &x0, opts.bfgs)?;

        let hessian = |x: &[f64]| -> DMatrix<f64> {
            // Central differences of the analytic gradient.
            let mut hess = DMatrix::zeros(d, d);
            let mut gp = vec![0.0; d];
            let mut gm = vec![0.0; d];
            let mut t = x.to_vec();
            let step_base = f64::EPSILON.cbrt();
            for j in 0..d {
                let h = step_base * (1.0 + x[j].abs());
                t[j] = x[j] + h;
                self.objective(&layout, &t, &mut gp);
                t[j] = x[j] - h;
                self.objective(&layout, &t, &mut gm);
                t[j] = x[j];
                for i in 0..d {
                    hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
            (&hess + hess.transpose()) * 0.5
        };
        let not_pd = || Error::domain("negative Hessian of the log-integrand is not positive definite at the mode");

        // One Newton step from the quasi-Newton stopping point sharpens the
        // mode well below the gradient tolerance.
        let mut x = out.x;
        let mut f = out.f;
        let mut hess = hessian(&x);
        let chol = hess.clone().cholesky().ok_or_else(not_pd)?;
        let step = chol.solve(&nalgebra::DVector::from_column_slice(&out.grad));
        let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
        let mut g = vec![0.0; d];
        let f_cand = self.objective(&layout, &cand, &mut g);
        if f_cand <= f && g.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= out.grad.iter().fold(0.0f64, |m, v| m.max(v.abs())) {
            x = cand;
            f = f_cand;
            hess = hessian(&x);
        }
        let log_det = log_det_spd(&hess).map_err(|_| not_pd())?;

        let log_integrand_at_mode = self.log_integrand_constant(&layout) - f;
        Ok(LaplaceResult {
            log_marginal: log_integrand_at_mode + 0.5 * d as f64 * LN_2PI - 0.5 * log_det,
            mode: x,
            log_integrand_at_mode,
            log_det_neg_hessian: log_det,
            iterations: out.iterations,
        })
    }
}

/// Laplace-approximated `log f(X, Y | state)` with default optimizer settings.
pub fn laplace_log_marginal(data: &DataMatrices, state: &DiscreteState, hyper: &Hyperparams) -> Result<f64> {
    Ok(laplace_with(data, state, hyper, &LaplaceOptions::default())?.log_marginal)
}

pub fn laplace_with(
    data: &DataMatrices,
    state: &DiscreteState,
    hyper: &Hyperparams,
    opts: &LaplaceOptions,
) -> Result<LaplaceResult> {
    PatchModel::new(data, hyper)?.laplace(state, opts)
}

/// Log of the prior density of the free means, for use alongside
/// [`log_pred_density_given_means`].
pub fn log_mean_prior(state: &DiscreteState, means: &BlockMeans, hyper: &Hyperparams) -> f64 {
    let mut lp: f64 = means.phi.iter().map(|&p| normal_log_pdf(p, hyper.mu0, hyper.tau2)).sum();
    lp += means
        .delta_vals
        .iter()
        .map(|&d| normal_log_pdf(d, hyper.delta0, hyper.sigma2))
        .sum::<f64>();
    debug_assert_eq!(means.delta_vals.len(), state.n_shifted());
    lp
}
