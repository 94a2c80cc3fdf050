//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's numerical routines: determinants,
//! densities, optimisation and integration are re-derived from scratch on
//! plain vectors so agreement is meaningful.

#![allow(dead_code)]

pub mod invariants;

use std::collections::VecDeque;

use graphmm::{DataMatrices, Graph, Hyperparams};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LN_2PI: f64 = 1.8378770664093453;

pub type Mat = Vec<Vec<f64>>;

// ---------------------------------------------------------------- counting

/// Every partition of `0..n` as canonical labels (first occurrence order).
pub fn all_label_vectors(n: usize) -> Vec<Vec<usize>> {
    fn rec(labels: &mut Vec<usize>, n: usize, max: usize, out: &mut Vec<Vec<usize>>) {
        if labels.len() == n {
            out.push(labels.clone());
            return;
        }
        let next = if labels.is_empty() { 0 } else { max + 1 };
        for l in 0..=next {
            labels.push(l);
            rec(labels, n, max.max(l), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(&mut Vec::with_capacity(n), n, 0, &mut out);
    }
    out
}

fn block_connected(g: &Graph, block: &[usize]) -> bool {
    let mut seen = vec![false; block.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..block.len() {
            if !seen[j] && g.has_edge(block[i], block[j]) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Brute force: keep the partitions whose every block is connected.
pub fn brute_force_respecting(g: &Graph) -> Vec<Vec<usize>> {
    all_label_vectors(g.n_vertices())
        .into_iter()
        .filter(|labels| {
            let k = labels.iter().max().map_or(0, |m| m + 1);
            (0..k).all(|b| {
                let block: Vec<usize> = (0..labels.len()).filter(|&v| labels[v] == b).collect();
                block_connected(g, &block)
            })
        })
        .collect()
}

pub fn bell(n: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        row = next;
    }
    row[0]
}

/// A random connected graph: a random tree plus extra edges.
pub fn random_connected_graph<R: Rng>(n: usize, extra: f64, rng: &mut R) -> Graph {
    let mut edges = std::collections::BTreeSet::new();
    for v in 1..n {
        edges.insert((rng.random_range(0..v), v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(extra) {
                edges.insert((a, b));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

// ------------------------------------------------------------ linear algebra

pub fn det(m: &Mat) -> f64 {
    let n = m.len();
    let mut a = m.clone();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    d
}

pub fn solve(m: &Mat, b: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mut a: Mat = m.iter().zip(b).map(|(row, &v)| row.iter().copied().chain([v]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(p, c);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

pub fn to_mat(m: &DMatrix<f64>) -> Mat {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect()
}

// --------------------------------------------------------------- densities

/// `log |S|^(df/2) / |S + sum_j (x_j - mu)(x_j - mu)'|^((df+M)/2)` for one
/// group with replicate columns `obs[v][j]`.
pub fn log_pred(obs: &Mat, mu: &[f64], scale: &Mat, df: f64) -> f64 {
    let n = obs.len();
    let m = obs[0].len();
    let mut t = scale.clone();
    for j in 0..m {
        for a in 0..n {
            for b in 0..n {
                t[a][b] += (obs[a][j] - mu[a]) * (obs[b][j] - mu[b]);
            }
        }
    }
    0.5 * df * det(scale).ln() - 0.5 * (df + m as f64) * det(&t).ln()
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// The constant dropped from [`log_pred`]: the inverse-Wishart
/// normalisers and the Gaussian `pi` factor.
pub fn log_pred_constant(n: usize, m: usize, df: f64) -> f64 {
    let mvlgamma = |a: f64| {
        0.25 * (n * (n - 1)) as f64 * std::f64::consts::PI.ln()
            + (0..n).map(|j| ln_gamma(a - 0.5 * j as f64)).sum::<f64>()
    };
    -0.5 * (n * m) as f64 * std::f64::consts::PI.ln() + mvlgamma(0.5 * (df + m as f64)) - mvlgamma(0.5 * df)
}

pub fn normal_ln(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean).powi(2) / var)
}

/// Monte-Carlo estimate of `p(obs | mu)` with `Sigma ~ IW(df, scale)`:
/// `Sigma^-1 = sum_{i<df} z z'`, `z ~ N(0, scale^-1)`. `df` must be an
/// integer and `scale` the identity.
pub fn mc_iw_density<R: Rng>(obs: &Mat, mu: &[f64], df: usize, draws: usize, rng: &mut R) -> f64 {
    let n = obs.len();
    let m = obs[0].len();
    let mut r = vec![vec![0.0; n]; n];
    for j in 0..m {
        for a in 0..n {
            for b in 0..n {
                r[a][b] += (obs[a][j] - mu[a]) * (obs[b][j] - mu[b]);
            }
        }
    }
    let mut total = 0.0;
    let mut w = vec![vec![0.0; n]; n];
    let mut z = vec![0.0; n];
    for _ in 0..draws {
        w.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v = 0.0));
        for _ in 0..df {
            z.iter_mut().for_each(|v| *v = StandardNormal.sample(rng));
            for a in 0..n {
                for b in 0..n {
                    w[a][b] += z[a] * z[b];
                }
            }
        }
        let tr: f64 = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| w[a][b] * r[b][a]).sum();
        let lp = -0.5 * (n * m) as f64 * LN_2PI + 0.5 * m as f64 * det(&w).ln() - 0.5 * tr;
        total += lp.exp();
    }
    total / draws as f64
}

// ------------------------------------------------------------ hand model

/// Plain-vector copy of a patch's data and hyperparameters.
#[derive(Clone)]
pub struct HandPatch {
    pub x: Mat,
    pub y: Mat,
    pub a: Mat,
    pub b: Mat,
    pub df: f64,
    pub mu0: f64,
    pub tau2: f64,
    pub delta0: f64,
    pub sigma2: f64,
    pub p0: f64,
}

impl HandPatch {
    pub fn new(data: &DataMatrices, h: &Hyperparams) -> Self {
        HandPatch {
            x: to_mat(data.x()),
            y: to_mat(data.y()),
            a: to_mat(&h.a),
            b: to_mat(&h.b),
            df: h.df,
            mu0: h.mu0,
            tau2: h.tau2,
            delta0: h.delta0,
            sigma2: h.sigma2,
            p0: h.p0,
        }
    }

    /// Log integrand for block labels and shift flags; `theta` holds one
    /// mean per block followed by one shift per flagged block.
    pub fn log_integrand(&self, labels: &[usize], shifted: &[bool], theta: &[f64]) -> f64 {
        let k = shifted.len();
        let mut shift = vec![0.0; k];
        let mut lp = 0.0;
        let mut next = k;
        for b in 0..k {
            lp += normal_ln(theta[b], self.mu0, self.tau2);
            if shifted[b] {
                shift[b] = theta[next];
                lp += normal_ln(theta[next], self.delta0, self.sigma2);
                next += 1;
            }
        }
        let mu_x: Vec<f64> = labels.iter().map(|&b| theta[b]).collect();
        let mu_y: Vec<f64> = labels.iter().map(|&b| theta[b] + shift[b]).collect();
        lp + log_pred(&self.x, &mu_x, &self.a, self.df) + log_pred(&self.y, &mu_y, &self.b, self.df)
    }

    pub fn start(&self, labels: &[usize], shifted: &[bool]) -> Vec<f64> {
        let mean = |row: &Vec<f64>| row.iter().sum::<f64>() / row.len() as f64;
        let k = shifted.len();
        let mut sx = vec![0.0; k];
        let mut sy = vec![0.0; k];
        let mut cnt = vec![0.0; k];
        for (v, &b) in labels.iter().enumerate() {
            sx[b] += mean(&self.x[v]);
            sy[b] += mean(&self.y[v]);
            cnt[b] += 1.0;
        }
        let mut theta: Vec<f64> = (0..k).map(|b| sx[b] / cnt[b]).collect();
        for b in 0..k {
            if shifted[b] {
                theta.push((sy[b] - sx[b]) / cnt[b]);
            }
        }
        theta
    }

    pub fn laplace(&self, labels: &[usize], shifted: &[bool]) -> f64 {
        let f = |t: &[f64]| self.log_integrand(labels, shifted, t);
        laplace_oracle(&f, self.start(labels, shifted))
    }

    /// Exact mixture over every graph-respecting state of `g`.
    pub fn lfdr(&self, g: &Graph) -> Vec<f64> {
        let parts = brute_force_respecting(g);
        let n = g.n_vertices();
        let mut logs = Vec::new();
        let mut nulls: Vec<Vec<bool>> = Vec::new();
        for labels in &parts {
            let k = labels.iter().max().unwrap() + 1;
            for mask in 0..(1usize << k) {
                let shifted: Vec<bool> = (0..k).map(|b| mask >> b & 1 == 1).collect();
                let mut lp = -(parts.len() as f64).ln();
                for &s in &shifted {
                    lp += if s { (1.0 - self.p0).ln() } else { self.p0.ln() };
                }
                if lp == f64::NEG_INFINITY {
                    continue;
                }
                logs.push(lp + self.laplace(labels, &shifted));
                nulls.push(labels.iter().map(|&b| !shifted[b]).collect());
            }
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        (0..n)
            .map(|v| w.iter().zip(&nulls).filter(|(_, nl)| nl[v]).map(|(w, _)| w).sum::<f64>() / total)
            .collect()
    }
}

// ------------------------------------------------------- Laplace by Newton

fn richardson(d: impl Fn(f64) -> f64, h: f64) -> f64 {
    let (d1, d2, d4) = (d(h), d(h / 2.0), d(h / 4.0));
    let r1 = (4.0 * d2 - d1) / 3.0;
    let r2 = (4.0 * d4 - d2) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut t = x.to_vec();
    for &(i, h) in moves {
        t[i] += h;
    }
    t
}

pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h0 = 1e-3 * (1.0 + x[i].abs());
            richardson(|h| (f(&shifted(x, &[(i, h)])) - f(&shifted(x, &[(i, -h)]))) / (2.0 * h), h0)
        })
        .collect()
}

pub fn fd_hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Mat {
    let d = x.len();
    let f0 = f(x);
    let mut hess = vec![vec![0.0; d]; d];
    for i in 0..d {
        let hi = 1e-2 * (1.0 + x[i].abs());
        hess[i][i] = richardson(
            |h| (f(&shifted(x, &[(i, h)])) - 2.0 * f0 + f(&shifted(x, &[(i, -h)]))) / (h * h),
            hi,
        );
        for j in 0..i {
            let hj = 1e-2 * (1.0 + x[j].abs());
            let v = richardson(
                |s| {
                    let (a, b) = (s, s * hj / hi);
                    (f(&shifted(x, &[(i, a), (j, b)])) - f(&shifted(x, &[(i, a), (j, -b)]))
                        - f(&shifted(x, &[(i, -a), (j, b)]))
                        + f(&shifted(x, &[(i, -a), (j, -b)])))
                        / (4.0 * a * b)
                },
                hi,
            );
            hess[i][j] = v;
            hess[j][i] = v;
        }
    }
    hess
}

/// Damped Newton ascent to the mode, then the Gaussian integral there.
pub fn laplace_oracle(f: &dyn Fn(&[f64]) -> f64, x0: Vec<f64>) -> f64 {
    let mut x = x0;
    let mut fx = f(&x);
    for _ in 0..200 {
        let g = fd_gradient(f, &x);
        let h = fd_hessian(f, &x);
        let step = solve(&h, &g);
        let mut scale = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - scale * s).collect();
            let fc = f(&cand);
            if fc >= fx - 1e-13 * fx.abs() {
                moved = true;
                let done = step.iter().zip(&x).all(|(s, a)| (scale * s).abs() < 1e-12 * (1.0 + a.abs()));
                x = cand;
                fx = fc;
                if done {
                    return finish(f, &x, fx);
                }
                break;
            }
            scale *= 0.5;
        }
        if !moved {
            break;
        }
    }
    finish(f, &x, fx)
}

fn finish(f: &dyn Fn(&[f64]) -> f64, x: &[f64], fx: f64) -> f64 {
    let h = fd_hessian(f, x);
    let neg: Mat = h.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
    fx + 0.5 * x.len() as f64 * LN_2PI - 0.5 * det(&neg).ln()
}

// ------------------------------------------------------------ quadrature

/// Adaptive Simpson integral of `g` on `[a, b]`.
pub fn simpson_adaptive(g: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(g: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (g(lm), g(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(g, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(g, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (g(a), g(m), g(b));
    rec(g, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

fn simpson_weights(n: usize) -> Vec<f64> {
    (0..=n)
        .map(|i| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 })
        .collect()
}

/// Tensor-product Simpson rule for `g` on a rectangle; `n` even.
pub fn simpson_2d(g: &dyn Fn(f64, f64) -> f64, (a0, b0): (f64, f64), (a1, b1): (f64, f64), n: usize) -> f64 {
    let w = simpson_weights(n);
    let (h0, h1) = ((b0 - a0) / n as f64, (b1 - a1) / n as f64);
    let mut total = 0.0;
    for i in 0..=n {
        let u = a0 + i as f64 * h0;
        for j in 0..=n {
            total += w[i] * w[j] * g(u, a1 + j as f64 * h1);
        }
    }
    total * h0 * h1 / 9.0
}

// ------------------------------------------------------------- baselines

/// BH adjusted p-value straight from its definition: the smallest
/// `N t / #{p_j <= t}` over observed thresholds `t >= p_i`.
pub fn bh_brute(p: &[f64]) -> Vec<f64> {
    let n = p.len() as f64;
    p.iter()
        .map(|&pi| {
            p.iter()
                .filter(|&&t| t >= pi)
                .map(|&t| n * t / p.iter().filter(|&&q| q <= t).count() as f64)
                .fold(1.0, f64::min)
        })
        .collect()
}

// ------------------------------------------------------------ data makers

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, mean: &[f64], sd: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, _| {
        let z: f64 = StandardNormal.sample(rng);
        mean[i] + sd * z
    })
}

pub fn hyper_with(n: usize, df: f64, p0: f64) -> Hyperparams {
    Hyperparams {
        mu0: 0.0,
        tau2: 1.0,
        delta0: 0.0,
        sigma2: 1.0,
        df,
        a: DMatrix::identity(n, n),
        b: DMatrix::identity(n, n),
        p0,
    }
}

// ------------------------------------------------------------ fixtures

/// Analytic and Monte-Carlo log densities of a two-vertex dataset with
/// three replicates per group, `df = 4`, `A = B = I`.
pub fn iw_case(seed: u64, draws: usize) -> (f64, f64) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (n, m, df) = (2, 3, 4usize);
    let mu_x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mu_y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = gaussian_matrix(n, m, &mu_x, 1.0, &mut rng);
    let y = gaussian_matrix(n, m, &mu_y, 1.0, &mut rng);
    let data = DataMatrices::new(x, y).unwrap();
    let h = hyper_with(n, df as f64, 0.5);
    let analytic = graphmm::log_pred_density_given_means(&data, &mu_x, &mu_y, &h).unwrap()
        + 2.0 * log_pred_constant(n, m, df as f64);
    let px = mc_iw_density(&to_mat(data.x()), &mu_x, df, draws, &mut rng);
    let py = mc_iw_density(&to_mat(data.y()), &mu_y, df, draws, &mut rng);
    (analytic, px.ln() + py.ln())
}

/// Laplace and quadrature log marginals. Even seeds give a one-parameter
/// case (one vertex, no shift); odd seeds alternate between a shifted
/// single vertex and a shifted two-vertex block.
pub fn laplace_case(seed: u64) -> (f64, f64, usize) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + seed);
    let m = 30;
    let n = if seed % 4 == 3 { 2 } else { 1 };
    let shifted = seed % 2 == 1;
    let base: f64 = rng.random_range(-1.0..1.0);
    let shift = if shifted { rng.random_range(-1.5..1.5) } else { 0.0 };
    let x = gaussian_matrix(n, m, &vec![base; n], 1.0, &mut rng);
    let y = gaussian_matrix(n, m, &vec![base + shift; n], 1.0, &mut rng);
    let data = DataMatrices::new(x, y).unwrap();
    let mut h = hyper_with(n, n as f64 + 3.0, 0.5);
    h.tau2 = rng.random_range(0.5..2.0);
    h.sigma2 = rng.random_range(0.5..2.0);
    if n == 2 {
        h.a[(0, 1)] = 0.3;
        h.a[(1, 0)] = 0.3;
    }
    let labels = vec![0; n];
    let flags = [shifted];
    let state = graphmm::DiscreteState::new(graphmm::Partition::from_labels(&labels), flags.to_vec()).unwrap();
    let lap = graphmm::laplace_log_marginal(&data, &state, &h).unwrap();

    let hand = HandPatch::new(&data, &h);
    let c = hand.start(&labels, &flags);
    let peak = hand.log_integrand(&labels, &flags, &c);
    let s = 1.0 / (m as f64).sqrt();
    let quad = if shifted {
        let g = |u: f64, v: f64| (hand.log_integrand(&labels, &flags, &[u, v]) - peak).exp();
        let w = 20.0 * s;
        simpson_2d(&g, (c[0] - w, c[0] + w), (c[1] - 2.0 * w, c[1] + 2.0 * w), 800)
    } else {
        let g = |u: f64| (hand.log_integrand(&labels, &flags, &[u]) - peak).exp();
        simpson_adaptive(&g, c[0] - 40.0 * s, c[0] + 40.0 * s, 1e-12)
    };
    (lap, quad.ln() + peak, c.len())
}

/// Engine and hand-oracle local fdrs on a two-vertex edge.
pub fn two_vertex_case(seed: u64) -> (Vec<f64>, Vec<f64>) {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2000 + seed);
    let (mx, my) = (rng.random_range(3..12), rng.random_range(3..12));
    let shift: f64 = rng.random_range(0.0..1.5);
    let x = gaussian_matrix(2, mx, &[0.0, 0.2], 1.0, &mut rng);
    let y = gaussian_matrix(2, my, &[shift, 0.2], 1.0, &mut rng);
    let data = DataMatrices::new(x, y).unwrap();
    let mut h = hyper_with(2, rng.random_range(3.5..8.0), rng.random_range(0.2..0.9));
    h.mu0 = rng.random_range(-0.5..0.5);
    h.tau2 = rng.random_range(0.5..2.0);
    h.sigma2 = rng.random_range(0.3..2.0);
    let off = rng.random_range(-0.4..0.4);
    h.a[(0, 1)] = off;
    h.a[(1, 0)] = off;
    h.b[(0, 0)] = 1.5;
    let g = Graph::path(2);
    let post = graphmm::posterior_over_states(&data, &g, &h).unwrap();
    let engine = (0..2).map(|v| post.null_probability(v)).collect();
    (engine, HandPatch::new(&data, &h).lfdr(&g))
}
