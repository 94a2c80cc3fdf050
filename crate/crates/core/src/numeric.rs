//! Small numerical helpers shared across modules.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log(sum(exp(xs)))`, stable for large magnitudes. Returns `-inf` for an
/// empty slice or when every term is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + s.ln()
}

/// Sum that does not depend on the order of its inputs: values are sorted
/// before accumulation, so any permutation produces a bit-identical result.
pub fn order_free_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Log density of `N(mean, var)` at `x`.
pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Log determinant of a symmetric positive-definite matrix via Cholesky.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("matrix is not positive definite"))?;
    let l = chol.l_dirty();
    let mut s = 0.0;
    for i in 0..l.nrows() {
        s += l[(i, i)].ln();
    }
    Ok(2.0 * s)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0f64.max(m[(i, j)].abs()).max(m[(j, i)].abs());
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// Format a value with eight significant digits. Plain decimal notation is
/// used unless the magnitude is very small.
pub fn fmt_sig8(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NA".to_string()
        } else {
            format!("{x}")
        };
    }
    if x == 0.0 {
        return "0.0000000".to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if mag < -4 {
        format!("{:.7e}", x)
    } else {
        let decimals = (7 - mag).max(0) as usize;
        format!("{:.*}", decimals, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(
            log_sum_exp(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            f64::NEG_INFINITY
        );
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        let v = log_sum_exp(&[700.0, 0.0]);
        assert!((v - 700.0).abs() < 1e-12);
    }

    #[test]
    fn order_free_sum_is_permutation_invariant() {
        let mut a = vec![1e16, 1.0, -1e16, 3.5, 1e-3];
        let mut b = vec![3.5, -1e16, 1e-3, 1.0, 1e16];
        assert_eq!(order_free_sum(&mut a).to_bits(), order_free_sum(&mut b).to_bits());
    }

    #[test]
    fn sig8_formatting() {
        assert_eq!(fmt_sig8(0.5), "0.50000000");
        assert_eq!(fmt_sig8(1.0), "1.0000000");
        assert_eq!(fmt_sig8(0.012345678), "0.012345678");
        assert_eq!(fmt_sig8(1.5e-9), "1.5000000e-9");
        assert_eq!(fmt_sig8(f64::NAN), "NA");
    }

    #[test]
    fn log_det_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(log_det_spd(&m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!((log_det_spd(&m).unwrap() - 3f64.ln()).abs() < 1e-14);
    }
}
