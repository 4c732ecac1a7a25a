//! The fixed-point operator `K` on truncated Fourier series.
//!
//! For a `T`-periodic `u`,
//!
//! ```text
//! K u(t) = mean(u) - t mean(N u) + I N u(t) - mean(I N u),   N u(t) = g(u(t), u(t - tau))
//! ```
//!
//! and `u - K u = p_hat` with `p_hat = I p - mean(I p) - t mean(p)` holds iff
//! `u` is a `T`-periodic solution of `u' = g(u, u_tau) + p`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::inf_norm;
use crate::system::DelaySystem;
use crate::trig::{collocation_size, project, TrigPoly};

/// Maximum tolerated imbalance between the linear parts of `I N u` and
/// `t mean(N u)`.
const LINEAR_CANCEL_TOL: f64 = 1e-10;

fn check_shape(sys: &DelaySystem, u: &TrigPoly) -> Result<()> {
    if u.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: u.dim(),
        });
    }
    if (u.period() - sys.period()).abs() > 1e-12 * sys.period() {
        return Err(Error::InvalidParameter(format!(
            "polynomial period {} differs from the system period {}",
            u.period(),
            sys.period()
        )));
    }
    Ok(())
}

/// Grid values of `u` and of `u(. - tau)` on an `m`-point grid.
fn grid_pair(sys: &DelaySystem, u: &TrigPoly, m: usize) -> (Vec<f64>, Vec<f64>) {
    (u.sample_grid(m), u.delay_shift(sys.tau()).sample_grid(m))
}

/// Degree-`degree` projection of `t -> g(u(t), u(t - tau))`.
pub fn nemitskii(sys: &DelaySystem, u: &TrigPoly, degree: usize) -> Result<TrigPoly> {
    check_shape(sys, u)?;
    let n = sys.dim();
    let m = collocation_size(degree.max(u.degree()));
    let (xs, ys) = grid_pair(sys, u, m);
    let mut out = vec![0.0; m * n];
    for j in 0..m {
        let r = j * n..(j + 1) * n;
        if !sys.field().eval(&xs[r.clone()], &ys[r.clone()], &mut out[r]) {
            return Err(Error::DomainEscape {
                t: sys.period() * j as f64 / m as f64,
            });
        }
    }
    project(&out, n, sys.period(), degree)
}

/// `mean - t mean(n) + I n(t) - mean(I n)` for a given image `n = N u`.
pub(crate) fn k_from_image(mean: &[f64], image: &TrigPoly) -> TrigPoly {
    let (integral, image_mean) = image.antiderivative_and_mean();
    let residual_slope = integral
        .slope
        .iter()
        .zip(&image_mean)
        .map(|(s, m)| s - m)
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    assert!(
        residual_slope <= LINEAR_CANCEL_TOL,
        "linear parts of K u failed to cancel ({residual_slope:e})"
    );
    let shift = integral.mean();
    let mut ku = integral.periodic;
    for ((c, m), s) in ku.a0_mut().iter_mut().zip(mean).zip(&shift) {
        *c += m - s;
    }
    ku
}

/// `K u`, truncated to `degree`.
pub fn apply_k(sys: &DelaySystem, u: &TrigPoly, degree: usize) -> Result<TrigPoly> {
    let image = nemitskii(sys, u, degree)?;
    Ok(k_from_image(u.a0(), &image))
}

/// `p_hat = I p - mean(I p) - t mean(p)`, truncated to `degree`.
pub fn p_hat(sys: &DelaySystem, degree: usize) -> TrigPoly {
    let p = sys.forcing().with_degree(degree);
    let (integral, _) = p.antiderivative_and_mean();
    let shift = integral.mean();
    let mut out = integral.periodic;
    for (c, s) in out.a0_mut().iter_mut().zip(&shift) {
        *c -= s;
    }
    out
}

/// The gain `|p_hat|_inf / |p|_inf` on a fine grid (`0` for `p = 0`).
pub fn p_hat_gain(sys: &DelaySystem, degree: usize) -> f64 {
    let m = 16 * (degree.max(sys.forcing().degree()) + 1);
    let p = sys.forcing().sup_norm_on_grid(m);
    if p == 0.0 {
        0.0
    } else {
        p_hat(sys, degree).sup_norm_on_grid(m) / p
    }
}

/// `F(u) = u - K u - p_hat`.
pub fn fixed_point_map(sys: &DelaySystem, u: &TrigPoly, p_hat: &TrigPoly) -> Result<TrigPoly> {
    let ku = apply_k(sys, u, u.degree())?;
    let mut f = u.axpy(-1.0, &ku);
    for (x, p) in f.coeffs_mut().iter_mut().zip(p_hat.coeffs()) {
        *x -= p;
    }
    Ok(f)
}

/// Both residual measures of a candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// `u - K u - p_hat`.
    pub map: TrigPoly,
    /// `max |coefficient|` of `map`.
    pub coeff_norm: f64,
    /// `max_t |u'(t) - g(u(t), u(t - tau)) - p(t)|` on the fine grid.
    pub defect: f64,
}

/// Fine grid used for time-domain defects: four times the collocation grid.
pub fn fine_grid_size(degree: usize) -> usize {
    4 * collocation_size(degree)
}

pub fn residual(sys: &DelaySystem, u: &TrigPoly) -> Result<Residual> {
    let ph = p_hat(sys, u.degree());
    let map = fixed_point_map(sys, u, &ph)?;
    let defect = time_defect(sys, u, fine_grid_size(u.degree()))?;
    Ok(Residual {
        coeff_norm: inf_norm(map.coeffs()),
        map,
        defect,
    })
}

/// `max |u' - g(u, u_tau) - p|` over an `m`-point grid.
pub fn time_defect(sys: &DelaySystem, u: &TrigPoly, m: usize) -> Result<f64> {
    check_shape(sys, u)?;
    let n = sys.dim();
    let (xs, ys) = grid_pair(sys, u, m);
    let du = u.derivative().sample_grid(m);
    let ps = sys.forcing().sample_grid(m);
    let mut g = vec![0.0; n];
    let mut worst = 0.0_f64;
    for j in 0..m {
        let r = j * n..(j + 1) * n;
        if !sys.field().eval(&xs[r.clone()], &ys[r.clone()], &mut g) {
            return Err(Error::DomainEscape {
                t: sys.period() * j as f64 / m as f64,
            });
        }
        for i in 0..n {
            worst = worst.max((du[j * n + i] - g[i] - ps[j * n + i]).abs());
        }
    }
    Ok(worst)
}

/// Sup of `|g(u(t), u(t - tau))|` on the collocation grid.
pub(crate) fn field_sup_along(sys: &DelaySystem, u: &TrigPoly) -> f64 {
    let n = sys.dim();
    let m = collocation_size(u.degree());
    let (xs, ys) = grid_pair(sys, u, m);
    let mut g = vec![0.0; n];
    let mut worst = 0.0_f64;
    for j in 0..m {
        let r = j * n..(j + 1) * n;
        if sys.field().eval(&xs[r.clone()], &ys[r], &mut g) {
            worst = worst.max(inf_norm(&g));
        }
    }
    worst
}

/// Jacobian of `F` from pointwise field Jacobians along `u`.
///
/// Column `j` is `e_j - K'(e_j)`, where `K'` replaces `N` by its
/// linearisation `v -> D_x g v + D_y g v(. - tau)` sampled on the
/// collocation grid. Returns `None` when the field has no analytic
/// Jacobian.
pub(crate) fn analytic_jacobian(sys: &DelaySystem, u: &TrigPoly) -> Result<Option<DMatrix<f64>>> {
    let n = sys.dim();
    let degree = u.degree();
    let m = collocation_size(degree);
    let (xs, ys) = grid_pair(sys, u, m);
    let mut jx = Vec::with_capacity(m);
    let mut jy = Vec::with_capacity(m);
    for j in 0..m {
        let r = j * n..(j + 1) * n;
        match sys.field().jacobians(&xs[r.clone()], &ys[r]) {
            Some((a, b)) => {
                jx.push(a);
                jy.push(b);
            }
            None => return Ok(None),
        }
    }
    let dim = u.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut basis = TrigPoly::zeros(n, u.period(), degree);
    let mut image = vec![0.0; m * n];
    for col in 0..dim {
        basis.coeffs_mut().fill(0.0);
        basis.coeffs_mut()[col] = 1.0;
        let (vx, vy) = grid_pair(sys, &basis, m);
        for j in 0..m {
            for i in 0..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += jx[j][(i, l)] * vx[j * n + l] + jy[j][(i, l)] * vy[j * n + l];
                }
                image[j * n + i] = s;
            }
        }
        let dn = project(&image, n, u.period(), degree)?;
        let dk = k_from_image(basis.a0(), &dn);
        for row in 0..dim {
            jac[(row, col)] = basis.coeffs()[row] - dk.coeffs()[row];
        }
    }
    Ok(Some(jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linan::{block_pair, LinearPair};
    use crate::system::{FnField, LinearField};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    const TWO_PI: f64 = 2.0 * PI;

    fn linear_sys(a: DMatrix<f64>, b: DMatrix<f64>, tau: f64, period: f64, p: Option<TrigPoly>) -> DelaySystem {
        let n = a.nrows();
        DelaySystem::new(Arc::new(LinearField::new(a, b)), tau, period, p, vec![0.0; n]).unwrap()
    }

    fn scalar(a: f64, b: f64, tau: f64, period: f64, p: Option<TrigPoly>) -> DelaySystem {
        linear_sys(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            tau,
            period,
            p,
        )
    }

    fn cos1(period: f64, degree: usize) -> TrigPoly {
        let mut p = TrigPoly::zeros(1, period, degree);
        p.cos_coeff_mut(1)[0] = 1.0;
        p
    }

    fn random_poly(dim: usize, period: f64, degree: usize, seed: u64) -> TrigPoly {
        let mut u = TrigPoly::zeros(dim, period, degree);
        for (i, c) in u.coeffs_mut().iter_mut().enumerate() {
            *c = ((seed as f64 + 1.0) * 12.9898 + i as f64 * 78.233).sin() * 0.9;
        }
        u
    }

    #[test]
    fn nemitskii_at_equilibrium_vanishes() {
        let field = Arc::new(FnField::new(2, |x: &[f64], y: &[f64], o: &mut [f64]| {
            o[0] = -x[0] + y[1] * y[1];
            o[1] = x[0] * y[0] - x[1];
        }));
        let sys = DelaySystem::new(field, 0.4, 3.0, None, vec![0.0, 0.0]).unwrap();
        let u = TrigPoly::zeros(2, 3.0, 4);
        assert!(nemitskii(&sys, &u, 4).unwrap().coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn nemitskii_square_of_cosine() {
        // oracle: cos^2 t = 1/2 + cos(2t)/2
        let field = Arc::new(FnField::new(1, |_x: &[f64], y: &[f64], o: &mut [f64]| o[0] = y[0] * y[0]));
        let sys = DelaySystem::new(field, 0.0, TWO_PI, None, vec![0.0]).unwrap();
        let nu = nemitskii(&sys, &cos1(TWO_PI, 2), 2).unwrap();
        assert_abs_diff_eq!(nu.a0()[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(nu.cos_coeff(2)[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(nu.cos_coeff(1)[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn nemitskii_linear_matches_blocks() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.4, 0.3, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.2, -0.7, 1.1, 0.0]);
        let (tau, period) = (0.8, 2.7);
        let sys = linear_sys(a.clone(), b.clone(), tau, period, None);
        let lp = LinearPair::new(a, b, tau, period).unwrap();
        let u = random_poly(2, period, 5, 3);
        let nu = nemitskii(&sys, &u, 5).unwrap();
        // cos coefficient = X a - s B b, sin coefficient = s B a + X b
        for k in 1..=5 {
            let bp = block_pair(&lp, k);
            let s = (lp.tau() * crate::linan::lambda_k(k, period)).sin();
            let ak = nalgebra::DVector::from_column_slice(u.cos_coeff(k));
            let bk = nalgebra::DVector::from_column_slice(u.sin_coeff(k));
            let c = &bp.x * &ak - lp.b() * &bk * s;
            let d = lp.b() * &ak * s + &bp.x * &bk;
            for i in 0..2 {
                assert_abs_diff_eq!(nu.cos_coeff(k)[i], c[i], epsilon = 1e-12);
                assert_abs_diff_eq!(nu.sin_coeff(k)[i], d[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn k_fixes_the_equilibrium() {
        let sys = scalar(-2.0, 0.5, 0.3, 1.5, None);
        let e = TrigPoly::zeros(1, 1.5, 3);
        assert_eq!(apply_k(&sys, &e, 3).unwrap(), e);
    }

    #[test]
    fn linear_k_matches_block_matrices() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.4, 0.3, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.2, -0.7, 1.1, 0.0]);
        let (tau, period) = (0.8, 2.7);
        let sys = linear_sys(a.clone(), b.clone(), tau, period, None);
        let lp = LinearPair::new(a.clone(), b.clone(), tau, period).unwrap();
        for seed in 0..5 {
            let u = random_poly(2, period, 6, seed);
            let f = u.axpy(-1.0, &apply_k(&sys, &u, 6).unwrap());
            let m0 = (&a + &b) * (period / 2.0);
            let a0 = &m0 * nalgebra::DVector::from_column_slice(u.a0());
            for i in 0..2 {
                assert_abs_diff_eq!(f.a0()[i], a0[i], epsilon = 1e-10);
            }
            for k in 1..=6 {
                let mk = block_pair(&lp, k).mk.unwrap();
                let mut ab = u.cos_coeff(k).to_vec();
                ab.extend_from_slice(u.sin_coeff(k));
                let out = mk * nalgebra::DVector::from_vec(ab);
                for i in 0..2 {
                    assert_abs_diff_eq!(f.cos_coeff(k)[i], out[i], epsilon = 1e-10);
                    assert_abs_diff_eq!(f.sin_coeff(k)[i], out[2 + i], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn scalar_damped_first_harmonic() {
        let sys = scalar(-1.0, 0.0, 0.0, TWO_PI, None);
        let u = cos1(TWO_PI, 1);
        let f = u.axpy(-1.0, &apply_k(&sys, &u, 1).unwrap());
        // (1/l)[[Y, X], [-X, Y]] (1, 0) with X = -1, Y = 1
        assert_abs_diff_eq!(f.cos_coeff(1)[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.sin_coeff(1)[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn p_hat_examples() {
        let zero = scalar(-1.0, 0.0, 0.0, TWO_PI, None);
        assert!(p_hat(&zero, 3).coeffs().iter().all(|&c| c == 0.0));

        let c = TrigPoly::constant(&[2.0], 3.0, 0);
        let sys = scalar(-1.0, 0.0, 0.0, 3.0, Some(c));
        let ph = p_hat(&sys, 2);
        assert_abs_diff_eq!(ph.a0()[0], -2.0 * 3.0 / 2.0, epsilon = 1e-14);
        assert!(ph.coeffs()[1..].iter().all(|&v| v == 0.0));

        let sys = scalar(-1.0, 0.0, 0.0, TWO_PI, Some(cos1(TWO_PI, 1)));
        let ph = p_hat(&sys, 3);
        assert_abs_diff_eq!(ph.sin_coeff(1)[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ph.a0()[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ph.cos_coeff(1)[0], 0.0, epsilon = 1e-14);
        assert!(p_hat_gain(&sys, 3) > 0.0);
    }

    #[test]
    fn residual_examples() {
        // u' = -u + cos t has u* = (cos t + sin t)/2: a = b = 1/2 solves
        // -a + b = 1 - ... i.e. b = -a + 1 and -a = -b.
        let sys = scalar(-1.0, 0.0, 0.0, TWO_PI, Some(cos1(TWO_PI, 1)));
        let mut u = TrigPoly::zeros(1, TWO_PI, 2);
        u.cos_coeff_mut(1)[0] = 0.5;
        u.sin_coeff_mut(1)[0] = 0.5;
        let r = residual(&sys, &u).unwrap();
        assert!(r.coeff_norm < 1e-10 && r.defect < 1e-10);

        let free = scalar(-1.0, 0.0, 0.0, TWO_PI, None);
        let e = TrigPoly::zeros(1, TWO_PI, 2);
        let r = residual(&free, &e).unwrap();
        assert_eq!(r.coeff_norm, 0.0);
        assert_eq!(r.defect, 0.0);

        let r = residual(&sys, &e).unwrap();
        assert_abs_diff_eq!(r.defect, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.4, 0.3, 0.5]);
        let b = DMatrix::from_row_slice(2, 2, &[0.2, -0.7, 1.1, 0.0]);
        let sys = linear_sys(a, b, 0.8, 2.7, None);
        let u = random_poly(2, 2.7, 3, 7);
        let jac = analytic_jacobian(&sys, &u).unwrap().unwrap();
        let ph = p_hat(&sys, 3);
        let f0 = fixed_point_map(&sys, &u, &ph).unwrap();
        let h = 1e-6;
        for col in 0..u.len() {
            let mut up = u.clone();
            up.coeffs_mut()[col] += h;
            let f1 = fixed_point_map(&sys, &up, &ph).unwrap();
            for row in 0..u.len() {
                let fd = (f1.coeffs()[row] - f0.coeffs()[row]) / h;
                assert_abs_diff_eq!(jac[(row, col)], fd, epsilon = 1e-6);
            }
        }
    }
}
