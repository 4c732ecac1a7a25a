//! Damped Newton iteration on the Fourier coefficients of `F(u) = u - K u - p_hat`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::operator::{self, analytic_jacobian, field_sup_along, fixed_point_map, p_hat};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg::{self, inf_norm, sign};
use crate::system::DelaySystem;
use crate::trig::{collocation_size, TrigPoly};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Bound on the max-norm of the final coefficient update.
    pub tol_newton: f64,
    /// Fixed defect tolerance; `None` uses `1e-8 (1 + |g|)` along the iterate.
    pub tol_res: Option<f64>,
    /// Maximum number of step halvings per iteration.
    pub max_halvings: usize,
    /// Relative forward-difference step on the coefficients.
    pub fd_step: f64,
    /// Use the field's analytic Jacobians when it provides them.
    pub analytic_jacobian: bool,
    /// Linear solves with a larger condition number are refused.
    pub condition_limit: f64,
    /// Upper bound for the near-equilibrium radius.
    pub rho: Option<f64>,
    /// Seed for the random perturbation starts.
    pub seed: u64,
    pub exec: Execution,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol_newton: 1e-10,
            tol_res: None,
            max_halvings: 12,
            fd_step: 1e-6,
            analytic_jacobian: true,
            condition_limit: 1e14,
            rho: None,
            seed: 0,
            exec: Execution::Parallel,
        }
    }
}

impl SolverOptions {
    /// Defect tolerance for a candidate `u`.
    pub fn tol_res_for(&self, sys: &DelaySystem, u: &TrigPoly) -> f64 {
        self.tol_res
            .unwrap_or_else(|| 1e-8 * (1.0 + field_sup_along(sys, u)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub u: TrigPoly,
    /// `max_t |u' - g(u, u_tau) - p|` on the fine grid.
    pub residual_inf: f64,
    /// `max |coefficient|` of `u - K u - p_hat`.
    pub coeff_residual: f64,
    /// Sign of the determinant of the Newton Jacobian at `u`.
    pub local_sign: i8,
    pub near_equilibrium: bool,
    /// `max_t |u(t) - e|` on the fine grid.
    pub distance_to_equilibrium: f64,
    pub iterations: usize,
    pub floquet: Option<Vec<Complex64>>,
}

/// Jacobian of `F` at `u`: analytic when the field supplies Jacobians,
/// forward differences otherwise.
pub fn jacobian(
    sys: &DelaySystem,
    u: &TrigPoly,
    f0: &TrigPoly,
    p_hat: &TrigPoly,
    opts: &SolverOptions,
) -> Result<DMatrix<f64>> {
    if opts.analytic_jacobian {
        if let Some(j) = analytic_jacobian(sys, u)? {
            return Ok(j);
        }
    }
    let h = opts.fd_step * (1.0 + u.coeff_sup());
    let n = u.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut up = u.clone();
    for col in 0..n {
        let saved = up.coeffs()[col];
        up.coeffs_mut()[col] = saved + h;
        let f1 = fixed_point_map(sys, &up, p_hat)?;
        up.coeffs_mut()[col] = saved;
        for (row, (a, b)) in f1.coeffs().iter().zip(f0.coeffs()).enumerate() {
            jac[(row, col)] = (a - b) / h;
        }
    }
    Ok(jac)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `F(u) = 0` from `start`, raised or truncated to `degree`.
///
/// Each step solves `J d = -F` and backtracks by halving until `|F|_2`
/// decreases. Converged when the accepted update is below `tol_newton`
/// and the time-domain defect is below the residual tolerance.
pub fn newton_solve(
    sys: &DelaySystem,
    start: &TrigPoly,
    degree: usize,
    opts: &SolverOptions,
) -> Result<SolutionRecord> {
    if start.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: start.dim(),
        });
    }
    if (start.period() - sys.period()).abs() > 1e-12 * sys.period() {
        return Err(Error::InvalidParameter(format!(
            "start period {} differs from the system period {}",
            start.period(),
            sys.period()
        )));
    }
    let ph = p_hat(sys, degree);
    let mut u = start.with_degree(degree);
    let mut f = fixed_point_map(sys, &u, &ph)?;
    let mut f_norm = l2(f.coeffs());
    for iter in 1..=opts.max_iter {
        let jac = jacobian(sys, &u, &f, &ph, opts)?;
        let condition = linalg::condition_number(&jac);
        if !(condition <= opts.condition_limit) {
            return Err(Error::SingularJacobian { condition });
        }
        let rhs = -DVector::from_column_slice(f.coeffs());
        let step = jac
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularJacobian { condition })?;
        let step = TrigPoly::from_coeffs(u.dim(), u.period(), degree, step.as_slice().to_vec())?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = u.axpy(scale, &step);
            if let Ok(ft) = fixed_point_map(sys, &trial, &ph) {
                let nt = l2(ft.coeffs());
                if nt < f_norm {
                    accepted = Some((trial, ft, nt));
                    break;
                }
            }
            scale *= 0.5;
        }
        let update = scale * step.coeff_sup();
        match accepted {
            Some((trial, ft, nt)) => {
                u = trial;
                f = ft;
                f_norm = nt;
            }
            None => {
                // No decrease possible: either converged to rounding level
                // or stuck.
                return finish(sys, u, &f, iter, opts, step.coeff_sup() < opts.tol_newton);
            }
        }
        if update < opts.tol_newton {
            return finish(sys, u, &f, iter, opts, true);
        }
    }
    let residual = operator::time_defect(sys, &u, operator::fine_grid_size(degree))?;
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn finish(
    sys: &DelaySystem,
    u: TrigPoly,
    f: &TrigPoly,
    iterations: usize,
    opts: &SolverOptions,
    step_small: bool,
) -> Result<SolutionRecord> {
    let degree = u.degree();
    let residual_inf = operator::time_defect(sys, &u, operator::fine_grid_size(degree))?;
    if !step_small || residual_inf > opts.tol_res_for(sys, &u) {
        return Err(Error::NoConvergence {
            iterations,
            residual: residual_inf,
        });
    }
    let ph = p_hat(sys, degree);
    let jac = jacobian(sys, &u, f, &ph, opts)?;
    let local_sign = sign(linalg::det(&jac));
    if local_sign == 0 {
        return Err(Error::SingularJacobian {
            condition: f64::INFINITY,
        });
    }
    let e = TrigPoly::constant(sys.equilibrium(), u.period(), degree);
    let distance_to_equilibrium = u.distance_on_grid(&e, operator::fine_grid_size(degree));
    Ok(SolutionRecord {
        coeff_residual: inf_norm(f.coeffs()),
        u,
        residual_inf,
        local_sign,
        near_equilibrium: false,
        distance_to_equilibrium,
        iterations,
        floquet: None,
    })
}

/// Estimate of the truncation tail of `N u`: the sum over harmonics
/// `K+1..=2K` of `max_i (|a_k,i| + |b_k,i|)` of its degree-`2K` projection.
pub fn truncation_tail(sys: &DelaySystem, u: &TrigPoly) -> Result<f64> {
    let k = u.degree();
    let wide = operator::nemitskii(sys, &u.with_degree(2 * k), 2 * k)?;
    debug_assert!(collocation_size(2 * k) >= 4 * k + 2);
    Ok((k + 1..=2 * k)
        .map(|j| {
            wide.cos_coeff(j)
                .iter()
                .zip(wide.sin_coeff(j))
                .fold(0.0_f64, |acc, (a, b)| acc.max(a.abs() + b.abs()))
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{FnField, LinearField};
    use std::f64::consts::PI;
    use std::sync::Arc;

    const TWO_PI: f64 = 2.0 * PI;

    fn forced_decay() -> DelaySystem {
        let mut p = TrigPoly::zeros(1, TWO_PI, 1);
        p.cos_coeff_mut(1)[0] = 1.0;
        DelaySystem::new(
            Arc::new(LinearField::new(
                DMatrix::from_element(1, 1, -1.0),
                DMatrix::zeros(1, 1),
            )),
            0.0,
            TWO_PI,
            Some(p),
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn forced_decay_from_zero() {
        let sys = forced_decay();
        let r = newton_solve(&sys, &TrigPoly::zeros(1, TWO_PI, 0), 8, &SolverOptions::default()).unwrap();
        assert!((r.u.cos_coeff(1)[0] - 0.5).abs() < 1e-12);
        assert!((r.u.sin_coeff(1)[0] - 0.5).abs() < 1e-12);
        assert!(r.residual_inf < 1e-10);
        assert_eq!(r.local_sign, -1);
    }

    #[test]
    fn exact_start_converges_immediately() {
        let sys = forced_decay();
        let mut u = TrigPoly::zeros(1, TWO_PI, 8);
        u.cos_coeff_mut(1)[0] = 0.5;
        u.sin_coeff_mut(1)[0] = 0.5;
        let r = newton_solve(&sys, &u, 8, &SolverOptions::default()).unwrap();
        assert!(r.iterations <= 1);
    }

    #[test]
    fn resonant_linear_system_is_singular() {
        let sys = DelaySystem::new(
            Arc::new(LinearField::new(DMatrix::zeros(1, 1), DMatrix::from_element(1, 1, -1.0))),
            PI / 2.0,
            TWO_PI,
            None,
            vec![0.0],
        )
        .unwrap();
        let err = newton_solve(&sys, &TrigPoly::zeros(1, TWO_PI, 0), 8, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }), "{err:?}");
    }

    #[test]
    fn finite_difference_jacobian_on_nonlinear_field() {
        // u' = -u + u_tau^2 / 4 + cos t: small forced branch near 0
        let field = Arc::new(FnField::new(1, |x: &[f64], y: &[f64], o: &mut [f64]| {
            o[0] = -x[0] + 0.25 * y[0] * y[0]
        }));
        let mut p = TrigPoly::zeros(1, TWO_PI, 1);
        p.cos_coeff_mut(1)[0] = 0.2;
        let sys = DelaySystem::new(field, 0.3, TWO_PI, Some(p), vec![0.0]).unwrap();
        let opts = SolverOptions::default();
        let r = newton_solve(&sys, &TrigPoly::zeros(1, TWO_PI, 0), 10, &opts).unwrap();
        assert!(r.residual_inf < 1e-8, "{}", r.residual_inf);
        assert_eq!(r.local_sign, -1);
        let tail = truncation_tail(&sys, &r.u).unwrap();
        assert!(r.residual_inf <= 10.0 * r.coeff_residual + tail + 1e-14);
    }
}
