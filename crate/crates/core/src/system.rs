//! Problem instances `u'(t) = g(u(t), u(t - tau)) + p(t)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linan::LinearPair;
use crate::linalg;
use crate::trig::TrigPoly;

/// Right-hand side `g(x, y)` of an autonomous delay system, `x` the current
/// state and `y` the delayed one.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `g(x, y)` into `out`. Returns `false` when `(x, y)` lies outside
    /// the set on which `g` is defined (a pole, for instance).
    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> bool;

    /// Analytic `(D_x g, D_y g)`; fields without one fall back to finite
    /// differences.
    fn jacobians(&self, _x: &[f64], _y: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        None
    }
}

/// `g(x, y) = A x + B y`.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearField {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        assert_eq!(a.shape(), b.shape());
        assert!(a.is_square());
        Self { a, b }
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        let n = self.dim();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.a[(i, j)] * x[j] + self.b[(i, j)] * y[j];
            }
            out[i] = s;
        }
        true
    }

    fn jacobians(&self, _x: &[f64], _y: &[f64]) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
        Some((self.a.clone(), self.b.clone()))
    }
}

/// Field backed by a closure, defined everywhere.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        (self.f)(x, y, out);
        out.iter().all(|v| v.is_finite())
    }
}

/// Tolerance on `|g(e, e)|`.
pub const EQUILIBRIUM_TOL: f64 = 1e-9;

const FD_STEP: f64 = 1e-6;

/// A forced delay system with a designated equilibrium and its linearisation.
#[derive(Clone)]
pub struct DelaySystem {
    field: Arc<dyn VectorField>,
    forcing: TrigPoly,
    equilibrium: Vec<f64>,
    linear: LinearPair,
}

impl fmt::Debug for DelaySystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelaySystem")
            .field("dim", &self.dim())
            .field("tau", &self.tau())
            .field("period", &self.period())
            .field("equilibrium", &self.equilibrium)
            .finish_non_exhaustive()
    }
}

impl DelaySystem {
    /// Builds a system. `forcing = None` means `p = 0`. Jacobians at the
    /// equilibrium come from the field when available, otherwise from
    /// central differences.
    pub fn new(
        field: Arc<dyn VectorField>,
        tau: f64,
        period: f64,
        forcing: Option<TrigPoly>,
        equilibrium: Vec<f64>,
    ) -> Result<Self> {
        let (a, b) = match field.jacobians(&equilibrium, &equilibrium) {
            Some(j) => j,
            None => finite_difference_jacobians(field.as_ref(), &equilibrium)?,
        };
        Self::with_jacobians(field, tau, period, forcing, equilibrium, a, b)
    }

    pub fn with_jacobians(
        field: Arc<dyn VectorField>,
        tau: f64,
        period: f64,
        forcing: Option<TrigPoly>,
        equilibrium: Vec<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
    ) -> Result<Self> {
        let n = field.dim();
        if equilibrium.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: equilibrium.len(),
            });
        }
        let mut ge = vec![0.0; n];
        if !field.eval(&equilibrium, &equilibrium, &mut ge) {
            return Err(Error::InvalidParameter(
                "field is undefined at the equilibrium".into(),
            ));
        }
        let residual = linalg::inf_norm(&ge);
        if residual > EQUILIBRIUM_TOL {
            return Err(Error::NotAnEquilibrium { residual });
        }
        let forcing = match forcing {
            Some(p) => {
                if p.dim() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: p.dim(),
                    });
                }
                if (p.period() - period).abs() > 1e-12 * period {
                    return Err(Error::InvalidParameter(format!(
                        "forcing period {} differs from the system period {period}",
                        p.period()
                    )));
                }
                p
            }
            None => TrigPoly::zeros(n, period, 0),
        };
        let linear = LinearPair::new(a, b, tau, period)?;
        if linear.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: linear.dim(),
            });
        }
        Ok(Self {
            field,
            forcing,
            equilibrium,
            linear,
        })
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }
    pub fn tau(&self) -> f64 {
        self.linear.tau()
    }
    pub fn period(&self) -> f64 {
        self.linear.period()
    }
    pub fn forcing(&self) -> &TrigPoly {
        &self.forcing
    }
    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }
    pub fn field(&self) -> &dyn VectorField {
        self.field.as_ref()
    }
    pub fn linearisation(&self) -> &LinearPair {
        &self.linear
    }

    /// Same system with a different forcing.
    pub fn with_forcing(&self, forcing: Option<TrigPoly>) -> Result<Self> {
        Self::with_jacobians(
            self.field.clone(),
            self.tau(),
            self.period(),
            forcing,
            self.equilibrium.clone(),
            self.linear.a().clone(),
            self.linear.b().clone(),
        )
    }

    /// Same system with a different delay.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::with_jacobians(
            self.field.clone(),
            tau,
            self.period(),
            Some(self.forcing.clone()),
            self.equilibrium.clone(),
            self.linear.a().clone(),
            self.linear.b().clone(),
        )
    }

    /// `g(x, y)`, or `None` outside its domain of definition.
    pub fn g(&self, x: &[f64], y: &[f64]) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.field.eval(x, y, &mut out).then_some(out)
    }

    /// `g(x, y) + p(t)` into `out`.
    pub fn rhs(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) -> bool {
        if !self.field.eval(x, y, out) {
            return false;
        }
        if self.forcing.degree() > 0 || self.forcing.a0().iter().any(|&v| v != 0.0) {
            let p = self.forcing.evaluate(t);
            for (o, pi) in out.iter_mut().zip(p) {
                *o += pi;
            }
        }
        true
    }

    /// `sup_t |p(t)|` sampled on a fine grid.
    pub fn forcing_sup(&self) -> f64 {
        self.forcing
            .sup_norm_on_grid(16 * (self.forcing.degree() + 1))
    }

    /// Jacobians of `g` at `(x, y)`, analytic when available.
    pub fn jacobians_at(&self, x: &[f64], y: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match self.field.jacobians(x, y) {
            Some(j) => Ok(j),
            None => finite_difference_jacobians_at(self.field.as_ref(), x, y),
        }
    }
}

/// Central-difference `(D_x g, D_y g)` at `(e, e)`.
pub fn finite_difference_jacobians(
    field: &dyn VectorField,
    e: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    finite_difference_jacobians_at(field, e, e)
}

fn finite_difference_jacobians_at(
    field: &dyn VectorField,
    x: &[f64],
    y: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = field.dim();
    let mut jx = DMatrix::zeros(n, n);
    let mut jy = DMatrix::zeros(n, n);
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for (which, jac) in [(0usize, &mut jx), (1usize, &mut jy)] {
        for j in 0..n {
            let base = if which == 0 { x } else { y };
            let h = FD_STEP * (1.0 + base[j].abs());
            let mut xp = x.to_vec();
            let mut yp = y.to_vec();
            let mut xm = x.to_vec();
            let mut ym = y.to_vec();
            if which == 0 {
                xp[j] += h;
                xm[j] -= h;
            } else {
                yp[j] += h;
                ym[j] -= h;
            }
            if !field.eval(&xp, &yp, &mut plus) || !field.eval(&xm, &ym, &mut minus) {
                return Err(Error::InvalidParameter(
                    "field undefined in the finite-difference stencil".into(),
                ));
            }
            for i in 0..n {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }
    Ok((jx, jy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fd_jacobians_match_linear_field() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.25]);
        let field = LinearField::new(a.clone(), b.clone());
        let (ja, jb) = finite_difference_jacobians(&field, &[0.0, 0.0]).unwrap();
        assert!((ja - a).norm() < 1e-8);
        assert!((jb - b).norm() < 1e-8);
    }

    #[test]
    fn rejects_non_equilibrium() {
        let field = Arc::new(FnField::new(1, |x: &[f64], _y: &[f64], o: &mut [f64]| {
            o[0] = 1.0 - x[0]
        }));
        let err = DelaySystem::new(field, 0.0, 1.0, None, vec![0.0]).unwrap_err();
        assert!(matches!(err, Error::NotAnEquilibrium { .. }));
    }

    #[test]
    fn rejects_forcing_with_wrong_period() {
        let field = Arc::new(LinearField::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::zeros(1, 1),
        ));
        let p = TrigPoly::zeros(1, 2.0, 1);
        assert!(DelaySystem::new(field, 0.0, 1.0, Some(p), vec![0.0]).is_err());
    }
}
