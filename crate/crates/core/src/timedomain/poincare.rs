//! The period map on history segments and its linearisation.

use std::cmp::Ordering;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::integrate::{integrate, HistorySegment};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg;
use crate::linan::LinearPair;
use crate::system::{DelaySystem, LinearField};
use crate::trig::TrigPoly;

/// Tolerance for classifying multipliers relative to 1.
pub const TOL_FLOQUET: f64 = 1e-6;

/// Multipliers below this modulus are discretisation artefacts.
pub const SPURIOUS_MODULUS: f64 = 1e-10;

/// Steps per period used when there is no delay to fix the step.
pub const ODE_STEPS: usize = 2048;

/// Default number of history intervals.
pub const DEFAULT_NODES: usize = 128;

/// The step used for period maps: `tau / m`, or `T / ODE_STEPS` without
/// delay.
pub fn period_step(tau: f64, period: f64, m: usize) -> f64 {
    if tau > 0.0 {
        tau / m.max(1) as f64
    } else {
        period / ODE_STEPS as f64
    }
}

/// `P phi = u_T`, the solution segment one period later, on the grid of
/// `phi`.
pub fn poincare_map(sys: &DelaySystem, phi: &HistorySegment) -> Result<HistorySegment> {
    let (tau, period) = (sys.tau(), sys.period());
    if tau > period {
        return Err(Error::DelayExceedsPeriod { tau, period });
    }
    let m = phi.intervals();
    let tr = integrate(sys, phi, period, period_step(tau, period, m))?;
    Ok(tr.segment_at(period, m))
}

fn linear_system(lp: &LinearPair) -> Result<DelaySystem> {
    DelaySystem::with_jacobians(
        Arc::new(LinearField::new(lp.a().clone(), lp.b().clone())),
        lp.tau(),
        lp.period(),
        None,
        vec![0.0; lp.dim()],
        lp.a().clone(),
        lp.b().clone(),
    )
}

/// Matrix of the period map of `u' = A u + B u(t - tau)` on `m`-interval
/// history segments; columns are images of the unit histories.
pub fn monodromy(lp: &LinearPair, m: usize, exec: Execution) -> Result<DMatrix<f64>> {
    let sys = linear_system(lp)?;
    let n = lp.dim();
    let m = if lp.tau() == 0.0 { 0 } else { m.max(1) };
    let size = n * (m + 1);
    let columns = exec::map_indices(exec, size, |j| {
        let mut v = vec![0.0; size];
        v[j] = 1.0;
        let phi = HistorySegment::new(n, lp.tau(), v)?;
        poincare_map(&sys, &phi).map(|p| p.values().to_vec())
    });
    let mut mat = DMatrix::zeros(size, size);
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            mat[(i, j)] = v;
        }
    }
    Ok(mat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetReport {
    /// Multipliers above the spurious threshold, by decreasing modulus.
    pub multipliers: Vec<Complex64>,
    /// Number of real multipliers greater than `1 + tol`.
    pub alpha: usize,
    /// `(-1)^alpha`.
    pub index: i8,
    /// All multipliers strictly inside the unit disk (less `tol`).
    pub stable_hint: bool,
}

fn sort_by_modulus(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(Ordering::Equal)
            .then(b.re.partial_cmp(&a.re).unwrap_or(Ordering::Equal))
            .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
    });
    v
}

/// Classifies the eigenvalues of a period-map matrix.
pub fn classify_multipliers(mat: &DMatrix<f64>) -> Result<FloquetReport> {
    let multipliers: Vec<Complex64> = sort_by_modulus(
        linalg::eigenvalues(mat)
            .into_iter()
            .filter(|z| z.norm() >= SPURIOUS_MODULUS)
            .collect(),
    );
    if let Some(z) = multipliers.iter().find(|z| (*z - 1.0).norm() < TOL_FLOQUET) {
        return Err(Error::ResonantLinearisation {
            multiplier: z.re,
            tol: TOL_FLOQUET,
        });
    }
    let alpha = multipliers
        .iter()
        .filter(|z| z.im.abs() <= TOL_FLOQUET && z.re > 1.0 + TOL_FLOQUET)
        .count();
    let stable_hint = multipliers.iter().all(|z| z.norm() < 1.0 - TOL_FLOQUET);
    Ok(FloquetReport {
        multipliers,
        alpha,
        index: if alpha % 2 == 0 { 1 } else { -1 },
        stable_hint,
    })
}

/// Floquet multipliers, the instability count and the index of the
/// linearised period map.
pub fn floquet_report(lp: &LinearPair, m: usize, exec: Execution) -> Result<FloquetReport> {
    classify_multipliers(&monodromy(lp, m, exec)?)
}

/// Number of singular values of `mat - I` below `tol`: the dimension of the
/// (numerical) fixed space of a period-map matrix.
pub fn fixed_space_dimension(mat: &DMatrix<f64>, tol: f64) -> usize {
    let n = mat.nrows();
    let shifted = mat - DMatrix::<f64>::identity(n, n);
    shifted.singular_values().iter().filter(|&&s| s < tol).count()
}

/// Central-difference Jacobian of the period map at the history of the
/// periodic `u`, on `m` intervals.
pub fn poincare_jacobian(sys: &DelaySystem, u: &TrigPoly, m: usize, exec: Execution) -> Result<DMatrix<f64>> {
    let phi = HistorySegment::from_trig(u, sys.tau(), m)?;
    let size = phi.values().len();
    let h = 1e-6 * (1.0 + linalg::inf_norm(phi.values()));
    let columns = exec::map_indices(exec, size, |j| -> Result<Vec<f64>> {
        let shifted = |s: f64| -> Result<HistorySegment> {
            let mut v = phi.values().to_vec();
            v[j] += s;
            poincare_map(sys, &HistorySegment::new(phi.dim(), phi.tau(), v)?)
        };
        let (plus, minus) = (shifted(h)?, shifted(-h)?);
        Ok(plus
            .values()
            .iter()
            .zip(minus.values())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect())
    });
    let mut mat = DMatrix::zeros(size, size);
    for (j, col) in columns.into_iter().enumerate() {
        for (i, v) in col?.into_iter().enumerate() {
            mat[(i, j)] = v;
        }
    }
    Ok(mat)
}

/// Multipliers of a periodic solution (modulus-sorted, spurious ones dropped).
pub fn solution_multipliers(sys: &DelaySystem, u: &TrigPoly, m: usize, exec: Execution) -> Result<Vec<Complex64>> {
    let jac = poincare_jacobian(sys, u, m, exec)?;
    Ok(sort_by_modulus(
        linalg::eigenvalues(&jac)
            .into_iter()
            .filter(|z| z.norm() >= SPURIOUS_MODULUS)
            .collect(),
    ))
}

/// `|P phi_u - phi_u|_inf` for the history of a periodic candidate `u`.
pub fn periodicity_defect(sys: &DelaySystem, u: &TrigPoly, m: usize) -> Result<f64> {
    let phi = HistorySegment::from_trig(u, sys.tau(), m)?;
    Ok(poincare_map(sys, &phi)?.distance(&phi))
}
