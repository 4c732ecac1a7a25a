//! Undelayed degree formula, characteristic-root sign check and the
//! equicontinuity diagnostic for the period map.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::integrate::{integrate, HistorySegment};
use super::poincare::period_step;
use crate::error::{Error, Result};
use crate::linalg::{self, inf_norm, parity_sign, sign};
use crate::linan::{small_delay_eigentest, LinearPair};
use crate::system::DelaySystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeDegree {
    /// `sgn det(I - e^(TM))`.
    pub sign: i8,
    /// `(-1)^N sgn det(M)`.
    pub expected: i8,
    pub consistent: bool,
    pub det: f64,
}

/// Degree of `I - P` for the period map of `u' = M u`: the sign of
/// `det(I - e^(TM))`, checked against `(-1)^N s(M)`.
pub fn ode_poincare_degree(m: &DMatrix<f64>, period: f64) -> Result<OdeDegree> {
    let n = m.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let flow = (m * period).exp();
    let shifted = &eye - &flow;
    let det = linalg::det(&shifted);
    let smallest = shifted.singular_values().min();
    if !small_delay_eigentest(m, period).passes || smallest <= 1e-10 * (1.0 + linalg::spectral_norm(&flow)) {
        return Err(Error::FloquetOne { det });
    }
    let s_m = sign(linalg::det(m));
    let expected = (parity_sign(n) as i8) * s_m;
    let sign = sign(det);
    Ok(OdeDegree {
        sign,
        expected,
        consistent: sign == expected,
        det,
    })
}

/// `h(l) = det(l I - A - B e^(-l tau))` for real `l`.
pub fn characteristic_function(lp: &LinearPair, lambda: f64) -> f64 {
    let n = lp.dim();
    let mat = DMatrix::<f64>::identity(n, n) * lambda - lp.a() - lp.b() * (-lambda * lp.tau()).exp();
    linalg::det(&mat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicCheck {
    /// `h(0) = det(-A - B)`.
    pub h0: f64,
    /// Upper end of the search interval, `|A| + |B| + 1`.
    pub upper: f64,
    /// A positive real root when `h(0) < 0`.
    pub positive_root: Option<f64>,
}

/// When `h(0) < 0`, brackets and bisects a positive real root of `h` on
/// `[0, |A| + |B| + 1]` (where `h > 0` at the right end). Otherwise reports
/// no root; this is a sign check, not a root finder.
pub fn characteristic_positive_root(lp: &LinearPair) -> CharacteristicCheck {
    let h0 = characteristic_function(lp, 0.0);
    let upper = linalg::spectral_norm(lp.a()) + linalg::spectral_norm(lp.b()) + 1.0;
    if !(h0 < 0.0) {
        return CharacteristicCheck {
            h0,
            upper,
            positive_root: None,
        };
    }
    let (mut lo, mut hi) = (0.0, upper);
    debug_assert!(characteristic_function(lp, hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if characteristic_function(lp, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    CharacteristicCheck {
        h0,
        upper,
        positive_root: Some(0.5 * (lo + hi)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityReport {
    /// Largest knot-to-knot slope `|u(t2) - u(t1)| / (t2 - t1)` on `(0, T]`.
    pub modulus: f64,
    /// `sup_t |g(0, 0) + p(t)|`, or `None` where `g` is undefined at 0.
    pub c: Option<f64>,
    /// Largest sampled `|[D_x g, D_y g]|_inf` along the trajectories.
    pub lipschitz: f64,
    pub radius: f64,
    /// `C + L R`, when `C` is defined.
    pub lipschitz_bound: Option<f64>,
    /// `max |g(u, u_tau)| + |p|_inf` along the trajectories.
    pub field_bound: f64,
    pub within_lipschitz_bound: bool,
    pub within_field_bound: bool,
    /// Every sampled trajectory stayed in the `R`-ball.
    pub stayed_in_ball: bool,
    pub trajectories: usize,
}

impl EquicontinuityReport {
    pub fn passes(&self) -> bool {
        self.stayed_in_ball && (self.within_lipschitz_bound || self.within_field_bound)
    }
}

/// Measures how fast period-map images can vary and compares with the
/// a priori slope bounds. Diagnostic only.
pub fn equicontinuity_check(sys: &DelaySystem, phis: &[HistorySegment], radius: f64) -> Result<EquicontinuityReport> {
    let n = sys.dim();
    let (tau, period) = (sys.tau(), sys.period());
    let p_sup = sys.forcing_sup();
    let zero = vec![0.0; n];
    let c = sys.g(&zero, &zero).map(|g0| {
        let grid = 16 * (sys.forcing().degree() + 1);
        let ps = sys.forcing().sample_grid(grid);
        ps.chunks(n)
            .map(|p| inf_norm(&g0.iter().zip(p).map(|(a, b)| a + b).collect::<Vec<_>>()))
            .fold(0.0, f64::max)
    });
    let mut modulus = 0.0_f64;
    let mut lipschitz = 0.0_f64;
    let mut field_sup = 0.0_f64;
    let mut stayed = true;
    for phi in phis {
        let m = phi.intervals();
        let tr = integrate(sys, phi, period, period_step(tau, period, m))?;
        let stride = (tr.len() / 64).max(1);
        for i in 0..tr.len() {
            let x = tr.value(i);
            stayed &= inf_norm(x) <= radius * (1.0 + 1e-12);
            if i + 1 < tr.len() {
                let dt = tr.times()[i + 1] - tr.times()[i];
                let slope = x
                    .iter()
                    .zip(tr.value(i + 1))
                    .fold(0.0_f64, |acc, (a, b)| acc.max((b - a).abs()))
                    / dt;
                modulus = modulus.max(slope);
            }
            if i % stride == 0 {
                let y = tr.eval(tr.times()[i] - tau);
                if let Some(g) = sys.g(x, &y) {
                    field_sup = field_sup.max(inf_norm(&g));
                }
                if let Ok((jx, jy)) = sys.jacobians_at(x, &y) {
                    let row_sum = (0..n)
                        .map(|r| (0..n).map(|k| jx[(r, k)].abs() + jy[(r, k)].abs()).sum::<f64>())
                        .fold(0.0, f64::max);
                    lipschitz = lipschitz.max(row_sum);
                }
            }
        }
    }
    let slack = 1.0 + 1e-6;
    let lipschitz_bound = c.map(|c| c + lipschitz * radius);
    let field_bound = field_sup + p_sup;
    Ok(EquicontinuityReport {
        modulus,
        c,
        lipschitz,
        radius,
        lipschitz_bound,
        field_bound,
        within_lipschitz_bound: lipschitz_bound.is_some_and(|b| modulus <= b * slack + 1e-12),
        within_field_bound: modulus <= field_bound * slack + 1e-12,
        stayed_in_ball: stayed,
        trajectories: phis.len(),
    })
}
