//! Analysis of the linearised delay system `u'(t) = A u(t) + B u(t - tau)`.
//!
//! A `T`-periodic solution with Fourier pairs `(a_k, b_k)` exists iff
//! `[[X_k, -Y_k], [Y_k, X_k]] (a_k, b_k) = 0` for some `k`, where
//! `X_k = A + cos(l_k tau) B` and `Y_k = l_k I + sin(l_k tau) B`. The
//! determinants `h_k` of these blocks drive the resonance test, and the sign
//! of `det(A + B)` together with the Euler characteristic of the domain gives
//! the multiplicity bound `Gamma = |chi - (-1)^N s(A+B)| + 1`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::{self, parity_sign, sign};
use crate::trig::harmonic_frequency;

/// Relative determinant tolerance; scaled by `scale^dim` at each use.
pub const DET_RTOL: f64 = 1e-9;

/// Linearisation `(A, B)` at an equilibrium together with `tau` and `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPair {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    tau: f64,
    period: f64,
}

impl LinearPair {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, tau: f64, period: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidParameter("A must be a non-empty square matrix".into()));
        }
        if a.shape() != b.shape() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: b.nrows(),
            });
        }
        if !(tau >= 0.0) || !(period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need tau >= 0 and T > 0 (tau = {tau}, T = {period})"
            )));
        }
        Ok(Self { a, b, tau, period })
    }

    /// Scalar convenience constructor.
    pub fn scalar(a: f64, b: f64, tau: f64, period: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            tau,
            period,
        )
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn with_period(&self, period: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.tau, period)
    }

    /// `A + B`, the Jacobian of `G(x) = g(x, x)` at the equilibrium.
    pub fn sum(&self) -> DMatrix<f64> {
        &self.a + &self.b
    }

    fn norms(&self) -> (f64, f64) {
        (linalg::spectral_norm(&self.a), linalg::spectral_norm(&self.b))
    }
}

/// `l_k = 2 k pi / T`.
pub fn lambda_k(k: usize, period: f64) -> f64 {
    harmonic_frequency(k, period)
}

/// The blocks of harmonic `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPair {
    pub k: usize,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// `det [[X, -Y], [Y, X]]`.
    pub h: f64,
    /// `(1/l_k) [[Y, X], [-X, Y]]`, the action of `I - K_L` on `(a_k, b_k)`;
    /// `None` for `k = 0`.
    pub mk: Option<DMatrix<f64>>,
    /// Scale `1 + |A| + |B| + l_k` used to normalise `h`.
    pub scale: f64,
}

impl BlockPair {
    /// `h / scale^(2N)`.
    pub fn normalized_h(&self) -> f64 {
        self.h / self.scale.powi(2 * self.x.nrows() as i32)
    }

    /// `DET_RTOL * scale^(2N)`.
    pub fn tolerance(&self) -> f64 {
        DET_RTOL * self.scale.powi(2 * self.x.nrows() as i32)
    }

    /// The `2N x 2N` matrix `[[X, -Y], [Y, X]]`.
    pub fn complex_block(&self) -> DMatrix<f64> {
        complex_block(&self.x, &self.y)
    }
}

/// `[[X, -Y], [Y, X]]`.
pub fn complex_block(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(x);
    m.view_mut((0, n), (n, n)).copy_from(&(-y));
    m.view_mut((n, 0), (n, n)).copy_from(y);
    m.view_mut((n, n), (n, n)).copy_from(x);
    m
}

pub fn block_pair(lp: &LinearPair, k: usize) -> BlockPair {
    let n = lp.dim();
    let lam = lambda_k(k, lp.period);
    let (s, c) = (lam * lp.tau).sin_cos();
    let x = &lp.a + &lp.b * c;
    let y = DMatrix::identity(n, n) * lam + &lp.b * s;
    let h = linalg::det(&complex_block(&x, &y));
    let mk = (k > 0).then(|| {
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&y);
        m.view_mut((0, n), (n, n)).copy_from(&x);
        m.view_mut((n, 0), (n, n)).copy_from(&(-&x));
        m.view_mut((n, n), (n, n)).copy_from(&y);
        m / lam
    });
    let (na, nb) = lp.norms();
    BlockPair {
        k,
        x,
        y,
        h,
        mk,
        scale: 1.0 + na + nb + lam,
    }
}

/// Smallest `k_0` with `l_{k_0 + 1} > |A| + 2|B|`.
///
/// Beyond `k_0`, `sigma_min(Y_k) >= l_k - |B| > |X_k|`, so both Schur
/// factors of the block matrix are invertible and `h_k != 0`.
pub fn truncation_k0(lp: &LinearPair) -> usize {
    let (na, nb) = lp.norms();
    let bound = na + 2.0 * nb;
    let mut k = (bound * lp.period / (2.0 * std::f64::consts::PI)).floor() as usize;
    // guard the floor against rounding on either side
    while k > 0 && lambda_k(k, lp.period) > bound {
        k -= 1;
    }
    while lambda_k(k + 1, lp.period) <= bound {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub nonresonant: bool,
    pub failing_k: Option<usize>,
    pub k0: usize,
    /// `h_k` for `k = 0..=k0`.
    pub h_values: Vec<f64>,
    /// `h_k / scale_k^(2N)` for `k = 0..=k0`.
    pub normalized_h: Vec<f64>,
    pub det_sum: f64,
    /// `s(A+B)`; `None` when `det(A+B)` vanishes within tolerance.
    pub sign_s: Option<i8>,
    /// `Gamma`; `None` whenever `sign_s` is.
    pub gamma: Option<u32>,
    pub chi: i64,
    pub dim: usize,
}

impl Certificate {
    /// `Gamma`, or the reason it cannot be stated.
    pub fn gamma(&self) -> Result<u32> {
        self.gamma
            .ok_or(Error::DegenerateCertificate { det: self.det_sum })
    }

    /// Expected total degree `(-1)^N chi` over the whole domain.
    pub fn total_degree(&self) -> i64 {
        parity_sign(self.dim) as i64 * self.chi
    }
}

/// Scans `h_k` for `k = 0..=k0` and assembles the multiplicity certificate.
///
/// Near-zero `h_k` count as resonant. When `det(A+B)` is numerically zero
/// the certificate is returned with `sign_s` and `gamma` left empty.
pub fn nonresonance_test(lp: &LinearPair, chi: i64) -> Certificate {
    let k0 = truncation_k0(lp);
    let blocks: Vec<BlockPair> = (0..=k0).map(|k| block_pair(lp, k)).collect();
    let failing_k = blocks
        .iter()
        .find(|b| b.h.abs() <= b.tolerance())
        .map(|b| b.k);
    let sum = lp.sum();
    let det_sum = linalg::det(&sum);
    let sign_s = sign_with_tolerance(&sum, det_sum);
    let gamma = sign_s.map(|s| gamma_from_sign(chi, lp.dim(), s));
    Certificate {
        nonresonant: failing_k.is_none(),
        failing_k,
        k0,
        h_values: blocks.iter().map(|b| b.h).collect(),
        normalized_h: blocks.iter().map(BlockPair::normalized_h).collect(),
        det_sum,
        sign_s,
        gamma,
        chi,
        dim: lp.dim(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub period: f64,
    /// `min_k |h_k|` over `k = 0..=k0(T)`.
    pub min_abs_h: f64,
    /// `min_k |h_k| / scale_k^(2N)`.
    pub normalized_margin: f64,
    pub argmin_k: usize,
}

/// Samples the resonance margin on `steps` equispaced periods in
/// `[t_lo, t_hi]`. Output is ordered by period.
pub fn resonance_scan(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    tau: f64,
    t_lo: f64,
    t_hi: f64,
    steps: usize,
    exec: Execution,
) -> Result<Vec<ScanPoint>> {
    if !(t_lo > 0.0) || !(t_hi > t_lo) || steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "resonance scan needs 0 < t_lo < t_hi and steps >= 2 (got [{t_lo}, {t_hi}], {steps})"
        )));
    }
    let base = LinearPair::new(a.clone(), b.clone(), tau, t_lo)?;
    let points = exec::map_indices(exec, steps, |i| {
        let period = t_lo + (t_hi - t_lo) * i as f64 / (steps - 1) as f64;
        let lp = base.with_period(period).expect("validated pair");
        let k0 = truncation_k0(&lp);
        let mut best = ScanPoint {
            period,
            min_abs_h: f64::INFINITY,
            normalized_margin: f64::INFINITY,
            argmin_k: 0,
        };
        for k in 0..=k0 {
            let bp = block_pair(&lp, k);
            let norm = bp.normalized_h().abs();
            if bp.h.abs() < best.min_abs_h {
                best.min_abs_h = bp.h.abs();
                best.argmin_k = k;
            }
            best.normalized_margin = best.normalized_margin.min(norm);
        }
        best
    });
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EigenTest {
    pub passes: bool,
    pub offending_k: Option<usize>,
    /// Largest harmonic inspected.
    pub k_max: usize,
}

/// Checks that no eigenvalue of `m` equals `i l_k` for any `k`, i.e. that 1
/// is not a Floquet multiplier of `u' = M u`.
pub fn small_delay_eigentest(m: &DMatrix<f64>, period: f64) -> EigenTest {
    let norm = linalg::spectral_norm(m);
    let k_max = ((norm + 1.0) * period / (2.0 * std::f64::consts::PI)).ceil() as usize;
    let tol = 1e-8 * (1.0 + norm);
    let eig = linalg::eigenvalues(m);
    for k in 0..=k_max {
        let lam = lambda_k(k, period);
        if eig
            .iter()
            .any(|z| z.re.abs() <= tol && (z.im.abs() - lam).abs() <= tol)
        {
            return EigenTest {
                passes: false,
                offending_k: Some(k),
                k_max,
            };
        }
    }
    EigenTest {
        passes: true,
        offending_k: None,
        k_max,
    }
}

/// Tolerance for an `N x N` determinant of `m`.
pub fn det_tolerance(m: &DMatrix<f64>) -> f64 {
    DET_RTOL * (1.0 + linalg::spectral_norm(m)).powi(m.nrows() as i32)
}

fn sign_with_tolerance(m: &DMatrix<f64>, det: f64) -> Option<i8> {
    (det.abs() > det_tolerance(m)).then(|| sign(det))
}

/// `s(M) = sgn det(M)`, refusing numerically singular input.
pub fn sign_det(m: &DMatrix<f64>) -> Result<i8> {
    let det = linalg::det(m);
    sign_with_tolerance(m, det).ok_or(Error::SingularMatrix { det })
}

fn gamma_from_sign(chi: i64, dim: usize, s: i8) -> u32 {
    ((chi - parity_sign(dim) as i64 * s as i64).unsigned_abs() + 1) as u32
}

/// `Gamma(M) = |chi - (-1)^N s(M)| + 1`.
pub fn gamma_bound(chi: i64, m: &DMatrix<f64>) -> Result<u32> {
    let s = sign_det(m)?;
    Ok(gamma_from_sign(chi, m.nrows(), s))
}
