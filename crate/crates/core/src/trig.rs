//! Vector-valued trigonometric polynomials on a fixed period.
//!
//! A [`TrigPoly`] of degree `K` in `R^N` represents
//!
//! ```text
//! u(t) = a_0 + sum_{k=1..K} ( cos(l_k t) a_k + sin(l_k t) b_k ),   l_k = 2 k pi / T
//! ```
//!
//! Coefficients are stored in one flat buffer, interleaved per harmonic:
//! `[a_0 | a_1 | b_1 | a_2 | b_2 | ...]`, each block of length `N`. This keeps
//! the `(a_k, b_k)` pair contiguous, which is the block structure every
//! linear operator in the crate acts on.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular frequency of the `k`-th harmonic for period `period`.
#[inline]
pub fn harmonic_frequency(k: usize, period: f64) -> f64 {
    2.0 * k as f64 * PI / period
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    dim: usize,
    period: f64,
    degree: usize,
    coeffs: Vec<f64>,
}

impl TrigPoly {
    pub fn zeros(dim: usize, period: f64, degree: usize) -> Self {
        assert!(dim > 0, "state dimension must be positive");
        assert!(period > 0.0, "period must be positive");
        Self {
            dim,
            period,
            degree,
            coeffs: vec![0.0; dim * (2 * degree + 1)],
        }
    }

    pub fn constant(value: &[f64], period: f64, degree: usize) -> Self {
        let mut u = Self::zeros(value.len(), period, degree);
        u.coeffs[..value.len()].copy_from_slice(value);
        u
    }

    /// Builds a polynomial from an interleaved coefficient buffer.
    pub fn from_coeffs(dim: usize, period: f64, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let expected = dim * (2 * degree + 1);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        if dim == 0 || !(period > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trigonometric polynomial needs dim > 0 and period > 0 (dim = {dim}, period = {period})"
            )));
        }
        Ok(Self {
            dim,
            period,
            degree,
            coeffs,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of real unknowns, `N (2K + 1)`.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn frequency(&self, k: usize) -> f64 {
        harmonic_frequency(k, self.period)
    }

    pub fn a0(&self) -> &[f64] {
        &self.coeffs[..self.dim]
    }

    pub fn a0_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs[..self.dim]
    }

    fn cos_offset(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.degree);
        self.dim * (2 * k - 1)
    }

    /// Cosine coefficient `a_k`, `1 <= k <= K`.
    pub fn cos_coeff(&self, k: usize) -> &[f64] {
        let o = self.cos_offset(k);
        &self.coeffs[o..o + self.dim]
    }

    /// Sine coefficient `b_k`, `1 <= k <= K`.
    pub fn sin_coeff(&self, k: usize) -> &[f64] {
        let o = self.cos_offset(k) + self.dim;
        &self.coeffs[o..o + self.dim]
    }

    pub fn cos_coeff_mut(&mut self, k: usize) -> &mut [f64] {
        let o = self.cos_offset(k);
        &mut self.coeffs[o..o + self.dim]
    }

    pub fn sin_coeff_mut(&mut self, k: usize) -> &mut [f64] {
        let o = self.cos_offset(k) + self.dim;
        &mut self.coeffs[o..o + self.dim]
    }

    /// Evaluates `u(t)`.
    ///
    /// The argument is reduced modulo the period first, so `u(t)` and
    /// `u(t + T)` agree bit-for-bit whenever `t` and `t + T` reduce to the
    /// same phase.
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.evaluate_into(t, &mut out);
        out
    }

    pub fn evaluate_into(&self, t: f64, out: &mut [f64]) {
        let phase = t.rem_euclid(self.period);
        out.copy_from_slice(self.a0());
        for k in 1..=self.degree {
            let (s, c) = (self.frequency(k) * phase).sin_cos();
            for ((o, a), b) in out
                .iter_mut()
                .zip(self.cos_coeff(k))
                .zip(self.sin_coeff(k))
            {
                *o += c * a + s * b;
            }
        }
    }

    /// The derivative `u'(t)`.
    pub fn evaluate_derivative(&self, t: f64) -> Vec<f64> {
        self.derivative().evaluate(t)
    }

    /// Returns `v` with `v(t) = u(t - tau)`, computed by rotating each
    /// harmonic pair; no resampling is involved.
    pub fn delay_shift(&self, tau: f64) -> TrigPoly {
        let mut v = self.clone();
        for k in 1..=self.degree {
            let (s, c) = (self.frequency(k) * tau).sin_cos();
            let o = self.cos_offset(k);
            for i in 0..self.dim {
                let a = self.coeffs[o + i];
                let b = self.coeffs[o + self.dim + i];
                v.coeffs[o + i] = c * a - s * b;
                v.coeffs[o + self.dim + i] = s * a + c * b;
            }
        }
        v
    }

    /// Term-by-term derivative.
    pub fn derivative(&self) -> TrigPoly {
        let mut v = TrigPoly::zeros(self.dim, self.period, self.degree);
        for k in 1..=self.degree {
            let lam = self.frequency(k);
            let o = self.cos_offset(k);
            for i in 0..self.dim {
                let a = self.coeffs[o + i];
                let b = self.coeffs[o + self.dim + i];
                v.coeffs[o + i] = lam * b;
                v.coeffs[o + self.dim + i] = -lam * a;
            }
        }
        v
    }

    /// The antiderivative vanishing at `t = 0` together with the mean of `u`.
    pub fn antiderivative_and_mean(&self) -> (Antiderivative, Vec<f64>) {
        let mut periodic = TrigPoly::zeros(self.dim, self.period, self.degree);
        for k in 1..=self.degree {
            let lam = self.frequency(k);
            let o = self.cos_offset(k);
            for i in 0..self.dim {
                let a = self.coeffs[o + i];
                let b = self.coeffs[o + self.dim + i];
                // int_0^t cos = sin / l,  int_0^t sin = (1 - cos) / l
                periodic.coeffs[o + i] = -b / lam;
                periodic.coeffs[o + self.dim + i] = a / lam;
                periodic.coeffs[i] += b / lam;
            }
        }
        let mean = self.a0().to_vec();
        (
            Antiderivative {
                slope: mean.clone(),
                periodic,
            },
            mean,
        )
    }

    /// Same polynomial with degree raised (zero padded) or lowered (truncated).
    pub fn with_degree(&self, degree: usize) -> TrigPoly {
        let mut v = TrigPoly::zeros(self.dim, self.period, degree);
        let n = v.coeffs.len().min(self.coeffs.len());
        v.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        v
    }

    /// Values on the equispaced grid `t_j = j T / m`, row-major `m x N`.
    ///
    /// Uses exact integer phase reduction `(k j) mod m` so the grid values
    /// are consistent with [`project`].
    pub fn sample_grid(&self, m: usize) -> Vec<f64> {
        let table = TrigTable::new(m);
        let mut out = vec![0.0; m * self.dim];
        for j in 0..m {
            let row = &mut out[j * self.dim..(j + 1) * self.dim];
            row.copy_from_slice(self.a0());
            for k in 1..=self.degree {
                let (c, s) = table.cos_sin(k * j);
                for ((o, a), b) in row.iter_mut().zip(self.cos_coeff(k)).zip(self.sin_coeff(k)) {
                    *o += c * a + s * b;
                }
            }
        }
        out
    }

    /// Max-norm of `u` over an `m`-point grid.
    pub fn sup_norm_on_grid(&self, m: usize) -> f64 {
        self.sample_grid(m).iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// Max-norm of `u - v` over an `m`-point grid (degrees may differ).
    pub fn distance_on_grid(&self, other: &TrigPoly, m: usize) -> f64 {
        let a = self.sample_grid(m);
        let b = other.sample_grid(m);
        a.iter()
            .zip(&b)
            .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
    }

    /// Largest coefficient magnitude.
    pub fn coeff_sup(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// `self + s * other`; degrees must match.
    pub fn axpy(&self, s: f64, other: &TrigPoly) -> TrigPoly {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        let mut v = self.clone();
        for (x, y) in v.coeffs.iter_mut().zip(&other.coeffs) {
            *x += s * y;
        }
        v
    }

    pub fn scaled(&self, s: f64) -> TrigPoly {
        let mut v = self.clone();
        v.coeffs.iter_mut().for_each(|x| *x *= s);
        v
    }
}

/// `Iu(t) = slope * t + periodic(t)`, the antiderivative of a trigonometric
/// polynomial. The linear part is kept separate so it can cancel exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Antiderivative {
    pub slope: Vec<f64>,
    pub periodic: TrigPoly,
}

impl Antiderivative {
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let mut v = self.periodic.evaluate(t);
        for (x, s) in v.iter_mut().zip(&self.slope) {
            *x += s * t;
        }
        v
    }

    /// `(1/T) int_0^T Iu(t) dt`.
    pub fn mean(&self) -> Vec<f64> {
        let half = 0.5 * self.periodic.period();
        self.periodic
            .a0()
            .iter()
            .zip(&self.slope)
            .map(|(c, s)| c + s * half)
            .collect()
    }
}

/// Cosine/sine of `2 pi i / m` for integer `i`, reduced modulo `m`.
pub(crate) struct TrigTable {
    m: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl TrigTable {
    pub(crate) fn new(m: usize) -> Self {
        let (cos, sin) = (0..m)
            .map(|i| {
                let (s, c) = (2.0 * PI * i as f64 / m as f64).sin_cos();
                (c, s)
            })
            .unzip();
        Self { m, cos, sin }
    }

    #[inline]
    pub(crate) fn cos_sin(&self, i: usize) -> (f64, f64) {
        let r = i % self.m;
        (self.cos[r], self.sin[r])
    }
}

/// Discrete Fourier projection of equispaced samples onto degree `degree`.
///
/// `samples` is row-major `m x dim`, sample `j` taken at `t_j = j T / m`.
/// Exact for trigonometric polynomials of degree at most `degree`.
pub fn project(samples: &[f64], dim: usize, period: f64, degree: usize) -> Result<TrigPoly> {
    if dim == 0 || samples.len() % dim != 0 {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: samples.len(),
        });
    }
    let m = samples.len() / dim;
    let required = 2 * degree + 2;
    if m < required {
        return Err(Error::GridTooCoarse {
            samples: m,
            degree,
            required,
        });
    }
    let table = TrigTable::new(m);
    let mut u = TrigPoly::zeros(dim, period, degree);
    let inv = 1.0 / m as f64;
    for j in 0..m {
        let row = &samples[j * dim..(j + 1) * dim];
        for (a, x) in u.coeffs[..dim].iter_mut().zip(row) {
            *a += x * inv;
        }
        for k in 1..=degree {
            let (c, s) = table.cos_sin(k * j);
            let o = dim * (2 * k - 1);
            for i in 0..dim {
                u.coeffs[o + i] += 2.0 * inv * c * row[i];
                u.coeffs[o + dim + i] += 2.0 * inv * s * row[i];
            }
        }
    }
    Ok(u)
}

/// Collocation grid size used for pointwise nonlinear maps of degree-`degree`
/// inputs.
pub fn collocation_size(degree: usize) -> usize {
    4 * degree + 4
}
