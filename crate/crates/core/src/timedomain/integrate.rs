//! Fixed-step method-of-steps integration with dense output.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inf_norm;
use crate::system::DelaySystem;
use crate::trig::TrigPoly;

/// Default bound on `|u|_inf` before an integration is declared blown up.
pub const DEFAULT_BLOW_UP: f64 = 1e8;

/// Values of a state on `m + 1` equispaced nodes `-tau + i tau / m` of
/// `[-tau, 0]`. With `tau = 0` the segment is a single node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySegment {
    dim: usize,
    tau: f64,
    /// Node-major: node `i` occupies `values[i N..(i + 1) N]`.
    values: Vec<f64>,
}

impl HistorySegment {
    pub fn new(dim: usize, tau: f64, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || !(tau >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "history needs dim > 0 and tau >= 0 (dim = {dim}, tau = {tau})"
            )));
        }
        let nodes = values.len() / dim;
        if values.len() % dim != 0 || nodes == 0 || (tau == 0.0 && nodes != 1) || (tau > 0.0 && nodes < 2) {
            return Err(Error::InvalidParameter(format!(
                "history of {} values does not fit dim {dim} and tau {tau}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("history values must be finite".into()));
        }
        Ok(Self { dim, tau, values })
    }

    /// Samples `f` on the nodes; `m` is ignored when `tau = 0`.
    pub fn from_fn(dim: usize, tau: f64, m: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let m = if tau == 0.0 { 0 } else { m.max(1) };
        let mut values = Vec::with_capacity((m + 1) * dim);
        for i in 0..=m {
            let t = node_time(tau, m, i);
            let v = f(t);
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            values.extend(v);
        }
        Self::new(dim, tau, values)
    }

    pub fn constant(value: &[f64], tau: f64, m: usize) -> Result<Self> {
        Self::from_fn(value.len(), tau, m, |_| value.to_vec())
    }

    /// The segment of a `T`-periodic `u` ending at a multiple of `T`.
    pub fn from_trig(u: &TrigPoly, tau: f64, m: usize) -> Result<Self> {
        Self::from_fn(u.dim(), tau, m, |t| u.evaluate(t))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    /// Number of intervals `m` (zero for an undelayed segment).
    pub fn intervals(&self) -> usize {
        self.values.len() / self.dim - 1
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
    pub fn node_times(&self) -> Vec<f64> {
        let m = self.intervals();
        (0..=m).map(|i| node_time(self.tau, m, i)).collect()
    }
    /// `phi(0)`.
    pub fn current(&self) -> &[f64] {
        self.node(self.intervals())
    }

    /// Max-norm distance to a segment on the same grid.
    pub fn distance(&self, other: &HistorySegment) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// `phi(s)` for `s` in `[-tau, 0]` by cubic Lagrange interpolation on the
    /// four nearest nodes (fewer when the segment is short).
    pub fn interpolate(&self, s: f64, out: &mut [f64]) {
        let m = self.intervals();
        if m == 0 {
            out.copy_from_slice(self.node(0));
            return;
        }
        let h = self.tau / m as f64;
        let pos = ((s + self.tau) / h).clamp(0.0, m as f64);
        let near = pos.round();
        if (pos - near).abs() < 1e-12 {
            out.copy_from_slice(self.node(near as usize));
            return;
        }
        let points = (m + 1).min(4);
        let base = (pos.floor() as isize - 1).clamp(0, (m + 1 - points) as isize) as usize;
        out.fill(0.0);
        for a in 0..points {
            let mut w = 1.0;
            for b in 0..points {
                if a != b {
                    w *= (pos - (base + b) as f64) / (a as f64 - b as f64);
                }
            }
            for (o, v) in out.iter_mut().zip(self.node(base + a)) {
                *o += w * v;
            }
        }
    }
}

fn node_time(tau: f64, m: usize, i: usize) -> f64 {
    if m == 0 {
        0.0
    } else if i == m {
        0.0
    } else {
        -tau + tau * i as f64 / m as f64
    }
}

/// Knots, values and derivatives of an integrated solution plus its
/// initial history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    history: HistorySegment,
    times: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.derivs[i * self.dim..(i + 1) * self.dim]
    }
    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("trajectory has the initial knot")
    }
    pub fn final_state(&self) -> &[f64] {
        self.value(self.len() - 1)
    }
    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    /// `u(t)` for `t` in `[-tau, end]`: history interpolation for `t <= 0`,
    /// cubic Hermite between knots afterwards.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t <= 0.0 {
            self.history.interpolate(t, out);
            return;
        }
        let last = self.len() - 1;
        let j = self.times.partition_point(|&x| x <= t);
        if j > last {
            out.copy_from_slice(self.value(last));
            return;
        }
        let i = j - 1;
        let (t0, t1) = (self.times[i], self.times[j]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        if s <= 0.0 {
            out.copy_from_slice(self.value(i));
            return;
        }
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let (y0, y1) = (self.value(i), self.value(j));
        let (d0, d1) = (self.derivative(i), self.derivative(j));
        for k in 0..self.dim {
            out[k] = h00 * y0[k] + h * h10 * d0[k] + h01 * y1[k] + h * h11 * d1[k];
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// The segment `u_t` on `m` intervals.
    pub fn segment_at(&self, t: f64, m: usize) -> HistorySegment {
        let tau = self.history.tau();
        HistorySegment::from_fn(self.dim, tau, m, |s| self.eval(t + s)).expect("finite trajectory")
    }

    /// CSV with header `t,u1,...,uN`, one row per knot.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        write_csv(w, self.dim, self.times.iter().copied().zip(self.values.chunks(self.dim)))
    }
}

/// Writes `(t, u(t))` rows as CSV with header `t,u1,...,uN`, 17 significant
/// digits per value.
pub fn write_csv<'a, W: Write>(
    mut w: W,
    dim: usize,
    rows: impl IntoIterator<Item = (f64, &'a [f64])>,
) -> io::Result<()> {
    write!(w, "t")?;
    for i in 1..=dim {
        write!(w, ",u{i}")?;
    }
    writeln!(w)?;
    for (t, u) in rows {
        write!(w, "{t:.16e}")?;
        for v in u {
            write!(w, ",{v:.16e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Checks that `dt` divides `tau` and returns `tau / dt`.
pub fn steps_per_delay(tau: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive (got {dt})")));
    }
    if tau == 0.0 {
        return Ok(0);
    }
    let ratio = tau / dt;
    let q = ratio.round();
    if q < 1.0 || (ratio - q).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::StepMisfit { dt, tau });
    }
    Ok(q as usize)
}

/// Classical RK4 with step `dt` from the history `phi` up to `t_end`.
pub fn integrate(sys: &DelaySystem, phi: &HistorySegment, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_bounded(sys, phi, t_end, dt, DEFAULT_BLOW_UP)
}

/// [`integrate`] with an explicit blow-up bound on `|u|_inf`.
///
/// The delayed state at each stage is read from the dense output; because
/// `dt` divides `tau` the stage times fall on knots or knot midpoints, and
/// derivative jumps at multiples of `tau` coincide with knots. The final
/// step is shortened to land on `t_end`.
pub fn integrate_bounded(
    sys: &DelaySystem,
    phi: &HistorySegment,
    t_end: f64,
    dt: f64,
    bound: f64,
) -> Result<Trajectory> {
    let n = sys.dim();
    if phi.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: phi.dim(),
        });
    }
    if (phi.tau() - sys.tau()).abs() > 1e-12 * sys.tau().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "history delay {} differs from the system delay {}",
            phi.tau(),
            sys.tau()
        )));
    }
    if !(t_end >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_end must be non-negative (got {t_end})")));
    }
    steps_per_delay(sys.tau(), dt)?;
    let tau = sys.tau();
    let delayed = tau > 0.0;
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;

    let mut traj = Trajectory {
        dim: n,
        history: phi.clone(),
        times: Vec::with_capacity(steps + 1),
        values: Vec::with_capacity((steps + 1) * n),
        derivs: Vec::with_capacity((steps + 1) * n),
    };
    traj.times.push(0.0);
    traj.values.extend_from_slice(phi.current());

    let mut y = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let rhs = |traj: &Trajectory, t: f64, state: &[f64], y: &mut Vec<f64>, out: &mut [f64]| -> Result<()> {
        if delayed {
            traj.eval_into(t - tau, y);
        } else {
            y.copy_from_slice(state);
        }
        if sys.rhs(t, state, y, out) {
            Ok(())
        } else {
            Err(Error::DomainEscape { t })
        }
    };

    for step in 0..steps {
        let t0 = traj.times[step];
        let h = if step + 1 == steps { t_end - t0 } else { dt };
        let u0 = traj.value(step).to_vec();
        // stage 1 doubles as the stored knot derivative
        rhs(&traj, t0, &u0, &mut y, &mut k[0])?;
        traj.derivs.extend_from_slice(&k[0]);
        for (xi, (ui, ki)) in x.iter_mut().zip(u0.iter().zip(&k[0])) {
            *xi = ui + 0.5 * h * ki;
        }
        let (first, rest) = k.split_at_mut(1);
        rhs(&traj, t0 + 0.5 * h, &x, &mut y, &mut rest[0])?;
        for (xi, (ui, ki)) in x.iter_mut().zip(u0.iter().zip(&rest[0])) {
            *xi = ui + 0.5 * h * ki;
        }
        rhs(&traj, t0 + 0.5 * h, &x, &mut y, &mut rest[1])?;
        for (xi, (ui, ki)) in x.iter_mut().zip(u0.iter().zip(&rest[1])) {
            *xi = ui + h * ki;
        }
        rhs(&traj, t0 + h, &x, &mut y, &mut rest[2])?;
        for i in 0..n {
            x[i] = u0[i] + h / 6.0 * (first[0][i] + 2.0 * rest[0][i] + 2.0 * rest[1][i] + rest[2][i]);
        }
        let t1 = t0 + h;
        if !(inf_norm(&x) <= bound) {
            return Err(Error::BlowUp { t: t1, bound });
        }
        traj.times.push(t1);
        traj.values.extend_from_slice(&x);
    }
    let last = traj.len() - 1;
    let (t_last, u_last) = (traj.times[last], traj.value(last).to_vec());
    let mut d = vec![0.0; n];
    rhs(&traj, t_last, &u_last, &mut y, &mut d)?;
    traj.derivs.extend_from_slice(&d);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{FnField, LinearField};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn scalar(a: f64, b: f64, tau: f64, period: f64) -> DelaySystem {
        DelaySystem::new(
            Arc::new(LinearField::new(DMatrix::from_element(1, 1, a), DMatrix::from_element(1, 1, b))),
            tau,
            period,
            None,
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_field_keeps_constant() {
        let field = Arc::new(FnField::new(2, |_x: &[f64], _y: &[f64], o: &mut [f64]| o.fill(0.0)));
        let sys = DelaySystem::new(field, 0.5, 1.0, None, vec![0.0, 0.0]).unwrap();
        let phi = HistorySegment::constant(&[1.5, -2.0], 0.5, 8).unwrap();
        let tr = integrate(&sys, &phi, 3.0, 0.0625).unwrap();
        assert_eq!(tr.final_state(), &[1.5, -2.0]);
    }

    #[test]
    fn exponential_decay() {
        let sys = scalar(-1.0, 0.0, 0.0, 1.0);
        let phi = HistorySegment::constant(&[1.0], 0.0, 0).unwrap();
        let tr = integrate(&sys, &phi, 1.0, 1e-3).unwrap();
        assert!((tr.final_state()[0] - (-1.0f64).exp()).abs() < 1e-8);
        assert!((tr.eval(0.5)[0] - (-0.5f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn delayed_cosine_is_exact() {
        let tau = PI / 2.0;
        let sys = scalar(0.0, -1.0, tau, 2.0 * PI);
        let phi = HistorySegment::from_fn(1, tau, 128, |t| vec![t.cos()]).unwrap();
        let tr = integrate(&sys, &phi, 2.0 * PI, tau / 128.0).unwrap();
        assert!((tr.final_state()[0] - 1.0).abs() < 1e-6);
        assert!((tr.eval(1.0)[0] - 1f64.cos()).abs() < 1e-6);
    }

    #[test]
    fn step_must_divide_delay() {
        let sys = scalar(-1.0, 0.5, 1.0, 2.0);
        let phi = HistorySegment::constant(&[1.0], 1.0, 4).unwrap();
        assert!(matches!(integrate(&sys, &phi, 1.0, 0.3), Err(Error::StepMisfit { .. })));
        assert!(integrate(&sys, &phi, 1.0, 0.25).is_ok());
    }

    #[test]
    fn blow_up_is_reported() {
        let sys = scalar(5.0, 0.0, 0.0, 1.0);
        let phi = HistorySegment::constant(&[1.0], 0.0, 0).unwrap();
        assert!(matches!(
            integrate_bounded(&sys, &phi, 10.0, 0.01, 1e3),
            Err(Error::BlowUp { .. })
        ));
    }

    #[test]
    fn history_interpolation_is_cubic_exact() {
        let phi = HistorySegment::from_fn(1, 2.0, 10, |t| vec![t * t * t - t]).unwrap();
        let mut out = [0.0];
        for s in [-1.93, -1.0, -0.37, -0.01] {
            phi.interpolate(s, &mut out);
            assert!((out[0] - (s * s * s - s)).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_layout() {
        let sys = scalar(-1.0, 0.0, 0.0, 1.0);
        let phi = HistorySegment::constant(&[1.0], 0.0, 0).unwrap();
        let tr = integrate(&sys, &phi, 0.2, 0.1).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u1");
        assert_eq!(lines.len(), 4);
        let v: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 1.0);
    }
}
