//! Sampled checks of the inward-pointing conditions.
//!
//! Both conditions are continuum statements; everything here is evidence
//! gathered on deterministic point sets, not a proof.

use serde::{Deserialize, Serialize};

use super::{BoundaryPoint, PuncturedBall};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::linalg::dot;
use crate::sampling;
use crate::system::DelaySystem;

pub const EVIDENCE_NOTE: &str = "sampled evidence, not proof";

/// Radii ladder `diam * 2^(-j/8)`, `j = 0..=LADDER_STEPS`, shared by every
/// pair check so the sampled pair sets are nested in the reach.
const LADDER_STEPS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    /// Points per boundary component.
    pub boundary: usize,
    /// Directions tried from each boundary point for the delayed condition.
    pub directions: usize,
    /// Pairs drawn for the field sup-norm estimate.
    pub sup_samples: usize,
    pub exec: Execution,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            boundary: 2048,
            directions: 8,
            sup_samples: 20_000,
            exec: Execution::Parallel,
        }
    }
}

fn eval_margin(sys: &DelaySystem, x: &[f64], y: &[f64], normal: &[f64]) -> Option<f64> {
    sys.g(x, y).map(|g| dot(&g, normal))
}

/// `1.1 * max |g(x, y)|` over low-discrepancy pairs of the closed domain
/// plus pairs of boundary samples.
pub fn sup_norm_estimate(sys: &DelaySystem, dom: &PuncturedBall, samples: usize, exec: Execution) -> f64 {
    let n = dom.dim();
    let tol = dom.tol_geo();
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(samples);
    let mut index = 1u64;
    let cap = 1000 * samples as u64 + 1000;
    while pairs.len() < samples && index < cap {
        let q = sampling::halton(index, 2 * n);
        index += 1;
        let x: Vec<f64> = q[..n].iter().map(|v| (2.0 * v - 1.0) * dom.radius()).collect();
        let y: Vec<f64> = q[n..].iter().map(|v| (2.0 * v - 1.0) * dom.radius()).collect();
        let clear = |p: &[f64]| {
            dom.contains_closed(p)
                && dom
                    .holes()
                    .iter()
                    .all(|h| crate::linalg::dist(p, &h.center) >= h.radius - tol)
        };
        if clear(&x) && clear(&y) {
            pairs.push((x, y));
        }
    }
    // the largest values of a field singular at the holes and growing with
    // |x|, |y| sit on boundary pairs, which random pairs rarely reach
    let per_component = (((samples as f64).sqrt() / (1 + dom.hole_count()) as f64).ceil() as usize).max(16);
    let boundary = dom.boundary_samples(per_component);
    for x in &boundary {
        for y in &boundary {
            pairs.push((x.point.clone(), y.point.clone()));
        }
    }
    let values = exec::map_slice(exec, &pairs, |(x, y)| {
        sys.g(x, y)
            .map(|g| crate::linalg::euclid(&g))
            .unwrap_or(0.0)
    });
    1.1 * values.into_iter().fold(0.0, f64::max)
}

fn ladder(diam: f64) -> impl Iterator<Item = f64> {
    (0..=LADDER_STEPS)
        .rev()
        .map(move |j| diam * 2f64.powf(-(j as f64) / 8.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InwardReport {
    pub tau: f64,
    /// `1.1 * sup |g|` used to size the delayed neighbourhood.
    pub sup_norm: f64,
    /// `tau * sup_norm`.
    pub reach: f64,
    pub tol_margin: f64,
    /// Most positive `<g(x,x), nu(x)>` over boundary samples.
    pub weak_worst: f64,
    /// Most positive `<g(x,y), nu(x)>` over sampled boundary pairs.
    pub strong_worst: f64,
    pub weak_pass: bool,
    pub strong_pass: bool,
    pub boundary_points: usize,
    pub pairs_checked: usize,
    pub note: String,
}

impl InwardReport {
    pub fn passes(&self) -> bool {
        self.weak_pass && self.strong_pass
    }
}

/// Checks `<G(x), nu(x)> < 0` on sampled boundary points and
/// `<g(x,y), nu(x)> < 0` on sampled pairs with `|y - x| <= tau * sup|g|`.
pub fn verify_inward(
    sys: &DelaySystem,
    dom: &PuncturedBall,
    tau: f64,
    opts: &SamplingOptions,
) -> InwardReport {
    let sup_norm = sup_norm_estimate(sys, dom, opts.sup_samples, opts.exec);
    let reach = tau * sup_norm;
    let tol_margin = 1e-6 * sup_norm.max(f64::MIN_POSITIVE);
    let boundary = dom.boundary_samples(opts.boundary);
    let dirs = sampling::sphere_directions(dom.dim(), opts.directions);
    let diam = dom.diameter();

    let per_point = exec::map_slice(opts.exec, &boundary, |bp: &BoundaryPoint| {
        let weak = eval_margin(sys, &bp.point, &bp.point, &bp.normal).unwrap_or(f64::INFINITY);
        let mut strong = weak;
        let mut count = 1usize;
        for d in &dirs {
            for r in ladder(diam).take_while(|&r| r <= reach) {
                let y: Vec<f64> = bp.point.iter().zip(d).map(|(x, v)| x + r * v).collect();
                if !dom.contains_closed(&y) {
                    continue;
                }
                count += 1;
                let m = eval_margin(sys, &bp.point, &y, &bp.normal).unwrap_or(f64::INFINITY);
                strong = strong.max(m);
            }
        }
        (weak, strong, count)
    });
    let weak_worst = per_point.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let strong_worst = per_point.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    InwardReport {
        tau,
        sup_norm,
        reach,
        tol_margin,
        weak_worst,
        strong_worst,
        weak_pass: weak_worst < -tol_margin,
        strong_pass: strong_worst < -tol_margin,
        boundary_points: boundary.len(),
        pairs_checked: per_point.iter().map(|p| p.2).sum(),
        note: EVIDENCE_NOTE.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauStar {
    /// Largest sampled `eps` keeping the delayed condition for `|y - x| < eps`.
    pub epsilon: f64,
    pub sup_norm: f64,
    /// `epsilon / sup_norm`.
    pub tau_star: f64,
    /// `true` when no sampled ray failed and `epsilon` is the diameter.
    pub diameter_limited: bool,
}

/// Largest delay admitted by the sampled delayed condition, `eps / sup|g|`.
///
/// Along each sampled ray from each boundary point the first failing ladder
/// radius is located and refined by bisection; `eps` is the smallest such
/// radius.
pub fn tau_star(sys: &DelaySystem, dom: &PuncturedBall, opts: &SamplingOptions) -> Result<TauStar> {
    let sup_norm = sup_norm_estimate(sys, dom, opts.sup_samples, opts.exec);
    let tol_margin = 1e-6 * sup_norm.max(f64::MIN_POSITIVE);
    let boundary = dom.boundary_samples(opts.boundary);
    let weak_worst = exec::map_slice(opts.exec, &boundary, |bp: &BoundaryPoint| {
        eval_margin(sys, &bp.point, &bp.point, &bp.normal).unwrap_or(f64::INFINITY)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    if !(weak_worst < -tol_margin) {
        return Err(Error::WeakConditionFails { worst: weak_worst });
    }
    let dirs = sampling::sphere_directions(dom.dim(), opts.directions);
    let diam = dom.diameter();

    let fails = |bp: &BoundaryPoint, d: &[f64], r: f64| -> bool {
        let y: Vec<f64> = bp.point.iter().zip(d).map(|(x, v)| x + r * v).collect();
        if !dom.contains_closed(&y) {
            return false;
        }
        match eval_margin(sys, &bp.point, &y, &bp.normal) {
            Some(m) => m >= -tol_margin,
            None => true,
        }
    };

    let critical = exec::map_slice(opts.exec, &boundary, |bp: &BoundaryPoint| {
        let mut best = f64::INFINITY;
        for d in &dirs {
            let mut last_ok = 0.0;
            for r in ladder(diam) {
                if fails(bp, d, r) {
                    let (mut lo, mut hi) = (last_ok, r);
                    for _ in 0..50 {
                        let mid = 0.5 * (lo + hi);
                        if fails(bp, d, mid) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    best = best.min(hi);
                    break;
                }
                last_ok = r;
            }
        }
        best
    });
    let eps = critical.into_iter().fold(f64::INFINITY, f64::min);
    let (epsilon, diameter_limited) = if eps.is_finite() { (eps, false) } else { (diam, true) };
    Ok(TauStar {
        epsilon,
        sup_norm,
        tau_star: epsilon / sup_norm,
        diameter_limited,
    })
}
