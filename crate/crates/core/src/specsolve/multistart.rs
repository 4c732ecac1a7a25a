//! Multi-start search for the periodic solutions inside a domain.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::newton::{newton_solve, SolutionRecord, SolverOptions};
use super::operator::{fine_grid_size, p_hat, time_defect};
use crate::domain::PuncturedBall;
use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::euclid;
use crate::linan::{nonresonance_test, truncation_k0, LinearPair};
use crate::system::DelaySystem;
use crate::trig::TrigPoly;

/// Smallest truncation degree used by the solver.
pub const MIN_DEGREE: usize = 8;

/// Harmonics kept above the linear truncation bound.
pub const DEGREE_HEADROOM: usize = 4;

/// Truncation degree `max(k0 + 4, 8, user)`.
pub fn choose_degree(lp: &LinearPair, user: Option<usize>) -> usize {
    (truncation_k0(lp) + DEGREE_HEADROOM)
        .max(MIN_DEGREE)
        .max(user.unwrap_or(0))
}

/// Why individual starts did not produce a record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartFailures {
    pub no_convergence: usize,
    pub singular_jacobian: usize,
    pub domain_escape: usize,
    pub left_domain: usize,
    pub other: usize,
}

impl StartFailures {
    fn record(&mut self, e: &Error) {
        match e {
            Error::NoConvergence { .. } => self.no_convergence += 1,
            Error::SingularJacobian { .. } => self.singular_jacobian += 1,
            Error::DomainEscape { .. } => self.domain_escape += 1,
            _ => self.other += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.no_convergence + self.singular_jacobian + self.domain_escape + self.left_domain + self.other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    /// Distinct solutions ordered by distance to the equilibrium.
    pub records: Vec<SolutionRecord>,
    /// The multiplicity bound, when the certificate defines it.
    pub gamma_expected: Option<u32>,
    /// Sum of local signs over the records.
    pub index_sum: i64,
    /// `(-1)^N chi`, the degree the local signs should add up to.
    pub chi_target: i64,
    pub degree: usize,
    pub rho: f64,
    pub delta_dup: f64,
    pub starts: usize,
    pub failures: StartFailures,
}

impl SolutionSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn near_equilibrium(&self) -> Option<&SolutionRecord> {
        self.records.iter().find(|r| r.near_equilibrium)
    }
}

/// `min(dist(e, boundary), user) / 4`.
pub fn near_equilibrium_radius(sys: &DelaySystem, dom: &PuncturedBall, user: Option<f64>) -> f64 {
    let d = dom.distance_to_boundary(sys.equilibrium()).max(0.0);
    user.map_or(d, |r| d.min(r)) / 4.0
}

/// Whether every fine-grid value of `u` lies in the closed domain.
pub fn stays_in_domain(dom: &PuncturedBall, u: &TrigPoly) -> bool {
    let n = u.dim();
    u.sample_grid(fine_grid_size(u.degree()))
        .chunks(n)
        .all(|x| dom.contains_closed(x))
}

/// Low-discrepancy constant starts in mirrored pairs `x, -x`. With holes,
/// half of them come from the smaller ball `|x| <= 2 max_j (|v_j| + r_j)`
/// where solutions crowd around the singular points; the rest cover the
/// whole domain.
fn constant_starts(sys: &DelaySystem, dom: &PuncturedBall, count: usize) -> Vec<TrigPoly> {
    let margin = 0.5 * dom.holes().iter().map(|h| h.radius).fold(0.0, f64::max);
    let core_radius = 2.0
        * dom
            .holes()
            .iter()
            .map(|h| euclid(&h.center) + h.radius)
            .fold(0.0, f64::max);
    let core = (core_radius > 0.0 && core_radius < dom.radius())
        .then(|| PuncturedBall::new(dom.dim(), core_radius, dom.holes().to_vec()).ok())
        .flatten();
    let points = match core {
        Some(core) => {
            let inner = count / 2;
            let mut pts = core.antithetic_samples(inner, margin);
            pts.extend(dom.antithetic_samples(count - pts.len(), margin));
            pts
        }
        None => dom.antithetic_samples(count, margin),
    };
    points
        .into_iter()
        .map(|x| TrigPoly::constant(&x, sys.period(), 0))
        .collect()
}

/// Random perturbation of `u` with decaying harmonics of relative size
/// `scale`.
fn perturb(u: &TrigPoly, scale: f64, rng: &mut ChaCha8Rng) -> TrigPoly {
    let mut v = u.clone();
    let n = u.dim();
    for (i, c) in v.coeffs_mut().iter_mut().enumerate() {
        let k = (i / n + 1) / 2;
        *c += scale * rng.gen_range(-1.0..1.0) / (1 + k * k) as f64;
    }
    v
}

enum Outcome {
    Found(SolutionRecord),
    LeftDomain,
    Failed(Error),
}

fn cmp_records(a: &SolutionRecord, b: &SolutionRecord) -> Ordering {
    a.distance_to_equilibrium
        .partial_cmp(&b.distance_to_equilibrium)
        .unwrap_or(Ordering::Equal)
        .then_with(|| {
            a.u.coeffs()
                .iter()
                .zip(b.u.coeffs())
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
}

/// Newton from many starts: the equilibrium, low-discrepancy constants in
/// the domain, then random perturbations of the solutions found so far.
///
/// Records leaving the closed domain are discarded; the rest are sorted by
/// `(|u - e|, coefficients)` and merged when closer than `1e-4 diam`. The
/// result does not depend on the execution policy.
pub fn multi_start_solve(
    sys: &DelaySystem,
    dom: &PuncturedBall,
    degree: usize,
    budget: usize,
    opts: &SolverOptions,
) -> Result<SolutionSet> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be at least 1".into()));
    }
    if dom.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: dom.dim(),
        });
    }
    let period = sys.period();
    let fine = fine_grid_size(degree);
    let delta_dup = 1e-4 * dom.diameter();
    let rho = near_equilibrium_radius(sys, dom, opts.rho);

    let run = |starts: &[TrigPoly]| -> Vec<Outcome> {
        exec::map_slice(opts.exec, starts, |s| match newton_solve(sys, s, degree, opts) {
            Ok(r) if stays_in_domain(dom, &r.u) => Outcome::Found(r),
            Ok(_) => Outcome::LeftDomain,
            Err(err) => Outcome::Failed(err),
        })
    };

    let mut failures = StartFailures::default();
    let mut found: Vec<SolutionRecord> = Vec::new();
    let mut absorb = |results: Vec<Outcome>, found: &mut Vec<SolutionRecord>| {
        for r in results {
            match r {
                Outcome::Found(rec) => found.push(rec),
                Outcome::LeftDomain => failures.left_domain += 1,
                Outcome::Failed(err) => failures.record(&err),
            }
        }
    };

    let phase_one = (budget - budget / 4).max(1);
    let mut starts = vec![TrigPoly::constant(sys.equilibrium(), period, 0)];
    starts.extend(constant_starts(sys, dom, phase_one - 1));
    let first = starts.len();
    absorb(run(&starts), &mut found);

    let extra = budget.saturating_sub(first);
    if extra > 0 {
        found.sort_by(|a, b| cmp_records(a, b));
        let seeds = dedup(std::mem::take(&mut found), delta_dup, fine);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let scale = 0.05 * dom.radius();
        let perturbed: Vec<TrigPoly> = if seeds.is_empty() {
            (0..extra)
                .map(|_| perturb(&TrigPoly::zeros(sys.dim(), period, 2), dom.radius(), &mut rng))
                .map(|u| u.axpy(1.0, &TrigPoly::constant(sys.equilibrium(), period, 2)))
                .collect()
        } else {
            (0..extra)
                .map(|i| perturb(&seeds[i % seeds.len()].u, scale, &mut rng))
                .collect()
        };
        found = seeds;
        absorb(run(&perturbed), &mut found);
    }

    found.sort_by(|a, b| cmp_records(a, b));
    let mut records = dedup(found, delta_dup, fine);
    for r in &mut records {
        r.near_equilibrium = r.distance_to_equilibrium < rho;
    }
    let lp = sys.linearisation();
    let chi = dom.euler_characteristic();
    let cert = nonresonance_test(lp, chi);
    Ok(SolutionSet {
        index_sum: records.iter().map(|r| r.local_sign as i64).sum(),
        records,
        gamma_expected: cert.gamma,
        chi_target: cert.total_degree(),
        degree,
        rho,
        delta_dup,
        starts: budget.max(first),
        failures,
    })
}

fn dedup(sorted: Vec<SolutionRecord>, delta: f64, fine: usize) -> Vec<SolutionRecord> {
    let mut kept: Vec<SolutionRecord> = Vec::new();
    for r in sorted {
        if kept.iter().all(|k| k.u.distance_on_grid(&r.u, fine) >= delta) {
            kept.push(r);
        }
    }
    kept
}

/// Result of bisecting on the forcing amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForcingProbe {
    /// Largest `|p|_inf` for which the branch through the equilibrium was
    /// followed successfully.
    pub last_success: f64,
    /// Smallest tested amplitude that failed, if any.
    pub first_failure: Option<f64>,
    pub bisections: usize,
}

/// Probes the forcing size below which Newton from the equilibrium still
/// converges to a solution within `rho` of it, by bisection on the scale
/// of the system's forcing up to `max_scale`.
///
/// Empirical only: the result is not a certified threshold.
pub fn probe_forcing_threshold(
    sys: &DelaySystem,
    dom: &PuncturedBall,
    degree: usize,
    max_scale: f64,
    bisections: usize,
    opts: &SolverOptions,
) -> Result<ForcingProbe> {
    let unit = sys.forcing().clone();
    let base = sys.forcing_sup();
    if base == 0.0 {
        return Err(Error::InvalidParameter("forcing is zero; nothing to probe".into()));
    }
    let rho = near_equilibrium_radius(sys, dom, opts.rho);
    let start = TrigPoly::constant(sys.equilibrium(), sys.period(), 0);
    let ok = |s: f64| -> Result<bool> {
        let scaled = sys.with_forcing(Some(unit.scaled(s)))?;
        Ok(match newton_solve(&scaled, &start, degree, opts) {
            Ok(r) => r.distance_to_equilibrium < rho && stays_in_domain(dom, &r.u),
            Err(_) => false,
        })
    };
    if ok(max_scale)? {
        return Ok(ForcingProbe {
            last_success: max_scale * base,
            first_failure: None,
            bisections: 0,
        });
    }
    let (mut lo, mut hi) = (0.0, max_scale);
    for _ in 0..bisections {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ForcingProbe {
        last_success: lo * base,
        first_failure: Some(hi * base),
        bisections,
    })
}

/// Defect check of an arbitrary candidate, exposed for diagnostics.
pub fn candidate_defect(sys: &DelaySystem, u: &TrigPoly) -> Result<f64> {
    time_defect(sys, u, fine_grid_size(u.degree()))
}

/// The transformed forcing at the solver's degree, exposed for reports.
pub fn forcing_transform(sys: &DelaySystem, degree: usize) -> TrigPoly {
    p_hat(sys, degree)
}

/// Random small trigonometric polynomial of sup-norm at most `amplitude`,
/// used to make a forcing generic.
pub fn random_forcing(dim: usize, period: f64, degree: usize, amplitude: f64, seed: u64) -> TrigPoly {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = TrigPoly::zeros(dim, period, degree);
    for c in p.coeffs_mut() {
        *c = rng.gen_range(-1.0..1.0);
    }
    let norm: f64 = (0..=degree)
        .map(|k| {
            if k == 0 {
                p.a0().iter().fold(0.0_f64, |a, v| a.max(v.abs()))
            } else {
                p.cos_coeff(k)
                    .iter()
                    .zip(p.sin_coeff(k))
                    .fold(0.0_f64, |a, (x, y)| a.max(x.abs() + y.abs()))
            }
        })
        .sum();
    p.scaled(amplitude / norm)
}
