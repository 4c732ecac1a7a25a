//! Run configuration: a TOML file describing the system, the domain, the
//! forcing and the numerical settings of one analysis run.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use dde_periodic::domain::{example_system, ExampleParams, Hole, PuncturedBall, SamplingOptions};
use dde_periodic::linan::LinearPair;
use dde_periodic::specsolve::SolverOptions;
use dde_periodic::timedomain::DEFAULT_NODES;
use dde_periodic::{DelaySystem, Execution, LinearField, TrigPoly};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: f64,
    pub period: f64,
    #[serde(default)]
    pub seed: u64,
    pub system: SystemSpec,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    /// Euler characteristic to use when no domain is given.
    #[serde(default)]
    pub chi: Option<i64>,
    #[serde(default)]
    pub forcing: Option<ForcingSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub sampling: SamplingSpec,
    #[serde(default)]
    pub scan: Option<ScanSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSpec {
    /// `g(x, y) = A x + B y`, rows of `A` and `B`.
    Linear { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
    /// The built-in singular example with poles at `centers`.
    Example(ExampleSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "one")]
    pub d: f64,
    /// Number of poles; ignored when `centers` is given.
    #[serde(default)]
    pub holes: Option<usize>,
    #[serde(default)]
    pub centers: Option<Vec<Vec<f64>>>,
    /// Pole weights, default 1 each.
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    /// Pole exponents, default 3 each.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    /// Terms with index below `j0` read the current state; default: all.
    #[serde(default)]
    pub j0: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub radius: f64,
    #[serde(default)]
    pub holes: Vec<HoleSpec>,
    /// Common hole radius around the poles of the example.
    #[serde(default)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// `p(t) = amplitude (a0 + sum_k cos[k-1] cos(l_k t) + sin[k-1] sin(l_k t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub a0: Option<Vec<f64>>,
    #[serde(default)]
    pub cos: Vec<Vec<f64>>,
    #[serde(default)]
    pub sin: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// Truncation degree `K`; chosen from the linearisation when absent.
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol_newton")]
    pub tol_newton: f64,
    #[serde(default)]
    pub tol_res: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "yes")]
    pub analytic_jacobian: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            degree: None,
            budget: default_budget(),
            max_iter: default_max_iter(),
            tol_newton: default_tol_newton(),
            tol_res: None,
            rho: None,
            analytic_jacobian: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    /// History nodes per delay interval; the step is `tau / m`.
    #[serde(default = "default_nodes")]
    pub m: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        Self { m: default_nodes() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_boundary")]
    pub boundary: usize,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_sup_samples")]
    pub sup_samples: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        let d = SamplingOptions::default();
        Self {
            boundary: d.boundary,
            directions: d.directions,
            sup_samples: d.sup_samples,
        }
    }
}

/// Resonance margin over a range of periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub t_lo: f64,
    pub t_hi: f64,
    pub steps: usize,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_dim() -> usize {
    2
}
fn default_budget() -> usize {
    64
}
fn default_max_iter() -> usize {
    SolverOptions::default().max_iter
}
fn default_tol_newton() -> f64 {
    SolverOptions::default().tol_newton
}
fn default_nodes() -> usize {
    DEFAULT_NODES
}
fn default_boundary() -> usize {
    SamplingOptions::default().boundary
}
fn default_directions() -> usize {
    SamplingOptions::default().directions
}
fn default_sup_samples() -> usize {
    SamplingOptions::default().sup_samples
}

/// The planar two-pole example at desk scale.
pub fn example_default() -> RunConfig {
    RunConfig {
        tau: 1e-4,
        period: 1.0,
        seed: 0,
        system: SystemSpec::Example(ExampleSpec {
            dim: 2,
            d: 1.0,
            holes: Some(2),
            centers: None,
            a: None,
            alpha: None,
            j0: None,
        }),
        domain: Some(DomainSpec {
            radius: 4.0,
            holes: Vec::new(),
            eta: Some(0.1),
        }),
        chi: None,
        forcing: Some(ForcingSpec {
            amplitude: 1e-3,
            a0: None,
            cos: vec![vec![1.0, 0.0]],
            sin: vec![vec![0.0, 1.0]],
        }),
        solver: SolverSpec::default(),
        integrator: IntegratorSpec::default(),
        sampling: SamplingSpec::default(),
        scan: None,
    }
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    ensure!(n > 0, "{field}: matrix must have at least one row");
    for (i, r) in rows.iter().enumerate() {
        ensure!(r.len() == n, "{field}: row {i} has {} entries, expected {n} (square matrix)", r.len());
        ensure!(r.iter().all(|v| v.is_finite()), "{field}: row {i} has a non-finite entry");
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn finite(value: f64, field: &str) -> Result<()> {
    ensure!(value.is_finite(), "{field}: must be finite (got {value})");
    Ok(())
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        match &self.system {
            SystemSpec::Linear { a, .. } => a.len(),
            SystemSpec::Example(e) => e.dim,
        }
    }

    /// Checks every field against the constraints of the library, with the
    /// offending key in the message.
    pub fn validate(&self) -> Result<()> {
        finite(self.tau, "tau")?;
        finite(self.period, "period")?;
        ensure!(self.tau >= 0.0, "tau: must be >= 0 (got {})", self.tau);
        ensure!(self.period > 0.0, "period: must be > 0 (got {})", self.period);
        let n = self.dim();
        match &self.system {
            SystemSpec::Linear { a, b } => {
                let a = matrix(a, "system.a")?;
                let b = matrix(b, "system.b")?;
                ensure!(a.nrows() == b.nrows(), "system.b: must be {n}x{n} like system.a");
            }
            SystemSpec::Example(_) => {
                self.example_params()?.validate().context("system")?;
                ensure!(self.domain.is_some(), "domain: the example needs a [domain] table");
            }
        }
        if let Some(d) = &self.domain {
            finite(d.radius, "domain.radius")?;
            ensure!(d.radius > 0.0, "domain.radius: must be > 0 (got {})", d.radius);
            for (j, h) in d.holes.iter().enumerate() {
                ensure!(h.center.len() == n, "domain.holes[{j}].center: expected {n} coordinates");
                ensure!(h.radius > 0.0, "domain.holes[{j}].radius: must be > 0");
            }
            if let Some(eta) = d.eta {
                ensure!(eta > 0.0 && eta.is_finite(), "domain.eta: must be > 0 (got {eta})");
            }
            if let Some(chi) = self.chi {
                let dom = self.domain()?.expect("domain present");
                ensure!(
                    chi == dom.euler_characteristic(),
                    "chi: {chi} contradicts the domain's Euler characteristic {}",
                    dom.euler_characteristic()
                );
            }
        }
        if let Some(f) = &self.forcing {
            finite(f.amplitude, "forcing.amplitude")?;
            ensure!(f.amplitude >= 0.0, "forcing.amplitude: must be >= 0 (got {})", f.amplitude);
            if let Some(a0) = &f.a0 {
                ensure!(a0.len() == n, "forcing.a0: expected {n} entries, got {}", a0.len());
            }
            for (name, list) in [("cos", &f.cos), ("sin", &f.sin)] {
                for (k, c) in list.iter().enumerate() {
                    ensure!(c.len() == n, "forcing.{name}[{k}]: expected {n} entries, got {}", c.len());
                    ensure!(c.iter().all(|v| v.is_finite()), "forcing.{name}[{k}]: non-finite entry");
                }
            }
        }
        let s = &self.solver;
        ensure!(s.budget >= 1, "solver.budget: must be >= 1");
        ensure!(s.max_iter >= 1, "solver.max_iter: must be >= 1");
        ensure!(s.tol_newton > 0.0, "solver.tol_newton: must be > 0");
        if let Some(t) = s.tol_res {
            ensure!(t > 0.0, "solver.tol_res: must be > 0");
        }
        if let Some(r) = s.rho {
            ensure!(r > 0.0, "solver.rho: must be > 0");
        }
        ensure!(self.integrator.m >= 1, "integrator.m: must be >= 1");
        ensure!(self.sampling.boundary >= 1, "sampling.boundary: must be >= 1");
        ensure!(self.sampling.directions >= 1, "sampling.directions: must be >= 1");
        ensure!(self.sampling.sup_samples >= 1, "sampling.sup_samples: must be >= 1");
        if let Some(sc) = &self.scan {
            ensure!(
                sc.t_lo > 0.0 && sc.t_hi > sc.t_lo && sc.steps >= 2,
                "scan: need 0 < t_lo < t_hi and steps >= 2"
            );
        }
        Ok(())
    }

    pub fn example_params(&self) -> Result<ExampleParams> {
        let SystemSpec::Example(e) = &self.system else {
            bail!("system.kind: this command needs kind = \"example\"");
        };
        let centers = match (&e.centers, e.holes) {
            (Some(c), _) => c.clone(),
            (None, Some(j)) => default_centers(e.dim, j)?,
            (None, None) => bail!("system: give either centers or holes"),
        };
        let j = centers.len();
        Ok(ExampleParams {
            dim: e.dim,
            d: e.d,
            a: e.a.clone().unwrap_or_else(|| vec![1.0; j]),
            alpha: e.alpha.clone().unwrap_or_else(|| vec![3.0; j]),
            centers,
            j0: e.j0.unwrap_or(j),
        })
    }

    /// The domain, when one is configured. For the example the holes sit on
    /// the poles with radius `eta`.
    pub fn domain(&self) -> Result<Option<PuncturedBall>> {
        let Some(d) = &self.domain else {
            return Ok(None);
        };
        let n = self.dim();
        let dom = match &self.system {
            SystemSpec::Example(_) if d.holes.is_empty() => {
                let eta = d.eta.context("domain.eta: required for the example when no holes are listed")?;
                PuncturedBall::with_common_hole_radius(n, d.radius, &self.example_params()?.centers, eta)
            }
            _ => PuncturedBall::new(
                n,
                d.radius,
                d.holes
                    .iter()
                    .map(|h| Hole {
                        center: h.center.clone(),
                        radius: h.radius,
                    })
                    .collect(),
            ),
        };
        Ok(Some(dom.context("domain")?))
    }

    /// Euler characteristic from the domain, or the manual `chi`.
    pub fn chi(&self) -> Result<i64> {
        match (self.domain()?, self.chi) {
            (Some(dom), _) => Ok(dom.euler_characteristic()),
            (None, Some(chi)) => Ok(chi),
            (None, None) => bail!("chi: give a [domain] table or a manual chi"),
        }
    }

    pub fn forcing(&self) -> Result<Option<TrigPoly>> {
        let Some(f) = &self.forcing else {
            return Ok(None);
        };
        let n = self.dim();
        let degree = f.cos.len().max(f.sin.len());
        let mut p = TrigPoly::zeros(n, self.period, degree);
        if let Some(a0) = &f.a0 {
            p.a0_mut().copy_from_slice(a0);
        }
        for (k, c) in f.cos.iter().enumerate() {
            p.cos_coeff_mut(k + 1).copy_from_slice(c);
        }
        for (k, s) in f.sin.iter().enumerate() {
            p.sin_coeff_mut(k + 1).copy_from_slice(s);
        }
        Ok(Some(p.scaled(f.amplitude)))
    }

    pub fn system(&self) -> Result<DelaySystem> {
        let forcing = self.forcing()?;
        match &self.system {
            SystemSpec::Linear { a, b } => {
                let (a, b) = (matrix(a, "system.a")?, matrix(b, "system.b")?);
                let n = a.nrows();
                DelaySystem::with_jacobians(
                    Arc::new(LinearField::new(a.clone(), b.clone())),
                    self.tau,
                    self.period,
                    forcing,
                    vec![0.0; n],
                    a,
                    b,
                )
                .context("system")
            }
            SystemSpec::Example(_) => {
                let dom = self.domain()?.context("domain: the example needs a [domain] table")?;
                example_system(&self.example_params()?, &dom, self.tau, self.period, forcing).context("system")
            }
        }
    }

    pub fn linear_pair(&self) -> Result<LinearPair> {
        Ok(self.system()?.linearisation().clone())
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            max_iter: s.max_iter,
            tol_newton: s.tol_newton,
            tol_res: s.tol_res,
            rho: s.rho,
            analytic_jacobian: s.analytic_jacobian,
            seed: self.seed,
            exec: Execution::Parallel,
            ..SolverOptions::default()
        }
    }

    pub fn sampling_options(&self) -> SamplingOptions {
        SamplingOptions {
            boundary: self.sampling.boundary,
            directions: self.sampling.directions,
            sup_samples: self.sampling.sup_samples,
            exec: Execution::Parallel,
        }
    }
}

/// `J` poles evenly spaced on the circle of radius 1/2 in the first two
/// coordinates (on the line for `N = 1`, where `J <= 2`).
fn default_centers(dim: usize, j: usize) -> Result<Vec<Vec<f64>>> {
    ensure!(j >= 1, "system.holes: need at least one pole");
    ensure!(dim >= 2 || j <= 2, "system.holes: at most 2 poles fit on the line; list centers instead");
    Ok((0..j)
        .map(|i| {
            let angle = 2.0 * PI * i as f64 / j as f64;
            let mut c = vec![0.0; dim];
            c[0] = 0.5 * angle.cos();
            if dim >= 2 {
                c[1] = 0.5 * angle.sin();
            }
            // exact zeros keep the configuration symmetric
            for v in &mut c {
                if v.abs() < 1e-15 {
                    *v = 0.0;
                }
            }
            c
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_example_round_trips_through_toml() {
        let cfg = example_default();
        cfg.validate().unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn default_centres_match_the_planar_example() {
        assert_eq!(
            default_centers(2, 2).unwrap(),
            vec![vec![0.5, 0.0], vec![-0.5, 0.0]]
        );
        assert_eq!(default_centers(1, 1).unwrap(), vec![vec![0.5]]);
        assert!(default_centers(1, 3).is_err());
    }

    #[test]
    fn field_errors_name_the_key() {
        let mut cfg = example_default();
        cfg.forcing.as_mut().unwrap().amplitude = -1.0;
        let msg = format!("{:#}", cfg.validate().unwrap_err());
        assert!(msg.contains("forcing.amplitude"), "{msg}");

        let text = "tau = 0.1\nperiod = 1.0\n[system]\nkind = \"linear\"\na = [[1.0, 0.0]]\nb = [[0.0]]\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        let msg = format!("{:#}", cfg.validate().unwrap_err());
        assert!(msg.contains("system.a"), "{msg}");
    }

    #[test]
    fn forcing_is_scaled_by_the_amplitude() {
        let cfg = example_default();
        let p = cfg.forcing().unwrap().unwrap();
        assert_eq!(p.cos_coeff(1), &[1e-3, 0.0]);
        assert_eq!(p.sin_coeff(1), &[0.0, 1e-3]);
    }
}
