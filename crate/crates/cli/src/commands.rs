//! The five analysis commands. Each fills in its sections of the report
//! and sets the status; execution errors propagate.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context, Result};

use dde_periodic::domain::{tau_star, verify_inward, PuncturedBall};
use dde_periodic::linalg::parity_sign;
use dde_periodic::linan::{nonresonance_test, resonance_scan, small_delay_eigentest};
use dde_periodic::specsolve::{
    choose_degree, degree_audit, fine_grid_size, multi_start_solve, probe_forcing_threshold, SolutionSet,
};
use dde_periodic::timedomain::{characteristic_positive_root, floquet_report, ode_poincare_degree, write_csv};
use dde_periodic::{DelaySystem, Error, Execution, TrigPoly};

use crate::config::RunConfig;
use crate::report::{
    CertificateSection, DomainSection, FloquetSection, ForcingRegime, Report, SolutionSection, SolutionSummary,
    Status,
};

/// Bisection steps when probing the forcing threshold.
const PROBE_BISECTIONS: usize = 12;

pub struct RunContext<'a> {
    pub config: &'a RunConfig,
    pub out: &'a Path,
    pub force: bool,
}

fn certificate(cfg: &RunConfig, report: &mut Report) -> Result<bool> {
    let lp = cfg.linear_pair()?;
    let chi = cfg.chi()?;
    let mut cert = nonresonance_test(&lp, chi);
    if !cert.nonresonant {
        // the multiplicity bound only holds for a nonresonant linearisation
        cert.gamma = None;
    }
    let eigentest = small_delay_eigentest(&lp.sum(), lp.period());
    let scan = match &cfg.scan {
        Some(s) => Some(resonance_scan(lp.a(), lp.b(), lp.tau(), s.t_lo, s.t_hi, s.steps, Execution::Parallel)?),
        None => None,
    };
    let ok = cert.nonresonant && cert.gamma.is_some();
    if let Some(k) = cert.failing_k {
        report.messages.push(format!("resonant at harmonic k = {k}: no multiplicity claim is made"));
    }
    if cert.sign_s.is_none() {
        report
            .messages
            .push(format!("{}", Error::DegenerateCertificate { det: cert.det_sum }));
    }
    report.certificate = Some(CertificateSection {
        certificate: cert,
        small_delay_eigentest: eigentest,
        scan,
    });
    report.set_status(report.status.and(ok));
    Ok(ok)
}

pub fn analyze(ctx: &RunContext, report: &mut Report) -> Result<()> {
    certificate(ctx.config, report)?;
    Ok(())
}

fn domain_section(cfg: &RunConfig, sys: &DelaySystem, dom: &PuncturedBall) -> DomainSection {
    let opts = cfg.sampling_options();
    let inward = verify_inward(sys, dom, cfg.tau, &opts);
    let star = tau_star(sys, dom, &opts).ok();
    let tau_admissible = star.is_some_and(|s| cfg.tau <= s.tau_star);
    DomainSection {
        euler_characteristic: dom.euler_characteristic(),
        hole_count: dom.hole_count(),
        radius: dom.radius(),
        inward,
        tau_star: star,
        tau_admissible,
    }
}

pub fn verify_domain(ctx: &RunContext, report: &mut Report) -> Result<()> {
    let cfg = ctx.config;
    let dom = cfg.domain()?.context("domain: verify-domain needs a [domain] table")?;
    let sys = cfg.system()?.with_forcing(None)?;
    let section = domain_section(cfg, &sys, &dom);
    let ok = section.inward.passes();
    report.domain_verification = Some(section);
    report.require(ok, "boundary field does not point inward on every sample");
    Ok(())
}

fn write_solution_csv(dir: &Path, index: usize, u: &TrigPoly) -> Result<String> {
    let name = format!("solution_{index}.csv");
    let path = dir.join(&name);
    let rows = fine_grid_size(u.degree());
    let values: Vec<(f64, Vec<f64>)> = (0..=rows)
        .map(|i| {
            let t = u.period() * i as f64 / rows as f64;
            (t, u.evaluate(t))
        })
        .collect();
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(BufWriter::new(file), u.dim(), values.iter().map(|(t, v)| (*t, v.as_slice())))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(name)
}

fn solve_section(ctx: &RunContext, sys: &DelaySystem, dom: &PuncturedBall, report: &mut Report) -> Result<SolutionSet> {
    let cfg = ctx.config;
    let degree = choose_degree(sys.linearisation(), cfg.solver.degree);
    let set = multi_start_solve(sys, dom, degree, cfg.solver.budget, &cfg.solver_options())?;
    let mut records = Vec::with_capacity(set.len());
    for (i, r) in set.records.iter().enumerate() {
        let csv = write_solution_csv(ctx.out, i, &r.u)?;
        records.push(SolutionSummary::new(i, csv, r));
    }
    report.solutions = Some(SolutionSection {
        count: set.len(),
        gamma_expected: set.gamma_expected,
        degree: set.degree,
        budget: cfg.solver.budget,
        starts: set.starts,
        rho: set.rho,
        delta_dup: set.delta_dup,
        max_residual: set.records.iter().map(|r| r.residual_inf).fold(0.0, f64::max),
        failures: set.failures.clone(),
        records,
    });
    let cert = report.certificate.as_ref().map(|c| &c.certificate);
    let audit = degree_audit(&set, sys.dim(), dom.euler_characteristic(), cert.and_then(|c| c.sign_s));
    if audit.missed_solutions {
        report.messages.push(format!(
            "local signs add up to {} instead of {}: some solutions were likely missed",
            audit.index_sum, audit.expected_total
        ));
    }
    if audit.near_matches == Some(false) {
        report
            .messages
            .push("local sign of the near-equilibrium solution differs from s(A+B)".into());
    }
    report.set_status(report.status.and(audit.passes));
    report.degree_audit = Some(audit);
    Ok(set)
}

pub fn solve(ctx: &RunContext, report: &mut Report) -> Result<()> {
    let cfg = ctx.config;
    let dom = cfg.domain()?.context("domain: solve needs a [domain] table")?;
    let certified = certificate(cfg, report)?;
    if !certified && !ctx.force {
        report.messages.push("solve refused: the certificate failed (use --force to run anyway)".into());
        report.set_status(Status::Refused);
        return Ok(());
    }
    let sys = cfg.system()?;
    solve_section(ctx, &sys, &dom, report)?;
    Ok(())
}

pub fn floquet(ctx: &RunContext, report: &mut Report) -> Result<()> {
    let cfg = ctx.config;
    let lp = cfg.linear_pair()?;
    let n = lp.dim();
    let m = cfg.integrator.m;
    let floquet = match floquet_report(&lp, m, Execution::Parallel) {
        Ok(r) => Some(r),
        Err(e @ (Error::ResonantLinearisation { .. } | Error::DelayExceedsPeriod { .. })) => {
            report.messages.push(e.to_string());
            None
        }
        Err(e) => return Err(e.into()),
    };
    let s = nonresonance_test(&lp, 1).sign_s;
    let expected_index = s.map(|s| parity_sign(n) as i8 * s);
    let index_agreement = match (&floquet, expected_index) {
        (Some(f), Some(e)) => Some(f.index == e),
        _ => None,
    };
    if index_agreement == Some(false) {
        report
            .messages
            .push("period-map index differs from (-1)^N s(A+B); expected only for small delays".into());
    }
    let ode_degree = if lp.tau() == 0.0 {
        match ode_poincare_degree(&lp.sum(), lp.period()) {
            Ok(d) => Some(d),
            Err(e @ Error::FloquetOne { .. }) => {
                report.messages.push(e.to_string());
                None
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let characteristic = characteristic_positive_root(&lp);
    if let Some(root) = characteristic.positive_root {
        report
            .messages
            .push(format!("h(0) < 0: positive characteristic root near {root:.6}, the equilibrium is unstable"));
    }
    let ok = floquet.is_some() && (lp.tau() > 0.0 || ode_degree.is_some_and(|d| d.consistent));
    report.floquet = Some(FloquetSection {
        nodes: m,
        report: floquet,
        expected_index,
        index_agreement,
        ode_degree,
        characteristic,
    });
    report.set_status(report.status.and(ok));
    Ok(())
}

pub fn example(ctx: &RunContext, report: &mut Report) -> Result<()> {
    let cfg = ctx.config;
    let params = cfg.example_params()?;
    let j = params.hole_count();
    let dom = cfg.domain()?.context("domain: the example needs a [domain] table")?;
    let sys = cfg.system()?;
    let unforced = sys.with_forcing(None)?;

    let section = domain_section(cfg, &unforced, &dom);
    report.require(section.inward.passes(), "boundary field does not point inward on every sample");
    report.domain_verification = Some(section);

    certificate(cfg, report)?;
    let gamma = report.certificate.as_ref().and_then(|c| c.certificate.gamma);
    let set = solve_section(ctx, &sys, &dom, report)?;
    let found = set.len();
    report.headline = Some(format!(
        "found {found} of expected \u{393} = J+1 = {}",
        j + 1
    ));
    if gamma != Some(j as u32 + 1) {
        report
            .messages
            .push(format!("certificate gives Gamma = {gamma:?}, not J+1 = {}", j + 1));
    }

    let forcing_sup = sys.forcing_sup();
    if forcing_sup > 0.0 {
        let degree = choose_degree(sys.linearisation(), cfg.solver.degree);
        let probe = probe_forcing_threshold(&sys, &dom, degree, 1.0, PROBE_BISECTIONS, &cfg.solver_options())?;
        let small = probe.first_failure.is_none();
        let note = if small {
            "small-forcing regime: the branch through the equilibrium persists".to_string()
        } else {
            "outside small-forcing regime".to_string()
        };
        if !small {
            report.messages.push(note.clone());
        }
        report.forcing_regime = Some(ForcingRegime {
            forcing_sup,
            probe,
            small_forcing: small,
            note,
        });
    }
    let enough = gamma.is_some_and(|g| found >= g as usize);
    if !enough {
        report.messages.push(format!("found fewer solutions than Gamma = {gamma:?}"));
    }
    report.set_status(report.status.and(enough));
    Ok(())
}

pub fn run(command: &str, ctx: &RunContext, report: &mut Report) -> Result<()> {
    match command {
        "analyze" => analyze(ctx, report),
        "verify-domain" => verify_domain(ctx, report),
        "solve" => solve(ctx, report),
        "floquet" => floquet(ctx, report),
        "example" => example(ctx, report),
        other => bail!("unknown command {other}"),
    }
}
