//! The JSON report written by every command.
//!
//! Reports carry no timestamps or host data, so the same configuration and
//! seed produce byte-identical files on the same build.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use dde_periodic::domain::{InwardReport, TauStar};
use dde_periodic::linan::{Certificate, EigenTest, ScanPoint};
use dde_periodic::specsolve::{DegreeAudit, ForcingProbe, SolutionRecord, StartFailures};
use dde_periodic::timedomain::{CharacteristicCheck, FloquetReport, OdeDegree};

use crate::config::RunConfig;

/// Bumped whenever a field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    CertificateFailed,
    /// The command declined to run its main step.
    Refused,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::CertificateFailed | Status::Refused => 2,
        }
    }

    pub fn and(self, ok: bool) -> Status {
        match (self, ok) {
            (Status::Pass, false) => Status::CertificateFailed,
            (s, _) => s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub status: Status,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub headline: Option<String>,
    pub messages: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain_verification: Option<DomainSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solutions: Option<SolutionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree_audit: Option<DegreeAudit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub floquet: Option<FloquetSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forcing_regime: Option<ForcingRegime>,
    pub provenance: Provenance,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig, threads: Option<usize>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            status: Status::Pass,
            exit_code: 0,
            headline: None,
            messages: Vec::new(),
            certificate: None,
            domain_verification: None,
            solutions: None,
            degree_audit: None,
            floquet: None,
            forcing_regime: None,
            provenance: Provenance {
                tool: env!("CARGO_PKG_NAME").to_string(),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                library_version: dde_periodic::VERSION.to_string(),
                parallel_feature: cfg!(feature = "parallel"),
                threads,
                seed: config.seed,
                config: config.clone(),
            },
        }
    }

    pub fn set_status(&mut self, status: Status) {
        self.status = status;
        self.exit_code = status.exit_code();
    }

    pub fn require(&mut self, ok: bool, message: impl Into<String>) {
        if !ok {
            self.messages.push(message.into());
        }
        self.set_status(self.status.and(ok));
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).context("serialising report")?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        std::fs::write(&path, self.to_json()?).with_context(|| format!("writing {}", path.display()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateSection {
    #[serde(flatten)]
    pub certificate: Certificate,
    /// Eigenvalue test on `A + B` for the undelayed limit.
    pub small_delay_eigentest: EigenTest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<Vec<ScanPoint>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainSection {
    pub euler_characteristic: i64,
    pub hole_count: usize,
    pub radius: f64,
    pub inward: InwardReport,
    /// `None` when the undelayed boundary condition already fails.
    pub tau_star: Option<TauStar>,
    pub tau_admissible: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSummary {
    pub index: usize,
    pub csv: String,
    pub residual_inf: f64,
    pub coeff_residual: f64,
    pub local_sign: i8,
    pub near_equilibrium: bool,
    pub distance_to_equilibrium: f64,
    pub iterations: usize,
    pub mean: Vec<f64>,
    /// Interleaved `[a0 | a1 | b1 | ...]` coefficients, `N` values each.
    pub coefficients: Vec<f64>,
}

impl SolutionSummary {
    pub fn new(index: usize, csv: String, r: &SolutionRecord) -> Self {
        Self {
            index,
            csv,
            residual_inf: r.residual_inf,
            coeff_residual: r.coeff_residual,
            local_sign: r.local_sign,
            near_equilibrium: r.near_equilibrium,
            distance_to_equilibrium: r.distance_to_equilibrium,
            iterations: r.iterations,
            mean: r.u.a0().to_vec(),
            coefficients: r.u.coeffs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionSection {
    pub count: usize,
    pub gamma_expected: Option<u32>,
    pub degree: usize,
    pub budget: usize,
    pub starts: usize,
    pub rho: f64,
    pub delta_dup: f64,
    pub max_residual: f64,
    pub failures: StartFailures,
    pub records: Vec<SolutionSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FloquetSection {
    pub nodes: usize,
    /// `None` when a multiplier sits on 1 (see `messages`).
    pub report: Option<FloquetReport>,
    /// `(-1)^N s(A + B)`, the index the period map should have for small
    /// delays.
    pub expected_index: Option<i8>,
    /// Disagreement is reported, not treated as a failure: it is only
    /// guaranteed for small delays.
    pub index_agreement: Option<bool>,
    /// Degree of `I - e^(T (A + B))` when `tau = 0`.
    pub ode_degree: Option<OdeDegree>,
    pub characteristic: CharacteristicCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct ForcingRegime {
    pub forcing_sup: f64,
    pub probe: ForcingProbe,
    pub small_forcing: bool,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub library_version: String,
    pub parallel_feature: bool,
    /// Worker cap from `--threads`; results do not depend on it.
    pub threads: Option<usize>,
    pub seed: u64,
    /// The effective configuration, defaults filled in.
    pub config: RunConfig,
}
