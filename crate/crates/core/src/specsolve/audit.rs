//! Comparison of the local indices of found solutions with the degree
//! identities they must satisfy.

use serde::{Deserialize, Serialize};

use super::multistart::SolutionSet;
use crate::linalg::parity_sign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeAudit {
    pub found: usize,
    /// Sum of local signs over all records.
    pub index_sum: i64,
    /// `(-1)^N chi`.
    pub expected_total: i64,
    pub total_matches: bool,
    /// Local sign of the record inside the near-equilibrium ball.
    pub near_sign: Option<i8>,
    /// `s(A + B)` when defined.
    pub expected_near_sign: Option<i8>,
    /// `None` when either side is unavailable.
    pub near_matches: Option<bool>,
    pub gamma_expected: Option<u32>,
    /// The total-degree identity failed, so some zeros were likely missed
    /// (or are degenerate).
    pub missed_solutions: bool,
    pub passes: bool,
}

/// Audits `set` against `sum of local signs = (-1)^N chi` and, when `s_m`
/// is given, against `local sign at the equilibrium branch = s_m`.
///
/// The total identity only holds once every zero has been found and is
/// nondegenerate, so a mismatch is reported as missed solutions.
pub fn degree_audit(set: &SolutionSet, dim: usize, chi: i64, s_m: Option<i8>) -> DegreeAudit {
    let expected_total = parity_sign(dim) as i64 * chi;
    let index_sum: i64 = set.records.iter().map(|r| r.local_sign as i64).sum();
    let total_matches = index_sum == expected_total;
    let near_sign = set.near_equilibrium().map(|r| r.local_sign);
    let near_matches = match (near_sign, s_m) {
        (Some(a), Some(b)) => Some(a == b),
        _ => None,
    };
    DegreeAudit {
        found: set.records.len(),
        index_sum,
        expected_total,
        total_matches,
        near_sign,
        expected_near_sign: s_m,
        near_matches,
        gamma_expected: set.gamma_expected,
        missed_solutions: !total_matches,
        passes: total_matches && near_matches != Some(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specsolve::multistart::StartFailures;
    use crate::specsolve::SolutionRecord;
    use crate::trig::TrigPoly;

    fn set(signs: &[i8]) -> SolutionSet {
        let records: Vec<SolutionRecord> = signs
            .iter()
            .enumerate()
            .map(|(i, &s)| SolutionRecord {
                u: TrigPoly::constant(&[i as f64], 1.0, 0),
                residual_inf: 0.0,
                coeff_residual: 0.0,
                local_sign: s,
                near_equilibrium: i == 0,
                distance_to_equilibrium: i as f64,
                iterations: 1,
                floquet: None,
            })
            .collect();
        SolutionSet {
            index_sum: signs.iter().map(|&s| s as i64).sum(),
            records,
            gamma_expected: Some(1),
            chi_target: -1,
            degree: 0,
            rho: 0.5,
            delta_dup: 1e-4,
            starts: 1,
            failures: StartFailures::default(),
        }
    }

    #[test]
    fn single_scalar_record_passes() {
        let a = degree_audit(&set(&[-1]), 1, 1, Some(-1));
        assert!(a.passes && !a.missed_solutions);
    }

    #[test]
    fn empty_set_with_nonzero_degree_fails() {
        let a = degree_audit(&set(&[]), 2, -1, Some(1));
        assert!(!a.passes && a.missed_solutions);
        assert_eq!(a.near_matches, None);
    }

    #[test]
    fn wrong_near_sign_fails() {
        let a = degree_audit(&set(&[-1, 1, -1]), 2, -1, Some(1));
        assert!(a.total_matches);
        assert_eq!(a.near_matches, Some(false));
        assert!(!a.passes);
    }
}
