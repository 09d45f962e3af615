//! Statistics and cross-validation: empirical CDFs and KS distances, MSD and tail-index
//! estimators, occupation measures, the marginal-law identity check, and pre-limit convergence.
//!
//! Every estimator is deterministic given its inputs and seed.

mod lawcheck;
mod occupation;
mod prelimit;
mod stats;

pub use lawcheck::{proposition_law_check, LawBranch, LawCheck};
pub use occupation::{occupation_measure, simulate_occupation, OccupationEstimate, OccupationGrid};
pub use prelimit::{limit_sample, prelimit_convergence, simulate_prelimit, PrelimitSample, DEFAULT_RENEWAL_BUDGET};
pub use stats::{
    default_hill_k, empirical_cdf, hill_tail_index, ks_against, ks_distance, ks_noise_floor, log_log_slope, msd, Ecdf,
    HillEstimate, MeanEstimate,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One estimator result in serializable form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: String,
    /// sha256 of the JSON-serialized inputs.
    pub inputs_digest: String,
    pub value: f64,
    pub se: Option<f64>,
    pub verdict: Option<bool>,
}

impl EstimatorReport {
    pub fn new<I: Serialize>(estimator: impl Into<String>, inputs: &I, value: f64, se: Option<f64>, verdict: Option<bool>) -> Self {
        Self { estimator: estimator.into(), inputs_digest: digest_json(inputs), value, se, verdict }
    }
}

/// Hex sha256 of a value's canonical JSON form.
pub fn digest_json<I: Serialize>(inputs: &I) -> String {
    let bytes = serde_json::to_vec(inputs).unwrap_or_default();
    hex(&Sha256::digest(&bytes))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_digest_is_stable() {
        let a = EstimatorReport::new("msd", &(1.0, "x"), 2.0, Some(0.1), Some(true));
        let b = EstimatorReport::new("msd", &(1.0, "x"), 2.0, Some(0.1), Some(true));
        assert_eq!(a.inputs_digest, b.inputs_digest);
        assert_eq!(a.inputs_digest.len(), 64);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"inputs_digest\""));
    }
}
