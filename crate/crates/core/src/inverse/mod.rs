//! Reconstruction of the degeneracy point from boundary-flux observations.
//!
//! The observable is `μ(a, t) = u_x(1, t)`. Given samples `β(t_k)` the point
//! `a` is recovered by minimising
//!
//! ```text
//! J(a) = ½ Σ_k |β(t_k) - μ(a, t_k)|²
//! ```
//!
//! over the admissible interval `(δ, 1 - δ)`. Around that sit the diagnostic
//! tools: Lipschitz-stability audits, monotonicity scans of `a ↦ μ(a, t)`,
//! eigenvalue aliasing pairs and single-time observation collisions.

mod alias;
mod minimize;
mod noise;
mod stability;

pub use alias::{alias_pair, collision_level, observation_collision, observation_collision_with};
pub use minimize::{minimize, InversionConfig, InversionResult, Iterate, StartOutcome, COST_FLOOR};
pub use noise::{add_noise, NoiseDistribution, NoiseSpec};
pub use stability::{
    lipschitz_audit, lipschitz_audit_with, monotonicity_scan, monotonicity_scan_with, stability_constant,
    threshold_time, Direction, MonotonicityReport, StabilityReport,
};

use serde::{Deserialize, Serialize};

use crate::bessel::BesselTable;
use crate::error::{domain, Result};
use crate::initial_data::InitialProfile;
use crate::spectral::{TraceEvaluator, TruncationPolicy};

/// Forward map `a ↦ μ(a, ·)` for a fixed initial datum.
#[derive(Debug, Clone, Copy)]
pub struct TraceModel<'a> {
    pub profile: &'a InitialProfile,
    pub table: &'a BesselTable,
    pub policy: TruncationPolicy,
}

impl<'a> TraceModel<'a> {
    pub fn new(profile: &'a InitialProfile, table: &'a BesselTable) -> Self {
        Self {
            profile,
            table,
            policy: TruncationPolicy {
                max_terms: table.capacity().min(TruncationPolicy::default().max_terms),
                ..TruncationPolicy::default()
            },
        }
    }

    pub fn with_policy(self, policy: TruncationPolicy) -> Self {
        Self { policy, ..self }
    }

    pub fn evaluator(&self, a: f64) -> Result<TraceEvaluator<'a>> {
        TraceEvaluator::new(self.profile, a, self.table, self.policy)
    }

    /// `μ(a, t)`.
    pub fn mu(&self, a: f64, t: f64) -> Result<f64> {
        Ok(self.evaluator(a)?.trace(t)?.value)
    }

    /// `∂_a μ(a, t)`.
    pub fn mu_da(&self, a: f64, t: f64) -> Result<f64> {
        Ok(self.evaluator(a)?.trace_da(t)?.value)
    }
}

/// Boundary-flux samples `β(t_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub noise: NoiseSpec,
    pub provenance: String,
}

impl ObservationSet {
    pub fn new(times: Vec<f64>, values: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        let obs = Self {
            times,
            values,
            noise: NoiseSpec::none(),
            provenance: provenance.into(),
        };
        obs.validate()?;
        Ok(obs)
    }

    /// Noise-free samples of `μ(a_true, t)` at `times`.
    pub fn synthetic(model: &TraceModel<'_>, a_true: f64, times: &[f64]) -> Result<Self> {
        let mut ev = model.evaluator(a_true)?;
        let values = times
            .iter()
            .map(|&t| ev.trace(t).map(|v| v.value))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            times.to_vec(),
            values,
            format!("synthetic: u0={}, a_true={a_true}", model.profile),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.values.len() {
            return domain(format!(
                "observation set needs equal, nonzero numbers of times and values ({} vs {})",
                self.times.len(),
                self.values.len()
            ));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return domain("observation times must be strictly increasing");
        }
        if self.times.iter().chain(&self.values).any(|v| !v.is_finite()) {
            return domain("observation times and values must be finite");
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// `J(a) = ½ Σ_k (β_k - μ(a, t_k))²`.
pub fn cost(model: &TraceModel<'_>, a: f64, obs: &ObservationSet) -> Result<f64> {
    obs.validate()?;
    let mut ev = model.evaluator(a)?;
    let mut total = 0.0;
    for (&t, &beta) in obs.times.iter().zip(&obs.values) {
        let r = beta - ev.trace(t)?.value;
        total += r * r;
    }
    Ok(0.5 * total)
}

/// `J'(a) = -Σ_k (β_k - μ(a, t_k)) ∂_a μ(a, t_k)`.
pub fn cost_derivative(model: &TraceModel<'_>, a: f64, obs: &ObservationSet) -> Result<f64> {
    obs.validate()?;
    let mut ev = model.evaluator(a)?;
    let mut total = 0.0;
    for (&t, &beta) in obs.times.iter().zip(&obs.values) {
        let r = beta - ev.trace(t)?.value;
        total -= r * ev.trace_da(t)?.value;
    }
    Ok(total)
}
