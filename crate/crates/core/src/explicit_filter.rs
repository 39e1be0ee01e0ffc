//! Explicit safety filter over a precomputed family of certified sets.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::model::NetworkModel;
use crate::synthesis::{CertifiedRegion, CertifiedSetFamily};

/// Slack on `V(x) <= 1` when deciding which sets contain the current state.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;

/// How the one-step prediction is tested against a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembershipMode {
    /// `Σ_i max_θ x_i⁺ᵀ P_i x_i⁺ <= 1`.
    #[default]
    GlobalSum,
    /// Every agent separately: `max_θ x_i⁺ᵀ P_i x_i⁺ <= 1/N`.
    LocalConservative,
}

/// Everything the filter decided at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub step: usize,
    pub u_learning: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub intervened: bool,
    /// Certifying set when passed through.
    pub certified_by: Option<usize>,
    /// Backup set when intervened.
    pub backup: Option<usize>,
    /// Worst-case `V^j(x⁺)` for every set `j`.
    pub successor_values: Vec<f64>,
}

impl FilterDecision {
    /// Set the decision relied on, either certifying or backup.
    pub fn active_set(&self) -> Option<usize> {
        self.certified_by.or(self.backup)
    }
}

/// `J(x) = (1/N) Σ x_iᵀ P_i x_i`; `x ∈ X^j` iff `J(x) <= 1/N`.
pub fn membership_value(model: &NetworkModel, region: &CertifiedRegion, x: &DVector<f64>) -> f64 {
    region.lyapunov(model, x) / model.num_agents() as f64
}

/// Per-agent successors `x_i⁺(θ_v)` at every vertex of `Θ_i`.
pub fn vertex_successors(model: &NetworkModel, x: &DVector<f64>, u: &DVector<f64>) -> Vec<Vec<DVector<f64>>> {
    model
        .agents()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let x_n = model.nbhd_state(x, i);
            let u_i = model.agent_input(u, i);
            a.vertices.iter().map(|th| a.dynamics.predict(th, &x_n, &u_i)).collect()
        })
        .collect()
}

/// `max_θ x_i⁺ᵀ P_i x_i⁺` per agent. Exact over all vertex tuples because
/// agent `i`'s successor depends only on `θ_i`.
pub fn worst_case_terms(region: &CertifiedRegion, successors: &[Vec<DVector<f64>>]) -> Vec<f64> {
    successors
        .iter()
        .enumerate()
        .map(|(i, vs)| vs.iter().map(|xp| quad_form(&region.p[i], xp)).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

fn passes(terms: &[f64], mode: MembershipMode) -> bool {
    match mode {
        MembershipMode::GlobalSum => terms.iter().sum::<f64>() <= 1.0,
        MembershipMode::LocalConservative => {
            let level = 1.0 / terms.len() as f64;
            terms.iter().all(|&t| t <= level)
        }
    }
}

/// Smallest `j` whose set contains the successor for every vertex, with the
/// worst-case `V^j(x⁺)` of every set. An input outside `U` is never certified.
pub fn robust_onestep_certify(
    model: &NetworkModel,
    family: &CertifiedSetFamily,
    x: &DVector<f64>,
    u_learning: &DVector<f64>,
    mode: MembershipMode,
) -> Result<(Option<usize>, Vec<f64>)> {
    family.check_model(model)?;
    check_dims(model, x, u_learning)?;
    let admissible = model.input_residuals(u_learning).iter().all(|&r| r <= 0.0);
    let succ = vertex_successors(model, x, u_learning);
    let mut found = None;
    let mut values = Vec::with_capacity(family.len());
    for (j, r) in family.regions.iter().enumerate() {
        let terms = worst_case_terms(r, &succ);
        if admissible && found.is_none() && passes(&terms, mode) {
            found = Some(j);
        }
        values.push(terms.iter().sum());
    }
    Ok((found, values))
}

/// `Σ_i ‖u_{L,i} - K_i^b x_{N_i}‖` for set `b`.
pub fn backup_cost(model: &NetworkModel, region: &CertifiedRegion, x: &DVector<f64>, u_learning: &DVector<f64>) -> f64 {
    (0..model.num_agents())
        .map(|i| (model.agent_input(u_learning, i) - &region.k[i] * model.nbhd_state(x, i)).norm())
        .sum()
}

/// Backup set closest to the learning input among the sets containing `x`;
/// ties go to the lowest index.
pub fn best_backup(model: &NetworkModel, family: &CertifiedSetFamily, x: &DVector<f64>, u_learning: &DVector<f64>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (b, r) in family.regions.iter().enumerate() {
        if r.lyapunov(model, x) > 1.0 + MEMBERSHIP_SLACK {
            continue;
        }
        let c = backup_cost(model, r, x, u_learning);
        if best.is_none_or(|(_, bc)| c < bc) {
            best = Some((b, c));
        }
    }
    best.map(|(b, _)| b)
        .ok_or_else(|| Error::SafetyFault("state lies in no certified set; no backup available".into()))
}

/// Pass `u_learning` through if certified, otherwise apply the best backup.
pub fn explicit_step(
    model: &NetworkModel,
    family: &CertifiedSetFamily,
    x: &DVector<f64>,
    u_learning: &DVector<f64>,
    mode: MembershipMode,
    step: usize,
) -> Result<FilterDecision> {
    let (cert, values) = robust_onestep_certify(model, family, x, u_learning, mode)?;
    let (u, backup) = match cert {
        Some(_) => (u_learning.clone(), None),
        None => {
            let b = best_backup(model, family, x, u_learning)?;
            (family.regions[b].backup_input(model, x), Some(b))
        }
    };
    Ok(FilterDecision {
        step,
        u_learning: u_learning.iter().copied().collect(),
        u_applied: u.iter().copied().collect(),
        intervened: cert.is_none(),
        certified_by: cert,
        backup,
        successor_values: values,
    })
}

fn check_dims(model: &NetworkModel, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
    if x.len() != model.state_dim() || u.len() != model.input_dim() {
        return Err(Error::Dimension(format!(
            "x has {} entries (expected {}), u has {} (expected {})",
            x.len(),
            model.state_dim(),
            u.len(),
            model.input_dim()
        )));
    }
    Ok(())
}
