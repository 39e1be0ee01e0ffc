//! Side-by-side evaluation of the explicit and implicit filters.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::{Policy, PolicyKind, PolicyStub};
use crate::error::{Error, Result};
use crate::explicit_filter::{explicit_step, MembershipMode};
use crate::implicit_filter::{implicit_step, ImplicitOptions, CERTIFY_TOL};
use crate::model::NetworkModel;
use crate::partition::{SamplingDomain, REJECTION_BUDGET};
use crate::synthesis::{CertifiedRegion, CertifiedSetFamily};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareOptions {
    pub pairs: usize,
    /// Keep drawing past `pairs` until this many explicitly certified pairs
    /// were seen.
    pub min_certified: usize,
    /// Learning inputs are uniform in `U` stretched by this factor.
    pub input_scale: f64,
    pub membership: MembershipMode,
    pub implicit: ImplicitOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self { pairs: 200, min_certified: 0, input_scale: 1.0, membership: MembershipMode::GlobalSum, implicit: ImplicitOptions::default() }
    }
}

/// Summary of `‖u - u_L‖` over the pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

impl MagnitudeStats {
    pub fn from_values(mut v: Vec<f64>) -> Self {
        if v.is_empty() {
            return Self { count: 0, mean: 0.0, median: 0.0, p90: 0.0, max: 0.0 };
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        Self { count: v.len(), mean: v.iter().sum::<f64>() / v.len() as f64, median: q(0.5), p90: q(0.9), max: v[v.len() - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub x: Vec<f64>,
    pub u_learning: Vec<f64>,
    pub explicit_certified: bool,
    pub explicit_correction: f64,
    /// `None` when the implicit program failed.
    pub implicit_correction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub fingerprint: String,
    pub pairs: usize,
    pub explicit_certified: usize,
    pub implicit_certified: usize,
    pub implicit_failures: usize,
    /// Explicitly certified pairs the implicit filter did not certify.
    pub injection_violations: usize,
    pub max_correction_on_explicit_certified: f64,
    pub explicit_rate: f64,
    pub implicit_rate: f64,
    pub explicit_magnitudes: MagnitudeStats,
    pub implicit_magnitudes: MagnitudeStats,
    pub outcomes: Vec<PairOutcome>,
}

/// Draws `(x, u_L)` pairs with `x` in the union of the family and runs both
/// filters on each.
pub fn compare_filters<R: Rng + ?Sized>(
    model: &NetworkModel,
    family: &CertifiedSetFamily,
    opts: &CompareOptions,
    rng: &mut R,
) -> Result<ComparisonReport> {
    if opts.pairs == 0 {
        return Err(Error::InvalidModel("comparison needs at least one pair".into()));
    }
    family.check_model(model)?;
    let domain = SamplingDomain::new(model.global_state_polytope(), None)?;
    let inputs = Policy::new(PolicyStub::new(PolicyKind::RandomInU).with_scale(opts.input_scale), model)?;

    let mut drawn = Vec::new();
    let mut certified = 0;
    let cap = opts.pairs.max(opts.min_certified) * 1000;
    while drawn.len() < opts.pairs || certified < opts.min_certified {
        if drawn.len() >= cap {
            return Err(Error::SamplingExhausted(drawn.len()));
        }
        let x = sample_in_union(model, family, &domain, rng)?;
        let u = inputs.act(model, &x, rng);
        let d = explicit_step(model, family, &x, &u, opts.membership, drawn.len())?;
        certified += !d.intervened as usize;
        drawn.push((x, u, d));
    }

    let outcomes: Vec<PairOutcome> = drawn
        .par_iter()
        .map(|(x, u, d)| {
            let implicit = implicit_step(model, x, u, &opts.implicit).ok().map(|i| i.correction_norm());
            let applied = DVector::from_vec(d.u_applied.clone());
            PairOutcome {
                x: x.iter().copied().collect(),
                u_learning: u.iter().copied().collect(),
                explicit_certified: !d.intervened,
                explicit_correction: (applied - u).norm(),
                implicit_correction: implicit,
            }
        })
        .collect();

    let n = outcomes.len();
    let implicit_ok = |o: &PairOutcome| o.implicit_correction.is_some_and(|c| c <= CERTIFY_TOL);
    let explicit_certified = outcomes.iter().filter(|o| o.explicit_certified).count();
    let implicit_certified = outcomes.iter().filter(|o| implicit_ok(o)).count();
    let injection_violations = outcomes.iter().filter(|o| o.explicit_certified && !implicit_ok(o)).count();
    let max_on_cert = outcomes
        .iter()
        .filter(|o| o.explicit_certified)
        .map(|o| o.implicit_correction.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(ComparisonReport {
        fingerprint: model.fingerprint().to_string(),
        pairs: n,
        explicit_certified,
        implicit_certified,
        implicit_failures: outcomes.iter().filter(|o| o.implicit_correction.is_none()).count(),
        injection_violations,
        max_correction_on_explicit_certified: max_on_cert,
        explicit_rate: explicit_certified as f64 / n as f64,
        implicit_rate: implicit_certified as f64 / n as f64,
        explicit_magnitudes: MagnitudeStats::from_values(outcomes.iter().map(|o| o.explicit_correction).collect()),
        implicit_magnitudes: MagnitudeStats::from_values(outcomes.iter().filter_map(|o| o.implicit_correction).collect()),
        outcomes,
    })
}

/// Uniform sample of `X` conditioned on lying in some certified set.
pub fn sample_in_union<R: Rng + ?Sized>(
    model: &NetworkModel,
    family: &CertifiedSetFamily,
    domain: &SamplingDomain,
    rng: &mut R,
) -> Result<DVector<f64>> {
    for _ in 0..REJECTION_BUDGET {
        let x = domain.sample(rng)?;
        if family.containing(model, &x, 0.0).is_some() {
            return Ok(x);
        }
    }
    Err(Error::SamplingExhausted(REJECTION_BUDGET))
}

/// Uniform sample of the ellipsoid `{x : Σ x_iᵀ P_i x_i <= 1}`.
pub fn sample_in_set<R: Rng + ?Sized>(model: &NetworkModel, region: &CertifiedRegion, rng: &mut R) -> Result<DVector<f64>> {
    let n = model.state_dim();
    let w: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let radius = rng.gen::<f64>().powf(1.0 / n as f64);
    let scale = radius / w.norm();
    let w = w * scale;
    let mut x = DVector::zeros(n);
    for (i, e) in region.e.iter().enumerate() {
        let l = e
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver(format!("E{i} of region {} is not positive definite", region.index)))?
            .l();
        let off = model.state_offset(i);
        let d = model.agent(i).state_dim;
        x.rows_mut(off, d).copy_from(&(l * w.rows(off, d)));
    }
    Ok(x)
}
