//! Closed-loop episodes.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compare::sample_in_set;
use super::policy::{Policy, PolicyStub};
use crate::error::{Error, Result};
use crate::explicit_filter::{best_backup, explicit_step, MembershipMode};
use crate::implicit_filter::{implicit_step, ImplicitOptions, CERTIFY_TOL};
use crate::model::NetworkModel;
use crate::partition::{SamplingDomain, REJECTION_BUDGET};
use crate::synthesis::CertifiedSetFamily;

/// Residuals above this count as violations.
pub const VIOLATION_TOL: f64 = 1e-8;
/// Penalty added to the stand-in reward on violating steps.
pub const VIOLATION_PENALTY: f64 = 100.0;

/// Which safety filter wraps the policy.
#[derive(Debug, Clone, Copy)]
pub enum Filter<'a> {
    None,
    Explicit { family: &'a CertifiedSetFamily, mode: MembershipMode },
    /// `fallback` supplies backup gains when a step program fails.
    Implicit { options: ImplicitOptions, fallback: Option<&'a CertifiedSetFamily> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    None,
    Explicit,
    Implicit,
}

impl Filter<'_> {
    pub fn kind(&self) -> FilterKind {
        match self {
            Filter::None => FilterKind::None,
            Filter::Explicit { .. } => FilterKind::Explicit,
            Filter::Implicit { .. } => FilterKind::Implicit,
        }
    }

    fn family(&self) -> Option<&CertifiedSetFamily> {
        match self {
            Filter::None => None,
            Filter::Explicit { family, .. } => Some(family),
            Filter::Implicit { fallback, .. } => *fallback,
        }
    }
}

/// How the true parameters evolve during an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ThetaMode {
    /// Given per-agent parameter vectors for the whole episode.
    Fixed { theta: Vec<Vec<f64>> },
    /// One uniform draw from the box per episode.
    RandomConstant,
    /// A fresh uniform vertex of every agent's box at every step.
    RandomVertex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    /// Rejection-sampled in `X` until feasible for the filter: inside some
    /// certified set, or implicit step feasible from zero input.
    Feasible,
    Given { x: Vec<f64> },
    /// Uniform inside a uniformly chosen certified set; for high-dimensional
    /// models where rejection in `X` rarely hits the union.
    InsideSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub policy: PolicyStub,
    pub horizon: usize,
    pub theta: ThetaMode,
    pub initial: InitialState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub u_learning: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub intervened: bool,
    pub set_index: Option<usize>,
    /// Per-agent `max_l (H_l x_N - h_l)`, positive = violated.
    pub state_residuals: Vec<f64>,
    pub input_residuals: Vec<f64>,
    pub reward: f64,
    /// Set when the filter had to fall back.
    pub fault: Option<String>,
}

impl StepRecord {
    pub fn max_residual(&self) -> f64 {
        self.state_residuals.iter().chain(&self.input_residuals).copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn violated(&self) -> bool {
        self.max_residual() > VIOLATION_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub fingerprint: String,
    pub filter: FilterKind,
    pub policy: PolicyStub,
    pub theta: ThetaMode,
    /// Parameters of step 0 (all steps unless `theta` is random-vertex).
    pub theta_initial: Vec<Vec<f64>>,
    pub master_seed: u64,
    pub episode: u64,
    pub x0: Vec<f64>,
    pub reward_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub meta: EpisodeMeta,
    pub steps: Vec<StepRecord>,
    pub final_state: Vec<f64>,
    pub final_state_residuals: Vec<f64>,
}

impl EpisodeTrace {
    /// Steps with any residual above [`VIOLATION_TOL`], plus the final state.
    pub fn violations(&self) -> usize {
        let last = self.final_state_residuals.iter().any(|&r| r > VIOLATION_TOL) as usize;
        self.steps.iter().filter(|s| s.violated()).count() + last
    }

    pub fn interventions(&self) -> usize {
        self.steps.iter().filter(|s| s.intervened).count()
    }

    pub fn faults(&self) -> usize {
        self.steps.iter().filter(|s| s.fault.is_some()).count()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// One row per step and agent.
    pub fn write_csv<W: Write>(&self, model: &NetworkModel, w: W) -> Result<()> {
        let nx = model.agents().iter().map(|a| a.state_dim).max().unwrap_or(0);
        let nu = model.agents().iter().map(|a| a.input_dim).max().unwrap_or(0);
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string(), "agent".to_string()];
        header.extend((0..nx).map(|d| format!("x_{d}")));
        header.extend((0..nu).map(|d| format!("u_learning_{d}")));
        header.extend((0..nu).map(|d| format!("u_applied_{d}")));
        header.extend(["intervened", "set_index", "max_residual"].map(String::from));
        out.write_record(&header).map_err(csv_err)?;
        for s in &self.steps {
            for (i, a) in model.agents().iter().enumerate() {
                let mut row = vec![s.k.to_string(), i.to_string()];
                let xo = model.state_offset(i);
                let uo = model.input_offset(i);
                row.extend((0..nx).map(|d| if d < a.state_dim { s.x[xo + d].to_string() } else { String::new() }));
                for src in [&s.u_learning, &s.u_applied] {
                    row.extend((0..nu).map(|d| if d < a.input_dim { src[uo + d].to_string() } else { String::new() }));
                }
                row.push(s.intervened.to_string());
                row.push(s.set_index.map_or(String::new(), |j| j.to_string()));
                row.push(s.state_residuals[i].max(s.input_residuals[i]).to_string());
                out.write_record(&row).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// RNG of episode `index` under `master`; independent streams per episode.
pub fn episode_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

fn draw_theta<R: Rng + ?Sized>(model: &NetworkModel, mode: &ThetaMode, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    Ok(match mode {
        ThetaMode::Fixed { theta } => {
            let th: Vec<_> = theta.iter().map(|t| DVector::from_vec(t.clone())).collect();
            model.validate_theta(&th)?;
            th
        }
        ThetaMode::RandomConstant => model
            .agents()
            .iter()
            .map(|a| {
                let (lo, hi) = (&a.dynamics.theta_lo, &a.dynamics.theta_hi);
                DVector::from_fn(lo.len(), |p, _| if hi[p] > lo[p] { rng.gen_range(lo[p]..=hi[p]) } else { lo[p] })
            })
            .collect(),
        ThetaMode::RandomVertex => model.agents().iter().map(|a| a.vertices[rng.gen_range(0..a.vertices.len())].clone()).collect(),
    })
}

fn initial_state<R: Rng + ?Sized>(model: &NetworkModel, filter: &Filter<'_>, init: &InitialState, rng: &mut R) -> Result<DVector<f64>> {
    if let InitialState::Given { x } = init {
        if x.len() != model.state_dim() {
            return Err(Error::Dimension(format!("initial state has {} entries, expected {}", x.len(), model.state_dim())));
        }
        return Ok(DVector::from_vec(x.clone()));
    }
    if *init == InitialState::InsideSet {
        let fam = filter
            .family()
            .ok_or_else(|| Error::InvalidModel("inside-set initial states need a certified family".into()))?;
        let j = rng.gen_range(0..fam.len());
        return sample_in_set(model, &fam.regions[j], rng);
    }
    let domain = SamplingDomain::new(model.global_state_polytope(), None)?;
    for _ in 0..REJECTION_BUDGET {
        let x = domain.sample(rng)?;
        let ok = match (filter, filter.family()) {
            (_, Some(fam)) => fam.containing(model, &x, 0.0).is_some(),
            (Filter::Implicit { options, .. }, None) => {
                implicit_step(model, &x, &DVector::zeros(model.input_dim()), options).is_ok()
            }
            (_, None) => true,
        };
        if ok {
            return Ok(x);
        }
    }
    Err(Error::SamplingExhausted(REJECTION_BUDGET))
}

/// Quadratic regulation stand-in reward, not part of any safety contract.
fn reward(x: &DVector<f64>, u: &DVector<f64>, violated: bool) -> f64 {
    -(x.norm_squared() + 0.1 * u.norm_squared()) - if violated { VIOLATION_PENALTY } else { 0.0 }
}

/// Simulates one episode.
pub fn run_episode(
    model: &NetworkModel,
    filter: &Filter<'_>,
    spec: &EpisodeSpec,
    master_seed: u64,
    episode: u64,
) -> Result<EpisodeTrace> {
    if spec.horizon == 0 {
        return Err(Error::InvalidModel("horizon must be at least 1".into()));
    }
    if let Some(fam) = filter.family() {
        fam.check_model(model)?;
    }
    let mut rng = episode_rng(master_seed, episode);
    let policy = Policy::new(spec.policy, model)?;
    let mut x = initial_state(model, filter, &spec.initial, &mut rng)?;
    let x0: Vec<f64> = x.iter().copied().collect();
    let mut theta = draw_theta(model, &spec.theta, &mut rng)?;
    let theta_initial = theta.iter().map(|t| t.iter().copied().collect()).collect();

    let mut steps = Vec::with_capacity(spec.horizon);
    for k in 0..spec.horizon {
        if k > 0 && spec.theta == ThetaMode::RandomVertex {
            theta = draw_theta(model, &spec.theta, &mut rng)?;
        }
        let u_l = policy.act(model, &x, &mut rng);
        let (u, intervened, set_index, fault) = apply_filter(model, filter, &x, &u_l, k)?;
        let state_residuals = model.state_residuals(&x);
        let input_residuals = model.input_residuals(&u);
        let violated = state_residuals.iter().chain(&input_residuals).any(|&r| r > VIOLATION_TOL);
        steps.push(StepRecord {
            k,
            x: x.iter().copied().collect(),
            u_learning: u_l.iter().copied().collect(),
            u_applied: u.iter().copied().collect(),
            intervened,
            set_index,
            state_residuals,
            input_residuals,
            reward: reward(&x, &u, violated),
            fault,
        });
        x = model.step(&x, &u, &theta);
    }
    Ok(EpisodeTrace {
        meta: EpisodeMeta {
            fingerprint: model.fingerprint().to_string(),
            filter: filter.kind(),
            policy: spec.policy,
            theta: spec.theta.clone(),
            theta_initial,
            master_seed,
            episode,
            x0,
            reward_note: "stand-in: -(|x|^2 + 0.1|u|^2), minus 100 on violating steps".into(),
        },
        final_state_residuals: model.state_residuals(&x),
        final_state: x.iter().copied().collect(),
        steps,
    })
}

type Applied = (DVector<f64>, bool, Option<usize>, Option<String>);

fn apply_filter(model: &NetworkModel, filter: &Filter<'_>, x: &DVector<f64>, u_l: &DVector<f64>, k: usize) -> Result<Applied> {
    match filter {
        Filter::None => Ok((u_l.clone(), false, None, None)),
        Filter::Explicit { family, mode } => {
            let d = explicit_step(model, family, x, u_l, *mode, k)?;
            let set = d.active_set();
            Ok((DVector::from_vec(d.u_applied), d.intervened, set, None))
        }
        Filter::Implicit { options, fallback } => match implicit_step(model, x, u_l, options) {
            Ok(d) => {
                let certified = d.correction_norm() <= CERTIFY_TOL;
                Ok((d.u_applied, !certified, None, None))
            }
            Err(err @ (Error::Infeasible(_) | Error::Solver(_))) => {
                let note = format!("implicit step failed: {err}");
                log::warn!("step {k}: {note}");
                if let Some(fam) = fallback {
                    if let Ok(b) = best_backup(model, fam, x, u_l) {
                        return Ok((fam.regions[b].backup_input(model, x), true, Some(b), Some(note)));
                    }
                }
                Ok((DVector::zeros(model.input_dim()), true, None, Some(note)))
            }
            Err(e) => Err(e),
        },
    }
}

/// Episodes `0..count` in parallel; results in episode order.
pub fn run_episodes(
    model: &NetworkModel,
    filter: &Filter<'_>,
    spec: &EpisodeSpec,
    master_seed: u64,
    count: usize,
) -> Result<Vec<EpisodeTrace>> {
    (0..count as u64).into_par_iter().map(|e| run_episode(model, filter, spec, master_seed, e)).collect()
}
