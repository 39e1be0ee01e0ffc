//! Scripted stand-ins for a learning algorithm.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkModel;
use crate::partition::bounding_box;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicyKind {
    Zero,
    /// Uniform on the bounding box of each `U_i`, rejected until admissible.
    RandomInU,
    /// `u_i = -gain · B_iᵀ x_i` plus Gaussian noise of the given scale.
    NoisyRegulation { gain: f64, noise: f64 },
    /// Extreme input along `B_iᵀ A_i x_{N_i}`, which grows `‖x_i⁺‖`.
    AdversarialOutward,
}

/// A policy kind with a scale; a scale above 1 stretches the outputs past
/// `U` so the filters must also repair inadmissible inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyStub {
    #[serde(flatten)]
    pub kind: PolicyKind,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl PolicyStub {
    pub fn new(kind: PolicyKind) -> Self {
        Self { kind, scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

/// A stub bound to one model.
#[derive(Debug, Clone)]
pub struct Policy {
    stub: PolicyStub,
    /// Per input coordinate `(lo, hi)` of the input boxes.
    input_box: Vec<(f64, f64)>,
}

impl Policy {
    pub fn new(stub: PolicyStub, model: &NetworkModel) -> Result<Self> {
        if !(stub.scale.is_finite() && stub.scale >= 0.0) {
            return Err(Error::InvalidModel(format!("policy scale {} must be finite and non-negative", stub.scale)));
        }
        let mut input_box = Vec::with_capacity(model.input_dim());
        for (i, a) in model.agents().iter().enumerate() {
            for (d, b) in bounding_box(&a.input_set)?.into_iter().enumerate() {
                let b = b.ok_or_else(|| Error::InvalidModel(format!("input set of agent {i} is unbounded in coordinate {d}")))?;
                input_box.push(b);
            }
        }
        Ok(Self { stub, input_box })
    }

    pub fn stub(&self) -> &PolicyStub {
        &self.stub
    }

    pub fn act<R: Rng + ?Sized>(&self, model: &NetworkModel, x: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let m = model.input_dim();
        let raw = match self.stub.kind {
            PolicyKind::Zero => DVector::zeros(m),
            PolicyKind::RandomInU => self.random_in_u(model, rng),
            PolicyKind::NoisyRegulation { gain, noise } => {
                let normal = Normal::new(0.0, noise.abs()).expect("finite noise scale");
                let mut u = DVector::zeros(m);
                for (i, a) in model.agents().iter().enumerate() {
                    let (_, b) = a.dynamics.eval_unchecked(&a.dynamics.theta_nominal);
                    let ui = -(b.transpose() * model.agent_state(x, i)) * gain;
                    for (d, v) in ui.iter().enumerate() {
                        u[model.input_offset(i) + d] = v + normal.sample(rng);
                    }
                }
                u
            }
            PolicyKind::AdversarialOutward => {
                let mut u = DVector::zeros(m);
                for (i, a) in model.agents().iter().enumerate() {
                    let (am, b) = a.dynamics.eval_unchecked(&a.dynamics.theta_nominal);
                    let g = b.transpose() * (am * model.nbhd_state(x, i));
                    for (d, gd) in g.iter().enumerate() {
                        let k = model.input_offset(i) + d;
                        let (lo, hi) = self.input_box[k];
                        u[k] = if *gd > 0.0 || (*gd == 0.0 && rng.gen::<bool>()) { hi } else { lo };
                    }
                }
                u
            }
        };
        raw * self.stub.scale
    }

    fn random_in_u<R: Rng + ?Sized>(&self, model: &NetworkModel, rng: &mut R) -> DVector<f64> {
        let mut u = DVector::zeros(model.input_dim());
        for (i, a) in model.agents().iter().enumerate() {
            let off = model.input_offset(i);
            loop {
                let ui = DVector::from_fn(a.input_dim, |d, _| {
                    let (lo, hi) = self.input_box[off + d];
                    if hi > lo {
                        rng.gen_range(lo..hi)
                    } else {
                        lo
                    }
                });
                if a.input_set.contains(&ui, 0.0) {
                    u.rows_mut(off, a.input_dim).copy_from(&ui);
                    break;
                }
            }
        }
        u
    }
}
