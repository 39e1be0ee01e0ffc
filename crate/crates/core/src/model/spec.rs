//! JSON description of a network model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::builders::{AgentData, ChainParams, MassDamperParams};
use super::dynamics::UncertainAffineDynamics;
use super::graph::CommGraph;
use super::polytope::{PolytopicSet, SetRole};
use crate::error::{Error, Result};
use crate::linalg::from_row_major;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    MassSpringDamperChain(ChainParams),
    MassDamper2d(MassDamperParams),
    Inline(InlineModel),
}

impl ModelSpec {
    /// Uncertainty level, when the whole model has a single one.
    pub fn gamma(&self) -> Option<f64> {
        match self {
            ModelSpec::MassSpringDamperChain(p) => Some(p.gamma),
            ModelSpec::MassDamper2d(p) => Some(p.gamma),
            ModelSpec::Inline(m) => {
                let first = m.agents.first()?.gamma;
                m.agents.iter().all(|a| a.gamma == first).then_some(first).flatten()
            }
        }
    }

    /// Same model at another uncertainty level. Inline agents with explicit
    /// parameter bounds keep them.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelSpec::MassSpringDamperChain(p) => p.gamma = gamma,
            ModelSpec::MassDamper2d(p) => p.gamma = gamma,
            ModelSpec::Inline(m) => m.agents.iter_mut().for_each(|a| a.gamma = Some(gamma)),
        }
        out
    }
}

/// Explicit matrices; every matrix is row-major, constraint rows act on the
/// closed-neighborhood state (ascending agent order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineModel {
    pub graph: CommGraph,
    pub agents: Vec<InlineAgent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InlineAgent {
    pub state_dim: usize,
    pub input_dim: usize,
    pub a0: Vec<Vec<f64>>,
    pub b0: Vec<Vec<f64>>,
    #[serde(default)]
    pub a_sens: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b_sens: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub theta_nominal: Vec<f64>,
    /// Box from an uncertainty level; ignored when explicit bounds are given.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub theta_lo: Option<Vec<f64>>,
    #[serde(default)]
    pub theta_hi: Option<Vec<f64>>,
    pub state_matrix: Vec<Vec<f64>>,
    pub state_bound: Vec<f64>,
    pub input_matrix: Vec<Vec<f64>>,
    pub input_bound: Vec<f64>,
}

fn matrix(rows: &[Vec<f64>], what: &str, shape: (usize, usize)) -> Result<DMatrix<f64>> {
    let m = if rows.is_empty() && shape.0 == 0 {
        DMatrix::zeros(0, shape.1)
    } else {
        from_row_major(rows).ok_or_else(|| Error::Dimension(format!("{what}: ragged rows")))?
    };
    if m.shape() != shape {
        return Err(Error::Dimension(format!("{what}: expected {shape:?}, got {:?}", m.shape())));
    }
    Ok(m)
}

impl InlineAgent {
    /// Uncoupled scalar agent `x⁺ = a x + b u`, `|x| <= h`, `|u| <= o`.
    pub fn scalar(a: f64, b: f64, h: f64, o: f64) -> Self {
        Self {
            state_dim: 1,
            input_dim: 1,
            a0: vec![vec![a]],
            b0: vec![vec![b]],
            a_sens: vec![],
            b_sens: vec![],
            theta_nominal: vec![],
            gamma: None,
            theta_lo: None,
            theta_hi: None,
            state_matrix: vec![vec![1.0], vec![-1.0]],
            state_bound: vec![h, h],
            input_matrix: vec![vec![1.0], vec![-1.0]],
            input_bound: vec![o, o],
        }
    }

    fn to_data(&self, agent: usize, nbhd_dim: usize) -> Result<AgentData> {
        let (n, m) = (self.state_dim, self.input_dim);
        let a0 = matrix(&self.a0, &format!("agent {agent} a0"), (n, nbhd_dim))?;
        let b0 = matrix(&self.b0, &format!("agent {agent} b0"), (n, m))?;
        let p = self.theta_nominal.len();
        let a_sens = self
            .a_sens
            .iter()
            .map(|r| matrix(r, &format!("agent {agent} a_sens"), (n, nbhd_dim)))
            .collect::<Result<Vec<_>>>()?;
        let b_sens = if self.b_sens.is_empty() {
            vec![DMatrix::zeros(n, m); p]
        } else {
            self.b_sens
                .iter()
                .map(|r| matrix(r, &format!("agent {agent} b_sens"), (n, m)))
                .collect::<Result<Vec<_>>>()?
        };
        let nominal = DVector::from_vec(self.theta_nominal.clone());
        let dynamics = match (&self.theta_lo, &self.theta_hi) {
            (Some(lo), Some(hi)) => UncertainAffineDynamics::new(
                a0,
                b0,
                a_sens,
                b_sens,
                DVector::from_vec(lo.clone()),
                DVector::from_vec(hi.clone()),
                nominal,
            )?,
            (None, None) => UncertainAffineDynamics::with_uncertainty_level(
                a0,
                b0,
                a_sens,
                b_sens,
                nominal,
                self.gamma.unwrap_or(0.0),
            )?,
            _ => {
                return Err(Error::InvalidModel(format!(
                    "agent {agent}: give both theta_lo and theta_hi or neither"
                )))
            }
        };
        let hs = matrix(
            &self.state_matrix,
            &format!("agent {agent} state_matrix"),
            (self.state_bound.len(), nbhd_dim),
        )?;
        let os = matrix(
            &self.input_matrix,
            &format!("agent {agent} input_matrix"),
            (self.input_bound.len(), m),
        )?;
        Ok(AgentData {
            state_dim: n,
            input_dim: m,
            dynamics,
            state_set: PolytopicSet::new(hs, DVector::from_vec(self.state_bound.clone()), SetRole::State)?,
            input_set: PolytopicSet::new(os, DVector::from_vec(self.input_bound.clone()), SetRole::Input)?,
        })
    }
}

impl InlineModel {
    pub(crate) fn agents_data(&self) -> Result<(CommGraph, Vec<AgentData>)> {
        if self.agents.len() != self.graph.node_count() {
            return Err(Error::InvalidModel(format!(
                "{} agents for a graph with {} nodes",
                self.agents.len(),
                self.graph.node_count()
            )));
        }
        let dims: Vec<usize> = self.agents.iter().map(|a| a.state_dim).collect();
        let data = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let nd: usize = self.graph.closed_neighborhood(i).iter().map(|&j| dims[j]).sum();
                a.to_data(i, nd)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((self.graph.clone(), data))
    }
}
