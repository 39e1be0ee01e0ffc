//! Benchmark networks: the mass-spring-damper chain and the planar
//! mass-damper swarm, both discretized with forward Euler so that the
//! parameter dependence stays affine.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dynamics::UncertainAffineDynamics;
use super::graph::CommGraph;
use super::lifting::Neighborhood;
use super::polytope::{PolytopicSet, SetRole};
use crate::error::{Error, Result};

pub const DEFAULT_DT: f64 = 0.05;

fn default_dt() -> f64 {
    DEFAULT_DT
}

/// `m ẍ_i = Σ_j k_ij (x_j - x_i) + d_ij (ẋ_j - ẋ_i) + u_i` on a line graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub agents: usize,
    #[serde(default = "chain_defaults::mass")]
    pub mass: f64,
    #[serde(default = "chain_defaults::spring")]
    pub spring: f64,
    #[serde(default = "chain_defaults::damping")]
    pub damping: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "chain_defaults::position_bound")]
    pub position_bound: f64,
    #[serde(default = "chain_defaults::velocity_bound")]
    pub velocity_bound: f64,
    #[serde(default = "chain_defaults::input_bound")]
    pub input_bound: f64,
}

mod chain_defaults {
    pub fn mass() -> f64 { 1.0 }
    pub fn spring() -> f64 { 2.0 }
    pub fn damping() -> f64 { 1.0 }
    pub fn position_bound() -> f64 { 1.0 }
    pub fn velocity_bound() -> f64 { 3.0 }
    pub fn input_bound() -> f64 { 1.0 }
}

impl ChainParams {
    /// Numerical values of the chain benchmark with `agents` masses.
    pub fn benchmark(agents: usize, gamma: f64) -> Self {
        Self {
            agents,
            mass: chain_defaults::mass(),
            spring: chain_defaults::spring(),
            damping: chain_defaults::damping(),
            dt: DEFAULT_DT,
            gamma,
            position_bound: chain_defaults::position_bound(),
            velocity_bound: chain_defaults::velocity_bound(),
            input_bound: chain_defaults::input_bound(),
        }
    }
}

/// Planar agents `(x, ẋ, y, ẏ)` with
/// `m ẍ_i = a_i ẋ_i + Σ_j d_ij (ẋ_j - ẋ_i) + u_{x,i}` and likewise in `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassDamperParams {
    pub agents: usize,
    #[serde(default = "md_defaults::mass")]
    pub mass: f64,
    #[serde(default = "md_defaults::local")]
    pub local: f64,
    #[serde(default = "md_defaults::damping")]
    pub damping: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub gamma: f64,
    /// Bound on `|x_i| + |y_i|`.
    #[serde(default = "md_defaults::position_l1_bound")]
    pub position_l1_bound: f64,
    #[serde(default = "md_defaults::input_bound")]
    pub input_bound: f64,
}

mod md_defaults {
    pub fn mass() -> f64 { 1.0 }
    pub fn local() -> f64 { 0.1 }
    pub fn damping() -> f64 { 0.5 }
    pub fn position_l1_bound() -> f64 { 10.0 }
    pub fn input_bound() -> f64 { 5.0 }
}

impl MassDamperParams {
    pub fn benchmark(agents: usize, gamma: f64) -> Self {
        Self {
            agents,
            mass: md_defaults::mass(),
            local: md_defaults::local(),
            damping: md_defaults::damping(),
            dt: DEFAULT_DT,
            gamma,
            position_l1_bound: md_defaults::position_l1_bound(),
            input_bound: md_defaults::input_bound(),
        }
    }
}

/// Per-agent ingredients shared by every way of describing a model.
#[derive(Debug, Clone)]
pub(crate) struct AgentData {
    pub state_dim: usize,
    pub input_dim: usize,
    pub dynamics: UncertainAffineDynamics,
    pub state_set: PolytopicSet,
    pub input_set: PolytopicSet,
}

fn check_common(agents: usize, mass: f64, dt: f64) -> Result<()> {
    if agents == 0 {
        return Err(Error::InvalidModel("need at least one agent".into()));
    }
    if !(dt > 0.0) || !(mass > 0.0) {
        return Err(Error::InvalidModel(format!("need dt > 0 and mass > 0, got dt={dt}, mass={mass}")));
    }
    Ok(())
}

/// Local constraint rows over `x_i`, zero-padded to the neighborhood.
fn embed_rows(local: &DMatrix<f64>, nb: &Neighborhood) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(local.nrows(), nb.dim);
    m.view_mut((0, nb.self_offset()), (local.nrows(), local.ncols())).copy_from(local);
    m
}

pub(crate) fn chain_agents(p: &ChainParams) -> Result<(CommGraph, Vec<AgentData>)> {
    check_common(p.agents, p.mass, p.dt)?;
    let graph = CommGraph::line(p.agents)?;
    let dims = vec![2; p.agents];
    let h = p.dt / p.mass;
    let local_state = PolytopicSet::symmetric_box(&[p.position_bound, p.velocity_bound], SetRole::State)?;
    let mut out = Vec::with_capacity(p.agents);
    for i in 0..p.agents {
        let nb = Neighborhood::new(&graph, i, &dims);
        let (pi, vi) = (nb.self_offset(), nb.self_offset() + 1);
        let mut a0 = DMatrix::zeros(2, nb.dim);
        a0[(0, pi)] = 1.0;
        a0[(0, vi)] = p.dt;
        a0[(1, vi)] = 1.0;
        let mut a_sens = Vec::new();
        let mut nominal = Vec::new();
        for (pos, &j) in nb.members.iter().enumerate() {
            if j == i {
                continue;
            }
            let (pj, vj) = (nb.offsets[pos], nb.offsets[pos] + 1);
            let mut ks = DMatrix::zeros(2, nb.dim);
            ks[(1, pj)] = h;
            ks[(1, pi)] = -h;
            let mut ds = DMatrix::zeros(2, nb.dim);
            ds[(1, vj)] = h;
            ds[(1, vi)] = -h;
            a_sens.push(ks);
            a_sens.push(ds);
            nominal.push(p.spring);
            nominal.push(p.damping);
        }
        let b0 = DMatrix::from_column_slice(2, 1, &[0.0, h]);
        let b_sens = vec![DMatrix::zeros(2, 1); a_sens.len()];
        let dynamics = UncertainAffineDynamics::with_uncertainty_level(
            a0,
            b0,
            a_sens,
            b_sens,
            DVector::from_vec(nominal),
            p.gamma,
        )?;
        let state_set = PolytopicSet::new(
            embed_rows(&local_state.matrix, &nb),
            local_state.bound.clone(),
            SetRole::State,
        )?;
        let input_set = PolytopicSet::symmetric_box(&[p.input_bound], SetRole::Input)?;
        out.push(AgentData { state_dim: 2, input_dim: 1, dynamics, state_set, input_set });
    }
    Ok((graph, out))
}

pub(crate) fn mass_damper_agents(p: &MassDamperParams) -> Result<(CommGraph, Vec<AgentData>)> {
    check_common(p.agents, p.mass, p.dt)?;
    let graph = CommGraph::line(p.agents)?;
    let dims = vec![4; p.agents];
    let h = p.dt / p.mass;
    // |x| + |y| <= L written as four rows over (x, ẋ, y, ẏ), scaled as in the
    // benchmark table (entries 10, bound 10 L).
    let l1_rows = DMatrix::from_row_slice(
        4,
        4,
        &[
            10.0, 0.0, 10.0, 0.0, //
            10.0, 0.0, -10.0, 0.0, //
            -10.0, 0.0, 10.0, 0.0, //
            -10.0, 0.0, -10.0, 0.0,
        ],
    );
    let l1_bound = DVector::from_element(4, 10.0 * p.position_l1_bound);
    let mut out = Vec::with_capacity(p.agents);
    for i in 0..p.agents {
        let nb = Neighborhood::new(&graph, i, &dims);
        let o = nb.self_offset();
        let mut a0 = DMatrix::zeros(4, nb.dim);
        for axis in [0, 2] {
            a0[(axis, o + axis)] = 1.0;
            a0[(axis, o + axis + 1)] = p.dt;
            a0[(axis + 1, o + axis + 1)] = 1.0;
        }
        let mut local = DMatrix::zeros(4, nb.dim);
        local[(1, o + 1)] = h;
        local[(3, o + 3)] = h;
        let mut a_sens = vec![local];
        let mut nominal = vec![p.local];
        for (pos, &j) in nb.members.iter().enumerate() {
            if j == i {
                continue;
            }
            let oj = nb.offsets[pos];
            let mut ds = DMatrix::zeros(4, nb.dim);
            for axis in [1, 3] {
                ds[(axis, oj + axis)] = h;
                ds[(axis, o + axis)] = -h;
            }
            a_sens.push(ds);
            nominal.push(p.damping);
        }
        let mut b0 = DMatrix::zeros(4, 2);
        b0[(1, 0)] = h;
        b0[(3, 1)] = h;
        let b_sens = vec![DMatrix::zeros(4, 2); a_sens.len()];
        let dynamics = UncertainAffineDynamics::with_uncertainty_level(
            a0,
            b0,
            a_sens,
            b_sens,
            DVector::from_vec(nominal),
            p.gamma,
        )?;
        let state_set = PolytopicSet::new(embed_rows(&l1_rows, &nb), l1_bound.clone(), SetRole::State)?;
        let input_set = PolytopicSet::symmetric_box(&[p.input_bound, p.input_bound], SetRole::Input)?;
        out.push(AgentData { state_dim: 4, input_dim: 2, dynamics, state_set, input_set });
    }
    Ok((graph, out))
}
