//! Distributed evaluation of the explicit filter's two decisions by
//! synchronous neighbor-to-neighbor rounds.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explicit_filter::{vertex_successors, worst_case_terms, FilterDecision, MEMBERSHIP_SLACK};
use crate::linalg::quad_form;
use crate::model::{CommGraph, NetworkModel};
use crate::synthesis::CertifiedSetFamily;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Record of one averaging run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRun {
    pub initial: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `max_i |v_i - mean|` at termination.
    pub residual: f64,
    pub tol: f64,
    pub weights: String,
    /// Values after every round, round 0 first, when requested.
    pub history: Option<Vec<Vec<f64>>>,
}

impl ConsensusRun {
    /// `round,node,value` rows; empty when no history was kept.
    pub fn write_trace_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["round", "node", "value"]).map_err(csv_err)?;
        for (k, vals) in self.history.iter().flatten().enumerate() {
            for (i, v) in vals.iter().enumerate() {
                out.write_record([k.to_string(), i.to_string(), format!("{v:e}")]).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Metropolis-Hastings weights `w_ij = 1 / (1 + max(deg_i, deg_j))`, self
/// weight taking the remainder.
pub fn metropolis_weights(graph: &CommGraph) -> Vec<(f64, Vec<(usize, f64)>)> {
    (0..graph.node_count())
        .map(|i| {
            let nb: Vec<(usize, f64)> = graph
                .neighbors(i)
                .iter()
                .map(|&j| (j, 1.0 / (1.0 + graph.degree(i).max(graph.degree(j)) as f64)))
                .collect();
            let own = 1.0 - nb.iter().map(|(_, w)| w).sum::<f64>();
            (own, nb)
        })
        .collect()
}

/// Synchronous averaging until every node is within `tol` of the mean.
pub fn average_consensus(graph: &CommGraph, values: &[f64], tol: f64, max_iter: usize, keep_history: bool) -> Result<ConsensusRun> {
    if values.len() != graph.node_count() {
        return Err(Error::Dimension(format!("{} values for {} nodes", values.len(), graph.node_count())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Dimension("consensus values must be finite".into()));
    }
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let weights = metropolis_weights(graph);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let deviation = |v: &[f64]| v.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    let mut cur = values.to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut history = keep_history.then(|| vec![cur.clone()]);
    let mut residual = deviation(&cur);
    let mut iterations = 0;
    while residual >= tol {
        if iterations == max_iter {
            return Err(Error::NoConvergence { iterations, residual });
        }
        for (i, (own, nb)) in weights.iter().enumerate() {
            next[i] = own * cur[i] + nb.iter().map(|&(j, w)| w * cur[j]).sum::<f64>();
        }
        std::mem::swap(&mut cur, &mut next);
        iterations += 1;
        residual = deviation(&cur);
        if let Some(h) = history.as_mut() {
            h.push(cur.clone());
        }
    }
    Ok(ConsensusRun {
        initial: values.to_vec(),
        values: cur,
        iterations,
        residual,
        tol,
        weights: "metropolis-hastings".into(),
        history,
    })
}

/// Per-node verdicts on `(1/N) Σ terms <= level/N + tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVerdict {
    pub per_node: Vec<bool>,
    pub run: ConsensusRun,
}

impl MembershipVerdict {
    /// Every node says yes.
    pub fn contained(&self) -> bool {
        self.per_node.iter().all(|&b| b)
    }
}

/// Membership of the sum of the local terms `x_iᵀ P_i x_i` in `[0, level]`,
/// decided at every node from the consensus estimate of their mean.
pub fn membership_by_consensus(graph: &CommGraph, terms: &[f64], level: f64, tol: f64) -> Result<MembershipVerdict> {
    let run = average_consensus(graph, terms, tol, DEFAULT_MAX_ITER, false)?;
    let n = graph.node_count() as f64;
    let per_node = run.values.iter().map(|&j| j <= level / n + tol).collect();
    Ok(MembershipVerdict { per_node, run })
}

/// Flooding result of a min-consensus.
#[derive(Debug, Clone, PartialEq)]
pub struct MinConsensusRun {
    /// `(cost, key)` held by every node at termination.
    pub values: Vec<(f64, usize)>,
    pub rounds: usize,
}

impl MinConsensusRun {
    pub fn agreed(&self) -> Option<(f64, usize)> {
        let first = *self.values.first()?;
        self.values.iter().all(|&v| v == first).then_some(first)
    }
}

fn key_less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Lexicographic `(cost, key)` minimum by flooding for `diameter(G)` rounds.
pub fn min_consensus(graph: &CommGraph, local: &[(f64, usize)]) -> Result<MinConsensusRun> {
    if local.len() != graph.node_count() {
        return Err(Error::Dimension(format!("{} entries for {} nodes", local.len(), graph.node_count())));
    }
    let rounds = graph.diameter().ok_or(Error::Disconnected)?;
    let mut cur = local.to_vec();
    for _ in 0..rounds {
        let prev = cur.clone();
        for (i, v) in cur.iter_mut().enumerate() {
            for &j in graph.neighbors(i) {
                if key_less(prev[j], *v) {
                    *v = prev[j];
                }
            }
        }
    }
    Ok(MinConsensusRun { values: cur, rounds })
}

/// The explicit filter evaluated with consensus rounds only: per-set
/// membership by averaging, admissibility and backup choice by flooding.
pub fn distributed_explicit_step(
    model: &NetworkModel,
    family: &CertifiedSetFamily,
    x: &DVector<f64>,
    u_learning: &DVector<f64>,
    tol: f64,
    step: usize,
) -> Result<FilterDecision> {
    family.check_model(model)?;
    let graph = model.graph();
    let n = model.num_agents();
    let succ = vertex_successors(model, x, u_learning);

    // Flooding the minimum of (-1 if my input is outside U_i else 0).
    let flags: Vec<(f64, usize)> = model
        .input_residuals(u_learning)
        .iter()
        .map(|&r| (if r <= 0.0 { 0.0 } else { -1.0 }, 0))
        .collect();
    let admissible = min_consensus(graph, &flags)?.values.iter().all(|&(f, _)| f == 0.0);

    let mut values = Vec::with_capacity(family.len());
    let mut certified = None;
    for (j, r) in family.regions.iter().enumerate() {
        let terms = worst_case_terms(r, &succ);
        let verdict = membership_by_consensus(graph, &terms, 1.0, tol)?;
        values.push(verdict.run.values[0] * n as f64);
        if admissible && certified.is_none() && verdict.contained() {
            certified = Some(j);
        }
    }
    if certified.is_some() {
        return Ok(FilterDecision {
            step,
            u_learning: u_learning.iter().copied().collect(),
            u_applied: u_learning.iter().copied().collect(),
            intervened: false,
            certified_by: certified,
            backup: None,
            successor_values: values,
        });
    }

    // Each node ranks the sets it believes contain x by the network cost.
    let mut local_best = vec![(f64::INFINITY, usize::MAX); n];
    for (b, r) in family.regions.iter().enumerate() {
        let here: Vec<f64> = (0..n).map(|i| quad_form(&r.p[i], &model.agent_state(x, i))).collect();
        let member = membership_by_consensus(graph, &here, 1.0 + MEMBERSHIP_SLACK, tol)?;
        let local_cost: Vec<f64> = (0..n)
            .map(|i| (model.agent_input(u_learning, i) - &r.k[i] * model.nbhd_state(x, i)).norm())
            .collect();
        let cost = average_consensus(graph, &local_cost, tol, DEFAULT_MAX_ITER, false)?;
        for (i, best) in local_best.iter_mut().enumerate() {
            let key = (cost.values[i] * n as f64, b);
            if member.per_node[i] && key_less(key, *best) {
                *best = key;
            }
        }
    }
    let agreed = min_consensus(graph, &local_best)?;
    let (_, b) = agreed.values[0];
    if b == usize::MAX {
        return Err(Error::SafetyFault("state lies in no certified set; no backup available".into()));
    }
    let u = family.regions[b].backup_input(model, x);
    Ok(FilterDecision {
        step,
        u_learning: u_learning.iter().copied().collect(),
        u_applied: u.iter().copied().collect(),
        intervened: true,
        certified_by: None,
        backup: Some(b),
        successor_values: values,
    })
}
