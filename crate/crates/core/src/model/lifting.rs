use nalgebra::{DMatrix, DVector};

use super::graph::CommGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftingKind {
    /// `T_i`: extracts `x_i` from the global state.
    Agent,
    /// `W_i`: extracts `x_{N_i}` (closed neighborhood, ascending agent order).
    Neighborhood,
}

/// 0/1 selection matrix stored as the list of selected global indices.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingMatrix {
    pub kind: LiftingKind,
    indices: Vec<usize>,
    global_dim: usize,
}

impl LiftingMatrix {
    pub fn new(kind: LiftingKind, indices: Vec<usize>, global_dim: usize) -> Self {
        debug_assert!(indices.iter().all(|&k| k < global_dim));
        Self { kind, indices, global_dim }
    }

    /// Global coordinate selected by each row.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn rows(&self) -> usize {
        self.indices.len()
    }

    pub fn global_dim(&self) -> usize {
        self.global_dim
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.indices.len(), self.global_dim);
        for (r, &c) in self.indices.iter().enumerate() {
            m[(r, c)] = 1.0;
        }
        m
    }

    /// `L x` without forming `L`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&k| x[k]))
    }

    /// `Lᵀ y`: scatter into a zero global vector.
    pub fn scatter(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.global_dim);
        for (r, &k) in self.indices.iter().enumerate() {
            out[k] += y[r];
        }
        out
    }
}

/// Closed neighborhood of one agent and where each member's state lives
/// inside `x_{N_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub agent: usize,
    /// Ascending, contains `agent`.
    pub members: Vec<usize>,
    /// Offset of each member's block inside `x_{N_i}`.
    pub offsets: Vec<usize>,
    pub dim: usize,
}

impl Neighborhood {
    pub fn new(graph: &CommGraph, agent: usize, dims: &[usize]) -> Self {
        let members = graph.closed_neighborhood(agent);
        let mut offsets = Vec::with_capacity(members.len());
        let mut dim = 0;
        for &j in &members {
            offsets.push(dim);
            dim += dims[j];
        }
        Self { agent, members, offsets, dim }
    }

    /// Position of `agent` within `members`.
    pub fn position_of(&self, agent: usize) -> Option<usize> {
        self.members.binary_search(&agent).ok()
    }

    /// Offset of the owning agent's own block inside `x_{N_i}`.
    pub fn self_offset(&self) -> usize {
        self.offsets[self.position_of(self.agent).expect("agent in own neighborhood")]
    }
}

/// Global offsets of each agent's block in `x = col(x_i)`.
pub fn state_offsets(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect()
}

/// `(T_i, W_i)` for every agent.
pub fn build_lifting(graph: &CommGraph, dims: &[usize]) -> Vec<(LiftingMatrix, LiftingMatrix)> {
    let offsets = state_offsets(dims);
    let n: usize = dims.iter().sum();
    (0..graph.node_count())
        .map(|i| {
            let t = LiftingMatrix::new(
                LiftingKind::Agent,
                (offsets[i]..offsets[i] + dims[i]).collect(),
                n,
            );
            let w_idx = graph
                .closed_neighborhood(i)
                .into_iter()
                .flat_map(|j| offsets[j]..offsets[j] + dims[j])
                .collect();
            (t, LiftingMatrix::new(LiftingKind::Neighborhood, w_idx, n))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_of_three_scalar_agents() {
        let g = CommGraph::line(3).unwrap();
        let lifts = build_lifting(&g, &[1, 1, 1]);
        assert_eq!(lifts[1].1.indices(), &[0, 1, 2]);
        assert_eq!(lifts[0].1.indices(), &[0, 1]);
    }

    #[test]
    fn single_agent_is_identity() {
        let g = CommGraph::new(1, &[]).unwrap();
        let lifts = build_lifting(&g, &[3]);
        assert_eq!(lifts[0].0.to_matrix(), DMatrix::identity(3, 3));
        assert_eq!(lifts[0].1.to_matrix(), DMatrix::identity(3, 3));
    }

    #[test]
    fn line_of_three_two_dimensional_agents() {
        let g = CommGraph::line(3).unwrap();
        let lifts = build_lifting(&g, &[2, 2, 2]);
        assert_eq!(lifts[1].1.to_matrix(), DMatrix::identity(6, 6));
        assert_eq!(lifts[2].0.indices(), &[4, 5]);
    }

    #[test]
    fn selection_structure() {
        let g = CommGraph::new(4, &[(0, 3), (1, 2), (2, 3)]).unwrap();
        for (t, w) in build_lifting(&g, &[1, 2, 3, 1]) {
            for m in [t.to_matrix(), w.to_matrix()] {
                for r in 0..m.nrows() {
                    assert_eq!(m.row(r).sum(), 1.0);
                }
                for c in 0..m.ncols() {
                    assert!(m.column(c).sum() <= 1.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn lifting_consistency(xs in proptest::collection::vec(-10.0f64..10.0, 8)) {
            let g = CommGraph::new(4, &[(0, 1), (1, 2), (1, 3)]).unwrap();
            let dims = [2, 1, 3, 2];
            let x = DVector::from_vec(xs);
            for (i, (t, w)) in build_lifting(&g, &dims).iter().enumerate() {
                prop_assert_eq!(t.apply(&x), &t.to_matrix() * &x);
                prop_assert_eq!(w.apply(&x), &w.to_matrix() * &x);
                let nb = Neighborhood::new(&g, i, &dims);
                let xn = w.apply(&x);
                let own = xn.rows(nb.self_offset(), dims[i]).into_owned();
                prop_assert_eq!(own, t.apply(&x));
            }
        }
    }
}
