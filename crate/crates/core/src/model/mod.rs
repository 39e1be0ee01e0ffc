//! Communication graph, per-agent uncertain dynamics, constraints and the
//! assembled network.

mod builders;
mod dynamics;
mod graph;
mod lifting;
mod polytope;
mod spec;

pub use builders::{ChainParams, MassDamperParams, DEFAULT_DT};
pub use dynamics::{UncertainAffineDynamics, DEFAULT_VERTEX_CAP};
pub use graph::CommGraph;
pub use lifting::{build_lifting, state_offsets, LiftingKind, LiftingMatrix, Neighborhood};
pub use polytope::{PolytopicSet, SetRole};
pub use spec::{InlineAgent, InlineModel, ModelSpec};

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Everything the filters need to know about one agent.
#[derive(Debug, Clone)]
pub struct Agent {
    pub state_dim: usize,
    pub input_dim: usize,
    pub neighborhood: Neighborhood,
    pub dynamics: UncertainAffineDynamics,
    /// `X_i` over `x_{N_i}`.
    pub state_set: PolytopicSet,
    /// `U_i` over `u_i`.
    pub input_set: PolytopicSet,
    pub agent_lift: LiftingMatrix,
    pub nbhd_lift: LiftingMatrix,
    /// Corners of `Θ_i`, lexicographic.
    pub vertices: Vec<DVector<f64>>,
}

/// Immutable network description.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    spec: ModelSpec,
    graph: CommGraph,
    agents: Vec<Agent>,
    state_offsets: Vec<usize>,
    input_offsets: Vec<usize>,
    state_dim: usize,
    input_dim: usize,
    fingerprint: String,
}

impl NetworkModel {
    pub fn from_spec(spec: ModelSpec) -> Result<Self> {
        Self::from_spec_with_cap(spec, DEFAULT_VERTEX_CAP)
    }

    pub fn from_spec_with_cap(spec: ModelSpec, vertex_cap: usize) -> Result<Self> {
        let (graph, data) = match &spec {
            ModelSpec::MassSpringDamperChain(p) => builders::chain_agents(p)?,
            ModelSpec::MassDamper2d(p) => builders::mass_damper_agents(p)?,
            ModelSpec::Inline(m) => m.agents_data()?,
        };
        let dims: Vec<usize> = data.iter().map(|a| a.state_dim).collect();
        let in_dims: Vec<usize> = data.iter().map(|a| a.input_dim).collect();
        if dims.contains(&0) {
            return Err(Error::InvalidModel("every agent needs a positive state dimension".into()));
        }
        let lifts = build_lifting(&graph, &dims);
        let mut agents = Vec::with_capacity(data.len());
        for (i, (d, (t, w))) in data.into_iter().zip(lifts).enumerate() {
            let neighborhood = Neighborhood::new(&graph, i, &dims);
            if d.dynamics.neighborhood_dim() != neighborhood.dim || d.dynamics.state_dim() != d.state_dim {
                return Err(Error::Dimension(format!(
                    "agent {i}: A_i is {}x{}, expected {}x{}",
                    d.dynamics.state_dim(),
                    d.dynamics.neighborhood_dim(),
                    d.state_dim,
                    neighborhood.dim
                )));
            }
            if d.state_set.dim() != neighborhood.dim || d.input_set.dim() != d.input_dim {
                return Err(Error::Dimension(format!("agent {i}: constraint set dimension")));
            }
            let vertices = d.dynamics.vertices(i, vertex_cap)?;
            agents.push(Agent {
                state_dim: d.state_dim,
                input_dim: d.input_dim,
                neighborhood,
                dynamics: d.dynamics,
                state_set: d.state_set,
                input_set: d.input_set,
                agent_lift: t,
                nbhd_lift: w,
                vertices,
            });
        }
        let fingerprint = hex::encode(Sha256::digest(serde_json::to_vec(&spec)?));
        Ok(Self {
            spec,
            graph,
            state_offsets: state_offsets(&dims),
            input_offsets: state_offsets(&in_dims),
            state_dim: dims.iter().sum(),
            input_dim: in_dims.iter().sum(),
            agents,
            fingerprint,
        })
    }

    pub fn mass_spring_damper_chain(params: ChainParams) -> Result<Self> {
        Self::from_spec(ModelSpec::MassSpringDamperChain(params))
    }

    pub fn mass_damper_2d(params: MassDamperParams) -> Result<Self> {
        Self::from_spec(ModelSpec::MassDamper2d(params))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(s)?)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Hex SHA-256 of the model's JSON description.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &Agent {
        &self.agents[i]
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn state_offset(&self, i: usize) -> usize {
        self.state_offsets[i]
    }

    pub fn input_offset(&self, i: usize) -> usize {
        self.input_offsets[i]
    }

    pub fn agent_state(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        x.rows(self.state_offsets[i], self.agents[i].state_dim).into_owned()
    }

    pub fn nbhd_state(&self, x: &DVector<f64>, i: usize) -> DVector<f64> {
        self.agents[i].nbhd_lift.apply(x)
    }

    pub fn agent_input(&self, u: &DVector<f64>, i: usize) -> DVector<f64> {
        u.rows(self.input_offsets[i], self.agents[i].input_dim).into_owned()
    }

    pub fn nominal_theta(&self) -> Vec<DVector<f64>> {
        self.agents.iter().map(|a| a.dynamics.theta_nominal.clone()).collect()
    }

    fn check_theta(&self, theta: &[DVector<f64>]) -> Result<()> {
        if theta.len() != self.agents.len() {
            return Err(Error::Dimension(format!(
                "{} parameter vectors for {} agents",
                theta.len(),
                self.agents.len()
            )));
        }
        for (i, (a, t)) in self.agents.iter().zip(theta).enumerate() {
            if !a.dynamics.contains(t) {
                return Err(Error::ParameterOutsideBox { agent: i, theta: t.iter().copied().collect() });
            }
        }
        Ok(())
    }

    /// Dense `(A(θ), B(θ))` of the whole network.
    pub fn assemble_global(&self, theta: &[DVector<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_theta(theta)?;
        let mut a = DMatrix::zeros(self.state_dim, self.state_dim);
        let mut b = DMatrix::zeros(self.state_dim, self.input_dim);
        for (i, ag) in self.agents.iter().enumerate() {
            let (ai, bi) = ag.dynamics.eval_unchecked(&theta[i]);
            let r0 = self.state_offsets[i];
            for (c, &g) in ag.nbhd_lift.indices().iter().enumerate() {
                for r in 0..ag.state_dim {
                    a[(r0 + r, g)] += ai[(r, c)];
                }
            }
            b.view_mut((r0, self.input_offsets[i]), (ag.state_dim, ag.input_dim)).copy_from(&bi);
        }
        Ok((a, b))
    }

    /// One step of the true system; `theta` is not range-checked.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, theta: &[DVector<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.state_dim);
        for (i, ag) in self.agents.iter().enumerate() {
            let xi = ag.dynamics.predict(&theta[i], &ag.nbhd_lift.apply(x), &self.agent_input(u, i));
            out.rows_mut(self.state_offsets[i], ag.state_dim).copy_from(&xi);
        }
        out
    }

    pub fn validate_theta(&self, theta: &[DVector<f64>]) -> Result<()> {
        self.check_theta(theta)
    }

    /// Largest state-constraint residual of each agent (positive = violated).
    pub fn state_residuals(&self, x: &DVector<f64>) -> Vec<f64> {
        self.agents.iter().map(|a| a.state_set.max_residual(&a.nbhd_lift.apply(x))).collect()
    }

    pub fn input_residuals(&self, u: &DVector<f64>) -> Vec<f64> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.input_set.max_residual(&self.agent_input(u, i)))
            .collect()
    }

    /// `X = {x : H_i W_i x <= h_i ∀i}` as one global polytope.
    pub fn global_state_polytope(&self) -> PolytopicSet {
        let rows: usize = self.agents.iter().map(|a| a.state_set.rows()).sum();
        let mut m = DMatrix::zeros(rows, self.state_dim);
        let mut b = DVector::zeros(rows);
        let mut r = 0;
        for a in &self.agents {
            for l in 0..a.state_set.rows() {
                for (c, &g) in a.nbhd_lift.indices().iter().enumerate() {
                    m[(r, g)] = a.state_set.matrix[(l, c)];
                }
                b[r] = a.state_set.bound[l];
                r += 1;
            }
        }
        PolytopicSet { matrix: m, bound: b, role: SetRole::Global }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain3() -> NetworkModel {
        NetworkModel::mass_spring_damper_chain(ChainParams::benchmark(3, 0.2)).unwrap()
    }

    #[test]
    fn interior_chain_agent_nominal_block() {
        let m = chain3();
        let ag = m.agent(1);
        let (a, b) = ag.dynamics.eval(1, &ag.dynamics.theta_nominal).unwrap();
        // Own block sits at columns 2..4 of x_{N_2} = (x_1, x_2, x_3).
        let own = a.columns(2, 2).into_owned();
        let want = DMatrix::from_row_slice(2, 2, &[1.0, 0.05, -0.2, 0.9]);
        assert!((own - want).abs().max() < 1e-15);
        assert_eq!(b[(1, 0)], 0.05);
        assert_eq!(ag.dynamics.param_dim(), 4);
        assert_eq!(ag.vertices.len(), 16);
    }

    #[test]
    fn chain_global_matrix_is_block_tridiagonal() {
        let m = chain3();
        let (a, b) = m.assemble_global(&m.nominal_theta()).unwrap();
        assert_eq!(a.view((0, 4), (2, 2)).abs().max(), 0.0);
        assert_eq!(a.view((4, 0), (2, 2)).abs().max(), 0.0);
        assert!(a.view((0, 2), (2, 2)).abs().max() > 0.0);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(b.view((2 * i, j), (2, 1)).abs().max(), 0.0);
                }
            }
        }
    }

    #[test]
    fn single_agent_chain_has_no_parameters() {
        let m = NetworkModel::mass_spring_damper_chain(ChainParams::benchmark(1, 0.3)).unwrap();
        assert_eq!(m.agent(0).dynamics.param_dim(), 0);
        assert_eq!(m.agent(0).vertices.len(), 1);
    }

    #[test]
    fn mass_damper_parameters_and_decoupling() {
        let m = NetworkModel::mass_damper_2d(MassDamperParams::benchmark(3, 0.2)).unwrap();
        let end = m.agent(0);
        assert_eq!(end.dynamics.theta_nominal.as_slice(), &[0.1, 0.5]);
        assert_eq!(end.vertices.len(), 4);
        assert!((end.vertices[1][1] - 0.6).abs() < 1e-15);

        let mut p = MassDamperParams::benchmark(3, 0.2);
        p.damping = 0.0;
        let m = NetworkModel::mass_damper_2d(p).unwrap();
        let (a, _) = m.assemble_global(&m.nominal_theta()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(a.view((4 * i, 4 * j), (4, 4)).abs().max(), 0.0);
                }
            }
        }
        // x and y channels of one agent never mix.
        assert_eq!(a.view((0, 2), (2, 2)).abs().max(), 0.0);
    }

    #[test]
    fn decoupled_inline_model_is_block_diagonal() {
        let agent = InlineAgent {
            state_dim: 1,
            input_dim: 1,
            a0: vec![vec![0.5]],
            b0: vec![vec![1.0]],
            a_sens: vec![],
            b_sens: vec![],
            theta_nominal: vec![],
            gamma: None,
            theta_lo: None,
            theta_hi: None,
            state_matrix: vec![vec![1.0], vec![-1.0]],
            state_bound: vec![1.0, 1.0],
            input_matrix: vec![vec![1.0], vec![-1.0]],
            input_bound: vec![1.0, 1.0],
        };
        let spec = ModelSpec::Inline(InlineModel {
            graph: CommGraph::new(2, &[]).unwrap(),
            agents: vec![agent.clone(), agent],
        });
        let m = NetworkModel::from_spec(spec).unwrap();
        let (a, _) = m.assemble_global(&m.nominal_theta()).unwrap();
        assert_eq!(a, DMatrix::from_diagonal_element(2, 2, 0.5));
    }

    #[test]
    fn json_round_trip_keeps_fingerprint() {
        let m = chain3();
        let s = serde_json::to_string(m.spec()).unwrap();
        let back = NetworkModel::from_json(&s).unwrap();
        assert_eq!(back.fingerprint(), m.fingerprint());
        let other = NetworkModel::mass_spring_damper_chain(ChainParams::benchmark(3, 0.3)).unwrap();
        assert_ne!(other.fingerprint(), m.fingerprint());
    }

    #[test]
    fn zero_state_zero_input_stays_zero() {
        let m = chain3();
        let x = m.step(&DVector::zeros(6), &DVector::zeros(3), &m.nominal_theta());
        assert_eq!(x, DVector::zeros(6));
    }

    proptest! {
        #[test]
        fn step_matches_dense_global(
            xs in proptest::collection::vec(-2.0f64..2.0, 6),
            us in proptest::collection::vec(-1.0f64..1.0, 3),
            pick in 0usize..16,
        ) {
            let m = chain3();
            let theta: Vec<_> = m.agents().iter().map(|a| a.vertices[pick % a.vertices.len()].clone()).collect();
            let x = DVector::from_vec(xs);
            let u = DVector::from_vec(us);
            let (a, b) = m.assemble_global(&theta).unwrap();
            let dense = &a * &x + &b * &u;
            let local = m.step(&x, &u, &theta);
            prop_assert!((dense - &local).abs().max() < 1e-12);
            for (i, th) in theta.iter().enumerate() {
                let (ai, _) = m.agent(i).dynamics.eval(i, th).unwrap();
                let rows = (&a * &x).rows(2 * i, 2).into_owned();
                prop_assert!((rows - ai * m.nbhd_state(&x, i)).abs().max() < 1e-12);
            }
        }

        #[test]
        fn step_is_linear(
            x1 in proptest::collection::vec(-2.0f64..2.0, 6),
            x2 in proptest::collection::vec(-2.0f64..2.0, 6),
            u1 in proptest::collection::vec(-1.0f64..1.0, 3),
            u2 in proptest::collection::vec(-1.0f64..1.0, 3),
        ) {
            let m = chain3();
            let th = m.nominal_theta();
            let (x1, x2) = (DVector::from_vec(x1), DVector::from_vec(x2));
            let (u1, u2) = (DVector::from_vec(u1), DVector::from_vec(u2));
            let lhs = m.step(&(&x1 + &x2), &(&u1 + &u2), &th);
            let rhs = m.step(&x1, &u1, &th) + m.step(&x2, &u2, &th)
                - m.step(&DVector::zeros(6), &DVector::zeros(3), &th);
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }
}
