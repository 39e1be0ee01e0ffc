//! Shared fixtures for unit tests.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lmi::SolveStatus;
use crate::model::{ChainParams, CommGraph, InlineAgent, InlineModel, ModelSpec, NetworkModel};
use crate::partition::{Partition, SamplingDomain};
use crate::synthesis::{synthesize_family, CertifiedRegion, CertifiedSetFamily, ObjectiveMode, SynthesisConfig};

pub fn scalar_model(h: f64) -> NetworkModel {
    NetworkModel::from_spec(ModelSpec::Inline(InlineModel {
        graph: CommGraph::new(1, &[]).unwrap(),
        agents: vec![InlineAgent::scalar(0.5, 1.0, h, 1.0)],
    }))
    .unwrap()
}

/// Scalar set `{x : p x² <= 1}` with gain `k`.
pub fn scalar_region(index: usize, p: f64, k: f64) -> CertifiedRegion {
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    CertifiedRegion {
        index,
        seed: DVector::zeros(1),
        region_a: DMatrix::zeros(0, 1),
        region_b: DVector::zeros(0),
        e: vec![m(1.0 / p)],
        p: vec![m(p)],
        y: vec![m(k / p)],
        k: vec![m(k)],
        s: vec![vec![m(0.0)]],
        witness: DVector::zeros(1),
        status: SolveStatus::Optimal,
        objective: 1.0 / p,
        objective_mode: ObjectiveMode::MaximizeTrace,
        contraction: 0.0,
        solve_time: 0.0,
    }
}

pub fn scalar_family(model: &NetworkModel, regions: Vec<CertifiedRegion>) -> CertifiedSetFamily {
    CertifiedSetFamily {
        fingerprint: model.fingerprint().to_string(),
        config: SynthesisConfig::default(),
        regions,
        skipped: vec![],
    }
}

/// 3-agent chain, γ = 0.2, four cells; synthesized once per test binary.
pub fn chain_fixture() -> &'static (NetworkModel, CertifiedSetFamily) {
    static CELL: OnceLock<(NetworkModel, CertifiedSetFamily)> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = NetworkModel::mass_spring_damper_chain(ChainParams::benchmark(3, 0.2)).unwrap();
        let dom = SamplingDomain::new(model.global_state_polytope(), None).unwrap();
        let part = Partition::random(&dom, 4, &mut ChaCha8Rng::seed_from_u64(21), Some(21)).unwrap();
        let fam = synthesize_family(&model, &part, &SynthesisConfig::default(), None).unwrap();
        (model, fam)
    })
}
