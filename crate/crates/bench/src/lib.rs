//! Fixtures shared by the criterion benches.

use dsf_core::model::ChainParams;
use dsf_core::partition::{Partition, SamplingDomain};
use dsf_core::synthesis::synthesize_family;
use dsf_core::{CertifiedSetFamily, NetworkModel, SynthesisConfig};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn chain(agents: usize) -> NetworkModel {
    NetworkModel::mass_spring_damper_chain(ChainParams::benchmark(agents, 0.2)).expect("chain model")
}

pub fn partition(model: &NetworkModel, m: usize, seed: u64) -> Partition {
    let dom = SamplingDomain::new(model.global_state_polytope(), None).expect("domain");
    Partition::random(&dom, m, &mut ChaCha8Rng::seed_from_u64(seed), Some(seed)).expect("partition")
}

pub fn family(model: &NetworkModel, m: usize, seed: u64) -> CertifiedSetFamily {
    synthesize_family(model, &partition(model, m, seed), &SynthesisConfig::default(), None).expect("synthesis")
}

/// Random states scaled into the first certified set and random inputs.
pub fn workload(model: &NetworkModel, family: &CertifiedSetFamily, n: usize) -> Vec<(DVector<f64>, DVector<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let set = &family.regions[0];
    (0..n)
        .map(|_| {
            let x = loop {
                let x = DVector::from_fn(model.state_dim(), |_, _| rng.gen_range(-1.0..1.0));
                let v = set.lyapunov(model, &x);
                if v > 0.0 {
                    break x * (rng.gen_range(0.0..1.0) / v.sqrt());
                }
            };
            let u = DVector::from_fn(model.input_dim(), |_, _| rng.gen_range(-1.2..1.2));
            (x, u)
        })
        .collect()
}
