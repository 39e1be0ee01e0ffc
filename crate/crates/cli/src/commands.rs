//! The five subcommands.

use std::path::Path;

use anyhow::Context as _;
use dsf_core::harness::{
    compare_filters, coverage_sweep, run_episodes, CompareOptions, EpisodeSpec, EpisodeTrace, Filter, SweepSpec,
};
use dsf_core::partition::{Partition, SamplingDomain};
use dsf_core::synthesis::{synthesize_family, FamilyRecord};
use dsf_core::{CertifiedSetFamily, ImplicitOptions, NetworkModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, FilterChoice};
use crate::output::{write_csv, write_json, Provenance};
use crate::ConfigError;

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub out: &'a Path,
    pub workers: Option<usize>,
}

fn build_model(cfg: &ExperimentConfig) -> anyhow::Result<NetworkModel> {
    NetworkModel::from_spec(cfg.model_spec()).map_err(|e| ConfigError(format!("model: {e}")).into())
}

fn build_partition(cfg: &ExperimentConfig, model: &NetworkModel) -> anyhow::Result<Partition> {
    let spec = cfg.partition.as_ref().ok_or_else(|| ConfigError("partition: section is required".into()))?;
    if let Some(sub) = &spec.subspace {
        if let Some(&bad) = sub.iter().find(|&&k| k >= model.state_dim()) {
            return Err(ConfigError(format!("partition.subspace: index {bad} >= state dimension {}", model.state_dim())).into());
        }
    }
    let domain = SamplingDomain::new(model.global_state_polytope(), spec.subspace.as_deref())?;
    let seed = cfg.partition_seed();
    Ok(Partition::random(&domain, spec.m, &mut ChaCha8Rng::seed_from_u64(seed), Some(seed))?)
}

fn load_family(cfg: &ExperimentConfig, model: &NetworkModel) -> anyhow::Result<CertifiedSetFamily> {
    let path = cfg.family.as_ref().ok_or_else(|| ConfigError("family: no family file given (--family)".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("family: cannot read {}: {e}", path.display())))?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("family {}: {e}", path.display())))?;
    // Accept both the wrapped file written by `synthesize` and a bare record.
    if let Some(inner) = value.get_mut("family") {
        value = inner.take();
    }
    let record: FamilyRecord =
        serde_json::from_value(value).map_err(|e| ConfigError(format!("family {}: {e}", path.display())))?;
    let family = CertifiedSetFamily::from_record(record).with_context(|| format!("loading {}", path.display()))?;
    family.check_model(model).context("family was synthesized for a different model")?;
    Ok(family)
}

#[derive(Serialize)]
struct PartitionOut {
    partition: dsf_core::partition::PartitionRecord,
    regions: usize,
}

pub fn partition(ctx: &Context) -> anyhow::Result<()> {
    let model = build_model(ctx.cfg)?;
    let part = build_partition(ctx.cfg, &model)?;
    let prov = Provenance::new(ctx.cfg, "partition");
    let body = PartitionOut { partition: part.to_record(), regions: part.regions.len() };
    write_json(&ctx.out.join("partition.json"), &prov, ctx.cfg, &body)
}

#[derive(Serialize)]
struct FamilyOut {
    fingerprint: String,
    family: FamilyRecord,
}

#[derive(Serialize)]
struct LogRegion {
    index: usize,
    status: String,
    objective: f64,
    solve_time: f64,
}

#[derive(Serialize)]
struct SynthesisLog {
    certified: Vec<LogRegion>,
    skipped: Vec<dsf_core::synthesis::SkippedRegion>,
    total_time: f64,
}

pub fn synthesize(ctx: &Context) -> anyhow::Result<()> {
    let model = build_model(ctx.cfg)?;
    let part = build_partition(ctx.cfg, &model)?;
    let start = std::time::Instant::now();
    let family = synthesize_family(&model, &part, &ctx.cfg.synthesis(), ctx.workers)?;
    let total_time = start.elapsed().as_secs_f64();
    log::info!("{} of {} regions certified in {total_time:.1}s", family.len(), part.regions.len());

    let prov = Provenance::new(ctx.cfg, "synthesize");
    let log_body = SynthesisLog {
        certified: family
            .regions
            .iter()
            .map(|r| LogRegion {
                index: r.index,
                status: format!("{:?}", r.status),
                objective: r.objective,
                solve_time: r.solve_time,
            })
            .collect(),
        skipped: family.skipped.clone(),
        total_time,
    };
    write_json(&ctx.out.join("synthesis_log.json"), &prov, ctx.cfg, &log_body)?;

    // Timings live in the log only, so the family file is reproducible.
    let mut record = family.to_record();
    for r in &mut record.regions {
        r.solve_time = 0.0;
    }
    let body = FamilyOut { fingerprint: family.fingerprint.clone(), family: record };
    write_json(&ctx.out.join("family.json"), &prov, ctx.cfg, &body)
}

#[derive(Serialize)]
struct EpisodeSummary {
    episode: u64,
    steps: usize,
    violations: usize,
    interventions: usize,
    faults: usize,
    total_reward: f64,
    x0: Vec<f64>,
}

#[derive(Serialize)]
struct SimulateOut {
    fingerprint: String,
    filter: FilterChoice,
    violations: usize,
    intervention_rate: f64,
    reward_note: String,
    episodes: Vec<EpisodeSummary>,
}

pub fn simulate(ctx: &Context) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let model = build_model(cfg)?;
    let family = match (cfg.filter, &cfg.family) {
        (FilterChoice::None, None) | (FilterChoice::Implicit, None) => None,
        _ => Some(load_family(cfg, &model)?),
    };
    let filter = match cfg.filter {
        FilterChoice::None => Filter::None,
        FilterChoice::Explicit => Filter::Explicit { family: family.as_ref().expect("loaded"), mode: cfg.membership },
        FilterChoice::Implicit => Filter::Implicit { options: implicit_options(cfg), fallback: family.as_ref() },
    };
    let spec = EpisodeSpec { policy: cfg.policy, horizon: cfg.horizon, theta: cfg.theta.clone(), initial: cfg.initial.clone() };
    let traces = run_episodes(&model, &filter, &spec, cfg.seed, cfg.episodes)?;

    let prov = Provenance::new(cfg, "simulate");
    for t in &traces {
        let path = ctx.out.join(format!("episode_{:04}.csv", t.meta.episode));
        write_csv(&path, &prov, |buf| Ok(t.write_csv(&model, buf)?))?;
    }
    let steps: usize = traces.iter().map(|t| t.steps.len()).sum();
    let body = SimulateOut {
        fingerprint: model.fingerprint().to_string(),
        filter: cfg.filter,
        violations: traces.iter().map(EpisodeTrace::violations).sum(),
        intervention_rate: traces.iter().map(EpisodeTrace::interventions).sum::<usize>() as f64 / steps as f64,
        reward_note: traces[0].meta.reward_note.clone(),
        episodes: traces
            .iter()
            .map(|t| EpisodeSummary {
                episode: t.meta.episode,
                steps: t.steps.len(),
                violations: t.violations(),
                interventions: t.interventions(),
                faults: t.faults(),
                total_reward: t.total_reward(),
                x0: t.meta.x0.clone(),
            })
            .collect(),
    };
    log::info!("{} episodes, {} violations, intervention rate {:.3}", traces.len(), body.violations, body.intervention_rate);
    write_json(&ctx.out.join("summary.json"), &prov, cfg, &body)
}

fn implicit_options(cfg: &ExperimentConfig) -> ImplicitOptions {
    ImplicitOptions { membership: cfg.membership, structured: cfg.structured, tolerances: cfg.tolerances }
}

pub fn coverage(ctx: &Context) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let cov = cfg.coverage.as_ref().ok_or_else(|| ConfigError("coverage: section is required".into()))?;
    build_model(cfg)?;
    let sweep = SweepSpec {
        m_list: cov.m_list.clone(),
        gamma_list: cov.gamma_list.clone(),
        partitions_per_cell: cov.partitions_per_cell,
        samples: cov.samples,
        master_seed: cfg.seed,
        seed_subspace: cfg.partition.as_ref().and_then(|p| p.subspace.clone()),
    };
    let result = coverage_sweep(&cfg.model, &sweep, &cfg.synthesis())?;
    let prov = Provenance::new(cfg, "coverage");
    write_csv(&ctx.out.join("coverage.csv"), &prov, |buf| Ok(result.write_csv(buf)?))?;
    write_json(&ctx.out.join("coverage.json"), &prov, cfg, &result)
}

pub fn compare(ctx: &Context) -> anyhow::Result<()> {
    let cfg = ctx.cfg;
    let model = build_model(cfg)?;
    let family = load_family(cfg, &model)?;
    let opts = CompareOptions {
        pairs: cfg.compare.pairs,
        min_certified: cfg.compare.min_certified,
        input_scale: cfg.compare.input_scale,
        membership: cfg.membership,
        implicit: implicit_options(cfg),
    };
    let report = compare_filters(&model, &family, &opts, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?;
    log::info!(
        "explicit certified {}/{}, implicit certified {}, injection violations {}",
        report.explicit_certified,
        report.pairs,
        report.implicit_certified,
        report.injection_violations
    );
    let prov = Provenance::new(cfg, "compare");
    write_json(&ctx.out.join("comparison.json"), &prov, cfg, &report)
}
