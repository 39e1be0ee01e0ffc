//! Offline synthesis of one structured robust invariant ellipsoid and backup
//! gain per partition cell.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diag, min_eigenvalue, quad_form, RowMajor};
use crate::lmi::structured::{StructuredOptions, StructuredSolution, StructuredVars};
use crate::lmi::{self, point_in_ellipsoid_level, AffExpr, AffMatrix, SdpProblem, SolveStatus, Tolerances, VarRole};
use crate::model::NetworkModel;
use crate::partition::{Partition, Region};

/// Direction of the trace objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// Largest ellipsoids; covers the most state space.
    #[default]
    MaximizeTrace,
    /// Smallest ellipsoids that still reach the cell.
    MinimizeTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    pub objective: ObjectiveMode,
    pub structured: StructuredOptions,
    pub tolerances: Tolerances,
}

/// One solved cell: `X^j = {x : Σ x_iᵀ P_i x_i <= 1}` with gains `K_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedRegion {
    pub index: usize,
    pub seed: DVector<f64>,
    pub region_a: DMatrix<f64>,
    pub region_b: DVector<f64>,
    pub e: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub y: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    /// Coupling blocks, `s[r][k]` for the `k`-th member of agent `r`'s neighborhood.
    pub s: Vec<Vec<DMatrix<f64>>>,
    pub witness: DVector<f64>,
    pub status: SolveStatus,
    /// `Σ tr(E_i)`.
    pub objective: f64,
    pub objective_mode: ObjectiveMode,
    /// Lyapunov contraction the invariance blocks were built with.
    pub contraction: f64,
    pub solve_time: f64,
}

impl CertifiedRegion {
    /// `Σ x_iᵀ P_i x_i`.
    pub fn lyapunov(&self, model: &NetworkModel, x: &DVector<f64>) -> f64 {
        (0..model.num_agents()).map(|i| quad_form(&self.p[i], &model.agent_state(x, i))).sum()
    }

    pub fn agent_term(&self, model: &NetworkModel, x: &DVector<f64>, i: usize) -> f64 {
        quad_form(&self.p[i], &model.agent_state(x, i))
    }

    /// `K_i x_{N_i}` stacked over agents.
    pub fn backup_input(&self, model: &NetworkModel, x: &DVector<f64>) -> DVector<f64> {
        let mut u = DVector::zeros(model.input_dim());
        for i in 0..model.num_agents() {
            let ui = &self.k[i] * model.nbhd_state(x, i);
            u.rows_mut(model.input_offset(i), ui.len()).copy_from(&ui);
        }
        u
    }

    /// `E_{N_i}` assembled from the stored `E_j`.
    pub fn e_n(&self, model: &NetworkModel, i: usize) -> DMatrix<f64> {
        let blocks: Vec<_> = model.agent(i).neighborhood.members.iter().map(|&j| self.e[j].clone()).collect();
        block_diag(&blocks)
    }

    pub fn region_residual(&self, x: &DVector<f64>) -> f64 {
        if self.region_b.is_empty() {
            return f64::NEG_INFINITY;
        }
        (&self.region_a * x - &self.region_b).max()
    }
}

/// Result of one cell's program.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionOutcome {
    Certified(Box<CertifiedRegion>),
    Infeasible { index: usize, diagnostic: String },
}

/// Solves the structured program for one cell.
pub fn synthesize_region(model: &NetworkModel, region: &Region, config: &SynthesisConfig) -> Result<RegionOutcome> {
    let n = model.state_dim();
    if region.a.ncols() != n || region.a.nrows() != region.b.len() {
        return Err(Error::Dimension(format!(
            "region {} has A {:?}, b {}, state dimension {n}",
            region.index,
            region.a.shape(),
            region.b.len()
        )));
    }
    let start = Instant::now();
    let mut problem = SdpProblem::new();
    let vars = StructuredVars::declare(&mut problem, model);
    vars.add_constraints(&mut problem, model, &config.structured)?;

    let x = problem.add_var(n, 1, false, VarRole::Point, "x");
    let level = (1.0 - config.structured.backoff) / model.num_agents() as f64;
    for i in 0..model.num_agents() {
        let off = model.state_offset(i);
        let xi = AffMatrix::column((0..model.agent(i).state_dim).map(|d| x.entry(off + d, 0)).collect());
        problem.add_lmi(point_in_ellipsoid_level(
            &xi,
            &vars.e[i].expr(),
            AffExpr::constant(level),
            format!("witness agent {i}"),
        )?);
    }
    for l in 0..region.a.nrows() {
        let mut e = AffExpr::constant(-region.b[l]);
        for c in 0..n {
            if region.a[(l, c)] != 0.0 {
                e.add_scaled(&x.entry(c, 0), region.a[(l, c)]);
            }
        }
        problem.add_le(e, format!("region {} row {l}", region.index));
    }

    let sign = match config.objective {
        ObjectiveMode::MaximizeTrace => -1.0,
        ObjectiveMode::MinimizeTrace => 1.0,
    };
    let mut obj = AffExpr::zero();
    for e in &vars.e {
        for d in 0..e.rows {
            obj.add_scaled(&e.entry(d, d), sign);
        }
    }
    problem.set_objective(obj);

    let result = lmi::solve(&problem, &config.tolerances)?;
    match result.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => {
            return Ok(RegionOutcome::Infeasible {
                index: region.index,
                diagnostic: result.diagnostic.unwrap_or_else(|| "infeasible".into()),
            })
        }
        other => {
            return Err(Error::Solver(format!(
                "region {}: {other:?}: {}",
                region.index,
                result.diagnostic.unwrap_or_default()
            )))
        }
    }
    let StructuredSolution { e, p, y, k, s } = vars.extract(model, &result)?;
    let objective = e.iter().map(|m| m.trace()).sum();
    Ok(RegionOutcome::Certified(Box::new(CertifiedRegion {
        index: region.index,
        seed: region.seed.clone(),
        region_a: region.a.clone(),
        region_b: region.b.clone(),
        e,
        p,
        y,
        k,
        s,
        witness: result.value(&x).column(0).into_owned(),
        status: SolveStatus::Optimal,
        objective,
        objective_mode: config.objective,
        contraction: config.structured.contraction,
        solve_time: start.elapsed().as_secs_f64(),
    })))
}

/// A cell that produced no set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRegion {
    pub index: usize,
    pub seed: Vec<f64>,
    pub diagnostic: String,
}

/// The union of certified sets used by the online filters.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedSetFamily {
    pub fingerprint: String,
    pub config: SynthesisConfig,
    pub regions: Vec<CertifiedRegion>,
    pub skipped: Vec<SkippedRegion>,
}

impl CertifiedSetFamily {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn check_model(&self, model: &NetworkModel) -> Result<()> {
        if self.fingerprint != model.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: self.fingerprint.clone(),
                actual: model.fingerprint().to_string(),
            });
        }
        Ok(())
    }

    /// Smallest `j` whose set contains `x` within `slack`.
    pub fn containing(&self, model: &NetworkModel, x: &DVector<f64>, slack: f64) -> Option<usize> {
        self.regions.iter().position(|r| r.lyapunov(model, x) <= 1.0 + slack)
    }

    pub fn to_record(&self) -> FamilyRecord {
        FamilyRecord {
            fingerprint: self.fingerprint.clone(),
            config: self.config,
            regions: self.regions.iter().map(RegionRecord::from).collect(),
            skipped: self.skipped.clone(),
        }
    }

    pub fn from_record(r: FamilyRecord) -> Result<Self> {
        let regions = r.regions.iter().map(RegionRecord::to_region).collect::<Result<Vec<_>>>()?;
        if regions.is_empty() {
            return Err(Error::AllRegionsInfeasible("family file lists no certified regions".into()));
        }
        Ok(Self { fingerprint: r.fingerprint, config: r.config, regions, skipped: r.skipped })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(serde_json::from_str(s)?)
    }
}

/// Solves every cell, `workers` threads at a time (all cores if `None`).
pub fn synthesize_family(
    model: &NetworkModel,
    partition: &Partition,
    config: &SynthesisConfig,
    workers: Option<usize>,
) -> Result<CertifiedSetFamily> {
    let run = || -> Vec<Result<RegionOutcome>> {
        partition.regions.par_iter().map(|r| synthesize_region(model, r, config)).collect()
    };
    let outcomes = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Solver(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut regions = Vec::new();
    let mut skipped = Vec::new();
    for (outcome, region) in outcomes.into_iter().zip(&partition.regions) {
        let outcome = outcome.or_else(|err| {
            log::warn!("region {}: {err}", region.index);
            Ok::<_, Error>(RegionOutcome::Infeasible { index: region.index, diagnostic: err.to_string() })
        })?;
        match outcome {
            RegionOutcome::Certified(c) => {
                log::info!("region {}: objective {:.6} in {:.2}s", c.index, c.objective, c.solve_time);
                regions.push(*c);
            }
            RegionOutcome::Infeasible { index, diagnostic } => {
                log::warn!("region {index} skipped: {diagnostic}");
                skipped.push(SkippedRegion { index, seed: region.seed.iter().copied().collect(), diagnostic });
            }
        }
    }
    if regions.is_empty() {
        let why = skipped.iter().map(|s| format!("region {}: {}", s.index, s.diagnostic)).collect::<Vec<_>>().join("; ");
        return Err(Error::AllRegionsInfeasible(why));
    }
    Ok(CertifiedSetFamily { fingerprint: model.fingerprint().to_string(), config: *config, regions, skipped })
}

/// Numerical post-check of one certified region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub region: usize,
    pub samples: usize,
    /// Max over boundary samples of `max_θ Σ x_i⁺ᵀ P_i x_i⁺` under `u = K x`.
    pub max_successor_value: f64,
    pub max_state_residual: f64,
    pub max_input_residual: f64,
    /// Support-function margins over the whole ellipsoid (positive = violated).
    pub exact_state_margin: f64,
    pub exact_input_margin: f64,
    pub gain_recovery_error: f64,
    pub witness_value: f64,
    pub witness_region_residual: f64,
    /// Smallest eigenvalue over the invariance matrices rebuilt from the
    /// stored solution; negative coupling eigenvalues are reported as their
    /// largest eigenvalue with flipped sign.
    pub min_lmi_eigenvalue: f64,
    pub passed: bool,
}

pub const SUCCESSOR_TOL: f64 = 1e-6;
pub const CONSTRAINT_TOL: f64 = 1e-8;

/// Samples `n_samples` points on `∂X^j` and checks robust invariance and
/// constraint satisfaction at every parameter vertex.
pub fn validate_certified<R: Rng + ?Sized>(
    region: &CertifiedRegion,
    model: &NetworkModel,
    n_samples: usize,
    rng: &mut R,
) -> Result<ValidationReport> {
    let n_agents = model.num_agents();
    let mut chol = Vec::with_capacity(n_agents);
    for (i, e) in region.e.iter().enumerate() {
        chol.push(
            e.clone()
                .cholesky()
                .ok_or_else(|| Error::Solver(format!("E{i} of region {} is not positive definite", region.index)))?
                .l(),
        );
    }

    let mut max_succ = f64::NEG_INFINITY;
    let mut max_state = f64::NEG_INFINITY;
    let mut max_input = f64::NEG_INFINITY;
    let n = model.state_dim();
    for _ in 0..n_samples {
        let w: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        let w = &w / w.norm();
        let mut x = DVector::zeros(n);
        for (i, l) in chol.iter().enumerate() {
            let off = model.state_offset(i);
            let d = model.agent(i).state_dim;
            let xi = l * w.rows(off, d);
            x.rows_mut(off, d).copy_from(&xi);
        }
        let mut succ = 0.0;
        for (i, agent) in model.agents().iter().enumerate() {
            let x_n = model.nbhd_state(&x, i);
            let u = &region.k[i] * &x_n;
            max_state = max_state.max(agent.state_set.max_residual(&x_n));
            max_input = max_input.max(agent.input_set.max_residual(&u));
            let worst = agent
                .vertices
                .iter()
                .map(|th| quad_form(&region.p[i], &agent.dynamics.predict(th, &x_n, &u)))
                .fold(f64::NEG_INFINITY, f64::max);
            succ += worst;
        }
        max_succ = max_succ.max(succ);
    }

    let mut exact_state = f64::NEG_INFINITY;
    let mut exact_input = f64::NEG_INFINITY;
    let mut gain_err: f64 = 0.0;
    let mut min_eig = f64::INFINITY;
    let decay = 1.0 - region.contraction;
    for (i, agent) in model.agents().iter().enumerate() {
        let e_n = region.e_n(model, i);
        for l in 0..agent.state_set.rows() {
            let h = agent.state_set.matrix.row(l);
            exact_state = exact_state.max((h * &e_n * h.transpose())[(0, 0)].max(0.0).sqrt() - agent.state_set.bound[l]);
        }
        let ke = &region.k[i] * &e_n * region.k[i].transpose();
        for l in 0..agent.input_set.rows() {
            let o = agent.input_set.matrix.row(l);
            exact_input = exact_input.max((o * &ke * o.transpose())[(0, 0)].max(0.0).sqrt() - agent.input_set.bound[l]);
        }
        gain_err = gain_err.max((&region.k[i] * &e_n - &region.y[i]).amax());

        let nb = &agent.neighborhood;
        let mut e_bar = DMatrix::zeros(nb.dim, nb.dim);
        let so = nb.self_offset();
        e_bar.view_mut((so, so), (agent.state_dim, agent.state_dim)).copy_from(&region.e[i]);
        let s_n = block_diag(&region.s[i]);
        for th in &agent.vertices {
            let (a, b) = agent.dynamics.eval_unchecked(th);
            let lower = &a * &e_n + &b * &region.y[i];
            let mut m = DMatrix::zeros(nb.dim + agent.state_dim, nb.dim + agent.state_dim);
            m.view_mut((0, 0), (nb.dim, nb.dim)).copy_from(&(&e_bar * decay + &s_n));
            m.view_mut((nb.dim, 0), (agent.state_dim, nb.dim)).copy_from(&lower);
            m.view_mut((0, nb.dim), (nb.dim, agent.state_dim)).copy_from(&lower.transpose());
            m.view_mut((nb.dim, nb.dim), (agent.state_dim, agent.state_dim)).copy_from(&region.e[i]);
            min_eig = min_eig.min(min_eigenvalue(&m));
        }
        let mut coupling = DMatrix::zeros(agent.state_dim, agent.state_dim);
        for (r, other) in model.agents().iter().enumerate() {
            if let Some(pos) = other.neighborhood.position_of(i) {
                coupling += &region.s[r][pos];
            }
        }
        min_eig = min_eig.min(min_eigenvalue(&(-coupling)));
    }

    let witness_value = region.lyapunov(model, &region.witness);
    let witness_region_residual = region.region_residual(&region.witness);
    let passed = max_succ <= 1.0 + SUCCESSOR_TOL
        && max_state <= CONSTRAINT_TOL
        && max_input <= CONSTRAINT_TOL
        && gain_err <= CONSTRAINT_TOL
        && witness_value <= 1.0 + CONSTRAINT_TOL
        && witness_region_residual <= CONSTRAINT_TOL;
    Ok(ValidationReport {
        region: region.index,
        samples: n_samples,
        max_successor_value: if n_samples == 0 { 0.0 } else { max_succ },
        max_state_residual: max_state,
        max_input_residual: max_input,
        exact_state_margin: exact_state,
        exact_input_margin: exact_input,
        gain_recovery_error: gain_err,
        witness_value,
        witness_region_residual,
        min_lmi_eigenvalue: min_eig,
        passed,
    })
}

/// JSON form of a certified region; matrices row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub index: usize,
    pub seed: Vec<f64>,
    pub region_a: RowMajor,
    pub region_b: Vec<f64>,
    pub p: Vec<RowMajor>,
    pub k: Vec<RowMajor>,
    pub e: Vec<RowMajor>,
    pub y: Vec<RowMajor>,
    pub coupling: Vec<Vec<RowMajor>>,
    pub witness: Vec<f64>,
    pub objective: f64,
    pub objective_mode: ObjectiveMode,
    pub status: SolveStatus,
    pub contraction: f64,
    pub solve_time: f64,
}

impl From<&CertifiedRegion> for RegionRecord {
    fn from(r: &CertifiedRegion) -> Self {
        let rm = |v: &[DMatrix<f64>]| v.iter().map(RowMajor::from).collect::<Vec<_>>();
        Self {
            index: r.index,
            seed: r.seed.iter().copied().collect(),
            region_a: RowMajor::from(&r.region_a),
            region_b: r.region_b.iter().copied().collect(),
            p: rm(&r.p),
            k: rm(&r.k),
            e: rm(&r.e),
            y: rm(&r.y),
            coupling: r.s.iter().map(|b| rm(b)).collect(),
            witness: r.witness.iter().copied().collect(),
            objective: r.objective,
            objective_mode: r.objective_mode,
            status: r.status,
            contraction: r.contraction,
            solve_time: r.solve_time,
        }
    }
}

impl RegionRecord {
    pub fn to_region(&self) -> Result<CertifiedRegion> {
        let bad = || Error::Dimension(format!("malformed matrix in region {}", self.index));
        let mats = |v: &[RowMajor]| v.iter().map(|m| m.to_matrix().ok_or_else(bad)).collect::<Result<Vec<_>>>();
        Ok(CertifiedRegion {
            index: self.index,
            seed: DVector::from_vec(self.seed.clone()),
            region_a: self.region_a.to_matrix().ok_or_else(bad)?,
            region_b: DVector::from_vec(self.region_b.clone()),
            e: mats(&self.e)?,
            p: mats(&self.p)?,
            y: mats(&self.y)?,
            k: mats(&self.k)?,
            s: self.coupling.iter().map(|b| mats(b)).collect::<Result<_>>()?,
            witness: DVector::from_vec(self.witness.clone()),
            status: self.status,
            objective: self.objective,
            objective_mode: self.objective_mode,
            contraction: self.contraction,
            solve_time: self.solve_time,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRecord {
    pub fingerprint: String,
    pub config: SynthesisConfig,
    pub regions: Vec<RegionRecord>,
    pub skipped: Vec<SkippedRegion>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChainParams, PolytopicSet, SetRole};
    use crate::testutil::scalar_model;
    use crate::partition::SamplingDomain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn whole_space() -> Region {
        Region { index: 0, seed: DVector::zeros(1), a: DMatrix::zeros(0, 1), b: DVector::zeros(0) }
    }

    /// Largest `E` on a grid such that some grid `K` keeps `[-√E, √E]`
    /// invariant under `x⁺ = (0.5 + K) x` while `|x| <= h` and `|K x| <= 1`.
    fn grid_oracle(h: f64) -> f64 {
        let mut best = 0.0;
        for ie in 0..=20_000 {
            let e = ie as f64 * 1e-4;
            let r = e.sqrt();
            let ok = (-2000..=2000).any(|ik| {
                let k = ik as f64 * 1e-3;
                (0.5 + k).abs() <= 1.0 && r <= h && k.abs() * r <= 1.0
            });
            if ok {
                best = e;
            }
        }
        best
    }

    fn certified(o: RegionOutcome) -> CertifiedRegion {
        match o {
            RegionOutcome::Certified(c) => *c,
            RegionOutcome::Infeasible { diagnostic, .. } => panic!("infeasible: {diagnostic}"),
        }
    }

    #[test]
    fn scalar_sets_match_grid_oracle() {
        for h in [1.0, 0.25] {
            let model = scalar_model(h);
            let c = certified(synthesize_region(&model, &whole_space(), &SynthesisConfig::default()).unwrap());
            let oracle = grid_oracle(h);
            assert!((oracle - h * h).abs() < 1e-12);
            assert!((c.e[0][(0, 0)] - oracle).abs() < 1e-4, "E = {}, oracle {oracle}", c.e[0][(0, 0)]);
            let k = c.k[0][(0, 0)];
            assert!((0.5 + k).abs() <= 1.0 && k.abs() <= 1.0);
        }
    }

    #[test]
    fn scalar_validation_matches_closed_form() {
        let model = scalar_model(1.0);
        let c = certified(synthesize_region(&model, &whole_space(), &SynthesisConfig::default()).unwrap());
        let rep = validate_certified(&c, &model, 50, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let k = c.k[0][(0, 0)];
        assert!((rep.max_successor_value - (0.5 + k).powi(2)).abs() < 1e-9);
        assert!(rep.passed, "{rep:?}");
        assert!(rep.min_lmi_eigenvalue > -1e-7);
        assert_eq!(c.lyapunov(&model, &DVector::zeros(1)), 0.0);
    }

    #[test]
    fn region_far_outside_constraints_is_infeasible() {
        let model = scalar_model(1.0);
        let far = Region {
            index: 3,
            seed: DVector::from_element(1, 6.0),
            a: DMatrix::from_element(1, 1, -1.0),
            b: DVector::from_element(1, -5.0),
        };
        match synthesize_region(&model, &far, &SynthesisConfig::default()).unwrap() {
            RegionOutcome::Infeasible { index, .. } => assert_eq!(index, 3),
            other => panic!("expected infeasible, got {other:?}"),
        }
        let part = Partition {
            seeds: vec![far.seed.clone()],
            rng_seed: None,
            bounding: PolytopicSet::symmetric_box(&[10.0], SetRole::Global).unwrap(),
            regions: vec![far],
        };
        assert!(matches!(
            synthesize_family(&model, &part, &SynthesisConfig::default(), Some(1)),
            Err(Error::AllRegionsInfeasible(_))
        ));
    }

    #[test]
    fn minimize_trace_mode_still_reaches_the_region() {
        let model = scalar_model(1.0);
        let region = Region {
            index: 0,
            seed: DVector::from_element(1, 0.5),
            a: DMatrix::from_element(1, 1, -1.0),
            b: DVector::from_element(1, -0.5),
        };
        let cfg = SynthesisConfig { objective: ObjectiveMode::MinimizeTrace, ..Default::default() };
        let c = certified(synthesize_region(&model, &region, &cfg).unwrap());
        // x >= 0.5 must lie in [-√E, √E], so E >= 0.25.
        assert!((c.e[0][(0, 0)] - 0.25).abs() < 1e-4);
        assert!(c.witness[0] >= 0.5 - 1e-8);
    }

    #[test]
    fn chain_family_validates_and_round_trips() {
        let model = NetworkModel::mass_spring_damper_chain(ChainParams::benchmark(3, 0.2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dom = SamplingDomain::new(model.global_state_polytope(), None).unwrap();
        let part = Partition::random(&dom, 2, &mut rng, Some(4)).unwrap();
        let fam = synthesize_family(&model, &part, &SynthesisConfig::default(), Some(2)).unwrap();
        assert!(!fam.is_empty());
        for r in &fam.regions {
            let rep = validate_certified(r, &model, 200, &mut rng).unwrap();
            assert!(rep.passed, "{rep:?}");
            assert!(rep.exact_state_margin <= 1e-8 && rep.exact_input_margin <= 1e-8);
            assert!(r.e.iter().all(|e| min_eigenvalue(e) >= 1e-6 * (1.0 - 1e-6)));
        }
        let back = CertifiedSetFamily::from_json(&fam.to_json().unwrap()).unwrap();
        assert_eq!(back, fam);
        back.check_model(&model).unwrap();
        let other = NetworkModel::mass_spring_damper_chain(ChainParams::benchmark(3, 0.1)).unwrap();
        assert!(matches!(back.check_model(&other), Err(Error::FingerprintMismatch { .. })));
    }
}
