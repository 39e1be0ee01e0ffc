//! Monte Carlo estimate of the state-space fraction covered by a family.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::episode_rng;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, NetworkModel};
use crate::partition::{Partition, SamplingDomain};
use crate::synthesis::{synthesize_family, CertifiedRegion, SynthesisConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub sets: usize,
    pub gamma: Option<f64>,
    pub samples: usize,
    pub covered: usize,
    pub fraction: f64,
    /// `sqrt(p (1 - p) / n)`.
    pub standard_error: f64,
    /// Samples inside each set.
    pub per_set: Vec<usize>,
}

/// Fraction of uniform samples of `domain` with `min_j V^j(x) <= 1`.
pub fn coverage_fraction<R: Rng + ?Sized>(
    model: &NetworkModel,
    regions: &[CertifiedRegion],
    domain: &SamplingDomain,
    n_samples: usize,
    rng: &mut R,
) -> Result<CoverageReport> {
    if n_samples == 0 {
        return Err(Error::InvalidModel("coverage needs at least one sample".into()));
    }
    let mut covered = 0;
    let mut per_set = vec![0; regions.len()];
    for _ in 0..n_samples {
        let x = domain.sample(rng)?;
        let mut any = false;
        for (j, r) in regions.iter().enumerate() {
            if r.lyapunov(model, &x) <= 1.0 {
                per_set[j] += 1;
                any = true;
            }
        }
        covered += any as usize;
    }
    let p = covered as f64 / n_samples as f64;
    Ok(CoverageReport {
        sets: regions.len(),
        gamma: model.spec().gamma(),
        samples: n_samples,
        covered,
        fraction: p,
        standard_error: (p * (1.0 - p) / n_samples as f64).sqrt(),
        per_set,
    })
}

/// One partition's result in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    #[serde(rename = "M")]
    pub m: usize,
    pub gamma: f64,
    pub partition_id: usize,
    pub feasible_sets: usize,
    pub fraction: f64,
    pub standard_error: f64,
}

/// Mean over the partitions of one `(M, γ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub m: usize,
    pub gamma: f64,
    pub partitions: usize,
    pub mean: f64,
    /// `sqrt(s² / k + mean(p(1-p)/n) / k)`: spread across partitions plus
    /// sampling noise inside each.
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSweep {
    pub rows: Vec<CoverageRow>,
    pub cells: Vec<CoverageCell>,
}

impl CoverageSweep {
    pub fn cell(&self, m: usize, gamma: f64) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| c.m == m && c.gamma == gamma)
    }

    /// `(mean_a - mean_b) / se`, pairing rows by partition id when both
    /// cells share the same partitions (same `M`).
    pub fn z_score(&self, a: (usize, f64), b: (usize, f64)) -> Option<f64> {
        let ca = self.cell(a.0, a.1)?;
        let cb = self.cell(b.0, b.1)?;
        let diff = ca.mean - cb.mean;
        let se = if a.0 == b.0 && ca.partitions == cb.partitions && ca.partitions > 1 {
            let ra = self.rows_of(a);
            let rb = self.rows_of(b);
            let d: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| x.fraction - y.fraction).collect();
            let k = d.len() as f64;
            let md = d.iter().sum::<f64>() / k;
            let var = d.iter().map(|v| (v - md).powi(2)).sum::<f64>() / (k - 1.0);
            let noise = ra.iter().chain(&rb).map(|r| r.standard_error.powi(2)).sum::<f64>() / (k * k);
            (var / k + noise).sqrt()
        } else {
            (ca.standard_error.powi(2) + cb.standard_error.powi(2)).sqrt()
        };
        Some(diff / se)
    }

    fn rows_of(&self, key: (usize, f64)) -> Vec<&CoverageRow> {
        let mut r: Vec<_> = self.rows.iter().filter(|r| r.m == key.0 && r.gamma == key.1).collect();
        r.sort_by_key(|r| r.partition_id);
        r
    }

    /// `M,gamma,partition_id,feasible_sets,fraction,standard_error`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub m_list: Vec<usize>,
    pub gamma_list: Vec<f64>,
    pub partitions_per_cell: usize,
    pub samples: usize,
    pub master_seed: u64,
    /// Coordinates the seeds are drawn in; all bounded ones when absent.
    #[serde(default)]
    pub seed_subspace: Option<Vec<usize>>,
}

/// Coverage for every `(M, γ)`, averaged over random partitions. Partition
/// `p` for a given `M` is the same at every `γ`.
pub fn coverage_sweep(base: &ModelSpec, sweep: &SweepSpec, config: &SynthesisConfig) -> Result<CoverageSweep> {
    if sweep.m_list.is_empty() || sweep.gamma_list.is_empty() || sweep.partitions_per_cell == 0 {
        return Err(Error::InvalidModel("sweep lists and partition count must be nonempty".into()));
    }
    let mut jobs = Vec::new();
    for &m in &sweep.m_list {
        for &g in &sweep.gamma_list {
            for p in 0..sweep.partitions_per_cell {
                jobs.push((m, g, p));
            }
        }
    }
    let reference = NetworkModel::from_spec(base.clone())?;
    let domain = SamplingDomain::new(reference.global_state_polytope(), sweep.seed_subspace.as_deref())?;
    let full = SamplingDomain::new(reference.global_state_polytope(), None)?;
    let rows = jobs
        .par_iter()
        .map(|&(m, gamma, p)| -> Result<CoverageRow> {
            let model = NetworkModel::from_spec(base.with_gamma(gamma))?;
            let mut prng = episode_rng(sweep.master_seed, ((m as u64) << 32) | p as u64);
            let part = Partition::random(&domain, m, &mut prng, None)?;
            let regions = match synthesize_family(&model, &part, config, Some(1)) {
                Ok(f) => f.regions,
                Err(Error::AllRegionsInfeasible(why)) => {
                    log::warn!("M={m} γ={gamma} partition {p}: no feasible set ({why})");
                    Vec::new()
                }
                Err(e) => return Err(e),
            };
            let mut srng = episode_rng(sweep.master_seed ^ 0x5eed, ((m as u64) << 32) | p as u64);
            let rep = coverage_fraction(&model, &regions, &full, sweep.samples, &mut srng)?;
            Ok(CoverageRow {
                m,
                gamma,
                partition_id: p,
                feasible_sets: regions.len(),
                fraction: rep.fraction,
                standard_error: rep.standard_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for &m in &sweep.m_list {
        for &gamma in &sweep.gamma_list {
            let fr: Vec<&CoverageRow> = rows.iter().filter(|r| r.m == m && r.gamma == gamma).collect();
            let k = fr.len() as f64;
            let mean = fr.iter().map(|r| r.fraction).sum::<f64>() / k;
            let between = if fr.len() > 1 {
                fr.iter().map(|r| (r.fraction - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            let within = fr.iter().map(|r| r.standard_error.powi(2)).sum::<f64>() / k;
            cells.push(CoverageCell { m, gamma, partitions: fr.len(), mean, standard_error: (between / k + within / k).sqrt() });
        }
    }
    Ok(CoverageSweep { rows, cells })
}
