//! Voronoi partitioning of the constrained state space.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{from_row_major, to_row_major};
use crate::lmi::{self, AffExpr, SdpProblem, SolveStatus, Tolerances, VarRole};
use crate::model::{PolytopicSet, SetRole};

/// Attempts per requested point before rejection sampling gives up.
pub const REJECTION_BUDGET: usize = 1_000_000;

/// Containment slack for the bounding polytope in [`Partition::locate`].
const DOMAIN_TOL: f64 = 1e-9;

/// One Voronoi cell `{x : A x <= b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub index: usize,
    pub seed: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Region {
    pub fn max_residual(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.max_residual(x) <= tol
    }
}

/// Axis-aligned box of a polytope, `None` for unbounded coordinates.
pub fn bounding_box(poly: &PolytopicSet) -> Result<Vec<Option<(f64, f64)>>> {
    let n = poly.dim();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut ends = [0.0; 2];
        let mut bounded = true;
        for (slot, sign) in [(0usize, 1.0), (1, -1.0)] {
            let mut p = SdpProblem::new();
            let x = p.add_var(n, 1, false, VarRole::Point, "x");
            for l in 0..poly.rows() {
                let mut e = AffExpr::constant(-poly.bound[l]);
                for c in 0..n {
                    e.add_scaled(&x.entry(c, 0), poly.matrix[(l, c)]);
                }
                p.add_le(e, format!("row {l}"));
            }
            p.set_objective(x.entry(k, 0).scale(sign));
            let r = lmi::solve(&p, &Tolerances::default())?;
            match r.status {
                SolveStatus::Optimal => ends[slot] = r.values[k],
                SolveStatus::Unbounded => bounded = false,
                _ => {
                    return Err(Error::Solver(format!(
                        "bounding-box LP for coordinate {k} failed: {}",
                        r.diagnostic.unwrap_or_default()
                    )))
                }
            }
        }
        out.push(bounded.then_some((ends[0], ends[1])));
    }
    Ok(out)
}

/// Uniform rejection sampler on `polytope ∩ {x_k = 0 for k fixed}`.
///
/// Coordinates that are unbounded in the polytope, or excluded by the chosen
/// subspace, are held at zero (a cross-section through the origin).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDomain {
    pub polytope: PolytopicSet,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Coordinates that are sampled; all others are zero.
    pub active: Vec<usize>,
}

impl SamplingDomain {
    pub fn new(polytope: PolytopicSet, subspace: Option<&[usize]>) -> Result<Self> {
        let bbox = bounding_box(&polytope)?;
        let n = polytope.dim();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        let mut active = Vec::new();
        for (k, b) in bbox.iter().enumerate() {
            let wanted = subspace.is_none_or(|s| s.contains(&k));
            if let (Some((l, h)), true) = (b, wanted) {
                lo[k] = *l;
                hi[k] = *h;
                active.push(k);
            }
        }
        Ok(Self { polytope, lo, hi, active })
    }

    pub fn dim(&self) -> usize {
        self.polytope.dim()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.polytope.contains(x, 0.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<DVector<f64>> {
        let mut x = DVector::zeros(self.dim());
        for _ in 0..REJECTION_BUDGET {
            for &k in &self.active {
                x[k] = if self.hi[k] > self.lo[k] { rng.gen_range(self.lo[k]..self.hi[k]) } else { self.lo[k] };
            }
            if self.contains(&x) {
                return Ok(x);
            }
        }
        Err(Error::SamplingExhausted(REJECTION_BUDGET))
    }
}

/// `M` distinct seeds drawn uniformly from the domain.
pub fn sample_seeds<R: Rng + ?Sized>(domain: &SamplingDomain, m: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    if m == 0 {
        return Err(Error::InvalidModel("need at least one region".into()));
    }
    let mut seeds: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut attempts = 0;
    while seeds.len() < m {
        let s = domain.sample(rng)?;
        if !seeds.contains(&s) {
            seeds.push(s);
        }
        attempts += 1;
        if attempts > REJECTION_BUDGET {
            return Err(Error::SamplingExhausted(attempts));
        }
    }
    Ok(seeds)
}

/// Cells `{x : 2(s_l - s_j)ᵀx <= ‖s_l‖² - ‖s_j‖² ∀l≠j} ∩ bounding`.
pub fn voronoi_cells(seeds: &[DVector<f64>], bounding: &PolytopicSet) -> Result<Vec<Region>> {
    if seeds.is_empty() {
        return Err(Error::InvalidModel("need at least one seed".into()));
    }
    let n = bounding.dim();
    for (j, s) in seeds.iter().enumerate() {
        if s.len() != n {
            return Err(Error::Dimension(format!("seed {j} has dimension {}, expected {n}", s.len())));
        }
        if let Some(l) = seeds[..j].iter().position(|t| t == s) {
            return Err(Error::DuplicateSeeds(l, j));
        }
    }
    let mut regions = Vec::with_capacity(seeds.len());
    for (j, sj) in seeds.iter().enumerate() {
        let rows = seeds.len() - 1 + bounding.rows();
        let mut a = DMatrix::zeros(rows, n);
        let mut b = DVector::zeros(rows);
        let mut r = 0;
        for (l, sl) in seeds.iter().enumerate() {
            if l == j {
                continue;
            }
            a.row_mut(r).copy_from(&((sl - sj) * 2.0).transpose());
            b[r] = sl.norm_squared() - sj.norm_squared();
            r += 1;
        }
        a.view_mut((r, 0), (bounding.rows(), n)).copy_from(&bounding.matrix);
        b.rows_mut(r, bounding.rows()).copy_from(&bounding.bound);
        regions.push(Region { index: j, seed: sj.clone(), a, b });
    }
    Ok(regions)
}

/// Seeds, the bounding polytope and the resulting cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub seeds: Vec<DVector<f64>>,
    pub rng_seed: Option<u64>,
    pub bounding: PolytopicSet,
    pub regions: Vec<Region>,
}

impl Partition {
    pub fn new(seeds: Vec<DVector<f64>>, bounding: PolytopicSet, rng_seed: Option<u64>) -> Result<Self> {
        let regions = voronoi_cells(&seeds, &bounding)?;
        Ok(Self { seeds, rng_seed, bounding, regions })
    }

    /// Random partition with `m` cells over `domain`.
    pub fn random<R: Rng + ?Sized>(domain: &SamplingDomain, m: usize, rng: &mut R, rng_seed: Option<u64>) -> Result<Self> {
        let seeds = sample_seeds(domain, m, rng)?;
        Self::new(seeds, domain.polytope.clone(), rng_seed)
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Nearest seed, ties to the lowest index.
    pub fn locate(&self, x: &DVector<f64>) -> Result<usize> {
        if !self.bounding.contains(x, DOMAIN_TOL) {
            return Err(Error::OutsideDomain);
        }
        let mut best = (0, f64::INFINITY);
        for (j, s) in self.seeds.iter().enumerate() {
            let d = (x - s).norm_squared();
            if d < best.1 {
                best = (j, d);
            }
        }
        Ok(best.0)
    }

    pub fn to_record(&self) -> PartitionRecord {
        PartitionRecord {
            rng_seed: self.rng_seed,
            seeds: self.seeds.iter().map(|s| s.iter().copied().collect()).collect(),
            bounding_matrix: to_row_major(&self.bounding.matrix),
            bounding_bound: self.bounding.bound.iter().copied().collect(),
        }
    }

    pub fn from_record(r: &PartitionRecord) -> Result<Self> {
        let m = from_row_major(&r.bounding_matrix).ok_or_else(|| Error::Dimension("ragged bounding matrix".into()))?;
        let bounding = PolytopicSet::new(m, DVector::from_vec(r.bounding_bound.clone()), SetRole::Global)?;
        let seeds = r.seeds.iter().map(|s| DVector::from_vec(s.clone())).collect();
        Self::new(seeds, bounding, r.rng_seed)
    }
}

/// JSON form of a partition; cells are recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRecord {
    pub rng_seed: Option<u64>,
    pub seeds: Vec<Vec<f64>>,
    pub bounding_matrix: Vec<Vec<f64>>,
    pub bounding_bound: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> PolytopicSet {
        PolytopicSet::symmetric_box(&[1.0, 1.0], SetRole::Global).unwrap()
    }

    #[test]
    fn one_seed_cell_is_the_bounding_polytope() {
        let cells = voronoi_cells(&[DVector::from_vec(vec![0.2, 0.3])], &unit_box()).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].a, unit_box().matrix);
    }

    #[test]
    fn symmetric_pair_bisects_through_origin() {
        let seeds = vec![DVector::from_vec(vec![-1.0, 0.0]), DVector::from_vec(vec![1.0, 0.0])];
        let cells = voronoi_cells(&seeds, &unit_box()).unwrap();
        // 2(s_2 - s_1)ᵀx <= 0  ⇔  4 x_1 <= 0
        assert_eq!(cells[0].a.row(0).iter().copied().collect::<Vec<_>>(), vec![4.0, 0.0]);
        assert_eq!(cells[0].b[0], 0.0);
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let s = DVector::from_vec(vec![0.1, 0.1]);
        assert!(matches!(voronoi_cells(&[s.clone(), s], &unit_box()), Err(Error::DuplicateSeeds(0, 1))));
    }

    #[test]
    fn locate_ties_and_seeds() {
        let seeds: Vec<_> = [[-0.5, 0.0], [0.5, 0.5], [0.0, -0.5], [0.9, 0.9], [0.5, -0.5]]
            .iter()
            .map(|s| DVector::from_row_slice(s))
            .collect();
        let p = Partition::new(seeds.clone(), unit_box(), None).unwrap();
        for (j, s) in seeds.iter().enumerate() {
            assert_eq!(p.locate(s).unwrap(), j);
        }
        // Equidistant from seeds 1 and 4 (indices 1 and 4): (0.5, 0.0).
        assert_eq!(p.locate(&DVector::from_vec(vec![0.5, 0.0])).unwrap(), 1);
        assert!(p.locate(&DVector::from_vec(vec![2.0, 0.0])).is_err());
    }

    #[test]
    fn seed_sampling_is_deterministic_and_inside() {
        let dom = SamplingDomain::new(unit_box(), None).unwrap();
        let a = sample_seeds(&dom, 10, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = sample_seeds(&dom, 10, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|s| dom.contains(s)));
        assert_eq!(sample_seeds(&dom, 1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap().len(), 1);
    }

    #[test]
    fn unbounded_coordinates_are_held_at_zero() {
        // |x_0| <= 1, x_1 free.
        let poly = PolytopicSet::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            SetRole::Global,
        )
        .unwrap();
        let bbox = bounding_box(&poly).unwrap();
        assert!(bbox[1].is_none());
        let (lo, hi) = bbox[0].unwrap();
        assert!((lo + 1.0).abs() < 1e-7 && (hi - 1.0).abs() < 1e-7);
        let dom = SamplingDomain::new(poly, None).unwrap();
        assert_eq!(dom.active, vec![0]);
        let x = dom.sample(&mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn monte_carlo_cover_and_disjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dom = SamplingDomain::new(unit_box(), None).unwrap();
        let p = Partition::random(&dom, 7, &mut rng, Some(11)).unwrap();
        for _ in 0..100_000 {
            let x = dom.sample(&mut rng).unwrap();
            let j = p.locate(&x).unwrap();
            assert!(p.regions[j].contains(&x, 1e-12));
            let strict = p.regions.iter().filter(|r| r.max_residual(&x) < -1e-12).count();
            assert!(strict <= 1);
        }
        for r in &p.regions {
            assert!(r.max_residual(&r.seed) < 0.0);
        }
    }

    #[test]
    fn record_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dom = SamplingDomain::new(unit_box(), None).unwrap();
        let p = Partition::random(&dom, 4, &mut rng, Some(5)).unwrap();
        let json = serde_json::to_string(&p.to_record()).unwrap();
        let back = Partition::from_record(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
