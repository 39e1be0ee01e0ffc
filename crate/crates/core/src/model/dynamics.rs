use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default cap on the number of parameter-box corners per agent.
pub const DEFAULT_VERTEX_CAP: usize = 1 << 16;

/// Containment slack when checking `θ ∈ Θ_i`.
const BOX_TOL: f64 = 1e-12;

/// `A_i(θ) = A_i0 + Σ_r θ_r A_ir`, `B_i(θ) = B_i0 + Σ_r θ_r B_ir` with `θ` in
/// an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainAffineDynamics {
    pub a0: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub a_sens: Vec<DMatrix<f64>>,
    pub b_sens: Vec<DMatrix<f64>>,
    pub theta_lo: DVector<f64>,
    pub theta_hi: DVector<f64>,
    pub theta_nominal: DVector<f64>,
}

impl UncertainAffineDynamics {
    pub fn new(
        a0: DMatrix<f64>,
        b0: DMatrix<f64>,
        a_sens: Vec<DMatrix<f64>>,
        b_sens: Vec<DMatrix<f64>>,
        theta_lo: DVector<f64>,
        theta_hi: DVector<f64>,
        theta_nominal: DVector<f64>,
    ) -> Result<Self> {
        let p = theta_nominal.len();
        if a_sens.len() != p || b_sens.len() != p || theta_lo.len() != p || theta_hi.len() != p {
            return Err(Error::Dimension(format!(
                "parameter dimension {p} disagrees with sensitivities ({}, {}) or box ({}, {})",
                a_sens.len(),
                b_sens.len(),
                theta_lo.len(),
                theta_hi.len()
            )));
        }
        if a0.nrows() != b0.nrows() {
            return Err(Error::Dimension("A_i0 and B_i0 row counts differ".into()));
        }
        if a_sens.iter().any(|a| a.shape() != a0.shape())
            || b_sens.iter().any(|b| b.shape() != b0.shape())
        {
            return Err(Error::Dimension("sensitivity shape differs from base matrix".into()));
        }
        for r in 0..p {
            let (lo, hi, nom) = (theta_lo[r], theta_hi[r], theta_nominal[r]);
            if !(lo <= nom && nom <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "parameter {r}: need lo <= nominal <= hi, got {lo} <= {nom} <= {hi}"
                )));
            }
        }
        Ok(Self { a0, b0, a_sens, b_sens, theta_lo, theta_hi, theta_nominal })
    }

    /// Box `[(1-γ)θ_nom, (1+γ)θ_nom]` (endpoints ordered for negative entries).
    pub fn with_uncertainty_level(
        a0: DMatrix<f64>,
        b0: DMatrix<f64>,
        a_sens: Vec<DMatrix<f64>>,
        b_sens: Vec<DMatrix<f64>>,
        theta_nominal: DVector<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidModel(format!("uncertainty level must be >= 0, got {gamma}")));
        }
        let a = theta_nominal.map(|t| (1.0 - gamma) * t);
        let b = theta_nominal.map(|t| (1.0 + gamma) * t);
        let lo = a.zip_map(&b, f64::min);
        let hi = a.zip_map(&b, f64::max);
        Self::new(a0, b0, a_sens, b_sens, lo, hi, theta_nominal)
    }

    pub fn state_dim(&self) -> usize {
        self.a0.nrows()
    }

    pub fn neighborhood_dim(&self) -> usize {
        self.a0.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.b0.ncols()
    }

    pub fn param_dim(&self) -> usize {
        self.theta_nominal.len()
    }

    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        theta.len() == self.param_dim()
            && (0..theta.len()).all(|r| {
                let scale = 1.0 + self.theta_lo[r].abs().max(self.theta_hi[r].abs());
                theta[r] >= self.theta_lo[r] - BOX_TOL * scale
                    && theta[r] <= self.theta_hi[r] + BOX_TOL * scale
            })
    }

    /// Affine evaluation without the box check.
    pub fn eval_unchecked(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut a = self.a0.clone();
        let mut b = self.b0.clone();
        for (r, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                a += &self.a_sens[r] * t;
                b += &self.b_sens[r] * t;
            }
        }
        (a, b)
    }

    pub fn eval(&self, agent: usize, theta: &DVector<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if !self.contains(theta) {
            return Err(Error::ParameterOutsideBox { agent, theta: theta.iter().copied().collect() });
        }
        Ok(self.eval_unchecked(theta))
    }

    /// Box corners, lexicographic with the first parameter most significant and
    /// the lower endpoint first. Collapsed coordinates contribute one value.
    pub fn vertices(&self, agent: usize, cap: usize) -> Result<Vec<DVector<f64>>> {
        let p = self.param_dim();
        let choices: Vec<Vec<f64>> = (0..p)
            .map(|r| {
                let (lo, hi) = (self.theta_lo[r], self.theta_hi[r]);
                if lo == hi { vec![lo] } else { vec![lo, hi] }
            })
            .collect();
        let free = choices.iter().filter(|c| c.len() == 2).count();
        let count: u128 = 1u128 << free.min(127);
        if free >= 127 || count > cap as u128 {
            return Err(Error::TooManyVertices { agent, count, cap });
        }
        let mut out = vec![DVector::zeros(p)];
        for (r, vals) in choices.iter().enumerate() {
            out = out
                .into_iter()
                .flat_map(|v| {
                    vals.iter().map(move |&t| {
                        let mut w = v.clone();
                        w[r] = t;
                        w
                    })
                })
                .collect();
        }
        Ok(out)
    }

    /// `A_i(θ) x_{N_i} + B_i(θ) u_i`.
    pub fn predict(&self, theta: &DVector<f64>, x_nbhd: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.a0 * x_nbhd + &self.b0 * u;
        for (r, &t) in theta.iter().enumerate() {
            if t != 0.0 {
                out += (&self.a_sens[r] * x_nbhd + &self.b_sens[r] * u) * t;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_dyn(nominal: Vec<f64>, gamma: f64) -> UncertainAffineDynamics {
        let p = nominal.len();
        UncertainAffineDynamics::with_uncertainty_level(
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
            vec![DMatrix::from_element(1, 1, 1.0); p],
            vec![DMatrix::zeros(1, 1); p],
            DVector::from_vec(nominal),
            gamma,
        )
        .unwrap()
    }

    #[test]
    fn two_parameter_box_corners() {
        let d = scalar_dyn(vec![0.1, 0.5], 0.2);
        let v = d.vertices(0, DEFAULT_VERTEX_CAP).unwrap();
        let expected = [[0.08, 0.4], [0.08, 0.6], [0.12, 0.4], [0.12, 0.6]];
        assert_eq!(v.len(), 4);
        for (got, want) in v.iter().zip(expected) {
            assert!((got[0] - want[0]).abs() < 1e-15 && (got[1] - want[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_uncertainty_gives_nominal_only() {
        let d = scalar_dyn(vec![0.1, 0.5], 0.0);
        let v = d.vertices(0, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(v, vec![DVector::from_vec(vec![0.1, 0.5])]);
    }

    #[test]
    fn three_parameters_eight_corners_in_order() {
        let d = scalar_dyn(vec![1.0, 2.0, 3.0], 0.5);
        let v = d.vertices(0, DEFAULT_VERTEX_CAP).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0].as_slice(), &[0.5, 1.0, 1.5]);
        assert_eq!(v[1].as_slice(), &[0.5, 1.0, 4.5]);
        assert_eq!(v[7].as_slice(), &[1.5, 3.0, 4.5]);
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.as_slice().partial_cmp(b.as_slice()).unwrap());
        assert_eq!(sorted, v);
    }

    #[test]
    fn no_parameters_single_empty_vertex() {
        let d = scalar_dyn(vec![], 0.3);
        assert_eq!(d.vertices(0, DEFAULT_VERTEX_CAP).unwrap(), vec![DVector::zeros(0)]);
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let d = scalar_dyn(vec![1.0; 5], 0.1);
        assert!(matches!(d.vertices(0, 16), Err(Error::TooManyVertices { count: 32, .. })));
    }

    #[test]
    fn eval_outside_box_is_rejected() {
        let d = scalar_dyn(vec![0.1], 0.2);
        assert!(d.eval(0, &DVector::from_vec(vec![0.2])).is_err());
        let (a, _) = d.eval(0, &DVector::from_vec(vec![0.1])).unwrap();
        assert!((a[(0, 0)] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn zero_sensitivities_keep_base() {
        let d = UncertainAffineDynamics::with_uncertainty_level(
            DMatrix::from_element(1, 1, 0.7),
            DMatrix::from_element(1, 1, 1.0),
            vec![DMatrix::zeros(1, 1)],
            vec![DMatrix::zeros(1, 1)],
            DVector::from_vec(vec![2.0]),
            0.5,
        )
        .unwrap();
        for v in d.vertices(0, DEFAULT_VERTEX_CAP).unwrap() {
            assert_eq!(d.eval(0, &v).unwrap().0, d.a0);
        }
    }
}
