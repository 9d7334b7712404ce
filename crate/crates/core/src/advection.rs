//! One-dimensional advection benchmark: analytic ground truth,
//! simulated sensors, MISE, and a textbook Kalman filter.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::filter::MeasurementBatch;
use crate::kernels::DiffOperator;

/// Reading of the case-study PDE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeForm {
    /// `∂n/∂t + g ∂n/∂x = 0`: rightward translation at speed `g`.
    Transport,
    /// `∂n/∂t + g n = 0`: exponential decay in place.
    Decay,
}

impl std::str::FromStr for PdeForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transport" => Ok(PdeForm::Transport),
            "decay" => Ok(PdeForm::Decay),
            other => Err(Error::Contract(format!(
                "unknown pde form `{other}` (expected transport|decay)"
            ))),
        }
    }
}

impl std::fmt::Display for PdeForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PdeForm::Transport => "transport",
            PdeForm::Decay => "decay",
        })
    }
}

/// Sum of two normal densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bimodal {
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
}

impl Bimodal {
    pub fn eval(&self, x: f64) -> f64 {
        normal_pdf(x, self.mu1, self.sigma1) + normal_pdf(x, self.mu2, self.sigma2)
    }

    /// Both modes moved by `shift` with `extra_var` added to each variance.
    pub fn shifted(&self, shift: f64, extra_var: f64) -> Bimodal {
        Bimodal {
            mu1: self.mu1 + shift,
            sigma1: (self.sigma1 * self.sigma1 + extra_var).sqrt(),
            mu2: self.mu2 + shift,
            sigma2: (self.sigma2 * self.sigma2 + extra_var).sqrt(),
        }
    }
}

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvectionScenario {
    pub g: f64,
    pub init: Bimodal,
    pub x_lo: f64,
    pub x_hi: f64,
    /// Measurement noise standard deviation.
    pub sigma_eps: f64,
    pub dt: f64,
    pub n_meas_per_step: usize,
    pub n_init_samples: usize,
    pub horizon: usize,
    pub seed: u64,
    pub pde_form: PdeForm,
    /// Shift of the filter's initial estimate relative to the truth.
    pub estimate_shift: f64,
    /// Variance added to each mode of the initial estimate.
    pub estimate_extra_var: f64,
}

impl Default for AdvectionScenario {
    fn default() -> Self {
        Self {
            g: 3.0,
            init: Bimodal {
                mu1: 2.0,
                sigma1: 0.45,
                mu2: 3.75,
                sigma2: 0.6,
            },
            x_lo: 0.0,
            x_hi: 10.0,
            sigma_eps: 0.06,
            dt: 5e-3,
            n_meas_per_step: 5,
            n_init_samples: 41,
            horizon: 100,
            seed: 0,
            pde_form: PdeForm::Transport,
            estimate_shift: 0.5,
            estimate_extra_var: 0.2,
        }
    }
}

impl AdvectionScenario {
    pub fn validate(&self) -> Result<()> {
        if self.x_lo.is_nan() || self.x_hi.is_nan() || self.x_lo >= self.x_hi {
            return Err(Error::Contract(format!(
                "domain [{}, {}] is empty",
                self.x_lo, self.x_hi
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Contract(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::Contract(format!("sigma_eps must be >= 0, got {}", self.sigma_eps)));
        }
        if !(self.init.sigma1 > 0.0 && self.init.sigma2 > 0.0) {
            return Err(Error::Contract("initial mode widths must be > 0".into()));
        }
        Ok(())
    }

    /// `L` in `∂n/∂t = L n`.
    pub fn operator(&self) -> DiffOperator {
        match self.pde_form {
            PdeForm::Transport => DiffOperator::advection(self.g),
            PdeForm::Decay => DiffOperator::decay(self.g),
        }
    }

    /// The filter's (deliberately wrong) initial estimate.
    pub fn initial_estimate(&self, x: f64) -> f64 {
        self.init
            .shifted(self.estimate_shift, self.estimate_extra_var)
            .eval(x)
    }

    /// `n_points` uniformly spaced points covering the domain.
    pub fn uniform_grid(&self, n_points: usize) -> Vec<f64> {
        match n_points {
            0 => Vec::new(),
            1 => vec![0.5 * (self.x_lo + self.x_hi)],
            n => {
                let h = (self.x_hi - self.x_lo) / (n - 1) as f64;
                (0..n).map(|i| self.x_lo + i as f64 * h).collect()
            }
        }
    }
}

/// Analytic solution at time `t`. Transport has zero inflow through `x_lo`.
pub fn truth(t: f64, x: f64, s: &AdvectionScenario) -> f64 {
    match s.pde_form {
        PdeForm::Transport => {
            let origin = x - s.g * t;
            if origin >= s.x_lo {
                s.init.eval(origin)
            } else {
                0.0
            }
        }
        PdeForm::Decay => s.init.eval(x) * (-s.g * t).exp(),
    }
}

/// Noisy point evaluations of the truth at step `t_step`, drawn
/// uniformly over the domain, plus the zero boundary value at `x_lo`.
///
/// The draw depends only on the scenario seed and the step index.
pub fn sample_measurements(t_step: usize, s: &AdvectionScenario) -> MeasurementBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(t_step as u64);
    let t = t_step as f64 * s.dt;
    let mut locations = Vec::with_capacity(s.n_meas_per_step);
    let mut values = Vec::with_capacity(s.n_meas_per_step);
    for _ in 0..s.n_meas_per_step {
        let x = rng.random_range(s.x_lo..s.x_hi);
        let noise: f64 = rng.sample(StandardNormal);
        locations.push(x);
        values.push(truth(t, x, s) + s.sigma_eps * noise);
    }
    MeasurementBatch {
        t: t_step,
        locations,
        values,
        boundary_values: vec![0.0],
    }
}

/// Trapezoidal `∫ (mean − truth)² dx` over the grid, divided by the
/// domain length.
pub fn mise(mean: &[f64], grid: &[f64], t: f64, s: &AdvectionScenario) -> f64 {
    assert_eq!(mean.len(), grid.len(), "mean and grid lengths differ");
    let sq: Vec<f64> = mean
        .iter()
        .zip(grid)
        .map(|(m, &x)| (m - truth(t, x, s)).powi(2))
        .collect();
    let integral: f64 = grid
        .windows(2)
        .zip(sq.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum();
    integral / (s.x_hi - s.x_lo)
}

/// `m⁻ = A m`, `P⁻ = A P Aᵀ + Q`.
pub fn classic_kf_predict(
    m: &DVector<f64>,
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    (a * m, a * p * a.transpose() + q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicUpdate {
    pub m: DVector<f64>,
    pub p: DMatrix<f64>,
    pub v: DVector<f64>,
    pub s: DMatrix<f64>,
    pub k: DMatrix<f64>,
}

/// The textbook update with an explicit `S⁻¹`.
pub fn classic_kf_update(
    m_prior: &DVector<f64>,
    p_prior: &DMatrix<f64>,
    c: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<ClassicUpdate> {
    let v = y - c * m_prior;
    let s = c * p_prior * c.transpose() + r;
    let s_inv = s.clone().try_inverse().ok_or_else(|| Error::Factorization {
        context: "classic KF innovation covariance".into(),
        attempted: vec![0.0],
    })?;
    let k = p_prior * c.transpose() * s_inv;
    let m = m_prior + &k * &v;
    let p = p_prior - &k * &s * k.transpose();
    Ok(ClassicUpdate { m, p, v, s, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_scenario() -> AdvectionScenario {
        AdvectionScenario::default()
    }

    #[test]
    fn truth_at_zero_is_initial_condition() {
        let s = default_scenario();
        for &x in &[0.0, 1.0, 2.0, 3.3, 9.0] {
            assert_eq!(truth(0.0, x, &s), s.init.eval(x));
        }
    }

    #[test]
    fn initial_density_at_two() {
        let s = default_scenario();
        // N(2; 2, 0.45²) + N(2; 3.75, 0.6²) computed independently.
        let pi2 = (2.0 * std::f64::consts::PI).sqrt();
        let a = 1.0 / (0.45 * pi2);
        let z: f64 = (2.0 - 3.75) / 0.6;
        let b = (-0.5 * z * z).exp() / (0.6 * pi2);
        assert_relative_eq!(truth(0.0, 2.0, &s), a + b, epsilon = 1e-15);
    }

    #[test]
    fn translation_and_inflow() {
        let s = default_scenario();
        assert_relative_eq!(truth(0.5, 3.5, &s), s.init.eval(2.0), epsilon = 1e-15);
        assert_eq!(truth(0.5, 1.0, &s), 0.0);
        let decay = AdvectionScenario {
            pde_form: PdeForm::Decay,
            ..s
        };
        assert_relative_eq!(truth(0.2, 2.0, &decay), s.init.eval(2.0) * (-0.6f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn mass_is_conserved_while_in_domain() {
        let s = AdvectionScenario {
            x_lo: -3.0,
            x_hi: 20.0,
            ..default_scenario()
        };
        let xs = s.uniform_grid(4601);
        for &t in &[0.0, 0.5, 1.0, 2.0] {
            let f: Vec<f64> = xs.iter().map(|&x| truth(t, x, &s)).collect();
            let mass: f64 = xs.windows(2).zip(f.windows(2)).map(|(x, v)| 0.5 * (x[1] - x[0]) * (v[0] + v[1])).sum();
            assert!((mass - 2.0).abs() <= 1e-3, "t={t}: mass {mass}");
        }
    }

    #[test]
    fn noiseless_measurements_equal_truth() {
        let s = AdvectionScenario {
            sigma_eps: 0.0,
            ..default_scenario()
        };
        let b = sample_measurements(7, &s);
        assert_eq!(b.locations.len(), 5);
        for (x, y) in b.locations.iter().zip(&b.values) {
            assert_eq!(*y, truth(7.0 * s.dt, *x, &s));
            assert!(*x >= s.x_lo && *x < s.x_hi);
        }
        assert_eq!(b.boundary_values, vec![0.0]);
    }

    #[test]
    fn measurements_are_deterministic_per_seed_and_step() {
        let s = default_scenario();
        assert_eq!(sample_measurements(3, &s), sample_measurements(3, &s));
        assert_ne!(sample_measurements(3, &s).locations, sample_measurements(4, &s).locations);
        let other = AdvectionScenario { seed: 1, ..s.clone() };
        assert_ne!(sample_measurements(3, &s).locations, sample_measurements(3, &other).locations);
    }

    #[test]
    fn measurement_noise_level() {
        let s = AdvectionScenario {
            n_meas_per_step: 1,
            ..default_scenario()
        };
        // Residuals against the truth at the drawn location, 10⁴ draws.
        let resid: Vec<f64> = (0..10_000)
            .map(|k| {
                let b = sample_measurements(k, &s);
                b.values[0] - truth(k as f64 * s.dt, b.locations[0], &s)
            })
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        assert!((var.sqrt() - 0.06).abs() <= 0.05 * 0.06, "std {}", var.sqrt());
    }

    #[test]
    fn mise_trivial_cases() {
        let s = default_scenario();
        let xs = s.uniform_grid(41);
        let exact: Vec<f64> = xs.iter().map(|&x| truth(0.1, x, &s)).collect();
        assert_eq!(mise(&exact, &xs, 0.1, &s), 0.0);
        let off: Vec<f64> = exact.iter().map(|v| v + 0.3).collect();
        assert_relative_eq!(mise(&off, &xs, 0.1, &s), 0.09, epsilon = 1e-14);
    }

    #[test]
    fn classic_scalar_update() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let out = classic_kf_update(&DVector::zeros(1), &one, &one, &one, &DVector::from_element(1, 2.0)).unwrap();
        assert_relative_eq!(out.k[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(out.p[(0, 0)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(out.m[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn classic_uninformative_measurement() {
        let p = DMatrix::identity(3, 3);
        let m = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let r = DMatrix::identity(3, 3) * 1e12;
        let y = DVector::from_vec(vec![10.0, -4.0, 0.0]);
        let out = classic_kf_update(&m, &p, &DMatrix::identity(3, 3), &r, &y).unwrap();
        assert!((&out.m - &m).norm() <= 1e-6 * out.v.norm());
    }

    #[test]
    fn classic_singular_s_is_an_error() {
        let z = DMatrix::zeros(2, 2);
        assert!(classic_kf_update(&DVector::zeros(2), &z, &z, &z, &DVector::zeros(2)).is_err());
    }
}
