//! The numerical GP Kalman filter.
//!
//! Each step conditions the time-step GP to obtain a pseudo dynamic
//! matrix `A` and pseudo measurement matrix `C`, then runs the ordinary
//! Kalman predict/update with `P^{GP,nn}` and `P^{GP,nʸnʸ}` in place of
//! the process and measurement covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{assert_psd, clamp_psd, log_density_factored, symmetrize, Factor, GaussianVec};
use crate::kernels::{build_step_kernels, DiffOperator, HyperParams, Kernel, KernelTable, Output, Scheme};
use crate::regression::{
    fit_hyperparams, gp_posterior, nlml, BlockTag, FitOptions, FitOutcome, PriorModel, TrainingBlock,
    TrainingSet,
};

/// Variance assigned to boundary data.
pub const BOUNDARY_NOISE: f64 = 1e-10;

/// Tolerance used for the covariance PSD checks.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Spatial operator `L` of `∂n/∂t = L n + q`.
    pub operator: DiffOperator,
    /// Fixed test grid `X_*`, strictly increasing.
    pub test_grid: Vec<f64>,
    pub boundary_points: Vec<f64>,
    pub refit_every: usize,
    pub fit: FitOptions,
    pub boundary_noise: f64,
    pub seed: u64,
}

impl FilterConfig {
    pub fn new(dt: f64, scheme: Scheme, operator: DiffOperator, test_grid: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            dt,
            scheme,
            operator,
            test_grid,
            boundary_points: Vec::new(),
            refit_every: 1,
            fit: FitOptions::default(),
            boundary_noise: BOUNDARY_NOISE,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Contract(format!("dt must be finite and > 0, got {}", self.dt)));
        }
        if self.test_grid.is_empty() {
            return Err(Error::Contract("test grid is empty".into()));
        }
        if self.test_grid.iter().any(|x| !x.is_finite())
            || self.test_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Contract("test grid must be finite and strictly increasing".into()));
        }
        if self.refit_every == 0 {
            return Err(Error::Contract("refit_every must be >= 1".into()));
        }
        if self.boundary_points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Contract("boundary points must be finite".into()));
        }
        Ok(())
    }

    fn prior_model(&self) -> PriorModel {
        PriorModel::Step {
            scheme: self.scheme,
            operator: self.operator.clone(),
            dt: self.dt,
        }
    }

    pub fn kernel_table(&self, theta: &HyperParams) -> Result<KernelTable> {
        build_step_kernels(self.scheme, &self.operator, theta, self.dt)
    }
}

/// Measurements and boundary data arriving at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBatch {
    pub t: usize,
    pub locations: Vec<f64>,
    pub values: Vec<f64>,
    /// Values at the config's boundary points.
    pub boundary_values: Vec<f64>,
}

impl MeasurementBatch {
    fn validate(&self, cfg: &FilterConfig) -> Result<()> {
        if self.locations.len() != self.values.len() {
            return Err(Error::dim(
                "MeasurementBatch",
                format!("{} locations but {} values", self.locations.len(), self.values.len()),
            ));
        }
        if self.boundary_values.len() != cfg.boundary_points.len() {
            return Err(Error::dim(
                "MeasurementBatch",
                format!(
                    "{} boundary values for {} boundary points",
                    self.boundary_values.len(),
                    cfg.boundary_points.len()
                ),
            ));
        }
        if self
            .locations
            .iter()
            .chain(&self.values)
            .chain(&self.boundary_values)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Contract(format!("batch {} has non-finite entries", self.t)));
        }
        Ok(())
    }

    /// `[nʸ_t; nᵇ_t]`.
    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.values.len() + self.boundary_values.len(),
            self.values.iter().chain(&self.boundary_values).cloned(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub nlml: f64,
    /// Largest absolute jitter added to any factorization this step.
    pub jitter: f64,
    pub innovation_norm: f64,
    pub predictive_loglik: f64,
    /// Smallest eigenvalue of the posterior covariance before clamping.
    pub min_eigenvalue: f64,
    /// The posterior covariance before clamping passed [`assert_psd`].
    pub covariance_psd: bool,
    /// The refit returned the previous hyper-parameters after failing.
    pub refit_warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub t: usize,
    pub estimate: GaussianVec,
    pub theta: HyperParams,
    pub diagnostics: Diagnostics,
}

/// Initial state from GP regression on `n_samples` uniformly spaced
/// evaluations of `prior_mean_fn` over the test grid's extent.
///
/// The samples are treated as observations with noise variance `σ²_r`
/// of `theta0`.
pub fn init_state<F>(prior_mean_fn: F, n_samples: usize, theta0: &HyperParams, cfg: &FilterConfig) -> Result<FilterState>
where
    F: Fn(f64) -> f64,
{
    cfg.validate()?;
    theta0.validate()?;
    if n_samples == 0 {
        return Err(Error::Contract("n_samples must be >= 1".into()));
    }
    let train = initial_training_set(prior_mean_fn, n_samples, theta0, cfg)?;
    let estimate = gp_posterior(&train, &cfg.test_grid, &Kernel::squared_exponential(theta0))?;
    let report = assert_psd(&estimate.cov, PSD_TOL);
    let estimate = GaussianVec::new(estimate.mean, clamp_psd(&estimate.cov))?;
    Ok(FilterState {
        t: 0,
        estimate,
        theta: *theta0,
        diagnostics: Diagnostics {
            nlml: nlml(theta0, &train, &PriorModel::Plain)?,
            min_eigenvalue: report.min_eigenvalue,
            covariance_psd: report.is_psd,
            ..Default::default()
        },
    })
}

/// The training set [`init_state`] regresses on.
pub fn initial_training_set<F>(prior_mean_fn: F, n_samples: usize, theta0: &HyperParams, cfg: &FilterConfig) -> Result<TrainingSet>
where
    F: Fn(f64) -> f64,
{
    let lo = cfg.test_grid[0];
    let hi = *cfg.test_grid.last().expect("nonempty grid");
    let points: Vec<f64> = if n_samples == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        if hi <= lo {
            return Err(Error::Contract("degenerate grid: cannot spread several samples over a single point".into()));
        }
        let h = (hi - lo) / (n_samples - 1) as f64;
        (0..n_samples).map(|i| lo + i as f64 * h).collect()
    };
    let values: Vec<f64> = points.iter().map(|&x| prior_mean_fn(x)).collect();
    Ok(TrainingSet::new(vec![TrainingBlock::homoscedastic(
        BlockTag::State,
        points,
        values,
        theta0.sigma2_r,
    )?]))
}

/// Pseudo dynamic matrix and the GP transition covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub a: DMatrix<f64>,
    pub p_gp: DMatrix<f64>,
    pub jitter: f64,
}

/// `A = K_{t,t−1} K_{t−1,t−1}⁻¹`, `P^{GP,nn} = K_{t,t} − A K_{t−1,t}`.
pub fn build_a(table: &KernelTable, x_star: &[f64]) -> Result<Transition> {
    let k_prev = table.gram(Output::PrevState, x_star, Output::PrevState, x_star);
    let k_cross = table.gram(Output::PrevState, x_star, Output::State, x_star);
    let k_cur = table.gram(Output::State, x_star, Output::State, x_star);
    let factor = Factor::new(&k_prev, "K^{nn}_{t-1,t-1}")?;
    let a = factor.solve(&k_cross).transpose();
    let p_gp = clamp_psd(&(k_cur - &a * &k_cross));
    Ok(Transition {
        a,
        p_gp,
        jitter: factor.jitter(),
    })
}

/// Pseudo measurement matrix and the GP observation covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub c: DMatrix<f64>,
    pub p_gp_y: DMatrix<f64>,
    pub jitter: f64,
}

/// `C = [K^{nʸn}; K^{nᵇn}] K_{t,t}⁻¹` and the stacked Schur complement
/// over the measurement and boundary blocks.
///
/// `boundary_noise` is added to the boundary diagonal.
pub fn build_c(
    table: &KernelTable,
    y_locs: &[f64],
    x_b: &[f64],
    x_star: &[f64],
    boundary_noise: f64,
) -> Result<Observation> {
    let n = x_star.len();
    let ny = y_locs.len();
    let nb = x_b.len();
    let k_cur = table.gram(Output::State, x_star, Output::State, x_star);
    let factor = Factor::new(&k_cur, "K^{nn}_{t,t}")?;
    let mut cross = DMatrix::zeros(n, ny + nb);
    if ny > 0 {
        cross
            .view_mut((0, 0), (n, ny))
            .copy_from(&table.gram(Output::State, x_star, Output::Measurement, y_locs));
    }
    if nb > 0 {
        cross
            .view_mut((0, ny), (n, nb))
            .copy_from(&table.gram(Output::State, x_star, Output::Boundary, x_b));
    }
    let c = factor.solve(&cross).transpose();
    let mut obs = table.joint_gram(&[(Output::Measurement, y_locs), (Output::Boundary, x_b)]);
    for i in ny..ny + nb {
        obs[(i, i)] += boundary_noise;
    }
    let p_gp_y = clamp_psd(&(obs - &c * &cross));
    Ok(Observation {
        c,
        p_gp_y,
        jitter: factor.jitter(),
    })
}

/// `m⁻ = A m`, `P⁻ = A P Aᵀ + P^{GP,nn}`.
pub fn predict(estimate: &GaussianVec, a: &DMatrix<f64>, p_gp: &DMatrix<f64>) -> Result<GaussianVec> {
    let n = estimate.dim();
    if a.nrows() != n || a.ncols() != n || p_gp.nrows() != n || p_gp.ncols() != n {
        return Err(Error::dim(
            "predict",
            format!(
                "state dimension {n}, A is {}x{}, P_gp is {}x{}",
                a.nrows(),
                a.ncols(),
                p_gp.nrows(),
                p_gp.ncols()
            ),
        ));
    }
    let mean = a * &estimate.mean;
    let cov = a * &estimate.cov * a.transpose() + p_gp;
    GaussianVec::new(mean, symmetrize(&cov))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub posterior: GaussianVec,
    pub innovation: DVector<f64>,
    pub s: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    pub predictive_loglik: f64,
    /// Smallest eigenvalue of `P⁻ − K S Kᵀ` before clamping.
    pub min_eigenvalue: f64,
    pub is_psd: bool,
    pub jitter: f64,
}

/// Kalman update of `prior` with `C`, `P^{GP,nʸnʸ}` and the stacked
/// measurement/boundary vector `y`.
pub fn update(prior: &GaussianVec, c: &DMatrix<f64>, p_gp_y: &DMatrix<f64>, y: &DVector<f64>) -> Result<UpdateOutcome> {
    let n = prior.dim();
    let m = y.len();
    if c.nrows() != m || c.ncols() != n || p_gp_y.nrows() != m || p_gp_y.ncols() != m {
        return Err(Error::dim(
            "update",
            format!(
                "state {n}, observations {m}, C is {}x{}, P_gp_y is {}x{}",
                c.nrows(),
                c.ncols(),
                p_gp_y.nrows(),
                p_gp_y.ncols()
            ),
        ));
    }
    if m == 0 {
        let report = assert_psd(&prior.cov, PSD_TOL);
        return Ok(UpdateOutcome {
            posterior: prior.clone(),
            innovation: DVector::zeros(0),
            s: DMatrix::zeros(0, 0),
            gain: DMatrix::zeros(n, 0),
            predictive_loglik: 0.0,
            min_eigenvalue: report.min_eigenvalue,
            is_psd: report.is_psd,
            jitter: 0.0,
        });
    }
    let v = y - c * &prior.mean;
    let pc = &prior.cov * c.transpose();
    let s = symmetrize(&(c * &pc + p_gp_y));
    let factor = Factor::new(&s, "innovation covariance S")?;
    let gain = factor.solve(&pc.transpose()).transpose();
    let mean = &prior.mean + &gain * &v;
    let raw = symmetrize(&(&prior.cov - &gain * &s * gain.transpose()));
    let report = assert_psd(&raw, PSD_TOL);
    let predictive_loglik = log_density_factored(&v, &factor);
    Ok(UpdateOutcome {
        posterior: GaussianVec::new(mean, clamp_psd(&raw))?,
        innovation: v,
        s,
        gain,
        predictive_loglik,
        min_eigenvalue: report.min_eigenvalue,
        is_psd: report.is_psd,
        jitter: factor.jitter(),
    })
}

/// `log N([nʸ_t; nᵇ_t] | C m⁻, S)`.
pub fn predictive_loglik(prior: &GaussianVec, c: &DMatrix<f64>, s: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    if c.nrows() != y.len() || c.ncols() != prior.dim() || s.nrows() != y.len() {
        return Err(Error::dim("predictive_loglik", "C, S and y do not conform"));
    }
    if y.is_empty() {
        return Ok(0.0);
    }
    let factor = Factor::new(s, "innovation covariance S")?;
    Ok(log_density_factored(&(y - c * &prior.mean), &factor))
}

/// The training set used to refit the hyper-parameters before step
/// `batch.t`: the previous posterior mean as state data with noise
/// `diag(P_{t−1})`, the measurements, and the boundary data.
pub fn refit_training_set(state: &FilterState, batch: &MeasurementBatch, cfg: &FilterConfig) -> Result<TrainingSet> {
    let prev_var: Vec<f64> = state.estimate.cov.diagonal().iter().map(|v| v.max(0.0)).collect();
    Ok(TrainingSet::new(vec![
        TrainingBlock::new(
            BlockTag::State,
            cfg.test_grid.clone(),
            state.estimate.mean.iter().cloned().collect(),
            prev_var,
        )?,
        TrainingBlock::homoscedastic(
            BlockTag::Measurement,
            batch.locations.clone(),
            batch.values.clone(),
            0.0,
        )?,
        TrainingBlock::homoscedastic(
            BlockTag::Boundary,
            cfg.boundary_points.clone(),
            batch.boundary_values.clone(),
            cfg.boundary_noise,
        )?,
    ]))
}

/// Whether step `t` refits under the config's schedule.
pub fn is_refit_step(t: usize, cfg: &FilterConfig) -> bool {
    t.is_multiple_of(cfg.refit_every)
}

/// Minimizes the NLML of the refit training set warm-started at the
/// current hyper-parameters. Off-schedule steps return them unchanged.
pub fn refit_online(state: &FilterState, batch: &MeasurementBatch, cfg: &FilterConfig) -> Result<FitOutcome> {
    let train = refit_training_set(state, batch, cfg)?;
    let model = cfg.prior_model();
    let opts = if is_refit_step(batch.t, cfg) {
        FitOptions {
            seed: cfg.seed ^ (batch.t as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..cfg.fit
        }
    } else {
        FitOptions {
            max_iters: 0,
            ..cfg.fit
        }
    };
    let mut out = fit_hyperparams(&state.theta, &train, &model, &opts)?;
    if out.warning {
        log::warn!("step {}: hyper-parameter refit failed, keeping previous values", batch.t);
    }
    out.warning |= !out.nlml.is_finite();
    Ok(out)
}

/// Everything one step produces besides the new state.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDetail {
    pub table: KernelTable,
    pub transition: Transition,
    pub prior: GaussianVec,
    pub observation: Observation,
    pub update: UpdateOutcome,
    pub fit: FitOutcome,
}

/// One full recursion: refit, kernel table, `A`, predict, `C`, update.
pub fn step(state: &FilterState, batch: &MeasurementBatch, cfg: &FilterConfig) -> Result<FilterState> {
    step_detailed(state, batch, cfg).map(|(s, _)| s)
}

pub fn step_detailed(state: &FilterState, batch: &MeasurementBatch, cfg: &FilterConfig) -> Result<(FilterState, StepDetail)> {
    let t = batch.t;
    if t != state.t + 1 {
        return Err(Error::Contract(format!(
            "batch is for step {t} but the state is at step {}",
            state.t
        ))
        .at_step(t));
    }
    let inner = || -> Result<(FilterState, StepDetail)> {
        cfg.validate()?;
        batch.validate(cfg)?;
        let fit = refit_online(state, batch, cfg)?;
        let theta = fit.theta;
        let table = cfg.kernel_table(&theta)?;
        let transition = build_a(&table, &cfg.test_grid)?;
        let prior = predict(&state.estimate, &transition.a, &transition.p_gp)?;
        let observation = build_c(
            &table,
            &batch.locations,
            &cfg.boundary_points,
            &cfg.test_grid,
            cfg.boundary_noise,
        )?;
        let upd = update(&prior, &observation.c, &observation.p_gp_y, &batch.stacked())?;
        let diagnostics = Diagnostics {
            nlml: fit.nlml,
            jitter: transition.jitter.max(observation.jitter).max(upd.jitter),
            innovation_norm: upd.innovation.norm(),
            predictive_loglik: upd.predictive_loglik,
            min_eigenvalue: upd.min_eigenvalue,
            covariance_psd: upd.is_psd,
            refit_warning: fit.warning,
        };
        let next = FilterState {
            t,
            estimate: upd.posterior.clone(),
            theta,
            diagnostics,
        };
        Ok((
            next,
            StepDetail {
                table,
                transition,
                prior,
                observation,
                update: upd,
                fit,
            },
        ))
    };
    inner().map_err(|e| e.at_step(t))
}
