//! Zero-mean GP regression, negative log marginal likelihood and
//! hyper-parameter fitting in log space.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::{log_density_factored, symmetrize, Factor, GaussianVec};
use crate::kernels::{build_step_kernels, gram, DiffOperator, HyperParams, Kernel, Output, Scheme};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Lower bound on the noise variances while optimizing.
pub const MIN_NOISE_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockTag {
    State,
    Measurement,
    Boundary,
}

impl BlockTag {
    fn name(self) -> &'static str {
        match self {
            BlockTag::State => "state",
            BlockTag::Measurement => "measurement",
            BlockTag::Boundary => "boundary",
        }
    }
}

/// One group of observations sharing an output of the GP.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBlock {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    pub noise_diag: Vec<f64>,
    pub tag: BlockTag,
}

impl TrainingBlock {
    pub fn new(tag: BlockTag, points: Vec<f64>, values: Vec<f64>, noise_diag: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() || points.len() != noise_diag.len() {
            return Err(Error::dim(
                "TrainingBlock::new",
                format!(
                    "{} block: {} points, {} values, {} noise entries",
                    tag.name(),
                    points.len(),
                    values.len(),
                    noise_diag.len()
                ),
            ));
        }
        if values.iter().chain(&points).any(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("{} block has non-finite entries", tag.name())));
        }
        if noise_diag.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::Contract(format!(
                "{} block has negative or NaN noise variance",
                tag.name()
            )));
        }
        Ok(Self {
            points,
            values,
            noise_diag,
            tag,
        })
    }

    /// Block with the same noise variance on every point.
    pub fn homoscedastic(tag: BlockTag, points: Vec<f64>, values: Vec<f64>, noise: f64) -> Result<Self> {
        let n = points.len();
        Self::new(tag, points, values, vec![noise; n])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    pub blocks: Vec<TrainingBlock>,
}

impl TrainingSet {
    pub fn new(blocks: Vec<TrainingBlock>) -> Self {
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.iter().map(TrainingBlock::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn values(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.blocks.iter().flat_map(|b| b.values.iter().cloned()))
    }

    fn points(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.points.iter().cloned()).collect()
    }

    fn noise(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|b| b.noise_diag.iter().cloned()).collect()
    }
}

/// How the training covariance is assembled from hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorModel {
    /// Every block observes the same SE-distributed function.
    Plain,
    /// Blocks are outputs of the time-step GP: state data observe
    /// `n_{t−1}`, measurements `nʸ_t`, boundary data `nᵇ_t`.
    Step {
        scheme: Scheme,
        operator: DiffOperator,
        dt: f64,
    },
}

impl PriorModel {
    /// `K_y`: the prior covariance of the training values plus their noise.
    pub fn training_covariance(&self, theta: &HyperParams, train: &TrainingSet) -> Result<DMatrix<f64>> {
        let mut k = match self {
            PriorModel::Plain => {
                let pts = train.points();
                gram(&Kernel::squared_exponential(theta), &pts, &pts)
            }
            PriorModel::Step { scheme, operator, dt } => {
                let table = build_step_kernels(*scheme, operator, theta, *dt)?;
                let parts: Vec<(Output, &[f64])> = train
                    .blocks
                    .iter()
                    .map(|b| {
                        let out = match b.tag {
                            BlockTag::State => Output::PrevState,
                            BlockTag::Measurement => Output::Measurement,
                            BlockTag::Boundary => Output::Boundary,
                        };
                        (out, b.points.as_slice())
                    })
                    .collect();
                table.joint_gram(&parts)
            }
        };
        for (i, s) in train.noise().into_iter().enumerate() {
            k[(i, i)] += s;
        }
        Ok(k)
    }

    fn factor(&self, theta: &HyperParams, train: &TrainingSet) -> Result<Factor> {
        factor_training(&self.training_covariance(theta, train)?, train)
    }
}

/// Factorizes `K_y`; on failure names the first block whose own
/// covariance is not factorizable.
fn factor_training(k_y: &DMatrix<f64>, train: &TrainingSet) -> Result<Factor> {
    Factor::new(k_y, "training covariance").map_err(|e| {
        let mut start = 0;
        for b in &train.blocks {
            let n = b.len();
            if n > 0 && Factor::new(&k_y.view((start, start), (n, n)).clone_owned(), "").is_err() {
                return e.in_block(&format!("{} block", b.tag.name()));
            }
            start += n;
        }
        e
    })
}

/// Posterior of `f(X_*)` given the training data, zero prior mean.
pub fn gp_posterior(train: &TrainingSet, x_star: &[f64], k: &Kernel) -> Result<GaussianVec> {
    let k_ss = gram(k, x_star, x_star);
    if train.is_empty() {
        return GaussianVec::new(DVector::zeros(x_star.len()), symmetrize(&k_ss));
    }
    let pts = train.points();
    let mut k_y = gram(k, &pts, &pts);
    for (i, s) in train.noise().into_iter().enumerate() {
        k_y[(i, i)] += s;
    }
    let factor = factor_training(&k_y, train)?;
    let k_s = gram(k, x_star, &pts);
    let mean = &k_s * factor.solve_vec(&train.values());
    let cov = k_ss - &k_s * factor.solve(&k_s.transpose());
    GaussianVec::new(mean, symmetrize(&cov))
}

/// `½ yᵀK_y⁻¹y + ½ log|K_y| + (n/2) log 2π`.
pub fn nlml(theta: &HyperParams, train: &TrainingSet, model: &PriorModel) -> Result<f64> {
    theta.validate()?;
    if train.is_empty() {
        return Ok(0.0);
    }
    let factor = model.factor(theta, train)?;
    Ok(-log_density_factored(&train.values(), &factor))
}

/// Which hyper-parameters the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActiveParams {
    pub sigma2_se: bool,
    pub length_scale: bool,
    pub sigma2_q: bool,
    pub sigma2_r: bool,
}

impl ActiveParams {
    pub const ALL: ActiveParams = ActiveParams {
        sigma2_se: true,
        length_scale: true,
        sigma2_q: true,
        sigma2_r: true,
    };
    pub const KERNEL: ActiveParams = ActiveParams {
        sigma2_se: true,
        length_scale: true,
        sigma2_q: false,
        sigma2_r: false,
    };

    fn mask(&self) -> [bool; 4] {
        [self.sigma2_se, self.length_scale, self.sigma2_q, self.sigma2_r]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iters: usize,
    pub simplex_tol: f64,
    pub initial_step: f64,
    pub active: ActiveParams,
    /// Number of optimizer starts; starts after the first are perturbed
    /// deterministically from `seed` and run concurrently.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            simplex_tol: 1e-6,
            initial_step: 0.5,
            active: ActiveParams::ALL,
            restarts: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOutcome {
    pub theta: HyperParams,
    pub nlml: f64,
    pub initial_nlml: f64,
    pub iterations: usize,
    /// Set when no evaluated point had a factorizable covariance and
    /// the warm start was returned.
    pub warning: bool,
}

const LOG_BOUNDS: (f64, f64) = (-23.0, 14.0);

fn to_array(theta: &HyperParams) -> [f64; 4] {
    [theta.sigma2_se, theta.length_scale, theta.sigma2_q, theta.sigma2_r]
}

fn from_array(v: [f64; 4]) -> HyperParams {
    HyperParams {
        sigma2_se: v[0],
        length_scale: v[1],
        sigma2_q: v[2],
        sigma2_r: v[3],
    }
}

fn floor_for(i: usize) -> f64 {
    if i >= 2 {
        MIN_NOISE_VARIANCE
    } else {
        0.0
    }
}

/// Minimizes [`nlml`] over the active hyper-parameters in log space.
///
/// The result never has a higher NLML than `theta0`.
pub fn fit_hyperparams(
    theta0: &HyperParams,
    train: &TrainingSet,
    model: &PriorModel,
    opts: &FitOptions,
) -> Result<FitOutcome> {
    theta0.validate()?;
    let base = to_array(theta0);
    let mask = opts.active.mask();
    let active: Vec<usize> = (0..4).filter(|&i| mask[i]).collect();
    let initial = nlml(theta0, train, model).unwrap_or(f64::INFINITY);

    if opts.max_iters == 0 || active.is_empty() {
        return Ok(FitOutcome {
            theta: *theta0,
            nlml: initial,
            initial_nlml: initial,
            iterations: 0,
            warning: !initial.is_finite(),
        });
    }

    let decode = |z: &[f64]| -> HyperParams {
        let mut v = base;
        for (k, &i) in active.iter().enumerate() {
            v[i] = z[k].clamp(LOG_BOUNDS.0, LOG_BOUNDS.1).exp().max(floor_for(i));
        }
        from_array(v)
    };
    let start: Vec<f64> = active
        .iter()
        .map(|&i| base[i].max(floor_for(i)).max(f64::MIN_POSITIVE).ln())
        .collect();
    let nm = NelderMeadOptions {
        max_iters: opts.max_iters,
        tol: opts.simplex_tol,
        initial_step: opts.initial_step,
    };
    let run = |z0: Vec<f64>| {
        nelder_mead(
            |z| nlml(&decode(z), train, model).unwrap_or(f64::INFINITY),
            &z0,
            &nm,
        )
    };

    let mut starts = vec![start.clone()];
    if opts.restarts > 1 {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 1..opts.restarts {
            starts.push(start.iter().map(|z| z + rng.random_range(-1.0..1.0)).collect());
        }
    }
    let results: Vec<_> = if starts.len() == 1 {
        vec![run(start)]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = starts.into_iter().map(|z0| s.spawn(|| run(z0))).collect();
            handles.into_iter().map(|h| h.join().expect("optimizer thread panicked")).collect()
        })
    };
    let iterations = results.iter().map(|m| m.iterations).sum();
    let best = results
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");

    if best.value.is_finite() && best.value < initial {
        Ok(FitOutcome {
            theta: decode(&best.x),
            nlml: best.value,
            initial_nlml: initial,
            iterations,
            warning: false,
        })
    } else {
        Ok(FitOutcome {
            theta: *theta0,
            nlml: initial,
            initial_nlml: initial,
            iterations,
            warning: !initial.is_finite(),
        })
    }
}
