//! Squared-exponential and white-noise kernels, constant-coefficient
//! differential operators acting on them, and the per-step kernel table
//! of the time-discretized multi-output GP.
//!
//! A [`Kernel`] is kept symbolically as a weighted sum of SE derivatives
//! `Σ c · ∂ᵃ/∂xᵃ ∂ᵇ/∂x′ᵇ k_SE(x, x′)` plus a white-noise coefficient, so
//! applying an operator is exact bookkeeping on derivative orders.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Highest derivative order an operator may put on either kernel argument.
pub const MAX_ORDER: u8 = 2;

/// SE kernel parameters and the process/measurement noise variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub sigma2_se: f64,
    pub length_scale: f64,
    pub sigma2_q: f64,
    pub sigma2_r: f64,
}

impl HyperParams {
    pub fn new(sigma2_se: f64, length_scale: f64, sigma2_q: f64, sigma2_r: f64) -> Result<Self> {
        let theta = Self {
            sigma2_se,
            length_scale,
            sigma2_q,
            sigma2_r,
        };
        theta.validate()?;
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Contract(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::Contract(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        positive("sigma2_se", self.sigma2_se)?;
        positive("length_scale", self.length_scale)?;
        non_negative("sigma2_q", self.sigma2_q)?;
        non_negative("sigma2_r", self.sigma2_r)
    }
}

/// `Σ coeff · ∂^order/∂x^order` with constant coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperator {
    terms: Vec<(u8, f64)>,
}

impl DiffOperator {
    pub fn new(terms: Vec<(u8, f64)>) -> Result<Self> {
        for &(order, coeff) in &terms {
            if order > MAX_ORDER {
                return Err(Error::Contract(format!(
                    "operator order {order} exceeds {MAX_ORDER}"
                )));
            }
            if !coeff.is_finite() {
                return Err(Error::Contract(format!("non-finite operator coefficient {coeff}")));
            }
        }
        Ok(Self { terms }.simplified())
    }

    pub fn identity() -> Self {
        Self {
            terms: vec![(0, 1.0)],
        }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `-g ∂/∂x`, the transport operator for `∂n/∂t + g ∂n/∂x = 0`.
    pub fn advection(g: f64) -> Self {
        Self {
            terms: vec![(1, -g)],
        }
        .simplified()
    }

    /// `-g`, the literal decay reading `∂n/∂t + g n = 0`.
    pub fn decay(g: f64) -> Self {
        Self {
            terms: vec![(0, -g)],
        }
        .simplified()
    }

    /// `D ∂²/∂x²`.
    pub fn diffusion(d: f64) -> Self {
        Self {
            terms: vec![(2, d)],
        }
        .simplified()
    }

    pub fn terms(&self) -> &[(u8, f64)] {
        &self.terms
    }

    pub fn max_order(&self) -> u8 {
        self.terms.iter().map(|&(o, _)| o).max().unwrap_or(0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(o, c)| (o, c * s)).collect(),
        }
        .simplified()
    }

    pub fn plus(&self, other: &DiffOperator) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self { terms }.simplified()
    }

    /// `I + Δt L`.
    pub fn explicit_euler(l: &DiffOperator, dt: f64) -> Self {
        Self::identity().plus(&l.scaled(dt))
    }

    /// `I − Δt L`.
    pub fn implicit_euler(l: &DiffOperator, dt: f64) -> Self {
        Self::identity().plus(&l.scaled(-dt))
    }

    fn simplified(mut self) -> Self {
        let mut merged: Vec<(u8, f64)> = Vec::new();
        self.terms.sort_by_key(|&(o, _)| o);
        for (o, c) in self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == o => last.1 += c,
                _ => merged.push((o, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        Self { terms: merged }
    }
}

/// Which kernel argument an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// First argument `x`.
    Left,
    /// Second argument `x′`.
    Right,
}

/// `∂ᵃ/∂xᵃ ∂ᵇ/∂x′ᵇ σ² exp(−(x−x′)²/(2l²))` for `a + b ≤ 4`.
///
/// With `z = (x−x′)/l` the r-derivatives of the Gaussian are
/// `(−1/l)ⁿ Heₙ(z) φ` (probabilists' Hermite), and each x′-derivative
/// contributes a factor `−1`.
pub fn se_eval(x: f64, x_prime: f64, theta: &HyperParams, a: u8, b: u8) -> f64 {
    se_raw(x - x_prime, theta.sigma2_se, theta.length_scale, a, b)
}

fn se_raw(r: f64, sigma2: f64, l: f64, a: u8, b: u8) -> f64 {
    let n = a + b;
    debug_assert!(n <= 4, "SE derivative order {n} not supported");
    let z = r / l;
    let phi = (-0.5 * z * z).exp();
    let z2 = z * z;
    let he = match n {
        0 => 1.0,
        1 => z,
        2 => z2 - 1.0,
        3 => z * (z2 - 3.0),
        4 => z2 * z2 - 6.0 * z2 + 3.0,
        _ => f64::NAN,
    };
    // (−1)ⁿ from the r-derivatives, (−1)ᵇ from ∂r/∂x′ = −1.
    let sign = if a.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * sigma2 * he * phi / l.powi(n as i32)
}

/// White noise `δ(x − x′) σ²`, resolved on grid indices.
pub fn white_noise_eval(i: usize, j: usize, sigma2: f64) -> f64 {
    if i == j {
        sigma2
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SeTerm {
    a: u8,
    b: u8,
    coeff: f64,
}

/// A covariance function built from the SE kernel by linear operators,
/// plus an optional white-noise part.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    sigma2: f64,
    length_scale: f64,
    terms: Vec<SeTerm>,
    white: f64,
}

impl Kernel {
    pub fn squared_exponential(theta: &HyperParams) -> Self {
        Self {
            sigma2: theta.sigma2_se,
            length_scale: theta.length_scale,
            terms: vec![SeTerm {
                a: 0,
                b: 0,
                coeff: 1.0,
            }],
            white: 0.0,
        }
    }

    /// Pure white noise with variance `sigma2`.
    pub fn white_noise(sigma2: f64) -> Self {
        Self {
            sigma2: 1.0,
            length_scale: 1.0,
            terms: Vec::new(),
            white: sigma2,
        }
    }

    /// Adds `sigma2 · δ` to this kernel.
    pub fn with_white(mut self, sigma2: f64) -> Self {
        self.white += sigma2;
        self
    }

    pub fn white(&self) -> f64 {
        self.white
    }

    /// Value at `(x, x′)` excluding the white-noise part.
    pub fn eval(&self, x: f64, x_prime: f64) -> f64 {
        let r = x - x_prime;
        self.terms
            .iter()
            .map(|t| t.coeff * se_raw(r, self.sigma2, self.length_scale, t.a, t.b))
            .sum()
    }

    /// `∂ᵃ/∂xᵃ ∂ᵇ/∂x′ᵇ` of this kernel (white part excluded).
    pub fn eval_deriv(&self, x: f64, x_prime: f64, a: u8, b: u8) -> f64 {
        let r = x - x_prime;
        self.terms
            .iter()
            .map(|t| t.coeff * se_raw(r, self.sigma2, self.length_scale, t.a + a, t.b + b))
            .sum()
    }

    /// `k(x′, x)`.
    pub fn transposed(&self) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| SeTerm {
                    a: t.b,
                    b: t.a,
                    coeff: t.coeff,
                })
                .collect(),
            ..self.clone()
        }
    }

    /// True when `k(x, x′) = k(x′, x)` term by term.
    pub fn is_symmetric(&self) -> bool {
        let mut grid = [[0.0f64; (MAX_ORDER as usize) * 2 + 1]; (MAX_ORDER as usize) * 2 + 1];
        for t in &self.terms {
            grid[t.a as usize][t.b as usize] += t.coeff;
        }
        (0..grid.len()).all(|a| (0..grid.len()).all(|b| grid[a][b] == grid[b][a]))
    }

    fn simplified(mut self) -> Self {
        self.terms.sort_by_key(|t| (t.a, t.b));
        let mut merged: Vec<SeTerm> = Vec::new();
        for t in self.terms {
            match merged.last_mut() {
                Some(last) if last.a == t.a && last.b == t.b => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        self.terms = merged;
        self
    }
}

/// `op_x k` (left) or `k op_x′ᵀ` (right).
pub fn apply_operator(op: &DiffOperator, k: &Kernel, side: Side) -> Result<Kernel> {
    let mut terms = Vec::with_capacity(op.terms.len() * k.terms.len());
    for &(order, c) in &op.terms {
        for t in &k.terms {
            let (a, b) = match side {
                Side::Left => (t.a + order, t.b),
                Side::Right => (t.a, t.b + order),
            };
            if a > MAX_ORDER || b > MAX_ORDER {
                return Err(Error::Contract(format!(
                    "applying an order-{order} operator gives derivative orders ({a}, {b}), limit is {MAX_ORDER}"
                )));
            }
            terms.push(SeTerm {
                a,
                b,
                coeff: c * t.coeff,
            });
        }
    }
    let white = if k.white == 0.0 {
        0.0
    } else if op.max_order() == 0 {
        k.white * op.terms.iter().map(|&(_, c)| c).sum::<f64>()
    } else {
        return Err(Error::Contract(
            "differential operator applied to a white-noise kernel".into(),
        ));
    };
    Ok(Kernel {
        sigma2: k.sigma2,
        length_scale: k.length_scale,
        terms,
        white,
    }
    .simplified())
}

/// `K(X, X′)`. When both point sets are the same grid the white part is
/// added on matching indices, and symmetric kernels are symmetrized.
pub fn gram(k: &Kernel, xs: &[f64], ys: &[f64]) -> DMatrix<f64> {
    let same_grid = xs == ys;
    let mut m = DMatrix::from_fn(xs.len(), ys.len(), |i, j| k.eval(xs[i], ys[j]));
    if same_grid {
        if k.white != 0.0 {
            for i in 0..xs.len() {
                m[(i, i)] += white_noise_eval(i, i, k.white);
            }
        }
        if k.is_symmetric() {
            m = crate::gaussian::symmetrize(&m);
        }
    }
    m
}

/// Time discretization that determines where the GP prior sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Prior on `n_{t−1}`, `n_t = (I + Δt L) n_{t−1} + Δt q`.
    Explicit,
    /// Prior on `n_t`, `n_{t−1} = (I − Δt L) n_t − Δt q`.
    Implicit,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Scheme::Explicit),
            "implicit" => Ok(Scheme::Implicit),
            other => Err(Error::Contract(format!(
                "unsupported scheme `{other}` (expected explicit|implicit)"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Explicit => "explicit",
            Scheme::Implicit => "implicit",
        })
    }
}

/// Output of the multi-output GP a Gram block refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    /// `n_{t−1}` on the test grid.
    PrevState,
    /// `n_t` on the test grid.
    State,
    /// `nʸ_t` at the measurement locations.
    Measurement,
    /// `nᵇ_t` at the boundary points.
    Boundary,
}

/// Covariance blocks of the multi-output GP for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub scheme: Scheme,
    pub dt: f64,
    pub nn_t_t: Kernel,
    pub nn_t_tm1: Kernel,
    pub nn_tm1_tm1: Kernel,
    pub yn_t_t: Kernel,
    pub yn_t_tm1: Kernel,
    pub yy_t_t: Kernel,
    pub bn_t_t: Kernel,
    pub bb_t_t: Kernel,
    pub yb_t_t: Kernel,
    pub bn_t_tm1: Kernel,
}

/// Builds the kernel table for spatial operator `l` (the PDE is
/// `∂n/∂t = L n + q`) with point-evaluation measurement and boundary
/// operators.
pub fn build_step_kernels(scheme: Scheme, l: &DiffOperator, theta: &HyperParams, dt: f64) -> Result<KernelTable> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Contract(format!("dt must be finite and > 0, got {dt}")));
    }
    theta.validate()?;
    let k = Kernel::squared_exponential(theta);
    let process = dt * dt * theta.sigma2_q;
    let measurement = theta.sigma2_r;
    let table = match scheme {
        Scheme::Explicit => {
            let f = DiffOperator::explicit_euler(l, dt);
            let fk = apply_operator(&f, &k, Side::Left)?;
            let fkf = apply_operator(&f, &fk, Side::Right)?;
            let state = fkf.with_white(process);
            KernelTable {
                scheme,
                dt,
                nn_t_t: state.clone(),
                nn_t_tm1: fk.clone(),
                nn_tm1_tm1: k,
                yn_t_t: state.clone(),
                yn_t_tm1: fk.clone(),
                yy_t_t: state.clone().with_white(measurement),
                bn_t_t: state.clone(),
                bb_t_t: state.clone(),
                yb_t_t: state,
                bn_t_tm1: fk,
            }
        }
        Scheme::Implicit => {
            let g = DiffOperator::implicit_euler(l, dt);
            let kg = apply_operator(&g, &k, Side::Right)?;
            let gkg = apply_operator(&g, &kg, Side::Left)?;
            KernelTable {
                scheme,
                dt,
                nn_t_t: k.clone(),
                nn_t_tm1: kg.clone(),
                nn_tm1_tm1: gkg.with_white(process),
                yn_t_t: k.clone(),
                yn_t_tm1: kg.clone(),
                yy_t_t: k.clone().with_white(measurement),
                bn_t_t: k.clone(),
                bb_t_t: k.clone(),
                yb_t_t: k,
                bn_t_tm1: kg,
            }
        }
    };
    Ok(table)
}

impl KernelTable {
    /// Cross-covariance kernel between two outputs.
    pub fn block(&self, row: Output, col: Output) -> Kernel {
        use Output::*;
        match (row, col) {
            (PrevState, PrevState) => self.nn_tm1_tm1.clone(),
            (State, State) => self.nn_t_t.clone(),
            (State, PrevState) => self.nn_t_tm1.clone(),
            (PrevState, State) => self.nn_t_tm1.transposed(),
            (Measurement, State) => self.yn_t_t.clone(),
            (State, Measurement) => self.yn_t_t.transposed(),
            (Measurement, PrevState) => self.yn_t_tm1.clone(),
            (PrevState, Measurement) => self.yn_t_tm1.transposed(),
            (Measurement, Measurement) => self.yy_t_t.clone(),
            (Boundary, State) => self.bn_t_t.clone(),
            (State, Boundary) => self.bn_t_t.transposed(),
            (Boundary, PrevState) => self.bn_t_tm1.clone(),
            (PrevState, Boundary) => self.bn_t_tm1.transposed(),
            (Boundary, Boundary) => self.bb_t_t.clone(),
            (Measurement, Boundary) => self.yb_t_t.clone(),
            (Boundary, Measurement) => self.yb_t_t.transposed(),
        }
    }

    /// Gram matrix of one block.
    pub fn gram(&self, row: Output, xs: &[f64], col: Output, ys: &[f64]) -> DMatrix<f64> {
        gram(&self.block(row, col), xs, ys)
    }

    /// Joint covariance of the stacked outputs, block by block.
    pub fn joint_gram(&self, parts: &[(Output, &[f64])]) -> DMatrix<f64> {
        let n: usize = parts.iter().map(|(_, p)| p.len()).sum();
        let mut m = DMatrix::zeros(n, n);
        let mut row = 0;
        for &(ro, rp) in parts {
            let mut col = 0;
            for &(co, cp) in parts {
                if !rp.is_empty() && !cp.is_empty() {
                    m.view_mut((row, col), (rp.len(), cp.len()))
                        .copy_from(&self.gram(ro, rp, co, cp));
                }
                col += cp.len();
            }
            row += rp.len();
        }
        crate::gaussian::symmetrize(&m)
    }
}
