//! Gaussian identities and covariance hygiene.
//!
//! Everything that inverts a covariance goes through [`Factor`], a Cholesky
//! factorization with escalating diagonal jitter. Every operation that
//! produces a covariance returns it symmetrized.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative jitter levels tried in order; the added diagonal is
/// `level * mean(diag(M))`.
pub const JITTER_LEVELS: [f64; 4] = [0.0, 1e-10, 1e-8, 1e-6];

/// A multivariate normal `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVec {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Linear-Gaussian conditional `y | x ~ N(H x + u, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub h: DMatrix<f64>,
    pub u: DVector<f64>,
    pub r: DMatrix<f64>,
}

impl GaussianVec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != mean.len() || cov.ncols() != mean.len() {
            return Err(Error::dim(
                "GaussianVec::new",
                format!(
                    "mean has length {}, cov is {}x{}",
                    mean.len(),
                    cov.nrows(),
                    cov.ncols()
                ),
            ));
        }
        Ok(Self { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal over the given indices, in the given order.
    pub fn marginal(&self, idx: &[usize]) -> Result<GaussianVec> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.dim()) {
            return Err(Error::dim(
                "GaussianVec::marginal",
                format!("index {bad} out of range for dimension {}", self.dim()),
            ));
        }
        Ok(GaussianVec {
            mean: select_rows(&self.mean, idx),
            cov: select(&self.cov, idx, idx),
        })
    }
}

impl AffineMap {
    pub fn new(h: DMatrix<f64>, u: DVector<f64>, r: DMatrix<f64>) -> Result<Self> {
        if u.len() != h.nrows() || r.nrows() != h.nrows() || r.ncols() != h.nrows() {
            return Err(Error::dim(
                "AffineMap::new",
                format!(
                    "H is {}x{}, u has length {}, R is {}x{}",
                    h.nrows(),
                    h.ncols(),
                    u.len(),
                    r.nrows(),
                    r.ncols()
                ),
            ));
        }
        Ok(Self { h, u, r })
    }
}

/// `(P + Pᵀ) / 2`.
pub fn symmetrize(p: &DMatrix<f64>) -> DMatrix<f64> {
    (p + p.transpose()) * 0.5
}

/// Cholesky factor of a symmetric matrix, plus the jitter that made it work.
#[derive(Debug, Clone)]
pub struct Factor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
    jitter_level: f64,
}

impl Factor {
    /// Factorizes `m`, escalating through [`JITTER_LEVELS`].
    ///
    /// `context` names the matrix in the error when every level fails.
    pub fn new(m: &DMatrix<f64>, context: &str) -> Result<Factor> {
        if !m.is_square() {
            return Err(Error::dim(
                "Factor::new",
                format!("{context} is {}x{}, expected square", m.nrows(), m.ncols()),
            ));
        }
        let n = m.nrows();
        let sym = symmetrize(m);
        if n == 0 {
            // Empty factor; solves return empty matrices.
            return Ok(Factor {
                chol: Cholesky::new(DMatrix::zeros(0, 0)).expect("empty cholesky"),
                jitter: 0.0,
                jitter_level: 0.0,
            });
        }
        if sym.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization {
                context: format!("{context} (non-finite entries)"),
                attempted: Vec::new(),
            });
        }
        let mean_diag = sym.diagonal().iter().map(|d| d.abs()).sum::<f64>() / n as f64;
        let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
        for &level in JITTER_LEVELS.iter() {
            let mut jittered = sym.clone();
            let jitter = level * scale;
            for i in 0..n {
                jittered[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(jittered) {
                return Ok(Factor {
                    chol,
                    jitter,
                    jitter_level: level,
                });
            }
        }
        Err(Error::Factorization {
            context: context.to_string(),
            attempted: JITTER_LEVELS.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Absolute diagonal jitter that was added.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Relative jitter level (one of [`JITTER_LEVELS`]).
    pub fn jitter_level(&self) -> f64 {
        self.jitter_level
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// `log |M + jitter I|`.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// `M⁻¹ B` through a jittered Cholesky factorization of symmetric `M`.
pub fn chol_solve(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if b.nrows() != m.nrows() {
        return Err(Error::dim(
            "chol_solve",
            format!("M is {}x{}, B has {} rows", m.nrows(), m.ncols(), b.nrows()),
        ));
    }
    Ok(Factor::new(m, "chol_solve operand")?.solve(b))
}

/// Outcome of [`assert_psd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
    /// `max |M - Mᵀ|` relative to `max |M|`.
    pub asymmetry: f64,
}

/// Checks symmetry within `tol` (relative to the largest entry) and
/// `min eigenvalue >= -tol * trace / d`.
pub fn assert_psd(m: &DMatrix<f64>, tol: f64) -> PsdReport {
    let n = m.nrows();
    if n == 0 || !m.is_square() {
        return PsdReport {
            is_psd: n == 0 && m.is_square(),
            min_eigenvalue: f64::NAN,
            asymmetry: 0.0,
        };
    }
    if m.iter().any(|v| !v.is_finite()) {
        return PsdReport {
            is_psd: false,
            min_eigenvalue: f64::NAN,
            asymmetry: f64::NAN,
        };
    }
    let max_abs = m.amax();
    let asym_abs = (m - m.transpose()).amax();
    let asymmetry = if max_abs > 0.0 { asym_abs / max_abs } else { 0.0 };
    let min_eigenvalue = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let trace_scale = (m.trace() / n as f64).abs();
    let is_psd = asymmetry <= tol && min_eigenvalue >= -tol * trace_scale;
    PsdReport {
        is_psd,
        min_eigenvalue,
        asymmetry,
    }
}

/// Symmetrizes and, if any eigenvalue is negative, clamps it to zero.
///
/// Matrices that are already PSD are returned symmetrized but otherwise
/// untouched.
pub fn clamp_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = symmetrize(m);
    if sym.nrows() == 0 || Cholesky::new(sym.clone()).is_some() {
        return sym;
    }
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return sym;
    }
    let clamped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&clamped) * v.transpose()))
}

/// Joint of `x ~ N(m, P)` and `y | x ~ N(Hx + u, R)`, ordered `(x, y)`.
pub fn joint_from_conditional(x: &GaussianVec, map: &AffineMap) -> Result<GaussianVec> {
    let dx = x.dim();
    let dy = map.h.nrows();
    if map.h.ncols() != dx || x.cov.nrows() != dx || x.cov.ncols() != dx {
        return Err(Error::dim(
            "joint_from_conditional",
            format!("x has dimension {dx}, H is {}x{}", map.h.nrows(), map.h.ncols()),
        ));
    }
    if map.u.len() != dy || map.r.nrows() != dy || map.r.ncols() != dy {
        return Err(Error::dim(
            "joint_from_conditional",
            format!("H has {dy} rows, u has {}, R is {}x{}", map.u.len(), map.r.nrows(), map.r.ncols()),
        ));
    }
    let hp = &map.h * &x.cov;
    let mut mean = DVector::zeros(dx + dy);
    mean.rows_mut(0, dx).copy_from(&x.mean);
    mean.rows_mut(dx, dy).copy_from(&(&map.h * &x.mean + &map.u));

    let mut cov = DMatrix::zeros(dx + dy, dx + dy);
    cov.view_mut((0, 0), (dx, dx)).copy_from(&x.cov);
    cov.view_mut((dx, 0), (dy, dx)).copy_from(&hp);
    cov.view_mut((0, dx), (dx, dy)).copy_from(&hp.transpose());
    cov.view_mut((dx, dx), (dy, dy))
        .copy_from(&(&hp * map.h.transpose() + &map.r));
    Ok(GaussianVec {
        mean,
        cov: symmetrize(&cov),
    })
}

/// Conditions `joint` on the coordinates `obs_idx` taking values `y_obs`.
///
/// The result is over the remaining coordinates in ascending index order.
pub fn condition(joint: &GaussianVec, obs_idx: &[usize], y_obs: &DVector<f64>) -> Result<GaussianVec> {
    let d = joint.dim();
    if obs_idx.is_empty() || obs_idx.len() >= d {
        return Err(Error::Contract(format!(
            "observed index set must be a nonempty strict subset of 0..{d}, got {} indices",
            obs_idx.len()
        )));
    }
    if y_obs.len() != obs_idx.len() {
        return Err(Error::dim(
            "condition",
            format!("{} observed indices but {} values", obs_idx.len(), y_obs.len()),
        ));
    }
    let mut observed = vec![false; d];
    for &i in obs_idx {
        if i >= d || observed[i] {
            return Err(Error::Contract(format!(
                "observed index {i} is out of range or repeated (dimension {d})"
            )));
        }
        observed[i] = true;
    }
    let free: Vec<usize> = (0..d).filter(|&i| !observed[i]).collect();

    let a = select(&joint.cov, &free, &free);
    let c = select(&joint.cov, &free, obs_idx);
    let b = select(&joint.cov, obs_idx, obs_idx);
    let factor = Factor::new(&b, "observed block")?;

    let resid = y_obs - select_rows(&joint.mean, obs_idx);
    let mean = select_rows(&joint.mean, &free) + &c * factor.solve_vec(&resid);
    let cov = a - &c * factor.solve(&c.transpose());
    Ok(GaussianVec {
        mean,
        cov: symmetrize(&cov),
    })
}

/// Gaussian log-density of `y` under `N(mean, cov)`.
pub fn log_density(y: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    if y.len() != mean.len() || cov.nrows() != y.len() {
        return Err(Error::dim(
            "log_density",
            format!("y has length {}, mean {}, cov {}x{}", y.len(), mean.len(), cov.nrows(), cov.ncols()),
        ));
    }
    let factor = Factor::new(cov, "covariance")?;
    Ok(log_density_factored(&(y - mean), &factor))
}

pub(crate) fn log_density_factored(resid: &DVector<f64>, factor: &Factor) -> f64 {
    let n = resid.len() as f64;
    let quad = resid.dot(&factor.solve_vec(resid));
    -0.5 * quad - 0.5 * factor.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

pub(crate) fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub(crate) fn select_rows(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| v[rows[i]])
}
