//! Discrete-time LTI systems, their stacked finite-horizon output maps, and
//! the Gaussian pushforward through the noisy measurement mechanism.
//!
//! For a system `x(t+1) = A x(t) + B u(t)`, `y(t) = C x(t) + D u(t)` the
//! stacked output over a horizon `t` is `Y = F x0 + G U` where `F` stacks
//! `C A^k` and `G` is block lower-triangular Toeplitz in the Markov
//! parameters. The spectral quantities of `[F G]` drive the noise
//! calibration rules in [`crate::calibrate`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matgauss::{self, eig_extremes, Gaussian};

/// State-space matrices `(A, B, C, D)` of a discrete-time LTI system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LtiSystemRepr", into = "LtiSystemRepr")]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl LtiSystem {
    /// Validate dimensional consistency: `A` square `n x n`, `B` is `n x m`,
    /// `C` is `q x n`, `D` is `q x m`.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::dim("A (must be square)", a.nrows(), a.ncols()));
        }
        let n = a.nrows();
        if b.nrows() != n {
            return Err(Error::dim("B rows", n, b.nrows()));
        }
        if c.ncols() != n {
            return Err(Error::dim("C columns", n, c.ncols()));
        }
        let q = c.nrows();
        let m = b.ncols();
        if d.nrows() != q {
            return Err(Error::dim("D rows", q, d.nrows()));
        }
        if d.ncols() != m {
            return Err(Error::dim("D columns", m, d.ncols()));
        }
        Ok(Self { a, b, c, d })
    }

    /// Single-state, single-input, single-output system.
    pub fn scalar(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: DMatrix::from_element(1, 1, b),
            c: DMatrix::from_element(1, 1, c),
            d: DMatrix::from_element(1, 1, d),
        }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// Output dimension `q`.
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
}

/// JSON shape: `{"A": [[..]], "B": [[..]], "C": [[..]], "D": [[..]]}`.
/// Scalars are accepted wherever a 1x1 matrix is meant.
#[derive(Serialize, Deserialize)]
struct LtiSystemRepr {
    #[serde(rename = "A")]
    a: MatrixRepr,
    #[serde(rename = "B")]
    b: MatrixRepr,
    #[serde(rename = "C")]
    c: MatrixRepr,
    #[serde(rename = "D")]
    d: MatrixRepr,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixRepr {
    fn to_matrix(&self) -> Result<DMatrix<f64>> {
        match self {
            MatrixRepr::Scalar(v) => Ok(DMatrix::from_element(1, 1, *v)),
            MatrixRepr::Rows(rows) => matgauss::matrix_from_rows(rows),
        }
    }
}

impl TryFrom<LtiSystemRepr> for LtiSystem {
    type Error = Error;

    fn try_from(repr: LtiSystemRepr) -> Result<Self> {
        LtiSystem::new(
            repr.a.to_matrix()?,
            repr.b.to_matrix()?,
            repr.c.to_matrix()?,
            repr.d.to_matrix()?,
        )
    }
}

impl From<LtiSystem> for LtiSystemRepr {
    fn from(sys: LtiSystem) -> Self {
        LtiSystemRepr {
            a: MatrixRepr::Rows(matgauss::matrix_to_rows(&sys.a)),
            b: MatrixRepr::Rows(matgauss::matrix_to_rows(&sys.b)),
            c: MatrixRepr::Rows(matgauss::matrix_to_rows(&sys.c)),
            d: MatrixRepr::Rows(matgauss::matrix_to_rows(&sys.d)),
        }
    }
}

/// The horizon-`t` stacked output maps of an LTI system.
///
/// `from_state` has block row `k` equal to `C A^k`; `from_input` is block
/// lower-triangular Toeplitz with `D` on the diagonal and `C A^{i-j-1} B`
/// below it; `gram` is `[from_state from_input]^T [from_state from_input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMaps {
    horizon: usize,
    from_state: DMatrix<f64>,
    from_input: DMatrix<f64>,
    gram: DMatrix<f64>,
}

impl StackedMaps {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The `(t+1)q x n` map from the initial state to the stacked output.
    pub fn from_state(&self) -> &DMatrix<f64> {
        &self.from_state
    }

    /// The `(t+1)q x (t+1)m` map from the stacked input to the stacked output.
    pub fn from_input(&self) -> &DMatrix<f64> {
        &self.from_input
    }

    /// Gram matrix of the combined map `[from_state from_input]`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Stacked output dimension `(t+1)q`.
    pub fn output_dim(&self) -> usize {
        self.from_state.nrows()
    }

    /// The combined map `[from_state from_input]`.
    pub fn combined(&self) -> DMatrix<f64> {
        let rows = self.from_state.nrows();
        let n = self.from_state.ncols();
        let mc = self.from_input.ncols();
        let mut combined = DMatrix::zeros(rows, n + mc);
        combined.view_mut((0, 0), (rows, n)).copy_from(&self.from_state);
        combined.view_mut((0, n), (rows, mc)).copy_from(&self.from_input);
        combined
    }

    /// Largest eigenvalue of `from_input^T from_input`, the sensitivity of
    /// the output to the stacked input alone.
    pub fn input_sensitivity(&self) -> f64 {
        let gram_in = self.from_input.transpose() * &self.from_input;
        eig_extremes(&gram_in)
            .expect("input Gram matrix is symmetric")
            .1
            .max(0.0)
    }
}

/// Build the stacked maps of `sys` over horizon `t` (blocks `0..=t`).
pub fn build_stacked(sys: &LtiSystem, t: usize) -> StackedMaps {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let q = sys.output_dim();
    let rows = (t + 1) * q;

    // Markov parameters: G_0 = D, G_k = C A^{k-1} B.
    let mut markov: Vec<DMatrix<f64>> = Vec::with_capacity(t + 1);
    markov.push(sys.d.clone());
    let mut c_ak = sys.c.clone(); // C A^k, starting at k = 0
    let mut from_state = DMatrix::zeros(rows, n);
    for k in 0..=t {
        from_state.view_mut((k * q, 0), (q, n)).copy_from(&c_ak);
        if k < t {
            markov.push(&c_ak * &sys.b);
            c_ak *= &sys.a;
        }
    }

    let mut from_input = DMatrix::zeros(rows, (t + 1) * m);
    for i in 0..=t {
        for j in 0..=i {
            from_input
                .view_mut((i * q, j * m), (q, m))
                .copy_from(&markov[i - j]);
        }
    }

    let maps = StackedMaps {
        horizon: t,
        from_state,
        from_input,
        gram: DMatrix::zeros(0, 0),
    };
    let combined = maps.combined();
    StackedMaps {
        gram: matgauss::symmetrize(&(combined.transpose() * &combined)),
        ..maps
    }
}

/// Sensitivity of the stacked output to `(x0, U)`: the largest eigenvalue of
/// the combined Gram matrix, i.e. the squared induced 2-norm of the map.
pub fn sensitivity(maps: &StackedMaps) -> f64 {
    eig_extremes(maps.gram())
        .expect("Gram matrix is symmetric")
        .1
        .max(0.0)
}

/// Induced 2-norm (largest singular value) of an arbitrary real matrix,
/// computed from the eigenvalues of its Gram matrix.
pub fn lipschitz_bound(f: &DMatrix<f64>) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let gram = matgauss::symmetrize(&(f.transpose() * f));
    eig_extremes(&gram)
        .expect("Gram matrix is symmetric")
        .1
        .max(0.0)
        .sqrt()
}

/// Distribution of the noisy stacked output `Y = F x0 + G U + V` for
/// independent Gaussian `x0 ~ px0`, `U ~ pu`, and noise `V ~ N(0, noise_cov)`.
pub fn pushforward(
    maps: &StackedMaps,
    px0: &Gaussian,
    pu: &Gaussian,
    noise_cov: &DMatrix<f64>,
) -> Result<Gaussian> {
    let n = maps.from_state.ncols();
    let input_dim = maps.from_input.ncols();
    let out = maps.output_dim();
    if px0.dim() != n {
        return Err(Error::dim("initial-state distribution", n, px0.dim()));
    }
    if pu.dim() != input_dim {
        return Err(Error::dim("stacked-input distribution", input_dim, pu.dim()));
    }
    if noise_cov.nrows() != out || noise_cov.ncols() != out {
        return Err(Error::dim("noise covariance", out, noise_cov.nrows()));
    }
    let noise_sym = matgauss::check_symmetric(noise_cov)?;

    let mean = &maps.from_state * px0.mean() + &maps.from_input * pu.mean();
    let cov = &maps.from_state * px0.cov() * maps.from_state.transpose()
        + &maps.from_input * pu.cov() * maps.from_input.transpose()
        + noise_sym;
    Gaussian::new(mean, cov)
}

/// Convenience: mean vector of the noiseless stacked output for given
/// deterministic `x0` and stacked input.
pub fn stacked_mean(maps: &StackedMaps, x0: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    &maps.from_state * x0 + &maps.from_input * u
}
