//! Kernel evaluation, Gram assembly and RKHS geometry of kernel expansions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par::Execution;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `exp(-|a - b|^2 / bandwidth)`
    #[default]
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { family: KernelFamily::Gaussian, bandwidth: 1.0 }
    }
}

impl KernelConfig {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let cfg = Self { family: KernelFamily::Gaussian, bandwidth };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "kernel bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }

    /// Upper bound of `K(x, x)`.
    pub fn kappa(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian => 1.0,
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                (-d2 / self.bandwidth).exp()
            }
        }
    }
}

pub fn kernel_eval(cfg: &KernelConfig, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("kernel arguments have dimensions {} and {}", a.len(), b.len())));
    }
    Ok(cfg.eval_unchecked(a, b))
}

/// `G[i][j] = K(x_i, x2_j)`.
pub fn gram_matrix(cfg: &KernelConfig, x: &Matrix, x2: &Matrix) -> Result<Matrix> {
    gram_matrix_with(cfg, x, x2, Execution::default())
}

pub fn gram_matrix_with(cfg: &KernelConfig, x: &Matrix, x2: &Matrix, exec: Execution) -> Result<Matrix> {
    check_dims(x, x2)?;
    let mut g = Matrix::zeros(x.rows(), x2.rows());
    let cols = x2.rows();
    exec.for_each_chunk(g.as_mut_slice(), cols, |i, row| {
        let xi = x.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = cfg.eval_unchecked(xi, x2.row(j));
        }
    });
    Ok(g)
}

/// Gram matrix of `x` with itself. Symmetric bitwise: the lower triangle is
/// evaluated and mirrored.
pub fn gram_self(cfg: &KernelConfig, x: &Matrix, exec: Execution) -> Matrix {
    let n = x.rows();
    let mut g = Matrix::zeros(n, n);
    exec.for_each_chunk(g.as_mut_slice(), n, |i, row| {
        let xi = x.row(i);
        for (j, v) in row.iter_mut().enumerate().take(i + 1) {
            *v = cfg.eval_unchecked(xi, x.row(j));
        }
    });
    let data = g.as_mut_slice();
    for i in 0..n {
        for j in (i + 1)..n {
            data[i * n + j] = data[j * n + i];
        }
    }
    g
}

fn check_dims(x: &Matrix, x2: &Matrix) -> Result<()> {
    if x.rows() > 0 && x2.rows() > 0 && x.cols() != x2.cols() {
        return Err(Error::invalid(format!("covariate dimensions differ: {} vs {}", x.cols(), x2.cols())));
    }
    Ok(())
}

/// A finite kernel expansion `f(x) = sum_i coefficients[i] * K(x, anchors[i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresenterFunction {
    anchors: Matrix,
    coefficients: Vec<f64>,
    kernel: KernelConfig,
}

impl RepresenterFunction {
    pub fn new(anchors: Matrix, coefficients: Vec<f64>, kernel: KernelConfig) -> Result<Self> {
        if anchors.rows() != coefficients.len() {
            return Err(Error::invalid(format!(
                "{} anchors but {} coefficients",
                anchors.rows(),
                coefficients.len()
            )));
        }
        kernel.validate()?;
        Ok(Self { anchors, coefficients, kernel })
    }

    /// The zero function carried on the given anchors.
    pub fn zero(anchors: Matrix, kernel: KernelConfig) -> Self {
        let coefficients = vec![0.0; anchors.rows()];
        Self { anchors, coefficients, kernel }
    }

    pub fn anchors(&self) -> &Matrix {
        &self.anchors
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.anchors.cols()
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if self.anchors.rows() > 0 && point.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, function expects {}",
                point.len(),
                self.dim()
            )));
        }
        Ok(self.eval_unchecked(point))
    }

    fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.anchors
            .row_iter()
            .zip(&self.coefficients)
            .map(|(a, b)| b * self.kernel.eval_unchecked(point, a))
            .sum()
    }

    pub fn eval_many(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.eval_many_with(x, Execution::default())
    }

    pub fn eval_many_with(&self, x: &Matrix, exec: Execution) -> Result<Vec<f64>> {
        check_dims(x, &self.anchors)?;
        Ok(exec.map(x.rows(), |i| self.eval_unchecked(x.row(i))))
    }

    /// `||f||_K^2 = beta' K beta`.
    pub fn norm_squared(&self) -> f64 {
        quadratic_form(&self.kernel, &self.anchors, &self.coefficients, Execution::default())
    }
}

/// `beta' K(anchors, anchors) beta`, summed row by row in index order.
fn quadratic_form(cfg: &KernelConfig, anchors: &Matrix, beta: &[f64], exec: Execution) -> f64 {
    let n = anchors.rows();
    let rows = exec.map(n, |i| {
        let ai = anchors.row(i);
        // K is symmetric: diagonal once, strict lower triangle twice
        let mut s = 0.5 * beta[i] * cfg.eval_unchecked(ai, ai);
        for (j, bj) in beta.iter().enumerate().take(i) {
            s += bj * cfg.eval_unchecked(ai, anchors.row(j));
        }
        2.0 * beta[i] * s
    });
    rows.iter().sum()
}

/// `||f - g||_K` computed from the two kernel expansions.
pub fn rkhs_norm_diff(f: &RepresenterFunction, g: &RepresenterFunction) -> Result<f64> {
    rkhs_norm_diff_with(f, g, Execution::default())
}

pub fn rkhs_norm_diff_with(f: &RepresenterFunction, g: &RepresenterFunction, exec: Execution) -> Result<f64> {
    if f.kernel != g.kernel {
        return Err(Error::invalid(format!(
            "kernel configurations differ: {:?} vs {:?}",
            f.kernel, g.kernel
        )));
    }
    check_dims(&f.anchors, &g.anchors)?;
    // f - g as one expansion over the stacked anchors
    let anchors = Matrix::vstack(&[&f.anchors, &g.anchors])?;
    let beta: Vec<f64> = f.coefficients.iter().copied().chain(g.coefficients.iter().map(|b| -b)).collect();
    let q = quadratic_form(&f.kernel, &anchors, &beta, exec);
    Ok(q.max(0.0).sqrt())
}
