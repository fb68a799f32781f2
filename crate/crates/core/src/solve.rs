//! Symmetric positive-definite solves via Cholesky.
//!
//! Factorization runs sequentially so results do not depend on the worker
//! thread count. If the first factorization fails, the diagonal is shifted by
//! `JITTER_FACTOR * trace(A) / n` once and the factorization retried.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt;
use faer::{Mat, Par};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const JITTER_FACTOR: f64 = 1e-10;

/// Solves `A z = b` for symmetric positive-definite `A`. Only the lower
/// triangle of `A` is read.
pub fn spd_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    solve_shifted(a, 0.0, b)
}

/// Solves `(A + shift * I) z = b`.
pub(crate) fn solve_shifted(a: &Matrix, shift: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid(format!("expected a square matrix, got {}x{}", n, a.cols())));
    }
    if b.len() != n {
        return Err(Error::invalid(format!("right-hand side has length {}, matrix has order {n}", b.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if !shift.is_finite() || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite shift or right-hand side"));
    }

    let build = |extra: f64| {
        Mat::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                a[(i, i)] + shift + extra
            } else if i > j {
                a[(i, j)]
            } else {
                0.0
            }
        })
    };

    let mut factor = build(0.0);
    if cholesky(&mut factor).is_err() {
        let trace: f64 = (0..n).map(|i| a[(i, i)] + shift).sum();
        let jitter = JITTER_FACTOR * trace / n as f64;
        log::debug!("cholesky failed at order {n}; retrying with jitter {jitter:e}");
        factor = build(jitter);
        if let Err(e) = cholesky(&mut factor) {
            return Err(Error::Numeric { jitter, detail: format!("{e:?}") });
        }
    }

    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let mut mem = MemBuffer::new(llt::solve::solve_in_place_scratch::<f64>(n, 1, Par::Seq));
    llt::solve::solve_in_place(factor.as_ref(), rhs.as_mut(), Par::Seq, MemStack::new(&mut mem));
    let z: Vec<f64> = (0..n).map(|i| rhs[(i, 0)]).collect();
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric { jitter: 0.0, detail: "solution is not finite".into() });
    }
    Ok(z)
}

fn cholesky(m: &mut Mat<f64>) -> Result<(), llt::factor::LltError> {
    let n = m.nrows();
    let mut mem =
        MemBuffer::new(llt::factor::cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
    llt::factor::cholesky_in_place(
        m.as_mut(),
        Default::default(),
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map(|_| ())
}
