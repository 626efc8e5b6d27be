use super::{axpy, dot, Matrix, Vector};
use crate::error::{check_dim, GpError, Result};
use crate::parallel;

/// Rows per panel in the blocked factorization.
const BLOCK: usize = 64;

/// Lower-triangular factor `L` with `L L^T = A + jitter_used * I`.
#[derive(Clone, Debug)]
pub struct CholeskyFactor {
    l: Matrix,
    jitter_used: f64,
}

/// Which triangular system [`trisolve`] solves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriMode {
    /// `L X = B`
    Lower,
    /// `L^T X = B`
    UpperTransposed,
}

/// Diagonal jitter escalation used when a plain factorization fails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JitterPolicy {
    /// First jitter, relative to the mean diagonal.
    pub initial_relative: f64,
    pub growth: f64,
    pub max_escalations: usize,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial_relative: 1e-10,
            growth: 10.0,
            max_escalations: 3,
        }
    }
}

impl CholeskyFactor {
    pub fn l(&self) -> &Matrix {
        &self.l
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn order(&self) -> usize {
        self.l.rows()
    }

    /// Solves `(L L^T) x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vector> {
        let z = trisolve_vec(self, b, TriMode::Lower)?;
        trisolve_vec(self, &z, TriMode::UpperTransposed)
    }

    pub fn logdet(&self) -> f64 {
        logdet_from_chol(self)
    }
}

/// Factorizes a symmetric positive definite matrix using the default jitter policy.
pub fn cholesky(a: &Matrix) -> Result<CholeskyFactor> {
    cholesky_with_policy(a, JitterPolicy::default())
}

/// Factorizes `a`, retrying with escalating diagonal jitter on failure.
///
/// The first attempt uses no jitter. Subsequent attempts add
/// `initial_relative * mean(diag(a)) * growth^k` for `k = 0..=max_escalations`.
pub fn cholesky_with_policy(a: &Matrix, policy: JitterPolicy) -> Result<CholeskyFactor> {
    if !a.is_square() {
        return Err(GpError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    check_symmetric(a, 1e-8)?;
    let n = a.rows();
    if n == 0 {
        return Ok(CholeskyFactor {
            l: Matrix::zeros(0, 0),
            jitter_used: 0.0,
        });
    }
    let mean_diag = (0..n).map(|i| a[(i, i)]).sum::<f64>() / n as f64;
    let base = policy.initial_relative * mean_diag.abs().max(f64::MIN_POSITIVE);

    let mut jitter = 0.0;
    let mut attempt = 0;
    loop {
        match factor_lower(a, jitter) {
            Ok(l) => {
                return Ok(CholeskyFactor {
                    l,
                    jitter_used: jitter,
                })
            }
            Err((pivot, value)) => {
                if attempt > policy.max_escalations {
                    return Err(GpError::NotPositiveDefinite {
                        pivot,
                        value,
                        jitter,
                    });
                }
                jitter = base * policy.growth.powi(attempt as i32);
                attempt += 1;
            }
        }
    }
}

fn check_symmetric(a: &Matrix, rel_tol: f64) -> Result<()> {
    let scale = a.max_abs();
    let n = a.rows();
    for i in 0..n {
        for j in 0..i {
            let dev = (a[(i, j)] - a[(j, i)]).abs();
            if dev > rel_tol * scale || !dev.is_finite() {
                return Err(GpError::NonSymmetric {
                    row: i,
                    col: j,
                    deviation: dev,
                });
            }
        }
    }
    Ok(())
}

/// Blocked left-looking factorization of the lower triangle of `a + jitter I`.
///
/// Returns the failing pivot index and value when a non-positive pivot shows up.
fn factor_lower(a: &Matrix, jitter: f64) -> std::result::Result<Matrix, (usize, f64)> {
    let n = a.rows();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n..i * n + i + 1].copy_from_slice(&a.row(i)[..=i]);
        data[i * n + i] += jitter;
    }
    let mut l = Matrix::from_vec_unchecked(n, n, data);

    for kb in (0..n).step_by(BLOCK) {
        let ke = (kb + BLOCK).min(n);

        // Subtract contributions of the finished columns 0..kb from the panel.
        if kb > 0 {
            let mut panel = Vec::with_capacity((ke - kb) * kb);
            for j in kb..ke {
                panel.extend_from_slice(&l.row(j)[..kb]);
            }
            let tail = &mut l.as_mut_slice()[kb * n..];
            parallel::for_each_row_mut(tail, n, |r, row| {
                let i = kb + r;
                let (done, rest) = row.split_at_mut(kb);
                let last = ke.min(i + 1);
                for j in kb..last {
                    rest[j - kb] -= dot(done, &panel[(j - kb) * kb..(j - kb + 1) * kb]);
                }
            });
        }

        // Factor the diagonal block.
        for j in kb..ke {
            for i in j..ke {
                let s = {
                    let (ri, rj) = (l.row(i), l.row(j));
                    ri[j] - dot(&ri[kb..j], &rj[kb..j])
                };
                if i == j {
                    if !(s.is_finite() && s > 0.0) {
                        return Err((j, s));
                    }
                    l[(j, j)] = s.sqrt();
                } else {
                    l[(i, j)] = s / l[(j, j)];
                }
            }
        }

        // Solve for the panel rows below the diagonal block.
        if ke < n {
            let w = ke - kb;
            let mut diag_block = Vec::with_capacity(w * w);
            for j in kb..ke {
                diag_block.extend_from_slice(&l.row(j)[kb..ke]);
            }
            let tail = &mut l.as_mut_slice()[ke * n..];
            parallel::for_each_row_mut(tail, n, |_, row| {
                let seg = &mut row[kb..ke];
                for jj in 0..w {
                    let lj = &diag_block[jj * w..(jj + 1) * w];
                    let s = seg[jj] - dot(&seg[..jj], &lj[..jj]);
                    seg[jj] = s / lj[jj];
                }
            });
        }
    }
    Ok(l)
}

/// Solves a triangular system against every column of `b`.
pub fn trisolve(l: &CholeskyFactor, b: &Matrix, mode: TriMode) -> Result<Matrix> {
    let n = l.order();
    check_dim("trisolve", n, b.rows())?;
    check_diagonal(l)?;
    let t = b.cols();
    // Work column-by-column so each system reads contiguous memory.
    let mut cols = b.transpose();
    parallel::for_each_row_mut(cols.as_mut_slice(), n, |_, x| solve_in_place(&l.l, x, mode));
    if t == 1 {
        return Ok(Matrix::from_vec_unchecked(n, 1, cols.into_vec()));
    }
    Ok(cols.transpose())
}

/// Solves a triangular system for a single right-hand side.
pub fn trisolve_vec(l: &CholeskyFactor, b: &[f64], mode: TriMode) -> Result<Vector> {
    check_dim("trisolve", l.order(), b.len())?;
    check_diagonal(l)?;
    let mut x = Vector::from_slice(b);
    solve_in_place(&l.l, &mut x, mode);
    Ok(x)
}

fn check_diagonal(l: &CholeskyFactor) -> Result<()> {
    for i in 0..l.order() {
        if l.l[(i, i)] == 0.0 {
            return Err(GpError::Singular(i));
        }
    }
    Ok(())
}

pub(crate) fn solve_in_place(l: &Matrix, x: &mut [f64], mode: TriMode) {
    let n = l.rows();
    match mode {
        TriMode::Lower => {
            for i in 0..n {
                let row = l.row(i);
                x[i] = (x[i] - dot(&row[..i], &x[..i])) / row[i];
            }
        }
        TriMode::UpperTransposed => {
            for i in (0..n).rev() {
                let row = l.row(i);
                x[i] /= row[i];
                let xi = x[i];
                axpy(-xi, &row[..i], &mut x[..i]);
            }
        }
    }
}

/// `log det(L L^T) = 2 sum_i log L_ii`
pub fn logdet_from_chol(l: &CholeskyFactor) -> f64 {
    2.0 * (0..l.order()).map(|i| l.l[(i, i)].ln()).sum::<f64>()
}
