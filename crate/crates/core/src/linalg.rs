//! Dense linear algebra glue over `faer`.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigenvalues and right eigenvectors (columns) of a real square matrix.
pub fn eig_real(a: MatRef<'_, f64>) -> Result<(Vec<C64>, Mat<C64>)> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidParameter("eigenproblem needs a square matrix".into()));
    }
    let e = a
        .eigen()
        .map_err(|err| Error::EigenSolver(format!("{err:?} (matrix order {})", a.nrows())))?;
    let values: Vec<C64> = e.S().column_vector().iter().copied().collect();
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::EigenSolver("non-finite eigenvalue".into()));
    }
    Ok((values, e.U().to_owned()))
}

/// Partial-pivoting LU with a 1-norm condition estimate.
pub struct Lu {
    lu: PartialPivLu<C64>,
    n: usize,
    norm1: f64,
}

impl Lu {
    pub fn new(a: MatRef<'_, C64>) -> Result<Lu> {
        if a.nrows() != a.ncols() {
            return Err(Error::InvalidParameter("LU needs a square matrix".into()));
        }
        let n = a.nrows();
        let norm1 = (0..n)
            .map(|j| a.col(j).iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Lu {
            lu: a.partial_piv_lu(),
            n,
            norm1,
        })
    }

    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        Ok((0..self.n).map(|i| x[(i, 0)]).collect())
    }

    fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        let x = self.lu.solve_adjoint(&rhs);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Hager–Higham estimate of `‖A‖₁‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.n;
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![C64::new(1.0 / n as f64, 0.0); n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = match self.solve(&x) {
                Ok(y) => y,
                Err(_) => return f64::INFINITY,
            };
            let ynorm: f64 = y.iter().map(|v| v.norm()).sum();
            if !ynorm.is_finite() {
                return f64::INFINITY;
            }
            if ynorm <= est {
                break;
            }
            est = ynorm;
            let xi: Vec<C64> = y
                .iter()
                .map(|v| {
                    let m = v.norm();
                    if m > 0.0 {
                        v / m
                    } else {
                        C64::new(1.0, 0.0)
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi);
            let (j, zmax) =
                z.iter()
                    .enumerate()
                    .map(|(i, v)| (i, v.norm()))
                    .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
            if j == last_j {
                break;
            }
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
            if zmax <= ztx {
                break;
            }
            last_j = j;
            x = vec![C64::new(0.0, 0.0); n];
            x[j] = C64::new(1.0, 0.0);
        }
        est * self.norm1
    }
}

/// `M x` for a dense complex matrix.
pub fn matvec(m: MatRef<'_, C64>, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); m.nrows()];
    for (j, xj) in x.iter().enumerate() {
        for (yi, mij) in y.iter_mut().zip(m.col(j).iter()) {
            *yi += mij * xj;
        }
    }
    y
}

/// `Mᴴ x`.
pub fn matvec_adjoint(m: MatRef<'_, C64>, x: &[C64]) -> Vec<C64> {
    (0..m.ncols())
        .map(|j| m.col(j).iter().zip(x).map(|(a, b)| a.conj() * b).sum())
        .collect()
}

/// Largest singular value by power iteration on `MᴴM`, stopping when the
/// relative change drops below `tol`.
pub fn spectral_norm(m: MatRef<'_, C64>, tol: f64, max_iter: usize) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    // Deterministic, non-symmetric start vector.
    let mut x: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.5 * ((i as f64) * 0.7).sin(), 0.0))
        .collect();
    let mut sigma = 0.0;
    for _ in 0..max_iter {
        let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if xn == 0.0 {
            return 0.0;
        }
        for v in &mut x {
            *v /= xn;
        }
        let y = matvec(m, &x);
        let next = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        x = matvec_adjoint(m, &y);
        if (next - sigma).abs() <= tol * next {
            return next;
        }
        sigma = next;
    }
    sigma
}

/// Orthonormalizes the columns in place by modified Gram–Schmidt.
fn orthonormalize(cols: &mut [Vec<f64>]) -> Result<()> {
    for i in 0..cols.len() {
        let (done, rest) = cols.split_at_mut(i);
        let v = &mut rest[0];
        // Twice is enough: one pass loses orthogonality on nearly parallel columns.
        for _ in 0..2 {
            for q in done.iter() {
                let c: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= c * y;
                }
            }
        }
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::EigenSolver("inverse iteration lost rank".into()));
        }
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
    Ok(())
}

/// Block inverse iteration for the eigenvalues of a real matrix near
/// `shift`, started from `start` (one column per wanted eigenvector).
/// Returns Ritz values and orthonormal Ritz vectors of the final block.
pub fn inverse_iteration(
    a: MatRef<'_, f64>,
    shift: f64,
    start: Vec<Vec<f64>>,
    iterations: usize,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.nrows();
    if a.ncols() != n || start.iter().any(|c| c.len() != n) || start.is_empty() {
        return Err(Error::InvalidParameter("inverse iteration: shape mismatch".into()));
    }
    let shifted = Mat::from_fn(n, n, |i, j| a[(i, j)] - if i == j { shift } else { 0.0 });
    let lu = shifted.partial_piv_lu();
    let mut q = start;
    orthonormalize(&mut q)?;
    for _ in 0..iterations {
        let rhs = Mat::from_fn(n, q.len(), |i, j| q[j][i]);
        let x = lu.solve(&rhs);
        q = (0..q.len()).map(|j| (0..n).map(|i| x[(i, j)]).collect()).collect();
        if q.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::EigenSolver(format!(
                "inverse iteration diverged at shift {shift}"
            )));
        }
        orthonormalize(&mut q)?;
    }
    // Rayleigh–Ritz on the block.
    let m = q.len();
    let aq: Vec<Vec<f64>> = q
        .iter()
        .map(|c| (0..n).map(|i| (0..n).map(|j| a[(i, j)] * c[j]).sum()).collect())
        .collect();
    let h = Mat::from_fn(m, m, |i, j| q[i].iter().zip(&aq[j]).map(|(x, y)| x * y).sum::<f64>());
    let (vals, vecs) = eig_real(h.as_ref())?;
    let mut ritz: Vec<(f64, Vec<f64>)> = (0..m)
        .map(|k| {
            let y: Vec<f64> = (0..m).map(|i| vecs[(i, k)].re).collect();
            let v: Vec<f64> = (0..n).map(|r| (0..m).map(|i| q[i][r] * y[i]).sum()).collect();
            (vals[k].re, v)
        })
        .collect();
    ritz.sort_by(|x, y| y.0.total_cmp(&x.0));
    let (values, mut vectors): (Vec<f64>, Vec<Vec<f64>>) = ritz.into_iter().unzip();
    orthonormalize(&mut vectors)?;
    Ok((values, vectors))
}
