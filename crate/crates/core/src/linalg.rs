//! Small dense complex linear algebra: eigenvalues of non-Hermitian
//! matrices and pivoted LU solves.
//!
//! The matrices handled here are at most a few dozen rows (state dimension
//! 2n and level-set dimension 4n), so everything is unblocked and written for
//! clarity over throughput.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest entry modulus, zero for an empty matrix.
pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Entrywise complex conjugate (the `#` operation on matrices).
pub fn conj(a: &CMatrix) -> CMatrix {
    a.map(|z| z.conj())
}

/// Eigenvalues of a general complex square matrix.
///
/// Balances, reduces to upper Hessenberg form with Householder reflectors and
/// runs single-shift QR with Wilkinson shifts and deflation. Eigenvalues are
/// returned in the order they deflate (bottom of the matrix first).
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            what: "eigenvalue input",
            expected_rows: n,
            expected_cols: n,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    for ((i, j), z) in a.iter().enumerate().map(|(k, z)| ((k % n, k / n), z)) {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NonFinite {
                what: "eigenvalue input",
                row: i,
                col: j,
            });
        }
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    balance(&mut h);
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(h, max_abs(a))
}

/// Diagonal similarity scaling by powers of two (Parlett-Reinsch).
fn balance(a: &mut CMatrix) {
    let n = a.nrows();
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].l1_norm();
                    r += a[(i, j)].l1_norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if c + r < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
}

fn reduce_to_hessenberg(h: &mut CMatrix) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let alpha = (k + 1..n).map(|i| h[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = h[(k + 1, k)];
        let phase = if x0.norm() == 0.0 { ONE } else { x0 / x0.norm() };
        let mut v: Vec<Complex64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        v[0] += phase * alpha;
        let beta: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if beta == 0.0 {
            continue;
        }
        let scale = 2.0 / beta;

        // H <- P H, P = I - scale v v^H acting on rows k+1..n
        for j in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| vt.conj() * h[(k + 1 + t, j)]).sum();
            let w = dot * scale;
            for (t, vt) in v.iter().enumerate() {
                h[(k + 1 + t, j)] -= vt * w;
            }
        }
        // H <- H P acting on columns k+1..n
        for i in 0..n {
            let dot: Complex64 = v.iter().enumerate().map(|(t, vt)| h[(i, k + 1 + t)] * vt).sum();
            let w = dot * scale;
            for (t, vt) in v.iter().enumerate() {
                h[(i, k + 1 + t)] -= w * vt.conj();
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` mapping `(a, b)` to `(r, 0)`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64) {
    if b.norm() == 0.0 {
        return (1.0, ZERO);
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let r = a.norm().hypot(b.norm());
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}

fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half_diff = (a - d) * 0.5;
    let disc = (half_diff * half_diff + b * c).sqrt();
    let mid = (a + d) * 0.5;
    let l1 = mid + disc;
    let l2 = mid - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

fn hessenberg_qr(mut h: CMatrix, input_scale: f64) -> Result<Vec<Complex64>> {
    let n = h.nrows();
    let eps = f64::EPSILON;
    let max_sweeps = 60 * n.max(2);
    let mut eig = vec![ZERO; n];
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n;

    while hi > 0 {
        let last = hi - 1;
        let mut lo = last;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].l1_norm();
            let mut scale = h[(lo - 1, lo - 1)].l1_norm() + h[(lo, lo)].l1_norm();
            if scale == 0.0 {
                scale = (lo.saturating_sub(1)..=last)
                    .flat_map(|i| (lo.saturating_sub(1)..=last).map(move |j| (i, j)))
                    .map(|(i, j)| h[(i, j)].l1_norm())
                    .fold(0.0, f64::max);
            }
            if sub <= eps * scale {
                h[(lo, lo - 1)] = ZERO;
                break;
            }
            lo -= 1;
        }

        if lo == last {
            eig[last] = h[(last, last)];
            hi -= 1;
            since_deflation = 0;
            continue;
        }

        total += 1;
        since_deflation += 1;
        if total > max_sweeps {
            return Err(Error::EigenNonConvergence {
                iterations: total,
                order: n,
                max_abs: input_scale,
            });
        }

        let shift = if since_deflation.is_multiple_of(11) {
            h[(last, last)] + 0.75 * h[(last, last - 1)].norm()
        } else {
            wilkinson_shift(
                h[(last - 1, last - 1)],
                h[(last - 1, last)],
                h[(last, last - 1)],
                h[(last, last)],
            )
        };

        for k in lo..=last {
            h[(k, k)] -= shift;
        }
        let mut rotations = Vec::with_capacity(last - lo);
        for k in lo..last {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            for j in k..=last {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + s * y;
                h[(k + 1, j)] = -s.conj() * x + y * c;
            }
            rotations.push((c, s));
        }
        for (offset, &(c, s)) in rotations.iter().enumerate() {
            let k = lo + offset;
            for i in lo..=(k + 1).min(last) {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
        }
        for k in lo..=last {
            h[(k, k)] += shift;
        }
    }
    Ok(eig)
}

/// A pivot that fell below the singularity threshold during factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub pivot: f64,
    pub threshold: f64,
}

/// LU factorization with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
}

impl Lu {
    /// Factors `a`; a pivot no larger than `n * eps * max|a|` counts as singular.
    pub fn factor(a: &CMatrix) -> std::result::Result<Self, SingularPivot> {
        let n = a.nrows();
        debug_assert_eq!(n, a.ncols());
        let threshold = n as f64 * f64::EPSILON * max_abs(a);
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].norm()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold {
                return Err(SingularPivot { pivot, threshold });
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / d;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= factor * u;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &CVector) -> CVector {
        let n = self.lu.nrows();
        let mut x = CVector::from_iterator(n, self.perm.iter().map(|&p| b[p]));
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }
}

/// Solves `a x = b` with two steps of iterative refinement.
pub fn solve_refined(a: &CMatrix, b: &CVector) -> std::result::Result<CVector, SingularPivot> {
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b);
    for _ in 0..2 {
        let r = b - a * &x;
        x += lu.solve(&r);
    }
    Ok(x)
}

/// Unit-norm eigenvector for an (approximate) eigenvalue, by inverse iteration.
pub fn eigenvector(a: &CMatrix, lambda: Complex64) -> Result<CVector> {
    let n = a.nrows();
    let scale = max_abs(a).max(lambda.norm()).max(f64::MIN_POSITIVE);
    let mut offset = 1e-10 * scale;
    let lu = loop {
        let shifted = a - identity(n) * (lambda + offset);
        match Lu::factor(&shifted) {
            Ok(lu) => break lu,
            Err(_) if offset < 1e-4 * scale => offset *= 10.0,
            Err(sp) => {
                return Err(Error::Singular {
                    re: lambda.re,
                    im: lambda.im,
                    pivot: sp.pivot,
                    threshold: sp.threshold,
                })
            }
        }
    };
    let mut v = CVector::from_element(n, ONE);
    for _ in 0..4 {
        v = lu.solve(&v);
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
    }
    Ok(v)
}
