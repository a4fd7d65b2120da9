//! Test-only oracles and generators, independent of the library's solvers.

#![allow(dead_code, clippy::needless_range_loop)]

use jjcert::linalg::{CMatrix, CVector};
use jjcert::lqsys::{validate_model, PhysicalParams, SystemModel, DEFAULT_VALIDATION_TOL};
use jjcert::stability::{build_f, spectral_abscissa};
use num_complex::Complex64;
use rand::Rng;

pub const SEED: u64 = 0;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Gaussian elimination with complete pivoting on a row-major copy.
pub fn oracle_solve(a: &CMatrix, b: &CVector) -> Vec<Complex64> {
    let n = a.nrows();
    let mut m: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).chain(std::iter::once(b[i])).collect())
        .collect();
    let mut cols: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, -1.0);
        for i in k..n {
            for j in k..n {
                if m[i][j].norm() > best {
                    best = m[i][j].norm();
                    pi = i;
                    pj = j;
                }
            }
        }
        m.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        cols.swap(k, pj);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k..=n {
                let v = m[k][j];
                m[i][j] -= f * v;
            }
        }
    }
    let mut y = vec![c(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut acc = m[i][n];
        for j in i + 1..n {
            acc -= m[i][j] * y[j];
        }
        y[i] = acc / m[i][i];
    }
    let mut x = vec![c(0.0, 0.0); n];
    for (k, &col) in cols.iter().enumerate() {
        x[col] = y[k];
    }
    x
}

/// |C (i w I - A)^{-1} B| for 4-state systems, elimination on stack arrays.
pub struct GainOracle {
    a: [[Complex64; 4]; 4],
    b: [Complex64; 4],
    c: [Complex64; 4],
}

impl GainOracle {
    pub fn new(a: &CMatrix, b: &CVector, cm: &CMatrix) -> Self {
        assert_eq!(a.nrows(), 4);
        Self {
            a: std::array::from_fn(|i| std::array::from_fn(|j| a[(i, j)])),
            b: std::array::from_fn(|i| b[i]),
            c: std::array::from_fn(|j| cm[(0, j)]),
        }
    }

    pub fn gain(&self, w: f64) -> f64 {
        let mut m = [[c(0.0, 0.0); 5]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = -self.a[i][j];
            }
            m[i][i] += c(0.0, w);
            m[i][4] = self.b[i];
        }
        for k in 0..4 {
            let p = (k..4)
                .max_by(|&x, &y| m[x][k].norm().total_cmp(&m[y][k].norm()))
                .unwrap();
            m.swap(k, p);
            for i in k + 1..4 {
                let f = m[i][k] / m[k][k];
                for j in k..5 {
                    let v = m[k][j];
                    m[i][j] -= f * v;
                }
            }
        }
        let mut x = [c(0.0, 0.0); 4];
        for i in (0..4).rev() {
            let mut acc = m[i][4];
            for j in i + 1..4 {
                acc -= m[i][j] * x[j];
            }
            x[i] = acc / m[i][i];
        }
        (0..4).map(|j| self.c[j] * x[j]).sum::<Complex64>().norm()
    }
}

/// |C (i w I - A)^{-1} B| by the oracle solver.
pub fn oracle_gain(a: &CMatrix, b: &CVector, cm: &CMatrix, w: f64) -> f64 {
    let n = a.nrows();
    let shifted = CMatrix::identity(n, n) * c(0.0, w) - a;
    let x = oracle_solve(&shifted, b);
    (0..n).map(|j| cm[(0, j)] * x[j]).sum::<Complex64>().norm()
}

/// exp(A t) by scaling and squaring a degree-20 Taylor series.
pub fn expm(a: &CMatrix, t: f64) -> CMatrix {
    let n = a.nrows();
    let at = a * c(t, 0.0);
    let norm = at.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = at * c(scale, 0.0);
    let mut term = CMatrix::identity(n, n);
    let mut sum = CMatrix::identity(n, n);
    for k in 1..=20 {
        term = term * &x * c(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

fn rand_c(rng: &mut impl Rng, scale: f64) -> Complex64 {
    c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
}

/// A structurally valid 2-mode model with O(1) entries (not necessarily stable).
pub fn random_model(rng: &mut impl Rng) -> SystemModel {
    let nm = 2;
    let d = 2 * nm;
    let mut m1 = [[c(0.0, 0.0); 2]; 2];
    let mut m2 = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        m1[i][i] = c(rng.gen_range(-2.0..2.0), 0.0);
        m2[i][i] = rand_c(rng, 1.0);
    }
    m1[0][1] = rand_c(rng, 1.0);
    m1[1][0] = m1[0][1].conj();
    m2[0][1] = rand_c(rng, 1.0);
    m2[1][0] = m2[0][1];
    let n1: Vec<Complex64> = (0..4).map(|_| rand_c(rng, 1.5)).collect();
    let n2: Vec<Complex64> = (0..4).map(|_| rand_c(rng, 0.3)).collect();

    let mut m = CMatrix::zeros(d, d);
    let mut n = CMatrix::zeros(d, d);
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = m1[i][j];
            m[(i, j + 2)] = m2[i][j];
            m[(i + 2, j)] = m2[i][j].conj();
            m[(i + 2, j + 2)] = m1[i][j].conj();
            n[(i, j)] = n1[2 * i + j];
            n[(i, j + 2)] = n2[2 * i + j];
            n[(i + 2, j)] = n2[2 * i + j].conj();
            n[(i + 2, j + 2)] = n1[2 * i + j].conj();
        }
    }
    let e = CMatrix::from_fn(1, d, |_, _| rand_c(rng, 1.0));
    let model = SystemModel::new(nm, m, n, e, rng.gen_range(0.1..10.0), 0.0, rng.gen_range(0.0..1.0)).unwrap();
    assert!(validate_model(&model, DEFAULT_VALIDATION_TOL).unwrap().is_empty());
    model
}

/// Random valid model whose F has spectral abscissa below `-margin`.
pub fn random_stable_model(rng: &mut impl Rng, margin: f64) -> SystemModel {
    loop {
        let model = random_model(rng);
        let f = build_f(&model).unwrap();
        if spectral_abscissa(&f).unwrap() < -margin {
            return model;
        }
    }
}

pub fn random_params(rng: &mut impl Rng) -> PhysicalParams {
    let log = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| 10f64.powf(rng.gen_range(lo..hi));
    PhysicalParams {
        omega: log(rng, 9.0, 13.0),
        g: rng.gen_range(0.0..1.0),
        charging_energy: log(rng, -24.0, -20.0),
        josephson_rate: log(rng, 9.0, 13.0),
        nbar: rng.gen_range(-5.0..5.0),
        kappa1: log(rng, 8.0, 13.0),
        kappa2: log(rng, 8.0, 13.0),
        hbar: 1.0546e-34 * rng.gen_range(0.5..2.0),
    }
}
