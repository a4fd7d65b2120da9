//! Sector conditions on the perturbation, checked on the commutative symbol:
//! the scalar operator `zeta` is replaced by a complex number `z`, so
//! `f'(zeta, zeta*)` becomes a real function of `z + conj(z) = 2 Re z`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square grid `[lo, hi]^2` in the complex plane, `points` samples per axis,
/// endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lo: -20.0,
            hi: 20.0,
            points: 801,
        }
    }
}

impl GridSpec {
    pub fn symmetric(range: f64, points: usize) -> Self {
        Self {
            lo: -range,
            hi: range,
            points,
        }
    }

    /// `lo + (hi - lo) * i / (points - 1)`. Refining `points` to
    /// `2 * points - 1` reproduces every old coordinate bit for bit.
    pub fn coordinate(&self, i: usize) -> f64 {
        if self.points == 1 {
            return self.lo;
        }
        let t = i as f64 / (self.points - 1) as f64;
        self.lo + (self.hi - self.lo) * t
    }

    fn check(&self) -> Result<()> {
        if self.points == 0 || !(self.lo <= self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid",
                value: self.points as f64,
                reason: "grid must be nonempty with finite lo <= hi",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub gamma_tested: f64,
    pub delta1: f64,
    pub delta2: f64,
    /// Minimum of right-hand side minus left-hand side over the grid.
    pub worst_margin: f64,
    #[serde(with = "pair")]
    pub worst_point: Complex64,
    pub passed: bool,
    pub grid: GridSpec,
}

mod pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq([z.re, z.im])
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// Checks `|f'(z + z*)|^2 <= |z|^2 / gamma^2 + delta1` at every grid point.
pub fn verify_sector<F>(fprime: F, gamma: f64, delta1: f64, grid: &GridSpec) -> Result<SectorReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            value: gamma,
            reason: "must be positive",
        });
    }
    let inv_gamma_sq = 1.0 / (gamma * gamma);
    let (margin, point) = worst_over_grid(grid, |z| {
        let v = fprime(2.0 * z.re);
        (z.norm_sqr() * inv_gamma_sq + delta1, v * v)
    })?;
    Ok(SectorReport {
        gamma_tested: gamma,
        delta1,
        delta2: f64::NAN,
        worst_margin: margin,
        worst_point: point,
        passed: margin >= 0.0,
        grid: *grid,
    })
}

/// Checks `|f''(z + z*)|^2 <= delta2` at every grid point.
pub fn verify_second<F>(fsecond: F, delta2: f64, grid: &GridSpec) -> Result<SectorReport>
where
    F: Fn(f64) -> f64 + Sync,
{
    if !(delta2 >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta2",
            value: delta2,
            reason: "must be nonnegative",
        });
    }
    let (margin, point) = worst_over_grid(grid, |z| {
        let v = fsecond(2.0 * z.re);
        (delta2, v * v)
    })?;
    Ok(SectorReport {
        gamma_tested: f64::NAN,
        delta1: f64::NAN,
        delta2,
        worst_margin: margin,
        worst_point: point,
        passed: margin >= 0.0,
        grid: *grid,
    })
}

/// Minimum of `rhs - lhs`; ties go to the lexicographically smallest point.
fn worst_over_grid<F>(grid: &GridSpec, sides: F) -> Result<(f64, Complex64)>
where
    F: Fn(Complex64) -> (f64, f64) + Sync,
{
    grid.check()?;
    let p = grid.points;
    (0..p)
        .into_par_iter()
        .map(|i| {
            let x = grid.coordinate(i);
            let mut best = (f64::INFINITY, Complex64::new(f64::INFINITY, f64::INFINITY));
            for j in 0..p {
                let z = Complex64::new(x, grid.coordinate(j));
                let (rhs, lhs) = sides(z);
                if !rhs.is_finite() || !lhs.is_finite() {
                    return Err(Error::NonFinite {
                        what: "sector function",
                        row: i,
                        col: j,
                    });
                }
                let m = rhs - lhs;
                if m < best.0 {
                    best = (m, z);
                }
            }
            Ok(best)
        })
        .try_reduce(
            || (f64::INFINITY, Complex64::new(f64::INFINITY, f64::INFINITY)),
            |a, b| {
                Ok(match a.0.total_cmp(&b.0) {
                    std::cmp::Ordering::Less => a,
                    std::cmp::Ordering::Greater => b,
                    std::cmp::Ordering::Equal => {
                        if (a.1.re, a.1.im) <= (b.1.re, b.1.im) {
                            a
                        } else {
                            b
                        }
                    }
                })
            },
        )
}

/// `f'` and `f''` of `f = -Jp cos(zeta + zeta*)`, with the matching constants.
pub fn cosine_instance(josephson_rate: f64) -> (impl Fn(f64) -> f64 + Sync, impl Fn(f64) -> f64 + Sync) {
    (
        move |u: f64| josephson_rate * u.sin(),
        move |u: f64| josephson_rate * u.cos(),
    )
}
