//! Strict bounded real test: `F = -iJM - 1/2 J N^dagger J N` must be Hurwitz
//! and `G(s) = Etilde# Sigma (sI - F)^{-1} J Sigma Etilde^T` must have
//! H-infinity norm below `gamma / 2`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{conj, eigenvalues, identity, max_abs, solve_refined, CMatrix, CVector};
use crate::lqsys::{j_matrix, sigma_matrix, SystemModel};

/// `x' = A x + B u`, `y = C x`, with no feedthrough.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: CMatrix,
    pub b: CVector,
    pub c: CMatrix,
}

impl StateSpace {
    pub fn new(a: CMatrix, b: CVector, c: CMatrix) -> Result<Self> {
        let n = a.nrows();
        let shapes = [
            ("A", a.nrows(), a.ncols(), n, n),
            ("B", b.nrows(), 1, n, 1),
            ("C", c.nrows(), c.ncols(), 1, n),
        ];
        for (what, rows, cols, er, ec) in shapes {
            if rows != er || cols != ec {
                return Err(Error::Dimension {
                    what,
                    expected_rows: er,
                    expected_cols: ec,
                    rows,
                    cols,
                });
            }
        }
        Ok(Self { a, b, c })
    }

    /// The realization whose transfer function is the one bounded by `gamma / 2`.
    pub fn from_model(model: &SystemModel) -> Result<Self> {
        let nm = model.n_modes();
        let sigma = sigma_matrix(nm);
        let a = build_f(model)?;
        let b = j_matrix(nm) * &sigma * model.etilde().transpose();
        let c = conj(model.etilde()) * sigma;
        Self::new(a, b.column(0).into_owned(), c)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

pub fn build_f(model: &SystemModel) -> Result<CMatrix> {
    let d = model.dim();
    for (what, a) in [("M", model.m()), ("N", model.n())] {
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::Dimension {
                what,
                expected_rows: d,
                expected_cols: d,
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
    }
    let j = j_matrix(model.n_modes());
    let n = model.n();
    let minus_i = Complex64::new(0.0, -1.0);
    let half = Complex64::new(0.5, 0.0);
    Ok(&j * model.m() * minus_i - (&j * n.adjoint() * &j * n) * half)
}

pub fn spectral_abscissa(f: &CMatrix) -> Result<f64> {
    Ok(abscissa_of(&eigenvalues(f)?))
}

fn abscissa_of(eigs: &[Complex64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// True when every eigenvalue has real part below `-tol`.
pub fn is_hurwitz(f: &CMatrix, tol: f64) -> Result<bool> {
    Ok(spectral_abscissa(f)? < -tol)
}

/// Absolute Hurwitz tolerance for `f` given a relative one.
pub fn hurwitz_tolerance(f: &CMatrix, rel: f64) -> f64 {
    rel * max_abs(f).max(1.0)
}

/// `C (sI - A)^{-1} B` by a refined pivoted solve.
pub fn transfer_eval(ss: &StateSpace, s: Complex64) -> Result<Complex64> {
    let n = ss.order();
    let shifted = identity(n) * s - &ss.a;
    let x = solve_refined(&shifted, &ss.b).map_err(|sp| Error::Singular {
        re: s.re,
        im: s.im,
        pivot: sp.pivot,
        threshold: sp.threshold,
    })?;
    Ok((&ss.c * x)[(0, 0)])
}

fn gain_at(ss: &StateSpace, omega: f64) -> Option<f64> {
    transfer_eval(ss, Complex64::new(0.0, omega)).ok().map(|g| g.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfOptions {
    /// Stop once the certified bracket is this tight relative to its lower end.
    pub rel_tol: f64,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    /// An eigenvalue of the level-set matrix counts as imaginary when its real
    /// part is within this fraction of the matrix's largest entry.
    pub imag_axis_rel_tol: f64,
    /// Relative Hurwitz tolerance checked before anything else.
    pub hurwitz_rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            grid_lo: 1.0,
            grid_hi: 1e15,
            grid_points: 600,
            imag_axis_rel_tol: 1e-8,
            hurwitz_rel_tol: DEFAULT_HURWITZ_REL,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HinfNorm {
    pub norm: f64,
    /// Frequency (rad/s, possibly negative) where `norm` is attained.
    pub frequency: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

pub fn hinf_norm(ss: &StateSpace, rel_tol: f64) -> Result<HinfNorm> {
    hinf_norm_with(
        ss,
        &HinfOptions {
            rel_tol,
            ..Default::default()
        },
    )
}

/// Two-phase H-infinity norm.
///
/// A coarse sweep over a log grid (both signs of frequency, plus zero and the
/// imaginary parts of the poles) gives a lower bound. Bisection on the level
/// then uses the fact that `gamma` is a gain of `G(i w)` exactly when the
/// level-set matrix `[[A, BB^H/gamma], [-C^H C/gamma, -A^H]]` has the
/// eigenvalue `i w`. Crossing frequencies found along the way are evaluated to
/// raise the lower bound.
pub fn hinf_norm_with(ss: &StateSpace, opts: &HinfOptions) -> Result<HinfNorm> {
    let poles = eigenvalues(&ss.a)?;
    let abscissa = abscissa_of(&poles);
    if !(abscissa < -hurwitz_tolerance(&ss.a, opts.hurwitz_rel_tol)) {
        return Err(Error::NotHurwitz { abscissa });
    }

    let mut freqs = vec![0.0];
    let steps = opts.grid_points.max(2) - 1;
    let (llo, lhi) = (opts.grid_lo.log10(), opts.grid_hi.log10());
    for k in 0..=steps {
        let w = 10f64.powf(llo + (lhi - llo) * k as f64 / steps as f64);
        freqs.push(w);
        freqs.push(-w);
    }
    for p in &poles {
        freqs.push(p.im);
        freqs.push(-p.im);
    }

    let (mut best, mut best_freq) = peak_of(ss, &freqs);
    if best == 0.0 {
        return Ok(HinfNorm {
            norm: 0.0,
            frequency: 0.0,
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
        });
    }

    let mut lower = best;
    let mut upper = 2.0 * best;
    let mut iterations = 0;

    // Find an upper bound first.
    loop {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::Bracket(format!(
                "no upper bound found below {upper:e} after {iterations} doublings"
            )));
        }
        let Some((v, w)) = confirmed_crossing(ss, upper, opts)? else {
            break;
        };
        if v > best {
            best = v;
            best_freq = w;
        }
        lower = lower.max(upper).max(best);
        upper = 2.0 * lower;
    }

    while upper - lower > opts.rel_tol * lower {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::Bracket(format!(
                "bracket [{lower:e}, {upper:e}] did not close to rel {:e}",
                opts.rel_tol
            )));
        }
        let level = if upper > 2.0 * lower {
            (lower * upper).sqrt()
        } else {
            0.5 * (lower + upper)
        };
        if let Some((v, w)) = confirmed_crossing(ss, level, opts)? {
            if v > best {
                best = v;
                best_freq = w;
            }
            lower = level.max(best);
            if lower > upper {
                // a probe beat the previous upper bound; it was not certified
                upper = lower * (1.0 + opts.rel_tol);
            }
        } else {
            upper = level;
        }
    }

    Ok(HinfNorm {
        norm: lower.max(best),
        frequency: best_freq,
        lower,
        upper,
        iterations,
    })
}

/// Largest gain over `freqs`; ties go to the lower frequency.
fn peak_of(ss: &StateSpace, freqs: &[f64]) -> (f64, f64) {
    freqs
        .par_iter()
        .filter_map(|&w| gain_at(ss, w).map(|g| (g, w)))
        .reduce(|| (f64::NEG_INFINITY, f64::INFINITY), pick_peak)
}

fn pick_peak(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if a.1 <= b.1 {
                a
            } else {
                b
            }
        }
    }
}

/// Candidate crossings of `level`, kept only if the gain evaluated there (or
/// between them) actually reaches `level` to within `rel_tol`. This discards
/// eigenvalues that sit near the axis only because a pole of `A` is lightly
/// damped relative to the threshold.
fn confirmed_crossing(ss: &StateSpace, level: f64, opts: &HinfOptions) -> Result<Option<(f64, f64)>> {
    let crossings = crossing_frequencies(ss, level, opts.imag_axis_rel_tol)?;
    if crossings.is_empty() {
        return Ok(None);
    }
    let (v, w) = probe(ss, &crossings);
    Ok((v >= level * (1.0 - opts.rel_tol)).then_some((v, w)))
}

/// Evaluates the crossings and the midpoints between consecutive ones.
fn probe(ss: &StateSpace, crossings: &[f64]) -> (f64, f64) {
    let mut pts = crossings.to_vec();
    pts.extend(crossings.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    pts.iter()
        .filter_map(|&w| gain_at(ss, w).map(|g| (g, w)))
        .fold((f64::NEG_INFINITY, f64::INFINITY), pick_peak)
}

/// Level-set matrix whose imaginary eigenvalues `i w` are the frequencies
/// where `|G(i w)| = level`.
pub fn level_set_matrix(ss: &StateSpace, level: f64) -> CMatrix {
    let n = ss.order();
    let inv = Complex64::new(1.0 / level, 0.0);
    let bb = &ss.b * ss.b.adjoint() * inv;
    let cc = ss.c.adjoint() * &ss.c * (-inv);
    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    h.view_mut((0, n), (n, n)).copy_from(&bb);
    h.view_mut((n, 0), (n, n)).copy_from(&cc);
    h.view_mut((n, n), (n, n)).copy_from(&(-ss.a.adjoint()));
    h
}

fn crossing_frequencies(ss: &StateSpace, level: f64, rel_tol: f64) -> Result<Vec<f64>> {
    let h = level_set_matrix(ss, level);
    let threshold = rel_tol * max_abs(&h);
    let mut w: Vec<f64> = eigenvalues(&h)?
        .into_iter()
        .filter(|z| z.re.abs() <= threshold)
        .map(|z| z.im)
        .collect();
    w.sort_by(f64::total_cmp);
    w.dedup();
    Ok(w)
}

/// `1e-6` machine epsilons per unit of `max(1, max|F|)`.
pub const DEFAULT_HURWITZ_REL: f64 = 1e-6 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Hurwitz requires abscissa < -hurwitz_rel * max(1, max|F|).
    pub hurwitz_rel: f64,
    pub hinf_rel: f64,
    /// Certified requires `hinf * (1 + margin) < gamma / 2`.
    pub margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hurwitz_rel: DEFAULT_HURWITZ_REL,
            hinf_rel: 1e-9,
            margin: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    /// Sorted by real part, then imaginary part.
    #[serde(rename = "eigenvalues_F", with = "complex_pairs")]
    pub eigenvalues_f: Vec<Complex64>,
    pub spectral_abscissa: f64,
    pub hurwitz: bool,
    /// `None` when `F` is not Hurwitz and the norm is undefined.
    pub hinf_norm: Option<f64>,
    pub hinf_freq: Option<f64>,
    pub gamma_half: f64,
    pub certified: bool,
    pub hurwitz_tol: f64,
    pub hinf_tol: f64,
    #[serde(default)]
    pub margin: f64,
}

mod complex_pairs {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|z| [z.re, z.im]))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

pub fn certify(model: &SystemModel, tols: &Tolerances) -> Result<StabilityCertificate> {
    let ss = StateSpace::from_model(model)?;
    let mut eigs = eigenvalues(&ss.a)?;
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let abscissa = abscissa_of(&eigs);
    let hurwitz_tol = hurwitz_tolerance(&ss.a, tols.hurwitz_rel);
    let hurwitz = abscissa < -hurwitz_tol;
    let gamma_half = model.gamma_half();

    let (hinf_norm, hinf_freq) = if hurwitz {
        let opts = HinfOptions {
            rel_tol: tols.hinf_rel,
            hurwitz_rel_tol: tols.hurwitz_rel,
            ..Default::default()
        };
        let h = hinf_norm_with(&ss, &opts)?;
        (Some(h.norm), Some(h.frequency))
    } else {
        (None, None)
    };
    let certified = hurwitz && hinf_norm.is_some_and(|h| h * (1.0 + tols.margin) < gamma_half);

    Ok(StabilityCertificate {
        eigenvalues_f: eigs,
        spectral_abscissa: abscissa,
        hurwitz,
        hinf_norm,
        hinf_freq,
        gamma_half,
        certified,
        hurwitz_tol,
        hinf_tol: tols.hinf_rel,
        margin: tols.margin,
    })
}
