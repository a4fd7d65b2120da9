//! Parameter sweeps, threshold search and frequency-response tables.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::josephson::build_model;
use crate::linalg::eigenvalues;
use crate::lqsys::{PhysicalParams, SystemModel};
use crate::stability::{certify, transfer_eval, StateSpace, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub kappa2: f64,
    pub hinf_norm: Option<f64>,
    pub hurwitz: bool,
    pub certified: bool,
    /// Set when this row could not be evaluated; the other fields are then
    /// `None`/`false`.
    pub error: Option<String>,
}

fn evaluate(params: &PhysicalParams, tols: &Tolerances) -> Result<(Option<f64>, bool, bool)> {
    let model = build_model(params)?;
    let cert = certify(&model, tols)?;
    Ok((cert.hinf_norm, cert.hurwitz, cert.certified))
}

/// One row per value, in input order, each from `build_model` + `certify`
/// with `kappa1` held at `params.kappa1`.
pub fn sweep_kappa2(params: &PhysicalParams, kappa2_values: &[f64], tols: &Tolerances) -> Vec<SweepRecord> {
    kappa2_values
        .par_iter()
        .map(|&kappa2| match evaluate(&params.with_kappa2(kappa2), tols) {
            Ok((hinf_norm, hurwitz, certified)) => SweepRecord {
                kappa2,
                hinf_norm,
                hurwitz,
                certified,
                error: None,
            },
            Err(e) => SweepRecord {
                kappa2,
                hinf_norm: None,
                hurwitz: false,
                certified: false,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64),
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub kappa2_star: f64,
    /// Largest tested value that is not certified.
    pub below: f64,
    /// Smallest tested value that is certified.
    pub above: f64,
    pub evaluations: usize,
}

/// Number of log-spaced points used to audit monotonicity after bisection.
pub const AUDIT_POINTS: usize = 20;

/// Bisects (geometrically) on the certified predicate in `kappa2`.
///
/// Requires `lo` uncertified and `hi` certified. The predicate is assumed
/// monotone; afterwards it is audited on [`AUDIT_POINTS`] log-spaced points
/// across `[lo, hi]` and any certified point followed by an uncertified one is
/// reported.
pub fn find_threshold(params: &PhysicalParams, lo: f64, hi: f64, rel_tol: f64, tols: &Tolerances) -> Result<Threshold> {
    if !(lo > 0.0 && hi > lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::ThresholdBracket(format!(
            "need 0 < lo < hi, got lo = {lo:e}, hi = {hi:e}"
        )));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rel_tol",
            value: rel_tol,
            reason: "must be positive",
        });
    }
    let certified = |kappa2: f64| evaluate(&params.with_kappa2(kappa2), tols).map(|r| r.2);
    if certified(lo)? {
        return Err(Error::ThresholdBracket(format!(
            "lower end kappa2 = {lo:e} is already certified"
        )));
    }
    if !certified(hi)? {
        return Err(Error::ThresholdBracket(format!(
            "upper end kappa2 = {hi:e} is not certified"
        )));
    }

    let (mut below, mut above) = (lo, hi);
    let mut evaluations = 2;
    while above - below > rel_tol * (below * above).sqrt() {
        let mid = (below * above).sqrt();
        evaluations += 1;
        if certified(mid)? {
            above = mid;
        } else {
            below = mid;
        }
    }

    let audit = log_grid(lo, hi, AUDIT_POINTS);
    let verdicts: Vec<bool> = audit.par_iter().map(|&k| certified(k)).collect::<Result<_>>()?;
    evaluations += audit.len();
    for i in 0..audit.len() {
        for j in i + 1..audit.len() {
            if verdicts[i] && !verdicts[j] {
                return Err(Error::NonMonotone {
                    lower: audit[i],
                    upper: audit[j],
                });
            }
        }
    }
    for (k, v) in audit.iter().zip(&verdicts) {
        if (*k <= below && *v) || (*k >= above && !*v) {
            return Err(Error::NonMonotone {
                lower: below.min(*k),
                upper: above.max(*k),
            });
        }
    }

    Ok(Threshold {
        kappa2_star: (below * above).sqrt(),
        below,
        above,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodeRow {
    pub omega: f64,
    pub magnitude: f64,
    pub phase: f64,
    /// The transfer function could not be evaluated at this frequency.
    pub singular: bool,
}

/// Frequency response on a log grid over `[omega_lo, omega_hi]`, with the
/// imaginary parts of the poles of `F` inside the range added as extra rows.
pub fn bode_csv(model: &SystemModel, omega_lo: f64, omega_hi: f64, n_points: usize) -> Result<Vec<BodeRow>> {
    if !(omega_lo > 0.0 && omega_hi > omega_lo && omega_hi.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "omega range",
            value: omega_lo,
            reason: "need 0 < omega_lo < omega_hi",
        });
    }
    if n_points < 2 {
        return Err(Error::InvalidParameter {
            name: "n_points",
            value: n_points as f64,
            reason: "need at least 2 points",
        });
    }
    let ss = StateSpace::from_model(model)?;
    let mut omegas = log_grid(omega_lo, omega_hi, n_points);
    omegas.extend(
        eigenvalues(&ss.a)?
            .iter()
            .map(|z| z.im.abs())
            .filter(|w| (omega_lo..=omega_hi).contains(w)),
    );
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();

    Ok(omegas
        .into_par_iter()
        .map(|omega| match transfer_eval(&ss, Complex64::new(0.0, omega)) {
            Ok(g) => BodeRow {
                omega,
                magnitude: g.norm(),
                phase: g.arg(),
                singular: false,
            },
            Err(_) => BodeRow {
                omega,
                magnitude: f64::NAN,
                phase: f64::NAN,
                singular: true,
            },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub kappa1: f64,
    pub hinf_norm: Option<f64>,
    pub error: Option<String>,
}

pub fn kappa1_sensitivity(
    params: &PhysicalParams,
    kappa1_values: &[f64],
    kappa2_fixed: f64,
    tols: &Tolerances,
) -> Vec<SensitivityRecord> {
    let base = params.with_kappa2(kappa2_fixed);
    kappa1_values
        .par_iter()
        .map(|&kappa1| match evaluate(&base.with_kappa1(kappa1), tols) {
            Ok((hinf_norm, ..)) => SensitivityRecord {
                kappa1,
                hinf_norm,
                error: None,
            },
            Err(e) => SensitivityRecord {
                kappa1,
                hinf_norm: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Max over min of the defined norms; `None` if fewer than one is defined.
pub fn norm_spread(records: &[SensitivityRecord]) -> Option<f64> {
    let norms: Vec<f64> = records.iter().filter_map(|r| r.hinf_norm).collect();
    let max = norms.iter().cloned().reduce(f64::max)?;
    let min = norms.iter().cloned().reduce(f64::min)?;
    Some(max / min)
}

// CSV output: shortest round-trip floats in exponent form, header first.

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn quoted(s: &Option<String>) -> String {
    s.as_ref()
        .map(|e| format!("\"{}\"", e.replace('"', "\"\"")))
        .unwrap_or_default()
}

pub fn sweep_to_csv(rows: &[SweepRecord]) -> String {
    let mut out = String::from("kappa2,hinf_norm,hurwitz,certified,error\n");
    for r in rows {
        out += &format!(
            "{:e},{},{},{},{}\n",
            r.kappa2,
            opt(r.hinf_norm),
            r.hurwitz,
            r.certified,
            quoted(&r.error)
        );
    }
    out
}

pub fn bode_to_csv(rows: &[BodeRow]) -> String {
    let mut out = String::from("omega,magnitude,phase,singular\n");
    for r in rows {
        out += &format!("{:e},{:e},{:e},{}\n", r.omega, r.magnitude, r.phase, r.singular);
    }
    out
}

pub fn sensitivity_to_csv(rows: &[SensitivityRecord]) -> String {
    let mut out = String::from("kappa1,hinf_norm,error\n");
    for r in rows {
        out += &format!("{:e},{},{}\n", r.kappa1, opt(r.hinf_norm), quoted(&r.error));
    }
    out
}
