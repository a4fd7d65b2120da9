//! Mean dynamics `d<v>/dt = F <v>` of the nominal linear system and a fitted
//! exponential envelope `|v(t)|^2 <= c1 exp(-c2 t) |v(0)|^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, eigenvector, max_abs, CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CVector>,
}

impl Trajectory {
    pub fn norm_sq(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|v| v.norm_squared())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Default step and horizon: resolve the fastest entry of `f` and cover ten
/// time constants of the slowest mode.
pub fn default_time_scales(f: &CMatrix, spectral_abscissa: f64) -> (f64, f64) {
    let dt = 0.05 / max_abs(f).max(f64::MIN_POSITIVE);
    let t_end = 10.0 / spectral_abscissa.abs().max(f64::MIN_POSITIVE);
    (dt, t_end)
}

/// Classic fourth-order Runge-Kutta, sampled every step, starting at `t = 0`.
pub fn integrate_mean(f: &CMatrix, v0: &CVector, t_end: f64, dt: f64) -> Result<Trajectory> {
    if f.nrows() != f.ncols() || v0.nrows() != f.nrows() {
        return Err(Error::Dimension {
            what: "initial state",
            expected_rows: f.nrows(),
            expected_cols: 1,
            rows: v0.nrows(),
            cols: 1,
        });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "must be positive",
        });
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_end",
            value: t_end,
            reason: "must be at least dt",
        });
    }
    let scale = max_abs(f);
    if dt * scale > 0.1 {
        return Err(Error::StepSize {
            product: dt * scale,
            suggested: 0.05 / scale,
        });
    }

    let steps = (t_end / dt).round() as usize;
    let h = Complex64::new(dt, 0.0);
    let half = Complex64::new(0.5 * dt, 0.0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut v = v0.clone();
    times.push(0.0);
    states.push(v.clone());
    for k in 1..=steps {
        let k1 = f * &v;
        let k2 = f * (&v + &k1 * half);
        let k3 = f * (&v + &k2 * half);
        let k4 = f * (&v + &k3 * h);
        v += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
        times.push(k as f64 * dt);
        states.push(v.clone());
    }
    Ok(Trajectory { times, states })
}

/// Unit eigenvector of the eigenvalue with the largest real part.
pub fn slow_mode(f: &CMatrix) -> Result<(Complex64, CVector)> {
    let eigs = eigenvalues(f)?;
    let lambda = eigs
        .into_iter()
        .max_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)))
        .ok_or(Error::Trajectory("empty state matrix".into()))?;
    Ok((lambda, eigenvector(f, lambda)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub c1: f64,
    /// Decay rate of the squared norm; negative means growth.
    pub c2: f64,
    /// RMS residual of the log-linear fit.
    pub fit_residual: f64,
    pub t_window: [f64; 2],
    /// Smallest amplitude for which the fitted rate bounds every sample in
    /// the window.
    pub envelope_c1: f64,
    pub samples_used: usize,
}

impl DecayEstimate {
    pub fn is_decaying(&self) -> bool {
        self.c2 > 0.0
    }
}

/// Samples whose squared norm drops below this fraction of the peak are
/// treated as round-off and excluded from the fit.
pub const NUMERICAL_FLOOR: f64 = 1e-24;

/// Least-squares line through `ln |v(t)|^2` over the samples above the
/// numerical floor. The window ends at the first sample below it.
pub fn estimate_decay(traj: &Trajectory) -> Result<DecayEstimate> {
    if traj.len() < 10 {
        return Err(Error::Trajectory(format!(
            "need at least 10 samples, got {}",
            traj.len()
        )));
    }
    let norms: Vec<f64> = traj.norm_sq().collect();
    let initial = norms[0];
    let peak = norms.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) || !(initial > 0.0) {
        return Err(Error::Trajectory("trajectory is identically zero at the start".into()));
    }
    let floor = peak * NUMERICAL_FLOOR;
    let end = norms.iter().position(|&n| !(n > floor)).unwrap_or(norms.len());
    if end < 10 {
        return Err(Error::Trajectory(format!(
            "only {end} samples above the numerical floor"
        )));
    }

    let t = &traj.times[..end];
    let y: Vec<f64> = norms[..end].iter().map(|n| n.ln()).collect();
    let count = end as f64;
    let t_mean = t.iter().sum::<f64>() / count;
    let y_mean = y.iter().sum::<f64>() / count;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(&y) {
        sxy += (ti - t_mean) * (yi - y_mean);
        sxx += (ti - t_mean) * (ti - t_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let rss: f64 = t
        .iter()
        .zip(&y)
        .map(|(ti, yi)| (yi - intercept - slope * ti).powi(2))
        .sum();

    let c2 = -slope;
    let envelope_c1 = norms[..end]
        .iter()
        .zip(t)
        .map(|(n, ti)| n * (c2 * ti).exp() / initial)
        .fold(0.0, f64::max);

    Ok(DecayEstimate {
        c1: intercept.exp() / initial,
        c2,
        fit_residual: (rss / count).sqrt(),
        t_window: [t[0], t[end - 1]],
        envelope_c1,
        samples_used: end,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn scalar_exponential() {
        let f = -CMatrix::identity(3, 3);
        let v0 = CVector::from_vec(vec![c(1.0), c(0.0), c(0.0)]);
        let traj = integrate_mean(&f, &v0, 5.0, 0.01).unwrap();
        for (t, v) in traj.times.iter().zip(&traj.states) {
            let want = (-t).exp();
            assert!((v.norm() - want).abs() <= 1e-6 * want);
        }
        let est = estimate_decay(&traj).unwrap();
        assert!((est.c2 - 2.0).abs() < 1e-6);
        assert!((est.c1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_matrix_keeps_state() {
        let f = CMatrix::zeros(2, 2);
        let v0 = CVector::from_vec(vec![c(0.3), Complex64::new(0.0, -2.0)]);
        let traj = integrate_mean(&f, &v0, 1.0, 0.1).unwrap();
        assert!(traj.states.iter().all(|v| *v == v0));
    }

    #[test]
    fn growth_is_flagged() {
        let f = CMatrix::identity(1, 1);
        let traj = integrate_mean(&f, &CVector::from_element(1, c(1.0)), 2.0, 0.01).unwrap();
        let est = estimate_decay(&traj).unwrap();
        assert!(!est.is_decaying());
        assert!((est.c2 + 2.0).abs() < 1e-6);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let f = -CMatrix::identity(2, 2) * c(100.0);
        let err = integrate_mean(&f, &CVector::from_element(2, c(1.0)), 1.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::StepSize { suggested, .. } if (suggested - 5e-4).abs() < 1e-15));
    }

    #[test]
    fn all_zero_trajectory_is_an_error() {
        let f = -CMatrix::identity(1, 1);
        let traj = integrate_mean(&f, &CVector::zeros(1), 1.0, 0.01).unwrap();
        assert!(estimate_decay(&traj).is_err());
    }

    #[test]
    fn exact_zero_truncates_window() {
        let times: Vec<f64> = (0..30).map(|k| k as f64 * 0.1).collect();
        let states: Vec<CVector> = times
            .iter()
            .enumerate()
            .map(|(k, t)| CVector::from_element(1, c(if k < 20 { (-t).exp() } else { 0.0 })))
            .collect();
        let est = estimate_decay(&Trajectory { times, states }).unwrap();
        assert_eq!(est.samples_used, 20);
        assert!((est.c2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn short_trajectory_is_rejected() {
        let traj = Trajectory {
            times: vec![0.0; 5],
            states: vec![CVector::from_element(1, c(1.0)); 5],
        };
        assert!(estimate_decay(&traj).is_err());
    }
}
