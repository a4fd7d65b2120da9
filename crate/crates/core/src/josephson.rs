//! Josephson junction in a resonant cavity.
//!
//! After completing squares the nominal Hamiltonian is a quadratic form in the
//! quadratures `(q', p'', n'', phi')`. The ladder operators
//!
//! ```text
//! a1 = (omega q' + i p'') / sqrt(2 hbar omega),   a2 = (phi' + i n'') / sqrt(2)
//! ```
//!
//! turn it into `1/2 [a; a#]^dagger M [a; a#]`. The cosine term is the
//! perturbation, acting through `zeta = a2 / sqrt(2)`.

use nalgebra::Matrix4;
use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::linalg::{conj, CMatrix};
use crate::lqsys::{sigma_matrix, PhysicalParams, SystemModel};

pub const N_MODES: usize = 2;

/// Real symmetric form over the quadrature vector `(q', p'', n'', phi')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm {
    pub a: Matrix4<f64>,
}

impl QuadraticForm {
    /// `1/2 x^T A x`.
    pub fn energy(&self, x: &[f64; 4]) -> f64 {
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                acc += x[i] * self.a[(i, j)] * x[j];
            }
        }
        0.5 * acc
    }
}

/// The completed-square form. `U' = U + hbar omega g^2`, so the charge
/// entry is `U/hbar + omega g^2`.
pub fn quadratic_form_matrix(params: &PhysicalParams) -> Result<QuadraticForm> {
    params.validate()?;
    let PhysicalParams {
        omega,
        g,
        charging_energy,
        hbar,
        ..
    } = *params;

    let qq = omega * omega / hbar;
    let pp = 1.0 / hbar;
    let pn = -g * (omega / hbar).sqrt();
    let nn = charging_energy / hbar + omega * g * g;

    let entries = [(0, 0, qq), (1, 1, pp), (1, 2, pn), (2, 2, nn)];
    for &(row, col, value) in &entries {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "quadratic form",
                row,
                col,
            });
        }
    }
    let mut a = Matrix4::zeros();
    for (row, col, value) in entries {
        a[(row, col)] = value;
        a[(col, row)] = value;
    }
    Ok(QuadraticForm { a })
}

/// Quadratures in terms of `[a1, a2, a1*, a2*]`: `x = T [a; a#]`.
pub fn quadrature_map(params: &PhysicalParams) -> CMatrix {
    let cq = (params.hbar / (2.0 * params.omega)).sqrt();
    let cp = (params.hbar * params.omega / 2.0).sqrt();
    let r = FRAC_1_SQRT_2;
    let re = |x: f64| Complex64::new(x, 0.0);
    let im = |x: f64| Complex64::new(0.0, x);
    let z = re(0.0);
    CMatrix::from_row_slice(
        4,
        4,
        &[
            re(cq),
            z,
            re(cq),
            z, // q'
            im(-cp),
            z,
            im(cp),
            z, // p''
            z,
            im(-r),
            z,
            im(r), // n''
            z,
            re(r),
            z,
            re(r), // phi'
        ],
    )
}

/// Rewrites the quadrature form in ladder variables and projects the result
/// onto the `[[M1, M2], [M2#, M1#]]` structure.
pub fn ladder_transform(form: &QuadraticForm, params: &PhysicalParams) -> Result<CMatrix> {
    for i in 0..4 {
        for j in 0..i {
            if form.a[(i, j)] != form.a[(j, i)] {
                return Err(Error::InvalidParameter {
                    name: "quadratic form",
                    value: form.a[(i, j)] - form.a[(j, i)],
                    reason: "matrix must be symmetric",
                });
            }
        }
    }
    let t = quadrature_map(params);
    let a = CMatrix::from_fn(4, 4, |i, j| Complex64::new(form.a[(i, j)], 0.0));
    let raw = t.adjoint() * a * &t;

    // Rounding leaves the product only approximately Hermitian and
    // block-structured; average over both symmetries.
    let hermitian = (&raw + raw.adjoint()) * Complex64::new(0.5, 0.0);
    let sigma = sigma_matrix(N_MODES);
    let mirrored = &sigma * conj(&hermitian) * &sigma;
    Ok((hermitian + mirrored) * Complex64::new(0.5, 0.0))
}

/// `N = diag(sqrt(kappa1), sqrt(kappa2), sqrt(kappa1), sqrt(kappa2))`.
pub fn build_coupling(kappa1: f64, kappa2: f64) -> Result<CMatrix> {
    for (name, value) in [("kappa1", kappa1), ("kappa2", kappa2)] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter {
                name,
                value,
                reason: "coupling rate must be finite and nonnegative",
            });
        }
    }
    let d = [kappa1.sqrt(), kappa2.sqrt(), kappa1.sqrt(), kappa2.sqrt()];
    Ok(CMatrix::from_fn(4, 4, |i, j| {
        if i == j {
            Complex64::new(d[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

/// `zeta = a2 / sqrt(2)` as a row over `[a1, a2, a1*, a2*]`.
pub fn build_zeta() -> CMatrix {
    let mut e = CMatrix::zeros(1, 4);
    e[(0, 1)] = Complex64::new(FRAC_1_SQRT_2, 0.0);
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorConstants {
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
}

/// For `f = -Jp cos(zeta + zeta*)`: `|f'|^2 <= 4 Jp^2 |zeta|^2`, so
/// `gamma = 1 / (2 Jp)` with no slack, and `|f''|^2 <= Jp^2`.
pub fn sector_constants(params: &PhysicalParams) -> Result<SectorConstants> {
    let jp = params.josephson_rate;
    if !(jp > 0.0) || !jp.is_finite() {
        return Err(Error::InvalidParameter {
            name: "Jp",
            value: jp,
            reason: "must be positive and finite",
        });
    }
    Ok(SectorConstants {
        gamma: 1.0 / (2.0 * jp),
        delta1: 0.0,
        delta2: jp * jp,
    })
}

pub fn build_model(params: &PhysicalParams) -> Result<SystemModel> {
    params.validate()?;
    let form = quadratic_form_matrix(params)?;
    let m = ladder_transform(&form, params)?;
    let n = build_coupling(params.kappa1, params.kappa2)?;
    let sector = sector_constants(params)?;
    SystemModel::new(N_MODES, m, n, build_zeta(), sector.gamma, sector.delta1, sector.delta2)
}
