//! Linear quantum system models.
//!
//! Operator vectors are stacked as `[a_1, .., a_n, a_1*, .., a_n*]`, so every
//! 2n x 2n matrix here has an upper (annihilator) and lower (creator) block
//! row of height n.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix};

/// Default structural tolerance, relative to the largest entry of each matrix.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-9;

/// Physical constants of the junction/cavity system.
///
/// `josephson_rate` is the Josephson energy already divided by hbar (rad/s),
/// while `charging_energy` stays in joules and is divided by `hbar` where it
/// enters the Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Cavity angular frequency, rad/s.
    pub omega: f64,
    /// Junction/cavity coupling, dimensionless.
    pub g: f64,
    /// Charging energy, J.
    #[serde(rename = "U")]
    pub charging_energy: f64,
    /// hbar-normalized Josephson energy, rad/s.
    #[serde(rename = "Jp")]
    pub josephson_rate: f64,
    /// Gate-voltage offset; only enters dropped constant terms.
    #[serde(default)]
    pub nbar: f64,
    /// Cavity field coupling rate, 1/s.
    pub kappa1: f64,
    /// Junction field coupling rate, 1/s.
    pub kappa2: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
}

impl Default for PhysicalParams {
    /// 100 GHz cavity with the reference junction constants, kappa1 = 1e11
    /// and kappa2 = 2.5e12.
    fn default() -> Self {
        Self {
            omega: 2.0 * std::f64::consts::PI * 1e11,
            g: 0.15,
            charging_energy: 2.2087e-22,
            josephson_rate: 3.6652e11,
            nbar: 0.0,
            kappa1: 1e11,
            kappa2: 2.5e12,
            hbar: 1.0546e-34,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("omega", self.omega),
            ("g", self.g),
            ("U", self.charging_energy),
            ("Jp", self.josephson_rate),
            ("nbar", self.nbar),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("hbar", self.hbar),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        let positive = [("omega", self.omega), ("Jp", self.josephson_rate), ("hbar", self.hbar)];
        for (name, value) in positive {
            if value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be positive",
                });
            }
        }
        for (name, value) in [("kappa1", self.kappa1), ("kappa2", self.kappa2)] {
            if value < 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    reason: "must be nonnegative",
                });
            }
        }
        Ok(())
    }

    pub fn with_kappa2(self, kappa2: f64) -> Self {
        Self { kappa2, ..self }
    }

    pub fn with_kappa1(self, kappa1: f64) -> Self {
        Self { kappa1, ..self }
    }
}

/// A nominal linear quantum system together with the sector data of its
/// perturbation.
///
/// `m` is the Hamiltonian matrix, `n` the doubled-up coupling matrix and
/// `etilde` the 1 x 2n row defining the scalar operator the perturbation
/// acts through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelRepr", into = "ModelRepr")]
pub struct SystemModel {
    n_modes: usize,
    m: CMatrix,
    n: CMatrix,
    etilde: CMatrix,
    pub gamma: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl SystemModel {
    /// Checks only dimensions; structure is checked by [`validate_model`].
    pub fn new(
        n_modes: usize,
        m: CMatrix,
        n: CMatrix,
        etilde: CMatrix,
        gamma: f64,
        delta1: f64,
        delta2: f64,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidParameter {
                name: "n_modes",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let d = 2 * n_modes;
        check_shape("M", &m, d, d)?;
        check_shape("N", &n, d, d)?;
        check_shape("Etilde", &etilde, 1, d)?;
        Ok(Self {
            n_modes,
            m,
            n,
            etilde,
            gamma,
            delta1,
            delta2,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// State dimension 2n.
    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn m(&self) -> &CMatrix {
        &self.m
    }

    pub fn n(&self) -> &CMatrix {
        &self.n
    }

    pub fn etilde(&self) -> &CMatrix {
        &self.etilde
    }

    pub fn gamma_half(&self) -> f64 {
        self.gamma / 2.0
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Json(e.to_string()))
    }
}

fn check_shape(what: &'static str, a: &CMatrix, rows: usize, cols: usize) -> Result<()> {
    if a.nrows() != rows || a.ncols() != cols {
        return Err(Error::Dimension {
            what,
            expected_rows: rows,
            expected_cols: cols,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

/// On-disk form: complex matrices as row-major nested `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
struct ModelRepr {
    n_modes: usize,
    #[serde(rename = "M")]
    m: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "N")]
    n: Vec<Vec<[f64; 2]>>,
    #[serde(rename = "Etilde")]
    etilde: Vec<Vec<[f64; 2]>>,
    gamma: f64,
    delta1: f64,
    delta2: f64,
}

fn to_nested(a: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

fn from_nested(what: &str, rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMatrix, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("{what}: ragged rows"));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
        let [re, im] = rows[i][j];
        Complex64::new(re, im)
    }))
}

impl From<SystemModel> for ModelRepr {
    fn from(model: SystemModel) -> Self {
        Self {
            n_modes: model.n_modes,
            m: to_nested(&model.m),
            n: to_nested(&model.n),
            etilde: to_nested(&model.etilde),
            gamma: model.gamma,
            delta1: model.delta1,
            delta2: model.delta2,
        }
    }
}

impl TryFrom<ModelRepr> for SystemModel {
    type Error = String;

    fn try_from(repr: ModelRepr) -> std::result::Result<Self, String> {
        SystemModel::new(
            repr.n_modes,
            from_nested("M", &repr.m)?,
            from_nested("N", &repr.n)?,
            from_nested("Etilde", &repr.etilde)?,
            repr.gamma,
            repr.delta1,
            repr.delta2,
        )
        .map_err(|e| e.to_string())
    }
}

/// One failed structural invariant, located at its worst entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub invariant: &'static str,
    pub row: usize,
    pub col: usize,
    pub deviation: f64,
}

/// Checks the block structure of `model` and the signs of its sector
/// constants. Returns every violated invariant; an empty list means the model
/// is well formed to within `tol` (relative to each matrix's largest entry).
pub fn validate_model(model: &SystemModel, tol: f64) -> Result<Vec<Violation>> {
    let d = model.dim();
    check_shape("M", &model.m, d, d)?;
    check_shape("N", &model.n, d, d)?;
    check_shape("Etilde", &model.etilde, 1, d)?;

    let nm = model.n_modes;
    let mut out = Vec::new();

    for (what, a) in [("M", &model.m), ("N", &model.n), ("Etilde", &model.etilde)] {
        if let Some((row, col)) = first_non_finite(a) {
            out.push(Violation {
                invariant: match what {
                    "M" => "M finite",
                    "N" => "N finite",
                    _ => "Etilde finite",
                },
                row,
                col,
                deviation: f64::INFINITY,
            });
        }
    }
    if !out.is_empty() {
        return Ok(out);
    }

    let m_limit = tol * max_abs(&model.m);
    let n_limit = tol * max_abs(&model.n);

    // M1 Hermitian: M[i][j] = conj(M[j][i]) on the upper-left block.
    let m1 = worst(nm, nm, |i, j| (model.m[(i, j)] - model.m[(j, i)].conj()).norm());
    push_if(&mut out, "M1 Hermitian", m1, m_limit);
    // M2 symmetric: M[i][n+j] = M[j][n+i].
    let m2 =
        worst(nm, nm, |i, j| (model.m[(i, nm + j)] - model.m[(j, nm + i)]).norm()).map(|(i, j, dev)| (i, nm + j, dev));
    push_if(&mut out, "M2 transpose-symmetry", m2, m_limit);
    let m_lower = worst(nm, d, |i, j| lower_row_mismatch(&model.m, nm, i, j)).map(|(i, j, dev)| (nm + i, j, dev));
    push_if(&mut out, "M lower block row", m_lower, m_limit);
    let n_lower = worst(nm, d, |i, j| lower_row_mismatch(&model.n, nm, i, j)).map(|(i, j, dev)| (nm + i, j, dev));
    push_if(&mut out, "N lower block row", n_lower, n_limit);

    // Hermiticity of the whole of M follows from the three block checks, so
    // it is only reported on its own when those pass.
    if out.is_empty() {
        let herm = worst(d, d, |i, j| (model.m[(i, j)] - model.m[(j, i)].conj()).norm());
        push_if(&mut out, "M Hermitian", herm, m_limit);
    }

    if !(model.gamma > 0.0) {
        out.push(scalar_violation("gamma positive", model.gamma));
    }
    if !(model.delta1 >= 0.0) {
        out.push(scalar_violation("delta1 nonnegative", model.delta1));
    }
    if !(model.delta2 >= 0.0) {
        out.push(scalar_violation("delta2 nonnegative", model.delta2));
    }
    Ok(out)
}

fn first_non_finite(a: &CMatrix) -> Option<(usize, usize)> {
    (0..a.nrows())
        .flat_map(|i| (0..a.ncols()).map(move |j| (i, j)))
        .find(|&(i, j)| !(a[(i, j)].re.is_finite() && a[(i, j)].im.is_finite()))
}

/// Bottom row block must equal the conjugate of the top row block with its
/// two column blocks swapped.
fn lower_row_mismatch(a: &CMatrix, nm: usize, i: usize, j: usize) -> f64 {
    let swapped = if j < nm { j + nm } else { j - nm };
    (a[(nm + i, j)] - a[(i, swapped)].conj()).norm()
}

fn worst(rows: usize, cols: usize, dev: impl Fn(usize, usize) -> f64) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..rows {
        for j in 0..cols {
            let e = dev(i, j);
            if best.is_none_or(|(_, _, b)| e > b) {
                best = Some((i, j, e));
            }
        }
    }
    best
}

fn push_if(out: &mut Vec<Violation>, invariant: &'static str, found: Option<(usize, usize, f64)>, limit: f64) {
    if let Some((row, col, deviation)) = found {
        if deviation > limit {
            out.push(Violation {
                invariant,
                row,
                col,
                deviation,
            });
        }
    }
}

fn scalar_violation(invariant: &'static str, value: f64) -> Violation {
    Violation {
        invariant,
        row: 0,
        col: 0,
        deviation: value,
    }
}

/// `diag(I_n, -I_n)`.
pub fn j_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i < n {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        }
    })
}

/// `[[0, I_n], [I_n, 0]]`.
pub fn sigma_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if j == (i + n) % (2 * n) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
