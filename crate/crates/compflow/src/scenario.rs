//! Competitive test systems.
//!
//! A [`Scenario`] is a named, parameterized vector field together with the
//! axis-aligned box on which strong competitiveness (hypothesis H1) is
//! asserted and an escape radius beyond which orbits are treated as gone to
//! infinity. Four field kinds are supported:
//!
//! - `linear(A)` — `ẋ = A·x`; competitive when the off-diagonal entries of
//!   `A` are nonpositive, strongly so when they are strictly negative with
//!   an irreducible sign pattern.
//! - `bistable(k)` — `ẋ_i = x_i − x_i³ − k·Σ_{j≠i} x_j`, `0 < k < 1/(n−1)`:
//!   a gradient-like coupled double-well system, strongly competitive on
//!   all of `R^n`.
//! - `lotka_volterra(r, A)` — `ẋ_i = x_i (r_i − Σ_j a_ij x_j)` with
//!   `r_i > 0`, `a_ij > 0`; strongly competitive in the open positive
//!   orthant.
//! - `may_leonard(α, β)` — the symmetric-competition special case:
//!   Lotka–Volterra with `r = (1,1,1)` and circulant interaction rows
//!   `(1, α, β)`.
//!
//! The registry ([`registry`], [`by_name`]) pins the concrete instances the
//! acceptance pipelines run on, including `lv_cycle = may_leonard(0.8, 1.2)`.
//! For that parameter pair `α + β = 2`, so the total population `S = Σ x_i`
//! obeys `dS/dt = S(1 − S)` and the simplex plane `S = 1` is invariant and
//! attracting, carrying a continuum of closed orbits (`x₁x₂x₃` is a first
//! integral there): a three-dimensional competitive system with bounded,
//! nonconvergent interior recurrence.

use crate::error::{Error, Result};
use crate::geom::AxisBox;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Multiplier on the domain diameter for the default escape radius.
const ESCAPE_RADIUS_FACTOR: f64 = 1e3;

/// The vector-field family of a scenario.
#[derive(Debug, Clone)]
pub enum FieldKind {
    /// `ẋ = A·x`.
    Linear { a: DMatrix<f64> },
    /// `ẋ_i = x_i − x_i³ − k·Σ_{j≠i} x_j`.
    Bistable { k: f64 },
    /// `ẋ_i = x_i (r_i − Σ_j a_ij x_j)`.
    LotkaVolterra { r: DVector<f64>, a: DMatrix<f64> },
    /// Lotka–Volterra with `r = (1,1,1)` and circulant rows `(1, α, β)`;
    /// the realized `r`/`A` are stored alongside the parameters.
    MayLeonard { alpha: f64, beta: f64, r: DVector<f64>, a: DMatrix<f64> },
}

/// A named competitive system with its H1 validity domain.
#[derive(Debug, Clone)]
pub struct Scenario {
    name: String,
    dim: usize,
    params: BTreeMap<String, f64>,
    kind: FieldKind,
    valid_domain: AxisBox,
    escape_radius: f64,
}

impl Scenario {
    /// Linear system `ẋ = A·x`. The matrix is validated for shape and
    /// finiteness only; whether it is (strongly) competitive is the job of
    /// the competitiveness check, which must be able to report reducible or
    /// non-competitive inputs rather than have them rejected here.
    pub fn linear(name: &str, a: DMatrix<f64>, valid_domain: AxisBox) -> Result<Self> {
        let n = valid_domain.dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "linear system matrix" });
        }
        Ok(Self::assemble(name, n, BTreeMap::new(), FieldKind::Linear { a }, valid_domain))
    }

    /// Coupled double-well system; requires `0 < k < 1/(n−1)`.
    pub fn bistable(name: &str, n: usize, k: f64, valid_domain: AxisBox) -> Result<Self> {
        if valid_domain.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: valid_domain.dim() });
        }
        if n < 2 || !(k > 0.0 && k < 1.0 / (n as f64 - 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "bistable requires n ≥ 2 and 0 < k < 1/(n−1), got n = {n}, k = {k}"
            )));
        }
        let params = BTreeMap::from([("k".to_string(), k)]);
        Ok(Self::assemble(name, n, params, FieldKind::Bistable { k }, valid_domain))
    }

    /// Competitive Lotka–Volterra; requires `r_i > 0`, `a_ij > 0`, and a
    /// validity domain inside the open positive orthant.
    pub fn lotka_volterra(
        name: &str,
        r: DVector<f64>,
        a: DMatrix<f64>,
        valid_domain: AxisBox,
    ) -> Result<Self> {
        let n = valid_domain.dim();
        Self::validate_lv(&r, &a, &valid_domain)?;
        Ok(Self::assemble(name, n, BTreeMap::new(), FieldKind::LotkaVolterra { r, a }, valid_domain))
    }

    /// Symmetric three-species competition `may_leonard(α, β)`.
    pub fn may_leonard(name: &str, alpha: f64, beta: f64, valid_domain: AxisBox) -> Result<Self> {
        if valid_domain.dim() != 3 {
            return Err(Error::DimensionMismatch { expected: 3, got: valid_domain.dim() });
        }
        let r = DVector::from_element(3, 1.0);
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, alpha, beta, beta, 1.0, alpha, alpha, beta, 1.0],
        );
        Self::validate_lv(&r, &a, &valid_domain)?;
        let params =
            BTreeMap::from([("alpha".to_string(), alpha), ("beta".to_string(), beta)]);
        Ok(Self::assemble(
            name,
            3,
            params,
            FieldKind::MayLeonard { alpha, beta, r, a },
            valid_domain,
        ))
    }

    fn validate_lv(r: &DVector<f64>, a: &DMatrix<f64>, domain: &AxisBox) -> Result<()> {
        let n = domain.dim();
        if r.len() != n || a.nrows() != n || a.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.len().max(a.nrows()) });
        }
        if r.iter().any(|&v| !(v > 0.0)) || a.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument(
                "lotka_volterra requires r_i > 0 and a_ij > 0".into(),
            ));
        }
        if domain.lo().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument(
                "lotka_volterra validity domain must lie in the open positive orthant".into(),
            ));
        }
        Ok(())
    }

    fn assemble(
        name: &str,
        dim: usize,
        params: BTreeMap<String, f64>,
        kind: FieldKind,
        valid_domain: AxisBox,
    ) -> Self {
        let escape_radius = ESCAPE_RADIUS_FACTOR * valid_domain.diameter_euclid();
        Self { name: name.to_string(), dim, params, kind, valid_domain, escape_radius }
    }

    /// Overrides the default escape radius (`1e3 ×` domain diameter).
    pub fn with_escape_radius(mut self, radius: f64) -> Self {
        self.escape_radius = radius;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn valid_domain(&self) -> &AxisBox {
        &self.valid_domain
    }

    pub fn escape_radius(&self) -> f64 {
        self.escape_radius
    }

    /// Vector field value at `x`.
    pub fn eval_field(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "eval_field input" });
        }
        let mut out = DVector::zeros(self.dim);
        self.eval_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Allocation-free field evaluation for the integrator hot path.
    /// Callers guarantee matching lengths.
    pub(crate) fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FieldKind::Linear { a } => {
                for i in 0..self.dim {
                    let mut acc = 0.0;
                    for j in 0..self.dim {
                        acc += a[(i, j)] * x[j];
                    }
                    out[i] = acc;
                }
            }
            FieldKind::Bistable { k } => {
                let sum: f64 = x.iter().sum();
                for i in 0..self.dim {
                    out[i] = x[i] - x[i] * x[i] * x[i] - k * (sum - x[i]);
                }
            }
            FieldKind::LotkaVolterra { r, a } | FieldKind::MayLeonard { r, a, .. } => {
                for i in 0..self.dim {
                    let mut acc = 0.0;
                    for j in 0..self.dim {
                        acc += a[(i, j)] * x[j];
                    }
                    out[i] = x[i] * (r[i] - acc);
                }
            }
        }
    }

    /// Analytic Jacobian of the field at `x`.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let n = self.dim;
        Ok(match &self.kind {
            FieldKind::Linear { a } => a.clone(),
            FieldKind::Bistable { k } => {
                let mut j = DMatrix::from_element(n, n, -k);
                for i in 0..n {
                    j[(i, i)] = 1.0 - 3.0 * x[i] * x[i];
                }
                j
            }
            FieldKind::LotkaVolterra { r, a } | FieldKind::MayLeonard { r, a, .. } => {
                let mut j = DMatrix::zeros(n, n);
                for i in 0..n {
                    let row_sum: f64 = (0..n).map(|l| a[(i, l)] * x[l]).sum();
                    for l in 0..n {
                        j[(i, l)] = if i == l {
                            r[i] - row_sum - x[i] * a[(i, i)]
                        } else {
                            -x[i] * a[(i, l)]
                        };
                    }
                }
                j
            }
        })
    }
}

/// The built-in scenarios exercised by the audits and the `verify` pipeline.
///
/// - `linear2` — stable irreducible 2D linear system, `A = [[−1,−0.5],[−0.5,−1]]`.
/// - `bistable2` / `bistable3` — coupled double wells, `k = 0.1`.
/// - `lv2` — 2D Lotka–Volterra with interior coexistence at `(2/3, 2/3)`.
/// - `ml_sym` — `may_leonard(0.5, 0.5)`: globally attracting interior
///   equilibrium `(1/2, 1/2, 1/2)`.
/// - `lv_cycle` — `may_leonard(0.8, 1.2)`: continuum of closed orbits on the
///   invariant plane `Σx = 1` (see module docs).
pub fn registry() -> Vec<Scenario> {
    let linear2 = Scenario::linear(
        "linear2",
        DMatrix::from_row_slice(2, 2, &[-1.0, -0.5, -0.5, -1.0]),
        AxisBox::cube(2, -1.0, 1.0).expect("static domain"),
    )
    .expect("static scenario");
    let bistable2 = Scenario::bistable(
        "bistable2",
        2,
        0.1,
        AxisBox::cube(2, -1.5, 1.5).expect("static domain"),
    )
    .expect("static scenario");
    let bistable3 = Scenario::bistable(
        "bistable3",
        3,
        0.1,
        AxisBox::cube(3, -1.5, 1.5).expect("static domain"),
    )
    .expect("static scenario");
    let lv2 = Scenario::lotka_volterra(
        "lv2",
        DVector::from_element(2, 1.0),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        AxisBox::cube(2, 0.05, 1.4).expect("static domain"),
    )
    .expect("static scenario");
    let ml_sym = Scenario::may_leonard(
        "ml_sym",
        0.5,
        0.5,
        AxisBox::cube(3, 0.05, 1.5).expect("static domain"),
    )
    .expect("static scenario");
    let lv_cycle = Scenario::may_leonard(
        "lv_cycle",
        0.8,
        1.2,
        AxisBox::cube(3, 0.02, 1.3).expect("static domain"),
    )
    .expect("static scenario");
    vec![linear2, bistable2, bistable3, lv2, ml_sym, lv_cycle]
}

/// Looks up a built-in scenario by name.
pub fn by_name(name: &str) -> Option<Scenario> {
    registry().into_iter().find(|s| s.name() == name)
}
