//! Continuous-time LQR synthesis and the velocity-bracket gain schedule.
//!
//! The Riccati equation `AᵀP + PA − PBR⁻¹BᵀP + Q = 0` is solved by
//! Newton–Kleinman iteration. The starting gain comes from Bass's shifted
//! Lyapunov construction, so no eigen-decomposition of the Hamiltonian is
//! needed. Every solution is residual-checked and its closed loop must be
//! Hurwitz.

use nalgebra::{DMatrix, RowVector4};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::vehicle::{error_dynamics_matrices, ModelError, VehicleParams, VX_MIN};

const MAX_NEWTON_ITERATIONS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqrError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("system is not stabilizable: {0}")]
    NotStabilizable(String),
    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid bracket schedule: {0}")]
    Schedule(String),
    #[error("synthesis failed for bracket {index} [{v_low}, {v_high}): {source}")]
    Bracket {
        index: usize,
        v_low: f64,
        v_high: f64,
        source: Box<LqrError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Solves `FᵀX + XF + Q = 0` through its Kronecker form.
pub fn solve_lyapunov(f: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LqrError> {
    let n = f.nrows();
    if f.ncols() != n || q.shape() != (n, n) {
        return Err(LqrError::Dimension(format!(
            "Lyapunov operands {:?} and {:?}",
            f.shape(),
            q.shape()
        )));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let ft = f.transpose();
    // vec(FᵀX) = (I ⊗ Fᵀ) vec X, vec(XF) = (Fᵀ ⊗ I) vec X
    let op = eye.kronecker(&ft) + ft.kronecker(&eye);
    let rhs = DMatrix::from_iterator(n * n, 1, q.iter().map(|v| -v));
    let sol = op.lu().solve(&rhs).ok_or_else(|| {
        LqrError::NotStabilizable("Lyapunov operator is singular".into())
    })?;
    let x = DMatrix::from_iterator(n, n, sol.iter().copied());
    Ok(symmetrize(&x))
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    m.clone_owned()
        .complex_eigenvalues()
        .iter()
        .all(|l| l.re < 0.0)
}

/// Frobenius norm of `AᵀP + PA − PBR⁻¹BᵀP + Q`.
pub fn care_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let Some(r_inv) = r.clone_owned().try_inverse() else {
        return f64::INFINITY;
    };
    (a.transpose() * p + p * a - p * b * r_inv * b.transpose() * p + q).norm()
}

fn check_care_inputs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LqrError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(LqrError::Dimension(format!(
            "A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let all = a.iter().chain(b.iter()).chain(q.iter()).chain(r.iter());
    if !all.into_iter().all(|v| v.is_finite()) {
        return Err(LqrError::Dimension("non-finite entries".into()));
    }
    if (q - q.transpose()).norm() > 1e-12 * (1.0 + q.norm()) {
        return Err(LqrError::InvalidWeights("Q is not symmetric".into()));
    }
    if q.clone_owned().symmetric_eigenvalues().iter().any(|&l| l < -1e-12 * (1.0 + q.norm())) {
        return Err(LqrError::InvalidWeights("Q is not positive semidefinite".into()));
    }
    if (r - r.transpose()).norm() > 1e-12 * (1.0 + r.norm()) {
        return Err(LqrError::InvalidWeights("R is not symmetric".into()));
    }
    let chol = r
        .clone_owned()
        .cholesky()
        .ok_or_else(|| LqrError::InvalidWeights("R is not positive definite".into()))?;
    Ok(chol.inverse())
}

/// A stabilizing feedback `K0` (closed loop `A − B·K0` Hurwitz).
///
/// Zero when `A` is already Hurwitz; otherwise Bass's construction: with
/// `β > max Re λ(A)`, solve `(A+βI)Z + Z(A+βI)ᵀ = 2BR⁻¹Bᵀ` and take
/// `K0 = R⁻¹BᵀZ⁻¹`, which places the closed loop in `Re λ < −β`.
fn initial_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LqrError> {
    let n = a.nrows();
    if is_hurwitz(a) {
        return Ok(DMatrix::zeros(b.ncols(), n));
    }
    let s = b * r_inv * b.transpose();
    let beta = a.norm() + 1.0;
    let shifted = a + DMatrix::identity(n, n) * beta;
    let z = solve_lyapunov(&shifted.transpose(), &(-2.0 * &s))?;
    let z_inv = z
        .clone_owned()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| {
            LqrError::NotStabilizable("(A, B) has an uncontrollable unstable mode".into())
        })?;
    let k0 = r_inv * b.transpose() * z_inv;
    if !is_hurwitz(&(a - b * &k0)) {
        return Err(LqrError::NotStabilizable(
            "no stabilizing initial gain found".into(),
        ));
    }
    Ok(k0)
}

/// Stabilizing solution `P` of the continuous algebraic Riccati equation.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LqrError> {
    let r_inv = check_care_inputs(a, b, q, r)?;
    let mut k = initial_gain(a, b, &r_inv)?;
    let mut p_prev: Option<DMatrix<f64>> = None;

    for _ in 0..MAX_NEWTON_ITERATIONS {
        let closed = a - b * &k;
        let p = solve_lyapunov(&closed, &(q + k.transpose() * r * &k))?;
        k = &r_inv * b.transpose() * &p;
        let step = p_prev.as_ref().map_or(f64::INFINITY, |prev| (&p - prev).norm());
        let converged = step <= 1e-13 * (1.0 + p.norm());
        p_prev = Some(p);
        if converged {
            break;
        }
    }
    let p = p_prev.expect("at least one iteration");
    let residual = care_residual(a, b, q, r, &p);
    if !(residual < 1e-8 * (1.0 + p.norm())) {
        return Err(LqrError::NoConvergence {
            iterations: MAX_NEWTON_ITERATIONS,
            residual,
        });
    }
    if !is_hurwitz(&(a - b * &r_inv * b.transpose() * &p)) {
        return Err(LqrError::NotStabilizable(
            "Riccati solution does not stabilize the closed loop".into(),
        ));
    }
    Ok(p)
}

/// `K = R⁻¹BᵀP`; the control law is `u = −K·x`.
pub fn lqr_gain(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LqrError> {
    let p = solve_care(a, b, q, r)?;
    let r_inv = r.clone_owned().try_inverse().expect("checked positive definite");
    Ok(r_inv * b.transpose() * p)
}

/// Diagonal state weights on `(e1, ė1, e2, ė2)` and the scalar steering weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSet {
    pub q_diag: [f64; 4],
    pub r: f64,
}

impl WeightSet {
    pub fn validate(&self) -> Result<(), LqrError> {
        if self.q_diag.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return Err(LqrError::InvalidWeights(format!(
                "q_diag {:?} must be finite and non-negative",
                self.q_diag
            )));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(LqrError::InvalidWeights(format!("r = {} must be positive", self.r)));
        }
        Ok(())
    }
}

fn deserialize_bound<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Bound {
        Number(f64),
        Text(String),
    }
    match Bound::deserialize(d)? {
        Bound::Number(v) => Ok(v),
        Bound::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
        Bound::Text(t) => Err(serde::de::Error::custom(format!(
            "expected a number or \"inf\", got {t:?}"
        ))),
    }
}

fn serialize_bound<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

/// Speed interval `[v_low, v_high)` with its LQR weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "BracketRepr", into = "BracketRepr")]
pub struct VelocityBracket {
    pub v_low: f64,
    pub v_high: f64,
    pub weights: WeightSet,
}

/// Flat on-disk form of a bracket.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketRepr {
    v_low: f64,
    #[serde(deserialize_with = "deserialize_bound", serialize_with = "serialize_bound")]
    v_high: f64,
    q_diag: [f64; 4],
    r: f64,
}

impl From<BracketRepr> for VelocityBracket {
    fn from(b: BracketRepr) -> Self {
        Self::new(b.v_low, b.v_high, b.q_diag, b.r)
    }
}

impl From<VelocityBracket> for BracketRepr {
    fn from(b: VelocityBracket) -> Self {
        Self {
            v_low: b.v_low,
            v_high: b.v_high,
            q_diag: b.weights.q_diag,
            r: b.weights.r,
        }
    }
}

impl VelocityBracket {
    pub fn new(v_low: f64, v_high: f64, q_diag: [f64; 4], r: f64) -> Self {
        Self {
            v_low,
            v_high,
            weights: WeightSet { q_diag, r },
        }
    }

    /// Midpoint, or the lower bound for an unbounded bracket, never below
    /// [`VX_MIN`].
    pub fn synth_velocity(&self) -> f64 {
        let v = if self.v_high.is_infinite() {
            self.v_low
        } else {
            0.5 * (self.v_low + self.v_high)
        };
        v.max(VX_MIN)
    }

    pub fn contains(&self, vx: f64) -> bool {
        self.v_low <= vx && vx < self.v_high
    }
}

/// Default schedule: damping on steering grows with speed.
pub fn default_brackets() -> Vec<VelocityBracket> {
    let q = [1.0, 0.1, 2.0, 0.1];
    vec![
        VelocityBracket::new(0.0, 20.0, q, 0.5),
        VelocityBracket::new(20.0, 35.0, q, 1.0),
        VelocityBracket::new(35.0, 50.0, q, 2.0),
        VelocityBracket::new(50.0, f64::INFINITY, q, 5.0),
    ]
}

/// Checks that brackets are ordered, disjoint and cover `[0, ∞)`.
pub fn validate_brackets(brackets: &[VelocityBracket]) -> Result<(), LqrError> {
    let Some(first) = brackets.first() else {
        return Err(LqrError::Schedule("schedule is empty".into()));
    };
    if first.v_low != 0.0 {
        return Err(LqrError::Schedule(format!(
            "first bracket starts at {} instead of 0",
            first.v_low
        )));
    }
    for (i, b) in brackets.iter().enumerate() {
        if !(b.v_low.is_finite() && b.v_low < b.v_high) || b.v_high.is_nan() {
            return Err(LqrError::Schedule(format!(
                "bracket {i} has bounds [{}, {})",
                b.v_low, b.v_high
            )));
        }
        b.weights.validate().map_err(|e| LqrError::Bracket {
            index: i,
            v_low: b.v_low,
            v_high: b.v_high,
            source: Box::new(e),
        })?;
        if let Some(next) = brackets.get(i + 1) {
            if next.v_low != b.v_high {
                let kind = if next.v_low < b.v_high { "overlap" } else { "gap" };
                return Err(LqrError::Schedule(format!(
                    "{kind} between bracket {i} (ends {}) and bracket {} (starts {})",
                    b.v_high,
                    i + 1,
                    next.v_low
                )));
            }
        }
    }
    let last = brackets.last().unwrap();
    if last.v_high != f64::INFINITY {
        return Err(LqrError::Schedule(format!(
            "last bracket ends at {} instead of infinity",
            last.v_high
        )));
    }
    Ok(())
}

/// A bracket with its synthesized feedback gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesizedBracket {
    pub bracket: VelocityBracket,
    pub synth_velocity: f64,
    pub gain: RowVector4<f64>,
}

/// Immutable, validated set of synthesized brackets.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    brackets: Vec<SynthesizedBracket>,
    params: VehicleParams,
}

impl GainSchedule {
    pub fn brackets(&self) -> &[SynthesizedBracket] {
        &self.brackets
    }

    /// Parameters the gains were synthesized for.
    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn specs(&self) -> Vec<VelocityBracket> {
        self.brackets.iter().map(|b| b.bracket).collect()
    }

    /// Index and bracket with `v_low ≤ vx < v_high`. Negative or NaN speeds
    /// map to the first bracket.
    pub fn select(&self, vx: f64) -> (usize, &SynthesizedBracket) {
        let idx = self
            .brackets
            .iter()
            .rposition(|b| b.bracket.v_low <= vx)
            .unwrap_or(0);
        (idx, &self.brackets[idx])
    }
}

/// Free-function form of [`GainSchedule::select`].
pub fn select_bracket(schedule: &GainSchedule, vx: f64) -> &SynthesizedBracket {
    schedule.select(vx).1
}

/// LQR gain for the error-frame model at speed `vx`.
pub fn error_frame_gain(
    params: &VehicleParams,
    vx: f64,
    weights: &WeightSet,
) -> Result<RowVector4<f64>, LqrError> {
    weights.validate()?;
    let (a, b) = error_dynamics_matrices(params, vx)?;
    let a = DMatrix::from_column_slice(4, 4, a.as_slice());
    let b = DMatrix::from_column_slice(4, 1, b.as_slice());
    let q = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&weights.q_diag));
    let r = DMatrix::from_element(1, 1, weights.r);
    let k = lqr_gain(&a, &b, &q, &r)?;
    Ok(RowVector4::new(k[(0, 0)], k[(0, 1)], k[(0, 2)], k[(0, 3)]))
}

/// Synthesizes one gain per bracket at its [`VelocityBracket::synth_velocity`].
pub fn build_bracket_gains(
    params: &VehicleParams,
    brackets: &[VelocityBracket],
) -> Result<GainSchedule, LqrError> {
    params.validate()?;
    validate_brackets(brackets)?;
    let synthesized = brackets
        .iter()
        .enumerate()
        .map(|(index, bracket)| {
            let synth_velocity = bracket.synth_velocity();
            let gain = error_frame_gain(params, synth_velocity, &bracket.weights).map_err(|e| {
                LqrError::Bracket {
                    index,
                    v_low: bracket.v_low,
                    v_high: bracket.v_high,
                    source: Box::new(e),
                }
            })?;
            Ok(SynthesizedBracket {
                bracket: *bracket,
                synth_velocity,
                gain,
            })
        })
        .collect::<Result<Vec<_>, LqrError>>()?;
    Ok(GainSchedule {
        brackets: synthesized,
        params: *params,
    })
}
