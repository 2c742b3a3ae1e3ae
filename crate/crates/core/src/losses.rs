//! Data-fidelity terms: primal and dual values, dual scaling, dual updates,
//! Hessian eigenvalues of the dual and the strong-concavity bounds built on them.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::DesignMatrix;

/// Slack allowed when checking dual-domain boundaries against rounding.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Largest `min(m, n)` for which the logistic pseudo-inverse is computed
/// automatically.
pub const PINV_MAX_DIM: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Quadratic,
    Beta15,
    KullbackLeibler,
    Logistic,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Quadratic => "quadratic",
            LossKind::Beta15 => "beta15",
            LossKind::KullbackLeibler => "kl",
            LossKind::Logistic => "logistic",
        }
    }

    pub fn constraint(self) -> Constraint {
        match self {
            LossKind::Quadratic | LossKind::Logistic => Constraint::Unconstrained,
            LossKind::Beta15 | LossKind::KullbackLeibler => Constraint::NonNegative,
        }
    }

    /// Whether the dual is strongly concave on its whole domain.
    pub fn has_global_bound(self) -> bool {
        matches!(self, LossKind::Quadratic | LossKind::Logistic)
    }

    pub fn all() -> [LossKind; 4] {
        [
            LossKind::Quadratic,
            LossKind::Beta15,
            LossKind::KullbackLeibler,
            LossKind::Logistic,
        ]
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(LossKind::Quadratic),
            "beta15" => Ok(LossKind::Beta15),
            "kl" => Ok(LossKind::KullbackLeibler),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(format!("unknown loss '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Unconstrained,
    NonNegative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub loss: LossKind,
    pub y: Vec<f64>,
    pub lambda: f64,
    /// Smoothing inside the beta-1.5 and KL terms; ignored otherwise.
    pub epsilon: f64,
    pub constraint: Constraint,
}

impl ProblemSpec {
    /// Spec with the constraint implied by the loss.
    pub fn new(loss: LossKind, y: Vec<f64>, lambda: f64, epsilon: f64) -> Self {
        ProblemSpec {
            loss,
            y,
            lambda,
            epsilon,
            constraint: loss.constraint(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraint != self.loss.constraint() {
            return Err(Error::InvalidSpec(format!(
                "{} requires the {:?} constraint",
                self.loss.name(),
                self.loss.constraint()
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.y.is_empty() {
            return Err(Error::InvalidSpec("empty observation vector".into()));
        }
        if let Some(i) = self.y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("y[{i}] is not finite")));
        }
        match self.loss {
            LossKind::Quadratic => {}
            LossKind::Logistic => {
                if let Some(i) = self.y.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "logistic labels must be 0 or 1, y[{i}] = {}",
                        self.y[i]
                    )));
                }
            }
            LossKind::Beta15 | LossKind::KullbackLeibler => {
                if let Some(i) = self.y.iter().position(|&v| v < 0.0) {
                    return Err(Error::InvalidSpec(format!("y[{i}] is negative")));
                }
                if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "epsilon must be positive, got {}",
                        self.epsilon
                    )));
                }
                if self.loss == LossKind::Beta15 && self.epsilon >= 1.0 / 3.0 {
                    return Err(Error::EpsilonTooLarge(self.epsilon));
                }
            }
        }
        Ok(())
    }

    /// Rows with `yᵢ = 0`.
    pub fn zero_set(&self) -> Vec<usize> {
        self.y
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| if v == 0.0 { Some(i) } else { None })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S0Kind {
    AllSpace,
    UpperBounded,
    PinnedCoordinates,
}

/// The auxiliary set S₀ known to contain the dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct S0Params {
    pub kind: S0Kind,
    /// Beta-1.5 bound on `λθ` (empty otherwise).
    pub b: Vec<f64>,
    /// Beta-1.5 `min(b, (y−ε)/√ε)`, in `λθ` units (empty otherwise).
    pub ub: Vec<f64>,
    /// Beta-1.5 upper bound on `θ` itself, `ub / λ` (empty otherwise).
    pub theta_ub: Vec<f64>,
    /// Rows with `yᵢ = 0`.
    pub i0: Vec<usize>,
}

/// How the logistic `‖A†‖₁` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PinvPolicy {
    /// Compute when `min(m, n) ≤ 2000` and A has full row rank; otherwise
    /// fall back to the global bound.
    Auto,
    /// Always compute; fail with `RankDeficient` if no right inverse exists.
    Force,
    /// Never compute.
    Disabled,
    /// Use a precomputed value.
    Given(f64),
}

/// A dual point produced from a primal iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    /// `Θ(x) ∈ Δ_A ∩ S₀`.
    pub theta: Vec<f64>,
    /// The scaled residual `Ξ(ρ/λ)` before any S₀ clipping or pinning.
    pub theta_test: Vec<f64>,
    /// The Ξ denominator `max(‖φ(Aᵀρ)‖∞/λ, 1)`.
    pub scale: f64,
    /// `Aᵀρ` with `ρ = −∇F(Ax)`.
    pub atr: Vec<f64>,
    /// Per-column value `aⱼᵀθ` used by the sphere test (from `theta_test`
    /// for beta-1.5, from the pinned point for KL).
    pub col_dots: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LossModel {
    spec: ProblemSpec,
    a: Arc<DesignMatrix>,
    s0: S0Params,
    in_i0: Vec<bool>,
    alpha_global: Option<f64>,
    alpha_feasible: f64,
    pinv_norm1: Option<f64>,
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn xlogx(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

/// `t³ − (t² + 4y)^{3/2}` without cancellation for positive `t`.
fn beta_cubic_diff(t: f64, y: f64) -> f64 {
    let s = (t * t + 4.0 * y).sqrt();
    if t > 0.0 {
        let t2 = t * t;
        -(12.0 * t2 * t2 * y + 48.0 * t2 * y * y + 64.0 * y * y * y) / (t * t2 + s * s * s)
    } else {
        t * t * t - s * s * s
    }
}

/// `((t² + 2y)/√(t² + 4y) − t)`, the magnitude of the beta-1.5 eigenvalue
/// divided by λ².
fn beta_curvature(t: f64, y: f64) -> f64 {
    let s = (t * t + 4.0 * y).sqrt();
    if t > 0.0 {
        4.0 * y * y / (s * (t * t + 2.0 * y + t * s))
    } else if s == 0.0 {
        0.0
    } else {
        (t * t + 2.0 * y) / s - t
    }
}

/// Max absolute column sum of the right pseudo-inverse, if A has full row rank.
pub fn right_pinv_norm1(a: &DesignMatrix) -> Option<f64> {
    let (m, n) = (a.rows(), a.cols());
    if m > n {
        return None;
    }
    let dense = DMatrix::from_fn(m, n, |i, j| a.get(i, j));
    let svd = dense.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= smax * 1e-10 {
        return None;
    }
    let pinv = svd.pseudo_inverse(0.0).ok()?;
    // pinv is n × m; column i maps (Aᵀθ) back to θᵢ.
    let mut best: f64 = 0.0;
    for i in 0..m {
        let s: f64 = pinv.column(i).iter().map(|v| v.abs()).sum();
        best = best.max(s);
    }
    Some(best)
}

impl LossModel {
    pub fn new(spec: ProblemSpec, a: impl Into<Arc<DesignMatrix>>) -> Result<Self> {
        Self::with_options(spec, a, PinvPolicy::Auto)
    }

    pub fn with_options(
        spec: ProblemSpec,
        a: impl Into<Arc<DesignMatrix>>,
        pinv: PinvPolicy,
    ) -> Result<Self> {
        spec.validate()?;
        let mut a: Arc<DesignMatrix> = a.into();
        if a.rows() != spec.y.len() {
            return Err(Error::InvalidSpec(format!(
                "A has {} rows but y has {} entries",
                a.rows(),
                spec.y.len()
            )));
        }
        a.validate(spec.constraint == Constraint::NonNegative)?;
        let i0 = spec.zero_set();
        if a.i0() != i0.as_slice() {
            a = Arc::new((*a).clone().with_i0(&i0)?);
        }
        let pinv_norm1 = if spec.loss == LossKind::Logistic {
            match pinv {
                PinvPolicy::Auto => {
                    if a.rows().min(a.cols()) <= PINV_MAX_DIM {
                        right_pinv_norm1(&a)
                    } else {
                        None
                    }
                }
                PinvPolicy::Force => Some(right_pinv_norm1(&a).ok_or(Error::RankDeficient)?),
                PinvPolicy::Disabled => None,
                PinvPolicy::Given(v) => Some(v),
            }
        } else {
            None
        };
        let mut model = LossModel {
            in_i0: {
                let mut v = vec![false; spec.y.len()];
                for &i in &i0 {
                    v[i] = true;
                }
                v
            },
            spec,
            a,
            s0: S0Params {
                kind: S0Kind::AllSpace,
                b: vec![],
                ub: vec![],
                theta_ub: vec![],
                i0,
            },
            alpha_global: None,
            alpha_feasible: 0.0,
            pinv_norm1,
        };
        model.s0 = model.compute_s0();
        model.alpha_global = model.compute_alpha_global();
        model.alpha_feasible = model.compute_alpha_feasible()?;
        Ok(model)
    }

    /// Same data and options at a different λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.lambda = lambda;
        let policy = match self.pinv_norm1 {
            Some(v) => PinvPolicy::Given(v),
            None => PinvPolicy::Disabled,
        };
        Self::with_options(spec, self.a.clone(), policy)
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn loss(&self) -> LossKind {
        self.spec.loss
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    pub fn y(&self) -> &[f64] {
        &self.spec.y
    }

    pub fn matrix(&self) -> &DesignMatrix {
        &self.a
    }

    pub fn matrix_arc(&self) -> Arc<DesignMatrix> {
        self.a.clone()
    }

    pub fn s0(&self) -> &S0Params {
        &self.s0
    }

    pub fn in_i0(&self, i: usize) -> bool {
        self.in_i0[i]
    }

    pub fn alpha_global(&self) -> Option<f64> {
        self.alpha_global
    }

    pub fn alpha_feasible(&self) -> f64 {
        self.alpha_feasible
    }

    pub fn pinv_norm1(&self) -> Option<f64> {
        self.pinv_norm1
    }

    pub fn is_nonneg(&self) -> bool {
        self.spec.constraint == Constraint::NonNegative
    }

    /// `φ(v)`: identity or positive part.
    #[inline]
    pub fn phi(&self, v: f64) -> f64 {
        if self.is_nonneg() {
            v.max(0.0)
        } else {
            v
        }
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.a.cols() {
            return Err(Error::InvalidSpec(format!(
                "x has length {}, expected {}",
                x.len(),
                self.a.cols()
            )));
        }
        for (j, &v) in x.iter().enumerate() {
            if !v.is_finite() || (self.is_nonneg() && v < 0.0) {
                return Err(Error::InfeasiblePrimal(j));
            }
        }
        Ok(())
    }

    /// `F(z)` for `z = Ax`.
    pub fn f_value(&self, z: &[f64]) -> Result<f64> {
        let y = &self.spec.y;
        let eps = self.spec.epsilon;
        let mut total = 0.0;
        match self.spec.loss {
            LossKind::Quadratic => {
                for (zi, yi) in z.iter().zip(y) {
                    total += 0.5 * (yi - zi) * (yi - zi);
                }
            }
            LossKind::Logistic => {
                for (zi, yi) in z.iter().zip(y) {
                    total += softplus(*zi) - yi * zi;
                }
            }
            LossKind::Beta15 => {
                for (i, (zi, yi)) in z.iter().zip(y).enumerate() {
                    let w = zi + eps;
                    if w <= 0.0 {
                        return Err(Error::DomainViolation(i));
                    }
                    let sw = w.sqrt();
                    total += (4.0 / 3.0) * (yi * yi.sqrt() + 0.5 * w * sw - 1.5 * yi * sw);
                }
            }
            LossKind::KullbackLeibler => {
                for (i, (zi, yi)) in z.iter().zip(y).enumerate() {
                    let w = zi + eps;
                    if w <= 0.0 {
                        return Err(Error::DomainViolation(i));
                    }
                    let log_term = if *yi > 0.0 { yi * (yi / w).ln() } else { 0.0 };
                    total += log_term + w - yi;
                }
            }
        }
        Ok(total)
    }

    /// `P_λ(x) = F(Ax) + λ‖x‖₁`.
    pub fn primal_value(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        let ax = self.a.matvec(x)?;
        self.primal_value_ax(x, &ax)
    }

    /// Primal value with a caller-supplied `Ax`.
    pub fn primal_value_ax(&self, x: &[f64], ax: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        Ok(self.f_value(ax)? + self.spec.lambda * l1)
    }

    /// `∇F(z)`.
    pub fn grad_f(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.residual(z)?;
        for v in r.iter_mut() {
            *v = -*v;
        }
        Ok(r)
    }

    /// `ρ = −∇F(z)`.
    pub fn residual(&self, z: &[f64]) -> Result<Vec<f64>> {
        let y = &self.spec.y;
        let eps = self.spec.epsilon;
        if z.len() != y.len() {
            return Err(Error::InvalidSpec(format!(
                "z has length {}, expected {}",
                z.len(),
                y.len()
            )));
        }
        let mut out = Vec::with_capacity(z.len());
        for (i, (zi, yi)) in z.iter().zip(y).enumerate() {
            let v = match self.spec.loss {
                LossKind::Quadratic => yi - zi,
                LossKind::Logistic => yi - sigmoid(*zi),
                LossKind::Beta15 => {
                    let w = zi + eps;
                    if w <= 0.0 {
                        return Err(Error::DomainViolation(i));
                    }
                    let sw = w.sqrt();
                    yi / sw - sw
                }
                LossKind::KullbackLeibler => {
                    let w = zi + eps;
                    if w <= 0.0 {
                        return Err(Error::DomainViolation(i));
                    }
                    yi / w - 1.0
                }
            };
            out.push(v);
        }
        Ok(out)
    }

    /// Checks `θᵢ` against the dual domain; returns `λθᵢ`, clamped onto the
    /// boundary when it overshoots by at most `DOMAIN_TOL`.
    fn dual_coord(&self, i: usize, theta_i: f64) -> Result<f64> {
        let lam = self.spec.lambda;
        let t = lam * theta_i;
        if theta_i.is_nan() {
            return Err(Error::OutsideDualDomain {
                index: i,
                value: theta_i,
                bound: f64::NAN,
            });
        }
        match self.spec.loss {
            LossKind::Quadratic | LossKind::Beta15 => {
                if !t.is_finite() {
                    return Err(Error::OutsideDualDomain {
                        index: i,
                        value: theta_i,
                        bound: f64::INFINITY,
                    });
                }
                Ok(t)
            }
            LossKind::KullbackLeibler => {
                if t < -1.0 - DOMAIN_TOL || !t.is_finite() {
                    return Err(Error::OutsideDualDomain {
                        index: i,
                        value: theta_i,
                        bound: -1.0 / lam,
                    });
                }
                Ok(t.max(-1.0))
            }
            LossKind::Logistic => {
                let y = self.spec.y[i];
                if t < y - 1.0 - DOMAIN_TOL {
                    return Err(Error::OutsideDualDomain {
                        index: i,
                        value: theta_i,
                        bound: (y - 1.0) / lam,
                    });
                }
                if t > y + DOMAIN_TOL {
                    return Err(Error::OutsideDualDomain {
                        index: i,
                        value: theta_i,
                        bound: y / lam,
                    });
                }
                Ok(t.clamp(y - 1.0, y))
            }
        }
    }

    /// Whether θ lies in `dom D_λ` (up to `DOMAIN_TOL`).
    pub fn in_dual_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.spec.y.len()
            && theta
                .iter()
                .enumerate()
                .all(|(i, &t)| self.dual_coord(i, t).is_ok())
    }

    /// `D_λ(θ) = −Σ fᵢ*(−λθᵢ)`; may be `−∞` on the KL boundary.
    pub fn dual_value(&self, theta: &[f64]) -> Result<f64> {
        let y = &self.spec.y;
        if theta.len() != y.len() {
            return Err(Error::InvalidSpec(format!(
                "theta has length {}, expected {}",
                theta.len(),
                y.len()
            )));
        }
        let eps = self.spec.epsilon;
        let mut total = 0.0;
        for (i, (&th, &yi)) in theta.iter().zip(y).enumerate() {
            let t = self.dual_coord(i, th)?;
            total += match self.spec.loss {
                LossKind::Quadratic => t * (yi - 0.5 * t),
                LossKind::Beta15 => {
                    beta_cubic_diff(t, yi) / 6.0 + t * yi + (4.0 / 3.0) * yi * yi.sqrt() - eps * t
                }
                LossKind::KullbackLeibler => {
                    if yi > 0.0 {
                        if t <= -1.0 {
                            return Ok(f64::NEG_INFINITY);
                        }
                        yi * t.ln_1p() - eps * t
                    } else {
                        -eps * t
                    }
                }
                LossKind::Logistic => -xlogx(yi - t) - xlogx(1.0 - yi + t),
            };
        }
        Ok(total)
    }

    /// Smallest λ for which `x★ = 0`.
    pub fn lambda_max(&self) -> Result<f64> {
        let y = &self.spec.y;
        let eps = self.spec.epsilon;
        let v: Vec<f64> = match self.spec.loss {
            LossKind::Quadratic => y.clone(),
            LossKind::Logistic => y.iter().map(|v| v - 0.5).collect(),
            LossKind::Beta15 | LossKind::KullbackLeibler => y.iter().map(|v| v - eps).collect(),
        };
        let atv = self.a.rmatvec(&v)?;
        let raw = atv
            .iter()
            .map(|&c| if self.is_nonneg() { c } else { c.abs() })
            .fold(f64::NEG_INFINITY, f64::max);
        let lmax = match self.spec.loss {
            LossKind::Beta15 => raw / eps.sqrt(),
            LossKind::KullbackLeibler => raw / eps,
            _ => raw,
        };
        if lmax > 0.0 {
            Ok(lmax)
        } else {
            Err(Error::NonPositiveLambdaMax(lmax))
        }
    }

    /// Ξ: returns `z / max(‖φ(Aᵀz)‖∞, 1)` and the denominator.
    pub fn dual_scale(&self, z: &[f64]) -> Result<(Vec<f64>, f64)> {
        for (i, &v) in z.iter().enumerate() {
            self.dual_coord(i, v)?;
        }
        let atz = self.a.rmatvec(z)?;
        let s = self.scale_from(&atz, 1.0);
        Ok((z.iter().map(|v| v / s).collect(), s))
    }

    /// `max(‖φ(atv)‖∞ / div, 1)`.
    fn scale_from(&self, atv: &[f64], div: f64) -> f64 {
        let mut s: f64 = 1.0;
        for &c in atv {
            let p = if self.is_nonneg() { c } else { c.abs() };
            s = s.max(p / div);
        }
        s
    }

    /// `max_j φ(aⱼᵀθ)`, the dual-norm constraint value.
    pub fn dual_norm(&self, theta: &[f64]) -> Result<f64> {
        let at = self.a.rmatvec(theta)?;
        Ok(at
            .iter()
            .map(|&c| if self.is_nonneg() { c } else { c.abs() })
            .fold(0.0, f64::max))
    }

    /// Θ(x): a point of `Δ_A ∩ S₀` built from the residual at `Ax`.
    pub fn dual_update(&self, x: &[f64], ax: &[f64]) -> Result<DualPoint> {
        self.check_x(x)?;
        let rho = self.residual(ax)?;
        let atr = self.a.rmatvec(&rho)?;
        self.dual_from_residual(rho, atr)
    }

    /// Θ from a residual and its correlations `Aᵀρ`.
    pub fn dual_from_residual(&self, rho: Vec<f64>, atr: Vec<f64>) -> Result<DualPoint> {
        let lam = self.spec.lambda;
        let s = self.scale_from(&atr, lam);
        let denom = lam * s;
        let theta_test: Vec<f64> = rho.iter().map(|r| r / denom).collect();
        let mut col_dots: Vec<f64> = atr.iter().map(|c| c / denom).collect();
        let theta = match self.spec.loss {
            LossKind::Quadratic | LossKind::Logistic => theta_test.clone(),
            LossKind::Beta15 => theta_test
                .iter()
                .zip(&self.s0.theta_ub)
                .map(|(t, u)| t.min(*u))
                .collect(),
            LossKind::KullbackLeibler => {
                let pinned = -1.0 / lam;
                let inv = 1.0 / s;
                let n1i0 = self.a.col_norm1_on_i0();
                for (j, cd) in col_dots.iter_mut().enumerate() {
                    *cd = inv * atr[j] / lam - (1.0 - inv) / lam * n1i0[j];
                }
                theta_test
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| if self.in_i0[i] { pinned } else { t })
                    .collect()
            }
        };
        Ok(DualPoint {
            theta,
            theta_test,
            scale: s,
            atr,
            col_dots,
        })
    }

    /// i-th eigenvalue of `∇²D_λ` at `θᵢ`.
    pub fn sigma(&self, i: usize, theta_i: f64) -> Result<f64> {
        let t = self.dual_coord(i, theta_i)?;
        Ok(self.sigma_t(i, t))
    }

    /// Eigenvalue as a function of `t = λθᵢ`, assuming t is in the domain.
    fn sigma_t(&self, i: usize, t: f64) -> f64 {
        let lam2 = self.spec.lambda * self.spec.lambda;
        let y = self.spec.y[i];
        match self.spec.loss {
            LossKind::Quadratic => -lam2,
            LossKind::Beta15 => -lam2 * beta_curvature(t, y),
            LossKind::KullbackLeibler => {
                if y == 0.0 {
                    0.0
                } else {
                    let w = 1.0 + t;
                    -lam2 * y / (w * w)
                }
            }
            LossKind::Logistic => -lam2 / ((y - t) * (1.0 - y + t)),
        }
    }

    fn compute_s0(&self) -> S0Params {
        let i0 = self.spec.zero_set();
        match self.spec.loss {
            LossKind::Quadratic | LossKind::Logistic => S0Params {
                kind: S0Kind::AllSpace,
                b: vec![],
                ub: vec![],
                theta_ub: vec![],
                i0,
            },
            LossKind::KullbackLeibler => S0Params {
                kind: S0Kind::PinnedCoordinates,
                b: vec![],
                ub: vec![],
                theta_ub: vec![],
                i0,
            },
            LossKind::Beta15 => {
                let lam = self.spec.lambda;
                let eps = self.spec.epsilon;
                let m = self.spec.y.len() as f64;
                let y15: f64 = self.spec.y.iter().map(|v| v * v.sqrt()).sum();
                let k = (4.0 * y15 + 2.0 * (m - 1.0) * eps * eps.sqrt() + 3.0 * eps)
                    / (1.0 - 3.0 * eps);
                let c = -k.cbrt() / lam;
                let n1 = self.a.col_norm1();
                let mut row_min = vec![f64::INFINITY; self.a.rows()];
                for j in 0..self.a.cols() {
                    let num = 1.0 - c * n1[j];
                    self.a.for_each_in_col(j, |i, v| {
                        let cand = num / v;
                        if cand < row_min[i] {
                            row_min[i] = cand;
                        }
                    });
                }
                let b: Vec<f64> = row_min.iter().map(|r| lam * r + lam * c).collect();
                let sq = eps.sqrt();
                let ub: Vec<f64> = b
                    .iter()
                    .zip(&self.spec.y)
                    .map(|(bi, yi)| bi.min((yi - eps) / sq))
                    .collect();
                let theta_ub = ub.iter().map(|u| u / lam).collect();
                S0Params {
                    kind: S0Kind::UpperBounded,
                    b,
                    ub,
                    theta_ub,
                    i0,
                }
            }
        }
    }

    fn compute_alpha_global(&self) -> Option<f64> {
        let lam2 = self.spec.lambda * self.spec.lambda;
        match self.spec.loss {
            LossKind::Quadratic => Some(lam2),
            LossKind::Logistic => Some(4.0 * lam2),
            LossKind::Beta15 | LossKind::KullbackLeibler => None,
        }
    }

    fn compute_alpha_feasible(&self) -> Result<f64> {
        let lam = self.spec.lambda;
        let lam2 = lam * lam;
        let alpha = match self.spec.loss {
            LossKind::Quadratic => lam2,
            LossKind::Logistic => match self.pinv_norm1 {
                Some(p) => {
                    let h = (lam * p).min(0.5) - 0.5;
                    4.0 * lam2 / (1.0 - 4.0 * h * h)
                }
                None => 4.0 * lam2,
            },
            LossKind::Beta15 => (0..self.spec.y.len())
                .map(|i| -self.sigma_t(i, self.s0.ub[i]))
                .fold(f64::INFINITY, f64::min),
            LossKind::KullbackLeibler => {
                let n1 = self.a.col_norm1();
                let mut row_min = vec![f64::INFINITY; self.a.rows()];
                for j in 0..self.a.cols() {
                    let num = lam + n1[j];
                    self.a.for_each_in_col(j, |i, v| {
                        let cand = num / v;
                        if cand < row_min[i] {
                            row_min[i] = cand;
                        }
                    });
                }
                let mut best = f64::INFINITY;
                for (i, &yi) in self.spec.y.iter().enumerate() {
                    if !self.in_i0[i] {
                        best = best.min(yi / (row_min[i] * row_min[i]));
                    }
                }
                lam2 * best
            }
        };
        if alpha > 0.0 && alpha.is_finite() {
            Ok(alpha)
        } else {
            Err(Error::NoPositiveBound)
        }
    }

    /// Checks that θ lies in S₀.
    pub fn check_s0(&self, theta: &[f64]) -> Result<()> {
        match self.s0.kind {
            S0Kind::AllSpace => Ok(()),
            S0Kind::UpperBounded => {
                for (i, (&t, &u)) in theta.iter().zip(&self.s0.theta_ub).enumerate() {
                    if t > u + DOMAIN_TOL * u.abs().max(1.0) {
                        return Err(Error::CenterOutsideS0(i));
                    }
                }
                Ok(())
            }
            S0Kind::PinnedCoordinates => {
                let pinned = -1.0 / self.spec.lambda;
                for &i in &self.s0.i0 {
                    if (theta[i] - pinned).abs() > DOMAIN_TOL * pinned.abs().max(1.0) {
                        return Err(Error::CenterOutsideS0(i));
                    }
                }
                Ok(())
            }
        }
    }

    /// Strong-concavity bound of `D_λ` on `B(θ, r) ∩ S₀`.
    pub fn alpha_ball(&self, theta: &[f64], r: f64) -> Result<f64> {
        let lam = self.spec.lambda;
        let lam2 = lam * lam;
        if theta.len() != self.spec.y.len() {
            return Err(Error::InvalidSpec("theta has the wrong length".into()));
        }
        let mut ts = Vec::with_capacity(theta.len());
        for (i, &t) in theta.iter().enumerate() {
            ts.push(self.dual_coord(i, t)?);
        }
        self.check_s0(theta)?;
        let alpha = match self.spec.loss {
            LossKind::Quadratic => lam2,
            LossKind::Beta15 => (0..ts.len())
                .map(|i| {
                    let d = (ts[i] + lam * r).min(self.s0.ub[i]);
                    -self.sigma_t(i, d)
                })
                .fold(f64::INFINITY, f64::min),
            LossKind::KullbackLeibler => {
                let mut best = f64::INFINITY;
                for (i, &yi) in self.spec.y.iter().enumerate() {
                    if !self.in_i0[i] {
                        let w = 1.0 + ts[i] + lam * r;
                        best = best.min(yi / (w * w));
                    }
                }
                lam2 * best
            }
            LossKind::Logistic => {
                let g = ts
                    .iter()
                    .zip(&self.spec.y)
                    .map(|(t, y)| (t - y + 0.5).abs())
                    .fold(f64::INFINITY, f64::min);
                let h = (g - lam * r).max(0.0);
                4.0 * lam2 / (1.0 - 4.0 * h * h)
            }
        };
        if alpha > 0.0 {
            Ok(alpha)
        } else {
            Err(Error::NoPositiveBound)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::build_matrix;
    use approx::assert_relative_eq;

    fn eye(n: usize) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        build_matrix(&rows, false, &[]).unwrap()
    }

    fn model(loss: LossKind, rows: &[Vec<f64>], y: &[f64], lambda: f64, eps: f64) -> LossModel {
        let a = DesignMatrix::from_rows(rows).unwrap();
        LossModel::new(ProblemSpec::new(loss, y.to_vec(), lambda, eps), a).unwrap()
    }

    #[test]
    fn primal_examples() {
        let m = LossModel::new(
            ProblemSpec::new(LossKind::Quadratic, vec![3.0, 4.0], 1.0, 0.0),
            eye(2),
        )
        .unwrap();
        assert_eq!(m.primal_value(&[0.0, 0.0]).unwrap(), 12.5);

        let m = model(LossKind::KullbackLeibler, &[vec![1.0]], &[1.0], 1.0, 1.0);
        assert_eq!(m.primal_value(&[0.0]).unwrap(), 0.0);
        assert!(matches!(
            m.primal_value(&[-1.0]),
            Err(Error::InfeasiblePrimal(0))
        ));

        let m = model(LossKind::Logistic, &[vec![1.0]], &[1.0], 2.0, 0.0);
        assert_relative_eq!(m.primal_value(&[0.0]).unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let m = model(
            LossKind::Quadratic,
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[3.0, 1.0],
            1.0,
            0.0,
        );
        assert_eq!(m.grad_f(&[3.0, 1.0]).unwrap(), vec![0.0, 0.0]);
        let m = model(LossKind::KullbackLeibler, &[vec![1.0]], &[2.0], 1.0, 1.0);
        assert_eq!(m.grad_f(&[1.0]).unwrap(), vec![0.0]);
        assert!(matches!(m.grad_f(&[-1.0]), Err(Error::DomainViolation(0))));
        let m = model(LossKind::Logistic, &[vec![1.0]], &[0.0], 1.0, 0.0);
        assert_eq!(m.grad_f(&[0.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn dual_examples() {
        let m = model(
            LossKind::Quadratic,
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[3.0, 4.0],
            7.0,
            0.0,
        );
        assert_eq!(m.dual_value(&[0.0, 0.0]).unwrap(), 0.0);
        let m = model(
            LossKind::KullbackLeibler,
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[1.0, 1.0],
            3.0,
            0.5,
        );
        assert_eq!(m.dual_value(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(
            m.dual_value(&[-1.0 / 3.0, 0.0]).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(matches!(
            m.dual_value(&[-1.0, 0.0]),
            Err(Error::OutsideDualDomain { index: 0, .. })
        ));
        let m = model(LossKind::Logistic, &[vec![1.0]], &[1.0], 1.0, 0.0);
        assert_relative_eq!(m.dual_value(&[0.5]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(m.dual_value(&[1.5]).is_err());
    }

    #[test]
    fn lambda_max_examples() {
        let m = model(
            LossKind::Quadratic,
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[3.0, -1.0],
            1.0,
            0.0,
        );
        assert_eq!(m.lambda_max().unwrap(), 3.0);
        let m = model(
            LossKind::Logistic,
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            &[1.0, 0.0],
            1.0,
            0.0,
        );
        assert_eq!(m.lambda_max().unwrap(), 0.5);
        let m = model(
            LossKind::KullbackLeibler,
            &[vec![1.0], vec![1.0]],
            &[3.0, 1.0],
            1.0,
            1.0,
        );
        assert_eq!(m.lambda_max().unwrap(), 2.0);
        let m = model(LossKind::KullbackLeibler, &[vec![1.0]], &[0.5], 1.0, 1.0);
        assert!(matches!(
            m.lambda_max(),
            Err(Error::NonPositiveLambdaMax(_))
        ));
    }

    #[test]
    fn dual_scale_examples() {
        let rows = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = model(LossKind::Quadratic, &rows, &[1.0, 1.0], 1.0, 0.0);
        assert_eq!(m.dual_scale(&[2.0, 0.0]).unwrap().0, vec![1.0, 0.0]);
        assert_eq!(m.dual_scale(&[0.5, -0.25]).unwrap().0, vec![0.5, -0.25]);
        let m = model(LossKind::Beta15, &rows, &[1.0, 1.0], 1.0, 0.01);
        let (z, s) = m.dual_scale(&[-5.0, 0.5]).unwrap();
        assert_eq!(z, vec![-5.0, 0.5]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn kl_dual_update_pins_i0() {
        let rows = [vec![1.0, 0.5], vec![0.3, 1.0]];
        let m = model(LossKind::KullbackLeibler, &rows, &[1.0, 0.0], 0.7, 1e-3);
        for x in [[0.0, 0.0], [0.2, 0.1], [3.0, 0.0]] {
            let ax = m.matrix().matvec(&x).unwrap();
            let d = m.dual_update(&x, &ax).unwrap();
            assert_eq!(d.theta[1], -1.0 / 0.7);
            let direct = m.matrix().rmatvec(&d.theta).unwrap();
            for j in 0..2 {
                assert_relative_eq!(d.col_dots[j], direct[j], epsilon = 1e-12);
                assert!(direct[j] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn beta_dual_update_example() {
        // y = 4, A = [[1]], ε = 0.01, λ = 1, x = 0: ρ = 4/0.1 − 0.1 = 39.9, so
        // Ξ scales it to exactly 1, and (y − ε)/√ε = 39.9.
        let m = model(LossKind::Beta15, &[vec![1.0]], &[4.0], 1.0, 0.01);
        let d = m.dual_update(&[0.0], &[0.0]).unwrap();
        assert_relative_eq!(d.scale, 39.9, epsilon = 1e-12);
        assert_relative_eq!(d.theta_test[0], 1.0, epsilon = 1e-15);
        let b = m.s0().b[0];
        let expected = 1f64.min(b).min(39.9);
        assert_relative_eq!(d.theta[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn sigma_examples() {
        let m = model(LossKind::Quadratic, &[vec![1.0]], &[1.0], 2.0, 0.0);
        assert_eq!(m.sigma(0, 123.0).unwrap(), -4.0);
        let m = model(LossKind::KullbackLeibler, &[vec![1.0]], &[4.0], 1.0, 0.1);
        assert_eq!(m.sigma(0, 1.0).unwrap(), -1.0);
        let m = model(LossKind::Beta15, &[vec![1.0], vec![1.0]], &[0.0, 1.0], 1.0, 0.1);
        assert_eq!(m.sigma(0, -1.0).unwrap(), -2.0);
    }

    #[test]
    fn beta_sigma_stable_for_large_theta() {
        let m = model(LossKind::Beta15, &[vec![1.0]], &[2.0], 1.0, 0.01);
        for &t in &[1e3, 1e6, 1e9] {
            let s = m.sigma(0, t).unwrap();
            // −σ ≈ 2y²/t³ for large t.
            let approx = 2.0 * 4.0 / (t * t * t);
            assert_relative_eq!(-s, approx, max_relative = 1e-4);
        }
    }

    #[test]
    fn s0_examples() {
        let m = model(
            LossKind::KullbackLeibler,
            &[vec![1.0], vec![1.0], vec![1.0]],
            &[0.0, 2.0, 0.0],
            1.0,
            0.1,
        );
        assert_eq!(m.s0().i0, vec![0, 2]);
        assert_eq!(m.s0().kind, S0Kind::PinnedCoordinates);
        let m = model(LossKind::Quadratic, &[vec![1.0]], &[1.0], 1.0, 0.0);
        assert_eq!(m.s0().kind, S0Kind::AllSpace);

        let m = model(LossKind::Beta15, &[vec![1.0]], &[0.0], 1.0, 0.01);
        let s0 = m.s0();
        assert_eq!(s0.kind, S0Kind::UpperBounded);
        assert_relative_eq!(s0.b[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(s0.ub[0], -0.1, epsilon = 1e-15);
    }

    #[test]
    fn epsilon_too_large() {
        let a = DesignMatrix::from_rows(&[vec![1.0]]).unwrap();
        let spec = ProblemSpec::new(LossKind::Beta15, vec![1.0], 1.0, 0.4);
        assert!(matches!(
            LossModel::new(spec, a),
            Err(Error::EpsilonTooLarge(_))
        ));
    }

    #[test]
    fn alpha_examples() {
        let rows = [vec![1.0, 0.0], vec![0.0, 1.0]];
        let m = model(LossKind::Quadratic, &rows, &[1.0, 1.0], 3.0, 0.0);
        assert_eq!(m.alpha_feasible(), 9.0);
        assert_eq!(m.alpha_global(), Some(9.0));
        let m = model(LossKind::KullbackLeibler, &rows, &[1.0, 1.0], 1.0, 1e-6);
        assert_relative_eq!(m.alpha_feasible(), 0.25, epsilon = 1e-15);
        assert_relative_eq!(m.alpha_ball(&[0.0, 0.0], 1.0).unwrap(), 0.25);
        assert_eq!(m.alpha_global(), None);
        let m = model(LossKind::Logistic, &rows, &[1.0, 0.0], 0.1, 0.0);
        assert_relative_eq!(m.pinv_norm1().unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.alpha_feasible(), 0.04 / 0.36, epsilon = 1e-12);
        let m = model(LossKind::Logistic, &[vec![1.0]], &[1.0], 1.0, 0.0);
        assert_relative_eq!(m.alpha_ball(&[0.5], 0.0).unwrap(), 4.0);
    }

    #[test]
    fn logistic_pinv_needs_full_row_rank() {
        let rows = [vec![1.0], vec![2.0]];
        let a = DesignMatrix::from_rows(&rows).unwrap();
        let spec = ProblemSpec::new(LossKind::Logistic, vec![1.0, 0.0], 0.1, 0.0);
        let m = LossModel::new(spec.clone(), a.clone()).unwrap();
        assert_eq!(m.pinv_norm1(), None);
        assert_eq!(Some(m.alpha_feasible()), m.alpha_global());
        assert!(matches!(
            LossModel::with_options(spec, a, PinvPolicy::Force),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn validation_errors() {
        let a = DesignMatrix::from_rows(&[vec![1.0]]).unwrap();
        let bad_label = ProblemSpec::new(LossKind::Logistic, vec![2.0], 1.0, 0.0);
        assert!(LossModel::new(bad_label, a.clone()).is_err());
        let neg = ProblemSpec::new(LossKind::KullbackLeibler, vec![-1.0], 1.0, 0.1);
        assert!(LossModel::new(neg, a.clone()).is_err());
        let no_eps = ProblemSpec::new(LossKind::KullbackLeibler, vec![1.0], 1.0, 0.0);
        assert!(LossModel::new(no_eps, a.clone()).is_err());
        let neg_a = DesignMatrix::from_rows(&[vec![-1.0]]).unwrap();
        let kl = ProblemSpec::new(LossKind::KullbackLeibler, vec![1.0], 1.0, 0.1);
        assert!(LossModel::new(kl, neg_a).is_err());
    }
}
