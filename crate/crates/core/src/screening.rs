//! Gap Safe spheres, the ℓ1 sphere tests and radius refinement.

use crate::error::{Error, Result};
use crate::linalg::ActiveSet;
use crate::losses::{LossKind, LossModel};

/// Negative gaps down to `-GAP_SLACK * max(1, |P|)` are treated as rounding.
pub const GAP_SLACK: f64 = 1e-9;

/// A ball certified to contain the dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSphere {
    pub center: Vec<f64>,
    pub radius: f64,
    pub alpha_used: f64,
    pub restricted_to_s0: bool,
}

/// `P − D` with the rounding clamp applied.
pub fn gap_from_values(primal: f64, dual: f64) -> Result<f64> {
    if dual == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let g = primal - dual;
    if g.is_nan() {
        return Err(Error::WeakDualityViolated(g));
    }
    if g < 0.0 {
        if g < -GAP_SLACK * primal.abs().max(1.0) {
            return Err(Error::WeakDualityViolated(g));
        }
        return Ok(0.0);
    }
    Ok(g)
}

/// Allowance per unit of `|P| + |D|` added to a computed gap before it
/// certifies a sphere. Without it a gap that rounds to zero gives `r = 0`,
/// and a support column whose `aⱼᵀθ` rounds just below 1 gets screened.
pub const GAP_ROUNDING: f64 = 64.0 * f64::EPSILON;

/// The gap used to size safe spheres: `P − D` plus a rounding allowance.
pub fn certified_gap(primal: f64, dual: f64) -> Result<f64> {
    let g = gap_from_values(primal, dual)?;
    Ok(g + GAP_ROUNDING * (primal.abs() + dual.abs()))
}

/// Duality gap `P_λ(x) − D_λ(θ)`.
pub fn gap(model: &LossModel, x: &[f64], ax: &[f64], theta: &[f64]) -> Result<f64> {
    let p = model.primal_value_ax(x, ax)?;
    let d = model.dual_value(theta)?;
    gap_from_values(p, d)
}

/// `sqrt(2·gap/α)`; infinite for an infinite gap.
pub fn radius_from_gap(gap: f64, alpha: f64) -> f64 {
    if gap == 0.0 {
        0.0
    } else if gap.is_infinite() {
        f64::INFINITY
    } else {
        (2.0 * gap / alpha).sqrt()
    }
}

pub fn gap_sphere(
    model: &LossModel,
    x: &[f64],
    ax: &[f64],
    theta: &[f64],
    alpha: f64,
) -> Result<SafeSphere> {
    if !(alpha > 0.0) {
        return Err(Error::NoPositiveBound);
    }
    let g = certified_gap(model.primal_value_ax(x, ax)?, model.dual_value(theta)?)?;
    Ok(SafeSphere {
        center: theta.to_vec(),
        radius: radius_from_gap(g, alpha),
        alpha_used: alpha,
        restricted_to_s0: model.loss() == LossKind::KullbackLeibler,
    })
}

/// True when column `j` can be discarded, given `aⱼᵀθ` at the center.
pub fn sphere_test(model: &LossModel, j: usize, radius: f64, theta_dot_aj: f64) -> bool {
    let a = model.matrix();
    let (lhs, norm) = match model.loss() {
        LossKind::Quadratic | LossKind::Logistic => (theta_dot_aj.abs(), a.col_norm2()[j]),
        LossKind::Beta15 => (theta_dot_aj, a.col_norm2()[j]),
        LossKind::KullbackLeibler => (theta_dot_aj, a.col_norm2_restricted()[j]),
    };
    let spread = if norm == 0.0 { 0.0 } else { radius * norm };
    lhs + spread < 1.0
}

/// Removes every active column that passes the sphere test; returns the
/// newly screened columns.
pub fn screen_in_place(
    model: &LossModel,
    radius: f64,
    active: &mut ActiveSet,
    theta_dot_a: &[f64],
    iter: usize,
) -> Vec<usize> {
    let hits: Vec<usize> = active
        .indices()
        .filter(|&j| sphere_test(model, j, radius, theta_dot_a[j]))
        .collect();
    for &j in &hits {
        active.deactivate(j, iter);
    }
    hits
}

pub fn screen(
    model: &LossModel,
    sphere: &SafeSphere,
    active: &ActiveSet,
    theta_dot_a: &[f64],
    iter: usize,
) -> ActiveSet {
    let mut out = active.clone();
    screen_in_place(model, sphere.radius, &mut out, theta_dot_a, iter);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub radius: f64,
    /// The bound that produced the returned radius.
    pub alpha: f64,
    pub inner_iters: usize,
    /// Radius after the ball step and after each inner evaluation.
    pub history: Vec<f64>,
}

/// Stopping rule for the refinement loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefineTol {
    /// Stop when the decrease is below this fraction of the current radius.
    Relative(f64),
    Absolute(f64),
}

impl Default for RefineTol {
    fn default() -> Self {
        RefineTol::Relative(1e-3)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}

/// Radius refinement for a new center `theta` given the previous certified
/// sphere `B(theta_old, r_prev)` and the current gap.
pub fn refine_radius(
    model: &LossModel,
    gap: f64,
    theta: &[f64],
    theta_old: &[f64],
    r_prev: f64,
    tol: RefineTol,
    max_inner: usize,
) -> Result<Refinement> {
    if gap == 0.0 {
        return Ok(Refinement {
            radius: 0.0,
            alpha: model.alpha_ball(theta, 0.0)?,
            inner_iters: 0,
            history: vec![0.0],
        });
    }
    if !gap.is_finite() || !r_prev.is_finite() {
        return Ok(Refinement {
            radius: f64::INFINITY,
            alpha: 0.0,
            inner_iters: 0,
            history: vec![f64::INFINITY],
        });
    }
    let enclosing = r_prev.max(dist(theta, theta_old));
    let mut alpha = model.alpha_ball(theta_old, enclosing)?;
    let mut r = radius_from_gap(gap, alpha);
    let mut history = vec![r];
    let mut inner = 0;
    while inner < max_inner {
        let a = model.alpha_ball(theta, r)?;
        let candidate = radius_from_gap(gap, a);
        let r_new = if candidate < r {
            alpha = a;
            candidate
        } else {
            r
        };
        inner += 1;
        history.push(r_new);
        let drop = r - r_new;
        r = r_new;
        let threshold = match tol {
            RefineTol::Relative(f) => f * r,
            RefineTol::Absolute(e) => e,
        };
        if drop <= threshold {
            break;
        }
    }
    Ok(Refinement {
        radius: r,
        alpha,
        inner_iters: inner,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DesignMatrix;
    use crate::losses::ProblemSpec;

    fn model(loss: LossKind, rows: &[Vec<f64>], y: &[f64], lambda: f64) -> LossModel {
        let a = DesignMatrix::from_rows(rows).unwrap();
        LossModel::new(ProblemSpec::new(loss, y.to_vec(), lambda, 1e-3), a).unwrap()
    }

    fn eye2() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 1.0]]
    }

    #[test]
    fn gap_examples() {
        let m = model(LossKind::Quadratic, &eye2(), &[3.0, 4.0], 1.0);
        assert_eq!(gap(&m, &[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 12.5);
        let a = DesignMatrix::from_rows(&[vec![1.0]]).unwrap();
        let kl = LossModel::new(
            ProblemSpec::new(LossKind::KullbackLeibler, vec![1.0], 1.0, 1.0),
            a,
        )
        .unwrap();
        assert_eq!(gap(&kl, &[0.0], &[0.0], &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn gap_clamp_and_violation() {
        assert_eq!(gap_from_values(1.0, 1.0 + 5e-10).unwrap(), 0.0);
        assert!(matches!(
            gap_from_values(1.0, 1.1),
            Err(Error::WeakDualityViolated(_))
        ));
        assert_eq!(gap_from_values(1.0, f64::NEG_INFINITY).unwrap(), f64::INFINITY);
    }

    #[test]
    fn sphere_radius() {
        assert_eq!(radius_from_gap(0.0, 3.0), 0.0);
        assert_eq!(radius_from_gap(2.0, 4.0), 1.0);
        let m = model(LossKind::Quadratic, &eye2(), &[3.0, 4.0], 1.0);
        let s = gap_sphere(&m, &[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((s.radius - 5.0).abs() < 1e-12);
    }

    #[test]
    fn certified_gap_is_never_zero_off_the_origin() {
        assert_eq!(certified_gap(1.0, 1.0).unwrap(), 128.0 * f64::EPSILON);
        assert_eq!(certified_gap(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sphere_test_examples() {
        let m = model(LossKind::Quadratic, &eye2(), &[3.0, 4.0], 1.0);
        assert!(sphere_test(&m, 0, 0.3, 0.5));
        assert!(!sphere_test(&m, 0, 0.3, 0.7));
        assert!(!sphere_test(&m, 0, 0.3, -0.75));
        assert!(!sphere_test(&m, 0, f64::INFINITY, 0.0));

        // Column (0.6, 0.8) with y₂ = 0.
        let kl = model(
            LossKind::KullbackLeibler,
            &[vec![0.6, 1.0], vec![0.8, 0.0]],
            &[1.0, 0.0],
            1.0,
        );
        assert!(sphere_test(&kl, 0, 1.0, 0.2));
        assert!(0.2 + 1.0 * kl.matrix().col_norm2()[0] >= 1.0);
    }

    #[test]
    fn screen_toy_lasso() {
        // x★ = (2, 0), θ★ = (1, 0.1).
        let m = model(LossKind::Quadratic, &eye2(), &[3.0, 0.1], 1.0);
        let active = ActiveSet::full(2);
        let sphere = SafeSphere {
            center: vec![1.0, 0.1],
            radius: 0.0,
            alpha_used: 1.0,
            restricted_to_s0: false,
        };
        let out = screen(&m, &sphere, &active, &[1.0, 0.1], 3);
        assert!(out.is_active(0));
        assert!(!out.is_active(1));
        assert_eq!(out.screened_at(1), Some(3));
        let inf = SafeSphere {
            radius: f64::INFINITY,
            ..sphere
        };
        assert_eq!(screen(&m, &inf, &active, &[1.0, 0.1], 3).count(), 2);
    }

    #[test]
    fn refine_quadratic_is_one_step() {
        let m = model(LossKind::Quadratic, &eye2(), &[3.0, 4.0], 1.0);
        let r = refine_radius(
            &m,
            0.5,
            &[0.1, 0.1],
            &[0.0, 0.0],
            0.2,
            RefineTol::default(),
            20,
        )
        .unwrap();
        assert_eq!(r.inner_iters, 1);
        assert_eq!(r.radius, 1.0);
        assert_eq!(r.history, vec![1.0, 1.0]);
        let z = refine_radius(&m, 0.0, &[0.0; 2], &[0.0; 2], 1.0, RefineTol::default(), 20)
            .unwrap();
        assert_eq!(z.radius, 0.0);
    }
}
