//! Primal solvers restricted to the active set and the screening driver.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{masked_matvec, ActiveSet};
use crate::losses::{LossKind, LossModel};
use crate::screening::{certified_gap, gap_from_values, radius_from_gap, refine_radius, screen_in_place, RefineTol};

/// Starting value used by multiplicative updates, which cannot leave zero.
pub const MU_FLOOR: f64 = 1e-16;
/// Ax is recomputed from scratch at this period.
pub const REFRESH_EVERY: usize = 100;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Baseline,
    Dgs,
    Gdgs,
    Rdgs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Baseline => "none",
            Algorithm::Dgs => "dgs",
            Algorithm::Gdgs => "gdgs",
            Algorithm::Rdgs => "rdgs",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" | "baseline" => Ok(Algorithm::Baseline),
            "dgs" => Ok(Algorithm::Dgs),
            "gdgs" => Ok(Algorithm::Gdgs),
            "rdgs" => Ok(Algorithm::Rdgs),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    CoordinateDescent,
    MultiplicativeUpdate,
    ProximalGradient,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::CoordinateDescent => "cd",
            SolverKind::MultiplicativeUpdate => "mu",
            SolverKind::ProximalGradient => "pg",
        }
    }

    pub fn supports(self, loss: LossKind) -> bool {
        use LossKind::*;
        match self {
            SolverKind::CoordinateDescent => matches!(loss, Quadratic | Logistic | KullbackLeibler),
            SolverKind::MultiplicativeUpdate | SolverKind::ProximalGradient => {
                matches!(loss, Beta15 | KullbackLeibler)
            }
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cd" => Ok(SolverKind::CoordinateDescent),
            "mu" => Ok(SolverKind::MultiplicativeUpdate),
            "pg" => Ok(SolverKind::ProximalGradient),
            other => Err(format!("unknown solver '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaInit {
    Global,
    Feasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub solver: SolverKind,
    pub eps_gap: f64,
    pub eps_r: RefineTol,
    pub max_iter: usize,
    pub max_inner: usize,
    pub screen_every: usize,
    /// R-DGS only: which bound builds the sphere before the first iteration.
    pub alpha_init_override: Option<AlphaInit>,
    /// Keep every sphere (center and radius) in the trace.
    pub record_spheres: bool,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, solver: SolverKind) -> Self {
        RunConfig {
            algorithm,
            solver,
            eps_gap: 1e-7,
            eps_r: RefineTol::default(),
            max_iter: 10_000,
            max_inner: 20,
            screen_every: 1,
            alpha_init_override: None,
            record_spheres: false,
        }
    }

    pub fn validate(&self, loss: LossKind) -> Result<()> {
        if !(self.eps_gap > 0.0) {
            return Err(Error::InvalidSpec("eps_gap must be positive".into()));
        }
        if self.screen_every == 0 {
            return Err(Error::InvalidSpec("screen_every must be at least 1".into()));
        }
        if !self.solver.supports(loss) {
            return Err(Error::UnsupportedPairing {
                solver: self.solver.name(),
                loss: loss.name(),
            });
        }
        let needs_global = self.algorithm == Algorithm::Dgs
            || (self.algorithm == Algorithm::Rdgs
                && self.alpha_init_override == Some(AlphaInit::Global));
        if needs_global && matches!(loss, LossKind::Beta15 | LossKind::KullbackLeibler) {
            return Err(Error::UnsupportedAlgorithmForLoss(loss.name()));
        }
        Ok(())
    }
}

/// Barzilai–Borwein memory for the proximal gradient solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PgMemory {
    pub eta: f64,
    pub prev: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub ax: Vec<f64>,
    pub pg: PgMemory,
    pub iter: usize,
    /// Number of single-coordinate updates performed so far.
    pub coord_updates: u64,
}

impl SolverState {
    /// `x₀ = 0`, or `x₀ = MU_FLOOR` for multiplicative updates.
    pub fn new(model: &LossModel, solver: SolverKind) -> Self {
        let n = model.matrix().cols();
        let start = if solver == SolverKind::MultiplicativeUpdate {
            MU_FLOOR
        } else {
            0.0
        };
        let x = vec![start; n];
        let ax = model.matrix().matvec(&x).expect("length matches");
        SolverState {
            x,
            ax,
            pg: PgMemory {
                eta: 0.0,
                prev: None,
            },
            iter: 0,
            coord_updates: 0,
        }
    }

    pub fn refresh_ax(&mut self, model: &LossModel, active: &ActiveSet) {
        self.ax = masked_matvec(model.matrix(), &self.x, active).expect("lengths match");
    }
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
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

/// One cycle of coordinate descent over the active columns, ascending order.
pub fn cd_step(model: &LossModel, state: &mut SolverState, active: &ActiveSet) -> Result<()> {
    if !SolverKind::CoordinateDescent.supports(model.loss()) {
        return Err(Error::UnsupportedPairing {
            solver: "cd",
            loss: model.loss().name(),
        });
    }
    let a = model.matrix();
    let y = model.y();
    let lam = model.lambda();
    let eps = model.epsilon();
    let norms = a.col_norm2();
    for j in active.indices() {
        let old = state.x[j];
        let ax = &state.ax;
        let new = match model.loss() {
            LossKind::Quadratic => {
                let h = norms[j] * norms[j];
                if h == 0.0 {
                    continue;
                }
                let mut g = 0.0;
                a.for_each_in_col(j, |i, v| g += v * (ax[i] - y[i]));
                soft_threshold(old - g / h, lam / h)
            }
            LossKind::Logistic => {
                let (mut g, mut h) = (0.0, 0.0);
                a.for_each_in_col(j, |i, v| {
                    let p = sigmoid(ax[i]);
                    g += v * (p - y[i]);
                    h += v * v * p * (1.0 - p);
                });
                let h = h.max(1e-12);
                soft_threshold(old - g / h, lam / h)
            }
            LossKind::KullbackLeibler => {
                let (mut g, mut h) = (0.0, 0.0);
                a.for_each_in_col(j, |i, v| {
                    let w = ax[i] + eps;
                    g += v * (1.0 - y[i] / w);
                    h += v * v * y[i] / (w * w);
                });
                let h = h.max(1e-12);
                (old - (g + lam) / h).max(0.0)
            }
            LossKind::Beta15 => unreachable!("pairing checked above"),
        };
        state.coord_updates += 1;
        if new != old {
            a.col_axpy(j, new - old, &mut state.ax);
            state.x[j] = new;
        }
    }
    Ok(())
}

/// One multiplicative (majorization–minimization) sweep over the active set.
pub fn mu_step(model: &LossModel, state: &mut SolverState, active: &ActiveSet) -> Result<()> {
    if !SolverKind::MultiplicativeUpdate.supports(model.loss()) {
        return Err(Error::UnsupportedPairing {
            solver: "mu",
            loss: model.loss().name(),
        });
    }
    let a = model.matrix();
    let y = model.y();
    let lam = model.lambda();
    let eps = model.epsilon();
    let n1 = a.col_norm1();
    let w: Vec<f64> = state.ax.iter().map(|v| v + eps).collect();
    let factors: Vec<(usize, f64)> = match model.loss() {
        LossKind::KullbackLeibler => {
            let ratio: Vec<f64> = y.iter().zip(&w).map(|(yi, wi)| yi / wi).collect();
            active
                .indices()
                .map(|j| (j, a.col_dot(j, &ratio) / (n1[j] + lam)))
                .collect()
        }
        LossKind::Beta15 => {
            let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let ratio: Vec<f64> = y.iter().zip(&sw).map(|(yi, s)| yi / s).collect();
            active
                .indices()
                .map(|j| (j, a.col_dot(j, &ratio) / (a.col_dot(j, &sw) + lam)))
                .collect()
        }
        _ => unreachable!("pairing checked above"),
    };
    for (j, f) in factors {
        state.x[j] *= f;
        state.coord_updates += 1;
    }
    state.refresh_ax(model, active);
    Ok(())
}

/// Largest second derivative of the scalar loss terms at `z`.
fn max_curvature(model: &LossModel, z: &[f64]) -> f64 {
    let eps = model.epsilon();
    let c = z
        .iter()
        .zip(model.y())
        .map(|(zi, yi)| {
            let w = zi + eps;
            match model.loss() {
                LossKind::Quadratic => 1.0,
                LossKind::Logistic => 0.25,
                LossKind::KullbackLeibler => yi / (w * w),
                LossKind::Beta15 => 0.5 / w.sqrt() + 0.5 * yi / (w * w.sqrt()),
            }
        })
        .fold(0.0, f64::max);
    if c > 0.0 {
        c
    } else {
        1.0
    }
}

/// One proximal gradient step with a Barzilai–Borwein step size and a
/// monotone backtracking safeguard.
pub fn pg_step(model: &LossModel, state: &mut SolverState, active: &ActiveSet) -> Result<()> {
    if !SolverKind::ProximalGradient.supports(model.loss()) {
        return Err(Error::UnsupportedPairing {
            solver: "pg",
            loss: model.loss().name(),
        });
    }
    let a = model.matrix();
    let lam = model.lambda();
    let nonneg = model.is_nonneg();
    let gf = model.grad_f(&state.ax)?;
    let idx: Vec<usize> = active.indices().collect();
    let grad: Vec<f64> = idx.iter().map(|&j| a.col_dot(j, &gf)).collect();
    let x_act: Vec<f64> = idx.iter().map(|&j| state.x[j]).collect();

    let mut eta = match &state.pg.prev {
        None => 1.0 / (a.norm1_times_norm_inf() * max_curvature(model, &state.ax)),
        Some((px, pg)) => {
            let (mut ss, mut sy) = (0.0, 0.0);
            for (k, &j) in idx.iter().enumerate() {
                let s = x_act[k] - px[j];
                ss += s * s;
                sy += s * (grad[k] - pg[j]);
            }
            if sy > 0.0 && ss > 0.0 {
                (ss / sy).clamp(1e-30, 1e30)
            } else {
                state.pg.eta
            }
        }
    };

    let p_old = model.primal_value_ax(&state.x, &state.ax)?;
    let tol = 1e-12 * p_old.abs().max(1.0);
    let mut trial = state.x.clone();
    let mut accepted = None;
    for _ in 0..=MAX_HALVINGS {
        for (k, &j) in idx.iter().enumerate() {
            let v = x_act[k] - eta * grad[k];
            trial[j] = if nonneg {
                (v - eta * lam).max(0.0)
            } else {
                soft_threshold(v, eta * lam)
            };
        }
        state.coord_updates += idx.len() as u64;
        let ax_trial = masked_matvec(a, &trial, active)?;
        let p_new = model.primal_value_ax(&trial, &ax_trial)?;
        if p_new <= p_old + tol {
            accepted = Some(ax_trial);
            break;
        }
        eta *= 0.5;
    }
    let ax_new = accepted.ok_or(Error::LineSearchFailed)?;

    let mut px = state.x.clone();
    let mut pgrad = vec![0.0; state.x.len()];
    for (k, &j) in idx.iter().enumerate() {
        px[j] = x_act[k];
        pgrad[j] = grad[k];
    }
    state.pg.prev = Some((px, pgrad));
    state.pg.eta = eta;
    state.x = trial;
    state.ax = ax_new;
    Ok(())
}

/// Dispatches one step of the chosen solver.
pub fn step(
    model: &LossModel,
    solver: SolverKind,
    state: &mut SolverState,
    active: &ActiveSet,
) -> Result<()> {
    match solver {
        SolverKind::CoordinateDescent => cd_step(model, state, active),
        SolverKind::MultiplicativeUpdate => mu_step(model, state, active),
        SolverKind::ProximalGradient => pg_step(model, state, active),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub gap: f64,
    pub active_count: usize,
    pub radius: Option<f64>,
    pub alpha: Option<f64>,
    pub elapsed_seconds: f64,
    pub coord_updates: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRecord {
    pub iter: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Columns removed by this sphere.
    pub screened: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub gap: f64,
    pub objective: f64,
    pub iterations: usize,
    pub screened_total: usize,
    pub converged: bool,
    pub active: ActiveSet,
    pub coord_updates: u64,
    /// Starting value of every coordinate (nonzero only for MU).
    pub x0: f64,
    pub spheres: Vec<SphereRecord>,
}

impl RunTrace {
    /// `Err(NotConverged)` when the tolerance was not met.
    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                gap: self.gap,
            })
        }
    }
}

/// Runs the baseline solver or one of the three screening algorithms.
pub fn run(model: &LossModel, config: &RunConfig) -> Result<RunTrace> {
    config.validate(model.loss())?;
    let a = model.matrix();
    let n = a.cols();
    let clock = Instant::now();
    let mut active = ActiveSet::full(n);
    let mut state = SolverState::new(model, config.solver);
    let x0 = state.x.first().copied().unwrap_or(0.0);

    let global = model.alpha_global();
    let alpha_fixed = match config.algorithm {
        Algorithm::Baseline => None,
        Algorithm::Dgs => Some(global.ok_or(Error::UnsupportedAlgorithmForLoss(model.loss().name()))?),
        Algorithm::Gdgs => Some(model.alpha_feasible()),
        Algorithm::Rdgs => Some(match config.alpha_init_override {
            Some(AlphaInit::Global) => {
                global.ok_or(Error::UnsupportedAlgorithmForLoss(model.loss().name()))?
            }
            _ => model.alpha_feasible(),
        }),
    };

    let mut rdgs_memory = None;
    if config.algorithm == Algorithm::Rdgs {
        let alpha0 = alpha_fixed.expect("set for rdgs");
        let d0 = model.dual_update(&state.x, &state.ax)?;
        let g0 = certified_gap(
            model.primal_value_ax(&state.x, &state.ax)?,
            model.dual_value(&d0.theta)?,
        )?;
        rdgs_memory = Some((d0.theta, radius_from_gap(g0, alpha0)));
    }

    let mut records = Vec::new();
    let mut spheres = Vec::new();
    let mut converged = false;
    let mut last_theta = Vec::new();
    let mut last_gap = f64::INFINITY;
    let mut last_obj = f64::NAN;
    let mut it = 0;
    while it < config.max_iter {
        it += 1;
        step(model, config.solver, &mut state, &active)?;
        state.iter = it;
        if it % REFRESH_EVERY == 0 {
            state.refresh_ax(model, &active);
        }
        let dual = model.dual_update(&state.x, &state.ax)?;
        let mut primal = model.primal_value_ax(&state.x, &state.ax)?;
        let dval = model.dual_value(&dual.theta)?;
        let mut gap = gap_from_values(primal, dval)?;
        let cert = certified_gap(primal, dval)?;

        let (radius, alpha) = match config.algorithm {
            Algorithm::Baseline => (None, None),
            Algorithm::Dgs | Algorithm::Gdgs => {
                let al = alpha_fixed.expect("set");
                (Some(radius_from_gap(cert, al)), Some(al))
            }
            Algorithm::Rdgs => {
                let (theta_old, r_prev) = rdgs_memory.take().expect("initialized");
                let refined = refine_radius(
                    model,
                    cert,
                    &dual.theta,
                    &theta_old,
                    r_prev,
                    config.eps_r,
                    config.max_inner,
                )?;
                let al0 = alpha_fixed.expect("set");
                let cap = radius_from_gap(cert, al0);
                let (r, al) = if cap < refined.radius {
                    (cap, al0)
                } else {
                    (refined.radius, refined.alpha)
                };
                rdgs_memory = Some((dual.theta.clone(), r));
                (Some(r), Some(al))
            }
        };

        if let Some(r) = radius {
            if it % config.screen_every == 0 {
                let hits = screen_in_place(model, r, &mut active, &dual.col_dots, it);
                let mut moved = false;
                for &j in &hits {
                    if state.x[j] != 0.0 {
                        a.col_axpy(j, -state.x[j], &mut state.ax);
                        state.x[j] = 0.0;
                        moved = true;
                    }
                }
                if moved {
                    primal = model.primal_value_ax(&state.x, &state.ax)?;
                    gap = gap_from_values(primal, dval)?;
                }
                if config.record_spheres {
                    spheres.push(SphereRecord {
                        iter: it,
                        center: dual.theta.clone(),
                        radius: r,
                        screened: hits,
                    });
                }
            }
        }

        records.push(IterRecord {
            iter: it,
            gap,
            active_count: active.count(),
            radius,
            alpha,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
            coord_updates: state.coord_updates,
        });
        last_theta = dual.theta;
        last_gap = gap;
        last_obj = primal;
        if gap < config.eps_gap {
            converged = true;
            break;
        }
    }

    Ok(RunTrace {
        records,
        x: state.x,
        theta: last_theta,
        gap: last_gap,
        objective: last_obj,
        iterations: it,
        screened_total: n - active.count(),
        converged,
        active,
        coord_updates: state.coord_updates,
        x0,
        spheres,
    })
}
