//! Brute-force verifiers: numeric Fenchel conjugates, sampled concavity
//! bounds, finite differences and a reference solver.
//!
//! Everything here re-derives its quantities from the scalar loss terms
//! `fᵢ` directly rather than going through the closed forms in `losses`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::losses::{LossKind, LossModel};
use crate::screening::gap_from_values;

/// Suprema above this are reported as unbounded.
pub const UNBOUNDED_LIMIT: f64 = 1e12;
/// Default number of grid points for `fenchel_numeric`.
pub const DEFAULT_GRID: usize = 10_000;

/// The scalar loss term `fᵢ(z)`, `+∞` outside its domain.
pub fn scalar_loss(loss: LossKind, y: f64, eps: f64, z: f64) -> f64 {
    match loss {
        LossKind::Quadratic => 0.5 * (y - z) * (y - z),
        LossKind::Logistic => {
            let sp = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            sp - y * z
        }
        LossKind::KullbackLeibler => {
            let w = z + eps;
            if w < 0.0 || (w == 0.0 && y > 0.0) {
                f64::INFINITY
            } else if y > 0.0 {
                y * (y / w).ln() + w - y
            } else {
                w
            }
        }
        LossKind::Beta15 => {
            let w = z + eps;
            if w < 0.0 {
                f64::INFINITY
            } else {
                (4.0 / 3.0) * (y.powf(1.5) + 0.5 * w.powf(1.5) - 1.5 * y * w.sqrt())
            }
        }
    }
}

fn domain_lower(loss: LossKind, eps: f64) -> Option<f64> {
    match loss {
        LossKind::Quadratic | LossKind::Logistic => None,
        LossKind::KullbackLeibler | LossKind::Beta15 => Some(-eps),
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `fᵢ*(u) = sup_z z·u − fᵢ(z)` by grid search and golden-section refinement.
pub fn fenchel_numeric(loss: LossKind, y: f64, eps: f64, u: f64, grid: usize) -> Result<f64> {
    let obj = |z: f64| {
        let f = scalar_loss(loss, y, eps, z);
        if f.is_infinite() {
            f64::NEG_INFINITY
        } else {
            z * u - f
        }
    };
    let span = 10.0 * (y.abs() + eps + 1.0);
    let lower = domain_lower(loss, eps);
    let mut lo = lower.unwrap_or(-span);
    let mut hi = span;

    let mut pts: Vec<f64> = Vec::with_capacity(grid + 2);
    let half = (grid / 2).max(2);
    for k in 0..half {
        pts.push(lo + (hi - lo) * k as f64 / (half - 1) as f64);
    }
    let width = hi - lo;
    for k in 0..half {
        // log-spaced offsets from the lower end, 1e-16 up to the span
        let e = -16.0 + (width.log10() + 16.0) * k as f64 / (half - 1) as f64;
        let off = 10f64.powf(e);
        pts.push(lo + off);
        if lower.is_none() {
            pts.push(hi - off);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    pts.dedup();

    loop {
        let (k, best) = pts
            .iter()
            .enumerate()
            .map(|(k, &z)| (k, obj(z)))
            .fold((0, f64::NEG_INFINITY), |acc, v| if v.1 > acc.1 { v } else { acc });
        if best > UNBOUNDED_LIMIT {
            return Err(Error::Unbounded);
        }
        let at_top = k == pts.len() - 1;
        let at_bottom = k == 0 && lower.is_none();
        if (at_top || at_bottom) && hi.abs().max(lo.abs()) < 1e14 {
            if at_top {
                let new_hi = hi * 10.0;
                pts = (0..=1000)
                    .map(|s| hi + (new_hi - hi) * s as f64 / 1000.0)
                    .collect();
                pts.insert(0, pts[0] - (new_hi - hi) / 1000.0);
                hi = new_hi;
            } else {
                let new_lo = lo * 10.0;
                pts = (0..=1000)
                    .map(|s| new_lo + (lo - new_lo) * s as f64 / 1000.0)
                    .collect();
                pts.push(lo + (lo - new_lo) / 1000.0);
                lo = new_lo;
            }
            continue;
        }
        let a = if k == 0 { pts[0] } else { pts[k - 1] };
        let b = if k + 1 < pts.len() { pts[k + 1] } else { pts[k] };
        let (_, refined) = golden_max(&obj, a, b);
        return Ok(best.max(refined));
    }
}

/// `min over i ∉ I of −max over samples of σᵢ(θᵢ)`, where `I` are the
/// KL pinned coordinates. An upper estimate of the true bound on the set
/// the sampler draws from.
pub fn alpha_bruteforce<F>(model: &LossModel, mut sampler: F, samples: usize) -> Result<f64>
where
    F: FnMut() -> Option<Vec<f64>>,
{
    let m = model.y().len();
    let pinned = model.loss() == LossKind::KullbackLeibler;
    let mut worst = vec![f64::NEG_INFINITY; m];
    for _ in 0..samples {
        let Some(theta) = sampler() else { continue };
        for i in 0..m {
            if pinned && model.in_i0(i) {
                continue;
            }
            let s = model.sigma(i, theta[i])?;
            if s > worst[i] {
                worst[i] = s;
            }
        }
    }
    Ok((0..m)
        .filter(|&i| !(pinned && model.in_i0(i)))
        .map(|i| -worst[i])
        .fold(f64::INFINITY, f64::min))
}

/// Seeded samplers for the sets on which the bounds are certified.
pub struct SetSampler<'a> {
    model: &'a LossModel,
    rng: ChaCha8Rng,
    target: Target,
    lo: Vec<f64>,
    hi: Vec<f64>,
    counter: usize,
}

enum Target {
    Domain,
    Feasible,
    Ball { center: Vec<f64>, radius: f64 },
}

impl<'a> SetSampler<'a> {
    fn new(model: &'a LossModel, seed: u64, target: Target) -> Self {
        let lam = model.lambda();
        let y = model.y();
        let m = y.len();
        let a = model.matrix();
        let mut lo = vec![0.0; m];
        let mut hi = vec![0.0; m];
        for i in 0..m {
            let (l, h) = match model.loss() {
                LossKind::Quadratic => (-5.0 / lam - 5.0, 5.0 / lam + 5.0),
                LossKind::Logistic => ((y[i] - 1.0) / lam, y[i] / lam),
                LossKind::KullbackLeibler => (-1.0 / lam, 5.0 / lam + 5.0),
                LossKind::Beta15 => {
                    let u = model.s0().theta_ub[i];
                    (u - 5.0 / lam - 5.0, u)
                }
            };
            lo[i] = l;
            hi[i] = h;
        }
        if let (Target::Feasible, LossKind::KullbackLeibler) = (&target, model.loss()) {
            // 1 + λθᵢ ≤ (λ + ‖aⱼ‖₁)/aᵢⱼ for every j touching row i.
            let n1 = a.col_norm1();
            let mut row_min = vec![f64::INFINITY; m];
            for j in 0..a.cols() {
                a.for_each_in_col(j, |i, v| row_min[i] = row_min[i].min((lam + n1[j]) / v));
            }
            for i in 0..m {
                hi[i] = (row_min[i] - 1.0) / lam;
            }
        }
        SetSampler {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            target,
            lo,
            hi,
            counter: 0,
        }
    }

    /// Points of `dom D_λ ∩ S₀` (a bounded box of it).
    pub fn domain(model: &'a LossModel, seed: u64) -> Self {
        Self::new(model, seed, Target::Domain)
    }

    /// Points of `Δ_A ∩ S₀`.
    pub fn feasible(model: &'a LossModel, seed: u64) -> Self {
        Self::new(model, seed, Target::Feasible)
    }

    /// Points of `B(center, radius) ∩ S₀ ∩ dom D_λ`.
    pub fn ball(model: &'a LossModel, seed: u64, center: Vec<f64>, radius: f64) -> Self {
        Self::new(model, seed, Target::Ball { center, radius })
    }

    fn pin(&self, theta: &mut [f64]) {
        if self.model.loss() == LossKind::KullbackLeibler {
            let p = -1.0 / self.model.lambda();
            for &i in &self.model.s0().i0 {
                theta[i] = p;
            }
        }
    }

    fn box_point(&mut self) -> Vec<f64> {
        let m = self.lo.len();
        let mut t: Vec<f64> = (0..m)
            .map(|i| self.rng.random_range(self.lo[i]..=self.hi[i]))
            .collect();
        self.pin(&mut t);
        t
    }

    fn in_feasible(&self, theta: &[f64]) -> bool {
        self.model.in_dual_domain(theta)
            && self.model.check_s0(theta).is_ok()
            && self.model.dual_norm(theta).map(|v| v <= 1.0).unwrap_or(false)
    }

    /// Axis-aligned extreme point along row `i`: others at their lowest
    /// admissible value, `θᵢ` as large (or small) as the set allows.
    fn extreme(&mut self, i: usize, up: bool) -> Option<Vec<f64>> {
        let m = self.lo.len();
        let mut t = match self.model.loss() {
            LossKind::KullbackLeibler | LossKind::Beta15 => self.lo.clone(),
            _ => vec![0.0; m],
        };
        self.pin(&mut t);
        let (mut a, mut b) = if up {
            (t[i], self.hi[i])
        } else {
            (self.lo[i], t[i])
        };
        // Bisection on feasibility of the moving coordinate.
        let probe = |v: f64, t: &mut Vec<f64>, s: &Self| {
            t[i] = v;
            s.in_feasible(t)
        };
        let target = if up { b } else { a };
        if probe(target, &mut t, self) {
            return Some(t);
        }
        let start = if up { a } else { b };
        if !probe(start, &mut t, self) {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let ok = probe(mid, &mut t, self);
            if ok == up {
                a = mid;
            } else {
                b = mid;
            }
        }
        t[i] = if up { a } else { b };
        Some(t)
    }

    pub fn draw(&mut self) -> Option<Vec<f64>> {
        self.counter += 1;
        let k = self.counter;
        let m = self.lo.len();
        match &self.target {
            Target::Domain => Some(self.box_point()),
            Target::Feasible => {
                if k <= 2 * m {
                    return self.extreme((k - 1) / 2, k % 2 == 1);
                }
                let mut t = self.box_point();
                if k.is_multiple_of(2) && self.in_feasible(&t) {
                    return Some(t);
                }
                // contract into Δ_A; the domain and S₀ are stable under it
                let s = self.model.dual_norm(&t).ok()?.max(1.0);
                let p = -1.0 / self.model.lambda();
                for (i, v) in t.iter_mut().enumerate() {
                    if self.model.loss() == LossKind::KullbackLeibler && self.model.in_i0(i) {
                        *v = p;
                    } else {
                        *v /= s;
                    }
                }
                if self.model.loss() == LossKind::KullbackLeibler {
                    // pinned rows break pure scaling; fall back to rejection
                    if !self.in_feasible(&t) {
                        return None;
                    }
                }
                if self.model.loss() == LossKind::Beta15 {
                    for (v, u) in t.iter_mut().zip(&self.model.s0().theta_ub) {
                        *v = v.min(*u);
                    }
                }
                if self.in_feasible(&t) {
                    Some(t)
                } else {
                    None
                }
            }
            Target::Ball { center, radius } => {
                let (center, radius) = (center.clone(), *radius);
                let free: Vec<usize> = (0..m)
                    .filter(|&i| {
                        !(self.model.loss() == LossKind::KullbackLeibler && self.model.in_i0(i))
                    })
                    .collect();
                let mut t = center.clone();
                if k <= 2 * free.len() {
                    let i = free[(k - 1) / 2];
                    t[i] += if k % 2 == 1 { radius } else { -radius };
                } else {
                    let dir: Vec<f64> = free.iter().map(|_| self.rng.sample(StandardNormal)).collect();
                    let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
                    let u: f64 = self.rng.random();
                    let rr = radius * u.powf(1.0 / free.len() as f64);
                    for (d, &i) in dir.iter().zip(&free) {
                        t[i] += rr * d / norm;
                    }
                }
                if self.model.loss() == LossKind::Beta15 {
                    for (v, u) in t.iter_mut().zip(&self.model.s0().theta_ub) {
                        *v = v.min(*u);
                    }
                }
                if self.model.in_dual_domain(&t) {
                    Some(t)
                } else {
                    None
                }
            }
        }
    }
}

/// Central differences of `F` with relative step `h`.
pub fn fd_gradient(model: &LossModel, z: &[f64], h: f64) -> Result<Vec<f64>> {
    let loss = model.loss();
    let eps = model.epsilon();
    let mut out = Vec::with_capacity(z.len());
    for (i, (&zi, &yi)) in z.iter().zip(model.y()).enumerate() {
        let step = h * zi.abs().max(1.0);
        let fp = scalar_loss(loss, yi, eps, zi + step);
        let fm = scalar_loss(loss, yi, eps, zi - step);
        if !fp.is_finite() || !fm.is_finite() || (domain_lower(loss, eps).is_some() && zi - step <= -eps) {
            return Err(Error::DomainViolation(i));
        }
        out.push((fp - fm) / (2.0 * step));
    }
    Ok(out)
}

fn scalar_derivs(loss: LossKind, y: f64, eps: f64, z: f64) -> (f64, f64) {
    match loss {
        LossKind::Quadratic => (z - y, 1.0),
        LossKind::Logistic => {
            let p = if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let e = z.exp();
                e / (1.0 + e)
            };
            (p - y, p * (1.0 - p))
        }
        LossKind::KullbackLeibler => {
            let w = z + eps;
            (1.0 - y / w, y / (w * w))
        }
        LossKind::Beta15 => {
            let w = z + eps;
            let s = w.sqrt();
            (s - y / s, 0.5 / s + 0.5 * y / (w * s))
        }
    }
}

/// Exact minimizer over coordinate `j` of `F(Ax) + λ|x_j|`, the other
/// coordinates fixed. `rows` lists the column's nonzeros, `ax` the current
/// product. Works on the derivative only, so it stays accurate where
/// objective differences drown in rounding.
fn coordinate_minimizer(
    model: &LossModel,
    rows: &[(usize, f64)],
    ax: &[f64],
    old: f64,
    nonneg: bool,
) -> f64 {
    let (loss, y, eps, lam) = (model.loss(), model.y(), model.epsilon(), model.lambda());
    let derivs = |t: f64| -> (f64, f64) {
        let (mut g, mut h) = (0.0, 0.0);
        for &(i, v) in rows {
            let (d1, d2) = scalar_derivs(loss, y[i], eps, ax[i] + (t - old) * v);
            g += v * d1;
            h += v * v * d2;
        }
        (g, h)
    };
    let (g0, _) = derivs(0.0);
    let dir = if g0 < -lam {
        1.0
    } else if !nonneg && g0 > lam {
        -1.0
    } else {
        return 0.0;
    };
    // Root in u > 0 of dir·F'(dir·u) + λ, which increases with u.
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut u = (dir * old).max(0.0);
    for _ in 0..200 {
        let (g, h) = derivs(dir * u);
        let val = dir * g + lam;
        if val == 0.0 {
            return dir * u;
        }
        if val < 0.0 {
            lo = lo.max(u);
        } else {
            hi = hi.min(u);
        }
        if hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let newton = if h > 0.0 { u - val / h } else { f64::NAN };
        let next = if newton > lo && newton < hi {
            newton
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            (2.0 * lo).max(1e-12)
        };
        if (next - u).abs() <= 1e-15 * u.max(1e-300) {
            u = next;
            break;
        }
        u = next;
    }
    dir * u.clamp(lo, if hi.is_finite() { hi } else { u.max(lo) })
}

fn gap_at(model: &LossModel, x: &[f64], ax: &[f64]) -> Result<f64> {
    let dual = model.dual_update(x, ax)?;
    gap_from_values(model.primal_value_ax(x, ax)?, model.dual_value(&dual.theta)?)
}

/// Newton step on the support with signs held fixed; coordinates that would
/// change sign are zeroed. Returns the new point only if it lowers the gap.
fn polish_on_support(
    model: &LossModel,
    x: &[f64],
    ax: &[f64],
    gap: f64,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let a = model.matrix();
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    let k = support.len();
    if k == 0 || k > 2 * a.rows() {
        return Ok(None);
    }
    let (loss, y, eps, lam) = (model.loss(), model.y(), model.epsilon(), model.lambda());
    let mut d1 = vec![0.0; a.rows()];
    let mut d2 = vec![0.0; a.rows()];
    for i in 0..a.rows() {
        (d1[i], d2[i]) = scalar_derivs(loss, y[i], eps, ax[i]);
    }
    let cols: Vec<Vec<(usize, f64)>> = support
        .iter()
        .map(|&j| {
            let mut c = Vec::new();
            a.for_each_in_col(j, |i, v| c.push((i, v)));
            c
        })
        .collect();
    let mut h = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut g = nalgebra::DVector::<f64>::zeros(k);
    let mut dense = vec![0.0; a.rows()];
    for p in 0..k {
        g[p] = cols[p].iter().map(|&(i, v)| v * d1[i]).sum::<f64>() + lam * x[support[p]].signum();
        for &(i, v) in &cols[p] {
            dense[i] = v * d2[i];
        }
        for q in 0..=p {
            let hpq: f64 = cols[q].iter().map(|&(i, v)| v * dense[i]).sum();
            h[(p, q)] = hpq;
            h[(q, p)] = hpq;
        }
        for &(i, _) in &cols[p] {
            dense[i] = 0.0;
        }
    }
    // Pseudo-inverse Newton on the range of H; along its null space F is
    // flat to second order and λ‖x‖₁ decreases linearly, so walk until the
    // first coordinate reaches zero.
    let eig = nalgebra::SymmetricEigen::new(h);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut newton = nalgebra::DVector::<f64>::zeros(k);
    let mut null = nalgebra::DVector::<f64>::zeros(k);
    for (e, &mu) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(e);
        let c = v.dot(&g);
        if mu > 1e-10 * top {
            newton -= v * (c / mu);
        } else {
            null += v * c;
        }
    }
    let mut walk = 0.0;
    let mut hit = None;
    if null.norm() > 1e-14 * g.norm() {
        for (p, &j) in support.iter().enumerate() {
            let ratio = x[j] / null[p];
            if ratio > 0.0 && hit.is_none_or(|(r, _)| ratio < r) {
                hit = Some((ratio, p));
            }
        }
        if let Some((r, _)) = hit {
            walk = r;
        }
    }
    let mut t = 1.0;
    for _ in 0..30 {
        let mut trial = x.to_vec();
        for (p, &j) in support.iter().enumerate() {
            let v = if hit.is_some_and(|(_, q)| q == p) && t == 1.0 {
                0.0
            } else {
                x[j] + t * (newton[p] - walk * null[p])
            };
            // Coordinates crossing zero leave the support.
            trial[j] = if v.signum() == x[j].signum() { v } else { 0.0 };
        }
        let tax = a.matvec(&trial)?;
        if model.f_value(&tax).map(f64::is_finite).unwrap_or(false) {
            if let Ok(gt) = gap_at(model, &trial, &tax) {
                if gt < gap {
                    return Ok(Some((trial, tax)));
                }
            }
        }
        t *= 0.5;
    }
    Ok(None)
}

/// High-accuracy solution by exact cyclic coordinate minimization, with
/// Newton polishing on the support, run until the duality gap is at most
/// `tol`, or at the resolution of `P` itself (`8·ε_mach·|P|`) when that is
/// larger. Returns `(x, θ, gap)`.
pub fn reference_solve(
    model: &LossModel,
    tol: f64,
    max_sweeps: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let a = model.matrix();
    let nonneg = model.is_nonneg();
    let (m, n) = (a.rows(), a.cols());
    let mut x = vec![0.0; n];
    let mut ax = vec![0.0; m];
    let mut rows: Vec<(usize, f64)> = Vec::with_capacity(m);
    let mut last_gap = f64::INFINITY;
    for sweep in 0..max_sweeps {
        for j in 0..n {
            rows.clear();
            a.for_each_in_col(j, |i, v| rows.push((i, v)));
            let old = x[j];
            let new = coordinate_minimizer(model, &rows, &ax, old, nonneg);
            if new == old {
                continue;
            }
            for &(i, v) in &rows {
                ax[i] += (new - old) * v;
            }
            x[j] = new;
        }
        if sweep % 10 == 9 {
            ax = a.matvec(&x)?;
            let g = gap_at(model, &x, &ax)?;
            if g > tol {
                if let Some((px, pax)) = polish_on_support(model, &x, &ax, g)? {
                    x = px;
                    ax = pax;
                }
            }
        }
        let dual = model.dual_update(&x, &ax)?;
        let p = model.primal_value_ax(&x, &ax)?;
        let gap = gap_from_values(p, model.dual_value(&dual.theta)?)?;
        last_gap = gap;
        if gap <= tol.max(8.0 * f64::EPSILON * p.abs()) {
            return Ok((x, dual.theta, gap));
        }
    }
    Err(Error::NotConverged {
        iterations: max_sweeps,
        gap: last_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DesignMatrix;
    use crate::losses::ProblemSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn conjugate_examples() {
        let v = fenchel_numeric(LossKind::Quadratic, 3.0, 0.0, 1.0, DEFAULT_GRID).unwrap();
        assert_abs_diff_eq!(v, 3.5, epsilon = 1e-8);
        let v = fenchel_numeric(LossKind::KullbackLeibler, 0.0, 1.0, -2.0, DEFAULT_GRID).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-8);
        assert!(matches!(
            fenchel_numeric(LossKind::Logistic, 1.0, 0.0, 1.0, DEFAULT_GRID),
            Err(Error::Unbounded)
        ));
    }

    #[test]
    fn fd_examples() {
        let a = DesignMatrix::from_rows(&[vec![1.0]]).unwrap();
        let kl = LossModel::new(
            ProblemSpec::new(LossKind::KullbackLeibler, vec![2.0], 1.0, 1.0),
            a.clone(),
        )
        .unwrap();
        assert_abs_diff_eq!(fd_gradient(&kl, &[1.0], 1e-6).unwrap()[0], 0.0, epsilon = 1e-8);
        let lg = LossModel::new(ProblemSpec::new(LossKind::Logistic, vec![0.0], 1.0, 0.0), a.clone())
            .unwrap();
        assert_abs_diff_eq!(fd_gradient(&lg, &[0.0], 1e-6).unwrap()[0], 0.5, epsilon = 1e-8);
        let q = LossModel::new(ProblemSpec::new(LossKind::Quadratic, vec![4.0], 1.0, 0.0), a).unwrap();
        assert_abs_diff_eq!(fd_gradient(&q, &[4.0], 1e-6).unwrap()[0], 0.0, epsilon = 1e-8);
        assert!(fd_gradient(&kl, &[-0.9999999], 1e-6).is_err());
    }

    #[test]
    fn reference_toy_lasso() {
        let a = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = LossModel::new(ProblemSpec::new(LossKind::Quadratic, vec![3.0, 0.1], 1.0, 0.0), a)
            .unwrap();
        let (x, theta, gap) = reference_solve(&m, 1e-12, 100).unwrap();
        assert_eq!(x, vec![2.0, 0.0]);
        assert_abs_diff_eq!(theta[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(theta[1], 0.1, epsilon = 1e-12);
        assert!(gap <= 1e-12);
    }

    #[test]
    fn bruteforce_examples() {
        let a = DesignMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q = LossModel::new(ProblemSpec::new(LossKind::Quadratic, vec![1.0, 2.0], 0.7, 0.0), a.clone())
            .unwrap();
        let mut s = SetSampler::domain(&q, 1);
        assert_abs_diff_eq!(alpha_bruteforce(&q, || s.draw(), 100).unwrap(), 0.49, epsilon = 1e-15);

        let kl = LossModel::new(
            ProblemSpec::new(LossKind::KullbackLeibler, vec![1.0, 1.0], 1.0, 1e-6),
            a.clone(),
        )
        .unwrap();
        let mut s = SetSampler::ball(&kl, 2, vec![0.0, 0.0], 1.0);
        let est = alpha_bruteforce(&kl, || s.draw(), 1000).unwrap();
        assert_abs_diff_eq!(est, 0.25, epsilon = 1e-12);

        let lg = LossModel::new(ProblemSpec::new(LossKind::Logistic, vec![1.0, 0.0], 0.1, 0.0), a)
            .unwrap();
        let mut s = SetSampler::feasible(&lg, 3);
        let est = alpha_bruteforce(&lg, || s.draw(), 10_000).unwrap();
        assert!(est >= 0.04 / 0.36 - 1e-9);
        assert_abs_diff_eq!(est, 0.04 / 0.36, epsilon = 1e-9);
    }
}
