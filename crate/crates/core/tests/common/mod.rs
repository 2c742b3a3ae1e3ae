#![allow(dead_code)]

use gapsafe::data_io::{synth, SynthKind};
use gapsafe::{LossKind, LossModel, ProblemSpec, SolverKind};

pub const EPS: f64 = 1e-6;

pub fn synth_kind(loss: LossKind) -> SynthKind {
    match loss {
        LossKind::Quadratic => SynthKind::Gaussian,
        LossKind::Logistic => SynthKind::Binary,
        LossKind::KullbackLeibler => SynthKind::Count,
        LossKind::Beta15 => SynthKind::PixelMix,
    }
}

pub fn solvers(loss: LossKind) -> Vec<SolverKind> {
    [
        SolverKind::CoordinateDescent,
        SolverKind::MultiplicativeUpdate,
        SolverKind::ProximalGradient,
    ]
    .into_iter()
    .filter(|s| s.supports(loss))
    .collect()
}

/// Synthetic problem at `λ = rel · λ_max`.
pub fn instance(loss: LossKind, m: usize, n: usize, seed: u64, rel: f64) -> LossModel {
    let support = (n / 10).clamp(1, 20);
    let (ds, _) = synth(synth_kind(loss), m, n, support, seed).expect("synth");
    let base = LossModel::new(ProblemSpec::new(loss, ds.y, 1.0, EPS), ds.a).expect("model");
    let lmax = base.lambda_max().expect("lambda_max");
    base.with_lambda(rel * lmax).expect("model at lambda")
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}
