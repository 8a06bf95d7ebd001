//! Truncated-Fock-space simulation of gate sequences and the scaling
//! experiments (theta sweep per rotation, m sweep for full QFT targets)
//! with log-log slope fitting.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::decompose::{decompose, DecompositionPlan, PlanStep, DEFAULT_PRUNE_TOL, DEFAULT_UNITARITY_TOL};
use crate::fockops::{
    displacement_frame, fidelity, givens_embed, ComplexMatrix, DisplacementFrame, C64,
};
use crate::synth::{expand_givens, phi, sequence_stats, synthesize, Gate, GateSequence, SynthesisOptions};
use crate::targets::qft;
use crate::{Error, Result};

/// Reporting floor for infidelities on log scales. Raw values are kept in
/// the records; only display output clamps.
pub const CLAMP_FLOOR: f64 = 1e-15;

pub fn clamp_for_report(eps: f64) -> f64 {
    eps.max(CLAMP_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    GivensTheta,
    QftM,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::GivensTheta => "givens_theta",
            Experiment::QftM => "qft_m",
        }
    }
}

/// One (parameters -> infidelity, gate count, timing) data point.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub experiment: Experiment,
    pub dim: usize,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub theta: Option<f64>,
    pub infidelity: f64,
    pub gate_count: usize,
    pub compile_seconds: f64,
    pub simulate_seconds: f64,
}

/// Least-squares line on a log-log window.
#[derive(Debug, Clone, Copy)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub domain: (f64, f64),
}

/// Which record field supplies the x coordinate of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XField {
    Theta,
    M,
}

/// Product of the gate sequence in the truncated Fock space, first gate
/// applied first (rightmost factor). Displacements go through the
/// eigenbasis of the generator: two dense matrix products each; SNAPs are
/// diagonal scalings.
pub fn simulate(seq: &GateSequence) -> Result<ComplexMatrix> {
    let frame = displacement_frame(seq.dim)?;
    simulate_with_frame(seq, &frame)
}

pub fn simulate_with_frame(seq: &GateSequence, frame: &DisplacementFrame) -> Result<ComplexMatrix> {
    if frame.dim() != seq.dim {
        return Err(Error::DimensionMismatch(frame.dim(), seq.dim));
    }
    let dim = seq.dim;
    let mut acc = ComplexMatrix::identity(dim);
    for gate in &seq.gates {
        match gate {
            Gate::Snap(phases) => {
                if phases.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "snap gate has {} phases in a dim-{dim} sequence",
                        phases.len()
                    )));
                }
                let diag: Vec<C64> =
                    phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
                acc.scale_rows(&diag);
            }
            Gate::Disp(alpha) => {
                let mut tmp = frame.basis_dagger().mul(&acc);
                tmp.scale_rows(&frame.exp_diag(*alpha));
                acc = frame.basis().mul(&tmp);
            }
        }
    }
    Ok(acc)
}

/// `1 - fidelity(simulate(seq), target)`; raw value, not clamped.
pub fn infidelity_vs_target(seq: &GateSequence, target: &ComplexMatrix) -> Result<f64> {
    if seq.dim != target.dim() {
        return Err(Error::DimensionMismatch(seq.dim, target.dim()));
    }
    let u = simulate(seq)?;
    Ok(1.0 - fidelity(&u, target)?)
}

/// Fast executor for a lowered plan: each Givens step's m-fold block is
/// built once in the displacement eigenbasis and raised to the m-th power
/// by repeated squaring, with the `Q^dag R_pi(k) Q` transforms cached per
/// level. Operator product is identical to simulating the unmerged
/// synthesized sequence (up to float roundoff).
pub fn simulate_lowered_plan(
    plan: &DecompositionPlan,
    m: usize,
    frame: &DisplacementFrame,
) -> Result<ComplexMatrix> {
    if frame.dim() != plan.dim {
        return Err(Error::DimensionMismatch(frame.dim(), plan.dim));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("split factor m must be >= 1".into()));
    }
    let dim = plan.dim;
    let q = frame.basis();
    let qd = frame.basis_dagger();
    let mut rk_cache: HashMap<usize, ComplexMatrix> = HashMap::new();
    let mut acc = ComplexMatrix::identity(dim);

    for step in &plan.steps {
        match step {
            PlanStep::Snap(phases) => {
                let diag: Vec<C64> =
                    phases.iter().map(|&p| C64::from_polar(1.0, p)).collect();
                acc.scale_rows(&diag);
            }
            PlanStep::Givens { k, theta } => {
                let mk = rk_cache.entry(*k).or_insert_with(|| {
                    // Q^dag R_pi(k) Q with R a sign diagonal
                    let mut rq = q.clone();
                    let signs: Vec<C64> = (0..dim)
                        .map(|i| if i <= *k { C64::new(-1.0, 0.0) } else { C64::new(1.0, 0.0) })
                        .collect();
                    rq.scale_rows(&signs);
                    qd.mul(&rq)
                });
                let alpha = phi(*theta / m as f64, *k);
                let ea = frame.exp_diag(alpha);
                let eb = frame.exp_diag(-2.0 * alpha);
                // eigenbasis block E_a M E_b M E_a
                let mut inner = mk.clone();
                inner.scale_rows(&eb);
                let mut block = mk.mul(&inner);
                block.scale_rows(&ea);
                block.scale_cols(&ea);
                let powered = mat_pow(&block, m);
                acc = q.mul(&powered.mul(&qd.mul(&acc)));
            }
        }
    }
    Ok(acc)
}

fn mat_pow(m: &ComplexMatrix, e: usize) -> ComplexMatrix {
    debug_assert!(e >= 1);
    let mut result: Option<ComplexMatrix> = None;
    let mut base = m.clone();
    let mut e = e;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r.mul(&base),
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = base.mul(&base);
    }
    result.unwrap()
}

/// Infidelity of `V_k(phi(theta))` against the embedded Givens rotation,
/// over a grid of levels and angles.
pub fn sweep_givens(dim: usize, k_list: &[usize], theta_list: &[f64]) -> Result<Vec<SweepRecord>> {
    for &k in k_list {
        if k + 3 > dim {
            return Err(Error::TruncationRisk(format!(
                "level {k} too close to the truncation boundary at dim {dim} (need k <= dim-3)"
            )));
        }
    }
    let frame = displacement_frame(dim)?;
    let points: Vec<(usize, f64)> = k_list
        .iter()
        .flat_map(|&k| theta_list.iter().map(move |&t| (k, t)))
        .collect();
    points
        .par_iter()
        .map(|&(k, theta)| {
            let t0 = Instant::now();
            let seq = expand_givens(dim, k, theta, 1)?;
            let compile_seconds = t0.elapsed().as_secs_f64();
            let t1 = Instant::now();
            let u = simulate_with_frame(&seq, &frame)?;
            let target = givens_embed(dim, k, theta)?;
            let infidelity = 1.0 - fidelity(&u, &target)?;
            let simulate_seconds = t1.elapsed().as_secs_f64();
            Ok(SweepRecord {
                experiment: Experiment::GivensTheta,
                dim,
                n: None,
                k: Some(k),
                m: None,
                theta: Some(theta),
                infidelity,
                gate_count: seq.len(),
                compile_seconds,
                simulate_seconds,
            })
        })
        .collect()
}

/// Compile the embedded QFT at each split factor and record the full-gate
/// infidelity, merged gate count, and timings.
pub fn sweep_qft(n: usize, dim: usize, m_list: &[usize]) -> Result<Vec<SweepRecord>> {
    if n >= dim {
        return Err(Error::InvalidArgument(format!(
            "need N < dim to leave guard states (got N={n}, dim={dim})"
        )));
    }
    let frame = displacement_frame(dim)?;
    let target = qft(n, dim)?;
    m_list
        .par_iter()
        .map(|&m| {
            let t0 = Instant::now();
            let plan = decompose(&target, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL)?;
            let seq = synthesize(&plan, &SynthesisOptions { m, ..Default::default() })?;
            let compile_seconds = t0.elapsed().as_secs_f64();
            let gate_count = sequence_stats(&seq).gate_count;
            drop(seq);
            let t1 = Instant::now();
            let u = simulate_lowered_plan(&plan, m, &frame)?;
            let infidelity = 1.0 - fidelity(&u, &target)?;
            let simulate_seconds = t1.elapsed().as_secs_f64();
            Ok(SweepRecord {
                experiment: Experiment::QftM,
                dim,
                n: Some(n),
                k: None,
                m: Some(m),
                theta: None,
                infidelity,
                gate_count,
                compile_seconds,
                simulate_seconds,
            })
        })
        .collect()
}

/// Ordinary least squares on `(log x, log infidelity)` for records whose x
/// lies inside `window`. Clamped points (infidelity <= 1e-14) are
/// excluded so the floor does not bias slopes.
pub fn fit_slope(records: &[SweepRecord], x_field: XField, window: (f64, f64)) -> Result<SlopeFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for r in records {
        let x = match x_field {
            XField::Theta => match r.theta {
                Some(t) => t,
                None => continue,
            },
            XField::M => match r.m {
                Some(m) => m as f64,
                None => continue,
            },
        };
        if x <= 0.0 || x < window.0 || x > window.1 {
            continue;
        }
        if r.infidelity <= 1e-14 {
            continue;
        }
        xs.push(x.ln());
        ys.push(r.infidelity.ln());
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 unclamped points in the window, found {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("degenerate x range".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let xmin = xs.iter().cloned().fold(f64::INFINITY, f64::min).exp();
    let xmax = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    Ok(SlopeFit { slope, intercept, r_squared, domain: (xmin, xmax) })
}

/// Log-spaced grid of `count` points over `[lo, hi]` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (llo + (lhi - llo) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockops::displacement;
    use crate::targets::haar_random;

    #[test]
    fn empty_sequence_is_identity() {
        let seq = GateSequence::empty(5);
        let u = simulate(&seq).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(5)) <= 1e-14);
    }

    #[test]
    fn single_displacement_dim2() {
        let seq = GateSequence { dim: 2, gates: vec![Gate::Disp(0.3)] };
        let u = simulate(&seq).unwrap();
        let expect = givens_embed(2, 0, 0.3).unwrap();
        assert!(u.max_abs_diff(&expect) <= 1e-13);
    }

    #[test]
    fn tiny_theta_block_is_nearly_exact() {
        let seq = expand_givens(64, 0, 1e-4, 1).unwrap();
        let u = simulate(&seq).unwrap();
        let target = givens_embed(64, 0, 1e-4).unwrap();
        let eps = 1.0 - fidelity(&u, &target).unwrap();
        assert!(eps <= 1e-12, "eps {eps}");
    }

    #[test]
    fn simulation_composes() {
        let frame = displacement_frame(8).unwrap();
        let s1 = expand_givens(8, 1, 0.4, 1).unwrap();
        let s2 = expand_givens(8, 3, 0.9, 2).unwrap();
        let mut gates = s1.gates.clone();
        gates.extend(s2.gates.clone());
        let joined = GateSequence { dim: 8, gates };
        let whole = simulate_with_frame(&joined, &frame).unwrap();
        let parts = simulate_with_frame(&s2, &frame)
            .unwrap()
            .mul(&simulate_with_frame(&s1, &frame).unwrap());
        assert!(whole.max_abs_diff(&parts) <= 1e-12);
    }

    #[test]
    fn infidelity_edges() {
        let frame = displacement_frame(6).unwrap();
        let seq = GateSequence { dim: 6, gates: vec![Gate::Disp(0.7)] };
        let target = displacement(&frame, 0.7);
        let eps = infidelity_vs_target(&seq, &target).unwrap();
        assert!(eps.abs() <= 1e-13);
        assert_eq!(clamp_for_report(eps.max(0.0)), CLAMP_FLOOR);

        // identity sequence against a QFT target is far off
        let t = qft(5, 6).unwrap();
        let eps = infidelity_vs_target(&GateSequence::empty(6), &t).unwrap();
        assert!(eps > 0.5);

        let bad = ComplexMatrix::identity(4);
        assert!(infidelity_vs_target(&seq, &bad).is_err());
    }

    #[test]
    fn lowered_plan_executor_matches_simulate() {
        let dim = 16;
        let u = haar_random(dim, 2).unwrap();
        let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
        let frame = displacement_frame(dim).unwrap();
        for m in [1usize, 3, 4] {
            let seq =
                synthesize(&plan, &SynthesisOptions { m, ..Default::default() }).unwrap();
            let direct = simulate_with_frame(&seq, &frame).unwrap();
            let fast = simulate_lowered_plan(&plan, m, &frame).unwrap();
            assert!(direct.max_abs_diff(&fast) <= 1e-11, "m {m}");
        }
    }

    #[test]
    fn sweep_givens_shapes_and_zero_theta() {
        let thetas = [0.0, 0.1, 0.3];
        let recs = sweep_givens(16, &[0, 4], &thetas).unwrap();
        assert_eq!(recs.len(), 6);
        for r in &recs {
            assert!(r.infidelity <= 1.0 + 1e-12);
            if r.theta == Some(0.0) {
                assert!(r.infidelity.abs() <= 1e-13);
            }
            assert_eq!(r.gate_count, 5);
        }
        // deterministic ordering: k-major, theta-minor
        assert_eq!(recs[0].k, Some(0));
        assert_eq!(recs[3].k, Some(4));
        assert!(matches!(
            sweep_givens(16, &[14], &thetas),
            Err(Error::TruncationRisk(_))
        ));
    }

    #[test]
    fn sweep_qft_monotone_and_linear_gate_growth() {
        let recs = sweep_qft(6, 8, &[1, 2, 4]).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs[0].infidelity > recs[1].infidelity);
        // merged gate count grows linearly in m
        let g1 = recs[0].gate_count as f64;
        let g4 = recs[2].gate_count as f64;
        assert!(g4 / g1 > 3.0 && g4 / g1 < 4.5);
        assert!(matches!(sweep_qft(8, 8, &[1]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn fit_slope_exact_power_laws() {
        let mk = |x: f64, eps: f64| SweepRecord {
            experiment: Experiment::GivensTheta,
            dim: 8,
            n: None,
            k: Some(0),
            m: None,
            theta: Some(x),
            infidelity: eps,
            gate_count: 5,
            compile_seconds: 0.0,
            simulate_seconds: 0.0,
        };
        let recs: Vec<_> = log_spaced(0.01, 1.0, 10)
            .into_iter()
            .map(|x| mk(x, x.powi(6)))
            .collect();
        let fit = fit_slope(&recs, XField::Theta, (0.005, 2.0)).unwrap();
        assert!((fit.slope - 6.0).abs() <= 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);

        let mk_m = |m: usize, eps: f64| SweepRecord {
            experiment: Experiment::QftM,
            dim: 8,
            n: Some(6),
            k: None,
            m: Some(m),
            theta: None,
            infidelity: eps,
            gate_count: 0,
            compile_seconds: 0.0,
            simulate_seconds: 0.0,
        };
        let recs: Vec<_> = [1usize, 2, 4, 8, 16]
            .iter()
            .map(|&m| mk_m(m, 3.0 * (m as f64).powi(-4)))
            .collect();
        let fit = fit_slope(&recs, XField::M, (1.0, 16.0)).unwrap();
        assert!((fit.slope + 4.0).abs() <= 1e-9);

        assert!(matches!(
            fit_slope(&recs[..2], XField::M, (1.0, 16.0)),
            Err(Error::InsufficientData(_))
        ));
    }
}
