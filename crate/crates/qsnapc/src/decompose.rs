//! Exact factorization of a unitary into SNAP phases and adjacent-level
//! Givens rotations by column-wise elimination of `U^dag`.
//!
//! For each column `c` from `dim-1` down to `1` a SNAP step makes the
//! column entries real non-negative, then a chain of Givens rotations
//! folds the column weight down onto the diagonal. A final SNAP cancels
//! the residual phase on level 0, so the recorded steps reproduce the
//! input with no global-phase ambiguity.

use crate::fockops::{wrap_phase, ComplexMatrix, C64};
use crate::{Error, Result};

pub const DEFAULT_UNITARITY_TOL: f64 = 1e-10;
pub const DEFAULT_PRUNE_TOL: f64 = 1e-14;

/// One elimination step: either a SNAP phase vector or a single Givens
/// rotation on levels `k, k+1`.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanStep {
    Snap(Vec<f64>),
    Givens { k: usize, theta: f64 },
}

/// Ordered elimination steps for one unitary. Applied first-step-innermost
/// (circuit order), their product equals the source unitary exactly.
#[derive(Debug, Clone)]
pub struct DecompositionPlan {
    pub dim: usize,
    pub steps: Vec<PlanStep>,
    /// Content hash of the input unitary.
    pub source_checksum: String,
    /// Complex multiply-add count of the elimination (instrumented).
    pub multiply_adds: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanStats {
    pub snap_count: usize,
    pub givens_count: usize,
    pub max_abs_theta: f64,
    pub total_abs_theta: f64,
}

/// Decompose `u` into SNAP and Givens steps.
pub fn decompose(u: &ComplexMatrix, unitarity_tol: f64, prune_tol: f64) -> Result<DecompositionPlan> {
    let dim = u.dim();
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    if !u.is_finite() {
        return Err(Error::NumericalFailure("NaN or Inf in input matrix".into()));
    }
    let deviation = u.unitarity_deviation();
    if deviation > unitarity_tol {
        return Err(Error::NonUnitary { deviation, tolerance: unitarity_tol });
    }

    let mut w = u.dagger();
    let mut steps = Vec::new();
    let mut flops: u64 = 0;

    for c in (1..dim).rev() {
        // SNAP: rotate the column entries onto the non-negative real axis
        let mut phases = vec![0.0f64; dim];
        let mut any = false;
        for j in 0..=c {
            let entry = w.at(j, c);
            if entry.norm() > prune_tol {
                let p = wrap_phase(-entry.arg());
                if p != 0.0 {
                    phases[j] = p;
                    any = true;
                }
            }
        }
        if any {
            for (j, &p) in phases.iter().enumerate() {
                if p != 0.0 {
                    let scale = C64::from_polar(1.0, p);
                    for v in w.row_mut(j) {
                        *v *= scale;
                    }
                    flops += dim as u64;
                }
            }
            steps.push(PlanStep::Snap(phases));
        }

        // Givens chain: zero W[j][c] into W[j+1][c], top down
        for j in 0..c {
            let x = w.at(j, c).re;
            let y = w.at(j + 1, c).re;
            if x.abs() <= prune_tol {
                continue;
            }
            let theta = x.atan2(y);
            let (s, co) = theta.sin_cos();
            // rows j and j+1 of W: G(theta) applied from the left
            let (top, bot) = w.rows_pair_mut(j);
            for (a, b) in top.iter_mut().zip(bot.iter_mut()) {
                let na = *a * co - *b * s;
                let nb = *a * s + *b * co;
                *a = na;
                *b = nb;
            }
            flops += 4 * dim as u64;
            // the eliminated entry is exactly zero by construction
            w.set(j, c, C64::new(0.0, 0.0));
            steps.push(PlanStep::Givens { k: j, theta });
        }

        if w.at(c, c).re.is_nan() {
            return Err(Error::NumericalFailure(format!(
                "NaN while eliminating column {c}"
            )));
        }
    }

    // residual phase on level 0
    let residual = w.at(0, 0);
    let p0 = wrap_phase(-residual.arg());
    if residual.norm() > prune_tol && p0 != 0.0 {
        let mut phases = vec![0.0f64; dim];
        phases[0] = p0;
        steps.push(PlanStep::Snap(phases));
    }

    Ok(DecompositionPlan {
        dim,
        steps,
        source_checksum: u.checksum(),
        multiply_adds: flops,
    })
}

/// Product of the plan steps in circuit order (first step rightmost);
/// the exactness oracle for [`decompose`].
pub fn reconstruct(plan: &DecompositionPlan) -> ComplexMatrix {
    let dim = plan.dim;
    let mut acc = ComplexMatrix::identity(dim);
    for step in &plan.steps {
        apply_step_left(&mut acc, step);
    }
    acc
}

/// Left-multiply `acc` by the step matrix in place.
pub fn apply_step_left(acc: &mut ComplexMatrix, step: &PlanStep) {
    match step {
        PlanStep::Snap(phases) => {
            assert_eq!(phases.len(), acc.dim());
            for (j, &p) in phases.iter().enumerate() {
                if p != 0.0 {
                    let scale = C64::from_polar(1.0, p);
                    for v in acc.row_mut(j) {
                        *v *= scale;
                    }
                }
            }
        }
        PlanStep::Givens { k, theta } => {
            let (s, c) = theta.sin_cos();
            let (top, bot) = acc.rows_pair_mut(*k);
            for (a, b) in top.iter_mut().zip(bot.iter_mut()) {
                let na = *a * c - *b * s;
                let nb = *a * s + *b * c;
                *a = na;
                *b = nb;
            }
        }
    }
}

pub fn plan_stats(plan: &DecompositionPlan) -> PlanStats {
    let mut stats = PlanStats::default();
    for step in &plan.steps {
        match step {
            PlanStep::Snap(_) => stats.snap_count += 1,
            PlanStep::Givens { theta, .. } => {
                stats.givens_count += 1;
                stats.max_abs_theta = stats.max_abs_theta.max(theta.abs());
                stats.total_abs_theta += theta.abs();
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockops::givens_embed;
    use crate::targets::haar_random;

    #[test]
    fn identity_prunes_to_empty_plan() {
        let u = ComplexMatrix::identity(4);
        let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
        assert!(plan.steps.is_empty());
        let stats = plan_stats(&plan);
        assert_eq!(stats.givens_count, 0);
        assert_eq!(stats.snap_count, 0);
    }

    #[test]
    fn single_givens_round_trips_as_itself() {
        let u = givens_embed(2, 0, 0.7).unwrap();
        let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
        let givens: Vec<_> = plan
            .steps
            .iter()
            .filter(|s| matches!(s, PlanStep::Givens { .. }))
            .collect();
        assert_eq!(givens.len(), 1);
        match givens[0] {
            PlanStep::Givens { k, theta } => {
                assert_eq!(*k, 0);
                assert!((theta - 0.7).abs() <= 1e-14);
            }
            _ => unreachable!(),
        }
        // any snaps present must be zero-phase-free (pruned), so none
        assert!(plan.steps.iter().all(|s| matches!(s, PlanStep::Givens { .. })));
        assert!(reconstruct(&plan).max_abs_diff(&u) <= 1e-14);
    }

    #[test]
    fn haar_round_trip_dim8() {
        for seed in 0..20 {
            let u = haar_random(8, seed).unwrap();
            let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
            assert!(reconstruct(&plan).max_abs_diff(&u) <= 1e-11, "seed {seed}");
        }
    }

    #[test]
    fn generic_plan_shape() {
        let u = haar_random(8, 42).unwrap();
        let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
        let stats = plan_stats(&plan);
        assert_eq!(stats.givens_count, 28); // d(d-1)/2
        assert!(stats.snap_count <= 8); // d-1 column snaps plus the final fix
        assert!(stats.max_abs_theta <= std::f64::consts::FRAC_PI_2 + 1e-12);
        for step in &plan.steps {
            if let PlanStep::Givens { theta, .. } = step {
                assert!(*theta >= 0.0 && *theta <= std::f64::consts::FRAC_PI_2 + 1e-12);
            }
            if let PlanStep::Snap(p) = step {
                assert!(p.iter().all(|&x| x > -std::f64::consts::PI && x <= std::f64::consts::PI));
            }
        }
    }

    #[test]
    fn flop_count_near_two_d_cubed() {
        for dim in [16usize, 32] {
            let u = haar_random(dim, 3).unwrap();
            let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
            let d3 = (dim * dim * dim) as f64;
            let count = plan.multiply_adds as f64;
            assert!(count >= d3 && count <= 4.0 * d3, "dim {dim} count {count}");
        }
    }

    #[test]
    fn rejects_non_unitary() {
        let mut u = ComplexMatrix::identity(4);
        u.set(0, 0, C64::new(1.5, 0.0));
        assert!(matches!(
            decompose(&u, 1e-10, 1e-14),
            Err(Error::NonUnitary { .. })
        ));
    }

    #[test]
    fn deterministic_plans() {
        let u = haar_random(6, 9).unwrap();
        let p1 = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
        let p2 = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
        assert_eq!(p1.steps, p2.steps);
        assert_eq!(p1.source_checksum, p2.source_checksum);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn prop_reconstruct_matches_input(dim in 2usize..13, seed in proptest::prelude::any::<u64>()) {
            let u = haar_random(dim, seed).unwrap();
            let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
            proptest::prop_assert!(reconstruct(&plan).max_abs_diff(&u) <= 1e-10 * dim as f64);
            let stats = plan_stats(&plan);
            proptest::prop_assert_eq!(stats.givens_count, dim * (dim - 1) / 2);
        }
    }

    #[test]
    fn column_elimination_postcondition() {
        // replay the elimination and check each processed column collapses
        let dim = 8;
        let u = haar_random(dim, 5).unwrap();
        let plan = decompose(&u, DEFAULT_UNITARITY_TOL, DEFAULT_PRUNE_TOL).unwrap();
        let mut w = u.dagger();
        let mut idx = 0usize;
        for c in (1..dim).rev() {
            // one snap (if present) then up to c givens belong to column c
            if let Some(PlanStep::Snap(_)) = plan.steps.get(idx) {
                apply_step_left(&mut w, &plan.steps[idx]);
                idx += 1;
            }
            while idx < plan.steps.len() {
                match &plan.steps[idx] {
                    PlanStep::Givens { k, .. } if *k < c => {
                        apply_step_left(&mut w, &plan.steps[idx]);
                        idx += 1;
                    }
                    _ => break,
                }
            }
            for j in 0..dim {
                if j != c {
                    assert!(w.at(j, c).norm() <= 1e-12, "c={c} j={j}");
                }
            }
            assert!((w.at(c, c) - C64::new(1.0, 0.0)).norm() <= 1e-12, "c={c}");
        }
    }
}
