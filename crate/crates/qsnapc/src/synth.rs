//! Lowering of a decomposition plan to executable SNAP and displacement
//! gates.
//!
//! Each Givens rotation `G(theta)` on levels `k, k+1` becomes `m` copies
//! of the five-gate block `D(a) R_pi(k) D(-2a) R_pi(k) D(a)` with
//! `a = phi(theta/m, k)`; SNAP steps pass through unchanged. Adjacent
//! same-kind gates fuse exactly (alpha addition, elementwise phase
//! addition mod 2 pi).

use crate::decompose::{DecompositionPlan, PlanStep, DEFAULT_PRUNE_TOL};
use crate::fockops::{r_pi_phases, wrap_phase};
use crate::{Error, Result};

/// Hardware-facing gate alphabet: SNAP phase vectors and real
/// displacements. `R_pi(k)` is emitted as an ordinary SNAP.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Snap(Vec<f64>),
    Disp(f64),
}

/// Ordered gate list in circuit order (first gate acts first).
#[derive(Debug, Clone, PartialEq)]
pub struct GateSequence {
    pub dim: usize,
    pub gates: Vec<Gate>,
}

impl GateSequence {
    pub fn empty(dim: usize) -> Self {
        Self { dim, gates: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SynthesisOptions {
    /// Rotation split factor: each Givens becomes `m` blocks of `theta/m`.
    pub m: usize,
    pub merge: bool,
    pub prune_tol: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { m: 1, merge: true, prune_tol: DEFAULT_PRUNE_TOL }
    }
}

impl SynthesisOptions {
    fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidArgument("split factor m must be >= 1".into()));
        }
        Ok(())
    }
}

/// Closed-form map from Givens angle to displacement magnitude:
/// `phi(theta, k) = theta / (4 sqrt(k+1))`.
pub fn phi(theta: f64, k: usize) -> f64 {
    theta / (4.0 * ((k + 1) as f64).sqrt())
}

/// Expand one Givens rotation into `m` five-gate blocks.
pub fn expand_givens(dim: usize, k: usize, theta: f64, m: usize) -> Result<GateSequence> {
    if k + 1 >= dim {
        return Err(Error::InvalidArgument(format!(
            "givens level index {k} out of range for dim {dim}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidArgument("split factor m must be >= 1".into()));
    }
    let alpha = phi(theta / m as f64, k);
    let r = r_pi_phases(dim, k)?;
    let mut gates = Vec::with_capacity(5 * m);
    for _ in 0..m {
        gates.push(Gate::Disp(alpha));
        gates.push(Gate::Snap(r.clone()));
        gates.push(Gate::Disp(-2.0 * alpha));
        gates.push(Gate::Snap(r.clone()));
        gates.push(Gate::Disp(alpha));
    }
    Ok(GateSequence { dim, gates })
}

/// Lower a full plan to a gate sequence. Per-rotation work is O(dim)
/// (phase-vector construction only, no matrix arithmetic).
pub fn synthesize(plan: &DecompositionPlan, options: &SynthesisOptions) -> Result<GateSequence> {
    options.validate()?;
    let dim = plan.dim;
    let mut gates = Vec::new();
    for step in &plan.steps {
        match step {
            PlanStep::Snap(phases) => {
                if phases.len() != dim {
                    return Err(Error::InvalidArgument(format!(
                        "snap step has {} phases, plan dim is {dim}",
                        phases.len()
                    )));
                }
                gates.push(Gate::Snap(phases.clone()));
            }
            PlanStep::Givens { k, theta } => {
                let block = expand_givens(dim, *k, *theta, options.m)?;
                gates.extend(block.gates);
            }
        }
    }
    let seq = GateSequence { dim, gates };
    if options.merge {
        Ok(merge_with_tol(&seq, options.prune_tol))
    } else {
        Ok(seq)
    }
}

/// Fuse adjacent same-kind gates and drop identity gates.
pub fn merge(seq: &GateSequence) -> GateSequence {
    merge_with_tol(seq, DEFAULT_PRUNE_TOL)
}

pub fn merge_with_tol(seq: &GateSequence, prune_tol: f64) -> GateSequence {
    let mut out: Vec<Gate> = Vec::with_capacity(seq.gates.len());
    for gate in &seq.gates {
        match (out.last_mut(), gate) {
            (Some(Gate::Disp(a)), Gate::Disp(b)) => *a += b,
            (Some(Gate::Snap(p)), Gate::Snap(q)) => {
                for (x, y) in p.iter_mut().zip(q) {
                    *x = wrap_phase(*x + y);
                }
            }
            _ => out.push(gate.clone()),
        }
        // drop the tail if fusion (or the pushed gate) left an identity,
        // then allow the new neighbors to fuse on the next iteration
        while let Some(last) = out.last() {
            let trivial = match last {
                Gate::Disp(a) => a.abs() <= prune_tol,
                Gate::Snap(p) => p.iter().all(|x| x.abs() <= prune_tol),
            };
            if !trivial {
                break;
            }
            out.pop();
            // after a pop the two new neighbors may share a kind; fold them
            if out.len() >= 2 {
                let same_kind = matches!(
                    (&out[out.len() - 2], &out[out.len() - 1]),
                    (Gate::Disp(_), Gate::Disp(_)) | (Gate::Snap(_), Gate::Snap(_))
                );
                if same_kind {
                    let top = out.pop().unwrap();
                    match (out.last_mut().unwrap(), top) {
                        (Gate::Disp(a), Gate::Disp(b)) => *a += b,
                        (Gate::Snap(p), Gate::Snap(q)) => {
                            for (x, y) in p.iter_mut().zip(&q) {
                                *x = wrap_phase(*x + y);
                            }
                        }
                        _ => unreachable!(),
                    }
                    continue;
                }
            }
            break;
        }
    }
    GateSequence { dim: seq.dim, gates: out }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SequenceStats {
    pub gate_count: usize,
    pub snap_count: usize,
    pub displacement_count: usize,
    pub max_abs_alpha: f64,
    pub total_abs_alpha: f64,
}

pub fn sequence_stats(seq: &GateSequence) -> SequenceStats {
    let mut stats = SequenceStats { gate_count: seq.gates.len(), ..Default::default() };
    for gate in &seq.gates {
        match gate {
            Gate::Snap(_) => stats.snap_count += 1,
            Gate::Disp(a) => {
                stats.displacement_count += 1;
                stats.max_abs_alpha = stats.max_abs_alpha.max(a.abs());
                stats.total_abs_alpha += a.abs();
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::decompose;
    use crate::fockops::{fidelity, givens_embed, ComplexMatrix};
    use crate::targets::haar_random;
    use crate::verify::simulate;

    #[test]
    fn phi_values() {
        assert_eq!(phi(0.0, 5), 0.0);
        assert!((phi(0.1, 0) - 0.025).abs() <= 1e-16);
        assert!((phi(0.1, 3) - 0.0125).abs() <= 1e-16);
        // odd in theta, decreasing in k
        assert_eq!(phi(-0.3, 2), -phi(0.3, 2));
        assert!(phi(0.3, 1) > phi(0.3, 2));
    }

    #[test]
    fn expand_zero_theta_is_identity() {
        let seq = expand_givens(8, 0, 0.0, 1).unwrap();
        let u = simulate(&seq).unwrap();
        assert!(u.max_abs_diff(&ComplexMatrix::identity(8)) <= 1e-12);
    }

    #[test]
    fn expand_small_theta_matches_givens() {
        let seq = expand_givens(64, 0, 0.05, 1).unwrap();
        let u = simulate(&seq).unwrap();
        let target = givens_embed(64, 0, 0.05).unwrap();
        let eps = 1.0 - fidelity(&u, &target).unwrap();
        assert!(eps <= 1e-9, "eps {eps}");
    }

    #[test]
    fn splitting_improves_by_m4() {
        let dim = 64;
        let k = 5;
        let theta = std::f64::consts::FRAC_PI_2;
        let target = givens_embed(dim, k, theta).unwrap();
        let eps1 = {
            let u = simulate(&expand_givens(dim, k, theta, 1).unwrap()).unwrap();
            1.0 - fidelity(&u, &target).unwrap()
        };
        let eps4 = {
            let u = simulate(&expand_givens(dim, k, theta, 4).unwrap()).unwrap();
            1.0 - fidelity(&u, &target).unwrap()
        };
        let ratio = eps1 / eps4;
        let ideal = 4f64.powi(4);
        assert!(ratio >= ideal / 3.0 && ratio <= ideal * 3.0, "ratio {ratio}");
    }

    #[test]
    fn synthesize_counts() {
        let u = givens_embed(4, 0, 0.7).unwrap();
        let plan = decompose(&u, 1e-10, 1e-14).unwrap();
        let opts = SynthesisOptions { m: 1, merge: false, ..Default::default() };
        let seq = synthesize(&plan, &opts).unwrap();
        assert_eq!(seq.len(), 5);
        let stats = sequence_stats(&seq);
        assert_eq!(stats.displacement_count, 3);
        assert_eq!(stats.snap_count, 2);
    }

    #[test]
    fn empty_plan_empty_sequence() {
        let plan = decompose(&ComplexMatrix::identity(4), 1e-10, 1e-14).unwrap();
        let seq = synthesize(&plan, &SynthesisOptions::default()).unwrap();
        assert!(seq.is_empty());
        assert_eq!(sequence_stats(&seq), SequenceStats::default());
    }

    #[test]
    fn merge_basics() {
        let seq = GateSequence { dim: 4, gates: vec![Gate::Disp(0.1), Gate::Disp(0.2)] };
        let merged = merge(&seq);
        assert_eq!(merged.gates, vec![Gate::Disp(0.30000000000000004)]);

        // involution: two identical R_pi snaps cancel
        let r = crate::fockops::r_pi_phases(4, 1).unwrap();
        let seq = GateSequence {
            dim: 4,
            gates: vec![Gate::Snap(r.clone()), Gate::Snap(r)],
        };
        assert!(merge(&seq).is_empty());
    }

    #[test]
    fn merge_cascades_through_cancellation() {
        // D(0.2) S S D(-0.2) collapses entirely once the snaps cancel
        let r = crate::fockops::r_pi_phases(4, 0).unwrap();
        let seq = GateSequence {
            dim: 4,
            gates: vec![
                Gate::Disp(0.2),
                Gate::Snap(r.clone()),
                Gate::Snap(r),
                Gate::Disp(-0.2),
            ],
        };
        assert!(merge(&seq).is_empty());
    }

    #[test]
    fn merge_preserves_product_vk_pair() {
        let dim = 16;
        let mut gates = expand_givens(dim, 0, 0.4, 1).unwrap().gates;
        gates.extend(expand_givens(dim, 0, 0.9, 1).unwrap().gates);
        let unmerged = GateSequence { dim, gates };
        assert_eq!(unmerged.len(), 10);
        let merged = merge(&unmerged);
        assert!(merged.len() <= 9);
        let a = simulate(&unmerged).unwrap();
        let b = simulate(&merged).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-13);
    }

    #[test]
    fn merged_sequences_alternate() {
        let u = haar_random(6, 11).unwrap();
        let plan = decompose(&u, 1e-10, 1e-14).unwrap();
        let seq = synthesize(&plan, &SynthesisOptions { m: 2, ..Default::default() }).unwrap();
        for pair in seq.gates.windows(2) {
            let same = matches!(
                (&pair[0], &pair[1]),
                (Gate::Disp(_), Gate::Disp(_)) | (Gate::Snap(_), Gate::Snap(_))
            );
            assert!(!same);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn prop_merge_preserves_product(
            kinds in proptest::collection::vec(proptest::prelude::any::<bool>(), 1..12),
            values in proptest::collection::vec(-0.4f64..0.4, 12 * 8),
        ) {
            let dim = 8;
            let mut vi = values.into_iter();
            let gates: Vec<Gate> = kinds
                .iter()
                .map(|&disp| {
                    if disp {
                        Gate::Disp(vi.next().unwrap())
                    } else {
                        Gate::Snap((0..dim).map(|_| 4.0 * vi.next().unwrap()).collect())
                    }
                })
                .collect();
            let seq = GateSequence { dim, gates };
            let merged = merge(&seq);
            let a = simulate(&seq).unwrap();
            let b = simulate(&merged).unwrap();
            proptest::prop_assert!(a.max_abs_diff(&b) <= 1e-12);
            for pair in merged.gates.windows(2) {
                let same = matches!(
                    (&pair[0], &pair[1]),
                    (Gate::Disp(_), Gate::Disp(_)) | (Gate::Snap(_), Gate::Snap(_))
                );
                proptest::prop_assert!(!same);
            }
        }
    }

    #[test]
    fn splitting_contract() {
        // synthesize with m equals pre-splitting the plan steps
        let u = haar_random(8, 21).unwrap();
        let plan = decompose(&u, 1e-10, 1e-14).unwrap();
        let m = 3;
        let direct = synthesize(&plan, &SynthesisOptions { m, merge: false, ..Default::default() })
            .unwrap();
        let mut split_plan = plan.clone();
        split_plan.steps = plan
            .steps
            .iter()
            .flat_map(|s| match s {
                PlanStep::Givens { k, theta } => vec![
                    PlanStep::Givens { k: *k, theta: *theta / m as f64 };
                    m
                ],
                other => vec![other.clone()],
            })
            .collect();
        let presplit =
            synthesize(&split_plan, &SynthesisOptions { m: 1, merge: false, ..Default::default() })
                .unwrap();
        let a = simulate(&direct).unwrap();
        let b = simulate(&presplit).unwrap();
        assert!(a.max_abs_diff(&b) <= 1e-13);
    }
}
