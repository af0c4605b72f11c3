//! The discrimination task that saturates the `(1+I_M)(1+I_N)` advantage.
//!
//! From dual witnesses `w*_{ck}` (first party) and `z*_{dl}` (second party)
//! with `M* = tr ∑ w*`, `N* = tr ∑ z*`, the task has one ensemble per setting
//! pair `(k,l)` and one state per outcome pair `(c,d)`:
//!
//! ```text
//! q*(cd,kl) = tr[w*_{ck}]·tr[z*_{dl}] / (M*·N*)
//! ρ*_{cd|kl} = w*_{ck} ⊗ z*_{dl} / (tr[w*_{ck}]·tr[z*_{dl}])
//! ```
//!
//! Measuring `(M_k, N_l)` on ensemble `(k,l)` and guessing the outcomes wins
//! with probability `(1+I_M)(1+I_N)/(M*·N*)`, while compatible measurements
//! cannot beat `1/(M*·N*)`.

use serde::{Deserialize, Serialize};

use crate::discrimination::{
    default_parent_sizes, psg_best_lo, psg_compatible_seesaw, psg_fixed, psg_parents, DiscriminationTask, Ensemble,
    LocalStrategy, SeesawOptions, SeesawResult, WeightedState,
};
use crate::error::{Error, Result};
use crate::incompatibility::RoiCertificate;
use crate::linalg::{kron, trace_product, HermitianOperator};
use crate::measurements::MeasurementSet;
use crate::par::{self, Execution};

pub const ZERO_WEIGHT_TOL: f64 = 1e-12;
const MIN_NORMALIZER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorState {
    /// `q*(c|k)`
    pub weight: f64,
    /// `w*_{ck} / tr[w*_{ck}]`; absent when the witness block has zero trace.
    pub rho: Option<HermitianOperator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEnsemble {
    /// `q*(k)`
    pub prior: f64,
    pub states: Vec<FactorState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartyFactors {
    /// `M* = tr ∑ w*`
    pub normalizer: f64,
    pub ensembles: Vec<FactorEnsemble>,
}

impl PartyFactors {
    /// `q*(c,k) = tr[w*_{ck}] / M*`
    pub fn joint(&self, k: usize, c: usize) -> f64 {
        self.ensembles[k].prior * self.ensembles[k].states[c].weight
    }
}

/// One-party ensembles `q*(k)`, `q*(c|k)`, `ρ*_{c|k}` read off a dual witness.
pub fn single_party_factors(cert: &RoiCertificate) -> Result<PartyFactors> {
    let w = &cert.dual_witness.w;
    let traces: Vec<Vec<f64>> = w.iter().map(|wk| wk.iter().map(|b| b.trace()).collect()).collect();
    let normalizer: f64 = traces.iter().flatten().sum();
    if normalizer.is_nan() || normalizer <= MIN_NORMALIZER {
        return Err(Error::DegenerateCertificate(format!(
            "dual witness has vanishing total trace {normalizer:.3e}"
        )));
    }
    let ensembles = w
        .iter()
        .zip(&traces)
        .map(|(wk, tk)| {
            let mass: f64 = tk.iter().sum();
            FactorEnsemble {
                prior: mass / normalizer,
                states: wk
                    .iter()
                    .zip(tk)
                    .map(|(block, &t)| FactorState {
                        weight: if mass > 0.0 { t / mass } else { 0.0 },
                        rho: (t > 0.0).then(|| block.scale(1.0 / t)),
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(PartyFactors { normalizer, ensembles })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLabel {
    pub c: usize,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleLabel {
    pub k: usize,
    pub l: usize,
    /// `b ↦ (c, d)`
    pub states: Vec<StateLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalTaskBundle {
    pub task: DiscriminationTask,
    pub m_star: f64,
    pub n_star: f64,
    /// `y ↦ (k, l)` and, per ensemble, `b ↦ (c, d)`.
    pub labels: Vec<EnsembleLabel>,
    /// Total `q*(cd,kl)` of the dropped zero-weight labels.
    pub dropped_mass: f64,
}

impl OptimalTaskBundle {
    /// Index of the state labelled `(c, d)` in ensemble `y`, if kept.
    pub fn state_index(&self, y: usize, c: usize, d: usize) -> Option<usize> {
        self.labels[y].states.iter().position(|s| s.c == c && s.d == d)
    }

    /// `1/(M*·N*)`, the compatible optimum.
    pub fn compatible_value(&self) -> f64 {
        1.0 / (self.m_star * self.n_star)
    }
}

pub fn build_optimal_task(cert_a: &RoiCertificate, cert_b: &RoiCertificate) -> Result<OptimalTaskBundle> {
    let fa = single_party_factors(cert_a)?;
    let fb = single_party_factors(cert_b)?;
    let wa = &cert_a.dual_witness.w;
    let zb = &cert_b.dual_witness.w;
    let da = cert_a.dual_witness.x.dim();
    let db = cert_b.dual_witness.x.dim();
    let norm = fa.normalizer * fb.normalizer;

    let mut raw = Vec::new();
    let mut kept_mass = 0.0;
    let mut dropped_mass = 0.0;
    for (k, wk) in wa.iter().enumerate() {
        for (l, zl) in zb.iter().enumerate() {
            let mut states = Vec::new();
            let mut labels = Vec::new();
            let mut mass = 0.0;
            for (c, w) in wk.iter().enumerate() {
                for (d, z) in zl.iter().enumerate() {
                    let (tw, tz) = (w.trace(), z.trace());
                    let q = tw * tz / norm;
                    if tw * tz <= ZERO_WEIGHT_TOL {
                        dropped_mass += q.max(0.0);
                        continue;
                    }
                    mass += q;
                    states.push((q, kron(w, z).scale(1.0 / (tw * tz))));
                    labels.push(StateLabel { c, d });
                }
            }
            if !states.is_empty() {
                kept_mass += mass;
                raw.push((mass, states, EnsembleLabel { k, l, states: labels }));
            }
        }
    }
    if raw.is_empty() || kept_mass <= 0.0 {
        return Err(Error::DegenerateCertificate(
            "every label of the task has zero weight".into(),
        ));
    }
    let mut ensembles = Vec::with_capacity(raw.len());
    let mut labels = Vec::with_capacity(raw.len());
    for (mass, states, label) in raw {
        ensembles.push(Ensemble {
            prior: mass / kept_mass,
            states: states
                .into_iter()
                .map(|(q, rho)| WeightedState { weight: q / mass, rho })
                .collect(),
        });
        labels.push(label);
    }
    let task = DiscriminationTask::new(vec![da, db], ensembles)?;
    Ok(OptimalTaskBundle {
        task,
        m_star: fa.normalizer,
        n_star: fb.normalizer,
        labels,
        dropped_mass,
    })
}

/// Measure `(M_k, N_l)` on ensemble `(k,l)` and guess `(c,d)` from the outcomes.
pub fn identity_strategy(bundle: &OptimalTaskBundle, a: &MeasurementSet, b: &MeasurementSet) -> LocalStrategy {
    let (oa, ob) = (a.max_outcomes(), b.max_outcomes());
    let choices: Vec<(usize, usize)> = bundle.labels.iter().map(|lab| (lab.k, lab.l)).collect();
    let guess: Vec<Vec<Vec<usize>>> = (0..bundle.labels.len())
        .map(|y| {
            (0..oa)
                .map(|c| (0..ob).map(|d| bundle.state_index(y, c, d).unwrap_or(0)).collect())
                .collect()
        })
        .collect();
    LocalStrategy::deterministic_lo(&bundle.task, a, b, &choices, &guess)
}

/// Largest violation of `p(cd|c'd',kl) = p(c|c',k)·p(d|d',l)` over labels whose
/// denominators are non-zero.
pub fn bayes_factorization_residual(
    bundle: &OptimalTaskBundle,
    a: &MeasurementSet,
    b: &MeasurementSet,
    cert_a: &RoiCertificate,
    cert_b: &RoiCertificate,
) -> f64 {
    let posterior = |w: &[HermitianOperator], povm: &crate::measurements::Povm, cp: usize| -> Option<Vec<f64>> {
        let raw: Vec<f64> = w.iter().map(|wc| trace_product(wc, povm.effect(cp))).collect();
        let total: f64 = raw.iter().sum();
        (total > ZERO_WEIGHT_TOL).then(|| raw.iter().map(|v| v / total).collect())
    };
    let mut worst = 0.0f64;
    for (y, lab) in bundle.labels.iter().enumerate() {
        let (pa, pb) = (a.povm(lab.k), b.povm(lab.l));
        let ens = &bundle.task.ensembles[y];
        for cp in 0..pa.num_outcomes() {
            for dp in 0..pb.num_outcomes() {
                let effect = kron(pa.effect(cp), pb.effect(dp));
                let joint: Vec<f64> = ens
                    .states
                    .iter()
                    .map(|s| s.weight * trace_product(&s.rho, &effect))
                    .collect();
                let total: f64 = joint.iter().sum();
                if total <= ZERO_WEIGHT_TOL {
                    continue;
                }
                let (Some(left), Some(right)) = (
                    posterior(&cert_a.dual_witness.w[lab.k], pa, cp),
                    posterior(&cert_b.dual_witness.w[lab.l], pb, dp),
                ) else {
                    continue;
                };
                for (bi, st) in lab.states.iter().enumerate() {
                    worst = worst.max((joint[bi] / total - left[st.c] * right[st.d]).abs());
                }
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievabilityOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Also start the see-saw from the ROI-optimal parents.
    pub warm_start: bool,
    pub execution: Execution,
}

impl Default for AchievabilityOptions {
    fn default() -> Self {
        AchievabilityOptions {
            restarts: 20,
            seed: 0,
            warm_start: false,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub pass: bool,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
}

impl Check {
    fn near(value: f64, target: f64, tolerance: f64) -> Self {
        Check {
            pass: (value - target).abs() <= tolerance,
            value,
            target,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievabilityReport {
    pub roi_a: f64,
    pub roi_b: f64,
    pub m_star: f64,
    pub n_star: f64,
    /// `(1+I_M)(1+I_N)`
    pub bound_factor: f64,
    /// `1/(M*·N*)`
    pub compatible_optimum: f64,
    pub identity_strategy: Check,
    pub best_lo: Check,
    /// See-saw value against `1/(M*·N*)`; passes inside `[target − 1e-4, target + 1e-6]`.
    pub seesaw: Check,
    pub seesaw_detail: SeesawResult,
    /// `psg_parents` at the ROI-optimal parents.
    pub proof_chain_value: f64,
    /// `best_lo / seesaw` against `(1+I_M)(1+I_N)`.
    pub ratio: Check,
    pub bayes_residual: f64,
    pub bayes_pass: bool,
    pub dropped_mass: f64,
    pub pass: bool,
}

pub fn verify_achievability(
    bundle: &OptimalTaskBundle,
    a: &MeasurementSet,
    b: &MeasurementSet,
    cert_a: &RoiCertificate,
    cert_b: &RoiCertificate,
    opts: &AchievabilityOptions,
) -> Result<AchievabilityReport> {
    let bound_factor = (1.0 + cert_a.roi) * (1.0 + cert_b.roi);
    let compatible = bundle.compatible_value();
    let target = bound_factor * compatible;
    let parents = vec![cert_a.parent_povm()?, cert_b.parent_povm()?];

    let mut so = SeesawOptions::new(default_parent_sizes(a, b)?);
    so.restarts = opts.restarts;
    so.seed = opts.seed;
    so.execution = opts.execution;
    let warm = if opts.warm_start {
        vec![(parents[0].clone(), parents[1].clone())]
    } else {
        Vec::new()
    };
    let ((identity, best), (seesaw, chain)) = par::join(
        opts.execution,
        || {
            (
                psg_fixed(&bundle.task, a, b, &identity_strategy(bundle, a, b)),
                psg_best_lo(&bundle.task, a, b),
            )
        },
        || {
            (
                psg_compatible_seesaw(&bundle.task, &so, &warm),
                psg_parents(&bundle.task, &parents),
            )
        },
    );
    let identity = identity?;
    let best = best?.0;
    let seesaw = seesaw?;
    let chain = chain?;

    let seesaw_check = Check {
        pass: seesaw.value >= compatible - 1e-4 && seesaw.value <= compatible + 1e-6,
        value: seesaw.value,
        target: compatible,
        tolerance: 1e-4,
    };
    let ratio = Check::near(best / seesaw.value, bound_factor, 1e-4);
    let bayes_residual = bayes_factorization_residual(bundle, a, b, cert_a, cert_b);
    let identity_check = Check::near(identity, target, 1e-6);
    let best_check = Check::near(best, target, 1e-6);
    let bayes_pass = bayes_residual <= 1e-9;
    let pass = identity_check.pass && best_check.pass && seesaw_check.pass && ratio.pass && bayes_pass;
    Ok(AchievabilityReport {
        roi_a: cert_a.roi,
        roi_b: cert_b.roi,
        m_star: bundle.m_star,
        n_star: bundle.n_star,
        bound_factor,
        compatible_optimum: compatible,
        identity_strategy: identity_check,
        best_lo: best_check,
        seesaw: seesaw_check,
        seesaw_detail: seesaw,
        proof_chain_value: chain,
        ratio,
        bayes_residual,
        bayes_pass,
        dropped_mass: bundle.dropped_mass,
        pass,
    })
}
