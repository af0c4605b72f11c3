//! Robustness of incompatibility (ROI).
//!
//! The ROI of a set `{M_{c|k}}` is the least `r ≥ 0` such that
//! `(M + rΛ)/(1+r)` is jointly measurable for some noise set `Λ`. With the
//! parent outcomes indexed by deterministic strings it is `s* − 1` for
//!
//! ```text
//! min s   s.t.  ∑_{c: c_k = c} G̃_c ⪰ M_{c|k},   ∑_c G̃_c = s·I,   G̃_c ⪰ 0
//! ```
//!
//! whose dual is
//!
//! ```text
//! max tr ∑ w_{ck} M_{c|k}   s.t.  X ⪰ ∑_k w_{c_k,k} for every string,  tr X = 1,  w ⪰ 0.
//! ```
//!
//! Both programs are solved and then polished to exact feasibility, so the
//! primal value is a true upper bound, the dual value a true lower bound, and
//! the gap between them is a certified error bar.

use serde::{Deserialize, Serialize};

use crate::conic::{solve_sdp, MatrixExpr, PsdVar, ScalarExpr, SdpProblem, Sense, SolveStatus, DEFAULT_SOLVER_TOL};
use crate::error::{Error, Result};
use crate::linalg::{psd_residual, trace_product, HermitianOperator, Tolerances};
use crate::measurements::{
    deterministic_strings, tensor_sets, validate_set, DeterministicResponse, MeasurementSet, Povm, ResponseTable,
    DEFAULT_STRING_CAP,
};
use crate::par::{self, Execution};

pub const DEFAULT_COMPAT_TOL: f64 = 1e-6;
pub const MAX_GAP: f64 = 1e-6;
const CLAMP_BELOW_ZERO: f64 = 1e-8;
const DEGENERATE_ROI: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiOptions {
    pub solver_tol: f64,
    pub string_cap: usize,
    pub tolerances: Tolerances,
    pub execution: Execution,
}

impl Default for RoiOptions {
    fn default() -> Self {
        RoiOptions {
            solver_tol: DEFAULT_SOLVER_TOL,
            string_cap: DEFAULT_STRING_CAP,
            tolerances: Tolerances::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalSolution {
    /// `s* − 1`, clamped at zero.
    pub value: f64,
    /// `G̃_c`, one per deterministic string.
    pub parent: Vec<HermitianOperator>,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualWitness {
    #[serde(rename = "X")]
    pub x: HermitianOperator,
    /// `w[k][c]`
    pub w: Vec<Vec<HermitianOperator>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    /// `tr ∑ w M − 1`, clamped at zero.
    pub value: f64,
    pub witness: DualWitness,
}

/// Residuals of a certificate, recomputed from its operator blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateResiduals {
    /// `|s − 1 − roi|`
    pub scale: f64,
    /// max entry of `∑ G̃ − s·I`
    pub parent_sum: f64,
    /// min eigenvalue over every `G̃_c` and every `∑_{c_k=c} G̃ − M_{c|k}`
    pub primal_psd: f64,
    /// `|tr X − 1|`
    pub witness_trace: f64,
    /// min eigenvalue over every `w_{ck}` and every `X − ∑_k w_{c_k,k}`
    pub dual_psd: f64,
    /// `|tr ∑ w M − (1 + dual value)|`
    pub witness_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiCertificate {
    pub roi: f64,
    pub primal_parent: Vec<HermitianOperator>,
    pub primal_scale: f64,
    pub dual_witness: DualWitness,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub residuals: CertificateResiduals,
}

impl RoiCertificate {
    /// Recomputes all residuals against `set` and checks the certificate invariants.
    pub fn check_invariants(&self, set: &MeasurementSet, tol: &Tolerances) -> Result<CertificateResiduals> {
        let strings = DeterministicResponse::from_counts(&set.outcome_counts(), usize::MAX)?;
        let r = certificate_residuals(set, &strings, self)?;
        let fail = |what: &str, v: f64| Err(Error::Numeric(format!("certificate {what} residual {v:.3e}")));
        if r.scale > 1e-8 {
            return fail("scale", r.scale);
        }
        if r.parent_sum > tol.eq_tol {
            return fail("parent sum", r.parent_sum);
        }
        if r.primal_psd < -tol.psd_tol {
            return fail("primal PSD", r.primal_psd);
        }
        if r.witness_trace > 1e-9 {
            return fail("witness trace", r.witness_trace);
        }
        if r.dual_psd < -tol.psd_tol {
            return fail("dual PSD", r.dual_psd);
        }
        if self.gap > MAX_GAP {
            return fail("gap", self.gap);
        }
        Ok(r)
    }

    /// Parent POVM `G_c = G̃_c / s`.
    pub fn parent_povm(&self) -> Result<Povm> {
        Povm::new(
            self.primal_parent
                .iter()
                .map(|g| g.scale(1.0 / self.primal_scale))
                .collect(),
        )
    }
}

fn check_dims(set: &MeasurementSet, strings: &DeterministicResponse, cert: &RoiCertificate) -> Result<()> {
    let d = set.dim();
    let shape_ok = cert.primal_parent.len() == strings.len()
        && cert.primal_parent.iter().all(|g| g.dim() == d)
        && cert.dual_witness.x.dim() == d
        && cert.dual_witness.w.len() == set.len()
        && cert
            .dual_witness
            .w
            .iter()
            .zip(set.povms())
            .all(|(wk, p)| wk.len() == p.num_outcomes() && wk.iter().all(|w| w.dim() == d));
    if shape_ok {
        Ok(())
    } else {
        Err(Error::Shape(
            "certificate blocks do not match the measurement set".into(),
        ))
    }
}

fn certificate_residuals(
    set: &MeasurementSet,
    strings: &DeterministicResponse,
    cert: &RoiCertificate,
) -> Result<CertificateResiduals> {
    check_dims(set, strings, cert)?;
    let d = set.dim();
    let s = cert.primal_scale;
    let total = HermitianOperator::sum(d, cert.primal_parent.iter());
    let parent_sum = (&total - &HermitianOperator::identity(d).scale(s)).max_abs_entry();
    let mut primal_psd = cert
        .primal_parent
        .iter()
        .map(psd_residual)
        .fold(f64::INFINITY, f64::min);
    for (k, povm) in set.povms().iter().enumerate() {
        for c in 0..povm.num_outcomes() {
            let cover = HermitianOperator::sum(d, strings.matching(k, c).map(|i| &cert.primal_parent[i]));
            primal_psd = primal_psd.min(psd_residual(&(&cover - povm.effect(c))));
        }
    }
    let wit = &cert.dual_witness;
    let mut dual_psd = wit.w.iter().flatten().map(psd_residual).fold(f64::INFINITY, f64::min);
    for string in strings.strings() {
        let covered = HermitianOperator::sum(d, string.iter().enumerate().map(|(k, &c)| &wit.w[k][c]));
        dual_psd = dual_psd.min(psd_residual(&(&wit.x - &covered)));
    }
    let witness_value = witness_objective(set, wit);
    Ok(CertificateResiduals {
        scale: (s - 1.0 - cert.roi).abs(),
        parent_sum,
        primal_psd,
        witness_trace: (wit.x.trace() - 1.0).abs(),
        dual_psd,
        witness_scale: (witness_value - 1.0 - cert.dual_value).abs(),
    })
}

/// `tr ∑_{c,k} w_{ck} M_{c|k}`
pub fn witness_objective(set: &MeasurementSet, witness: &DualWitness) -> f64 {
    set.povms()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            (0..p.num_outcomes())
                .map(|c| trace_product(&witness.w[k][c], p.effect(c)))
                .sum::<f64>()
        })
        .sum()
}

fn clamp_roi(v: f64) -> f64 {
    if (-CLAMP_BELOW_ZERO..0.0).contains(&v) {
        0.0
    } else {
        v
    }
}

fn require_valid(set: &MeasurementSet, tol: &Tolerances) -> Result<()> {
    let report = validate_set(set, tol);
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(Error::Invalid(format!("invalid measurement set: {v}"))),
    }
}

fn require_solved(status: SolveStatus, diagnostic: &Option<String>, what: &str) -> Result<()> {
    match status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => Ok(()),
        _ => Err(Error::Solver(format!(
            "{what}: {:?}{}",
            status,
            diagnostic.as_deref().map(|d| format!(" ({d})")).unwrap_or_default()
        ))),
    }
}

pub fn roi_primal(set: &MeasurementSet) -> Result<PrimalSolution> {
    roi_primal_with(set, &RoiOptions::default())
}

pub fn roi_primal_with(set: &MeasurementSet, opts: &RoiOptions) -> Result<PrimalSolution> {
    require_valid(set, &opts.tolerances)?;
    let strings = deterministic_strings(set, opts.string_cap)?;
    let d = set.dim();
    let id = HermitianOperator::identity(d);

    let mut p = SdpProblem::new(Sense::Minimize);
    let g: Vec<PsdVar> = (0..strings.len()).map(|i| p.add_psd_var(format!("G{i}"), d)).collect();
    let s = p.add_scalar_var("s");
    let mut total = MatrixExpr::new(d).plus_scaled(s, id.scale(-1.0));
    for &v in &g {
        total = total.plus_var(1.0, v);
    }
    p.add_matrix_eq(total);
    for (k, povm) in set.povms().iter().enumerate() {
        for c in 0..povm.num_outcomes() {
            let mut cover = MatrixExpr::new(d).plus_constant(&-povm.effect(c));
            for i in strings.matching(k, c) {
                cover = cover.plus_var(1.0, g[i]);
            }
            p.add_psd_constraint(cover);
        }
    }
    p.set_objective(ScalarExpr::new().plus_scalar(1.0, s));

    let sol = solve_sdp(&p, opts.solver_tol)?;
    require_solved(sol.status, &sol.diagnostic, "ROI primal")?;
    let s_value = sol.scalar(s);
    let (parent, scale) = polish_primal(set, &strings, sol.psd_values, s_value);
    Ok(PrimalSolution {
        value: clamp_roi(scale - 1.0),
        parent,
        scale,
    })
}

/// Moves a near-feasible primal point to an exactly feasible one.
///
/// The sum defect is spread evenly over the parent effects, then every
/// effect is shifted by `ε·I`, where `ε` covers the worst PSD deficiency of
/// both the effects and the cover constraints.
fn polish_primal(
    set: &MeasurementSet,
    strings: &DeterministicResponse,
    mut parent: Vec<HermitianOperator>,
    s: f64,
) -> (Vec<HermitianOperator>, f64) {
    let d = set.dim();
    let n = parent.len() as f64;
    let id = HermitianOperator::identity(d);
    let defect = &HermitianOperator::sum(d, parent.iter()) - &id.scale(s);
    let share = defect.scale(1.0 / n);
    for g in parent.iter_mut() {
        *g = &*g - &share;
    }
    let mut eps = parent.iter().map(|g| -psd_residual(g)).fold(0.0, f64::max);
    for (k, povm) in set.povms().iter().enumerate() {
        for c in 0..povm.num_outcomes() {
            let cover = HermitianOperator::sum(d, strings.matching(k, c).map(|i| &parent[i]));
            eps = eps.max(-psd_residual(&(&cover - povm.effect(c))));
        }
    }
    if eps > 0.0 {
        let shift = id.scale(eps);
        for g in parent.iter_mut() {
            *g = &*g + &shift;
        }
    }
    (parent, s + n * eps)
}

pub fn roi_dual(set: &MeasurementSet) -> Result<DualSolution> {
    roi_dual_with(set, &RoiOptions::default())
}

pub fn roi_dual_with(set: &MeasurementSet, opts: &RoiOptions) -> Result<DualSolution> {
    require_valid(set, &opts.tolerances)?;
    let strings = deterministic_strings(set, opts.string_cap)?;
    let d = set.dim();
    let id = HermitianOperator::identity(d);

    let mut p = SdpProblem::new(Sense::Maximize);
    let x = p.add_psd_var("X", d);
    let w: Vec<Vec<PsdVar>> = set
        .povms()
        .iter()
        .enumerate()
        .map(|(k, povm)| {
            (0..povm.num_outcomes())
                .map(|c| p.add_psd_var(format!("w{c}_{k}"), d))
                .collect()
        })
        .collect();
    p.add_scalar_eq(ScalarExpr::new().plus_trace(id, x).plus_constant(-1.0));
    for string in strings.strings() {
        let mut e = MatrixExpr::new(d).plus_var(1.0, x);
        for (k, &c) in string.iter().enumerate() {
            e = e.plus_var(-1.0, w[k][c]);
        }
        p.add_psd_constraint(e);
    }
    let mut obj = ScalarExpr::new();
    for (k, povm) in set.povms().iter().enumerate() {
        for c in 0..povm.num_outcomes() {
            obj = obj.plus_trace(povm.effect(c).clone(), w[k][c]);
        }
    }
    p.set_objective(obj);

    let sol = solve_sdp(&p, opts.solver_tol)?;
    require_solved(sol.status, &sol.diagnostic, "ROI dual")?;
    let witness = DualWitness {
        x: sol.psd(x).clone(),
        w: w.iter()
            .map(|wk| wk.iter().map(|&v| sol.psd(v).clone()).collect())
            .collect(),
    };
    let witness = polish_dual(&strings, witness);
    let value = clamp_roi(witness_objective(set, &witness) - 1.0);
    Ok(DualSolution { value, witness })
}

/// Moves a near-feasible dual point to an exactly feasible one: clip `w` to
/// the PSD cone, raise `X` until it dominates every string sum, renormalize.
fn polish_dual(strings: &DeterministicResponse, witness: DualWitness) -> DualWitness {
    let w: Vec<Vec<HermitianOperator>> = witness
        .w
        .iter()
        .map(|wk| wk.iter().map(|v| v.psd_part()).collect())
        .collect();
    let d = witness.x.dim();
    let mut x = witness.x.psd_part();
    let mut mu = 0.0f64;
    for string in strings.strings() {
        let covered = HermitianOperator::sum(d, string.iter().enumerate().map(|(k, &c)| &w[k][c]));
        mu = mu.max((&covered - &x).max_eigenvalue());
    }
    if mu > 0.0 {
        x = &x + &HermitianOperator::identity(d).scale(mu);
    }
    let t = x.trace();
    DualWitness {
        x: x.scale(1.0 / t),
        w: w.iter()
            .map(|wk| wk.iter().map(|v| v.scale(1.0 / t)).collect())
            .collect(),
    }
}

pub fn compute_roi(set: &MeasurementSet) -> Result<RoiCertificate> {
    compute_roi_with(set, &RoiOptions::default())
}

/// Solves primal and dual (concurrently when allowed) and assembles a certificate.
pub fn compute_roi_with(set: &MeasurementSet, opts: &RoiOptions) -> Result<RoiCertificate> {
    let strings = deterministic_strings(set, opts.string_cap)?;
    let (primal, dual) = par::join(
        opts.execution,
        || roi_primal_with(set, opts),
        || roi_dual_with(set, opts),
    );
    let (primal, dual) = (primal?, dual?);
    let gap = (primal.value - dual.value).abs();
    if gap > MAX_GAP {
        return Err(Error::InaccurateCertificate {
            primal: primal.value,
            dual: dual.value,
            gap,
        });
    }
    let mut cert = RoiCertificate {
        roi: primal.value,
        primal_scale: primal.scale,
        primal_parent: primal.parent,
        dual_witness: dual.witness,
        primal_value: primal.value,
        dual_value: dual.value,
        gap,
        residuals: CertificateResiduals {
            scale: 0.0,
            parent_sum: 0.0,
            primal_psd: 0.0,
            witness_trace: 0.0,
            dual_psd: 0.0,
            witness_scale: 0.0,
        },
    };
    cert.residuals = certificate_residuals(set, &strings, &cert)?;
    Ok(cert)
}

pub fn is_compatible(set: &MeasurementSet, tol: f64) -> Result<bool> {
    Ok(compute_roi(set)?.roi <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDecomposition {
    /// `Λ_{c|k}`
    pub noise: MeasurementSet,
    /// Deterministic post-processing of the parent.
    pub response: ResponseTable,
    /// `G_c = G̃_c / s`
    pub parent: Povm,
    /// `r`
    pub weight: f64,
}

impl NoiseDecomposition {
    /// Max entry of `(1+r)·∑_λ p(c|k,λ)G_λ − (M_{c|k} + rΛ_{c|k})` over all effects.
    pub fn reconstruction_residual(&self, set: &MeasurementSet) -> Result<f64> {
        let mixed = crate::measurements::apply_parent(&self.parent, &self.response)?;
        let r = self.weight;
        let mut worst = 0.0f64;
        for (k, povm) in set.povms().iter().enumerate() {
            for c in 0..povm.num_outcomes() {
                let lhs = mixed.effect(k, c).scale(1.0 + r);
                let rhs = povm.effect(c) + &self.noise.effect(k, c).scale(r);
                worst = worst.max(lhs.max_abs_diff(&rhs));
            }
        }
        Ok(worst)
    }
}

/// Noise `Λ_{c|k} = (∑_{c_k = c} G̃_c − M_{c|k}) / r` realizing the ROI.
pub fn extract_noise(set: &MeasurementSet, cert: &RoiCertificate) -> Result<NoiseDecomposition> {
    let r = cert.roi;
    if r <= DEGENERATE_ROI {
        return Err(Error::DegenerateCertificate(format!(
            "ROI {r:.3e} is zero; the set is compatible and needs no noise"
        )));
    }
    let strings = DeterministicResponse::from_counts(&set.outcome_counts(), usize::MAX)?;
    check_dims(set, &strings, cert)?;
    let d = set.dim();
    let s = cert.primal_scale;
    let povms = set
        .povms()
        .iter()
        .enumerate()
        .map(|(k, povm)| {
            let effects = (0..povm.num_outcomes())
                .map(|c| {
                    let cover = HermitianOperator::sum(d, strings.matching(k, c).map(|i| &cert.primal_parent[i]));
                    (&cover - povm.effect(c)).scale(1.0 / (s - 1.0))
                })
                .collect();
            Povm::new(effects)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseDecomposition {
        noise: MeasurementSet::new(povms)?,
        response: ResponseTable::deterministic(&strings),
        parent: cert.parent_povm()?,
        weight: s - 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorRoi {
    pub roi_a: f64,
    pub roi_b: f64,
    pub roi_ab: f64,
    /// `|(1+I_ab) − (1+I_a)(1+I_b)|`
    pub residual: f64,
}

pub fn tensor_roi(a: &MeasurementSet, b: &MeasurementSet) -> Result<TensorRoi> {
    tensor_roi_with(a, b, &RoiOptions::default())
}

pub fn tensor_roi_with(a: &MeasurementSet, b: &MeasurementSet, opts: &RoiOptions) -> Result<TensorRoi> {
    if a.string_count().saturating_mul(b.string_count()) > opts.string_cap as u128 {
        return Err(Error::ResourceCap {
            what: "deterministic strings of the product set",
            needed: a.string_count().saturating_mul(b.string_count()),
            cap: opts.string_cap as u128,
        });
    }
    let ab = tensor_sets(a, b);
    let (single, joint) = par::join(
        opts.execution,
        || {
            par::join(
                opts.execution,
                || compute_roi_with(a, opts),
                || compute_roi_with(b, opts),
            )
        },
        || compute_roi_with(&ab, opts),
    );
    let (ia, ib) = (single.0?.roi, single.1?.roi);
    let iab = joint?.roi;
    Ok(TensorRoi {
        roi_a: ia,
        roi_b: ib,
        roi_ab: iab,
        residual: ((1.0 + iab) - (1.0 + ia) * (1.0 + ib)).abs(),
    })
}
