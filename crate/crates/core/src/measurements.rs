//! POVMs, measurement sets, classical post-processing and product constructions.
//!
//! Indices are dense and 0-based. Composite labels such as a pair of
//! measurements `(k, l)` or a pair of outcomes `(c, d)` are flattened
//! row-major with [`pair_index`] and recovered with [`unpair`].

use rand::Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, kron, psd_residual, HermitianOperator, Tolerances, C64};
use crate::random::{ginibre, random_psd, rng_from_seed};

/// Default cap on the number of deterministic outcome strings.
pub const DEFAULT_STRING_CAP: usize = 1_000_000;

/// Row-major index of the pair `(i, j)` when `j` ranges over `0..n_j`.
pub fn pair_index(i: usize, j: usize, n_j: usize) -> usize {
    debug_assert!(j < n_j);
    i * n_j + j
}

/// Inverse of [`pair_index`].
pub fn unpair(index: usize, n_j: usize) -> (usize, usize) {
    (index / n_j, index % n_j)
}

/// A POVM: PSD effects summing to the identity, one per outcome.
///
/// Construction only checks structure (non-empty, equal dimensions). Use
/// [`validate_set`] or [`Povm::validated`] for positivity and completeness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<HermitianOperator>", into = "Vec<HermitianOperator>")]
pub struct Povm {
    effects: Vec<HermitianOperator>,
}

impl TryFrom<Vec<HermitianOperator>> for Povm {
    type Error = Error;

    fn try_from(effects: Vec<HermitianOperator>) -> Result<Self> {
        Povm::new(effects)
    }
}

impl From<Povm> for Vec<HermitianOperator> {
    fn from(p: Povm) -> Self {
        p.effects
    }
}

impl Povm {
    pub fn new(effects: Vec<HermitianOperator>) -> Result<Self> {
        let first = effects
            .first()
            .ok_or_else(|| Error::Invalid("a POVM needs at least one outcome".into()))?;
        let dim = first.dim();
        for e in &effects {
            check_dim(dim, e.dim())?;
        }
        Ok(Povm { effects })
    }

    /// Like [`Povm::new`] but also rejects non-PSD or incomplete effect lists.
    pub fn validated(effects: Vec<HermitianOperator>, tol: &Tolerances) -> Result<Self> {
        let povm = Povm::new(effects)?;
        let set = MeasurementSet::new(vec![povm.clone()])?;
        if let Some(v) = validate_set(&set, tol).violations.first() {
            return Err(Error::Invalid(v.to_string()));
        }
        Ok(povm)
    }

    /// The one-outcome POVM `{I}`.
    pub fn trivial(dim: usize) -> Self {
        Povm {
            effects: vec![HermitianOperator::identity(dim)],
        }
    }

    /// Two-outcome projective measurement `{(I+A)/2, (I−A)/2}` of a ±1-valued observable.
    pub fn from_observable(observable: &HermitianOperator) -> Self {
        let id = HermitianOperator::identity(observable.dim());
        Povm {
            effects: vec![(&id + observable).scale(0.5), (&id - observable).scale(0.5)],
        }
    }

    /// Projective measurement in the computational basis.
    pub fn computational(dim: usize) -> Self {
        Povm {
            effects: (0..dim)
                .map(|i| {
                    let mut diag = vec![0.0; dim];
                    diag[i] = 1.0;
                    HermitianOperator::diag(&diag)
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn effect(&self, outcome: usize) -> &HermitianOperator {
        &self.effects[outcome]
    }

    pub fn effect_sum(&self) -> HermitianOperator {
        HermitianOperator::sum(self.dim(), &self.effects)
    }

    /// Replaces the effects by the closest exact POVM: negative eigenvalues are
    /// clipped, then the effects are conjugated by `S^{-1/2}` with `S` their sum.
    pub fn normalized(&self) -> Result<Self> {
        let clipped: Vec<HermitianOperator> = self.effects.iter().map(|e| e.psd_part()).collect();
        let sum = HermitianOperator::sum(self.dim(), &clipped);
        let whitening = sum.inv_sqrt(1e-12)?;
        Ok(Povm {
            effects: clipped.iter().map(|e| e.sandwich(&whitening)).collect(),
        })
    }
}

/// An indexed family of POVMs on one system.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    dim: usize,
    povms: Vec<Povm>,
}

impl MeasurementSet {
    pub fn new(povms: Vec<Povm>) -> Result<Self> {
        let dim = povms
            .first()
            .ok_or_else(|| Error::Invalid("a measurement set needs at least one POVM".into()))?
            .dim();
        for p in &povms {
            check_dim(dim, p.dim())?;
        }
        Ok(MeasurementSet { dim, povms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn povms(&self) -> &[Povm] {
        &self.povms
    }

    pub fn povm(&self, k: usize) -> &Povm {
        &self.povms[k]
    }

    pub fn len(&self) -> usize {
        self.povms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povms.is_empty()
    }

    pub fn effect(&self, k: usize, c: usize) -> &HermitianOperator {
        self.povms[k].effect(c)
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        self.povms.iter().map(Povm::num_outcomes).collect()
    }

    pub fn max_outcomes(&self) -> usize {
        self.povms.iter().map(Povm::num_outcomes).max().unwrap_or(0)
    }

    pub fn total_effects(&self) -> usize {
        self.povms.iter().map(Povm::num_outcomes).sum()
    }

    /// Number of deterministic outcome strings, `∏_k |outcomes(k)|`.
    pub fn string_count(&self) -> u128 {
        self.povms.iter().map(|p| p.num_outcomes() as u128).product()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasurementSetRepr {
    dim: usize,
    povms: Vec<Vec<HermitianOperator>>,
}

impl Serialize for MeasurementSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MeasurementSetRepr {
            dim: self.dim,
            povms: self.povms.iter().map(|p| p.effects.clone()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MeasurementSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MeasurementSetRepr::deserialize(deserializer)?;
        let povms = repr
            .povms
            .into_iter()
            .map(Povm::new)
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        let set = MeasurementSet::new(povms).map_err(D::Error::custom)?;
        if set.dim != repr.dim {
            return Err(D::Error::custom(format!(
                "declared dim {} but effects have dimension {}",
                repr.dim, set.dim
            )));
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NotPsd,
    Incomplete,
}

/// One failed POVM constraint. `outcome` is `None` for completeness violations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub povm: usize,
    pub outcome: Option<usize>,
    pub kind: ViolationKind,
    pub residual: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.kind, self.outcome) {
            (ViolationKind::NotPsd, Some(c)) => write!(
                f,
                "povm {} effect {} has smallest eigenvalue {:.3e}",
                self.povm, c, self.residual
            ),
            _ => write!(
                f,
                "povm {} effects miss the identity by {:.3e}",
                self.povm, self.residual
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks positivity of every effect and completeness of every POVM.
pub fn validate_set(set: &MeasurementSet, tol: &Tolerances) -> ValidationReport {
    let mut violations = Vec::new();
    let id = HermitianOperator::identity(set.dim());
    for (k, povm) in set.povms().iter().enumerate() {
        for (c, e) in povm.effects().iter().enumerate() {
            let min = psd_residual(e);
            if min < -tol.psd_tol {
                violations.push(Violation {
                    povm: k,
                    outcome: Some(c),
                    kind: ViolationKind::NotPsd,
                    residual: min,
                });
            }
        }
        let dev = povm.effect_sum().max_abs_diff(&id);
        if dev > tol.eq_tol {
            violations.push(Violation {
                povm: k,
                outcome: None,
                kind: ViolationKind::Incomplete,
                residual: dev,
            });
        }
    }
    ValidationReport { violations }
}

/// All deterministic outcome strings `c = (c_1, …, c_n)`, one outcome per
/// measurement, in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterministicResponse {
    outcome_counts: Vec<usize>,
    strings: Vec<Vec<usize>>,
}

impl DeterministicResponse {
    pub fn from_counts(outcome_counts: &[usize], cap: usize) -> Result<Self> {
        let needed: u128 = outcome_counts.iter().map(|&n| n as u128).product();
        if needed > cap as u128 {
            return Err(Error::ResourceCap {
                what: "deterministic strings",
                needed,
                cap: cap as u128,
            });
        }
        let mut strings = Vec::with_capacity(needed as usize);
        let mut current = vec![0usize; outcome_counts.len()];
        'outer: loop {
            strings.push(current.clone());
            for pos in (0..current.len()).rev() {
                current[pos] += 1;
                if current[pos] < outcome_counts[pos] {
                    continue 'outer;
                }
                current[pos] = 0;
            }
            break;
        }
        Ok(DeterministicResponse {
            outcome_counts: outcome_counts.to_vec(),
            strings,
        })
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    pub fn strings(&self) -> &[Vec<usize>] {
        &self.strings
    }

    pub fn string(&self, index: usize) -> &[usize] {
        &self.strings[index]
    }

    pub fn outcome_counts(&self) -> &[usize] {
        &self.outcome_counts
    }

    /// `D_c(c|k)`: 1 iff string `index` assigns outcome `c` to measurement `k`.
    pub fn indicator(&self, index: usize, c: usize, k: usize) -> f64 {
        if self.strings[index][k] == c {
            1.0
        } else {
            0.0
        }
    }

    /// Indices of the strings whose `k`-th entry is `c`.
    pub fn matching(&self, k: usize, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.strings
            .iter()
            .enumerate()
            .filter(move |(_, s)| s[k] == c)
            .map(|(i, _)| i)
    }

    /// Weights over strings of the product distribution `∏_k p_k(string_k)`.
    ///
    /// Any response `p(c|k)` is the mixture `∑_strings w(string)·D_string(c|k)`
    /// with these weights.
    pub fn product_weights(&self, per_measurement: &[Vec<f64>]) -> Result<Vec<f64>> {
        if per_measurement.len() != self.outcome_counts.len() {
            return Err(Error::Shape(format!(
                "{} distributions for {} measurements",
                per_measurement.len(),
                self.outcome_counts.len()
            )));
        }
        for (k, dist) in per_measurement.iter().enumerate() {
            if dist.len() != self.outcome_counts[k] {
                return Err(Error::Shape(format!("distribution {k} has wrong length")));
            }
        }
        Ok(self
            .strings
            .iter()
            .map(|s| s.iter().enumerate().map(|(k, &c)| per_measurement[k][c]).product())
            .collect())
    }
}

pub fn deterministic_strings(set: &MeasurementSet, cap: usize) -> Result<DeterministicResponse> {
    DeterministicResponse::from_counts(&set.outcome_counts(), cap)
}

/// Classical post-processing `p(c|k,λ)` from parent outcomes to measurement outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseTable {
    /// Indexed `[k][λ][c]`.
    entries: Vec<Vec<Vec<f64>>>,
    parent_outcomes: usize,
}

impl ResponseTable {
    pub fn new(entries: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let parent_outcomes = entries
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Shape("response table without measurements".into()))?;
        for (k, rows) in entries.iter().enumerate() {
            if rows.len() != parent_outcomes {
                return Err(Error::Shape(format!(
                    "measurement {k} has {} parent rows, expected {parent_outcomes}",
                    rows.len()
                )));
            }
            let width = rows.first().map(Vec::len).unwrap_or(0);
            if width == 0 {
                return Err(Error::Shape(format!("measurement {k} has no outcomes")));
            }
            for (lambda, row) in rows.iter().enumerate() {
                if row.len() != width {
                    return Err(Error::Shape(format!("ragged row ({k}, {lambda})")));
                }
                if row.iter().any(|&p| !(-1e-12..=1.0 + 1e-12).contains(&p)) {
                    return Err(Error::Invalid(format!("row ({k}, {lambda}) leaves [0, 1]")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Invalid(format!("row ({k}, {lambda}) sums to {total}")));
                }
            }
        }
        Ok(ResponseTable {
            entries,
            parent_outcomes,
        })
    }

    /// The deterministic response `p(c|k,string) = D(string, c, k)`.
    pub fn deterministic(strings: &DeterministicResponse) -> Self {
        let entries = strings
            .outcome_counts()
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                strings
                    .strings()
                    .iter()
                    .map(|s| (0..n).map(|c| if s[k] == c { 1.0 } else { 0.0 }).collect())
                    .collect()
            })
            .collect();
        ResponseTable {
            entries,
            parent_outcomes: strings.len(),
        }
    }

    pub fn num_measurements(&self) -> usize {
        self.entries.len()
    }

    pub fn parent_outcomes(&self) -> usize {
        self.parent_outcomes
    }

    pub fn num_outcomes(&self, k: usize) -> usize {
        self.entries[k][0].len()
    }

    /// `p(c|k,λ)`.
    pub fn prob(&self, c: usize, k: usize, lambda: usize) -> f64 {
        self.entries[k][lambda][c]
    }
}

/// Product set `{M_k ⊗ N_l}`: POVM `(k,l)` sits at `pair_index(k, l, |b|)` and
/// its effect `(c,d)` at `pair_index(c, d, |N_l|)`.
pub fn tensor_sets(a: &MeasurementSet, b: &MeasurementSet) -> MeasurementSet {
    let mut povms = Vec::with_capacity(a.len() * b.len());
    for m in a.povms() {
        for n in b.povms() {
            let effects = m
                .effects()
                .iter()
                .flat_map(|mc| n.effects().iter().map(move |nd| kron(mc, nd)))
                .collect();
            povms.push(Povm { effects });
        }
    }
    MeasurementSet {
        dim: a.dim() * b.dim(),
        povms,
    }
}

/// Simulates a set from a parent: `M_{c|k} = ∑_λ p(c|k,λ) G_λ`.
pub fn apply_parent(parent: &Povm, response: &ResponseTable) -> Result<MeasurementSet> {
    if response.parent_outcomes() != parent.num_outcomes() {
        return Err(Error::Shape(format!(
            "response table has {} parent outcomes, parent POVM has {}",
            response.parent_outcomes(),
            parent.num_outcomes()
        )));
    }
    let dim = parent.dim();
    let povms = (0..response.num_measurements())
        .map(|k| {
            let effects = (0..response.num_outcomes(k))
                .map(|c| {
                    let mut acc = HermitianOperator::zeros(dim);
                    for (lambda, g) in parent.effects().iter().enumerate() {
                        let p = response.prob(c, k, lambda);
                        if p != 0.0 {
                            acc = &acc + &g.scale(p);
                        }
                    }
                    acc
                })
                .collect();
            Povm { effects }
        })
        .collect();
    MeasurementSet::new(povms)
}

/// Random POVM: `n_out` Ginibre PSD matrices whitened by the inverse square
/// root of their sum.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, n_out: usize, rng: &mut R) -> Result<Povm> {
    const ATTEMPTS: usize = 10;
    if dim == 0 || n_out == 0 {
        return Err(Error::Invalid(
            "random POVM needs positive dimension and outcome count".into(),
        ));
    }
    for _ in 0..ATTEMPTS {
        let raw: Vec<HermitianOperator> = (0..n_out).map(|_| random_psd(dim, rng)).collect();
        let sum = HermitianOperator::sum(dim, &raw);
        let Ok(whitening) = sum.inv_sqrt(1e-10 * sum.max_abs_entry().max(1.0)) else {
            continue;
        };
        return Ok(Povm {
            effects: raw.iter().map(|g| g.sandwich(&whitening)).collect(),
        });
    }
    Err(Error::Generation(format!(
        "effect sum stayed singular after {ATTEMPTS} attempts"
    )))
}

/// Projective measurement in a Haar-random basis; basis vector `i` goes to
/// outcome `i mod n_out`.
pub fn random_projective_povm<R: Rng + ?Sized>(dim: usize, n_out: usize, rng: &mut R) -> Result<Povm> {
    if n_out == 0 || n_out > dim {
        return Err(Error::Invalid(format!(
            "projective measurement on dimension {dim} cannot have {n_out} outcomes"
        )));
    }
    let q = ginibre(dim, dim, rng).qr().q();
    let mut effects = vec![HermitianOperator::zeros(dim); n_out];
    for i in 0..dim {
        let column: Vec<C64> = q.column(i).iter().copied().collect();
        let p = HermitianOperator::projector(&column)?;
        effects[i % n_out] = &effects[i % n_out] + &p;
    }
    Ok(Povm { effects })
}

/// Set of `n_meas` random projective measurements (incompatible with probability one).
pub fn random_projective_set(dim: usize, n_meas: usize, n_out: usize, seed: u64) -> Result<MeasurementSet> {
    if n_meas == 0 {
        return Err(Error::Invalid("random set needs at least one measurement".into()));
    }
    let mut rng = rng_from_seed(seed);
    let povms = (0..n_meas)
        .map(|_| random_projective_povm(dim, n_out, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(povms)
}

pub fn random_set(dim: usize, n_meas: usize, n_out: usize, seed: u64) -> Result<MeasurementSet> {
    if n_meas == 0 {
        return Err(Error::Invalid("random set needs at least one measurement".into()));
    }
    let mut rng = rng_from_seed(seed);
    let povms = (0..n_meas)
        .map(|_| random_povm(dim, n_out, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    MeasurementSet::new(povms)
}

/// Pauli observables on a qubit.
pub mod pauli {
    use crate::linalg::{HermitianOperator, C64};
    use nalgebra::DMatrix;

    pub fn x() -> HermitianOperator {
        HermitianOperator::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("σx is Hermitian")
    }

    pub fn y() -> HermitianOperator {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, 0.0),
            ],
        );
        HermitianOperator::hermitize(&m)
    }

    pub fn z() -> HermitianOperator {
        HermitianOperator::diag(&[1.0, -1.0])
    }
}

/// The projective σx and σz measurements on a qubit.
pub fn sigma_xz_set() -> MeasurementSet {
    MeasurementSet::new(vec![
        Povm::from_observable(&pauli::x()),
        Povm::from_observable(&pauli::z()),
    ])
    .expect("qubit POVMs share a dimension")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::random_distribution;
    use proptest::prelude::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn sigma_z_projectors_validate() {
        let set = MeasurementSet::new(vec![Povm::from_observable(&pauli::z())]).unwrap();
        assert!(validate_set(&set, &tol()).is_valid());
    }

    #[test]
    fn scaled_effect_is_incomplete() {
        let z = Povm::from_observable(&pauli::z());
        let effects = vec![z.effect(0).scale(1.1), z.effect(1).clone()];
        let set = MeasurementSet::new(vec![Povm::new(effects).unwrap()]).unwrap();
        let report = validate_set(&set, &tol());
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.kind, ViolationKind::Incomplete);
        assert_eq!(v.povm, 0);
        assert!((v.residual - 0.1).abs() < 1e-12);
    }

    #[test]
    fn negative_effect_is_reported() {
        let effects = vec![
            HermitianOperator::diag(&[1.0, -0.01]),
            HermitianOperator::diag(&[0.0, 1.01]),
        ];
        let set = MeasurementSet::new(vec![Povm::new(effects).unwrap()]).unwrap();
        let report = validate_set(&set, &tol());
        assert_eq!(report.violations.len(), 1);
        let v = &report.violations[0];
        assert_eq!(v.kind, ViolationKind::NotPsd);
        assert_eq!(v.outcome, Some(0));
        assert!((v.residual + 0.01).abs() < 1e-12);
    }

    #[test]
    fn strings_are_lexicographic() {
        let one = DeterministicResponse::from_counts(&[2], 10).unwrap();
        assert_eq!(one.strings(), &[vec![0], vec![1]]);
        let two = DeterministicResponse::from_counts(&[2, 2], 10).unwrap();
        assert_eq!(two.strings(), &[vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(DeterministicResponse::from_counts(&[3, 3, 3], 100).unwrap().len(), 27);
    }

    #[test]
    fn string_cap_is_enforced() {
        let err = DeterministicResponse::from_counts(&[10, 10, 10], 999).unwrap_err();
        assert!(matches!(err, Error::ResourceCap { needed: 1000, .. }));
    }

    #[test]
    fn string_indicator_counts() {
        let strings = DeterministicResponse::from_counts(&[2, 3, 2], 100).unwrap();
        let counts = [2usize, 3, 2];
        for k in 0..3 {
            for c in 0..counts[k] {
                let total: f64 = (0..strings.len()).map(|i| strings.indicator(i, c, k)).sum();
                let others: usize = counts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, n)| n)
                    .product();
                assert_eq!(total as usize, others);
                assert_eq!(strings.matching(k, c).count(), others);
            }
        }
    }

    #[test]
    fn product_weights_reproduce_the_response() {
        let strings = DeterministicResponse::from_counts(&[2, 3], 100).unwrap();
        let dists = vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.3]];
        let w = strings.product_weights(&dists).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for k in 0..2 {
            for c in 0..dists[k].len() {
                let p: f64 = (0..strings.len()).map(|i| w[i] * strings.indicator(i, c, k)).sum();
                assert!((p - dists[k][c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tensor_of_sigma_z_sets() {
        let z = MeasurementSet::new(vec![Povm::from_observable(&pauli::z())]).unwrap();
        let zz = tensor_sets(&z, &z);
        assert_eq!(zz.dim(), 4);
        assert_eq!(zz.len(), 1);
        assert_eq!(zz.povm(0).num_outcomes(), 4);
        for e in zz.povm(0).effects() {
            let ev = e.eigenvalues();
            assert!((ev[3] - 1.0).abs() < 1e-12 && ev[..3].iter().all(|x| x.abs() < 1e-12));
        }
        assert!(validate_set(&zz, &tol()).is_valid());
    }

    #[test]
    fn tensor_with_trivial_povm() {
        let trivial = MeasurementSet::new(vec![Povm::trivial(2)]).unwrap();
        let b = sigma_xz_set();
        let t = tensor_sets(&trivial, &b);
        for l in 0..b.len() {
            for d in 0..2 {
                let expected = kron(&HermitianOperator::identity(2), b.effect(l, d));
                assert_eq!(t.effect(l, d), &expected);
            }
        }
    }

    #[test]
    fn tensor_of_xz_sets_layout() {
        let a = sigma_xz_set();
        let t = tensor_sets(&a, &a);
        assert_eq!(t.len(), 4);
        assert!(t.povms().iter().all(|p| p.num_outcomes() == 4));
        assert!(validate_set(&t, &tol()).is_valid());
        // POVM (k=1, l=0), outcome (c=1, d=0)
        let idx = pair_index(1, 0, 2);
        let expected = kron(a.effect(1, 1), a.effect(0, 0));
        assert_eq!(t.effect(idx, pair_index(1, 0, 2)), &expected);
        assert_eq!(unpair(idx, 2), (1, 0));
    }

    #[test]
    fn apply_trivial_parent() {
        let table = ResponseTable::new(vec![vec![vec![0.25, 0.75]], vec![vec![1.0, 0.0, 0.0]]]).unwrap();
        let set = apply_parent(&Povm::trivial(2), &table).unwrap();
        assert_eq!(set.effect(0, 1), &HermitianOperator::identity(2).scale(0.75));
        assert_eq!(set.effect(1, 0), &HermitianOperator::identity(2));
        assert!(validate_set(&set, &tol()).is_valid());
    }

    #[test]
    fn apply_parent_rejects_shape_mismatch() {
        let table = ResponseTable::new(vec![vec![vec![1.0], vec![1.0]]]).unwrap();
        assert!(matches!(apply_parent(&Povm::trivial(2), &table), Err(Error::Shape(_))));
    }

    #[test]
    fn deterministic_response_through_string_parent() {
        // parent on strings of a 2x2 set, realized by the computational basis of a 4-dim system
        let strings = DeterministicResponse::from_counts(&[2, 2], 10).unwrap();
        let parent = Povm::computational(4);
        let set = apply_parent(&parent, &ResponseTable::deterministic(&strings)).unwrap();
        assert!(validate_set(&set, &tol()).is_valid());
        // measurement 0 outcome 0 collects strings (0,0) and (0,1)
        assert_eq!(set.effect(0, 0), &HermitianOperator::diag(&[1.0, 1.0, 0.0, 0.0]));
        assert_eq!(set.effect(1, 0), &HermitianOperator::diag(&[1.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn random_set_is_deterministic_and_valid() {
        let a = random_set(2, 2, 2, 1).unwrap();
        let b = random_set(2, 2, 2, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_set(2, 2, 2, 2).unwrap());
        for seed in 0..20 {
            let s = random_set(3, 3, 3, seed).unwrap();
            assert!(validate_set(&s, &tol()).is_valid(), "seed {seed}");
        }
    }

    #[test]
    fn normalized_povm_is_exact() {
        let mut rng = rng_from_seed(4);
        let p = random_povm(3, 4, &mut rng).unwrap();
        let perturbed = Povm::new(p.effects().iter().map(|e| e.scale(1.0 + 1e-4)).collect()).unwrap();
        let fixed = perturbed.normalized().unwrap();
        assert!(fixed.effect_sum().max_abs_diff(&HermitianOperator::identity(3)) < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn random_parent_and_response_give_valid_sets(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let parent = random_povm(2, 3, &mut rng).unwrap();
            let entries: Vec<Vec<Vec<f64>>> = (0..2)
                .map(|_| (0..3).map(|_| random_distribution(2, &mut rng)).collect())
                .collect();
            let table = ResponseTable::new(entries).unwrap();
            let set = apply_parent(&parent, &table).unwrap();
            prop_assert!(validate_set(&set, &tol()).is_valid());
        }

        #[test]
        fn tensor_counts_and_completeness(seed in 0u64..1000) {
            let a = random_set(2, 2, 3, seed).unwrap();
            let b = random_set(2, 3, 2, seed + 7).unwrap();
            let t = tensor_sets(&a, &b);
            prop_assert_eq!(t.total_effects(), a.total_effects() * b.total_effects());
            prop_assert!(validate_set(&t, &tol()).is_valid());
        }
    }
}
