//! State-discrimination games played with local measurements.
//!
//! A referee picks an ensemble label `y ~ q(y)` and a state `ρ_{b|y}` with
//! probability `q(b|y)` and distributes it among the parties. Each party picks
//! one measurement from its set, the outcomes are pooled together with `y`,
//! and the label `b` is guessed. With LO the choices may depend on `y` only;
//! with one-round LOCC the second party may also condition on the first
//! party's outcome.
//!
//! The success probability is multilinear in independent row-stochastic
//! tables, so its maximum sits at a deterministic strategy and is found by
//! nested maximization. The compatible baseline measures fixed parent POVMs
//! and post-processes; it is bounded from below by alternating SDPs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conic::{solve_sdp, MatrixExpr, ScalarExpr, SdpProblem, Sense, SolveStatus, DEFAULT_SOLVER_TOL};
use crate::error::{Error, Result};
use crate::incompatibility::{compute_roi_with, RoiCertificate, RoiOptions};
use crate::linalg::{kron_all, psd_residual, trace_product, HermitianOperator};
use crate::measurements::{random_povm, MeasurementSet, Povm};
use crate::par::{self, Execution};
use crate::random::{derive_seed, random_density, random_distribution, rng_from_seed};

const PROB_TOL: f64 = 1e-9;
const STATE_TOL: f64 = 1e-8;
const STOCHASTIC_TOL: f64 = 1e-9;
pub const CHAIN_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedState {
    pub weight: f64,
    pub rho: HermitianOperator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ensemble {
    pub prior: f64,
    pub states: Vec<WeightedState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminationTask {
    pub party_dims: Vec<usize>,
    pub ensembles: Vec<Ensemble>,
}

impl DiscriminationTask {
    pub fn new(party_dims: Vec<usize>, ensembles: Vec<Ensemble>) -> Result<Self> {
        let task = DiscriminationTask { party_dims, ensembles };
        task.validate()?;
        Ok(task)
    }

    /// Checks the task invariants; errors carry a JSON pointer to the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.party_dims.is_empty() {
            return Err(Error::schema("/party_dims", "at least one party is required"));
        }
        if let Some(i) = self.party_dims.iter().position(|&d| d == 0) {
            return Err(Error::schema(format!("/party_dims/{i}"), "dimension must be positive"));
        }
        if self.ensembles.is_empty() {
            return Err(Error::schema("/ensembles", "at least one ensemble is required"));
        }
        let total = self.total_dim();
        let mut prior_sum = 0.0;
        for (y, ens) in self.ensembles.iter().enumerate() {
            if !(ens.prior.is_finite() && ens.prior >= 0.0) {
                return Err(Error::schema(
                    format!("/ensembles/{y}/prior"),
                    "must be a non-negative number",
                ));
            }
            prior_sum += ens.prior;
            if ens.states.is_empty() {
                return Err(Error::schema(
                    format!("/ensembles/{y}/states"),
                    "at least one state is required",
                ));
            }
            let mut weight_sum = 0.0;
            for (b, st) in ens.states.iter().enumerate() {
                let here = format!("/ensembles/{y}/states/{b}");
                if !(st.weight.is_finite() && st.weight >= 0.0) {
                    return Err(Error::schema(format!("{here}/weight"), "must be a non-negative number"));
                }
                weight_sum += st.weight;
                if st.rho.dim() != total {
                    return Err(Error::schema(
                        format!("{here}/rho"),
                        format!("state has dimension {}, parties need {total}", st.rho.dim()),
                    ));
                }
                let tr = st.rho.trace();
                if (tr - 1.0).abs() > STATE_TOL {
                    return Err(Error::schema(format!("{here}/rho"), format!("trace {tr} is not 1")));
                }
                let lo = psd_residual(&st.rho);
                if lo < -STATE_TOL {
                    return Err(Error::schema(
                        format!("{here}/rho"),
                        format!("not PSD (eigenvalue {lo:.3e})"),
                    ));
                }
            }
            if (weight_sum - 1.0).abs() > PROB_TOL {
                return Err(Error::schema(
                    format!("/ensembles/{y}/states"),
                    format!("weights sum to {weight_sum}, not 1"),
                ));
            }
        }
        if (prior_sum - 1.0).abs() > PROB_TOL {
            return Err(Error::schema("/ensembles", format!("priors sum to {prior_sum}, not 1")));
        }
        Ok(())
    }

    pub fn num_parties(&self) -> usize {
        self.party_dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.party_dims.iter().product()
    }

    pub fn num_ensembles(&self) -> usize {
        self.ensembles.len()
    }

    pub fn num_states(&self, y: usize) -> usize {
        self.ensembles[y].states.len()
    }

    /// `q(y)·q(b|y)`
    pub fn joint_weight(&self, y: usize, b: usize) -> f64 {
        self.ensembles[y].prior * self.ensembles[y].states[b].weight
    }

    pub fn state(&self, y: usize, b: usize) -> &HermitianOperator {
        &self.ensembles[y].states[b].rho
    }

    /// `∑_y q(y) max_b q(b|y)`: guessing from the ensemble label alone.
    pub fn no_measurement_value(&self) -> f64 {
        self.ensembles
            .iter()
            .map(|e| e.prior * e.states.iter().map(|s| s.weight).fold(0.0, f64::max))
            .sum()
    }

    /// Every state replaced by `(1−p)·ρ + p·I/D`.
    pub fn with_white_noise(&self, p: f64) -> Self {
        let d = self.total_dim();
        let white = HermitianOperator::identity(d).scale(p / d as f64);
        DiscriminationTask {
            party_dims: self.party_dims.clone(),
            ensembles: self
                .ensembles
                .iter()
                .map(|e| Ensemble {
                    prior: e.prior,
                    states: e
                        .states
                        .iter()
                        .map(|s| WeightedState {
                            weight: s.weight,
                            rho: &s.rho.scale(1.0 - p) + &white,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    fn check_sets(&self, sets: &[&MeasurementSet]) -> Result<()> {
        if sets.len() != self.num_parties() {
            return Err(Error::Shape(format!(
                "{} measurement sets for {} parties",
                sets.len(),
                self.num_parties()
            )));
        }
        for (set, &d) in sets.iter().zip(&self.party_dims) {
            if set.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: set.dim(),
                });
            }
        }
        Ok(())
    }
}

/// Seed-fixed random task: random priors and weights, random mixed states on
/// the joint space.
pub fn random_task(party_dims: &[usize], n_ensembles: usize, n_states: usize, seed: u64) -> Result<DiscriminationTask> {
    if n_ensembles == 0 || n_states == 0 || party_dims.is_empty() || party_dims.contains(&0) {
        return Err(Error::Invalid("random task needs positive sizes".into()));
    }
    let mut rng = rng_from_seed(seed);
    let d: usize = party_dims.iter().product();
    let priors = random_distribution(n_ensembles, &mut rng);
    let ensembles = priors
        .into_iter()
        .map(|prior| {
            let weights = random_distribution(n_states, &mut rng);
            Ensemble {
                prior,
                states: weights
                    .into_iter()
                    .map(|weight| WeightedState {
                        weight,
                        rho: random_density(d, &mut rng),
                    })
                    .collect(),
            }
        })
        .collect();
    DiscriminationTask::new(party_dims.to_vec(), ensembles)
}

/// Mixed-radix index helpers over per-party extents.
fn radix_index(digits: &[usize], extents: &[usize]) -> usize {
    digits.iter().zip(extents).fold(0, |acc, (&d, &e)| acc * e + d)
}

fn radix_digits(mut index: usize, extents: &[usize]) -> Vec<usize> {
    let mut out = vec![0; extents.len()];
    for i in (0..extents.len()).rev() {
        out[i] = index % extents[i];
        index /= extents[i];
    }
    out
}

/// `q(y)·q(b|y)·tr[ρ_{b|y} ⊗_i M^i_{c_i|k_i}]` for every label, joint setting
/// and joint outcome. Outcomes are padded to the largest count per party;
/// padded entries are zero.
#[derive(Debug, Clone)]
pub struct BornTable {
    settings: Vec<usize>,
    outcomes: Vec<usize>,
    n_settings: usize,
    n_outcomes: usize,
    n_states: Vec<usize>,
    /// `[y][(b·n_settings + s)·n_outcomes + o]`
    weights: Vec<Vec<f64>>,
}

impl BornTable {
    pub fn new(task: &DiscriminationTask, sets: &[&MeasurementSet], exec: Execution) -> Result<Self> {
        task.check_sets(sets)?;
        let settings: Vec<usize> = sets.iter().map(|s| s.len()).collect();
        let outcomes: Vec<usize> = sets.iter().map(|s| s.max_outcomes()).collect();
        let n_settings: usize = settings.iter().product();
        let n_outcomes: usize = outcomes.iter().product();
        let n_states: Vec<usize> = (0..task.num_ensembles()).map(|y| task.num_states(y)).collect();
        // per joint setting: [y][b][o]
        let blocks: Vec<Vec<Vec<Vec<f64>>>> = par::map_indices(exec, n_settings, |s| {
            let ks = radix_digits(s, &settings);
            let mut block: Vec<Vec<Vec<f64>>> = n_states.iter().map(|&nb| vec![vec![0.0; n_outcomes]; nb]).collect();
            for o in 0..n_outcomes {
                let cs = radix_digits(o, &outcomes);
                if cs
                    .iter()
                    .zip(&ks)
                    .enumerate()
                    .any(|(i, (&c, &k))| c >= sets[i].povm(k).num_outcomes())
                {
                    continue;
                }
                let effect = kron_all(cs.iter().zip(&ks).enumerate().map(|(i, (&c, &k))| sets[i].effect(k, c)));
                for (y, row) in block.iter_mut().enumerate() {
                    for (b, cell) in row.iter_mut().enumerate() {
                        cell[o] = task.joint_weight(y, b) * trace_product(task.state(y, b), &effect);
                    }
                }
            }
            block
        });
        let weights = (0..n_states.len())
            .map(|y| {
                let mut flat = vec![0.0; n_states[y] * n_settings * n_outcomes];
                for (s, block) in blocks.iter().enumerate() {
                    for b in 0..n_states[y] {
                        let start = (b * n_settings + s) * n_outcomes;
                        flat[start..start + n_outcomes].copy_from_slice(&block[y][b]);
                    }
                }
                flat
            })
            .collect();
        Ok(BornTable {
            settings,
            outcomes,
            n_settings,
            n_outcomes,
            n_states,
            weights,
        })
    }

    pub fn get(&self, y: usize, b: usize, s: usize, o: usize) -> f64 {
        self.weights[y][(b * self.n_settings + s) * self.n_outcomes + o]
    }

    /// `max_b` and its first maximizer.
    fn best_guess(&self, y: usize, s: usize, o: usize) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for b in 0..self.n_states[y] {
            let v = self.get(y, b, s, o);
            if v > best.0 {
                best = (v, b);
            }
        }
        best
    }

    pub fn setting_index(&self, ks: &[usize]) -> usize {
        radix_index(ks, &self.settings)
    }

    pub fn outcome_index(&self, cs: &[usize]) -> usize {
        radix_index(cs, &self.outcomes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Lo,
    Locc1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondChoice {
    /// `p(l|y)` as `[y][l]`
    Independent(Vec<Vec<f64>>),
    /// `p(l|c,y)` as `[y][c][l]`
    Conditioned(Vec<Vec<Vec<f64>>>),
}

/// Two-party strategy. Outcome indices are padded to the largest outcome count of each set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalStrategy {
    /// `p(k|y)` as `[y][k]`
    pub choose_k: Vec<Vec<f64>>,
    pub choose_l: SecondChoice,
    /// `p(b|c,d,y)` as `[y][c][d][b]`
    pub guess: Vec<Vec<Vec<Vec<f64>>>>,
}

fn delta(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

fn check_row(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len {
        return Err(Error::Shape(format!(
            "{what}: row of length {} where {len} expected",
            row.len()
        )));
    }
    let sum: f64 = row.iter().sum();
    if row.iter().any(|&p| p.is_nan() || p < -STOCHASTIC_TOL) || (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Invalid(format!("{what}: row is not a probability vector")));
    }
    Ok(())
}

impl LocalStrategy {
    pub fn mode(&self) -> Mode {
        match self.choose_l {
            SecondChoice::Independent(_) => Mode::Lo,
            SecondChoice::Conditioned(_) => Mode::Locc1,
        }
    }

    /// Deterministic LO strategy from `(k, l)` per label and `guess[y][c][d] = b`.
    pub fn deterministic_lo(
        task: &DiscriminationTask,
        a: &MeasurementSet,
        b: &MeasurementSet,
        choices: &[(usize, usize)],
        guess: &[Vec<Vec<usize>>],
    ) -> Self {
        LocalStrategy {
            choose_k: choices.iter().map(|&(k, _)| delta(a.len(), k)).collect(),
            choose_l: SecondChoice::Independent(choices.iter().map(|&(_, l)| delta(b.len(), l)).collect()),
            guess: Self::guess_tables(task, guess),
        }
    }

    /// Deterministic LOCC1 strategy: `k` per label, `l[y][c]`, `guess[y][c][d] = b`.
    pub fn deterministic_locc1(
        task: &DiscriminationTask,
        a: &MeasurementSet,
        b: &MeasurementSet,
        ks: &[usize],
        ls: &[Vec<usize>],
        guess: &[Vec<Vec<usize>>],
    ) -> Self {
        LocalStrategy {
            choose_k: ks.iter().map(|&k| delta(a.len(), k)).collect(),
            choose_l: SecondChoice::Conditioned(
                ls.iter()
                    .map(|row| row.iter().map(|&l| delta(b.len(), l)).collect())
                    .collect(),
            ),
            guess: Self::guess_tables(task, guess),
        }
    }

    fn guess_tables(task: &DiscriminationTask, guess: &[Vec<Vec<usize>>]) -> Vec<Vec<Vec<Vec<f64>>>> {
        guess
            .iter()
            .enumerate()
            .map(|(y, gy)| {
                gy.iter()
                    .map(|gc| gc.iter().map(|&bb| delta(task.num_states(y), bb)).collect())
                    .collect()
            })
            .collect()
    }

    /// Uniform choices and uniform guesses.
    pub fn uniform(task: &DiscriminationTask, a: &MeasurementSet, b: &MeasurementSet) -> Self {
        let ny = task.num_ensembles();
        let (oa, ob) = (a.max_outcomes(), b.max_outcomes());
        LocalStrategy {
            choose_k: vec![vec![1.0 / a.len() as f64; a.len()]; ny],
            choose_l: SecondChoice::Independent(vec![vec![1.0 / b.len() as f64; b.len()]; ny]),
            guess: (0..ny)
                .map(|y| {
                    let nb = task.num_states(y);
                    vec![vec![vec![1.0 / nb as f64; nb]; ob]; oa]
                })
                .collect(),
        }
    }

    pub fn validate(&self, task: &DiscriminationTask, a: &MeasurementSet, b: &MeasurementSet) -> Result<()> {
        let ny = task.num_ensembles();
        let (oa, ob) = (a.max_outcomes(), b.max_outcomes());
        if self.choose_k.len() != ny || self.guess.len() != ny {
            return Err(Error::Shape("strategy tables must have one row per ensemble".into()));
        }
        for row in &self.choose_k {
            check_row(row, a.len(), "p(k|y)")?;
        }
        match &self.choose_l {
            SecondChoice::Independent(t) => {
                if t.len() != ny {
                    return Err(Error::Shape("p(l|y) must have one row per ensemble".into()));
                }
                for row in t {
                    check_row(row, b.len(), "p(l|y)")?;
                }
            }
            SecondChoice::Conditioned(t) => {
                if t.len() != ny || t.iter().any(|ty| ty.len() != oa) {
                    return Err(Error::Shape("p(l|c,y) must be indexed [y][c]".into()));
                }
                for row in t.iter().flatten() {
                    check_row(row, b.len(), "p(l|c,y)")?;
                }
            }
        }
        for (y, gy) in self.guess.iter().enumerate() {
            if gy.len() != oa || gy.iter().any(|gc| gc.len() != ob) {
                return Err(Error::Shape("p(b|c,d,y) must be indexed [y][c][d]".into()));
            }
            for row in gy.iter().flatten() {
                check_row(row, task.num_states(y), "p(b|c,d,y)")?;
            }
        }
        Ok(())
    }
}

/// Success probability of a fixed two-party strategy.
pub fn psg_fixed(
    task: &DiscriminationTask,
    a: &MeasurementSet,
    b: &MeasurementSet,
    strategy: &LocalStrategy,
) -> Result<f64> {
    strategy.validate(task, a, b)?;
    let table = BornTable::new(task, &[a, b], Execution::Sequential)?;
    Ok(psg_fixed_table(&table, a, b, strategy))
}

fn psg_fixed_table(table: &BornTable, a: &MeasurementSet, b: &MeasurementSet, st: &LocalStrategy) -> f64 {
    let (oa, ob) = (a.max_outcomes(), b.max_outcomes());
    let mut total = 0.0;
    for y in 0..table.n_states.len() {
        for k in 0..a.len() {
            let pk = st.choose_k[y][k];
            if pk == 0.0 {
                continue;
            }
            for c in 0..oa {
                for l in 0..b.len() {
                    let pl = match &st.choose_l {
                        SecondChoice::Independent(t) => t[y][l],
                        SecondChoice::Conditioned(t) => t[y][c][l],
                    };
                    if pl == 0.0 {
                        continue;
                    }
                    let s = table.setting_index(&[k, l]);
                    for d in 0..ob {
                        let o = table.outcome_index(&[c, d]);
                        let g = &st.guess[y][c][d];
                        let inner: f64 = (0..table.n_states[y]).map(|bb| g[bb] * table.get(y, bb, s, o)).sum();
                        total += pk * pl * inner;
                    }
                }
            }
        }
    }
    total
}

/// n-party LO strategy: independent choices per party, guess on the joint outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NPartyStrategy {
    /// `p(k_i|y)` as `[party][y][k]`
    pub choose: Vec<Vec<Vec<f64>>>,
    /// `p(b|o,y)` as `[y][o][b]` with `o` the mixed-radix joint outcome.
    pub guess: Vec<Vec<Vec<f64>>>,
}

pub fn psg_fixed_n(task: &DiscriminationTask, sets: &[MeasurementSet], strategy: &NPartyStrategy) -> Result<f64> {
    let refs: Vec<&MeasurementSet> = sets.iter().collect();
    let table = BornTable::new(task, &refs, Execution::Sequential)?;
    let ny = task.num_ensembles();
    if strategy.choose.len() != sets.len() || strategy.guess.len() != ny {
        return Err(Error::Shape("n-party strategy has wrong number of tables".into()));
    }
    for (i, t) in strategy.choose.iter().enumerate() {
        if t.len() != ny {
            return Err(Error::Shape("choice table must have one row per ensemble".into()));
        }
        for row in t {
            check_row(row, sets[i].len(), "p(k|y)")?;
        }
    }
    for (y, gy) in strategy.guess.iter().enumerate() {
        if gy.len() != table.n_outcomes {
            return Err(Error::Shape("guess table must cover every joint outcome".into()));
        }
        for row in gy {
            check_row(row, task.num_states(y), "p(b|o,y)")?;
        }
    }
    let mut total = 0.0;
    for y in 0..ny {
        for s in 0..table.n_settings {
            let ks = radix_digits(s, &table.settings);
            let p: f64 = ks.iter().enumerate().map(|(i, &k)| strategy.choose[i][y][k]).product();
            if p == 0.0 {
                continue;
            }
            for o in 0..table.n_outcomes {
                let g = &strategy.guess[y][o];
                total += p
                    * (0..table.n_states[y])
                        .map(|b| g[b] * table.get(y, b, s, o))
                        .sum::<f64>();
            }
        }
    }
    Ok(total)
}

/// Per label: best joint setting and guesses for every joint outcome.
fn nested_max_lo(table: &BornTable) -> (f64, Vec<usize>, Vec<Vec<usize>>) {
    let ny = table.n_states.len();
    let mut value = 0.0;
    let mut settings = Vec::with_capacity(ny);
    let mut guesses = Vec::with_capacity(ny);
    for y in 0..ny {
        let mut best = (f64::NEG_INFINITY, 0, Vec::new());
        for s in 0..table.n_settings {
            let mut v = 0.0;
            let mut g = Vec::with_capacity(table.n_outcomes);
            for o in 0..table.n_outcomes {
                let (pv, bb) = table.best_guess(y, s, o);
                v += pv;
                g.push(bb);
            }
            if v > best.0 {
                best = (v, s, g);
            }
        }
        value += best.0;
        settings.push(best.1);
        guesses.push(best.2);
    }
    (value, settings, guesses)
}

/// Optimal LO value `∑_y max_{k,l} ∑_{c,d} max_b q(y)q(b|y)tr[ρ M⊗N]` and a deterministic optimizer.
pub fn psg_best_lo(task: &DiscriminationTask, a: &MeasurementSet, b: &MeasurementSet) -> Result<(f64, LocalStrategy)> {
    let table = BornTable::new(task, &[a, b], Execution::default())?;
    let (value, settings, guesses) = nested_max_lo(&table);
    let choices: Vec<(usize, usize)> = settings
        .iter()
        .map(|&s| {
            let ks = radix_digits(s, &table.settings);
            (ks[0], ks[1])
        })
        .collect();
    let (oa, ob) = (a.max_outcomes(), b.max_outcomes());
    let guess: Vec<Vec<Vec<usize>>> = guesses
        .iter()
        .map(|g| {
            (0..oa)
                .map(|c| (0..ob).map(|d| g[table.outcome_index(&[c, d])]).collect())
                .collect()
        })
        .collect();
    Ok((value, LocalStrategy::deterministic_lo(task, a, b, &choices, &guess)))
}

/// Optimal one-round LOCC value `∑_y max_k ∑_c max_l ∑_d max_b (…)` (first party communicates to the second).
pub fn psg_best_locc1(
    task: &DiscriminationTask,
    a: &MeasurementSet,
    b: &MeasurementSet,
) -> Result<(f64, LocalStrategy)> {
    let table = BornTable::new(task, &[a, b], Execution::default())?;
    let (oa, ob) = (a.max_outcomes(), b.max_outcomes());
    let ny = task.num_ensembles();
    let mut value = 0.0;
    let mut ks = Vec::with_capacity(ny);
    let mut ls = Vec::with_capacity(ny);
    let mut guess = Vec::with_capacity(ny);
    for y in 0..ny {
        let mut best_k = (f64::NEG_INFINITY, 0, Vec::new(), Vec::new());
        for k in 0..a.len() {
            let mut vk = 0.0;
            let mut lrow = Vec::with_capacity(oa);
            let mut grow = Vec::with_capacity(oa);
            for c in 0..oa {
                let mut best_l = (f64::NEG_INFINITY, 0, Vec::new());
                for l in 0..b.len() {
                    let s = table.setting_index(&[k, l]);
                    let mut vl = 0.0;
                    let mut g = Vec::with_capacity(ob);
                    for d in 0..ob {
                        let (pv, bb) = table.best_guess(y, s, table.outcome_index(&[c, d]));
                        vl += pv;
                        g.push(bb);
                    }
                    if vl > best_l.0 {
                        best_l = (vl, l, g);
                    }
                }
                vk += best_l.0;
                lrow.push(best_l.1);
                grow.push(best_l.2);
            }
            if vk > best_k.0 {
                best_k = (vk, k, lrow, grow);
            }
        }
        value += best_k.0;
        ks.push(best_k.1);
        ls.push(best_k.2);
        guess.push(best_k.3);
    }
    Ok((value, LocalStrategy::deterministic_locc1(task, a, b, &ks, &ls, &guess)))
}

/// n-party LO optimum by nested maximization.
pub fn psg_best_lo_n(task: &DiscriminationTask, sets: &[MeasurementSet]) -> Result<(f64, NPartyStrategy)> {
    let refs: Vec<&MeasurementSet> = sets.iter().collect();
    let table = BornTable::new(task, &refs, Execution::default())?;
    let (value, settings, guesses) = nested_max_lo(&table);
    let choose = (0..sets.len())
        .map(|i| {
            settings
                .iter()
                .map(|&s| delta(sets[i].len(), radix_digits(s, &table.settings)[i]))
                .collect()
        })
        .collect();
    let guess = guesses
        .iter()
        .enumerate()
        .map(|(y, g)| g.iter().map(|&bb| delta(task.num_states(y), bb)).collect())
        .collect();
    Ok((value, NPartyStrategy { choose, guess }))
}

/// Best post-processed value of fixed parent POVMs with the guess depending on `y`:
/// `∑_y ∑_{λ…} max_b q(y)q(b|y)tr[ρ_{b|y} G_λ⊗…]`. Returns the value and the
/// maximizing label `[y][joint parent outcome]`.
pub fn psg_parents_detail(task: &DiscriminationTask, parents: &[Povm]) -> Result<(f64, Vec<Vec<usize>>)> {
    let sets = parents
        .iter()
        .map(|p| MeasurementSet::new(vec![p.clone()]))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&MeasurementSet> = sets.iter().collect();
    let table = BornTable::new(task, &refs, Execution::Sequential)?;
    let mut value = 0.0;
    let assignment = (0..task.num_ensembles())
        .map(|y| {
            (0..table.n_outcomes)
                .map(|o| {
                    let (v, b) = table.best_guess(y, 0, o);
                    value += v;
                    b
                })
                .collect()
        })
        .collect();
    Ok((value, assignment))
}

pub fn psg_parents(task: &DiscriminationTask, parents: &[Povm]) -> Result<f64> {
    Ok(psg_parents_detail(task, parents)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeesawOptions {
    /// Outcome counts of the two parent POVMs.
    pub parent_sizes: (usize, usize),
    /// Number of random starting points.
    pub restarts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once a sweep improves the value by less than this, relative.
    pub rel_tol: f64,
    pub solver_tol: f64,
    pub execution: Execution,
}

impl SeesawOptions {
    pub fn new(parent_sizes: (usize, usize)) -> Self {
        SeesawOptions {
            parent_sizes,
            restarts: 20,
            seed: 0,
            max_iter: 200,
            rel_tol: 1e-9,
            solver_tol: DEFAULT_SOLVER_TOL,
            execution: Execution::default(),
        }
    }
}

/// Parent sizes equal to the deterministic-string counts of the two sets.
pub fn default_parent_sizes(a: &MeasurementSet, b: &MeasurementSet) -> Result<(usize, usize)> {
    let conv = |n: u128| usize::try_from(n).map_err(|_| Error::Invalid("string count overflows".into()));
    Ok((conv(a.string_count())?, conv(b.string_count())?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Warm,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub kind: StartKind,
    pub initial_value: f64,
    pub value: f64,
    pub iterations: usize,
    /// Sweeps cut short by a backend failure.
    pub solver_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeesawResult {
    /// Best value found; a feasible compatible strategy attains it.
    pub value: f64,
    pub parents: Vec<Povm>,
    /// Guess `[y][λ·|H|+ν]`.
    pub assignment: Vec<Vec<usize>>,
    pub best_start: usize,
    pub starts: Vec<StartRecord>,
    /// Value after each sweep of the best start.
    pub history: Vec<f64>,
}

impl SeesawResult {
    /// Best value over random starts only.
    pub fn best_random_value(&self) -> Option<f64> {
        self.starts
            .iter()
            .filter(|s| s.kind == StartKind::Random)
            .map(|s| s.value)
            .reduce(f64::max)
    }
}

/// `max ∑_λ tr[A_λ G_λ]` over POVMs `G`.
fn best_povm_for(weights: &[HermitianOperator], dim: usize, tol: f64) -> Result<Povm> {
    let mut p = SdpProblem::new(Sense::Maximize);
    let vars: Vec<_> = (0..weights.len())
        .map(|i| p.add_psd_var(format!("G{i}"), dim))
        .collect();
    let mut sum = MatrixExpr::new(dim).plus_constant(&HermitianOperator::identity(dim).scale(-1.0));
    let mut obj = ScalarExpr::new();
    for (v, a) in vars.iter().zip(weights) {
        sum = sum.plus_var(1.0, *v);
        obj = obj.plus_trace(a.clone(), *v);
    }
    p.add_matrix_eq(sum);
    p.set_objective(obj);
    let sol = solve_sdp(&p, tol)?;
    match sol.status {
        SolveStatus::Optimal | SolveStatus::Inaccurate => {
            Povm::new(vars.iter().map(|&v| sol.psd(v).clone()).collect())?.normalized()
        }
        other => Err(Error::Solver(format!(
            "parent update: {other:?} {}",
            sol.diagnostic.unwrap_or_default()
        ))),
    }
}

struct SeesawRun {
    value: f64,
    parents: (Povm, Povm),
    assignment: Vec<Vec<usize>>,
    record: StartRecord,
    history: Vec<f64>,
}

/// Best first-party POVM for a fixed second parent and guess table.
fn update_first(task: &DiscriminationTask, n_out: usize, h: &Povm, guess: &[Vec<usize>], tol: f64) -> Result<Povm> {
    let (da, db) = (task.party_dims[0], task.party_dims[1]);
    let nh = h.num_outcomes();
    let mut weights = vec![HermitianOperator::zeros(da); n_out];
    for (y, gy) in guess.iter().enumerate() {
        for b in 0..task.num_states(y) {
            let q = task.joint_weight(y, b);
            for (nu, hn) in h.effects().iter().enumerate() {
                let lams: Vec<usize> = (0..n_out).filter(|&lam| gy[lam * nh + nu] == b).collect();
                if lams.is_empty() || q == 0.0 {
                    continue;
                }
                let c = task.state(y, b).contract_second(da, db, hn)?.scale(q);
                for lam in lams {
                    weights[lam] = &weights[lam] + &c;
                }
            }
        }
    }
    best_povm_for(&weights, da, tol)
}

/// Best second-party POVM for a fixed first parent and guess table.
fn update_second(task: &DiscriminationTask, n_out: usize, g: &Povm, guess: &[Vec<usize>], tol: f64) -> Result<Povm> {
    let (da, db) = (task.party_dims[0], task.party_dims[1]);
    let mut weights = vec![HermitianOperator::zeros(db); n_out];
    for (y, gy) in guess.iter().enumerate() {
        for b in 0..task.num_states(y) {
            let q = task.joint_weight(y, b);
            for (lam, gl) in g.effects().iter().enumerate() {
                let nus: Vec<usize> = (0..n_out).filter(|&nu| gy[lam * n_out + nu] == b).collect();
                if nus.is_empty() || q == 0.0 {
                    continue;
                }
                let c = task.state(y, b).contract_first(da, db, gl)?.scale(q);
                for nu in nus {
                    weights[nu] = &weights[nu] + &c;
                }
            }
        }
    }
    best_povm_for(&weights, db, tol)
}

/// Alternating updates from `(g, h)`. With `first_guide`, the first parent is
/// first replaced by its best response to `h` under that guess table, which
/// keeps random starts from inheriting the tie pattern of an uninformative
/// random parent.
fn seesaw_from(
    task: &DiscriminationTask,
    start: (Povm, Povm),
    kind: StartKind,
    first_guide: Option<Vec<Vec<usize>>>,
    opts: &SeesawOptions,
) -> Result<SeesawRun> {
    let (mut g, mut h) = start;
    let mut failures = 0;
    if let Some(guide) = first_guide {
        match update_first(task, g.num_outcomes(), &h, &guide, opts.solver_tol) {
            Ok(cand) => g = cand,
            Err(Error::Solver(_)) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    let (mut value, mut assignment) = psg_parents_detail(task, &[g.clone(), h.clone()])?;
    let initial_value = value;
    let mut history = vec![value];
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let before = value;
        match update_first(task, g.num_outcomes(), &h, &assignment, opts.solver_tol) {
            Ok(cand) => {
                let (v, asg) = psg_parents_detail(task, &[cand.clone(), h.clone()])?;
                if v >= value {
                    g = cand;
                    value = v;
                    assignment = asg;
                }
            }
            Err(Error::Solver(_)) => {
                failures += 1;
                break;
            }
            Err(e) => return Err(e),
        }
        match update_second(task, h.num_outcomes(), &g, &assignment, opts.solver_tol) {
            Ok(cand) => {
                let (v, asg) = psg_parents_detail(task, &[g.clone(), cand.clone()])?;
                if v >= value {
                    h = cand;
                    value = v;
                    assignment = asg;
                }
            }
            Err(Error::Solver(_)) => {
                failures += 1;
                break;
            }
            Err(e) => return Err(e),
        }
        history.push(value);
        if value - before <= opts.rel_tol * before.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(SeesawRun {
        value,
        parents: (g, h),
        assignment,
        record: StartRecord {
            kind,
            initial_value,
            value,
            iterations,
            solver_failures: failures,
        },
        history,
    })
}

/// Lower bound on the compatible baseline by alternating SDPs over the two
/// parent POVMs, from each warm start and from `opts.restarts` random starts.
pub fn psg_compatible_seesaw(
    task: &DiscriminationTask,
    opts: &SeesawOptions,
    warm_starts: &[(Povm, Povm)],
) -> Result<SeesawResult> {
    task.validate()?;
    if task.num_parties() != 2 {
        return Err(Error::Shape(format!(
            "see-saw is bipartite, task has {} parties",
            task.num_parties()
        )));
    }
    let (na, nb) = opts.parent_sizes;
    if na == 0 || nb == 0 {
        return Err(Error::Invalid("parent sizes must be positive".into()));
    }
    let (da, db) = (task.party_dims[0], task.party_dims[1]);
    for (g, h) in warm_starts {
        if g.dim() != da || h.dim() != db {
            return Err(Error::DimensionMismatch {
                expected: da,
                found: g.dim(),
            });
        }
    }
    let total = warm_starts.len() + opts.restarts;
    if total == 0 {
        return Err(Error::Invalid("see-saw needs at least one start".into()));
    }
    let runs = par::map_indices(opts.execution, total, |i| -> Result<SeesawRun> {
        if i < warm_starts.len() {
            seesaw_from(task, warm_starts[i].clone(), StartKind::Warm, None, opts)
        } else {
            let mut rng = rng_from_seed(derive_seed(opts.seed, (i - warm_starts.len()) as u64));
            let g = random_povm(da, na, &mut rng)?;
            let h = random_povm(db, nb, &mut rng)?;
            let guide = (0..task.num_ensembles())
                .map(|y| (0..na * nb).map(|_| rng.gen_range(0..task.num_states(y))).collect())
                .collect();
            seesaw_from(task, (g, h), StartKind::Random, Some(guide), opts)
        }
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let best_start = runs
        .iter()
        .enumerate()
        .fold(0, |best, (i, r)| if r.value > runs[best].value { i } else { best });
    let starts = runs.iter().map(|r| r.record.clone()).collect();
    let best = runs.into_iter().nth(best_start).expect("at least one start");
    Ok(SeesawResult {
        value: best.value,
        parents: vec![best.parents.0, best.parents.1],
        assignment: best.assignment,
        best_start,
        starts,
        history: best.history,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundOptions {
    pub roi: RoiOptions,
    /// Random see-saw starts for the compatible estimate; 0 skips the see-saw.
    pub seesaw_restarts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub parties: usize,
    pub p_i_lo: f64,
    /// Two parties only.
    pub p_i_locc1: Option<f64>,
    pub rois: Vec<f64>,
    /// `∏_i (1 + I_i)`
    pub bound_factor: f64,
    /// `psg_parents` at the ROI-optimal parents.
    pub proof_chain_value: f64,
    pub chain_holds_lo: bool,
    pub chain_holds_locc1: Option<bool>,
    pub seesaw_value: Option<f64>,
    /// Best certified lower bound on the compatible value.
    pub compatible_estimate: f64,
    /// `P_I_lo / compatible_estimate`
    pub ratio: f64,
    pub pass: bool,
}

pub fn bound_report(task: &DiscriminationTask, sets: &[MeasurementSet], opts: &BoundOptions) -> Result<BoundReport> {
    let certs = sets
        .iter()
        .map(|s| compute_roi_with(s, &opts.roi))
        .collect::<Result<Vec<_>>>()?;
    bound_report_with_certs(task, sets, &certs, opts)
}

/// As [`bound_report`] with the ROI certificates supplied by the caller.
pub fn bound_report_with_certs(
    task: &DiscriminationTask,
    sets: &[MeasurementSet],
    certs: &[RoiCertificate],
    opts: &BoundOptions,
) -> Result<BoundReport> {
    task.validate()?;
    if certs.len() != sets.len() {
        return Err(Error::Shape("one certificate per measurement set is required".into()));
    }
    let n = task.num_parties();
    let (p_i_lo, _) = psg_best_lo_n(task, sets)?;
    let p_i_locc1 = if n == 2 {
        Some(psg_best_locc1(task, &sets[0], &sets[1])?.0)
    } else {
        None
    };
    let rois: Vec<f64> = certs.iter().map(|c| c.roi).collect();
    let bound_factor: f64 = rois.iter().map(|r| 1.0 + r).product();
    let parents = certs.iter().map(|c| c.parent_povm()).collect::<Result<Vec<_>>>()?;
    let proof_chain_value = psg_parents(task, &parents)?;
    let cap = bound_factor * proof_chain_value + CHAIN_SLACK;
    let chain_holds_lo = p_i_lo <= cap;
    let chain_holds_locc1 = p_i_locc1.map(|v| v <= cap);
    let seesaw_value = if n == 2 && opts.seesaw_restarts > 0 {
        let mut so = SeesawOptions::new(default_parent_sizes(&sets[0], &sets[1])?);
        so.restarts = opts.seesaw_restarts;
        so.seed = opts.seed;
        so.execution = opts.roi.execution;
        Some(psg_compatible_seesaw(task, &so, &[])?.value)
    } else {
        None
    };
    let compatible_estimate = seesaw_value.map_or(proof_chain_value, |v| v.max(proof_chain_value));
    Ok(BoundReport {
        parties: n,
        p_i_lo,
        p_i_locc1,
        rois,
        bound_factor,
        proof_chain_value,
        chain_holds_lo,
        chain_holds_locc1,
        seesaw_value,
        compatible_estimate,
        ratio: p_i_lo / compatible_estimate,
        pass: chain_holds_lo && chain_holds_locc1.unwrap_or(true),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{kron, C64};
    use crate::measurements::{pauli, random_projective_set, sigma_xz_set};

    fn ket(bits: &[usize]) -> HermitianOperator {
        let d = 1 << bits.len();
        let idx = bits.iter().fold(0, |acc, &b| acc * 2 + b);
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[idx] = C64::new(1.0, 0.0);
        HermitianOperator::projector(&v).unwrap()
    }

    fn single_ensemble(dims: Vec<usize>, states: Vec<(f64, HermitianOperator)>) -> DiscriminationTask {
        DiscriminationTask::new(
            dims,
            vec![Ensemble {
                prior: 1.0,
                states: states
                    .into_iter()
                    .map(|(weight, rho)| WeightedState { weight, rho })
                    .collect(),
            }],
        )
        .unwrap()
    }

    fn orthogonal_product_task() -> DiscriminationTask {
        single_ensemble(vec![2, 2], vec![(0.5, ket(&[0, 0])), (0.5, ket(&[1, 1]))])
    }

    fn z_set() -> MeasurementSet {
        MeasurementSet::new(vec![Povm::from_observable(&pauli::z())]).unwrap()
    }

    #[test]
    fn fixed_strategy_examples() {
        let task = orthogonal_product_task();
        let z = z_set();
        // from_observable gives outcome 0 for eigenvalue +1, i.e. |0⟩
        let right = LocalStrategy::deterministic_lo(&task, &z, &z, &[(0, 0)], &[vec![vec![0, 0], vec![1, 1]]]);
        assert!((psg_fixed(&task, &z, &z, &right).unwrap() - 1.0).abs() < 1e-12);
        let flipped = LocalStrategy::deterministic_lo(&task, &z, &z, &[(0, 0)], &[vec![vec![1, 1], vec![0, 0]]]);
        assert!(psg_fixed(&task, &z, &z, &flipped).unwrap().abs() < 1e-12);
        let xz = sigma_xz_set();
        let uniform = LocalStrategy::uniform(&task, &xz, &xz);
        assert!((psg_fixed(&task, &xz, &xz, &uniform).unwrap() - 0.5).abs() < 1e-12);
        let random = random_task(&[2, 2], 3, 2, 5).unwrap();
        assert!(
            (psg_fixed(&random, &xz, &xz, &LocalStrategy::uniform(&random, &xz, &xz)).unwrap() - 0.5).abs() < 1e-12
        );
    }

    #[test]
    fn malformed_strategy_rejected() {
        let task = orthogonal_product_task();
        let z = z_set();
        let mut st = LocalStrategy::uniform(&task, &z, &z);
        st.choose_k[0] = vec![0.5];
        assert!(psg_fixed(&task, &z, &z, &st).is_err());
        let mut st = LocalStrategy::uniform(&task, &z, &z);
        st.guess.clear();
        assert!(matches!(psg_fixed(&task, &z, &z, &st), Err(Error::Shape(_))));
    }

    #[test]
    fn best_lo_examples() {
        let task = orthogonal_product_task();
        let xz = sigma_xz_set();
        let (v, st) = psg_best_lo(&task, &xz, &xz).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // σ_z is index 1 in the σx/σz set; one party measuring it already suffices
        let SecondChoice::Independent(l) = &st.choose_l else {
            panic!("LO strategy")
        };
        assert!(st.choose_k[0][1] == 1.0 || l[0][1] == 1.0);
        assert!((psg_fixed(&task, &xz, &xz, &st).unwrap() - v).abs() < 1e-12);

        let rho = random_density(4, &mut rng_from_seed(3));
        let same = single_ensemble(vec![2, 2], vec![(0.7, rho.clone()), (0.3, rho)]);
        let (v, _) = psg_best_lo(&same, &xz, &xz).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn locc1_examples() {
        let task = orthogonal_product_task();
        let xz = sigma_xz_set();
        assert!((psg_best_locc1(&task, &xz, &xz).unwrap().0 - 1.0).abs() < 1e-12);
        for seed in 0..5 {
            let t = random_task(&[2, 2], 2, 3, seed).unwrap();
            let lo = psg_best_lo(&t, &xz, &z_set()).unwrap().0;
            let locc = psg_best_locc1(&t, &xz, &z_set()).unwrap();
            assert!((lo - locc.0).abs() < 1e-12);
            assert!((psg_fixed(&t, &xz, &z_set(), &locc.1).unwrap() - locc.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ordering_properties() {
        for seed in 0..10 {
            let t = random_task(&[2, 2], 2, 3, seed).unwrap();
            let a = random_projective_set(2, 2, 2, seed + 100).unwrap();
            let b = random_projective_set(2, 2, 2, seed + 200).unwrap();
            let lo = psg_best_lo(&t, &a, &b).unwrap().0;
            let locc = psg_best_locc1(&t, &a, &b).unwrap().0;
            assert!(lo <= locc + 1e-12);
            assert!(locc <= 1.0 + 1e-9);
            assert!(lo >= t.no_measurement_value() - 1e-12);
        }
    }

    #[test]
    fn n_party_reduces_to_two() {
        let t = random_task(&[2, 2], 3, 2, 9).unwrap();
        let xz = sigma_xz_set();
        let two = psg_best_lo(&t, &xz, &xz).unwrap().0;
        let (n, st) = psg_best_lo_n(&t, &[xz.clone(), xz.clone()]).unwrap();
        assert_eq!(two, n);
        assert!((psg_fixed_n(&t, &[xz.clone(), xz], &st).unwrap() - n).abs() < 1e-12);
    }

    #[test]
    fn three_party_ghz_task() {
        // ρ0 = GHZ+, ρ1 = |000⟩⟨000|, equal weights; σ_z everywhere.
        // Outcome 000: max(¼, ½) = ½; outcome 111: ¼ → 0.75.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut ghz = vec![C64::new(0.0, 0.0); 8];
        ghz[0] = C64::new(s, 0.0);
        ghz[7] = C64::new(s, 0.0);
        let task = single_ensemble(
            vec![2, 2, 2],
            vec![
                (0.5, HermitianOperator::projector(&ghz).unwrap()),
                (0.5, ket(&[0, 0, 0])),
            ],
        );
        let z = z_set();
        let (v, _) = psg_best_lo_n(&task, &[z.clone(), z.clone(), z]).unwrap();
        assert!((v - 0.75).abs() < 1e-12);
    }

    #[test]
    fn parents_examples() {
        let task = orthogonal_product_task();
        let z = Povm::from_observable(&pauli::z());
        assert!((psg_parents(&task, &[z.clone(), z]).unwrap() - 1.0).abs() < 1e-12);
        let t = random_task(&[2, 3], 3, 3, 1).unwrap();
        let v = psg_parents(&t, &[Povm::trivial(2), Povm::trivial(3)]).unwrap();
        assert!((v - t.no_measurement_value()).abs() < 1e-12);
    }

    #[test]
    fn proof_chain_on_random_tasks() {
        let xz = sigma_xz_set();
        for seed in 0..5 {
            let t = random_task(&[2, 2], 2, 2, seed).unwrap();
            let r = bound_report(&t, &[xz.clone(), xz.clone()], &BoundOptions::default()).unwrap();
            assert!(r.pass, "{r:?}");
            let lhs = r.p_i_lo / r.bound_factor;
            assert!(r.proof_chain_value >= lhs - 1e-9);
        }
    }

    #[test]
    fn compatible_sets_give_unit_ratio() {
        let t = random_task(&[2, 2], 2, 2, 4).unwrap();
        let z = z_set();
        let r = bound_report(&t, &[z.clone(), z], &BoundOptions::default()).unwrap();
        assert!(r.ratio <= 1.0 + 1e-6, "{r:?}");
    }

    #[test]
    fn seesaw_orthogonal_task() {
        let task = orthogonal_product_task();
        let mut opts = SeesawOptions::new((2, 2));
        opts.restarts = 3;
        let r = psg_compatible_seesaw(&task, &opts, &[]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
    }

    #[test]
    fn seesaw_trivial_task() {
        let rho = random_density(4, &mut rng_from_seed(8));
        let task = DiscriminationTask::new(
            vec![2, 2],
            vec![
                Ensemble {
                    prior: 0.4,
                    states: vec![
                        WeightedState {
                            weight: 0.6,
                            rho: rho.clone(),
                        },
                        WeightedState {
                            weight: 0.4,
                            rho: rho.clone(),
                        },
                    ],
                },
                Ensemble {
                    prior: 0.6,
                    states: vec![
                        WeightedState {
                            weight: 0.2,
                            rho: rho.clone(),
                        },
                        WeightedState { weight: 0.8, rho },
                    ],
                },
            ],
        )
        .unwrap();
        let mut opts = SeesawOptions::new((2, 2));
        opts.restarts = 2;
        let r = psg_compatible_seesaw(&task, &opts, &[]).unwrap();
        let trivial = psg_parents(&task, &[Povm::trivial(2), Povm::trivial(2)]).unwrap();
        assert!((r.value - trivial).abs() < 1e-9);
        assert!((trivial - (0.4 * 0.6 + 0.6 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn seesaw_is_seed_deterministic() {
        let t = random_task(&[2, 2], 2, 2, 12).unwrap();
        let mut opts = SeesawOptions::new((2, 2));
        opts.restarts = 2;
        opts.seed = 5;
        let a = psg_compatible_seesaw(&t, &opts, &[]).unwrap();
        opts.execution = Execution::Sequential;
        let b = psg_compatible_seesaw(&t, &opts, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn task_validation_pointers() {
        let mut t = orthogonal_product_task();
        t.ensembles[0].states[1].weight = 0.7;
        match t.validate() {
            Err(Error::Schema { pointer, .. }) => assert_eq!(pointer, "/ensembles/0/states"),
            other => panic!("{other:?}"),
        }
        let mut t = orthogonal_product_task();
        t.ensembles[0].states[0].rho = kron(&ket(&[0]), &HermitianOperator::identity(2)).scale(0.5).scale(3.0);
        match t.validate() {
            Err(Error::Schema { pointer, .. }) => assert_eq!(pointer, "/ensembles/0/states/0/rho"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn white_noise_keeps_validity() {
        let t = random_task(&[2, 2], 2, 2, 3).unwrap();
        t.with_white_noise(0.05).validate().unwrap();
    }
}
