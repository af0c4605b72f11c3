//! Independent checks: exhaustive strategy enumeration and Monte Carlo play.
//!
//! Nothing here reuses the optimizers' probability tables; Born
//! probabilities are recomputed from the operators directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::discrimination::{DiscriminationTask, LocalStrategy, Mode, SecondChoice};
use crate::error::{Error, Result};
use crate::linalg::{frob_inner, kron, kron_all, HermitianOperator};
use crate::measurements::{apply_parent, random_povm, MeasurementSet, ResponseTable};
use crate::par::{self, Execution};
use crate::random::{random_distribution, rng_for_stream, rng_from_seed};

pub const STRATEGY_CAP: u128 = 10_000_000;
const NEGATIVE_TOL: f64 = 1e-9;
const NORMALIZATION_TOL: f64 = 1e-8;
const SHARD_TRIALS: u64 = 1 << 14;
const CHUNK: usize = 1 << 12;

/// Outcome tuples of a joint setting, in lexicographic order.
fn outcome_tuples(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in counts {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |c| {
                    let mut t = t.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

/// `q(y)q(b|y)·tr[ρ_{b|y} ⊗ M]` for one setting: `[outcome tuple][b]`.
fn weighted_probs(task: &DiscriminationTask, y: usize, sets: &[MeasurementSet], ks: &[usize]) -> Result<Vec<Vec<f64>>> {
    let counts: Vec<usize> = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| sets[i].povm(k).num_outcomes())
        .collect();
    outcome_tuples(&counts)
        .iter()
        .map(|cs| {
            let effect = kron_all(cs.iter().enumerate().map(|(i, &c)| sets[i].effect(ks[i], c)));
            (0..task.num_states(y))
                .map(|b| Ok(task.joint_weight(y, b) * frob_inner(task.state(y, b), &effect)?))
                .collect()
        })
        .collect()
}

fn pow_u128(base: usize, exp: usize) -> u128 {
    (0..exp).fold(1u128, |acc, _| acc.saturating_mul(base as u128))
}

/// Value of the guess function with index `g` (base-`nb` digits, one per row).
fn guess_value(rows: &[Vec<f64>], nb: usize, mut g: u128) -> f64 {
    let mut v = 0.0;
    for row in rows {
        v += row[(g % nb as u128) as usize];
        g /= nb as u128;
    }
    v
}

/// Maximum over `0..count` guess functions, split into chunks.
fn max_over_guesses(rows: &[Vec<f64>], nb: usize, exec: Execution) -> f64 {
    let count = pow_u128(nb, rows.len()) as usize;
    let chunks = count.div_ceil(CHUNK);
    par::map_indices(exec, chunks, |ch| {
        let lo = ch * CHUNK;
        let hi = (lo + CHUNK).min(count);
        (lo..hi)
            .map(|g| guess_value(rows, nb, g as u128))
            .fold(f64::NEG_INFINITY, f64::max)
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// Number of deterministic strategies for label `y`.
fn strategy_count(task: &DiscriminationTask, y: usize, sets: &[MeasurementSet], mode: Mode) -> u128 {
    let nb = task.num_states(y);
    match mode {
        Mode::Lo => {
            let settings: Vec<Vec<usize>> = outcome_tuples(&sets.iter().map(|s| s.len()).collect::<Vec<_>>());
            settings
                .iter()
                .map(|ks| {
                    let outcomes: usize = ks
                        .iter()
                        .enumerate()
                        .map(|(i, &k)| sets[i].povm(k).num_outcomes())
                        .product();
                    pow_u128(nb, outcomes)
                })
                .fold(0u128, u128::saturating_add)
        }
        Mode::Locc1 => {
            let (a, b) = (&sets[0], &sets[1]);
            let mut total = 0u128;
            for k in 0..a.len() {
                let oa = a.povm(k).num_outcomes();
                for lf in outcome_tuples(&vec![b.len(); oa]) {
                    let rows: usize = lf.iter().map(|&l| b.povm(l).num_outcomes()).sum();
                    total = total.saturating_add(pow_u128(nb, rows));
                }
            }
            total
        }
    }
}

/// Exact optimum over every deterministic strategy, by enumeration.
///
/// Rows of the strategy tables for different ensemble labels never interact
/// in the success probability, so the joint maximum is the sum of per-label
/// maxima; within a label every combination of measurement choices and
/// guess table is evaluated. The cap applies to the total number of
/// evaluated per-label strategies.
pub fn brute_force_psg(task: &DiscriminationTask, sets: &[MeasurementSet], mode: Mode) -> Result<f64> {
    brute_force_psg_with(task, sets, mode, Execution::default())
}

pub fn brute_force_psg_with(
    task: &DiscriminationTask,
    sets: &[MeasurementSet],
    mode: Mode,
    exec: Execution,
) -> Result<f64> {
    task.validate()?;
    if sets.len() != task.num_parties() {
        return Err(Error::Shape(format!(
            "{} sets for {} parties",
            sets.len(),
            task.num_parties()
        )));
    }
    for (s, &d) in sets.iter().zip(&task.party_dims) {
        if s.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.dim(),
            });
        }
    }
    if mode == Mode::Locc1 && sets.len() != 2 {
        return Err(Error::Shape("one-round LOCC is defined for two parties".into()));
    }
    let needed = (0..task.num_ensembles())
        .map(|y| strategy_count(task, y, sets, mode))
        .fold(0u128, u128::saturating_add);
    if needed > STRATEGY_CAP {
        return Err(Error::ResourceCap {
            what: "deterministic strategies",
            needed,
            cap: STRATEGY_CAP,
        });
    }
    let mut total = 0.0;
    for y in 0..task.num_ensembles() {
        let nb = task.num_states(y);
        let best = match mode {
            Mode::Lo => {
                let settings = outcome_tuples(&sets.iter().map(|s| s.len()).collect::<Vec<_>>());
                let mut best = f64::NEG_INFINITY;
                for ks in settings {
                    let rows = weighted_probs(task, y, sets, &ks)?;
                    best = best.max(max_over_guesses(&rows, nb, exec));
                }
                best
            }
            Mode::Locc1 => {
                let (a, b) = (&sets[0], &sets[1]);
                let mut best = f64::NEG_INFINITY;
                for k in 0..a.len() {
                    // rows indexed by (c, l) then d
                    let per_l: Vec<Vec<Vec<f64>>> = (0..b.len())
                        .map(|l| weighted_probs(task, y, sets, &[k, l]))
                        .collect::<Result<_>>()?;
                    let oa = a.povm(k).num_outcomes();
                    for lf in outcome_tuples(&vec![b.len(); oa]) {
                        let mut rows = Vec::new();
                        for (c, &l) in lf.iter().enumerate() {
                            let ob = b.povm(l).num_outcomes();
                            rows.extend(per_l[l][c * ob..(c + 1) * ob].iter().cloned());
                        }
                        best = best.max(max_over_guesses(&rows, nb, exec));
                    }
                }
                best
            }
        };
        total += best;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub trials: u64,
    pub successes: u64,
    pub empirical_rate: f64,
    pub std_error: f64,
}

impl SimulationResult {
    fn from_counts(trials: u64, successes: u64) -> Self {
        let p = successes as f64 / trials as f64;
        SimulationResult {
            trials,
            successes,
            empirical_rate: p,
            std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }
}

/// Clamps numeric dust and renormalizes a Born distribution.
fn born_distribution(raw: Vec<f64>) -> Result<Vec<f64>> {
    if let Some(&bad) = raw.iter().find(|&&p| p < -NEGATIVE_TOL) {
        return Err(Error::Numeric(format!("negative Born probability {bad:.3e}")));
    }
    let clamped: Vec<f64> = raw.into_iter().map(|p| p.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Numeric(format!("Born probabilities sum to {total}")));
    }
    Ok(clamped.into_iter().map(|p| p / total).collect())
}

/// Cumulative inversion; `u` uniform in `[0, 1)`.
fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Born tables for one state: marginal of the first party and the joint.
struct StateTables {
    /// `[k][c]`
    marginal: Vec<Vec<f64>>,
    /// `[k][l][c][d]` conditional `p(d|c)` (zero rows where `p(c) = 0`)
    conditional: Vec<Vec<Vec<Vec<f64>>>>,
}

fn state_tables(
    task: &DiscriminationTask,
    y: usize,
    b: usize,
    a: &MeasurementSet,
    bs: &MeasurementSet,
) -> Result<StateTables> {
    let rho = task.state(y, b);
    let id_b = HermitianOperator::identity(task.party_dims[1]);
    let mut marginal = Vec::with_capacity(a.len());
    let mut conditional = Vec::with_capacity(a.len());
    for k in 0..a.len() {
        let pa = a.povm(k);
        let raw = (0..pa.num_outcomes())
            .map(|c| frob_inner(rho, &kron(pa.effect(c), &id_b)))
            .collect::<Result<Vec<_>>>()?;
        let m = born_distribution(raw)?;
        let mut per_l = Vec::with_capacity(bs.len());
        for l in 0..bs.len() {
            let pb = bs.povm(l);
            let mut rows = Vec::with_capacity(pa.num_outcomes());
            for c in 0..pa.num_outcomes() {
                let raw = (0..pb.num_outcomes())
                    .map(|d| frob_inner(rho, &kron(pa.effect(c), pb.effect(d))))
                    .collect::<Result<Vec<_>>>()?;
                if let Some(&bad) = raw.iter().find(|&&p| p < -NEGATIVE_TOL) {
                    return Err(Error::Numeric(format!("negative Born probability {bad:.3e}")));
                }
                let clamped: Vec<f64> = raw.into_iter().map(|p| p.max(0.0)).collect();
                let total: f64 = clamped.iter().sum();
                rows.push(if total > 0.0 {
                    clamped.into_iter().map(|p| p / total).collect()
                } else {
                    vec![0.0; pb.num_outcomes()]
                });
            }
            per_l.push(rows);
        }
        marginal.push(m);
        conditional.push(per_l);
    }
    Ok(StateTables { marginal, conditional })
}

/// Plays the two-party game `trials` times with Born-rule sampling.
///
/// Trials are split into shards of fixed size; shard `i` draws from ChaCha
/// stream `i` under `seed`, so the result does not depend on the execution mode.
pub fn simulate_game(
    task: &DiscriminationTask,
    a: &MeasurementSet,
    b: &MeasurementSet,
    strategy: &LocalStrategy,
    trials: u64,
    seed: u64,
) -> Result<SimulationResult> {
    simulate_game_with(task, a, b, strategy, trials, seed, Execution::default())
}

pub fn simulate_game_with(
    task: &DiscriminationTask,
    a: &MeasurementSet,
    b: &MeasurementSet,
    strategy: &LocalStrategy,
    trials: u64,
    seed: u64,
    exec: Execution,
) -> Result<SimulationResult> {
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    task.validate()?;
    if task.num_parties() != 2 || a.dim() != task.party_dims[0] || b.dim() != task.party_dims[1] {
        return Err(Error::Shape(
            "simulation needs a two-party task matching both sets".into(),
        ));
    }
    strategy.validate(task, a, b)?;
    let tables: Vec<Vec<StateTables>> = (0..task.num_ensembles())
        .map(|y| {
            (0..task.num_states(y))
                .map(|bb| state_tables(task, y, bb, a, b))
                .collect()
        })
        .collect::<Result<_>>()?;
    let priors: Vec<f64> = task.ensembles.iter().map(|e| e.prior).collect();
    let weights: Vec<Vec<f64>> = task
        .ensembles
        .iter()
        .map(|e| e.states.iter().map(|s| s.weight).collect())
        .collect();

    let shards = trials.div_ceil(SHARD_TRIALS);
    let counts = par::map_indices(exec, shards as usize, |shard| {
        let mut rng = rng_for_stream(seed, shard as u64);
        let n = SHARD_TRIALS.min(trials - shard as u64 * SHARD_TRIALS);
        let mut wins = 0u64;
        for _ in 0..n {
            let y = sample_index(&priors, rng.gen());
            let truth = sample_index(&weights[y], rng.gen());
            let k = sample_index(&strategy.choose_k[y], rng.gen());
            let st = &tables[y][truth];
            let c = sample_index(&st.marginal[k], rng.gen());
            let l = match &strategy.choose_l {
                SecondChoice::Independent(t) => sample_index(&t[y], rng.gen()),
                SecondChoice::Conditioned(t) => sample_index(&t[y][c], rng.gen()),
            };
            let d = sample_index(&st.conditional[k][l][c], rng.gen());
            let guess = sample_index(&strategy.guess[y][c][d], rng.gen());
            if guess == truth {
                wins += 1;
            }
        }
        wins
    });
    Ok(SimulationResult::from_counts(trials, counts.iter().sum()))
}

/// Strategy with every conditional distribution drawn at random.
pub fn random_strategy(
    task: &DiscriminationTask,
    a: &MeasurementSet,
    b: &MeasurementSet,
    mode: Mode,
    seed: u64,
) -> LocalStrategy {
    let mut rng = rng_from_seed(seed);
    let ny = task.num_ensembles();
    let (oa, ob) = (a.max_outcomes(), b.max_outcomes());
    let choose_k = (0..ny).map(|_| random_distribution(a.len(), &mut rng)).collect();
    let choose_l = match mode {
        Mode::Lo => SecondChoice::Independent((0..ny).map(|_| random_distribution(b.len(), &mut rng)).collect()),
        Mode::Locc1 => SecondChoice::Conditioned(
            (0..ny)
                .map(|_| (0..oa).map(|_| random_distribution(b.len(), &mut rng)).collect())
                .collect(),
        ),
    };
    let guess = (0..ny)
        .map(|y| {
            (0..oa)
                .map(|_| {
                    (0..ob)
                        .map(|_| random_distribution(task.num_states(y), &mut rng))
                        .collect()
                })
                .collect()
        })
        .collect();
    LocalStrategy {
        choose_k,
        choose_l,
        guess,
    }
}

/// Random parent POVM pushed through random row-stochastic post-processing.
pub fn random_compatible_set(
    dim: usize,
    n_meas: usize,
    n_out: usize,
    parent_out: usize,
    seed: u64,
) -> Result<MeasurementSet> {
    if dim == 0 || n_meas == 0 || n_out == 0 || parent_out == 0 {
        return Err(Error::Invalid("random compatible set needs positive sizes".into()));
    }
    let mut rng = rng_from_seed(seed);
    let parent = random_povm(dim, parent_out, &mut rng)?;
    let entries = (0..n_meas)
        .map(|_| (0..parent_out).map(|_| random_distribution(n_out, &mut rng)).collect())
        .collect();
    apply_parent(&parent, &ResponseTable::new(entries)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrimination::{psg_best_lo, psg_best_locc1, psg_fixed, random_task, Ensemble, WeightedState};
    use crate::incompatibility::is_compatible;
    use crate::linalg::C64;
    use crate::measurements::{sigma_xz_set, Povm};
    use crate::random::random_density;

    fn ket(bits: &[usize]) -> HermitianOperator {
        let d = 1 << bits.len();
        let idx = bits.iter().fold(0, |acc, &b| acc * 2 + b);
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[idx] = C64::new(1.0, 0.0);
        HermitianOperator::projector(&v).unwrap()
    }

    fn task_of(states: Vec<(f64, HermitianOperator)>) -> DiscriminationTask {
        DiscriminationTask::new(
            vec![2, 2],
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

    #[test]
    fn brute_force_examples() {
        let xz = sigma_xz_set();
        let orth = task_of(vec![(0.5, ket(&[0, 0])), (0.5, ket(&[1, 1]))]);
        assert!((brute_force_psg(&orth, &[xz.clone(), xz.clone()], Mode::Lo).unwrap() - 1.0).abs() < 1e-12);
        let rho = random_density(4, &mut rng_from_seed(1));
        let same = task_of(vec![(0.7, rho.clone()), (0.3, rho)]);
        assert!((brute_force_psg(&same, &[xz.clone(), xz.clone()], Mode::Locc1).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn brute_force_matches_nested_max() {
        let xz = sigma_xz_set();
        for seed in 0..4 {
            let t = random_task(&[2, 2], 2, 3, seed).unwrap();
            let sets = [xz.clone(), xz.clone()];
            let lo = brute_force_psg(&t, &sets, Mode::Lo).unwrap();
            let locc = brute_force_psg(&t, &sets, Mode::Locc1).unwrap();
            assert!((lo - psg_best_lo(&t, &xz, &xz).unwrap().0).abs() < 1e-12);
            assert!((locc - psg_best_locc1(&t, &xz, &xz).unwrap().0).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_cap() {
        let t = random_task(&[2, 2], 1, 4, 0).unwrap();
        let big = crate::measurements::random_set(2, 3, 2, 1).unwrap();
        assert!(brute_force_psg(&t, &[big.clone(), big.clone()], Mode::Lo).is_ok());
        let many = random_task(&[2, 2], 1, 60, 0).unwrap();
        assert!(matches!(
            brute_force_psg(&many, &[big.clone(), big], Mode::Lo),
            Err(Error::ResourceCap { .. })
        ));
    }

    #[test]
    fn simulation_of_perfect_strategy() {
        let z = MeasurementSet::new(vec![Povm::computational(2)]).unwrap();
        let orth = task_of(vec![(0.5, ket(&[0, 0])), (0.5, ket(&[1, 1]))]);
        let (_, st) = psg_best_lo(&orth, &z, &z).unwrap();
        let r = simulate_game(&orth, &z, &z, &st, 100_000, 3).unwrap();
        assert_eq!(r.successes, r.trials);
        assert_eq!(r.empirical_rate, 1.0);
    }

    #[test]
    fn simulation_of_random_guess() {
        let xz = sigma_xz_set();
        let t = random_task(&[2, 2], 2, 2, 7).unwrap();
        let st = LocalStrategy::uniform(&t, &xz, &xz);
        let r = simulate_game(&t, &xz, &xz, &st, 100_000, 11).unwrap();
        assert!((r.empirical_rate - 0.5).abs() <= 3.0 * r.std_error + 1e-12, "{r:?}");
    }

    #[test]
    fn simulation_tracks_exact_value() {
        let xz = sigma_xz_set();
        let t = random_task(&[2, 2], 2, 3, 21).unwrap();
        let (exact, st) = psg_best_locc1(&t, &xz, &xz).unwrap();
        assert!((psg_fixed(&t, &xz, &xz, &st).unwrap() - exact).abs() < 1e-12);
        let r = simulate_game(&t, &xz, &xz, &st, 100_000, 4).unwrap();
        assert!(
            (r.empirical_rate - exact).abs() <= 4.0 * r.std_error,
            "{r:?} vs {exact}"
        );
    }

    #[test]
    fn simulation_of_random_strategies() {
        let xz = sigma_xz_set();
        let t = random_task(&[2, 2], 2, 3, 5).unwrap();
        for (i, mode) in [Mode::Lo, Mode::Locc1].into_iter().enumerate() {
            let st = random_strategy(&t, &xz, &xz, mode, i as u64);
            assert_eq!(st.mode(), mode);
            let exact = psg_fixed(&t, &xz, &xz, &st).unwrap();
            let r = simulate_game(&t, &xz, &xz, &st, 100_000, 40 + i as u64).unwrap();
            assert!(
                (r.empirical_rate - exact).abs() <= 4.0 * r.std_error,
                "{r:?} vs {exact}"
            );
        }
    }

    #[test]
    fn simulation_is_mode_independent() {
        let xz = sigma_xz_set();
        let t = random_task(&[2, 2], 2, 2, 2).unwrap();
        let st = psg_best_lo(&t, &xz, &xz).unwrap().1;
        let a = simulate_game_with(&t, &xz, &xz, &st, 50_000, 9, Execution::Sequential).unwrap();
        let b = simulate_game_with(&t, &xz, &xz, &st, 50_000, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(simulate_game(&t, &xz, &xz, &st, 0, 9).is_err());
    }

    #[test]
    fn negative_born_weights_are_rejected() {
        assert!(born_distribution(vec![1.0 + 1e-3, -1e-3]).is_err());
        assert_eq!(born_distribution(vec![1.0 + 1e-12, -1e-12]).unwrap()[1], 0.0);
    }

    #[test]
    fn compatible_generator() {
        for seed in 0..5 {
            let s = random_compatible_set(2, 3, 2, 3, seed).unwrap();
            assert!(is_compatible(&s, 1e-6).unwrap());
        }
        assert_eq!(
            random_compatible_set(3, 2, 3, 4, 8).unwrap(),
            random_compatible_set(3, 2, 3, 4, 8).unwrap()
        );
    }
}
