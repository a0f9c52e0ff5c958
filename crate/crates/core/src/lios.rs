//! Expected-cost object search policies.
//!
//! A find policy fixes an order over candidate containers. Its expected cost
//! follows the recursion
//!
//! ```text
//! Q_k = R_move(q_{k-1}, q_k) + R_search(q_k)
//!       + p_k [R_pick + R_move(q_k, q_to)] + (1 - p_k) Q_{k+1}
//! ```
//!
//! where `p_k` is the probability the object sits in container `k` given that
//! the earlier containers came up empty, and the final step probability is
//! exactly 1: the policy commits to the chosen candidate subset. The optimal
//! ordering is found by dynamic programming over subsets, which is exact
//! because under the conditional renormalization the pick-and-exit term is
//! order independent and the survival weight of a prefix depends only on the
//! set of containers visited, not their order.

use thiserror::Error;

use crate::estimator::Estimator;
use crate::executive::BeliefState;
use crate::world::{Cell, Container, DistanceCache, WorldError, WorldModel};

/// Candidate subset cap for the exact ordering DP.
pub const K_MAX: usize = 8;

#[derive(Debug, Error)]
pub enum LiosError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("invalid policy: {0}")]
    BadPolicy(String),
    #[error("unknown container '{0}'")]
    UnknownContainer(String),
    #[error("no unsearched candidate containers")]
    NoCandidates,
    #[error("invalid marginals: {0}")]
    BadMarginals(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub r_search: f64,
    pub r_pick: f64,
    pub r_place: f64,
    /// Cost of every other known-space operator (recipe steps, handoffs).
    pub fixed_op_cost: f64,
    pub pessimistic_penalty: f64,
}

impl Default for CostModel {
    fn default() -> CostModel {
        CostModel {
            r_search: 0.0,
            r_pick: 5.0,
            r_place: 5.0,
            fixed_op_cost: 5.0,
            pessimistic_penalty: 100.0,
        }
    }
}

/// A committed search plan for one object type: visit `sequence` in order,
/// searching each container, until the object turns up; then pick it and move
/// to `q_to`. `step_probs[k]` is the success probability of step `k`
/// conditioned on all earlier steps failing; the last entry is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FindPolicy {
    pub object_type: String,
    /// Concrete object id, filled in once a search reveals one.
    pub binding: Option<String>,
    pub sequence: Vec<String>,
    pub step_probs: Vec<f64>,
    pub q_from: Cell,
    pub q_to: Cell,
    pub expected_cost: f64,
    /// True for probability-ordered policies; greedy policies ignore the
    /// estimator and are recomputed greedily when re-planned mid-search.
    pub model_based: bool,
}

impl FindPolicy {
    /// Unconditional probability that the object is found at each step,
    /// i.e. the subset-normalized placement distribution this policy commits
    /// to. Sums to 1.
    pub fn masses(&self) -> Vec<f64> {
        let mut survive = 1.0;
        self.step_probs
            .iter()
            .map(|&p| {
                let m = survive * p;
                survive *= 1.0 - p;
                m
            })
            .collect()
    }

    /// Re-targets the exit location, recomputing the expected cost. The
    /// sequence and probabilities are unchanged.
    pub fn with_target(
        mut self,
        world: &WorldModel,
        costs: &CostModel,
        q_to: Cell,
    ) -> Result<FindPolicy, LiosError> {
        self.q_to = q_to;
        self.expected_cost = evaluate_policy(
            world,
            &self.sequence,
            &self.step_probs,
            self.q_from,
            q_to,
            costs,
        )?;
        Ok(self)
    }
}

fn check_policy(sequence: &[String], step_probs: &[f64]) -> Result<(), LiosError> {
    if sequence.is_empty() {
        return Err(LiosError::BadPolicy("empty sequence".into()));
    }
    if sequence.len() != step_probs.len() {
        return Err(LiosError::BadPolicy(format!(
            "{} containers but {} step probabilities",
            sequence.len(),
            step_probs.len()
        )));
    }
    for (i, &p) in step_probs.iter().enumerate() {
        if !(p > 0.0 && p <= 1.0) {
            return Err(LiosError::BadPolicy(format!(
                "step probability {p} at position {i} outside (0, 1]"
            )));
        }
    }
    if *step_probs.last().unwrap() != 1.0 {
        return Err(LiosError::BadPolicy(
            "final step probability must be exactly 1".into(),
        ));
    }
    Ok(())
}

/// Expected cost of walking `sequence` from `q_from`, exiting to `q_to` once
/// the object is found.
pub fn evaluate_policy(
    world: &WorldModel,
    sequence: &[String],
    step_probs: &[f64],
    q_from: Cell,
    q_to: Cell,
    costs: &CostModel,
) -> Result<f64, LiosError> {
    check_policy(sequence, step_probs)?;
    let mut cache = DistanceCache::new(&world.grid);
    let poses: Vec<Cell> = sequence
        .iter()
        .map(|id| {
            world
                .container(id)
                .map(|c| c.pose)
                .ok_or_else(|| LiosError::UnknownContainer(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut q = 0.0;
    for k in (0..poses.len()).rev() {
        let prev = if k == 0 { q_from } else { poses[k - 1] };
        let move_in = cache.dist(prev, poses[k])?;
        let move_out = cache.dist(poses[k], q_to)?;
        let p = step_probs[k];
        q = move_in + costs.r_search + p * (costs.r_pick + move_out) + (1.0 - p) * q;
    }
    Ok(q)
}

/// Renormalizes marginal presence probabilities over the chosen subset into
/// per-step conditional success probabilities. The final entry is exactly 1.
pub fn conditional_step_probs(marginals: &[f64]) -> Result<Vec<f64>, LiosError> {
    if marginals.is_empty() {
        return Err(LiosError::BadMarginals("no marginals".into()));
    }
    for &m in marginals {
        if !(m > 0.0 && m < 1.0) {
            return Err(LiosError::BadMarginals(format!(
                "marginal {m} outside (0, 1)"
            )));
        }
    }
    let total: f64 = marginals.iter().sum();
    let n = marginals.len();
    let mut probs = Vec::with_capacity(n);
    let mut remaining = 1.0;
    for (i, &m) in marginals.iter().enumerate() {
        if i + 1 == n {
            probs.push(1.0);
        } else {
            let mass = m / total;
            probs.push((mass / remaining).min(1.0));
            remaining -= mass;
        }
    }
    Ok(probs)
}

struct Candidate<'w> {
    container: &'w Container,
    marginal: f64,
}

fn candidates<'w>(
    world: &'w WorldModel,
    belief: &BeliefState,
    object_type: &str,
    est: &Estimator,
) -> Result<Vec<Candidate<'w>>, LiosError> {
    let out: Vec<Candidate> = belief
        .unsearched(world)
        .into_iter()
        .map(|c| Candidate {
            container: c,
            marginal: est.p_found(object_type, &c.type_name, &c.room_type),
        })
        .collect();
    if out.is_empty() {
        return Err(LiosError::NoCandidates);
    }
    Ok(out)
}

/// Exact minimum-expected-cost ordering over the `k_max` most likely
/// unsearched containers (ties broken by container id), by dynamic
/// programming over subsets. The conditional step probabilities renormalize
/// the marginals over the chosen subset, so the last step succeeds with
/// probability 1.
#[allow(clippy::too_many_arguments)]
pub fn optimal_find_policy(
    world: &WorldModel,
    belief: &BeliefState,
    object_type: &str,
    q_from: Cell,
    q_to: Cell,
    est: &Estimator,
    costs: &CostModel,
    k_max: usize,
) -> Result<FindPolicy, LiosError> {
    if k_max == 0 {
        return Err(LiosError::BadMarginals("k_max must be positive".into()));
    }
    let mut cands = candidates(world, belief, object_type, est)?;
    cands.sort_by(|a, b| {
        b.marginal
            .total_cmp(&a.marginal)
            .then_with(|| a.container.id.cmp(&b.container.id))
    });
    cands.truncate(k_max);
    // Canonical DP order: ascending container id, so index order is the
    // tie-break order everywhere below.
    cands.sort_by(|a, b| a.container.id.cmp(&b.container.id));

    let n = cands.len();
    let total: f64 = cands.iter().map(|c| c.marginal).sum();
    let mass: Vec<f64> = cands.iter().map(|c| c.marginal / total).collect();

    let mut cache = DistanceCache::new(&world.grid);
    let mut d_from = vec![0.0; n];
    let mut d_pair = vec![vec![0.0; n]; n];
    for i in 0..n {
        d_from[i] = cache.dist(q_from, cands[i].container.pose)?;
        for j in 0..n {
            d_pair[i][j] = cache.dist(cands[i].container.pose, cands[j].container.pose)?;
        }
    }

    let full: usize = (1 << n) - 1;
    let mut mass_of = vec![0.0; full + 1];
    for m in 1..=full {
        let i = m.trailing_zeros() as usize;
        mass_of[m] = mass_of[m & (m - 1)] + mass[i];
    }

    // h[mask * n + last]: cheapest remaining move+search cost after having
    // visited `mask` (ending at `last`) without success. Masks gain bits, so
    // descending numeric order visits supersets first.
    let mut h = vec![0.0; (full + 1) * n];
    for m in (1..full).rev() {
        let survive = 1.0 - mass_of[m];
        for last in 0..n {
            if m & (1 << last) == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for next in 0..n {
                if m & (1 << next) != 0 {
                    continue;
                }
                let v = survive * (d_pair[last][next] + costs.r_search)
                    + h[(m | (1 << next)) * n + next];
                if v < best {
                    best = v;
                }
            }
            h[m * n + last] = best;
        }
    }

    // Forward reconstruction; strict improvement keeps the smallest container
    // id on ties because candidates are scanned in id order.
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut mask = 0usize;
    let mut at: Option<usize> = None;
    while order.len() < n {
        let survive = 1.0 - mass_of[mask];
        let mut best = f64::INFINITY;
        let mut pick = usize::MAX;
        for next in 0..n {
            if mask & (1 << next) != 0 {
                continue;
            }
            let step = match at {
                None => d_from[next],
                Some(i) => d_pair[i][next],
            };
            let v = survive * (step + costs.r_search) + h[(mask | (1 << next)) * n + next];
            if v < best {
                best = v;
                pick = next;
            }
        }
        order.push(pick);
        mask |= 1 << pick;
        at = Some(pick);
    }

    let sequence: Vec<String> = order
        .iter()
        .map(|&i| cands[i].container.id.clone())
        .collect();
    let ordered_marginals: Vec<f64> = order.iter().map(|&i| cands[i].marginal).collect();
    let step_probs = conditional_step_probs(&ordered_marginals)?;
    let expected_cost = evaluate_policy(world, &sequence, &step_probs, q_from, q_to, costs)?;
    Ok(FindPolicy {
        object_type: object_type.to_string(),
        binding: None,
        sequence,
        step_probs,
        q_from,
        q_to,
        expected_cost,
        model_based: true,
    })
}

/// Distance-greedy baseline: chain to the nearest unsearched container,
/// ignoring the estimator. Covers every unsearched container; step
/// probabilities are uniform over the remainder; distance ties break by
/// container id. Exits where it started unless re-targeted.
pub fn greedy_find_policy(
    world: &WorldModel,
    belief: &BeliefState,
    object_type: &str,
    q_from: Cell,
    costs: &CostModel,
) -> Result<FindPolicy, LiosError> {
    let mut remaining: Vec<&Container> = belief.unsearched(world);
    if remaining.is_empty() {
        return Err(LiosError::NoCandidates);
    }
    let mut cache = DistanceCache::new(&world.grid);
    remaining.sort_by(|a, b| a.id.cmp(&b.id));
    let mut sequence = Vec::with_capacity(remaining.len());
    let mut cur = q_from;
    while !remaining.is_empty() {
        let mut best = f64::INFINITY;
        let mut pick = 0usize;
        for (i, c) in remaining.iter().enumerate() {
            let d = cache.dist(cur, c.pose)?;
            if d < best {
                best = d;
                pick = i;
            }
        }
        let c = remaining.remove(pick);
        cur = c.pose;
        sequence.push(c.id.clone());
    }
    let n = sequence.len();
    let step_probs: Vec<f64> = (0..n).map(|k| 1.0 / (n - k) as f64).collect();
    let expected_cost = evaluate_policy(world, &sequence, &step_probs, q_from, q_from, costs)?;
    Ok(FindPolicy {
        object_type: object_type.to_string(),
        binding: None,
        sequence,
        step_probs,
        q_from,
        q_to: q_from,
        expected_cost,
        model_based: false,
    })
}

/// Lower bound used by the optimistic strategy: the cheapest possible
/// single-container success among the unsearched candidates.
pub fn optimistic_cost(
    world: &WorldModel,
    belief: &BeliefState,
    _object_type: &str,
    q_from: Cell,
    q_to: Cell,
    costs: &CostModel,
    cache: &mut DistanceCache,
) -> Result<f64, LiosError> {
    let mut best = f64::INFINITY;
    for c in belief.unsearched(world) {
        let v = cache.dist(q_from, c.pose)?
            + costs.r_search
            + costs.r_pick
            + cache.dist(c.pose, q_to)?;
        if v < best {
            best = v;
        }
    }
    if best.is_infinite() {
        return Err(LiosError::NoCandidates);
    }
    Ok(best)
}

/// The optimistic bound plus a flat penalty for the unknown search effort.
#[allow(clippy::too_many_arguments)]
pub fn pessimistic_cost(
    world: &WorldModel,
    belief: &BeliefState,
    object_type: &str,
    q_from: Cell,
    q_to: Cell,
    costs: &CostModel,
    cache: &mut DistanceCache,
) -> Result<f64, LiosError> {
    Ok(
        optimistic_cost(world, belief, object_type, q_from, q_to, costs, cache)?
            + costs.pessimistic_penalty,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::GridMap;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn open_world(w: u32, h: u32, poses: &[Cell]) -> WorldModel {
        let rows: Vec<String> = (0..h).map(|_| ".".repeat(w as usize)).collect();
        let refs: Vec<&str> = rows.iter().map(|s| s.as_str()).collect();
        WorldModel {
            grid: GridMap::from_rows(&refs),
            containers: poses
                .iter()
                .enumerate()
                .map(|(i, &pose)| Container {
                    id: format!("c{i:02}"),
                    type_name: format!("t{i:02}"),
                    room_type: "r".into(),
                    pose,
                })
                .collect(),
            objects: vec![],
            seed: 0,
        }
    }

    /// Estimator whose p_found("obj", "t<i>", "r") is exactly k/1000.
    fn est_with(milli: &[u64]) -> Estimator {
        let mut est = Estimator::uniform();
        for (i, &k) in milli.iter().enumerate() {
            est.set_counts("obj", &format!("t{i:02}"), "r", k - 1, 998);
        }
        est
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![0]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for slot in 0..=p.len() {
                let mut q: Vec<usize> = p[..slot].to_vec();
                q.push(n - 1);
                q.extend_from_slice(&p[slot..]);
                out.push(q);
            }
        }
        out
    }

    struct Instance {
        world: WorldModel,
        est: Estimator,
        marginals: Vec<f64>,
        q_from: Cell,
        q_to: Cell,
    }

    fn random_instance(rng: &mut ChaCha8Rng, n_min: usize, n_max: usize) -> Instance {
        let (w, h) = (12u32, 8u32);
        let n = rng.gen_range(n_min..=n_max);
        let mut poses: Vec<Cell> = Vec::new();
        while poses.len() < n {
            let c = (rng.gen_range(0..w), rng.gen_range(0..h));
            if !poses.contains(&c) {
                poses.push(c);
            }
        }
        let milli: Vec<u64> = (0..n).map(|_| rng.gen_range(50..=900)).collect();
        let world = open_world(w, h, &poses);
        let est = est_with(&milli);
        Instance {
            marginals: milli.iter().map(|&k| k as f64 / 1000.0).collect(),
            world,
            est,
            q_from: (rng.gen_range(0..w), rng.gen_range(0..h)),
            q_to: (rng.gen_range(0..w), rng.gen_range(0..h)),
        }
    }

    fn brute_force_cost(inst: &Instance, costs: &CostModel) -> f64 {
        let n = inst.marginals.len();
        let mut best = f64::INFINITY;
        for perm in permutations(n) {
            let seq: Vec<String> = perm.iter().map(|&i| format!("c{i:02}")).collect();
            let ms: Vec<f64> = perm.iter().map(|&i| inst.marginals[i]).collect();
            let probs = conditional_step_probs(&ms).unwrap();
            let q =
                evaluate_policy(&inst.world, &seq, &probs, inst.q_from, inst.q_to, costs).unwrap();
            if q < best {
                best = q;
            }
        }
        best
    }

    #[test]
    fn single_container_worked_example() {
        let world = open_world(3, 4, &[(2, 0)]);
        let costs = CostModel::default();
        let q = evaluate_policy(&world, &["c00".into()], &[1.0], (0, 0), (2, 3), &costs).unwrap();
        assert!((q - 10.0).abs() < 1e-12, "expected 10, got {q}");
    }

    #[test]
    fn two_container_worked_example() {
        // d(from,c1)=2, d(c1,to)=3, d(c1,c2)=4, d(c2,to)=1 on an open grid:
        // Q = 2 + 0.5*(5+3) + 0.5*(4 + 1*(5+1)) = 11.
        let world = open_world(5, 3, &[(2, 0), (4, 2)]);
        let costs = CostModel::default();
        let q = evaluate_policy(
            &world,
            &["c00".into(), "c01".into()],
            &[0.5, 1.0],
            (0, 0),
            (3, 2),
            &costs,
        )
        .unwrap();
        assert!((q - 11.0).abs() < 1e-12, "expected 11, got {q}");
    }

    #[test]
    fn degenerate_zero_cost_model_gives_zero() {
        let world = open_world(3, 3, &[(1, 1)]);
        let costs = CostModel {
            r_search: 0.0,
            r_pick: 0.0,
            r_place: 0.0,
            fixed_op_cost: 0.0,
            pessimistic_penalty: 0.0,
        };
        let q = evaluate_policy(&world, &["c00".into()], &[1.0], (1, 1), (1, 1), &costs).unwrap();
        assert_eq!(q, 0.0);
    }

    #[test]
    fn policy_validation_rejects_malformed_inputs() {
        let world = open_world(3, 3, &[(1, 1)]);
        let costs = CostModel::default();
        let bad = [
            (vec![], vec![]),
            (vec!["c00".to_string()], vec![0.5]),
            (vec!["c00".to_string()], vec![0.0]),
            (vec!["c00".to_string()], vec![1.0, 1.0]),
        ];
        for (seq, probs) in bad {
            assert!(
                evaluate_policy(&world, &seq, &probs, (0, 0), (0, 0), &costs).is_err(),
                "{seq:?} {probs:?} should be rejected"
            );
        }
        assert!(matches!(
            evaluate_policy(&world, &["nope".into()], &[1.0], (0, 0), (0, 0), &costs),
            Err(LiosError::UnknownContainer(_))
        ));
    }

    #[test]
    fn conditional_probs_renormalize_and_end_at_one() {
        let p = conditional_step_probs(&[0.5, 0.5]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && p[1] == 1.0);
        let p = conditional_step_probs(&[0.6, 0.3, 0.1]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
        assert_eq!(p[2], 1.0);
        assert_eq!(conditional_step_probs(&[0.2]).unwrap(), vec![1.0]);
        assert!(conditional_step_probs(&[]).is_err());
        assert!(conditional_step_probs(&[0.5, 1.0]).is_err());
        assert!(conditional_step_probs(&[-0.1, 0.5]).is_err());
    }

    #[test]
    fn masses_recover_the_normalized_marginals() {
        let probs = conditional_step_probs(&[0.4, 0.2, 0.2]).unwrap();
        let policy = FindPolicy {
            object_type: "obj".into(),
            binding: None,
            sequence: vec!["a".into(), "b".into(), "c".into()],
            step_probs: probs,
            q_from: (0, 0),
            q_to: (0, 0),
            expected_cost: 0.0,
            model_based: true,
        };
        let m = policy.masses();
        assert!((m[0] - 0.5).abs() < 1e-12);
        assert!((m[1] - 0.25).abs() < 1e-12);
        assert!((m[2] - 0.25).abs() < 1e-12);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dp_matches_brute_force_permutation_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let costs = CostModel::default();
        for _ in 0..120 {
            let inst = random_instance(&mut rng, 1, 5);
            let belief = BeliefState::at(inst.q_from);
            let policy = optimal_find_policy(
                &inst.world,
                &belief,
                "obj",
                inst.q_from,
                inst.q_to,
                &inst.est,
                &costs,
                K_MAX,
            )
            .unwrap();
            let best = brute_force_cost(&inst, &costs);
            assert!(
                (policy.expected_cost - best).abs() < 1e-9,
                "dp {} vs brute {}",
                policy.expected_cost,
                best
            );
        }
    }

    #[test]
    fn tie_between_symmetric_containers_breaks_by_id() {
        let rows = ["...", "...", "..."];
        let world = WorldModel {
            grid: GridMap::from_rows(&rows),
            containers: vec![
                Container {
                    id: "a_0".into(),
                    type_name: "ta".into(),
                    room_type: "r".into(),
                    pose: (0, 0),
                },
                Container {
                    id: "b_0".into(),
                    type_name: "tb".into(),
                    room_type: "r".into(),
                    pose: (2, 0),
                },
            ],
            objects: vec![],
            seed: 0,
        };
        let mut est = Estimator::uniform();
        est.set_counts("obj", "ta", "r", 499, 998);
        est.set_counts("obj", "tb", "r", 499, 998);
        let belief = BeliefState::at((1, 0));
        let policy = optimal_find_policy(
            &world,
            &belief,
            "obj",
            (1, 0),
            (1, 0),
            &est,
            &CostModel::default(),
            K_MAX,
        )
        .unwrap();
        assert_eq!(policy.sequence, vec!["a_0".to_string(), "b_0".to_string()]);
    }

    #[test]
    fn subset_selection_keeps_the_most_likely_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let inst = random_instance(&mut rng, 12, 12);
        let belief = BeliefState::at(inst.q_from);
        let policy = optimal_find_policy(
            &inst.world,
            &belief,
            "obj",
            inst.q_from,
            inst.q_to,
            &inst.est,
            &CostModel::default(),
            K_MAX,
        )
        .unwrap();
        assert_eq!(policy.sequence.len(), K_MAX);
        let mut ranked: Vec<usize> = (0..12).collect();
        ranked.sort_by(|&a, &b| {
            inst.marginals[b]
                .total_cmp(&inst.marginals[a])
                .then(a.cmp(&b))
        });
        let want: std::collections::BTreeSet<String> = ranked[..K_MAX]
            .iter()
            .map(|&i| format!("c{i:02}"))
            .collect();
        let got: std::collections::BTreeSet<String> = policy.sequence.iter().cloned().collect();
        assert_eq!(got, want);
        assert_eq!(*policy.step_probs.last().unwrap(), 1.0);
    }

    #[test]
    fn greedy_chains_to_the_nearest_container() {
        let world = open_world(10, 1, &[(9, 0), (2, 0), (5, 0)]);
        let belief = BeliefState::at((0, 0));
        let policy =
            greedy_find_policy(&world, &belief, "obj", (0, 0), &CostModel::default()).unwrap();
        assert_eq!(
            policy.sequence,
            vec!["c01".to_string(), "c02".to_string(), "c00".to_string()]
        );
        let want = [1.0 / 3.0, 0.5, 1.0];
        for (got, want) in policy.step_probs.iter().zip(want) {
            assert!((got - want).abs() < 1e-12);
        }
        assert_eq!(policy.q_to, policy.q_from);
        assert!(!policy.model_based);
    }

    #[test]
    fn optimal_never_exceeds_greedy_under_shared_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let costs = CostModel::default();
        for _ in 0..60 {
            let inst = random_instance(&mut rng, 2, 8);
            let belief = BeliefState::at(inst.q_from);
            let optimal = optimal_find_policy(
                &inst.world,
                &belief,
                "obj",
                inst.q_from,
                inst.q_to,
                &inst.est,
                &costs,
                K_MAX,
            )
            .unwrap();
            let greedy =
                greedy_find_policy(&inst.world, &belief, "obj", inst.q_from, &costs).unwrap();
            let ms: Vec<f64> = greedy
                .sequence
                .iter()
                .map(|id| {
                    let i: usize = id[1..].parse().unwrap();
                    inst.marginals[i]
                })
                .collect();
            let probs = conditional_step_probs(&ms).unwrap();
            let greedy_q = evaluate_policy(
                &inst.world,
                &greedy.sequence,
                &probs,
                inst.q_from,
                inst.q_to,
                &costs,
            )
            .unwrap();
            assert!(
                optimal.expected_cost <= greedy_q + 1e-9,
                "optimal {} > greedy {}",
                optimal.expected_cost,
                greedy_q
            );
        }
    }

    #[test]
    fn optimistic_is_a_lower_bound_and_pessimistic_adds_the_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let costs = CostModel::default();
        for _ in 0..60 {
            let inst = random_instance(&mut rng, 1, 8);
            let belief = BeliefState::at(inst.q_from);
            let mut cache = DistanceCache::new(&inst.world.grid);
            let opt = optimistic_cost(
                &inst.world,
                &belief,
                "obj",
                inst.q_from,
                inst.q_to,
                &costs,
                &mut cache,
            )
            .unwrap();
            let pes = pessimistic_cost(
                &inst.world,
                &belief,
                "obj",
                inst.q_from,
                inst.q_to,
                &costs,
                &mut cache,
            )
            .unwrap();
            assert!((pes - opt - costs.pessimistic_penalty).abs() < 1e-12);
            let policy = optimal_find_policy(
                &inst.world,
                &belief,
                "obj",
                inst.q_from,
                inst.q_to,
                &inst.est,
                &costs,
                K_MAX,
            )
            .unwrap();
            assert!(
                opt <= policy.expected_cost + 1e-9,
                "optimistic {opt} exceeds expected {}",
                policy.expected_cost
            );
        }
    }

    #[test]
    fn retargeting_updates_cost_and_keeps_order() {
        let world = open_world(8, 5, &[(1, 1), (6, 3)]);
        let belief = BeliefState::at((0, 0));
        let costs = CostModel::default();
        let base = greedy_find_policy(&world, &belief, "obj", (0, 0), &costs).unwrap();
        let moved = base.clone().with_target(&world, &costs, (7, 4)).unwrap();
        assert_eq!(base.sequence, moved.sequence);
        assert_eq!(base.step_probs, moved.step_probs);
        assert_eq!(moved.q_to, (7, 4));
        let direct = evaluate_policy(
            &world,
            &moved.sequence,
            &moved.step_probs,
            (0, 0),
            (7, 4),
            &costs,
        )
        .unwrap();
        assert_eq!(moved.expected_cost, direct);
    }
}
