//! Cluster-size selection as a linear integer program.
//!
//! Each round selects `c_m` devices from group `m` (sizes `g_m`, bit-widths
//! `b_m`) subject to `sum c_m = N`, `1 <= c_m <= g_m`, and the uplink bit
//! budget `sum b_m c_m <= B`. The objective is the deviation-term slice of the
//! learning-error bound,
//!
//! ```text
//! sum_m (c_m / g_m) * sum_u [ 8 C^2 / (2^b_m - 1)^2 + sigma_{m,u}^2 ]
//! ```
//!
//! which is linear in the counts, so each group has a constant per-device
//! cost. `solve` is an exact depth-first branch-and-bound with a
//! cheapest-fill relaxation bound; `enumerate_oracle` is the brute-force
//! check. Ties break to the lexicographically smallest count vector, and both
//! paths share the comparison logic so they agree bit-for-bit.

use crate::error::{Error, Result, MAX_BITS};
use serde::Serialize;

/// Static description of one device group.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupProfile {
    /// Number of devices `g_m`.
    pub size: usize,
    /// Quantization bit-width `b_m`.
    pub bits: u32,
    /// Link-noise standard deviation per device, length `size`.
    pub sigmas: Vec<f64>,
    /// Clipping constant `C` shared by the run.
    pub clip: f64,
}

impl GroupProfile {
    pub fn new(size: usize, bits: u32, sigmas: Vec<f64>, clip: f64) -> Result<Self> {
        if size < 1 {
            return Err(Error::EmptyInput("group"));
        }
        if bits < 1 || bits > MAX_BITS {
            return Err(Error::InvalidBits(bits));
        }
        if sigmas.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                got: sigmas.len(),
            });
        }
        if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::NonFinite("link noise std"));
        }
        if !clip.is_finite() || clip <= 0.0 {
            return Err(Error::InvalidClip(clip));
        }
        Ok(Self {
            size,
            bits,
            sigmas,
            clip,
        })
    }

    /// Uniform-noise convenience constructor.
    pub fn uniform_sigma(size: usize, bits: u32, sigma: f64, clip: f64) -> Result<Self> {
        Self::new(size, bits, vec![sigma; size], clip)
    }

    /// Objective cost contributed per selected device of this group:
    /// `(1/g) * sum_u [8 C^2 / (2^b - 1)^2 + sigma_u^2]`.
    pub fn unit_cost(&self) -> f64 {
        let levels = ((1u64 << self.bits) - 1) as f64;
        let quant = 8.0 * self.clip * self.clip / (levels * levels);
        let total: f64 = self.sigmas.iter().map(|s| quant + s * s).sum();
        total / self.size as f64
    }
}

/// Selected per-group cluster sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterAssignment {
    pub counts: Vec<usize>,
}

impl ClusterAssignment {
    /// Check feasibility against the constraint set.
    pub fn validate(&self, groups: &[GroupProfile], n: usize, bit_budget: u64) -> Result<()> {
        if self.counts.len() != groups.len() {
            return Err(Error::DimensionMismatch {
                expected: groups.len(),
                got: self.counts.len(),
            });
        }
        for (m, (&c, g)) in self.counts.iter().zip(groups).enumerate() {
            if c < 1 || c > g.size {
                return Err(Error::ClusterTooLarge {
                    group: m,
                    count: c,
                    size: g.size,
                });
            }
        }
        let total: usize = self.counts.iter().sum();
        if total != n {
            return Err(Error::Infeasible(format!(
                "counts sum to {total}, expected N = {n}"
            )));
        }
        let bits = used_bits(&self.counts, groups);
        if bits > bit_budget {
            return Err(Error::Infeasible(format!(
                "assignment uses {bits} bits, budget is {bit_budget}"
            )));
        }
        Ok(())
    }
}

fn used_bits(counts: &[usize], groups: &[GroupProfile]) -> u64 {
    counts
        .iter()
        .zip(groups)
        .map(|(&c, g)| c as u64 * u64::from(g.bits))
        .sum()
}

/// Evaluate the deviation objective for an arbitrary count vector (no
/// feasibility check; the zero vector evaluates to zero by linearity).
pub fn objective(counts: &[usize], groups: &[GroupProfile]) -> Result<f64> {
    if counts.len() != groups.len() {
        return Err(Error::DimensionMismatch {
            expected: groups.len(),
            got: counts.len(),
        });
    }
    Ok(counts
        .iter()
        .zip(groups)
        .map(|(&c, g)| c as f64 * g.unit_cost())
        .sum())
}

/// Least total bit usage achievable for `n` devices spread over `groups`
/// with every group getting at least one; `None` when even that is
/// impossible.
fn min_bits(groups: &[GroupProfile], n: usize) -> Option<u64> {
    let m = groups.len();
    if n < m || groups.iter().map(|g| g.size).sum::<usize>() < n {
        return None;
    }
    let mut base: u64 = groups.iter().map(|g| u64::from(g.bits)).sum();
    let mut left = n - m;
    let mut order: Vec<&GroupProfile> = groups.iter().collect();
    order.sort_by_key(|g| g.bits);
    for g in order {
        let take = left.min(g.size - 1);
        base += take as u64 * u64::from(g.bits);
        left -= take;
    }
    debug_assert_eq!(left, 0);
    Some(base)
}

/// Cost lower bound for placing `n` devices over `groups` when the bit
/// budget is relaxed away: one device per group, remainder into the cheapest
/// groups first.
fn cost_lower_bound(groups: &[GroupProfile], n: usize) -> f64 {
    let m = groups.len();
    let mut cost: f64 = groups.iter().map(|g| g.unit_cost()).sum();
    let mut left = n - m;
    let mut order: Vec<&GroupProfile> = groups.iter().collect();
    order.sort_by(|a, b| a.unit_cost().total_cmp(&b.unit_cost()));
    for g in order {
        let take = left.min(g.size - 1);
        cost += take as f64 * g.unit_cost();
        left -= take;
    }
    cost
}

/// Explain which constraint makes the whole program infeasible.
fn classify_infeasible(groups: &[GroupProfile], n: usize, bit_budget: u64) -> Error {
    let m = groups.len();
    if n < m {
        return Error::Infeasible(format!(
            "every group needs at least one device, but N = {n} < {m} groups"
        ));
    }
    let capacity: usize = groups.iter().map(|g| g.size).sum();
    if capacity < n {
        return Error::Infeasible(format!(
            "groups supply at most {capacity} devices, but N = {n}"
        ));
    }
    match min_bits(groups, n) {
        Some(bits) if bits > bit_budget => Error::Infeasible(format!(
            "bit budget B = {bit_budget} below the minimum achievable {bits} bits for N = {n}"
        )),
        Some(_) => Error::Infeasible("feasible region unexpectedly empty".into()),
        None => Error::Infeasible("no count vector satisfies the box constraints".into()),
    }
}

struct Search<'a> {
    groups: &'a [GroupProfile],
    n: usize,
    bit_budget: u64,
    best: Option<(f64, Vec<usize>)>,
}

impl Search<'_> {
    fn dfs(&mut self, idx: usize, counts: &mut Vec<usize>, used_n: usize, bits: u64, cost: f64) {
        let rest = &self.groups[idx..];
        let n_rem = self.n - used_n;
        if rest.is_empty() {
            if n_rem == 0 {
                match &self.best {
                    Some((best_cost, _)) if cost >= *best_cost => {}
                    _ => self.best = Some((cost, counts.clone())),
                }
            }
            return;
        }
        match min_bits(rest, n_rem) {
            Some(need) if bits + need <= self.bit_budget => {}
            _ => return,
        }
        if let Some((best_cost, _)) = &self.best {
            if cost + cost_lower_bound(rest, n_rem) >= *best_cost {
                return;
            }
        }
        let g = &rest[0];
        let groups_after = rest.len() - 1;
        let hi = g.size.min(n_rem.saturating_sub(groups_after));
        for c in 1..=hi {
            counts.push(c);
            self.dfs(
                idx + 1,
                counts,
                used_n + c,
                bits + c as u64 * u64::from(g.bits),
                cost + c as f64 * g.unit_cost(),
            );
            counts.pop();
        }
    }
}

/// Exact solution of the cluster-size program. Ties break to the
/// lexicographically smallest count vector.
pub fn solve(groups: &[GroupProfile], n: usize, bit_budget: u64) -> Result<ClusterAssignment> {
    if groups.is_empty() {
        return Err(Error::EmptyInput("group list"));
    }
    let mut search = Search {
        groups,
        n,
        bit_budget,
        best: None,
    };
    // seed the incumbent with a cheapest-fill attempt so pruning bites early
    if let Some(seed) = greedy_feasible(groups, n, bit_budget) {
        let cost = objective(&seed, groups)?;
        search.best = Some((cost + f64::EPSILON * cost.abs().max(1.0), seed));
        // the seed re-enters through the search itself; the nudged cost keeps
        // the lexicographic tie-break with the DFS ordering intact
    }
    search.dfs(0, &mut Vec::with_capacity(groups.len()), 0, 0, 0.0);
    match search.best {
        Some((_, counts)) => {
            let assignment = ClusterAssignment { counts };
            assignment.validate(groups, n, bit_budget)?;
            Ok(assignment)
        }
        None => Err(classify_infeasible(groups, n, bit_budget)),
    }
}

/// Cheapest-fill heuristic; returns a feasible vector when it happens to
/// satisfy the bit budget.
fn greedy_feasible(groups: &[GroupProfile], n: usize, bit_budget: u64) -> Option<Vec<usize>> {
    let m = groups.len();
    if n < m {
        return None;
    }
    let mut counts = vec![1usize; m];
    let mut left = n - m;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| groups[a].unit_cost().total_cmp(&groups[b].unit_cost()));
    for i in order {
        let take = left.min(groups[i].size - 1);
        counts[i] += take;
        left -= take;
    }
    if left == 0 && used_bits(&counts, groups) <= bit_budget {
        Some(counts)
    } else {
        None
    }
}

const ENUMERATION_GUARD: u128 = 10_000_000;

/// Brute-force optimum by scanning the whole count lattice. Guarded by the
/// lattice size so it stays a test-and-verification tool.
pub fn enumerate_oracle(
    groups: &[GroupProfile],
    n: usize,
    bit_budget: u64,
) -> Result<ClusterAssignment> {
    if groups.is_empty() {
        return Err(Error::EmptyInput("group list"));
    }
    let lattice: u128 = groups.iter().map(|g| g.size as u128).product();
    if lattice > ENUMERATION_GUARD {
        return Err(Error::SearchSpaceTooLarge(lattice, ENUMERATION_GUARD));
    }
    let m = groups.len();
    let mut counts = vec![1usize; m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let total: usize = counts.iter().sum();
        if total == n && used_bits(&counts, groups) <= bit_budget {
            let cost = objective(&counts, groups)?;
            match &best {
                Some((best_cost, _)) if cost >= *best_cost => {}
                _ => best = Some((cost, counts.clone())),
            }
        }
        // lexicographic increment from the last coordinate
        let mut k = m;
        loop {
            if k == 0 {
                match best {
                    Some((_, counts)) => return Ok(ClusterAssignment { counts }),
                    None => return Err(classify_infeasible(groups, n, bit_budget)),
                }
            }
            k -= 1;
            if counts[k] < groups[k].size {
                counts[k] += 1;
                for c in counts.iter_mut().skip(k + 1) {
                    *c = 1;
                }
                break;
            }
        }
    }
}

/// The two-group setup of the reference experiment, kept in one place so
/// tests, examples, and configs agree.
pub fn reference_two_group_profiles() -> Vec<GroupProfile> {
    vec![
        GroupProfile::uniform_sigma(50, 2, 6.25e-4, 10.0).unwrap(),
        GroupProfile::uniform_sigma(50, 4, 0.125, 10.0).unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_costs_for_reference_setup() {
        let groups = reference_two_group_profiles();
        // 8*100/9 + (6.25e-4)^2 and 8*100/225 + 0.125^2
        assert_relative_eq!(groups[0].unit_cost(), 88.888_889, max_relative = 1e-5);
        assert_relative_eq!(groups[1].unit_cost(), 3.571_180, max_relative = 1e-5);
        assert_relative_eq!(
            objective(&[1, 0], &groups).unwrap(),
            groups[0].unit_cost()
        );
    }

    #[test]
    fn objective_edge_cases() {
        let groups = reference_two_group_profiles();
        assert_eq!(objective(&[0, 0], &groups).unwrap(), 0.0);
        assert!(objective(&[1], &groups).is_err());
        // large bit-widths and zero noise drive the objective to zero
        let clean = vec![GroupProfile::uniform_sigma(4, 30, 0.0, 10.0).unwrap()];
        assert!(objective(&[4], &clean).unwrap() < 1e-12);
    }

    #[test]
    fn reference_instance_solves_to_five_five() {
        let groups = reference_two_group_profiles();
        let sol = solve(&groups, 10, 30).unwrap();
        assert_eq!(sol.counts, vec![5, 5]);
        let oracle = enumerate_oracle(&groups, 10, 30).unwrap();
        assert_eq!(oracle.counts, sol.counts);
    }

    #[test]
    fn single_group_forced() {
        let groups = vec![GroupProfile::uniform_sigma(8, 3, 0.1, 5.0).unwrap()];
        let sol = solve(&groups, 6, 18).unwrap();
        assert_eq!(sol.counts, vec![6]);
    }

    #[test]
    fn infeasible_capacity() {
        let groups = vec![GroupProfile::uniform_sigma(3, 2, 0.1, 5.0).unwrap()];
        let err = solve(&groups, 4, 100).unwrap_err();
        assert!(err.to_string().contains("at most 3 devices"));
        let err2 = enumerate_oracle(&groups, 4, 100).unwrap_err();
        assert!(err2.to_string().contains("at most 3 devices"));
    }

    #[test]
    fn infeasible_bit_budget_names_minimum() {
        let groups = reference_two_group_profiles();
        // N = 10 needs at least 9*2 + 1*4 = 22 bits
        let err = solve(&groups, 10, 21).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bit budget"), "{msg}");
        assert!(msg.contains("22"), "{msg}");
    }

    #[test]
    fn infeasible_when_fewer_devices_than_groups() {
        let groups = reference_two_group_profiles();
        let err = solve(&groups, 1, 100).unwrap_err();
        assert!(err.to_string().contains("at least one device"));
    }

    fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<GroupProfile>, usize, u64) {
        let m = 1 + rng.random_range(0..4usize);
        let groups: Vec<GroupProfile> = (0..m)
            .map(|_| {
                let size = 1 + rng.random_range(0..10usize);
                let bits = 1 + rng.random_range(0..6u32);
                let sigmas: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
                GroupProfile::new(size, bits, sigmas, 0.5 + 10.0 * rng.random::<f64>()).unwrap()
            })
            .collect();
        let capacity: usize = groups.iter().map(|g| g.size).sum();
        let n = 1 + rng.random_range(0..capacity);
        let b = rng.random_range(0..80u64);
        (groups, n, b)
    }

    #[test]
    fn solver_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_24);
        let mut feasible = 0;
        for _ in 0..300 {
            let (groups, n, b) = random_instance(&mut rng);
            match (solve(&groups, n, b), enumerate_oracle(&groups, n, b)) {
                (Ok(a), Ok(o)) => {
                    feasible += 1;
                    assert_eq!(a.counts, o.counts, "instance n={n} b={b}");
                    assert_eq!(
                        objective(&a.counts, &groups).unwrap(),
                        objective(&o.counts, &groups).unwrap()
                    );
                }
                (Err(_), Err(_)) => {}
                (a, o) => panic!("solver/oracle disagree on feasibility: {a:?} vs {o:?}"),
            }
        }
        assert!(feasible > 50, "too few feasible instances: {feasible}");
    }

    #[test]
    fn solution_always_satisfies_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let (groups, n, b) = random_instance(&mut rng);
            if let Ok(sol) = solve(&groups, n, b) {
                sol.validate(&groups, n, b).unwrap();
            }
        }
    }

    #[test]
    fn relaxing_budget_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7_654);
        for _ in 0..100 {
            let (groups, n, b) = random_instance(&mut rng);
            if let Ok(sol) = solve(&groups, n, b) {
                let cost = objective(&sol.counts, &groups).unwrap();
                let relaxed = solve(&groups, n, b + 7).unwrap();
                let relaxed_cost = objective(&relaxed.counts, &groups).unwrap();
                assert!(relaxed_cost <= cost + 1e-12);
            }
        }
    }

    #[test]
    fn ties_break_lexicographically() {
        // identical groups with a dyadic unit cost (8 * 0.25 = 2.0), so every
        // split of 4 devices costs exactly 8.0 and only the lexicographic
        // rule separates (1,3) from (2,2) and (3,1)
        let g = GroupProfile::uniform_sigma(3, 1, 0.0, 0.5).unwrap();
        let groups = vec![g.clone(), g];
        assert_eq!(groups[0].unit_cost(), 2.0);
        let sol = solve(&groups, 4, 100).unwrap();
        assert_eq!(sol.counts, vec![1, 3]);
        let oracle = enumerate_oracle(&groups, 4, 100).unwrap();
        assert_eq!(oracle.counts, vec![1, 3]);
    }

    #[test]
    fn oracle_guard_trips() {
        let groups: Vec<GroupProfile> = (0..5)
            .map(|_| GroupProfile::uniform_sigma(100, 2, 0.1, 1.0).unwrap())
            .collect();
        assert!(matches!(
            enumerate_oracle(&groups, 5, 1000),
            Err(Error::SearchSpaceTooLarge(..))
        ));
    }
}
