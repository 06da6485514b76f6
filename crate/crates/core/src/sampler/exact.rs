//! Exact distribution computation for rules with threshold profiles: the
//! variate cube is cut into atoms at the declared cut-points, and the
//! finitely many (atom, ordering, labeling) combinations are enumerated
//! with exact rational probabilities.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{
    restrict_labelings, PreparedSampler, RuleCtx, SamplerError, ThresholdProfile, TypeRule,
    Variate,
};
use crate::classdef::ClassSpec;
use crate::equiv::Blur;
use crate::relstruct::{Element, Structure};

#[derive(Debug, Clone)]
pub struct ExactOptions {
    /// Upper bound on the number of variate atoms.
    pub atom_cap: u64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { atom_cap: 1 << 22 }
    }
}

/// An exact probability table over output structures, keyed by canonical
/// form and carrying rational probabilities that sum to one.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub outcomes: Vec<(Structure, BigRational)>,
}

impl ExactDistribution {
    pub fn probability_of(&self, s: &Structure) -> BigRational {
        let key = s.canonical_form();
        self.outcomes
            .iter()
            .find(|(o, _)| o.canonical_form() == key)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn total(&self) -> BigRational {
        self.outcomes.iter().map(|(_, p)| p.clone()).sum()
    }

    /// Marginal probability that the given facts all hold.
    pub fn probability_that(&self, pred: impl Fn(&Structure) -> bool) -> BigRational {
        self.outcomes
            .iter()
            .filter(|(s, _)| pred(s))
            .map(|(_, p)| p.clone())
            .sum()
    }
}

/// Exact total-variation distance between two exact tables.
pub fn exact_tv(a: &ExactDistribution, b: &ExactDistribution) -> BigRational {
    let mut keys: Vec<Vec<u8>> = a
        .outcomes
        .iter()
        .map(|(s, _)| s.canonical_form())
        .chain(b.outcomes.iter().map(|(s, _)| s.canonical_form()))
        .collect();
    keys.sort();
    keys.dedup();
    let lookup = |d: &ExactDistribution, key: &[u8]| {
        d.outcomes
            .iter()
            .find(|(s, _)| s.canonical_form() == key)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(BigRational::zero)
    };
    let mut sum = BigRational::zero();
    for key in &keys {
        let diff = lookup(a, key) - lookup(b, key);
        let abs = if diff < BigRational::zero() { -diff } else { diff };
        sum += abs;
    }
    sum / BigRational::from_integer(2.into())
}

/// The exact output distribution of a rule over a structure, averaging over
/// variates, orderings and labelings.
pub fn exact_distribution(
    spec: &ClassSpec,
    structure: &Structure,
    rule: &dyn TypeRule,
) -> Result<ExactDistribution, SamplerError> {
    let prepared = PreparedSampler::new(spec, structure, rule)?;
    let combos = labeling_combos(&prepared);
    let share = BigRational::new(1.into(), (combos.len() as i64).into());
    let mut table: BTreeMap<Vec<u8>, (Structure, BigRational)> = BTreeMap::new();
    for labeling in &combos {
        accumulate_given_labeling(
            &prepared,
            rule,
            labeling,
            &share,
            &ExactOptions::default(),
            &mut table,
        )?;
    }
    Ok(finish(table))
}

/// The exact output distribution conditioned on a fixed labeling.
pub fn exact_distribution_given_labeling(
    spec: &ClassSpec,
    structure: &Structure,
    rule: &dyn TypeRule,
    labeling: &BTreeMap<usize, BTreeMap<Vec<Element>, u32>>,
) -> Result<ExactDistribution, SamplerError> {
    let prepared = PreparedSampler::new(spec, structure, rule)?;
    let mut table: BTreeMap<Vec<u8>, (Structure, BigRational)> = BTreeMap::new();
    accumulate_given_labeling(
        &prepared,
        rule,
        labeling,
        &BigRational::one(),
        &ExactOptions::default(),
        &mut table,
    )?;
    Ok(finish(table))
}

fn finish(table: BTreeMap<Vec<u8>, (Structure, BigRational)>) -> ExactDistribution {
    let outcomes: Vec<(Structure, BigRational)> = table.into_values().collect();
    debug_assert!(
        outcomes
            .iter()
            .map(|(_, p)| p.clone())
            .sum::<BigRational>()
            .is_one(),
        "probabilities must sum to one"
    );
    ExactDistribution { outcomes }
}

/// All joint labelings of the finite-count declarations, each equally
/// likely.
pub(super) fn labeling_combos(
    prepared: &PreparedSampler,
) -> Vec<BTreeMap<usize, BTreeMap<Vec<Element>, u32>>> {
    let mut combos: Vec<BTreeMap<usize, BTreeMap<Vec<Element>, u32>>> = vec![BTreeMap::new()];
    for fr in &prepared.finite_rels {
        let assignments = injective_lists(fr.blocks.len(), fr.label_count);
        let mut next = Vec::with_capacity(combos.len() * assignments.len());
        for base in &combos {
            for labels in &assignments {
                let mut map = BTreeMap::new();
                for (b, block) in fr.blocks.iter().enumerate() {
                    for tuple in block {
                        map.insert(tuple.clone(), labels[b]);
                    }
                }
                let mut combo = base.clone();
                combo.insert(fr.rel, map);
                next.push(combo);
            }
        }
        combos = next;
    }
    combos
}

fn injective_lists(m: usize, c: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut acc = Vec::with_capacity(m);
    fn rec(m: usize, c: u32, acc: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if acc.len() == m {
            out.push(acc.clone());
            return;
        }
        for l in 1..=c {
            if acc.contains(&l) {
                continue;
            }
            acc.push(l);
            rec(m, c, acc, out);
            acc.pop();
        }
    }
    rec(m, c, &mut acc, &mut out);
    out
}

fn accumulate_given_labeling(
    prepared: &PreparedSampler,
    rule: &dyn TypeRule,
    labeling: &BTreeMap<usize, BTreeMap<Vec<Element>, u32>>,
    base_prob: &BigRational,
    opts: &ExactOptions,
    table: &mut BTreeMap<Vec<u8>, (Structure, BigRational)>,
) -> Result<(), SamplerError> {
    let profile = rule.profile().ok_or(SamplerError::MissingProfile)?;
    let intervals = cut_intervals(&profile);

    // Global blur list: every blur any query reads, in canonical key order.
    let mut global: Vec<Blur> = Vec::new();
    for q in &prepared.queries {
        for b in &q.blurs {
            if !global.contains(b) {
                global.push(b.clone());
            }
        }
    }
    global.sort_by_key(|b| b.canonical_key());
    let query_blur_index: Vec<Vec<usize>> = prepared
        .queries
        .iter()
        .map(|q| {
            q.blurs
                .iter()
                .map(|b| global.iter().position(|g| g == b).unwrap())
                .collect()
        })
        .collect();

    let atom_count = (intervals.len() as u64)
        .checked_pow(global.len() as u32)
        .unwrap_or(u64::MAX);
    if atom_count > opts.atom_cap {
        return Err(SamplerError::AtomCapExceeded(atom_count, opts.atom_cap));
    }

    // Ordering combinations: identity unless the profile reads orderings.
    let ordering_sets: Vec<Vec<Vec<usize>>> = global
        .iter()
        .map(|b| {
            if profile.uses_orderings && b.len() > 1 {
                index_permutations(b.len())
            } else {
                vec![(0..b.len()).collect()]
            }
        })
        .collect();
    let ordering_count: u64 = ordering_sets.iter().map(|s| s.len() as u64).product();
    if ordering_count.saturating_mul(atom_count) > opts.atom_cap {
        return Err(SamplerError::AtomCapExceeded(
            ordering_count.saturating_mul(atom_count),
            opts.atom_cap,
        ));
    }
    let ordering_prob = BigRational::new(1.into(), (ordering_count as i64).into());

    let mut atom_idx = vec![0usize; global.len()];
    loop {
        let atom_prob: BigRational = atom_idx
            .iter()
            .map(|&i| intervals[i].1.clone())
            .product::<BigRational>()
            * base_prob
            * &ordering_prob;
        let variates_global: Vec<Variate> = atom_idx
            .iter()
            .map(|&i| Variate::Exact(intervals[i].0.clone()))
            .collect();

        let mut ordering_idx = vec![0usize; global.len()];
        loop {
            let orderings_global: Vec<Vec<crate::equiv::ClassHandle>> = global
                .iter()
                .zip(ordering_idx.iter())
                .enumerate()
                .map(|(g, (b, &oi))| {
                    ordering_sets[g][oi].iter().map(|&i| b.0[i]).collect()
                })
                .collect();
            let outcome = evaluate_all(
                prepared,
                rule,
                labeling,
                &variates_global,
                &orderings_global,
                &query_blur_index,
            );
            let key = outcome.canonical_form();
            table
                .entry(key)
                .or_insert_with(|| (outcome, BigRational::zero()))
                .1 += &atom_prob;

            if !advance(&mut ordering_idx, &ordering_sets.iter().map(|s| s.len()).collect::<Vec<_>>()) {
                break;
            }
        }

        if !advance(
            &mut atom_idx,
            &vec![intervals.len(); global.len()],
        ) {
            break;
        }
    }
    Ok(())
}

fn evaluate_all(
    prepared: &PreparedSampler,
    rule: &dyn TypeRule,
    labeling: &BTreeMap<usize, BTreeMap<Vec<Element>, u32>>,
    variates_global: &[Variate],
    orderings_global: &[Vec<crate::equiv::ClassHandle>],
    query_blur_index: &[Vec<usize>],
) -> Structure {
    let mut facts = Vec::new();
    for (qi, q) in prepared.queries.iter().enumerate() {
        let variates: Vec<Variate> = query_blur_index[qi]
            .iter()
            .map(|&g| variates_global[g].clone())
            .collect();
        let orderings: Vec<Vec<crate::equiv::ClassHandle>> = query_blur_index[qi]
            .iter()
            .map(|&g| orderings_global[g].clone())
            .collect();
        let local_labelings = restrict_labelings(labeling, &q.local_domains);
        let ctx = RuleCtx {
            spec: prepared.spec,
            symbol: q.symbol,
            tuple: &q.tuple,
            local: &q.local,
            blurs: &q.blurs,
            variates: &variates,
            orderings: &orderings,
            labelings: &local_labelings,
            handles: &q.handles,
        };
        if rule.decide(&ctx) {
            facts.push((q.symbol, q.tuple.clone()));
        }
    }
    Structure::new(
        std::sync::Arc::clone(rule.target()),
        prepared.structure.universe().to_vec(),
        facts,
    )
    .expect("queried tuples lie in the universe")
}

/// Atom intervals of [0, 1] at the profile's cut-points: representative
/// midpoints paired with exact lengths.
fn cut_intervals(profile: &ThresholdProfile) -> Vec<(BigRational, BigRational)> {
    let mut bounds: Vec<BigRational> = vec![BigRational::zero()];
    let mut cuts = profile.cuts.clone();
    cuts.sort();
    cuts.dedup();
    for c in cuts {
        if c > BigRational::zero() && c < BigRational::one() {
            bounds.push(c);
        }
    }
    bounds.push(BigRational::one());
    let two = BigRational::from_integer(2.into());
    bounds
        .windows(2)
        .map(|w| {
            let mid = (&w[0] + &w[1]) / &two;
            let len = &w[1] - &w[0];
            (mid, len)
        })
        .collect()
}

fn index_permutations(n: usize) -> Vec<Vec<usize>> {
    let items: Vec<u32> = (0..n as u32).collect();
    crate::relstruct::permutations(&items)
        .into_iter()
        .map(|p| p.into_iter().map(|x| x as usize).collect())
        .collect()
}

/// Odometer step over mixed radices; false when wrapped around.
fn advance(idx: &mut [usize], radices: &[usize]) -> bool {
    for i in (0..idx.len()).rev() {
        idx[i] += 1;
        if idx[i] < radices[i] {
            return true;
        }
        idx[i] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspec;
    use crate::sampler::{builtin_rule, ratio};
    use std::sync::Arc;

    fn parse(spec: &ClassSpec, text: &str) -> Structure {
        Structure::parse(Arc::clone(&spec.sig), text).unwrap()
    }

    #[test]
    fn classcoin_same_class_pair() {
        let k = kspec::builtin("equiv").unwrap();
        let s = parse(&k, "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\n");
        let rule = builtin_rule("classcoin").unwrap();
        let dist = exact_distribution(&k, &s, rule.as_ref()).unwrap();
        let p = rule.target().lookup("P").unwrap();
        let both = dist.probability_that(|o| o.holds(p, &[1]) && o.holds(p, &[2]));
        assert_eq!(both, ratio(1, 2));
        let split = dist.probability_that(|o| o.holds(p, &[1]) != o.holds(p, &[2]));
        assert_eq!(split, ratio(0, 1));
    }

    #[test]
    fn classcoin_cross_class_pair() {
        let k = kspec::builtin("equiv").unwrap();
        let s = parse(&k, "universe: 1 2\nR 1 1\nR 2 2\n");
        let rule = builtin_rule("classcoin").unwrap();
        let dist = exact_distribution(&k, &s, rule.as_ref()).unwrap();
        let p = rule.target().lookup("P").unwrap();
        let both = dist.probability_that(|o| o.holds(p, &[1]) && o.holds(p, &[2]));
        assert_eq!(both, ratio(1, 4));
    }

    #[test]
    fn twoclass_pick_chooses_uniformly() {
        let k = kspec::builtin("equiv2").unwrap();
        let s = parse(&k, "universe: 1 2\nR 1 1\nR 2 2\n");
        let rule = builtin_rule("twoclass_pick").unwrap();
        let dist = exact_distribution(&k, &s, rule.as_ref()).unwrap();
        let p = rule.target().lookup("P").unwrap();
        let first = dist.probability_that(|o| o.holds(p, &[1]) && !o.holds(p, &[2]));
        let second = dist.probability_that(|o| !o.holds(p, &[1]) && o.holds(p, &[2]));
        assert_eq!(first, ratio(1, 2));
        assert_eq!(second, ratio(1, 2));
        let neither = dist.probability_that(|o| !o.holds(p, &[1]) && !o.holds(p, &[2]));
        assert_eq!(neither, ratio(0, 1));
    }

    #[test]
    fn constant_rule_is_point_mass() {
        let k = kspec::builtin("equiv").unwrap();
        let s = parse(&k, "universe: 1 2\nR 1 1\nR 2 2\n");
        let rule = builtin_rule("empty").unwrap();
        let dist = exact_distribution(&k, &s, rule.as_ref()).unwrap();
        assert_eq!(dist.outcomes.len(), 1);
        assert!(dist.outcomes[0].1.is_one());
    }

    #[test]
    fn missing_profile_is_an_error() {
        let k = kspec::builtin("equiv").unwrap();
        let s = parse(&k, "universe: 1\nR 1 1\n");
        let rule = builtin_rule("ap_array").unwrap();
        assert!(matches!(
            exact_distribution(&k, &s, rule.as_ref()),
            Err(SamplerError::MissingProfile)
        ));
    }

    #[test]
    fn exact_matches_monte_carlo_for_classcoin() {
        let k = kspec::builtin("equiv").unwrap();
        let s = parse(&k, "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n");
        let rule = builtin_rule("classcoin").unwrap();
        let dist = exact_distribution(&k, &s, rule.as_ref()).unwrap();
        let prepared = PreparedSampler::new(&k, &s, rule.as_ref()).unwrap();
        let n = 40_000u64;
        let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        for seed in 0..n {
            let out = prepared.sample(seed);
            *counts.entry(out.canonical_form()).or_insert(0) += 1;
        }
        for (o, p) in &dist.outcomes {
            let freq = *counts.get(&o.canonical_form()).unwrap_or(&0) as f64 / n as f64;
            let expect = crate::sampler::rational_to_f64(p);
            assert!(
                (freq - expect).abs() < 0.02,
                "outcome off: {freq} vs {expect}"
            );
        }
    }
}
