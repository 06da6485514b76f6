//! Statistical verifiers: eq-symmetry (distribution independent of the
//! partition-labeling variables) and K-exchangeability (distribution
//! invariant under pullback along embeddings between class members).

use rayon::prelude::*;
use serde::Serialize;

use super::exact::{exact_distribution, exact_distribution_given_labeling, exact_tv, labeling_combos};
use super::{PreparedSampler, RandomnessSource, SamplerError, TypeRule};
use crate::classdef::ClassSpec;
use crate::relstruct::Structure;
use crate::stats::{verdict, EmpiricalDist};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonteCarloConfig {
    pub samples: u64,
    pub tv_threshold: f64,
    pub p_threshold: f64,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            samples: 100_000,
            tv_threshold: 0.02,
            p_threshold: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum EqSymMode {
    Exact,
    MonteCarlo(MonteCarloConfig),
}

#[derive(Debug, Clone, Serialize)]
pub struct EqSymReport {
    pub pass: bool,
    /// True when the class has no finite-count declarations to condition on.
    pub vacuous: bool,
    pub mode: String,
    pub labelings_checked: usize,
    pub max_tv: f64,
    /// Exact mode only: the worst total variation as an exact rational.
    pub max_tv_exact: Option<String>,
    /// Monte Carlo mode only: the smallest homogeneity p-value.
    pub min_p: Option<f64>,
}

/// Compare the conditional output distribution (given each labeling) with
/// the unconditional one.
pub fn check_eq_symmetry(
    spec: &ClassSpec,
    structure: &Structure,
    rule: &dyn TypeRule,
    mode: EqSymMode,
) -> Result<EqSymReport, SamplerError> {
    let prepared = PreparedSampler::new(spec, structure, rule)?;
    let combos = labeling_combos(&prepared);
    if prepared.finite_rels.is_empty() {
        return Ok(EqSymReport {
            pass: true,
            vacuous: true,
            mode: mode_name(&mode),
            labelings_checked: 0,
            max_tv: 0.0,
            max_tv_exact: None,
            min_p: None,
        });
    }
    match mode {
        EqSymMode::Exact => {
            let unconditional = exact_distribution(spec, structure, rule)?;
            let mut max_tv = num_rational::BigRational::from_integer(0.into());
            for labeling in &combos {
                let conditional =
                    exact_distribution_given_labeling(spec, structure, rule, labeling)?;
                let tv = exact_tv(&conditional, &unconditional);
                if tv > max_tv {
                    max_tv = tv;
                }
            }
            let zero = num_rational::BigRational::from_integer(0.into());
            Ok(EqSymReport {
                pass: max_tv == zero,
                vacuous: false,
                mode: "exact".into(),
                labelings_checked: combos.len(),
                max_tv: super::rational_to_f64(&max_tv),
                max_tv_exact: Some(max_tv.to_string()),
                min_p: None,
            })
        }
        EqSymMode::MonteCarlo(cfg) => {
            let rs = RandomnessSource::new(cfg.seed);
            let unconditional = empirical(&prepared, &rs, b"eqsym:uncond", cfg.samples, None);
            let mut max_tv = 0.0f64;
            let mut min_p = 1.0f64;
            let mut pass = true;
            for (i, labeling) in combos.iter().enumerate() {
                let key = format!("eqsym:cond:{i}").into_bytes();
                let conditional =
                    empirical(&prepared, &rs, &key, cfg.samples, Some(labeling));
                let v = verdict(
                    &conditional,
                    &unconditional,
                    cfg.tv_threshold,
                    cfg.p_threshold,
                )
                .expect("nonempty distributions");
                max_tv = max_tv.max(v.tv);
                min_p = min_p.min(v.p_value);
                pass &= v.pass;
            }
            Ok(EqSymReport {
                pass,
                vacuous: false,
                mode: "montecarlo".into(),
                labelings_checked: combos.len(),
                max_tv,
                max_tv_exact: None,
                min_p: Some(min_p),
            })
        }
    }
}

fn mode_name(mode: &EqSymMode) -> String {
    match mode {
        EqSymMode::Exact => "exact".into(),
        EqSymMode::MonteCarlo(_) => "montecarlo".into(),
    }
}

type Labeling = std::collections::BTreeMap<usize, std::collections::BTreeMap<Vec<u32>, u32>>;

fn empirical(
    prepared: &PreparedSampler,
    rs: &RandomnessSource,
    key: &[u8],
    samples: u64,
    labeling: Option<&Labeling>,
) -> EmpiricalDist {
    (0..samples)
        .into_par_iter()
        .fold(EmpiricalDist::new, |mut acc, j| {
            let seed = rs.raw_at(key, j);
            let out = match labeling {
                Some(l) => prepared.sample_with_labelings(seed, l),
                None => prepared.sample(seed),
            };
            acc.record(out.canonical_form());
            acc
        })
        .reduce(EmpiricalDist::new, |mut a, b| {
            a.merge(&b);
            a
        })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchComparison {
    pub small: String,
    pub big: String,
    pub embedding: Vec<(u32, u32)>,
    pub tv: f64,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExchReport {
    pub pass: bool,
    pub worst_tv: f64,
    pub min_p: f64,
    pub comparisons: Vec<ExchComparison>,
    pub members: usize,
    pub samples: u64,
}

/// For all members `S`, `T` up to size `n` (one per isomorphism class) and
/// all embeddings `π : S → T`, compare the empirical distribution of the
/// pullback of samples over `T` against samples over `S`, with fresh seeds
/// per draw on both sides.
pub fn check_exchangeability(
    spec: &ClassSpec,
    rule: &dyn TypeRule,
    n: usize,
    cfg: MonteCarloConfig,
) -> Result<ExchReport, SamplerError> {
    let rs = RandomnessSource::new(cfg.seed);
    let mut members: Vec<Structure> = Vec::new();
    for m in 1..=n {
        members.extend(spec.enumerate_up_to_iso(m)?);
    }
    let prepared: Vec<PreparedSampler> = members
        .iter()
        .map(|s| PreparedSampler::new(spec, s, rule))
        .collect::<Result<_, _>>()?;

    // Base distributions: fresh sample streams per member.
    let base: Vec<EmpiricalDist> = prepared
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let key = format!("exch:base:{i}").into_bytes();
            empirical(p, &rs, &key, cfg.samples, None)
        })
        .collect();

    let mut comparisons = Vec::new();
    let mut worst_tv = 0.0f64;
    let mut min_p = 1.0f64;
    let mut pass = true;
    for (ti, big) in members.iter().enumerate() {
        for (si, small) in members.iter().enumerate() {
            if small.size() > big.size() {
                continue;
            }
            for (pi, phi) in big.embeddings_from(small).into_iter().enumerate() {
                let key = format!("exch:pull:{ti}:{si}:{pi}").into_bytes();
                let pulled: EmpiricalDist = (0..cfg.samples)
                    .into_par_iter()
                    .fold(EmpiricalDist::new, |mut acc, j| {
                        let seed = rs.raw_at(&key, j);
                        let out = prepared[ti].sample(seed);
                        let back = out.pullback(&phi).expect("embedding into universe");
                        acc.record(back.canonical_form());
                        acc
                    })
                    .reduce(EmpiricalDist::new, |mut a, b| {
                        a.merge(&b);
                        a
                    });
                let v = verdict(&pulled, &base[si], cfg.tv_threshold, cfg.p_threshold)
                    .expect("nonempty distributions");
                worst_tv = worst_tv.max(v.tv);
                min_p = min_p.min(v.p_value);
                pass &= v.pass;
                comparisons.push(ExchComparison {
                    small: small.to_text(),
                    big: big.to_text(),
                    embedding: phi.iter().map(|(&a, &b)| (a, b)).collect(),
                    tv: v.tv,
                    p_value: v.p_value,
                    pass: v.pass,
                });
            }
        }
    }
    Ok(ExchReport {
        pass,
        worst_tv,
        min_p,
        comparisons,
        members: members.len(),
        samples: cfg.samples,
    })
}
