//! The canonical exchangeable process: deterministic type rules evaluated
//! atomic fact by atomic fact against blur-keyed randomness, orderings and
//! partition labelings.
//!
//! Rules are evaluated per atomic fact on `s = range(tuple)`, which makes
//! every rule family coherent by construction: the type of a set is
//! assembled from its facts.  Blur handles are anchored in the ambient
//! structure, so elements of one class share randomness across queries; the
//! rule itself only sees the restriction of the structure to the queried
//! tuple, the variates, orderings and restricted labelings.

mod exact;
mod prf;
mod rules;
mod verify;

pub use exact::{
    exact_distribution, exact_distribution_given_labeling, exact_tv, ExactDistribution,
    ExactOptions,
};
pub use prf::{bits_to_unit, siphash24, RandomnessSource};
pub use rules::{builtin_rule, class_coin_doubled_rule, label_pick_rule, BUILTIN_RULE_NAMES};
pub use verify::{
    check_eq_symmetry, check_exchangeability, EqSymMode, EqSymReport, ExchComparison, ExchReport,
    MonteCarloConfig,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use num_rational::BigRational;
use thiserror::Error;

use crate::classdef::{ClassError, ClassSpec, EqClassCount};
use crate::equiv::{blur_set, classes, Blur, ClassHandle};
use crate::relstruct::{tuples_over, Element, Signature, Structure, StructureError, SymbolId};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{rule}` does not fit this class: {reason}")]
    RuleMismatch { rule: String, reason: String },
    #[error("structure is not a member of the class")]
    NotAMember,
    #[error("exact mode requires a threshold profile")]
    MissingProfile,
    #[error("exact mode atom count {0} exceeds the cap {1}")]
    AtomCapExceeded(u64, u64),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// A variate value: a sampled 53-bit dyadic or an exact rational (used by
/// the exact distribution mode).  Comparisons against rational cut-points
/// are exact in both forms.
#[derive(Debug, Clone)]
pub enum Variate {
    Sampled(f64),
    Exact(BigRational),
}

impl Variate {
    pub fn le(&self, cut: &BigRational) -> bool {
        match self {
            Variate::Sampled(x) => &f64_to_rational(*x) <= cut,
            Variate::Exact(q) => q <= cut,
        }
    }

    pub fn approx(&self) -> f64 {
        match self {
            Variate::Sampled(x) => *x,
            Variate::Exact(q) => rational_to_f64(q),
        }
    }
}

/// Exact conversion of a sampled dyadic to a rational.
pub fn f64_to_rational(x: f64) -> BigRational {
    // Variates are k/2^53 with 0 <= k < 2^53, so this is exact.
    let scaled = (x * 9007199254740992.0).round() as i64;
    BigRational::new(scaled.into(), 9007199254740992i64.into())
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    q.to_f64().unwrap_or(0.0)
}

/// A rational in [0, 1] written `num/den`.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// Cut-points enabling exact distribution computation.  Rules promising a
/// profile must decide facts only through `RuleCtx::xi_le` comparisons at
/// these cut-points (plus labelings, orderings and the local structure).
#[derive(Debug, Clone)]
pub struct ThresholdProfile {
    pub cuts: Vec<BigRational>,
    pub uses_orderings: bool,
}

impl ThresholdProfile {
    pub fn at_half() -> Self {
        ThresholdProfile {
            cuts: vec![ratio(1, 2)],
            uses_orderings: false,
        }
    }

    pub fn constant() -> Self {
        ThresholdProfile {
            cuts: Vec::new(),
            uses_orderings: false,
        }
    }
}

/// Everything a rule may read when deciding one atomic fact.
pub struct RuleCtx<'a> {
    pub spec: &'a ClassSpec,
    /// Symbol of the rule's target signature being decided.
    pub symbol: SymbolId,
    pub tuple: &'a [Element],
    /// The restriction of the sampled-over structure to `range(tuple)`.
    pub local: &'a Structure,
    /// Blurs of `range(tuple)` with ambient anchors, sorted canonically.
    pub blurs: &'a [Blur],
    /// Variates aligned with `blurs`.
    pub variates: &'a [Variate],
    /// Orderings (handle permutations) aligned with `blurs`.
    pub orderings: &'a [Vec<ClassHandle>],
    /// Restricted labelings of the finite-count declarations: per
    /// declaration index, domain tuple -> label.
    pub labelings: &'a BTreeMap<usize, BTreeMap<Vec<Element>, u32>>,
    /// Ambient class handles for the local elements: (declaration, element)
    /// -> handle.
    pub handles: &'a BTreeMap<(usize, Element), ClassHandle>,
}

impl<'a> RuleCtx<'a> {
    pub fn xi(&self, blur: &Blur) -> Option<&Variate> {
        self.blurs
            .iter()
            .position(|b| b == blur)
            .map(|i| &self.variates[i])
    }

    /// Compare a blur's variate against `num/den`; absent blurs compare
    /// false.
    pub fn xi_le(&self, blur: &Blur, num: i64, den: i64) -> bool {
        self.xi(blur).is_some_and(|v| v.le(&ratio(num, den)))
    }

    /// The singleton blur of `x`'s class under declaration `r`, with the
    /// ambient anchor.
    pub fn class_blur(&self, r: usize, x: Element) -> Option<Blur> {
        self.handles
            .get(&(r, x))
            .map(|h| Blur::singleton(*h))
    }

    /// The singleton blur of the identity handle of `x`.
    pub fn identity_blur(&self, x: Element) -> Blur {
        Blur::singleton(ClassHandle::identity(x))
    }

    pub fn empty_blur(&self) -> Blur {
        Blur::empty()
    }

    /// Label of `x⃗`'s class under finite-count declaration `r`.
    pub fn label(&self, r: usize, tuple: &[Element]) -> Option<u32> {
        self.labelings.get(&r)?.get(tuple).copied()
    }
}

/// A deterministic map from (restricted structure, blur-indexed variates,
/// blur orderings, restricted labelings) to one atomic fact.
pub trait TypeRule: Send + Sync {
    fn name(&self) -> &str;
    /// The output signature.
    fn target(&self) -> &Arc<Signature>;
    /// Check the rule fits the class it will be run over.
    fn validate(&self, spec: &ClassSpec) -> Result<(), SamplerError> {
        let _ = spec;
        Ok(())
    }
    fn decide(&self, ctx: &RuleCtx) -> bool;
    /// Cut-points for exact mode, when the rule supports it.
    fn profile(&self) -> Option<ThresholdProfile> {
        None
    }
}

/// One atomic query of the sampling plan.
struct PreparedQuery {
    symbol: SymbolId,
    tuple: Vec<Element>,
    local: Structure,
    blurs: Vec<Blur>,
    keys: Vec<Vec<u8>>,
    handles: BTreeMap<(usize, Element), ClassHandle>,
    /// Domain tuples of each finite declaration within the local universe.
    local_domains: Vec<(usize, Vec<Vec<Element>>)>,
}

/// A finite-count declaration prepared for labeling draws.
struct PreparedFiniteRel {
    rel: usize,
    blocks: Vec<Vec<Vec<Element>>>,
    label_count: u32,
    key: Vec<u8>,
}

/// A sampling plan for one (class, structure, rule) triple: everything
/// seed-independent is precomputed, so repeated draws are cheap.
pub struct PreparedSampler<'a> {
    pub spec: &'a ClassSpec,
    pub structure: &'a Structure,
    rule: &'a dyn TypeRule,
    queries: Vec<PreparedQuery>,
    finite_rels: Vec<PreparedFiniteRel>,
}

impl<'a> PreparedSampler<'a> {
    pub fn new(
        spec: &'a ClassSpec,
        structure: &'a Structure,
        rule: &'a dyn TypeRule,
    ) -> Result<Self, SamplerError> {
        if !spec.contains(structure)? {
            return Err(SamplerError::NotAMember);
        }
        rule.validate(spec)?;
        let mut queries = Vec::new();
        for (symbol, _, arity) in rule.target().symbols() {
            for tuple in tuples_over(structure.universe(), arity) {
                let mut range: Vec<Element> = tuple.clone();
                range.sort_unstable();
                range.dedup();
                let local = structure.restrict(&range)?;
                let blurs = blur_set(spec, structure, &range, true);
                let keys = blurs.iter().map(|b| b.canonical_key()).collect();
                let mut handles = BTreeMap::new();
                for (r, decl) in spec.eqrels.iter().enumerate() {
                    if decl.length != 1 {
                        continue;
                    }
                    for &x in &range {
                        if crate::equiv::in_domain(spec, r, structure, x) {
                            handles.insert(
                                (r, x),
                                ClassHandle::of_class(spec, r, structure, x),
                            );
                        }
                    }
                }
                let mut local_domains = Vec::new();
                for (r, decl) in spec.eqrels.iter().enumerate() {
                    if decl.count == EqClassCount::Infinite {
                        continue;
                    }
                    local_domains.push((r, spec.domain_tuples(r, &local)));
                }
                queries.push(PreparedQuery {
                    symbol,
                    tuple,
                    local,
                    blurs,
                    keys,
                    handles,
                    local_domains,
                });
            }
        }
        let mut finite_rels = Vec::new();
        for (r, decl) in spec.eqrels.iter().enumerate() {
            let EqClassCount::Finite(c) = decl.count else {
                continue;
            };
            let blocks = classes(spec, r, structure)?;
            // Key the joint labeling by the full class roster so it is
            // stable exactly when the roster (least representatives) is.
            let mut key = format!("lab:{r}:").into_bytes();
            for b in &blocks {
                for x in &b[0] {
                    key.extend_from_slice(&x.to_be_bytes());
                }
                key.push(b';');
            }
            finite_rels.push(PreparedFiniteRel {
                rel: r,
                blocks,
                label_count: c,
                key,
            });
        }
        Ok(PreparedSampler {
            spec,
            structure,
            rule,
            queries,
            finite_rels,
        })
    }

    pub fn target(&self) -> &Arc<Signature> {
        self.rule.target()
    }

    /// Draw the full labelings for a seed: per finite declaration, domain
    /// tuple -> label.
    pub fn draw_labelings(&self, seed: u64) -> BTreeMap<usize, BTreeMap<Vec<Element>, u32>> {
        let rs = RandomnessSource::new(seed);
        let mut out = BTreeMap::new();
        for fr in &self.finite_rels {
            let labels = rs.injective_labels(&fr.key, fr.blocks.len(), fr.label_count);
            let mut map = BTreeMap::new();
            for (b, block) in fr.blocks.iter().enumerate() {
                for tuple in block {
                    map.insert(tuple.clone(), labels[b]);
                }
            }
            out.insert(fr.rel, map);
        }
        out
    }

    /// Sample the output structure for a seed.
    pub fn sample(&self, seed: u64) -> Structure {
        self.sample_with_labelings(seed, &self.draw_labelings(seed))
    }

    /// Sample with externally fixed labelings (the eq-symmetry verifier
    /// conditions on them).
    pub fn sample_with_labelings(
        &self,
        seed: u64,
        labelings: &BTreeMap<usize, BTreeMap<Vec<Element>, u32>>,
    ) -> Structure {
        let rs = RandomnessSource::new(seed);
        let mut facts: Vec<(SymbolId, Vec<Element>)> = Vec::new();
        for q in &self.queries {
            let mut variates = Vec::with_capacity(q.blurs.len());
            let mut orderings = Vec::with_capacity(q.blurs.len());
            for (b, key) in q.blurs.iter().zip(q.keys.iter()) {
                let mut xi_key = Vec::with_capacity(key.len() + 3);
                xi_key.extend_from_slice(b"xi:");
                xi_key.extend_from_slice(key);
                variates.push(Variate::Sampled(rs.uniform(&xi_key)));
                let mut ord_key = Vec::with_capacity(key.len() + 4);
                ord_key.extend_from_slice(b"ord:");
                ord_key.extend_from_slice(key);
                let perm = rs.permutation(&ord_key, b.len());
                orderings.push(perm.into_iter().map(|i| b.0[i]).collect());
            }
            let local_labelings = restrict_labelings(labelings, &q.local_domains);
            let ctx = RuleCtx {
                spec: self.spec,
                symbol: q.symbol,
                tuple: &q.tuple,
                local: &q.local,
                blurs: &q.blurs,
                variates: &variates,
                orderings: &orderings,
                labelings: &local_labelings,
                handles: &q.handles,
            };
            if self.rule.decide(&ctx) {
                facts.push((q.symbol, q.tuple.clone()));
            }
        }
        Structure::new(
            Arc::clone(self.rule.target()),
            self.structure.universe().to_vec(),
            facts,
        )
        .expect("queried tuples lie in the universe")
    }
}

pub(crate) fn restrict_labelings(
    ambient: &BTreeMap<usize, BTreeMap<Vec<Element>, u32>>,
    local_domains: &[(usize, Vec<Vec<Element>>)],
) -> BTreeMap<usize, BTreeMap<Vec<Element>, u32>> {
    let mut out = BTreeMap::new();
    for (r, domain) in local_domains {
        let Some(full) = ambient.get(r) else {
            continue;
        };
        let mut map = BTreeMap::new();
        for tuple in domain {
            if let Some(&l) = full.get(tuple) {
                map.insert(tuple.clone(), l);
            }
        }
        out.insert(*r, map);
    }
    out
}

/// Sample the canonical process over a structure: the output universe is
/// the input universe, every atomic fact decided by the rule.
pub fn sample_structure(
    spec: &ClassSpec,
    structure: &Structure,
    rule: &dyn TypeRule,
    seed: u64,
) -> Result<Structure, SamplerError> {
    Ok(PreparedSampler::new(spec, structure, rule)?.sample(seed))
}

/// The marginal on `s`: the quantifier-free type of `s` in the sampled
/// structure.  Consistent with `sample_structure` by construction.
pub fn sample_marginal(
    spec: &ClassSpec,
    structure: &Structure,
    rule: &dyn TypeRule,
    seed: u64,
    s: &[Element],
) -> Result<crate::relstruct::QfType, SamplerError> {
    let sampled = sample_structure(spec, structure, rule, seed)?;
    Ok(sampled.qf_type(s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspec;

    fn two_class_structure(spec: &ClassSpec) -> Structure {
        Structure::parse(
            Arc::clone(&spec.sig),
            "universe: 1 2 3 4\nR 1 1\nR 2 2\nR 3 3\nR 4 4\nR 1 2\nR 2 1\nR 3 4\nR 4 3\n",
        )
        .unwrap()
    }

    #[test]
    fn classcoin_constant_on_classes() {
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("classcoin").unwrap();
        for seed in 0..50 {
            let out = sample_structure(&k, &s, rule.as_ref(), seed).unwrap();
            let p = out.sig().lookup("P").unwrap();
            assert_eq!(out.holds(p, &[1]), out.holds(p, &[2]), "seed {seed}");
            assert_eq!(out.holds(p, &[3]), out.holds(p, &[4]), "seed {seed}");
        }
    }

    #[test]
    fn classcoin_classes_independent_across_seeds() {
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("classcoin").unwrap();
        let mut differs = false;
        for seed in 0..100 {
            let out = sample_structure(&k, &s, rule.as_ref(), seed).unwrap();
            let p = out.sig().lookup("P").unwrap();
            if out.holds(p, &[1]) != out.holds(p, &[3]) {
                differs = true;
            }
        }
        assert!(differs, "the two classes never took different values");
    }

    #[test]
    fn sampling_is_deterministic() {
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("classcoin").unwrap();
        let a = sample_structure(&k, &s, rule.as_ref(), 12345).unwrap();
        let b = sample_structure(&k, &s, rule.as_ref(), 12345).unwrap();
        assert_eq!(a.canonical_form(), b.canonical_form());
    }

    #[test]
    fn constant_rule_gives_empty_relations() {
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("empty").unwrap();
        let out = sample_structure(&k, &s, rule.as_ref(), 7).unwrap();
        assert_eq!(out.fact_count(), 0);
    }

    #[test]
    fn twoclass_pick_puts_exactly_one_class_in() {
        let k = kspec::builtin("equiv2").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("twoclass_pick").unwrap();
        for seed in 0..50 {
            let out = sample_structure(&k, &s, rule.as_ref(), seed).unwrap();
            let p = out.sig().lookup("P").unwrap();
            let class1 = out.holds(p, &[1]);
            assert_eq!(out.holds(p, &[2]), class1);
            let class2 = out.holds(p, &[3]);
            assert_eq!(out.holds(p, &[4]), class2);
            assert_ne!(class1, class2, "exactly one class picked, seed {seed}");
        }
    }

    #[test]
    fn classcoin_marginal_frequencies_near_half() {
        // A class is all-in or all-out, each about half the time.
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("classcoin").unwrap();
        let prepared = PreparedSampler::new(&k, &s, rule.as_ref()).unwrap();
        let p = rule.target().lookup("P").unwrap();
        let n = 20_000u64;
        let mut all_in = 0u64;
        for seed in 0..n {
            let out = prepared.sample(seed);
            match (out.holds(p, &[1]), out.holds(p, &[2])) {
                (true, true) => all_in += 1,
                (false, false) => {}
                _ => panic!("class split at seed {seed}"),
            }
        }
        let freq = all_in as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "freq = {freq}");
    }

    #[test]
    fn marginal_of_empty_set_is_empty() {
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("classcoin").unwrap();
        let t = sample_marginal(&k, &s, rule.as_ref(), 3, &[]).unwrap();
        assert!(t.facts.is_empty());
    }

    #[test]
    fn restriction_coherence_with_preserved_anchors() {
        // Restricting to {1, 3} keeps both class anchors (1 and 3), so
        // sampling commutes with restriction at equal seeds.
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("classcoin").unwrap();
        let restricted = s.restrict(&[1, 3]).unwrap();
        for seed in 0..30 {
            let big = sample_structure(&k, &s, rule.as_ref(), seed).unwrap();
            let small = sample_structure(&k, &restricted, rule.as_ref(), seed).unwrap();
            assert_eq!(
                big.restrict(&[1, 3]).unwrap().canonical_form(),
                small.canonical_form(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn marginal_commutes_with_restriction_at_same_seed() {
        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = builtin_rule("classcoin").unwrap();
        let restricted = s.restrict(&[1, 3]).unwrap();
        let a = sample_marginal(&k, &s, rule.as_ref(), 99, &[1, 3]).unwrap();
        let b = sample_marginal(&k, &restricted, rule.as_ref(), 99, &[1, 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn orderings_drive_asymmetric_facts() {
        // Decide the direction of a pair through the uniform ordering of
        // its identity-handle blur: exactly one of Q(x,y), Q(y,x) holds.
        struct OrientByOrdering;
        impl TypeRule for OrientByOrdering {
            fn name(&self) -> &str {
                "orient"
            }
            fn target(&self) -> &Arc<Signature> {
                static SIG: std::sync::OnceLock<Arc<Signature>> = std::sync::OnceLock::new();
                SIG.get_or_init(|| Arc::new(Signature::new(vec![("Q".into(), 2)]).unwrap()))
            }
            fn decide(&self, ctx: &RuleCtx) -> bool {
                let (x, y) = (ctx.tuple[0], ctx.tuple[1]);
                if x == y {
                    return false;
                }
                let blur = crate::equiv::Blur::from_handles(vec![
                    ClassHandle::identity(x),
                    ClassHandle::identity(y),
                ]);
                let Some(i) = ctx.blurs.iter().position(|b| *b == blur) else {
                    return false;
                };
                ctx.orderings[i][0] == ClassHandle::identity(x)
            }
        }

        let k = kspec::builtin("equiv").unwrap();
        let s = two_class_structure(&k);
        let rule = OrientByOrdering;
        let q = 0;
        let mut forward = 0u32;
        for seed in 0..200 {
            let out = sample_structure(&k, &s, &rule, seed).unwrap();
            for &x in s.universe() {
                for &y in s.universe() {
                    if x < y {
                        assert_ne!(
                            out.holds(q, &[x, y]),
                            out.holds(q, &[y, x]),
                            "exactly one direction, seed {seed}"
                        );
                    }
                }
            }
            if out.holds(q, &[1, 2]) {
                forward += 1;
            }
        }
        // Both directions occur.
        assert!(forward > 50 && forward < 150, "forward = {forward}");
    }

    #[test]
    fn rejects_non_member_structures() {
        let k = kspec::builtin("equiv").unwrap();
        let bad = Structure::parse(Arc::clone(&k.sig), "universe: 1 2\nR 1 2\n").unwrap();
        let rule = builtin_rule("classcoin").unwrap();
        assert!(matches!(
            sample_structure(&k, &bad, rule.as_ref(), 0),
            Err(SamplerError::NotAMember)
        ));
    }

    #[test]
    fn unknown_rule_name_errors() {
        assert!(matches!(
            builtin_rule("no_such_rule"),
            Err(SamplerError::UnknownRule(_))
        ));
    }
}
