//! Finite-count elimination: the classes of the last declaration become
//! labeling predicates, one per label, constrained to carve out exactly an
//! injective class labeling.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::EliminateError;
use crate::classdef::{ClassSpec, Constraint, DomainRef, EqClassCount, Formula, StarRef};
use crate::equiv::classes;
use crate::relstruct::{Element, Signature, Structure, SymbolId};
use crate::sampler::{RuleCtx, SamplerError, ThresholdProfile, TypeRule};

/// The finite expansion of a class at its last declaration.
#[derive(Debug, Clone)]
pub struct FinExpansion {
    pub base: ClassSpec,
    /// Index of the eliminated declaration (the last one).
    pub d: usize,
    pub count: u32,
    pub expanded: ClassSpec,
    /// Label symbols in the expanded signature, index `i` holding label
    /// `i + 1`.
    pub label_symbols: Vec<SymbolId>,
}

/// Build the expanded class: base symbols plus `count` fresh label symbols
/// of the declaration's arity, with constraints making the labels an
/// injective class labeling.
pub fn class_fin(base: &ClassSpec, d: usize) -> Result<FinExpansion, EliminateError> {
    if d + 1 != base.eqrels.len() {
        return Err(EliminateError::NotLastDeclaration(
            base.eqrels[d].id.clone(),
        ));
    }
    let decl = base.eqrels[d].clone();
    let EqClassCount::Finite(count) = decl.count else {
        return Err(EliminateError::WrongCount(decl.id.clone()));
    };
    let k = decl.length;

    let mut symbols: Vec<(String, usize)> = base
        .sig
        .symbols()
        .map(|(_, name, arity)| (name.to_string(), arity))
        .collect();
    let mut label_symbols = Vec::with_capacity(count as usize);
    for i in 1..=count {
        let name = format!("P_{}_{i}", decl.id);
        if base.sig.lookup(&name).is_some() {
            return Err(EliminateError::SymbolCollision(name));
        }
        label_symbols.push(symbols.len());
        symbols.push((name, k));
    }
    let sig = Arc::new(Signature::new(symbols).expect("validated symbols"));

    let mut constraints = base.constraints.clone();
    let xs: Vec<usize> = (0..k).collect();
    let ys: Vec<usize> = (k..2 * k).collect();
    let var_names_x: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
    let var_names_xy: Vec<String> = (0..2 * k).map(|i| format!("x{i}")).collect();
    let guard_x = domain_guard(&decl.domain, &xs);
    let guard_y = domain_guard(&decl.domain, &ys);
    let rel_xy = Formula::Atom(decl.relation, xs.iter().chain(ys.iter()).copied().collect());

    // Every domain tuple carries exactly one label.
    let mut any_label = Formula::False;
    for &p in &label_symbols {
        any_label = Formula::Or(Box::new(any_label), Box::new(Formula::Atom(p, xs.clone())));
    }
    constraints.push(Constraint {
        var_names: var_names_x.clone(),
        body: Formula::Implies(Box::new(guard_x.clone()), Box::new(any_label)),
    });
    for (i, &p) in label_symbols.iter().enumerate() {
        // Labels live on the domain.
        constraints.push(Constraint {
            var_names: var_names_x.clone(),
            body: Formula::Implies(
                Box::new(Formula::Atom(p, xs.clone())),
                Box::new(guard_x.clone()),
            ),
        });
        for &q in &label_symbols[i + 1..] {
            constraints.push(Constraint {
                var_names: var_names_x.clone(),
                body: Formula::Not(Box::new(Formula::And(
                    Box::new(Formula::Atom(p, xs.clone())),
                    Box::new(Formula::Atom(q, xs.clone())),
                ))),
            });
        }
        // Constant on classes, and distinct classes get distinct labels.
        constraints.push(Constraint {
            var_names: var_names_xy.clone(),
            body: Formula::Implies(
                Box::new(Formula::And(
                    Box::new(Formula::Atom(p, xs.clone())),
                    Box::new(rel_xy.clone()),
                )),
                Box::new(Formula::Atom(p, ys.clone())),
            ),
        });
        constraints.push(Constraint {
            var_names: var_names_xy.clone(),
            body: Formula::Implies(
                Box::new(Formula::And(
                    Box::new(Formula::And(Box::new(guard_x.clone()), Box::new(guard_y.clone()))),
                    Box::new(Formula::And(
                        Box::new(Formula::Atom(p, xs.clone())),
                        Box::new(Formula::Atom(p, ys.clone())),
                    )),
                )),
                Box::new(rel_xy.clone()),
            ),
        });
    }

    let mut expanded = ClassSpec::new(sig, constraints, base.eqrels[..d].to_vec());
    expanded.kind = base.kind.clone();
    expanded.min_size = base.min_size;
    expanded.enumeration_cap = base.enumeration_cap;
    expanded.membership_cap = base.membership_cap;
    Ok(FinExpansion {
        base: base.clone(),
        d,
        count,
        expanded,
        label_symbols,
    })
}

fn domain_guard(domain: &DomainRef, vars: &[usize]) -> Formula {
    match domain {
        DomainRef::All => Formula::True,
        DomainRef::Symbol(v) => Formula::Atom(*v, vars.to_vec()),
    }
}

/// Extend a base member with the label predicates of a labeling.
pub fn expand_fin(
    exp: &FinExpansion,
    s: &Structure,
    labels: &BTreeMap<Vec<Element>, u32>,
) -> Result<Structure, EliminateError> {
    validate_labels(exp, s, labels)?;
    let mut facts: Vec<(SymbolId, Vec<Element>)> =
        s.facts().map(|(sym, t)| (sym, t.clone())).collect();
    for (tuple, &label) in labels {
        facts.push((exp.label_symbols[label as usize - 1], tuple.clone()));
    }
    Ok(Structure::new(
        Arc::clone(&exp.expanded.sig),
        s.universe().to_vec(),
        facts,
    )
    .expect("labels on universe tuples"))
}

fn validate_labels(
    exp: &FinExpansion,
    s: &Structure,
    labels: &BTreeMap<Vec<Element>, u32>,
) -> Result<(), EliminateError> {
    let dom = exp.base.domain_tuples(exp.d, s);
    if labels.len() != dom.len() || !dom.iter().all(|t| labels.contains_key(t)) {
        return Err(EliminateError::BadLabeling(
            "labeling must cover the domain exactly".into(),
        ));
    }
    for (tuple, &label) in labels {
        if label == 0 || label > exp.count {
            return Err(EliminateError::BadLabeling(format!(
                "label {label} outside 1..={}",
                exp.count
            )));
        }
        for (other, &other_label) in labels {
            let same_class = exp.base.related(exp.d, s, tuple, other);
            if same_class != (label == other_label) {
                return Err(EliminateError::BadLabeling(
                    "labels must separate classes exactly".into(),
                ));
            }
        }
    }
    Ok(())
}

/// Forget the label predicates.
pub fn reduct_fin(exp: &FinExpansion, s: &Structure) -> Structure {
    let facts = s
        .facts()
        .filter(|(sym, _)| *sym < exp.base.sig.len())
        .map(|(sym, t)| (sym, t.clone()));
    Structure::new(Arc::clone(&exp.base.sig), s.universe().to_vec(), facts)
        .expect("shared symbol prefix")
}

/// Read the labeling carried by an expanded member.
pub fn extract_labeling(exp: &FinExpansion, s: &Structure) -> BTreeMap<Vec<Element>, u32> {
    let mut out = BTreeMap::new();
    for (i, &p) in exp.label_symbols.iter().enumerate() {
        for tuple in s.tuples(p) {
            out.insert(tuple.clone(), i as u32 + 1);
        }
    }
    out
}

/// Permute the label predicates inside one star class: label `i` takes over
/// the tuples of label `π⁻¹(i)` within `class`, everything else unchanged.
pub fn permute_classes(
    exp: &FinExpansion,
    s: &Structure,
    perm: &[u32],
    class: &[Vec<Element>],
) -> Result<Structure, EliminateError> {
    if !is_star_class(exp, s, class) {
        return Err(EliminateError::NotAStarClass(format!("{class:?}")));
    }
    let inverse = |i: u32| -> u32 {
        perm.iter().position(|&x| x == i).map(|p| p as u32 + 1).unwrap_or(i)
    };
    let mut facts: Vec<(SymbolId, Vec<Element>)> = s
        .facts()
        .filter(|(sym, _)| !exp.label_symbols.contains(sym))
        .map(|(sym, t)| (sym, t.clone()))
        .collect();
    for (i, &p) in exp.label_symbols.iter().enumerate() {
        let label = i as u32 + 1;
        let source = exp.label_symbols[inverse(label) as usize - 1];
        for tuple in s.tuples(source) {
            if class.contains(tuple) {
                facts.push((p, tuple.clone()));
            }
        }
        for tuple in s.tuples(p) {
            if !class.contains(tuple) {
                facts.push((p, tuple.clone()));
            }
        }
    }
    Ok(
        Structure::new(Arc::clone(&exp.expanded.sig), s.universe().to_vec(), facts)
            .expect("permuted labels stay on the universe"),
    )
}

fn is_star_class(exp: &FinExpansion, s: &Structure, class: &[Vec<Element>]) -> bool {
    let star_blocks: Vec<Vec<Vec<Element>>> = match exp.base.eqrels[exp.d].star {
        StarRef::Trivial => {
            // One class: the whole domain, read through the expanded spec's
            // domain description (label predicates restored by reduct).
            let base_view = reduct_fin(exp, s);
            vec![exp.base.domain_tuples(exp.d, &base_view)]
        }
        StarRef::Earlier(q) => {
            let base_view = reduct_fin(exp, s);
            match classes(&exp.base, q, &base_view) {
                Ok(blocks) => blocks,
                Err(_) => return false,
            }
        }
    };
    let mut target = class.to_vec();
    target.sort();
    star_blocks.into_iter().any(|mut b| {
        b.sort();
        b == target
    })
}

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub checked_up_to: usize,
    pub violation: Option<(Structure, Vec<u32>)>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Verify that membership is closed under label permutations within every
/// star class, for all members up to size `n`.
pub fn check_symmetric_within(
    exp: &FinExpansion,
    n: usize,
) -> Result<SymmetryReport, EliminateError> {
    let star = match exp.base.eqrels[exp.d].star {
        StarRef::Trivial => GroupStar::Trivial,
        StarRef::Earlier(q) => GroupStar::Symbol(exp.base.eqrels[q].relation),
    };
    check_group_symmetry(
        &exp.expanded,
        &exp.label_symbols,
        star,
        exp.base.eqrels[exp.d].domain,
        n,
    )
}

/// The star region a predicate group is symmetric within: one class
/// covering the whole domain, or the classes of an equivalence carried by a
/// binary symbol.
#[derive(Debug, Clone, Copy)]
pub enum GroupStar {
    Trivial,
    Symbol(SymbolId),
}

/// Verify that membership is closed under permuting an arbitrary predicate
/// group within each star region; later elimination stages must preserve
/// the symmetry of the groups earlier stages introduced.
pub fn check_group_symmetry(
    spec: &ClassSpec,
    preds: &[SymbolId],
    star: GroupStar,
    domain: DomainRef,
    n: usize,
) -> Result<SymmetryReport, EliminateError> {
    let labels: Vec<u32> = (1..=preds.len() as u32).collect();
    let perms = crate::relstruct::permutations(&labels);
    for m in 0..=n {
        for member in spec.enumerate(m)? {
            let domain_tuples: Vec<Vec<Element>> = match domain {
                DomainRef::All => {
                    let arity = spec.sig.arity(preds[0]);
                    crate::relstruct::tuples_over(member.universe(), arity)
                }
                DomainRef::Symbol(v) => member.tuples(v).cloned().collect(),
            };
            let star_blocks: Vec<Vec<Vec<Element>>> = match star {
                GroupStar::Trivial => vec![domain_tuples.clone()],
                GroupStar::Symbol(sym) => equivalence_blocks(&member, sym, &domain_tuples),
            };
            for block in &star_blocks {
                for perm in &perms {
                    let permuted = permute_group(spec, &member, preds, perm, block);
                    if !spec.contains(&permuted)? {
                        return Ok(SymmetryReport {
                            checked_up_to: n,
                            violation: Some((member, perm.clone())),
                        });
                    }
                }
            }
        }
    }
    Ok(SymmetryReport {
        checked_up_to: n,
        violation: None,
    })
}

fn equivalence_blocks(
    s: &Structure,
    sym: SymbolId,
    domain: &[Vec<Element>],
) -> Vec<Vec<Vec<Element>>> {
    let related = |a: &[Element], b: &[Element]| -> bool {
        let mut pair = a.to_vec();
        pair.extend_from_slice(b);
        s.holds(sym, &pair)
    };
    let mut blocks: Vec<Vec<Vec<Element>>> = Vec::new();
    for tuple in domain {
        match blocks.iter_mut().find(|b| related(&b[0], tuple)) {
            Some(b) => b.push(tuple.clone()),
            None => blocks.push(vec![tuple.clone()]),
        }
    }
    blocks
}

/// Permute a predicate group within one region: predicate `i` takes over
/// the region tuples of predicate `π⁻¹(i)`, everything outside the region
/// unchanged.
pub fn permute_group(
    spec: &ClassSpec,
    s: &Structure,
    preds: &[SymbolId],
    perm: &[u32],
    region: &[Vec<Element>],
) -> Structure {
    let inverse = |i: u32| -> u32 {
        perm.iter()
            .position(|&x| x == i)
            .map(|p| p as u32 + 1)
            .unwrap_or(i)
    };
    let mut facts: Vec<(SymbolId, Vec<Element>)> = s
        .facts()
        .filter(|(sym, _)| !preds.contains(sym))
        .map(|(sym, t)| (sym, t.clone()))
        .collect();
    for (i, &p) in preds.iter().enumerate() {
        let label = i as u32 + 1;
        let source = preds[inverse(label) as usize - 1];
        for tuple in s.tuples(source) {
            if region.contains(tuple) {
                facts.push((p, tuple.clone()));
            }
        }
        for tuple in s.tuples(p) {
            if !region.contains(tuple) {
                facts.push((p, tuple.clone()));
            }
        }
    }
    Structure::new(Arc::clone(&spec.sig), s.universe().to_vec(), facts)
        .expect("permuted labels stay on the universe")
}

/// Lift a rule over the expanded class to one over the base class: the
/// labeling variable of the eliminated declaration is spent building the
/// expanded structure the inner rule reads.
pub fn lift_rule_fin(inner: Box<dyn TypeRule>, exp: FinExpansion) -> Box<dyn TypeRule> {
    Box::new(LiftedFinRule { inner, exp })
}

struct LiftedFinRule {
    inner: Box<dyn TypeRule>,
    exp: FinExpansion,
}

impl TypeRule for LiftedFinRule {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn target(&self) -> &Arc<Signature> {
        self.inner.target()
    }

    fn validate(&self, spec: &ClassSpec) -> Result<(), SamplerError> {
        if spec.eqrels.len() != self.exp.base.eqrels.len() {
            return Err(SamplerError::RuleMismatch {
                rule: self.inner.name().to_string(),
                reason: "lifted rule must run over its base class".into(),
            });
        }
        self.inner.validate(&self.exp.expanded)
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let d = self.exp.d;
        let empty = BTreeMap::new();
        let local_labels = ctx.labelings.get(&d).unwrap_or(&empty);
        let expanded_local = expand_fin(&self.exp, ctx.local, local_labels)
            .expect("restricted labelings stay valid");
        let mut inner_labelings = ctx.labelings.clone();
        inner_labelings.remove(&d);
        let inner_ctx = RuleCtx {
            spec: &self.exp.expanded,
            symbol: ctx.symbol,
            tuple: ctx.tuple,
            local: &expanded_local,
            blurs: ctx.blurs,
            variates: ctx.variates,
            orderings: ctx.orderings,
            labelings: &inner_labelings,
            handles: ctx.handles,
        };
        self.inner.decide(&inner_ctx)
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        self.inner.profile()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspec;

    fn equiv2_expansion() -> FinExpansion {
        class_fin(&kspec::builtin("equiv2").unwrap(), 0).unwrap()
    }

    fn two_class_member(exp: &FinExpansion) -> Structure {
        Structure::parse(
            Arc::clone(&exp.base.sig),
            "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n",
        )
        .unwrap()
    }

    fn labeling(pairs: &[(Element, u32)]) -> BTreeMap<Vec<Element>, u32> {
        pairs.iter().map(|&(x, l)| (vec![x], l)).collect()
    }

    #[test]
    fn expand_adds_partitioning_labels() {
        let exp = equiv2_expansion();
        let s = two_class_member(&exp);
        let labels = labeling(&[(1, 1), (2, 1), (3, 2)]);
        let expanded = expand_fin(&exp, &s, &labels).unwrap();
        assert!(exp.expanded.contains(&expanded).unwrap());
        let p1 = exp.label_symbols[0];
        let p2 = exp.label_symbols[1];
        assert!(expanded.holds(p1, &[1]) && expanded.holds(p1, &[2]));
        assert!(expanded.holds(p2, &[3]));
    }

    #[test]
    fn expand_rejects_class_splitting_labels() {
        let exp = equiv2_expansion();
        let s = two_class_member(&exp);
        let labels = labeling(&[(1, 1), (2, 2), (3, 2)]);
        assert!(expand_fin(&exp, &s, &labels).is_err());
    }

    #[test]
    fn reduct_inverts_expand() {
        let exp = equiv2_expansion();
        let s = two_class_member(&exp);
        let labels = labeling(&[(1, 2), (2, 2), (3, 1)]);
        let expanded = expand_fin(&exp, &s, &labels).unwrap();
        assert_eq!(reduct_fin(&exp, &expanded), s);
        assert_eq!(extract_labeling(&exp, &expanded), labels);
    }

    #[test]
    fn round_trip_on_empty_domain() {
        let exp = equiv2_expansion();
        let s = Structure::empty(Arc::clone(&exp.base.sig), vec![]);
        let expanded = expand_fin(&exp, &s, &BTreeMap::new()).unwrap();
        assert_eq!(reduct_fin(&exp, &expanded), s);
    }

    #[test]
    fn expanded_membership_rejects_label_overlap() {
        let exp = equiv2_expansion();
        let text = "universe: 1\nR 1 1\nP_r1_1 1\nP_r1_2 1\n";
        let s = Structure::parse(Arc::clone(&exp.expanded.sig), text).unwrap();
        assert!(!exp.expanded.contains(&s).unwrap());
    }

    #[test]
    fn expanded_membership_rejects_split_class() {
        let exp = equiv2_expansion();
        let text = "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\nP_r1_1 1\nP_r1_2 2\n";
        let s = Structure::parse(Arc::clone(&exp.expanded.sig), text).unwrap();
        assert!(!exp.expanded.contains(&s).unwrap());
    }

    #[test]
    fn expanded_class_passes_bounded_checks() {
        let exp = equiv2_expansion();
        assert!(exp.expanded.check_hereditary(3).unwrap().passed());
        assert!(exp.expanded.check_amalgamation(2).unwrap().passed());
    }

    #[test]
    fn members_of_expansion_are_expansions_of_members() {
        let exp = equiv2_expansion();
        for member in exp.expanded.enumerate(3).unwrap() {
            let base_view = reduct_fin(&exp, &member);
            assert!(exp.base.contains(&base_view).unwrap());
            let labels = extract_labeling(&exp, &member);
            let rebuilt = expand_fin(&exp, &base_view, &labels).unwrap();
            assert_eq!(rebuilt, member);
        }
    }

    #[test]
    fn permute_identity_is_identity() {
        let exp = equiv2_expansion();
        let s = two_class_member(&exp);
        let labels = labeling(&[(1, 1), (2, 1), (3, 2)]);
        let expanded = expand_fin(&exp, &s, &labels).unwrap();
        let class: Vec<Vec<Element>> = vec![vec![1], vec![2], vec![3]];
        let permuted = permute_classes(&exp, &expanded, &[1, 2], &class).unwrap();
        assert_eq!(permuted, expanded);
    }

    #[test]
    fn swap_is_an_involution() {
        let exp = equiv2_expansion();
        let s = two_class_member(&exp);
        let labels = labeling(&[(1, 1), (2, 1), (3, 2)]);
        let expanded = expand_fin(&exp, &s, &labels).unwrap();
        let class: Vec<Vec<Element>> = vec![vec![1], vec![2], vec![3]];
        let once = permute_classes(&exp, &expanded, &[2, 1], &class).unwrap();
        assert_ne!(once, expanded);
        let twice = permute_classes(&exp, &once, &[2, 1], &class).unwrap();
        assert_eq!(twice, expanded);
    }

    #[test]
    fn permute_rejects_non_star_class() {
        let exp = equiv2_expansion();
        let s = two_class_member(&exp);
        let labels = labeling(&[(1, 1), (2, 1), (3, 2)]);
        let expanded = expand_fin(&exp, &s, &labels).unwrap();
        let not_a_class: Vec<Vec<Element>> = vec![vec![1]];
        assert!(permute_classes(&exp, &expanded, &[2, 1], &not_a_class).is_err());
    }

    #[test]
    fn symmetry_within_star_classes_holds() {
        let exp = equiv2_expansion();
        let report = check_symmetric_within(&exp, 4).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn symmetry_detects_pinned_label() {
        // Forbid label 2 outright (it would contradict disjointness): a
        // member using label 1 leaves the class when the labels swap.
        let mut exp = equiv2_expansion();
        exp.expanded.constraints.push(Constraint {
            var_names: vec!["x".into()],
            body: Formula::Implies(
                Box::new(Formula::Atom(exp.label_symbols[1], vec![0])),
                Box::new(Formula::Atom(exp.label_symbols[0], vec![0])),
            ),
        });
        let report = check_symmetric_within(&exp, 2).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn lifted_rule_matches_direct_exact_distribution() {
        let exp = equiv2_expansion();
        let inner = crate::sampler::label_pick_rule(
            format!("P_{}_1", exp.base.eqrels[0].id),
            format!("P_{}_2", exp.base.eqrels[0].id),
        );
        let lifted = lift_rule_fin(inner, exp.clone());
        let direct = crate::sampler::builtin_rule("twoclass_pick").unwrap();
        let s = two_class_member(&exp);
        let lifted_dist =
            crate::sampler::exact_distribution(&exp.base, &s, lifted.as_ref()).unwrap();
        let direct_dist =
            crate::sampler::exact_distribution(&exp.base, &s, direct.as_ref()).unwrap();
        let tv = crate::sampler::exact_tv(&lifted_dist, &direct_dist);
        assert_eq!(tv, num_rational::BigRational::from_integer(0.into()));
    }

    #[test]
    fn lifted_conditional_matches_inner_on_expansion() {
        let exp = equiv2_expansion();
        let inner = crate::sampler::label_pick_rule(
            format!("P_{}_1", exp.base.eqrels[0].id),
            format!("P_{}_2", exp.base.eqrels[0].id),
        );
        let s = two_class_member(&exp);
        let labels = labeling(&[(1, 1), (2, 1), (3, 2)]);
        let expanded = expand_fin(&exp, &s, &labels).unwrap();
        let inner_dist =
            crate::sampler::exact_distribution(&exp.expanded, &expanded, inner.as_ref()).unwrap();
        let lifted = lift_rule_fin(
            crate::sampler::label_pick_rule(
                format!("P_{}_1", exp.base.eqrels[0].id),
                format!("P_{}_2", exp.base.eqrels[0].id),
            ),
            exp.clone(),
        );
        let mut fixed = BTreeMap::new();
        fixed.insert(0usize, labels.clone());
        let conditional = crate::sampler::exact_distribution_given_labeling(
            &exp.base,
            &s,
            lifted.as_ref(),
            &fixed,
        )
        .unwrap();
        let tv = crate::sampler::exact_tv(&inner_dist, &conditional);
        assert_eq!(tv, num_rational::BigRational::from_integer(0.into()));
    }

    #[test]
    fn constant_rule_lifts_to_constant_rule() {
        let exp = equiv2_expansion();
        let lifted = lift_rule_fin(crate::sampler::builtin_rule("empty").unwrap(), exp.clone());
        let s = two_class_member(&exp);
        let out = crate::sampler::sample_structure(&exp.base, &s, lifted.as_ref(), 5).unwrap();
        assert_eq!(out.fact_count(), 0);
    }
}
