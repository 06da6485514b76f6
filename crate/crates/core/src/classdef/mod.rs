//! Class specifications: a constraint language over a relational signature
//! plus declared equivalence relations with star-coarsenings and class
//! counts.  The same membership oracle serves bounded enumeration, amalgam
//! search and the elimination-transformed classes.

mod parse;

pub use parse::{parse_document, parse_spec, SpecDocument, SpecParseError, TransformDecl, TransformKind};

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::relstruct::{tuples_over, Element, Signature, Structure, SymbolId};
use crate::search::{ground_constraints, SearchProblem, Tv};

/// Default universe cap for bounded enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 6;
/// Default universe cap for membership checks.
pub const DEFAULT_MEMBERSHIP_CAP: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClassError {
    #[error("structure signature does not match the class signature")]
    SignatureMismatch,
    #[error("size {0} exceeds the configured cap {1}")]
    CapExceeded(usize, usize),
    #[error("relation `{0}` is not an equivalence on its domain in this structure")]
    NotAnEquivalence(String),
    #[error("unknown equivalence relation id `{0}`")]
    UnknownEqRel(String),
}

/// A propositional formula over atoms `R(v_i, …)` and equalities `v_i = v_j`
/// with variables quantified universally by the enclosing constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Atom(SymbolId, Vec<usize>),
    Eq(usize, usize),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    /// Two-valued evaluation under a total fact lookup.
    pub fn eval_bool(
        &self,
        vars: &[Element],
        lookup: &mut impl FnMut(SymbolId, &[Element]) -> bool,
    ) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Eq(i, j) => vars[*i] == vars[*j],
            Formula::Atom(sym, ixs) => {
                let tuple: Vec<Element> = ixs.iter().map(|&i| vars[i]).collect();
                lookup(*sym, &tuple)
            }
            Formula::Not(f) => !f.eval_bool(vars, lookup),
            Formula::And(a, b) => a.eval_bool(vars, lookup) && b.eval_bool(vars, lookup),
            Formula::Or(a, b) => a.eval_bool(vars, lookup) || b.eval_bool(vars, lookup),
            Formula::Implies(a, b) => !a.eval_bool(vars, lookup) || b.eval_bool(vars, lookup),
            Formula::Iff(a, b) => a.eval_bool(vars, lookup) == b.eval_bool(vars, lookup),
        }
    }

    /// Kleene three-valued evaluation under a partial fact lookup; used by
    /// the search engine to prune partial structures.
    pub fn eval_tv(
        &self,
        vars: &[Element],
        lookup: &mut impl FnMut(SymbolId, &[Element]) -> Tv,
    ) -> Tv {
        match self {
            Formula::True => Tv::True,
            Formula::False => Tv::False,
            Formula::Eq(i, j) => Tv::from(vars[*i] == vars[*j]),
            Formula::Atom(sym, ixs) => {
                let tuple: Vec<Element> = ixs.iter().map(|&i| vars[i]).collect();
                lookup(*sym, &tuple)
            }
            Formula::Not(f) => !f.eval_tv(vars, lookup),
            Formula::And(a, b) => a.eval_tv(vars, lookup).and(b.eval_tv(vars, lookup)),
            Formula::Or(a, b) => a.eval_tv(vars, lookup).or(b.eval_tv(vars, lookup)),
            Formula::Implies(a, b) => (!a.eval_tv(vars, lookup)).or(b.eval_tv(vars, lookup)),
            Formula::Iff(a, b) => a.eval_tv(vars, lookup).iff(b.eval_tv(vars, lookup)),
        }
    }

    /// The atoms mentioned by this formula under a fixed assignment.
    pub fn ground_atoms(&self, vars: &[Element], out: &mut Vec<(SymbolId, Vec<Element>)>) {
        match self {
            Formula::True | Formula::False | Formula::Eq(..) => {}
            Formula::Atom(sym, ixs) => {
                out.push((*sym, ixs.iter().map(|&i| vars[i]).collect()));
            }
            Formula::Not(f) => f.ground_atoms(vars, out),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Implies(a, b)
            | Formula::Iff(a, b) => {
                a.ground_atoms(vars, out);
                b.ground_atoms(vars, out);
            }
        }
    }
}

/// A universally quantified constraint over `var_names.len()` variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub var_names: Vec<String>,
    pub body: Formula,
}

impl Constraint {
    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }
}

/// Domain of a declared equivalence relation: all length-k tuples, or the
/// tuples of a domain symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainRef {
    All,
    Symbol(SymbolId),
}

/// Star-coarsening reference: the single-class relation on the domain, or an
/// earlier declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StarRef {
    Trivial,
    Earlier(usize),
}

/// Number of classes of a declared equivalence relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqClassCount {
    Finite(u32),
    Infinite,
}

impl fmt::Display for EqClassCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EqClassCount::Finite(c) => write!(f, "{c}"),
            EqClassCount::Infinite => write!(f, "inf"),
        }
    }
}

/// A declared equivalence relation: `relation` is a `2·length`-ary symbol
/// interpreted as an equivalence on the `length`-tuples of `domain`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqRelDecl {
    pub id: String,
    pub domain: DomainRef,
    pub relation: SymbolId,
    pub length: usize,
    pub star: StarRef,
    pub count: EqClassCount,
}

/// Extension hook for classes whose membership is not a plain constraint
/// check (the universe-doubling elimination produces these).
pub trait MembershipExt: Send + Sync + fmt::Debug {
    /// Full membership decision for a structure that already passed the
    /// spec's constraint set.
    fn contains(&self, spec: &ClassSpec, s: &Structure) -> bool;
    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Default)]
pub enum ClassKind {
    #[default]
    Constrained,
    Extended(Arc<dyn MembershipExt>),
}

/// A parsed and validated class specification.
#[derive(Debug, Clone)]
pub struct ClassSpec {
    pub sig: Arc<Signature>,
    pub constraints: Vec<Constraint>,
    pub eqrels: Vec<EqRelDecl>,
    pub kind: ClassKind,
    /// Minimum member size; nonzero only in deliberately non-hereditary
    /// test fixtures.
    pub min_size: usize,
    pub enumeration_cap: usize,
    pub membership_cap: usize,
}

impl ClassSpec {
    pub fn new(
        sig: Arc<Signature>,
        constraints: Vec<Constraint>,
        eqrels: Vec<EqRelDecl>,
    ) -> Self {
        ClassSpec {
            sig,
            constraints,
            eqrels,
            kind: ClassKind::Constrained,
            min_size: 0,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            membership_cap: DEFAULT_MEMBERSHIP_CAP,
        }
    }

    pub fn eqrel(&self, id: &str) -> Result<usize, ClassError> {
        self.eqrels
            .iter()
            .position(|d| d.id == id)
            .ok_or_else(|| ClassError::UnknownEqRel(id.to_string()))
    }

    /// The domain tuples `V_{r,S}` of a declared relation, sorted.
    pub fn domain_tuples(&self, r: usize, s: &Structure) -> Vec<Vec<Element>> {
        let decl = &self.eqrels[r];
        match decl.domain {
            DomainRef::All => tuples_over(s.universe(), decl.length),
            DomainRef::Symbol(v) => s.tuples(v).cloned().collect(),
        }
    }

    /// Does the pair `(x⃗, y⃗)` stand in the declared relation in `s`?
    pub fn related(&self, r: usize, s: &Structure, a: &[Element], b: &[Element]) -> bool {
        let mut pair = Vec::with_capacity(a.len() * 2);
        pair.extend_from_slice(a);
        pair.extend_from_slice(b);
        s.holds(self.eqrels[r].relation, &pair)
    }

    /// Is the declared relation an equivalence on its domain in `s`?
    pub fn is_equivalence_on_domain(&self, r: usize, s: &Structure) -> bool {
        let dom = self.domain_tuples(r, s);
        for a in &dom {
            if !self.related(r, s, a, a) {
                return false;
            }
        }
        for a in &dom {
            for b in &dom {
                if self.related(r, s, a, b) && !self.related(r, s, b, a) {
                    return false;
                }
            }
        }
        for a in &dom {
            for b in &dom {
                if !self.related(r, s, a, b) {
                    continue;
                }
                for c in &dom {
                    if self.related(r, s, b, c) && !self.related(r, s, a, c) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Constraint satisfaction only, without the equivalence-relation
    /// bookkeeping; used by the declaration validators.
    pub fn satisfies_constraints(&self, s: &Structure) -> bool {
        let universe = s.universe();
        for c in &self.constraints {
            let m = c.var_count();
            if universe.is_empty() && m > 0 {
                continue;
            }
            for assignment in tuples_over(universe, m) {
                let ok = c
                    .body
                    .eval_bool(&assignment, &mut |sym, tuple| s.holds(sym, tuple));
                if !ok {
                    return false;
                }
            }
        }
        true
    }

    /// Do the declared star-coarsenings nest in `s`?  Pointwise check:
    /// related under `~_r` implies related under its star.
    pub fn star_nesting_holds(&self, s: &Structure) -> bool {
        for (r, decl) in self.eqrels.iter().enumerate() {
            let StarRef::Earlier(q) = decl.star else {
                continue;
            };
            let dom = self.domain_tuples(r, s);
            for a in &dom {
                for b in &dom {
                    if self.related(r, s, a, b) && !self.related(q, s, a, b) {
                        return false;
                    }
                }
            }
        }
        true
    }

    fn finite_counts_hold(&self, s: &Structure) -> bool {
        for (r, decl) in self.eqrels.iter().enumerate() {
            let EqClassCount::Finite(c) = decl.count else {
                continue;
            };
            if !self.is_equivalence_on_domain(r, s) {
                return false;
            }
            match crate::equiv::classes(self, r, s) {
                Ok(blocks) => {
                    if blocks.len() > c as usize {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
        true
    }

    /// Age membership: constraints, finite class-count bounds and star
    /// nesting, plus the extension hook for transformed classes.
    pub fn contains(&self, s: &Structure) -> Result<bool, ClassError> {
        if **s.sig() != *self.sig {
            return Err(ClassError::SignatureMismatch);
        }
        // `min_size` mirrors a `forall x exists y ...` style size demand:
        // vacuous on the empty structure, binding on small nonempty ones.
        if s.size() > 0 && s.size() < self.min_size {
            return Ok(false);
        }
        if !self.satisfies_constraints(s) {
            return Ok(false);
        }
        if !self.finite_counts_hold(s) || !self.star_nesting_holds(s) {
            return Ok(false);
        }
        match &self.kind {
            ClassKind::Constrained => Ok(true),
            ClassKind::Extended(ext) => Ok(ext.contains(self, s)),
        }
    }

    /// All members with the given universe, sorted by canonical encoding.
    pub fn enumerate_on(&self, universe: &[Element]) -> Result<Vec<Structure>, ClassError> {
        if universe.len() > self.enumeration_cap {
            return Err(ClassError::CapExceeded(
                universe.len(),
                self.enumeration_cap,
            ));
        }
        let problem = SearchProblem::for_class(self, universe.to_vec(), Vec::new());
        let mut out = problem.all_solutions();
        out.sort_by_key(|s| s.canonical_form());
        Ok(out)
    }

    /// All members with universe `{1, …, n}` (labeled), in canonical order.
    pub fn enumerate(&self, n: usize) -> Result<Vec<Structure>, ClassError> {
        let universe: Vec<Element> = (1..=n as Element).collect();
        self.enumerate_on(&universe)
    }

    /// Members with universe `{1, …, n}` up to isomorphism: the canonical
    /// (least labeled encoding) representative of each class.
    pub fn enumerate_up_to_iso(&self, n: usize) -> Result<Vec<Structure>, ClassError> {
        let all = self.enumerate(n)?;
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for s in all {
            if seen.insert(s.iso_canonical_form()) {
                out.push(s);
            }
        }
        Ok(out)
    }

    /// Members of every size `0..=n`, labeled on `{1, …, m}`.
    pub fn enumerate_all_sizes(&self, n: usize) -> Result<Vec<Structure>, ClassError> {
        let mut out = Vec::new();
        for m in 0..=n {
            out.extend(self.enumerate(m)?);
        }
        Ok(out)
    }

    /// Grounded pruning instances for searches over the given universe.
    pub fn grounding(&self, universe: &[Element]) -> crate::search::Grounding {
        ground_constraints(self, universe)
    }

    /// Verify that restrictions of members stay in the class, for all
    /// members of size at most `n`.  Reports the first violation.
    pub fn check_hereditary(&self, n: usize) -> Result<HereditaryReport, ClassError> {
        for m in 0..=n {
            for member in self.enumerate(m)? {
                let universe = member.universe().to_vec();
                for subset in subsets(&universe) {
                    let r = member.restrict(&subset).expect("subset of universe");
                    if !self.contains(&r)? {
                        return Ok(HereditaryReport {
                            checked_up_to: n,
                            violation: Some(HereditaryViolation {
                                member,
                                subset,
                            }),
                        });
                    }
                }
            }
        }
        Ok(HereditaryReport {
            checked_up_to: n,
            violation: None,
        })
    }

    /// Bounded amalgamation check: for members `S`, `T0`, `T1` of size at
    /// most `n` and embeddings `f_i : S → T_i`, look for a member `U` of
    /// size at most `|T0| + |T1|` with embeddings `g_i : T_i → U` such that
    /// `g0 ∘ f0 = g1 ∘ f1`.  Reports the first failing triple.
    pub fn check_amalgamation(&self, n: usize) -> Result<AmalgamationReport, ClassError> {
        // It suffices to take S a restriction of T0 with f0 the inclusion:
        // any (f0, f1) pair reduces to that shape by relabeling T0.
        let t0s: Vec<Structure> = (0..=n)
            .map(|m| self.enumerate_up_to_iso(m))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .flatten()
            .collect();
        let t1s = t0s.clone();
        for t0 in &t0s {
            let u0 = t0.universe().to_vec();
            for sub in subsets(&u0) {
                let s = t0.restrict(&sub).expect("subset");
                for t1 in &t1s {
                    for f1 in t1.embeddings_from(&s) {
                        if self.amalgamate_pair(t0, t1, &s, &f1)?.is_none() {
                            return Ok(AmalgamationReport {
                                checked_up_to: n,
                                violation: Some(AmalgamationViolation {
                                    base: s,
                                    left: t0.clone(),
                                    right: t1.clone(),
                                    embedding: f1,
                                }),
                            });
                        }
                    }
                }
            }
        }
        Ok(AmalgamationReport {
            checked_up_to: n,
            violation: None,
        })
    }

    /// Search for an amalgam of `t0 ←inclusion─ s ─f1→ t1` allowing partial
    /// identification of `t0 \ s` with `t1 \ f1(s)` and up to
    /// `|t0| + |t1|` total points.
    fn amalgamate_pair(
        &self,
        t0: &Structure,
        t1: &Structure,
        s: &Structure,
        f1: &crate::relstruct::Injection,
    ) -> Result<Option<Structure>, ClassError> {
        let s_universe = s.universe().to_vec();
        let t0_rest: Vec<Element> = t0
            .universe()
            .iter()
            .copied()
            .filter(|x| !s_universe.contains(x))
            .collect();
        let f1_image: Vec<Element> = s_universe.iter().map(|&x| f1.apply(x).unwrap()).collect();
        let t1_rest: Vec<Element> = t1
            .universe()
            .iter()
            .copied()
            .filter(|x| !f1_image.contains(x))
            .collect();
        // Enumerate partial injective matchings t1_rest → t0_rest; matched
        // points are identified, unmatched t1 points get fresh ids.
        for matching in partial_matchings(&t1_rest, &t0_rest) {
            // Build the glued universe: t0 as-is, unmatched t1_rest fresh.
            let mut next_fresh: Element = t0
                .universe()
                .iter()
                .chain(t1.universe().iter())
                .copied()
                .max()
                .unwrap_or(0)
                + 1;
            let mut t1_map: Vec<(Element, Element)> = Vec::new();
            for (i, &x) in s_universe.iter().enumerate() {
                t1_map.push((f1_image[i], x));
            }
            for &y in &t1_rest {
                if let Some(&(_, tgt)) = matching.iter().find(|&&(src, _)| src == y) {
                    t1_map.push((y, tgt));
                } else {
                    t1_map.push((y, next_fresh));
                    next_fresh += 1;
                }
            }
            let t1_to_glued = crate::relstruct::Injection::from_pairs(t1_map).unwrap();
            let glued_t1 = t1.relabel(&t1_to_glued);
            let mut universe: Vec<Element> = t0.universe().to_vec();
            universe.extend(glued_t1.universe().iter().copied());
            universe.sort_unstable();
            universe.dedup();
            // Consistency of the identification: the two copies must agree
            // on shared tuples.
            let shared: Vec<Element> = t0
                .universe()
                .iter()
                .copied()
                .filter(|x| glued_t1.contains_element(*x))
                .collect();
            let a = t0.restrict(&shared).expect("subset");
            let b = glued_t1.restrict(&shared).expect("subset");
            if a != b {
                continue;
            }
            let mut fixed: Vec<((SymbolId, Vec<Element>), bool)> = Vec::new();
            for (sym, _, arity) in self.sig.symbols() {
                for tuple in tuples_over(&universe, arity) {
                    let in_t0 = tuple.iter().all(|x| t0.contains_element(*x));
                    let in_t1 = tuple.iter().all(|x| glued_t1.contains_element(*x));
                    if in_t0 {
                        fixed.push(((sym, tuple.clone()), t0.holds(sym, &tuple)));
                    } else if in_t1 {
                        fixed.push(((sym, tuple.clone()), glued_t1.holds(sym, &tuple)));
                    }
                }
            }
            let problem = SearchProblem::for_class(self, universe, fixed);
            if let Some(sol) = problem.first_solution() {
                return Ok(Some(sol));
            }
        }
        Ok(None)
    }
}

/// All subsets of a sorted slice, in size-then-lex order.
pub fn subsets(items: &[Element]) -> Vec<Vec<Element>> {
    let n = items.len();
    let mut out: Vec<Vec<Element>> = (0u32..(1 << n))
        .map(|mask| {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| items[i])
                .collect()
        })
        .collect();
    out.sort_by_key(|s: &Vec<Element>| (s.len(), s.clone()));
    out
}

fn partial_matchings(from: &[Element], to: &[Element]) -> Vec<Vec<(Element, Element)>> {
    let mut out = vec![Vec::new()];
    fn rec(
        from: &[Element],
        to: &[Element],
        used: &mut Vec<Element>,
        acc: &mut Vec<(Element, Element)>,
        out: &mut Vec<Vec<(Element, Element)>>,
    ) {
        if from.is_empty() {
            return;
        }
        let x = from[0];
        // x unmatched
        rec(&from[1..], to, used, acc, out);
        for &t in to {
            if used.contains(&t) {
                continue;
            }
            used.push(t);
            acc.push((x, t));
            out.push(acc.clone());
            rec(&from[1..], to, used, acc, out);
            acc.pop();
            used.pop();
        }
    }
    let mut acc = Vec::new();
    let mut used = Vec::new();
    rec(from, to, &mut used, &mut acc, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HereditaryViolation {
    pub member: Structure,
    pub subset: Vec<Element>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HereditaryReport {
    pub checked_up_to: usize,
    pub violation: Option<HereditaryViolation>,
}

impl HereditaryReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct AmalgamationViolation {
    pub base: Structure,
    pub left: Structure,
    pub right: Structure,
    pub embedding: crate::relstruct::Injection,
}

#[derive(Debug, Clone)]
pub struct AmalgamationReport {
    pub checked_up_to: usize,
    pub violation: Option<AmalgamationViolation>,
}

impl AmalgamationReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}
