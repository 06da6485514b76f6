//! Equivalence-class machinery: quotients, class handles, the containment
//! order on handles, blur (antichain) enumeration, canonical blur keys, and
//! bounded falsifiers for the declaration-level properties (even and free
//! containment, orthogonality, star-chain soundness).
//!
//! Handles are (anchor, relation) pairs, never extensional sets, so an
//! accidental coincidence of two classes in a small structure cannot merge
//! handles of different kinds.  The limit-level containment order is
//! computed from the declared star chain plus in-structure equivalence of
//! anchors; the falsifiers refute declarations but never certify them.

use std::collections::BTreeMap;

use crate::classdef::{ClassError, ClassSpec, DomainRef, StarRef};
use crate::relstruct::{permutations, Element, Injection, Structure};
use crate::search::SearchProblem;

/// The quotient `V_{r,S} / ~_r` as sorted blocks of tuples, blocks ordered
/// by least tuple.
pub fn classes(
    spec: &ClassSpec,
    r: usize,
    s: &Structure,
) -> Result<Vec<Vec<Vec<Element>>>, ClassError> {
    if !spec.is_equivalence_on_domain(r, s) {
        return Err(ClassError::NotAnEquivalence(
            spec.sig.name(spec.eqrels[r].relation).to_string(),
        ));
    }
    let dom = spec.domain_tuples(r, s);
    let mut blocks: Vec<Vec<Vec<Element>>> = Vec::new();
    for tuple in dom {
        match blocks
            .iter_mut()
            .find(|b| spec.related(r, s, &b[0], &tuple))
        {
            Some(b) => b.push(tuple),
            None => blocks.push(vec![tuple]),
        }
    }
    for b in &mut blocks {
        b.sort();
        b.dedup();
    }
    blocks.sort();
    Ok(blocks)
}

/// Identity of an equivalence class of an element: the relation `=` or a
/// declared relation with infinitely many classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HandleKind {
    Identity,
    Rel(usize),
}

/// A class handle: `(anchor, kind)` with the anchor canonicalized to the
/// least element of its class in the ambient structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassHandle {
    pub kind: HandleKind,
    pub anchor: Element,
}

impl ClassHandle {
    /// Identity handle of an element.
    pub fn identity(y: Element) -> Self {
        ClassHandle {
            kind: HandleKind::Identity,
            anchor: y,
        }
    }

    /// Handle of `y`'s class under declaration `r`, anchored at the least
    /// element of the class in `s`.
    pub fn of_class(spec: &ClassSpec, r: usize, s: &Structure, y: Element) -> Self {
        let least = s
            .universe()
            .iter()
            .copied()
            .filter(|&z| in_domain(spec, r, s, z) && spec.related(r, s, &[z], &[y]))
            .min()
            .unwrap_or(y);
        ClassHandle {
            kind: HandleKind::Rel(r),
            anchor: least,
        }
    }
}

pub(crate) fn in_domain(spec: &ClassSpec, r: usize, s: &Structure, y: Element) -> bool {
    match spec.eqrels[r].domain {
        DomainRef::All => true,
        DomainRef::Symbol(v) => s.holds(v, &[y]),
    }
}

/// Star-chain reachability: the ids reachable from `r` by following star
/// references strictly upward.
pub fn star_chain(spec: &ClassSpec, r: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = r;
    while let StarRef::Earlier(q) = spec.eqrels[cur].star {
        out.push(q);
        cur = q;
    }
    out
}

/// The containment order on handles: `h1 ≤ h2` when the class of `h1` lies
/// inside the class of `h2` in the limit.
pub fn handle_leq(spec: &ClassSpec, s: &Structure, h1: &ClassHandle, h2: &ClassHandle) -> bool {
    if h1 == h2 {
        return true;
    }
    match (h1.kind, h2.kind) {
        (HandleKind::Identity, HandleKind::Identity) => h1.anchor == h2.anchor,
        (HandleKind::Identity, HandleKind::Rel(q)) => {
            in_domain(spec, q, s, h1.anchor) && spec.related(q, s, &[h1.anchor], &[h2.anchor])
        }
        // An infinite class never fits inside a singleton.
        (HandleKind::Rel(_), HandleKind::Identity) => false,
        (HandleKind::Rel(r), HandleKind::Rel(q)) => {
            (r == q || star_chain(spec, r).contains(&q))
                && spec.related(q, s, &[h1.anchor], &[h2.anchor])
        }
    }
}

/// The handle set `E(s)`: one handle per ≃-class touched by `s`.
pub fn handle_set(spec: &ClassSpec, s: &Structure, elems: &[Element]) -> Vec<ClassHandle> {
    let mut out = Vec::new();
    for &y in elems {
        out.push(ClassHandle::identity(y));
        for (r, decl) in spec.eqrels.iter().enumerate() {
            if decl.count != crate::classdef::EqClassCount::Infinite {
                continue;
            }
            if in_domain(spec, r, s, y) {
                out.push(ClassHandle::of_class(spec, r, s, y));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// A blur: an antichain of class handles under the containment order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Blur(pub Vec<ClassHandle>);

impl Blur {
    pub fn empty() -> Self {
        Blur(Vec::new())
    }

    pub fn singleton(h: ClassHandle) -> Self {
        Blur(vec![h])
    }

    pub fn from_handles(mut handles: Vec<ClassHandle>) -> Self {
        handles.sort();
        handles.dedup();
        Blur(handles)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Deterministic byte key.  Layout: `[count: u8]`, then per handle in
    /// sorted order `[tag: u8][anchor: u32 BE]` where tag 0 is the identity
    /// handle and tag `1 + r` is declaration `r`.
    pub fn canonical_key(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + 5 * self.0.len());
        out.push(self.0.len() as u8);
        for h in &self.0 {
            let tag = match h.kind {
                HandleKind::Identity => 0u8,
                HandleKind::Rel(r) => 1 + r as u8,
            };
            out.push(tag);
            out.extend_from_slice(&h.anchor.to_be_bytes());
        }
        out
    }
}

/// The blur set `B(s)`: all antichains of `E(s)`, including the empty one
/// unless `include_empty` is false.  Deterministic order: by size, then by
/// handle sequence.
pub fn blur_set(
    spec: &ClassSpec,
    s: &Structure,
    elems: &[Element],
    include_empty: bool,
) -> Vec<Blur> {
    let handles = handle_set(spec, s, elems);
    let n = handles.len();
    assert!(n < 26, "handle set too large for blur enumeration");
    let mut out = Vec::new();
    'mask: for mask in 0u32..(1 << n) {
        let chosen: Vec<ClassHandle> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| handles[i])
            .collect();
        for i in 0..chosen.len() {
            for j in 0..chosen.len() {
                if i != j && handle_leq(spec, s, &chosen[i], &chosen[j]) {
                    continue 'mask;
                }
            }
        }
        if chosen.is_empty() && !include_empty {
            continue;
        }
        out.push(Blur(chosen));
    }
    out.sort_by_key(|b| (b.len(), b.0.clone()));
    out
}

/// Outcome of a bounded counterexample search.
#[derive(Debug, Clone)]
pub enum FalsifyOutcome {
    NoCounterexampleAtBound { bound: usize },
    Counterexample(FalsifyWitness),
}

impl FalsifyOutcome {
    pub fn refuted(&self) -> bool {
        matches!(self, FalsifyOutcome::Counterexample(_))
    }
}

#[derive(Debug, Clone)]
pub struct FalsifyWitness {
    pub member: Structure,
    pub detail: String,
}

/// Does any extension of `s` inside the class, up to `max_size` points
/// total, satisfy `accept`?
fn exists_extension(
    spec: &ClassSpec,
    s: &Structure,
    max_size: usize,
    accept: &dyn Fn(&Structure) -> bool,
) -> bool {
    if accept(s) {
        return true;
    }
    let base = s.universe().to_vec();
    if s.size() >= max_size {
        return false;
    }
    let fresh_start = base.iter().copied().max().unwrap_or(0) + 1;
    for extra in 1..=(max_size - s.size()) {
        let mut universe = base.clone();
        universe.extend((0..extra).map(|i| fresh_start + i as Element));
        let mut fixed = Vec::new();
        for (sym, _, arity) in spec.sig.symbols() {
            for tuple in crate::relstruct::tuples_over(&base, arity) {
                fixed.push(((sym, tuple.clone()), s.holds(sym, &tuple)));
            }
        }
        let problem = SearchProblem::for_class(spec, universe, fixed);
        if problem.any_solution_where(accept).is_some() {
            return true;
        }
    }
    false
}

/// Bounded falsifier for even containment of `~_r` in its star: look for a
/// member whose star classes hold different numbers of subclasses, with no
/// extension up to `n + 2` points equalizing the two counts.
pub fn falsify_evenly(spec: &ClassSpec, r: usize, n: usize) -> Result<FalsifyOutcome, ClassError> {
    let StarRef::Earlier(q) = spec.eqrels[r].star else {
        // A trivial star has a single class, so even containment is vacuous.
        return Ok(FalsifyOutcome::NoCounterexampleAtBound { bound: n });
    };
    for m in 0..=n {
        for member in spec.enumerate(m)? {
            let star_blocks = classes(spec, q, &member)?;
            // Subclass count of the (tracked) star block within a possibly
            // larger structure.
            let count_in = |star: &Vec<Vec<Element>>, t: &Structure| -> usize {
                classes(spec, r, t)
                    .map(|blocks| {
                        blocks
                            .iter()
                            .filter(|b| spec.related(q, t, &b[0], &star[0]))
                            .count()
                    })
                    .unwrap_or(0)
            };
            for i in 0..star_blocks.len() {
                for j in (i + 1)..star_blocks.len() {
                    let (a, b) = (
                        count_in(&star_blocks[i], &member),
                        count_in(&star_blocks[j], &member),
                    );
                    if a == b {
                        continue;
                    }
                    let di = star_blocks[i].clone();
                    let dj = star_blocks[j].clone();
                    let repairable = exists_extension(spec, &member, n + 2, &|t| {
                        count_in(&di, t) == count_in(&dj, t)
                    });
                    if !repairable {
                        let detail = format!(
                            "star classes {:?} and {:?} hold {a} and {b} classes of {}, not equalizable within {} points",
                            star_blocks[i], star_blocks[j], spec.eqrels[r].id, n + 2
                        );
                        return Ok(FalsifyOutcome::Counterexample(FalsifyWitness {
                            member,
                            detail,
                        }));
                    }
                }
            }
        }
    }
    Ok(FalsifyOutcome::NoCounterexampleAtBound { bound: n })
}

/// Bounded falsifier for free containment: look for two equal-size classes
/// of `~_r` inside one star class that no automorphism of any bounded
/// extension can swap while fixing the other classes setwise.
pub fn falsify_freely(spec: &ClassSpec, r: usize, n: usize) -> Result<FalsifyOutcome, ClassError> {
    for m in 0..=n {
        for member in spec.enumerate(m)? {
            let blocks = classes(spec, r, &member)?;
            for i in 0..blocks.len() {
                for j in (i + 1)..blocks.len() {
                    if blocks[i].len() != blocks[j].len() {
                        continue;
                    }
                    if !same_star_class(spec, r, &member, &blocks[i][0], &blocks[j][0]) {
                        continue;
                    }
                    let bi = blocks[i].clone();
                    let bj = blocks[j].clone();
                    let swappable = exists_extension(spec, &member, member.size() + 2, &|t| {
                        has_swap_automorphism(spec, r, t, &bi, &bj)
                    });
                    if !swappable {
                        let detail = format!(
                            "classes {:?} and {:?} of {} admit no swapping automorphism at bound",
                            blocks[i], blocks[j], spec.eqrels[r].id
                        );
                        return Ok(FalsifyOutcome::Counterexample(FalsifyWitness {
                            member,
                            detail,
                        }));
                    }
                }
            }
        }
    }
    Ok(FalsifyOutcome::NoCounterexampleAtBound { bound: n })
}

fn same_star_class(
    spec: &ClassSpec,
    r: usize,
    s: &Structure,
    a: &[Element],
    b: &[Element],
) -> bool {
    match spec.eqrels[r].star {
        StarRef::Trivial => true,
        StarRef::Earlier(q) => spec.related(q, s, a, b),
    }
}

/// Does `t` have an automorphism swapping the classes anchored by `ci`/`cj`
/// and mapping every other class of `~_r` to itself setwise?
fn has_swap_automorphism(
    spec: &ClassSpec,
    r: usize,
    t: &Structure,
    ci: &[Vec<Element>],
    cj: &[Vec<Element>],
) -> bool {
    let Ok(blocks) = classes(spec, r, t) else {
        return false;
    };
    let block_of = |anchor: &Vec<Element>| {
        blocks
            .iter()
            .position(|b| spec.related(r, t, &b[0], anchor))
    };
    let (Some(bi), Some(bj)) = (block_of(&ci[0].clone()), block_of(&cj[0].clone())) else {
        return false;
    };
    if bi == bj || blocks[bi].len() != blocks[bj].len() {
        return false;
    }
    let flat = |b: &Vec<Vec<Element>>| -> Vec<Element> {
        let mut v: Vec<Element> = b.iter().flat_map(|t| t.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let elems_i = flat(&blocks[bi]);
    let elems_j = flat(&blocks[bj]);
    let rest: Vec<Vec<Element>> = blocks
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != bi && *k != bj)
        .map(|(_, b)| flat(b))
        .collect();
    let outside: Vec<Element> = t
        .universe()
        .iter()
        .copied()
        .filter(|&x| {
            !elems_i.contains(&x)
                && !elems_j.contains(&x)
                && !rest.iter().any(|b| b.contains(&x))
        })
        .collect();

    for fwd in permutations(&elems_j) {
        for back in permutations(&elems_i) {
            let mut pairs: Vec<(Element, Element)> = Vec::new();
            pairs.extend(elems_i.iter().copied().zip(fwd.iter().copied()));
            pairs.extend(elems_j.iter().copied().zip(back.iter().copied()));
            for &x in &outside {
                pairs.push((x, x));
            }
            if rest_auto(t, &rest, 0, pairs) {
                return true;
            }
        }
    }
    false
}

fn rest_auto(
    t: &Structure,
    rest: &[Vec<Element>],
    k: usize,
    pairs: Vec<(Element, Element)>,
) -> bool {
    if k == rest.len() {
        return check_auto(t, &pairs);
    }
    for perm in permutations(&rest[k]) {
        let mut next = pairs.clone();
        next.extend(rest[k].iter().copied().zip(perm.iter().copied()));
        if rest_auto(t, rest, k + 1, next) {
            return true;
        }
    }
    false
}

fn check_auto(t: &Structure, pairs: &[(Element, Element)]) -> bool {
    let Ok(phi) = Injection::from_pairs(pairs.iter().copied()) else {
        return false;
    };
    if phi.len() != t.size() {
        return false;
    }
    t.relabel(&phi) == *t
}

/// Bounded falsifier for orthogonality of `~_q` to `~_r` within `~*_r`: a
/// pair of classes in one star class with an empty intersection that no
/// extension up to `n + 2` points can realize.
pub fn falsify_orthogonal(
    spec: &ClassSpec,
    r: usize,
    q: usize,
    n: usize,
) -> Result<FalsifyOutcome, ClassError> {
    for m in 0..=n {
        for member in spec.enumerate(m)? {
            let r_blocks = classes(spec, r, &member)?;
            let q_blocks = classes(spec, q, &member)?;
            for rb in &r_blocks {
                for qb in &q_blocks {
                    if !same_star_class(spec, r, &member, &rb[0], &qb[0]) {
                        continue;
                    }
                    if rb.iter().any(|t| qb.contains(t)) {
                        continue;
                    }
                    let (ra, qa) = (rb[0].clone(), qb[0].clone());
                    let realizable = exists_extension(spec, &member, n + 2, &|t| {
                        t.universe().iter().any(|&z| {
                            in_domain(spec, r, t, z)
                                && in_domain(spec, q, t, z)
                                && spec.related(r, t, &[z], &ra)
                                && spec.related(q, t, &[z], &qa)
                        })
                    });
                    if !realizable {
                        let detail = format!(
                            "classes {:?} ({}) and {:?} ({}) cannot meet within {} points",
                            rb,
                            spec.eqrels[r].id,
                            qb,
                            spec.eqrels[q].id,
                            n + 2
                        );
                        return Ok(FalsifyOutcome::Counterexample(FalsifyWitness {
                            member,
                            detail,
                        }));
                    }
                }
            }
        }
    }
    Ok(FalsifyOutcome::NoCounterexampleAtBound { bound: n })
}

/// Cross-check the declarations against bounded enumeration: a structure
/// satisfying the constraints alone but violating equivalence-ness, star
/// nesting or a finite count bound witnesses an unsound declaration.
pub fn validate_declarations(spec: &ClassSpec, n: usize) -> Result<FalsifyOutcome, ClassError> {
    let mut constraints_only = spec.clone();
    constraints_only.eqrels.clear();
    constraints_only.kind = crate::classdef::ClassKind::Constrained;
    for m in 0..=n {
        for member in constraints_only.enumerate(m)? {
            for (r, decl) in spec.eqrels.iter().enumerate() {
                if !spec.is_equivalence_on_domain(r, &member) {
                    let detail = format!(
                        "constraints admit a structure where {} is not an equivalence",
                        decl.id
                    );
                    return Ok(FalsifyOutcome::Counterexample(FalsifyWitness {
                        member,
                        detail,
                    }));
                }
                if let StarRef::Earlier(q) = decl.star {
                    let dom = spec.domain_tuples(r, &member);
                    for a in &dom {
                        for b in &dom {
                            if spec.related(r, &member, a, b) && !spec.related(q, &member, a, b) {
                                let detail = format!(
                                    "declared star {} of {} fails: {:?} ~ {:?} under {} but not under the star",
                                    spec.eqrels[q].id, decl.id, a, b, decl.id
                                );
                                return Ok(FalsifyOutcome::Counterexample(FalsifyWitness {
                                    member,
                                    detail,
                                }));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(FalsifyOutcome::NoCounterexampleAtBound { bound: n })
}

/// A labeled blur table row for reporting.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BlurRow {
    pub handles: Vec<String>,
    pub key_hex: String,
}

/// Render blurs with their canonical keys.
pub fn blur_table(spec: &ClassSpec, blurs: &[Blur]) -> Vec<BlurRow> {
    blurs
        .iter()
        .map(|b| BlurRow {
            handles: b
                .0
                .iter()
                .map(|h| match h.kind {
                    HandleKind::Identity => format!("[{}]=", h.anchor),
                    HandleKind::Rel(r) => format!("[{}]{}", h.anchor, spec.eqrels[r].id),
                })
                .collect(),
            key_hex: b
                .canonical_key()
                .iter()
                .map(|byte| format!("{byte:02x}"))
                .collect(),
        })
        .collect()
}

/// Count handles per kind; used by reports.
pub fn handle_summary(handles: &[ClassHandle]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for h in handles {
        let key = match h.kind {
            HandleKind::Identity => "=".to_string(),
            HandleKind::Rel(r) => format!("rel{r}"),
        };
        *out.entry(key).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kspec;
    use std::sync::Arc;

    fn member(spec: &ClassSpec, text: &str) -> Structure {
        Structure::parse(Arc::clone(&spec.sig), text).unwrap()
    }

    #[test]
    fn classes_of_two_block_structure() {
        let k = kspec::builtin("equiv").unwrap();
        let s = member(&k, "universe: 1 2 3\nR 1 1\nR 1 2\nR 2 1\nR 2 2\nR 3 3\n");
        let blocks = classes(&k, 0, &s).unwrap();
        assert_eq!(blocks, vec![vec![vec![1], vec![2]], vec![vec![3]]]);
    }

    #[test]
    fn classes_of_empty_domain() {
        let k = kspec::builtin("equiv").unwrap();
        let s = Structure::empty(Arc::clone(&k.sig), vec![]);
        assert!(classes(&k, 0, &s).unwrap().is_empty());
    }

    #[test]
    fn classes_error_when_not_equivalence() {
        let k = kspec::builtin("equiv").unwrap();
        let s = member(&k, "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\n");
        assert!(classes(&k, 0, &s).is_err());
    }

    #[test]
    fn nested_fixture_classes_refine() {
        let k = kspec::builtin("two_eq_nested").unwrap();
        let s = member(
            &k,
            "universe: 1 2 3 4\nR 1 1\nR 2 2\nR 3 3\nR 4 4\nR 1 2\nR 2 1\nR 3 4\nR 4 3\nS 1 1\nS 2 2\nS 3 3\nS 4 4\nS 3 4\nS 4 3\n",
        );
        assert!(k.contains(&s).unwrap());
        let r_blocks = classes(&k, 0, &s).unwrap();
        let s_blocks = classes(&k, 1, &s).unwrap();
        assert_eq!(r_blocks.len(), 2);
        assert_eq!(s_blocks.len(), 3);
        for sb in &s_blocks {
            assert!(r_blocks.iter().any(|rb| sb.iter().all(|t| rb.contains(t))));
        }
    }

    #[test]
    fn handle_set_one_point_two_relations() {
        // E(y) has the identity handle plus one handle per infinite relation.
        let k = kspec::builtin("two_eq").unwrap();
        let s = member(&k, "universe: 5\nR 5 5\nS 5 5\n");
        let handles = handle_set(&k, &s, &[5]);
        assert_eq!(handles.len(), 3);
    }

    #[test]
    fn handles_merge_when_anchors_equivalent() {
        let k = kspec::builtin("two_eq").unwrap();
        let s = member(
            &k,
            "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\nS 1 1\nS 2 2\n",
        );
        // R-handles of 1 and 2 merge; S-handles stay apart: 2 identity
        // handles + 1 R + 2 S = 5.
        let handles = handle_set(&k, &s, &[1, 2]);
        assert_eq!(handles.len(), 5);
    }

    #[test]
    fn identity_below_class_handle() {
        let k = kspec::builtin("equiv").unwrap();
        let s = member(&k, "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\n");
        let id = ClassHandle::identity(2);
        let class = ClassHandle::of_class(&k, 0, &s, 2);
        assert_eq!(class.anchor, 1);
        assert!(handle_leq(&k, &s, &id, &class));
        assert!(!handle_leq(&k, &s, &class, &id));
    }

    #[test]
    fn unrelated_relations_incomparable() {
        let k = kspec::builtin("two_eq").unwrap();
        let s = member(&k, "universe: 7\nR 7 7\nS 7 7\n");
        let hr = ClassHandle::of_class(&k, 0, &s, 7);
        let hs = ClassHandle::of_class(&k, 1, &s, 7);
        assert!(!handle_leq(&k, &s, &hr, &hs));
        assert!(!handle_leq(&k, &s, &hs, &hr));
    }

    #[test]
    fn nested_relations_compare_through_star() {
        let k = kspec::builtin("two_eq_nested").unwrap();
        let s = member(&k, "universe: 7\nR 7 7\nS 7 7\n");
        let hr = ClassHandle::of_class(&k, 0, &s, 7);
        let hs = ClassHandle::of_class(&k, 1, &s, 7);
        assert!(handle_leq(&k, &s, &hs, &hr));
        assert!(!handle_leq(&k, &s, &hr, &hs));
    }

    #[test]
    fn blur_counts_match_worked_examples() {
        // Independent relations: 4 nonempty blurs of a point.
        let k1 = kspec::builtin("two_eq").unwrap();
        let s1 = member(&k1, "universe: 9\nR 9 9\nS 9 9\n");
        let blurs = blur_set(&k1, &s1, &[9], true);
        assert_eq!(blurs.len(), 5);
        assert_eq!(blurs.iter().filter(|b| !b.is_empty()).count(), 4);

        // Nested relations: the two-handle antichain disappears.
        let k2 = kspec::builtin("two_eq_nested").unwrap();
        let s2 = member(&k2, "universe: 9\nR 9 9\nS 9 9\n");
        let blurs = blur_set(&k2, &s2, &[9], true);
        assert_eq!(blurs.len(), 4);
        assert_eq!(blurs.iter().filter(|b| !b.is_empty()).count(), 3);
    }

    #[test]
    fn blur_set_without_eqrels_is_powerset() {
        let text = "signature { Q/1; }\n";
        let k = crate::classdef::parse_spec(text).unwrap();
        let s = member(&k, "universe: 1 2\n");
        let blurs = blur_set(&k, &s, &[1, 2], true);
        assert_eq!(blurs.len(), 4);
        let no_empty = blur_set(&k, &s, &[1, 2], false);
        assert_eq!(no_empty.len(), 3);
    }

    #[test]
    fn blur_set_monotone_in_elements() {
        let k = kspec::builtin("equiv").unwrap();
        let s = member(&k, "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n");
        let small = blur_set(&k, &s, &[1], true);
        let big = blur_set(&k, &s, &[1, 3], true);
        assert!(big.len() >= small.len());
        for b in &small {
            assert!(big.contains(b));
        }
    }

    #[test]
    fn every_blur_handle_in_handle_set_and_antichain() {
        let k = kspec::builtin("two_eq").unwrap();
        let s = member(
            &k,
            "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\nS 1 1\nS 2 2\n",
        );
        let handles = handle_set(&k, &s, &[1, 2]);
        for b in blur_set(&k, &s, &[1, 2], true) {
            for h in &b.0 {
                assert!(handles.contains(h));
            }
            for x in &b.0 {
                for y in &b.0 {
                    if x != y {
                        assert!(!handle_leq(&k, &s, x, y));
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_key_stable_under_class_preserving_restriction() {
        let k = kspec::builtin("equiv").unwrap();
        let s = member(&k, "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n");
        let h_full = ClassHandle::of_class(&k, 0, &s, 2);
        let restricted = s.restrict(&[1, 2]).unwrap();
        let h_restr = ClassHandle::of_class(&k, 0, &restricted, 2);
        assert_eq!(
            Blur::singleton(h_full).canonical_key(),
            Blur::singleton(h_restr).canonical_key()
        );
    }

    #[test]
    fn distinct_blurs_have_distinct_keys() {
        let k = kspec::builtin("two_eq").unwrap();
        let s = member(&k, "universe: 4\nR 4 4\nS 4 4\n");
        let blurs = blur_set(&k, &s, &[4], true);
        let mut keys: Vec<Vec<u8>> = blurs.iter().map(|b| b.canonical_key()).collect();
        let total = keys.len();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), total);
    }

    #[test]
    fn freely_holds_for_plain_equivalence() {
        let k = kspec::builtin("equiv").unwrap();
        let out = falsify_freely(&k, 0, 4).unwrap();
        assert!(!out.refuted());
    }

    #[test]
    fn evenly_vacuous_for_trivial_star() {
        let k = kspec::builtin("equiv").unwrap();
        let out = falsify_evenly(&k, 0, 3).unwrap();
        assert!(!out.refuted());
    }

    #[test]
    fn evenly_refuted_for_uneven_fixture() {
        let k = kspec::builtin("uneven").unwrap();
        let out = falsify_evenly(&k, 1, 4).unwrap();
        assert!(out.refuted(), "expected an uneven witness");
    }

    #[test]
    fn orthogonality_refuted_when_fine_relation_nests() {
        let k = kspec::builtin("nonorth").unwrap();
        let out = falsify_orthogonal(&k, 1, 0, 3).unwrap();
        assert!(out.refuted());
    }

    #[test]
    fn orthogonality_unrefuted_for_independent_relations() {
        let k = kspec::builtin("two_eq").unwrap();
        let out = falsify_orthogonal(&k, 1, 0, 3).unwrap();
        assert!(!out.refuted());
    }

    #[test]
    fn prs_star_declaration_refuted() {
        let k = kspec::builtin("prs").unwrap();
        let out = validate_declarations(&k, 2).unwrap();
        assert!(out.refuted(), "expected the non-uniform refinement witness");
    }

    #[test]
    fn sound_declarations_validate() {
        let k = kspec::builtin("two_eq_nested").unwrap();
        let out = validate_declarations(&k, 3).unwrap();
        assert!(!out.refuted());
    }
}
