//! Infinite-count elimination: the classes of the last declaration become
//! explicit class-name elements behind a fresh unary predicate `C`.  The
//! eliminated relation symbol disappears; its content is recovered from the
//! pairing of domain elements with class names.  Each remaining symbol is
//! tagged class-side, element-side or doubled, which fixes both the
//! well-formedness conditions (meaningful structures) and the decoding back
//! to the base signature.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::EliminateError;
use crate::classdef::{
    ClassKind, ClassSpec, Constraint, DomainRef, EqClassCount, Formula, MembershipExt, StarRef,
};
use crate::equiv::{classes, star_chain};
use crate::relstruct::{tuples_over, Element, Injection, Signature, Structure, SymbolId};
use crate::search::SearchProblem;

pub const DEFAULT_SEARCH_BOUND: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideTag {
    ClassSide,
    ElementSide,
    Doubled,
}

/// Everything the transformed class needs to decode its structures; shared
/// by the membership hook and the lift.
#[derive(Debug)]
pub struct InfExpansionData {
    pub base: ClassSpec,
    /// Index of the eliminated declaration (the last one).
    pub d: usize,
    pub expanded_sig: Arc<Signature>,
    pub c_symbol: SymbolId,
    /// The base domain symbol in the expanded signature, when declared.
    pub v_symbol: Option<SymbolId>,
    /// Base symbol -> (expanded symbol, tag); `None` for the eliminated
    /// relation symbol.
    pub symbol_map: Vec<Option<(SymbolId, SideTag)>>,
    pub search_bound: usize,
}

#[derive(Debug, Clone)]
pub struct InfExpansion {
    pub data: Arc<InfExpansionData>,
    pub expanded: ClassSpec,
}

/// Decide the side of a base symbol relative to the eliminated declaration.
/// Declared star chains settle class-defining binaries; unary symbols are
/// decided by bounded witness search, with a hard error when neither side
/// fits at the bound.
pub fn side_tag(
    base: &ClassSpec,
    sym: SymbolId,
    d: usize,
    bound: usize,
) -> Result<SideTag, EliminateError> {
    let decl = &base.eqrels[d];
    if sym == decl.relation {
        // The eliminated relation itself carries no tag; callers drop it.
        return Ok(SideTag::ClassSide);
    }
    if let DomainRef::Symbol(v) = decl.domain {
        if sym == v {
            // The domain marker rides along with its elements.
            return Ok(SideTag::ElementSide);
        }
    }
    let arity = base.sig.arity(sym);
    // Class-defining binary: compare against the star chain of d.
    if let Some(r) = base
        .eqrels
        .iter()
        .position(|e| e.relation == sym && e.length == 1)
    {
        let coarser_than_star = match decl.star {
            StarRef::Earlier(q) => r == q || star_chain(base, q).contains(&r),
            StarRef::Trivial => false,
        };
        return Ok(if coarser_than_star {
            SideTag::ClassSide
        } else {
            SideTag::ElementSide
        });
    }
    if arity == 1 {
        // Witnesses: a split of a ~_d class forces element side; a split of
        // a star class with classwise-constant P fits neither side.
        let mut splits_class = false;
        let mut splits_star = false;
        for m in 0..=(bound + 1).min(base.enumeration_cap) {
            for member in base.enumerate(m)? {
                let dom = base.domain_tuples(d, &member);
                for a in &dom {
                    for b in &dom {
                        let pa = member.holds(sym, a);
                        let pb = member.holds(sym, b);
                        if pa == pb {
                            continue;
                        }
                        if base.related(d, &member, a, b) {
                            splits_class = true;
                        }
                        let same_star = match decl.star {
                            StarRef::Trivial => true,
                            StarRef::Earlier(q) => base.related(q, &member, a, b),
                        };
                        if same_star {
                            splits_star = true;
                        }
                    }
                }
            }
        }
        if splits_class {
            return Ok(SideTag::ElementSide);
        }
        if splits_star {
            return Err(EliminateError::SideTagIndeterminate {
                symbol: base.sig.name(sym).to_string(),
                bound,
            });
        }
        return Ok(SideTag::ClassSide);
    }
    Ok(SideTag::Doubled)
}

/// Build the expanded class for the infinite case.
pub fn class_inf(
    base: &ClassSpec,
    d: usize,
    bound: usize,
) -> Result<InfExpansion, EliminateError> {
    if d + 1 != base.eqrels.len() {
        return Err(EliminateError::NotLastDeclaration(
            base.eqrels[d].id.clone(),
        ));
    }
    let decl = base.eqrels[d].clone();
    if decl.count != EqClassCount::Infinite {
        return Err(EliminateError::WrongCount(decl.id.clone()));
    }

    let mut symbols: Vec<(String, usize)> = Vec::new();
    let mut symbol_map: Vec<Option<(SymbolId, SideTag)>> = Vec::with_capacity(base.sig.len());
    for (sym, name, arity) in base.sig.symbols() {
        if sym == decl.relation {
            symbol_map.push(None);
            continue;
        }
        let tag = side_tag(base, sym, d, bound)?;
        let new_arity = match tag {
            SideTag::ClassSide | SideTag::ElementSide if arity <= 2 => arity,
            SideTag::Doubled => 2 * arity,
            _ => arity,
        };
        symbol_map.push(Some((symbols.len(), tag)));
        symbols.push((name.to_string(), new_arity));
    }
    let mut c_name = format!("C_{}", decl.id);
    while symbols.iter().any(|(n, _)| *n == c_name) {
        c_name.push('_');
    }
    let c_symbol = symbols.len();
    symbols.push((c_name, 1));
    let expanded_sig = Arc::new(Signature::new(symbols).expect("validated symbols"));
    let v_symbol = match decl.domain {
        DomainRef::Symbol(v) => Some(symbol_map[v].expect("domain symbol kept").0),
        DomainRef::All => None,
    };

    // Membership necessities: C/V disjointness and per-tag confinement.
    let mut constraints: Vec<Constraint> = Vec::new();
    let not_c = |var: usize| Formula::Not(Box::new(Formula::Atom(c_symbol, vec![var])));
    let vpart = |var: usize| match v_symbol {
        Some(v) => Formula::Atom(v, vec![var]),
        None => not_c(var),
    };
    let epart = |var: usize| match v_symbol {
        Some(v) => Formula::And(
            Box::new(not_c(var)),
            Box::new(Formula::Not(Box::new(Formula::Atom(v, vec![var])))),
        ),
        None => Formula::False,
    };
    if let Some(v) = v_symbol {
        constraints.push(Constraint {
            var_names: vec!["x".into()],
            body: Formula::Not(Box::new(Formula::And(
                Box::new(Formula::Atom(c_symbol, vec![0])),
                Box::new(Formula::Atom(v, vec![0])),
            ))),
        });
    }
    for (sym, _, arity) in base.sig.symbols() {
        let Some((new_sym, tag)) = symbol_map[sym] else {
            continue;
        };
        if v_symbol == Some(new_sym) {
            continue;
        }
        let vars = |n: usize| -> Vec<String> { (0..n).map(|i| format!("x{i}")).collect() };
        match (tag, arity) {
            (SideTag::ClassSide, 1) => constraints.push(Constraint {
                var_names: vars(1),
                body: Formula::Implies(
                    Box::new(Formula::Atom(new_sym, vec![0])),
                    Box::new(Formula::Not(Box::new(vpart(0)))),
                ),
            }),
            (SideTag::ElementSide, 1) => constraints.push(Constraint {
                var_names: vars(1),
                body: Formula::Implies(
                    Box::new(Formula::Atom(new_sym, vec![0])),
                    Box::new(not_c(0)),
                ),
            }),
            (SideTag::ClassSide, 2) => constraints.push(Constraint {
                var_names: vars(2),
                body: Formula::Implies(
                    Box::new(Formula::Atom(new_sym, vec![0, 1])),
                    Box::new(Formula::And(
                        Box::new(Formula::Not(Box::new(vpart(0)))),
                        Box::new(Formula::Not(Box::new(vpart(1)))),
                    )),
                ),
            }),
            (SideTag::ElementSide, 2) => constraints.push(Constraint {
                var_names: vars(2),
                body: Formula::Implies(
                    Box::new(Formula::Atom(new_sym, vec![0, 1])),
                    Box::new(Formula::And(Box::new(not_c(0)), Box::new(not_c(1)))),
                ),
            }),
            (SideTag::Doubled, m) => {
                let mut ok = Formula::True;
                for i in 0..m {
                    let (x, y) = (2 * i, 2 * i + 1);
                    let pair_ok = Formula::Or(
                        Box::new(Formula::And(
                            Box::new(vpart(x)),
                            Box::new(Formula::Atom(c_symbol, vec![y])),
                        )),
                        Box::new(Formula::And(
                            Box::new(Formula::Eq(x, y)),
                            Box::new(epart(x)),
                        )),
                    );
                    ok = Formula::And(Box::new(ok), Box::new(pair_ok));
                }
                constraints.push(Constraint {
                    var_names: vars(2 * m),
                    body: Formula::Implies(
                        Box::new(Formula::Atom(new_sym, (0..2 * m).collect())),
                        Box::new(ok),
                    ),
                });
            }
            _ => {}
        }
    }

    // Remaining declarations: class-side relations move to the class names.
    let mut eqrels = Vec::with_capacity(d);
    for r in 0..d {
        let old = &base.eqrels[r];
        let (new_rel, tag) = symbol_map[old.relation].expect("kept symbol");
        let domain = match tag {
            SideTag::ClassSide => DomainRef::Symbol(c_symbol),
            _ => match old.domain {
                DomainRef::All => DomainRef::All,
                DomainRef::Symbol(v) => {
                    DomainRef::Symbol(symbol_map[v].expect("kept symbol").0)
                }
            },
        };
        eqrels.push(crate::classdef::EqRelDecl {
            id: old.id.clone(),
            domain,
            relation: new_rel,
            length: old.length,
            star: old.star,
            count: old.count,
        });
    }

    let data = Arc::new(InfExpansionData {
        base: base.clone(),
        d,
        expanded_sig: Arc::clone(&expanded_sig),
        c_symbol,
        v_symbol,
        symbol_map,
        search_bound: bound,
    });
    let mut expanded = ClassSpec::new(expanded_sig, constraints, eqrels);
    expanded.kind = ClassKind::Extended(Arc::new(InfMembership {
        data: Arc::clone(&data),
    }));
    expanded.enumeration_cap = base.enumeration_cap;
    expanded.membership_cap = base.membership_cap;
    Ok(InfExpansion { data, expanded })
}

/// Membership hook: a structure belongs to the expanded class when some
/// meaningful, large-enough extension decodes into the base class.
#[derive(Debug)]
pub struct InfMembership {
    data: Arc<InfExpansionData>,
}

impl MembershipExt for InfMembership {
    fn contains(&self, spec: &ClassSpec, s: &Structure) -> bool {
        matches!(
            class_inf_contains(&self.data, spec, s, self.data.search_bound),
            InfMembershipOutcome::Member
        )
    }

    fn describe(&self) -> String {
        format!(
            "eliminate-inf of `{}` over the base class",
            self.data.base.eqrels[self.data.d].id
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfMembershipOutcome {
    Member,
    /// No qualifying extension within the bound; not a proof of
    /// non-membership.
    NotMemberAtBound,
}

/// Bounded search for a meaningful, large-enough extension whose decoding
/// lies in the base class.
pub fn class_inf_contains(
    data: &InfExpansionData,
    spec: &ClassSpec,
    s: &Structure,
    bound: usize,
) -> InfMembershipOutcome {
    let accept = |t: &Structure| -> bool {
        if !is_meaningful(data, t) || !is_large_enough(data, t) {
            return false;
        }
        match minus(data, t) {
            Ok(m) => data.base.contains(&m.structure).unwrap_or(false),
            Err(_) => false,
        }
    };
    if accept(s) {
        return InfMembershipOutcome::Member;
    }
    let base_universe = s.universe().to_vec();
    let fresh_start = base_universe.iter().copied().max().unwrap_or(0) + 1;
    let constrained = constrained_clone(spec);
    for extra in 1..=bound {
        let mut universe = base_universe.clone();
        universe.extend((0..extra).map(|i| fresh_start + i as Element));
        let mut fixed = Vec::new();
        for (sym, _, arity) in spec.sig.symbols() {
            for tuple in tuples_over(&base_universe, arity) {
                fixed.push(((sym, tuple.clone()), s.holds(sym, &tuple)));
            }
        }
        let problem = SearchProblem::for_class(&constrained, universe, fixed);
        if problem.any_solution_where(accept).is_some() {
            return InfMembershipOutcome::Member;
        }
    }
    InfMembershipOutcome::NotMemberAtBound
}

fn constrained_clone(spec: &ClassSpec) -> ClassSpec {
    let mut out = spec.clone();
    out.kind = ClassKind::Constrained;
    out
}

fn c_part(data: &InfExpansionData, s: &Structure) -> Vec<Element> {
    s.tuples(data.c_symbol).map(|t| t[0]).collect()
}

fn v_part(data: &InfExpansionData, s: &Structure) -> Vec<Element> {
    match data.v_symbol {
        Some(v) => s.tuples(v).map(|t| t[0]).collect(),
        None => {
            let c = c_part(data, s);
            s.universe()
                .iter()
                .copied()
                .filter(|x| !c.contains(x))
                .collect()
        }
    }
}

fn e_part(data: &InfExpansionData, s: &Structure) -> Vec<Element> {
    let c = c_part(data, s);
    let v = v_part(data, s);
    s.universe()
        .iter()
        .copied()
        .filter(|x| !c.contains(x) && !v.contains(x))
        .collect()
}

/// The well-formedness conditions on expanded structures.
pub fn is_meaningful(data: &InfExpansionData, s: &Structure) -> bool {
    let c = c_part(data, s);
    let v = v_part(data, s);
    let e = e_part(data, s);
    if c.iter().any(|x| v.contains(x)) {
        return false;
    }
    for (sym, _, arity) in data.base.sig.symbols() {
        let Some((new_sym, tag)) = data.symbol_map[sym] else {
            continue;
        };
        if data.v_symbol == Some(new_sym) {
            continue;
        }
        match (tag, arity) {
            (SideTag::ClassSide, 1) => {
                if s.tuples(new_sym).any(|t| v.contains(&t[0])) {
                    return false;
                }
            }
            (SideTag::ElementSide, 1) => {
                if s.tuples(new_sym).any(|t| c.contains(&t[0])) {
                    return false;
                }
            }
            (SideTag::ClassSide, 2) => {
                if s.tuples(new_sym).any(|t| t.iter().any(|x| v.contains(x))) {
                    return false;
                }
            }
            (SideTag::ElementSide, 2) => {
                if s.tuples(new_sym).any(|t| t.iter().any(|x| c.contains(x))) {
                    return false;
                }
            }
            (SideTag::Doubled, m) => {
                for t in s.tuples(new_sym) {
                    for i in 0..m {
                        let (x, y) = (t[2 * i], t[2 * i + 1]);
                        let pair_ok =
                            (v.contains(&x) && c.contains(&y)) || (x == y && e.contains(&x));
                        if !pair_ok {
                            return false;
                        }
                    }
                }
            }
            _ => {}
        }
    }
    true
}

/// Both a class name and a domain element must be present.
pub fn is_large_enough(data: &InfExpansionData, s: &Structure) -> bool {
    !c_part(data, s).is_empty() && !v_part(data, s).is_empty()
}

/// A decoded element: a (domain element, class name) pair or a plain
/// element carried over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MinusPoint {
    Pair(Element, Element),
    Plain(Element),
}

/// The decoded base structure with its pair map.
#[derive(Debug, Clone)]
pub struct MinusResult {
    pub structure: Structure,
    pub points: BTreeMap<Element, MinusPoint>,
    pub reverse: BTreeMap<MinusPoint, Element>,
    /// The expanded structure's universe (the doubled carrier).
    pub carrier: Vec<Element>,
}

impl MinusResult {
    pub fn pair_id(&self, v: Element, c: Element) -> Option<Element> {
        self.reverse.get(&MinusPoint::Pair(v, c)).copied()
    }
}

/// Decode a meaningful expanded structure: the universe is
/// `(V × C) ∪ E` with plain elements keeping their ids and pairs taking
/// fresh ones, and relations pulled back through the projections.
pub fn minus(data: &InfExpansionData, s: &Structure) -> Result<MinusResult, EliminateError> {
    if !is_meaningful(data, s) {
        return Err(EliminateError::NotMeaningful);
    }
    let c = c_part(data, s);
    let v = v_part(data, s);
    let e = e_part(data, s);
    let mut points: BTreeMap<Element, MinusPoint> = BTreeMap::new();
    let mut reverse: BTreeMap<MinusPoint, Element> = BTreeMap::new();
    for &x in &e {
        points.insert(x, MinusPoint::Plain(x));
        reverse.insert(MinusPoint::Plain(x), x);
    }
    let mut next = s.universe().iter().copied().max().unwrap_or(0) + 1;
    for &vv in &v {
        for &cc in &c {
            points.insert(next, MinusPoint::Pair(vv, cc));
            reverse.insert(MinusPoint::Pair(vv, cc), next);
            next += 1;
        }
    }
    let universe: Vec<Element> = points.keys().copied().collect();

    let pi_v = |p: &MinusPoint| match *p {
        MinusPoint::Pair(v, _) => v,
        MinusPoint::Plain(e) => e,
    };
    let pi_c = |p: &MinusPoint| match *p {
        MinusPoint::Pair(_, c) => c,
        MinusPoint::Plain(e) => e,
    };

    let mut facts: Vec<(SymbolId, Vec<Element>)> = Vec::new();
    let decl = &data.base.eqrels[data.d];
    for (sym, _, arity) in data.base.sig.symbols() {
        if sym == decl.relation {
            // Same class name means related; plain elements relate only to
            // themselves.  A declared domain symbol confines the relation
            // to the pair part.
            for (&a, pa) in &points {
                for (&b, pb) in &points {
                    let in_domain = match data.v_symbol {
                        Some(_) => {
                            matches!(pa, MinusPoint::Pair(..)) && matches!(pb, MinusPoint::Pair(..))
                        }
                        None => true,
                    };
                    if in_domain && pi_c(pa) == pi_c(pb) {
                        facts.push((sym, vec![a, b]));
                    }
                }
            }
            continue;
        }
        let (new_sym, tag) = data.symbol_map[sym].expect("kept symbol");
        match (tag, arity) {
            (SideTag::ClassSide, 1) => {
                for (&a, p) in &points {
                    if s.holds(new_sym, &[pi_c(p)]) {
                        facts.push((sym, vec![a]));
                    }
                }
            }
            (SideTag::ElementSide, 1) => {
                for (&a, p) in &points {
                    if s.holds(new_sym, &[pi_v(p)]) {
                        facts.push((sym, vec![a]));
                    }
                }
            }
            (SideTag::ClassSide, 2) => {
                for (&a, pa) in &points {
                    for (&b, pb) in &points {
                        if s.holds(new_sym, &[pi_c(pa), pi_c(pb)]) {
                            facts.push((sym, vec![a, b]));
                        }
                    }
                }
            }
            (SideTag::ElementSide, 2) => {
                for (&a, pa) in &points {
                    for (&b, pb) in &points {
                        if s.holds(new_sym, &[pi_v(pa), pi_v(pb)]) {
                            facts.push((sym, vec![a, b]));
                        }
                    }
                }
            }
            (SideTag::Doubled, m) => {
                let ids: Vec<Element> = points.keys().copied().collect();
                for tuple in tuples_over(&ids, m) {
                    let mut doubled = Vec::with_capacity(2 * m);
                    for &a in &tuple {
                        let p = &points[&a];
                        doubled.push(pi_v(p));
                        doubled.push(pi_c(p));
                    }
                    if s.holds(new_sym, &doubled) {
                        facts.push((sym, tuple));
                    }
                }
            }
            _ => unreachable!("arity/tag combinations are exhaustive"),
        }
    }
    let structure = Structure::new(Arc::clone(&data.base.sig), universe, facts)
        .expect("decoded facts stay inside the decoded universe");
    Ok(MinusResult {
        structure,
        points,
        reverse,
        carrier: s.universe().to_vec(),
    })
}

/// Build the canonical expanded image of a base member: class names become
/// fresh elements, and the member embeds into the decoding.  Returns the
/// expanded structure, the embedding (base element to decoded pair or plain
/// id) and the decoding itself.
pub fn embed_with_classes(
    data: &InfExpansionData,
    s: &Structure,
) -> Result<(Structure, Injection, MinusResult), EliminateError> {
    if !data.base.contains(s)? {
        return Err(EliminateError::Class(
            crate::classdef::ClassError::SignatureMismatch,
        ));
    }
    let s = saturate(data, s)?;
    let d = data.d;
    let blocks = classes(&data.base, d, &s)?;
    let first_fresh = s.universe().iter().copied().max().unwrap_or(0) + 1;
    let class_id: BTreeMap<Vec<Element>, Element> = blocks
        .iter()
        .zip(first_fresh..)
        .map(|(block, id)| (block[0].clone(), id))
        .collect();
    let id_of = |x: Element| -> Option<Element> {
        blocks
            .iter()
            .find(|b| b.iter().any(|t| t[0] == x))
            .map(|b| class_id[&b[0]])
    };
    let domain_elems: Vec<Element> = data
        .base
        .domain_tuples(d, &s)
        .iter()
        .map(|t| t[0])
        .collect();

    let mut universe: Vec<Element> = s.universe().to_vec();
    universe.extend(class_id.values().copied());
    let mut facts: Vec<(SymbolId, Vec<Element>)> = Vec::new();
    for &cid in class_id.values() {
        facts.push((data.c_symbol, vec![cid]));
    }
    // Representative of each expanded-side element back in the base member:
    // class names take any member of their class.
    let rep = |t: Element| -> Element {
        for (anchor, &cid) in &class_id {
            if cid == t {
                return anchor[0];
            }
        }
        t
    };
    for (sym, _, arity) in data.base.sig.symbols() {
        if sym == data.base.eqrels[d].relation {
            continue;
        }
        let (new_sym, tag) = data.symbol_map[sym].expect("kept symbol");
        match (tag, arity) {
            (SideTag::ClassSide, 1) => {
                for block in &blocks {
                    let members: Vec<Element> = block.iter().map(|t| t[0]).collect();
                    if !members.is_empty() && members.iter().all(|&x| s.holds(sym, &[x])) {
                        facts.push((new_sym, vec![class_id[&block[0]]]));
                    }
                }
            }
            (SideTag::ElementSide, 1) => {
                for t in s.tuples(sym) {
                    facts.push((new_sym, t.clone()));
                }
            }
            (SideTag::ClassSide, 2) => {
                // On class names and plain elements, through representatives.
                let mut side: Vec<Element> = class_id.values().copied().collect();
                side.extend(
                    s.universe()
                        .iter()
                        .copied()
                        .filter(|x| !domain_elems.contains(x)),
                );
                for &a in &side {
                    for &b in &side {
                        if s.holds(sym, &[rep(a), rep(b)]) {
                            facts.push((new_sym, vec![a, b]));
                        }
                    }
                }
            }
            (SideTag::ElementSide, 2) => {
                for t in s.tuples(sym) {
                    facts.push((new_sym, t.clone()));
                }
            }
            (SideTag::Doubled, _m) => {
                for t in s.tuples(sym) {
                    let mut doubled = Vec::with_capacity(2 * t.len());
                    for &x in t {
                        match id_of(x) {
                            Some(cid) if domain_elems.contains(&x) => {
                                doubled.push(x);
                                doubled.push(cid);
                            }
                            _ => {
                                doubled.push(x);
                                doubled.push(x);
                            }
                        }
                    }
                    facts.push((new_sym, doubled));
                }
            }
            _ => unreachable!(),
        }
    }
    let expanded = Structure::new(Arc::clone(&data.expanded_sig), universe, facts)
        .expect("expanded facts stay inside the expanded universe");
    let decoded = minus(data, &expanded)?;
    let mut pairs = Vec::with_capacity(s.size());
    for &x in s.universe() {
        let target = if domain_elems.contains(&x) {
            decoded
                .pair_id(x, id_of(x).expect("domain element has a class"))
                .expect("pair in decoded universe")
        } else {
            x
        };
        pairs.push((x, target));
    }
    let pi = Injection::from_pairs(pairs).expect("distinct targets");
    Ok((expanded, pi, decoded))
}

/// The preamble conditions on the member before classes are named: every
/// star-related, non-equivalent pair needs a same-class stand-in with the
/// same element-side unary profile, and element-side class-defining
/// relations need spare classes.  Implemented as bounded one-point
/// extension search; fixtures without element-side structure need nothing.
fn saturate(data: &InfExpansionData, s: &Structure) -> Result<Structure, EliminateError> {
    let d = data.d;
    let element_side_unaries: Vec<SymbolId> = data
        .base
        .sig
        .symbols()
        .filter(|(sym, _, arity)| {
            *arity == 1
                && data.symbol_map[*sym]
                    .map(|(new_sym, tag)| {
                        tag == SideTag::ElementSide && data.v_symbol != Some(new_sym)
                    })
                    .unwrap_or(false)
        })
        .map(|(sym, _, _)| sym)
        .collect();
    if element_side_unaries.is_empty() {
        return Ok(s.clone());
    }
    let mut current = s.clone();
    let cap = s.size() + 4;
    loop {
        let Some((v, w)) = needs_standin(data, &current, &element_side_unaries)? else {
            return Ok(current);
        };
        if current.size() >= cap {
            return Err(EliminateError::SaturationBound(cap));
        }
        let profile: Vec<bool> = element_side_unaries
            .iter()
            .map(|&p| current.holds(p, &[v]))
            .collect();
        let fresh = current.universe().iter().copied().max().unwrap_or(0) + 1;
        let mut universe = current.universe().to_vec();
        universe.push(fresh);
        let mut fixed = Vec::new();
        for (sym, _, arity) in data.base.sig.symbols() {
            for tuple in tuples_over(current.universe(), arity) {
                fixed.push(((sym, tuple.clone()), current.holds(sym, &tuple)));
            }
        }
        // Pin the stand-in: same class as w, matching unary profile.
        fixed.push(((data.base.eqrels[d].relation, vec![fresh, w]), true));
        for (&p, &val) in element_side_unaries.iter().zip(profile.iter()) {
            fixed.push(((p, vec![fresh]), val));
        }
        let problem = SearchProblem::for_class(&data.base, universe, fixed);
        match problem.first_solution() {
            Some(extended) => current = extended,
            None => return Err(EliminateError::SaturationBound(cap)),
        }
    }
}

fn needs_standin(
    data: &InfExpansionData,
    s: &Structure,
    unaries: &[SymbolId],
) -> Result<Option<(Element, Element)>, EliminateError> {
    let d = data.d;
    let dom: Vec<Element> = data.base.domain_tuples(d, s).iter().map(|t| t[0]).collect();
    for &v in &dom {
        for &w in &dom {
            let star_related = match data.base.eqrels[d].star {
                StarRef::Trivial => true,
                StarRef::Earlier(q) => data.base.related(q, s, &[v], &[w]),
            };
            if !star_related || data.base.related(d, s, &[v], &[w]) {
                continue;
            }
            let found = dom.iter().any(|&u| {
                data.base.related(d, s, &[u], &[w])
                    && unaries.iter().all(|&p| s.holds(p, &[u]) == s.holds(p, &[v]))
            });
            if !found {
                return Ok(Some((v, w)));
            }
        }
    }
    Ok(None)
}

/// The doubled signature: one `2m`-ary symbol per `m`-ary symbol.
pub fn dbl_signature(sig: &Arc<Signature>) -> Arc<Signature> {
    let symbols = sig
        .symbols()
        .map(|(_, name, arity)| (name.to_string(), 2 * arity))
        .collect();
    Arc::new(Signature::new(symbols).expect("doubling keeps names distinct"))
}

/// Transport an output structure over the decoded universe to the doubled
/// signature over the expanded carrier.
pub fn dbl_structure(
    t: &Structure,
    dbl_sig: &Arc<Signature>,
    carrier: &MinusResult,
) -> Result<Structure, EliminateError> {
    if t.universe() != carrier.structure.universe() {
        return Err(EliminateError::CarrierMismatch);
    }
    let mut facts: Vec<(SymbolId, Vec<Element>)> = Vec::new();
    for (sym, _, _) in t.sig().symbols() {
        for tuple in t.tuples(sym) {
            let mut doubled = Vec::with_capacity(tuple.len() * 2);
            for &a in tuple {
                match carrier.points[&a] {
                    MinusPoint::Pair(v, c) => {
                        doubled.push(v);
                        doubled.push(c);
                    }
                    MinusPoint::Plain(e) => {
                        doubled.push(e);
                        doubled.push(e);
                    }
                }
            }
            facts.push((sym, doubled));
        }
    }
    Ok(
        Structure::new(Arc::clone(dbl_sig), carrier.carrier.clone(), facts)
            .expect("doubled facts stay inside the carrier"),
    )
}

/// Invert the doubling: a doubled structure over the carrier decodes to a
/// structure over the decoded universe.
pub fn minus_dbl(
    t_dbl: &Structure,
    target_sig: &Arc<Signature>,
    carrier: &MinusResult,
) -> Result<Structure, EliminateError> {
    if t_dbl.universe() != carrier.carrier {
        return Err(EliminateError::CarrierMismatch);
    }
    let ids: Vec<Element> = carrier.structure.universe().to_vec();
    let mut facts: Vec<(SymbolId, Vec<Element>)> = Vec::new();
    for (sym, _, arity) in target_sig.symbols() {
        for tuple in tuples_over(&ids, arity) {
            let mut doubled = Vec::with_capacity(2 * arity);
            for &a in &tuple {
                match carrier.points[&a] {
                    MinusPoint::Pair(v, c) => {
                        doubled.push(v);
                        doubled.push(c);
                    }
                    MinusPoint::Plain(e) => {
                        doubled.push(e);
                        doubled.push(e);
                    }
                }
            }
            if t_dbl.holds(sym, &doubled) {
                facts.push((sym, tuple));
            }
        }
    }
    Ok(Structure::new(Arc::clone(target_sig), ids, facts)
        .expect("decoded facts stay inside the decoded universe"))
}
