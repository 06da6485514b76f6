//! Backtracking completion search over the fact space of a universe.
//!
//! Shared by enumeration, amalgam search and the elimination transforms.
//! Grounded constraint instances prune partial assignments (sound, never
//! complete); the class membership oracle decides leaves.  Derived pruning
//! instances are generated for length-1 equivalence declarations: class
//! count bounds become pigeonhole clauses and star nesting becomes an
//! implication, both of which cut search trees hard.

use std::collections::BTreeMap;

use crate::classdef::{ClassSpec, DomainRef, EqClassCount, Formula, StarRef};
use crate::relstruct::{tuples_over, Element, Structure, SymbolId};

/// Kleene three-valued truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tv {
    False,
    True,
    Unknown,
}

impl From<bool> for Tv {
    fn from(b: bool) -> Self {
        if b {
            Tv::True
        } else {
            Tv::False
        }
    }
}

impl std::ops::Not for Tv {
    type Output = Tv;

    fn not(self) -> Tv {
        match self {
            Tv::True => Tv::False,
            Tv::False => Tv::True,
            Tv::Unknown => Tv::Unknown,
        }
    }
}

impl Tv {
    pub fn and(self, other: Tv) -> Tv {
        match (self, other) {
            (Tv::False, _) | (_, Tv::False) => Tv::False,
            (Tv::True, Tv::True) => Tv::True,
            _ => Tv::Unknown,
        }
    }

    pub fn or(self, other: Tv) -> Tv {
        match (self, other) {
            (Tv::True, _) | (_, Tv::True) => Tv::True,
            (Tv::False, Tv::False) => Tv::False,
            _ => Tv::Unknown,
        }
    }

    pub fn iff(self, other: Tv) -> Tv {
        match (self, other) {
            (Tv::Unknown, _) | (_, Tv::Unknown) => Tv::Unknown,
            (a, b) => Tv::from(a == b),
        }
    }
}

/// A grounded constraint instance: a formula index plus a variable
/// assignment.
struct Instance {
    formula: usize,
    assignment: Vec<Element>,
}

/// Grounded constraints over a fixed universe.
pub struct Grounding {
    formulas: Vec<Formula>,
    instances: Vec<Instance>,
    /// atom id -> instances mentioning it
    by_atom: Vec<Vec<usize>>,
}

/// All (symbol, tuple) atoms over a universe, in canonical order.
pub struct FactSpace {
    pub atoms: Vec<(SymbolId, Vec<Element>)>,
    index: BTreeMap<(SymbolId, Vec<Element>), usize>,
}

impl FactSpace {
    pub fn new(spec: &ClassSpec, universe: &[Element]) -> Self {
        let mut atoms = Vec::new();
        for (sym, _, arity) in spec.sig.symbols() {
            for tuple in tuples_over(universe, arity) {
                atoms.push((sym, tuple));
            }
        }
        let index = atoms
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        FactSpace { atoms, index }
    }

    pub fn atom_id(&self, sym: SymbolId, tuple: &[Element]) -> Option<usize> {
        self.index.get(&(sym, tuple.to_vec())).copied()
    }
}

/// Ground a spec's constraints (plus derived pruning clauses) over a
/// universe.
pub fn ground_constraints(spec: &ClassSpec, universe: &[Element]) -> Grounding {
    let mut formulas: Vec<Formula> = Vec::new();
    let mut templates: Vec<(usize, usize)> = Vec::new(); // (formula, var count)
    for c in &spec.constraints {
        templates.push((formulas.len(), c.var_count()));
        formulas.push(c.body.clone());
    }
    // Derived clauses for length-1 declarations.
    for decl in &spec.eqrels {
        if decl.length != 1 {
            continue;
        }
        let rel = decl.relation;
        let guard = |var: usize| match decl.domain {
            DomainRef::All => Formula::True,
            DomainRef::Symbol(v) => Formula::Atom(v, vec![var]),
        };
        // Pigeonhole for small finite counts: among any c+1 domain
        // elements, some pair is related or some pair is equal.
        if let EqClassCount::Finite(c) = decl.count {
            if (c as usize) <= 4 {
                let m = c as usize + 1;
                let mut disj = Formula::False;
                for i in 0..m {
                    for j in (i + 1)..m {
                        disj = Formula::Or(
                            Box::new(disj),
                            Box::new(Formula::Or(
                                Box::new(Formula::Eq(i, j)),
                                Box::new(Formula::Atom(rel, vec![i, j])),
                            )),
                        );
                    }
                }
                let mut body = disj;
                for i in 0..m {
                    body = Formula::Implies(Box::new(guard(i)), Box::new(body));
                }
                templates.push((formulas.len(), m));
                formulas.push(body);
            }
        }
        // Star nesting as an implication on pairs.
        if let StarRef::Earlier(q) = decl.star {
            let star_rel = spec.eqrels[q].relation;
            let body = Formula::Implies(
                Box::new(Formula::And(
                    Box::new(Formula::And(Box::new(guard(0)), Box::new(guard(1)))),
                    Box::new(Formula::Atom(rel, vec![0, 1])),
                )),
                Box::new(Formula::Atom(star_rel, vec![0, 1])),
            );
            templates.push((formulas.len(), 2));
            formulas.push(body);
        }
    }

    let space = FactSpace::new(spec, universe);
    let mut instances = Vec::new();
    let mut by_atom = vec![Vec::new(); space.atoms.len()];
    for (fidx, var_count) in templates {
        if universe.is_empty() && var_count > 0 {
            continue;
        }
        for assignment in tuples_over(universe, var_count) {
            let mut ground = Vec::new();
            formulas[fidx].ground_atoms(&assignment, &mut ground);
            let mut atoms: Vec<usize> = ground
                .iter()
                .filter_map(|(sym, tuple)| space.atom_id(*sym, tuple))
                .collect();
            atoms.sort_unstable();
            atoms.dedup();
            let idx = instances.len();
            for &a in &atoms {
                by_atom[a].push(idx);
            }
            instances.push(Instance {
                formula: fidx,
                assignment,
            });
        }
    }
    Grounding {
        formulas,
        instances,
        by_atom,
    }
}

/// A completion search problem: find structures on `universe` extending the
/// fixed facts that the class accepts.
pub struct SearchProblem<'a> {
    spec: &'a ClassSpec,
    universe: Vec<Element>,
    space: FactSpace,
    grounding: Grounding,
    fixed: Vec<(usize, bool)>,
    contradictory: bool,
}

impl<'a> SearchProblem<'a> {
    pub fn for_class(
        spec: &'a ClassSpec,
        universe: Vec<Element>,
        fixed: Vec<((SymbolId, Vec<Element>), bool)>,
    ) -> Self {
        let space = FactSpace::new(spec, &universe);
        let grounding = ground_constraints(spec, &universe);
        let mut contradictory = false;
        let mut seen: BTreeMap<usize, bool> = BTreeMap::new();
        for ((sym, tuple), val) in fixed {
            match space.atom_id(sym, &tuple) {
                Some(id) => {
                    if let Some(&prev) = seen.get(&id) {
                        if prev != val {
                            contradictory = true;
                        }
                    } else {
                        seen.insert(id, val);
                    }
                }
                None => contradictory = true,
            }
        }
        SearchProblem {
            spec,
            universe,
            space,
            grounding,
            fixed: seen.into_iter().collect(),
            contradictory,
        }
    }

    fn run(&self, mut on_solution: impl FnMut(Structure) -> bool) {
        if self.contradictory {
            return;
        }
        let n = self.space.atoms.len();
        let mut assign: Vec<Tv> = vec![Tv::Unknown; n];
        for &(id, val) in &self.fixed {
            assign[id] = Tv::from(val);
        }
        for inst in &self.grounding.instances {
            if self.eval_instance(inst, &assign) == Tv::False {
                return;
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| assign[i] == Tv::Unknown).collect();
        self.dfs(&free, 0, &mut assign, &mut on_solution);
    }

    fn dfs(
        &self,
        free: &[usize],
        depth: usize,
        assign: &mut Vec<Tv>,
        on_solution: &mut impl FnMut(Structure) -> bool,
    ) -> bool {
        if depth == free.len() {
            let s = self.build(assign);
            if self.spec.contains(&s).unwrap_or(false) {
                return on_solution(s);
            }
            return true;
        }
        let atom = free[depth];
        for val in [Tv::True, Tv::False] {
            assign[atom] = val;
            let ok = self.grounding.by_atom[atom]
                .iter()
                .all(|&i| self.eval_instance(&self.grounding.instances[i], assign) != Tv::False);
            if ok && !self.dfs(free, depth + 1, assign, on_solution) {
                assign[atom] = Tv::Unknown;
                return false;
            }
            assign[atom] = Tv::Unknown;
        }
        true
    }

    fn eval_instance(&self, inst: &Instance, assign: &[Tv]) -> Tv {
        self.grounding.formulas[inst.formula].eval_tv(&inst.assignment, &mut |sym, tuple| {
            match self.space.atom_id(sym, tuple) {
                Some(id) => assign[id],
                None => Tv::False,
            }
        })
    }

    fn build(&self, assign: &[Tv]) -> Structure {
        let facts = self
            .space
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| assign[*i] == Tv::True)
            .map(|(_, (sym, tuple))| (*sym, tuple.clone()));
        Structure::new(
            std::sync::Arc::clone(&self.spec.sig),
            self.universe.clone(),
            facts,
        )
        .expect("atoms lie in the universe")
    }

    /// All accepted completions, unsorted.
    pub fn all_solutions(&self) -> Vec<Structure> {
        let mut out = Vec::new();
        self.run(|s| {
            out.push(s);
            true
        });
        out
    }

    /// The canonically least accepted completion, if any.
    pub fn first_solution(&self) -> Option<Structure> {
        self.all_solutions()
            .into_iter()
            .min_by_key(|s| s.canonical_form())
    }

    /// Any accepted completion, stopping at the first one found.
    pub fn any_solution(&self) -> Option<Structure> {
        self.any_solution_where(|_| true)
    }

    /// Any accepted completion passing the extra filter, stopping early.
    pub fn any_solution_where(&self, accept: impl Fn(&Structure) -> bool) -> Option<Structure> {
        let mut found = None;
        self.run(|s| {
            if accept(&s) {
                found = Some(s);
                false
            } else {
                true
            }
        });
        found
    }
}
