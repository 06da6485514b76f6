//! Finite relational structures: signatures, quantifier-free types,
//! restrictions, injection pullbacks, embeddings, isomorphism and canonical
//! byte encodings.
//!
//! Elements are small non-negative integers.  Universes are explicit sorted
//! sets rather than ranges because the elimination transforms build
//! composite universes with gaps.  Relation interpretations are sorted tuple
//! sets so that iteration order (and hence every encoding) is canonical.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// An element of a universe.
pub type Element = u32;

/// Index of a relation symbol within its [`Signature`].
pub type SymbolId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("element {0} is not in the universe")]
    ElementNotInUniverse(Element),
    #[error("map is not injective on its domain")]
    NotInjective,
    #[error("injection domain does not equal the structure universe")]
    DomainMismatch,
    #[error("structures use different signatures")]
    SignatureMismatch,
    #[error("unknown relation symbol `{0}`")]
    UnknownSymbol(String),
    #[error("symbol `{name}` expects arity {expected}, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("malformed structure text: {0}")]
    Parse(String),
}

/// A finite relational signature: an ordered list of symbols with arities.
/// The list order is canonical and used by every encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    symbols: Vec<(String, usize)>,
}

impl Signature {
    /// Build a signature, checking that names are pairwise distinct and
    /// every arity is at least 1.
    pub fn new(symbols: Vec<(String, usize)>) -> Result<Self, StructureError> {
        for (i, (name, arity)) in symbols.iter().enumerate() {
            if *arity == 0 {
                return Err(StructureError::ArityMismatch {
                    name: name.clone(),
                    expected: 1,
                    got: 0,
                });
            }
            if symbols[..i].iter().any(|(n, _)| n == name) {
                return Err(StructureError::UnknownSymbol(format!(
                    "duplicate symbol `{name}`"
                )));
            }
        }
        Ok(Signature { symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn name(&self, id: SymbolId) -> &str {
        &self.symbols[id].0
    }

    pub fn arity(&self, id: SymbolId) -> usize {
        self.symbols[id].1
    }

    pub fn lookup(&self, name: &str) -> Option<SymbolId> {
        self.symbols.iter().position(|(n, _)| n == name)
    }

    pub fn symbols(&self) -> impl Iterator<Item = (SymbolId, &str, usize)> {
        self.symbols
            .iter()
            .enumerate()
            .map(|(i, (n, a))| (i, n.as_str(), *a))
    }
}

/// A finite structure: a universe together with one sorted tuple set per
/// signature symbol.  Immutable after construction.
#[derive(Debug, Clone)]
pub struct Structure {
    sig: Arc<Signature>,
    universe: Vec<Element>,
    interp: Vec<BTreeSet<Vec<Element>>>,
}

impl PartialEq for Structure {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.sig, &other.sig) || self.sig == other.sig)
            && self.universe == other.universe
            && self.interp == other.interp
    }
}

impl Eq for Structure {}

impl Structure {
    /// An empty interpretation over the given universe.
    pub fn empty(sig: Arc<Signature>, mut universe: Vec<Element>) -> Self {
        universe.sort_unstable();
        universe.dedup();
        let interp = vec![BTreeSet::new(); sig.len()];
        Structure {
            sig,
            universe,
            interp,
        }
    }

    /// Build a structure from explicit facts, validating arities and
    /// universe membership.
    pub fn new(
        sig: Arc<Signature>,
        universe: Vec<Element>,
        facts: impl IntoIterator<Item = (SymbolId, Vec<Element>)>,
    ) -> Result<Self, StructureError> {
        let mut s = Structure::empty(sig, universe);
        for (sym, tuple) in facts {
            s.insert_fact(sym, tuple)?;
        }
        Ok(s)
    }

    fn insert_fact(&mut self, sym: SymbolId, tuple: Vec<Element>) -> Result<(), StructureError> {
        let arity = self.sig.arity(sym);
        if tuple.len() != arity {
            return Err(StructureError::ArityMismatch {
                name: self.sig.name(sym).to_string(),
                expected: arity,
                got: tuple.len(),
            });
        }
        for &x in &tuple {
            if !self.contains_element(x) {
                return Err(StructureError::ElementNotInUniverse(x));
            }
        }
        self.interp[sym].insert(tuple);
        Ok(())
    }

    pub fn sig(&self) -> &Arc<Signature> {
        &self.sig
    }

    pub fn universe(&self) -> &[Element] {
        &self.universe
    }

    pub fn size(&self) -> usize {
        self.universe.len()
    }

    pub fn contains_element(&self, x: Element) -> bool {
        self.universe.binary_search(&x).is_ok()
    }

    pub fn tuples(&self, sym: SymbolId) -> impl Iterator<Item = &Vec<Element>> {
        self.interp[sym].iter()
    }

    pub fn holds(&self, sym: SymbolId, tuple: &[Element]) -> bool {
        self.interp[sym].contains(tuple)
    }

    pub fn fact_count(&self) -> usize {
        self.interp.iter().map(|t| t.len()).sum()
    }

    /// All facts in canonical (symbol, tuple) order.
    pub fn facts(&self) -> impl Iterator<Item = (SymbolId, &Vec<Element>)> {
        self.interp
            .iter()
            .enumerate()
            .flat_map(|(sym, set)| set.iter().map(move |t| (sym, t)))
    }

    /// The quantifier-free type of `s`: exactly the facts whose tuple range
    /// lies inside `s`.
    pub fn qf_type(&self, s: &[Element]) -> Result<QfType, StructureError> {
        let carrier = sorted_subset(s, self)?;
        let mut facts = BTreeSet::new();
        for (sym, set) in self.interp.iter().enumerate() {
            for tuple in set {
                if tuple.iter().all(|x| carrier.binary_search(x).is_ok()) {
                    facts.insert((sym, tuple.clone()));
                }
            }
        }
        Ok(QfType { carrier, facts })
    }

    /// The restriction of the structure to `s`.
    pub fn restrict(&self, s: &[Element]) -> Result<Structure, StructureError> {
        let carrier = sorted_subset(s, self)?;
        let mut interp = vec![BTreeSet::new(); self.sig.len()];
        for (sym, set) in self.interp.iter().enumerate() {
            for tuple in set {
                if tuple.iter().all(|x| carrier.binary_search(x).is_ok()) {
                    interp[sym].insert(tuple.clone());
                }
            }
        }
        Ok(Structure {
            sig: Arc::clone(&self.sig),
            universe: carrier,
            interp,
        })
    }

    /// Pull the structure back along an injection: the result lives on the
    /// injection's domain, and `R(x⃗)` holds there iff `R(φ(x⃗))` holds here.
    pub fn pullback(&self, phi: &Injection) -> Result<Structure, StructureError> {
        if !phi.is_injective() {
            return Err(StructureError::NotInjective);
        }
        for (_, &y) in phi.iter() {
            if !self.contains_element(y) {
                return Err(StructureError::ElementNotInUniverse(y));
            }
        }
        let domain: Vec<Element> = phi.domain().collect();
        let mut out = Structure::empty(Arc::clone(&self.sig), domain);
        for (sym, set) in self.interp.iter().enumerate() {
            let arity = self.sig.arity(sym);
            for tuple in tuples_over(&out.universe, arity) {
                let image: Vec<Element> = tuple.iter().map(|&x| phi.apply(x).unwrap()).collect();
                if set.contains(&image) {
                    out.interp[sym].insert(tuple);
                }
            }
        }
        Ok(out)
    }

    /// Is `phi` an embedding of `self` into `big`?  Requires
    /// `domain(phi) = universe(self)`.
    pub fn is_embedding_into(&self, phi: &Injection, big: &Structure) -> Result<bool, StructureError> {
        if self.sig != big.sig && !Arc::ptr_eq(&self.sig, &big.sig) {
            return Err(StructureError::SignatureMismatch);
        }
        let dom: Vec<Element> = phi.domain().collect();
        if dom != self.universe {
            return Err(StructureError::DomainMismatch);
        }
        Ok(big.pullback(phi)? == *self)
    }

    /// Relabel through a total injection (panics if the map misses an
    /// element); used internally by enumeration helpers.
    pub fn relabel(&self, phi: &Injection) -> Structure {
        let universe: Vec<Element> = self.universe.iter().map(|&x| phi.apply(x).unwrap()).collect();
        let mut out = Structure::empty(Arc::clone(&self.sig), universe);
        for (sym, set) in self.interp.iter().enumerate() {
            for tuple in set {
                let img: Vec<Element> = tuple.iter().map(|&x| phi.apply(x).unwrap()).collect();
                out.interp[sym].insert(img);
            }
        }
        out
    }

    /// Canonical labeled encoding.  Fixed-width binary so byte order agrees
    /// with numeric fact order:
    ///
    /// ```text
    /// [n: u32 BE] [element: u32 BE]*n  then per fact, in (symbol, tuple)
    /// order: [symbol: u16 BE] [component: u32 BE]*arity
    /// ```
    pub fn canonical_form(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 4 * self.universe.len() + 8 * self.fact_count());
        out.extend_from_slice(&(self.universe.len() as u32).to_be_bytes());
        for &x in &self.universe {
            out.extend_from_slice(&x.to_be_bytes());
        }
        for (sym, set) in self.interp.iter().enumerate() {
            for tuple in set {
                out.extend_from_slice(&(sym as u16).to_be_bytes());
                for &x in tuple {
                    out.extend_from_slice(&x.to_be_bytes());
                }
            }
        }
        out
    }

    /// Isomorphism-canonical encoding: relabel the universe to `1..=n` in
    /// every possible way and keep the lexicographically least labeled
    /// encoding.  Exhaustive relabeling; universes stay small here.
    pub fn iso_canonical_form(&self) -> Vec<u8> {
        let n = self.universe.len();
        let targets: Vec<Element> = (1..=n as Element).collect();
        let mut best: Option<Vec<u8>> = None;
        for perm in permutations(&targets) {
            let phi = Injection::from_pairs(
                self.universe.iter().copied().zip(perm.iter().copied()),
            )
            .unwrap();
            let enc = self.relabel(&phi).canonical_form();
            if best.as_ref().is_none_or(|b| enc < *b) {
                best = Some(enc);
            }
        }
        best.unwrap_or_else(|| self.canonical_form())
    }

    /// List all embeddings of `small` into `self`, in lexicographic order of
    /// the image sequence (images of `small`'s universe in sorted order).
    pub fn embeddings_from(&self, small: &Structure) -> Vec<Injection> {
        let mut out = Vec::new();
        let dom = small.universe.to_vec();
        if dom.len() > self.universe.len() {
            return out;
        }
        let mut image: Vec<Element> = Vec::with_capacity(dom.len());
        self.embed_rec(small, &dom, &mut image, &mut out);
        out
    }

    fn embed_rec(
        &self,
        small: &Structure,
        dom: &[Element],
        image: &mut Vec<Element>,
        out: &mut Vec<Injection>,
    ) {
        let k = image.len();
        if k == dom.len() {
            out.push(
                Injection::from_pairs(dom.iter().copied().zip(image.iter().copied())).unwrap(),
            );
            return;
        }
        'cand: for &y in &self.universe {
            if image.contains(&y) {
                continue;
            }
            image.push(y);
            // Partial check: every fact of small among dom[..=k] must map to
            // a fact of self, and conversely.
            let placed = &dom[..=k];
            for (sym, set) in small.interp.iter().enumerate() {
                let arity = small.sig.arity(sym);
                for tuple in tuples_over(placed, arity) {
                    if !tuple.contains(&dom[k]) {
                        continue;
                    }
                    let img: Vec<Element> = tuple
                        .iter()
                        .map(|x| image[dom.iter().position(|d| d == x).unwrap()])
                        .collect();
                    if set.contains(&tuple) != self.interp[sym].contains(&img) {
                        image.pop();
                        continue 'cand;
                    }
                }
            }
            self.embed_rec(small, dom, image, out);
            image.pop();
        }
    }

    /// First bijective embedding between `self` and `other` in lexicographic
    /// order, if the structures are isomorphic.
    pub fn isomorphism_to(&self, other: &Structure) -> Option<Injection> {
        if self.sig != other.sig && !Arc::ptr_eq(&self.sig, &other.sig) {
            return None;
        }
        if self.universe.len() != other.universe.len() {
            return None;
        }
        other
            .embeddings_from(self)
            .into_iter()
            .next()
    }

    /// Line-oriented text encoding: `universe: e1 e2 ...` then one line per
    /// fact `R a b c`, facts in canonical order.  Bit-exact round trip with
    /// [`Structure::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::from("universe:");
        for &x in &self.universe {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
        for (sym, tuple) in self.facts() {
            out.push_str(self.sig.name(sym));
            for &x in tuple {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parse the line-oriented text encoding against a known signature.
    pub fn parse(sig: Arc<Signature>, text: &str) -> Result<Structure, StructureError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| StructureError::Parse("empty input".into()))?;
        let rest = header
            .strip_prefix("universe:")
            .ok_or_else(|| StructureError::Parse("missing `universe:` header".into()))?;
        let universe = rest
            .split_whitespace()
            .map(|w| {
                w.parse::<Element>()
                    .map_err(|_| StructureError::Parse(format!("bad element `{w}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut s = Structure::empty(sig, universe);
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let name = words.next().unwrap();
            let sym = s
                .sig
                .lookup(name)
                .ok_or_else(|| StructureError::UnknownSymbol(name.to_string()))?;
            let tuple = words
                .map(|w| {
                    w.parse::<Element>()
                        .map_err(|_| StructureError::Parse(format!("bad element `{w}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            s.insert_fact(sym, tuple)?;
        }
        Ok(s)
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// The quantifier-free type of a set: a carrier plus the raw fact set over it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QfType {
    pub carrier: Vec<Element>,
    pub facts: BTreeSet<(SymbolId, Vec<Element>)>,
}

/// A finite partial injection between element sets, stored as a sorted map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pairs: Vec<(Element, Element)>,
}

impl Injection {
    pub fn identity(on: &[Element]) -> Self {
        Injection {
            pairs: on.iter().map(|&x| (x, x)).collect(),
        }
    }

    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (Element, Element)>,
    ) -> Result<Self, StructureError> {
        let mut pairs: Vec<(Element, Element)> = pairs.into_iter().collect();
        pairs.sort_unstable();
        pairs.dedup();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(StructureError::NotInjective);
            }
        }
        let inj = Injection { pairs };
        if !inj.is_injective() {
            return Err(StructureError::NotInjective);
        }
        Ok(inj)
    }

    pub fn is_injective(&self) -> bool {
        let mut images: Vec<Element> = self.pairs.iter().map(|&(_, y)| y).collect();
        images.sort_unstable();
        images.windows(2).all(|w| w[0] != w[1])
    }

    pub fn apply(&self, x: Element) -> Option<Element> {
        self.pairs
            .binary_search_by_key(&x, |&(a, _)| a)
            .ok()
            .map(|i| self.pairs[i].1)
    }

    pub fn domain(&self) -> impl Iterator<Item = Element> + '_ {
        self.pairs.iter().map(|&(x, _)| x)
    }

    pub fn image(&self) -> impl Iterator<Item = Element> + '_ {
        self.pairs.iter().map(|&(_, y)| y)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Element, &Element)> {
        self.pairs.iter().map(|(a, b)| (a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Injection) -> Option<Injection> {
        let mut pairs = Vec::with_capacity(other.len());
        for (&x, &y) in other.iter() {
            pairs.push((x, self.apply(y)?));
        }
        Injection::from_pairs(pairs).ok()
    }
}

fn sorted_subset(s: &[Element], of: &Structure) -> Result<Vec<Element>, StructureError> {
    let mut carrier = s.to_vec();
    carrier.sort_unstable();
    carrier.dedup();
    for &x in &carrier {
        if !of.contains_element(x) {
            return Err(StructureError::ElementNotInUniverse(x));
        }
    }
    Ok(carrier)
}

/// All tuples of the given arity over `elements` (with repetition), in
/// lexicographic order.
pub fn tuples_over(elements: &[Element], arity: usize) -> Vec<Vec<Element>> {
    let mut out = Vec::new();
    if arity == 0 {
        out.push(Vec::new());
        return out;
    }
    if elements.is_empty() {
        return out;
    }
    let mut idx = vec![0usize; arity];
    loop {
        out.push(idx.iter().map(|&i| elements[i]).collect());
        let mut k = arity;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < elements.len() {
                break;
            }
            idx[k] = 0;
            if k == 0 {
                return out;
            }
        }
    }
}

/// All permutations of a slice, in lexicographic order.
pub fn permutations<T: Clone + Ord>(items: &[T]) -> Vec<Vec<T>> {
    let mut sorted = items.to_vec();
    sorted.sort();
    let mut out = Vec::new();
    permute_rec(&mut Vec::new(), &sorted, &mut out);
    out
}

fn permute_rec<T: Clone + Ord>(prefix: &mut Vec<T>, rest: &[T], out: &mut Vec<Vec<T>>) {
    if rest.is_empty() {
        out.push(prefix.clone());
        return;
    }
    for i in 0..rest.len() {
        prefix.push(rest[i].clone());
        let mut next = rest.to_vec();
        next.remove(i);
        permute_rec(prefix, &next, out);
        prefix.pop();
    }
}
