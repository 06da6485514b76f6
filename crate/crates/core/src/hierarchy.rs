//! Hierarchical index structures on finite grids: prefix-agreement
//! relations, the bijection between blurs of a point and initial segments of
//! its coordinates, real-valued encoding through unary digit predicates, and
//! samplers for hierarchically exchangeable arrays with an invariance
//! verifier.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::classdef::{ClassSpec, Constraint, EqClassCount, EqRelDecl, Formula, StarRef};
use crate::equiv::{Blur, ClassHandle, HandleKind};
use crate::relstruct::{Element, Signature, Structure, SymbolId};
use crate::sampler::RandomnessSource;
use crate::stats::{verdict, ComparisonVerdict, EmpiricalDist};

const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("grid of {0} points exceeds the cap of {MAX_GRID_POINTS}")]
    GridTooLarge(usize),
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("blur lies outside the stated correspondence domain")]
    BlurOutsideDomain,
    #[error("segment is not a prefix within bounds")]
    BadSegment,
    #[error("unknown mix `{0}`")]
    UnknownMix(String),
    #[error("precision must lie in 1..=53")]
    BadPrecision,
}

/// A grid point: one coordinate sequence per level, plus the extra free
/// coordinate in the product case.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct IndexPoint {
    pub levels: Vec<Vec<u32>>,
    pub plus: Option<u32>,
}

/// Per level, a (possibly empty) prefix of the point's coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Segment(pub Vec<Vec<u32>>);

impl Segment {
    /// PRF key: level count, then per level a length-prefixed coordinate
    /// list.
    pub fn key(&self) -> Vec<u8> {
        let mut out = vec![b's', b'e', b'g', b':', self.0.len() as u8];
        for level in &self.0 {
            out.push(level.len() as u8);
            for &c in level {
                out.extend_from_slice(&c.to_be_bytes());
            }
            out.push(b';');
        }
        out
    }
}

/// A generated hierarchical index structure: the grid member together with
/// the class it belongs to and the point table.
#[derive(Debug, Clone)]
pub struct ApStructure {
    pub spec: ClassSpec,
    pub structure: Structure,
    pub depths: Vec<usize>,
    pub bounds: Vec<u32>,
    pub plus_bound: Option<u32>,
    pub points: BTreeMap<Element, IndexPoint>,
    /// Symbol of the prefix-agreement relation per (level, depth), where
    /// depth `i` means agreement on the first `i` coordinates.
    pub relations: BTreeMap<(usize, usize), SymbolId>,
}

/// Single-level index structure on a depth-`r` grid with a uniform
/// per-coordinate bound: relations `R_1, …, R_{r-1}` relate points agreeing
/// on their first `i` coordinates.
pub fn build_ap_structure(r: usize, bound: u32) -> Result<ApStructure, HierarchyError> {
    build(&[r], bound, None)
}

/// Product index structure over levels of the given depths with the extra
/// free coordinate: relations for every level and depth `1..=r_m`.
pub fn build_ap_product(
    depths: &[usize],
    bound: u32,
    plus_bound: u32,
) -> Result<ApStructure, HierarchyError> {
    build(depths, bound, Some(plus_bound))
}

fn build(
    depths: &[usize],
    bound: u32,
    plus_bound: Option<u32>,
) -> Result<ApStructure, HierarchyError> {
    if depths.contains(&0) || depths.is_empty() || bound == 0 {
        return Err(HierarchyError::ZeroDepth);
    }
    let total_coords: usize = depths.iter().sum();
    let mut size = (bound as usize)
        .checked_pow(total_coords as u32)
        .unwrap_or(usize::MAX);
    if let Some(pb) = plus_bound {
        size = size.saturating_mul(pb as usize);
    }
    if size > MAX_GRID_POINTS {
        return Err(HierarchyError::GridTooLarge(size));
    }

    // Relation symbols and the class they define.  In the single-level case
    // full agreement is plain equality, so the deepest relation is dropped;
    // with the extra coordinate it is kept.
    let mut symbols: Vec<(String, usize)> = Vec::new();
    let mut relations: BTreeMap<(usize, usize), SymbolId> = BTreeMap::new();
    for (m, &r) in depths.iter().enumerate() {
        let max_depth = if plus_bound.is_some() { r } else { r - 1 };
        for i in 1..=max_depth {
            let name = if depths.len() == 1 && plus_bound.is_none() {
                format!("R{i}")
            } else {
                format!("R{}_{i}", m + 1)
            };
            relations.insert((m, i), symbols.len());
            symbols.push((name, 2));
        }
    }
    let sig = Arc::new(Signature::new(symbols).expect("distinct generated names"));
    let mut constraints = Vec::new();
    let mut eqrels = Vec::new();
    for (m, &r) in depths.iter().enumerate() {
        let max_depth = if plus_bound.is_some() { r } else { r - 1 };
        for i in 1..=max_depth {
            let sym = relations[&(m, i)];
            constraints.push(Constraint {
                var_names: vec!["x".into()],
                body: Formula::Atom(sym, vec![0, 0]),
            });
            constraints.push(Constraint {
                var_names: vec!["x".into(), "y".into()],
                body: Formula::Implies(
                    Box::new(Formula::Atom(sym, vec![0, 1])),
                    Box::new(Formula::Atom(sym, vec![1, 0])),
                ),
            });
            constraints.push(Constraint {
                var_names: vec!["x".into(), "y".into(), "z".into()],
                body: Formula::Implies(
                    Box::new(Formula::And(
                        Box::new(Formula::Atom(sym, vec![0, 1])),
                        Box::new(Formula::Atom(sym, vec![1, 2])),
                    )),
                    Box::new(Formula::Atom(sym, vec![0, 2])),
                ),
            });
            if i > 1 {
                let coarser = relations[&(m, i - 1)];
                constraints.push(Constraint {
                    var_names: vec!["x".into(), "y".into()],
                    body: Formula::Implies(
                        Box::new(Formula::Atom(sym, vec![0, 1])),
                        Box::new(Formula::Atom(coarser, vec![0, 1])),
                    ),
                });
            }
            let star = if i == 1 {
                StarRef::Trivial
            } else {
                StarRef::Earlier(eqrels.len() - 1)
            };
            eqrels.push(EqRelDecl {
                id: if depths.len() == 1 && plus_bound.is_none() {
                    format!("r{i}")
                } else {
                    format!("r{}_{i}", m + 1)
                },
                domain: crate::classdef::DomainRef::All,
                relation: sym,
                length: 1,
                star,
                count: EqClassCount::Infinite,
            });
        }
    }
    let spec = ClassSpec::new(Arc::clone(&sig), constraints, eqrels);

    // Enumerate grid points in lexicographic coordinate order.
    let mut coords: Vec<IndexPoint> = vec![IndexPoint {
        levels: vec![Vec::new(); depths.len()],
        plus: None,
    }];
    for (m, &r) in depths.iter().enumerate() {
        for _ in 0..r {
            let mut next = Vec::new();
            for p in &coords {
                for c in 0..bound {
                    let mut q = p.clone();
                    q.levels[m].push(c);
                    next.push(q);
                }
            }
            coords = next;
        }
    }
    if let Some(pb) = plus_bound {
        let mut next = Vec::new();
        for p in &coords {
            for c in 0..pb {
                let mut q = p.clone();
                q.plus = Some(c);
                next.push(q);
            }
        }
        coords = next;
    }
    coords.sort();
    let mut points = BTreeMap::new();
    for (idx, p) in coords.iter().enumerate() {
        points.insert(idx as Element + 1, p.clone());
    }
    let mut facts: Vec<(SymbolId, Vec<Element>)> = Vec::new();
    for (&a, pa) in &points {
        for (&b, pb) in &points {
            for (&(m, i), &sym) in &relations {
                if pa.levels[m][..i] == pb.levels[m][..i] {
                    facts.push((sym, vec![a, b]));
                }
            }
        }
    }
    let universe: Vec<Element> = points.keys().copied().collect();
    let structure =
        Structure::new(sig, universe, facts).expect("grid facts lie in the grid universe");
    Ok(ApStructure {
        spec,
        structure,
        depths: depths.to_vec(),
        bounds: vec![bound; depths.len()],
        plus_bound,
        points,
        relations,
    })
}

impl ApStructure {
    pub fn rel_index(&self, m: usize, i: usize) -> Option<usize> {
        let sym = *self.relations.get(&(m, i))?;
        self.spec.eqrels.iter().position(|d| d.relation == sym)
    }

    /// All segments below a point: per level every prefix, combined
    /// independently across levels.
    pub fn segments_of(&self, point: &IndexPoint) -> Vec<Segment> {
        let mut out = vec![Vec::new()];
        for level in &point.levels {
            let mut next = Vec::new();
            for base in &out {
                for len in 0..=level.len() {
                    let mut seg: Vec<Vec<u32>> = base.clone();
                    seg.push(level[..len].to_vec());
                    next.push(seg);
                }
            }
            out = next;
        }
        out.into_iter().map(Segment).collect()
    }
}

/// Map a blur of a single point to its segment tuple.  In the single-level
/// case the identity handle maps to the full coordinate prefix; with the
/// extra free coordinate it lies outside the correspondence.
pub fn blur_to_segment(
    ap: &ApStructure,
    blur: &Blur,
    element: Element,
) -> Result<Segment, HierarchyError> {
    let point = ap
        .points
        .get(&element)
        .ok_or(HierarchyError::BlurOutsideDomain)?;
    let mut prefixes: Vec<Vec<u32>> = vec![Vec::new(); ap.depths.len()];
    for handle in &blur.0 {
        match handle.kind {
            HandleKind::Identity => {
                if ap.plus_bound.is_some() {
                    return Err(HierarchyError::BlurOutsideDomain);
                }
                prefixes[0] = point.levels[0].clone();
            }
            HandleKind::Rel(r) => {
                let sym = ap.spec.eqrels[r].relation;
                let Some((&(m, i), _)) = ap.relations.iter().find(|(_, &s)| s == sym) else {
                    return Err(HierarchyError::BlurOutsideDomain);
                };
                if !prefixes[m].is_empty() {
                    return Err(HierarchyError::BlurOutsideDomain);
                }
                prefixes[m] = point.levels[m][..i].to_vec();
            }
        }
    }
    Ok(Segment(prefixes))
}

/// Inverse of [`blur_to_segment`].
pub fn segment_to_blur(
    ap: &ApStructure,
    segment: &Segment,
    element: Element,
) -> Result<Blur, HierarchyError> {
    let point = ap.points.get(&element).ok_or(HierarchyError::BadSegment)?;
    if segment.0.len() != ap.depths.len() {
        return Err(HierarchyError::BadSegment);
    }
    let mut handles = Vec::new();
    for (m, prefix) in segment.0.iter().enumerate() {
        if prefix.is_empty() {
            continue;
        }
        if point.levels[m].len() < prefix.len() || point.levels[m][..prefix.len()] != *prefix {
            return Err(HierarchyError::BadSegment);
        }
        let i = prefix.len();
        if ap.plus_bound.is_none() && i == ap.depths[m] {
            handles.push(ClassHandle::identity(element));
            continue;
        }
        let Some(r) = ap.rel_index(m, i) else {
            return Err(HierarchyError::BadSegment);
        };
        handles.push(ClassHandle::of_class(&ap.spec, r, &ap.structure, element));
    }
    Ok(Blur::from_handles(handles))
}

/// Encode a unit-interval value as digit predicates: the indices of the 1
/// bits in its `p`-bit binary expansion.
pub fn encode_real(x: f64, p: usize) -> Result<Vec<usize>, HierarchyError> {
    if p == 0 || p > 53 {
        return Err(HierarchyError::BadPrecision);
    }
    let mut out = Vec::new();
    let mut rest = x.clamp(0.0, 1.0);
    for i in 1..=p {
        rest *= 2.0;
        if rest >= 1.0 {
            out.push(i);
            rest -= 1.0;
        }
    }
    Ok(out)
}

/// Decode digit predicates back to the truncated value.
pub fn decode_real(bits: &[usize], p: usize) -> Result<f64, HierarchyError> {
    if p == 0 || p > 53 {
        return Err(HierarchyError::BadPrecision);
    }
    let mut out = 0.0;
    for &i in bits {
        if i == 0 || i > p {
            return Err(HierarchyError::BadPrecision);
        }
        out += (0.5f64).powi(i as i32);
    }
    Ok(out)
}

/// Built-in measurable mixes of the chain variates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ApMix {
    /// The root variate alone: a constant array.
    ProjRoot,
    /// The full-prefix variate alone: an i.i.d. array.
    ProjLeaf,
    /// The average of all chain variates, wrapped to the unit interval.
    ChainAvg,
    /// Deliberately non-invariant: reads the last coordinate's parity.
    CoordParity,
}

pub const MIX_NAMES: &[&str] = &["proj_root", "proj_leaf", "chain_avg", "coord_parity"];

pub fn mix_by_name(name: &str) -> Result<ApMix, HierarchyError> {
    match name {
        "proj_root" => Ok(ApMix::ProjRoot),
        "proj_leaf" => Ok(ApMix::ProjLeaf),
        "chain_avg" => Ok(ApMix::ChainAvg),
        "coord_parity" => Ok(ApMix::CoordParity),
        other => Err(HierarchyError::UnknownMix(other.to_string())),
    }
}

/// The array value at one point: a function of the segment-keyed variates
/// only, so the extra free coordinate never enters.
pub fn value_at(ap: &ApStructure, mix: ApMix, rs: &RandomnessSource, point: &IndexPoint) -> f64 {
    match mix {
        ApMix::CoordParity => {
            let last = point.levels[0].last().copied().unwrap_or(0);
            0.25 + 0.5 * (last % 2) as f64
        }
        ApMix::ProjRoot => {
            let seg = Segment(vec![Vec::new(); point.levels.len()]);
            rs.uniform(&seg.key())
        }
        ApMix::ProjLeaf => {
            let seg = Segment(point.levels.clone());
            rs.uniform(&seg.key())
        }
        ApMix::ChainAvg => {
            let segs = ap.segments_of(point);
            let sum: f64 = segs.iter().map(|s| rs.uniform(&s.key())).sum();
            (sum / segs.len() as f64).fract()
        }
    }
}

/// A sampled array: one value per grid element, plus its digit-predicate
/// encoding.
#[derive(Debug, Clone)]
pub struct ApSample {
    pub values: BTreeMap<Element, f64>,
    pub structure: Structure,
}

pub fn sample_ap_array(
    ap: &ApStructure,
    mix: ApMix,
    seed: u64,
    precision: usize,
) -> Result<ApSample, HierarchyError> {
    if precision == 0 || precision > 53 {
        return Err(HierarchyError::BadPrecision);
    }
    let rs = RandomnessSource::new(seed);
    let mut values = BTreeMap::new();
    for (&el, point) in &ap.points {
        values.insert(el, value_at(ap, mix, &rs, point));
    }
    let symbols: Vec<(String, usize)> = (1..=precision).map(|i| (format!("U{i}"), 1)).collect();
    let sig = Arc::new(Signature::new(symbols).expect("digit names distinct"));
    let mut facts = Vec::new();
    for (&el, &v) in &values {
        for bit in encode_real(v, precision)? {
            facts.push((bit - 1, vec![el]));
        }
    }
    let structure = Structure::new(sig, ap.points.keys().copied().collect(), facts)
        .expect("digit facts on grid elements");
    Ok(ApSample { values, structure })
}

/// A uniformly random initial-segment-preserving permutation of the grid:
/// independent uniform child shuffles at every tree node per level, plus a
/// free shuffle of the extra coordinate.
pub fn sample_tree_permutation(
    ap: &ApStructure,
    rs: &RandomnessSource,
    tag: u64,
) -> BTreeMap<Element, Element> {
    let map_level = |m: usize, coords: &[u32]| -> Vec<u32> {
        let mut out = Vec::with_capacity(coords.len());
        let mut prefix: Vec<u32> = Vec::new();
        for (depth, &c) in coords.iter().enumerate() {
            let mut key = format!("hperm:{tag}:{m}:{depth}:").into_bytes();
            for &p in &prefix {
                key.extend_from_slice(&p.to_be_bytes());
            }
            let perm = rs.permutation(&key, ap.bounds[m] as usize);
            out.push(perm[c as usize] as u32);
            prefix.push(c);
        }
        out
    };
    let plus_perm = ap
        .plus_bound
        .map(|pb| rs.permutation(format!("hperm:{tag}:plus").as_bytes(), pb as usize));
    let reverse: BTreeMap<&IndexPoint, Element> =
        ap.points.iter().map(|(&el, p)| (p, el)).collect();
    let mut out = BTreeMap::new();
    for (&el, point) in &ap.points {
        let target = IndexPoint {
            levels: point
                .levels
                .iter()
                .enumerate()
                .map(|(m, coords)| map_level(m, coords))
                .collect(),
            plus: point
                .plus
                .map(|c| plus_perm.as_ref().expect("plus bound set")[c as usize] as u32),
        };
        out.insert(el, reverse[&target]);
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub pass: bool,
    pub verdict: ComparisonVerdict,
    pub window: Vec<Element>,
    pub samples: u64,
}

/// Compare the distribution of a small value window against the same window
/// read through random initial-segment-preserving permutations.
pub fn check_hierarchical_invariance(
    ap: &ApStructure,
    mix: ApMix,
    samples: u64,
    seed: u64,
    tv_threshold: f64,
    p_threshold: f64,
) -> Result<InvarianceReport, HierarchyError> {
    // Two window points at four bins keep the category count small enough
    // that the plug-in TV estimate stays well under the thresholds.
    let root = RandomnessSource::new(seed);
    let window: Vec<Element> = ap.points.keys().copied().take(2).collect();
    let quantize = |v: f64| -> u8 { ((v * 4.0) as u8).min(3) };
    let mut plain = EmpiricalDist::new();
    let mut permuted = EmpiricalDist::new();
    for j in 0..samples {
        let rs_plain = RandomnessSource::new(root.raw_at(b"inv:plain", j));
        let outcome: Vec<u8> = window
            .iter()
            .map(|el| quantize(value_at(ap, mix, &rs_plain, &ap.points[el])))
            .collect();
        plain.record(outcome);

        let rs_perm = RandomnessSource::new(root.raw_at(b"inv:perm", j));
        let pi = sample_tree_permutation(ap, &rs_perm, j);
        let outcome: Vec<u8> = window
            .iter()
            .map(|el| quantize(value_at(ap, mix, &rs_perm, &ap.points[&pi[el]])))
            .collect();
        permuted.record(outcome);
    }
    let verdict =
        verdict(&permuted, &plain, tv_threshold, p_threshold).expect("nonempty distributions");
    Ok(InvarianceReport {
        pass: verdict.pass,
        verdict,
        window,
        samples,
    })
}
