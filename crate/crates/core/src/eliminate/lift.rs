//! The infinite-case representation lift: blurs of the class-augmented
//! index set project onto blurs of the original set (the hat map); the
//! randomness of one base blur splits across its fiber by deinterleaving
//! variate bits and deriving fresh ordering picks.
//!
//! The measure-preserving split and the fiber enumeration are fixed
//! bit-exactly (round-robin mantissa bits, canonical-key fiber order) so
//! lifted rules are reproducible.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use super::inf::{embed_with_classes, InfExpansion, MinusPoint};
use super::EliminateError;
use crate::equiv::{blur_set, handle_leq, Blur, ClassHandle, HandleKind};
use crate::relstruct::{Element, Signature, Structure};
use crate::sampler::{RuleCtx, SamplerError, ThresholdProfile, TypeRule, Variate};

/// A blur handle written against base-side data: the identity of a local
/// element, or the class of a local element under a base declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum HandleSpec {
    Id(Element),
    RelOf(usize, Element),
}

impl HandleSpec {
    fn resolve_local(
        &self,
        base: &crate::classdef::ClassSpec,
        local: &Structure,
    ) -> ClassHandle {
        match *self {
            HandleSpec::Id(y) => ClassHandle::identity(y),
            HandleSpec::RelOf(r, y) => ClassHandle::of_class(base, r, local, y),
        }
    }
}

/// Per-local-structure lift context: the class-augmented image, its blur
/// family, and the hat/fiber bookkeeping.
pub struct LiftContext {
    pub exp: InfExpansion,
    pub local: Structure,
    pub expanded: Structure,
    /// Blurs of the full augmented index set, canonically ordered.
    pub blurs_tilde: Vec<Blur>,
    /// Per augmented blur: its hat, resolved against the local structure.
    pub hats: Vec<Blur>,
    /// Per augmented blur: (index inside its fiber, fiber size, whether it
    /// is the distinguished copy of its hat).
    pub fiber_slot: Vec<(usize, usize, bool)>,
    /// Hat handles as specs, for re-anchoring against an ambient structure.
    hat_specs: Vec<Vec<HandleSpec>>,
    /// Element of the base structure -> its doubled pair.
    pair_of: BTreeMap<Element, (Element, Element)>,
}

impl LiftContext {
    pub fn new(exp: &InfExpansion, local: &Structure) -> Result<LiftContext, EliminateError> {
        let data = &exp.data;
        let (expanded, pi, decoded) = embed_with_classes(data, local)?;
        let universe = expanded.universe().to_vec();
        let blurs_tilde = blur_set(&exp.expanded, &expanded, &universe, true);

        // The correspondence between augmented handles and base handles.
        let class_member = |cid: Element| -> Element {
            // Some base element whose pair carries this class id.
            for &x in local.universe() {
                if let Some(target) = pi.apply(x) {
                    if let Some(MinusPoint::Pair(_, c)) = decoded.points.get(&target) {
                        if *c == cid {
                            return x;
                        }
                    }
                }
            }
            cid
        };
        let c_ids: Vec<Element> = expanded
            .tuples(data.c_symbol)
            .map(|t| t[0])
            .collect();
        let map_handle = |h: &ClassHandle| -> HandleSpec {
            match h.kind {
                HandleKind::Identity => {
                    if c_ids.contains(&h.anchor) {
                        HandleSpec::RelOf(data.d, class_member(h.anchor))
                    } else {
                        HandleSpec::Id(h.anchor)
                    }
                }
                HandleKind::Rel(r_expanded) => {
                    // Remaining declarations keep their index order.
                    let r_base = r_expanded;
                    let anchor = if c_ids.contains(&h.anchor) {
                        class_member(h.anchor)
                    } else {
                        h.anchor
                    };
                    HandleSpec::RelOf(r_base, anchor)
                }
            }
        };

        let mut hats = Vec::with_capacity(blurs_tilde.len());
        let mut hat_specs = Vec::with_capacity(blurs_tilde.len());
        for blur in &blurs_tilde {
            let specs: Vec<HandleSpec> = blur.0.iter().map(&map_handle).collect();
            let handles: Vec<ClassHandle> = specs
                .iter()
                .map(|s| s.resolve_local(&data.base, local))
                .collect();
            // Keep the minimal handles: drop any with a strictly finer
            // companion in the image.
            let mut kept_handles = Vec::new();
            let mut kept_specs = Vec::new();
            for (i, h) in handles.iter().enumerate() {
                let dominated = handles.iter().enumerate().any(|(j, g)| {
                    i != j && g != h && handle_leq(&data.base, local, g, h)
                });
                if !dominated {
                    kept_handles.push(*h);
                    kept_specs.push(specs[i]);
                }
            }
            let hat = Blur::from_handles(kept_handles);
            // Deduplicate specs along with handles.
            let mut uniq_specs: Vec<HandleSpec> = Vec::new();
            for (h, s) in kept_handles_iter(&hat, &kept_specs, &data.base, local) {
                let _ = h;
                if !uniq_specs.contains(&s) {
                    uniq_specs.push(s);
                }
            }
            hats.push(hat);
            hat_specs.push(uniq_specs);
        }

        // Fibers: group by hat, order members by canonical key.
        let mut fiber_slot = vec![(0usize, 0usize, false); blurs_tilde.len()];
        let mut groups: BTreeMap<Vec<u8>, Vec<usize>> = BTreeMap::new();
        for (i, hat) in hats.iter().enumerate() {
            groups.entry(hat.canonical_key()).or_default().push(i);
        }
        for members in groups.values() {
            let mut ordered = members.clone();
            ordered.sort_by_key(|&i| blurs_tilde[i].canonical_key());
            let size = ordered.len();
            for (slot, &i) in ordered.iter().enumerate() {
                // The distinguished copy resolves to exactly its hat.
                let resolved = Blur::from_handles(
                    hat_specs[i]
                        .iter()
                        .map(|s| s.resolve_local(&exp.data.base, local))
                        .collect(),
                );
                let distinguished = blurs_tilde[i].len() == hats[i].len() && resolved == hats[i];
                fiber_slot[i] = (slot, size, distinguished);
            }
        }

        let mut pair_of = BTreeMap::new();
        for &x in local.universe() {
            if let Some(target) = pi.apply(x) {
                match decoded.points.get(&target) {
                    Some(MinusPoint::Pair(v, c)) => {
                        pair_of.insert(x, (*v, *c));
                    }
                    _ => {
                        pair_of.insert(x, (x, x));
                    }
                }
            }
        }

        Ok(LiftContext {
            exp: exp.clone(),
            local: local.clone(),
            expanded,
            blurs_tilde,
            hats,
            fiber_slot,
            hat_specs,
            pair_of,
        })
    }

    /// The hat of an augmented blur, resolved against the local structure.
    pub fn hat(&self, blur: &Blur) -> Option<&Blur> {
        self.blurs_tilde
            .iter()
            .position(|b| b == blur)
            .map(|i| &self.hats[i])
    }

    /// The fiber of a base blur: augmented blurs whose hat is the given one,
    /// in canonical order.
    pub fn fiber(&self, hat: &Blur) -> Vec<Blur> {
        let key = hat.canonical_key();
        let mut members: Vec<Blur> = self
            .hats
            .iter()
            .zip(self.blurs_tilde.iter())
            .filter(|(h, _)| h.canonical_key() == key)
            .map(|(_, b)| b.clone())
            .collect();
        members.sort_by_key(|b| b.canonical_key());
        members
    }

    /// Re-anchor a hat against ambient handles: identity handles pass
    /// through, class handles take the ambient anchor of their element.
    fn ambient_hat(&self, idx: usize, ctx: &RuleCtx) -> Option<Blur> {
        let mut handles = Vec::with_capacity(self.hat_specs[idx].len());
        for spec in &self.hat_specs[idx] {
            let h = match *spec {
                HandleSpec::Id(y) => ClassHandle::identity(y),
                HandleSpec::RelOf(r, y) => *ctx.handles.get(&(r, y))?,
            };
            handles.push(h);
        }
        Some(Blur::from_handles(handles))
    }

    /// The doubled form of a base tuple.
    pub fn doubled_tuple(&self, tuple: &[Element]) -> Vec<Element> {
        let mut out = Vec::with_capacity(tuple.len() * 2);
        for &x in tuple {
            let (v, c) = self.pair_of.get(&x).copied().unwrap_or((x, x));
            out.push(v);
            out.push(c);
        }
        out
    }
}

fn kept_handles_iter<'a>(
    hat: &'a Blur,
    specs: &'a [HandleSpec],
    base: &'a crate::classdef::ClassSpec,
    local: &'a Structure,
) -> impl Iterator<Item = (ClassHandle, HandleSpec)> + 'a {
    specs.iter().filter_map(move |s| {
        let h = s.resolve_local(base, local);
        hat.0.contains(&h).then_some((h, *s))
    })
}

/// Deinterleave the 53-bit mantissa of a variate into `m` streams,
/// round-robin from the most significant bit, and repack each stream as a
/// variate.  `m = 1` returns the input unchanged.
pub fn split_variate(x: f64, m: usize) -> Vec<f64> {
    split_streams(x, m)
        .into_iter()
        .map(|(bits, n)| {
            if n == 0 {
                0.0
            } else {
                bits as f64 / (1u64 << n) as f64
            }
        })
        .collect()
}

/// The full split: `m` variates plus `m - 1` ordering-pick seeds, carved
/// from `2m - 1` interleaved bit streams.
pub fn split_picks(x: f64, m: usize) -> (Vec<f64>, Vec<u64>) {
    if m == 1 {
        return (vec![x], Vec::new());
    }
    let streams = split_streams(x, 2 * m - 1);
    let variates = streams[..m]
        .iter()
        .map(|&(bits, n)| if n == 0 { 0.0 } else { bits as f64 / (1u64 << n) as f64 })
        .collect();
    let picks = streams[m..]
        .iter()
        .map(|&(bits, n)| bits.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(n as u32))
        .collect();
    (variates, picks)
}

fn split_streams(x: f64, m: usize) -> Vec<(u64, usize)> {
    let mantissa = (x * 9007199254740992.0) as u64; // 53 bits
    let mut out = vec![(0u64, 0usize); m];
    for i in 0..53 {
        let bit = (mantissa >> (52 - i)) & 1;
        let stream = i % m;
        out[stream].0 = (out[stream].0 << 1) | bit;
        out[stream].1 += 1;
    }
    out
}

fn permutation_from_seed(seed: u64, n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..n).collect();
    let mut state = seed;
    for i in (1..n).rev() {
        // splitmix64 step
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        let j = (z % (i as u64 + 1)) as usize;
        out.swap(i, j);
    }
    out
}

/// Convenience wrappers matching the per-operation surface.
pub fn hat_blur(
    exp: &InfExpansion,
    local: &Structure,
    blur: &Blur,
) -> Result<Option<Blur>, EliminateError> {
    let ctx = LiftContext::new(exp, local)?;
    Ok(ctx.hat(blur).cloned())
}

pub fn fiber(
    exp: &InfExpansion,
    local: &Structure,
    hat: &Blur,
) -> Result<Vec<Blur>, EliminateError> {
    let ctx = LiftContext::new(exp, local)?;
    Ok(ctx.fiber(hat))
}

/// Lift a rule over the doubled output signature of the expanded class to a
/// rule over the base class with the undoubled output signature.
pub fn lift_rule_inf(
    inner: Box<dyn TypeRule>,
    exp: InfExpansion,
    target: Arc<Signature>,
) -> Result<Box<dyn TypeRule>, EliminateError> {
    let inner_sig = inner.target();
    if inner_sig.len() != target.len() {
        return Err(EliminateError::CarrierMismatch);
    }
    for ((_, name_in, arity_in), (_, name_out, arity_out)) in
        inner_sig.symbols().zip(target.symbols())
    {
        if name_in != name_out || arity_in != 2 * arity_out {
            return Err(EliminateError::CarrierMismatch);
        }
    }
    Ok(Box::new(LiftedInfRule {
        inner,
        exp,
        target,
        memo: Mutex::new(BTreeMap::new()),
    }))
}

struct LiftedInfRule {
    inner: Box<dyn TypeRule>,
    exp: InfExpansion,
    target: Arc<Signature>,
    memo: Mutex<BTreeMap<Vec<u8>, Arc<LiftContext>>>,
}

impl LiftedInfRule {
    fn context_for(&self, local: &Structure) -> Arc<LiftContext> {
        let key = local.canonical_form();
        let mut memo = self.memo.lock().expect("memo lock");
        match memo.get(&key) {
            Some(ctx) => Arc::clone(ctx),
            None => {
                let ctx = Arc::new(
                    LiftContext::new(&self.exp, local)
                        .expect("local members of the base class embed"),
                );
                memo.insert(key, Arc::clone(&ctx));
                ctx
            }
        }
    }
}

impl TypeRule for LiftedInfRule {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn target(&self) -> &Arc<Signature> {
        &self.target
    }

    fn validate(&self, spec: &crate::classdef::ClassSpec) -> Result<(), SamplerError> {
        if spec.eqrels.len() != self.exp.data.base.eqrels.len() {
            return Err(SamplerError::RuleMismatch {
                rule: self.inner.name().to_string(),
                reason: "lifted rule must run over its base class".into(),
            });
        }
        self.inner.validate(&self.exp.expanded)
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let lift = self.context_for(ctx.local);
        // Derive the augmented randomness from the base randomness, blur by
        // blur through the fibers.
        let mut variates = Vec::with_capacity(lift.blurs_tilde.len());
        let mut orderings = Vec::with_capacity(lift.blurs_tilde.len());
        for (i, blur) in lift.blurs_tilde.iter().enumerate() {
            let (slot, size, distinguished) = lift.fiber_slot[i];
            let Some(ambient) = lift.ambient_hat(i, ctx) else {
                variates.push(Variate::Sampled(0.0));
                orderings.push(blur.0.clone());
                continue;
            };
            let base_value = ctx.xi(&ambient).map(|v| v.approx()).unwrap_or(0.0);
            let (values, picks) = split_picks(base_value, size);
            variates.push(Variate::Sampled(values[slot]));
            let ordering: Vec<ClassHandle> = if distinguished {
                // Transfer the base ordering by its index pattern.
                let base_perm = ctx
                    .blurs
                    .iter()
                    .position(|b| *b == ambient)
                    .map(|bi| index_pattern(&ctx.blurs[bi].0, &ctx.orderings[bi]))
                    .unwrap_or_else(|| (0..blur.len()).collect());
                apply_pattern(&blur.0, &base_perm)
            } else {
                let pick_index = if slot < picks.len() { slot } else { 0 };
                let seed = picks.get(pick_index).copied().unwrap_or(0);
                let perm = permutation_from_seed(seed, blur.len());
                apply_pattern(&blur.0, &perm)
            };
            orderings.push(ordering);
        }
        // Labelings of the remaining finite declarations: indices carry
        // over unchanged.
        let labelings = ctx.labelings.clone();
        // Handles of augmented elements for the inner rule.
        let mut handles = BTreeMap::new();
        for (r, decl) in self.exp.expanded.eqrels.iter().enumerate() {
            if decl.length != 1 {
                continue;
            }
            for &x in lift.expanded.universe() {
                if crate::equiv::in_domain(&self.exp.expanded, r, &lift.expanded, x) {
                    handles.insert(
                        (r, x),
                        ClassHandle::of_class(&self.exp.expanded, r, &lift.expanded, x),
                    );
                }
            }
        }
        let tuple_dbl = lift.doubled_tuple(ctx.tuple);
        let inner_ctx = RuleCtx {
            spec: &self.exp.expanded,
            symbol: ctx.symbol,
            tuple: &tuple_dbl,
            local: &lift.expanded,
            blurs: &lift.blurs_tilde,
            variates: &variates,
            orderings: &orderings,
            labelings: &labelings,
            handles: &handles,
        };
        self.inner.decide(&inner_ctx)
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        // The bit split leaves dyadic thresholds exact only stream by
        // stream; exact mode is not offered through the infinite lift.
        None
    }
}

fn index_pattern(sorted: &[ClassHandle], ordering: &[ClassHandle]) -> Vec<usize> {
    ordering
        .iter()
        .filter_map(|h| sorted.iter().position(|s| s == h))
        .collect()
}

fn apply_pattern(sorted: &[ClassHandle], pattern: &[usize]) -> Vec<ClassHandle> {
    if pattern.len() != sorted.len() {
        return sorted.to_vec();
    }
    pattern.iter().map(|&i| sorted[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eliminate::class_inf;
    use crate::kspec;
    use crate::sampler::{class_coin_doubled_rule, sample_structure};

    fn equiv_lift_ctx(text: &str) -> (InfExpansion, LiftContext) {
        let k = kspec::builtin("equiv").unwrap();
        let exp = class_inf(&k, 0, 2).unwrap();
        let local = Structure::parse(std::sync::Arc::clone(&k.sig), text).unwrap();
        let ctx = LiftContext::new(&exp, &local).unwrap();
        (exp, ctx)
    }

    #[test]
    fn hat_collapses_non_antichain_images() {
        let (_, ctx) = equiv_lift_ctx("universe: 5\nR 5 5\n");
        // Augmented blurs over {5, c}: empty, {5=}, {c=}, {5=, c=}.
        assert_eq!(ctx.blurs_tilde.len(), 4);
        for (i, blur) in ctx.blurs_tilde.iter().enumerate() {
            let hat = &ctx.hats[i];
            match blur.len() {
                0 => assert!(hat.is_empty()),
                2 => {
                    // {[y]=, [c]=} corresponds to a chain; the hat keeps the
                    // finer identity handle.
                    assert_eq!(hat.len(), 1);
                    assert_eq!(hat.0[0], ClassHandle::identity(5));
                }
                1 => assert_eq!(hat.len(), 1),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn fibers_partition_the_augmented_blur_family() {
        let (_, ctx) = equiv_lift_ctx("universe: 5\nR 5 5\n");
        let mut total = 0;
        let mut seen = std::collections::BTreeSet::new();
        for hat in &ctx.hats {
            if !seen.insert(hat.canonical_key()) {
                continue;
            }
            total += ctx.fiber(hat).len();
        }
        assert_eq!(total, ctx.blurs_tilde.len());
    }

    #[test]
    fn hat_is_surjective_onto_the_base_blur_family() {
        let k = kspec::builtin("equiv").unwrap();
        let exp = class_inf(&k, 0, 2).unwrap();
        for text in [
            "universe: 5\nR 5 5\n",
            "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\n",
            "universe: 1 2\nR 1 1\nR 2 2\n",
        ] {
            let local = Structure::parse(std::sync::Arc::clone(&k.sig), text).unwrap();
            let ctx = LiftContext::new(&exp, &local).unwrap();
            let base_blurs =
                crate::equiv::blur_set(&k, &local, local.universe(), true);
            let hat_keys: std::collections::BTreeSet<Vec<u8>> =
                ctx.hats.iter().map(|h| h.canonical_key()).collect();
            for blur in &base_blurs {
                assert!(
                    hat_keys.contains(&blur.canonical_key()),
                    "blur {blur:?} has an empty fiber for {text}"
                );
            }
        }
    }

    #[test]
    fn fiber_of_the_empty_blur_contains_the_empty_blur() {
        let (_, ctx) = equiv_lift_ctx("universe: 5\nR 5 5\n");
        let fiber = ctx.fiber(&Blur::empty());
        assert!(fiber.contains(&Blur::empty()));
    }

    #[test]
    fn class_handle_hat_is_the_class_name_identity() {
        let (_, ctx) = equiv_lift_ctx("universe: 5\nR 5 5\n");
        // Find the augmented blur {[c]=}: its hat is {[5]_r1}.
        let class_handle = ClassHandle::of_class(
            &ctx.exp.data.base,
            0,
            &ctx.local,
            5,
        );
        let singleton_c: Vec<&Blur> = ctx
            .blurs_tilde
            .iter()
            .enumerate()
            .filter(|(i, b)| b.len() == 1 && ctx.hats[*i].0 == vec![class_handle])
            .map(|(_, b)| b)
            .collect();
        assert_eq!(singleton_c.len(), 1);
        assert!(matches!(singleton_c[0].0[0].kind, HandleKind::Identity));
    }

    #[test]
    fn split_of_one_stream_is_identity() {
        for x in [0.0, 0.25, 0.5, std::f64::consts::FRAC_1_SQRT_2] {
            assert_eq!(split_variate(x, 1), vec![x]);
        }
    }

    #[test]
    fn split_is_deterministic() {
        assert_eq!(split_variate(0.123456789, 3), split_variate(0.123456789, 3));
        assert_eq!(split_picks(0.9, 2), split_picks(0.9, 2));
    }

    #[test]
    fn split_streams_are_roughly_uniform() {
        // Chi-square uniformity over 16 bins for each of 2 streams.
        let rs = crate::sampler::RandomnessSource::new(17);
        let n = 100_000u64;
        let mut counts = [[0u64; 16]; 2];
        for i in 0..n {
            let x = rs.uniform(&i.to_le_bytes());
            let parts = split_variate(x, 2);
            for (s, &v) in parts.iter().enumerate() {
                let bin = ((v * 16.0) as usize).min(15);
                counts[s][bin] += 1;
            }
        }
        for stream in &counts {
            let expected = n as f64 / 16.0;
            let stat: f64 = stream
                .iter()
                .map(|&c| (c as f64 - expected).powi(2) / expected)
                .sum();
            let p = crate::stats::chi_square_survival(stat, 15.0);
            assert!(p > 1e-6, "stream not uniform: stat {stat}, p {p}");
        }
    }

    #[test]
    fn lifted_classcoin_matches_direct_classcoin_exactly() {
        // The fiber of the class blur is a singleton, so the lift is the
        // identity on its variate: per-seed outputs coincide.
        let k = kspec::builtin("equiv").unwrap();
        let exp = class_inf(&k, 0, 2).unwrap();
        let target = crate::sampler::builtin_rule("classcoin")
            .unwrap()
            .target()
            .clone();
        let lifted = lift_rule_inf(class_coin_doubled_rule(), exp, target).unwrap();
        let direct = crate::sampler::builtin_rule("classcoin").unwrap();
        let s = Structure::parse(
            std::sync::Arc::clone(&k.sig),
            "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n",
        )
        .unwrap();
        for seed in 0..200 {
            let a = sample_structure(&k, &s, lifted.as_ref(), seed).unwrap();
            let b = sample_structure(&k, &s, direct.as_ref(), seed).unwrap();
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn lifted_process_matches_inner_process_through_decoding() {
        // A doubled rule reading a two-element fiber: the split streams of
        // one base variate must reproduce the law of independently keyed
        // variates on the augmented side.  Compare the lifted process on S
        // against the inner process on the augmented image pulled back
        // through the decoding.
        struct XorDoubled;
        impl TypeRule for XorDoubled {
            fn name(&self) -> &str {
                "xor_dbl"
            }
            fn target(&self) -> &Arc<Signature> {
                static SIG: std::sync::OnceLock<Arc<Signature>> = std::sync::OnceLock::new();
                SIG.get_or_init(|| Arc::new(Signature::new(vec![("P".into(), 2)]).unwrap()))
            }
            fn decide(&self, ctx: &RuleCtx) -> bool {
                let (x, c) = (ctx.tuple[0], ctx.tuple[1]);
                let class_coin = ctx.xi_le(&ctx.identity_blur(c), 1, 2);
                let pair_blur = crate::equiv::Blur::from_handles(vec![
                    crate::equiv::ClassHandle::identity(x),
                    crate::equiv::ClassHandle::identity(c),
                ]);
                let pair_coin = ctx.xi_le(&pair_blur, 1, 2);
                class_coin != pair_coin
            }
        }

        let k = kspec::builtin("equiv").unwrap();
        let exp = class_inf(&k, 0, 2).unwrap();
        let p_sig = Arc::new(Signature::new(vec![("P".into(), 1)]).unwrap());
        let s = Structure::parse(
            std::sync::Arc::clone(&k.sig),
            "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n",
        )
        .unwrap();
        let lifted = lift_rule_inf(Box::new(XorDoubled), exp.clone(), Arc::clone(&p_sig)).unwrap();
        let lifted_prepared =
            crate::sampler::PreparedSampler::new(&k, &s, lifted.as_ref()).unwrap();

        let (s_tilde, pi, decoded) = embed_with_classes(&exp.data, &s).unwrap();
        let inner = XorDoubled;
        let inner_prepared =
            crate::sampler::PreparedSampler::new(&exp.expanded, &s_tilde, &inner).unwrap();
        let rs = crate::sampler::RandomnessSource::new(77);
        let n = 30_000u64;
        let mut left = crate::stats::EmpiricalDist::new();
        let mut right = crate::stats::EmpiricalDist::new();
        for j in 0..n {
            left.record(lifted_prepared.sample(rs.raw_at(b"L", j)).canonical_form());
            let out = inner_prepared.sample(rs.raw_at(b"R", j));
            let t_minus = super::super::minus_dbl(&out, &p_sig, &decoded).unwrap();
            let pulled = t_minus.pullback(&pi).unwrap();
            right.record(pulled.canonical_form());
        }
        let tv = crate::stats::tv_distance(&left, &right).unwrap();
        assert!(tv < 0.03, "tv = {tv}");
    }

    #[test]
    fn lifted_constant_rule_stays_constant() {
        let k = kspec::builtin("equiv").unwrap();
        let exp = class_inf(&k, 0, 2).unwrap();
        // A doubled rule asserting nothing lifts to one asserting nothing.
        struct NullDoubled;
        impl TypeRule for NullDoubled {
            fn name(&self) -> &str {
                "null_dbl"
            }
            fn target(&self) -> &Arc<Signature> {
                static SIG: std::sync::OnceLock<Arc<Signature>> = std::sync::OnceLock::new();
                SIG.get_or_init(|| {
                    Arc::new(Signature::new(vec![("P".into(), 2)]).unwrap())
                })
            }
            fn decide(&self, _ctx: &RuleCtx) -> bool {
                false
            }
        }
        let target = Arc::new(Signature::new(vec![("P".into(), 1)]).unwrap());
        let lifted = lift_rule_inf(Box::new(NullDoubled), exp, target).unwrap();
        let s = Structure::parse(
            std::sync::Arc::clone(&k.sig),
            "universe: 1 2\nR 1 1\nR 2 2\n",
        )
        .unwrap();
        let out = sample_structure(&k, &s, lifted.as_ref(), 11).unwrap();
        assert_eq!(out.fact_count(), 0);
    }

    #[test]
    fn lift_rejects_arity_mismatch() {
        let k = kspec::builtin("equiv").unwrap();
        let exp = class_inf(&k, 0, 2).unwrap();
        let bad_target = Arc::new(Signature::new(vec![("P".into(), 2)]).unwrap());
        assert!(lift_rule_inf(class_coin_doubled_rule(), exp, bad_target).is_err());
    }
}
