//! Built-in type rules.  Each rule names what it does over its intended
//! class; `validate` rejects classes the rule cannot read.

use std::sync::Arc;
use std::sync::OnceLock;

use super::{RuleCtx, SamplerError, ThresholdProfile, TypeRule};
use crate::classdef::{ClassSpec, EqClassCount};
use crate::equiv::Blur;
use crate::relstruct::Signature;

pub const BUILTIN_RULE_NAMES: &[&str] = &[
    "classcoin",
    "twoclass_pick",
    "twoclass_pick_bad",
    "two_eq_demo",
    "ap_array",
    "pin_first",
    "empty",
];

/// Look up a built-in rule by name.
pub fn builtin_rule(name: &str) -> Result<Box<dyn TypeRule>, SamplerError> {
    match name {
        "classcoin" => Ok(Box::new(ClassCoin)),
        "twoclass_pick" => Ok(Box::new(TwoClassPick { bad: false })),
        "twoclass_pick_bad" => Ok(Box::new(TwoClassPick { bad: true })),
        "two_eq_demo" => Ok(Box::new(TwoEqDemo)),
        "ap_array" => Ok(Box::new(ApArray { precision: 16 })),
        "pin_first" => Ok(Box::new(PinFirst)),
        "empty" => Ok(Box::new(EmptyRule)),
        other => Err(SamplerError::UnknownRule(other.to_string())),
    }
}

fn unary_p_signature() -> &'static Arc<Signature> {
    static SIG: OnceLock<Arc<Signature>> = OnceLock::new();
    SIG.get_or_init(|| Arc::new(Signature::new(vec![("P".into(), 1)]).unwrap()))
}

fn first_infinite_rel(spec: &ClassSpec) -> Option<usize> {
    spec.eqrels
        .iter()
        .position(|d| d.count == EqClassCount::Infinite && d.length == 1)
}

fn first_finite_rel(spec: &ClassSpec) -> Option<usize> {
    spec.eqrels
        .iter()
        .position(|d| matches!(d.count, EqClassCount::Finite(_)) && d.length == 1)
}

/// Include or exclude each equivalence class independently with probability
/// one half: `x ∈ P` iff the variate of the singleton blur of `[x]` is at
/// most 1/2.
struct ClassCoin;

impl TypeRule for ClassCoin {
    fn name(&self) -> &str {
        "classcoin"
    }

    fn target(&self) -> &Arc<Signature> {
        unary_p_signature()
    }

    fn validate(&self, spec: &ClassSpec) -> Result<(), SamplerError> {
        first_infinite_rel(spec).map(|_| ()).ok_or_else(|| {
            SamplerError::RuleMismatch {
                rule: "classcoin".into(),
                reason: "needs a length-1 declaration with infinitely many classes".into(),
            }
        })
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let r = first_infinite_rel(ctx.spec).expect("validated");
        let x = ctx.tuple[0];
        match ctx.class_blur(r, x) {
            Some(blur) => ctx.xi_le(&blur, 1, 2),
            None => false,
        }
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile::at_half())
    }
}

/// Put exactly one of two labeled classes into P, the choice driven by the
/// empty-blur variate: label 1 wins below 1/2, label 2 above.
struct TwoClassPick {
    /// The deliberately eq-asymmetric variant reads the label alone.
    bad: bool,
}

impl TypeRule for TwoClassPick {
    fn name(&self) -> &str {
        if self.bad {
            "twoclass_pick_bad"
        } else {
            "twoclass_pick"
        }
    }

    fn target(&self) -> &Arc<Signature> {
        unary_p_signature()
    }

    fn validate(&self, spec: &ClassSpec) -> Result<(), SamplerError> {
        match first_finite_rel(spec).map(|r| spec.eqrels[r].count) {
            Some(EqClassCount::Finite(2)) => Ok(()),
            _ => Err(SamplerError::RuleMismatch {
                rule: self.name().into(),
                reason: "needs a length-1 declaration with exactly two classes".into(),
            }),
        }
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let r = first_finite_rel(ctx.spec).expect("validated");
        let x = ctx.tuple[0];
        let Some(label) = ctx.label(r, &[x]) else {
            return false;
        };
        if self.bad {
            return label == 1;
        }
        let heads = ctx.xi_le(&ctx.empty_blur(), 1, 2);
        (label == 1 && heads) || (label == 2 && !heads)
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile::at_half())
    }
}

/// Over a class with two independent infinite relations: `x ∈ P` iff the
/// variate of the two-handle antichain `{[x]_R, [x]_S}` is at most 1/2.
struct TwoEqDemo;

impl TypeRule for TwoEqDemo {
    fn name(&self) -> &str {
        "two_eq_demo"
    }

    fn target(&self) -> &Arc<Signature> {
        unary_p_signature()
    }

    fn validate(&self, spec: &ClassSpec) -> Result<(), SamplerError> {
        let infinite: Vec<usize> = spec
            .eqrels
            .iter()
            .enumerate()
            .filter(|(_, d)| d.count == EqClassCount::Infinite && d.length == 1)
            .map(|(i, _)| i)
            .collect();
        if infinite.len() < 2 {
            return Err(SamplerError::RuleMismatch {
                rule: "two_eq_demo".into(),
                reason: "needs two length-1 declarations with infinitely many classes".into(),
            });
        }
        Ok(())
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let x = ctx.tuple[0];
        let mut handles = Vec::new();
        for (r, d) in ctx.spec.eqrels.iter().enumerate() {
            if d.count == EqClassCount::Infinite && d.length == 1 {
                if let Some(h) = ctx.handles.get(&(r, x)) {
                    handles.push(*h);
                }
            }
        }
        let blur = Blur::from_handles(handles);
        ctx.xi_le(&blur, 1, 2)
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile::at_half())
    }
}

/// Real-valued hierarchical demo: mix every blur variate of the point into
/// one value and expose its binary digits as unary predicates.
struct ApArray {
    precision: usize,
}

impl TypeRule for ApArray {
    fn name(&self) -> &str {
        "ap_array"
    }

    fn target(&self) -> &Arc<Signature> {
        static SIG: OnceLock<Arc<Signature>> = OnceLock::new();
        SIG.get_or_init(|| {
            let symbols = (1..=16).map(|i| (format!("U{i}"), 1)).collect();
            Arc::new(Signature::new(symbols).unwrap())
        })
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        // The fractional part of the variate sum is invariant under any
        // permutation of the blur family.
        let sum: f64 = ctx.variates.iter().map(|v| v.approx()).sum();
        let value = sum.fract();
        let bit = ctx.symbol + 1;
        if bit > self.precision {
            return false;
        }
        let scaled = value * (1u64 << bit) as f64;
        (scaled as u64) % 2 == 1
    }
}

/// A rule over a label-expanded class: membership read from two label
/// predicates, the winner decided by the empty-blur variate.  The lift of
/// this rule recovers the direct two-class pick.
pub fn label_pick_rule(p1: String, p2: String) -> Box<dyn TypeRule> {
    Box::new(LabelPick { p1, p2 })
}

struct LabelPick {
    p1: String,
    p2: String,
}

impl TypeRule for LabelPick {
    fn name(&self) -> &str {
        "label_pick"
    }

    fn target(&self) -> &Arc<Signature> {
        unary_p_signature()
    }

    fn validate(&self, spec: &ClassSpec) -> Result<(), SamplerError> {
        for name in [&self.p1, &self.p2] {
            if spec.sig.lookup(name).is_none() {
                return Err(SamplerError::RuleMismatch {
                    rule: "label_pick".into(),
                    reason: format!("class lacks label symbol `{name}`"),
                });
            }
        }
        Ok(())
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let x = ctx.tuple[0];
        let sig = ctx.local.sig();
        let (Some(p1), Some(p2)) = (sig.lookup(&self.p1), sig.lookup(&self.p2)) else {
            return false;
        };
        let heads = ctx.xi_le(&ctx.empty_blur(), 1, 2);
        (ctx.local.holds(p1, &[x]) && heads) || (ctx.local.holds(p2, &[x]) && !heads)
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile::at_half())
    }
}

/// The doubled formulation of the class coin: over a class-name carrying
/// structure, `(x, c) ∈ P` iff the identity-blur variate of the class name
/// `c` is at most 1/2.
pub fn class_coin_doubled_rule() -> Box<dyn TypeRule> {
    Box::new(ClassCoinDoubled)
}

struct ClassCoinDoubled;

impl TypeRule for ClassCoinDoubled {
    fn name(&self) -> &str {
        "classcoin_dbl"
    }

    fn target(&self) -> &Arc<Signature> {
        static SIG: OnceLock<Arc<Signature>> = OnceLock::new();
        SIG.get_or_init(|| Arc::new(Signature::new(vec![("P".into(), 2)]).unwrap()))
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let class_name = ctx.tuple[1];
        ctx.xi_le(&ctx.identity_blur(class_name), 1, 2)
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile::at_half())
    }
}

/// A deliberately non-exchangeable rule: membership keyed to the literal
/// element id 1.
struct PinFirst;

impl TypeRule for PinFirst {
    fn name(&self) -> &str {
        "pin_first"
    }

    fn target(&self) -> &Arc<Signature> {
        unary_p_signature()
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        ctx.tuple[0] == 1
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile::constant())
    }
}

/// Never asserts any fact.
struct EmptyRule;

impl TypeRule for EmptyRule {
    fn name(&self) -> &str {
        "empty"
    }

    fn target(&self) -> &Arc<Signature> {
        unary_p_signature()
    }

    fn decide(&self, _ctx: &RuleCtx) -> bool {
        false
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile::constant())
    }
}
