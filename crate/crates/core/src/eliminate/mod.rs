//! Elimination of declared equivalence relations: finite class counts are
//! absorbed into labeling predicates, infinite ones into explicit class-name
//! elements behind a fresh unary predicate, with representation lifts
//! carrying type rules back from the transformed class to the original.

mod fin;
mod inf;
mod lift;

pub use fin::{
    check_group_symmetry, check_symmetric_within, class_fin, expand_fin, extract_labeling,
    lift_rule_fin, permute_classes, permute_group, reduct_fin, FinExpansion, GroupStar,
    SymmetryReport,
};
pub use inf::{
    class_inf, class_inf_contains, dbl_signature, dbl_structure, embed_with_classes,
    is_large_enough, is_meaningful, minus, minus_dbl, side_tag, InfExpansion, InfExpansionData,
    InfMembership, MinusPoint, MinusResult, SideTag,
};
pub use lift::{
    fiber, hat_blur, lift_rule_inf, split_picks, split_variate, HandleSpec, LiftContext,
};

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::classdef::{
    parse_document, ClassError, ClassSpec, EqClassCount, SpecDocument, TransformKind,
};
use crate::sampler::{SamplerError, TypeRule};
use crate::relstruct::Signature;

#[derive(Debug, Error)]
pub enum EliminateError {
    #[error("declaration `{0}` is not last; eliminate declarations from the end")]
    NotLastDeclaration(String),
    #[error("declaration `{0}` has the wrong class count for this transform")]
    WrongCount(String),
    #[error("fresh symbol `{0}` collides with an existing symbol")]
    SymbolCollision(String),
    #[error("invalid labeling: {0}")]
    BadLabeling(String),
    #[error("structure is not meaningful")]
    NotMeaningful,
    #[error("{0} is not a star class of the eliminated declaration")]
    NotAStarClass(String),
    #[error("side tag of `{symbol}` undecidable at bound {bound}; declare it explicitly")]
    SideTagIndeterminate { symbol: String, bound: usize },
    #[error("saturation failed within {0} added points")]
    SaturationBound(usize),
    #[error("carrier mismatch between structure and pair map")]
    CarrierMismatch,
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("loading `{path}`: {msg}")]
    Load { path: String, msg: String },
}

/// One pipeline stage, always eliminating the last remaining declaration.
#[derive(Debug, Clone)]
pub enum Stage {
    Fin(FinExpansion),
    Inf(InfExpansion),
}

impl Stage {
    pub fn rel_id(&self) -> &str {
        match self {
            Stage::Fin(f) => &f.base.eqrels[f.d].id,
            Stage::Inf(i) => &i.data.base.eqrels[i.data.d].id,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Stage::Fin(_) => "eliminate-fin",
            Stage::Inf(_) => "eliminate-inf",
        }
    }

    pub fn expanded(&self) -> &ClassSpec {
        match self {
            Stage::Fin(f) => &f.expanded,
            Stage::Inf(i) => &i.expanded,
        }
    }
}

/// The full elimination pipeline: stages fold over the declarations from
/// the last to the first; the terminal class has none left.
#[derive(Debug, Clone)]
pub struct EliminationPipeline {
    pub base: ClassSpec,
    pub stages: Vec<Stage>,
}

/// Eliminate every declaration, last first.
pub fn eliminate_all(base: &ClassSpec, bound: usize) -> Result<EliminationPipeline, EliminateError> {
    let mut stages = Vec::new();
    let mut current = base.clone();
    while let Some(d) = current.eqrels.len().checked_sub(1) {
        let stage = match current.eqrels[d].count {
            EqClassCount::Finite(_) => Stage::Fin(class_fin(&current, d)?),
            EqClassCount::Infinite => Stage::Inf(class_inf(&current, d, bound)?),
        };
        current = stage.expanded().clone();
        stages.push(stage);
    }
    Ok(EliminationPipeline {
        base: base.clone(),
        stages,
    })
}

impl EliminationPipeline {
    /// The class at the end of the pipeline (the base class when there was
    /// nothing to eliminate).
    pub fn terminal(&self) -> &ClassSpec {
        self.stages
            .last()
            .map(|s| s.expanded())
            .unwrap_or(&self.base)
    }

    /// The output signature a terminal rule must have so the composed lift
    /// lands on `target` over the base class: one doubling per infinite
    /// stage.
    pub fn terminal_target(&self, target: &Arc<Signature>) -> Arc<Signature> {
        let mut sig = Arc::clone(target);
        for stage in &self.stages {
            if matches!(stage, Stage::Inf(_)) {
                sig = dbl_signature(&sig);
            }
        }
        sig
    }

    /// Compose the per-stage lifts: a rule over the terminal class becomes a
    /// rule over the base class with the given output signature.
    pub fn lift(
        &self,
        rule: Box<dyn TypeRule>,
        target: &Arc<Signature>,
    ) -> Result<Box<dyn TypeRule>, EliminateError> {
        // Walk stages from the terminal end back to the base, undoing one
        // doubling per infinite stage.
        let mut targets: Vec<Arc<Signature>> = Vec::with_capacity(self.stages.len());
        let mut sig = Arc::clone(target);
        for stage in &self.stages {
            targets.push(Arc::clone(&sig));
            if matches!(stage, Stage::Inf(_)) {
                sig = dbl_signature(&sig);
            }
        }
        let mut lifted = rule;
        for (stage, stage_target) in self.stages.iter().zip(targets.iter()).rev() {
            lifted = match stage {
                Stage::Fin(f) => lift_rule_fin(lifted, f.clone()),
                Stage::Inf(i) => lift_rule_inf(lifted, i.clone(), Arc::clone(stage_target))?,
            };
        }
        Ok(lifted)
    }

    /// Machine-readable stage manifest.
    pub fn manifest(&self) -> serde_json::Value {
        let stages: Vec<serde_json::Value> = self
            .stages
            .iter()
            .map(|s| match s {
                Stage::Fin(f) => serde_json::json!({
                    "kind": "eliminate-fin",
                    "relation": f.base.eqrels[f.d].id,
                    "labels": f.count,
                    "label_symbols": f
                        .label_symbols
                        .iter()
                        .map(|&sym| f.expanded.sig.name(sym))
                        .collect::<Vec<_>>(),
                }),
                Stage::Inf(i) => serde_json::json!({
                    "kind": "eliminate-inf",
                    "relation": i.data.base.eqrels[i.data.d].id,
                    "class_symbol": i.expanded.sig.name(i.data.c_symbol),
                    "side_tags": i
                        .data
                        .base
                        .sig
                        .symbols()
                        .map(|(sym, name, _)| {
                            let tag = match i.data.symbol_map[sym] {
                                None => "eliminated",
                                Some((_, SideTag::ClassSide)) => "class-side",
                                Some((_, SideTag::ElementSide)) => "element-side",
                                Some((_, SideTag::Doubled)) => "doubled",
                            };
                            serde_json::json!({ "symbol": name, "tag": tag })
                        })
                        .collect::<Vec<_>>(),
                }),
            })
            .collect();
        serde_json::json!({
            "stages": stages,
            "terminal_eqrels": self.terminal().eqrels.len(),
        })
    }
}

/// Load a class document from a file, resolving transform references
/// relative to the file's directory.
pub fn load_class(path: &Path) -> Result<ClassSpec, EliminateError> {
    let text = std::fs::read_to_string(path).map_err(|e| EliminateError::Load {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let doc = parse_document(&text).map_err(|e| EliminateError::Load {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    match doc {
        SpecDocument::Class(spec) => Ok(spec),
        SpecDocument::Transform(t) => {
            let base_path = path
                .parent()
                .map(|dir| dir.join(&t.base_path))
                .unwrap_or_else(|| t.base_path.clone().into());
            let base = load_class(&base_path)?;
            let d = base.eqrel(&t.rel_id)?;
            match t.kind {
                TransformKind::EliminateFin => Ok(class_fin(&base, d)?.expanded),
                TransformKind::EliminateInf => {
                    Ok(class_inf(&base, d, inf::DEFAULT_SEARCH_BOUND)?.expanded)
                }
            }
        }
    }
}
