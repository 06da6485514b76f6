//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with its runtime and asserting both the verdict and the
//! time budget.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use exch_core::amalgam::{check_ndap, check_ndap_upto, DapVerdict};
use exch_core::classdef::ClassSpec;
use exch_core::eliminate::{
    class_fin, class_inf, dbl_signature, dbl_structure, embed_with_classes, eliminate_all,
    expand_fin, extract_labeling, lift_rule_fin, lift_rule_inf, minus_dbl, reduct_fin,
};
use exch_core::equiv::{blur_set, HandleKind};
use exch_core::hierarchy::{
    blur_to_segment, build_ap_product, build_ap_structure, check_hierarchical_invariance,
    mix_by_name, sample_ap_array, segment_to_blur, ApMix,
};
use exch_core::kspec;
use exch_core::relstruct::{Element, Signature, Structure, SymbolId};
use exch_core::sampler::{
    builtin_rule, check_eq_symmetry, check_exchangeability, class_coin_doubled_rule,
    exact_distribution, exact_tv, label_pick_rule, ratio, EqSymMode,
    MonteCarloConfig, PreparedSampler, RandomnessSource, RuleCtx, ThresholdProfile, TypeRule,
};
use exch_core::stats::{tv_distance, EmpiricalDist};

const AP_SEED: u64 = 0xa9;

fn kspec_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../kspecs")
        .join(name)
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exch-kit"))
}

fn parse(spec: &ClassSpec, text: &str) -> Structure {
    Structure::parse(Arc::clone(&spec.sig), text).unwrap()
}

struct Criterion {
    label: &'static str,
    budget: Duration,
    start: Instant,
}

impl Criterion {
    fn new(label: &'static str, budget_secs: u64) -> Self {
        Criterion {
            label,
            budget: Duration::from_secs(budget_secs),
            start: Instant::now(),
        }
    }

    fn finish(self) {
        let elapsed = self.start.elapsed();
        println!(
            "acceptance {}: PASS ({:.2}s, budget {}s)",
            self.label,
            elapsed.as_secs_f64(),
            self.budget.as_secs()
        );
        assert!(
            elapsed <= self.budget,
            "{} exceeded its time budget: {:.2}s > {}s",
            self.label,
            elapsed.as_secs_f64(),
            self.budget.as_secs()
        );
    }
}

#[test]
fn criterion_01_three_dap_failure_with_exact_counterexample() {
    let c = Criterion::new("01 three-dap-counterexample", 5);
    let k = kspec::builtin("equiv").unwrap();
    let verdict = check_ndap(&k, 3).unwrap();
    let DapVerdict::Counterexample(ce) = verdict else {
        panic!("3-DAP must fail for the one-equivalence-relation class");
    };
    // The expected plan: 2~3 / 1~3 / 1 unrelated to 2.
    let expected = [
        parse(&k, "universe: 2 3\nR 2 2\nR 2 3\nR 3 2\nR 3 3\n"),
        parse(&k, "universe: 1 3\nR 1 1\nR 1 3\nR 3 1\nR 3 3\n"),
        parse(&k, "universe: 1 2\nR 1 1\nR 2 2\n"),
    ];
    for (i, want) in expected.iter().enumerate() {
        assert!(
            ce.plan.parts[i].isomorphism_to(want).is_some(),
            "part {} is not isomorphic to the expected structure",
            i + 1
        );
    }
    // And the CLI reports it with exit code 1.
    let out = bin()
        .args(["check-dap", "--class"])
        .arg(kspec_path("equiv.kspec"))
        .args(["--n", "3", "--json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let body: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(body["holds"], false);
    assert_eq!(body["counterexample"]["parts"].as_array().unwrap().len(), 3);
    c.finish();
}

#[test]
fn criterion_02_two_dap_and_labeled_dap_hold() {
    let c = Criterion::new("02 dap-and-labeled-dap", 240);
    for name in ["equiv", "equiv2"] {
        let k = kspec::builtin(name).unwrap();
        assert!(check_ndap(&k, 2).unwrap().holds(), "{name}: 2-DAP");
        for n in [3, 4] {
            let inner = Instant::now();
            assert!(
                check_ndap_upto(&k, n, true).unwrap().holds(),
                "{name}: {n}-DAP up to labelings"
            );
            assert!(
                inner.elapsed() <= Duration::from_secs(60),
                "{name}: {n}-DAP up-to check exceeded 60 s"
            );
        }
    }
    // CLI surface: exit code 0 on the labeled check.
    let out = bin()
        .args(["check-dap", "--class"])
        .arg(kspec_path("equiv.kspec"))
        .args(["--n", "3", "--upto"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    c.finish();
}

#[test]
fn criterion_03_blur_counts_match_worked_examples() {
    let c = Criterion::new("03 blur-counts", 1);
    // Independent relations: nonempty blurs of a point are exactly
    // {=}, {R, S}, {R}, {S}.
    let k1 = kspec::builtin("two_eq").unwrap();
    let s1 = parse(&k1, "universe: 9\nR 9 9\nS 9 9\n");
    let blurs = blur_set(&k1, &s1, &[9], true);
    let nonempty: Vec<BTreeSet<HandleKind>> = blurs
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| b.0.iter().map(|h| h.kind).collect())
        .collect();
    assert_eq!(nonempty.len(), 4);
    let expect: BTreeSet<BTreeSet<HandleKind>> = [
        BTreeSet::from([HandleKind::Identity]),
        BTreeSet::from([HandleKind::Rel(0), HandleKind::Rel(1)]),
        BTreeSet::from([HandleKind::Rel(0)]),
        BTreeSet::from([HandleKind::Rel(1)]),
    ]
    .into_iter()
    .collect();
    assert_eq!(nonempty.into_iter().collect::<BTreeSet<_>>(), expect);

    // Nested relations: the two-handle antichain disappears.
    let k2 = kspec::builtin("two_eq_nested").unwrap();
    let s2 = parse(&k2, "universe: 9\nR 9 9\nS 9 9\n");
    let blurs = blur_set(&k2, &s2, &[9], true);
    let nonempty: BTreeSet<BTreeSet<HandleKind>> = blurs
        .iter()
        .filter(|b| !b.is_empty())
        .map(|b| b.0.iter().map(|h| h.kind).collect())
        .collect();
    let expect: BTreeSet<BTreeSet<HandleKind>> = [
        BTreeSet::from([HandleKind::Identity]),
        BTreeSet::from([HandleKind::Rel(0)]),
        BTreeSet::from([HandleKind::Rel(1)]),
    ]
    .into_iter()
    .collect();
    assert_eq!(nonempty.len(), 3);
    assert_eq!(nonempty, expect);
    c.finish();
}

/// An element-wise rule of the failed-representation shape: membership is a
/// boolean function of two threshold indicators, one on the shared variate
/// and one on the element's own variate.  The class structure is invisible
/// to it by construction.
struct ElementWise {
    table: [bool; 4],
    shared_cut: (i64, i64),
    own_cut: (i64, i64),
    target: Arc<Signature>,
}

impl TypeRule for ElementWise {
    fn name(&self) -> &str {
        "element_wise_probe"
    }

    fn target(&self) -> &Arc<Signature> {
        &self.target
    }

    fn decide(&self, ctx: &RuleCtx) -> bool {
        let shared = ctx.xi_le(&ctx.empty_blur(), self.shared_cut.0, self.shared_cut.1);
        let own = ctx.xi_le(
            &ctx.identity_blur(ctx.tuple[0]),
            self.own_cut.0,
            self.own_cut.1,
        );
        self.table[2 * usize::from(shared) + usize::from(own)]
    }

    fn profile(&self) -> Option<ThresholdProfile> {
        Some(ThresholdProfile {
            cuts: vec![
                ratio(self.shared_cut.0, self.shared_cut.1),
                ratio(self.own_cut.0, self.own_cut.1),
            ],
            uses_orderings: false,
        })
    }
}

#[test]
fn criterion_04_classcoin_exact_facts_and_failed_representation() {
    let c = Criterion::new("04 classcoin-exact", 30);
    let k = kspec::builtin("equiv").unwrap();
    let same_class = parse(&k, "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\n");
    let cross_class = parse(&k, "universe: 1 2\nR 1 1\nR 2 2\n");
    let rule = builtin_rule("classcoin").unwrap();
    let p: SymbolId = rule.target().lookup("P").unwrap();
    let both = |dist: &exch_core::sampler::ExactDistribution| {
        dist.probability_that(|o| o.holds(p, &[1]) && o.holds(p, &[2]))
    };
    let same = exact_distribution(&k, &same_class, rule.as_ref()).unwrap();
    let cross = exact_distribution(&k, &cross_class, rule.as_ref()).unwrap();
    assert_eq!(both(&same), ratio(1, 2));
    assert_eq!(both(&cross), ratio(1, 4));

    // No element-wise rule with one threshold per variate reaches both
    // values: the two fixtures are indistinguishable to it, so the two
    // probabilities always coincide.  Exhaust the 16 boolean tables against
    // the declared cut-point grid.
    let cuts: [(i64, i64); 5] = [(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)];
    let target = Arc::new(Signature::new(vec![("P".into(), 1)]).unwrap());
    let mut attained = false;
    for mask in 0u8..16 {
        let table = [
            mask & 1 != 0,
            mask & 2 != 0,
            mask & 4 != 0,
            mask & 8 != 0,
        ];
        for shared_cut in cuts {
            for own_cut in cuts {
                let probe = ElementWise {
                    table,
                    shared_cut,
                    own_cut,
                    target: Arc::clone(&target),
                };
                let same = both(&exact_distribution(&k, &same_class, &probe).unwrap());
                let cross = both(&exact_distribution(&k, &cross_class, &probe).unwrap());
                assert_eq!(
                    same, cross,
                    "an element-wise rule distinguished the fixtures"
                );
                if same == ratio(1, 2) && cross == ratio(1, 4) {
                    attained = true;
                }
            }
        }
    }
    assert!(
        !attained,
        "some element-wise rule attained both target probabilities"
    );
    c.finish();
}

#[test]
fn criterion_05_eq_symmetry_exact_verdicts() {
    let c = Criterion::new("05 eq-symmetry", 5);
    let k = kspec::builtin("equiv2").unwrap();
    let s = parse(&k, "universe: 1 2\nR 1 1\nR 2 2\n");
    let good = builtin_rule("twoclass_pick").unwrap();
    let report = check_eq_symmetry(&k, &s, good.as_ref(), EqSymMode::Exact).unwrap();
    assert!(report.pass);
    assert_eq!(report.max_tv_exact.as_deref(), Some("0"));
    let bad = builtin_rule("twoclass_pick_bad").unwrap();
    let report = check_eq_symmetry(&k, &s, bad.as_ref(), EqSymMode::Exact).unwrap();
    assert!(!report.pass);
    assert_eq!(report.max_tv_exact.as_deref(), Some("1/2"));
    c.finish();
}

#[test]
fn criterion_06_exchangeability_monte_carlo() {
    let c = Criterion::new("06 exchangeability", 120);
    let k = kspec::builtin("equiv").unwrap();
    let cfg = MonteCarloConfig {
        samples: 100_000,
        tv_threshold: 0.02,
        p_threshold: 1e-3,
        seed: 1,
    };
    let rule = builtin_rule("classcoin").unwrap();
    let report = check_exchangeability(&k, rule.as_ref(), 3, cfg).unwrap();
    assert!(
        report.pass,
        "classcoin: worst tv {}, min p {}",
        report.worst_tv, report.min_p
    );
    assert!(report.worst_tv <= 0.02);
    assert!(report.min_p >= 1e-3);

    let planted = builtin_rule("pin_first").unwrap();
    let report = check_exchangeability(&k, planted.as_ref(), 2, cfg).unwrap();
    assert!(!report.pass);
    assert!(report.worst_tv >= 0.1);
    c.finish();
}

#[test]
fn criterion_07_elimination_round_trips() {
    let c = Criterion::new("07 elimination-round-trips", 60);

    // Finite case: expand/reduct identities on 200 members of the expanded
    // class (every base member of size up to 7 with every valid labeling).
    let k2 = kspec::builtin("equiv2").unwrap();
    let exp = class_fin(&k2, 0).unwrap();
    let mut checked = 0usize;
    let mut base = k2.clone();
    base.enumeration_cap = 7;
    'outer: for n in 0..=7usize {
        for member in base.enumerate(n).unwrap() {
            for labels in valid_labelings(&k2, &member) {
                let expanded = expand_fin(&exp, &member, &labels).unwrap();
                assert!(exp.expanded.contains(&expanded).unwrap());
                assert_eq!(reduct_fin(&exp, &expanded), member);
                assert_eq!(extract_labeling(&exp, &expanded), labels);
                let rebuilt =
                    expand_fin(&exp, &reduct_fin(&exp, &expanded), &extract_labeling(&exp, &expanded))
                        .unwrap();
                assert_eq!(rebuilt, expanded);
                checked += 1;
                if checked >= 200 {
                    break 'outer;
                }
            }
        }
    }
    assert!(checked >= 200, "only {checked} members checked");
    // The direct enumeration agrees with the expansion view at small sizes.
    for n in 0..=3usize {
        let direct = exp.expanded.enumerate(n).unwrap().len();
        let composed: usize = k2
            .enumerate(n)
            .unwrap()
            .iter()
            .map(|m| valid_labelings(&k2, m).len())
            .sum();
        assert_eq!(direct, composed, "size {n}");
    }

    // Doubling round trip on output structures over decoded universes.
    let k = kspec::builtin("equiv").unwrap();
    let inf = class_inf(&k, 0, 2).unwrap();
    let p_sig = Arc::new(Signature::new(vec![("P".into(), 1)]).unwrap());
    let dbl = dbl_signature(&p_sig);
    for text in [
        "universe: 1 2\nR 1 1\nR 2 2\nR 1 2\nR 2 1\n",
        "universe: 1 2\nR 1 1\nR 2 2\n",
        "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 2 3\nR 3 2\n",
    ] {
        let s = parse(&k, text);
        let (_, _, decoded) = embed_with_classes(&inf.data, &s).unwrap();
        for pattern in 0u32..8 {
            let facts: Vec<(SymbolId, Vec<Element>)> = decoded
                .structure
                .universe()
                .iter()
                .enumerate()
                .filter(|(i, _)| pattern & (1 << (i % 3)) != 0)
                .map(|(_, &x)| (0, vec![x]))
                .collect();
            let t = Structure::new(
                Arc::clone(&p_sig),
                decoded.structure.universe().to_vec(),
                facts,
            )
            .unwrap();
            let doubled = dbl_structure(&t, &dbl, &decoded).unwrap();
            assert_eq!(minus_dbl(&doubled, &p_sig, &decoded).unwrap(), t);
        }
    }

    // Embedding into the decoded expansion for every small member.
    for n in 0..=4usize {
        for s in k.enumerate(n).unwrap() {
            let (_, pi, decoded) = embed_with_classes(&inf.data, &s).unwrap();
            assert!(
                s.is_embedding_into(&pi, &decoded.structure).unwrap(),
                "embedding failed for a member of size {n}"
            );
        }
    }
    c.finish();
}

fn valid_labelings(
    spec: &ClassSpec,
    member: &Structure,
) -> Vec<std::collections::BTreeMap<Vec<Element>, u32>> {
    let blocks = exch_core::equiv::classes(spec, 0, member).unwrap();
    let mut out = Vec::new();
    let count = match spec.eqrels[0].count {
        exch_core::classdef::EqClassCount::Finite(c) => c,
        _ => unreachable!("finite fixture"),
    };
    let mut labels = vec![0u32; blocks.len()];
    fn rec(
        blocks: &[Vec<Vec<Element>>],
        count: u32,
        k: usize,
        labels: &mut Vec<u32>,
        out: &mut Vec<std::collections::BTreeMap<Vec<Element>, u32>>,
    ) {
        if k == blocks.len() {
            let mut map = std::collections::BTreeMap::new();
            for (b, block) in blocks.iter().enumerate() {
                for tuple in block {
                    map.insert(tuple.clone(), labels[b]);
                }
            }
            out.push(map);
            return;
        }
        for l in 1..=count {
            if labels[..k].contains(&l) {
                continue;
            }
            labels[k] = l;
            rec(blocks, count, k + 1, labels, out);
        }
    }
    rec(&blocks, count, 0, &mut labels, &mut out);
    out
}

#[test]
fn criterion_08_lift_correctness() {
    let c = Criterion::new("08 lift-correctness", 180);

    // Finite lift: exact table equality against the direct rule on every
    // two-class fixture shape.
    let k2 = kspec::builtin("equiv2").unwrap();
    let exp = class_fin(&k2, 0).unwrap();
    let direct = builtin_rule("twoclass_pick").unwrap();
    for text in [
        "universe: 1 2\nR 1 1\nR 2 2\n",
        "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n",
        "universe: 1 2 3 4\nR 1 1\nR 2 2\nR 3 3\nR 4 4\nR 1 2\nR 2 1\nR 3 4\nR 4 3\n",
    ] {
        let s = parse(&k2, text);
        let lifted = lift_rule_fin(
            label_pick_rule("P_r1_1".into(), "P_r1_2".into()),
            exp.clone(),
        );
        let lifted_dist = exact_distribution(&k2, &s, lifted.as_ref()).unwrap();
        let direct_dist = exact_distribution(&k2, &s, direct.as_ref()).unwrap();
        assert_eq!(exact_tv(&lifted_dist, &direct_dist), ratio(0, 1));
    }

    // Infinite lift: the lifted class coin matches the direct one within
    // tolerance on every 2- and 3-class fixture.
    let k = kspec::builtin("equiv").unwrap();
    let inf = class_inf(&k, 0, 2).unwrap();
    let direct = builtin_rule("classcoin").unwrap();
    let fixtures = [
        "universe: 1 2\nR 1 1\nR 2 2\n",
        "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n",
        "universe: 1 2 3 4\nR 1 1\nR 2 2\nR 3 3\nR 4 4\nR 1 2\nR 2 1\nR 3 4\nR 4 3\n",
        "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\n",
        "universe: 1 2 3 4\nR 1 1\nR 2 2\nR 3 3\nR 4 4\nR 1 2\nR 2 1\n",
    ];
    let samples = 100_000u64;
    let rs = RandomnessSource::new(0x11f7);
    for (fi, text) in fixtures.iter().enumerate() {
        let s = parse(&k, text);
        let lifted = lift_rule_inf(
            class_coin_doubled_rule(),
            inf.clone(),
            Arc::clone(direct.target()),
        )
        .unwrap();
        let lifted_prepared = PreparedSampler::new(&k, &s, lifted.as_ref()).unwrap();
        let direct_prepared = PreparedSampler::new(&k, &s, direct.as_ref()).unwrap();
        let mut lifted_dist = EmpiricalDist::new();
        let mut direct_dist = EmpiricalDist::new();
        let key_l = format!("lift:{fi}").into_bytes();
        let key_d = format!("direct:{fi}").into_bytes();
        for j in 0..samples {
            lifted_dist.record(lifted_prepared.sample(rs.raw_at(&key_l, j)).canonical_form());
            direct_dist.record(direct_prepared.sample(rs.raw_at(&key_d, j)).canonical_form());
        }
        let tv = tv_distance(&lifted_dist, &direct_dist).unwrap();
        assert!(tv <= 0.02, "fixture {fi}: tv = {tv}");
    }
    c.finish();
}

#[test]
fn criterion_09_eliminated_classes_reach_dap() {
    let c = Criterion::new("09 elimination-endpoint", 120);
    for name in ["equiv", "equiv2"] {
        let k = kspec::builtin(name).unwrap();
        let pipeline = eliminate_all(&k, 2).unwrap();
        assert_eq!(pipeline.stages.len(), 1, "{name}");
        let terminal = pipeline.terminal();
        assert!(terminal.eqrels.is_empty());
        for n in [3, 4] {
            assert!(
                check_ndap(terminal, n).unwrap().holds(),
                "{name}: terminal class fails {n}-DAP"
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_10_hierarchical_correspondence_and_invariance() {
    let c = Criterion::new("10 hierarchical-arrays", 120);

    // Blur/segment maps are mutually inverse, exhaustively.
    for r in 1..=4usize {
        let ap = build_ap_structure(r, 2).unwrap();
        for &el in ap.points.keys() {
            let blurs = blur_set(&ap.spec, &ap.structure, &[el], true);
            assert_eq!(blurs.len(), r + 1);
            let mut seen = BTreeSet::new();
            for blur in &blurs {
                let seg = blur_to_segment(&ap, blur, el).unwrap();
                assert!(seen.insert(seg.clone()));
                assert_eq!(&segment_to_blur(&ap, &seg, el).unwrap(), blur);
            }
        }
    }
    let ap = build_ap_product(&[2, 2], 2, 2).unwrap();
    for &el in ap.points.keys() {
        let blurs = blur_set(&ap.spec, &ap.structure, &[el], true);
        let mut seen = BTreeSet::new();
        for blur in blurs
            .iter()
            .filter(|b| !b.0.iter().any(|h| matches!(h.kind, HandleKind::Identity)))
        {
            let seg = blur_to_segment(&ap, blur, el).unwrap();
            assert!(seen.insert(seg.clone()));
            assert_eq!(&segment_to_blur(&ap, &seg, el).unwrap(), blur);
        }
        assert_eq!(seen.len(), 9);
    }

    // Invariance under initial-segment-preserving permutations.
    let grid = build_ap_structure(2, 2).unwrap();
    for name in ["proj_root", "proj_leaf", "chain_avg"] {
        let mix = mix_by_name(name).unwrap();
        let report =
            check_hierarchical_invariance(&grid, mix, 100_000, AP_SEED, 0.02, 1e-3).unwrap();
        assert!(
            report.pass,
            "{name}: tv {} p {}",
            report.verdict.tv, report.verdict.p_value
        );
    }
    let planted =
        check_hierarchical_invariance(&grid, ApMix::CoordParity, 100_000, AP_SEED, 0.02, 1e-3)
            .unwrap();
    assert!(!planted.pass);

    // Product output independent of the extra coordinate, exactly, at a
    // fixed seed.
    let product = build_ap_product(&[2], 2, 3).unwrap();
    for name in ["proj_root", "proj_leaf", "chain_avg"] {
        let mix = mix_by_name(name).unwrap();
        let sample = sample_ap_array(&product, mix, 0x5eed, 16).unwrap();
        for (&a, pa) in &product.points {
            for (&b, pb) in &product.points {
                if pa.levels == pb.levels {
                    assert_eq!(sample.values[&a].to_bits(), sample.values[&b].to_bits());
                }
            }
        }
    }
    c.finish();
}

#[test]
fn criterion_11_deterministic_json_outputs() {
    let c = Criterion::new("11 determinism", 120);
    let runs: Vec<Vec<String>> = vec![
        vec![
            "check-dap".into(),
            "--class".into(),
            kspec_path("equiv.kspec").display().to_string(),
            "--n".into(),
            "3".into(),
            "--json".into(),
        ],
        vec![
            "sample".into(),
            "--class".into(),
            kspec_path("equiv.kspec").display().to_string(),
            "--structure".into(),
            structure_file(),
            "--rule".into(),
            "classcoin".into(),
            "--seed".into(),
            "42".into(),
            "--count".into(),
            "5".into(),
            "--json".into(),
        ],
        vec![
            "test-exch".into(),
            "--class".into(),
            kspec_path("equiv.kspec").display().to_string(),
            "--rule".into(),
            "classcoin".into(),
            "--n".into(),
            "2".into(),
            "--seed".into(),
            "7".into(),
            "--samples".into(),
            "3000".into(),
            "--json".into(),
        ],
        vec![
            "test-eqsym".into(),
            "--class".into(),
            kspec_path("equiv2.kspec").display().to_string(),
            "--structure".into(),
            structure_file_2class(),
            "--rule".into(),
            "twoclass_pick".into(),
            "--mode".into(),
            "montecarlo".into(),
            "--seed".into(),
            "9".into(),
            "--samples".into(),
            "3000".into(),
            "--json".into(),
        ],
        vec![
            "ap-demo".into(),
            "--depths".into(),
            "2".into(),
            "--bounds".into(),
            "2".into(),
            "--mix".into(),
            "chain_avg".into(),
            "--seed".into(),
            "5".into(),
            "--samples".into(),
            "3000".into(),
            "--tv-threshold".into(),
            "0.05".into(),
            "--json".into(),
        ],
    ];
    for args in runs {
        let first = bin().args(&args).output().unwrap();
        let second = bin().args(&args).output().unwrap();
        assert_eq!(
            first.stdout, second.stdout,
            "non-deterministic output for {args:?}"
        );
        assert!(!first.stdout.is_empty());
    }
    c.finish();
}

fn structure_file() -> String {
    let path = std::env::temp_dir().join("exch_acceptance_equiv_structure.txt");
    std::fs::write(
        &path,
        "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n",
    )
    .unwrap();
    path.display().to_string()
}

fn structure_file_2class() -> String {
    let path = std::env::temp_dir().join("exch_acceptance_equiv2_structure.txt");
    std::fs::write(&path, "universe: 1 2\nR 1 1\nR 2 2\n").unwrap();
    path.display().to_string()
}
