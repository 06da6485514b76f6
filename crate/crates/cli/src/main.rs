//! exch-kit: class checking, disjoint amalgamation verdicts, blur tables,
//! exchangeable sampling and its statistical verifiers, equivalence-relation
//! elimination, and hierarchical-array demos.
//!
//! Exit codes: 0 success or verdict pass, 1 verdict failure (a counterexample
//! or failed test), 2 usage or input error.  Every randomized command takes a
//! mandatory seed so reruns are byte-identical.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use exch_core::amalgam::{check_ndap, check_ndap_upto, DapVerdict};
use exch_core::classdef::ClassSpec;
use exch_core::eliminate::{eliminate_all, load_class, Stage};
use exch_core::equiv::{blur_set, blur_table, validate_declarations, FalsifyOutcome};
use exch_core::hierarchy::{
    build_ap_product, build_ap_structure, check_hierarchical_invariance, mix_by_name,
    sample_ap_array,
};
use exch_core::kspec;
use exch_core::relstruct::{Element, Structure};
use exch_core::sampler::{
    builtin_rule, check_eq_symmetry, check_exchangeability, EqSymMode, MonteCarloConfig,
    RandomnessSource,
};

#[derive(Parser)]
#[command(name = "exch-kit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ClassArg {
    /// Class specification file (or a built-in name such as `equiv`).
    #[arg(long)]
    class: String,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a class, then run the bounded hereditary,
    /// amalgamation and declaration checks.
    CheckClass {
        #[command(flatten)]
        class: ClassArg,
        /// Size bound for the hereditary and declaration checks.
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Size bound for the amalgamation check (costlier).
        #[arg(long, default_value_t = 2)]
        ap_n: usize,
        #[arg(long)]
        json: bool,
    },
    /// Check the n-disjoint amalgamation property, optionally up to the
    /// declared equivalence relations.
    CheckDap {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        n: usize,
        /// Quantify over coherent partition labelings as well.
        #[arg(long)]
        upto: bool,
        /// With --upto: only require some amalgam, not one respecting the
        /// labels.
        #[arg(long)]
        weak_upto: bool,
        #[arg(long)]
        json: bool,
    },
    /// List the blurs of an element set in a structure.
    Blurs {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        structure: PathBuf,
        /// Comma-separated element list, e.g. "1,2".
        #[arg(long)]
        set: String,
        /// Drop the empty blur from the listing.
        #[arg(long)]
        no_empty_blur: bool,
        #[arg(long)]
        json: bool,
    },
    /// Sample the canonical exchangeable process over a structure.
    Sample {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        rule: String,
        #[arg(long)]
        seed: u64,
        /// Number of draws (seeds derived from the root seed).
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo check of K-exchangeability over all small members and
    /// embeddings.
    TestExch {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        rule: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0.02)]
        tv_threshold: f64,
        #[arg(long, default_value_t = 1e-3)]
        p_threshold: f64,
        #[arg(long)]
        json: bool,
    },
    /// Check eq-symmetry: the output distribution must not depend on the
    /// partition labelings.
    TestEqsym {
        #[command(flatten)]
        class: ClassArg,
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        rule: String,
        /// `exact` or `montecarlo`.
        #[arg(long, default_value = "exact")]
        mode: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0.02)]
        tv_threshold: f64,
        #[arg(long, default_value_t = 1e-3)]
        p_threshold: f64,
        #[arg(long)]
        json: bool,
    },
    /// Eliminate declared equivalence relations, emitting stage files and a
    /// manifest.
    Eliminate {
        #[command(flatten)]
        class: ClassArg,
        /// Eliminate only this declaration (must be the last); default is
        /// the full pipeline.
        #[arg(long)]
        stage: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Extension search bound for membership in transformed classes.
        #[arg(long, default_value_t = 2)]
        bound: usize,
    },
    /// Build a hierarchical grid, sample an array, and test invariance
    /// under initial-segment-preserving permutations.
    ApDemo {
        /// Comma-separated level depths, e.g. "2" or "2,3".
        #[arg(long)]
        depths: String,
        /// Per-coordinate bound of the grid.
        #[arg(long)]
        bounds: u32,
        #[arg(long)]
        mix: String,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 16)]
        precision: usize,
        /// Range of the extra free coordinate; enables the product case.
        #[arg(long)]
        plus_bound: Option<u32>,
        #[arg(long, default_value_t = 0.02)]
        tv_threshold: f64,
        #[arg(long, default_value_t = 1e-3)]
        p_threshold: f64,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn resolve_class(name: &str) -> Result<ClassSpec> {
    let path = Path::new(name);
    if path.exists() {
        return load_class(path).map_err(|e| anyhow!("{e}"));
    }
    kspec::builtin(name).ok_or_else(|| anyhow!("no such class file or built-in: `{name}`"))
}

fn read_structure(spec: &ClassSpec, path: &Path) -> Result<Structure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    Structure::parse(Arc::clone(&spec.sig), &text).map_err(|e| anyhow!("{e}"))
}

/// Returns Ok(true) for pass/success, Ok(false) for a verdict failure.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::CheckClass { class, n, ap_n, json } => {
            let spec = resolve_class(&class.class)?;
            let hereditary = spec.check_hereditary(n).map_err(|e| anyhow!("{e}"))?;
            let amalgamation = spec.check_amalgamation(ap_n).map_err(|e| anyhow!("{e}"))?;
            let declarations = validate_declarations(&spec, n).map_err(|e| anyhow!("{e}"))?;
            let pass =
                hereditary.passed() && amalgamation.passed() && !declarations.refuted();
            let report = serde_json::json!({
                "command": "check-class",
                "symbols": spec.sig.symbols().map(|(_, n, a)| format!("{n}/{a}")).collect::<Vec<_>>(),
                "constraints": spec.constraints.len(),
                "eqrels": spec.eqrels.iter().map(|d| d.id.clone()).collect::<Vec<_>>(),
                "hereditary_pass": hereditary.passed(),
                "amalgamation_pass": amalgamation.passed(),
                "declarations_pass": !declarations.refuted(),
                "checked_up_to": n,
                "pass": pass,
            });
            if json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                println!("class check up to size {n}");
                println!("  hereditary:    {}", verdict_word(hereditary.passed()));
                println!("  amalgamation:  {}", verdict_word(amalgamation.passed()));
                println!(
                    "  declarations:  {}",
                    verdict_word(!declarations.refuted())
                );
                if let FalsifyOutcome::Counterexample(w) = &declarations {
                    println!("  witness: {}", w.detail);
                    print!("{}", w.member.to_text());
                }
            }
            Ok(pass)
        }
        Command::CheckDap {
            class,
            n,
            upto,
            weak_upto,
            json,
        } => {
            let spec = resolve_class(&class.class)?;
            let verdict = if upto || weak_upto {
                check_ndap_upto(&spec, n, !weak_upto).map_err(|e| anyhow!("{e}"))?
            } else {
                check_ndap(&spec, n).map_err(|e| anyhow!("{e}"))?
            };
            let holds = verdict.holds();
            let mut body = serde_json::json!({
                "command": "check-dap",
                "n": n,
                "upto": upto || weak_upto,
                "weak": weak_upto,
                "holds": holds,
            });
            if let DapVerdict::Counterexample(ce) = &verdict {
                let parts: Vec<String> = ce.plan.parts.iter().map(|p| p.to_text()).collect();
                body["counterexample"] = serde_json::json!({
                    "parts": parts,
                    "labelings": ce.labelings.as_deref().map(render_labelings),
                });
            }
            if json {
                println!("{}", serde_json::to_string(&body)?);
            } else if holds {
                println!(
                    "{}-DAP{} holds at n = {n}",
                    n,
                    if upto || weak_upto { " (up to declared relations)" } else { "" }
                );
            } else if let DapVerdict::Counterexample(ce) = &verdict {
                println!("{n}-DAP fails; least counterexample plan:");
                for (i, part) in ce.plan.parts.iter().enumerate() {
                    println!("  part {}:", i + 1);
                    for line in part.to_text().lines() {
                        println!("    {line}");
                    }
                }
                if let Some(labelings) = &ce.labelings {
                    println!("  labelings: {}", render_labelings(labelings).join(" / "));
                }
            }
            Ok(holds)
        }
        Command::Blurs {
            class,
            structure,
            set,
            no_empty_blur,
            json,
        } => {
            let spec = resolve_class(&class.class)?;
            let s = read_structure(&spec, &structure)?;
            if !spec.contains(&s).map_err(|e| anyhow!("{e}"))? {
                bail!("structure is not a member of the class");
            }
            let elems = parse_element_list(&set)?;
            let blurs = blur_set(&spec, &s, &elems, !no_empty_blur);
            let rows = blur_table(&spec, &blurs);
            if json {
                println!(
                    "{}",
                    serde_json::to_string(&serde_json::json!({
                        "command": "blurs",
                        "set": elems,
                        "count": rows.len(),
                        "blurs": rows,
                    }))?
                );
            } else {
                println!("{} blurs of {{{set}}}", rows.len());
                for row in &rows {
                    println!("  {{{}}}  key {}", row.handles.join(", "), row.key_hex);
                }
            }
            Ok(true)
        }
        Command::Sample {
            class,
            structure,
            rule,
            seed,
            count,
            json,
        } => {
            let spec = resolve_class(&class.class)?;
            let s = read_structure(&spec, &structure)?;
            let rule = builtin_rule(&rule).map_err(|e| anyhow!("{e}"))?;
            let prepared = exch_core::sampler::PreparedSampler::new(&spec, &s, rule.as_ref())
                .map_err(|e| anyhow!("{e}"))?;
            let rs = RandomnessSource::new(seed);
            for draw in 0..count {
                let child_seed = if count == 1 { seed } else { rs.raw_at(b"sample", draw) };
                let out = prepared.sample(child_seed);
                if json {
                    println!(
                        "{}",
                        serde_json::to_string(&serde_json::json!({
                            "draw": draw,
                            "seed": child_seed,
                            "structure": out.to_text(),
                        }))?
                    );
                } else {
                    print!("{}", out.to_text());
                    if draw + 1 < count {
                        println!("---");
                    }
                }
            }
            Ok(true)
        }
        Command::TestExch {
            class,
            rule,
            n,
            seed,
            samples,
            tv_threshold,
            p_threshold,
            json,
        } => {
            let spec = resolve_class(&class.class)?;
            let rule = builtin_rule(&rule).map_err(|e| anyhow!("{e}"))?;
            let cfg = MonteCarloConfig {
                samples,
                tv_threshold,
                p_threshold,
                seed,
            };
            let report =
                check_exchangeability(&spec, rule.as_ref(), n, cfg).map_err(|e| anyhow!("{e}"))?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string(&serde_json::json!({
                        "command": "test-exch",
                        "n": n,
                        "config": cfg,
                        "pass": report.pass,
                        "worst_tv": report.worst_tv,
                        "min_p": report.min_p,
                        "members": report.members,
                        "comparisons": report.comparisons.len(),
                    }))?
                );
            } else {
                println!(
                    "exchangeability over {} members, {} comparisons: {}",
                    report.members,
                    report.comparisons.len(),
                    verdict_word(report.pass)
                );
                println!(
                    "  worst TV {:.4} (threshold {tv_threshold}), min p {:.2e} (floor {p_threshold})",
                    report.worst_tv, report.min_p
                );
            }
            Ok(report.pass)
        }
        Command::TestEqsym {
            class,
            structure,
            rule,
            mode,
            seed,
            samples,
            tv_threshold,
            p_threshold,
            json,
        } => {
            let spec = resolve_class(&class.class)?;
            let s = read_structure(&spec, &structure)?;
            let rule = builtin_rule(&rule).map_err(|e| anyhow!("{e}"))?;
            let mode = match mode.as_str() {
                "exact" => EqSymMode::Exact,
                "montecarlo" => EqSymMode::MonteCarlo(MonteCarloConfig {
                    samples,
                    tv_threshold,
                    p_threshold,
                    seed,
                }),
                other => bail!("unknown mode `{other}` (use exact or montecarlo)"),
            };
            let report =
                check_eq_symmetry(&spec, &s, rule.as_ref(), mode).map_err(|e| anyhow!("{e}"))?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string(&serde_json::json!({
                        "command": "test-eqsym",
                        "report": report,
                    }))?
                );
            } else {
                println!(
                    "eq-symmetry ({}): {}{}",
                    report.mode,
                    verdict_word(report.pass),
                    if report.vacuous { " (no finite-count declarations)" } else { "" }
                );
                match &report.max_tv_exact {
                    Some(tv) => println!("  worst conditional TV: {tv}"),
                    None => println!("  worst conditional TV: {:.4}", report.max_tv),
                }
            }
            Ok(report.pass)
        }
        Command::Eliminate {
            class,
            stage,
            out,
            bound,
        } => {
            let path = Path::new(&class.class);
            if !path.exists() {
                bail!("eliminate requires a class file path");
            }
            let spec = load_class(path).map_err(|e| anyhow!("{e}"))?;
            let pipeline = eliminate_all(&spec, bound).map_err(|e| anyhow!("{e}"))?;
            // A named stage keeps its whole prefix: each stage's base is the
            // previous stage's output.
            let stages: Vec<&Stage> = match &stage {
                Some(rel) => {
                    let pos = pipeline
                        .stages
                        .iter()
                        .position(|s| s.rel_id() == rel)
                        .ok_or_else(|| anyhow!("no stage eliminates `{rel}`"))?;
                    pipeline.stages[..=pos].iter().collect()
                }
                None => pipeline.stages.iter().collect(),
            };
            std::fs::create_dir_all(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            let base_file = out.join("stage_0.kspec");
            std::fs::copy(path, &base_file)
                .with_context(|| format!("copying the base class to {}", base_file.display()))?;
            let mut files = vec![base_file.display().to_string()];
            for (i, s) in stages.iter().enumerate() {
                let file = out.join(format!("stage_{}.kspec", i + 1));
                let body = format!(
                    "transform {} {} of \"stage_{}.kspec\";\n",
                    s.kind_name(),
                    s.rel_id(),
                    i
                );
                std::fs::write(&file, body)
                    .with_context(|| format!("writing {}", file.display()))?;
                files.push(file.display().to_string());
            }
            let mut manifest = pipeline.manifest();
            manifest["files"] = serde_json::json!(files);
            manifest["bound"] = serde_json::json!(bound);
            let manifest_path = out.join("manifest.json");
            std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
                .with_context(|| format!("writing {}", manifest_path.display()))?;
            println!("{}", serde_json::to_string(&manifest)?);
            Ok(true)
        }
        Command::ApDemo {
            depths,
            bounds,
            mix,
            seed,
            samples,
            precision,
            plus_bound,
            tv_threshold,
            p_threshold,
            json,
        } => {
            let depths: Vec<usize> = depths
                .split(',')
                .map(|d| d.trim().parse::<usize>().map_err(|e| anyhow!("bad depth: {e}")))
                .collect::<Result<_>>()?;
            let ap = if depths.len() == 1 && plus_bound.is_none() {
                build_ap_structure(depths[0], bounds).map_err(|e| anyhow!("{e}"))?
            } else {
                build_ap_product(&depths, bounds, plus_bound.unwrap_or(bounds))
                    .map_err(|e| anyhow!("{e}"))?
            };
            let mix = mix_by_name(&mix).map_err(|e| anyhow!("{e}"))?;
            let sample = sample_ap_array(&ap, mix, seed, precision).map_err(|e| anyhow!("{e}"))?;
            let report = check_hierarchical_invariance(
                &ap,
                mix,
                samples,
                seed,
                tv_threshold,
                p_threshold,
            )
            .map_err(|e| anyhow!("{e}"))?;
            if json {
                let values: Vec<serde_json::Value> = ap
                    .points
                    .iter()
                    .map(|(el, p)| {
                        serde_json::json!({
                            "element": el,
                            "levels": p.levels,
                            "plus": p.plus,
                            "value": sample.values[el],
                        })
                    })
                    .collect();
                println!(
                    "{}",
                    serde_json::to_string(&serde_json::json!({
                        "command": "ap-demo",
                        "depths": ap.depths,
                        "bound": bounds,
                        "plus_bound": ap.plus_bound,
                        "values": values,
                        "invariance": report,
                    }))?
                );
            } else {
                println!("element,coords,plus,value");
                for (el, p) in &ap.points {
                    let coords: Vec<String> = p
                        .levels
                        .iter()
                        .map(|l| {
                            l.iter()
                                .map(|c| c.to_string())
                                .collect::<Vec<_>>()
                                .join(".")
                        })
                        .collect();
                    println!(
                        "{el},{},{},{}",
                        coords.join("|"),
                        p.plus.map(|c| c.to_string()).unwrap_or_default(),
                        sample.values[el]
                    );
                }
                println!("{}", serde_json::to_string(&report)?);
            }
            Ok(report.pass)
        }
    }
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn parse_element_list(set: &str) -> Result<Vec<Element>> {
    set.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<Element>()
                .map_err(|e| anyhow!("bad element `{s}`: {e}"))
        })
        .collect()
}

fn render_labelings(labelings: &[exch_core::amalgam::PartitionLabeling]) -> Vec<String> {
    labelings
        .iter()
        .map(|l| {
            let per_rel: Vec<String> = l
                .labels
                .iter()
                .enumerate()
                .map(|(r, map)| {
                    let entries: Vec<String> = map
                        .iter()
                        .map(|(tuple, label)| {
                            let coords: Vec<String> =
                                tuple.iter().map(|x| x.to_string()).collect();
                            format!("({})={label}", coords.join(","))
                        })
                        .collect();
                    format!("rel{r}: {}", entries.join(" "))
                })
                .collect();
            per_rel.join("; ")
        })
        .collect()
}
