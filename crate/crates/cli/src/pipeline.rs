//! Stage execution and artifact writing.
//!
//! - Stages run strictly in config order, passing products in memory: the
//!   ball or star from `gen`, the coned graph from `cone`, the closure
//!   trace from `prox-close`, the promotion from `promote`. Nothing is
//!   reloaded from disk, so a run is a pure function of config and seed.
//! - Every completed stage serializes one JSON artifact. A stage whose
//!   checks fail still writes its full report, then halts the pipeline;
//!   a stage that errors outright writes a stub naming the error.
//! - `summary.csv` collects every numeric leaf of every artifact as
//!   `stage,file,field,value` rows, in artifact order, so each number in
//!   the table points back to a named JSON field.
//! - The only randomness is the de-electrification endpoint sampler, which
//!   draws from the config seed; orchestration is single-threaded and
//!   stage internals reduce in index order, so artifacts are byte-identical
//!   across runs and thread counts.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use coarseforge::closure::{coset_family, prox_closure, ClosureTrace};
use coarseforge::coning::{cone_off, DeElectMode};
use coarseforge::deelect::{algo_constants, good_quasigeodesic_with};
use coarseforge::factors::{check_factor_system, check_weak_factor_system, promote, Promotion};
use coarseforge::generators::{cayley_ball, star_fixture, CayleyBall, PresentationSpec};
use coarseforge::graph::MetricGraph;
use coarseforge::hhs::{build_hhs, verify_axioms};
use coarseforge::hyperbolicity::hyperbolicity;
use coarseforge::rng::XorShift64Star;
use coarseforge::subspace::SubspaceRef;
use coarseforge::ConedGraph;

use crate::config::{
    CheckMode, ConeParams, DeelectParams, ExperimentConfig, FactorCheckParams, GenParams,
    HhsVerifyParams, PromoteParams, ProxCloseParams, Stage, SurgeryMode,
};

/// Which artifacts a run persists: everything (the `run` subcommand) or a
/// single stage's file (the per-stage subcommands, which execute their
/// prerequisites in memory without writing them).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Persist {
    All,
    Only(Stage),
}

/// Outcome of a full run: every stage completed and passed, or the named
/// stage's checks failed (its report is on disk).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Passed,
    Failed(Stage),
}

/// In-memory products of the stages run so far.
struct Pipeline {
    seed: u64,
    ball: Option<CayleyBall>,
    star: Option<(MetricGraph, Vec<(String, Vec<usize>)>)>,
    coned: Option<ConedGraph>,
    trace: Option<ClosureTrace>,
    promotion: Option<Promotion>,
}

/// Validate, execute, and persist an experiment. Check failures halt the
/// pipeline after writing the failing stage's report and return
/// `RunOutcome::Failed`; hard errors persist a stub artifact and bubble up.
pub fn execute(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: u64,
    persist: Persist,
) -> Result<RunOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let mut pipe = Pipeline {
        seed,
        ball: None,
        star: None,
        coned: None,
        trace: None,
        promotion: None,
    };
    let mut rows: Vec<[String; 4]> = Vec::new();
    let keep = |stage: Stage| match persist {
        Persist::All => true,
        Persist::Only(s) => s == stage,
    };

    for &stage in &cfg.pipeline {
        let file = stage.artifact_name();
        match pipe.run_stage(stage, cfg) {
            Ok((value, ok)) => {
                if keep(stage) || !ok {
                    write_json(&out_dir.join(file), &value)?;
                }
                if persist == Persist::All {
                    flatten_into(&mut rows, stage.name(), file, &value);
                }
                if !ok {
                    if persist == Persist::All {
                        write_csv(&out_dir.join("summary.csv"), &rows)?;
                    }
                    return Ok(RunOutcome::Failed(stage));
                }
            }
            Err(e) => {
                let stub = json!({ "stage": stage.name(), "error": format!("{e:#}") });
                write_json(&out_dir.join(file), &stub)?;
                if persist == Persist::All {
                    write_csv(&out_dir.join("summary.csv"), &rows)?;
                }
                return Err(e.context(format!("stage {stage} failed")));
            }
        }
    }
    if persist == Persist::All {
        write_csv(&out_dir.join("summary.csv"), &rows)?;
    }
    Ok(RunOutcome::Passed)
}

/// Run the gen prerequisites of a config and measure the host's
/// hyperbolicity constants; used by the `delta` subcommand, which sits
/// outside the pipeline proper.
pub fn delta_artifact(cfg: &ExperimentConfig, seed: u64) -> Result<Value> {
    cfg.validate()?;
    let mut pipe = Pipeline {
        seed,
        ball: None,
        star: None,
        coned: None,
        trace: None,
        promotion: None,
    };
    let (_, ok) = pipe.run_stage(Stage::Gen, cfg)?;
    debug_assert!(ok);
    let host = pipe.host()?;
    let report = hyperbolicity(host)?;
    Ok(json!({
        "stage": "delta",
        "vertices": host.n(),
        "edges": host.edges().len(),
        "report": report,
    }))
}

impl Pipeline {
    fn host(&self) -> Result<&MetricGraph> {
        if let Some(ball) = &self.ball {
            return Ok(&ball.graph);
        }
        if let Some((g, _)) = &self.star {
            return Ok(g);
        }
        Err(anyhow!("gen has not run"))
    }

    fn run_stage(&mut self, stage: Stage, cfg: &ExperimentConfig) -> Result<(Value, bool)> {
        match stage {
            Stage::Gen => self.gen(cfg.gen.as_ref().expect("validated")),
            Stage::Cone => self.cone(cfg.cone.as_ref().expect("validated")),
            Stage::Deelectrify => self.deelectrify(&cfg.deelectrify.clone().unwrap_or_default()),
            Stage::FactorCheck => {
                self.factor_check(&cfg.factor_check.clone().unwrap_or_default())
            }
            Stage::ProxClose => self.prox_close(cfg.prox_close.as_ref().expect("validated")),
            Stage::Promote => self.promote_stage(&cfg.promote.clone().unwrap_or_default()),
            Stage::HhsVerify => self.hhs_verify(&cfg.hhs_verify.clone().unwrap_or_default()),
        }
    }

    fn gen(&mut self, params: &GenParams) -> Result<(Value, bool)> {
        match params {
            GenParams::Presentation { generators, rules, radius } => {
                // Inverses are implicit in a presentation: prepend the
                // free-reduction rules, then the config's relations.
                let mut all_rules = Vec::new();
                for g in generators {
                    let hi = g.to_ascii_uppercase();
                    all_rules.push((format!("{g}{hi}"), String::new()));
                    all_rules.push((format!("{hi}{g}"), String::new()));
                }
                for rule in rules {
                    if !all_rules.contains(rule) {
                        all_rules.push(rule.clone());
                    }
                }
                let spec = PresentationSpec {
                    generators: generators.clone(),
                    rules: all_rules.clone(),
                    radius: *radius,
                };
                let ball = cayley_ball(&spec)?;
                let g = &ball.graph;
                let value = json!({
                    "stage": "gen",
                    "kind": "presentation",
                    "generators": generators,
                    "rules": all_rules,
                    "radius": radius,
                    "vertices": g.n(),
                    "edges": g.edges().len(),
                    "boundary_vertices": g.boundary().len(),
                    "words": ball.words,
                });
                self.ball = Some(ball);
                Ok((value, true))
            }
            GenParams::Star { rays, ray_length } => {
                let (g, members) = star_fixture(*rays, *ray_length)?;
                let value = json!({
                    "stage": "gen",
                    "kind": "star",
                    "rays": rays,
                    "ray_length": ray_length,
                    "vertices": g.n(),
                    "edges": g.edges().len(),
                    "members": members
                        .iter()
                        .map(|(name, verts)| json!({ "name": name, "vertices": verts }))
                        .collect::<Vec<_>>(),
                });
                self.star = Some((g, members));
                Ok((value, true))
            }
        }
    }

    fn cone(&mut self, params: &ConeParams) -> Result<(Value, bool)> {
        let (members, extra) = match params {
            ConeParams::Cosets { subgroups, margin } => {
                let ball = self.ball.as_ref().ok_or_else(|| anyhow!("gen has not run"))?;
                let fam = coset_family(ball, subgroups, 0)?;
                let margin_used = margin.unwrap_or_else(|| fam.r_used());
                let keep = fam.core_cosets(margin_used);
                if keep.is_empty() {
                    bail!("no cosets survive the core margin {margin_used}");
                }
                let members: Vec<SubspaceRef> =
                    keep.iter().map(|&i| fam.cosets[i].subspace.clone()).collect();
                let extra = json!({
                    "family": "cosets",
                    "subgroups": subgroups,
                    "margin": margin_used,
                    "delta": fam.delta,
                    "k": fam.k,
                    "xi_threshold": fam.xi_threshold,
                    "cosets_total": fam.cosets.len(),
                });
                (members, extra)
            }
            ConeParams::Members => {
                let (g, named) =
                    self.star.as_ref().ok_or_else(|| anyhow!("gen has not run"))?;
                let members = named
                    .iter()
                    .map(|(name, verts)| SubspaceRef::new(g, name, verts.clone()))
                    .collect::<Result<Vec<_>, _>>()?;
                (members, json!({ "family": "members" }))
            }
        };
        let coned = cone_off(self.host()?.clone(), members)?;
        let mut value = json!({
            "stage": "cone",
            "member_count": coned.family.len(),
            "members": member_summary(&coned.family),
            "hat_vertices": coned.hat.n(),
            "hat_edges": coned.hat.edges().len(),
            "cone_edges": coned.cone_edges().count(),
        });
        merge(&mut value, extra);
        self.coned = Some(coned);
        Ok((value, true))
    }

    fn deelectrify(&mut self, params: &DeelectParams) -> Result<(Value, bool)> {
        let cg = self.coned.as_ref().ok_or_else(|| anyhow!("cone has not run"))?;
        let constants = algo_constants(cg)?;
        let core = cg.base.core(constants.big_delta);
        if core.len() < 2 {
            bail!(
                "core at margin {} keeps {} vertices; need at least 2 to sample",
                constants.big_delta,
                core.len()
            );
        }
        let mode = match params.mode {
            SurgeryMode::Total => DeElectMode::Total,
            SurgeryMode::Embedded => DeElectMode::Embedded,
        };
        let mut rng = XorShift64Star::new(self.seed);
        let mut pairs = Vec::with_capacity(params.samples);
        let mut guard = 0usize;
        while pairs.len() < params.samples {
            guard += 1;
            if guard > 64 * (params.samples + 1) {
                bail!("could not sample {} distinct core pairs", params.samples);
            }
            let x = core[rng.below(core.len())];
            let y = core[rng.below(core.len())];
            if x != y {
                pairs.push((x, y));
            }
        }

        let mut runs = Vec::with_capacity(pairs.len());
        let mut ok = true;
        for &(x, y) in &pairs {
            let gq = good_quasigeodesic_with(cg, x, y, mode, &constants)?;
            ok &= gq.diagnostics.is_empty();
            runs.push(json!({
                "x": x,
                "y": y,
                "d_base": cg.d_base(x, y),
                "d_hat": cg.d_hat(x, y),
                "hat_path_vertices": gq.gamma_prime.vertices.len(),
                "tilde_path_vertices": gq.gamma_tilde_prime.vertices.len(),
                "tau1": gq.constants.tau1,
                "tau2": gq.constants.tau2,
                "diagnostics": gq.diagnostics,
                "notes": gq.notes,
            }));
        }
        let value = json!({
            "stage": "deelectrify",
            "mode": params.mode,
            "samples": pairs.len(),
            "core_size": core.len(),
            "constants": constants,
            "runs": runs,
        });
        Ok((value, ok))
    }

    fn factor_check(&mut self, params: &FactorCheckParams) -> Result<(Value, bool)> {
        let cg = self.coned.as_ref().ok_or_else(|| anyhow!("cone has not run"))?;
        let mut members = cg.family.clone();
        if let Some(names) = &params.members {
            let mut picked = Vec::with_capacity(names.len());
            for name in names {
                let m = members
                    .iter()
                    .find(|m| &m.name == name)
                    .ok_or_else(|| anyhow!("no coned member named {name}"))?;
                picked.push(m.clone());
            }
            members = picked;
        }
        let host = self.host()?;
        let (family, report) = match params.mode {
            CheckMode::Weak => check_weak_factor_system(host, &members, params.theta_max)?,
            CheckMode::Factor => check_factor_system(host, &members)?,
        };
        let ok = report.passed();
        let value = json!({
            "stage": "factor-check",
            "mode": params.mode,
            "theta_max": params.theta_max,
            "kind": family.kind,
            "constants": family.constants,
            "members": member_summary(&family.members),
            "report": report,
        });
        Ok((value, ok))
    }

    fn prox_close(&mut self, params: &ProxCloseParams) -> Result<(Value, bool)> {
        let ball = self.ball.as_ref().ok_or_else(|| anyhow!("gen has not run"))?;
        let trace = prox_closure(ball, &params.subgroups, params.height_cap as usize)?;
        let ok = trace.stabilized_at.is_some();
        let value = json!({
            "stage": "prox-close",
            "subgroups": params.subgroups,
            "height_cap": params.height_cap,
            "level_count": trace.levels.len(),
            "final_member_count": trace.levels.last().map_or(0, Vec::len),
            "trace": trace,
        });
        self.trace = Some(trace);
        Ok((value, ok))
    }

    fn promote_stage(&mut self, params: &PromoteParams) -> Result<(Value, bool)> {
        let ball = self.ball.as_ref().ok_or_else(|| anyhow!("gen has not run"))?;
        let trace = self.trace.as_ref().ok_or_else(|| anyhow!("prox-close has not run"))?;
        let (weak, weak_report) = coarseforge::closure::closure_family(ball, trace, params.theta_max)?;
        let promotion = promote(&ball.graph, &weak)?;
        // The order cross-checks in `diagnostics` fire on rim-scale
        // artifacts (tiny boundary cosets are trivially projected onto);
        // they are recorded but the stage gates on the verified reports.
        let ok = weak_report.passed() && promotion.report.passed();
        let value = json!({
            "stage": "promote",
            "theta_max": params.theta_max,
            "weak_report": weak_report,
            "classes": promotion.classes,
            "family": {
                "kind": promotion.family.kind,
                "constants": promotion.family.constants,
                "members": member_summary(&promotion.family.members),
            },
            "report": promotion.report,
            "diagnostics": promotion.diagnostics,
        });
        self.promotion = Some(promotion);
        Ok((value, ok))
    }

    fn hhs_verify(&mut self, params: &HhsVerifyParams) -> Result<(Value, bool)> {
        let ball = self.ball.as_ref().ok_or_else(|| anyhow!("gen has not run"))?;
        let promotion =
            self.promotion.as_ref().ok_or_else(|| anyhow!("promote has not run"))?;
        let structure = build_hhs(&ball.graph, &promotion.family)?;
        let report = verify_axioms(&structure, params.budget)?;
        let ok = report.violations.is_empty();
        let value = json!({
            "stage": "hhs-verify",
            "budget": params.budget,
            "index_count": structure.index_count(),
            "names": structure.names,
            "report": report,
        });
        Ok((value, ok))
    }
}

fn member_summary(members: &[SubspaceRef]) -> Vec<Value> {
    members
        .iter()
        .map(|m| json!({ "name": m.name, "size": m.vertices.len() }))
        .collect()
}

/// Merge a flat JSON object's fields into `value` (both must be objects).
fn merge(value: &mut Value, extra: Value) {
    if let (Value::Object(dst), Value::Object(src)) = (value, extra) {
        for (k, v) in src {
            dst.insert(k, v);
        }
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn write_csv(path: &Path, rows: &[[String; 4]]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["stage", "file", "field", "value"])?;
    for row in rows {
        wtr.write_record(row)?;
    }
    let bytes = wtr.into_inner()?;
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Append one `stage,file,field,value` row per numeric leaf of `value`,
/// in serialization order, with dotted-and-indexed field paths.
fn flatten_into(rows: &mut Vec<[String; 4]>, stage: &str, file: &str, value: &Value) {
    fn walk(v: &Value, path: &str, out: &mut Vec<(String, String)>) {
        match v {
            Value::Number(n) => out.push((path.to_string(), n.to_string())),
            Value::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    walk(item, &format!("{path}[{i}]"), out);
                }
            }
            Value::Object(map) => {
                for (k, item) in map {
                    let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                    walk(item, &child, out);
                }
            }
            _ => {}
        }
    }
    let mut leaves = Vec::new();
    walk(value, "", &mut leaves);
    for (field, num) in leaves {
        rows.push([stage.to_string(), file.to_string(), field, num]);
    }
}
