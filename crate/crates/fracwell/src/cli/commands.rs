//! Subcommand implementations. Each returns an exit code and writes its artifacts atomically.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{InitialSpec, ScenarioConfig};
use crate::dynamics::{self, ConcavityMonitor, Status, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::io;
use crate::mesh_space::{estimate_embedding_constants, EmbeddingConstants, GridFunction};
use crate::nfunction::{check_structural_conditions, SamplingPlan, Status as CondStatus};
use crate::operator::{self, Problem};
use crate::sampler::DirectionSampler;
use crate::variational::{self, ClassifyOptions, DepthCurve, Exponents, Region, VariationalReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONDITION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Condition { .. } => EXIT_CONDITION,
        _ => EXIT_RUNTIME,
    }
}

/// Output switches shared by the subcommands.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub out: PathBuf,
    /// Compare against the dense reference quadrature and write `diagnostics.json`.
    pub diagnostics: bool,
    /// Write `stiffness.csv` and `jacobian.csv` at the initial state.
    pub dump_matrices: bool,
}

/// Exit code plus a one-line summary for the terminal.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Self { code: EXIT_OK, summary }
    }

    fn from_error(e: &Error) -> Self {
        Self { code: exit_code(e), summary: format!("error: {e}") }
    }
}

fn outcome(r: Result<Outcome>) -> Outcome {
    r.unwrap_or_else(|e| Outcome::from_error(&e))
}

#[derive(Serialize)]
struct Header<'a, T: Serialize> {
    name: &'a Option<String>,
    seed: u64,
    result: &'a Option<String>,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(dir: &Path, file: &str, kind: &str, cfg: &ScenarioConfig, body: T) -> Result<()> {
    let doc = Header { name: &cfg.name, seed: cfg.seed, result: &cfg.result, body };
    io::write_atomic(&dir.join(file), &io::json_document(kind, &doc)?)
}

/// Problem plus the sampled quantities most commands need.
pub struct Scenario<'a> {
    pub cfg: &'a ScenarioConfig,
    pub problem: Problem<f64>,
    pub directions: Vec<Vec<f64>>,
}

/// Initial state and what was needed to build it.
pub struct InitialData {
    pub u: Vec<f64>,
    pub details: Value,
}

impl<'a> Scenario<'a> {
    pub fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        let problem = cfg.problem()?;
        let m = problem.mesh();
        let directions = DirectionSampler::with_total(cfg.analysis.directions, cfg.seed).directions(m.length, m.nodes);
        Ok(Self { cfg, problem, directions })
    }

    pub fn depth_curve(&self) -> Result<DepthCurve> {
        let grid = self.cfg.analysis.delta_grid.clone().unwrap_or_else(variational::default_delta_grid);
        variational::depth_curve(&self.problem, &grid, &self.directions)
    }

    pub fn embedding(&self) -> Result<EmbeddingConstants<f64>> {
        estimate_embedding_constants(&self.problem.disc, &self.problem.source, self.cfg.analysis.embedding_samples, self.cfg.seed)
    }

    fn nodal_expr(&self, src: &str) -> Result<Vec<f64>> {
        let e = crate::expr::Expr::parse(src)?;
        let m = self.problem.mesh();
        Ok((1..=m.nodes).map(|i| e.eval(m.x(i), 0.0)).collect())
    }

    pub fn initial(&self, curve: &DepthCurve, emb: Option<&EmbeddingConstants<f64>>) -> Result<InitialData> {
        let pr = &self.problem;
        let spec = self
            .cfg
            .initial
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs an [initial] section".into()))?;
        match spec {
            InitialSpec::Expression { expr, scale } => {
                let u = self.nodal_expr(expr)?.iter().map(|v| scale * v).collect();
                Ok(InitialData { u, details: json!({ "type": "expression" }) })
            }
            InitialSpec::Scaled { direction, lambda } => {
                let u = self.nodal_expr(direction)?.iter().map(|v| lambda * v).collect();
                Ok(InitialData { u, details: json!({ "type": "scaled", "lambda": lambda }) })
            }
            InitialSpec::Fiber { direction, factor } => {
                let v = self.nodal_expr(direction)?;
                let ls = variational::lambda_star(pr, &v, 1.0)?;
                let u = v.iter().map(|a| a * ls * factor).collect();
                Ok(InitialData { u, details: json!({ "type": "fiber", "lambda_star": ls, "lambda": ls * factor }) })
            }
            InitialSpec::EnergyLevel { direction, ratio } => {
                let v = self.nodal_expr(direction)?;
                let target = ratio * curve.d_hat();
                let lam = variational::scale_to_energy(pr, &v, target, variational::NehariSide::Plus)?;
                let u = v.iter().map(|a| a * lam).collect();
                Ok(InitialData { u, details: json!({ "type": "energy-level", "lambda": lam, "target_energy": target }) })
            }
            InitialSpec::HighEnergy { target, target_over_depth, omega1, omega2 } => {
                let target = target.unwrap_or_else(|| target_over_depth.unwrap_or(1.0) * curve.d_hat());
                let c_star = match emb {
                    Some(e) => e.c_star,
                    None => self.embedding()?.c_star,
                };
                let d = variational::construct_high_energy_data(
                    pr,
                    target,
                    (omega1[0], omega1[1]),
                    (omega2[0], omega2[1]),
                    c_star,
                )?;
                let details = json!({
                    "type": "high-energy",
                    "target_energy": target,
                    "energy": d.energy,
                    "nehari": d.nehari,
                    "zeta": d.zeta,
                    "mode": d.mode,
                    "amplitude": d.amplitude,
                    "norm_power": d.norm_power,
                    "norm_threshold": d.norm_threshold,
                    "c_star": c_star,
                });
                Ok(InitialData { u: d.u, details })
            }
            InitialSpec::File { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                let g = io::read_grid_csv(*pr.mesh(), &text)?;
                Ok(InitialData { u: g.values, details: json!({ "type": "file", "path": path }) })
            }
        }
    }

    fn classify(&self, u: &[f64], curve: &DepthCurve) -> Result<VariationalReport> {
        let a = &self.cfg.analysis;
        let opts = ClassifyOptions { tol_i_rel: a.tol_i_rel, critical_band: a.critical_band };
        variational::classify(&self.problem, u, curve, &opts)
    }

    fn extras(&self, u: &[f64], opts: &Options) -> Result<()> {
        let pr = &self.problem;
        if opts.dump_matrices {
            let n = pr.dim();
            io::write_atomic(&opts.out.join("stiffness.csv"), &io::matrix_csv(&pr.stiffness(u)?, n)?)?;
            io::write_atomic(&opts.out.join("jacobian.csv"), &io::matrix_csv(&pr.assemble_jacobian(u)?, n)?)?;
            io::write_atomic(&opts.out.join("mass.csv"), &io::matrix_csv(pr.mass(), n)?)?;
        }
        if opts.diagnostics {
            let family = self.cfg.kernel_family()?;
            let g = GridFunction::new(*pr.mesh(), u.to_vec())?;
            let reference = crate::oracle::DenseReference::default();
            let brute_m = crate::oracle::brute_modular(&g, &family, reference);
            let fast_m = pr.disc.gagliardo_modular(u)?;
            let brute_a = crate::oracle::brute_apply(&g, &family, reference);
            let fast_a = operator::apply_operator(&pr.disc, u)?;
            let scale = brute_a.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let err = fast_a.iter().zip(&brute_a).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            let body = json!({
                "modular": fast_m,
                "modular_reference": brute_m,
                "modular_rel_error": (fast_m - brute_m).abs() / brute_m.abs().max(f64::MIN_POSITIVE),
                "operator_max_rel_error": if scale > 0.0 { err / scale } else { 0.0 },
            });
            write_json(&opts.out, "diagnostics.json", "diagnostics", self.cfg, body)?;
        }
        Ok(())
    }
}

pub fn cmd_check_family(cfg: &ScenarioConfig, opts: &Options) -> Outcome {
    outcome((|| {
        let family = cfg.kernel_family()?;
        let src = cfg.source_family()?;
        let plan = SamplingPlan::default();
        let report = check_structural_conditions(&family, &src, &plan);
        let entries: Vec<Value> = report
            .entries
            .iter()
            .map(|e| {
                json!({
                    "name": e.name,
                    "status": match e.status { CondStatus::Pass => "pass", CondStatus::Fail => "fail", CondStatus::Warn => "warn" },
                    "required": e.required,
                    "value": e.value,
                    "witness": e.witness,
                })
            })
            .collect();
        let pass = report.all_required_pass();
        let failures: Vec<String> = report
            .entries
            .iter()
            .filter(|e| e.required && e.status == CondStatus::Fail)
            .map(|e| e.name.clone())
            .collect();
        let body = json!({
            "all_required_pass": pass,
            "failures": failures,
            "delta2_constant": report.delta2,
            "plan": report.plan,
            "g_minus": family.g_minus(),
            "g_plus": family.g_plus(),
            "entries": entries,
        });
        write_json(&opts.out, "conditions.json", "conditions", cfg, body)?;
        if pass {
            Ok(Outcome::ok("all required conditions pass".into()))
        } else {
            let detail: Vec<String> = report
                .entries
                .iter()
                .filter(|e| e.required && e.status == CondStatus::Fail)
                .map(|e| format!("{} ({})", e.name, e.witness.clone().unwrap_or_default()))
                .collect();
            Ok(Outcome { code: EXIT_CONDITION, summary: format!("failed: {}", detail.join("; ")) })
        }
    })())
}

pub fn cmd_depth_curve(cfg: &ScenarioConfig, opts: &Options) -> Outcome {
    outcome((|| {
        let sc = Scenario::new(cfg)?;
        let curve = sc.depth_curve()?;
        io::write_atomic(&opts.out.join("depth_curve.csv"), &io::depth_csv(&curve)?)?;
        let body = json!({
            "d_hat": curve.d_hat(),
            "argmax_delta": curve.deltas[curve.argmax],
            "argmax_at_one": curve.argmax == curve.index_nearest_one(),
            "increasing_below_one": curve.increasing_below_one,
            "decreasing_above_one": curve.decreasing_above_one,
            "directions": curve.directions,
        });
        write_json(&opts.out, "depth_curve.json", "depth-curve", cfg, body)?;
        Ok(Outcome::ok(format!("d_hat = {:.6e}", curve.d_hat())))
    })())
}

fn bounds_json(sc: &Scenario, curve: &DepthCurve, emb: &EmbeddingConstants<f64>) -> Value {
    let pr = &sc.problem;
    let a = &sc.cfg.analysis;
    let growth = match pr.source.growth_constants(a.t_range[0], a.t_range[1]) {
        Ok(g) => g,
        Err(e) => return json!({ "error": e.to_string() }),
    };
    let bounds = variational::bound_constants(pr, emb, &growth, a.bound_delta, Some(curve.d_hat()));
    let ex = Exponents::of(pr);
    let lower = bounds.as_ref().ok().map(|b| variational::depth_lower_bound(&ex, b.delta_min));
    json!({
        "growth_a": growth.a,
        "growth_b": growth.b,
        "growth_a_at_range_end": growth.a_at_range_end,
        "constants": bounds.as_ref().ok(),
        "error": bounds.as_ref().err().map(|e| e.to_string()),
        "depth_lower_bound": lower,
    })
}

fn embedding_json(emb: &EmbeddingConstants<f64>) -> Value {
    json!({
        "c_star": emb.c_star,
        "c_1g": emb.c_1g,
        "c_star_g": emb.c_star_g,
        "c_phi_max": emb.c_max,
        "samples": emb.samples,
        "note": "sampled lower bounds of the embedding constants",
    })
}

pub fn cmd_classify(cfg: &ScenarioConfig, opts: &Options) -> Outcome {
    outcome((|| {
        let sc = Scenario::new(cfg)?;
        let curve = sc.depth_curve()?;
        let emb = sc.embedding()?;
        let init = sc.initial(&curve, Some(&emb))?;
        let report = sc.classify(&init.u, &curve)?;
        let alpha = sc.problem.source.select_alpha(&cfg.kernel_family()?).ok();
        let times = match (report.region, alpha) {
            (Region::V, Some(al)) => {
                variational::blowup_time_bounds(report.l2_norm.powi(2), curve.d_hat(), report.energy, al, None).ok()
            }
            _ => None,
        };
        io::write_atomic(&opts.out.join("initial_state.csv"), &io::grid_csv(sc.problem.mesh(), &init.u)?)?;
        sc.extras(&init.u, opts)?;
        let body = json!({
            "report": report,
            "initial": init.details,
            "alpha": alpha,
            "blowup_times": times,
            "embedding": embedding_json(&emb),
            "bounds": bounds_json(&sc, &curve, &emb),
        });
        write_json(&opts.out, "classify.json", "classify", cfg, body)?;
        Ok(Outcome::ok(format!(
            "region {:?}, energy level {:?}, E = {:.6e}, I = {:.6e}, d_hat = {:.6e}",
            report.region, report.energy_level, report.energy, report.nehari, report.d_hat
        )))
    })())
}

/// Post-run analyses attached to `run.json`.
fn analyse(sc: &Scenario, rec: &TrajectoryRecord, report: &VariationalReport, emb: &EmbeddingConstants<f64>) -> Result<Value> {
    let pr = &sc.problem;
    let a = &sc.cfg.analysis;
    let d_hat = report.d_hat;
    let mut out = serde_json::Map::new();
    out.insert("energy_identity_residual".into(), dynamics::energy_identity_residual(rec).into());
    out.insert("nehari_identity_deviation".into(), dynamics::nehari_identity_check(rec).into());
    let mut flags = serde_json::Map::new();
    if matches!(report.region, Region::W | Region::V) {
        let v = dynamics::well_invariance_monitor(rec, d_hat, report.region);
        flags.insert("well_invariance".into(), v.is_empty().into());
        out.insert("well_violations".into(), serde_json::to_value(&v).unwrap_or(Value::Null));
    }
    let alpha = pr.source.select_alpha(&sc.cfg.kernel_family()?).ok();
    if report.region == Region::V || rec.status.is_blown_up() {
        let times = alpha.and_then(|al| {
            variational::blowup_time_bounds(rec.u0_l2().powi(2), d_hat, report.energy, al, None).ok()
        });
        let t_star = times.map(|t| t.t_star);
        let ba = dynamics::blowup_analysis(rec, t_star, a.divergence_threshold);
        if t_star.is_some() {
            flags.insert("blowup_bound_respected".into(), ba.bound_respected.into());
            out.insert("bound_respected".into(), ba.bound_respected.into());
        }
        let concavity = match alpha {
            Some(al) if report.energy < d_hat => ConcavityMonitor::new(al, d_hat, report.energy, rec.u0_l2().powi(2))
                .ok()
                .map(|mut m| {
                    m.evaluate(rec, a.concavity_tol);
                    json!({ "concave": m.concave, "max_violation": m.max_violation, "theta": m.theta, "a": m.a, "b": m.b, "big_t": m.big_t })
                }),
            _ => None,
        };
        out.insert("blowup".into(), json!({ "analysis": ba, "alpha": alpha, "concavity": concavity }));
    }
    if report.energy > d_hat {
        let ex = Exponents::of(pr);
        let factor = ex.high_energy_factor(emb.c_star);
        let n = rec.u0_l2();
        let norm_power = n.powf(ex.g_minus).min(n.powf(ex.g_plus));
        let holds = report.nehari < 0.0 && norm_power > factor * report.energy;
        flags.insert("high_energy_inequality".into(), holds.into());
        out.insert(
            "high_energy".into(),
            json!({ "inequality_holds": holds, "norm_power": norm_power, "threshold": factor * report.energy, "nehari_negative": report.nehari < 0.0 }),
        );
    }
    if report.region == Region::W {
        let ex = Exponents::of(pr);
        match report.delta1 {
            Some(d1) => {
                let dp = 0.5 * (d1 + 1.0);
                let da = dynamics::decay_analysis(rec, &ex, emb.c_star, dp);
                flags.insert("decay_bound_respected".into(), da.bound_curve_respected.into());
                out.insert("decay".into(), serde_json::to_value(&da).unwrap_or(Value::Null));
            }
            None => {
                out.insert("decay".into(), json!({ "error": "no level crossing of the depth curve below one" }));
            }
        }
    }
    out.insert("bound_flags".into(), Value::Object(flags));
    Ok(Value::Object(out))
}

pub fn cmd_run(cfg: &ScenarioConfig, opts: &Options) -> Outcome {
    outcome((|| {
        let sc = Scenario::new(cfg)?;
        let pr = &sc.problem;
        let curve = sc.depth_curve()?;
        let emb = sc.embedding()?;
        let init = sc.initial(&curve, Some(&emb))?;
        let report = sc.classify(&init.u, &curve)?;
        let icfg = cfg.integrator.resolve();
        io::write_atomic(&opts.out.join("initial_state.csv"), &io::grid_csv(pr.mesh(), &init.u)?)?;
        sc.extras(&init.u, opts)?;
        let rec = dynamics::run(pr, &init.u, &icfg)?;
        io::write_atomic(&opts.out.join("trajectory.csv"), &io::trajectory_csv(&rec)?)?;
        io::write_atomic(&opts.out.join("final_state.csv"), &io::grid_csv(pr.mesh(), &rec.final_state)?)?;
        let analysis = analyse(&sc, &rec, &report, &emb)?;
        let critical = if cfg.analysis.critical_sequence {
            Some(dynamics::critical_energy_driver(pr, &init.u, &icfg)?)
        } else {
            None
        };
        let t_blow = match rec.status {
            Status::BlownUp { t_blow } => Some(t_blow),
            _ => None,
        };
        let body = json!({
            "status": rec.status.label(),
            "status_detail": rec.status,
            "t_blow": t_blow,
            "accepted_steps": rec.accepted_steps,
            "rejected_steps": rec.rejected_steps,
            "samples": rec.samples.len(),
            "columns": io::TRAJECTORY_COLUMNS,
            "initial": init.details,
            "classification": report,
            "embedding": embedding_json(&emb),
            "analysis": analysis,
            "critical_sequence": critical,
            "integrator": icfg,
        });
        write_json(&opts.out, "run.json", "run", cfg, body)?;
        let code = match rec.status {
            Status::SolverFailure { .. } => EXIT_RUNTIME,
            _ => EXIT_OK,
        };
        Ok(Outcome {
            code,
            summary: format!(
                "region {:?}, status {}, {} steps, final t = {:.6e}",
                report.region,
                rec.status.label(),
                rec.accepted_steps,
                rec.last().t
            ),
        })
    })())
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs the `[sweep]` grid in parallel, one output directory per value.
pub fn cmd_sweep(raw: &toml::Value, cfg: &ScenarioConfig, opts: &Options) -> Outcome {
    outcome((|| {
        let sweep = cfg
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
        if sweep.values.is_empty() {
            return Err(Error::Config("sweep.values is empty".into()));
        }
        let mut variants = Vec::new();
        for v in &sweep.values {
            let mut t = raw.clone();
            super::config::set_path(&mut t, &sweep.parameter, v.clone())?;
            if let Some(tab) = t.as_table_mut() {
                tab.remove("sweep");
                tab.insert("seed".into(), toml::Value::Integer(cfg.seed as i64));
            }
            variants.push(ScenarioConfig::from_value(t)?);
        }
        let results: Vec<(usize, Outcome, Option<String>)> = variants
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let o = Options { out: opts.out.join(format!("run_{i:03}")), ..opts.clone() };
                let r = cmd_run(c, &o);
                let status = std::fs::read(o.out.join("run.json"))
                    .ok()
                    .and_then(|b| serde_json::from_slice::<Value>(&b).ok())
                    .and_then(|v| v["status"].as_str().map(String::from));
                (i, r, status)
            })
            .collect();
        let runs: Vec<Value> = results
            .iter()
            .map(|(i, r, status)| {
                json!({
                    "index": i,
                    "value": value_label(&sweep.values[*i]),
                    "dir": format!("run_{i:03}"),
                    "exit_code": r.code,
                    "status": status,
                    "summary": r.summary,
                })
            })
            .collect();
        let worst = results.iter().map(|r| r.1.code).max().unwrap_or(EXIT_OK);
        write_json(&opts.out, "index.json", "sweep-index", cfg, json!({ "parameter": sweep.parameter, "runs": runs }))?;
        Ok(Outcome { code: worst, summary: format!("{} runs over {}", results.len(), sweep.parameter) })
    })())
}

fn collect_json(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) {
    let Ok(rd) = std::fs::read_dir(dir) else { return };
    let mut entries: Vec<PathBuf> = rd.filter_map(|e| e.ok().map(|e| e.path())).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() && depth > 0 {
            collect_json(&p, depth - 1, out);
        } else if p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
}

fn summarize(v: &Value) -> String {
    let kind = v["kind"].as_str().unwrap_or("?");
    let name = v["name"].as_str().unwrap_or("-");
    let detail = match kind {
        "run" => format!(
            "status {}, region {}, bound flags {}",
            v["status"].as_str().unwrap_or("?"),
            v["classification"]["region"],
            v["analysis"]["bound_flags"]
        ),
        "classify" => format!(
            "region {}, E {}, I {}, d_hat {}",
            v["report"]["region"], v["report"]["energy"], v["report"]["nehari"], v["report"]["d_hat"]
        ),
        "conditions" => format!("all required pass {}, failures {}", v["all_required_pass"], v["failures"]),
        "depth-curve" => format!("d_hat {}, argmax at one {}", v["d_hat"], v["argmax_at_one"]),
        "sweep-index" => format!("parameter {}, {} runs", v["parameter"], v["runs"].as_array().map_or(0, |r| r.len())),
        _ => String::new(),
    };
    format!("{kind} [{name}] {detail}")
}

/// Summarizes every JSON artifact under the output directory into `report.txt`.
pub fn cmd_report(opts: &Options) -> Outcome {
    outcome((|| {
        if !opts.out.is_dir() {
            return Err(Error::Config(format!("{} is not a directory", opts.out.display())));
        }
        let mut files = Vec::new();
        collect_json(&opts.out, 2, &mut files);
        let mut lines = Vec::new();
        for f in &files {
            let text = std::fs::read(f)?;
            let v: Value = serde_json::from_slice(&text).map_err(|e| Error::Config(format!("{}: {e}", f.display())))?;
            let rel = f.strip_prefix(&opts.out).unwrap_or(f);
            lines.push(format!("{}: {}", rel.display(), summarize(&v)));
        }
        let mut text = lines.join("\n");
        text.push('\n');
        io::write_atomic(&opts.out.join("report.txt"), text.as_bytes())?;
        Ok(Outcome::ok(text.trim_end().to_string()))
    })())
}
