use std::path::Path;

use homog_core::env::hypothesis_report;
use homog_core::metric::MetricProblem;
use homog_core::shape::{check_convexity, check_fekete, estimate_shape};
use homog_core::{io, Direction, Environment, Error, Result, RunConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::pipeline::{self, label};
use crate::run::{Run, Status, VerdictSummary, MANIFEST};
use crate::verify;

pub fn dispatch(name: &'static str, cfg: RunConfig, out: &Path, from: Option<&Path>) -> Result<u8> {
    if name == "verify" {
        verify::refuse_prior_artifacts(out)?;
    }
    let mut run = Run::new(name, cfg, out)?;
    let code = match name {
        "gen-env" => gen_env(&mut run)?,
        "metric" => metric(&mut run)?,
        "shape" => shape(&mut run)?,
        "effective" => effective(&mut run)?,
        "macro" => macro_(&mut run)?,
        "verify" => verify::run(&mut run)?,
        "report" => report(&mut run, from.unwrap_or(out))?,
        other => return Err(Error::Config(format!("unknown subcommand {other}"))),
    };
    run.finish(rayon::current_num_threads())?;
    Ok(code)
}

fn gen_env(run: &mut Run) -> Result<u8> {
    let cfg = run.cfg.clone();
    let seed = cfg.seed_list()[0];
    let env = Environment::new(cfg.env.spec(seed))?;
    let report = run.stage("hypotheses", |c| hypothesis_report(&c.family, &env, c.verify.hypothesis_budget))?;
    run.write("env.csv", |w| io::write_env_snapshot(&env, cfg.snapshot.half_width, cfg.snapshot.h, w))?;
    run.json(
        "env.json",
        &json!({
            "spec": env.spec(),
            "family": cfg.family.label(),
            "value_range": [env.value_range().min, env.value_range().max],
            "distinct_values": env.distinct_values(),
            "hypotheses": report,
        }),
    )?;
    Ok(0)
}

fn metric(run: &mut Run) -> Result<u8> {
    let cfg = run.cfg.clone();
    let seed = cfg.seed_list()[0];
    let env = Environment::new(cfg.env.spec(seed))?;
    let cap = if cfg.env.dim == 1 { 1 << 20 } else { 512 };
    let lattice = pipeline::metric_lattice(&cfg, cap)?;
    let source = lattice.index(0, 0).ok_or_else(|| Error::Config("origin outside the lattice".into()))?;
    let problem = MetricProblem::new(&lattice, &cfg.family, &env, cfg.mu).with_support(cfg.metric.support);
    let field = run.stage("solve", |_| problem.solve(source))?;
    let optimality = run.stage("optimality", |_| problem.optimality_excess(&field))?;
    run.write("metric.csv", |w| field.write_csv(w))?;
    run.json("metric.json", &json!({ "summary": field.summary(seed), "optimality_excess": optimality }))?;
    Ok(0)
}

fn shape(run: &mut Run) -> Result<u8> {
    let cfg = run.cfg.clone();
    let spec = cfg.env.spec(0);
    let seeds = cfg.seed_list();
    let est = run.stage("shape", |c| estimate_shape(&c.family, &spec, c.mu, &seeds, Direction::Forward, &c.shape))?;
    run.write("shape.csv", |w| est.write_csv(w))?;
    run.json("shape.json", &est)?;
    run.json(
        "shape_checks.json",
        &json!({
            "fekete": check_fekete(&est, cfg.shape.fekete_sigma),
            "convexity": check_convexity(&est),
        }),
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct EffectiveSummary<'a> {
    family: &'a str,
    floor: f64,
    lower_bound: f64,
    step: f64,
    fan_factor: f64,
    probes: usize,
    reversed_probes: usize,
    properties: &'a homog_core::effective::PropertyVerdicts,
}

fn effective(run: &mut Run) -> Result<u8> {
    let t = run.stage("effective", pipeline::effective_tables)?;
    run.write("effective.csv", |w| t.forward.write_csv(w))?;
    run.write("effective_reversed.csv", |w| t.reversed.write_csv(w))?;
    if t.forward.dim == 2 {
        run.write("effective_level.csv", |w| t.forward.write_level_csv(w))?;
    }
    run.json(
        "effective.json",
        &EffectiveSummary {
            family: &t.forward.family,
            floor: t.forward.floor,
            lower_bound: t.forward.lower_bound,
            step: t.forward.step,
            fan_factor: t.forward.fan_factor,
            probes: t.forward.probes,
            reversed_probes: t.reversed.probes,
            properties: &t.properties,
        },
    )?;
    Ok(0)
}

fn macro_(run: &mut Run) -> Result<u8> {
    let blocks = run.stage("macro", pipeline::macro_blocks)?;
    let cfg = run.cfg.clone();
    let mut summary = Vec::new();
    for (k, b) in blocks.iter().enumerate() {
        let realizations = b.finest().iter().map(|s| s.summary(&cfg.macro_.ball_radii)).collect::<Result<Vec<_>>>()?;
        summary.push(json!({
            "p": b.estimate.p,
            "estimate": b.estimate,
            "ball": b.ball,
            "bracket": b.entry,
            "finest": realizations,
        }));
        if let Some(s) = b.finest().first() {
            run.write(&format!("macro_slice_{k}.csv"), |w| s.write_csv(w))?;
        }
    }
    run.json("macro_summary.json", &summary)?;
    let agreements: Vec<_> = blocks.iter().map(|b| &b.agreement).collect();
    run.json("agreement.json", &agreements)?;
    let failed = blocks.iter().filter(|b| !b.agreement.passed).count();
    for b in &blocks {
        let a = &b.agreement;
        println!(
            "{} agreement {}: macro {:.6} bracket [{:.6}, {:.6}] difference {:.3e} tolerance {:.3e}",
            Status::of(a.passed).label(),
            label(a.p, cfg.env.dim),
            a.macro_value,
            a.bracket[0],
            a.bracket[1],
            a.difference,
            a.tolerance
        );
    }
    Ok(if failed > 0 { 4 } else { 0 })
}

fn read_json(path: &Path) -> Result<Option<Value>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(path)?;
    Ok(Some(serde_json::from_str(&text)?))
}

/// Collects the table, agreement, and verdict artifacts found in `from`.
fn report(run: &mut Run, from: &Path) -> Result<u8> {
    let manifest = read_json(&from.join(MANIFEST))?
        .ok_or_else(|| Error::Config(format!("no {MANIFEST} in {}", from.display())))?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut table = Vec::new();
    let effective = from.join("effective.csv");
    if effective.exists() {
        let mut r = csv::Reader::from_path(&effective).map_err(|e| Error::Config(e.to_string()))?;
        let headers = r.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (lo, hi) = (col("mu_lo"), col("mu_hi"));
        let (p1, p2) = (col("p1"), col("p2"));
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
            let get = |c: Option<usize>| c.and_then(|i| rec.get(i)).and_then(|s| s.parse::<f64>().ok());
            let (a, b) = (get(lo).unwrap_or(f64::NAN), get(hi).unwrap_or(f64::NAN));
            let p = [get(p1).unwrap_or(f64::NAN), get(p2).unwrap_or(0.0)];
            table.push(json!({ "p": p, "hbar_lo": a, "hbar_hi": b, "hbar_mid": 0.5 * (a + b) }));
            rows.push(vec![
                "hbar".into(),
                p[0].to_string(),
                p[1].to_string(),
                (0.5 * (a + b)).to_string(),
                (0.5 * (b - a)).to_string(),
            ]);
        }
    }
    let agreement = read_json(&from.join("agreement.json"))?;
    if let Some(Value::Array(list)) = &agreement {
        for a in list {
            let p = a["p"].clone();
            let f = |v: &Value| v.as_f64().unwrap_or(f64::NAN);
            let (x, y) = (f(&p["x"]), f(&p["y"]));
            rows.push(vec!["macro".into(), x.to_string(), y.to_string(), f(&a["macro_value"]).to_string(), f(&a["macro_ci"]).to_string()]);
        }
    }
    let verdicts = read_json(&from.join("verdicts.json"))?;
    if let Some(Value::Array(list)) = &verdicts {
        for v in list {
            rows.push(vec![
                format!("verdict:{}", v["name"].as_str().unwrap_or("")),
                String::new(),
                String::new(),
                v["value"].as_f64().map(|x| x.to_string()).unwrap_or_default(),
                v["status"].as_str().unwrap_or("").to_string(),
            ]);
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("nothing to report in {}", from.display())));
    }
    run.write("report.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["kind", "p1", "p2", "value", "spread"])?;
        for r in &rows {
            c.write_record(r)?;
        }
        c.flush()?;
        Ok(())
    })?;
    let summary = match &verdicts {
        Some(Value::Array(list)) => {
            let checks: Vec<crate::run::Check> = list
                .iter()
                .map(|v| {
                    let status = match v["status"].as_str() {
                        Some("PASS") => Status::Pass,
                        Some("FAIL") => Status::Fail,
                        _ => Status::Info,
                    };
                    crate::run::Check::new(v["name"].as_str().unwrap_or(""), status, 0.0, "")
                })
                .collect();
            Some(VerdictSummary::of(&checks))
        }
        _ => None,
    };
    run.verdicts = summary;
    run.json(
        "report.json",
        &json!({
            "source_command": manifest["command"],
            "source_config_sha256": manifest["config_sha256"],
            "hbar": table,
            "agreement": agreement,
            "verdicts": verdicts,
            "verdict_summary": summary,
        }),
    )?;
    Ok(0)
}
