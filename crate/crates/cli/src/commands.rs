use std::sync::Arc;

use aor_core::analytic::crossover_p1;
use aor_core::mdp::solve;
use aor_core::optimizer::optimal_p;
use aor_core::{ChannelParams, GenProb, Protocol};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{CommandKind, Settings};
use crate::engine::{Engine, EngineRegistry, Estimate, Point, RunParams};
use crate::error::{CliError, CliResult};
use crate::output::{fmt_float, render_csv, Row};

/// Beyond this many standard errors a simulated value disagrees with the
/// closed form.
pub const Z_LIMIT: f64 = 4.0;

/// Values closer than this are reported as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    /// JSON written next to `--out` when one is given.
    pub sidecar: Option<String>,
    pub cross_check_failed: bool,
}

pub fn run(settings: &Settings, registry: &EngineRegistry) -> CliResult<Output> {
    match settings.kind {
        CommandKind::Single => cmd_single(settings, registry),
        CommandKind::SweepP => cmd_sweep_p(settings, registry),
        CommandKind::SweepP2p3Diff => cmd_sweep_p2p3_diff(settings, registry),
        CommandKind::SweepP1Gaw => cmd_sweep_p1_gaw(settings, registry),
        CommandKind::Compare => cmd_compare(settings, registry),
        CommandKind::MdpSolve => cmd_mdp_solve(settings),
    }
}

type EngineResults = Vec<(&'static str, Vec<Estimate>)>;

fn channel(p1: f64, p2: f64, p3: f64) -> CliResult<ChannelParams> {
    Ok(ChannelParams::new(p1, p2, p3)?)
}

fn gen(p: f64) -> CliResult<GenProb> {
    Ok(GenProb::new(p)?)
}

fn checked(points: &[Point], engines: &[Arc<dyn Engine>], run: &RunParams) -> CliResult<()> {
    for pt in points {
        for e in engines {
            e.check(pt.channel, pt.gen, run)?;
        }
    }
    Ok(())
}

/// Runs every (point, engine) pair in parallel and returns the results in
/// grid order.
fn evaluate(
    points: &[Point],
    engines: &[Arc<dyn Engine>],
    run: &RunParams,
) -> CliResult<Vec<EngineResults>> {
    checked(points, engines, run)?;
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..engines.len()).map(move |k| (i, k)))
        .collect();
    let mut results = jobs
        .par_iter()
        .map(|&(i, k)| engines[k].evaluate(&points[i], run))
        .collect::<Vec<_>>()
        .into_iter();
    let mut out = Vec::with_capacity(points.len());
    for _ in points {
        let mut per_point = Vec::with_capacity(engines.len());
        for e in engines {
            let estimates = results.next().expect("one result per job")?;
            per_point.push((e.name(), estimates));
        }
        out.push(per_point);
    }
    Ok(out)
}

fn zscore(value: f64, reference: f64, std_error: f64) -> f64 {
    let diff = value - reference;
    if std_error > 0.0 {
        diff / std_error
    } else if diff.abs() < TIE_TOLERANCE {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

fn build_rows(point: &Point, results: &EngineResults) -> Vec<Row> {
    let analytic = results
        .iter()
        .find(|(name, _)| *name == "analytic")
        .map(|(_, e)| e);
    let mut rows = Vec::new();
    for (engine, estimates) in results {
        for e in estimates {
            let reference = analytic.and_then(|a| a.iter().find(|x| x.label == e.label));
            let z = match (e.std_error, reference) {
                (Some(se), Some(r)) if *engine != "analytic" => Some(zscore(e.aoi, r.aoi, se)),
                _ => None,
            };
            rows.push(Row {
                protocol: e.label.to_string(),
                engine,
                p: point.gen.value(),
                p1: point.channel.p1,
                p2: point.channel.p2,
                p3: point.channel.p3,
                aoi: e.aoi,
                ci_half: e.ci_half,
                std_error: e.std_error,
                seed: e.seed,
                slots: e.slots,
                zscore: z,
            });
        }
    }
    rows
}

fn any_disagreement(rows: &[Row]) -> bool {
    rows.iter()
        .filter_map(|r| r.zscore)
        .any(|z| z.abs() > Z_LIMIT || z.is_nan())
}

fn csv_output(settings: &Settings, rows: Vec<Row>, notes: Vec<String>) -> Output {
    let cross_check_failed = any_disagreement(&rows);
    Output {
        text: render_csv(&settings.echo, &rows, &notes),
        sidecar: None,
        cross_check_failed,
    }
}

fn single_channel(settings: &Settings) -> CliResult<ChannelParams> {
    channel(
        settings.p1.single("p1")?,
        settings.p2.single("p2")?,
        settings.p3.single("p3")?,
    )
}

pub fn cmd_single(settings: &Settings, registry: &EngineRegistry) -> CliResult<Output> {
    let engines = registry.select(&settings.engines)?;
    let point = Point {
        channel: single_channel(settings)?,
        gen: gen(settings.p.single("p")?)?,
        index: 0,
    };
    let results = evaluate(&[point], &engines, &RunParams::from(settings))?;
    Ok(csv_output(
        settings,
        build_rows(&point, &results[0]),
        Vec::new(),
    ))
}

pub fn cmd_sweep_p(settings: &Settings, registry: &EngineRegistry) -> CliResult<Output> {
    let engines = registry.select(&settings.engines)?;
    let ch = single_channel(settings)?;
    let points = settings
        .p
        .0
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            Ok(Point {
                channel: ch,
                gen: gen(p)?,
                index: i as u64,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let results = evaluate(&points, &engines, &RunParams::from(settings))?;
    let rows: Vec<Row> = points
        .iter()
        .zip(&results)
        .flat_map(|(pt, res)| build_rows(pt, res))
        .collect();

    let mut notes = Vec::new();
    for proto in Protocol::ALL {
        let best = rows
            .iter()
            .filter(|r| r.engine == "analytic" && r.protocol == proto.name())
            .min_by(|a, b| a.aoi.total_cmp(&b.aoi));
        if let Some(r) = best {
            notes.push(format!(
                "argmin {proto} analytic p={} aoi={}",
                fmt_float(r.p),
                fmt_float(r.aoi)
            ));
        }
    }
    if engines.iter().any(|e| e.name() == "analytic") {
        for proto in Protocol::ALL {
            let opt = optimal_p(proto, ch)?;
            notes.push(format!(
                "p_star {proto} p={} aoi={}",
                fmt_float(opt.p_star),
                fmt_float(opt.aoi_at_p_star)
            ));
        }
    }
    Ok(csv_output(settings, rows, notes))
}

fn protocol_engines(
    settings: &Settings,
    registry: &EngineRegistry,
) -> CliResult<Vec<Arc<dyn Engine>>> {
    let engines = registry.select(&settings.engines)?;
    if let Some(e) = engines.iter().find(|e| !e.per_protocol()) {
        return Err(CliError::invalid(format!(
            "engine `{}` is not available for {}",
            e.name(),
            settings.kind.name()
        )));
    }
    Ok(engines)
}

/// Replaces each engine's SP and RP estimates with their difference RP - SP.
fn difference(results: EngineResults) -> EngineResults {
    results
        .into_iter()
        .map(|(name, ests)| {
            let find = |label: &str| ests.iter().find(|e| e.label == label);
            let diff = match (find("SP"), find("RP")) {
                (Some(sp), Some(rp)) => {
                    let combine =
                        |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a.hypot(b));
                    vec![Estimate {
                        label: "RP-SP",
                        aoi: rp.aoi - sp.aoi,
                        std_error: combine(sp.std_error, rp.std_error),
                        ci_half: combine(sp.ci_half, rp.ci_half),
                        seed: rp.seed,
                        slots: rp.slots,
                    }]
                }
                _ => Vec::new(),
            };
            (name, diff)
        })
        .collect()
}

pub fn cmd_sweep_p2p3_diff(settings: &Settings, registry: &EngineRegistry) -> CliResult<Output> {
    let engines = protocol_engines(settings, registry)?;
    let p1 = settings.p1.single("p1")?;
    let g = gen(settings.p.single("p")?)?;
    let mut points = Vec::new();
    for &p2 in &settings.p2.0 {
        for &p3 in &settings.p3.0 {
            points.push(Point {
                channel: channel(p1, p2, p3)?,
                gen: g,
                index: points.len() as u64,
            });
        }
    }
    let results = evaluate(&points, &engines, &RunParams::from(settings))?;
    let rows: Vec<Row> = points
        .iter()
        .zip(results)
        .flat_map(|(pt, res)| build_rows(pt, &difference(res)))
        .collect();
    let notes = vec!["aoi column is RP minus SP; negative means RP is better".to_string()];
    Ok(csv_output(settings, rows, notes))
}

pub fn cmd_sweep_p1_gaw(settings: &Settings, registry: &EngineRegistry) -> CliResult<Output> {
    let engines = protocol_engines(settings, registry)?;
    if settings.p.0 != [1.0] {
        return Err(CliError::invalid(
            "sweep-p1-gaw fixes p = 1; drop --p or pass --p 1",
        ));
    }
    let (p2s, p3s) = (&settings.p2.0, &settings.p3.0);
    if p2s.len() != p3s.len() {
        return Err(CliError::invalid(
            "--p2 and --p3 must list the same number of values; they are paired",
        ));
    }
    let mut points = Vec::new();
    for (&p2, &p3) in p2s.iter().zip(p3s) {
        for &p1 in &settings.p1.0 {
            if !(p1 > 0.0 && p1 < p2.min(p3)) {
                return Err(CliError::invalid(format!(
                    "p1 = {p1} must lie in (0, min(p2, p3)) = (0, {})",
                    p2.min(p3)
                )));
            }
            points.push(Point {
                channel: channel(p1, p2, p3)?,
                gen: GenProb::ALWAYS,
                index: points.len() as u64,
            });
        }
    }
    let results = evaluate(&points, &engines, &RunParams::from(settings))?;
    let rows: Vec<Row> = points
        .iter()
        .zip(&results)
        .flat_map(|(pt, res)| build_rows(pt, res))
        .collect();
    let mut notes = Vec::new();
    for (&p2, &p3) in p2s.iter().zip(p3s) {
        let f = crossover_p1(p2, p3)?;
        notes.push(format!(
            "crossover p2={} p3={} p1={}",
            fmt_float(p2),
            fmt_float(p3),
            fmt_float(f)
        ));
    }
    Ok(csv_output(settings, rows, notes))
}

fn num(x: f64) -> Value {
    fmt_float(x).parse::<f64>().map_or(Value::Null, Value::from)
}

fn verdict(sp: f64, rp: f64) -> &'static str {
    if (sp - rp).abs() <= TIE_TOLERANCE {
        "tie"
    } else if rp < sp {
        "RP"
    } else {
        "SP"
    }
}

pub fn cmd_compare(settings: &Settings, registry: &EngineRegistry) -> CliResult<Output> {
    let engines = registry.select(&settings.engines)?;
    let ch = single_channel(settings)?;
    let g = gen(settings.p.single("p")?)?;
    let point = Point {
        channel: ch,
        gen: g,
        index: 0,
    };
    let run = RunParams::from(settings);

    let mut per_engine = Map::new();
    let mut recommended = None;
    for e in &engines {
        let outcome = e.check(ch, g, &run).and_then(|()| e.evaluate(&point, &run));
        let value = match outcome {
            Ok(ests) => {
                let mut m = Map::new();
                for est in &ests {
                    m.insert(est.label.to_string(), num(est.aoi));
                    if let Some(ci) = est.ci_half {
                        m.insert(format!("{}_ci_half", est.label), num(ci));
                    }
                }
                let get = |l: &str| ests.iter().find(|x| x.label == l).map(|x| x.aoi);
                if let (None, Some(sp), Some(rp)) = (recommended, get("SP"), get("RP")) {
                    recommended = Some(verdict(sp, rp));
                }
                Value::Object(m)
            }
            Err(err) => json!({ "error": err.to_string() }),
        };
        per_engine.insert(e.name().to_string(), value);
    }
    let Some(recommended) = recommended else {
        return Err(CliError::invalid(format!(
            "no engine could evaluate both protocols: {}",
            Value::Object(per_engine)
        )));
    };

    let p_star = match ch.check_analytic() {
        Ok(()) => {
            let mut m = Map::new();
            for proto in Protocol::ALL {
                let opt = optimal_p(proto, ch)?;
                m.insert(
                    proto.name().to_string(),
                    json!({
                        "p_star": num(opt.p_star),
                        "aoi": num(opt.aoi_at_p_star),
                        "case": serde_json::to_value(opt.case_tag).unwrap_or(Value::Null),
                    }),
                );
            }
            Value::Object(m)
        }
        Err(_) => Value::Null,
    };
    let crossover = if g == GenProb::ALWAYS {
        match crossover_p1(ch.p2, ch.p3) {
            Ok(f) => {
                let better = if (ch.p1 - f).abs() <= TIE_TOLERANCE {
                    "tie"
                } else if ch.p1 < f {
                    "RP"
                } else {
                    "SP"
                };
                json!({ "p1": num(f), "verdict": better })
            }
            Err(err) => json!({ "error": err.to_string() }),
        }
    } else {
        Value::Null
    };

    let doc = json!({
        "config": settings.echo,
        "p1": num(ch.p1),
        "p2": num(ch.p2),
        "p3": num(ch.p3),
        "p": num(g.value()),
        "engines": Value::Object(per_engine),
        "recommended": recommended,
        "p_star": p_star,
        "crossover": crossover,
    });
    let text = serde_json::to_string_pretty(&doc).expect("json values serialise") + "\n";
    Ok(Output {
        text,
        sidecar: None,
        cross_check_failed: false,
    })
}

pub fn cmd_mdp_solve(settings: &Settings) -> CliResult<Output> {
    let ch = single_channel(settings)?;
    let g = gen(settings.p.single("p")?)?;
    let run = RunParams::from(settings);
    let config = run.mdp_config(g);
    let sol = solve(ch, g, &config)?;
    let sidecar = sol.table.sidecar().to_string();
    let mut buf = Vec::new();
    sol.table.write_csv(&mut buf)?;
    let text = format!(
        "{}\n# {sidecar}\n{}",
        settings.echo,
        String::from_utf8(buf).expect("csv is ascii")
    );
    Ok(Output {
        text,
        sidecar: Some(sidecar + "\n"),
        cross_check_failed: false,
    })
}
