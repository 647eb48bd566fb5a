use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use heatpump::config::RunConfig;
use heatpump::model::ScheduleWarning;
use heatpump::runner::{analyze_cycles, run_protocol, CycleReport, Trajectory};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{num, write_atomic, Csv};
use crate::{emit, load_config, thread_pool, Common, Failure};

#[derive(Serialize)]
struct ReportFile<'a> {
    fingerprint: &'a str,
    engine: &'a str,
    warnings: Vec<String>,
    min_uncertainty_margin: Option<f64>,
    max_leakage: Option<f64>,
    markers: &'a [heatpump::runner::Marker],
    cycles: Option<&'a CycleReport>,
}

struct Outcome {
    csv: String,
    report_json: String,
    summary: String,
}

fn trajectory_csv(traj: &Trajectory, warnings: &[ScheduleWarning]) -> String {
    let mut meta = vec![
        ("engine", traj.engine.clone()),
        ("fingerprint", traj.fingerprint.clone()),
    ];
    for w in warnings {
        meta.push(("warning", w.to_string()));
    }
    for m in &traj.markers {
        meta.push((
            "marker",
            format!("t={} cycle={} stroke={} end of {}", num(m.time), m.cycle, m.stroke, m.kind),
        ));
    }
    let mut header = vec!["t".to_string()];
    header.extend(traj.labels.iter().map(|l| format!("N_{l}")));
    header.extend(["N_A", "N_B", "delta", "omega0_active", "stroke_index"].map(String::from));
    let mut csv = Csv::new("cycle", &meta, &header);
    for i in 0..traj.times.len() {
        let mut row = vec![num(traj.times[i])];
        row.extend(traj.occupations[i].iter().map(|&n| num(n)));
        row.push(num(traj.polaritons[i].0));
        row.push(num(traj.polaritons[i].1));
        row.push(num(traj.delta[i]));
        row.push(num(traj.omega0_active[i]));
        row.push(traj.stroke_index[i].to_string());
        csv.row(row);
    }
    csv.into_string()
}

fn summary(name: &str, traj: &Trajectory, report: Option<&CycleReport>, warnings: &[ScheduleWarning]) -> String {
    let mut s = String::new();
    writeln!(s, "{name}: engine {}, fingerprint {}", traj.engine, traj.fingerprint).unwrap();
    for w in warnings {
        writeln!(s, "  warning: {w}").unwrap();
    }
    if let Some(report) = report {
        for t in &report.targets {
            writeln!(s, "  target {}: eta = {:.6}, r = {:.6}", t.label, t.eta, t.r).unwrap();
            writeln!(s, "    exchange  before        after         map prediction").unwrap();
            for k in 0..t.after.len() {
                writeln!(
                    s,
                    "    {:<9} {:<13.6} {:<13.6} {:.6}",
                    k + 1,
                    t.before[k],
                    t.after[k],
                    t.predicted_after[k]
                )
                .unwrap();
            }
            writeln!(
                s,
                "    asymptote {:.6}, cooling limit {:.6} ({:+.1}%)",
                t.asymptote,
                t.limit,
                100.0 * t.limit_deviation
            )
            .unwrap();
        }
    }
    s
}

fn execute(name: &str, config: &RunConfig) -> Result<Outcome, Failure> {
    let (schedule, warnings) = config.schedule()?;
    let engine = config.engine(None)?;
    let mut traj = run_protocol(
        &config.params,
        &schedule,
        engine.as_ref(),
        &config.initial(),
        &config.run_options(),
    )?;
    traj.fingerprint = config.fingerprint();
    let has_exchange = (0..config.params.target_count()).any(|t| !schedule.exchange_slots(t).is_empty());
    let report = if has_exchange {
        Some(analyze_cycles(&traj, &config.params, &schedule)?)
    } else {
        None
    };
    let file = ReportFile {
        fingerprint: &traj.fingerprint,
        engine: &traj.engine,
        warnings: warnings.iter().map(ToString::to_string).collect(),
        min_uncertainty_margin: traj.min_uncertainty_margin,
        max_leakage: traj.max_leakage,
        markers: &traj.markers,
        cycles: report.as_ref(),
    };
    Ok(Outcome {
        csv: trajectory_csv(&traj, &warnings),
        report_json: serde_json::to_string_pretty(&file).expect("report serializes") + "\n",
        summary: summary(name, &traj, report.as_ref(), &warnings),
    })
}

fn report_path(csv: &Path) -> PathBuf {
    csv.with_extension("report.json")
}

pub fn run(common: &Common) -> Result<(), Failure> {
    if common.config.is_empty() {
        return Err(Failure::Usage("cycle: --config is required".into()));
    }
    let configs = common
        .config
        .iter()
        .map(|p| load_config(p, common).map(|c| (p.clone(), c)))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = thread_pool(common.jobs)?;

    if configs.len() == 1 {
        let (path, config) = &configs[0];
        let name = path.display().to_string();
        let outcome = pool.install(|| execute(&name, config))?;
        let out = common.out.clone().or(config.output.path.clone().map(PathBuf::from));
        emit(out.as_deref(), &outcome.csv)?;
        match out {
            Some(csv_path) => {
                let rp = report_path(&csv_path);
                write_atomic(&rp, &outcome.report_json).map_err(|e| Failure::Io(rp, e))?;
                print!("{}", outcome.summary);
            }
            None => eprint!("{}", outcome.summary),
        }
        return Ok(());
    }

    let dir = common
        .out
        .clone()
        .ok_or_else(|| Failure::Usage("several configs need --out DIR".into()))?;
    if !dir.is_dir() {
        return Err(Failure::Usage(format!("{} is not a directory", dir.display())));
    }
    let results: Vec<Result<(), Failure>> = pool.install(|| {
        configs
            .par_iter()
            .map(|(path, config)| {
                let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
                let outcome = execute(&path.display().to_string(), config)?;
                let csv_path = dir.join(format!("{stem}.csv"));
                write_atomic(&csv_path, &outcome.csv).map_err(|e| Failure::Io(csv_path.clone(), e))?;
                let rp = report_path(&csv_path);
                write_atomic(&rp, &outcome.report_json).map_err(|e| Failure::Io(rp, e))?;
                print!("{}", outcome.summary);
                Ok(())
            })
            .collect()
    });
    // Report the first failure in config order.
    results.into_iter().collect()
}
