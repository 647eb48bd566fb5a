use std::path::PathBuf;

use heatpump::config::{LimitConfig, LimitSweep};
use heatpump::polariton::{cooling_limit, CoolingMapParams};
use heatpump::runner::cooling_map;
use heatpump::Error;

use crate::output::{num, Csv};
use crate::{emit, single_config, Common, Failure};

fn grid(from: f64, to: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![from];
    }
    (0..samples)
        .map(|k| from + (to - from) * k as f64 / (samples - 1) as f64)
        .collect()
}

pub fn run(common: &Common) -> Result<(), Failure> {
    let config = single_config(common, "limit")?;
    let p = &config.params;
    let limit = config.limit.clone().unwrap_or(LimitConfig {
        sweep: LimitSweep::Point,
        from: 0.0,
        to: 0.0,
        samples: 1,
        eta: None,
        r: None,
        target: 0,
    });
    let (schedule, _) = config.schedule()?;
    let base = match (limit.eta, limit.r) {
        (Some(eta), Some(r)) => CoolingMapParams {
            eta,
            r,
            n_a: p.n_a,
            n_c: p.n_targets[limit.target],
        },
        (eta, r) => {
            let derived = cooling_map(p, &schedule, limit.target)?;
            CoolingMapParams {
                eta: eta.unwrap_or(derived.eta),
                r: r.unwrap_or(derived.r),
                ..derived
            }
        }
    };

    let (column, points): (Option<&str>, Vec<(f64, CoolingMapParams)>) = match limit.sweep {
        LimitSweep::Point => (None, vec![(f64::NAN, base)]),
        LimitSweep::Eta => (
            Some("swept_eta"),
            grid(limit.from, limit.to, limit.samples)
                .into_iter()
                .map(|eta| (eta, CoolingMapParams { eta, ..base }))
                .collect(),
        ),
        LimitSweep::R => (
            Some("swept_r"),
            grid(limit.from, limit.to, limit.samples)
                .into_iter()
                .map(|r| (r, CoolingMapParams { r, ..base }))
                .collect(),
        ),
        LimitSweep::Tau => (
            Some("swept_tau"),
            grid(limit.from, limit.to, limit.samples)
                .into_iter()
                .map(|tau| {
                    let r = (-p.gamma * tau).exp();
                    (tau, CoolingMapParams { r, ..base })
                })
                .collect(),
        ),
    };

    let mut header: Vec<String> = column.into_iter().map(String::from).collect();
    header.extend(["N_infinity", "eta", "r", "status"].map(String::from));
    let label = &p.mode_labels()[2 + limit.target];
    let mut csv = Csv::new(
        "limit",
        &[
            ("fingerprint", config.fingerprint()),
            ("target", label.clone()),
            ("n_a", num(base.n_a)),
            ("n_target", num(base.n_c)),
        ],
        &header,
    );
    for (x, map) in points {
        let (value, status) = match cooling_limit(&map) {
            Ok(v) => (v, "ok"),
            Err(Error::Degenerate(_)) => (f64::NAN, "degenerate"),
            Err(e) => return Err(e.context(format!("eta = {}, r = {}", map.eta, map.r)).into()),
        };
        let mut row = Vec::new();
        if column.is_some() {
            row.push(num(x));
        }
        row.extend([num(value), num(map.eta), num(map.r), status.to_string()]);
        csv.row(row);
    }
    let out: Option<PathBuf> = common.out.clone().or(config.output.path.clone().map(PathBuf::from));
    emit(out.as_deref(), &csv.into_string())
}
