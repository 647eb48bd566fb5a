use std::path::PathBuf;

use heatpump::model::{check_stability, stability_limit};
use heatpump::polariton::{bogoliubov_basis, polariton_spectrum};
use heatpump::Error;
use rayon::prelude::*;

use crate::output::{num, Csv};
use crate::{emit, single_config, thread_pool, Common, Failure};

pub fn run(common: &Common) -> Result<(), Failure> {
    let config = single_config(common, "spectrum")?;
    let p = &config.params;
    let (from, to, samples) = match &config.spectrum {
        Some(s) => (s.from, s.to, s.samples),
        None => (p.delta_i, p.delta_f, 200),
    };
    if samples == 0 || !(from < to) {
        return Err(Failure::Usage(format!("empty detuning range [{from}, {to}]")));
    }
    if to >= 0.0 {
        return Err(Error::invalid("spectrum", "the detuning range must be red-detuned (negative)").into());
    }
    // The stability bound tightens towards zero detuning, so `to` is the worst point.
    if let Err(e) = check_stability(to, p.omega_b, p.g) {
        let edge = -4.0 * p.g * p.g / p.omega_b;
        let hint = if from <= edge {
            format!("stable sub-interval is [{from}, {edge}]")
        } else {
            "no part of the range is stable".to_string()
        };
        return Err(e.context(hint).into());
    }
    debug_assert!(p.g <= stability_limit(to, p.omega_b));

    let deltas: Vec<f64> = (0..samples)
        .map(|k| {
            if samples == 1 {
                from
            } else {
                from + (to - from) * k as f64 / (samples - 1) as f64
            }
        })
        .collect();
    let pool = thread_pool(common.jobs)?;
    let rows: Result<Vec<Vec<String>>, Error> = pool.install(|| {
        deltas
            .par_iter()
            .map(|&delta| {
                let (upper, lower) = polariton_spectrum(delta, p.omega_b, p.g)?;
                let basis = bogoliubov_basis(delta, p.omega_b, p.g)?;
                Ok(vec![num(delta), num(upper), num(lower), num(basis.u)])
            })
            .collect()
    });
    let header: Vec<String> = ["delta", "omega_A", "omega_B", "u"].map(String::from).to_vec();
    let mut csv = Csv::new(
        "spectrum",
        &[
            ("fingerprint", config.fingerprint()),
            ("omega_b", num(p.omega_b)),
            ("g", num(p.g)),
        ],
        &header,
    );
    for row in rows? {
        csv.row(row);
    }
    let out: Option<PathBuf> = common.out.clone().or(config.output.path.clone().map(PathBuf::from));
    emit(out.as_deref(), &csv.into_string())
}
