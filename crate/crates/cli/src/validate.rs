use heatpump::runner::{cross_validate, run_protocol, Verdict};
use serde::Serialize;

use crate::output::write_atomic;
use crate::{single_config, thread_pool, Common, Failure};

#[derive(Serialize)]
struct Report<'a> {
    fingerprint: String,
    #[serde(flatten)]
    result: &'a heatpump::runner::CrossValidation,
}

pub fn run(common: &Common) -> Result<(), Failure> {
    if common.engine.is_some() {
        return Err(Failure::Usage("validate always runs both engines; drop --engine".into()));
    }
    let config = single_config(common, "validate")?;
    if config.fock.is_none() {
        return Err(heatpump::Error::invalid("fock", "validate needs Fock cutoffs").into());
    }
    let (schedule, _) = config.schedule()?;
    let initial = config.initial();
    let options = config.run_options();
    let gaussian = config.engine(Some("gaussian"))?;
    let fock = config.engine(Some("fock"))?;
    let pool = thread_pool(common.jobs)?;
    let (g, f) = pool.install(|| {
        rayon::join(
            || run_protocol(&config.params, &schedule, gaussian.as_ref(), &initial, &options),
            || run_protocol(&config.params, &schedule, fock.as_ref(), &initial, &options),
        )
    });
    let result = cross_validate(g, f, config.validate.threshold)?;

    let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3e}"));
    println!(
        "{}: max occupation deviation {} (threshold {:.3e}), max leakage {}",
        match result.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        },
        fmt(result.deviation),
        result.threshold,
        fmt(result.max_leakage)
    );
    if let Some(note) = &result.note {
        println!("  {note}");
    }
    if let Some(path) = &common.out {
        let report = Report {
            fingerprint: config.fingerprint(),
            result: &result,
        };
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_atomic(path, &text).map_err(|e| Failure::Io(path.clone(), e))?;
    }
    match result.verdict {
        Verdict::Fail => Err(Failure::Rejected(format!(
            "engines disagree: deviation {} exceeds {:.3e}",
            fmt(result.deviation),
            result.threshold
        ))),
        Verdict::Pass | Verdict::Inconclusive => Ok(()),
    }
}
