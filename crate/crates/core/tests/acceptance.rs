//! Acceptance table. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use spnorm::report::Record;
use spnorm::suites::{self, run_suite, SuiteConfig};
use spnorm::Result;

type Check = fn(&SuiteConfig, &mut BTreeMap<String, f64>) -> Result<Vec<Record>>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn records(check: Check, cfg: &SuiteConfig) -> Result<(Vec<Record>, f64)> {
    let start = Instant::now();
    let recs = check(cfg, &mut BTreeMap::new())?;
    Ok((recs, start.elapsed().as_secs_f64()))
}

fn summarize(recs: &[Record], secs: f64, budget: Option<f64>) -> Outcome {
    let ok = recs.iter().filter(|r| r.pass).count();
    let worst = recs.iter().map(|r| r.relative_gap()).filter(|g| g.is_finite()).fold(0.0, f64::max);
    let in_time = budget.is_none_or(|b| secs <= b);
    let mut detail = format!("{ok}/{} records, worst gap {worst:.2e}, {secs:.1} s", recs.len());
    if let Some(b) = budget {
        detail.push_str(&format!(" (budget {b:.0} s)"));
    }
    for r in recs.iter().filter(|r| !r.pass) {
        detail.push_str(&format!("\n      failed: {} target {} bracket [{}, {}]", r.claim, r.target, r.lower, r.upper));
    }
    Outcome { pass: ok == recs.len() && !recs.is_empty() && in_time, detail }
}

fn simple(check: Check, budget: Option<f64>) -> Result<Outcome> {
    let (recs, secs) = records(check, &SuiteConfig::default())?;
    Ok(summarize(&recs, secs, budget))
}

fn identity() -> Result<Outcome> {
    let cfg = SuiteConfig { timing: true, ..SuiteConfig::default() };
    let (recs, secs) = records(suites::identity_brackets, &cfg)?;
    let mut out = summarize(&recs, secs, None);
    for r in &recs {
        let t = r.runtime.unwrap_or(f64::INFINITY);
        out.detail.push_str(&format!("\n      {}: [{:.5}, {:.5}] target {:.5}, {t:.1} s", r.claim, r.lower, r.upper, r.target));
        if t > 600.0 {
            out.pass = false;
        }
    }
    Ok(out)
}

fn determinism() -> Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for (suite, seed) in [("endpoints", 0), ("hs-oh", 3), ("duality", 7)] {
        let cfg = SuiteConfig { seed, ..SuiteConfig::default() };
        let a = serde_json::to_string_pretty(&run_suite(suite, &cfg)?).expect("report serializes");
        let b = serde_json::to_string_pretty(&run_suite(suite, &cfg)?).expect("report serializes");
        let same = a == b;
        pass &= same;
        detail.push(format!("{suite} seed {seed}: {} bytes, {}", a.len(), if same { "identical" } else { "DIFFERENT" }));
    }
    Ok(Outcome { pass, detail: detail.join("; ") })
}

fn main() -> ExitCode {
    let table: Vec<(&str, Box<dyn Fn() -> Result<Outcome>>)> = vec![
        ("scalar collapse", Box::new(|| simple(suites::scalar_collapse, Some(120.0)))),
        ("p = inf endpoint", Box::new(|| simple(suites::sup_endpoint, None))),
        ("Haagerup endpoints", Box::new(|| simple(suites::haagerup_endpoints, None))),
        ("S_2[E] = OH (x)_h E (x)_h OH", Box::new(|| simple(suites::theorem1_midpoint, None))),
        ("duality", Box::new(|| simple(suites::duality, None))),
        ("Fubini and p <= q inclusion", Box::new(|| simple(suites::fubini, None))),
        ("S_2 = OH", Box::new(|| simple(suites::s2_is_oh, None))),
        ("pi_2^0(I_E) = sqrt(dim E)", Box::new(identity)),
        ("HS coincidence on OH", Box::new(|| simple(suites::hs_coincidence, None))),
        ("cb norm <= pi_2^0", Box::new(|| simple(suites::cb_minorization, None))),
        ("interpolation estimator", Box::new(|| simple(suites::interpolation, None))),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in table.iter().enumerate() {
        let out = run().unwrap_or_else(|e| Outcome { pass: false, detail: format!("error: {e}") });
        failed += usize::from(!out.pass);
        println!("criterion {:>2} {} {name}: {}", i + 1, if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("{} of {} criteria passed", table.len() - failed, table.len());
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
