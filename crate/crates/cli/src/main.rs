use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use spnorm::cbnorm::cb_norm;
use spnorm::cbnorm::CbSearch;
use spnorm::config::SearchConfig;
use spnorm::haagerup::haagerup_norm;
use spnorm::interp::{interp_lower, interp_upper, CompatibleCouple, InterpConfig};
use spnorm::io::{ElementFile, MapFile, TensorFile};
use spnorm::opspace::{min_tensor_norm, mn_norm, MatrixNormFamily, MnElement, Space};
use spnorm::psumming::{pi2_upper, pi_p_lower, PiSearch, PietschSearch};
use spnorm::report::{to_csv, Record};
use spnorm::schatten::{sp_norm, SpElement};
use spnorm::suites::{run_suite, SuiteConfig};
use spnorm::{Error, NormBracket};

#[derive(Parser)]
#[command(name = "spnorm", version, about = "Norm brackets for vector-valued Schatten classes and completely p-summing maps")]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone, Debug)]
struct Flags {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 4)]
    restarts: usize,
    /// Replaces the per-check tolerances of a suite.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 3)]
    max_level: usize,
    #[arg(long, global = true, default_value_t = 8)]
    m_max: usize,
    #[arg(long, global = true, value_enum, default_value_t = Out::Json)]
    out: Out,
    /// JSON file whose fields override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Add wall-clock runtimes to records (reports are then no longer reproducible byte for byte).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Out {
    Json,
    Csv,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    restarts: Option<usize>,
    tol: Option<f64>,
    max_level: Option<usize>,
    m_max: Option<usize>,
    out: Option<Out>,
    timing: Option<bool>,
}

#[derive(Subcommand)]
enum Command {
    /// Norm of an element of M_n(E).
    Norm {
        space: String,
        file: PathBuf,
        /// Expected matrix level; checked against the file.
        level: Option<usize>,
    },
    /// Bracket on the S_p^m[E] norm.
    Vsnorm {
        file: PathBuf,
        /// Overrides the exponent in the file ("inf" allowed).
        #[arg(long)]
        p: Option<String>,
        /// Overrides the space in the file.
        #[arg(long)]
        space: Option<String>,
    },
    /// Bracket on the Haagerup tensor norm of an element of M_n(E (x) F).
    Haagerup { e: String, f: String, file: PathBuf },
    /// Interpolation bracket. Couples: schatten:D:P0:P1 or row-column:M:N.
    Interp {
        couple: String,
        file: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
    },
    /// Bracket on pi_p^0 of a linear map; p = 2 adds an upper bound.
    Pisum {
        file: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Named experiment suite: duality, fubini, theorem1, pi2-identity, hs-oh, endpoints.
    Suite { name: String },
}

struct Settings {
    seed: u64,
    restarts: usize,
    tol: Option<f64>,
    max_level: usize,
    m_max: usize,
    out: Out,
    timing: bool,
}

impl Settings {
    fn resolve(flags: &Flags) -> Result<Self, Error> {
        let mut s = Settings {
            seed: flags.seed,
            restarts: flags.restarts,
            tol: flags.tol,
            max_level: flags.max_level,
            m_max: flags.m_max,
            out: flags.out,
            timing: flags.timing,
        };
        if let Some(path) = &flags.config {
            let file: ConfigFile = serde_json::from_str(&read(path)?).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            s.seed = file.seed.unwrap_or(s.seed);
            s.restarts = file.restarts.unwrap_or(s.restarts);
            s.tol = file.tol.or(s.tol);
            s.max_level = file.max_level.unwrap_or(s.max_level);
            s.m_max = file.m_max.unwrap_or(s.m_max);
            s.out = file.out.unwrap_or(s.out);
            s.timing = file.timing.unwrap_or(s.timing);
        }
        if s.restarts == 0 || s.max_level == 0 || s.m_max == 0 {
            return Err(Error::Input("restarts, max-level and m-max must be positive".into()));
        }
        Ok(s)
    }

    fn search(&self) -> SearchConfig {
        SearchConfig::new(self.restarts, self.seed)
    }

    fn config_json(&self) -> Value {
        json!({ "restarts": self.restarts, "tol": self.tol, "max_level": self.max_level, "m_max": self.m_max })
    }
}

struct Outcome {
    records: Vec<Record>,
    details: Value,
    tolerances: BTreeMap<String, f64>,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

fn parse_p(s: &str) -> Result<f64, Error> {
    if s == "inf" {
        return Ok(f64::INFINITY);
    }
    s.parse().map_err(|_| Error::Input(format!("bad exponent '{s}'")))
}

fn computed(claim: String, b: &NormBracket, seed: u64) -> Record {
    let mut rec = Record::new(claim, f64::NAN, b.lower, b.upper, seed);
    rec.pass = b.lower <= b.upper * (1.0 + 1e-9);
    rec
}

fn cmd_norm(space: &str, file: &Path, level: Option<usize>, s: &Settings) -> Result<Outcome, Error> {
    let space = Space::builtin(space)?;
    let el = ElementFile::parse(&read(file)?)?;
    let coeffs = el.coeffs(&space)?;
    let n = coeffs[0].rows();
    if coeffs[0].cols() != n {
        return Err(Error::Input("an element of M_n(E) needs a square grid".into()));
    }
    if let Some(l) = level {
        if l != n {
            return Err(Error::Input(format!("requested level {l} but the element has level {n}")));
        }
    }
    let v = mn_norm(&space, &MnElement::new(n, coeffs)?)?;
    let b = NormBracket::exact(v, "exact");
    Ok(Outcome { records: vec![computed(format!("|x|_M_{n}({})", space.label()), &b, s.seed)], details: Value::Null, tolerances: BTreeMap::new() })
}

fn cmd_vsnorm(file: &Path, p: Option<&str>, space: Option<&str>, s: &Settings) -> Result<Outcome, Error> {
    let el = ElementFile::parse(&read(file)?)?;
    let space = match (space, &el.space) {
        (Some(name), _) => Space::builtin(name)?,
        (None, Some(r)) => r.resolve()?,
        (None, None) => return Err(Error::Input("no space given in the file or with --space".into())),
    };
    let p = match (p, &el.p) {
        (Some(p), _) => parse_p(p)?,
        (None, Some(p)) => p.value()?,
        (None, None) => return Err(Error::Input("no exponent given in the file or with --p".into())),
    };
    let u = SpElement::new(p, space.clone(), el.coeffs(&space)?)?;
    let b = sp_norm(&u, &s.search())?;
    let claim = format!("|u|_S_{}^{}[{}]", if p.is_infinite() { "inf".into() } else { p.to_string() }, u.m, space.label());
    Ok(Outcome {
        records: vec![computed(claim, &b, s.seed)],
        details: json!({ "upper_certificate": b.upper_certificate }),
        tolerances: BTreeMap::new(),
    })
}

fn cmd_haagerup(e: &str, f: &str, file: &Path, s: &Settings) -> Result<Outcome, Error> {
    let (e, f) = (Space::builtin(e)?, Space::builtin(f)?);
    let t = TensorFile::parse(&read(file)?)?;
    if t.coeffs.len() != e.dim() || t.coeffs.iter().any(|r| r.len() != f.dim()) {
        return Err(Error::Input(format!("coefficient grid must be {} x {}", e.dim(), f.dim())));
    }
    let b = haagerup_norm(&e, &f, &t.coeffs, &s.search())?;
    let min = min_tensor_norm(&e, &f, &t.coeffs).ok();
    Ok(Outcome {
        records: vec![computed(format!("|x|_{} (x)_h {}", e.label(), f.label()), &b, s.seed)],
        details: json!({ "min_tensor_norm": min, "upper_certificate": b.upper_certificate }),
        tolerances: BTreeMap::new(),
    })
}

fn parse_couple(spec: &str) -> Result<CompatibleCouple, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |i: usize| parts.get(i).copied().ok_or_else(|| Error::Input(format!("couple '{spec}' is missing fields")));
    let size = |i: usize| -> Result<usize, Error> { num(i)?.parse().map_err(|_| Error::Input(format!("bad size in couple '{spec}'"))) };
    match parts[0] {
        "schatten" if parts.len() == 4 => Ok(CompatibleCouple::schatten(size(1)?, parse_p(num(2)?)?, parse_p(num(3)?)?)),
        "row-column" if parts.len() == 3 => Ok(CompatibleCouple::row_column(size(1)?, size(2)?)),
        _ => Err(Error::Input(format!("unknown couple '{spec}'; use schatten:D:P0:P1 or row-column:M:N"))),
    }
}

fn cmd_interp(couple: &str, file: &Path, theta: f64, s: &Settings) -> Result<Outcome, Error> {
    let couple = parse_couple(couple)?;
    let x: Vec<spnorm::io::Entry> = serde_json::from_str(&read(file)?).map_err(|e| Error::Input(e.to_string()))?;
    if x.len() != couple.dim {
        return Err(Error::Input(format!("the couple has dimension {} but the vector has {} entries", couple.dim, x.len())));
    }
    let x: Vec<spnorm::C64> = x.iter().map(|e| e.value()).collect();
    let cfg = InterpConfig { seed: s.seed, ..InterpConfig::default() };
    let up = interp_upper(&couple, theta, &x, &cfg)?;
    let lower = match interp_lower(&couple, theta, &x, &cfg) {
        Ok(l) => l.value,
        Err(Error::Unsupported(_)) => 0.0,
        Err(e) => return Err(e),
    };
    let b = NormBracket { lower, upper: up.value, lower_witness: None, upper_certificate: format!("analytic family of degree {}", up.degree) };
    Ok(Outcome {
        records: vec![computed(format!("|x|_({})_{theta}", couple.label), &b, s.seed)],
        details: Value::Null,
        tolerances: BTreeMap::new(),
    })
}

fn cmd_pisum(file: &Path, p: f64, s: &Settings) -> Result<Outcome, Error> {
    let u = MapFile::parse(&read(file)?)?.build()?;
    let low = pi_p_lower(&u, p, &PiSearch::new(s.m_max, s.restarts, s.seed))?;
    let cb = cb_norm(&u, &CbSearch::new(s.max_level, s.restarts, s.seed))?;
    let (upper, how, cert) = if p == 2.0 {
        let up = pi2_upper(&u, &PietschSearch::new(s.restarts.min(2), s.seed))?;
        (up.value, up.how, serde_json::to_value(&up.certificate).unwrap_or(Value::Null))
    } else {
        (f64::INFINITY, "no upper bound off p = 2".to_string(), Value::Null)
    };
    let claim = format!("pi_{p}^0(u) for {} -> {}", u.domain.label(), u.codomain.label());
    let mut rec = Record::new(claim, f64::NAN, low.value, upper, s.seed);
    rec.pass = low.value <= upper * (1.0 + 1e-9) && cb.lower <= upper * (1.0 + 1e-9);
    Ok(Outcome {
        records: vec![rec],
        details: json!({ "lower_level": low.m, "upper": how, "cb_norm": { "lower": cb.lower, "upper": finite_or_null(cb.upper) }, "certificate": cert }),
        tolerances: BTreeMap::new(),
    })
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() { json!(v) } else { json!("inf") }
}

fn run(cli: &Cli) -> Result<(String, bool), Error> {
    let s = Settings::resolve(&cli.flags)?;
    let start = Instant::now();
    let (command, outcome) = match &cli.command {
        Command::Norm { space, file, level } => ("norm", cmd_norm(space, file, *level, &s)?),
        Command::Vsnorm { file, p, space } => ("vsnorm", cmd_vsnorm(file, p.as_deref(), space.as_deref(), &s)?),
        Command::Haagerup { e, f, file } => ("haagerup", cmd_haagerup(e, f, file, &s)?),
        Command::Interp { couple, file, theta } => ("interp", cmd_interp(couple, file, *theta, &s)?),
        Command::Pisum { file, p } => ("pisum", cmd_pisum(file, *p, &s)?),
        Command::Suite { name } => {
            let cfg = SuiteConfig { seed: s.seed, restarts: s.restarts, tol: s.tol, max_level: s.max_level, m_max: s.m_max, timing: s.timing };
            let r = run_suite(name, &cfg)?;
            ("suite", Outcome { records: r.records, details: json!({ "suite": r.suite }), tolerances: r.tolerances })
        }
    };
    let mut records = outcome.records;
    if s.timing && records.iter().all(|r| r.runtime.is_none()) {
        if let Some(r) = records.last_mut() {
            r.runtime = Some(start.elapsed().as_secs_f64());
        }
    }
    let pass = records.iter().all(|r| r.pass);
    let text = match s.out {
        Out::Json => {
            let report = json!({
                "tool": "spnorm",
                "version": env!("CARGO_PKG_VERSION"),
                "command": command,
                "seed": s.seed,
                "config": s.config_json(),
                "tolerances": outcome.tolerances,
                "details": outcome.details,
                "records": records,
                "pass": pass,
            });
            serde_json::to_string_pretty(&report).map_err(|e| Error::Input(e.to_string()))? + "\n"
        }
        Out::Csv => {
            let tols: Vec<String> = outcome.tolerances.iter().map(|(k, v)| format!("{k}={v}")).collect();
            format!(
                "# spnorm {} command={command} seed={} restarts={} max_level={} m_max={} tol={}\n{}",
                env!("CARGO_PKG_VERSION"),
                s.seed,
                s.restarts,
                s.max_level,
                s.m_max,
                if tols.is_empty() { s.tol.map(|t| t.to_string()).unwrap_or_else(|| "default".into()) } else { tols.join(";") },
                to_csv(&records)?
            )
        }
    };
    Ok((text, pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((text, pass)) => {
            print!("{text}");
            if pass { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("spnorm: {e}");
            match e {
                Error::Numerical { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
