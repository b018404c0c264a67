//! Command-line front end. [`run`] parses arguments, writes JSON (or `key = value`
//! text) to `out`, diagnostics to `err`, and returns the process exit code:
//! 0 pass, 1 invariant violation, 2 usage error, 3 resource budget exceeded.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::brackets::{verify_convergent_lemma, verify_identities, verify_random, BracketSeq};
use crate::cfmartin::{check_growth, covering_epsilon, default_admissible, expand, AdmissibleSet};
use crate::dedekind::{self, dedekind_sum, homomorphism_defect, phi, random_sl2, random_small_int};
use crate::density::{d_tilde_range, graph_csv, graph_sample, witness, WitnessParams};
use crate::eisenstein::{oracle, EisensteinContext, DEFAULT_PREC};
use crate::error::{Error, Result};
use crate::matrix::Mat2O;
use crate::qfield::Field;

/// Environment variable overriding the default `N(c)` budget.
pub const BUDGET_ENV: &str = "ELLDED_BUDGET";

/// Smallest `--prec` accepted.
pub const MIN_PREC: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "ellded", version, about = "Continued fractions, elliptic Dedekind sums and density witnesses over imaginary quadratic fields")]
pub struct Cli {
    /// Largest N(c) summed directly.
    #[arg(long, global = true, env = BUDGET_ENV, default_value_t = dedekind::DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

#[derive(Args, Clone, Debug)]
pub struct FieldArg {
    /// Squarefree D > 0 for K = Q(sqrt(-D)).
    #[arg(long = "D", allow_hyphen_values = true)]
    pub d: i64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Field data.
    #[command(subcommand)]
    Field(FieldCmd),
    /// Continued-fraction expansions.
    #[command(subcommand)]
    Cf(CfCmd),
    /// Bracket identities.
    #[command(subcommand)]
    Brackets(BracketsCmd),
    /// Eisenstein values.
    #[command(subcommand)]
    Eisen(EisenCmd),
    /// Elliptic Dedekind sums.
    #[command(subcommand)]
    Dedekind(DedekindCmd),
    /// The homomorphism Phi.
    #[command(subcommand)]
    Phi(PhiCmd),
    /// Density witnesses and graph samples.
    #[command(subcommand)]
    Density(DensityCmd),
    /// Runs every invariant suite for one field.
    VerifyAll {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.9)]
        eps: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum FieldCmd {
    Info {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 0.9)]
        eps: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum CfCmd {
    Expand {
        #[command(flatten)]
        field: FieldArg,
        /// Point as "re,im".
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = 15)]
        depth: usize,
        #[arg(long, default_value_t = 0.9)]
        eps: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum BracketsCmd {
    Verify {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum EisenCmd {
    E2 {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = DEFAULT_PREC)]
        prec: f64,
    },
    E1 {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = DEFAULT_PREC)]
        prec: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum DedekindCmd {
    Eval {
        #[command(flatten)]
        field: FieldArg,
        /// Element of O_K as "x+y*w".
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        c: String,
        /// Require and report the normalized sum.
        #[arg(long)]
        normalized: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum PhiCmd {
    Check {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        max_c_norm: u64,
    },
}

#[derive(Subcommand, Debug)]
pub enum DensityCmd {
    Witness {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long, allow_hyphen_values = true)]
        z: String,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Same as `--format json`.
        #[arg(long)]
        json: bool,
    },
    Sample {
        #[command(flatten)]
        field: FieldArg,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 50)]
        max_norm: u64,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Validated settings shared by the subcommands.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub field: Field,
    pub eps: f64,
    pub prec: f64,
    pub budget: u64,
    pub seed: u64,
    pub format: Format,
}

impl RunConfig {
    pub fn new(d: i64, eps: f64, prec: f64, budget: u64, seed: u64, format: Format) -> Result<Self> {
        let field = Field::new(d)?;
        if !(prec >= MIN_PREC) {
            return Err(Error::PrecisionUnavailable { requested: prec, floor: MIN_PREC });
        }
        if budget < 1 {
            return Err(Error::Usage("budget must be at least 1".into()));
        }
        Ok(RunConfig { field, eps, prec, budget, seed, format })
    }

    pub fn admissible(&self) -> Result<AdmissibleSet> {
        default_admissible(self.field, self.eps)
    }

    pub fn context(&self) -> Result<EisensteinContext> {
        EisensteinContext::with_prec(self.field, self.prec)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::BudgetExceeded { .. } => 3,
        Error::InvalidField(_)
        | Error::Parse { .. }
        | Error::InadmissibleEpsilon { .. }
        | Error::PrecisionUnavailable { .. }
        | Error::NormalizationUndefined(_)
        | Error::ZeroModulus
        | Error::NotInvertible(_)
        | Error::Pole(_)
        | Error::Usage(_) => 2,
        _ => 1,
    }
}

/// Parses `"re,im"`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let bad = |reason: &str| Error::Parse { input: s.to_string(), reason: reason.to_string() };
    let (re, im) = s.split_once(',').ok_or_else(|| bad("expected \"re,im\""))?;
    let re: f64 = re.trim().parse().map_err(|_| bad("real part is not a number"))?;
    let im: f64 = im.trim().parse().map_err(|_| bad("imaginary part is not a number"))?;
    if !(re.is_finite() && im.is_finite()) {
        return Err(bad("components must be finite"));
    }
    Ok(Complex64::new(re, im))
}

fn pair(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// Outcome of one command: the document to print and whether every check passed.
struct Report {
    doc: Value,
    pass: bool,
}

impl Report {
    fn ok(doc: Value) -> Self {
        Report { doc, pass: true }
    }
}

/// Runs the command line `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    2
                }
            };
        }
    };
    match dispatch(&cli, out) {
        Ok(rep) => {
            if let Err(e) = emit(&rep.doc, cli.format, out) {
                let _ = writeln!(err, "error: {e}");
                return 1;
            }
            if rep.pass {
                0
            } else {
                let _ = writeln!(err, "invariant violation");
                1
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(doc: &Value, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match (format, doc) {
        (Format::Text, Value::Object(map)) => {
            for (k, v) in map {
                match v {
                    Value::String(s) => writeln!(out, "{k} = {s}")?,
                    other => writeln!(out, "{k} = {other}")?,
                }
            }
            Ok(())
        }
        (Format::Text, Value::Null) => Ok(()),
        (Format::Csv, Value::Object(map)) => {
            let rows: Vec<&serde_json::Map<String, Value>> = map
                .values()
                .find_map(|v| match v {
                    Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_object) => {
                        Some(items.iter().filter_map(Value::as_object).collect())
                    }
                    _ => None,
                })
                .unwrap_or_else(|| vec![map]);
            let header: Vec<&String> = rows[0].keys().collect();
            let line = |cells: Vec<String>| cells.join(",");
            writeln!(out, "{}", line(header.iter().map(|k| csv_cell(&Value::String(k.to_string()))).collect()))?;
            for row in rows {
                let cells = header.iter().map(|k| row.get(*k).map(csv_cell).unwrap_or_default()).collect();
                writeln!(out, "{}", line(cells))?;
            }
            Ok(())
        }
        _ => {
            let s = serde_json::to_string_pretty(doc).map_err(std::io::Error::other)?;
            writeln!(out, "{s}")
        }
    }
}

fn csv_cell(v: &Value) -> String {
    let raw = match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

fn config(cli: &Cli, d: i64, eps: f64, prec: f64, seed: u64) -> Result<RunConfig> {
    RunConfig::new(d, eps, prec, cli.budget, seed, cli.format)
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<Report> {
    match &cli.command {
        Command::Field(FieldCmd::Info { field, eps }) => {
            let cfg = config(cli, field.d, *eps, DEFAULT_PREC, 0)?;
            field_info(&cfg)
        }
        Command::Cf(CfCmd::Expand { field, z, depth, eps }) => {
            let cfg = config(cli, field.d, *eps, DEFAULT_PREC, 0)?;
            cf_expand(&cfg, parse_complex(z)?, *depth)
        }
        Command::Brackets(BracketsCmd::Verify { field, depth, trials, seed }) => {
            let cfg = config(cli, field.d, 0.9, DEFAULT_PREC, *seed)?;
            brackets_verify(&cfg, *depth, *trials)
        }
        Command::Eisen(EisenCmd::E2 { field, prec }) => {
            let cfg = config(cli, field.d, 0.9, *prec, 0)?;
            eisen_e2(&cfg)
        }
        Command::Eisen(EisenCmd::E1 { field, z, prec }) => {
            let cfg = config(cli, field.d, 0.9, *prec, 0)?;
            eisen_e1(&cfg, parse_complex(z)?)
        }
        Command::Dedekind(DedekindCmd::Eval { field, a, c, normalized }) => {
            let cfg = config(cli, field.d, 0.9, DEFAULT_PREC, 0)?;
            dedekind_eval(&cfg, a, c, *normalized)
        }
        Command::Phi(PhiCmd::Check { field, trials, seed, max_c_norm }) => {
            let cfg = config(cli, field.d, 0.9, DEFAULT_PREC, *seed)?;
            phi_check(&cfg, *trials, *max_c_norm)
        }
        Command::Density(DensityCmd::Witness { field, x, z, eps, json: _ }) => {
            let cfg = config(cli, field.d, 0.9, DEFAULT_PREC, 0)?;
            density_witness(&cfg, parse_complex(x)?, parse_complex(z)?, *eps)
        }
        Command::Density(DensityCmd::Sample { field, count, max_norm, out: path, seed }) => {
            let cfg = config(cli, field.d, 0.9, DEFAULT_PREC, *seed)?;
            density_sample(&cfg, *count, *max_norm, path.as_ref(), out)
        }
        Command::VerifyAll { field, seed, eps } => {
            let cfg = config(cli, field.d, *eps, DEFAULT_PREC, *seed)?;
            verify_all(&cfg)
        }
    }
}

fn field_info(cfg: &RunConfig) -> Result<Report> {
    let f = cfg.field;
    let adm = cfg.admissible()?;
    let b: Vec<String> = adm.denominators().iter().map(|b| b.to_string()).collect();
    let omega = if f.trace_omega() == 1 {
        format!("(1+sqrt(-{}))/2", f.d())
    } else {
        format!("sqrt(-{})", f.d())
    };
    Ok(Report::ok(json!({
        "D": f.d(),
        "d_K": f.discriminant(),
        "omega": omega,
        "omega_complex": pair(f.omega()),
        "trace_omega": f.trace_omega(),
        "norm_omega": f.norm_omega(),
        "area": f.area(),
        "extra_units": f.has_extra_units(),
        "B": format!("{{{}}}", b.join(",")),
        "eps": adm.eps(),
        "covering_epsilon": covering_epsilon(adm.denominators(), f),
        "mu": adm.mu(),
        "zeta": adm.zeta(),
    })))
}

fn cf_expand(cfg: &RunConfig, z: Complex64, depth: usize) -> Result<Report> {
    let adm = cfg.admissible()?;
    let exp = expand(z, depth, &adm)?;
    let growth = check_growth(&exp);
    let mut doc = serde_json::to_value(exp.to_json()).map_err(|e| Error::Usage(e.to_string()))?;
    let pass = growth.is_ok() && (1..=exp.len()).all(|n| exp.det_check(n));
    doc["checks"] = match &growth {
        Ok(g) => json!({
            "det": g.det_checks,
            "remainder_bound": g.remainder_bounds,
            "contraction": g.contraction_checks,
            "growth_pairs": g.growth_pairs,
            "approximation": g.approximation_bounds,
            "ratio": g.ratio_checks,
        }),
        Err(e) => json!({ "violation": e.to_string() }),
    };
    Ok(Report { doc, pass })
}

fn brackets_verify(cfg: &RunConfig, depth: usize, trials: usize) -> Result<Report> {
    let mut rng = cfg.rng();
    let random = verify_random(cfg.field, depth, trials, 5, &mut rng);
    let adm = cfg.admissible()?;
    let mut lemma = 0usize;
    let mut expansions = Vec::new();
    let mut failure = random.as_ref().err().map(|e| e.to_string());
    for _ in 0..trials.min(20) {
        let z = random_point(&mut rng);
        let exp = expand(z, depth, &adm)?;
        match verify_convergent_lemma(&exp)
            .and_then(|n| verify_identities(&BracketSeq::from_expansion(&exp)).map(|r| (n, r)))
        {
            Ok((n, r)) => {
                lemma += n;
                expansions.push(r.total());
            }
            Err(e) => failure = failure.or(Some(e.to_string())),
        }
    }
    let random = random.ok();
    Ok(Report {
        pass: failure.is_none(),
        doc: json!({
            "D": cfg.field.d(),
            "seed": cfg.seed,
            "trials": trials,
            "max_depth": depth,
            "first_step": random.as_ref().map(|r| r.first_step),
            "reversal": random.as_ref().map(|r| r.reversal),
            "determinant": random.as_ref().map(|r| r.determinant),
            "convergent_lemma": lemma,
            "expansion_identities": expansions.iter().sum::<usize>(),
            "violation": failure,
        }),
    })
}

fn eisen_e2(cfg: &RunConfig) -> Result<Report> {
    let ctx = cfg.context()?;
    let s2 = ctx.e2_zero();
    Ok(Report::ok(json!({
        "D": cfg.field.d(),
        "e2": pair(s2),
        "e2_err_bound": ctx.err_bound(s2),
        "eta1": pair(ctx.eta1()),
        "eta2": pair(ctx.eta2()),
        "pi_over_area": ctx.pi_over_area(),
        "legendre_residual": ctx.legendre_residual(),
        "prec": ctx.prec(),
    })))
}

fn eisen_e1(cfg: &RunConfig, z: Complex64) -> Result<Report> {
    let ctx = cfg.context()?;
    let v = ctx.e1_unreduced(z)?;
    Ok(Report::ok(json!({
        "D": cfg.field.d(),
        "z": pair(z),
        "e1": pair(v),
        "e1_err_bound": ctx.err_bound(v),
        "prec": ctx.prec(),
    })))
}

fn dedekind_eval(cfg: &RunConfig, a: &str, c: &str, normalized: bool) -> Result<Report> {
    let ctx = cfg.context()?;
    let a = cfg.field.parse_int(a)?;
    let c = cfg.field.parse_int(c)?;
    let r = dedekind_sum(&a, &c, &ctx, cfg.budget)?;
    if normalized {
        r.normalized_value()?;
    }
    Ok(Report::ok(r.to_json()))
}

fn phi_check(cfg: &RunConfig, trials: usize, max_c_norm: u64) -> Result<Report> {
    let ctx = cfg.context()?;
    let f = cfg.field;
    let mut rng = cfg.rng();
    let mut max_defect = 0.0f64;
    let mut failures = 0usize;
    for _ in 0..trials {
        let a = random_sl2(f, max_c_norm, &mut rng);
        let b = random_sl2(f, max_c_norm, &mut rng);
        let d = homomorphism_defect(&a, &b, &ctx, cfg.budget)?.norm();
        max_defect = max_defect.max(d);
        if !(d < 1e-6) {
            failures += 1;
        }
    }
    let q = phi(&Mat2O::quarter_turn(f), &ctx, cfg.budget)?.norm();
    let id = phi(&Mat2O::identity(f), &ctx, cfg.budget)?.norm();
    Ok(Report {
        pass: failures == 0 && q < 1e-10 && id < 1e-10,
        doc: json!({
            "D": f.d(),
            "seed": cfg.seed,
            "trials": trials,
            "max_defect": max_defect,
            "failures": failures,
            "phi_quarter_turn": q,
            "phi_identity": id,
        }),
    })
}

fn density_witness(cfg: &RunConfig, x: Complex64, z: Complex64, eps: f64) -> Result<Report> {
    let ctx = cfg.context()?;
    let mut params = WitnessParams::new(x, z, eps, cfg.admissible()?)?;
    params.direct_budget = cfg.budget;
    let w = witness(&params, &ctx)?;
    let two_way = w.computed.is_none_or(|c| (c - w.predicted).abs() < 1e-5);
    let pass = w.a.det().is_one()
        && w.delta1.norm() < eps
        && w.delta2.norm() < eps
        && w.phi_total.norm() < 1e-6
        && two_way
        && (w.predicted - w.target).abs() <= w.dalpha_bound(eps) + 1e-12;
    Ok(Report { doc: w.to_json(&params), pass })
}

fn density_sample(
    cfg: &RunConfig,
    count: usize,
    max_norm: u64,
    path: Option<&PathBuf>,
    out: &mut dyn Write,
) -> Result<Report> {
    let ctx = cfg.context()?;
    if max_norm > cfg.budget {
        return Err(Error::BudgetExceeded { norm: max_norm.to_string(), budget: cfg.budget });
    }
    let mut rng = cfg.rng();
    let pts = graph_sample(&ctx, count, max_norm, &mut rng)?;
    let csv = graph_csv(&pts);
    let (lo, hi) = d_tilde_range(&pts);
    match path {
        Some(p) => {
            std::fs::write(p, csv).map_err(|e| Error::Usage(format!("{}: {e}", p.display())))?;
            Ok(Report::ok(json!({
                "D": cfg.field.d(),
                "seed": cfg.seed,
                "count": pts.len(),
                "max_norm": max_norm,
                "d_tilde_min": lo,
                "d_tilde_max": hi,
                "out": p.display().to_string(),
            })))
        }
        None => {
            out.write_all(csv.as_bytes()).map_err(|e| Error::Usage(e.to_string()))?;
            Ok(Report::ok(Value::Null))
        }
    }
}

fn random_point<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))
}

/// Tally for one suite of `verify-all`.
#[derive(Default)]
struct Suite {
    checks: usize,
    failures: Vec<String>,
}

impl Suite {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn absorb<T>(&mut self, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.checks += 1;
                self.failures.push(e.to_string());
                None
            }
        }
    }

    fn to_json(&self, name: &str) -> Value {
        json!({
            "suite": name,
            "checks": self.checks,
            "passed": self.checks - self.failures.len(),
            "failures": self.failures.iter().take(5).collect::<Vec<_>>(),
        })
    }
}

fn verify_all(cfg: &RunConfig) -> Result<Report> {
    let f = cfg.field;
    let adm = cfg.admissible()?;
    let ctx = cfg.context()?;
    let mut rng = cfg.rng();
    let mut suites = Vec::new();

    let mut cf = Suite::default();
    let mut expansions = Vec::new();
    for _ in 0..20 {
        let z = random_point(&mut rng);
        if let Some(exp) = cf.absorb(expand(z, 15, &adm)) {
            for n in 1..=exp.len() {
                cf.check(exp.det_check(n), || format!("det M_{n} at z = {z}"));
            }
            if let Some(g) = cf.absorb(check_growth(&exp)) {
                cf.checks += g.total();
            }
            expansions.push(exp);
        }
    }
    suites.push(cf.to_json("cf"));

    let mut br = Suite::default();
    if let Some(r) = br.absorb(verify_random(f, 12, 100, 5, &mut rng)) {
        br.checks += r.total();
    }
    for exp in &expansions {
        if let Some(n) = br.absorb(verify_convergent_lemma(exp)) {
            br.checks += n;
        }
        if let Some(r) = br.absorb(verify_identities(&BracketSeq::from_expansion(exp))) {
            br.checks += r.total();
        }
    }
    suites.push(br.to_json("brackets"));

    let mut es = Suite::default();
    let (one, omega) = (Complex64::new(1.0, 0.0), f.omega());
    for _ in 0..100 {
        let z = random_point(&mut rng);
        let v = ctx.e1(z);
        es.check((ctx.e1(z + one) - v).norm() < 1e-9, || format!("E1 period 1 at {z}"));
        es.check((ctx.e1(z + omega) - v).norm() < 1e-9, || format!("E1 period w at {z}"));
        es.check((ctx.e1(-z) + v).norm() < 1e-9, || format!("E1 oddness at {z}"));
    }
    es.check(ctx.legendre_residual() < 1e-9, || "Legendre relation".into());
    if f.has_extra_units() {
        es.check(ctx.e2_zero().norm() < 1e-9, || "E2(0) = 0".into());
    } else {
        let o = oracle::e2_extrapolated(f);
        es.check((o - ctx.e2_zero()).norm() < 1e-4, || format!("E2(0) oracle {o}"));
    }
    suites.push(es.to_json("eisenstein"));

    let mut ds = Suite::default();
    for _ in 0..10 {
        let c = random_small_int(f, 100, &mut rng);
        let a = random_small_int(f, 100, &mut rng);
        let g = random_small_int(f, 10, &mut rng);
        let Some(base) = ds.absorb(dedekind_sum(&a, &c, &ctx, cfg.budget)) else { continue };
        if f.has_extra_units() {
            ds.check(base.value.norm() < 1e-6, || format!("D({a}, {c}) trivial"));
        }
        if let Some(p) = ds.absorb(dedekind_sum(&(&a + &(&g * &c)), &c, &ctx, cfg.budget)) {
            ds.check((p.value - base.value).norm() < 1e-6, || format!("periodicity ({a}, {c})"));
        }
        let lambda = random_small_int(f, 10, &mut rng);
        if let Some(s) = ds.absorb(dedekind_sum(&(&lambda * &a), &(&lambda * &c), &ctx, cfg.budget)) {
            ds.check((s.value - base.value).norm() < 1e-6, || format!("scaling ({a}, {c}) by {lambda}"));
        }
    }
    suites.push(ds.to_json("dedekind"));

    let mut ph = Suite::default();
    for _ in 0..20 {
        let a = random_sl2(f, 200, &mut rng);
        let b = random_sl2(f, 200, &mut rng);
        if let Some(d) = ph.absorb(homomorphism_defect(&a, &b, &ctx, cfg.budget)) {
            ph.check(d.norm() < 1e-6, || format!("Phi(AB) defect {d}"));
        }
    }
    for (name, m) in [("quarter turn", Mat2O::quarter_turn(f)), ("identity", Mat2O::identity(f))] {
        if let Some(v) = ph.absorb(phi(&m, &ctx, cfg.budget)) {
            ph.check(v.norm() < 1e-10, || format!("Phi({name}) = {v}"));
        }
    }
    suites.push(ph.to_json("phi"));

    if !f.has_extra_units() {
        let mut dn = Suite::default();
        for _ in 0..2 {
            let x = random_point(&mut rng);
            let z = x + Complex64::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            let Some(mut p) = dn.absorb(WitnessParams::new(x, z, 0.5, adm.clone())) else { continue };
            p.w_floor_override = Some(2.0);
            p.direct_budget = cfg.budget;
            if let Some(w) = dn.absorb(witness(&p, &ctx)) {
                dn.check(w.a.det().is_one(), || "det A = 1".into());
                dn.check(w.phi_total.norm() < 1e-6, || format!("Phi(A) = {}", w.phi_total));
                if let Some(c) = w.computed {
                    dn.check((c - w.predicted).abs() < 1e-5, || format!("D~(alpha) = {c} vs {}", w.predicted));
                }
            }
        }
        suites.push(dn.to_json("density"));
    }

    let pass = suites.iter().all(|s| s["failures"].as_array().is_some_and(|v| v.is_empty()));
    Ok(Report {
        pass,
        doc: json!({ "D": f.d(), "seed": cfg.seed, "suites": suites, "pass": pass }),
    })
}
