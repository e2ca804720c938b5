//! Command-line orchestration for the `gkdv` binary.
//!
//! Subcommands: `profile`, `cascade-table`, `catalog list|eval`, `verify`,
//! `evolve`. Flags override an optional `key = value` config file passed with
//! `--config`; `--show-config` prints the fully resolved configuration as
//! JSON and exits. Exit codes: 0 success, 1 check/runtime failure, 2
//! usage or parse error.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::cascade::{build_cascade, natural_domain, CascadeConfig, CascadeFns};
use crate::catalog::{entry_by_id, eval_entry, list_catalog};
use crate::evolve::{
    evolve_gkdv, mass, shape_error, tail_warning, FieldState, ShapeRef, SpectralGrid,
};
use crate::expr::{parse, NonlinearityExpr, ParamBindings};
use crate::output::{sink, write_csv, write_json, SCHEMA_VERSION};
use crate::profile::{default_start, integrate_profile, Sign};
use crate::quad::QuadTol;
use crate::verify::{full_report, VerifyConfig};

const EXIT_OK: i32 = 0;
const EXIT_FAIL: i32 = 1;
const EXIT_USAGE: i32 = 2;

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: msg.into(),
        }
    }

    fn fail(msg: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FAIL,
            message: msg.into(),
        }
    }
}

macro_rules! fail_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::fail(e.to_string())
            }
        }
    )*};
}
fail_from!(
    crate::cascade::CascadeError,
    crate::profile::ProfileError,
    crate::catalog::CatalogError,
    crate::verify::VerifyError,
    crate::evolve::EvolveError,
    std::io::Error
);

impl From<crate::expr::ParseError> for CliError {
    fn from(e: crate::expr::ParseError) -> Self {
        CliError::usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "gkdv",
    version,
    about = "Travelling-wave profiles and verification for the generalized KdV equation"
)]
struct Cli {
    /// Key = value file supplying defaults for long flags
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit
    #[arg(long, global = true)]
    show_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a travelling-wave profile y(z) and emit z,y,y1,y2 CSV
    Profile(ProfileArgs),
    /// Tabulate the cascade functions: y,H1,H2,R,H3 CSV
    CascadeTable(CascadeTableArgs),
    /// Closed-form solution families
    Catalog {
        #[command(subcommand)]
        action: CatalogAction,
    },
    /// Run the verification stack; exit 1 if any check fails
    Verify(VerifyArgs),
    /// Pseudo-spectral time evolution of an initial catalog wave
    Evolve(EvolveArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ProfileArgs {
    /// Nonlinearity a(u), e.g. "6*u" or "alpha*sqrt(u)+beta*u"
    #[arg(long)]
    nonlinearity: Option<String>,
    /// Parameter binding name=value (repeatable)
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "C1")]
    c1: Option<f64>,
    #[arg(long = "C2")]
    c2: Option<f64>,
    #[arg(long = "C3")]
    c3: Option<f64>,
    #[arg(long)]
    zmin: Option<f64>,
    #[arg(long)]
    zmax: Option<f64>,
    /// Number of output grid points
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    ymin: Option<f64>,
    #[arg(long)]
    ymax: Option<f64>,
    #[arg(long)]
    y_base: Option<f64>,
    /// Anchor value y(0); defaults to the largest simple turning point
    #[arg(long)]
    y_start: Option<f64>,
    /// Branch at the anchor: plus or minus
    #[arg(long)]
    sign_start: Option<String>,
    #[arg(long)]
    quad_abs: Option<f64>,
    #[arg(long)]
    quad_rel: Option<f64>,
    /// CSV output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON metadata output path
    #[arg(long)]
    meta_out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CascadeTableArgs {
    #[arg(long)]
    nonlinearity: Option<String>,
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "C2")]
    c2: Option<f64>,
    #[arg(long = "C3")]
    c3: Option<f64>,
    #[arg(long)]
    ymin: Option<f64>,
    #[arg(long)]
    ymax: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    y_base: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CatalogAction {
    /// Print the families with constraints and validation status
    List {
        /// Write the full JSON listing here as well
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample one family as x,u CSV at a fixed time
    Eval(CatalogEvalArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CatalogEvalArgs {
    /// Entry id, e.g. kdv_pos (see `catalog list`)
    #[arg(long)]
    entry: Option<String>,
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "C1")]
    c1: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    xmin: Option<f64>,
    #[arg(long)]
    xmax: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    #[arg(long)]
    nonlinearity: Option<String>,
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "C2")]
    c2: Option<f64>,
    #[arg(long = "C3")]
    c3: Option<f64>,
    #[arg(long)]
    domain_min: Option<f64>,
    #[arg(long)]
    domain_max: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    points: Option<usize>,
    /// JSON report path (the human-readable table always goes to stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct EvolveArgs {
    /// Initial condition: a catalog entry id
    #[arg(long)]
    entry: Option<String>,
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "C1")]
    c1: Option<f64>,
    /// Grid points (power of two)
    #[arg(long = "N")]
    n: Option<usize>,
    /// Period length
    #[arg(long = "L")]
    length: Option<f64>,
    /// Time step (defaults to the conservative dispersion bound; override
    /// for production runs, the linear term is integrated exactly)
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Write a snapshot every K steps (0 = none)
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Summary JSON path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// config file and resolution helpers
// ---------------------------------------------------------------------------

#[derive(Default)]
struct FileConfig(BTreeMap<String, String>);

impl FileConfig {
    fn load(path: &PathBuf) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("config file {path:?}: {e}")))?;
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!(
                    "config file line {}: expected key = value",
                    lineno + 1
                ))
            })?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    fn f64(&self, key: &str, flag: Option<f64>, default: f64) -> Result<f64, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => match self.0.get(key) {
                Some(s) => s
                    .parse()
                    .map_err(|_| CliError::usage(format!("config key {key}: bad number '{s}'"))),
                None => Ok(default),
            },
        }
    }

    fn usize(&self, key: &str, flag: Option<usize>, default: usize) -> Result<usize, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => match self.0.get(key) {
                Some(s) => s
                    .parse()
                    .map_err(|_| CliError::usage(format!("config key {key}: bad integer '{s}'"))),
                None => Ok(default),
            },
        }
    }

    fn u64(&self, key: &str, flag: Option<u64>, default: u64) -> Result<u64, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => match self.0.get(key) {
                Some(s) => s
                    .parse()
                    .map_err(|_| CliError::usage(format!("config key {key}: bad integer '{s}'"))),
                None => Ok(default),
            },
        }
    }

    fn string(&self, key: &str, flag: Option<String>) -> Option<String> {
        flag.or_else(|| self.0.get(key).cloned())
    }

    fn opt_f64(&self, key: &str, flag: Option<f64>) -> Result<Option<f64>, CliError> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => match self.0.get(key) {
                Some(s) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| CliError::usage(format!("config key {key}: bad number '{s}'"))),
                None => Ok(None),
            },
        }
    }
}

fn parse_bindings(args: &[String], file: &FileConfig) -> Result<ParamBindings, CliError> {
    let mut bindings = ParamBindings::new();
    if let Some(packed) = file.0.get("params") {
        for item in packed.split(',').filter(|s| !s.trim().is_empty()) {
            bindings
                .parse_assignment(item.trim())
                .map_err(|e| CliError::usage(format!("config params: {e}")))?;
        }
    }
    for item in args {
        bindings
            .parse_assignment(item)
            .map_err(|e| CliError::usage(format!("--param {item}: {e}")))?;
    }
    Ok(bindings)
}

fn require_nonlinearity(
    flag: Option<String>,
    file: &FileConfig,
) -> Result<NonlinearityExpr, CliError> {
    let source = file
        .string("nonlinearity", flag)
        .ok_or_else(|| CliError::usage("--nonlinearity is required"))?;
    Ok(parse(&source)?)
}

fn check_bound(a: &NonlinearityExpr, params: &ParamBindings) -> Result<(), CliError> {
    for name in a.free_params() {
        if params.get(name).is_none() {
            return Err(CliError::usage(format!(
                "parameter '{name}' is unbound; pass --param {name}=<value>"
            )));
        }
    }
    Ok(())
}

fn show_or<T: Serialize>(
    show: bool,
    subcommand: &'static str,
    settings: &T,
    run: impl FnOnce() -> Result<i32, CliError>,
) -> Result<i32, CliError> {
    if show {
        #[derive(Serialize)]
        struct Shown<'a, T> {
            schema_version: u32,
            subcommand: &'static str,
            settings: &'a T,
        }
        let mut out = sink(None)?;
        write_json(
            &mut out,
            &Shown {
                schema_version: SCHEMA_VERSION,
                subcommand,
                settings,
            },
        )?;
        return Ok(EXIT_OK);
    }
    run()
}

/// Entry point used by the `gkdv` binary; returns the process exit code.
pub fn run<I>(argv: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let file = match cli.config.as_ref().map(FileConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("gkdv: {}", e.message);
            return e.code;
        }
    };
    let result = match cli.command {
        Command::Profile(args) => cmd_profile(args, &file, cli.show_config),
        Command::CascadeTable(args) => cmd_cascade_table(args, &file, cli.show_config),
        Command::Catalog { action } => cmd_catalog(action, &file, cli.show_config),
        Command::Verify(args) => cmd_verify(args, &file, cli.show_config),
        Command::Evolve(args) => cmd_evolve(args, &file, cli.show_config),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gkdv: {}", e.message);
            e.code
        }
    }
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct ProfileSettings {
    nonlinearity: String,
    params: ParamBindings,
    c: f64,
    c1: f64,
    c2: f64,
    c3: f64,
    zmin: f64,
    zmax: f64,
    n: usize,
    ymin: f64,
    ymax: f64,
    y_base: Option<f64>,
    y_start: Option<f64>,
    sign_start: String,
    quad_abs: f64,
    quad_rel: f64,
}

fn build_fns(
    a: &NonlinearityExpr,
    params: &ParamBindings,
    c: f64,
    c2: f64,
    c3: f64,
    domain: (f64, f64),
    y_base: Option<f64>,
    tol: QuadTol,
) -> Result<CascadeFns, CliError> {
    let mut cfg = CascadeConfig::new(a.clone(), params.clone(), c)
        .with_constants(c2, c3)
        .with_domain(domain.0, domain.1);
    cfg.quad_tol = tol;
    if let Some(b) = y_base {
        cfg = cfg.with_base(b);
    }
    Ok(build_cascade(&cfg)?)
}

fn cmd_profile(args: ProfileArgs, file: &FileConfig, show: bool) -> Result<i32, CliError> {
    let a = require_nonlinearity(args.nonlinearity, file)?;
    let params = parse_bindings(&args.params, file)?;
    check_bound(&a, &params)?;
    let c = file.f64("c", args.c, 1.0)?;
    let half_width = 3.0 * c.abs().max(1.0);
    let natural = natural_domain(&a, &params, half_width);
    let settings = ProfileSettings {
        nonlinearity: a.source().to_string(),
        params: params.clone(),
        c,
        c1: file.f64("C1", args.c1, 0.0)?,
        c2: file.f64("C2", args.c2, 0.0)?,
        c3: file.f64("C3", args.c3, 0.0)?,
        zmin: file.f64("zmin", args.zmin, -10.0)?,
        zmax: file.f64("zmax", args.zmax, 10.0)?,
        n: file.usize("n", args.n, 2001)?,
        ymin: file.f64("ymin", args.ymin, natural.0)?,
        ymax: file.f64("ymax", args.ymax, natural.1)?,
        y_base: file.opt_f64("y-base", args.y_base)?,
        y_start: file.opt_f64("y-start", args.y_start)?,
        sign_start: file
            .string("sign-start", args.sign_start)
            .unwrap_or_else(|| "minus".to_string()),
        quad_abs: file.f64("quad-abs", args.quad_abs, 1e-12)?,
        quad_rel: file.f64("quad-rel", args.quad_rel, 1e-10)?,
    };
    show_or(show, "profile", &settings, || {
        let fns = build_fns(
            &a,
            &params,
            settings.c,
            settings.c2,
            settings.c3,
            (settings.ymin, settings.ymax),
            settings.y_base,
            QuadTol {
                abs: settings.quad_abs,
                rel: settings.quad_rel,
            },
        )?;
        let sign = match settings.sign_start.as_str() {
            "plus" | "+" => Sign::Plus,
            "minus" | "-" => Sign::Minus,
            other => return Err(CliError::usage(format!("bad --sign-start '{other}'"))),
        };
        let (y_start, sign) = match settings.y_start {
            Some(y) => (y, sign),
            None => default_start(&fns)?.ok_or_else(|| {
                CliError::fail("no simple turning point found; pass --y-start explicitly")
            })?,
        };
        let mut p = integrate_profile(
            &fns,
            (settings.zmin, settings.zmax),
            y_start,
            sign,
            settings.n,
        )?;
        p.meta.c1 = settings.c1;

        let mut out = sink(args.out.as_deref())?;
        write_csv(
            &mut out,
            &["z", "y", "y1", "y2"],
            (0..p.z.len()).map(|i| vec![p.z[i], p.y[i], p.y1[i], p.y2[i]]),
        )?;
        out.flush()?;
        if let Some(meta_path) = &args.meta_out {
            let mut m = sink(Some(meta_path))?;
            #[derive(Serialize)]
            struct Meta<'a> {
                schema_version: u32,
                meta: &'a crate::profile::ProfileMeta,
            }
            write_json(
                &mut m,
                &Meta {
                    schema_version: SCHEMA_VERSION,
                    meta: &p.meta,
                },
            )?;
        }
        Ok(EXIT_OK)
    })
}

#[derive(Serialize)]
struct CascadeTableSettings {
    nonlinearity: String,
    params: ParamBindings,
    c: f64,
    c2: f64,
    c3: f64,
    ymin: f64,
    ymax: f64,
    n: usize,
    y_base: Option<f64>,
}

fn cmd_cascade_table(
    args: CascadeTableArgs,
    file: &FileConfig,
    show: bool,
) -> Result<i32, CliError> {
    let a = require_nonlinearity(args.nonlinearity, file)?;
    let params = parse_bindings(&args.params, file)?;
    check_bound(&a, &params)?;
    let c = file.f64("c", args.c, 1.0)?;
    let natural = natural_domain(&a, &params, 3.0 * c.abs().max(1.0));
    let settings = CascadeTableSettings {
        nonlinearity: a.source().to_string(),
        params: params.clone(),
        c,
        c2: file.f64("C2", args.c2, 0.0)?,
        c3: file.f64("C3", args.c3, 0.0)?,
        ymin: file.f64("ymin", args.ymin, natural.0)?,
        ymax: file.f64("ymax", args.ymax, natural.1)?,
        n: file.usize("n", args.n, 501)?,
        y_base: file.opt_f64("y-base", args.y_base)?,
    };
    show_or(show, "cascade-table", &settings, || {
        let fns = build_fns(
            &a,
            &params,
            settings.c,
            settings.c2,
            settings.c3,
            (settings.ymin, settings.ymax),
            settings.y_base,
            QuadTol::default(),
        )?;
        // H3 is accumulated per maximal R > 0 component, measured from the
        // component's first grid point; NaN where R <= 0.
        let n = settings.n.max(2);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut h3_acc = f64::NAN;
        let mut prev_y: Option<f64> = None;
        for y in crate::quad::linspace(settings.ymin, settings.ymax, n) {
            let h1 = fns.h1(y)?;
            let h2 = fns.h2(y)?;
            let r = fns.radicand(y)?;
            if r > 0.0 {
                match prev_y {
                    Some(py) => h3_acc += fns.h3(py, y)?,
                    None => h3_acc = 0.0,
                }
                prev_y = Some(y);
            } else {
                h3_acc = f64::NAN;
                prev_y = None;
            }
            rows.push(vec![y, h1, h2, r, h3_acc]);
        }
        let mut out = sink(args.out.as_deref())?;
        write_csv(&mut out, &["y", "H1", "H2", "R", "H3"], rows.into_iter())?;
        out.flush()?;
        Ok(EXIT_OK)
    })
}

#[derive(Serialize)]
struct CatalogEvalSettings {
    entry: String,
    params: ParamBindings,
    c: f64,
    c1: f64,
    t: f64,
    xmin: f64,
    xmax: f64,
    n: usize,
}

fn cmd_catalog(
    action: CatalogAction,
    file: &FileConfig,
    show: bool,
) -> Result<i32, CliError> {
    match action {
        CatalogAction::List { out } => {
            if show {
                return show_or(true, "catalog-list", &(), || Ok(EXIT_OK));
            }
            let entries = list_catalog();
            println!(
                "{:<18} {:<24} {:<40} {}",
                "id", "a(u)", "constraints", "validated"
            );
            for e in &entries {
                println!(
                    "{:<18} {:<24} {:<40} {}",
                    e.id, e.a_source, e.constraints, e.validated
                );
                for o in e.screen_outcomes.iter().filter(|o| !o.pass) {
                    match (&o.error, o.max_residual) {
                        (Some(err), _) => println!("    [{}] {}", o.description, err),
                        (None, Some(r)) => {
                            println!("    [{}] max residual {r:.3e}", o.description)
                        }
                        _ => {}
                    }
                }
            }
            if let Some(path) = out {
                #[derive(Serialize)]
                struct Listing {
                    schema_version: u32,
                    entries: Vec<crate::catalog::CatalogEntry>,
                }
                let mut w = sink(Some(&path))?;
                write_json(
                    &mut w,
                    &Listing {
                        schema_version: SCHEMA_VERSION,
                        entries,
                    },
                )?;
            }
            Ok(EXIT_OK)
        }
        CatalogAction::Eval(args) => {
            let entry_id = file
                .string("entry", args.entry)
                .ok_or_else(|| CliError::usage("--entry is required"))?;
            let params = parse_bindings(&args.params, file)?;
            let settings = CatalogEvalSettings {
                entry: entry_id.clone(),
                params: params.clone(),
                c: file.f64("c", args.c, 1.0)?,
                c1: file.f64("C1", args.c1, 0.0)?,
                t: file.f64("t", args.t, 0.0)?,
                xmin: file.f64("xmin", args.xmin, -10.0)?,
                xmax: file.f64("xmax", args.xmax, 10.0)?,
                n: file.usize("n", args.n, 801)?,
            };
            show_or(show, "catalog-eval", &settings, || {
                let entry = entry_by_id(&settings.entry)?;
                let n = settings.n.max(2);
                let mut rows = Vec::with_capacity(n);
                for x in crate::quad::linspace(settings.xmin, settings.xmax, n) {
                    let u = eval_entry(&entry, x, settings.t, settings.c, settings.c1, &params)?;
                    rows.push(vec![x, u]);
                }
                let mut out = sink(args.out.as_deref())?;
                write_csv(&mut out, &["x", "u"], rows.into_iter())?;
                out.flush()?;
                Ok(EXIT_OK)
            })
        }
    }
}

#[derive(Serialize)]
struct VerifySettings {
    nonlinearity: String,
    params: ParamBindings,
    c: f64,
    c2: f64,
    c3: f64,
    domain_min: Option<f64>,
    domain_max: Option<f64>,
    seed: u64,
    points: usize,
}

fn cmd_verify(args: VerifyArgs, file: &FileConfig, show: bool) -> Result<i32, CliError> {
    let source = file
        .string("nonlinearity", args.nonlinearity)
        .ok_or_else(|| CliError::usage("--nonlinearity is required"))?;
    let params = parse_bindings(&args.params, file)?;
    let settings = VerifySettings {
        nonlinearity: source.clone(),
        params: params.clone(),
        c: file.f64("c", args.c, 1.0)?,
        c2: file.f64("C2", args.c2, 0.0)?,
        c3: file.f64("C3", args.c3, 0.0)?,
        domain_min: file.opt_f64("domain-min", args.domain_min)?,
        domain_max: file.opt_f64("domain-max", args.domain_max)?,
        seed: file.u64("seed", args.seed, 7)?,
        points: file.usize("points", args.points, 50)?,
    };
    show_or(show, "verify", &settings, || {
        let cfg = VerifyConfig {
            a_source: settings.nonlinearity.clone(),
            params: params.clone(),
            c: settings.c,
            c2: settings.c2,
            c3: settings.c3,
            domain: match (settings.domain_min, settings.domain_max) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                _ => {
                    return Err(CliError::usage(
                        "--domain-min and --domain-max must be given together",
                    ))
                }
            },
            seed: settings.seed,
            geometry_points: settings.points,
        };
        let report = full_report(&cfg)?;
        println!(
            "{:<28} {:>13} {:>10} {:>6}  sample",
            "check", "max residual", "tolerance", "pass"
        );
        for chk in &report.checks {
            println!(
                "{:<28} {:>13.3e} {:>10.1e} {:>6}  {}",
                chk.id, chk.max_residual, chk.tolerance, chk.pass, chk.sample
            );
        }
        println!(
            "overall: {}",
            if report.all_pass { "PASS" } else { "FAIL" }
        );
        if let Some(path) = &args.out {
            let mut w = sink(Some(path))?;
            write_json(&mut w, &report)?;
        }
        Ok(if report.all_pass { EXIT_OK } else { EXIT_FAIL })
    })
}

#[derive(Serialize)]
struct EvolveSettings {
    entry: String,
    params: ParamBindings,
    c: f64,
    c1: f64,
    grid_n: usize,
    length: f64,
    dt: f64,
    t_end: f64,
    snapshot_every: usize,
}

fn cmd_evolve(args: EvolveArgs, file: &FileConfig, show: bool) -> Result<i32, CliError> {
    let entry_id = file
        .string("entry", args.entry)
        .ok_or_else(|| CliError::usage("--entry is required"))?;
    let params = parse_bindings(&args.params, file)?;
    let grid_n = file.usize("N", args.n, 1024)?;
    let length = file.f64("L", args.length, 80.0)?;
    let grid = SpectralGrid::new(grid_n, length)?;
    let settings = EvolveSettings {
        entry: entry_id.clone(),
        params: params.clone(),
        c: file.f64("c", args.c, 1.0)?,
        c1: file.f64("C1", args.c1, 0.0)?,
        grid_n,
        length,
        dt: file.f64("dt", args.dt, grid.conservative_dt())?,
        t_end: file.f64("T", args.t_end, 10.0)?,
        snapshot_every: file.usize("snapshot-every", args.snapshot_every, 0)?,
    };
    show_or(show, "evolve", &settings, || {
        let entry = entry_by_id(&settings.entry)?;
        let a = parse(entry.a_source)?;
        check_bound(&a, &params)?;
        let u0: Vec<f64> = grid
            .points()
            .iter()
            .map(|&x| eval_entry(&entry, x, 0.0, settings.c, settings.c1, &params))
            .collect::<Result<_, _>>()?;
        let state0 = FieldState::new(0.0, u0);
        if let Some(w) = tail_warning(&state0, &grid) {
            eprintln!("gkdv: warning: {w}");
        }
        let mass0 = mass(&state0, &grid);

        if let Some(dir) = &args.snapshot_dir {
            std::fs::create_dir_all(dir)?;
        }
        let xs = grid.points();
        let mut step_idx = 0usize;
        let mut snapshot_idx = 0usize;
        let mut peak_track: Vec<(f64, f64)> = Vec::new();
        let mut snap_err: Option<std::io::Error> = None;
        let final_state = evolve_gkdv(
            &state0,
            &a,
            &params,
            &grid,
            settings.dt,
            settings.t_end,
            |st| {
                step_idx += 1;
                if settings.snapshot_every > 0 && step_idx % settings.snapshot_every == 0 {
                    let j = (0..st.u.len())
                        .max_by(|&a, &b| st.u[a].total_cmp(&st.u[b]))
                        .unwrap();
                    peak_track.push((st.t, xs[j]));
                    if let Some(dir) = &args.snapshot_dir {
                        let path = dir.join(format!("snapshot_{snapshot_idx:05}.csv"));
                        snapshot_idx += 1;
                        let write = || -> std::io::Result<()> {
                            let mut w = sink(Some(&path))?;
                            write_csv(
                                &mut w,
                                &["x", "u"],
                                xs.iter().zip(&st.u).map(|(x, u)| vec![*x, *u]),
                            )?;
                            w.flush()
                        };
                        if let (Err(e), None) = (write(), snap_err.as_ref()) {
                            snap_err = Some(e);
                        }
                    }
                }
            },
        )?;
        if let Some(e) = snap_err {
            return Err(e.into());
        }

        let mass1 = mass(&final_state, &grid);
        let err = shape_error(
            &final_state,
            &ShapeRef::Entry {
                entry: &entry,
                c: settings.c,
                c1: settings.c1,
                params: &params,
            },
            &grid,
        )?;

        #[derive(Serialize)]
        struct Summary {
            schema_version: u32,
            entry: String,
            c: f64,
            t_end: f64,
            dt: f64,
            grid_n: usize,
            length: f64,
            mass_initial: f64,
            mass_final: f64,
            mass_drift_rel: f64,
            peak_x: f64,
            expected_peak_x: f64,
            phase_error: f64,
            shape_linf: f64,
            peak_trajectory: Vec<(f64, f64)>,
        }
        let summary = Summary {
            schema_version: SCHEMA_VERSION,
            entry: settings.entry.clone(),
            c: settings.c,
            t_end: final_state.t,
            dt: settings.dt,
            grid_n: settings.grid_n,
            length: settings.length,
            mass_initial: mass0,
            mass_final: mass1,
            mass_drift_rel: (mass1 - mass0) / mass0.abs().max(1e-300),
            peak_x: err.peak_x,
            expected_peak_x: err.peak_x - err.phase_error,
            phase_error: err.phase_error,
            shape_linf: err.shape_linf,
            peak_trajectory: peak_track,
        };
        let mut out = sink(args.out.as_deref())?;
        write_json(&mut out, &summary)?;
        out.flush()?;
        Ok(EXIT_OK)
    })
}
