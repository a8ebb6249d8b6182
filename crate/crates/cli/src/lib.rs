//! Command-line front end for the `lyapdisp` library.
//!
//! Exit codes: 0 success, 1 computation error, 2 usage error, 3 at least one
//! verification row failed.

pub mod format;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use lyapdisp::catalog::{all_families, all_pass, get_family, load_family_file, verify_constants, MatrixFamily, VerifyRow, FAMILY_NAMES};
use lyapdisp::digitsum::{
    digit_distribution_compare, empirical_dispersion, fit_linear_representation, fluctuation_statistics, scan_extrema,
    write_histogram_csv, write_octaves_csv, write_samples_csv, Fluctuation,
};
use lyapdisp::exactmat::format_rational;
use lyapdisp::gle::{exponents, quadrinomial_regroup_l, regroup, regroup_is_nonnegative, replica_exponent, slab_sums, LSample};
use lyapdisp::mcsim::{simulate, simulate_moment, trial_log_norms, write_trials_csv, SimConfig};
use lyapdisp::Error;

use format::{sig17, to_json};

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        let _ = writeln!(io::stdout(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_COMPUTE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VERIFY: i32 = 3;
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;
/// `lt` compares the root with one four lengths shallower.
const MIN_LT_MAX_LEN: usize = 7;

#[derive(Debug, Parser)]
#[command(name = "lyapdisp", version, about = "Lyapunov exponents and dispersion of digit-matrix products")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
    /// Write JSON output to this path (`-` for stdout).
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Write CSV output to this path (`-` for stdout).
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct FamilyArg {
    /// Built-in family name or alias, or `@path.json`.
    #[arg(long)]
    family: String,
}

#[derive(Debug, Args)]
struct DepthArg {
    /// Longest word in the series (default depends on the family).
    #[arg(long)]
    max_len: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in families, or print one in the family file format.
    Catalog {
        #[arg(long)]
        family: Option<String>,
    },
    /// Lambda, kappa, mu and sigma^2 from the word series.
    Exponents {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        depth: DepthArg,
        /// Report raw partial sums without acceleration.
        #[arg(long)]
        no_accel: bool,
    },
    /// Generalized Lyapunov exponent L(t) from the generating function.
    Lt {
        #[command(flatten)]
        family: FamilyArg,
        #[command(flatten)]
        depth: DepthArg,
        /// Moment orders.
        #[arg(long = "t", value_delimiter = ',', required = true, allow_hyphen_values = true)]
        t: Vec<f64>,
        /// Root-solve tolerance.
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
    },
    /// L(t) for integer t from the spectral radius of the Kronecker average.
    Replica {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long = "t", default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..))]
        t: u32,
    },
    /// Monte Carlo estimates from random products.
    Simulate {
        #[command(flatten)]
        family: FamilyArg,
        /// Product length.
        #[arg(long, default_value_t = 256)]
        k: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also estimate the growth of the t-th moment.
        #[arg(long = "t", allow_hyphen_values = true)]
        t: Option<f64>,
    },
    /// Checks the regrouped quadrinomial matrices and L(t) = ln((2^t + 1)/2).
    RegroupCheck {
        #[arg(long = "t", value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0, 2.0], allow_hyphen_values = true)]
        t: Vec<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Statistics of the digit-sum fluctuation function Phi.
    Phi(FluctuationArgs),
    /// Statistics of the odd-binomial-count fluctuation function Psi.
    Psi(FluctuationArgs),
    /// Variance growth of odd-coefficient counts over n = 2^j.
    Dispersion {
        #[command(flatten)]
        family: FamilyArg,
        #[arg(long, default_value_t = 20)]
        jmax: u32,
    },
    /// Distribution of #(aN + b) against #(N).
    Digits {
        #[arg(long, default_value_t = 3)]
        a: u64,
        #[arg(long, default_value_t = 0)]
        b: u64,
        /// N is uniform on [0, 2^jmax).
        #[arg(long, default_value_t = 24)]
        jmax: u32,
        /// Sample count; at least 2^jmax enumerates the whole range.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// Recovers u, v with count(n) = u D_z(n) v from the family's counts.
    Fit {
        #[command(flatten)]
        family: FamilyArg,
        /// Number of counts checked.
        #[arg(long, default_value_t = 4096)]
        n_check: u64,
    },
    /// Compares computed constants with the published ones.
    Verify {
        /// Verify one family instead of all eight.
        #[arg(long)]
        family: Option<String>,
        #[command(flatten)]
        depth: DepthArg,
    },
}

#[derive(Debug, Args)]
struct FluctuationArgs {
    #[arg(long, default_value_t = 8)]
    jmin: u32,
    #[arg(long, default_value_t = 24)]
    jmax: u32,
    #[arg(long, default_value_t = 1 << 16)]
    samples: usize,
    /// Also scan every n in [2, 2^jmax] for the extrema.
    #[arg(long)]
    scan: bool,
    /// Write the density histogram CSV to this path.
    #[arg(long, value_name = "PATH")]
    hist: Option<PathBuf>,
}

enum Failure {
    Compute(Error),
    Usage(String),
    Verify,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n as usize).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Usage(e.to_string())),
        },
        None => dispatch(&cli),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e}");
            EXIT_COMPUTE
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nUsage: lyapdisp [OPTIONS] <COMMAND>\nRun `lyapdisp --help` for the command list.");
            EXIT_USAGE
        }
        Err(Failure::Verify) => EXIT_VERIFY,
    }
}

fn resolve_family(spec: &str) -> std::result::Result<MatrixFamily, Failure> {
    match spec.strip_prefix('@') {
        Some(path) => Ok(load_family_file(path)?),
        None => get_family(spec).map_err(|e| Failure::Usage(e.to_string())),
    }
}

fn open(path: &Path) -> io::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdout()))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}

fn emit_json<T: Serialize>(cli: &Cli, value: &T) -> Outcome {
    if let Some(path) = &cli.json {
        let mut w = open(path)?;
        w.write_all(to_json(value).as_bytes())?;
        w.flush()?;
    }
    Ok(())
}

fn emit_csv(cli: &Cli, f: impl FnOnce(Box<dyn Write>) -> lyapdisp::Result<()>) -> Outcome {
    if let Some(path) = &cli.csv {
        f(open(path)?)?;
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Outcome {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must be positive")))
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Catalog { family } => catalog(cli, family.as_deref()),
        Command::Exponents { family, depth, no_accel } => {
            let fam = resolve_family(&family.family)?;
            let max_len = depth.max_len.unwrap_or(fam.default_max_len());
            let report = exponents(fam.factorization(), &fam.name, max_len, !no_accel)?;
            out!("family {} (q = {}, dim = {}), max_len {max_len}", fam.name, fam.q, fam.dim());
            for (name, a) in [("lambda", report.lambda), ("kappa", report.kappa), ("mu", report.mu), ("sigma2", report.sigma2)] {
                out!("{name:<8} {}  err {}  raw {}  column {}", sig17(a.accel), sig17(a.err), sig17(a.raw), a.depth);
            }
            out!("sigma2/ln2 {}", sig17(report.sigma2.accel / std::f64::consts::LN_2));
            for r in &report.replica {
                out!("replica rho(t = {}) {}", r.t, sig17(r.value));
            }
            if report.skipped_words > 0 {
                out!("skipped {} words with zero corner value", report.skipped_words);
            }
            emit_json(cli, &report)?;
            emit_csv(cli, |w| report.write_csv(w))
        }
        Command::Lt { family, depth, t, tol } => {
            check_positive("tol", *tol)?;
            let fam = resolve_family(&family.family)?;
            let max_len = depth.max_len.unwrap_or(fam.default_max_len());
            if max_len < MIN_LT_MAX_LEN {
                return Err(Failure::Usage(format!("--max-len must be at least {MIN_LT_MAX_LEN} for lt")));
            }
            let slabs = slab_sums(fam.factorization(), max_len, t)?;
            let mut samples = Vec::new();
            for (i, &ti) in t.iter().enumerate() {
                let sol = slabs.solve_l(i, *tol)?;
                out!("L({}) = {}  truncation {}", ti, sig17(sol.l), sig17(sol.truncation_error()));
                samples.push(LSample {
                    t: ti,
                    value: sol.l,
                    truncation: sol.truncation_error(),
                });
            }
            #[derive(Serialize)]
            struct LtOut<'a> {
                schema_version: u32,
                family: &'a str,
                max_len: usize,
                #[serde(rename = "L_samples")]
                samples: &'a [LSample],
            }
            emit_json(
                cli,
                &LtOut {
                    schema_version: OUTPUT_SCHEMA_VERSION,
                    family: &fam.name,
                    max_len,
                    samples: &samples,
                },
            )?;
            emit_csv(cli, |w| {
                let mut w = csv::Writer::from_writer(w);
                w.write_record(["t", "L", "truncation"])?;
                for s in &samples {
                    w.write_record([sig17(s.t), sig17(s.value), sig17(s.truncation)])?;
                }
                w.flush()?;
                Ok(())
            })
        }
        Command::Replica { family, t } => {
            let fam = resolve_family(&family.family)?;
            let rho = replica_exponent(&fam.d0, &fam.d1, *t)?;
            out!("rho = {}", sig17(rho));
            out!("L({t}) = {}", sig17(rho.ln()));
            #[derive(Serialize)]
            struct ReplicaOut<'a> {
                schema_version: u32,
                family: &'a str,
                t: u32,
                rho: f64,
                #[serde(rename = "L")]
                l: f64,
            }
            emit_json(
                cli,
                &ReplicaOut {
                    schema_version: OUTPUT_SCHEMA_VERSION,
                    family: &fam.name,
                    t: *t,
                    rho,
                    l: rho.ln(),
                },
            )
        }
        Command::Simulate { family, k, trials, seed, t } => {
            let fam = resolve_family(&family.family)?;
            let cfg = SimConfig::new(*k, *trials, *seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let res = match t {
                Some(t) => simulate_moment(&fam.d0, &fam.d1, &cfg, *t)?,
                None => simulate(&fam.d0, &fam.d1, &cfg)?,
            };
            out!("family {}, k {}, trials {}, seed {}", fam.name, res.k, res.trials, res.seed);
            out!("lambda_hat {} +- {}", sig17(res.lambda_hat), sig17(res.lambda_se));
            out!("sigma2_hat {} +- {}", sig17(res.sigma2_hat), sig17(res.sigma2_se));
            out!("lambda_diff {} +- {}", sig17(res.lambda_diff), sig17(res.lambda_diff_se));
            out!("sigma2_diff {} +- {}", sig17(res.sigma2_diff), sig17(res.sigma2_diff_se));
            if let Some(m) = &res.moment {
                out!("L_hat({}) {} +- {}", m.t, sig17(m.growth), sig17(m.growth_se));
                out!("L_diff({}) {} +- {}", m.t, sig17(m.growth_diff), sig17(m.growth_diff_se));
            }
            if res.degenerate > 0 {
                out!("{} products vanished", res.degenerate);
            }
            emit_json(cli, &res)?;
            if cli.csv.is_some() {
                let values = trial_log_norms(&fam.d0, &fam.d1, &cfg)?;
                emit_csv(cli, |w| write_trials_csv(&values, w))?;
            }
            Ok(())
        }
        Command::RegroupCheck { t, tol } => {
            check_positive("tol", *tol)?;
            let g3 = get_family("g3")?;
            let r = regroup(&g3.d0, &g3.d1)?;
            let mut rows = vec![VerifyRow::new("regrouped matrices nonnegative", regroup_is_nonnegative(&r) as u8 as f64, 1.0, 0.0)];
            for &ti in t {
                let l = quadrinomial_regroup_l(ti, 1e-15)?;
                rows.push(VerifyRow::new(format!("L({ti}) vs ln((2^t+1)/2)"), l, ((ti.exp2() + 1.0) / 2.0).ln(), *tol));
            }
            report_rows(cli, &[("g3".to_string(), rows)])
        }
        Command::Phi(args) => fluctuation(cli, Fluctuation::Phi, args),
        Command::Psi(args) => fluctuation(cli, Fluctuation::Psi, args),
        Command::Dispersion { family, jmax } => {
            let fam = resolve_family(&family.family)?;
            let r = empirical_dispersion(&fam, *jmax)?;
            out!("family {}, j = {}..={}", fam.name, r.octaves[0].j, r.j_max);
            out!("avg_slope {}  (all octaves {})", sig17(r.avg_slope), sig17(r.avg_slope_full));
            out!("typ_slope {}  (all octaves {})", sig17(r.typ_slope), sig17(r.typ_slope_full));
            for o in &r.octaves {
                out!("j {:>2}  var {}  var_ln {}  ratio {}", o.j, sig17(o.var), sig17(o.var_ln), sig17(o.var_ratio));
            }
            emit_json(cli, &r)?;
            emit_csv(cli, |w| write_octaves_csv(&r.octaves, w))
        }
        Command::Digits { a, b, jmax, samples } => {
            if b >= a {
                return Err(Failure::Usage("need 0 <= b < a".into()));
            }
            let c = digit_distribution_compare(*a, *b, *jmax, *samples)?;
            out!("#({a}N+{b}) vs #(N), N < 2^{jmax}, {} samples", c.samples);
            for (name, m) in [("a,b", c.moments), ("1,0", c.reference)] {
                out!(
                    "{name}: mean {}  variance {}  skewness {}",
                    sig17(m.mean),
                    sig17(m.variance),
                    sig17(m.skewness)
                );
            }
            out!("cdf distance between the two {}", sig17(c.ks_distance));
            out!("cdf distance to normal {} (reference {})", sig17(c.normal_distance), sig17(c.reference_normal_distance));
            emit_json(cli, &c)
        }
        Command::Fit { family, n_check } => {
            let fam = resolve_family(&family.family)?;
            let rep = fit_linear_representation(&fam, *n_check)?;
            let u: Vec<String> = rep.u.iter().map(format_rational).collect();
            let v: Vec<String> = rep.v.iter().map(format_rational).collect();
            out!("family {}, order {:?}, validated n < {}", fam.name, rep.order, rep.validated);
            out!("u = [{}]", u.join(", "));
            out!("v = [{}]", v.join(", "));
            #[derive(Serialize)]
            struct FitOut<'a> {
                schema_version: u32,
                family: &'a str,
                order: lyapdisp::digitsum::DigitOrder,
                validated: u64,
                u: Vec<String>,
                v: Vec<String>,
            }
            emit_json(
                cli,
                &FitOut {
                    schema_version: OUTPUT_SCHEMA_VERSION,
                    family: &fam.name,
                    order: rep.order,
                    validated: rep.validated,
                    u,
                    v,
                },
            )
        }
        Command::Verify { family, depth } => {
            let families = match family {
                Some(f) => vec![resolve_family(f)?],
                None => all_families(),
            };
            let mut tables = Vec::new();
            for fam in &families {
                let max_len = depth.max_len.unwrap_or(fam.default_max_len());
                let report = exponents(fam.factorization(), &fam.name, max_len, true)?;
                let mut rows = verify_constants(fam, &report);
                if fam.d0_ref.is_some() {
                    let mismatch = fam.check_reference_corners(8);
                    rows.push(VerifyRow::new("reference corners to length 8", mismatch.is_some() as u8 as f64, 0.0, 0.0));
                }
                tables.push((fam.name.clone(), rows));
            }
            report_rows(cli, &tables)
        }
    }
}

fn catalog(cli: &Cli, family: Option<&str>) -> Outcome {
    if let Some(f) = family {
        let fam = resolve_family(f)?;
        let text = fam.to_json();
        out!("{text}");
        if let Some(path) = &cli.json {
            let mut w = open(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        return Ok(());
    }
    #[derive(Serialize)]
    struct Entry {
        name: String,
        alias: Option<String>,
        q: u32,
        dim: usize,
        polynomial: Option<String>,
    }
    let entries: Vec<Entry> = FAMILY_NAMES
        .iter()
        .map(|n| {
            let f = get_family(n).expect("built-in");
            Entry {
                name: f.name.clone(),
                alias: f.alias.clone(),
                q: f.q,
                dim: f.dim(),
                polynomial: f.polynomial_mask.map(|m| lyapdisp::digitsum::Gf2Poly::from_mask(m).to_string()),
            }
        })
        .collect();
    for e in &entries {
        out!(
            "{:<4} {:<14} q = {}  dim = {:>2}  {}",
            e.name,
            e.alias.as_deref().unwrap_or(""),
            e.q,
            e.dim,
            e.polynomial.as_deref().unwrap_or("-")
        );
    }
    emit_json(cli, &entries)
}

fn fluctuation(cli: &Cli, kind: Fluctuation, args: &FluctuationArgs) -> Outcome {
    let stats = fluctuation_statistics(kind, args.jmin, args.jmax, args.samples).map_err(|e| Failure::Usage(e.to_string()))?;
    let scan = if args.scan { Some(scan_extrema(kind, 2, 1u64 << args.jmax)?) } else { None };
    let name = match kind {
        Fluctuation::Phi => "Phi",
        Fluctuation::Psi => "Psi",
    };
    out!("{name}: octaves {}..{}, {} samples per octave", args.jmin, args.jmax, args.samples);
    out!("inf  {}", sig17(stats.inf));
    out!("sup  {}", sig17(stats.sup));
    out!("mean {}", sig17(stats.mean));
    if let Some(e) = &scan {
        out!("scan inf {} at n = {}", sig17(e.inf), e.argmin);
        out!("scan sup {} at n = {}", sig17(e.sup), e.argmax);
    }
    for (p, v) in &stats.percentiles {
        out!("percentile {p:>5}: {}", sig17(*v));
    }
    #[derive(Serialize)]
    struct Out<'a> {
        schema_version: u32,
        #[serde(flatten)]
        stats: &'a lyapdisp::digitsum::FluctuationStats,
        scan: Option<lyapdisp::digitsum::Extrema>,
    }
    emit_json(
        cli,
        &Out {
            schema_version: OUTPUT_SCHEMA_VERSION,
            stats: &stats,
            scan,
        },
    )?;
    emit_csv(cli, |w| write_samples_csv(&stats.samples, w))?;
    if let Some(path) = &args.hist {
        write_histogram_csv(&stats.histogram, open(path)?)?;
    }
    Ok(())
}

fn report_rows(cli: &Cli, tables: &[(String, Vec<VerifyRow>)]) -> Outcome {
    out!("{:<6} {:<32} {:>24} {:>24} {:>10}  result", "family", "quantity", "computed", "reference", "tol");
    for (fam, rows) in tables {
        for r in rows {
            out!(
                "{:<6} {:<32} {:>24} {:>24} {:>10.1e}  {}",
                fam,
                r.quantity,
                sig17(r.computed),
                sig17(r.reference),
                r.tol,
                if r.pass { "PASS" } else { "FAIL" }
            );
        }
    }
    #[derive(Serialize)]
    struct Row<'a> {
        family: &'a str,
        #[serde(flatten)]
        row: &'a VerifyRow,
    }
    let flat: Vec<Row> = tables.iter().flat_map(|(f, rows)| rows.iter().map(move |row| Row { family: f, row })).collect();
    #[derive(Serialize)]
    struct Out<'a> {
        schema_version: u32,
        pass: bool,
        rows: &'a [Row<'a>],
    }
    let pass = tables.iter().all(|(_, rows)| all_pass(rows));
    emit_json(
        cli,
        &Out {
            schema_version: OUTPUT_SCHEMA_VERSION,
            pass,
            rows: &flat,
        },
    )?;
    emit_csv(cli, |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["family", "quantity", "computed", "reference", "tol", "pass"])?;
        for r in &flat {
            w.write_record([
                r.family.to_string(),
                r.row.quantity.clone(),
                sig17(r.row.computed),
                sig17(r.row.reference),
                sig17(r.row.tol),
                r.row.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}
