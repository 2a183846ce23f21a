//! `lacuna`: gaps of dilated lacunary sequences from the command line.
//!
//! Exit status is 0 on success, 1 when the computation reports a domain
//! error and 2 on a usage error.

mod config;

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use serde_json::{json, Value};

use lacuna_core::cf::{self, RealSpec};
use lacuna_core::littlewood::{self, ScanMode};
use lacuna_core::metric::bump::BumpFunction;
use lacuna_core::metric::moment::exp_moment_check;
use lacuna_core::metric::scan::{dispersion_scan, exponent_fit, sample_alpha, SCAN_EPSILON};
use lacuna_core::metric::{Measure, MetricParameters, DEFAULT_EPSILON};
use lacuna_core::nested::build_nested_alpha;
use lacuna_core::numerics::{dilate_gap_report, required_bits, DyadicReal, TorusPoint};
use lacuna_core::sequences::{geometric_sequence, parse_rational, thin, LacunarySequence};
use lacuna_core::turan::{dyadic_json, find_dilation_prefix};
use lacuna_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "lacuna", version, about = "Maximal gaps of dilated lacunary sequences modulo one")]
struct Cli {
    /// File of `key=value` lines supplying defaults; flags on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for parallel scans.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    workers: Option<u64>,

    /// Fractional bits used when rounding real inputs and sampled alphas.
    #[arg(long, global = true, env = "LACUNA_PRECISION_BITS")]
    precision_bits: Option<u64>,

    /// Write the JSON result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SequenceArgs {
    /// Growth ratio of `a_n = ceil(r^n)`, e.g. `2` or `3/2`.
    #[arg(long, default_value = "2", conflicts_with = "seq_file")]
    r: String,

    /// Read the sequence from a file (`r = ...` line, then one term per line).
    #[arg(long, value_name = "PATH")]
    seq_file: Option<PathBuf>,
}

impl SequenceArgs {
    fn load(&self, n_terms: usize) -> Result<LacunarySequence> {
        match &self.seq_file {
            Some(path) => {
                let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let seq = LacunarySequence::read_from(BufReader::new(f))?;
                if seq.len() < n_terms {
                    return Err(Error::InvalidInput(format!("need {n_terms} terms, {} has {}", path.display(), seq.len())));
                }
                Ok(seq)
            }
            None => geometric_sequence(&parse_rational(&self.r)?, n_terms),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gap report of `{alpha a_n}` for `n <= N`.
    Gaps {
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long)]
        n: u64,
        /// Real in any form `cf` accepts: decimal, `p/q`, `0x...`, `sqrt:D`, `golden`.
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Search for a dilation with small maximal gap over the first N terms.
    FindAlpha {
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long)]
        n: u64,
        /// Search interval `lo,hi` inside `[0, 1]`.
        #[arg(long)]
        interval: Option<String>,
    },
    /// One dilation serving the blocks `N_k = 4^k` for `k_start <= k <= k_end`.
    NestedAlpha {
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long)]
        k_start: u32,
        #[arg(long)]
        k_end: u32,
    },
    /// Gap statistics of random dilations at `N = n_min, 2 n_min, ... <= n_max`.
    MetricScan {
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long)]
        n_min: u64,
        #[arg(long)]
        n_max: u64,
        #[arg(long, default_value_t = 100)]
        alphas: usize,
        /// `lebesgue` or `bounded-cf:B`.
        #[arg(long, default_value = "lebesgue")]
        measure: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SCAN_EPSILON)]
        epsilon: f64,
        /// Write the per-alpha table here.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
    },
    /// Exponential moment check of the centered smoothed count.
    MomentCheck {
        #[arg(long, default_value = "3")]
        r: String,
        #[arg(long)]
        n: u64,
        /// Window center in `[0, 1)`.
        #[arg(long)]
        t: String,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        /// Quadrature samples per period.
        #[arg(long, default_value_t = 4096)]
        points: u64,
    },
    /// Continued fraction expansion with convergents and growth estimates.
    Cf {
        #[arg(long, allow_hyphen_values = true)]
        value: String,
        #[arg(long, default_value_t = 100)]
        depth: usize,
        /// Also report whether every partial quotient is at most this bound.
        #[arg(long)]
        bound: Option<u64>,
    },
    /// Builds a sequence with small inhomogeneous products and scans it for
    /// solutions of the multiplicative inequality.
    Littlewood {
        #[arg(long)]
        beta: String,
        #[arg(long, default_value = "0")]
        zeta: String,
        #[arg(long, default_value = "0")]
        eta: String,
        /// First real of the pair; sampled from `--measure` when absent.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long, default_value = "bounded-cf:5")]
        measure: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 30)]
        terms: usize,
        /// Also check every `n <= brute_n`.
        #[arg(long)]
        brute_n: Option<u64>,
        /// Solutions along the built sequence.
        #[arg(long, value_name = "PATH")]
        csv: Option<PathBuf>,
        /// Solutions of the brute-force range.
        #[arg(long, value_name = "PATH")]
        brute_csv: Option<PathBuf>,
        /// The built sequence with its per-term checks.
        #[arg(long, value_name = "PATH")]
        cz_csv: Option<PathBuf>,
    },
}

/// Result JSON plus the one-line summary.
struct Outcome {
    json: Value,
    summary: String,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_real_dyadic(s: &str, bits: u64) -> Result<DyadicReal> {
    Ok(RealSpec::parse(s)?.approx(bits))
}

fn run_gaps(seq: &SequenceArgs, n: u64, alpha: &str, epsilon: f64, bits: Option<u64>) -> Result<Outcome> {
    let seq = seq.load(n as usize)?;
    let terms = &seq.terms()[..n as usize];
    let bits = bits.unwrap_or_else(|| terms.iter().max().map(required_bits).unwrap_or(64));
    let alpha = parse_real_dyadic(alpha, bits)?;
    let report = dilate_gap_report(&alpha, terms, epsilon)?;
    let mut json = report.to_json();
    json["alpha"] = dyadic_json(&alpha, 30);
    json["max_gap_hex"] = json!(report.max_gap.to_hex());
    json["epsilon"] = json!(epsilon);
    let summary = format!("gaps: N={n} max_gap={}", report.max_gap.to_decimal(12));
    Ok(Outcome { json, summary })
}

fn run_find_alpha(seq: &SequenceArgs, n: u64, interval: Option<&str>) -> Result<Outcome> {
    let seq = seq.load(n as usize)?;
    let bounds = match interval {
        Some(s) => {
            let (lo, hi) = s.split_once(',').ok_or_else(|| Error::Parse(format!("interval '{s}' is not lo,hi")))?;
            Some((RealSpec::parse(lo)?.approx(128), RealSpec::parse(hi)?.approx(128)))
        }
        None => None,
    };
    let cert = find_dilation_prefix(&seq, n, bounds.as_ref().map(|(a, b)| (a, b)))?;
    let json = cert.to_json();
    let gap = cert.verified_gap.as_ref().map(|g| g.to_decimal(12)).unwrap_or_default();
    Ok(Outcome { json, summary: format!("find-alpha: N={n} verified_gap={gap}") })
}

fn run_nested(seq: &SequenceArgs, k_start: u32, k_end: u32) -> Result<Outcome> {
    let need = 4usize.checked_pow(k_end).and_then(|v| v.checked_mul(2)).ok_or_else(|| Error::InvalidInput("k_end too large".into()))?;
    let seq = seq.load(need)?;
    let chain = build_nested_alpha(&seq, k_start, k_end)?;
    let summary = format!("nested-alpha: k={k_start}..{k_end} all_blocks_within_bound={}", chain.all_blocks_within_bound());
    Ok(Outcome { json: chain.to_json(), summary })
}

#[allow(clippy::too_many_arguments)]
fn run_metric_scan(
    seq: &SequenceArgs,
    n_min: u64,
    n_max: u64,
    count: usize,
    measure: &str,
    seed: u64,
    epsilon: f64,
    bits: Option<u64>,
    csv: Option<&Path>,
) -> Result<Outcome> {
    if n_min < 2 || n_max < n_min {
        return Err(Error::InvalidInput(format!("need 2 <= n_min <= n_max, got {n_min}..{n_max}")));
    }
    let measure: Measure = measure.parse()?;
    let n_list: Vec<u64> = std::iter::successors(Some(n_min), |&n| n.checked_mul(2)).take_while(|&n| n <= n_max).collect();
    let seq = seq.load(n_max as usize)?;
    let terms = &seq.terms()[..n_max as usize];
    let bits = bits.unwrap_or_else(|| terms.iter().max().map(required_bits).unwrap_or(64));
    let alphas = (0..count as u64).map(|i| sample_alpha(measure, seed, i, bits)).collect::<Result<Vec<_>>>()?;
    let mut table = dispersion_scan(terms, &alphas, &n_list, epsilon)?;
    table.seed = Some(seed);
    table.measure = measure.label();
    if let Some(path) = csv {
        write_file(path, &table.to_csv())?;
    }
    let mut json = table.summary_json();
    json["exponent_fit"] = match exponent_fit(&table) {
        Ok(fit) => fit.to_json(),
        Err(e) => json!({ "error": e.code() }),
    };
    let summary = format!("metric-scan: {} alphas x {} values of N, measure {}", count, n_list.len(), table.measure);
    Ok(Outcome { json, summary })
}

fn run_moment(r: &str, n: u64, t: &str, epsilon: f64, points: u64) -> Result<Outcome> {
    let params = MetricParameters::new(n, epsilon)?;
    let seq = geometric_sequence(&parse_rational(r)?, n as usize)?;
    let thinned = thin(&seq, n, params.thinning_exponent())?;
    let t_point = TorusPoint::new(parse_real_dyadic(t, 128)?)?;
    let check = exp_moment_check(&thinned, &t_point, &params, BumpFunction::get(), points)?;
    let mut json = check.to_json();
    json["n"] = json!(n);
    json["t"] = dyadic_json(t_point.value(), 30);
    let summary = format!("moment-check: N={n} lhs+err={:.6} rhs={:.6} pass={}", check.lhs + check.error_bound, check.rhs, check.pass);
    Ok(Outcome { json, summary })
}

fn run_cf(value: &str, depth: usize, bound: Option<u64>) -> Result<Outcome> {
    let spec = RealSpec::parse(value)?;
    let expansion = cf::expand(&spec, depth)?;
    let mut json = expansion.to_json();
    json["value"] = json!(spec.to_string());
    json["lambda_estimate"] = match cf::lambda_estimate(&expansion) {
        Ok(l) => json!(l.to_decimal(30)),
        Err(e) => json!({ "error": e.code() }),
    };
    json["growth_rate"] = match cf::growth_rate(&expansion) {
        Ok(g) => json!(g),
        Err(e) => json!({ "error": e.code() }),
    };
    if let Some(b) = bound {
        json["bounded_by"] = json!(b);
        json["bounded"] = json!(cf::is_bad_proxy(&expansion, &BigUint::from(b)));
    }
    let summary = format!("cf: {} quotients, terminated={}", expansion.depth(), expansion.terminated);
    Ok(Outcome { json, summary })
}

struct LittlewoodArgs<'a> {
    beta: &'a str,
    zeta: &'a str,
    eta: &'a str,
    alpha: Option<&'a str>,
    measure: &'a str,
    seed: u64,
    epsilon: f64,
    terms: usize,
    brute_n: Option<u64>,
    csv: Option<&'a Path>,
    brute_csv: Option<&'a Path>,
    cz_csv: Option<&'a Path>,
}

fn run_littlewood(a: &LittlewoodArgs, bits: Option<u64>) -> Result<Outcome> {
    let shift_bits = bits.unwrap_or(256);
    let beta = RealSpec::parse(a.beta)?;
    let zeta = parse_real_dyadic(a.zeta, shift_bits)?;
    let eta = parse_real_dyadic(a.eta, shift_bits)?;
    let seq = littlewood::cz_build(&beta, &zeta, a.terms)?;
    let failures = littlewood::verify_cz(&seq)?;
    let values = seq.values();
    let mut n_max = values.iter().max().cloned().unwrap_or_default();
    if let Some(b) = a.brute_n {
        n_max = n_max.max(BigUint::from(b));
    }
    let (alpha, alpha_source) = match a.alpha {
        Some(s) => (RealSpec::parse(s)?, "given".to_string()),
        None => {
            let measure: Measure = a.measure.parse()?;
            let bits = bits.unwrap_or_else(|| required_bits(&n_max));
            let x = sample_alpha(measure, a.seed, 0, bits)?;
            (RealSpec::Dyadic(x), format!("sampled {} seed {} (heuristic proxy)", measure.label(), a.seed))
        }
    };
    let along = littlewood::littlewood_scan(&alpha, &beta, &eta, &zeta, a.epsilon, &ScanMode::Terms(values))?;
    let (ratios, chain_constant) = littlewood::chain_ratios(&seq, a.epsilon);
    let mut json = json!({
        "alpha_source": alpha_source,
        "sequence": seq.to_json(),
        "recheck_failures": failures,
        "chain": { "ratios": ratios, "constant": chain_constant },
        "along_sequence": along.to_json(),
    });
    if let Some(path) = a.cz_csv {
        write_file(path, &littlewood::cz_csv(&seq))?;
    }
    if let Some(path) = a.csv {
        write_file(path, &along.solutions_csv())?;
    }
    let mut summary = format!("littlewood: {} terms, {} solutions along the sequence", seq.terms.len(), along.solutions.len());
    if let Some(limit) = a.brute_n {
        let brute = littlewood::littlewood_scan(&alpha, &beta, &eta, &zeta, a.epsilon, &ScanMode::Brute(limit))?;
        if let Some(path) = a.brute_csv {
            write_file(path, &brute.solutions_csv())?;
        }
        summary.push_str(&format!(", {} with n <= {limit}", brute.solutions.len()));
        json["brute"] = brute.to_json();
    }
    Ok(Outcome { json, summary })
}

fn run(cli: &Cli) -> Result<Outcome> {
    let bits = cli.precision_bits;
    match &cli.command {
        Command::Gaps { seq, n, alpha, epsilon } => run_gaps(seq, *n, alpha, *epsilon, bits),
        Command::FindAlpha { seq, n, interval } => run_find_alpha(seq, *n, interval.as_deref()),
        Command::NestedAlpha { seq, k_start, k_end } => run_nested(seq, *k_start, *k_end),
        Command::MetricScan { seq, n_min, n_max, alphas, measure, seed, epsilon, csv } => {
            run_metric_scan(seq, *n_min, *n_max, *alphas, measure, *seed, *epsilon, bits, csv.as_deref())
        }
        Command::MomentCheck { r, n, t, epsilon, points } => run_moment(r, *n, t, *epsilon, *points),
        Command::Cf { value, depth, bound } => run_cf(value, *depth, *bound),
        Command::Littlewood { beta, zeta, eta, alpha, measure, seed, epsilon, terms, brute_n, csv, brute_csv, cz_csv } => {
            let args = LittlewoodArgs {
                beta,
                zeta,
                eta,
                alpha: alpha.as_deref(),
                measure,
                seed: *seed,
                epsilon: *epsilon,
                terms: *terms,
                brute_n: *brute_n,
                csv: csv.as_deref(),
                brute_csv: brute_csv.as_deref(),
                cz_csv: cz_csv.as_deref(),
            };
            run_littlewood(&args, bits)
        }
    }
}

fn main() -> ExitCode {
    let args = match config::load_and_merge(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(w) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w as usize).build_global() {
            eprintln!("error: worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match run(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut text = serde_json::to_string_pretty(&outcome.json).expect("serializable json");
    text.push('\n');
    let written = match &cli.out {
        Some(path) => write_file(path, &text),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io(e.to_string())),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    eprintln!("{}", outcome.summary);
    ExitCode::SUCCESS
}
