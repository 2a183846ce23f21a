//! Acceptance run. Prints one `PASS`/`FAIL` line per criterion with the
//! measured values; tolerances and time limits are fixed below.
//!
//! Failures are reported but do not fail `cargo test` unless
//! `LACUNA_ACCEPTANCE_STRICT=1` is set.

use std::fmt::Write as _;
use std::fs;
use std::time::{Duration, Instant};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lacuna_core::cf::{self, RealSpec};
use lacuna_core::littlewood::{self, littlewood_threshold, ScanMode};
use lacuna_core::metric::bump::BumpFunction;
use lacuna_core::metric::counting::{default_k_max, smooth_count_direct, smooth_count_fourier};
use lacuna_core::metric::moment::exp_moment_check;
use lacuna_core::metric::scan::{exponent_fit, iid_baseline, random_scan, sample_alpha, ScanTable, SCAN_EPSILON};
use lacuna_core::metric::{Measure, MetricParameters};
use lacuna_core::nested::build_nested_alpha;
use lacuna_core::numerics::{frac, gap_report, required_bits, DyadicReal, TorusPoint};
use lacuna_core::sequences::{geometric_sequence, smallest_l, thin, LacunarySequence};
use lacuna_core::turan::{delta_lower_bound, find_dilation_prefix};

struct Outcome {
    pass: bool,
    detail: String,
    /// Data files whose bytes the reproducibility check compares across reruns.
    artifacts: Vec<(String, String)>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail, artifacts: Vec::new() }
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// ---------------------------------------------------------------------------
// Independent oracles.

/// Numerators of `{alpha a_n}` at scale `2^e` for a dyadic `alpha = m / 2^e`,
/// stepping `x_{n+1} = r x_n mod 2^e` whenever `a_{n+1} = r a_n` exactly.
fn oracle_dilates(alpha: &DyadicReal, terms: &[BigUint], r: Option<u32>) -> (Vec<BigUint>, u64) {
    let e = (-alpha.exponent()).max(0) as u64;
    let modulus = BigUint::one() << e;
    let m = alpha.mantissa().magnitude() % &modulus;
    let mut out: Vec<BigUint> = Vec::with_capacity(terms.len());
    for (i, a) in terms.iter().enumerate() {
        let x = match (r, i) {
            (Some(r), i) if i > 0 && *a == &terms[i - 1] * r => (&out[i - 1] * r) % &modulus,
            _ => (&m * a) % &modulus,
        };
        out.push(x);
    }
    (out, e)
}

/// Largest circular gap of numerators at scale `2^e`, as a numerator.
fn oracle_max_gap(mut xs: Vec<BigUint>, e: u64) -> BigUint {
    xs.sort();
    let mut best = (BigUint::one() << e) - xs.last().unwrap() + &xs[0];
    for w in xs.windows(2) {
        let g = &w[1] - &w[0];
        if g > best {
            best = g;
        }
    }
    best
}

fn ratio_f64(num: &BigUint, e: u64) -> f64 {
    let shift = num.bits().saturating_sub(60);
    (num >> shift).to_f64().unwrap() * 2f64.powi(shift as i32 - e as i32)
}

/// `||(p + sqrt(d)) / q * n - z||` to within `2^-w`, computed with an integer square root.
fn quad_distance(p: i64, d: u64, q: i64, n: &BigUint, z: &BigRational, w: u64) -> f64 {
    let n = BigInt::from(n.clone());
    let scale = BigInt::one() << w;
    let root = BigInt::from(((BigUint::from(d) * n.magnitude() * n.magnitude()) << (2 * w)).sqrt());
    let val = BigRational::new(BigInt::from(p) * &n * &scale + root, BigInt::from(q) * &scale) - z;
    let f = &val - val.floor();
    let f = if f > BigRational::new(1.into(), 2.into()) { BigRational::one() - f } else { f };
    f.to_f64().unwrap()
}

// ---------------------------------------------------------------------------

fn gap_oracle() -> Outcome {
    const SCALE: u32 = 48;
    let one = 1u64 << SCALE;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut total_points = 0;
    for case in 0..500 {
        let n = rng.gen_range(1..=1000usize);
        let ms: Vec<u64> = match case % 3 {
            0 => (0..n).map(|_| rng.gen::<u64>() >> (64 - SCALE)).collect(),
            1 => (0..n).map(|_| rng.gen_range(0..32u64) << (SCALE - 5)).collect(),
            _ => {
                let a = rng.gen::<u64>() >> (64 - SCALE);
                (0..n).map(|k| a.wrapping_mul(3u64.wrapping_pow(k as u32 % 40)) % one).collect()
            }
        };
        total_points += n;
        let pts: Vec<TorusPoint> =
            ms.iter().map(|&m| TorusPoint::new(DyadicReal::from_parts(m, -(SCALE as i64))).unwrap()).collect();
        let got = gap_report(&pts).unwrap().max_gap;
        let mut best = 0u64;
        for &x in &ms {
            let next = ms.iter().map(|&y| (y + one - x) % one).filter(|&d| d > 0).min().unwrap_or(one);
            best = best.max(next);
        }
        if got != DyadicReal::from_parts(best, -(SCALE as i64)) {
            mismatches += 1;
        }
    }
    Outcome::new(mismatches == 0, format!("500 configurations, {total_points} points, {mismatches} mismatches"))
}

fn find_alpha_scale() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in [2u32, 3] {
        let rat = BigRational::from_integer(r.into());
        let l = smallest_l(&rat);
        let seq = geometric_sequence(&rat, 1 << 14).unwrap();
        for k in [8u32, 10, 12, 14] {
            let n = 1u64 << k;
            let terms = &seq.terms()[..n as usize];
            match find_dilation_prefix(&seq, n, None) {
                Ok(cert) => {
                    let (xs, e) = oracle_dilates(&cert.alpha, terms, Some(r));
                    let g = oracle_max_gap(xs, e);
                    let exact = BigRational::new(BigInt::from(g.clone()), BigInt::one() << e);
                    let agrees = cert.verified_gap.as_ref().map(|v| v.to_rational()) == Some(exact);
                    let norm = ratio_f64(&g, e) * n as f64 / (n as f64).ln();
                    let ok = agrees && norm <= 3.0 * l as f64;
                    pass &= ok;
                    parts.push(format!("r={r} N=2^{k}: {norm:.3}{}", if ok { "" } else { " (!)" }));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("r={r} N=2^{k}: {}", e.code()));
                }
            }
        }
    }
    Outcome::new(pass, format!("N G / ln N vs 3l (l=2 for r=2, 1 for r=3): {}", parts.join(", ")))
}

/// Exhaustive `min |sum m_j b_j|` over nonzero `m` in `[-M, M]^K`.
fn lattice_min(b: &[i128], m: i64) -> i128 {
    let k = b.len();
    let mut coeffs = vec![-m; k];
    let mut best = i128::MAX;
    loop {
        if coeffs.iter().any(|&c| c != 0) {
            let s: i128 = coeffs.iter().zip(b).map(|(&c, &x)| c as i128 * x).sum();
            best = best.min(s.abs());
        }
        let mut i = 0;
        loop {
            if i == k {
                return best;
            }
            if coeffs[i] < m {
                coeffs[i] += 1;
                break;
            }
            coeffs[i] = -m;
            i += 1;
        }
    }
}

fn delta_soundness() -> Outcome {
    let (mut systems, mut certified, mut unsound) = (0, 0, 0);
    for r in ["3/2", "2", "3", "7"] {
        let rat = lacuna_core::sequences::parse_rational(r).unwrap();
        let seq = geometric_sequence(&rat, 40).unwrap();
        for step in 1..=6usize {
            for offset in 0..2usize {
                for k in 1..=5usize {
                    let idx: Vec<usize> = (0..k).map(|j| offset + step * j).collect();
                    if idx.last().unwrap() >= &seq.len() {
                        continue;
                    }
                    let terms: Vec<BigUint> = idx.iter().map(|&i| seq.terms()[i].clone()).collect();
                    let ints: Vec<i128> = terms.iter().map(|t| t.to_i128().unwrap()).collect();
                    for m in 1..=6u64 {
                        systems += 1;
                        if let Ok(d) = delta_lower_bound(&terms, m) {
                            certified += 1;
                            let true_min = lattice_min(&ints, m as i64);
                            if !(d.to_rational() <= BigRational::from_integer(true_min.into()) && true_min > 0 && d.to_rational().is_positive()) {
                                unsound += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Outcome::new(
        unsound == 0 && certified > 0,
        format!("{systems} systems, {certified} certified, {unsound} with bound above the enumerated minimum or nonpositive"),
    )
}

fn nested_chain() -> Outcome {
    let seq = LacunarySequence::powers(3, 2 * 4usize.pow(5)).unwrap();
    match build_nested_alpha(&seq, 3, 5) {
        Ok(chain) => {
            let mut pass = true;
            let mut parts = Vec::new();
            for b in &chain.blocks {
                let terms = &seq.terms()[b.range.0 - 1..b.range.1];
                let (xs, e) = oracle_dilates(&chain.alpha_final, terms, Some(3));
                let g = ratio_f64(&oracle_max_gap(xs, e), e);
                let bound = 3.0 * chain.l as f64 * (b.n_k as f64).ln() / b.n_k as f64;
                pass &= g <= bound;
                parts.push(format!("k={} G={g:.5} bound={bound:.5}", b.k));
            }
            Outcome::new(pass, parts.join(", "))
        }
        Err(e) => Outcome::new(false, format!("build failed: {e}")),
    }
}

const SCAN_SEED: u64 = 2024;

fn lebesgue_scan_table() -> ScanTable {
    let seq = LacunarySequence::powers(2, 1 << 16).unwrap();
    let n_list: Vec<u64> = (10..=16).map(|k| 1u64 << k).collect();
    random_scan(seq.terms(), Measure::Lebesgue, SCAN_SEED, 100, &n_list, SCAN_EPSILON).unwrap()
}

fn lebesgue_scan() -> Outcome {
    let table = lebesgue_scan_table();
    let sums = table.summaries();
    let p95: Vec<f64> = sums.iter().map(|(_, _, b)| b.p95).collect();
    let last3 = &p95[p95.len() - 3..];
    let a = last3.windows(2).all(|w| w[1] <= w[0]);
    let medians: Vec<f64> = sums.iter().map(|(_, a, _)| a.median).collect();
    let b = medians.iter().all(|m| (0.5..=5.0).contains(m));
    let fit = exponent_fit(&table);
    let kappa = fit.as_ref().map(|f| f.median).unwrap_or(f64::NAN);
    let c = kappa <= 2.2;
    let detail = format!(
        "(a) p95 N G/(ln N)^2.1 at 2^14..2^16 = [{}] {}; (b) median N G/ln N in [{:.3}, {:.3}] {}; (c) median kappa = {kappa:.3} {}",
        last3.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "),
        if a { "ok" } else { "increases" },
        medians.iter().cloned().fold(f64::INFINITY, f64::min),
        medians.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        if b { "ok" } else { "outside [0.5, 5]" },
        if c { "ok" } else { "above 2.2" },
    );
    let mut out = Outcome::new(a && b && c, detail);
    out.artifacts.push(("scan.csv".into(), table.to_csv()));
    out.artifacts.push(("scan_summary.json".into(), serde_json::to_string_pretty(&table.summary_json()).unwrap()));
    out
}

fn iid() -> Outcome {
    let s = iid_baseline(100_000, 200, 7).unwrap();
    let mut out = Outcome::new(
        (0.8..=1.2).contains(&s.mean),
        format!("mean N G / ln N = {:.4} (median {:.4}, p95 {:.4})", s.mean, s.median, s.p95),
    );
    out.artifacts.push(("iid.json".into(), serde_json::to_string(&s.to_json()).unwrap()));
    out
}

fn poisson() -> Outcome {
    let params = MetricParameters::new(4096, 0.05).unwrap();
    let bump = BumpFunction::get();
    let seq = LacunarySequence::powers(3, 4096).unwrap();
    let th = thin(&seq, 4096, params.thinning_exponent()).unwrap();
    let bits = required_bits(th.terms.last().unwrap());
    let k_max = default_k_max(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let mut populated = 0;
    let mut rows = String::from("pair,direct,fourier\n");
    for i in 0..100u64 {
        let alpha = sample_alpha(Measure::Lebesgue, 11, i, bits).unwrap();
        // Half of the windows are centered on a dilate so they are not empty.
        let t = if i % 2 == 0 {
            frac(&(&alpha * &DyadicReal::from_biguint(&th.terms[rng.gen_range(0..th.k)])))
        } else {
            TorusPoint::new(DyadicReal::from_parts(rng.gen::<u64>(), -64)).unwrap()
        };
        let d = smooth_count_direct(&alpha, &th.terms, &t, &params, bump).unwrap();
        let f = smooth_count_fourier(&alpha, &th.terms, &t, &params, bump, k_max).unwrap();
        if d > 0.0 {
            populated += 1;
        }
        worst = worst.max((d - f).abs());
        writeln!(rows, "{i},{d:e},{f:e}").unwrap();
    }
    let mut out = Outcome::new(worst <= 1e-6, format!("max |direct - fourier| = {worst:.3e} over 100 pairs ({populated} nonempty windows), K_max = {k_max}"));
    out.artifacts.push(("poisson.csv".into(), rows));
    out
}

fn moment() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let seq = LacunarySequence::powers(3, 4096).unwrap();
    for n in [256u64, 1024, 4096] {
        let params = MetricParameters::new(n, 0.05).unwrap();
        let th = thin(&seq, n, params.thinning_exponent()).unwrap();
        for t in ["0", "1/3", "0.77"] {
            let tp = TorusPoint::new(RealSpec::parse(t).unwrap().approx(128)).unwrap();
            match exp_moment_check(&th, &tp, &params, BumpFunction::get(), 4096) {
                Ok(c) => {
                    pass &= c.pass;
                    parts.push(format!("N={n} t={t}: {:.4}+{:.1e} vs {:.4}", c.lhs, c.error_bound, c.rhs));
                }
                Err(e) => {
                    pass = false;
                    parts.push(format!("N={n} t={t}: {}", e.code()));
                }
            }
        }
    }
    Outcome::new(pass, format!("lhs+err vs 1.1 exp(Q/50R): {}", parts.join("; ")))
}

fn cf_suite() -> Outcome {
    let golden = cf::expand(&RealSpec::parse("golden").unwrap(), 100).unwrap();
    let (mut f0, mut f1) = (BigUint::one(), BigUint::one());
    let mut fib_ok = true;
    for k in 0..=50 {
        // q_k = F_{k+1}, p_k = F_{k+2}.
        fib_ok &= golden.q[k] == f0 && golden.p[k] == BigInt::from(f1.clone());
        let next = &f0 + &f1;
        f0 = std::mem::replace(&mut f1, next);
    }
    let lam_phi = cf::lambda_estimate(&golden).unwrap().to_f64();
    let ln_phi = ((1.0 + 5f64.sqrt()) / 2.0).ln();
    let phi_ok = (lam_phi - ln_phi).abs() <= 0.01;

    let levy = std::f64::consts::PI.powi(2) / (12.0 * 2f64.ln());
    let mut lambdas = Vec::new();
    let mut rates = Vec::new();
    for i in 0..50u64 {
        let x = sample_alpha(Measure::Lebesgue, 9, i, 48_000).unwrap();
        let e = cf::expand_dyadic(&x, 10_000).unwrap();
        lambdas.push(cf::lambda_estimate(&e).unwrap().to_f64());
        rates.push(cf::growth_rate(&e).unwrap());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[24] + v[25]) / 2.0
    };
    let lam_med = median(&mut lambdas);
    let rate_med = median(&mut rates);
    let random_ok = (lam_med - levy).abs() <= 0.05;
    Outcome::new(
        fib_ok && phi_ok && random_ok,
        format!(
            "Fibonacci continuants to depth 50 {}; Lambda(phi) = {lam_phi:.5} vs ln phi = {ln_phi:.5} {}; median sup_k ln q_k / k over 50 random alpha at depth 10^4 = {lam_med:.4} vs {levy:.5} {} (diagnostic: median ln q_K / K = {rate_med:.4})",
            if fib_ok { "exact" } else { "MISMATCH" },
            if phi_ok { "ok" } else { "off" },
            if random_ok { "ok" } else { "off by more than 0.05" },
        ),
    )
}

/// `(beta, (p, d, q) with beta = (p + sqrt d) / q, zeta, terms)`.
type CzCase = (&'static str, (i64, u64, i64), &'static str, usize);

fn cz_postconditions() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut artifacts = Vec::new();
    let cases: [CzCase; 2] = [("sqrt:2", (0, 2, 1), "0", 20), ("golden", (1, 5, 2), "1/2", 10)];
    for (name, (p, d, q), zeta, n) in cases {
        let beta = RealSpec::parse(name).unwrap();
        let z = lacuna_core::sequences::parse_rational(zeta).unwrap();
        let zd = DyadicReal::from_rational(&z, 64, lacuna_core::numerics::Rounding::NearestEven);
        match littlewood::cz_build(&beta, &zd, n) {
            Ok(seq) => {
                let lib_fail = littlewood::verify_cz(&seq).unwrap();
                let mut oracle_fail = 0;
                let mut prev: Option<BigUint> = None;
                let mut worst = 0.0f64;
                for t in &seq.terms {
                    let w = 2 * t.a.bits() + 64;
                    let prod = quad_distance(p, d, q, &t.a, &z, w) * ratio_f64(&t.a, 0);
                    worst = worst.max(prod);
                    let lower = t.a > BigUint::from(8u32).pow(t.n as u32);
                    let growth = prev.as_ref().is_none_or(|a| t.a >= a * 8u32);
                    if prod > 8.0 || !lower || !growth {
                        oracle_fail += 1;
                    }
                    prev = Some(t.a.clone());
                }
                let ok = seq.terms.len() == n && lib_fail.is_empty() && oracle_fail == 0;
                pass &= ok;
                parts.push(format!(
                    "{name}, zeta={zeta}: {} terms, max product {worst:.4}, {} recheck failures, {oracle_fail} oracle failures",
                    seq.terms.len(),
                    lib_fail.len()
                ));
                artifacts.push((format!("cz_{}.csv", parts.len()), littlewood::cz_csv(&seq)));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name}, zeta={zeta}: {e}"));
            }
        }
    }
    let mut out = Outcome::new(pass, parts.join("; "));
    out.artifacts = artifacts;
    out
}

fn littlewood_demo() -> Outcome {
    let theta = RealSpec::parse("qi:-1,5,2").unwrap();
    let zero = DyadicReal::zero();
    match littlewood::littlewood_scan(&theta, &theta, &zero, &zero, 0.1, &ScanMode::Brute(100_000)) {
        Ok(rep) => {
            let confirmed = rep.solutions.iter().filter(|s| {
                let thr = littlewood_threshold(&s.n, 0.1).unwrap_or(f64::INFINITY);
                let dist = quad_distance(-1, 5, 2, &s.n, &BigRational::zero(), 128);
                let exact = ratio_f64(&s.n, 0) * dist * dist;
                s.product_doubled.to_f64() <= thr && (exact - s.product.to_f64()).abs() <= 1e-12 * exact.max(1e-300) + 1e-30 && exact <= thr
            });
            let confirmed = confirmed.count();
            let mut out = Outcome::new(
                confirmed >= 20 && confirmed == rep.solutions.len(),
                format!(
                    "{} solutions with n <= 10^5 ({confirmed} confirmed by the integer square-root oracle), {} flipped at doubled precision",
                    rep.solutions.len(),
                    rep.flipped
                ),
            );
            out.artifacts.push(("littlewood.csv".into(), rep.solutions_csv()));
            out
        }
        Err(e) => Outcome::new(false, format!("scan failed: {e}")),
    }
}

type Check = (&'static str, &'static str, Option<f64>, fn() -> Outcome);

const CHECKS: [Check; 11] = [
    ("1", "gap oracle equivalence", Some(10.0), gap_oracle),
    ("2", "find-alpha at desk scale", Some(60.0), find_alpha_scale),
    ("3", "delta certificate soundness", None, delta_soundness),
    ("4", "nested chain r=3, k=3..5", Some(120.0), nested_chain),
    ("5", "Lebesgue dispersion scan", None, lebesgue_scan),
    ("6", "i.i.d. baseline", Some(30.0), iid),
    ("7", "Poisson summation", None, poisson),
    ("8", "exponential moment", Some(300.0), moment),
    ("9", "continued fractions", None, cf_suite),
    ("10", "CZ postconditions", None, cz_postconditions),
    ("11", "Littlewood brute force", Some(60.0), littlewood_demo),
];

fn main() {
    let mut failed = Vec::new();
    let mut first_run: Vec<(String, String)> = Vec::new();
    let mut rerun_fns: Vec<fn() -> Outcome> = Vec::new();
    for (id, name, limit, f) in CHECKS {
        let start = Instant::now();
        let out = f();
        let took = secs(start.elapsed());
        let in_time = limit.is_none_or(|l| took <= l);
        let pass = out.pass && in_time;
        let timing = match limit {
            Some(l) => format!("{took:.2}s, limit {l:.0}s"),
            None => format!("{took:.2}s"),
        };
        println!("[{}] {id:>2} {name}: {} ({timing})", if pass { "PASS" } else { "FAIL" }, out.detail);
        if !pass {
            failed.push(id);
        }
        if !out.artifacts.is_empty() {
            rerun_fns.push(f);
            first_run.extend(out.artifacts);
        }
    }

    let start = Instant::now();
    let dir = tempfile::tempdir().expect("temporary directory");
    let write_all = |sub: &str, files: &[(String, String)]| -> Vec<Vec<u8>> {
        let d = dir.path().join(sub);
        fs::create_dir_all(&d).unwrap();
        files
            .iter()
            .map(|(name, text)| {
                let p = d.join(name);
                fs::write(&p, text).unwrap();
                fs::read(&p).unwrap()
            })
            .collect()
    };
    let second: Vec<(String, String)> = rerun_fns.iter().flat_map(|f| f().artifacts).collect();
    let a = write_all("first", &first_run);
    let b = write_all("second", &second);
    let names: Vec<&String> = first_run.iter().map(|(n, _)| n).collect();
    let same_names = names == second.iter().map(|(n, _)| n).collect::<Vec<_>>();
    let differing: Vec<&String> = names.iter().zip(a.iter().zip(&b)).filter(|(_, (x, y))| x != y).map(|(n, _)| *n).collect();
    let pass = same_names && differing.is_empty() && !a.is_empty();
    println!(
        "[{}] 12 reproducibility: {} data files rewritten from a second run, {} differ ({:.2}s)",
        if pass { "PASS" } else { "FAIL" },
        a.len(),
        differing.len(),
        secs(start.elapsed())
    );
    if !pass {
        failed.push("12");
    }

    println!("acceptance: {} of 12 criteria pass{}", 12 - failed.len(), if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) });
    if !failed.is_empty() && std::env::var("LACUNA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
