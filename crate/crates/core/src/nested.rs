//! One dilation factor for many dyadic blocks at once, built from nested
//! intervals: each block's search runs inside the stability interval of the
//! previous block's solution.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::numerics::{dilate_max_gap, DoubleDouble, DyadicReal, Precision, Rounding};
use crate::sequences::{smallest_l, LacunarySequence};
use crate::turan::{find_dilation_block, find_dilation_prefix, gap_target};

/// Fractional bits used for interval endpoints beyond `bitlen(a)`.
const GUARD_BITS: u64 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct NestedBlock {
    pub k: u32,
    pub n_k: u64,
    /// 1-based index range of the block.
    pub range: (usize, usize),
    pub alpha_k: DyadicReal,
    /// Stability radius `ln N_k / (N_k * a_max)` with `a_max` the block's largest term.
    pub tau_k: DyadicReal,
    pub tilde_interval: (DyadicReal, DyadicReal),
    /// Search interval handed to the next block (length `4 / a_{N_{k+1}}`).
    pub next_interval: Option<(DyadicReal, DyadicReal)>,
    /// Maximal gap of the block under `alpha_k`.
    pub own_gap: DyadicReal,
    /// Maximal gap of the block under the final alpha.
    pub verified_gap: DyadicReal,
    /// `3 l ln N_k / N_k`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestedChain {
    pub k_start: u32,
    pub k_end: u32,
    pub l: u64,
    pub blocks: Vec<NestedBlock>,
    pub alpha_final: DyadicReal,
}

impl NestedChain {
    /// True when every block's recomputed gap under the final alpha meets `3 l ln N_k / N_k`.
    pub fn all_blocks_within_bound(&self) -> bool {
        self.blocks.iter().all(|b| b.verified_gap.to_f64() <= b.bound)
    }

    pub fn to_json(&self) -> Value {
        let pair = |p: &(DyadicReal, DyadicReal)| json!([p.0.to_hex(), p.1.to_hex()]);
        json!({
            "k_start": self.k_start,
            "k_end": self.k_end,
            "l": self.l,
            "alpha_final": crate::turan::dyadic_json(&self.alpha_final, 40),
            "all_blocks_within_bound": self.all_blocks_within_bound(),
            "blocks": self.blocks.iter().map(|b| json!({
                "k": b.k,
                "N_k": b.n_k,
                "range": [b.range.0, b.range.1],
                "alpha_k": b.alpha_k.to_hex(),
                "tau_k": b.tau_k.to_decimal(30),
                "tilde_interval": pair(&b.tilde_interval),
                "next_interval": b.next_interval.as_ref().map(pair),
                "own_gap": b.own_gap.to_decimal(30),
                "verified_gap": b.verified_gap.to_decimal(30),
                "bound": b.bound,
            })).collect::<Vec<_>>(),
        })
    }
}

/// `ln N / (N a)` rounded down, so the interval it spans is conservative.
fn stability_radius(n: u64, a: &BigUint) -> DyadicReal {
    let bits = a.bits() + GUARD_BITS;
    let ln_n = DoubleDouble::from_u64(n).ln();
    // ln N rounded down to 100 bits, then divided by N a exactly-rounded.
    let num = ln_n.to_dyadic().round_to_mode(100, Rounding::Floor);
    let den = BigInt::from(a.clone()) * BigInt::from(n);
    num.div_int(&den, bits, Rounding::Floor).with_precision(Precision::Exact)
}

fn intersect(a: &(DyadicReal, DyadicReal), b: &(DyadicReal, DyadicReal)) -> (DyadicReal, DyadicReal) {
    (a.0.clone().max(b.0.clone()), a.1.clone().min(b.1.clone()))
}

/// Builds the chain over blocks `k_start..=k_end` with `N_k = 4^k`.
pub fn build_nested_alpha(seq: &LacunarySequence, k_start: u32, k_end: u32) -> Result<NestedChain> {
    if k_start == 0 || k_end < k_start {
        return Err(Error::InvalidInput(format!("need 1 <= k_start <= k_end, got {k_start}..{k_end}")));
    }
    let l = smallest_l(seq.r());
    let n_start = 4u64.pow(k_start);
    if gap_target(l, n_start) >= 1.0 {
        return Err(Error::NBelowThreshold(format!(
            "N_k = {n_start}: target 3 l ln N / N = {:.3} is not below the trivial bound 1",
            gap_target(l, n_start)
        )));
    }
    let need = 2 * 4usize.pow(k_end);
    if seq.len() < need {
        return Err(Error::InvalidInput(format!("chain needs {need} terms, sequence has {}", seq.len())));
    }

    let mut blocks: Vec<NestedBlock> = Vec::new();
    let mut tilde: (DyadicReal, DyadicReal) = (DyadicReal::zero(), DyadicReal::one());
    for k in k_start..=k_end {
        let n_k = 4u64.pow(k);
        let n_us = n_k as usize;
        let (cert, range) = if k == k_start {
            (find_dilation_prefix(seq, n_k, None)?, (1, n_us))
        } else {
            let prev = blocks.last_mut().expect("previous block");
            let a = seq.term(n_us);
            let width = DyadicReal::from_ratio(&BigInt::from(4), &BigInt::from(a.clone()), a.bits() + GUARD_BITS, Rounding::Ceil)?
                .with_precision(Precision::Exact);
            let tilde_len = &tilde.1 - &tilde.0;
            if width.mul_pow2(1) > tilde_len {
                return Err(Error::NestingViolated { k: k - 1 });
            }
            // Centered placement inside the previous stability interval.
            let mid = DyadicReal::midpoint(&tilde.0, &tilde.1);
            let half = width.mul_pow2(-1);
            let next = (&mid - &half, &mid + &half);
            prev.next_interval = Some(next.clone());
            (find_dilation_block(seq, n_k, (&next.0, &next.1))?, (n_us + 1, 2 * n_us))
        };
        let a_max = seq.term(range.1);
        let tau = stability_radius(n_k, a_max);
        let around = (&cert.alpha - &tau, &cert.alpha + &tau);
        tilde = intersect(&around, &tilde);
        if tilde.0 > tilde.1 {
            return Err(Error::NestingViolated { k });
        }
        blocks.push(NestedBlock {
            k,
            n_k,
            range,
            alpha_k: cert.alpha.clone(),
            tau_k: tau,
            tilde_interval: tilde.clone(),
            next_interval: None,
            own_gap: cert.verified_gap.clone().expect("block searches verify their gap"),
            verified_gap: DyadicReal::zero(),
            bound: gap_target(l, n_k),
        });
    }
    let alpha_final = if k_start == k_end {
        blocks[0].alpha_k.clone()
    } else {
        DyadicReal::midpoint(&tilde.0, &tilde.1)
    };
    for b in &mut blocks {
        b.verified_gap = dilate_max_gap(&alpha_final, &seq.terms()[b.range.0 - 1..b.range.1])?;
    }
    Ok(NestedChain { k_start, k_end, l, blocks, alpha_final })
}

/// Gap bound for the first `N` dilates by `alpha_final`: the recomputed gap of
/// the last block lying inside `1..=N` (a subset, so its gap dominates).
pub fn interpolate_gap_bound(chain: &NestedChain, n: u64) -> Result<DyadicReal> {
    let lo = 2 * 4u64.pow(chain.k_start);
    let hi = 2 * 4u64.pow(chain.k_end);
    if n < lo || n > hi {
        return Err(Error::NOutOfRange { n, lo, hi });
    }
    let block = chain
        .blocks
        .iter()
        .filter(|b| b.range.1 as u64 <= n)
        .max_by(|a, b| a.k.cmp(&b.k))
        .expect("range check guarantees a block");
    Ok(block.verified_gap.clone())
}

/// Exact check that `|alpha' - alpha| <= tau`.
pub fn within_radius(alpha: &DyadicReal, other: &DyadicReal, tau: &DyadicReal) -> bool {
    (alpha - other).abs().cmp(tau) != Ordering::Greater
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dilate, gap_report};

    #[test]
    fn r3_chain_three_blocks() {
        let seq = LacunarySequence::powers(3, 2 * 4usize.pow(5)).unwrap();
        let chain = build_nested_alpha(&seq, 3, 5).unwrap();
        assert_eq!(chain.blocks.len(), 3);
        for b in &chain.blocks {
            // Independent recomputation of each block gap under the final alpha.
            let pts = dilate(&chain.alpha_final, &seq.terms()[b.range.0 - 1..b.range.1]).unwrap();
            let g = gap_report(&pts).unwrap().max_gap;
            assert_eq!(g, b.verified_gap);
            assert!(g.to_f64() <= 3.0 * (b.n_k as f64).ln() / b.n_k as f64, "k = {}", b.k);
            let (lo, hi) = &b.tilde_interval;
            assert!(&chain.alpha_final >= lo && &chain.alpha_final <= hi);
        }
        for w in chain.blocks.windows(2) {
            let (nl, nh) = w[0].next_interval.clone().unwrap();
            let (tl, th) = &w[0].tilde_interval;
            assert!(&nl >= tl && &nh <= th);
            assert!((&nh - &nl).mul_pow2(1) <= th - tl);
        }
        assert!(chain.all_blocks_within_bound());
    }

    #[test]
    fn degenerate_chain_is_single_search() {
        let seq = LacunarySequence::powers(3, 2 * 64).unwrap();
        let chain = build_nested_alpha(&seq, 3, 3).unwrap();
        assert_eq!(chain.blocks.len(), 1);
        assert_eq!(chain.alpha_final, chain.blocks[0].alpha_k);
    }

    #[test]
    fn small_start_rejected() {
        let seq = LacunarySequence::powers(2, 2 * 16).unwrap();
        assert_eq!(build_nested_alpha(&seq, 1, 2).unwrap_err().code(), "N-below-threshold");
    }

    #[test]
    fn interpolation() {
        let seq = LacunarySequence::powers(3, 2 * 4usize.pow(4)).unwrap();
        let chain = build_nested_alpha(&seq, 3, 4).unwrap();
        let exact = interpolate_gap_bound(&chain, 2 * 64).unwrap();
        assert_eq!(exact, chain.blocks[0].verified_gap);
        let n = 3 * 64;
        let bound = interpolate_gap_bound(&chain, n).unwrap();
        let direct = dilate_max_gap(&chain.alpha_final, &seq.terms()[..n as usize]).unwrap();
        assert!(direct <= bound);
        assert_eq!(interpolate_gap_bound(&chain, 127).unwrap_err(), Error::NOutOfRange { n: 127, lo: 128, hi: 512 });
    }

    #[test]
    fn stability_radius_perturbation() {
        let seq = LacunarySequence::powers(3, 2 * 4usize.pow(4)).unwrap();
        let chain = build_nested_alpha(&seq, 4, 4).unwrap();
        let b = &chain.blocks[0];
        for sign in [-1i64, 1] {
            let shifted = &b.alpha_k + &b.tau_k.mul_int(&BigInt::from(sign));
            assert!(within_radius(&b.alpha_k, &shifted, &b.tau_k));
            let g = dilate_max_gap(&shifted, &seq.terms()[..b.range.1]).unwrap();
            assert!(g.to_f64() <= 3.0 * b.bound);
        }
    }
}
