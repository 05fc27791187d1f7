//! Growth-pattern verdicts for truncated nonnegative series.
//!
//! A finite truncation always has a finite sum, so convergence is judged from
//! dyadic block sums `B_j = sum of terms p in [2^j, 2^{j+1})` (1-based `p`).
//! Only complete blocks count, and trailing zero terms are dropped first so
//! that padding a series with zeros never changes its verdict.
//!
//! Over the last `window + 1` blocks:
//! * Convergent if every ratio `B_{j+1} / B_j` is at most `ratio_max`;
//! * Divergent if every one of the last `window` blocks is at least
//!   `floor_factor` times the first retained block;
//! * Inconclusive otherwise, or when fewer than `min_blocks` blocks exist.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn short(self) -> char {
        match self {
            Verdict::Convergent => 'C',
            Verdict::Divergent => 'D',
            Verdict::Inconclusive => 'I',
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Convergent => "Convergent",
            Verdict::Divergent => "Divergent",
            Verdict::Inconclusive => "Inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictPolicy {
    pub ratio_max: f64,
    pub floor_factor: f64,
    pub window: usize,
    pub min_blocks: usize,
}

impl Default for VerdictPolicy {
    fn default() -> Self {
        Self { ratio_max: 0.8, floor_factor: 0.5, window: 4, min_blocks: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub verdict: Verdict,
    pub note: String,
}

/// Number of leading terms once trailing zeros are removed.
pub fn effective_len(terms: &[f64]) -> usize {
    terms.iter().rposition(|&t| t != 0.0).map_or(0, |p| p + 1)
}

/// Complete dyadic blocks `[2^j, 2^{j+1})` over 1-based term positions.
pub fn dyadic_blocks(terms: &[f64]) -> Vec<f64> {
    let len = effective_len(terms);
    let mut blocks = Vec::new();
    let mut j = 0u32;
    loop {
        let lo = (1usize << j) - 1;
        let hi = (1usize << (j + 1)) - 1;
        if hi > len {
            break;
        }
        blocks.push(crate::sum::sum(&terms[lo..hi]));
        j += 1;
    }
    blocks
}

/// Apply the policy to precomputed block values.
pub fn judge_blocks(blocks: &[f64], policy: &VerdictPolicy) -> Judgement {
    if blocks.iter().all(|&b| b == 0.0) {
        return Judgement { verdict: Verdict::Convergent, note: "no nonzero blocks".into() };
    }
    let need = policy.min_blocks.max(policy.window + 1);
    if blocks.len() < need {
        return Judgement {
            verdict: Verdict::Inconclusive,
            note: format!("only {} complete dyadic blocks; the policy needs at least {need}", blocks.len()),
        };
    }
    let last = &blocks[blocks.len() - policy.window - 1..];
    if last.windows(2).all(|w| w[1] <= policy.ratio_max * w[0]) {
        return Judgement {
            verdict: Verdict::Convergent,
            note: format!("last {} block ratios all <= {}", policy.window, policy.ratio_max),
        };
    }
    let floor = policy.floor_factor * last[0];
    if last[1..].iter().all(|&b| b >= floor) {
        return Judgement {
            verdict: Verdict::Divergent,
            note: format!("last {} blocks all >= {} x first retained block", policy.window, policy.floor_factor),
        };
    }
    Judgement {
        verdict: Verdict::Inconclusive,
        note: "blocks neither decay geometrically nor stay bounded below".into(),
    }
}

/// Verdict for a series of nonnegative terms.
pub fn judge_terms(terms: &[f64], policy: &VerdictPolicy) -> Judgement {
    if effective_len(terms) == 0 {
        return Judgement { verdict: Verdict::Convergent, note: "all terms are zero".into() };
    }
    judge_blocks(&dyadic_blocks(terms), policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> VerdictPolicy {
        VerdictPolicy::default()
    }

    #[test]
    fn block_boundaries() {
        let t: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        // [1], [2,3], [4..7]; 8..10 incomplete
        assert_eq!(dyadic_blocks(&t), vec![1.0, 5.0, 22.0]);
    }

    #[test]
    fn harmonic_is_divergent() {
        let t: Vec<f64> = (1..=1 << 16).map(|k| 1.0 / k as f64).collect();
        let b = dyadic_blocks(&t);
        assert_eq!(b.len(), 16);
        for x in &b[4..] {
            assert!((x - std::f64::consts::LN_2).abs() < 0.05);
        }
        assert_eq!(judge_terms(&t, &p()).verdict, Verdict::Divergent);
    }

    #[test]
    fn geometric_is_convergent() {
        let t: Vec<f64> = (1..=64).map(|k| 0.5f64.powi(k) / (k as f64).sqrt()).collect();
        assert_eq!(judge_terms(&t, &p()).verdict, Verdict::Convergent);
    }

    #[test]
    fn zeros_and_short_series() {
        assert_eq!(judge_terms(&[0.0; 100], &p()).verdict, Verdict::Convergent);
        assert_eq!(judge_terms(&[], &p()).verdict, Verdict::Convergent);
        let j = judge_terms(&[1.0, 1.0, 1.0], &p());
        assert_eq!(j.verdict, Verdict::Inconclusive);
        assert!(j.note.contains("only 2"));
    }

    #[test]
    fn oscillating_blocks_are_inconclusive() {
        let blocks = [1.0, 1.0, 1.0, 1.0, 0.01, 1.0];
        assert_eq!(judge_blocks(&blocks, &p()).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn appending_zeros_keeps_verdict() {
        let mut t: Vec<f64> = (1..=100).map(|k| 1.0 / k as f64).collect();
        let before = judge_terms(&t, &p());
        t.extend(std::iter::repeat_n(0.0, 5000));
        assert_eq!(judge_terms(&t, &p()), before);
    }
}
