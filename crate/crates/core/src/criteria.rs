//! Direct evaluation of the four criteria on a built model.
//!
//! C1 and C2 are L1 conditions: their Cauchy blocks
//! `||sum_{i in block} ...||_1` are estimated by Monte Carlo. C3 and C4 are
//! L2 conditions and come from the exact engines in `projector`. Blocks are
//! dyadic in the 1-based term position `p`: `[2^j, 2^{j+1})`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_trial_chunks, Execution, StreamSeed};
use crate::projector::{cond_exp_at, cond_exp_f, cond_exp_f_unchecked, exact_esn_norms, exact_p0_norm, FiltrationTime};
use crate::series::{ClassificationTable, CriterionId, LinearFamily};
use crate::stats::{l2_norm_estimate, EstimateWithError, Moments};
use crate::sum::CompensatedSum;
use crate::system::{sample_state, SystemModel};
use crate::verdict::{judge_blocks, judge_terms, Judgement, Verdict, VerdictPolicy};

pub const MIN_TRIALS: usize = 1000;
pub const DEFAULT_TRIALS: usize = 100_000;

/// Seed, trial count and execution mode for one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarlo {
    pub stream: StreamSeed,
    pub trials: usize,
    pub exec: Execution,
}

impl MonteCarlo {
    pub fn new(stream: StreamSeed, trials: usize, exec: Execution) -> Result<Self> {
        if trials < MIN_TRIALS {
            return Err(Error::Precondition(format!("at least {MIN_TRIALS} trials required, got {trials}")));
        }
        Ok(Self { stream, trials, exec })
    }

    fn with_stream(self, stream: StreamSeed) -> Self {
        Self { stream, ..self }
    }

    /// Moments of `|Y|` where `Y` is drawn once per trial by `draw`.
    fn l1_estimate<F>(&self, draw: F) -> EstimateWithError
    where
        F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync + Send,
    {
        let parts = map_trial_chunks(self.exec, self.stream, self.trials, |rng, range| {
            let mut m = Moments::default();
            for _ in range {
                m.push(draw(rng).abs());
            }
            m
        });
        Moments::merge_all(parts).mean_estimate()
    }

    /// `sqrt(E[Y^2])` for a fallible per-trial draw.
    fn l2_estimate<F>(&self, draw: F) -> Result<EstimateWithError>
    where
        F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<f64> + Sync + Send,
    {
        let parts = map_trial_chunks(self.exec, self.stream, self.trials, |rng, range| {
            let mut m = Moments::default();
            for _ in range {
                let y = draw(rng)?;
                m.push(y * y);
            }
            Ok(m)
        });
        let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(l2_norm_estimate(&Moments::merge_all(parts)))
    }
}

fn check_range(lo: u64, hi: u64, first: u64) -> Result<()> {
    if lo < first || hi < lo {
        return Err(Error::Precondition(format!("block range [{lo}, {hi}] must satisfy {first} <= m <= n")));
    }
    Ok(())
}

/// `||sum_{i=m}^{n} E(f o T^i | F_0)||_1`.
pub fn gordin_block(model: &SystemModel, mc: &MonteCarlo, m: u64, n: u64) -> Result<EstimateWithError> {
    check_range(m, n, 0)?;
    // E(f o T^i | F_0) vanishes once i exceeds every delay.
    let top = n.min(*model.delays().last().expect("K >= 1"));
    Ok(mc.l1_estimate(|rng| {
        let s = sample_state(model, rng);
        let mut acc = 0.0;
        for i in m..=top {
            acc += cond_exp_f_unchecked(model, &s, i as i64);
        }
        acc
    }))
}

/// `||sum_{j=m}^{n} f E(f o T^j | F_0)||_1`.
pub fn dedecker_rio_block(model: &SystemModel, mc: &MonteCarlo, m: u64, n: u64) -> Result<EstimateWithError> {
    check_range(m, n, 1)?;
    let top = n.min(*model.delays().last().expect("K >= 1"));
    Ok(mc.l1_estimate(|rng| {
        let s = sample_state(model, rng);
        let f0 = cond_exp_f_unchecked(model, &s, 0);
        if f0 == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for j in m..=top {
            acc += cond_exp_f_unchecked(model, &s, j as i64);
        }
        f0 * acc
    }))
}

/// Monte-Carlo `||E(S_n | F_0)||_2` with `S_n = sum_{i<n} f o T^i`, summing
/// the checked conditional expectations trial by trial.
pub fn esn_l2_estimate(model: &SystemModel, mc: &MonteCarlo, n: u64) -> Result<EstimateWithError> {
    if n == 0 {
        return Err(Error::Precondition("n must be >= 1".into()));
    }
    mc.l2_estimate(|rng| {
        let s = sample_state(model, rng);
        let mut acc = 0.0;
        for i in 0..n as i64 {
            acc += cond_exp_f(model, &s, i)?;
        }
        Ok(acc)
    })
}

/// Monte-Carlo `||P_0(f o T^i)||_2`, with the projection taken as the
/// difference `E(. | F_0) - E(. | F_{-1})`.
pub fn p0_l2_estimate(model: &SystemModel, mc: &MonteCarlo, i: i64) -> Result<EstimateWithError> {
    mc.l2_estimate(|rng| {
        let s = sample_state(model, rng);
        Ok(cond_exp_at(model, &s, i, FiltrationTime(0))? - cond_exp_at(model, &s, i, FiltrationTime(-1))?)
    })
}

/// One point of a criterion curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    /// First and last 1-based term position covered by this entry.
    pub start: u64,
    pub end: u64,
    pub estimate: EstimateWithError,
    /// Running total of the entries so far.
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: CriterionId,
    pub label: String,
    pub entries: Vec<CurveEntry>,
    pub dyadic_blocks: Vec<f64>,
    pub verdict: Verdict,
    pub note: String,
}

impl CriterionReport {
    /// Build a report, enforcing that L2 criteria carry exact entries and
    /// L1 criteria carry Monte-Carlo entries.
    pub fn new(
        criterion: CriterionId,
        label: impl Into<String>,
        entries: Vec<CurveEntry>,
        dyadic_blocks: Vec<f64>,
        judgement: Judgement,
    ) -> Result<Self> {
        let want_exact = matches!(criterion, CriterionId::C3 | CriterionId::C4 | CriterionId::L2);
        if let Some(bad) = entries.iter().find(|e| e.estimate.is_exact() != want_exact) {
            return Err(Error::InvariantViolated(format!(
                "{criterion} entry [{}, {}] must be {}",
                bad.start,
                bad.end,
                if want_exact { "exact" } else { "a Monte-Carlo estimate" }
            )));
        }
        Ok(Self {
            criterion,
            label: label.into(),
            entries,
            dyadic_blocks,
            verdict: judgement.verdict,
            note: judgement.note,
        })
    }
}

fn accumulate(blocks: Vec<(u64, u64, EstimateWithError)>) -> Vec<CurveEntry> {
    let mut acc = CompensatedSum::new();
    blocks
        .into_iter()
        .map(|(start, end, estimate)| {
            acc.add(estimate.value);
            CurveEntry { start, end, estimate, cumulative: acc.value() }
        })
        .collect()
}

/// Complete dyadic blocks `[2^j, 2^{j+1})` of positions within `1..=p_max`.
pub fn dyadic_ranges(p_max: u64) -> Vec<(u64, u64)> {
    (0..63).map(|j| (1u64 << j, (1u64 << (j + 1)) - 1)).take_while(|&(_, hi)| hi <= p_max).collect()
}

fn mc_curve<F>(
    criterion: CriterionId,
    label: String,
    mc: &MonteCarlo,
    ranges: Vec<(u64, u64)>,
    policy: &VerdictPolicy,
    block: F,
) -> Result<CriterionReport>
where
    F: Fn(&MonteCarlo, u64, u64) -> Result<EstimateWithError>,
{
    let mut out = Vec::with_capacity(ranges.len());
    for (j, (lo, hi)) in ranges.into_iter().enumerate() {
        let est = block(&mc.with_stream(mc.stream.derive(j as u64)), lo, hi)?;
        out.push((lo, hi, est));
    }
    let blocks: Vec<f64> = out.iter().map(|b| b.2.value).collect();
    let judgement = judge_blocks(&blocks, policy);
    CriterionReport::new(criterion, label, accumulate(out), blocks, judgement)
}

/// C1 Cauchy blocks over positions `p = i + 1 <= min(p_max, N_K + 1)`.
pub fn gordin_curve(
    model: &SystemModel,
    mc: &MonteCarlo,
    p_max: u64,
    policy: &VerdictPolicy,
) -> Result<CriterionReport> {
    let cap = p_max.min(model.delays().last().expect("K >= 1") + 1);
    mc_curve(CriterionId::C1, model.family().label().into(), mc, dyadic_ranges(cap), policy, |mc, lo, hi| {
        gordin_block(model, mc, lo - 1, hi - 1)
    })
}

/// C2 Cauchy blocks over positions `p = j <= min(p_max, N_K)`.
pub fn dedecker_rio_curve(
    model: &SystemModel,
    mc: &MonteCarlo,
    p_max: u64,
    policy: &VerdictPolicy,
) -> Result<CriterionReport> {
    let cap = p_max.min(*model.delays().last().expect("K >= 1"));
    mc_curve(CriterionId::C2, model.family().label().into(), mc, dyadic_ranges(cap), policy, |mc, lo, hi| {
        dedecker_rio_block(model, mc, lo, hi)
    })
}

/// Exact partial sums of `n^{-3/2} ||E(S_n | F_0)||_2`, reported at powers of
/// two and at `n_max`.
pub fn maxwell_woodroofe_partial(
    model: &SystemModel,
    n_max: u64,
    policy: &VerdictPolicy,
    exec: Execution,
) -> Result<CriterionReport> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be >= 1".into()));
    }
    let norms = exact_esn_norms(model, n_max, exec);
    let terms: Vec<f64> = norms.iter().enumerate().map(|(i, v)| v * ((i + 1) as f64).powf(-1.5)).collect();
    let mut acc = CompensatedSum::new();
    let mut entries = Vec::new();
    let mut start = 1;
    for (i, &t) in terms.iter().enumerate() {
        acc.add(t);
        let n = i as u64 + 1;
        if n.is_power_of_two() || n == n_max {
            entries.push(CurveEntry { start, end: n, estimate: EstimateWithError::exact(t), cumulative: acc.value() });
            start = n + 1;
        }
    }
    let judgement = judge_terms(&terms, policy);
    CriterionReport::new(
        CriterionId::C3,
        model.family().label(),
        entries,
        crate::verdict::dyadic_blocks(&terms),
        judgement,
    )
}

/// Exact partial sums `sum_{|i| <= I} ||P_0(f o T^i)||_2`, with one entry per
/// nonzero term (`i = N_k <= i_max`). The verdict reads the nonzero terms in
/// order of `i`.
pub fn hannan_partial(model: &SystemModel, i_max: u64, policy: &VerdictPolicy) -> Result<CriterionReport> {
    if i_max < model.delay(1) {
        let j = judge_terms(&[], policy);
        return CriterionReport::new(CriterionId::C4, model.family().label(), Vec::new(), Vec::new(), j);
    }
    let mut acc = CompensatedSum::new();
    let mut entries = Vec::new();
    let mut terms = Vec::new();
    for &n in model.delays().iter().filter(|&&n| n <= i_max) {
        let v = exact_p0_norm(model, n as i64);
        acc.add(v);
        terms.push(v);
        entries.push(CurveEntry { start: n, end: n, estimate: EstimateWithError::exact(v), cumulative: acc.value() });
    }
    let judgement = judge_terms(&terms, policy);
    CriterionReport::new(
        CriterionId::C4,
        model.family().label(),
        entries,
        crate::verdict::dyadic_blocks(&terms),
        judgement,
    )
}

impl CriterionReport {
    pub fn total(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.cumulative)
    }
}

/// `E(f o T^i | F_0)` summed over `i in [lo, hi]` for the linear process is
/// `sum_{l <= 0} b_l xi_l` with `b_l = sum_{i=lo}^{hi} a_{i-l}`.
fn linear_block_weights(lin: &LinearFamily, lo: u64, hi: u64) -> Vec<f64> {
    let k = lin.coeffs.len() as i64;
    // prefix[x] = a_1 + ... + a_x
    let mut prefix = Vec::with_capacity(lin.coeffs.len() + 1);
    let mut acc = CompensatedSum::new();
    prefix.push(0.0);
    for &a in &lin.coeffs {
        acc.add(a);
        prefix.push(acc.value());
    }
    let cum = |x: i64| prefix[x.clamp(0, k) as usize];
    let first_l = lo as i64 - k; // a_{i-l} = 0 once i - l > K for every i in the block
    (first_l.min(0)..=0)
        .rev()
        .map(|l| {
            let (top, bottom) = (hi as i64 - l, lo as i64 - 1 - l);
            cum(top) - cum(bottom.max(0))
        })
        .collect()
}

/// Monte-Carlo `||sum_{i=lo}^{hi} E(f o T^i | F_0)||_1` for a linear process.
pub fn linear_gordin_block(lin: &LinearFamily, mc: &MonteCarlo, lo: u64, hi: u64) -> Result<EstimateWithError> {
    check_range(lo, hi, 0)?;
    let weights = linear_block_weights(lin, lo, hi);
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(mc.l1_estimate(|_| 0.0));
    }
    Ok(mc.l1_estimate(|rng| {
        let mut acc = 0.0;
        for chunk in weights.chunks(64) {
            let bits: u64 = rng.random();
            for (b, w) in chunk.iter().enumerate() {
                acc += if bits >> b & 1 == 1 { *w } else { -*w };
            }
        }
        acc
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReport {
    pub label: String,
    pub c4: CriterionReport,
    pub c1: CriterionReport,
}

/// Criteria 4 and 1 for `f = sum_{j>=1} a_j xi_{-j}`: `||P_0(f o T^i)||_2 =
/// |a_i|` exactly, and Monte-Carlo L1 Cauchy blocks of `sum_i E(f o T^i|F_0)`
/// over positions `p = i + 1 <= p_max`.
pub fn linear_process_report(
    lin: &LinearFamily,
    p_max: u64,
    mc: &MonteCarlo,
    policy: &VerdictPolicy,
) -> Result<LinearReport> {
    let finite = |mut j: Judgement| {
        if !lin.truncated {
            j = Judgement { verdict: Verdict::Convergent, note: "finite support: finitely many nonzero terms".into() };
        }
        j
    };
    let terms: Vec<f64> = lin.coeffs.iter().map(|a| a.abs()).collect();
    let mut acc = CompensatedSum::new();
    let entries = terms
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            acc.add(t);
            let p = i as u64 + 1;
            CurveEntry { start: p, end: p, estimate: EstimateWithError::exact(t), cumulative: acc.value() }
        })
        .collect();
    let c4 = CriterionReport::new(
        CriterionId::C4,
        lin.label.clone(),
        entries,
        crate::verdict::dyadic_blocks(&terms),
        finite(judge_terms(&terms, policy)),
    )?;

    let mut blocks = Vec::new();
    for (j, (lo, hi)) in dyadic_ranges(p_max).into_iter().enumerate() {
        let est = linear_gordin_block(lin, &mc.with_stream(mc.stream.derive(j as u64)), lo - 1, hi - 1)?;
        blocks.push((lo, hi, est));
    }
    let values: Vec<f64> = blocks.iter().map(|b| b.2.value).collect();
    let judgement = finite(judge_blocks(&values, policy));
    let c1 = CriterionReport::new(CriterionId::C1, lin.label.clone(), accumulate(blocks), values, judgement)?;
    Ok(LinearReport { label: lin.label.clone(), c4, c1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Agreement {
    Agree,
    /// One side is Inconclusive; accepted.
    Inconclusive,
    Disagree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationRow {
    pub criterion: CriterionId,
    pub series: Verdict,
    pub empirical: Verdict,
    pub agreement: Agreement,
    /// Both diagnostic block curves, filled on disagreement.
    pub series_blocks: Option<Vec<f64>>,
    pub empirical_blocks: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconciliationReport {
    pub label: String,
    pub rows: Vec<ReconciliationRow>,
}

impl ReconciliationReport {
    /// True unless some criterion has opposite decisive verdicts.
    pub fn agrees(&self) -> bool {
        self.rows.iter().all(|r| r.agreement != Agreement::Disagree)
    }
}

/// Compare series verdicts against empirically measured curves.
pub fn reconcile(series: &ClassificationTable, empirical: &[CriterionReport]) -> ReconciliationReport {
    let rows = empirical
        .iter()
        .filter_map(|rep| {
            let row = series.rows.iter().find(|r| r.criterion == rep.criterion)?;
            let agreement = match (row.verdict, rep.verdict) {
                (a, b) if a == b => Agreement::Agree,
                (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Agreement::Inconclusive,
                _ => Agreement::Disagree,
            };
            let show = agreement == Agreement::Disagree;
            Some(ReconciliationRow {
                criterion: rep.criterion,
                series: row.verdict,
                empirical: rep.verdict,
                agreement,
                series_blocks: show.then(|| row.dyadic_blocks.clone()),
                empirical_blocks: show.then(|| rep.dyadic_blocks.clone()),
            })
        })
        .collect();
    ReconciliationReport { label: series.label.clone(), rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::ParameterFamily;
    use crate::system::build_system;

    fn mc(seed: u64, trials: usize) -> MonteCarlo {
        MonteCarlo::new(StreamSeed::new(seed, 0), trials, Execution::Parallel).unwrap()
    }

    fn one_arc(theta: f64) -> SystemModel {
        let f = ParameterFamily::new("one", vec![theta], vec![0.25], vec![3.0], Some(vec![0.5])).unwrap();
        build_system(&f, 16, 8).unwrap()
    }

    #[test]
    fn zero_theta_blocks_are_zero() {
        let model = one_arc(0.0);
        for (m, n) in [(0, 0), (0, 3), (1, 3)] {
            let e = gordin_block(&model, &mc(1, 2000), m, n).unwrap();
            assert_eq!((e.value, e.stderr), (0.0, 0.0));
        }
        let e = dedecker_rio_block(&model, &mc(1, 2000), 1, 3).unwrap();
        assert_eq!((e.value, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn beyond_delays_is_zero() {
        let model = one_arc(2.0);
        let e = dedecker_rio_block(&model, &mc(1, 2000), 4, 9).unwrap();
        assert_eq!((e.value, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn l1_of_f_single_arc() {
        let model = one_arc(2.0);
        let e = gordin_block(&model, &mc(4, 100_000), 0, 0).unwrap();
        let exact = 2.0 * 0.25;
        assert!(e.z_score(exact) < 4.0, "{e:?}");
    }

    #[test]
    fn rejects_too_few_trials() {
        assert!(MonteCarlo::new(StreamSeed::new(0, 0), 999, Execution::Sequential).is_err());
    }

    #[test]
    fn report_schema_enforces_exactness() {
        let j = Judgement { verdict: Verdict::Inconclusive, note: String::new() };
        let mc_entry = CurveEntry {
            start: 1,
            end: 1,
            estimate: EstimateWithError { value: 1.0, stderr: 0.1, trials: 1000 },
            cumulative: 1.0,
        };
        assert!(CriterionReport::new(CriterionId::C4, "x", vec![mc_entry.clone()], vec![], j.clone()).is_err());
        assert!(CriterionReport::new(CriterionId::C1, "x", vec![mc_entry], vec![], j).is_ok());
    }

    #[test]
    fn linear_weights_match_direct_sum() {
        let lin = LinearFamily { label: "t".into(), coeffs: vec![1.0, 0.5, 0.25, 0.125], truncated: false };
        for (lo, hi) in [(0, 0), (1, 2), (2, 5), (5, 7)] {
            let w = linear_block_weights(&lin, lo, hi);
            for (n, &wl) in w.iter().enumerate() {
                let l = -(n as i64);
                let direct: f64 = (lo..=hi).map(|i| lin.coeff(i as i64 - l)).sum();
                assert_eq!(wl, direct, "lo={lo} hi={hi} l={l}");
            }
        }
    }

    #[test]
    fn finite_support_linear_is_convergent() {
        let lin = LinearFamily { label: "fin".into(), coeffs: vec![1.0, -0.5, 0.25], truncated: false };
        let r = linear_process_report(&lin, 64, &mc(2, 2000), &VerdictPolicy::default()).unwrap();
        assert_eq!(r.c4.verdict, Verdict::Convergent);
        assert_eq!(r.c1.verdict, Verdict::Convergent);
        // i >= 3 blocks vanish identically
        assert!(r.c1.entries.iter().filter(|e| e.start >= 5).all(|e| e.estimate.value == 0.0));
    }

    #[test]
    fn l2_estimates_single_arc() {
        let model = one_arc(2.0);
        let m = mc(9, 50_000);
        let e = p0_l2_estimate(&model, &m, 3).unwrap();
        assert!(e.z_score(exact_p0_norm(&model, 3)) < 4.0, "{e:?}");
        assert_eq!(p0_l2_estimate(&model, &m, 2).unwrap().value, 0.0);
        let e = esn_l2_estimate(&model, &m, 1).unwrap();
        assert!(e.z_score(2.0 * 0.5) < 4.0, "{e:?}");
    }

    #[test]
    fn stderr_shrinks_like_inverse_root_trials() {
        let model = one_arc(2.0);
        let a = gordin_block(&model, &mc(3, 4_000), 0, 3).unwrap();
        let b = gordin_block(&model, &mc(3, 64_000), 0, 3).unwrap();
        let r = a.stderr / b.stderr;
        assert!((3.0..5.3).contains(&r), "ratio {r}");
    }

    #[test]
    fn dyadic_range_layout() {
        assert_eq!(dyadic_ranges(8), vec![(1, 1), (2, 3), (4, 7)]);
        assert_eq!(dyadic_ranges(0), vec![]);
    }
}
