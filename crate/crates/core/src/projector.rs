//! Conditional expectations and projections of the constructed `f`.
//!
//! `F_j` is generated by the cyclic coordinate and the signs `e_i`, `i <= j`.
//! Since `e_i` is `F_j`-measurable for `i <= j` and independent of `F_j`
//! otherwise,
//!
//! ```text
//! E(f o T^i | F_j) = sum_{k : i - N_k <= j} theta_k e_{i-N_k} 1{pos_i in A_k}
//! P_0(f o T^i)     = theta_k e_0 1{pos_i in A_k}   if i = N_k, else 0
//! ```
//!
//! Everything here is exact; Monte Carlo only enters when norms of these
//! quantities are integrated (see `criteria`).

use num_rational::{BigRational, Ratio};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_ordered, Execution};
use crate::sum::CompensatedSum;
use crate::system::{arc_overlap, exact, MeasureValue, SampleState, SystemModel, Window};

/// `F_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FiltrationTime(pub i64);

/// One summand `coefficient * e_{e_index} * 1{pos_{shift} in A_k}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionTerm {
    pub k: usize,
    pub coefficient: f64,
    pub shift: i64,
    pub e_index: i64,
}

/// Exact finite-sum representation of a conditional expectation or
/// projection as a function on the sample space.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProjectionValue {
    pub terms: Vec<ProjectionTerm>,
}

impl ProjectionValue {
    pub fn evaluate(&self, model: &SystemModel, state: &SampleState) -> Result<f64> {
        let mut v = 0.0;
        for t in &self.terms {
            let e = state.e(t.e_index)?;
            if model.arc(t.k).contains(model.position(state.pos(), t.shift), model.m()) {
                v += t.coefficient * f64::from(e);
            }
        }
        Ok(v)
    }

    /// Per-arc multiplier of `theta_k` at `state`: `e * indicator`, in {-1, 0, 1}.
    pub fn sign_pattern(&self, model: &SystemModel, state: &SampleState) -> Result<Vec<i64>> {
        let mut out = vec![0i64; model.k()];
        for t in &self.terms {
            let e = state.e(t.e_index)?;
            if model.arc(t.k).contains(model.position(state.pos(), t.shift), model.m()) {
                out[t.k - 1] += i64::from(e);
            }
        }
        Ok(out)
    }

    /// Value in exact rational arithmetic.
    pub fn evaluate_exact(&self, model: &SystemModel, state: &SampleState) -> Result<BigRational> {
        let mut v = BigRational::zero();
        for (k, s) in self.sign_pattern(model, state)?.into_iter().enumerate() {
            if s != 0 {
                v += exact(model.theta(k + 1)) * BigRational::from_integer(s.into());
            }
        }
        Ok(v)
    }
}

/// Symbolic `E(f o T^i | F_j)`.
pub fn cond_exp_terms(model: &SystemModel, i: i64, time: FiltrationTime) -> ProjectionValue {
    let terms = (1..=model.k())
        .filter_map(|k| {
            let idx = i - model.delay(k) as i64;
            (idx <= time.0).then_some(ProjectionTerm { k, coefficient: model.theta(k), shift: i, e_index: idx })
        })
        .collect();
    ProjectionValue { terms }
}

/// Symbolic `P_0(f o T^i)`.
pub fn projection_terms(model: &SystemModel, i: i64) -> ProjectionValue {
    let terms = (1..=model.k())
        .filter(|&k| i >= 0 && model.delay(k) as i64 == i)
        .map(|k| ProjectionTerm { k, coefficient: model.theta(k), shift: i, e_index: 0 })
        .collect();
    ProjectionValue { terms }
}

/// `E(f o T^i | F_0)(omega)` for `i >= 0`.
pub fn cond_exp_f(model: &SystemModel, state: &SampleState, i: i64) -> Result<f64> {
    if i < 0 {
        return Err(Error::Precondition(format!(
            "cond_exp_f needs i >= 0 (got {i}); f o T^i is F_0-measurable for i <= 0, use eval_f"
        )));
    }
    cond_exp_terms(model, i, FiltrationTime(0)).evaluate(model, state)
}

/// `E(f o T^i | F_j)(omega)` for any `i`, `j`.
pub fn cond_exp_at(model: &SystemModel, state: &SampleState, i: i64, time: FiltrationTime) -> Result<f64> {
    cond_exp_terms(model, i, time).evaluate(model, state)
}

/// Fast path of [`cond_exp_f`] for hot Monte-Carlo loops: the caller
/// guarantees `0 <= i` and that the state window covers `[i - N_K, 0]`.
#[inline]
pub(crate) fn cond_exp_f_unchecked(model: &SystemModel, state: &SampleState, i: i64) -> f64 {
    let x = model.position(state.pos(), i);
    let mut v = 0.0;
    for k in model.arcs_containing(x) {
        let d = model.delay(k) as i64;
        if d >= i {
            v += model.theta(k) * f64::from(state.e_unchecked(i - d));
        }
    }
    v
}

/// `P_0(f o T^i)(omega)`; zero for `i < 0` since the process is adapted.
pub fn projection_p0(model: &SystemModel, state: &SampleState, i: i64) -> Result<f64> {
    projection_terms(model, i).evaluate(model, state)
}

/// `||P_0(f o T^i)||_2 = theta_k sqrt(mu(A_k))` when `i = N_k`, else 0.
pub fn exact_p0_norm(model: &SystemModel, i: i64) -> f64 {
    projection_terms(model, i).terms.iter().map(|t| t.coefficient * model.arc_measure(t.k).to_f64().sqrt()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct I2Bound {
    pub k: usize,
    pub defect: MeasureValue,
    /// `||e_0 (1_{T^{-N_k} A_k} - 1_{A_k})||_2 = sqrt(defect)`.
    pub norm: f64,
    /// `sqrt(epsilon_k)`.
    pub bound: f64,
}

/// Exact norm of the error part of `P_0(f o T^{N_k})`; fails when it exceeds
/// `sqrt(epsilon_k)` (checked exactly as `defect <= epsilon_k`).
pub fn i2_error_norm(model: &SystemModel, k: usize) -> Result<I2Bound> {
    if k == 0 || k > model.k() {
        return Err(Error::Precondition(format!("k = {k} outside 1..={}", model.k())));
    }
    let defect = model.defect(k, model.delay(k));
    let eps = model.family().epsilon()[k - 1];
    let out = I2Bound { k, defect, norm: defect.to_f64().sqrt(), bound: eps.sqrt() };
    if !defect.le_f64(eps) {
        return Err(Error::InvariantViolated(format!(
            "I_2 bound fails for k = {k}: sqrt(defect) = {:.6e} > sqrt(epsilon_k) = {:.6e}",
            out.norm, out.bound
        )));
    }
    Ok(out)
}

/// Gram weights `c_{kk'} = theta_k theta_k' mu(A_k cap T^{-(N_k' - N_k)} A_k')`.
///
/// `mu(T^{-i} A_k cap T^{-i'} A_k')` depends only on `i' - i`, and the sign
/// orthogonality `E[e_a e_b] = 1{a = b}` pairs `(i, k)` with `(i', k')` exactly
/// when `i - N_k = i' - N_k'`; so every pair of arcs contributes
/// `c_{kk'}` once per shared lag.
#[derive(Debug, Clone, PartialEq)]
pub struct LagGram {
    k: usize,
    delays: Vec<i128>,
    weights: Vec<f64>,
}

impl LagGram {
    pub fn new(model: &SystemModel) -> Self {
        let k = model.k();
        let m = model.m();
        let mut weights = vec![0.0; k * k];
        for a in 1..=k {
            for b in 1..=k {
                let d = model.delay(b) as i64 - model.delay(a) as i64;
                let shifted = model.arc(b).translate_back(model.shift_amount(d), m);
                let count = arc_overlap(model.arc(a), shifted, m);
                weights[(a - 1) * k + (b - 1)] = model.theta(a) * model.theta(b) * (count as f64 / m as f64);
            }
        }
        let delays = model.delays().iter().map(|&d| d as i128).collect();
        Self { k, delays, weights }
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[(a - 1) * self.k + (b - 1)]
    }

    /// Number of lags `l <= 0` with `0 <= l + N_a < n` and `0 <= l + N_b < n`.
    fn shared_lags(&self, a: usize, b: usize, n: u64) -> i128 {
        let (na, nb) = (self.delays[a - 1], self.delays[b - 1]);
        let lo = -na.min(nb);
        let hi = 0i128.min(n as i128 - 1 - na.max(nb));
        (hi - lo + 1).max(0)
    }

    /// `||E(S_n | F_0)||_2^2`.
    pub fn esn_sq(&self, n: u64) -> f64 {
        let mut acc = CompensatedSum::new();
        for a in 1..=self.k {
            for b in 1..=self.k {
                let w = self.weight(a, b);
                if w != 0.0 {
                    acc.add(w * self.shared_lags(a, b, n) as f64);
                }
            }
        }
        acc.value().max(0.0)
    }

    /// `||sum_i P_0(f o T^i)||_2^2 = sum_{k,k'} c_{kk'}`.
    pub fn total(&self) -> f64 {
        crate::sum::sum(&self.weights).max(0.0)
    }
}

/// `||E(S_n(f) | F_0)||_2`, exact.
pub fn exact_esn_norm(model: &SystemModel, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Precondition("n must be >= 1".into()));
    }
    Ok(LagGram::new(model).esn_sq(n).sqrt())
}

/// `||E(S_n | F_0)||_2` for every `n = 1..=n_max`.
pub fn exact_esn_norms(model: &SystemModel, n_max: u64, exec: Execution) -> Vec<f64> {
    let gram = LagGram::new(model);
    let chunk = 4096u64;
    let starts: Vec<u64> = (0..n_max.div_ceil(chunk)).map(|c| 1 + c * chunk).collect();
    map_ordered(exec, starts, |s| (s..(s + chunk).min(n_max + 1)).map(|n| gram.esn_sq(n).sqrt()).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

/// Largest `2^W * M` the enumeration oracle accepts.
pub const BRUTE_FORCE_LIMIT: u128 = 1 << 22;

/// `E(f o T^i | F_time)` tabulated on every atom `(pos, signs)` of a tiny
/// model by direct averaging over the coordinates not in `F_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceTable {
    pub window: Window,
    pub m: u64,
    pub i: i64,
    pub time: FiltrationTime,
    k: usize,
    /// `coeffs[(pos * 2^W + config) * K + (k - 1)]`: exact multiplier of `theta_k`.
    coeffs: Vec<Ratio<i64>>,
}

impl BruteForceTable {
    pub fn atoms(&self) -> usize {
        self.coeffs.len() / self.k
    }

    pub fn configs(&self) -> u64 {
        1u64 << self.window.len()
    }

    fn index(&self, pos: u64, config: u64) -> usize {
        ((pos * self.configs() + config) as usize) * self.k
    }

    pub fn coeffs(&self, pos: u64, config: u64) -> &[Ratio<i64>] {
        let i = self.index(pos, config);
        &self.coeffs[i..i + self.k]
    }

    pub fn value(&self, model: &SystemModel, pos: u64, config: u64) -> f64 {
        self.coeffs(pos, config)
            .iter()
            .enumerate()
            .map(|(k, c)| model.theta(k + 1) * (*c.numer() as f64 / *c.denom() as f64))
            .sum()
    }

    pub fn value_exact(&self, model: &SystemModel, pos: u64, config: u64) -> BigRational {
        let mut v = BigRational::zero();
        for (k, c) in self.coeffs(pos, config).iter().enumerate() {
            let c = BigRational::new((*c.numer()).into(), (*c.denom()).into());
            v += exact(model.theta(k + 1)) * c;
        }
        v
    }

    /// The atom as a sample state (bit `b` of `config` set means `e_{lo+b} = +1`).
    pub fn state(&self, pos: u64, config: u64) -> SampleState {
        config_state(self.window, pos, config)
    }
}

pub(crate) fn config_state(window: Window, pos: u64, config: u64) -> SampleState {
    let values = (0..window.len()).map(|b| if config >> b & 1 == 1 { 1 } else { -1 }).collect();
    SampleState::explicit(window, values, pos).expect("config covers window")
}

fn check_state_space(window: Window, m: u64) -> Result<()> {
    let w = window.len() as u32;
    let size = if w >= 64 { u128::MAX } else { (1u128 << w) * m as u128 };
    if w >= 64 || size > BRUTE_FORCE_LIMIT {
        return Err(Error::StateSpaceTooLarge { window: w, m, size });
    }
    Ok(())
}

/// Enumeration oracle for `E(f o T^i | F_0)` over the model window.
pub fn brute_force_cond_exp(model: &SystemModel, i: i64) -> Result<BruteForceTable> {
    brute_force_cond_exp_at(model, i, FiltrationTime(0), model.window())
}

/// Enumeration oracle for `E(f o T^i | F_time)` over an explicit window.
pub fn brute_force_cond_exp_at(
    model: &SystemModel,
    i: i64,
    time: FiltrationTime,
    window: Window,
) -> Result<BruteForceTable> {
    check_state_space(window, model.m())?;
    let w = window.len() as u32;
    let configs = 1u64 << w;
    let k_count = model.k();
    // Coordinates observed at `time`: indices lo..=min(hi, time).
    let observed_bits = (time.0.min(window.hi) - window.lo + 1).clamp(0, w as i64) as u32;
    let mask = if observed_bits == 64 { u64::MAX } else { (1u64 << observed_bits) - 1 };
    let hidden = (configs >> observed_bits) as i64;

    let mut needed = Vec::with_capacity(k_count);
    for k in 1..=k_count {
        let idx = i - model.delay(k) as i64;
        window.check(idx)?;
        needed.push((idx - window.lo) as u32);
    }

    let mut coeffs = vec![Ratio::from_integer(0i64); (configs * model.m()) as usize * k_count];
    let mut sums = vec![0i64; (mask + 1) as usize];
    for pos in 0..model.m() {
        let x = model.position(pos, i);
        for k in 1..=k_count {
            sums.iter_mut().for_each(|s| *s = 0);
            let inside = model.arc(k).contains(x, model.m());
            let bit = needed[k - 1];
            // Raw value of theta_k^{-1} (f o T^i)_k on each configuration, then averaged
            // over the hidden coordinates.
            for c in 0..configs {
                let e = if c >> bit & 1 == 1 { 1 } else { -1 };
                sums[(c & mask) as usize] += if inside { e } else { 0 };
            }
            for c in 0..configs {
                let idx = ((pos * configs + c) as usize) * k_count + (k - 1);
                coeffs[idx] = Ratio::new(sums[(c & mask) as usize], hidden);
            }
        }
    }
    Ok(BruteForceTable { window, m: model.m(), i, time, k: k_count, coeffs })
}

/// Result of comparing a closed form against the enumeration oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub name: String,
    pub atoms: u64,
    pub exact_mismatches: u64,
    pub max_abs_diff: f64,
}

impl OracleComparison {
    pub fn passed(&self) -> bool {
        self.exact_mismatches == 0 && self.max_abs_diff <= 1e-12
    }
}

fn compare_atoms(
    name: String,
    model: &SystemModel,
    window: Window,
    closed: &ProjectionValue,
    oracle: impl Fn(u64, u64) -> (Vec<Ratio<i64>>, f64),
) -> Result<OracleComparison> {
    let mut out = OracleComparison { name, atoms: 0, exact_mismatches: 0, max_abs_diff: 0.0 };
    for pos in 0..model.m() {
        for config in 0..1u64 << window.len() {
            let state = config_state(window, pos, config);
            let pattern = closed.sign_pattern(model, &state)?;
            let value = closed.evaluate(model, &state)?;
            let (coeffs, oracle_value) = oracle(pos, config);
            if pattern.iter().zip(&coeffs).any(|(&p, c)| Ratio::from_integer(p) != *c) {
                out.exact_mismatches += 1;
            }
            out.max_abs_diff = out.max_abs_diff.max((value - oracle_value).abs());
            out.atoms += 1;
        }
    }
    Ok(out)
}

/// `cond_exp_f(., i)` against the enumeration oracle on every atom.
pub fn check_cond_exp(model: &SystemModel, i: i64, window: Window) -> Result<OracleComparison> {
    let table = brute_force_cond_exp_at(model, i, FiltrationTime(0), window)?;
    let closed = cond_exp_terms(model, i, FiltrationTime(0));
    compare_atoms(format!("cond_exp i={i}"), model, window, &closed, |p, c| {
        (table.coeffs(p, c).to_vec(), table.value(model, p, c))
    })
}

/// `projection_p0(., i)` against the difference of two oracle tables.
pub fn check_projection(model: &SystemModel, i: i64, window: Window) -> Result<OracleComparison> {
    let t0 = brute_force_cond_exp_at(model, i, FiltrationTime(0), window)?;
    let t1 = brute_force_cond_exp_at(model, i, FiltrationTime(-1), window)?;
    let closed = projection_terms(model, i);
    compare_atoms(format!("projection_p0 i={i}"), model, window, &closed, |p, c| {
        let d: Vec<Ratio<i64>> = t0.coeffs(p, c).iter().zip(t1.coeffs(p, c)).map(|(a, b)| a - b).collect();
        (d, t0.value(model, p, c) - t1.value(model, p, c))
    })
}

/// Exact check that `E(f o T^i|F_0) - E(f o T^i|F_{-1}) = P_0(f o T^i)` on
/// every atom, in rational arithmetic.
pub fn check_telescoping(model: &SystemModel, i: i64, window: Window) -> Result<OracleComparison> {
    check_state_space(window, model.m())?;
    let c0 = cond_exp_terms(model, i, FiltrationTime(0));
    let c1 = cond_exp_terms(model, i, FiltrationTime(-1));
    let p = projection_terms(model, i);
    let mut out =
        OracleComparison { name: format!("telescoping i={i}"), atoms: 0, exact_mismatches: 0, max_abs_diff: 0.0 };
    for pos in 0..model.m() {
        for config in 0..1u64 << window.len() {
            let s = config_state(window, pos, config);
            let lhs = c0.evaluate_exact(model, &s)? - c1.evaluate_exact(model, &s)?;
            if lhs != p.evaluate_exact(model, &s)? {
                out.exact_mismatches += 1;
            }
            out.atoms += 1;
        }
    }
    Ok(out)
}

/// `E[P_0(f o T^i) h] = 0` for `h` ranging over products of signs `e_j`,
/// `j <= -1`, times indicators of single positions; exact.
pub fn check_orthogonality(model: &SystemModel, i: i64, window: Window) -> Result<OracleComparison> {
    let t0 = brute_force_cond_exp_at(model, i, FiltrationTime(0), window)?;
    let t1 = brute_force_cond_exp_at(model, i, FiltrationTime(-1), window)?;
    let past_bits = ((-1).min(window.hi) - window.lo + 1).max(0) as u32;
    let mut out =
        OracleComparison { name: format!("orthogonality i={i}"), atoms: 0, exact_mismatches: 0, max_abs_diff: 0.0 };
    for subset in 0..1u64 << past_bits {
        for pos in 0..model.m() {
            let mut acc = vec![Ratio::from_integer(0i64); model.k()];
            for config in 0..t0.configs() {
                // h = prod_{b in subset} e_{lo+b}
                let negatives = (subset & !config).count_ones();
                let h = if negatives % 2 == 0 { 1 } else { -1 };
                for (k, a) in acc.iter_mut().enumerate() {
                    let d = t0.coeffs(pos, config)[k] - t1.coeffs(pos, config)[k];
                    *a += d * h;
                }
            }
            if acc.iter().any(|a| !a.is_zero()) {
                out.exact_mismatches += 1;
            }
            out.atoms += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{make_preset, ParameterFamily, Preset};
    use crate::system::{build_system, sample_state};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> SystemModel {
        let f = ParameterFamily::new("tiny", vec![1.5, 0.5], vec![0.25, 0.125], vec![1.0, 2.0], Some(vec![0.25, 0.3]))
            .unwrap();
        build_system(&f, 16, 4).unwrap()
    }

    /// Direct enumeration over index pairs `(i,k), (i',k')` with matching
    /// sign index: independent of the lag grouping in `LagGram`.
    fn esn_sq_by_pairs(model: &SystemModel, n: u64) -> f64 {
        let mut acc = 0.0;
        for i in 0..n as i64 {
            for a in 1..=model.k() {
                if (model.delay(a) as i64) < i {
                    continue;
                }
                for j in 0..n as i64 {
                    for b in 1..=model.k() {
                        if (model.delay(b) as i64) < j || i - model.delay(a) as i64 != j - model.delay(b) as i64 {
                            continue;
                        }
                        let count = (0..model.m())
                            .filter(|&p| {
                                model.arc(a).contains(model.position(p, i), model.m())
                                    && model.arc(b).contains(model.position(p, j), model.m())
                            })
                            .count();
                        acc += model.theta(a) * model.theta(b) * count as f64 / model.m() as f64;
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn cond_exp_examples() {
        let model = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = sample_state(&model, &mut rng);
            assert_eq!(cond_exp_f(&model, &s, 0).unwrap(), crate::system::eval_f(&model, &s, 0).unwrap());
            assert_eq!(cond_exp_f(&model, &s, 3).unwrap(), 0.0);
            for i in 0..3 {
                assert_eq!(cond_exp_f(&model, &s, i).unwrap(), cond_exp_f_unchecked(&model, &s, i));
            }
        }
        let s = sample_state(&model, &mut rng);
        assert!(matches!(cond_exp_f(&model, &s, -1), Err(Error::Precondition(_))));
    }

    #[test]
    fn projection_examples() {
        let model = tiny();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let s = sample_state(&model, &mut rng);
            assert_eq!(projection_p0(&model, &s, -3).unwrap(), 0.0);
            assert_eq!(projection_p0(&model, &s, 0).unwrap(), 0.0);
            assert_eq!(projection_p0(&model, &s, 3).unwrap(), 0.0);
            let at_n2 = projection_p0(&model, &s, 2).unwrap();
            let inside = model.arc(2).contains(model.position(s.pos(), 2), 16);
            let expect = if inside { 0.5 * f64::from(s.e(0).unwrap()) } else { 0.0 };
            assert_eq!(at_n2, expect);
        }
    }

    #[test]
    fn p0_norm_identity() {
        let model = tiny();
        assert_eq!(exact_p0_norm(&model, 1), 1.5 * 0.25f64.sqrt());
        assert_eq!(exact_p0_norm(&model, 5), 0.0);
        assert_eq!(exact_p0_norm(&model, -1), 0.0);
        let total: f64 = (0..=2).map(|i| exact_p0_norm(&model, i)).sum();
        assert_eq!(total, 1.5 * 0.25f64.sqrt() + 0.5 * 0.125f64.sqrt());
    }

    #[test]
    fn i2_examples() {
        let f = ParameterFamily::new("one", vec![1.0], vec![0.25], vec![1.0], Some(vec![0.25])).unwrap();
        let model = build_system(&f, 16, 2).unwrap();
        let b = i2_error_norm(&model, 1).unwrap();
        assert_eq!(b.norm, (1.0f64 / 8.0).sqrt());
        let ce1 = make_preset(Preset::Ce1, 6).unwrap().construction().unwrap();
        let model = build_system(&ce1, crate::system::auto_cycle_length(&ce1).unwrap(), 8).unwrap();
        for k in 1..=6 {
            let b = i2_error_norm(&model, k).unwrap();
            assert!(b.norm <= b.bound);
        }
    }

    #[test]
    fn esn_grouping_matches_pair_enumeration() {
        let model = tiny();
        let g = LagGram::new(&model);
        for n in 1..8 {
            let a = g.esn_sq(n);
            let b = esn_sq_by_pairs(&model, n);
            assert!((a - b).abs() < 1e-12, "n={n}: {a} vs {b}");
        }
        let f2 = 1.5f64.powi(2) * 0.25 + 0.5f64.powi(2) * 0.125;
        assert!((exact_esn_norm(&model, 1).unwrap() - f2.sqrt()).abs() < 1e-15);
        let all = exact_esn_norms(&model, 7, Execution::Sequential);
        assert_eq!(all.len(), 7);
        assert_eq!(all[4], g.esn_sq(5).sqrt());
    }

    #[test]
    fn esn_single_arc_is_diagonal() {
        let f = ParameterFamily::new("one", vec![2.0], vec![0.25], vec![3.0], Some(vec![0.5])).unwrap();
        let model = build_system(&f, 16, 8).unwrap();
        for n in 1..10u64 {
            let expect = 4.0 * 0.25 * n.min(4) as f64;
            assert!((exact_esn_norm(&model, n).unwrap().powi(2) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_basics() {
        let model = tiny();
        let t = brute_force_cond_exp(&model, 0).unwrap();
        let mut total = 0.0;
        for pos in 0..16 {
            for c in 0..t.configs() {
                let s = t.state(pos, c);
                assert_eq!(t.value(&model, pos, c), crate::system::eval_f(&model, &s, 0).unwrap());
                total += t.value(&model, pos, c);
            }
        }
        assert_eq!(total, 0.0);
        for i in 0..=3 {
            let w = model.window();
            assert!(check_cond_exp(&model, i, w).unwrap().passed());
        }
    }

    #[test]
    fn brute_force_refuses_large_spaces() {
        let f = ParameterFamily::new("one", vec![1.0], vec![0.25], vec![1.0], Some(vec![0.25])).unwrap();
        let model = build_system(&f, 16, 40).unwrap();
        assert!(matches!(brute_force_cond_exp(&model, 0), Err(Error::StateSpaceTooLarge { .. })));
    }
}
