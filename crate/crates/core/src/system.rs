//! Finite realization of the dynamical system: fair-sign Bernoulli
//! coordinates `e_i` times a rotation of `Z/M` carrying disjoint arcs `A_k`.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::mix64;
use crate::series::ParameterFamily;

/// Exhaustive invariance checks iterate over every shift up to this many
/// steps per arc; longer ranges use the closed form for `step = 1`.
const EXHAUSTIVE_DEFECT_LIMIT: u64 = 1 << 24;

pub(crate) fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

pub(crate) fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Half-open arc `[start, start + len)` on `Z/M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub start: u64,
    pub len: u64,
}

impl Arc {
    pub fn contains(&self, x: u64, m: u64) -> bool {
        let d = if x >= self.start { x - self.start } else { x + (m - self.start) };
        d < self.len
    }

    /// Preimage of the arc under a rotation by `shift`: `{x : x + shift in A}`.
    pub fn translate_back(&self, shift: u64, m: u64) -> Arc {
        let s = shift % m;
        Arc { start: (self.start + m - s) % m, len: self.len }
    }

    /// Up to two disjoint linear pieces inside `[0, m)`.
    fn pieces(&self, m: u64) -> [(u64, u64); 2] {
        if self.len >= m {
            return [(0, m), (0, 0)];
        }
        let end = self.start as u128 + self.len as u128;
        if end <= m as u128 {
            [(self.start, end as u64), (0, 0)]
        } else {
            [(self.start, m), (0, (end - m as u128) as u64)]
        }
    }
}

/// Exact number of points of `Z/M` in both arcs.
pub fn arc_overlap(a: Arc, b: Arc, m: u64) -> u64 {
    let mut total = 0;
    for (a0, a1) in a.pieces(m) {
        for (b0, b1) in b.pieces(m) {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                total += hi - lo;
            }
        }
    }
    total
}

/// Exact measure of an event of the cyclic coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub numerator: u128,
    pub denominator: u64,
}

impl MeasureValue {
    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }

    pub fn as_ratio(self) -> BigRational {
        ratio(self.numerator, self.denominator as u128)
    }

    /// Exact comparison against a floating-point bound.
    pub fn le_f64(self, bound: f64) -> bool {
        self.as_ratio() <= exact(bound)
    }
}

/// Inclusive index range of materialisable Bernoulli coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
}

impl Window {
    pub fn len(&self) -> u64 {
        (self.hi - self.lo + 1).max(0) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }

    pub fn contains(&self, i: i64) -> bool {
        (self.lo..=self.hi).contains(&i)
    }

    pub fn check(&self, i: i64) -> Result<()> {
        if self.contains(i) {
            Ok(())
        } else {
            Err(Error::WindowExceeded { index: i, lo: self.lo, hi: self.hi })
        }
    }
}

/// Immutable once built; share freely across workers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemModel {
    m: u64,
    step: u64,
    arcs: Vec<Arc>,
    delays: Vec<u64>,
    family: ParameterFamily,
    window: Window,
}

/// Smallest power of two satisfying the build preconditions for `family`.
pub fn auto_cycle_length(family: &ParameterFamily) -> Result<u64> {
    let delays = family.delays()?;
    let n_k = *delays.last().expect("K >= 1");
    let eps_min = family.epsilon().iter().copied().fold(f64::INFINITY, f64::min);
    let rho_min = family.rho().iter().copied().fold(f64::INFINITY, f64::min);
    let need = (2.0 * n_k as f64 / eps_min).max(2.0 / rho_min).max(2.0);
    let bits = need.log2().ceil();
    if bits.is_nan() || bits >= 63.0 {
        return Err(Error::Range(format!(
            "{}: cycle length 2^{bits} needed for the invariance bound exceeds 2^62",
            family.label()
        )));
    }
    // Rounding of log2 may leave us one doubling short; the exact check fixes it.
    let mut m = 1u64 << (bits as u32);
    while (m as u128) * 2 <= 1 << 62 && !invariance_precondition(family, m, n_k) {
        m *= 2;
    }
    Ok(m)
}

fn invariance_precondition(family: &ParameterFamily, m: u64, n_k: u64) -> bool {
    let eps_min = family.epsilon().iter().copied().fold(f64::INFINITY, f64::min);
    // M * eps_min >= 2 N_K
    exact(eps_min) * ratio(m as u128, 1) >= ratio(2 * n_k as u128, 1)
}

/// Build the rotation model with `step = 1`.
pub fn build_system(family: &ParameterFamily, m: u64, n_max: u64) -> Result<SystemModel> {
    build_system_with_step(family, m, 1, n_max)
}

/// Place the arcs contiguously (`A_1` starting at 0), with
/// `length_k = floor(rho_k M)`, and verify every model invariant.
pub fn build_system_with_step(family: &ParameterFamily, m: u64, step: u64, n_max: u64) -> Result<SystemModel> {
    if m < 2 {
        return Err(Error::Precondition("cycle length M must be >= 2".into()));
    }
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be >= 1".into()));
    }
    if step.is_multiple_of(m) {
        return Err(Error::Precondition("rotation step must be nonzero mod M".into()));
    }
    let delays = family.delays()?;
    let n_k = *delays.last().expect("K >= 1");
    if !invariance_precondition(family, m, n_k) {
        let eps_min = family.epsilon().iter().copied().fold(f64::INFINITY, f64::min);
        return Err(Error::InvarianceUnachievable(format!(
            "M = {m} < 2 N_K / min epsilon = {:.6e}",
            2.0 * n_k as f64 / eps_min
        )));
    }
    let mut arcs = Vec::with_capacity(family.k());
    let mut start: u128 = 0;
    for (i, &rho) in family.rho().iter().enumerate() {
        let mass = exact(rho) * ratio(m as u128, 1);
        if mass < ratio(2, 1) {
            return Err(Error::DegenerateArc { k: i + 1, mass: rho * m as f64 });
        }
        let len = mass.floor().to_integer();
        let len: u64 = len.try_into().map_err(|_| Error::Range("arc length exceeds u64".into()))?;
        arcs.push(Arc { start: (start % m as u128) as u64, len });
        start += len as u128;
    }
    if start > m as u128 {
        return Err(Error::ArcsDontFit { total: start, m });
    }
    let window = Window { lo: -(n_k as i64), hi: n_max as i64 - 1 };
    let model = SystemModel { m, step: step % m, arcs, delays, family: family.clone(), window };
    model.check_invariants()?;
    Ok(model)
}

impl SystemModel {
    pub fn m(&self) -> u64 {
        self.m
    }
    pub fn step(&self) -> u64 {
        self.step
    }
    pub fn k(&self) -> usize {
        self.arcs.len()
    }
    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }
    /// Arc `A_k`, 1-based.
    pub fn arc(&self, k: usize) -> Arc {
        self.arcs[k - 1]
    }
    pub fn delays(&self) -> &[u64] {
        &self.delays
    }
    /// `N_k`, 1-based.
    pub fn delay(&self, k: usize) -> u64 {
        self.delays[k - 1]
    }
    pub fn theta(&self, k: usize) -> f64 {
        self.family.theta()[k - 1]
    }
    pub fn family(&self) -> &ParameterFamily {
        &self.family
    }
    pub fn window(&self) -> Window {
        self.window
    }

    /// `mu(A_k) = length_k / M`.
    pub fn arc_measure(&self, k: usize) -> MeasureValue {
        MeasureValue { numerator: self.arc(k).len as u128, denominator: self.m }
    }

    /// Rotation amount of `T^t` as a residue mod M (negative `t` allowed).
    pub fn shift_amount(&self, t: i64) -> u64 {
        let m = self.m as i128;
        ((t as i128 * self.step as i128).rem_euclid(m)) as u64
    }

    /// Cyclic coordinate of `T^t omega` when `omega` sits at `pos`.
    pub fn position(&self, pos: u64, t: i64) -> u64 {
        ((pos as u128 + self.shift_amount(t) as u128) % self.m as u128) as u64
    }

    /// Measure of the symmetric difference `T^{-i} A_k  delta  A_k`.
    pub fn defect(&self, k: usize, i: u64) -> MeasureValue {
        let a = self.arc(k);
        let s = self.shift_amount(i as i64);
        let overlap = arc_overlap(a, a.translate_back(s, self.m), self.m);
        MeasureValue { numerator: 2 * (a.len - overlap) as u128, denominator: self.m }
    }

    /// The closed form `2 min(s, L, M - L, M - s) / M`.
    pub fn defect_closed_form(&self, k: usize, i: u64) -> MeasureValue {
        let l = self.arc(k).len;
        let s = self.shift_amount(i as i64);
        let v = s.min(l).min(self.m - l).min(self.m - s);
        MeasureValue { numerator: 2 * v as u128, denominator: self.m }
    }

    /// Largest defect over shifts `0..=N_k`.
    pub fn max_defect(&self, k: usize) -> MeasureValue {
        let n = self.delay(k);
        if n <= EXHAUSTIVE_DEFECT_LIMIT || self.step != 1 {
            (0..=n).map(|i| self.defect(k, i)).max_by_key(|d| d.numerator).expect("non-empty")
        } else {
            // With unit step the defect is nondecreasing on [0, M/2] and N_k < M/2.
            self.defect(k, n)
        }
    }

    /// Every `k` whose arc contains `x` (at most one in a valid model).
    pub fn arcs_containing(&self, x: u64) -> impl Iterator<Item = usize> + '_ {
        self.arcs.iter().enumerate().filter(move |(_, a)| a.contains(x, self.m)).map(|(i, _)| i + 1)
    }

    fn check_invariants(&self) -> Result<()> {
        for (i, a) in self.arcs.iter().enumerate() {
            for (j, b) in self.arcs.iter().enumerate().skip(i + 1) {
                if arc_overlap(*a, *b, self.m) != 0 {
                    return Err(Error::InvariantViolated(format!("arcs A_{} and A_{} intersect", i + 1, j + 1)));
                }
            }
        }
        for k in 1..=self.k() {
            let mu = self.arc_measure(k).as_ratio();
            let rho = exact(self.family.rho()[k - 1]);
            if mu > rho || mu * ratio(2, 1) < rho {
                return Err(Error::InvariantViolated(format!("mu(A_{k}) outside [rho_k/2, rho_k]")));
            }
            let eps = self.family.epsilon()[k - 1];
            let worst = self.max_defect(k);
            if !worst.le_f64(eps) {
                return Err(Error::InvariantViolated(format!(
                    "defect of A_{k} reaches {:.6e} > epsilon_{k} = {eps:.6e}",
                    worst.to_f64()
                )));
            }
        }
        Ok(())
    }

    /// Replace arc `k` without any checks. Fault-injection hook for the
    /// verification suites; the result is not a valid model.
    #[doc(hidden)]
    pub fn with_arc_unchecked(mut self, k: usize, arc: Arc) -> Self {
        self.arcs[k - 1] = arc;
        self
    }

    /// Overwrite the delay of arc `k` without re-checking invariants. The
    /// window is widened so the new delay stays addressable.
    #[doc(hidden)]
    pub fn with_delay_unchecked(mut self, k: usize, delay: u64) -> Self {
        self.delays[k - 1] = delay;
        self.window.lo = self.window.lo.min(-(delay as i64));
        self
    }

    pub fn describe(&self) -> ModelDescription {
        let rows = (1..=self.k())
            .map(|k| {
                let d = self.defect(k, self.delay(k));
                ArcRow {
                    k,
                    start: self.arc(k).start,
                    len: self.arc(k).len,
                    theta: self.theta(k),
                    rho: self.family.rho()[k - 1],
                    measure: self.arc_measure(k).to_f64(),
                    big_n: self.delay(k),
                    epsilon: self.family.epsilon()[k - 1],
                    defect_at_n: d.to_f64(),
                    max_defect: self.max_defect(k).to_f64(),
                }
            })
            .collect();
        ModelDescription {
            label: self.family.label().to_string(),
            m: self.m,
            step: self.step,
            window: self.window,
            arcs: rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcRow {
    pub k: usize,
    pub start: u64,
    pub len: u64,
    pub theta: f64,
    pub rho: f64,
    pub measure: f64,
    pub big_n: u64,
    pub epsilon: f64,
    pub defect_at_n: f64,
    pub max_defect: f64,
}

/// Audit record of a built model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescription {
    pub label: String,
    pub m: u64,
    pub step: u64,
    pub window: Window,
    pub arcs: Vec<ArcRow>,
}

impl ModelDescription {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model {}", self.label);
        let _ = writeln!(s, "M = {}", self.m);
        let _ = writeln!(s, "step = {}", self.step);
        let _ = writeln!(s, "window = [{}, {}]", self.window.lo, self.window.hi);
        let _ = writeln!(s, "k\tstart\tlength\ttheta\trho\tmu(A_k)\tN_k\tepsilon\tdefect(N_k)\tmax_defect");
        for r in &self.arcs {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{:e}\t{:e}\t{:e}\t{}\t{:e}\t{:e}\t{:e}",
                r.k, r.start, r.len, r.theta, r.rho, r.measure, r.big_n, r.epsilon, r.defect_at_n, r.max_defect
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Coordinates {
    /// `e_i` derived on demand from a per-state key (SplitMix64 at index i).
    Keyed(u64),
    /// Explicit values, `values[i - lo]`.
    Table { lo: i64, values: Vec<i8> },
}

/// One sampled point: Bernoulli coordinates over a window plus the cyclic
/// position. `T` shifts the coordinates and rotates the position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleState {
    coords: Coordinates,
    offset: i64,
    window: Window,
    pos: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

impl SampleState {
    pub fn keyed(key: u64, window: Window, pos: u64) -> Self {
        Self { coords: Coordinates::Keyed(key), offset: 0, window, pos }
    }

    /// State with explicit coordinates `values[j] = e_{window.lo + j}`.
    pub fn explicit(window: Window, values: Vec<i8>, pos: u64) -> Result<Self> {
        if values.len() as u64 != window.len() {
            return Err(Error::Precondition("coordinate table must cover the window".into()));
        }
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Precondition("coordinates must be +1 or -1".into()));
        }
        Ok(Self { coords: Coordinates::Table { lo: window.lo, values }, offset: 0, window, pos })
    }

    pub fn pos(&self) -> u64 {
        self.pos
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// `e_i(omega)`.
    pub fn e(&self, i: i64) -> Result<i8> {
        self.window.check(i)?;
        Ok(self.e_unchecked(i))
    }

    #[inline]
    pub(crate) fn e_unchecked(&self, i: i64) -> i8 {
        let j = i + self.offset;
        match &self.coords {
            Coordinates::Keyed(key) => {
                if mix64(key.wrapping_add((j as u64).wrapping_mul(GOLDEN))) >> 63 == 1 {
                    1
                } else {
                    -1
                }
            }
            Coordinates::Table { lo, values } => values[(j - lo) as usize],
        }
    }

    /// `T^by omega`.
    pub fn shift(&self, model: &SystemModel, by: i64) -> Self {
        Self {
            coords: self.coords.clone(),
            offset: self.offset + by,
            window: Window { lo: self.window.lo - by, hi: self.window.hi - by },
            pos: model.position(self.pos, by),
        }
    }
}

/// Independent fair signs over the model window and a uniform position.
pub fn sample_state<R: Rng + ?Sized>(model: &SystemModel, rng: &mut R) -> SampleState {
    let key = rng.next_u64();
    let pos = rng.random_range(0..model.m);
    SampleState::keyed(key, model.window, pos)
}

/// `f(T^t omega) = sum_k theta_k e_{t - N_k} 1{pos_t in A_k}`.
pub fn eval_f(model: &SystemModel, state: &SampleState, t: i64) -> Result<f64> {
    let w = state.window();
    let first = t - *model.delays.last().expect("K >= 1") as i64;
    let last = t - model.delays[0] as i64;
    w.check(first)?;
    w.check(last)?;
    Ok(eval_f_unchecked(model, state, t))
}

#[inline]
pub(crate) fn eval_f_unchecked(model: &SystemModel, state: &SampleState, t: i64) -> f64 {
    let x = model.position(state.pos, t);
    let mut v = 0.0;
    for k in model.arcs_containing(x) {
        v += model.theta(k) * f64::from(state.e_unchecked(t - model.delay(k) as i64));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{make_preset, Preset};
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn tiny_family() -> ParameterFamily {
        ParameterFamily::new("tiny", vec![1.5, 0.5], vec![0.25, 0.125], vec![1.0, 2.0], Some(vec![0.25, 0.3])).unwrap()
    }

    #[test]
    fn ce1_arc_lengths() {
        let f = make_preset(Preset::Ce1, 4).unwrap().construction().unwrap();
        let m = 1u64 << 20;
        let model = build_system(&f, m, 16).unwrap();
        let lens: Vec<u64> = model.arcs().iter().map(|a| a.len).collect();
        assert_eq!(lens, vec![m / 4, m / 16, m / 64, m / 256]);
        assert_eq!(model.arc(2).start, m / 4);
    }

    #[test]
    fn arcs_dont_fit() {
        let f = ParameterFamily::new("fat", vec![1.0; 2], vec![0.9, 0.9], vec![1.0, 2.0], Some(vec![0.5; 2])).unwrap();
        assert!(matches!(build_system(&f, 100, 4), Err(Error::ArcsDontFit { .. })));
    }

    #[test]
    fn invariance_unachievable() {
        let f = ParameterFamily::new("far", vec![1.0], vec![0.5], vec![100.0], Some(vec![0.25])).unwrap();
        assert!(matches!(build_system(&f, 4, 4), Err(Error::InvarianceUnachievable(_))));
    }

    #[test]
    fn degenerate_arc() {
        let f = ParameterFamily::new("thin", vec![1.0], vec![0.01], vec![1.0], Some(vec![0.5])).unwrap();
        assert!(matches!(build_system(&f, 64, 4), Err(Error::DegenerateArc { k: 1, .. })));
    }

    #[test]
    fn defect_examples() {
        let f = ParameterFamily::new("d", vec![1.0], vec![0.25], vec![1.0], Some(vec![0.25])).unwrap();
        let model = build_system(&f, 16, 4).unwrap();
        assert_eq!(model.defect(1, 0).numerator, 0);
        assert_eq!(model.defect(1, 1), MeasureValue { numerator: 2, denominator: 16 });
        for i in 0..16 {
            assert_eq!(model.defect(1, i), model.defect(1, 16 - i));
            assert_eq!(model.defect(1, i), model.defect_closed_form(1, i));
        }
    }

    #[test]
    fn auto_length_builds() {
        for (p, k) in [(Preset::Ce1, 8), (Preset::Ce2, 4)] {
            let f = make_preset(p, k).unwrap().construction().unwrap();
            let m = auto_cycle_length(&f).unwrap();
            assert!(m.is_power_of_two());
            build_system(&f, m, 64).unwrap();
            assert!(build_system(&f, m / 2, 64).is_err());
        }
    }

    #[test]
    fn description_lists_every_arc() {
        let model = build_system(&tiny_family(), 16, 4).unwrap();
        let d = model.describe();
        assert_eq!(d.arcs.len(), 2);
        let text = d.to_text();
        assert!(text.contains("M = 16"));
        assert_eq!(text.lines().count(), 5 + 2);
    }

    #[test]
    fn eval_f_examples() {
        let model = build_system(&tiny_family(), 16, 4).unwrap();
        let w = model.window();
        // A_1 = [0,4), A_2 = [4,6)
        let values: Vec<i8> = (0..w.len()).map(|j| if j % 2 == 0 { 1 } else { -1 }).collect();
        let s = SampleState::explicit(w, values, 0).unwrap();
        assert_eq!(eval_f(&model, &s, 0).unwrap(), 1.5 * f64::from(s.e(-1).unwrap()));
        let out = SampleState::explicit(w, vec![1; w.len() as usize], 10).unwrap();
        assert_eq!(eval_f(&model, &out, 0).unwrap(), 0.0);
        assert!(matches!(eval_f(&model, &s, 5), Err(Error::WindowExceeded { .. })));
    }

    #[test]
    fn shift_equivariance() {
        let model = build_system(&tiny_family(), 16, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s = sample_state(&model, &mut rng);
            let s1 = s.shift(&model, 1);
            for t in 1..8 {
                assert_eq!(eval_f(&model, &s, t).unwrap(), eval_f(&model, &s1, t - 1).unwrap());
            }
        }
    }

    #[test]
    fn sampled_signs_are_fair() {
        let model = build_system(&tiny_family(), 16, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 1_000_000;
        let mut sum = 0i64;
        let mut in_a1 = 0u64;
        for _ in 0..trials {
            let s = sample_state(&model, &mut rng);
            sum += i64::from(s.e(0).unwrap());
            in_a1 += u64::from(model.arc(1).contains(s.pos(), model.m()));
        }
        assert!((sum as f64 / trials as f64).abs() < 4e-3);
        let p = model.arc_measure(1).to_f64();
        assert!((in_a1 as f64 / trials as f64 - p).abs() < 3.0 * (0.25f64 / trials as f64).sqrt());
        let a = sample_state(&model, &mut ChaCha8Rng::seed_from_u64(1));
        let b = sample_state(&model, &mut ChaCha8Rng::seed_from_u64(2));
        assert_ne!(a, b);
    }

    #[test]
    fn keyed_signs_are_uncorrelated_across_lags() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = Window { lo: 0, hi: 8 };
        let trials = 200_000;
        let mut c = [0i64; 8];
        for _ in 0..trials {
            let s = SampleState::keyed(rng.next_u64(), w, 0);
            for (lag, acc) in c.iter_mut().enumerate() {
                *acc += i64::from(s.e(0).unwrap() * s.e(lag as i64 + 1).unwrap());
            }
        }
        for v in c {
            assert!((v as f64 / trials as f64).abs() < 4.0 / (trials as f64).sqrt());
        }
    }
}
