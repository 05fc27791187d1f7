//! Parameter families and the closed-form series that decide each criterion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{partial_sums, CompensatedSum};
use crate::verdict::{dyadic_blocks, judge_terms, Judgement, Verdict, VerdictPolicy};

/// Largest truncation accepted for the second counterexample family: its
/// delays grow like 2^{4k}.
pub const CE2_MAX_K: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "CE1")]
    Ce1,
    #[serde(rename = "CE2")]
    Ce2,
    #[serde(rename = "LINEAR")]
    Linear,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CE1" => Ok(Preset::Ce1),
            "CE2" => Ok(Preset::Ce2),
            "LINEAR" => Ok(Preset::Linear),
            other => Err(Error::InvalidFamily(format!("unknown preset {other:?}"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Ce1 => "CE1",
            Preset::Ce2 => "CE2",
            Preset::Linear => "LINEAR",
        })
    }
}

/// Criteria tracked by the laboratory. `L2` is square integrability of f.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CriterionId {
    C1,
    C2,
    C3,
    C4,
    L2,
}

impl CriterionId {
    pub const CRITERIA: [CriterionId; 4] = [Self::C1, Self::C2, Self::C3, Self::C4];

    pub fn name(self) -> &'static str {
        match self {
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
            Self::C4 => "C4",
            Self::L2 => "L2",
        }
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The sequences `theta_k, rho_k, N_k, epsilon_k` for `k = 1..=K` defining
/// `f = sum_k theta_k e_{-N_k} 1_{A_k}`.
///
/// Delays are stored as `f64` holding exact integers so that the second
/// counterexample (delays `2^{4k}`) stays representable up to `CE2_MAX_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFamily {
    label: String,
    theta: Vec<f64>,
    rho: Vec<f64>,
    big_n: Vec<f64>,
    epsilon: Vec<f64>,
}

impl ParameterFamily {
    /// Build a family; `epsilon = None` applies [`ParameterFamily::choose_epsilon`].
    pub fn new(
        label: impl Into<String>,
        theta: Vec<f64>,
        rho: Vec<f64>,
        big_n: Vec<f64>,
        epsilon: Option<Vec<f64>>,
    ) -> Result<Self> {
        let k = theta.len();
        if k == 0 {
            return Err(Error::InvalidFamily("truncation level K must be >= 1".into()));
        }
        if rho.len() != k || big_n.len() != k || epsilon.as_ref().is_some_and(|e| e.len() != k) {
            return Err(Error::InvalidFamily("sequences must all have length K".into()));
        }
        let fam =
            Self { label: label.into(), theta, rho, big_n, epsilon: epsilon.clone().unwrap_or_else(|| vec![0.25; k]) };
        Ok(if epsilon.is_none() { fam.choose_epsilon() } else { fam })
    }

    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn k(&self) -> usize {
        self.theta.len()
    }
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn big_n(&self) -> &[f64] {
        &self.big_n
    }
    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    /// `N_k` (1-based `k`) as an exact machine integer.
    pub fn delay(&self, k: usize) -> Result<u64> {
        let n = self.big_n[k - 1];
        if !(n >= 0.0 && n.fract() == 0.0 && n <= (1u64 << 53) as f64) {
            return Err(Error::Range(format!("N_{k} = {n} is not an integer representable for simulation")));
        }
        Ok(n as u64)
    }

    /// All delays as integers; fails when any exceeds 2^53.
    pub fn delays(&self) -> Result<Vec<u64>> {
        (1..=self.k()).map(|k| self.delay(k)).collect()
    }

    /// `epsilon_k = min(1/4, (k^2 theta_k N_k)^{-2})`, which forces
    /// `theta_k N_k sqrt(epsilon_k) <= 1/k^2`.
    pub fn choose_epsilon(mut self) -> Self {
        for (i, eps) in self.epsilon.iter_mut().enumerate() {
            let k = (i + 1) as f64;
            let scale = k * k * self.theta[i] * self.big_n[i];
            *eps = if scale > 0.0 { (1.0 / (scale * scale)).min(0.25) } else { 0.25 };
        }
        self
    }

    /// Multiply every `theta_k` by `c >= 0`.
    pub fn scale_theta(mut self, c: f64) -> Self {
        self.theta.iter_mut().for_each(|t| *t *= c);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Check the standing assumptions; never fails, reports instead.
    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let sum_rho: f64 = self.rho.iter().copied().collect::<CompensatedSum>().value();
        checks.push(InvariantCheck::new("sum_rho_below_one", sum_rho < 1.0, sum_rho, "sum of rho_k must be < 1"));

        let first_bad_n = self.big_n.iter().position(|&n| !(n >= 1.0 && n.is_finite() && n.fract() == 0.0));
        let first_nonincreasing = self.big_n.windows(2).position(|w| w[1] <= w[0]);
        let n_ok = first_bad_n.is_none() && first_nonincreasing.is_none();
        let n_detail = match (first_bad_n, first_nonincreasing) {
            (Some(i), _) => format!("N_{} = {} is not a positive integer", i + 1, self.big_n[i]),
            (None, Some(i)) => format!(
                "N not strictly increasing: N_{} = {} >= N_{} = {}",
                i + 1,
                self.big_n[i],
                i + 2,
                self.big_n[i + 1]
            ),
            _ => "N strictly increasing positive integers".into(),
        };
        checks.push(InvariantCheck::new("big_n_strictly_increasing", n_ok, self.k() as f64, n_detail));

        let theta_ok = self.theta.iter().all(|&t| t.is_finite() && t >= 0.0);
        let theta_min = self.theta.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(InvariantCheck::new("theta_nonnegative", theta_ok, theta_min, "theta_k finite and >= 0"));

        let rho_ok = self.rho.iter().all(|&r| r > 0.0 && r < 1.0);
        let rho_max = self.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        checks.push(InvariantCheck::new("rho_in_unit_interval", rho_ok, rho_max, "rho_k in (0,1)"));

        let eps_ok = self.epsilon.iter().all(|&e| e > 0.0 && e < 1.0);
        let eps_min = self.epsilon.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(InvariantCheck::new("epsilon_in_unit_interval", eps_ok, eps_min, "epsilon_k in (0,1)"));

        let tne: f64 = (0..self.k())
            .map(|i| self.theta[i] * self.big_n[i] * self.epsilon[i].sqrt())
            .collect::<CompensatedSum>()
            .value();
        checks.push(InvariantCheck::new(
            "theta_n_sqrt_epsilon_finite",
            tne.is_finite(),
            tne,
            "sum of theta_k N_k sqrt(epsilon_k)",
        ));
        ValidationReport { label: self.label.clone(), checks }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    pub quantity: f64,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &str, passed: bool, quantity: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, quantity, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub label: String,
    pub checks: Vec<InvariantCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            let msg =
                self.failures().iter().map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>().join("; ");
            Err(Error::InvalidFamily(msg))
        }
    }
}

/// Coefficients `a_1..a_K` of the adapted linear process
/// `f = sum_{j>=1} a_j xi_{-j}` with iid fair signs `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFamily {
    pub label: String,
    pub coeffs: Vec<f64>,
    /// True when `coeffs` truncates an infinite sequence; false when the
    /// listed coefficients are the whole (finite) support.
    pub truncated: bool,
}

impl LinearFamily {
    /// `a_j` for 1-based `j`; zero outside the stored range.
    pub fn coeff(&self, j: i64) -> f64 {
        if j >= 1 && (j as usize) <= self.coeffs.len() {
            self.coeffs[j as usize - 1]
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PresetFamily {
    Construction(ParameterFamily),
    Linear(LinearFamily),
}

impl PresetFamily {
    pub fn construction(self) -> Option<ParameterFamily> {
        match self {
            PresetFamily::Construction(f) => Some(f),
            PresetFamily::Linear(_) => None,
        }
    }

    pub fn linear(self) -> Option<LinearFamily> {
        match self {
            PresetFamily::Linear(l) => Some(l),
            PresetFamily::Construction(_) => None,
        }
    }
}

/// The counterexample families and the linear process.
///
/// * `CE1`: `theta_k = 2^k/k`, `rho_k = 4^{-k}`, `N_k = k`;
/// * `CE2`: `theta_k = 2^k/k^{3/2}`, `rho_k = 4^{-k}`, `N_k = 2^{4k}`;
/// * `LINEAR`: `a_i = i^{-3/2}`.
pub fn make_preset(preset: Preset, k: usize) -> Result<PresetFamily> {
    if k == 0 {
        return Err(Error::Range("truncation level K must be >= 1".into()));
    }
    let ks = || (1..=k).map(|k| k as f64);
    let fam = match preset {
        Preset::Ce1 => ParameterFamily::new(
            format!("CE1(K={k})"),
            ks().map(|k| 2f64.powf(k) / k).collect(),
            ks().map(|k| 4f64.powf(-k)).collect(),
            ks().collect(),
            None,
        )?,
        Preset::Ce2 => {
            if k > CE2_MAX_K {
                return Err(Error::Range(format!("CE2 delays N_k = 2^(4k) limit K to {CE2_MAX_K}; got K = {k}")));
            }
            ParameterFamily::new(
                format!("CE2(K={k})"),
                ks().map(|k| 2f64.powf(k) / k.powf(1.5)).collect(),
                ks().map(|k| 4f64.powf(-k)).collect(),
                ks().map(|k| 2f64.powf(4.0 * k)).collect(),
                None,
            )?
        }
        Preset::Linear => {
            return Ok(PresetFamily::Linear(LinearFamily {
                label: format!("LINEAR(K={k})"),
                coeffs: ks().map(|i| i.powf(-1.5)).collect(),
                truncated: true,
            }))
        }
    };
    Ok(PresetFamily::Construction(fam))
}

/// Terms, partial sums, dyadic blocks and verdict of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostic {
    pub criterion: CriterionId,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub dyadic_blocks: Vec<f64>,
    pub verdict: Verdict,
    pub note: String,
}

impl SeriesDiagnostic {
    pub fn from_terms(criterion: CriterionId, terms: Vec<f64>, policy: &VerdictPolicy) -> Self {
        let Judgement { verdict, note } = judge_terms(&terms, policy);
        Self {
            criterion,
            partial_sums: partial_sums(&terms),
            dyadic_blocks: dyadic_blocks(&terms),
            terms,
            verdict,
            note,
        }
    }

    pub fn total(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

/// Re-derive the verdict of a diagnostic under `policy`.
pub fn verdict(diag: &SeriesDiagnostic, policy: &VerdictPolicy) -> Verdict {
    judge_terms(&diag.terms, policy).verdict
}

/// Series equivalent to criteria 1, 2, 4 and to square integrability:
/// `theta rho sqrt(N)`, `theta^2 rho sqrt(N)`, `theta sqrt(rho)`, `theta^2 rho`.
pub fn series_terms(
    criterion: CriterionId,
    family: &ParameterFamily,
    policy: &VerdictPolicy,
) -> Result<SeriesDiagnostic> {
    let (t, r, n) = (family.theta(), family.rho(), family.big_n());
    let term = |i: usize| -> f64 {
        match criterion {
            CriterionId::C1 => t[i] * r[i] * n[i].sqrt(),
            CriterionId::C2 => t[i] * t[i] * r[i] * n[i].sqrt(),
            CriterionId::C4 => t[i] * r[i].sqrt(),
            CriterionId::L2 => t[i] * t[i] * r[i],
            CriterionId::C3 => unreachable!(),
        }
    };
    if criterion == CriterionId::C3 {
        return Err(Error::Precondition("C3 terms are indexed by n; use mw_series_terms".into()));
    }
    let terms = (0..family.k()).map(term).collect();
    Ok(SeriesDiagnostic::from_terms(criterion, terms, policy))
}

/// `term_n = n^{-3/2} (sum_k theta_k^2 min(n, N_k) rho_k)^{1/2}` for `n = 1..=n_max`.
pub fn mw_series_terms(family: &ParameterFamily, n_max: usize, policy: &VerdictPolicy) -> Result<SeriesDiagnostic> {
    if n_max == 0 {
        return Err(Error::Precondition("n_max must be >= 1".into()));
    }
    let weights: Vec<f64> = (0..family.k()).map(|i| family.theta()[i].powi(2) * family.rho()[i]).collect();
    let terms = (1..=n_max)
        .map(|n| {
            let nf = n as f64;
            let inner: CompensatedSum = weights.iter().zip(family.big_n()).map(|(w, &bn)| w * nf.min(bn)).collect();
            nf.powf(-1.5) * inner.value().sqrt()
        })
        .collect();
    Ok(SeriesDiagnostic::from_terms(CriterionId::C3, terms, policy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTable {
    pub label: String,
    pub square_integrable: SeriesDiagnostic,
    pub rows: Vec<SeriesDiagnostic>,
    pub notes: Vec<String>,
}

impl ClassificationTable {
    pub fn verdict(&self, c: CriterionId) -> Option<Verdict> {
        if c == CriterionId::L2 {
            return Some(self.square_integrable.verdict);
        }
        self.rows.iter().find(|r| r.criterion == c).map(|r| r.verdict)
    }

    pub fn verdicts(&self) -> [Verdict; 4] {
        CriterionId::CRITERIA.map(|c| self.verdict(c).expect("all four rows present"))
    }
}

/// Four-criterion classification of a family; refuses when f is not in L2.
pub fn classification_table(
    family: &ParameterFamily,
    n_max: usize,
    policy: &VerdictPolicy,
) -> Result<ClassificationTable> {
    family.validate().into_result()?;
    let l2 = series_terms(CriterionId::L2, family, policy)?;
    if l2.verdict == Verdict::Divergent {
        return Err(Error::Precondition(format!(
            "{}: sum theta_k^2 rho_k diverges, f is not square integrable",
            family.label()
        )));
    }
    let rows = vec![
        series_terms(CriterionId::C1, family, policy)?,
        series_terms(CriterionId::C2, family, policy)?,
        mw_series_terms(family, n_max, policy)?,
        series_terms(CriterionId::C4, family, policy)?,
    ];
    let mut notes = vec![format!(
        "verdicts use dyadic blocks: ratio_max = {}, floor_factor = {}, window = {}, min_blocks = {}",
        policy.ratio_max, policy.floor_factor, policy.window, policy.min_blocks
    )];
    for d in std::iter::once(&l2).chain(&rows) {
        if d.verdict == Verdict::Inconclusive {
            notes.push(format!("{}: {}", d.criterion, d.note));
        }
    }
    Ok(ClassificationTable { label: family.label().to_string(), square_integrable: l2, rows, notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::*;

    fn ce(p: Preset, k: usize) -> ParameterFamily {
        make_preset(p, k).unwrap().construction().unwrap()
    }

    #[test]
    fn ce1_preset_values() {
        let f = ce(Preset::Ce1, 10);
        assert_eq!(&f.theta()[..4], &[2.0, 2.0, 8.0 / 3.0, 4.0]);
        assert_eq!(&f.rho()[..2], &[0.25, 1.0 / 16.0]);
        assert_eq!(f.big_n(), (1..=10).map(|k| k as f64).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn ce2_preset_values_and_cap() {
        let f = ce(Preset::Ce2, 3);
        assert_eq!(f.big_n(), &[16.0, 256.0, 4096.0]);
        assert_eq!(f.delays().unwrap(), vec![16, 256, 4096]);
        assert!(matches!(make_preset(Preset::Ce2, 41), Err(Error::Range(_))));
        assert!(ce(Preset::Ce2, 40).delay(40).is_err());
    }

    #[test]
    fn linear_preset() {
        let l = make_preset(Preset::Linear, 10).unwrap().linear().unwrap();
        assert_eq!(l.coeffs[0], 1.0);
        assert_eq!(l.coeffs[1], 2f64.powf(-1.5));
        assert_eq!(l.coeffs[9], 10f64.powf(-1.5));
        assert_eq!(l.coeff(0), 0.0);
        assert_eq!(l.coeff(11), 0.0);
    }

    #[test]
    fn validate_reports() {
        let r = ce(Preset::Ce1, 10).validate();
        assert!(r.passed());
        let s = r.checks.iter().find(|c| c.name == "sum_rho_below_one").unwrap().quantity;
        assert!((s - (1.0 - 4f64.powi(-10)) / 3.0).abs() < 1e-15);
        assert!(s < 1.0 / 3.0);

        let half = ParameterFamily::new("half", vec![1.0; 2], vec![0.5; 2], vec![1.0, 2.0], None).unwrap();
        let r = half.validate();
        assert_eq!(r.failures().len(), 1);
        assert_eq!(r.failures()[0].name, "sum_rho_below_one");

        let back = ParameterFamily::new("back", vec![1.0; 2], vec![0.1; 2], vec![3.0, 2.0], None).unwrap();
        let r = back.validate();
        assert_eq!(r.failures()[0].name, "big_n_strictly_increasing");
        assert!(r.into_result().is_err());
    }

    #[test]
    fn epsilon_choice() {
        let f = ce(Preset::Ce1, 10);
        assert_eq!(f.epsilon()[0], 0.25);
        for k in 1..=10 {
            let i = k - 1;
            let v = f.theta()[i] * f.big_n()[i] * f.epsilon()[i].sqrt();
            assert!(v <= 1.0 / (k * k) as f64 * (1.0 + 1e-12), "k={k}");
        }
        let g = ce(Preset::Ce2, 3);
        let theta2 = 4.0 / 2f64.powf(1.5);
        let oracle = 1.0 / (4.0 * theta2 * 256.0f64).powi(2);
        assert!((g.epsilon()[1] - oracle).abs() <= 1e-15 * oracle);
    }

    #[test]
    fn series_terms_match_closed_forms() {
        let p = VerdictPolicy::default();
        let f = ce(Preset::Ce1, 64);
        let c1 = series_terms(CriterionId::C1, &f, &p).unwrap();
        let c2 = series_terms(CriterionId::C2, &f, &p).unwrap();
        let c4 = series_terms(CriterionId::C4, &f, &p).unwrap();
        for k in 1..=64usize {
            let kf = k as f64;
            let i = k - 1;
            assert!((c1.terms[i] - 2f64.powi(-(k as i32)) / kf.sqrt()).abs() <= 1e-14 * c1.terms[i]);
            assert!((c2.terms[i] - kf.powf(-1.5)).abs() <= 1e-13 * c2.terms[i]);
            assert!((c4.terms[i] - 1.0 / kf).abs() <= 1e-14 * c4.terms[i]);
        }
        let g = ce(Preset::Ce2, 20);
        let c4 = series_terms(CriterionId::C4, &g, &p).unwrap();
        for k in 1..=20usize {
            assert!((c4.terms[k - 1] - (k as f64).powf(-1.5)).abs() <= 1e-14);
        }
    }

    #[test]
    fn ce1_c1_tail_is_tiny() {
        let p = VerdictPolicy::default();
        let a = series_terms(CriterionId::C1, &ce(Preset::Ce1, 64), &p).unwrap().total();
        let b = series_terms(CriterionId::C1, &ce(Preset::Ce1, 32), &p).unwrap().total();
        assert!((a - b).abs() < 2f64.powi(-30));
    }

    #[test]
    fn mw_terms_zero_theta() {
        let f = ce(Preset::Ce1, 8).scale_theta(0.0);
        let d = mw_series_terms(&f, 256, &VerdictPolicy::default()).unwrap();
        assert!(d.terms.iter().all(|&t| t == 0.0));
        assert_eq!(d.verdict, Convergent);
    }

    #[test]
    fn preset_classification() {
        let p = VerdictPolicy::default();
        let t1 = classification_table(&ce(Preset::Ce1, 64), 1 << 16, &p).unwrap();
        assert_eq!(t1.verdicts(), [Convergent, Convergent, Convergent, Divergent]);
        let t2 = classification_table(&ce(Preset::Ce2, 40), 1 << 16, &p).unwrap();
        assert_eq!(t2.verdicts(), [Divergent, Divergent, Divergent, Convergent]);
        let z = classification_table(&ce(Preset::Ce1, 64).scale_theta(0.0), 1 << 10, &p).unwrap();
        assert_eq!(z.verdicts(), [Convergent; 4]);
    }

    #[test]
    fn short_truncation_is_inconclusive_heavy() {
        let t = classification_table(&ce(Preset::Ce1, 2), 1 << 10, &VerdictPolicy::default()).unwrap();
        let inconclusive = t.verdicts().iter().filter(|&&v| v == Inconclusive).count();
        assert_eq!(inconclusive, 3);
        assert!(t.notes.iter().any(|n| n.contains("complete dyadic blocks")));
    }

    #[test]
    fn refuses_non_square_integrable() {
        // theta_k^2 rho_k = 1 for every k.
        let k = 64;
        let f = ParameterFamily::new(
            "heavy",
            (1..=k).map(|k| 2f64.powi(k)).collect(),
            (1..=k).map(|k| 4f64.powi(-k)).collect(),
            (1..=k).map(|k| k as f64).collect(),
            None,
        )
        .unwrap();
        assert!(matches!(classification_table(&f, 1024, &VerdictPolicy::default()), Err(Error::Precondition(_))));
    }
}
