//! Mixtures, expansion-pattern groups, the per-group models and the model
//! bundle that packages them with the two classification boundaries.

mod pipeline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curveproc::{ExpansionSeries, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::svm::{classify, LinearBoundary, DEFAULT_BOX_CONSTRAINT};

pub use pipeline::{
    cluster_groups, fit_pipeline, refit_r2_report, validate_holdout, ClusterStage, FitReport, GroupR2, GroupReport,
    HoldoutReport, PipelineConfig, PipelineFit, R2Report, SpecimenCheck,
};

pub const SCHEMA_VERSION: &str = "1.0";

/// Expansion-pattern group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupLabel {
    /// High speed, nonlinear curve; fails within a few years.
    HN,
    /// Moderate speed, linear curve; fails around twenty years.
    ML,
    /// Low speed, linear curve; fails late or not within the record.
    LL,
}

impl GroupLabel {
    pub const ALL: [GroupLabel; 3] = [GroupLabel::HN, GroupLabel::ML, GroupLabel::LL];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn model_form(self) -> ModelForm {
        match self {
            GroupLabel::HN => ModelForm::LogLinear,
            GroupLabel::ML | GroupLabel::LL => ModelForm::Linear,
        }
    }

    /// Regressors of the group's standard model, intercept last.
    pub fn default_terms(self) -> Vec<Term> {
        use MixVar::*;
        match self {
            GroupLabel::HN => vec![Term::TimeInteraction(CementContent), Term::Time, Term::Constant],
            GroupLabel::ML => vec![Term::TimeInteraction(Wc), Term::TimeInteraction(C3a), Term::Constant],
            GroupLabel::LL => vec![Term::TimeInteraction(Wc), Term::Constant],
        }
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupLabel::HN => "HN",
            GroupLabel::ML => "ML",
            GroupLabel::LL => "LL",
        })
    }
}

impl FromStr for GroupLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HN" => Ok(GroupLabel::HN),
            "ML" => Ok(GroupLabel::ML),
            "LL" => Ok(GroupLabel::LL),
            other => Err(Error::InvalidConfig(format!("unknown group '{other}'"))),
        }
    }
}

/// The seven mixture variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MixVar {
    Wc,
    C3a,
    C3s,
    C2s,
    C4af,
    CementContent,
    Air,
}

impl MixVar {
    pub const ALL: [MixVar; 7] = [
        MixVar::Wc,
        MixVar::C3a,
        MixVar::C3s,
        MixVar::C2s,
        MixVar::C4af,
        MixVar::CementContent,
        MixVar::Air,
    ];

    /// Column name in mixture tables.
    pub fn column(self) -> &'static str {
        match self {
            MixVar::Wc => "wc",
            MixVar::C3a => "c3a",
            MixVar::C3s => "c3s",
            MixVar::C2s => "c2s",
            MixVar::C4af => "c4af",
            MixVar::CementContent => "cement_content",
            MixVar::Air => "air",
        }
    }

    /// Short symbol used in equations and boundary axis names.
    pub fn symbol(self) -> &'static str {
        match self {
            MixVar::Wc => "WC",
            MixVar::C3a => "C3A",
            MixVar::C3s => "C3S",
            MixVar::C2s => "C2S",
            MixVar::C4af => "C4AF",
            MixVar::CementContent => "CC",
            MixVar::Air => "AIR",
        }
    }

    pub fn from_symbol(s: &str) -> Option<MixVar> {
        let s = s.trim();
        MixVar::ALL
            .into_iter()
            .find(|v| v.symbol().eq_ignore_ascii_case(s) || v.column().eq_ignore_ascii_case(s))
    }

    /// Admissible range and its description.
    pub fn range(self) -> (f64, f64, &'static str) {
        match self {
            MixVar::Wc => (0.0, 1.0, "(0, 1]"),
            MixVar::CementContent => (0.0, 1.0, "[0, 1]"),
            _ => (0.0, 100.0, "[0, 100]"),
        }
    }

    pub fn admits(self, value: f64) -> bool {
        let (lo, hi, _) = self.range();
        match self {
            MixVar::Wc => value > lo && value <= hi,
            _ => value >= lo && value <= hi,
        }
    }
}

impl TryFrom<String> for MixVar {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MixVar> for String {
    fn from(v: MixVar) -> String {
        v.symbol().to_string()
    }
}

impl FromStr for MixVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MixVar::from_symbol(s).ok_or_else(|| Error::InvalidConfig(format!("unknown mixture variable '{s}'")))
    }
}

/// One concrete mix proportion. Any variable may be missing; operations that
/// need one report `MissingField`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Mixture {
    pub id: String,
    /// Water-cement ratio.
    pub wc: Option<f64>,
    /// Clinker phases, percent of cement.
    pub c3a: Option<f64>,
    pub c3s: Option<f64>,
    pub c2s: Option<f64>,
    pub c4af: Option<f64>,
    /// Fraction 0-1.
    pub cement_content: Option<f64>,
    /// Percent.
    pub air: Option<f64>,
}

impl Mixture {
    pub fn new(id: impl Into<String>) -> Self {
        Mixture {
            id: id.into(),
            ..Mixture::default()
        }
    }

    pub fn with(mut self, var: MixVar, value: f64) -> Self {
        *self.slot(var) = Some(value);
        self
    }

    fn slot(&mut self, var: MixVar) -> &mut Option<f64> {
        match var {
            MixVar::Wc => &mut self.wc,
            MixVar::C3a => &mut self.c3a,
            MixVar::C3s => &mut self.c3s,
            MixVar::C2s => &mut self.c2s,
            MixVar::C4af => &mut self.c4af,
            MixVar::CementContent => &mut self.cement_content,
            MixVar::Air => &mut self.air,
        }
    }

    pub fn set(&mut self, var: MixVar, value: Option<f64>) {
        *self.slot(var) = value;
    }

    pub fn get(&self, var: MixVar) -> Option<f64> {
        match var {
            MixVar::Wc => self.wc,
            MixVar::C3a => self.c3a,
            MixVar::C3s => self.c3s,
            MixVar::C2s => self.c2s,
            MixVar::C4af => self.c4af,
            MixVar::CementContent => self.cement_content,
            MixVar::Air => self.air,
        }
    }

    pub fn require(&self, var: MixVar) -> Result<f64> {
        self.get(var).ok_or_else(|| Error::MissingField {
            mixture: self.id.clone(),
            field: var.column(),
        })
    }

    /// First present variable outside its admissible range.
    pub fn range_violation(&self) -> Option<(MixVar, f64)> {
        MixVar::ALL
            .into_iter()
            .find_map(|v| self.get(v).filter(|x| !v.admits(*x)).map(|x| (v, x)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelForm {
    /// `EXP = Σ αᵢ termᵢ`
    Linear,
    /// `ln(EXP) = Σ αᵢ termᵢ`
    LogLinear,
}

/// One regressor column of a group model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Term {
    /// Mixture variable times time, e.g. `WC*T`.
    TimeInteraction(MixVar),
    /// Time alone.
    Time,
    /// Intercept.
    Constant,
}

impl Term {
    pub fn value(self, mix: &Mixture, t: f64) -> Result<f64> {
        Ok(match self {
            Term::TimeInteraction(v) => mix.require(v)? * t,
            Term::Time => t,
            Term::Constant => 1.0,
        })
    }

    /// Coefficient of `t` this term contributes per unit coefficient.
    fn time_rate(self, mix: &Mixture) -> Result<f64> {
        Ok(match self {
            Term::TimeInteraction(v) => mix.require(v)?,
            Term::Time => 1.0,
            Term::Constant => 0.0,
        })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::TimeInteraction(v) => write!(f, "{}*T", v.symbol()),
            Term::Time => f.write_str("T"),
            Term::Constant => f.write_str("const"),
        }
    }
}

impl FromStr for Term {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("T") {
            return Ok(Term::Time);
        }
        if s.eq_ignore_ascii_case("const") {
            return Ok(Term::Constant);
        }
        s.strip_suffix("*T")
            .and_then(MixVar::from_symbol)
            .map(Term::TimeInteraction)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model term '{s}'")))
    }
}

impl TryFrom<String> for Term {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Term> for String {
    fn from(t: Term) -> String {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStatistics {
    pub r_squared: f64,
    pub residual_std: f64,
    pub t_statistics: Vec<Option<f64>>,
    pub n_observations: usize,
    #[serde(default)]
    pub dropped_nonpositive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupModel {
    pub group: GroupLabel,
    pub form: ModelForm,
    pub terms: Vec<Term>,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub fit: Option<FitStatistics>,
}

impl GroupModel {
    pub fn new(group: GroupLabel, terms: Vec<Term>, coefficients: Vec<f64>) -> Result<Self> {
        if terms.len() != coefficients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} terms, {} coefficients",
                terms.len(),
                coefficients.len()
            )));
        }
        Ok(GroupModel {
            group,
            form: group.model_form(),
            terms,
            coefficients,
            fit: None,
        })
    }

    /// `Σ αᵢ termᵢ(mix, t)`: the expansion for linear models, its log otherwise.
    pub fn linear_predictor(&self, mix: &Mixture, t: f64) -> Result<f64> {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(term, c)| Ok(c * term.value(mix, t)?))
            .sum()
    }

    /// `d/dt` of the linear predictor (it is affine in `t`).
    pub fn time_rate(&self, mix: &Mixture) -> Result<f64> {
        self.terms
            .iter()
            .zip(&self.coefficients)
            .map(|(term, c)| Ok(c * term.time_rate(mix)?))
            .sum()
    }

    pub fn predict(&self, mix: &Mixture, t: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(Error::NegativeTime(t));
        }
        let eta = self.linear_predictor(mix, t)?;
        Ok(match self.form {
            ModelForm::Linear => eta,
            ModelForm::LogLinear => eta.exp(),
        })
    }

    /// `"EXP = 0.0157*WC*T + 0.0305"` style rendering.
    pub fn equation(&self) -> String {
        let lhs = match self.form {
            ModelForm::Linear => "EXP",
            ModelForm::LogLinear => "ln(EXP)",
        };
        let mut rhs = String::new();
        for (term, &c) in self.terms.iter().zip(&self.coefficients) {
            let body = match term {
                Term::Constant => format!("{}", c.abs()),
                other => format!("{}*{other}", c.abs()),
            };
            match (rhs.is_empty(), c < 0.0) {
                (true, false) => rhs.push_str(&body),
                (true, true) => rhs.push_str(&format!("-{body}")),
                (false, false) => rhs.push_str(&format!(" + {body}")),
                (false, true) => rhs.push_str(&format!(" - {body}")),
            }
        }
        format!("{lhs} = {rhs}")
    }
}

/// First boundary (HN against the rest) with its axis-parallel simplification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstBoundary {
    pub svm: LinearBoundary,
    pub simplified: LinearBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProvenanceKind {
    PaperDefault,
    Fitted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    #[serde(default)]
    pub dataset_hash: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Time span (years) of the training records; predictions beyond it
    /// are extrapolations.
    #[serde(default)]
    pub training_time_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: String,
    /// Group models, in HN, ML, LL order when present.
    pub models: Vec<GroupModel>,
    pub boundary_first: Option<FirstBoundary>,
    pub boundary_second: Option<LinearBoundary>,
    pub provenance: Provenance,
    pub failure_threshold: f64,
    /// Set when some group or boundary is missing.
    #[serde(default)]
    pub partial: bool,
}

/// Decision values of both boundaries for one mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryValues {
    pub first: f64,
    pub first_simplified: f64,
    pub second: f64,
}

fn boundary_point(boundary: &LinearBoundary, mix: &Mixture) -> Result<[f64; 2]> {
    let mut point = [0.0; 2];
    for (p, name) in point.iter_mut().zip(&boundary.feature_names) {
        let var = MixVar::from_symbol(name)
            .ok_or_else(|| Error::InvalidConfig(format!("boundary axis '{name}' is not a mixture variable")))?;
        *p = mix.require(var)?;
    }
    Ok(point)
}

impl ModelBundle {
    pub fn model(&self, group: GroupLabel) -> Option<&GroupModel> {
        self.models.iter().find(|m| m.group == group)
    }

    fn require_model(&self, group: GroupLabel) -> Result<&GroupModel> {
        self.model(group)
            .ok_or_else(|| Error::InvalidConfig(format!("bundle has no model for group {group}")))
    }

    fn boundaries(&self) -> Result<(&FirstBoundary, &LinearBoundary)> {
        match (&self.boundary_first, &self.boundary_second) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::InvalidConfig("bundle has no classification boundaries".into())),
        }
    }

    pub fn boundary_values(&self, mix: &Mixture) -> Result<BoundaryValues> {
        let (first, second) = self.boundaries()?;
        Ok(BoundaryValues {
            first: first.svm.decision_value(boundary_point(&first.svm, mix)?),
            first_simplified: first.simplified.decision_value(boundary_point(&first.simplified, mix)?),
            second: second.decision_value(boundary_point(second, mix)?),
        })
    }
}

/// The published models and boundaries, with the published fit statistics.
pub fn paper_default_bundle() -> ModelBundle {
    use MixVar::*;
    let stats = |r2, sd, t: &[f64], n| FitStatistics {
        r_squared: r2,
        residual_std: sd,
        t_statistics: t.iter().copied().map(Some).collect(),
        n_observations: n,
        dropped_nonpositive: 0,
    };
    let hn = GroupModel {
        group: GroupLabel::HN,
        form: ModelForm::LogLinear,
        terms: vec![Term::TimeInteraction(CementContent), Term::Time, Term::Constant],
        coefficients: vec![11.20, -5.68, -3.66],
        fit: Some(stats(0.7256, 0.3550, &[7.345, -6.323, -77.691], 517)),
    };
    let ml = GroupModel {
        group: GroupLabel::ML,
        form: ModelForm::Linear,
        terms: vec![Term::TimeInteraction(Wc), Term::TimeInteraction(C3a), Term::Constant],
        coefficients: vec![0.0293, 0.000975, 0.0216],
        fit: Some(stats(0.9197, 0.0015, &[39.704, 14.427, 12.197], 870)),
    };
    let ll = GroupModel {
        group: GroupLabel::LL,
        form: ModelForm::Linear,
        terms: vec![Term::TimeInteraction(Wc), Term::Constant],
        coefficients: vec![0.0157, 0.0305],
        fit: Some(stats(0.7735, 0.0021, &[92.086, 25.073], 2545)),
    };
    let c = DEFAULT_BOX_CONSTRAINT;
    let first = FirstBoundary {
        svm: LinearBoundary::new(["C3A", "WC"], [1.0, 1.241], -8.697, c).expect("published boundary"),
        simplified: LinearBoundary::new(["C3A", "WC"], [1.0, 0.0], -8.00, c).expect("published boundary"),
    };
    let second = LinearBoundary::new(["C3S", "WC"], [1.0, 387.3], -233.6, c).expect("published boundary");
    ModelBundle {
        schema_version: SCHEMA_VERSION.to_string(),
        models: vec![hn, ml, ll],
        boundary_first: Some(first),
        boundary_second: Some(second),
        provenance: Provenance {
            kind: ProvenanceKind::PaperDefault,
            dataset_hash: None,
            seed: None,
            training_time_range: None,
        },
        failure_threshold: DEFAULT_THRESHOLD,
        partial: false,
    }
}

/// Group of a mixture from its material properties alone.
///
/// HN when the first boundary's value is strictly positive (the simplified
/// form reads "C3A exceeds the threshold"); otherwise ML when the second
/// boundary's value is `≥ 0`, else LL.
pub fn classify_mixture(mix: &Mixture, bundle: &ModelBundle, use_simplified_first: bool) -> Result<GroupLabel> {
    let (first, second) = bundle.boundaries()?;
    let first = if use_simplified_first { &first.simplified } else { &first.svm };
    if first.decision_value(boundary_point(first, mix)?) > 0.0 {
        return Ok(GroupLabel::HN);
    }
    Ok(if classify(second, boundary_point(second, mix)?) > 0 {
        GroupLabel::ML
    } else {
        GroupLabel::LL
    })
}

/// Expansion (percent) at time `t` years under the given group's model.
pub fn predict_expansion(mix: &Mixture, group: GroupLabel, bundle: &ModelBundle, t: f64) -> Result<f64> {
    bundle.require_model(group)?.predict(mix, t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedCurve {
    pub group: GroupLabel,
    pub series: ExpansionSeries,
}

/// Classifies the mixture and samples its model on `0, step, …` up to `horizon`.
pub fn predict_curve(
    mix: &Mixture,
    bundle: &ModelBundle,
    horizon: f64,
    step: f64,
    use_simplified_first: bool,
) -> Result<PredictedCurve> {
    if !(horizon > 0.0 && horizon.is_finite()) || !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "horizon and step must be positive (horizon {horizon}, step {step})"
        )));
    }
    let group = classify_mixture(mix, bundle, use_simplified_first)?;
    let model = bundle.require_model(group)?;
    let count = (horizon / step * (1.0 + 1e-12)).floor() as usize;
    let times: Vec<f64> = (0..=count).map(|i| i as f64 * step).collect();
    let values = times.iter().map(|&t| model.predict(mix, t)).collect::<Result<Vec<_>>>()?;
    Ok(PredictedCurve {
        group,
        series: ExpansionSeries::new(mix.id.clone(), times, values)?,
    })
}

/// Time (years) at which the group model reaches the bundle's failure
/// threshold.
pub fn predicted_failure_time(mix: &Mixture, group: GroupLabel, bundle: &ModelBundle) -> Result<f64> {
    let model = bundle.require_model(group)?;
    let threshold = bundle.failure_threshold;
    let start = model.predict(mix, 0.0)?;
    if start >= threshold {
        return Err(Error::AlreadyFailed(start));
    }
    let rate = model.time_rate(mix)?;
    if rate <= 0.0 {
        return Err(Error::NonIncreasing(group.to_string()));
    }
    let target = match model.form {
        ModelForm::Linear => threshold,
        ModelForm::LogLinear => threshold.ln(),
    };
    Ok((target - model.linear_predictor(mix, 0.0)?) / rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use MixVar::*;

    fn mix(pairs: &[(MixVar, f64)]) -> Mixture {
        pairs.iter().fold(Mixture::new("m"), |m, &(v, x)| m.with(v, x))
    }

    #[test]
    fn default_bundle_coefficients() {
        let b = paper_default_bundle();
        assert_eq!(b.model(GroupLabel::LL).unwrap().coefficients, vec![0.0157, 0.0305]);
        assert_eq!(b.model(GroupLabel::ML).unwrap().coefficients, vec![0.0293, 0.000975, 0.0216]);
        assert_eq!(b.model(GroupLabel::HN).unwrap().coefficients, vec![11.20, -5.68, -3.66]);
        let second = b.boundary_second.as_ref().unwrap();
        assert_eq!((second.weights, second.bias), ([1.0, 387.3], -233.6));
        assert_eq!(second.feature_names, ["C3S".to_string(), "WC".to_string()]);
        assert_eq!(b.provenance.kind, ProvenanceKind::PaperDefault);
        assert!(!b.partial);
    }

    #[test]
    fn classification_examples() {
        let b = paper_default_bundle();
        let hn = mix(&[(C3a, 9.0), (Wc, 0.5), (C3s, 40.0)]);
        let ml = mix(&[(C3a, 5.1), (Wc, 0.481), (C3s, 50.0)]);
        let ll = mix(&[(C3a, 5.0), (Wc, 0.45), (C3s, 55.0)]);
        for simplified in [true, false] {
            assert_eq!(classify_mixture(&hn, &b, simplified).unwrap(), GroupLabel::HN);
            assert_eq!(classify_mixture(&ml, &b, simplified).unwrap(), GroupLabel::ML);
            assert_eq!(classify_mixture(&ll, &b, simplified).unwrap(), GroupLabel::LL);
        }
        let v = b.boundary_values(&ml).unwrap();
        assert!((v.second - 2.6913).abs() < 1e-10);
    }

    #[test]
    fn simplified_threshold_is_strict() {
        let b = paper_default_bundle();
        let at = mix(&[(C3a, 8.0), (Wc, 0.5), (C3s, 60.0)]);
        assert_eq!(classify_mixture(&at, &b, true).unwrap(), GroupLabel::ML);
    }

    #[test]
    fn missing_field() {
        let b = paper_default_bundle();
        let m = mix(&[(Wc, 0.49)]);
        assert!(matches!(
            classify_mixture(&m, &b, true),
            Err(Error::MissingField { field: "c3a", .. })
        ));
        assert!(matches!(
            predict_expansion(&m, GroupLabel::HN, &b, 1.0),
            Err(Error::MissingField { field: "cement_content", .. })
        ));
    }

    #[test]
    fn published_predictions() {
        let b = paper_default_bundle();
        let ll = predict_expansion(&mix(&[(Wc, 0.49)]), GroupLabel::LL, &b, 40.0).unwrap();
        // 0.0157·19.6 + 0.0305
        assert!((ll - 0.33822).abs() < 1e-12);
        let ml = predict_expansion(&mix(&[(Wc, 0.481), (C3a, 5.1)]), GroupLabel::ML, &b, 20.0).unwrap();
        assert!((ml - 0.402916).abs() < 1e-12);
        let hn = predict_expansion(&mix(&[(CementContent, 0.589)]), GroupLabel::HN, &b, 5.0).unwrap();
        assert!((hn - 0.924f64.exp()).abs() < 1e-9);
        assert!(matches!(
            predict_expansion(&mix(&[(Wc, 0.49)]), GroupLabel::LL, &b, -1.0),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn curve_sampling() {
        let b = paper_default_bundle();
        let m = mix(&[(Wc, 0.49), (C3a, 5.0), (C3s, 30.0)]);
        let curve = predict_curve(&m, &b, 40.0, 10.0, true).unwrap();
        assert_eq!(curve.group, GroupLabel::LL);
        let want = [0.0305, 0.10743, 0.18436, 0.26129, 0.33822];
        assert_eq!(curve.series.times(), &[0.0, 10.0, 20.0, 30.0, 40.0]);
        for (a, b) in curve.series.values().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        let short = predict_curve(&m, &b, 5.0, 10.0, true).unwrap();
        assert_eq!(short.series.times(), &[0.0]);
        assert_eq!(short.series.values(), &[0.0305]);
        assert!(predict_curve(&m, &b, 40.0, 0.0, true).is_err());
    }

    #[test]
    fn failure_time_inversion() {
        let b = paper_default_bundle();
        let t = predicted_failure_time(&mix(&[(Wc, 0.49)]), GroupLabel::LL, &b).unwrap();
        assert!((t - 0.4695 / (0.0157 * 0.49)).abs() < 1e-9);
        assert!((t - 61.03).abs() < 0.01);
        let t = predicted_failure_time(&mix(&[(Wc, 0.481), (C3a, 5.1)]), GroupLabel::ML, &b).unwrap();
        assert!((t - 25.09).abs() < 0.01);
        let t = predicted_failure_time(&mix(&[(CementContent, 0.589)]), GroupLabel::HN, &b).unwrap();
        assert!((t - (0.5f64.ln() + 3.66) / (11.20 * 0.589 - 5.68)).abs() < 1e-12);
        assert!((t - 3.236).abs() < 1e-3);
    }

    #[test]
    fn failure_time_errors() {
        let b = paper_default_bundle();
        // 11.2 * 0.5 - 5.68 < 0: HN model decays
        assert!(matches!(
            predicted_failure_time(&mix(&[(CementContent, 0.5)]), GroupLabel::HN, &b),
            Err(Error::NonIncreasing(_))
        ));
        let mut fast = b.clone();
        fast.models[2].coefficients[1] = 0.6;
        assert!(matches!(
            predicted_failure_time(&mix(&[(Wc, 0.49)]), GroupLabel::LL, &fast),
            Err(Error::AlreadyFailed(_))
        ));
    }

    #[test]
    fn term_names_round_trip() {
        for t in [Term::TimeInteraction(CementContent), Term::Time, Term::Constant, Term::TimeInteraction(C4af)] {
            assert_eq!(t.to_string().parse::<Term>().unwrap(), t);
        }
        assert!("XYZ*T".parse::<Term>().is_err());
    }

    #[test]
    fn equations_render() {
        let b = paper_default_bundle();
        assert_eq!(b.model(GroupLabel::LL).unwrap().equation(), "EXP = 0.0157*WC*T + 0.0305");
        assert_eq!(
            b.model(GroupLabel::HN).unwrap().equation(),
            "ln(EXP) = 11.2*CC*T - 5.68*T - 3.66"
        );
    }
}
