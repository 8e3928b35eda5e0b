//! Closed-form security models per scheme, and the report type every route
//! (analytic, exhaustive, sampled, attack-measured) writes into.
//!
//! Four metrics are tracked. E_FC: fraction of all (input, key) pairs the
//! lock corrupts. t_SAT: minimum number of distinguishing input patterns a
//! SAT-style attack needs. E_APP: error rate of the best incorrect key.
//! E_REM: error rate left after stripping the keyed logic. Exact rational
//! forms are reported so oracle comparisons need no tolerance; where the
//! literature's simpler approximation differs from the exact count, both are
//! carried.

use crate::rational::{binomial, Rational};
use crate::schemes::tree::TreeGate;
use crate::schemes::{build_and_tree, SchemeConfig, SchemeError, TreeType};
use num::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no closed-form model: {0}")]
    Unsupported(String),
}

impl From<SchemeError> for MetricsError {
    fn from(e: SchemeError) -> Self {
        MetricsError::InvalidParams(e.to_string())
    }
}

/// Where a reported number came from. Later stages may overwrite earlier
/// ones but never the reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Sampled,
    AttackMeasured,
    Exhaustive,
}

impl Provenance {
    fn rank(self) -> u8 {
        match self {
            Provenance::Analytic => 0,
            Provenance::Sampled => 1,
            Provenance::AttackMeasured => 2,
            Provenance::Exhaustive => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceMap {
    pub e_fc: Provenance,
    pub t_sat: Provenance,
    pub e_app: Provenance,
    pub e_rem: Provenance,
}

/// A rate that is either an exact rational or an empirical interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateValue {
    Exact(Rational),
    Interval { lo: f64, hi: f64 },
}

impl RateValue {
    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            RateValue::Exact(r) => Some(r),
            RateValue::Interval { .. } => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TSatRepr {
    Marker(String),
    Min { min: Vec<Rational>, value: Rational },
    Value { value: Rational },
}

/// Lower bound on SAT-attack iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TSatRepr", try_from = "TSatRepr")]
pub enum TSatBound {
    /// min{args}; `value` is the evaluated minimum.
    Min { args: Vec<Rational>, value: Rational },
    Value(Rational),
    /// No usable lower bound — worst case can be a handful of iterations.
    NoGuarantee,
}

impl TSatBound {
    pub fn value(&self) -> Option<&Rational> {
        match self {
            TSatBound::Min { value, .. } | TSatBound::Value(value) => Some(value),
            TSatBound::NoGuarantee => None,
        }
    }

    fn min_of(args: Vec<Rational>) -> Self {
        let value = args.iter().cloned().reduce(Rational::min).expect("nonempty args");
        TSatBound::Min { args, value }
    }
}

impl From<TSatBound> for TSatRepr {
    fn from(b: TSatBound) -> Self {
        match b {
            TSatBound::Min { args, value } => TSatRepr::Min { min: args, value },
            TSatBound::Value(value) => TSatRepr::Value { value },
            TSatBound::NoGuarantee => TSatRepr::Marker("no-guarantee".into()),
        }
    }
}

impl TryFrom<TSatRepr> for TSatBound {
    type Error = String;
    fn try_from(r: TSatRepr) -> Result<Self, String> {
        match r {
            TSatRepr::Marker(s) if s == "no-guarantee" => Ok(TSatBound::NoGuarantee),
            TSatRepr::Marker(s) => Err(format!("unknown t_sat marker {s:?}")),
            TSatRepr::Min { min, value } => Ok(TSatBound::Min { args: min, value }),
            TSatRepr::Value { value } => Ok(TSatBound::Value(value)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AppRepr {
    Marker(String),
    Exact(Rational),
}

/// Closed-form E_APP, when one exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "AppRepr", try_from = "AppRepr")]
pub enum AppBound {
    Exact(Rational),
    NoClosedForm,
}

impl AppBound {
    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            AppBound::Exact(r) => Some(r),
            AppBound::NoClosedForm => None,
        }
    }
}

impl From<AppBound> for AppRepr {
    fn from(b: AppBound) -> Self {
        match b {
            AppBound::Exact(r) => AppRepr::Exact(r),
            AppBound::NoClosedForm => AppRepr::Marker("no-closed-form".into()),
        }
    }
}

impl TryFrom<AppRepr> for AppBound {
    type Error = String;
    fn try_from(r: AppRepr) -> Result<Self, String> {
        match r {
            AppRepr::Marker(s) if s == "no-closed-form" => Ok(AppBound::NoClosedForm),
            AppRepr::Marker(s) => Err(format!("unknown e_app marker {s:?}")),
            AppRepr::Exact(r) => Ok(AppBound::Exact(r)),
        }
    }
}

/// One scheme's security metrics with per-field provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scheme: String,
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    pub e_fc: RateValue,
    /// The literature's simplified E_FC, when it differs from the exact form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_fc_approx: Option<Rational>,
    pub t_sat: TSatBound,
    pub e_app: AppBound,
    /// The literature's simplified E_APP, when it differs from the exact form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_app_approx: Option<Rational>,
    pub e_rem: Rational,
    pub provenance: ProvenanceMap,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl MetricsReport {
    fn analytic_base(scheme: &str, params: serde_json::Value, n: Option<u32>) -> Self {
        MetricsReport {
            scheme: scheme.to_string(),
            params,
            n,
            e_fc: RateValue::Exact(Rational::zero()),
            e_fc_approx: None,
            t_sat: TSatBound::NoGuarantee,
            e_app: AppBound::NoClosedForm,
            e_app_approx: None,
            e_rem: Rational::zero(),
            provenance: ProvenanceMap {
                e_fc: Provenance::Analytic,
                t_sat: Provenance::Analytic,
                e_app: Provenance::Analytic,
                e_rem: Provenance::Analytic,
            },
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Record a measured E_FC; kept only if its provenance outranks (or ties)
    /// what is already there.
    pub fn observe_e_fc(&mut self, value: RateValue, prov: Provenance) {
        if prov.rank() >= self.provenance.e_fc.rank() {
            self.e_fc = value;
            self.provenance.e_fc = prov;
        }
    }

    pub fn observe_t_sat(&mut self, value: TSatBound, prov: Provenance) {
        if prov.rank() >= self.provenance.t_sat.rank() {
            self.t_sat = value;
            self.provenance.t_sat = prov;
        }
    }

    pub fn observe_e_app(&mut self, value: AppBound, prov: Provenance) {
        if prov.rank() >= self.provenance.e_app.rank() {
            self.e_app = value;
            self.provenance.e_app = prov;
        }
    }

    pub fn observe_e_rem(&mut self, value: Rational, prov: Provenance) {
        if prov.rank() >= self.provenance.e_rem.rank() {
            self.e_rem = value;
            self.provenance.e_rem = prov;
        }
    }
}

fn pow2_big(k: u32) -> BigUint {
    BigUint::from(1u8) << k
}

/// SARLock model: one corrupted input per incorrect key.
pub fn analytic_sarlock(n: u32, l: u32) -> Result<MetricsReport, MetricsError> {
    if l < 1 || l > n {
        return Err(MetricsError::InvalidParams(format!("need 1 <= l <= n, got l={l}, n={n}")));
    }
    let mut report = MetricsReport::analytic_base(
        "sarlock",
        serde_json::json!({ "l": l }),
        Some(n),
    );
    // (2^l − 1)·2^(n−l) corrupted pairs out of 2^(n+l).
    let errors = (pow2_big(l) - 1u8) * pow2_big(n - l);
    report.e_fc = RateValue::Exact(Rational::from_biguint(errors, pow2_big(n + l)));
    report.e_fc_approx = Some(Rational::pow2_inv(l));
    report.t_sat = TSatBound::min_of(vec![Rational::pow2(l), Rational::pow2(n)]);
    report.e_app = AppBound::Exact(Rational::pow2_inv(l));
    report.e_rem = Rational::zero();
    Ok(report)
}

fn dtl_onset(l: u32, x: TreeGate, layer: u32, count: u32) -> Result<BigUint, MetricsError> {
    let mut tree = build_and_tree(l)?;
    tree.replace(layer, count, x)?;
    Ok(tree.onset_count())
}

/// Diversified-tree model: the replacements widen the onset of the flip from
/// 1 to `onset` points per key, trading SAT resilience for corruption.
pub fn analytic_dtl(
    n: u32,
    l: u32,
    x: TreeGate,
    layer: u32,
    count: u32,
) -> Result<MetricsReport, MetricsError> {
    let config = SchemeConfig::Dtl { l, tree: TreeType::Sarlock, x, layer, count };
    config.validate()?;
    if l > n {
        return Err(MetricsError::InvalidParams(format!("need l <= n, got l={l}, n={n}")));
    }
    let onset = dtl_onset(l, x, layer, count)?;
    let mut report = MetricsReport::analytic_base(
        "dtl",
        serde_json::json!({ "l": l, "x": x, "layer": layer, "count": count }),
        Some(n),
    );
    // (2^l − 1) keys × onset points each, over the 2^(2l) cone/key grid.
    report.e_fc = RateValue::Exact(Rational::from_biguint(
        (pow2_big(l) - 1u8) * &onset,
        pow2_big(2 * l),
    ));
    report.e_fc_approx = Some(Rational::from_biguint(onset.clone(), pow2_big(l)));
    report.e_app = AppBound::Exact(Rational::from_biguint(onset.clone(), pow2_big(l)));
    if onset == BigUint::from(0u8) {
        report.t_sat = TSatBound::Value(Rational::zero());
        report.notes.push(
            "replacements zeroed the flip onset: every key is functionally correct".into(),
        );
    } else {
        let per_key = Rational::pow2(l) / Rational::from_biguint(onset, BigUint::from(1u8));
        report.t_sat = TSatBound::min_of(vec![per_key, Rational::pow2(n)]);
    }
    if x != TreeGate::Xor {
        report
            .notes
            .push("t_sat for non-XOR replacements is an order-of-magnitude scaling".into());
    }
    Ok(report)
}

/// Hamming-distance stripped-functionality model.
pub fn analytic_sfll_hd(n: u32, l: u32, h: u32) -> Result<MetricsReport, MetricsError> {
    if l < 1 || l > n {
        return Err(MetricsError::InvalidParams(format!("need 1 <= l <= n, got l={l}, n={n}")));
    }
    if h > l {
        return Err(MetricsError::InvalidParams(format!("need h <= l, got h={h}, l={l}")));
    }
    let c = binomial(u64::from(l), i64::from(h));
    let mut report = MetricsReport::analytic_base(
        "sfll_hd",
        serde_json::json!({ "l": l, "h": h }),
        Some(n),
    );
    // C(l,h)·(2^l − C(l,h)) corrupted (cone, key) pairs out of 2^(2l−1).
    report.e_fc = RateValue::Exact(Rational::from_biguint(
        &c * (pow2_big(l) - &c),
        pow2_big(2 * l - 1),
    ));

    // Exact E_APP: minimize the per-key rate over key distance x from k*.
    // A key at even distance x restores C(x, x/2)·C(l−x, h−x/2) of the
    // stripped patterns; each key corrupts 2·(C(l,h) − overlap) cone values.
    let mut best: Option<Rational> = None;
    for x in 1..=l {
        let overlap = if x % 2 == 0 {
            binomial(u64::from(x), i64::from(x / 2))
                * binomial(u64::from(l - x), i64::from(h) - i64::from(x / 2))
        } else {
            BigUint::from(0u8)
        };
        let rate = Rational::from_biguint((&c - overlap) * 2u8, pow2_big(l));
        best = Some(match best {
            None => rate,
            Some(b) => b.min(rate),
        });
    }
    report.e_app = AppBound::Exact(best.expect("l >= 1"));
    // The simplified form keeps only the x=2 overlap and scales by 2^n.
    let near = if l >= 2 {
        binomial(u64::from(l - 2), i64::from(h) - 1) * 2u8
    } else {
        BigUint::from(0u8)
    };
    report.e_app_approx = Some(Rational::from_biguint((&c - near.min(c.clone())) * 2u8, pow2_big(n)));

    report.e_rem = Rational::from_biguint(c, pow2_big(l));
    report.t_sat = TSatBound::NoGuarantee;
    report
        .notes
        .push("t_sat has no usable closed form; the greedy cover estimator is authoritative".into());
    Ok(report)
}

/// Interior key-gate insertion: no closed forms, only the observed
/// corruption band.
pub fn analytic_fll() -> MetricsReport {
    let mut report = MetricsReport::analytic_base("fll", serde_json::json!({}), None);
    report.e_fc = RateValue::Interval { lo: 0.3, hi: 0.5 };
    report.t_sat = TSatBound::NoGuarantee;
    report.e_app = AppBound::NoClosedForm;
    report.e_rem = Rational::zero();
    report.notes.push("e_fc is an empirical prior band, not a closed form".into());
    report
}

/// Corruption-maximizing replacement point: every full real pair of the leaf
/// layer swapped to XOR. Returns (e_fc at the point, t_sat at the point).
pub fn dtl_max_corruptibility(l: u32, n: u32) -> Result<(Rational, Rational), MetricsError> {
    if l < 2 {
        return Err(MetricsError::InvalidParams(format!("need l >= 2, got {l}")));
    }
    if l > n {
        return Err(MetricsError::InvalidParams(format!("need l <= n, got l={l}, n={n}")));
    }
    let count = l / 2;
    let onset = dtl_onset(l, TreeGate::Xor, 0, count)?;
    let e_fc = Rational::from_biguint(onset.clone(), pow2_big(l));
    let per_key = Rational::pow2(l) / Rational::from_biguint(onset, BigUint::from(1u8));
    let t_sat = per_key.min(Rational::pow2(n));
    Ok((e_fc, t_sat))
}

/// Closed-form dispatcher over scheme configurations.
pub fn analytic(n: u32, config: &SchemeConfig) -> Result<MetricsReport, MetricsError> {
    match config {
        SchemeConfig::Sarlock { l } => analytic_sarlock(n, *l),
        SchemeConfig::Dtl { l, tree: TreeType::Sarlock, x, layer, count } => {
            analytic_dtl(n, *l, *x, *layer, *count)
        }
        SchemeConfig::SfllHd { l, h } => analytic_sfll_hd(n, *l, *h),
        SchemeConfig::Fll { l, seed, .. } => {
            let mut report = analytic_fll();
            report.params = serde_json::json!({ "l": l, "seed": seed });
            report.n = Some(n);
            Ok(report)
        }
        SchemeConfig::Compound { .. } => Err(MetricsError::Unsupported(
            "compound locks have no closed-form model; use the exhaustive or attack routes".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact(report: &RateValue) -> &Rational {
        report.as_exact().expect("exact rate")
    }

    #[test]
    fn sarlock_cube_point() {
        let r = analytic_sarlock(3, 3).unwrap();
        assert_eq!(*exact(&r.e_fc), Rational::new(7, 64));
        assert_eq!(r.t_sat.value().unwrap(), &Rational::new(8, 1));
        assert_eq!(r.e_app.as_exact().unwrap(), &Rational::new(1, 8));
        assert!(r.e_rem.is_zero());
        assert_eq!(r.e_fc_approx, Some(Rational::new(1, 8)));
    }

    #[test]
    fn sarlock_wide_circuit() {
        let r = analytic_sarlock(8, 2).unwrap();
        assert_eq!(*exact(&r.e_fc), Rational::new(3, 16));
        assert_eq!(r.e_app.as_exact().unwrap(), &Rational::new(1, 4));
        assert_eq!(r.t_sat.value().unwrap(), &Rational::new(4, 1));
    }

    #[test]
    fn sarlock_square_takes_min_of_equal_args() {
        let r = analytic_sarlock(5, 5).unwrap();
        let TSatBound::Min { args, value } = &r.t_sat else { panic!("expected min") };
        assert_eq!(args, &vec![Rational::new(32, 1), Rational::new(32, 1)]);
        assert_eq!(value, &Rational::new(32, 1));
    }

    #[test]
    fn sarlock_bounds_checked() {
        assert!(analytic_sarlock(3, 4).is_err());
        assert!(analytic_sarlock(3, 0).is_err());
    }

    #[test]
    fn dtl_single_leaf_xor() {
        let r = analytic_dtl(8, 4, TreeGate::Xor, 0, 1).unwrap();
        assert_eq!(r.e_app.as_exact().unwrap(), &Rational::new(2, 16));
        assert_eq!(r.t_sat.value().unwrap(), &Rational::new(8, 1));
        assert_eq!(*exact(&r.e_fc), Rational::new(15 * 2, 256));
    }

    #[test]
    fn dtl_layer1_onset_six() {
        let r = analytic_dtl(8, 6, TreeGate::Xor, 1, 1).unwrap();
        assert_eq!(r.e_app.as_exact().unwrap(), &Rational::new(6, 64));
    }

    #[test]
    fn dtl_without_replacements_matches_sarlock() {
        let sar = analytic_sarlock(8, 4).unwrap();
        let dtl = analytic_dtl(8, 4, TreeGate::Xor, 1, 0).unwrap();
        assert_eq!(exact(&dtl.e_fc), exact(&sar.e_fc));
        assert_eq!(dtl.e_app, sar.e_app);
        assert_eq!(dtl.t_sat.value(), sar.t_sat.value());
        assert_eq!(dtl.e_rem, sar.e_rem);
    }

    #[test]
    fn dtl_non_xor_notes_the_scaling() {
        let r = analytic_dtl(8, 4, TreeGate::Nand, 0, 1).unwrap();
        assert!(r.notes.iter().any(|n| n.contains("order-of-magnitude")));
    }

    #[test]
    fn sfll_cube_point() {
        let r = analytic_sfll_hd(3, 3, 0).unwrap();
        assert_eq!(*exact(&r.e_fc), Rational::new(7, 32));
        assert_eq!(r.e_app.as_exact().unwrap(), &Rational::new(1, 4));
        assert_eq!(r.e_rem, Rational::new(1, 8));
        assert!(matches!(r.t_sat, TSatBound::NoGuarantee));
    }

    #[test]
    fn sfll_half_distance_has_a_perfect_wrong_key() {
        // At h = l/2 the bitwise-complement key restores every stripped
        // pattern, so the best wrong key is functionally correct.
        let r = analytic_sfll_hd(10, 4, 2).unwrap();
        assert!(r.e_app.as_exact().unwrap().is_zero());
    }

    #[test]
    fn sfll_symmetry_in_h() {
        for l in 1..=8u32 {
            for h in 0..=l {
                let a = analytic_sfll_hd(10, l, h).unwrap();
                let b = analytic_sfll_hd(10, l, l - h).unwrap();
                assert_eq!(exact(&a.e_fc), exact(&b.e_fc), "l={l} h={h}");
                assert_eq!(a.e_rem, b.e_rem, "l={l} h={h}");
            }
        }
    }

    #[test]
    fn sfll_h0_strips_one_point() {
        let r = analytic_sfll_hd(8, 5, 0).unwrap();
        assert_eq!(r.e_rem, Rational::new(1, 32));
    }

    #[test]
    fn fll_reports_an_interval_band() {
        let r = analytic_fll();
        assert_eq!(r.e_fc, RateValue::Interval { lo: 0.3, hi: 0.5 });
        assert!(matches!(r.t_sat, TSatBound::NoGuarantee));
        assert!(matches!(r.e_app, AppBound::NoClosedForm));
        assert!(r.e_rem.is_zero());
    }

    #[test]
    fn dtl_max_points() {
        let (e4, t4) = dtl_max_corruptibility(4, 10).unwrap();
        assert_eq!(e4, Rational::new(4, 16));
        assert_eq!(t4, Rational::new(4, 1));
        let (e2, _) = dtl_max_corruptibility(2, 10).unwrap();
        assert_eq!(e2, Rational::new(1, 2));
        let (e16, _) = dtl_max_corruptibility(16, 30).unwrap();
        assert_eq!(e16, Rational::new(1, 256));
    }

    #[test]
    fn rates_stay_in_unit_interval_across_the_grid() {
        let one = Rational::one();
        for n in 1..=10u32 {
            for l in 1..=n.min(8) {
                let r = analytic_sarlock(n, l).unwrap();
                assert!(*exact(&r.e_fc) <= one);
                for h in 0..=l {
                    let s = analytic_sfll_hd(n, l, h).unwrap();
                    assert!(*exact(&s.e_fc) <= one, "n={n} l={l} h={h}");
                    assert!(*s.e_app.as_exact().unwrap() <= one, "n={n} l={l} h={h}");
                    assert!(s.e_rem <= one);
                }
            }
        }
    }

    #[test]
    fn provenance_precedence_upgrades_but_never_downgrades() {
        let mut r = analytic_fll();
        r.observe_e_fc(RateValue::Exact(Rational::new(2, 5)), Provenance::Sampled);
        assert_eq!(r.provenance.e_fc, Provenance::Sampled);
        assert_eq!(*exact(&r.e_fc), Rational::new(2, 5));
        r.observe_e_fc(RateValue::Exact(Rational::new(1, 2)), Provenance::Exhaustive);
        assert_eq!(r.provenance.e_fc, Provenance::Exhaustive);
        // A later analytic value cannot displace the exhaustive one.
        r.observe_e_fc(RateValue::Interval { lo: 0.3, hi: 0.5 }, Provenance::Analytic);
        assert_eq!(*exact(&r.e_fc), Rational::new(1, 2));
    }

    #[test]
    fn report_json_shapes() {
        let r = analytic_sarlock(8, 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["scheme"], "sarlock");
        assert_eq!(v["params"]["l"], 2);
        assert_eq!(v["e_fc"]["num"], "3");
        assert_eq!(v["e_fc"]["den"], "16");
        assert!(v["t_sat"]["min"].is_array());
        assert_eq!(v["provenance"]["e_fc"], "analytic");

        let s = analytic_sfll_hd(3, 3, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["t_sat"], "no-guarantee");

        let f = analytic_fll();
        let v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
        assert_eq!(v["e_fc"]["lo"], 0.3);
        assert_eq!(v["e_app"], "no-closed-form");

        let back: MetricsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn compound_has_no_closed_form() {
        let config = SchemeConfig::Compound {
            children: vec![SchemeConfig::Sarlock { l: 2 }],
            combiner: Default::default(),
        };
        assert!(matches!(analytic(8, &config), Err(MetricsError::Unsupported(_))));
    }
}
