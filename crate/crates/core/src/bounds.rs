//! Blow-up lower bounds and their inversion against measured norm series.
//!
//! Every evaluator has the shape `c · (T* − t)^{−γ}`, possibly with a
//! logarithmic correction. The absolute constants are never known, so `c` is
//! always an input and only rates carry meaning.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `‖u‖_{Ḣ¹} ≥ c (T*−t)^{−1/4}`
    LerayH1,
    /// `‖u‖_{Lᵖ} ≥ c (T*−t)^{−(p−3)/(2p)}`, `3 < p < ∞`
    Lp,
    /// `‖u‖_{Ḣˢ} ≥ c (T*−t)^{−(2s−1)/4}`
    GigaHs,
    /// `‖u‖_{Ḣˢ} ≥ c ‖u₀‖₂^{(5−2s)/5} (T*−t)^{−2s/5}`, `s > 5/2`
    RssHighS,
    /// `‖u‖_{Ḣ^{3/2}} ≥ c ((T*−t)|log(T*−t)|)^{−1/2}`
    CmpH32Log,
    /// `‖u‖_{Ḣ^{5/2}} ≥ c ((T*−t)|log(T*−t)|)^{−1}`
    CmpH52Log,
    /// `‖u‖_{Ḣ^{3/2}} ≥ c (T*−t)^{−1/2}`
    MainH32,
    /// `‖u‖_{Ḣˢ} ≥ c (T*−t)^{−(2s−1)/4}`, `1/2 < s < 5/2`
    GeneralSRate,
}

impl BoundKind {
    pub const ALL: [BoundKind; 8] = [
        BoundKind::LerayH1,
        BoundKind::Lp,
        BoundKind::GigaHs,
        BoundKind::RssHighS,
        BoundKind::CmpH32Log,
        BoundKind::CmpH52Log,
        BoundKind::MainH32,
        BoundKind::GeneralSRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::LerayH1 => "leray_h1",
            BoundKind::Lp => "lp",
            BoundKind::GigaHs => "giga_hs",
            BoundKind::RssHighS => "rss_high_s",
            BoundKind::CmpH32Log => "cmp_h32_log",
            BoundKind::CmpH52Log => "cmp_h52_log",
            BoundKind::MainH32 => "main_h32",
            BoundKind::GeneralSRate => "general_s_rate",
        }
    }

    pub fn is_logarithmic(self) -> bool {
        matches!(self, BoundKind::CmpH32Log | BoundKind::CmpH52Log)
    }

    /// Whether the kind reads the `s` (or `p`) parameter.
    pub fn takes_param(self) -> bool {
        matches!(
            self,
            BoundKind::Lp | BoundKind::GigaHs | BoundKind::RssHighS | BoundKind::GeneralSRate
        )
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown bound kind '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub kind: BoundKind,
    /// `s`, or `p` for [`BoundKind::Lp`]; ignored by fixed-index kinds.
    pub param: f64,
    pub c: f64,
    pub t_star: f64,
    /// `‖u₀‖₂`, required by [`BoundKind::RssHighS`].
    pub aux: Option<f64>,
}

impl BoundSpec {
    pub fn new(kind: BoundKind, param: f64, c: f64, t_star: f64, aux: Option<f64>) -> Result<Self> {
        let spec = BoundSpec {
            kind,
            param,
            c,
            t_star,
            aux,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec for a kind with a fixed Sobolev index.
    pub fn fixed(kind: BoundKind, c: f64, t_star: f64) -> Result<Self> {
        BoundSpec::new(kind, f64::NAN, c, t_star, None)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if !(self.t_star > 0.0 && self.t_star.is_finite()) {
            return Err(Error::Config(format!("T* must be positive, got {}", self.t_star)));
        }
        let x = self.param;
        let ok = match self.kind {
            BoundKind::Lp => x > 3.0 && x.is_finite(),
            BoundKind::GigaHs | BoundKind::GeneralSRate => x > 0.5 && x < 2.5,
            BoundKind::RssHighS => x > 2.5 && x.is_finite(),
            _ => true,
        };
        if !ok {
            return Err(Error::Config(format!(
                "parameter {x} outside the admissible range of {}",
                self.kind
            )));
        }
        if self.kind == BoundKind::RssHighS {
            match self.aux {
                Some(e) if e >= 0.0 && e.is_finite() => {}
                _ => {
                    return Err(Error::Config(
                        "rss_high_s needs the initial energy norm ‖u₀‖₂".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Power `γ` of `(T* − t)^{−γ}`, ignoring logarithmic factors.
    pub fn rate(&self) -> f64 {
        let x = self.param;
        match self.kind {
            BoundKind::LerayH1 => 0.25,
            BoundKind::Lp => (x - 3.0) / (2.0 * x),
            BoundKind::GigaHs | BoundKind::GeneralSRate => (2.0 * x - 1.0) / 4.0,
            BoundKind::RssHighS => 2.0 * x / 5.0,
            BoundKind::CmpH32Log | BoundKind::MainH32 => 0.5,
            BoundKind::CmpH52Log => 1.0,
        }
    }
}

/// Value of the lower bound at time `t`.
pub fn eval_lower_bound(spec: &BoundSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t >= 0.0 && t < spec.t_star) {
        return Err(Error::Domain(format!(
            "t = {t} outside [0, T*) with T* = {}",
            spec.t_star
        )));
    }
    let gap = spec.t_star - t;
    let value = match spec.kind {
        BoundKind::CmpH32Log | BoundKind::CmpH52Log => {
            if gap >= 1.0 {
                return Err(Error::Domain(format!(
                    "logarithmic bound needs T* − t < 1, got {gap}"
                )));
            }
            let base = gap * gap.ln().abs();
            if spec.kind == BoundKind::CmpH32Log {
                spec.c / base.sqrt()
            } else {
                spec.c / base
            }
        }
        BoundKind::RssHighS => {
            let e = spec.aux.unwrap_or(0.0);
            spec.c * e.powf((5.0 - 2.0 * spec.param) / 5.0) / gap.powf(spec.rate())
        }
        _ => spec.c / gap.powf(spec.rate()),
    };
    Ok(value)
}

/// Saturated Riccati solution `y(t) = y₀ / (1 − a y₀ t)` of `ẏ = a y²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiccatiSolution {
    pub y0: f64,
    pub coef: f64,
    pub blowup_time: f64,
}

impl RiccatiSolution {
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t >= self.blowup_time {
            return Err(Error::Domain(format!(
                "t = {t} at or past the blow-up time {}",
                self.blowup_time
            )));
        }
        Ok(self.y0 / (1.0 - self.coef * self.y0 * t))
    }
}

pub fn riccati_solve(y0: f64, coef: f64) -> Result<RiccatiSolution> {
    if !(y0 > 0.0 && y0.is_finite() && coef > 0.0 && coef.is_finite()) {
        return Err(Error::Domain(format!(
            "Riccati data must be positive, got y0 = {y0}, coef = {coef}"
        )));
    }
    Ok(RiccatiSolution {
        y0,
        coef,
        blowup_time: 1.0 / (coef * y0),
    })
}

/// Samples `(t, y)` of `y = ‖u(t)‖²_{Ḣˢ}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormSeries {
    samples: Vec<(f64, f64)>,
}

impl NormSeries {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config(format!(
                    "sample times must increase strictly ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        for &(t, y) in &samples {
            if !(t.is_finite() && y.is_finite() && y >= 0.0) {
                return Err(Error::Config(format!("bad sample (t = {t}, y = {y})")));
            }
        }
        Ok(NormSeries { samples })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Earliest blow-up time compatible with `T* ≥ t + c/y(t)` at every sample.
///
/// A zero sample admits no finite blow-up time and yields `+∞`.
pub fn blowup_floor(series: &NormSeries, c_emp: f64) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Config("empty norm series".into()));
    }
    if !(c_emp > 0.0 && c_emp.is_finite()) {
        return Err(Error::Domain(format!("c must be positive, got {c_emp}")));
    }
    Ok(series
        .samples
        .iter()
        .map(|&(t, y)| if y == 0.0 { f64::INFINITY } else { t + c_emp / y })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Power law `y ≈ c_fit (T* − t)^{−alpha}` fitted in log–log coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub alpha: f64,
    pub c_fit: f64,
}

/// Least-squares regression of `log y` on `−log(T* − t)`.
pub fn fit_rate(series: &NormSeries, t_star: f64) -> Result<RateFit> {
    if series.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 samples, got {}",
            series.len()
        )));
    }
    let mut xs = Vec::with_capacity(series.len());
    let mut ys = Vec::with_capacity(series.len());
    for &(t, y) in series.samples() {
        if t >= t_star {
            return Err(Error::Domain(format!("sample t = {t} not before T* = {t_star}")));
        }
        if y <= 0.0 {
            return Err(Error::Fit(format!("nonpositive sample y = {y} at t = {t}")));
        }
        xs.push(-(t_star - t).ln());
        ys.push(y.ln());
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 1e-24 * m) {
        return Err(Error::Fit("sample times have no spread in log(T* − t)".into()));
    }
    let alpha = sxy / sxx;
    Ok(RateFit {
        alpha,
        c_fit: (my - alpha * mx).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        let main = BoundSpec::fixed(BoundKind::MainH32, 1.0, 1.0).unwrap();
        assert!((eval_lower_bound(&main, 0.75).unwrap() - 2.0).abs() < 1e-15);
        let leray = BoundSpec::fixed(BoundKind::LerayH1, 1.0, 1.0).unwrap();
        assert!((eval_lower_bound(&leray, 1.0 - 1.0 / 16.0).unwrap() - 2.0).abs() < 1e-15);
        let e = std::f64::consts::E;
        let cmp = BoundSpec::fixed(BoundKind::CmpH32Log, 1.0, 1.0).unwrap();
        let v = eval_lower_bound(&cmp, 1.0 - 1.0 / e).unwrap();
        assert!((v - e.sqrt()).abs() < 1e-12);
        assert!((v - 1.64872).abs() < 1e-5);
        let cmp52 = BoundSpec::fixed(BoundKind::CmpH52Log, 1.0, 1.0).unwrap();
        assert!((eval_lower_bound(&cmp52, 1.0 - 1.0 / e).unwrap() - e).abs() < 1e-12);
        let lp = BoundSpec::new(BoundKind::Lp, 6.0, 1.0, 1.0, None).unwrap();
        assert!((eval_lower_bound(&lp, 1.0 - 1.0 / 16.0).unwrap() - 2.0).abs() < 1e-12);
        let rss = BoundSpec::new(BoundKind::RssHighS, 5.0, 1.0, 1.0, Some(32.0)).unwrap();
        let expect = 32f64.powf(-1.0) / (0.5f64).powf(2.0);
        assert!((eval_lower_bound(&rss, 0.5).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn giga_meets_main_at_three_halves() {
        let giga = BoundSpec::new(BoundKind::GigaHs, 1.5, 2.0, 3.0, None).unwrap();
        let main = BoundSpec::fixed(BoundKind::MainH32, 2.0, 3.0).unwrap();
        for t in [0.0, 1.0, 2.5, 2.999] {
            assert_eq!(
                eval_lower_bound(&giga, t).unwrap(),
                eval_lower_bound(&main, t).unwrap()
            );
        }
    }

    #[test]
    fn domain_and_config_errors() {
        let main = BoundSpec::fixed(BoundKind::MainH32, 1.0, 1.0).unwrap();
        assert!(matches!(eval_lower_bound(&main, 1.0), Err(Error::Domain(_))));
        assert!(matches!(eval_lower_bound(&main, -0.1), Err(Error::Domain(_))));
        let cmp = BoundSpec::fixed(BoundKind::CmpH32Log, 1.0, 3.0).unwrap();
        assert!(matches!(eval_lower_bound(&cmp, 2.0), Err(Error::Domain(_))));
        assert!(matches!(eval_lower_bound(&cmp, 1.0), Err(Error::Domain(_))));
        assert!(BoundSpec::new(BoundKind::Lp, 3.0, 1.0, 1.0, None).is_err());
        assert!(BoundSpec::new(BoundKind::RssHighS, 3.0, 1.0, 1.0, None).is_err());
        assert!(BoundSpec::new(BoundKind::GeneralSRate, 2.5, 1.0, 1.0, None).is_err());
        assert!(BoundSpec::fixed(BoundKind::MainH32, 0.0, 1.0).is_err());
        assert!(BoundSpec::fixed(BoundKind::MainH32, 1.0, 0.0).is_err());
        assert_eq!("giga_hs".parse::<BoundKind>().unwrap(), BoundKind::GigaHs);
        assert!("nope".parse::<BoundKind>().is_err());
    }

    #[test]
    fn riccati_closed_form() {
        let r = riccati_solve(1.0, 1.0).unwrap();
        assert_eq!(r.blowup_time, 1.0);
        assert_eq!(r.eval(0.5).unwrap(), 2.0);
        assert_eq!(riccati_solve(2.0, 0.5).unwrap().blowup_time, 1.0);
        assert!(r.eval(1.0).is_err());
        assert!(riccati_solve(0.0, 1.0).is_err());
        assert!(riccati_solve(1.0, -1.0).is_err());
    }

    #[test]
    fn floors() {
        let exact: Vec<(f64, f64)> = (0..=90).map(|i| i as f64 / 100.0).map(|t| (t, 1.0 / (1.0 - t))).collect();
        let f = blowup_floor(&NormSeries::new(exact).unwrap(), 1.0).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
        let flat: Vec<(f64, f64)> = (0..=8).map(|i| (i as f64 * 0.25, 4.0)).collect();
        assert_eq!(blowup_floor(&NormSeries::new(flat).unwrap(), 1.0).unwrap(), 2.25);
        let zero = NormSeries::new(vec![(0.0, 1.0), (1.0, 0.0)]).unwrap();
        assert_eq!(blowup_floor(&zero, 1.0).unwrap(), f64::INFINITY);
        assert!(NormSeries::new(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(NormSeries::new(vec![(0.0, f64::NAN)]).is_err());
        assert!(blowup_floor(&NormSeries::new(vec![]).unwrap(), 1.0).is_err());
    }

    #[test]
    fn exact_power_laws() {
        for (gamma, c) in [(1.0, 1.0), (0.5, 3.0)] {
            let s: Vec<(f64, f64)> = (0..20)
                .map(|i| i as f64 * 0.045)
                .map(|t| (t, c * (1.0 - t).powf(-gamma)))
                .collect();
            let fit = fit_rate(&NormSeries::new(s).unwrap(), 1.0).unwrap();
            assert!((fit.alpha - gamma).abs() < 1e-10);
            assert!((fit.c_fit - c).abs() < 1e-9);
        }
        let few = NormSeries::new(vec![(0.0, 1.0), (0.1, 1.1)]).unwrap();
        assert!(matches!(fit_rate(&few, 1.0), Err(Error::Fit(_))));
    }
}
