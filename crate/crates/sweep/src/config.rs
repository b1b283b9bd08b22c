//! Sweep configuration: a TOML file with one block per concern and the
//! units spelled out in the key names.
//!
//! ```toml
//! methods = ["modified", "previous"]
//!
//! [model]
//! kind = "two-photon"
//! delta_over_2pi_MHz = 0.0
//! kerr_over_2pi_MHz = 17.0
//! dim = 40
//! n_keep = 14
//!
//! [loss]
//! kappa_ex_over_2pi_MHz = 1.0
//! kappa_int_over_2pi_MHz = 0.45
//!
//! [probe]
//! measurement = "reflection"
//! start_over_2pi_MHz = -140.0
//! stop_over_2pi_MHz = -100.0
//! count = 401
//!
//! [pump]
//! values_over_2pi_MHz = [68.0]
//!
//! [output]
//! directory = "out/example"
//! formats = ["csv", "svg"]
//! ```
//!
//! Probe frequencies are `(ω_in − ω_p/k)/2π` for a `k`-photon pump, i.e.
//! the rotating-frame detuning `ω̃_in`. With `axis = "detuning-plus-2p"` the
//! grid and all written frequencies are shifted by `+2p`.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;
use std::str::FromStr;

use kpo_core::spectrum::{Measurement, Method};
use kpo_core::{DriveKind, LossSpec, TransitionQuad};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::SweepError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMethod {
    Core(Method),
    /// Time-domain integration of the driven master equation.
    Oracle,
}

impl SweepMethod {
    pub fn name(self) -> &'static str {
        match self {
            SweepMethod::Core(m) => m.name(),
            SweepMethod::Oracle => "oracle",
        }
    }

    fn two_photon_only(self) -> bool {
        matches!(self, SweepMethod::Core(Method::Analytic2x2 | Method::AnalyticLargePump))
    }
}

impl fmt::Display for SweepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "oracle" {
            return Ok(SweepMethod::Oracle);
        }
        s.parse::<Method>().map(SweepMethod::Core).map_err(|_| {
            let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).chain(["oracle"]).collect();
            format!("unknown method `{s}` (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Detuning,
    DetuningPlus2p,
}

impl Axis {
    /// Displayed coordinate of the detuning `omega` at pump `p`.
    pub fn to_axis(self, omega: f64, p: f64) -> f64 {
        match self {
            Axis::Detuning => omega,
            Axis::DetuningPlus2p => omega + 2.0 * p,
        }
    }

    pub fn from_axis(self, x: f64, p: f64) -> f64 {
        match self {
            Axis::Detuning => x,
            Axis::DetuningPlus2p => x - 2.0 * p,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelBlock {
    #[serde(serialize_with = "kind_name")]
    pub kind: DriveKind,
    pub delta: f64,
    pub kerr: f64,
    pub dim: usize,
    pub n_keep: usize,
}

fn kind_name<S: serde::Serializer>(k: &DriveKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(k.name())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeBlock {
    #[serde(serialize_with = "measurement_name")]
    pub measurement: Measurement,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub axis: Axis,
}

fn measurement_name<S: serde::Serializer>(m: &Measurement, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&m.to_string())
}

impl ProbeBlock {
    /// Grid in axis coordinates.
    pub fn axis_values(&self) -> Vec<f64> {
        linspace(self.start, self.stop, self.count)
    }

    /// Grid as rotating-frame detunings at pump `p`.
    pub fn detunings(&self, p: f64) -> Vec<f64> {
        self.axis_values().into_iter().map(|x| self.axis.from_axis(x, p)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleBlock {
    /// `Ω/κ_tot`.
    pub amplitude_ratio: f64,
    /// Probe points used by `oracle-check`, spread evenly over the probe grid.
    pub points: usize,
    pub periods: usize,
    /// Discarded transient in units of `1/κ_tot`.
    pub transient: f64,
    /// Relative tolerance per element for `oracle-check`.
    pub tolerance: f64,
    /// Elements below this magnitude are not compared.
    pub floor: f64,
}

impl Default for OracleBlock {
    fn default() -> Self {
        Self { amplitude_ratio: 1e-2, points: 10, periods: 200, transient: 15.0, tolerance: 1e-2, floor: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub csv: bool,
    pub svg: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub model: ModelBlock,
    pub loss: LossSpec<f64>,
    pub probe: Option<ProbeBlock>,
    pub pumps: Vec<f64>,
    pub methods: Vec<SweepMethod>,
    pub output: OutputBlock,
    pub offdiag: Vec<(usize, usize)>,
    pub oracle: OracleBlock,
    pub quad: TransitionQuad,
}

/// Fields that determine the numbers written; hashed into the manifest.
#[derive(Serialize)]
struct Physics<'a> {
    model: &'a ModelBlock,
    kappa_ex: f64,
    kappa_int: f64,
    probe: &'a Option<ProbeBlock>,
    pumps: &'a [f64],
    methods: Vec<&'static str>,
    offdiag: &'a [(usize, usize)],
    oracle: &'a OracleBlock,
    quad: [usize; 4],
}

impl SweepConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, SweepError> {
        let src = std::fs::read_to_string(path)
            .map_err(|source| SweepError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&src, &path.display().to_string())
    }

    /// Parses and validates `src`; `origin` prefixes error messages.
    pub fn parse(src: &str, origin: &str) -> Result<Self, SweepError> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| {
            let span = e.span().unwrap_or(0..0);
            anchored(src, origin, span, e.message().to_string())
        })?;
        raw.validate(src, origin)
    }

    pub fn probe(&self) -> Result<&ProbeBlock, SweepError> {
        self.probe
            .as_ref()
            .ok_or_else(|| SweepError::Usage("this command needs a [probe] block".into()))
    }

    /// Replaces the configured methods; an empty slice keeps them.
    pub fn override_methods(&mut self, methods: &[SweepMethod]) -> Result<(), SweepError> {
        if methods.is_empty() {
            return Ok(());
        }
        if let Some(m) = methods.iter().find(|m| m.two_photon_only() && self.model.kind != DriveKind::TwoPhoton) {
            return Err(SweepError::Usage(format!("method `{m}` needs a two-photon model")));
        }
        self.methods = methods.to_vec();
        Ok(())
    }

    /// SHA-256 of the physics-relevant fields (everything except `[output]`).
    pub fn physics_hash(&self) -> String {
        let q = self.quad;
        let physics = Physics {
            model: &self.model,
            kappa_ex: self.loss.kappa_ex,
            kappa_int: self.loss.kappa_int,
            probe: &self.probe,
            pumps: &self.pumps,
            methods: self.methods.iter().map(|m| m.name()).collect(),
            offdiag: &self.offdiag,
            oracle: &self.oracle,
            quad: [q.l0, q.l1, q.l2, q.l3],
        };
        let json = serde_json::to_string(&physics).expect("physics block serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    pub fn max_pump(&self) -> f64 {
        self.pumps.iter().copied().fold(0.0, f64::max)
    }
}

pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count).map(|i| if i + 1 == count { stop } else { start + step * i as f64 }).collect()
        }
    }
}

fn logspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), count)
        .into_iter()
        .enumerate()
        .map(|(i, x)| if i == 0 { start } else if i + 1 == count { stop } else { x.exp() })
        .collect()
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn anchored(src: &str, origin: &str, span: Range<usize>, message: String) -> SweepError {
    let (line, column) = line_col(src, span.start);
    SweepError::Config { origin: origin.to_string(), line, column, message }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    methods: Option<Spanned<Vec<Spanned<String>>>>,
    model: RawModel,
    loss: RawLoss,
    probe: Option<RawProbe>,
    pump: Spanned<RawPump>,
    output: Option<RawOutput>,
    offdiag: Option<RawOffdiag>,
    oracle: Option<RawOracle>,
    analytic: Option<RawAnalytic>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Spanned<String>,
    #[serde(rename = "delta_over_2pi_MHz")]
    delta: Spanned<f64>,
    #[serde(rename = "kerr_over_2pi_MHz")]
    kerr: Spanned<f64>,
    dim: Spanned<usize>,
    n_keep: Spanned<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoss {
    #[serde(rename = "kappa_ex_over_2pi_MHz")]
    kappa_ex: Spanned<f64>,
    #[serde(rename = "kappa_int_over_2pi_MHz")]
    kappa_int: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProbe {
    measurement: Option<Spanned<String>>,
    #[serde(rename = "start_over_2pi_MHz")]
    start: Spanned<f64>,
    #[serde(rename = "stop_over_2pi_MHz")]
    stop: Spanned<f64>,
    count: Spanned<usize>,
    axis: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    #[serde(rename = "values_over_2pi_MHz")]
    values: Option<Spanned<Vec<f64>>>,
    #[serde(rename = "start_over_2pi_MHz")]
    start: Option<Spanned<f64>>,
    #[serde(rename = "stop_over_2pi_MHz")]
    stop: Option<Spanned<f64>>,
    count: Option<Spanned<usize>>,
    spacing: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<String>,
    formats: Option<Spanned<Vec<Spanned<String>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOffdiag {
    elements: Spanned<Vec<[usize; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    amplitude_ratio: Option<Spanned<f64>>,
    points: Option<Spanned<usize>>,
    periods: Option<Spanned<usize>>,
    #[serde(rename = "transient_over_kappa")]
    transient: Option<Spanned<f64>>,
    tolerance: Option<Spanned<f64>>,
    floor: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalytic {
    levels: Spanned<[usize; 4]>,
}

struct Checker<'a> {
    src: &'a str,
    origin: &'a str,
}

impl Checker<'_> {
    fn fail<T>(&self, span: Range<usize>, message: impl Into<String>) -> Result<T, SweepError> {
        Err(anchored(self.src, self.origin, span, message.into()))
    }

    fn finite(&self, v: &Spanned<f64>, name: &str) -> Result<f64, SweepError> {
        if v.get_ref().is_finite() {
            Ok(*v.get_ref())
        } else {
            self.fail(v.span(), format!("`{name}` must be finite"))
        }
    }

    fn positive(&self, v: &Spanned<f64>, name: &str) -> Result<f64, SweepError> {
        let x = self.finite(v, name)?;
        if x > 0.0 {
            Ok(x)
        } else {
            self.fail(v.span(), format!("`{name}` must be positive"))
        }
    }
}

impl RawConfig {
    fn validate(self, src: &str, origin: &str) -> Result<SweepConfig, SweepError> {
        let ck = Checker { src, origin };

        let m = &self.model;
        let kind: DriveKind = match m.kind.get_ref().parse() {
            Ok(k) => k,
            Err(e) => return ck.fail(m.kind.span(), e.to_string()),
        };
        let delta = ck.finite(&m.delta, "delta_over_2pi_MHz")?;
        let kerr = ck.finite(&m.kerr, "kerr_over_2pi_MHz")?;
        let dim = *m.dim.get_ref();
        let n_keep = *m.n_keep.get_ref();
        if n_keep < 2 || n_keep > dim {
            return ck.fail(m.n_keep.span(), format!("`n_keep` must lie in 2..={dim}"));
        }

        let kappa_ex = *self.loss.kappa_ex.get_ref();
        let kappa_int = *self.loss.kappa_int.get_ref();
        for (v, name) in [(&self.loss.kappa_ex, "kappa_ex_over_2pi_MHz"), (&self.loss.kappa_int, "kappa_int_over_2pi_MHz")] {
            let x = ck.finite(v, name)?;
            if x < 0.0 {
                return ck.fail(v.span(), format!("`{name}` must be non-negative"));
            }
        }
        if kappa_ex + kappa_int <= 0.0 {
            return ck.fail(self.loss.kappa_ex.span(), "total loss rate must be positive");
        }
        let loss = LossSpec::new(kappa_ex, kappa_int)
            .map_err(|e| anchored(src, origin, self.loss.kappa_ex.span(), e.to_string()))?;

        let probe = match &self.probe {
            None => None,
            Some(p) => {
                let measurement = match &p.measurement {
                    None => Measurement::Reflection,
                    Some(s) => match s.get_ref().parse() {
                        Ok(m) => m,
                        Err(e) => return ck.fail(s.span(), format!("{e}")),
                    },
                };
                let axis = match &p.axis {
                    None => Axis::Detuning,
                    Some(s) => match s.get_ref().as_str() {
                        "detuning" => Axis::Detuning,
                        "detuning-plus-2p" => Axis::DetuningPlus2p,
                        other => {
                            return ck.fail(
                                s.span(),
                                format!("unknown axis `{other}` (expected detuning or detuning-plus-2p)"),
                            )
                        }
                    },
                };
                if *p.count.get_ref() == 0 {
                    return ck.fail(p.count.span(), "probe grid is empty");
                }
                Some(ProbeBlock {
                    measurement,
                    start: ck.finite(&p.start, "start_over_2pi_MHz")?,
                    stop: ck.finite(&p.stop, "stop_over_2pi_MHz")?,
                    count: *p.count.get_ref(),
                    axis,
                })
            }
        };

        let pumps = self.pump_values(&ck)?;

        let mut methods = Vec::new();
        if let Some(list) = &self.methods {
            if list.get_ref().is_empty() {
                return ck.fail(list.span(), "`methods` is empty");
            }
            for s in list.get_ref() {
                let method: SweepMethod = match s.get_ref().parse() {
                    Ok(m) => m,
                    Err(e) => return ck.fail(s.span(), e),
                };
                if method.two_photon_only() && kind != DriveKind::TwoPhoton {
                    return ck.fail(s.span(), format!("method `{method}` needs a two-photon model"));
                }
                if !methods.contains(&method) {
                    methods.push(method);
                }
            }
        }

        // validates dim against the largest pump
        let top = pumps.iter().copied().fold(0.0, f64::max);
        if let Err(e) = kpo_core::KpoModel::new(kind, delta, kerr, top, dim) {
            return ck.fail(m.dim.span(), e.to_string());
        }

        let mut output = OutputBlock { directory: PathBuf::from("out"), csv: true, svg: false };
        if let Some(o) = &self.output {
            if let Some(d) = &o.directory {
                output.directory = PathBuf::from(d);
            }
            if let Some(f) = &o.formats {
                if f.get_ref().is_empty() {
                    return ck.fail(f.span(), "`formats` is empty");
                }
                output.csv = false;
                for s in f.get_ref() {
                    match s.get_ref().as_str() {
                        "csv" => output.csv = true,
                        "svg" => output.svg = true,
                        other => return ck.fail(s.span(), format!("unknown format `{other}` (expected csv or svg)")),
                    }
                }
            }
        }

        let mut offdiag = Vec::new();
        if let Some(o) = &self.offdiag {
            for [a, b] in o.elements.get_ref() {
                if *a >= n_keep || *b >= n_keep {
                    return ck.fail(o.elements.span(), format!("element ({a}, {b}) outside the {n_keep} kept levels"));
                }
                offdiag.push((*a, *b));
            }
        }

        let mut oracle = OracleBlock::default();
        if let Some(o) = &self.oracle {
            if let Some(v) = &o.amplitude_ratio {
                oracle.amplitude_ratio = ck.positive(v, "amplitude_ratio")?;
            }
            if let Some(v) = &o.transient {
                oracle.transient = ck.positive(v, "transient_over_kappa")?;
            }
            if let Some(v) = &o.tolerance {
                oracle.tolerance = ck.positive(v, "tolerance")?;
            }
            if let Some(v) = &o.floor {
                oracle.floor = ck.positive(v, "floor")?;
            }
            for (v, slot, name) in [(&o.points, &mut oracle.points, "points"), (&o.periods, &mut oracle.periods, "periods")] {
                if let Some(v) = v {
                    if *v.get_ref() == 0 {
                        return ck.fail(v.span(), format!("`{name}` must be at least 1"));
                    }
                    *slot = *v.get_ref();
                }
            }
        }

        let quad = match &self.analytic {
            None => TransitionQuad::default(),
            Some(a) => {
                let [l0, l1, l2, l3] = *a.levels.get_ref();
                if [l0, l1, l2, l3].iter().any(|&l| l >= n_keep) {
                    return ck.fail(a.levels.span(), "analytic levels must lie below n_keep");
                }
                TransitionQuad::new(l0, l1, l2, l3)
            }
        };

        Ok(SweepConfig {
            model: ModelBlock { kind, delta, kerr, dim, n_keep },
            loss,
            probe,
            pumps,
            methods,
            output,
            offdiag,
            oracle,
            quad,
        })
    }

    fn pump_values(&self, ck: &Checker<'_>) -> Result<Vec<f64>, SweepError> {
        let p = self.pump.get_ref();
        let values = match (&p.values, &p.start, &p.stop, &p.count) {
            (Some(v), None, None, None) => {
                if p.spacing.is_some() {
                    return ck.fail(self.pump.span(), "`spacing` applies to start/stop/count grids only");
                }
                if v.get_ref().is_empty() {
                    return ck.fail(v.span(), "pump grid is empty");
                }
                v.get_ref().clone()
            }
            (None, Some(start), Some(stop), Some(count)) => {
                let (a, b, n) = (ck.finite(start, "start_over_2pi_MHz")?, ck.finite(stop, "stop_over_2pi_MHz")?, *count.get_ref());
                if n == 0 {
                    return ck.fail(count.span(), "pump grid is empty");
                }
                match p.spacing.as_ref().map(|s| (s.get_ref().as_str(), s.span())) {
                    None | Some(("linear", _)) => linspace(a, b, n),
                    Some(("log", span)) => {
                        if a <= 0.0 || b <= 0.0 {
                            return ck.fail(span, "log spacing needs positive end points");
                        }
                        logspace(a, b, n)
                    }
                    Some((other, span)) => {
                        return ck.fail(span, format!("unknown spacing `{other}` (expected linear or log)"))
                    }
                }
            }
            _ => {
                return ck.fail(
                    self.pump.span(),
                    "[pump] needs either `values_over_2pi_MHz` or all of start/stop/count",
                )
            }
        };
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return ck.fail(self.pump.span(), format!("pump amplitude {bad} must be finite and non-negative"));
        }
        Ok(values)
    }
}
