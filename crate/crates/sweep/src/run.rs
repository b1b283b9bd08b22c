use std::path::{Path, PathBuf};

use kpo_core::model::{coupling_matrices, eigensystems_at};
use kpo_core::oracle::{oracle_response, DriveSpec};
use kpo_core::spectrum::{Coefficients, Measurement, Method, SpectrumContext};
use kpo_core::steady::{steady_state, truncation_diagnostic};
use kpo_core::{CMatrix, Couplings, Eigen, KpoModel, SteadyOptions, SteadyPath, SteadyState, TrackingOptions, C64};
use rayon::prelude::*;

use crate::config::{Axis, OracleBlock, SweepConfig, SweepMethod};
use crate::error::{AtPoint, Result, SweepError};
use crate::output::{create_dir, num, pump_tag, write_csv, write_text, Manifest, Plot, PumpRecord, Series};

/// Levels added when estimating the truncation error of `ρ[0]`.
pub const TRUNCATION_PROBE: usize = 4;

/// Transitions drawn on plots need at least this much `|X|` and initial population.
const MARKER_FLOOR: f64 = 1e-3;

pub fn spectrum_header(measurement: Measurement) -> Vec<&'static str> {
    let mut h = vec!["omega_in_over_2pi_MHz", "re_gamma", "im_gamma", "abs_gamma"];
    if measurement == Measurement::Transmission {
        h.extend(["re_T", "im_T", "abs_T"]);
    }
    h
}

/// Everything computed once per pump value.
pub struct PumpPoint {
    pub pump: f64,
    pub model: KpoModel<f64>,
    pub eig: Eigen,
    pub steady: SteadyState<f64>,
    pub truncation: Option<f64>,
}

impl PumpPoint {
    pub fn couplings(&self, n_keep: usize) -> Result<Couplings> {
        coupling_matrices(&self.eig, n_keep).at_point(|| format!("p/2π = {} MHz", self.pump))
    }

    fn record(&self) -> PumpRecord {
        PumpRecord {
            p_over_2pi_mhz: self.pump,
            steady_path: Some(match self.steady.path() {
                SteadyPath::NullSpace => "null-space",
                SteadyPath::Propagated => "propagated",
            }),
            steady_gap: self.steady.gap(),
            steady_residual: Some(self.steady.residual()),
            truncation_diagnostic: self.truncation,
        }
    }
}

fn base_model(cfg: &SweepConfig) -> Result<KpoModel<f64>> {
    let m = &cfg.model;
    KpoModel::new(m.kind, m.delta, m.kerr, cfg.max_pump(), m.dim).map_err(|e| SweepError::Usage(e.to_string()))
}

fn tracked(cfg: &SweepConfig) -> Result<(KpoModel<f64>, Vec<Eigen>)> {
    let model = base_model(cfg)?;
    let eigs = eigensystems_at(&model, &cfg.pumps, &TrackingOptions::default())
        .at_point(|| "adiabatic tracking over the pump grid".to_string())?;
    Ok((model, eigs))
}

/// Tracks the eigenbasis over the pump grid and solves each steady state.
pub fn prepare(cfg: &SweepConfig) -> Result<Vec<PumpPoint>> {
    let (model, eigs) = tracked(cfg)?;
    let opts = SteadyOptions::default();
    let n_keep = cfg.model.n_keep;
    eigs.into_par_iter()
        .zip(cfg.pumps.par_iter())
        .map(|(eig, &pump)| {
            let at = || format!("p/2π = {pump} MHz");
            let steady = steady_state(&eig, &cfg.loss, n_keep, &opts).at_point(at)?;
            let truncation = truncation_diagnostic(&eig, &cfg.loss, n_keep, TRUNCATION_PROBE, &opts).at_point(at)?;
            let model = model.with_pump(pump).at_point(at)?;
            Ok(PumpPoint { pump, model, eig, steady, truncation })
        })
        .collect()
}

/// `Σ X_mn r_nm` for a full sideband matrix.
pub fn coupling_sum(c: &Couplings, r: &CMatrix<f64>) -> C64 {
    c.x().transpose().component_mul(r).sum()
}

pub fn oracle_drive(block: &OracleBlock, omega: f64) -> DriveSpec<f64> {
    DriveSpec { transient: block.transient, periods: block.periods, ..DriveSpec::new(omega, block.amplitude_ratio) }
}

fn evaluate(
    ctx: &SpectrumContext<f64>,
    method: SweepMethod,
    omega: f64,
    oracle: &OracleBlock,
) -> kpo_core::Result<Coefficients<f64>> {
    match method {
        SweepMethod::Core(m) => {
            let p = ctx.point(m, omega)?;
            Ok(Coefficients { gamma: p.gamma, transmission: p.transmission })
        }
        SweepMethod::Oracle => {
            let c = ctx.couplings();
            let out = oracle_response(c, ctx.steady().rho(), ctx.loss(), &oracle_drive(oracle, omega))?;
            Ok(Coefficients::from_sum(coupling_sum(c, &out.r), ctx.loss().kappa_ex, ctx.measurement()))
        }
    }
}

fn complex_cells(z: C64) -> [String; 3] {
    [num(z.re), num(z.im), num(z.norm())]
}

fn transition_rows(c: &Couplings, steady: &SteadyState<f64>, axis: impl Fn(f64) -> f64) -> Vec<Vec<String>> {
    let n = c.n_levels();
    let mut rows = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if c.parity(from) == c.parity(to) {
                continue;
            }
            let f = c.transition_frequency(from, to);
            rows.push(vec![
                from.to_string(),
                to.to_string(),
                num(f),
                num(axis(f)),
                num(c.x()[(from, to)].norm()),
                num(steady.population(from)),
            ]);
        }
    }
    rows
}

const TRANSITION_HEADER: [&str; 6] =
    ["label_from", "label_to", "freq_over_2pi_MHz", "axis_over_2pi_MHz", "abs_x", "population_from"];

fn markers(c: &Couplings, steady: &SteadyState<f64>, axis: impl Fn(f64) -> f64) -> Vec<(f64, String)> {
    let n = c.n_levels();
    let mut out = Vec::new();
    for from in 0..n {
        for to in 0..n {
            if c.parity(from) != c.parity(to)
                && c.x()[(from, to)].norm() > MARKER_FLOOR
                && steady.population(from) > MARKER_FLOOR
            {
                out.push((axis(c.transition_frequency(from, to)), format!("{from}→{to}")));
            }
        }
    }
    out
}

fn rel(dir: &Path, path: &Path) -> String {
    path.strip_prefix(dir).unwrap_or(path).display().to_string()
}

/// Files written by one command, in write order, plus the manifest.
#[derive(Debug)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

/// One spectrum CSV per (method, p), one transitions CSV per p, optional
/// SVG per p and a manifest.
pub fn run_sweep(cfg: &SweepConfig) -> Result<RunSummary> {
    if cfg.methods.is_empty() {
        return Err(SweepError::Usage("no methods configured (set `methods` or pass --method)".into()));
    }
    let probe = cfg.probe()?;
    let dir = &cfg.output.directory;
    create_dir(dir)?;
    let mut manifest = Manifest::new("sweep", cfg.physics_hash());
    let mut files = Vec::new();
    let header = spectrum_header(probe.measurement);
    let xs = probe.axis_values();

    for point in prepare(cfg)? {
        let p = point.pump;
        let c = point.couplings(cfg.model.n_keep)?;
        let ctx = SpectrumContext::new(c.clone(), point.steady.clone(), cfg.loss, probe.measurement)
            .at_point(|| format!("p/2π = {p} MHz"))?
            .with_quad(cfg.quad)
            .with_model(point.model.clone());
        let omegas = probe.detunings(p);
        let mut plot = Plot {
            title: format!("{} KPO, p/2π = {p} MHz", cfg.model.kind),
            x_label: match probe.axis {
                Axis::Detuning => "ω̃_in/2π (MHz)".into(),
                Axis::DetuningPlus2p => "(ω̃_in + 2p)/2π (MHz)".into(),
            },
            y_label: format!("|{}|", if probe.measurement == Measurement::Transmission { "T" } else { "Γ" }),
            ..Default::default()
        };

        for &method in &cfg.methods {
            let coeffs = omegas
                .par_iter()
                .map(|&w| {
                    evaluate(&ctx, method, w, &cfg.oracle)
                        .at_point(|| format!("method {method}, p/2π = {p} MHz, ω̃_in/2π = {w} MHz"))
                })
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<Vec<String>> = xs
                .iter()
                .zip(&coeffs)
                .map(|(&x, k)| {
                    let mut row = vec![num(x)];
                    row.extend(complex_cells(k.gamma));
                    if let Some(t) = k.transmission {
                        row.extend(complex_cells(t));
                    }
                    row
                })
                .collect();
            if cfg.output.csv {
                let path = dir.join(format!("{}_{}.csv", method.name(), pump_tag(p)));
                write_csv(&path, &header, &rows)?;
                files.push(path);
            }
            plot.series.push(Series {
                name: method.name().to_string(),
                points: xs.iter().zip(&coeffs).map(|(&x, k)| (x, k.magnitude())).collect(),
            });
        }

        let axis = |f: f64| probe.axis.to_axis(f, p);
        if cfg.output.csv {
            let path = dir.join(format!("transitions_{}.csv", pump_tag(p)));
            write_csv(&path, &TRANSITION_HEADER, &transition_rows(&c, &point.steady, axis))?;
            files.push(path);
        }
        if cfg.output.svg {
            plot.markers = markers(&c, &point.steady, axis);
            let path = dir.join(format!("spectrum_{}.svg", pump_tag(p)));
            write_text(&path, &plot.render())?;
            files.push(path);
        }
        manifest.pumps.push(point.record());
    }

    manifest.files = files.iter().map(|f| rel(dir, f)).collect();
    let manifest = manifest.write(dir)?;
    Ok(RunSummary { files, manifest })
}

/// Tracked eigenenergies `ω_ñ(p)` of the first `n_keep` labels.
pub fn emit_energy_diagram(cfg: &SweepConfig) -> Result<RunSummary> {
    let dir = &cfg.output.directory;
    create_dir(dir)?;
    let (_, eigs) = tracked(cfg)?;
    let n = cfg.model.n_keep;
    let names: Vec<String> = (0..n)
        .map(|l| format!("level_{l}_{}", if eigs[0].parity(l) > 0 { "even" } else { "odd" }))
        .collect();
    let mut header = vec!["p_over_2pi_MHz"];
    header.extend(names.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = eigs
        .iter()
        .zip(&cfg.pumps)
        .map(|(e, &p)| std::iter::once(num(p)).chain((0..n).map(|l| num(e.energy(l)))).collect())
        .collect();

    let mut files = Vec::new();
    if cfg.output.csv {
        let path = dir.join("energies.csv");
        write_csv(&path, &header, &rows)?;
        files.push(path);
    }
    if cfg.output.svg {
        let plot = Plot {
            title: format!("{} KPO energy levels", cfg.model.kind),
            x_label: "p/2π (MHz)".into(),
            y_label: "ω_ñ/2π (MHz)".into(),
            series: (0..n)
                .map(|l| Series {
                    name: format!("{l}"),
                    points: eigs.iter().zip(&cfg.pumps).map(|(e, &p)| (p, e.energy(l))).collect(),
                })
                .collect(),
            markers: Vec::new(),
        };
        let path = dir.join("energies.svg");
        write_text(&path, &plot.render())?;
        files.push(path);
    }
    let mut manifest = Manifest::new("energy-diagram", cfg.physics_hash());
    manifest.pumps = cfg.pumps.iter().map(|&p| PumpRecord { p_over_2pi_mhz: p, ..Default::default() }).collect();
    manifest.files = files.iter().map(|f| rel(dir, f)).collect();
    let manifest = manifest.write(dir)?;
    Ok(RunSummary { files, manifest })
}

/// `ρ_ñm̃[0]` versus `p` for the configured elements.
pub fn emit_offdiag_trace(cfg: &SweepConfig) -> Result<RunSummary> {
    if cfg.offdiag.is_empty() {
        return Err(SweepError::Usage("offdiag needs `elements` in an [offdiag] block".into()));
    }
    let dir = &cfg.output.directory;
    create_dir(dir)?;
    let points = prepare(cfg)?;
    let mut header = vec!["p_over_2pi_MHz".to_string()];
    for (a, b) in &cfg.offdiag {
        header.extend([format!("abs_rho_{a}_{b}"), format!("re_rho_{a}_{b}"), format!("im_rho_{a}_{b}")]);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|pt| {
            let mut row = vec![num(pt.pump)];
            for &(a, b) in &cfg.offdiag {
                let z = pt.steady.element(a, b);
                row.extend([num(z.norm()), num(z.re), num(z.im)]);
            }
            row
        })
        .collect();

    let mut files = Vec::new();
    if cfg.output.csv {
        let path = dir.join("offdiag.csv");
        write_csv(&path, &header, &rows)?;
        files.push(path);
    }
    if cfg.output.svg {
        let logx = points.iter().all(|p| p.pump > 0.0) && cfg.max_pump() > 100.0 * cfg.pumps.iter().copied().fold(f64::INFINITY, f64::min);
        let x = |p: f64| if logx { p.log10() } else { p };
        let plot = Plot {
            title: format!("{} KPO stationary off-diagonal elements", cfg.model.kind),
            x_label: if logx { "log10(p/2π / MHz)".into() } else { "p/2π (MHz)".into() },
            y_label: "|ρ_ñm̃[0]|".into(),
            series: cfg
                .offdiag
                .iter()
                .map(|&(a, b)| Series {
                    name: format!("|ρ_{a}{b}|"),
                    points: points.iter().map(|pt| (x(pt.pump), pt.steady.element(a, b).norm())).collect(),
                })
                .collect(),
            markers: Vec::new(),
        };
        let path = dir.join("offdiag.svg");
        write_text(&path, &plot.render())?;
        files.push(path);
    }
    let mut manifest = Manifest::new("offdiag", cfg.physics_hash());
    manifest.pumps = points.iter().map(PumpPoint::record).collect();
    manifest.files = files.iter().map(|f| rel(dir, f)).collect();
    let manifest = manifest.write(dir)?;
    Ok(RunSummary { files, manifest })
}

/// Comparison of one probe point between the sideband solve and the
/// time-domain oracle.
#[derive(Clone, Debug)]
pub struct OracleComparison {
    pub pump: f64,
    pub omega_in_tilde: f64,
    pub gamma_modified: C64,
    pub gamma_oracle: C64,
    /// Largest `|r_oracle − r| / |r|` over elements with `|r| > floor`.
    pub max_rel_error: f64,
    pub compared: usize,
    pub steps: usize,
    pub second_harmonic: f64,
}

/// Indices of `points` entries spread evenly over a grid of `count`.
pub fn spread_indices(count: usize, points: usize) -> Vec<usize> {
    if points >= count {
        return (0..count).collect();
    }
    if points == 1 {
        return vec![count / 2];
    }
    (0..points).map(|i| (i * (count - 1) + (points - 1) / 2) / (points - 1)).collect()
}

pub fn compare_with_oracle(
    ctx: &SpectrumContext<f64>,
    block: &OracleBlock,
    pump: f64,
    omega: f64,
) -> kpo_core::Result<OracleComparison> {
    let c = ctx.couplings();
    let lin = ctx.response(Method::Modified, omega)?;
    let out = oracle_response(c, ctx.steady().rho(), ctx.loss(), &oracle_drive(block, omega))?;
    let mut worst = 0.0f64;
    let mut compared = 0;
    for (a, b) in lin.r().iter().zip(out.r.iter()) {
        if a.norm() > block.floor {
            worst = worst.max((a - b).norm() / a.norm());
            compared += 1;
        }
    }
    let kex = ctx.loss().kappa_ex;
    let meas = ctx.measurement();
    Ok(OracleComparison {
        pump,
        omega_in_tilde: omega,
        gamma_modified: Coefficients::from_sum(lin.coupling_sum(c), kex, meas).gamma,
        gamma_oracle: Coefficients::from_sum(coupling_sum(c, &out.r), kex, meas).gamma,
        max_rel_error: worst,
        compared,
        steps: out.steps,
        second_harmonic: out.second_harmonic,
    })
}

/// Runs the oracle at `oracle.points` probe values per pump and fails when
/// any compared element deviates by more than `oracle.tolerance`.
pub fn oracle_check(cfg: &SweepConfig) -> Result<(RunSummary, Vec<OracleComparison>)> {
    let probe = cfg.probe()?;
    let dir = &cfg.output.directory;
    create_dir(dir)?;
    let idx = spread_indices(probe.count, cfg.oracle.points);
    let xs = probe.axis_values();
    let mut manifest = Manifest::new("oracle-check", cfg.physics_hash());
    let mut files = Vec::new();
    let mut all = Vec::new();

    for point in prepare(cfg)? {
        let p = point.pump;
        let c = point.couplings(cfg.model.n_keep)?;
        let ctx = SpectrumContext::new(c, point.steady.clone(), cfg.loss, probe.measurement)
            .at_point(|| format!("p/2π = {p} MHz"))?;
        let results = idx
            .par_iter()
            .map(|&i| {
                let w = probe.axis.from_axis(xs[i], p);
                compare_with_oracle(&ctx, &cfg.oracle, p, w)
                    .at_point(|| format!("oracle, p/2π = {p} MHz, ω̃_in/2π = {w} MHz"))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<String>> = results
            .iter()
            .zip(&idx)
            .map(|(r, &i)| {
                vec![
                    num(xs[i]),
                    num(r.gamma_modified.norm()),
                    num(r.gamma_oracle.norm()),
                    num(r.max_rel_error),
                    r.compared.to_string(),
                    r.steps.to_string(),
                    num(r.second_harmonic),
                ]
            })
            .collect();
        if cfg.output.csv {
            let path = dir.join(format!("oracle_check_{}.csv", pump_tag(p)));
            write_csv(
                &path,
                &[
                    "omega_in_over_2pi_MHz",
                    "abs_gamma_modified",
                    "abs_gamma_oracle",
                    "max_rel_error",
                    "compared_elements",
                    "rk4_steps",
                    "second_harmonic",
                ],
                &rows,
            )?;
            files.push(path);
        }
        manifest.pumps.push(point.record());
        all.extend(results);
    }

    manifest.files = files.iter().map(|f| rel(dir, f)).collect();
    let manifest_path = manifest.write(dir)?;
    let summary = RunSummary { files, manifest: manifest_path };
    if let Some(bad) = all.iter().filter(|r| r.max_rel_error > cfg.oracle.tolerance).max_by(|a, b| {
        a.max_rel_error.partial_cmp(&b.max_rel_error).unwrap_or(std::cmp::Ordering::Equal)
    }) {
        return Err(SweepError::OracleMismatch(format!(
            "relative error {:.3e} > {:.1e} at p/2π = {} MHz, ω̃_in/2π = {} MHz",
            bad.max_rel_error, cfg.oracle.tolerance, bad.pump, bad.omega_in_tilde
        )));
    }
    Ok((summary, all))
}
