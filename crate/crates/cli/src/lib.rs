//! Command-line driver for `thinlayer`.
//!
//! Every physics command reads a TOML [`RunConfig`], applies command-line
//! overrides, validates the result before computing anything, and writes CSV
//! tables plus JSON summaries into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thinlayer::config::RunConfig;
use thinlayer::confinement::dominance_warning;
use thinlayer::operator::AxisBoundary;
use thinlayer::selftest::{self, Faults, SelfTestReport};
use thinlayer::transport::{
    analytic_thresholds, energy_sweep, scattering_density, ConductanceCurve, DetectedThreshold, Injection, Plateau,
    SweepFailure,
};

/// Plateau detection: `|sigma - n sigma_0| < PLATEAU_TOLERANCE` over at least `PLATEAU_POINTS` points.
pub const PLATEAU_TOLERANCE: f64 = 0.05;
pub const PLATEAU_POINTS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Core(#[from] thinlayer::Error),
    #[error("config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("every point of the sweep failed; first: {0}")]
    SweepFailed(String),
    #[error("{0} self-test check(s) failed")]
    SelfTest(usize),
}

impl CliError {
    /// 1 for invalid input, 2 for numerical or runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Config { .. } => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "thinlayer", version, about = "Thin-layer surface Hamiltonians and helical-ditch transport")]
pub struct Cli {
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of M, K and V_g on the chart grid.
    Curvature(PhysicsArgs),
    /// Lowest eigenvalues of the closed surface Hamiltonian on the chart.
    Spectrum(PhysicsArgs),
    /// Conductance, mode-resolved transmission and polarization over an energy grid.
    Sweep(SweepArgs),
    /// |psi(theta, z)|^2 of one scattering state.
    Density(DensityArgs),
    /// Oracle battery; exit code 0 iff every check passes.
    Selftest(SelftestArgs),
    /// Print the resolved configuration (defaults when no file is given).
    Config(ConfigArgs),
}

#[derive(Debug, Args)]
pub struct PhysicsArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Command-line values that replace the corresponding config fields.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    /// Ditches per circumference; 0 takes Omega r.
    #[arg(long)]
    pub ditch_count: Option<u32>,
    #[arg(long)]
    pub e0: Option<f64>,
    #[arg(long)]
    pub l_max: Option<u32>,
    #[arg(long)]
    pub dz: Option<f64>,
    /// Scattering window length.
    #[arg(long)]
    pub length: Option<f64>,
    #[arg(long)]
    pub taper: Option<f64>,
    #[arg(long)]
    pub buffer: Option<f64>,
    #[arg(long)]
    pub include_vg: Option<bool>,
    /// Chart grid as `N1,N2`.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<[usize; 2]>,
    #[arg(long)]
    pub eigenvalues: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub e_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub e_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Outgoing pair l for P_Lz; 0 sums every l > 0.
    #[arg(long)]
    pub pair: Option<u32>,
    /// Repeat the sweep with L_max + m_d and report the change.
    #[arg(long)]
    pub check_cutoff: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub physics: PhysicsArgs,
    /// Threshold-relative energy E1 [e0].
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Incident angular mode l.
    #[arg(long, allow_hyphen_values = true)]
    pub mode: Option<i32>,
    #[arg(long, value_enum)]
    pub injection: Option<Side>,
    #[arg(long)]
    pub theta_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Also write the report as JSON into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_grid(text: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = text.split(',').collect();
    match parts.as_slice() {
        [a, b] => {
            let n = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("`{s}`: {e}"));
            Ok([n(a)?, n(b)?])
        }
        _ => Err("expected N1,N2".into()),
    }
}

/// Reads a TOML configuration.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.into(),
        reason: e.to_string(),
    })?;
    parse_config(&text).map_err(|reason| CliError::Config { path: path.into(), reason })
}

pub fn parse_config(text: &str) -> Result<RunConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn render_config(config: &RunConfig) -> String {
    toml::to_string(config).expect("configuration serializes to TOML")
}

impl Overrides {
    pub fn apply(&self, c: &mut RunConfig) {
        let p = &mut c.profile;
        if let Some(v) = self.epsilon {
            p.epsilon = v;
        }
        if let Some(v) = self.omega {
            p.omega = v;
        }
        if let Some(v) = self.kappa {
            p.kappa = v;
        }
        if let Some(v) = self.ditch_count {
            p.ditch_count = v;
        }
        if let Some(v) = self.e0 {
            p.e0 = v;
        }
        let n = &mut c.numerics;
        n.l_max = self.l_max.or(n.l_max);
        n.dz = self.dz.or(n.dz);
        n.length = self.length.or(n.length);
        n.taper = self.taper.or(n.taper);
        n.buffer = self.buffer.or(n.buffer);
        if let Some(v) = self.include_vg {
            n.include_vg = v;
        }
        if let Some(g) = self.grid {
            n.grid = g;
        }
        if let Some(v) = self.eigenvalues {
            n.eigenvalues = v;
        }
    }
}

impl PhysicsArgs {
    fn resolve(&self) -> CliResult<RunConfig> {
        let mut config = load_config(&self.config)?;
        self.overrides.apply(&mut config);
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        Ok(config)
    }
}

impl SweepArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = self.physics.resolve()?;
        let s = &mut c.sweep;
        s.e_min = self.e_min.unwrap_or(s.e_min);
        s.e_max = self.e_max.unwrap_or(s.e_max);
        s.points = self.points.unwrap_or(s.points);
        s.pair = self.pair.unwrap_or(s.pair);
        s.check_cutoff |= self.check_cutoff;
        Ok(c)
    }
}

impl DensityArgs {
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = self.physics.resolve()?;
        let d = &mut c.density;
        d.energy = self.energy.unwrap_or(d.energy);
        d.mode = self.mode.unwrap_or(d.mode);
        d.theta_samples = self.theta_samples.unwrap_or(d.theta_samples);
        if let Some(side) = self.injection {
            d.injection = match side {
                Side::Left => Injection::Left,
                Side::Right => Injection::Right,
            };
        }
        Ok(c)
    }
}

/// Runs one parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Curvature(a) => cmd_curvature(&a.resolve()?).map(report_files),
        Command::Spectrum(a) => cmd_spectrum(&a.resolve()?).map(report_files),
        Command::Sweep(a) => cmd_sweep(&a.resolve()?).map(report_files),
        Command::Density(a) => cmd_density(&a.resolve()?).map(report_files),
        Command::Selftest(a) => {
            let report = cmd_selftest(&Faults::default(), a.out.as_deref())?;
            for c in &report.checks {
                println!(
                    "[{}] {:<9} {}: observed {:e}, expected {:e}, tolerance {:e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.suite,
                    c.name,
                    c.observed,
                    c.expected,
                    c.tolerance
                );
            }
            let failed = report.failures().count();
            println!("{} of {} checks passed", report.checks.len() - failed, report.checks.len());
            if failed > 0 {
                return Err(CliError::SelfTest(failed));
            }
            Ok(())
        }
        Command::Config(a) => {
            let config = match &a.config {
                Some(p) => load_config(p)?,
                None => RunConfig::default(),
            };
            print!("{}", render_config(&config));
            Ok(())
        }
    }
}

fn report_files(files: Vec<PathBuf>) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.into(),
        source,
    })
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> CliResult<()> {
    let err = |source| CliError::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("summary serializes to JSON");
    fs::write(path, text + "\n").map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })
}

/// Shortest round-trip representation; exponent form outside `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn headers(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Cell-centred sample of axis `axis` with `n` points; avoids chart edges such as the sphere's poles.
fn sample_axis(config: &RunConfig, axis: usize, n: usize) -> CliResult<Vec<f64>> {
    let chart = config.chart.build()?;
    let d = chart.domain();
    Ok((0..n).map(|i| d.lower[axis] + (i as f64 + 0.5) * d.extent(axis) / n as f64).collect())
}

/// Writes `<prefix>_curvature.csv` with columns `q1, q2, M, K, V_g`.
pub fn cmd_curvature(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    config.validate()?;
    let chart = config.chart.build()?;
    let [n1, n2] = config.numerics.grid;
    let (a, b) = (sample_axis(config, 0, n1)?, sample_axis(config, 1, n2)?);
    let mut rows = Vec::with_capacity(n1 * n2);
    for &q1 in &a {
        for &q2 in &b {
            let c = chart.curvature([q1, q2])?;
            rows.push(vec![
                num(q1),
                num(q2),
                num(c.mean_curvature),
                num(c.gaussian_curvature),
                num(c.geometric_potential()),
            ]);
        }
    }
    create_dir(&config.output.dir)?;
    let path = config.output_path("curvature.csv");
    write_csv(&path, &headers(&["q1", "q2", "M [1/a]", "K [1/a^2]", "V_g [e0]"]), &rows)?;
    Ok(vec![path])
}

#[derive(Debug, Serialize)]
struct SpectrumSummary<'a> {
    chart: &'a thinlayer::config::ChartSpec,
    nodes: [usize; 2],
    boundary: [AxisBoundary; 2],
    nine_point_stencil: bool,
    include_vg: bool,
    eigenvalues: &'a [f64],
}

/// Writes `<prefix>_spectrum.csv` and `<prefix>_spectrum.json`.
pub fn cmd_spectrum(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    config.validate()?;
    let chart = config.chart.build()?;
    let profile = config.surface_profile()?;
    let op = thinlayer::operator::assemble_2d(&chart, &profile, &config.well(), &config.surface_grid())?;
    log::info!("assembled {} nodes", op.dim());
    let values = op.eigenvalues(config.numerics.eigenvalues)?;
    create_dir(&config.output.dir)?;
    let csv_path = config.output_path("spectrum.csv");
    let rows: Vec<Vec<String>> = values.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]).collect();
    write_csv(&csv_path, &headers(&["index", "E [e0]"]), &rows)?;
    let json_path = config.output_path("spectrum.json");
    write_json(
        &json_path,
        &SpectrumSummary {
            chart: &config.chart,
            nodes: op.nodes(),
            boundary: op.boundary(),
            nine_point_stencil: op.is_nine_point(),
            include_vg: config.numerics.include_vg,
            eigenvalues: &values,
        },
    )?;
    Ok(vec![csv_path, json_path])
}

/// Result of a sweep together with the operator facts needed for its outputs.
pub struct SweepOutput {
    pub curve: ConductanceCurve,
    pub summary: SweepSummary,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub energy_axis: &'static str,
    pub include_vg: bool,
    pub geometric_potential: f64,
    pub plateau_tolerance: f64,
    pub plateau_min_points: usize,
    pub plateaus: Vec<Plateau>,
    pub detected_thresholds: Vec<DetectedThreshold>,
    pub analytic_thresholds: Vec<AnalyticThreshold>,
    pub diagnostics: Diagnostics,
    pub failures: Vec<SweepFailure>,
}

#[derive(Debug, Serialize)]
pub struct AnalyticThreshold {
    pub l: u32,
    pub energy: f64,
}

#[derive(Debug, Serialize)]
pub struct Diagnostics {
    pub points: usize,
    pub l_max: u32,
    pub channels: usize,
    pub dz: f64,
    pub slices: usize,
    pub window_length: f64,
    pub taper: f64,
    pub buffer: f64,
    pub max_unitarity_residual: f64,
    pub max_flux_residual: f64,
    pub near_threshold_points: usize,
    /// Largest change of sigma when L_max is raised by m_d, if requested.
    pub cutoff_change: Option<f64>,
}

/// Runs the sweep described by `config` without writing anything.
pub fn compute_sweep(config: &RunConfig) -> CliResult<SweepOutput> {
    config.validate()?;
    let op = config.operator()?;
    if let Some(w) = dominance_warning(op.e0(), config.sweep.e_max) {
        log::warn!("{w}");
    }
    let grid = config.energy_grid()?;
    log::info!("sweeping {} energies with {} slices x {} channels", grid.points, op.slices(), op.channels());
    let curve = energy_sweep(&op, &grid, config.pair())?;
    if curve.points.is_empty() {
        let first = curve.failures.first().map_or_else(String::new, |f| f.message.clone());
        return Err(CliError::SweepFailed(first));
    }
    let cutoff_change = if config.sweep.check_cutoff {
        let mut wider = config.clone();
        let step = op.harmonic().max(1) as u32;
        wider.numerics.l_max = Some(op.basis().l_max() + step);
        wider.numerics.dz = Some(op.dz());
        Some(curve.max_deviation(&energy_sweep(&wider.operator()?, &grid, config.pair())?))
    } else {
        None
    };
    let g = op.grid();
    let summary = SweepSummary {
        energy_axis: if op.include_vg() {
            "E1 is measured from the l = 0 threshold; E1_raw = E1 + V_g"
        } else {
            "E1 = E1_raw; V_g is not included"
        },
        include_vg: op.include_vg(),
        geometric_potential: op.geometric_potential(),
        plateau_tolerance: PLATEAU_TOLERANCE,
        plateau_min_points: PLATEAU_POINTS,
        plateaus: curve.plateaus(PLATEAU_TOLERANCE, PLATEAU_POINTS),
        detected_thresholds: curve.detected_thresholds(),
        analytic_thresholds: analytic_thresholds(op.basis().radius(), op.basis().l_max(), grid.min, grid.max)
            .into_iter()
            .map(|(l, energy)| AnalyticThreshold { l, energy })
            .collect(),
        diagnostics: Diagnostics {
            points: curve.points.len(),
            l_max: op.basis().l_max(),
            channels: op.channels(),
            dz: op.dz(),
            slices: op.slices(),
            window_length: g.window.length,
            taper: g.window.taper,
            buffer: g.buffer,
            max_unitarity_residual: curve.max_unitarity_residual(),
            max_flux_residual: curve.points.iter().map(|p| p.flux).fold(0.0, f64::max),
            near_threshold_points: curve.points.iter().filter(|p| p.near_threshold).count(),
            cutoff_change,
        },
        failures: curve.failures.clone(),
    };
    Ok(SweepOutput { curve, summary })
}

/// CSV header and rows of a sweep. Pair columns cover every mode open somewhere in the sweep.
pub fn sweep_table(curve: &ConductanceCurve) -> (Vec<String>, Vec<Vec<String>>) {
    let modes = curve.modes();
    let mut header = headers(&["E1 [e0]", "E1_raw [e0]", "open_channels", "sigma [sigma0]", "sigma_reverse [sigma0]"]);
    for &inc in &modes {
        for &out in &modes {
            header.push(format!("sigma({inc}->{out}) [sigma0]"));
        }
    }
    header.extend(headers(&["P_Lz", "P_Lz_reverse", "unitarity_residual", "flux_residual", "near_threshold"]));
    let opt = |x: Option<f64>| x.map_or_else(String::new, num);
    let rows = curve
        .points
        .iter()
        .map(|p| {
            let mut row = vec![
                num(p.energy),
                num(p.solver_energy),
                p.open_channels.to_string(),
                num(p.conductance),
                num(p.conductance_reverse),
            ];
            for &inc in &modes {
                for &out in &modes {
                    row.push(num(p.sigma(inc, out)));
                }
            }
            row.extend([
                opt(p.polarization),
                opt(p.polarization_reverse),
                num(p.unitarity),
                num(p.flux),
                u8::from(p.near_threshold).to_string(),
            ]);
            row
        })
        .collect();
    (header, rows)
}

/// Writes `<prefix>_sweep.csv` and `<prefix>_sweep.json`.
pub fn cmd_sweep(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let out = compute_sweep(config)?;
    for f in &out.summary.failures {
        log::warn!("point {} at E1 = {} failed: {}", f.index, f.energy, f.message);
    }
    create_dir(&config.output.dir)?;
    let (header, rows) = sweep_table(&out.curve);
    let csv_path = config.output_path("sweep.csv");
    write_csv(&csv_path, &header, &rows)?;
    let json_path = config.output_path("sweep.json");
    write_json(&json_path, &out.summary)?;
    Ok(vec![csv_path, json_path])
}

#[derive(Debug, Serialize)]
struct DensityShape {
    energy: f64,
    mode: i32,
    injection: Injection,
    theta_points: usize,
    z_points: usize,
    order: &'static str,
    window: (f64, f64),
    incident_density: f64,
}

/// Writes `<prefix>_density.csv` (long format) and `<prefix>_density.json` (grid shape).
pub fn cmd_density(config: &RunConfig) -> CliResult<Vec<PathBuf>> {
    config.validate()?;
    let op = config.operator()?;
    let d = &config.density;
    let map = scattering_density(&op, d.energy, d.mode, d.injection, d.theta_samples)?;
    let mut rows = Vec::with_capacity(map.values.len());
    for (iz, z) in map.z.iter().enumerate() {
        for (it, t) in map.theta.iter().enumerate() {
            rows.push(vec![num(*t), num(*z), num(map.at(iz, it))]);
        }
    }
    create_dir(&config.output.dir)?;
    let csv_path = config.output_path("density.csv");
    write_csv(&csv_path, &headers(&["theta [rad]", "z [a]", "density [1/a^2]"]), &rows)?;
    let json_path = config.output_path("density.json");
    write_json(
        &json_path,
        &DensityShape {
            energy: map.energy,
            mode: map.mode,
            injection: map.injection,
            theta_points: map.theta.len(),
            z_points: map.z.len(),
            order: "z outer, theta inner",
            window: map.window,
            incident_density: 1.0 / (2.0 * std::f64::consts::PI),
        },
    )?;
    Ok(vec![csv_path, json_path])
}

/// Runs the oracle battery; writes `selftest.json` into `out` when given.
pub fn cmd_selftest(faults: &Faults, out: Option<&Path>) -> CliResult<SelfTestReport> {
    let report = selftest::run(faults)?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("selftest.json"), &report)?;
    }
    Ok(report)
}
