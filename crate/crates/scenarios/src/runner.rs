//! Executes a validated scenario and writes its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex;
use serde_json::json;
use slp_core::comb::{
    filtering_comparison, matched_field, slaving_deviation, total_field, CombSolver, CombState, FilteringReport,
};
use slp_core::mbe::{self, LocalScheme, MomentWindow, RunOutput, RunPlan};
use slp_core::model::{group_velocity_from_intensity, Grid, PhysicalParams};
use slp_core::fokker_planck::homogeneous_spread_rate;
use slp_core::normal_modes::exact_width_series;
use slp_core::numerics::linear_fit;
use slp_core::profile::ControlProfile;
use slp_core::susceptibility::{spectrum_scan, ChiMethod, GratingTruncation, SpectrumResult};
use slp_core::{MbeSolver, Model, SystemState};

use crate::config::{
    InitialConfig, Kind, MethodConfig, ModelConfig, OmegaUnits, ProfileConfig, ScenarioConfig, SchemeConfig,
    ScheduleConfig,
};
use crate::error::{ConfigError, RunError};

type C64 = Complex<f64>;

pub const UNITS: &str = "g_p = g sqrt(N) = 1, c = 1; lengths in c/g_p, times in 1/g_p, l_abs = gamma";

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Target number of snapshots; overrides run.snapshot_every.
    pub snapshots: Option<usize>,
}

/// Root for outputs: explicit flag, then the scenario's output.dir, then
/// $SLP_OUT_DIR, then ./slp-out. Each scenario writes into <root>/<name>.
pub fn output_dir(cfg: &ScenarioConfig, cli_out: Option<&Path>) -> PathBuf {
    let root = cli_out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os("SLP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("slp-out"));
    root.join(&cfg.name)
}

/// Observables divided by their value at the normalization time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedRow {
    pub t: f64,
    pub peak_density: f64,
    pub n_tot: f64,
    pub peak_field: f64,
}

/// One (t, simulated, analytic) row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayRow {
    pub t: f64,
    pub simulated: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftRow {
    pub cos_2phi: f64,
    pub speed: f64,
    pub expected_speed: f64,
    pub diffusivity: f64,
    /// Leading-order v l_abs sin^2(2 phi).
    pub expected_diffusivity: f64,
    /// Exact branch curvature, see `homogeneous_spread_rate`.
    pub exact_diffusivity: f64,
}

pub struct MbeRun {
    pub params: PhysicalParams<f64>,
    pub grid: Grid<f64>,
    pub solver: MbeSolver<f64>,
    pub output: RunOutput<f64>,
    pub width_overlay: Vec<OverlayRow>,
    pub decay_overlay: Vec<OverlayRow>,
    pub normalized: Vec<NormalizedRow>,
    pub drift: Vec<DriftRow>,
    pub drift_runs: Vec<RunOutput<f64>>,
}

pub struct CombRun {
    pub params: PhysicalParams<f64>,
    pub grid: Grid<f64>,
    pub solver: CombSolver<f64>,
    pub snapshots: Vec<CombState<f64>>,
    /// (t, slaving deviation, photon number of the total field, spin norm)
    pub series: Vec<(f64, f64, f64, f64)>,
    pub final_state: CombState<f64>,
    pub filtering: FilteringReport<f64>,
    pub failure: Option<slp_core::Error>,
}

pub struct SpectrumRun {
    pub results: Vec<SpectrumResult<f64>>,
    /// Divide rates by this to get the configured omega units.
    pub omega_unit: f64,
}

pub enum Simulation {
    Mbe(Box<MbeRun>),
    Comb(Box<CombRun>),
    Spectrum(SpectrumRun),
}

fn cx(a: [f64; 2]) -> C64 {
    C64::new(a[0], a[1])
}

fn section<T: Copy>(v: Option<T>, name: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::field(name, "required for this kind"))
}

fn initial_state(
    cfg: &ScenarioConfig,
    params: &PhysicalParams<f64>,
    grid: &Grid<f64>,
    profile: &ControlProfile<f64>,
    t0: f64,
) -> Result<SystemState<f64>, RunError> {
    Ok(match section(cfg.initial, "initial")? {
        InitialConfig::StoredGaussian {
            center,
            width,
            amplitude,
        } => SystemState::stored_gaussian(grid, center, width, cx(amplitude), t0),
        InitialConfig::FullStorage {
            center,
            width,
            amplitude,
        } => SystemState::probe_pulse(grid, params, profile, center, width, cx(amplitude), t0)?,
        InitialConfig::SlavedGaussian { .. } => {
            return Err(ConfigError::field("initial.type", "slaved-gaussian is only defined for comb runs").into())
        }
    })
}

fn plan(cfg: &ScenarioConfig, grid: &Grid<f64>, opts: &RunOptions) -> Result<RunPlan<f64>, ConfigError> {
    let run = section(cfg.run, "run")?;
    let steps = (run.duration / grid.dt).round() as usize;
    let snapshot_every = match opts.snapshots {
        Some(n) if n > 0 => (steps / n).max(1),
        _ => run.snapshot_every,
    };
    Ok(RunPlan {
        duration: run.duration,
        observe_every: run.observe_every.max(1),
        snapshot_every,
        window: MomentWindow {
            center: run.moment_center,
            buffer: run.moment_buffer,
            ..MomentWindow::default()
        },
    })
}

fn build_solver(
    cfg: &ScenarioConfig,
    params: PhysicalParams<f64>,
    grid: Grid<f64>,
    profile: ControlProfile<f64>,
) -> Result<MbeSolver<f64>, RunError> {
    let run = section(cfg.run, "run")?;
    let model = match run.model {
        ModelConfig::Full => Model::Full,
        ModelConfig::Adiabatic => Model::Adiabatic,
    };
    let scheme = match run.scheme {
        SchemeConfig::Exponential => LocalScheme::Exponential,
        SchemeConfig::Rk4 => LocalScheme::Rk4,
    };
    Ok(MbeSolver::new(params, grid, profile, model)?
        .with_scheme(scheme)
        .with_control_refresh(run.control_refresh)?)
}

/// Group velocity from the total control intensity at (z, t).
fn v_at(profile: &ControlProfile<f64>, params: &PhysicalParams<f64>, z: f64, t: f64) -> f64 {
    match profile.control_field_at(params, z, t) {
        Ok((p, m)) => group_velocity_from_intensity(params, p.norm_sqr() + m.norm_sqr()),
        Err(_) => f64::NAN,
    }
}

fn width_overlay(
    out: &RunOutput<f64>,
    profile: &ControlProfile<f64>,
    params: &PhysicalParams<f64>,
    center: f64,
    start: f64,
) -> Vec<OverlayRow> {
    let obs: Vec<_> = out.observables.iter().filter(|o| o.t >= start).collect();
    let Some(first) = obs.first() else {
        return Vec::new();
    };
    let Some(d0) = first.spin_width_sq.or(first.width_sq) else {
        return Vec::new();
    };
    let times: Vec<f64> = obs.iter().map(|o| o.t).collect();
    let analytic = exact_width_series(
        d0,
        0.0,
        params.absorption_length(),
        params.light_speed,
        |t| v_at(profile, params, center, t),
        first.t,
        &times,
    );
    obs.iter()
        .zip(analytic)
        .map(|(o, a)| OverlayRow {
            t: o.t,
            simulated: o.width_sq.unwrap_or(f64::NAN),
            analytic: a,
        })
        .collect()
}

fn decay_overlay(
    out: &RunOutput<f64>,
    profile: &ControlProfile<f64>,
    params: &PhysicalParams<f64>,
    center: f64,
    start: f64,
) -> Vec<OverlayRow> {
    let obs: Vec<_> = out.observables.iter().filter(|o| o.t >= start).collect();
    let Some(first) = obs.first() else {
        return Vec::new();
    };
    let Some(d0) = first.width_sq else {
        return Vec::new();
    };
    let v = v_at(profile, params, center, first.t);
    let diff = v * params.absorption_length();
    obs.iter()
        .map(|o| OverlayRow {
            t: o.t,
            simulated: o.total_excitation,
            analytic: slp_core::normal_modes::diffusive_decay(first.total_excitation, d0.sqrt(), diff, o.t - first.t),
        })
        .collect()
}

fn normalized(out: &RunOutput<f64>, at: f64) -> Vec<NormalizedRow> {
    let Some(r) = out
        .observables
        .iter()
        .min_by(|a, b| (a.t - at).abs().total_cmp(&(b.t - at).abs()))
    else {
        return Vec::new();
    };
    out.observables
        .iter()
        .map(|o| NormalizedRow {
            t: o.t,
            peak_density: o.peak_density / r.peak_density,
            n_tot: o.total_excitation / r.total_excitation,
            peak_field: o.peak_field / r.peak_field,
        })
        .collect()
}

/// Center-of-mass speed and spread rate from the observables after `fit_start`.
pub fn fit_drift(out: &RunOutput<f64>, center: f64, fit_start: f64) -> Result<(f64, f64), slp_core::Error> {
    let (mut t, mut m1, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for o in out.observables.iter().filter(|o| o.t >= fit_start) {
        if let (Some(a), Some(b)) = (o.first_moment, o.width_sq) {
            t.push(o.t);
            m1.push(a);
            w.push(b - (a - center) * (a - center));
        }
    }
    let (_, speed) = linear_fit(&t, &m1)?;
    let (_, slope) = linear_fit(&t, &w)?;
    Ok((speed, slope / 2.0))
}

/// Runs the scenario in memory.
pub fn simulate(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Simulation, RunError> {
    crate::config::validate(cfg)?;
    let params = cfg.params.build();
    match cfg.kind {
        Kind::Spectrum => simulate_spectrum(cfg, &params).map(Simulation::Spectrum),
        Kind::Comb => simulate_comb(cfg, params, opts).map(|r| Simulation::Comb(Box::new(r))),
        Kind::Mbe => simulate_mbe(cfg, params, opts).map(|r| Simulation::Mbe(Box::new(r))),
    }
}

fn simulate_mbe(cfg: &ScenarioConfig, params: PhysicalParams<f64>, opts: &RunOptions) -> Result<MbeRun, RunError> {
    let grid = section(cfg.grid, "grid")?.build(params.light_speed)?;
    let profile = cfg
        .profile
        .as_ref()
        .ok_or_else(|| ConfigError::field("profile", "required"))?
        .build();
    let run = section(cfg.run, "run")?;
    let plan = plan(cfg, &grid, opts)?;
    let mut drift = Vec::new();
    let mut drift_runs = Vec::new();
    if let Some(sweep) = &cfg.analysis.drift {
        for &c2 in &sweep.cos_2phi {
            if !(-1.0..=1.0).contains(&c2) {
                return Err(ConfigError::field("analysis.drift.cos_2phi", "values must lie in [-1, 1]").into());
            }
            let phi = 0.5 * c2.acos();
            let prof = ProfileConfig::Homogeneous {
                plus: ScheduleConfig::Constant(sweep.omega0 * phi.cos()),
                minus: ScheduleConfig::Constant(sweep.omega0 * phi.sin()),
            }
            .build();
            let mut solver = build_solver(cfg, params, grid, prof.clone())?;
            let init = initial_state(cfg, &params, &grid, &prof, run.start)?;
            let out = mbe::run(&mut solver, init, &plan);
            if let Some(e) = out.failure.clone() {
                return Err(e.into());
            }
            let (speed, diffusivity) = fit_drift(&out, run.moment_center, sweep.fit_start)?;
            let v = group_velocity_from_intensity(&params, sweep.omega0 * sweep.omega0);
            let s2 = (1.0 - c2 * c2).max(0.0);
            drift.push(DriftRow {
                cos_2phi: c2,
                speed,
                expected_speed: v * c2,
                diffusivity,
                expected_diffusivity: v * params.absorption_length() * s2,
                exact_diffusivity: homogeneous_spread_rate(v, params.absorption_length(), c2, params.light_speed),
            });
            drift_runs.push(out);
        }
    }
    let mut solver = build_solver(cfg, params, grid, profile.clone())?;
    let init = initial_state(cfg, &params, &grid, &profile, run.start)?;
    let output = mbe::run(&mut solver, init, &plan);
    let center = run.moment_center;
    let width_overlay = cfg
        .analysis
        .exact_width
        .map(|o| width_overlay(&output, &profile, &params, center, o.start))
        .unwrap_or_default();
    let decay_overlay = cfg
        .analysis
        .diffusive_decay
        .map(|o| decay_overlay(&output, &profile, &params, center, o.start))
        .unwrap_or_default();
    let normalized = cfg
        .analysis
        .normalize_at
        .map(|t| normalized(&output, t))
        .unwrap_or_default();
    Ok(MbeRun {
        params,
        grid,
        solver,
        output,
        width_overlay,
        decay_overlay,
        normalized,
        drift,
        drift_runs,
    })
}

fn simulate_comb(cfg: &ScenarioConfig, params: PhysicalParams<f64>, opts: &RunOptions) -> Result<CombRun, RunError> {
    let grid = section(cfg.grid, "grid")?.build(params.light_speed)?;
    let comb = match cfg.profile.as_ref().map(ProfileConfig::build) {
        Some(ControlProfile::Comb(c)) => c,
        _ => return Err(ConfigError::field("profile.type", "comb runs need a comb profile").into()),
    };
    let run = section(cfg.run, "run")?;
    let plan = plan(cfg, &grid, opts)?;
    let gauss = |center: f64, width: f64, amp: [f64; 2]| -> Vec<C64> {
        (0..grid.n_points)
            .map(|i| {
                let u = (grid.z(i) - center) / width;
                cx(amp) * (-0.5 * u * u).exp()
            })
            .collect()
    };
    let nl = comb.lines.len();
    let mut st = match section(cfg.initial, "initial")? {
        InitialConfig::StoredGaussian {
            center,
            width,
            amplitude,
        } => CombState::from_spin(nl, gauss(center, width, amplitude), run.start),
        InitialConfig::SlavedGaussian {
            center,
            width,
            amplitude,
        } => CombState::slaved(&comb, &params, gauss(center, width, amplitude), run.start),
        InitialConfig::FullStorage { .. } => {
            return Err(ConfigError::field("initial.type", "full-storage is not defined for comb runs").into())
        }
    };
    let solver = CombSolver::new(params, grid, comb.clone())?;
    let steps = (run.duration / grid.dt).round() as usize;
    let dz = grid.dz();
    let record = |st: &CombState<f64>| {
        let e = total_field(st, &comb, &params, &grid);
        (
            st.t,
            slaving_deviation(st, &comb, &params, 0.1),
            e.iter().map(|v| v.norm_sqr()).sum::<f64>() * dz,
            st.sigma_bc.iter().map(|v| v.norm_sqr()).sum::<f64>() * dz,
        )
    };
    let mut series = vec![record(&st)];
    let mut snapshots = vec![st.clone()];
    let mut failure = None;
    let t0 = st.t;
    for k in 1..=steps {
        if let Err(e) = solver.step(&mut st) {
            failure = Some(e);
            break;
        }
        st.t = t0 + grid.dt * k as f64;
        if k % plan.observe_every == 0 || k == steps {
            series.push(record(&st));
        }
        if (plan.snapshot_every > 0 && k % plan.snapshot_every == 0) || (k == steps && plan.snapshot_every == 0) {
            snapshots.push(st.clone());
        }
    }
    let filtering = filtering_comparison(&st.sigma_bc, &comb, &params, &grid, st.t)?;
    Ok(CombRun {
        params,
        grid,
        solver,
        snapshots,
        series,
        final_state: st,
        filtering,
        failure,
    })
}

fn simulate_spectrum(cfg: &ScenarioConfig, params: &PhysicalParams<f64>) -> Result<SpectrumRun, RunError> {
    let s = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| ConfigError::field("spectrum", "required"))?;
    let wave = s.wave();
    let range = s.range(params.gamma);
    let omega_unit = match s.units {
        OmegaUnits::Rate => 1.0,
        OmegaUnits::LightShift => wave.omega0_sq() / params.gamma,
    };
    let mut methods = Vec::new();
    for m in &s.methods {
        match m {
            MethodConfig::Truncated => {
                for &n in &s.n_max {
                    methods.push(ChiMethod::Truncated(GratingTruncation { n_max: n }));
                }
            }
            MethodConfig::CoupledMode => methods.push(ChiMethod::CoupledMode),
            MethodConfig::SingleBeamEit => methods.push(ChiMethod::SingleBeamEit),
        }
    }
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| scope.spawn(move || spectrum_scan(m, range, s.samples, &wave, params)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("spectrum worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(SpectrumRun { results, omega_unit })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub failure: Option<String>,
    pub runtime_s: f64,
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "nan".into())
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, body: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, body)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn snapshot_csv(st: &SystemState<f64>, grid: &Grid<f64>, stride: usize) -> String {
    let mut s = String::from("z,reE+,imE+,reE-,imE-,reSbc,imSbc\n");
    for i in (0..st.len()).step_by(stride) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(grid.z(i)),
            num(st.e_plus[i].re),
            num(st.e_plus[i].im),
            num(st.e_minus[i].re),
            num(st.e_minus[i].im),
            num(st.sigma_bc[i].re),
            num(st.sigma_bc[i].im)
        );
    }
    s
}

fn observables_csv(out: &RunOutput<f64>) -> String {
    let mut s = String::from("t,width_sq,first_moment,n_tot,peak,ratio_re,ratio_im,diff_ratio,spin_width_sq,peak_field\n");
    for o in &out.observables {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            num(o.t),
            opt(o.width_sq),
            opt(o.first_moment),
            num(o.total_excitation),
            num(o.peak_density),
            opt(o.ratio.map(|r| r.re)),
            opt(o.ratio.map(|r| r.im)),
            opt(o.difference_ratio),
            opt(o.spin_width_sq),
            num(o.peak_field)
        );
    }
    s
}

fn overlay_csv(rows: &[OverlayRow]) -> String {
    let mut s = String::from("t,simulated,analytic\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", num(r.t), num(r.simulated), num(r.analytic));
    }
    s
}

pub fn chi_csv(run: &SpectrumRun) -> String {
    let mut s = String::from("omega,re_pp,im_pp,re_pm,im_pm,re_mp,im_mp,re_mm,im_mm,method,nmax\n");
    for r in &run.results {
        let nmax = r.method.n_max().map(|n| n.to_string()).unwrap_or_default();
        for (w, c) in r.omega.iter().zip(&r.chi) {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                num(w / run.omega_unit),
                num(c.pp.re),
                num(c.pp.im),
                num(c.pm.re),
                num(c.pm.im),
                num(c.mp.re),
                num(c.mp.im),
                num(c.mm.re),
                num(c.mm.im),
                r.method.tag(),
                nmax
            );
        }
    }
    s
}

/// Runs `cfg` and writes CSVs plus `manifest.json` into `dir`. A numerical
/// failure mid-run keeps the partial outputs and is recorded in the manifest
/// and the returned summary.
pub fn run_scenario(cfg: &ScenarioConfig, dir: &Path, opts: &RunOptions) -> Result<RunSummary, RunError> {
    let started = Instant::now();
    let warnings = crate::config::validate(cfg)?;
    fs::create_dir_all(dir)?;
    let mut w = Writer {
        dir,
        files: Vec::new(),
    };
    let (failure, extra) = match simulate(cfg, opts) {
        Ok(sim) => write_simulation(cfg, &sim, &mut w)?,
        Err(RunError::Numerical(e)) => (Some(e.to_string()), json!({})),
        Err(e) => return Err(e),
    };
    let runtime_s = started.elapsed().as_secs_f64();
    let mut files = w.files.clone();
    files.push("manifest.json".into());
    let manifest = json!({
        "scenario": cfg.name,
        "kind": cfg.kind,
        "description": cfg.description,
        "units": UNITS,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "warnings": warnings,
        "runtime_s": runtime_s,
        "files": files,
        "failure": failure,
        "results": extra,
    });
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(RunSummary {
        name: cfg.name.clone(),
        dir: dir.to_path_buf(),
        files,
        failure,
        runtime_s,
    })
}

fn write_simulation(
    cfg: &ScenarioConfig,
    sim: &Simulation,
    w: &mut Writer,
) -> Result<(Option<String>, serde_json::Value), RunError> {
    let stride = cfg.run.map(|r| r.snapshot_stride).unwrap_or(1).max(1);
    match sim {
        Simulation::Spectrum(run) => {
            w.write("chi.csv", &chi_csv(run))?;
            let methods: Vec<_> = run
                .results
                .iter()
                .map(|r| json!({"method": r.method.tag(), "nmax": r.method.n_max(), "samples": r.omega.len()}))
                .collect();
            Ok((None, json!({"omega_unit_rate": run.omega_unit, "methods": methods})))
        }
        Simulation::Mbe(run) => {
            let out = &run.output;
            w.write("observables.csv", &observables_csv(out))?;
            let mut snapshots = Vec::new();
            for (k, st) in out.snapshots.iter().enumerate() {
                let name = format!("snapshots/snapshot_{k:04}.csv");
                w.write(&name, &snapshot_csv(st, &run.grid, stride))?;
                snapshots.push(json!({"t": st.t, "file": name}));
            }
            if !run.width_overlay.is_empty() {
                w.write("width_overlay.csv", &overlay_csv(&run.width_overlay))?;
            }
            if !run.decay_overlay.is_empty() {
                w.write("decay_overlay.csv", &overlay_csv(&run.decay_overlay))?;
            }
            if !run.normalized.is_empty() {
                let mut s = String::from("t,peak_density,n_tot,peak_field\n");
                for r in &run.normalized {
                    let _ = writeln!(s, "{},{},{},{}", num(r.t), num(r.peak_density), num(r.n_tot), num(r.peak_field));
                }
                w.write("normalized.csv", &s)?;
            }
            if !run.drift.is_empty() {
                let mut s = String::from("cos_2phi,speed,expected_speed,diffusivity,expected_diffusivity,exact_diffusivity\n");
                for r in &run.drift {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{}",
                        num(r.cos_2phi),
                        num(r.speed),
                        num(r.expected_speed),
                        num(r.diffusivity),
                        num(r.expected_diffusivity),
                        num(r.exact_diffusivity)
                    );
                }
                w.write("drift.csv", &s)?;
            }
            let failure = out.failure.as_ref().map(|e| e.to_string());
            Ok((
                failure,
                json!({
                    "steps": out.steps,
                    "n_points": run.grid.n_points,
                    "dz": run.grid.dz(),
                    "dt": run.grid.dt,
                    "grid": {"z_min": run.grid.z_min, "z_max": run.grid.z_max, "n_points": run.grid.n_points},
                    "snapshots": snapshots,
                    "snapshot_stride": stride,
                    "final_time": out.final_state.t,
                    "solver_warnings": run.solver.warnings(),
                }),
            ))
        }
        Simulation::Comb(run) => {
            let comb = run.solver.comb();
            let mut s = String::from("t,z,re_total,im_total,re_matched,im_matched,reSbc,imSbc\n");
            for st in &run.snapshots {
                let e = total_field(st, comb, &run.params, &run.grid);
                let m = matched_field(&st.sigma_bc, comb, &run.params, &run.grid, st.t);
                for i in (0..st.len()).step_by(stride) {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{},{}",
                        num(st.t),
                        num(run.grid.z(i)),
                        num(e[i].re),
                        num(e[i].im),
                        num(m[i].re),
                        num(m[i].im),
                        num(st.sigma_bc[i].re),
                        num(st.sigma_bc[i].im)
                    );
                }
            }
            w.write("comb_fields.csv", &s)?;
            let mut s = String::from("t,slaving_deviation,photons,spin\n");
            for (t, d, p, n) in &run.series {
                let _ = writeln!(s, "{},{},{},{}", num(*t), num(*d), num(*p), num(*n));
            }
            w.write("comb_observables.csv", &s)?;
            let f = &run.filtering;
            Ok((
                run.failure.as_ref().map(|e| e.to_string()),
                json!({
                    "lines": comb.lines.len(),
                    "n_points": run.grid.n_points,
                    "final_time": run.final_state.t,
                    "filtering": {
                        "photons_comb": f.photons_comb,
                        "photons_pair": f.photons_pair,
                        "center_density_comb": f.center_density_comb,
                        "center_density_pair": f.center_density_pair,
                        "fwhm_comb": f.fwhm_comb,
                        "fwhm_pair": f.fwhm_pair,
                    },
                }),
            ))
        }
    }
}
