//! Scenario files: TOML with a documented schema, see the README for the full
//! key list. Every omitted key is filled with its default and the resolved
//! configuration is echoed into the run manifest.

use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use slp_core::model::{Grid, PhysicalParams};
use slp_core::profile::{
    BeamLaw, CombLine, CombProfile, ControlProfile, FociProfile, FocusPath, Schedule, StorageSchedule,
};
use slp_core::susceptibility::StandingWave;

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    #[default]
    Mbe,
    Spectrum,
    Comb,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub kind: Kind,
    #[serde(default)]
    pub params: ParamsConfig,
    pub grid: Option<GridConfig>,
    pub profile: Option<ProfileConfig>,
    pub initial: Option<InitialConfig>,
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub gamma0: f64,
    #[serde(default = "one")]
    pub light_speed: f64,
    #[serde(default)]
    pub one_photon_detuning: f64,
    #[serde(default)]
    pub two_photon_detuning: f64,
    #[serde(default)]
    pub carrier_offset: f64,
    #[serde(default)]
    pub wavevector_mismatch: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            coupling: 1.0,
            gamma: 1.0,
            gamma0: 0.0,
            light_speed: 1.0,
            one_photon_detuning: 0.0,
            two_photon_detuning: 0.0,
            carrier_offset: 0.0,
            wavevector_mismatch: 0.0,
        }
    }
}

impl ParamsConfig {
    pub fn build(&self) -> PhysicalParams<f64> {
        PhysicalParams {
            coupling: self.coupling,
            gamma: self.gamma,
            gamma0: self.gamma0,
            light_speed: self.light_speed,
            one_photon_detuning: self.one_photon_detuning,
            two_photon_detuning: self.two_photon_detuning,
            carrier_offset: self.carrier_offset,
            wavevector_mismatch: self.wavevector_mismatch,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub z_min: f64,
    pub z_max: f64,
    pub dz: f64,
    /// c dt / dz; 1 gives exact one-cell shifts.
    #[serde(default = "one")]
    pub cfl: f64,
}

impl GridConfig {
    pub fn build(&self, light_speed: f64) -> Result<Grid<f64>, ConfigError> {
        let g = Grid::from_spacing(self.z_min, self.z_max, self.dz, light_speed)
            .map_err(|e| ConfigError::field("grid", e.to_string()))?;
        if self.cfl == 1.0 {
            return Ok(g);
        }
        Grid::new(g.z_min, g.z_max, g.n_points, self.cfl * g.dz() / light_speed)
            .map_err(|e| ConfigError::field("grid.cfl", e.to_string()))
    }
}

/// A number, or a tanh ramp table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleConfig {
    Constant(f64),
    Tanh { from: f64, to: f64, rate: f64, center: f64 },
}

impl ScheduleConfig {
    fn build(&self) -> Schedule<f64> {
        match *self {
            ScheduleConfig::Constant(v) => Schedule::Constant(v),
            ScheduleConfig::Tanh {
                from,
                to,
                rate,
                center,
            } => Schedule::Tanh {
                from,
                to,
                rate,
                center,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FocusConfig {
    Static(f64),
    Tanh { start: f64, shift: f64, rate: f64, center: f64 },
}

impl FocusConfig {
    fn build(&self) -> FocusPath<f64> {
        match *self {
            FocusConfig::Static(z) => FocusPath::Static(z),
            FocusConfig::Tanh {
                start,
                shift,
                rate,
                center,
            } => FocusPath::Tanh {
                start,
                shift,
                rate,
                center,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BeamConfig {
    Literal,
    Paraxial { rayleigh_range: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombLineConfig {
    pub detuning: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

fn default_rate() -> f64 {
    0.1
}
fn default_off() -> f64 {
    65.0
}
fn default_on() -> f64 {
    300.0
}
fn third() -> f64 {
    1.0 / 3.0
}
fn default_cap() -> f64 {
    1e3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileConfig {
    Homogeneous {
        plus: ScheduleConfig,
        minus: ScheduleConfig,
    },
    TanhSchedule {
        #[serde(default = "default_rate")]
        rate: f64,
        #[serde(default = "default_off")]
        switch_off: f64,
        #[serde(default = "default_on")]
        switch_on: f64,
        #[serde(default = "one")]
        store_level: f64,
        #[serde(default = "third")]
        level_plus: f64,
        #[serde(default = "third")]
        level_minus: f64,
        #[serde(default = "default_cap")]
        omega_max: f64,
    },
    GaussianFoci {
        beam: BeamConfig,
        plus_focus: FocusConfig,
        minus_focus: FocusConfig,
        #[serde(default = "one")]
        peak_plus: f64,
        #[serde(default = "one")]
        peak_minus: f64,
        #[serde(default = "unit_schedule")]
        envelope: ScheduleConfig,
    },
    Comb {
        lines: Vec<CombLineConfig>,
    },
    /// Fixed total Omega_0 with cos(2 phi) = -z/l.
    LinearRatio {
        omega0: f64,
        l: f64,
    },
}

fn unit_schedule() -> ScheduleConfig {
    ScheduleConfig::Constant(1.0)
}

impl ProfileConfig {
    pub fn build(&self) -> ControlProfile<f64> {
        match self {
            ProfileConfig::Homogeneous { plus, minus } => ControlProfile::Homogeneous {
                plus: plus.build(),
                minus: minus.build(),
            },
            ProfileConfig::TanhSchedule {
                rate,
                switch_off,
                switch_on,
                store_level,
                level_plus,
                level_minus,
                omega_max,
            } => ControlProfile::TanhSchedule(StorageSchedule {
                rate: *rate,
                switch_off: *switch_off,
                switch_on: *switch_on,
                store_level: *store_level,
                level_plus: *level_plus,
                level_minus: *level_minus,
                omega_max: *omega_max,
            }),
            ProfileConfig::GaussianFoci {
                beam,
                plus_focus,
                minus_focus,
                peak_plus,
                peak_minus,
                envelope,
            } => ControlProfile::GaussianFoci(FociProfile {
                beam: match *beam {
                    BeamConfig::Literal => BeamLaw::Literal,
                    BeamConfig::Paraxial { rayleigh_range } => BeamLaw::Paraxial { rayleigh_range },
                },
                plus_focus: plus_focus.build(),
                minus_focus: minus_focus.build(),
                peak_plus: *peak_plus,
                peak_minus: *peak_minus,
                envelope: envelope.build(),
            }),
            ProfileConfig::Comb { lines } => ControlProfile::Comb(comb_profile(lines)),
            ProfileConfig::LinearRatio { omega0, l } => ControlProfile::LinearRatio {
                omega0: *omega0,
                l: *l,
            },
        }
    }
}

/// Forward and backward components of a line share amplitude and phase.
pub fn comb_profile(lines: &[CombLineConfig]) -> CombProfile<f64> {
    CombProfile {
        lines: lines
            .iter()
            .map(|l| {
                let a = Complex::from_polar(l.amplitude, l.phase);
                CombLine {
                    detuning: l.detuning,
                    plus: a,
                    minus: a,
                }
            })
            .collect(),
    }
}

fn unit_amp() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    /// Spin coherence Gaussian, empty fields.
    StoredGaussian {
        center: f64,
        width: f64,
        /// [re, im]
        #[serde(default = "unit_amp")]
        amplitude: [f64; 2],
    },
    /// Spin Gaussian with every comb line already slaved to it (comb runs only).
    SlavedGaussian {
        center: f64,
        width: f64,
        #[serde(default = "unit_amp")]
        amplitude: [f64; 2],
    },
    /// Forward probe pulse dressed by the forward control at t = start.
    FullStorage {
        center: f64,
        width: f64,
        #[serde(default = "unit_amp")]
        amplitude: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelConfig {
    #[default]
    Full,
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeConfig {
    #[default]
    Exponential,
    Rk4,
}

fn ten() -> usize {
    10
}
fn default_snapshots() -> usize {
    100
}
fn four() -> usize {
    4
}
fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration: f64,
    #[serde(default)]
    pub start: f64,
    /// Steps between observable rows.
    #[serde(default = "ten")]
    pub observe_every: usize,
    /// Steps between field snapshots; 0 keeps the first and last only.
    #[serde(default = "default_snapshots")]
    pub snapshot_every: usize,
    /// Keep every n-th grid point in snapshot files.
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    /// Controls are sampled at window midpoints of this length; omitted means every half step.
    pub control_refresh: Option<f64>,
    #[serde(default)]
    pub moment_center: f64,
    #[serde(default = "four")]
    pub moment_buffer: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlayConfig {
    /// Overlay starts from the simulated value at this time.
    pub start: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSweepConfig {
    pub cos_2phi: Vec<f64>,
    /// Total control Omega_0 = sqrt(|Omega_+|^2 + |Omega_-|^2).
    pub omega0: f64,
    /// Fit window start.
    pub fit_start: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Simulated width^2 against the moment-equation law.
    pub exact_width: Option<OverlayConfig>,
    /// Simulated n_tot against the diffusive decay law.
    pub diffusive_decay: Option<OverlayConfig>,
    /// Peak density and n_tot normalized at this time.
    pub normalize_at: Option<f64>,
    pub drift: Option<DriftSweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmegaUnits {
    /// omega given directly as a rate.
    Rate,
    /// omega in units of Omega_0^2/gamma.
    LightShift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodConfig {
    Truncated,
    CoupledMode,
    SingleBeamEit,
}

fn default_methods() -> Vec<MethodConfig> {
    vec![MethodConfig::Truncated, MethodConfig::CoupledMode]
}
fn default_nmax() -> Vec<usize> {
    vec![5]
}
fn light_shift() -> OmegaUnits {
    OmegaUnits::LightShift
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// [re, im] of Omega_+ and Omega_-.
    pub omega_plus: [f64; 2],
    pub omega_minus: [f64; 2],
    pub omega_min: f64,
    pub omega_max: f64,
    pub samples: usize,
    #[serde(default = "light_shift")]
    pub units: OmegaUnits,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodConfig>,
    /// Truncation orders used by the truncated method.
    #[serde(default = "default_nmax")]
    pub n_max: Vec<usize>,
}

impl SpectrumConfig {
    pub fn wave(&self) -> StandingWave<f64> {
        StandingWave::new(
            Complex::new(self.omega_plus[0], self.omega_plus[1]),
            Complex::new(self.omega_minus[0], self.omega_minus[1]),
        )
    }

    /// Sampling range as rates.
    pub fn range(&self, gamma: f64) -> (f64, f64) {
        let unit = match self.units {
            OmegaUnits::Rate => 1.0,
            OmegaUnits::LightShift => self.wave().omega0_sq() / gamma,
        };
        (self.omega_min * unit, self.omega_max * unit)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigError::Schema {
            origin: origin.to_string(),
            line,
            message: e.message().to_string(),
        }
    })?;
    let warnings = validate(&cfg)?;
    for w in warnings {
        log::warn!("{}: {w}", cfg.name);
    }
    Ok(cfg)
}

/// Physics checks. Hard failures are returned as errors, soft ones as warnings.
pub fn validate(cfg: &ScenarioConfig) -> Result<Vec<String>, ConfigError> {
    let mut warnings = Vec::new();
    if cfg.name.trim().is_empty() {
        return Err(ConfigError::field("name", "must not be empty"));
    }
    let params = cfg.params.build();
    params
        .validate()
        .map_err(|e| ConfigError::Physics(e.to_string()))?;
    match cfg.kind {
        Kind::Spectrum => {
            let s = cfg
                .spectrum
                .as_ref()
                .ok_or_else(|| ConfigError::field("spectrum", "required for kind = \"spectrum\""))?;
            if s.samples == 0 {
                return Err(ConfigError::field("spectrum.samples", "must be >= 1"));
            }
            if !(s.omega_max >= s.omega_min) {
                return Err(ConfigError::field("spectrum.omega_max", "must be >= omega_min"));
            }
            if s.methods.is_empty() {
                return Err(ConfigError::field("spectrum.methods", "list at least one method"));
            }
        }
        Kind::Mbe | Kind::Comb => {
            let grid_cfg = cfg
                .grid
                .ok_or_else(|| ConfigError::field("grid", "required for time-domain runs"))?;
            let grid = grid_cfg.build(params.light_speed)?;
            grid.check_cfl(params.light_speed)
                .map_err(|e| ConfigError::Physics(e.to_string()))?;
            let profile = cfg
                .profile
                .as_ref()
                .ok_or_else(|| ConfigError::field("profile", "required for time-domain runs"))?
                .build();
            profile
                .validate()
                .map_err(|e| ConfigError::Physics(e.to_string()))?;
            let run = cfg
                .run
                .ok_or_else(|| ConfigError::field("run", "required for time-domain runs"))?;
            if !(run.duration > 0.0) {
                return Err(ConfigError::field("run.duration", "must be > 0"));
            }
            if run.snapshot_stride == 0 {
                return Err(ConfigError::field("run.snapshot_stride", "must be >= 1"));
            }
            if cfg.initial.is_none() {
                return Err(ConfigError::field("initial", "required for time-domain runs"));
            }
            if cfg.kind == Kind::Comb && !matches!(profile, ControlProfile::Comb(_)) {
                return Err(ConfigError::field("profile.type", "comb runs need a comb profile"));
            }
            if cfg.kind == Kind::Mbe && matches!(cfg.initial, Some(InitialConfig::SlavedGaussian { .. })) {
                return Err(ConfigError::field("initial.type", "slaved-gaussian is only defined for comb runs"));
            }
            let od = params.optical_depth(grid.length());
            if od < 10.0 {
                warnings.push(format!("optical depth {od:.1} is small; pulse matching needs OD >> 1"));
            }
            // comb runs only need to resolve the spin envelope
            let per_abs = params.absorption_length() / grid.dz();
            if cfg.kind == Kind::Mbe && per_abs < 1.0 {
                warnings.push(format!(
                    "dz = {:.3e} exceeds the absorption length {:.3e}",
                    grid.dz(),
                    params.absorption_length()
                ));
            }
            if run.model == ModelConfig::Adiabatic && grid.dt * params.gamma >= 1.0 {
                warnings.push("adiabatic model with dt*gamma >= 1".to_string());
            }
        }
    }
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"

[grid]
z_min = -10.0
z_max = 10.0
dz = 0.5

[profile]
type = "homogeneous"
plus = 1.0
minus = 1.0

[initial]
type = "stored-gaussian"
center = 0.0
width = 2.0

[run]
duration = 5.0
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL, "inline").unwrap();
        assert_eq!(c.kind, Kind::Mbe);
        assert_eq!(c.params.gamma, 1.0);
        assert_eq!(c.params.coupling, 1.0);
        let run = c.run.unwrap();
        assert_eq!(run.observe_every, 10);
        assert_eq!(run.moment_buffer, 4);
        assert_eq!(run.model, ModelConfig::Full);
        assert_eq!(c.grid.unwrap().cfl, 1.0);
        match c.initial.unwrap() {
            InitialConfig::StoredGaussian { amplitude, .. } => assert_eq!(amplitude, [1.0, 0.0]),
            _ => panic!(),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let bad = MINIMAL.replace("duration = 5.0", "duration = 5.0\nsnapshots = 3");
        match parse_config(&bad, "inline") {
            Err(ConfigError::Schema { line, message, .. }) => {
                assert_eq!(line, Some(21));
                assert!(message.contains("snapshots"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cfl_above_one_is_refused() {
        let bad = MINIMAL.replace("dz = 0.5", "dz = 0.5\ncfl = 1.5");
        assert!(matches!(parse_config(&bad, "inline"), Err(ConfigError::Physics(_))));
    }

    #[test]
    fn missing_sections_are_named() {
        let bad = MINIMAL.replace("[run]\nduration = 5.0", "");
        match parse_config(&bad, "inline") {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "run"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schedule_table_form() {
        let txt = MINIMAL.replace(
            "plus = 1.0",
            "plus = { from = 0.0, to = 1.0, rate = 0.1, center = 50.0 }",
        );
        let c = parse_config(&txt, "inline").unwrap();
        let p = c.profile.unwrap().build();
        let (a, _) = p.control_field_at(&c.params.build(), 0.0, 50.0).unwrap();
        assert!((a.re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn light_shift_units() {
        let s = SpectrumConfig {
            omega_plus: [0.1 / 2f64.sqrt(), 0.0],
            omega_minus: [0.1 / 2f64.sqrt(), 0.0],
            omega_min: -2.0,
            omega_max: 2.0,
            samples: 3,
            units: OmegaUnits::LightShift,
            methods: default_methods(),
            n_max: vec![5],
        };
        let (lo, hi) = s.range(1.0);
        assert!((lo + 0.02).abs() < 1e-15 && (hi - 0.02).abs() < 1e-15);
    }
}
