//! Run configuration: a TOML file with `physics`, `grid`, `time`, `ic` and
//! `output` sections plus optional experiment sections. Unknown keys are
//! rejected. Defaults are filled in before anything runs and the resolved
//! configuration is what gets written to the manifest.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mhdbfed_core::verification::{ICSpec, ManufacturedPair, StudyKind};
use mhdbfed_core::{Grid, PhysParams, RkOrder, TimeControls};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub physics: Physics,
    pub grid: GridConfig,
    pub time: Time,
    pub ic: Ic,
    #[serde(default)]
    pub output: Output,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dependence: Option<Dependence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mms: Option<Mms>,
    /// Provenance written by the tool itself; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<ManifestInfo>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    pub nu: f64,
    pub kappa: f64,
    pub a: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default = "two_pi")]
    pub l: f64,
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Time {
    pub t_end: f64,
    /// Shorthand for a fixed step; overrides the other step keys.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_init: Option<f64>,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_rk")]
    pub rk_order: u32,
}

fn default_dt_min() -> f64 {
    1e-8
}

fn default_dt_max() -> f64 {
    1e-2
}

fn default_cfl() -> f64 {
    0.5
}

fn default_rk() -> u32 {
    4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcKindName {
    SingleMode,
    RandomBand,
    TaylorGreen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ic {
    pub kind: IcKindName,
    /// Single mode: wavevector and direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<[i64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<[f64; 3]>,
    /// Single mode and Taylor–Green amplitudes.
    #[serde(default = "one")]
    pub amplitude_u: f64,
    #[serde(default)]
    pub amplitude_b: f64,
    /// Random band: largest wavenumber component and fluctuation energies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kmax: Option<i64>,
    #[serde(default = "one")]
    pub energy_u: f64,
    #[serde(default = "one")]
    pub energy_b: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mean_u: [f64; 3],
    #[serde(default)]
    pub mean_b: [f64; 3],
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_cadence")]
    pub monitor_cadence: usize,
    /// Steps between checkpoints; 0 disables them.
    #[serde(default)]
    pub checkpoint_cadence: usize,
    /// Start from this snapshot instead of the initial condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart: Option<PathBuf>,
}

impl Default for Output {
    fn default() -> Self {
        Output {
            monitor_cadence: default_cadence(),
            checkpoint_cadence: 0,
            restart: None,
        }
    }
}

fn default_cadence() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
    pub nu: Vec<f64>,
    pub kappa: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dependence {
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
}

fn default_deltas() -> Vec<f64> {
    vec![1e-3, 1e-4, 1e-5, 0.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmsKind {
    Temporal,
    Spatial,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmsProfile {
    TrigPolynomial,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mms {
    pub kind: MmsKind,
    #[serde(default = "default_profile")]
    pub profile: MmsProfile,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Step sizes (temporal) or resolutions (spatial), coarse to fine.
    pub levels: Vec<f64>,
}

fn default_profile() -> MmsProfile {
    MmsProfile::TrigPolynomial
}

fn default_rho() -> f64 {
    0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestInfo {
    pub command: String,
    pub config_path: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub version: String,
}

impl SimConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: SimConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        self.params()?;
        self.grid()?;
        self.controls()?;
        if self.ic.kind == IcKindName::SingleMode && self.ic.k.is_none() {
            bail!("ic.k is required for kind = \"single_mode\"");
        }
        if self.output.monitor_cadence == 0 {
            bail!("output.monitor_cadence must be at least 1");
        }
        if let Some(s) = &self.sweep {
            for (name, v) in [("alpha", &s.alpha), ("a", &s.a), ("nu", &s.nu), ("kappa", &s.kappa)] {
                if v.is_empty() {
                    bail!("sweep.{name} must list at least one value");
                }
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Result<PhysParams> {
        let p = self.physics;
        Ok(PhysParams::new(p.nu, p.kappa, p.a, p.alpha)?)
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.grid.n, self.grid.l)?)
    }

    pub fn rk_order(&self) -> Result<RkOrder> {
        Ok(RkOrder::from_order(self.time.rk_order)?)
    }

    pub fn controls(&self) -> Result<TimeControls> {
        let t = &self.time;
        let rk_order = self.rk_order()?;
        let controls = match t.dt {
            Some(dt) => TimeControls::fixed(dt, t.t_end, rk_order),
            None => TimeControls {
                dt_init: t.dt_init.unwrap_or(t.dt_max),
                dt_min: t.dt_min,
                dt_max: t.dt_max,
                cfl_safety: t.cfl_safety,
                t_end: t.t_end,
                rk_order,
            },
        };
        controls.validate()?;
        Ok(controls)
    }

    /// The initial-condition recipe with `seed` substituted.
    pub fn ic_spec(&self, seed: u64) -> ICSpec {
        let ic = &self.ic;
        let mut spec = match ic.kind {
            IcKindName::SingleMode => ICSpec::single_mode(
                ic.k.unwrap_or([1, 0, 0]),
                ic.direction.unwrap_or([0.0, 1.0, 0.0]),
                ic.amplitude_u,
            ),
            IcKindName::RandomBand => {
                let kmax = ic.kmax.unwrap_or(self.grid.n as i64 / 3);
                ICSpec::random_band(kmax, ic.energy_u, ic.energy_b, seed)
            }
            IcKindName::TaylorGreen => ICSpec::taylor_green(ic.amplitude_u, ic.amplitude_b),
        };
        spec.seed = seed;
        spec.mean_u = ic.mean_u;
        spec.mean_b = ic.mean_b;
        spec
    }

    pub fn mms_pair(&self) -> Result<(StudyKind, ManufacturedPair, Vec<f64>)> {
        let Some(m) = &self.mms else {
            bail!("the mms command needs an [mms] section");
        };
        let l = self.grid.l;
        let pair = match m.profile {
            MmsProfile::TrigPolynomial => ManufacturedPair::trig_polynomial(l),
            MmsProfile::Geometric => ManufacturedPair::geometric(l, m.rho),
        };
        let kind = match m.kind {
            MmsKind::Temporal => StudyKind::Temporal,
            MmsKind::Spatial => StudyKind::Spatial,
        };
        Ok((kind, pair, m.levels.clone()))
    }

    /// Copy with every default written out and the run provenance attached.
    pub fn resolved(&self, info: ManifestInfo) -> SimConfig {
        let mut out = self.clone();
        out.ic.seed = info.seed;
        if out.ic.kind == IcKindName::RandomBand && out.ic.kmax.is_none() {
            out.ic.kmax = Some(self.grid.n as i64 / 3);
        }
        if out.time.dt.is_none() && out.time.dt_init.is_none() {
            out.time.dt_init = Some(out.time.dt_max);
        }
        out.manifest = Some(info);
        out
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Commands whose contract relies on uniqueness of weak solutions.
pub fn lint(config: &SimConfig, command: &str) -> Vec<String> {
    let mut warnings = Vec::new();
    if command == "dependence" && config.physics.alpha < 1.5 {
        warnings.push(format!(
            "alpha = {} < 3/2: uniqueness of solutions is not guaranteed, the dependence scaling law may not apply",
            config.physics.alpha
        ));
    }
    warnings
}
