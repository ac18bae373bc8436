//! Declarative scenario files.
//!
//! Scenarios are flat TOML documents with fixed field names; unknown keys
//! are rejected so typos fail fast. Each `kind` pulls the sections it needs
//! and validation errors name the offending field.

use serde::{Deserialize, Serialize};

use pairspec::atomic::{
    coherence_sensitivities, LevelPair, QuadrupoleEnvironment, Sublevel, Term,
};
use pairspec::experiment::{
    GradientScenario, PhasePolicy, Preparation, RamseyPlan, Scan,
};
use pairspec::noise::{child_seed, NoiseModel};
use pairspec::trap::{gradient_from_axial_freq, two_ion_distance, TrapConfig};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Gradient,
    QuadrupoleProduct,
    QuadrupoleBell,
    Linewidth,
    Custom,
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ScenarioKind::Gradient => "gradient",
            ScenarioKind::QuadrupoleProduct => "quadrupole_product",
            ScenarioKind::QuadrupoleBell => "quadrupole_bell",
            ScenarioKind::Linewidth => "linewidth",
            ScenarioKind::Custom => "custom",
        };
        f.write_str(name)
    }
}

fn default_seed() -> u64 {
    1
}

fn default_corr_time() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_phase_points() -> u32 {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub shots_per_point: u32,
    /// Output path prefix; the CLI `--out` flag overrides it.
    #[serde(default)]
    pub outputs: Option<String>,
    pub noise: NoiseSection,
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub trap: Option<TrapSection>,
    #[serde(default)]
    pub quadrupole: Option<QuadrupoleSection>,
    #[serde(default)]
    pub wait_scan: Option<WaitScanSection>,
    #[serde(default)]
    pub phase_scan: Option<PhaseScanSection>,
    #[serde(default)]
    pub gradient: Option<GradientSection>,
    #[serde(default)]
    pub custom: Option<CustomSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub b_rms_gauss: f64,
    #[serde(default = "default_corr_time")]
    pub b_corr_time_s: f64,
    #[serde(default)]
    pub laser_fwhm_hz: f64,
    #[serde(default)]
    pub laser_offset_hz: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSection {
    #[serde(default)]
    pub b0_gauss: f64,
    /// Constant offset on the parity frequency from the second-order Zeeman
    /// effect, Hz.
    #[serde(default)]
    pub second_order_zeeman_offset_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    pub axial_freq_hz: f64,
    pub radial_freq_hz: f64,
    pub ion_mass_amu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrupoleSection {
    /// Θ(D, j)/h, Hz per (V/mm²).
    pub theta_moment_hz_per_v_mm2: f64,
    #[serde(default)]
    pub beta_rad: f64,
    /// Field gradients to sweep; empty means one gradient derived from the
    /// trap's axial frequency.
    #[serde(default)]
    pub gradients_v_per_mm2: Vec<f64>,
    /// Reach the dephased mixture through the magnetic noise (true) or by
    /// the explicit dephasing channel at preparation (false).
    #[serde(default = "default_true")]
    pub emergent_dephasing: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaitScanSection {
    pub start_s: f64,
    pub stop_s: f64,
    pub points: u32,
    /// Extra wait times prepended to the grid (e.g. an anomalously early
    /// point that the fit excludes).
    #[serde(default)]
    pub extra_s: Vec<f64>,
    /// Points below this wait are ignored by the damped-sinusoid fit.
    #[serde(default)]
    pub fit_exclude_below_s: f64,
}

impl WaitScanSection {
    fn validate(&self) -> Result<(), CliError> {
        if self.points < 2 {
            return Err(CliError::Validation(format!(
                "wait_scan.points must be at least 2, got {}",
                self.points
            )));
        }
        if !(self.stop_s > self.start_s) || self.start_s < 0.0 {
            return Err(CliError::Validation(format!(
                "wait_scan start/stop must satisfy 0 <= start < stop, got {} .. {}",
                self.start_s, self.stop_s
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let mut waits = self.extra_s.clone();
        for i in 0..self.points {
            let frac = f64::from(i) / f64::from(self.points - 1);
            waits.push(self.start_s + frac * (self.stop_s - self.start_s));
        }
        waits
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseScanSection {
    /// Number of equally spaced analysis phases over [0, 2π).
    #[serde(default = "default_phase_points")]
    pub points: u32,
    /// Ramsey times at which the fringe is recorded.
    pub waits_s: Vec<f64>,
}

impl PhaseScanSection {
    pub fn phases(&self) -> Vec<f64> {
        (0..self.points.max(2))
            .map(|i| f64::from(i) * std::f64::consts::TAU / f64::from(self.points.max(2)))
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientSection {
    pub db_per_dz_g_per_m: f64,
    /// Ion separation; derived from the trap when omitted.
    #[serde(default)]
    pub distance_m: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelSpec {
    pub term: Term,
    pub m_twice: i32,
    /// Overrides the term's default lifetime when set, seconds.
    #[serde(default)]
    pub lifetime_s: Option<f64>,
}

impl LevelSpec {
    fn build(&self, context: &str) -> Result<Sublevel, CliError> {
        let level = Sublevel::new(self.term, self.m_twice)
            .map_err(|e| CliError::Validation(format!("{context}: {e}")))?;
        match self.lifetime_s {
            Some(tau) if tau > 0.0 => level
                .with_lifetime(tau)
                .map_err(|e| CliError::Validation(format!("{context}.lifetime_s: {e}"))),
            Some(tau) => Err(CliError::Validation(format!(
                "{context}.lifetime_s must be > 0, got {tau}"
            ))),
            None => Ok(level),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub lower: LevelSpec,
    pub upper: LevelSpec,
    pub laser_coupled: bool,
    #[serde(default)]
    pub static_detuning_hz: f64,
}

impl PairSpec {
    fn build(&self, env: &QuadrupoleEnvironment, context: &str) -> Result<LevelPair, CliError> {
        let lower = self.lower.build(&format!("{context}.lower"))?;
        let upper = self.upper.build(&format!("{context}.upper"))?;
        coherence_sensitivities(lower, upper, env, self.laser_coupled)
            .map(|p| p.with_static_detuning(self.static_detuning_hz))
            .map_err(|e| CliError::Validation(format!("{context}: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSection {
    pub preparation: Preparation,
    pub policy: PhasePolicy,
    pub scan: Scan,
    pub pair1: PairSpec,
    pub pair2: PairSpec,
    #[serde(default)]
    pub fit_exclude_below_s: f64,
}

/// A scenario resolved into concrete simulation plans.
#[derive(Debug)]
pub enum Execution {
    Quadrupole {
        /// (field gradient, plan, analytic parity frequency) per sweep point.
        runs: Vec<(f64, RamseyPlan, f64)>,
        /// |quadrupole sensitivity difference| of the two pairs, Hz/(V/mm²).
        alpha_true: f64,
        fit_exclude_below: f64,
    },
    Gradient { scenario: GradientScenario },
    Linewidth {
        /// (wait, plan) per Ramsey time; each plan scans the fringe phase.
        runs: Vec<(f64, RamseyPlan)>,
    },
    Custom {
        plan: RamseyPlan,
        fit_exclude_below: f64,
    },
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        if scenario.name.is_empty() {
            return Err(CliError::Validation("name must not be empty".into()));
        }
        if scenario.shots_per_point < 1 {
            return Err(CliError::Validation(
                "shots_per_point must be at least 1".into(),
            ));
        }
        Ok(scenario)
    }

    fn noise_model(&self, seed: u64) -> Result<NoiseModel, CliError> {
        NoiseModel::new(
            self.noise.b_rms_gauss,
            self.noise.b_corr_time_s,
            self.noise.laser_fwhm_hz,
            self.noise.laser_offset_hz,
            seed,
        )
        .map_err(|e| CliError::Validation(format!("noise: {e}")))
    }

    fn trap_config(&self, context: &str) -> Result<TrapConfig, CliError> {
        let section = self
            .trap
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("{context} requires a [trap] section")))?;
        TrapConfig::new(
            section.axial_freq_hz,
            section.radial_freq_hz,
            section.ion_mass_amu,
        )
        .map_err(|e| CliError::Validation(format!("trap: {e}")))
    }

    /// The quadrupole-measurement level pairs: D(−5/2)→D(−1/2) on ion 1 and
    /// D(−1/2)→D(+3/2) on ion 2, magnetically decoherence-free.
    fn quadrupole_pairs(
        &self,
        env: &QuadrupoleEnvironment,
    ) -> Result<(LevelPair, LevelPair), CliError> {
        let build = |low, up| -> Result<LevelPair, CliError> {
            coherence_sensitivities(
                Sublevel::d_five_half(low).expect("valid sublevel"),
                Sublevel::d_five_half(up).expect("valid sublevel"),
                env,
                false,
            )
            .map_err(|e| CliError::Validation(format!("quadrupole pairs: {e}")))
        };
        let pair1 = build(-5, -1)?
            .with_static_detuning(self.field.second_order_zeeman_offset_hz);
        let pair2 = build(-1, 3)?;
        Ok((pair1, pair2))
    }

    /// Resolve the scenario into executable plans, applying overrides.
    pub fn build_execution(
        &self,
        seed: u64,
        shots_override: Option<u32>,
    ) -> Result<Execution, CliError> {
        let shots = shots_override.unwrap_or(self.shots_per_point).max(1);
        match self.kind {
            ScenarioKind::QuadrupoleProduct | ScenarioKind::QuadrupoleBell => {
                let quad = self.quadrupole.as_ref().ok_or_else(|| {
                    CliError::Validation(format!(
                        "kind {} requires a [quadrupole] section",
                        self.kind
                    ))
                })?;
                let wait = self.wait_scan.as_ref().ok_or_else(|| {
                    CliError::Validation(format!(
                        "kind {} requires a [wait_scan] section",
                        self.kind
                    ))
                })?;
                wait.validate()?;
                let gradients = if quad.gradients_v_per_mm2.is_empty() {
                    vec![gradient_from_axial_freq(
                        &self.trap_config("an empty quadrupole.gradients_v_per_mm2 list")?,
                    )]
                } else {
                    quad.gradients_v_per_mm2.clone()
                };
                let reference_env =
                    QuadrupoleEnvironment::new(1.0, quad.beta_rad, quad.theta_moment_hz_per_v_mm2);
                let pairs = self.quadrupole_pairs(&reference_env)?;
                let alpha_true =
                    (pairs.0.quadrupole_sensitivity - pairs.1.quadrupole_sensitivity).abs();
                let preparation = match self.kind {
                    ScenarioKind::QuadrupoleBell => Preparation::Bell(0.0),
                    _ if quad.emergent_dephasing => Preparation::Product,
                    _ => Preparation::DephasedProduct,
                };
                if matches!(preparation, Preparation::Product) && self.noise.b_rms_gauss == 0.0 {
                    return Err(CliError::Validation(
                        "quadrupole.emergent_dephasing = true needs noise.b_rms_gauss > 0 \
                         (or set emergent_dephasing = false)"
                            .into(),
                    ));
                }
                let runs = gradients
                    .iter()
                    .enumerate()
                    .map(|(idx, &gradient)| {
                        let env = QuadrupoleEnvironment::new(
                            gradient,
                            quad.beta_rad,
                            quad.theta_moment_hz_per_v_mm2,
                        );
                        let plan = RamseyPlan {
                            preparation,
                            pairs,
                            scan: Scan::WaitScan(wait.grid()),
                            phase_policy: PhasePolicy::Fixed { phi1: 0.0, phi2: 0.0 },
                            shots_per_point: shots,
                            noise: self.noise_model(child_seed(seed, idx as u64))?,
                            env,
                            b0: self.field.b0_gauss,
                        };
                        let analytic = ((pairs.0.quadrupole_sensitivity
                            - pairs.1.quadrupole_sensitivity)
                            * gradient
                            + self.field.second_order_zeeman_offset_hz)
                            .abs();
                        Ok((gradient, plan, analytic))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok(Execution::Quadrupole {
                    runs,
                    alpha_true,
                    fit_exclude_below: wait.fit_exclude_below_s,
                })
            }
            ScenarioKind::Gradient => {
                let section = self.gradient.as_ref().ok_or_else(|| {
                    CliError::Validation("kind gradient requires a [gradient] section".into())
                })?;
                let wait = self.wait_scan.as_ref().ok_or_else(|| {
                    CliError::Validation("kind gradient requires a [wait_scan] section".into())
                })?;
                wait.validate()?;
                let distance = match section.distance_m {
                    Some(d) if d > 0.0 => d,
                    Some(d) => {
                        return Err(CliError::Validation(format!(
                            "gradient.distance_m must be > 0, got {d}"
                        )))
                    }
                    None => two_ion_distance(
                        &self.trap_config("gradient without an explicit distance_m")?,
                    ),
                };
                let env = QuadrupoleEnvironment::new(0.0, 0.0, 0.0);
                let pair = coherence_sensitivities(
                    Sublevel::s_half(1).expect("valid sublevel"),
                    Sublevel::d_five_half(5).expect("valid sublevel"),
                    &env,
                    true,
                )
                .expect("distinct levels");
                Ok(Execution::Gradient {
                    scenario: GradientScenario {
                        db_per_dz: section.db_per_dz_g_per_m,
                        distance,
                        pair,
                        waits: wait.grid(),
                        shots_per_point: shots,
                        noise: self.noise_model(seed)?,
                        b0: self.field.b0_gauss,
                    },
                })
            }
            ScenarioKind::Linewidth => {
                let section = self.phase_scan.as_ref().ok_or_else(|| {
                    CliError::Validation("kind linewidth requires a [phase_scan] section".into())
                })?;
                if section.waits_s.is_empty() {
                    return Err(CliError::Validation(
                        "phase_scan.waits_s must not be empty".into(),
                    ));
                }
                let env = QuadrupoleEnvironment::new(0.0, 0.0, 0.0);
                let pair1 = coherence_sensitivities(
                    Sublevel::s_half(-1).expect("valid sublevel"),
                    Sublevel::d_five_half(-1).expect("valid sublevel"),
                    &env,
                    true,
                )
                .expect("distinct levels");
                let pair2 = coherence_sensitivities(
                    Sublevel::s_half(1).expect("valid sublevel"),
                    Sublevel::d_five_half(1).expect("valid sublevel"),
                    &env,
                    true,
                )
                .expect("distinct levels");
                let runs = section
                    .waits_s
                    .iter()
                    .enumerate()
                    .map(|(idx, &wait)| {
                        let plan = RamseyPlan {
                            preparation: Preparation::Product,
                            pairs: (pair1, pair2),
                            scan: Scan::PhaseScan { phases: section.phases(), wait },
                            phase_policy: PhasePolicy::RandomizedLaserSensitive { phi0: 0.0 },
                            shots_per_point: shots,
                            noise: self.noise_model(child_seed(seed, idx as u64))?,
                            env,
                            b0: self.field.b0_gauss,
                        };
                        Ok((wait, plan))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok(Execution::Linewidth { runs })
            }
            ScenarioKind::Custom => {
                let section = self.custom.as_ref().ok_or_else(|| {
                    CliError::Validation("kind custom requires a [custom] section".into())
                })?;
                let env = match &self.quadrupole {
                    Some(q) => QuadrupoleEnvironment::new(
                        q.gradients_v_per_mm2.first().copied().unwrap_or(0.0),
                        q.beta_rad,
                        q.theta_moment_hz_per_v_mm2,
                    ),
                    None => QuadrupoleEnvironment::new(0.0, 0.0, 0.0),
                };
                let pair1 = section.pair1.build(&env, "custom.pair1")?;
                let pair2 = section.pair2.build(&env, "custom.pair2")?;
                let plan = RamseyPlan {
                    preparation: section.preparation,
                    pairs: (pair1, pair2),
                    scan: section.scan.clone(),
                    phase_policy: section.policy,
                    shots_per_point: shots,
                    noise: self.noise_model(seed)?,
                    env,
                    b0: self.field.b0_gauss,
                };
                plan.validate()
                    .map_err(|e| CliError::Validation(e.to_string()))?;
                Ok(Execution::Custom {
                    plan,
                    fit_exclude_below: section.fit_exclude_below_s,
                })
            }
        }
    }
}
