//! Run configuration: a single TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gtl_core::cone::CurvatureProfile;
use gtl_core::geometry::{build_surface, SurfaceConfig, SurfaceKind};

use crate::RunError;

/// Output format for tabular artifacts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }

    pub fn parse(s: &str) -> Result<Self, RunError> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(RunError::config(format!(
                "unknown format `{other}` (expected csv or jsonl)"
            ))),
        }
    }
}

/// The verification suites the binary can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    VerifyStructure,
    Kernels,
    Flaminio,
    Stability,
    Trace,
    Algebra,
    Dolbeault,
    Bundle,
    Cone,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::VerifyStructure,
        Suite::Kernels,
        Suite::Flaminio,
        Suite::Stability,
        Suite::Trace,
        Suite::Algebra,
        Suite::Dolbeault,
        Suite::Bundle,
        Suite::Cone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::VerifyStructure => "verify-structure",
            Suite::Kernels => "kernels",
            Suite::Flaminio => "flaminio",
            Suite::Stability => "stability",
            Suite::Trace => "trace",
            Suite::Algebra => "algebra",
            Suite::Dolbeault => "dolbeault",
            Suite::Bundle => "bundle",
            Suite::Cone => "cone",
        }
    }

    /// Check names the suite reports, for `--list-checks`.
    pub fn check_names(self) -> &'static [&'static str] {
        match self {
            Suite::VerifyStructure => &[
                "[V,X]-H",
                "[H,V]-X",
                "[X,H]-KV",
                "[-iV,eta+]-eta+",
                "[-iV,eta-]+eta-",
                "[eta+,eta-]-iKV/2",
                "energy-identity",
                "flat-ladder-equality",
                "projection-commutator",
            ],
            Suite::Kernels => &["kernel-dimensions", "kernel-gap"],
            Suite::Flaminio => &[
                "recovery-phi-0",
                "recovery-phi-1",
                "recovery-phi-i-half",
                "zero-data-exact",
            ],
            Suite::Stability => &["ratio-finite", "ratio-stable"],
            Suite::Trace => &["growth-window", "round-trip-exact"],
            Suite::Algebra => &["product-holomorphy", "unit-law", "associativity"],
            Suite::Dolbeault => &["d-squared-zero", "solver-exact"],
            Suite::Bundle => &[
                "gauge-residual",
                "class-reduces",
                "integral-vanishes",
                "nonzero-mean-flagged",
            ],
            Suite::Cone => &[
                "trajectory-finite",
                "closed-form",
                "conjugate-count",
                "riccati-consistency",
                "riccati-limits",
            ],
        }
    }

    /// Backend used when the config does not pick one.
    pub fn default_surface(self) -> Option<SurfaceConfig> {
        match self {
            Suite::VerifyStructure | Suite::Trace | Suite::Algebra | Suite::Dolbeault
            | Suite::Bundle => Some(SurfaceConfig::unit_flat_torus(32)),
            Suite::Kernels | Suite::Flaminio | Suite::Stability => {
                Some(SurfaceConfig::round_sphere(16))
            }
            Suite::Cone => None,
        }
    }

    /// Backend kinds the suite can run on.
    pub fn accepted_kinds(self) -> &'static [SurfaceKind] {
        match self {
            Suite::VerifyStructure => &[
                SurfaceKind::FlatTorus,
                SurfaceKind::RoundSphere,
                SurfaceKind::ConformalTorus,
            ],
            Suite::Kernels => &[SurfaceKind::FlatTorus, SurfaceKind::RoundSphere],
            Suite::Flaminio | Suite::Stability => &[SurfaceKind::RoundSphere],
            Suite::Trace | Suite::Algebra | Suite::Bundle => &[SurfaceKind::FlatTorus],
            Suite::Dolbeault => &[SurfaceKind::FlatTorus, SurfaceKind::ConformalTorus],
            Suite::Cone => &[],
        }
    }
}

/// `[run]` section: shared run parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub format: Format,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 7, format: Format::Csv, out_dir: None }
    }
}

/// `[checks]` section: sizes and tolerances of the randomized suites.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSection {
    /// Random trials per structure identity.
    pub trials: usize,
    /// Degree span of random stacks.
    pub kspan: i32,
    /// Largest vertical degree in series suites.
    pub band: i32,
    /// Largest ladder degree in kernel sweeps.
    pub kmax: i32,
    /// Largest harmonic degree of planted data.
    pub degree: i32,
    /// Sample count for stability ratios.
    pub samples: usize,
    /// Sobolev index for stability ratios.
    pub s: f64,
    /// Pass threshold for residual checks.
    pub tolerance: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        CheckSection {
            trials: 100,
            kspan: 4,
            band: 16,
            kmax: 5,
            degree: 8,
            samples: 200,
            s: 0.0,
            tolerance: 1e-8,
        }
    }
}

/// Curvature profile description in the config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileConfig {
    Constant {
        k: f64,
    },
    Sin {
        offset: f64,
        amp: f64,
        #[serde(default = "default_freq")]
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    Table {
        knots: Vec<[f64; 2]>,
    },
}

fn default_freq() -> f64 {
    1.0
}

impl ProfileConfig {
    pub fn to_profile(&self) -> CurvatureProfile {
        match self {
            ProfileConfig::Constant { k } => CurvatureProfile::Constant(*k),
            ProfileConfig::Sin { offset, amp, freq, phase } => CurvatureProfile::Sinusoid {
                offset: *offset,
                amp: *amp,
                freq: *freq,
                phase: *phase,
            },
            ProfileConfig::Table { knots } => {
                CurvatureProfile::Table(knots.iter().map(|k| (k[0], k[1])).collect())
            }
        }
    }
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Constant { k: 1.0 }
    }
}

/// `[cone]` section.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeSection {
    pub profile: ProfileConfig,
    /// Integration span of the trajectory batch.
    pub t_end: f64,
    /// Base horizon of the Riccati ladder.
    pub horizon: f64,
    /// Initial covector.
    pub seed_x: f64,
    pub seed_y: f64,
}

impl Default for ConeSection {
    fn default() -> Self {
        ConeSection {
            profile: ProfileConfig::default(),
            t_end: 10.0,
            horizon: 20.0,
            seed_x: 0.0,
            seed_y: 1.0,
        }
    }
}

/// The whole config file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub run: RunSection,
    pub surface: Option<SurfaceConfig>,
    pub checks: CheckSection,
    pub cone: ConeSection,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| RunError::config(format!("cannot parse {}: {e}", path.display())))
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
}

/// Fully resolved run parameters.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub suite: Suite,
    pub surface: Option<SurfaceConfig>,
    pub seed: u64,
    pub format: Format,
    pub out_dir: PathBuf,
    pub checks: CheckSection,
    pub cone: ConeSection,
}

impl RunConfig {
    /// Merge file, environment, and flags; validate everything that does
    /// not require running a suite.
    pub fn resolve(suite: Suite, file: FileConfig, over: Overrides) -> Result<Self, RunError> {
        let out_dir = over
            .out
            .or_else(|| std::env::var_os("GTL_OUT_DIR").map(PathBuf::from))
            .or(file.run.out_dir)
            .unwrap_or_else(|| PathBuf::from("gtl-out"));
        let surface = file.surface.or_else(|| suite.default_surface());
        let cfg = RunConfig {
            suite,
            surface,
            seed: over.seed.unwrap_or(file.run.seed),
            format: over.format.unwrap_or(file.run.format),
            out_dir,
            checks: file.checks,
            cone: file.cone,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), RunError> {
        let c = &self.checks;
        if c.tolerance <= 0.0 || !c.tolerance.is_finite() {
            return Err(RunError::config("checks.tolerance must be positive"));
        }
        if c.trials == 0 || c.samples == 0 {
            return Err(RunError::config("checks.trials and checks.samples must be positive"));
        }
        if c.kspan <= 0 || c.band <= 0 || c.kmax <= 0 || c.degree <= 0 {
            return Err(RunError::config(
                "checks.kspan, checks.band, checks.kmax, checks.degree must be positive",
            ));
        }
        if self.suite == Suite::Cone {
            if !(self.cone.t_end.is_finite() && self.cone.t_end > 0.0) {
                return Err(RunError::config("cone.t_end must be positive"));
            }
            if !(self.cone.horizon.is_finite() && self.cone.horizon > 0.0) {
                return Err(RunError::config("cone.horizon must be positive"));
            }
            self.cone
                .profile
                .to_profile()
                .validate()
                .map_err(|e| RunError::config(format!("cone.profile: {e}")))?;
        } else {
            let Some(sc) = &self.surface else {
                return Err(RunError::config("a [surface] section is required"));
            };
            let surface = build_surface(sc)
                .map_err(|e| RunError::config(format!("surface: {e}")))?;
            if !self.suite.accepted_kinds().contains(&surface.kind()) {
                return Err(RunError::config(format!(
                    "suite `{}` does not run on backend `{}`",
                    self.suite.name(),
                    surface.kind().as_str()
                )));
            }
        }
        std::fs::create_dir_all(&self.out_dir).map_err(|e| {
            RunError::config(format!(
                "cannot create output directory {}: {e}",
                self.out_dir.display()
            ))
        })?;
        Ok(())
    }
}
