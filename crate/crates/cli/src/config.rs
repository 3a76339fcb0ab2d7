//! Experiment configuration: a TOML document with one `[experiment]` table
//! and optional per-command sections.

use std::fmt;
use std::path::PathBuf;

use polyosc::dynamics::{OscStatsConfig, TrigTerm};
use polyosc::lattice::ExponentMatrix;
use polyosc::multipliers::{DecaySamples, FrequencySamples, QuadratureSpec};
use polyosc::rademacher_menshov::MAX_DEPTH;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Variation,
    Oscillation,
    RmCheck,
    Gluing,
    SplittingCheck,
    Multiplier,
    DecayScan,
    OffdiagScan,
    Cancellation,
    ErgodicRun,
    RadonRun,
    OscStats,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::Variation,
        Command::Oscillation,
        Command::RmCheck,
        Command::Gluing,
        Command::SplittingCheck,
        Command::Multiplier,
        Command::DecayScan,
        Command::OffdiagScan,
        Command::Cancellation,
        Command::ErgodicRun,
        Command::RadonRun,
        Command::OscStats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Variation => "variation",
            Command::Oscillation => "oscillation",
            Command::RmCheck => "rm-check",
            Command::Gluing => "gluing",
            Command::SplittingCheck => "splitting-check",
            Command::Multiplier => "multiplier",
            Command::DecayScan => "decay-scan",
            Command::OffdiagScan => "offdiag-scan",
            Command::Cancellation => "cancellation",
            Command::ErgodicRun => "ergodic-run",
            Command::RadonRun => "radon-run",
            Command::OscStats => "osc-stats",
        }
    }

    fn default_trials(self) -> usize {
        match self {
            Command::Variation | Command::Oscillation => 10,
            Command::RmCheck => 100,
            Command::SplittingCheck => 20,
            _ => 1,
        }
    }

    fn default_tolerance(self) -> f64 {
        match self {
            Command::Variation | Command::Oscillation | Command::Gluing => 1e-12,
            Command::Multiplier => 1e-9,
            Command::RadonRun => 1e-6,
            _ => 1e-9,
        }
    }

    fn default_map(self) -> Vec<Vec<u32>> {
        match self {
            Command::Gluing => vec![vec![1, 0], vec![3, 1]],
            Command::Multiplier | Command::DecayScan | Command::OffdiagScan => vec![vec![1], vec![2]],
            Command::ErgodicRun => vec![vec![1, 0], vec![0, 1]],
            _ => vec![vec![1, 1], vec![2, 0]],
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Work budget: quadrature nodes, summation terms or grid points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Record wall time; off by default so outputs are byte-stable.
    #[serde(default)]
    pub timing: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<Vec<u32>>>,
}

/// Sample family: explicit axes and values, or a random family on a grid of
/// the given shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<Vec<Vec<f64>>>,
    /// Row-major `[re, im]` pairs, last axis fastest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<[f64; 2]>>,
    #[serde(default = "default_shape")]
    pub shape: Vec<usize>,
}

fn default_shape() -> Vec<usize> {
    vec![3, 3]
}

impl Default for FamilySection {
    fn default() -> Self {
        Self { axes: None, values: None, shape: default_shape() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationSection {
    pub rho: Vec<f64>,
}

impl Default for VariationSection {
    fn default() -> Self {
        Self { rho: vec![1.0, 2.0, 3.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillationSection {
    /// Explicit chains; random chains with `steps` steps are drawn otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chains: Option<Vec<Vec<Vec<f64>>>>,
    pub steps: usize,
    pub random_chains: usize,
}

impl Default for OscillationSection {
    fn default() -> Self {
        Self { chains: None, steps: 2, random_chains: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmSection {
    pub k0: usize,
    /// `L`: the lattice spans `[1, 1 + 2^L]` per axis.
    pub depth: u32,
    /// `L0`: resolution `2^{L-L0}`; defaults to `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_depth: Option<u32>,
}

impl Default for RmSection {
    fn default() -> Self {
        Self { k0: 1, depth: 4, data_depth: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GluingSection {
    /// Selector checks run over `|n|_∞ <= n_max`.
    pub n_max: i64,
}

impl Default for GluingSection {
    fn default() -> Self {
        Self { n_max: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplittingSection {
    /// Grid axes are `{2^i : lo <= i <= hi}`.
    pub exponent_range: (i32, i32),
    pub terms: usize,
    /// Constant `C` in `V^2 <= C (long + short)`.
    pub constant: f64,
}

impl Default for SplittingSection {
    fn default() -> Self {
        Self { exponent_range: (-6, 6), terms: 3, constant: 16.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    /// `ξ = t · direction` for `points` values of `t` spread over `t_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    pub t_range: (f64, f64),
    pub points: usize,
}

impl Default for MultiplierSection {
    fn default() -> Self {
        Self { s: None, direction: None, t_range: (-20.0, 20.0), points: 41 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecaySection {
    pub samples: DecaySamples,
    /// Smallest accepted `δ` for the selected fit.
    pub min_delta: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        Self { samples: DecaySamples::default(), min_delta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffDiagSection {
    /// Offsets `h ∈ ℤ^r_{>=0}` with `|h|_1 <= h_max`.
    pub h_max: i64,
    pub frequencies: FrequencySamples,
}

impl Default for OffDiagSection {
    fn default() -> Self {
        Self { h_max: 4, frequencies: FrequencySamples::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CancellationSection {
    pub alpha: Vec<u32>,
    pub s: Vec<f64>,
    /// Values of `h_i / s_i`.
    pub ratios: Vec<f64>,
    pub limit: f64,
}

impl Default for CancellationSection {
    fn default() -> Self {
        Self { alpha: vec![1, 2], s: vec![1.0, 1.0], ratios: vec![0.125, 0.25, 0.5, 1.0], limit: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    /// One direction per flow; defaults to golden-mean rotations of the axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<Vec<f64>>>,
    /// Observable; a random zero-mean polynomial is drawn otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TrigTerm>>,
    pub random_terms: usize,
    pub max_freq: i64,
    /// Diagonal schedule `M = 2^j (1, ..., 1)`.
    pub schedule: (i32, i32),
    pub points_per_axis: usize,
    /// Final deviation must stay below `threshold · sup|f|`.
    pub threshold: f64,
}

impl Default for DynamicsSection {
    fn default() -> Self {
        Self { directions: None, terms: None, random_terms: 4, max_freq: 3, schedule: (0, 10), points_per_axis: 16, threshold: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadonSection {
    pub shape: Vec<usize>,
    pub extent: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<f64>>,
    pub random_terms: usize,
    pub check_points: usize,
}

impl Default for RadonSection {
    fn default() -> Self {
        Self { shape: vec![16, 16], extent: vec![2.0, 2.0], m: None, random_terms: 4, check_points: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscStatsSection {
    pub stats: OscStatsConfig,
    /// Largest accepted log-log slope of the maximal ratio between the two
    /// largest `J`.
    pub max_trend: f64,
}

impl Default for OscStatsSection {
    fn default() -> Self {
        let stats = OscStatsConfig { points_per_axis: 8, chains: 5, ..OscStatsConfig::default() };
        Self { stats, max_trend: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub map: MapSection,
    #[serde(default)]
    pub family: FamilySection,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub variation: VariationSection,
    #[serde(default)]
    pub oscillation: OscillationSection,
    #[serde(default)]
    pub rm: RmSection,
    #[serde(default)]
    pub gluing: GluingSection,
    #[serde(default)]
    pub splitting: SplittingSection,
    #[serde(default)]
    pub multiplier: MultiplierSection,
    #[serde(default)]
    pub decay: DecaySection,
    #[serde(default)]
    pub offdiag: OffDiagSection,
    #[serde(default)]
    pub cancellation: CancellationSection,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    #[serde(default)]
    pub radon: RadonSection,
    #[serde(default)]
    pub osc_stats: OscStatsSection,
}

/// Bundled 3×3 sample family for `variation --sample`.
pub const SAMPLE_3X3: &str = include_str!("../fixtures/sample_3x3.toml");

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn new(command: Command) -> Self {
        Self {
            experiment: Experiment { command, seed: 0, trials: None, budget: None, tolerance: None, out: None, timing: false },
            map: MapSection::default(),
            family: FamilySection::default(),
            quadrature: QuadratureSpec::default(),
            variation: VariationSection::default(),
            oscillation: OscillationSection::default(),
            rm: RmSection::default(),
            gluing: GluingSection::default(),
            splitting: SplittingSection::default(),
            multiplier: MultiplierSection::default(),
            decay: DecaySection::default(),
            offdiag: OffDiagSection::default(),
            cancellation: CancellationSection::default(),
            dynamics: DynamicsSection::default(),
            radon: RadonSection::default(),
            osc_stats: OscStatsSection::default(),
        }
    }

    /// Parse without validating; see [`ExperimentConfig::validate`].
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(format!("config: {}", e.message())))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| invalid(format!("config: {e}")))
    }

    pub fn command(&self) -> Command {
        self.experiment.command
    }

    pub fn trials(&self) -> usize {
        self.experiment.trials.unwrap_or(self.command().default_trials())
    }

    pub fn tolerance(&self) -> f64 {
        self.experiment.tolerance.unwrap_or(self.command().default_tolerance())
    }

    pub fn exponents(&self) -> Vec<Vec<u32>> {
        self.map.exponents.clone().unwrap_or_else(|| self.command().default_map())
    }

    /// Quadrature settings with the work budget applied.
    pub fn quadrature(&self) -> QuadratureSpec {
        match self.experiment.budget {
            Some(b) => QuadratureSpec { max_nodes: usize::try_from(b).unwrap_or(usize::MAX), ..self.quadrature },
            None => self.quadrature,
        }
    }

    /// Check every field the selected command reads against the library's
    /// preconditions.
    pub fn validate(&self) -> Result<(), CliError> {
        let tol = self.tolerance();
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(invalid(format!("tolerance must be finite and nonnegative, got {tol}")));
        }
        if self.trials() == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.experiment.budget == Some(0) {
            return Err(invalid("budget must be positive"));
        }
        self.quadrature.validate().map_err(|e| invalid(e.to_string()))?;
        let rows = self.exponents();
        let matrix = ExponentMatrix::new(rows).map_err(|e| invalid(format!("map: {e}")))?;
        if matrix.is_empty() {
            return Err(invalid("map: exponent matrix is empty"));
        }
        let needs_normalized = matches!(
            self.command(),
            Command::Gluing | Command::SplittingCheck | Command::OffdiagScan | Command::DecayScan
        );
        if needs_normalized && (matrix.has_zero_row() || matrix.has_zero_column()) {
            return Err(invalid("map: exponent matrix has a zero row or column"));
        }
        let (d, k) = (matrix.rows(), matrix.cols());
        match self.command() {
            Command::Variation | Command::Oscillation => self.validate_family()?,
            _ => {}
        }
        match self.command() {
            Command::Variation => {
                if self.variation.rho.is_empty() || self.variation.rho.iter().any(|r| !(*r >= 1.0 && r.is_finite())) {
                    return Err(invalid("variation.rho must be a nonempty list of finite values >= 1"));
                }
            }
            Command::Oscillation => {
                if self.oscillation.steps == 0 {
                    return Err(invalid("oscillation.steps must be at least 1"));
                }
                if let Some(chains) = &self.oscillation.chains {
                    let k = self.family_k();
                    if chains.iter().flatten().any(|p| p.len() != k) {
                        return Err(invalid(format!("oscillation.chains: every point needs {k} coordinates")));
                    }
                }
            }
            Command::RmCheck => {
                let rm = &self.rm;
                if rm.k0 == 0 || rm.k0 > 3 {
                    return Err(invalid("rm.k0 must lie in 1..=3"));
                }
                if rm.depth == 0 || rm.depth > MAX_DEPTH {
                    return Err(invalid(format!("rm.depth must lie in 1..={MAX_DEPTH}")));
                }
                let l0 = rm.data_depth.unwrap_or(rm.depth);
                if l0 == 0 || l0 > rm.depth {
                    return Err(invalid("rm.data_depth must lie in 1..=depth"));
                }
                let side = (1u64 << l0.min(20)) + 1;
                let points = side.checked_pow(rm.k0 as u32).unwrap_or(u64::MAX);
                if points > self.experiment.budget.unwrap_or(50_000) {
                    return Err(CliError::Budget(format!("{points} lattice points exceed the budget")));
                }
            }
            Command::Gluing => {
                if !(0..=20).contains(&self.gluing.n_max) {
                    return Err(invalid("gluing.n_max must lie in 0..=20"));
                }
            }
            Command::SplittingCheck => {
                let s = &self.splitting;
                if s.exponent_range.0 > s.exponent_range.1 || s.terms == 0 || !(s.constant > 0.0) {
                    return Err(invalid("splitting: need lo <= hi, terms >= 1 and a positive constant"));
                }
            }
            Command::Multiplier => {
                let m = &self.multiplier;
                if m.s.as_ref().is_some_and(|s| s.len() != k || s.iter().any(|v| !(*v > 0.0))) {
                    return Err(invalid(format!("multiplier.s needs {k} positive entries")));
                }
                if m.direction.as_ref().is_some_and(|v| v.len() != d) {
                    return Err(invalid(format!("multiplier.direction needs {d} entries")));
                }
                if m.points == 0 || !(m.t_range.0 <= m.t_range.1) {
                    return Err(invalid("multiplier: need points >= 1 and an ordered t_range"));
                }
            }
            Command::DecayScan => {
                let s = &self.decay.samples;
                if s.deltas.is_empty() || s.deltas.iter().any(|x| !(*x > 0.0 && *x < 0.5)) {
                    return Err(invalid("decay.samples.deltas must lie in (0, 1/2)"));
                }
                if s.s_exponents.0 > s.s_exponents.1 || s.xi_exponents.0 > s.xi_exponents.1 {
                    return Err(invalid("decay: exponent ranges must be ordered"));
                }
            }
            Command::OffdiagScan => {
                let o = &self.offdiag;
                if !(0..=12).contains(&o.h_max) || o.frequencies.per_box < 2 || o.frequencies.n_budget < 0 {
                    return Err(invalid("offdiag: need 0 <= h_max <= 12, per_box >= 2, n_budget >= 0"));
                }
            }
            Command::Cancellation => {
                let c = &self.cancellation;
                if c.alpha.is_empty() || c.alpha.len() > 3 || c.alpha.contains(&0) || c.s.len() != c.alpha.len() {
                    return Err(invalid("cancellation: alpha needs 1..=3 positive entries and s the same length"));
                }
                if c.s.iter().chain(&c.ratios).any(|v| !(*v > 0.0)) || c.ratios.is_empty() {
                    return Err(invalid("cancellation: s and ratios must be positive"));
                }
            }
            Command::ErgodicRun | Command::OscStats => {
                self.validate_dynamics(d)?;
                if self.command() == Command::OscStats {
                    let s = &self.osc_stats.stats;
                    if s.steps.is_empty() || s.steps.contains(&0) || s.exponents.iter().any(|p| !(*p >= 1.0)) || s.points_per_axis == 0 {
                        return Err(invalid("osc_stats: need steps >= 1, p >= 1 and points_per_axis >= 1"));
                    }
                    let span = s.quarter_range.1 - s.quarter_range.0;
                    if s.steps.iter().any(|&j| (4 * j as i32 + 3) > span) {
                        return Err(invalid("osc_stats: quarter_range too short for the requested steps"));
                    }
                } else if self.dynamics.schedule.0 > self.dynamics.schedule.1 || self.dynamics.points_per_axis == 0 {
                    return Err(invalid("dynamics: need an ordered schedule and points_per_axis >= 1"));
                }
            }
            Command::RadonRun => {
                let r = &self.radon;
                if r.shape.len() != d || r.extent.len() != d {
                    return Err(invalid(format!("radon: shape and extent need {d} entries")));
                }
                if r.shape.iter().any(|&n| n == 0) || r.extent.iter().any(|v| !(*v > 0.0)) {
                    return Err(invalid("radon: shape and extent must be positive"));
                }
                if r.m.as_ref().is_some_and(|m| m.len() != k || m.iter().any(|v| !(*v > 0.0))) {
                    return Err(invalid(format!("radon.m needs {k} positive entries")));
                }
            }
        }
        Ok(())
    }

    fn family_k(&self) -> usize {
        self.family.axes.as_ref().map(Vec::len).unwrap_or(self.family.shape.len())
    }

    fn validate_family(&self) -> Result<(), CliError> {
        let f = &self.family;
        match (&f.axes, &f.values) {
            (Some(axes), values) => {
                if axes.is_empty() || axes.iter().any(|a| a.is_empty()) {
                    return Err(invalid("family.axes must be nonempty"));
                }
                let n: usize = axes.iter().map(Vec::len).product();
                if values.as_ref().is_some_and(|v| v.len() != n) {
                    return Err(invalid(format!("family.values needs {n} entries")));
                }
            }
            (None, Some(_)) => return Err(invalid("family.values given without family.axes")),
            (None, None) => {
                if f.shape.is_empty() || f.shape.contains(&0) {
                    return Err(invalid("family.shape must be nonempty and positive"));
                }
            }
        }
        Ok(())
    }

    fn validate_dynamics(&self, d: usize) -> Result<(), CliError> {
        let dy = &self.dynamics;
        if let Some(dirs) = &dy.directions {
            let dim = dirs.first().map(Vec::len).unwrap_or(0);
            if dirs.len() != d || dim == 0 || dirs.iter().any(|v| v.len() != dim) {
                return Err(invalid(format!("dynamics.directions needs {d} vectors of equal positive length")));
            }
        }
        if dy.terms.is_none() && (dy.random_terms == 0 || dy.max_freq < 1) {
            return Err(invalid("dynamics: need random_terms >= 1 and max_freq >= 1"));
        }
        Ok(())
    }
}
