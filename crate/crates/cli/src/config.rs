//! Flat `key = value` run configuration with `#` comments.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use specrecon::analytic::BoundaryPair;
use specrecon::sturm::{Grid, Potential, Preset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ForwardSpectrum,
    Cauchy,
    Reconstruct,
    HalfInverse,
    Stability,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ForwardSpectrum => "forward-spectrum",
            Command::Cauchy => "cauchy",
            Command::Reconstruct => "reconstruct",
            Command::HalfInverse => "half-inverse",
            Command::Stability => "stability",
        }
    }
}

impl FromStr for Command {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "forward-spectrum" => Command::ForwardSpectrum,
            "cauchy" => Command::Cauchy,
            "reconstruct" => Command::Reconstruct,
            "half-inverse" => Command::HalfInverse,
            "stability" => Command::Stability,
            other => return Err(ConfigError(format!("unknown command '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// A potential given by preset or by file.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSource {
    Preset(Preset, String),
    File(PathBuf),
}

impl PotentialSource {
    fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        if let Ok(p) = Preset::parse(text) {
            return Ok(PotentialSource::Preset(p, text.to_string()));
        }
        let path = base.join(text);
        if !path.is_file() {
            return err(format!("potential '{text}' is neither a preset nor an existing file"));
        }
        Ok(PotentialSource::File(path))
    }

    /// Samples the potential on `grid`; files are resampled.
    pub fn load(&self, grid: Grid) -> specrecon::Result<Potential> {
        match self {
            PotentialSource::Preset(p, _) => Potential::from_preset(p, grid),
            PotentialSource::File(path) => Potential::read_path(path)?.resample(grid),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PotentialSource::Preset(_, text) => text.clone(),
            PotentialSource::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmegaSource {
    /// `Ω = (1/2) ∫ q` from the true potential.
    Exact,
    /// `Ω` fitted to the eigenvalue asymptotics.
    Fit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionPolicy {
    Abort,
    Report,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub potential: PotentialSource,
    /// Known half on `(π, 2π)` for `half-inverse`.
    pub known: PotentialSource,
    pub boundary: String,
    pub n: usize,
    /// Subintervals on `(0, π)`; `(0, 2π)` grids use twice as many.
    pub grid: usize,
    pub modes: usize,
    pub weyl_count: Option<usize>,
    /// Run the Gelfand–Levitan stage after the moment solve (`reconstruct`).
    pub gl: bool,
    pub spectrum: Option<PathBuf>,
    pub omega_source: OmegaSource,
    pub conditions: ConditionPolicy,
    pub two_pi: bool,
    pub tau: f64,
    pub tau_absolute: bool,
    pub noise_delta: Vec<f64>,
    pub noise_modes: usize,
    pub trials: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::ForwardSpectrum,
            potential: PotentialSource::Preset(Preset::Zero, "zero".into()),
            known: PotentialSource::Preset(Preset::Zero, "zero".into()),
            boundary: "dirichlet".into(),
            n: 40,
            grid: 2048,
            modes: 64,
            weyl_count: None,
            gl: true,
            spectrum: None,
            omega_source: OmegaSource::Exact,
            conditions: ConditionPolicy::Abort,
            two_pi: false,
            tau: 1e-10,
            tau_absolute: false,
            noise_delta: vec![1e-4, 1e-3, 1e-2],
            noise_modes: 6,
            trials: 10,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError(format!("{key}: cannot parse '{value}'")))
}

fn boolean(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => err(format!("{key}: expected true or false, got '{value}'")),
    }
}

impl RunConfig {
    /// Parses config text; relative file names resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut have_command = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected 'key = value'", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "command" => {
                    cfg.command = value.parse()?;
                    have_command = true;
                }
                "potential" => cfg.potential = PotentialSource::parse(value, base)?,
                "known" => cfg.known = PotentialSource::parse(value, base)?,
                "boundary" => cfg.boundary = value.to_string(),
                "N" | "n" => cfg.n = number(key, value)?,
                "grid" => cfg.grid = number(key, value)?,
                "modes" => cfg.modes = number(key, value)?,
                "weyl_count" => cfg.weyl_count = Some(number(key, value)?),
                "spectrum" => {
                    let path = base.join(value);
                    if !path.is_file() {
                        return err(format!("spectrum file '{value}' does not exist"));
                    }
                    cfg.spectrum = Some(path);
                }
                "omega" => {
                    cfg.omega_source = match value {
                        "exact" => OmegaSource::Exact,
                        "fit" => OmegaSource::Fit,
                        _ => return err(format!("omega: expected exact or fit, got '{value}'")),
                    }
                }
                "conditions" => {
                    cfg.conditions = match value {
                        "abort" => ConditionPolicy::Abort,
                        "report" => ConditionPolicy::Report,
                        _ => return err(format!("conditions: expected abort or report, got '{value}'")),
                    }
                }
                "interval" => {
                    cfg.two_pi = match value {
                        "pi" => false,
                        "two_pi" => true,
                        _ => return err(format!("interval: expected pi or two_pi, got '{value}'")),
                    }
                }
                "two_pi" => cfg.two_pi = boolean(key, value)?,
                "gl" => cfg.gl = boolean(key, value)?,
                "tau" => cfg.tau = number(key, value)?,
                "tau_absolute" => cfg.tau_absolute = boolean(key, value)?,
                "noise_delta" => {
                    cfg.noise_delta = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| number(key, s))
                        .collect::<Result<_, _>>()?
                }
                "noise_modes" => cfg.noise_modes = number(key, value)?,
                "trials" => cfg.trials = number(key, value)?,
                "seed" => cfg.seed = number(key, value)?,
                "out" => cfg.out = base.join(value),
                other => return err(format!("line {}: unknown key '{other}'", i + 1)),
            }
        }
        if !have_command {
            return err("missing 'command'");
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 5 {
            return err(format!("N = {} but N ≥ 5 is required", self.n));
        }
        if !self.grid.is_power_of_two() || self.grid < 16 {
            return err(format!("grid = {} must be a power of two ≥ 16", self.grid));
        }
        if self.modes == 0 || self.modes > self.grid / 4 {
            return err(format!("modes = {} must lie in 1..={}", self.modes, self.grid / 4));
        }
        if self.weyl_count == Some(0) {
            return err("weyl_count must be positive");
        }
        if let Err(e) = BoundaryPair::parse(&self.boundary) {
            return err(e.to_string());
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return err("tau must be ≥ 0");
        }
        if self.command == Command::Stability {
            if self.noise_delta.is_empty() || self.noise_delta.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return err("noise_delta must list amplitudes ≥ 0");
            }
            if self.noise_modes == 0 || self.trials == 0 {
                return err("noise_modes and trials must be positive");
            }
        }
        Ok(())
    }

    pub fn grid_pi(&self) -> Grid {
        Grid::on_pi(self.grid).expect("validated grid")
    }

    pub fn grid_two_pi(&self) -> Grid {
        Grid::on_two_pi(2 * self.grid).expect("validated grid")
    }

    /// Effective configuration as `key = value` lines.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        put("command", self.command.name().into());
        put("potential", self.potential.describe());
        put("known", self.known.describe());
        put("boundary", self.boundary.clone());
        put("N", self.n.to_string());
        put("grid", self.grid.to_string());
        put("modes", self.modes.to_string());
        put("weyl_count", self.weyl_count.map_or("auto".into(), |c| c.to_string()));
        put("gl", self.gl.to_string());
        put("spectrum", self.spectrum.as_ref().map_or("computed".into(), |p| p.display().to_string()));
        put("omega", match self.omega_source {
            OmegaSource::Exact => "exact".into(),
            OmegaSource::Fit => "fit".into(),
        });
        put("conditions", match self.conditions {
            ConditionPolicy::Abort => "abort".into(),
            ConditionPolicy::Report => "report".into(),
        });
        put("interval", if self.two_pi { "two_pi".into() } else { "pi".into() });
        put("tau", format!("{:e}", self.tau));
        put("tau_absolute", self.tau_absolute.to_string());
        put(
            "noise_delta",
            self.noise_delta.iter().map(|d| format!("{d:e}")).collect::<Vec<_>>().join(", "),
        );
        put("noise_modes", self.noise_modes.to_string());
        put("trials", self.trials.to_string());
        put("seed", self.seed.to_string());
        put("out", self.out.display().to_string());
        s
    }
}
