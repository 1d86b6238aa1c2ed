//! Flat dotted-key configuration: `grid.L = 30`, one key per line, `#`
//! comments. Every key has a default; files and `--set` overrides replace
//! them, and each value remembers where it came from for diagnostics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use logdec_core::experiments::{Backend, GammaSpec, InitialCondition, Physics, Setup, C0};
use logdec_core::reglog::RegLog;
use logdec_core::states::Parity;
use thiserror::Error;

/// Every accepted key with its default value.
const DEFAULTS: &[(&str, &str)] = &[
    ("grid.L", "30"),
    ("grid.N", "2048"),
    ("time.dt", "0.05"),
    ("time.t_final", "4"),
    ("time.record_every", "10"),
    ("ic.kind", "gaussian"),
    ("ic.b", "1"),
    ("ic.s", "1"),
    ("ic.x0", "0"),
    ("ic.parity", "even"),
    ("physics.lambda", "1"),
    ("physics.hbar", "1"),
    ("physics.mass", "1"),
    ("gamma.mode", "interp"),
    ("gamma.c0", "calibrate"),
    ("gamma.tabulate", "false"),
    ("gamma.tabulate_min", "0.01"),
    ("gamma.tabulate_max", "100"),
    ("gamma.tabulate_points", "200"),
    ("reglog.scheme", "shift_imag"),
    ("reglog.sigma", "16"),
    ("reglog.n_roots", "4"),
    ("reglog.p", "1"),
    ("backend", "logse"),
    ("output.dir", ""),
    ("output.emit_svg", "false"),
    ("output.snapshot_times", "0,1,2,4"),
    ("breakdown.window", "auto"),
    ("breakdown.factor", "10"),
    ("visibility.window", "none"),
    ("scan.lengths", "30,60,120,240,480"),
    ("scan.t_max", "60"),
    ("sweep.sigma_min", "1"),
    ("sweep.sigma_max", "20"),
    ("sweep.sigma_step", "0.5"),
    ("sweep.samples", "20000"),
    ("pinning.horizon", "1"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Default,
    Line { file: PathBuf, line: usize },
    Set(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Default => f.write_str("default"),
            Origin::Line { file, line } => write!(f, "{}:{line}", file.display()),
            Origin::Set(arg) => write!(f, "--set {arg}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{origin}: expected `key = value`, got `{text}`")]
    Syntax { origin: Origin, text: String },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: Origin, key: String },
    #[error("{origin}: `{key}` already set at {first}")]
    Duplicate { origin: Origin, key: String, first: Origin },
    #[error("{origin}: {key}: {message}")]
    Invalid { origin: Origin, key: String, message: String },
}

/// Raw key/value pairs with their origins, defaults filled in.
#[derive(Debug, Clone)]
pub struct RawConfig {
    values: BTreeMap<&'static str, (String, Origin)>,
}

impl Default for RawConfig {
    fn default() -> Self {
        let values = DEFAULTS.iter().map(|&(k, v)| (k, (v.to_string(), Origin::Default))).collect();
        Self { values }
    }
}

fn known_key(key: &str) -> Option<&'static str> {
    DEFAULTS.iter().map(|(k, _)| *k).find(|k| *k == key)
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut raw = Self::default();
        raw.apply_text(&text, path)?;
        Ok(raw)
    }

    pub fn apply_text(&mut self, text: &str, file: &Path) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let origin = Origin::Line { file: file.into(), line: i + 1 };
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { origin, text: content.into() });
            };
            let key = key.trim();
            if let Some((_, first @ Origin::Line { .. })) = self.values.get(key) {
                return Err(ConfigError::Duplicate { origin, key: key.into(), first: first.clone() });
            }
            self.set(key, value.trim(), origin)?;
        }
        Ok(())
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, arg: &str) -> Result<(), ConfigError> {
        let origin = Origin::Set(arg.into());
        let Some((key, value)) = arg.split_once('=') else {
            return Err(ConfigError::Syntax { origin, text: arg.into() });
        };
        self.set(key.trim(), value.trim(), origin)
    }

    fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let Some(k) = known_key(key) else {
            return Err(ConfigError::UnknownKey { origin, key: key.into() });
        };
        self.values.insert(k, (value.to_string(), origin));
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key].0
    }

    pub fn origin(&self, key: &str) -> Origin {
        self.values.get(key).map(|v| v.1.clone()).unwrap_or(Origin::Default)
    }

    pub fn is_default(&self, key: &str) -> bool {
        self.origin(key) == Origin::Default
    }

    /// The resolved key map, as recorded in `run.json`.
    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.values.iter().map(|(k, (v, _))| (k.to_string(), v.clone())).collect()
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { origin: self.origin(key), key: key.into(), message: message.into() }
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.get(key);
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.invalid(key, format!("expected a finite number, got `{v}`"))),
        }
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.f64(key)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.invalid(key, format!("must be positive, got {x}")))
        }
    }

    fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.get(key);
        v.parse().map_err(|_| self.invalid(key, format!("expected a non-negative integer, got `{v}`")))
    }

    fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(self.invalid(key, format!("expected true or false, got `{v}`"))),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.get(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| self.invalid(key, format!("expected a comma-separated list of numbers, bad entry `{item}`")))
            })
            .collect()
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
        let v = self.get(key);
        options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
            let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
            self.invalid(key, format!("expected one of {}, got `{v}`", names.join("|")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum IcKind {
    Gaussian,
    Lorentzian,
    Sech,
    TwinGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scheme {
    Bare,
    ShiftImag,
    RootAverage,
    Rational,
}

/// Typed settings for every command.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub setup: Setup,
    pub backend: Backend,
    pub out_dir: Option<PathBuf>,
    pub emit_svg: bool,
    /// Multiples of the time unit.
    pub snapshot_times: Vec<f64>,
    pub gamma_tabulate: bool,
    /// Multiples of the time unit.
    pub gamma_range: (f64, f64),
    pub gamma_points: usize,
    pub scan_lengths: Vec<f64>,
    pub scan_t_max: f64,
    pub sweep_sigmas: Vec<f64>,
    pub sweep_samples: usize,
    pub sweep_schemes: Vec<RegLog>,
    pub pinning_horizon: f64,
}

impl Settings {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let b = raw.positive("ic.b")?;
        let ic = match raw.choice(
            "ic.kind",
            &[
                ("gaussian", IcKind::Gaussian),
                ("lorentzian", IcKind::Lorentzian),
                ("sech", IcKind::Sech),
                ("twin_gaussian", IcKind::TwinGaussian),
            ],
        )? {
            IcKind::Gaussian => InitialCondition::Gaussian { b, x0: raw.f64("ic.x0")? },
            IcKind::Lorentzian => InitialCondition::Lorentzian { b },
            IcKind::Sech => InitialCondition::Sech { b },
            IcKind::TwinGaussian => InitialCondition::TwinGaussian {
                b,
                s: raw.f64("ic.s")?,
                parity: raw.choice("ic.parity", &[("even", Parity::Even), ("odd", Parity::Odd)])?,
            },
        };
        let physics = Physics {
            lambda: raw.f64("physics.lambda")?,
            hbar: raw.positive("physics.hbar")?,
            mass: raw.positive("physics.mass")?,
        };
        if physics.lambda < 0.0 {
            return Err(raw.invalid("physics.lambda", "must be non-negative"));
        }
        let gamma = match raw.choice("gamma.mode", &[("interp", true), ("integral", false)])? {
            true => GammaSpec::Interp {
                c0: match raw.get("gamma.c0") {
                    "calibrate" => C0::Calibrate,
                    _ => C0::Fixed(raw.f64("gamma.c0").map_err(|_| {
                        raw.invalid("gamma.c0", format!("expected a number or `calibrate`, got `{}`", raw.get("gamma.c0")))
                    })?),
                },
            },
            false => GammaSpec::Integral,
        };
        let sigma = raw.f64("reglog.sigma")?;
        if sigma < 0.0 {
            return Err(raw.invalid("reglog.sigma", "must be non-negative"));
        }
        let roots = u32::try_from(raw.usize("reglog.n_roots")?).unwrap_or(0);
        if roots == 0 {
            return Err(raw.invalid("reglog.n_roots", "must be between 1 and 2^32 - 1"));
        }
        let power = raw.positive("reglog.p")?;
        let reglog = match raw.choice(
            "reglog.scheme",
            &[
                ("bare", Scheme::Bare),
                ("shift_imag", Scheme::ShiftImag),
                ("root_average", Scheme::RootAverage),
                ("rational", Scheme::Rational),
            ],
        )? {
            Scheme::Bare => RegLog::Bare,
            Scheme::ShiftImag => RegLog::ShiftImag { sigma },
            Scheme::RootAverage => RegLog::RootAverage { sigma, roots },
            Scheme::Rational => RegLog::Rational { sigma, power },
        };

        let points = raw.usize("grid.N")?;
        if points < 8 || points % 2 != 0 {
            return Err(raw.invalid("grid.N", format!("must be even and at least 8, got {points}")));
        }
        let record_every = raw.usize("time.record_every")?;
        if record_every == 0 {
            return Err(raw.invalid("time.record_every", "must be at least 1"));
        }
        let t_final = raw.f64("time.t_final")?;
        if t_final < 0.0 {
            return Err(raw.invalid("time.t_final", "must be non-negative"));
        }
        let breakdown_window = match raw.get("breakdown.window") {
            "auto" => None,
            _ => Some(raw.positive("breakdown.window")?),
        };
        let breakdown_factor = raw.f64("breakdown.factor")?;
        if breakdown_factor <= 1.0 {
            return Err(raw.invalid("breakdown.factor", "must exceed 1"));
        }
        let visibility_window = match raw.get("visibility.window") {
            "none" => None,
            _ => match raw.list("visibility.window")?.as_slice() {
                &[lo, hi] if lo < hi => Some((lo, hi)),
                _ => return Err(raw.invalid("visibility.window", "expected `lo,hi` with lo < hi, or `none`")),
            },
        };
        let setup = Setup {
            length: raw.positive("grid.L")?,
            points,
            dt: raw.positive("time.dt")?,
            t_final,
            record_every,
            ic,
            physics,
            gamma,
            reglog,
            breakdown_window,
            breakdown_factor,
            visibility_window,
        };

        let backend =
            raw.choice("backend", &[("logse", Backend::Logse), ("jzme", Backend::Jzme), ("both", Backend::Both)])?;
        let out_dir = Some(raw.get("output.dir")).filter(|d| !d.is_empty()).map(PathBuf::from);
        let snapshot_times = raw.list("output.snapshot_times")?;
        if snapshot_times.iter().any(|t| *t < 0.0) {
            return Err(raw.invalid("output.snapshot_times", "times must be non-negative"));
        }
        let gamma_range = (raw.positive("gamma.tabulate_min")?, raw.positive("gamma.tabulate_max")?);
        if gamma_range.0 >= gamma_range.1 {
            return Err(raw.invalid("gamma.tabulate_max", "must exceed gamma.tabulate_min"));
        }
        let gamma_points = raw.usize("gamma.tabulate_points")?;
        if gamma_points < 2 {
            return Err(raw.invalid("gamma.tabulate_points", "must be at least 2"));
        }
        let scan_lengths = raw.list("scan.lengths")?;
        if scan_lengths.is_empty() || scan_lengths.iter().any(|l| *l <= 0.0) || scan_lengths.windows(2).any(|w| w[1] <= w[0]) {
            return Err(raw.invalid("scan.lengths", "must be a non-empty, strictly increasing list of positive lengths"));
        }
        let sweep_min = raw.f64("sweep.sigma_min")?;
        let sweep_max = raw.f64("sweep.sigma_max")?;
        let sweep_step = raw.positive("sweep.sigma_step")?;
        if sweep_min < 0.0 || sweep_max < sweep_min {
            return Err(raw.invalid("sweep.sigma_max", "need 0 <= sweep.sigma_min <= sweep.sigma_max"));
        }
        let count = ((sweep_max - sweep_min) / sweep_step + 1e-9).floor() as usize + 1;
        let sweep_sigmas = (0..count).map(|i| sweep_min + i as f64 * sweep_step).collect();
        let sweep_samples = raw.usize("sweep.samples")?;
        if sweep_samples < 2 {
            return Err(raw.invalid("sweep.samples", "must be at least 2"));
        }

        let settings = Self {
            setup,
            backend,
            out_dir,
            emit_svg: raw.bool("output.emit_svg")?,
            snapshot_times,
            gamma_tabulate: raw.bool("gamma.tabulate")?,
            gamma_range,
            gamma_points,
            scan_lengths,
            scan_t_max: raw.positive("scan.t_max")?,
            sweep_sigmas,
            sweep_samples,
            sweep_schemes: vec![
                RegLog::ShiftImag { sigma },
                RegLog::RootAverage { sigma, roots },
                RegLog::Rational { sigma, power },
            ],
            pinning_horizon: raw.positive("pinning.horizon")?,
        };
        settings.setup.validate().map_err(|e| core_diagnostic(raw, e))?;
        Ok(settings)
    }
}

/// Attributes a validation failure from the core library to a config key.
fn core_diagnostic(raw: &RawConfig, err: logdec_core::Error) -> ConfigError {
    use logdec_core::Error;
    let key = match &err {
        Error::InvalidParameter { name, .. } => match *name {
            "sigma" => "reglog.sigma",
            "n_roots" => "reglog.n_roots",
            "p" => "reglog.p",
            "b" | "s" => "ic.b",
            other => known_key(other).unwrap_or("ic.kind"),
        },
        Error::InvalidGrid(_) => "grid.N",
        _ => "ic.kind",
    };
    raw.invalid(key, err.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Settings, ConfigError> {
        let mut raw = RawConfig::default();
        raw.apply_text(text, Path::new("test.cfg"))?;
        Settings::from_raw(&raw)
    }

    #[test]
    fn defaults_are_the_reference_parameters() {
        let s = parse("").unwrap();
        assert_eq!(s.setup.length, 30.0);
        assert_eq!(s.setup.points, 2048);
        assert_eq!(s.setup.dt, 0.05);
        assert_eq!(s.setup.reglog, RegLog::ShiftImag { sigma: 16.0 });
        assert_eq!(s.setup.physics, Physics::default());
        assert_eq!(s.gamma_range, (0.01, 100.0));
        assert_eq!(s.backend, Backend::Logse);
    }

    #[test]
    fn comments_whitespace_and_overrides() {
        let mut raw = RawConfig::default();
        raw.apply_text("# header\ngrid.L = 60   # wider\n\n  ic.kind=twin_gaussian\n", Path::new("a.cfg")).unwrap();
        raw.apply_override("grid.N=512").unwrap();
        let s = Settings::from_raw(&raw).unwrap();
        assert_eq!(s.setup.length, 60.0);
        assert_eq!(s.setup.points, 512);
        assert!(matches!(s.setup.ic, InitialCondition::TwinGaussian { .. }));
        assert_eq!(raw.origin("grid.L"), Origin::Line { file: "a.cfg".into(), line: 2 });
        assert_eq!(raw.resolved()["grid.N"], "512");
    }

    #[test]
    fn diagnostics_name_the_line_and_field() {
        let err = parse("grid.L = 30\ntime.dt = -1\n").unwrap_err().to_string();
        assert_eq!(err, "test.cfg:2: time.dt: must be positive, got -1");
        let err = parse("grid.N = 1023").unwrap_err().to_string();
        assert!(err.starts_with("test.cfg:1: grid.N:"), "{err}");
        let err = parse("grid.M = 3").unwrap_err().to_string();
        assert_eq!(err, "test.cfg:1: unknown key `grid.M`");
        assert!(matches!(parse("just words"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse("ic.b = 1\nic.b = 2"), Err(ConfigError::Duplicate { .. })));
        let err = parse("backend = quantum").unwrap_err().to_string();
        assert!(err.contains("logse|jzme|both"), "{err}");
    }

    #[test]
    fn c0_and_windows() {
        let s = parse("gamma.c0 = 0.1").unwrap();
        assert_eq!(s.setup.gamma, GammaSpec::Interp { c0: C0::Fixed(0.1) });
        assert!(parse("gamma.c0 = soon").unwrap_err().to_string().contains("calibrate"));
        let s = parse("visibility.window = -4, 4\nbreakdown.window = 3").unwrap();
        assert_eq!(s.setup.visibility_window, Some((-4.0, 4.0)));
        assert_eq!(s.setup.breakdown_window, Some(3.0));
        assert!(parse("visibility.window = 4,-4").is_err());
    }

    #[test]
    fn sweep_grid() {
        let s = parse("sweep.sigma_min = 1\nsweep.sigma_max = 3\nsweep.sigma_step = 0.5").unwrap();
        assert_eq!(s.sweep_sigmas, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert!(parse("scan.lengths = 60,30").is_err());
    }
}
