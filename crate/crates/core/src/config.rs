//! Run configuration: a line-oriented `key = value` format with `#` comments.

use std::f64::consts::PI;
use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::init::{InitKind, InitRecipe, StreamSpec};
use crate::integrator::{step_count, SchemeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    Oldroyd,
    Strain,
    RotStrain,
    /// Matched deformation-tensor and rotation-strain runs.
    Both,
}

impl Formulation {
    /// The individual formulations a run integrates.
    pub fn members(self) -> Vec<Formulation> {
        match self {
            Formulation::Both => vec![Formulation::Oldroyd, Formulation::RotStrain],
            f => vec![f],
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Oldroyd => "oldroyd",
            Formulation::Strain => "strain",
            Formulation::RotStrain => "rotstrain",
            Formulation::Both => "both",
        })
    }
}

impl FromStr for Formulation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "oldroyd" => Ok(Formulation::Oldroyd),
            "strain" => Ok(Formulation::Strain),
            "rotstrain" => Ok(Formulation::RotStrain),
            "both" => Ok(Formulation::Both),
            _ => Err(format!(
                "unknown formulation '{s}' (expected oldroyd, strain, rotstrain or both)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub length: f64,
    pub mu: f64,
    pub scheme: SchemeSpec,
    pub t_final: f64,
    /// Steps between diagnostics records.
    pub record_every: usize,
    pub formulation: Formulation,
    pub init: InitRecipe,
    pub output_dir: Option<PathBuf>,
    /// Steps between snapshots; 0 disables them.
    pub snapshot_every: usize,
    pub preset: Option<String>,
}

impl RunConfig {
    /// Defaults for every key except the formulation.
    pub fn with_formulation(formulation: Formulation) -> Self {
        RunConfig {
            n: 64,
            length: 2.0 * PI,
            mu: 1.0,
            scheme: SchemeSpec::default(),
            t_final: 1.0,
            record_every: 10,
            formulation,
            init: InitRecipe::default(),
            output_dir: None,
            snapshot_every: 0,
            preset: None,
        }
    }

    pub fn steps(&self) -> Result<usize> {
        step_count(self.t_final, self.scheme.dt)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return bad(format!("n must be even and at least 8, got {}", self.n));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final must be >= 0, got {}", self.t_final));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        self.scheme.validate()?;
        self.init.validate()?;
        self.steps()?;
        Ok(())
    }

    /// Serializes every key; [`parse_config`] reads it back unchanged.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("formulation", self.formulation.to_string());
        put("n", self.n.to_string());
        put("length", format!("{:?}", self.length));
        put("mu", format!("{:?}", self.mu));
        put("scheme", self.scheme.kind.to_string());
        put("dt", format!("{:?}", self.scheme.dt));
        put("cfl_safety", format!("{:?}", self.scheme.cfl_safety));
        put("adaptive", self.scheme.adaptive.to_string());
        put("hyperviscosity", format!("{:?}", self.scheme.hyperviscosity));
        put("t_final", format!("{:?}", self.t_final));
        put("record_every", self.record_every.to_string());
        put("init", self.init.kind.to_string());
        put("amplitude", format!("{:?}", self.init.amplitude));
        put("warm_time", format!("{:?}", self.init.warm_time));
        put("warm_stream", self.init.warm_stream.to_string());
        put("warm_dt", format!("{:?}", self.init.warm_dt));
        put("seed", self.init.seed.to_string());
        if let Some(dir) = &self.output_dir {
            put("output_dir", dir.display().to_string());
        }
        put("snapshot_every", self.snapshot_every.to_string());
        if let Some(p) = &self.preset {
            put("preset", p.clone());
        }
        s
    }
}

/// Reals accept a plain number or a multiple of π such as `2pi`.
fn parse_real(v: &str) -> std::result::Result<f64, String> {
    let x = if let Some(head) = v.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let c = if head.is_empty() {
            1.0
        } else {
            head.parse::<f64>().map_err(|_| format!("'{v}' is not a number"))?
        };
        c * PI
    } else {
        v.parse::<f64>().map_err(|_| format!("'{v}' is not a number"))?
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' is not finite"))
    }
}

fn parse_positive(v: &str) -> std::result::Result<f64, String> {
    let x = parse_real(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("expected a positive value, got {v}"))
    }
}

fn parse_nonnegative(v: &str) -> std::result::Result<f64, String> {
    let x = parse_real(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("expected a value >= 0, got {v}"))
    }
}

fn parse_uint<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("'{v}' is not a non-negative integer"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("'{v}' is not a boolean (true or false)")),
    }
}

/// Parses and validates a configuration. Only `formulation` is required.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::with_formulation(Formulation::Both);
    let mut formulation_seen = false;
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config { line, message };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if seen.iter().any(|k| k == key) {
            return Err(err(format!("duplicate key '{key}'")));
        }
        seen.push(key.to_string());
        let r: std::result::Result<(), String> = (|| {
            match key {
                "formulation" => {
                    cfg.formulation = value.parse()?;
                    formulation_seen = true;
                }
                "n" => {
                    let n: usize = parse_uint(value)?;
                    if n < 8 || !n.is_multiple_of(2) {
                        return Err(format!("n must be even and at least 8, got {n}"));
                    }
                    cfg.n = n;
                }
                "length" => cfg.length = parse_positive(value)?,
                "mu" => cfg.mu = parse_positive(value)?,
                "scheme" => cfg.scheme.kind = value.parse()?,
                "dt" => cfg.scheme.dt = parse_positive(value)?,
                "cfl_safety" => {
                    let c = parse_positive(value)?;
                    if c > 1.0 {
                        return Err(format!("cfl_safety must lie in (0, 1], got {value}"));
                    }
                    cfg.scheme.cfl_safety = c;
                }
                "adaptive" => cfg.scheme.adaptive = parse_bool(value)?,
                "hyperviscosity" => cfg.scheme.hyperviscosity = parse_nonnegative(value)?,
                "t_final" => cfg.t_final = parse_nonnegative(value)?,
                "record_every" => {
                    let r: usize = parse_uint(value)?;
                    if r == 0 {
                        return Err("record_every must be at least 1".into());
                    }
                    cfg.record_every = r;
                }
                "init" => cfg.init.kind = value.parse::<InitKind>()?,
                "amplitude" => cfg.init.amplitude = parse_nonnegative(value)?,
                "warm_time" => cfg.init.warm_time = parse_nonnegative(value)?,
                "warm_stream" => cfg.init.warm_stream = value.parse::<StreamSpec>()?,
                "warm_dt" => cfg.init.warm_dt = parse_positive(value)?,
                "seed" => cfg.init.seed = parse_uint(value)?,
                "output_dir" => {
                    if value.is_empty() {
                        return Err("output_dir must not be empty".into());
                    }
                    cfg.output_dir = Some(PathBuf::from(value));
                }
                "snapshot_every" => cfg.snapshot_every = parse_uint(value)?,
                "preset" => cfg.preset = Some(value.to_string()),
                _ => return Err(format!("unknown key '{key}'")),
            }
            Ok(())
        })();
        r.map_err(err)?;
    }
    if !formulation_seen {
        return Err(Error::InvalidConfig(
            "missing required key 'formulation'".into(),
        ));
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::SchemeKind;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config("formulation = rotstrain\n").unwrap();
        assert_eq!(c.n, 64);
        assert_eq!(c.length, 2.0 * PI);
        assert_eq!(c.mu, 1.0);
        assert_eq!(c.scheme.dt, 1e-3);
        assert_eq!(c.scheme.kind, SchemeKind::IfRk4);
        assert_eq!(c.formulation, Formulation::RotStrain);
    }

    #[test]
    fn comments_and_pi_multiples() {
        let c = parse_config("# run\nformulation = both # trailing\n\nlength = 2pi\nmu = 0.5\n").unwrap();
        assert_eq!(c.length, 2.0 * PI);
        assert_eq!(c.mu, 0.5);
    }

    fn line_of(e: Error) -> usize {
        match e {
            Error::Config { line, .. } => line,
            other => panic!("expected a line error, got {other:?}"),
        }
    }

    #[test]
    fn odd_n_is_rejected() {
        let e = parse_config("formulation = strain\nn = 63\n").unwrap_err();
        assert_eq!(line_of(e), 2);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let e = parse_config("formulation = strain\n\nfoo = 1\n").unwrap_err();
        assert_eq!(line_of(e), 3);
        assert!(parse_config("formulation = strain\nfoo = 1\n")
            .unwrap_err()
            .to_string()
            .contains("foo"));
    }

    #[test]
    fn type_errors_and_duplicates() {
        assert_eq!(line_of(parse_config("formulation = strain\nmu = fast\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_config("formulation = strain\nadaptive = 1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_config("n = 32\nn = 32\nformulation = strain\n").unwrap_err()), 2);
        assert_eq!(line_of(parse_config("formulation = liquid\n").unwrap_err()), 1);
        assert_eq!(line_of(parse_config("formulation strain\n").unwrap_err()), 1);
    }

    #[test]
    fn missing_formulation() {
        assert!(matches!(parse_config("n = 32\n"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn horizon_must_be_a_multiple_of_dt() {
        assert!(parse_config("formulation = strain\ndt = 0.3\nt_final = 1\n").is_err());
    }

    #[test]
    fn round_trip() {
        let text = "formulation = both\nn = 32\nmu = 0.7\nscheme = rk4_explicit\ndt = 0.002\n\
                    adaptive = true\nt_final = 0.5\nrecord_every = 5\ninit = warm_start\n\
                    warm_stream = random 0.05 4\nseed = 9\noutput_dir = /tmp/x\nsnapshot_every = 50\n\
                    preset = theorem\n";
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.to_config_string()).unwrap();
        assert_eq!(c, again);
        let d = RunConfig::with_formulation(Formulation::Strain);
        assert_eq!(parse_config(&d.to_config_string()).unwrap(), d);
    }
}
