//! Run configuration from `key=value` files and command-line overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

use super::cases::{CaseId, CaseSpec, MeshKind, SchemeId};

/// Runs whose tracer grows beyond this multiple of its initial maximum are
/// treated as diverged.
pub const DEFAULT_BLOWUP_FACTOR: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub case: CaseId,
    pub scheme: SchemeId,
    pub mesh: MeshKind,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub t_end: f64,
    pub h0: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed_check: bool,
    pub blowup_factor: f64,
}

const KEYS: &[&str] = &["case", "scheme", "mesh", "nx", "ny", "dt", "t_end", "h0", "out", "seed_check", "blowup_factor"];

impl RunConfig {
    /// A configuration with the case defaults for `ny` and the end time.
    pub fn new(case: CaseId, scheme: SchemeId, mesh: MeshKind, nx: usize, dt: f64) -> Self {
        Self {
            case,
            scheme,
            mesh,
            nx,
            ny: CaseSpec::default_ny(case, nx),
            dt,
            t_end: CaseSpec::default_t_end(case),
            h0: None,
            out: None,
            seed_check: false,
            blowup_factor: DEFAULT_BLOWUP_FACTOR,
        }
    }

    pub fn with_ny(mut self, ny: usize) -> Self {
        self.ny = ny;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_h0(mut self, h0: f64) -> Self {
        self.h0 = Some(h0);
        self
    }

    pub fn with_out(mut self, out: impl Into<PathBuf>) -> Self {
        self.out = Some(out.into());
        self
    }

    /// Builds a configuration from `key=value` pairs. Keys may use `-` or
    /// `_`; `case`, `scheme`, `mesh`, `nx` and `dt` are required.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            let key = k.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown configuration key '{k}'")));
            }
            map.insert(key, v.trim().to_string());
        }
        let required = |key: &str| {
            map.get(key).ok_or_else(|| Error::Config(format!("missing required setting '{key}'")))
        };
        let case: CaseId = required("case")?.parse()?;
        let scheme: SchemeId = required("scheme")?.parse()?;
        let mesh: MeshKind = required("mesh")?.parse()?;
        let nx: usize = parse_value("nx", required("nx")?)?;
        let dt: f64 = parse_value("dt", required("dt")?)?;
        let mut cfg = RunConfig::new(case, scheme, mesh, nx, dt);
        if let Some(v) = map.get("ny") {
            cfg.ny = parse_value("ny", v)?;
        }
        if let Some(v) = map.get("t_end") {
            cfg.t_end = parse_value("t_end", v)?;
        }
        if let Some(v) = map.get("h0") {
            cfg.h0 = Some(parse_value("h0", v)?);
        }
        if let Some(v) = map.get("out") {
            cfg.out = Some(PathBuf::from(v));
        }
        if let Some(v) = map.get("seed_check") {
            cfg.seed_check = parse_bool(v)?;
        }
        if let Some(v) = map.get("blowup_factor") {
            cfg.blowup_factor = parse_value("blowup_factor", v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 4 || self.ny < 4 {
            return Err(Error::Config(format!("grid {}x{} is below the 4x4 minimum", self.nx, self.ny)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("end time must be positive, got {}", self.t_end)));
        }
        if let Some(h0) = self.h0 {
            if !(h0 >= 0.0 && h0.is_finite()) {
                return Err(Error::Config(format!("mountain height must be non-negative, got {h0}")));
            }
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Config("blowup_factor must exceed 1".into()));
        }
        self.step_count().map(|_| ())
    }

    /// Number of steps, requiring `t_end` to be a whole number of steps.
    pub fn step_count(&self) -> Result<usize> {
        let n = (self.t_end / self.dt).round();
        if n < 1.0 || ((n * self.dt) - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::Config(format!(
                "end time {} is not a whole number of {} s steps",
                self.t_end, self.dt
            )));
        }
        Ok(n as usize)
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("invalid value '{v}' for '{key}'")))
}

fn parse_bool(v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{v}'"))),
    }
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got '{raw}'", n + 1)))?;
        out.insert(k.trim().replace('-', "_"), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> BTreeMap<String, String> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_fill_rows_and_end_time() {
        let cfg = RunConfig::from_pairs(&pairs(&[
            ("case", "orography"),
            ("scheme", "split"),
            ("mesh", "distorted"),
            ("nx", "300"),
            ("dt", "25"),
        ]))
        .unwrap();
        assert_eq!(cfg.ny, 50);
        assert_eq!(cfg.t_end, 10_000.0);
        assert_eq!(cfg.step_count().unwrap(), 400);
    }

    #[test]
    fn file_text_with_comments() {
        let map = parse_config_text("# run\ncase = deform\nt-end=2.5 # short\n\n").unwrap();
        assert_eq!(map["case"], "deform");
        assert_eq!(map["t_end"], "2.5");
        assert!(parse_config_text("nonsense").is_err());
    }

    #[test]
    fn rejects_bad_settings() {
        let base = [("case", "solid_body"), ("scheme", "split"), ("mesh", "orthogonal"), ("nx", "50")];
        let mut p = pairs(&base);
        assert!(RunConfig::from_pairs(&p).is_err());
        p.insert("dt".into(), "0.7".into());
        assert!(RunConfig::from_pairs(&p).is_err(), "600 is not a multiple of 0.7");
        p.insert("dt".into(), "-1".into());
        assert!(RunConfig::from_pairs(&p).is_err());
        p.insert("dt".into(), "2".into());
        p.insert("colour".into(), "red".into());
        assert!(RunConfig::from_pairs(&p).is_err());
    }
}
