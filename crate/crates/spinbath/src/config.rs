//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! ```text
//! [spectrometer]
//! frequency = 240e9      # Hz
//! temperature = 300      # K
//!
//! [spectrum]
//! centers = n, nv
//!
//! [center.nv]
//! population = 0.008333
//! linewidth_pp = 2.36e-4
//! ```
//!
//! Every key has a default, so an empty file is a valid configuration.
//! [`RunConfig::render`] writes every field with round-trip float
//! formatting; parsing the rendered text gives back an identical value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use spinbath_core::pulse::BathNoiseConfig;
use spinbath_core::spectra::{FieldGrid, StickOptions};
use spinbath_core::spin::{CenterKind, CenterParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    /// 1-based; 0 for whole-file problems found after parsing.
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterConfig {
    pub params: CenterParams,
    /// Relative number of centers (any positive scale).
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Hz
    pub frequency: f64,
    /// K
    pub temperature: f64,
    pub grid: FieldGrid,
    pub centers: Vec<CenterKind>,
    pub sticks: StickOptions,
    /// Extrema smaller than this fraction of the largest are ignored.
    pub peak_threshold: f64,
    pub n: CenterConfig,
    pub nv: CenterConfig,
    /// Echo simulation bath; its temperature and seed follow
    /// `temperature` and `seed`.
    pub n_sources: usize,
    pub coupling_scale: f64,
    pub base_rate: f64,
    pub t_ze: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bath = BathNoiseConfig::default();
        RunConfig {
            frequency: 240e9,
            temperature: 300.0,
            grid: FieldGrid::default(),
            centers: vec![CenterKind::N],
            sticks: StickOptions::default(),
            peak_threshold: 0.05,
            n: CenterConfig {
                params: CenterParams::nitrogen(),
                population: 1.0,
            },
            // Roughly one N-V per 120 substitutional nitrogens.
            nv: CenterConfig {
                params: CenterParams::nv(),
                population: 1.0 / 120.0,
            },
            n_sources: bath.n_sources,
            coupling_scale: bath.coupling_scale,
            base_rate: bath.base_rate,
            t_ze: bath.t_ze,
            seed: bath.seed,
            output_dir: None,
        }
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| ConfigError::at(line, format!("`{key}` expects a number, got `{v}`")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::at(line, format!("`{key}` expects true or false, got `{v}`"))),
    }
}

fn parse_kind(line: usize, v: &str) -> Result<CenterKind, ConfigError> {
    match v {
        "n" => Ok(CenterKind::N),
        "nv" => Ok(CenterKind::Nv),
        _ => Err(ConfigError::at(line, format!("unknown center `{v}` (expected n or nv)"))),
    }
}

fn set_center(c: &mut CenterConfig, line: usize, key: &str, v: &str) -> Result<(), ConfigError> {
    let p = &mut c.params;
    match key {
        "population" => c.population = parse_f64(line, key, v)?,
        "g_parallel" => p.g_parallel = parse_f64(line, key, v)?,
        "g_perp" => p.g_perp = parse_f64(line, key, v)?,
        "zero_field_d" => p.zero_field_d = parse_f64(line, key, v)?,
        "hyperfine_111" => p.hyperfine_111 = parse_f64(line, key, v)?,
        "hyperfine_other" => p.hyperfine_other = parse_f64(line, key, v)?,
        "linewidth_pp" => p.linewidth_pp = parse_f64(line, key, v)?,
        "nuclear_spin" => {
            p.nuclear_spin = v
                .parse()
                .map_err(|_| ConfigError::at(line, format!("`nuclear_spin` expects a small integer, got `{v}`")))?
        }
        _ => return Err(ConfigError::at(line, format!("unknown key `{key}`"))),
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        // (min, max, step) are validated together at the end.
        let mut grid = (cfg.grid.min, cfg.grid.max, cfg.grid.step);
        let mut grid_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(line, "section header is missing `]`"))?
                    .trim();
                match name {
                    "spectrometer" | "grid" | "spectrum" | "center.n" | "center.nv" | "bath" | "run" => {
                        section = name.to_string()
                    }
                    _ => return Err(ConfigError::at(line, format!("unknown section `[{name}]`"))),
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, v) = (key.trim(), value.trim());
            match (section.as_str(), key) {
                ("", _) => return Err(ConfigError::at(line, "key outside of any section")),
                ("spectrometer", "frequency") => cfg.frequency = parse_f64(line, key, v)?,
                ("spectrometer", "temperature") => cfg.temperature = parse_f64(line, key, v)?,
                ("grid", "min") => grid.0 = parse_f64(line, key, v)?,
                ("grid", "max") => grid.1 = parse_f64(line, key, v)?,
                ("grid", "step") => grid.2 = parse_f64(line, key, v)?,
                ("spectrum", "centers") => {
                    cfg.centers = v
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(|s| parse_kind(line, s))
                        .collect::<Result<_, _>>()?;
                    let mut seen = cfg.centers.clone();
                    seen.sort();
                    seen.dedup();
                    if seen.len() != cfg.centers.len() {
                        return Err(ConfigError::at(line, "a center is listed twice"));
                    }
                }
                ("spectrum", "tilt_deg") => cfg.sticks.tilt_deg = parse_f64(line, key, v)?,
                ("spectrum", "isotropic_g") => cfg.sticks.isotropic_g = parse_bool(line, key, v)?,
                ("spectrum", "all_transitions") => cfg.sticks.all_transitions = parse_bool(line, key, v)?,
                ("spectrum", "peak_threshold") => cfg.peak_threshold = parse_f64(line, key, v)?,
                ("center.n", _) => set_center(&mut cfg.n, line, key, v)?,
                ("center.nv", _) => set_center(&mut cfg.nv, line, key, v)?,
                ("bath", "n_sources") => {
                    cfg.n_sources = v
                        .parse()
                        .map_err(|_| ConfigError::at(line, format!("`n_sources` expects a count, got `{v}`")))?
                }
                ("bath", "coupling_scale") => cfg.coupling_scale = parse_f64(line, key, v)?,
                ("bath", "base_rate") => cfg.base_rate = parse_f64(line, key, v)?,
                ("bath", "t_ze") => cfg.t_ze = parse_f64(line, key, v)?,
                ("run", "seed") => {
                    cfg.seed = v
                        .parse()
                        .map_err(|_| ConfigError::at(line, format!("`seed` expects an unsigned integer, got `{v}`")))?
                }
                ("run", "output_dir") => cfg.output_dir = (!v.is_empty()).then(|| PathBuf::from(v)),
                (s, k) => return Err(ConfigError::at(line, format!("unknown key `{k}` in [{s}]"))),
            }
            if section == "grid" {
                grid_line = line;
            }
        }
        cfg.grid = FieldGrid::new(grid.0, grid.1, grid.2).map_err(|e| ConfigError::at(grid_line, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path).map_err(|source| crate::Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|source| crate::Error::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Check every value with the module that owns it.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| ConfigError::at(0, m);
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return Err(bad(format!("frequency must be > 0 Hz, got {}", self.frequency)));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(bad(format!("temperature must be > 0 K, got {}", self.temperature)));
        }
        FieldGrid::new(self.grid.min, self.grid.max, self.grid.step).map_err(|e| bad(e.to_string()))?;
        spinbath_core::spin::orientations(self.sticks.tilt_deg).map_err(|e| bad(e.to_string()))?;
        if !(self.peak_threshold.is_finite() && (0.0..1.0).contains(&self.peak_threshold)) {
            return Err(bad(format!("peak_threshold must be in [0, 1), got {}", self.peak_threshold)));
        }
        for c in [&self.n, &self.nv] {
            c.params.validate().map_err(|e| bad(e.to_string()))?;
            if !(c.population.is_finite() && c.population > 0.0) {
                return Err(bad(format!("{} population must be > 0, got {}", c.params.label, c.population)));
            }
        }
        self.bath().validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn bath(&self) -> BathNoiseConfig {
        BathNoiseConfig {
            n_sources: self.n_sources,
            coupling_scale: self.coupling_scale,
            base_rate: self.base_rate,
            temperature: self.temperature,
            t_ze: self.t_ze,
            seed: self.seed,
        }
    }

    pub fn center(&self, kind: CenterKind) -> &CenterConfig {
        match kind {
            CenterKind::N => &self.n,
            CenterKind::Nv => &self.nv,
        }
    }

    /// (parameters, population) for each listed center.
    pub fn spectrum_centers(&self) -> Vec<(CenterParams, f64)> {
        self.centers
            .iter()
            .map(|&k| {
                let c = self.center(k);
                (c.params, c.population)
            })
            .collect()
    }

    pub fn render(&self) -> String {
        let mut s = self.render_physics();
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(dir) = &self.output_dir {
            let _ = writeln!(s, "output_dir = {}", dir.display());
        }
        s
    }

    /// Everything except [run]; the seed and output location are
    /// reported separately in provenance headers.
    fn render_physics(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[spectrometer]");
        let _ = writeln!(s, "frequency = {:?}", self.frequency);
        let _ = writeln!(s, "temperature = {:?}", self.temperature);
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "min = {:?}", self.grid.min);
        let _ = writeln!(s, "max = {:?}", self.grid.max);
        let _ = writeln!(s, "step = {:?}", self.grid.step);
        let _ = writeln!(s, "\n[spectrum]");
        let names: Vec<&str> = self.centers.iter().map(|c| c.as_str()).collect();
        let _ = writeln!(s, "centers = {}", names.join(", "));
        let _ = writeln!(s, "tilt_deg = {:?}", self.sticks.tilt_deg);
        let _ = writeln!(s, "isotropic_g = {}", self.sticks.isotropic_g);
        let _ = writeln!(s, "all_transitions = {}", self.sticks.all_transitions);
        let _ = writeln!(s, "peak_threshold = {:?}", self.peak_threshold);
        for (name, c) in [("n", &self.n), ("nv", &self.nv)] {
            let p = &c.params;
            let _ = writeln!(s, "\n[center.{name}]");
            let _ = writeln!(s, "population = {:?}", c.population);
            let _ = writeln!(s, "g_parallel = {:?}", p.g_parallel);
            let _ = writeln!(s, "g_perp = {:?}", p.g_perp);
            let _ = writeln!(s, "zero_field_d = {:?}", p.zero_field_d);
            let _ = writeln!(s, "hyperfine_111 = {:?}", p.hyperfine_111);
            let _ = writeln!(s, "hyperfine_other = {:?}", p.hyperfine_other);
            let _ = writeln!(s, "linewidth_pp = {:?}", p.linewidth_pp);
            let _ = writeln!(s, "nuclear_spin = {}", p.nuclear_spin);
        }
        let _ = writeln!(s, "\n[bath]");
        let _ = writeln!(s, "n_sources = {}", self.n_sources);
        let _ = writeln!(s, "coupling_scale = {:?}", self.coupling_scale);
        let _ = writeln!(s, "base_rate = {:?}", self.base_rate);
        let _ = writeln!(s, "t_ze = {:?}", self.t_ze);
        s
    }

    /// SHA-256 of the rendered physics settings plus `extra` (the
    /// command-specific arguments). The output directory and thread count
    /// never enter the hash.
    pub fn hash(&self, extra: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.render_physics().as_bytes());
        h.update(b"\n[command]\n");
        h.update(extra.as_bytes());
        hex::encode(h.finalize())
    }
}
