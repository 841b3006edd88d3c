//! Run configuration: presets, flat `key = value` files and validation.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::adaptive::CollisionMode;
use crate::error::{MrError, Result};
use crate::lbm::SchemeSpec;
use crate::mesh::{BoundaryMode, MeshGeometry, MAX_LEVEL};
use crate::models::{
    build_d1q2, build_d1q3_sw, build_d1q5_sw, build_euler_vectorial, InitialDatum, ScalarFlux, ScalarTest,
};
use crate::multiresolution::{PredictionSpec, ThresholdPolicy};

/// Largest finest level accepted by a run.
pub const MAX_RUN_LEVEL: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    D1q2Advection,
    D1q2Burgers,
    D1q3ShallowWater,
    D1q5ShallowWater,
    EulerVectorial,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::D1q2Advection => "d1q2-advection",
            SchemeKind::D1q2Burgers => "d1q2-burgers",
            SchemeKind::D1q3ShallowWater => "d1q3-sw",
            SchemeKind::D1q5ShallowWater => "d1q5-sw",
            SchemeKind::EulerVectorial => "euler",
        }
    }
}

impl FromStr for SchemeKind {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "d1q2-advection" | "advection" => Ok(SchemeKind::D1q2Advection),
            "d1q2-burgers" | "burgers" => Ok(SchemeKind::D1q2Burgers),
            "d1q3-sw" | "d1q3" => Ok(SchemeKind::D1q3ShallowWater),
            "d1q5-sw" | "d1q5" => Ok(SchemeKind::D1q5ShallowWater),
            "euler" | "euler-vectorial" | "d1q222" => Ok(SchemeKind::EulerVectorial),
            other => Err(MrError::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Named initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatumKind {
    Gaussian,
    Box,
    Tanh,
    Hat,
    ShallowWaterRiemann,
    Sod,
}

impl DatumKind {
    pub fn name(self) -> &'static str {
        match self {
            DatumKind::Gaussian => "gaussian",
            DatumKind::Box => "box",
            DatumKind::Tanh => "tanh",
            DatumKind::Hat => "hat",
            DatumKind::ShallowWaterRiemann => "sw-riemann",
            DatumKind::Sod => "sod",
        }
    }

    pub fn datum(self) -> InitialDatum {
        match self {
            DatumKind::Gaussian => InitialDatum::Gaussian,
            DatumKind::Box => InitialDatum::Box,
            DatumKind::Tanh => InitialDatum::Tanh,
            DatumKind::Hat => InitialDatum::Hat,
            DatumKind::ShallowWaterRiemann => InitialDatum::shallow_water_riemann(),
            DatumKind::Sod => InitialDatum::sod(),
        }
    }
}

impl FromStr for DatumKind {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(DatumKind::Gaussian),
            "box" => Ok(DatumKind::Box),
            "tanh" => Ok(DatumKind::Tanh),
            "hat" => Ok(DatumKind::Hat),
            "sw-riemann" | "riemann" => Ok(DatumKind::ShallowWaterRiemann),
            "sod" => Ok(DatumKind::Sod),
            other => Err(MrError::Config(format!("unknown initial datum '{other}'"))),
        }
    }
}

/// How level widths relate to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Grid {
    /// `2^j` cells on level `j`: `Δx = (b − a) 2^{−J̄}`.
    #[default]
    Dyadic,
    /// Cells of width `2^{−j}` on level `j`, `(b − a) 2^{J̄}` finest cells.
    Unit,
}

impl Grid {
    pub fn name(self) -> &'static str {
        match self {
            Grid::Dyadic => "dyadic",
            Grid::Unit => "unit",
        }
    }
}

impl FromStr for Grid {
    type Err = MrError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dyadic" => Ok(Grid::Dyadic),
            "unit" => Ok(Grid::Unit),
            other => Err(MrError::Config(format!("unknown grid '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub scheme: SchemeKind,
    pub datum: DatumKind,
    /// Scalar test whose exact solution is compared against, if any.
    pub exact: Option<ScalarTest>,
    pub advection_speed: f64,
    pub g: f64,
    pub gamma_gas: f64,
    pub alpha: f64,
    pub beta: f64,
    pub a: f64,
    pub b: f64,
    pub grid: Grid,
    pub min_level: u32,
    pub max_level: u32,
    pub gamma: usize,
    pub epsilon: f64,
    pub mu_bar: f64,
    pub lambda: f64,
    /// Main relaxation rate (`s₂` for the shallow water schemes).
    pub s: f64,
    pub s3: f64,
    pub s4: f64,
    pub final_time: f64,
    pub collision: CollisionMode,
    pub boundary: BoundaryMode,
    pub norm_p: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::scalar_test(ScalarTest::I)
    }
}

impl RunConfig {
    /// Defaults shared by the scalar tests, then the test's own datum, μ̄, T.
    pub fn scalar_test(test: ScalarTest) -> Self {
        let (scheme, datum) = match test {
            ScalarTest::I => (SchemeKind::D1q2Advection, DatumKind::Gaussian),
            ScalarTest::II => (SchemeKind::D1q2Advection, DatumKind::Box),
            ScalarTest::III => (SchemeKind::D1q2Burgers, DatumKind::Tanh),
            ScalarTest::IV => (SchemeKind::D1q2Burgers, DatumKind::Box),
            ScalarTest::V => (SchemeKind::D1q2Burgers, DatumKind::Hat),
        };
        Self {
            preset: Some(test.name().to_string()),
            scheme,
            datum,
            exact: Some(test),
            advection_speed: 0.75,
            g: 9.81,
            gamma_gas: 1.4,
            alpha: 1.0,
            beta: 1.0,
            a: -3.0,
            b: 3.0,
            grid: Grid::Unit,
            min_level: 2,
            max_level: 9,
            gamma: 1,
            epsilon: 1e-4,
            mu_bar: test.mu_bar(),
            lambda: 1.0,
            s: 1.0,
            s3: 1.0,
            s4: 1.0,
            final_time: test.final_time(),
            collision: CollisionMode::Leaves,
            boundary: BoundaryMode::Copy,
            norm_p: 1.0,
        }
    }

    /// Named bundle: `I`..`V`, `sw-d1q3`, `sw-d1q5`, `sod`.
    pub fn preset(name: &str) -> Result<Self> {
        if let Ok(test) = name.parse::<ScalarTest>() {
            return Ok(Self::scalar_test(test));
        }
        let base = Self::scalar_test(ScalarTest::I);
        let mut cfg = match name.to_ascii_lowercase().as_str() {
            "sw-d1q3" | "sw-d1q5" => Self {
                scheme: if name.eq_ignore_ascii_case("sw-d1q3") {
                    SchemeKind::D1q3ShallowWater
                } else {
                    SchemeKind::D1q5ShallowWater
                },
                datum: DatumKind::ShallowWaterRiemann,
                exact: None,
                g: 1.0,
                a: -1.0,
                b: 1.0,
                lambda: 2.0,
                final_time: 0.2,
                mu_bar: 0.0,
                ..base
            },
            "sod" => Self {
                scheme: SchemeKind::EulerVectorial,
                datum: DatumKind::Sod,
                exact: None,
                a: -1.0,
                b: 1.0,
                lambda: 3.0,
                final_time: 0.4,
                mu_bar: 0.0,
                s: 1.75,
                ..base
            },
            other => return Err(MrError::Config(format!("unknown preset '{other}'"))),
        };
        cfg.preset = Some(name.to_ascii_lowercase());
        Ok(cfg)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| MrError::Config(format!("bad value '{v}' for '{key}'")))
        }
        let v = value.trim();
        match key.trim() {
            "preset" => {
                *self = Self::preset(v)?;
            }
            "scheme" => self.scheme = v.parse()?,
            "datum" => self.datum = v.parse()?,
            "exact" => {
                self.exact = if v.eq_ignore_ascii_case("none") { None } else { Some(v.parse()?) };
            }
            "c" | "advection_speed" => self.advection_speed = num(key, v)?,
            "g" => self.g = num(key, v)?,
            "gamma_gas" => self.gamma_gas = num(key, v)?,
            "alpha" => self.alpha = num(key, v)?,
            "beta" => self.beta = num(key, v)?,
            "a" => self.a = num(key, v)?,
            "b" => self.b = num(key, v)?,
            "grid" => self.grid = v.parse()?,
            "min_level" => self.min_level = num(key, v)?,
            "max_level" => self.max_level = num(key, v)?,
            "gamma" => self.gamma = num(key, v)?,
            "epsilon" => self.epsilon = num(key, v)?,
            "mu_bar" => {
                self.mu_bar = if v.eq_ignore_ascii_case("inf") { f64::INFINITY } else { num(key, v)? };
            }
            "lambda" => self.lambda = num(key, v)?,
            "s" | "s2" => self.s = num(key, v)?,
            "s3" => self.s3 = num(key, v)?,
            "s4" => self.s4 = num(key, v)?,
            "T" | "t" | "final_time" => self.final_time = num(key, v)?,
            "collision" => self.collision = v.parse()?,
            "boundary" => self.boundary = v.parse()?,
            "p" | "norm_p" => self.norm_p = num(key, v)?,
            other => return Err(MrError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` text; `#` starts a comment. A `preset`
    /// line resets everything set before it.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| MrError::Config(format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_level < self.max_level && self.max_level <= MAX_RUN_LEVEL.min(MAX_LEVEL)) {
            return Err(MrError::Config(format!(
                "levels must satisfy min_level < max_level <= {MAX_RUN_LEVEL}, got {} and {}",
                self.min_level, self.max_level
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(MrError::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return Err(MrError::Config(format!("final time must be >= 0, got {}", self.final_time)));
        }
        if !(self.norm_p >= 1.0) {
            return Err(MrError::Config(format!("norm exponent must be >= 1, got {}", self.norm_p)));
        }
        let qc = match self.scheme {
            SchemeKind::D1q2Advection | SchemeKind::D1q2Burgers => 1,
            SchemeKind::D1q3ShallowWater | SchemeKind::D1q5ShallowWater => 2,
            SchemeKind::EulerVectorial => 3,
        };
        if self.datum.datum().components() != qc {
            return Err(MrError::Config(format!(
                "datum '{}' does not fit scheme '{}'",
                self.datum.name(),
                self.scheme.name()
            )));
        }
        if self.exact.is_some() && qc != 1 {
            return Err(MrError::Config("exact solutions exist for scalar schemes only".into()));
        }
        self.geometry()?;
        self.prediction()?;
        self.policy()?;
        self.build_scheme()?;
        Ok(())
    }

    pub fn geometry(&self) -> Result<MeshGeometry> {
        match self.grid {
            Grid::Dyadic => MeshGeometry::new(self.a, self.b, self.min_level, self.max_level),
            Grid::Unit => MeshGeometry::with_unit_cells(self.a, self.b, self.min_level, self.max_level),
        }
    }

    pub fn prediction(&self) -> Result<PredictionSpec> {
        PredictionSpec::new(self.gamma)
    }

    pub fn policy(&self) -> Result<ThresholdPolicy> {
        ThresholdPolicy::new(self.epsilon, self.mu_bar)
    }

    pub fn build_scheme(&self) -> Result<Arc<SchemeSpec>> {
        let spec = match self.scheme {
            SchemeKind::D1q2Advection => build_d1q2(ScalarFlux::Advection(self.advection_speed), self.lambda, self.s)?,
            SchemeKind::D1q2Burgers => build_d1q2(ScalarFlux::Burgers, self.lambda, self.s)?,
            SchemeKind::D1q3ShallowWater => build_d1q3_sw(self.g, self.lambda, self.s)?,
            SchemeKind::D1q5ShallowWater => {
                build_d1q5_sw(self.g, self.lambda, self.alpha, self.beta, [self.s, self.s3, self.s4])?
            }
            SchemeKind::EulerVectorial => build_euler_vectorial(self.gamma_gas, self.lambda, self.s)?,
        };
        Ok(Arc::new(spec))
    }

    /// `N = round(T / Δt)`.
    pub fn steps(&self) -> Result<usize> {
        let dt = self.geometry()?.dx() / self.lambda;
        let n = (self.final_time / dt).round();
        if (n * dt - self.final_time).abs() > 0.5 * dt {
            log::warn!("final time {} is not a multiple of the time step {dt}", self.final_time);
        }
        Ok(n as usize)
    }

    /// Canonical description of everything the uniform reference run depends on.
    pub fn reference_key(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "scheme={};datum={};exact={};c={:e};g={:e};gamma_gas={:e};alpha={:e};beta={:e};a={:e};b={:e};grid={};min_level={};max_level={};lambda={:e};s={:e};s3={:e};s4={:e};T={:e};boundary={}",
            self.scheme.name(),
            self.datum.name(),
            self.exact.map_or("none", ScalarTest::name),
            self.advection_speed,
            self.g,
            self.gamma_gas,
            self.alpha,
            self.beta,
            self.a,
            self.b,
            self.grid.name(),
            self.min_level,
            self.max_level,
            self.lambda,
            self.s,
            self.s3,
            self.s4,
            self.final_time,
            self.boundary.name(),
        );
        s
    }

    /// Hex SHA-256 of [`RunConfig::reference_key`].
    pub fn reference_hash(&self) -> String {
        hex::encode(Sha256::digest(self.reference_key().as_bytes()))
    }

    /// Full configuration as `key = value` lines, parseable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        let mu = if self.mu_bar.is_infinite() { "inf".to_string() } else { format!("{}", self.mu_bar) };
        let lines = [
            ("scheme", self.scheme.name().to_string()),
            ("datum", self.datum.name().to_string()),
            ("exact", self.exact.map_or("none", ScalarTest::name).to_string()),
            ("c", format!("{}", self.advection_speed)),
            ("g", format!("{}", self.g)),
            ("gamma_gas", format!("{}", self.gamma_gas)),
            ("alpha", format!("{}", self.alpha)),
            ("beta", format!("{}", self.beta)),
            ("a", format!("{}", self.a)),
            ("b", format!("{}", self.b)),
            ("grid", self.grid.name().to_string()),
            ("min_level", format!("{}", self.min_level)),
            ("max_level", format!("{}", self.max_level)),
            ("gamma", format!("{}", self.gamma)),
            ("epsilon", format!("{:e}", self.epsilon)),
            ("mu_bar", mu),
            ("lambda", format!("{}", self.lambda)),
            ("s", format!("{}", self.s)),
            ("s3", format!("{}", self.s3)),
            ("s4", format!("{}", self.s4)),
            ("T", format!("{}", self.final_time)),
            ("collision", self.collision.name().to_string()),
            ("boundary", self.boundary.name().to_string()),
            ("p", format!("{}", self.norm_p)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_presets_follow_the_test_table() {
        let c = RunConfig::preset("IV").unwrap();
        assert_eq!(c.scheme, SchemeKind::D1q2Burgers);
        assert_eq!(c.mu_bar, 0.0);
        assert_eq!(c.final_time, 0.7);
        assert_eq!((c.a, c.b, c.min_level, c.max_level, c.gamma, c.epsilon, c.lambda), (-3.0, 3.0, 2, 9, 1, 1e-4, 1.0));
        assert!(RunConfig::preset("I").unwrap().mu_bar.is_infinite());
        assert_eq!(c.grid, Grid::Unit);
        let g = c.geometry().unwrap();
        assert_eq!((g.finest_cells(), g.dx()), (3072, 1.0 / 512.0));
        assert_eq!(RunConfig::preset("I").unwrap().steps().unwrap(), 205);
        assert_eq!(RunConfig::preset("IV").unwrap().steps().unwrap(), 358);
        assert_eq!(RunConfig::preset("V").unwrap().steps().unwrap(), 666);
        let mut d = RunConfig::preset("I").unwrap();
        d.grid = Grid::Dyadic;
        assert_eq!((d.geometry().unwrap().dx(), d.steps().unwrap()), (6.0 / 512.0, 34));
        for name in ["I", "II", "III", "IV", "V", "sw-d1q3", "sw-d1q5", "sod"] {
            RunConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(RunConfig::preset("VI").is_err());
    }

    #[test]
    fn system_presets() {
        let sw = RunConfig::preset("sw-d1q5").unwrap();
        assert_eq!((sw.a, sw.b, sw.lambda, sw.final_time), (-1.0, 1.0, 2.0, 0.2));
        assert_eq!(sw.steps().unwrap(), 205);
        assert_eq!(sw.g, 1.0);
        assert_eq!(sw.build_scheme().unwrap().sigma(), 2);
        let sod = RunConfig::preset("sod").unwrap();
        assert_eq!((sod.lambda, sod.final_time, sod.gamma_gas, sod.s), (3.0, 0.4, 1.4, 1.75));
        assert_eq!(sod.steps().unwrap(), 614);
        assert_eq!(sod.g, 9.81);
    }

    #[test]
    fn key_value_round_trip() {
        let mut c = RunConfig::preset("sod").unwrap();
        c.epsilon = 3e-5;
        c.collision = CollisionMode::Reconstructed;
        c.boundary = BoundaryMode::Periodic;
        c.grid = Grid::Dyadic;
        let mut back = RunConfig::parse(&c.to_text()).unwrap();
        back.preset = c.preset.clone();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_with_preset_and_overrides() {
        let text = "# test II at a larger s\npreset = II\ns = 1.5   # relaxation\nmu_bar = inf\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.datum, DatumKind::Box);
        assert_eq!(c.s, 1.5);
        assert!(c.mu_bar.is_infinite());
        assert!(RunConfig::parse("s 1.5").is_err());
        assert!(RunConfig::parse("colour = red").is_err());
    }

    #[test]
    fn validation_errors() {
        let mut c = RunConfig::default();
        c.epsilon = -1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.min_level = 9;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.max_level = 21;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.datum = DatumKind::Sod;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.b = 3.1;
        assert!(c.validate().is_err());
        c.grid = Grid::Dyadic;
        c.validate().unwrap();
    }

    #[test]
    fn reference_hash_ignores_adaptive_parameters() {
        let a = RunConfig::preset("III").unwrap();
        let mut b = a.clone();
        b.epsilon = 1e-7;
        b.collision = CollisionMode::Reconstructed;
        assert_eq!(a.reference_hash(), b.reference_hash());
        b.s = 1.25;
        assert_ne!(a.reference_hash(), b.reference_hash());
        let mut d = a.clone();
        d.grid = Grid::Dyadic;
        assert_ne!(a.reference_hash(), d.reference_hash());
        assert_eq!(a.reference_hash().len(), 64);
    }
}
