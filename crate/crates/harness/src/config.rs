//! Study configurations and their validation.

use upwind_core::error::{Error, Result};
use upwind_core::velocity::VelocityField;

/// Built-in velocity fields selectable by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldChoice {
    /// The constant field `(0, 1)` (or a custom vector).
    Constant([f64; 2]),
    /// The Hoelder shear `(v(x2), 1/2)`.
    Sobolev,
}

impl FieldChoice {
    pub fn build(&self) -> VelocityField {
        match self {
            FieldChoice::Constant(u) => VelocityField::constant(*u),
            FieldChoice::Sobolev => VelocityField::sobolev_shear(),
        }
    }

    pub fn parse(name: &str) -> Result<FieldChoice> {
        match name {
            "constant" => Ok(FieldChoice::Constant([0.0, 1.0])),
            "sobolev" => Ok(FieldChoice::Sobolev),
            other => Err(Error::InvalidConfig(format!(
                "unknown field '{other}' (expected 'constant' or 'sobolev')"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    L1,
    L2,
    Hm1,
    W1,
    Kr,
}

impl MetricKind {
    /// CSV column name (the first two match the reference data layout).
    pub fn column(&self) -> &'static str {
        match self {
            MetricKind::L1 => "L1",
            MetricKind::L2 => "L2",
            MetricKind::Hm1 => "H-1",
            MetricKind::W1 => "W1",
            MetricKind::Kr => "KR",
        }
    }

    pub fn parse(name: &str) -> Result<MetricKind> {
        match name {
            "l1" => Ok(MetricKind::L1),
            "l2" => Ok(MetricKind::L2),
            "hm1" => Ok(MetricKind::Hm1),
            "w1" => Ok(MetricKind::W1),
            "kr" => Ok(MetricKind::Kr),
            other => Err(Error::InvalidConfig(format!(
                "unknown metric '{other}' (expected l1, l2, hm1, w1 or kr)"
            ))),
        }
    }

    pub fn from_column(col: &str) -> Result<MetricKind> {
        match col {
            "L1" => Ok(MetricKind::L1),
            "L2" => Ok(MetricKind::L2),
            "H-1" => Ok(MetricKind::Hm1),
            "W1" => Ok(MetricKind::W1),
            "KR" => Ok(MetricKind::Kr),
            other => Err(Error::InvalidConfig(format!("unknown metric column '{other}'"))),
        }
    }

    pub fn parse_list(names: &str) -> Result<Vec<MetricKind>> {
        let mut out = Vec::new();
        for name in names.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let m = MetricKind::parse(name)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidConfig("metric list is empty".into()));
        }
        Ok(out)
    }
}

/// Rule for the Kantorovich–Rubinstein parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RRule {
    /// `r = sqrt(meshsize)`, the scale at which the numerical-diffusion
    /// term stays bounded under refinement.
    SqrtH,
    Fixed(f64),
}

impl RRule {
    pub fn value(&self, meshsize: f64) -> f64 {
        match self {
            RRule::SqrtH => meshsize.sqrt(),
            RRule::Fixed(r) => *r,
        }
    }

    pub fn parse(s: &str) -> Result<RRule> {
        if s == "sqrt-h" {
            return Ok(RRule::SqrtH);
        }
        s.parse::<f64>()
            .ok()
            .filter(|r| *r > 0.0)
            .map(RRule::Fixed)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("bad KR parameter '{s}' (expected 'sqrt-h' or a positive number)"))
            })
    }
}

/// Configuration of the torus convergence study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub field: FieldChoice,
    /// Mesh exponents `k`; the sweep runs over cell widths `2^-k`.
    pub exponents: Vec<u32>,
    /// `dt = dt_ratio * meshsize`.
    pub dt_ratio: f64,
    /// Final measurement time.
    pub final_time: f64,
    /// Time at which the velocity field flips sign (time reversal).
    pub flip_time: Option<f64>,
    pub metrics: Vec<MetricKind>,
    pub r_rule: RRule,
    pub kr_size_cap: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            field: FieldChoice::Constant([0.0, 1.0]),
            exponents: (5..=9).collect(),
            dt_ratio: 0.25,
            final_time: 2.0,
            flip_time: Some(1.0),
            metrics: vec![MetricKind::L1, MetricKind::Hm1],
            r_rule: RRule::SqrtH,
            kr_size_cap: 5000,
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.exponents.len() < 3 {
            return Err(Error::InvalidConfig(
                "sweep needs at least 3 mesh sizes for rate fitting".into(),
            ));
        }
        if !(self.dt_ratio > 0.0) {
            return Err(Error::InvalidConfig("dt ratio must be positive".into()));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidConfig("final time must be positive".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::InvalidConfig("no metrics requested".into()));
        }
        if self.metrics.contains(&MetricKind::W1) {
            return Err(Error::InvalidConfig(
                "the W1 metric is one-dimensional; it applies to the optimality study".into(),
            ));
        }
        if let Some(flip) = self.flip_time {
            if !(flip > 0.0 && flip < self.final_time) {
                return Err(Error::InvalidConfig(
                    "flip time must lie strictly between 0 and the final time".into(),
                ));
            }
        }
        for &k in &self.exponents {
            let dt = self.dt_ratio * 2f64.powi(-(k as i32));
            for (what, t) in [("final", Some(self.final_time)), ("flip", self.flip_time)] {
                if let Some(t) = t {
                    let steps = t / dt;
                    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                        return Err(Error::InvalidConfig(format!(
                            "{what} time {t} is not a multiple of dt = {dt} at mesh 2^-{k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Configuration of the 1-D rough-datum optimality example.
#[derive(Debug, Clone)]
pub struct OptimalityConfig {
    /// Singularity strength of the datum `x^-s` on `(0, 1]`.
    pub s: f64,
    pub exponents: Vec<u32>,
    pub final_time: f64,
    pub velocity: f64,
    /// Tolerance of the stepper vs closed-form cross-check, relative to
    /// the initial datum's sup norm.
    pub cross_check_tol: f64,
}

impl Default for OptimalityConfig {
    fn default() -> Self {
        OptimalityConfig {
            s: 0.9,
            exponents: (8..=14).collect(),
            final_time: 1.0,
            velocity: 1.0,
            cross_check_tol: 1e-12,
        }
    }
}

impl OptimalityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.s) {
            return Err(Error::InvalidConfig(format!(
                "datum exponent s = {} must lie in [0, 1) for an integrable datum",
                self.s
            )));
        }
        if self.exponents.len() < 3 {
            return Err(Error::InvalidConfig(
                "sweep needs at least 3 mesh sizes for rate fitting".into(),
            ));
        }
        if !(self.velocity > 0.0) {
            return Err(Error::InvalidConfig("velocity must be positive".into()));
        }
        if !(self.final_time > 0.0) {
            return Err(Error::InvalidConfig("final time must be positive".into()));
        }
        for &k in &self.exponents {
            let w = 2f64.powi(-(k as i32));
            let dt = 0.5 * w / self.velocity;
            let steps = self.final_time / dt;
            if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
                return Err(Error::InvalidConfig(format!(
                    "final time {} is not a multiple of dt at mesh 2^-{k}",
                    self.final_time
                )));
            }
        }
        Ok(())
    }
}
