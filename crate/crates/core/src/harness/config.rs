//! Flat `key = value` scenario files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hamiltonians::{Couplings, InteractionPreset};
use crate::propagator::Integrator;
use crate::spin::Axis;

/// Which dynamics a scenario simulates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Joint S–J system with DC fields.
    FullDc,
    /// Joint S–J system with DC fields and the AC field.
    FullDcAc,
    /// S alone under the effective one-axis twist.
    EffectiveOat,
    /// S alone under the time-averaged two-axis twist.
    EffectiveTat,
}

impl Scheme {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full_dc" => Some(Scheme::FullDc),
            "full_dc_ac" => Some(Scheme::FullDcAc),
            "effective_oat" => Some(Scheme::EffectiveOat),
            "effective_tat" => Some(Scheme::EffectiveTat),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::FullDc => "full_dc",
            Scheme::FullDcAc => "full_dc_ac",
            Scheme::EffectiveOat => "effective_oat",
            Scheme::EffectiveTat => "effective_tat",
        }
    }

    pub fn is_full(self) -> bool {
        matches!(self, Scheme::FullDc | Scheme::FullDcAc)
    }

    pub fn is_tat(self) -> bool {
        matches!(self, Scheme::FullDcAc | Scheme::EffectiveTat)
    }

    /// The effective model that approximates this scheme.
    pub fn effective(self) -> Scheme {
        if self.is_tat() {
            Scheme::EffectiveTat
        } else {
            Scheme::EffectiveOat
        }
    }
}

/// How the DC fields are fixed; Ω' always follows from `f = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DriveSpec {
    /// `Δ/g`, with `Δ = 2(Ω - Ω')/N_j`.
    DeltaOverG(f64),
    Omega(f64),
}

/// Parameter varied by an imperfection sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vary {
    Epsilon,
    EpsilonPrime,
}

impl Vary {
    pub fn name(self) -> &'static str {
        match self {
            Vary::Epsilon => "epsilon",
            Vary::EpsilonPrime => "epsilon_prime",
        }
    }
}

/// One scenario plus the optional sweep and Husimi settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    pub interaction: InteractionPreset,
    /// Coupling scale `g`; the unit of rates.
    pub g: f64,
    pub n_s: usize,
    pub n_j: usize,
    pub drive: DriveSpec,
    /// `None`: `(π/2, π/2)` for OAT schemes, the twist's saddle axis for TAT schemes.
    pub init_s: Option<(f64, f64)>,
    pub init_j: (f64, f64),
    /// `None`: three times the predicted optimal squeezing time.
    pub t_end: Option<f64>,
    pub n_samples: usize,
    pub tol: f64,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    /// `None`: `20 |χ_eff| N_s`.
    pub ac_frequency: Option<f64>,
    /// `None`: chosen from `p` and `q`.
    pub ac_axis: Option<Axis>,
    pub integrator: Integrator,
    pub refine: bool,
    pub output_prefix: String,
    pub n_list: Vec<usize>,
    pub vary: Option<Vary>,
    pub values: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub husimi_n_theta: usize,
    pub husimi_n_phi: usize,
    /// Husimi snapshot times as fractions of `t_min`.
    pub husimi_fractions: Vec<f64>,
}

pub const DEFAULT_N_SAMPLES: usize = 301;
pub const DEFAULT_TOL: f64 = 1e-8;

impl ScenarioConfig {
    /// Defaults for everything but the scheme, interaction, sizes and drive.
    pub fn new(scheme: Scheme, interaction: InteractionPreset, n_s: usize, n_j: usize, drive: DriveSpec) -> Self {
        Self {
            scheme,
            interaction,
            g: 1.0,
            n_s,
            n_j,
            drive,
            init_s: None,
            init_j: (0.0, 0.0),
            t_end: None,
            n_samples: DEFAULT_N_SAMPLES,
            tol: DEFAULT_TOL,
            epsilon: 0.0,
            epsilon_prime: 0.0,
            ac_frequency: None,
            ac_axis: None,
            integrator: Integrator::Auto,
            refine: true,
            output_prefix: "out".into(),
            n_list: Vec::new(),
            vary: None,
            values: Vec::new(),
            delta_list: Vec::new(),
            husimi_n_theta: crate::observables::HUSIMI_N_THETA,
            husimi_n_phi: crate::observables::HUSIMI_N_PHI,
            husimi_fractions: vec![0.0, 0.5, 1.0],
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = parse_pairs(text)?;
        let mut take = |k: &str| kv.remove(k);

        let scheme_s = take("scheme").ok_or_else(|| missing("scheme"))?;
        let scheme = Scheme::parse(&scheme_s)
            .ok_or_else(|| Error::Config(format!("unknown scheme `{scheme_s}`")))?;
        let g = opt_f64(take("g"), "g")?.unwrap_or(1.0);
        let h1_axis = match take("h1_axis") {
            Some(s) => parse_axis(&s, "h1_axis")?,
            None => Axis::X,
        };
        let gx = opt_f64(take("g_x"), "g_x")?;
        let gy = opt_f64(take("g_y"), "g_y")?;
        let gz = opt_f64(take("g_z"), "g_z")?;
        let interaction_s = take("interaction").unwrap_or_else(|| "H2".into());
        let interaction = match interaction_s.as_str() {
            "H1" => InteractionPreset::H1(h1_axis),
            "H2" => InteractionPreset::H2,
            "H3" => InteractionPreset::H3,
            "custom" => InteractionPreset::Custom(Couplings::new(
                gx.unwrap_or(0.0),
                gy.unwrap_or(0.0),
                gz.unwrap_or(0.0),
            )),
            other => return Err(Error::Config(format!("unknown interaction `{other}`"))),
        };
        if interaction_s != "custom" && (gx.is_some() || gy.is_some() || gz.is_some()) {
            return Err(Error::Config(
                "g_x, g_y, g_z are only valid with interaction = custom".into(),
            ));
        }
        let n_s = opt_usize(take("n_s"), "n_s")?.ok_or_else(|| missing("n_s"))?;
        let n_j = opt_usize(take("n_j"), "n_j")?.unwrap_or(n_s);
        let delta = opt_f64(take("delta_over_g"), "delta_over_g")?;
        let omega = opt_f64(take("omega"), "omega")?;
        let drive = match (delta, omega) {
            (Some(d), None) => DriveSpec::DeltaOverG(d),
            (None, Some(w)) => DriveSpec::Omega(w),
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either delta_over_g or omega, not both".into()))
            }
            (None, None) => return Err(missing("delta_over_g")),
        };
        let mut c = ScenarioConfig::new(scheme, interaction, n_s, n_j, drive);
        c.g = g;
        let s_theta = opt_f64(take("init_s_theta"), "init_s_theta")?;
        let s_phi = opt_f64(take("init_s_phi"), "init_s_phi")?;
        c.init_s = match (s_theta, s_phi) {
            (None, None) => None,
            (t, p) => Some((t.unwrap_or(0.0), p.unwrap_or(0.0))),
        };
        c.init_j = (
            opt_f64(take("init_j_theta"), "init_j_theta")?.unwrap_or(0.0),
            opt_f64(take("init_j_phi"), "init_j_phi")?.unwrap_or(0.0),
        );
        c.t_end = opt_f64(take("t_end"), "t_end")?;
        if let Some(n) = opt_usize(take("n_samples"), "n_samples")? {
            c.n_samples = n;
        }
        if let Some(t) = opt_f64(take("tol"), "tol")? {
            c.tol = t;
        }
        c.epsilon = opt_f64(take("epsilon"), "epsilon")?.unwrap_or(0.0);
        c.epsilon_prime = opt_f64(take("epsilon_prime"), "epsilon_prime")?.unwrap_or(0.0);
        c.ac_frequency = opt_f64(take("ac_frequency"), "ac_frequency")?;
        c.ac_axis = take("ac_axis").map(|s| parse_axis(&s, "ac_axis")).transpose()?;
        if let Some(s) = take("integrator") {
            c.integrator = match s.as_str() {
                "auto" => Integrator::Auto,
                "rk4" => Integrator::Rk4,
                other => return Err(Error::Config(format!("unknown integrator `{other}`"))),
            };
        }
        if let Some(s) = take("refine") {
            c.refine = parse_bool(&s, "refine")?;
        }
        if let Some(s) = take("output_prefix") {
            c.output_prefix = s;
        }
        if let Some(s) = take("n_list") {
            c.n_list = parse_list(&s, "n_list", |x| x.parse::<usize>().ok())?;
        }
        if let Some(s) = take("vary") {
            c.vary = Some(match s.as_str() {
                "epsilon" => Vary::Epsilon,
                "epsilon_prime" => Vary::EpsilonPrime,
                other => return Err(Error::Config(format!("unknown vary target `{other}`"))),
            });
        }
        if let Some(s) = take("values") {
            c.values = parse_list(&s, "values", parse_finite)?;
        }
        if let Some(s) = take("delta_list") {
            c.delta_list = parse_list(&s, "delta_list", parse_finite)?;
        }
        if let Some(n) = opt_usize(take("husimi_n_theta"), "husimi_n_theta")? {
            c.husimi_n_theta = n;
        }
        if let Some(n) = opt_usize(take("husimi_n_phi"), "husimi_n_phi")? {
            c.husimi_n_phi = n;
        }
        if let Some(s) = take("husimi_fractions") {
            c.husimi_fractions = parse_list(&s, "husimi_fractions", parse_finite)?;
        }
        if let Some(key) = kv.keys().next() {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_s == 0 || self.n_j == 0 {
            return bad("n_s and n_j must be positive".into());
        }
        if !(self.g > 0.0) || !self.g.is_finite() {
            return bad(format!("g must be positive, got {}", self.g));
        }
        match self.drive {
            DriveSpec::DeltaOverG(d) if !(d > 0.0) || !d.is_finite() => {
                return bad(format!("delta_over_g must be positive, got {d}"))
            }
            DriveSpec::Omega(w) if w == 0.0 || !w.is_finite() => {
                return bad(format!("omega must be finite and non-zero, got {w}"))
            }
            _ => {}
        }
        if self.n_samples < 2 {
            return bad("n_samples must be at least 2".into());
        }
        if let Some(t) = self.t_end {
            if !(t > 0.0) || !t.is_finite() {
                return bad(format!("t_end must be positive, got {t}"));
            }
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.epsilon > -1.0) || !(self.epsilon_prime > -1.0) {
            return bad("epsilon and epsilon_prime must exceed -1".into());
        }
        if let Some(w) = self.ac_frequency {
            if !(w > 0.0) || !w.is_finite() {
                return bad(format!("ac_frequency must be positive, got {w}"));
            }
        }
        if self.ac_axis == Some(Axis::X) {
            return bad("ac_axis must be y or z".into());
        }
        if self.husimi_n_theta < 2 || self.husimi_n_phi < 2 {
            return bad("Husimi grid must be at least 2x2".into());
        }
        if self.output_prefix.is_empty() {
            return bad("output_prefix must not be empty".into());
        }
        Ok(())
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if kv.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("duplicate config key `{k}`")));
        }
    }
    Ok(kv)
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn opt_f64(v: Option<String>, key: &str) -> Result<Option<f64>> {
    v.map(|s| {
        parse_finite(&s).ok_or_else(|| Error::Config(format!("`{key}`: `{s}` is not a finite number")))
    })
    .transpose()
}

fn opt_usize(v: Option<String>, key: &str) -> Result<Option<usize>> {
    v.map(|s| {
        s.parse::<usize>()
            .map_err(|_| Error::Config(format!("`{key}`: `{s}` is not a non-negative integer")))
    })
    .transpose()
}

fn parse_bool(s: &str, key: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: `{s}` is not a boolean"))),
    }
}

fn parse_axis(s: &str, key: &str) -> Result<Axis> {
    Axis::parse(s).ok_or_else(|| Error::Config(format!("`{key}`: `{s}` is not an axis (x, y or z)")))
}

fn parse_list<T>(s: &str, key: &str, item: impl Fn(&str) -> Option<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| item(x).ok_or_else(|| Error::Config(format!("`{key}`: cannot parse `{x}`"))))
        .collect()
}
