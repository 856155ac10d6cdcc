//! Driven coupled-spin Hamiltonians and the effective twisting models they reduce to.
//!
//! The lab-frame model is
//! `H = sum_mu g_mu S_mu J_mu + Ω J_z + Ω' S_z [+ A cos(ωt) S_axis]`.
//! Eliminating the first-order exchange terms with the generator
//! `-i(θ_xy S_x J_y + θ_yx S_y J_x)` and freezing `J` in its `+z` coherent state
//! leaves `f S_z + p S_x^2 + q S_y^2` on the S subsystem.

use crate::error::{Error, Result};
use crate::special::{bessel_j0, bisect, solve_bessel_ratio};
use crate::spin::{
    cartesian_operators, collective_operator, embed_pair, Axis, Component, Operator, PairDims,
    SpinSpace,
};

/// Exchange couplings `(g_x, g_y, g_z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Couplings {
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl Couplings {
    pub fn new(gx: f64, gy: f64, gz: f64) -> Self {
        Self { gx, gy, gz }
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.gx,
            Axis::Y => self.gy,
            Axis::Z => self.gz,
        }
    }

    /// Largest coupling magnitude; used as `g` in the validity ratios.
    pub fn reference_rate(&self) -> f64 {
        self.gx.abs().max(self.gy.abs()).max(self.gz.abs())
    }
}

/// The standard interaction families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InteractionPreset {
    /// Single-axis coupling `g S_a J_a`.
    H1(Axis),
    /// Isotropic exchange `g S·J`.
    H2,
    /// Dipolar form `g (S_x J_x + S_y J_y - 2 S_z J_z)`.
    H3,
    Custom(Couplings),
}

impl InteractionPreset {
    pub fn couplings(&self, g: f64) -> Couplings {
        match *self {
            InteractionPreset::H1(Axis::X) => Couplings::new(g, 0.0, 0.0),
            InteractionPreset::H1(Axis::Y) => Couplings::new(0.0, g, 0.0),
            InteractionPreset::H1(Axis::Z) => Couplings::new(0.0, 0.0, g),
            InteractionPreset::H2 => Couplings::new(g, g, g),
            InteractionPreset::H3 => Couplings::new(g, g, -2.0 * g),
            InteractionPreset::Custom(c) => c,
        }
    }

    pub fn label(&self) -> String {
        match self {
            InteractionPreset::H1(a) => format!("H1_{}", a.name()),
            InteractionPreset::H2 => "H2".into(),
            InteractionPreset::H3 => "H3".into(),
            InteractionPreset::Custom(c) => format!("custom({},{},{})", c.gx, c.gy, c.gz),
        }
    }
}

/// Couplings, DC fields and the optional AC field of one driven system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveConfig {
    pub couplings: Couplings,
    /// Ω, the DC field on J.
    pub omega: f64,
    /// Ω', the DC field on S.
    pub omega_prime: f64,
    pub ac_amplitude: f64,
    pub ac_frequency: f64,
    pub ac_axis: Axis,
    pub n_s: usize,
    pub n_j: usize,
}

impl DriveConfig {
    /// DC-only configuration.
    pub fn dc(couplings: Couplings, omega: f64, omega_prime: f64, n_s: usize, n_j: usize) -> Self {
        Self {
            couplings,
            omega,
            omega_prime,
            ac_amplitude: 0.0,
            ac_frequency: 0.0,
            ac_axis: Axis::Z,
            n_s,
            n_j,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 || self.n_j == 0 {
            return Err(Error::InvalidArgument("particle numbers must be positive".into()));
        }
        if self.ac_amplitude < 0.0 {
            return Err(Error::InvalidArgument("AC amplitude must be non-negative".into()));
        }
        if self.ac_amplitude > 0.0 && !(self.ac_frequency > 0.0) {
            return Err(Error::InvalidArgument(
                "AC frequency must be positive when the AC amplitude is".into(),
            ));
        }
        Ok(())
    }

    pub fn spaces(&self) -> Result<(SpinSpace, SpinSpace)> {
        Ok((SpinSpace::new(self.n_s)?, SpinSpace::new(self.n_j)?))
    }

    fn check_spaces(&self, s: SpinSpace, j: SpinSpace) -> Result<PairDims> {
        if s.n_particles() != self.n_s {
            return Err(Error::DimensionMismatch {
                expected: self.n_s + 1,
                found: s.dim(),
            });
        }
        if j.n_particles() != self.n_j {
            return Err(Error::DimensionMismatch {
                expected: self.n_j + 1,
                found: j.dim(),
            });
        }
        Ok(PairDims::of(s, j))
    }
}

/// `sum_mu g_mu S_mu ⊗ J_mu` on the joint space.
pub fn build_interaction(config: &DriveConfig, s: SpinSpace, j: SpinSpace) -> Result<Operator> {
    let dims = config.check_spaces(s, j)?;
    let so = cartesian_operators(s);
    let jo = cartesian_operators(j);
    let mut h = embed_pair(None, None, dims)?.scaled(0.0).sparsified();
    for axis in Axis::ALL {
        let g = config.couplings.get(axis);
        if g != 0.0 {
            let term = embed_pair(Some(&so[axis.index()]), Some(&jo[axis.index()]), dims)?;
            h = h.add(&term.scaled(g))?;
        }
    }
    Ok(h)
}

/// `Ω (I ⊗ J_z) + Ω' (S_z ⊗ I)`.
pub fn build_dc_drive(config: &DriveConfig, s: SpinSpace, j: SpinSpace) -> Result<Operator> {
    let dims = config.check_spaces(s, j)?;
    let sz = collective_operator(s, Component::Z);
    let jz = collective_operator(j, Component::Z);
    let on_j = embed_pair(None, Some(&jz), dims)?.scaled(config.omega);
    let on_s = embed_pair(Some(&sz), None, dims)?.scaled(config.omega_prime);
    on_j.add(&on_s)
}

/// Full static part: interaction plus DC drive.
pub fn build_static_hamiltonian(config: &DriveConfig, s: SpinSpace, j: SpinSpace) -> Result<Operator> {
    build_interaction(config, s, j)?.add(&build_dc_drive(config, s, j)?)
}

/// Oscillating field `A cos(ωt) S_axis` acting on the S factor.
#[derive(Clone, Debug)]
pub struct AcDrive {
    pub amplitude: f64,
    pub frequency: f64,
    pub axis: Axis,
    /// `S_axis ⊗ I` (or `S_axis` for single-subsystem models).
    pub operator: Operator,
}

impl AcDrive {
    pub fn coefficient(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t).cos()
    }

    /// The drive term evaluated at time `t`.
    pub fn at(&self, t: f64) -> Operator {
        self.operator.scaled(self.coefficient(t))
    }
}

/// AC drive on the joint space as configured.
pub fn build_ac_drive(config: &DriveConfig, s: SpinSpace, j: SpinSpace) -> Result<AcDrive> {
    config.validate()?;
    let dims = config.check_spaces(s, j)?;
    let op = collective_operator(s, config.ac_axis.into());
    Ok(AcDrive {
        amplitude: config.ac_amplitude,
        frequency: config.ac_frequency,
        axis: config.ac_axis,
        operator: embed_pair(Some(&op), None, dims)?,
    })
}

fn drive_denominator(omega: f64, omega_prime: f64) -> Result<f64> {
    let d = omega * omega - omega_prime * omega_prime;
    if d == 0.0 || omega.abs() == omega_prime.abs() {
        return Err(Error::SingularDrive {
            omega,
            omega_prime,
        });
    }
    Ok(d)
}

/// Generator coefficients `(θ_xy, θ_yx)` that cancel the first-order exchange terms.
pub fn fnt_coefficients(config: &DriveConfig) -> Result<(f64, f64)> {
    let Couplings { gx, gy, .. } = config.couplings;
    let (w, wp) = (config.omega, config.omega_prime);
    let d = drive_denominator(w, wp)?;
    Ok(((gx * w + gy * wp) / d, -(gy * w + gx * wp) / d))
}

/// Coefficient `f` of the residual linear term `f S_z`.
pub fn linear_coefficient(config: &DriveConfig) -> Result<f64> {
    let Couplings { gx, gy, gz } = config.couplings;
    let (w, wp) = (config.omega, config.omega_prime);
    let nj = config.n_j as f64;
    let d = drive_denominator(w, wp)?;
    Ok(wp + 0.5 * gz * nj - nj * ((gx * gx + gy * gy) * wp + 2.0 * gx * gy * w) / (8.0 * d))
}

/// Everything derived from a drive configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveParams {
    pub theta_xy: f64,
    pub theta_yx: f64,
    pub f: f64,
    pub p: f64,
    pub q: f64,
    /// Strength of the equivalent one-axis twist `chi S_axis^2`.
    pub chi_eff: f64,
    /// Twisting axis when `f S_z + p S_x^2 + q S_y^2` reduces to pure OAT (up to the linear term).
    pub oat_axis: Option<Axis>,
    /// `Δ = 2(Ω - Ω')/N_j`.
    pub delta: f64,
    pub validity_s: f64,
    pub validity_j: f64,
    /// `ω / (N_s (p + q))`; `None` without an AC field or when `p + q = 0`.
    pub rwa_ratio: Option<f64>,
}

pub fn effective_params(config: &DriveConfig) -> Result<EffectiveParams> {
    let (theta_xy, theta_yx) = fnt_coefficients(config)?;
    let f = linear_coefficient(config)?;
    let c = config.couplings;
    let (w, wp) = (config.omega, config.omega_prime);
    let nj = config.n_j as f64;
    let ns = config.n_s as f64;
    let d = drive_denominator(w, wp)?;
    let p = nj * (c.gx * c.gx * w + c.gx * c.gy * wp) / (4.0 * d);
    let q = nj * (c.gy * c.gy * w + c.gx * c.gy * wp) / (4.0 * d);
    let (chi_eff, oat_axis) = if c.gx == c.gy {
        // p = q: S_x^2 + S_y^2 = S^2 - S_z^2
        (-c.gx * c.gx * nj / (4.0 * (w - wp)), Some(Axis::Z))
    } else if c.gy == 0.0 {
        (p, Some(Axis::X))
    } else if c.gx == 0.0 {
        (q, Some(Axis::Y))
    } else {
        (-(p + q) / 2.0, None)
    };
    let g = c.reference_rate();
    let gap = (w - wp).abs();
    let rwa_ratio = (config.ac_amplitude > 0.0 && p + q != 0.0)
        .then(|| config.ac_frequency / (ns * (p + q)));
    Ok(EffectiveParams {
        theta_xy,
        theta_yx,
        f,
        p,
        q,
        chi_eff,
        oat_axis,
        delta: 2.0 * (w - wp) / nj,
        validity_s: g * ns / gap,
        validity_j: g * nj / gap,
        rwa_ratio,
    })
}

/// Ω' that cancels the linear term for the configured Ω, by bisection on `[-|Ω|/2, |Ω|/2]`.
pub fn solve_omega_prime(config: &DriveConfig) -> Result<f64> {
    let w = config.omega;
    if w == 0.0 || !w.is_finite() {
        return Err(Error::InvalidArgument(format!("Ω must be finite and non-zero, got {w}")));
    }
    let half = 0.5 * w.abs();
    let mut trial = *config;
    bisect(
        |wp| {
            trial.omega_prime = wp;
            linear_coefficient(&trial)
        },
        -half,
        half,
        1e-12 * w.abs(),
        "linear coefficient f(Ω') = 0",
    )
}

/// Finds `(Ω, Ω')` with `f = 0` and `2(Ω - Ω')/N_j = delta`.
pub fn omega_for_delta(couplings: Couplings, n_s: usize, n_j: usize, delta: f64) -> Result<(f64, f64)> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("Δ must be positive, got {delta}")));
    }
    let gap = 0.5 * delta * n_j as f64;
    let mut cfg = DriveConfig::dc(couplings, gap, 0.0, n_s, n_j);
    let mut omega_prime = 0.0;
    for _ in 0..200 {
        cfg.omega = gap + omega_prime;
        let next = solve_omega_prime(&cfg)?;
        let converged = (next - omega_prime).abs() <= 1e-14 * gap;
        omega_prime = next;
        if converged {
            break;
        }
    }
    cfg.omega = gap + omega_prime;
    let omega_prime = solve_omega_prime(&cfg)?;
    Ok((cfg.omega, omega_prime))
}

fn squared(space: SpinSpace, axis: Axis) -> Operator {
    let a = collective_operator(space, axis.into());
    let mut sq = a.matmul(&a).expect("same space");
    // S_a^2 is Hermitian
    sq = Operator::from_dense(sq.to_dense(), true);
    sq
}

/// `chi S_axis^2`.
pub fn build_effective_oat(chi: f64, space: SpinSpace, axis: Axis) -> Operator {
    squared(space, axis).scaled(chi)
}

/// `coefficient (S_plus^2 - S_minus^2)`.
pub fn build_twist(coefficient: f64, plus: Axis, minus: Axis, space: SpinSpace) -> Operator {
    squared(space, plus)
        .sub(&squared(space, minus))
        .expect("same space")
        .scaled(coefficient)
}

/// `(chi/3)(S_x^2 - S_y^2)`.
pub fn build_effective_tat(chi: f64, space: SpinSpace) -> Operator {
    build_twist(chi / 3.0, Axis::X, Axis::Y, space)
}

/// `f S_z + p S_x^2 + q S_y^2` on the S subsystem.
pub fn build_effective_fpq(f: f64, p: f64, q: f64, space: SpinSpace) -> Operator {
    collective_operator(space, Component::Z)
        .scaled(f)
        .add(&squared(space, Axis::X).scaled(p))
        .and_then(|h| h.add(&squared(space, Axis::Y).scaled(q)))
        .expect("same space")
}

/// Time average of `f S_z + p S_x^2 + q S_y^2` in the frame of an AC field along
/// `drive_axis` with `2A/ω = x`: components transverse to the drive axis pick up
/// `J0(x/2)` (linear) and `(1 ± J0(x))/2` (quadratic) weights.
pub fn build_rwa_effective(
    f: f64,
    p: f64,
    q: f64,
    drive_axis: Axis,
    x: f64,
    space: SpinSpace,
) -> Result<Operator> {
    let j_full = bessel_j0(x)?;
    let j_half = bessel_j0(0.5 * x)?;
    let keep = 0.5 * (1.0 + j_full);
    let swap = 0.5 * (1.0 - j_full);
    // coefficients of S_x^2, S_y^2, S_z^2 and of S_z
    let (cx, cy, cz, lin) = match drive_axis {
        Axis::Z => (keep * p + swap * q, keep * q + swap * p, 0.0, f),
        Axis::Y => (keep * p, q, swap * p, f * j_half),
        Axis::X => (p, keep * q, swap * q, f * j_half),
    };
    let mut h = collective_operator(space, Component::Z).scaled(lin);
    for (axis, c) in [(Axis::X, cx), (Axis::Y, cy), (Axis::Z, cz)] {
        if c != 0.0 {
            h = h.add(&squared(space, axis).scaled(c))?;
        }
    }
    Ok(h)
}

/// One resolved two-axis twisting form `coefficient (S_plus^2 - S_minus^2)`,
/// reached when `J0(2A/ω) = bessel_target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TatForm {
    pub bessel_target: f64,
    pub coefficient: f64,
    pub plus: Axis,
    pub minus: Axis,
}

impl TatForm {
    /// Unstable fixed point of the twist, where a coherent state squeezes fastest.
    pub fn saddle_axis(&self) -> Axis {
        self.plus.third(self.minus)
    }

    pub fn operator(&self, space: SpinSpace) -> Operator {
        build_twist(self.coefficient, self.plus, self.minus, space)
    }
}

/// AC drive axis plus the two sign choices for the Bessel condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TatBranch {
    pub drive_axis: Axis,
    pub forms: [TatForm; 2],
}

impl TatBranch {
    /// First form whose Bessel target lies on the first arch of `J0`,
    /// with the matching `2A/ω`.
    pub fn resolve(&self) -> Result<(TatForm, f64)> {
        let mut last = None;
        for form in self.forms {
            match solve_bessel_ratio(form.bessel_target) {
                Ok(x) => return Ok((form, x)),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("two forms"))
    }
}

fn z_branch(p: f64, q: f64) -> TatBranch {
    let t = (p + q) / (3.0 * (q - p));
    let c = (p + q) / 3.0;
    TatBranch {
        drive_axis: Axis::Z,
        forms: [
            TatForm { bessel_target: t, coefficient: c, plus: Axis::Y, minus: Axis::Z },
            TatForm { bessel_target: -t, coefficient: c, plus: Axis::X, minus: Axis::Z },
        ],
    }
}

fn y_branch(p: f64, q: f64) -> TatBranch {
    let t = (p - 2.0 * q) / (3.0 * p);
    let c = (p - 2.0 * q) / 3.0;
    TatBranch {
        drive_axis: Axis::Y,
        forms: [
            TatForm { bessel_target: t, coefficient: c, plus: Axis::X, minus: Axis::Y },
            TatForm { bessel_target: -t, coefficient: c, plus: Axis::Z, minus: Axis::Y },
        ],
    }
}

/// Chooses the AC axis that turns `p S_x^2 + q S_y^2` into a two-axis twist.
pub fn tat_branch_select(p: f64, q: f64) -> Result<TatBranch> {
    if p == 0.0 && q == 0.0 {
        return Err(Error::InvalidArgument("p and q both vanish; nothing to twist".into()));
    }
    if (p - 2.0 * q) * (2.0 * p - q) >= 0.0 && p != q {
        Ok(z_branch(p, q))
    } else {
        Ok(y_branch(p, q))
    }
}

/// Like [`tat_branch_select`] but honoring a requested drive axis where it is defined.
/// A z-axis request with `p = q` falls back to the y-axis branch.
pub fn tat_branch_for_axis(p: f64, q: f64, axis: Axis) -> Result<TatBranch> {
    if p == 0.0 && q == 0.0 {
        return Err(Error::InvalidArgument("p and q both vanish; nothing to twist".into()));
    }
    match axis {
        Axis::Z if p != q => Ok(z_branch(p, q)),
        Axis::Z | Axis::Y if p != 0.0 => Ok(y_branch(p, q)),
        Axis::Y | Axis::Z => Ok(z_branch(p, q)),
        Axis::X => Err(Error::InvalidArgument("AC drive axis must be y or z".into())),
    }
}
