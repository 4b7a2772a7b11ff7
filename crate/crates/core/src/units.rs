//! Unit systems and field-parameter bookkeeping.
//!
//! Three unit systems are in play:
//!
//! * laboratory atomic units (Hartree), where the circularly polarized field
//!   has frequency `Ω`, amplitude `𝓔` and the magnetic field enters through
//!   the signed cyclotron frequency `Ω_c`;
//! * scaled units, in which `|Ω_c| = 1`: time unit `1/|Ω_c|`, length unit
//!   `|Ω_c|^(-2/3)`, energy unit `|Ω_c|^(2/3)`, field unit `|Ω_c|^(4/3)`;
//! * effective atomic units of a semiconductor quantum dot, built from the
//!   carrier effective mass and the host dielectric constant.
//!
//! # Sign convention
//!
//! The angular-momentum coefficient of the rotating-frame Hamiltonian is
//! `-(ω + s/2)` where `s` is the [`Branch`] sign. `s = +1` corresponds to a
//! cyclotron frequency of `-1` in scaled units (the Lorentz force opposes the
//! centrifugal force), `s = -1` to `+1` (co-centrifugal).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign choice of the paramagnetic term, `-(ω + s/2) L_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// `s = +1`, cyclotron frequency `-1` (anti-centrifugal Lorentz force).
    Plus,
    /// `s = -1`, cyclotron frequency `+1` (co-centrifugal Lorentz force).
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    /// Signed cyclotron frequency in scaled units.
    pub fn cyclotron_sign(self) -> f64 {
        -self.sign()
    }

    pub fn from_sign(sign: f64) -> Result<Self> {
        if sign == 1.0 {
            Ok(Branch::Plus)
        } else if sign == -1.0 {
            Ok(Branch::Minus)
        } else {
            Err(Error::InvalidInput(format!("branch must be +1 or -1, got {sign}")))
        }
    }

    /// Branch selected by the sign of a lab-frame cyclotron frequency.
    pub fn from_cyclotron(cyclotron_frequency: f64) -> Result<Self> {
        if cyclotron_frequency > 0.0 {
            Ok(Branch::Minus)
        } else if cyclotron_frequency < 0.0 {
            Ok(Branch::Plus)
        } else {
            Err(Error::InvalidInput("cyclotron frequency must be non-zero".into()))
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Branch::Plus => f.write_str("+1"),
            Branch::Minus => f.write_str("-1"),
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+1" | "1" | "+" | "plus" => Ok(Branch::Plus),
            "-1" | "-" | "minus" => Ok(Branch::Minus),
            other => Err(Error::Usage(format!("branch must be +1 or -1, got `{other}`"))),
        }
    }
}

/// Number of active spatial dimensions per electron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dims {
    Two,
    Three,
}

impl Dims {
    pub fn count(self) -> usize {
        match self {
            Dims::Two => 2,
            Dims::Three => 3,
        }
    }

    pub fn from_count(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Dims::Two),
            3 => Ok(Dims::Three),
            _ => Err(Error::InvalidInput(format!("dims must be 2 or 3, got {n}"))),
        }
    }
}

/// Dimensionless parameters of the rotating-frame Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    /// Scaled frequency of the circularly polarized field.
    pub omega: f64,
    /// Scaled field strength.
    pub epsilon: f64,
    pub branch: Branch,
    pub dims: Dims,
    /// Nuclear charge `Z` (2 for helium).
    pub charge: f64,
}

impl FieldParams {
    /// Helium (`Z = 2`) in three dimensions.
    pub fn helium(omega: f64, epsilon: f64, branch: Branch) -> Self {
        Self {
            omega,
            epsilon,
            branch,
            dims: Dims::Three,
            charge: 2.0,
        }
    }

    pub fn with_dims(mut self, dims: Dims) -> Self {
        self.dims = dims;
        self
    }

    pub fn with_charge(mut self, charge: f64) -> Self {
        self.charge = charge;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidInput(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidInput("epsilon must be finite".into()));
        }
        if !(self.charge.is_finite() && self.charge > 0.0) {
            return Err(Error::InvalidInput(format!(
                "charge must be positive, got {}",
                self.charge
            )));
        }
        Ok(())
    }

    /// Coefficient `ω + s/2` of the paramagnetic term.
    pub fn angular_coefficient(&self) -> f64 {
        self.omega + 0.5 * self.branch.sign()
    }

    /// `(ω² + sω)/2`, the strength of the repulsive transverse term of the
    /// zero-velocity surface, `-k (x² + y²)`.
    pub fn zvs_transverse(&self) -> f64 {
        0.5 * (self.omega * self.omega + self.branch.sign() * self.omega)
    }
}

/// Field parameters in laboratory atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabParams {
    /// `Ω`, a.u.
    pub cp_frequency: f64,
    /// `𝓔`, a.u.
    pub cp_strength: f64,
    /// `Ω_c`, a.u., signed.
    pub cyclotron_frequency: f64,
}

impl LabParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cp_frequency.is_finite() && self.cp_frequency > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cp_frequency must be positive, got {}",
                self.cp_frequency
            )));
        }
        if !self.cp_strength.is_finite() {
            return Err(Error::InvalidInput("cp_strength must be finite".into()));
        }
        if self.cyclotron_frequency == 0.0 || !self.cyclotron_frequency.is_finite() {
            return Err(Error::InvalidInput("cyclotron frequency must be non-zero".into()));
        }
        Ok(())
    }
}

/// Size of the scaled units expressed in atomic units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitScale {
    pub time: f64,
    pub length: f64,
    pub momentum: f64,
    pub energy: f64,
    pub field: f64,
}

impl UnitScale {
    pub fn for_cyclotron(cyclotron_frequency: f64) -> Self {
        let wc = cyclotron_frequency.abs();
        Self {
            time: 1.0 / wc,
            length: wc.powf(-2.0 / 3.0),
            momentum: wc.powf(1.0 / 3.0),
            energy: wc.powf(2.0 / 3.0),
            field: wc.powf(4.0 / 3.0),
        }
    }
}

/// Result of [`to_scaled`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaled {
    pub params: FieldParams,
    pub units: UnitScale,
}

/// Converts lab-frame atomic-unit parameters to scaled units.
///
/// The returned parameters describe helium in three dimensions; adjust
/// `dims`/`charge` with the builder methods on [`FieldParams`].
pub fn to_scaled(lab: &LabParams) -> Result<Scaled> {
    lab.validate()?;
    let branch = Branch::from_cyclotron(lab.cyclotron_frequency)?;
    let units = UnitScale::for_cyclotron(lab.cyclotron_frequency);
    let params = FieldParams::helium(lab.cp_frequency * units.time, lab.cp_strength / units.field, branch);
    Ok(Scaled { params, units })
}

/// Inverse of [`to_scaled`] for a given signed cyclotron frequency.
pub fn from_scaled(params: &FieldParams, cyclotron_frequency: f64) -> Result<LabParams> {
    params.validate()?;
    let branch = Branch::from_cyclotron(cyclotron_frequency)?;
    if branch != params.branch {
        return Err(Error::InvalidInput(format!(
            "cyclotron frequency {cyclotron_frequency} is inconsistent with branch {}",
            params.branch
        )));
    }
    let units = UnitScale::for_cyclotron(cyclotron_frequency);
    Ok(LabParams {
        cp_frequency: params.omega / units.time,
        cp_strength: params.epsilon * units.field,
        cyclotron_frequency,
    })
}

/// Rotating-frame Hamiltonian written directly in laboratory atomic units,
/// before any rescaling. `positions` and `momenta` are atomic-unit vectors of
/// the two electrons.
///
/// `H = Σ [p²/2 - Z/r - (Ω - Ω_c/2) L_z + Ω_c² ρ²/8 + 𝓔 x] + 1/r₁₂`
pub fn lab_hamiltonian(positions: &[[f64; 3]; 2], momenta: &[[f64; 3]; 2], lab: &LabParams, charge: f64) -> f64 {
    let wc = lab.cyclotron_frequency;
    let mut h = 0.0;
    for (r, p) in positions.iter().zip(momenta) {
        let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let lz = r[0] * p[1] - r[1] * p[0];
        let rho2 = r[0] * r[0] + r[1] * r[1];
        h += 0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - charge / rn - (lab.cp_frequency - 0.5 * wc) * lz
            + wc * wc * rho2 / 8.0
            + lab.cp_strength * r[0];
    }
    let d = [
        positions[0][0] - positions[1][0],
        positions[0][1] - positions[1][1],
        positions[0][2] - positions[1][2],
    ];
    h + 1.0 / (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

pub mod si {
    //! CODATA 2018 constants.
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
    pub const HARTREE: f64 = 4.359_744_722_207_1e-18;
}

/// Quantum-dot description, SI-flavoured units as named on each field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotParams {
    /// Tesla.
    pub b_field: f64,
    /// Ratio to the free electron mass.
    pub effective_mass: f64,
    pub dielectric_constant: f64,
    /// Oscillator length of the parabolic confinement, nm.
    pub confinement_radius: f64,
    /// Impurity charge in units of `e`.
    pub impurity_charge: f64,
    /// Distance of the impurity from the dot centre, nm.
    pub impurity_displacement: f64,
}

impl DotParams {
    /// Parameters of the 100 nm dot example, with the material constants left
    /// to the caller.
    pub fn example(effective_mass: f64, dielectric_constant: f64) -> Self {
        Self {
            b_field: 5.0,
            effective_mass,
            dielectric_constant,
            confinement_radius: 100.0,
            impurity_charge: 0.008,
            impurity_displacement: 98.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("b_field", self.b_field),
            ("effective_mass", self.effective_mass),
            ("dielectric_constant", self.dielectric_constant),
            ("confinement_radius", self.confinement_radius),
            ("impurity_charge", self.impurity_charge),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self.impurity_displacement == 0.0 {
            return Err(Error::InvalidInput(
                "impurity displacement is zero: no effective field direction".into(),
            ));
        }
        if !(self.impurity_displacement.is_finite() && self.impurity_displacement > 0.0) {
            return Err(Error::InvalidInput(format!(
                "impurity_displacement must be positive, got {}",
                self.impurity_displacement
            )));
        }
        Ok(())
    }
}

/// Effective atomic units of a host material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveUnits {
    /// Effective Bohr radius, m.
    pub length: f64,
    /// Effective Hartree, J.
    pub energy: f64,
    /// s.
    pub time: f64,
    /// V/m.
    pub field: f64,
}

impl EffectiveUnits {
    pub fn new(effective_mass: f64, dielectric_constant: f64) -> Self {
        let length = si::BOHR_RADIUS * dielectric_constant / effective_mass;
        let energy = si::HARTREE * effective_mass / (dielectric_constant * dielectric_constant);
        Self {
            length,
            energy,
            time: si::HBAR / energy,
            field: energy / (si::ELEMENTARY_CHARGE * length),
        }
    }
}

/// Intermediate quantities of the quantum-dot mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotReport {
    pub units: EffectiveUnits,
    /// Cyclotron frequency `eB/m*`, effective units.
    pub cyclotron: f64,
    /// Parabolic confinement frequency, effective units.
    pub confinement: f64,
    /// `sqrt(ω_c² + 4ω₀²)`, playing the role of the cyclotron frequency of
    /// the mapped Hamiltonian, effective units.
    pub effective_cyclotron: f64,
    /// Uniform field produced by the off-centre confinement, effective units.
    pub field: f64,
    /// Frequency of the frame in which the mapped Hamiltonian takes the
    /// rotating-frame form, effective units.
    pub rotation: f64,
    pub field_kv_per_m: f64,
    pub frequency_ghz: f64,
    /// Scaled length unit in nm, for converting equilibrium radii back.
    pub scaled_length_nm: f64,
}

impl fmt::Display for DotReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "effective Bohr radius   {:.4} nm", self.units.length * 1e9)?;
        writeln!(
            f,
            "effective Hartree       {:.4} meV",
            self.units.energy / si::ELEMENTARY_CHARGE * 1e3
        )?;
        writeln!(f, "cyclotron frequency     {:.6e} (eff. a.u.)", self.cyclotron)?;
        writeln!(f, "confinement frequency   {:.6e} (eff. a.u.)", self.confinement)?;
        writeln!(f, "effective field         {:.4} kV/m", self.field_kv_per_m)?;
        write!(f, "rotation frequency      {:.4} GHz", self.frequency_ghz)
    }
}

/// Maps a quantum dot with an off-centre impurity onto the rotating-frame
/// Hamiltonian.
///
/// The impurity plays the nucleus (charge `Z_eff`). The parabolic
/// confinement `ω₀²|r - R|²/2` centred a distance `d` away splits exactly
/// into `ω₀²ρ²/2` about the impurity plus a uniform field `ω₀² d` along the
/// displacement. Together with the magnetic field the transverse quadratic
/// coefficient is `Ω_eff²/8` with `Ω_eff = sqrt(ω_c² + 4ω₀²)`, and the
/// paramagnetic term `(ω_c/2) L_z` matches `-(Ω - Ω_eff/2) L_z` for
/// `Ω = (Ω_eff - ω_c)/2` on the co-centrifugal branch. The confinement
/// frequency follows from the oscillator length, `ω₀ = ħ/(m* R²)`.
pub fn dot_effective_units(dot: &DotParams) -> Result<(FieldParams, DotReport)> {
    dot.validate()?;
    let units = EffectiveUnits::new(dot.effective_mass, dot.dielectric_constant);
    let mass = dot.effective_mass * si::ELECTRON_MASS;
    let cyclotron = si::ELEMENTARY_CHARGE * dot.b_field / mass * units.time;
    let radius = dot.confinement_radius * 1e-9 / units.length;
    let confinement = 1.0 / (radius * radius);
    let displacement = dot.impurity_displacement * 1e-9 / units.length;
    let field = confinement * confinement * displacement;
    let effective_cyclotron = (cyclotron * cyclotron + 4.0 * confinement * confinement).sqrt();
    let rotation = 0.5 * (effective_cyclotron - cyclotron);

    let lab = LabParams {
        cp_frequency: rotation,
        cp_strength: field,
        cyclotron_frequency: effective_cyclotron,
    };
    let scaled = to_scaled(&lab)?;
    let params = scaled.params.with_dims(Dims::Two).with_charge(dot.impurity_charge);
    let report = DotReport {
        units,
        cyclotron,
        confinement,
        effective_cyclotron,
        field,
        rotation,
        field_kv_per_m: field * units.field * 1e-3,
        frequency_ghz: rotation / units.time / (2.0 * std::f64::consts::PI) * 1e-9,
        scaled_length_nm: scaled.units.length * units.length * 1e9,
    };
    Ok((params, report))
}

/// Net in-plane force (N) on each electron at SI positions (m, impurity at
/// the origin, dot centre at `-d x̂`), computed from the unmapped dot
/// potential. Used to close the loop on [`dot_effective_units`].
pub fn dot_forces_si(dot: &DotParams, positions: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mass = dot.effective_mass * si::ELECTRON_MASS;
    let r0 = dot.confinement_radius * 1e-9;
    let w0 = si::HBAR / (mass * r0 * r0);
    let d = dot.impurity_displacement * 1e-9;
    let coulomb = si::ELEMENTARY_CHARGE * si::ELEMENTARY_CHARGE
        / (4.0 * std::f64::consts::PI * 8.854_187_812_8e-12 * dot.dielectric_constant);
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        let [x, y] = positions[i];
        let r = (x * x + y * y).sqrt();
        let [ox, oy] = positions[1 - i];
        let (dx, dy) = (x - ox, y - oy);
        let r12 = (dx * dx + dy * dy).sqrt();
        // confinement about (-d, 0), impurity attraction, mutual repulsion
        out[i][0] =
            -mass * w0 * w0 * (x + d) - dot.impurity_charge * coulomb * x / r.powi(3) + coulomb * dx / r12.powi(3);
        out[i][1] = -mass * w0 * w0 * y - dot.impurity_charge * coulomb * y / r.powi(3) + coulomb * dy / r12.powi(3);
    }
    out
}
