//! Rotating-frame two-electron Hamiltonian, its canonical flow and the
//! zero-velocity surface (ZVS).
//!
//! Coordinates are scaled units in the frame co-rotating with the circularly
//! polarized field; the field points along `+x`, the magnetic field along `z`.
//! For a single electron
//!
//! ```text
//! H_i = p²/2 - Z/r - c (x p_y - y p_x) + (x² + y²)/8 + ε x,   c = ω + s/2
//! ```
//!
//! and `H = H_1 + H_2 + 1/r₁₂`. Eliminating momenta in favour of velocities
//! (`ẋ = p_x + c y`, `ẏ = p_y - c x`) gives `H = v²/2 + ZVS` with
//!
//! ```text
//! ZVS = Σ_i [-Z/r_i + ε x_i - k (x_i² + y_i²)] + 1/r₁₂,   k = (ω² + sω)/2.
//! ```
//!
//! Flat vectors use the layout `[x1, y1, (z1), x2, y2, (z2)]`; phase vectors
//! put the momenta first, `[p1, p2, q1, q2]`, matching the block order of
//! the linearization matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{Dims, FieldParams};

pub type Vec3 = [f64; 3];

/// Electron positions. In two dimensions the `z` entries are zero and ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub dims: Dims,
    pub positions: [Vec3; 2],
}

fn norm(v: &Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

impl Configuration {
    pub fn new(dims: Dims, mut positions: [Vec3; 2]) -> Self {
        if dims == Dims::Two {
            positions[0][2] = 0.0;
            positions[1][2] = 0.0;
        }
        Self { dims, positions }
    }

    pub fn from_slice(dims: Dims, q: &[f64]) -> Self {
        let n = dims.count();
        assert_eq!(q.len(), 2 * n, "coordinate vector length");
        let mut positions = [[0.0; 3]; 2];
        for (e, pos) in positions.iter_mut().enumerate() {
            pos[..n].copy_from_slice(&q[e * n..(e + 1) * n]);
        }
        Self { dims, positions }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let n = self.dims.count();
        self.positions.iter().flat_map(|p| p[..n].iter().copied()).collect()
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_vec(self.to_vec())
    }

    pub fn radius(&self, electron: usize) -> f64 {
        norm(&self.positions[electron])
    }

    pub fn separation(&self) -> f64 {
        norm(&sub(&self.positions[0], &self.positions[1]))
    }

    /// Electrons 1 and 2 exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            dims: self.dims,
            positions: [self.positions[1], self.positions[0]],
        }
    }

    /// Smallest of `r_1`, `r_2`, `r_12`.
    pub fn min_distance(&self) -> f64 {
        self.radius(0).min(self.radius(1)).min(self.separation())
    }

    pub fn check(&self) -> Result<()> {
        let (r1, r2, r12) = (self.radius(0), self.radius(1), self.separation());
        let ok = |r: f64| r.is_finite() && r > 0.0;
        if ok(r1) && ok(r2) && ok(r12) {
            Ok(())
        } else {
            Err(Error::SingularConfiguration(format!(
                "r1 = {r1:e}, r2 = {r2:e}, r12 = {r12:e}"
            )))
        }
    }
}

/// Configuration plus canonical momenta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub config: Configuration,
    pub momenta: [Vec3; 2],
}

impl PhaseState {
    pub fn new(config: Configuration, mut momenta: [Vec3; 2]) -> Self {
        if config.dims == Dims::Two {
            momenta[0][2] = 0.0;
            momenta[1][2] = 0.0;
        }
        Self { config, momenta }
    }

    /// State at rest in the rotating frame.
    pub fn at_rest(config: Configuration, params: &FieldParams) -> Self {
        Self::new(config, zero_velocity_momenta(&config, params))
    }

    pub fn dims(&self) -> Dims {
        self.config.dims
    }

    /// `[p1, p2, q1, q2]`.
    pub fn to_phase_vec(&self) -> Vec<f64> {
        let n = self.dims().count();
        let mut v = Vec::with_capacity(4 * n);
        for p in &self.momenta {
            v.extend_from_slice(&p[..n]);
        }
        for q in &self.config.positions {
            v.extend_from_slice(&q[..n]);
        }
        v
    }

    pub fn from_phase_slice(dims: Dims, z: &[f64]) -> Self {
        let n = dims.count();
        assert_eq!(z.len(), 4 * n, "phase vector length");
        let mut momenta = [[0.0; 3]; 2];
        for (e, p) in momenta.iter_mut().enumerate() {
            p[..n].copy_from_slice(&z[e * n..(e + 1) * n]);
        }
        Self {
            config: Configuration::from_slice(dims, &z[2 * n..]),
            momenta,
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            config: self.config.swapped(),
            momenta: [self.momenta[1], self.momenta[0]],
        }
    }

    /// Rotating-frame velocities `ẋ = p_x + c y`, `ẏ = p_y - c x`, `ż = p_z`.
    pub fn velocities(&self, params: &FieldParams) -> [Vec3; 2] {
        let c = params.angular_coefficient();
        let mut v = [[0.0; 3]; 2];
        for e in 0..2 {
            let q = &self.config.positions[e];
            let p = &self.momenta[e];
            v[e] = [p[0] + c * q[1], p[1] - c * q[0], p[2]];
        }
        v
    }
}

/// Time derivative of a [`PhaseState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateRate {
    /// `q̇ = ∂H/∂p`.
    pub velocity: [Vec3; 2],
    /// `ṗ = -∂H/∂q`.
    pub force: [Vec3; 2],
}

impl StateRate {
    pub fn max_abs(&self) -> f64 {
        self.velocity
            .iter()
            .chain(self.force.iter())
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Momenta for which every rotating-frame velocity vanishes.
pub fn zero_velocity_momenta(config: &Configuration, params: &FieldParams) -> [Vec3; 2] {
    let c = params.angular_coefficient();
    let mut p = [[0.0; 3]; 2];
    for (e, q) in config.positions.iter().enumerate() {
        p[e] = [-c * q[1], c * q[0], 0.0];
    }
    p
}

/// Total rotating-frame energy.
pub fn hamiltonian(state: &PhaseState, params: &FieldParams) -> Result<f64> {
    state.config.check()?;
    let c = params.angular_coefficient();
    let z = params.charge;
    let mut h = 0.0;
    for (q, p) in state.config.positions.iter().zip(&state.momenta) {
        let kinetic = 0.5 * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
        let lz = q[0] * p[1] - q[1] * p[0];
        let rho2 = q[0] * q[0] + q[1] * q[1];
        h += kinetic - z / norm(q) - c * lz + rho2 / 8.0 + params.epsilon * q[0];
    }
    Ok(h + 1.0 / state.config.separation())
}

/// Canonical equations `(∂H/∂p, -∂H/∂q)`.
pub fn equations_of_motion(state: &PhaseState, params: &FieldParams) -> Result<StateRate> {
    state.config.check()?;
    let n = state.dims().count();
    let z = state.to_phase_vec();
    let mut dz = vec![0.0; 4 * n];
    flow_rhs(params, state.dims(), &z, &mut dz);
    let rate = PhaseState::from_phase_slice(state.dims(), &dz);
    Ok(StateRate {
        velocity: rate.config.positions,
        force: rate.momenta,
    })
}

/// Allocation-free right-hand side on a phase vector `[p1, p2, q1, q2]`.
/// No singularity checks.
pub fn flow_rhs(params: &FieldParams, dims: Dims, z: &[f64], dz: &mut [f64]) {
    let n = dims.count();
    let c = params.angular_coefficient();
    let charge = params.charge;
    let mut q = [[0.0; 3]; 2];
    let mut p = [[0.0; 3]; 2];
    for e in 0..2 {
        p[e][..n].copy_from_slice(&z[e * n..(e + 1) * n]);
        q[e][..n].copy_from_slice(&z[(2 + e) * n..(3 + e) * n]);
    }
    let d = sub(&q[0], &q[1]);
    let r12 = norm(&d);
    let rep = 1.0 / (r12 * r12 * r12);
    for e in 0..2 {
        let r = norm(&q[e]);
        let att = charge / (r * r * r);
        let sign = if e == 0 { 1.0 } else { -1.0 };
        // ∂H/∂q
        let dh = [
            att * q[e][0] + 0.25 * q[e][0] + params.epsilon - c * p[e][1] - sign * rep * d[0],
            att * q[e][1] + 0.25 * q[e][1] + c * p[e][0] - sign * rep * d[1],
            att * q[e][2] - sign * rep * d[2],
        ];
        let dq = [p[e][0] + c * q[e][1], p[e][1] - c * q[e][0], p[e][2]];
        for k in 0..n {
            dz[e * n + k] = -dh[k];
            dz[(2 + e) * n + k] = dq[k];
        }
    }
}

/// Zero-velocity surface.
pub fn zvs(config: &Configuration, params: &FieldParams) -> Result<f64> {
    config.check()?;
    let k = params.zvs_transverse();
    let mut v = 0.0;
    for q in &config.positions {
        v += -params.charge / norm(q) + params.epsilon * q[0] - k * (q[0] * q[0] + q[1] * q[1]);
    }
    Ok(v + 1.0 / config.separation())
}

/// Analytic gradient of [`zvs`] in the flat coordinate layout.
pub fn zvs_gradient(config: &Configuration, params: &FieldParams) -> Result<DVector<f64>> {
    config.check()?;
    let n = config.dims.count();
    let k = params.zvs_transverse();
    let q = &config.positions;
    let d = sub(&q[0], &q[1]);
    let r12 = norm(&d);
    let rep = 1.0 / (r12 * r12 * r12);
    let mut g = DVector::zeros(2 * n);
    for e in 0..2 {
        let r = norm(&q[e]);
        let att = params.charge / (r * r * r);
        let sign = if e == 0 { 1.0 } else { -1.0 };
        let ge = [
            att * q[e][0] + params.epsilon - 2.0 * k * q[e][0] - sign * rep * d[0],
            att * q[e][1] - 2.0 * k * q[e][1] - sign * rep * d[1],
            att * q[e][2] - sign * rep * d[2],
        ];
        for i in 0..n {
            g[e * n + i] = ge[i];
        }
    }
    Ok(g)
}

/// Hessian of `-a/|v|` with respect to `v`: `a (I/|v|³ - 3 v vᵀ/|v|⁵)`.
fn coulomb_hessian(v: &Vec3, a: f64, n: usize) -> DMatrix<f64> {
    let r = norm(v);
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        a * (delta / r3 - 3.0 * (v[i] * v[j]) / r5)
    })
}

/// Hessian of everything in the ZVS except the transverse quadratic term.
fn coulomb_block_hessian(config: &Configuration, charge: f64) -> DMatrix<f64> {
    let n = config.dims.count();
    let q = &config.positions;
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    for e in 0..2 {
        let mut block = h.view_mut((e * n, e * n), (n, n));
        block += coulomb_hessian(&q[e], charge, n);
    }
    // +1/r12 is -(-1)/r12
    let rep = coulomb_hessian(&sub(&q[0], &q[1]), -1.0, n);
    for (i, j, sign) in [(0, 0, 1.0), (n, n, 1.0), (0, n, -1.0), (n, 0, -1.0)] {
        let mut block = h.view_mut((i, j), (n, n));
        block += &rep * sign;
    }
    h
}

fn add_transverse(h: &mut DMatrix<f64>, dims: Dims, coefficient: f64) {
    let n = dims.count();
    for e in 0..2 {
        h[(e * n, e * n)] += coefficient;
        h[(e * n + 1, e * n + 1)] += coefficient;
    }
}

/// Analytic Hessian of [`zvs`].
pub fn zvs_hessian(config: &Configuration, params: &FieldParams) -> Result<DMatrix<f64>> {
    config.check()?;
    let mut h = coulomb_block_hessian(config, params.charge);
    add_transverse(&mut h, config.dims, -2.0 * params.zvs_transverse());
    Ok(h)
}

/// `∂²H/∂q∂q` at fixed momenta: the Hessian of the bare potential
/// `Σ[-Z/r + ρ²/8 + εx] + 1/r₁₂`. It differs from [`zvs_hessian`] by `c²` on
/// the transverse diagonal.
pub fn potential_hessian(config: &Configuration, params: &FieldParams) -> Result<DMatrix<f64>> {
    config.check()?;
    let mut h = coulomb_block_hessian(config, params.charge);
    add_transverse(&mut h, config.dims, 0.25);
    Ok(h)
}

/// Bare potential energy (the Hamiltonian at zero canonical momenta).
pub fn potential(config: &Configuration, params: &FieldParams) -> Result<f64> {
    hamiltonian(&PhaseState::new(*config, [[0.0; 3]; 2]), params)
}
