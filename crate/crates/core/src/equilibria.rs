//! Rotating-frame equilibria: extrema of the zero-velocity surface.
//!
//! Four geometries are constructed directly:
//!
//! * Type I (Langmuir): the nucleus and both electrons form an equilateral
//!   triangle of side `a`, electrons at `(-√3a/2, 0, ±a/2)`, with `a` a
//!   positive root of `k a³ + (ε/√3) a² - 1 = 0`, `k = (ω² + sω)/2`;
//! * Type II (transverse): both electrons on one circle in the plane of
//!   polarization, mirror images in the `x` axis;
//! * Type IIIa/IIIb (collinear): both electrons on the `x` axis, on the same
//!   side of the nucleus or on opposite sides.
//!
//! Any guess can be polished with [`refine`], a damped Newton iteration on
//! the ZVS gradient.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Configuration, PhaseState, Vec3};
use crate::units::{Dims, FieldParams};

/// Gradient max-norm accepted as an equilibrium.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Relative geometric tolerance used by [`classify_geometry`].
pub const GEOMETRY_TOLERANCE: f64 = 1e-8;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EquilibriumClass {
    /// Type I.
    Langmuir,
    /// Type II; `angle` is subtended at the nucleus, in `(0, π]`.
    Transverse {
        angle: f64,
    },
    /// Type IIIa, both electrons on one side of the nucleus.
    CollinearSameSide,
    /// Type IIIb.
    CollinearOpposite,
    Unclassified,
}

impl EquilibriumClass {
    pub fn label(&self) -> &'static str {
        match self {
            EquilibriumClass::Langmuir => "I",
            EquilibriumClass::Transverse { .. } => "II",
            EquilibriumClass::CollinearSameSide => "IIIa",
            EquilibriumClass::CollinearOpposite => "IIIb",
            EquilibriumClass::Unclassified => "unclassified",
        }
    }

    pub fn same_kind(&self, other: &EquilibriumClass) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

impl fmt::Display for EquilibriumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquilibriumClass::Transverse { angle } => write!(f, "II(angle={angle:.6})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub config: Configuration,
    /// Canonical momenta giving zero rotating-frame velocity.
    pub momenta: [Vec3; 2],
    pub class: EquilibriumClass,
    /// Triangle side for Type I.
    pub side_length: Option<f64>,
    /// Max-norm of the ZVS gradient.
    pub residual: f64,
    pub iterations: usize,
}

impl Equilibrium {
    fn from_config(config: Configuration, params: &FieldParams, iterations: usize) -> Result<Self> {
        let residual = model::zvs_gradient(&config, params)?.amax();
        let class = classify_geometry(&config);
        let side_length = match class {
            EquilibriumClass::Langmuir => Some((config.radius(0) + config.radius(1) + config.separation()) / 3.0),
            _ => None,
        };
        Ok(Self {
            config,
            momenta: model::zero_velocity_momenta(&config, params),
            class,
            side_length,
            residual,
            iterations,
        })
    }

    pub fn state(&self) -> PhaseState {
        PhaseState::new(self.config, self.momenta)
    }

    pub fn swapped(&self) -> Self {
        Self {
            config: self.config.swapped(),
            momenta: [self.momenta[1], self.momenta[0]],
            ..*self
        }
    }

    /// Characteristic size: the Langmuir side length, otherwise the larger
    /// electron–nucleus distance.
    pub fn size(&self) -> f64 {
        self.side_length
            .unwrap_or_else(|| self.config.radius(0).max(self.config.radius(1)))
    }
}

/// Geometric classification of a configuration.
pub fn classify_geometry(config: &Configuration) -> EquilibriumClass {
    let tol = GEOMETRY_TOLERANCE;
    let [q1, q2] = config.positions;
    let (r1, r2, r12) = (config.radius(0), config.radius(1), config.separation());
    let scale = r1.max(r2).max(r12);
    let planar = q1[2].abs() <= tol * scale && q2[2].abs() <= tol * scale;

    let mean = (r1 + r2 + r12) / 3.0;
    let equilateral = [r1, r2, r12].iter().all(|r| (r - mean).abs() <= tol * mean);
    if equilateral && !planar {
        return EquilibriumClass::Langmuir;
    }
    if !planar {
        return EquilibriumClass::Unclassified;
    }
    let cross = q1[0] * q2[1] - q1[1] * q2[0];
    let dot = q1[0] * q2[0] + q1[1] * q2[1];
    // collinear pairs off the field axis (antipodal at ε = 0) count as type II
    let on_axis = q1[1].abs() <= tol * scale && q2[1].abs() <= tol * scale;
    if on_axis && cross.abs() <= tol * r1 * r2 {
        return if dot > 0.0 {
            EquilibriumClass::CollinearSameSide
        } else {
            EquilibriumClass::CollinearOpposite
        };
    }
    if (r1 - r2).abs() <= tol * r1.max(r2) {
        let angle = (dot / (r1 * r2)).clamp(-1.0, 1.0).acos();
        return EquilibriumClass::Transverse { angle };
    }
    EquilibriumClass::Unclassified
}

/// Positive real roots of the Langmuir cubic, ascending.
///
/// Each root satisfies `|f(a)| < 1e-12 · max(|k a³|, |b a²|, 1)`. A tangent
/// double root is reported once.
pub fn langmuir_cubic(params: &FieldParams) -> Result<Vec<f64>> {
    params.validate()?;
    if params.charge != 2.0 {
        return Err(Error::InvalidInput(format!(
            "the equilateral configuration requires Z = 2, got {}",
            params.charge
        )));
    }
    let k = params.zvs_transverse();
    let b = params.epsilon / SQRT3;
    let f = |a: f64| (k * a + b) * a * a - 1.0;

    if k == 0.0 {
        return Ok(if b > 0.0 { vec![1.0 / b.sqrt()] } else { vec![] });
    }
    let turning = -2.0 * b / (3.0 * k);
    if k > 0.0 {
        // f(0) = -1, single crossing beyond the turning point
        let lo = turning.max(0.0);
        let hi = grow_until(lo.max(1.0), |a| f(a) > 0.0);
        return Ok(vec![bisect(f, lo, hi)]);
    }
    if b <= 0.0 {
        return Ok(vec![]);
    }
    let peak = f(turning);
    let scale = (k * turning.powi(3)).abs().max(1.0);
    if peak.abs() <= 1e-14 * scale {
        return Ok(vec![turning]);
    }
    if peak < 0.0 {
        return Ok(vec![]);
    }
    let hi = grow_until(2.0 * turning, |a| f(a) < 0.0);
    Ok(vec![bisect(f, 0.0, turning), bisect(f, turning, hi)])
}

/// Relative residual of the Langmuir cubic at `a`.
pub fn cubic_residual(params: &FieldParams, a: f64) -> f64 {
    let k = params.zvs_transverse();
    let b = params.epsilon / SQRT3;
    let f = k * a.powi(3) + b * a * a - 1.0;
    f.abs() / (k * a.powi(3)).abs().max((b * a * a).abs()).max(1.0)
}

fn grow_until(mut x: f64, done: impl Fn(f64) -> bool) -> f64 {
    while !done(x) {
        x *= 2.0;
    }
    x
}

/// Bisection to adjacent floats; `f(lo)` and `f(hi)` must differ in sign.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() < f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// Langmuir configuration for a root `a` of [`langmuir_cubic`].
pub fn langmuir_config(a: f64, params: &FieldParams) -> Result<Equilibrium> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidInput(format!("side length must be positive, got {a}")));
    }
    if params.dims != Dims::Three {
        return Err(Error::InvalidInput(
            "the Langmuir configuration needs three dimensions".into(),
        ));
    }
    let x0 = -0.5 * SQRT3 * a;
    let config = Configuration::new(Dims::Three, [[x0, 0.0, 0.5 * a], [x0, 0.0, -0.5 * a]]);
    let eq = Equilibrium::from_config(config, params, 0)?;
    if eq.residual > RESIDUAL_TOLERANCE {
        return Err(Error::NotEquilibrium {
            residual: eq.residual,
            tolerance: RESIDUAL_TOLERANCE,
        });
    }
    Ok(Equilibrium {
        side_length: Some(a),
        class: EquilibriumClass::Langmuir,
        ..eq
    })
}

/// All Langmuir equilibria for `params`, one per positive cubic root.
pub fn langmuir_equilibria(params: &FieldParams) -> Result<Vec<Equilibrium>> {
    langmuir_cubic(params)?
        .into_iter()
        .map(|a| langmuir_config(a, params))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: RESIDUAL_TOLERANCE,
            max_halvings: 30,
        }
    }
}

/// Damped Newton iteration on the ZVS gradient with default options.
pub fn refine(guess: &Configuration, params: &FieldParams) -> Result<Equilibrium> {
    refine_with(guess, params, &RefineOptions::default())
}

/// Newton steps use the pseudo-inverse of the Hessian, so the zero modes of
/// a continuous family of equilibria (the rotation circle at `ε = 0`) do not
/// stall the iteration. Each step is halved until the gradient norm drops.
pub fn refine_with(guess: &Configuration, params: &FieldParams, opts: &RefineOptions) -> Result<Equilibrium> {
    params.validate()?;
    guess.check()?;
    let dims = guess.dims;
    let mut q = guess.to_dvector();
    let mut grad = model::zvs_gradient(guess, params)?;
    let mut norm = grad.norm();

    for iteration in 0..=opts.max_iterations {
        if grad.amax() <= opts.tolerance {
            let config = Configuration::from_slice(dims, q.as_slice());
            return Equilibrium::from_config(config, params, iteration);
        }
        if iteration == opts.max_iterations {
            break;
        }
        let config = Configuration::from_slice(dims, q.as_slice());
        let hess = model::zvs_hessian(&config, params)?;
        let (step, min_sv, max_sv) = pseudo_solve(&hess, &grad);

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = &q - &step * scale;
            let trial_config = Configuration::from_slice(dims, trial.as_slice());
            if let Ok(g) = model::zvs_gradient(&trial_config, params) {
                let n = g.norm();
                if n.is_finite() && n < norm {
                    accepted = Some((trial, g, n));
                    break;
                }
            }
            scale *= 0.5;
        }
        match accepted {
            Some((trial, g, n)) => {
                q = trial;
                grad = g;
                norm = n;
            }
            None => {
                if min_sv <= 1e-12 * max_sv {
                    return Err(Error::RankDeficient {
                        min_singular: min_sv,
                        max_singular: max_sv,
                    });
                }
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual: grad.amax(),
                });
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: grad.amax(),
    })
}

/// Minimum-norm solution of `H x = g`, plus the extreme singular values.
fn pseudo_solve(hess: &DMatrix<f64>, grad: &DVector<f64>) -> (DVector<f64>, f64, f64) {
    let svd = hess.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    let eps = 1e-13 * max_sv;
    let step = svd.solve(grad, eps).unwrap_or_else(|_| DVector::zeros(grad.len()));
    (step, min_sv, max_sv)
}

/// Field strength and radius at which two electrons on one circle, `angle`
/// apart and mirror-symmetric about the `x` axis, are in equilibrium.
///
/// Requires `k > 0` and `sin³(angle/2) > 1/(4Z)`.
pub fn transverse_field_for_angle(
    omega: f64,
    branch: crate::units::Branch,
    charge: f64,
    angle: f64,
) -> Result<(f64, f64)> {
    let params = FieldParams::helium(omega, 0.0, branch).with_charge(charge);
    params.validate()?;
    if !(angle > 0.0 && angle <= PI) {
        return Err(Error::InvalidInput(format!("angle must lie in (0, π], got {angle}")));
    }
    let k = params.zvs_transverse();
    let s3 = (0.5 * angle).sin().powi(3);
    let numerator = charge - 1.0 / (4.0 * s3);
    if k <= 0.0 || numerator <= 0.0 {
        return Err(Error::NotFound(format!(
            "no transverse equilibrium with angle {angle} (k = {k}, Z - 1/(4 sin³) = {numerator})"
        )));
    }
    let r = (numerator / (2.0 * k)).cbrt();
    // electron 1 at polar angle π - angle/2
    let x = -r * (0.5 * angle).cos();
    let y = r * (0.5 * angle).sin();
    Ok((-x / (4.0 * y.powi(3)), r))
}

fn transverse_seed(params: &FieldParams, radius: f64, angle: f64) -> Configuration {
    let psi = PI - 0.5 * angle;
    let (s, c) = psi.sin_cos();
    Configuration::new(
        Dims::Two,
        [[radius * c, radius * s, 0.0], [radius * c, -radius * s, 0.0]],
    )
    .pipe(|cfg| if params.epsilon < 0.0 { mirror_x(&cfg) } else { cfg })
}

fn mirror_x(cfg: &Configuration) -> Configuration {
    let mut out = *cfg;
    for p in out.positions.iter_mut() {
        p[0] = -p[0];
    }
    out
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}
impl Pipe for Configuration {}

/// Type II equilibrium in two dimensions, seeded from `angle`.
///
/// With a field present the angle is fixed by the parameters; `angle` picks
/// the branch of solutions and the returned class carries the angle that
/// was actually reached. [`transverse_field_for_angle`] goes the other way.
pub fn type2_config(params: &FieldParams, angle: f64) -> Result<Equilibrium> {
    params.validate()?;
    if params.dims != Dims::Two {
        return Err(Error::InvalidInput("type II construction is two-dimensional".into()));
    }
    if !(angle > 0.0 && angle <= PI) {
        return Err(Error::InvalidInput(format!("angle must lie in (0, π], got {angle}")));
    }
    let k = params.zvs_transverse();
    let mut radii = Vec::new();
    if k > 0.0 {
        let s3 = (0.5 * angle).sin().powi(3);
        let numerator = params.charge - 1.0 / (4.0 * s3);
        if numerator > 0.0 {
            radii.push((numerator / (2.0 * k)).cbrt());
        }
    }
    for r in single_electron_roots(params) {
        radii.push(r.abs());
    }
    radii.extend([0.5, 1.0, 2.0, 4.0]);

    let mut tried = Vec::new();
    for &r in &radii {
        for scale in [1.0, 0.8, 1.25] {
            let seed = transverse_seed(params, r * scale, angle);
            tried.push(r * scale);
            if let Ok(eq) = refine(&seed, params) {
                if matches!(eq.class, EquilibriumClass::Transverse { .. }) {
                    return Ok(eq);
                }
            }
        }
    }
    Err(Error::NotFound(format!(
        "type II with angle hint {angle}: no convergent seed among radii {tried:?}"
    )))
}

/// Roots of the single-electron balance along the `x` axis,
/// `Z sgn(x)/x² + ε - 2k x = 0`, ascending.
pub fn single_electron_roots(params: &FieldParams) -> Vec<f64> {
    let k = params.zvs_transverse();
    let z = params.charge;
    let eps = params.epsilon;
    let h = |x: f64| z * x.signum() / (x * x) + eps - 2.0 * k * x;
    // log grid on each side
    let mut grid: Vec<f64> = (0..=400).map(|i| 10f64.powf(-4.0 + 10.0 * i as f64 / 400.0)).collect();
    grid.dedup();
    let mut roots = Vec::new();
    for side in [-1.0, 1.0] {
        for w in grid.windows(2) {
            let (a, b) = (side * w[0], side * w[1]);
            if h(a).signum() != h(b).signum() {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                roots.push(bisect(h, lo, hi));
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    roots
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CollinearVariant {
    /// Same side of the nucleus.
    A,
    /// Opposite sides.
    B,
}

/// All distinct Type III equilibria found from the single-electron seeds.
pub fn type3_all(params: &FieldParams, variant: CollinearVariant) -> Result<Vec<Equilibrium>> {
    params.validate()?;
    let singles = single_electron_roots(params);
    let mut seeds: Vec<(f64, f64)> = Vec::new();
    let spread = [0.5, 0.7, 0.9, 1.1, 1.4, 2.0];
    match variant {
        CollinearVariant::A => {
            for side in [-1.0, 1.0] {
                let mut on_side: Vec<f64> = singles.iter().copied().filter(|x| x.signum() == side).collect();
                if on_side.is_empty() {
                    on_side.push(side);
                }
                for (i, &a) in on_side.iter().enumerate() {
                    for &b in &on_side[i + 1..] {
                        seeds.push((a, b));
                    }
                    for (j, &s) in spread.iter().enumerate() {
                        for &t in &spread[j + 1..] {
                            seeds.push((a * s, a * t));
                        }
                    }
                }
            }
        }
        CollinearVariant::B => {
            let neg: Vec<f64> = singles.iter().copied().filter(|x| *x < 0.0).collect();
            let pos: Vec<f64> = singles.iter().copied().filter(|x| *x > 0.0).collect();
            let neg = if neg.is_empty() {
                pos.iter().map(|x| -x).collect()
            } else {
                neg
            };
            let pos = if pos.is_empty() {
                neg.iter().map(|x| -x).collect()
            } else {
                pos
            };
            for &a in &neg {
                for &b in &pos {
                    for s in [1.0, 0.7, 1.4, 2.0] {
                        seeds.push((a * s, b * s));
                        seeds.push((a, b * s));
                        seeds.push((a * s, b));
                    }
                }
            }
            if neg.is_empty() {
                for r in [0.5f64, 1.0, 2.0, 4.0] {
                    seeds.push((-r, r));
                }
            }
        }
    }

    let mut found: Vec<Equilibrium> = Vec::new();
    for (a, b) in seeds {
        if a == b {
            continue;
        }
        let seed = Configuration::new(params.dims, [[a, 0.0, 0.0], [b, 0.0, 0.0]]);
        let Ok(eq) = refine(&seed, params) else { continue };
        let wanted = match variant {
            CollinearVariant::A => EquilibriumClass::CollinearSameSide,
            CollinearVariant::B => EquilibriumClass::CollinearOpposite,
        };
        if eq.class != wanted {
            continue;
        }
        let duplicate = found.iter().any(|f| {
            let same = |c: &Configuration| {
                (0..2).all(|e| {
                    (0..3).all(|i| (c.positions[e][i] - f.config.positions[e][i]).abs() <= 1e-7 * (1.0 + f.size()))
                })
            };
            same(&eq.config) || same(&eq.config.swapped())
        });
        if !duplicate {
            found.push(eq);
        }
    }
    found.sort_by(|a, b| {
        let key = |e: &Equilibrium| e.config.radius(0).min(e.config.radius(1));
        key(a).total_cmp(&key(b))
    });
    Ok(found)
}

/// Type III equilibrium; the one whose inner electron is closest to the
/// nucleus when several exist.
pub fn type3_config(params: &FieldParams, variant: CollinearVariant) -> Result<Equilibrium> {
    type3_all(params, variant)?.into_iter().next().ok_or_else(|| {
        Error::NotFound(format!(
            "type III{} for omega = {}, epsilon = {}",
            if variant == CollinearVariant::A { "a" } else { "b" },
            params.omega,
            params.epsilon
        ))
    })
}
