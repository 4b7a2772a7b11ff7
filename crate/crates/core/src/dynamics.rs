//! Rotating-frame trajectories.
//!
//! Integration uses the adaptive 8(5,3) Dormand–Prince scheme from
//! `ode_solvers` on the canonical equations, with dense output at a fixed
//! sampling interval.

use std::f64::consts::TAU;

use nalgebra::DVector;
use ode_solvers::{Dop853, OutputType, System};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Configuration, PhaseState};
use crate::units::{Dims, FieldParams};

/// Any interparticle distance below this aborts the integration.
pub const COLLISION_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Used when `sample_interval` is unset and `ω > 0`.
    pub samples_per_period: usize,
    pub sample_interval: Option<f64>,
    pub max_steps: u32,
    /// Stop once any coordinate strays this far from the initial positions.
    pub deviation_stop: Option<f64>,
}

impl Default for IntegrationControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            samples_per_period: 200,
            sample_interval: None,
            max_steps: 50_000_000,
            deviation_stop: None,
        }
    }
}

impl IntegrationControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidInput("integration tolerances must be positive".into()));
        }
        if self.samples_per_period == 0 {
            return Err(Error::InvalidInput("samples_per_period must be positive".into()));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "sample interval must be positive, got {dt}"
                )));
            }
        }
        Ok(())
    }

    fn interval(&self, omega: f64, t_final: f64) -> f64 {
        match self.sample_interval {
            Some(dt) => dt,
            None if omega > 0.0 => rotation_period(omega) / self.samples_per_period as f64,
            None => t_final / self.samples_per_period as f64,
        }
    }
}

pub fn rotation_period(omega: f64) -> f64 {
    TAU / omega
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Rotating,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: PhaseState,
    /// Rotating-frame energy.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// `max |E(t) - E(0)| / |E(0)|`, or absolute when `E(0) = 0`.
    pub energy_drift: f64,
    pub frame: Frame,
    /// Reason the run ended before `t_final`, if it did.
    pub stopped: Option<String>,
}

impl Trajectory {
    pub fn initial(&self) -> &PhaseState {
        &self.samples[0].state
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn duration(&self) -> f64 {
        self.last().t - self.samples[0].t
    }

    /// Largest coordinate offset from `reference` over all samples.
    pub fn max_deviation(&self, reference: &Configuration) -> f64 {
        self.samples
            .iter()
            .map(|s| position_offset(&s.state.config, reference))
            .fold(0.0, f64::max)
    }

    /// Columns `t,x1,y1,z1,x2,y2,z2,px1,py1,pz1,px2,py2,pz2,energy`; the `z`
    /// columns are dropped in two dimensions.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.initial().dims().count();
        let axes = &["x", "y", "z"][..n];
        let mut header = vec!["t".to_string()];
        for prefix in ["", "p"] {
            for e in 1..=2 {
                header.extend(axes.iter().map(|a| format!("{prefix}{a}{e}")));
            }
        }
        header.push("energy".into());
        writeln!(out, "{}", header.join(","))?;
        for s in &self.samples {
            write!(out, "{}", s.t)?;
            for q in &s.state.config.positions {
                for v in &q[..n] {
                    write!(out, ",{v}")?;
                }
            }
            for p in &s.state.momenta {
                for v in &p[..n] {
                    write!(out, ",{v}")?;
                }
            }
            writeln!(out, ",{}", s.energy)?;
        }
        Ok(())
    }

    /// First sample time at which the offset from `reference` exceeds `threshold`.
    pub fn first_exceedance(&self, reference: &Configuration, threshold: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| position_offset(&s.state.config, reference) > threshold)
            .map(|s| s.t)
    }
}

/// Max-norm distance between two configurations.
pub fn position_offset(a: &Configuration, b: &Configuration) -> f64 {
    let mut m = 0.0f64;
    for e in 0..2 {
        for i in 0..3 {
            m = m.max((a.positions[e][i] - b.positions[e][i]).abs());
        }
    }
    m
}

struct Flow {
    params: FieldParams,
    dims: Dims,
    sign: f64,
    start: Vec<f64>,
    deviation_stop: Option<f64>,
    stopped: Option<String>,
    collision: Option<(f64, f64)>,
}

impl System<f64, DVector<f64>> for &mut Flow {
    fn system(&self, _t: f64, y: &DVector<f64>, dy: &mut DVector<f64>) {
        model::flow_rhs(&self.params, self.dims, y.as_slice(), dy.as_mut_slice());
        if self.sign < 0.0 {
            dy.neg_mut();
        }
    }

    fn solout(&mut self, t: f64, y: &DVector<f64>, _dy: &DVector<f64>) -> bool {
        let n = self.dims.count();
        let config = Configuration::from_slice(self.dims, &y.as_slice()[2 * n..]);
        let d = config.min_distance();
        if !(d >= COLLISION_DISTANCE) {
            self.collision = Some((t, d));
            return true;
        }
        if let Some(limit) = self.deviation_stop {
            let offset = y.as_slice()[2 * n..]
                .iter()
                .zip(&self.start[2 * n..])
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if offset > limit {
                self.stopped = Some(format!("deviation {offset:.3e} exceeded {limit:.3e} at t = {t}"));
                return true;
            }
        }
        false
    }
}

fn run(
    initial: &PhaseState,
    params: &FieldParams,
    duration: f64,
    sign: f64,
    control: &IntegrationControl,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, Option<String>)> {
    params.validate()?;
    control.validate()?;
    initial.config.check()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if initial.dims() != params.dims {
        return Err(Error::InvalidInput("state and parameter dimensions differ".into()));
    }
    let y0 = DVector::from_vec(initial.to_phase_vec());
    let mut flow = Flow {
        params: *params,
        dims: initial.dims(),
        sign,
        start: y0.as_slice().to_vec(),
        deviation_stop: control.deviation_stop,
        stopped: None,
        collision: None,
    };
    let dx = control.interval(params.omega, duration).min(duration);
    let segments = (duration / dx - 1e-9).ceil().max(1.0) as usize;

    // The dense output of `ode_solvers` 0.6 misplaces points when the output
    // interval spans several steps, so each sample closes its own segment.
    let mut ts = vec![0.0];
    let mut ys = vec![y0];
    let mut steps = 0u32;
    for i in 0..segments {
        let t0 = ts[ts.len() - 1];
        let t1 = if i + 1 == segments {
            duration
        } else {
            (i + 1) as f64 * dx
        };
        let mut solver = Dop853::from_param(
            &mut flow,
            t0,
            t1,
            t1 - t0,
            ys[ys.len() - 1].clone(),
            control.rel_tol,
            control.abs_tol,
            0.9,
            0.0,
            0.333,
            6.0,
            t1 - t0,
            0.0,
            control.max_steps.saturating_sub(steps).max(1),
            u32::MAX,
            OutputType::Sparse,
        );
        let outcome = solver.integrate();
        let (seg_t, seg_y) = solver.results().get();
        let (t_end, y_end) = (*seg_t.last().unwrap(), seg_y.last().unwrap().clone());
        drop(solver);
        match outcome {
            Ok(stats) => steps = steps.saturating_add(stats.accepted_steps + stats.rejected_steps),
            Err(e) => {
                let n = initial.dims().count();
                let distance = Configuration::from_slice(initial.dims(), &y_end.as_slice()[2 * n..]).min_distance();
                return Err(match e {
                    ode_solvers::dop_shared::IntegrationError::StepSizeUnderflow { x } if distance < 1e-3 => {
                        Error::Collision { time: x, distance }
                    }
                    other => Error::Integration {
                        time: t_end,
                        reason: other.to_string(),
                    },
                });
            }
        }
        if let Some((time, distance)) = flow.collision {
            return Err(Error::Collision { time, distance });
        }
        ts.push(t_end);
        ys.push(y_end);
        if flow.stopped.is_some() {
            break;
        }
    }
    Ok((ts, ys, flow.stopped))
}

/// Integrate forward to `t_final`.
pub fn integrate(
    initial: &PhaseState,
    params: &FieldParams,
    t_final: f64,
    control: &IntegrationControl,
) -> Result<Trajectory> {
    let (ts, ys, stopped) = run(initial, params, t_final, 1.0, control)?;
    let dims = initial.dims();
    let mut samples = Vec::with_capacity(ts.len());
    for (t, y) in ts.into_iter().zip(ys) {
        if samples.last().is_some_and(|s: &Sample| t <= s.t) {
            continue;
        }
        let state = PhaseState::from_phase_slice(dims, y.as_slice());
        let energy = model::hamiltonian(&state, params)?;
        samples.push(Sample { t, state, energy });
    }
    let e0 = samples[0].energy;
    let scale = if e0 != 0.0 { e0.abs() } else { 1.0 };
    let energy_drift = samples
        .iter()
        .map(|s| (s.energy - e0).abs() / scale)
        .fold(0.0, f64::max);
    Ok(Trajectory {
        samples,
        energy_drift,
        frame: Frame::Rotating,
        stopped,
    })
}

/// State after a signed time `duration`; negative runs the flow backward.
pub fn propagate(
    initial: &PhaseState,
    params: &FieldParams,
    duration: f64,
    control: &IntegrationControl,
) -> Result<PhaseState> {
    if duration == 0.0 {
        return Ok(*initial);
    }
    let control = IntegrationControl {
        sample_interval: Some(duration.abs()),
        deviation_stop: None,
        ..*control
    };
    let (_, ys, _) = run(initial, params, duration.abs(), duration.signum(), &control)?;
    let y = ys.last().expect("integrator output");
    Ok(PhaseState::from_phase_slice(initial.dims(), y.as_slice()))
}

fn rotate(v: &mut [f64; 3], angle: f64) {
    let (s, c) = angle.sin_cos();
    let (x, y) = (v[0], v[1]);
    v[0] = c * x - s * y;
    v[1] = s * x + c * y;
}

/// Rotate every sample by `ω t` about `z`: positions and canonical momenta
/// of the rotating frame become those of the laboratory frame. Applying the
/// map with `-ω` undoes it.
pub fn to_lab_frame(traj: &Trajectory, omega: f64) -> Trajectory {
    let mut out = traj.clone();
    for s in &mut out.samples {
        let angle = omega * s.t;
        for e in 0..2 {
            rotate(&mut s.state.config.positions[e], angle);
            rotate(&mut s.state.momenta[e], angle);
        }
    }
    out.frame = match traj.frame {
        Frame::Rotating if omega != 0.0 => Frame::Lab,
        Frame::Lab if omega != 0.0 => Frame::Rotating,
        f => f,
    };
    out
}

/// Outcome of a perturbed-equilibrium run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationProbe {
    pub amplitude: f64,
    pub duration: f64,
    pub max_deviation: f64,
    /// First time the deviation passed ten times the amplitude.
    pub escape_time: Option<f64>,
    pub energy_drift: f64,
}

impl PerturbationProbe {
    pub fn bounded(&self) -> bool {
        self.escape_time.is_none()
    }
}

/// Start `amplitude` away from `eq` along `direction` (positions only, max
/// norm scaled to `amplitude`) and watch the deviation for `duration`. The
/// run stops once the deviation reaches 100 times the amplitude.
pub fn probe_perturbation(
    eq: &crate::equilibria::Equilibrium,
    params: &FieldParams,
    direction: &[f64],
    amplitude: f64,
    duration: f64,
    control: &IntegrationControl,
) -> Result<PerturbationProbe> {
    let mut q = eq.config.to_vec();
    if direction.len() != q.len() {
        return Err(Error::InvalidInput(format!(
            "direction has {} components, configuration has {}",
            direction.len(),
            q.len()
        )));
    }
    let norm = direction.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if norm == 0.0 {
        return Err(Error::InvalidInput("zero perturbation direction".into()));
    }
    for (x, d) in q.iter_mut().zip(direction) {
        *x += amplitude * d / norm;
    }
    let start = PhaseState::new(Configuration::from_slice(eq.config.dims, &q), eq.momenta);
    let control = IntegrationControl {
        deviation_stop: Some(100.0 * amplitude),
        ..*control
    };
    let traj = integrate(&start, params, duration, &control)?;
    Ok(PerturbationProbe {
        amplitude,
        duration,
        max_deviation: traj.max_deviation(&eq.config),
        escape_time: traj.first_exceedance(&eq.config, 10.0 * amplitude),
        energy_drift: traj.energy_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::langmuir_equilibria;
    use crate::units::Branch;

    fn reference_field() -> FieldParams {
        FieldParams::helium(0.5, 0.1235 / 0.0370f64.powf(4.0 / 3.0), Branch::Minus)
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let params = reference_field();
        let eq = langmuir_equilibria(&params).unwrap()[1];
        let t = 100.0 * rotation_period(params.omega);
        let traj = integrate(&eq.state(), &params, t, &IntegrationControl::default()).unwrap();
        assert!(traj.max_deviation(&eq.config) < 1e-8);
        assert!((traj.last().t - t).abs() < 1e-9);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn energy_is_conserved() {
        let params = reference_field();
        let eq = langmuir_equilibria(&params).unwrap()[1];
        let mut state = eq.state();
        state.momenta[0][2] += 0.01;
        state.config.positions[1][0] += 0.3;
        let t = 100.0 * rotation_period(params.omega);
        let traj = integrate(&state, &params, t, &IntegrationControl::default()).unwrap();
        assert!(traj.energy_drift < 1e-9, "{}", traj.energy_drift);
        assert_eq!(traj.samples.len(), 100 * 200 + 1);
    }

    #[test]
    fn time_reversal() {
        let params = FieldParams::helium(1.2, 0.2, Branch::Plus);
        let eq = langmuir_equilibria(&params).unwrap()[0];
        let mut state = eq.state();
        state.config.positions[0][1] += 0.05;
        let ctl = IntegrationControl::default();
        let fwd = propagate(&state, &params, 7.0, &ctl).unwrap();
        let back = propagate(&fwd, &params, -7.0, &ctl).unwrap();
        let a = state.to_phase_vec();
        let b = back.to_phase_vec();
        let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn exchange_symmetry() {
        let params = FieldParams::helium(1.2, 0.2, Branch::Plus);
        let eq = langmuir_equilibria(&params).unwrap()[0];
        let mut state = eq.state();
        state.config.positions[0][1] += 0.05;
        state.momenta[1][2] -= 0.02;
        let ctl = IntegrationControl::default();
        let a = propagate(&state, &params, 5.0, &ctl).unwrap();
        let b = propagate(&state.swapped(), &params, 5.0, &ctl).unwrap().swapped();
        let err = a
            .to_phase_vec()
            .iter()
            .zip(b.to_phase_vec())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn lab_frame_circles() {
        let params = FieldParams::helium(1.4, 0.3, Branch::Minus);
        let eq = langmuir_equilibria(&params).unwrap()[0];
        let t = 3.0 * rotation_period(params.omega);
        let traj = integrate(&eq.state(), &params, t, &IntegrationControl::default()).unwrap();
        let lab = to_lab_frame(&traj, params.omega);
        assert_eq!(lab.frame, Frame::Lab);
        for e in 0..2 {
            let q0 = eq.config.positions[e];
            let rho = q0[0].hypot(q0[1]);
            let phi0 = q0[1].atan2(q0[0]);
            for s in &lab.samples {
                let q = s.state.config.positions[e];
                assert!((q[0].hypot(q[1]) - rho).abs() < 1e-8);
                let expected = phi0 + params.omega * s.t;
                let dphi = (q[1].atan2(q[0]) - expected).rem_euclid(TAU);
                assert!(dphi.min(TAU - dphi) < 1e-8);
            }
        }
        let back = to_lab_frame(&lab, -params.omega);
        assert_eq!(back.frame, Frame::Rotating);
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            let d = a
                .state
                .to_phase_vec()
                .iter()
                .zip(b.state.to_phase_vec())
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(d < 1e-12);
        }
        assert_eq!(to_lab_frame(&traj, 0.0), traj);
    }

    #[test]
    fn collision_is_reported() {
        let params = FieldParams::helium(0.5, 0.0, Branch::Minus).with_charge(1.0);
        // electron dropped from rest onto the nucleus along z
        let config = Configuration::new(Dims::Three, [[0.0, 0.0, 1.0], [0.0, 0.0, 50.0]]);
        let state = PhaseState::new(config, [[0.0; 3]; 2]);
        let err = integrate(&state, &params, 10.0, &IntegrationControl::default()).unwrap_err();
        assert!(matches!(err, Error::Collision { .. }), "{err}");
    }

    #[test]
    fn rejects_bad_duration() {
        let params = reference_field();
        let eq = langmuir_equilibria(&params).unwrap()[1];
        assert!(integrate(&eq.state(), &params, 0.0, &IntegrationControl::default()).is_err());
        assert!(integrate(&eq.state(), &params, -1.0, &IntegrationControl::default()).is_err());
    }
}
