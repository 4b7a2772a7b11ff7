//! Diffusion Monte Carlo for the rotating-frame two-electron problem.
//!
//! Plain DMC needs a real Schrödinger operator, which the rotating-frame
//! Hamiltonian is only when its angular coefficient `ω + s/2` vanishes. There
//! it reads `Σ [p²/2 - Z/r + εx + ρ²/8] + 1/r12`.
//!
//! Without a guiding function the walker density samples the ground state
//! `ψ` itself (not `|ψ|²`), and the mixed estimator of the energy is the
//! walker average of the potential.
//!
//! Every walker draws from its own PCG stream, seeded from
//! `(seed, generation, index)`, so a run replays exactly for any thread count.

use std::fmt;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64Mcg;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{self, CollinearVariant, Equilibrium};
use crate::error::{Error, Result};
use crate::model::{self, Configuration};
use crate::units::{Dims, FieldParams};

/// Potential energy over a flat walker coordinate vector.
pub trait Potential: Sync {
    /// Coordinates per walker.
    fn dim(&self) -> usize;
    /// Non-finite values kill the walker.
    fn value(&self, r: &[f64]) -> f64;
}

/// The zero-angular-coefficient rotating-frame potential, two electrons.
#[derive(Debug, Clone, Copy)]
pub struct RotatingFramePotential {
    params: FieldParams,
}

impl RotatingFramePotential {
    pub fn new(params: FieldParams) -> Result<Self> {
        params.validate()?;
        let c = params.angular_coefficient();
        if c.abs() > 1e-12 {
            return Err(Error::UnsupportedRegime(format!(
                "angular coefficient ω + s/2 = {c}; plain DMC needs it to vanish \
                 (ω = 1/2 on branch -1); the complex-phase case needs fixed-phase DMC, \
                 which is not implemented"
            )));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &FieldParams {
        &self.params
    }
}

impl Potential for RotatingFramePotential {
    fn dim(&self) -> usize {
        2 * self.params.dims.count()
    }

    fn value(&self, r: &[f64]) -> f64 {
        let config = Configuration::from_slice(self.params.dims, r);
        model::potential(&config, &self.params).unwrap_or(f64::INFINITY)
    }
}

/// One electron bound to a point charge, no fields. Ground energy `-Z²/2`.
#[derive(Debug, Clone, Copy)]
pub struct Hydrogenic {
    pub charge: f64,
}

impl Potential for Hydrogenic {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, r: &[f64]) -> f64 {
        -self.charge / (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
    }
}

/// Independent isotropic oscillators `r²/8`, one per electron: the
/// rotating-frame potential with `Z = 0`, `ε = 0`, no repulsion and a
/// `z²/8` term added. Ground energy `3/4` per electron.
#[derive(Debug, Clone, Copy)]
pub struct DecoupledOscillators {
    pub electrons: usize,
}

impl Potential for DecoupledOscillators {
    fn dim(&self) -> usize {
        3 * self.electrons
    }

    fn value(&self, r: &[f64]) -> f64 {
        r.iter().map(|x| x * x).sum::<f64>() / 8.0
    }
}

impl DecoupledOscillators {
    pub fn exact_energy(&self) -> f64 {
        0.75 * self.electrons as f64
    }
}

/// Equal-weight Gaussian mixture `ψ_T = Σ exp(-|R - R_k|² / 2w²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianGuide {
    pub centers: Vec<Vec<f64>>,
    pub width: f64,
}

impl GaussianGuide {
    fn terms(&self, r: &[f64]) -> Vec<f64> {
        self.centers
            .iter()
            .map(|c| {
                let d2: f64 = r.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                -d2 / (2.0 * self.width * self.width)
            })
            .collect()
    }

    fn ln_value(&self, r: &[f64]) -> f64 {
        let t = self.terms(r);
        let m = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + t.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }

    /// `∇ ln ψ_T` and the local kinetic energy `-∇²ψ_T / 2ψ_T`.
    fn drift_and_kinetic(&self, r: &[f64]) -> (Vec<f64>, f64) {
        let t = self.terms(r);
        let m = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = t.iter().map(|x| (x - m).exp()).collect();
        let total: f64 = w.iter().sum();
        let s2 = self.width * self.width;
        let n = r.len() as f64;
        let mut drift = vec![0.0; r.len()];
        let mut lap = 0.0;
        for (wk, c) in w.iter().zip(&self.centers) {
            let p = wk / total;
            let mut d2 = 0.0;
            for i in 0..r.len() {
                let d = r[i] - c[i];
                drift[i] -= p * d / s2;
                d2 += d * d;
            }
            lap += p * (d2 / (s2 * s2) - n / s2);
        }
        (drift, -0.5 * lap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmcConfig {
    pub walker_target: usize,
    pub time_step: f64,
    pub equilibration_steps: usize,
    pub accumulation_steps: usize,
    pub seed: u64,
    /// Spread of the initial walker cloud about each lobe; defaults to a
    /// tenth of the lobe separation.
    pub box_hint: Option<f64>,
    /// Width of a Gaussian guiding function on the classical lobes. `None`
    /// runs plain branching DMC.
    pub guide_width: Option<f64>,
    /// Generations between stored density samples.
    pub sample_stride: usize,
    /// Walkers stored per sampled generation.
    pub samples_per_generation: usize,
    /// Cap on copies produced by one branching event.
    pub max_copies: u32,
    /// Kernel width for locating lobe maxima; defaults to half the initial
    /// spread.
    pub mode_bandwidth: Option<f64>,
}

impl Default for DmcConfig {
    fn default() -> Self {
        Self {
            walker_target: 10_000,
            time_step: 0.05,
            equilibration_steps: 20_000,
            accumulation_steps: 20_000,
            seed: 1,
            box_hint: None,
            guide_width: None,
            sample_stride: 20,
            samples_per_generation: 500,
            max_copies: 3,
            mode_bandwidth: None,
        }
    }
}

impl DmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walker_target < 100 {
            return Err(Error::InvalidInput(format!(
                "walker_target must be at least 100, got {}",
                self.walker_target
            )));
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "time_step must be positive, got {}",
                self.time_step
            )));
        }
        if self.accumulation_steps == 0 {
            return Err(Error::InvalidInput("accumulation_steps must be positive".into()));
        }
        if self.sample_stride == 0 || self.samples_per_generation == 0 {
            return Err(Error::InvalidInput("sampling stride and size must be positive".into()));
        }
        if self.max_copies < 2 {
            return Err(Error::InvalidInput("max_copies must be at least 2".into()));
        }
        if let Some(w) = self
            .box_hint
            .into_iter()
            .chain(self.guide_width)
            .chain(self.mode_bandwidth)
            .find(|w| !(*w > 0.0))
        {
            return Err(Error::InvalidInput(format!("widths must be positive, got {w}")));
        }
        Ok(())
    }
}

/// Weighted walker positions: a live population or pooled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkerEnsemble {
    pub dim: usize,
    /// Flat, `dim` numbers per walker.
    pub coords: Vec<f64>,
    /// Per-walker weights; they sum to the represented walker count.
    pub weights: Vec<f64>,
    pub reference_energy: f64,
    pub generation: usize,
}

impl WalkerEnsemble {
    pub fn new(dim: usize, walkers: &[Vec<f64>]) -> Result<Self> {
        let mut coords = Vec::with_capacity(dim * walkers.len());
        for w in walkers {
            if w.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "walker has {} coordinates, expected {dim}",
                    w.len()
                )));
            }
            coords.extend_from_slice(w);
        }
        Ok(Self {
            dim,
            coords,
            weights: vec![1.0; walkers.len()],
            reference_energy: 0.0,
            generation: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn walker(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    Xy,
    Xz,
    Yz,
}

impl Plane {
    fn axes(self) -> (usize, usize) {
        match self {
            Plane::Xy => (0, 1),
            Plane::Xz => (0, 2),
            Plane::Yz => (1, 2),
        }
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Plane::Xy => "xy",
            Plane::Xz => "xz",
            Plane::Yz => "yz",
        })
    }
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "xy" => Ok(Plane::Xy),
            "xz" => Ok(Plane::Xz),
            "yz" => Ok(Plane::Yz),
            other => Err(Error::InvalidInput(format!(
                "unknown plane {other:?}, expected xy, xz or yz"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElectronSelection {
    First,
    Second,
    Both,
}

/// Marginal density of one or both electrons over a coordinate plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram2D {
    pub plane: Plane,
    pub selection: ElectronSelection,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// Row-major `[ix * ny + iy]`, electron 1.
    pub counts_e1: Vec<f64>,
    pub counts_e2: Vec<f64>,
}

impl Histogram2D {
    pub fn nx(&self) -> usize {
        self.x_edges.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.y_edges.len() - 1
    }

    /// Counts for the histogram's electron selection.
    pub fn counts(&self) -> Vec<f64> {
        match self.selection {
            ElectronSelection::First => self.counts_e1.clone(),
            ElectronSelection::Second => self.counts_e2.clone(),
            ElectronSelection::Both => self.counts_e1.iter().zip(&self.counts_e2).map(|(a, b)| a + b).collect(),
        }
    }

    /// Header `bin_x,bin_y,count_e1,count_e2`; bin centers.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_x,bin_y,count_e1,count_e2")?;
        let ny = self.ny();
        for ix in 0..self.nx() {
            let x = 0.5 * (self.x_edges[ix] + self.x_edges[ix + 1]);
            for iy in 0..ny {
                let y = 0.5 * (self.y_edges[iy] + self.y_edges[iy + 1]);
                let k = ix * ny + iy;
                writeln!(out, "{x},{y},{},{}", self.counts_e1[k], self.counts_e2[k])?;
            }
        }
        Ok(())
    }
}

/// Bin edges covering the data of both electrons along one axis.
fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let pad = 1e-9 * (hi - lo).max(1.0);
    let (lo, hi) = (lo - pad, hi + pad);
    (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect()
}

/// Histogram of an ensemble over `plane`; counts carry the walker weights,
/// so they sum to the represented walker count per electron.
pub fn density_histogram(
    ensemble: &WalkerEnsemble,
    plane: Plane,
    bins: usize,
    selection: ElectronSelection,
) -> Result<Histogram2D> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be positive".into()));
    }
    let block = ensemble.dim / 2;
    let (a, b) = plane.axes();
    if b >= block {
        return Err(Error::InvalidInput(format!(
            "plane {plane} needs three coordinates per electron"
        )));
    }
    let (mut xlo, mut xhi, mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..ensemble.len() {
        let w = ensemble.walker(i);
        for e in 0..2 {
            xlo = xlo.min(w[e * block + a]);
            xhi = xhi.max(w[e * block + a]);
            ylo = ylo.min(w[e * block + b]);
            yhi = yhi.max(w[e * block + b]);
        }
    }
    let x_edges = edges(xlo, xhi, bins);
    let y_edges = edges(ylo, yhi, bins);
    let locate = |v: f64, e: &[f64]| {
        let t = (v - e[0]) / (e[bins] - e[0]) * bins as f64;
        (t.floor().max(0.0) as usize).min(bins - 1)
    };
    let mut counts = [vec![0.0; bins * bins], vec![0.0; bins * bins]];
    for i in 0..ensemble.len() {
        let w = ensemble.walker(i);
        for (e, c) in counts.iter_mut().enumerate() {
            let ix = locate(w[e * block + a], &x_edges);
            let iy = locate(w[e * block + b], &y_edges);
            c[ix * bins + iy] += ensemble.weights[i];
        }
    }
    let [counts_e1, counts_e2] = counts;
    Ok(Histogram2D {
        plane,
        selection,
        x_edges,
        y_edges,
        counts_e1,
        counts_e2,
    })
}

/// Mean with a blocking (Flyvbjerg–Petersen) error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} ± {:.6}", self.value, self.error)
    }
}

/// Error of the mean of a correlated series: the largest naive error over
/// successive pairwise-averaging levels that keep at least 16 blocks.
pub fn blocking_estimate(series: &[f64]) -> Estimate {
    let n = series.len();
    if n == 0 {
        return Estimate {
            value: f64::NAN,
            error: f64::NAN,
        };
    }
    let value = series.iter().sum::<f64>() / n as f64;
    let mut data = series.to_vec();
    let mut error = 0.0f64;
    while data.len() >= 16 {
        let m = data.len() as f64;
        let mean = data.iter().sum::<f64>() / m;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
        error = error.max((var / m).sqrt());
        data = data.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
    }
    if error == 0.0 && n > 1 {
        let var = series.iter().map(|x| (x - value) * (x - value)).sum::<f64>() / (n as f64 - 1.0);
        error = (var / n as f64).sqrt();
    }
    Estimate { value, error }
}

fn stream(seed: u64, generation: u64, index: u64) -> Pcg64Mcg {
    // splitmix64 finalizer over the three words
    let mut z = seed
        ^ generation.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03).rotate_left(31);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    Pcg64Mcg::seed_from_u64(z ^ (z >> 31))
}

/// Raw output of the DMC engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmcRun {
    pub energy: Estimate,
    /// Per-generation walker average of the local energy.
    pub energy_trace: Vec<f64>,
    pub population_trace: Vec<usize>,
    pub reference_trace: Vec<f64>,
    pub final_ensemble: WalkerEnsemble,
    /// Walkers pooled from the accumulation phase.
    pub samples: WalkerEnsemble,
    pub acceptance: Option<f64>,
}

struct Walker {
    r: Vec<f64>,
    local_energy: f64,
}

struct Moved {
    r: Vec<f64>,
    local_energy: f64,
    copies: u32,
    accepted: bool,
}

fn local_energy<P: Potential>(pot: &P, guide: Option<&GaussianGuide>, r: &[f64]) -> f64 {
    let v = pot.value(r);
    match guide {
        None => v,
        Some(g) => v + g.drift_and_kinetic(r).1,
    }
}

fn step_walker<P: Potential>(
    pot: &P,
    guide: Option<&GaussianGuide>,
    w: &Walker,
    dt: f64,
    reference: f64,
    max_copies: u32,
    rng: &mut Pcg64Mcg,
) -> Moved {
    let sq = dt.sqrt();
    let mut accepted = true;
    let (r, e_new) = match guide {
        None => {
            let r: Vec<f64> =
                w.r.iter()
                    .map(|x| x + sq * rng.sample::<f64, _>(StandardNormal))
                    .collect();
            let e = pot.value(&r);
            (r, e)
        }
        Some(g) => {
            let (drift, _) = g.drift_and_kinetic(&w.r);
            let r: Vec<f64> =
                w.r.iter()
                    .zip(&drift)
                    .map(|(x, v)| x + dt * v + sq * rng.sample::<f64, _>(StandardNormal))
                    .collect();
            let (drift_new, kin) = g.drift_and_kinetic(&r);
            // Metropolis test with the drift-diffusion Green's function
            let ln_g = |from: &[f64], to: &[f64], v: &[f64]| -> f64 {
                from.iter()
                    .zip(to)
                    .zip(v)
                    .map(|((a, b), d)| {
                        let u = b - a - dt * d;
                        -u * u / (2.0 * dt)
                    })
                    .sum()
            };
            let ln_ratio =
                2.0 * (g.ln_value(&r) - g.ln_value(&w.r)) + ln_g(&r, &w.r, &drift_new) - ln_g(&w.r, &r, &drift);
            let v = pot.value(&r);
            if v.is_finite() && rng.random::<f64>().ln() < ln_ratio {
                (r, v + kin)
            } else {
                accepted = false;
                (w.r.clone(), w.local_energy)
            }
        }
    };
    if !e_new.is_finite() {
        return Moved {
            r,
            local_energy: e_new,
            copies: 0,
            accepted,
        };
    }
    let weight = (-dt * (0.5 * (w.local_energy + e_new) - reference)).exp();
    let copies = ((weight + rng.random::<f64>()).floor() as u32).min(max_copies);
    Moved {
        r,
        local_energy: e_new,
        copies,
        accepted,
    }
}

/// Run DMC for a generic potential from walkers spread about `centers`.
///
/// Walker `i` starts at `centers[i % centers.len()]` plus isotropic Gaussian
/// noise of width `spread`.
pub fn run_potential<P: Potential>(
    pot: &P,
    centers: &[Vec<f64>],
    spread: f64,
    cfg: &DmcConfig,
    guide: Option<&GaussianGuide>,
) -> Result<DmcRun> {
    cfg.validate()?;
    let dim = pot.dim();
    if centers.is_empty() || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::InvalidInput(format!(
            "need at least one {dim}-dimensional center"
        )));
    }
    let target = cfg.walker_target;
    let mut walkers: Vec<Walker> = (0..target)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, u64::MAX, i as u64);
            let c = &centers[i % centers.len()];
            let r: Vec<f64> = c
                .iter()
                .map(|x| x + spread * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let local_energy = local_energy(pot, guide, &r);
            Walker { r, local_energy }
        })
        .filter(|w| w.local_energy.is_finite())
        .collect();
    if walkers.is_empty() {
        return Err(Error::Population {
            generation: 0,
            population: 0,
            target,
        });
    }

    let mean_energy = |ws: &[Walker]| ws.iter().map(|w| w.local_energy).sum::<f64>() / ws.len() as f64;
    let mut reference = mean_energy(&walkers);
    let dt = cfg.time_step;
    let total = cfg.equilibration_steps + cfg.accumulation_steps;
    let mut energy_trace = Vec::with_capacity(total);
    let mut population_trace = Vec::with_capacity(total);
    let mut reference_trace = Vec::with_capacity(total);
    let mut accumulated = Vec::with_capacity(cfg.accumulation_steps);
    let mut sample_coords = Vec::new();
    let mut sample_weights = Vec::new();
    let mut sampled_generations = 0usize;
    let (mut accepted, mut attempted) = (0u64, 0u64);

    for generation in 0..total {
        let moved: Vec<Moved> = walkers
            .par_iter()
            .enumerate()
            .map(|(i, w)| {
                let mut rng = stream(cfg.seed, generation as u64, i as u64);
                step_walker(pot, guide, w, dt, reference, cfg.max_copies, &mut rng)
            })
            .collect();
        attempted += moved.len() as u64;
        accepted += moved.iter().filter(|m| m.accepted).count() as u64;

        let mut next = Vec::with_capacity(target + target / 4);
        for m in moved {
            for _ in 1..m.copies {
                next.push(Walker {
                    r: m.r.clone(),
                    local_energy: m.local_energy,
                });
            }
            if m.copies > 0 {
                next.push(Walker {
                    r: m.r,
                    local_energy: m.local_energy,
                });
            }
        }
        walkers = next;
        let n = walkers.len();
        let accumulating = generation >= cfg.equilibration_steps;
        let out_of_bounds = n == 0 || n > 10 * target || (accumulating && !(target / 2..=2 * target).contains(&n));
        if out_of_bounds {
            return Err(Error::Population {
                generation,
                population: n,
                target,
            });
        }

        let e_mean = mean_energy(&walkers);
        let clamped = (n as f64).clamp(0.5 * target as f64, 2.0 * target as f64);
        reference = e_mean - (clamped / target as f64).ln() / dt;
        energy_trace.push(e_mean);
        population_trace.push(n);
        reference_trace.push(reference);

        if accumulating {
            accumulated.push(e_mean);
            if (generation - cfg.equilibration_steps) % cfg.sample_stride == 0 {
                let take = cfg.samples_per_generation.min(n);
                let stride = n / take;
                for k in 0..take {
                    sample_coords.extend_from_slice(&walkers[k * stride].r);
                }
                sample_weights.extend(std::iter::repeat_n(n as f64 / take as f64, take));
                sampled_generations += 1;
            }
        }
    }

    for w in &mut sample_weights {
        *w /= sampled_generations as f64;
    }
    let final_ensemble = WalkerEnsemble {
        dim,
        coords: walkers.iter().flat_map(|w| w.r.iter().copied()).collect(),
        weights: vec![1.0; walkers.len()],
        reference_energy: reference,
        generation: total,
    };
    let samples = WalkerEnsemble {
        dim,
        coords: sample_coords,
        weights: sample_weights,
        reference_energy: reference,
        generation: total,
    };
    Ok(DmcRun {
        energy: blocking_estimate(&accumulated),
        energy_trace,
        population_trace,
        reference_trace,
        final_ensemble,
        samples,
        acceptance: guide.map(|_| accepted as f64 / attempted.max(1) as f64),
    })
}

/// Center of one electron's density lobe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobeCenter {
    pub electron: usize,
    /// `true` for the lobe on the positive side of the mirror plane (`z` in
    /// 3D, `y` in 2D).
    pub upper: bool,
    pub position: [f64; 3],
    /// Weight of the electron's unsymmetrized samples on this side of the
    /// plane through the origin.
    pub population: f64,
}

/// Comparison of the measured lobes with one classical Langmuir root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootMatch {
    pub root_index: usize,
    pub side_length: f64,
    /// Largest lobe-center offset from `(-√3a/2, 0, ±a/2)`, divided by `a`.
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmcResult {
    pub params: FieldParams,
    pub config: DmcConfig,
    pub energy: Estimate,
    pub run: DmcRun,
    /// The classical equilibria used to seed the walkers.
    pub seeds: Vec<Equilibrium>,
    /// Potential at each seed equilibrium, in seed order.
    pub seed_potentials: Vec<f64>,
    /// Pooled samples closed under the Hamiltonian's exchange and mirror
    /// symmetries; what the histograms and lobe centers are built from.
    pub density: WalkerEnsemble,
    pub lobe_centers: Vec<LobeCenter>,
    /// Raw fraction of samples with electron 1 above electron 2. The exact
    /// ground state has 1/2; a finite run rarely tunnels between the two
    /// arrangements.
    pub upper_fraction: Estimate,
    /// Raw fraction of electron-1 samples above the mirror plane.
    pub mirror_fraction: Estimate,
    /// One entry per Langmuir root, best match first.
    pub root_matches: Vec<RootMatch>,
}

impl DmcResult {
    pub fn matched_root(&self) -> Option<&RootMatch> {
        self.root_matches.first()
    }

    pub fn samples(&self) -> &WalkerEnsemble {
        &self.run.samples
    }
}

fn seed_equilibria(params: &FieldParams) -> Result<Vec<Equilibrium>> {
    if params.dims == Dims::Three && params.charge == 2.0 {
        let roots = equilibria::langmuir_equilibria(params)?;
        if !roots.is_empty() {
            return Ok(roots);
        }
    }
    let mut found = equilibria::type3_all(params, CollinearVariant::A)?;
    found.extend(equilibria::type3_all(params, CollinearVariant::B)?);
    if found.is_empty() {
        return Err(Error::NotFound(format!(
            "no classical equilibrium to seed walkers at omega = {}, epsilon = {}",
            params.omega, params.epsilon
        )));
    }
    Ok(found)
}

/// Closes a two-electron sample under exchange and reflection of the last
/// coordinate of each electron. Weights are split so the total is unchanged.
pub fn symmetrize(samples: &WalkerEnsemble) -> WalkerEnsemble {
    let dim = samples.dim;
    let block = dim / 2;
    let mut coords = Vec::with_capacity(4 * samples.coords.len());
    let mut weights = Vec::with_capacity(4 * samples.len());
    for i in 0..samples.len() {
        let w = samples.walker(i);
        for exchange in [false, true] {
            for mirror in [false, true] {
                for e in 0..2 {
                    let src = if exchange { 1 - e } else { e };
                    let part = &w[src * block..(src + 1) * block];
                    coords.extend_from_slice(&part[..block - 1]);
                    coords.push(if mirror { -part[block - 1] } else { part[block - 1] });
                }
                weights.push(0.25 * samples.weights[i]);
            }
        }
    }
    WalkerEnsemble {
        dim,
        coords,
        weights,
        reference_energy: samples.reference_energy,
        generation: samples.generation,
    }
}

/// Centroid of the half-maximum region of a kernel-smoothed 2D histogram
/// restricted to `v > 0` (or `v < 0`). Bins are half the bandwidth wide,
/// capped at 400 per axis.
fn lobe_core(points: &[[f64; 2]], weights: &[f64], upper: bool, bandwidth: f64) -> Option<[f64; 2]> {
    let keep: Vec<usize> = (0..points.len()).filter(|&i| (points[i][1] > 0.0) == upper).collect();
    if keep.is_empty() {
        return None;
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &i in &keep {
        for k in 0..2 {
            lo[k] = lo[k].min(points[i][k]);
            hi[k] = hi[k].max(points[i][k]);
        }
    }
    let width: Vec<f64> = (0..2)
        .map(|k| (0.5 * bandwidth).max((hi[k] - lo[k]) / 400.0).max(1e-12))
        .collect();
    let n: Vec<usize> = (0..2).map(|k| ((hi[k] - lo[k]) / width[k]) as usize + 1).collect();
    let mut grid = vec![0.0; n[0] * n[1]];
    for &i in &keep {
        let a = (((points[i][0] - lo[0]) / width[0]) as usize).min(n[0] - 1);
        let b = (((points[i][1] - lo[1]) / width[1]) as usize).min(n[1] - 1);
        grid[a * n[1] + b] += weights[i];
    }
    // separable Gaussian, truncated at three bandwidths
    for (axis, stride, len, other) in [(0, n[1], n[0], n[1]), (1, 1, n[1], n[0])] {
        let sigma = bandwidth / width[axis];
        let reach = (3.0 * sigma).ceil() as isize;
        let kernel: Vec<f64> = (-reach..=reach)
            .map(|j| (-0.5 * (j as f64 / sigma).powi(2)).exp())
            .collect();
        let outer = if axis == 0 { 1 } else { n[1] };
        let mut out = vec![0.0; grid.len()];
        for o in 0..other {
            let base = o * outer;
            for t in 0..len as isize {
                let mut acc = 0.0;
                for (j, kv) in kernel.iter().enumerate() {
                    let u = t + j as isize - reach;
                    if u >= 0 && u < len as isize {
                        acc += kv * grid[base + u as usize * stride];
                    }
                }
                out[base + t as usize * stride] = acc;
            }
        }
        grid = out;
    }
    let peak = grid.iter().copied().fold(0.0, f64::max);
    let (mut sum, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for (idx, &v) in grid.iter().enumerate() {
        if v >= 0.5 * peak {
            sum += v;
            cx += v * (lo[0] + ((idx / n[1]) as f64 + 0.5) * width[0]);
            cy += v * (lo[1] + ((idx % n[1]) as f64 + 0.5) * width[1]);
        }
    }
    (sum > 0.0).then(|| [cx / sum, cy / sum])
}

/// Lobe centers of each electron's density projected on the plane spanned by
/// `x` and the mirror coordinate, one per side of the mirror plane. A center
/// is the centroid of the lobe's half-maximum region, which stays put when
/// the top of the lobe is flat. In 3D the `y` entry is the lobe's weighted
/// mean.
pub fn lobe_centers(density: &WalkerEnsemble, raw: &WalkerEnsemble, bandwidth: f64) -> Result<Vec<LobeCenter>> {
    if density.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let block = density.dim / 2;
    let axis = block - 1;
    let mut out = Vec::with_capacity(4);
    for e in 0..2 {
        let points: Vec<[f64; 2]> = (0..density.len())
            .map(|i| {
                let w = &density.walker(i)[e * block..(e + 1) * block];
                [w[0], w[axis]]
            })
            .collect();
        let mut side = [0.0f64; 2];
        for i in 0..raw.len() {
            side[usize::from(raw.walker(i)[e * block + axis] > 0.0)] += raw.weights[i];
        }
        for upper in [true, false] {
            let Some(peak) = lobe_core(&points, &density.weights, upper, bandwidth) else {
                continue;
            };
            let mut position = [0.0; 3];
            position[0] = peak[0];
            position[axis] = peak[1];
            if block == 3 {
                let (mut num, mut den) = (0.0, 0.0);
                for (i, p) in points.iter().enumerate() {
                    if (p[1] > 0.0) == upper {
                        num += density.weights[i] * density.walker(i)[e * block + 1];
                        den += density.weights[i];
                    }
                }
                position[1] = num / den;
            }
            out.push(LobeCenter {
                electron: e + 1,
                upper,
                position,
                population: side[usize::from(upper)],
            });
        }
    }
    Ok(out)
}

/// Blocked fraction of samples satisfying `pred`, one block per sampled
/// generation.
fn fraction(samples: &WalkerEnsemble, per_generation: usize, pred: impl Fn(&[f64]) -> bool) -> Estimate {
    let flags: Vec<f64> = (0..samples.len())
        .map(|i| f64::from(u8::from(pred(samples.walker(i)))))
        .collect();
    let means: Vec<f64> = flags
        .chunks(per_generation.max(1))
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    blocking_estimate(&means)
}

/// DMC at the zero-angular-coefficient point, seeded on the classical
/// equilibria. Walkers are split evenly over every seed and its electron
/// exchange, so the initial cloud is exchange-symmetric.
pub fn run_dmc(params: &FieldParams, cfg: &DmcConfig) -> Result<DmcResult> {
    let pot = RotatingFramePotential::new(*params)?;
    cfg.validate()?;
    let seeds = seed_equilibria(params)?;
    let mut centers = Vec::new();
    for eq in &seeds {
        centers.push(eq.config.to_vec());
        centers.push(eq.config.swapped().to_vec());
    }
    let spread = cfg.box_hint.unwrap_or_else(|| {
        let smallest = seeds
            .iter()
            .map(|e| e.config.separation())
            .fold(f64::INFINITY, f64::min);
        smallest / 10.0
    });
    let guide = cfg.guide_width.map(|width| GaussianGuide {
        centers: centers.clone(),
        width,
    });
    let run = run_potential(&pot, &centers, spread, cfg, guide.as_ref())?;

    let block = params.dims.count();
    let density = symmetrize(&run.samples);
    let bandwidth = cfg.mode_bandwidth.unwrap_or(0.5 * spread);
    let lobe_centers = lobe_centers(&density, &run.samples, bandwidth)?;
    let per_generation = cfg.samples_per_generation;
    let upper_fraction = fraction(&run.samples, per_generation, |w| w[block - 1] > w[2 * block - 1]);
    let mirror_fraction = fraction(&run.samples, per_generation, |w| w[block - 1] > 0.0);

    let mut root_matches = Vec::new();
    for (root_index, eq) in seeds.iter().enumerate() {
        let Some(a) = eq.side_length else { continue };
        let x0 = -0.5 * 3f64.sqrt() * a;
        let relative_error = lobe_centers
            .iter()
            .map(|c| {
                let z = if c.upper { 0.5 * a } else { -0.5 * a };
                let d = [c.position[0] - x0, c.position[1], c.position[2] - z];
                (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() / a
            })
            .fold(0.0, f64::max);
        root_matches.push(RootMatch {
            root_index,
            side_length: a,
            relative_error,
        });
    }
    root_matches.sort_by(|a, b| a.relative_error.total_cmp(&b.relative_error));
    let seed_potentials = seeds
        .iter()
        .map(|e| model::potential(&e.config, params))
        .collect::<Result<Vec<_>>>()?;

    Ok(DmcResult {
        params: *params,
        config: cfg.clone(),
        energy: run.energy,
        seeds,
        seed_potentials,
        density,
        lobe_centers,
        upper_fraction,
        mirror_fraction,
        root_matches,
        run,
    })
}
