//! Acceptance criteria, one line per criterion.
//!
//! Runs as a plain binary: `cargo test --release --test acceptance [N ...]`
//! restricts the run to the listed criteria.

use std::f64::consts::PI;
use std::time::Instant;

use langmuir::dmc::{self, DecoupledOscillators, DmcConfig, Hydrogenic};
use langmuir::dynamics::{integrate, propagate, rotation_period, IntegrationControl};
use langmuir::equilibria::{
    self, langmuir_config, langmuir_cubic, langmuir_equilibria, refine, CollinearVariant, Equilibrium,
};
use langmuir::model::hamiltonian;
use langmuir::stability::{analyze, finite_difference_jacobian, linearization, scan, Grid, ScanSpec};
use langmuir::units::{self, from_scaled, lab_hamiltonian, to_scaled, DotParams, LabParams, UnitScale};
use langmuir::{Branch, Configuration, Dims, FieldParams, PhaseState};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64Mcg;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn reference_field() -> FieldParams {
    FieldParams::helium(0.5, 0.1235 / 0.0370f64.powf(4.0 / 3.0), Branch::Minus)
}

fn criterion_1() -> Verdict {
    let mut roots = 0;
    let mut worst = 0.0f64;
    let mut failures = 0;
    for branch in [Branch::Plus, Branch::Minus] {
        for &w in &linspace(0.2, 3.0, 20) {
            for &e in &linspace(0.0, 2.0, 20) {
                let params = FieldParams::helium(w, e, branch);
                for a in langmuir_cubic(&params).unwrap() {
                    roots += 1;
                    // start off the triangle so Newton has to do the work
                    let mut guess = langmuir_config(a, &params).unwrap().config;
                    let kick = [[1.0, -0.6, 0.3], [-0.4, 0.8, -0.7]];
                    for (p, k) in guess.positions.iter_mut().zip(kick) {
                        for (x, d) in p.iter_mut().zip(k) {
                            *x += 1e-3 * a * d;
                        }
                    }
                    match refine(&guess, &params) {
                        Ok(eq) => {
                            let c = eq.config;
                            let err = [c.radius(0), c.radius(1), c.separation()]
                                .iter()
                                .fold(0.0f64, |m, r| m.max((r - a).abs() / a));
                            worst = worst.max(err);
                            if err > 1e-8 {
                                failures += 1;
                            }
                        }
                        Err(_) => failures += 1,
                    }
                }
            }
        }
    }
    verdict(
        failures == 0 && roots > 0,
        format!("{roots} roots refined, worst relative side mismatch {worst:.2e}, {failures} failures"),
    )
}

fn criterion_2() -> Verdict {
    let mut found: Vec<(FieldParams, Equilibrium, &str)> = Vec::new();
    for branch in [Branch::Plus, Branch::Minus] {
        for &w in &linspace(0.3, 2.8, 6) {
            for &e in &linspace(0.1, 2.0, 4) {
                let params = FieldParams::helium(w, e, branch);
                for eq in langmuir_equilibria(&params).unwrap() {
                    found.push((params, eq, "I"));
                }
                for (variant, label) in [(CollinearVariant::A, "IIIa"), (CollinearVariant::B, "IIIb")] {
                    for eq in equilibria::type3_all(&params, variant).unwrap_or_default() {
                        found.push((params, eq, label));
                    }
                }
            }
        }
    }
    // Type II is planar; pick the field that makes each angle an equilibrium
    for branch in [Branch::Plus, Branch::Minus] {
        for &w in &linspace(0.6, 2.8, 4) {
            for angle in [PI / 2.0, 2.0 * PI / 3.0, 0.8 * PI, PI] {
                let Ok((e, _)) = equilibria::transverse_field_for_angle(w, branch, 2.0, angle) else {
                    continue;
                };
                let params = FieldParams::helium(w, e, branch).with_dims(Dims::Two);
                if let Ok(eq) = equilibria::type2_config(&params, angle) {
                    found.push((params, eq, "II"));
                }
            }
        }
    }
    let mut worst = 0.0f64;
    let mut labels = std::collections::BTreeMap::new();
    for (params, eq, label) in &found {
        let s = linearization(eq, params).unwrap();
        let fd = finite_difference_jacobian(&eq.state(), params, 1e-5);
        worst = worst.max((&s.entries - fd).amax());
        *labels.entry(*label).or_insert(0) += 1;
    }
    verdict(
        found.len() >= 50 && labels.len() == 4 && worst < 1e-6,
        format!("{} equilibria {labels:?}, max |S - J_fd| = {worst:.2e}", found.len()),
    )
}

fn criterion_3() -> Verdict {
    let grid = |branch| {
        let spec = ScanSpec::langmuir(
            Grid::new(0.2, 3.0, 60).unwrap(),
            Grid::new(0.0, 2.0, 60).unwrap(),
            branch,
        );
        let map = scan(&spec).unwrap();
        let below = map.stable_cells().filter(|c| c.omega < 1.0).count();
        let above = map.stable_cells().filter(|c| c.omega > 1.0).count();
        (below, above)
    };
    let (plus_below, plus_above) = grid(Branch::Plus);
    let (minus_below, minus_above) = grid(Branch::Minus);
    let a = plus_above == 0;
    let b = minus_above > 0 && minus_below == 0;
    verdict(
        a && b,
        format!(
            "(a) branch +1 stable cells with omega > 1: {plus_above} [{}] (omega < 1: {plus_below}); \
             (b) branch -1 stable cells omega > 1: {minus_above}, omega < 1: {minus_below} [{}]",
            if a { "ok" } else { "violated" },
            if b { "ok" } else { "violated" },
        ),
    )
}

struct Probe {
    stable: bool,
    bounded: bool,
    max_real_part: f64,
    growth: Option<f64>,
    energy_drift: f64,
    reversal: f64,
}

/// Perturb along a fixed generic direction, follow for 100 periods (or until
/// the deviation reaches 100x the kick) and measure the growth rate from the
/// deviation envelope between 3x and 30x.
fn probe(params: &FieldParams, eq: &Equilibrium) -> Probe {
    let report = analyze(eq, params).unwrap();
    let amp = 1e-4;
    let direction = [0.7, -0.3, 1.0, -0.9, 0.5, -0.2];
    let mut start = eq.state();
    for (e, pos) in start.config.positions.iter_mut().enumerate() {
        for k in 0..3 {
            pos[k] += amp * direction[3 * e + k];
        }
    }
    let period = rotation_period(params.omega);
    let control = IntegrationControl {
        deviation_stop: Some(100.0 * amp),
        ..IntegrationControl::default()
    };
    let traj = integrate(&start, params, 100.0 * period, &control).unwrap();
    let dev: Vec<(f64, f64)> = traj
        .samples
        .iter()
        .map(|s| (s.t, dynamics_offset(&s.state.config, &eq.config)))
        .collect();
    let bounded = dev.iter().all(|(_, d)| *d <= 10.0 * amp);
    let first = |level: f64| dev.iter().find(|(_, d)| *d >= level).map(|(t, _)| *t);
    let growth = match (first(3.0 * amp), first(30.0 * amp)) {
        (Some(t1), Some(t2)) if t2 > t1 => Some(10f64.ln() / (t2 - t1)),
        _ => None,
    };
    let span = traj.duration();
    let ctl = IntegrationControl::default();
    let fwd = propagate(&start, params, span, &ctl).unwrap();
    let back = propagate(&fwd, params, -span, &ctl).unwrap();
    Probe {
        stable: report.stable,
        bounded,
        max_real_part: report.max_real_part,
        growth,
        energy_drift: traj.energy_drift,
        reversal: max_abs_diff(&start.to_phase_vec(), &back.to_phase_vec()),
    }
}

fn dynamics_offset(a: &Configuration, b: &Configuration) -> f64 {
    langmuir::dynamics::position_offset(a, b)
}

/// Langmuir equilibria over a coarse grid: every stable one found and the
/// unstable ones whose growth is resolvable within 100 periods.
fn criterion_4_points() -> Vec<(FieldParams, Equilibrium)> {
    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    for branch in [Branch::Minus, Branch::Plus] {
        for &w in &linspace(0.3, 2.7, 9) {
            for &e in &linspace(0.2, 1.8, 5) {
                let params = FieldParams::helium(w, e, branch);
                for eq in langmuir_equilibria(&params).unwrap() {
                    let report = analyze(&eq, &params).unwrap();
                    let horizon = 100.0 * rotation_period(w);
                    if report.stable {
                        stable.push((params, eq));
                    } else if report.max_real_part * horizon > 20.0 {
                        unstable.push((params, eq));
                    }
                }
            }
        }
    }
    let take = |v: Vec<(FieldParams, Equilibrium)>, n: usize| {
        let step = (v.len() / n).max(1);
        v.into_iter().step_by(step).take(n).collect::<Vec<_>>()
    };
    let mut points = take(stable, 8);
    points.extend(take(unstable, 16));
    points.push((reference_field(), langmuir_equilibria(&reference_field()).unwrap()[1]));
    points
}

fn criteria_4_and_5() -> (Verdict, Verdict) {
    let points = criterion_4_points();
    let probes: Vec<Probe> = points.iter().map(|(p, eq)| probe(p, eq)).collect();
    let n_stable = probes.iter().filter(|p| p.stable).count();
    let agree = probes.iter().filter(|p| p.stable == p.bounded).count();
    let mut worst_ratio = 1.0f64;
    let mut rate_fail = 0;
    for p in probes.iter().filter(|p| !p.stable) {
        match p.growth {
            Some(g) => {
                let r = (g / p.max_real_part).max(p.max_real_part / g);
                worst_ratio = worst_ratio.max(r);
                if r > 3.0 {
                    rate_fail += 1;
                }
            }
            None => rate_fail += 1,
        }
    }
    let c4 = verdict(
        probes.len() >= 20 && n_stable >= 5 && agree == probes.len() && rate_fail == 0,
        format!(
            "{} points ({n_stable} stable), verdict/dynamics agreement {agree}/{}, worst growth-rate ratio {worst_ratio:.2}, {rate_fail} rates off",
            probes.len(),
            probes.len()
        ),
    );
    let drift = probes.iter().fold(0.0f64, |m, p| m.max(p.energy_drift));
    let reversal = probes.iter().fold(0.0f64, |m, p| m.max(p.reversal));
    let c5 = verdict(
        drift < 1e-9 && reversal < 1e-7,
        format!("max relative energy drift {drift:.2e}, max time-reversal error {reversal:.2e}"),
    );
    (c4, c5)
}

fn criterion_6() -> Verdict {
    let omega = 0.5;
    let count = |e: f64| {
        langmuir_cubic(&FieldParams::helium(omega, e, Branch::Minus))
            .unwrap()
            .len()
    };
    let (mut lo, mut hi) = (0.0, 2.0);
    let transitions = (count(lo), count(hi));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count(mid) < 2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // discriminant of k a^3 + b a^2 - 1 vanishes at 4 b^3 = 27 k^2
    let k = 0.5 * (omega * omega - omega);
    let oracle = 3f64.sqrt() * 3.0 * (k * k / 4.0).powf(1.0 / 3.0);
    let mut verified = true;
    for e in [oracle - 1e-3, oracle + 1e-3] {
        let params = FieldParams::helium(omega, e, Branch::Minus);
        for a in langmuir_cubic(&params).unwrap() {
            let guess = langmuir_config(a, &params).unwrap().config;
            verified &= equilibria::cubic_residual(&params, a) < 1e-12
                && refine(&guess, &params).is_ok_and(|eq| (eq.size() - a).abs() < 1e-8 * a);
        }
    }
    let below = count(oracle - 1e-3);
    let above = count(oracle + 1e-3);
    verdict(
        transitions.1 == 2
            && below < 2
            && above == 2
            && (lo - oracle).abs() < 1e-9
            && (oracle - 0.819).abs() < 1e-3
            && verified,
        format!(
            "roots: {below} below, {above} above; critical epsilon {lo:.6} (discriminant {oracle:.6}); refined: {verified}"
        ),
    )
}

fn dmc_config(dt: f64, equilibration: usize, accumulation: usize, seed: u64) -> DmcConfig {
    DmcConfig {
        walker_target: 10_000,
        time_step: dt,
        equilibration_steps: equilibration,
        accumulation_steps: accumulation,
        seed,
        ..DmcConfig::default()
    }
}

fn criterion_7() -> Verdict {
    let ho = DecoupledOscillators { electrons: 2 };
    let exact_ho = ho.exact_energy();
    let start = [vec![0.0; 6]];
    let ho_a = dmc::run_potential(&ho, &start, 1.0, &dmc_config(0.05, 500, 2000, 1), None)
        .unwrap()
        .energy;
    let ho_b = dmc::run_potential(&ho, &start, 1.0, &dmc_config(0.025, 1000, 4000, 2), None)
        .unwrap()
        .energy;

    let h = Hydrogenic { charge: 2.0 };
    let start = [vec![0.3, 0.0, 0.0]];
    let h_a = dmc::run_potential(&h, &start, 0.3, &dmc_config(0.002, 2000, 5000, 3), None)
        .unwrap()
        .energy;
    let h_b = dmc::run_potential(&h, &start, 0.3, &dmc_config(0.001, 4000, 10000, 4), None)
        .unwrap()
        .energy;

    let within =
        |e: &dmc::Estimate, exact: f64| (e.value - exact).abs() <= 0.01 * exact.abs() && e.error <= 0.01 * exact.abs();
    let halving = |a: &dmc::Estimate, b: &dmc::Estimate| (a.value - b.value).abs() < 2.0 * a.error.hypot(b.error);
    let ok = within(&ho_a, exact_ho)
        && within(&ho_b, exact_ho)
        && within(&h_a, -2.0)
        && within(&h_b, -2.0)
        && halving(&ho_a, &ho_b)
        && halving(&h_a, &h_b);
    verdict(
        ok,
        format!(
            "oscillator {ho_a} / {ho_b} (exact {exact_ho}); hydrogenic {h_a} / {h_b} (exact -2); halving shifts {:.1e}, {:.1e}",
            (ho_a.value - ho_b.value).abs(),
            (h_a.value - h_b.value).abs()
        ),
    )
}

fn criterion_8() -> Verdict {
    let params = reference_field();
    let cfg = DmcConfig {
        walker_target: 10_000,
        time_step: 0.5,
        equilibration_steps: 10_000,
        accumulation_steps: 20_000,
        seed: 1,
        ..DmcConfig::default()
    };
    let clock = Instant::now();
    let result = dmc::run_dmc(&params, &cfg).unwrap();
    let elapsed = clock.elapsed().as_secs_f64();
    // expected lobes from the cubic, independent of the seeds used by the run
    let roots = langmuir_cubic(&params).unwrap();
    let errors: Vec<f64> = roots
        .iter()
        .map(|&a| {
            result
                .lobe_centers
                .iter()
                .map(|c| {
                    let z = if c.upper { 0.5 * a } else { -0.5 * a };
                    let d = [c.position[0] + 0.5 * 3f64.sqrt() * a, c.position[1], c.position[2] - z];
                    d.iter().map(|v| v * v).sum::<f64>().sqrt() / a
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let (best, err) = errors
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, e)| (i, *e))
        .unwrap();
    let mirrored = result.lobe_centers.chunks(2).all(|pair| {
        let [u, l] = [pair[0].position, pair[1].position];
        (u[0] - l[0]).abs() < 1e-9 && (u[2] + l[2]).abs() < 1e-9 && u[2] > 0.0
    });
    let raw = result.samples();
    let mut up = 0.0;
    for i in 0..raw.len() {
        let w = raw.walker(i);
        up += raw.weights[i] * (f64::from(u8::from(w[2] > 0.0)) + f64::from(u8::from(w[5] > 0.0)));
    }
    let raw_up = up / (2.0 * raw.total_weight());
    let reported = result.matched_root().map(|m| m.root_index);
    let upper = result
        .lobe_centers
        .iter()
        .find(|c| c.electron == 1 && c.upper)
        .unwrap()
        .position;
    verdict(
        err <= 0.1 && mirrored && (raw_up - 0.5).abs() < 0.05 && reported == Some(best) && elapsed <= 1800.0,
        format!(
            "E = {}, upper lobe ({:.3}, {:.3}, {:.3}) vs root {best} a = {:.4}: offset {:.2}% of a; \
             raw electrons above plane {raw_up:.3}; matched root reported {reported:?}; {elapsed:.0} s",
            result.energy,
            upper[0],
            upper[1],
            upper[2],
            roots[best],
            100.0 * err
        ),
    )
}

fn criterion_9() -> Verdict {
    let mut rng = Pcg64Mcg::seed_from_u64(9);
    let mut round_trip = 0.0f64;
    let mut coefficient = 0.0f64;
    for _ in 0..2000 {
        let wc = rng.random_range(1e-3..5.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let lab = LabParams {
            cp_frequency: rng.random_range(1e-3..2.0),
            cp_strength: rng.random_range(-3.0..3.0),
            cyclotron_frequency: wc,
        };
        let scaled = to_scaled(&lab).unwrap();
        let back = from_scaled(&scaled.params, wc).unwrap();
        round_trip = round_trip
            .max((back.cp_frequency / lab.cp_frequency - 1.0).abs())
            .max((back.cp_strength - lab.cp_strength).abs() / lab.cp_strength.abs().max(1e-300));
        let again = to_scaled(&back).unwrap().params;
        round_trip = round_trip
            .max((again.omega / scaled.params.omega - 1.0).abs())
            .max((again.epsilon - scaled.params.epsilon).abs() / scaled.params.epsilon.abs().max(1e-300));

        let u = UnitScale::for_cyclotron(wc);
        let mut v = || [(); 3].map(|_| rng.random_range(-4.0..4.0));
        let (r1, r2, p1, p2) = (v(), v(), v(), v());
        let state = PhaseState::new(Configuration::new(Dims::Three, [r1, r2]), [p1, p2]);
        if state.config.min_distance() < 0.1 {
            continue;
        }
        let h = hamiltonian(&state, &scaled.params).unwrap();
        let s = |x: [f64; 3], f: f64| x.map(|c| c * f);
        let h_lab = lab_hamiltonian(
            &[s(r1, u.length), s(r2, u.length)],
            &[s(p1, u.momentum), s(p2, u.momentum)],
            &lab,
            2.0,
        );
        coefficient = coefficient.max((h_lab - u.energy * h).abs() / h_lab.abs().max(u.energy));
    }
    verdict(
        round_trip < 1e-12 && coefficient < 1e-10,
        format!("round trip {round_trip:.2e}, lab vs scaled Hamiltonian {coefficient:.2e}"),
    )
}

/// Newton on the unmapped SI force balance, in nm, with a finite-difference
/// Jacobian.
fn force_balance(dot: &DotParams, mut q: [f64; 4]) -> Option<[f64; 4]> {
    let f = |q: &[f64; 4]| {
        let forces = units::dot_forces_si(dot, &[[q[0] * 1e-9, q[1] * 1e-9], [q[2] * 1e-9, q[3] * 1e-9]]);
        [forces[0][0], forces[0][1], forces[1][0], forces[1][1]]
    };
    for _ in 0..100 {
        let r = f(&q);
        let mut jac = nalgebra::Matrix4::zeros();
        for j in 0..4 {
            let h = 1e-6 * q[j].abs().max(1.0);
            let (mut a, mut b) = (q, q);
            a[j] += h;
            b[j] -= h;
            let (fa, fb) = (f(&a), f(&b));
            for i in 0..4 {
                jac[(i, j)] = (fa[i] - fb[i]) / (2.0 * h);
            }
        }
        let step = jac.lu().solve(&nalgebra::Vector4::from(r))?;
        for k in 0..4 {
            q[k] -= step[k];
        }
        if step.amax() < 1e-10 {
            return Some(q);
        }
    }
    None
}

fn criterion_10() -> Verdict {
    let mut lines = Vec::new();
    let mut closed = true;
    let mut any = false;
    let mut target_match = false;
    for (mass, kappa) in [(0.01, 25.0), (0.067, 12.9)] {
        let dot = DotParams::example(mass, kappa);
        let (params, report) = units::dot_effective_units(&dot).unwrap();
        let nm = report.scaled_length_nm;
        let found = equilibria::type3_all(&params, CollinearVariant::A).unwrap_or_default();
        if found.is_empty() {
            lines.push(format!("m*={mass}, kappa={kappa}: no Type IIIa equilibrium"));
            continue;
        }
        for eq in found {
            let p = eq.config.positions;
            let mapped = [p[0][0] * nm, p[0][1] * nm, p[1][0] * nm, p[1][1] * nm];
            let Some(si) = force_balance(&dot, mapped.map(|x| 1.05 * x)) else {
                closed = false;
                lines.push(format!("m*={mass}, kappa={kappa}: force balance did not converge"));
                continue;
            };
            any = true;
            let err = (0..4).map(|k| (si[k] - mapped[k]).abs()).fold(0.0, f64::max)
                / mapped.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            closed &= err <= 0.05;
            let radii = [mapped[0].hypot(mapped[1]), mapped[2].hypot(mapped[3])];
            let (small, large) = (radii[0].min(radii[1]), radii[0].max(radii[1]));
            let hit = (small / 62.72 - 1.0).abs() < 0.05 && (large / 98.0 - 1.0).abs() < 0.05;
            target_match |= hit;
            lines.push(format!(
                "m*={mass}, kappa={kappa}: radii {small:.2}/{large:.2} nm, closed-loop mismatch {:.1e}, target 62.72/98.00 nm {}",
                err,
                if hit { "achieved" } else { "not achieved" }
            ));
        }
    }
    verdict(
        any && closed,
        format!(
            "{}; target radii overall: {}",
            lines.join("; "),
            if target_match { "achieved" } else { "not achieved" }
        ),
    )
}

fn main() {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let want = |n: u32| only.is_empty() || only.contains(&n);
    let mut failed = 0;
    let mut report = |n: u32, v: Verdict, started: Instant| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n:>2}: {tag}  {} ({:.1} s)",
            v.detail,
            started.elapsed().as_secs_f64()
        );
        failed += u32::from(!v.pass);
    };
    let single: [(u32, fn() -> Verdict); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (6, criterion_6),
        (9, criterion_9),
        (10, criterion_10),
    ];
    for (n, f) in single {
        if want(n) {
            let t = Instant::now();
            report(n, f(), t);
        }
    }
    if want(4) || want(5) {
        let t = Instant::now();
        let (c4, c5) = criteria_4_and_5();
        if want(4) {
            report(4, c4, t);
        }
        if want(5) {
            report(5, c5, t);
        }
    }
    for (n, f) in [(7, criterion_7 as fn() -> Verdict), (8, criterion_8)] {
        if want(n) {
            let t = Instant::now();
            report(n, f(), t);
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
