//! Linear stability of rotating-frame equilibria.
//!
//! The linearization `S` is the Jacobian of the canonical flow about an
//! equilibrium, on displacements ordered `[δp1, δp2, δq1, δq2]`:
//!
//! ```text
//! S = | A   -U'' |      A = |  0  c  0 |  per electron, c = ω + s/2
//!     | I    A   |          | -c  0  0 |
//!                           |  0  0  0 |
//! ```
//!
//! with `U''` the Hessian of the bare potential (Coulomb, field and the
//! `ρ²/8` diamagnetic term). An equilibrium of the rotating frame is at best
//! marginally stable, so the verdict is `max |Re λ| < tolerance`.

use std::fmt;
use std::io::Write;

use nalgebra::linalg::balancing::balance_parlett_reinsch;
use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibria::{self, CollinearVariant, Equilibrium, EquilibriumClass};
use crate::error::{Error, Result};
use crate::model::{self, PhaseState};
use crate::units::{Branch, Dims, FieldParams};

/// Largest ZVS gradient accepted by [`linearization`].
pub const LINEARIZATION_RESIDUAL: f64 = 1e-8;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizationMatrix {
    pub dims: Dims,
    pub entries: DMatrix<f64>,
}

impl LinearizationMatrix {
    /// Phase-space dimension, `4·dims`.
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    fn half(&self) -> usize {
        self.size() / 2
    }

    pub fn momentum_block(&self) -> DMatrix<f64> {
        let h = self.half();
        self.entries.view((0, 0), (h, h)).into_owned()
    }

    /// Upper-right block, `-U''`.
    pub fn coupling_block(&self) -> DMatrix<f64> {
        let h = self.half();
        self.entries.view((0, h), (h, h)).into_owned()
    }

    pub fn identity_block(&self) -> DMatrix<f64> {
        let h = self.half();
        self.entries.view((h, 0), (h, h)).into_owned()
    }

    pub fn coordinate_block(&self) -> DMatrix<f64> {
        let h = self.half();
        self.entries.view((h, h), (h, h)).into_owned()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }
}

/// Assemble `S` at an equilibrium.
pub fn linearization(eq: &Equilibrium, params: &FieldParams) -> Result<LinearizationMatrix> {
    let residual = model::zvs_gradient(&eq.config, params)?.amax();
    if residual > LINEARIZATION_RESIDUAL {
        return Err(Error::NotEquilibrium {
            residual,
            tolerance: LINEARIZATION_RESIDUAL,
        });
    }
    let dims = eq.config.dims;
    let n = dims.count();
    let h = 2 * n;
    let c = params.angular_coefficient();
    let u2 = model::potential_hessian(&eq.config, params)?;

    let mut s = DMatrix::zeros(2 * h, 2 * h);
    for offset in [0, h] {
        for e in 0..2 {
            let b = offset + e * n;
            s[(b, b + 1)] = c;
            s[(b + 1, b)] = -c;
        }
    }
    s.view_mut((0, h), (h, h)).copy_from(&(-u2));
    s.view_mut((h, 0), (h, h)).fill_with_identity();
    Ok(LinearizationMatrix { dims, entries: s })
}

/// Central-difference Jacobian of the flow at `state`.
pub fn finite_difference_jacobian(state: &PhaseState, params: &FieldParams, step: f64) -> DMatrix<f64> {
    let dims = state.dims();
    let z0 = state.to_phase_vec();
    let m = z0.len();
    let mut jac = DMatrix::zeros(m, m);
    let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
    for j in 0..m {
        let mut z = z0.clone();
        z[j] = z0[j] + step;
        model::flow_rhs(params, dims, &z, &mut plus);
        z[j] = z0[j] - step;
        model::flow_rhs(params, dims, &z, &mut minus);
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    jac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex<f64>> for Eigenvalue {
    fn from(z: Complex<f64>) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl Eigenvalue {
    fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    fn dist(&self, re: f64, im: f64) -> f64 {
        (self.re - re).hypot(self.im - im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub eigenvalues: Vec<Eigenvalue>,
    /// Largest `|Re λ|`.
    pub max_real_part: f64,
    pub stable: bool,
    pub tolerance: f64,
    /// Worst distance from `-λ` or `λ*` to the nearest computed eigenvalue,
    /// relative to `max(1, max |λ|)`.
    pub symmetry_defect: f64,
    pub symmetric: bool,
}

impl StabilityReport {
    /// Eigenvalues sorted by modulus; the first `count` are the near-zero ones.
    pub fn smallest(&self, count: usize) -> Vec<Eigenvalue> {
        let mut v = self.eigenvalues.clone();
        v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        v.truncate(count);
        v
    }

    /// Imaginary parts of the upper-half-plane eigenvalues: the normal-mode
    /// frequencies when the equilibrium is stable.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut f: Vec<f64> = self.eigenvalues.iter().filter(|e| e.im > 0.0).map(|e| e.im).collect();
        f.sort_by(f64::total_cmp);
        f
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} (max |Re λ| = {:.3e}, tolerance {:.0e}, symmetry defect {:.1e})",
            if self.stable { "stable" } else { "unstable" },
            self.max_real_part,
            self.tolerance,
            self.symmetry_defect
        )?;
        for e in &self.eigenvalues {
            writeln!(f, "  {:+.10e} {:+.10e}i", e.re, e.im)?;
        }
        Ok(())
    }
}

/// Eigenvalues of a real square matrix, computed after balancing.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Eigenvalue>> {
    let mut balanced = m.clone();
    balance_parlett_reinsch(&mut balanced);
    let schur = nalgebra::Schur::try_new(balanced, 1e-15, 100_000).ok_or_else(|| {
        let svd = m.clone().svd(false, false);
        Error::Eigen(format!(
            "Schur iteration failed to converge; condition number {:.3e}",
            svd.singular_values.max() / svd.singular_values.min()
        ))
    })?;
    Ok(schur.complex_eigenvalues().iter().map(|&z| z.into()).collect())
}

/// Classify with the default tolerance.
pub fn classify(s: &LinearizationMatrix) -> Result<StabilityReport> {
    classify_with(s, DEFAULT_TOLERANCE)
}

pub fn classify_with(s: &LinearizationMatrix, tolerance: f64) -> Result<StabilityReport> {
    let eigenvalues = eigenvalues(&s.entries)?;
    let max_real_part = eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.re.abs()));
    let symmetry_defect = quartet_defect(&eigenvalues);
    Ok(StabilityReport {
        max_real_part,
        stable: max_real_part < tolerance,
        tolerance,
        symmetric: symmetry_defect <= tolerance,
        symmetry_defect,
        eigenvalues,
    })
}

/// How far a spectrum is from being closed under `λ → -λ` and `λ → λ*`.
pub fn quartet_defect(eigenvalues: &[Eigenvalue]) -> f64 {
    let scale = eigenvalues.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    let nearest = |re: f64, im: f64| eigenvalues.iter().map(|e| e.dist(re, im)).fold(f64::INFINITY, f64::min);
    eigenvalues
        .iter()
        .map(|e| nearest(-e.re, -e.im).max(nearest(e.re, -e.im)))
        .fold(0.0, f64::max)
        / scale
}

/// Linearize and classify an equilibrium.
pub fn analyze(eq: &Equilibrium, params: &FieldParams) -> Result<StabilityReport> {
    classify(&linearization(eq, params)?)
}

/// Evenly spaced axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        let g = Self { start, stop, count };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) || self.stop <= self.start {
            return Err(Error::InvalidInput(format!(
                "grid needs start < stop, got {}:{}",
                self.start, self.stop
            )));
        }
        if self.count < 2 {
            return Err(Error::InvalidInput(format!(
                "grid resolution must be at least 2, got {}",
                self.count
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }
}

impl std::str::FromStr for Grid {
    type Err = Error;

    /// `start:stop:count`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidInput(format!("expected start:stop:count, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].trim().parse().map_err(|_| bad())?;
        let stop = parts[1].trim().parse().map_err(|_| bad())?;
        let count = parts[2].trim().parse().map_err(|_| bad())?;
        Grid::new(start, stop, count)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

/// Verdict for one equilibrium in a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootVerdict {
    /// Side length for Type I, otherwise the larger electron radius.
    pub side_length: f64,
    pub max_real_part: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanCell {
    pub omega: f64,
    pub epsilon: f64,
    /// Empty when no equilibrium exists.
    pub roots: Vec<RootVerdict>,
    /// Failures met while processing this cell.
    pub errors: Vec<String>,
}

impl ScanCell {
    pub fn any_stable(&self) -> bool {
        self.roots.iter().any(|r| r.stable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub omega_axis: Vec<f64>,
    pub epsilon_axis: Vec<f64>,
    pub branch: Branch,
    pub class: String,
    pub dims: usize,
    pub tolerance: f64,
    /// Row-major: ω outer, ε inner.
    pub cells: Vec<ScanCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MapSummary<'a> {
    pub omega_axis: &'a [f64],
    pub epsilon_axis: &'a [f64],
    pub branch: String,
    pub class: &'a str,
    pub dims: usize,
    pub tolerance: f64,
    pub cells: usize,
    pub cells_with_equilibria: usize,
    pub stable_cells: usize,
    pub failed_cells: usize,
    pub stable_omega_range: Option<(f64, f64)>,
}

impl StabilityMap {
    pub fn cell(&self, i_omega: usize, i_epsilon: usize) -> &ScanCell {
        &self.cells[i_omega * self.epsilon_axis.len() + i_epsilon]
    }

    pub fn stable_cells(&self) -> impl Iterator<Item = &ScanCell> {
        self.cells.iter().filter(|c| c.any_stable())
    }

    pub fn summary(&self) -> MapSummary<'_> {
        let stable: Vec<f64> = self.stable_cells().map(|c| c.omega).collect();
        let range = stable
            .iter()
            .copied()
            .fold(None, |acc: Option<(f64, f64)>, w| match acc {
                None => Some((w, w)),
                Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
            });
        MapSummary {
            omega_axis: &self.omega_axis,
            epsilon_axis: &self.epsilon_axis,
            branch: self.branch.to_string(),
            class: &self.class,
            dims: self.dims,
            tolerance: self.tolerance,
            cells: self.cells.len(),
            cells_with_equilibria: self.cells.iter().filter(|c| !c.roots.is_empty()).count(),
            stable_cells: stable.len(),
            failed_cells: self.cells.iter().filter(|c| !c.errors.is_empty()).count(),
            stable_omega_range: range,
        }
    }

    /// One row per root per cell; cells without equilibria get one row with
    /// empty root fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "omega,epsilon,branch,root_index,side_length,max_real_part,stable")?;
        for cell in &self.cells {
            if cell.roots.is_empty() {
                writeln!(out, "{},{},{},,,,", cell.omega, cell.epsilon, self.branch)?;
            }
            for (i, r) in cell.roots.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{:e},{}",
                    cell.omega,
                    cell.epsilon,
                    self.branch,
                    i,
                    r.side_length,
                    r.max_real_part,
                    u8::from(r.stable)
                )?;
            }
        }
        Ok(())
    }
}

/// Equilibria of `class` at `params`.
pub fn equilibria_of_class(params: &FieldParams, class: &EquilibriumClass) -> Result<Vec<Equilibrium>> {
    match class {
        EquilibriumClass::Langmuir => equilibria::langmuir_equilibria(params),
        EquilibriumClass::Transverse { angle } => Ok(vec![equilibria::type2_config(params, *angle)?]),
        EquilibriumClass::CollinearSameSide => equilibria::type3_all(params, CollinearVariant::A),
        EquilibriumClass::CollinearOpposite => equilibria::type3_all(params, CollinearVariant::B),
        EquilibriumClass::Unclassified => Err(Error::InvalidInput("cannot scan an unclassified family".into())),
    }
}

fn scan_cell(params: FieldParams, class: &EquilibriumClass, tolerance: f64) -> ScanCell {
    let mut cell = ScanCell {
        omega: params.omega,
        epsilon: params.epsilon,
        roots: Vec::new(),
        errors: Vec::new(),
    };
    let found = match equilibria_of_class(&params, class) {
        Ok(v) => v,
        Err(Error::NotFound(_)) => Vec::new(),
        Err(e) => {
            cell.errors.push(e.to_string());
            Vec::new()
        }
    };
    for eq in found {
        let eq = match equilibria::refine(&eq.config, &params) {
            Ok(r) if r.class.same_kind(class) => r,
            _ => eq,
        };
        match linearization(&eq, &params).and_then(|s| classify_with(&s, tolerance)) {
            Ok(report) => cell.roots.push(RootVerdict {
                side_length: eq.size(),
                max_real_part: report.max_real_part,
                stable: report.stable,
            }),
            Err(e) => cell.errors.push(e.to_string()),
        }
    }
    cell
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub omega: Grid,
    pub epsilon: Grid,
    pub branch: Branch,
    pub class: EquilibriumClass,
    pub dims: Dims,
    pub charge: f64,
    pub tolerance: f64,
}

impl ScanSpec {
    pub fn langmuir(omega: Grid, epsilon: Grid, branch: Branch) -> Self {
        Self {
            omega,
            epsilon,
            branch,
            class: EquilibriumClass::Langmuir,
            dims: Dims::Three,
            charge: 2.0,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Stability map over an `(ω, ε)` grid. Cells run in parallel; the output
/// order is fixed by the grid indices.
pub fn scan(spec: &ScanSpec) -> Result<StabilityMap> {
    spec.omega.validate()?;
    spec.epsilon.validate()?;
    let omega_axis = spec.omega.points();
    let epsilon_axis = spec.epsilon.points();
    let ne = epsilon_axis.len();
    let cells = (0..omega_axis.len() * ne)
        .into_par_iter()
        .map(|idx| {
            let params = FieldParams {
                omega: omega_axis[idx / ne],
                epsilon: epsilon_axis[idx % ne],
                branch: spec.branch,
                dims: spec.dims,
                charge: spec.charge,
            };
            scan_cell(params, &spec.class, spec.tolerance)
        })
        .collect();
    Ok(StabilityMap {
        omega_axis,
        epsilon_axis,
        branch: spec.branch,
        class: spec.class.label().to_string(),
        dims: spec.dims.count(),
        tolerance: spec.tolerance,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibria::{langmuir_equilibria, type2_config};

    fn reference_params() -> FieldParams {
        FieldParams::helium(0.5, 0.1235 / 0.0370f64.powf(4.0 / 3.0), Branch::Minus)
    }

    #[test]
    fn matches_flow_jacobian() {
        let cases = [
            FieldParams::helium(1.0, 0.0, Branch::Plus),
            FieldParams::helium(1.7, 0.4, Branch::Minus),
            FieldParams::helium(0.5, 1.0, Branch::Minus),
            reference_params(),
        ];
        for params in cases {
            for eq in langmuir_equilibria(&params).unwrap() {
                let s = linearization(&eq, &params).unwrap();
                let fd = finite_difference_jacobian(&eq.state(), &params, 1e-5);
                let diff = (&s.entries - &fd).amax();
                assert!(diff < 1e-6, "{params:?}: {diff}");
            }
        }
    }

    #[test]
    fn block_pattern() {
        let params = FieldParams::helium(1.3, 0.2, Branch::Plus);
        let eq = langmuir_equilibria(&params).unwrap()[0];
        let s = linearization(&eq, &params).unwrap();
        assert_eq!(s.size(), 12);
        assert_eq!(s.identity_block(), DMatrix::identity(6, 6));
        assert_eq!(s.momentum_block(), s.coordinate_block());
        let a = s.momentum_block();
        assert_eq!(&a + a.transpose(), DMatrix::zeros(6, 6));
        assert_eq!(a[(0, 1)], 1.8);
        let u = s.coupling_block();
        assert_eq!(u, u.transpose());
        assert!(s.trace().abs() < 1e-10);
    }

    #[test]
    fn potential_system_at_half_rotation() {
        let params = reference_params();
        let eq = langmuir_equilibria(&params).unwrap()[1];
        let s = linearization(&eq, &params).unwrap();
        assert_eq!(s.momentum_block(), DMatrix::zeros(6, 6));
        let h = model::zvs_hessian(&eq.config, &params).unwrap();
        assert_eq!(s.coupling_block(), -h);
    }

    #[test]
    fn planar_matrix_is_eight_square() {
        let params = FieldParams::helium(1.2, 0.0, Branch::Plus).with_dims(Dims::Two);
        let eq = type2_config(&params, std::f64::consts::PI).unwrap();
        let s = linearization(&eq, &params).unwrap();
        assert_eq!(s.size(), 8);
        let fd = finite_difference_jacobian(&eq.state(), &params, 1e-5);
        assert!((&s.entries - fd).amax() < 1e-6);
    }

    #[test]
    fn rejects_non_equilibrium() {
        let params = FieldParams::helium(1.0, 0.0, Branch::Plus);
        let mut eq = langmuir_equilibria(&params).unwrap()[0];
        eq.config.positions[0][0] += 0.01;
        assert!(matches!(linearization(&eq, &params), Err(Error::NotEquilibrium { .. })));
    }

    #[test]
    fn reference_roots_verdicts() {
        let params = reference_params();
        let eqs = langmuir_equilibria(&params).unwrap();
        let inner = analyze(&eqs[0], &params).unwrap();
        let outer = analyze(&eqs[1], &params).unwrap();
        assert!(!inner.stable);
        assert!(outer.stable, "{outer}");
        assert!(outer.symmetric && inner.symmetric);
    }

    #[test]
    fn potential_minimum_is_stable_with_imaginary_spectrum() {
        // outer same-side pair, held by the ρ²/8 confinement at c = 0
        let params = FieldParams::helium(0.5, 2.0, Branch::Minus).with_dims(Dims::Two);
        let all = crate::equilibria::type3_all(&params, CollinearVariant::A).unwrap();
        let eq = all.last().unwrap();
        let h = model::zvs_hessian(&eq.config, &params).unwrap();
        assert!(h.symmetric_eigenvalues().min() > 1e-3);
        let report = analyze(eq, &params).unwrap();
        assert!(report.stable, "{report}");
        assert!(report.eigenvalues.iter().all(|e| e.re.abs() < 1e-10));
        // the inner pair of the same family is a saddle
        assert!(!analyze(&all[0], &params).unwrap().stable);
    }

    #[test]
    fn mirror_pair_at_half_rotation_is_a_saddle() {
        let params = FieldParams::helium(0.5, 3.0, Branch::Minus).with_dims(Dims::Two);
        let eq = type2_config(&params, 0.2).unwrap();
        let h = model::zvs_hessian(&eq.config, &params).unwrap();
        assert!(h.symmetric_eigenvalues().min() < 0.0);
        assert!(!analyze(&eq, &params).unwrap().stable);
    }

    #[test]
    fn broken_symmetry_is_flagged() {
        let params = FieldParams::helium(1.7, 0.4, Branch::Minus);
        let eq = langmuir_equilibria(&params).unwrap()[0];
        let mut s = linearization(&eq, &params).unwrap();
        assert!(classify(&s).unwrap().symmetric);
        s.entries[(0, 0)] += 0.3;
        assert!(!classify(&s).unwrap().symmetric);
    }

    #[test]
    fn exchange_preserves_verdict() {
        for params in [reference_params(), FieldParams::helium(1.7, 0.4, Branch::Minus)] {
            for eq in langmuir_equilibria(&params).unwrap() {
                let a = analyze(&eq, &params).unwrap();
                let b = analyze(&eq.swapped(), &params).unwrap();
                assert_eq!(a.stable, b.stable);
                assert!((a.max_real_part - b.max_real_part).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_modes_without_field() {
        let params = FieldParams::helium(1.0, 0.0, Branch::Plus);
        let eq = langmuir_equilibria(&params).unwrap()[0];
        let s = linearization(&eq, &params).unwrap();
        // the zero eigenvalue is defective; its product of computed pair
        // members and the smallest singular value are the robust witnesses
        let pair = classify(&s).unwrap().smallest(2);
        assert!(pair[0].abs() * pair[1].abs() < 1e-8);
        let sv = s.entries.clone().svd(false, false).singular_values;
        assert!(sv.min() < 1e-8);
    }

    #[test]
    fn grid_parsing() {
        let g: Grid = "0.5:2:4".parse().unwrap();
        assert_eq!(g.points(), vec![0.5, 1.0, 1.5, 2.0]);
        assert!("1:0:3".parse::<Grid>().is_err());
        assert!("0:1:1".parse::<Grid>().is_err());
        assert!("0:1".parse::<Grid>().is_err());
    }

    #[test]
    fn smoke_scan() {
        let spec = ScanSpec::langmuir(
            Grid::new(0.5, 1.5, 2).unwrap(),
            Grid::new(0.0, 2.0, 2).unwrap(),
            Branch::Minus,
        );
        let map = scan(&spec).unwrap();
        assert_eq!(map.cells.len(), 4);
        assert_eq!(map.cell(1, 0).omega, 1.5);
        assert_eq!(map.cell(0, 1).epsilon, 2.0);
        // ω = 0.5, ε = 0: negative cubic coefficient and no field, no root
        assert!(map.cell(0, 0).roots.is_empty());
        let mut csv = Vec::new();
        map.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("omega,epsilon,branch,root_index,side_length,max_real_part,stable\n"));
        assert!(text.lines().count() >= 5);
    }

    #[test]
    fn scan_is_deterministic() {
        let spec = ScanSpec::langmuir(
            Grid::new(0.3, 2.0, 5).unwrap(),
            Grid::new(0.1, 3.0, 5).unwrap(),
            Branch::Minus,
        );
        assert_eq!(scan(&spec).unwrap(), scan(&spec).unwrap());
    }
}
