//! Command-line front end.
//!
//! Every subcommand accepts `--config FILE` with `key = value` lines (keys
//! are the long flag names with `_` for `-`). Flags win over the file, and
//! each override that changes a value is reported on stderr.
//!
//! Outputs go to `--output`, or to `<subcommand>.<ext>` inside
//! `$LANGMUIR_OUTPUT_DIR` (default: the working directory). Files are
//! written to a temporary sibling and renamed into place.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Display;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dmc::{self, DmcConfig, ElectronSelection, Plane};
use crate::dynamics::{self, IntegrationControl};
use crate::equilibria::{self, Equilibrium, EquilibriumClass};
use crate::error::{Error, Result};
use crate::model::{self, Configuration, PhaseState};
use crate::stability::{self, Grid, ScanSpec, StabilityReport};
use crate::units::{self, Branch, Dims, DotParams, DotReport, FieldParams, LabParams, UnitScale};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "LANGMUIR_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "langmuir",
    version,
    about = "Rotating-frame equilibria, stability maps, trajectories and DMC for two-electron Trojan wave packets"
)]
pub struct Cli {
    /// `key = value` file; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file (defaults to `<subcommand>.<ext>` in $LANGMUIR_OUTPUT_DIR).
    #[arg(long, short, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert between lab atomic units, scaled units and quantum-dot units.
    Units(UnitsArgs),
    /// Find equilibria and optionally their linear stability.
    Equilibrium(EquilibriumArgs),
    /// Stability map over an (omega, epsilon) grid.
    Scan(ScanArgs),
    /// Integrate a trajectory from an equilibrium or a given state.
    Integrate(IntegrateArgs),
    /// Diffusion Monte Carlo at omega = 1/2 on branch -1.
    Dmc(DmcArgs),
    /// Zero-velocity surface on a 2D slice of one electron's coordinates.
    ZvsSlice(ZvsSliceArgs),
}

/// Field parameters. Scaled units unless `--atomic-units` or `--dot`.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<f64>,
    /// +1 or -1.
    #[arg(long, allow_hyphen_values = true)]
    pub branch: Option<Branch>,
    /// 2 or 3.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Nuclear charge.
    #[arg(long)]
    pub charge: Option<f64>,
    /// Read --omega and --epsilon as lab atomic units; needs --cyclotron.
    #[arg(long)]
    pub atomic_units: bool,
    /// Signed cyclotron frequency, atomic units.
    #[arg(long, allow_hyphen_values = true)]
    pub cyclotron: Option<f64>,
    /// Derive the parameters from a quantum dot.
    #[arg(long)]
    pub dot: bool,
    /// Tesla.
    #[arg(long)]
    pub b_field: Option<f64>,
    #[arg(long)]
    pub effective_mass: Option<f64>,
    #[arg(long)]
    pub dielectric: Option<f64>,
    /// nm.
    #[arg(long)]
    pub confinement_radius: Option<f64>,
    /// Units of e.
    #[arg(long)]
    pub impurity_charge: Option<f64>,
    /// nm.
    #[arg(long)]
    pub impurity_displacement: Option<f64>,
}

#[derive(Debug, Args)]
pub struct UnitsArgs {
    #[command(flatten)]
    pub params: ParamArgs,
}

#[derive(Debug, Args)]
pub struct EquilibriumArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// langmuir, type2, type3a, type3b or all.
    #[arg(long)]
    pub class: Option<String>,
    /// Type II angle seed, radians.
    #[arg(long)]
    pub angle: Option<f64>,
    /// Attach the linear stability report.
    #[arg(long)]
    pub stability: bool,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// start:stop:count.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<Grid>,
    /// start:stop:count.
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: Option<Grid>,
    #[arg(long, allow_hyphen_values = true)]
    pub branch: Option<Branch>,
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub angle: Option<f64>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub charge: Option<f64>,
    /// Marginal-stability tolerance on |Re λ|.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Equilibrium family to start from.
    #[arg(long)]
    pub class: Option<String>,
    #[arg(long)]
    pub angle: Option<f64>,
    /// Index into the equilibria found.
    #[arg(long)]
    pub root: Option<usize>,
    /// Comma-separated positions; replaces the equilibrium start.
    #[arg(long, allow_hyphen_values = true)]
    pub positions: Option<String>,
    /// Comma-separated canonical momenta (default: at rest in the rotating frame).
    #[arg(long, allow_hyphen_values = true)]
    pub momenta: Option<String>,
    /// Position offset, max norm.
    #[arg(long)]
    pub perturb: Option<f64>,
    /// Comma-separated perturbation direction (default: all ones).
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// Duration in rotation periods.
    #[arg(long)]
    pub periods: Option<f64>,
    /// Duration in scaled time units; exclusive with --periods.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub samples_per_period: Option<usize>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
    /// Rotate the samples into the laboratory frame.
    #[arg(long)]
    pub lab_frame: bool,
}

#[derive(Debug, Args)]
pub struct DmcArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub walker_target: Option<usize>,
    #[arg(long)]
    pub time_step: Option<f64>,
    #[arg(long)]
    pub equilibration_steps: Option<usize>,
    #[arg(long)]
    pub accumulation_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub box_hint: Option<f64>,
    /// Enable a Gaussian guiding function of this width.
    #[arg(long)]
    pub guide_width: Option<f64>,
    #[arg(long)]
    pub mode_bandwidth: Option<f64>,
    /// Comma-separated list of xy, xz, yz.
    #[arg(long)]
    pub planes: Option<String>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Histogram the raw samples instead of the symmetrized ones.
    #[arg(long)]
    pub raw_density: bool,
}

#[derive(Debug, Args)]
pub struct ZvsSliceArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Coordinate plane of the moving electron: xy, xz or yz.
    #[arg(long)]
    pub plane: Option<Plane>,
    /// First coordinate, start:stop:count.
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<Grid>,
    /// Second coordinate, start:stop:count.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<Grid>,
    /// Moving electron, 1 or 2.
    #[arg(long)]
    pub electron: Option<usize>,
    /// Comma-separated position of the other electron.
    #[arg(long, allow_hyphen_values = true)]
    pub fixed: Option<String>,
    /// Value of the moving electron's out-of-plane coordinate.
    #[arg(long, allow_hyphen_values = true)]
    pub offset: Option<f64>,
}

/// Result of a successful command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// Flag-over-config overrides, one line each.
    pub notes: Vec<String>,
}

/// Config-file values layered under the command-line flags.
struct Resolver {
    source: String,
    file: BTreeMap<String, String>,
    used: Mutex<BTreeSet<String>>,
    notes: Mutex<Vec<String>>,
}

impl Resolver {
    fn empty() -> Self {
        Self {
            source: String::new(),
            file: BTreeMap::new(),
            used: Mutex::new(BTreeSet::new()),
            notes: Mutex::new(Vec::new()),
        }
    }

    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn parse(text: &str, source: &str) -> Result<Self> {
        let mut file = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Usage(format!(
                    "{source}:{}: expected `key = value`, got `{line}`",
                    n + 1
                )));
            };
            let key = key.trim().replace('-', "_");
            if file.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(Error::Usage(format!("{source}:{}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(Self {
            source: source.to_string(),
            ..Self::empty()
        })
        .map(|mut r| {
            r.file = file;
            r
        })
    }

    fn get<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + PartialEq + Display,
        T::Err: Display,
    {
        let from_file =
            match self.file.get(key) {
                Some(raw) => {
                    self.used.lock().unwrap().insert(key.to_string());
                    Some(raw.parse::<T>().map_err(|e| {
                        Error::Usage(format!("{}: key `{key}`: cannot parse `{raw}`: {e}", self.source))
                    })?)
                }
                None => None,
            };
        Ok(match (flag, from_file) {
            (Some(f), Some(c)) => {
                if f != c {
                    self.notes.lock().unwrap().push(format!(
                        "--{} {f} overrides {} value {c}",
                        key.replace('_', "-"),
                        self.source
                    ));
                }
                Some(f)
            }
            (f, c) => f.or(c),
        })
    }

    fn or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + PartialEq + Display,
        T::Err: Display,
    {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    fn required<T>(&self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + PartialEq + Display,
        T::Err: Display,
    {
        self.get(key, flag)?
            .ok_or_else(|| Error::Usage(format!("missing required option --{}", key.replace('_', "-"))))
    }

    fn switch(&self, key: &str, flag: bool) -> Result<bool> {
        Ok(self.get(key, flag.then_some(true))?.unwrap_or(false))
    }

    /// Rejects config keys no option consumed.
    fn finish(&self) -> Result<Vec<String>> {
        let used = self.used.lock().unwrap();
        if let Some(key) = self.file.keys().find(|k| !used.contains(*k)) {
            return Err(Error::Usage(format!(
                "{}: unknown key `{key}` for this subcommand",
                self.source
            )));
        }
        Ok(self.notes.lock().unwrap().clone())
    }
}

/// Parameter set and how it was obtained, embedded in every JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedParams {
    pub mode: &'static str,
    pub params: FieldParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lab: Option<LabParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit_scale: Option<UnitScale>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dot: Option<DotParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dot_report: Option<DotReport>,
}

fn resolve_params(r: &Resolver, a: &ParamArgs) -> Result<ResolvedParams> {
    let atomic = r.switch("atomic_units", a.atomic_units)?;
    let dot = r.switch("dot", a.dot)?;
    let dims = r.get("dims", a.dims)?.map(Dims::from_count).transpose()?;
    let charge = r.get("charge", a.charge)?;
    if atomic && dot {
        return Err(Error::Usage("--atomic-units and --dot are exclusive".into()));
    }

    if dot {
        let example = DotParams::example(0.0, 0.0);
        let d = DotParams {
            b_field: r.or("b_field", a.b_field, example.b_field)?,
            effective_mass: r.required("effective_mass", a.effective_mass)?,
            dielectric_constant: r.required("dielectric", a.dielectric)?,
            confinement_radius: r.or("confinement_radius", a.confinement_radius, example.confinement_radius)?,
            impurity_charge: r.or("impurity_charge", a.impurity_charge, example.impurity_charge)?,
            impurity_displacement: r.or(
                "impurity_displacement",
                a.impurity_displacement,
                example.impurity_displacement,
            )?,
        };
        for key in ["omega", "epsilon", "branch", "cyclotron"] {
            if r.file.contains_key(key) {
                r.used.lock().unwrap().insert(key.into());
                return Err(Error::Usage(format!("`{key}` conflicts with --dot, which derives it")));
            }
        }
        if a.omega.is_some() || a.epsilon.is_some() || a.branch.is_some() || a.cyclotron.is_some() {
            return Err(Error::Usage(
                "--omega/--epsilon/--branch/--cyclotron conflict with --dot".into(),
            ));
        }
        if dims == Some(Dims::Three) {
            return Err(Error::Usage(
                "--dot describes a planar system; --dims 3 conflicts".into(),
            ));
        }
        if charge.is_some() {
            return Err(Error::Usage(
                "--charge conflicts with --dot; use --impurity-charge".into(),
            ));
        }
        let (params, report) = units::dot_effective_units(&d)?;
        return Ok(ResolvedParams {
            mode: "dot",
            params,
            lab: None,
            unit_scale: None,
            dot: Some(d),
            dot_report: Some(report),
        });
    }

    let omega = r.required("omega", a.omega)?;
    let epsilon = r.required("epsilon", a.epsilon)?;
    let branch = r.get("branch", a.branch)?;
    let cyclotron = r.get("cyclotron", a.cyclotron)?;
    let finish = |params: FieldParams| {
        let params = params
            .with_dims(dims.unwrap_or(Dims::Three))
            .with_charge(charge.unwrap_or(2.0));
        params.validate().map(|_| params)
    };

    if atomic {
        let cyclotron = cyclotron.ok_or_else(|| Error::Usage("--atomic-units needs --cyclotron".into()))?;
        let lab = LabParams {
            cp_frequency: omega,
            cp_strength: epsilon,
            cyclotron_frequency: cyclotron,
        };
        let scaled = units::to_scaled(&lab)?;
        if let Some(b) = branch {
            if b != scaled.params.branch {
                return Err(Error::Usage(format!(
                    "--branch {b} conflicts with the sign of --cyclotron {cyclotron}"
                )));
            }
        }
        return Ok(ResolvedParams {
            mode: "atomic-units",
            params: finish(scaled.params)?,
            lab: Some(lab),
            unit_scale: Some(scaled.units),
            dot: None,
            dot_report: None,
        });
    }

    let branch = branch.ok_or_else(|| Error::Usage("missing required option --branch".into()))?;
    let params = finish(FieldParams::helium(omega, epsilon, branch))?;
    let (lab, unit_scale) = match cyclotron {
        Some(wc) => (
            Some(units::from_scaled(&params, wc)?),
            Some(UnitScale::for_cyclotron(wc)),
        ),
        None => (None, None),
    };
    Ok(ResolvedParams {
        mode: "scaled",
        params,
        lab,
        unit_scale,
        dot: None,
        dot_report: None,
    })
}

/// Which equilibrium families a command covers.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Family {
    One(EquilibriumClass),
    All,
}

fn parse_class(name: &str, angle: f64) -> Result<Family> {
    Ok(Family::One(match name.trim().to_ascii_lowercase().as_str() {
        "langmuir" | "i" | "1" => EquilibriumClass::Langmuir,
        "type2" | "ii" | "2" | "transverse" => EquilibriumClass::Transverse { angle },
        "type3a" | "iiia" | "3a" => EquilibriumClass::CollinearSameSide,
        "type3b" | "iiib" | "3b" => EquilibriumClass::CollinearOpposite,
        "all" => return Ok(Family::All),
        other => {
            return Err(Error::Usage(format!(
                "unknown class `{other}`, expected langmuir, type2, type3a, type3b or all"
            )))
        }
    }))
}

fn default_class(params: &FieldParams) -> &'static str {
    if params.dims == Dims::Three && params.charge == 2.0 {
        "langmuir"
    } else {
        "all"
    }
}

/// Equilibria of the family; families that cannot exist at `params` are
/// skipped under `all`.
fn find_equilibria(params: &FieldParams, family: Family) -> Result<Vec<Equilibrium>> {
    match family {
        Family::One(class) => stability::equilibria_of_class(params, &class),
        Family::All => {
            let mut classes = vec![EquilibriumClass::CollinearSameSide, EquilibriumClass::CollinearOpposite];
            if params.dims == Dims::Three && params.charge == 2.0 {
                classes.insert(0, EquilibriumClass::Langmuir);
            }
            if params.dims == Dims::Two {
                classes.push(EquilibriumClass::Transverse {
                    angle: std::f64::consts::FRAC_PI_2,
                });
            }
            let mut out = Vec::new();
            for class in classes {
                match stability::equilibria_of_class(params, &class) {
                    Ok(found) => out.extend(found),
                    Err(Error::NotFound(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        }
    }
}

fn parse_list(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("{what}: malformed number `{}`", t.trim())))
        })
        .collect()
}

fn output_path(explicit: Option<&Path>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_default()
            .join(default_name),
    }
}

/// Write through a temporary sibling file and rename it over `path`.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("output path {} has no file name", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let result = (|| -> std::io::Result<()> {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        w.get_ref().sync_all()?;
        Ok(())
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_atomic(path, |w| writeln!(w, "{text}"))
}

fn with_suffix(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

#[derive(Serialize)]
struct UnitsOutput<'a> {
    resolved: &'a ResolvedParams,
    angular_coefficient: f64,
    zvs_transverse: f64,
    rotation_period: f64,
}

fn cmd_units(r: &Resolver, a: &UnitsArgs, out: Option<&Path>) -> Result<Outcome> {
    let resolved = resolve_params(r, &a.params)?;
    let notes = r.finish()?;
    let p = resolved.params;
    let path = output_path(out, "units.json");
    write_json(
        &path,
        &UnitsOutput {
            resolved: &resolved,
            angular_coefficient: p.angular_coefficient(),
            zvs_transverse: p.zvs_transverse(),
            rotation_period: dynamics::rotation_period(p.omega),
        },
    )?;
    Ok(Outcome {
        summary: format!(
            "{}: omega = {}, epsilon = {}, branch {}, Z = {}, dims = {}",
            resolved.mode,
            p.omega,
            p.epsilon,
            p.branch,
            p.charge,
            p.dims.count()
        ),
        files: vec![path],
        notes,
    })
}

#[derive(Serialize)]
struct EquilibriumRecord {
    class: String,
    positions: Vec<Vec<f64>>,
    momenta: Vec<Vec<f64>>,
    side_length: Option<f64>,
    residual: f64,
    potential: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    stability: Option<StabilityReport>,
}

#[derive(Serialize)]
struct EquilibriumOutput {
    resolved: ResolvedParams,
    /// Positive roots of the Langmuir cubic, when it applies.
    roots: Vec<f64>,
    equilibria: Vec<EquilibriumRecord>,
}

fn record(eq: &Equilibrium, params: &FieldParams, with_stability: bool) -> Result<EquilibriumRecord> {
    let n = params.dims.count();
    Ok(EquilibriumRecord {
        class: eq.class.to_string(),
        positions: eq.config.positions.iter().map(|q| q[..n].to_vec()).collect(),
        momenta: eq.momenta.iter().map(|p| p[..n].to_vec()).collect(),
        side_length: eq.side_length,
        residual: eq.residual,
        potential: model::potential(&eq.config, params)?,
        stability: if with_stability {
            Some(stability::analyze(eq, params)?)
        } else {
            None
        },
    })
}

fn cmd_equilibrium(r: &Resolver, a: &EquilibriumArgs, out: Option<&Path>) -> Result<Outcome> {
    let resolved = resolve_params(r, &a.params)?;
    let params = resolved.params;
    let angle = r.or("angle", a.angle, std::f64::consts::FRAC_PI_2)?;
    let class_name = r.or("class", a.class.clone(), default_class(&params).to_string())?;
    let family = parse_class(&class_name, angle)?;
    let with_stability = r.switch("stability", a.stability)?;
    let notes = r.finish()?;

    let roots = if params.dims == Dims::Three && params.charge == 2.0 {
        equilibria::langmuir_cubic(&params)?
    } else {
        Vec::new()
    };
    let found = find_equilibria(&params, family)?;
    if found.is_empty() {
        return Err(Error::NotFound(format!(
            "no {class_name} equilibrium at omega = {}, epsilon = {}, branch {}",
            params.omega, params.epsilon, params.branch
        )));
    }
    let records = found
        .iter()
        .map(|eq| record(eq, &params, with_stability))
        .collect::<Result<Vec<_>>>()?;
    let summary = records
        .iter()
        .map(|rec| {
            let size = rec.side_length.map(|a| format!(" a = {a:.10}")).unwrap_or_default();
            let verdict = rec
                .stability
                .as_ref()
                .map(|s| if s.stable { " stable" } else { " unstable" })
                .unwrap_or("");
            format!("{}{size}{verdict}", rec.class)
        })
        .collect::<Vec<_>>()
        .join("; ");
    let path = output_path(out, "equilibrium.json");
    write_json(
        &path,
        &EquilibriumOutput {
            resolved,
            roots,
            equilibria: records,
        },
    )?;
    Ok(Outcome {
        summary: format!("{} equilibria: {summary}", found.len()),
        files: vec![path],
        notes,
    })
}

#[derive(Serialize)]
struct ScanOutput<'a> {
    summary: stability::MapSummary<'a>,
    omega: Grid,
    epsilon: Grid,
    charge: f64,
    csv: String,
}

fn cmd_scan(r: &Resolver, a: &ScanArgs, out: Option<&Path>) -> Result<Outcome> {
    let omega = r.required("omega", a.omega)?;
    let epsilon = r.required("epsilon", a.epsilon)?;
    let branch = r.required("branch", a.branch)?;
    let dims = Dims::from_count(r.or("dims", a.dims, 3)?)?;
    let charge = r.or("charge", a.charge, 2.0)?;
    let angle = r.or("angle", a.angle, std::f64::consts::FRAC_PI_2)?;
    let class_name = r.or("class", a.class.clone(), "langmuir".to_string())?;
    let tolerance = r.or("tolerance", a.tolerance, stability::DEFAULT_TOLERANCE)?;
    let notes = r.finish()?;
    let Family::One(class) = parse_class(&class_name, angle)? else {
        return Err(Error::Usage("scan needs a single class".into()));
    };
    if !(tolerance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "tolerance must be positive, got {tolerance}"
        )));
    }
    let spec = ScanSpec {
        omega,
        epsilon,
        branch,
        class,
        dims,
        charge,
        tolerance,
    };
    let map = stability::scan(&spec)?;
    let csv_path = output_path(out, "scan.csv");
    let json_path = csv_path.with_extension("json");
    write_atomic(&csv_path, |w| map.write_csv(w))?;
    let summary = map.summary();
    let line = format!(
        "{} cells, {} with equilibria, {} stable{}",
        summary.cells,
        summary.cells_with_equilibria,
        summary.stable_cells,
        summary
            .stable_omega_range
            .map(|(lo, hi)| format!(", stable omega in [{lo}, {hi}]"))
            .unwrap_or_default()
    );
    write_json(
        &json_path,
        &ScanOutput {
            summary,
            omega,
            epsilon,
            charge,
            csv: csv_path.display().to_string(),
        },
    )?;
    Ok(Outcome {
        summary: line,
        files: vec![csv_path, json_path],
        notes,
    })
}

fn cmd_integrate(r: &Resolver, a: &IntegrateArgs, out: Option<&Path>) -> Result<Outcome> {
    let resolved = resolve_params(r, &a.params)?;
    let params = resolved.params;
    let n = params.dims.count();
    let positions = r.get("positions", a.positions.clone())?;
    let momenta = r.get("momenta", a.momenta.clone())?;
    let class_name = r.or("class", a.class.clone(), default_class(&params).to_string())?;
    let angle = r.or("angle", a.angle, std::f64::consts::FRAC_PI_2)?;
    let root = r.get("root", a.root)?;
    let perturb = r.or("perturb", a.perturb, 0.0)?;
    let direction = r.get("direction", a.direction.clone())?;
    let periods = r.get("periods", a.periods)?;
    let duration = r.get("duration", a.duration)?;
    let control = IntegrationControl {
        samples_per_period: r.or("samples_per_period", a.samples_per_period, 200)?,
        rel_tol: r.or("rtol", a.rtol, 1e-12)?,
        abs_tol: r.or("atol", a.atol, 1e-12)?,
        ..IntegrationControl::default()
    };
    let lab_frame = r.switch("lab_frame", a.lab_frame)?;
    let notes = r.finish()?;
    control.validate()?;

    let t_final = match (periods, duration) {
        (Some(_), Some(_)) => return Err(Error::Usage("--periods and --duration are exclusive".into())),
        (None, Some(t)) => t,
        (p, None) => p.unwrap_or(10.0) * dynamics::rotation_period(params.omega),
    };
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidInput(format!("duration must be positive, got {t_final}")));
    }

    let (mut q, reference) = match positions {
        Some(text) => {
            if root.is_some() {
                return Err(Error::Usage("--positions and --root are exclusive".into()));
            }
            let q = parse_list(&text, "--positions")?;
            if q.len() != 2 * n {
                return Err(Error::Usage(format!(
                    "--positions needs {} numbers, got {}",
                    2 * n,
                    q.len()
                )));
            }
            (q, "given positions".to_string())
        }
        None => {
            let found = find_equilibria(&params, parse_class(&class_name, angle)?)?;
            let index = root.unwrap_or(0);
            let eq = found.get(index).ok_or_else(|| {
                Error::NotFound(format!(
                    "{class_name} equilibrium #{index} (found {}) at omega = {}, epsilon = {}",
                    found.len(),
                    params.omega,
                    params.epsilon
                ))
            })?;
            (eq.config.to_vec(), format!("{} #{index}", eq.class))
        }
    };
    if perturb != 0.0 {
        let d = match direction {
            Some(text) => parse_list(&text, "--direction")?,
            None => vec![1.0; 2 * n],
        };
        if d.len() != 2 * n {
            return Err(Error::Usage(format!(
                "--direction needs {} numbers, got {}",
                2 * n,
                d.len()
            )));
        }
        let norm = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if norm == 0.0 {
            return Err(Error::InvalidInput("zero perturbation direction".into()));
        }
        for (x, v) in q.iter_mut().zip(&d) {
            *x += perturb * v / norm;
        }
    }
    let config = Configuration::from_slice(params.dims, &q);
    let start = match momenta {
        Some(text) => {
            let p = parse_list(&text, "--momenta")?;
            if p.len() != 2 * n {
                return Err(Error::Usage(format!(
                    "--momenta needs {} numbers, got {}",
                    2 * n,
                    p.len()
                )));
            }
            let mut z = p;
            z.extend_from_slice(&q);
            PhaseState::from_phase_slice(params.dims, &z)
        }
        None => PhaseState::at_rest(config, &params),
    };

    let mut traj = dynamics::integrate(&start, &params, t_final, &control)?;
    if lab_frame {
        traj = dynamics::to_lab_frame(&traj, params.omega);
    }
    let path = output_path(out, "trajectory.csv");
    write_atomic(&path, |w| traj.write_csv(w))?;
    Ok(Outcome {
        summary: format!(
            "{} samples from {reference} to t = {:.6}, energy drift {:.2e}{}",
            traj.samples.len(),
            traj.last().t,
            traj.energy_drift,
            traj.stopped
                .as_ref()
                .map(|s| format!(", stopped: {s}"))
                .unwrap_or_default()
        ),
        files: vec![path],
        notes,
    })
}

#[derive(Serialize)]
struct DmcOutput<'a> {
    resolved: ResolvedParams,
    config: &'a DmcConfig,
    energy: f64,
    error: f64,
    lobe_centers: &'a [dmc::LobeCenter],
    matched_cubic_root: Option<&'a dmc::RootMatch>,
    root_matches: &'a [dmc::RootMatch],
    upper_fraction: dmc::Estimate,
    mirror_fraction: dmc::Estimate,
    seed_potentials: &'a [f64],
    final_population: usize,
    histograms: Vec<String>,
}

fn cmd_dmc(r: &Resolver, a: &DmcArgs, out: Option<&Path>) -> Result<Outcome> {
    let resolved = resolve_params(r, &a.params)?;
    let d = DmcConfig::default();
    let cfg = DmcConfig {
        walker_target: r.or("walker_target", a.walker_target, d.walker_target)?,
        time_step: r.or("time_step", a.time_step, d.time_step)?,
        equilibration_steps: r.or("equilibration_steps", a.equilibration_steps, d.equilibration_steps)?,
        accumulation_steps: r.or("accumulation_steps", a.accumulation_steps, d.accumulation_steps)?,
        seed: r.or("seed", a.seed, d.seed)?,
        box_hint: r.get("box_hint", a.box_hint)?,
        guide_width: r.get("guide_width", a.guide_width)?,
        mode_bandwidth: r.get("mode_bandwidth", a.mode_bandwidth)?,
        ..d
    };
    let planes_text = r.or("planes", a.planes.clone(), "xz".to_string())?;
    let bins = r.or("bins", a.bins, 60)?;
    let raw = r.switch("raw_density", a.raw_density)?;
    let notes = r.finish()?;
    cfg.validate()?;
    let planes = planes_text
        .split(',')
        .map(|p| p.parse::<Plane>().map_err(|e| Error::Usage(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if bins == 0 {
        return Err(Error::InvalidInput("bins must be positive".into()));
    }
    if resolved.params.dims == Dims::Two && planes.iter().any(|p| *p != Plane::Xy) {
        return Err(Error::Usage("two-dimensional runs only have the xy plane".into()));
    }

    let result = dmc::run_dmc(&resolved.params, &cfg)?;
    let json_path = output_path(out, "dmc.json");
    let ensemble = if raw { result.samples() } else { &result.density };
    let mut files = Vec::new();
    for plane in &planes {
        let h = dmc::density_histogram(ensemble, *plane, bins, ElectronSelection::Both)?;
        let path = with_suffix(&json_path, &format!("_{plane}"), "csv");
        write_atomic(&path, |w| h.write_csv(w))?;
        files.push(path);
    }
    let matched = result.matched_root();
    write_json(
        &json_path,
        &DmcOutput {
            resolved,
            config: &cfg,
            energy: result.energy.value,
            error: result.energy.error,
            lobe_centers: &result.lobe_centers,
            matched_cubic_root: matched,
            root_matches: &result.root_matches,
            upper_fraction: result.upper_fraction,
            mirror_fraction: result.mirror_fraction,
            seed_potentials: &result.seed_potentials,
            final_population: result.run.final_ensemble.len(),
            histograms: files.iter().map(|p| p.display().to_string()).collect(),
        },
    )?;
    files.insert(0, json_path);
    Ok(Outcome {
        summary: format!(
            "E = {}{}",
            result.energy,
            matched
                .map(|m| format!(
                    ", lobes match root #{} (a = {:.4}) within {:.1}%",
                    m.root_index,
                    m.side_length,
                    100.0 * m.relative_error
                ))
                .unwrap_or_default()
        ),
        files,
        notes,
    })
}

fn cmd_zvs_slice(r: &Resolver, a: &ZvsSliceArgs, out: Option<&Path>) -> Result<Outcome> {
    let resolved = resolve_params(r, &a.params)?;
    let params = resolved.params;
    let n = params.dims.count();
    let default_plane = if n == 3 { Plane::Xz } else { Plane::Xy };
    let plane = r.or("plane", a.plane, default_plane)?;
    let u = r.required("u", a.u)?;
    let v = r.required("v", a.v)?;
    let electron = r.or("electron", a.electron, 1)?;
    let fixed = r.required("fixed", a.fixed.clone())?;
    let offset = r.or("offset", a.offset, 0.0)?;
    let notes = r.finish()?;
    if !(1..=2).contains(&electron) {
        return Err(Error::Usage(format!("--electron must be 1 or 2, got {electron}")));
    }
    if n == 2 && plane != Plane::Xy {
        return Err(Error::Usage("two-dimensional slices must use the xy plane".into()));
    }
    let other = parse_list(&fixed, "--fixed")?;
    if other.len() != n {
        return Err(Error::Usage(format!("--fixed needs {n} numbers, got {}", other.len())));
    }
    let (ia, ib) = match plane {
        Plane::Xy => (0, 1),
        Plane::Xz => (0, 2),
        Plane::Yz => (1, 2),
    };
    let moving = electron - 1;
    let us = u.points();
    let vs = v.points();
    let mut rows = Vec::with_capacity(us.len() * vs.len());
    for &cu in &us {
        for &cv in &vs {
            let mut positions = [[0.0; 3]; 2];
            positions[1 - moving][..n].copy_from_slice(&other);
            let m = &mut positions[moving];
            *m = [offset; 3];
            m[ia] = cu;
            m[ib] = cv;
            let value = model::zvs(&Configuration::new(params.dims, positions), &params).unwrap_or(f64::NAN);
            rows.push((cu, cv, value));
        }
    }
    let path = output_path(out, "zvs_slice.csv");
    write_atomic(&path, |w| {
        writeln!(w, "coord1,coord2,value")?;
        for (a, b, val) in &rows {
            writeln!(w, "{a},{b},{val}")?;
        }
        Ok(())
    })?;
    let finite = rows.iter().filter(|r| r.2.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.2), hi.max(r.2))
    });
    Ok(Outcome {
        summary: format!(
            "{} points on the {plane} plane of electron {electron}, ZVS in [{lo:.6}, {hi:.6}]",
            rows.len()
        ),
        files: vec![path],
        notes,
    })
}

/// Run a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let resolver = match &cli.config {
        Some(p) => Resolver::load(p)?,
        None => Resolver::empty(),
    };
    if cli.threads == Some(0) {
        return Err(Error::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Usage(format!("cannot build thread pool: {e}")))?;
    let out = cli.output.as_deref();
    pool.install(|| match &cli.command {
        Command::Units(a) => cmd_units(&resolver, a, out),
        Command::Equilibrium(a) => cmd_equilibrium(&resolver, a, out),
        Command::Scan(a) => cmd_scan(&resolver, a, out),
        Command::Integrate(a) => cmd_integrate(&resolver, a, out),
        Command::Dmc(a) => cmd_dmc(&resolver, a, out),
        Command::ZvsSlice(a) => cmd_zvs_slice(&resolver, a, out),
    })
}

/// Parse `args`, run, print the summary and return the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            for note in &outcome.notes {
                eprintln!("note: {note}");
            }
            println!("{}", outcome.summary);
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("langmuir").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn config_parsing() {
        let r = Resolver::parse(
            "# reference field\nomega = 0.5\n\nepsilon=10 # trailing\nwalker-target = 100\n",
            "cfg",
        )
        .unwrap();
        assert_eq!(r.file["omega"], "0.5");
        assert_eq!(r.file["walker_target"], "100");
        assert!(matches!(Resolver::parse("omega 0.5", "cfg"), Err(Error::Usage(m)) if m.contains("cfg:1")));
        assert!(Resolver::parse("a = 1\na = 2", "cfg").is_err());
    }

    #[test]
    fn flags_override_and_report() {
        let r = Resolver::parse("omega = 0.5\nepsilon = 1", "cfg").unwrap();
        assert_eq!(r.get("omega", Some(0.7)).unwrap(), Some(0.7));
        assert_eq!(r.get("epsilon", Some(1.0)).unwrap(), Some(1.0));
        let notes = r.finish().unwrap();
        assert_eq!(notes.len(), 1);
        assert!(notes[0].contains("--omega 0.7 overrides"));
    }

    #[test]
    fn unknown_and_malformed_keys() {
        let r = Resolver::parse("omega = 0.5\nbogus = 1", "cfg").unwrap();
        r.get::<f64>("omega", None).unwrap();
        assert!(matches!(r.finish(), Err(Error::Usage(m)) if m.contains("bogus")));
        let r = Resolver::parse("omega = half", "cfg").unwrap();
        assert!(matches!(r.get::<f64>("omega", None), Err(Error::Usage(m)) if m.contains("half")));
    }

    #[test]
    fn negative_values_parse() {
        let cli = parse(&["equilibrium", "--omega", "1", "--epsilon", "-0.5", "--branch", "-1"]);
        let Command::Equilibrium(a) = cli.command else { panic!() };
        assert_eq!(a.params.epsilon, Some(-0.5));
        assert_eq!(a.params.branch, Some(Branch::Minus));
    }

    #[test]
    fn scaled_params_need_branch() {
        let r = Resolver::empty();
        let a = ParamArgs {
            omega: Some(1.0),
            epsilon: Some(0.0),
            ..ParamArgs::default()
        };
        assert!(matches!(resolve_params(&r, &a), Err(Error::Usage(m)) if m.contains("--branch")));
    }

    #[test]
    fn atomic_units_mode() {
        let r = Resolver::empty();
        let a = ParamArgs {
            omega: Some(0.0185),
            epsilon: Some(0.1235),
            cyclotron: Some(0.037),
            atomic_units: true,
            ..ParamArgs::default()
        };
        let p = resolve_params(&r, &a).unwrap();
        assert!((p.params.omega - 0.5).abs() < 1e-12);
        assert_eq!(p.params.branch, Branch::Minus);
        let clash = ParamArgs {
            branch: Some(Branch::Plus),
            ..a
        };
        assert!(resolve_params(&r, &clash).is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.txt");
        write_atomic(&path, |w| write!(w, "one")).unwrap();
        write_atomic(&path, |w| write!(w, "two")).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn class_names() {
        assert_eq!(
            parse_class("IIIa", 1.0).unwrap(),
            Family::One(EquilibriumClass::CollinearSameSide)
        );
        assert_eq!(parse_class("all", 1.0).unwrap(), Family::All);
        assert!(parse_class("four", 1.0).is_err());
    }
}
