//! The `kresling-orthosis` command.
//!
//! Usage errors exit with status 2; domain errors print the error name and
//! exit with status 1. Every output file is written atomically.

use super::io::{load_design, load_measurements, save_design, DesignDocument};
use super::pattern::{export_pattern, to_dxf, to_svg, PatternStyle};
use super::tabular::{schedule_to_csv, trajectory_to_csv};
use super::{format_number, read_file, write_atomic, InterfaceError};
use crate::equilibrium::{
    build_elastic_model, run_schedule, sweep_single_tendon, ElasticModel, SolveOptions, DEFAULT_CREASE_STIFFNESS,
    DEFAULT_FACET_STIFFNESS, SWEEP_SECONDS,
};
use crate::kinematics::{theoretical_bend_report, TendonId};
use crate::schedules::{make_schedule, MotionMode, DEFAULT_MAX_CONTRACTION};
use crate::sizing::{check_semifold, fit_report, MeasurementSet};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DEFAULT_RATE: f64 = 2.0;

#[derive(Debug, Parser)]
#[command(name = "kresling-orthosis", version, about = "Design, draw and simulate Kresling-origami wrist orthoses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Size the five units from a measurement file.
    Design {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Overrides the tolerance in the measurement file.
        #[arg(long)]
        tolerance_mm: Option<f64>,
        /// Overrides the cell angle in the measurement file.
        #[arg(long)]
        alpha_deg: Option<f64>,
    },
    /// Check compatibility, semi-fold feasibility and fit of a design.
    Validate(DesignInput),
    /// Export the laser-cut drawing (DXF when the output ends in `.dxf`).
    Pattern {
        #[command(flatten)]
        design: DesignInput,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        style: StyleArgs,
    },
    /// Write the motor-command schedule of a motion mode.
    Schedule {
        #[arg(long)]
        mode: MotionMode,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_CONTRACTION)]
        max_contraction: f64,
        /// Samples per second.
        #[arg(long, default_value_t = DEFAULT_RATE)]
        rate: f64,
    },
    /// Run a motion mode through the elastic model and write the trajectory.
    Simulate {
        #[command(flatten)]
        design: DesignInput,
        #[arg(long)]
        mode: MotionMode,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Sweep every tendon alone and tabulate the largest bending angles.
    Workspace {
        #[command(flatten)]
        design: DesignInput,
        /// Output directory for t1.csv..t6.csv and max_angles.csv.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Closed-form maximum bending angles of the movable sections.
    Report(DesignInput),
}

#[derive(Debug, Args)]
pub struct DesignInput {
    /// Design file.
    #[arg(value_name = "DESIGN", conflicts_with = "input", required_unless_present = "input")]
    pub path: Option<PathBuf>,
    #[arg(long = "in", value_name = "DESIGN")]
    pub input: Option<PathBuf>,
}

impl DesignInput {
    fn path(&self) -> &Path {
        self.path.as_deref().or(self.input.as_deref()).expect("clap requires one input")
    }
}

#[derive(Debug, Args)]
pub struct StyleArgs {
    #[arg(long, default_value_t = PatternStyle::default().dash_on_mm)]
    pub dash_on_mm: f64,
    #[arg(long, default_value_t = PatternStyle::default().dash_off_mm)]
    pub dash_off_mm: f64,
    #[arg(long, default_value_t = PatternStyle::default().fillet_radius_mm)]
    pub fillet_mm: f64,
    #[arg(long, default_value_t = PatternStyle::default().eyelet_diameter_mm)]
    pub eyelet_mm: f64,
    #[arg(long, default_value_t = PatternStyle::default().tab_width_mm)]
    pub tab_mm: f64,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = DEFAULT_MAX_CONTRACTION)]
    pub max_contraction: f64,
    /// Samples per second.
    #[arg(long, default_value_t = DEFAULT_RATE)]
    pub rate: f64,
    /// Hold section 2 at its neutral pose.
    #[arg(long)]
    pub pin_section2: bool,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    match execute(&cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}: {e}", e.name());
            1
        }
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), InterfaceError> {
    match out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| InterfaceError::Io { path: "<stdout>".into(), message: e.to_string() }),
    }
}

fn file_name(path: &Path) -> Option<String> {
    path.file_name().map(|n| n.to_string_lossy().into_owned())
}

fn open_design(input: &DesignInput) -> Result<DesignDocument, InterfaceError> {
    load_design(&read_file(input.path())?)
}

fn model(doc: &DesignDocument, sim: &SimArgs) -> Result<ElasticModel, InterfaceError> {
    if !(sim.rate > 0.0) || !sim.rate.is_finite() {
        return Err(InterfaceError::NonPositiveValue(format!("rate {}", sim.rate)));
    }
    Ok(build_elastic_model(&doc.design, DEFAULT_CREASE_STIFFNESS, DEFAULT_FACET_STIFFNESS)?
        .with_section2_pinned(sim.pin_section2)?)
}

fn execute(command: &Command, stdout: &mut dyn Write) -> Result<(), InterfaceError> {
    match command {
        Command::Design { input, out, tolerance_mm, alpha_deg } => {
            let set = load_measurements(&read_file(input)?)?;
            let set = if tolerance_mm.is_some() || alpha_deg.is_some() {
                MeasurementSet::new(
                    set.sections().to_vec(),
                    tolerance_mm.unwrap_or(set.tolerance()),
                    alpha_deg.unwrap_or(set.alpha_deg()),
                )?
            } else {
                set
            };
            let doc = DesignDocument::from_measurements(set, file_name(input))?;
            emit(out.as_deref(), &save_design(&doc), stdout)
        }
        Command::Validate(input) => {
            let doc = open_design(input)?;
            let (text, ok) = validation_report(&doc);
            emit(None, &text, stdout)?;
            if ok {
                Ok(())
            } else {
                Err(InterfaceError::ValidationFailed("a section cannot reach its semi-folded height".into()))
            }
        }
        Command::Pattern { design, out, style } => {
            let doc = open_design(design)?;
            let style = PatternStyle {
                dash_on_mm: style.dash_on_mm,
                dash_off_mm: style.dash_off_mm,
                fillet_radius_mm: style.fillet_mm,
                eyelet_diameter_mm: style.eyelet_mm,
                tab_width_mm: style.tab_mm,
            };
            let drawing = export_pattern(&doc.design, &style)?;
            let dxf = out
                .as_deref()
                .and_then(Path::extension)
                .is_some_and(|e| e.eq_ignore_ascii_case("dxf"));
            let text = if dxf { to_dxf(&drawing) } else { to_svg(&drawing) };
            emit(out.as_deref(), &text, stdout)
        }
        Command::Schedule { mode, out, max_contraction, rate } => {
            let schedule = make_schedule(*mode, *max_contraction)?;
            emit(out.as_deref(), &schedule_to_csv(&schedule, *rate)?, stdout)
        }
        Command::Simulate { design, mode, out, sim } => {
            let doc = open_design(design)?;
            let model = model(&doc, sim)?;
            let schedule = make_schedule(*mode, sim.max_contraction)?;
            let trajectory = run_schedule(&model, &schedule, sim.rate, &SolveOptions::default())?;
            let csv = trajectory_to_csv(&trajectory);
            let peak = trajectory
                .samples()
                .iter()
                .max_by(|a, b| a.beta_deg.total_cmp(&b.beta_deg))
                .map(|s| (s.t, s.beta_deg, s.phi_deg));
            let mut summary = format!("mode {mode}: {} samples over {} s\n", trajectory.len(), schedule.duration());
            if let Some((t, beta, phi)) = peak {
                let _ = writeln!(summary, "max beta {beta:.2} deg at t = {t} s, phi {phi:.1} deg");
            }
            match out {
                Some(path) => {
                    write_atomic(path, csv.as_bytes())?;
                    emit(None, &summary, stdout)
                }
                None => emit(None, &csv, stdout),
            }
        }
        Command::Workspace { design, out, sim } => {
            let doc = open_design(design)?;
            let model = model(&doc, sim)?;
            std::fs::create_dir_all(out)
                .map_err(|e| InterfaceError::Io { path: out.display().to_string(), message: e.to_string() })?;
            let steps = (SWEEP_SECONDS * sim.rate).round() as usize + 1;
            let mut table = String::from("tendon,max_beta,phi_at_max\n");
            for tendon in TendonId::all() {
                let trajectory =
                    sweep_single_tendon(&model, tendon, steps, sim.max_contraction, &SolveOptions::default())?;
                write_atomic(&out.join(format!("t{}.csv", tendon.index())), trajectory_to_csv(&trajectory).as_bytes())?;
                let peak = trajectory
                    .samples()
                    .iter()
                    .max_by(|a, b| a.beta_deg.total_cmp(&b.beta_deg))
                    .expect("at least two samples");
                let _ = writeln!(
                    table,
                    "T{},{},{}",
                    tendon.index(),
                    format_number(peak.beta_deg),
                    format_number(peak.phi_deg)
                );
            }
            write_atomic(&out.join("max_angles.csv"), table.as_bytes())?;
            emit(None, &table, stdout)
        }
        Command::Report(input) => {
            let doc = open_design(input)?;
            let report = theoretical_bend_report(&doc.design)?;
            let mut text = String::from("section  radial/ulnar max (deg)  dorsal/palmar max (deg)\n");
            for s in &report.per_section {
                let _ = writeln!(text, "{:>7}  {:>22.3}  {:>23.3}", s.section, s.lateral_max_deg, s.sagittal_max_deg);
            }
            let _ = writeln!(text, "summed radial/ulnar: {:.3} deg", report.summed_lateral);
            let _ = writeln!(text, "summed dorsal/palmar: {:.3} deg", report.summed_sagittal);
            let _ = writeln!(text, "{}", report.discrepancy_note());
            emit(None, &text, stdout)
        }
    }
}

fn validation_report(doc: &DesignDocument) -> (String, bool) {
    let mut text = String::from("interfaces: compatible, chirality alternates\n");
    let mut ok = true;
    for (i, (unit, h)) in doc.design.units().iter().zip(doc.design.heights()).enumerate() {
        let semifold = check_semifold(unit.b(), unit.alpha_deg(), *h);
        ok &= semifold;
        let _ = writeln!(
            text,
            "section {}: {} {} a1 {:.2} a2 {:.2} b {:.2} h {} semi-fold {}",
            i + 1,
            unit.kind(),
            unit.chirality(),
            unit.a1(),
            unit.a2(),
            unit.b(),
            format_number(*h),
            if semifold { "ok" } else { "FAILED" }
        );
    }
    if let Some(m) = &doc.measurements {
        for c in fit_report(&doc.design, m) {
            let _ = writeln!(
                text,
                "section {} clearance: bottom {:+.2} mm, top {:+.2} mm",
                c.section, c.bottom_mm, c.top_mm
            );
        }
    }
    (text, ok)
}
