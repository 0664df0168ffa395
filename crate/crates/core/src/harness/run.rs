//! The experiment driver: steps one scheme through one case and writes the
//! field CSVs, run log and summary line.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::cosmic::{cosmic_step, tracer_mass};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::mesh::PhysicalMesh;
use crate::mol::{outer_iterations_for, ImplicitSystem, MolScheme};
use crate::velocity::{courant_numbers, face_fluxes, CourantNumbers, FaceFluxField};

use super::cases::{analytic_solution, initial_field, CaseSpec, SchemeId};
use super::config::RunConfig;
use super::metrics::{error_norms, multiply_count, ErrorNorms};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    Diverged { step: usize },
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunStatus::Completed => f.write_str("completed"),
            RunStatus::Diverged { step } => write!(f, "diverged@{step}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: RunConfig,
    pub status: RunStatus,
    /// Steps actually taken.
    pub steps: usize,
    pub final_time: f64,
    pub final_field: Field2D,
    /// Time of the error measurement, if one was made.
    pub error_time: Option<f64>,
    /// `phi - phi_T` at `error_time`.
    pub error_field: Option<Field2D>,
    pub norms: Option<ErrorNorms>,
    /// Largest Courant numbers met during the run.
    pub courant: CourantNumbers,
    pub mults_per_cell_step: f64,
    pub total_iterations: usize,
    pub total_outer: usize,
    pub iters_mean: f64,
    pub outer_mean: f64,
    /// Largest `|phi|` seen at the end of any step.
    pub max_abs: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
}

impl RunResult {
    pub fn l2(&self) -> Option<f64> {
        self.norms.map(|n| n.l2)
    }

    pub fn linf(&self) -> Option<f64> {
        self.norms.map(|n| n.linf)
    }

    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// One machine-parseable `key=value` line describing the run.
    pub fn summary_line(&self) -> String {
        let c = &self.config;
        let norm = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6e}"));
        format!(
            "case={} scheme={} mesh={} nx={} ny={} dt={} maxc={:.4} maxcd={:.4} l2={} linf={} mults_per_cell_step={:.1} iters_mean={:.2} status={}",
            c.case,
            c.scheme,
            c.mesh,
            c.nx,
            c.ny,
            c.dt,
            self.courant.max_c,
            self.courant.max_cd,
            norm(self.l2()),
            norm(self.linf()),
            self.mults_per_cell_step,
            self.iters_mean,
            self.status
        )
    }
}

/// Collects the CSV files and log lines of one run.
struct Artifacts {
    dir: Option<PathBuf>,
    stem: String,
    log: Vec<String>,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Result<Self> {
        if let Some(dir) = &cfg.out {
            fs::create_dir_all(dir)?;
        }
        Ok(Self { dir: cfg.out.clone(), stem: format!("{}_{}", cfg.case, cfg.scheme), log: Vec::new() })
    }

    fn line(&mut self, s: String) {
        if self.dir.is_some() {
            self.log.push(s);
        }
    }

    fn write_field(&self, spec: &CaseSpec, mesh: &PhysicalMesh, phi: &Field2D, t: f64) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let reference = analytic_solution(spec, mesh, t).ok();
        let path = dir.join(format!("{}_t{}.csv", self.stem, format_time(t)));
        write_field_csv(&path, mesh, phi, reference.as_ref())
    }

    fn finish(&self, summary: &str) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let mut log = String::new();
        for l in &self.log {
            log.push_str(l);
            log.push('\n');
        }
        let _ = writeln!(log, "{summary}");
        fs::write(dir.join(format!("{}.log", self.stem)), log)?;
        let mut f = fs::OpenOptions::new().create(true).append(true).open(dir.join("summary.txt"))?;
        writeln!(f, "{summary}")?;
        Ok(())
    }
}

/// Output times as they appear in file names: `500`, `0.5`, `2.25`.
pub fn format_time(t: f64) -> String {
    let r = (t * 1e6).round() / 1e6;
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

/// Writes `i,j,x,y,phi,error` with `j` outermost. Without a reference the
/// error column is `nan`.
pub fn write_field_csv(path: &Path, mesh: &PhysicalMesh, phi: &Field2D, reference: Option<&Field2D>) -> Result<()> {
    let g = mesh.grid();
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "i,j,x,y,phi,error")?;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = mesh.cell_centre(g.cell(i, j));
            let v = phi[(i, j)];
            match reference {
                Some(r) => writeln!(w, "{i},{j},{},{},{v:e},{:e}", p.x, p.y, v - r[(i, j)])?,
                None => writeln!(w, "{i},{j},{},{},{v:e},nan", p.x, p.y)?,
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn step_of(time: f64, dt: f64) -> usize {
    (time / dt).round() as usize
}

enum Stepper {
    Split,
    Rk2(MolScheme),
    Implicit { scheme: MolScheme, steady: Option<ImplicitSystem> },
}

/// Runs one configuration to its end time or until it diverges.
///
/// Divergence (a non-finite value, or the tracer maximum exceeding
/// `blowup_factor` times its initial value) ends the run early with a
/// `Diverged` status and no error norms. Linear solver failures are
/// returned as errors.
pub fn run_case(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let h0 = cfg.h0;
    let spec = CaseSpec::new(cfg.case, cfg.mesh, cfg.scheme, cfg.nx, cfg.ny, cfg.t_end, h0)?;
    let mesh = spec.build_mesh()?;
    let n_steps = cfg.step_count()?;
    let dt = cfg.dt;

    let mut artifacts = Artifacts::new(cfg)?;
    let mut phi = initial_field(&spec, &mesh);
    let initial_max = phi.max_abs();
    let initial_mass = tracer_mass(&mesh, &phi);
    let limit = cfg.blowup_factor * initial_max.max(f64::MIN_POSITIVE);

    let time_dependent = spec.streamfunction.is_time_dependent();
    let steady_fluxes = (!time_dependent).then(|| face_fluxes(&spec.streamfunction, &mesh, 0.0));
    let steady_courant = steady_fluxes.as_ref().map(|f| courant_numbers(f, &mesh, dt));

    let mut stepper = match cfg.scheme {
        SchemeId::Split => Stepper::Split,
        SchemeId::MolRk2 => Stepper::Rk2(MolScheme::new(&mesh, spec.boundaries)?),
        SchemeId::MolImplicit => {
            let scheme = MolScheme::new(&mesh, spec.boundaries)?;
            let steady = match &steady_fluxes {
                Some(f) => Some(scheme.implicit_system(&mesh, f, dt)?),
                None => None,
            };
            Stepper::Implicit { scheme, steady }
        }
    };

    let output_steps: Vec<usize> = spec.output_times.iter().map(|&t| step_of(t, dt)).collect();
    let error_step = step_of(spec.error_time, dt).clamp(1, n_steps);
    if output_steps.contains(&0) {
        artifacts.write_field(&spec, &mesh, &phi, 0.0)?;
    }

    let mut courant = steady_courant.unwrap_or_default();
    let mut status = RunStatus::Completed;
    let mut steps = 0;
    let mut total_iterations = 0;
    let mut total_outer = 0;
    let mut max_abs = initial_max;
    let mut measured: Option<(f64, Field2D, ErrorNorms)> = None;
    let mut warned_cd = false;

    for step in 1..=n_steps {
        let t0 = (step - 1) as f64 * dt;
        let owned;
        let (fluxes, cn): (&FaceFluxField, CourantNumbers) = match (&steady_fluxes, steady_courant) {
            (Some(f), Some(c)) => (f, c),
            _ => {
                owned = face_fluxes(&spec.streamfunction, &mesh, t0 + 0.5 * dt);
                let c = courant_numbers(&owned, &mesh, dt);
                (&owned, c)
            }
        };
        courant = courant.merge(cn);

        let mut line = format!("step={step} t={}", format_time(step as f64 * dt));
        let next = match &mut stepper {
            Stepper::Split => {
                if cn.max_cd > 1.0 && !warned_cd {
                    warn!("deformational Courant number {:.3} exceeds 1; the split scheme may be unstable", cn.max_cd);
                    warned_cd = true;
                }
                match cosmic_step(&mesh, &phi, fluxes, dt) {
                    Ok(f) => f,
                    Err(Error::CourantExceedsDomain { .. }) => {
                        status = RunStatus::Diverged { step };
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            Stepper::Rk2(scheme) => scheme.rk2_step(&mesh, fluxes, &phi, dt),
            Stepper::Implicit { scheme, steady } => {
                let n_outer = outer_iterations_for(cn.max_c);
                let built;
                let system = match steady {
                    Some(s) => &*s,
                    None => {
                        built = scheme.implicit_system(&mesh, fluxes, dt)?;
                        &built
                    }
                };
                let (next, stats) = scheme.cn_step(&mesh, fluxes, system, &phi, dt, n_outer)?;
                total_outer += stats.outer;
                total_iterations += stats.iterations();
                for (k, r) in stats.reports.iter().enumerate() {
                    info!("step={step} outer={} iters={} res={:e}", k + 1, r.iterations, r.final_residual);
                    let _ = write!(line, " outer{}_iters={} outer{}_res={:e}", k + 1, r.iterations, k + 1, r.final_residual);
                }
                next
            }
        };
        steps = step;
        let m = next.max_abs();
        phi = next;
        if !phi.all_finite() || m > limit {
            status = RunStatus::Diverged { step };
            artifacts.line(format!("{line} diverged"));
            break;
        }
        max_abs = max_abs.max(m);
        artifacts.line(line);

        let t = step as f64 * dt;
        if output_steps.contains(&step) {
            artifacts.write_field(&spec, &mesh, &phi, t)?;
        }
        if step == error_step {
            match analytic_solution(&spec, &mesh, t) {
                Ok(reference) => {
                    let norms = error_norms(&phi, &reference, &mesh)?;
                    let err = Field2D::from_fn(phi.nx(), phi.ny(), |i, j| phi[(i, j)] - reference[(i, j)]);
                    measured = Some((t, err, norms));
                }
                Err(Error::NoAnalyticSolution { .. }) => {
                    warn!("no reference solution for {} at t={t}; error norms not reported", cfg.case);
                }
                Err(e) => return Err(e),
            }
        }
    }

    let iters_mean = if steps > 0 { total_iterations as f64 / steps as f64 } else { 0.0 };
    let outer_mean = if steps > 0 { total_outer as f64 / steps as f64 } else { 0.0 };
    let (error_time, error_field, norms) = match (status, measured) {
        (RunStatus::Completed, Some((t, e, n))) => (Some(t), Some(e), Some(n)),
        _ => (None, None, None),
    };
    let result = RunResult {
        config: cfg.clone(),
        status,
        steps,
        final_time: steps as f64 * dt,
        final_mass: tracer_mass(&mesh, &phi),
        final_field: phi,
        error_time,
        error_field,
        norms,
        courant,
        mults_per_cell_step: multiply_count(cfg.scheme, iters_mean, outer_mean),
        total_iterations,
        total_outer,
        iters_mean,
        outer_mean,
        max_abs,
        initial_mass,
    };
    artifacts.finish(&result.summary_line())?;
    Ok(result)
}

/// Runs `cfg` twice and reports whether the final fields agree bit for bit.
pub fn determinism_check(cfg: &RunConfig) -> Result<(RunResult, bool)> {
    let mut quiet = cfg.clone();
    quiet.out = None;
    let first = run_case(&quiet)?;
    let second = run_case(cfg)?;
    let same = first.status == second.status
        && first
            .final_field
            .as_slice()
            .iter()
            .zip(second.final_field.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
    Ok((second, same))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{CaseId, MeshKind};

    #[test]
    fn file_time_labels() {
        assert_eq!(format_time(0.0), "0");
        assert_eq!(format_time(500.0), "500");
        assert_eq!(format_time(2.5), "2.5");
        assert_eq!(format_time(0.1 * 3.0), "0.3");
    }

    #[test]
    fn short_solid_body_run() {
        let cfg = RunConfig::new(CaseId::SolidBody, SchemeId::Split, MeshKind::Orthogonal, 20, 10.0).with_t_end(100.0);
        let r = run_case(&cfg).unwrap();
        assert!(r.completed());
        assert_eq!(r.steps, 10);
        assert_eq!(r.error_time, Some(100.0));
        assert!(r.l2().unwrap() > 0.0);
        assert!((r.final_mass - r.initial_mass).abs() < 1e-9 * r.initial_mass);
        let s = r.summary_line();
        assert!(s.starts_with("case=solid_body scheme=split mesh=orthogonal nx=20 ny=20 dt=10 "));
        assert!(s.ends_with("status=completed"));
    }
}
