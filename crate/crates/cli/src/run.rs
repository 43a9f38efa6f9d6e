//! Executes a benchmark run and writes its output directory.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ldgmin::adapt::{run_loop, write_csv, AdaptConfig, ConvergenceRecord, LevelState};
use ldgmin::benchmarks;
use ldgmin::SolverSettings;

use crate::config::{RunSettings, UsageError};
use crate::manifest::RunManifest;
use crate::plot::{loglog_svg, Series};

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Io(io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

/// What a run produced. `failure` is set when the solver stopped the loop;
/// the files written up to that level are kept.
#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<ConvergenceRecord>,
    pub failure: Option<String>,
}

/// Exclusive claim on an output directory, released on drop.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, RunError> {
        let path = dir.join(".ldgmin.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(DirLock(path))
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(RunError::Usage(UsageError(format!(
                "output directory {} is in use by another run (remove {} if stale)",
                dir.display(),
                path.display()
            )))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write(&mut w)?;
    w.flush()
}

fn write_timings(path: &Path, records: &[ConvergenceRecord]) -> io::Result<()> {
    write_file(path, |w| {
        writeln!(w, "level,ndof,iters,seconds")?;
        for r in records {
            writeln!(w, "{},{},{},{:.6}", r.level, r.ndof, r.iters, r.seconds)?;
        }
        Ok(())
    })
}

/// Cellwise |grad v_C| at the centroid.
fn gradient_magnitudes(state: &LevelState) -> Vec<f64> {
    let space = &state.discretization.space;
    let mesh = space.mesh();
    (0..mesh.num_cells())
        .map(|c| {
            let g = space.eval_gradient(&state.conforming.dg, c, mesh.centroid(c));
            g[0].hypot(g[1])
        })
        .collect()
}

pub fn execute(settings: &RunSettings) -> Result<RunOutcome, RunError> {
    let problem = benchmarks::defaults(settings.benchmark, &settings.overrides).map_err(UsageError::from)?;
    let adapt = AdaptConfig {
        theta: settings.theta,
        mode: settings.mode,
        levels: settings.levels,
        ndof_budget: settings.ndof_budget,
        solver: SolverSettings { max_iterations: settings.max_iterations, ..SolverSettings::default() },
    };
    fs::create_dir_all(&settings.out)?;
    let _lock = DirLock::acquire(&settings.out)?;
    let manifest = RunManifest::now(settings)?;
    fs::write(settings.out.join("manifest.json"), manifest.to_json() + "\n")?;

    let history = settings.out.join("history.csv");
    let timings = settings.out.join("timings.csv");
    let mut records = Vec::new();
    let mut io_error: Option<io::Error> = None;
    let result = run_loop(&problem, &adapt, |state| {
        records.push(state.record.clone());
        let step = || -> io::Result<()> {
            write_file(&history, |w| write_csv(w, &records, settings.timings))?;
            write_timings(&timings, &records)?;
            if settings.dump_mesh {
                let data = gradient_magnitudes(state);
                let text = state.discretization.mesh().to_text(Some(("grad_vc", &data)));
                fs::write(settings.out.join(format!("mesh_level{:02}.txt", state.record.level)), text)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            io_error.get_or_insert(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    if records.is_empty() {
        write_file(&history, |w| write_csv(w, &records, settings.timings))?;
    }
    let failure = match result {
        Ok(run) => run.failed_level.map(|l| format!("solver did not converge on level {l}")),
        Err(e) => Some(format!("solver failed on level {}: {e}", records.len())),
    };
    if settings.plot {
        let k = settings.overrides.k;
        let series = Series { label: format!("k = {k}"), points: records.iter().map(|r| (r.ndof as f64, r.eta)).collect() };
        let svg = plot_history(&format!("{} ({:?})", settings.benchmark, settings.mode).to_lowercase(), &[series], &[k]);
        fs::write(settings.out.join("convergence.svg"), svg)?;
    }
    Ok(RunOutcome { records, failure })
}

/// Estimator against ndof with reference slopes -1/3 and -k for each k.
pub fn plot_history(title: &str, series: &[Series], degrees: &[usize]) -> String {
    let mut labels: Vec<(f64, String)> = vec![(-1.0 / 3.0, "ndof^(-1/3)".to_string())];
    for &k in degrees {
        if !labels.iter().any(|(s, _)| *s == -(k as f64)) {
            labels.push((-(k as f64), format!("ndof^(-{k})")));
        }
    }
    let slopes: Vec<(f64, &str)> = labels.iter().map(|(s, l)| (*s, l.as_str())).collect();
    loglog_svg(title, "ndof", "eta", series, &slopes)
}

/// Reads the (ndof, eta) columns of a history.csv.
pub fn read_history(path: &Path) -> Result<Vec<(f64, f64)>, RunError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| UsageError(format!("{}: missing column {name}", path.display())))
    };
    let (ndof, eta) = (col("ndof")?, col("eta")?);
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let get = |i: usize| {
                f.get(i)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| RunError::Usage(UsageError(format!("{}: malformed row '{l}'", path.display()))))
            };
            Ok((get(ndof)?, get(eta)?))
        })
        .collect()
}
