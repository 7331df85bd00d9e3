//! Run driver and output: CSV/VTK snapshots, probe series, SVG plots and the
//! JSON run manifest.

pub mod plot;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::thread;
use std::time::Instant;

use log::{info, warn};
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::integrator::{Flags, FractureEvent, Simulation};
use crate::particles::Phase;
use crate::probes::{Probe, ProbeSeries};
use crate::scenarios::{build_scenario, ScenarioConfig, SnapshotFormat};

/// Column order of the CSV snapshot; never reorder.
pub const SNAPSHOT_HEADER: [&str; 12] = [
    "id",
    "phase",
    "x [m]",
    "y [m]",
    "vx [m/s]",
    "vy [m/s]",
    "rho [kg/m^3]",
    "p [Pa]",
    "damage [-]",
    "sxx [Pa]",
    "sxy [Pa]",
    "syy [Pa]",
];

/// Bounded queue length between the stepping loop and the writer thread.
pub const SNAPSHOT_QUEUE: usize = 4;

pub fn version_string() -> String {
    format!(
        "{} {} ({})",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        option_env!("SPHFSI_GIT_REV").unwrap_or("unknown")
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotRecord {
    pub id: usize,
    pub phase: Phase,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub rho: f64,
    pub p: f64,
    pub damage: f64,
    pub sxx: f64,
    pub sxy: f64,
    pub syy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub records: Vec<SnapshotRecord>,
}

impl Snapshot {
    pub fn capture(sim: &Simulation) -> Self {
        let set = &sim.set;
        let damage = sim.damage();
        let records = (0..set.len())
            .map(|i| SnapshotRecord {
                id: i,
                phase: set.phase[i],
                x: set.x[i].x,
                y: set.x[i].y,
                vx: set.v[i].x,
                vy: set.v[i].y,
                rho: set.rho[i],
                p: set.p[i],
                damage: damage[i],
                sxx: set.s[i][(0, 0)],
                sxy: set.s[i][(0, 1)],
                syy: set.s[i][(1, 1)],
            })
            .collect();
        Self { t: sim.time(), records }
    }
}

/// Writes through `write` into `path`, deleting the file if anything fails.
fn write_atomically(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let result = File::create(path).and_then(|f| {
        let mut w = BufWriter::new(f);
        write(&mut w)?;
        w.flush()?;
        w.get_ref().sync_data()
    });
    result.map_err(|e| {
        let _ = fs::remove_file(path);
        SimError::io(path, e)
    })
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

pub fn write_snapshot_csv(path: &Path, snap: &Snapshot) -> Result<()> {
    write_atomically(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(SNAPSHOT_HEADER).map_err(csv_err)?;
        for r in &snap.records {
            out.write_record(&[
                r.id.to_string(),
                r.phase.as_str().to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.vx.to_string(),
                r.vy.to_string(),
                r.rho.to_string(),
                r.p.to_string(),
                r.damage.to_string(),
                r.sxx.to_string(),
                r.sxy.to_string(),
                r.syy.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()
    })
}

pub fn read_snapshot_csv(path: &Path) -> Result<Vec<SnapshotRecord>> {
    let bad = |msg: String| SimError::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != SNAPSHOT_HEADER {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let f = |k: usize| -> Result<f64> { row[k].parse().map_err(|e| bad(format!("column {k}: {e}"))) };
        out.push(SnapshotRecord {
            id: row[0].parse().map_err(|e| bad(format!("id: {e}")))?,
            phase: row[1].parse()?,
            x: f(2)?,
            y: f(3)?,
            vx: f(4)?,
            vy: f(5)?,
            rho: f(6)?,
            p: f(7)?,
            damage: f(8)?,
            sxx: f(9)?,
            sxy: f(10)?,
            syy: f(11)?,
        });
    }
    Ok(out)
}

/// Legacy ASCII VTK polydata with one vertex per particle.
pub fn write_snapshot_vtk(path: &Path, snap: &Snapshot) -> Result<()> {
    write_atomically(path, |w| {
        let n = snap.records.len();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "sphfsi snapshot t={}", snap.t)?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET POLYDATA")?;
        writeln!(w, "POINTS {n} double")?;
        for r in &snap.records {
            writeln!(w, "{} {} 0", r.x, r.y)?;
        }
        writeln!(w, "VERTICES {n} {}", 2 * n)?;
        for k in 0..n {
            writeln!(w, "1 {k}")?;
        }
        writeln!(w, "POINT_DATA {n}")?;
        let scalar = |w: &mut BufWriter<File>, name: &str, ty: &str, vals: &mut dyn Iterator<Item = String>| {
            writeln!(w, "SCALARS {name} {ty} 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v}")?;
            }
            Ok::<(), std::io::Error>(())
        };
        let recs = &snap.records;
        scalar(w, "id", "int", &mut recs.iter().map(|r| r.id.to_string()))?;
        scalar(w, "phase", "int", &mut recs.iter().map(|r| r.phase.code().to_string()))?;
        scalar(w, "rho", "double", &mut recs.iter().map(|r| r.rho.to_string()))?;
        scalar(w, "p", "double", &mut recs.iter().map(|r| r.p.to_string()))?;
        scalar(w, "damage", "double", &mut recs.iter().map(|r| r.damage.to_string()))?;
        scalar(w, "sxx", "double", &mut recs.iter().map(|r| r.sxx.to_string()))?;
        scalar(w, "sxy", "double", &mut recs.iter().map(|r| r.sxy.to_string()))?;
        scalar(w, "syy", "double", &mut recs.iter().map(|r| r.syy.to_string()))?;
        writeln!(w, "VECTORS velocity double")?;
        for r in recs {
            writeln!(w, "{} {} 0", r.vx, r.vy)?;
        }
        Ok(())
    })
}

pub fn write_probe_series(path: &Path, series: &ProbeSeries) -> Result<()> {
    write_atomically(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t [s]".to_string()];
        header.extend(series.headers.iter().cloned());
        out.write_record(&header).map_err(csv_err)?;
        for (t, row) in series.times.iter().zip(&series.rows) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(f64::to_string));
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()
    })
}

pub fn read_probe_series(path: &Path) -> Result<ProbeSeries> {
    let bad = |msg: String| SimError::Config(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .skip(1)
        .map(str::to_string)
        .collect();
    let mut series = ProbeSeries {
        headers,
        ..Default::default()
    };
    for row in rdr.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let vals: std::result::Result<Vec<f64>, _> = row.iter().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| bad(e.to_string()))?;
        series.push(vals[0], vals[1..].to_vec());
    }
    Ok(series)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub steps: u64,
    pub final_time: f64,
    pub particles: usize,
    pub fluid_particles: usize,
    pub solid_particles: usize,
    pub wall_particles: usize,
    pub bonds: usize,
    pub broken_bonds: usize,
    pub components: usize,
    pub snapshots: usize,
    pub probe_rows: usize,
    pub max_speed: f64,
    pub min_dt: f64,
    pub max_dt: f64,
    pub flags: Flags,
    pub first_fracture: Option<FractureEvent>,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: String,
    config: &'a ScenarioConfig,
    summary: &'a RunSummary,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub plots: bool,
}

/// Result of a completed (or aborted) run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub series: ProbeSeries,
    pub fracture_log: Vec<FractureEvent>,
}

enum Job {
    Snapshot(usize, Box<Snapshot>),
}

fn spawn_writer(rx: Receiver<Job>, dir: PathBuf, format: SnapshotFormat) -> thread::JoinHandle<Result<usize>> {
    thread::spawn(move || {
        let mut written = 0;
        for job in rx {
            match job {
                Job::Snapshot(k, snap) => {
                    if matches!(format, SnapshotFormat::Csv | SnapshotFormat::Both) {
                        write_snapshot_csv(&dir.join(format!("snap_{k:05}.csv")), &snap)?;
                    }
                    if matches!(format, SnapshotFormat::Vtk | SnapshotFormat::Both) {
                        write_snapshot_vtk(&dir.join(format!("snap_{k:05}.vtk")), &snap)?;
                    }
                    written += 1;
                }
            }
        }
        Ok(written)
    })
}

/// True once `t` has reached the `k`-th multiple of `every`.
fn due(t: f64, k: usize, every: f64) -> bool {
    t >= k as f64 * every - 1e-9 * every
}

/// Simulates `cfg` to its end time, writing everything under
/// `opts.out_dir`. On a numerical abort the probe series and manifest are
/// still written before the error is returned.
pub fn run(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutcome> {
    let started = Instant::now();
    let dir = &opts.out_dir;
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let built = build_scenario(cfg)?;
    let mut sim = Simulation::new(&built.particles, built.physics.clone(), cfg.cfl, cfg.end_time)?;
    let probes: Vec<Probe> = cfg
        .probes
        .iter()
        .map(|p| Probe::resolve(p, &sim.set, cfg.dp))
        .collect::<Result<_>>()?;
    let mut series = ProbeSeries::new(&probes);
    let sample = |sim: &Simulation| probes.iter().map(|p| p.sample(sim)).collect::<Vec<f64>>();

    let mut summary = RunSummary {
        particles: sim.set.len(),
        fluid_particles: sim.set.count(Phase::Fluid),
        solid_particles: sim.set.count(Phase::Solid),
        wall_particles: sim.set.count(Phase::Wall),
        bonds: sim.bonds.len(),
        min_dt: f64::INFINITY,
        warnings: built.warnings.clone(),
        ..Default::default()
    };
    info!(
        "{}: {} particles ({} fluid, {} solid, {} wall), {} bonds, dt0 = {:.3e} s",
        cfg.name,
        summary.particles,
        summary.fluid_particles,
        summary.solid_particles,
        summary.wall_particles,
        summary.bonds,
        sim.control.dt
    );

    let (tx, rx) = sync_channel::<Job>(SNAPSHOT_QUEUE);
    let writer = spawn_writer(rx, dir.clone(), cfg.snapshot_format);
    let mut next_snap = 0usize;
    let mut next_probe = 0usize;
    let send_snapshot = |sim: &Simulation, k: usize| {
        // a closed channel means the writer failed; its error surfaces on join
        let _ = tx.send(Job::Snapshot(k, Box::new(Snapshot::capture(sim))));
    };
    send_snapshot(&sim, 0);
    next_snap += 1;
    if cfg.end_time > 0.0 {
        series.push(0.0, sample(&sim));
        next_probe += 1;
    }

    let mut failure = None;
    let mut last_log = Instant::now();
    while !sim.is_finished() {
        let dt = sim.control.dt;
        if let Err(e) = sim.step() {
            failure = Some(e);
            break;
        }
        summary.min_dt = summary.min_dt.min(dt);
        summary.max_dt = summary.max_dt.max(dt);
        let t = sim.time();
        if due(t, next_probe, cfg.probe_every) {
            series.push(t, sample(&sim));
            while due(t, next_probe, cfg.probe_every) {
                next_probe += 1;
            }
        }
        if due(t, next_snap, cfg.output_every) {
            send_snapshot(&sim, next_snap);
            while due(t, next_snap, cfg.output_every) {
                next_snap += 1;
            }
        }
        if last_log.elapsed().as_secs_f64() > 10.0 {
            info!("t = {t:.5} s, step {}, dt = {:.3e} s", sim.steps, sim.control.dt);
            last_log = Instant::now();
        }
    }
    drop(tx);
    let written = writer
        .join()
        .map_err(|_| SimError::InvalidInput("snapshot writer panicked".into()))?;

    summary.steps = sim.steps;
    summary.final_time = sim.time();
    summary.broken_bonds = sim.bonds.broken_count();
    summary.components = sim.component_count();
    summary.probe_rows = series.times.len();
    summary.max_speed = sim.set.v.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if summary.steps == 0 {
        summary.min_dt = 0.0;
    }
    summary.flags = sim.flags;
    summary.first_fracture = sim.fracture_log.first().copied();
    summary.status = match (&failure, &written) {
        (Some(e), _) => format!("aborted: {e}"),
        (None, Err(e)) => format!("output failed: {e}"),
        (None, Ok(_)) => "completed".into(),
    };
    summary.snapshots = *written.as_ref().unwrap_or(&0);
    summary.wall_seconds = started.elapsed().as_secs_f64();

    write_probe_series(&dir.join("probes.csv"), &series)?;
    if !sim.fracture_log.is_empty() {
        let text = serde_json::to_string_pretty(&sim.fracture_log).expect("serializable");
        fs::write(dir.join("fractures.json"), text).map_err(|e| SimError::io(dir.join("fractures.json"), e))?;
    }
    if opts.plots && !series.times.is_empty() {
        for (k, header) in series.headers.iter().enumerate() {
            let svg = plot::probe_plot(cfg, &series, k);
            let name = header.split(" [").next().unwrap_or(header);
            let path = dir.join(format!("{name}.svg"));
            fs::write(&path, svg).map_err(|e| SimError::io(&path, e))?;
        }
    }
    let manifest = Manifest {
        version: version_string(),
        config: cfg,
        summary: &summary,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("serializable");
    fs::write(dir.join("manifest.json"), text).map_err(|e| SimError::io(dir.join("manifest.json"), e))?;

    if let Some(e) = failure {
        warn!("{}: {e}", cfg.name);
        return Err(e);
    }
    written?;
    Ok(RunOutcome {
        summary,
        series,
        fracture_log: sim.fracture_log,
    })
}
