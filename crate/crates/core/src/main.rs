use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use curve_director::energy::{energy_elm, lower_bound};
use curve_director::evolve::{
    initial_states, integrate, minimize, ConstraintSet, DirectorSeed, FlowConfig, FlowDiagnostics, InitialKind,
    RunResult,
};
use curve_director::geometry::turning_number;
use curve_director::io::{
    emit_diagnostics, output_dir, read_state, sha256_file, write_state, RunManifest, StateFile,
};
use curve_director::verify::{run_suite, Suite};
use curve_director::{CurveState, Error, ModelParams, Result};

#[derive(Parser, Debug)]
#[command(name = "curve-director", version, about = "Energy, gradient flow and minimization of closed curves carrying a director field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Print the energy breakdown and the gap to the lower bound.
    Energy(EnergyArgs),
    /// Run the gradient flow with a fixed time step.
    Flow(FlowArgs),
    /// Minimize by preconditioned descent.
    Minimize(MinimizeArgs),
    /// Run verification suites; exits 1 if any check fails.
    Check(CheckArgs),
    /// Minimize over a grid of parameters.
    Sweep(SweepArgs),
    /// Write a seed state.
    MakeInitial(MakeInitialArgs),
}

#[derive(Args, Debug, Serialize)]
struct EnergyArgs {
    state: PathBuf,
    /// Run directory for the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FlowArgs {
    state: PathBuf,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write an intermediate state every K accepted steps.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Resample to equal chords every K steps.
    #[arg(long, default_value_t = 1)]
    retangentialize_every: usize,
    /// Precondition the step as in `minimize`.
    #[arg(long)]
    preconditioned: bool,
}

#[derive(Args, Debug, Serialize)]
struct MinimizeArgs {
    state: PathBuf,
    /// Stop when the sup norm of the flow velocities falls below this.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 20_000)]
    max_steps: usize,
    /// Initial pseudo-time step.
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
}

#[derive(Args, Debug, Serialize)]
struct CheckArgs {
    #[arg(long, value_enum, default_value_t = SuiteArg::All)]
    suite: SuiteArg,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum SuiteArg {
    All,
    Grad,
    Invariance,
    Convergence,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// `a:b:k`, k evenly spaced values from a to b.
    #[arg(long, value_parser = parse_range)]
    lambda: Range,
    #[arg(long, value_parser = parse_range)]
    delta: Range,
    /// Grid size of each run.
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize)]
struct Range {
    start: f64,
    end: f64,
    count: usize,
}

impl Range {
    fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        (0..self.count)
            .map(|i| self.start + (self.end - self.start) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

fn parse_range(s: &str) -> std::result::Result<Range, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, k] = parts.as_slice() else {
        return Err(format!("expected a:b:k, got `{s}`"));
    };
    let start = a.parse::<f64>().map_err(|e| format!("bad start `{a}`: {e}"))?;
    let end = b.parse::<f64>().map_err(|e| format!("bad end `{b}`: {e}"))?;
    let count = k.parse::<usize>().map_err(|e| format!("bad count `{k}`: {e}"))?;
    if count == 0 {
        return Err("count must be at least 1".into());
    }
    Ok(Range { start, end, count })
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum KindArg {
    Circle,
    Ellipse,
    FigureEight,
    PerturbedCircle,
    MultiplyCovered,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum DirectorArg {
    Normal,
    Zero,
}

#[derive(Args, Debug, Serialize)]
struct MakeInitialArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, default_value_t = 128)]
    n: usize,
    /// Output state file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 2.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 0.05)]
    amplitude: f64,
    #[arg(long, default_value_t = 2)]
    mode: u32,
    #[arg(long, default_value_t = 2)]
    coverings: u32,
    #[arg(long, value_enum, default_value_t = DirectorArg::Normal)]
    director: DirectorArg,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Length constraint target.
    #[arg(long)]
    length: Option<f64>,
    /// Area constraint target.
    #[arg(long)]
    area: Option<f64>,
    /// Constrain the director to unit length.
    #[arg(long)]
    unit_director: bool,
    /// Run directory for the manifest.
    #[arg(long)]
    run_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn run_dir(explicit: &Option<PathBuf>, name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => output_dir(None).join(name),
    }
}

struct ManifestDraft {
    command: &'static str,
    config: serde_json::Value,
    input: Option<PathBuf>,
    started: Instant,
}

impl ManifestDraft {
    fn new(command: &'static str, args: &impl Serialize, input: Option<&Path>) -> Self {
        Self {
            command,
            config: serde_json::to_value(args).unwrap_or(serde_json::Value::Null),
            input: input.map(Path::to_path_buf),
            started: Instant::now(),
        }
    }

    fn finish(self, dir: &Path, outputs: Vec<PathBuf>, termination: &str) -> Result<()> {
        let input_sha256 = match &self.input {
            Some(p) => Some(sha256_file(p)?),
            None => None,
        };
        let manifest = RunManifest {
            command: format!("{} ({})", self.command, command_line()),
            config: self.config,
            input_sha256,
            input_path: self.input.map(|p| p.display().to_string()),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            termination: termination.to_string(),
        };
        manifest.write(dir)?;
        Ok(())
    }
}

fn mean_radius(curve: &CurveState) -> f64 {
    let c = curve.centroid();
    curve.points().iter().map(|p| (p - c).norm()).sum::<f64>() / curve.n() as f64
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Energy(a) => energy_cmd(a),
        Command::Flow(a) => flow_cmd(a),
        Command::Minimize(a) => minimize_cmd(a),
        Command::Check(a) => check_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::MakeInitial(a) => make_initial_cmd(a),
    }
}

fn energy_cmd(a: EnergyArgs) -> Result<bool> {
    let draft = ManifestDraft::new("energy", &a, Some(&a.state));
    let s = read_state(&a.state)?;
    let e = energy_elm(&s.curve, &s.field, &s.params)?;
    let lb = lower_bound(&s.params);
    println!("n={}", s.curve.n());
    println!("lambda={}", s.params.lambda);
    println!("delta={}", s.params.delta);
    println!("bending={:.17e}", e.bending);
    println!("frank={:.17e}", e.frank);
    println!("length={:.17e}", e.length);
    println!("total_E={:.17e}", e.total_e);
    println!("total_ELM={:.17e}", e.total_elm);
    println!("area={:.17e}", s.curve.signed_area());
    match turning_number(&s.curve) {
        Ok(k) => println!("turning={k}"),
        Err(_) => println!("turning=unresolved"),
    }
    println!("lower_bound={lb:.17e}");
    println!("gap={:.17e}", e.total_elm - lb);
    draft.finish(&run_dir(&a.out, "energy"), vec![], "completed")?;
    Ok(true)
}

fn write_outputs(dir: &Path, state: &StateFile, diagnostics: &FlowDiagnostics) -> Result<Vec<PathBuf>> {
    let final_path = dir.join("final.json");
    let diag_path = dir.join("diagnostics.csv");
    write_state(state, &final_path)?;
    emit_diagnostics(diagnostics, &diag_path)?;
    Ok(vec![final_path, diag_path])
}

fn result_state(input: &StateFile, run: &RunResult, generator: &str) -> StateFile {
    let mut s = StateFile::new(input.params, run.curve.clone(), run.field.clone());
    s.constraints = input.constraints.clone();
    s.provenance = input.provenance.clone();
    s.provenance.insert("generator".into(), generator.into());
    s.provenance.insert("revision".into(), env!("CARGO_PKG_VERSION").into());
    s
}

fn print_summary(params: &ModelParams, run: &RunResult) {
    let last = run.diagnostics.final_record().expect("diagnostics start with the initial state");
    let lb = lower_bound(params);
    println!("termination={}", run.termination);
    println!("steps={}", last.step);
    println!("rejected_steps={}", run.diagnostics.rejected_steps);
    println!("final_energy={:.12}", last.energy.total_elm);
    println!("lower_bound={lb:.12}");
    println!("gap={:.6e}", last.energy.total_elm - lb);
    println!("radius={:.12}", mean_radius(&run.curve));
    println!("max_V={:.6e}", last.max_v);
    println!("max_W={:.6e}", last.max_w);
}

fn flow_cmd(a: FlowArgs) -> Result<bool> {
    let draft = ManifestDraft::new("flow", &a, Some(&a.state));
    let input = read_state(&a.state)?;
    let dir = run_dir(&a.out, "flow");
    let constraints = input.constraints.clone().unwrap_or_default();
    let chunk = a.checkpoint_every.filter(|k| *k > 0).unwrap_or(a.steps.max(1));
    let mut curve = input.curve.clone();
    let mut field = input.field.clone();
    let mut diagnostics: Option<FlowDiagnostics> = None;
    let mut outputs = Vec::new();
    let mut done = 0;
    let mut last: Option<RunResult> = None;
    while done < a.steps || last.is_none() {
        let steps = chunk.min(a.steps - done);
        let config = FlowConfig {
            dt: a.dt,
            max_steps: steps,
            stop_grad_tol: f64::MIN_POSITIVE,
            retangentialize_every: a.retangentialize_every,
            preconditioned: a.preconditioned,
            adaptive: false,
            ..FlowConfig::default()
        };
        let run = integrate(&curve, &field, &input.params, &constraints, &config)?;
        let (offset_step, offset_t) = diagnostics
            .as_ref()
            .and_then(|d| d.records.last())
            .map(|r| (r.step, r.t))
            .unwrap_or((0, 0.0));
        match diagnostics.as_mut() {
            None => diagnostics = Some(run.diagnostics.clone()),
            Some(d) => {
                d.rejected_steps += run.diagnostics.rejected_steps;
                d.records.extend(run.diagnostics.records.iter().skip(1).map(|r| {
                    let mut r = r.clone();
                    r.step += offset_step;
                    r.t += offset_t;
                    r
                }));
            }
        }
        let advanced = run.diagnostics.final_record().map_or(0, |r| r.step);
        done += advanced;
        curve = run.curve.clone();
        field = run.field.clone();
        let stop = advanced < steps;
        if a.checkpoint_every.is_some() && done < a.steps && !stop {
            let path = dir.join("checkpoints").join(format!("step_{done:08}.json"));
            write_state(&result_state(&input, &run, "flow checkpoint"), &path)?;
            outputs.push(path);
        }
        last = Some(run);
        if stop {
            break;
        }
    }
    let mut run = last.expect("at least one chunk runs");
    run.diagnostics = diagnostics.expect("at least one chunk runs");
    outputs.extend(write_outputs(&dir, &result_state(&input, &run, "flow"), &run.diagnostics)?);
    print_summary(&input.params, &run);
    println!("out={}", dir.display());
    draft.finish(&dir, outputs, &run.termination.to_string())?;
    Ok(true)
}

fn minimize_cmd(a: MinimizeArgs) -> Result<bool> {
    let draft = ManifestDraft::new("minimize", &a, Some(&a.state));
    let input = read_state(&a.state)?;
    let dir = run_dir(&a.out, "minimize");
    let constraints = input.constraints.clone().unwrap_or_default();
    let config = FlowConfig {
        dt: a.dt,
        stop_grad_tol: a.tol,
        max_steps: a.max_steps,
        ..FlowConfig::descent()
    };
    let run = minimize(&input.curve, &input.field, &input.params, &constraints, &config)?;
    let outputs = write_outputs(&dir, &result_state(&input, &run, "minimize"), &run.diagnostics)?;
    print_summary(&input.params, &run);
    println!("out={}", dir.display());
    draft.finish(&dir, outputs, &run.termination.to_string())?;
    Ok(true)
}

fn check_cmd(a: CheckArgs) -> Result<bool> {
    let draft = ManifestDraft::new("check", &a, None);
    let suite = match a.suite {
        SuiteArg::All => Suite::All,
        SuiteArg::Grad => Suite::Grad,
        SuiteArg::Invariance => Suite::Invariance,
        SuiteArg::Convergence => Suite::Convergence,
    };
    let reports = run_suite(suite)?;
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    println!("checks={} failed={failed}", reports.len());
    let dir = run_dir(&a.out, "check");
    std::fs::create_dir_all(&dir)?;
    let report_path = dir.join("reports.json");
    let text = serde_json::to_string_pretty(&reports).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(&report_path, text + "\n")?;
    draft.finish(&dir, vec![report_path], if failed == 0 { "passed" } else { "failed" })?;
    Ok(failed == 0)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    lambda: f64,
    delta: f64,
    final_energy: f64,
    lower_bound: f64,
    gap: f64,
    radius: f64,
    expected_radius: f64,
    termination: String,
    steps: usize,
}

fn sweep_cmd(a: SweepArgs) -> Result<bool> {
    let draft = ManifestDraft::new("sweep", &a, None);
    let dir = run_dir(&a.out, "sweep");
    let cells: Vec<(f64, f64)> = a
        .lambda
        .values()
        .into_iter()
        .flat_map(|l| a.delta.values().into_iter().map(move |d| (l, d)))
        .collect();
    let results: Vec<Result<(SweepRow, Vec<PathBuf>)>> = cells
        .par_iter()
        .map(|&(lambda, delta)| {
            let params = ModelParams::new(lambda, delta)?;
            let kind = InitialKind::PerturbedCircle {
                radius: 1.0,
                amplitude: 0.05,
                mode: 2,
            };
            let (curve, field) = initial_states(kind, a.n, DirectorSeed::Normal)?;
            let config = FlowConfig {
                stop_grad_tol: a.tol,
                ..FlowConfig::descent()
            };
            let run = minimize(&curve, &field, &params, &ConstraintSet::free(), &config)?;
            let last = run.diagnostics.final_record().expect("initial record");
            let lb = lower_bound(&params);
            let cell_dir = dir.join(format!("lambda={lambda}_delta={delta}"));
            let state = StateFile::new(params, run.curve.clone(), run.field.clone())
                .with_provenance("generator", "sweep")
                .with_provenance("seed", "perturbed_circle mode=2 amplitude=0.05");
            let outputs = write_outputs(&cell_dir, &state, &run.diagnostics)?;
            let row = SweepRow {
                lambda,
                delta,
                final_energy: last.energy.total_elm,
                lower_bound: lb,
                gap: last.energy.total_elm - lb,
                radius: mean_radius(&run.curve),
                expected_radius: (lambda / (2.0 * (lambda + delta * delta))).sqrt(),
                termination: run.termination.to_string(),
                steps: last.step,
            };
            Ok((row, outputs))
        })
        .collect();

    std::fs::create_dir_all(&dir)?;
    let summary = dir.join("sweep.csv");
    let mut w = csv::Writer::from_path(&summary).map_err(|e| Error::Io(e.to_string()))?;
    let mut outputs = vec![summary.clone()];
    let mut ok = true;
    println!("lambda,delta,final_energy,lower_bound,gap,radius,expected_radius,termination,steps");
    for r in results {
        match r {
            Ok((row, out)) => {
                println!(
                    "{},{},{:.12},{:.12},{:.6e},{:.9},{:.9},{},{}",
                    row.lambda,
                    row.delta,
                    row.final_energy,
                    row.lower_bound,
                    row.gap,
                    row.radius,
                    row.expected_radius,
                    row.termination,
                    row.steps
                );
                w.serialize(&row).map_err(|e| Error::Io(e.to_string()))?;
                outputs.extend(out);
            }
            Err(e) => {
                eprintln!("error: {e}");
                ok = false;
            }
        }
    }
    w.flush()?;
    draft.finish(&dir, outputs, if ok { "completed" } else { "failed" })?;
    Ok(ok)
}

fn make_initial_cmd(a: MakeInitialArgs) -> Result<bool> {
    let draft = ManifestDraft::new("make-initial", &a, None);
    let kind = match a.kind {
        KindArg::Circle => InitialKind::Circle { radius: a.radius },
        KindArg::Ellipse => InitialKind::Ellipse { a: a.a, b: a.b },
        KindArg::FigureEight => InitialKind::FigureEight { scale: a.radius },
        KindArg::PerturbedCircle => InitialKind::PerturbedCircle {
            radius: a.radius,
            amplitude: a.amplitude,
            mode: a.mode,
        },
        KindArg::MultiplyCovered => InitialKind::MultiplyCovered {
            radius: a.radius,
            coverings: a.coverings,
        },
    };
    let seed = match a.director {
        DirectorArg::Normal => DirectorSeed::Normal,
        DirectorArg::Zero => DirectorSeed::Zero,
    };
    let params = ModelParams::new(a.lambda, a.delta)?;
    let (curve, field) = initial_states(kind, a.n, seed)?;
    let mut state = StateFile::new(params, curve, field)
        .with_provenance("generator", "make-initial")
        .with_provenance(
            "kind",
            serde_json::to_string(&kind).map_err(|e| Error::Io(e.to_string()))?,
        )
        .with_provenance("revision", env!("CARGO_PKG_VERSION"));
    if a.length.is_some() || a.area.is_some() || a.unit_director {
        state.constraints = Some(ConstraintSet::new(a.length, a.area, a.unit_director)?);
    }
    write_state(&state, &a.out)?;
    println!("wrote={}", a.out.display());
    draft.finish(&run_dir(&a.run_dir, "make-initial"), vec![a.out.clone()], "completed")?;
    Ok(true)
}
