mod params;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kpp_cascade::bbm::{compare_bbm_pde, simulate_replicas, BbmConfig, EmpiricalCdf};
use kpp_cascade::cascade::{evolve_lab, evolve_moving_frame, EvolveConfig, WindowPolicy};
use kpp_cascade::experiments::{self, Artifact, Session, RECIPES};
use kpp_cascade::front::{fit_log_correction, front_separation, max_crossing, FrontTrace, LevelSetKind};
use kpp_cascade::kpp::{FieldStack, Grid1D, KppNonlinearity};
use kpp_cascade::selfsim::{evolve_w_system, remainder_decay, WSystemConfig};
use kpp_cascade::table::{emit_csv, read_csv, write_atomic, Table};
use kpp_cascade::wave::solve_profile;
use kpp_cascade::{Error, ErrorCategory};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use params::*;

#[derive(Parser)]
#[command(name = "kpplab", version, about = "Cascading Fisher-KPP laboratory")]
struct Cli {
    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Traveling-wave profile: profile.csv, tail.json.
    Wave(ParamArgs),
    /// Time-dependent run: trajectory.csv, trace.csv, diagnostics.json.
    Evolve(ParamArgs),
    /// Logarithmic front fit of a trace or trajectory: fit.json.
    Front(ParamArgs),
    /// Self-similar system and its spectral data: selfsim.csv, remainder.json.
    Selfsim(ParamArgs),
    /// Cascading BBM maxima: maxima.csv.
    Bbm(ParamArgs),
    /// Empirical maxima against the PDE: ks.json.
    Compare(ParamArgs),
    /// Run a verification recipe (`all`, `list`, or a recipe name).
    Reproduce { recipe: String },
}

#[derive(Args)]
struct ParamArgs {
    /// JSON parameter document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Individual parameters as `--key value` or `--key=value`; values are JSON when they parse.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, num_args = 0..)]
    overrides: Vec<String>,
}

enum Failure {
    Schema(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

impl Failure {
    fn category(&self) -> (&'static str, u8) {
        match self {
            Failure::Schema(_) => ("schema", 2),
            Failure::Run(e) => match e.category() {
                ErrorCategory::Input => ("input", 2),
                ErrorCategory::Numerical => ("numerical", 3),
                ErrorCategory::Io => ("io", 4),
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Schema(m) => m.clone(),
            Failure::Run(e) => e.to_string(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Globals {
    seed: u64,
    threads: Option<usize>,
    out: PathBuf,
}

/// Merges the config file and the `--key value` overrides, then deserializes strictly.
fn resolve<P: DeserializeOwned + Serialize>(args: &ParamArgs, globals: &mut Globals) -> Outcome<P> {
    let mut doc = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(Error::from)?;
            serde_json::from_str::<Value>(&text)
                .map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?
        }
        None => json!({}),
    };
    let Some(map) = doc.as_object_mut() else {
        return Err(Failure::Schema("config must be a JSON object".into()));
    };
    let mut it = args.overrides.iter();
    while let Some(tok) = it.next() {
        let Some(flag) = tok.strip_prefix("--") else {
            return Err(Failure::Schema(format!("unexpected argument '{tok}'")));
        };
        let (key, raw) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Failure::Schema(format!("missing value for --{flag}")))?;
                (flag.to_string(), v.clone())
            }
        };
        let key = key.replace('-', "_");
        let bad = |e: String| Failure::Schema(format!("--{key}: {e}"));
        match key.as_str() {
            "seed" => globals.seed = raw.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            "threads" => {
                globals.threads = Some(raw.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?)
            }
            "out" => globals.out = PathBuf::from(raw),
            _ => {
                let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
                map.insert(key, value);
            }
        }
    }
    serde_json::from_value(doc).map_err(|e| Failure::Schema(e.to_string()))
}

struct Sink {
    dir: PathBuf,
    header: String,
    /// `--out some/file.ext` names the primary artifact instead of a directory.
    primary: Option<String>,
}

impl Sink {
    fn new(globals: &Globals, command: &str, params: &impl Serialize) -> Outcome<Self> {
        let header = json!({ "command": command, "seed": globals.seed, "params": params });
        match (globals.out.extension(), globals.out.file_name()) {
            (Some(_), Some(file)) => {
                let dir = globals.out.parent().unwrap_or(Path::new(""));
                let mut sink = Self::with_header(dir, &header)?;
                sink.primary = Some(file.to_string_lossy().into_owned());
                Ok(sink)
            }
            _ => Self::with_header(&globals.out, &header),
        }
    }

    fn with_header(dir: &Path, header: &Value) -> Outcome<Self> {
        let dir = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            header: serde_json::to_string_pretty(header).expect("serializable header"),
            primary: None,
        })
    }

    /// Path of an artifact; the first one a command writes is its primary artifact.
    fn path(&self, name: &str, primary: bool) -> PathBuf {
        match (&self.primary, primary) {
            (Some(file), true) => self.dir.join(file),
            _ => self.dir.join(name),
        }
    }

    fn csv(&self, name: &str, table: &Table) -> Outcome<()> {
        self.csv_as(name, table, false)
    }

    fn csv_as(&self, name: &str, table: &Table, primary: bool) -> Outcome<()> {
        emit_csv(&self.path(name, primary), &self.header, table)?;
        Ok(())
    }

    /// JSON artifacts carry the resolved configuration under `"config"`.
    fn json(&self, name: &str, value: Value) -> Outcome<()> {
        self.json_as(name, value, false)
    }

    fn json_as(&self, name: &str, mut value: Value, primary: bool) -> Outcome<()> {
        let config: Value = serde_json::from_str(&self.header).expect("header is JSON");
        value = match value {
            Value::Object(mut m) => {
                m.insert("config".into(), config);
                Value::Object(m)
            }
            other => json!({ "config": config, "data": other }),
        };
        let mut bytes = serde_json::to_vec_pretty(&value).expect("serializable artifact");
        bytes.push(b'\n');
        write_atomic(&self.path(name, primary), &bytes)?;
        Ok(())
    }
}

fn wave(args: &ParamArgs, g: &mut Globals) -> Outcome<()> {
    let p: WaveParams = resolve(args, g)?;
    let f = KppNonlinearity::from_spec(p.nonlinearity.clone())?;
    let profile = solve_profile(&f, p.speed, p.half_width, p.tol)?;
    let sink = Sink::new(g, "wave", &p)?;
    let mut t = Table::new(&["x", "U"]);
    for (j, &u) in profile.values.iter().enumerate() {
        t.push(vec![profile.grid.x(j).into(), u.into()])?;
    }
    sink.csv_as("profile.csv", &t, true)?;
    sink.json(
        "tail.json",
        json!({ "speed": profile.speed, "cstar": profile.cstar, "tail": profile.tail,
                "ode_residual": profile.ode_residual }),
    )?;
    println!(
        "c = {}: lambda_est = {:.6}, ode residual = {:.2e}",
        profile.speed, profile.tail.lambda_est, profile.ode_residual
    );
    Ok(())
}

fn evolve(args: &ParamArgs, g: &mut Globals) -> Outcome<()> {
    let mut p: EvolveParams = resolve(args, g)?;
    if p.frame_t0.is_some() {
        p.window = WindowPolicy::Fixed;
    }
    if p.snapshots.is_empty() {
        p.snapshots = vec![p.t_end];
    }
    let f = KppNonlinearity::from_spec(p.nonlinearity.clone())?;
    let grid = Grid1D::span(p.x_min, p.x_max, p.dx)?;
    let mut cfg = EvolveConfig::new(p.k, p.alpha, f, grid, p.dt, p.t_end)
        .with_window(p.window)
        .with_snapshots(&p.snapshots);
    if let Some(level) = p.trace_level {
        cfg = cfg.with_trace(level, p.trace_every);
    }
    let init = FieldStack::heaviside(grid, p.k, p.heaviside_edge);
    let traj = match p.frame_t0 {
        Some(t0) => evolve_moving_frame(&cfg.with_cascade_frames(t0)?, &init)?,
        None => evolve_lab(&cfg, &init)?,
    };
    let sink = Sink::new(g, "evolve", &p)?;
    let mut t = Table::new(&["t", "component", "x", "value"]);
    for s in &traj.snapshots {
        for (i, row) in s.values.iter().enumerate() {
            for j in (0..s.grid.n).step_by(p.stride.max(1)) {
                t.push(vec![s.time.into(), (i + 1).into(), s.grid.x(j).into(), row[j].into()])?;
            }
        }
    }
    sink.csv_as("trajectory.csv", &t, true)?;
    if !traj.traces.is_empty() {
        sink.csv("trace.csv", &experiments::trace_table(&traj.traces)?)?;
    }
    sink.json("diagnostics.json", json!({ "diagnostics": traj.diagnostics }))?;
    println!(
        "{} steps, {} snapshots, clamp count {}",
        traj.diagnostics.steps,
        traj.snapshots.len(),
        traj.diagnostics.clamp_count
    );
    Ok(())
}

fn traces_from_table(table: &Table, level: f64) -> Outcome<Vec<FrontTrace>> {
    let ts = table.column_f64("t")?;
    let comp = table.column_f64("component")?;
    let mut traces: Vec<FrontTrace> = Vec::new();
    let mut slot = |c: f64| -> Outcome<usize> {
        let i = c as usize;
        if i < 1 || i as f64 != c {
            return Err(Failure::Schema(format!("bad component index {c}")));
        }
        while traces.len() < i {
            traces.push(FrontTrace::new(level, LevelSetKind::MaxLevelSet));
        }
        Ok(i - 1)
    };
    let mut pushes = vec![];
    if table.column("position").is_some() {
        let pos = table.column_f64("position")?;
        for r in 0..ts.len() {
            pushes.push((slot(comp[r])?, ts[r], pos[r]));
        }
    } else {
        let xs = table.column_f64("x")?;
        let vs = table.column_f64("value")?;
        let mut start = 0;
        while start < ts.len() {
            let mut end = start + 1;
            while end < ts.len() && ts[end] == ts[start] && comp[end] == comp[start] {
                end += 1;
            }
            if end - start >= 2 {
                let grid = Grid1D::new(xs[start], xs[start + 1] - xs[start], end - start)?;
                if let Some(x) = max_crossing(&grid, &vs[start..end], level) {
                    pushes.push((slot(comp[start])?, ts[start], x));
                }
            }
            start = end;
        }
    }
    for (i, t, x) in pushes {
        traces[i].push(t, x)?;
    }
    Ok(traces)
}

fn front(args: &ParamArgs, g: &mut Globals) -> Outcome<()> {
    let p: FrontParams = resolve(args, g)?;
    let (_, table) = read_csv(&p.input)?;
    let traces = traces_from_table(&table, p.level)?;
    let fits = traces
        .iter()
        .map(|t| fit_log_correction(t, p.cstar, p.window))
        .collect::<Result<Vec<_>, _>>()?;
    let window = |t: &FrontTrace| FrontTrace {
        samples: t.samples.iter().copied().filter(|(s, _)| *s >= p.window.0 && *s <= p.window.1).collect(),
        ..t.clone()
    };
    let separations = traces
        .windows(2)
        .map(|w| front_separation(&window(&w[0]), &window(&w[1])).map(|s| s.slope_vs_ln_t))
        .collect::<Result<Vec<_>, _>>()?;
    let sink = Sink::new(g, "front", &p)?;
    sink.json_as("fit.json", json!({ "fits": fits, "separation_slopes": separations }), true)?;
    for (i, f) in fits.iter().enumerate() {
        println!("component {}: a_hat = {:.4}, b_hat = {:.4}", i + 1, f.a_hat, f.b_hat);
    }
    Ok(())
}

fn selfsim(args: &ParamArgs, g: &mut Globals) -> Outcome<()> {
    let p: SelfsimParams = resolve(args, g)?;
    let grid = Grid1D::span(0.0, p.eta_max, p.deta)?;
    let cfg = WSystemConfig {
        dtau: p.dtau,
        output_every: p.output_every,
        ..WSystemConfig::new(p.k, p.alpha, p.epsilon, p.tau_end)
    };
    let series = evolve_w_system(&cfg, &grid, &experiments::w_initial_rows(&grid, p.k))?;
    let sink = Sink::new(g, "selfsim", &p)?;
    let mut t = Table::new(&["tau", "component", "q", "remainder_norm"]);
    for d in &series {
        for i in 0..d.q.len() {
            t.push(vec![d.tau.into(), (i + 1).into(), d.q[i].into(), d.remainder_norm[i].into()])?;
        }
    }
    sink.csv_as("selfsim.csv", &t, true)?;
    let fits = remainder_decay(&series, p.fit_window).ok();
    let qk0 = series[0].q[p.k - 1];
    let ratio = series.last().map(|d| d.q[0] / qk0);
    sink.json("remainder.json", json!({ "fits": fits, "q1_end_over_qk0": ratio }))?;
    println!("q1(tau_end) / qk(0) = {:.4}", ratio.unwrap_or(f64::NAN));
    Ok(())
}

fn bbm(args: &ParamArgs, g: &mut Globals) -> Outcome<()> {
    let p: BbmParams = resolve(args, g)?;
    let cfg = BbmConfig {
        max_particles: p.max_particles,
        ..BbmConfig::new(p.k, p.alpha, p.t, g.seed)
    };
    let reps = simulate_replicas(&cfg, p.replicas)?;
    let sink = Sink::new(g, "bbm", &p)?;
    sink.csv_as("maxima.csv", &experiments::maxima_table(&reps)?, true)?;
    let truncated = reps.iter().filter(|r| r.truncated).count();
    println!("{} replicas, {} truncated", reps.len(), truncated);
    Ok(())
}

/// Component 1 at time `t` from an `evolve` trajectory file.
fn pde_from_file(path: &Path, t: f64) -> Outcome<FieldStack> {
    let (_, table) = read_csv(path)?;
    let ts = table.column_f64("t")?;
    let comp = table.column_f64("component")?;
    let xs = table.column_f64("x")?;
    let vs = table.column_f64("value")?;
    let rows: Vec<usize> = (0..ts.len())
        .filter(|&r| comp[r] == 1.0 && (ts[r] - t).abs() <= 1e-9 * t.max(1.0))
        .collect();
    if rows.len() < 2 {
        return Err(Failure::Run(Error::NoData(format!(
            "{} has no component-1 snapshot at t = {t}",
            path.display()
        ))));
    }
    let grid = Grid1D::new(xs[rows[0]], xs[rows[1]] - xs[rows[0]], rows.len())?;
    Ok(FieldStack::new(grid, ts[rows[0]], vec![rows.iter().map(|&r| vs[r]).collect()])?)
}

fn compare(args: &ParamArgs, g: &mut Globals) -> Outcome<()> {
    let p: CompareParams = resolve(args, g)?;
    let (_, table) = read_csv(&p.bbm)?;
    let maxima = table.column_f64("max_position")?;
    let truncated = table.column_f64("truncated")?;
    let samples: Vec<f64> = maxima.iter().zip(&truncated).filter(|(_, &tr)| tr == 0.0).map(|(&m, _)| m).collect();
    let cdf = EmpiricalCdf::from_samples(samples)?;
    let pde = match &p.pde {
        Some(path) => pde_from_file(path, p.t)?,
        None => experiments::bbm_reference_pde(p.k, p.alpha, p.t)?,
    };
    let report = compare_bbm_pde(&cdf, &pde, p.t)?;
    let sink = Sink::new(g, "compare", &p)?;
    sink.json_as("ks.json", json!({ "report": report }), true)?;
    println!("KS distance {:.4} over {} samples", report.ks_distance, report.samples);
    Ok(())
}

/// Returns whether every requested criterion passed.
fn reproduce(name: &str, g: &Globals) -> Outcome<bool> {
    if name == "list" {
        for r in RECIPES {
            println!("{:>2} {:<16} {}", r.criterion, r.name, r.title);
        }
        return Ok(true);
    }
    let names: Vec<&str> = if name == "all" {
        RECIPES.iter().map(|r| r.name).collect()
    } else {
        vec![name]
    };
    let session = Session::new(g.seed);
    let mut all = true;
    for n in names {
        let outcome = experiments::run_recipe(n, &session)?;
        let sink = Sink::with_header(&g.out.join(n), &session.describe(outcome.recipe))?;
        sink.json("result.json", outcome.to_json())?;
        for a in &outcome.artifacts {
            match a {
                Artifact::Json { name, value } => sink.json(name, value.clone())?,
                Artifact::Csv { name, table } => sink.csv(name, table)?,
            }
        }
        println!("{}", outcome.summary());
        all &= outcome.passed();
    }
    Ok(all)
}

fn run(cli: Cli) -> Outcome<ExitCode> {
    let mut g = Globals {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
    };
    let body = |g: &mut Globals| -> Outcome<ExitCode> {
        match &cli.command {
            Command::Wave(a) => wave(a, g)?,
            Command::Evolve(a) => evolve(a, g)?,
            Command::Front(a) => front(a, g)?,
            Command::Selfsim(a) => selfsim(a, g)?,
            Command::Bbm(a) => bbm(a, g)?,
            Command::Compare(a) => compare(a, g)?,
            Command::Reproduce { recipe } => {
                // a failed criterion is a result, not a crash: exit 1
                return Ok(if reproduce(recipe, g)? { ExitCode::SUCCESS } else { ExitCode::from(1) });
            }
        }
        Ok(ExitCode::SUCCESS)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = g.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Failure::Schema(e.to_string()))?;
    pool.install(|| body(&mut g))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(f) => {
            let (category, code) = f.category();
            eprintln!("{}", json!({ "error": category, "message": f.message() }));
            ExitCode::from(code)
        }
    }
}
