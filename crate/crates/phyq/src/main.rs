use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phyq::eval::{default_attempts, run_protocol, ProtocolConfig};
use phyq::files::{
    generate_task_set, read_json, read_run_log, read_task_set, write_json, write_task_set, RunLogWriter, TaskSet,
};
use phyq::reports::{build_report, generalisation_table, load_human_stats, phyq_table, scenario_table, ReportFile};
use phyq::server::{Server, ServerConfig};
use phyq_core::game::{replay, Action};
use phyq_core::score::{aggregate, AttemptRecord, HumanStats};
use phyq_core::taskgen::{catalog, find_template, make_splits, SplitMode, SplitSpec, TaskTemplate};

#[derive(Parser)]
#[command(
    name = "phyq",
    version,
    about = "Physical-reasoning testbed: task generation, evaluation, scoring and agent server"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate verified task instances and their manifest.
    Generate(GenerateArgs),
    /// Run an in-process agent through a generalisation protocol.
    Eval(EvalArgs),
    /// Aggregate run logs into pass-rate tables and Phy-Q scores.
    Score(ScoreArgs),
    /// Serve episodes to external agents.
    Serve(ServeArgs),
    /// Replay a task with its reference solution or a transcript.
    Replay(ReplayArgs),
    /// Write a human statistics file.
    Human(HumanArgs),
    /// Per-task digests of tick-by-tick state hashes.
    Hashes(HashesArgs),
    /// Measure simulated seconds per wall second on reference replays.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Local,
    Broad,
}

impl From<Mode> for SplitMode {
    fn from(m: Mode) -> SplitMode {
        match m {
            Mode::Local => SplitMode::Local,
            Mode::Broad => SplitMode::Broad,
        }
    }
}

fn mode_name(m: SplitMode) -> &'static str {
    match m {
        SplitMode::Local => "local",
        SplitMode::Broad => "broad",
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// Template id such as 3.1; repeat for several. Defaults to the whole catalog.
    #[arg(long = "template")]
    templates: Vec<String>,
    #[arg(long, default_value_t = phyq_core::taskgen::DEFAULT_TASKS_PER_TEMPLATE)]
    count: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// One of: random, pig_shooter, heuristic, datalab, eagle, bambirds, learner.
    #[arg(long)]
    agent: String,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Attempts per test task. Defaults to 50 for random, 1 for the learner, 5 otherwise.
    #[arg(long)]
    attempts: Option<u32>,
    /// Split file. Defaults to the catalog's split for the mode.
    #[arg(long)]
    splits: Option<PathBuf>,
    /// Directory written by `generate`. Without it tasks are generated in memory.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Tasks per template when generating in memory.
    #[arg(long, default_value_t = 20)]
    tasks_per_template: u32,
    /// Seed for in-memory generation and for attempt seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Output directory of an `eval` run; repeat for several agents.
    #[arg(long = "log", required = true)]
    logs: Vec<PathBuf>,
    /// Human statistics or a play-session export. Defaults to the synthetic profile.
    #[arg(long)]
    human: Option<PathBuf>,
    /// Output directory of the random agent's `eval` run.
    #[arg(long)]
    random_log: PathBuf,
    /// Where to write the report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 7070)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long, default_value_t = 64)]
    max_sessions: usize,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    template: String,
    #[arg(long)]
    index: u32,
    /// JSON list of actions, or a transcript object with an `actions` field.
    #[arg(long)]
    actions: Option<PathBuf>,
}

#[derive(Args)]
struct HumanArgs {
    /// Write the empty schema to be filled with measured values instead of
    /// the synthetic profile.
    #[arg(long)]
    empty: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HashesArgs {
    #[arg(long, default_value_t = 20)]
    tasks: usize,
    #[arg(long, default_value_t = 1000)]
    ticks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// Tasks per template.
    #[arg(long, default_value_t = 2)]
    count: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Eval(a) => eval(a),
        Command::Score(a) => score(a),
        Command::Serve(a) => serve(a),
        Command::Replay(a) => replay_cmd(a),
        Command::Human(a) => human(a),
        Command::Hashes(a) => hashes(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn split_file(dir: &Path, mode: SplitMode) -> PathBuf {
    dir.join(format!("splits.{}.json", mode_name(mode)))
}

fn generate(a: GenerateArgs) -> CliResult {
    let full = catalog();
    let templates: Vec<TaskTemplate> = if a.templates.is_empty() {
        full.clone()
    } else {
        a.templates.iter().map(|t| find_template(t)).collect::<Result<_, _>>()?
    };
    let set = generate_task_set(&templates, a.count, a.seed)?;
    let manifest = write_task_set(&a.out, &set, &full)?;
    for mode in [SplitMode::Local, SplitMode::Broad] {
        match make_splits(&templates, mode, a.count) {
            Ok(s) => write_json(&split_file(&a.out, mode), &s)?,
            Err(e) => eprintln!("no {} split: {e}", mode_name(mode)),
        }
    }
    println!("wrote {} tasks from {} templates to {}", manifest.tasks.len(), templates.len(), a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let mode: SplitMode = a.mode.into();
    let tasks: TaskSet = match &a.catalog {
        Some(dir) => read_task_set(dir)?,
        None => generate_task_set(&catalog(), a.tasks_per_template, a.seed)?,
    };
    let splits: SplitSpec = match (&a.splits, &a.catalog) {
        (Some(f), _) => read_json(f)?,
        (None, Some(dir)) if split_file(dir, mode).exists() => read_json(&split_file(dir, mode))?,
        _ => make_splits(&catalog(), mode, tasks.tasks_per_template)?,
    };
    let cfg = ProtocolConfig {
        attempts: a.attempts.unwrap_or_else(|| default_attempts(&a.agent)),
        run_seed: a.seed,
        threads: a.threads,
        ..ProtocolConfig::new(&a.agent, mode)
    };
    let name = mode_name(mode);
    let mut writer = RunLogWriter::create(&a.out.join(format!("{name}.jsonl")))?;
    let mut write_err = None;
    let log = run_protocol(&cfg, &tasks, &splits, |r| {
        if let Err(e) = writer.append(r) {
            write_err.get_or_insert(e);
        }
    })?;
    writer.flush()?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    write_json(&a.out.join(format!("{name}.splits.json")), &splits)?;
    let agg = aggregate(&log, &splits);
    write_json(&a.out.join(format!("{name}.summary.json")), &agg)?;
    println!("{} {name}: {} attempts, pass rate {:.4}", a.agent, log.len(), agg.headline);
    Ok(())
}

/// Logs of one `eval` output directory.
struct RunDir {
    agent: String,
    local: Option<(Vec<AttemptRecord>, SplitSpec)>,
    broad: Option<(Vec<AttemptRecord>, SplitSpec)>,
}

fn load_run_dir(dir: &Path) -> Result<RunDir, Box<dyn std::error::Error>> {
    let mut out = RunDir { agent: String::new(), local: None, broad: None };
    for mode in [SplitMode::Local, SplitMode::Broad] {
        let name = mode_name(mode);
        let log_path = dir.join(format!("{name}.jsonl"));
        if !log_path.exists() {
            continue;
        }
        let log = read_run_log(&log_path)?;
        let splits: SplitSpec = read_json(&dir.join(format!("{name}.splits.json")))?;
        if let Some(r) = log.first() {
            out.agent = r.agent.clone();
        }
        match mode {
            SplitMode::Local => out.local = Some((log, splits)),
            SplitMode::Broad => out.broad = Some((log, splits)),
        }
    }
    if out.local.is_none() && out.broad.is_none() {
        return Err(format!("{} holds no run log", dir.display()).into());
    }
    Ok(out)
}

fn as_refs(x: &Option<(Vec<AttemptRecord>, SplitSpec)>) -> Option<(&[AttemptRecord], &SplitSpec)> {
    x.as_ref().map(|(l, s)| (l.as_slice(), s))
}

fn score(a: ScoreArgs) -> CliResult {
    let human = match &a.human {
        Some(p) => load_human_stats(p)?,
        None => HumanStats::synthetic(),
    };
    human.validate()?;
    let random_dir = load_run_dir(&a.random_log)?;
    let random = build_report("random", as_refs(&random_dir.local), as_refs(&random_dir.broad), None, None)?;
    let random_rates = phyq::reports::scoring_rates(&random).cloned().ok_or("random log has no rates")?;
    let mut reports = Vec::new();
    for dir in &a.logs {
        let run = load_run_dir(dir)?;
        reports.push(build_report(
            &run.agent,
            as_refs(&run.local),
            as_refs(&run.broad),
            Some(&human),
            Some(&random_rates),
        )?);
    }
    println!("human statistics: {}\n", human.source);
    println!("{}", generalisation_table(&reports));
    println!("{}", scenario_table(&reports));
    println!("{}", phyq_table(&reports));
    if let Some(out) = a.out {
        ReportFile::new(reports).save(&out)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let tasks = read_task_set(&a.catalog)?;
    let n = tasks.tasks.len();
    let server =
        Server::bind(&ServerConfig { addr: format!("{}:{}", a.host, a.port), max_sessions: a.max_sessions }, tasks)?;
    println!("serving {n} tasks on {}", server.local_addr()?);
    server.run()?;
    Ok(())
}

fn replay_cmd(a: ReplayArgs) -> CliResult {
    let tasks = read_task_set(&a.catalog)?;
    let task = tasks.get(&a.template, a.index).ok_or_else(|| format!("no task {} #{}", a.template, a.index))?;
    let actions: Vec<Action> = match &a.actions {
        None => task.reference_solution.clone(),
        Some(p) => {
            let v: serde_json::Value = read_json(p)?;
            let list = v.get("actions").cloned().unwrap_or(v);
            serde_json::from_value(list)?
        }
    };
    let outcome = replay(&task.level, &actions)?;
    println!("{}", serde_json::to_string_pretty(&outcome)?);
    Ok(())
}

fn human(a: HumanArgs) -> CliResult {
    let stats = if a.empty { HumanStats::empty_template() } else { HumanStats::synthetic() };
    write_json(&a.out, &stats)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn hashes(a: HashesArgs) -> CliResult {
    for task in phyq::checks::sample_tasks(a.tasks, a.seed)? {
        let h = phyq::checks::tick_hashes(&task, &task.reference_solution, a.ticks);
        println!("{} {} {:016x}", task.template_id, task.seed, phyq::checks::digest(&h));
    }
    Ok(())
}

fn bench(a: BenchArgs) -> CliResult {
    let set = generate_task_set(&catalog(), a.count, a.seed)?;
    let t = phyq::checks::replay_throughput(&set.tasks);
    println!(
        "{} episodes, {:.1} simulated s in {:.2} wall s: {:.1}x real time, {:.1} episodes/s",
        t.episodes,
        t.simulated_seconds,
        t.wall_seconds,
        t.speedup(),
        t.episodes_per_second()
    );
    Ok(())
}
