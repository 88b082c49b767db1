use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use rehabot::autopilot::{Autopilot, Policy};
use rehabot::config::{parse_config_bytes, SessionConfig};
use rehabot::gateway::server::{Server, ServerOptions, BIND_ENV, DEFAULT_BIND};
use rehabot::robot::FaultKind;
use rehabot::runtime::{Engine, Input};
use rehabot::script::{load_into, parse_events, render_events, ScriptedInput};
use rehabot::telemetry::{
    assistance_report, parse_log, render_assistance_table, render_log, render_summary_table, summarize, SessionStatus,
};
use rehabot::time::Millis;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_UNFINISHED: u8 = 3;

#[derive(Parser)]
#[command(name = "rehabot", version, about = "Run and analyse simulated robot-assisted rehab sessions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Fast,
    Realtime,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Summary,
    Assistance,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Json,
    Both,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one session and write its log.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "fast")]
        mode: Mode,
        /// Scripted events file; required in fast mode.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Log output path [default: <config stem>.log.jsonl]
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        fall_probability: Option<f64>,
        #[arg(long)]
        battery_capacity_ms: Option<u64>,
        #[arg(long)]
        idle_drain: Option<f64>,
        /// Inject a fault at a virtual time, e.g. `battery@600000`
        /// (kinds: fall, battery, error). Repeatable.
        #[arg(long, value_name = "KIND@MS")]
        inject: Vec<String>,
        /// Console endpoint for realtime mode.
        #[arg(long, env = BIND_ENV, default_value = DEFAULT_BIND)]
        bind: String,
        /// Virtual milliseconds per wall millisecond in realtime mode.
        #[arg(long, default_value_t = 1)]
        time_scale: u32,
    },
    /// Summarise session logs.
    Analyze {
        #[arg(long, required = true, num_args = 1..)]
        log: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "summary")]
        report: Report,
        #[arg(long, value_enum, default_value = "both")]
        format: Format,
    },
    /// Check a config file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a scripted events file by simulating a cooperative patient and carer.
    Script {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add random speed changes and pauses during sets.
        #[arg(long)]
        chaos: bool,
    },
}

struct Failure(u8, String);

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure(code, msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Run {
            config,
            mode,
            events,
            seed,
            log,
            fall_probability,
            battery_capacity_ms,
            idle_drain,
            inject,
            bind,
            time_scale,
        } => (|| {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(p) = fall_probability {
                if !(0.0..=1.0).contains(&p) {
                    return Err(fail(EXIT_USAGE, "--fall-probability must be in [0, 1]"));
                }
                cfg.faults.fall_probability = p;
            }
            if let Some(c) = battery_capacity_ms {
                cfg.faults.battery_capacity_ms = c;
            }
            if let Some(d) = idle_drain {
                cfg.faults.idle_drain = d;
            }
            let mut script = match &events {
                Some(path) => load_events(path)?,
                None if mode == Mode::Fast => {
                    return Err(fail(EXIT_USAGE, "fast mode needs --events (see `rehabot script`)"));
                }
                None => Vec::new(),
            };
            for spec in &inject {
                script.push(parse_injection(spec)?);
            }
            script.sort_by_key(|s| s.at);
            let log_path = log.unwrap_or_else(|| default_log_path(&config));
            let mut engine = Engine::new(cfg);
            load_into(&mut engine, &script);
            match mode {
                Mode::Fast => {
                    engine.run_to_completion();
                    if !engine.is_finished() {
                        let now = engine.now();
                        engine.submit(now, Input::Shutdown);
                        engine.run_to_completion();
                    }
                }
                Mode::Realtime => engine = run_realtime(engine, &bind, time_scale)?,
            }
            finish_run(&engine, &log_path)
        })(),
        Cmd::Analyze { log, report, format } => analyze(&log, report, format),
        Cmd::Validate { config } => load_config(&config).map(|cfg| {
            println!("{}: ok ({} activities)", config.display(), cfg.program.len());
            ExitCode::SUCCESS
        }),
        Cmd::Script {
            config,
            seed,
            out,
            chaos,
        } => (|| {
            let cfg = load_config(&config)?;
            let seed = seed.unwrap_or(cfg.seed);
            let policy = if chaos {
                Policy::with_chaos(0.5, 0.3)
            } else {
                Policy::default()
            };
            let (engine, script) = Autopilot::run(cfg, seed, policy);
            let text = render_events(&script);
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            if let Ok(s) = summarize(engine.events()) {
                eprintln!("scripted session: {} inputs, duration {}", script.len(), s.duration);
            }
            Ok(ExitCode::SUCCESS)
        })(),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("rehabot: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load_config(path: &Path) -> Result<SessionConfig, Failure> {
    let bytes = fs::read(path).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
    parse_config_bytes(&bytes).map_err(|e| fail(EXIT_FAILURE, format!("{}:{e}", path.display())))
}

fn load_events(path: &Path) -> Result<Vec<ScriptedInput>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", path.display())))?;
    parse_events(&text).map_err(|e| fail(EXIT_FAILURE, format!("{}:{e}", path.display())))
}

fn parse_injection(spec: &str) -> Result<ScriptedInput, Failure> {
    let bad = || fail(EXIT_USAGE, format!("bad --inject `{spec}`; expected KIND@MS with KIND fall|battery|error"));
    let (kind, at) = spec.split_once('@').ok_or_else(bad)?;
    let fault = match kind {
        "fall" => FaultKind::FallDuringDance,
        "battery" => FaultKind::BatteryDrain,
        "error" => FaultKind::UnrecoverableError,
        _ => return Err(bad()),
    };
    let at = at.parse::<u64>().map_err(|_| bad())?;
    Ok(ScriptedInput {
        at: Millis(at),
        input: Input::InjectFault { fault },
    })
}

fn default_log_path(config: &Path) -> PathBuf {
    let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
    PathBuf::from(format!("{stem}.log.jsonl"))
}

fn run_realtime(engine: Engine, bind: &str, time_scale: u32) -> Result<Engine, Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
    rt.block_on(async {
        let options = ServerOptions {
            time_scale,
            linger: Duration::from_secs(1),
            ..ServerOptions::default()
        };
        let server = Server::bind(bind, options)
            .await
            .map_err(|e| fail(EXIT_FAILURE, format!("cannot listen on {bind}: {e}")))?;
        let addr = server.local_addr().map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
        eprintln!("serving consoles on ws://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        Ok(server.run(engine, shutdown).await)
    })
}

fn finish_run(engine: &Engine, log_path: &Path) -> Result<ExitCode, Failure> {
    fs::write(log_path, render_log(engine.events()))
        .map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", log_path.display())))?;
    let summary = summarize(engine.events()).map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
    print!("{}", render_summary_table(std::slice::from_ref(&summary)));
    println!("log: {}", log_path.display());
    let stats = engine.stats();
    if stats.ignored_inputs > 0 || stats.engine_errors > 0 {
        eprintln!(
            "ignored inputs: {}, engine errors: {}",
            stats.ignored_inputs, stats.engine_errors
        );
    }
    if summary.status == SessionStatus::Interrupted {
        return Err(fail(EXIT_UNFINISHED, "session did not finish; it was interrupted"));
    }
    Ok(ExitCode::SUCCESS)
}

fn analyze(paths: &[PathBuf], report: Report, format: Format) -> Result<ExitCode, Failure> {
    let mut logs = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", p.display())))?;
        logs.push(parse_log(&text).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", p.display())))?);
    }
    let (table, json) = match report {
        Report::Summary => {
            let mut summaries = Vec::new();
            for (p, events) in paths.iter().zip(&logs) {
                summaries.push(summarize(events).map_err(|e| fail(EXIT_FAILURE, format!("{}: {e}", p.display())))?);
            }
            (render_summary_table(&summaries), serde_json::to_string_pretty(&summaries))
        }
        Report::Assistance => {
            let r = assistance_report(&logs);
            (render_assistance_table(&r), serde_json::to_string_pretty(&r))
        }
    };
    let json = json.map_err(|e| fail(EXIT_FAILURE, e.to_string()))?;
    if format != Format::Json {
        print!("{table}");
    }
    if format == Format::Both {
        println!();
    }
    if format != Format::Table {
        println!("{json}");
    }
    Ok(ExitCode::SUCCESS)
}
