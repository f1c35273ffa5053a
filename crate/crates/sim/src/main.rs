use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ztac_sim::{bench, run_scenario, AdversaryScript, AttackMode, RunReport, ScenarioConfig};

#[derive(Parser)]
#[command(name = "ztac-sim", about = "Simulate, attack and audit a ztac deployment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario honestly and print its report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time each cost-table primitive.
    Bench {
        #[arg(long, default_value_t = 50)]
        iters: usize,
    },
    /// Run a scenario under an adversary script.
    Attack {
        scenario: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Try content changes against copies of the receiver instead of
        /// the live message.
        #[arg(long)]
        fork: bool,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Summarise a saved report.
    Inspect { report: PathBuf },
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, String> {
    let mut cfg =
        ScenarioConfig::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn emit(report: &RunReport, out: Option<&Path>) -> Result<ExitCode, String> {
    let text = report.render();
    print!("{text}");
    if let Some(p) = out {
        std::fs::write(p, &text).map_err(|e| format!("{}: {e}", p.display()))?;
    }
    Ok(if report.all_invariants_hold() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn inspect(path: &Path) -> Result<ExitCode, String> {
    let report = RunReport::parse(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    let bus = report.bus();
    let get = |k: &str| bus.get(k).map_or("?", String::as_str);
    println!(
        "messages: sent {} delivered {} dropped {} tampered {}",
        get("sent"),
        get("delivered"),
        get("dropped"),
        get("tampered")
    );
    for ((phase, role), expr) in report.table2() {
        if expr != "0" {
            println!("{:<15} {:<7} {expr}", phase.name(), role.name());
        }
    }
    for (name, ok) in report.invariants() {
        println!("{name}: {}", if ok { "PASS" } else { "FAIL" });
    }
    Ok(if report.all_invariants_hold() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            report,
        } => {
            let cfg = load_scenario(&scenario, seed)?;
            let (_, r) = run_scenario(&cfg, &AdversaryScript::default(), AttackMode::Live);
            emit(&r, report.as_deref())
        }
        Command::Attack {
            scenario,
            script,
            seed,
            fork,
            report,
        } => {
            let cfg = load_scenario(&scenario, seed)?;
            let adv = AdversaryScript::parse(&read(&script)?)
                .map_err(|e| format!("{}: {e}", script.display()))?;
            let mode = if fork { AttackMode::Fork } else { AttackMode::Live };
            let (_, r) = run_scenario(&cfg, &adv, mode);
            emit(&r, report.as_deref())
        }
        Command::Bench { iters } => {
            print!("{}", bench::render(&bench::bench_primitives(iters)));
            Ok(ExitCode::SUCCESS)
        }
        Command::Inspect { report } => inspect(&report),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
