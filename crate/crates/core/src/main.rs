use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Arg, ArgAction, ArgMatches, Command};

use udn_core::config::{ConfigError, ExperimentConfig, Method, AP_GRID, KF_GRID, KEYS};
use udn_core::experiments::{self, ExperimentError, Scenario};

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn common_args(cmd: Command) -> Command {
    let cmd = cmd
        .args_override_self(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value file applied before individual flags"),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .value_name("DIR")
                .default_value("results")
                .help("output directory"),
        )
        .arg(
            Arg::new("fast")
                .long("fast")
                .action(ArgAction::SetTrue)
                .help("10 drops and a 100x100 training profile"),
        );
    KEYS.iter().fold(cmd, |cmd, (key, help)| {
        cmd.arg(
            Arg::new(*key)
                .long(flag_name(key))
                .value_name("VALUE")
                .help(*help),
        )
    })
}

fn cli() -> Command {
    Command::new("udn")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Joint user association and subcarrier allocation in ultra-dense networks")
        .subcommand_required(true)
        .subcommand(
            common_args(Command::new("train"))
                .about("Train MADQN agents on the num_users/num_aps scenario")
                .arg(
                    Arg::new("init-from")
                        .long("init-from")
                        .value_name("DIR")
                        .help("directory of agent checkpoints to start drop 0 from"),
                ),
        )
        .subcommand(
            common_args(Command::new("sweep"))
                .about("Run the configured methods over a scenario grid")
                .arg(
                    Arg::new("grid")
                        .long("grid")
                        .value_parser(["users", "aps", "connectivity"])
                        .default_value("users")
                        .help("users: configured lists; aps: M in {5,10}; connectivity: (k,f) in {(1,1),(2,2),(4,4)}"),
                ),
        )
        .subcommand(
            common_args(Command::new("baseline"))
                .about("Max-RSRP and random policies over the user sweep"),
        )
        .subcommand(
            common_args(Command::new("oracle"))
                .about("Exhaustive optimum next to the baselines on the num_users/num_aps scenario"),
        )
}

fn load_config(m: &ArgMatches) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {path}: {e}")))?;
        cfg.apply_kv(&text)?;
    }
    if m.get_flag("fast") {
        cfg.apply_fast();
    }
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(record: &experiments::MetricsRecord) {
    for s in record.summary() {
        let sc = s.scenario;
        println!(
            "{:<12} N={:<3} M={:<3} k={} f={}  total {:>10.3} Mbps  per-user {:>8.3} Mbps",
            s.method.as_str(),
            sc.num_users,
            sc.num_aps,
            sc.k_max,
            sc.f_max,
            s.mean_total_bps / 1e6,
            s.mean_avg_user_bps / 1e6
        );
    }
}

fn single_scenario(cfg: &ExperimentConfig) -> Scenario {
    Scenario::new(cfg.num_users, cfg.num_aps, cfg.k_max, cfg.f_max)
}

fn run(name: &str, m: &ArgMatches) -> Result<(), ExperimentError> {
    let mut cfg = load_config(m)?;
    let out = PathBuf::from(m.get_one::<String>("out").expect("defaulted"));
    match name {
        "train" => {
            let init = m.get_one::<String>("init-from").map(Path::new);
            let run = experiments::train_command(&cfg, &out, init)?;
            print_summary(&run.record);
        }
        "sweep" => {
            match m.get_one::<String>("grid").map(String::as_str) {
                Some("aps") => cfg.ap_counts = AP_GRID.to_vec(),
                Some("connectivity") => cfg.kf_pairs = KF_GRID.to_vec(),
                _ => {}
            }
            let scenarios = experiments::sweep_scenarios(&cfg);
            let record = experiments::sweep_command(&cfg, &scenarios, &cfg.methods, &out)?;
            print_summary(&record);
        }
        "baseline" => {
            let scenarios = experiments::sweep_scenarios(&cfg);
            let methods = [Method::MaxRsrp, Method::Random];
            let record = experiments::sweep_command(&cfg, &scenarios, &methods, &out)?;
            print_summary(&record);
        }
        "oracle" => {
            let methods = [Method::MaxRsrp, Method::Random, Method::BruteForce];
            let record =
                experiments::sweep_command(&cfg, &[single_scenario(&cfg)], &methods, &out)?;
            if !record.rows.iter().any(|r| r.method == Method::BruteForce) {
                return Err(ConfigError::new(
                    "num_users",
                    "instance too large for exhaustive search",
                )
                .into());
            }
            print_summary(&record);
        }
        other => unreachable!("unknown subcommand {other}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    match run(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
