//! The `resub` command-line pipeline.
//!
//! Each invocation records its arguments as a [`run::RunConfig`] in
//! `run.json`; the config's hash and seed are stamped into every artifact.
//! Exit codes: 0 on success, 1 on usage or pipeline errors, 2 when a solve
//! ends infeasible or at a limit.

pub mod args;
pub mod commands;
pub mod run;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use commands::{Outcome, UsageError};
use run::{RunConfig, RunContext};

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Gen(_) => "gen",
        Command::Betweenness(_) => "betweenness",
        Command::Train(_) => "train",
        Command::Score(_) => "score",
        Command::Solve(_) => "solve",
        Command::Sweep(_) => "sweep",
        Command::Portfolio(_) => "portfolio",
        Command::ExportLp(_) => "export-lp",
        Command::Bench(_) => "bench",
        Command::Replay(_) => "replay",
    }
}

fn report(config: &RunConfig, ctx: &RunContext, outcome: &Outcome, summary: bool) {
    if summary {
        let width = outcome
            .summary
            .iter()
            .map(|(k, _)| k.len())
            .max()
            .unwrap_or(0);
        for (k, v) in &outcome.summary {
            println!("{k:<width$}  {v}");
        }
        if let Some(t) = &outcome.table {
            println!();
            print!("{t}");
        }
        for u in &outcome.unfinished {
            println!("unfinished: {u}");
        }
        return;
    }
    let status = serde_json::json!({
        "command": command_name(&config.command),
        "config_hash": ctx.hash(),
        "seed": ctx.seed(),
        "status": if outcome.unfinished.is_empty() { "ok" } else { "unfinished" },
        "unfinished": outcome.unfinished,
        "outputs": ctx.written(),
    });
    println!("{status}");
}

/// Run the pipeline on `argv` (program name first); returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let config = match cli.command {
        Command::Replay(r) => match RunConfig::load(&r.run) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return 1;
            }
        },
        other => RunConfig::new(other),
    };
    let mut ctx = RunContext::new(cli.out_dir, &config);
    let result = commands::dispatch(&config.command, &mut ctx)
        .and_then(|outcome| ctx.write_run_config(&config).map(|_| outcome));
    match result {
        Ok(outcome) => {
            report(&config, &ctx, &outcome, cli.summary);
            if outcome.unfinished.is_empty() {
                0
            } else {
                2
            }
        }
        Err(e) => {
            if e.downcast_ref::<UsageError>().is_some() {
                eprintln!("error: {e}\n\nFor more information, try '--help'.");
            } else {
                eprintln!("error: {e:#}");
            }
            1
        }
    }
}
