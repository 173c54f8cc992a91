//! Command-line front end: `run`, `check` and `repl`.
//!
//! Exit codes: 0 success, 1 the query failed, 2 the program or query could
//! not be read, 3 the validity check failed, 4 a resource limit was hit.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checker::check_program;
use crate::registry::Registry;
use crate::solver::{resolve_query, Answer, Limits, SolveError};
use crate::surface::{parse_program, parse_query, Formula, GroundPath};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INVALID: i32 = 3;
pub const EXIT_LIMIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "colweb", version, about = "Run and check agent-located logic programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a query against a program (by default the knowledge of /query).
    Run(RunArgs),
    /// Check that every context-annotated claim follows from its context.
    Check(CheckArgs),
    /// Interactive session.
    Repl(ReplArgs),
}

#[derive(Debug, Clone, Args)]
pub struct LimitArgs {
    /// Maximum resolution depth.
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: u64,
    /// Maximum forward-chaining rounds.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_rounds: u64,
    /// Number of instances checked per class agent.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub class_sample: u64,
}

impl LimitArgs {
    pub fn limits(&self) -> Limits {
        Limits {
            depth: usize::try_from(self.depth).unwrap_or(usize::MAX),
            rounds: usize::try_from(self.max_rounds).unwrap_or(usize::MAX),
        }
    }

    fn sample(&self) -> usize {
        usize::try_from(self.class_sample).unwrap_or(usize::MAX)
    }
}

impl Default for LimitArgs {
    fn default() -> Self {
        LimitArgs {
            depth: 512,
            max_rounds: 10_000,
            class_sample: 5,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    pub file: PathBuf,
    /// Query text; defaults to the knowledge of agent /query.
    #[arg(long)]
    pub query: Option<String>,
    /// Value for the next `ada` variable, outermost first.
    #[arg(long = "arg")]
    pub args: Vec<u64>,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Check the program before running the query.
    #[arg(long)]
    pub check: bool,
    /// Print the proof trace after the answer.
    #[arg(long)]
    pub trace: bool,
    /// Print the registry snapshot after the answer.
    #[arg(long)]
    pub dump: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Print key=value records instead of text.
    #[arg(long)]
    pub records: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ReplArgs {
    /// Program to load at start.
    pub file: Option<PathBuf>,
    #[command(flatten)]
    pub limits: LimitArgs,
}

/// Everything a non-interactive command produced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl RunOutput {
    fn fail(code: i32, message: impl std::fmt::Display) -> Self {
        RunOutput {
            code,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

fn load_file(path: &Path) -> Result<Registry, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let program = parse_program(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Registry::load(&program).map_err(|e| format!("{}: {e}", path.display()))
}

/// `yes, y=3` or `no`.
pub fn format_answer(answer: &Answer) -> String {
    if !answer.success {
        return "no".into();
    }
    let mut out = String::from("yes");
    for (k, v) in answer.witnesses.iter() {
        let _ = write!(out, ", {k}={v}");
    }
    out
}

fn error_code(e: &SolveError) -> i32 {
    if e.is_limit() {
        EXIT_LIMIT
    } else {
        EXIT_NO
    }
}

pub fn cmd_run(args: &RunArgs) -> RunOutput {
    let mut registry = match load_file(&args.file) {
        Ok(r) => r,
        Err(e) => return RunOutput::fail(EXIT_INPUT, e),
    };
    let limits = args.limits.limits();
    let mut out = RunOutput::default();

    if args.check {
        let report = check_program(&registry, args.limits.sample(), limits);
        if !report.overall {
            out.code = EXIT_INVALID;
            out.stdout = report.render_text();
            out.stderr = "error: validity check failed\n".into();
            return out;
        }
    }

    let query: Formula = match &args.query {
        Some(text) => match parse_query(text) {
            Ok(q) => q,
            Err(e) => return RunOutput::fail(EXIT_INPUT, format!("query: {e}")),
        },
        None => match registry.entry(&GroundPath::new("query", None)) {
            Some(e) => e.knowledge.clone(),
            None => {
                return RunOutput::fail(
                    EXIT_INPUT,
                    "no query given: pass --query or declare agent /query",
                )
            }
        },
    };

    match resolve_query(&mut registry, &query, &args.args, limits) {
        Ok((answer, trace)) => {
            out.code = if answer.success { EXIT_OK } else { EXIT_NO };
            out.stdout = format_answer(&answer) + "\n";
            if args.trace {
                out.stdout.push_str(&trace.to_string());
            }
        }
        Err(e) => {
            out.code = error_code(&e);
            out.stderr = format!("error: {e}\n");
        }
    }
    if args.dump {
        out.stdout.push_str(&registry.snapshot());
    }
    out
}

pub fn cmd_check(args: &CheckArgs) -> RunOutput {
    let registry = match load_file(&args.file) {
        Ok(r) => r,
        Err(e) => return RunOutput::fail(EXIT_INPUT, e),
    };
    let report = check_program(&registry, args.limits.sample(), args.limits.limits());
    RunOutput {
        code: if report.overall { EXIT_OK } else { EXIT_INVALID },
        stdout: if args.records {
            report.render_records()
        } else {
            report.render_text()
        },
        stderr: String::new(),
    }
}

/// State of an interactive session. Materializations persist across queries.
#[derive(Debug)]
pub struct Session {
    pub registry: Registry,
    limits: LimitArgs,
    trace: bool,
    /// Print a prompt before reading each line.
    pub prompt: bool,
}

/// What to do after a line has been handled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Continue(String),
    Quit,
}

const HELP: &str = "\
:load <file>     replace the session program
:check           check the loaded program
:dump            print the registry
:trace on|off    print proof traces after answers
:quit            leave
anything else is evaluated as a query
";

impl Session {
    pub fn new(limits: LimitArgs) -> Self {
        Session {
            registry: Registry::new(),
            limits,
            trace: false,
            prompt: false,
        }
    }

    pub fn load(&mut self, path: &Path) -> Result<String, String> {
        self.registry = load_file(path)?;
        Ok(format!(
            "loaded {} agents and {} class agents from {}",
            self.registry.agents().count(),
            self.registry.classes().len(),
            path.display()
        ))
    }

    pub fn handle(&mut self, line: &str) -> Reply {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Reply::Continue(String::new());
        }
        let Some(command) = line.strip_prefix(':') else {
            return Reply::Continue(self.query(line));
        };
        let (name, rest) = command
            .split_once(char::is_whitespace)
            .map_or((command, ""), |(n, r)| (n, r.trim()));
        let text = match (name, rest) {
            ("quit" | "q", _) => return Reply::Quit,
            ("load", "") => "usage: :load <file>".to_string(),
            ("load", file) => self.load(Path::new(file)).unwrap_or_else(|e| format!("error: {e}")),
            ("check", _) => {
                check_program(&self.registry, self.limits.sample(), self.limits.limits()).render_text()
            }
            ("dump", _) => self.registry.snapshot(),
            ("trace", "on") => {
                self.trace = true;
                "trace on".into()
            }
            ("trace", "off") => {
                self.trace = false;
                "trace off".into()
            }
            ("trace", _) => "usage: :trace on|off".into(),
            ("help", _) => HELP.into(),
            _ => format!("unknown command :{name} (try :help)"),
        };
        Reply::Continue(text)
    }

    fn query(&mut self, text: &str) -> String {
        let query = match parse_query(text) {
            Ok(q) => q,
            Err(e) => return format!("parse error: {e}"),
        };
        match resolve_query(&mut self.registry, &query, &[], self.limits.limits()) {
            Ok((answer, trace)) => {
                let mut out = format!(
                    "{}\nfirings: {}",
                    format_answer(&answer),
                    trace.firing_count()
                );
                if self.trace && !trace.is_empty() {
                    out.push('\n');
                    out.push_str(trace.to_string().trim_end());
                }
                out
            }
            Err(e) => format!("error: {e}"),
        }
    }

    /// Reads lines until end of input or `:quit`.
    pub fn run<R: BufRead, W: Write>(&mut self, input: R, mut output: W) -> io::Result<()> {
        let mut lines = input.lines();
        loop {
            if self.prompt {
                write!(output, "> ")?;
                output.flush()?;
            }
            let Some(line) = lines.next() else {
                return Ok(());
            };
            match self.handle(&line?) {
                Reply::Quit => return Ok(()),
                Reply::Continue(text) if text.is_empty() => {}
                Reply::Continue(text) => {
                    writeln!(output, "{}", text.trim_end())?;
                }
            }
        }
    }
}

/// Runs a parsed command line against the process's standard streams and
/// returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let out = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Check(a) => cmd_check(a),
        Command::Repl(a) => {
            use std::io::IsTerminal;
            let mut session = Session::new(a.limits.clone());
            session.prompt = io::stdin().is_terminal();
            if let Some(file) = &a.file {
                match session.load(file) {
                    Ok(msg) => println!("{msg}"),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_INPUT;
                    }
                }
            }
            return match session.run(io::stdin().lock(), io::stdout().lock()) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_INPUT
                }
            };
        }
    };
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}
