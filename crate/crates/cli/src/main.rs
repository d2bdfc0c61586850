mod literal;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use regula_core::{compile, jsonio, Database, Diagnostic, FactRef, Session, ToDiagnostic, TypedRuleset};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "regula", version, about = "Evaluate rulesets over record data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and type-check rulesets.
    Check {
        #[arg(required = true)]
        rulesets: Vec<PathBuf>,
    },
    /// Evaluate one fact.
    Eval {
        /// Ruleset files followed by the data file.
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        #[arg(long)]
        query: String,
        /// `Type[key].field=value`, repeatable.
        #[arg(long = "override")]
        overrides: Vec<String>,
    },
    /// List the facts a query still needs and the record types it scans.
    Deps {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        #[arg(long)]
        query: String,
    },
    /// Compute every derivable fact and write the completed document.
    Saturate {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(required = true)]
        rulesets: Vec<PathBuf>,
        #[arg(long)]
        port: u16,
        /// Data for a session named "default".
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

enum Failure {
    /// Reported problems with the input. Exit 1.
    Diagnostics(Vec<Diagnostic>),
    /// Evaluation failed; the report is already on stdout. Exit 1.
    Evaluation,
    /// Exit 2.
    Io(String),
}

impl Failure {
    fn one(code: &str, message: impl Into<String>) -> Self {
        Failure::Diagnostics(vec![Diagnostic::new(code, message, None)])
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_ruleset(paths: &[PathBuf]) -> Result<Arc<TypedRuleset>, Failure> {
    let sources: Vec<(String, String)> = paths
        .iter()
        .map(|p| Ok((p.display().to_string(), read(p)?)))
        .collect::<Result<_, Failure>>()?;
    compile(sources.iter().map(|(f, t)| (f.as_str(), t.as_str())))
        .map(Arc::new)
        .map_err(|errs| Failure::Diagnostics(errs.iter().map(ToDiagnostic::to_diagnostic).collect()))
}

fn load_data(path: &Path, rules: &TypedRuleset) -> Result<Database, Failure> {
    jsonio::load_dataset(&read(path)?, &rules.schema).map_err(|errs| {
        Failure::Diagnostics(
            errs.iter()
                .map(|e| {
                    let mut d = e.to_diagnostic();
                    d.message = format!("{}: {}", path.display(), d.message);
                    d
                })
                .collect(),
        )
    })
}

/// Rulesets are every file but the last, which holds the data.
fn load_session(files: &[PathBuf]) -> Result<Session, Failure> {
    let (data, rulesets) = files.split_last().expect("clap requires two files");
    let rules = load_ruleset(rulesets)?;
    let db = load_data(data, &rules)?;
    Ok(Session::new(rules, db))
}

fn parse_query(session: &Session, text: &str) -> Result<FactRef, Failure> {
    let fact: FactRef = text.parse().map_err(|e: regula_core::value::FactRefParseError| {
        Failure::one("InvalidQuery", e.to_string())
    })?;
    if session.schema().record(&fact.key.record_type).is_none() {
        return Err(Failure::one("UnknownRecord", format!("unknown record type `{}`", fact.key.record_type)));
    }
    Ok(fact)
}

fn errors_json(errors: &[impl ToDiagnostic]) -> Value {
    let diags: Vec<Diagnostic> = errors.iter().map(ToDiagnostic::to_diagnostic).collect();
    json!({ "errors": diags })
}

fn cmd_check(rulesets: &[PathBuf]) -> Result<(), Failure> {
    load_ruleset(rulesets).map(|_| ())
}

fn cmd_eval(files: &[PathBuf], query: &str, overrides: &[String]) -> Result<(), Failure> {
    let mut session = load_session(files)?;
    let fact = parse_query(&session, query)?;
    for text in overrides {
        let (target, literal) = literal::split_assignment(text).map_err(|m| Failure::one("InvalidOverride", m))?;
        session
            .check_fact(&target)
            .map_err(|e| Failure::Diagnostics(vec![e.to_diagnostic()]))?;
        let ty = session
            .schema()
            .fact_type(&target.key.record_type, &target.field)
            .map_err(|e| Failure::Diagnostics(vec![e.to_diagnostic()]))?;
        let value = literal::parse_literal(session.schema(), session.database(), literal, &ty)
            .map_err(|m| Failure::one("InvalidOverride", format!("{target}: {m}")))?;
        session
            .set_override(target, value)
            .map_err(|e| Failure::Diagnostics(vec![e.to_diagnostic()]))?;
    }
    let outcome = session.get_fact(&fact.key, &fact.field);
    match &outcome.result {
        Ok(v) => {
            println!("{}", jsonio::encode_value(v));
            Ok(())
        }
        Err(errors) => {
            println!("{}", errors_json(errors));
            Err(Failure::Evaluation)
        }
    }
}

fn cmd_deps(files: &[PathBuf], query: &str) -> Result<(), Failure> {
    let session = load_session(files)?;
    let fact = parse_query(&session, query)?;
    let report = session.get_missing_dependencies(&fact.key, &fact.field);
    println!("{}", json!(report.missing));
    println!("{}", json!(report.types));
    Ok(())
}

fn cmd_saturate(files: &[PathBuf], output: Option<&Path>) -> Result<(), Failure> {
    let mut session = load_session(files)?;
    let report = session.saturate();
    let document = jsonio::dump_database(&report.database, session.schema());
    let skipped: Vec<Value> = report
        .skipped
        .iter()
        .map(|(f, errs)| {
            let diags: Vec<Diagnostic> = errs.iter().map(ToDiagnostic::to_diagnostic).collect();
            json!({ "fact": f.to_string(), "errors": diags })
        })
        .collect();
    let summary = json!({ "skipped": skipped });
    match output {
        Some(path) => {
            fs::write(path, document).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            println!("{summary}");
        }
        None => {
            print!("{document}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_serve(rulesets: &[PathBuf], port: u16, data: Option<&Path>) -> Result<(), Failure> {
    let rules = load_ruleset(rulesets)?;
    let state = regula_service::AppState::new(rules.clone());
    if let Some(path) = data {
        state.preload_default(load_data(path, &rules)?);
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| Failure::Io(format!("cannot listen on port {port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| Failure::Io(e.to_string()))?;
        eprintln!("listening on http://{addr}");
        regula_service::serve(listener, state)
            .await
            .map_err(|e| Failure::Io(e.to_string()))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { rulesets } => cmd_check(rulesets),
        Command::Eval { files, query, overrides } => cmd_eval(files, query, overrides),
        Command::Deps { files, query } => cmd_deps(files, query),
        Command::Saturate { files, output } => cmd_saturate(files, output.as_deref()),
        Command::Serve { rulesets, port, data } => cmd_serve(rulesets, *port, data.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diagnostics(diags)) => {
            for d in diags {
                eprintln!("{d}");
            }
            ExitCode::from(1)
        }
        Err(Failure::Evaluation) => ExitCode::from(1),
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
