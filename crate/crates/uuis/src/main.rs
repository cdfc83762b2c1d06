//! `uuis` command line: initialise a store, run the server, import files,
//! export the audit trail, drain the outbox, check integrity and run cost
//! estimates.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use uuis::api::parse_mapping_entries;
use uuis::clock::SystemClock;
use uuis::config::Config;
use uuis::estimate::{self, EstimateRequest};
use uuis::importer::{ColumnMapping, Format, ImportRequest};
use uuis::outbox::Collect;
use uuis::seed::Seed;
use uuis::storage::{AuditFilter, Store};
use uuis::{Error, Result, Service};
use uuis_core::catalog::Catalog;
use uuis_core::cocomo::Mode;
use uuis_core::{EntityId, TypeKind};

#[derive(Parser)]
#[command(name = "uuis", version, about = "University inventory service")]
struct Cli {
    /// TOML configuration file. `UUIS_*` variables override it.
    #[arg(long, env = "UUIS_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create the store, register the catalog, default roles and types.
    Init {
        #[arg(long)]
        admin_username: Option<String>,
        #[arg(long, env = "UUIS_ADMIN_PASSWORD")]
        admin_password: Option<String>,
        /// Organisation and account seed (TOML). Defaults to `seed_file`.
        #[arg(long)]
        seed: Option<PathBuf>,
    },
    /// Run the HTTP server.
    Serve,
    /// Import a CSV or delimited text file as the system actor.
    Import {
        /// asset, license, location or person
        #[arg(long)]
        kind: String,
        file: PathBuf,
        /// Column mapping such as `0=name,1=barcode`.
        #[arg(long)]
        map: String,
        #[arg(long)]
        location: Option<u64>,
        #[arg(long)]
        faculty: Option<u64>,
        #[arg(long)]
        department: Option<u64>,
        /// csv or txt; guessed from the file extension when absent.
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        delimiter: Option<char>,
        /// Where to write the problem file.
        #[arg(long)]
        problems: Option<PathBuf>,
    },
    /// Write the audit trail as CSV.
    AuditExport {
        /// RFC 3339 start time.
        #[arg(long)]
        from: Option<String>,
        /// RFC 3339 end time.
        #[arg(long)]
        to: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Deliver queued notifications by printing them.
    OutboxDrain,
    /// Run the consistency sweep over the whole store.
    Check,
    /// Effort, schedule, staffing and cost estimate.
    Estimate {
        #[arg(long)]
        kloc: f64,
        #[arg(long)]
        eaf: Option<f64>,
        /// Driver rating such as `cplx=high`. Repeatable.
        #[arg(long = "driver", value_parser = parse_driver)]
        drivers: Vec<(String, String)>,
        #[arg(long, default_value = "organic")]
        mode: String,
        #[arg(long, alias = "cpm")]
        cost_per_pm: f64,
        #[arg(long)]
        json: bool,
    },
}

fn parse_driver(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=').map(|(k, v)| (k.trim().to_string(), v.trim().to_string())).ok_or_else(|| format!("`{s}` is not key=rating"))
}

fn catalog(config: &Config) -> Result<Catalog> {
    match &config.catalog_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            Catalog::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        None => Ok(Catalog::bundled()),
    }
}

fn open(config: &Config) -> Result<Service> {
    std::fs::create_dir_all(&config.data_dir).map_err(|e| Error::Config(format!("{}: {e}", config.data_dir.display())))?;
    let store = Store::open(&config.store_path())?;
    Ok(Service::new(store, Arc::new(SystemClock), config.clone()))
}

fn read_text(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).unwrap_or_default()
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Estimate { kloc, eaf, drivers, mode, cost_per_pm, json: as_json } = cli.command {
        let mode = Mode::parse(&mode).ok_or_else(|| Error::BadRequest(format!("unknown mode `{mode}`")))?;
        let request = EstimateRequest { kloc, eaf, drivers: drivers.into_iter().collect::<BTreeMap<_, _>>(), mode, cost_per_pm };
        let estimate = estimate::run(&request)?;
        if as_json {
            println!("{}", json(&estimate));
        } else {
            println!("{}", estimate.report);
        }
        return Ok(());
    }

    let config = Config::load(cli.config.as_deref())?;
    let service = open(&config)?;
    match cli.command {
        Command::Init { admin_username, admin_password, seed } => {
            let report = service.init(&catalog(&config)?)?;
            println!("{}", json(&report));
            if let Some(username) = admin_username {
                let password = admin_password.ok_or_else(|| Error::MissingField("admin_password".into()))?;
                let id = service.bootstrap_admin(&username, &password)?;
                println!("administrator {username} created with id {id}");
            }
            if let Some(path) = seed.or(config.seed_file.clone()) {
                let report = service.apply_seed(&Seed::parse(&read_text(&path)?)?)?;
                println!("{}", json(&report));
            }
        }
        Command::Serve => {
            let addr = config.listen.parse().map_err(|e| Error::Config(format!("listen `{}`: {e}", config.listen)))?;
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::Config(e.to_string()))?;
            runtime.block_on(uuis::http::serve(Arc::new(service), addr, |bound| tracing::info!(%bound, "listening")))?;
        }
        Command::Import { kind, file, map, location, faculty, department, format, delimiter, problems } => {
            let target_kind = uuis_core::EntityKind::parse(&kind)
                .and_then(TypeKind::from_entity_kind)
                .ok_or_else(|| Error::BadRequest(format!("unknown kind `{kind}`")))?;
            let format = match format.as_deref() {
                Some(f) => Format::parse(f).ok_or_else(|| Error::BadRequest(format!("unknown format `{f}`")))?,
                None if file.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => Format::Csv,
                None => Format::Txt,
            };
            let request = ImportRequest {
                mapping: ColumnMapping {
                    target_kind,
                    entries: parse_mapping_entries(&map)?,
                    default_location_id: location.map(EntityId),
                    type_id: None,
                    faculty_id: faculty.map(EntityId),
                    department_id: department.map(EntityId),
                },
                format,
                delimiter,
                text: read_text(&file)?,
            };
            let result = service.import(&service.system_actor()?, &request)?;
            println!("inserted {} rows, {} problem rows", result.inserted_ids.len(), result.problem_rows.len());
            if let Some(path) = problems.as_ref().filter(|_| !result.problem_rows.is_empty() || !result.unmapped_columns.is_empty()) {
                write_or_print(Some(path), &result.problem_file)?;
                println!("problem file written to {}", path.display());
            }
        }
        Command::AuditExport { from, to, out } => {
            let time = |v: Option<String>| {
                v.map(|v| {
                    chrono::DateTime::parse_from_rfc3339(&v)
                        .map(|t| t.with_timezone(&chrono::Utc))
                        .map_err(|e| Error::BadRequest(format!("`{v}`: {e}")))
                })
                .transpose()
            };
            let filter = AuditFilter { from: time(from)?, to: time(to)?, ..AuditFilter::default() };
            let csv = service.audit_export(&service.system_actor()?, None, &filter)?;
            write_or_print(out.as_ref(), &csv)?;
        }
        Command::OutboxDrain => {
            let mut mailer = Collect::default();
            let report = service.outbox_drain(&mut mailer)?;
            for m in &mailer.0 {
                println!("to {}: {}\n  {}", m.recipient_id, m.subject, m.body);
            }
            println!("{}", json(&report));
        }
        Command::Check => {
            let report = service.integrity_sweep()?;
            println!("{}", json(&report));
            if !report.is_clean() {
                return Err(Error::Integrity(format!("{} violations", report.violations.len())));
            }
        }
        Command::Estimate { .. } => unreachable!("handled before the store is opened"),
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
