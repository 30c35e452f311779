//! Command-line front end. Exit codes: 0 success, 1 error diagnostics (or
//! warnings under `--strict`), 2 unreadable input, parse, catalog or usage
//! failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use beamplan::components::{layered_catalog, Catalog};
use beamplan::diagnostics::{Diagnostic, Severity};
use beamplan::export::{export, Format};
use beamplan::layout::{compile, format_document, load_document, Scene};

const CATALOG_ENV: &str = "BEAMPLAN_CATALOG_PATH";

#[derive(Parser)]
#[command(name = "beamplan", version, about = "Compile optical breadboard layouts into baseplates and fabrication files")]
struct Cli {
    /// Extra catalog file; overrides same-id entries from the environment
    /// and the bundled catalog. Repeatable.
    #[arg(long, global = true, value_name = "FILE")]
    catalog: Vec<PathBuf>,
    /// Treat warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a layout and write the scene dump.
    Compile {
        doc: PathBuf,
        /// Output directory for `scene.json`; without it the dump goes to
        /// standard output.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Compile a layout and report diagnostics only.
    Check { doc: PathBuf },
    /// Compile a layout and write artifacts of one format.
    Export {
        doc: PathBuf,
        /// stl, svg, bom, drill or scene.
        #[arg(long)]
        format: String,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Inspect the component catalog.
    Catalog(CatalogArgs),
    /// Print a layout in canonical formatting.
    Fmt {
        doc: PathBuf,
        /// Rewrite the file in place.
        #[arg(long, conflicts_with = "check")]
        write: bool,
        /// Exit 1 when the file is not canonically formatted.
        #[arg(long)]
        check: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct CatalogArgs {
    /// List component ids and optic types.
    #[arg(long)]
    list: bool,
    /// Print one component with its footprint and drill features.
    #[arg(long, value_name = "ID")]
    show: Option<String>,
}

/// A failure that ends the run with exit code 2.
struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

fn env_catalogs() -> Vec<PathBuf> {
    std::env::var_os(CATALOG_ENV)
        .map(|v| std::env::split_paths(&v).filter(|p| !p.as_os_str().is_empty()).collect())
        .unwrap_or_default()
}

fn catalog(cli: &Cli) -> Result<Catalog, Fatal> {
    Ok(layered_catalog(&[env_catalogs(), cli.catalog.clone()])?)
}

fn compile_doc(cli: &Cli, doc: &Path) -> Result<Scene, Fatal> {
    let base = catalog(cli)?;
    let (doc, cat) = load_document(doc, &base)?;
    Ok(compile(&doc, &cat))
}

/// Prints diagnostics to standard error and returns whether any of them
/// fails the run.
fn report(diags: &[Diagnostic], strict: bool) -> bool {
    let mut failed = false;
    for d in diags {
        let mut d = d.clone();
        if strict {
            d.severity = Severity::Error;
        }
        failed |= d.is_error();
        eprintln!("{d}");
    }
    failed
}

/// Writes to standard output, tolerating a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn status(failed: bool) -> ExitCode {
    ExitCode::from(u8::from(failed))
}

fn run(cli: &Cli) -> Result<ExitCode, Fatal> {
    match &cli.command {
        Command::Compile { doc, out } => {
            let scene = compile_doc(cli, doc)?;
            let failed = report(&scene.diagnostics, cli.strict);
            match out {
                Some(dir) => {
                    export(&scene, Format::Scene, dir)?;
                }
                None => emit(&scene.dump()),
            }
            Ok(status(failed))
        }
        Command::Check { doc } => {
            let scene = compile_doc(cli, doc)?;
            Ok(status(report(&scene.diagnostics, cli.strict)))
        }
        Command::Export { doc, format, out } => {
            let format: Format = format.parse()?;
            let scene = compile_doc(cli, doc)?;
            if report(&scene.diagnostics, cli.strict) {
                eprintln!("error: not exporting `{}` because it has errors", doc.display());
                return Ok(status(true));
            }
            let paths = export(&scene, format, out)?;
            emit(&paths.iter().map(|p| format!("{}\n", p.display())).collect::<String>());
            Ok(status(false))
        }
        Command::Catalog(args) => {
            let cat = catalog(cli)?;
            if let Some(id) = &args.show {
                let spec = cat.get(id)?;
                emit(&format!("{}\n", serde_json::to_string_pretty(&spec)?));
            } else {
                let mut text = String::new();
                for c in cat.components() {
                    text.push_str(&format!("{}\t{}\n", c.id, c.description));
                }
                for t in cat.optic_types() {
                    let roles: Vec<&str> = t.roles.keys().map(String::as_str).collect();
                    text.push_str(&format!("optic_type {}\tscale={} roles={}\n", t.name, t.scale, roles.join(",")));
                }
                emit(&text);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Fmt { doc, write, check } => {
            let text = std::fs::read_to_string(doc).map_err(|e| Fatal(format!("cannot read `{}`: {e}", doc.display())))?;
            let formatted = format_document(&text).map_err(|e| Fatal(format!("{}:{e}", doc.display())))?;
            if *check {
                if formatted != text {
                    eprintln!("{} is not canonically formatted", doc.display());
                    return Ok(ExitCode::from(1));
                }
            } else if *write {
                if formatted != text {
                    std::fs::write(doc, &formatted)?;
                }
            } else {
                emit(&formatted);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
