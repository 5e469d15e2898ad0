use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use grover_optics::cli::{self, ExperimentKind, RunManifest};
use grover_optics::{Error, Result};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Verb {
    Pulse,
    Scan,
    Twomode,
    Mask,
}

impl Verb {
    fn kind(self) -> ExperimentKind {
        match self {
            Verb::Pulse => ExperimentKind::Pulse,
            Verb::Scan => ExperimentKind::Scan,
            Verb::Twomode => ExperimentKind::Twomode,
            Verb::Mask => ExperimentKind::Mask,
        }
    }
}

/// Wave-optics simulator of an optical Grover search cavity.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Experiment to run.
    verb: Verb,
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration (grover, fig2a, fig2b, fig4, fig5, fig6, fig6-empty).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Snapshot stride in round trips; for scans any value > 0 saves the resonant field.
    #[arg(long)]
    snapshots: Option<usize>,
    /// Worker threads for the frequency scan (default: all cores).
    #[arg(long)]
    parallel: Option<usize>,
    /// Print the resolved manifest and exit.
    #[arg(long)]
    dump_manifest: bool,
}

fn manifest(args: &Args) -> Result<RunManifest> {
    let text = match (&args.config, &args.preset) {
        (Some(p), _) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        (None, Some(name)) => cli::preset(name).ok_or_else(|| {
            let known: Vec<&str> = cli::PRESETS.iter().map(|p| p.0).collect();
            Error::config("preset", format!("unknown preset `{name}` (known: {})", known.join(", ")))
        })?,
        (None, None) => String::new(),
    };
    let mut raw = cli::parse_raw(&text)?;
    let kind = args.verb.kind();
    match raw.kind {
        Some(k) if k != kind => {
            return Err(Error::config(
                "kind",
                format!("configuration is for `{}` but the verb is `{}`", k.name(), kind.name()),
            ))
        }
        _ => raw.kind = Some(kind),
    }
    if let Some(out) = &args.out {
        raw.output = Some(out.clone());
    }
    if let Some(s) = args.snapshots {
        raw.run.get_or_insert_with(Default::default).snapshots = Some(s);
    }
    RunManifest::resolve(raw)
}

fn execute(args: &Args) -> Result<RunManifest> {
    let m = manifest(args)?;
    if args.dump_manifest {
        print!("{}", m.to_toml());
        return Ok(m);
    }
    if let Some(threads) = args.parallel {
        if threads == 0 {
            return Err(Error::config("parallel", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::config("parallel", e.to_string()))?;
    }
    let outcome = cli::run(&m)?;
    for (k, v) in &outcome.summary {
        println!("{k} = {v}");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(m)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "status": "error",
                "kind": e.kind(),
                "exit_code": e.exit_code(),
                "message": e.to_string(),
            });
            eprintln!("{report}");
            if let Some(dir) = args.out.as_ref() {
                if std::fs::create_dir_all(dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), format!("{report:#}\n"));
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
