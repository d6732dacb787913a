use clap::{Parser, Subcommand};
use cmi_core::pipeline::{self, ExportFormat, ProblemConfig, VerificationReport};
use cmi_core::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "cmi", version, about = "Build and verify conformal minimal immersions of circular domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the seed stored in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Newton tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Overrides the number of exhaustion stages.
    #[arg(long, global = true)]
    stages: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the construction; writes report.json, surface.obj and samples.csv.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Re-check a report against its stored tolerances.
    Verify {
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the construction and write only the OBJ mesh.
    Mesh {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: &Error) -> ExitCode {
    let body = serde_json::json!({
        "code": e.code(),
        "stage": e.stage(),
        "message": e.to_string(),
    });
    eprintln!("{body}");
    match e {
        Error::Config(_) => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn load(path: &Path, cli: &Cli) -> Result<ProblemConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ProblemConfig::from_json(&text)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.tolerances.newton = t;
    }
    if let Some(j) = cli.stages {
        cfg.stages = j;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = match &cli.command {
        Command::Build { config, out, samples } => (|| {
            let cfg = load(config, &cli)?;
            let (imm, report) = pipeline::run(&cfg)?;
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("report.json"), report.to_json())?;
            pipeline::export(&imm, ExportFormat::Mesh, *samples, &out.join("surface.obj"))?;
            pipeline::export(&imm, ExportFormat::Csv, *samples, &out.join("samples.csv"))?;
            Ok(true)
        })(),
        Command::Verify { report } => (|| {
            let text = std::fs::read_to_string(report)?;
            let report = VerificationReport::from_json(&text)?;
            let mut ok = true;
            for (name, pass, detail) in report.checks()? {
                println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
                ok &= pass;
            }
            Ok(ok)
        })(),
        Command::Mesh { config, samples, out } => (|| {
            let cfg = load(config, &cli)?;
            let (imm, _) = pipeline::run(&cfg)?;
            pipeline::export(&imm, ExportFormat::Mesh, *samples, out)?;
            Ok(true)
        })(),
    };
    eprintln!("wall time {:.3} s", start.elapsed().as_secs_f64());
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => fail(&e),
    }
}
