mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use config::{Flags, Settings};
use std::io::Write;
use std::process::ExitCode;

/// Numerical checks for fractional GJMS operators and their energies.
#[derive(Parser)]
#[command(name = "gjms", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Scattering multipliers on the hemisphere against the closed form, k <= kmax
    Scattering(Flags),
    /// Half-space Dirichlet-to-Neumann symbol against xi^(2 gamma)
    Dtn(Flags),
    /// Energy gaps over a seeded random suite of admissible fields
    Energy(Flags),
    /// Sharp Sobolev trace quotients for concentrated extremals (modes = concentrations a)
    Sobolev(Flags),
    /// Residual decay of conformal covariance and linearization checks
    Covariance(Flags),
    /// Half-space per-mode energy identities for gamma in (1,2)
    Appendix(Flags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, flags) = match &cli.cmd {
        Cmd::Scattering(f) => ("scattering", f),
        Cmd::Dtn(f) => ("dtn", f),
        Cmd::Energy(f) => ("energy", f),
        Cmd::Sobolev(f) => ("sobolev", f),
        Cmd::Covariance(f) => ("covariance", f),
        Cmd::Appendix(f) => ("appendix", f),
    };
    let run = || -> anyhow::Result<report::Table> {
        let s = Settings::resolve(flags)?;
        let t = match name {
            "scattering" => commands::scattering(&s)?,
            "dtn" => commands::dtn(&s)?,
            "energy" => commands::energy_cmd(&s)?,
            "sobolev" => commands::sobolev(&s)?,
            "covariance" => commands::covariance(&s)?,
            _ => commands::appendix(&s)?,
        };
        t.emit(name, &s, s.out.as_deref())?;
        Ok(t)
    };
    match run() {
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e:#}");
            ExitCode::from(2)
        }
        Ok(t) if !t.breaches.is_empty() => {
            let mut err = std::io::stderr();
            let _ = writeln!(err, "{} budget breach(es):", t.breaches.len());
            for b in &t.breaches {
                let _ = writeln!(err, "  {b}");
            }
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
    }
}
