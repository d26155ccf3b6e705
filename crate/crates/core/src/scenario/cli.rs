//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use super::config::load_config;
use super::render::render_frame;
use super::run::{build_offline_map, run_scenario};
use crate::grid::{load_map, save_map, DecayParams};

#[derive(Debug, Parser)]
#[command(name = "mapdecay", version, about = "Occupancy map decay toward an offline map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and clean the offline map of a scenario.
    BuildOffline { config: PathBuf, out: PathBuf },
    /// Run a scenario and write maps, frames and metrics.
    Run {
        config: PathBuf,
        /// Disable decay toward the offline map.
        #[arg(long)]
        no_decay: bool,
        #[arg(long, requires = "w_off")]
        w_on: Option<f64>,
        #[arg(long, requires = "w_on")]
        w_off: Option<f64>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a map file as a PPM image.
    Render { map: PathBuf, out: PathBuf },
    /// Compare two map files cell by cell.
    Diff { a: PathBuf, b: PathBuf },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn cli_main<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    2
                }
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), Box<dyn std::error::Error>> {
    match command {
        Command::BuildOffline { config, out } => {
            let cfg = load_config(config)?;
            let map = build_offline_map(&cfg)?;
            save_map(map.grid(), &out)?;
            writeln!(stdout, "wrote {} ({}x{} cells)", out.display(), map.grid().width(), map.grid().height())?;
        }
        Command::Run {
            config,
            no_decay,
            w_on,
            w_off,
            out,
        } => {
            let mut cfg = load_config(config)?;
            if let (Some(on), Some(off)) = (w_on, w_off) {
                cfg.decay = DecayParams::new(on, off)?.with_enabled(cfg.decay.enabled());
            }
            if no_decay {
                cfg.decay = cfg.decay.with_enabled(false);
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let report = run_scenario(&cfg)?;
            writeln!(stdout, "{}", report.summary_line())?;
        }
        Command::Render { map, out } => {
            let grid = load_map(map)?;
            render_frame(&grid, &out)?;
        }
        Command::Diff { a, b } => {
            let d = load_map(a)?.diff(&load_map(b)?)?;
            writeln!(stdout, "max_abs_diff={} differing_cells={}", d.max_abs_diff, d.differing_cells)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridGeometry, GridMap};

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = cli_main(std::iter::once("mapdecay").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(call(&["frobnicate"]).0, 2);
        assert_eq!(call(&["run", "x.json", "--bogus"]).0, 2);
        assert_eq!(call(&["run", "x.json", "--w-on", "3"]).0, 2);
        let (code, _, err) = call(&[]);
        assert_eq!(code, 2);
        assert!(err.contains("Usage"), "{err}");
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn other_errors_exit_1() {
        let (code, _, err) = call(&["diff", "/nonexistent/a.ogm", "/nonexistent/b.ogm"]);
        assert_eq!(code, 1);
        assert!(err.starts_with("error:"), "{err}");
    }

    #[test]
    fn diff_and_render() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ogm");
        let g = GridGeometry::new(0.5, 0.0, 0.0, 3, 2).unwrap();
        save_map(&GridMap::new(g), &a).unwrap();
        let a = a.to_str().unwrap();
        let (code, out, _) = call(&["diff", a, a]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "max_abs_diff=0 differing_cells=0");

        let ppm = dir.path().join("a.ppm");
        assert_eq!(call(&["render", a, ppm.to_str().unwrap()]).0, 0);
        let bytes = std::fs::read(&ppm).unwrap();
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert!(bytes[header.len()..].chunks(3).all(|p| p == [0, 0, 255]));
    }
}
