//! Command-line front end: full runs from a configuration file, material
//! diagnostics, finite-difference checks and the bundled scenarios.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pfrac::config::RunConfig;
use pfrac::driver::Flow;
use pfrac::material::{derive_constants, derived_strengths, Material};
use pfrac::scenarios;
use pfrac::verify::{check_gradients, GradientCheckOptions};
use pfrac::{io, material};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "pfrac", version, about = "Plane-strain phase-field fracture with material strength")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by a configuration file.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.dir and PFRAC_OUTPUT_DIR).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print derived constants, derived strengths and the regularization-length check.
    MaterialInfo { config: PathBuf },
    /// Compare assembled residuals and tangents with finite differences.
    CheckGradients {
        config: PathBuf,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Run a bundled scenario (or a scenario configuration file) and compare with its oracle.
    Scenario {
        /// Preset name or path to a configuration file with a scenario section.
        name: Option<String>,
        /// List the bundled scenarios.
        #[arg(long)]
        list: bool,
        /// Write metadata and per-run CSV logs here.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Run { config, output } => run(&config, output),
        Command::MaterialInfo { config } => material_info(&config),
        Command::CheckGradients { config, samples } => gradients(&config, samples),
        Command::Scenario { name, list, output } => {
            if list {
                for (n, text) in scenarios::PRESETS {
                    let about = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
                    println!("{n:<18} {about}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let name = name.ok_or("scenario name required (see --list)")?;
            scenario(&name, output)
        }
    }
}

fn load(path: &Path) -> Result<RunConfig, String> {
    RunConfig::from_file(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn metadata_comments(cfg: &RunConfig) -> Result<Vec<String>, String> {
    let canonical = cfg.to_canonical_string();
    let hash = Sha256::digest(canonical.as_bytes());
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    let p = cfg.material_params().map_err(|e| e.to_string())?;
    let d = derive_constants(&p);
    Ok(vec![
        format!("pfrac {}", env!("CARGO_PKG_VERSION")),
        format!("config sha256 {hex}"),
        format!("eps check: {}", material::check_eps(&p, &d)),
        format!("eps = {}, delta_eps = {}, G_c/W_ts = {}", p.eps, p.delta_eps, p.g_c / d.w_ts),
    ])
}

fn run(path: &Path, output: Option<PathBuf>) -> Result<ExitCode, String> {
    let mut cfg = load(path)?;
    if output.is_some() {
        cfg.output.dir = output;
    }
    let dir = cfg.output.resolved_dir();
    io::create_dir(&dir).map_err(|e| e.to_string())?;
    io::write_metadata(&dir, &metadata_comments(&cfg)?, &cfg.to_canonical_string()).map_err(|e| e.to_string())?;

    let base = path.parent().unwrap_or(Path::new("."));
    let (problem, program) = cfg.build(base).map_err(|e| e.to_string())?;
    let mesh = problem.space.mesh_arc();
    let every = cfg.output.every;
    let last = program.len().saturating_sub(1);
    let mut write_error = None;
    let outcome = problem.run_program_with(
        &program,
        &mut |s| {
            log::info!("step {}: load {:e}, {} iterations, min v {:e}", s.step, s.load, s.iterations, s.v_min);
            if cfg.output.vtk && (s.step % every == 0 || s.step == last) {
                if let Err(e) = io::write_vtk(&mesh, &s.u, &s.v, s.step, &dir) {
                    write_error = Some(e.to_string());
                    return Flow::Stop;
                }
            }
            Flow::Continue
        },
        &mut |_, _| Flow::Continue,
    );
    io::write_csv_log(outcome.states.iter().flat_map(|s| &s.records), &dir).map_err(|e| e.to_string())?;
    io::write_steps_csv(&outcome.states, &dir).map_err(|e| e.to_string())?;
    if let Some(e) = write_error {
        return Err(e);
    }
    if let Some(e) = outcome.failure {
        return Err(format!("run failed after {} steps: {e}", outcome.states.len()));
    }
    println!("{} steps written to {}", outcome.states.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

fn material_info(path: &Path) -> Result<ExitCode, String> {
    let cfg = load(path)?;
    let p = cfg.material_params().map_err(|e| e.to_string())?;
    let mat = Material::new(p).map_err(|e| e.to_string())?;
    let d = derive_constants(&p);
    println!("E                  {}", d.young_e);
    println!("nu                 {}", p.poisson());
    println!("kappa              {}", d.kappa);
    println!("W_ts               {}", d.w_ts);
    println!("W_hs               {}", d.w_hs);
    println!("alpha1             {}", d.alpha1);
    println!("alpha2             {}", d.alpha2);
    println!("eps                {}", p.eps);
    println!("delta_eps          {}", p.delta_eps);
    println!("eps_recommended    {}", d.eps_recommended_max);
    println!("G_c/W_ts           {}", p.g_c / d.w_ts);
    match derived_strengths(&p) {
        Ok(s) => {
            println!("sigma_ss           {}", s.shear);
            println!("sigma_bs           {}", s.biaxial);
            if s.compressive > 0.0 {
                println!("sigma_cs           {}", s.compressive);
            } else {
                println!("sigma_cs           none (surface open in compression)");
            }
        }
        Err(e) => println!("derived strengths  unavailable: {e}"),
    }
    println!("eps check          {}", mat.check_eps());
    Ok(ExitCode::SUCCESS)
}

fn gradients(path: &Path, samples: usize) -> Result<ExitCode, String> {
    let cfg = load(path)?;
    let p = cfg.material_params().map_err(|e| e.to_string())?;
    let report = check_gradients(&p, &GradientCheckOptions { samples, ..Default::default() });
    println!("{report}");
    if report.passed() {
        println!("gradient check passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("gradient check FAILED");
        Ok(ExitCode::from(1))
    }
}

fn scenario(name: &str, output: Option<PathBuf>) -> Result<ExitCode, String> {
    let cfg = if scenarios::PRESETS.iter().any(|(n, _)| *n == name) {
        scenarios::preset(name).map_err(|e| e.to_string())?
    } else if Path::new(name).is_file() {
        load(Path::new(name))?
    } else {
        return Err(scenarios::preset(name).map(|_| ()).unwrap_err().to_string());
    };
    let start = std::time::Instant::now();
    let report = scenarios::run_scenario(&cfg).map_err(|e| e.to_string())?;
    println!("scenario {name}");
    println!("{report}");
    println!("wall time {:.1} s", start.elapsed().as_secs_f64());
    if let Some(dir) = output {
        io::create_dir(&dir).map_err(|e| e.to_string())?;
        io::write_metadata(&dir, &metadata_comments(&cfg)?, &cfg.to_canonical_string()).map_err(|e| e.to_string())?;
        for (k, (_, states)) in report.runs().iter().enumerate() {
            let sub = dir.join(format!("run_{k}"));
            io::create_dir(&sub).map_err(|e| e.to_string())?;
            io::write_csv_log(states.iter().flat_map(|s| &s.records), &sub).map_err(|e| e.to_string())?;
            io::write_steps_csv(states, &sub).map_err(|e| e.to_string())?;
        }
    }
    if report.passed() {
        println!("oracle comparison: pass");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("oracle comparison: FAIL");
        Ok(ExitCode::from(1))
    }
}
