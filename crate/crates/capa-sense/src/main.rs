//! Experiment CLI: reproducible CRB-design runs emitting CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use capa_sense::config::load_scenario;
use capa_sense::experiments::{
    self, linspace, CsvDoc, ProbePolicy,
};
use capa_sense::fisher::dump_cross_matrices_csv;
use capa_sense::geometry::{admissibility_check, scenario_from_table1, Scenario};
use capa_sense::optimizer::{DirectionRule, SmgdConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fidelity {
    /// Desk-scale grids (120 points per axis) for quick runs.
    Test,
    /// Reference-scale grids (300 points per axis).
    Paper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Optimized,
    Random,
}

impl From<PolicyArg> for ProbePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Optimized => ProbePolicy::Optimized,
            PolicyArg::Random => ProbePolicy::RandomPhase,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Fr,
    Pr,
    Plain,
}

impl From<RuleArg> for DirectionRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Fr => DirectionRule::FletcherReeves,
            RuleArg::Pr => DirectionRule::PolakRibiere,
            RuleArg::Plain => DirectionRule::Plain,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "capa-sense",
    about = "Near-field sensing with continuous apertures: CRB-optimal probing design and evaluation",
    version
)]
struct Cli {
    /// Scenario TOML (defaults to the built-in reference configuration).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RNG seed for starts, random policies, and noise.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Override the per-axis Gauss-Legendre point count.
    #[arg(long, global = true)]
    gl_points: Option<usize>,

    /// Grid-resolution preset applied when --gl-points is absent.
    #[arg(long, global = true, value_enum, default_value_t = Fidelity::Test)]
    fidelity: Fidelity,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integration convergence versus quadrature order.
    GlConvergence {
        #[arg(long, default_value_t = 40)]
        n_min: usize,
        #[arg(long, default_value_t = 300)]
        n_max: usize,
        #[arg(long, default_value_t = 20)]
        n_step: usize,
    },
    /// Run the manifold optimizer once; emits the iteration trace.
    Optimize {
        #[arg(long, value_enum, default_value_t = RuleArg::Fr)]
        rule: RuleArg,
        /// Also write the final weights as CSV (re, im rows).
        #[arg(long)]
        weights_out: Option<PathBuf>,
        /// Also dump the cross-integral matrices as CSV.
        #[arg(long)]
        dump_matrices: Option<PathBuf>,
    },
    /// log10 CRB landscape over the XOZ plane for a single target.
    CrbMap {
        #[arg(long, value_enum, default_value_t = PolicyArg::Optimized)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 20)]
        nx: usize,
        #[arg(long, default_value_t = 20)]
        nz: usize,
        #[arg(long, default_value_t = -7.0)]
        x_min: f64,
        #[arg(long, default_value_t = 7.0)]
        x_max: f64,
        #[arg(long, default_value_t = 0.1)]
        z_min: f64,
        #[arg(long, default_value_t = 9.0)]
        z_max: f64,
    },
    /// Likelihood spectra along the x and z axes for one target.
    MleSpectrum {
        #[arg(long, value_enum, default_value_t = PolicyArg::Optimized)]
        policy: PolicyArg,
        /// Target index within the scenario.
        #[arg(long, default_value_t = 1)]
        target: usize,
        /// Half-width of the sweep window around the true coordinate.
        #[arg(long, default_value_t = 2.0)]
        window: f64,
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        /// Synthesize the observation without measurement noise.
        #[arg(long, default_value_t = false)]
        noiseless: bool,
    },
    /// Positioning NMSE versus grid-search step size.
    NmseStep {
        #[arg(long, value_enum, default_value_t = PolicyArg::Optimized)]
        policy: PolicyArg,
        #[arg(long, default_value_t = 1)]
        target: usize,
        /// Comma-separated step sizes in meters.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.4, 0.2, 0.1, 0.05, 0.025, 0.0125])]
        steps: Vec<f64>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0.5)]
        window: f64,
    },
    /// Optimized CRB versus transmit power.
    SweepPower {
        /// Comma-separated budgets in A².
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25e-4, 0.5e-4, 1.0e-4, 2.0e-4, 4.0e-4])]
        powers: Vec<f64>,
    },
    /// Optimized CRB versus carrier frequency.
    SweepFrequency {
        /// Comma-separated frequencies in GHz.
        #[arg(long, value_delimiter = ',', default_values_t = vec![26.0, 28.0, 30.0])]
        freqs_ghz: Vec<f64>,
    },
    /// Continuous aperture versus half-wavelength discrete array.
    CompareSpda,
    /// CRB at the true position when the design assumed a perturbed one.
    Robustness {
        #[arg(long, default_value_t = 0)]
        target: usize,
        #[arg(long, default_value_t = 0.15)]
        max_offset: f64,
        #[arg(long, default_value_t = 0.05)]
        offset_step: f64,
    },
    /// Normalized transmit beam pattern of the optimized current.
    BeamPattern {
        #[arg(long, default_value_t = 7.0)]
        half_extent: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        #[arg(long, default_value_t = 0.5)]
        z_min: f64,
        #[arg(long, default_value_t = 9.0)]
        z_max: f64,
    },
}

fn load_base_scenario(cli: &Cli) -> capa_sense::Result<Scenario> {
    let mut scenario = match &cli.config {
        Some(path) => load_scenario(path)?,
        None => scenario_from_table1(),
    };
    // Priority: explicit --gl-points, then the config file's own setting,
    // then the fidelity preset for the built-in scenario.
    if let Some(gl) = cli.gl_points {
        scenario = scenario.with_gl_points(gl)?;
    } else if cli.config.is_none() {
        scenario = scenario.with_gl_points(match cli.fidelity {
            Fidelity::Test => 120,
            Fidelity::Paper => 300,
        })?;
    }
    for report in admissibility_check(&scenario) {
        if !report.in_near_field {
            eprintln!(
                "warning: target {} at range {:.2} m lies outside the radiating near field (bound {:.2} m)",
                report.target_index, report.range_m, report.fraunhofer_bound_m
            );
        }
        if report.possibly_reactive {
            eprintln!(
                "warning: target {} at range {:.3} m is within a few wavelengths; reactive terms are neglected",
                report.target_index, report.range_m
            );
        }
    }
    Ok(scenario)
}

fn emit(doc: &CsvDoc, out: &Option<PathBuf>) -> capa_sense::Result<()> {
    match out {
        Some(path) => doc.write_to(path),
        None => {
            print!("{}", doc.render());
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> capa_sense::Result<()> {
    let scenario = load_base_scenario(cli)?;
    let seed = cli.seed;
    let config = SmgdConfig::default();

    match &cli.command {
        Command::GlConvergence { n_min, n_max, n_step } => {
            let mut ns = Vec::new();
            let mut n = *n_min;
            while n <= *n_max {
                ns.push(n);
                n += n_step.max(&1);
            }
            let doc = experiments::run_gl_convergence(&scenario, seed, &ns)?;
            emit(&doc, &cli.out)
        }
        Command::Optimize {
            rule,
            weights_out,
            dump_matrices,
        } => {
            let config = SmgdConfig::with_rule((*rule).into());
            let out = experiments::run_optimize(&scenario, seed, &config)?;
            if let Some(path) = weights_out {
                out.weights_csv.write_to(path)?;
            }
            if let Some(path) = dump_matrices {
                dump_cross_matrices_csv(&out.cross, path)?;
            }
            eprintln!("best objective: {:.6e}", out.best_objective);
            emit(&out.trace_csv, &cli.out)
        }
        Command::CrbMap {
            policy,
            nx,
            nz,
            x_min,
            x_max,
            z_min,
            z_max,
        } => {
            let xs = linspace(*x_min, *x_max, *nx);
            let zs = linspace(*z_min, *z_max, *nz);
            let doc =
                experiments::run_crb_map(&scenario, seed, &xs, &zs, (*policy).into(), &config)?;
            emit(&doc, &cli.out)
        }
        Command::MleSpectrum {
            policy,
            target,
            window,
            step,
            noiseless,
        } => {
            let doc = experiments::run_mle_spectrum(
                &scenario,
                *target,
                seed,
                (*policy).into(),
                *window,
                *step,
                *noiseless,
                &config,
            )?;
            emit(&doc, &cli.out)
        }
        Command::NmseStep {
            policy,
            target,
            steps,
            trials,
            window,
        } => {
            let doc = experiments::run_nmse_step(
                &scenario,
                *target,
                seed,
                (*policy).into(),
                steps,
                *trials,
                *window,
                &config,
            )?;
            emit(&doc, &cli.out)
        }
        Command::SweepPower { powers } => {
            let doc = experiments::run_sweep_power(&scenario, seed, powers, &config)?;
            emit(&doc, &cli.out)
        }
        Command::SweepFrequency { freqs_ghz } => {
            let doc = experiments::run_sweep_frequency(&scenario, seed, freqs_ghz, &config)?;
            emit(&doc, &cli.out)
        }
        Command::CompareSpda => {
            let (doc, ratio) = experiments::run_compare_spda(&scenario, seed, &config)?;
            eprintln!("SPDA/CAPA trace ratio: {ratio:.3}");
            emit(&doc, &cli.out)
        }
        Command::Robustness {
            target,
            max_offset,
            offset_step,
        } => {
            let mut offsets = Vec::new();
            let count = (max_offset / offset_step).round() as i64;
            for i in -count..=count {
                offsets.push(i as f64 * offset_step);
            }
            let doc = experiments::run_robustness(&scenario, *target, seed, &offsets, &config)?;
            emit(&doc, &cli.out)
        }
        Command::BeamPattern {
            half_extent,
            points,
            z_min,
            z_max,
        } => {
            let xs = linspace(-half_extent, *half_extent, *points);
            let zs = linspace(*z_min, *z_max, *points);
            let doc = experiments::run_beam_pattern(&scenario, seed, &xs, &zs, &config)?;
            emit(&doc, &cli.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
