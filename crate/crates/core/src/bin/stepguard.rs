use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use stepguard::detector::DetectorMode;
use stepguard::harness::output::{trace_rows, trial_row, write_csv, TRACE_COLUMNS, TRIAL_COLUMNS};
use stepguard::harness::{
    emit_ablation, emit_outputs, preset_names, run_ablation, run_experiment, run_indexed_trial, run_trial,
    tpr_where, ExperimentConfig, ExperimentSummary, TrialOptions,
};

#[derive(Parser)]
#[command(name = "stepguard", version, about = "Silent-error detection experiments for time steppers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Error-free run; writes the difference sequence and detector verdicts.
    Solve(Common),
    /// One seeded faulty trial with its per-step trace.
    Trial {
        #[command(flatten)]
        common: Common,
        /// Trial index within the experiment seed.
        #[arg(long, default_value_t = 0)]
        index: u64,
    },
    /// Trial ensemble with aggregate rates and TPR curves.
    Experiment(Common),
    /// The ensemble under both, jump-only and variance-only detectors.
    Ablation(Common),
    /// Lists the built-in presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset name (see `stepguard presets`).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// both | jump | variance
    #[arg(long)]
    detector_mode: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn default_scheme(problem: &str) -> &'static str {
    if problem.starts_with("heat") {
        "fe-be"
    } else if problem.starts_with("ns") {
        "extrapolation1"
    } else {
        "rk45"
    }
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_toml_str(&text)?
        } else if let Some(name) = &self.preset {
            ExperimentConfig::named(name)?
        } else if let Some(problem) = &self.problem {
            let scheme = self.scheme.as_deref().unwrap_or_else(|| default_scheme(problem));
            ExperimentConfig::preset(problem, scheme)?
        } else {
            bail!("give --config, --preset or --problem");
        };
        if self.config.is_some() || self.preset.is_some() {
            if let Some(p) = &self.problem {
                cfg.problem = p.clone();
            }
            if let Some(s) = &self.scheme {
                cfg.scheme = s.clone();
            }
        }
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.trials {
            cfg.trials = n;
        }
        if let Some(mode) = &self.detector_mode {
            cfg.detector.mode = mode.parse::<DetectorMode>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(s: &ExperimentSummary) {
    let a = &s.aggregate;
    let pct = |x: Option<f64>| x.map(|v| format!("{:.3}", v)).unwrap_or_else(|| "-".into());
    println!(
        "{} {} [{}]: trials={} aborted={} TPR(at)={} TPR(next)={} TPR(L>3)={} FPR={:.4}",
        s.config.problem,
        s.config.scheme,
        s.config.detector.mode,
        a.trials,
        a.aborted,
        pct(a.tpr_at_fault),
        pct(a.tpr_fault_or_next),
        pct(tpr_where(&s.records, |l| l > 3.0)),
        a.fpr
    );
}

fn write_trace(path: &Path, cfg: &ExperimentConfig, record: &stepguard::harness::TrialRecord) -> Result<()> {
    write_csv(path, &cfg.to_toml_string(), &TRACE_COLUMNS, &trace_rows(record))?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for name in preset_names() {
                println!("{name}");
            }
        }
        Command::Solve(common) => {
            let mut cfg = common.resolve()?;
            cfg.fault = None;
            let template = cfg.build_scheme()?;
            let record = run_trial(
                template.as_ref(),
                &cfg.detector,
                None,
                TrialOptions {
                    seed: cfg.seed,
                    norm: cfg.norm,
                    trace: true,
                    ..Default::default()
                },
            )?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("solve.csv");
            write_trace(&path, &cfg, &record)?;
            println!(
                "{} {}: {} steps, {} checked, {} flags -> {}",
                cfg.problem,
                cfg.scheme,
                record.n_steps,
                record.trace.len(),
                record.flagged_steps.len(),
                path.display()
            );
        }
        Command::Trial { common, index } => {
            let cfg = common.resolve()?;
            let template = cfg.build_scheme()?;
            let record = run_indexed_trial(&cfg, template.as_ref(), index, true)?;
            std::fs::create_dir_all(&common.out)?;
            let path = common.out.join("trace.csv");
            write_trace(&path, &cfg, &record)?;
            write_csv(&common.out.join("trial.csv"), &cfg.to_toml_string(), &TRIAL_COLUMNS, &[trial_row(&record)])?;
            if let Some(f) = record.fault {
                println!(
                    "fault: {} at step {} (stage {}, slot {}, component {}) x {}",
                    f.mode, f.step, f.stage, f.slot, f.component, f.factor
                );
            }
            if let Some(l) = record.lte_value() {
                println!("LTE-normalized error: {l}");
            }
            println!(
                "flagged steps: {:?}; detected at fault: {}, at fault or next: {} -> {}",
                record.flagged_steps,
                record.detected_at_fault,
                record.detected_at_fault_or_next,
                path.display()
            );
        }
        Command::Experiment(common) => {
            let cfg = common.resolve()?;
            let summary = run_experiment(&cfg)?;
            print_summary(&summary);
            for p in emit_outputs(&summary, &common.out)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Ablation(common) => {
            let cfg = common.resolve()?;
            let summaries = run_ablation(&cfg)?;
            for s in &summaries {
                print_summary(s);
            }
            for p in emit_ablation(&summaries, &common.out)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}
