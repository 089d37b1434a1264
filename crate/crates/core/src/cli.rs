//! The experiment runners behind the `ncclab` binary.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig, Format};
use crate::counterexample::{
    assemble_and_probe, dirac_delta_scaling, run_decoupled_growth, run_dirac_sample, run_separated_growth_tol,
    weak_type_failure_table, ProbeReport,
};
use crate::error::{Error, Result};
use crate::outer::{sum_rule, sum_rule_with, unwrapped_arg_along_ray, Mode};
use crate::potential::PotentialSpec;
use crate::verify::run_all;

#[derive(Parser, Debug)]
#[command(name = "ncclab", version, about = "Krein and Dirac scattering experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Trace of 𝔄(7, 2 + iη) for the indicator of [0, 7], η from 100 down to 0.
    Figure2(Flags),
    /// Logarithmic growth of decoupled (and optionally separated) bumps.
    Growth(Flags),
    /// One Dirac sample and, optionally, its δ-scaling.
    Sample(Flags),
    /// Sparse assembly of Dirac samples and per-sample oscillations.
    Assemble(Flags),
    /// ‖Ψ_ν‖₂ against the measure where the maximal function is large.
    Weaktype(Flags),
    /// All invariant suites; exits nonzero on the first failure.
    Verify(Flags),
    /// Krein and Dirac sum rules.
    Sumrule(Flags),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "NCCLAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    fn parts(self) -> (Experiment, Flags) {
        match self {
            Command::Figure2(f) => (Experiment::Figure2, f),
            Command::Growth(f) => (Experiment::Growth, f),
            Command::Sample(f) => (Experiment::Sample, f),
            Command::Assemble(f) => (Experiment::Assemble, f),
            Command::Weaktype(f) => (Experiment::Weaktype, f),
            Command::Verify(f) => (Experiment::Verify, f),
            Command::Sumrule(f) => (Experiment::Sumrule, f),
        }
    }
}

/// Resolves the effective config: file (or defaults), then flags.
pub fn resolve(experiment: Experiment, flags: &Flags) -> Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(experiment),
    };
    if cfg.experiment != experiment {
        return Err(Error::Config(format!(
            "config is for `{}` but the subcommand is `{}`",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    if let Some(o) = &flags.out {
        cfg.out_dir = Some(o.clone());
    }
    if let Some(f) = flags.format {
        cfg.format = f;
    }
    if let Some(s) = flags.seed {
        cfg.params.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Files written by a command and whether its checks passed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub passed: bool,
    /// First failing check, for `verify`.
    pub failure: Option<String>,
}

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Out {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        Ok(Out { dir, files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        let path = self.dir.join(name);
        std::fs::write(&path, s).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        self.files.push(path);
        Ok(())
    }

    fn report(&mut self, stem: &str, r: &ProbeReport) -> Result<()> {
        self.json(&format!("{stem}_report.json"), r)?;
        let w = self.create(&format!("{stem}_summary.csv"))?;
        r.write_summary_csv(w)
    }

    fn done(self, passed: bool, failure: Option<String>) -> Outcome {
        Outcome { files: self.files, passed, failure }
    }
}

pub fn cmd_figure2(cfg: &ExperimentConfig) -> Result<Outcome> {
    let f = &cfg.params.figure2;
    let p = PotentialSpec::indicator(0.0, f.x_end)?;
    let trace = unwrapped_arg_along_ray(&p, f.x_end, f.xi, Some(f.eta_top), Mode::Krein)?;
    let mut out = Out::new(cfg)?;
    match cfg.format {
        Format::Csv => trace.write_csv(out.create("figure2_trace.csv")?)?,
        Format::Json => out.json("figure2_trace.json", &trace)?,
    }
    let top = trace.top_value();
    let summary = json!({
        "x_end": f.x_end,
        "xi": f.xi,
        "eta_top": trace.path[0].im,
        "endpoint_value": [top.re, top.im],
        "endpoint_distance_from_one": (top - 1.0).norm(),
        "boundary_value": [trace.final_value().re, trace.final_value().im],
        "boundary_arg": trace.final_arg(),
        "min_modulus": trace.min_modulus(),
        "total_arg_variation": trace.total_variation(),
        "points": trace.path.len(),
    });
    out.json("figure2_summary.json", &summary)?;
    let passed = trace.min_modulus() >= 1.0 - 1e-6;
    Ok(out.done(passed, None))
}

pub fn cmd_growth(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = &cfg.params;
    let mut out = Out::new(cfg)?;
    let r = run_decoupled_growth(&p.base, &p.nu_list, cfg.window())?;
    let passed = r.fit.as_ref().is_none_or(|f| f.slope > 0.0);
    out.report("growth", &r)?;
    if let Some(s) = &p.separated {
        let r = run_separated_growth_tol(&p.base, s.nu, s.r, cfg.window(), p.n_xi, p.tol)?;
        out.report("separated", &r)?;
    }
    Ok(out.done(passed, None))
}

pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = &cfg.params;
    let mut out = Out::new(cfg)?;
    let r = run_dirac_sample(&p.base, p.nu, p.delta, cfg.window(), &p.sample)?;
    out.report("sample", &r)?;
    if !p.deltas.is_empty() {
        let r = dirac_delta_scaling(&p.base, p.nu, &p.deltas, cfg.window(), &p.sample)?;
        out.report("delta_scaling", &r)?;
    }
    Ok(out.done(true, None))
}

pub fn cmd_assemble(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = &cfg.params;
    let mut out = Out::new(cfg)?;
    let c = match p.assembly_c {
        Some(c) => c,
        None => {
            let &(nu, delta) = p.schedule.samples.last().ok_or_else(|| Error::Config("empty schedule".into()))?;
            if delta == 0.0 {
                return Err(Error::Config("cannot fit the threshold from a sample with δ = 0".into()));
            }
            let fit = run_dirac_sample(&p.base, nu, delta, cfg.window(), &p.sample)?;
            fit.fitted["alpha"]
        }
    };
    let r = assemble_and_probe(&p.base, &p.schedule, cfg.window(), c, &p.sample)?;
    let osc = crate::counterexample::oscillations(&r);
    let passed = osc.windows(2).all(|w| w[1] > w[0]);
    out.report("assemble", &r)?;
    Ok(out.done(passed, None))
}

pub fn cmd_weaktype(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = &cfg.params;
    let mut out = Out::new(cfg)?;
    let t = weak_type_failure_table(&p.base, &p.weak_nu_list, p.weak_c, p.n_xi)?;
    match cfg.format {
        Format::Csv => t.write_csv(out.create("weaktype.csv")?)?,
        Format::Json => out.json("weaktype.json", &t)?,
    }
    Ok(out.done(true, None))
}

pub fn cmd_sumrule(cfg: &ExperimentConfig) -> Result<Outcome> {
    let p = &cfg.params;
    let mut out = Out::new(cfg)?;
    let krein = sum_rule(&p.base, Mode::Krein)?;
    let dirac = sum_rule(&p.base, Mode::Dirac)?;
    let deltas = if p.deltas.is_empty() { vec![0.4, 0.2, 0.1, 0.05] } else { p.deltas.clone() };
    let scaling: Vec<_> = deltas
        .iter()
        .map(|&d| Ok(json!({"delta": d, "integral": sum_rule_with(&p.base.scaled(d), Mode::Dirac, 200.0, 1e-12)?.rhs})))
        .collect::<Result<_>>()?;
    out.json("sumrule.json", &json!({"krein": krein, "dirac": dirac, "delta_scaling": scaling}))?;
    let passed = krein.residual.abs() < 1e-3 && dirac.residual.abs() < 1e-3;
    Ok(out.done(passed, None))
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut out = Out::new(cfg)?;
    let (suites, bounds) = run_all(cfg.params.seed, cfg.params.trials)?;
    out.json("verify_report.json", &json!({"seed": cfg.params.seed, "suites": suites}))?;
    out.json("bounds_suites.json", &bounds)?;
    let failure = suites.iter().find(|s| !s.passed).map(|s| s.name.clone());
    Ok(out.done(failure.is_none(), failure))
}

pub fn run_config(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.experiment {
        Experiment::Figure2 => cmd_figure2(cfg),
        Experiment::Growth => cmd_growth(cfg),
        Experiment::Sample => cmd_sample(cfg),
        Experiment::Assemble => cmd_assemble(cfg),
        Experiment::Weaktype => cmd_weaktype(cfg),
        Experiment::Verify => cmd_verify(cfg),
        Experiment::Sumrule => cmd_sumrule(cfg),
    }
}

/// Parses `args`, runs the experiment and maps the result to an exit code:
/// 0 on success, 1 when the experiment fails or a check does not hold, 2 on
/// usage or configuration errors.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (experiment, flags) = cli.command.parts();
    let cfg = match resolve(experiment, &flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = flags.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run_config(&cfg)) {
        Ok(o) => {
            for f in &o.files {
                println!("{}", f.display());
            }
            if o.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} failed: {}", experiment.name(), o.failure.as_deref().unwrap_or("check did not hold"));
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Config(_)) { 2 } else { 1 })
        }
    }
}
