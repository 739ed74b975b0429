//! `repcomp`: DV vs CV repeater comparison from the command line.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use repcomp::compare::{
    metadata_json, num, run_comparison, run_cv, run_dv_only, sidecar_paths, summary_text, write_breakdown_csv, write_csv,
    ComparisonConfig,
};
use repcomp::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "repcomp", version, about = "Compare DV and CV quantum repeater rates at matched entanglement")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sweep initial fidelity; CSV plus summary.
    Compare(Opts),
    /// DV pipeline only.
    DvRate(Opts),
    /// CV operating point only.
    CvRate(Opts),
    /// Run the oracle suites.
    Validate(Opts),
}

macro_rules! keys {
    ($($field:ident => $name:literal $(, $alias:literal)?;)*) => {
        /// Config file plus one flag per config key.
        #[derive(Args)]
        struct Opts {
            /// Key = value config file (TOML).
            #[arg(long)]
            config: Option<PathBuf>,
            $(
                #[arg(long = $name, $(alias = $alias,)? value_name = "VALUE")]
                $field: Option<String>,
            )*
        }

        impl Opts {
            fn overrides(&self) -> Vec<(String, String)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push((stringify!($field).to_string(), x.clone()));
                    }
                )*
                v
            }
        }
    };
}

keys! {
    chi => "chi";
    total_length_km => "total-length-km", "total_length_km";
    attenuation_db_per_km => "attenuation-db-per-km", "attenuation_db_per_km";
    light_speed_km_per_s => "light-speed-km-per-s", "light_speed_km_per_s";
    min_delay_s => "min-delay-s", "min_delay_s";
    num_links => "num-links", "num_links";
    f_initial_grid => "f-initial-grid", "f_initial_grid";
    f_required => "f-required", "f_required";
    eof_target => "eof-target", "eof_target";
    purification_formula => "purification-formula", "purification_formula";
    max_rounds => "max-rounds", "max_rounds";
    bsm_success_prob => "bsm-success-prob", "bsm_success_prob";
    num_modes => "num-modes", "num_modes";
    mode_threshold => "mode-threshold", "mode_threshold";
    fock_cutoff => "fock-cutoff", "fock_cutoff";
    nla_cutoff => "nla-cutoff", "nla_cutoff";
    cv_gain_mode => "cv-gain-mode", "cv_gain_mode";
    cv_gain_points => "cv-gain-points", "cv_gain_points";
    cv_max_gain => "cv-max-gain", "cv_max_gain";
    cv_teleport_gain => "cv-teleport-gain", "cv_teleport_gain";
    seed => "seed";
    mc_trials => "mc-trials", "mc_trials";
    output => "output";
}

impl Opts {
    fn load(&self) -> anyhow::Result<ComparisonConfig> {
        let text = match &self.config {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::Config(format!("reading {}: {e}", p.display())))?),
            None => None,
        };
        Ok(ComparisonConfig::load(text.as_deref(), &self.overrides())?)
    }
}

fn compare(o: &Opts) -> anyhow::Result<ExitCode> {
    let cfg = o.load()?;
    let res = run_comparison(&cfg)?;
    if cfg.output == "-" {
        write_csv(&res.rows, std::io::stdout())?;
        eprint!("{}", summary_text(&res));
        return Ok(ExitCode::SUCCESS);
    }
    let path = PathBuf::from(&cfg.output);
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(&res.rows, std::io::BufWriter::new(file))?;
    let (bd, meta) = sidecar_paths(&path);
    write_breakdown_csv(&res, std::io::BufWriter::new(std::fs::File::create(&bd)?))?;
    std::fs::write(&meta, metadata_json(&res)?)?;
    print!("{}", summary_text(&res));
    println!("wrote {}, {}, {}", path.display(), bd.display(), meta.display());
    Ok(ExitCode::SUCCESS)
}

fn dv_rate(o: &Opts) -> anyhow::Result<ExitCode> {
    let cfg = o.load()?;
    let (f_req, rows) = run_dv_only(&cfg)?;
    println!("f_required={f_req:.6} modes={}", cfg.modes());
    println!("f_initial,rounds,f_after_swap,dv_eof,dv_rate_hz,t_generation_s,t_purification_cc_s,t_end_to_end_cc_s");
    for r in rows {
        let comp = |k: &str| r.dv.as_ref().and_then(|b| b.component(k)).map(num).unwrap_or_default();
        println!(
            "{},{},{},{},{},{},{},{}",
            num(r.f_initial),
            r.rounds.map(|x| x.to_string()).unwrap_or_default(),
            r.f_after_swap.map(num).unwrap_or_default(),
            r.dv_eof.map(num).unwrap_or_default(),
            num(r.dv_rate_hz),
            comp("generation"),
            comp("purification_cc"),
            comp("end_to_end_cc"),
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cv_rate(o: &Opts) -> anyhow::Result<ExitCode> {
    let cfg = o.load()?;
    let cv = run_cv(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&cv)?);
    if !cv.feasible {
        eprintln!(
            "EoF target {} unreachable: best {:.6} at gain {:.4}",
            cfg.eof_target,
            cv.max_eof.unwrap_or(0.0),
            cv.max_eof_gain.unwrap_or(1.0)
        );
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(o: &Opts) -> anyhow::Result<ExitCode> {
    let cfg = o.load()?;
    let trials = if cfg.mc_trials == 0 { 100_000 } else { cfg.mc_trials };
    let checks = repcomp::validate::run_all(trials, cfg.seed)?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = std::panic::catch_unwind(|| match &cli.cmd {
        Cmd::Compare(o) => compare(o),
        Cmd::DvRate(o) => dv_rate(o),
        Cmd::CvRate(o) => cv_rate(o),
        Cmd::Validate(o) => validate(o),
    });
    match run {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_) | Error::Infeasible(_) | Error::Argument(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
        Err(_) => ExitCode::from(1),
    }
}
