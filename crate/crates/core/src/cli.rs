//! Command-line front end.
//!
//! Settings resolve in three layers: built-in defaults, then a `key=value`
//! config file (`--config` or `$PMQKD_CONFIG`), then explicit flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{ChannelSpec, Loss, DEFAULT_ALPHA_DB_PER_KM, DEFAULT_ETA_D, DEFAULT_E_D, DEFAULT_P_D};
use crate::error::{Error, ErrorCode, Result};
use crate::ingest::{
    parse_component_losses, parse_tally_csv, reproduce_key_rate, tally_csv_string,
    CountsInterpretation, ExperimentRecord, ReproductionOptions,
};
use crate::keyrate::{analytic_key_rate, KeyRateResult};
use crate::optimizer::{optimize, Bounds, OptimizationResult, OptimizerConfig, Strategy};
use crate::params::{ProtocolParams, DEFAULT_F_EC, DEFAULT_M_SLICES, DEFAULT_N_ROUNDS, DEFAULT_P_S};
use crate::security::{
    deviation_bound, phase_error_discrete, Conventions, LogBase, SecurityBudget,
    VacuumNormalization,
};
use crate::simulator::simulate;

pub const CONFIG_ENV: &str = "PMQKD_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "pmqkd", version, about = "Finite-key analysis for phase-matching QKD without intensity modulation")]
pub struct Cli {
    #[command(flatten)]
    pub run: RunArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Each may also appear in the config file
/// under the same name (dashes or underscores).
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// key=value config file
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Total channel loss in dB (overrides distance)
    #[arg(long, global = true)]
    pub loss_db: Option<f64>,
    /// Fiber distance in km
    #[arg(long, global = true)]
    pub distance_km: Option<f64>,
    /// Fiber attenuation in dB/km [default: 0.168]
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Detector efficiency [default: 0.56]
    #[arg(long, global = true)]
    pub eta_d: Option<f64>,
    /// Dark-count probability [default: 1e-8]
    #[arg(long, global = true)]
    pub p_d: Option<f64>,
    /// Misalignment error [default: 0.01]
    #[arg(long, global = true)]
    pub e_d: Option<f64>,
    /// Total intensity
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Phase slices, 6 or 8 [default: 8]
    #[arg(long, global = true)]
    pub m_slices: Option<u32>,
    /// Rounds N [default: 1e11]
    #[arg(long, global = true)]
    pub n_rounds: Option<f64>,
    /// Test-sample fraction [default: 0.07]
    #[arg(long, global = true)]
    pub p_s: Option<f64>,
    /// Error-correction efficiency [default: 1.16]
    #[arg(long, global = true)]
    pub f: Option<f64>,
    /// Chernoff failure probability [default: 0.5e-20]
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Kato failure probability [default: 1e-10]
    #[arg(long, global = true)]
    pub eps_ka: Option<f64>,
    /// Privacy-amplification margin xi [default: log2(2e20)]
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    /// Error-verification margin xi' [default: log2(1e15)]
    #[arg(long, global = true)]
    pub xi_prime: Option<f64>,
    /// Logarithm in beta = log(1/eps): ln, log2 or log10 [default: ln]
    #[arg(long, global = true)]
    pub log_base: Option<String>,
    /// Vacuum-yield denominator: sifted or all [default: sifted]
    #[arg(long, global = true)]
    pub vacuum_norm: Option<String>,
    /// RNG seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Write output here instead of stdout
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// evolution (population based) or pattern (compass search)
    #[arg(long, default_value = "evolution")]
    pub strategy: Strategy,
    #[arg(long, default_value_t = 1e-6)]
    pub mu_min: f64,
    #[arg(long, default_value_t = 0.1)]
    pub mu_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_s_min: f64,
    #[arg(long, default_value_t = 0.5)]
    pub p_s_max: f64,
    /// Hold p_s at the configured value instead of optimizing it
    #[arg(long)]
    pub fix_p_s: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rate at one operating point (JSON by default).
    ///
    /// CSV columns: loss_db,mu,m_slices,n_rounds,p_s,q_mu,e_b,n_mu,m_s,y0_bar,
    /// ep_m,ep_m_bar,ell,rate
    Keyrate,
    /// Rate versus distance, optimizing mu and p_s per point.
    ///
    /// CSV columns: n_rounds,distance_km,loss_db,mu,p_s,rate
    Scan {
        #[arg(long, default_value_t = 0.0)]
        d_min: f64,
        #[arg(long, default_value_t = 350.0)]
        d_max: f64,
        /// Distance step in km
        #[arg(long, default_value_t = 5.0)]
        step: f64,
        /// Comma-separated round counts; defaults to --n-rounds
        #[arg(long, value_delimiter = ',')]
        n_list: Vec<f64>,
        /// Use --mu at every point instead of optimizing
        #[arg(long)]
        fixed_mu: bool,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Even-photon deviations at the optimized intensity.
    ///
    /// CSV columns: loss_db,mu,delta_0,delta_2,delta_4[,delta_6],ep_m,deviation_share
    Deviation {
        #[arg(long, default_value_t = 10.0)]
        loss_min: f64,
        #[arg(long, default_value_t = 50.0)]
        loss_max: f64,
        #[arg(long, default_value_t = 5.0)]
        loss_step: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Monte Carlo tally in the ingest CSV format.
    Simulate,
    /// Key rate from a measured tally CSV (JSON by default).
    Reproduce {
        /// Tally CSV
        input: PathBuf,
        /// Whether the rows are the sifted key only or include the test sample
        #[arg(long, default_value = "sifted")]
        counts: CountsInterpretation,
        /// Analyse as if the run had this many rounds
        #[arg(long)]
        scale_to_rounds: Option<f64>,
        /// device,attenuation_db table attached as metadata
        #[arg(long)]
        components: Option<PathBuf>,
    },
    /// Maximize the key rate over mu and p_s (JSON by default).
    ///
    /// CSV columns: loss_db,mu_opt,p_s_opt,rate_opt,grid_rate,evaluations,infeasible
    Optimize {
        #[command(flatten)]
        search: SearchArgs,
        /// Omit the evaluation trace from JSON output
        #[arg(long)]
        no_trace: bool,
    },
}

const CONFIG_KEYS: &[&str] = &[
    "loss_db", "distance_km", "alpha", "eta_d", "p_d", "e_d", "mu", "m_slices", "n_rounds", "p_s",
    "f", "eps", "eps_ka", "xi", "xi_prime", "log_base", "vacuum_norm", "seed", "format", "output",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::schema(i + 1, format!("expected key=value, found `{line}`")))?;
        let key = k.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(Error::schema(i + 1, format!("unknown config key `{}`", k.trim())));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ProtocolParams,
    pub alpha_db_per_km: f64,
    pub mu_given: bool,
    pub seed: u64,
    #[serde(skip)]
    pub format: Option<Format>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

struct Layers {
    file: BTreeMap<String, String>,
}

impl Layers {
    fn get<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::usage(key, format!("config value `{raw}`: {e}"))),
        }
    }
}

impl RunConfig {
    /// Merges defaults, the config file and flags.
    pub fn resolve(flags: &RunArgs) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        let l = Layers { file };
        let f = flags;

        let alpha = l.get("alpha", f.alpha)?.unwrap_or(DEFAULT_ALPHA_DB_PER_KM);
        let loss = match (l.get("loss_db", f.loss_db)?, l.get("distance_km", f.distance_km)?) {
            (Some(db), _) => Loss::TotalDb { total_loss_db: db },
            (None, Some(km)) => Loss::Fiber {
                distance_km: km,
                alpha_db_per_km: alpha,
            },
            (None, None) => Loss::TotalDb { total_loss_db: 0.0 },
        };
        let channel = ChannelSpec::new(
            loss,
            l.get("eta_d", f.eta_d)?.unwrap_or(DEFAULT_ETA_D),
            l.get("p_d", f.p_d)?.unwrap_or(DEFAULT_P_D),
            l.get("e_d", f.e_d)?.unwrap_or(DEFAULT_E_D),
        )?;

        let defaults = SecurityBudget::default();
        let budget = SecurityBudget::new(
            l.get("eps", f.eps)?.unwrap_or(defaults.eps),
            l.get("eps_ka", f.eps_ka)?.unwrap_or(defaults.eps_ka),
            l.get("xi", f.xi)?.unwrap_or(defaults.xi),
            l.get("xi_prime", f.xi_prime)?.unwrap_or(defaults.xi_prime),
        )?;
        let log_base = match l.get::<String>("log_base", f.log_base.clone())? {
            Some(s) => s.parse::<LogBase>().map_err(|e| Error::usage("log_base", e))?,
            None => LogBase::default(),
        };
        let vacuum_normalization = match l.get::<String>("vacuum_norm", f.vacuum_norm.clone())? {
            Some(s) => s
                .parse::<VacuumNormalization>()
                .map_err(|e| Error::usage("vacuum_norm", e))?,
            None => VacuumNormalization::default(),
        };

        let mu = l.get("mu", f.mu)?;
        let params = ProtocolParams {
            mu: mu.unwrap_or(0.0),
            m_slices: l.get("m_slices", f.m_slices)?.unwrap_or(DEFAULT_M_SLICES),
            n_rounds: l.get("n_rounds", f.n_rounds)?.unwrap_or(DEFAULT_N_ROUNDS),
            p_s: l.get("p_s", f.p_s)?.unwrap_or(DEFAULT_P_S),
            channel,
            f_ec: l.get("f", f.f)?.unwrap_or(DEFAULT_F_EC),
            budget,
            conventions: Conventions {
                log_base,
                vacuum_normalization,
            },
        };
        params.validate()?;

        let format = match l.get::<String>("format", None)? {
            _ if f.format.is_some() => f.format,
            Some(s) => Some(Format::from_str(&s, true).map_err(|e| Error::usage("format", e))?),
            None => None,
        };
        Ok(Self {
            params,
            alpha_db_per_km: alpha,
            mu_given: mu.is_some(),
            seed: l.get("seed", f.seed)?.unwrap_or(0),
            format,
            output: l.get::<PathBuf>("output", f.output.clone())?,
        })
    }

    fn require_mu(&self) -> Result<()> {
        if self.mu_given {
            Ok(())
        } else {
            Err(Error::usage("mu", "required (pass --mu or set mu in the config)"))
        }
    }

    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn csv_table<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.as_ref())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn search_setup(search: &SearchArgs, params: &ProtocolParams, seed: u64) -> (Bounds, OptimizerConfig) {
    let bounds = Bounds {
        mu_min: search.mu_min,
        mu_max: search.mu_max,
        p_s_min: search.p_s_min,
        p_s_max: search.p_s_max,
    };
    let bounds = if search.fix_p_s {
        bounds.with_fixed_p_s(params.p_s)
    } else {
        bounds
    };
    let config = OptimizerConfig {
        strategy: search.strategy,
        seed,
        record_trace: false,
        ..Default::default()
    };
    (bounds, config)
}

pub fn cmd_keyrate(cfg: &RunConfig) -> Result<KeyRateResult> {
    cfg.require_mu()?;
    analytic_key_rate(&cfg.params)
}

fn keyrate_csv(r: &KeyRateResult, loss_db: f64) -> Result<String> {
    csv_table(
        &[
            "loss_db", "mu", "m_slices", "n_rounds", "p_s", "q_mu", "e_b", "n_mu", "m_s", "y0_bar",
            "ep_m", "ep_m_bar", "ell", "rate",
        ],
        &[vec![
            loss_db.to_string(),
            num(r.mu),
            r.m_slices.to_string(),
            num(r.n_rounds),
            r.p_s.to_string(),
            num(r.q_mu),
            num(r.e_b),
            num(r.n_mu),
            num(r.m_s),
            num(r.vacuum.y0_bar),
            num(r.phase.ep_m),
            num(r.phase.ep_m_bar),
            num(r.ell),
            num(r.rate),
        ]],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub n_rounds: f64,
    pub distance_km: f64,
    pub loss_db: f64,
    pub mu: f64,
    pub p_s: f64,
    pub rate: f64,
}

/// Rate over a distance grid for each `N`; rows ordered by `N`, then distance.
pub fn cmd_scan(
    cfg: &RunConfig,
    d_min: f64,
    d_max: f64,
    step: f64,
    n_list: &[f64],
    fixed_mu: bool,
    search: &SearchArgs,
) -> Result<Vec<ScanRow>> {
    if !(step > 0.0) {
        return Err(Error::usage("step", format!("{step} must be > 0")));
    }
    if !(d_min >= 0.0 && d_max >= d_min) {
        return Err(Error::usage("d_max", format!("need 0 <= d_min <= d_max, got [{d_min}, {d_max}]")));
    }
    if fixed_mu {
        cfg.require_mu()?;
    }
    let ns = if n_list.is_empty() { vec![cfg.params.n_rounds] } else { n_list.to_vec() };
    let count = ((d_max - d_min) / step + 1e-9).floor() as usize + 1;
    let points: Vec<(f64, f64)> = ns
        .iter()
        .flat_map(|&n| (0..count).map(move |i| (n, d_min + i as f64 * step)))
        .collect();

    points
        .par_iter()
        .map(|&(n_rounds, distance_km)| {
            let channel = ChannelSpec {
                loss: Loss::Fiber {
                    distance_km,
                    alpha_db_per_km: cfg.alpha_db_per_km,
                },
                ..cfg.params.channel
            };
            let params = ProtocolParams {
                n_rounds,
                channel,
                ..cfg.params
            };
            params.validate()?;
            let (mu, p_s, rate) = if fixed_mu {
                (params.mu, params.p_s, crate::keyrate::analytic_rate(&params))
            } else {
                let (bounds, config) = search_setup(search, &params, cfg.seed);
                let o = optimize(&params, &bounds, &config)?;
                (o.mu_opt, o.p_s_opt, o.rate_opt)
            };
            Ok(ScanRow {
                n_rounds,
                distance_km,
                loss_db: channel.total_loss_db(),
                mu,
                p_s,
                rate,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationRow {
    pub loss_db: f64,
    pub mu: f64,
    /// `delta_0, delta_2, ...` up to `k = M - 2`.
    pub deltas: Vec<f64>,
    /// Discrete phase error before the Kato correction.
    pub ep_m: f64,
    pub deviation_share: f64,
}

/// Deviation terms at the rate-optimal intensity for each loss.
pub fn cmd_deviation(
    cfg: &RunConfig,
    loss_min: f64,
    loss_max: f64,
    loss_step: f64,
    search: &SearchArgs,
) -> Result<Vec<DeviationRow>> {
    if !crate::security::SUPPORTED_SLICES.contains(&cfg.params.m_slices) {
        return Err(Error::usage("m_slices", format!("{} must be 6 or 8", cfg.params.m_slices)));
    }
    if !(loss_step > 0.0 && loss_max >= loss_min) {
        return Err(Error::usage("loss_step", "need loss_step > 0 and loss_max >= loss_min"));
    }
    let count = ((loss_max - loss_min) / loss_step + 1e-9).floor() as usize + 1;
    let losses: Vec<f64> = (0..count).map(|i| loss_min + i as f64 * loss_step).collect();
    losses
        .par_iter()
        .map(|&loss_db| {
            let params = ProtocolParams {
                channel: ChannelSpec {
                    loss: Loss::TotalDb { total_loss_db: loss_db },
                    ..cfg.params.channel
                },
                ..cfg.params
            };
            let (bounds, config) = search_setup(search, &params, cfg.seed);
            let o = optimize(&params, &bounds, &config)?;
            let at_opt = ProtocolParams {
                mu: o.mu_opt,
                p_s: o.p_s_opt,
                ..params
            };
            let r = analytic_key_rate(&at_opt)?;
            Ok(DeviationRow {
                loss_db,
                mu: o.mu_opt,
                deltas: r.phase.deviations.clone(),
                ep_m: r.phase.ep_m,
                deviation_share: r.phase.deviation_share(),
            })
        })
        .collect()
}

/// Deviations at an explicit intensity, bypassing the optimizer.
pub fn deviations_at(mu: f64, m_slices: u32, q_mu: f64, y0_bar: f64) -> Result<(Vec<f64>, f64)> {
    let b = phase_error_discrete(mu, m_slices, q_mu, y0_bar)?;
    let d = (0..m_slices / 2)
        .map(|k| deviation_bound(mu, m_slices, 2 * k, q_mu))
        .collect::<Result<Vec<_>>>()?;
    Ok((d, b.ep_m))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<ExperimentRecord> {
    cfg.require_mu()?;
    let tally = simulate(&cfg.params, cfg.seed)?;
    Ok(ExperimentRecord {
        loss_db: cfg.params.channel.total_loss_db(),
        n_rounds: cfg.params.n_rounds,
        mu: cfg.params.mu,
        p_s: cfg.params.p_s,
        tally,
        component_losses: None,
    })
}

pub fn cmd_reproduce(
    cfg: &RunConfig,
    path: &Path,
    counts: CountsInterpretation,
    scale_to_rounds: Option<f64>,
) -> Result<KeyRateResult> {
    let record = parse_tally_csv(path)?;
    let options = ReproductionOptions {
        f_ec: cfg.params.f_ec,
        interpretation: counts,
        conventions: cfg.params.conventions,
        scale_to_rounds,
    };
    reproduce_key_rate(&record, &cfg.params.budget, &options)
}

pub fn cmd_optimize(cfg: &RunConfig, search: &SearchArgs, trace: bool) -> Result<OptimizationResult> {
    let (bounds, mut config) = search_setup(search, &cfg.params, cfg.seed);
    config.record_trace = trace;
    optimize(&cfg.params, &bounds, &config)
}

/// Runs a parsed command line and returns what should be written.
pub fn execute(cli: &Cli) -> Result<(String, Option<PathBuf>)> {
    let cfg = RunConfig::resolve(&cli.run)?;
    let loss_db = cfg.params.channel.total_loss_db();
    let text = match &cli.command {
        Command::Keyrate => {
            let r = cmd_keyrate(&cfg)?;
            match cfg.format_or(Format::Json) {
                Format::Json => json(&r)?,
                Format::Csv => keyrate_csv(&r, loss_db)?,
            }
        }
        Command::Scan {
            d_min,
            d_max,
            step,
            n_list,
            fixed_mu,
            search,
        } => {
            let rows = cmd_scan(&cfg, *d_min, *d_max, *step, n_list, *fixed_mu, search)?;
            match cfg.format_or(Format::Csv) {
                Format::Json => json(&rows)?,
                Format::Csv => csv_table(
                    &["n_rounds", "distance_km", "loss_db", "mu", "p_s", "rate"],
                    &rows
                        .iter()
                        .map(|r| {
                            vec![
                                num(r.n_rounds),
                                r.distance_km.to_string(),
                                format!("{:.4}", r.loss_db),
                                num(r.mu),
                                format!("{:.4}", r.p_s),
                                num(r.rate),
                            ]
                        })
                        .collect::<Vec<_>>(),
                )?,
            }
        }
        Command::Deviation {
            loss_min,
            loss_max,
            loss_step,
            search,
        } => {
            let rows = cmd_deviation(&cfg, *loss_min, *loss_max, *loss_step, search)?;
            match cfg.format_or(Format::Csv) {
                Format::Json => json(&rows)?,
                Format::Csv => {
                    let k_max = cfg.params.m_slices / 2;
                    let delta_cols: Vec<String> = (0..k_max).map(|k| format!("delta_{}", 2 * k)).collect();
                    let mut header = vec!["loss_db", "mu"];
                    header.extend(delta_cols.iter().map(String::as_str));
                    header.extend(["ep_m", "deviation_share"]);
                    let body: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            let mut v = vec![r.loss_db.to_string(), num(r.mu)];
                            v.extend(r.deltas.iter().map(|d| num(*d)));
                            v.push(num(r.ep_m));
                            v.push(num(r.deviation_share));
                            v
                        })
                        .collect();
                    csv_table(&header, &body)?
                }
            }
        }
        Command::Simulate => {
            let record = cmd_simulate(&cfg)?;
            match cfg.format_or(Format::Csv) {
                Format::Json => json(&record)?,
                Format::Csv => tally_csv_string(&record)?,
            }
        }
        Command::Reproduce {
            input,
            counts,
            scale_to_rounds,
            components,
        } => {
            let mut r = cmd_reproduce(&cfg, input, *counts, *scale_to_rounds)?;
            if let Some(path) = components {
                let table = parse_component_losses(path)?;
                let total: f64 = table.values().sum();
                r.notes.push(format!(
                    "{} station components, {total:.2} dB total (metadata only)",
                    table.len()
                ));
            }
            match cfg.format_or(Format::Json) {
                Format::Json => json(&r)?,
                Format::Csv => keyrate_csv(&r, parse_tally_csv(input)?.loss_db)?,
            }
        }
        Command::Optimize { search, no_trace } => {
            let o = cmd_optimize(&cfg, search, !no_trace)?;
            match cfg.format_or(Format::Json) {
                Format::Json => json(&o)?,
                Format::Csv => csv_table(
                    &["loss_db", "mu_opt", "p_s_opt", "rate_opt", "grid_rate", "evaluations", "infeasible"],
                    &[vec![
                        loss_db.to_string(),
                        num(o.mu_opt),
                        o.p_s_opt.to_string(),
                        num(o.rate_opt),
                        num(o.grid_rate),
                        o.evaluations.to_string(),
                        o.infeasible.to_string(),
                    ]],
                )?,
            }
        }
    };
    Ok((text, cfg.output))
}

/// Entry point used by the binary. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprint!("error[{}]: {}", ErrorCode::Usage.as_str(), msg.trim_start_matches("error: "));
            return ErrorCode::Usage as i32;
        }
    };
    let outcome = execute(&cli).and_then(|(text, output)| match output {
        Some(path) => std::fs::write(&path, text).map_err(|e| Error::io(&path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code().as_str(), e);
            e.code() as i32
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let m = parse_config("# comment\nloss-db = 45\nmu=9.78e-4  # trailing\n\n").unwrap();
        assert_eq!(m["loss_db"], "45");
        assert_eq!(m["mu"], "9.78e-4");
        assert!(matches!(parse_config("bogus=1"), Err(Error::Schema { line: 1, .. })));
        assert!(parse_config("mu").is_err());
    }

    #[test]
    fn defaults_resolve_to_table_values() {
        let cfg = RunConfig::resolve(&RunArgs::default()).unwrap();
        let p = cfg.params;
        assert_eq!((p.m_slices, p.n_rounds, p.p_s, p.f_ec), (8, 1e11, 0.07, 1.16));
        assert_eq!((p.channel.eta_d, p.channel.p_d, p.channel.e_d), (0.56, 1e-8, 0.01));
        assert_eq!(p.budget, SecurityBudget::default());
        assert_eq!(cfg.alpha_db_per_km, 0.168);
        assert!(!cfg.mu_given);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "mu=1e-3\nloss_db=30\np_s=0.1\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            mu: Some(2e-3),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&args).unwrap();
        assert_eq!(cfg.params.mu, 2e-3);
        assert_eq!(cfg.params.p_s, 0.1);
        assert_eq!(cfg.params.channel.total_loss_db(), 30.0);
    }

    #[test]
    fn bad_value_names_the_field() {
        let args = RunArgs {
            p_s: Some(1.5),
            ..Default::default()
        };
        match RunConfig::resolve(&args) {
            Err(Error::Usage { field, .. }) => assert_eq!(field, "p_s"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deviations_vanish_without_light() {
        let (d, _) = deviations_at(0.0, 8, 1e-6, 0.0).unwrap();
        assert_eq!(d, vec![0.0; 4]);
    }
}
