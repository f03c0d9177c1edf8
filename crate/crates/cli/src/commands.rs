use std::fs;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use classe_core::classe::{default_traps, design_load_network, ClassEDesign, DesignError};
use classe_core::netlist::{
    driver_stage, load_json, save_json, single_stage_template_with_fet, two_stage_template_with_fets, DesignConstants,
    Netlist, StageTemplate,
};
use classe_core::rf::{s_params, write_touchstone, FrequencyGrid};
use classe_core::transient::{simulate_report, waveform_csv, SimConfig};
use classe_core::tuning::{
    calibrate_fet, dbm_to_watts, drive_for, pae, pin_grid, sweep_csv, sweep_pin, tune, Objective,
};

use crate::error::CliError;
use crate::service::{self, Session};
use crate::summary::{hash_hex, summarize};

/// Default small-signal gain each stage is calibrated to, dB.
pub const SINGLE_STAGE_GAIN_DB: f64 = 17.5;
pub const CASCADE_STAGE_GAIN_DB: f64 = 17.3;

#[derive(Debug, Parser)]
#[command(name = "classe-pa", version, about = "Design, analyse and tune 2.4 GHz class-E power amplifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesise a single- or two-stage amplifier and write its netlist.
    Design(DesignArgs),
    /// Small-signal S-parameters to a Touchstone file.
    Analyze(AnalyzeArgs),
    /// One steady-state period at a given input power to CSV.
    Transient(TransientArgs),
    /// Gain, output power and PAE over input power to CSV.
    Sweep(SweepArgs),
    /// Optimise tunable component values and write a JSON report.
    Tune(TuneArgs),
    /// Serve the netlist and analyses over HTTP on loopback.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub stages: u8,
    #[arg(long, default_value_t = 2.4e9)]
    pub f0: f64,
    #[arg(long, default_value_t = 4.2)]
    pub vcc: f64,
    /// Output power of the last stage, W.
    #[arg(long, default_value_t = 1.0)]
    pub pout: f64,
    /// Loaded Q of the series resonator.
    #[arg(long, default_value_t = 7.0)]
    pub q: f64,
    /// Small-signal gain each stage's device is calibrated to, dB
    /// [default: 17.5 for one stage, 17.3 per stage for two].
    #[arg(long)]
    pub stage_gain: Option<f64>,
    #[arg(long, default_value = "netlist.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 1e9)]
    pub from: f64,
    #[arg(long, default_value_t = 4e9)]
    pub to: f64,
    #[arg(long, default_value_t = 301)]
    pub points: usize,
    #[arg(long, default_value = "out.s2p")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransientArgs {
    pub file: PathBuf,
    /// Available input power, dBm.
    #[arg(long, allow_negative_numbers = true)]
    pub pin: f64,
    #[arg(long, default_value = "waveform.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    S21,
    Pae,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::S21)]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    /// Input power of the PAE objective, dBm.
    #[arg(long, default_value_t = 16.0, allow_negative_numbers = true)]
    pub pin: f64,
    /// Component to tune; repeat for several. Defaults to every tunable one.
    #[arg(long = "id")]
    pub ids: Vec<String>,
    #[arg(long, default_value = "tune.json")]
    pub out: PathBuf,
    /// Also write the tuned netlist here.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = 8787)]
    pub port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design(a) => design(&a),
        Command::Analyze(a) => analyze(&a),
        Command::Transient(a) => transient(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Tune(a) => tune_cmd(&a),
        Command::Serve(a) => serve(&a),
    }
}

pub fn read_netlist(path: &Path) -> Result<Netlist, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(load_json(&bytes)?)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn design_flag(e: DesignError) -> CliError {
    match e {
        DesignError::NonPositive { name, value } => {
            let flag = match name {
                "vcc" => "--vcc",
                "f0" => "--f0",
                "p_out_target" => "--pout",
                other => other,
            };
            CliError::flag(flag, format!("must be positive and finite, got {value}"))
        }
        DesignError::LowQ(q) => CliError::flag("--q", format!("loaded Q must be at least 3, got {q}")),
        e => CliError::Validation { field: None, message: e.to_string() },
    }
}

/// The calibrated netlist `design` writes, with the output-stage design.
pub fn build_design(a: &DesignArgs) -> Result<(Netlist, ClassEDesign), CliError> {
    for (flag, v) in [("--f0", a.f0), ("--vcc", a.vcc), ("--pout", a.pout), ("--q", a.q)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(CliError::flag(flag, format!("must be positive and finite, got {v}")));
        }
    }
    let constants = DesignConstants { f0: a.f0, vcc: a.vcc, ..DesignConstants::default() };
    if let Some(v) = constants.violations().into_iter().next() {
        return Err(CliError::flag("--f0", v));
    }
    let design = design_load_network(a.vcc, a.f0, a.pout, a.q).map_err(design_flag)?;
    let traps = default_traps(a.f0).map_err(design_flag)?;
    let mut output = StageTemplate::new(design, traps);
    let netlist = if a.stages == 1 {
        let target = a.stage_gain.unwrap_or(SINGLE_STAGE_GAIN_DB);
        output.fet = calibrate_fet(target, a.f0, constants, &output).map_err(|e| gain_flag(e.into()))?;
        single_stage_template_with_fet(constants, &output)?
    } else {
        let target = a.stage_gain.unwrap_or(CASCADE_STAGE_GAIN_DB);
        let mut driver = driver_stage(&output)?;
        driver.fet = calibrate_fet(target, a.f0, constants, &driver).map_err(|e| gain_flag(e.into()))?;
        output.fet = calibrate_fet(target, a.f0, constants, &output).map_err(|e| gain_flag(e.into()))?;
        two_stage_template_with_fets(constants, &driver, &output)?
    };
    Ok((netlist, design))
}

fn gain_flag(e: CliError) -> CliError {
    match e {
        CliError::Validation { field: Some(f), message } if f == "target_gain_db" => {
            CliError::flag("--stage-gain", message)
        }
        e => e,
    }
}

fn design(a: &DesignArgs) -> Result<(), CliError> {
    let (netlist, d) = build_design(a)?;
    write(&a.out, &save_json(&netlist))?;
    println!("wrote {} ({} stage{})", a.out.display(), a.stages, if a.stages == 1 { "" } else { "s" });
    println!("r_load    {:.4} ohm", d.r_load);
    print!("{}", summarize(&netlist).table());
    Ok(())
}

pub fn touchstone_for(netlist: &Netlist, grid: &FrequencyGrid) -> Result<String, CliError> {
    let s = s_params(netlist, grid)?;
    let hash = format!("netlist {}", hash_hex(netlist));
    Ok(write_touchstone(&s, &["classe-pa analyze", &hash])?)
}

fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let netlist = read_netlist(&a.file)?;
    let grid = FrequencyGrid::new(a.from, a.to, a.points)?;
    write(&a.out, touchstone_for(&netlist, &grid)?.as_bytes())?;
    println!("wrote {} ({} points)", a.out.display(), a.points);
    Ok(())
}

fn transient(a: &TransientArgs) -> Result<(), CliError> {
    let netlist = read_netlist(&a.file)?;
    if !a.pin.is_finite() {
        return Err(CliError::flag("--pin", "must be finite"));
    }
    let config = SimConfig { drive: drive_for(a.pin), ..SimConfig::default() };
    let (w, r) = simulate_report(&netlist, &config)?;
    write(&a.out, waveform_csv(&w).as_bytes())?;
    let p_in = dbm_to_watts(a.pin);
    println!("wrote {} ({} samples)", a.out.display(), w.len());
    println!("p_out     {:.6} W", r.p_out);
    println!("p_dc      {:.6} W", r.p_dc);
    println!("drain eff {:.4}", r.drain_efficiency);
    if let Ok(v) = pae(p_in, r.p_out, r.p_dc) {
        println!("pae       {v:.4}");
    }
    Ok(())
}

fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let netlist = read_netlist(&a.file)?;
    let pins = pin_grid(a.from, a.to, a.step)?;
    let s = sweep_pin(&netlist, &pins, &SimConfig::default())?;
    write(&a.out, sweep_csv(&s).as_bytes())?;
    println!("wrote {} ({} points, {} failed)", a.out.display(), s.len(), s.failures());
    if let Some((i, p)) = s.peak_pae() {
        println!("peak pae {:.4} at {} dBm", p, s.x[i]);
    }
    Ok(())
}

fn tune_cmd(a: &TuneArgs) -> Result<(), CliError> {
    let netlist = read_netlist(&a.file)?;
    let f0 = netlist.constants.f0;
    let objective = match a.objective {
        ObjectiveArg::S21 => Objective::s21(f0),
        ObjectiveArg::Pae => Objective::pae(f0, a.pin),
    };
    let ids = if a.ids.is_empty() { netlist.tunable_ids() } else { a.ids.clone() };
    let report = tune(&netlist, &objective, &ids, a.budget, &SimConfig::default())?;
    let mut json = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Numerical(e.to_string()))?;
    json.push(b'\n');
    write(&a.out, &json)?;
    if let (Some(path), Some(n)) = (&a.save, &report.netlist) {
        write(path, &save_json(n))?;
    }
    println!("wrote {} ({} evaluations)", a.out.display(), report.evaluations);
    println!("objective {:.6} -> {:.6}", report.initial, report.best);
    Ok(())
}

fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let netlist = read_netlist(&a.file)?;
    let session = Arc::new(Session::new(netlist));
    let addr = SocketAddr::new(a.host, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{addr}");
        axum::serve(listener, service::router(session)).await.map_err(|e| CliError::Usage(e.to_string()))
    })
}
