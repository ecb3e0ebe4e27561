//! `dfft`: runs distributed FFT benchmarks and prints timing reports.
//!
//! A failed verification exits with status 2; other errors exit with 1.

use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{ArgAction, Parser, ValueEnum};
use dfft_core::bench::{
    predict_tfft, run, run_on, Backend, ComplexityModel, GridSpec, Precision, Report, RunConfig, Topology,
    VerifyMode, VerifyStatus,
};
use dfft_core::exchange::ExchangeOptions;
use dfft_core::transport::socket::SocketTransport;
use dfft_core::{CostModel, Decomposition, ExchangeMode, TransformKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    C2c,
    R2c,
    C2r,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DecompArg {
    Slab,
    Pencil,
    General,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Inprocess,
    Costmodel,
    Socket,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExchangeArg {
    Direct,
    Staged,
    Pipelined,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VerifyArg {
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Double,
    Single,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TopologyArg {
    Hypercube,
    Torus3d,
}

/// Distributed multidimensional FFT benchmark.
#[derive(Debug, Parser)]
#[command(name = "dfft", version)]
struct Cli {
    /// Global tensor shape, e.g. 64,64,64.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    /// Process grid, e.g. 2,4.
    #[arg(long, value_delimiter = ',', conflicts_with = "np")]
    grid: Option<Vec<usize>>,
    /// Number of ranks; the grid is factored automatically.
    #[arg(long)]
    np: Option<usize>,
    #[arg(long, value_enum, default_value = "c2c")]
    kind: KindArg,
    /// Defaults to pencil for 3-axis tensors and general otherwise.
    #[arg(long, value_enum)]
    decomp: Option<DecompArg>,
    #[arg(long, value_enum, default_value = "inprocess")]
    backend: BackendArg,
    /// Pipelined (true) or stage-then-exchange (false) transposes.
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    pipelined: bool,
    /// Exchange mode; overrides --pipelined.
    #[arg(long, value_enum)]
    exchange: Option<ExchangeArg>,
    /// Chunks per peer in the pipelined exchange.
    #[arg(long, default_value_t = 4)]
    chunks: usize,
    #[arg(long, default_value_t = 2)]
    staging_buffers: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "double")]
    precision: PrecisionArg,
    /// Skip the 1/N scaling of backward transforms.
    #[arg(long)]
    no_normalize: bool,
    /// Report file; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Seconds per message (cost-model backend).
    #[arg(long)]
    latency: Option<f64>,
    /// Seconds per byte on the wire (cost-model backend).
    #[arg(long)]
    inv_bw: Option<f64>,
    /// Seconds per byte of staging copy (cost-model backend).
    #[arg(long)]
    staging_inv_bw: Option<f64>,
    /// Seconds per flop in local FFTs (cost-model backend).
    #[arg(long)]
    flop_time: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    verify: VerifyArg,
    /// Tensor file to transform instead of random input.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Where to write the transformed tensor.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Addresses of every rank for a multi-process socket run.
    #[arg(long, value_delimiter = ',', requires = "rank")]
    hosts: Option<Vec<String>>,
    /// This process's rank in --hosts.
    #[arg(long, requires = "hosts")]
    rank: Option<usize>,
    /// Receive timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    /// Also print the complexity-model prediction for this topology.
    #[arg(long, value_enum)]
    predict: Option<TopologyArg>,
}

impl Cli {
    fn config(&self) -> RunConfig {
        let mut cost = CostModel::default();
        if let Some(v) = self.latency {
            cost.latency = v;
        }
        if let Some(v) = self.inv_bw {
            cost.inv_bandwidth = v;
        }
        if let Some(v) = self.staging_inv_bw {
            cost.staging_inv_bandwidth = v;
        }
        if let Some(v) = self.flop_time {
            cost.flop_time = v;
        }
        let mode = match self.exchange {
            Some(ExchangeArg::Direct) => ExchangeMode::Direct,
            Some(ExchangeArg::Staged) => ExchangeMode::Staged,
            Some(ExchangeArg::Pipelined) => ExchangeMode::Pipelined,
            None if self.pipelined => ExchangeMode::Pipelined,
            None => ExchangeMode::Staged,
        };
        let grid = match (&self.grid, self.np, &self.hosts) {
            (Some(g), _, _) => GridSpec::Shape(g.clone()),
            (None, Some(p), _) => GridSpec::Ranks(p),
            (None, None, Some(h)) => GridSpec::Ranks(h.len()),
            (None, None, None) => GridSpec::Ranks(1),
        };
        let decomposition = match self.decomp {
            Some(DecompArg::Slab) => Decomposition::Slab,
            Some(DecompArg::Pencil) => Decomposition::Pencil,
            Some(DecompArg::General) => Decomposition::General,
            None if self.dims.len() == 3 => Decomposition::Pencil,
            None => Decomposition::General,
        };
        RunConfig {
            dims: self.dims.clone(),
            grid,
            kind: match self.kind {
                KindArg::C2c => TransformKind::C2C,
                KindArg::R2c => TransformKind::R2C,
                KindArg::C2r => TransformKind::C2R,
            },
            decomposition,
            backend: match self.backend {
                BackendArg::Inprocess => Backend::InProcess,
                BackendArg::Costmodel => Backend::CostModel,
                BackendArg::Socket => Backend::Socket,
            },
            precision: match self.precision {
                PrecisionArg::Double => Precision::Double,
                PrecisionArg::Single => Precision::Single,
            },
            exchange: ExchangeOptions {
                mode,
                chunks: self.chunks,
                staging_buffers: self.staging_buffers,
            },
            normalize: !self.no_normalize,
            reps: self.reps,
            warmup: self.warmup,
            seed: self.seed,
            cost_model: cost,
            verify: match self.verify {
                VerifyArg::Auto => VerifyMode::Auto,
                VerifyArg::On => VerifyMode::On,
                VerifyArg::Off => VerifyMode::Off,
            },
            input: self.input.clone(),
            output: self.output.clone(),
        }
    }
}

fn resolve(hosts: &[String]) -> anyhow::Result<Vec<SocketAddr>> {
    hosts
        .iter()
        .map(|h| {
            h.to_socket_addrs()
                .with_context(|| format!("cannot resolve {h}"))?
                .next()
                .with_context(|| format!("{h} resolves to no address"))
        })
        .collect()
}

fn execute(cli: &Cli) -> anyhow::Result<Option<Report>> {
    if !(cli.timeout.is_finite() && cli.timeout > 0.0) {
        bail!("--timeout must be positive");
    }
    let config = cli.config();
    match (&cli.hosts, cli.rank) {
        (Some(hosts), Some(rank)) => {
            if !matches!(cli.backend, BackendArg::Socket) {
                bail!("--hosts needs --backend socket");
            }
            let addrs = resolve(hosts)?;
            let timeout = Duration::from_secs_f64(cli.timeout);
            let transport = SocketTransport::connect(&addrs, rank, None, timeout)?;
            Ok(run_on(transport.into_communicator(timeout), &config)?)
        }
        _ => Ok(Some(run(&config)?)),
    }
}

fn emit(cli: &Cli, report: &Report) -> anyhow::Result<()> {
    let text = match cli.format {
        FormatArg::Json => report.to_json() + "\n",
        FormatArg::Csv => report.to_csv(),
    };
    match &cli.out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
            let t = &report.timing_median;
            println!(
                "median total {:.6e} s (fft {:.3e}, pack {:.3e}, unpack {:.3e}, staging {:.3e}, wire {:.3e}), {:.3} GFLOPS, verification {:?}",
                t.total,
                t.local_fft,
                t.pack,
                t.unpack,
                t.staging_copy,
                t.wire_comm,
                report.gflops_median,
                report.verification.status
            );
        }
        None => print!("{text}"),
    }
    if let Some(topology) = cli.predict {
        let topology = match topology {
            TopologyArg::Hypercube => Topology::Hypercube,
            TopologyArg::Torus3d => Topology::Torus3d,
        };
        let bytes = match report.config.precision {
            Precision::Double => 16,
            Precision::Single => 8,
        };
        let cost = report.config.cost_model.unwrap_or(cli.config().cost_model);
        let model = ComplexityModel::from_cost_model(topology, &cost, bytes)?;
        eprintln!(
            "predicted {:.6e} s on a {topology:?} with {} ranks",
            predict_tfft(&report.config.dims, report.config.ranks, &model),
            report.config.ranks
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let report = match execute(&cli) {
        Ok(Some(report)) => report,
        Ok(None) => return ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = emit(&cli, &report) {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match report.verification.status {
        VerifyStatus::Failed => {
            eprintln!(
                "verification failed: relative error {:e} exceeds {:e}",
                report.verification.relative_error.unwrap_or(f64::NAN),
                report.verification.tolerance.unwrap_or(f64::NAN)
            );
            ExitCode::from(2)
        }
        _ => ExitCode::SUCCESS,
    }
}
