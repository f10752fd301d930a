mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cutset_core::info::{gaussian_cut_value, JointPmf};
use cutset_core::region::cut_value_discrete;
use cutset_core::sim::{phase_transition_sweep, CodeFamily, Overlay, SweepReport};
use cutset_core::types_discrete::{discrete_certificate, CertificateError, DiscreteCertificate};
use cutset_core::types_gaussian::{gaussian_certificate, GaussianCertificate};
use cutset_core::{
    load_covariance, load_distribution, load_network, load_rates, region_margin, Cut, MembershipVerdict, Network,
    OptimizerConfig, RateMatrix,
};
use serde_json::{json, Value};

use report::{Inputs, Report, SCHEMA_VERSION};

const EXIT_INSIDE: u8 = 0;
const EXIT_OUTSIDE: u8 = 1;
const EXIT_UNCERTIFIED: u8 = 2;
const EXIT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cutset",
    version,
    about = "Cut-set bounds, strong-converse certificates and code simulation"
)]
struct Cli {
    /// Display information quantities in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Optimizer {
    /// Starting points of the margin search.
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Ascent iterations per smoothing level.
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    /// Margins at or below this count as inside.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Seed of the randomized restarts.
    #[arg(long, default_value_t = 0)]
    opt_seed: u64,
}

impl Optimizer {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            iterations: self.iterations,
            tol: self.tol,
            seed: self.opt_seed,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Witness {
    /// Input distribution document (discrete networks).
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Input covariance document (Gaussian networks).
    #[arg(long)]
    cov: Option<PathBuf>,
}

#[derive(Args)]
struct Simulation {
    /// Code family: random, repetition, identity, relay, antipodal, spherical or zero.
    #[arg(long, value_parser = parse_family)]
    code: CodeFamily,
    /// Blocklengths, comma separated.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    ns: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the rows as CSV to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    opt: Optimizer,
}

#[derive(Subcommand)]
enum Command {
    /// Cut values of every cut (or one) under a fixed input law.
    Bound {
        #[arg(long)]
        network: PathBuf,
        #[command(flatten)]
        witness: Witness,
        /// Source-side node set as a bitmask, bit i for node i.
        #[arg(long)]
        cut: Option<u64>,
    },
    /// Decides whether a rate matrix lies in the cut-set region.
    Membership {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[command(flatten)]
        opt: Optimizer,
    },
    /// Strong-converse certificate for a rate matrix outside the region.
    Exponent {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        /// Blocklengths at which to evaluate the bound, comma separated.
        #[arg(long, value_delimiter = ',')]
        n_samples: Vec<u64>,
        #[command(flatten)]
        opt: Optimizer,
    },
    /// Simulates a code family at one rate matrix.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        rates: PathBuf,
        #[command(flatten)]
        sim: Simulation,
    },
    /// Simulates a code family over several rate matrices.
    Sweep {
        #[arg(long)]
        network: PathBuf,
        /// Rate documents, comma separated or repeated.
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<PathBuf>,
        #[command(flatten)]
        sim: Simulation,
    },
}

fn parse_family(s: &str) -> Result<CodeFamily, String> {
    s.parse().map_err(|e: cutset_core::sim::SimError| e.to_string())
}

/// Scale from nats to the display unit.
struct Units {
    factor: f64,
    name: &'static str,
}

impl Units {
    fn new(bits: bool) -> Self {
        if bits {
            Units {
                factor: 1.0 / std::f64::consts::LN_2,
                name: "bits",
            }
        } else {
            Units {
                factor: 1.0,
                name: "nats",
            }
        }
    }

    fn show(&self, nats: f64) -> f64 {
        nats * self.factor
    }
}

fn cut_json(c: &Cut) -> Value {
    json!({"mask": c.mask(), "members": c.members()})
}

fn bound(net: &Network, witness: &Witness, cut: Option<u64>, inputs: &mut Inputs, u: &Units) -> Result<Value> {
    let nodes = net.node_count();
    let cuts: Vec<Cut> = match cut {
        Some(mask) => vec![Cut::new(mask, nodes)?],
        None => Cut::all(nodes).collect(),
    };
    let values: Vec<f64> = match (net, &witness.dist, &witness.cov) {
        (Network::Discrete(d), Some(path), _) => {
            let probs = load_distribution(&inputs.read(path)?, d.input_sizes())
                .with_context(|| format!("in {}", path.display()))?;
            let p = JointPmf::new(d.input_sizes().to_vec(), probs).map_err(|e| anyhow!("{e}"))?;
            cuts.iter().map(|c| cut_value_discrete(d, &p, c)).collect()
        }
        (Network::Gaussian(g), _, Some(path)) => {
            let k = load_covariance(&inputs.read(path)?, nodes).with_context(|| format!("in {}", path.display()))?;
            cuts.iter().map(|c| gaussian_cut_value(g, &k, c)).collect()
        }
        (Network::Discrete(_), None, _) => bail!("discrete networks take --dist"),
        (Network::Gaussian(_), _, None) => bail!("Gaussian networks take --cov"),
    };
    let rows: Vec<Value> = cuts
        .iter()
        .zip(&values)
        .map(|(c, v)| json!({"cut": cut_json(c), "value": u.show(*v)}))
        .collect();
    Ok(json!({ "cuts": rows }))
}

fn verdict_json(v: &MembershipVerdict, u: &Units) -> Value {
    json!({
        "inside": v.inside,
        "certified": v.certified,
        "margin": u.show(v.margin),
        "margin_lower_bound": v.margin_lower_bound.map(|m| u.show(m)),
        "worst_cut": cut_json(&v.worst_cut),
        "cut_values": v.cut_values.iter().map(|c| u.show(*c)).collect::<Vec<_>>(),
        "witness": v.witness,
        "agreeing_restarts": v.agreeing_restarts,
    })
}

fn discrete_json(c: &DiscreteCertificate, u: &Units) -> Value {
    json!({
        "kind": "discrete",
        "margin": u.show(c.margin),
        "margin_witness": u.show(c.margin_witness),
        "xi": u.show(c.xi),
        "exponent": u.show(c.exponent),
        "prefactor": c.prefactor,
        "worst_cut": cut_json(&c.worst_cut),
        "n0": c.n0,
    })
}

fn gaussian_json(c: &GaussianCertificate, u: &Units) -> Value {
    json!({
        "kind": "gaussian",
        "delta": c.delta,
        "eta": u.show(c.eta),
        "tau": u.show(c.tau),
        "tau_noise": u.show(c.tau_noise),
        "tau_cross": u.show(c.tau_cross),
        "gamma": c.gamma,
        "margin": u.show(c.margin),
        "p_max": c.p_max,
        "n_valid": c.n_valid,
        "n0": c.n0,
    })
}

fn sample_json(n: f64, log_bound: f64) -> Value {
    json!({"n": n, "log_bound": log_bound, "bound": log_bound.exp().min(1.0)})
}

/// Certificate report and exit status; uncertified margins exit with 2.
fn exponent(net: &Network, rates: &RateMatrix, ns: &[u64], cfg: &OptimizerConfig, u: &Units) -> Result<(Value, u8)> {
    let result = match net {
        Network::Discrete(d) => discrete_certificate(d, rates, cfg).map(|c| {
            let mut samples: Vec<Value> = ns.iter().map(|&n| sample_json(n as f64, c.log_bound(n))).collect();
            samples.push(sample_json(c.n0 as f64, c.log_bound(c.n0)));
            json!({"certificate": discrete_json(&c, u), "samples": samples})
        }),
        Network::Gaussian(g) => gaussian_certificate(g, rates, cfg).map(|c| {
            let mut samples: Vec<Value> = ns
                .iter()
                .map(|&n| sample_json(n as f64, c.log_bound(n as f64)))
                .collect();
            let n0 = c.n0.ceil();
            samples.push(sample_json(n0, c.log_bound(n0)));
            json!({"certificate": gaussian_json(&c, u), "samples": samples})
        }),
    };
    match result {
        Ok(v) => Ok((v, EXIT_INSIDE)),
        Err(e @ CertificateError::Uncertified { .. }) => {
            eprintln!("{e}");
            Ok((json!({"certificate": null, "reason": e.to_string()}), EXIT_UNCERTIFIED))
        }
        Err(e) => Err(e.into()),
    }
}

fn sweep_json(s: &SweepReport, u: &Units) -> Value {
    let certificates: Vec<Value> = s
        .certificates
        .iter()
        .map(|c| match c {
            Some(Overlay::Discrete(d)) => discrete_json(d, u),
            Some(Overlay::Gaussian(g)) => gaussian_json(g, u),
            None => Value::Null,
        })
        .collect();
    json!({
        "rows": s.report.rows,
        "certificates": certificates,
        "simulation_wall_time_s": s.report.wall_time_s,
    })
}

fn simulate(net: &Network, rates: &[RateMatrix], sim: &Simulation, u: &Units) -> Result<Value> {
    let s = phase_transition_sweep(net, rates, &sim.ns, sim.code, sim.trials, sim.seed, &sim.opt.config())?;
    if let Some(path) = &sim.csv {
        fs::write(path, s.report.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(sweep_json(&s, u))
}

fn load_net(inputs: &mut Inputs, path: &Path) -> Result<Network> {
    load_network(&inputs.read(path)?).with_context(|| format!("in {}", path.display()))
}

fn load_rate(inputs: &mut Inputs, path: &Path, net: &Network) -> Result<RateMatrix> {
    let r = load_rates(&inputs.read(path)?).with_context(|| format!("in {}", path.display()))?;
    if r.nodes() != net.node_count() {
        bail!(
            "{} has {} nodes but the network has {}",
            path.display(),
            r.nodes(),
            net.node_count()
        );
    }
    Ok(r)
}

fn run(cli: Cli) -> Result<(Report, u8)> {
    let start = Instant::now();
    let u = Units::new(cli.bits);
    let mut inputs = Inputs::default();
    let (result, code) = match &cli.command {
        Command::Bound { network, witness, cut } => {
            let net = load_net(&mut inputs, network)?;
            (bound(&net, witness, *cut, &mut inputs, &u)?, EXIT_INSIDE)
        }
        Command::Membership { network, rates, opt } => {
            let net = load_net(&mut inputs, network)?;
            let r = load_rate(&mut inputs, rates, &net)?;
            let v = region_margin(&net, &r, &opt.config());
            let code = match (v.inside, v.certified) {
                (true, _) => EXIT_INSIDE,
                (false, true) => EXIT_OUTSIDE,
                (false, false) => EXIT_UNCERTIFIED,
            };
            (verdict_json(&v, &u), code)
        }
        Command::Exponent {
            network,
            rates,
            n_samples,
            opt,
        } => {
            let net = load_net(&mut inputs, network)?;
            let r = load_rate(&mut inputs, rates, &net)?;
            exponent(&net, &r, n_samples, &opt.config(), &u)?
        }
        Command::Simulate { network, rates, sim } => {
            let net = load_net(&mut inputs, network)?;
            let r = load_rate(&mut inputs, rates, &net)?;
            (simulate(&net, &[r], sim, &u)?, EXIT_INSIDE)
        }
        Command::Sweep { network, rates, sim } => {
            let net = load_net(&mut inputs, network)?;
            let rs = rates
                .iter()
                .map(|p| load_rate(&mut inputs, p, &net))
                .collect::<Result<Vec<_>>>()?;
            (simulate(&net, &rs, sim, &u)?, EXIT_INSIDE)
        }
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        tool: "cutset",
        version: env!("CARGO_PKG_VERSION"),
        command: std::env::args().collect(),
        inputs: inputs.into_digests(),
        units: u.name,
        result,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((report, code))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    match run(cli) {
        Ok((report, code)) => {
            print!("{}", report.to_json());
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
