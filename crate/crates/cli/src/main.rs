//! `fairpool` — plan shareable rides, split fares fairly, and compare stable
//! matching outcomes against the exact social optimum.
//!
//! Exit codes: 0 success, 1 input error, 2 internal invariant violation or
//! failed verification.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use fairpool_core::harness::{
    generate_workload, ingest_trips, load_network_trips, load_road_network, run_experiment,
    write_distribution_csvs, write_records, BoundingBox, ExperimentConfig, Instance, RowRejection,
};
use fairpool_core::matching::{detect_cycles, find_blocking_pair, stable_match, MatchOutcome};
use fairpool_core::mechanism::{build_preferences, payments, Mechanism};
use fairpool_core::optimum::{brute_force_optimum, reduction_identity_gap, social_optimum};
use fairpool_core::plan::build_matching_graph;
use fairpool_core::road::Landscape;
use fairpool_core::{Error, EPS};

#[derive(Parser)]
#[command(name = "fairpool", version, about = "Ride-pooling with fair cost sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a reproducible synthetic trip CSV.
    Gen(GenArgs),
    /// Stable matching under one mechanism, with payments and metrics.
    Match(MatchArgs),
    /// Exact minimum-cost assignment for the instance.
    Optimum(InstanceArgs),
    /// All configured mechanisms: stable matching, metrics, and the optimum.
    Experiment(ExperimentArgs),
    /// Stability, oracle, and invariant checks; fails on any violation.
    Verify(InstanceArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of trips to generate.
    #[arg(long)]
    count: usize,
    /// RNG seed (same seed, same bytes).
    #[arg(long)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Region as min_lon,min_lat,max_lon,max_lat.
    #[arg(long, value_parser = parse_region)]
    region: Option<BoundingBox>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Candidate pairs must have earliest departures within this window.
    #[arg(long)]
    pairing_window_s: Option<f64>,
    /// Flag-fall applied to each traversed leg (geometric mode).
    #[arg(long)]
    fare_base: Option<f64>,
    #[arg(long)]
    fare_per_km: Option<f64>,
    #[arg(long)]
    mean_speed_kmh: Option<f64>,
    /// Latest arrival = pickup + direct time * detour_factor + slack.
    #[arg(long)]
    detour_factor: Option<f64>,
    #[arg(long)]
    slack_minutes: Option<f64>,
    /// Largest instance the exhaustive oracle cross-checks (max 12).
    #[arg(long)]
    max_oracle_n: Option<usize>,
    /// Mechanisms to run, comma-separated subset of eq,ega,pp,sb.
    #[arg(long, value_delimiter = ',')]
    mechanisms: Option<Vec<String>>,
    /// Seed echoed into reports for reproducibility bookkeeping.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn to_config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::default();
        if let Some(v) = self.pairing_window_s {
            cfg.pairing_window_s = v;
        }
        if let Some(v) = self.fare_base {
            cfg.fare_base = v;
        }
        if let Some(v) = self.fare_per_km {
            cfg.fare_per_km = v;
        }
        if let Some(v) = self.mean_speed_kmh {
            cfg.mean_speed_kmh = v;
        }
        if let Some(v) = self.detour_factor {
            cfg.detour_factor = v;
        }
        if let Some(v) = self.slack_minutes {
            cfg.slack_minutes = v;
        }
        if let Some(v) = self.max_oracle_n {
            cfg.max_instance_size_for_oracle = v;
        }
        if let Some(v) = self.seed {
            cfg.rng_seed = v;
        }
        if let Some(names) = &self.mechanisms {
            cfg.mechanisms = names
                .iter()
                .map(|n| Mechanism::from_str(n))
                .collect::<Result<Vec<_>, _>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct InstanceArgs {
    /// Trip CSV: GPS records, or junction trips when --network is given.
    #[arg(long)]
    trips: PathBuf,
    /// Road-network edge list; omit to use the geometric fallback.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct MatchArgs {
    /// One of eq, ega, pp, sb.
    #[arg(long)]
    mechanism: String,
    #[command(flatten)]
    instance: InstanceArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Also write per-distribution CSVs into this directory.
    #[arg(long)]
    dist_dir: Option<PathBuf>,
}

fn parse_region(s: &str) -> Result<BoundingBox, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected min_lon,min_lat,max_lon,max_lat".to_string());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let region =
        BoundingBox { min_lon: nums[0], min_lat: nums[1], max_lon: nums[2], max_lat: nums[3] };
    region.validate().map_err(|e| e.to_string())?;
    Ok(region)
}

fn load_instance(
    args: &InstanceArgs,
    config: &ExperimentConfig,
) -> Result<(Instance, Vec<RowRejection>), Error> {
    match &args.network {
        Some(net_path) => {
            let network = load_road_network(net_path)?;
            let trips = load_network_trips(&args.trips)?;
            Ok((Instance { landscape: Landscape::Network(network), trips }, Vec::new()))
        }
        None => {
            let ingest = ingest_trips(&args.trips, config)?;
            Ok((ingest.instance, ingest.rejections))
        }
    }
}

fn emit(out: &Option<PathBuf>, body: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Error::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn report_rejections(rejections: &[RowRejection]) {
    for r in rejections {
        eprintln!(
            "rejected line {}{}: {}",
            r.line,
            r.record_id.as_deref().map(|id| format!(" ({id})")).unwrap_or_default(),
            r.reason
        );
    }
}

fn cmd_gen(args: &GenArgs) -> Result<(), Error> {
    let region = args.region.unwrap_or_else(BoundingBox::default_region);
    let records = generate_workload(args.count, &region, args.seed)?;
    write_records(&records, &args.out)?;
    eprintln!("wrote {} trips to {}", records.len(), args.out.display());
    Ok(())
}

fn cmd_match(args: &MatchArgs) -> Result<(), Error> {
    let mechanism = Mechanism::from_str(&args.mechanism)?;
    let mut config = args.instance.config.to_config()?;
    config.mechanisms = vec![mechanism];
    let (instance, rejections) = load_instance(&args.instance, &config)?;
    report_rejections(&rejections);
    let report = run_experiment(&instance, &config)?;
    emit(&args.instance.out, &report.to_json())
}

fn cmd_optimum(args: &InstanceArgs) -> Result<(), Error> {
    let config = args.config.to_config()?;
    let (instance, rejections) = load_instance(args, &config)?;
    report_rejections(&rejections);
    let build = build_matching_graph(&instance.landscape, &instance.trips, config.pairing_window_s)?;
    report_graph_rejections(&build.rejections);
    let optimum = social_optimum(&build.graph)?;
    let body = serde_json::json!({
        "assignment": optimum,
        "total_standalone_cost": build.graph.total_standalone_cost(),
        "savings": build.graph.total_standalone_cost() - optimum.social_cost,
        "commuters": build.graph.len(),
        "pair_edges": build.graph.edge_count(),
    });
    emit(&args.out, &serde_json::to_string_pretty(&body).expect("serializable"))
}

fn report_graph_rejections(rejections: &[fairpool_core::plan::TripRejection]) {
    for r in rejections {
        eprintln!("rejected trip {}: {}", r.commuter_id, r.reason);
    }
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<(), Error> {
    let config = args.instance.config.to_config()?;
    let (instance, rejections) = load_instance(&args.instance, &config)?;
    report_rejections(&rejections);
    let report = run_experiment(&instance, &config)?;
    if let Some(dir) = &args.dist_dir {
        write_distribution_csvs(&report, dir)?;
    }
    emit(&args.instance.out, &report.to_json())
}

fn cmd_verify(args: &InstanceArgs) -> Result<(), Error> {
    let config = args.config.to_config()?;
    let (instance, rejections) = load_instance(args, &config)?;
    report_rejections(&rejections);
    let build = build_matching_graph(&instance.landscape, &instance.trips, config.pairing_window_s)?;
    report_graph_rejections(&build.rejections);
    let g = build.graph;
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, detail: String| {
        if ok {
            println!("PASS {name}{}", if detail.is_empty() { String::new() } else { format!(" — {detail}") });
        } else {
            println!("FAIL {name} — {detail}");
            failures += 1;
        }
    };

    // Pair costs dominate standalone costs.
    let mut floor_ok = true;
    let mut floor_detail = String::new();
    for ((i, j), edge) in g.edges() {
        let floor = g.self_cost(i).unwrap_or(0.0).max(g.self_cost(j).unwrap_or(0.0));
        if edge.plan.total_cost < floor - EPS {
            floor_ok = false;
            floor_detail = format!("({i}, {j}) costs {} under floor {floor}", edge.plan.total_cost);
            break;
        }
    }
    check("pair-cost floor", floor_ok, floor_detail);

    // Budget balance across all mechanisms and edges.
    let mut balance_ok = true;
    let mut balance_detail = String::new();
    'outer: for mech in Mechanism::ALL {
        for ((i, j), edge) in g.edges() {
            let p = payments(mech, &edge.plan, g.self_cost(i).unwrap(), g.self_cost(j).unwrap())?;
            if (p.payment_a + p.payment_b - edge.plan.total_cost).abs() > EPS {
                balance_ok = false;
                balance_detail = format!("{mech} on ({i}, {j})");
                break 'outer;
            }
        }
    }
    check("budget balance", balance_ok, balance_detail);

    let optimum = social_optimum(&g)?;
    check(
        "reduction identity",
        reduction_identity_gap(&optimum, &g) <= EPS * (1.0 + optimum.social_cost.abs()),
        format!("gap {}", reduction_identity_gap(&optimum, &g)),
    );

    if g.len() <= config.max_instance_size_for_oracle {
        let oracle = brute_force_optimum(&g)?;
        check(
            "oracle equivalence",
            (oracle.social_cost - optimum.social_cost).abs() <= EPS,
            format!("solver {} oracle {}", optimum.social_cost, oracle.social_cost),
        );
    } else {
        println!("SKIP oracle equivalence — instance larger than {}", config.max_instance_size_for_oracle);
    }

    for mech in config.mechanism_sequence() {
        let prefs = build_preferences(mech, &g)?;
        match stable_match(&prefs, &g)? {
            MatchOutcome::Stable { assignment, .. } => {
                let blocked = find_blocking_pair(&assignment, mech, &g)?;
                check(
                    &format!("stability under {mech}"),
                    blocked.is_none(),
                    blocked
                        .map(|(x, y)| format!("blocked by ({x}, {y})"))
                        .unwrap_or_else(|| format!("cost {}", assignment.social_cost)),
                );
                if mech != Mechanism::SegmentBased {
                    let cycles = detect_cycles(&prefs);
                    check(
                        &format!("acyclic preferences under {mech}"),
                        cycles.is_empty(),
                        format!("{} cycles", cycles.len()),
                    );
                }
            }
            MatchOutcome::Cyclic { cycle, blocking_pair, .. } => {
                let confirmed = detect_cycles(&prefs).contains(&cycle);
                check(
                    &format!("cyclic failure evidence under {mech}"),
                    confirmed,
                    format!("cycle {cycle:?} blocking ({}, {})", blocking_pair.0, blocking_pair.1),
                );
            }
        }
    }

    if failures > 0 {
        Err(Error::internal(format!("{failures} verification check(s) failed")))
    } else {
        Ok(())
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Match(args) => cmd_match(args),
        Command::Optimum(args) => cmd_optimum(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Verify(args) => cmd_verify(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_parser_accepts_and_rejects() {
        assert!(parse_region("-74.03,40.69,-73.92,40.82").is_ok());
        assert!(parse_region("1,2,3").is_err());
        assert!(parse_region("3,2,1,2.5").is_err());
    }
}
