//! Prints a capacity sweep for a built-in scenario.
//!
//! `cargo run --release --example sweep -- <scenario> <policy> <V> <slots> <lambda...>`

use mcsc::engine::{sweep_lambda, RunConfig};
use mcsc::policy::PolicyParams;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.len() < 5 {
        eprintln!("usage: sweep <scenario> <policy> <V> <slots> <lambda...>");
        std::process::exit(2);
    }
    let model = mcsc::build(&mcsc::scenarios::by_name(&args[0])?)?;
    let params = PolicyParams::new(args[1].parse()?, args[2].parse()?)?;
    let cfg = RunConfig::new(args[3].parse()?, 1);
    let grid = args[4..].iter().map(|s| s.parse()).collect::<Result<Vec<f64>, _>>()?;
    let sweep = sweep_lambda(&model, params, &grid, &cfg)?;
    for p in &sweep.points {
        println!(
            "{:>8} {:>8} growth={:.3} backlog={:.1} cost/s={:.3}",
            p.lambda_mbps,
            if p.stable { "stable" } else { "UNSTABLE" },
            p.growth,
            p.avg_backlog,
            p.avg_cost
        );
    }
    println!("boundary: {:?}", sweep.boundary_mbps);
    for w in &sweep.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
