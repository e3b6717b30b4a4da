//! Latency under concurrency: the reference table, and a Poisson load run
//! with and without provisioned concurrency.

use planoforge::edgesim::{run_load, table2, LatencyModel, LoadScenario};

fn main() -> anyhow::Result<()> {
    let model = LatencyModel::default();
    println!("{:>19} | {:>18} | {:>16}", "Concurrent Requests", "Response Time (ms)", "Latency Increase");
    for row in table2(&model) {
        println!("{row}");
    }

    let scenario = LoadScenario::poisson(20.0, 60_000.0, 1, 42)?;
    for provisioned in [0, 5, 20] {
        let stats = run_load(
            &scenario,
            &LatencyModel {
                provisioned_concurrency: provisioned,
                ..model.clone()
            },
        )?;
        println!(
            "provisioned {provisioned:>2}: {} requests, p50 {:.0} ms, p95 {:.0} ms, p99 {:.0} ms, {} cold starts",
            stats.requests, stats.p50_ms, stats.p95_ms, stats.p99_ms, stats.cold_starts
        );
    }
    Ok(())
}
