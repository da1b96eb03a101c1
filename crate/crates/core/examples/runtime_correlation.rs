//! Ranks the published challenge entries by each efficiency metric and
//! reproduces the Spearman correlation of every metric with runtime.
//!
//!     cargo run --example runtime_correlation

use effsr::stats::{rank_metric, runtime_correlations, search_subsets, FixtureTable, Metric, TieRule, PUBLISHED_SROCC};

fn main() -> effsr::Result<()> {
    let table = FixtureTable::bundled();
    let t = runtime_correlations(&table)?;
    println!("SROCC with runtime over {} rows ({}):", t.teams.len(), t.subset);
    for (m, want) in Metric::PREDICTORS.into_iter().zip(PUBLISHED_SROCC) {
        println!("  {:<12} {:.4}  (published {want:.4})", m.as_str(), t.get(m).unwrap());
    }

    println!("\nfastest five by runtime (average ranks on ties):");
    let mut ranked = rank_metric(&table, Metric::Runtime, TieRule::Average);
    ranked.sort_by(|a, b| a.rank.total_cmp(&b.rank));
    for e in ranked.iter().take(5) {
        println!("  {:>4}  {:<14} {:.3}s", e.rank, e.team, e.value);
    }

    // which row subsets could have produced the published numbers?
    println!("\nclosest row subsets:");
    for (c, d) in search_subsets(&table, &PUBLISHED_SROCC).iter().take(4) {
        println!("  {:<45} n={:<3} max|d|={d:.4}", c.subset.to_string(), c.teams.len());
    }
    Ok(())
}
