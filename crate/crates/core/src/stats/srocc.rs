use std::collections::BTreeSet;

use serde::Serialize;

use super::fixture::{FixtureTable, Metric, RowGroup, SubsetRule};
use crate::error::{Error, Result};

/// Published runtime correlations of params, FLOPs, activations, memory.
pub const PUBLISHED_SROCC: [f64; 4] = [0.1734, 0.2397, 0.8737, 0.6671];

/// How tied values share ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Tied values get the mean of the ranks they span (1.5, 1.5, 3).
    #[default]
    Average,
    /// Tied values all get the lowest rank they span (1, 1, 3).
    Competition,
}

/// 1-based ascending ranks.
pub fn ranks(values: &[f64], tie: TieRule) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = match tie {
            TieRule::Average => (i + j) as f64 / 2.0 + 1.0,
            TieRule::Competition => i as f64 + 1.0,
        };
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank-order correlation: Pearson correlation of average ranks.
pub fn srocc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Stats(format!(
            "srocc: lengths differ ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Stats("srocc: need at least two pairs".into()));
    }
    if let Some(v) = x.iter().chain(y).find(|v| !v.is_finite()) {
        return Err(Error::Stats(format!("srocc: non-finite value {v}")));
    }
    pearson(&ranks(x, TieRule::Average), &ranks(y, TieRule::Average))
        .ok_or_else(|| Error::Stats("srocc: undefined for a constant sequence".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedEntry {
    pub team: String,
    pub value: f64,
    pub rank: f64,
}

/// Ascending ranks (lower is better) of one metric over the ranked rows that
/// report it, in table order.
pub fn rank_metric(table: &FixtureTable, metric: Metric, tie: TieRule) -> Vec<RankedEntry> {
    let rows: Vec<(&str, f64)> = table
        .rows
        .iter()
        .filter(|r| r.ranked())
        .filter_map(|r| Some((r.team.as_str(), r.get(metric)?)))
        .collect();
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    rows.iter()
        .zip(ranks(&values, tie))
        .map(|(&(team, value), rank)| RankedEntry {
            team: team.to_string(),
            value,
            rank,
        })
        .collect()
}

/// Runtime correlations over one shared row subset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub subset: String,
    pub teams: Vec<String>,
    pub params: f64,
    pub flops: f64,
    pub activations: f64,
    pub memory: f64,
}

impl CorrelationTable {
    pub fn values(&self) -> [f64; 4] {
        [self.params, self.flops, self.activations, self.memory]
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        let i = Metric::PREDICTORS.iter().position(|&p| p == m)?;
        Some(self.values()[i])
    }

    /// Largest absolute deviation from `targets`.
    pub fn distance(&self, targets: &[f64; 4]) -> f64 {
        self.values()
            .iter()
            .zip(targets)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Correlations of the four predictors with runtime over the rows admitted
/// by `rule`; all four use the same rows.
pub fn correlations_for(table: &FixtureTable, rule: &SubsetRule) -> Result<CorrelationTable> {
    let rows: Vec<_> = table.rows.iter().filter(|r| rule.admits(r)).collect();
    let runtime: Vec<f64> = rows.iter().map(|r| r.runtime_s.expect("admitted")).collect();
    let mut out = [0.0; 4];
    for (o, m) in out.iter_mut().zip(Metric::PREDICTORS) {
        let xs: Vec<f64> = rows.iter().map(|r| r.get(m).expect("admitted")).collect();
        *o = srocc(&xs, &runtime).map_err(|e| Error::Stats(format!("{m} over `{rule}`: {e}")))?;
    }
    let mut teams: Vec<String> = rows.iter().map(|r| r.team.clone()).collect();
    teams.sort();
    Ok(CorrelationTable {
        subset: rule.to_string(),
        teams,
        params: out[0],
        flops: out[1],
        activations: out[2],
        memory: out[3],
    })
}

/// The correlation table over the subset pinned in the fixture.
pub fn runtime_correlations(table: &FixtureTable) -> Result<CorrelationTable> {
    correlations_for(table, &table.subset)
}

/// Every subset rule that includes the ranked rows, best match first.
pub fn search_subsets(table: &FixtureTable, targets: &[f64; 4]) -> Vec<(CorrelationTable, f64)> {
    let optional = [RowGroup::Unverified, RowGroup::BelowBaseline, RowGroup::Reference];
    let mut out = Vec::new();
    for mask in 0..(1u32 << optional.len()) {
        let mut groups = BTreeSet::from([RowGroup::Ranked]);
        for (bit, g) in optional.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                groups.insert(*g);
            }
        }
        if let Ok(t) = correlations_for(table, &SubsetRule { groups }) {
            let d = t.distance(targets);
            out.push((t, d));
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.subset.cmp(&b.0.subset)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook Spearman for tie-free data: 1 - 6 sum d^2 / (n (n^2 - 1)).
    fn rho_no_ties(x: &[f64], y: &[f64]) -> f64 {
        let rank = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .map(|a| v.iter().filter(|b| *b < a).count() as f64 + 1.0)
                .collect()
        };
        let (rx, ry) = (rank(x), rank(y));
        let n = x.len() as f64;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn monotone_sequences() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(srocc(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap(), 1.0);
        assert_eq!(srocc(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn errors() {
        assert!(srocc(&[1.0, 2.0], &[1.0]).is_err());
        assert!(srocc(&[1.0], &[1.0]).is_err());
        assert!(srocc(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])
            .unwrap_err()
            .to_string()
            .contains("constant"));
    }

    #[test]
    fn tie_rules() {
        let v = [0.037, 0.037, 0.060, 0.058];
        assert_eq!(ranks(&v, TieRule::Average), vec![1.5, 1.5, 4.0, 3.0]);
        assert_eq!(ranks(&v, TieRule::Competition), vec![1.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn published_rank_annotations() {
        let t = FixtureTable::bundled();
        let rank_of = |m, tie, team: &str| {
            rank_metric(&t, m, tie)
                .into_iter()
                .find(|e| e.team == team)
                .unwrap()
                .rank
        };
        assert_eq!(rank_of(Metric::Params, TieRule::Average, "XPixel"), 1.0);
        assert_eq!(rank_of(Metric::Runtime, TieRule::Competition, "NJU_MCG"), 1.0);
        assert_eq!(rank_of(Metric::Runtime, TieRule::Competition, "AiriA_CG"), 1.0);
        assert_eq!(rank_of(Metric::Runtime, TieRule::Average, "NJU_MCG"), 1.5);
        assert_eq!(rank_of(Metric::Flops, TieRule::Average, "SC-CVLAB"), 1.0);
        assert_eq!(rank_of(Metric::Flops, TieRule::Average, "NJU_MCG"), 2.0);
        assert_eq!(rank_of(Metric::Flops, TieRule::Average, "MLVC"), 3.0);
        assert_eq!(rank_of(Metric::Activations, TieRule::Average, "AiriA_CG"), 2.0);
        assert_eq!(rank_of(Metric::Memory, TieRule::Average, "MLVC"), 1.0);
        assert_eq!(rank_metric(&t, Metric::Runtime, TieRule::Average).len(), 16);
    }

    #[test]
    fn single_row_ranks_first() {
        let mut t = FixtureTable::bundled();
        t.rows.retain(|r| r.team == "XPixel");
        let r = rank_metric(&t, Metric::Params, TieRule::Average);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].rank, 1.0);
    }

    #[test]
    fn pinned_subset_reproduces_table() {
        let t = runtime_correlations(&FixtureTable::bundled()).unwrap();
        assert_eq!(t.teams.len(), 21);
        for (got, want) in t.values().iter().zip(PUBLISHED_SROCC) {
            assert!((got - want).abs() < 5e-5, "{got} vs {want}");
        }
    }

    #[test]
    fn search_puts_pinned_subset_first() {
        let table = FixtureTable::bundled();
        let found = search_subsets(&table, &PUBLISHED_SROCC);
        assert_eq!(found.len(), 8);
        // unverified rows never survive the complete-case filter, so rules
        // differing only in that group tie; compare the admitted rows instead
        let pinned = runtime_correlations(&table).unwrap();
        assert_eq!(found[0].0.teams, pinned.teams);
        assert_eq!(found[0].1, pinned.distance(&PUBLISHED_SROCC));
        assert!(found[0].1 < 5e-5);
        assert!(found.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut table = FixtureTable::bundled();
        let a = runtime_correlations(&table).unwrap();
        table.rows.reverse();
        table.rows.rotate_left(7);
        assert_eq!(runtime_correlations(&table).unwrap(), a);
    }

    proptest! {
        #[test]
        fn rank_sum_is_triangular(v in prop::collection::vec(0u8..8, 1..40)) {
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let n = v.len() as f64;
            let s: f64 = ranks(&v, TieRule::Average).iter().sum();
            prop_assert!((s - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn matches_closed_form_without_ties(perm in Just((0..12).collect::<Vec<u32>>()).prop_shuffle()) {
            let x: Vec<f64> = (0..12).map(f64::from).collect();
            let y: Vec<f64> = perm.into_iter().map(f64::from).collect();
            prop_assert!((srocc(&x, &y).unwrap() - rho_no_ties(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_increasing_maps(v in prop::collection::vec((0.01f64..100.0, 0.01f64..100.0), 3..30)) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(r) = srocc(&x, &y) {
                let lx: Vec<f64> = x.iter().map(|a| a.ln()).collect();
                let cy: Vec<f64> = y.iter().map(|a| a.powi(3) + 1.0).collect();
                prop_assert!((srocc(&lx, &cy).unwrap() - r).abs() < 1e-12);
                prop_assert!((srocc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
                let nx: Vec<f64> = x.iter().map(|a| -a).collect();
                prop_assert!((srocc(&x, &nx).unwrap() + 1.0).abs() < 1e-12);
            }
        }
    }
}
