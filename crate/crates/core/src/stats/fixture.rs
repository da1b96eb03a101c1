use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/challenge_results.csv");

/// Why a row is, or is not, part of the official ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowGroup {
    Ranked,
    /// Not ranked because the organizers could not verify the results.
    Unverified,
    /// Not ranked because the PSNR fell below the baseline.
    BelowBaseline,
    /// Reference models listed for comparison.
    Reference,
}

impl RowGroup {
    pub const ALL: [RowGroup; 4] = [
        RowGroup::Ranked,
        RowGroup::Unverified,
        RowGroup::BelowBaseline,
        RowGroup::Reference,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RowGroup::Ranked => "ranked",
            RowGroup::Unverified => "unverified",
            RowGroup::BelowBaseline => "below-baseline",
            RowGroup::Reference => "reference",
        }
    }
}

impl FromStr for RowGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RowGroup::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::Stats(format!("unknown row group `{s}`")))
    }
}

impl fmt::Display for RowGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One method's published record. Unverified (`*`) and missing entries are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub team: String,
    pub author: String,
    pub group: RowGroup,
    pub psnr_val: Option<f64>,
    pub psnr_test: Option<f64>,
    pub runtime_s: Option<f64>,
    pub params_m: Option<f64>,
    pub flops_g: Option<f64>,
    pub activations_m: Option<f64>,
    pub memory_m: Option<f64>,
    pub conv_count: Option<u32>,
}

impl MetricsRow {
    pub fn ranked(&self) -> bool {
        self.group == RowGroup::Ranked
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Runtime => self.runtime_s,
            Metric::Params => self.params_m,
            Metric::Flops => self.flops_g,
            Metric::Activations => self.activations_m,
            Metric::Memory => self.memory_m,
        }
    }
}

/// Efficiency columns that can be ranked or correlated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Runtime,
    Params,
    Flops,
    Activations,
    Memory,
}

impl Metric {
    /// The four columns correlated against runtime, in table order.
    pub const PREDICTORS: [Metric; 4] = [Metric::Params, Metric::Flops, Metric::Activations, Metric::Memory];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Runtime => "runtime",
            Metric::Params => "params",
            Metric::Flops => "flops",
            Metric::Activations => "activations",
            Metric::Memory => "memory",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Metric::Runtime,
            Metric::Params,
            Metric::Flops,
            Metric::Activations,
            Metric::Memory,
        ]
        .into_iter()
        .find(|m| m.as_str() == s)
        .ok_or_else(|| Error::Stats(format!("unknown metric `{s}`")))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which groups enter the runtime-correlation table. Rows are always taken
/// complete-case: runtime and all four predictors present.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetRule {
    pub groups: BTreeSet<RowGroup>,
}

impl SubsetRule {
    pub fn all() -> Self {
        SubsetRule {
            groups: RowGroup::ALL.into_iter().collect(),
        }
    }

    pub fn admits(&self, row: &MetricsRow) -> bool {
        self.groups.contains(&row.group)
            && row.runtime_s.is_some()
            && Metric::PREDICTORS.iter().all(|&m| row.get(m).is_some())
    }
}

impl fmt::Display for SubsetRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.groups.iter().map(|g| g.as_str()).collect();
        f.write_str(&parts.join("+"))
    }
}

impl FromStr for SubsetRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let groups = s
            .split('+')
            .map(|p| p.trim().parse())
            .collect::<Result<BTreeSet<_>>>()?;
        if groups.is_empty() {
            return Err(Error::Stats("empty subset rule".into()));
        }
        Ok(SubsetRule { groups })
    }
}

/// Transcribed results table plus its provenance comments.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureTable {
    pub rows: Vec<MetricsRow>,
    pub notes: Vec<String>,
    /// Row subset pinned for the runtime-correlation table.
    pub subset: SubsetRule,
}

fn cell(raw: &str) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() || raw.ends_with('*') {
        return Ok(None);
    }
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::Stats(format!("not a number: `{raw}`")))?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Stats(format!("value must be finite and >= 0, found `{raw}`")));
    }
    Ok(Some(v))
}

impl FixtureTable {
    /// The results table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_csv_str(BUNDLED).expect("bundled fixture parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&s)
    }

    /// Parses the fixture CSV: `#` lines are notes, and a
    /// `# correlation-subset: ...` note pins the correlation subset.
    pub fn from_csv_str(s: &str) -> Result<Self> {
        let notes: Vec<String> = s
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .map(|l| l.trim().to_string())
            .collect();
        let subset = match notes.iter().find_map(|n| n.strip_prefix("correlation-subset:")) {
            Some(rule) => rule.trim().parse()?,
            None => SubsetRule::all(),
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(s.as_bytes());
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Stats(format!("fixture is missing column `{name}`")))
        };
        let idx = [
            "team",
            "author",
            "group",
            "psnr_val",
            "psnr_test",
            "runtime_s",
            "params_m",
            "flops_g",
            "activations_m",
            "memory_m",
            "conv",
        ]
        .map(col);
        let idx: Vec<usize> = idx.into_iter().collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |i: usize| rec.get(idx[i]).unwrap_or("");
            let at = |e: Error| Error::Stats(format!("fixture row {} (`{}`): {e}", line + 1, get(0)));
            let num = |i: usize| cell(get(i)).map_err(at);
            let conv = num(10)?.map(|v| v as u32);
            let row = MetricsRow {
                team: get(0).to_string(),
                author: get(1).to_string(),
                group: get(2).parse().map_err(at)?,
                psnr_val: num(3)?,
                psnr_test: num(4)?,
                runtime_s: num(5)?,
                params_m: num(6)?,
                flops_g: num(7)?,
                activations_m: num(8)?,
                memory_m: num(9)?,
                conv_count: conv,
            };
            if row.ranked() && row.runtime_s.is_none() {
                return Err(Error::Stats(format!("ranked row `{}` has no runtime", row.team)));
            }
            rows.push(row);
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = rows.iter().find(|r| !seen.insert(r.team.as_str())) {
            return Err(Error::Stats(format!("duplicate team `{}`", dup.team)));
        }
        Ok(FixtureTable { rows, notes, subset })
    }

    pub fn row(&self, team: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.team == team)
    }
}
