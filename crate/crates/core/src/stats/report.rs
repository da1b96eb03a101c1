use std::fmt::Write as _;

use serde::Serialize;

use super::fixture::FixtureTable;
use crate::analysis::{EfficiencyReport, ReportFormat};
use crate::error::{Error, Result};

/// One line of the combined table: a published row or a computed model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub name: String,
    pub source: String,
    pub psnr_val: Option<f64>,
    pub psnr_test: Option<f64>,
    pub runtime_s: Option<f64>,
    pub params_m: Option<f64>,
    pub flops_g: Option<f64>,
    pub activations_m: Option<f64>,
    pub memory_m: Option<f64>,
    pub conv: Option<f64>,
}

/// Column names and print precision, in results-table order.
const COLUMNS: [(&str, usize); 10] = [
    ("name", 0),
    ("source", 0),
    ("psnr_val", 2),
    ("psnr_test", 2),
    ("runtime_s", 3),
    ("params_m", 3),
    ("flops_g", 2),
    ("activations_m", 2),
    ("memory_m", 0),
    ("conv", 0),
];

const ABSENT: &str = "-";

impl ReportRow {
    fn numbers(&self) -> [Option<f64>; 8] {
        [
            self.psnr_val,
            self.psnr_test,
            self.runtime_s,
            self.params_m,
            self.flops_g,
            self.activations_m,
            self.memory_m,
            self.conv,
        ]
    }

    fn cells(&self) -> Vec<String> {
        let mut out = vec![self.name.clone(), self.source.clone()];
        for (v, (_, prec)) in self.numbers().iter().zip(&COLUMNS[2..]) {
            out.push(match v {
                Some(v) => format!("{v:.prec$}"),
                None => ABSENT.to_string(),
            });
        }
        out
    }
}

/// Fixture rows first (table order), then computed models (given order).
pub fn report_rows(reports: &[EfficiencyReport], fixture: &FixtureTable) -> Vec<ReportRow> {
    let mut rows: Vec<ReportRow> = fixture
        .rows
        .iter()
        .map(|r| ReportRow {
            name: r.team.clone(),
            source: format!("published:{}", r.group),
            psnr_val: r.psnr_val,
            psnr_test: r.psnr_test,
            runtime_s: r.runtime_s,
            params_m: r.params_m,
            flops_g: r.flops_g,
            activations_m: r.activations_m,
            memory_m: r.memory_m,
            conv: r.conv_count.map(f64::from),
        })
        .collect();
    rows.extend(reports.iter().map(|r| {
        let [_, _, h, w] = r.input_size;
        ReportRow {
            name: r.model.clone(),
            source: format!("computed:{h}x{w}"),
            psnr_val: None,
            psnr_test: None,
            runtime_s: None,
            params_m: Some(r.params_m()),
            flops_g: Some(r.flops_g()),
            activations_m: Some(r.activations_m()),
            memory_m: Some(r.memory_mb()),
            conv: Some(r.conv_layers as f64),
        }
    }));
    rows
}

/// Results-table-shaped output; identical inputs give identical bytes.
/// Computed memory is the analytic liveness estimate in MiB, not a measured
/// GPU figure.
pub fn emit_report(reports: &[EfficiencyReport], fixture: &FixtureTable, format: ReportFormat) -> Result<String> {
    let rows = report_rows(reports, fixture);
    let header: Vec<&str> = COLUMNS.iter().map(|c| c.0).collect();
    let mut s = String::new();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&header)?;
            for r in &rows {
                w.write_record(r.cells())?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Stats(e.to_string()))?;
            s = String::from_utf8(bytes).expect("utf-8 fields");
        }
        ReportFormat::Json => {
            s = serde_json::to_string_pretty(&rows)?;
            s.push('\n');
        }
        ReportFormat::Markdown => {
            let _ = writeln!(s, "| {} |", header.join(" | "));
            let _ = writeln!(s, "|{}", "---|".repeat(header.len()));
            for r in &rows {
                let _ = writeln!(s, "| {} |", r.cells().join(" | "));
            }
        }
        ReportFormat::Text => {
            let cells: Vec<Vec<String>> = std::iter::once(header.iter().map(|h| h.to_string()).collect())
                .chain(rows.iter().map(ReportRow::cells))
                .collect();
            let widths: Vec<usize> = (0..header.len())
                .map(|i| cells.iter().map(|r| r[i].len()).max().unwrap_or(0))
                .collect();
            for r in &cells {
                let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
                let _ = writeln!(s, "{}", line.join("  ").trim_end());
            }
        }
    }
    Ok(s)
}

/// Parses the CSV produced by [`emit_report`].
pub fn parse_report_csv(s: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(s.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().map(String::as_str).ne(COLUMNS.iter().map(|c| c.0)) {
        return Err(Error::Stats(format!("unexpected report header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut nums = [None; 8];
        for (i, n) in nums.iter_mut().enumerate() {
            let raw = &rec[i + 2];
            *n = if raw == ABSENT {
                None
            } else {
                Some(
                    raw.parse()
                        .map_err(|_| Error::Stats(format!("bad number `{raw}` in report")))?,
                )
            };
        }
        rows.push(ReportRow {
            name: rec[0].to_string(),
            source: rec[1].to_string(),
            psnr_val: nums[0],
            psnr_test: nums[1],
            runtime_s: nums[2],
            params_m: nums[3],
            flops_g: nums[4],
            activations_m: nums[5],
            memory_m: nums[6],
            conv: nums[7],
        });
    }
    Ok(rows)
}

/// Re-emits parsed rows as CSV.
pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS.iter().map(|c| c.0))?;
    for r in rows {
        w.write_record(r.cells())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Stats(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 fields"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::analyze;
    use crate::zoo;

    fn zoo_reports() -> Vec<EfficiencyReport> {
        ["rfdn", "pan"]
            .iter()
            .map(|m| analyze(&zoo::build_default(m).unwrap(), [1, 3, 256, 256]).unwrap())
            .collect()
    }

    #[test]
    fn empty_model_list_is_fixture_only() {
        let f = FixtureTable::bundled();
        let s = emit_report(&[], &f, ReportFormat::Csv).unwrap();
        assert_eq!(s.lines().count(), 1 + f.rows.len());
        assert!(
            s.starts_with("name,source,psnr_val,psnr_test,runtime_s,params_m,flops_g,activations_m,memory_m,conv\n")
        );
        assert!(s.contains("\nLMSR,published:unverified,29.00,28.71,-,-,-,-,-,-\n"));
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let f = FixtureTable::bundled();
        let s = emit_report(&zoo_reports(), &f, ReportFormat::Csv).unwrap();
        let rows = parse_report_csv(&s).unwrap();
        assert_eq!(rows_to_csv(&rows).unwrap(), s);
        assert!(s.contains("\nrfdn,computed:256x256,-,-,-,0.433,27.03,112.03,"));
    }

    #[test]
    fn byte_stable_across_calls() {
        let f = FixtureTable::bundled();
        for fmt in [
            ReportFormat::Csv,
            ReportFormat::Json,
            ReportFormat::Markdown,
            ReportFormat::Text,
        ] {
            let a = emit_report(&zoo_reports(), &f, fmt).unwrap();
            let b = emit_report(&zoo_reports(), &f, fmt).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn markdown_column_order() {
        let s = emit_report(&[], &FixtureTable::bundled(), ReportFormat::Markdown).unwrap();
        let head = s.lines().next().unwrap();
        let pos = |c: &str| head.find(c).unwrap();
        assert!(pos("psnr_val") < pos("runtime_s"));
        assert!(pos("runtime_s") < pos("params_m"));
        assert!(pos("params_m") < pos("flops_g"));
        assert!(pos("flops_g") < pos("activations_m"));
        assert!(pos("activations_m") < pos("memory_m"));
        assert!(pos("memory_m") < pos("conv"));
    }

    #[test]
    fn json_parses() {
        let s = emit_report(&zoo_reports(), &FixtureTable::bundled(), ReportFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 29);
    }
}
