//! Static efficiency metrics: parameters, FLOPs (as multiply-accumulates),
//! activations (conv output elements), conv layer count and a liveness-based
//! peak-memory estimate.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{Graph, NodeKind, PortRef, ShapeMap};
use crate::tensor::{numel, Dims};

/// Default element size for the memory estimate (`f32`).
pub const F32_BYTES: usize = 4;

/// Challenge-style static metrics of one graph at one input size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub model: String,
    pub input_size: Dims,
    pub params: u64,
    pub flops: u64,
    pub activations: u64,
    pub peak_memory_bytes: u64,
    pub conv_layers: usize,
}

impl EfficiencyReport {
    pub fn params_m(&self) -> f64 {
        self.params as f64 / 1e6
    }

    pub fn flops_g(&self) -> f64 {
        self.flops as f64 / 1e9
    }

    pub fn activations_m(&self) -> f64 {
        self.activations as f64 / 1e6
    }

    pub fn memory_mb(&self) -> f64 {
        self.peak_memory_bytes as f64 / (1024.0 * 1024.0)
    }
}

/// Sum over unique parameter blobs; a blob shared by several convs counts once.
pub fn count_params(graph: &Graph) -> u64 {
    graph.params().values().map(|b| b.num_params() as u64).sum()
}

pub fn count_conv_layers(graph: &Graph) -> usize {
    graph.nodes().filter(|n| n.kind.is_conv()).count()
}

/// Multiply-accumulates of every conv at `input`; other nodes contribute 0.
pub fn count_flops(graph: &Graph, input: Dims) -> Result<u64> {
    let shapes = graph.infer_shapes(input)?;
    Ok(flops_from_shapes(graph, &shapes))
}

/// Elements of every conv output at `input`.
pub fn count_activations(graph: &Graph, input: Dims) -> Result<u64> {
    let shapes = graph.infer_shapes(input)?;
    Ok(activations_from_shapes(graph, &shapes))
}

fn flops_from_shapes(graph: &Graph, shapes: &ShapeMap) -> u64 {
    graph
        .nodes()
        .filter_map(|n| {
            let p = graph.conv_params(&n.id)?;
            let [b, co, ho, wo] = shapes[&n.id][0];
            let (kh, kw) = p.kernel_size();
            let per_pos = (p.in_channels() / p.groups * kh * kw * co) as u64;
            Some(per_pos * (b * ho * wo) as u64)
        })
        .sum()
}

fn activations_from_shapes(graph: &Graph, shapes: &ShapeMap) -> u64 {
    graph
        .nodes()
        .filter(|n| n.kind.is_conv())
        .map(|n| numel(shapes[&n.id][0]) as u64)
        .sum()
}

/// Peak bytes of a reference-counted execution in canonical order plus all
/// parameter bytes.
///
/// Each step allocates the node's outputs while its inputs are still live,
/// then releases inputs whose last reader has run. The input tensor is
/// allocated by the input node; the output node aliases its argument.
pub fn estimate_peak_memory(graph: &Graph, input: Dims, bytes_per_element: usize) -> Result<u64> {
    let shapes = graph.infer_shapes(input)?;
    Ok(peak_from_shapes(graph, &shapes, bytes_per_element))
}

fn peak_from_shapes(graph: &Graph, shapes: &ShapeMap, bpe: usize) -> u64 {
    let mut pending: HashMap<PortRef, usize> = HashMap::new();
    for n in graph.nodes() {
        for e in &n.inputs {
            *pending.entry(e.clone()).or_default() += 1;
        }
    }
    let bytes = |d: Dims| (numel(d) * bpe) as u64;
    let mut live = 0u64;
    let mut peak = 0u64;
    for id in graph.topo_order() {
        let n = graph.node(id).expect("order names graph nodes");
        if let NodeKind::Output = n.kind {
            continue;
        }
        for (port, &d) in shapes[id].iter().enumerate() {
            if pending.get(&PortRef::with_port(id.clone(), port)).copied().unwrap_or(0) > 0 {
                live += bytes(d);
            }
        }
        peak = peak.max(live);
        for e in &n.inputs {
            let left = pending.get_mut(e).expect("edge was counted");
            *left -= 1;
            if *left == 0 {
                live -= bytes(shapes[&e.node][e.port]);
            }
        }
    }
    peak + count_params(graph) * bpe as u64
}

/// All metrics at once, sharing one shape inference.
pub fn analyze(graph: &Graph, input: Dims) -> Result<EfficiencyReport> {
    let shapes = graph.infer_shapes(input)?;
    Ok(EfficiencyReport {
        model: graph.name().to_string(),
        input_size: input,
        params: count_params(graph),
        flops: flops_from_shapes(graph, &shapes),
        activations: activations_from_shapes(graph, &shapes),
        peak_memory_bytes: peak_from_shapes(graph, &shapes, F32_BYTES),
        conv_layers: count_conv_layers(graph),
    })
}

/// Output format for [`format_reports`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
    Markdown,
}

const COLUMNS: [&str; 7] = [
    "model",
    "input",
    "params",
    "flops_g",
    "activations_m",
    "memory_mb",
    "conv_layers",
];

fn row(r: &EfficiencyReport) -> [String; 7] {
    let [_, _, h, w] = r.input_size;
    [
        r.model.clone(),
        format!("{h}x{w}"),
        r.params.to_string(),
        format!("{:.2}", r.flops_g()),
        format!("{:.2}", r.activations_m()),
        format!("{:.2}", r.memory_mb()),
        r.conv_layers.to_string(),
    ]
}

/// Renders reports in Table-1 column order (params, FLOPs, activations,
/// memory, convs).
pub fn format_reports(reports: &[EfficiencyReport], format: ReportFormat) -> Result<String> {
    let mut s = String::new();
    match format {
        ReportFormat::Text => {
            for r in reports {
                let [_, _, h, w] = r.input_size;
                let _ = writeln!(s, "{} @ {h}x{w}", r.model);
                let _ = writeln!(s, "  params       {} ({:.3}M)", r.params, r.params_m());
                let _ = writeln!(s, "  flops        {} ({:.2}G)", r.flops, r.flops_g());
                let _ = writeln!(s, "  activations  {} ({:.2}M)", r.activations, r.activations_m());
                let _ = writeln!(
                    s,
                    "  memory       {} bytes ({:.2}MB)",
                    r.peak_memory_bytes,
                    r.memory_mb()
                );
                let _ = writeln!(s, "  conv layers  {}", r.conv_layers);
            }
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS)?;
            for r in reports {
                w.write_record(row(r))?;
            }
            let bytes = w.into_inner().map_err(|e| crate::Error::Stats(e.to_string()))?;
            s = String::from_utf8(bytes).expect("csv of utf-8 fields");
        }
        ReportFormat::Json => {
            s = serde_json::to_string_pretty(reports)?;
            s.push('\n');
        }
        ReportFormat::Markdown => {
            let _ = writeln!(s, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(s, "|{}", "---|".repeat(COLUMNS.len()));
            for r in reports {
                let _ = writeln!(s, "| {} |", row(r).join(" | "));
            }
        }
    }
    Ok(s)
}
