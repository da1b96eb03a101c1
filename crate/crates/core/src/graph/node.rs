use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tensor::{PoolStat, ResampleMode};

/// Reference to one output of a node. Serialised as `"node"` for port 0 and
/// `"node:port"` otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub node: String,
    pub port: usize,
}

impl PortRef {
    pub fn new(node: impl Into<String>) -> Self {
        PortRef {
            node: node.into(),
            port: 0,
        }
    }

    pub fn with_port(node: impl Into<String>, port: usize) -> Self {
        PortRef {
            node: node.into(),
            port,
        }
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.port == 0 {
            write!(f, "{}", self.node)
        } else {
            write!(f, "{}:{}", self.node, self.port)
        }
    }
}

impl FromStr for PortRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once(':') {
            Some((node, port)) => {
                let port = port
                    .parse()
                    .map_err(|_| Error::Spec(format!("bad port in edge `{s}`")))?;
                Ok(PortRef::with_port(node, port))
            }
            None => Ok(PortRef::new(s)),
        }
    }
}

impl Serialize for PortRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PortRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Output size rule for [`NodeKind::Interpolate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpSize {
    /// Integer upscaling factor.
    Scale(usize),
    /// Match the spatial size of the second input.
    LikeInput,
}

/// Operator vocabulary of the graph IR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum NodeKind {
    Input { channels: usize },
    Output,
    Conv2d { param: String },
    LeakyRelu { slope: f64 },
    Relu,
    Prelu { param: String },
    Sigmoid,
    PixelShuffle { factor: usize },
    Interpolate { mode: ResampleMode, size: InterpSize },
    Concat,
    Split { sizes: Vec<usize> },
    Add,
    Mul,
    AvgPool { kernel: usize, stride: usize },
    MaxPool { kernel: usize, stride: usize },
    GlobalPool { stat: PoolStat },
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Input { .. } => "input",
            NodeKind::Output => "output",
            NodeKind::Conv2d { .. } => "conv2d",
            NodeKind::LeakyRelu { .. } => "leaky_relu",
            NodeKind::Relu => "relu",
            NodeKind::Prelu { .. } => "prelu",
            NodeKind::Sigmoid => "sigmoid",
            NodeKind::PixelShuffle { .. } => "pixel_shuffle",
            NodeKind::Interpolate { .. } => "interpolate",
            NodeKind::Concat => "concat",
            NodeKind::Split { .. } => "split",
            NodeKind::Add => "add",
            NodeKind::Mul => "mul",
            NodeKind::AvgPool { .. } => "avg_pool",
            NodeKind::MaxPool { .. } => "max_pool",
            NodeKind::GlobalPool { .. } => "global_pool",
        }
    }

    /// Number of output ports.
    pub fn num_outputs(&self) -> usize {
        match self {
            NodeKind::Output => 0,
            NodeKind::Split { sizes } => sizes.len(),
            _ => 1,
        }
    }

    /// Allowed input count as `(min, max)`.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            NodeKind::Input { .. } => (0, 0),
            NodeKind::Concat | NodeKind::Add => (1, usize::MAX),
            NodeKind::Mul => (2, 2),
            NodeKind::Interpolate {
                size: InterpSize::LikeInput,
                ..
            } => (2, 2),
            _ => (1, 1),
        }
    }

    /// Checks attribute records (positive factors, non-empty splits, ...).
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Graph(format!("{}: {msg}", self.name())));
        match self {
            NodeKind::PixelShuffle { factor } if *factor == 0 => bad("factor must be >= 1"),
            NodeKind::Interpolate {
                size: InterpSize::Scale(0),
                ..
            } => bad("scale must be >= 1"),
            NodeKind::Split { sizes } if sizes.is_empty() || sizes.contains(&0) => bad("split sizes must all be >= 1"),
            NodeKind::AvgPool { kernel, stride } | NodeKind::MaxPool { kernel, stride }
                if *kernel == 0 || *stride == 0 =>
            {
                bad("kernel and stride must be >= 1")
            }
            NodeKind::LeakyRelu { slope } if !slope.is_finite() => bad("slope must be finite"),
            _ => Ok(()),
        }
    }

    /// Parameter blob referenced by this node, if any.
    pub fn param(&self) -> Option<&str> {
        match self {
            NodeKind::Conv2d { param } | NodeKind::Prelu { param } => Some(param),
            _ => None,
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, NodeKind::Conv2d { .. })
    }
}

/// A node and its input edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    #[serde(flatten)]
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<PortRef>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_ref_text_form() {
        assert_eq!("a.b".parse::<PortRef>().unwrap(), PortRef::new("a.b"));
        assert_eq!("s:2".parse::<PortRef>().unwrap(), PortRef::with_port("s", 2));
        assert_eq!(PortRef::with_port("s", 1).to_string(), "s:1");
        assert!("s:x".parse::<PortRef>().is_err());
    }

    #[test]
    fn attributes_validate() {
        assert!(NodeKind::Split { sizes: vec![16, 0] }.validate().is_err());
        assert!(NodeKind::Split { sizes: vec![] }.validate().is_err());
        assert!(NodeKind::PixelShuffle { factor: 0 }.validate().is_err());
        assert!(NodeKind::Split { sizes: vec![16, 48] }.validate().is_ok());
    }

    #[test]
    fn node_json_shape() {
        let n = Node {
            id: "up".into(),
            kind: NodeKind::Interpolate {
                mode: ResampleMode::Nearest,
                size: InterpSize::Scale(2),
            },
            inputs: vec![PortRef::with_port("split", 1)],
        };
        let s = serde_json::to_string(&n).unwrap();
        assert_eq!(
            s,
            r#"{"id":"up","op":"interpolate","mode":"nearest","size":{"scale":2},"inputs":["split:1"]}"#
        );
        let back: Node = serde_json::from_str(&s).unwrap();
        assert_eq!(back, n);
    }
}
