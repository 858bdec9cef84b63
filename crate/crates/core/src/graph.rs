//! Signed edge-list export of fitted structures.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::admm::JointModel;
use crate::error::{Error, Result};

/// Which part of a model to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelector {
    Common,
    /// Class-specific layer, 1-based class index.
    Specific(usize),
    /// Full `Θ_com + S^(c)` for one class, 1-based.
    Class(usize),
    /// Common layer plus every specific layer.
    All,
}

impl FromStr for LayerSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let class = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| Error::InvalidArgument(format!("bad class index in layer selector {s:?}")))
        };
        match s {
            "common" => Ok(Self::Common),
            "all" => Ok(Self::All),
            _ => match s.split_once(':') {
                Some(("specific", c)) => Ok(Self::Specific(class(c)?)),
                Some(("class", c)) => Ok(Self::Class(class(c)?)),
                _ => Err(Error::InvalidArgument(format!(
                    "unknown layer selector {s:?} (expected common, specific:<c>, class:<c> or all)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub value: f64,
    /// `+` for positive θ, `-` for negative.
    pub sign: String,
    /// Positive precision entries mark mutually exclusive nodes, negative
    /// ones synergistic (co-occurring) nodes.
    pub relation: String,
    pub layer: String,
}

fn push_layer(out: &mut Vec<Edge>, m: &nalgebra::DMatrix<f64>, layer: &str, edge_tol: f64) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let v = m[(i, j)];
            if v.abs() > edge_tol {
                let (sign, relation) = if v > 0.0 { ("+", "exclusive") } else { ("-", "synergistic") };
                out.push(Edge {
                    i,
                    j,
                    value: v,
                    sign: sign.into(),
                    relation: relation.into(),
                    layer: layer.into(),
                });
            }
        }
    }
}

pub fn export_edges(model: &JointModel, selector: LayerSelector, edge_tol: f64) -> Result<Vec<Edge>> {
    let check = |c: usize| {
        if c == 0 || c > model.n_classes() {
            Err(Error::InvalidArgument(format!("class {c} out of range 1..={}", model.n_classes())))
        } else {
            Ok(c)
        }
    };
    let mut out = Vec::new();
    match selector {
        LayerSelector::Common => push_layer(&mut out, &model.theta_com, "common", edge_tol),
        LayerSelector::Specific(c) => {
            let c = check(c)?;
            push_layer(&mut out, &model.s[c - 1], &format!("specific:{c}"), edge_tol);
        }
        LayerSelector::Class(c) => {
            let c = check(c)?;
            push_layer(&mut out, &model.class_precision(c - 1), &format!("class:{c}"), edge_tol);
        }
        LayerSelector::All => {
            push_layer(&mut out, &model.theta_com, "common", edge_tol);
            for c in 0..model.n_classes() {
                push_layer(&mut out, &model.s[c], &format!("specific:{}", c + 1), edge_tol);
            }
        }
    }
    Ok(out)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// GraphML document carrying the same attributes as the JSON edge list.
pub fn to_graphml(p: usize, edges: &[Edge]) -> String {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    for (id, ty) in [("value", "double"), ("sign", "string"), ("relation", "string"), ("layer", "string")] {
        let _ = writeln!(s, "  <key id=\"{id}\" for=\"edge\" attr.name=\"{id}\" attr.type=\"{ty}\"/>");
    }
    s.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
    for n in 0..p {
        let _ = writeln!(s, "    <node id=\"n{n}\"/>");
    }
    for e in edges {
        let _ = writeln!(s, "    <edge source=\"n{}\" target=\"n{}\">", e.i, e.j);
        let _ = writeln!(s, "      <data key=\"value\">{:.16e}</data>", e.value);
        let _ = writeln!(s, "      <data key=\"sign\">{}</data>", xml_escape(&e.sign));
        let _ = writeln!(s, "      <data key=\"relation\">{}</data>", xml_escape(&e.relation));
        let _ = writeln!(s, "      <data key=\"layer\">{}</data>", xml_escape(&e.layer));
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}
