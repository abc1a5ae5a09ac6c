//! Pin-jointed plane and space trusses solved by the direct stiffness method.
//!
//! Geometry files are TOML:
//!
//! ```toml
//! name = "bar"
//! dimension = 2
//! failure_threshold = 0.01
//! modulus = { kind = "lognormal", mean = 2.0e11, std = 3.0e10 }
//! response = { kind = "displacement", node = 2, direction = [1.0, 0.0] }
//!
//! [[nodes]]
//! id = 1
//! coords = [0.0, 0.0]
//!
//! [[elements]]
//! id = 1
//! nodes = [1, 2]
//! diameter = 0.02
//!
//! [[supports]]
//! node = 1
//! fixed = ["x", "y"]
//!
//! [[loads]]
//! node = 2
//! direction = [1.0, 0.0]
//! marginal = { kind = "gumbel_max", mean = 1.0e4, std = 1.5e3 }
//! ```
//!
//! Random inputs are ordered as the element moduli (element order) followed
//! by the load magnitudes (load order).

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Model;
use crate::doe::MarginalSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrussNode {
    pub id: usize,
    pub coords: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrussElement {
    pub id: usize,
    pub nodes: [usize; 2],
    /// Bar diameter in metres.
    pub diameter: f64,
    /// Overrides the geometry-wide modulus law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulus: Option<MarginalSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrussSupport {
    pub node: usize,
    /// Fixed directions among `x`, `y`, `z`.
    pub fixed: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrussLoad {
    pub node: usize,
    pub direction: Vec<f64>,
    pub marginal: MarginalSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseSelector {
    /// Displacement of `node` projected on `direction` (normalised).
    Displacement { node: usize, direction: Vec<f64> },
    /// Largest horizontal (x-y plane) displacement magnitude over `nodes`.
    MaxHorizontal { nodes: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrussSpec {
    pub name: String,
    pub dimension: usize,
    pub failure_threshold: f64,
    pub modulus: MarginalSpec,
    pub response: ResponseSelector,
    pub nodes: Vec<TrussNode>,
    pub elements: Vec<TrussElement>,
    pub supports: Vec<TrussSupport>,
    pub loads: Vec<TrussLoad>,
}

impl TrussSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Shipped 32-bar plane truss.
    pub fn plane32() -> Self {
        Self::from_toml(include_str!("../../data/plane32.geom")).expect("shipped plane truss")
    }

    /// Shipped 36-bar spatial truss.
    pub fn spatial36() -> Self {
        Self::from_toml(include_str!("../../data/spatial36.geom")).expect("shipped spatial truss")
    }

    /// Number of random inputs: one modulus per element plus one per load.
    pub fn n_inputs(&self) -> usize {
        self.elements.len() + self.loads.len()
    }

    /// Marginal law of every random input, in input order.
    pub fn marginals(&self) -> Vec<MarginalSpec> {
        self.elements
            .iter()
            .map(|e| e.modulus.unwrap_or(self.modulus))
            .chain(self.loads.iter().map(|l| l.marginal))
            .collect()
    }

    /// Physical input values at the marginal means.
    pub fn mean_inputs(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.marginals();
        let (e, p) = m.split_at(self.elements.len());
        (e.iter().map(|s| s.mean).collect(), p.iter().map(|s| s.mean).collect())
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ModelDefinition(msg));
        if self.dimension != 2 && self.dimension != 3 {
            return bad(format!("dimension must be 2 or 3, got {}", self.dimension));
        }
        if !(self.failure_threshold.is_finite() && self.failure_threshold > 0.0) {
            return bad("failure_threshold must be positive".into());
        }
        let mut seen = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.coords.len() != self.dimension {
                return bad(format!("node {} has {} coordinates", n.id, n.coords.len()));
            }
            if seen.insert(n.id, i).is_some() {
                return bad(format!("duplicate node id {}", n.id));
            }
        }
        let node = |id: usize| {
            seen.get(&id)
                .copied()
                .ok_or_else(|| Error::ModelDefinition(format!("unknown node {id}")))
        };
        for e in &self.elements {
            let (a, b) = (node(e.nodes[0])?, node(e.nodes[1])?);
            if a == b {
                return bad(format!("element {} connects a node to itself", e.id));
            }
            if !(e.diameter.is_finite() && e.diameter > 0.0) {
                return bad(format!("element {} has non-positive diameter", e.id));
            }
            if length(&self.nodes[a].coords, &self.nodes[b].coords) <= 0.0 {
                return bad(format!("element {} has zero length", e.id));
            }
        }
        for s in &self.supports {
            node(s.node)?;
            for d in &s.fixed {
                axis(d, self.dimension)?;
            }
        }
        for l in &self.loads {
            node(l.node)?;
            unit(&l.direction, self.dimension)?;
            l.marginal.validate()?;
        }
        self.modulus.validate()?;
        for e in &self.elements {
            if let Some(m) = e.modulus {
                m.validate()?;
            }
        }
        match &self.response {
            ResponseSelector::Displacement { node: n, direction } => {
                node(*n)?;
                unit(direction, self.dimension)?;
            }
            ResponseSelector::MaxHorizontal { nodes } => {
                if nodes.is_empty() {
                    return bad("max_horizontal response needs at least one node".into());
                }
                for n in nodes {
                    node(*n)?;
                }
            }
        }
        Ok(())
    }
}

fn axis(name: &str, dim: usize) -> Result<usize> {
    let a = match name {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        other => return Err(Error::ModelDefinition(format!("unknown direction {other:?}"))),
    };
    if a >= dim {
        return Err(Error::ModelDefinition(format!("direction {name} in a {dim}D truss")));
    }
    Ok(a)
}

fn unit(v: &[f64], dim: usize) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if v.len() != dim || !(norm.is_finite() && norm > 0.0) {
        return Err(Error::ModelDefinition(format!("bad direction vector {v:?}")));
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

fn length(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt()
}

/// Precomputed geometry: element direction cosines, lengths, areas and DOF maps.
#[derive(Clone, Debug)]
pub struct TrussModel {
    pub spec: TrussSpec,
    marginals: Vec<MarginalSpec>,
    /// Per element: (node index a, node index b, unit vector a->b, length, area).
    bars: Vec<(usize, usize, Vec<f64>, f64, f64)>,
    /// Global DOF -> reduced DOF (`None` when fixed).
    reduced: Vec<Option<usize>>,
    n_free: usize,
    /// Per load: (global dof, component) pairs.
    load_dofs: Vec<Vec<(usize, f64)>>,
    node_index: HashMap<usize, usize>,
}

impl TrussModel {
    pub fn new(spec: TrussSpec) -> Result<Self> {
        spec.check()?;
        let d = spec.dimension;
        let node_index: HashMap<usize, usize> =
            spec.nodes.iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let bars = spec
            .elements
            .iter()
            .map(|e| {
                let (a, b) = (node_index[&e.nodes[0]], node_index[&e.nodes[1]]);
                let (pa, pb) = (&spec.nodes[a].coords, &spec.nodes[b].coords);
                let len = length(pa, pb);
                let dir = pa.iter().zip(pb).map(|(x, y)| (y - x) / len).collect();
                let area = std::f64::consts::PI * e.diameter * e.diameter / 4.0;
                (a, b, dir, len, area)
            })
            .collect();
        let mut fixed = vec![false; d * spec.nodes.len()];
        for s in &spec.supports {
            for ax in &s.fixed {
                fixed[d * node_index[&s.node] + axis(ax, d)?] = true;
            }
        }
        let mut n_free = 0;
        let reduced = fixed
            .iter()
            .map(|&f| {
                (!f).then(|| {
                    n_free += 1;
                    n_free - 1
                })
            })
            .collect();
        let load_dofs = spec
            .loads
            .iter()
            .map(|l| {
                let dir = unit(&l.direction, d)?;
                let base = d * node_index[&l.node];
                Ok((0..d).map(|k| (base + k, dir[k])).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            marginals: spec.marginals(),
            spec,
            bars,
            reduced,
            n_free,
            load_dofs,
            node_index,
        })
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn marginals(&self) -> &[MarginalSpec] {
        &self.marginals
    }

    /// Constrained stiffness matrix for element moduli `moduli`.
    pub fn stiffness(&self, moduli: &[f64]) -> Result<DMatrix<f64>> {
        if moduli.len() != self.bars.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bars.len(),
                got: moduli.len(),
            });
        }
        let d = self.spec.dimension;
        let mut k = DMatrix::zeros(self.n_free, self.n_free);
        let mut dofs = vec![None; 2 * d];
        let mut g = vec![0.0; 2 * d];
        for ((a, b, dir, len, area), &e) in self.bars.iter().zip(moduli) {
            let c = e * area / len;
            for i in 0..d {
                dofs[i] = self.reduced[d * a + i];
                dofs[d + i] = self.reduced[d * b + i];
                g[i] = -dir[i];
                g[d + i] = dir[i];
            }
            for (i, ri) in dofs.iter().enumerate() {
                let Some(ri) = *ri else { continue };
                for (j, rj) in dofs.iter().enumerate() {
                    if let Some(rj) = *rj {
                        k[(ri, rj)] += c * g[i] * g[j];
                    }
                }
            }
        }
        Ok(k)
    }

    /// Full nodal displacement vector (fixed DOFs are zero).
    pub fn displacements(&self, moduli: &[f64], loads: &[f64]) -> Result<DVector<f64>> {
        if loads.len() != self.load_dofs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.load_dofs.len(),
                got: loads.len(),
            });
        }
        if let Some(bad) = moduli.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Singular(format!("non-positive bar modulus {bad}")));
        }
        let k = self.stiffness(moduli)?;
        let mut f = DVector::zeros(self.n_free);
        for (dofs, &p) in self.load_dofs.iter().zip(loads) {
            for &(g, c) in dofs {
                if let Some(r) = self.reduced[g] {
                    f[r] += p * c;
                }
            }
        }
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::ModelDefinition(format!("truss {} is a mechanism", self.spec.name)))?;
        let u = chol.solve(&f);
        Ok(DVector::from_iterator(
            self.reduced.len(),
            self.reduced.iter().map(|r| r.map_or(0.0, |i| u[i])),
        ))
    }

    /// The selected response for physical moduli and load magnitudes.
    pub fn response(&self, moduli: &[f64], loads: &[f64]) -> Result<f64> {
        let u = self.displacements(moduli, loads)?;
        let d = self.spec.dimension;
        Ok(match &self.spec.response {
            ResponseSelector::Displacement { node, direction } => {
                let dir = unit(direction, d)?;
                let base = d * self.node_index[node];
                (0..d).map(|k| u[base + k] * dir[k]).sum()
            }
            ResponseSelector::MaxHorizontal { nodes } => nodes
                .iter()
                .map(|n| {
                    let base = d * self.node_index[n];
                    let uy = if d > 2 { u[base + 1] } else { 0.0 };
                    u[base].hypot(uy)
                })
                .fold(0.0, f64::max),
        })
    }

    /// Physical inputs for standard Gaussian coordinates.
    pub fn physical(&self, xi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if xi.len() != self.marginals.len() {
            return Err(Error::DimensionMismatch {
                expected: self.marginals.len(),
                got: xi.len(),
            });
        }
        let x: Vec<f64> = xi.iter().zip(&self.marginals).map(|(z, m)| m.from_gaussian(*z)).collect();
        let (e, p) = x.split_at(self.bars.len());
        Ok((e.to_vec(), p.to_vec()))
    }
}

/// Response of the truss for physical moduli and loads.
pub fn solve_truss(spec: &TrussSpec, moduli: &[f64], loads: &[f64]) -> Result<f64> {
    TrussModel::new(spec.clone())?.response(moduli, loads)
}

impl Model for TrussModel {
    fn dim(&self) -> usize {
        self.marginals.len()
    }

    fn evaluate(&self, xi: &[f64]) -> Result<f64> {
        let (e, p) = self.physical(xi)?;
        self.response(&e, &p)
    }

    fn failure_threshold(&self) -> Option<f64> {
        Some(self.spec.failure_threshold)
    }

    fn marginals(&self) -> Option<Vec<MarginalSpec>> {
        Some(self.marginals.clone())
    }
}
