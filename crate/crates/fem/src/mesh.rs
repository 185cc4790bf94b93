//! Hexahedral meshes with tensor-product (lexicographic) local numbering.
//!
//! Local node `a` of an element with `p` nodes per edge sits at
//! `a = i + p·j + p²·k`, i.e. `ξ` runs fastest. Face `f` of an element is the
//! side `ξ_{f/2} = −1` for even `f` and `+1` for odd `f`.
//!
//! Text format (`mesh-v1`):
//!
//! ```text
//! # mesh-v1
//! order Q2
//! nodes 27
//! 0 0.0 0.0 0.0
//! ...
//! elements 1
//! 0 0 1 2 ... 26
//! nodeset bottom 9
//! 0 1 2 3 4 5 6 7 8
//! faceset bottom 1
//! 0:4
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{FemError, Result};
use crate::shape::{hex_quadrature, shape_functions};

pub const FORMAT_TAG: &str = "mesh-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementOrder {
    /// Tri-linear, 8 nodes.
    Q1,
    /// Tri-quadratic, 27 nodes.
    Q2,
}

impl ElementOrder {
    pub fn nodes_per_edge(self) -> usize {
        match self {
            ElementOrder::Q1 => 2,
            ElementOrder::Q2 => 3,
        }
    }

    pub fn nodes_per_element(self) -> usize {
        self.nodes_per_edge().pow(3)
    }

    /// Gauss points per direction used for volume integrals.
    pub fn gauss_points(self) -> usize {
        self.nodes_per_edge()
    }

    pub fn label(self) -> &'static str {
        match self {
            ElementOrder::Q1 => "Q1",
            ElementOrder::Q2 => "Q2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "Q1" | "q1" => Some(ElementOrder::Q1),
            "Q2" | "q2" => Some(ElementOrder::Q2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub order: ElementOrder,
    pub nodes: Vec<[f64; 3]>,
    pub elements: Vec<Vec<usize>>,
    pub node_sets: BTreeMap<String, Vec<usize>>,
    /// `(element, local face)` pairs.
    pub face_sets: BTreeMap<String, Vec<(usize, usize)>>,
}

impl Mesh {
    pub fn new(order: ElementOrder, nodes: Vec<[f64; 3]>, elements: Vec<Vec<usize>>) -> Result<Self> {
        let mesh = Self { order, nodes, elements, node_sets: BTreeMap::new(), face_sets: BTreeMap::new() };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let npe = self.order.nodes_per_element();
        if self.nodes.iter().flatten().any(|x| !x.is_finite()) {
            return Err(FemError::Mesh("non-finite node coordinate".into()));
        }
        for (e, conn) in self.elements.iter().enumerate() {
            if conn.len() != npe {
                return Err(FemError::Mesh(format!("element {e} has {} nodes, expected {npe}", conn.len())));
            }
            if let Some(n) = conn.iter().find(|n| **n >= self.nodes.len()) {
                return Err(FemError::Mesh(format!("element {e} references missing node {n}")));
            }
        }
        for (name, set) in &self.node_sets {
            if set.iter().any(|n| *n >= self.nodes.len()) {
                return Err(FemError::Mesh(format!("node set '{name}' references a missing node")));
            }
        }
        for (name, set) in &self.face_sets {
            if set.iter().any(|(e, f)| *e >= self.elements.len() || *f >= 6) {
                return Err(FemError::Mesh(format!("face set '{name}' references a missing element face")));
            }
        }
        self.check_jacobians()
    }

    /// Rejects elements with a non-positive Jacobian at any Gauss point.
    pub fn check_jacobians(&self) -> Result<()> {
        let quad = hex_quadrature(self.order.gauss_points());
        for (e, conn) in self.elements.iter().enumerate() {
            for xi in &quad.points {
                let (_, dn) = shape_functions(self.order, xi);
                let mut j = [[0.0; 3]; 3];
                for (a, n) in conn.iter().enumerate() {
                    for r in 0..3 {
                        for c in 0..3 {
                            j[r][c] += self.nodes[*n][r] * dn[a][c];
                        }
                    }
                }
                let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1])
                    - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
                    + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
                if !(det > 0.0) {
                    return Err(FemError::Mesh(format!("element {e} has Jacobian determinant {det:e}")));
                }
            }
        }
        Ok(())
    }

    /// Structured box `[0, lx] × [0, ly] × [0, lz]` with node and face sets
    /// `xmin`, `xmax`, `ymin`, `ymax`, `zmin`, `zmax`.
    pub fn box_mesh(order: ElementOrder, counts: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        if counts.contains(&0) {
            return Err(FemError::Mesh("element counts must be positive".into()));
        }
        if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(FemError::Mesh("box lengths must be positive".into()));
        }
        let p = order.nodes_per_edge();
        let dims: [usize; 3] = std::array::from_fn(|d| counts[d] * (p - 1) + 1);
        let id = |i: usize, j: usize, k: usize| i + dims[0] * (j + dims[1] * k);
        let mut nodes = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let c = [i, j, k];
                    nodes.push(std::array::from_fn(|d| lengths[d] * c[d] as f64 / (dims[d] - 1) as f64));
                }
            }
        }
        let mut elements = Vec::with_capacity(counts.iter().product());
        let mut face_sets: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        for ez in 0..counts[2] {
            for ey in 0..counts[1] {
                for ex in 0..counts[0] {
                    let e = elements.len();
                    let mut conn = Vec::with_capacity(p * p * p);
                    for k in 0..p {
                        for j in 0..p {
                            for i in 0..p {
                                conn.push(id(ex * (p - 1) + i, ey * (p - 1) + j, ez * (p - 1) + k));
                            }
                        }
                    }
                    elements.push(conn);
                    let ec = [ex, ey, ez];
                    for d in 0..3 {
                        let axis = ["x", "y", "z"][d];
                        if ec[d] == 0 {
                            face_sets.entry(format!("{axis}min")).or_default().push((e, 2 * d));
                        }
                        if ec[d] == counts[d] - 1 {
                            face_sets.entry(format!("{axis}max")).or_default().push((e, 2 * d + 1));
                        }
                    }
                }
            }
        }
        let mut mesh = Self { order, nodes, elements, node_sets: BTreeMap::new(), face_sets };
        for (d, axis) in ["x", "y", "z"].iter().enumerate() {
            let l = lengths[d];
            mesh.add_node_set_where(&format!("{axis}min"), |x| x[d].abs() <= 1e-12 * l);
            mesh.add_node_set_where(&format!("{axis}max"), |x| (x[d] - l).abs() <= 1e-12 * l);
        }
        mesh.add_node_set_where("all", |_| true);
        mesh.check_jacobians()?;
        Ok(mesh)
    }

    /// Adds (or replaces) a node set of all nodes satisfying `pred`.
    pub fn add_node_set_where(&mut self, name: &str, pred: impl Fn(&[f64; 3]) -> bool) {
        let set = (0..self.nodes.len()).filter(|n| pred(&self.nodes[*n])).collect();
        self.node_sets.insert(name.to_string(), set);
    }

    pub fn node_set(&self, name: &str) -> Result<&[usize]> {
        self.node_sets.get(name).map(Vec::as_slice).ok_or_else(|| FemError::Bc(format!("unknown node set '{name}'")))
    }

    pub fn face_set(&self, name: &str) -> Result<&[(usize, usize)]> {
        self.face_sets.get(name).map(Vec::as_slice).ok_or_else(|| FemError::Bc(format!("unknown face set '{name}'")))
    }

    /// Local node indices on face `face`, ordered with the in-face
    /// coordinates in increasing axis order.
    pub fn face_local_nodes(&self, face: usize) -> Vec<usize> {
        let p = self.order.nodes_per_edge();
        let axis = face / 2;
        let fixed = if face % 2 == 0 { 0 } else { p - 1 };
        let mut out = Vec::with_capacity(p * p);
        for k in 0..p {
            for j in 0..p {
                for i in 0..p {
                    if [i, j, k][axis] == fixed {
                        out.push(i + p * j + p * p * k);
                    }
                }
            }
        }
        out
    }

    /// Copy with every node moved by `map`.
    pub fn transformed(&self, map: impl Fn(&[f64; 3]) -> [f64; 3]) -> Self {
        Self { nodes: self.nodes.iter().map(map).collect(), ..self.clone() }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {FORMAT_TAG}");
        let _ = writeln!(s, "order {}", self.order.label());
        let _ = writeln!(s, "nodes {}", self.nodes.len());
        for (i, x) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {:.17e} {:.17e} {:.17e}", x[0], x[1], x[2]);
        }
        let _ = writeln!(s, "elements {}", self.elements.len());
        for (e, conn) in self.elements.iter().enumerate() {
            let ids: Vec<String> = conn.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "{e} {}", ids.join(" "));
        }
        for (name, set) in &self.node_sets {
            let ids: Vec<String> = set.iter().map(|n| n.to_string()).collect();
            let _ = writeln!(s, "nodeset {name} {}\n{}", set.len(), ids.join(" "));
        }
        for (name, set) in &self.face_sets {
            let ids: Vec<String> = set.iter().map(|(e, f)| format!("{e}:{f}")).collect();
            let _ = writeln!(s, "faceset {name} {}\n{}", set.len(), ids.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, msg: String| FemError::Parse { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut order = None;
        let mut nodes: Vec<[f64; 3]> = Vec::new();
        let mut node_ids: HashMap<i64, usize> = HashMap::new();
        let mut elements = Vec::new();
        let mut element_ids: HashMap<i64, usize> = HashMap::new();
        let mut node_sets = BTreeMap::new();
        let mut face_sets = BTreeMap::new();
        let mut last_line = 0;
        let parse_count = |ln: usize, t: Option<&str>| -> Result<usize> {
            t.ok_or_else(|| perr(ln, "missing count".into()))?
                .parse::<usize>()
                .map_err(|e| perr(ln, format!("bad count: {e}")))
        };
        while let Some((ln, line)) = lines.next() {
            last_line = ln;
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            match key {
                "order" => {
                    let t = toks.next().unwrap_or_default();
                    order = Some(ElementOrder::parse(t).ok_or_else(|| perr(ln, format!("unknown order '{t}'")))?);
                }
                "nodes" => {
                    let n = parse_count(ln, toks.next())?;
                    for _ in 0..n {
                        let (ln, l) = lines.next().ok_or_else(|| perr(ln, "unexpected end of node list".into()))?;
                        last_line = ln;
                        let v: Vec<&str> = l.split_whitespace().collect();
                        if v.len() != 4 {
                            return Err(perr(ln, format!("expected 'id x y z', found {} fields", v.len())));
                        }
                        let id: i64 = v[0].parse().map_err(|e| perr(ln, format!("bad node id: {e}")))?;
                        let mut x = [0.0; 3];
                        for d in 0..3 {
                            x[d] = v[d + 1].parse().map_err(|e| perr(ln, format!("bad coordinate: {e}")))?;
                        }
                        if node_ids.insert(id, nodes.len()).is_some() {
                            return Err(perr(ln, format!("duplicate node id {id}")));
                        }
                        nodes.push(x);
                    }
                }
                "elements" => {
                    let n = parse_count(ln, toks.next())?;
                    let npe =
                        order.ok_or_else(|| perr(ln, "'order' must precede elements".into()))?.nodes_per_element();
                    for _ in 0..n {
                        let (ln, l) = lines.next().ok_or_else(|| perr(ln, "unexpected end of element list".into()))?;
                        last_line = ln;
                        let v: Vec<&str> = l.split_whitespace().collect();
                        if v.len() != npe + 1 {
                            return Err(perr(ln, format!("expected id and {npe} nodes, found {} fields", v.len())));
                        }
                        let id: i64 = v[0].parse().map_err(|e| perr(ln, format!("bad element id: {e}")))?;
                        if element_ids.insert(id, elements.len()).is_some() {
                            return Err(perr(ln, format!("duplicate element id {id}")));
                        }
                        let conn = v[1..]
                            .iter()
                            .map(|t| {
                                let id: i64 = t.parse().map_err(|e| perr(ln, format!("bad node id: {e}")))?;
                                node_ids.get(&id).copied().ok_or_else(|| perr(ln, format!("unknown node id {id}")))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        elements.push(conn);
                    }
                }
                "nodeset" | "faceset" => {
                    let name = toks.next().ok_or_else(|| perr(ln, "missing set name".into()))?.to_string();
                    let n = parse_count(ln, toks.next())?;
                    let mut items: Vec<String> = Vec::with_capacity(n);
                    while items.len() < n {
                        let (ln2, l) = lines.next().ok_or_else(|| perr(ln, "unexpected end of set".into()))?;
                        last_line = ln2;
                        items.extend(l.split_whitespace().map(str::to_string));
                    }
                    if items.len() != n {
                        return Err(perr(
                            last_line,
                            format!("set '{name}' announces {n} entries, found {}", items.len()),
                        ));
                    }
                    if key == "nodeset" {
                        let set = items
                            .iter()
                            .map(|t| {
                                let id: i64 = t.parse().map_err(|e| perr(last_line, format!("bad node id: {e}")))?;
                                node_ids
                                    .get(&id)
                                    .copied()
                                    .ok_or_else(|| perr(last_line, format!("unknown node id {id}")))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        node_sets.insert(name, set);
                    } else {
                        let set = items
                            .iter()
                            .map(|t| {
                                let (e, f) = t
                                    .split_once(':')
                                    .ok_or_else(|| perr(last_line, format!("face entry '{t}' must be elem:face")))?;
                                let id =
                                    e.parse::<i64>().map_err(|er| perr(last_line, format!("bad element id: {er}")))?;
                                let e = *element_ids
                                    .get(&id)
                                    .ok_or_else(|| perr(last_line, format!("unknown element id {id}")))?;
                                let f = f.parse::<usize>().map_err(|er| perr(last_line, format!("bad face: {er}")))?;
                                Ok((e, f))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        face_sets.insert(name, set);
                    }
                }
                other => return Err(perr(ln, format!("unknown section '{other}'"))),
            }
        }
        let order = order.ok_or_else(|| perr(last_line.max(1), "missing 'order' line".into()))?;
        let mesh = Self { order, nodes, elements, node_sets, face_sets };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}
