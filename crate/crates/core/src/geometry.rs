//! P1 meshes of 1D rods and 2D rectangles with an embedded straight crack path.
//!
//! Nodes on the crack path are duplicated: the base node belongs to the
//! negative side and a twin node is appended for the positive side. Elements
//! above (or to the right of) the path reference the positive twins. Crack tips
//! lying inside the domain are not duplicated, so the jump vanishes there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major m x n gradient of a P1 field on one element (unused entries zero).
pub type Grad = [[f64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// One facet of the crack path with lumped nodal weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceFacet {
    pub plus_nodes: Vec<usize>,
    pub minus_nodes: Vec<usize>,
    pub nodal_weights: Vec<f64>,
    /// Unit normal pointing from the negative to the positive side.
    pub normal: [f64; 2],
}

/// A point of the crack path after lumping: the pair of twin nodes and the
/// total quadrature weight carried by it. Tips have `plus == minus`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceNode {
    pub plus: usize,
    pub minus: usize,
    pub weight: f64,
    pub normal: [f64; 2],
}

impl InterfaceNode {
    pub fn is_tip(&self) -> bool {
        self.plus == self.minus
    }
}

/// A facet of the Neumann boundary part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFacet {
    pub nodes: Vec<usize>,
    /// Length of the facet (1 for a point facet in 1D).
    pub weight: f64,
    pub normal: [f64; 2],
}

#[derive(Clone, Debug)]
struct ElementGeometry {
    grads: Vec<[f64; 2]>,
    volume: f64,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    field_dim: usize,
    coords: Vec<[f64; 2]>,
    elements: Vec<Vec<usize>>,
    dirichlet_nodes: Vec<usize>,
    neumann_facets: Vec<BoundaryFacet>,
    interface_facets: Vec<InterfaceFacet>,
    interface_nodes: Vec<InterfaceNode>,
    geometry: Vec<ElementGeometry>,
    crack_measure: f64,
}

/// JSON snapshot of a mesh for debugging and external plotting.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshSnapshot {
    pub dimension: usize,
    pub field_dimension: usize,
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<Vec<usize>>,
    pub dirichlet_nodes: Vec<usize>,
    pub interface_pairs: Vec<InterfaceNode>,
}

const GRID_TOL: f64 = 1e-9;

fn grid_index(value: f64, origin: f64, step: f64, what: &str) -> Result<usize> {
    let s = (value - origin) / step;
    let r = s.round();
    if (s - r).abs() > GRID_TOL * (1.0 + s.abs()) || r < 0.0 {
        return Err(Error::Mesh(format!(
            "{what} {value} does not coincide with a grid node (spacing {step})"
        )));
    }
    Ok(r as usize)
}

/// Rod on [0, length] with the default Dirichlet condition at both ends.
pub fn build_rod_mesh(length: f64, n_elements: usize, interface_position: f64) -> Result<Mesh> {
    build_rod_mesh_with(
        length,
        n_elements,
        interface_position,
        &[Side::Left, Side::Right],
    )
}

pub fn build_rod_mesh_with(
    length: f64,
    n_elements: usize,
    interface_position: f64,
    dirichlet: &[Side],
) -> Result<Mesh> {
    if !(length > 0.0) {
        return Err(Error::Mesh(format!("rod length must be positive, got {length}")));
    }
    if n_elements < 2 {
        return Err(Error::Mesh(format!(
            "a rod needs at least 2 elements, got {n_elements}"
        )));
    }
    if !(interface_position > 0.0 && interface_position < length) {
        return Err(Error::Mesh(format!(
            "interface position {interface_position} must lie strictly inside (0, {length})"
        )));
    }
    let h = length / n_elements as f64;
    let k = grid_index(interface_position, 0.0, h, "interface position")?;
    if k == 0 || k >= n_elements {
        return Err(Error::Mesh("interface must be an interior grid node".into()));
    }

    // node ids: 0..k-1 regular, k = minus twin, k+1 = plus twin, j > k shifted by one
    let id = |j: usize, right_side: bool| -> usize {
        if j < k || (j == k && !right_side) {
            j
        } else {
            j + 1
        }
    };
    let mut coords = Vec::with_capacity(n_elements + 2);
    for j in 0..=n_elements {
        let x = if j == k { interface_position } else { j as f64 * h };
        coords.push([x, 0.0]);
        if j == k {
            coords.push([x, 0.0]);
        }
    }
    let elements = (0..n_elements)
        .map(|j| {
            let right = j >= k;
            vec![id(j, right), id(j + 1, right)]
        })
        .collect();

    let last = n_elements + 1;
    let mut dirichlet_nodes = Vec::new();
    let mut neumann_facets = Vec::new();
    for (side, node, normal) in [(Side::Left, 0, -1.0), (Side::Right, last, 1.0)] {
        if dirichlet.contains(&side) {
            dirichlet_nodes.push(node);
        } else {
            neumann_facets.push(BoundaryFacet {
                nodes: vec![node],
                weight: 1.0,
                normal: [normal, 0.0],
            });
        }
    }
    let facet = InterfaceFacet {
        plus_nodes: vec![k + 1],
        minus_nodes: vec![k],
        nodal_weights: vec![1.0],
        normal: [1.0, 0.0],
    };
    Mesh::from_parts(
        1,
        1,
        coords,
        elements,
        dirichlet_nodes,
        neumann_facets,
        vec![facet],
    )
}

/// Structured triangulation of [-w/2, w/2] x [-h/2, h/2] with a crack on the
/// horizontal midline between `crack.0` and `crack.1`.
pub fn build_rect_mesh_with_crack(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    crack: (f64, f64),
    dirichlet: &[Side],
) -> Result<Mesh> {
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::Mesh("rectangle sides must be positive".into()));
    }
    if nx < 1 || ny < 2 {
        return Err(Error::Mesh(format!("grid {nx}x{ny} too coarse")));
    }
    if ny % 2 != 0 {
        return Err(Error::Mesh(format!(
            "ny = {ny} is odd: the midline y = 0 is not a grid line"
        )));
    }
    let (x0, x1) = crack;
    let half_w = 0.5 * width;
    if !(x0 < x1) || x0 < -half_w - GRID_TOL || x1 > half_w + GRID_TOL {
        return Err(Error::Mesh(format!(
            "crack range [{x0}, {x1}] outside the domain [-{half_w}, {half_w}]"
        )));
    }
    let hx = width / nx as f64;
    let hy = height / ny as f64;
    let i0 = grid_index(x0, -half_w, hx, "crack start")?;
    let i1 = grid_index(x1, -half_w, hx, "crack end")?;
    if i1 > nx {
        return Err(Error::Mesh("crack end outside the domain".into()));
    }
    if i0 == 0 && i1 == nx {
        return Err(Error::Mesh(
            "crack spans the whole width: the cracked body would be disconnected".into(),
        ));
    }
    let mid = ny / 2;
    let base = |i: usize, j: usize| j * (nx + 1) + i;
    let n_base = (nx + 1) * (ny + 1);

    let mut coords = Vec::with_capacity(n_base + (i1 - i0 + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = -half_w + i as f64 * hx;
            let y = if j == mid { 0.0 } else { -0.5 * height + j as f64 * hy };
            coords.push([x, y]);
        }
    }
    // interior tips are shared by both sides
    let duplicated = |i: usize| i >= i0 && i <= i1 && !(i == i0 && i0 > 0) && !(i == i1 && i1 < nx);
    let mut twin = vec![usize::MAX; nx + 1];
    for i in i0..=i1 {
        if duplicated(i) {
            twin[i] = coords.len();
            coords.push(coords[base(i, mid)]);
        }
    }
    let node = |i: usize, j: usize, above: bool| -> usize {
        if j == mid && above && twin[i] != usize::MAX {
            twin[i]
        } else {
            base(i, j)
        }
    };

    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        let above = j >= mid;
        for i in 0..nx {
            let v00 = node(i, j, above);
            let v10 = node(i + 1, j, above);
            let v11 = node(i + 1, j + 1, above);
            let v01 = node(i, j + 1, above);
            elements.push(vec![v00, v10, v11]);
            elements.push(vec![v00, v11, v01]);
        }
    }

    let mut dirichlet_nodes = Vec::new();
    let mut neumann_facets = Vec::new();
    let mut push_side = |side: Side, edges: Vec<(usize, usize)>, len: f64, normal: [f64; 2]| {
        if dirichlet.contains(&side) {
            for (a, b) in edges {
                dirichlet_nodes.push(a);
                dirichlet_nodes.push(b);
            }
        } else {
            for (a, b) in edges {
                neumann_facets.push(BoundaryFacet {
                    nodes: vec![a, b],
                    weight: len,
                    normal,
                });
            }
        }
    };
    push_side(
        Side::Bottom,
        (0..nx).map(|i| (node(i, 0, false), node(i + 1, 0, false))).collect(),
        hx,
        [0.0, -1.0],
    );
    push_side(
        Side::Top,
        (0..nx).map(|i| (node(i, ny, true), node(i + 1, ny, true))).collect(),
        hx,
        [0.0, 1.0],
    );
    push_side(
        Side::Left,
        (0..ny)
            .map(|j| (node(0, j, j >= mid), node(0, j + 1, j >= mid)))
            .collect(),
        hy,
        [-1.0, 0.0],
    );
    push_side(
        Side::Right,
        (0..ny)
            .map(|j| (node(nx, j, j >= mid), node(nx, j + 1, j >= mid)))
            .collect(),
        hy,
        [1.0, 0.0],
    );
    dirichlet_nodes.sort_unstable();
    dirichlet_nodes.dedup();

    let facets = (i0..i1)
        .map(|i| InterfaceFacet {
            plus_nodes: vec![node(i, mid, true), node(i + 1, mid, true)],
            minus_nodes: vec![base(i, mid), base(i + 1, mid)],
            nodal_weights: vec![0.5 * hx, 0.5 * hx],
            normal: [0.0, 1.0],
        })
        .collect();

    Mesh::from_parts(2, 1, coords, elements, dirichlet_nodes, neumann_facets, facets)
}

fn element_geometry(dim: usize, coords: &[[f64; 2]], nodes: &[usize]) -> Result<ElementGeometry> {
    match (dim, nodes.len()) {
        (1, 2) => {
            let len = coords[nodes[1]][0] - coords[nodes[0]][0];
            if !(len > 0.0) {
                return Err(Error::Mesh(format!("degenerate segment {nodes:?}")));
            }
            Ok(ElementGeometry {
                grads: vec![[-1.0 / len, 0.0], [1.0 / len, 0.0]],
                volume: len,
            })
        }
        (2, 3) => {
            let [a, b, c] = [coords[nodes[0]], coords[nodes[1]], coords[nodes[2]]];
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            if !(det > 0.0) {
                return Err(Error::Mesh(format!(
                    "triangle {nodes:?} is degenerate or clockwise"
                )));
            }
            let grads = vec![
                [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
                [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
                [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
            ];
            Ok(ElementGeometry {
                grads,
                volume: 0.5 * det,
            })
        }
        _ => Err(Error::Mesh(format!(
            "element with {} nodes in dimension {dim}",
            nodes.len()
        ))),
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Mesh {
    /// Assembles and validates a mesh from raw parts.
    pub fn from_parts(
        dim: usize,
        field_dim: usize,
        coords: Vec<[f64; 2]>,
        elements: Vec<Vec<usize>>,
        dirichlet_nodes: Vec<usize>,
        neumann_facets: Vec<BoundaryFacet>,
        interface_facets: Vec<InterfaceFacet>,
    ) -> Result<Mesh> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::Mesh(format!("unsupported dimension {dim}")));
        }
        if !(field_dim == 1 || field_dim == 2) {
            return Err(Error::Mesh(format!("unsupported field dimension {field_dim}")));
        }
        let n = coords.len();
        for e in &elements {
            if let Some(&bad) = e.iter().find(|&&v| v >= n) {
                return Err(Error::Mesh(format!("element references missing node {bad}")));
            }
        }
        let geometry = elements
            .iter()
            .map(|e| element_geometry(dim, &coords, e))
            .collect::<Result<Vec<_>>>()?;
        if dirichlet_nodes.is_empty() {
            return Err(Error::Mesh("the Dirichlet node set is empty".into()));
        }

        // aggregate lumped weights per twin pair, in order of first appearance
        let mut interface_nodes: Vec<InterfaceNode> = Vec::new();
        let mut crack_measure = 0.0;
        for f in &interface_facets {
            if f.plus_nodes.len() != f.minus_nodes.len()
                || f.plus_nodes.len() != f.nodal_weights.len()
            {
                return Err(Error::Mesh("interface facet node lists differ in length".into()));
            }
            let norm = f.normal[0].hypot(f.normal[1]);
            if (norm - 1.0).abs() > 1e-14 {
                return Err(Error::Mesh(format!("interface normal has length {norm}")));
            }
            for ((&p, &m), &w) in f.plus_nodes.iter().zip(&f.minus_nodes).zip(&f.nodal_weights) {
                if !(w > 0.0) {
                    return Err(Error::Mesh(format!("non-positive interface weight {w}")));
                }
                if p >= n || m >= n {
                    return Err(Error::Mesh("interface facet references missing node".into()));
                }
                let (cp, cm) = (coords[p], coords[m]);
                if (cp[0] - cm[0]).abs() > 1e-12 || (cp[1] - cm[1]).abs() > 1e-12 {
                    return Err(Error::Mesh(format!("twins {p}/{m} do not coincide")));
                }
                crack_measure += w;
                match interface_nodes.iter_mut().find(|q| q.plus == p && q.minus == m) {
                    Some(q) => q.weight += w,
                    None => interface_nodes.push(InterfaceNode {
                        plus: p,
                        minus: m,
                        weight: w,
                        normal: f.normal,
                    }),
                }
            }
        }

        let mesh = Mesh {
            dim,
            field_dim,
            coords,
            elements,
            dirichlet_nodes,
            neumann_facets,
            interface_facets,
            interface_nodes,
            geometry,
            crack_measure,
        };
        mesh.check_anchored()?;
        Ok(mesh)
    }

    fn check_anchored(&self) -> Result<()> {
        let n = self.coords.len();
        let mut parent: Vec<usize> = (0..n).collect();
        for e in &self.elements {
            for w in e.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                parent[a] = b;
            }
        }
        let mut used = vec![false; n];
        self.elements.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(orphan) = used.iter().position(|&u| !u) {
            return Err(Error::Mesh(format!("node {orphan} belongs to no element")));
        }
        // every piece of the cracked domain must be held by the Dirichlet part
        let mut anchored = vec![false; n];
        for &d in &self.dirichlet_nodes {
            let r = find(&mut parent, d);
            anchored[r] = true;
        }
        if let Some(v) = (0..n).find(|&v| !anchored[find(&mut parent, v)]) {
            return Err(Error::Mesh(format!(
                "node {v} lies in a piece of the cracked domain without Dirichlet nodes"
            )));
        }
        Ok(())
    }

    /// Returns a copy carrying a field of dimension `m` (1 scalar/antiplane, 2 planar).
    pub fn with_field_dim(mut self, m: usize) -> Result<Mesh> {
        if !(m == 1 || m == 2) {
            return Err(Error::Mesh(format!("unsupported field dimension {m}")));
        }
        self.field_dim = m;
        Ok(self)
    }

    /// Same mesh with elements reordered by `perm` (new position i holds old element perm[i]).
    pub fn permute_elements(&self, perm: &[usize]) -> Result<Mesh> {
        let elements = perm.iter().map(|&i| self.elements[i].clone()).collect();
        Mesh::from_parts(
            self.dim,
            self.field_dim,
            self.coords.clone(),
            elements,
            self.dirichlet_nodes.clone(),
            self.neumann_facets.clone(),
            self.interface_facets.clone(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field_dim(&self) -> usize {
        self.field_dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    /// Length of a nodal field on this mesh.
    pub fn n_dofs(&self) -> usize {
        self.coords.len() * self.field_dim
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        self.geometry[e].volume
    }

    pub fn element_shape_gradients(&self, e: usize) -> &[[f64; 2]] {
        &self.geometry[e].grads
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let nodes = &self.elements[e];
        let k = nodes.len() as f64;
        let mut c = [0.0; 2];
        for &v in nodes {
            c[0] += self.coords[v][0] / k;
            c[1] += self.coords[v][1] / k;
        }
        c
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet_nodes
    }

    pub fn neumann_facets(&self) -> &[BoundaryFacet] {
        &self.neumann_facets
    }

    pub fn interface_facets(&self) -> &[InterfaceFacet] {
        &self.interface_facets
    }

    pub fn interface_nodes(&self) -> &[InterfaceNode] {
        &self.interface_nodes
    }

    pub fn n_interface(&self) -> usize {
        self.interface_nodes.len()
    }

    /// Measure of the crack path (length in 2D, counting measure in 1D).
    pub fn crack_measure(&self) -> f64 {
        self.crack_measure
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Mask over dofs: true where the Dirichlet condition is imposed.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let m = self.field_dim;
        let mut mask = vec![false; self.n_dofs()];
        for &v in &self.dirichlet_nodes {
            for c in 0..m {
                mask[v * m + c] = true;
            }
        }
        mask
    }

    pub(crate) fn check_field(&self, u: &[f64], what: &'static str) -> Result<()> {
        if u.len() != self.n_dofs() {
            return Err(Error::Dimension {
                what,
                expected: self.n_dofs(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Gradient of a P1 field on element `e`.
    pub fn element_gradient(&self, e: usize, u: &[f64]) -> Grad {
        let m = self.field_dim;
        let g = &self.geometry[e];
        let mut out = [[0.0; 2]; 2];
        for (a, &v) in self.elements[e].iter().enumerate() {
            for c in 0..m {
                let val = u[v * m + c];
                for j in 0..self.dim {
                    out[c][j] += val * g.grads[a][j];
                }
            }
        }
        out
    }

    /// Discrete p-norm of the gradient, (sum_e |e| |grad u_e|^p)^(1/p).
    pub fn grad_norm(&self, u: &[f64], p: f64) -> f64 {
        let s: f64 = (0..self.n_elements())
            .map(|e| {
                let g = self.element_gradient(e, u);
                let f2: f64 = g.iter().flatten().map(|x| x * x).sum();
                self.geometry[e].volume * f2.sqrt().powf(p)
            })
            .sum();
        s.powf(1.0 / p)
    }

    /// Discrete Lp norm of a nodal field using the vertex quadrature rule.
    pub fn lp_norm(&self, u: &[f64], p: f64) -> f64 {
        let m = self.field_dim;
        let s: f64 = self
            .elements
            .iter()
            .zip(&self.geometry)
            .map(|(nodes, g)| {
                let k = nodes.len() as f64;
                nodes
                    .iter()
                    .map(|&v| {
                        let a: f64 = (0..m).map(|c| u[v * m + c].powi(2)).sum();
                        a.sqrt().powf(p)
                    })
                    .sum::<f64>()
                    * g.volume
                    / k
            })
            .sum();
        s.powf(1.0 / p)
    }

    /// Discrete W^{1,2} distance between two nodal fields.
    pub fn h1_distance(&self, u: &[f64], v: &[f64]) -> f64 {
        let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        (self.lp_norm(&d, 2.0).powi(2) + self.grad_norm(&d, 2.0).powi(2)).sqrt()
    }

    pub fn snapshot(&self) -> MeshSnapshot {
        MeshSnapshot {
            dimension: self.dim,
            field_dimension: self.field_dim,
            nodes: self.coords.clone(),
            elements: self.elements.clone(),
            dirichlet_nodes: self.dirichlet_nodes.clone(),
            interface_pairs: self.interface_nodes.clone(),
        }
    }
}

/// The jump u(+) - u(-) at every interface node (components beyond m are zero).
pub fn jump(mesh: &Mesh, u: &[f64]) -> Result<Vec<[f64; 2]>> {
    mesh.check_field(u, "nodal field")?;
    let m = mesh.field_dim;
    Ok(mesh
        .interface_nodes
        .iter()
        .map(|q| {
            let mut j = [0.0; 2];
            for (c, jc) in j.iter_mut().enumerate().take(m) {
                *jc = u[q.plus * m + c] - u[q.minus * m + c];
            }
            j
        })
        .collect())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_rod() {
        let mesh = build_rod_mesh(2.0, 2, 1.0).unwrap();
        assert_eq!(mesh.n_nodes(), 4);
        assert_eq!(mesh.n_elements(), 2);
        let xs: Vec<f64> = mesh.coords().iter().map(|c| c[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 1.0, 2.0]);
        assert_eq!(mesh.interface_facets().len(), 1);
        assert_eq!(mesh.interface_nodes()[0].weight, 1.0);
        assert_eq!(mesh.interface_nodes()[0].minus, 1);
        assert_eq!(mesh.interface_nodes()[0].plus, 2);
        assert_eq!(mesh.dirichlet_nodes(), &[0, 3]);
    }

    #[test]
    fn finer_rod() {
        let mesh = build_rod_mesh(2.0, 8, 1.0).unwrap();
        assert_eq!(mesh.n_nodes(), 10);
        assert_eq!(mesh.n_elements(), 8);
        assert_eq!(mesh.interface_nodes().len(), 1);
        assert_eq!(mesh.crack_measure(), 1.0);
        assert!((mesh.total_volume() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rod_interface_off_grid() {
        let err = build_rod_mesh(1.0, 4, 0.3).unwrap_err();
        assert!(err.to_string().contains("does not coincide with a grid node"), "{err}");
    }

    #[test]
    fn rect_coarse_crack_weights() {
        let mesh =
            build_rect_mesh_with_crack(4.0, 4.0, 4, 4, (0.0, 1.0), &[Side::Bottom, Side::Top])
                .unwrap();
        let total: f64 = mesh.interface_nodes().iter().map(|q| q.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // both ends are interior tips on this grid
        assert!(mesh.interface_nodes().iter().all(|q| q.is_tip()));
        assert_eq!(mesh.n_nodes(), 25);
    }

    #[test]
    fn rect_refined_crack_weights() {
        for n in [8, 16, 32] {
            let mesh = build_rect_mesh_with_crack(
                4.0,
                4.0,
                n,
                n,
                (0.0, 1.0),
                &[Side::Bottom, Side::Top],
            )
            .unwrap();
            let total: f64 = mesh.interface_nodes().iter().map(|q| q.weight).sum();
            assert!((total - 1.0).abs() <= 1e-12, "n = {n}: {total}");
            let dup = mesh.interface_nodes().iter().filter(|q| !q.is_tip()).count();
            assert_eq!(dup, n / 4 - 1);
            assert_eq!(mesh.n_nodes(), (n + 1) * (n + 1) + dup);
        }
    }

    #[test]
    fn rect_odd_ny_rejected() {
        let err = build_rect_mesh_with_crack(4.0, 4.0, 4, 3, (0.0, 1.0), &[Side::Top]).unwrap_err();
        assert!(err.to_string().contains("odd"));
    }

    #[test]
    fn rect_crack_off_grid_or_outside() {
        assert!(build_rect_mesh_with_crack(4.0, 4.0, 4, 4, (0.0, 0.5), &[Side::Top]).is_err());
        assert!(build_rect_mesh_with_crack(4.0, 4.0, 4, 4, (0.0, 3.0), &[Side::Top]).is_err());
        assert!(build_rect_mesh_with_crack(4.0, 4.0, 4, 4, (-2.0, 2.0), &[Side::Top]).is_err());
    }

    #[test]
    fn edge_crack_duplicates_mouth() {
        let mesh =
            build_rect_mesh_with_crack(4.0, 4.0, 8, 8, (-2.0, 0.0), &[Side::Bottom, Side::Top])
                .unwrap();
        let q = mesh.interface_nodes();
        assert!(!q[0].is_tip(), "mouth on the boundary is duplicated");
        assert!(q.last().unwrap().is_tip(), "interior tip is shared");
        // left side is Neumann: one facet per edge on both sides of the mouth
        let left: Vec<_> = mesh
            .neumann_facets()
            .iter()
            .filter(|f| f.normal == [-1.0, 0.0])
            .collect();
        assert_eq!(left.len(), 8);
    }

    #[test]
    fn jump_definition() {
        let mesh = build_rod_mesh(2.0, 2, 1.0).unwrap();
        assert_eq!(jump(&mesh, &[0.0, 1.0, 3.0, 5.0]).unwrap()[0][0], 2.0);
        assert_eq!(jump(&mesh, &[7.0; 4]).unwrap()[0][0], 0.0);
        assert!(jump(&mesh, &[0.0; 3]).is_err());
    }

    #[test]
    fn elements_reference_correct_twins() {
        let mesh =
            build_rect_mesh_with_crack(4.0, 4.0, 8, 8, (0.0, 1.0), &[Side::Bottom, Side::Top])
                .unwrap();
        for q in mesh.interface_nodes().iter().filter(|q| !q.is_tip()) {
            for (e, nodes) in mesh.elements().iter().enumerate() {
                let cy = mesh.element_centroid(e)[1];
                if nodes.contains(&q.plus) {
                    assert!(cy > 0.0);
                }
                if nodes.contains(&q.minus) {
                    assert!(cy < 0.0);
                }
            }
        }
    }

    #[test]
    fn snapshot_serializes() {
        let mesh = build_rod_mesh(2.0, 2, 1.0).unwrap();
        let s = serde_json::to_string(&mesh.snapshot()).unwrap();
        let back: MeshSnapshot = serde_json::from_str(&s).unwrap();
        assert_eq!(back.nodes.len(), 4);
        assert_eq!(back.interface_pairs[0].plus, 2);
    }
}
