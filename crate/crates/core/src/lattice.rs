//! Finite simple graphs, cylinder lattices, vertex sets and symmetry groups.
//!
//! Vertices are dense ids `0..n`. Cylinder vertices are ordered
//! lexicographically by `(x1, x_hat)`, which is the canonical order used by
//! enumeration and tie-breaking elsewhere in the crate.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SrpError};

/// Default cap on the number of vertices a constructed lattice may have.
pub const DEFAULT_VERTEX_CAP: usize = 1 << 20;

/// A subset of a parent graph's vertices, stored as a bitmap.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexSet {
    universe: usize,
    words: Vec<u64>,
}

impl VertexSet {
    pub fn empty(universe: usize) -> Self {
        VertexSet {
            universe,
            words: vec![0; universe.div_ceil(64)],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = Self::empty(universe);
        for v in 0..universe {
            s.insert(v);
        }
        s
    }

    pub fn from_iter<I: IntoIterator<Item = usize>>(universe: usize, items: I) -> Self {
        let mut s = Self::empty(universe);
        for v in items {
            s.insert(v);
        }
        s
    }

    /// Builds a set from the low `universe` bits of `mask` (universe <= 64).
    pub fn from_mask(universe: usize, mask: u64) -> Self {
        assert!(universe <= 64, "mask sets need a universe of at most 64");
        let mut s = Self::empty(universe);
        if universe > 0 {
            let keep = if universe == 64 {
                u64::MAX
            } else {
                (1u64 << universe) - 1
            };
            s.words[0] = mask & keep;
        }
        s
    }

    /// The set as a bitmask; only valid for universes of at most 64 vertices.
    pub fn to_mask(&self) -> u64 {
        assert!(self.universe <= 64, "mask view needs a universe of at most 64");
        self.words.first().copied().unwrap_or(0)
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn contains(&self, v: usize) -> bool {
        v < self.universe && self.words[v / 64] & (1u64 << (v % 64)) != 0
    }

    /// Inserts `v`; returns true if it was not present.
    pub fn insert(&mut self, v: usize) -> bool {
        assert!(v < self.universe, "vertex {v} outside universe {}", self.universe);
        let was = self.contains(v);
        self.words[v / 64] |= 1u64 << (v % 64);
        !was
    }

    pub fn remove(&mut self, v: usize) -> bool {
        let was = self.contains(v);
        if was {
            self.words[v / 64] &= !(1u64 << (v % 64));
        }
        was
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(i * 64 + b)
                }
            })
        })
    }

    /// Smallest member in canonical vertex order.
    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    fn check_universe(&self, other: &VertexSet) {
        assert_eq!(self.universe, other.universe, "vertex sets over different universes");
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        self.check_universe(other);
        VertexSet {
            universe: self.universe,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn intersection(&self, other: &VertexSet) -> VertexSet {
        self.check_universe(other);
        VertexSet {
            universe: self.universe,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn difference(&self, other: &VertexSet) -> VertexSet {
        self.check_universe(other);
        VertexSet {
            universe: self.universe,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
        }
    }

    pub fn complement(&self) -> VertexSet {
        VertexSet::full(self.universe).difference(self)
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.check_universe(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        self.check_universe(other);
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn union_with(&mut self, other: &VertexSet) {
        self.check_universe(other);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A finite simple graph with sorted adjacency lists and optional coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    coords: Option<Vec<Vec<i64>>>,
}

/// JSON exchange format for graphs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<i64>>>,
}

impl Graph {
    /// Builds a simple graph; duplicate edges are merged, self-loops rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(SrpError::InvalidGraph(format!(
                    "edge ({u},{v}) out of range for {n} vertices"
                )));
            }
            if u == v {
                return Err(SrpError::InvalidGraph(format!("self-loop at {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph {
            adjacency,
            coords: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<Vec<i64>>) -> Result<Graph> {
        if coords.len() != self.vertex_count() {
            return Err(SrpError::InvalidGraph(format!(
                "{} coordinate tags for {} vertices",
                coords.len(),
                self.vertex_count()
            )));
        }
        self.coords = Some(coords);
        Ok(self)
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, &edges).expect("complete graph edges are valid")
    }

    pub fn cycle(n: usize) -> Graph {
        assert!(n >= 3, "a simple cycle needs at least 3 vertices");
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).expect("cycle edges are valid")
    }

    /// Open `rows x cols` grid; vertex `r * cols + c` carries coordinates `[r, c]`.
    pub fn grid(rows: usize, cols: usize) -> Graph {
        let id = |r: usize, c: usize| r * cols + c;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        let coords = (0..rows * cols)
            .map(|v| vec![(v / cols) as i64, (v % cols) as i64])
            .collect();
        Graph::from_edges(rows * cols, &edges)
            .and_then(|g| g.with_coords(coords))
            .expect("grid edges are valid")
    }

    /// Square patch `[-radius, radius]^2` of Z^2; returns the graph and the centre.
    pub fn square_patch(radius: usize) -> (Graph, usize) {
        let side = 2 * radius + 1;
        let g = Graph::grid(side, side);
        (g, radius * side + radius)
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.vertex_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// `true` if `v == u` or `{u, v}` is an edge.
    pub fn is_step(&self, u: usize, v: usize) -> bool {
        u == v || self.has_edge(u, v)
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn coords(&self) -> Option<&[Vec<i64>]> {
        self.coords.as_deref()
    }

    pub fn all_vertices(&self) -> VertexSet {
        VertexSet::full(self.vertex_count())
    }

    /// Full-scan check of simplicity, symmetry and sortedness.
    pub fn validate(&self) -> Result<()> {
        for (u, list) in self.adjacency.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SrpError::InvalidGraph(format!("neighbors of {u} not strictly sorted")));
            }
            for &v in list {
                if v == u {
                    return Err(SrpError::InvalidGraph(format!("self-loop at {u}")));
                }
                if !self.has_edge(v, u) {
                    return Err(SrpError::InvalidGraph(format!("edge {u}->{v} not symmetric")));
                }
            }
        }
        Ok(())
    }

    /// Subgraph induced by `set`, plus the map from local to parent ids.
    pub fn induced(&self, set: &VertexSet) -> (Graph, Vec<usize>) {
        let members = set.to_vec();
        let mut local = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in members.iter().enumerate() {
            local[v] = i;
        }
        let adjacency = members
            .iter()
            .map(|&v| {
                self.adjacency[v]
                    .iter()
                    .filter(|&&w| set.contains(w))
                    .map(|&w| local[w])
                    .collect()
            })
            .collect();
        let coords = self
            .coords
            .as_ref()
            .map(|c| members.iter().map(|&v| c[v].clone()).collect());
        (Graph { adjacency, coords }, members)
    }

    /// Disjoint union; vertices of `other` are shifted by `self.vertex_count()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let shift = self.vertex_count();
        let mut adjacency = self.adjacency.clone();
        adjacency.extend(
            other
                .adjacency
                .iter()
                .map(|list| list.iter().map(|&v| v + shift).collect()),
        );
        let coords = match (&self.coords, &other.coords) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        Graph { adjacency, coords }
    }

    /// Stable content hash (SHA-256 over vertex count and sorted edge list).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.vertex_count() as u64).to_le_bytes());
        for (u, v) in self.edges() {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.vertex_count(),
            edges: self.edges().map(|(u, v)| [u, v]).collect(),
            coords: self.coords.clone(),
        }
    }

    pub fn from_json(json: &GraphJson) -> Result<Graph> {
        let edges: Vec<_> = json.edges.iter().map(|e| (e[0], e[1])).collect();
        let g = Graph::from_edges(json.n, &edges)?;
        match &json.coords {
            Some(c) => g.with_coords(c.clone()),
            None => Ok(g),
        }
    }
}

/// A graph distance; `None` encodes "infinite" (different components).
pub type Distance = Option<usize>;

/// Minimum BFS distance between two nonempty vertex sets.
pub fn graph_distance(g: &Graph, a: &VertexSet, b: &VertexSet) -> Result<Distance> {
    if a.is_empty() || b.is_empty() {
        return Err(SrpError::Argument("graph_distance needs nonempty sets".into()));
    }
    let (from, to) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut dist = vec![usize::MAX; g.vertex_count()];
    let mut queue = VecDeque::new();
    for v in from.iter() {
        if to.contains(v) {
            return Ok(Some(0));
        }
        dist[v] = 0;
        queue.push_back(v);
    }
    while let Some(u) = queue.pop_front() {
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                if to.contains(w) {
                    return Ok(Some(dist[w]));
                }
                queue.push_back(w);
            }
        }
    }
    Ok(None)
}

/// Distances from every vertex to the nearest member of `sources`.
pub fn distances_from(g: &Graph, sources: &VertexSet) -> Vec<Distance> {
    let mut dist = vec![None; g.vertex_count()];
    let mut queue = VecDeque::new();
    for v in sources.iter() {
        dist[v] = Some(0);
        queue.push_back(v);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued vertices have distances");
        for &w in g.neighbors(u) {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// A group of graph automorphisms, stored as explicit permutation arrays.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetryGroup {
    elements: Vec<Vec<usize>>,
}

impl SymmetryGroup {
    pub fn trivial(n: usize) -> Self {
        SymmetryGroup {
            elements: vec![(0..n).collect()],
        }
    }

    /// Closes `generators` under composition after checking each is an automorphism.
    pub fn generate(g: &Graph, generators: &[Vec<usize>]) -> Result<Self> {
        let n = g.vertex_count();
        for gen in generators {
            if !is_automorphism(g, gen) {
                return Err(SrpError::Argument(format!("generator {gen:?} is not an automorphism")));
            }
        }
        let identity: Vec<usize> = (0..n).collect();
        let mut seen: HashSet<Vec<usize>> = HashSet::new();
        seen.insert(identity.clone());
        let mut elements = vec![identity];
        let mut frontier = 0;
        while frontier < elements.len() {
            let current = elements[frontier].clone();
            frontier += 1;
            for gen in generators {
                let product: Vec<usize> = current.iter().map(|&v| gen[v]).collect();
                if seen.insert(product.clone()) {
                    elements.push(product);
                }
            }
        }
        Ok(SymmetryGroup { elements })
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// `Phi(A)`: the union of all images of `set`.
    pub fn symmetrize(&self, set: &VertexSet) -> VertexSet {
        let mut out = VertexSet::empty(set.universe());
        for phi in &self.elements {
            for v in set.iter() {
                out.insert(phi[v]);
            }
        }
        out
    }

    pub fn is_compatible(&self, set: &VertexSet) -> bool {
        self.elements.iter().all(|phi| set.iter().all(|v| set.contains(phi[v])))
    }

    /// Checks closure under composition and inverses, identity and automorphism property.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let n = g.vertex_count();
        let set: HashSet<&Vec<usize>> = self.elements.iter().collect();
        let identity: Vec<usize> = (0..n).collect();
        if !set.contains(&identity) {
            return Err(SrpError::InvariantViolation("group lacks identity".into()));
        }
        for a in &self.elements {
            if !is_automorphism(g, a) {
                return Err(SrpError::InvariantViolation(format!("{a:?} is not an automorphism")));
            }
            let mut inv = vec![0; n];
            for (x, &y) in a.iter().enumerate() {
                inv[y] = x;
            }
            if !set.contains(&inv) {
                return Err(SrpError::InvariantViolation("group not closed under inverse".into()));
            }
            for b in &self.elements {
                let ab: Vec<usize> = (0..n).map(|x| a[b[x]]).collect();
                if !set.contains(&ab) {
                    return Err(SrpError::InvariantViolation(
                        "group not closed under composition".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `phi` is a bijection with `{x,y}` an edge iff `{phi x, phi y}` is.
pub fn is_automorphism(g: &Graph, phi: &[usize]) -> bool {
    let n = g.vertex_count();
    if phi.len() != n {
        return false;
    }
    let mut hit = vec![false; n];
    for &y in phi {
        if y >= n || hit[y] {
            return false;
        }
        hit[y] = true;
    }
    (0..n).all(|x| {
        let mut mapped: Vec<usize> = g.neighbors(x).iter().map(|&y| phi[y]).collect();
        mapped.sort_unstable();
        mapped == g.neighbors(phi[x])
    })
}

/// Disjoint union of two copies of `g` with the copy-swapping involution.
pub fn doubled_graph(g: &Graph) -> (Graph, SymmetryGroup) {
    let n = g.vertex_count();
    let doubled = g.disjoint_union(g);
    let swap: Vec<usize> = (0..2 * n).map(|v| if v < n { v + n } else { v - n }).collect();
    let group = SymmetryGroup::generate(&doubled, &[swap]).expect("copy swap is an automorphism");
    (doubled, group)
}

/// Cylinder `[0, length] x T^{d-1}` with transverse period `width`.
///
/// `Lambda_n` is `length = width = n`. Transverse coordinates live in
/// `(-width/2, width/2]`. A period-2 wrap would produce a doubled edge; it is
/// merged so the graph stays simple.
#[derive(Clone, Debug)]
pub struct CylinderLattice {
    length: usize,
    width: usize,
    dim: usize,
    graph: Graph,
    lo: i64,
    regen_scale: usize,
}

impl CylinderLattice {
    /// `Lambda_n` in dimension `d` with the default vertex cap.
    pub fn build(n: usize, d: usize) -> Result<Self> {
        Self::with_cap(n, d, DEFAULT_VERTEX_CAP)
    }

    pub fn with_cap(n: usize, d: usize, cap: usize) -> Result<Self> {
        if n < 2 {
            return Err(SrpError::Argument(format!("cylinder side n={n} must be >= 2")));
        }
        Self::rect(n, n, d, cap)
    }

    /// General cylinder with `x1 in [0, length]` and transverse period `width`.
    pub fn rect(length: usize, width: usize, d: usize, cap: usize) -> Result<Self> {
        if d < 2 {
            return Err(SrpError::Argument(format!("cylinder dimension d={d} must be >= 2")));
        }
        if width == 0 {
            return Err(SrpError::Argument("cylinder width must be positive".into()));
        }
        let slice = (width as u64)
            .checked_pow((d - 1) as u32)
            .ok_or_else(|| SrpError::capacity("cylinder vertices", u64::MAX, cap as u64))?;
        let count = slice.saturating_mul(length as u64 + 1);
        if count > cap as u64 {
            return Err(SrpError::capacity("cylinder vertices", count, cap as u64));
        }
        let count = count as usize;
        let slice = slice as usize;
        let lo = (-(width as i64)).div_euclid(2) + 1;
        let mut coords = Vec::with_capacity(count);
        for v in 0..count {
            let x1 = (v / slice) as i64;
            let mut rest = v % slice;
            let mut c = vec![0i64; d];
            c[0] = x1;
            for i in (1..d).rev() {
                c[i] = lo + (rest % width) as i64;
                rest /= width;
            }
            coords.push(c);
        }
        let mut lat = CylinderLattice {
            length,
            width,
            dim: d,
            graph: Graph {
                adjacency: vec![Vec::new(); count],
                coords: None,
            },
            lo,
            regen_scale: ceil_ln(length.max(1)),
        };
        let mut edges = Vec::new();
        for v in 0..count {
            let c = &coords[v];
            if (c[0] as usize) < length {
                let mut up = c.clone();
                up[0] += 1;
                edges.push((v, lat.index_of(&up).expect("in range")));
            }
            for i in 1..d {
                let mut nb = c.clone();
                nb[i] = lat.wrap(c[i] + 1);
                let w = lat.index_of(&nb).expect("in range");
                if w != v {
                    edges.push((v, w));
                }
            }
        }
        lat.graph = Graph::from_edges(count, &edges)?.with_coords(coords)?;
        Ok(lat)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// Integer width used wherever a `log n` threshold is needed (default `ceil(ln length)`).
    pub fn regen_scale(&self) -> usize {
        self.regen_scale
    }

    pub fn set_regen_scale(&mut self, scale: usize) {
        self.regen_scale = scale.max(1);
    }

    /// Switches the regeneration scale to `ceil(log2 length)`.
    pub fn use_log2_scale(&mut self) {
        let l = self.length.max(2) as f64;
        self.regen_scale = (l.log2().ceil() as usize).max(1);
    }

    /// Lowest transverse coordinate value.
    pub fn transverse_lo(&self) -> i64 {
        self.lo
    }

    pub fn wrap(&self, t: i64) -> i64 {
        self.lo + (t - self.lo).rem_euclid(self.width as i64)
    }

    pub fn index_of(&self, coord: &[i64]) -> Option<usize> {
        if coord.len() != self.dim || coord[0] < 0 || coord[0] as usize > self.length {
            return None;
        }
        let mut idx = coord[0] as usize;
        for &t in &coord[1..] {
            let off = t - self.lo;
            if off < 0 || off as usize >= self.width {
                return None;
            }
            idx = idx * self.width + off as usize;
        }
        Some(idx)
    }

    pub fn coord(&self, v: usize) -> &[i64] {
        &self.graph.coords.as_ref().expect("cylinder has coordinates")[v]
    }

    pub fn x1(&self, v: usize) -> i64 {
        self.coord(v)[0]
    }

    pub fn transverse(&self, v: usize) -> &[i64] {
        &self.coord(v)[1..]
    }

    /// Vertex at `x1 = 0` on the axis `x_hat = 0`.
    pub fn origin(&self) -> usize {
        let mut c = vec![0i64; self.dim];
        c[0] = 0;
        self.index_of(&c).expect("origin exists")
    }

    /// Hyperplane `{x : x1 = j}`.
    pub fn hyperplane(&self, j: usize) -> VertexSet {
        let slice = self.vertex_count() / (self.length + 1);
        VertexSet::from_iter(self.vertex_count(), j * slice..(j + 1) * slice)
    }

    /// Signed minimal-image difference `b - a` in one transverse coordinate.
    pub fn transverse_delta(&self, a: i64, b: i64) -> i64 {
        let w = self.width as i64;
        let mut d = (b - a).rem_euclid(w);
        if d > w / 2 {
            d -= w;
        }
        d
    }

    /// Toroidal l-infinity distance between the transverse parts of `u` and `v`.
    pub fn transverse_distance(&self, u: usize, v: usize) -> i64 {
        self.transverse(u)
            .iter()
            .zip(self.transverse(v))
            .map(|(&a, &b)| self.transverse_delta(a, b).abs())
            .max()
            .unwrap_or(0)
    }

    /// Expected degree: `2d` minus the `x1` boundary deficit, with the transverse
    /// contribution capped by the period (1 neighbour per coordinate when width 2,
    /// none when width 1).
    pub fn expected_degree(&self, v: usize) -> usize {
        let x1 = self.x1(v) as usize;
        let mut deg = 0;
        if self.length > 0 {
            deg += usize::from(x1 > 0) + usize::from(x1 < self.length);
        }
        let per_coord = match self.width {
            1 => 0,
            2 => 1,
            _ => 2,
        };
        deg + per_coord * (self.dim - 1)
    }

    /// Reflection `x_hat_i -> 2 axis_i - x_hat_i` in transverse coordinate `i` (1-based).
    pub fn reflection(&self, axis: usize, coordinate: usize) -> Vec<usize> {
        let centre = self.coord(axis)[coordinate];
        (0..self.vertex_count())
            .map(|v| {
                let mut c = self.coord(v).to_vec();
                c[coordinate] = self.wrap(2 * centre - c[coordinate]);
                self.index_of(&c).expect("reflected coordinate in range")
            })
            .collect()
    }
}

fn ceil_ln(n: usize) -> usize {
    ((n as f64).ln().ceil() as usize).max(1)
}

/// Group generated by the `d - 1` transverse reflections through `axis_point`.
///
/// On the discrete torus `t -> 2c - t (mod width)` is always an automorphism,
/// so every axis admits these reflections.
pub fn reflection_group(lat: &CylinderLattice, axis_point: usize) -> SymmetryGroup {
    let generators: Vec<Vec<usize>> = (1..lat.dim()).map(|i| lat.reflection(axis_point, i)).collect();
    SymmetryGroup::generate(lat.graph(), &generators).expect("transverse reflections are automorphisms")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_2x2_has_six_vertices_with_deduplicated_wrap() {
        let lat = CylinderLattice::build(2, 2).unwrap();
        assert_eq!(lat.vertex_count(), 6);
        let o = lat.index_of(&[0, 0]).unwrap();
        let right = lat.index_of(&[1, 0]).unwrap();
        let up = lat.index_of(&[0, 1]).unwrap();
        assert_eq!(lat.graph().neighbors(o), &[up, right]);
        lat.graph().validate().unwrap();
    }

    #[test]
    fn transverse_wrap_distance() {
        let lat = CylinderLattice::build(4, 2).unwrap();
        let a = VertexSet::from_iter(lat.vertex_count(), [lat.index_of(&[0, 2]).unwrap()]);
        let b = VertexSet::from_iter(lat.vertex_count(), [lat.index_of(&[0, -1]).unwrap()]);
        assert_eq!(graph_distance(lat.graph(), &a, &b).unwrap(), Some(1));
    }

    #[test]
    fn cylinder_cap_is_enforced() {
        assert!(CylinderLattice::with_cap(2, 5, 1000).is_ok());
        let err = CylinderLattice::with_cap(2, 5, 40).unwrap_err();
        assert!(err.is_capacity());
    }

    #[test]
    fn cylinder_degrees_and_hyperplanes() {
        for (n, d) in [(2, 2), (3, 2), (4, 2), (3, 3), (4, 3), (2, 3)] {
            let lat = CylinderLattice::build(n, d).unwrap();
            lat.graph().validate().unwrap();
            for v in 0..lat.vertex_count() {
                assert_eq!(lat.graph().degree(v), lat.expected_degree(v), "n={n} d={d} v={v}");
            }
            for j in 0..=n {
                assert_eq!(lat.hyperplane(j).len(), n.pow((d - 1) as u32));
            }
            if n >= 3 {
                // away from the ends, the full 2d neighbourhood is present
                let mid = lat.hyperplane(1).first().unwrap();
                assert_eq!(lat.graph().degree(mid), 2 * d);
            }
        }
    }

    #[test]
    fn distance_cases() {
        let g = Graph::path(3);
        let s = |v: usize| VertexSet::from_iter(3, [v]);
        assert_eq!(graph_distance(&g, &s(1), &s(1)).unwrap(), Some(0));
        assert_eq!(graph_distance(&g, &s(0), &s(2)).unwrap(), Some(2));
        let two = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let a = VertexSet::from_iter(4, [0]);
        let b = VertexSet::from_iter(4, [3]);
        assert_eq!(graph_distance(&two, &a, &b).unwrap(), None);
        assert!(graph_distance(&two, &VertexSet::empty(4), &b).is_err());
    }

    #[test]
    fn distance_is_a_metric_on_small_graphs() {
        for g in [
            Graph::grid(3, 3),
            Graph::path(5),
            CylinderLattice::build(3, 2).unwrap().graph().clone(),
        ] {
            let n = g.vertex_count();
            let d = |a: usize, b: usize| {
                graph_distance(&g, &VertexSet::from_iter(n, [a]), &VertexSet::from_iter(n, [b]))
                    .unwrap()
                    .unwrap()
            };
            for x in 0..n {
                for y in 0..n {
                    assert_eq!(d(x, y), d(y, x));
                    for z in 0..n {
                        assert!(d(x, z) <= d(x, y) + d(y, z));
                    }
                }
            }
        }
    }

    #[test]
    fn doubled_k2() {
        let (g, phi) = doubled_graph(&Graph::complete(2));
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(phi.order(), 2);
        let swap = phi.elements().iter().find(|e| e[0] != 0).unwrap();
        assert_eq!(swap, &vec![2, 3, 0, 1]);
        phi.validate(&g).unwrap();
    }

    #[test]
    fn doubled_square_counts() {
        let (g, phi) = doubled_graph(&Graph::grid(2, 2));
        assert_eq!(g.vertex_count(), 8);
        assert_eq!(g.edge_count(), 8);
        for e in phi.elements() {
            let twice: Vec<usize> = e.iter().map(|&v| e[v]).collect();
            assert_eq!(twice, (0..8).collect::<Vec<_>>());
        }
    }

    #[test]
    fn reflection_groups() {
        let lat = CylinderLattice::build(4, 2).unwrap();
        let grp = reflection_group(&lat, lat.origin());
        assert_eq!(grp.order(), 2);
        grp.validate(lat.graph()).unwrap();
        let r = lat.reflection(lat.origin(), 1);
        for v in 0..lat.vertex_count() {
            assert_eq!(r[r[v]], v);
        }
        let lat3 = CylinderLattice::build(3, 3).unwrap();
        let grp3 = reflection_group(&lat3, lat3.origin());
        assert_eq!(grp3.order(), 4);
        grp3.validate(lat3.graph()).unwrap();
        // off-centre axis on an even period is still an automorphism
        let off = lat.index_of(&[1, 1]).unwrap();
        reflection_group(&lat, off).validate(lat.graph()).unwrap();
    }

    #[test]
    fn json_round_trip() {
        let g = Graph::grid(2, 3);
        let json = serde_json::to_string(&g.to_json()).unwrap();
        let back = Graph::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.content_hash(), g.content_hash());
    }

    #[test]
    fn vertex_set_ops() {
        let a = VertexSet::from_iter(70, [1, 65, 3]);
        let b = VertexSet::from_iter(70, [3, 4]);
        assert_eq!(a.union(&b).to_vec(), vec![1, 3, 4, 65]);
        assert_eq!(a.intersection(&b).to_vec(), vec![3]);
        assert_eq!(a.difference(&b).to_vec(), vec![1, 65]);
        assert_eq!(a.complement().len(), 67);
        assert!(VertexSet::from_iter(70, [3]).is_subset(&a));
        let m = VertexSet::from_mask(5, 0b10110);
        assert_eq!(m.to_vec(), vec![1, 2, 4]);
        assert_eq!(m.to_mask(), 0b10110);
    }
}
