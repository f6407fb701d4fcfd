//! Permutation configurations: closed-model permutations, cycles, orbits and
//! the forced open-cycle configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrpError};
use crate::lattice::{Graph, VertexSet};

/// A bijection of the vertex set with every point fixed or moved to a neighbour.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphPermutation {
    image: Vec<usize>,
    preimage: Vec<usize>,
}

/// Serialized permutation: the image array plus the parent graph's content hash.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PermutationJson {
    pub graph_hash: String,
    pub image: Vec<usize>,
}

impl GraphPermutation {
    pub fn identity(n: usize) -> Self {
        GraphPermutation {
            image: (0..n).collect(),
            preimage: (0..n).collect(),
        }
    }

    /// Validates bijectivity and the nearest-neighbour-or-fixed constraint.
    pub fn new(g: &Graph, image: Vec<usize>) -> Result<Self> {
        let n = g.vertex_count();
        if image.len() != n {
            return Err(SrpError::InvalidPermutation(format!(
                "image has {} entries for {} vertices",
                image.len(),
                n
            )));
        }
        let mut preimage = vec![usize::MAX; n];
        for (x, &y) in image.iter().enumerate() {
            if y >= n {
                return Err(SrpError::InvalidPermutation(format!("image {y} of {x} out of range")));
            }
            if preimage[y] != usize::MAX {
                return Err(SrpError::InvalidPermutation(format!(
                    "{y} is the image of both {} and {x}",
                    preimage[y]
                )));
            }
            if !g.is_step(x, y) {
                return Err(SrpError::InvalidPermutation(format!("{x} -> {y} is not a graph step")));
            }
            preimage[y] = x;
        }
        Ok(GraphPermutation { image, preimage })
    }

    /// Builds from an image array already known to be valid.
    pub(crate) fn from_image_unchecked(image: Vec<usize>) -> Self {
        let mut preimage = vec![0; image.len()];
        for (x, &y) in image.iter().enumerate() {
            preimage[y] = x;
        }
        GraphPermutation { image, preimage }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    pub fn image(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn preimage(&self, y: usize) -> usize {
        self.preimage[y]
    }

    pub fn images(&self) -> &[usize] {
        &self.image
    }

    /// Number of displaced points.
    pub fn energy(&self) -> usize {
        self.image.iter().enumerate().filter(|&(x, &y)| x != y).count()
    }

    /// Energy restricted to a vertex set.
    pub fn energy_on(&self, set: &VertexSet) -> usize {
        set.iter().filter(|&x| self.image[x] != x).count()
    }

    /// The cycle through `z`, listed in iteration order starting at `z`.
    pub fn cycle_of(&self, z: usize) -> CyclePath {
        let mut vertices = vec![z];
        let mut x = self.image[z];
        while x != z {
            vertices.push(x);
            x = self.image[x];
        }
        CyclePath { vertices, closed: true }
    }

    /// Cycle decomposition, each cycle starting at its smallest vertex.
    pub fn cycles(&self) -> Vec<CyclePath> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for z in 0..self.len() {
            if !seen[z] {
                let c = self.cycle_of(z);
                for &v in &c.vertices {
                    seen[v] = true;
                }
                out.push(c);
            }
        }
        out
    }

    /// `Or(A)`: union of the cycles meeting `set`.
    pub fn orbit(&self, set: &VertexSet) -> VertexSet {
        let mut out = VertexSet::empty(set.universe());
        for x in set.iter() {
            if out.contains(x) {
                continue;
            }
            let mut y = x;
            loop {
                out.insert(y);
                y = self.image[y];
                if y == x {
                    break;
                }
            }
        }
        out
    }

    /// `pi(set) == set`.
    pub fn is_invariant(&self, set: &VertexSet) -> bool {
        set.iter().all(|x| set.contains(self.image[x]))
    }

    /// Permutation that agrees with `pieces[i]` on each block of a partition.
    pub fn assemble(n: usize, pieces: &[(VertexSet, GraphPermutation)]) -> Result<Self> {
        let mut image = vec![usize::MAX; n];
        for (block, perm) in pieces {
            for x in block.iter() {
                if image[x] != usize::MAX {
                    return Err(SrpError::InvariantViolation(format!("{x} covered twice")));
                }
                image[x] = perm.image(x);
            }
        }
        if let Some(x) = image.iter().position(|&y| y == usize::MAX) {
            return Err(SrpError::InvariantViolation(format!("{x} not covered by any block")));
        }
        let mut hit = vec![false; n];
        for &y in &image {
            if hit[y] {
                return Err(SrpError::InvariantViolation("assembled map is not a bijection".into()));
            }
            hit[y] = true;
        }
        Ok(Self::from_image_unchecked(image))
    }

    /// Embeds a permutation of an induced subgraph (local ids `0..members.len()`)
    /// into the parent with identity outside.
    pub fn embed(n: usize, members: &[usize], local: &GraphPermutation) -> Self {
        let mut image: Vec<usize> = (0..n).collect();
        for (i, &v) in members.iter().enumerate() {
            image[v] = members[local.image(i)];
        }
        Self::from_image_unchecked(image)
    }

    /// `pi` on `set` and the identity elsewhere; `set` must be invariant.
    pub fn restrict(&self, set: &VertexSet) -> Self {
        let image = (0..self.len())
            .map(|x| if set.contains(x) { self.image[x] } else { x })
            .collect();
        Self::from_image_unchecked(image)
    }

    pub fn to_json(&self, g: &Graph) -> PermutationJson {
        PermutationJson {
            graph_hash: g.content_hash(),
            image: self.image.clone(),
        }
    }

    pub fn from_json(g: &Graph, json: &PermutationJson) -> Result<Self> {
        if json.graph_hash != g.content_hash() {
            return Err(SrpError::InvalidPermutation("graph hash mismatch".into()));
        }
        Self::new(g, json.image.clone())
    }
}

/// An ordered vertex sequence forming a cycle (closed) or walk (open).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CyclePath {
    pub vertices: Vec<usize>,
    pub closed: bool,
}

impl CyclePath {
    /// Edge count: vertex count for a closed cycle of at least two vertices,
    /// vertex count minus one for a walk, zero for a singleton.
    pub fn length(&self) -> usize {
        match self.vertices.len() {
            0 | 1 => 0,
            k if self.closed => k,
            k => k - 1,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn first(&self) -> usize {
        self.vertices[0]
    }

    pub fn last(&self) -> usize {
        *self.vertices.last().expect("paths are nonempty")
    }

    pub fn to_set(&self, universe: usize) -> VertexSet {
        VertexSet::from_iter(universe, self.vertices.iter().copied())
    }

    /// Checks adjacency, distinctness and closure.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        if self.vertices.is_empty() {
            return Err(SrpError::InvariantViolation("empty path".into()));
        }
        let mut seen = VertexSet::empty(g.vertex_count());
        for &v in &self.vertices {
            if !seen.insert(v) {
                return Err(SrpError::InvariantViolation(format!("vertex {v} repeated")));
            }
        }
        for w in self.vertices.windows(2) {
            if !g.has_edge(w[0], w[1]) {
                return Err(SrpError::InvariantViolation(format!("{} !~ {}", w[0], w[1])));
            }
        }
        if self.closed && self.vertices.len() > 1 && !g.has_edge(self.last(), self.first()) {
            return Err(SrpError::InvariantViolation("cycle does not close".into()));
        }
        Ok(())
    }
}

/// A configuration of the forced open-cycle model: `pi` maps `A \ {z}` onto
/// `A \ {a}`, fixes `z`, and the orbit of `a` is a self-avoiding walk to `z`.
///
/// `image` has one entry per parent vertex; entries outside the domain are identity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OpenCycleConfig {
    image: Vec<usize>,
    domain: VertexSet,
    source: usize,
    sink: usize,
}

impl OpenCycleConfig {
    pub fn new(g: &Graph, domain: VertexSet, source: usize, sink: usize, image: Vec<usize>) -> Result<Self> {
        let n = g.vertex_count();
        if image.len() != n || domain.universe() != n {
            return Err(SrpError::InvalidPermutation("size mismatch with parent graph".into()));
        }
        if source == sink {
            return Err(SrpError::Argument("source and sink coincide".into()));
        }
        if !domain.contains(source) || !domain.contains(sink) {
            return Err(SrpError::InvalidPermutation(
                "source and sink must lie in the domain".into(),
            ));
        }
        if image[sink] != sink {
            return Err(SrpError::InvalidPermutation("sink is not fixed".into()));
        }
        let mut hit = vec![false; n];
        for x in 0..n {
            let y = image[x];
            if !domain.contains(x) {
                if y != x {
                    return Err(SrpError::InvalidPermutation(format!("{x} outside domain moves")));
                }
                continue;
            }
            if x == sink {
                continue;
            }
            if y >= n || !domain.contains(y) || y == source {
                return Err(SrpError::InvalidPermutation(format!("bad image {y} of {x}")));
            }
            if hit[y] {
                return Err(SrpError::InvalidPermutation(format!("{y} hit twice")));
            }
            hit[y] = true;
            if !g.is_step(x, y) {
                return Err(SrpError::InvalidPermutation(format!("{x} -> {y} is not a graph step")));
            }
        }
        let c = OpenCycleConfig {
            image,
            domain,
            source,
            sink,
        };
        c.walk_of()?;
        Ok(c)
    }

    pub(crate) fn from_parts_unchecked(image: Vec<usize>, domain: VertexSet, source: usize, sink: usize) -> Self {
        OpenCycleConfig {
            image,
            domain,
            source,
            sink,
        }
    }

    pub fn image(&self, x: usize) -> usize {
        self.image[x]
    }

    pub fn images(&self) -> &[usize] {
        &self.image
    }

    pub fn domain(&self) -> &VertexSet {
        &self.domain
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Sum of step lengths over the domain; with nearest-neighbour steps this
    /// is the number of displaced points.
    pub fn open_energy(&self) -> usize {
        self.domain.iter().filter(|&x| self.image[x] != x).count()
    }

    /// The forced walk from the source to the sink.
    pub fn walk_of(&self) -> Result<CyclePath> {
        let mut vertices = vec![self.source];
        let mut x = self.source;
        while x != self.sink {
            x = self.image[x];
            if vertices.len() > self.domain.len() || x == self.source {
                return Err(SrpError::InvariantViolation(
                    "orbit of source never reaches sink".into(),
                ));
            }
            vertices.push(x);
        }
        Ok(CyclePath {
            vertices,
            closed: false,
        })
    }

    /// `pi_0`: identity on the walk, `pi` elsewhere.
    pub fn flatten_walk(&self) -> GraphPermutation {
        let walk = self.walk_of().expect("validated configs have a walk");
        let mut image = self.image.clone();
        for &v in &walk.vertices {
            image[v] = v;
        }
        GraphPermutation::from_image_unchecked(image)
    }

    /// `pi(set) ⊆ set`.
    pub fn is_almost_invariant(&self, set: &VertexSet) -> bool {
        set.iter().all(|x| set.contains(self.image[x]))
    }

    /// Orbit of `x` under `pi` (forward iteration until repeat or fixed point).
    pub fn forward_orbit(&self, x: usize) -> Vec<usize> {
        let mut out = vec![x];
        let mut y = self.image[x];
        while y != x && !out.contains(&y) {
            out.push(y);
            y = self.image[y];
        }
        out
    }
}
