//! Excitation graphs: syndrome defects as vertices, local moves as edges.
//!
//! A Pauli error lights a set of stabilizers. Each stabilizer is a vertex of
//! the excitation graph; an edge between two vertices carries a small Pauli
//! operator that toggles exactly those two syndrome bits, and an edge to the
//! distinguished boundary vertex `w` carries an operator toggling exactly one
//! bit. Multiplying the edge operators along a shortest path from every lit
//! vertex to `w` yields a deterministic removal operator `R` with the same
//! syndrome as the error `Q`, so `R·Q` commutes with the whole group and only
//! its logical class remains to be decided.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use thiserror::Error;

use crate::codes::{CodeKind, CodeLattice};
use crate::pauli::{Pauli, PauliOperator};

/// Excitation species hosted by a graph vertex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Species {
    /// Violation of an X-type stabilizer (lit by Z-like error components).
    Electric,
    /// Violation of a Z-type stabilizer (lit by X-like error components).
    Magnetic,
    /// Violation of a mixed-letter stabilizer (twisted-toric defect line).
    Mixed,
}

impl Species {
    pub fn name(self) -> &'static str {
        match self {
            Species::Electric => "electric",
            Species::Magnetic => "magnetic",
            Species::Mixed => "mixed",
        }
    }
}

/// One excitation site: the lattice face it lives on plus its species.
///
/// Vertex indices coincide with stabilizer generator indices, so syndrome bit
/// `i` lights vertex `i`; the boundary vertex `w` comes after all of them.
#[derive(Clone, Debug)]
pub struct ExVertex {
    pub face: usize,
    pub species: Species,
}

/// Undirected edge `{a, b}` (with `a < b`; `b` may be the boundary vertex)
/// labeled by the canonical move operator for that vertex pair.
#[derive(Clone, Debug)]
pub struct ExEdge {
    pub a: usize,
    pub b: usize,
    pub op: PauliOperator,
}

/// A set of excitation vertices, i.e. the lit bits of one syndrome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExcitationConfig {
    /// Vertex indices in ascending order.
    pub vertices: Vec<usize>,
}

impl ExcitationConfig {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("lattice failed validation: {0}")]
    InvalidLattice(String),
    #[error("syndrome has {got} bits but the graph has {expected} excitation vertices")]
    SyndromeLength { expected: usize, got: usize },
    #[error("vertex {0} is not connected to the boundary vertex")]
    Disconnected(usize),
    #[error("vertex index {0} out of range")]
    BadVertex(usize),
}

/// Excitation graph with precomputed shortest paths to the boundary vertex.
#[derive(Clone, Debug)]
pub struct ExcitationGraph {
    pub kind: CodeKind,
    pub distance: usize,
    /// Excitation vertices, indexed by stabilizer generator.
    pub vertices: Vec<ExVertex>,
    /// Index of the boundary vertex (== `vertices.len()`).
    pub w: usize,
    /// Edges sorted by `(a, b)`.
    pub edges: Vec<ExEdge>,
    num_qubits: usize,
    /// Per vertex (including `w`): `(neighbor, edge index)`, neighbors ascending.
    adjacency: Vec<Vec<(usize, usize)>>,
    /// BFS distance to `w` (0 at `w` itself).
    dist: Vec<u32>,
    /// Edge leading one step closer to `w`; `None` only at `w`.
    pred_edge: Vec<Option<usize>>,
}

/// All move-operator candidates for the lattice kind.
///
/// Color code: single-qubit and two-qubit operators of a single letter X or Z.
/// Staying letter-pure keeps the electric and magnetic subgraphs disjoint;
/// mixed letters could only connect the two species, which the color code's
/// anyon structure forbids. Twisted toric code: every single-qubit Pauli —
/// near the defect line Y moves are real and connect the species.
fn candidate_ops(lattice: &CodeLattice) -> Vec<PauliOperator> {
    let n = lattice.n();
    let mut ops = Vec::new();
    match lattice.kind {
        CodeKind::ColorCode => {
            for letter in [Pauli::X, Pauli::Z] {
                for q in 0..n {
                    ops.push(PauliOperator::single(n, q, letter));
                }
                for q1 in 0..n {
                    for q2 in q1 + 1..n {
                        let mut op = PauliOperator::single(n, q1, letter);
                        op.set(q2, letter);
                        ops.push(op);
                    }
                }
            }
        }
        CodeKind::TwistedToricCode => {
            for letter in [Pauli::X, Pauli::Y, Pauli::Z] {
                for q in 0..n {
                    ops.push(PauliOperator::single(n, q, letter));
                }
            }
        }
    }
    ops
}

/// Qubit-by-qubit lexicographic order with letters I < X < Y < Z.
fn lex_less(a: &PauliOperator, b: &PauliOperator) -> bool {
    for q in 0..a.num_qubits() {
        let (la, lb) = (a.get(q), b.get(q));
        if la != lb {
            return la < lb;
        }
    }
    false
}

/// Build the excitation graph of a validated lattice.
pub fn build_graph(lattice: &CodeLattice) -> Result<ExcitationGraph, GraphError> {
    let report = lattice.validate();
    if !report.ok() {
        let names: Vec<&str> = report.failures().iter().map(|c| c.name).collect();
        return Err(GraphError::InvalidLattice(names.join(", ")));
    }
    let k = lattice.num_generators();
    let w = k;

    let mut face_of = vec![usize::MAX; k];
    for face in &lattice.faces {
        for &s in &face.stabilizers {
            face_of[s] = face.id;
        }
    }
    let vertices: Vec<ExVertex> = (0..k)
        .map(|i| {
            let gen = &lattice.stabilizers.generators[i];
            let (mut any_x, mut any_z) = (false, false);
            for q in 0..gen.num_qubits() {
                let (x, z) = gen.get(q).bits();
                any_x |= x;
                any_z |= z;
            }
            let species = match (any_x, any_z) {
                (true, false) => Species::Electric,
                (false, true) => Species::Magnetic,
                _ => Species::Mixed,
            };
            ExVertex { face: face_of[i], species }
        })
        .collect();

    // Candidate operators whose syndrome lights one vertex (boundary edge) or
    // two (internal edge); per vertex pair the lexicographically least
    // operator is kept as the canonical representative.
    let mut best: BTreeMap<(usize, usize), PauliOperator> = BTreeMap::new();
    for op in candidate_ops(lattice) {
        let syn = lattice.stabilizers.syndrome(&op);
        let lit: Vec<usize> = (0..k).filter(|&i| syn[i]).collect();
        let key = match lit.len() {
            1 => (lit[0], w),
            2 => (lit[0], lit[1]),
            _ => continue,
        };
        match best.get(&key) {
            Some(cur) if !lex_less(&op, cur) => {}
            _ => {
                best.insert(key, op);
            }
        }
    }
    let edges: Vec<ExEdge> = best
        .into_iter()
        .map(|((a, b), op)| ExEdge { a, b, op })
        .collect();

    let mut adjacency = vec![Vec::new(); k + 1];
    for (ei, e) in edges.iter().enumerate() {
        adjacency[e.a].push((e.b, ei));
        adjacency[e.b].push((e.a, ei));
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    // Unit-weight shortest paths from w; among equal-length paths the
    // lowest-index predecessor wins, so removal operators are canonical.
    let mut dist = vec![u32::MAX; k + 1];
    dist[w] = 0;
    let mut queue = VecDeque::from([w]);
    while let Some(v) = queue.pop_front() {
        for &(u, _) in &adjacency[v] {
            if dist[u] == u32::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    if let Some(v) = (0..k).find(|&v| dist[v] == u32::MAX) {
        return Err(GraphError::Disconnected(v));
    }
    let mut pred_edge = vec![None; k + 1];
    for v in 0..k {
        let target = dist[v] - 1;
        pred_edge[v] = adjacency[v]
            .iter()
            .find(|&&(u, _)| dist[u] == target)
            .map(|&(_, ei)| ei);
    }

    Ok(ExcitationGraph {
        kind: lattice.kind,
        distance: lattice.distance,
        vertices,
        w,
        edges,
        num_qubits: lattice.n(),
        adjacency,
        dist,
        pred_edge,
    })
}

impl ExcitationGraph {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// BFS distance from vertex `v` to the boundary vertex.
    pub fn distance_to_boundary(&self, v: usize) -> u32 {
        self.dist[v]
    }

    /// Distance table for all vertices (entry `w` is 0).
    pub fn distances(&self) -> &[u32] {
        &self.dist
    }

    /// Next vertex on the canonical shortest path to `w` (`None` at `w`).
    pub fn predecessor(&self, v: usize) -> Option<usize> {
        let e = &self.edges[self.pred_edge[v]?];
        Some(if e.a == v { e.b } else { e.a })
    }

    /// Neighbors of `v` as `(vertex, edge index)` pairs, ascending.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// Map a syndrome vector onto the set of lit vertices.
    pub fn excitations_from_syndrome(
        &self,
        syndrome: &[bool],
    ) -> Result<ExcitationConfig, GraphError> {
        if syndrome.len() != self.vertices.len() {
            return Err(GraphError::SyndromeLength {
                expected: self.vertices.len(),
                got: syndrome.len(),
            });
        }
        Ok(ExcitationConfig {
            vertices: (0..syndrome.len()).filter(|&i| syndrome[i]).collect(),
        })
    }

    /// Inverse of [`excitations_from_syndrome`](Self::excitations_from_syndrome).
    pub fn syndrome_from_excitations(
        &self,
        config: &ExcitationConfig,
    ) -> Result<Vec<bool>, GraphError> {
        let mut syndrome = vec![false; self.vertices.len()];
        for &v in &config.vertices {
            if v >= self.vertices.len() {
                return Err(GraphError::BadVertex(v));
            }
            syndrome[v] = true;
        }
        Ok(syndrome)
    }

    /// Product of edge operators along the canonical path from `u` to `w`;
    /// its syndrome lights exactly vertex `u`.
    pub fn path_operator(&self, u: usize) -> Result<PauliOperator, GraphError> {
        if u >= self.vertices.len() {
            return Err(GraphError::BadVertex(u));
        }
        let mut op = PauliOperator::identity(self.num_qubits);
        let mut v = u;
        while v != self.w {
            let ei = self.pred_edge[v].ok_or(GraphError::Disconnected(v))?;
            let e = &self.edges[ei];
            op.multiply_assign(&e.op);
            v = if e.a == v { e.b } else { e.a };
        }
        Ok(op)
    }

    /// Operator removing every excitation in `config`: the product of the
    /// per-vertex path operators. Its syndrome equals the syndrome that
    /// produced `config`, so multiplying it onto the original error leaves an
    /// operator that commutes with the whole stabilizer group.
    pub fn removal_operator(&self, config: &ExcitationConfig) -> Result<PauliOperator, GraphError> {
        let mut op = PauliOperator::identity(self.num_qubits);
        for &u in &config.vertices {
            op.multiply_assign(&self.path_operator(u)?);
        }
        Ok(op)
    }

    /// Plain-text dump (vertex list, then edge list with operator strings),
    /// in the same format family as the lattice export.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        out.push_str("decolab-exgraph v1\n");
        writeln!(out, "kind {}", self.kind.name()).unwrap();
        writeln!(out, "distance {}", self.distance).unwrap();
        writeln!(out, "vertices {}", self.vertices.len()).unwrap();
        for v in &self.vertices {
            writeln!(out, "{} {}", v.face, v.species.name()).unwrap();
        }
        writeln!(out, "w {}", self.w).unwrap();
        writeln!(out, "edges {}", self.edges.len()).unwrap();
        for e in &self.edges {
            writeln!(out, "{} {} {}", e.a, e.b, e.op).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{build_code, FaceColor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(kind: CodeKind, d: usize) -> (CodeLattice, ExcitationGraph) {
        let lat = build_code(kind, d).unwrap();
        let g = build_graph(&lat).unwrap();
        (lat, g)
    }

    fn random_error(rng: &mut ChaCha8Rng, n: usize) -> PauliOperator {
        let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
        let mut op = PauliOperator::identity(n);
        for q in 0..n {
            op.set(q, letters[rng.random_range(0..4)]);
        }
        op
    }

    fn edge_triples(g: &ExcitationGraph) -> Vec<(usize, usize, String)> {
        g.edges.iter().map(|e| (e.a, e.b, e.op.to_string())).collect()
    }

    #[test]
    fn color_d3_frozen_graph() {
        let (_, g) = graph(CodeKind::ColorCode, 3);
        assert_eq!(g.vertices.len(), 6);
        assert_eq!(g.w, 6);
        let species: Vec<Species> = g.vertices.iter().map(|v| v.species).collect();
        assert_eq!(
            species,
            [
                Species::Electric,
                Species::Electric,
                Species::Electric,
                Species::Magnetic,
                Species::Magnetic,
                Species::Magnetic,
            ]
        );
        let faces: Vec<usize> = g.vertices.iter().map(|v| v.face).collect();
        assert_eq!(faces, [0, 1, 2, 0, 1, 2]);
        // Hand-derived: enumerate all single- and two-qubit Z (resp. X)
        // operators on the Steane layout, keep syndromes of weight <= 2,
        // take the lexicographically least per vertex pair.
        let expected = [
            (0, 1, "IIIIZIZ"),
            (0, 2, "IIIZIII"),
            (0, 6, "IIIIZZI"),
            (1, 2, "IIIIIZI"),
            (1, 6, "IIIIIZZ"),
            (2, 6, "IIIIIIZ"),
            (3, 4, "IIIIXIX"),
            (3, 5, "IIIXIII"),
            (3, 6, "IIIIXXI"),
            (4, 5, "IIIIIXI"),
            (4, 6, "IIIIIXX"),
            (5, 6, "IIIIIIX"),
        ];
        let got = edge_triples(&g);
        assert_eq!(got.len(), expected.len());
        for ((a, b, op), (ea, eb, eop)) in got.iter().zip(expected.iter()) {
            assert_eq!((a, b, op.as_str()), (ea, eb, *eop));
        }
        // All three faces touch the boundary, so every vertex sits at
        // distance 1 with w as its predecessor.
        assert!((0..6).all(|v| g.distance_to_boundary(v) == 1));
        assert!((0..6).all(|v| g.predecessor(v) == Some(6)));
    }

    #[test]
    fn toric_d3_frozen_graph() {
        let (_, g) = graph(CodeKind::TwistedToricCode, 3);
        assert_eq!(g.vertices.len(), 6);
        let species: Vec<Species> = g.vertices.iter().map(|v| v.species).collect();
        assert_eq!(
            species,
            [
                Species::Electric,
                Species::Magnetic,
                Species::Magnetic,
                Species::Electric,
                Species::Electric,
                Species::Mixed,
            ]
        );
        // Hand-derived from the frozen d=3 generators: all 21 single-qubit
        // Paulis, syndromes of weight <= 2, lexicographically least per pair.
        let expected = [
            (0, 1, "YIIIIII"),
            (0, 2, "IIIIYII"),
            (0, 4, "IIIZIII"),
            (0, 5, "IIIIZII"),
            (0, 6, "IZIIIII"),
            (1, 2, "IXIIIII"),
            (1, 6, "XIIIIII"),
            (2, 3, "IIYIIII"),
            (2, 5, "IIIIXII"),
            (2, 6, "IIIIIXI"),
            (3, 5, "IIIIIZI"),
            (3, 6, "IIZIIII"),
            (4, 5, "IIIIIIY"),
            (4, 6, "IIIIIIZ"),
            (5, 6, "IIIIIIX"),
        ];
        let got = edge_triples(&g);
        assert_eq!(got.len(), expected.len());
        for ((a, b, op), (ea, eb, eop)) in got.iter().zip(expected.iter()) {
            assert_eq!((a, b, op.as_str()), (ea, eb, *eop));
        }
        // Species-crossing moves exist only across the defect line and all
        // three of them are Y operators here.
        let crossing: Vec<&ExEdge> = g
            .edges
            .iter()
            .filter(|e| {
                e.b != g.w
                    && matches!(
                        (g.vertices[e.a].species, g.vertices[e.b].species),
                        (Species::Electric, Species::Magnetic)
                            | (Species::Magnetic, Species::Electric)
                    )
            })
            .collect();
        assert_eq!(crossing.len(), 3);
        for e in crossing {
            assert_eq!(e.op.weight(), 1);
            let q = e.op.support()[0];
            assert_eq!(e.op.get(q), Pauli::Y);
        }
    }

    #[test]
    fn edge_invariants_hold_everywhere() {
        for kind in [CodeKind::ColorCode, CodeKind::TwistedToricCode] {
            for d in [3, 5, 7, 9] {
                let (lat, g) = graph(kind, d);
                assert_eq!(g.vertices.len(), lat.num_generators());
                for e in &g.edges {
                    let syn = lat.stabilizers.syndrome(&e.op);
                    let lit: Vec<usize> =
                        (0..g.vertices.len()).filter(|&i| syn[i]).collect();
                    if e.b == g.w {
                        assert_eq!(lit, [e.a], "{kind:?} d={d} boundary edge");
                    } else {
                        assert_eq!(lit, [e.a, e.b], "{kind:?} d={d} internal edge");
                    }
                    let limit = match kind {
                        CodeKind::ColorCode => 2,
                        CodeKind::TwistedToricCode => 1,
                    };
                    assert!(e.op.weight() >= 1 && e.op.weight() <= limit);
                }
                // build_graph already errored if some vertex were disconnected;
                // check the distances are consistent unit-step BFS values.
                for v in 0..g.vertices.len() {
                    let dv = g.distance_to_boundary(v);
                    assert!(dv >= 1);
                    let p = g.predecessor(v).unwrap();
                    let dp = if p == g.w { 0 } else { g.distance_to_boundary(p) };
                    assert_eq!(dv, dp + 1);
                }
            }
        }
    }

    #[test]
    fn color_species_subgraphs_stay_disjoint() {
        for d in [3, 5, 7] {
            let (lat, g) = graph(CodeKind::ColorCode, d);
            let half = lat.num_generators() / 2;
            for (i, v) in g.vertices.iter().enumerate() {
                let expect = if i < half { Species::Electric } else { Species::Magnetic };
                assert_eq!(v.species, expect);
                assert_eq!(v.face, i % half);
            }
            for e in &g.edges {
                if e.b != g.w {
                    assert_eq!(g.vertices[e.a].species, g.vertices[e.b].species);
                }
            }
        }
    }

    #[test]
    fn toric_has_species_crossing_edges() {
        for d in [3, 5, 7] {
            let (_, g) = graph(CodeKind::TwistedToricCode, d);
            let crossing = g
                .edges
                .iter()
                .filter(|e| {
                    e.b != g.w
                        && matches!(
                            (g.vertices[e.a].species, g.vertices[e.b].species),
                            (Species::Electric, Species::Magnetic)
                                | (Species::Magnetic, Species::Electric)
                        )
                })
                .count();
            assert!(crossing > 0, "d={d} should have defect-crossing moves");
        }
    }

    #[test]
    fn bulk_single_qubit_errors_make_color_triples() {
        for d in [5, 7] {
            let (lat, g) = graph(CodeKind::ColorCode, d);
            let n = lat.n();
            let mut bulk_seen = 0;
            for q in 0..n {
                let host_faces: Vec<&crate::codes::Face> =
                    lat.faces.iter().filter(|f| f.qubits.contains(&q)).collect();
                if host_faces.len() != 3 {
                    continue;
                }
                bulk_seen += 1;
                for letter in [Pauli::X, Pauli::Z] {
                    let op = PauliOperator::single(n, q, letter);
                    let syn = lat.stabilizers.syndrome(&op);
                    let lit: Vec<usize> =
                        (0..g.vertices.len()).filter(|&i| syn[i]).collect();
                    assert_eq!(lit.len(), 3, "bulk {letter:?} on q{q}");
                    let mut colors: Vec<FaceColor> =
                        lit.iter().map(|&v| lat.faces[g.vertices[v].face].color).collect();
                    colors.sort_by_key(|c| c.name());
                    colors.dedup();
                    assert_eq!(colors.len(), 3, "one excitation of each color");
                }
                let y = PauliOperator::single(n, q, Pauli::Y);
                let syn = lat.stabilizers.syndrome(&y);
                assert_eq!(syn.iter().filter(|&&b| b).count(), 6);
            }
            assert!(bulk_seen > 0);
        }
    }

    #[test]
    fn matching_color_boundary_faces_reach_w() {
        for d in [5, 7] {
            let (lat, g) = graph(CodeKind::ColorCode, d);
            let r = (3 * (d - 1) / 2) as i32;
            let on_side = |side: usize, (b, c): (i32, i32)| match side {
                0 => b == 0,
                1 => c == 0,
                _ => b + c == r,
            };
            let w_adjacent: Vec<bool> = {
                let mut flags = vec![false; g.vertices.len()];
                for e in &g.edges {
                    if e.b == g.w {
                        flags[e.a] = true;
                    }
                }
                flags
            };
            for (side, &label) in lat.boundary_labels.iter().enumerate() {
                for face in &lat.faces {
                    let touches = face
                        .qubits
                        .iter()
                        .any(|&q| on_side(side, lat.coords[q]));
                    if face.color == label && touches {
                        for &s in &face.stabilizers {
                            assert!(
                                w_adjacent[s],
                                "d={d} side {side} face {} should reach w",
                                face.id
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn syndrome_excitation_round_trip() {
        for kind in [CodeKind::ColorCode, CodeKind::TwistedToricCode] {
            let (lat, g) = graph(kind, 5);
            let k = lat.num_generators();

            let zero = vec![false; k];
            assert!(g.excitations_from_syndrome(&zero).unwrap().is_empty());

            for v in 0..k {
                let mut s = vec![false; k];
                s[v] = true;
                let cfg = g.excitations_from_syndrome(&s).unwrap();
                assert_eq!(cfg.vertices, [v]);
                assert_eq!(g.syndrome_from_excitations(&cfg).unwrap(), s);
            }

            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..200 {
                let s: Vec<bool> = (0..k).map(|_| rng.random_bool(0.3)).collect();
                let cfg = g.excitations_from_syndrome(&s).unwrap();
                assert_eq!(cfg.len(), s.iter().filter(|&&b| b).count());
                assert_eq!(g.syndrome_from_excitations(&cfg).unwrap(), s);
            }

            assert!(matches!(
                g.excitations_from_syndrome(&vec![false; k + 1]),
                Err(GraphError::SyndromeLength { .. })
            ));
            let bad = ExcitationConfig { vertices: vec![k] };
            assert!(matches!(
                g.syndrome_from_excitations(&bad),
                Err(GraphError::BadVertex(_))
            ));
            assert!(matches!(g.path_operator(k), Err(GraphError::BadVertex(_))));
        }
    }

    #[test]
    fn removal_clears_ten_thousand_random_syndromes() {
        for kind in [CodeKind::ColorCode, CodeKind::TwistedToricCode] {
            for d in [3, 5, 7] {
                let (lat, g) = graph(kind, d);
                let mut rng = ChaCha8Rng::seed_from_u64(0xE0 + d as u64);
                for _ in 0..10_000 {
                    let q = random_error(&mut rng, lat.n());
                    let syn = lat.stabilizers.syndrome(&q);
                    let direct = lat
                        .stabilizers
                        .generators
                        .iter()
                        .filter(|gen| !gen.commutes(&q))
                        .count();
                    let cfg = g.excitations_from_syndrome(&syn).unwrap();
                    assert_eq!(cfg.len(), direct);
                    let r = g.removal_operator(&cfg).unwrap();
                    let residual = r.multiply(&q);
                    assert!(
                        lat.stabilizers.syndrome(&residual).iter().all(|&b| !b),
                        "{kind:?} d={d}: removal left a lit syndrome"
                    );
                }
            }
        }
    }

    #[test]
    fn removal_is_a_homomorphism_on_disjoint_sets() {
        for kind in [CodeKind::ColorCode, CodeKind::TwistedToricCode] {
            let (lat, g) = graph(kind, 5);
            let k = lat.num_generators();
            assert!(g
                .removal_operator(&ExcitationConfig { vertices: vec![] })
                .unwrap()
                .is_identity());
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            for _ in 0..200 {
                let all: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.4)).collect();
                let (left, right): (Vec<usize>, Vec<usize>) =
                    all.iter().partition(|_| rng.random_bool(0.5));
                let whole = g
                    .removal_operator(&ExcitationConfig { vertices: all.clone() })
                    .unwrap();
                let a = g.removal_operator(&ExcitationConfig { vertices: left }).unwrap();
                let b = g.removal_operator(&ExcitationConfig { vertices: right }).unwrap();
                assert_eq!(whole, a.multiply(&b));
            }
        }
    }

    #[test]
    fn single_boundary_excitation_uses_the_boundary_edge() {
        for kind in [CodeKind::ColorCode, CodeKind::TwistedToricCode] {
            let (_, g) = graph(kind, 5);
            let mut checked = 0;
            for v in 0..g.vertices.len() {
                if g.distance_to_boundary(v) != 1 {
                    continue;
                }
                checked += 1;
                let r = g
                    .removal_operator(&ExcitationConfig { vertices: vec![v] })
                    .unwrap();
                let e = g
                    .edges
                    .iter()
                    .find(|e| e.a == v && e.b == g.w)
                    .expect("distance-1 vertex must own a boundary edge");
                assert_eq!(r, e.op);
            }
            assert!(checked > 0);
        }
    }

    #[test]
    fn color_distance_tables_have_the_lattice_symmetries() {
        let (lat, g) = graph(CodeKind::ColorCode, 5);
        let half = lat.num_generators() / 2;
        // Electric and magnetic halves are mirror images of each other.
        for f in 0..half {
            assert_eq!(g.distance_to_boundary(f), g.distance_to_boundary(half + f));
        }
        // Three-fold rotation (b, c) -> (r - b - c, b) maps faces to faces,
        // sides to sides, and matching colors to matching colors.
        let r = (3 * (lat.distance - 1) / 2) as i32;
        let face_at = |center: (i32, i32)| {
            lat.faces
                .iter()
                .find(|f| f.center == center)
                .map(|f| f.id)
                .unwrap()
        };
        for f in 0..half {
            let (b, c) = lat.faces[f].center;
            let image = face_at((r - b - c, b));
            assert_eq!(
                g.distance_to_boundary(f),
                g.distance_to_boundary(image),
                "rotation should preserve boundary distance"
            );
            assert_eq!(
                g.distance_to_boundary(half + f),
                g.distance_to_boundary(half + image)
            );
        }
    }

    #[test]
    fn distance_tables_stay_shallow() {
        // Frozen sizes and maxima. The twisted toric graph needs exactly
        // (d-1)/2 single-qubit moves from the deepest excitation; color-code
        // moves span two faces, so its depth grows at half that rate.
        let expect = [
            (CodeKind::ColorCode, 3, 12, 1),
            (CodeKind::ColorCode, 5, 66, 1),
            (CodeKind::ColorCode, 7, 120, 2),
            (CodeKind::TwistedToricCode, 3, 15, 1),
            (CodeKind::TwistedToricCode, 5, 36, 2),
            (CodeKind::TwistedToricCode, 7, 69, 3),
        ];
        for (kind, d, num_edges, want) in expect {
            let (_, g) = graph(kind, d);
            assert_eq!(g.edges.len(), num_edges, "{kind:?} d={d} edge count");
            let max = (0..g.vertices.len())
                .map(|v| g.distance_to_boundary(v))
                .max()
                .unwrap();
            assert_eq!(max, want, "{kind:?} d={d}");
            assert!(max <= 2 * d as u32);
        }
    }

    #[test]
    fn rebuild_is_deterministic() {
        for kind in [CodeKind::ColorCode, CodeKind::TwistedToricCode] {
            let (lat, g1) = graph(kind, 5);
            let g2 = build_graph(&lat).unwrap();
            assert_eq!(g1.export_text(), g2.export_text());
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let q = random_error(&mut rng, lat.n());
            let cfg = g1
                .excitations_from_syndrome(&lat.stabilizers.syndrome(&q))
                .unwrap();
            assert_eq!(
                g1.removal_operator(&cfg).unwrap(),
                g2.removal_operator(&cfg).unwrap()
            );
        }
    }

    #[test]
    fn export_lists_vertices_and_edges() {
        let (_, g) = graph(CodeKind::TwistedToricCode, 3);
        let text = g.export_text();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("decolab-exgraph v1"));
        assert_eq!(lines.next(), Some("kind twisted-toric"));
        assert_eq!(lines.next(), Some("distance 3"));
        assert_eq!(lines.next(), Some("vertices 6"));
        let body: Vec<&str> = text.lines().collect();
        assert!(body.contains(&"w 6"));
        assert!(body.contains(&"edges 15"));
        // Every edge line round-trips through the Pauli parser.
        for line in body.iter().skip_while(|l| !l.starts_with("edges")).skip(1) {
            let op = line.split_whitespace().nth(2).unwrap();
            assert!(PauliOperator::parse(op).is_ok());
        }
    }

    #[test]
    fn rejects_invalid_lattices() {
        let mut lat = build_code(CodeKind::ColorCode, 3).unwrap();
        lat.stabilizers.generators[0] = PauliOperator::identity(lat.n());
        match build_graph(&lat) {
            Err(GraphError::InvalidLattice(msg)) => {
                assert!(!msg.is_empty());
            }
            other => panic!("expected InvalidLattice, got {other:?}"),
        }
    }
}
