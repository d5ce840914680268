//! Weighted branching trees and their stopping-line fronts.
//!
//! Every vertex `v` carries its position `S(v) = -ln L(v)`, the sum of
//! `-ln T_i` along its ancestry, plus an [`RngStream`] derived from the
//! vertex path. Reproduction draws come from that stream alone, so a
//! subtree re-rooted at `v` regrows with bit-identical weights no matter
//! what the rest of the tree does. That invariant is what lets recursion
//! checks compare two constructions on the same tree.
//!
//! Three front (stopping line) kinds are built here:
//!
//! * generation fronts: all vertices of generation `n`;
//! * first-exit fronts at `t`: first vertices with `S > t` along each line;
//! * ladder fronts: the `t = 0` first-exit (nontrivial when some factor
//!   exceeds 1, so positions can move down before exiting).
//!
//! Pruning drops a vertex when its alpha-mass `exp(-alpha S)` falls below a
//! threshold; the dropped mass is accounted, never silently lost. Hard caps
//! bound generation depth and population. For generation fronts the caps
//! are contracts (exceeding them is an error); first-exit construction
//! instead truncates still-interior lines at the depth cap and reports the
//! leaked mass, because a factor above 1 can delay an exit indefinitely.

use crate::model::WeightModel;
use crate::numeric::LogSumExp;
use crate::rng::RngStream;
use crate::{Error, Result};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

#[derive(Clone, Copy, Debug)]
pub struct Caps {
    pub max_generation: u32,
    pub max_nodes: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            max_generation: 64,
            max_nodes: 10_000_000,
        }
    }
}

/// Mass-threshold pruning: drop vertices with `exp(-alpha S) < eps`.
/// `eps = 0` disables pruning and makes construction exact.
#[derive(Clone, Copy, Debug)]
pub struct Prune {
    pub alpha: f64,
    pub eps: f64,
}

impl Prune {
    pub fn none(alpha: f64) -> Self {
        Prune { alpha, eps: 0.0 }
    }

    pub fn threshold(alpha: f64, eps: f64) -> Self {
        Prune { alpha, eps }
    }
}

#[derive(Clone, Debug)]
pub struct WeightedNode {
    /// Child indices from the root; empty for the root itself.
    pub vertex: Vec<u32>,
    /// `S(v) = -ln L(v)`; 0 at the root, additive along edges.
    pub position: f64,
    /// Stream the vertex's own reproduction and children derive from.
    pub stream: RngStream,
}

impl WeightedNode {
    pub fn generation(&self) -> u32 {
        self.vertex.len() as u32
    }

    pub fn mass(&self, alpha: f64) -> f64 {
        (-alpha * self.position).exp()
    }

    /// Dotted path, empty string for the root.
    pub fn path_string(&self) -> String {
        self.vertex
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join(".")
    }

    fn reproduction_rng(&self) -> ChaCha8Rng {
        self.stream.substream(0).rng()
    }

    fn child_stream(&self, index: u32) -> RngStream {
        self.stream.substream(1 + u64::from(index))
    }

    fn child(&self, index: u32, weight: f64) -> WeightedNode {
        let mut vertex = Vec::with_capacity(self.vertex.len() + 1);
        vertex.extend_from_slice(&self.vertex);
        vertex.push(index);
        WeightedNode {
            vertex,
            position: self.position - weight.ln(),
            stream: self.child_stream(index),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FrontKind {
    Generation(u32),
    FirstExit(f64),
    Ladder,
}

/// A stopping line: the set of vertices where construction stopped, plus an
/// account of everything dropped on the way.
#[derive(Clone, Debug)]
pub struct Front {
    pub kind: FrontKind,
    pub nodes: Vec<WeightedNode>,
    /// Total `exp(-alpha S)` over pruned or truncated vertices.
    pub leaked_mass: f64,
    /// Lines cut by the generation cap while still interior.
    pub truncated_paths: u64,
    pub capped: bool,
}

impl Front {
    /// A fresh root at position 0 drawing from `stream`.
    pub fn root(stream: RngStream) -> Front {
        Front {
            kind: FrontKind::Generation(0),
            nodes: vec![WeightedNode {
                vertex: Vec::new(),
                position: 0.0,
                stream,
            }],
            leaked_mass: 0.0,
            truncated_paths: 0,
            capped: false,
        }
    }

    /// Re-root at `node`: position resets to 0, the stream is kept, so the
    /// subtree regrows exactly as it would have inside the full tree.
    pub fn subtree_root(node: &WeightedNode) -> Front {
        Front {
            kind: FrontKind::Generation(0),
            nodes: vec![WeightedNode {
                vertex: Vec::new(),
                position: 0.0,
                stream: node.stream,
            }],
            leaked_mass: 0.0,
            truncated_paths: 0,
            capped: false,
        }
    }

    /// One synchronous generation step. Defined for generation fronts only;
    /// caps are strict here.
    pub fn expand(self, model: &WeightModel, prune: Prune, caps: Caps) -> Result<Front> {
        let FrontKind::Generation(g) = self.kind else {
            return Err(Error::Contract(
                "expand applies to generation fronts only".into(),
            ));
        };
        if g + 1 > caps.max_generation {
            return Err(Error::PopulationCap(format!(
                "generation {} exceeds cap {}",
                g + 1,
                caps.max_generation
            )));
        }
        let mut nodes = Vec::with_capacity(self.nodes.len() * 2);
        let mut leaked = self.leaked_mass;
        for node in &self.nodes {
            let weights = model.sample(&mut node.reproduction_rng())?;
            for (i, &w) in weights.iter().enumerate() {
                let child = node.child(i as u32, w);
                if prune.eps > 0.0 && child.mass(prune.alpha) < prune.eps {
                    leaked += child.mass(prune.alpha);
                    continue;
                }
                nodes.push(child);
            }
            if nodes.len() > caps.max_nodes {
                return Err(Error::PopulationCap(format!(
                    "population exceeds cap {} at generation {}",
                    caps.max_nodes,
                    g + 1
                )));
            }
        }
        Ok(Front {
            kind: FrontKind::Generation(g + 1),
            nodes,
            leaked_mass: leaked,
            truncated_paths: self.truncated_paths,
            capped: self.capped,
        })
    }

    /// `sum_v exp(-theta S(v))` over the front, in log space.
    pub fn alpha_mass(&self, theta: f64) -> f64 {
        let mut lse = LogSumExp::default();
        for node in &self.nodes {
            lse.add(-theta * node.position);
        }
        lse.value().exp()
    }

    /// Largest `L(v)` on the front; 0 for an empty front.
    pub fn sup_weight(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| (-n.position).exp())
            .fold(0.0, f64::max)
    }

    /// No vertex an ancestor of another. All constructions here guarantee
    /// it; the check exists so tests can assert the invariant.
    pub fn is_antichain(&self) -> bool {
        let mut paths: Vec<&[u32]> = self.nodes.iter().map(|n| n.vertex.as_slice()).collect();
        paths.sort();
        paths
            .windows(2)
            .all(|w| !(w[1].len() >= w[0].len() && &w[1][..w[0].len()] == w[0]))
    }

    /// One row per vertex: `vertex_path,generation,S,L_alpha_mass`.
    pub fn write_csv(&self, path: &Path, alpha: f64) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["vertex_path", "generation", "S", "L_alpha_mass"])?;
        for node in &self.nodes {
            w.write_record([
                node.path_string(),
                node.generation().to_string(),
                node.position.to_string(),
                node.mass(alpha).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The full generation-`n` front grown from a fresh root.
pub fn generation_front(
    model: &WeightModel,
    n: u32,
    stream: RngStream,
    prune: Prune,
    caps: Caps,
) -> Result<Front> {
    let mut front = Front::root(stream);
    for _ in 0..n {
        front = front.expand(model, prune, caps)?;
    }
    Ok(front)
}

/// First-exit front at level `t >= 0`: along every line of descent, the
/// first vertex with `S > t`. Lines still interior at the generation cap
/// are truncated with their mass booked as leaked; the population cap stays
/// a hard error because it bounds memory.
pub fn first_exit_front(
    model: &WeightModel,
    t: f64,
    stream: RngStream,
    prune: Prune,
    caps: Caps,
) -> Result<Front> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Contract(format!("exit level {t} must be >= 0")));
    }
    let mut exits: Vec<WeightedNode> = Vec::new();
    let mut interior = vec![WeightedNode {
        vertex: Vec::new(),
        position: 0.0,
        stream,
    }];
    let mut leaked = 0.0;
    let mut truncated = 0u64;
    let mut capped = false;
    let mut generation = 0u32;
    while !interior.is_empty() {
        if generation == caps.max_generation {
            for node in &interior {
                leaked += node.mass(prune.alpha);
            }
            truncated += interior.len() as u64;
            capped = true;
            break;
        }
        generation += 1;
        let mut next = Vec::new();
        for node in &interior {
            let weights = model.sample(&mut node.reproduction_rng())?;
            for (i, &w) in weights.iter().enumerate() {
                let child = node.child(i as u32, w);
                if prune.eps > 0.0 && child.mass(prune.alpha) < prune.eps {
                    leaked += child.mass(prune.alpha);
                    continue;
                }
                if child.position > t {
                    exits.push(child);
                } else {
                    next.push(child);
                }
            }
            if exits.len() + next.len() > caps.max_nodes {
                return Err(Error::PopulationCap(format!(
                    "population exceeds cap {} at generation {generation}",
                    caps.max_nodes
                )));
            }
        }
        interior = next;
    }
    Ok(Front {
        kind: FrontKind::FirstExit(t),
        nodes: exits,
        leaked_mass: leaked,
        truncated_paths: truncated,
        capped,
    })
}

/// Ladder front: first strict ascent above the root level. Coincides with
/// generation 1 when every factor is below 1.
pub fn ladder_front(
    model: &WeightModel,
    stream: RngStream,
    prune: Prune,
    caps: Caps,
) -> Result<Front> {
    let mut front = first_exit_front(model, 0.0, stream, prune, caps)?;
    front.kind = FrontKind::Ladder;
    Ok(front)
}

/// Rebuild `S(v)` for one vertex by replaying reproduction draws from the
/// root stream. Independent of any [`Front`] bookkeeping, so tests can
/// check that construction and the path-derived stream discipline agree.
pub fn recompute_position(
    model: &WeightModel,
    root_stream: RngStream,
    vertex: &[u32],
) -> Result<f64> {
    let mut stream = root_stream;
    let mut position = 0.0;
    for &index in vertex {
        let weights = model.sample(&mut stream.substream(0).rng())?;
        let w = *weights.get(index as usize).ok_or_else(|| {
            Error::Contract(format!("vertex index {index} out of range on replay"))
        })?;
        if w <= 0.0 {
            return Err(Error::Contract("replayed weight is zero".into()));
        }
        position -= w.ln();
        stream = stream.substream(1 + u64::from(index));
    }
    Ok(position)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WeightModel;

    fn stream(label: &str) -> RngStream {
        RngStream::new(2024).named("tree").named(label)
    }

    #[test]
    fn binary_generation_front_is_exact() {
        let m = WeightModel::binary_half();
        let f =
            generation_front(&m, 5, stream("binary"), Prune::none(1.0), Caps::default()).unwrap();
        assert_eq!(f.nodes.len(), 32);
        for node in &f.nodes {
            assert!((node.position - 5.0 * 2.0f64.ln()).abs() < 1e-12);
            assert_eq!(node.generation(), 5);
        }
        assert!((f.alpha_mass(1.0) - 1.0).abs() < 1e-12);
        assert_eq!(f.leaked_mass, 0.0);
        assert!(f.is_antichain());
    }

    #[test]
    fn replay_recovers_every_position() {
        let m = WeightModel::uniform_pair();
        let s = stream("replay");
        let f = generation_front(&m, 6, s, Prune::none(1.0), Caps::default()).unwrap();
        assert_eq!(f.nodes.len(), 64);
        for node in &f.nodes {
            let replayed = recompute_position(&m, s, &node.vertex).unwrap();
            assert_eq!(replayed, node.position, "path {:?}", node.vertex);
        }
    }

    #[test]
    fn subtrees_regrow_identically() {
        let m = WeightModel::uniform_pair();
        let root = Front::root(stream("subtree"));
        let g1 = root.expand(&m, Prune::none(1.0), Caps::default()).unwrap();
        let child = g1.nodes[0].clone();

        let grow = |seed: &WeightedNode| {
            let mut f = Front::subtree_root(seed);
            for _ in 0..3 {
                f = f.expand(&m, Prune::none(1.0), Caps::default()).unwrap();
            }
            f.nodes.iter().map(|n| n.position).collect::<Vec<_>>()
        };
        assert_eq!(grow(&child), grow(&child), "regrowth must be bit-identical");
        assert_ne!(
            grow(&child),
            grow(&g1.nodes[1]),
            "sibling subtrees must draw independently"
        );
    }

    #[test]
    fn first_exit_nodes_exit_and_parents_do_not() {
        let m = WeightModel::uniform_pair();
        let s = stream("exit");
        let f = first_exit_front(&m, 1.0, s, Prune::none(1.0), Caps::default()).unwrap();
        assert!(!f.nodes.is_empty());
        assert!(f.is_antichain());
        for node in &f.nodes {
            assert!(node.position > 1.0);
            let parent = &node.vertex[..node.vertex.len() - 1];
            let parent_pos = recompute_position(&m, s, parent).unwrap();
            assert!(parent_pos <= 1.0, "parent must still be interior");
        }
        assert!(!f.capped);
    }

    #[test]
    fn ladder_equals_first_generation_when_factors_below_one() {
        let m = WeightModel::binary_half();
        let f = ladder_front(&m, stream("ladder"), Prune::none(1.0), Caps::default()).unwrap();
        assert_eq!(f.nodes.len(), 2);
        for node in &f.nodes {
            assert_eq!(node.generation(), 1);
            assert!((node.position - 2.0f64.ln()).abs() < 1e-15);
        }
        assert_eq!(f.leaked_mass, 0.0);
        assert_eq!(f.truncated_paths, 0);
    }

    #[test]
    fn mixed_model_ladder_has_deep_lines() {
        // A factor above 1 lets positions dip below 0, so some exits happen
        // past generation 1; over many replications at least one must.
        let alpha = 0.7148517705279320;
        let mut deepest = 0u32;
        let m = WeightModel::two_scale_mix();
        for rep in 0..200u64 {
            let f = ladder_front(
                &m,
                stream("mixed").replication(rep),
                Prune::none(alpha),
                Caps::default(),
            )
            .unwrap();
            assert!(f.is_antichain());
            for node in &f.nodes {
                assert!(node.position > 0.0);
                deepest = deepest.max(node.generation());
            }
        }
        assert!(deepest >= 2, "ladder lines should pass generation 1");
    }

    #[test]
    fn pruning_books_dropped_mass() {
        let m = WeightModel::uniform_pair();
        let eps = 1e-2;
        let exact = generation_front(&m, 10, stream("prune"), Prune::none(1.0), Caps::default())
            .unwrap();
        let pruned = generation_front(
            &m,
            10,
            stream("prune"),
            Prune::threshold(1.0, eps),
            Caps::default(),
        )
        .unwrap();
        assert!(pruned.nodes.len() < exact.nodes.len());
        assert!(pruned.leaked_mass > 0.0);
        // Pruning is one-sided: surviving mass plus the at-drop-time account
        // of leaked mass cannot exceed the exact front's mass, and the gap
        // is bounded by what grew out of the dropped vertices.
        assert!(pruned.alpha_mass(1.0) <= exact.alpha_mass(1.0) + 1e-12);
    }

    #[test]
    fn caps_are_strict_for_generation_fronts() {
        let m = WeightModel::uniform_pair();
        let tiny = Caps {
            max_generation: 3,
            max_nodes: 10_000,
        };
        assert!(matches!(
            generation_front(&m, 4, stream("caps"), Prune::none(1.0), tiny),
            Err(Error::PopulationCap(_))
        ));
        let narrow = Caps {
            max_generation: 64,
            max_nodes: 100,
        };
        assert!(matches!(
            generation_front(&m, 10, stream("caps"), Prune::none(1.0), narrow),
            Err(Error::PopulationCap(_))
        ));
    }

    #[test]
    fn front_csv_has_stable_header_and_paths() {
        let m = WeightModel::binary_half();
        let f =
            generation_front(&m, 2, stream("csv"), Prune::none(1.0), Caps::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("front.csv");
        f.write_csv(&path, 1.0).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "vertex_path,generation,S,L_alpha_mass"
        );
        let first = lines.next().unwrap();
        assert!(first.starts_with("0.0,2,"), "row was {first}");
    }
}
