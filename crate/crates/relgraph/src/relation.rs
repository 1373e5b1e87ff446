//! The "relation language": entity types, relation-type edges, the domain
//! metagraph, and deterministic orderings of the relation vocabulary.
//!
//! A relation type R connecting entity types i and j is written as the
//! token `i.R.j`. Undirected edges are stored canonically with endpoints in
//! lexicographic order, so `j.R.i` and `i.R.j` denote the same edge.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of an entity type (a metagraph node).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityType(pub String);

impl EntityType {
    pub fn new(name: impl Into<String>) -> Self {
        EntityType(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A relation type between two entity types; an edge of the metagraph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationEdge {
    pub subject: EntityType,
    pub relation: String,
    pub object: EntityType,
    pub directed: bool,
}

impl RelationEdge {
    /// Build an edge, canonicalizing endpoint order when undirected.
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
        directed: bool,
    ) -> Self {
        let (s, o) = (subject.into(), object.into());
        let (s, o) = if !directed && o < s { (o, s) } else { (s, o) };
        RelationEdge {
            subject: EntityType(s),
            relation: relation.into(),
            object: EntityType(o),
            directed,
        }
    }

    /// The `i.R.j` token for this edge. Errors if any component contains
    /// the separator, since such names cannot be parsed back.
    pub fn token(&self) -> Result<String> {
        for part in [self.subject.as_str(), &self.relation, self.object.as_str()] {
            if part.contains('.') {
                return Err(Error::invalid(format!("unescapable name: {part:?} contains '.'")));
            }
            if part.is_empty() {
                return Err(Error::invalid("empty component in relation token"));
            }
        }
        Ok(format!("{}.{}.{}", self.subject, self.relation, self.object))
    }

    /// Inverse of [`RelationEdge::token`].
    pub fn parse(token: &str, directed: bool) -> Result<Self> {
        let parts: Vec<&str> = token.split('.').collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
            return Err(Error::invalid(format!(
                "relation token {token:?} is not of the form i.R.j"
            )));
        }
        Ok(RelationEdge::new(parts[0], parts[1], parts[2], directed))
    }
}

/// The domain schema: entity types as nodes, relation types as edges.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metagraph {
    nodes: BTreeSet<EntityType>,
    edges: BTreeSet<RelationEdge>,
}

impl Metagraph {
    pub fn new() -> Self {
        Metagraph::default()
    }

    pub fn insert_node(&mut self, node: EntityType) {
        self.nodes.insert(node);
    }

    pub fn insert_edge(&mut self, edge: RelationEdge) {
        self.nodes.insert(edge.subject.clone());
        self.nodes.insert(edge.object.clone());
        self.edges.insert(edge);
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EntityType> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &RelationEdge> {
        self.edges.iter()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, node: &EntityType) -> bool {
        self.nodes.contains(node)
    }

    pub fn contains_edge(&self, edge: &RelationEdge) -> bool {
        self.edges.contains(edge)
    }

    /// Distinct neighbors of each node in the simple undirected node graph
    /// induced by the edges (parallel relations collapse, self-loops drop).
    pub fn neighbor_map(&self) -> BTreeMap<&EntityType, BTreeSet<&EntityType>> {
        let mut map: BTreeMap<&EntityType, BTreeSet<&EntityType>> =
            self.nodes.iter().map(|n| (n, BTreeSet::new())).collect();
        for e in &self.edges {
            if e.subject != e.object {
                map.get_mut(&e.subject).unwrap().insert(&e.object);
                map.get_mut(&e.object).unwrap().insert(&e.subject);
            }
        }
        map
    }

    /// Whether the node graph is connected (true for the empty graph).
    pub fn is_connected(&self) -> bool {
        if self.nodes.len() <= 1 {
            return true;
        }
        let neighbors = self.neighbor_map();
        let start = self.nodes.iter().next().unwrap();
        let mut seen: BTreeSet<&EntityType> = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(n) = queue.pop_front() {
            for &m in &neighbors[n] {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    /// Edge-list text form: one canonical token per line, then one
    /// `node <name>` line per isolated node.
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        let mut covered: BTreeSet<&EntityType> = BTreeSet::new();
        for e in &self.edges {
            out.push_str(&e.token()?);
            out.push('\n');
            covered.insert(&e.subject);
            covered.insert(&e.object);
        }
        for n in &self.nodes {
            if !covered.contains(n) {
                out.push_str(&format!("node {n}\n"));
            }
        }
        Ok(out)
    }

    pub fn from_text(text: &str, directed: bool) -> Result<Self> {
        let mut g = Metagraph::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix("node ") {
                g.insert_node(EntityType::new(name.trim()));
            } else {
                g.insert_edge(RelationEdge::parse(line, directed).map_err(|e| Error::Jsonl {
                    line: i + 1,
                    msg: e.to_string(),
                })?);
            }
        }
        Ok(g)
    }

    /// GraphViz DOT rendering; undirected edges use `--`.
    pub fn to_dot(&self, name: &str) -> String {
        let directed = self.edges.iter().any(|e| e.directed);
        let (kind, arrow) = if directed { ("digraph", "->") } else { ("graph", "--") };
        let mut out = format!("{kind} \"{name}\" {{\n");
        for n in &self.nodes {
            out.push_str(&format!("  \"{n}\";\n"));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  \"{}\" {arrow} \"{}\" [label=\"{}\"];\n",
                e.subject, e.object, e.relation
            ));
        }
        out.push_str("}\n");
        out
    }
}

impl FromIterator<RelationEdge> for Metagraph {
    fn from_iter<T: IntoIterator<Item = RelationEdge>>(iter: T) -> Self {
        let mut g = Metagraph::new();
        for e in iter {
            g.insert_edge(e);
        }
        g
    }
}

/// How a relation vocabulary is ordered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderingKind {
    /// Tokens keep their discovery order; per-instance targets keep
    /// annotation order.
    Unordered,
    /// Breadth-first discovery order from a start entity type.
    Bfs { start: EntityType },
}

/// The ordered "relation language" over a domain's metagraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationVocabulary {
    tokens: Vec<String>,
    pub ordering: OrderingKind,
}

impl RelationVocabulary {
    /// Unordered vocabulary listing the graph's edges in canonical order.
    pub fn unordered(g: &Metagraph) -> Result<Self> {
        let tokens = g.edges().map(|e| e.token()).collect::<Result<Vec<_>>>()?;
        Ok(RelationVocabulary { tokens, ordering: OrderingKind::Unordered })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }
}

/// Union of all instance relation sets plus their endpoints.
pub fn build_general_metagraph<'a, I>(relation_sets: I) -> Result<Metagraph>
where
    I: IntoIterator<Item = &'a [RelationEdge]>,
{
    let mut g = Metagraph::new();
    let mut any = false;
    for set in relation_sets {
        any = true;
        for e in set {
            g.insert_edge(e.clone());
        }
    }
    if !any {
        return Err(Error::invalid("empty corpus: no instances to union"));
    }
    Ok(g)
}

/// Node discovery order of a breadth-first traversal from `start`.
/// Neighbors are explored in lexicographic name order; once the start's
/// component is exhausted, remaining components are appended in
/// lexicographic order of their smallest node.
pub fn bfs_discovery_order(g: &Metagraph, start: &EntityType) -> Result<Vec<EntityType>> {
    if !g.contains_node(start) {
        return Err(Error::invalid(format!("start node {start:?} not in graph")));
    }
    let neighbors = g.neighbor_map();
    let mut order: Vec<EntityType> = Vec::with_capacity(g.node_count());
    let mut seen: BTreeSet<&EntityType> = BTreeSet::new();

    let mut roots: Vec<&EntityType> = vec![start];
    // Remaining nodes double as candidate roots for later components, in
    // lexicographic order thanks to the BTreeSet.
    roots.extend(g.nodes.iter().filter(|n| *n != start));

    for root in roots {
        if seen.contains(root) {
            continue;
        }
        let mut queue = VecDeque::from([root]);
        seen.insert(root);
        while let Some(n) = queue.pop_front() {
            order.push(n.clone());
            for &m in &neighbors[n] {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
    }
    Ok(order)
}

/// Breadth-first ordering of the relation vocabulary from `start`.
///
/// Edges are sorted by (min discovery index of endpoints, max discovery
/// index, relation name, subject index), giving a total deterministic order
/// over all edges of the graph.
pub fn bfs_ordering(g: &Metagraph, start: &EntityType) -> Result<RelationVocabulary> {
    let order = bfs_discovery_order(g, start)?;
    let index: BTreeMap<&EntityType, usize> =
        order.iter().enumerate().map(|(i, n)| (n, i)).collect();

    let mut keyed: Vec<((usize, usize, String, usize), String)> =
        Vec::with_capacity(g.edge_count());
    for e in g.edges() {
        let si = index[&e.subject];
        let oi = index[&e.object];
        keyed.push(((si.min(oi), si.max(oi), e.relation.clone(), si), e.token()?));
    }
    keyed.sort();
    Ok(RelationVocabulary {
        tokens: keyed.into_iter().map(|(_, t)| t).collect(),
        ordering: OrderingKind::Bfs { start: start.clone() },
    })
}

/// Arrange an instance's relation set as a target token sequence.
///
/// Under a BFS vocabulary the tokens come out in vocabulary order; under an
/// unordered vocabulary they keep their first-appearance order in the
/// instance annotation. Unknown relations are an error.
pub fn sort_target_sequence(
    relations: &[RelationEdge],
    vocab: &RelationVocabulary,
) -> Result<Vec<String>> {
    let mut tokens: Vec<String> = Vec::with_capacity(relations.len());
    for r in relations {
        let t = r.token()?;
        if !vocab.contains(&t) {
            return Err(Error::invalid(format!("relation {t:?} not in vocabulary")));
        }
        if !tokens.contains(&t) {
            tokens.push(t);
        }
    }
    match vocab.ordering {
        OrderingKind::Unordered => Ok(tokens),
        OrderingKind::Bfs { .. } => {
            let mut keyed: Vec<(usize, String)> =
                tokens.into_iter().map(|t| (vocab.position(&t).unwrap(), t)).collect();
            keyed.sort();
            Ok(keyed.into_iter().map(|(_, t)| t).collect())
        }
    }
}

/// One BFS vocabulary per node, listed by lexicographic start name.
pub fn enumerate_orderings(g: &Metagraph) -> Result<Vec<(EntityType, RelationVocabulary)>> {
    if g.node_count() == 0 {
        return Err(Error::invalid("empty graph has no orderings"));
    }
    g.nodes().map(|n| Ok((n.clone(), bfs_ordering(g, n)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge(s: &str, r: &str, o: &str) -> RelationEdge {
        RelationEdge::new(s, r, o, false)
    }

    #[test]
    fn canonical_token_examples() {
        assert_eq!(edge("Disease", "to", "Gene").token().unwrap(), "Disease.to.Gene");
        assert_eq!(edge("Gene", "to", "Disease").token().unwrap(), "Disease.to.Gene");
        assert_eq!(
            RelationEdge::new("person", "worksFor", "company", true).token().unwrap(),
            "person.worksFor.company"
        );
    }

    #[test]
    fn dot_in_component_is_error() {
        let e = RelationEdge::new("a.b", "r", "c", true);
        assert!(e.token().is_err());
    }

    #[test]
    fn parse_roundtrip() {
        let e = RelationEdge::parse("Disease.to.Gene", false).unwrap();
        assert_eq!(e, edge("Gene", "to", "Disease"));
        assert!(RelationEdge::parse("a.b", false).is_err());
        assert!(RelationEdge::parse("a..b", false).is_err());
    }

    #[test]
    fn metagraph_union() {
        let sets: Vec<Vec<RelationEdge>> =
            vec![vec![edge("A", "R", "B")], vec![edge("B", "S", "C")], vec![edge("A", "R", "B")]];
        let refs: Vec<&[RelationEdge]> = sets.iter().map(|s| s.as_slice()).collect();
        let g = build_general_metagraph(refs).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);

        let single = build_general_metagraph([&sets[0][..]]).unwrap();
        assert_eq!(single.node_count(), 2);
        assert_eq!(single.edge_count(), 1);

        assert!(build_general_metagraph(std::iter::empty::<&[RelationEdge]>()).is_err());
    }

    fn triangle() -> Metagraph {
        [edge("A", "R1", "B"), edge("B", "R2", "C"), edge("A", "R3", "C")].into_iter().collect()
    }

    #[test]
    fn bfs_single_edge() {
        let g: Metagraph = [edge("A", "R", "B")].into_iter().collect();
        let v = bfs_ordering(&g, &EntityType::new("A")).unwrap();
        assert_eq!(v.tokens(), &["A.R.B".to_string()]);
    }

    #[test]
    fn bfs_triangle_from_a() {
        // Discovery A=0, B=1, C=2; keys (0,1) (0,2) (1,2).
        let v = bfs_ordering(&triangle(), &EntityType::new("A")).unwrap();
        assert_eq!(v.tokens(), &["A.R1.B", "A.R3.C", "B.R2.C"]);
    }

    #[test]
    fn bfs_triangle_from_c() {
        // Discovery C=0, A=1, B=2; keys: A.R3.C (0,1), B.R2.C (0,2), A.R1.B (1,2).
        let v = bfs_ordering(&triangle(), &EntityType::new("C")).unwrap();
        assert_eq!(v.tokens(), &["A.R3.C", "B.R2.C", "A.R1.B"]);
    }

    #[test]
    fn bfs_unknown_start_is_error() {
        assert!(bfs_ordering(&triangle(), &EntityType::new("Z")).is_err());
    }

    #[test]
    fn bfs_is_permutation_of_edges() {
        let g = triangle();
        for (_, v) in enumerate_orderings(&g).unwrap() {
            let mut toks = v.tokens().to_vec();
            toks.sort();
            let mut expected: Vec<String> = g.edges().map(|e| e.token().unwrap()).collect();
            expected.sort();
            assert_eq!(toks, expected);
        }
    }

    #[test]
    fn bfs_depth_monotone() {
        // Star with center S and leaves L1..L3 plus a tail L3-T: depth(S)=0,
        // depth(Li)=1, depth(T)=2.
        let g: Metagraph = [
            edge("S", "r", "L1"),
            edge("S", "r", "L2"),
            edge("S", "r", "L3"),
            edge("L3", "r", "T"),
        ]
        .into_iter()
        .collect();
        let order = bfs_discovery_order(&g, &EntityType::new("S")).unwrap();
        let pos = |n: &str| order.iter().position(|x| x.as_str() == n).unwrap();
        assert_eq!(pos("S"), 0);
        assert!(pos("L1") < pos("T"));
        assert!(pos("L2") < pos("T"));
        assert!(pos("L3") < pos("T"));
    }

    #[test]
    fn disconnected_components_appended_lexicographically() {
        let g: Metagraph =
            [edge("M", "r", "N"), edge("C", "r", "D"), edge("A", "r", "B")].into_iter().collect();
        let order = bfs_discovery_order(&g, &EntityType::new("M")).unwrap();
        let names: Vec<&str> = order.iter().map(|n| n.as_str()).collect();
        assert_eq!(names, vec!["M", "N", "A", "B", "C", "D"]);
    }

    #[test]
    fn sort_target_follows_vocab_order() {
        let vocab = bfs_ordering(&triangle(), &EntityType::new("A")).unwrap();
        let seq =
            sort_target_sequence(&[edge("B", "R2", "C"), edge("A", "R1", "B")], &vocab).unwrap();
        assert_eq!(seq, vec!["A.R1.B", "B.R2.C"]);
        assert!(sort_target_sequence(&[], &vocab).unwrap().is_empty());
        let single = sort_target_sequence(&[edge("A", "R3", "C")], &vocab).unwrap();
        assert_eq!(single, vec!["A.R3.C"]);
    }

    #[test]
    fn sort_target_unknown_relation_is_error() {
        let vocab = bfs_ordering(&triangle(), &EntityType::new("A")).unwrap();
        let err = sort_target_sequence(&[edge("X", "q", "Y")], &vocab).unwrap_err();
        assert!(err.to_string().contains("X.q.Y"), "{err}");
    }

    #[test]
    fn sort_target_unordered_keeps_first_appearance() {
        let g = triangle();
        let vocab = RelationVocabulary::unordered(&g).unwrap();
        let seq =
            sort_target_sequence(&[edge("B", "R2", "C"), edge("A", "R1", "B")], &vocab).unwrap();
        assert_eq!(seq, vec!["B.R2.C", "A.R1.B"]);
    }

    #[test]
    fn sort_target_is_idempotent() {
        let vocab = bfs_ordering(&triangle(), &EntityType::new("A")).unwrap();
        let once =
            sort_target_sequence(&[edge("A", "R3", "C"), edge("A", "R1", "B")], &vocab).unwrap();
        let edges: Vec<RelationEdge> =
            once.iter().map(|t| RelationEdge::parse(t, false).unwrap()).collect();
        let twice = sort_target_sequence(&edges, &vocab).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn enumerate_one_ordering_per_node() {
        assert_eq!(enumerate_orderings(&triangle()).unwrap().len(), 3);
        let five: Metagraph = ["Gene", "Mutation", "Chemical", "Disease"]
            .iter()
            .map(|n| edge("Species", "to", n))
            .collect();
        assert_eq!(enumerate_orderings(&five).unwrap().len(), 5);
    }

    #[test]
    fn metagraph_text_roundtrip() {
        let mut g = triangle();
        g.insert_node(EntityType::new("Isolated"));
        let text = g.to_text().unwrap();
        let back = Metagraph::from_text(&text, false).unwrap();
        assert_eq!(g, back);
    }

    proptest! {
        #[test]
        fn token_parse_is_inverse(
            s in "[A-Za-z][A-Za-z0-9_]{0,8}",
            r in "[A-Za-z][A-Za-z0-9_]{0,8}",
            o in "[A-Za-z][A-Za-z0-9_]{0,8}",
            directed in proptest::bool::ANY,
        ) {
            let e = RelationEdge::new(s, r, o, directed);
            let tok = e.token().unwrap();
            let back = RelationEdge::parse(&tok, directed).unwrap();
            prop_assert_eq!(e, back);
        }
    }
}
