//! Instance-level and metagraph-level evaluation: exact-set accuracy, micro
//! precision/recall/F1, edge/node set F1, and Jensen-Shannon distances
//! between 10-bin centrality histograms.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::{EntityType, Metagraph, RelationEdge};

/// Instance-level scores over a prediction/gold alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metagraph-level scores against a ground-truth graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub edges_f1: f64,
    pub nodes_f1: f64,
    pub degree_jsd: f64,
    pub eigenvector_jsd: f64,
}

/// Normalized 10-bin histogram over centrality values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityHistogram {
    pub probabilities: [f64; 10],
}

/// Union of per-instance predicted relation sets; nodes are the endpoints
/// of the included edges.
pub fn aggregate_metagraph<'a, I>(predictions: I) -> Metagraph
where
    I: IntoIterator<Item = &'a BTreeSet<RelationEdge>>,
{
    let mut g = Metagraph::new();
    for set in predictions {
        for e in set {
            g.insert_edge(e.clone());
        }
    }
    g
}

/// Set precision/recall/F1 with the conventions: both empty is a perfect
/// match, one empty scores zero.
pub fn set_f1<T: Ord>(predicted: &BTreeSet<T>, actual: &BTreeSet<T>) -> (f64, f64, f64) {
    if predicted.is_empty() && actual.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    if predicted.is_empty() || actual.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let tp = predicted.intersection(actual).count() as f64;
    let precision = tp / predicted.len() as f64;
    let recall = tp / actual.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Exact-set accuracy plus micro precision/recall/F1, pooling true/false
/// positives over all instances. Predictions and gold align by instance id.
pub fn instance_metrics(
    predictions: &[(String, BTreeSet<RelationEdge>)],
    gold: &[(String, BTreeSet<RelationEdge>)],
) -> Result<InstanceMetrics> {
    if predictions.len() != gold.len() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} gold instances",
            predictions.len(),
            gold.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("no instances to evaluate"));
    }
    let gold_map: BTreeMap<&str, &BTreeSet<RelationEdge>> =
        gold.iter().map(|(id, s)| (id.as_str(), s)).collect();
    let mut exact = 0usize;
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (id, pred) in predictions {
        let actual = gold_map.get(id.as_str()).ok_or_else(|| {
            Error::invalid(format!("prediction for unknown instance id {id:?}"))
        })?;
        if pred == *actual {
            exact += 1;
        }
        tp += pred.intersection(actual).count();
        fp += pred.difference(actual).count();
        fn_ += actual.difference(pred).count();
    }
    let precision = if tp + fp > 0 { tp as f64 / (tp + fp) as f64 } else { 0.0 };
    let recall = if tp + fn_ > 0 { tp as f64 / (tp + fn_) as f64 } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(InstanceMetrics {
        accuracy: exact as f64 / predictions.len() as f64,
        precision,
        recall,
        f1,
    })
}

/// Degree centrality degree(v)/(n-1) on the simple node graph (parallel
/// relation types between a pair count once, self-loops are ignored).
pub fn degree_centrality(g: &Metagraph) -> Result<BTreeMap<EntityType, f64>> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::invalid(format!("degree centrality needs >= 2 nodes, got {n}")));
    }
    let neighbors = g.neighbor_map();
    Ok(neighbors
        .into_iter()
        .map(|(node, nb)| (node.clone(), nb.len() as f64 / (n - 1) as f64))
        .collect())
}

const EIGEN_TOLERANCE: f64 = 1e-10;
const EIGEN_MAX_ITERATIONS: usize = 10_000;

/// Eigenvector centrality by power iteration from the uniform vector,
/// L2-normalized each step and rescaled so the maximum entry is 1.
///
/// The iteration runs on A + I rather than A: both share eigenvectors, but
/// the shift keeps bipartite graphs (whose spectra are symmetric around
/// zero) from oscillating forever. On disconnected graphs the leading
/// component is scored and the rest get 0.
pub fn eigenvector_centrality(g: &Metagraph) -> Result<BTreeMap<EntityType, f64>> {
    eigenvector_centrality_with(g, EIGEN_TOLERANCE, EIGEN_MAX_ITERATIONS)
}

pub fn eigenvector_centrality_with(
    g: &Metagraph,
    tolerance: f64,
    max_iterations: usize,
) -> Result<BTreeMap<EntityType, f64>> {
    let n = g.node_count();
    if n < 2 {
        return Err(Error::invalid(format!(
            "eigenvector centrality needs >= 2 nodes, got {n}"
        )));
    }
    let nodes: Vec<&EntityType> = g.nodes().collect();
    let index: BTreeMap<&EntityType, usize> =
        nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let neighbor_map = g.neighbor_map();
    let adjacency: Vec<Vec<usize>> = nodes
        .iter()
        .map(|node| neighbor_map[*node].iter().map(|nb| index[nb]).collect())
        .collect();

    let component = largest_component(&adjacency);
    let size = component.iter().filter(|&&b| b).count();
    if size < 1 {
        return Err(Error::invalid("graph has no nodes to iterate on"));
    }

    let mut v: Vec<f64> =
        component.iter().map(|&b| if b { 1.0 / (size as f64).sqrt() } else { 0.0 }).collect();
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        // w = (A + I) v restricted to the component.
        let mut w = v.clone();
        for (i, nbs) in adjacency.iter().enumerate() {
            if !component[i] {
                continue;
            }
            for &j in nbs {
                w[i] += v[j];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut w {
            *x /= norm;
        }
        residual = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = w;
        if residual < tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "eigenvector centrality residual {residual:.3e} after {max_iterations} iterations"
        )));
    }
    let max = v.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        for x in &mut v {
            *x /= max;
        }
    }
    Ok(nodes.into_iter().zip(v).map(|(n, x)| (n.clone(), x)).collect())
}

fn largest_component(adjacency: &[Vec<usize>]) -> Vec<bool> {
    let n = adjacency.len();
    let mut assigned = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    for start in 0..n {
        if assigned[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        let mut queue = std::collections::VecDeque::from([start]);
        assigned[start] = label;
        let mut size = 0;
        while let Some(u) = queue.pop_front() {
            size += 1;
            for &w in &adjacency[u] {
                if assigned[w] == usize::MAX {
                    assigned[w] = label;
                    queue.push_back(w);
                }
            }
        }
        sizes.push(size);
    }
    // Ties resolve to the component containing the smallest node index.
    let best = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap_or(0);
    assigned.into_iter().map(|c| c == best).collect()
}

/// 10 fixed-size bins over [0, 1]: [0,0.1), ..., [0.9,1.0] with the top bin
/// closed; counts normalized to probabilities.
pub fn histogram10(values: &BTreeMap<EntityType, f64>) -> Result<CentralityHistogram> {
    if values.is_empty() {
        return Err(Error::invalid("histogram over empty value map"));
    }
    let mut counts = [0usize; 10];
    for (node, &v) in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("centrality {v} of {node} outside [0, 1]")));
        }
        let bin = ((v * 10.0).floor() as usize).min(9);
        counts[bin] += 1;
    }
    let total = values.len() as f64;
    let mut probabilities = [0.0; 10];
    for (p, c) in probabilities.iter_mut().zip(counts) {
        *p = c as f64 / total;
    }
    Ok(CentralityHistogram { probabilities })
}

/// Jensen-Shannon distance: sqrt((D(p||m) + D(q||m)) / 2) with m the
/// pointwise mean and D the base-2 Kullback-Leibler divergence. Bounded
/// by 1; zero-probability terms contribute nothing.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    for dist in [p, q] {
        if dist.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("negative probability"));
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("distribution sums to {sum}, not 1")));
        }
    }
    let kl_to_mean = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .filter(|(&x, _)| x > 0.0)
            .map(|(&x, &y)| {
                let m = 0.5 * (x + y);
                x * (x / m).log2()
            })
            .sum()
    };
    let d = 0.5 * (kl_to_mean(p, q) + kl_to_mean(q, p));
    Ok(d.max(0.0).sqrt().min(1.0))
}

/// Full metagraph comparison: edge and node set F1 plus degree- and
/// eigenvector-centrality histogram distances. An empty prediction scores
/// zero F1 and maximal divergence by convention.
pub fn evaluate_metagraph(predicted: &Metagraph, actual: &Metagraph) -> Result<GraphMetrics> {
    if actual.edge_count() == 0 && actual.node_count() == 0 {
        return Err(Error::invalid("empty ground-truth metagraph"));
    }
    if predicted.edge_count() == 0 && predicted.node_count() == 0 {
        log::warn!("empty predicted metagraph: zero F1, maximal divergence");
        return Ok(GraphMetrics {
            edges_f1: 0.0,
            nodes_f1: 0.0,
            degree_jsd: 1.0,
            eigenvector_jsd: 1.0,
        });
    }
    let pe: BTreeSet<String> =
        predicted.edges().map(|e| e.token()).collect::<Result<_>>()?;
    let ae: BTreeSet<String> = actual.edges().map(|e| e.token()).collect::<Result<_>>()?;
    let (_, _, edges_f1) = set_f1(&pe, &ae);
    let pn: BTreeSet<&EntityType> = predicted.nodes().collect();
    let an: BTreeSet<&EntityType> = actual.nodes().collect();
    let (_, _, nodes_f1) = set_f1(&pn, &an);

    let degree_jsd = jsd(
        &histogram10(&degree_centrality(predicted)?)?.probabilities,
        &histogram10(&degree_centrality(actual)?)?.probabilities,
    )?;
    let eigenvector_jsd = jsd(
        &histogram10(&eigenvector_centrality(predicted)?)?.probabilities,
        &histogram10(&eigenvector_centrality(actual)?)?.probabilities,
    )?;
    Ok(GraphMetrics { edges_f1, nodes_f1, degree_jsd, eigenvector_jsd })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge(s: &str, r: &str, o: &str) -> RelationEdge {
        RelationEdge::new(s, r, o, false)
    }

    fn set(edges: &[RelationEdge]) -> BTreeSet<RelationEdge> {
        edges.iter().cloned().collect()
    }

    #[test]
    fn aggregate_unions_predictions() {
        let a = set(&[edge("A", "R", "B")]);
        let b = set(&[edge("A", "R", "B"), edge("B", "S", "C")]);
        let g = aggregate_metagraph([&a, &b]);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.node_count(), 3);

        let empty: Vec<&BTreeSet<RelationEdge>> = vec![];
        assert_eq!(aggregate_metagraph(empty).edge_count(), 0);
    }

    #[test]
    fn set_f1_conventions() {
        let e: BTreeSet<&str> = BTreeSet::new();
        assert_eq!(set_f1(&e, &e), (1.0, 1.0, 1.0));
        let s: BTreeSet<&str> = ["e1"].into();
        assert_eq!(set_f1(&e, &s), (0.0, 0.0, 0.0));
        let same: BTreeSet<&str> = ["e1", "e2"].into();
        assert_eq!(set_f1(&same, &same), (1.0, 1.0, 1.0));
        let other: BTreeSet<&str> = ["e2", "e3"].into();
        assert_eq!(set_f1(&same, &other), (0.5, 0.5, 0.5));
    }

    #[test]
    fn instance_metrics_hand_example() {
        let gold = vec![
            ("a".to_string(), set(&[edge("A", "r", "B")])),
            ("b".to_string(), set(&[edge("A", "r", "B"), edge("B", "s", "C")])),
        ];
        // First instance exact; second gets one of two right plus one wrong.
        let preds = vec![
            ("a".to_string(), set(&[edge("A", "r", "B")])),
            ("b".to_string(), set(&[edge("A", "r", "B"), edge("C", "q", "D")])),
        ];
        let m = instance_metrics(&preds, &gold).unwrap();
        assert_eq!(m.accuracy, 0.5);
        // tp=2, fp=1, fn=1.
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-12);

        let perfect = instance_metrics(&gold, &gold).unwrap();
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.f1, 1.0);

        let empty_preds = vec![
            ("a".to_string(), BTreeSet::new()),
            ("b".to_string(), BTreeSet::new()),
        ];
        let m0 = instance_metrics(&empty_preds, &gold).unwrap();
        assert_eq!(m0.accuracy, 0.0);
        assert_eq!(m0.recall, 0.0);
    }

    #[test]
    fn instance_metrics_id_mismatch() {
        let gold = vec![("a".to_string(), BTreeSet::new())];
        let preds = vec![("zzz".to_string(), BTreeSet::new())];
        assert!(instance_metrics(&preds, &gold).is_err());
    }

    fn path3() -> Metagraph {
        [edge("A", "r", "B"), edge("B", "s", "C")].into_iter().collect()
    }

    fn star4() -> Metagraph {
        ["L1", "L2", "L3"].iter().map(|l| edge("Hub", "r", l)).collect()
    }

    fn complete4() -> Metagraph {
        let names = ["A", "B", "C", "D"];
        let mut g = Metagraph::new();
        for i in 0..4 {
            for j in i + 1..4 {
                g.insert_edge(edge(names[i], "r", names[j]));
            }
        }
        g
    }

    #[test]
    fn degree_examples() {
        let d = degree_centrality(&complete4()).unwrap();
        assert!(d.values().all(|&v| v == 1.0));

        let d = degree_centrality(&path3()).unwrap();
        assert_eq!(d[&EntityType::new("A")], 0.5);
        assert_eq!(d[&EntityType::new("B")], 1.0);
        assert_eq!(d[&EntityType::new("C")], 0.5);

        let d = degree_centrality(&star4()).unwrap();
        assert_eq!(d[&EntityType::new("Hub")], 1.0);
        assert!((d[&EntityType::new("L1")] - 1.0 / 3.0).abs() < 1e-12);

        let single: Metagraph = [edge("A", "r", "A")].into_iter().collect();
        assert!(degree_centrality(&single).is_err());
    }

    #[test]
    fn eigenvector_examples() {
        let e = eigenvector_centrality(&complete4()).unwrap();
        for v in e.values() {
            assert!((v - 1.0).abs() < 1e-8);
        }

        // Path A-B-C: leading eigenvector (1, sqrt(2), 1); max-rescaled.
        let e = eigenvector_centrality(&path3()).unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert!((e[&EntityType::new("A")] - inv_sqrt2).abs() < 1e-8);
        assert!((e[&EntityType::new("B")] - 1.0).abs() < 1e-8);
        assert!((e[&EntityType::new("C")] - inv_sqrt2).abs() < 1e-8);

        // Star: center 1, leaves 1/sqrt(3).
        let e = eigenvector_centrality(&star4()).unwrap();
        let inv_sqrt3 = 1.0 / 3.0f64.sqrt();
        assert!((e[&EntityType::new("Hub")] - 1.0).abs() < 1e-8);
        for l in ["L1", "L2", "L3"] {
            assert!((e[&EntityType::new(l)] - inv_sqrt3).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvector_satisfies_eigen_equation() {
        for g in [path3(), star4(), complete4()] {
            let e = eigenvector_centrality(&g).unwrap();
            let neighbors = g.neighbor_map();
            // lambda via Rayleigh quotient v.Av / v.v on the raw adjacency.
            let nodes: Vec<&EntityType> = g.nodes().collect();
            let v: Vec<f64> = nodes.iter().map(|n| e[*n]).collect();
            let av: Vec<f64> = nodes
                .iter()
                .map(|n| neighbors[*n].iter().map(|m| e[*m]).sum::<f64>())
                .collect();
            let vv: f64 = v.iter().map(|x| x * x).sum();
            let vav: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
            let lambda = vav / vv;
            let residual: f64 = av
                .iter()
                .zip(&v)
                .map(|(a, x)| (a - lambda * x).powi(2))
                .sum::<f64>()
                .sqrt()
                / vv.sqrt();
            assert!(residual < 1e-8, "residual {residual}");
        }
    }

    #[test]
    fn eigenvector_disconnected_scores_largest_component() {
        let g: Metagraph = [
            edge("A", "r", "B"),
            edge("B", "r", "C"),
            edge("X", "r", "Y"),
        ]
        .into_iter()
        .collect();
        let e = eigenvector_centrality(&g).unwrap();
        assert!(e[&EntityType::new("B")] > 0.0);
        assert_eq!(e[&EntityType::new("X")], 0.0);
        assert_eq!(e[&EntityType::new("Y")], 0.0);
    }

    fn vals(pairs: &[(&str, f64)]) -> BTreeMap<EntityType, f64> {
        pairs.iter().map(|(n, v)| (EntityType::new(*n), *v)).collect()
    }

    #[test]
    fn histogram_bins() {
        let h = histogram10(&vals(&[("a", 1.0), ("b", 1.0)])).unwrap();
        assert_eq!(h.probabilities[9], 1.0);

        let h = histogram10(&vals(&[("a", 0.05), ("b", 0.15)])).unwrap();
        assert_eq!(h.probabilities[0], 0.5);
        assert_eq!(h.probabilities[1], 0.5);

        // Half-open bins: exactly 0.1 lands in the second bin.
        let h = histogram10(&vals(&[("a", 0.1)])).unwrap();
        assert_eq!(h.probabilities[1], 1.0);

        assert!(histogram10(&BTreeMap::new()).is_err());
        assert!(histogram10(&vals(&[("a", 1.5)])).is_err());
    }

    #[test]
    fn histogram_probabilities_sum_to_one() {
        let h = histogram10(&vals(&[("a", 0.33), ("b", 0.34), ("c", 0.99)])).unwrap();
        let sum: f64 = h.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jsd_examples() {
        assert_eq!(jsd(&[0.25, 0.75], &[0.25, 0.75]).unwrap(), 0.0);
        assert!((jsd(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        // m = [0.75, 0.25]; D(p||m) = log2(4/3); D(q||m) = 0.5 log2(2/3) + 0.5.
        let d = jsd(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((d - 0.5579).abs() < 1e-4, "jsd {d}");
    }

    #[test]
    fn jsd_input_validation() {
        assert!(jsd(&[1.0], &[0.5, 0.5]).is_err());
        assert!(jsd(&[0.7, 0.7], &[0.5, 0.5]).is_err());
        assert!(jsd(&[-0.5, 1.5], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn evaluate_identity_and_worked_example() {
        let g = star4();
        let m = evaluate_metagraph(&g, &g).unwrap();
        assert_eq!(m.edges_f1, 1.0);
        assert_eq!(m.nodes_f1, 1.0);
        assert_eq!(m.degree_jsd, 0.0);
        assert_eq!(m.eigenvector_jsd, 0.0);

        // Predicted missing one leaf edge of the 3-edge star:
        // edges F1 = 2 * 1 * (2/3) / (1 + 2/3) = 0.8.
        let partial: Metagraph =
            [edge("Hub", "r", "L1"), edge("Hub", "r", "L2")].into_iter().collect();
        let m = evaluate_metagraph(&partial, &g).unwrap();
        assert!((m.edges_f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn renamed_relations_keep_structure() {
        let actual = path3();
        let renamed: Metagraph =
            [edge("A", "x", "B"), edge("B", "y", "C")].into_iter().collect();
        let m = evaluate_metagraph(&renamed, &actual).unwrap();
        assert_eq!(m.nodes_f1, 1.0);
        assert_eq!(m.edges_f1, 0.0);
        assert_eq!(m.degree_jsd, 0.0);
        assert_eq!(m.eigenvector_jsd, 0.0);
    }

    #[test]
    fn empty_prediction_convention() {
        let m = evaluate_metagraph(&Metagraph::new(), &path3()).unwrap();
        assert_eq!(m.edges_f1, 0.0);
        assert_eq!(m.nodes_f1, 0.0);
        assert_eq!(m.degree_jsd, 1.0);
        assert_eq!(m.eigenvector_jsd, 1.0);
        assert!(evaluate_metagraph(&path3(), &Metagraph::new()).is_err());
    }

    proptest! {
        #[test]
        fn jsd_symmetric_and_bounded(
            raw_p in proptest::collection::vec(0.01f64..1.0, 4),
            raw_q in proptest::collection::vec(0.01f64..1.0, 4),
        ) {
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum();
                v.iter().map(|x| x / s).collect::<Vec<f64>>()
            };
            let p = norm(&raw_p);
            let q = norm(&raw_q);
            let a = jsd(&p, &q).unwrap();
            let b = jsd(&q, &p).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(jsd(&p, &p).unwrap() == 0.0);
        }

        #[test]
        fn precision_recall_swap(
            a_bits in 0u8..32, b_bits in 0u8..32,
        ) {
            let mk = |bits: u8| -> BTreeSet<u8> {
                (0..5).filter(|i| bits & (1 << i) != 0).collect()
            };
            let (a, b) = (mk(a_bits), mk(b_bits));
            let (pa, ra, _) = set_f1(&a, &b);
            let (pb, rb, _) = set_f1(&b, &a);
            prop_assert_eq!(pa.to_bits(), rb.to_bits());
            prop_assert_eq!(ra.to_bits(), pb.to_bits());
        }
    }
}
