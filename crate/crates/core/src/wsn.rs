//! Clustered sensor network: weighted cluster-head election, trust-scored
//! aggregation and time-slotted delivery of record batches.
//!
//! The network is logical only. Nodes carry the attributes the election
//! weighs; no radio, energy or routing behaviour is modeled.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdd::Row;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    pub id: u32,
    /// Number of neighbours.
    pub degree: u32,
    /// Mobility factor (m/s).
    pub mobility: f64,
    /// Cumulative time served (s).
    pub cumulative_time: f64,
    /// Sum of received signal strengths; must be positive.
    pub rssi_sum: f64,
    /// Trust in [0, 1].
    pub trust: f64,
    /// Placement inside the operational area; used for topology dumps only.
    pub position: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightCoefficients {
    pub degree: f64,
    pub rssi: f64,
    pub mobility: f64,
    pub time: f64,
}

impl Default for WeightCoefficients {
    fn default() -> Self {
        WeightCoefficients {
            degree: 0.25,
            rssi: 0.25,
            mobility: 0.25,
            time: 0.25,
        }
    }
}

impl WeightCoefficients {
    pub fn new(degree: f64, rssi: f64, mobility: f64, time: f64) -> Result<Self> {
        let c = WeightCoefficients {
            degree,
            rssi,
            mobility,
            time,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        for v in [self.degree, self.rssi, self.mobility, self.time] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Range {
                    what: "weight coefficient",
                    value: v,
                });
            }
        }
        let sum = self.degree + self.rssi + self.mobility + self.time;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Range {
                what: "weight coefficient sum",
                value: sum,
            });
        }
        Ok(())
    }
}

/// Election settings. `capacity` defaults to ⌈nodes / clusters⌉ when unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectionParams {
    pub clusters: usize,
    pub capacity: Option<u32>,
    pub coefficients: WeightCoefficients,
}

/// Reciprocal RSSI sums min-max normalized over `nodes`: the weakest signal
/// maps to 1, the strongest to 0, and a uniform population to 0.
pub fn normalized_inverse_rssi(nodes: &[SensorNode]) -> Result<Vec<f64>> {
    let inv: Vec<f64> = nodes
        .iter()
        .map(|n| {
            if n.rssi_sum > 0.0 && n.rssi_sum.is_finite() {
                Ok(1.0 / n.rssi_sum)
            } else {
                Err(Error::NonPositiveRssi {
                    node: n.id,
                    value: n.rssi_sum,
                })
            }
        })
        .collect::<Result<_>>()?;
    let lo = inv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(inv
        .iter()
        .map(|&x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
        .collect())
}

/// Combined election weight
/// `G = g_d·|D − Γ| + g_sum·ρ + g_m·M + g_h·h`, where `rho` is the node's
/// entry from [`normalized_inverse_rssi`]. Lower is more eligible.
pub fn node_weight(node: &SensorNode, rho: f64, capacity: u32, g: &WeightCoefficients) -> Result<f64> {
    if node.rssi_sum.is_nan() || node.rssi_sum <= 0.0 {
        return Err(Error::NonPositiveRssi {
            node: node.id,
            value: node.rssi_sum,
        });
    }
    if capacity == 0 {
        return Err(Error::Range {
            what: "cluster-head capacity",
            value: 0.0,
        });
    }
    let degree_diff = (f64::from(node.degree) - f64::from(capacity)).abs();
    Ok(g.degree * degree_diff + g.rssi * rho + g.mobility * node.mobility + g.time * node.cumulative_time)
}

/// Weights for a whole population, normalizing RSSI over that population.
pub fn population_weights(nodes: &[SensorNode], capacity: u32, g: &WeightCoefficients) -> Result<Vec<f64>> {
    let rho = normalized_inverse_rssi(nodes)?;
    nodes
        .iter()
        .zip(rho)
        .map(|(n, r)| node_weight(n, r, capacity, g))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub head: u32,
    pub members: Vec<u32>,
    /// Aggregated trust of the head.
    pub head_trust: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub clusters: Vec<Cluster>,
}

impl ClusterAssignment {
    pub fn heads(&self) -> Vec<u32> {
        self.clusters.iter().map(|c| c.head).collect()
    }

    pub fn cluster_of(&self, node: u32) -> Option<usize> {
        self.clusters
            .iter()
            .position(|c| c.head == node || c.members.contains(&node))
    }
}

/// Elects `params.clusters` heads: repeatedly recompute weights over the
/// remaining nodes, take the minimum (lower id on ties) and remove it. Every
/// other node then joins the head nearest by id (lower head id on ties).
/// Head trust comes from [`trust_aggregate`] with pairwise trusts drawn from
/// `pairwise`, indexed by (head, member).
pub fn elect_cluster_heads(
    nodes: &[SensorNode],
    params: &ElectionParams,
    pairwise: impl Fn(u32, u32) -> f64,
) -> Result<ClusterAssignment> {
    let n = params.clusters;
    if n == 0 || n > nodes.len() {
        return Err(Error::InsufficientNodes {
            requested: n,
            available: nodes.len(),
        });
    }
    params.coefficients.validate()?;
    let capacity = params
        .capacity
        .unwrap_or_else(|| nodes.len().div_ceil(n) as u32);

    let mut remaining: Vec<SensorNode> = nodes.to_vec();
    remaining.sort_by_key(|n| n.id);
    let mut heads = Vec::with_capacity(n);
    for _ in 0..n {
        let weights = population_weights(&remaining, capacity, &params.coefficients)?;
        let best = weights
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1).then(remaining[a.0].id.cmp(&remaining[b.0].id)))
            .map(|(i, _)| i)
            .expect("remaining is non-empty");
        heads.push(remaining.remove(best));
    }

    let mut members: Vec<Vec<&SensorNode>> = vec![Vec::new(); n];
    for node in &remaining {
        let k = heads
            .iter()
            .enumerate()
            .min_by_key(|(_, h)| (node.id.abs_diff(h.id), h.id))
            .map(|(k, _)| k)
            .expect("at least one head");
        members[k].push(node);
    }

    let clusters = heads
        .iter()
        .zip(members)
        .map(|(head, ms)| {
            let head_trust = if ms.is_empty() {
                head.trust
            } else {
                let member_trust: Vec<f64> = ms.iter().map(|m| m.trust).collect();
                let pair: Vec<f64> = ms.iter().map(|m| pairwise(head.id, m.id)).collect();
                trust_aggregate(&member_trust, &pair)?
            };
            Ok(Cluster {
                head: head.id,
                members: ms.iter().map(|m| m.id).collect(),
                head_trust,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ClusterAssignment { clusters })
}

/// Trust of a cluster head:
/// `Σ (T_n + 1)·T_CH^n / Σ (T_n + 1)` over the members.
pub fn trust_aggregate(member_trust: &[f64], pairwise_trust: &[f64]) -> Result<f64> {
    if member_trust.is_empty() {
        return Err(Error::EmptyCluster);
    }
    if member_trust.len() != pairwise_trust.len() {
        return Err(Error::DimensionMismatch {
            expected: member_trust.len(),
            found: pairwise_trust.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&t, &p) in member_trust.iter().zip(pairwise_trust) {
        for v in [t, p] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range { what: "trust", value: v });
            }
        }
        num += (t + 1.0) * p;
        den += t + 1.0;
    }
    Ok(num / den)
}

/// Seeded synthetic population. Ranges: degree 1..=9, mobility [0, 2) m/s,
/// cumulative time [0, 600) s, RSSI sum [0.5, 5), trust [0.5, 1], positions
/// uniform over `area` × `area` metres.
pub fn synthesize_nodes(count: usize, area: f64, seed: u64) -> Vec<SensorNode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count as u32)
        .map(|id| SensorNode {
            id,
            degree: rng.gen_range(1..=9),
            mobility: rng.gen_range(0.0..2.0),
            cumulative_time: rng.gen_range(0.0..600.0),
            rssi_sum: rng.gen_range(0.5..5.0),
            trust: rng.gen_range(0.5..=1.0),
            position: (rng.gen_range(0.0..area), rng.gen_range(0.0..area)),
        })
        .collect()
}

/// Deterministic pairwise trust in [0.5, 1] derived from the two ids and a seed.
pub fn seeded_pairwise_trust(seed: u64) -> impl Fn(u32, u32) -> f64 {
    move |a, b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (u64::from(a) << 32 | u64::from(b)));
        rng.gen_range(0.5..=1.0)
    }
}

/// A contiguous run of records delivered by one cluster head.
#[derive(Debug, Clone, Copy)]
pub struct SlotBatch<'a> {
    pub slot_index: usize,
    pub source_cluster: usize,
    pub head: u32,
    pub head_trust: f64,
    /// Index of the batch's first row in the dataset.
    pub offset: usize,
    pub records: &'a [Row],
}

/// Deals `rows` into consecutive slots of `slot_length` records, assigning
/// slot `i` to cluster `i mod N`. Concatenating the batches in slot order
/// gives back `rows`.
pub fn stream_slots<'a>(
    rows: &'a [Row],
    topology: &'a ClusterAssignment,
    slot_length: usize,
) -> Result<impl Iterator<Item = SlotBatch<'a>> + 'a> {
    if slot_length == 0 {
        return Err(Error::Range {
            what: "slot length",
            value: 0.0,
        });
    }
    if topology.clusters.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let n = topology.clusters.len();
    Ok(rows.chunks(slot_length).enumerate().map(move |(i, chunk)| {
        let cluster = &topology.clusters[i % n];
        SlotBatch {
            slot_index: i,
            source_cluster: i % n,
            head: cluster.head,
            head_trust: cluster.head_trust,
            offset: i * slot_length,
            records: chunk,
        }
    }))
}

#[derive(Serialize)]
struct TopologyDump<'a> {
    nodes: &'a [SensorNode],
    clusters: &'a [Cluster],
}

pub fn write_topology_json(path: &Path, nodes: &[SensorNode], topo: &ClusterAssignment) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(
        out,
        &TopologyDump {
            nodes,
            clusters: &topo.clusters,
        },
    )?;
    Ok(())
}

/// Slot trace CSV: `slot_index,cluster,record_count`.
pub fn write_slot_trace(path: &Path, slots: &[(usize, usize, usize)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "slot_index,cluster,record_count")?;
    for (i, c, n) in slots {
        writeln!(out, "{i},{c},{n}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdd::AttackClass;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn node(id: u32, degree: u32, mobility: f64, time: f64, rssi: f64) -> SensorNode {
        SensorNode {
            id,
            degree,
            mobility,
            cumulative_time: time,
            rssi_sum: rssi,
            trust: 0.8,
            position: (0.0, 0.0),
        }
    }

    fn params(clusters: usize) -> ElectionParams {
        ElectionParams {
            clusters,
            capacity: None,
            coefficients: WeightCoefficients::default(),
        }
    }

    #[test]
    fn identical_nodes_have_identical_weights() {
        let ns = [node(0, 3, 0.5, 10.0, 2.0), node(1, 3, 0.5, 10.0, 2.0)];
        let w = population_weights(&ns, 5, &WeightCoefficients::default()).unwrap();
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn zero_coefficients_give_zero_weight() {
        let g = WeightCoefficients {
            degree: 0.0,
            rssi: 0.0,
            mobility: 0.0,
            time: 0.0,
        };
        let ns = synthesize_nodes(10, 100.0, 1);
        for w in population_weights(&ns, 3, &g).unwrap() {
            assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn degree_matching_capacity_gives_zero() {
        let g = WeightCoefficients::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let n = node(0, 5, 0.0, 0.0, 1.0);
        assert_eq!(node_weight(&n, 0.3, 5, &g).unwrap(), 0.0);
    }

    #[test]
    fn rejects_nonpositive_rssi_and_bad_coefficients() {
        let n = node(7, 5, 0.0, 0.0, 0.0);
        assert!(matches!(
            node_weight(&n, 0.0, 5, &WeightCoefficients::default()),
            Err(Error::NonPositiveRssi { node: 7, .. })
        ));
        assert!(WeightCoefficients::new(0.5, 0.5, 0.5, 0.0).is_err());
    }

    #[test]
    fn single_cluster_picks_minimum_weight() {
        let ns = synthesize_nodes(12, 100.0, 4);
        let cap = 12;
        let w = population_weights(&ns, cap, &WeightCoefficients::default()).unwrap();
        let expected = ns
            .iter()
            .zip(&w)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
            .id;
        let topo = elect_cluster_heads(&ns, &params(1), seeded_pairwise_trust(0)).unwrap();
        assert_eq!(topo.heads(), vec![expected]);
        assert_eq!(topo.clusters[0].members.len(), 11);
    }

    #[test]
    fn ties_go_to_lower_id() {
        let ns = [node(4, 2, 0.0, 0.0, 1.0), node(2, 2, 0.0, 0.0, 1.0), node(9, 8, 1.0, 5.0, 1.0)];
        let topo = elect_cluster_heads(&ns, &params(1), seeded_pairwise_trust(0)).unwrap();
        assert_eq!(topo.heads(), vec![2]);
    }

    #[test]
    fn too_many_clusters() {
        let ns = synthesize_nodes(3, 100.0, 1);
        assert!(matches!(
            elect_cluster_heads(&ns, &params(4), seeded_pairwise_trust(0)),
            Err(Error::InsufficientNodes { requested: 4, available: 3 })
        ));
    }

    #[test]
    fn trust_examples() {
        assert!((trust_aggregate(&[1.0, 1.0], &[0.8, 0.6]).unwrap() - 0.7).abs() < 1e-15);
        let c = trust_aggregate(&[0.1, 0.9, 0.4], &[0.3, 0.3, 0.3]).unwrap();
        assert!((c - 0.3).abs() < 1e-15);
        assert!(matches!(trust_aggregate(&[], &[]), Err(Error::EmptyCluster)));
        assert!(matches!(trust_aggregate(&[1.2], &[0.5]), Err(Error::Range { .. })));
    }

    fn rows(n: usize) -> Vec<Row> {
        (0..n)
            .map(|i| Row::new(vec![i as f64], AttackClass::Normal))
            .collect()
    }

    fn two_clusters() -> ClusterAssignment {
        ClusterAssignment {
            clusters: vec![
                Cluster { head: 0, members: vec![1], head_trust: 0.9 },
                Cluster { head: 2, members: vec![3], head_trust: 0.8 },
            ],
        }
    }

    #[test]
    fn slots_alternate_clusters() {
        let rs = rows(4);
        let topo = two_clusters();
        let order: Vec<usize> = stream_slots(&rs, &topo, 1).unwrap().map(|b| b.source_cluster).collect();
        assert_eq!(order, vec![0, 1, 0, 1]);
    }

    #[test]
    fn long_slot_is_whole_dataset() {
        let rs = rows(5);
        let topo = ClusterAssignment {
            clusters: vec![Cluster { head: 0, members: vec![], head_trust: 1.0 }],
        };
        let batches: Vec<_> = stream_slots(&rs, &topo, 10).unwrap().collect();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].records, rs.as_slice());
        assert!(stream_slots(&rs, &topo, 0).is_err());
    }

    proptest! {
        #[test]
        fn election_is_permutation_invariant(seed: u64, count in 4usize..30, k in 1usize..4) {
            let ns = synthesize_nodes(count, 100.0, seed);
            let a = elect_cluster_heads(&ns, &params(k), seeded_pairwise_trust(seed)).unwrap();
            let mut shuffled = ns.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)));
            let b = elect_cluster_heads(&shuffled, &params(k), seeded_pairwise_trust(seed)).unwrap();
            prop_assert_eq!(&a, &b);
            let mut seen: Vec<u32> = a.clusters.iter().flat_map(|c| std::iter::once(c.head).chain(c.members.iter().copied())).collect();
            seen.sort();
            prop_assert_eq!(seen, (0..count as u32).collect::<Vec<_>>());
            prop_assert_eq!(a.clusters.len(), k);
        }

        #[test]
        fn trust_is_convex_combination(pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..20)) {
            let (t, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let v = trust_aggregate(&t, &p).unwrap();
            let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }

        #[test]
        fn slots_are_a_bijection(n in 0usize..200, len in 1usize..17, clusters in 1usize..5) {
            let rs = rows(n);
            let topo = ClusterAssignment {
                clusters: (0..clusters as u32).map(|h| Cluster { head: h, members: vec![], head_trust: 1.0 }).collect(),
            };
            let mut flat = Vec::new();
            for b in stream_slots(&rs, &topo, len).unwrap() {
                prop_assert!(b.records.len() <= len);
                prop_assert_eq!(b.source_cluster, b.slot_index % clusters);
                prop_assert_eq!(b.offset, flat.len());
                flat.extend_from_slice(b.records);
            }
            prop_assert_eq!(flat, rs);
        }
    }
}
