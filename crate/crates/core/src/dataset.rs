//! Benchmark datasets: wheels vs cycles (Case 1) and two-wheel vs two-cycle
//! unions (Case 2), with their JSON file format.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, ComponentKind, Graph};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseId {
    Case1,
    Case2,
}

impl CaseId {
    /// Default top-k for fidelity and consensus: the number of targets per test graph.
    pub fn default_k(self) -> usize {
        match self {
            CaseId::Case1 => 1,
            CaseId::Case2 => 2,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseId::Case1 => "Case1",
            CaseId::Case2 => "Case2",
        })
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1" | "case1" => Ok(CaseId::Case1),
            "2" | "case2" => Ok(CaseId::Case2),
            other => Err(Error::Config(format!("unknown case `{other}` (expected 1 or 2)"))),
        }
    }
}

/// Sampling ranges for graph sizes. Ranges are inclusive node counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeRanges {
    pub case1_wheel_rim: (usize, usize),
    pub case1_cycle: (usize, usize),
    pub case2_component: (usize, usize),
}

impl Default for SizeRanges {
    fn default() -> Self {
        Self { case1_wheel_rim: (5, 12), case1_cycle: (6, 13), case2_component: (5, 8) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub case_id: CaseId,
    pub seed: u64,
    pub train: Vec<Graph>,
    pub test: Vec<Graph>,
}

pub fn generate_dataset(case_id: CaseId, seed: u64) -> Dataset {
    generate_dataset_with(case_id, seed, &SizeRanges::default())
}

pub fn generate_dataset_with(case_id: CaseId, seed: u64, sizes: &SizeRanges) -> Dataset {
    let mut rng = seed::rng(seed::derive(seed, seed::stream::DATASET));
    let mut graphs = Vec::new();
    let wheel = |rng: &mut rand_chacha::ChaCha8Rng| {
        let rim = rng.random_range(sizes.case1_wheel_rim.0..=sizes.case1_wheel_rim.1);
        let hub = rng.random_range(0..=rim);
        graph::make_wheel(rim, hub, rng.next_u64()).expect("configured wheel size is valid")
    };
    let (train, test) = match case_id {
        CaseId::Case1 => {
            for _ in 0..50 {
                graphs.push(wheel(&mut rng));
            }
            for _ in 0..50 {
                let n = rng.random_range(sizes.case1_cycle.0..=sizes.case1_cycle.1);
                let c = graph::make_cycle(n).expect("configured cycle size is valid");
                graphs.push(graph::shuffle_labels(&c, rng.next_u64()).expect("identity-sized permutation"));
            }
            let train = std::mem::take(&mut graphs);
            let test = (0..40).map(|_| wheel(&mut rng)).collect::<Vec<_>>();
            (train, test)
        }
        CaseId::Case2 => {
            let pair = |kind: ComponentKind, rng: &mut rand_chacha::ChaCha8Rng| {
                let (lo, hi) = sizes.case2_component;
                let a = rng.random_range(lo..=hi);
                let b = rng.random_range(lo..=hi);
                graph::make_two_component(kind, kind, [a, b], rng.next_u64())
                    .expect("configured component sizes fit the qubit budget")
            };
            let mut train: Vec<Graph> = (0..120).map(|_| pair(ComponentKind::Wheel, &mut rng)).collect();
            train.extend((0..60).map(|_| pair(ComponentKind::Cycle, &mut rng)));
            let test = (0..40).map(|_| pair(ComponentKind::Wheel, &mut rng)).collect();
            (train, test)
        }
    };
    let mut next_id = 0u64;
    let mut number = |gs: Vec<Graph>| {
        gs.into_iter()
            .map(|g| {
                let g = g.with_id(next_id);
                next_id += 1;
                g
            })
            .collect::<Vec<_>>()
    };
    let train = number(train);
    let test = number(test);
    Dataset { case_id, seed, train, test }
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    case: CaseId,
    seed: u64,
    graphs: Vec<GraphRecord>,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    id: u64,
    split: Split,
    n: usize,
    edges: Vec<[usize; 2]>,
    label: u8,
    targets: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Split {
    Train,
    Test,
}

impl Dataset {
    pub fn to_json(&self) -> Result<String> {
        let record = |g: &Graph, split| GraphRecord {
            id: g.id,
            split,
            n: g.num_nodes(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            label: g.label,
            targets: g.targets().to_vec(),
        };
        let file = DatasetFile {
            case: self.case_id,
            seed: self.seed,
            graphs: self
                .train
                .iter()
                .map(|g| record(g, Split::Train))
                .chain(self.test.iter().map(|g| record(g, Split::Test)))
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        let mut train = Vec::new();
        let mut test = Vec::new();
        for r in file.graphs {
            let g = Graph::new(r.id, r.n, r.edges.iter().map(|e| (e[0], e[1])), r.label, r.targets)?;
            match r.split {
                Split::Train => train.push(g),
                Split::Test => test.push(g),
            }
        }
        Ok(Dataset { case_id: file.case, seed: file.seed, train, test })
    }

    pub fn max_nodes(&self) -> usize {
        self.train.iter().chain(&self.test).map(Graph::num_nodes).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case1_counts_and_sizes() {
        let d = generate_dataset(CaseId::Case1, 11);
        assert_eq!(d.train.len(), 100);
        assert_eq!(d.test.len(), 40);
        assert_eq!(d.train.iter().filter(|g| g.label == 1).count(), 50);
        assert!(d.test.iter().all(|g| g.label == 1 && g.targets().len() == 1));
        assert!(d.max_nodes() <= 13);
        let wheels = d.train.iter().chain(&d.test).filter(|g| g.label == 1);
        assert!(wheels.clone().all(|g| (6..=13).contains(&g.num_nodes())));
        // hub positions are not pinned to a fixed index
        let hubs: std::collections::BTreeSet<usize> = wheels.map(|g| g.targets()[0]).collect();
        assert!(hubs.len() > 5);
    }

    #[test]
    fn case2_counts_and_sizes() {
        let d = generate_dataset(CaseId::Case2, 11);
        assert_eq!(d.train.len(), 180);
        assert_eq!(d.test.len(), 40);
        assert_eq!(d.train.iter().filter(|g| g.label == 1).count(), 120);
        assert!(d.test.iter().all(|g| g.label == 1 && g.targets().len() == 2));
        assert!(d.train.iter().filter(|g| g.label == 0).all(|g| g.targets().is_empty()));
        assert!(d.train.iter().chain(&d.test).all(|g| (10..=16).contains(&g.num_nodes())));
    }

    #[test]
    fn serialization_is_deterministic_and_round_trips() {
        let a = generate_dataset(CaseId::Case2, 5).to_json().unwrap();
        let b = generate_dataset(CaseId::Case2, 5).to_json().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_dataset(CaseId::Case2, 6).to_json().unwrap());
        let back = Dataset::from_json(&a).unwrap();
        assert_eq!(back, generate_dataset(CaseId::Case2, 5));
        assert!(a.starts_with(r#"{"case":"Case2","seed":5,"graphs":[{"id":0,"split":"train","n":"#));
    }

    #[test]
    fn ids_are_unique_across_splits() {
        let d = generate_dataset(CaseId::Case1, 0);
        let ids: Vec<u64> = d.train.iter().chain(&d.test).map(|g| g.id).collect();
        assert_eq!(ids, (0..140).collect::<Vec<_>>());
    }

    #[test]
    fn case_parsing() {
        assert_eq!("1".parse::<CaseId>().unwrap(), CaseId::Case1);
        assert_eq!("Case2".parse::<CaseId>().unwrap(), CaseId::Case2);
        assert!("3".parse::<CaseId>().is_err());
    }
}
