//! Preimages, exit trees (unions of forward orbits) and reverse trees
//! (preimage expansion), with DOT and JSON export.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use serde::Serialize;

use crate::census::Loop;
use crate::error::{Error, Result};
use crate::num::Num;
use crate::program::{Guard, Program};
use crate::trajectory::{positive, walk, Caps, WalkEnd};

pub const DEFAULT_NODE_CAP: usize = 100_000;

/// Every `n <= bound` with `step(n) = v`.
pub fn predecessors(program: &Program, v: &BigUint, bound: &BigUint) -> BTreeSet<BigUint> {
    let mut out = BTreeSet::new();
    if v == &BigUint::from(0u32) {
        return out;
    }
    let doubled: BigUint = v << 1u32;
    if &doubled <= bound {
        out.insert(doubled.clone());
    }
    let rules = program.rules();
    for (i, rule) in rules.iter().enumerate().skip(1) {
        // n = r (2v - c) / q
        let numerator = if rule.offset > 0 {
            if doubled <= BigUint::from(1u32) {
                continue;
            }
            &doubled - 1u32
        } else {
            &doubled + 1u32
        };
        let (q, rem) = (numerator * rule.divisor).div_rem(&BigUint::from(rule.multiplier));
        if rem != BigUint::from(0u32) || !q.bit(0) || &q > bound {
            continue;
        }
        let n = Num::from(&q);
        let matches = match rule.guard {
            Guard::DivisibleBy(d) => n.rem_small(d) == 0,
            _ => true,
        };
        let earlier_fire = rules[1..i].iter().any(|r| match r.guard {
            Guard::DivisibleBy(d) => n.rem_small(d) == 0,
            _ => true,
        });
        if matches && !earlier_fire {
            out.insert(q);
        }
    }
    out
}

/// Nodes with edges `child -> step(child)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OrbitForest {
    pub nodes: BTreeSet<BigUint>,
    pub edges: BTreeMap<BigUint, BigUint>,
    pub roots: BTreeSet<BigUint>,
    pub highlighted: BTreeSet<BigUint>,
}

impl OrbitForest {
    fn add_edge(&mut self, child: BigUint, parent: BigUint) {
        self.nodes.insert(child.clone());
        self.nodes.insert(parent.clone());
        self.edges.insert(child, parent);
    }

    /// Every non-root node has one edge that agrees with the map, and
    /// following edges from any node ends at a root.
    pub fn check(&self, program: &Program) -> bool {
        for n in &self.nodes {
            if self.roots.contains(n) {
                continue;
            }
            match self.edges.get(n) {
                Some(p) if program.step(n).ok().as_ref() == Some(p) => {}
                _ => return false,
            }
        }
        self.nodes.iter().all(|n| {
            let mut cur = n;
            for _ in 0..=self.nodes.len() {
                if self.roots.contains(cur) {
                    return true;
                }
                match self.edges.get(cur) {
                    Some(p) => cur = p,
                    None => return false,
                }
            }
            false
        })
    }
}

/// Union of the orbits of the first `k` odd starts that enter `cycle`, each
/// cut at its first loop member.
pub fn build_exit_tree(
    program: &Program,
    cycle: &Loop,
    k: usize,
    caps: Caps,
    scan_cap: u64,
    node_cap: usize,
) -> Result<OrbitForest> {
    if k == 0 {
        return Err(Error::InvalidRange("need at least one exiter".into()));
    }
    let members = cycle.member_set();
    let mut forest = OrbitForest::default();
    let mut n0 = 1u64;
    while forest.highlighted.len() < k {
        if n0 > scan_cap {
            return Err(Error::NotFound {
                bound: format!(
                    "only {} odd starts up to {scan_cap} exit L{}",
                    forest.highlighted.len(),
                    cycle.min
                ),
            });
        }
        let mut path = vec![Num::from(n0)];
        let end = walk(program, Num::from(n0), caps, |v| members.contains(v), |v, _| path.push(v.clone()));
        if let WalkEnd::Hit { .. } = end {
            let path: Vec<BigUint> = path.into_iter().map(Num::into_big).collect();
            let root = path.last().expect("non-empty").clone();
            forest.nodes.insert(root.clone());
            forest.roots.insert(root);
            for w in path.windows(2) {
                forest.add_edge(w[0].clone(), w[1].clone());
            }
            forest.highlighted.insert(BigUint::from(n0));
            if forest.nodes.len() > node_cap {
                return Err(Error::InvalidRange(format!("exit tree exceeds {node_cap} nodes")));
            }
        }
        n0 += 2;
    }
    Ok(forest)
}

/// Breadth-first preimage expansion from `root` to `depth` levels, nodes
/// bounded by `bound`.
pub fn build_reverse_tree(
    program: &Program,
    root: &BigUint,
    depth: u32,
    bound: &BigUint,
    node_cap: usize,
) -> Result<OrbitForest> {
    positive(root)?;
    let mut forest = OrbitForest::default();
    forest.nodes.insert(root.clone());
    forest.roots.insert(root.clone());
    let mut frontier = VecDeque::from([(root.clone(), 0u32)]);
    while let Some((v, d)) = frontier.pop_front() {
        if d == depth {
            continue;
        }
        for p in predecessors(program, &v, bound) {
            if forest.nodes.contains(&p) {
                continue;
            }
            forest.add_edge(p.clone(), v.clone());
            if forest.nodes.len() > node_cap {
                return Err(Error::InvalidRange(format!("reverse tree exceeds {node_cap} nodes")));
            }
            frontier.push_back((p, d + 1));
        }
    }
    Ok(forest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    Dot,
    Json,
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(GraphFormat::Dot),
            "json" => Ok(GraphFormat::Json),
            _ => Err(Error::InvalidRange(format!("unknown graph format `{s}`"))),
        }
    }
}

#[derive(Serialize)]
struct GraphDoc {
    nodes: Vec<String>,
    edges: Vec<[String; 2]>,
    roots: Vec<String>,
    highlighted: Vec<String>,
}

fn strings(set: &BTreeSet<BigUint>) -> Vec<String> {
    set.iter().map(ToString::to_string).collect()
}

/// Nodes and edges in ascending order of value.
pub fn export_graph(forest: &OrbitForest, format: GraphFormat) -> String {
    match format {
        GraphFormat::Dot => {
            let mut out = String::from("digraph forest {\n");
            for n in &forest.nodes {
                let mut attrs = format!("label=\"{n}\"");
                if forest.roots.contains(n) {
                    attrs.push_str(", shape=doublecircle");
                }
                if forest.highlighted.contains(n) {
                    attrs.push_str(", style=filled, fillcolor=red");
                }
                writeln!(out, "  \"{n}\" [{attrs}];").unwrap();
            }
            for (c, p) in &forest.edges {
                writeln!(out, "  \"{c}\" -> \"{p}\";").unwrap();
            }
            out.push_str("}\n");
            out
        }
        GraphFormat::Json => {
            let doc = GraphDoc {
                nodes: strings(&forest.nodes),
                edges: forest
                    .edges
                    .iter()
                    .map(|(c, p)| [c.to_string(), p.to_string()])
                    .collect(),
                roots: strings(&forest.roots),
                highlighted: strings(&forest.highlighted),
            };
            serde_json::to_string_pretty(&doc).expect("graph serializes") + "\n"
        }
    }
}
