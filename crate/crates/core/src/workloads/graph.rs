//! Synthetic graph generators and a CSR file format.
//!
//! Generators emit exactly `edge_factor * 2^scale` directed edges over
//! `2^scale` vertices, deterministically for a seed.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

use super::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphKind {
    Rmat,
    Kronecker,
    Uniform,
    Ssca,
}

impl GraphKind {
    pub const ALL: [GraphKind; 4] = [Self::Rmat, Self::Kronecker, Self::Uniform, Self::Ssca];

    pub fn name(self) -> &'static str {
        match self {
            Self::Rmat => "rmat",
            Self::Kronecker => "kronecker",
            Self::Uniform => "uniform",
            Self::Ssca => "ssca",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| SimError::Config(format!("unknown graph kind `{s}`")))
    }
}

/// Directed graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub offsets: Vec<u64>,
    pub targets: Vec<u64>,
}

const RMAT: [f64; 3] = [0.57, 0.19, 0.19];
const MAGIC: u64 = u64::from_le_bytes(*b"CSRGRAF1");

impl Graph {
    pub fn from_edges(n: usize, edges: &[(u64, u64)]) -> Self {
        let mut offsets = vec![0u64; n + 1];
        for &(u, _) in edges {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut targets = vec![0u64; edges.len()];
        for &(u, v) in edges {
            targets[fill[u as usize] as usize] = v;
            fill[u as usize] += 1;
        }
        Self { offsets, targets }
    }

    pub fn vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edges(&self) -> usize {
        self.targets.len()
    }

    pub fn out_degree(&self, v: usize) -> usize {
        (self.offsets[v + 1] - self.offsets[v]) as usize
    }

    pub fn successors(&self, v: usize) -> &[u64] {
        &self.targets[self.offsets[v] as usize..self.offsets[v + 1] as usize]
    }

    pub fn edge_list(&self) -> Vec<(u64, u64)> {
        (0..self.vertices())
            .flat_map(|u| self.successors(u).iter().map(move |&v| (u as u64, v)))
            .collect()
    }

    /// The reverse graph (in-edges as CSR).
    pub fn transpose(&self) -> Graph {
        let rev: Vec<(u64, u64)> = self.edge_list().into_iter().map(|(u, v)| (v, u)).collect();
        Graph::from_edges(self.vertices(), &rev)
    }

    /// Give every vertex without out-edges a self-loop.
    pub fn with_dangling_self_loops(&self) -> Graph {
        let mut edges = self.edge_list();
        for v in 0..self.vertices() {
            if self.out_degree(v) == 0 {
                edges.push((v as u64, v as u64));
            }
        }
        Graph::from_edges(self.vertices(), &edges)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| SimError::Io(e.to_string());
        let header = [MAGIC, self.vertices() as u64, self.edges() as u64];
        for x in header.iter().chain(&self.offsets).chain(&self.targets) {
            w.write_all(&x.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Graph> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| SimError::Io(e.to_string()))?;
        if bytes.len() % 8 != 0 {
            return Err(SimError::Io("graph file is not a whole number of words".into()));
        }
        let words: Vec<u64> = bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if words.len() < 3 || words[0] != MAGIC {
            return Err(SimError::Io("not a CSR graph file".into()));
        }
        let (n, m) = (words[1] as usize, words[2] as usize);
        if words.len() != 3 + n + 1 + m {
            return Err(SimError::Io("graph file size does not match its header".into()));
        }
        let offsets = words[3..4 + n].to_vec();
        let targets = words[4 + n..].to_vec();
        let ok = offsets[0] == 0
            && offsets.windows(2).all(|w| w[0] <= w[1])
            && offsets[n] as usize == m
            && targets.iter().all(|&t| (t as usize) < n);
        if !ok {
            return Err(SimError::Io("malformed CSR arrays".into()));
        }
        Ok(Graph { offsets, targets })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| SimError::Io(e.to_string()))?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Graph> {
        let f = std::fs::File::open(path).map_err(|e| SimError::Io(e.to_string()))?;
        Graph::read_from(std::io::BufReader::new(f))
    }
}

pub fn gen_graph(kind: GraphKind, scale: u32, edge_factor: usize, seed: u64) -> Result<Graph> {
    if !(1..=30).contains(&scale) {
        return Err(SimError::Config(format!("graph scale {scale} is outside 1..=30")));
    }
    let n = 1usize << scale;
    let m = edge_factor * n;
    let mut rng = rng_for(seed, 0x0067_7261_7068);
    let mut edges = Vec::with_capacity(m);
    match kind {
        GraphKind::Rmat | GraphKind::Kronecker => {
            for _ in 0..m {
                let (mut u, mut v) = (0u64, 0u64);
                for _ in 0..scale {
                    let p: f64 = rng.gen();
                    let (du, dv) = if p < RMAT[0] {
                        (0, 0)
                    } else if p < RMAT[0] + RMAT[1] {
                        (0, 1)
                    } else if p < RMAT[0] + RMAT[1] + RMAT[2] {
                        (1, 0)
                    } else {
                        (1, 1)
                    };
                    u = u << 1 | du;
                    v = v << 1 | dv;
                }
                edges.push((u, v));
            }
            if kind == GraphKind::Kronecker {
                let mut perm: Vec<u64> = (0..n as u64).collect();
                perm.shuffle(&mut rng);
                for e in &mut edges {
                    *e = (perm[e.0 as usize], perm[e.1 as usize]);
                }
            }
        }
        GraphKind::Uniform => {
            for _ in 0..m {
                edges.push((rng.gen_range(0..n as u64), rng.gen_range(0..n as u64)));
            }
        }
        GraphKind::Ssca => {
            // Consecutive cliques of random size; most edges stay inside the
            // source's clique.
            let max_clique = (1usize << scale.div_ceil(3)).max(2);
            let mut clique_of = Vec::with_capacity(n);
            let mut starts = Vec::new();
            while clique_of.len() < n {
                let size = rng.gen_range(1..=max_clique).min(n - clique_of.len());
                starts.push((clique_of.len(), size));
                clique_of.extend(std::iter::repeat_n(starts.len() - 1, size));
            }
            for _ in 0..m {
                let u = rng.gen_range(0..n);
                let (lo, size) = starts[clique_of[u]];
                let v = if rng.gen_bool(0.9) {
                    lo + rng.gen_range(0..size)
                } else {
                    rng.gen_range(0..n)
                };
                edges.push((u as u64, v as u64));
            }
        }
    }
    Ok(Graph::from_edges(n, &edges))
}
