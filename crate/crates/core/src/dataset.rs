//! Collections of i.i.d. cascades and their line-oriented file format.
//!
//! The first line is a JSON header; each following line is one cascade
//! `{"steps": [[seeds], [new at 1], ...], "stable_at": τ}`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{sample_seed_set, simulate, Cascade, CascadeRecord};
use crate::error::{Error, Result};
use crate::graph::{Graph, Model, SeedDistribution};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub graph_digest: String,
    pub seed_dist_digest: String,
    pub model: Model,
    pub rng_seed: u64,
    pub t: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeDataset {
    pub header: DatasetHeader,
    pub cascades: Vec<Cascade>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

/// Cascade `index` of the dataset keyed by `rng_seed`, reproducible alone.
pub fn generate_cascade(
    graph: &Graph,
    dist: &SeedDistribution,
    rng_seed: u64,
    index: u64,
) -> Result<Cascade> {
    let mut rng = rng::stream(rng_seed, Domain::Cascade, index);
    let seeds = sample_seed_set(dist, &mut rng);
    simulate(graph, &seeds, &mut rng)
}

pub fn generate_dataset(
    graph: &Graph,
    dist: &SeedDistribution,
    t: usize,
    rng_seed: u64,
) -> Result<CascadeDataset> {
    generate_dataset_with(graph, dist, t, rng_seed, Execution::Parallel)
}

pub fn generate_dataset_with(
    graph: &Graph,
    dist: &SeedDistribution,
    t: usize,
    rng_seed: u64,
    execution: Execution,
) -> Result<CascadeDataset> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    if dist.n() != graph.n() {
        return Err(Error::InvalidArgument(format!(
            "seed distribution has {} nodes, graph has {}",
            dist.n(),
            graph.n()
        )));
    }
    let one = |i: usize| generate_cascade(graph, dist, rng_seed, i as u64);
    let cascades = match execution {
        Execution::Parallel => (0..t).into_par_iter().map(one).collect::<Result<Vec<_>>>()?,
        Execution::Sequential => (0..t).map(one).collect::<Result<Vec<_>>>()?,
    };
    Ok(CascadeDataset {
        header: DatasetHeader {
            graph_digest: graph.digest(),
            seed_dist_digest: dist.digest(),
            model: graph.model(),
            rng_seed,
            t,
            n: graph.n(),
        },
        cascades,
    })
}

impl CascadeDataset {
    pub fn n(&self) -> usize {
        self.header.n
    }

    pub fn t(&self) -> usize {
        self.cascades.len()
    }

    pub fn model(&self) -> Model {
        self.header.model
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut w = BufWriter::new(w);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for c in &self.cascades {
            serde_json::to_writer(&mut w, &c.to_record())?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let reader = DatasetReader::new(r)?;
        let header = reader.header().clone();
        let cascades = reader.collect::<Result<Vec<_>>>()?;
        if cascades.len() != header.t {
            return Err(Error::Format(format!(
                "header declares t = {} but file holds {} cascades",
                header.t,
                cascades.len()
            )));
        }
        Ok(CascadeDataset { header, cascades })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(std::fs::File::open(path)?))
    }
}

/// Streams cascades from a dataset file without holding them all in memory.
pub struct DatasetReader<R> {
    header: DatasetHeader,
    lines: std::io::Lines<R>,
    line_no: usize,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty dataset file".into()))??;
        let header: DatasetHeader = serde_json::from_str(&first)?;
        Ok(DatasetReader { header, lines, line_no: 1 })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }
}

impl DatasetReader<BufReader<std::fs::File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(std::fs::File::open(path)?))
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<Cascade>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let n = self.header.n;
            let line_no = self.line_no;
            return Some(
                serde_json::from_str::<CascadeRecord>(&line)
                    .map_err(Error::from)
                    .and_then(|r| Cascade::from_record(n, r))
                    .map_err(|e| Error::Format(format!("line {line_no}: {e}"))),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::random_graph;

    #[test]
    fn small_dataset_has_digests() {
        let g = random_graph(4, 0.5, (0.2, 0.8), Model::Ic, 3).unwrap();
        let d = SeedDistribution::uniform(4, 0.3).unwrap();
        let ds = generate_dataset(&g, &d, 3, 17).unwrap();
        assert_eq!(ds.t(), 3);
        assert_eq!(ds.header.graph_digest, g.digest());
        assert_eq!(ds.header.seed_dist_digest, d.digest());
        assert_eq!(ds.header.graph_digest.len(), 64);
        assert!(generate_dataset(&g, &d, 0, 17).is_err());
    }

    #[test]
    fn determinism_and_order_independence() {
        let g = random_graph(7, 0.3, (0.2, 0.9), Model::Lt, 5).unwrap();
        let d = SeedDistribution::uniform(7, 0.25).unwrap();
        let a = generate_dataset_with(&g, &d, 500, 99, Execution::Parallel).unwrap();
        let b = generate_dataset_with(&g, &d, 500, 99, Execution::Sequential).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(a.cascades[123], generate_cascade(&g, &d, 99, 123).unwrap());
        let c = generate_dataset(&g, &d, 500, 100).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
    }

    #[test]
    fn file_round_trip_and_format() {
        let g = Graph::new(2, Model::Ic, &[(0, 1, 1.0)]).unwrap();
        let d = SeedDistribution::new(vec![1.0, 0.0]).unwrap();
        let ds = generate_dataset(&g, &d, 2, 1).unwrap();
        let text = String::from_utf8(ds.to_bytes()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], r#"{"steps":[[0],[1]],"stable_at":2}"#);
        let back = CascadeDataset::read_from(text.as_bytes()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn seeded_fraction_matches_q() {
        // Binomial(1e4, 0.5): sd 0.005, tolerance 0.02 is four sd.
        let g = Graph::new(2, Model::Ic, &[(0, 1, 0.5)]).unwrap();
        let d = SeedDistribution::uniform(2, 0.5).unwrap();
        let ds = generate_dataset(&g, &d, 10_000, 8).unwrap();
        let seeded = ds.cascades.iter().filter(|c| c.seeds().contains(&0)).count();
        assert!((seeded as f64 / 1e4 - 0.5).abs() <= 0.02);
    }

    #[test]
    fn truncated_file_is_rejected() {
        let g = Graph::new(2, Model::Ic, &[(0, 1, 1.0)]).unwrap();
        let d = SeedDistribution::uniform(2, 0.5).unwrap();
        let text = String::from_utf8(generate_dataset(&g, &d, 4, 1).unwrap().to_bytes()).unwrap();
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(CascadeDataset::read_from(cut.as_bytes()).is_err());
        let bad = text.replace("\"stable_at\":", "\"stable_at\":9");
        assert!(CascadeDataset::read_from(bad.as_bytes()).is_err());
    }
}
