//! Observations, datasets and the spectral view of a comparison structure:
//! weighted adjacency matrices, their Laplacians and Fiedler values.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::noise::NoiseModel;

/// Largest item universe accepted by the dense eigensolver.
pub const MAX_ITEMS: usize = 2000;
/// A Fiedler value above this counts as connected.
pub const FIEDLER_THRESHOLD: f64 = 1e-10;

/// One comparison: the offered set and the chosen item.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    set: Vec<usize>,
    winner: usize,
}

impl Observation {
    pub fn new(set: Vec<usize>, winner: usize) -> Result<Self> {
        if set.len() < 2 {
            return Err(Error::validation(format!(
                "comparison set needs at least two items, got {}",
                set.len()
            )));
        }
        let mut sorted = set.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("comparison set contains duplicate items"));
        }
        if !set.contains(&winner) {
            return Err(Error::validation(format!(
                "winner {winner} is not a member of the comparison set"
            )));
        }
        Ok(Observation { set, winner })
    }

    pub fn set(&self) -> &[usize] {
        &self.set
    }

    pub fn winner(&self) -> usize {
        self.winner
    }

    pub fn size(&self) -> usize {
        self.set.len()
    }
}

/// An item universe and a sequence of observations over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    item_labels: Vec<String>,
    observations: Vec<Observation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// `.jsonl`/`.json` files are JSON lines, everything else CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => Format::Jsonl,
            _ => Format::Csv,
        }
    }
}

#[derive(Deserialize)]
struct JsonRow {
    set: Vec<String>,
    winner: String,
}

/// Assigns indices to labels in order of first appearance.
#[derive(Default)]
struct Interner {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Interner {
    fn intern(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }
}

fn check_row(line: usize, winner: &str, members: &[String]) -> Result<()> {
    if winner.is_empty() || members.iter().any(|m| m.is_empty()) {
        return Err(Error::Parse {
            line,
            message: "empty label".into(),
        });
    }
    if members.len() < 2 {
        return Err(Error::validation(format!(
            "line {line}: comparison set needs at least two items"
        )));
    }
    let mut sorted: Vec<&String> = members.iter().collect();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::validation(format!(
            "line {line}: comparison set contains duplicate items"
        )));
    }
    if !members.iter().any(|m| m == winner) {
        return Err(Error::validation(format!(
            "line {line}: winner '{winner}' is not a member of the comparison set"
        )));
    }
    Ok(())
}

impl Dataset {
    pub fn new(item_labels: Vec<String>, observations: Vec<Observation>) -> Result<Self> {
        let n = item_labels.len();
        let mut seen = HashMap::with_capacity(n);
        for l in &item_labels {
            if seen.insert(l.as_str(), ()).is_some() {
                return Err(Error::validation(format!("duplicate item label '{l}'")));
            }
        }
        for (t, obs) in observations.iter().enumerate() {
            if let Some(&bad) = obs.set.iter().find(|&&i| i >= n) {
                return Err(Error::validation(format!(
                    "observation {t} references item {bad} but there are only {n} items"
                )));
            }
        }
        Ok(Dataset {
            item_labels,
            observations,
        })
    }

    /// A dataset whose items are labelled `0..n`.
    pub fn with_numbered_items(n: usize, observations: Vec<Observation>) -> Result<Self> {
        Dataset::new((0..n).map(|i| i.to_string()).collect(), observations)
    }

    pub fn n_items(&self) -> usize {
        self.item_labels.len()
    }

    pub fn item_labels(&self) -> &[String] {
        &self.item_labels
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Number of observations.
    pub fn m(&self) -> usize {
        self.observations.len()
    }

    /// The first `len` observations over the same item universe.
    pub fn prefix(&self, len: usize) -> Dataset {
        Dataset {
            item_labels: self.item_labels.clone(),
            observations: self.observations[..len.min(self.m())].to_vec(),
        }
    }

    /// Fraction of observations with each comparison-set size.
    pub fn cardinality_mix(&self) -> BTreeMap<usize, f64> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for obs in &self.observations {
            *counts.entry(obs.size()).or_default() += 1.0;
        }
        let m = self.m() as f64;
        counts.values_mut().for_each(|c| *c /= m);
        counts
    }

    pub fn read_path(path: &Path, format: Format) -> Result<Dataset> {
        let file = File::open(path)?;
        match format {
            Format::Csv => Dataset::from_csv_reader(file),
            Format::Jsonl => Dataset::from_jsonl_reader(BufReader::new(file)),
        }
    }

    /// Parses ragged `winner,member1,member2,...` rows. Lines starting with
    /// `#` are ignored.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut interner = Interner::default();
        let mut observations = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            if record.len() < 3 {
                return Err(Error::Parse {
                    line,
                    message: "expected winner followed by at least two members".into(),
                });
            }
            let winner = &record[0];
            let members: Vec<String> = record.iter().skip(1).map(str::to_string).collect();
            check_row(line, winner, &members)?;
            let w = interner.intern(winner);
            let set = members.iter().map(|m| interner.intern(m)).collect();
            observations.push(Observation { set, winner: w });
        }
        Dataset::finish(interner, observations)
    }

    /// Parses JSON lines of the form `{"set": [...], "winner": "..."}`.
    pub fn from_jsonl_reader<R: BufRead>(reader: R) -> Result<Dataset> {
        let mut interner = Interner::default();
        let mut observations = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let row: JsonRow = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            check_row(line_no, &row.winner, &row.set)?;
            let set = row.set.iter().map(|m| interner.intern(m)).collect();
            let winner = interner.intern(&row.winner);
            observations.push(Observation { set, winner });
        }
        Dataset::finish(interner, observations)
    }

    fn finish(interner: Interner, observations: Vec<Observation>) -> Result<Dataset> {
        if observations.is_empty() {
            log::warn!("input contains no observations");
        }
        Ok(Dataset {
            item_labels: interner.labels,
            observations,
        })
    }

    /// Writes the ragged CSV format read by [`Dataset::from_csv_reader`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let mut row = Vec::new();
        for obs in &self.observations {
            row.clear();
            row.push(self.item_labels[obs.winner].as_str());
            row.extend(obs.set.iter().map(|&i| self.item_labels[i].as_str()));
            w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Connected components of the support graph, each sorted ascending.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n_items();
        let mut uf = UnionFind::<usize>::new(n);
        for obs in &self.observations {
            for &j in &obs.set[1..] {
                uf.union(obs.set[0], j);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            groups.entry(uf.find(i)).or_default().push(i);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|g| g[0]);
        out
    }

    /// Human-readable listing of the components, for error messages.
    pub fn describe_components(&self) -> String {
        self.components()
            .iter()
            .map(|g| {
                let names: Vec<&str> = g
                    .iter()
                    .take(8)
                    .map(|&i| self.item_labels[i].as_str())
                    .collect();
                let more = if g.len() > 8 {
                    format!(", ... ({} items)", g.len())
                } else {
                    String::new()
                };
                format!("{{{}{}}}", names.join(", "), more)
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// Weight given to comparisons of each set size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `w(k) = a`.
    Constant(f64),
    /// `w(k) = 1`.
    Unit,
    /// `w(k) = 1/k²`.
    InverseSquare,
    /// `w*(k) = (k ∂p_k(0)/∂x_1)²` for the given noise model.
    Optimal(NoiseModel),
}

impl Weight {
    pub fn value(&self, k: usize) -> Result<f64> {
        match self {
            Weight::Constant(a) => Ok(*a),
            Weight::Unit => Ok(1.0),
            Weight::InverseSquare => Ok(1.0 / (k as f64).powi(2)),
            Weight::Optimal(model) => model.weight_star(k),
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Constant(a) => write!(f, "const={a}"),
            Weight::Unit => write!(f, "unit"),
            Weight::InverseSquare => write!(f, "inverse-square"),
            Weight::Optimal(m) => write!(f, "optimal:{m}"),
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    /// Accepts `unit`, `inverse-square` (or `1/k^2`), `const=<a>` and
    /// `optimal:<noise spec>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "unit" | "1" => return Ok(Weight::Unit),
            "inverse-square" | "1/k^2" => return Ok(Weight::InverseSquare),
            _ => {}
        }
        if let Some(a) = s.strip_prefix("const=") {
            let a: f64 = a
                .parse()
                .map_err(|_| Error::validation(format!("weight constant '{a}' is not a number")))?;
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::validation(
                    "weight constant must be finite and non-negative",
                ));
            }
            return Ok(Weight::Constant(a));
        }
        if let Some(spec) = s.strip_prefix("optimal:") {
            return Ok(Weight::Optimal(spec.parse()?));
        }
        Err(Error::validation(format!(
            "unknown weight '{s}'; expected unit, inverse-square, const=<a> or optimal:<noise>"
        )))
    }
}

/// Symmetric, non-negative matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAdjacency(DMatrix<f64>);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaplacianSpectrum {
    pub eigenvalues: Vec<f64>,
    pub fiedler: f64,
}

impl WeightedAdjacency {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::validation("adjacency matrix must be square"));
        }
        if n > MAX_ITEMS {
            return Err(Error::validation(format!(
                "{n} items exceeds the supported maximum of {MAX_ITEMS}"
            )));
        }
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::validation(
                    "adjacency matrix must have a zero diagonal",
                ));
            }
            for j in 0..i {
                let v = m[(i, j)];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::validation(
                        "adjacency entries must be finite and non-negative",
                    ));
                }
                if v != m[(j, i)] {
                    return Err(Error::validation("adjacency matrix must be symmetric"));
                }
            }
        }
        Ok(WeightedAdjacency(m))
    }

    /// `m_ij = (n/m) Σ_k w(k) #{t : |S_t| = k, {i,j} ⊆ S_t}`.
    pub fn from_dataset(ds: &Dataset, weight: &Weight) -> Result<Self> {
        if ds.m() == 0 {
            return Err(Error::EmptyDataset);
        }
        Self::from_observations(ds.n_items(), ds.observations(), ds.m(), weight)
    }

    /// Adjacency of `observations`, normalized by `n / normalizer` instead of `n / m`.
    fn from_observations(
        n: usize,
        observations: &[Observation],
        normalizer: usize,
        weight: &Weight,
    ) -> Result<Self> {
        if n > MAX_ITEMS {
            return Err(Error::validation(format!(
                "{n} items exceeds the supported maximum of {MAX_ITEMS}"
            )));
        }
        let mut weights: HashMap<usize, f64> = HashMap::new();
        let mut a = DMatrix::zeros(n, n);
        for obs in observations {
            let k = obs.size();
            let w = match weights.get(&k) {
                Some(&w) => w,
                None => {
                    let w = weight.value(k)?;
                    weights.insert(k, w);
                    w
                }
            };
            let set = obs.set();
            for (x, &i) in set.iter().enumerate() {
                for &j in &set[x + 1..] {
                    a[(i, j)] += w;
                    a[(j, i)] += w;
                }
            }
        }
        let scale = n as f64 / normalizer as f64;
        a *= scale;
        Ok(WeightedAdjacency(a))
    }

    /// Adjacency expected under a-priori unbiased comparison sets with
    /// set-size distribution `mix`: every entry `(1/(n−1)) Σ_k w(k) k(k−1) μ(k)`.
    pub fn expected_unbiased(
        n: usize,
        mix: &BTreeMap<usize, f64>,
        weight: &Weight,
    ) -> Result<Self> {
        let per_pair = unbiased_mass(n, mix, weight)? / (n as f64 - 1.0);
        Ok(WeightedAdjacency(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                per_pair
            }
        })))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// `L = diag(A·1) − A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = -self.0.clone();
        for i in 0..n {
            l[(i, i)] = self.0.row(i).sum();
        }
        l
    }

    pub fn spectrum(&self) -> Result<LaplacianSpectrum> {
        let eigenvalues = symmetric_eigenvalues(&self.laplacian())?;
        let fiedler = eigenvalues.get(1).copied().unwrap_or(0.0);
        Ok(LaplacianSpectrum {
            eigenvalues,
            fiedler,
        })
    }

    pub fn fiedler(&self) -> Result<f64> {
        Ok(self.spectrum()?.fiedler)
    }
}

fn unbiased_mass(n: usize, mix: &BTreeMap<usize, f64>, weight: &Weight) -> Result<f64> {
    if n < 2 {
        return Err(Error::validation("need at least two items"));
    }
    let total: f64 = mix.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::validation(format!(
            "set-size distribution sums to {total}, not 1"
        )));
    }
    let mut mass = 0.0;
    for (&k, &mu) in mix {
        if k < 2 || k > n {
            return Err(Error::validation(format!("set size {k} outside 2..={n}")));
        }
        if mu < 0.0 {
            return Err(Error::validation(
                "set-size probabilities must be non-negative",
            ));
        }
        mass += weight.value(k)? * (k * (k - 1)) as f64 * mu;
    }
    Ok(mass)
}

/// Fiedler value of the expected adjacency for unbiased sets. All off-diagonal
/// entries equal `c`, so `λ_2 = … = λ_n = n c = (n/(n−1)) Σ_k w(k) k(k−1) μ(k)`.
pub fn unbiased_fiedler(n: usize, mix: &BTreeMap<usize, f64>, weight: &Weight) -> Result<f64> {
    Ok(n as f64 / (n as f64 - 1.0) * unbiased_mass(n, mix, weight)?)
}

/// Fiedler values of the adjacency built from the first `step`, `2·step`, …
/// observations, ending with the full dataset.
///
/// Every prefix is normalized by the full-dataset factor `n/m`, so the curve
/// shows how connectivity accumulates towards its final value.
pub fn fiedler_prefix_curve(
    ds: &Dataset,
    weight: &Weight,
    step: usize,
) -> Result<Vec<(usize, f64)>> {
    if step == 0 {
        return Err(Error::validation("prefix step must be at least 1"));
    }
    let m = ds.m();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut lens: Vec<usize> = (1..).map(|i| i * step).take_while(|&l| l <= m).collect();
    if lens.last() != Some(&m) {
        lens.push(m);
    }
    lens.into_par_iter()
        .map(|len| {
            let a = WeightedAdjacency::from_observations(
                ds.n_items(),
                &ds.observations()[..len],
                m,
                weight,
            )?;
            Ok((len, a.fiedler()?))
        })
        .collect()
}

/// Smallest prefix length whose Fiedler value exceeds [`FIEDLER_THRESHOLD`].
pub fn connectivity_threshold(ds: &Dataset, weight: &Weight) -> Result<Option<usize>> {
    let m = ds.m();
    if m == 0 || ds.n_items() < 2 {
        return Ok(None);
    }
    let connected = |len: usize| -> Result<bool> {
        let a = WeightedAdjacency::from_observations(
            ds.n_items(),
            &ds.observations()[..len],
            m,
            weight,
        )?;
        Ok(a.fiedler()? > FIEDLER_THRESHOLD)
    };
    if !connected(m)? {
        return Ok(None);
    }
    // Adding observations never lowers the Fiedler value, so bisect.
    let (mut lo, mut hi) = (0, m);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if connected(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(set: &[usize], w: usize) -> Observation {
        Observation::new(set.to_vec(), w).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-10
    }

    #[test]
    fn csv_ingest_example() {
        let ds = Dataset::from_csv_reader("a,a,b\nc,b,c\n".as_bytes()).unwrap();
        assert_eq!(ds.item_labels(), ["a", "b", "c"]);
        assert_eq!(ds.observations(), [obs(&[0, 1], 0), obs(&[1, 2], 2)]);
    }

    #[test]
    fn csv_ingest_errors_and_comments() {
        let ds = Dataset::from_csv_reader("#winner,members...\n\nx, x ,y\n".as_bytes()).unwrap();
        assert_eq!(ds.m(), 1);
        assert_eq!(ds.item_labels(), ["x", "y"]);
        assert!(matches!(
            Dataset::from_csv_reader("a,b,c\n".as_bytes()),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Dataset::from_csv_reader("a,a\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(Dataset::from_csv_reader("a,a,a\n".as_bytes()).is_err());
        let err = Dataset::from_csv_reader("a,a,b\nb,a,b\nq\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_input_gives_empty_dataset() {
        let ds = Dataset::from_csv_reader("".as_bytes()).unwrap();
        assert_eq!((ds.n_items(), ds.m()), (0, 0));
    }

    #[test]
    fn jsonl_ingest() {
        let text = "{\"set\": [\"a\",\"b\",\"c\"], \"winner\": \"b\"}\n\n{\"set\": [\"c\",\"a\"], \"winner\": \"a\"}\n";
        let ds = Dataset::from_jsonl_reader(text.as_bytes()).unwrap();
        assert_eq!(ds.item_labels(), ["a", "b", "c"]);
        assert_eq!(ds.observations(), [obs(&[0, 1, 2], 1), obs(&[2, 0], 0)]);
        let err =
            Dataset::from_jsonl_reader("{\"set\": [\"a\"], \"winner\": 3}".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn csv_write_then_read_preserves_observations() {
        let ds = Dataset::from_csv_reader("a,a,b,c\nc,b,c\n".as_bytes()).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a,a,b,c\nc,b,c\n");
        assert_eq!(Dataset::from_csv_reader(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn observation_rules() {
        assert!(Observation::new(vec![1], 1).is_err());
        assert!(Observation::new(vec![1, 1], 1).is_err());
        assert!(Observation::new(vec![1, 2], 3).is_err());
        assert!(Dataset::with_numbered_items(2, vec![obs(&[0, 2], 0)]).is_err());
    }

    #[test]
    fn adjacency_examples() {
        let ds =
            Dataset::with_numbered_items(3, vec![obs(&[0, 1], 0), obs(&[0, 1, 2], 2)]).unwrap();
        let a = WeightedAdjacency::from_dataset(&ds, &Weight::Unit).unwrap();
        assert!(close(a.matrix()[(0, 1)], 3.0));
        assert!(close(a.matrix()[(0, 2)], 1.5));
        assert!(close(a.matrix()[(1, 2)], 1.5));

        let ds = Dataset::with_numbered_items(2, vec![obs(&[0, 1], 1)]).unwrap();
        let a = WeightedAdjacency::from_dataset(&ds, &Weight::Unit).unwrap();
        assert!(close(a.matrix()[(0, 1)], 2.0));

        let empty = Dataset::with_numbered_items(2, vec![]).unwrap();
        assert!(matches!(
            WeightedAdjacency::from_dataset(&empty, &Weight::Unit),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn double_round_robin_entries() {
        let n = 6;
        let mut o = Vec::new();
        for _ in 0..2 {
            for i in 0..n {
                for j in i + 1..n {
                    o.push(obs(&[i, j], i));
                }
            }
        }
        let ds = Dataset::with_numbered_items(n, o).unwrap();
        let a = WeightedAdjacency::from_dataset(&ds, &Weight::Constant(0.25)).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j {
                    0.0
                } else {
                    1.0 / (2.0 * (n as f64 - 1.0))
                };
                assert!(close(a.matrix()[(i, j)], expected));
            }
        }
    }

    #[test]
    fn spectrum_examples() {
        let path = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let s = WeightedAdjacency::from_matrix(path)
            .unwrap()
            .spectrum()
            .unwrap();
        for (got, want) in s.eigenvalues.iter().zip([0.0, 1.0, 3.0]) {
            assert!(close(*got, want));
        }
        assert!(close(s.fiedler, 1.0));

        let two_edges =
            Dataset::with_numbered_items(4, vec![obs(&[0, 1], 0), obs(&[2, 3], 2)]).unwrap();
        let a = WeightedAdjacency::from_dataset(&two_edges, &Weight::Unit).unwrap();
        assert!(a.fiedler().unwrap().abs() < 1e-12);
        assert_eq!(two_edges.components(), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(two_edges.describe_components(), "{0, 1} | {2, 3}");
    }

    #[test]
    fn from_matrix_validation() {
        assert!(WeightedAdjacency::from_matrix(DMatrix::from_element(2, 2, 1.0)).is_err());
        assert!(WeightedAdjacency::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, 2.0, 0.0]
        ))
        .is_err());
        assert!(WeightedAdjacency::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, -1.0, -1.0, 0.0]
        ))
        .is_err());
    }

    #[test]
    fn unbiased_examples() {
        let mix2 = BTreeMap::from([(2, 1.0)]);
        let a = WeightedAdjacency::expected_unbiased(10, &mix2, &Weight::Unit).unwrap();
        assert!(close(a.matrix()[(3, 7)], 2.0 / 9.0));
        assert!(close(a.fiedler().unwrap(), 20.0 / 9.0));
        assert!(close(
            unbiased_fiedler(10, &mix2, &Weight::Unit).unwrap(),
            20.0 / 9.0
        ));

        let mix3 = BTreeMap::from([(3, 1.0)]);
        let a = WeightedAdjacency::expected_unbiased(10, &mix3, &Weight::InverseSquare).unwrap();
        assert!(close(a.fiedler().unwrap(), 20.0 / 27.0));

        let a = WeightedAdjacency::expected_unbiased(2, &mix2, &Weight::Unit).unwrap();
        assert!(close(a.matrix()[(0, 1)], 2.0));
        assert!(close(a.fiedler().unwrap(), 4.0));

        let bad = BTreeMap::from([(2, 0.5)]);
        assert!(WeightedAdjacency::expected_unbiased(10, &bad, &Weight::Unit).is_err());
    }

    #[test]
    fn connectivity_examples() {
        let ds = Dataset::with_numbered_items(
            3,
            vec![obs(&[0, 1], 0), obs(&[1, 2], 1), obs(&[0, 2], 2)],
        )
        .unwrap();
        assert_eq!(connectivity_threshold(&ds, &Weight::Unit).unwrap(), Some(2));
        let ds = Dataset::with_numbered_items(4, vec![obs(&[0, 1], 0), obs(&[0, 1], 1)]).unwrap();
        assert_eq!(connectivity_threshold(&ds, &Weight::Unit).unwrap(), None);
        let ds = Dataset::with_numbered_items(2, vec![obs(&[0, 1], 0)]).unwrap();
        assert_eq!(connectivity_threshold(&ds, &Weight::Unit).unwrap(), Some(1));
    }

    #[test]
    fn prefix_curve_points() {
        let ds = Dataset::with_numbered_items(
            3,
            vec![obs(&[0, 1], 0), obs(&[1, 2], 1), obs(&[0, 2], 2)],
        )
        .unwrap();
        let curve = fiedler_prefix_curve(&ds, &Weight::Unit, 2).unwrap();
        assert_eq!(curve.iter().map(|p| p.0).collect::<Vec<_>>(), vec![2, 3]);
        // Full triangle with entries n/m = 1: Fiedler value 3.
        assert!(close(curve[1].1, 3.0));
        assert!(fiedler_prefix_curve(&ds, &Weight::Unit, 0).is_err());
    }

    #[test]
    fn weight_parsing() {
        assert_eq!("unit".parse::<Weight>().unwrap(), Weight::Unit);
        assert_eq!("1/k^2".parse::<Weight>().unwrap(), Weight::InverseSquare);
        assert_eq!(
            "const=0.25".parse::<Weight>().unwrap(),
            Weight::Constant(0.25)
        );
        let w: Weight = "optimal:gumbel:beta=1".parse().unwrap();
        assert!(close(w.value(3).unwrap(), 1.0 / 9.0));
        assert!("bogus".parse::<Weight>().is_err());
        for w in [
            Weight::Unit,
            Weight::InverseSquare,
            Weight::Constant(2.5),
            w,
        ] {
            assert_eq!(w.to_string().parse::<Weight>().unwrap(), w);
        }
    }
}
