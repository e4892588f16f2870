//! TSPLIB ingestion, cost matrices, city pseudonymization and instance
//! encryption.
//!
//! Supported inputs: `TYPE: TSP` with `EDGE_WEIGHT_TYPE` either `EUC_2D`
//! (node coordinates, nearest-integer rounding) or `EXPLICIT` in
//! `LOWER_DIAG_ROW`, `UPPER_ROW` or `FULL_MATRIX` layout. Costs are
//! symmetric and stored strictly upper-triangular; a zero entry marks an
//! unreachable pair, and tours crossing one are an error rather than free.
//!
//! Before encryption the city labels are pseudonymized through a uniformly
//! random bijection φ that stays with the user, so matrix indices carry no
//! city identity. The encrypted container is `PETSP` || version || m || ℓ ||
//! public-key fingerprint || per-pair entries (presence byte, then the
//! ciphertext for reachable pairs).

use rand::RngCore;
use rug::Integer;

use crate::error::{Error, Result};
use crate::fixedpoint::FixedCode;
use crate::rng::substream;
use crate::thpc::{add, enc, Ciphertext, PublicKey};

/// Magic bytes of the encrypted instance container.
pub const CONTAINER_MAGIC: &[u8; 5] = b"PETSP";
/// Magic bytes of the city-map file.
pub const CITYMAP_MAGIC: &[u8; 5] = b"PEMAP";
const CONTAINER_VERSION: u8 = 1;

/// A parsed TSPLIB instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    pub name: String,
    pub m: u32,
    pub data: InstanceData,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceData {
    /// 2-D coordinates per city, costs derived by rounded Euclidean distance.
    Coords(Vec<(f64, f64)>),
    /// Full symmetric matrix, row-major.
    Explicit(Vec<u64>),
}

/// Symmetric pairwise travel costs over cities `1..=m`, stored strictly
/// upper-triangular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMatrix {
    m: u32,
    upper: Vec<u64>,
}

impl CostMatrix {
    /// Builds from an entry function over `1 <= i < j <= m`.
    pub fn from_fn(m: u32, mut entry: impl FnMut(u32, u32) -> u64) -> Self {
        assert!(m >= 3, "a tour needs at least three cities");
        let mut upper = Vec::with_capacity(pair_count(m));
        for i in 1..=m {
            for j in (i + 1)..=m {
                upper.push(entry(i, j));
            }
        }
        Self { m, upper }
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    fn index(&self, i: u32, j: u32) -> usize {
        debug_assert!(i != j && i >= 1 && j >= 1 && i <= self.m && j <= self.m);
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let row_start = (lo - 1) * self.m - lo * (lo - 1) / 2;
        (row_start + hi - lo - 1) as usize
    }

    /// Symmetric cost accessor; zero means the pair is unreachable.
    pub fn cost(&self, i: u32, j: u32) -> u64 {
        self.upper[self.index(i, j)]
    }

    pub fn reachable(&self, i: u32, j: u32) -> bool {
        self.cost(i, j) != 0
    }

    /// Largest single edge cost, the building block of public bounds.
    pub fn max_cost(&self) -> u64 {
        self.upper.iter().copied().max().unwrap_or(0)
    }

    /// Total cost of a closed tour: `m` edges including the return edge.
    pub fn route_cost(&self, tour: &[u32]) -> Result<u64> {
        assert_eq!(tour.len() as u32, self.m, "tour must visit every city");
        let mut total = 0u64;
        for k in 0..tour.len() {
            let i = tour[k];
            let j = tour[(k + 1) % tour.len()];
            if !self.reachable(i, j) {
                return Err(Error::UnreachableEdge { i, j });
            }
            total += self.cost(i, j);
        }
        Ok(total)
    }
}

/// Total entries of a strictly upper-triangular `m × m` matrix.
pub fn pair_count(m: u32) -> usize {
    (m as usize) * (m as usize - 1) / 2
}

/// Plain-text objective, named for symmetry with [`route_cost_enc`].
pub fn route_cost_plain(matrix: &CostMatrix, tour: &[u32]) -> Result<u64> {
    matrix.route_cost(tour)
}

// ---------------------------------------------------------------------------
// TSPLIB parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum WeightKind {
    Euc2d,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExplicitFormat {
    LowerDiagRow,
    UpperRow,
    FullMatrix,
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Parses the supported TSPLIB subset from text.
pub fn parse_tsplib(input: &str) -> Result<TspInstance> {
    let mut name = String::new();
    let mut dimension: Option<u32> = None;
    let mut kind: Option<WeightKind> = None;
    let mut format: Option<ExplicitFormat> = None;
    let mut saw_type = false;
    let mut coords: Vec<(f64, f64)> = Vec::new();
    let mut weights: Vec<u64> = Vec::new();

    #[derive(PartialEq)]
    enum Section {
        Header,
        Coords,
        Weights,
        Done,
    }
    let mut section = Section::Header;

    for (idx, raw_line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            section = Section::Done;
            continue;
        }
        match section {
            Section::Header => {
                if let Some((key, value)) = line.split_once(':') {
                    let key = key.trim().to_ascii_uppercase();
                    let value = value.trim();
                    match key.as_str() {
                        "NAME" => name = value.to_string(),
                        "TYPE" => {
                            if !value.starts_with("TSP") {
                                return Err(Error::UnsupportedFormat(format!(
                                    "TYPE {value} (only TSP is supported)"
                                )));
                            }
                            saw_type = true;
                        }
                        "DIMENSION" => {
                            dimension = Some(value.parse().map_err(|_| {
                                parse_err(lineno, format!("bad DIMENSION {value}"))
                            })?);
                        }
                        "EDGE_WEIGHT_TYPE" => {
                            kind = Some(match value {
                                "EUC_2D" => WeightKind::Euc2d,
                                "EXPLICIT" => WeightKind::Explicit,
                                other => {
                                    return Err(Error::UnsupportedFormat(format!(
                                        "EDGE_WEIGHT_TYPE {other}"
                                    )))
                                }
                            });
                        }
                        "EDGE_WEIGHT_FORMAT" => {
                            format = Some(match value {
                                "LOWER_DIAG_ROW" => ExplicitFormat::LowerDiagRow,
                                "UPPER_ROW" => ExplicitFormat::UpperRow,
                                "FULL_MATRIX" => ExplicitFormat::FullMatrix,
                                other => {
                                    return Err(Error::UnsupportedFormat(format!(
                                        "EDGE_WEIGHT_FORMAT {other}"
                                    )))
                                }
                            });
                        }
                        // COMMENT, DISPLAY_DATA_TYPE, NODE_COORD_TYPE, ...
                        _ => {}
                    }
                } else if line == "NODE_COORD_SECTION" {
                    section = Section::Coords;
                } else if line == "EDGE_WEIGHT_SECTION" {
                    section = Section::Weights;
                } else if line == "DISPLAY_DATA_SECTION" {
                    section = Section::Done;
                } else {
                    return Err(parse_err(lineno, format!("unrecognised line {line:?}")));
                }
            }
            Section::Coords => {
                let mut parts = line.split_whitespace();
                let _id = parts
                    .next()
                    .ok_or_else(|| parse_err(lineno, "missing node id"))?;
                let x: f64 = parts
                    .next()
                    .ok_or_else(|| parse_err(lineno, "missing x coordinate"))?
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad x coordinate"))?;
                let y: f64 = parts
                    .next()
                    .ok_or_else(|| parse_err(lineno, "missing y coordinate"))?
                    .parse()
                    .map_err(|_| parse_err(lineno, "bad y coordinate"))?;
                if !x.is_finite() || !y.is_finite() {
                    return Err(parse_err(lineno, "coordinates must be finite"));
                }
                coords.push((x, y));
                if Some(coords.len() as u32) == dimension {
                    section = Section::Header;
                }
            }
            Section::Weights => {
                for token in line.split_whitespace() {
                    let value: u64 = token
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("bad weight {token}")))?;
                    weights.push(value);
                }
                let m = dimension
                    .ok_or_else(|| parse_err(lineno, "weights before DIMENSION"))?
                    as usize;
                let expected = match format.unwrap_or(ExplicitFormat::FullMatrix) {
                    ExplicitFormat::LowerDiagRow => m * (m + 1) / 2,
                    ExplicitFormat::UpperRow => m * (m - 1) / 2,
                    ExplicitFormat::FullMatrix => m * m,
                };
                if weights.len() >= expected {
                    section = Section::Header;
                }
            }
            Section::Done => {}
        }
    }

    if !saw_type {
        return Err(Error::UnsupportedFormat("missing TYPE: TSP".into()));
    }
    let m = dimension.ok_or_else(|| parse_err(0, "missing DIMENSION"))?;
    if m < 3 {
        return Err(parse_err(0, format!("DIMENSION {m} below 3")));
    }

    match kind {
        Some(WeightKind::Euc2d) => {
            if coords.len() != m as usize {
                return Err(parse_err(
                    0,
                    format!("expected {m} coordinates, found {}", coords.len()),
                ));
            }
            Ok(TspInstance { name, m, data: InstanceData::Coords(coords) })
        }
        Some(WeightKind::Explicit) => {
            let fmt = format.ok_or_else(|| {
                Error::UnsupportedFormat("EXPLICIT without EDGE_WEIGHT_FORMAT".into())
            })?;
            let full = expand_explicit(m, fmt, &weights)?;
            Ok(TspInstance { name, m, data: InstanceData::Explicit(full) })
        }
        None => Err(Error::UnsupportedFormat("missing EDGE_WEIGHT_TYPE".into())),
    }
}

fn expand_explicit(m: u32, fmt: ExplicitFormat, weights: &[u64]) -> Result<Vec<u64>> {
    let mu = m as usize;
    let mut full = vec![0u64; mu * mu];
    match fmt {
        ExplicitFormat::LowerDiagRow => {
            let expected = mu * (mu + 1) / 2;
            if weights.len() != expected {
                return Err(parse_err(
                    0,
                    format!("LOWER_DIAG_ROW needs {expected} weights, found {}", weights.len()),
                ));
            }
            let mut it = weights.iter();
            for i in 0..mu {
                for j in 0..=i {
                    let v = *it.next().unwrap();
                    if i == j {
                        if v != 0 {
                            return Err(parse_err(0, "nonzero diagonal entry"));
                        }
                    } else {
                        full[i * mu + j] = v;
                        full[j * mu + i] = v;
                    }
                }
            }
        }
        ExplicitFormat::UpperRow => {
            let expected = mu * (mu - 1) / 2;
            if weights.len() != expected {
                return Err(parse_err(
                    0,
                    format!("UPPER_ROW needs {expected} weights, found {}", weights.len()),
                ));
            }
            let mut it = weights.iter();
            for i in 0..mu {
                for j in (i + 1)..mu {
                    let v = *it.next().unwrap();
                    full[i * mu + j] = v;
                    full[j * mu + i] = v;
                }
            }
        }
        ExplicitFormat::FullMatrix => {
            if weights.len() != mu * mu {
                return Err(parse_err(
                    0,
                    format!("FULL_MATRIX needs {} weights, found {}", mu * mu, weights.len()),
                ));
            }
            for i in 0..mu {
                if weights[i * mu + i] != 0 {
                    return Err(parse_err(0, "nonzero diagonal entry"));
                }
                for j in 0..mu {
                    if weights[i * mu + j] != weights[j * mu + i] {
                        return Err(parse_err(0, "matrix is not symmetric"));
                    }
                    full[i * mu + j] = weights[i * mu + j];
                }
            }
        }
    }
    Ok(full)
}

/// Serializes back to TSPLIB text; `parse_tsplib` of the output preserves
/// the dimension and all weights.
pub fn to_tsplib_string(instance: &TspInstance) -> String {
    let mut out = String::new();
    out.push_str(&format!("NAME: {}\n", instance.name));
    out.push_str("TYPE: TSP\n");
    out.push_str(&format!("DIMENSION: {}\n", instance.m));
    match &instance.data {
        InstanceData::Coords(coords) => {
            out.push_str("EDGE_WEIGHT_TYPE: EUC_2D\n");
            out.push_str("NODE_COORD_SECTION\n");
            for (i, (x, y)) in coords.iter().enumerate() {
                out.push_str(&format!("{} {} {}\n", i + 1, x, y));
            }
        }
        InstanceData::Explicit(full) => {
            out.push_str("EDGE_WEIGHT_TYPE: EXPLICIT\n");
            out.push_str("EDGE_WEIGHT_FORMAT: FULL_MATRIX\n");
            out.push_str("EDGE_WEIGHT_SECTION\n");
            let m = instance.m as usize;
            for i in 0..m {
                let row: Vec<String> = (0..m).map(|j| full[i * m + j].to_string()).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
    }
    out.push_str("EOF\n");
    out
}

/// TSPLIB nearest-integer distance, rounding half up.
fn euclid_cost(a: (f64, f64), b: (f64, f64)) -> u64 {
    let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    (d + 0.5).floor() as u64
}

/// Turns a parsed instance into its cost matrix.
pub fn build_matrix(instance: &TspInstance) -> CostMatrix {
    match &instance.data {
        InstanceData::Coords(coords) => CostMatrix::from_fn(instance.m, |i, j| {
            euclid_cost(coords[(i - 1) as usize], coords[(j - 1) as usize])
        }),
        InstanceData::Explicit(full) => {
            let m = instance.m as usize;
            CostMatrix::from_fn(instance.m, |i, j| {
                full[(i as usize - 1) * m + (j as usize - 1)]
            })
        }
    }
}

// ---------------------------------------------------------------------------
// pseudonymization
// ---------------------------------------------------------------------------

/// User-held bijection between city labels and pseudonymous indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CityMap {
    /// `forward[label-1] = index`, both 1-based.
    forward: Vec<u32>,
    inverse: Vec<u32>,
}

impl CityMap {
    pub fn identity(m: u32) -> Self {
        let forward: Vec<u32> = (1..=m).collect();
        Self { inverse: forward.clone(), forward }
    }

    /// Uniformly random bijection over `1..=m`.
    pub fn random(m: u32, rng: &mut impl RngCore) -> Self {
        use rand::Rng;
        let mut forward: Vec<u32> = (1..=m).collect();
        for i in (1..forward.len()).rev() {
            let j = rng.gen_range(0..=i);
            forward.swap(i, j);
        }
        let mut inverse = vec![0u32; m as usize];
        for (label0, &index) in forward.iter().enumerate() {
            inverse[(index - 1) as usize] = label0 as u32 + 1;
        }
        Self { forward, inverse }
    }

    pub fn m(&self) -> u32 {
        self.forward.len() as u32
    }

    pub fn to_index(&self, label: u32) -> u32 {
        self.forward[(label - 1) as usize]
    }

    pub fn to_label(&self, index: u32) -> u32 {
        self.inverse[(index - 1) as usize]
    }

    /// Maps a tour over original labels to pseudonymous indices.
    pub fn apply(&self, tour: &[u32]) -> Vec<u32> {
        tour.iter().map(|&c| self.to_index(c)).collect()
    }

    /// Maps a tour over pseudonymous indices back to original labels.
    pub fn apply_inverse(&self, tour: &[u32]) -> Vec<u32> {
        tour.iter().map(|&c| self.to_label(c)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = CITYMAP_MAGIC.to_vec();
        buf.push(CONTAINER_VERSION);
        buf.extend_from_slice(&self.m().to_be_bytes());
        for &index in &self.forward {
            buf.extend_from_slice(&index.to_be_bytes());
        }
        buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 10 || &buf[..5] != CITYMAP_MAGIC {
            return Err(Error::InvalidFile("not a city-map file".into()));
        }
        if buf[5] != CONTAINER_VERSION {
            return Err(Error::InvalidFile(format!("city-map version {}", buf[5])));
        }
        let m = u32::from_be_bytes(buf[6..10].try_into().unwrap());
        if buf.len() != 10 + 4 * m as usize {
            return Err(Error::InvalidFile("city-map length mismatch".into()));
        }
        let mut forward = Vec::with_capacity(m as usize);
        for k in 0..m as usize {
            forward.push(u32::from_be_bytes(buf[10 + 4 * k..14 + 4 * k].try_into().unwrap()));
        }
        let mut inverse = vec![0u32; m as usize];
        let mut seen = vec![false; m as usize];
        for (label0, &index) in forward.iter().enumerate() {
            if index == 0 || index > m || seen[(index - 1) as usize] {
                return Err(Error::InvalidFile("city map is not a bijection".into()));
            }
            seen[(index - 1) as usize] = true;
            inverse[(index - 1) as usize] = label0 as u32 + 1;
        }
        Ok(Self { forward, inverse })
    }
}

/// Applies a city map to a matrix: entry `(φ(i), φ(j))` of the result equals
/// entry `(i, j)` of the input.
pub fn relabel(matrix: &CostMatrix, map: &CityMap) -> CostMatrix {
    assert_eq!(matrix.m(), map.m());
    CostMatrix::from_fn(matrix.m(), |i, j| matrix.cost(map.to_label(i), map.to_label(j)))
}

/// Samples a fresh pseudonymization and returns it with the relabeled
/// matrix. Applying the inverse map to any tour over the relabeled matrix
/// yields a tour of identical cost over the original.
pub fn pseudonymize(matrix: &CostMatrix, rng: &mut impl RngCore) -> (CityMap, CostMatrix) {
    let map = CityMap::random(matrix.m(), rng);
    let relabeled = relabel(matrix, &map);
    (map, relabeled)
}

// ---------------------------------------------------------------------------
// encryption
// ---------------------------------------------------------------------------

/// Cost matrix with every reachable entry encrypted entrywise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedTsp {
    pub m: u32,
    pub scale: u32,
    pub pk_fingerprint: u64,
    entries: Vec<Option<Ciphertext>>,
}

impl EncryptedTsp {
    /// Ciphertext of pair `(i, j)`; `None` for unreachable pairs.
    pub fn entry(&self, i: u32, j: u32) -> Option<&Ciphertext> {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let row_start = (lo - 1) * self.m - lo * (lo - 1) / 2;
        self.entries[(row_start + hi - lo - 1) as usize].as_ref()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = CONTAINER_MAGIC.to_vec();
        buf.push(CONTAINER_VERSION);
        buf.extend_from_slice(&self.m.to_be_bytes());
        buf.extend_from_slice(&self.scale.to_be_bytes());
        buf.extend_from_slice(&self.pk_fingerprint.to_be_bytes());
        for entry in &self.entries {
            match entry {
                Some(ct) => {
                    buf.push(1);
                    buf.extend_from_slice(&ct.to_bytes());
                }
                None => buf.push(0),
            }
        }
        buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < 22 || &buf[..5] != CONTAINER_MAGIC {
            return Err(Error::InvalidFile("not an encrypted instance".into()));
        }
        if buf[5] != CONTAINER_VERSION {
            return Err(Error::InvalidFile(format!("container version {}", buf[5])));
        }
        let m = u32::from_be_bytes(buf[6..10].try_into().unwrap());
        let scale = u32::from_be_bytes(buf[10..14].try_into().unwrap());
        let pk_fingerprint = u64::from_be_bytes(buf[14..22].try_into().unwrap());
        let mut cursor = 22;
        let mut entries = Vec::with_capacity(pair_count(m));
        for _ in 0..pair_count(m) {
            if buf.len() <= cursor {
                return Err(Error::InvalidFile("truncated entry list".into()));
            }
            let present = buf[cursor];
            cursor += 1;
            match present {
                0 => entries.push(None),
                1 => entries.push(Some(Ciphertext::read(buf, &mut cursor)?)),
                other => return Err(Error::InvalidFile(format!("bad presence byte {other}"))),
            }
        }
        if cursor != buf.len() {
            return Err(Error::InvalidFile("trailing bytes in container".into()));
        }
        Ok(Self { m, scale, pk_fingerprint, entries })
    }
}

/// Encrypts every reachable cost at the given scale. Entries use independent
/// randomness streams derived from `root_seed` by entry index, so the result
/// is the same no matter how the work is split across threads.
pub fn encrypt_tsp(
    pk: &PublicKey,
    matrix: &CostMatrix,
    scale: u32,
    root_seed: u64,
) -> Result<EncryptedTsp> {
    let m = matrix.m();
    let half = pk.half_n();
    let mut flat: Vec<(usize, u64)> = Vec::with_capacity(pair_count(m));
    for i in 1..=m {
        for j in (i + 1)..=m {
            flat.push((flat.len(), matrix.cost(i, j)));
        }
    }
    for &(_, cost) in &flat {
        if Integer::from(cost) << scale >= half {
            return Err(Error::Overflow { value: cost.to_string(), scale });
        }
    }

    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(8);
    let chunk = flat.len().div_ceil(workers).max(1);
    let mut entries: Vec<Option<Ciphertext>> = vec![None; flat.len()];
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for piece in flat.chunks(chunk) {
            handles.push(scope.spawn(move || {
                piece
                    .iter()
                    .map(|&(index, cost)| {
                        if cost == 0 {
                            (index, None)
                        } else {
                            let mut rng = substream(root_seed, index as u64);
                            let code = FixedCode::new(Integer::from(cost) << scale, scale);
                            (index, Some(enc(pk, &code, &mut rng)))
                        }
                    })
                    .collect::<Vec<_>>()
            }));
        }
        for handle in handles {
            for (index, ct) in handle.join().expect("encryption worker panicked") {
                entries[index] = ct;
            }
        }
    });

    Ok(EncryptedTsp { m, scale, pk_fingerprint: pk.fingerprint(), entries })
}

/// Homomorphic route cost over the same edge set as [`route_cost_plain`].
pub fn route_cost_enc(
    pk: &PublicKey,
    enc_tsp: &EncryptedTsp,
    tour: &[u32],
) -> Result<Ciphertext> {
    assert_eq!(tour.len() as u32, enc_tsp.m, "tour must visit every city");
    let mut acc: Option<Ciphertext> = None;
    for k in 0..tour.len() {
        let i = tour[k];
        let j = tour[(k + 1) % tour.len()];
        let ct = enc_tsp.entry(i, j).ok_or(Error::UnreachableEdge { i, j })?;
        acc = Some(match acc {
            None => ct.clone(),
            Some(sum) => add(pk, &sum, ct)?,
        });
    }
    Ok(acc.expect("tours have at least three edges"))
}
