//! Collocation grids on the centered box `(-n/2, n/2)^d`, lattice disorder and
//! scalar fields with a nonlocal exterior description.
//!
//! Axis convention: a grid with `n` unit cells and refinement `m` has `L = n*m`
//! points per axis at `x_k = -n/2 + (k + 1/2)/m`, `k = 0..L`. Points are stored
//! with the first axis varying fastest. Disorder lives on integer sites `z`
//! and the point `x` reads the site whose half-open cell `z + [-1/2, 1/2)^d`
//! contains it.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_DIM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    m: usize,
}

/// Builds the collocation grid for `Λ_n = (-n/2, n/2)^d` with `m` points per
/// unit length along each axis.
pub fn make_grid(dim: usize, n: usize, m: usize) -> Result<Grid> {
    Grid::new(dim, n, m)
}

impl Grid {
    pub fn new(dim: usize, n: usize, m: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if n < 2 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "side length {n} must be even and at least 2"
            )));
        }
        if m < 1 {
            return Err(Error::InvalidGrid("refinement must be at least 1".into()));
        }
        Ok(Grid { dim, n, m })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Points per axis.
    pub fn side(&self) -> usize {
        self.n * self.m
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.m as f64
    }

    /// `h^d`, the volume carried by one collocation point.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn half_width(&self) -> f64 {
        self.n as f64 / 2.0
    }

    /// `|Λ_n| = n^d`.
    pub fn volume(&self) -> f64 {
        (self.n as f64).powi(self.dim as i32)
    }

    pub fn diameter(&self) -> f64 {
        self.n as f64 * (self.dim as f64).sqrt()
    }

    pub fn axis_coord(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.m as f64 - self.half_width()
    }

    pub fn multi_index(&self, i: usize) -> [usize; MAX_DIM] {
        let side = self.side();
        match self.dim {
            1 => [i, 0],
            _ => [i % side, i / side],
        }
    }

    pub fn flat_index(&self, k: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => k[0],
            _ => k[0] + self.side() * k[1],
        }
    }

    /// Coordinates of point `i`; the unused second entry is 0 in d = 1.
    pub fn point(&self, i: usize) -> [f64; MAX_DIM] {
        let k = self.multi_index(i);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim {
            x[a] = self.axis_coord(k[a]);
        }
        x
    }

    pub fn points(&self) -> Vec<[f64; MAX_DIM]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Euclidean distance from point `i` to the complement of the box.
    pub fn distance_to_boundary(&self, i: usize) -> f64 {
        let x = self.point(i);
        (0..self.dim)
            .map(|a| self.half_width() - x[a].abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Disorder site read by the point with axis index `k`, computed in exact
    /// integer arithmetic: `floor(x_k + 1/2)`.
    pub fn axis_site(&self, k: usize) -> i64 {
        let m = self.m as i64;
        let num = 2 * k as i64 + 1 + m - (self.n as i64) * m;
        num.div_euclid(2 * m)
    }

    pub fn site_of(&self, i: usize) -> [i64; MAX_DIM] {
        let k = self.multi_index(i);
        let mut z = [0; MAX_DIM];
        for a in 0..self.dim {
            z[a] = self.axis_site(k[a]);
        }
        z
    }

    /// Smallest site box whose cells cover every collocation point.
    pub fn site_box(&self) -> SiteBox {
        let lo = self.axis_site(0);
        let hi = self.axis_site(self.side() - 1);
        SiteBox::new(self.dim, [lo; MAX_DIM], [hi; MAX_DIM]).expect("grid site box is valid")
    }

    /// Concentric enlargement by `pad` unit cells on every side.
    pub fn padded(&self, pad: usize) -> Grid {
        Grid {
            dim: self.dim,
            n: self.n + 2 * pad,
            m: self.m,
        }
    }

    /// Index offset per axis of `self` inside the concentric grid `outer`.
    pub fn offset_in(&self, outer: &Grid) -> Result<usize> {
        if outer.dim != self.dim || outer.m != self.m || outer.n < self.n {
            return Err(Error::Mismatch(format!(
                "grid {self:?} does not embed concentrically in {outer:?}"
            )));
        }
        Ok((outer.n - self.n) / 2 * self.m)
    }

    /// Maps point `i` of `self` to its index in the concentric grid `outer`.
    pub fn embed(&self, outer: &Grid, i: usize) -> Result<usize> {
        let off = self.offset_in(outer)?;
        let mut k = self.multi_index(i);
        for a in 0..self.dim {
            k[a] += off;
        }
        Ok(outer.flat_index(k))
    }
}

/// Inclusive box of integer lattice sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteBox {
    pub dim: usize,
    pub lo: [i64; MAX_DIM],
    pub hi: [i64; MAX_DIM],
}

impl SiteBox {
    pub fn new(dim: usize, lo: [i64; MAX_DIM], hi: [i64; MAX_DIM]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(invalid("d", format!("dimension {dim} not in {{1, 2}}")));
        }
        let mut lo = lo;
        let mut hi = hi;
        for a in dim..MAX_DIM {
            lo[a] = 0;
            hi[a] = 0;
        }
        if (0..dim).any(|a| hi[a] < lo[a]) {
            return Err(invalid("box", format!("empty site box {lo:?}..={hi:?}")));
        }
        Ok(SiteBox { dim, lo, hi })
    }

    /// Sites `-r..=r` on every axis.
    pub fn centered(dim: usize, r: i64) -> Result<Self> {
        Self::new(dim, [-r; MAX_DIM], [r; MAX_DIM])
    }

    pub fn extent(&self, a: usize) -> usize {
        (self.hi[a] - self.lo[a] + 1) as usize
    }

    pub fn len(&self) -> usize {
        (0..self.dim).map(|a| self.extent(a)).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, z: [i64; MAX_DIM]) -> bool {
        (0..self.dim).all(|a| z[a] >= self.lo[a] && z[a] <= self.hi[a])
    }

    pub fn index_of(&self, z: [i64; MAX_DIM]) -> Option<usize> {
        if !self.contains(z) {
            return None;
        }
        let i0 = (z[0] - self.lo[0]) as usize;
        Some(match self.dim {
            1 => i0,
            _ => i0 + self.extent(0) * (z[1] - self.lo[1]) as usize,
        })
    }

    pub fn site(&self, idx: usize) -> [i64; MAX_DIM] {
        match self.dim {
            1 => [self.lo[0] + idx as i64, 0],
            _ => {
                let e = self.extent(0);
                [self.lo[0] + (idx % e) as i64, self.lo[1] + (idx / e) as i64]
            }
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = [i64; MAX_DIM]> + '_ {
        (0..self.len()).map(move |i| self.site(i))
    }

    pub fn translated(&self, y: [i64; MAX_DIM]) -> SiteBox {
        let mut b = *self;
        for a in 0..self.dim {
            b.lo[a] += y[a];
            b.hi[a] += y[a];
        }
        b
    }
}

/// Single-site law of the random field. Only bounded, symmetric, atomless
/// laws with unit variance are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on `[-a, a]`; unit variance needs `a = √3`.
    Uniform { half_width: f64 },
    /// Symmetric triangular on `[-a, a]`; unit variance needs `a = √6`.
    Triangular { half_width: f64 },
}

impl Default for Distribution {
    fn default() -> Self {
        Distribution::Uniform {
            half_width: 3f64.sqrt(),
        }
    }
}

impl Distribution {
    pub fn triangular() -> Self {
        Distribution::Triangular {
            half_width: 6f64.sqrt(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Distribution::Uniform { half_width } => half_width * half_width / 3.0,
            Distribution::Triangular { half_width } => half_width * half_width / 6.0,
        }
    }

    /// The almost-sure bound `A` on `|g|`.
    pub fn bound(&self) -> f64 {
        match *self {
            Distribution::Uniform { half_width } | Distribution::Triangular { half_width } => {
                half_width
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.bound();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidDistribution(format!("half width {a} must be positive")));
        }
        let var = self.variance();
        if (var - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "variance {var} is not normalized to 1"
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { half_width } => half_width * (2.0 * rng.gen::<f64>() - 1.0),
            Distribution::Triangular { half_width } => {
                half_width * (rng.gen::<f64>() + rng.gen::<f64>() - 1.0)
            }
        }
    }
}

fn zigzag(z: i64) -> u64 {
    ((z << 1) ^ (z >> 63)) as u64
}

fn site_stream(z: [i64; MAX_DIM]) -> u64 {
    (zigzag(z[0]) & 0xffff_ffff) | (zigzag(z[1]) << 32)
}

/// Value of the site `z` for the realization `seed`. This is a pure function
/// of `(seed, z)`, so nested and translated boxes see consistent values.
pub fn site_value(dist: &Distribution, seed: u64, z: [i64; MAX_DIM]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(site_stream(z));
    dist.sample(&mut rng)
}

/// Independent per-task seed `hash(base, index)`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index.wrapping_add(1) ^ 0x9e37_79b9_7f4a_7c15);
    rng.gen()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisorderSource {
    Seeded { seed: u64 },
    /// Built by splicing or transforming other realizations; sites outside the
    /// box cannot be regenerated.
    Derived,
}

/// Lattice random field `g(z, ω)` restricted to a finite box of sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disorder {
    bbox: SiteBox,
    dist: Distribution,
    source: DisorderSource,
    /// Applied shift `y` so that values equal `g(z + y, seed)`.
    shift: [i64; MAX_DIM],
    negated: bool,
    values: Vec<f64>,
}

/// Samples i.i.d. values of `dist` on every site of `bbox`.
pub fn sample_disorder(bbox: SiteBox, dist: Distribution, seed: u64) -> Result<Disorder> {
    Disorder::sample(bbox, dist, seed)
}

impl Disorder {
    pub fn sample(bbox: SiteBox, dist: Distribution, seed: u64) -> Result<Self> {
        dist.validate()?;
        let values = bbox.sites().map(|z| site_value(&dist, seed, z)).collect();
        Ok(Disorder {
            bbox,
            dist,
            source: DisorderSource::Seeded { seed },
            shift: [0; MAX_DIM],
            negated: false,
            values,
        })
    }

    /// Zero disorder on `bbox` (the θ = 0 model written with a field present).
    pub fn zeros(bbox: SiteBox) -> Self {
        Disorder {
            bbox,
            dist: Distribution::default(),
            source: DisorderSource::Derived,
            shift: [0; MAX_DIM],
            negated: false,
            values: vec![0.0; bbox.len()],
        }
    }

    pub fn from_values(bbox: SiteBox, dist: Distribution, values: Vec<f64>) -> Result<Self> {
        dist.validate()?;
        if values.len() != bbox.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a box of {} sites",
                values.len(),
                bbox.len()
            )));
        }
        let a = dist.bound();
        if let Some((i, _)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || v.abs() > a)
        {
            return Err(Error::NonFinite(i));
        }
        Ok(Disorder {
            bbox,
            dist,
            source: DisorderSource::Derived,
            shift: [0; MAX_DIM],
            negated: false,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim
    }

    pub fn bbox(&self) -> &SiteBox {
        &self.bbox
    }

    pub fn distribution(&self) -> &Distribution {
        &self.dist
    }

    pub fn source(&self) -> DisorderSource {
        self.source
    }

    pub fn seed(&self) -> Option<u64> {
        match self.source {
            DisorderSource::Seeded { seed } => Some(seed),
            DisorderSource::Derived => None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.source = DisorderSource::Derived;
        &mut self.values
    }

    pub fn get(&self, z: [i64; MAX_DIM]) -> Result<f64> {
        self.bbox
            .index_of(z)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::SiteOutOfBox(z[..self.dim()].to_vec()))
    }

    pub fn set(&mut self, z: [i64; MAX_DIM], value: f64) -> Result<()> {
        let i = self
            .bbox
            .index_of(z)
            .ok_or_else(|| Error::SiteOutOfBox(z[..self.dim()].to_vec()))?;
        self.source = DisorderSource::Derived;
        self.values[i] = value;
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// `g₁(x)`: the value of the site whose half-open unit cell contains `x`.
    pub fn lift(&self, x: &[f64]) -> Result<f64> {
        let mut z = [0i64; MAX_DIM];
        for a in 0..self.dim() {
            z[a] = (x[a] + 0.5).floor() as i64;
        }
        self.bbox
            .index_of(z)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::OutOfSupport(x[..self.dim()].to_vec()))
    }

    /// `g₁` at every point of `grid`, using the exact integer cell rule.
    pub fn lift_grid(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim() {
            return Err(Error::Mismatch("grid and disorder dimensions differ".into()));
        }
        (0..grid.len())
            .map(|i| {
                let z = grid.site_of(i);
                self.bbox
                    .index_of(z)
                    .map(|k| self.values[k])
                    .ok_or_else(|| Error::OutOfSupport(grid.point(i)[..grid.dim()].to_vec()))
            })
            .collect()
    }

    /// `T_y ω`: the new value at `z` is the old value at `z + y`. Sites whose
    /// preimage falls outside the stored box are regenerated from the seed.
    pub fn translate(&self, y: [i64; MAX_DIM]) -> Result<Disorder> {
        let mut values = Vec::with_capacity(self.values.len());
        for z in self.bbox.sites() {
            let mut w = z;
            for a in 0..self.dim() {
                w[a] += y[a];
            }
            let v = match self.bbox.index_of(w) {
                Some(i) => self.values[i],
                None => self.regenerate(w)?,
            };
            values.push(v);
        }
        let mut shift = self.shift;
        for a in 0..self.dim() {
            shift[a] += y[a];
        }
        Ok(Disorder {
            bbox: self.bbox,
            dist: self.dist,
            source: self.source,
            shift,
            negated: self.negated,
            values,
        })
    }

    fn regenerate(&self, w: [i64; MAX_DIM]) -> Result<f64> {
        match self.source {
            DisorderSource::Seeded { seed } => {
                let mut z = w;
                for a in 0..self.dim() {
                    z[a] += self.shift[a];
                }
                let v = site_value(&self.dist, seed, z);
                Ok(if self.negated { -v } else { v })
            }
            DisorderSource::Derived => Err(Error::SiteOutOfBox(w[..self.dim()].to_vec())),
        }
    }

    /// Sitewise `ω ↦ -ω`.
    pub fn negate(&self) -> Disorder {
        Disorder {
            bbox: self.bbox,
            dist: self.dist,
            source: self.source,
            shift: self.shift,
            negated: !self.negated,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    /// Copy of `self` whose sites inside `inner` are taken from `other`.
    pub fn splice(&self, other: &Disorder, inner: &SiteBox) -> Result<Disorder> {
        let mut out = self.clone();
        out.source = DisorderSource::Derived;
        for z in inner.sites() {
            let i = self
                .bbox
                .index_of(z)
                .ok_or_else(|| Error::SiteOutOfBox(z[..self.dim()].to_vec()))?;
            out.values[i] = other.get(z)?;
        }
        Ok(out)
    }

    pub fn snapshot_header(&self) -> SnapshotHeader {
        SnapshotHeader {
            d: self.dim(),
            lo: self.bbox.lo[..self.dim()].to_vec(),
            hi: self.bbox.hi[..self.dim()].to_vec(),
            seed: self.seed(),
            shift: self.shift[..self.dim()].to_vec(),
            negated: self.negated,
            dist: self.dist,
        }
    }

    fn from_snapshot(header: SnapshotHeader, values: Vec<f64>) -> Result<Disorder> {
        let pad = |v: &[i64]| -> Result<[i64; MAX_DIM]> {
            if v.len() != header.d {
                return Err(Error::Snapshot("coordinate length differs from d".into()));
            }
            let mut out = [0; MAX_DIM];
            out[..v.len()].copy_from_slice(v);
            Ok(out)
        };
        let bbox = SiteBox::new(header.d, pad(&header.lo)?, pad(&header.hi)?)?;
        if values.len() != bbox.len() {
            return Err(Error::Snapshot(format!(
                "{} values for {} sites",
                values.len(),
                bbox.len()
            )));
        }
        header.dist.validate()?;
        Ok(Disorder {
            bbox,
            dist: header.dist,
            source: match header.seed {
                Some(seed) => DisorderSource::Seeded { seed },
                None => DisorderSource::Derived,
            },
            shift: pad(&header.shift)?,
            negated: header.negated,
            values,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let snap = JsonSnapshot {
            header: self.snapshot_header(),
            values: self.values.clone(),
        };
        Ok(serde_json::to_string(&snap)?)
    }

    pub fn from_json(s: &str) -> Result<Disorder> {
        let snap: JsonSnapshot = serde_json::from_str(s)?;
        Disorder::from_snapshot(snap.header, snap.values)
    }

    /// Flat binary snapshot: magic, little-endian header length, JSON header,
    /// then the values as little-endian `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.snapshot_header())?;
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(header.len() as u32).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Disorder> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let header: SnapshotHeader = serde_json::from_slice(&header)?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if rest.len() % 8 != 0 {
            return Err(Error::Snapshot("truncated value block".into()));
        }
        let values = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Disorder::from_snapshot(header, values)
    }
}

const BINARY_MAGIC: &[u8; 8] = b"NLRFDIS1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub d: usize,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub seed: Option<u64>,
    pub shift: Vec<i64>,
    pub negated: bool,
    pub dist: Distribution,
}

#[derive(Serialize, Deserialize)]
struct JsonSnapshot {
    header: SnapshotHeader,
    values: Vec<f64>,
}

/// Values on a concentric larger grid, constant beyond it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowExterior {
    pub outer: Grid,
    /// One value per point of `outer`; entries inside the inner box are ignored.
    pub values: Vec<f64>,
    pub tail: f64,
}

/// Prescription of `v` on the complement of the computational box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exterior {
    Constant { value: f64 },
    Window(WindowExterior),
}

impl Exterior {
    pub fn constant(value: f64) -> Self {
        Exterior::Constant { value }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Exterior::Constant { value } => value.abs(),
            Exterior::Window(w) => w
                .values
                .iter()
                .fold(w.tail.abs(), |acc, v| acc.max(v.abs())),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Exterior {
        match self {
            Exterior::Constant { value } => Exterior::constant(f(*value)),
            Exterior::Window(w) => Exterior::Window(WindowExterior {
                outer: w.outer,
                values: w.values.iter().map(|&v| f(v)).collect(),
                tail: f(w.tail),
            }),
        }
    }

    pub fn validate(&self, inner: &Grid) -> Result<()> {
        match self {
            Exterior::Constant { value } if !value.is_finite() => Err(Error::NonFinite(0)),
            Exterior::Constant { .. } => Ok(()),
            Exterior::Window(w) => {
                inner.offset_in(&w.outer)?;
                if w.values.len() != w.outer.len() {
                    return Err(Error::Mismatch("window values length".into()));
                }
                if let Some(i) = w.values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(i));
                }
                if !w.tail.is_finite() {
                    return Err(Error::NonFinite(w.values.len()));
                }
                Ok(())
            }
        }
    }
}

/// Interior values on a grid together with the exterior prescription.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub exterior: Exterior,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>, exterior: Exterior) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        exterior.validate(&grid)?;
        Ok(ScalarField {
            grid,
            values,
            exterior,
        })
    }

    pub fn constant(grid: Grid, value: f64, exterior: Exterior) -> Result<Self> {
        Self::new(grid, vec![value; grid.len()], exterior)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn negated(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| -v).collect(),
            exterior: self.exterior.map(|v| -v),
        }
    }

    /// One CSV row per point: coordinates then value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(if self.grid.dim() == 1 { "x,value\n" } else { "x,y,value\n" });
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.point(i);
            for a in 0..self.grid.dim() {
                out.push_str(&format!("{:.16e},", p[a]));
            }
            out.push_str(&format!("{v:.16e}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_d1() {
        let g = make_grid(1, 4, 1).unwrap();
        let xs: Vec<f64> = g.points().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-1.5, -0.5, 0.5, 1.5]);
        let g = make_grid(1, 2, 2).unwrap();
        let xs: Vec<f64> = g.points().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn grid_points_d2() {
        let g = make_grid(2, 2, 1).unwrap();
        assert_eq!(g.len(), 4);
        let mut pts = g.points();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(make_grid(3, 4, 1).is_err());
        assert!(make_grid(0, 4, 1).is_err());
        assert!(make_grid(1, 5, 1).is_err());
        assert!(make_grid(1, 4, 0).is_err());
    }

    #[test]
    fn grid_geometry() {
        let g = make_grid(2, 6, 3).unwrap();
        assert_eq!(g.len(), 18 * 18);
        assert!((g.diameter() - 6.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g.volume(), 36.0);
        for i in 0..g.len() {
            let p = g.point(i);
            assert!(p[0].abs() < 3.0 && p[1].abs() < 3.0);
            assert!(g.distance_to_boundary(i) > 0.0);
            assert_eq!(g.flat_index(g.multi_index(i)), i);
        }
    }

    #[test]
    fn site_assignment_matches_half_open_rule() {
        for (n, m) in [(2, 1), (4, 1), (2, 2), (6, 3), (8, 4)] {
            let g = make_grid(1, n, m).unwrap();
            for k in 0..g.side() {
                let x = g.axis_coord(k);
                assert_eq!(g.axis_site(k), (x + 0.5).floor() as i64, "n={n} m={m} k={k}");
            }
        }
    }

    #[test]
    fn lift_examples() {
        let bbox = SiteBox::centered(1, 3).unwrap();
        let g = sample_disorder(bbox, Distribution::default(), 11).unwrap();
        assert_eq!(g.lift(&[0.2]).unwrap(), g.get([0, 0]).unwrap());
        assert_eq!(g.lift(&[0.5]).unwrap(), g.get([1, 0]).unwrap());
        assert_eq!(g.lift(&[-0.5]).unwrap(), g.get([0, 0]).unwrap());
        assert!(g.lift(&[10.0]).is_err());

        let grid = make_grid(1, 2, 2).unwrap();
        let lifted = g.lift_grid(&grid).unwrap();
        // points -0.25 and 0.25 both sit in the unit cell of site 0
        assert_eq!(lifted[1], lifted[2]);
        assert_eq!(lifted[1], g.get([0, 0]).unwrap());
        assert_eq!(lifted[3], g.get([1, 0]).unwrap());
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let bbox = SiteBox::centered(2, 5).unwrap();
        let a = sample_disorder(bbox, Distribution::default(), 42).unwrap();
        let b = sample_disorder(bbox, Distribution::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = sample_disorder(bbox, Distribution::default(), 43).unwrap();
        assert_ne!(a.values(), c.values());
        assert!(a.sup_norm() <= 3f64.sqrt());
    }

    #[test]
    fn rejects_unnormalized_distribution() {
        let bbox = SiteBox::centered(1, 2).unwrap();
        assert!(sample_disorder(bbox, Distribution::Uniform { half_width: 1.0 }, 1).is_err());
        assert!(sample_disorder(bbox, Distribution::Triangular { half_width: 1.0 }, 1).is_err());
        assert!(sample_disorder(bbox, Distribution::triangular(), 1).is_ok());
    }

    #[test]
    fn translation_action() {
        let bbox = SiteBox::centered(1, 6).unwrap();
        let g = sample_disorder(bbox, Distribution::default(), 5).unwrap();
        assert_eq!(g.translate([0, 0]).unwrap().values(), g.values());
        let t = g.translate([2, 0]).unwrap();
        for z in -6..=6i64 {
            let expected = site_value(&Distribution::default(), 5, [z + 2, 0]);
            assert_eq!(t.get([z, 0]).unwrap(), expected);
            if z + 2 <= 6 {
                assert_eq!(t.get([z, 0]).unwrap(), g.get([z + 2, 0]).unwrap());
            }
        }
        let back = t.translate([-2, 0]).unwrap();
        assert_eq!(back.values(), g.values());
    }

    #[test]
    fn negation_is_an_involution() {
        let bbox = SiteBox::centered(2, 3).unwrap();
        let g = sample_disorder(bbox, Distribution::default(), 9).unwrap();
        let n = g.negate();
        let mean = |d: &Disorder| d.values().iter().sum::<f64>() / d.values().len() as f64;
        assert_eq!(mean(&n), -mean(&g));
        assert_eq!(n.negate().values(), g.values());
        // regenerated sites also carry the sign
        let t = n.translate([10, 0]).unwrap();
        assert_eq!(
            t.get([0, 0]).unwrap(),
            -site_value(&Distribution::default(), 9, [10, 0])
        );
    }

    #[test]
    fn snapshot_round_trips_bit_exactly() {
        let bbox = SiteBox::new(2, [-3, -1], [2, 4]).unwrap();
        let g = sample_disorder(bbox, Distribution::default(), 77)
            .unwrap()
            .translate([1, -2])
            .unwrap();
        let back = Disorder::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
        let mut buf = Vec::new();
        g.write_binary(&mut buf).unwrap();
        let back = Disorder::read_binary(buf.as_slice()).unwrap();
        assert_eq!(back, g);
        for (a, b) in back.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn scalar_field_validation() {
        let g = make_grid(1, 4, 1).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 3], Exterior::constant(0.0)).is_err());
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 0.0, 0.0], Exterior::constant(0.0)).is_err());
        let f = ScalarField::new(g, vec![0.0, -2.0, 1.0, 0.5], Exterior::constant(1.0)).unwrap();
        assert_eq!(f.sup_norm(), 2.0);
        assert!(f.to_csv().starts_with("x,value\n"));
        let bad_window = Exterior::Window(WindowExterior {
            outer: make_grid(1, 2, 1).unwrap(),
            values: vec![0.0; 2],
            tail: 0.0,
        });
        assert!(ScalarField::new(g, vec![0.0; 4], bad_window).is_err());
    }
}
