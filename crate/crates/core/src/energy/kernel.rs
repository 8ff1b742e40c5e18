use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::Grid;

/// Collocation weights `K(Δ) = h^{2d} / |hΔ|^{d+2s}` indexed by the absolute
/// integer offset per axis, `K(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    dim: usize,
    side: usize,
    s: f64,
    spacing: f64,
    weights: Vec<f64>,
}

impl KernelTable {
    /// Table covering offsets `0..side` on each axis.
    pub fn new(dim: usize, side: usize, m: usize, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid("s", format!("{s} must lie in (0, 1)")));
        }
        if !(1..=2).contains(&dim) {
            return Err(invalid("d", format!("{dim} not in {{1, 2}}")));
        }
        let h = 1.0 / m as f64;
        let scale = h.powf(dim as f64 - 2.0 * s);
        let expo = -(dim as f64 + 2.0 * s) / 2.0;
        let len = side.pow(dim as u32);
        let mut weights = Vec::with_capacity(len);
        for idx in 0..len {
            let (a, b) = (idx % side, idx / side);
            let r2 = (a * a + b * b) as f64;
            weights.push(if idx == 0 { 0.0 } else { scale * r2.powf(expo) });
        }
        Ok(KernelTable {
            dim,
            side,
            s,
            spacing: h,
            weights,
        })
    }

    pub fn for_grid(grid: &Grid, s: f64) -> Result<Self> {
        Self::new(grid.dim(), grid.side(), grid.m(), s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn at(&self, da: usize, db: usize) -> f64 {
        self.weights[da + self.side * db]
    }

    /// `K(Δ)` for a signed offset.
    pub fn weight(&self, delta: [i64; 2]) -> f64 {
        let a = delta[0].unsigned_abs() as usize;
        let b = delta[1].unsigned_abs() as usize;
        if a >= self.side || b >= self.side || (self.dim == 1 && b != 0) {
            panic!("offset {delta:?} outside kernel table of side {}", self.side);
        }
        self.at(a, b)
    }

    pub fn raw(&self) -> &[f64] {
        &self.weights
    }

    /// Cached copy under `dir`, keyed by `(d, side, m, s)`; built and stored on
    /// a miss.
    pub fn load_or_build(
        dir: &std::path::Path,
        dim: usize,
        side: usize,
        m: usize,
        s: f64,
    ) -> Result<Self> {
        let path = dir.join(format!("kernel_d{dim}_side{side}_m{m}_s{:016x}.json", s.to_bits()));
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(table) = serde_json::from_str::<KernelTable>(&text) {
                if table.dim == dim && table.side == side && table.s == s {
                    return Ok(table);
                }
            }
        }
        let table = Self::new(dim, side, m, s)?;
        std::fs::create_dir_all(dir)?;
        std::fs::write(&path, serde_json::to_string(&table)?)?;
        Ok(table)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatvecPath {
    Dense,
    Fft,
}

/// Grid size above which the transform path is used by default.
pub const FFT_THRESHOLD: usize = 128;

/// `(Tv)_i = Σ_{j≠i} K(i-j) v_j` on one grid, dense or by circulant embedding.
#[derive(Clone)]
pub struct ToeplitzOperator {
    dim: usize,
    side: usize,
    kernel: Arc<KernelTable>,
    fft: Option<FftPlan>,
}

#[derive(Clone)]
struct FftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<Complex64>,
}

impl std::fmt::Debug for ToeplitzOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzOperator")
            .field("dim", &self.dim)
            .field("side", &self.side)
            .field("path", &self.path())
            .finish()
    }
}

impl ToeplitzOperator {
    pub fn new(grid: &Grid, kernel: Arc<KernelTable>, path: MatvecPath) -> Result<Self> {
        if kernel.dim() != grid.dim() || kernel.side() < grid.side() {
            return Err(Error::Mismatch("kernel table does not cover the grid".into()));
        }
        let mut op = ToeplitzOperator {
            dim: grid.dim(),
            side: grid.side(),
            kernel,
            fft: None,
        };
        if path == MatvecPath::Fft {
            op.fft = Some(op.plan());
        }
        Ok(op)
    }

    /// Picks the transform path for grids larger than [`FFT_THRESHOLD`].
    pub fn auto(grid: &Grid, kernel: Arc<KernelTable>) -> Result<Self> {
        let path = if grid.len() > FFT_THRESHOLD {
            MatvecPath::Fft
        } else {
            MatvecPath::Dense
        };
        Self::new(grid, kernel, path)
    }

    pub fn path(&self) -> MatvecPath {
        if self.fft.is_some() {
            MatvecPath::Fft
        } else {
            MatvecPath::Dense
        }
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kernel(&self) -> &KernelTable {
        &self.kernel
    }

    fn plan(&self) -> FftPlan {
        let l = self.side;
        let size = 2 * l;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let wrap = |k: usize| -> Option<usize> {
            match k.cmp(&l) {
                std::cmp::Ordering::Less => Some(k),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(size - k),
            }
        };
        let mut symbol = match self.dim {
            1 => (0..size)
                .map(|k| Complex64::new(wrap(k).map_or(0.0, |a| self.kernel.at(a, 0)), 0.0))
                .collect::<Vec<_>>(),
            _ => {
                let mut c = vec![Complex64::new(0.0, 0.0); size * size];
                for kb in 0..size {
                    for ka in 0..size {
                        if let (Some(a), Some(b)) = (wrap(ka), wrap(kb)) {
                            c[ka + size * kb] = Complex64::new(self.kernel.at(a, b), 0.0);
                        }
                    }
                }
                c
            }
        };
        let mut plan = FftPlan {
            size,
            forward,
            inverse,
            symbol: Vec::new(),
        };
        transform(&plan, self.dim, &mut symbol, true);
        plan.symbol = symbol;
        plan
    }

    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.len());
        assert_eq!(out.len(), self.len());
        match &self.fft {
            Some(plan) => self.apply_fft(plan, v, out),
            None => self.apply_dense(v, out),
        }
    }

    pub fn apply_dense(&self, v: &[f64], out: &mut [f64]) {
        let l = self.side;
        let k = &self.kernel;
        match self.dim {
            1 => {
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, vj) in v.iter().enumerate() {
                        acc += k.at(i.abs_diff(j), 0) * vj;
                    }
                    *o = acc;
                }
            }
            _ => {
                for ib in 0..l {
                    for ia in 0..l {
                        let mut acc = 0.0;
                        for jb in 0..l {
                            let db = ib.abs_diff(jb);
                            let row = &v[jb * l..(jb + 1) * l];
                            for (ja, vj) in row.iter().enumerate() {
                                acc += k.at(ia.abs_diff(ja), db) * vj;
                            }
                        }
                        out[ia + l * ib] = acc;
                    }
                }
            }
        }
    }

    fn apply_fft(&self, plan: &FftPlan, v: &[f64], out: &mut [f64]) {
        let l = self.side;
        let size = plan.size;
        let mut buf = match self.dim {
            1 => {
                let mut b = vec![Complex64::new(0.0, 0.0); size];
                for (i, x) in v.iter().enumerate() {
                    b[i].re = *x;
                }
                b
            }
            _ => {
                let mut b = vec![Complex64::new(0.0, 0.0); size * size];
                for kb in 0..l {
                    for ka in 0..l {
                        b[ka + size * kb].re = v[ka + l * kb];
                    }
                }
                b
            }
        };
        transform(plan, self.dim, &mut buf, true);
        for (x, c) in buf.iter_mut().zip(&plan.symbol) {
            *x *= c;
        }
        transform(plan, self.dim, &mut buf, false);
        let norm = 1.0 / (size.pow(self.dim as u32) as f64);
        match self.dim {
            1 => {
                for (o, x) in out.iter_mut().zip(&buf) {
                    *o = x.re * norm;
                }
            }
            _ => {
                for kb in 0..l {
                    for ka in 0..l {
                        out[ka + l * kb] = buf[ka + size * kb].re * norm;
                    }
                }
            }
        }
    }

    /// Row sums `Σ_{j≠i} K(i-j)` restricted to the grid.
    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.len()];
        let mut out = vec![0.0; self.len()];
        self.apply_dense(&ones, &mut out);
        out
    }
}

fn transform(plan: &FftPlan, dim: usize, buf: &mut [Complex64], forward: bool) {
    let f = if forward { &plan.forward } else { &plan.inverse };
    let size = plan.size;
    match dim {
        1 => f.process(buf),
        _ => {
            // rows are contiguous; columns are gathered into a scratch line
            f.process(buf);
            let mut col = vec![Complex64::new(0.0, 0.0); size];
            for ka in 0..size {
                for kb in 0..size {
                    col[kb] = buf[ka + size * kb];
                }
                f.process(&mut col);
                for kb in 0..size {
                    buf[ka + size * kb] = col[kb];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weights_are_symmetric_and_decreasing() {
        let k = KernelTable::new(2, 12, 2, 0.6).unwrap();
        assert_eq!(k.weight([0, 0]), 0.0);
        for a in 1..11i64 {
            assert!(k.weight([a, 0]) > 0.0);
            assert_eq!(k.weight([a, 0]), k.weight([-a, 0]));
            assert_eq!(k.weight([a, 3]), k.weight([3, a]));
            assert!(k.weight([a + 1, 0]) < k.weight([a, 0]));
            assert!(k.weight([0, a + 1]) < k.weight([0, a]));
        }
        // d=1, m=1, s=1/2: K(1) = 1/1^2
        let k1 = KernelTable::new(1, 4, 1, 0.5).unwrap();
        assert!((k1.weight([1, 0]) - 1.0).abs() < 1e-15);
        assert!((k1.weight([2, 0]) - 0.25).abs() < 1e-15);
        // h = 1/2, d = 1, s = 1/4: K = h^{0.5} / |Δ|^{1.5}
        let k2 = KernelTable::new(1, 4, 2, 0.25).unwrap();
        assert!((k2.weight([2, 0]) - 0.5f64.sqrt() / 2f64.powf(1.5)).abs() < 1e-15);
    }

    fn check_paths(dim: usize, n: usize, m: usize, s: f64) {
        let grid = make_grid(dim, n, m).unwrap();
        let table = Arc::new(KernelTable::for_grid(&grid, s).unwrap());
        let dense = ToeplitzOperator::new(&grid, table.clone(), MatvecPath::Dense).unwrap();
        let fast = ToeplitzOperator::new(&grid, table, MatvecPath::Fft).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut a = vec![0.0; grid.len()];
        let mut b = vec![0.0; grid.len()];
        dense.apply(&v, &mut a);
        fast.apply(&v, &mut b);
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn fft_path_matches_dense_d1() {
        check_paths(1, 64, 1, 0.25);
        check_paths(1, 30, 3, 0.75);
    }

    #[test]
    fn fft_path_matches_dense_d2() {
        check_paths(2, 8, 1, 0.5);
        check_paths(2, 6, 2, 0.9);
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = KernelTable::load_or_build(dir.path(), 1, 16, 1, 0.3).unwrap();
        let b = KernelTable::load_or_build(dir.path(), 1, 16, 1, 0.3).unwrap();
        assert_eq!(a, b);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
