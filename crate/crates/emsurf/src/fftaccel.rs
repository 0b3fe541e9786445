//! FFT-accelerated block-Toeplitz operator for inter-cell coupling.
//!
//! Coupling blocks between cells on a rectangular lattice depend only on the
//! lattice offset, so the coupling operator is block-Toeplitz (per axis).
//! Each (local row, local column) pair yields a scalar Toeplitz generator
//! sequence over offsets; embedding it in a circulant turns the matrix-vector
//! product into element-wise spectral multiplication. The method is
//! algebraically exact: apply() matches the densified operator to rounding.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::Cplx;

/// Smallest 2/3/5-smooth integer >= k (FFT-friendly circulant length).
pub fn next_smooth(k: usize) -> usize {
    let mut k = k.max(1);
    loop {
        let mut v = k;
        for p in [2usize, 3, 5] {
            while v % p == 0 {
                v /= p;
            }
        }
        if v == 1 {
            return k;
        }
        k += 1;
    }
}

/// Block-Toeplitz coupling operator with precomputed circulant spectra.
pub struct BlockToeplitzOperator {
    mx: usize,
    my: usize,
    n: usize,
    cx: usize,
    cy: usize,
    /// Spectra per (local row i, local col j): spectra[i * n + j] is a
    /// row-major cy x cx grid.
    spectra: Vec<Vec<Cplx>>,
    /// Generators retained for densify(); indexed like offsets().
    generators: BTreeMap<(i64, i64), DMatrix<Cplx>>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    fft_count: AtomicUsize,
}

enum Direction {
    Forward,
    Inverse,
}

impl BlockToeplitzOperator {
    /// Build from one n x n generator block per lattice offset.
    ///
    /// `generators[(dx, dy)]` couples a test cell at lattice coordinates
    /// (ix, iy) to the source cell at (ix + dx, iy + dy); every offset in
    /// [-(mx-1), mx-1] x [-(my-1), my-1] must be present.
    pub fn new(
        generators: BTreeMap<(i64, i64), DMatrix<Cplx>>,
        mx: usize,
        my: usize,
    ) -> Result<Self> {
        if mx == 0 || my == 0 {
            return Err(Error::Operator("lattice dimensions must be positive".into()));
        }
        let first = generators
            .values()
            .next()
            .ok_or_else(|| Error::Operator("no generator blocks supplied".into()))?;
        let n = first.nrows();
        if n == 0 || first.ncols() != n {
            return Err(Error::Operator("generator blocks must be square and nonempty".into()));
        }
        for dy in -(my as i64 - 1)..=(my as i64 - 1) {
            for dx in -(mx as i64 - 1)..=(mx as i64 - 1) {
                match generators.get(&(dx, dy)) {
                    None => {
                        return Err(Error::Operator(format!(
                            "missing generator block for offset ({dx}, {dy})"
                        )))
                    }
                    Some(g) if g.nrows() != n || g.ncols() != n => {
                        return Err(Error::Operator(format!(
                            "generator block ({dx}, {dy}) has inconsistent dimensions"
                        )))
                    }
                    _ => {}
                }
            }
        }
        let cx = next_smooth(2 * mx - 1);
        let cy = next_smooth(2 * my - 1);
        // Storage bound: 2^(d+1) n^2 M complex numbers for a d-dimensional
        // lattice (smooth padding stays within it).
        let d = usize::from(mx > 1) + usize::from(my > 1);
        let bound = (1usize << (d + 1)) * n * n * mx * my;
        assert!(
            n * n * cx * cy <= bound,
            "spectra storage {} exceeds the bound {}",
            n * n * cx * cy,
            bound
        );

        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(cx);
        let inv_x = planner.plan_fft_inverse(cx);
        let fwd_y = planner.plan_fft_forward(cy);
        let inv_y = planner.plan_fft_inverse(cy);

        let mut op = BlockToeplitzOperator {
            mx,
            my,
            n,
            cx,
            cy,
            spectra: Vec::new(),
            generators,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            fft_count: AtomicUsize::new(0),
        };
        // Circulant embedding: h[(cy - dy) % cy][(cx - dx) % cx] = g(dx, dy),
        // so that circular convolution with the padded input realizes
        // y_t = sum_s g(s - t) x_s on the leading mx x my window.
        let mut spectra = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut grid = vec![Complex64::ZERO; op.cx * op.cy];
                for (&(dx, dy), g) in &op.generators {
                    let kx = ((op.cx as i64 - dx) % op.cx as i64) as usize % op.cx;
                    let ky = ((op.cy as i64 - dy) % op.cy as i64) as usize % op.cy;
                    grid[ky * op.cx + kx] = g[(i, j)];
                }
                op.fft2(&mut grid, Direction::Forward);
                spectra.push(grid);
            }
        }
        op.spectra = spectra;
        // Spectrum FFTs are a build cost, not an apply cost.
        op.fft_count.store(0, Ordering::Relaxed);
        Ok(op)
    }

    pub fn cells(&self) -> usize {
        self.mx * self.my
    }

    pub fn local_size(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.mx, self.my)
    }

    /// Complex numbers held by the cached spectra.
    pub fn storage_complex(&self) -> usize {
        self.n * self.n * self.cx * self.cy
    }

    /// The asserted storage bound 2^(d+1) n^2 M.
    pub fn storage_bound(&self) -> usize {
        let d = usize::from(self.mx > 1) + usize::from(self.my > 1);
        (1usize << (d + 1)) * self.n * self.n * self.cells()
    }

    /// Number of 1-D FFT passes executed by apply() so far (padded-length
    /// transforms; length-1 axes are free and not counted).
    pub fn fft_transforms(&self) -> usize {
        self.fft_count.load(Ordering::Relaxed)
    }

    fn fft2(&self, grid: &mut [Cplx], dir: Direction) {
        let (fx, fy) = match dir {
            Direction::Forward => (&self.fwd_x, &self.fwd_y),
            Direction::Inverse => (&self.inv_x, &self.inv_y),
        };
        if self.cx > 1 {
            for row in grid.chunks_mut(self.cx) {
                fx.process(row);
            }
            self.fft_count.fetch_add(self.cy, Ordering::Relaxed);
        }
        if self.cy > 1 {
            let mut col = vec![Complex64::ZERO; self.cy];
            for x in 0..self.cx {
                for y in 0..self.cy {
                    col[y] = grid[y * self.cx + x];
                }
                fy.process(&mut col);
                for y in 0..self.cy {
                    grid[y * self.cx + x] = col[y];
                }
            }
            self.fft_count.fetch_add(self.cx, Ordering::Relaxed);
        }
    }

    /// y = Z_o x with x cell-major ([cell 0 locals; cell 1 locals; ...]).
    pub fn apply(&self, x: &DVector<Cplx>) -> Result<DVector<Cplx>> {
        let m = self.cells();
        if x.len() != m * self.n {
            return Err(Error::Operator(format!(
                "operand has {} entries, expected {}",
                x.len(),
                m * self.n
            )));
        }
        // Forward transforms of the scattered input, one per local column.
        let xhat: Vec<Vec<Cplx>> = (0..self.n)
            .into_par_iter()
            .map(|j| {
                let mut grid = vec![Complex64::ZERO; self.cx * self.cy];
                for iy in 0..self.my {
                    for ix in 0..self.mx {
                        let cell = iy * self.mx + ix;
                        grid[iy * self.cx + ix] = x[cell * self.n + j];
                    }
                }
                self.fft2(&mut grid, Direction::Forward);
                grid
            })
            .collect();
        // Spectral multiply-accumulate and inverse transform per local row;
        // the sum over j runs in a fixed order for determinism.
        let rows: Vec<Vec<Cplx>> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![Complex64::ZERO; self.cx * self.cy];
                for j in 0..self.n {
                    let spec = &self.spectra[i * self.n + j];
                    for (a, (s, xh)) in acc.iter_mut().zip(spec.iter().zip(&xhat[j])) {
                        *a += s * xh;
                    }
                }
                self.fft2(&mut acc, Direction::Inverse);
                acc
            })
            .collect();
        let scale = 1.0 / (self.cx * self.cy) as f64;
        let mut y = DVector::zeros(m * self.n);
        for (i, grid) in rows.iter().enumerate() {
            for iy in 0..self.my {
                for ix in 0..self.mx {
                    let cell = iy * self.mx + ix;
                    y[cell * self.n + i] = grid[iy * self.cx + ix] * Complex64::from(scale);
                }
            }
        }
        Ok(y)
    }

    /// Explicit dense matrix; test oracle for small instances.
    pub fn densify(&self, cap: usize) -> Result<DMatrix<Cplx>> {
        let total = self.cells() * self.n;
        if total > cap {
            return Err(Error::Operator(format!(
                "densify of {total} unknowns exceeds the cap {cap}"
            )));
        }
        let mut z = DMatrix::zeros(total, total);
        for ty in 0..self.my {
            for tx in 0..self.mx {
                let t = ty * self.mx + tx;
                for sy in 0..self.my {
                    for sx in 0..self.mx {
                        let s = sy * self.mx + sx;
                        let off = (sx as i64 - tx as i64, sy as i64 - ty as i64);
                        let g = &self.generators[&off];
                        z.view_mut((t * self.n, s * self.n), (self.n, self.n)).copy_from(g);
                    }
                }
            }
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_generators(
        mx: usize,
        my: usize,
        n: usize,
        seed: u64,
    ) -> BTreeMap<(i64, i64), DMatrix<Cplx>> {
        let mut rng = seed;
        let mut rand = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng as f64 / u64::MAX as f64) - 0.5
        };
        let mut g = BTreeMap::new();
        for dy in -(my as i64 - 1)..=(my as i64 - 1) {
            for dx in -(mx as i64 - 1)..=(mx as i64 - 1) {
                g.insert(
                    (dx, dy),
                    DMatrix::from_fn(n, n, |_, _| Complex64::new(rand(), rand())),
                );
            }
        }
        g
    }

    fn random_vector(len: usize, seed: u64) -> DVector<Cplx> {
        let mut rng = seed;
        let mut rand = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng as f64 / u64::MAX as f64) - 0.5
        };
        DVector::from_fn(len, |_, _| Complex64::new(rand(), rand()))
    }

    #[test]
    fn smooth_padding_targets_235_products() {
        assert_eq!(next_smooth(1), 1);
        assert_eq!(next_smooth(7), 8);
        assert_eq!(next_smooth(11), 12);
        assert_eq!(next_smooth(13), 15);
        assert_eq!(next_smooth(31), 32);
        assert_eq!(next_smooth(121), 125);
    }

    #[test]
    fn hand_computed_two_by_two_toeplitz() {
        // T = [[1, 4], [2, 1]] (first column [1, 2], first row [1, 4]):
        // T x = [5, 3] for x = [1, 1].
        let mut g = BTreeMap::new();
        g.insert((0i64, 0i64), DMatrix::from_element(1, 1, Complex64::from(1.0)));
        g.insert((1, 0), DMatrix::from_element(1, 1, Complex64::from(4.0)));
        g.insert((-1, 0), DMatrix::from_element(1, 1, Complex64::from(2.0)));
        let op = BlockToeplitzOperator::new(g, 2, 1).unwrap();
        let x = DVector::from_vec(vec![Complex64::from(1.0), Complex64::from(1.0)]);
        let y = op.apply(&x).unwrap();
        assert!((y[0] - Complex64::from(5.0)).norm() < 1e-12);
        assert!((y[1] - Complex64::from(3.0)).norm() < 1e-12);
    }

    #[test]
    fn identity_generator_is_identity_operator() {
        let n = 4;
        let mut g = random_generators(3, 2, n, 42);
        for (off, block) in g.iter_mut() {
            *block = if *off == (0, 0) { DMatrix::identity(n, n) } else { DMatrix::zeros(n, n) };
        }
        let op = BlockToeplitzOperator::new(g, 3, 2).unwrap();
        let x = random_vector(6 * n, 7);
        let y = op.apply(&x).unwrap();
        assert!((y - &x).norm() < 1e-13 * x.norm());
        let dense = op.densify(20_000).unwrap();
        assert!((dense - DMatrix::<Cplx>::identity(6 * n, 6 * n)).norm() < 1e-15);
    }

    #[test]
    fn apply_matches_densify_on_2d_lattice() {
        let (mx, my, n) = (3, 3, 8);
        let op = BlockToeplitzOperator::new(random_generators(mx, my, n, 123), mx, my).unwrap();
        let dense = op.densify(20_000).unwrap();
        let x = random_vector(mx * my * n, 99);
        let fast = op.apply(&x).unwrap();
        let exact = &dense * &x;
        assert!((fast - &exact).norm() < 1e-12 * exact.norm());
    }

    #[test]
    fn densify_is_block_toeplitz_and_capped() {
        let (mx, my, n) = (3, 2, 2);
        let op = BlockToeplitzOperator::new(random_generators(mx, my, n, 5), mx, my).unwrap();
        let dense = op.densify(20_000).unwrap();
        // block(t, s) == block(t + 1, s + 1) whenever both shifts stay on the
        // same lattice row.
        for t in 0..mx - 1 {
            for s in 0..mx - 1 {
                let a = dense.view((t * n, s * n), (n, n)).into_owned();
                let b = dense.view(((t + 1) * n, (s + 1) * n), (n, n)).into_owned();
                assert_eq!(a, b);
            }
        }
        assert!(op.densify(5).is_err());
    }

    #[test]
    fn apply_is_linear() {
        let (mx, my, n) = (4, 1, 3);
        let op = BlockToeplitzOperator::new(random_generators(mx, my, n, 9), mx, my).unwrap();
        let x = random_vector(mx * n, 1);
        let y = random_vector(mx * n, 2);
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.7));
        let lhs = op.apply(&(&x * a + &y * b)).unwrap();
        let rhs = op.apply(&x).unwrap() * a + op.apply(&y).unwrap() * b;
        assert!((lhs - &rhs).norm() < 1e-13 * rhs.norm());
    }

    #[test]
    fn missing_offset_and_dimension_mismatch_rejected() {
        let mut g = random_generators(3, 1, 2, 11);
        g.remove(&(2, 0));
        assert!(BlockToeplitzOperator::new(g, 3, 1).is_err());
        let mut g2 = random_generators(2, 1, 2, 11);
        g2.insert((1, 0), DMatrix::zeros(3, 3));
        assert!(BlockToeplitzOperator::new(g2, 2, 1).is_err());
        let op = BlockToeplitzOperator::new(random_generators(2, 1, 2, 3), 2, 1).unwrap();
        assert!(op.apply(&random_vector(5, 1)).is_err());
    }

    #[test]
    fn one_dimensional_two_basis_apply_uses_four_ffts() {
        // With cached spectra, a 1-D lattice with two local bases needs two
        // forward and two inverse transforms per product.
        let op = BlockToeplitzOperator::new(random_generators(4, 1, 2, 21), 4, 1).unwrap();
        assert_eq!(op.fft_transforms(), 0);
        let x = random_vector(8, 1);
        op.apply(&x).unwrap();
        assert_eq!(op.fft_transforms(), 4);
    }

    #[test]
    fn storage_stays_within_bound() {
        for (mx, my) in [(1, 1), (4, 1), (1, 7), (4, 3), (8, 8), (16, 16)] {
            let op =
                BlockToeplitzOperator::new(random_generators(mx, my, 2, 77), mx, my).unwrap();
            assert!(op.storage_complex() <= op.storage_bound());
        }
    }
}
