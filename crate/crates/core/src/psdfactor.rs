//! Symmetric indefinite factorization `P A P^T = L B L^T` with Bunch-Kaufman
//! partial pivoting, and the eigenvalue-shift modification that turns the
//! factors into those of a positive definite `A + E`.
//!
//! `B` is block diagonal with 1x1 and 2x2 blocks. Each block is diagonalised
//! in closed form, eigenvalues below `delta` are lifted to `delta`, and the
//! lift `F` is mapped back through `E = P^T L F L^T P`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Bunch-Kaufman pivot threshold `(1 + sqrt(17)) / 8`.
pub const BK_ALPHA: f64 = 0.640_388_203_202_207_6;

/// Symmetric 1x1 or 2x2 diagonal block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Block {
    Single(f64),
    /// `[[a, b], [b, c]]`
    Pair { a: f64, b: f64, c: f64 },
}

impl Block {
    pub fn size(&self) -> usize {
        match self {
            Block::Single(_) => 1,
            Block::Pair { .. } => 2,
        }
    }

    /// Eigenvalues (descending) and the matching orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        match *self {
            Block::Single(d) => ([d, 0.0], [[1.0, 0.0], [0.0, 0.0]]),
            Block::Pair { a, b, c } => sym2_eigen(a, b, c),
        }
    }
}

/// Closed-form eigensystem of `[[a, b], [b, c]]` by a single Jacobi rotation.
/// Returns eigenvalues in descending order and eigenvectors as `[col0, col1]`.
fn sym2_eigen(a: f64, b: f64, c: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    if b == 0.0 {
        return if a >= c {
            ([a, c], [[1.0, 0.0], [0.0, 1.0]])
        } else {
            ([c, a], [[0.0, 1.0], [1.0, 0.0]])
        };
    }
    let tau = (c - a) / (2.0 * b);
    let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
    let t = sign / (tau.abs() + 1.0_f64.hypot(tau));
    let cs = 1.0 / 1.0_f64.hypot(t);
    let sn = t * cs;
    let lam_a = a - t * b;
    let lam_c = c + t * b;
    let vec_a = [cs, -sn];
    let vec_c = [sn, cs];
    if lam_c >= lam_a {
        ([lam_c, lam_a], [vec_c, vec_a])
    } else {
        ([lam_a, lam_c], [vec_a, vec_c])
    }
}

/// Block-diagonal matrix made of 1x1 and 2x2 symmetric blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiagonal {
    pub blocks: Vec<Block>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    /// Read the blocks of `dense` along its diagonal with the given sizes.
    pub fn from_dense(dense: &DMatrix<f64>, sizes: &[usize]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for &s in sizes {
            match s {
                1 => blocks.push(Block::Single(dense[(at, at)])),
                2 => blocks.push(Block::Pair {
                    a: dense[(at, at)],
                    b: 0.5 * (dense[(at + 1, at)] + dense[(at, at + 1)]),
                    c: dense[(at + 1, at + 1)],
                }),
                other => return Err(Error::BlockTooLarge(other)),
            }
            at += s;
        }
        if at != dense.nrows() {
            return Err(Error::DimensionMismatch {
                expected: dense.nrows(),
                got: at,
            });
        }
        Ok(Self { blocks })
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::size).sum()
    }

    pub fn offsets(&self) -> impl Iterator<Item = (usize, &Block)> {
        self.blocks.iter().scan(0usize, |at, b| {
            let start = *at;
            *at += b.size();
            Some((start, b))
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (k, block) in self.offsets() {
            match *block {
                Block::Single(d) => m[(k, k)] = d,
                Block::Pair { a, b, c } => {
                    m[(k, k)] = a;
                    m[(k + 1, k)] = b;
                    m[(k, k + 1)] = b;
                    m[(k + 1, k + 1)] = c;
                }
            }
        }
        m
    }

    /// Solve `B w = y` in place. Fails on a (numerically) singular block.
    fn solve_in_place(&self, y: &mut [f64], tiny: f64) -> Option<()> {
        for (k, block) in self.offsets() {
            match *block {
                Block::Single(d) => {
                    if d.abs() <= tiny {
                        return None;
                    }
                    y[k] /= d;
                }
                Block::Pair { a, b, c } => {
                    let det = a * c - b * b;
                    if det.abs() <= tiny * (a.abs() + b.abs() + c.abs()).max(tiny) {
                        return None;
                    }
                    let (y0, y1) = (y[k], y[k + 1]);
                    y[k] = (c * y0 - b * y1) / det;
                    y[k + 1] = (a * y1 - b * y0) / det;
                }
            }
        }
        Some(())
    }
}

/// Orthogonal `Q` and eigenvalues `Λ` with `B = Q Λ Q^T`, assembled blockwise.
pub fn block_spectral(b: &BlockDiagonal) -> (DMatrix<f64>, DVector<f64>) {
    let n = b.dim();
    let mut q = DMatrix::zeros(n, n);
    let mut lambda = DVector::zeros(n);
    for (k, block) in b.offsets() {
        let (vals, vecs) = block.eigen();
        match block {
            Block::Single(_) => {
                q[(k, k)] = 1.0;
                lambda[k] = vals[0];
            }
            Block::Pair { .. } => {
                for col in 0..2 {
                    lambda[k + col] = vals[col];
                    q[(k, k + col)] = vecs[col][0];
                    q[(k + 1, k + col)] = vecs[col][1];
                }
            }
        }
    }
    (q, lambda)
}

/// Result of [`ldl_factor`]: `P A P^T = L B L^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationBundle {
    /// `permutation[i]` is the original row/column placed at position `i`.
    pub permutation: Vec<usize>,
    pub lower: DMatrix<f64>,
    pub blocks: BlockDiagonal,
    pub block_eigenvectors: DMatrix<f64>,
    pub block_eigenvalues: DVector<f64>,
    norm_inf: f64,
}

impl FactorizationBundle {
    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    /// `P M P^T` for a matrix in the original ordering.
    pub fn permute(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let p = &self.permutation;
        DMatrix::from_fn(p.len(), p.len(), |i, j| m[(p[i], p[j])])
    }

    /// `P^T M P`, the inverse of [`permute`](Self::permute).
    pub fn unpermute(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(self.permutation[i], self.permutation[j])] = m[(i, j)];
            }
        }
        out
    }

    /// `L B L^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.blocks.to_dense() * self.lower.transpose()
    }

    /// Counts of positive, negative and zero block eigenvalues.
    pub fn inertia(&self) -> (usize, usize, usize) {
        inertia_of(self.block_eigenvalues.iter().copied())
    }

    /// Solve `A x = rhs` with the factors of `A` itself.
    pub fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let tiny = self.singular_tolerance();
        solve_with(&self.permutation, &self.lower, &self.blocks, rhs, tiny)
    }

    fn singular_tolerance(&self) -> f64 {
        self.dim() as f64 * f64::EPSILON * self.norm_inf.max(f64::MIN_POSITIVE)
    }
}

pub(crate) fn inertia_of(values: impl Iterator<Item = f64>) -> (usize, usize, usize) {
    values.fold((0, 0, 0), |(p, n, z), v| {
        if v > 0.0 {
            (p + 1, n, z)
        } else if v < 0.0 {
            (p, n + 1, z)
        } else {
            (p, n, z + 1)
        }
    })
}

fn solve_with(
    perm: &[usize],
    lower: &DMatrix<f64>,
    blocks: &BlockDiagonal,
    rhs: &DVector<f64>,
    tiny: f64,
) -> Option<DVector<f64>> {
    let n = perm.len();
    let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
    for i in 0..n {
        let mut s = y[i];
        for j in 0..i {
            s -= lower[(i, j)] * y[j];
        }
        y[i] = s;
    }
    blocks.solve_in_place(&mut y, tiny)?;
    for i in (0..n).rev() {
        let mut s = y[i];
        for j in i + 1..n {
            s -= lower[(j, i)] * y[j];
        }
        y[i] = s;
    }
    let mut out = DVector::zeros(n);
    for (i, &p) in perm.iter().enumerate() {
        out[p] = y[i];
    }
    Some(out)
}

/// Induced infinity norm (max absolute row sum).
pub fn norm_inf(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn symmetrized(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteMatrix);
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-10 * norm_inf(a) {
        return Err(Error::NotSymmetric(asym));
    }
    let n = a.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)])))
}

fn swap_symmetric(w: &mut DMatrix<f64>, r: usize, s: usize) {
    if r != s {
        w.swap_rows(r, s);
        w.swap_columns(r, s);
    }
}

/// Bunch-Kaufman factorization `P A P^T = L B L^T`.
pub fn ldl_factor(a: &DMatrix<f64>) -> Result<FactorizationBundle> {
    let mut w = symmetrized(a)?;
    let n = w.nrows();
    let norm = norm_inf(&w);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut lower = DMatrix::<f64>::identity(n, n);
    let mut blocks = Vec::new();

    let mut k = 0;
    while k < n {
        let absakk = w[(k, k)].abs();
        let (imax, colmax) = (k + 1..n)
            .map(|i| (i, w[(i, k)].abs()))
            .fold((k, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });

        // (pivot size, row swapped into position k or k+1)
        let (size, swap_with) = if absakk.max(colmax) == 0.0 || absakk >= BK_ALPHA * colmax {
            (1, k)
        } else {
            let rowmax = (k..n)
                .filter(|&j| j != imax)
                .map(|j| w[(imax, j)].abs())
                .fold(0.0, f64::max);
            if absakk * rowmax >= BK_ALPHA * colmax * colmax {
                (1, k)
            } else if w[(imax, imax)].abs() >= BK_ALPHA * rowmax {
                (1, imax)
            } else {
                (2, imax)
            }
        };

        let target = if size == 1 { k } else { k + 1 };
        if swap_with != target {
            swap_symmetric(&mut w, target, swap_with);
            perm.swap(target, swap_with);
            for j in 0..k {
                let tmp = lower[(target, j)];
                lower[(target, j)] = lower[(swap_with, j)];
                lower[(swap_with, j)] = tmp;
            }
        }

        if size == 1 {
            let d = w[(k, k)];
            blocks.push(Block::Single(d));
            if d != 0.0 {
                let col: Vec<f64> = (k + 1..n).map(|i| w[(i, k)]).collect();
                for (ii, i) in (k + 1..n).enumerate() {
                    lower[(i, k)] = col[ii] / d;
                    for (jj, j) in (k + 1..n).enumerate() {
                        w[(i, j)] -= col[ii] * col[jj] / d;
                    }
                }
            }
            k += 1;
        } else {
            let (pa, pb, pc) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
            let det = pa * pc - pb * pb;
            blocks.push(Block::Pair { a: pa, b: pb, c: pc });
            let c0: Vec<f64> = (k + 2..n).map(|i| w[(i, k)]).collect();
            let c1: Vec<f64> = (k + 2..n).map(|i| w[(i, k + 1)]).collect();
            let l0: Vec<f64> = c0.iter().zip(&c1).map(|(x, y)| (x * pc - y * pb) / det).collect();
            let l1: Vec<f64> = c0.iter().zip(&c1).map(|(x, y)| (y * pa - x * pb) / det).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                lower[(i, k)] = l0[ii];
                lower[(i, k + 1)] = l1[ii];
                for (jj, j) in (k + 2..n).enumerate() {
                    w[(i, j)] -= l0[ii] * c0[jj] + l1[ii] * c1[jj];
                }
            }
            k += 2;
        }
    }

    let blocks = BlockDiagonal::new(blocks);
    let (block_eigenvectors, block_eigenvalues) = block_spectral(&blocks);
    Ok(FactorizationBundle {
        permutation: perm,
        lower,
        blocks,
        block_eigenvectors,
        block_eigenvalues,
        norm_inf: norm,
    })
}

/// How the shift floor `delta` is chosen for a given matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPolicy {
    /// `factor * max(1, ||A||_inf)`
    Scaled(f64),
    Fixed(f64),
}

impl Default for DeltaPolicy {
    fn default() -> Self {
        DeltaPolicy::Scaled(f64::EPSILON.sqrt())
    }
}

impl DeltaPolicy {
    pub fn delta_for(&self, a: &DMatrix<f64>) -> f64 {
        match *self {
            DeltaPolicy::Scaled(factor) => factor * norm_inf(a).max(1.0),
            DeltaPolicy::Fixed(d) => d,
        }
    }
}

/// `sqrt(eps) * max(1, ||A||_inf)`.
pub fn default_delta(a: &DMatrix<f64>) -> f64 {
    DeltaPolicy::default().delta_for(a)
}

/// Positive definite modification `A + E` together with the factors of it.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdModification {
    pub modified_matrix: DMatrix<f64>,
    /// The lift `F = Q diag(tau) Q^T`, block by block.
    pub shift_blocks: BlockDiagonal,
    pub delta: f64,
    /// `||E||_F`
    pub modification_frobenius: f64,
    pub factorization: FactorizationBundle,
    /// `B + F`
    pub shifted_blocks: BlockDiagonal,
    /// Eigenvalues of `B + F`.
    pub shifted_eigenvalues: DVector<f64>,
}

impl PsdModification {
    pub fn is_unmodified(&self) -> bool {
        self.modification_frobenius == 0.0
    }

    /// Solve `(A + E) x = rhs` through `P^T L (B + F) L^T P`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let f = &self.factorization;
        // every block of B + F has eigenvalues >= delta > 0
        solve_with(&f.permutation, &f.lower, &self.shifted_blocks, rhs, 0.0)
            .expect("shifted blocks are positive definite")
    }
}

/// Lift every block eigenvalue of `A`'s factorization to at least `delta`.
pub fn psd_modify(a: &DMatrix<f64>, delta: f64) -> Result<PsdModification> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidDelta(delta));
    }
    let fact = ldl_factor(a)?;
    let n = fact.dim();

    let mut shift = Vec::with_capacity(fact.blocks.blocks.len());
    let mut shifted = Vec::with_capacity(fact.blocks.blocks.len());
    let mut shifted_eigs = DVector::zeros(n);
    let mut any_shift = false;
    for (k, block) in fact.blocks.offsets() {
        let (vals, vecs) = block.eigen();
        match *block {
            Block::Single(d) => {
                let tau = if d >= delta { 0.0 } else { delta - d };
                any_shift |= tau != 0.0;
                shift.push(Block::Single(tau));
                shifted.push(Block::Single(if tau == 0.0 { d } else { delta }));
                shifted_eigs[k] = d.max(delta);
            }
            Block::Pair { .. } => {
                let taus = vals.map(|l| if l >= delta { 0.0 } else { delta - l });
                if taus == [0.0, 0.0] {
                    shift.push(Block::Pair { a: 0.0, b: 0.0, c: 0.0 });
                    shifted.push(*block);
                } else {
                    any_shift = true;
                    let compose = |d: [f64; 2]| Block::Pair {
                        a: d[0] * vecs[0][0] * vecs[0][0] + d[1] * vecs[1][0] * vecs[1][0],
                        b: d[0] * vecs[0][0] * vecs[0][1] + d[1] * vecs[1][0] * vecs[1][1],
                        c: d[0] * vecs[0][1] * vecs[0][1] + d[1] * vecs[1][1] * vecs[1][1],
                    };
                    shift.push(compose(taus));
                    shifted.push(compose(vals.map(|l| l.max(delta))));
                }
                shifted_eigs[k] = vals[0].max(delta);
                shifted_eigs[k + 1] = vals[1].max(delta);
            }
        }
    }
    let shift_blocks = BlockDiagonal::new(shift);
    let shifted_blocks = BlockDiagonal::new(shifted);

    let (modified_matrix, modification_frobenius) = if any_shift {
        let lfl = &fact.lower * shift_blocks.to_dense() * fact.lower.transpose();
        let e = fact.unpermute(&lfl);
        let mut m = a + &e;
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = s;
                m[(j, i)] = s;
            }
        }
        (m, e.norm())
    } else {
        (a.clone(), 0.0)
    };

    Ok(PsdModification {
        modified_matrix,
        shift_blocks,
        delta,
        modification_frobenius,
        factorization: fact,
        shifted_blocks,
        shifted_eigenvalues: shifted_eigs,
    })
}
