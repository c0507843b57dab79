//! Sparse exact matrices and the rank/kernel/solve kernel.
//!
//! Everything downstream (module maps, resolutions, Ext/Tor, the regularity
//! checkers) reduces to reduced row echelon forms computed here. Results are
//! exact; over Q intermediate blow-up is accepted at desk scale.

use std::collections::BTreeMap;

use crate::field::{FieldSpec, Scalar};

/// A sparse matrix over one field. Zero entries are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub field: FieldSpec,
    entries: BTreeMap<(usize, usize), Scalar>,
}

/// Reduced row echelon form together with its pivot columns.
#[derive(Debug, Clone)]
pub struct Rref {
    pub matrix: SparseMatrix,
    pub pivots: Vec<usize>,
}

impl Rref {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }
}

impl SparseMatrix {
    pub fn zero(field: FieldSpec, rows: usize, cols: usize) -> Self {
        SparseMatrix {
            rows,
            cols,
            field,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(field: FieldSpec, n: usize) -> Self {
        let mut m = Self::zero(field, n, n);
        for i in 0..n {
            m.set(i, i, field.one());
        }
        m
    }

    pub fn from_dense(field: FieldSpec, data: &[Vec<i64>]) -> Self {
        let rows = data.len();
        let cols = data.first().map_or(0, |r| r.len());
        let mut m = Self::zero(field, rows, cols);
        for (i, row) in data.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged dense matrix");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, field.from_i64(v));
            }
        }
        m
    }

    /// Builds a matrix whose columns are the given dense vectors.
    pub fn from_columns(field: FieldSpec, rows: usize, cols: &[Vec<Scalar>]) -> Self {
        let mut m = Self::zero(field, rows, cols.len());
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length mismatch");
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, v.clone());
            }
        }
        m
    }

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        self.entries
            .get(&(r, c))
            .cloned()
            .unwrap_or_else(|| self.field.zero())
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        assert!(r < self.rows && c < self.cols, "index out of range");
        if v.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            assert_eq!(v.field(), self.field, "entry from the wrong field");
            self.entries.insert((r, c), v);
        }
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: &Scalar) {
        if v.is_zero() {
            return;
        }
        let cur = self.get(r, c);
        self.set(r, c, &cur + v);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &Scalar)> {
        self.entries.iter()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut t = SparseMatrix::zero(self.field, self.cols, self.rows);
        for (&(r, c), v) in &self.entries {
            t.entries.insert((c, r), v.clone());
        }
        t
    }

    pub fn mul(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in mul");
        assert_eq!(self.field, rhs.field, "field mismatch in mul");
        let mut out = SparseMatrix::zero(self.field, self.rows, rhs.cols);
        // group rhs by row for the sparse product
        let mut rhs_rows: BTreeMap<usize, Vec<(usize, &Scalar)>> = BTreeMap::new();
        for (&(r, c), v) in &rhs.entries {
            rhs_rows.entry(r).or_default().push((c, v));
        }
        for (&(r, k), a) in &self.entries {
            if let Some(row) = rhs_rows.get(&k) {
                for &(c, b) in row {
                    out.add_to(r, c, &(a * b));
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (&(r, c), v) in &rhs.entries {
            out.add_to(r, c, v);
        }
        out
    }

    pub fn sub(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (&(r, c), v) in &rhs.entries {
            out.add_to(r, c, &v.neg_ref());
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> SparseMatrix {
        let mut out = SparseMatrix::zero(self.field, self.rows, self.cols);
        for (&(r, c), v) in &self.entries {
            out.set(r, c, v * s);
        }
        out
    }

    pub fn apply(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        let mut out = vec![self.field.zero(); self.rows];
        for (&(r, c), a) in &self.entries {
            if !v[c].is_zero() {
                out[r] = &out[r] + &(a * &v[c]);
            }
        }
        out
    }

    pub fn column(&self, c: usize) -> Vec<Scalar> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hstack(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.rows, rhs.rows);
        assert_eq!(self.field, rhs.field);
        let mut out = SparseMatrix::zero(self.field, self.rows, self.cols + rhs.cols);
        for (&(r, c), v) in &self.entries {
            out.entries.insert((r, c), v.clone());
        }
        for (&(r, c), v) in &rhs.entries {
            out.entries.insert((r, c + self.cols), v.clone());
        }
        out
    }

    /// Vertical concatenation, `self` on top.
    pub fn vstack(&self, rhs: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, rhs.cols);
        assert_eq!(self.field, rhs.field);
        let mut out = SparseMatrix::zero(self.field, self.rows + rhs.rows, self.cols);
        for (&(r, c), v) in &self.entries {
            out.entries.insert((r, c), v.clone());
        }
        for (&(r, c), v) in &rhs.entries {
            out.entries.insert((r + self.rows, c), v.clone());
        }
        out
    }

    /// Writes a block of `src` into `self` with its top-left corner at `(r0, c0)`.
    pub fn paste(&mut self, r0: usize, c0: usize, src: &SparseMatrix) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols);
        for (&(r, c), v) in &src.entries {
            self.set(r0 + r, c0 + c, v.clone());
        }
    }

    fn to_row_maps(&self) -> Vec<BTreeMap<usize, Scalar>> {
        let mut rows: Vec<BTreeMap<usize, Scalar>> = vec![BTreeMap::new(); self.rows];
        for (&(r, c), v) in &self.entries {
            rows[r].insert(c, v.clone());
        }
        rows
    }

    fn from_row_maps(
        field: FieldSpec,
        cols: usize,
        rows: Vec<BTreeMap<usize, Scalar>>,
    ) -> SparseMatrix {
        let nrows = rows.len();
        let mut m = SparseMatrix::zero(field, nrows, cols);
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                if !v.is_zero() {
                    m.entries.insert((r, c), v);
                }
            }
        }
        m
    }

    /// Reduced row echelon form by Gauss-Jordan elimination.
    ///
    /// Pivot selection is the first row with a nonzero entry in the current
    /// column, so the output is deterministic for a given input.
    pub fn rref(&self) -> Rref {
        let mut rows = self.to_row_maps();
        let mut pivots = Vec::new();
        let mut next = 0usize;
        for col in 0..self.cols {
            let Some(p) = (next..rows.len()).find(|&r| rows[r].contains_key(&col)) else {
                continue;
            };
            rows.swap(next, p);
            let inv = rows[next][&col].inv();
            if !inv.is_one() {
                let row = std::mem::take(&mut rows[next]);
                rows[next] = row.into_iter().map(|(c, v)| (c, &v * &inv)).collect();
            }
            let pivot_row = rows[next].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r == next {
                    continue;
                }
                let Some(f) = row.get(&col).cloned() else {
                    continue;
                };
                for (&c, v) in &pivot_row {
                    let delta = &f * v;
                    match row.get_mut(&c) {
                        Some(cur) => {
                            let newv = &*cur - &delta;
                            if newv.is_zero() {
                                row.remove(&c);
                            } else {
                                *cur = newv;
                            }
                        }
                        None => {
                            row.insert(c, -delta);
                        }
                    }
                }
            }
            pivots.push(col);
            next += 1;
            if next == rows.len() {
                break;
            }
        }
        Rref {
            matrix: SparseMatrix::from_row_maps(self.field, self.cols, rows),
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.rref().rank()
    }

    /// A basis of the right null space as dense column vectors.
    ///
    /// One vector per free column, in ascending column order; the free
    /// coordinate is set to 1 and pivot coordinates are read off the rref.
    pub fn kernel_basis(&self) -> Vec<Vec<Scalar>> {
        let rref = self.rref();
        let mut is_pivot = vec![false; self.cols];
        for &c in &rref.pivots {
            is_pivot[c] = true;
        }
        let mut basis = Vec::new();
        for free in (0..self.cols).filter(|&c| !is_pivot[c]) {
            let mut v = vec![self.field.zero(); self.cols];
            v[free] = self.field.one();
            for (prow, &pcol) in rref.pivots.iter().enumerate() {
                let coeff = rref.matrix.get(prow, free);
                if !coeff.is_zero() {
                    v[pcol] = -coeff;
                }
            }
            basis.push(v);
        }
        basis
    }

    /// Solves `self * x = b` exactly. `None` means `b` is not in the column
    /// space; free variables are set to zero, so the answer is deterministic.
    pub fn solve(&self, b: &[Scalar]) -> Option<Vec<Scalar>> {
        let rhs = SparseMatrix::from_columns(self.field, self.rows, &[b.to_vec()]);
        self.solve_matrix(&rhs).map(|x| x.column(0))
    }

    /// Inverse of a square matrix, `None` when singular.
    pub fn inverse(&self) -> Option<SparseMatrix> {
        if self.rows != self.cols {
            return None;
        }
        let x = self.solve_matrix(&SparseMatrix::identity(self.field, self.rows))?;
        if self.mul(&x) == SparseMatrix::identity(self.field, self.rows) {
            Some(x)
        } else {
            None
        }
    }

    /// Solves `self * X = rhs` columnwise; `None` if any column has no solution.
    pub fn solve_matrix(&self, rhs: &SparseMatrix) -> Option<SparseMatrix> {
        assert_eq!(self.rows, rhs.rows, "rhs row mismatch");
        let aug = self.hstack(rhs);
        let rref = aug.rref();
        // a pivot in an augmented column certifies inconsistency
        if rref.pivots.iter().any(|&c| c >= self.cols) {
            return None;
        }
        let mut x = SparseMatrix::zero(self.field, self.cols, rhs.cols);
        for (prow, &pcol) in rref.pivots.iter().enumerate() {
            for j in 0..rhs.cols {
                let v = rref.matrix.get(prow, self.cols + j);
                x.set(pcol, j, v);
            }
        }
        Some(x)
    }
}

/// The quotient of an ambient coordinate space by the span of a set of
/// vectors, with a deterministic basis: the standard coordinates that are not
/// pivot columns of the span's rref.
#[derive(Debug, Clone)]
pub struct QuotientSpace {
    pub ambient: usize,
    field: FieldSpec,
    rref: Rref,
    nonpivots: Vec<usize>,
}

impl QuotientSpace {
    /// `spanning` holds the subspace generators as the rows of a matrix.
    pub fn new(spanning: &SparseMatrix) -> Self {
        let rref = spanning.rref();
        let mut is_pivot = vec![false; spanning.cols];
        for &c in &rref.pivots {
            is_pivot[c] = true;
        }
        let nonpivots = (0..spanning.cols).filter(|&c| !is_pivot[c]).collect();
        QuotientSpace {
            ambient: spanning.cols,
            field: spanning.field,
            rref,
            nonpivots,
        }
    }

    pub fn dim(&self) -> usize {
        self.nonpivots.len()
    }

    /// Index (in the ambient space) of the `idx`-th quotient basis vector.
    pub fn basis_coord(&self, idx: usize) -> usize {
        self.nonpivots[idx]
    }

    /// Reduces `v` modulo the subspace; the result is supported on non-pivot
    /// coordinates and is the canonical representative of the class of `v`.
    pub fn reduce(&self, v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(v.len(), self.ambient);
        let mut out = v.to_vec();
        for (prow, &pcol) in self.rref.pivots.iter().enumerate() {
            if out[pcol].is_zero() {
                continue;
            }
            let f = out[pcol].clone();
            for c in pcol..self.ambient {
                let coeff = self.rref.matrix.get(prow, c);
                if !coeff.is_zero() {
                    out[c] = &out[c] - &(&f * &coeff);
                }
            }
        }
        out
    }

    /// Coordinates of the class of `v` in the quotient basis.
    pub fn project(&self, v: &[Scalar]) -> Vec<Scalar> {
        let red = self.reduce(v);
        self.nonpivots.iter().map(|&c| red[c].clone()).collect()
    }

    /// The ambient representative of the `idx`-th quotient basis vector.
    pub fn lift(&self, idx: usize) -> Vec<Scalar> {
        let mut v = vec![self.field.zero(); self.ambient];
        v[self.nonpivots[idx]] = self.field.one();
        v
    }
}

/// The subquotient `ker(out_map) / im(in_map)` of a coordinate space, with
/// explicit cycle representatives and a way to express any cycle in the
/// chosen homology basis.
#[derive(Debug, Clone)]
pub struct Subquotient {
    pub ambient: usize,
    field: FieldSpec,
    /// homology basis representatives, as ambient vectors
    reps: Vec<Vec<Scalar>>,
    /// columns: reps then a basis of the image; cycles solve against this
    express_matrix: SparseMatrix,
}

impl Subquotient {
    /// `out_map`: ambient -> somewhere (its kernel is the cycles);
    /// `in_map`: somewhere -> ambient (its image is the boundaries).
    pub fn new(out_map: &SparseMatrix, in_map: &SparseMatrix) -> Self {
        let field = out_map.field;
        let ambient = out_map.cols;
        assert_eq!(in_map.rows, ambient, "in/out shape mismatch");
        let cycles = out_map.kernel_basis();
        // pick image columns that are independent, then cycles independent mod image
        let image_all = in_map;
        let mut cols: Vec<Vec<Scalar>> = Vec::new();
        for j in 0..image_all.cols {
            cols.push(image_all.column(j));
        }
        let n_image_cols = cols.len();
        for v in &cycles {
            cols.push(v.clone());
        }
        let combined = SparseMatrix::from_columns(field, ambient, &cols);
        let rref = combined.rref();
        let mut image_basis_cols = Vec::new();
        let mut reps = Vec::new();
        for &p in &rref.pivots {
            if p < n_image_cols {
                image_basis_cols.push(cols[p].clone());
            } else {
                reps.push(cols[p].clone());
            }
        }
        let mut express_cols = reps.clone();
        express_cols.extend(image_basis_cols);
        let express_matrix = SparseMatrix::from_columns(field, ambient, &express_cols);
        Subquotient {
            ambient,
            field,
            reps,
            express_matrix,
        }
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn representatives(&self) -> &[Vec<Scalar>] {
        &self.reps
    }

    /// Expresses the class of the cycle `z` in the homology basis.
    /// Panics if `z` is not a cycle of this subquotient.
    pub fn class_of(&self, z: &[Scalar]) -> Vec<Scalar> {
        if self.reps.is_empty() {
            return Vec::new();
        }
        let x = self
            .express_matrix
            .solve(z)
            .expect("vector is not a cycle modulo boundaries");
        x[..self.reps.len()].to_vec()
    }

    /// The matrix of a linear map on homology classes induced by `f` on
    /// ambient vectors: column `k` is `class_of(f(rep_k))` in `target`.
    pub fn induced_map(&self, target: &Subquotient, f: &SparseMatrix) -> SparseMatrix {
        assert_eq!(f.cols, self.ambient);
        assert_eq!(f.rows, target.ambient);
        let mut out = SparseMatrix::zero(self.field, target.dim(), self.dim());
        for (k, rep) in self.reps.iter().enumerate() {
            let img = f.apply(rep);
            let coords = target.class_of(&img);
            for (r, v) in coords.into_iter().enumerate() {
                out.set(r, k, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> FieldSpec {
        FieldSpec::Q
    }

    #[test]
    fn rref_zero_matrix() {
        let m = SparseMatrix::zero(q(), 2, 3);
        let r = m.rref();
        assert_eq!(r.rank(), 0);
        assert!(r.pivots.is_empty());
    }

    #[test]
    fn rref_identity() {
        let m = SparseMatrix::identity(q(), 3);
        let r = m.rref();
        assert_eq!(r.matrix, m);
        assert_eq!(r.rank(), 3);
    }

    #[test]
    fn rref_rank_one() {
        let m = SparseMatrix::from_dense(q(), &[vec![1, 2], vec![2, 4]]);
        let r = m.rref();
        assert_eq!(r.rank(), 1);
        assert_eq!(r.pivots, vec![0]);
        assert_eq!(r.matrix.get(0, 1), q().from_i64(2));
    }

    #[test]
    fn kernel_of_identity_is_empty() {
        assert!(SparseMatrix::identity(q(), 4).kernel_basis().is_empty());
    }

    #[test]
    fn kernel_of_zero_is_standard_basis() {
        let m = SparseMatrix::zero(q(), 2, 3);
        let k = m.kernel_basis();
        assert_eq!(k.len(), 3);
        for (i, v) in k.iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                assert_eq!(x.is_one(), i == j);
            }
        }
    }

    #[test]
    fn kernel_row_vector() {
        let m = SparseMatrix::from_dense(q(), &[vec![1, 2]]);
        let k = m.kernel_basis();
        assert_eq!(k.len(), 1);
        assert_eq!(k[0], vec![q().from_i64(-2), q().from_i64(1)]);
    }

    #[test]
    fn solve_identity_and_inconsistent() {
        let id = SparseMatrix::identity(q(), 2);
        let b = vec![q().from_i64(5), q().from_i64(-3)];
        assert_eq!(id.solve(&b).unwrap(), b);

        let m = SparseMatrix::from_dense(q(), &[vec![1], vec![0]]);
        let b = vec![q().from_i64(0), q().from_i64(1)];
        assert!(m.solve(&b).is_none());
    }

    #[test]
    fn solve_exact_division() {
        let m = SparseMatrix::from_dense(q(), &[vec![2]]);
        let b = vec![q().from_i64(3)];
        assert_eq!(m.solve(&b).unwrap(), vec![q().parse("3/2").unwrap()]);
    }

    #[test]
    fn quotient_space_reduction() {
        // quotient of k^3 by span{(1,1,0)}: pivots {0}, basis coords {1,2}
        let span = SparseMatrix::from_dense(q(), &[vec![1, 1, 0]]);
        let quot = QuotientSpace::new(&span);
        assert_eq!(quot.dim(), 2);
        let v = vec![q().from_i64(2), q().from_i64(3), q().from_i64(4)];
        // (2,3,4) = 2*(1,1,0) + (0,1,4)
        assert_eq!(quot.project(&v), vec![q().from_i64(1), q().from_i64(4)]);
    }

    #[test]
    fn subquotient_basics() {
        // ambient k^2, out = 0 (all cycles), in = column (1,0): H = k
        let out = SparseMatrix::zero(q(), 1, 2);
        let inm = SparseMatrix::from_dense(q(), &[vec![1], vec![0]]);
        let h = Subquotient::new(&out, &inm);
        assert_eq!(h.dim(), 1);
        let z = vec![q().from_i64(3), q().from_i64(7)];
        let c = h.class_of(&z);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0], q().from_i64(7));
    }

    #[test]
    fn randomized_rank_properties() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let rows = rng.gen_range(1..7);
            let cols = rng.gen_range(1..7);
            let mut m = SparseMatrix::zero(q(), rows, cols);
            for r in 0..rows {
                for c in 0..cols {
                    if rng.gen_bool(0.6) {
                        m.set(r, c, q().from_i64(rng.gen_range(-4..=4)));
                    }
                }
            }
            let rank = m.rank();
            let kernel = m.kernel_basis();
            assert_eq!(rank + kernel.len(), cols);
            assert_eq!(rank, m.transpose().rank());
            for v in &kernel {
                assert!(m.apply(v).iter().all(Scalar::is_zero));
            }
        }
    }
}
