//! Connected positively graded Z-algebras on a finite degree window.
//!
//! An algebra is stored componentwise: a dimension for every pair `i <= j`
//! inside the window and a sparse structure-constant tensor for every
//! composable triple. Components with `i > j` are identically zero (positive
//! grading) and every diagonal component is one-dimensional, spanned by the
//! local unit `e_i`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldSpec, Scalar};
use crate::linalg::{QuotientSpace, SparseMatrix};
use crate::par;

/// The finite degree range all data lives on. Degrees within `guard` of the
/// top (for right modules; of the bottom for left modules) are treated as
/// unreliable when claiming that a computation terminated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub lo: i64,
    pub hi: i64,
    pub guard: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("window must satisfy lo <= hi and guard <= hi - lo")]
    BadWindow,
    #[error("degree {0} outside window")]
    IndexOutsideWindow(i64),
    #[error("relation at ({0}, {1}) must span at least two degree steps inside the window")]
    InvalidRelationDegree(i64, i64),
    #[error("relation vector at ({0}, {1}) has length {2}, tensor space has dimension {3}")]
    RelationOutsideTensorSpace(i64, i64, usize, usize),
    #[error("component ({0}, {1}) would have dimension {2}; presentations are capped at {3}")]
    DimensionTooLarge(i64, i64, usize, usize),
}

impl Window {
    pub fn new(lo: i64, hi: i64, guard: usize) -> Result<Self, AlgebraError> {
        if lo > hi || (guard as i64) > hi - lo {
            return Err(AlgebraError::BadWindow);
        }
        Ok(Window { lo, hi, guard })
    }

    pub fn width(&self) -> usize {
        (self.hi - self.lo) as usize
    }

    pub fn contains(&self, d: i64) -> bool {
        self.lo <= d && d <= self.hi
    }

    pub fn degrees(&self) -> impl Iterator<Item = i64> {
        self.lo..=self.hi
    }

    /// Last degree not inside the guard zone at the top of the window.
    pub fn reliable_hi(&self) -> i64 {
        self.hi - self.guard as i64
    }

    /// First degree not inside the guard zone at the bottom of the window.
    pub fn reliable_lo(&self) -> i64 {
        self.lo + self.guard as i64
    }

    /// The mirrored window used by the index-flipped opposite algebra.
    pub fn flipped(&self) -> Window {
        Window {
            lo: -self.hi,
            hi: -self.lo,
            guard: self.guard,
        }
    }
}

/// Sparse structure constants of a bilinear map `U x V -> W` on chosen bases.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub d_left: usize,
    pub d_right: usize,
    pub d_out: usize,
    field: FieldSpec,
    entries: BTreeMap<(usize, usize, usize), Scalar>,
}

impl Tensor3 {
    pub fn zero(field: FieldSpec, d_left: usize, d_right: usize, d_out: usize) -> Self {
        Tensor3 {
            d_left,
            d_right,
            d_out,
            field,
            entries: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, v: Scalar) {
        assert!(a < self.d_left && b < self.d_right && c < self.d_out);
        if v.is_zero() {
            self.entries.remove(&(a, b, c));
        } else {
            self.entries.insert((a, b, c), v);
        }
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> Scalar {
        self.entries
            .get(&(a, b, c))
            .cloned()
            .unwrap_or_else(|| self.field.zero())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize, usize), &Scalar)> {
        self.entries.iter()
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    /// Evaluates the bilinear map on coordinate vectors.
    pub fn apply(&self, u: &[Scalar], v: &[Scalar]) -> Vec<Scalar> {
        assert_eq!(u.len(), self.d_left);
        assert_eq!(v.len(), self.d_right);
        let mut out = vec![self.field.zero(); self.d_out];
        for (&(a, b, c), t) in &self.entries {
            if u[a].is_zero() || v[b].is_zero() {
                continue;
            }
            out[c] = &out[c] + &(&(&u[a] * &v[b]) * t);
        }
        out
    }

    /// Matrix of `x -> (basis_a) . x`, shape `d_out x d_right`.
    pub fn left_matrix(&self, a: usize) -> SparseMatrix {
        let mut m = SparseMatrix::zero(self.field, self.d_out, self.d_right);
        for (&(ai, b, c), t) in &self.entries {
            if ai == a {
                m.add_to(c, b, t);
            }
        }
        m
    }

    /// Matrix of `x -> x . (basis_b)`, shape `d_out x d_left`.
    pub fn right_matrix(&self, b: usize) -> SparseMatrix {
        let mut m = SparseMatrix::zero(self.field, self.d_out, self.d_left);
        for (&(a, bi, c), t) in &self.entries {
            if bi == b {
                m.add_to(c, a, t);
            }
        }
        m
    }

    /// Matrix of `u . x` for a coordinate vector `u`, shape `d_out x d_right`.
    pub fn left_matrix_vec(&self, u: &[Scalar]) -> SparseMatrix {
        assert_eq!(u.len(), self.d_left);
        let mut m = SparseMatrix::zero(self.field, self.d_out, self.d_right);
        for (&(a, b, c), t) in &self.entries {
            if !u[a].is_zero() {
                m.add_to(c, b, &(&u[a] * t));
            }
        }
        m
    }

    /// Matrix of `x . v` for a coordinate vector `v`, shape `d_out x d_left`.
    pub fn right_matrix_vec(&self, v: &[Scalar]) -> SparseMatrix {
        assert_eq!(v.len(), self.d_right);
        let mut m = SparseMatrix::zero(self.field, self.d_out, self.d_left);
        for (&(a, b, c), t) in &self.entries {
            if !v[b].is_zero() {
                m.add_to(c, a, &(&v[b] * t));
            }
        }
        m
    }

    /// Flattens the map to a matrix `d_out x (d_left * d_right)`; the column
    /// index of the basis pair `(a, b)` is `a * d_right + b`.
    pub fn as_matrix(&self) -> SparseMatrix {
        let mut m = SparseMatrix::zero(self.field, self.d_out, self.d_left * self.d_right);
        for (&(a, b, c), t) in &self.entries {
            m.set(c, a * self.d_right + b, t.clone());
        }
        m
    }
}

/// A connected positively graded Z-algebra on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct ZAlgebra {
    pub window: Window,
    pub field: FieldSpec,
    dims: BTreeMap<(i64, i64), usize>,
    mult: BTreeMap<(i64, i64, i64), Tensor3>,
}

/// One violated axiom, with the indices that witness it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    DiagonalNotScalar {
        i: i64,
        dim: usize,
    },
    GradingViolated {
        i: i64,
        j: i64,
    },
    TensorShape {
        i: i64,
        j: i64,
        k: i64,
    },
    IdentityFailure {
        i: i64,
        j: i64,
        side: String,
        basis: usize,
    },
    AssociativityFailure {
        i: i64,
        j: i64,
        k: i64,
        l: i64,
        a: usize,
        b: usize,
        c: usize,
    },
}

/// Result of checking every axiom; empty means the data is a connected
/// Z-algebra on its window.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl ZAlgebra {
    /// Builds an algebra from raw parts without checking the axioms; run
    /// [`ZAlgebra::validate`] to check them.
    pub fn from_parts(
        window: Window,
        field: FieldSpec,
        dims: BTreeMap<(i64, i64), usize>,
        mult: BTreeMap<(i64, i64, i64), Tensor3>,
    ) -> Self {
        ZAlgebra {
            window,
            field,
            dims,
            mult,
        }
    }

    pub fn dim(&self, i: i64, j: i64) -> usize {
        if i == j {
            return if self.window.contains(i) { 1 } else { 0 };
        }
        if i > j || !self.window.contains(i) || !self.window.contains(j) {
            return 0;
        }
        self.dims.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn dims(&self) -> &BTreeMap<(i64, i64), usize> {
        &self.dims
    }

    pub fn mult_cells(&self) -> &BTreeMap<(i64, i64, i64), Tensor3> {
        &self.mult
    }

    pub fn mult_cells_mut(&mut self) -> &mut BTreeMap<(i64, i64, i64), Tensor3> {
        &mut self.mult
    }

    /// The structure tensor of `A_{ij} x A_{jk} -> A_{ik}`; a fresh zero
    /// tensor if the cell has no stored entries.
    pub fn mult_tensor(&self, i: i64, j: i64, k: i64) -> Tensor3 {
        if let Some(t) = self.mult.get(&(i, j, k)) {
            return t.clone();
        }
        Tensor3::zero(self.field, self.dim(i, j), self.dim(j, k), self.dim(i, k))
    }

    pub fn product(&self, i: i64, j: i64, k: i64, u: &[Scalar], v: &[Scalar]) -> Vec<Scalar> {
        self.mult_tensor(i, j, k).apply(u, v)
    }

    /// Checks every axiom and reports all violations, sorted, so the smallest
    /// broken triple comes first.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        for d in self.window.degrees() {
            let dd = self.dims.get(&(d, d)).copied().unwrap_or(0);
            if dd != 1 {
                violations.push(Violation::DiagonalNotScalar { i: d, dim: dd });
            }
        }
        for (&(i, j), &d) in &self.dims {
            if d > 0 && (i > j || !self.window.contains(i) || !self.window.contains(j)) {
                violations.push(Violation::GradingViolated { i, j });
            }
        }
        for (&(i, j, k), t) in &self.mult {
            if t.d_left != self.dim(i, j) || t.d_right != self.dim(j, k) || t.d_out != self.dim(i, k)
            {
                violations.push(Violation::TensorShape { i, j, k });
            }
        }
        if !violations.is_empty() {
            // shape problems make the remaining checks ill-posed
            violations.sort_by_key(violation_key);
            return ValidationReport { violations };
        }

        // identity law on every row and column
        for (&(i, j), &d) in &self.dims {
            if i == j || d == 0 {
                continue;
            }
            let left = self.mult_tensor(i, i, j);
            let right = self.mult_tensor(i, j, j);
            for b in 0..d {
                let mut unit = vec![self.field.zero(); 1];
                unit[0] = self.field.one();
                let mut basis = vec![self.field.zero(); d];
                basis[b] = self.field.one();
                let lv = left.apply(&unit, &basis);
                if !is_basis_vector(&lv, b) {
                    violations.push(Violation::IdentityFailure {
                        i,
                        j,
                        side: "left".into(),
                        basis: b,
                    });
                }
                let rv = right.apply(&basis, &unit);
                if !is_basis_vector(&rv, b) {
                    violations.push(Violation::IdentityFailure {
                        i,
                        j,
                        side: "right".into(),
                        basis: b,
                    });
                }
            }
        }
        // e_i . e_i = e_i
        for d in self.window.degrees() {
            let t = self.mult_tensor(d, d, d);
            let one = vec![self.field.one()];
            if !is_basis_vector(&t.apply(&one, &one), 0) {
                violations.push(Violation::IdentityFailure {
                    i: d,
                    j: d,
                    side: "unit".into(),
                    basis: 0,
                });
            }
        }

        // associativity over all composable quadruples with nontrivial factors
        let quads: Vec<(i64, i64, i64, i64)> = {
            let mut q = Vec::new();
            for i in self.window.degrees() {
                for j in i..=self.window.hi {
                    if self.dim(i, j) == 0 {
                        continue;
                    }
                    for k in j..=self.window.hi {
                        if self.dim(j, k) == 0 {
                            continue;
                        }
                        for l in k..=self.window.hi {
                            if self.dim(k, l) == 0 {
                                continue;
                            }
                            q.push((i, j, k, l));
                        }
                    }
                }
            }
            q
        };
        let found: Vec<Vec<Violation>> = par::map(&quads, |&(i, j, k, l)| {
            let mut local = Vec::new();
            let t_ijk = self.mult_tensor(i, j, k);
            let t_ikl = self.mult_tensor(i, k, l);
            let t_jkl = self.mult_tensor(j, k, l);
            let t_ijl = self.mult_tensor(i, j, l);
            let (d1, d2, d3) = (self.dim(i, j), self.dim(j, k), self.dim(k, l));
            for a in 0..d1 {
                for b in 0..d2 {
                    let mut ea = vec![self.field.zero(); d1];
                    ea[a] = self.field.one();
                    let mut eb = vec![self.field.zero(); d2];
                    eb[b] = self.field.one();
                    let ab = t_ijk.apply(&ea, &eb);
                    let bc_mat = t_jkl.left_matrix(b);
                    for c in 0..d3 {
                        let mut ec = vec![self.field.zero(); d3];
                        ec[c] = self.field.one();
                        let lhs = t_ikl.apply(&ab, &ec);
                        let bc = bc_mat.column(c);
                        let rhs = t_ijl.apply(&ea, &bc);
                        if lhs != rhs {
                            local.push(Violation::AssociativityFailure {
                                i,
                                j,
                                k,
                                l,
                                a,
                                b,
                                c,
                            });
                        }
                    }
                }
            }
            local
        });
        violations.extend(found.into_iter().flatten());
        violations.sort_by_key(violation_key);
        violations.dedup();
        ValidationReport { violations }
    }

    /// Whether every `A_{ij}` with `j > i + 1` is spanned by products of
    /// adjacent-degree components. All the builtin constructors produce
    /// adjacently generated algebras.
    pub fn is_adjacent_generated(&self) -> bool {
        for (&(i, j), &d) in &self.dims {
            if d == 0 || j <= i + 1 {
                continue;
            }
            let t = self.mult_tensor(i, i + 1, j);
            if t.as_matrix().rank() < d {
                return false;
            }
        }
        true
    }

    /// Writes `u` in `A_{ij}` as a combination of products through the
    /// intermediate degree `m`: returns triples `(a, b, coeff)` meaning
    /// `u = sum coeff . (basis_a of A_{im}) . (basis_b of A_{mj})`.
    /// `None` when `u` is not in the image of the concatenation map.
    pub fn factor_through(
        &self,
        i: i64,
        m: i64,
        j: i64,
        u: &[Scalar],
    ) -> Option<Vec<(usize, usize, Scalar)>> {
        let t = self.mult_tensor(i, m, j);
        let mat = t.as_matrix();
        let w = mat.solve(u)?;
        let mut out = Vec::new();
        for (idx, coeff) in w.into_iter().enumerate() {
            if !coeff.is_zero() {
                out.push((idx / t.d_right, idx % t.d_right, coeff));
            }
        }
        Some(out)
    }
}

fn violation_key(v: &Violation) -> (i64, i64, i64, i64, usize, usize, usize, u8) {
    match v {
        Violation::DiagonalNotScalar { i, dim } => (*i, 0, 0, 0, *dim, 0, 0, 0),
        Violation::GradingViolated { i, j } => (*i, *j, 0, 0, 0, 0, 0, 1),
        Violation::TensorShape { i, j, k } => (*i, *j, *k, 0, 0, 0, 0, 2),
        Violation::IdentityFailure { i, j, basis, .. } => (*i, *j, 0, 0, *basis, 0, 0, 3),
        Violation::AssociativityFailure {
            i,
            j,
            k,
            l,
            a,
            b,
            c,
        } => (*i, *j, *k, *l, *a, *b, *c, 4),
    }
}

fn is_basis_vector(v: &[Scalar], idx: usize) -> bool {
    v.iter()
        .enumerate()
        .all(|(n, x)| if n == idx { x.is_one() } else { x.is_zero() })
}

/// The trivial algebra `K`: `k` on the diagonal and zero elsewhere.
pub fn make_trivial(window: Window, field: FieldSpec) -> ZAlgebra {
    let mut dims = BTreeMap::new();
    let mut mult = BTreeMap::new();
    for d in window.degrees() {
        dims.insert((d, d), 1);
        let mut t = Tensor3::zero(field, 1, 1, 1);
        t.set(0, 0, 0, field.one());
        mult.insert((d, d, d), t);
    }
    ZAlgebra::from_parts(window, field, dims, mult)
}

/// Exponent vectors of total degree `d` in `n` variables, in a fixed
/// deterministic order (first exponent descending, then recursively).
fn monomials(n: usize, d: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![d]];
    }
    let mut out = Vec::new();
    for e in (0..=d).rev() {
        for mut tail in monomials(n - 1, d - e) {
            let mut m = vec![e];
            m.append(&mut tail);
            out.push(m);
        }
    }
    out
}

/// The Z-algebra of the polynomial ring in `n` variables: `A_{ij}` is the
/// span of the monomials of degree `j - i`.
pub fn make_poly(n: usize, window: Window, field: FieldSpec) -> ZAlgebra {
    assert!(n >= 1, "make_poly needs at least one variable");
    let width = window.width();
    let monos: Vec<Vec<Vec<usize>>> = (0..=width).map(|d| monomials(n, d)).collect();
    let index: Vec<BTreeMap<Vec<usize>, usize>> = monos
        .iter()
        .map(|list| {
            list.iter()
                .enumerate()
                .map(|(idx, m)| (m.clone(), idx))
                .collect()
        })
        .collect();

    let mut dims = BTreeMap::new();
    let mut mult = BTreeMap::new();
    for i in window.degrees() {
        for j in i..=window.hi {
            dims.insert((i, j), monos[(j - i) as usize].len());
        }
    }
    for i in window.degrees() {
        for j in i..=window.hi {
            for k in j..=window.hi {
                let (u, v, w) = ((j - i) as usize, (k - j) as usize, (k - i) as usize);
                let mut t = Tensor3::zero(field, monos[u].len(), monos[v].len(), monos[w].len());
                for (a, ma) in monos[u].iter().enumerate() {
                    for (b, mb) in monos[v].iter().enumerate() {
                        let sum: Vec<usize> =
                            ma.iter().zip(mb.iter()).map(|(x, y)| x + y).collect();
                        let c = index[w][&sum];
                        t.set(a, b, c, field.one());
                    }
                }
                mult.insert((i, j, k), t);
            }
        }
    }
    ZAlgebra::from_parts(window, field, dims, mult)
}

/// The nilpotent algebra: one generator per step and `x . x = 0`, so
/// `A_{i,i+1}` is one-dimensional and everything further vanishes.
pub fn make_nil(window: Window, field: FieldSpec) -> ZAlgebra {
    let gens: BTreeMap<i64, usize> = (window.lo..window.hi).map(|i| (i, 1)).collect();
    let mut rels = BTreeMap::new();
    for i in window.lo..=window.hi - 2 {
        rels.insert((i, i + 2), vec![vec![field.one()]]);
    }
    make_adjacent_presentation(&gens, &rels, window, field).expect("nil presentation is valid")
}

/// The skew polynomial Z-algebra on two generators with `y x = q x y`.
pub fn make_skew(q: Scalar, window: Window, field: FieldSpec) -> ZAlgebra {
    assert_eq!(q.field(), field);
    assert!(!q.is_zero(), "skew parameter must be nonzero");
    let gens: BTreeMap<i64, usize> = (window.lo..window.hi).map(|i| (i, 2)).collect();
    let mut rels = BTreeMap::new();
    for i in window.lo..=window.hi - 2 {
        // basis order of V (x) V is (x x, x y, y x, y y); the relation is y x - q . x y
        let mut r = vec![field.zero(); 4];
        r[2] = field.one();
        r[1] = -&q;
        rels.insert((i, i + 2), vec![r]);
    }
    make_adjacent_presentation(&gens, &rels, window, field).expect("skew presentation is valid")
}

const PRESENTATION_DIM_CAP: usize = 20_000;

/// Quotient of the free algebra on adjacent-degree generators by relation
/// spaces, computed degreewise by exact linear algebra.
///
/// `gens[i]` is the dimension of the generator space from degree `i` to
/// `i + 1`; a relation at `(a, b)` is a vector in the concatenation of the
/// generator spaces along the path from `a` to `b`, with the mixed-radix
/// basis order (last step fastest).
pub fn make_adjacent_presentation(
    gens: &BTreeMap<i64, usize>,
    rels: &BTreeMap<(i64, i64), Vec<Vec<Scalar>>>,
    window: Window,
    field: FieldSpec,
) -> Result<ZAlgebra, AlgebraError> {
    let gen_dim = |i: i64| -> usize { gens.get(&i).copied().unwrap_or(0) };
    let tensor_dim = |a: i64, b: i64| -> usize { (a..b).map(gen_dim).product() };
    for (&(a, b), list) in rels {
        if b - a < 2 || a < window.lo || b > window.hi {
            return Err(AlgebraError::InvalidRelationDegree(a, b));
        }
        let want = tensor_dim(a, b);
        for r in list {
            if r.len() != want {
                return Err(AlgebraError::RelationOutsideTensorSpace(a, b, r.len(), want));
            }
        }
    }

    let mut dims: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    let mut mult: BTreeMap<(i64, i64, i64), Tensor3> = BTreeMap::new();
    let mut quots: BTreeMap<(i64, i64), QuotientSpace> = BTreeMap::new();

    for d in window.degrees() {
        dims.insert((d, d), 1);
        let mut t = Tensor3::zero(field, 1, 1, 1);
        t.set(0, 0, 0, field.one());
        mult.insert((d, d, d), t);
    }
    for i in window.lo..window.hi {
        dims.insert((i, i + 1), gen_dim(i));
    }

    // multiplies cur in A_{i,m} by the generator g of V_m, using the step
    // tensors already built for shorter spans
    let mult_letter = |mult: &BTreeMap<(i64, i64, i64), Tensor3>,
                       dims: &BTreeMap<(i64, i64), usize>,
                       i: i64,
                       m: i64,
                       cur: &[Scalar],
                       g: usize|
     -> Vec<Scalar> {
        if m == i {
            // cur is a scalar in A_{ii}
            let mut v = vec![field.zero(); gen_dim(i)];
            v[g] = cur[0].clone();
            return v;
        }
        let target = dims[&(i, m + 1)];
        match mult.get(&(i, m, m + 1)) {
            Some(t) => {
                let mut eg = vec![field.zero(); gen_dim(m)];
                eg[g] = field.one();
                t.apply(cur, &eg)
            }
            None => vec![field.zero(); target],
        }
    };

    // build A_{ij} for j - i >= 2, inductively in j - i
    for span in 2..=window.width() as i64 {
        for i in window.lo..=window.hi - span {
            let j = i + span;
            let prev = dims[&(i, j - 1)];
            let vdim = gen_dim(j - 1);
            let ambient = prev * vdim;
            // spanning set of the relation image inside A_{i,j-1} (x) V_{j-1};
            // relations ending before j are already zero in the A_{i,j-1} factor
            let mut span_rows: Vec<Vec<Scalar>> = Vec::new();
            for (&(a, b), list) in rels.iter() {
                if b != j || a < i {
                    continue;
                }
                let left_dim = if a == i {
                    1
                } else {
                    dims.get(&(i, a)).copied().unwrap_or(0)
                };
                if left_dim == 0 {
                    continue;
                }
                for r in list {
                    for u in 0..left_dim {
                        let mut row = vec![field.zero(); ambient];
                        let mut touched = false;
                        for (t_idx, coeff) in r.iter().enumerate() {
                            if coeff.is_zero() {
                                continue;
                            }
                            let letters = unrank_mixed(a, b, gen_dim, t_idx);
                            let (head, last) = letters.split_at(letters.len() - 1);
                            // (basis_u of A_{ia}) . head, one letter at a time
                            let mut cur: Vec<Scalar> = if a == i {
                                vec![field.one()]
                            } else {
                                let mut v = vec![field.zero(); left_dim];
                                v[u] = field.one();
                                v
                            };
                            let mut deg = a;
                            for &g in head {
                                cur = mult_letter(&mult, &dims, i, deg, &cur, g);
                                deg += 1;
                                if cur.iter().all(Scalar::is_zero) {
                                    break;
                                }
                            }
                            for (c, pval) in cur.iter().enumerate() {
                                if !pval.is_zero() {
                                    let slot = c * vdim + last[0];
                                    row[slot] = &row[slot] + &(coeff * pval);
                                    touched = true;
                                }
                            }
                        }
                        if touched {
                            span_rows.push(row);
                        }
                    }
                }
            }
            let mut span_matrix = SparseMatrix::zero(field, span_rows.len(), ambient);
            for (r, row) in span_rows.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    if !v.is_zero() {
                        span_matrix.set(r, c, v.clone());
                    }
                }
            }
            let quot = QuotientSpace::new(&span_matrix);
            let d = quot.dim();
            if d > PRESENTATION_DIM_CAP {
                return Err(AlgebraError::DimensionTooLarge(i, j, d, PRESENTATION_DIM_CAP));
            }
            dims.insert((i, j), d);
            // the step tensor A_{i,j-1} (x) V_{j-1} -> A_{ij}
            if prev > 0 && vdim > 0 && d > 0 {
                let mut t = Tensor3::zero(field, prev, vdim, d);
                for u in 0..prev {
                    for g in 0..vdim {
                        let mut amb = vec![field.zero(); ambient];
                        amb[u * vdim + g] = field.one();
                        for (c, v) in quot.project(&amb).into_iter().enumerate() {
                            if !v.is_zero() {
                                t.set(u, g, c, v);
                            }
                        }
                    }
                }
                mult.insert((i, j - 1, j), t);
            }
            quots.insert((i, j), quot);
        }
    }

    // assemble all remaining multiplication tensors inductively in k - j
    for i in window.lo..=window.hi {
        for j in i..=window.hi {
            let d_ij = dims[&(i, j)];
            if d_ij == 0 {
                continue;
            }
            // identity cells
            if j > i {
                let mut t_left = Tensor3::zero(field, 1, d_ij, d_ij);
                let mut t_right = Tensor3::zero(field, d_ij, 1, d_ij);
                for b in 0..d_ij {
                    t_left.set(0, b, b, field.one());
                    t_right.set(b, 0, b, field.one());
                }
                mult.insert((i, i, j), t_left);
                mult.insert((i, j, j), t_right);
            }
        }
    }
    for gap in 1..=window.width() as i64 {
        for j in window.lo..=window.hi - gap {
            let k = j + gap;
            for i in window.lo..=j {
                if i == j {
                    continue; // identity cell already set
                }
                let (d1, d2, d3) = (dims[&(i, j)], dims[&(j, k)], dims[&(i, k)]);
                if d1 == 0 || d2 == 0 {
                    continue;
                }
                if gap == 1 {
                    // the step tensor was built alongside the quotient
                    continue;
                }
                let mut t = Tensor3::zero(field, d1, d2, d3);
                if d3 > 0 {
                    // v lifts to (head basis of A_{j,k-1}, generator of V_{k-1})
                    let quot_jk = &quots[&(j, k)];
                    let vdim = gen_dim(k - 1);
                    let t_head = mult
                        .get(&(i, j, k - 1))
                        .cloned()
                        .unwrap_or_else(|| Tensor3::zero(field, d1, dims[&(j, k - 1)], dims[&(i, k - 1)]));
                    let t_step = mult
                        .get(&(i, k - 1, k))
                        .cloned()
                        .unwrap_or_else(|| Tensor3::zero(field, dims[&(i, k - 1)], vdim, d3));
                    for b in 0..d2 {
                        let coord = quot_jk.basis_coord(b);
                        let (head, g) = (coord / vdim, coord % vdim);
                        for a in 0..d1 {
                            let mut ea = vec![field.zero(); d1];
                            ea[a] = field.one();
                            let mut eh = vec![field.zero(); dims[&(j, k - 1)]];
                            eh[head] = field.one();
                            let w = t_head.apply(&ea, &eh);
                            let mut eg = vec![field.zero(); vdim];
                            eg[g] = field.one();
                            let out = t_step.apply(&w, &eg);
                            for (c, v) in out.into_iter().enumerate() {
                                if !v.is_zero() {
                                    t.set(a, b, c, v);
                                }
                            }
                        }
                    }
                }
                mult.insert((i, j, k), t);
            }
        }
    }

    // genuinely zero products need no stored cell; mult_tensor regenerates them
    mult.retain(|_, t| t.entries().next().is_some());
    let dims_clean: BTreeMap<(i64, i64), usize> =
        dims.into_iter().filter(|&(_, d)| d > 0).collect();
    Ok(ZAlgebra::from_parts(window, field, dims_clean, mult))
}

/// Decodes a mixed-radix index into the letters of a path monomial from
/// degree `a` to degree `b` (last step fastest).
fn unrank_mixed(a: i64, b: i64, gen_dim: impl Fn(i64) -> usize, mut idx: usize) -> Vec<usize> {
    let mut letters = vec![0usize; (b - a) as usize];
    for (pos, deg) in (a..b).rev().enumerate() {
        let d = gen_dim(deg);
        letters[(b - a) as usize - 1 - pos] = idx % d;
        idx /= d;
    }
    letters
}

/// The index-flipped opposite algebra: component `(i, j)` is `A_{-j,-i}` and
/// products reverse order.
pub fn make_opposite(a: &ZAlgebra) -> ZAlgebra {
    let window = a.window.flipped();
    let mut dims = BTreeMap::new();
    for (&(i, j), &d) in a.dims() {
        dims.insert((-j, -i), d);
    }
    let mut mult = BTreeMap::new();
    for (&(i, j, k), t) in a.mult_cells() {
        // basis p of op_{-k,-j}, q of op_{-j,-i}: p . q = (q p in A)
        let mut nt = Tensor3::zero(a.field, t.d_right, t.d_left, t.d_out);
        for (&(x, y, c), v) in t.entries() {
            nt.set(y, x, c, v.clone());
        }
        mult.insert((-k, -j, -i), nt);
    }
    ZAlgebra::from_parts(window, a.field, dims, mult)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(lo: i64, hi: i64) -> Window {
        Window::new(lo, hi, 2).unwrap()
    }

    fn q() -> FieldSpec {
        FieldSpec::Q
    }

    #[test]
    fn trivial_algebra_validates() {
        let a = make_trivial(w(0, 4), q());
        assert!(a.validate().is_valid());
        assert_eq!(a.dim(1, 1), 1);
        assert_eq!(a.dim(0, 1), 0);
        assert_eq!((0..=4).filter(|&d| a.dim(d, d) == 1).count(), 5);
    }

    #[test]
    fn poly1_dims_and_axioms() {
        let a = make_poly(1, w(0, 5), q());
        assert!(a.validate().is_valid());
        for i in 0..=5 {
            for j in i..=5 {
                assert_eq!(a.dim(i, j), 1, "dim({i},{j})");
            }
        }
    }

    #[test]
    fn poly2_dims_translation_invariant() {
        let a = make_poly(2, w(-1, 5), q());
        assert!(a.validate().is_valid());
        for i in -1..=5i64 {
            for j in i..=5 {
                assert_eq!(a.dim(i, j), (j - i + 1) as usize);
            }
        }
        assert_eq!(a.dim(0, 2), 3);
    }

    #[test]
    fn nil_dims() {
        let a = make_nil(w(0, 5), q());
        assert!(a.validate().is_valid());
        for i in 0..5 {
            assert_eq!(a.dim(i, i + 1), 1);
        }
        for i in 0..=3i64 {
            for j in i + 2..=5 {
                assert_eq!(a.dim(i, j), 0);
            }
        }
    }

    #[test]
    fn skew_dims_match_poly2() {
        let a = make_skew(q().from_i64(2), w(0, 5), q());
        assert!(a.validate().is_valid());
        for i in 0..=5i64 {
            for j in i..=5 {
                assert_eq!(a.dim(i, j), (j - i + 1) as usize, "dim({i},{j})");
            }
        }
        // y x = 2 x y: multiply the two generators both ways and compare
        let t = a.mult_tensor(0, 1, 2);
        let x = vec![q().one(), q().zero()];
        let y = vec![q().zero(), q().one()];
        let xy = t.apply(&x, &y);
        let yx = t.apply(&y, &x);
        let two_xy: Vec<Scalar> = xy.iter().map(|v| v * &q().from_i64(2)).collect();
        assert_eq!(yx, two_xy);
    }

    #[test]
    fn free_rank_one_presentation_is_poly1() {
        let gens: BTreeMap<i64, usize> = (0..5).map(|i| (i, 1)).collect();
        let a = make_adjacent_presentation(&BTreeMap::from_iter(gens), &BTreeMap::new(), w(0, 5), q())
            .unwrap();
        assert!(a.validate().is_valid());
        for i in 0..=5i64 {
            for j in i..=5 {
                assert_eq!(a.dim(i, j), 1);
            }
        }
    }

    #[test]
    fn presentation_errors() {
        let gens: BTreeMap<i64, usize> = (0..3).map(|i| (i, 1)).collect();
        let mut rels = BTreeMap::new();
        rels.insert((0, 1), vec![vec![q().one()]]);
        assert_eq!(
            make_adjacent_presentation(&gens, &rels, w(0, 3), q()),
            Err(AlgebraError::InvalidRelationDegree(0, 1))
        );
        let mut rels = BTreeMap::new();
        rels.insert((0, 2), vec![vec![q().one(), q().one()]]);
        assert!(matches!(
            make_adjacent_presentation(&gens, &rels, w(0, 3), q()),
            Err(AlgebraError::RelationOutsideTensorSpace(0, 2, 2, 1))
        ));
    }

    #[test]
    fn opposite_involution_and_validation() {
        let a = make_poly(2, w(-1, 4), q());
        let op = make_opposite(&a);
        assert!(op.validate().is_valid());
        assert_eq!(op.window, Window::new(-4, 1, 2).unwrap());
        for i in -4..=1i64 {
            for j in i..=1 {
                assert_eq!(op.dim(i, j), a.dim(-j, -i));
            }
        }
        let back = make_opposite(&op);
        assert_eq!(back, a);
    }

    #[test]
    fn opposite_of_trivial_is_trivial() {
        let a = make_trivial(w(0, 4), q());
        let op = make_opposite(&a);
        assert_eq!(op, make_trivial(Window::new(-4, 0, 2).unwrap(), q()));
    }

    #[test]
    fn zeroed_entry_breaks_associativity() {
        let mut a = make_poly(1, w(0, 4), q());
        let t = a.mult_cells_mut().get_mut(&(0, 1, 2)).unwrap();
        t.set(0, 0, 0, FieldSpec::Q.zero());
        let report = a.validate();
        assert!(!report.is_valid());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::AssociativityFailure { .. })));
    }

    #[test]
    fn adjacent_generation_detected() {
        assert!(make_poly(2, w(0, 4), q()).is_adjacent_generated());
        assert!(make_nil(w(0, 4), q()).is_adjacent_generated());
    }

    #[test]
    fn factor_through_poly() {
        let a = make_poly(2, w(0, 4), q());
        // x^2 in A_{0,2} factors through degree 1
        let mut u = vec![q().zero(); 3];
        u[0] = q().one();
        let f = a.factor_through(0, 1, 2, &u).unwrap();
        // recombine and compare
        let t = a.mult_tensor(0, 1, 2);
        let mut acc = vec![q().zero(); 3];
        for (ai, bi, coeff) in f {
            let mut ea = vec![q().zero(); 2];
            ea[ai] = q().one();
            let mut eb = vec![q().zero(); 2];
            eb[bi] = q().one();
            for (c, v) in t.apply(&ea, &eb).into_iter().enumerate() {
                acc[c] = &acc[c] + &(&coeff * &v);
            }
        }
        assert_eq!(acc, u);
    }
}
