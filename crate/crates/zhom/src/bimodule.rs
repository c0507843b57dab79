//! Bimodules over one algebra, stored rowwise, and the internal tensor.
//!
//! A bimodule is a family of right modules `e_i M` (the rows) together with
//! left-action tensors `A_{li} (x) M_{ij} -> M_{lj}`. This is the shape every
//! construction in the crate consumes: `A` itself, the quotients `A/A_{>=n}`,
//! their layers, and the dualizing bimodule assembled by the regularity
//! suite.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::algebra::{Tensor3, ZAlgebra};
use crate::field::Scalar;
use crate::linalg::{QuotientSpace, SparseMatrix};
use crate::module::{GradedModule, ModuleError, ModuleMorphism, Side};

/// An `A`-`A` bimodule as rows plus left action.
#[derive(Debug, Clone)]
pub struct Bimodule {
    pub algebra: Arc<ZAlgebra>,
    rows: BTreeMap<i64, Arc<GradedModule>>,
    /// `(l, i, j)`: `A_{li} (x) M_{ij} -> M_{lj}`
    left: BTreeMap<(i64, i64, i64), Tensor3>,
}

impl Bimodule {
    pub fn new(
        algebra: Arc<ZAlgebra>,
        rows: BTreeMap<i64, Arc<GradedModule>>,
        left: BTreeMap<(i64, i64, i64), Tensor3>,
    ) -> Self {
        let b = Bimodule {
            algebra,
            rows,
            left,
        };
        b.assert_valid();
        b
    }

    pub fn new_unchecked(
        algebra: Arc<ZAlgebra>,
        rows: BTreeMap<i64, Arc<GradedModule>>,
        left: BTreeMap<(i64, i64, i64), Tensor3>,
    ) -> Self {
        Bimodule {
            algebra,
            rows,
            left,
        }
    }

    pub fn row(&self, i: i64) -> Arc<GradedModule> {
        self.rows
            .get(&i)
            .cloned()
            .unwrap_or_else(|| Arc::new(GradedModule::zero(self.algebra.clone(), Side::Right)))
    }

    pub fn rows(&self) -> &BTreeMap<i64, Arc<GradedModule>> {
        &self.rows
    }

    pub fn dim(&self, i: i64, j: i64) -> usize {
        self.rows.get(&i).map(|r| r.dim(j)).unwrap_or(0)
    }

    pub fn left_tensor(&self, l: i64, i: i64, j: i64) -> Tensor3 {
        if let Some(t) = self.left.get(&(l, i, j)) {
            return t.clone();
        }
        Tensor3::zero(
            self.algebra.field,
            self.algebra.dim(l, i),
            self.dim(i, j),
            self.dim(l, j),
        )
    }

    /// Matrix of left multiplication by `u` in `A_{li}`: `M_{ij} -> M_{lj}`.
    pub fn left_action_matrix(&self, l: i64, i: i64, j: i64, u: &[Scalar]) -> SparseMatrix {
        if l == i {
            return SparseMatrix::identity(self.algebra.field, self.dim(i, j)).scale(&u[0]);
        }
        self.left_tensor(l, i, j).left_matrix_vec(u)
    }

    pub fn left_action_matrix_basis(&self, l: i64, i: i64, j: i64, a: usize) -> SparseMatrix {
        let mut u = vec![self.algebra.field.zero(); self.algebra.dim(l, i)];
        u[a] = self.algebra.field.one();
        self.left_action_matrix(l, i, j, u.as_slice())
    }

    /// Left multiplication by `u` in `A_{li}` as a right-module morphism
    /// `e_i M -> e_l M`.
    pub fn left_mult_morphism(&self, l: i64, i: i64, u: &[Scalar]) -> ModuleMorphism {
        let src = self.row(i);
        let dst = self.row(l);
        let mut mats = BTreeMap::new();
        for j in src.support() {
            let m = self.left_action_matrix(l, i, j, u);
            if !m.is_zero() {
                mats.insert(j, m);
            }
        }
        ModuleMorphism::new(src, dst, mats)
    }

    pub fn check_axioms(&self) -> Result<(), ModuleError> {
        let w = self.algebra.window;
        for (&(l, i, j), t) in &self.left {
            let (el, er, eo) = (self.algebra.dim(l, i), self.dim(i, j), self.dim(l, j));
            if t.d_left != el || t.d_right != er || t.d_out != eo {
                return Err(ModuleError::AxiomViolation(format!(
                    "left tensor ({l},{i},{j}) has shape ({},{},{}), expected ({el},{er},{eo})",
                    t.d_left, t.d_right, t.d_out
                )));
            }
        }
        // left associativity: a' . (a . m) = (a' a) . m
        for l2 in w.degrees() {
            for l1 in l2 + 1..=w.hi {
                if self.algebra.dim(l2, l1) == 0 {
                    continue;
                }
                for i in l1 + 1..=w.hi {
                    if self.algebra.dim(l1, i) == 0 {
                        continue;
                    }
                    let t_alg = self.algebra.mult_tensor(l2, l1, i);
                    for j in self.row(i).support().collect::<Vec<_>>() {
                        for a2 in 0..self.algebra.dim(l2, l1) {
                            for a1 in 0..self.algebra.dim(l1, i) {
                                let first = self.left_action_matrix_basis(l1, i, j, a1);
                                let second = self.left_action_matrix_basis(l2, l1, j, a2);
                                let two_step = second.mul(&first);
                                let mut e2 =
                                    vec![self.algebra.field.zero(); self.algebra.dim(l2, l1)];
                                e2[a2] = self.algebra.field.one();
                                let mut e1 =
                                    vec![self.algebra.field.zero(); self.algebra.dim(l1, i)];
                                e1[a1] = self.algebra.field.one();
                                let prod = t_alg.apply(&e2, &e1);
                                let one_step = self.left_action_matrix(l2, i, j, &prod);
                                if two_step != one_step {
                                    return Err(ModuleError::AxiomViolation(format!(
                                        "left associativity fails at ({l2},{l1},{i}) degree {j}"
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
        // left and right actions commute: (a . m) . b = a . (m . b)
        for l in w.degrees() {
            for i in l + 1..=w.hi {
                if self.algebra.dim(l, i) == 0 {
                    continue;
                }
                let row_i = self.row(i);
                let row_l = self.row(l);
                for j in row_i.support().collect::<Vec<_>>() {
                    for k in j + 1..=w.hi {
                        if self.algebra.dim(j, k) == 0 {
                            continue;
                        }
                        for a in 0..self.algebra.dim(l, i) {
                            for b in 0..self.algebra.dim(j, k) {
                                let left_then_right = row_l
                                    .action_matrix_basis(j, k, b)
                                    .mul(&self.left_action_matrix_basis(l, i, j, a));
                                let right_then_left = self
                                    .left_action_matrix_basis(l, i, k, a)
                                    .mul(&row_i.action_matrix_basis(j, k, b));
                                if left_then_right != right_then_left {
                                    return Err(ModuleError::AxiomViolation(format!(
                                        "left/right actions do not commute at l={l}, i={i}, j={j}, k={k}"
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn assert_valid(&self) {
        for row in self.rows.values() {
            row.assert_valid();
        }
        if let Err(e) = self.check_axioms() {
            panic!("constructed bimodule is invalid: {e}");
        }
    }

    /// Transposed componentwise dual: `D(M)_{ij} = (M_{ji})^*`, with the
    /// left and right actions swapped through the dual pairing.
    pub fn dual(&self) -> Bimodule {
        let algebra = &self.algebra;
        let field = algebra.field;
        let w = algebra.window;
        let mut rows: BTreeMap<i64, Arc<GradedModule>> = BTreeMap::new();
        for i in w.degrees() {
            let mut comp = BTreeMap::new();
            for j in w.degrees() {
                let d = self.dim(j, i);
                if d > 0 {
                    comp.insert(j, d);
                }
            }
            if comp.is_empty() {
                continue;
            }
            let mut action = BTreeMap::new();
            for j in w.degrees() {
                for k in j + 1..=w.hi {
                    if algebra.dim(j, k) == 0 || self.dim(j, i) == 0 || self.dim(k, i) == 0 {
                        continue;
                    }
                    // (phi . a)(m) = phi(a . m) with a . m from the left
                    // tensor (j, k, i) of the source bimodule
                    let src = self.left_tensor(j, k, i);
                    let mut t =
                        Tensor3::zero(field, self.dim(j, i), algebra.dim(j, k), self.dim(k, i));
                    for (&(v, wdx, u), val) in src.entries() {
                        t.set(u, v, wdx, val.clone());
                    }
                    if t.entries().next().is_some() {
                        action.insert((j, k), t);
                    }
                }
            }
            rows.insert(
                i,
                Arc::new(GradedModule::new_unchecked(
                    algebra.clone(),
                    Side::Right,
                    comp,
                    action,
                )),
            );
        }
        let mut left = BTreeMap::new();
        for l in w.degrees() {
            for i in l + 1..=w.hi {
                if algebra.dim(l, i) == 0 {
                    continue;
                }
                for j in w.degrees() {
                    if self.dim(j, i) == 0 || self.dim(j, l) == 0 {
                        continue;
                    }
                    // (a . phi)(m) = phi(m . a) with m . a from the right
                    // action of row j of the source bimodule
                    let src = self.row(j).action_tensor(l, i);
                    let mut t =
                        Tensor3::zero(field, algebra.dim(l, i), self.dim(j, i), self.dim(j, l));
                    for (&(wdx, v, u), val) in src.entries() {
                        t.set(v, u, wdx, val.clone());
                    }
                    if t.entries().next().is_some() {
                        left.insert((l, i, j), t);
                    }
                }
            }
        }
        Bimodule::new(algebra.clone(), rows, left)
    }
}

/// `A` as a bimodule over itself.
pub fn algebra_bimodule(algebra: &Arc<ZAlgebra>) -> Bimodule {
    let w = algebra.window;
    let mut rows = BTreeMap::new();
    for i in w.degrees() {
        rows.insert(i, Arc::new(crate::module::free_row(algebra, i).unwrap()));
    }
    let mut left = BTreeMap::new();
    for l in w.degrees() {
        for i in l + 1..=w.hi {
            if algebra.dim(l, i) == 0 {
                continue;
            }
            for j in i..=w.hi {
                if algebra.dim(i, j) == 0 || algebra.dim(l, j) == 0 {
                    continue;
                }
                let t = algebra.mult_tensor(l, i, j);
                if t.entries().next().is_some() {
                    left.insert((l, i, j), t);
                }
            }
        }
    }
    Bimodule::new_unchecked(algebra.clone(), rows, left)
}

/// The bimodule `A / A_{>=n}`; `n = 1` is the augmentation `A_0`.
pub fn quotient_bimodule(algebra: &Arc<ZAlgebra>, n: usize) -> Bimodule {
    let w = algebra.window;
    let mut rows = BTreeMap::new();
    for i in w.degrees() {
        rows.insert(
            i,
            Arc::new(crate::module::quotient_row(algebra, i, n).unwrap()),
        );
    }
    let mut left = BTreeMap::new();
    for l in w.degrees() {
        for i in l + 1..=w.hi {
            if algebra.dim(l, i) == 0 {
                continue;
            }
            for j in i..=w.hi {
                // source component nonzero iff j - i < n; target iff j - l < n
                if (j - i) >= n as i64 || algebra.dim(i, j) == 0 || algebra.dim(l, j) == 0 {
                    continue;
                }
                if (j - l) >= n as i64 {
                    continue; // induced map is zero
                }
                let t = algebra.mult_tensor(l, i, j);
                if t.entries().next().is_some() {
                    left.insert((l, i, j), t);
                }
            }
        }
    }
    Bimodule::new_unchecked(algebra.clone(), rows, left)
}

pub fn augmentation_bimodule(algebra: &Arc<ZAlgebra>) -> Bimodule {
    quotient_bimodule(algebra, 1)
}

/// The layer `A_{>=n} / A_{>=n+1}`: rows concentrated in one degree with all
/// positive-degree action zero.
pub fn layer_bimodule(algebra: &Arc<ZAlgebra>, n: usize) -> Bimodule {
    let w = algebra.window;
    let mut rows = BTreeMap::new();
    for i in w.degrees() {
        let j = i + n as i64;
        if !w.contains(j) || algebra.dim(i, j) == 0 {
            continue;
        }
        let mut comp = BTreeMap::new();
        comp.insert(j, algebra.dim(i, j));
        rows.insert(
            i,
            Arc::new(GradedModule::new_unchecked(
                algebra.clone(),
                Side::Right,
                comp,
                BTreeMap::new(),
            )),
        );
    }
    Bimodule::new_unchecked(algebra.clone(), rows, BTreeMap::new())
}

/// The tail `A_{>=n}` as a bimodule (a subobject of `A`).
pub fn tail_bimodule(algebra: &Arc<ZAlgebra>, n: usize) -> Bimodule {
    let w = algebra.window;
    let mut rows = BTreeMap::new();
    for i in w.degrees() {
        let mut comp = BTreeMap::new();
        let mut action = BTreeMap::new();
        for j in i + n as i64..=w.hi {
            let d = algebra.dim(i, j);
            if d > 0 {
                comp.insert(j, d);
            }
        }
        for j in i + n as i64..=w.hi {
            if algebra.dim(i, j) == 0 {
                continue;
            }
            for k in j + 1..=w.hi {
                if algebra.dim(j, k) == 0 || algebra.dim(i, k) == 0 {
                    continue;
                }
                let t = algebra.mult_tensor(i, j, k);
                if t.entries().next().is_some() {
                    action.insert((j, k), t);
                }
            }
        }
        if !comp.is_empty() {
            rows.insert(
                i,
                Arc::new(GradedModule::new_unchecked(
                    algebra.clone(),
                    Side::Right,
                    comp,
                    action,
                )),
            );
        }
    }
    let mut left = BTreeMap::new();
    for l in w.degrees() {
        for i in l + 1..=w.hi {
            if algebra.dim(l, i) == 0 {
                continue;
            }
            for j in i + n as i64..=w.hi {
                if algebra.dim(i, j) == 0 || algebra.dim(l, j) == 0 {
                    continue;
                }
                let t = algebra.mult_tensor(l, i, j);
                if t.entries().next().is_some() {
                    left.insert((l, i, j), t);
                }
            }
        }
    }
    Bimodule::new_unchecked(algebra.clone(), rows, left)
}

/// The surjection between two quotient rows (identity on the shared
/// components), e.g. `e_i(A/A_{>=n+1}) -> e_i(A/A_{>=n})`.
pub fn quotient_row_surjection(
    finer: &Arc<GradedModule>,
    coarser: &Arc<GradedModule>,
) -> ModuleMorphism {
    let field = finer.algebra.field;
    let mut mats = BTreeMap::new();
    for d in coarser.support() {
        let dim = coarser.dim(d);
        assert_eq!(finer.dim(d), dim, "surjection expects matching components");
        mats.insert(d, SparseMatrix::identity(field, dim));
    }
    ModuleMorphism::new(finer.clone(), coarser.clone(), mats)
}

/// The internal tensor `M (x)_A N` of a right module with a bimodule:
/// degreewise cokernel of `mu (x) 1 - 1 (x) mu`, with the block bookkeeping
/// kept so morphisms can be pushed through.
#[derive(Debug, Clone)]
pub struct TensorProduct {
    pub module: Arc<GradedModule>,
    blocks: BTreeMap<i64, Vec<(i64, usize)>>,
    quots: BTreeMap<i64, QuotientSpace>,
    n_row_dims: BTreeMap<(i64, i64), usize>,
}

impl TensorProduct {
    fn ambient_coord(&self, j: i64, ndeg: i64, p: usize, x: usize) -> usize {
        let off = self
            .blocks
            .get(&j)
            .and_then(|b| b.iter().find(|&&(d, _)| d == ndeg).map(|&(_, o)| o))
            .expect("missing ambient block");
        off + p * self.n_row_dims[&(ndeg, j)] + x
    }

    fn decode(&self, j: i64, coord: usize) -> (i64, usize, usize) {
        let blocks = &self.blocks[&j];
        for &(ndeg, off) in blocks.iter().rev() {
            if coord >= off {
                let rel = coord - off;
                let nx = self.n_row_dims[&(ndeg, j)];
                return (ndeg, rel / nx, rel % nx);
            }
        }
        unreachable!("coordinate outside ambient space")
    }

    /// The morphism `M (x) N -> M' (x) N` induced by `f: M -> M'`, where
    /// `self` was built from `M` and `target` from `M'`.
    pub fn induced(&self, f: &ModuleMorphism, target: &TensorProduct) -> ModuleMorphism {
        let field = self.module.algebra.field;
        let mut mats = BTreeMap::new();
        for j in self.module.support().collect::<Vec<_>>() {
            let cols = self.module.dim(j);
            let rows = target.module.dim(j);
            let mut mat = SparseMatrix::zero(field, rows, cols);
            let quot = &self.quots[&j];
            for c in 0..cols {
                let coord = quot.basis_coord(c);
                let (ndeg, p, x) = self.decode(j, coord);
                let fp = f.mat(ndeg).column(p);
                let tq = &target.quots[&j];
                let mut amb = vec![field.zero(); tq.ambient];
                let mut touched = false;
                for (q, v) in fp.iter().enumerate() {
                    if !v.is_zero() && target.n_row_dims.contains_key(&(ndeg, j)) {
                        amb[target.ambient_coord(j, ndeg, q, x)] = v.clone();
                        touched = true;
                    }
                }
                if touched {
                    for (r, v) in tq.project(&amb).into_iter().enumerate() {
                        if !v.is_zero() {
                            mat.set(r, c, v);
                        }
                    }
                }
            }
            if !mat.is_zero() {
                mats.insert(j, mat);
            }
        }
        ModuleMorphism::new(self.module.clone(), target.module.clone(), mats)
    }
}

/// Computes `M (x)_A N` for a right module `M` and bimodule `N`.
pub fn tensor_internal(m: &GradedModule, n: &Bimodule) -> Result<TensorProduct, ModuleError> {
    if m.algebra != n.algebra {
        return Err(ModuleError::AlgebraMismatch);
    }
    if m.side != Side::Right {
        return Err(ModuleError::WrongSide(Side::Right));
    }
    let algebra = m.algebra.clone();
    let field = algebra.field;
    let w = algebra.window;

    let mut n_row_dims = BTreeMap::new();
    for nd in w.degrees() {
        for j in w.degrees() {
            let d = n.dim(nd, j);
            if d > 0 {
                n_row_dims.insert((nd, j), d);
            }
        }
    }

    let mut blocks: BTreeMap<i64, Vec<(i64, usize)>> = BTreeMap::new();
    let mut quots: BTreeMap<i64, QuotientSpace> = BTreeMap::new();
    for j in w.degrees() {
        let mut blist = Vec::new();
        let mut off = 0usize;
        for nd in w.degrees() {
            let md = m.dim(nd);
            let xd = n.dim(nd, j);
            if md > 0 && xd > 0 {
                blist.push((nd, off));
                off += md * xd;
            }
        }
        let ambient = off;
        let coord = |blist: &[(i64, usize)], ndeg: i64, p: usize, x: usize| -> Option<usize> {
            blist
                .iter()
                .find(|&&(d, _)| d == ndeg)
                .map(|&(_, o)| o + p * n.dim(ndeg, j) + x)
        };
        // relations mu (x) 1 - 1 (x) mu on basis triples
        let mut rows_v: Vec<Vec<Scalar>> = Vec::new();
        for l in w.degrees() {
            if m.dim(l) == 0 {
                continue;
            }
            for mid in l + 1..=w.hi {
                if algebra.dim(l, mid) == 0 || n.dim(mid, j) == 0 {
                    continue;
                }
                for a in 0..algebra.dim(l, mid) {
                    let pa_mat = m.action_matrix_basis(l, mid, a); // M_l -> M_mid
                    let ax_mat = n.left_action_matrix_basis(l, mid, j, a); // N_{mid,j} -> N_{l,j}
                    for p in 0..m.dim(l) {
                        let pa = pa_mat.column(p);
                        for x in 0..n.dim(mid, j) {
                            let mut row = vec![field.zero(); ambient];
                            let mut touched = false;
                            for (q, v) in pa.iter().enumerate() {
                                if v.is_zero() {
                                    continue;
                                }
                                if let Some(cd) = coord(&blist, mid, q, x) {
                                    row[cd] = &row[cd] + v;
                                    touched = true;
                                }
                            }
                            let ax = ax_mat.column(x);
                            for (y, v) in ax.iter().enumerate() {
                                if v.is_zero() {
                                    continue;
                                }
                                if let Some(cd) = coord(&blist, l, p, y) {
                                    row[cd] = &row[cd] - v;
                                    touched = true;
                                }
                            }
                            if touched {
                                rows_v.push(row);
                            }
                        }
                    }
                }
            }
        }
        let mut span = SparseMatrix::zero(field, rows_v.len(), ambient);
        for (r, row) in rows_v.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    span.set(r, c, v.clone());
                }
            }
        }
        quots.insert(j, QuotientSpace::new(&span));
        blocks.insert(j, blist);
    }

    let mut comp = BTreeMap::new();
    for (&j, q) in &quots {
        if q.dim() > 0 {
            comp.insert(j, q.dim());
        }
    }

    let partial = TensorProduct {
        module: Arc::new(GradedModule::zero(algebra.clone(), Side::Right)),
        blocks,
        quots,
        n_row_dims,
    };

    // right action on representatives: (p (x) x) . b = p (x) (x . b)
    let mut action = BTreeMap::new();
    for j in w.degrees() {
        let dj = comp.get(&j).copied().unwrap_or(0);
        if dj == 0 {
            continue;
        }
        for k in j + 1..=w.hi {
            let da = algebra.dim(j, k);
            let dk = comp.get(&k).copied().unwrap_or(0);
            if da == 0 || dk == 0 {
                continue;
            }
            let mut t = Tensor3::zero(field, dj, da, dk);
            let mut any = false;
            let qj = &partial.quots[&j];
            let qk = &partial.quots[&k];
            for b in 0..da {
                for c in 0..dj {
                    let coordv = qj.basis_coord(c);
                    let (ndeg, p, x) = partial.decode(j, coordv);
                    if n.dim(ndeg, k) == 0 {
                        continue;
                    }
                    let xb = n.row(ndeg).action_matrix_basis(j, k, b).column(x);
                    let mut amb = vec![field.zero(); qk.ambient];
                    let mut touched = false;
                    for (y, v) in xb.iter().enumerate() {
                        if !v.is_zero() {
                            amb[partial.ambient_coord(k, ndeg, p, y)] = v.clone();
                            touched = true;
                        }
                    }
                    if touched {
                        for (r, v) in qk.project(&amb).into_iter().enumerate() {
                            if !v.is_zero() {
                                t.set(c, b, r, v);
                                any = true;
                            }
                        }
                    }
                }
            }
            if any {
                action.insert((j, k), t);
            }
        }
    }

    let module = Arc::new(GradedModule::new(
        algebra.clone(),
        Side::Right,
        comp,
        action,
    ));
    Ok(TensorProduct {
        module,
        blocks: partial.blocks,
        quots: partial.quots,
        n_row_dims: partial.n_row_dims,
    })
}

/// Dimension of the plain vector space `M (x)_A N` for a right `M` and a
/// left `N`.
pub fn tensor_with_left(m: &GradedModule, n: &GradedModule) -> Result<usize, ModuleError> {
    if m.algebra != n.algebra {
        return Err(ModuleError::AlgebraMismatch);
    }
    if m.side != Side::Right || n.side != Side::Left {
        return Err(ModuleError::WrongSide(Side::Right));
    }
    let algebra = &m.algebra;
    let field = algebra.field;
    let w = algebra.window;
    let mut offs: BTreeMap<i64, usize> = BTreeMap::new();
    let mut ambient = 0usize;
    for d in w.degrees() {
        let sz = m.dim(d) * n.dim(d);
        if sz > 0 {
            offs.insert(d, ambient);
            ambient += sz;
        }
    }
    let mut rows_v: Vec<Vec<Scalar>> = Vec::new();
    for l in w.degrees() {
        if m.dim(l) == 0 {
            continue;
        }
        for mid in l + 1..=w.hi {
            if algebra.dim(l, mid) == 0 || n.dim(mid) == 0 {
                continue;
            }
            for a in 0..algebra.dim(l, mid) {
                let pa_mat = m.action_matrix_basis(l, mid, a); // M_l -> M_mid
                let ax_mat = n.action_matrix_basis(l, mid, a); // N_mid -> N_l
                for p in 0..m.dim(l) {
                    for x in 0..n.dim(mid) {
                        let mut row = vec![field.zero(); ambient];
                        let mut touched = false;
                        if let Some(&off) = offs.get(&mid) {
                            for (q, v) in pa_mat.column(p).iter().enumerate() {
                                if !v.is_zero() {
                                    row[off + q * n.dim(mid) + x] = v.clone();
                                    touched = true;
                                }
                            }
                        }
                        if let Some(&off) = offs.get(&l) {
                            for (y, v) in ax_mat.column(x).iter().enumerate() {
                                if !v.is_zero() {
                                    let cd = off + p * n.dim(l) + y;
                                    row[cd] = &row[cd] - v;
                                    touched = true;
                                }
                            }
                        }
                        if touched {
                            rows_v.push(row);
                        }
                    }
                }
            }
        }
    }
    let mut span = SparseMatrix::zero(field, rows_v.len(), ambient);
    for (r, row) in rows_v.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            if !v.is_zero() {
                span.set(r, c, v.clone());
            }
        }
    }
    Ok(ambient - span.rank())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_nil, make_poly, make_trivial, Window};
    use crate::field::FieldSpec;
    use crate::module::{free_row, free_row_left, simple_row};

    fn arc(a: ZAlgebra) -> Arc<ZAlgebra> {
        Arc::new(a)
    }

    fn w(lo: i64, hi: i64) -> Window {
        Window::new(lo, hi, 2).unwrap()
    }

    #[test]
    fn algebra_bimodule_validates() {
        let a = arc(make_poly(2, w(0, 4), FieldSpec::Q));
        let b = algebra_bimodule(&a);
        b.assert_valid();
        assert_eq!(b.dim(0, 2), 3);
    }

    #[test]
    fn quotient_bimodule_rows() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        let b = quotient_bimodule(&a, 2);
        b.assert_valid();
        assert_eq!(b.dim(1, 1), 1);
        assert_eq!(b.dim(1, 2), 2);
        assert_eq!(b.dim(1, 3), 0);
        let a0 = augmentation_bimodule(&a);
        assert_eq!(a0.dim(3, 3), 1);
        assert_eq!(a0.dim(3, 4), 0);
    }

    #[test]
    fn layer_matches_component_dims() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        let b = layer_bimodule(&a, 2);
        assert_eq!(b.dim(1, 3), a.dim(1, 3));
        assert_eq!(b.dim(1, 2), 0);
        let tail = tail_bimodule(&a, 2);
        tail.assert_valid();
        assert_eq!(tail.dim(1, 3), a.dim(1, 3));
        assert_eq!(tail.dim(1, 2), 0);
        assert_eq!(tail.dim(1, 4), a.dim(1, 4));
    }

    #[test]
    fn free_row_tensor_recovers_row() {
        // e_i A (x) N = e_i N
        let a = arc(make_poly(1, w(0, 5), FieldSpec::Q));
        let m = free_row(&a, 1).unwrap();
        let n = quotient_bimodule(&a, 2);
        let t = tensor_internal(&m, &n).unwrap();
        assert_eq!(t.module.components(), n.row(1).components());
    }

    #[test]
    fn tensor_with_algebra_is_identity() {
        let a = arc(make_poly(2, w(0, 4), FieldSpec::Q));
        let m = simple_row(&a, 1).unwrap();
        let t = tensor_internal(&m, &algebra_bimodule(&a)).unwrap();
        assert_eq!(t.module.components(), m.components());
        let f = free_row(&a, 0).unwrap();
        let t = tensor_internal(&f, &algebra_bimodule(&a)).unwrap();
        assert_eq!(t.module.components(), f.components());
    }

    #[test]
    fn simple_tensor_simple_over_poly1() {
        // e_i A_0 (x) A_0 has dimension 1 in degree i and nothing else
        let a = arc(make_poly(1, w(0, 5), FieldSpec::Q));
        let m = simple_row(&a, 2).unwrap();
        let t = tensor_internal(&m, &augmentation_bimodule(&a)).unwrap();
        assert_eq!(t.module.total_dim(), 1);
        assert_eq!(t.module.dim(2), 1);
    }

    #[test]
    fn dual_bimodule_transposes_dims() {
        let a = arc(make_poly(2, w(0, 4), FieldSpec::Q));
        let b = algebra_bimodule(&a);
        let d = b.dual();
        for i in 0..=4 {
            for j in 0..=4 {
                assert_eq!(d.dim(i, j), b.dim(j, i), "({i},{j})");
            }
        }
        let dd = d.dual();
        for i in 0..=4 {
            for j in 0..=4 {
                assert_eq!(dd.dim(i, j), b.dim(i, j));
            }
        }
    }

    #[test]
    fn tensor_with_left_free_recovers_component() {
        // M (x) A e_j = M_j
        let a = arc(make_poly(2, w(0, 4), FieldSpec::Q));
        let m = free_row(&a, 0).unwrap();
        let n = free_row_left(&a, 3).unwrap();
        assert_eq!(tensor_with_left(&m, &n).unwrap(), m.dim(3));
    }

    #[test]
    fn nil_fiber() {
        let a = arc(make_nil(w(0, 6), FieldSpec::Q));
        let m = free_row(&a, 1).unwrap();
        let t = tensor_internal(&m, &augmentation_bimodule(&a)).unwrap();
        assert_eq!(t.module.total_dim(), 1);
        assert_eq!(t.module.dim(1), 1);
    }

    #[test]
    fn trivial_algebra_tensor() {
        let k = arc(make_trivial(w(0, 4), FieldSpec::Q));
        let m = free_row(&k, 2).unwrap();
        let t = tensor_internal(&m, &algebra_bimodule(&k)).unwrap();
        assert_eq!(t.module.total_dim(), 1);
    }

    #[test]
    fn quotient_surjection_commutes() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        let fine = Arc::new(crate::module::quotient_row(&a, 1, 3).unwrap());
        let coarse = Arc::new(crate::module::quotient_row(&a, 1, 2).unwrap());
        let s = quotient_row_surjection(&fine, &coarse);
        s.assert_valid();
    }
}
