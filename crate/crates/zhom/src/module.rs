//! Graded right and left modules over a Z-algebra, their morphisms, and the
//! degreewise abelian-category operations: kernels, cokernels, images,
//! duality, hom spaces, and the window-relative torsion submodule.
//!
//! Conventions follow the algebra: a right module has action maps
//! `M_j (x) A_{jk} -> M_k` and a left module has `A_{jk} (x) M_k -> M_j`.
//! Diagonal components act as scalars and are never stored.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Tensor3, ZAlgebra};
use crate::field::Scalar;
use crate::linalg::{QuotientSpace, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Right,
    Left,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModuleError {
    #[error("degree {0} outside window")]
    IndexOutsideWindow(i64),
    #[error("modules over different algebras")]
    AlgebraMismatch,
    #[error("expected a {0:?} module")]
    WrongSide(Side),
    #[error("module axioms violated: {0}")]
    AxiomViolation(String),
}

/// A graded module with finite-dimensional components on the window.
///
/// `action` is keyed by `(j, k)` with `j < k`; for a right module the tensor
/// maps `M_j (x) A_{jk} -> M_k` (layout `d_left = dim M_j`), for a left
/// module `A_{jk} (x) M_k -> M_j` (layout `d_left = dim A_{jk}`). Missing
/// cells are zero maps.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedModule {
    pub algebra: Arc<ZAlgebra>,
    pub side: Side,
    comp: BTreeMap<i64, usize>,
    action: BTreeMap<(i64, i64), Tensor3>,
}

impl GradedModule {
    pub fn new(
        algebra: Arc<ZAlgebra>,
        side: Side,
        comp: BTreeMap<i64, usize>,
        action: BTreeMap<(i64, i64), Tensor3>,
    ) -> Self {
        let comp = comp.into_iter().filter(|&(_, d)| d > 0).collect();
        let m = GradedModule {
            algebra,
            side,
            comp,
            action,
        };
        m.assert_valid();
        m
    }

    /// Skips the axiom assertion; for constructions that are valid by
    /// definition (algebra slices) or asserted by the caller.
    pub fn new_unchecked(
        algebra: Arc<ZAlgebra>,
        side: Side,
        comp: BTreeMap<i64, usize>,
        action: BTreeMap<(i64, i64), Tensor3>,
    ) -> Self {
        let comp = comp.into_iter().filter(|&(_, d)| d > 0).collect();
        GradedModule {
            algebra,
            side,
            comp,
            action,
        }
    }

    pub fn zero(algebra: Arc<ZAlgebra>, side: Side) -> Self {
        GradedModule {
            algebra,
            side,
            comp: BTreeMap::new(),
            action: BTreeMap::new(),
        }
    }

    pub fn dim(&self, d: i64) -> usize {
        self.comp.get(&d).copied().unwrap_or(0)
    }

    pub fn total_dim(&self) -> usize {
        self.comp.values().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.comp.is_empty()
    }

    pub fn support(&self) -> impl DoubleEndedIterator<Item = i64> + '_ {
        self.comp.keys().copied()
    }

    pub fn components(&self) -> &BTreeMap<i64, usize> {
        &self.comp
    }

    pub fn min_degree(&self) -> Option<i64> {
        self.comp.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<i64> {
        self.comp.keys().next_back().copied()
    }

    /// Source and destination component degrees of the action cell `(j, k)`.
    fn src_dst(&self, j: i64, k: i64) -> (i64, i64) {
        match self.side {
            Side::Right => (j, k),
            Side::Left => (k, j),
        }
    }

    pub fn action_tensor(&self, j: i64, k: i64) -> Tensor3 {
        assert!(j < k);
        if let Some(t) = self.action.get(&(j, k)) {
            return t.clone();
        }
        let field = self.algebra.field;
        let da = self.algebra.dim(j, k);
        let (s, d) = self.src_dst(j, k);
        match self.side {
            Side::Right => Tensor3::zero(field, self.dim(s), da, self.dim(d)),
            Side::Left => Tensor3::zero(field, da, self.dim(s), self.dim(d)),
        }
    }

    pub fn action_cells(&self) -> &BTreeMap<(i64, i64), Tensor3> {
        &self.action
    }

    /// Matrix of the action of the algebra element `u` in `A_{jk}`, mapping
    /// the source component to the destination component of the cell.
    pub fn action_matrix(&self, j: i64, k: i64, u: &[Scalar]) -> SparseMatrix {
        if j == k {
            // scalar action of A_{jj} = k . e_j
            let d = self.dim(j);
            return SparseMatrix::identity(self.algebra.field, d).scale(&u[0]);
        }
        let t = self.action_tensor(j, k);
        match self.side {
            Side::Right => t.right_matrix_vec(u),
            Side::Left => t.left_matrix_vec(u),
        }
    }

    pub fn action_matrix_basis(&self, j: i64, k: i64, idx: usize) -> SparseMatrix {
        let mut u = vec![self.algebra.field.zero(); self.algebra.dim(j, k)];
        u[idx] = self.algebra.field.one();
        self.action_matrix(j, k, &u)
    }

    /// Applies the action: right modules send `M_j` vectors forward along
    /// `u` in `A_{jk}`, left modules send `M_k` vectors back.
    pub fn act(&self, j: i64, k: i64, m: &[Scalar], u: &[Scalar]) -> Vec<Scalar> {
        self.action_matrix(j, k, u).apply(m)
    }

    /// Checks the module axioms (action shapes and associativity on basis
    /// triples); used as a construction-time assertion.
    pub fn check_axioms(&self) -> Result<(), ModuleError> {
        let w = self.algebra.window;
        for (&(j, k), t) in &self.action {
            let da = self.algebra.dim(j, k);
            let (s, d) = self.src_dst(j, k);
            let (el, er, eo) = match self.side {
                Side::Right => (self.dim(s), da, self.dim(d)),
                Side::Left => (da, self.dim(s), self.dim(d)),
            };
            if t.d_left != el || t.d_right != er || t.d_out != eo {
                return Err(ModuleError::AxiomViolation(format!(
                    "action cell ({j},{k}) has shape ({},{},{}), expected ({el},{er},{eo})",
                    t.d_left, t.d_right, t.d_out
                )));
            }
            if !w.contains(j) || !w.contains(k) {
                return Err(ModuleError::AxiomViolation(format!(
                    "action cell ({j},{k}) outside window"
                )));
            }
        }
        // (m . a) . b = m . (a b) on in-window triples, and the left mirror
        for j in w.degrees() {
            for k in j + 1..=w.hi {
                if self.algebra.dim(j, k) == 0 {
                    continue;
                }
                for l in k + 1..=w.hi {
                    if self.algebra.dim(k, l) == 0 {
                        continue;
                    }
                    let (first, second, combined) = match self.side {
                        Side::Right => ((j, k), (k, l), (j, l)),
                        Side::Left => ((k, l), (j, k), (j, l)),
                    };
                    let (src, _) = self.src_dst(combined.0, combined.1);
                    if self.dim(src) == 0 {
                        continue;
                    }
                    let t_alg = self.algebra.mult_tensor(j, k, l);
                    for a in 0..self.algebra.dim(j, k) {
                        for b in 0..self.algebra.dim(k, l) {
                            let (m_first, m_second) = match self.side {
                                Side::Right => (
                                    self.action_matrix_basis(first.0, first.1, a),
                                    self.action_matrix_basis(second.0, second.1, b),
                                ),
                                Side::Left => (
                                    self.action_matrix_basis(first.0, first.1, b),
                                    self.action_matrix_basis(second.0, second.1, a),
                                ),
                            };
                            let two_step = m_second.mul(&m_first);
                            let mut ea = vec![self.algebra.field.zero(); self.algebra.dim(j, k)];
                            ea[a] = self.algebra.field.one();
                            let mut eb = vec![self.algebra.field.zero(); self.algebra.dim(k, l)];
                            eb[b] = self.algebra.field.one();
                            let ab = t_alg.apply(&ea, &eb);
                            let one_step = self.action_matrix(combined.0, combined.1, &ab);
                            if two_step != one_step {
                                return Err(ModuleError::AxiomViolation(format!(
                                    "associativity fails at ({j},{k},{l}) basis ({a},{b})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn assert_valid(&self) {
        if let Err(e) = self.check_axioms() {
            panic!("constructed module is invalid: {e}");
        }
    }
}

/// A degree-zero morphism of graded modules, stored as one matrix per degree.
#[derive(Debug, Clone)]
pub struct ModuleMorphism {
    pub source: Arc<GradedModule>,
    pub target: Arc<GradedModule>,
    mats: BTreeMap<i64, SparseMatrix>,
}

impl ModuleMorphism {
    pub fn new(
        source: Arc<GradedModule>,
        target: Arc<GradedModule>,
        mats: BTreeMap<i64, SparseMatrix>,
    ) -> Self {
        let f = ModuleMorphism {
            source,
            target,
            mats,
        };
        f.assert_valid();
        f
    }

    pub fn new_unchecked(
        source: Arc<GradedModule>,
        target: Arc<GradedModule>,
        mats: BTreeMap<i64, SparseMatrix>,
    ) -> Self {
        ModuleMorphism {
            source,
            target,
            mats,
        }
    }

    pub fn zero(source: Arc<GradedModule>, target: Arc<GradedModule>) -> Self {
        ModuleMorphism {
            source,
            target,
            mats: BTreeMap::new(),
        }
    }

    pub fn identity(m: Arc<GradedModule>) -> Self {
        let mats = m
            .components()
            .iter()
            .map(|(&d, &n)| (d, SparseMatrix::identity(m.algebra.field, n)))
            .collect();
        ModuleMorphism {
            source: m.clone(),
            target: m,
            mats,
        }
    }

    pub fn mat(&self, d: i64) -> SparseMatrix {
        self.mats.get(&d).cloned().unwrap_or_else(|| {
            SparseMatrix::zero(
                self.source.algebra.field,
                self.target.dim(d),
                self.source.dim(d),
            )
        })
    }

    pub fn is_zero(&self) -> bool {
        self.mats.values().all(SparseMatrix::is_zero)
    }

    /// `g` after `self`.
    pub fn then(&self, g: &ModuleMorphism) -> ModuleMorphism {
        assert_eq!(self.target, g.source, "composition type mismatch");
        let mut mats = BTreeMap::new();
        for d in self.source.support() {
            let m = g.mat(d).mul(&self.mat(d));
            if !m.is_zero() {
                mats.insert(d, m);
            }
        }
        ModuleMorphism {
            source: self.source.clone(),
            target: g.target.clone(),
            mats,
        }
    }

    /// Commuting-square check against the actions on both sides.
    pub fn check_commutes(&self) -> Result<(), ModuleError> {
        if self.source.algebra != self.target.algebra {
            return Err(ModuleError::AlgebraMismatch);
        }
        if self.source.side != self.target.side {
            return Err(ModuleError::WrongSide(self.source.side));
        }
        let w = self.source.algebra.window;
        for (&d, m) in &self.mats {
            if m.rows != self.target.dim(d) || m.cols != self.source.dim(d) {
                return Err(ModuleError::AxiomViolation(format!(
                    "matrix at degree {d} has shape {}x{}, expected {}x{}",
                    m.rows,
                    m.cols,
                    self.target.dim(d),
                    self.source.dim(d)
                )));
            }
        }
        for j in w.degrees() {
            for k in j + 1..=w.hi {
                let da = self.source.algebra.dim(j, k);
                if da == 0 {
                    continue;
                }
                let (s, d) = match self.source.side {
                    Side::Right => (j, k),
                    Side::Left => (k, j),
                };
                if self.source.dim(s) == 0 && self.source.dim(d) == 0 {
                    continue;
                }
                for a in 0..da {
                    let lhs = self.mat(d).mul(&self.source.action_matrix_basis(j, k, a));
                    let rhs = self.target.action_matrix_basis(j, k, a).mul(&self.mat(s));
                    if lhs != rhs {
                        return Err(ModuleError::AxiomViolation(format!(
                            "morphism does not commute with the action at ({j},{k}) basis {a}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn assert_valid(&self) {
        if let Err(e) = self.check_commutes() {
            panic!("constructed morphism is invalid: {e}");
        }
    }

    /// Degreewise rank of the morphism.
    pub fn rank_at(&self, d: i64) -> usize {
        self.mat(d).rank()
    }
}

/// The free row `e_i A` (right) over the algebra.
pub fn free_row(algebra: &Arc<ZAlgebra>, i: i64) -> Result<GradedModule, ModuleError> {
    if !algebra.window.contains(i) {
        return Err(ModuleError::IndexOutsideWindow(i));
    }
    let mut comp = BTreeMap::new();
    let mut action = BTreeMap::new();
    for j in i..=algebra.window.hi {
        comp.insert(j, algebra.dim(i, j));
    }
    for j in i..=algebra.window.hi {
        if algebra.dim(i, j) == 0 {
            continue;
        }
        for k in j + 1..=algebra.window.hi {
            if algebra.dim(j, k) == 0 || algebra.dim(i, k) == 0 {
                continue;
            }
            let t = algebra.mult_tensor(i, j, k);
            if t.entries().next().is_some() {
                action.insert((j, k), t);
            }
        }
    }
    Ok(GradedModule::new_unchecked(
        algebra.clone(),
        Side::Right,
        comp,
        action,
    ))
}

/// The free left column `A e_j`.
pub fn free_row_left(algebra: &Arc<ZAlgebra>, j: i64) -> Result<GradedModule, ModuleError> {
    if !algebra.window.contains(j) {
        return Err(ModuleError::IndexOutsideWindow(j));
    }
    let mut comp = BTreeMap::new();
    let mut action = BTreeMap::new();
    for i in algebra.window.lo..=j {
        comp.insert(i, algebra.dim(i, j));
    }
    for l in algebra.window.lo..=j {
        for i in l + 1..=j {
            if algebra.dim(l, i) == 0 || algebra.dim(i, j) == 0 || algebra.dim(l, j) == 0 {
                continue;
            }
            let t = algebra.mult_tensor(l, i, j);
            if t.entries().next().is_some() {
                action.insert((l, i), t);
            }
        }
    }
    Ok(GradedModule::new_unchecked(
        algebra.clone(),
        Side::Left,
        comp,
        action,
    ))
}

/// The row `e_i (A / A_{>=n})`: components `A_{ij}` for `j - i < n` with the
/// induced (truncated) action.
pub fn quotient_row(algebra: &Arc<ZAlgebra>, i: i64, n: usize) -> Result<GradedModule, ModuleError> {
    if !algebra.window.contains(i) {
        return Err(ModuleError::IndexOutsideWindow(i));
    }
    let cutoff = i + n as i64;
    let mut comp = BTreeMap::new();
    let mut action = BTreeMap::new();
    for j in i..=algebra.window.hi.min(cutoff - 1) {
        comp.insert(j, algebra.dim(i, j));
    }
    for j in i..algebra.window.hi.min(cutoff - 1) {
        if algebra.dim(i, j) == 0 {
            continue;
        }
        for k in j + 1..=algebra.window.hi.min(cutoff - 1) {
            if algebra.dim(j, k) == 0 || algebra.dim(i, k) == 0 {
                continue;
            }
            let t = algebra.mult_tensor(i, j, k);
            if t.entries().next().is_some() {
                action.insert((j, k), t);
            }
        }
    }
    Ok(GradedModule::new_unchecked(
        algebra.clone(),
        Side::Right,
        comp,
        action,
    ))
}

/// The simple row `e_i A_0`; shorthand for the `n = 1` quotient.
pub fn simple_row(algebra: &Arc<ZAlgebra>, i: i64) -> Result<GradedModule, ModuleError> {
    quotient_row(algebra, i, 1)
}

/// The left mirror `(A / A_{<= j+... }) e_j`, i.e. `A e_j` truncated to the
/// components `A_{ij}` with `j - i < n`.
pub fn quotient_row_left(
    algebra: &Arc<ZAlgebra>,
    j: i64,
    n: usize,
) -> Result<GradedModule, ModuleError> {
    if !algebra.window.contains(j) {
        return Err(ModuleError::IndexOutsideWindow(j));
    }
    let cutoff = j - n as i64;
    let mut comp = BTreeMap::new();
    let mut action = BTreeMap::new();
    for i in algebra.window.lo.max(cutoff + 1)..=j {
        comp.insert(i, algebra.dim(i, j));
    }
    for l in algebra.window.lo.max(cutoff + 1)..=j {
        for i in l + 1..=j {
            if algebra.dim(l, i) == 0 || algebra.dim(i, j) == 0 || algebra.dim(l, j) == 0 {
                continue;
            }
            let t = algebra.mult_tensor(l, i, j);
            if t.entries().next().is_some() {
                action.insert((l, i), t);
            }
        }
    }
    Ok(GradedModule::new_unchecked(
        algebra.clone(),
        Side::Left,
        comp,
        action,
    ))
}

pub fn simple_row_left(algebra: &Arc<ZAlgebra>, j: i64) -> Result<GradedModule, ModuleError> {
    quotient_row_left(algebra, j, 1)
}

/// Builds the submodule of `parent` spanned degreewise by the columns of
/// `bases`, with the induced action. Panics if the spans are not closed
/// under the action (the caller promises a submodule).
pub fn submodule(
    parent: &Arc<GradedModule>,
    bases: &BTreeMap<i64, SparseMatrix>,
) -> (GradedModule, ModuleMorphism) {
    let field = parent.algebra.field;
    let mut comp = BTreeMap::new();
    for (&d, b) in bases {
        assert_eq!(b.rows, parent.dim(d), "basis ambient mismatch at {d}");
        comp.insert(d, b.cols);
    }
    let mut action = BTreeMap::new();
    let w = parent.algebra.window;
    for j in w.degrees() {
        for k in j + 1..=w.hi {
            let da = parent.algebra.dim(j, k);
            if da == 0 {
                continue;
            }
            let (s, d) = match parent.side {
                Side::Right => (j, k),
                Side::Left => (k, j),
            };
            let (Some(bs), Some(bd)) = (bases.get(&s), bases.get(&d)) else {
                // source or target span is zero; action is the zero map,
                // but a nonzero image into a zero span is a closure bug
                if let Some(bs) = bases.get(&s) {
                    for a in 0..da {
                        let img = parent.action_matrix_basis(j, k, a).mul(bs);
                        assert!(img.is_zero(), "span not closed at ({j},{k})");
                    }
                }
                continue;
            };
            if bs.cols == 0 || bd.cols == 0 {
                continue;
            }
            let mut t = match parent.side {
                Side::Right => Tensor3::zero(field, bs.cols, da, bd.cols),
                Side::Left => Tensor3::zero(field, da, bs.cols, bd.cols),
            };
            let mut any = false;
            for a in 0..da {
                let img = parent.action_matrix_basis(j, k, a).mul(bs);
                let x = bd
                    .solve_matrix(&img)
                    .expect("span not closed under the action");
                for (&(r, c), v) in x.entries() {
                    any = true;
                    match parent.side {
                        Side::Right => t.set(c, a, r, v.clone()),
                        Side::Left => t.set(a, c, r, v.clone()),
                    }
                }
            }
            if any {
                action.insert((j, k), t);
            }
        }
    }
    let sub = GradedModule::new(parent.algebra.clone(), parent.side, comp, action);
    let incl = ModuleMorphism::new(
        Arc::new(sub.clone()),
        parent.clone(),
        bases
            .iter()
            .filter(|(_, b)| b.cols > 0)
            .map(|(&d, b)| (d, b.clone()))
            .collect(),
    );
    (sub, incl)
}

/// Kernel of a morphism, with the induced action and the inclusion.
pub fn kernel(f: &ModuleMorphism) -> (GradedModule, ModuleMorphism) {
    let field = f.source.algebra.field;
    let mut bases = BTreeMap::new();
    for d in f.source.support() {
        let k = f.mat(d).kernel_basis();
        if !k.is_empty() {
            bases.insert(
                d,
                SparseMatrix::from_columns(field, f.source.dim(d), &k),
            );
        }
    }
    submodule(&f.source, &bases)
}

/// Image of a morphism inside its target, with the inclusion.
pub fn image(f: &ModuleMorphism) -> (GradedModule, ModuleMorphism) {
    let field = f.source.algebra.field;
    let mut bases = BTreeMap::new();
    for d in f.source.support() {
        let m = f.mat(d);
        // pivot columns of the rref pick an independent spanning set
        let rref = m.rref();
        let cols: Vec<Vec<Scalar>> = rref.pivots.iter().map(|&c| m.column(c)).collect();
        if !cols.is_empty() {
            bases.insert(d, SparseMatrix::from_columns(field, f.target.dim(d), &cols));
        }
    }
    submodule(&f.target, &bases)
}

/// Cokernel of a morphism, with the projection from the target.
pub fn cokernel(f: &ModuleMorphism) -> (GradedModule, ModuleMorphism) {
    let field = f.target.algebra.field;
    let w = f.target.algebra.window;
    let mut quots: BTreeMap<i64, QuotientSpace> = BTreeMap::new();
    for d in w.degrees() {
        let nd = f.target.dim(d);
        if nd == 0 {
            continue;
        }
        // rows of the spanning matrix are the image vectors
        let img = f.mat(d).transpose();
        quots.insert(d, QuotientSpace::new(&img));
    }
    let mut comp = BTreeMap::new();
    let mut proj_mats = BTreeMap::new();
    for (&d, q) in &quots {
        comp.insert(d, q.dim());
        if q.dim() > 0 {
            let mut p = SparseMatrix::zero(field, q.dim(), f.target.dim(d));
            for c in 0..f.target.dim(d) {
                let mut e = vec![field.zero(); f.target.dim(d)];
                e[c] = field.one();
                for (r, v) in q.project(&e).into_iter().enumerate() {
                    if !v.is_zero() {
                        p.set(r, c, v);
                    }
                }
            }
            proj_mats.insert(d, p);
        }
    }
    let mut action = BTreeMap::new();
    for j in w.degrees() {
        for k in j + 1..=w.hi {
            let da = f.target.algebra.dim(j, k);
            if da == 0 {
                continue;
            }
            let (s, d) = match f.target.side {
                Side::Right => (j, k),
                Side::Left => (k, j),
            };
            let (Some(qs), Some(qd)) = (quots.get(&s), quots.get(&d)) else {
                continue;
            };
            if qs.dim() == 0 || qd.dim() == 0 {
                continue;
            }
            let mut t = match f.target.side {
                Side::Right => Tensor3::zero(field, qs.dim(), da, qd.dim()),
                Side::Left => Tensor3::zero(field, da, qs.dim(), qd.dim()),
            };
            let mut any = false;
            for a in 0..da {
                let act = f.target.action_matrix_basis(j, k, a);
                for b in 0..qs.dim() {
                    let lifted = qs.lift(b);
                    let moved = act.apply(&lifted);
                    for (r, v) in qd.project(&moved).into_iter().enumerate() {
                        if !v.is_zero() {
                            any = true;
                            match f.target.side {
                                Side::Right => t.set(b, a, r, v),
                                Side::Left => t.set(a, b, r, v),
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
    let cok = GradedModule::new(f.target.algebra.clone(), f.target.side, comp, action);
    let proj = ModuleMorphism::new(f.target.clone(), Arc::new(cok.clone()), proj_mats);
    (cok, proj)
}

/// The componentwise dual: right modules become left modules and vice versa,
/// with `(a . phi)(m) = phi(m . a)` resp. `(phi . a)(m) = phi(a . m)`.
pub fn dual_module(m: &GradedModule) -> GradedModule {
    let field = m.algebra.field;
    let comp = m.components().clone();
    let mut action = BTreeMap::new();
    for (&(j, k), t) in m.action_cells() {
        let da = m.algebra.dim(j, k);
        match m.side {
            Side::Right => {
                // dual is left: A_{jk} (x) D(M)_k -> D(M)_j
                let mut nt = Tensor3::zero(field, da, m.dim(k), m.dim(j));
                for (&(w, v, u), val) in t.entries() {
                    // t[(w, v, u)]: (m_w . a_v) has coefficient val at basis u of M_k
                    nt.set(v, u, w, val.clone());
                }
                action.insert((j, k), nt);
            }
            Side::Left => {
                // dual is right: D(N)_j (x) A_{jk} -> D(N)_k
                let mut nt = Tensor3::zero(field, m.dim(j), da, m.dim(k));
                for (&(v, w, u), val) in t.entries() {
                    // t[(v, w, u)]: (a_v . m_w) has coefficient val at basis u of N_j
                    nt.set(u, v, w, val.clone());
                }
                action.insert((j, k), nt);
            }
        }
    }
    GradedModule::new(
        m.algebra.clone(),
        match m.side {
            Side::Right => Side::Left,
            Side::Left => Side::Right,
        },
        comp,
        action,
    )
}

/// Result of the window-relative torsion computation.
#[derive(Debug, Clone)]
pub struct TorsionResult {
    pub module: GradedModule,
    pub inclusion: ModuleMorphism,
    /// Set when the answer depends on degrees inside the guard zone.
    pub window_relative: bool,
}

/// The largest submodule of vectors whose forward orbit vanishes throughout
/// the guard zone of the window.
///
/// A vector at degree `j <= hi - guard` counts as torsion when its orbit is
/// zero in every degree of `(hi - guard, hi]`; nearer the top the available
/// evidence shrinks with the window, and at `hi` there is none, so nothing
/// at `hi` is counted. The result is flagged window-relative when the
/// computed submodule meets the guard zone.
pub fn torsion_submodule(m: &Arc<GradedModule>) -> Result<TorsionResult, ModuleError> {
    if m.side != Side::Right {
        return Err(ModuleError::WrongSide(Side::Right));
    }
    let w = m.algebra.window;
    let field = m.algebra.field;
    let rel_hi = w.reliable_hi();
    let mut bases = BTreeMap::new();
    for j in m.support().collect::<Vec<_>>() {
        let dm = m.dim(j);
        if j == w.hi {
            continue; // no forward window at the top degree
        }
        let start = rel_hi.max(j) + 1;
        let mut stacked = SparseMatrix::zero(field, 0, dm);
        for k in start..=w.hi {
            let da = m.algebra.dim(j, k);
            for a in 0..da {
                stacked = stacked.vstack(&m.action_matrix_basis(j, k, a));
            }
        }
        let kern = stacked.kernel_basis();
        if !kern.is_empty() {
            bases.insert(j, SparseMatrix::from_columns(field, dm, &kern));
        }
    }
    let (module, inclusion) = submodule(m, &bases);
    let window_relative = module.support().any(|d| d > rel_hi);
    Ok(TorsionResult {
        module,
        inclusion,
        window_relative,
    })
}

/// A basis of the space of degree-zero module homomorphisms `M -> N`,
/// computed from the commuting-square constraints.
pub fn hom_space(m: &Arc<GradedModule>, n: &Arc<GradedModule>) -> Vec<ModuleMorphism> {
    assert_eq!(m.algebra, n.algebra, "hom space needs one algebra");
    assert_eq!(m.side, n.side, "hom space needs one side");
    let field = m.algebra.field;
    let w = m.algebra.window;
    // unknown layout: one block per degree with both M_d and N_d nonzero
    let mut offsets: BTreeMap<i64, usize> = BTreeMap::new();
    let mut total = 0usize;
    for d in w.degrees() {
        let (md, nd) = (m.dim(d), n.dim(d));
        if md > 0 && nd > 0 {
            offsets.insert(d, total);
            total += md * nd;
        }
    }
    let unknown = |d: i64, r: usize, c: usize| -> Option<usize> {
        offsets.get(&d).map(|off| off + r * m.dim(d) + c)
    };
    let mut rows: Vec<BTreeMap<usize, Scalar>> = Vec::new();
    for j in w.degrees() {
        for k in j + 1..=w.hi {
            let da = m.algebra.dim(j, k);
            if da == 0 {
                continue;
            }
            let (s, d) = match m.side {
                Side::Right => (j, k),
                Side::Left => (k, j),
            };
            if m.dim(s) == 0 || n.dim(d) == 0 {
                continue;
            }
            for a in 0..da {
                let act_m = m.action_matrix_basis(j, k, a);
                let act_n = n.action_matrix_basis(j, k, a);
                // f_d . act_m - act_n . f_s = 0, one row per output entry
                for out_r in 0..n.dim(d) {
                    for out_c in 0..m.dim(s) {
                        let mut row: BTreeMap<usize, Scalar> = BTreeMap::new();
                        for mid in 0..m.dim(d) {
                            let coeff = act_m.get(mid, out_c);
                            if coeff.is_zero() {
                                continue;
                            }
                            if let Some(u) = unknown(d, out_r, mid) {
                                let cur = row.remove(&u).unwrap_or_else(|| field.zero());
                                let v = &cur + &coeff;
                                if !v.is_zero() {
                                    row.insert(u, v);
                                }
                            }
                        }
                        for mid in 0..n.dim(s) {
                            let coeff = act_n.get(out_r, mid);
                            if coeff.is_zero() {
                                continue;
                            }
                            if let Some(u) = unknown(s, mid, out_c) {
                                let cur = row.remove(&u).unwrap_or_else(|| field.zero());
                                let v = &cur - &coeff;
                                if !v.is_zero() {
                                    row.insert(u, v);
                                }
                            }
                        }
                        if !row.is_empty() {
                            rows.push(row);
                        }
                    }
                }
            }
        }
    }
    let mut constraint = SparseMatrix::zero(field, rows.len(), total);
    for (r, row) in rows.into_iter().enumerate() {
        for (c, v) in row {
            constraint.set(r, c, v);
        }
    }
    let solutions = if total == 0 {
        Vec::new()
    } else {
        constraint.kernel_basis()
    };
    solutions
        .into_iter()
        .map(|sol| {
            let mut mats = BTreeMap::new();
            for (&d, &off) in &offsets {
                let (md, nd) = (m.dim(d), n.dim(d));
                let mut mat = SparseMatrix::zero(field, nd, md);
                for r in 0..nd {
                    for c in 0..md {
                        let v = sol[off + r * md + c].clone();
                        if !v.is_zero() {
                            mat.set(r, c, v);
                        }
                    }
                }
                if !mat.is_zero() {
                    mats.insert(d, mat);
                }
            }
            ModuleMorphism::new(m.clone(), n.clone(), mats)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_nil, make_poly, make_trivial, Window};
    use crate::field::FieldSpec;

    fn arc(a: crate::algebra::ZAlgebra) -> Arc<ZAlgebra> {
        Arc::new(a)
    }

    fn w(lo: i64, hi: i64) -> Window {
        Window::new(lo, hi, 2).unwrap()
    }

    #[test]
    fn free_row_shapes() {
        let a = arc(make_poly(1, w(0, 5), FieldSpec::Q));
        let m = free_row(&a, 1).unwrap();
        for j in 1..=5 {
            assert_eq!(m.dim(j), 1);
        }
        assert_eq!(m.dim(0), 0);
        m.assert_valid();

        let k = arc(make_trivial(w(0, 4), FieldSpec::Q));
        let mk = free_row(&k, 2).unwrap();
        assert_eq!(mk.total_dim(), 1);
        assert_eq!(mk.dim(2), 1);

        let nil = arc(make_nil(w(0, 5), FieldSpec::Q));
        let mn = free_row(&nil, 1).unwrap();
        assert_eq!(mn.dim(1), 1);
        assert_eq!(mn.dim(2), 1);
        assert_eq!(mn.dim(3), 0);
    }

    #[test]
    fn out_of_window_rejected() {
        let a = arc(make_poly(1, w(0, 5), FieldSpec::Q));
        assert!(matches!(
            free_row(&a, 9),
            Err(ModuleError::IndexOutsideWindow(9))
        ));
    }

    #[test]
    fn simple_row_is_one_dimensional() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        let s = simple_row(&a, 3).unwrap();
        assert_eq!(s.total_dim(), 1);
        assert_eq!(s.dim(3), 1);
    }

    #[test]
    fn quotient_row_dims() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        let m = quotient_row(&a, 1, 2).unwrap();
        assert_eq!(m.dim(1), 1);
        assert_eq!(m.dim(2), 2);
        assert_eq!(m.dim(3), 0);
        m.assert_valid();
    }

    #[test]
    fn kernel_of_projection_is_shifted_free() {
        // over Poly(1): 0 -> e_{i+1}A -> e_iA -> e_iA_0 -> 0
        let a = arc(make_poly(1, w(0, 6), FieldSpec::Q));
        let f0 = Arc::new(free_row(&a, 1).unwrap());
        let s = Arc::new(simple_row(&a, 1).unwrap());
        let mut mats = BTreeMap::new();
        mats.insert(1, SparseMatrix::identity(FieldSpec::Q, 1));
        let psi = ModuleMorphism::new(f0, s, mats);
        let (ker, incl) = kernel(&psi);
        let expected = free_row(&a, 2).unwrap();
        assert_eq!(ker.components(), expected.components());
        incl.assert_valid();
    }

    #[test]
    fn kernel_of_identity_and_cokernel_of_zero() {
        let a = arc(make_poly(2, w(0, 4), FieldSpec::Q));
        let m = Arc::new(free_row(&a, 0).unwrap());
        let id = ModuleMorphism::identity(m.clone());
        let (ker, _) = kernel(&id);
        assert!(ker.is_zero());

        let z = ModuleMorphism::zero(Arc::new(GradedModule::zero(a.clone(), Side::Right)), m.clone());
        let (cok, _) = cokernel(&z);
        assert_eq!(cok.components(), m.components());
    }

    #[test]
    fn dual_swaps_sides_and_keeps_dims() {
        let a = arc(make_poly(1, w(0, 5), FieldSpec::Q));
        let left = free_row_left(&a, 4).unwrap();
        left.assert_valid();
        let d = dual_module(&left);
        assert_eq!(d.side, Side::Right);
        for i in 0..=4 {
            assert_eq!(d.dim(i), 1);
        }
        let dd = dual_module(&d);
        assert_eq!(dd.components(), left.components());
        // double dual is the identity on coordinates
        assert_eq!(dd.action_cells(), left.action_cells());
    }

    #[test]
    fn torsion_of_free_poly_row_vanishes() {
        let a = arc(make_poly(1, w(0, 8), FieldSpec::Q));
        let m = Arc::new(free_row(&a, 2).unwrap());
        let t = torsion_submodule(&m).unwrap();
        assert!(t.module.is_zero());
        assert!(!t.window_relative);
    }

    #[test]
    fn torsion_of_nil_free_row_is_everything() {
        let a = arc(make_nil(w(0, 8), FieldSpec::Q));
        let m = Arc::new(free_row(&a, 2).unwrap());
        let t = torsion_submodule(&m).unwrap();
        assert_eq!(t.module.components(), m.components());
        assert!(!t.window_relative);
    }

    #[test]
    fn torsion_of_simple_row() {
        let a = arc(make_poly(1, w(0, 8), FieldSpec::Q));
        let m = Arc::new(simple_row(&a, 3).unwrap());
        let t = torsion_submodule(&m).unwrap();
        assert_eq!(t.module.components(), m.components());
    }

    #[test]
    fn hom_between_frees_matches_algebra_component() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        // Hom(e_jA, e_iA) = A_{ij}
        let m = Arc::new(free_row(&a, 2).unwrap());
        let n = Arc::new(free_row(&a, 0).unwrap());
        assert_eq!(hom_space(&m, &n).len(), a.dim(0, 2));
        assert_eq!(hom_space(&m, &m).len(), 1);
        // Hom(e_jA, M) = 0 when M_j = 0
        let s = Arc::new(simple_row(&a, 0).unwrap());
        assert!(hom_space(&m, &s).is_empty());
    }
}
