//! Minimal free resolutions of left-bounded graded modules.
//!
//! Generators are chosen degree by degree as a complement of `M . A_{>=1}`
//! (the Nakayama argument), kernels are computed exactly, and the loop
//! repeats. Termination on a finite window is only claimed when the final
//! kernel vanishes on the whole window and no generator degree intrudes into
//! the guard zone; otherwise the resolution is reported window-truncated.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{Tensor3, ZAlgebra};
use crate::field::Scalar;
use crate::linalg::{QuotientSpace, SparseMatrix};
use crate::module::{GradedModule, ModuleError, ModuleMorphism, Side};

/// A finite direct sum of free rows `e_g A` (right) or columns `A e_g`
/// (left), with the generator-block bookkeeping every Hom and Tor
/// identification relies on.
#[derive(Debug, Clone)]
pub struct FreeModule {
    pub gens: Vec<i64>,
    pub module: Arc<GradedModule>,
}

impl FreeModule {
    pub fn new(algebra: &Arc<ZAlgebra>, mut gens: Vec<i64>, side: Side) -> Self {
        gens.sort_unstable();
        let field = algebra.field;
        let w = algebra.window;
        let mut comp: BTreeMap<i64, usize> = BTreeMap::new();
        for d in w.degrees() {
            let total: usize = gens.iter().map(|&g| alg_dim(algebra, side, g, d)).sum();
            if total > 0 {
                comp.insert(d, total);
            }
        }
        let mut action = BTreeMap::new();
        for j in w.degrees() {
            for k in j + 1..=w.hi {
                let da = algebra.dim(j, k);
                if da == 0 {
                    continue;
                }
                let (src, dst) = match side {
                    Side::Right => (j, k),
                    Side::Left => (k, j),
                };
                let sdim = comp.get(&src).copied().unwrap_or(0);
                let ddim = comp.get(&dst).copied().unwrap_or(0);
                if sdim == 0 || ddim == 0 {
                    continue;
                }
                let mut t = match side {
                    Side::Right => Tensor3::zero(field, sdim, da, ddim),
                    Side::Left => Tensor3::zero(field, da, sdim, ddim),
                };
                let mut any = false;
                let mut s_off = 0usize;
                let mut d_off = 0usize;
                for &g in &gens {
                    let bs = alg_dim(algebra, side, g, src);
                    let bd = alg_dim(algebra, side, g, dst);
                    if bs > 0 && bd > 0 {
                        let cell = match side {
                            Side::Right => algebra.mult_tensor(g, j, k),
                            Side::Left => algebra.mult_tensor(j, k, g),
                        };
                        for (&(a, b, c), v) in cell.entries() {
                            any = true;
                            match side {
                                // cell: A_{gj} (x) A_{jk} -> A_{gk}
                                Side::Right => t.set(s_off + a, b, d_off + c, v.clone()),
                                // cell: A_{jk} (x) A_{kg} -> A_{jg}
                                Side::Left => t.set(a, s_off + b, d_off + c, v.clone()),
                            }
                        }
                    }
                    s_off += bs;
                    d_off += bd;
                }
                if any {
                    action.insert((j, k), t);
                }
            }
        }
        let module = GradedModule::new_unchecked(algebra.clone(), side, comp, action);
        FreeModule {
            gens,
            module: Arc::new(module),
        }
    }

    pub fn side(&self) -> Side {
        self.module.side
    }

    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    /// `(generator index, offset, length)` of each block of the component at
    /// degree `d`, in generator order.
    pub fn blocks(&self, d: i64) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (idx, &g) in self.gens.iter().enumerate() {
            let len = alg_dim(&self.module.algebra, self.side(), g, d);
            if len > 0 {
                out.push((idx, off, len));
            }
            off += len;
        }
        out
    }

    /// Coordinate of the unit (the generator itself) of generator `idx`
    /// inside the component at its own degree.
    pub fn unit_coord(&self, idx: usize) -> usize {
        let g = self.gens[idx];
        self.blocks(g)
            .into_iter()
            .find(|&(i, _, _)| i == idx)
            .map(|(_, off, _)| off)
            .expect("generator block missing")
    }

    /// The morphism sending each generator to the given element of `target`
    /// (a coordinate vector in the component at the generator's degree).
    pub fn morphism_to(
        &self,
        target: &Arc<GradedModule>,
        images: &[Vec<Scalar>],
    ) -> ModuleMorphism {
        assert_eq!(images.len(), self.gens.len());
        let field = self.module.algebra.field;
        let side = self.side();
        let mut mats = BTreeMap::new();
        for d in self.module.support().collect::<Vec<_>>() {
            let mut mat = SparseMatrix::zero(field, target.dim(d), self.module.dim(d));
            for (idx, off, len) in self.blocks(d) {
                let g = self.gens[idx];
                let u = &images[idx];
                assert_eq!(u.len(), target.dim(g), "generator image dimension");
                let block = if g == d {
                    SparseMatrix::from_columns(field, target.dim(d), &[u.clone()])
                } else {
                    match side {
                        // column b: u . (basis b of A_{gd})
                        Side::Right => target.action_tensor(g, d).left_matrix_vec(u),
                        // column b: (basis b of A_{dg}) . u
                        Side::Left => target.action_tensor(d, g).right_matrix_vec(u),
                    }
                };
                assert_eq!(block.cols, len);
                mat.paste(0, off, &block);
            }
            if !mat.is_zero() {
                mats.insert(d, mat);
            }
        }
        ModuleMorphism::new(self.module.clone(), target.clone(), mats)
    }
}

fn alg_dim(algebra: &Arc<ZAlgebra>, side: Side, g: i64, d: i64) -> usize {
    match side {
        Side::Right => algebra.dim(g, d),
        Side::Left => algebra.dim(d, g),
    }
}

/// Degrees with multiplicity of a minimal generating set, the free cover,
/// and the covering surjection.
pub fn minimal_generators(
    m: &Arc<GradedModule>,
) -> Result<(Vec<i64>, FreeModule, ModuleMorphism), ModuleError> {
    let algebra = &m.algebra;
    let field = algebra.field;
    let w = algebra.window;
    let side = m.side;
    let mut gens: Vec<i64> = Vec::new();
    let mut images: Vec<Vec<Scalar>> = Vec::new();
    let degrees: Vec<i64> = match side {
        Side::Right => m.support().collect(),
        Side::Left => m.support().rev().collect(),
    };
    for &j in &degrees {
        let dm = m.dim(j);
        // span of (M . A_{>=1})_j (right) resp. (A_{>=1} . M)_j (left)
        let mut span = SparseMatrix::zero(field, 0, dm);
        let sources: Vec<i64> = match side {
            Side::Right => (w.lo..j).collect(),
            Side::Left => (j + 1..=w.hi).collect(),
        };
        for l in sources {
            if m.dim(l) == 0 {
                continue;
            }
            let (jj, kk) = match side {
                Side::Right => (l, j),
                Side::Left => (j, l),
            };
            let da = algebra.dim(jj, kk);
            for a in 0..da {
                span = span.vstack(&m.action_matrix_basis(jj, kk, a).transpose());
            }
        }
        let quot = QuotientSpace::new(&span);
        for b in 0..quot.dim() {
            gens.push(j);
            images.push(quot.lift(b));
        }
    }
    let free = FreeModule::new(algebra, gens.clone(), side);
    // align image order with the sorted generator order of the free module
    let mut order: Vec<usize> = (0..gens.len()).collect();
    order.sort_by_key(|&i| gens[i]);
    let images: Vec<Vec<Scalar>> = order.into_iter().map(|i| images[i].clone()).collect();
    let psi = free.morphism_to(m, &images);
    Ok((free.gens.clone(), free, psi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionStatus {
    Terminated,
    WindowTruncated { at_step: usize },
}

/// One step of a resolution: the free module `F_p` and its map (the
/// augmentation `F_0 -> M` for `p = 0`, the differential `F_p -> F_{p-1}`
/// for `p >= 1`).
#[derive(Debug, Clone)]
pub struct ResolutionStep {
    pub free: FreeModule,
    pub map: ModuleMorphism,
}

#[derive(Debug, Clone)]
pub struct FreeResolution {
    pub module: Arc<GradedModule>,
    pub steps: Vec<ResolutionStep>,
    pub status: ResolutionStatus,
    /// Leading steps whose generators all sit inside the reliable window;
    /// only these steps support termination-sensitive claims.
    pub reliable_steps: usize,
}

/// Certified projective dimension, or a window-limited lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PdBound {
    Exact(usize),
    /// `pd >= n`; the window or the length cap hid the rest.
    AtLeast(usize),
}

pub fn minimal_free_resolution(
    m: &Arc<GradedModule>,
    max_length: usize,
) -> Result<FreeResolution, ModuleError> {
    let w = m.algebra.window;
    let mut steps: Vec<ResolutionStep> = Vec::new();
    let mut cur = m.clone();
    let mut incl: Option<ModuleMorphism> = None;
    let mut reliable_steps = 0usize;
    let status;
    loop {
        if cur.is_zero() {
            status = ResolutionStatus::Terminated;
            break;
        }
        let p = steps.len();
        if p > max_length {
            status = ResolutionStatus::WindowTruncated { at_step: max_length };
            break;
        }
        let (gens, free, psi) = minimal_generators(&cur)?;
        let map = match &incl {
            None => psi.clone(),
            Some(i) => psi.then(i),
        };
        let guard_hit = match m.side {
            Side::Right => gens.iter().any(|&g| g > w.reliable_hi()),
            Side::Left => gens.iter().any(|&g| g < w.reliable_lo()),
        };
        let (ker, ker_incl) = crate::module::kernel(&psi);
        steps.push(ResolutionStep { free, map });
        if guard_hit {
            status = ResolutionStatus::WindowTruncated { at_step: p };
            break;
        }
        reliable_steps += 1;
        cur = Arc::new(ker);
        incl = Some(ker_incl);
    }
    let res = FreeResolution {
        module: m.clone(),
        steps,
        status,
        reliable_steps,
    };
    res.assert_minimal_and_exact();
    Ok(res)
}

impl FreeResolution {
    pub fn len_built(&self) -> usize {
        self.steps.len()
    }

    pub fn terminated(&self) -> bool {
        self.status == ResolutionStatus::Terminated
    }

    /// Whether homological degree `q` is certified by this resolution: the
    /// window data determines `Ext^q`/`Tor_q` of the resolved module. A
    /// terminated resolution certifies everything; a truncated one only the
    /// degrees strictly inside its reliable prefix.
    pub fn certifies(&self, q: usize) -> bool {
        self.terminated() || q + 1 < self.reliable_steps
    }

    /// Betti numbers: multiplicity of generator degree `j` at step `p`.
    pub fn betti(&self) -> BTreeMap<(usize, i64), usize> {
        let mut out = BTreeMap::new();
        for (p, step) in self.steps.iter().enumerate() {
            for &g in &step.free.gens {
                *out.entry((p, g)).or_insert(0) += 1;
            }
        }
        out
    }

    pub fn betti_at(&self, p: usize, j: i64) -> usize {
        self.steps
            .get(p)
            .map(|s| s.free.gens.iter().filter(|&&g| g == j).count())
            .unwrap_or(0)
    }

    /// Minimality: every differential lands in `F_{p-1} . A_{>=1}`, i.e. the
    /// generator coordinates of its image vanish.
    pub fn check_minimal(&self) -> Result<(), String> {
        for (p, step) in self.steps.iter().enumerate().skip(1) {
            let prev = &self.steps[p - 1].free;
            for (gi, &g) in step.free.gens.iter().enumerate() {
                let unit = step.free.unit_coord(gi);
                let col_mat = step.map.mat(g);
                for (hi, &h) in prev.gens.iter().enumerate() {
                    if h != g {
                        continue;
                    }
                    let row = prev.unit_coord(hi);
                    if !col_mat.get(row, unit).is_zero() {
                        return Err(format!(
                            "differential {p} hits a generator coordinate at degree {g}"
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Exactness by exact rank computation at every built position and
    /// degree, including surjectivity of the augmentation.
    pub fn check_exact(&self) -> Result<(), String> {
        if self.steps.is_empty() {
            return Ok(());
        }
        let w = self.module.algebra.window;
        for d in w.degrees() {
            let aug = self.steps[0].map.mat(d);
            if aug.rank() != self.module.dim(d) {
                return Err(format!("augmentation not surjective at degree {d}"));
            }
        }
        for p in 0..self.steps.len() {
            let here = &self.steps[p];
            // at the last built step of a truncated resolution the next
            // differential is unknown, so homology there is not checked
            if !self.terminated() && p + 1 == self.steps.len() {
                continue;
            }
            for d in w.degrees() {
                let out_map = here.map.mat(d);
                let cycles = out_map.cols - out_map.rank();
                let boundaries = match self.steps.get(p + 1) {
                    Some(next) => next.map.mat(d).rank(),
                    None => 0,
                };
                if cycles != boundaries {
                    return Err(format!(
                        "homology nonzero at step {p}, degree {d}: {cycles} cycles, {boundaries} boundaries"
                    ));
                }
            }
        }
        Ok(())
    }

    fn assert_minimal_and_exact(&self) {
        if let Err(e) = self.check_minimal() {
            panic!("resolution not minimal: {e}");
        }
        if let Err(e) = self.check_exact() {
            panic!("resolution not exact: {e}");
        }
    }

    /// Macaulay-style text table: steps across, degrees down.
    pub fn betti_text(&self) -> String {
        let betti = self.betti();
        let mut s = String::new();
        if betti.is_empty() {
            s.push_str("(zero module)\n");
            return s;
        }
        let pmax = self.steps.len() - 1;
        let dmin = betti.keys().map(|&(_, j)| j).min().unwrap();
        let dmax = betti.keys().map(|&(_, j)| j).max().unwrap();
        let _ = write!(s, "{:>6}", "deg");
        for p in 0..=pmax {
            let _ = write!(s, "{p:>6}");
        }
        s.push('\n');
        for d in dmin..=dmax {
            let _ = write!(s, "{d:>6}");
            for p in 0..=pmax {
                match betti.get(&(p, d)) {
                    Some(&n) => {
                        let _ = write!(s, "{n:>6}");
                    }
                    None => {
                        let _ = write!(s, "{:>6}", ".");
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Projective dimension through a minimal resolution: exact when the
/// resolution terminated inside the reliable window, otherwise the number of
/// certified nonzero steps as a lower bound.
pub fn projective_dimension(
    m: &Arc<GradedModule>,
    max_length: usize,
) -> Result<(PdBound, FreeResolution), ModuleError> {
    let res = minimal_free_resolution(m, max_length)?;
    let bound = match res.status {
        ResolutionStatus::Terminated => PdBound::Exact(res.steps.len().saturating_sub(1)),
        ResolutionStatus::WindowTruncated { .. } => {
            PdBound::AtLeast(res.steps.len().saturating_sub(1))
        }
    };
    Ok((bound, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_nil, make_poly, make_trivial, Window};
    use crate::field::FieldSpec;
    use crate::module::{free_row, simple_row, simple_row_left};

    fn arc(a: ZAlgebra) -> Arc<ZAlgebra> {
        Arc::new(a)
    }

    fn w(lo: i64, hi: i64) -> Window {
        Window::new(lo, hi, 2).unwrap()
    }

    #[test]
    fn free_module_blocks() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        let f = FreeModule::new(&a, vec![1, 1, 2], Side::Right);
        assert_eq!(f.module.dim(2), 2 + 2 + 1);
        let blocks = f.blocks(2);
        assert_eq!(blocks, vec![(0, 0, 2), (1, 2, 2), (2, 4, 1)]);
        assert_eq!(f.unit_coord(2), 4);
    }

    #[test]
    fn minimal_generators_of_free_row() {
        let a = arc(make_poly(2, w(0, 5), FieldSpec::Q));
        let m = Arc::new(free_row(&a, 1).unwrap());
        let (gens, _, psi) = minimal_generators(&m).unwrap();
        assert_eq!(gens, vec![1]);
        let (ker, _) = crate::module::kernel(&psi);
        assert!(ker.is_zero());
    }

    #[test]
    fn poly1_koszul_resolution() {
        let a = arc(make_poly(1, w(0, 7), FieldSpec::Q));
        let m = Arc::new(simple_row(&a, 1).unwrap());
        let res = minimal_free_resolution(&m, 8).unwrap();
        assert!(res.terminated());
        assert_eq!(res.steps.len(), 2);
        assert_eq!(res.betti_at(0, 1), 1);
        assert_eq!(res.betti_at(1, 2), 1);
    }

    #[test]
    fn poly2_koszul_betti() {
        let a = arc(make_poly(2, w(0, 8), FieldSpec::Q));
        let m = Arc::new(simple_row(&a, 2).unwrap());
        let res = minimal_free_resolution(&m, 8).unwrap();
        assert!(res.terminated());
        assert_eq!(res.betti_at(0, 2), 1);
        assert_eq!(res.betti_at(1, 3), 2);
        assert_eq!(res.betti_at(2, 4), 1);
        assert_eq!(res.steps.len(), 3);
    }

    #[test]
    fn nil_resolution_truncates() {
        let a = arc(make_nil(w(0, 10), FieldSpec::Q));
        let m = Arc::new(simple_row(&a, 0).unwrap());
        let res = minimal_free_resolution(&m, 5).unwrap();
        assert!(!res.terminated());
        for p in 0..=5usize {
            assert_eq!(res.betti_at(p, p as i64), 1, "betti({p})");
        }
        let (pd, _) = projective_dimension(&m, 5).unwrap();
        assert_eq!(pd, PdBound::AtLeast(5));
    }

    #[test]
    fn projective_dimensions() {
        let a = arc(make_poly(2, w(0, 8), FieldSpec::Q));
        let free = Arc::new(free_row(&a, 1).unwrap());
        let (pd, _) = projective_dimension(&free, 8).unwrap();
        assert_eq!(pd, PdBound::Exact(0));
        let s = Arc::new(simple_row(&a, 2).unwrap());
        let (pd, _) = projective_dimension(&s, 8).unwrap();
        assert_eq!(pd, PdBound::Exact(2));
        let k = arc(make_trivial(w(0, 6), FieldSpec::Q));
        let sk = Arc::new(simple_row(&k, 3).unwrap());
        let (pd, res) = projective_dimension(&sk, 8).unwrap();
        assert_eq!(pd, PdBound::Exact(0));
        assert_eq!(res.betti_at(0, 3), 1);
    }

    #[test]
    fn left_resolution_mirrors() {
        // over Poly(1): 0 -> A e_{j-1} -> A e_j -> (A_0) e_j -> 0
        let a = arc(make_poly(1, w(0, 7), FieldSpec::Q));
        let m = Arc::new(simple_row_left(&a, 5).unwrap());
        let res = minimal_free_resolution(&m, 8).unwrap();
        assert!(res.terminated());
        assert_eq!(res.betti_at(0, 5), 1);
        assert_eq!(res.betti_at(1, 4), 1);
    }

    #[test]
    fn betti_monotonicity_on_poly2() {
        let a = arc(make_poly(2, w(0, 8), FieldSpec::Q));
        let m = Arc::new(simple_row(&a, 1).unwrap());
        let res = minimal_free_resolution(&m, 8).unwrap();
        for p in 1..res.steps.len() {
            let min_prev = res.steps[p - 1].free.gens.iter().min().copied().unwrap();
            let min_here = res.steps[p].free.gens.iter().min().copied().unwrap();
            assert!(min_here >= min_prev + 1);
        }
    }
}
