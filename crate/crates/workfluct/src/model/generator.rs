//! Time-dependent Hamiltonians written as `H(t) = Σ_k c_k(t) O_k`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64 as C64;

use super::schedule::{merge_breaks, quantize, Form, Schedule};
use crate::error::{Error, Result};
use crate::qop::{Operator, SpaceLayout};

/// Time-dependent coefficient of one Hamiltonian term.
#[derive(Clone, Debug, PartialEq)]
pub enum Coef {
    Const(f64),
    Scheduled { factor: f64, schedule: Schedule },
}

impl Coef {
    pub fn scheduled(factor: f64, schedule: &Schedule) -> Coef {
        Coef::Scheduled { factor, schedule: schedule.clone() }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Coef::Const(c) => *c,
            Coef::Scheduled { factor, schedule } => factor * schedule.value(t),
        }
    }

    fn boundaries(&self, t0: f64, t1: f64) -> Vec<f64> {
        match self {
            Coef::Const(_) => Vec::new(),
            Coef::Scheduled { schedule, .. } => schedule.boundaries(t0, t1),
        }
    }

    fn local(&self, a: f64, b: f64) -> LocalCoef {
        match self {
            Coef::Const(c) => LocalCoef { factor: *c, form: Form::constant(1.0) },
            Coef::Scheduled { factor, schedule } => LocalCoef { factor: *factor, form: schedule.local_form(a, b) },
        }
    }

    /// `∫_{t0}^{t1} c(t) dt`
    pub fn integral(&self, rel_tol: f64) -> Result<f64> {
        match self {
            Coef::Const(_) => Err(Error::InvalidParameter("constant coefficient has no intrinsic duration".into())),
            Coef::Scheduled { factor, schedule } => Ok(factor * schedule.integral(rel_tol)?),
        }
    }

    pub fn duration(&self) -> Option<f64> {
        match self {
            Coef::Const(_) => None,
            Coef::Scheduled { schedule, .. } => Some(schedule.duration()),
        }
    }
}

/// A coefficient restricted to one smooth piece, in local time.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalCoef {
    pub factor: f64,
    pub form: Form,
}

impl LocalCoef {
    pub fn eval(&self, s: f64) -> f64 {
        self.factor * self.form.eval(s)
    }
}

/// Sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    pub fn from_dense(a: ArrayView2<C64>) -> Csr {
        let n = a.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in a.rows() {
            for (j, &z) in row.iter().enumerate() {
                if z != C64::new(0.0, 0.0) {
                    cols.push(j);
                    vals.push(z);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr { n, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out += c · A · x`
    pub fn accumulate(&self, c: C64, x: ArrayView2<C64>, out: &mut ArrayViewMut2<C64>) {
        for i in 0..self.n {
            let mut orow = out.row_mut(i);
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = c * self.vals[idx];
                let xrow = x.row(self.cols[idx]);
                match (orow.as_slice_mut(), xrow.as_slice()) {
                    (Some(o), Some(xs)) => o.iter_mut().zip(xs).for_each(|(o, &v)| *o += a * v),
                    _ => orow.zip_mut_with(&xrow, |o, &v| *o += a * v),
                }
            }
        }
    }
}

/// Commutator `[O_k, O_l]` of two operator terms.
#[derive(Clone, Debug)]
pub struct TermCommutator {
    pub k: usize,
    pub l: usize,
    sparse: Csr,
}

#[derive(Clone, Debug)]
struct Term {
    op: Operator,
    sparse: Csr,
    coef: Coef,
    diag: Vec<f64>,
    radius: Vec<f64>,
}

/// `H(t) = Σ_k c_k(t) O_k` with Hermitian `O_k` and real coefficients, so
/// every `H(t)` is exactly Hermitian.
#[derive(Clone, Debug)]
pub struct TdHamiltonian {
    layout: SpaceLayout,
    terms: Vec<Term>,
    fingerprint: u64,
}

/// Maximal interval on which every coefficient is smooth, described in local time.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub len: f64,
    pub coefs: Vec<LocalCoef>,
}

impl Piece {
    pub fn end(&self) -> f64 {
        self.start + self.len
    }

    pub fn is_constant(&self) -> bool {
        self.coefs.iter().all(|c| c.form.is_constant())
    }

    /// Identifies the generator on this piece independently of where the piece sits in time.
    pub fn key(&self) -> Vec<i64> {
        let mut out = self.shape_key();
        out.push(quantize(self.len));
        out
    }

    /// Consecutive sub-pieces of length `chunk` measured from the start, plus
    /// a shorter remainder if `chunk` does not divide the length.
    pub fn chunks(&self, chunk: f64) -> Vec<Piece> {
        let n = (self.len / chunk + 1e-9).floor() as usize;
        let mut out: Vec<Piece> = (0..n).map(|k| self.sub(k as f64 * chunk, chunk)).collect();
        let rest = self.len - n as f64 * chunk;
        if rest > 1e-9 * chunk {
            out.push(self.sub(n as f64 * chunk, rest));
        }
        if out.is_empty() {
            out.push(self.clone());
        }
        out
    }

    fn sub(&self, offset: f64, len: f64) -> Piece {
        Piece {
            start: self.start + offset,
            len,
            coefs: self.coefs.iter().map(|c| LocalCoef { factor: c.factor, form: c.form.rebase(offset) }).collect(),
        }
    }

    /// Like [`Piece::key`] but without the duration; only meaningful for constant pieces.
    pub fn shape_key(&self) -> Vec<i64> {
        let mut out = vec![self.coefs.len() as i64];
        for c in &self.coefs {
            out.push(quantize(c.factor));
            c.form.fingerprint(&mut out);
        }
        out
    }
}

impl TdHamiltonian {
    pub fn new(layout: &SpaceLayout) -> Self {
        let mut h = DefaultHasher::new();
        layout.hash(&mut h);
        Self { layout: layout.clone(), terms: Vec::new(), fingerprint: h.finish() }
    }

    pub fn with_term(mut self, op: Operator, coef: Coef) -> Result<Self> {
        self.add_term(op, coef)?;
        Ok(self)
    }

    pub fn add_term(&mut self, op: Operator, coef: Coef) -> Result<()> {
        if op.layout() != &self.layout {
            return Err(Error::Dimension(format!(
                "term layout {:?} differs from {:?}",
                op.layout().factors(),
                self.layout.factors()
            )));
        }
        op.require_hermitian(0.0)?;
        let sparse = Csr::from_dense(op.view());
        let diag = op.entries().diag().iter().map(|z| z.re).collect();
        let radius = op
            .entries()
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, z)| z.norm()).sum())
            .collect();
        let mut h = DefaultHasher::new();
        self.fingerprint.hash(&mut h);
        for z in op.entries().iter() {
            z.re.to_bits().hash(&mut h);
            z.im.to_bits().hash(&mut h);
        }
        self.fingerprint = h.finish();
        self.terms.push(Term { op, sparse, coef, diag, radius });
        Ok(())
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    /// Hash of the layout and the operator terms, ignoring the coefficients.
    pub fn operator_fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn coefs(&self) -> impl Iterator<Item = &Coef> {
        self.terms.iter().map(|t| &t.coef)
    }

    /// Duration shared by the scheduled coefficients, if any.
    pub fn duration(&self) -> Option<f64> {
        self.terms.iter().filter_map(|t| t.coef.duration()).reduce(f64::min)
    }

    pub fn at(&self, t: f64) -> Operator {
        self.combine(|k| self.terms[k].coef.value(t))
    }

    /// Checked evaluation on `[0, duration]`.
    pub fn eval(&self, t: f64) -> Result<Operator> {
        if let Some(end) = self.duration() {
            let tol = 1e-12 * end.max(1.0);
            if !(t >= -tol && t <= end + tol) {
                return Err(Error::OutOfDomain { t, end });
            }
        }
        Ok(self.at(t))
    }

    fn combine(&self, c: impl Fn(usize) -> f64) -> Operator {
        let mut out = Operator::zeros(&self.layout);
        for (k, term) in self.terms.iter().enumerate() {
            let ck = c(k);
            if ck != 0.0 {
                out.add_scaled(ck, &term.op).expect("same layout");
            }
        }
        out
    }

    /// Splits `[t0, t1]` into pieces on which all coefficients are smooth.
    pub fn pieces(&self, t0: f64, t1: f64) -> Vec<Piece> {
        if t1 <= t0 {
            return Vec::new();
        }
        let mut cuts = vec![t0, t1];
        for term in &self.terms {
            cuts.extend(term.coef.boundaries(t0, t1));
        }
        let cuts = merge_breaks(cuts);
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let coefs: Vec<LocalCoef> = self.terms.iter().map(|t| t.coef.local(a, b)).collect();
            let len = b - a;
            let mut inner: Vec<f64> = vec![0.0, len];
            for c in &coefs {
                inner.extend(c.form.internal_breaks(len));
            }
            let inner = merge_breaks(inner);
            for iw in inner.windows(2) {
                let (s0, s1) = (iw[0], iw[1]);
                let start = if s0 == 0.0 { a } else { a + s0 };
                out.push(Piece {
                    start,
                    len: s1 - s0,
                    coefs: coefs.iter().map(|c| LocalCoef { factor: c.factor, form: c.form.rebase(s0) }).collect(),
                });
            }
        }
        out
    }

    /// Dense `H` at local time `s` of a piece.
    pub fn piece_dense(&self, piece: &Piece, s: f64) -> Operator {
        self.combine(|k| piece.coefs[k].eval(s))
    }

    /// `out += scale · H(s) · x` using the sparse terms.
    pub fn piece_apply(&self, piece: &Piece, s: f64, scale: C64, x: ArrayView2<C64>, out: &mut ArrayViewMut2<C64>) {
        for (term, c) in self.terms.iter().zip(&piece.coefs) {
            let ck = c.eval(s);
            if ck != 0.0 {
                term.sparse.accumulate(scale * ck, x, out);
            }
        }
    }

    /// Coefficients `c_k(s)` on a piece.
    pub fn piece_coefs(&self, piece: &Piece, s: f64) -> Vec<f64> {
        piece.coefs.iter().map(|c| c.eval(s)).collect()
    }

    /// `[O_k, O_l]` for every pair `k < l` whose commutator can contribute on
    /// this piece, that is not both coefficients constant and not commuting.
    pub fn piece_commutators(&self, piece: &Piece) -> Vec<TermCommutator> {
        let mut out = Vec::new();
        for k in 0..self.terms.len() {
            for l in k + 1..self.terms.len() {
                if piece.coefs[k].form.is_constant() && piece.coefs[l].form.is_constant() {
                    continue;
                }
                let (a, b) = (self.terms[k].op.view(), self.terms[l].op.view());
                let c = a.dot(&b) - b.dot(&a);
                if c.iter().any(|z| *z != C64::new(0.0, 0.0)) {
                    out.push(TermCommutator { k, l, sparse: Csr::from_dense(c.view()) });
                }
            }
        }
        out
    }

    /// `out += Σ_k a_k O_k x + Σ b_kl [O_k, O_l] x`
    pub fn apply_combination(
        &self,
        a: &[C64],
        commutators: &[TermCommutator],
        b: &[C64],
        x: ArrayView2<C64>,
        out: &mut ArrayViewMut2<C64>,
    ) {
        for (term, &ak) in self.terms.iter().zip(a) {
            if ak != C64::new(0.0, 0.0) {
                term.sparse.accumulate(ak, x, out);
            }
        }
        for (c, &bk) in commutators.iter().zip(b) {
            if bk != C64::new(0.0, 0.0) {
                c.sparse.accumulate(bk, x, out);
            }
        }
    }

    /// Gershgorin enclosure of the spectrum of `H(s)`.
    pub fn piece_bounds(&self, piece: &Piece, s: f64) -> (f64, f64) {
        let n = self.dim();
        let mut center = vec![0.0; n];
        let mut radius = vec![0.0; n];
        for (term, c) in self.terms.iter().zip(&piece.coefs) {
            let ck = c.eval(s);
            if ck == 0.0 {
                continue;
            }
            for i in 0..n {
                center[i] += ck * term.diag[i];
                radius[i] += ck.abs() * term.radius[i];
            }
        }
        let lo = (0..n).map(|i| center[i] - radius[i]).fold(f64::INFINITY, f64::min);
        let hi = (0..n).map(|i| center[i] + radius[i]).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn nnz(&self) -> usize {
        self.terms.iter().map(|t| t.sparse.nnz()).sum()
    }
}

/// One diagonal block of a generator that never couples different ancilla
/// basis states: `H_i(t) = s_i(t)·1 + H_sys,i(t)`.
#[derive(Clone, Debug)]
pub struct AncillaBlock {
    /// Scalar part, kept out of the propagation and restored as a phase.
    pub scalar: Vec<Coef>,
    pub system: TdHamiltonian,
}

impl AncillaBlock {
    pub fn scalar_at(&self, t: f64) -> f64 {
        self.scalar.iter().map(|c| c.value(t)).sum()
    }

    /// `∫ s_i(t) dt` over a protocol of length `total`.
    pub fn scalar_integral(&self, total: f64, rel_tol: f64) -> Result<f64> {
        let mut acc = 0.0;
        for c in &self.scalar {
            acc += match c {
                Coef::Const(x) => x * total,
                other => other.integral(rel_tol)?,
            };
        }
        Ok(acc)
    }
}

/// Generator that is block-diagonal in the ancilla basis; block `i` belongs
/// to ancilla basis state `i` of `ancilla`.
#[derive(Clone, Debug)]
pub struct BlockHamiltonian {
    ancilla: SpaceLayout,
    system: SpaceLayout,
    blocks: Vec<AncillaBlock>,
}

impl BlockHamiltonian {
    pub fn new(ancilla: SpaceLayout, blocks: Vec<AncillaBlock>) -> Result<Self> {
        if blocks.len() != ancilla.total_dim() {
            return Err(Error::Dimension(format!(
                "{} blocks for an ancilla space of dimension {}",
                blocks.len(),
                ancilla.total_dim()
            )));
        }
        let system = blocks[0].system.layout().clone();
        if blocks.iter().any(|b| b.system.layout() != &system) {
            return Err(Error::Dimension("all blocks must share the system layout".into()));
        }
        Ok(Self { ancilla, system, blocks })
    }

    pub fn blocks(&self) -> &[AncillaBlock] {
        &self.blocks
    }

    pub fn ancilla_layout(&self) -> &SpaceLayout {
        &self.ancilla
    }

    pub fn system_layout(&self) -> &SpaceLayout {
        &self.system
    }

    pub fn full_layout(&self) -> SpaceLayout {
        self.ancilla.tensor(&self.system)
    }

    /// The same generator on the full space, ancilla slots first.
    pub fn assemble(&self) -> Result<TdHamiltonian> {
        let full = self.full_layout();
        let na = self.ancilla.total_dim();
        let anc_single = SpaceLayout::single(na)?;
        let sys_id = Operator::identity(&self.system);
        let mut out = TdHamiltonian::new(&full);
        for (i, block) in self.blocks.iter().enumerate() {
            let mut proj = Array2::zeros((na, na));
            proj[[i, i]] = C64::new(1.0, 0.0);
            let proj = Operator::new(anc_single.clone(), proj)?;
            let lift = |op: &Operator| proj.kron(op).with_layout(full.clone());
            for c in &block.scalar {
                out.add_term(lift(&sys_id)?, c.clone())?;
            }
            for term in &block.system.terms {
                out.add_term(lift(&term.op)?, term.coef.clone())?;
            }
        }
        Ok(out)
    }

    pub fn at(&self, t: f64) -> Result<Operator> {
        Ok(self.assemble()?.at(t))
    }
}
