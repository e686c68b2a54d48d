use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::params::{Gradients, ParamId, ParamStore};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HingeKind {
    /// `w · [d − margin]₊²`
    Positive,
    /// `w · [margin − d]₊²`
    Negative,
}

/// One squared-hinge term on the Euclidean distance between rows `i` and `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeTerm {
    pub i: usize,
    pub j: usize,
    pub margin: f64,
    pub weight: f64,
    pub kind: HingeKind,
}

#[derive(Debug)]
enum Op<T> {
    Input,
    Param(ParamId),
    Dense { x: Var, w: Var, b: Var },
    Relu(Var),
    MaxPool { x: Var, argmax: Vec<u32> },
    L2Norm { x: Var, norms: Vec<T>, eps: T },
    UnitQuat { x: Var, norms: Vec<T> },
    Dropout { x: Var, mask: Vec<T> },
    Gather { x: Var, idx: Vec<u32> },
    Sub(Var, Var),
    Concat(Var, Var),
    QuatRotate { points: Var, quat: Var },
    SumSquares(Var),
    Dot { x: Var, coeffs: Vec<T> },
    Hinge { x: Var, terms: Vec<HingeTerm> },
}

#[derive(Debug)]
struct Node<T> {
    value: Option<Tensor<T>>,
    /// Unrounded value of a scalar reduction.
    wide: Option<f64>,
    op: Op<T>,
}

/// Records a forward computation for one backward pass.
///
/// Parameters are referenced from the borrowed [`ParamStore`], never copied.
#[derive(Debug)]
pub struct Graph<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
}

/// Raw outputs of the quaternion head below this norm fall back to identity.
pub const QUATERNION_FALLBACK_NORM: f64 = 1e-8;

impl<'p, T: Scalar> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph { params, nodes: Vec::new() }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value: Some(value), wide: None, op });
        Var(self.nodes.len() - 1)
    }

    fn push_scalar(&mut self, s: f64, op: Op<T>) -> Var {
        self.nodes.push(Node { value: Some(Tensor::scalar(T::lit(s))), wide: Some(s), op });
        Var(self.nodes.len() - 1)
    }

    /// First element of `v` as `f64`; reductions report their value before
    /// rounding to `T`.
    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].wide.unwrap_or_else(|| self.value(v).data()[0].as_f64())
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.value(*id),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node { value: None, wide: None, op: Op::Param(id) });
        Var(self.nodes.len() - 1)
    }

    /// `y = x·W + b` over the last axis; `W` is `[c_in, c_out]`, `b` is `[c_out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        if wv.shape().len() != 2 || wv.shape()[0] != xv.cols() || bv.numel() != wv.shape()[1] {
            return Err(Error::ShapeMismatch(alloc::format!(
                "dense: input {:?}, weight {:?}, bias {:?}",
                xv.shape(),
                wv.shape(),
                bv.shape()
            )));
        }
        let (rows, cin, cout) = (xv.rows(), xv.cols(), wv.shape()[1]);
        let mut out = Vec::with_capacity(rows * cout);
        for _ in 0..rows {
            out.extend_from_slice(bv.data());
        }
        T::gemm(rows, cin, cout, T::one(), xv.data(), (cin, 1), wv.data(), (cout, 1), T::one(), &mut out, (cout, 1));
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = cout;
        Ok(self.push(Tensor { shape, data: out }, Op::Dense { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let data = xv.data().iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect();
        let shape = xv.shape().to_vec();
        self.push(Tensor { shape, data }, Op::Relu(x))
    }

    /// Per-channel maximum over the second-to-last (point) axis.
    /// Gradients go to the first index among ties.
    pub fn max_pool_points(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let shape = xv.shape();
        if shape.len() < 2 || shape[shape.len() - 2] == 0 {
            return Err(Error::EmptyAxis);
        }
        let c = xv.cols();
        let p = shape[shape.len() - 2];
        let groups = xv.numel() / (p * c);
        let data = xv.data();
        let mut out = Vec::with_capacity(groups * c);
        let mut argmax = Vec::with_capacity(groups * c);
        for g in 0..groups {
            let base = g * p * c;
            let first = &data[base..base + c];
            let mut best: Vec<T> = first.to_vec();
            let mut arg = vec![0u32; c];
            for k in 1..p {
                let row = &data[base + k * c..base + (k + 1) * c];
                for ch in 0..c {
                    if row[ch] > best[ch] {
                        best[ch] = row[ch];
                        arg[ch] = k as u32;
                    }
                }
            }
            out.extend_from_slice(&best);
            argmax.extend_from_slice(&arg);
        }
        let mut out_shape = shape[..shape.len() - 2].to_vec();
        out_shape.push(c);
        Ok(self.push(Tensor { shape: out_shape, data: out }, Op::MaxPool { x, argmax }))
    }

    /// Row-wise `x / max(‖x‖₂, eps)`.
    pub fn l2_normalize(&mut self, x: Var, eps: f64) -> Var {
        let xv = self.value(x);
        let c = xv.cols();
        let eps_t = T::lit(eps);
        let mut data = Vec::with_capacity(xv.numel());
        let mut norms = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let n = T::lit(row.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt());
            let denom = if n >= eps_t { n } else { eps_t };
            data.extend(row.iter().map(|&v| v / denom));
            norms.push(n);
        }
        debug_assert_eq!(data.len(), xv.rows() * c);
        let shape = xv.shape().to_vec();
        self.push(Tensor { shape, data }, Op::L2Norm { x, norms, eps: eps_t })
    }

    /// Normalises each 4-vector row to a unit quaternion `(w, x, y, z)`; rows
    /// with norm below [`QUATERNION_FALLBACK_NORM`] become the identity.
    pub fn unit_quaternion(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.cols() != 4 {
            return Err(Error::ShapeMismatch(alloc::format!("quaternion rows need 4 values, got {:?}", xv.shape())));
        }
        let mut data = Vec::with_capacity(xv.numel());
        let mut norms = Vec::with_capacity(xv.rows());
        for r in 0..xv.rows() {
            let row = xv.row(r);
            let n = row.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>().sqrt();
            if n < QUATERNION_FALLBACK_NORM {
                data.extend([T::one(), T::zero(), T::zero(), T::zero()]);
                norms.push(T::zero());
            } else {
                let nt = T::lit(n);
                data.extend(row.iter().map(|&v| v / nt));
                norms.push(nt);
            }
        }
        let shape = xv.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::UnitQuat { x, norms }))
    }

    /// Inverted dropout: in training each element is zeroed with probability
    /// `p` and survivors are scaled by `1/(1−p)`. Identity otherwise.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Var {
        if !training || p == 0.0 {
            return x;
        }
        let xv = self.value(x);
        let scale = T::lit(1.0 / (1.0 - p));
        let mask: Vec<T> = (0..xv.numel()).map(|_| if rng.random::<f64>() < p { T::zero() } else { scale }).collect();
        let data = xv.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let shape = xv.shape().to_vec();
        self.push(Tensor { shape, data }, Op::Dropout { x, mask })
    }

    /// Selects rows of `x` (leading axes flattened). `lead` gives the leading
    /// axes of the output and must multiply to `idx.len()`.
    pub fn gather_rows(&mut self, x: Var, idx: Vec<u32>, lead: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        let (rows, c) = (xv.rows(), xv.cols());
        if lead.iter().product::<usize>() != idx.len() || idx.iter().any(|&i| i as usize >= rows) {
            return Err(Error::ShapeMismatch(alloc::format!(
                "gather of {} rows into {lead:?} from {rows} rows",
                idx.len()
            )));
        }
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in &idx {
            data.extend_from_slice(xv.row(i as usize));
        }
        let mut shape = lead.to_vec();
        shape.push(c);
        Ok(self.push(Tensor { shape, data }, Op::Gather { x, idx }))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::ShapeMismatch(alloc::format!("sub {:?} - {:?}", av.shape(), bv.shape())));
        }
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| x - y).collect();
        let shape = av.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::Sub(a, b)))
    }

    /// Concatenation along the last axis.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (sa, sb) = (av.shape(), bv.shape());
        if sa.len() != sb.len() || sa[..sa.len() - 1] != sb[..sb.len() - 1] {
            return Err(Error::ShapeMismatch(alloc::format!("concat {sa:?} with {sb:?}")));
        }
        let (ca, cb) = (av.cols(), bv.cols());
        let mut data = Vec::with_capacity(av.numel() + bv.numel());
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let mut shape = sa.to_vec();
        *shape.last_mut().unwrap() = ca + cb;
        Ok(self.push(Tensor { shape, data }, Op::Concat(a, b)))
    }

    /// Rotates the 3-vectors of `points` (`[B, n, 3]`, or any shape whose
    /// rows split evenly into `B` groups) by the unit quaternion of their group
    /// in `quat` (`[B, 4]`).
    pub fn quat_rotate(&mut self, points: Var, quat: Var) -> Result<Var> {
        let (pv, qv) = (self.value(points), self.value(quat));
        let groups = qv.rows();
        if pv.cols() != 3 || qv.cols() != 4 || groups == 0 || pv.rows() % groups != 0 {
            return Err(Error::ShapeMismatch(alloc::format!(
                "quat_rotate points {:?} by {:?}",
                pv.shape(),
                qv.shape()
            )));
        }
        let per = pv.rows() / groups;
        let mut data = Vec::with_capacity(pv.numel());
        for g in 0..groups {
            let r = quat_matrix(qv.row(g));
            for k in 0..per {
                let p = pv.row(g * per + k);
                for row in &r {
                    data.push(row[0] * p[0] + row[1] * p[1] + row[2] * p[2]);
                }
            }
        }
        let shape = pv.shape().to_vec();
        Ok(self.push(Tensor { shape, data }, Op::QuatRotate { points, quat }))
    }

    /// Scalar `Σ x²`.
    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s: f64 = self.value(x).data().iter().map(|v| v.as_f64() * v.as_f64()).sum();
        self.push_scalar(s, Op::SumSquares(x))
    }

    /// Scalar `Σ cᵢ xᵢ` with constant coefficients.
    pub fn dot_const(&mut self, x: Var, coeffs: Vec<T>) -> Result<Var> {
        let xv = self.value(x);
        if coeffs.len() != xv.numel() {
            return Err(Error::ShapeMismatch(alloc::format!("{} coefficients for {:?}", coeffs.len(), xv.shape())));
        }
        let s: f64 = xv.data().iter().zip(&coeffs).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
        Ok(self.push_scalar(s, Op::Dot { x, coeffs }))
    }

    /// Scalar sum of squared hinges on row distances of `x`.
    pub fn hinge_loss(&mut self, x: Var, terms: Vec<HingeTerm>) -> Result<Var> {
        let xv = self.value(x);
        if terms.iter().any(|t| t.i >= xv.rows() || t.j >= xv.rows()) {
            return Err(Error::ShapeMismatch("hinge term refers to a missing row".into()));
        }
        let total: f64 = terms
            .iter()
            .map(|t| {
                let d = row_distance(xv.row(t.i), xv.row(t.j));
                let h = hinge(t, d);
                t.weight * h * h
            })
            .sum();
        Ok(self.push_scalar(total, Op::Hinge { x, terms }))
    }

    /// Reverse pass from the scalar `loss`; returns per-parameter gradients.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::ShapeMismatch(alloc::format!(
                "backward needs a scalar, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);
        let mut per_param: Vec<Option<Vec<T>>> = (0..self.params.len()).map(|_| None).collect();

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(id) => add_into(&mut per_param[id.0], &g),
                Op::Dense { x, w, b } => {
                    let (xv, wv) = (self.value(*x), self.value(*w));
                    let (rows, cin, cout) = (xv.rows(), xv.cols(), wv.shape()[1]);
                    let gx = slot(&mut grads, *x, rows * cin);
                    T::gemm(rows, cout, cin, T::one(), &g, (cout, 1), wv.data(), (1, cout), T::one(), gx, (cin, 1));
                    let gw = slot(&mut grads, *w, cin * cout);
                    T::gemm(cin, rows, cout, T::one(), xv.data(), (1, cin), &g, (cout, 1), T::one(), gw, (cout, 1));
                    let gb = slot(&mut grads, *b, cout);
                    for r in 0..rows {
                        gb.iter_mut().zip(&g[r * cout..(r + 1) * cout]).for_each(|(a, &v)| *a += v);
                    }
                }
                Op::Relu(x) => {
                    let y = self.nodes[i].value.as_ref().unwrap().data();
                    let gx = slot(&mut grads, *x, y.len());
                    for ((a, &v), &yv) in gx.iter_mut().zip(&g).zip(y) {
                        if yv > T::zero() {
                            *a += v;
                        }
                    }
                }
                Op::MaxPool { x, argmax } => {
                    let xv = self.value(*x);
                    let shape = xv.shape();
                    let (p, c) = (shape[shape.len() - 2], xv.cols());
                    let gx = slot(&mut grads, *x, xv.numel());
                    for (o, (&v, &k)) in g.iter().zip(argmax).enumerate() {
                        let (grp, ch) = (o / c, o % c);
                        gx[grp * p * c + k as usize * c + ch] += v;
                    }
                }
                Op::L2Norm { x, norms, eps } => {
                    let y = self.nodes[i].value.as_ref().unwrap();
                    let c = y.cols();
                    let gx = slot(&mut grads, *x, y.numel());
                    for (r, &n) in norms.iter().enumerate() {
                        let (yr, gr) = (&y.data()[r * c..(r + 1) * c], &g[r * c..(r + 1) * c]);
                        let out = &mut gx[r * c..(r + 1) * c];
                        if n >= *eps {
                            let proj: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                            for k in 0..c {
                                out[k] += (gr[k] - yr[k] * proj) / n;
                            }
                        } else {
                            for k in 0..c {
                                out[k] += gr[k] / *eps;
                            }
                        }
                    }
                }
                Op::UnitQuat { x, norms } => {
                    let y = self.nodes[i].value.as_ref().unwrap();
                    let gx = slot(&mut grads, *x, y.numel());
                    for (r, &n) in norms.iter().enumerate() {
                        if n == T::zero() {
                            continue;
                        }
                        let (yr, gr) = (&y.data()[r * 4..r * 4 + 4], &g[r * 4..r * 4 + 4]);
                        let proj: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
                        for k in 0..4 {
                            gx[r * 4 + k] += (gr[k] - yr[k] * proj) / n;
                        }
                    }
                }
                Op::Dropout { x, mask } => {
                    let gx = slot(&mut grads, *x, mask.len());
                    for ((a, &v), &m) in gx.iter_mut().zip(&g).zip(mask) {
                        *a += v * m;
                    }
                }
                Op::Gather { x, idx } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let gx = slot(&mut grads, *x, xv.numel());
                    for (o, &src) in idx.iter().enumerate() {
                        let src = src as usize;
                        for k in 0..c {
                            gx[src * c + k] += g[o * c + k];
                        }
                    }
                }
                Op::Sub(a, b) => {
                    let n = g.len();
                    let ga = slot(&mut grads, *a, n);
                    ga.iter_mut().zip(&g).for_each(|(x, &v)| *x += v);
                    let gb = slot(&mut grads, *b, n);
                    gb.iter_mut().zip(&g).for_each(|(x, &v)| *x -= v);
                }
                Op::Concat(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (rows, ca, cb) = (av.rows(), av.cols(), bv.cols());
                    let ga = slot(&mut grads, *a, rows * ca);
                    for r in 0..rows {
                        let src = &g[r * (ca + cb)..r * (ca + cb) + ca];
                        ga[r * ca..(r + 1) * ca].iter_mut().zip(src).for_each(|(x, &v)| *x += v);
                    }
                    let gb = slot(&mut grads, *b, rows * cb);
                    for r in 0..rows {
                        let src = &g[r * (ca + cb) + ca..(r + 1) * (ca + cb)];
                        gb[r * cb..(r + 1) * cb].iter_mut().zip(src).for_each(|(x, &v)| *x += v);
                    }
                }
                Op::QuatRotate { points, quat } => {
                    let (pv, qv) = (self.value(*points), self.value(*quat));
                    let groups = qv.rows();
                    let per = pv.rows() / groups;
                    let mut gq = vec![T::zero(); groups * 4];
                    {
                        let gp = slot(&mut grads, *points, pv.numel());
                        for grp in 0..groups {
                            let q = qv.row(grp);
                            let r = quat_matrix(q);
                            // G = Σ g·pᵀ over the group; dℓ/dq_k = ⟨G, ∂R/∂q_k⟩.
                            let mut outer = [[T::zero(); 3]; 3];
                            for k in 0..per {
                                let row = grp * per + k;
                                let p = pv.row(row);
                                let gr = &g[row * 3..row * 3 + 3];
                                for a in 0..3 {
                                    for bcol in 0..3 {
                                        outer[a][bcol] += gr[a] * p[bcol];
                                    }
                                    // Rᵀ·g
                                    gp[row * 3 + a] += r[0][a] * gr[0] + r[1][a] * gr[1] + r[2][a] * gr[2];
                                }
                            }
                            for (k, d) in quat_matrix_derivatives(q).iter().enumerate() {
                                let mut s = T::zero();
                                for a in 0..3 {
                                    for bcol in 0..3 {
                                        s += outer[a][bcol] * d[a][bcol];
                                    }
                                }
                                gq[grp * 4 + k] = s;
                            }
                        }
                    }
                    let gqs = slot(&mut grads, *quat, groups * 4);
                    gqs.iter_mut().zip(&gq).for_each(|(a, &v)| *a += v);
                }
                Op::SumSquares(x) => {
                    let xv = self.value(*x);
                    let two = T::lit(2.0);
                    let gx = slot(&mut grads, *x, xv.numel());
                    gx.iter_mut().zip(xv.data()).for_each(|(a, &v)| *a += two * v * g[0]);
                }
                Op::Dot { x, coeffs } => {
                    let gx = slot(&mut grads, *x, coeffs.len());
                    gx.iter_mut().zip(coeffs).for_each(|(a, &c)| *a += c * g[0]);
                }
                Op::Hinge { x, terms } => {
                    let xv = self.value(*x);
                    let c = xv.cols();
                    let gx = slot(&mut grads, *x, xv.numel());
                    let upstream = g[0].as_f64();
                    for t in terms {
                        let (ri, rj) = (xv.row(t.i), xv.row(t.j));
                        let d = row_distance(ri, rj);
                        let h = hinge(t, d);
                        if h <= 0.0 || d == 0.0 {
                            continue;
                        }
                        let sign = match t.kind {
                            HingeKind::Positive => 1.0,
                            HingeKind::Negative => -1.0,
                        };
                        let dd = upstream * t.weight * 2.0 * h * sign / d;
                        for k in 0..c {
                            let diff = ri[k].as_f64() - rj[k].as_f64();
                            gx[t.i * c + k] += T::lit(dd * diff);
                            gx[t.j * c + k] -= T::lit(dd * diff);
                        }
                    }
                }
            }
        }
        Ok(Gradients { per_param })
    }
}

fn slot<T: Scalar>(grads: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut [T] {
    grads[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

fn add_into<T: Scalar>(dst: &mut Option<Vec<T>>, g: &[T]) {
    match dst {
        Some(d) => d.iter_mut().zip(g).for_each(|(a, &b)| *a += b),
        None => *dst = Some(g.to_vec()),
    }
}

fn row_distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.as_f64() - y.as_f64()).powi(2)).sum::<f64>().sqrt()
}

fn hinge(t: &HingeTerm, d: f64) -> f64 {
    let h = match t.kind {
        HingeKind::Positive => d - t.margin,
        HingeKind::Negative => t.margin - d,
    };
    h.max(0.0)
}

fn quat_matrix<T: Scalar>(q: &[T]) -> [[T; 3]; 3] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let one = T::one();
    let two = T::lit(2.0);
    [
        [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
        [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
        [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
    ]
}

/// `∂R/∂w, ∂R/∂x, ∂R/∂y, ∂R/∂z` of [`quat_matrix`].
fn quat_matrix_derivatives<T: Scalar>(q: &[T]) -> [[[T; 3]; 3]; 4] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let two = T::lit(2.0);
    let zero = T::zero();
    let s = |m: [[T; 3]; 3]| m.map(|r| r.map(|v| two * v));
    [
        s([[zero, -z, y], [z, zero, -x], [-y, x, zero]]),
        s([[zero, y, z], [y, -two * x, -w], [z, w, -two * x]]),
        s([[-two * y, x, w], [x, zero, z], [-w, z, -two * y]]),
        s([[-two * z, -w, x], [w, -two * z, y], [x, y, zero]]),
    ]
}
