//! Reverse-mode autodiff over a tape of rank-2 tensors.
//!
//! A [`Tape`] records every forward operation; calling [`Var::backward`] on a
//! scalar node walks the tape in reverse and accumulates gradients for every
//! node that requires them. Tapes are cheap and rebuilt per training step.

use std::cell::RefCell;
use std::rc::Rc;

use rand::Rng;

use crate::tensor::{BoolMat, Tensor};

type BackFn = Box<dyn Fn(&Tensor) -> Vec<Tensor>>;

struct Node {
    value: Rc<Tensor>,
    parents: Vec<usize>,
    backward: Option<BackFn>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl Tape {
    pub fn new() -> Rc<Tape> {
        Rc::new(Tape::default())
    }

    pub fn len(self: &Rc<Tape>) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(self: &Rc<Tape>) -> bool {
        self.nodes.borrow().is_empty()
    }

    /// Trainable leaf.
    pub fn leaf(self: &Rc<Tape>, value: Tensor) -> Var {
        self.push(value, vec![], None, true)
    }

    /// Non-trainable constant.
    pub fn constant(self: &Rc<Tape>, value: Tensor) -> Var {
        self.push(value, vec![], None, false)
    }

    fn push(
        self: &Rc<Tape>,
        value: Tensor,
        parents: Vec<usize>,
        backward: Option<BackFn>,
        requires_grad: bool,
    ) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            parents,
            backward,
            requires_grad,
        });
        Var {
            tape: Rc::clone(self),
            idx: nodes.len() - 1,
        }
    }
}

#[derive(Clone)]
pub struct Var {
    tape: Rc<Tape>,
    idx: usize,
}

impl std::fmt::Debug for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("idx", &self.idx)
            .field("shape", &self.shape())
            .finish()
    }
}

/// Gradients produced by a backward pass, indexed by tape position.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, var: &Var) -> Option<&Tensor> {
        self.grads.get(var.idx).and_then(|g| g.as_ref())
    }
}

impl Var {
    pub fn value(&self) -> Rc<Tensor> {
        Rc::clone(&self.tape.nodes.borrow()[self.idx].value)
    }

    pub fn shape(&self) -> [usize; 2] {
        self.value().shape()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.idx].requires_grad
    }

    pub fn tape(&self) -> &Rc<Tape> {
        &self.tape
    }

    fn unary(
        &self,
        value: Tensor,
        backward: impl Fn(&Tensor) -> Vec<Tensor> + 'static,
    ) -> Var {
        let req = self.requires_grad();
        self.tape.push(
            value,
            vec![self.idx],
            if req { Some(Box::new(backward)) } else { None },
            req,
        )
    }

    fn binary(
        &self,
        other: &Var,
        value: Tensor,
        backward: impl Fn(&Tensor) -> Vec<Tensor> + 'static,
    ) -> Var {
        assert!(
            Rc::ptr_eq(&self.tape, &other.tape),
            "vars from different tapes"
        );
        let req = self.requires_grad() || other.requires_grad();
        self.tape.push(
            value,
            vec![self.idx, other.idx],
            if req { Some(Box::new(backward)) } else { None },
            req,
        )
    }

    // ---- elementwise / arithmetic -------------------------------------

    pub fn add(&self, other: &Var) -> Var {
        let a = self.value();
        let b = other.value();
        assert!(a.same_shape(&b), "add: {:?} vs {:?}", a.shape(), b.shape());
        self.binary(other, a.add(&b), |g| vec![g.clone(), g.clone()])
    }

    pub fn sub(&self, other: &Var) -> Var {
        let a = self.value();
        let b = other.value();
        assert!(a.same_shape(&b), "sub: {:?} vs {:?}", a.shape(), b.shape());
        self.binary(other, a.sub(&b), |g| vec![g.clone(), g.scale(-1.0)])
    }

    pub fn mul(&self, other: &Var) -> Var {
        let a = self.value();
        let b = other.value();
        assert!(a.same_shape(&b), "mul: {:?} vs {:?}", a.shape(), b.shape());
        let out = a.mul(&b);
        self.binary(other, out, move |g| vec![g.mul(&b), g.mul(&a)])
    }

    pub fn neg(&self) -> Var {
        let a = self.value();
        self.unary(a.scale(-1.0), |g| vec![g.scale(-1.0)])
    }

    pub fn scale(&self, c: f64) -> Var {
        let a = self.value();
        self.unary(a.scale(c), move |g| vec![g.scale(c)])
    }

    /// Broadcast-add a single row `b` [1,d] to every row of `self` [n,d].
    pub fn add_row(&self, b: &Var) -> Var {
        let a = self.value();
        let bv = b.value();
        assert_eq!(bv.rows(), 1, "add_row: bias must be a single row");
        assert_eq!(a.cols(), bv.cols(), "add_row: col mismatch");
        let out = Tensor::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j) + bv.get(0, j));
        self.binary(b, out, move |g| {
            let mut gb = Tensor::zeros(1, g.cols());
            for i in 0..g.rows() {
                for j in 0..g.cols() {
                    gb.set(0, j, gb.get(0, j) + g.get(i, j));
                }
            }
            vec![g.clone(), gb]
        })
    }

    /// Multiply every element by a scalar variable [1,1].
    pub fn mul_scalar(&self, s: &Var) -> Var {
        let a = self.value();
        let sv = s.value();
        assert!(sv.is_scalar(), "mul_scalar: rhs must be [1,1]");
        let c = sv.item();
        let a2 = Rc::clone(&a);
        let out = a.scale(c);
        self.binary(s, out, move |g| {
            let gs = g
                .data()
                .iter()
                .zip(a2.data().iter())
                .map(|(gi, ai)| gi * ai)
                .sum();
            vec![g.scale(c), Tensor::scalar(gs)]
        })
    }

    // ---- matrix ops ----------------------------------------------------

    pub fn matmul(&self, other: &Var) -> Var {
        let a = self.value();
        let b = other.value();
        assert_eq!(
            a.cols(),
            b.rows(),
            "matmul: {:?} x {:?}",
            a.shape(),
            b.shape()
        );
        let out = a.matmul(&b);
        self.binary(other, out, move |g| {
            vec![g.matmul(&b.transpose()), a.transpose().matmul(g)]
        })
    }

    pub fn transpose(&self) -> Var {
        let a = self.value();
        self.unary(a.transpose(), |g| vec![g.transpose()])
    }

    // ---- reductions ----------------------------------------------------

    pub fn sum(&self) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        self.unary(Tensor::scalar(a.sum()), move |g| {
            vec![Tensor::filled(r, c, g.item())]
        })
    }

    pub fn mean(&self) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        let n = (r * c) as f64;
        self.unary(Tensor::scalar(a.sum() / n), move |g| {
            vec![Tensor::filled(r, c, g.item() / n)]
        })
    }

    /// Mean over rows: [n,d] -> [1,d].
    pub fn mean_rows(&self) -> Var {
        let a = self.value();
        let (r, c) = (a.rows(), a.cols());
        assert!(r > 0, "mean_rows on empty tensor");
        let mut out = Tensor::zeros(1, c);
        for i in 0..r {
            for j in 0..c {
                out.set(0, j, out.get(0, j) + a.get(i, j) / r as f64);
            }
        }
        self.unary(out, move |g| {
            vec![Tensor::from_fn(r, c, |_, j| g.get(0, j) / r as f64)]
        })
    }

    // ---- slicing / concatenation ----------------------------------------

    pub fn slice_rows(&self, start: usize, end: usize) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        assert!(start <= end && end <= r, "slice_rows out of range");
        let out = Tensor::from_fn(end - start, c, |i, j| a.get(start + i, j));
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(r, c);
            for i in 0..g.rows() {
                for j in 0..c {
                    gp.set(start + i, j, g.get(i, j));
                }
            }
            vec![gp]
        })
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        assert!(start <= end && end <= c, "slice_cols out of range");
        let out = Tensor::from_fn(r, end - start, |i, j| a.get(i, start + j));
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(r, c);
            for i in 0..r {
                for j in 0..g.cols() {
                    gp.set(i, start + j, g.get(i, j));
                }
            }
            vec![gp]
        })
    }

    pub fn concat_rows(parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_rows of nothing");
        let tape = Rc::clone(&parts[0].tape);
        let vals: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let c = vals[0].cols();
        let total: usize = vals.iter().map(|v| v.rows()).sum();
        let mut out = Tensor::zeros(total, c);
        let mut off = 0;
        for v in &vals {
            assert_eq!(v.cols(), c, "concat_rows: col mismatch");
            for i in 0..v.rows() {
                for j in 0..c {
                    out.set(off + i, j, v.get(i, j));
                }
            }
            off += v.rows();
        }
        let parents: Vec<usize> = parts.iter().map(|p| p.idx).collect();
        let req = parts.iter().any(|p| p.requires_grad());
        let row_counts: Vec<usize> = vals.iter().map(|v| v.rows()).collect();
        let back: BackFn = Box::new(move |g| {
            let mut grads = Vec::with_capacity(row_counts.len());
            let mut off = 0;
            for &rc in &row_counts {
                grads.push(Tensor::from_fn(rc, g.cols(), |i, j| g.get(off + i, j)));
                off += rc;
            }
            grads
        });
        tape.push(out, parents, if req { Some(back) } else { None }, req)
    }

    pub fn concat_cols(parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let tape = Rc::clone(&parts[0].tape);
        let vals: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let r = vals[0].rows();
        let total: usize = vals.iter().map(|v| v.cols()).sum();
        let mut out = Tensor::zeros(r, total);
        let mut off = 0;
        for v in &vals {
            assert_eq!(v.rows(), r, "concat_cols: row mismatch");
            for i in 0..r {
                for j in 0..v.cols() {
                    out.set(i, off + j, v.get(i, j));
                }
            }
            off += v.cols();
        }
        let parents: Vec<usize> = parts.iter().map(|p| p.idx).collect();
        let req = parts.iter().any(|p| p.requires_grad());
        let col_counts: Vec<usize> = vals.iter().map(|v| v.cols()).collect();
        let back: BackFn = Box::new(move |g| {
            let mut grads = Vec::with_capacity(col_counts.len());
            let mut off = 0;
            for &cc in &col_counts {
                grads.push(Tensor::from_fn(g.rows(), cc, |i, j| g.get(i, off + j)));
                off += cc;
            }
            grads
        });
        tape.push(out, parents, if req { Some(back) } else { None }, req)
    }

    /// [n,1] broadcast across `cols` columns.
    pub fn broadcast_col(&self, cols: usize) -> Var {
        let a = self.value();
        assert_eq!(a.cols(), 1, "broadcast_col expects [n,1]");
        let r = a.rows();
        let out = Tensor::from_fn(r, cols, |i, _| a.get(i, 0));
        self.unary(out, move |g| {
            vec![Tensor::from_fn(r, 1, |i, _| g.row_slice(i).iter().sum())]
        })
    }

    /// [1,m] broadcast across `rows` rows.
    pub fn broadcast_row(&self, rows: usize) -> Var {
        let a = self.value();
        assert_eq!(a.rows(), 1, "broadcast_row expects [1,m]");
        let m = a.cols();
        let out = Tensor::from_fn(rows, m, |_, j| a.get(0, j));
        self.unary(out, move |g| {
            vec![Tensor::from_fn(1, m, |_, j| {
                (0..g.rows()).map(|i| g.get(i, j)).sum()
            })]
        })
    }

    /// Select rows by index (embedding lookup / gather). Repeats allowed.
    pub fn gather_rows(&self, indices: &[usize]) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        for &ix in indices {
            assert!(ix < r, "gather_rows: index {ix} out of {r}");
        }
        let idx = indices.to_vec();
        let out = Tensor::from_fn(idx.len(), c, |i, j| a.get(idx[i], j));
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(r, c);
            for (i, &ix) in idx.iter().enumerate() {
                for j in 0..c {
                    gp.set(ix, j, gp.get(ix, j) + g.get(i, j));
                }
            }
            vec![gp]
        })
    }

    /// Pick one column per row: [n,m] with cols[i] -> [n,1].
    pub fn pick_cols(&self, cols: &[usize]) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        assert_eq!(cols.len(), r, "pick_cols: one index per row");
        for &j in cols {
            assert!(j < c, "pick_cols: col {j} out of {c}");
        }
        let idx = cols.to_vec();
        let out = Tensor::from_fn(r, 1, |i, _| a.get(i, idx[i]));
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(r, c);
            for (i, &j) in idx.iter().enumerate() {
                gp.set(i, j, g.get(i, 0));
            }
            vec![gp]
        })
    }

    /// Build a [r,c] matrix from a parameter row vector [1,n] by index table.
    /// Used for learnable relative-position biases.
    pub fn gather_matrix(&self, index: &[Vec<usize>]) -> Var {
        let a = self.value();
        assert_eq!(a.rows(), 1, "gather_matrix expects a row vector");
        let n = a.cols();
        let r = index.len();
        let c = if r == 0 { 0 } else { index[0].len() };
        for row in index {
            assert_eq!(row.len(), c, "gather_matrix: ragged index");
            for &ix in row {
                assert!(ix < n, "gather_matrix: index {ix} out of {n}");
            }
        }
        let idx: Vec<Vec<usize>> = index.to_vec();
        let out = Tensor::from_fn(r, c, |i, j| a.get(0, idx[i][j]));
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(1, n);
            for i in 0..g.rows() {
                for j in 0..g.cols() {
                    let ix = idx[i][j];
                    gp.set(0, ix, gp.get(0, ix) + g.get(i, j));
                }
            }
            vec![gp]
        })
    }

    // ---- nonlinearities --------------------------------------------------

    pub fn relu(&self) -> Var {
        let a = self.value();
        let out = a.map(|v| v.max(0.0));
        self.unary(out, move |g| {
            vec![g.zip_map(&a, |gi, xi| if xi > 0.0 { gi } else { 0.0 })]
        })
    }

    pub fn leaky_relu(&self, slope: f64) -> Var {
        let a = self.value();
        let out = a.map(|v| if v > 0.0 { v } else { slope * v });
        self.unary(out, move |g| {
            vec![g.zip_map(&a, |gi, xi| if xi > 0.0 { gi } else { slope * gi })]
        })
    }

    pub fn elu(&self) -> Var {
        let a = self.value();
        let out = a.map(|v| if v > 0.0 { v } else { v.exp_m1() });
        let o2 = out.clone();
        self.unary(out, move |g| {
            let mut gp = g.clone();
            for (i, gi) in gp.data_mut().iter_mut().enumerate() {
                let x = a.data()[i];
                if x <= 0.0 {
                    *gi *= o2.data()[i] + 1.0;
                }
            }
            vec![gp]
        })
    }

    pub fn softplus(&self) -> Var {
        let a = self.value();
        let out = a.map(|v| v.max(0.0) + (-v.abs()).exp().ln_1p());
        self.unary(out, move |g| {
            vec![g.zip_map(&a, |gi, xi| gi / (1.0 + (-xi).exp()))]
        })
    }

    pub fn exp(&self) -> Var {
        let a = self.value();
        let out = a.map(f64::exp);
        let o2 = out.clone();
        self.unary(out, move |g| vec![g.mul(&o2)])
    }

    pub fn abs(&self) -> Var {
        let a = self.value();
        let out = a.map(f64::abs);
        self.unary(out, move |g| {
            vec![g.zip_map(&a, |gi, xi| gi * xi.signum() * if xi == 0.0 { 0.0 } else { 1.0 })]
        })
    }

    // ---- normalization / softmax -----------------------------------------

    /// Row-wise softmax over positions where `mask` is true (or all, if None).
    /// Masked positions are exactly zero in the output.
    /// Panics on a fully masked row; use `layers::masked_softmax` for the
    /// checked variant.
    pub fn softmax_masked(&self, mask: Option<&BoolMat>) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        if let Some(m) = mask {
            assert_eq!([m.rows(), m.cols()], [r, c], "softmax mask shape");
        }
        let mut out = Tensor::zeros(r, c);
        for i in 0..r {
            let valid = |j: usize| mask.map_or(true, |m| m.get(i, j));
            let mx = (0..c)
                .filter(|&j| valid(j))
                .map(|j| a.get(i, j))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(mx.is_finite(), "softmax row {i} fully masked");
            let mut z = 0.0;
            for j in 0..c {
                if valid(j) {
                    let e = (a.get(i, j) - mx).exp();
                    out.set(i, j, e);
                    z += e;
                }
            }
            for j in 0..c {
                if valid(j) {
                    out.set(i, j, out.get(i, j) / z);
                }
            }
        }
        let y = out.clone();
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(r, c);
            for i in 0..r {
                let dot: f64 = (0..c).map(|j| g.get(i, j) * y.get(i, j)).sum();
                for j in 0..c {
                    gp.set(i, j, y.get(i, j) * (g.get(i, j) - dot));
                }
            }
            vec![gp]
        })
    }

    /// Row-wise log-softmax (no mask).
    pub fn log_softmax(&self) -> Var {
        let a = self.value();
        let [r, c] = a.shape();
        let mut out = Tensor::zeros(r, c);
        for i in 0..r {
            let mx = a.row_slice(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = a.row_slice(i).iter().map(|v| (v - mx).exp()).sum();
            let lz = mx + z.ln();
            for j in 0..c {
                out.set(i, j, a.get(i, j) - lz);
            }
        }
        let lp = out.clone();
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(r, c);
            for i in 0..r {
                let gsum: f64 = g.row_slice(i).iter().sum();
                for j in 0..c {
                    gp.set(i, j, g.get(i, j) - lp.get(i, j).exp() * gsum);
                }
            }
            vec![gp]
        })
    }

    /// Row-wise layer norm with learnable gain and bias ([1,d] each).
    pub fn layer_norm(&self, gain: &Var, bias: &Var, eps: f64) -> Var {
        let x = self.value();
        let gv = gain.value();
        let bv = bias.value();
        let [r, c] = x.shape();
        assert_eq!([gv.rows(), gv.cols()], [1, c], "layer_norm gain shape");
        assert_eq!([bv.rows(), bv.cols()], [1, c], "layer_norm bias shape");
        let mut xhat = Tensor::zeros(r, c);
        let mut inv_std = vec![0.0; r];
        for i in 0..r {
            let row = x.row_slice(i);
            let mu: f64 = row.iter().sum::<f64>() / c as f64;
            let var: f64 = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / c as f64;
            let istd = 1.0 / (var + eps).sqrt();
            inv_std[i] = istd;
            for j in 0..c {
                xhat.set(i, j, (x.get(i, j) - mu) * istd);
            }
        }
        let out = Tensor::from_fn(r, c, |i, j| xhat.get(i, j) * gv.get(0, j) + bv.get(0, j));
        let req = self.requires_grad() || gain.requires_grad() || bias.requires_grad();
        let gv2 = Rc::new(gv.clone());
        let xhat2 = Rc::new(xhat);
        let inv2 = Rc::new(inv_std);
        let back: BackFn = Box::new(move |g| {
            let mut gx = Tensor::zeros(r, c);
            let mut ggain = Tensor::zeros(1, c);
            let mut gbias = Tensor::zeros(1, c);
            for i in 0..r {
                // dl/dxhat = g * gain
                let dxh: Vec<f64> = (0..c).map(|j| g.get(i, j) * gv2.get(0, j)).collect();
                let m1: f64 = dxh.iter().sum::<f64>() / c as f64;
                let m2: f64 = (0..c)
                    .map(|j| dxh[j] * xhat2.get(i, j))
                    .sum::<f64>()
                    / c as f64;
                for j in 0..c {
                    gx.set(i, j, inv2[i] * (dxh[j] - m1 - xhat2.get(i, j) * m2));
                    ggain.set(0, j, ggain.get(0, j) + g.get(i, j) * xhat2.get(i, j));
                    gbias.set(0, j, gbias.get(0, j) + g.get(i, j));
                }
            }
            vec![gx, ggain, gbias]
        });
        self.tape.push(
            out,
            vec![self.idx, gain.idx, bias.idx],
            if req { Some(back) } else { None },
            req,
        )
    }

    /// Row-wise L2 normalization.
    pub fn l2_normalize_rows(&self, eps: f64) -> Var {
        let x = self.value();
        let [r, c] = x.shape();
        let mut norms = vec![0.0; r];
        let mut out = Tensor::zeros(r, c);
        for i in 0..r {
            let n = x.row_slice(i).iter().map(|v| v * v).sum::<f64>().sqrt().max(eps);
            norms[i] = n;
            for j in 0..c {
                out.set(i, j, x.get(i, j) / n);
            }
        }
        let y = Rc::new(out.clone());
        let norms = Rc::new(norms);
        self.unary(out, move |g| {
            let mut gp = Tensor::zeros(r, c);
            for i in 0..r {
                let dot: f64 = (0..c).map(|j| g.get(i, j) * y.get(i, j)).sum();
                for j in 0..c {
                    gp.set(i, j, (g.get(i, j) - y.get(i, j) * dot) / norms[i]);
                }
            }
            vec![gp]
        })
    }

    /// Inverted dropout. Identity in eval mode.
    pub fn dropout(&self, p: f64, train: bool, rng: &mut impl Rng) -> Var {
        if !train || p == 0.0 {
            return self.clone();
        }
        assert!((0.0..1.0).contains(&p), "dropout rate must be in [0,1)");
        let x = self.value();
        let keep = 1.0 - p;
        let mask = Tensor::from_fn(x.rows(), x.cols(), |_, _| {
            if rng.gen::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        });
        let out = x.mul(&mask);
        self.unary(out, move |g| vec![g.mul(&mask)])
    }

    // ---- backward ---------------------------------------------------------

    /// Backpropagate from this scalar node. Returns per-node gradients.
    pub fn backward(&self) -> Gradients {
        let nodes = self.tape.nodes.borrow();
        assert!(
            nodes[self.idx].value.is_scalar(),
            "backward() requires a scalar loss"
        );
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        grads[self.idx] = Some(Tensor::scalar(1.0));
        for i in (0..=self.idx).rev() {
            if grads[i].is_none() {
                continue;
            }
            let node = &nodes[i];
            if let Some(back) = &node.backward {
                let g = grads[i].clone().unwrap();
                let pgrads = back(&g);
                assert_eq!(pgrads.len(), node.parents.len());
                for (&p, pg) in node.parents.iter().zip(pgrads.into_iter()) {
                    if !nodes[p].requires_grad && nodes[p].backward.is_none() {
                        continue;
                    }
                    match &mut grads[p] {
                        Some(acc) => acc.add_assign(&pg),
                        slot => *slot = Some(pg),
                    }
                }
            }
        }
        Gradients { grads }
    }
}
