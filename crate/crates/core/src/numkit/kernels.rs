use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tape::{softmax_rows_value, NodeId, Tape};
use super::NumError;

/// Gated recurrent unit parameters (update gate z, reset gate r, candidate h̃).
/// Input weights `w*` are d×d_in, recurrent weights `u*` are d×d, biases 1×d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub wz: Matrix,
    pub uz: Matrix,
    pub bz: Matrix,
    pub wr: Matrix,
    pub ur: Matrix,
    pub br: Matrix,
    pub wh: Matrix,
    pub uh: Matrix,
    pub bh: Matrix,
}

impl GruParams {
    pub fn zeros(d_in: usize, d: usize) -> Self {
        GruParams {
            wz: Matrix::zeros(d, d_in),
            uz: Matrix::zeros(d, d),
            bz: Matrix::zeros(1, d),
            wr: Matrix::zeros(d, d_in),
            ur: Matrix::zeros(d, d),
            br: Matrix::zeros(1, d),
            wh: Matrix::zeros(d, d_in),
            uh: Matrix::zeros(d, d),
            bh: Matrix::zeros(1, d),
        }
    }

    /// Xavier-style init: weights N(0, 1/d_in) resp. N(0, 1/d), zero biases.
    pub fn init(d_in: usize, d: usize, rng: &mut impl rand::Rng) -> Self {
        let si = 1.0 / libm::sqrt(d_in as f64);
        let sh = 1.0 / libm::sqrt(d as f64);
        GruParams {
            wz: Matrix::randn(d, d_in, si, rng),
            uz: Matrix::randn(d, d, sh, rng),
            bz: Matrix::zeros(1, d),
            wr: Matrix::randn(d, d_in, si, rng),
            ur: Matrix::randn(d, d, sh, rng),
            br: Matrix::zeros(1, d),
            wh: Matrix::randn(d, d_in, si, rng),
            uh: Matrix::randn(d, d, sh, rng),
            bh: Matrix::zeros(1, d),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(alloc::string::String, &'a Matrix)) {
        use alloc::format;
        f(format!("{prefix}.wz"), &self.wz);
        f(format!("{prefix}.uz"), &self.uz);
        f(format!("{prefix}.bz"), &self.bz);
        f(format!("{prefix}.wr"), &self.wr);
        f(format!("{prefix}.ur"), &self.ur);
        f(format!("{prefix}.br"), &self.br);
        f(format!("{prefix}.wh"), &self.wh);
        f(format!("{prefix}.uh"), &self.uh);
        f(format!("{prefix}.bh"), &self.bh);
    }

    pub fn visit_mut(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(alloc::string::String, &mut Matrix),
    ) {
        use alloc::format;
        f(format!("{prefix}.wz"), &mut self.wz);
        f(format!("{prefix}.uz"), &mut self.uz);
        f(format!("{prefix}.bz"), &mut self.bz);
        f(format!("{prefix}.wr"), &mut self.wr);
        f(format!("{prefix}.ur"), &mut self.ur);
        f(format!("{prefix}.br"), &mut self.br);
        f(format!("{prefix}.wh"), &mut self.wh);
        f(format!("{prefix}.uh"), &mut self.uh);
        f(format!("{prefix}.bh"), &mut self.bh);
    }

    fn check(&self, x: &Matrix, h: &Matrix) -> Result<(), NumError> {
        let d = self.uz.rows;
        let d_in = self.wz.cols;
        if x.cols != d_in {
            return Err(NumError::DimMismatch {
                op: "gru_cell input",
                lhs: x.shape(),
                rhs: self.wz.shape(),
            });
        }
        if h.cols != d || h.rows != x.rows {
            return Err(NumError::DimMismatch {
                op: "gru_cell state",
                lhs: h.shape(),
                rhs: (x.rows, d),
            });
        }
        Ok(())
    }
}

/// Two-layer perceptron `w2·act(w1·x + b1) + b2`, ReLU hidden activation,
/// optional ReLU on the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp2Params {
    pub w1: Matrix,
    pub b1: Matrix,
    pub w2: Matrix,
    pub b2: Matrix,
}

impl Mlp2Params {
    pub fn zeros(d_in: usize, hidden: usize, d_out: usize) -> Self {
        Mlp2Params {
            w1: Matrix::zeros(hidden, d_in),
            b1: Matrix::zeros(1, hidden),
            w2: Matrix::zeros(d_out, hidden),
            b2: Matrix::zeros(1, d_out),
        }
    }

    /// He-style init for the ReLU hidden layer, Xavier for the output;
    /// `out_scale` shrinks the output layer (residual-branch stability).
    pub fn init(
        d_in: usize,
        hidden: usize,
        d_out: usize,
        out_scale: f64,
        rng: &mut impl rand::Rng,
    ) -> Self {
        let s1 = libm::sqrt(2.0 / d_in as f64);
        let s2 = out_scale / libm::sqrt(hidden as f64);
        Mlp2Params {
            w1: Matrix::randn(hidden, d_in, s1, rng),
            b1: Matrix::zeros(1, hidden),
            w2: Matrix::randn(d_out, hidden, s2, rng),
            b2: Matrix::zeros(1, d_out),
        }
    }

    pub fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(alloc::string::String, &'a Matrix)) {
        use alloc::format;
        f(format!("{prefix}.w1"), &self.w1);
        f(format!("{prefix}.b1"), &self.b1);
        f(format!("{prefix}.w2"), &self.w2);
        f(format!("{prefix}.b2"), &self.b2);
    }

    pub fn visit_mut(
        &mut self,
        prefix: &str,
        f: &mut dyn FnMut(alloc::string::String, &mut Matrix),
    ) {
        use alloc::format;
        f(format!("{prefix}.w1"), &mut self.w1);
        f(format!("{prefix}.b1"), &mut self.b1);
        f(format!("{prefix}.w2"), &mut self.w2);
        f(format!("{prefix}.b2"), &mut self.b2);
    }
}

/// Tape handles of a `GruParams` bundle inserted as inputs.
#[derive(Debug, Clone, Copy)]
pub struct GruNodes {
    pub wz: NodeId,
    pub uz: NodeId,
    pub bz: NodeId,
    pub wr: NodeId,
    pub ur: NodeId,
    pub br: NodeId,
    pub wh: NodeId,
    pub uh: NodeId,
    pub bh: NodeId,
}

/// Tape handles of an `Mlp2Params` bundle inserted as inputs.
#[derive(Debug, Clone, Copy)]
pub struct Mlp2Nodes {
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
}

impl Tape {
    pub fn insert_gru(&mut self, p: &GruParams) -> GruNodes {
        GruNodes {
            wz: self.input(p.wz.clone()),
            uz: self.input(p.uz.clone()),
            bz: self.input(p.bz.clone()),
            wr: self.input(p.wr.clone()),
            ur: self.input(p.ur.clone()),
            br: self.input(p.br.clone()),
            wh: self.input(p.wh.clone()),
            uh: self.input(p.uh.clone()),
            bh: self.input(p.bh.clone()),
        }
    }

    pub fn insert_mlp2(&mut self, p: &Mlp2Params) -> Mlp2Nodes {
        Mlp2Nodes {
            w1: self.input(p.w1.clone()),
            b1: self.input(p.b1.clone()),
            w2: self.input(p.w2.clone()),
            b2: self.input(p.b2.clone()),
        }
    }

    /// y = x·Wᵀ + b for row-stacked inputs x (n×d_in).
    pub fn linear_t(&mut self, x: NodeId, w: NodeId, b: NodeId) -> NodeId {
        let xw = self.matmul_nt(x, w);
        self.add_row(xw, b)
    }

    /// One GRU step for row-stacked states. Convention:
    ///   z = σ(x·Wzᵀ + h·Uzᵀ + bz)
    ///   r = σ(x·Wrᵀ + h·Urᵀ + br)
    ///   h̃ = tanh(x·Whᵀ + (r ⊙ h)·Uhᵀ + bh)
    ///   h' = (1 - z) ⊙ h̃ + z ⊙ h
    /// With all-zero parameters: z = 0.5, h̃ = 0, so h' = 0.5·h exactly.
    pub fn gru_step(&mut self, x: NodeId, h: NodeId, p: &GruNodes) -> NodeId {
        let zx = self.matmul_nt(x, p.wz);
        let zh = self.matmul_nt(h, p.uz);
        let zs = self.add(zx, zh);
        let zs = self.add_row(zs, p.bz);
        let z = self.sigmoid(zs);

        let rx = self.matmul_nt(x, p.wr);
        let rh = self.matmul_nt(h, p.ur);
        let rs = self.add(rx, rh);
        let rs = self.add_row(rs, p.br);
        let r = self.sigmoid(rs);

        let hx = self.matmul_nt(x, p.wh);
        let rh2 = self.mul(r, h);
        let hh = self.matmul_nt(rh2, p.uh);
        let hs = self.add(hx, hh);
        let hs = self.add_row(hs, p.bh);
        let hc = self.tanh(hs);

        let omz = self.one_minus(z);
        let a = self.mul(omz, hc);
        let b = self.mul(z, h);
        self.add(a, b)
    }

    /// Two-layer MLP with ReLU hidden layer; optional ReLU on the output.
    pub fn mlp2(&mut self, x: NodeId, p: &Mlp2Nodes, outer_relu: bool) -> NodeId {
        let h = self.linear_t(x, p.w1, p.b1);
        let h = self.relu(h);
        let y = self.linear_t(h, p.w2, p.b2);
        if outer_relu {
            self.relu(y)
        } else {
            y
        }
    }
}

/// y = x·Wᵀ + b (rows of `x` are independent samples).
pub fn linear(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix, NumError> {
    if x.cols != w.cols {
        return Err(NumError::DimMismatch {
            op: "linear",
            lhs: x.shape(),
            rhs: w.shape(),
        });
    }
    if b.rows != 1 || b.cols != w.rows {
        return Err(NumError::DimMismatch {
            op: "linear bias",
            lhs: b.shape(),
            rhs: (1, w.rows),
        });
    }
    let mut y = super::matrix::matmul_nt(x, w);
    for r in 0..y.rows {
        for (v, &bv) in y.row_mut(r).iter_mut().zip(b.data.iter()) {
            *v += bv;
        }
    }
    Ok(y)
}

/// Row-wise softmax (max-subtracted, safe for large magnitudes).
pub fn softmax_rows(m: &Matrix) -> Matrix {
    softmax_rows_value(m)
}

/// One GRU step on plain matrices (see `Tape::gru_step` for the convention).
pub fn gru_cell(x: &Matrix, h: &Matrix, p: &GruParams) -> Result<Matrix, NumError> {
    p.check(x, h)?;
    let mut tape = Tape::new();
    let xn = tape.constant(x.clone());
    let hn = tape.constant(h.clone());
    let pn = tape.insert_gru(p);
    let out = tape.gru_step(xn, hn, &pn);
    Ok(tape.value(out).clone())
}

/// Two-layer MLP on plain matrices.
pub fn mlp2(x: &Matrix, p: &Mlp2Params, outer_relu: bool) -> Result<Matrix, NumError> {
    if x.cols != p.w1.cols {
        return Err(NumError::DimMismatch {
            op: "mlp2",
            lhs: x.shape(),
            rhs: p.w1.shape(),
        });
    }
    let mut tape = Tape::new();
    let xn = tape.constant(x.clone());
    let pn = tape.insert_mlp2(p);
    let out = tape.mlp2(xn, &pn, outer_relu);
    Ok(tape.value(out).clone())
}
