use std::collections::HashMap;

use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::{NnError, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// `a + 1 x n` row vector broadcast over rows.
    AddRow(NodeId, NodeId),
    /// `a * 1 x n` row vector broadcast over rows.
    MulRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Transpose(NodeId),
    SoftmaxRows(NodeId),
    /// Per-row standardisation; `inv_std` cached for the backward pass.
    Normalize {
        x: NodeId,
        inv_std: Array1<f64>,
    },
    Gelu(NodeId),
    MeanRows(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Parameter gradients from one backward pass, indexed by [`ParamId`].
/// Parameters the graph never touched have no entry.
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads.get(id.index()).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.grads.iter().enumerate().filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_C: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (SQRT_2_OVER_PI * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_C * x * x)
}

/// Tape of operations for one forward pass.
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self { store, nodes: Vec::new(), param_nodes: HashMap::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, n: NodeId) -> &Array2<f64> {
        &self.nodes[n.0].value
    }

    pub fn shape(&self, n: NodeId) -> (usize, usize) {
        self.value(n).dim()
    }

    pub fn input(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Leaf for a stored parameter; repeated calls return the same node so
    /// gradients from every use accumulate in one place.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        let n = self.push(self.store.get(id).clone(), Op::Param);
        self.param_nodes.insert(id, n);
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ncols() != vb.nrows() {
            return Err(NnError::Shape { op: "matmul", detail: format!("{:?} x {:?}", va.dim(), vb.dim()) });
        }
        let v = va.dot(vb);
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(NnError::Shape { op: "add", detail: format!("{:?} + {:?}", self.shape(a), self.shape(b)) });
        }
        let v = self.value(a) + self.value(b);
        Ok(self.push(v, Op::Add(a, b)))
    }

    fn check_row(&self, op: &'static str, a: NodeId, row: NodeId) -> Result<(), NnError> {
        let (ra, rr) = (self.shape(a), self.shape(row));
        if rr.0 != 1 || rr.1 != ra.1 {
            return Err(NnError::Shape { op, detail: format!("{ra:?} with row {rr:?}") });
        }
        Ok(())
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, NnError> {
        self.check_row("add_row", a, row)?;
        let v = self.value(a) + self.value(row);
        Ok(self.push(v, Op::AddRow(a, row)))
    }

    pub fn mul_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, NnError> {
        self.check_row("mul_row", a, row)?;
        let v = self.value(a) * self.value(row);
        Ok(self.push(v, Op::MulRow(a, row)))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// `(x - mean) / sqrt(var + eps)` per row (population variance).
    pub fn normalize_rows(&mut self, x: NodeId, eps: f64) -> NodeId {
        let xv = self.value(x);
        let cols = xv.ncols() as f64;
        let mut out = xv.clone();
        let mut inv_std = Array1::zeros(xv.nrows());
        for (i, mut row) in out.rows_mut().into_iter().enumerate() {
            let mean = row.sum() / cols;
            row.mapv_inplace(|v| v - mean);
            let var = row.iter().map(|v| v * v).sum::<f64>() / cols;
            let is = 1.0 / (var + eps).sqrt();
            row.mapv_inplace(|v| v * is);
            inv_std[i] = is;
        }
        self.push(out, Op::Normalize { x, inv_std })
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(gelu);
        self.push(v, Op::Gelu(a))
    }

    /// Mean over the token (row) axis, giving a `1 x n` row.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, NnError> {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v =
            concatenate(Axis(1), &views).map_err(|e| NnError::Shape { op: "concat_cols", detail: e.to_string() })?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NnError> {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let v =
            concatenate(Axis(0), &views).map_err(|e| NnError::Shape { op: "concat_rows", detail: e.to_string() })?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, end: usize) -> NodeId {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end))
    }

    /// Back-propagates the given output gradients and returns the gradient
    /// of every parameter reached.
    pub fn backward(&self, seeds: &[(NodeId, Array2<f64>)]) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        fn acc(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
            match slot {
                Some(existing) => *existing += &g,
                None => *slot = Some(g),
            }
        }
        for (n, g) in seeds {
            assert_eq!(g.dim(), self.shape(*n), "seed gradient shape");
            acc(&mut grads[n.0], g.clone());
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads[a.0], ga);
                    acc(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads[b.0], g.clone());
                    acc(&mut grads[a.0], g);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads[row.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads[a.0], g);
                }
                Op::MulRow(a, row) => {
                    let grow = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let ga = &g * self.value(*row);
                    acc(&mut grads[row.0], grow);
                    acc(&mut grads[a.0], ga);
                }
                Op::Scale(a, c) => acc(&mut grads[a.0], g * *c),
                Op::Transpose(a) => acc(&mut grads[a.0], g.t().to_owned()),
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let mut gx = Array2::zeros(y.dim());
                    for ((mut gr, yr), grow) in gx.rows_mut().into_iter().zip(y.rows()).zip(g.rows()) {
                        let dot: f64 = yr.iter().zip(grow.iter()).map(|(a, b)| a * b).sum();
                        for ((o, &yv), &gv) in gr.iter_mut().zip(yr.iter()).zip(grow.iter()) {
                            *o = yv * (gv - dot);
                        }
                    }
                    acc(&mut grads[a.0], gx);
                }
                Op::Normalize { x, inv_std } => {
                    let xhat = &node.value;
                    let n = xhat.ncols() as f64;
                    let mut gx = Array2::zeros(xhat.dim());
                    for (i, ((mut gr, xr), grow)) in
                        gx.rows_mut().into_iter().zip(xhat.rows()).zip(g.rows()).enumerate()
                    {
                        let mean_g = grow.sum() / n;
                        let mean_gx: f64 = grow.iter().zip(xr.iter()).map(|(a, b)| a * b).sum::<f64>() / n;
                        for ((o, &xh), &gv) in gr.iter_mut().zip(xr.iter()).zip(grow.iter()) {
                            *o = inv_std[i] * (gv - mean_g - xh * mean_gx);
                        }
                    }
                    acc(&mut grads[x.0], gx);
                }
                Op::Gelu(a) => {
                    let ga = &g * &self.value(*a).mapv(gelu_grad);
                    acc(&mut grads[a.0], ga);
                }
                Op::MeanRows(a) => {
                    let rows = self.shape(*a).0;
                    let row = g.row(0).to_owned() / rows as f64;
                    let ga = row.broadcast((rows, row.len())).expect("broadcast").to_owned();
                    acc(&mut grads[a.0], ga);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        acc(&mut grads[p.0], g.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let h = self.shape(*p).0;
                        acc(&mut grads[p.0], g.slice(s![off..off + h, ..]).to_owned());
                        off += h;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let mut ga = Array2::zeros(self.shape(*a));
                    ga.slice_mut(s![.., *start..*end]).assign(&g);
                    acc(&mut grads[a.0], ga);
                }
            }
        }
        let mut out = Gradients { grads: (0..self.store.len()).map(|_| None).collect() };
        for (&pid, &node) in &self.param_nodes {
            out.grads[pid.index()] = grads[node.0].take();
        }
        out
    }
}
