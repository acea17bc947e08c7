use super::ops::{self, ConvGeometry};
use super::Tensor;
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A recorded primitive. Operands always refer to earlier nodes.
#[derive(Clone, Debug)]
pub enum Op {
    Input,
    Param,
    Conv2d {
        input: NodeId,
        kernels: NodeId,
        stride: usize,
        padding: usize,
    },
    ChannelBias {
        input: NodeId,
        bias: NodeId,
    },
    Bias {
        input: NodeId,
        bias: NodeId,
    },
    Relu {
        input: NodeId,
    },
    MaxPool2d {
        input: NodeId,
        size: usize,
        argmax: Vec<usize>,
    },
    Flatten {
        input: NodeId,
    },
    MatVec {
        weight: NodeId,
        input: NodeId,
    },
}

impl Op {
    fn operands(&self) -> Vec<NodeId> {
        match *self {
            Op::Input | Op::Param => vec![],
            Op::Conv2d { input, kernels, .. } => vec![input, kernels],
            Op::ChannelBias { input, bias } | Op::Bias { input, bias } => vec![input, bias],
            Op::Relu { input } | Op::MaxPool2d { input, .. } | Op::Flatten { input } => vec![input],
            Op::MatVec { weight, input } => vec![weight, input],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of a forward computation. Nodes are stored in creation
/// order, which is a topological order by construction.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Which gradients a backward sweep should produce.
#[derive(Clone, Copy, Debug)]
pub struct GradScope {
    /// Do not propagate below this node; its own gradient is still produced.
    pub stop_at: Option<NodeId>,
    /// Produce gradients for `Param` leaves.
    pub params: bool,
    /// Produce gradients for `Input` leaves.
    pub inputs: bool,
}

impl GradScope {
    pub const ALL: GradScope = GradScope {
        stop_at: None,
        params: true,
        inputs: true,
    };

    pub fn params_only() -> Self {
        GradScope {
            stop_at: None,
            params: true,
            inputs: false,
        }
    }

    pub fn down_to(node: NodeId) -> Self {
        GradScope {
            stop_at: Some(node),
            params: false,
            inputs: false,
        }
    }
}

/// Gradients keyed by node; absent where the sweep did not reach.
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Tensor> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (NodeId(i), g)))
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id.0].op
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 >= self.nodes.len() {
            return Err(Error::IndexOutOfRange {
                index: id.0,
                len: self.nodes.len(),
            });
        }
        Ok(())
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Param, value)
    }

    pub fn conv2d(
        &mut self,
        input: NodeId,
        kernels: NodeId,
        stride: usize,
        padding: usize,
    ) -> Result<NodeId> {
        self.check(input)?;
        self.check(kernels)?;
        let v = ops::conv2d(self.value(input), self.value(kernels), stride, padding)?;
        Ok(self.push(
            Op::Conv2d {
                input,
                kernels,
                stride,
                padding,
            },
            v,
        ))
    }

    pub fn channel_bias(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId> {
        self.check(input)?;
        self.check(bias)?;
        let v = ops::add_channel_bias(self.value(input), self.value(bias))?;
        Ok(self.push(Op::ChannelBias { input, bias }, v))
    }

    pub fn bias(&mut self, input: NodeId, bias: NodeId) -> Result<NodeId> {
        self.check(input)?;
        self.check(bias)?;
        let v = self.value(input).add(self.value(bias))?;
        Ok(self.push(Op::Bias { input, bias }, v))
    }

    pub fn relu(&mut self, input: NodeId) -> Result<NodeId> {
        self.check(input)?;
        let v = ops::relu(self.value(input));
        Ok(self.push(Op::Relu { input }, v))
    }

    pub fn maxpool2d(&mut self, input: NodeId, size: usize) -> Result<NodeId> {
        self.check(input)?;
        let (v, argmax) = ops::maxpool2d(self.value(input), size)?;
        Ok(self.push(
            Op::MaxPool2d {
                input,
                size,
                argmax,
            },
            v,
        ))
    }

    pub fn flatten(&mut self, input: NodeId) -> Result<NodeId> {
        self.check(input)?;
        let v = self.value(input).clone();
        let n = v.len();
        Ok(self.push(Op::Flatten { input }, v.reshape(&[n])?))
    }

    pub fn matvec(&mut self, weight: NodeId, input: NodeId) -> Result<NodeId> {
        self.check(weight)?;
        self.check(input)?;
        let v = ops::matvec(self.value(weight), self.value(input))?;
        Ok(self.push(Op::MatVec { weight, input }, v))
    }

    /// Recomputes every non-leaf node from the leaf values.
    pub fn replay(&self) -> Result<Vec<Tensor>> {
        let mut vals: Vec<Tensor> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match &node.op {
                Op::Input | Op::Param => node.value.clone(),
                Op::Conv2d {
                    input,
                    kernels,
                    stride,
                    padding,
                } => ops::conv2d(&vals[input.0], &vals[kernels.0], *stride, *padding)?,
                Op::ChannelBias { input, bias } => {
                    ops::add_channel_bias(&vals[input.0], &vals[bias.0])?
                }
                Op::Bias { input, bias } => vals[input.0].add(&vals[bias.0])?,
                Op::Relu { input } => ops::relu(&vals[input.0]),
                Op::MaxPool2d { input, size, .. } => ops::maxpool2d(&vals[input.0], *size)?.0,
                Op::Flatten { input } => {
                    let n = vals[input.0].len();
                    vals[input.0].clone().reshape(&[n])?
                }
                Op::MatVec { weight, input } => ops::matvec(&vals[weight.0], &vals[input.0])?,
            };
            vals.push(v);
        }
        Ok(vals)
    }

    /// Gradient of `output[index]` with respect to every node.
    pub fn backward(&self, output: NodeId, index: usize) -> Result<Gradients> {
        self.check(output)?;
        let out = self.value(output);
        if index >= out.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: out.len(),
            });
        }
        let mut seed = Tensor::zeros(out.shape());
        seed.data_mut()[index] = 1.0;
        self.backward_with(output, seed, GradScope::ALL)
    }

    /// Vector-Jacobian product: propagates `seed` (shaped like `output`) back
    /// through the tape, limited to `scope`.
    pub fn backward_with(
        &self,
        output: NodeId,
        seed: Tensor,
        scope: GradScope,
    ) -> Result<Gradients> {
        self.check(output)?;
        if seed.shape() != self.value(output).shape() {
            return Err(Error::shape(
                "backward",
                format!(
                    "seed {:?} for output {:?}",
                    seed.shape(),
                    self.value(output).shape()
                ),
            ));
        }
        let floor = match scope.stop_at {
            Some(s) => {
                self.check(s)?;
                s.0
            }
            None => 0,
        };
        let wants = self.wanted(output, scope);

        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(seed);
        for i in (floor + 1..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &wants, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn wanted(&self, output: NodeId, scope: GradScope) -> Vec<bool> {
        let mut wants = vec![false; output.0 + 1];
        for (i, node) in self.nodes.iter().enumerate().take(output.0 + 1) {
            wants[i] = match scope.stop_at {
                Some(s) if i < s.0 => false,
                Some(s) if i == s.0 => true,
                _ => match node.op {
                    Op::Input => scope.inputs,
                    Op::Param => scope.params,
                    ref op => op.operands().iter().any(|o| wants[o.0]),
                },
            };
        }
        wants
    }

    fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
        match &mut grads[id.0] {
            Some(acc) => acc
                .add_assign(&g)
                .expect("gradient shapes follow node shapes"),
            slot => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, wants: &[bool], grads: &mut [Option<Tensor>]) {
        match &self.nodes[i].op {
            Op::Input | Op::Param => {}
            Op::Conv2d {
                input,
                kernels,
                stride,
                padding,
            } => {
                let x = self.value(*input);
                let k = self.value(*kernels);
                let geo = ConvGeometry::new(x.shape(), k.shape(), *stride, *padding)
                    .expect("recorded shapes are valid");
                if wants[input.0] {
                    Self::accumulate(grads, *input, ops::conv2d_grad_input(g, k, &geo));
                }
                if wants[kernels.0] {
                    Self::accumulate(grads, *kernels, ops::conv2d_grad_kernels(g, x, &geo));
                }
            }
            Op::ChannelBias { input, bias } => {
                if wants[bias.0] {
                    let c = g.shape()[0];
                    let plane = g.len() / c;
                    let gb = g.data().chunks(plane).map(|ch| ch.iter().sum()).collect();
                    Self::accumulate(grads, *bias, Tensor::new(vec![c], gb).expect("bias shape"));
                }
                if wants[input.0] {
                    Self::accumulate(grads, *input, g.clone());
                }
            }
            Op::Bias { input, bias } => {
                if wants[bias.0] {
                    Self::accumulate(grads, *bias, g.clone());
                }
                if wants[input.0] {
                    Self::accumulate(grads, *input, g.clone());
                }
            }
            Op::Relu { input } => {
                if wants[input.0] {
                    // subgradient 0 at the kink
                    let gx = g
                        .zip_map(self.value(*input), |gv, xv| if xv > 0.0 { gv } else { 0.0 })
                        .expect("relu keeps shape");
                    Self::accumulate(grads, *input, gx);
                }
            }
            Op::MaxPool2d { input, argmax, .. } => {
                if wants[input.0] {
                    let mut gx = Tensor::zeros(self.value(*input).shape());
                    let d = gx.data_mut();
                    for (&src, &gv) in argmax.iter().zip(g.data()) {
                        d[src] += gv;
                    }
                    Self::accumulate(grads, *input, gx);
                }
            }
            Op::Flatten { input } => {
                if wants[input.0] {
                    let shape = self.value(*input).shape().to_vec();
                    Self::accumulate(
                        grads,
                        *input,
                        g.clone().reshape(&shape).expect("same length"),
                    );
                }
            }
            Op::MatVec { weight, input } => {
                let w = self.value(*weight);
                let x = self.value(*input);
                let (m, n) = (w.shape()[0], w.shape()[1]);
                if wants[weight.0] {
                    let mut gw = vec![0.0; m * n];
                    for (r, &gr) in g.data().iter().enumerate() {
                        if gr != 0.0 {
                            for (dst, &xv) in gw[r * n..(r + 1) * n].iter_mut().zip(x.data()) {
                                *dst = gr * xv;
                            }
                        }
                    }
                    Self::accumulate(
                        grads,
                        *weight,
                        Tensor::new(vec![m, n], gw).expect("weight shape"),
                    );
                }
                if wants[input.0] {
                    let mut gx = vec![0.0; n];
                    for (row, &gr) in w.data().chunks_exact(n).zip(g.data()) {
                        if gr != 0.0 {
                            for (dst, &wv) in gx.iter_mut().zip(row) {
                                *dst += gr * wv;
                            }
                        }
                    }
                    let gx = Tensor::new(x.shape().to_vec(), gx).expect("input shape");
                    Self::accumulate(grads, *input, gx);
                }
            }
        }
    }
}
