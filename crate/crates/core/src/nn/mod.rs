//! Static inference graphs assembled from named weights.

pub mod demographics;
pub mod expression;
pub mod synthetic;

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{
    add, batch_norm_inference, conv2d, dense, pool2d, relu, softmax, BatchNormParams, ConvSpec,
    Pool, Tensor,
};
use crate::weights::{Manifest, TensorArchive};

/// Batch-norm epsilon used by both networks.
pub const BN_EPSILON: f32 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    Input,
    Conv2d {
        kernel: Tensor,
        bias: Option<Tensor>,
        spec: ConvSpec,
    },
    BatchNorm(BatchNormParams),
    Relu,
    Pool(Pool),
    Dense {
        weights: Tensor,
        bias: Tensor,
    },
    Softmax,
    Add,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Input,
    Conv2d,
    BatchNorm,
    Relu,
    Pool,
    Dense,
    Softmax,
    Add,
}

impl Op {
    pub fn kind(&self) -> OpKind {
        match self {
            Op::Input => OpKind::Input,
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::BatchNorm(_) => OpKind::BatchNorm,
            Op::Relu => OpKind::Relu,
            Op::Pool(_) => OpKind::Pool,
            Op::Dense { .. } => OpKind::Dense,
            Op::Softmax => OpKind::Softmax,
            Op::Add => OpKind::Add,
        }
    }

    /// Stored values: every tensor the op carries, including frozen BN statistics.
    pub fn parameter_count(&self) -> usize {
        match self {
            Op::Conv2d { kernel, bias, .. } => kernel.len() + bias.as_ref().map_or(0, Tensor::len),
            Op::BatchNorm(bn) => 4 * bn.channels(),
            Op::Dense { weights, bias } => weights.len() + bias.len(),
            _ => 0,
        }
    }

    /// Values a training run would update; BN moving statistics are excluded.
    pub fn trainable_parameter_count(&self) -> usize {
        match self {
            Op::BatchNorm(bn) => 2 * bn.channels(),
            other => other.parameter_count(),
        }
    }

    fn arity(&self) -> usize {
        match self {
            Op::Input => 0,
            Op::Add => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub name: String,
    pub op: Op,
    pub inputs: Vec<usize>,
}

/// An immutable feed-forward graph. Nodes are stored in execution order and
/// only refer to earlier nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    outputs: Vec<usize>,
    input_dims: Vec<usize>,
    /// For each node, the index of the last node reading it.
    last_use: Vec<usize>,
}

impl Network {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.input_dims
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.outputs.iter().map(|&i| self.nodes[i].name.as_str()).collect()
    }

    pub fn count_ops(&self, kind: OpKind) -> usize {
        self.nodes.iter().filter(|n| n.op.kind() == kind).count()
    }

    pub fn parameter_count(&self) -> usize {
        self.nodes.iter().map(|n| n.op.parameter_count()).sum()
    }

    pub fn trainable_parameter_count(&self) -> usize {
        self.nodes.iter().map(|n| n.op.trainable_parameter_count()).sum()
    }

    /// Runs the graph and returns the output tensors in declaration order.
    pub fn forward(&self, input: &Tensor) -> Result<Vec<Tensor>> {
        if input.dims() != self.input_dims.as_slice() {
            return Err(Error::shape(
                "network input",
                format!("expected {:?}, got {:?}", self.input_dims, input.dims()),
            ));
        }
        let mut values: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            let arg = |k: usize| -> &Tensor {
                values[node.inputs[k]]
                    .as_ref()
                    .expect("graph inputs are computed before use")
            };
            let out = match &node.op {
                Op::Input => input.clone(),
                Op::Conv2d { kernel, bias, spec } => conv2d(arg(0), kernel, bias.as_ref(), *spec)?,
                Op::BatchNorm(bn) => batch_norm_inference(arg(0), bn)?,
                Op::Relu => relu(arg(0)),
                Op::Pool(p) => pool2d(arg(0), *p)?,
                Op::Dense { weights, bias } => dense(arg(0), weights, bias)?,
                Op::Softmax => softmax(arg(0))?,
                Op::Add => add(arg(0), arg(1))?,
            };
            for &src in &node.inputs {
                if self.last_use[src] == i && !self.outputs.contains(&src) {
                    values[src] = None;
                }
            }
            values[i] = Some(out);
        }
        Ok(self
            .outputs
            .iter()
            .map(|&i| values[i].clone().expect("outputs are retained"))
            .collect())
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(f, "{i:4} {:<10} {:<32} <- {:?}", format!("{:?}", n.op.kind()), n.name, n.inputs)?;
        }
        write!(f, "outputs: {:?}", self.output_names())
    }
}

/// Handle to a node while a graph is being assembled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

/// Assembles a [`Network`], pulling weights from an archive by name.
pub struct GraphBuilder<'a> {
    archive: &'a TensorArchive,
    nodes: Vec<Node>,
    input_dims: Vec<usize>,
}

impl<'a> GraphBuilder<'a> {
    pub fn new(archive: &'a TensorArchive, input_dims: Vec<usize>) -> (Self, NodeId) {
        let builder = GraphBuilder {
            archive,
            nodes: vec![Node {
                name: "input".into(),
                op: Op::Input,
                inputs: vec![],
            }],
            input_dims,
        };
        (builder, NodeId(0))
    }

    /// Fetches `name`, requiring the given dims exactly.
    pub fn weight(&self, name: &str, dims: &[usize]) -> Result<Tensor> {
        let t = self
            .archive
            .get(name)
            .ok_or_else(|| Error::MissingWeight(name.to_string()))?;
        if t.dims() != dims {
            return Err(Error::shape(
                name,
                format!("expected {dims:?}, archive has {:?}", t.dims()),
            ));
        }
        Ok(t.clone())
    }

    pub fn batch_norm_params(&self, prefix: &str, channels: usize) -> Result<BatchNormParams> {
        let get = |field: &str| self.weight(&format!("{prefix}.{field}"), &[channels]);
        Ok(BatchNormParams {
            gamma: get("gamma")?,
            beta: get("beta")?,
            mean: get("mean")?,
            variance: get("variance")?,
            epsilon: BN_EPSILON,
        })
    }

    pub fn push(&mut self, name: impl Into<String>, op: Op, inputs: &[NodeId]) -> NodeId {
        debug_assert_eq!(op.arity(), inputs.len());
        self.nodes.push(Node {
            name: name.into(),
            op,
            inputs: inputs.iter().map(|id| id.0).collect(),
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn conv(
        &mut self,
        prefix: &str,
        x: NodeId,
        dims: [usize; 4],
        spec: ConvSpec,
        with_bias: bool,
    ) -> Result<NodeId> {
        self.conv_named(prefix, &format!("{prefix}.kernel"), x, dims, spec, with_bias)
    }

    /// Convolution whose kernel tensor is `kernel_name` rather than `<prefix>.kernel`.
    pub fn conv_named(
        &mut self,
        node_name: &str,
        kernel_name: &str,
        x: NodeId,
        dims: [usize; 4],
        spec: ConvSpec,
        with_bias: bool,
    ) -> Result<NodeId> {
        let kernel = self.weight(kernel_name, &dims)?;
        let bias = if with_bias {
            Some(self.weight(&format!("{node_name}.bias"), &[dims[3]])?)
        } else {
            None
        };
        Ok(self.push(node_name, Op::Conv2d { kernel, bias, spec }, &[x]))
    }

    pub fn batch_norm(&mut self, prefix: &str, x: NodeId, channels: usize) -> Result<NodeId> {
        let bn = self.batch_norm_params(prefix, channels)?;
        Ok(self.push(prefix, Op::BatchNorm(bn), &[x]))
    }

    pub fn relu(&mut self, name: impl Into<String>, x: NodeId) -> NodeId {
        self.push(name, Op::Relu, &[x])
    }

    pub fn dense(&mut self, prefix: &str, x: NodeId, inputs: usize, outputs: usize) -> Result<NodeId> {
        let weights = self.weight(&format!("{prefix}.kernel"), &[inputs, outputs])?;
        let bias = self.weight(&format!("{prefix}.bias"), &[outputs])?;
        Ok(self.push(prefix, Op::Dense { weights, bias }, &[x]))
    }

    pub fn finish(self, outputs: &[NodeId]) -> Network {
        let mut last_use: Vec<usize> = (0..self.nodes.len()).collect();
        for (i, node) in self.nodes.iter().enumerate() {
            for &src in &node.inputs {
                last_use[src] = last_use[src].max(i);
            }
        }
        Network {
            nodes: self.nodes,
            outputs: outputs.iter().map(|id| id.0).collect(),
            input_dims: self.input_dims,
            last_use,
        }
    }
}

/// Names in the archive that no manifest entry accounts for.
pub(crate) fn warn_on_extras(archive: &TensorArchive, manifest: &Manifest, network: &str) {
    let expected: std::collections::HashSet<&str> = manifest.iter().map(|(n, _)| n.as_str()).collect();
    let extra: Vec<&str> = archive
        .entries()
        .map(|(n, _)| n)
        .filter(|n| !expected.contains(n))
        .collect();
    if !extra.is_empty() {
        log::warn!("{network}: ignoring {} unused tensors, e.g. `{}`", extra.len(), extra[0]);
    }
}

pub(crate) fn bn_entries(prefix: &str, channels: usize) -> impl Iterator<Item = (String, Vec<usize>)> + '_ {
    ["gamma", "beta", "mean", "variance"]
        .into_iter()
        .map(move |f| (format!("{prefix}.{f}"), vec![channels]))
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
