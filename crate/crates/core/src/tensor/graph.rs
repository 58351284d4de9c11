use super::{Result, Tensor, TensorError};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// Everything an operation needs to propagate its output gradient.
pub struct BackwardCtx<'a> {
    pub inputs: Vec<&'a Tensor>,
    pub output: &'a Tensor,
    pub grad: &'a Tensor,
    /// Which inputs want a gradient; the op may return `None` for the others.
    pub needs: Vec<bool>,
}

/// Backward rule of a recorded operation. Returns one optional gradient per input,
/// each shaped like its input.
pub trait Backward {
    fn backward(&self, ctx: &BackwardCtx<'_>) -> Vec<Option<Tensor>>;
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    parents: Vec<usize>,
    op: Option<Box<dyn Backward>>,
    requires_grad: bool,
}

/// A tape of operations. Nodes are appended in evaluation order, so the index
/// order is already a topological order.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a leaf whose gradient is tracked.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Vec::new(), None, true)
    }

    /// Adds a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Vec::new(), None, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records the result of an operation. The backward rule is dropped when no
    /// input requires a gradient.
    pub fn apply(&mut self, value: Tensor, inputs: &[Var], op: Box<dyn Backward>) -> Result<Var> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite { op: "forward" });
        }
        let parents: Vec<usize> = inputs.iter().map(|v| v.0).collect();
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        let op = if requires_grad { Some(op) } else { None };
        Ok(self.push(value, parents, op, requires_grad))
    }

    fn push(
        &mut self,
        value: Tensor,
        parents: Vec<usize>,
        op: Option<Box<dyn Backward>>,
        requires_grad: bool,
    ) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            parents,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Backpropagates from a one-element node. Gradients accumulate into every
    /// node that requires them; intermediate gradients are released once used.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(TensorError::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.nodes[loss.0].value.shape()),
            ));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        let shape = self.nodes[loss.0].value.shape().to_vec();
        self.nodes[loss.0].grad = Some(Tensor::ones(&shape));

        for i in (0..=loss.0).rev() {
            let parent_grads = {
                let node = &self.nodes[i];
                let (Some(grad), Some(op)) = (node.grad.as_ref(), node.op.as_ref()) else {
                    continue;
                };
                let ctx = BackwardCtx {
                    inputs: node.parents.iter().map(|&p| &self.nodes[p].value).collect(),
                    output: &node.value,
                    grad,
                    needs: node
                        .parents
                        .iter()
                        .map(|&p| self.nodes[p].requires_grad)
                        .collect(),
                };
                op.backward(&ctx)
            };
            let parents = self.nodes[i].parents.clone();
            debug_assert_eq!(parents.len(), parent_grads.len());
            for (p, g) in parents.into_iter().zip(parent_grads) {
                let Some(g) = g else { continue };
                if !self.nodes[p].requires_grad {
                    continue;
                }
                debug_assert_eq!(g.shape(), self.nodes[p].value.shape());
                match &mut self.nodes[p].grad {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
            if !self.nodes[i].parents.is_empty() {
                self.nodes[i].grad = None;
            }
        }
        Ok(())
    }
}
