use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::ops::Op;

static NEXT_ID: AtomicUsize = AtomicUsize::new(1);

fn next_id() -> usize {
    NEXT_ID.fetch_add(1, Ordering::Relaxed)
}

pub(crate) struct Node {
    pub(crate) id: usize,
    pub(crate) shape: Vec<usize>,
    pub(crate) data: Arc<Vec<f32>>,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

/// Reference-counted, immutable n-dimensional `f32` array that records the
/// operation that produced it, so gradients can be pulled back with
/// [`Tensor::backward`].
#[derive(Clone)]
pub struct Tensor(pub(crate) Arc<Node>);

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    /// Constant tensor (no gradient tracking).
    pub fn new(data: Vec<f32>, shape: &[usize]) -> Self {
        assert_eq!(
            data.len(),
            numel(shape),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Self::leaf(Arc::new(data), shape.to_vec(), false)
    }

    /// Leaf tensor that accumulates a gradient during backward.
    pub fn var(data: Vec<f32>, shape: &[usize]) -> Self {
        assert_eq!(data.len(), numel(shape));
        Self::leaf(Arc::new(data), shape.to_vec(), true)
    }

    pub fn from_shared(data: Arc<Vec<f32>>, shape: &[usize], requires_grad: bool) -> Self {
        assert_eq!(data.len(), numel(shape));
        Self::leaf(data, shape.to_vec(), requires_grad)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::new(vec![0.0; numel(shape)], shape)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        Self::new(vec![value; numel(shape)], shape)
    }

    pub fn scalar(value: f32) -> Self {
        Self::new(vec![value], &[])
    }

    fn leaf(data: Arc<Vec<f32>>, shape: Vec<usize>, requires_grad: bool) -> Self {
        Tensor(Arc::new(Node {
            id: next_id(),
            shape,
            data,
            op: Op::Leaf,
            requires_grad,
        }))
    }

    pub(crate) fn from_op(data: Vec<f32>, shape: Vec<usize>, op: Op) -> Self {
        debug_assert_eq!(data.len(), numel(&shape));
        let requires_grad = op.parents().iter().any(|p| p.requires_grad());
        let op = if requires_grad { op } else { Op::Leaf };
        Tensor(Arc::new(Node {
            id: next_id(),
            shape,
            data: Arc::new(data),
            op,
            requires_grad,
        }))
    }

    pub fn id(&self) -> usize {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn dims4(&self) -> (usize, usize, usize, usize) {
        match self.shape() {
            &[n, c, h, w] => (n, c, h, w),
            s => panic!("expected a rank-4 tensor, got shape {s:?}"),
        }
    }

    pub fn dims2(&self) -> (usize, usize) {
        match self.shape() {
            &[a, b] => (a, b),
            s => panic!("expected a rank-2 tensor, got shape {s:?}"),
        }
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    pub fn shared_data(&self) -> Arc<Vec<f32>> {
        Arc::clone(&self.0.data)
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.0.data.as_ref().clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f32 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape());
        self.0.data[0]
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Tensor {
        Self::leaf(self.shared_data(), self.0.shape.clone(), false)
    }

    /// Same values as a fresh gradient-tracking leaf.
    pub fn detach_var(&self) -> Tensor {
        Self::leaf(self.shared_data(), self.0.shape.clone(), true)
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }

    /// Reverse-mode differentiation of a single-element tensor. Returns the
    /// gradients of every leaf that requires them.
    pub fn backward(&self) -> Grads {
        assert_eq!(self.numel(), 1, "backward() needs a scalar, got {:?}", self.shape());
        self.backward_with(vec![1.0])
    }

    /// Backward pass seeded with an arbitrary upstream gradient of this
    /// tensor's shape (a vector-Jacobian product).
    pub fn backward_with(&self, seed: Vec<f32>) -> Grads {
        assert_eq!(seed.len(), self.numel());
        let mut grads: HashMap<usize, Vec<f32>> = HashMap::new();
        if !self.requires_grad() {
            return Grads { map: grads };
        }
        let order = self.topo_order();
        grads.insert(self.id(), seed);
        for node in order.iter().rev() {
            if matches!(node.0.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads.remove(&node.id()) else {
                continue;
            };
            let contributions = node.0.op.backward(node, &g);
            for (parent, pg) in node.0.op.parents().into_iter().zip(contributions) {
                let Some(pg) = pg else { continue };
                if !parent.requires_grad() {
                    continue;
                }
                debug_assert_eq!(pg.len(), parent.numel());
                match grads.get_mut(&parent.id()) {
                    Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += *b),
                    None => {
                        grads.insert(parent.id(), pg);
                    }
                }
            }
        }
        Grads { map: grads }
    }

    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        // (tensor, children_pushed)
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            for p in t.0.op.parents() {
                if p.requires_grad() && !visited.contains(&p.id()) {
                    stack.push((p.clone(), false));
                }
            }
        }
        order
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<f32> = self.data().iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .field("data", &preview)
            .finish()
    }
}

/// Leaf gradients produced by a backward pass, keyed by tensor identity.
#[derive(Default)]
pub struct Grads {
    map: HashMap<usize, Vec<f32>>,
}

impl Grads {
    pub fn get(&self, t: &Tensor) -> Option<&[f32]> {
        self.map.get(&t.id()).map(|v| v.as_slice())
    }

    pub fn take(&mut self, t: &Tensor) -> Option<Vec<f32>> {
        self.map.remove(&t.id())
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
