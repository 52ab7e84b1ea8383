//! Dense `f64` tensors with tape-free reverse-mode differentiation.
//!
//! Every operation that touches a tensor requiring gradients records a node
//! holding its parents and a backward closure. Backward closures are written
//! in terms of the same differentiable operations, so gradients can themselves
//! be differentiated (`grad(.., create_graph = true)`), which the R1 penalty
//! relies on.

mod adam;
mod conv;
mod io;
pub(crate) mod ops;

pub use adam::{adam_step, AdamState};
pub use conv::conv_output_size;
pub use io::{decode_tnsr, encode_tnsr, read_tnsr, write_tnsr, DType};
pub use ops::instance_stats;

use std::cell::{Cell, Ref, RefCell, RefMut};
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Whether operations currently record graph nodes.
pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

struct GradModeGuard(bool);

impl Drop for GradModeGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|c| c.set(self.0));
    }
}

fn set_grad_mode(enabled: bool) -> GradModeGuard {
    let prev = GRAD_ENABLED.with(|c| c.replace(enabled));
    GradModeGuard(prev)
}

/// Runs `f` without recording any graph nodes.
pub fn no_grad<T>(f: impl FnOnce() -> T) -> T {
    let _guard = set_grad_mode(false);
    f()
}

pub(crate) type BackwardFn = Box<dyn Fn(&Tensor) -> Result<Vec<Option<Tensor>>>>;

struct Node {
    op: &'static str,
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    node: Option<Node>,
}

/// Reference-counted handle to a dense row-major `f64` array.
///
/// Cloning is cheap and shares storage. A scalar has shape `[]`.
#[derive(Clone)]
pub struct Tensor(Rc<Inner>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.0.data.borrow();
        let preview: Vec<f64> = data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("op", &self.0.node.as_ref().map(|n| n.op))
            .field("data", &preview)
            .finish()
    }
}

impl Tensor {
    fn build(data: Vec<f64>, shape: Vec<usize>, requires_grad: bool, node: Option<Node>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Tensor(Rc::new(Inner {
            id: next_id(),
            shape,
            data: RefCell::new(data),
            requires_grad,
            grad: RefCell::new(None),
            node,
        }))
    }

    /// Creates a constant tensor, validating `product(shape) == data.len()`.
    pub fn new(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        Self::leaf(data, shape, false)
    }

    /// Creates a leaf tensor, optionally tracked for gradients.
    pub fn leaf(data: Vec<f64>, shape: &[usize], requires_grad: bool) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {numel} elements, got {}",
                data.len()
            )));
        }
        Ok(Self::build(data, shape.to_vec(), requires_grad, None))
    }

    /// A trainable parameter.
    pub fn parameter(data: Vec<f64>, shape: &[usize]) -> Result<Self> {
        Self::leaf(data, shape, true)
    }

    pub fn scalar(v: f64) -> Self {
        Self::build(vec![v], Vec::new(), false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self::build(vec![v; n], shape.to_vec(), false, None)
    }

    /// Internal constructor for operation outputs. Records a node only if
    /// gradient mode is on and some parent requires gradients.
    pub(crate) fn from_op(
        op: &'static str,
        data: Vec<f64>,
        shape: Vec<usize>,
        parents: &[&Tensor],
        backward: impl Fn(&Tensor) -> Result<Vec<Option<Tensor>>> + 'static,
    ) -> Self {
        let track = grad_enabled() && parents.iter().any(|p| p.requires_grad());
        if !track {
            return Self::build(data, shape, false, None);
        }
        let node = Node {
            op,
            parents: parents.iter().map(|&p| p.clone()).collect(),
            backward: Box::new(backward),
        };
        Self::build(data, shape, true, Some(node))
    }

    pub(crate) fn raw(data: Vec<f64>, shape: Vec<usize>) -> Self {
        Self::build(data, shape, false, None)
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn ndim(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.node.is_none()
    }

    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.0.data.borrow()
    }

    /// Mutable access for in-place parameter updates. Mutating a tensor that
    /// is still referenced by a live graph invalidates that graph's gradients.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.0.data.borrow_mut()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.data.borrow().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        let d = self.0.data.borrow();
        assert_eq!(d.len(), 1, "item() on tensor of shape {:?}", self.0.shape);
        d[0]
    }

    /// A detached copy of the accumulated gradient, if any.
    pub fn grad(&self) -> Option<Tensor> {
        self.0
            .grad
            .borrow()
            .as_ref()
            .map(|g| Tensor::raw(g.clone(), self.0.shape.clone()))
    }

    pub fn grad_data(&self) -> Ref<'_, Option<Vec<f64>>> {
        self.0.grad.borrow()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.borrow_mut() = None;
    }

    /// A new leaf sharing no graph history (data is copied).
    pub fn detach(&self) -> Tensor {
        Tensor::raw(self.to_vec(), self.0.shape.clone())
    }

    pub fn all_finite(&self) -> bool {
        self.0.data.borrow().iter().all(|v| v.is_finite())
    }

    fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.0.grad.borrow_mut();
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Reverse-mode differentiation from a scalar. Adds into `grad` of every
    /// tensor on the path that requires gradients; repeated calls accumulate.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::Autograd(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        if !self.requires_grad() {
            return Err(Error::Autograd(
                "backward on a tensor that is not part of a recorded computation".into(),
            ));
        }
        let seed = Tensor::raw(vec![1.0], self.shape().to_vec());
        let grads = no_grad(|| propagate(self, seed))?;
        for (t, g) in grads.into_values() {
            t.accumulate_grad(&g.data());
        }
        Ok(())
    }
}

/// Gradients of scalar `output` w.r.t. `inputs`, without touching any
/// accumulated `grad`. With `create_graph` the returned gradients are
/// themselves differentiable.
pub fn grad(output: &Tensor, inputs: &[&Tensor], create_graph: bool) -> Result<Vec<Tensor>> {
    if output.numel() != 1 {
        return Err(Error::Autograd(format!(
            "grad needs a scalar output, got shape {:?}",
            output.shape()
        )));
    }
    let seed = Tensor::raw(vec![1.0], output.shape().to_vec());
    let mut grads = if output.requires_grad() {
        let _guard = set_grad_mode(create_graph);
        propagate(output, seed)?
    } else {
        HashMap::new()
    };
    Ok(inputs
        .iter()
        .map(|x| match grads.remove(&x.id()) {
            Some((_, g)) => g,
            None => Tensor::zeros(x.shape()),
        })
        .collect())
}

/// Core reverse sweep. Node ids increase with creation time, so visiting in
/// descending id order is a valid reverse topological order.
fn propagate(root: &Tensor, seed: Tensor) -> Result<HashMap<u64, (Tensor, Tensor)>> {
    let mut order: Vec<Tensor> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![root.clone()];
    while let Some(t) = stack.pop() {
        if !t.requires_grad() || !seen.insert(t.id()) {
            continue;
        }
        if let Some(node) = &t.0.node {
            stack.extend(node.parents.iter().cloned());
        }
        order.push(t);
    }
    order.sort_by_key(|t| std::cmp::Reverse(t.id()));

    let mut pending: HashMap<u64, Tensor> = HashMap::new();
    pending.insert(root.id(), seed);
    let mut out = HashMap::new();
    for t in order {
        let Some(g) = pending.remove(&t.id()) else {
            continue;
        };
        if let Some(node) = &t.0.node {
            let parent_grads = (node.backward)(&g)?;
            debug_assert_eq!(parent_grads.len(), node.parents.len(), "op {}", node.op);
            for (p, pg) in node.parents.iter().zip(parent_grads) {
                let Some(pg) = pg else { continue };
                if !p.requires_grad() {
                    continue;
                }
                if pg.shape() != p.shape() {
                    return Err(Error::Autograd(format!(
                        "op `{}` produced grad of shape {:?} for parent of shape {:?}",
                        node.op,
                        pg.shape(),
                        p.shape()
                    )));
                }
                let merged = match pending.remove(&p.id()) {
                    Some(acc) => acc.add(&pg)?,
                    None => pg,
                };
                pending.insert(p.id(), merged);
            }
        }
        out.insert(t.id(), (t, g));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shape() {
        assert!(Tensor::new(vec![1.0, 2.0], &[3]).is_err());
    }

    #[test]
    fn square_sum_gradient() {
        let x = Tensor::parameter(vec![3.0], &[1]).unwrap();
        let loss = x.mul(&x).unwrap().sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap().to_vec(), vec![6.0]);
    }

    #[test]
    fn independent_loss_gives_zero_grad() {
        let x = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        let y = Tensor::parameter(vec![4.0], &[1]).unwrap();
        let g = grad(&y.mul(&y).unwrap().sum(), &[&x], false).unwrap();
        assert_eq!(g[0].to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn backward_accumulates() {
        let x = Tensor::parameter(vec![2.0], &[1]).unwrap();
        for _ in 0..2 {
            x.mul_scalar(5.0).sum().backward().unwrap();
        }
        assert_eq!(x.grad().unwrap().to_vec(), vec![10.0]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::parameter(vec![1.0, 2.0], &[2]).unwrap();
        let y = x.mul_scalar(2.0);
        assert!(matches!(y.backward(), Err(Error::Autograd(_))));
    }

    #[test]
    fn second_order_through_create_graph() {
        // d/dx (d/dx x^3) = 6x
        let x = Tensor::parameter(vec![2.0], &[1]).unwrap();
        let y = x.mul(&x).unwrap().mul(&x).unwrap().sum();
        let g = grad(&y, &[&x], true).unwrap();
        g[0].sum().backward().unwrap();
        assert!((x.grad().unwrap().item() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn no_grad_records_nothing() {
        let x = Tensor::parameter(vec![1.0], &[1]).unwrap();
        let y = no_grad(|| x.mul_scalar(2.0));
        assert!(!y.requires_grad());
        assert!(grad_enabled());
    }
}
