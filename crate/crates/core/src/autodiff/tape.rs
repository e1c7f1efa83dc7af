use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Receives the output adjoint, the parent values and the forward output,
/// and returns one adjoint per parent (`None` when a parent gets nothing).
pub(crate) type BackwardFn = Box<dyn Fn(&Tensor, &[&Tensor], &Tensor) -> Vec<Option<Tensor>>>;

struct Node {
    value: Rc<Tensor>,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    leaf: Option<String>,
    requires_grad: bool,
}

/// Operation record for one forward pass. Not `Sync`: a tape lives on the
/// thread that built it.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    pub(crate) tape: &'t Tape,
    pub(crate) id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.value().shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A trainable input. Its adjoint is accumulated under `name`.
    pub fn leaf(&self, name: impl Into<String>, value: Tensor) -> Var<'_> {
        self.push_node(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            leaf: Some(name.into()),
            requires_grad: true,
        })
    }

    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push_node(Node {
            value: Rc::new(value),
            parents: Vec::new(),
            backward: None,
            leaf: None,
            requires_grad: false,
        })
    }

    fn push_node(&self, node: Node) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Records an operation. The backward closure is dropped when no parent
    /// depends on a leaf, so constant subgraphs cost nothing on the way back.
    pub(crate) fn op(&self, value: Tensor, parents: &[Var<'_>], backward: BackwardFn) -> Var<'_> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|p| nodes[p.id].requires_grad)
        };
        self.push_node(Node {
            value: Rc::new(value),
            parents: parents.iter().map(|p| p.id).collect(),
            backward: requires_grad.then_some(backward),
            leaf: None,
            requires_grad,
        })
    }

    pub(crate) fn value_of(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse sweep from a scalar `loss`, in exact reverse recording order.
    /// Leaf adjoints are added to `grads`; every leaf on the tape gets an
    /// entry, zero when the loss does not depend on it.
    pub fn backward(&self, loss: Var<'_>, grads: &mut GradStore) -> Result<()> {
        let nodes = self.nodes.borrow();
        let seed = &nodes[loss.id].value;
        if seed.len() != 1 {
            return Err(Error::Precondition(format!(
                "backward needs a scalar loss, got shape {:?}",
                seed.shape()
            )));
        }
        let mut adj: Vec<Option<Tensor>> = (0..=loss.id).map(|_| None).collect();
        adj[loss.id] = Some(Tensor::new(seed.shape().to_vec(), vec![1.0])?);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            let Some(g) = adj[id].take() else { continue };
            if let Some(name) = &node.leaf {
                grads.accumulate(name, &g)?;
                continue;
            }
            let Some(back) = &node.backward else { continue };
            let parent_vals: Vec<&Tensor> = node.parents.iter().map(|&p| nodes[p].value.as_ref()).collect();
            let pgrads = back(&g, &parent_vals, &node.value);
            for (&p, pg) in node.parents.iter().zip(pgrads) {
                let Some(pg) = pg else { continue };
                if !nodes[p].requires_grad {
                    continue;
                }
                match &mut adj[p] {
                    Some(acc) => acc.add_assign(&pg)?,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        for node in nodes.iter() {
            if let Some(name) = &node.leaf {
                grads.ensure(name, node.value.rows(), node.value.cols());
            }
        }
        Ok(())
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value_of(self.id)
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        let v = self.value();
        (v.rows(), v.cols())
    }
}

/// Gradient accumulators keyed by parameter name. Repeated backward passes
/// add up until [`GradStore::zero`] is called.
#[derive(Clone, Debug, Default)]
pub struct GradStore {
    grads: BTreeMap<String, Tensor>,
}

impl GradStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn accumulate(&mut self, name: &str, g: &Tensor) -> Result<()> {
        match self.grads.get_mut(name) {
            Some(acc) => acc.add_assign(g),
            None => {
                self.grads.insert(name.to_string(), g.clone());
                Ok(())
            }
        }
    }

    fn ensure(&mut self, name: &str, rows: usize, cols: usize) {
        self.grads
            .entry(name.to_string())
            .or_insert_with(|| Tensor::zeros(rows, cols));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn zero(&mut self) {
        for g in self.grads.values_mut() {
            g.data_mut().fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.grads.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.grads.iter_mut()
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.values().map(Tensor::sq_norm).sum::<f64>().sqrt()
    }

    /// Rescales every gradient so the global norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let k = max_norm / norm;
            for g in self.grads.values_mut() {
                for x in g.data_mut() {
                    *x *= k;
                }
            }
        }
        norm
    }

    pub fn all_finite(&self) -> bool {
        self.grads.values().all(Tensor::all_finite)
    }
}
