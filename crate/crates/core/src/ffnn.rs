use crate::error::{Error, Result};
use crate::tensor_core::{Graph, Init, NodeId, ParamSpec, ParamStore};

/// `depth` ReLU layers followed by a bias-free scoring row.
#[derive(Clone, Debug)]
pub struct Ffnn {
    hidden: Vec<(NodeId, NodeId)>,
    out: NodeId,
}

impl Ffnn {
    pub fn specs(prefix: &str, input: usize, hidden: usize, depth: usize) -> Vec<ParamSpec> {
        let mut specs = Vec::with_capacity(2 * depth + 1);
        let mut width = input;
        for layer in 0..depth {
            specs.push(ParamSpec::new(format!("{prefix}.l{layer}.weight"), vec![hidden, width], Init::Glorot));
            specs.push(ParamSpec::new(format!("{prefix}.l{layer}.bias"), vec![hidden], Init::Zeros));
            width = hidden;
        }
        specs.push(ParamSpec::new(format!("{prefix}.out"), vec![1, width], Init::Glorot));
        specs
    }

    pub fn bind(g: &mut Graph, store: &ParamStore, prefix: &str, depth: usize) -> Result<Self> {
        let hidden = (0..depth)
            .map(|layer| {
                Ok((
                    store.node(g, &format!("{prefix}.l{layer}.weight"))?,
                    store.node(g, &format!("{prefix}.l{layer}.bias"))?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let out = store.node(g, &format!("{prefix}.out"))?;
        Ok(Ffnn { hidden, out })
    }

    pub fn input_width(&self, g: &Graph) -> usize {
        match self.hidden.first() {
            Some(&(w, _)) => g.shape(w).1,
            None => g.shape(self.out).1,
        }
    }

    /// One score per row of `x`, as `[n, 1]`.
    pub fn forward(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let expected = self.input_width(g);
        if g.shape(x).1 != expected {
            return Err(Error::shape(
                "ffnn",
                format!("input width {} but the network expects {expected}", g.shape(x).1),
            ));
        }
        let mut h = x;
        for &(w, b) in &self.hidden {
            let z = g.matmul_t(h, w)?;
            let z = g.add_row(z, b)?;
            h = g.relu(z)?;
        }
        g.matmul_t(h, self.out)
    }
}
