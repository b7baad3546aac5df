use super::graph::{Graph, NodeId};
use super::params::{Init, ParamSpec, ParamStore};
use crate::error::{Error, Result};

/// Graph handles for one LSTM direction. Gate rows are ordered
/// input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmParams {
    /// `[4H, input]`
    pub w_ih: NodeId,
    /// `[4H, H]`
    pub w_hh: NodeId,
    /// `[4H]`
    pub bias: NodeId,
    pub hidden: usize,
}

impl LstmParams {
    pub fn specs(prefix: &str, input: usize, hidden: usize) -> Vec<ParamSpec> {
        vec![
            ParamSpec::new(format!("{prefix}.w_ih"), vec![4 * hidden, input], Init::Glorot),
            ParamSpec::new(format!("{prefix}.w_hh"), vec![4 * hidden, hidden], Init::Glorot),
            ParamSpec::new(format!("{prefix}.bias"), vec![4 * hidden], Init::Zeros),
        ]
    }

    pub fn bind(g: &mut Graph, store: &ParamStore, prefix: &str) -> Result<Self> {
        let w_ih = store.node(g, &format!("{prefix}.w_ih"))?;
        let w_hh = store.node(g, &format!("{prefix}.w_hh"))?;
        let bias = store.node(g, &format!("{prefix}.bias"))?;
        let (rows, cols) = g.shape(w_hh);
        if rows != 4 * cols || g.shape(w_ih).0 != rows || g.shape(bias) != (1, rows) {
            return Err(Error::shape(
                "lstm params",
                format!(
                    "{prefix}: w_ih {:?}, w_hh {:?}, bias {:?}",
                    g.shape(w_ih),
                    g.shape(w_hh),
                    g.shape(bias)
                ),
            ));
        }
        Ok(LstmParams {
            w_ih,
            w_hh,
            bias,
            hidden: cols,
        })
    }

    /// `x · W_ihᵀ + b` for every row of `x`; lets a sequence share one
    /// input projection across steps.
    pub fn project_inputs(&self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        if g.shape(x).1 != g.shape(self.w_ih).1 {
            return Err(Error::shape(
                "lstm input",
                format!("input width {} vs w_ih {:?}", g.shape(x).1, g.shape(self.w_ih)),
            ));
        }
        let proj = g.matmul_t(x, self.w_ih)?;
        g.add_row(proj, self.bias)
    }

    /// One step from an already projected input row.
    pub fn step_projected(
        &self,
        g: &mut Graph,
        x_proj: NodeId,
        h: NodeId,
        c: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let hd = self.hidden;
        if g.shape(h) != (1, hd) || g.shape(c) != (1, hd) || g.shape(x_proj) != (1, 4 * hd) {
            return Err(Error::shape(
                "lstm_cell_step",
                format!(
                    "h {:?}, c {:?}, projected x {:?} for hidden {hd}",
                    g.shape(h),
                    g.shape(c),
                    g.shape(x_proj)
                ),
            ));
        }
        let rec = g.matmul_t(h, self.w_hh)?;
        let gates = g.add(x_proj, rec)?;
        let i = g.slice_cols(gates, 0, hd)?;
        let f = g.slice_cols(gates, hd, hd)?;
        let cand = g.slice_cols(gates, 2 * hd, hd)?;
        let o = g.slice_cols(gates, 3 * hd, hd)?;
        let i = g.sigmoid(i)?;
        let f = g.sigmoid(f)?;
        let cand = g.tanh(cand)?;
        let o = g.sigmoid(o)?;
        let keep = g.mul(f, c)?;
        let write = g.mul(i, cand)?;
        let c_next = g.add(keep, write)?;
        let squashed = g.tanh(c_next)?;
        let h_next = g.mul(o, squashed)?;
        Ok((h_next, c_next))
    }
}

/// Standard LSTM cell: returns `(h', c')` for input row `x`.
pub fn lstm_cell_step(
    g: &mut Graph,
    x: NodeId,
    h: NodeId,
    c: NodeId,
    params: &LstmParams,
) -> Result<(NodeId, NodeId)> {
    if g.shape(x).0 != 1 {
        return Err(Error::shape("lstm_cell_step", format!("x must be a row, got {:?}", g.shape(x))));
    }
    let proj = params.project_inputs(g, x)?;
    params.step_projected(g, proj, h, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_core::grad_check;
    use ndarray::{array, Array2};

    fn zero_cell(input: usize, hidden: usize) -> (Graph, LstmParams) {
        let specs: Vec<ParamSpec> = LstmParams::specs("cell", input, hidden)
            .into_iter()
            .map(|mut s| {
                s.init = Init::Zeros;
                s
            })
            .collect();
        let store = ParamStore::init(&specs, 0).unwrap();
        let mut g = Graph::new();
        let p = LstmParams::bind(&mut g, &store, "cell").unwrap();
        (g, p)
    }

    #[test]
    fn zero_params_zero_state() {
        let (mut g, p) = zero_cell(2, 1);
        let x = g.row(&[0.3, -0.2]).unwrap();
        let h = g.row(&[0.0]).unwrap();
        let c = g.row(&[0.0]).unwrap();
        let (h2, c2) = lstm_cell_step(&mut g, x, h, c, &p).unwrap();
        assert_eq!(g.value(h2), &array![[0.0]]);
        assert_eq!(g.value(c2), &array![[0.0]]);
    }

    #[test]
    fn zero_params_unit_cell() {
        let (mut g, p) = zero_cell(2, 1);
        let x = g.row(&[1.0, 1.0]).unwrap();
        let h = g.row(&[0.0]).unwrap();
        let c = g.row(&[1.0]).unwrap();
        let (h2, c2) = lstm_cell_step(&mut g, x, h, c, &p).unwrap();
        assert!((g.scalar(c2) - 0.5).abs() < 1e-12);
        assert!((g.scalar(h2) - 0.23106).abs() < 1e-4);
        // hand value: 0.5 · tanh(0.5)
        assert!((g.scalar(h2) - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn deterministic_and_dimension_checked() {
        let specs = LstmParams::specs("cell", 3, 2);
        let store = ParamStore::init(&specs, 11).unwrap();
        let run = || {
            let mut g = Graph::new();
            let p = LstmParams::bind(&mut g, &store, "cell").unwrap();
            let x = g.row(&[0.1, 0.2, 0.3]).unwrap();
            let h = g.row(&[0.5, -0.5]).unwrap();
            let c = g.row(&[0.2, 0.1]).unwrap();
            let (h2, c2) = lstm_cell_step(&mut g, x, h, c, &p).unwrap();
            (g.value(h2).clone(), g.value(c2).clone())
        };
        assert_eq!(run(), run());

        let mut g = Graph::new();
        let p = LstmParams::bind(&mut g, &store, "cell").unwrap();
        let x = g.row(&[0.1, 0.2]).unwrap();
        let h = g.row(&[0.5, -0.5]).unwrap();
        let c = g.row(&[0.2, 0.1]).unwrap();
        assert!(lstm_cell_step(&mut g, x, h, c, &p).is_err());
        let x = g.row(&[0.1, 0.2, 0.3]).unwrap();
        let h = g.row(&[0.5]).unwrap();
        assert!(lstm_cell_step(&mut g, x, h, c, &p).is_err());
    }

    #[test]
    fn cell_gradient_matches_finite_differences() {
        let specs = LstmParams::specs("cell", 3, 2);
        let store = ParamStore::init(&specs, 5).unwrap();
        let report = grad_check(
            |g, x| {
                let p = LstmParams::bind(g, &store, "cell")?;
                let h = g.row(&[0.3, -0.1])?;
                let c = g.row(&[0.6, 0.2])?;
                let (h2, c2) = lstm_cell_step(g, x, h, c, &p)?;
                let both = g.concat_cols(&[h2, c2])?;
                let w = g.constant(Array2::from_shape_vec((1, 4), vec![1.0, -2.0, 0.5, 1.5]).unwrap())?;
                let wsum = g.mul(both, w)?;
                g.sum(wsum)
            },
            &[0.4, -0.7, 1.1],
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }
}
