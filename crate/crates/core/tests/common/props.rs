//! The five core invariants as reusable property checks, shared by the
//! proptest suites and the acceptance runner.

use std::collections::BTreeSet;

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use spanrefine::coref_scorer::decode_clusters;
use spanrefine::corpus::Span;
use spanrefine::mention_refine::{gate_fuse, gate_spec, pointer_refine, PointerParams};
use spanrefine::tensor_core::{softmax, Graph, Init, ParamSpec, ParamStore};
use spanrefine::training::{decode_checkpoint, encode_checkpoint};

pub type Check = Result<(), TestCaseError>;

pub fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-range..range, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn within(x: f64, a: f64, b: f64, tol: f64) -> bool {
    x >= a.min(b) - tol && x <= a.max(b) + tol
}

pub fn softmax_input() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-700.0f64..700.0, 1..40)
}

pub fn check_softmax(v: Vec<f64>) -> Check {
    let p = softmax(&v).unwrap();
    prop_assert!(p.iter().all(|x| *x >= 0.0));
    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);

    let mut g = Graph::new();
    let row = g.row(&v).unwrap();
    let s = g.softmax_rows(row).unwrap();
    let total: f64 = g.value(s).iter().sum();
    prop_assert!(g.value(s).iter().all(|x| *x >= 0.0));
    prop_assert!((total - 1.0).abs() <= 1e-9);
    Ok(())
}

/// `(spans [n, 4], mentions [3, 4], permutation of 0..n, parameter seed)`
pub fn pointer_input() -> impl Strategy<Value = (Array2<f64>, Array2<f64>, Vec<usize>, u64)> {
    (2usize..9)
        .prop_flat_map(|n| {
            (
                matrix(n, 4, 2.0),
                matrix(3, 4, 2.0),
                Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
                0u64..1000,
            )
        })
}

/// Permuting the candidate spans permutes α the same way, leaves m'
/// unchanged, and m' stays inside the per-coordinate span range.
pub fn check_pointer((spans, mentions, perm, seed): (Array2<f64>, Array2<f64>, Vec<usize>, u64)) -> Check {
    let (n, d) = spans.dim();
    let permuted = Array2::from_shape_fn((n, d), |(r, c)| spans[[perm[r], c]]);
    let store = ParamStore::init(&PointerParams::specs(d, 5), seed).unwrap();
    let run = |s: &Array2<f64>| {
        let mut g = Graph::new();
        let p = PointerParams::bind(&mut g, &store).unwrap();
        let m = g.constant(mentions.clone()).unwrap();
        let all = g.constant(s.clone()).unwrap();
        let (alpha, refined) = pointer_refine(&mut g, m, all, &p).unwrap();
        (g.value(alpha).clone(), g.value(refined).clone())
    };
    let (alpha, refined) = run(&spans);
    let (alpha_p, refined_p) = run(&permuted);
    for i in 0..mentions.nrows() {
        prop_assert!((alpha.row(i).sum() - 1.0).abs() <= 1e-9);
        for r in 0..n {
            prop_assert!((alpha_p[[i, r]] - alpha[[i, perm[r]]]).abs() <= 1e-9);
        }
        for c in 0..d {
            prop_assert!((refined_p[[i, c]] - refined[[i, c]]).abs() <= 1e-6);
            let col = spans.column(c);
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(within(refined[[i, c]], lo, hi, 1e-12));
        }
    }
    Ok(())
}

pub fn gate_input() -> impl Strategy<Value = (Array2<f64>, Array2<f64>, u64)> {
    (matrix(4, 5, 3.0), matrix(4, 5, 3.0), 0u64..1000)
}

/// Gate values sit strictly inside (0, 1) and m* lies between m and m'.
pub fn check_gate((base, refined, seed): (Array2<f64>, Array2<f64>, u64)) -> Check {
    let store = ParamStore::init(&[gate_spec(base.ncols())], seed).unwrap();
    let mut g = Graph::new();
    let w = store.node(&mut g, "gate.w").unwrap();
    let m = g.constant(base.clone()).unwrap();
    let mp = g.constant(refined.clone()).unwrap();
    let (gate, fused) = gate_fuse(&mut g, m, mp, w).unwrap();
    for ((r, c), f) in g.value(gate).indexed_iter() {
        prop_assert!(*f > 0.0 && *f < 1.0);
        prop_assert!(within(g.value(fused)[[r, c]], base[[r, c]], refined[[r, c]], 1e-12));
    }
    Ok(())
}

/// Per mention: whether it links, and a raw draw for which earlier mention.
pub fn decode_input() -> impl Strategy<Value = Vec<(bool, u32)>> {
    prop::collection::vec((any::<bool>(), any::<u32>()), 0..25)
}

/// Decoding yields disjoint clusters of size ≥ 2 that honour every link.
pub fn check_decode(raw: Vec<(bool, u32)>) -> Check {
    let mentions: Vec<Span> = (0..raw.len()).map(|i| Span::new(2 * i, 2 * i + 1)).collect();
    let choices: Vec<Option<usize>> = raw
        .iter()
        .enumerate()
        .map(|(i, &(link, j))| if link && i > 0 { Some(j as usize % i) } else { None })
        .collect();
    let out = decode_clusters(&mentions, &choices).unwrap();
    let mut seen = BTreeSet::new();
    for cluster in &out.clusters {
        prop_assert!(cluster.len() >= 2);
        for s in cluster {
            prop_assert!(seen.insert(*s), "mention {} in two clusters", s);
        }
    }
    for (i, c) in choices.iter().enumerate() {
        if let Some(j) = c {
            let together = out
                .clusters
                .iter()
                .any(|k| k.contains(&mentions[i]) && k.contains(&mentions[*j]));
            prop_assert!(together);
        }
    }
    Ok(())
}

/// Tensor shapes, init seed and a rescaling applied to the first tensor.
pub fn checkpoint_input() -> impl Strategy<Value = (Vec<Vec<usize>>, u64, f64)> {
    (
        prop::collection::vec(prop::collection::vec(1usize..5, 1..4), 1..6),
        any::<u64>(),
        1e-3f64..1e3,
    )
}

pub fn check_checkpoint((shapes, seed, scale): (Vec<Vec<usize>>, u64, f64)) -> Check {
    let specs: Vec<ParamSpec> = shapes
        .iter()
        .enumerate()
        .map(|(i, s)| ParamSpec::new(format!("t{i}.w"), s.clone(), Init::Glorot))
        .collect();
    let mut store = ParamStore::init(&specs, seed).unwrap();
    let first = store.get("t0.w").unwrap().mapv(|v| v * scale);
    store.set("t0.w", first).unwrap();
    let back = decode_checkpoint(&encode_checkpoint(&store).unwrap()).unwrap();
    prop_assert_eq!(back, store);
    Ok(())
}
