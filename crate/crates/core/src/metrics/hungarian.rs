//! Maximum-weight one-to-one assignment on a dense rectangular matrix
//! (Kuhn–Munkres with row/column potentials, O(n²m)).

/// Returns `(total_weight, assignment)` where `assignment[r]` is the column
/// matched to row `r`, or `None` when there are more rows than columns and
/// the row stays unmatched.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<Option<usize>>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0.0, vec![None; rows]);
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| weights[r][c]).collect())
            .collect();
        let (total, by_col) = max_weight_assignment(&transposed);
        let mut assignment = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                assignment[r] = Some(c);
            }
        }
        return (total, assignment);
    }

    // minimise cost = -weight; 1-based indices with 0 as the virtual column
    let cost = |r: usize, c: usize| -weights[r - 1][c - 1];
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for r in 1..=n {
        owner[0] = r;
        let mut col = 0;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col] = true;
            let row = owner[col];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for c in 1..=m {
                if !used[c] {
                    let reduced = cost(row, c) - u[row] - v[c];
                    if reduced < min_to[c] {
                        min_to[c] = reduced;
                        way[c] = col;
                    }
                    if min_to[c] < delta {
                        delta = min_to[c];
                        next = c;
                    }
                }
            }
            for c in 0..=m {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    min_to[c] -= delta;
                }
            }
            col = next;
            if owner[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            owner[col] = owner[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; n];
    for c in 1..=m {
        if owner[c] != 0 {
            assignment[owner[c] - 1] = Some(c - 1);
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| weights[r][c]))
        .sum();
    (total, assignment)
}
