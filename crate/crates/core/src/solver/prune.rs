//! Removal of alpha vectors that are nowhere strictly best.
//!
//! A cheap pointwise-dominance sweep runs first, then Lark's filter: a
//! candidate is kept only if a linear program finds a belief where it beats
//! every vector kept so far by more than the tolerance.

use std::cmp::Ordering;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::AlphaVector;

/// Bound on the LP's margin variable; values are O(1/(1-γ)).
const MARGIN_BOUND: f64 = 1e6;

pub fn dot(b: &[f64], v: &[f64]) -> f64 {
    b.iter().zip(v).map(|(x, y)| x * y).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// `u` covers `w` when it is at least as large everywhere up to `eps`.
fn covers(u: &[f64], w: &[f64], eps: f64) -> bool {
    u.iter().zip(w).all(|(a, b)| *a >= *b - eps)
}

/// Drops vectors pointwise dominated by another vector in the set.
pub fn prune_pointwise(vectors: Vec<AlphaVector>, eps: f64) -> Vec<AlphaVector> {
    let mut kept: Vec<AlphaVector> = Vec::with_capacity(vectors.len());
    for w in vectors {
        if kept.iter().any(|u| covers(&u.values, &w.values, eps)) {
            continue;
        }
        kept.retain(|u| !covers(&w.values, &u.values, eps));
        kept.push(w);
    }
    kept
}

/// Belief at which `phi` exceeds every vector in `against` by more than
/// `eps`, if one exists. `Err` when the LP itself fails.
fn find_witness(phi: &[f64], against: &[AlphaVector], eps: f64) -> Result<Option<Vec<f64>>, ()> {
    let n = phi.len();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let belief: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let margin = lp.add_var(1.0, (-MARGIN_BOUND, MARGIN_BOUND));
    for u in against {
        let mut terms: Vec<_> = belief
            .iter()
            .zip(phi.iter().zip(&u.values))
            .filter_map(|(&v, (p, q))| {
                let c = p - q;
                (c != 0.0).then_some((v, c))
            })
            .collect();
        terms.push((margin, -1.0));
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, 0.0);
    }
    let simplex: Vec<_> = belief.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(simplex.as_slice(), ComparisonOp::Eq, 1.0);
    let solution = lp
        .solve()
        .map_err(|_| ())?
        .into_solution()
        .map_err(|_| ())?;
    if solution.var_value(margin) > eps {
        let b: Vec<f64> = belief.iter().map(|&v| solution.var_value(v).max(0.0)).collect();
        let total: f64 = b.iter().sum();
        Ok(Some(b.into_iter().map(|x| x / total).collect()))
    } else {
        Ok(None)
    }
}

fn best_at(b: &[f64], vectors: &[AlphaVector]) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (i, v) in vectors.iter().enumerate() {
        let val = dot(b, &v.values);
        let better = match val.partial_cmp(&best_val) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => lex_cmp(&v.values, &vectors[best].values) == Ordering::Greater,
            _ => false,
        };
        if better {
            best = i;
            best_val = val;
        }
    }
    best
}

/// Minimal subset with the same upper surface as `vectors` (up to `eps`).
pub fn prune_dominated(vectors: Vec<AlphaVector>, eps: f64) -> Vec<AlphaVector> {
    let mut pending = prune_pointwise(vectors, eps);
    if pending.len() <= 1 {
        return pending;
    }
    let n = pending[0].values.len();
    let mut kept: Vec<AlphaVector> = Vec::new();

    // the best vector at each simplex corner is certainly part of the surface
    for s in 0..n {
        if pending.is_empty() {
            break;
        }
        let mut corner = vec![0.0; n];
        corner[s] = 1.0;
        let i = best_at(&corner, &pending);
        let top = pending[i].values[s];
        if kept.iter().all(|k| k.values[s] < top - eps) {
            kept.push(pending.swap_remove(i));
        }
    }

    while let Some(phi) = pending.pop() {
        match find_witness(&phi.values, &kept, eps) {
            Ok(None) => {}
            Ok(Some(b)) => {
                pending.push(phi);
                let i = best_at(&b, &pending);
                kept.push(pending.swap_remove(i));
            }
            // degenerate LP: keep the candidate rather than risk losing surface
            Err(()) => kept.push(phi),
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn av(values: &[f64]) -> AlphaVector {
        AlphaVector {
            values: values.to_vec(),
            action: 0,
        }
    }

    fn sorted(mut v: Vec<AlphaVector>) -> Vec<Vec<f64>> {
        v.sort_by(|a, b| lex_cmp(&a.values, &b.values));
        v.into_iter().map(|a| a.values).collect()
    }

    #[test]
    fn pointwise_dominated_dropped() {
        let out = prune_dominated(vec![av(&[1.0, 1.0]), av(&[0.5, 0.9])], 1e-12);
        assert_eq!(sorted(out), vec![vec![1.0, 1.0]]);
    }

    #[test]
    fn corners_both_kept() {
        let out = prune_dominated(vec![av(&[1.0, 0.0]), av(&[0.0, 1.0])], 1e-12);
        assert_eq!(sorted(out), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn interior_vector_below_surface_removed() {
        let input = vec![av(&[1.0, 0.0]), av(&[0.0, 1.0]), av(&[0.4, 0.4])];
        // brute-force: on a fine grid of the 1-simplex the middle vector never attains the max
        for k in 0..=10_000 {
            let p = k as f64 / 10_000.0;
            let b = [p, 1.0 - p];
            assert!(dot(&b, &[0.4, 0.4]) < dot(&b, &[1.0, 0.0]).max(dot(&b, &[0.0, 1.0])));
        }
        let out = prune_dominated(input, 1e-12);
        assert_eq!(sorted(out), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn interior_vector_on_surface_kept() {
        let input = vec![av(&[1.0, 0.0]), av(&[0.0, 1.0]), av(&[0.6, 0.6])];
        let out = prune_dominated(input, 1e-12);
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn duplicates_collapse() {
        let input = vec![av(&[0.3, 0.7, 0.1]), av(&[0.3, 0.7, 0.1]), av(&[0.3, 0.7, 0.1])];
        assert_eq!(prune_dominated(input, 1e-12).len(), 1);
    }
}
