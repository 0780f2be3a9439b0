//! Test-only oracles, independent of the DP implementation path.

use lgpoly::polymer::LatticePoint;
use lgpoly::WeightField;

/// Exhaustive path enumeration: sums the weight products over every
/// up-right path by depth-first search and combines the per-path log
/// weights with a slice log-sum-exp. Returns (log Z, path count).
pub fn enumerate_log_partition(
    field: &WeightField,
    start: LatticePoint,
    end: LatticePoint,
) -> (f64, usize) {
    assert!(start.leq(&end));
    let mut path_logs = Vec::new();
    let mut acc = 0.0;
    walk(field, start, end, &mut acc, &mut path_logs);
    let log_z = lgpoly::numeric::log_sum_exp(&path_logs);
    (log_z, path_logs.len())
}

fn walk(
    field: &WeightField,
    at: LatticePoint,
    end: LatticePoint,
    acc: &mut f64,
    out: &mut Vec<f64>,
) {
    let w = field.log_w(at.x, at.y);
    *acc += w;
    if at == end {
        out.push(*acc);
    } else {
        if at.x < end.x {
            walk(field, LatticePoint::new(at.x + 1, at.y), end, acc, out);
        }
        if at.y < end.y {
            walk(field, LatticePoint::new(at.x, at.y + 1), end, acc, out);
        }
    }
    *acc -= w;
}

#[allow(dead_code)]
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
