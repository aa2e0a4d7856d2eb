//! Composite tensor-product quadrature on boxes.

use rayon::prelude::*;

/// One-dimensional base rule on a cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rule {
    /// One node at `lo + shift * q` (`shift = 0.5` is the midpoint rule).
    Shifted(f64),
    /// Two-point Gauss-Legendre.
    Gauss2,
}

/// Nodes and weights of the composite rule with cells of size `q`
/// anchored at `anchor` (cells are `[anchor + i q, anchor + (i+1) q]`),
/// restricted to the cells meeting `[lo, hi]`. Nodes outside `[lo, hi]` are
/// dropped.
pub fn composite(lo: f64, hi: f64, q: f64, anchor: f64, rule: Rule) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    if !(hi > lo) {
        return (xs, ws);
    }
    let i0 = ((lo - anchor) / q).floor() as i64;
    let i1 = ((hi - anchor) / q).ceil() as i64;
    let g = 0.5 / 3f64.sqrt();
    for i in i0..i1 {
        let a = anchor + i as f64 * q;
        let pts: &[(f64, f64)] = match rule {
            Rule::Shifted(s) => &[(s, 1.0)],
            Rule::Gauss2 => &[(0.5 - g, 0.5), (0.5 + g, 0.5)],
        };
        for &(s, w) in pts {
            let x = a + s * q;
            if x > lo && x < hi {
                xs.push(x);
                ws.push(w * q);
            }
        }
    }
    (xs, ws)
}

/// `sum_i w_i f(x_i)` over a 4D tensor grid; the outer axis is split across
/// workers and partial sums are added in index order.
pub fn tensor4(axes: &[(Vec<f64>, Vec<f64>); 4], f: impl Fn([f64; 4]) -> f64 + Sync) -> f64 {
    tensor4_n(axes, |p| [f(p)])[0]
}

/// [`tensor4`] for `N` integrands sharing the evaluation points.
pub fn tensor4_n<const N: usize>(
    axes: &[(Vec<f64>, Vec<f64>); 4],
    f: impl Fn([f64; 4]) -> [f64; N] + Sync,
) -> [f64; N] {
    let (t, wt) = &axes[0];
    let partial: Vec<[f64; N]> = (0..t.len())
        .into_par_iter()
        .map(|a| {
            let mut s = [0.0; N];
            for (b, &xb) in axes[1].0.iter().enumerate() {
                let wb = axes[1].1[b];
                let mut sb = [0.0; N];
                for (c, &xc) in axes[2].0.iter().enumerate() {
                    let wc = axes[2].1[c];
                    let mut sc = [0.0; N];
                    for (d, &xd) in axes[3].0.iter().enumerate() {
                        let v = f([t[a], xb, xc, xd]);
                        for n in 0..N {
                            sc[n] += axes[3].1[d] * v[n];
                        }
                    }
                    for n in 0..N {
                        sb[n] += wc * sc[n];
                    }
                }
                for n in 0..N {
                    s[n] += wb * sb[n];
                }
            }
            s.map(|v| wt[a] * v)
        })
        .collect();
    let mut out = [0.0; N];
    for p in partial {
        for n in 0..N {
            out[n] += p[n];
        }
    }
    out
}

/// 3D analogue of [`tensor4`].
pub fn tensor3(axes: &[(Vec<f64>, Vec<f64>); 3], f: impl Fn([f64; 3]) -> f64 + Sync) -> f64 {
    let (t, wt) = &axes[0];
    let partial: Vec<f64> = (0..t.len())
        .into_par_iter()
        .map(|a| {
            let mut s = 0.0;
            for (b, &xb) in axes[1].0.iter().enumerate() {
                let mut sb = 0.0;
                for (c, &xc) in axes[2].0.iter().enumerate() {
                    sb += axes[2].1[c] * f([t[a], xb, xc]);
                }
                s += axes[1].1[b] * sb;
            }
            wt[a] * s
        })
        .collect();
    partial.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss2_integrates_cubics_exactly() {
        let (xs, ws) = composite(0.0, 1.0, 0.25, 0.0, Rule::Gauss2);
        let s: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x * x * x).sum();
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn nodes_outside_the_interval_are_dropped() {
        let (xs, ws) = composite(0.1, 0.4, 0.25, 0.0, Rule::Shifted(0.5));
        assert_eq!(xs, vec![0.125, 0.375]);
        assert_eq!(ws, vec![0.25, 0.25]);
        assert!(composite(0.4, 0.4, 0.25, 0.0, Rule::Gauss2).0.is_empty());
    }

    #[test]
    fn tensor_rules_factor() {
        let ax = composite(0.0, 1.0, 0.5, 0.0, Rule::Gauss2);
        let axes = [ax.clone(), ax.clone(), ax.clone(), ax.clone()];
        let s = tensor4(&axes, |p| p[0] * p[1] * p[2] * p[3]);
        assert!((s - 0.0625).abs() < 1e-15);
        let both = tensor4_n(&axes, |p| [1.0, p[0]]);
        assert!((both[0] - 1.0).abs() < 1e-15 && (both[1] - 0.5).abs() < 1e-15);
        let s3 = tensor3(&[ax.clone(), ax.clone(), ax], |p| p[0] + p[1] + p[2]);
        assert!((s3 - 1.5).abs() < 1e-15);
    }
}
