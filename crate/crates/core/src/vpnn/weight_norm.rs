//! Weight normalization: `w = g · v / ‖v‖`, one gain per output channel.

use crate::error::{Error, Result};

/// Effective weight of a single output channel.
pub fn weight_norm_effective(v: &[f64], g: f64) -> Result<Vec<f64>> {
    let mut w = vec![0.0; v.len()];
    effective_into(v, &[g], v.len(), &mut w)?;
    Ok(w)
}

/// Fills `w` from `v` (rows of `per` values, one per gain) and returns the
/// row norms.
pub(crate) fn effective_into(v: &[f64], g: &[f64], per: usize, w: &mut [f64]) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(g.len());
    for (o, &go) in g.iter().enumerate() {
        let row = &v[o * per..(o + 1) * per];
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm(o));
        }
        let s = go / n;
        for (wi, vi) in w[o * per..(o + 1) * per].iter_mut().zip(row) {
            *wi = s * vi;
        }
        norms.push(n);
    }
    Ok(norms)
}

/// Maps gradients with respect to the effective weight onto the direction and
/// gain: `dg = dw·v̂`, `dv = (g/‖v‖)(dw − dg·v̂)`. `dw` is overwritten by `dv`.
pub(crate) fn backprop(v: &[f64], g: &[f64], norms: &[f64], per: usize, dw: &mut [f64], dg: &mut [f64]) {
    for o in 0..g.len() {
        let row = &v[o * per..(o + 1) * per];
        let d = &mut dw[o * per..(o + 1) * per];
        let n = norms[o];
        let gain_grad: f64 = d.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() / n;
        let s = g[o] / n;
        for (di, vi) in d.iter_mut().zip(row) {
            *di = s * (*di - gain_grad * vi / n);
        }
        dg[o] += gain_grad;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(weight_norm_effective(&[3.0, 4.0], 10.0).unwrap(), vec![6.0, 8.0]);
        let v = [0.3, -1.2, 2.0];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let w = weight_norm_effective(&v, n).unwrap();
        for (a, b) in w.iter().zip(v) {
            assert!((a - b).abs() < 1e-15);
        }
        let w2 = weight_norm_effective(&[0.9, -3.6, 6.0], n).unwrap();
        for (a, b) in w.iter().zip(w2) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(weight_norm_effective(&[0.0, 0.0], 1.0), Err(Error::ZeroNorm(0))));
    }
}
