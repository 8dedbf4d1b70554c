//! One-dimensional dilated causal convolution over time-major sequences.
//!
//! A sequence of `len` steps with `c` channels is stored row by row:
//! element `(e, i)` lives at `e * c + i`. Filters are stored output-major as
//! `[o][u][i]` so that each (output channel, tap) pair is a contiguous row
//! over input channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of one convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvDims {
    pub cin: usize,
    pub cout: usize,
    /// Kernel size `q`.
    pub kernel: usize,
    /// Dilation `h`.
    pub dilation: usize,
}

impl ConvDims {
    pub fn weight_len(&self) -> usize {
        self.cout * self.kernel * self.cin
    }

    /// Weights feeding one output channel.
    pub fn fan_in(&self) -> usize {
        self.kernel * self.cin
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y[e][o] = b[o] + Σ_u Σ_i w[o][u][i] · x[e − h·u][i]`, taps reaching before
/// the start of the sequence read zero.
pub(crate) fn forward(x: &[f64], len: usize, d: &ConvDims, w: &[f64], b: &[f64], y: &mut [f64]) {
    let ConvDims {
        cin,
        cout,
        kernel,
        dilation,
    } = *d;
    for e in 0..len {
        let yr = &mut y[e * cout..(e + 1) * cout];
        yr.copy_from_slice(b);
        for u in 0..kernel {
            let Some(src) = e.checked_sub(dilation * u) else {
                break;
            };
            let xr = &x[src * cin..(src + 1) * cin];
            for (o, yo) in yr.iter_mut().enumerate() {
                *yo += dot(&w[(o * kernel + u) * cin..][..cin], xr);
            }
        }
    }
}

/// Accumulates the input, weight and bias gradients of [`forward`] given the
/// output gradient `dy`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    x: &[f64],
    len: usize,
    d: &ConvDims,
    w: &[f64],
    dy: &[f64],
    dx: &mut [f64],
    dw: &mut [f64],
    db: &mut [f64],
) {
    let ConvDims {
        cin,
        cout,
        kernel,
        dilation,
    } = *d;
    for e in 0..len {
        let dyr = &dy[e * cout..(e + 1) * cout];
        for (acc, g) in db.iter_mut().zip(dyr) {
            *acc += g;
        }
        for u in 0..kernel {
            let Some(src) = e.checked_sub(dilation * u) else {
                break;
            };
            let xr = &x[src * cin..(src + 1) * cin];
            let dxr = &mut dx[src * cin..(src + 1) * cin];
            for (o, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let off = (o * kernel + u) * cin;
                let wr = &w[off..off + cin];
                let dwr = &mut dw[off..off + cin];
                for i in 0..cin {
                    dwr[i] += g * xr[i];
                    dxr[i] += g * wr[i];
                }
            }
        }
    }
}

/// Checked dilated causal convolution of a `len × cin` sequence `z` with a
/// filter laid out `[o][u][i]` and one bias per output channel. The output has
/// the same length as the input.
pub fn dilated_causal_conv(z: &[f64], len: usize, dims: ConvDims, filter: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    if dims.kernel == 0 || dims.dilation == 0 {
        return Err(Error::InvalidParams("kernel size and dilation must be positive".into()));
    }
    let check = |what: &str, expected: usize, actual: usize| {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Shape {
                expected: format!("{what} of {expected} values"),
                actual: format!("{actual}"),
            })
        }
    };
    check("sequence", len * dims.cin, z.len())?;
    check("filter", dims.weight_len(), filter.len())?;
    check("bias", dims.cout, bias.len())?;
    let mut y = vec![0.0; len * dims.cout];
    forward(z, len, &dims, filter, bias, &mut y);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(z: &[f64], f: &[f64], h: usize) -> Vec<f64> {
        let dims = ConvDims {
            cin: 1,
            cout: 1,
            kernel: f.len(),
            dilation: h,
        };
        dilated_causal_conv(z, z.len(), dims, f, &[0.0]).unwrap()
    }

    #[test]
    fn hand_evaluated_cases() {
        assert_eq!(scalar(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0], 1), vec![1.0, 3.0, 5.0, 7.0]);
        assert_eq!(scalar(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        for h in 1..5 {
            assert_eq!(scalar(&[1.0, -2.0, 3.5, 4.0], &[1.0], h), vec![1.0, -2.0, 3.5, 4.0]);
        }
    }

    #[test]
    fn shape_errors() {
        let dims = ConvDims {
            cin: 2,
            cout: 1,
            kernel: 2,
            dilation: 1,
        };
        assert!(dilated_causal_conv(&[1.0; 3], 2, dims, &[0.0; 4], &[0.0]).is_err());
        assert!(dilated_causal_conv(&[1.0; 4], 2, dims, &[0.0; 3], &[0.0]).is_err());
    }
}
