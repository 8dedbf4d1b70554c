//! Dilated causal convolution on a single channel. Output at step t only
//! reads inputs at t, t - h, t - 2h, ...
//!
//!     cargo run --example dilated_conv

use ivid::vpnn::{dilated_causal_conv, ConvDims};

fn main() -> ivid::Result<()> {
    let z = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    for (kernel, dilation, filter) in [(2, 1, vec![1.0, 1.0]), (2, 2, vec![1.0, 1.0]), (3, 4, vec![1.0, 1.0, 1.0])] {
        let dims = ConvDims { cin: 1, cout: 1, kernel, dilation };
        let y = dilated_causal_conv(&z, z.len(), dims, &filter, &[0.0])?;
        println!("q={kernel} h={dilation}: {y:?}");
    }
    Ok(())
}
