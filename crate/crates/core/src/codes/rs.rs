use crate::gf::{Gf256, Matrix};

use super::CodeError;

/// Systematic Reed-Solomon generator `V * V_top^-1` where `V[i][j] = i^j`.
/// Every k rows of V are invertible, and right-multiplying by an invertible
/// matrix keeps that property.
pub(crate) fn systematic_vandermonde(n: usize, k: usize) -> Result<Matrix, CodeError> {
    let mut v = Matrix::zeros(n, k);
    for i in 0..n {
        let x = Gf256(i as u8);
        for j in 0..k {
            v[(i, j)] = x.pow(j as u32);
        }
    }
    let top: Vec<usize> = (0..k).collect();
    let top_inv = v.select_rows(&top).invert()?;
    Ok(v.mul(&top_inv)?)
}
