//! Product-matrix MSR construction for n = 2k.
//!
//! The product-matrix construction needs d = 2k' - 2 helpers. We build the
//! (n + 1, k + 1) code with d = 2k, so that alpha = k = n - k, and shorten it
//! by one systematic node whose content is pinned to zero. Any k real nodes
//! plus the zero node form k + 1 nodes of the parent code, so the shortened
//! code stays MDS. Repairing a real node uses the other n - 1 real nodes plus
//! the zero node, whose helper symbol is always zero and can be dropped.
//!
//! Node i of the parent code is described by an evaluation point x_i:
//! psi_i = (1, x_i, ..., x_i^(2a-1)), phi_i = (1, x_i, ..., x_i^(a-1)) and
//! lambda_i = x_i^a. The message matrix is [S1; S2] with S1, S2 symmetric a x a.
//! Node i stores psi_i^T [S1; S2]; its helper symbol for a failed node f is
//! that strip dotted with phi_f.

use crate::gf::{Gf256, Matrix};

use super::CodeError;

/// Enc/Rec coefficients for every real node.
#[derive(Debug, Clone)]
pub(crate) struct MsrRepair {
    /// phi_f per real node f (length r). Enc_{i,f} uses the same vector for every i.
    pub enc: Vec<Vec<Gf256>>,
    /// r x (n - 1) matrix per real node f; columns follow helpers in ascending order.
    pub rec: Vec<Matrix>,
}

pub(crate) struct MsrConstruction {
    pub generator: Matrix,
    pub repair: MsrRepair,
}

/// Picks parent evaluation points with distinct x and distinct x^alpha.
fn evaluation_points(count: usize, alpha: u32) -> Result<Vec<Gf256>, CodeError> {
    let mut points = Vec::with_capacity(count);
    let mut lambdas = Vec::with_capacity(count);
    for e in 0..255u32 {
        if points.len() == count {
            break;
        }
        let x = Gf256::exp(e);
        let l = x.pow(alpha);
        if !lambdas.contains(&l) {
            points.push(x);
            lambdas.push(l);
        }
    }
    if points.len() < count {
        return Err(CodeError::InvalidParams(format!(
            "GF(2^8) has too few points with distinct {alpha}-th powers for {count} nodes"
        )));
    }
    Ok(points)
}

fn powers(x: Gf256, len: usize) -> Vec<Gf256> {
    (0..len as u32).map(|e| x.pow(e)).collect()
}

/// Index of S(a, b) = S(b, a) among one symmetric block's free parameters
/// (row-major upper triangle).
fn upper_triangle_index(a: usize, b: usize, alpha: usize) -> usize {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo * alpha - lo * lo.saturating_sub(1) / 2 + (hi - lo)
}

pub(crate) fn build(n: usize, k: usize) -> Result<MsrConstruction, CodeError> {
    let alpha = k;
    let parent_n = n + 1;
    let parent_k = k + 1;
    let d = 2 * alpha;
    let block = alpha * (alpha + 1) / 2;
    let msg = 2 * block;
    debug_assert_eq!(msg, parent_k * alpha);

    let xs = evaluation_points(parent_n, alpha as u32)?;
    let psi: Vec<Vec<Gf256>> = xs.iter().map(|&x| powers(x, d)).collect();
    let phi: Vec<Vec<Gf256>> = xs.iter().map(|&x| powers(x, alpha)).collect();
    let lambda: Vec<Gf256> = xs.iter().map(|&x| x.pow(alpha as u32)).collect();

    // Parent generator: stored symbol (c, j) = sum_l psi_c[l] * M[l][j].
    let mut parent = Matrix::zeros(parent_n * alpha, msg);
    for c in 0..parent_n {
        for j in 0..alpha {
            let row = c * alpha + j;
            for l in 0..d {
                let (offset, a) = if l < alpha { (0, l) } else { (block, l - alpha) };
                let col = offset + upper_triangle_index(a, j, alpha);
                parent[(row, col)] += psi[c][l];
            }
        }
    }

    // Parent node order: real 0..k-1, the zero node at k, then real k..n-1.
    let zero_node = k;
    let to_parent = |i: usize| if i < k { i } else { i + 1 };

    let top_rows: Vec<usize> = (0..parent_k * alpha).collect();
    let top = parent.select_rows(&top_rows);
    let top_inv = top.invert().map_err(|_| {
        CodeError::InvalidParams("product-matrix systematic block is singular".into())
    })?;
    let systematic = parent.mul(&top_inv)?;

    let kept_rows: Vec<usize> = (0..n)
        .flat_map(|i| {
            let c = to_parent(i);
            (0..alpha).map(move |j| c * alpha + j)
        })
        .collect();
    let kept_cols: Vec<usize> = (0..parent_k)
        .filter(|&c| c != zero_node)
        .flat_map(|c| (0..alpha).map(move |j| c * alpha + j))
        .collect();
    let generator = systematic.select_rows(&kept_rows).select_cols(&kept_cols);

    let mut enc = Vec::with_capacity(n);
    let mut rec = Vec::with_capacity(n);
    for f in 0..n {
        let cf = to_parent(f);
        let helpers: Vec<usize> = (0..parent_n).filter(|&c| c != cf).collect();
        debug_assert_eq!(helpers.len(), d);
        let psi_rep = Matrix::from_vec(
            d,
            d,
            helpers.iter().flat_map(|&c| psi[c].iter().copied()).collect(),
        )?;
        let psi_inv = psi_rep.invert().map_err(|_| {
            CodeError::InvalidParams("repair matrix of the product-matrix code is singular".into())
        })?;
        // [I | lambda_f I] picks S1 phi_f + lambda_f S2 phi_f.
        let mut combine = Matrix::zeros(alpha, d);
        for j in 0..alpha {
            combine[(j, j)] = Gf256::ONE;
            combine[(j, alpha + j)] = lambda[cf];
        }
        let full = combine.mul(&psi_inv)?;
        let real_cols: Vec<usize> = helpers
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != zero_node)
            .map(|(pos, _)| pos)
            .collect();
        rec.push(full.select_cols(&real_cols));
        enc.push(phi[cf].clone());
    }

    Ok(MsrConstruction {
        generator,
        repair: MsrRepair { enc, rec },
    })
}
