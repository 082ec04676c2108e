use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Default tolerance on the discarded spectral mass.
pub const TRUNCATION_EPS: f64 = 1e-12;

/// A low-rank factor together with the Frobenius norm of what was dropped.
#[derive(Debug, Clone)]
pub struct TruncatedFactor {
    pub factor: DMatrix<f64>,
    pub discarded_mass: f64,
}

impl TruncatedFactor {
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }
}

/// Number of leading entries of the non-increasing `values` to keep so that
/// the Frobenius norm of the rest is at most `eps`. Entries from
/// `first_forced_drop` on are always dropped.
fn keep_count(values: &[f64], eps: f64, first_forced_drop: usize) -> (usize, f64) {
    let forced: f64 = values[first_forced_drop..].iter().map(|v| v * v).sum();
    let mut tail = forced;
    let mut t = first_forced_drop;
    while t > 0 {
        let next = tail + values[t - 1] * values[t - 1];
        if next.sqrt() > eps {
            break;
        }
        tail = next;
        t -= 1;
    }
    (t, tail.sqrt())
}

/// Factor `Ŷ = W₁Σ₁^{1/2}` of a symmetric positive semidefinite `Y` such that
/// the dropped eigenvalues have Frobenius norm at most `eps`.
pub fn truncated_spd_factor(y: &DMatrix<f64>, eps: f64) -> Result<TruncatedFactor> {
    let k = y.nrows();
    if y.ncols() != k {
        return Err(Error::InvalidArgument("truncated_spd_factor needs a square matrix".into()));
    }
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("truncated_spd_factor input"));
    }
    if k == 0 {
        return Ok(TruncatedFactor { factor: DMatrix::zeros(0, 0), discarded_mass: 0.0 });
    }
    let sym = (y + y.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();

    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-10 * scale;
    if let Some(&min) = values.last() {
        if min < -tol {
            return Err(Error::Indefinite { value: min, tol });
        }
    }
    let positive = values.iter().take_while(|&&v| v > 0.0).count();
    let (t, discarded_mass) = keep_count(&values, eps, positive);

    let mut factor = DMatrix::zeros(k, t);
    for (c, &src) in order.iter().take(t).enumerate() {
        let v = eig.eigenvectors.column(src);
        let pivot = v.iter().fold(0.0f64, |p, &x| if x.abs() > p.abs() { x } else { p });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        factor.set_column(c, &(v * (sign * values[c].sqrt())));
    }
    Ok(TruncatedFactor { factor, discarded_mass })
}

/// Factors `Ŷ₁ = U₁Σ₁^{1/2}`, `Ŷ₂ = V₁Σ₁^{1/2}` with `‖Y − Ŷ₁Ŷ₂ᵀ‖_F <= eps`
/// from the truncated singular value decomposition.
pub fn truncated_svd_factor(y: &DMatrix<f64>, eps: f64) -> Result<(TruncatedFactor, TruncatedFactor)> {
    if y.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("truncated_svd_factor input"));
    }
    let (r, c) = y.shape();
    let empty = |rows| TruncatedFactor { factor: DMatrix::zeros(rows, 0), discarded_mass: y.norm() };
    if r == 0 || c == 0 || y.norm() == 0.0 {
        return Ok((empty(r), empty(c)));
    }
    let svd = y.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let vt = svd.v_t.as_ref().expect("requested Vᵀ");
    let p = svd.singular_values.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let positive = values.iter().take_while(|&&v| v > 0.0).count();
    let (t, discarded_mass) = keep_count(&values, eps, positive);

    let mut f1 = DMatrix::zeros(r, t);
    let mut f2 = DMatrix::zeros(c, t);
    for (col, &src) in order.iter().take(t).enumerate() {
        let root = values[col].sqrt();
        let uc = u.column(src);
        let vc = vt.row(src).transpose();
        let pivot = uc.iter().fold(0.0f64, |p, &x| if x.abs() > p.abs() { x } else { p });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        f1.set_column(col, &(uc * (sign * root)));
        f2.set_column(col, &(vc * (sign * root)));
    }
    Ok((
        TruncatedFactor { factor: f1, discarded_mass },
        TruncatedFactor { factor: f2, discarded_mass },
    ))
}
