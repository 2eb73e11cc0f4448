//! Dense complex matrix kernel.
//!
//! Everything here works on small (d ≤ ~64) dense `nalgebra` matrices of
//! `Complex<f64>`. Vectorization is column stacking, so
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenvalues at or below this value are treated as the kernel of a PSD matrix.
pub const SUPPORT_CUTOFF: f64 = 1e-12;

/// General eigenvalues closer than this are paired as one degenerate group.
pub const DEGENERACY_GAP: f64 = 1e-9;

/// Above this condition number a left/right pairing is reported as degenerate.
pub const MAX_PAIRING_CONDITION: f64 = 1e8;

const MAX_ITER: usize = 10_000;

/// Relative singular-value bound for a vector to count as an eigenvector.
const NULL_SPACE_TOL: f64 = 1e-7;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Builds a square matrix from real row-major entries.
pub fn from_real_rows(d: usize, rows: &[f64]) -> CMatrix {
    assert_eq!(rows.len(), d * d, "from_real_rows needs d*d entries");
    CMatrix::from_fn(d, d, |i, j| re(rows[i * d + j]))
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let d = values.len();
    CMatrix::from_fn(d, d, |i, j| if i == j { re(values[i]) } else { C64::new(0.0, 0.0) })
}

pub fn trace(a: &CMatrix) -> C64 {
    a.trace()
}

/// Frobenius norm.
pub fn frob(a: &CMatrix) -> f64 {
    a.norm()
}

pub fn hermitian_residual(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// `(A + A†) / 2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

pub fn approx_eq(a: &CMatrix, b: &CMatrix, eps: f64) -> bool {
    a.shape() == b.shape() && (a - b).norm() <= eps
}

fn check_square(a: &CMatrix, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what} needs a nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

fn check_same_shape(a: &CMatrix, b: &CMatrix, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl HermEig {
    /// `V f(w) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &w) in self.eigenvalues.iter().enumerate() {
            let fw = f(w);
            scaled.column_mut(k).scale_mut(fw);
        }
        scaled * v.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.map(|w| w)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }
}

pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    let d = check_square(a, "herm_eig")?;
    let residual = hermitian_residual(a);
    if residual > 1e-9 * a.norm() {
        return Err(Error::NotHermitian { residual });
    }
    let eig = SymmetricEigen::try_new(hermitize(a), f64::EPSILON, MAX_ITER)
        .ok_or(Error::NoConvergence("herm_eig"))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermEig { eigenvalues, eigenvectors })
}

/// Applies `f` to the eigenvalues of a PSD matrix that exceed `cutoff`;
/// the rest of the spectrum (the kernel) maps to zero.
pub fn func_on_support(a: &CMatrix, f: impl Fn(f64) -> f64, cutoff: f64) -> Result<CMatrix> {
    let eig = herm_eig(a)?;
    support_map(&eig, f, cutoff)
}

/// Same as [`func_on_support`] for an already decomposed matrix.
pub fn support_map(eig: &HermEig, f: impl Fn(f64) -> f64, cutoff: f64) -> Result<CMatrix> {
    if eig.min() < -1e-9 {
        return Err(Error::NegativeEigenvalue(eig.min()));
    }
    Ok(eig.map(|w| if w > cutoff { f(w) } else { 0.0 }))
}

/// General (non-Hermitian) eigendecomposition with biorthonormal left vectors.
#[derive(Debug, Clone)]
pub struct GenEig {
    /// Sorted descending by real part, ties broken by descending imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Unit-norm right eigenvectors as columns.
    pub right_vectors: CMatrix,
    /// Left eigenvectors `l` as columns, `l† A = λ l†`, scaled so that
    /// `L† R = I`.
    pub left_vectors: CMatrix,
    /// Largest condition number among the pairing blocks.
    pub pairing_condition: f64,
}

fn descending(a: &C64, b: &C64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

fn schur_eigenvalues(a: &CMatrix) -> Result<Vec<C64>> {
    let schur = Schur::try_new(a.clone(), f64::EPSILON, MAX_ITER)
        .ok_or(Error::NoConvergence("gen_eig"))?;
    let (_, t) = schur.unpack();
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Groups indices of `values` whose pairwise distance chains below `gap`.
fn cluster(values: &[C64], gap: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() < gap {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                if ri != rj {
                    label[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = root(&mut label, i);
        match seen[r] {
            Some(g) => groups[g].push(i),
            None => {
                seen[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// The `k` right singular vectors of `m` with the smallest singular values,
/// and the largest of those `k` singular values.
fn null_vectors(m: &CMatrix, k: usize) -> Result<(CMatrix, f64)> {
    let n = m.ncols();
    let svd = SVD::try_new(m.clone(), false, true, f64::EPSILON, MAX_ITER)
        .ok_or(Error::NoConvergence("gen_eig null space"))?;
    let v = svd.v_t.expect("requested v_t").adjoint();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let residual = svd.singular_values[order[k - 1]];
    Ok((CMatrix::from_fn(n, k, |r, col| v[(r, order[col])]), residual))
}

fn condition_number(m: &CMatrix) -> f64 {
    let s = m.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn gen_eig(a: &CMatrix) -> Result<GenEig> {
    let n = check_square(a, "gen_eig")?;
    let mut right_vals = schur_eigenvalues(a)?;
    right_vals.sort_by(descending);
    let adj = a.adjoint();
    // eigenvalues of A† are the conjugates of those of A
    let left_vals: Vec<C64> = schur_eigenvalues(&adj)?.iter().map(|v| v.conj()).collect();

    let scale = a.norm().max(1.0);
    let mut used = vec![false; n];
    let mut right = CMatrix::zeros(n, n);
    let mut left = CMatrix::zeros(n, n);
    let mut worst = 1.0_f64;

    for group in cluster(&right_vals, DEGENERACY_GAP) {
        let k = group.len();
        let mu = group.iter().map(|&i| right_vals[i]).sum::<C64>() / re(k as f64);

        // pair with the k nearest unused adjoint eigenvalues
        let mut partners: Vec<usize> = (0..n).filter(|&j| !used[j]).collect();
        partners.sort_by(|&i, &j| {
            (left_vals[i] - mu).norm().total_cmp(&(left_vals[j] - mu).norm())
        });
        partners.truncate(k);
        let nu = partners.iter().map(|&j| left_vals[j]).sum::<C64>() / re(k as f64);
        if (nu - mu).norm() > 1e-6 * scale {
            return Err(Error::DegeneratePairing { condition: f64::INFINITY });
        }
        for &j in &partners {
            used[j] = true;
        }

        let shift = |m: &CMatrix, s: C64| {
            let mut out = m.clone();
            for i in 0..n {
                out[(i, i)] -= s;
            }
            out
        };
        let (r, r_res) = null_vectors(&shift(a, mu), k)?;
        let (l, l_res) = null_vectors(&shift(&adj, nu.conj()), k)?;
        // a defective group has fewer than k independent eigenvectors
        if r_res.max(l_res) > NULL_SPACE_TOL * scale {
            return Err(Error::DegeneratePairing { condition: f64::INFINITY });
        }

        let overlap = l.adjoint() * &r;
        let cond = condition_number(&overlap);
        if !cond.is_finite() || cond > MAX_PAIRING_CONDITION {
            return Err(Error::DegeneratePairing { condition: cond });
        }
        worst = worst.max(cond);
        let inv = overlap
            .try_inverse()
            .ok_or(Error::DegeneratePairing { condition: cond })?;
        let l = l * inv.adjoint();
        for (col, &idx) in group.iter().enumerate() {
            right.set_column(idx, &r.column(col));
            left.set_column(idx, &l.column(col));
        }
    }

    Ok(GenEig {
        eigenvalues: right_vals,
        right_vectors: right,
        left_vectors: left,
        pairing_condition: worst,
    })
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

pub fn unvec(v: &CVector, d: usize) -> Result<CMatrix> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "unvec: length {} is not {d}^2",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

/// `[A, B] = AB − BA`.
pub fn comm(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_same_shape(a, b, "comm")?;
    check_square(a, "comm")?;
    Ok(a * b - b * a)
}

/// `{A, B} = AB + BA`.
pub fn acomm(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_same_shape(a, b, "acomm")?;
    check_square(a, "acomm")?;
    Ok(a * b + b * a)
}
