//! Small dense least-squares kernel used by the reconstruction.

/// Relative pivot threshold below which a column is treated as dependent.
pub const RANK_TOL: f64 = 1e-11;

/// Minimizes `||A x - B||_2` column by column using Householder QR with
/// column pivoting.
///
/// `a` is row-major `rows x cols` (`rows >= cols`), `b` is row-major
/// `rows x nrhs`; both are overwritten. Returns row-major `cols x nrhs`, or
/// `None` if `A` is numerically rank deficient.
pub fn least_squares(a: &mut [f64], rows: usize, cols: usize, b: &mut [f64], nrhs: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(b.len(), rows * nrhs);
    if rows < cols {
        return None;
    }
    if cols == 0 {
        return Some(Vec::new());
    }
    // Column equilibration so the pivot threshold is scale-free.
    let mut scale = vec![0.0; cols];
    for (j, s) in scale.iter_mut().enumerate() {
        let n = (0..rows).map(|i| a[i * cols + j].powi(2)).sum::<f64>().sqrt();
        if n == 0.0 {
            return None;
        }
        *s = 1.0 / n;
        for i in 0..rows {
            a[i * cols + j] *= *s;
        }
    }
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut norms: Vec<f64> = vec![1.0; cols];
    let mut r00 = 0.0;
    for k in 0..cols {
        // Pivot on the largest remaining column norm.
        let p = (k..cols).max_by(|&x, &y| norms[x].total_cmp(&norms[y])).unwrap();
        if p != k {
            perm.swap(k, p);
            norms.swap(k, p);
            for i in 0..rows {
                a.swap(i * cols + k, i * cols + p);
            }
        }
        let alpha: f64 = (k..rows).map(|i| a[i * cols + k].powi(2)).sum::<f64>().sqrt();
        if k == 0 {
            r00 = alpha;
        }
        if !(alpha > RANK_TOL * r00) {
            return None;
        }
        let akk = a[k * cols + k];
        let beta = if akk >= 0.0 { -alpha } else { alpha };
        // v = x - beta e1, stored in place below the diagonal.
        a[k * cols + k] = akk - beta;
        let vnorm2: f64 = (k..rows).map(|i| a[i * cols + k].powi(2)).sum();
        if vnorm2 > 0.0 {
            for j in (k + 1)..cols {
                let dot: f64 = (k..rows).map(|i| a[i * cols + k] * a[i * cols + j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..rows {
                    a[i * cols + j] -= f * a[i * cols + k];
                }
            }
            for j in 0..nrhs {
                let dot: f64 = (k..rows).map(|i| a[i * cols + k] * b[i * nrhs + j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..rows {
                    b[i * nrhs + j] -= f * a[i * cols + k];
                }
            }
        }
        a[k * cols + k] = beta;
        for j in (k + 1)..cols {
            norms[j] = (k + 1..rows).map(|i| a[i * cols + j].powi(2)).sum::<f64>().sqrt();
        }
    }
    // Back substitution on R y = Q^T b, then undo pivoting and scaling.
    let mut y = vec![0.0; cols * nrhs];
    for r in 0..nrhs {
        for k in (0..cols).rev() {
            let mut s = b[k * nrhs + r];
            for j in (k + 1)..cols {
                s -= a[k * cols + j] * y[j * nrhs + r];
            }
            y[k * nrhs + r] = s / a[k * cols + k];
        }
    }
    let mut x = vec![0.0; cols * nrhs];
    for k in 0..cols {
        let j = perm[k];
        for r in 0..nrhs {
            x[j * nrhs + r] = y[k * nrhs + r] * scale[j];
        }
    }
    Some(x)
}
