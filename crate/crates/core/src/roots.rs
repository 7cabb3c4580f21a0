//! Roots of complex quartics as eigenvalues of the companion matrix.
//!
//! The companion matrix is already upper Hessenberg, so a plain shifted QR
//! iteration with Givens rotations and deflation finds its eigenvalues directly.
//! Each root then gets one Newton step against the original polynomial.

use num_complex::Complex64;

type C = Complex64;

const MAX_SWEEPS: usize = 60;

/// Evaluates `coeffs` (descending degree) and its derivative at `x`.
pub fn horner(coeffs: &[C], x: C) -> (C, C) {
    let mut p = C::new(0.0, 0.0);
    let mut dp = C::new(0.0, 0.0);
    for &a in coeffs {
        dp = dp * x + p;
        p = p * x + a;
    }
    (p, dp)
}

/// All four roots of `c[0] x^4 + c[1] x^3 + c[2] x^2 + c[3] x + c[4]`.
///
/// `c[0]` must be nonzero.
pub fn quartic_roots(c: &[C; 5]) -> [C; 4] {
    let lead = c[0];
    let a: [C; 4] = [c[1] / lead, c[2] / lead, c[3] / lead, c[4] / lead];
    // Frobenius companion: first row -a, ones on the subdiagonal.
    let zero = C::new(0.0, 0.0);
    let one = C::new(1.0, 0.0);
    let mut h = [[zero; 4]; 4];
    for j in 0..4 {
        h[0][j] = -a[j];
    }
    for i in 1..4 {
        h[i][i - 1] = one;
    }
    let mut roots = hessenberg_eigenvalues(h);
    for r in roots.iter_mut() {
        let (p, dp) = horner(c, *r);
        if dp.norm() > 0.0 {
            let step = p / dp;
            let polished = *r - step;
            if polished.is_finite() && horner(c, polished).0.norm() <= p.norm() {
                *r = polished;
            }
        }
    }
    roots
}

fn hessenberg_eigenvalues(mut h: [[C; 4]; 4]) -> [C; 4] {
    let mut eig = [C::new(0.0, 0.0); 4];
    let mut hi = 3usize;
    let mut sweeps = 0usize;
    loop {
        if hi == 0 {
            eig[0] = h[0][0];
            break;
        }
        // smallest l such that h[l..=hi] is unreduced
        let mut l = hi;
        while l > 0 {
            let s = h[l - 1][l - 1].l1_norm() + h[l][l].l1_norm();
            let tiny = if s == 0.0 { f64::MIN_POSITIVE } else { f64::EPSILON * s };
            if h[l][l - 1].l1_norm() <= tiny {
                break;
            }
            l -= 1;
        }
        if l == hi || sweeps >= MAX_SWEEPS {
            eig[hi] = h[hi][hi];
            hi -= 1;
            sweeps = 0;
            continue;
        }
        if l > 0 {
            h[l][l - 1] = C::new(0.0, 0.0);
        }
        let mu = if sweeps > 0 && sweeps % 11 == 0 {
            // exceptional shift to break cycles
            h[hi][hi] + C::new(h[hi][hi - 1].norm(), 0.0)
        } else {
            wilkinson_shift(h[hi - 1][hi - 1], h[hi - 1][hi], h[hi][hi - 1], h[hi][hi])
        };
        qr_step(&mut h, l, hi, mu);
        sweeps += 1;
    }
    eig
}

/// Eigenvalue of the trailing 2x2 block closest to its bottom-right entry.
fn wilkinson_shift(a: C, b: C, c: C, d: C) -> C {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let m1 = (a + d) * 0.5 + disc;
    let m2 = (a + d) * 0.5 - disc;
    if (m1 - d).norm() < (m2 - d).norm() {
        m1
    } else {
        m2
    }
}

/// One explicit shifted QR step `H - mu I = QR`, `H <- RQ + mu I` on the active
/// block `l..=hi`.
fn qr_step(h: &mut [[C; 4]; 4], l: usize, hi: usize, mu: C) {
    for i in l..=hi {
        h[i][i] -= mu;
    }
    let mut rot = [(C::new(1.0, 0.0), C::new(0.0, 0.0)); 3];
    for k in l..hi {
        let x = h[k][k];
        let y = h[k + 1][k];
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        let (c, s) = if r == 0.0 {
            (C::new(1.0, 0.0), C::new(0.0, 0.0))
        } else {
            (x / r, y / r)
        };
        for j in k..=hi {
            let t1 = h[k][j];
            let t2 = h[k + 1][j];
            h[k][j] = c.conj() * t1 + s.conj() * t2;
            h[k + 1][j] = -s * t1 + c * t2;
        }
        rot[k - l] = (c, s);
    }
    for k in l..hi {
        let (c, s) = rot[k - l];
        for i in l..=(k + 1).min(hi) {
            let t1 = h[i][k];
            let t2 = h[i][k + 1];
            h[i][k] = t1 * c + t2 * s;
            h[i][k + 1] = -t1 * s.conj() + t2 * c.conj();
        }
    }
    for i in l..=hi {
        h[i][i] += mu;
    }
}
