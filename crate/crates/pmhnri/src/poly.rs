//! Roots of small complex polynomials.

use num_complex::Complex;

use crate::scalar::Real;

/// Product of two polynomials, coefficients highest degree first.
pub fn mul<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut out = vec![Complex::new(T::zero(), T::zero()); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j] + x * y;
        }
    }
    out
}

/// Sum of two polynomials, coefficients highest degree first.
pub fn add<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = a.len().max(b.len());
    let mut out = vec![Complex::new(T::zero(), T::zero()); n];
    for (k, x) in a.iter().enumerate() {
        out[n - a.len() + k] = out[n - a.len() + k] + x;
    }
    for (k, x) in b.iter().enumerate() {
        out[n - b.len() + k] = out[n - b.len() + k] + x;
    }
    out
}

pub fn eval<T: Real>(p: &[Complex<T>], x: Complex<T>) -> Complex<T> {
    p.iter().fold(Complex::new(T::zero(), T::zero()), |acc, c| acc * x + c)
}

/// All roots by simultaneous (Aberth) iteration.
///
/// Leading zero coefficients are dropped. Returns fewer roots than the
/// nominal degree only when the polynomial is degenerate.
pub fn roots<T: Real>(p: &[Complex<T>]) -> Vec<Complex<T>> {
    let start = p.iter().position(|c| c.norm() > T::zero()).unwrap_or(p.len());
    let p = &p[start..];
    if p.len() < 2 {
        return Vec::new();
    }
    let lead = p[0];
    let mon: Vec<Complex<T>> = p.iter().map(|c| c / lead).collect();
    let deg = mon.len() - 1;
    let dp: Vec<Complex<T>> = mon[..deg]
        .iter()
        .enumerate()
        .map(|(k, c)| c * T::from_usize(deg - k).unwrap())
        .collect();
    // Cauchy bound for the initial circle.
    let r = T::one() + mon[1..].iter().fold(T::zero(), |m, c| m.max(c.norm()));
    let mut z: Vec<Complex<T>> = (0..deg)
        .map(|k| {
            let a = T::lit(2.0) * T::PI() * T::from_usize(k).unwrap() / T::from_usize(deg).unwrap() + T::lit(0.4);
            Complex::from_polar(r * T::lit(0.5), a)
        })
        .collect();
    let eps = T::epsilon();
    for _ in 0..500 {
        let mut moved = T::zero();
        for i in 0..deg {
            let f = eval(&mon, z[i]);
            let d = eval(&dp, z[i]);
            if f.norm() == T::zero() {
                continue;
            }
            let ratio = f / d;
            let mut s = Complex::new(T::zero(), T::zero());
            for j in 0..deg {
                if j != i {
                    s = s + (z[i] - z[j]).inv();
                }
            }
            let w = ratio / (Complex::new(T::one(), T::zero()) - ratio * s);
            if w.re.is_finite() && w.im.is_finite() {
                z[i] = z[i] - w;
                moved = moved.max(w.norm() / (T::one() + z[i].norm()));
            }
        }
        if moved < eps * T::lit(4.0) {
            break;
        }
    }
    z
}
