//! Slab retrieval of `n`, `z`, `ε` and `μ` from two-port scattering data.
//!
//! S-parameters are normalized to the reference impedance. Forward
//! retrieval uses `(S11, S21)`, reverse retrieval `(S22, S12)`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cr, i, is_finite_c, Real};
use crate::units;

/// Propagation direction through the two-port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Port 1 to port 2, `S21`.
    Forward,
    /// Port 2 to port 1, `S12`.
    Reverse,
}

impl Direction {
    pub fn name(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" | "s21" | "fwd" => Ok(Direction::Forward),
            "reverse" | "s12" | "rev" => Ok(Direction::Reverse),
            _ => Err(Error::Usage(format!("unknown direction `{s}` (forward|reverse)"))),
        }
    }
}

/// Frequency-indexed two-port scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortSpectrum<T = f64> {
    /// Hz, strictly increasing.
    pub freq: Vec<T>,
    pub s11: Vec<Complex<T>>,
    pub s21: Vec<Complex<T>>,
    pub s12: Vec<Complex<T>>,
    pub s22: Vec<Complex<T>>,
}

impl<T: Real> TwoPortSpectrum<T> {
    pub fn new(
        freq: Vec<T>,
        s11: Vec<Complex<T>>,
        s21: Vec<Complex<T>>,
        s12: Vec<Complex<T>>,
        s22: Vec<Complex<T>>,
    ) -> Result<Self> {
        let s = Self { freq, s11, s21, s12, s22 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.freq.len();
        if [self.s11.len(), self.s21.len(), self.s12.len(), self.s22.len()].iter().any(|&m| m != n) {
            return Err(Error::Data("S-parameter columns differ in length".into()));
        }
        for w in self.freq.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Data(format!("frequency axis not strictly increasing at {}", w[1])));
            }
        }
        let all = self.s11.iter().chain(&self.s21).chain(&self.s12).chain(&self.s22);
        if self.freq.iter().any(|f| !f.is_finite()) || all.into_iter().any(|z| !is_finite_c(*z)) {
            return Err(Error::Data("non-finite entry in spectrum".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }

    /// `(reflection, transmission)` seen from the input port of `dir`.
    pub fn pair(&self, dir: Direction, k: usize) -> (Complex<T>, Complex<T>) {
        match dir {
            Direction::Forward => (self.s11[k], self.s21[k]),
            Direction::Reverse => (self.s22[k], self.s12[k]),
        }
    }
}

/// Frequency-indexed effective constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSpectrum<T = f64> {
    pub freq: Vec<T>,
    pub n: Vec<Complex<T>>,
    pub z: Vec<Complex<T>>,
    pub eps: Vec<Complex<T>>,
    pub mu: Vec<Complex<T>>,
    /// `ε′μ″ + ε″μ′` with loss-positive imaginary parts.
    pub condition: Vec<T>,
    /// Log branch used per point.
    pub branch: Vec<i64>,
    /// Points that could not be evaluated; their values are NaN.
    pub masked: Vec<bool>,
    /// Indices where consecutive `n` differ by more than the jump threshold.
    pub jumps: Vec<usize>,
}

impl<T: Real> MaterialSpectrum<T> {
    /// Builds a spectrum from `(n, z)` pairs, deriving `ε = n/z`, `μ = n·z`.
    pub fn from_nz(freq: Vec<T>, n: Vec<Complex<T>>, z: Vec<Complex<T>>) -> Self {
        let eps: Vec<_> = n.iter().zip(&z).map(|(n, z)| n / z).collect();
        let mu: Vec<_> = n.iter().zip(&z).map(|(n, z)| n * z).collect();
        let condition = eps.iter().zip(&mu).map(|(e, m)| nri_condition(*e, *m).0).collect();
        let len = freq.len();
        Self { freq, n, z, eps, mu, condition, branch: vec![0; len], masked: vec![false; len], jumps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.freq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freq.is_empty()
    }
}

/// How the logarithm branch of `ln P` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogBranch {
    /// Start at `k = 0` on the lowest frequency and pick the `k` that keeps
    /// `n′` closest to its previous value. Jumps larger than the threshold
    /// are reported.
    Continuity { jump_threshold: f64 },
    /// Same `k` at every point.
    Fixed(i64),
}

impl Default for LogBranch {
    fn default() -> Self {
        LogBranch::Continuity { jump_threshold: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionConfig {
    /// Sample length, m.
    pub ls: f64,
    pub branch: LogBranch,
    /// Reference impedance the S-parameters are normalized to, Ω.
    pub z_ref: f64,
    pub direction: Direction,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            ls: units::defaults::LS,
            branch: LogBranch::default(),
            z_ref: units::Z_REF,
            direction: Direction::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeEmbedMode {
    /// `S_total − S_background` on transmission terms.
    #[default]
    Subtract,
    /// `S_total / S_background` on transmission terms.
    Ratio,
}

/// Removes the empty-fixture response from the transmission terms.
/// Reflection terms pass through unchanged.
pub fn de_embed<T: Real>(
    total: &TwoPortSpectrum<T>,
    background: &TwoPortSpectrum<T>,
    mode: DeEmbedMode,
) -> Result<TwoPortSpectrum<T>> {
    if total.len() != background.len() {
        return Err(Error::Data(format!(
            "background has {} points, measurement has {}",
            background.len(),
            total.len()
        )));
    }
    let tol = T::lit(1e-9);
    for (a, b) in total.freq.iter().zip(&background.freq) {
        if (*a - *b).abs() > tol * a.abs().max(T::one()) {
            return Err(Error::Data(format!("frequency axes differ first at {a} Hz (background {b} Hz)")));
        }
    }
    let op = |t: &[Complex<T>], b: &[Complex<T>]| -> Result<Vec<Complex<T>>> {
        t.iter()
            .zip(b)
            .map(|(x, y)| match mode {
                DeEmbedMode::Subtract => Ok(x - y),
                DeEmbedMode::Ratio => {
                    if y.norm() == T::zero() {
                        Err(Error::Singular("background transmission is zero in ratio mode".into()))
                    } else {
                        Ok(x / y)
                    }
                }
            })
            .collect()
    };
    Ok(TwoPortSpectrum {
        freq: total.freq.clone(),
        s11: total.s11.clone(),
        s21: op(&total.s21, &background.s21)?,
        s12: op(&total.s12, &background.s12)?,
        s22: total.s22.clone(),
    })
}

const SINGULAR: f64 = 1e-14;

/// Normalized slab impedance
/// `z = √(((1+S11)² − S21²)/((1−S11)² − S21²))`, root with `Re z ≥ 0`
/// (ties broken by `Im z ≥ 0`).
pub fn impedance_from_s<T: Real>(s11: Complex<T>, s21: Complex<T>) -> Result<Complex<T>> {
    let one = cr::<T>(T::one());
    let num = (one + s11) * (one + s11) - s21 * s21;
    let den = (one - s11) * (one - s11) - s21 * s21;
    if den.norm() < T::lit(SINGULAR) {
        return Err(Error::Singular("impedance denominator (1−S11)²−S21² vanishes".into()));
    }
    let mut z = (num / den).sqrt();
    if z.re < T::zero() || (z.re == T::zero() && z.im < T::zero()) {
        z = -z;
    }
    Ok(z)
}

/// Interface reflection `(z − 1)/(z + 1)`.
#[inline]
pub fn reflection<T: Real>(z: Complex<T>) -> Complex<T> {
    let one = cr::<T>(T::one());
    (z - one) / (z + one)
}

/// Propagation factor `P = (S11 + S21 − Γ)/(1 − (S11 + S21)Γ)`.
pub fn propagation_term<T: Real>(s11: Complex<T>, s21: Complex<T>, z: Complex<T>) -> Result<Complex<T>> {
    let g = reflection(z);
    let s = s11 + s21;
    let den = cr::<T>(T::one()) - s * g;
    if den.norm() < T::lit(SINGULAR) {
        return Err(Error::Singular("propagation denominator 1−(S11+S21)Γ vanishes".into()));
    }
    Ok((s - g) / den)
}

/// `n = −ln(P)/(i·k0·ls)` on log branch `k`.
pub fn refractive_index<T: Real>(p: Complex<T>, ls: T, freq: T, k: i64) -> Result<Complex<T>> {
    if p.norm() == T::zero() {
        return Err(Error::Singular("P = 0, refractive index undefined".into()));
    }
    let k0 = T::lit(2.0) * T::PI() * freq / T::lit(units::C0);
    let two_pi = T::lit(2.0) * T::PI();
    let lg = Complex::new(p.norm().ln(), p.arg() + two_pi * T::from_i64(k).unwrap());
    Ok(-lg / (i::<T>() * k0 * ls))
}

/// `(ε′μ″ + ε″μ′, value < 0)` with `ε = ε′ − iε″`, `μ = μ′ − iμ″`.
/// Equals `2n′n″` for `n² = εμ`.
pub fn nri_condition<T: Real>(eps: Complex<T>, mu: Complex<T>) -> (T, bool) {
    let v = eps.re * (-mu.im) + (-eps.im) * mu.re;
    (v, v < T::zero())
}

/// Log branch `k` at one point given the previous index.
fn branch_step<T: Real>(p: Complex<T>, ls: T, freq: T, prev: Option<Complex<T>>, policy: LogBranch) -> Result<(Complex<T>, i64)> {
    match (policy, prev) {
        (LogBranch::Fixed(k), _) => Ok((refractive_index(p, ls, freq, k)?, k)),
        (LogBranch::Continuity { .. }, None) => Ok((refractive_index(p, ls, freq, 0)?, 0)),
        (LogBranch::Continuity { .. }, Some(prev)) => {
            let k0 = T::lit(2.0) * T::PI() * freq / T::lit(units::C0);
            let n0 = refractive_index(p, ls, freq, 0)?;
            // n′ shifts by −2πk/(k0 ls) per branch step.
            let step = T::lit(2.0) * T::PI() / (k0 * ls);
            let k = ((n0.re - prev.re) / step).round();
            let k = k.to_i64().unwrap_or(0);
            Ok((refractive_index(p, ls, freq, k)?, k))
        }
    }
}

/// Full retrieval over a spectrum.
pub fn extract<T: Real>(s: &TwoPortSpectrum<T>, cfg: &ExtractionConfig) -> Result<MaterialSpectrum<T>> {
    s.validate()?;
    if !(cfg.ls > 0.0) {
        return Err(Error::Domain("sample length must be positive".into()));
    }
    let ls = T::lit(cfg.ls);
    let len = s.len();
    let nan = Complex::new(T::nan(), T::nan());
    let mut out = MaterialSpectrum {
        freq: s.freq.clone(),
        n: vec![nan; len],
        z: vec![nan; len],
        eps: vec![nan; len],
        mu: vec![nan; len],
        condition: vec![T::nan(); len],
        branch: vec![0; len],
        masked: vec![true; len],
        jumps: Vec::new(),
    };
    let mut prev: Option<(Complex<T>, i64)> = None;
    for k in 0..len {
        let (r, t) = s.pair(cfg.direction, k);
        let point = impedance_from_s(r, t).and_then(|z| {
            let p = propagation_term(r, t, z)?;
            let (n, b) = branch_step(p, ls, s.freq[k], prev.map(|x| x.0), cfg.branch)?;
            Ok((z, n, b))
        });
        let Ok((z, n, b)) = point else { continue };
        if let (Some((pn, _)), LogBranch::Continuity { jump_threshold }) = (prev, cfg.branch) {
            if (n - pn).norm() > T::lit(jump_threshold) {
                out.jumps.push(k);
            }
        }
        let eps = n / z;
        let mu = n * z;
        out.n[k] = n;
        out.z[k] = z;
        out.eps[k] = eps;
        out.mu[k] = mu;
        out.condition[k] = nri_condition(eps, mu).0;
        out.branch[k] = b;
        out.masked[k] = false;
        prev = Some((n, b));
    }
    Ok(out)
}
