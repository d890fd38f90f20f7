//! Periodically loaded line model of the resonator/magnet hybrid.
//!
//! One unit cell of length `ls` carries a series impedance
//! `Z = iωL0 + iω·M0²·ext·L_YIG` and a shunt admittance
//! `Y = [1/(iωC0) + (1/(iω(L_ISRR + Mc·L_YIG)) + iωC_ISRR + 1/R_ISRR)⁻¹]⁻¹`.
//! The Bloch phase `2·sin(θ/2) = √(ZY)/i` turns these into effective
//! `n`, `ε`, `μ`.

use num_complex::Complex;

use crate::coupled_modes::{BareMode, HybridPair, KittelParams};
use crate::error::{Error, Result};
use crate::nrw_extraction::{nri_condition, reflection, Direction, MaterialSpectrum, TwoPortSpectrum};
use crate::poly;
use crate::scalar::{cr, i, is_finite_c, Real};
use crate::units::{self, defaults};

/// Lumped element values of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams<T = f64> {
    /// H
    pub l0: T,
    /// F
    pub c0: T,
    /// H
    pub l_isrr: T,
    /// F
    pub c_isrr: T,
    /// Ω
    pub r_isrr: T,
    /// Line-magnet coupling.
    pub m0: T,
    /// Resonator-magnet mutual coupling, forward direction.
    pub mc: Complex<T>,
    /// Cell length, m.
    pub ls: T,
    /// Geometric factor splitting the cell response between ε and μ.
    pub g: T,
    /// Scale applied to the magnet inductance seen by the line.
    pub ext: T,
    pub kittel: KittelParams<T>,
}

/// Magnet inductance parameters: Kittel constants and the base inductance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YigInductance<T = f64> {
    pub kittel: KittelParams<T>,
    pub l0: T,
}

impl<T: Real> CircuitParams<T> {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("L0", self.l0),
            ("C0", self.c0),
            ("L_ISRR", self.l_isrr),
            ("C_ISRR", self.c_isrr),
            ("R_ISRR", self.r_isrr),
            ("ls", self.ls),
            ("G", self.g),
        ];
        for (name, v) in pos {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.m0 >= T::zero()) {
            return Err(Error::Domain("M0 must be non-negative".into()));
        }
        if !(self.ext >= T::zero()) {
            return Err(Error::Domain("ext must be non-negative".into()));
        }
        if !is_finite_c(self.mc) {
            return Err(Error::Domain("Mc must be finite".into()));
        }
        self.kittel.validate()
    }

    pub fn yig(&self) -> YigInductance<T> {
        YigInductance { kittel: self.kittel, l0: self.l0 }
    }

    /// Copy with `Mc` conjugated for the reverse direction.
    pub fn for_direction(&self, dir: Direction) -> Self {
        match dir {
            Direction::Forward => *self,
            Direction::Reverse => Self { mc: self.mc.conj(), ..*self },
        }
    }

    pub fn with_mc(&self, mc: Complex<T>) -> Self {
        Self { mc, ..*self }
    }

    /// Total capacitance of the shunt branch.
    pub fn c_total(&self) -> T {
        self.c_isrr + self.c0
    }

    /// The resonator as it appears on the loaded line: the series
    /// resonance of the shunt branch, `1/√(L_ISRR(C_ISRR + C0))`, with half
    /// linewidth `1/(2R(C_ISRR + C0))`.
    pub fn isrr_mode(&self) -> Result<BareMode<T>> {
        let ct = self.c_total();
        BareMode::new(T::one() / (self.l_isrr * ct).sqrt(), T::one() / (T::lit(2.0) * self.r_isrr * ct))
    }

    /// Tank resonance `1/√(L_ISRR·C_ISRR)`.
    pub fn tank_frequency(&self) -> T {
        T::one() / (self.l_isrr * self.c_isrr).sqrt()
    }

    pub fn cast<U: Real>(&self) -> CircuitParams<U> {
        let f = |x: T| U::lit(x.to_f64().unwrap());
        CircuitParams {
            l0: f(self.l0),
            c0: f(self.c0),
            l_isrr: f(self.l_isrr),
            c_isrr: f(self.c_isrr),
            r_isrr: f(self.r_isrr),
            m0: f(self.m0),
            mc: Complex::new(f(self.mc.re), f(self.mc.im)),
            ls: f(self.ls),
            g: f(self.g),
            ext: f(self.ext),
            kittel: KittelParams { gamma_mu0: f(self.kittel.gamma_mu0), mu0_ms: f(self.kittel.mu0_ms), alpha: f(self.kittel.alpha) },
        }
    }
}

/// Physical description from which element values are derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitDesign {
    /// Cell length, m.
    pub ls: f64,
    /// Characteristic impedance of the bare line, Ω.
    pub z_line: f64,
    /// Cell delay `√(L0C0)` as a fraction of `ls/c`.
    pub delay_fraction: f64,
    /// Resonator frequency on the loaded line, Hz.
    pub f_isrr: f64,
    /// Resonator half linewidth, Hz.
    pub df_isrr: f64,
    /// `L_ISRR / L0`.
    pub inductance_ratio: f64,
    pub m0: f64,
    pub mc: Complex<f64>,
    pub ext: f64,
    pub g: f64,
    pub kittel: KittelParams<f64>,
}

impl Default for CircuitDesign {
    fn default() -> Self {
        Self {
            ls: defaults::LS,
            z_line: units::Z_REF,
            delay_fraction: 0.7159,
            f_isrr: defaults::F_ISRR,
            df_isrr: 5.822e6,
            inductance_ratio: 1.906,
            m0: defaults::M0,
            mc: Complex::new(defaults::MC_RE, defaults::MC_IM),
            ext: 1.164,
            g: 1.0,
            kittel: KittelParams { alpha: 0.02299, ..KittelParams::default() },
        }
    }
}

impl CircuitDesign {
    pub fn build<T: Real>(&self) -> Result<CircuitParams<T>> {
        let tau = self.delay_fraction * self.ls / units::C0;
        let l0 = self.z_line * tau;
        let c0 = tau / self.z_line;
        let l_isrr = self.inductance_ratio * l0;
        let w = units::ang(self.f_isrr);
        let ct = 1.0 / (w * w * l_isrr);
        let c_isrr = ct - c0;
        if !(c_isrr > 0.0) {
            return Err(Error::Domain(format!(
                "resonator at {} Hz needs C_ISRR = {c_isrr:.3e} F; lower the inductance ratio or the cell delay",
                self.f_isrr
            )));
        }
        let r = 1.0 / (2.0 * ct * units::ang(self.df_isrr));
        let p = CircuitParams {
            l0,
            c0,
            l_isrr,
            c_isrr,
            r_isrr: r,
            m0: self.m0,
            mc: self.mc,
            ls: self.ls,
            g: self.g,
            ext: self.ext,
            kittel: self.kittel,
        };
        p.validate()?;
        Ok(p.cast())
    }
}

impl Default for CircuitParams<f64> {
    fn default() -> Self {
        CircuitDesign::default().build().expect("default design is admissible")
    }
}

/// Magnet inductance
/// `L0·ω_m(ω_H + ω_m + iωα)/(ω_r² − ω² + iωα(2ω_H + ω_m))`.
pub fn l_yig<T: Real>(omega: T, mu0_h: T, p: &YigInductance<T>) -> Result<Complex<T>> {
    let k = &p.kittel;
    // Work in units of ω_m so that f32 does not overflow.
    let wm = k.omega_m();
    let scale = if wm > T::zero() { wm } else { k.omega_h(mu0_h).max(omega) };
    let wh = k.omega_h(mu0_h) / scale;
    let w = omega / scale;
    let wm = wm / scale;
    let wr2 = wh * (wh + wm);
    let num = Complex::new(wm * (wh + wm), wm * w * k.alpha);
    let den = Complex::new(wr2 - w * w, w * k.alpha * (T::lit(2.0) * wh + wm));
    if den.norm() == T::zero() {
        return Err(Error::Singular(format!(
            "magnet inductance pole hit exactly at ω = {omega} rad/s, H = {mu0_h} T with zero damping"
        )));
    }
    Ok(num / den * p.l0)
}

/// Series impedance of one cell, Ω.
pub fn series_impedance<T: Real>(omega: T, mu0_h: T, p: &CircuitParams<T>) -> Result<Complex<T>> {
    let jw = i::<T>() * omega;
    if p.m0 == T::zero() || p.ext == T::zero() {
        return Ok(jw * p.l0);
    }
    let ly = l_yig(omega, mu0_h, &p.yig())?;
    Ok(jw * p.l0 + jw * ly * (p.m0 * p.m0 * p.ext))
}

/// Shunt admittance of one cell, S.
pub fn shunt_admittance<T: Real>(omega: T, mu0_h: T, p: &CircuitParams<T>) -> Result<Complex<T>> {
    if omega == T::zero() {
        return Ok(cr(T::zero()));
    }
    let jw = i::<T>() * omega;
    let ly = if p.mc == cr(T::zero()) { cr(T::zero()) } else { l_yig(omega, mu0_h, &p.yig())? };
    let l_branch = jw * (cr(p.l_isrr) + p.mc * ly);
    if l_branch.norm() == T::zero() {
        return Err(Error::Singular("resonator inductive branch impedance vanished".into()));
    }
    let tank_y = l_branch.inv() + jw * p.c_isrr + cr(p.r_isrr.recip());
    if tank_y.norm() == T::zero() {
        return Err(Error::Singular("resonator tank admittance vanished".into()));
    }
    let series = (jw * p.c0).inv() + tank_y.inv();
    if series.norm() == T::zero() {
        return Err(Error::Singular("shunt branch impedance vanished".into()));
    }
    Ok(series.inv())
}

/// Per-cell immittances and Bloch phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellImmittance<T = f64> {
    pub z_se: Complex<T>,
    pub y_sh: Complex<T>,
    pub theta: Complex<T>,
}

/// Principal Bloch phase `θ = 2·asin(√(ZY)/(2i))`.
///
/// The principal branches always give `Im θ ≤ 0`, i.e. the wave that decays
/// along the line, and `Re θ ∈ [−π, π]`.
pub fn bloch_phase<T: Real>(z_se: Complex<T>, y_sh: Complex<T>) -> Complex<T> {
    let zy = z_se * y_sh;
    if zy.norm() == T::zero() {
        return cr(T::zero());
    }
    let arg = zy.sqrt() / (i::<T>() * T::lit(2.0));
    arg.asin() * T::lit(2.0)
}

/// Branch policy for the Bloch phase along a frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BlochBranch {
    /// Principal value at every point.
    #[default]
    Principal,
    /// Principal value plus the multiple of 2π that keeps `Re θ` continuous.
    Unwrapped,
}

/// Effective constants of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialPoint<T = f64> {
    pub n: Complex<T>,
    pub z: Complex<T>,
    pub eps: Complex<T>,
    pub mu: Complex<T>,
    /// Hz
    pub frequency: T,
    /// T
    pub field: T,
    pub theta: Complex<T>,
}

/// `(θ/2)/sin(θ/2)` and `cos(θ/2)`, with the small-angle limit handled.
fn brackets<T: Real>(theta: Complex<T>) -> (Complex<T>, Complex<T>) {
    let h = theta / T::lit(2.0);
    let ratio = if h.norm() < T::lit(1e-6) { cr::<T>(T::one()) + h * h / T::lit(6.0) } else { h / h.sin() };
    (ratio, h.cos())
}

/// Effective constants from immittances and a chosen Bloch phase.
pub fn material_from_cell<T: Real>(omega: T, mu0_h: T, cell: &CellImmittance<T>, p: &CircuitParams<T>) -> Result<MaterialPoint<T>> {
    if !(omega > T::zero()) {
        return Err(Error::Domain("frequency must be positive".into()));
    }
    let jw = i::<T>() * omega;
    let c = T::lit(units::C0);
    let k0 = omega / c;
    let (ratio, cos) = brackets(cell.theta);
    if cos.norm() == T::zero() {
        return Err(Error::Singular("cos(θ/2) = 0: permittivity diverges".into()));
    }
    let eps = cell.y_sh / p.ls * p.g / (jw * T::lit(units::EPS0)) * ratio / cos;
    let mu = cell.z_se / p.ls / (jw * T::lit(units::MU0) * p.g) * ratio * cos;
    let n = cell.theta / (p.ls * k0);
    let z = if n.norm() > T::zero() {
        mu / n
    } else {
        let mut z = (mu / eps).sqrt();
        if z.re < T::zero() {
            z = -z;
        }
        z
    };
    let pt = MaterialPoint { n, z, eps, mu, frequency: omega / (T::lit(2.0) * T::PI()), field: mu0_h, theta: cell.theta };
    if !(is_finite_c(n) && is_finite_c(z) && is_finite_c(eps) && is_finite_c(mu)) {
        return Err(Error::Singular(format!("non-finite material constants at {} Hz", pt.frequency)));
    }
    Ok(pt)
}

/// Immittances and principal Bloch phase at one point.
pub fn cell_immittance<T: Real>(omega: T, mu0_h: T, p: &CircuitParams<T>) -> Result<CellImmittance<T>> {
    let z_se = series_impedance(omega, mu0_h, p)?;
    let y_sh = shunt_admittance(omega, mu0_h, p)?;
    Ok(CellImmittance { z_se, y_sh, theta: bloch_phase(z_se, y_sh) })
}

/// Effective `n`, `z`, `ε`, `μ` at one point with the principal Bloch phase.
pub fn material_from_circuit<T: Real>(omega: T, mu0_h: T, p: &CircuitParams<T>) -> Result<MaterialPoint<T>> {
    let cell = cell_immittance(omega, mu0_h, p)?;
    material_from_cell(omega, mu0_h, &cell, p)
}

/// Material constants along a frequency sweep at fixed field. Points that
/// cannot be evaluated are masked with NaN.
pub fn material_sweep<T: Real>(freq: &[T], mu0_h: T, p: &CircuitParams<T>, branch: BlochBranch) -> MaterialSpectrum<T> {
    let len = freq.len();
    let nan = Complex::new(T::nan(), T::nan());
    let mut out = MaterialSpectrum {
        freq: freq.to_vec(),
        n: vec![nan; len],
        z: vec![nan; len],
        eps: vec![nan; len],
        mu: vec![nan; len],
        condition: vec![T::nan(); len],
        branch: vec![0; len],
        masked: vec![true; len],
        jumps: Vec::new(),
    };
    let two_pi = T::lit(2.0) * T::PI();
    let mut prev: Option<T> = None;
    for (k, &f) in freq.iter().enumerate() {
        let w = two_pi * f;
        let Ok(mut cell) = cell_immittance(w, mu0_h, p) else { continue };
        let mut m = 0i64;
        if let (BlochBranch::Unwrapped, Some(pr)) = (branch, prev) {
            m = ((pr - cell.theta.re) / two_pi).round().to_i64().unwrap_or(0);
            cell.theta = cell.theta + cr(two_pi * T::from_i64(m).unwrap());
        }
        let Ok(pt) = material_from_cell(w, mu0_h, &cell, p) else { continue };
        if let Some(pr) = prev {
            if (cell.theta.re - pr).abs() > T::PI() {
                out.jumps.push(k);
            }
        }
        prev = Some(cell.theta.re);
        out.n[k] = pt.n;
        out.z[k] = pt.z;
        out.eps[k] = pt.eps;
        out.mu[k] = pt.mu;
        out.condition[k] = nri_condition(pt.eps, pt.mu).0;
        out.branch[k] = m;
        out.masked[k] = false;
    }
    out
}

/// `(S11, S21)` of a slab with index `n`, impedance `z` and length `ls`.
pub fn slab_sparams<T: Real>(n: Complex<T>, z: Complex<T>, freq: T, ls: T) -> Result<(Complex<T>, Complex<T>)> {
    let k0 = T::lit(2.0) * T::PI() * freq / T::lit(units::C0);
    let p = (-i::<T>() * n * (k0 * ls)).exp();
    let g = reflection(z);
    let one = cr::<T>(T::one());
    let den = one - g * g * p * p;
    if den.norm() < T::lit(1e-14) {
        return Err(Error::Singular(format!("1 − Γ²P² vanishes at {freq} Hz")));
    }
    Ok((g * (one - p * p) / den, (one - g * g) * p / den))
}

/// Reciprocal two-port of a homogeneous slab.
pub fn synth_sparams<T: Real>(m: &MaterialSpectrum<T>, ls: T) -> Result<TwoPortSpectrum<T>> {
    let mut s11 = Vec::with_capacity(m.len());
    let mut s21 = Vec::with_capacity(m.len());
    for k in 0..m.len() {
        let (a, b) = slab_sparams(m.n[k], m.z[k], m.freq[k], ls)?;
        s11.push(a);
        s21.push(b);
    }
    TwoPortSpectrum::new(m.freq.clone(), s11.clone(), s21.clone(), s21, s11)
}

/// Circuit response at one field for one direction.
pub fn circuit_spectrum<T: Real>(
    p: &CircuitParams<T>,
    mu0_h: T,
    freq: &[T],
    dir: Direction,
) -> Result<(MaterialSpectrum<T>, TwoPortSpectrum<T>)> {
    let pd = p.for_direction(dir);
    let m = material_sweep(freq, mu0_h, &pd, BlochBranch::Principal);
    if let Some(k) = m.masked.iter().position(|&x| x) {
        return Err(Error::Singular(format!("circuit evaluation failed at {} Hz", freq[k])));
    }
    let s = synth_sparams(&m, p.ls)?;
    Ok((m, s))
}

/// Natural frequencies of the coupled resonator/magnet shunt branch at one
/// field, in the `ω − iΔω` convention, sorted by real part.
///
/// They are the zeros of `1 + iω(L_ISRR + Mc·L_YIG)(iωCt + 1/R)` with
/// `Ct = C_ISRR + C0`, cleared of the magnet pole.
pub fn circuit_modes<T: Real>(p: &CircuitParams<T>, mu0_h: T) -> Result<HybridPair<T>> {
    let k = &p.kittel;
    // Frequencies in units of the resonator frequency, immittances in Ω and S.
    let w0 = p.isrr_mode()?.omega;
    let wh = k.omega_h(mu0_h) / w0;
    let wm = k.omega_m() / w0;
    let a = k.alpha;
    let z = T::zero();
    let c = |re: T, im: T| Complex::new(re, im);
    // D(s) = −s² + iαΩs + ω_r²
    let d = [c(-T::one(), z), c(z, a * (T::lit(2.0) * wh + wm)), c(wh * (wh + wm), z)];
    // N(s) = iαω_m·s + ω_m(ω_H + ω_m)
    let nn = [c(z, a * wm), c(wm * (wh + wm), z)];
    let ld: Vec<_> = d.iter().map(|x| x * (p.l_isrr * w0)).collect();
    let mn: Vec<_> = nn.iter().map(|x| x * p.mc * (p.l0 * w0)).collect();
    let inner = poly::add(&ld, &mn);
    let b = [c(z, p.c_total() * w0), c(p.r_isrr.recip(), z)];
    let js = [c(z, T::one()), c(z, z)];
    let full = poly::add(&d, &poly::mul(&poly::mul(&js, &inner), &b));
    let mut r: Vec<_> = poly::roots(&full).into_iter().filter(|s| s.re > T::zero()).map(|s| s.conj() * w0).collect();
    if r.len() != 2 {
        return Err(Error::Singular(format!("expected two positive-frequency circuit modes, found {}", r.len())));
    }
    r.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap_or(std::cmp::Ordering::Equal));
    Ok(HybridPair { lower: r[0], upper: r[1] })
}
