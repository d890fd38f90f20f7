//! Two-mode non-Hermitian coupling: Kittel dispersion, hybrid eigenvalues,
//! branch tracking and zero-damping search.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::{self, defaults};

/// One uncoupled resonance `ω̃ = omega − i·linewidth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BareMode<T = f64> {
    /// rad/s
    pub omega: T,
    /// Half linewidth, rad/s.
    pub linewidth: T,
}

impl<T: Real> BareMode<T> {
    pub fn new(omega: T, linewidth: T) -> Result<Self> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::Domain(format!("mode frequency must be positive, got {omega}")));
        }
        if !(linewidth >= T::zero()) || !linewidth.is_finite() {
            return Err(Error::Domain(format!("bare linewidth must be >= 0, got {linewidth}")));
        }
        Ok(Self { omega, linewidth })
    }

    /// Builds a mode from frequencies in hertz.
    pub fn from_hz(f: T, df: T) -> Result<Self> {
        let tau = T::lit(2.0) * T::PI();
        Self::new(tau * f, tau * df)
    }

    /// `ω − iΔω`
    #[inline]
    pub fn complex(&self) -> Complex<T> {
        Complex::new(self.omega, -self.linewidth)
    }
}

/// Complex coupling constant of the two-mode model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling<T = f64> {
    pub kappa: Complex<T>,
}

impl<T: Real> Coupling<T> {
    pub fn new(re: T, im: T) -> Self {
        Self { kappa: Complex::new(re, im) }
    }

    /// Opposite propagation direction.
    pub fn reversed(&self) -> Self {
        Self { kappa: self.kappa.conj() }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { kappa: self.kappa * s }
    }
}

/// Gyromagnetic ratio, magnetization and Gilbert damping of the magnet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KittelParams<T = f64> {
    /// γμ0, rad/(s·T)
    pub gamma_mu0: T,
    /// μ0·Ms, T
    pub mu0_ms: T,
    pub alpha: T,
}

impl<T: Real> KittelParams<T> {
    pub fn new(gamma_mu0: T, mu0_ms: T, alpha: T) -> Result<Self> {
        let p = Self { gamma_mu0, mu0_ms, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_mu0 > T::zero()) {
            return Err(Error::Domain("gamma_mu0 must be positive".into()));
        }
        if !(self.mu0_ms >= T::zero()) {
            return Err(Error::Domain("mu0_Ms must be non-negative".into()));
        }
        if !(self.alpha >= T::zero() && self.alpha < T::one()) {
            return Err(Error::Domain("alpha must lie in [0, 1)".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn omega_h(&self, mu0_h: T) -> T {
        self.gamma_mu0 * mu0_h
    }

    #[inline]
    pub fn omega_m(&self) -> T {
        self.gamma_mu0 * self.mu0_ms
    }

    /// Half linewidth of the uniform mode under Gilbert damping,
    /// `α(ω_H + ω_m/2)`.
    pub fn gilbert_linewidth(&self, mu0_h: T) -> T {
        self.alpha * (self.omega_h(mu0_h) + self.omega_m() / T::lit(2.0))
    }
}

impl Default for KittelParams<f64> {
    fn default() -> Self {
        Self {
            gamma_mu0: units::ang(defaults::GAMMA_MU0_HZ_PER_T),
            mu0_ms: defaults::MU0_MS,
            alpha: defaults::ALPHA,
        }
    }
}

/// Ferromagnetic resonance `√(ω_H(ω_H + ω_m))`.
pub fn kittel_frequency<T: Real>(mu0_h: T, p: &KittelParams<T>) -> Result<T> {
    if !(mu0_h >= T::zero()) {
        return Err(Error::Domain(format!("field must be non-negative, got {mu0_h} T")));
    }
    let wh = p.omega_h(mu0_h);
    Ok((wh * (wh + p.omega_m())).sqrt())
}

/// Field at which the Kittel frequency equals `omega`.
pub fn kittel_field<T: Real>(omega: T, p: &KittelParams<T>) -> T {
    let wm = p.omega_m();
    let two = T::lit(2.0);
    let wh = (-wm + (wm * wm + T::lit(4.0) * omega * omega).sqrt()) / two;
    wh / p.gamma_mu0
}

/// The two hybrid eigenfrequencies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridPair<T = f64> {
    pub upper: Complex<T>,
    pub lower: Complex<T>,
}

/// Roots of the two-mode secular equation
/// `ω̃± = ½[(ω̃c + ω̃r) ± √((ω̃c − ω̃r)² + (ωc·κ)²)]`, where the prefactor of
/// `κ` is the real resonator frequency. Labels follow the real part.
pub fn hybrid_eigenvalues<T: Real>(
    isrr: &BareMode<T>,
    magnon: &BareMode<T>,
    coupling: &Coupling<T>,
) -> HybridPair<T> {
    let wc = isrr.complex();
    let wr = magnon.complex();
    let half = T::lit(0.5);
    let d = wc - wr;
    let g = coupling.kappa * isrr.omega;
    let root = (d * d + g * g).sqrt();
    let sum = wc + wr;
    let a = (sum + root) * half;
    let b = sum - a;
    if a.re >= b.re {
        HybridPair { upper: a, lower: b }
    } else {
        HybridPair { upper: b, lower: a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchLabel {
    Upper,
    Lower,
}

/// One continuous eigenvalue curve over the field axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCurve<T = f64> {
    pub label: BranchLabel,
    pub field: Vec<T>,
    pub values: Vec<Complex<T>>,
}

/// Output of [`track_branches`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedBranches<T = f64> {
    pub upper: BranchCurve<T>,
    pub lower: BranchCurve<T>,
    /// Field indices where both pairings were equally close.
    pub ties: Vec<usize>,
}

/// Follows both eigenvalues through the field sweep by nearest-neighbour
/// pairing. The curve with the larger real part at the first field point
/// is labelled `Upper`.
pub fn track_branches<T: Real>(field: &[T], pairs: &[HybridPair<T>]) -> Result<TrackedBranches<T>> {
    if field.len() != pairs.len() {
        return Err(Error::Data(format!(
            "field axis has {} points but {} eigenvalue pairs were given",
            field.len(),
            pairs.len()
        )));
    }
    if field.is_empty() {
        return Err(Error::Data("empty field axis".into()));
    }
    check_monotone(field)?;
    let mut a = Vec::with_capacity(field.len());
    let mut b = Vec::with_capacity(field.len());
    a.push(pairs[0].upper);
    b.push(pairs[0].lower);
    let mut ties = Vec::new();
    for (k, p) in pairs.iter().enumerate().skip(1) {
        let (pa, pb) = (a[k - 1], b[k - 1]);
        let keep = (p.upper - pa).norm() + (p.lower - pb).norm();
        let swap = (p.lower - pa).norm() + (p.upper - pb).norm();
        if swap < keep {
            a.push(p.lower);
            b.push(p.upper);
        } else {
            if swap == keep && p.upper != p.lower {
                ties.push(k);
            }
            // Ties keep the previous ordering.
            let prev_order = pa.re >= pb.re;
            let cur_order = p.upper.re >= p.lower.re;
            if swap == keep && prev_order != cur_order {
                a.push(p.lower);
                b.push(p.upper);
            } else {
                a.push(p.upper);
                b.push(p.lower);
            }
        }
    }
    let f = field.to_vec();
    Ok(TrackedBranches {
        upper: BranchCurve { label: BranchLabel::Upper, field: f.clone(), values: a },
        lower: BranchCurve { label: BranchLabel::Lower, field: f, values: b },
        ties,
    })
}

fn check_monotone<T: Real>(field: &[T]) -> Result<()> {
    if field.len() < 2 {
        return Ok(());
    }
    let inc = field[1] > field[0];
    for w in field.windows(2) {
        let ok = if inc { w[1] > w[0] } else { w[1] < w[0] };
        if !ok {
            return Err(Error::Data("field axis must be strictly monotonic".into()));
        }
    }
    Ok(())
}

/// Linewidth of one branch against field.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingProfile<T = f64> {
    pub field: Vec<T>,
    /// `Δω = −Im ω̃`; negative values mean anti-damping.
    pub linewidth: Vec<T>,
}

/// `Δω(H) = −Im ω̃(H)` along a tracked branch.
pub fn branch_linewidth<T: Real>(curve: &BranchCurve<T>) -> DampingProfile<T> {
    DampingProfile {
        field: curve.field.clone(),
        linewidth: curve.values.iter().map(|w| -w.im).collect(),
    }
}

/// Field bracket at which bisection stops, T.
pub const ZERO_DAMPING_FIELD_TOL: f64 = 1.0e-6;
/// Relative linewidth at which bisection stops.
pub const ZERO_DAMPING_REL_TOL: f64 = 1.0e-6;

/// Anti-damping interval `(H₋, H₊)` of a sampled profile. With a single
/// sign change the interval runs to the end of the axis.
///
/// Roots inside sign-change brackets are located by bisection on the
/// linear interpolant. Use [`zero_damping_fields_with`] to refine against the
/// underlying model instead.
pub fn zero_damping_fields<T: Real>(profile: &DampingProfile<T>) -> Result<Option<(T, T)>> {
    let f = &profile.field;
    let y = &profile.linewidth;
    zero_damping_core(profile, |h| interp(f, y, h))
}

/// As [`zero_damping_fields`], with each bracket refined by bisection on
/// `model(H) = Δω(H)`.
pub fn zero_damping_fields_with<T: Real, F: Fn(T) -> T>(
    profile: &DampingProfile<T>,
    model: F,
) -> Result<Option<(T, T)>> {
    zero_damping_core(profile, model)
}

fn zero_damping_core<T: Real, F: Fn(T) -> T>(profile: &DampingProfile<T>, model: F) -> Result<Option<(T, T)>> {
    let f = &profile.field;
    let y = &profile.linewidth;
    if f.len() != y.len() {
        return Err(Error::Data("profile axis and values differ in length".into()));
    }
    check_monotone(f)?;
    let scale = y.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let ytol = T::lit(ZERO_DAMPING_REL_TOL) * scale;
    let htol = T::lit(ZERO_DAMPING_FIELD_TOL);
    let mut roots = Vec::new();
    for k in 0..f.len().saturating_sub(1) {
        let (y0, y1) = (y[k], y[k + 1]);
        if y0 == T::zero() && k > 0 {
            continue;
        }
        if y0 == T::zero() {
            roots.push(f[k]);
        } else if y1 == T::zero() {
            roots.push(f[k + 1]);
        } else if (y0 < T::zero()) != (y1 < T::zero()) {
            roots.push(bisect(&model, f[k], f[k + 1], y0, htol, ytol));
        }
    }
    roots.dedup();
    match roots.len() {
        0 => Ok(None),
        1 => {
            // The axis end on the anti-damped side closes the interval.
            let (lo, hi) = if f[0] < f[f.len() - 1] { (f[0], f[f.len() - 1]) } else { (f[f.len() - 1], f[0]) };
            let neg_at_lo = if f[0] < f[f.len() - 1] { y[0] < T::zero() } else { y[y.len() - 1] < T::zero() };
            Ok(Some(if neg_at_lo { (lo, roots[0]) } else { (roots[0], hi) }))
        }
        2 => {
            let (a, b) = if roots[0] < roots[1] { (roots[0], roots[1]) } else { (roots[1], roots[0]) };
            Ok(Some((a, b)))
        }
        _ => {
            let list: Vec<String> = roots.iter().map(|r| format!("{:.6} mT", r.to_f64().unwrap_or(f64::NAN) * 1e3)).collect();
            Err(Error::Data(format!(
                "expected two zero-damping crossings, found {}: [{}]",
                roots.len(),
                list.join(", ")
            )))
        }
    }
}

fn bisect<T: Real, F: Fn(T) -> T>(model: &F, mut a: T, mut b: T, ya: T, htol: T, ytol: T) -> T {
    let neg_a = ya < T::zero();
    let two = T::lit(2.0);
    for _ in 0..200 {
        let m = (a + b) / two;
        if (b - a).abs() < htol {
            return m;
        }
        let ym = model(m);
        if ym.abs() <= ytol {
            return m;
        }
        if (ym < T::zero()) == neg_a {
            a = m;
        } else {
            b = m;
        }
    }
    (a + b) / two
}

fn interp<T: Real>(x: &[T], y: &[T], at: T) -> T {
    let n = x.len();
    let inc = x[n - 1] > x[0];
    let k = x
        .windows(2)
        .position(|w| if inc { at >= w[0] && at <= w[1] } else { at <= w[0] && at >= w[1] })
        .unwrap_or(n - 2);
    let t = (at - x[k]) / (x[k + 1] - x[k]);
    y[k] + (y[k + 1] - y[k]) * t
}

/// Bare-mode model for a field sweep: fixed resonator, Kittel magnon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePair<T = f64> {
    pub isrr: BareMode<T>,
    pub kittel: KittelParams<T>,
    pub magnon_linewidth: MagnonLinewidth<T>,
}

/// How the magnon linewidth depends on field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MagnonLinewidth<T = f64> {
    /// Field-independent half linewidth, rad/s.
    Constant(T),
    /// `α(ω_H + ω_m/2)` from the Kittel parameters.
    Gilbert,
}

impl<T: Real> ModePair<T> {
    pub fn magnon(&self, mu0_h: T) -> Result<BareMode<T>> {
        let w = kittel_frequency(mu0_h, &self.kittel)?;
        let dw = match self.magnon_linewidth {
            MagnonLinewidth::Constant(d) => d,
            MagnonLinewidth::Gilbert => self.kittel.gilbert_linewidth(mu0_h),
        };
        if !(w > T::zero()) {
            return Err(Error::Domain("zero magnon frequency at zero field".into()));
        }
        BareMode::new(w, dw)
    }

    pub fn eigenvalues(&self, mu0_h: T, coupling: &Coupling<T>) -> Result<HybridPair<T>> {
        Ok(hybrid_eigenvalues(&self.isrr, &self.magnon(mu0_h)?, coupling))
    }

    /// Field at which the bare modes cross.
    pub fn crossing_field(&self) -> T {
        kittel_field(self.isrr.omega, &self.kittel)
    }

    /// Eigenvalues over a field axis, tracked into two branches.
    pub fn sweep(&self, field: &[T], coupling: &Coupling<T>) -> Result<TrackedBranches<T>> {
        let pairs = field
            .iter()
            .map(|&h| self.eigenvalues(h, coupling))
            .collect::<Result<Vec<_>>>()?;
        track_branches(field, &pairs)
    }

    /// Anti-damping interval of one branch, refined against the closed form.
    pub fn zero_damping(&self, field: &[T], coupling: &Coupling<T>, branch: BranchLabel) -> Result<Option<(T, T)>> {
        let tr = self.sweep(field, coupling)?;
        let curve = match branch {
            BranchLabel::Upper => &tr.upper,
            BranchLabel::Lower => &tr.lower,
        };
        let prof = branch_linewidth(curve);
        zero_damping_fields_with(&prof, |h| match self.eigenvalues(h, coupling) {
            Ok(p) => {
                let w = match branch {
                    BranchLabel::Upper => p.upper,
                    BranchLabel::Lower => p.lower,
                };
                -w.im
            }
            Err(_) => T::nan(),
        })
    }
}

impl Default for ModePair<f64> {
    fn default() -> Self {
        Self {
            isrr: BareMode::from_hz(defaults::F_ISRR, defaults::DF_ISRR).expect("valid default"),
            kittel: KittelParams::default(),
            magnon_linewidth: MagnonLinewidth::Constant(units::ang(defaults::DF_MAGNON)),
        }
    }
}
