//! Inverse problems: coupling constant and bare modes from branch data,
//! and circuit calibration against coupled-mode observables.

use num_complex::Complex;

use crate::circuit_model::{circuit_modes, CircuitParams};
use crate::coupled_modes::{BareMode, Coupling, KittelParams, MagnonLinewidth, ModePair};
use crate::error::{Error, Result};
use crate::nrw_extraction::Direction;
use crate::optim::{levenberg_marquardt, nelder_mead, MAX_ITER, REL_TOL};
use crate::C64;

/// Complex branch frequencies (`ω − iΔω`, rad/s) against field.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchData {
    /// T
    pub field: Vec<f64>,
    pub upper: Option<Vec<C64>>,
    pub lower: Option<Vec<C64>>,
    /// Per-field weights, applied to both branches.
    pub weights: Option<Vec<f64>>,
    /// Known propagation direction. `None` fits both `κ` and `conj κ`.
    pub direction: Option<Direction>,
}

impl BranchData {
    pub fn validate(&self) -> Result<()> {
        let n = self.field.len();
        if n < 5 {
            return Err(Error::Data(format!("branch data needs at least 5 field points, got {n}")));
        }
        if self.upper.is_none() && self.lower.is_none() {
            return Err(Error::Data("branch data has neither upper nor lower branch".into()));
        }
        for (name, b) in [("upper", &self.upper), ("lower", &self.lower)] {
            if let Some(v) = b {
                if v.len() != n {
                    return Err(Error::Data(format!("{name} branch has {} points, field axis {n}", v.len())));
                }
                if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Data(format!("{name} branch has non-finite values")));
                }
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != n || w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Data("weights must be positive, one per field point".into()));
            }
        }
        Ok(())
    }

    /// Samples the closed-form model on a field axis.
    pub fn from_model(field: &[f64], modes: &ModePair, coupling: &Coupling) -> Result<Self> {
        let mut up = Vec::with_capacity(field.len());
        let mut lo = Vec::with_capacity(field.len());
        for &h in field {
            let p = modes.eigenvalues(h, coupling)?;
            up.push(p.upper);
            lo.push(p.lower);
        }
        Ok(Self { field: field.to_vec(), upper: Some(up), lower: Some(lo), weights: None, direction: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub kappa: C64,
    pub modes: ModePair,
    /// `‖r‖₂` of the weighted residuals in units of the resonator frequency.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted iteration.
    pub history: Vec<f64>,
    /// Residual norm of the fit started from the conjugate guess, when the
    /// direction was not given.
    pub conjugate_residual: Option<f64>,
}

fn model_pair(modes: &ModePair, h: f64, kappa: C64) -> Result<(C64, C64, f64)> {
    let isrr = modes.isrr;
    let mag = modes.magnon(h)?;
    let wc = isrr.complex();
    let wr = mag.complex();
    let d = wc - wr;
    let root = (d * d + (kappa * isrr.omega).powi(2)).sqrt();
    let s = wc + wr;
    let a = (s + root) * 0.5;
    let b = s - a;
    if a.re >= b.re {
        Ok((a, b, 1.0))
    } else {
        Ok((b, a, -1.0))
    }
}

fn residuals(data: &BranchData, modes: &ModePair, kappa: C64) -> Vec<f64> {
    let scale = modes.isrr.omega;
    let mut r = Vec::with_capacity(4 * data.field.len());
    for (k, &h) in data.field.iter().enumerate() {
        let w = data.weights.as_ref().map_or(1.0, |w| w[k]);
        let Ok((up, lo, _)) = model_pair(modes, h, kappa) else {
            r.extend([f64::NAN; 4]);
            continue;
        };
        if let Some(u) = &data.upper {
            let e = (up - u[k]) * (w / scale);
            r.push(e.re);
            r.push(e.im);
        }
        if let Some(l) = &data.lower {
            let e = (lo - l[k]) * (w / scale);
            r.push(e.re);
            r.push(e.im);
        }
    }
    r
}

fn jacobian(data: &BranchData, modes: &ModePair, kappa: C64) -> Vec<Vec<f64>> {
    let wc = modes.isrr.omega;
    let mut j = Vec::with_capacity(4 * data.field.len());
    for (k, &h) in data.field.iter().enumerate() {
        let w = data.weights.as_ref().map_or(1.0, |w| w[k]);
        let Ok((up, lo, sign)) = model_pair(modes, h, kappa) else {
            j.extend(vec![vec![0.0, 0.0]; 4]);
            continue;
        };
        // d(root)/dκ = ωc²κ/root, root = ±(up − lo)
        let root = (up - lo) * sign;
        let droot = if root.norm() > 0.0 { kappa * wc * wc / root } else { Complex::new(0.0, 0.0) };
        let dup = droot * (0.5 * sign) * (w / wc);
        let dlo = -dup;
        let mut push = |d: C64| {
            // columns: κ′, κ″ ; d/dκ″ = i·d/dκ
            let di = d * Complex::new(0.0, 1.0);
            j.push(vec![d.re, di.re]);
            j.push(vec![d.im, di.im]);
        };
        if data.upper.is_some() {
            push(dup);
        }
        if data.lower.is_some() {
            push(dlo);
        }
    }
    j
}

fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn fit_from(data: &BranchData, init: C64, modes: &ModePair) -> FitResult {
    let m = levenberg_marquardt(
        |x| residuals(data, modes, Complex::new(x[0], x[1])),
        |x| jacobian(data, modes, Complex::new(x[0], x[1])),
        &[init.re, init.im],
        MAX_ITER,
        REL_TOL,
    );
    let kappa = Complex::new(m.x[0], m.x[1]);
    FitResult {
        kappa,
        modes: *modes,
        residual_norm: norm(&residuals(data, modes, kappa)),
        iterations: m.iterations,
        converged: m.converged,
        history: m.history,
        conjugate_residual: None,
    }
}

/// Least-squares `κ` for known bare modes.
///
/// With no direction label both `init` and `conj(init)` are tried and the
/// lower-residual result is returned.
pub fn fit_coupling(data: &BranchData, init: Coupling, modes: &ModePair) -> Result<FitResult> {
    data.validate()?;
    if !(init.kappa.re.is_finite() && init.kappa.im.is_finite()) {
        return Err(Error::Domain("initial coupling must be finite".into()));
    }
    let a = fit_from(data, init.kappa, modes);
    if data.direction.is_some() {
        return Ok(a);
    }
    let mut b = fit_from(data, init.kappa.conj(), modes);
    // A purely real guess leaves the sign of κ″ to the data; also try a
    // small kick to each side.
    if init.kappa.im == 0.0 {
        let kick = Complex::new(0.0, 0.25 * init.kappa.re.abs().max(1e-3));
        let c = fit_from(data, init.kappa + kick, modes);
        let d = fit_from(data, init.kappa - kick, modes);
        let best = if c.residual_norm <= d.residual_norm { c } else { d };
        if best.residual_norm < b.residual_norm {
            b = best;
        }
    }
    let (mut win, lose) = if a.residual_norm <= b.residual_norm { (a, b) } else { (b, a) };
    win.conjugate_residual = Some(lose.residual_norm);
    Ok(win)
}

/// Co-fit of `κ` with the resonator frequency, both linewidths and, when
/// `gilbert` is false, a constant magnon linewidth. Simplex descent.
pub fn fit_coupling_and_modes(data: &BranchData, init: Coupling, modes: &ModePair) -> Result<FitResult> {
    data.validate()?;
    let start = fit_coupling(data, init, modes)?;
    let w0 = modes.isrr.omega;
    let mag0 = match modes.magnon_linewidth {
        MagnonLinewidth::Constant(d) => d,
        MagnonLinewidth::Gilbert => modes.kittel.alpha,
    };
    let unpack = |x: &[f64]| -> ModePair {
        let isrr = BareMode { omega: w0 * (1.0 + x[2]), linewidth: (modes.isrr.linewidth * x[3].exp()).max(0.0) };
        let ml = match modes.magnon_linewidth {
            MagnonLinewidth::Constant(_) => MagnonLinewidth::Constant(mag0 * x[4].exp()),
            MagnonLinewidth::Gilbert => MagnonLinewidth::Gilbert,
        };
        let kittel = match modes.magnon_linewidth {
            MagnonLinewidth::Gilbert => KittelParams { alpha: (mag0 * x[4].exp()).min(0.999), ..modes.kittel },
            _ => modes.kittel,
        };
        ModePair { isrr, kittel, magnon_linewidth: ml }
    };
    let obj = |x: &[f64]| {
        let m = unpack(x);
        let r = residuals(data, &m, Complex::new(x[0], x[1]));
        0.5 * r.iter().map(|v| v * v).sum::<f64>()
    };
    let k = start.kappa;
    let x0 = [k.re, k.im, 0.0, 0.0, 0.0];
    let step = [0.1 * k.norm().max(1e-3), 0.1 * k.norm().max(1e-3), 1e-3, 0.2, 0.2];
    let m = nelder_mead(obj, &x0, &step, MAX_ITER, REL_TOL);
    let modes_fit = unpack(&m.x);
    let kappa = Complex::new(m.x[0], m.x[1]);
    // Polish κ for the final bare modes.
    let polished = fit_from(data, kappa, &modes_fit);
    Ok(FitResult {
        iterations: m.iterations + polished.iterations,
        converged: m.converged && polished.converged,
        history: m.history.into_iter().chain(polished.history.into_iter().skip(1)).collect(),
        conjugate_residual: start.conjugate_residual,
        ..polished
    })
}

/// Off-resonance measurements used to pin down the bare modes.
#[derive(Debug, Clone, PartialEq)]
pub struct OffResonanceData {
    /// `(frequency Hz, |S21|²)` across the resonator dip at a field far
    /// from the crossing.
    pub isrr_spectrum: Vec<(f64, f64)>,
    /// `(field T, magnon frequency Hz, optional half linewidth Hz)`.
    pub magnon_locus: Vec<(f64, f64, Option<f64>)>,
    /// Locus points closer than this to the resonator frequency are
    /// excluded, Hz.
    pub exclusion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BareFit {
    pub isrr: BareMode,
    pub kittel: KittelParams,
    /// Depth and baseline of the Lorentzian dip.
    pub depth: f64,
    pub baseline: f64,
}

/// Lorentzian dip `b − A·Δ²/((f − f0)² + Δ²)` fitted by simplex descent.
fn fit_lorentzian_dip(sp: &[(f64, f64)]) -> Result<(f64, f64, f64, f64)> {
    if sp.len() < 5 {
        return Err(Error::Data("resonator spectrum needs at least 5 points".into()));
    }
    let (kmin, &(f_min, y_min)) = sp
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
        .ok_or_else(|| Error::Data("empty spectrum".into()))?;
    let mut edges: Vec<f64> = sp.iter().map(|p| p.1).collect();
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let base = edges[edges.len() * 9 / 10];
    let depth = base - y_min;
    if !(depth > 0.0) {
        return Err(Error::Data("no resonance dip found in the resonator spectrum".into()));
    }
    let half = base - depth / 2.0;
    let lo = sp[..kmin].iter().rev().find(|p| p.1 > half).map(|p| p.0);
    let hi = sp[kmin..].iter().find(|p| p.1 > half).map(|p| p.0);
    let width = match (lo, hi) {
        (Some(a), Some(b)) => (b - a) / 2.0,
        (Some(a), None) => f_min - a,
        (None, Some(b)) => b - f_min,
        (None, None) => return Err(Error::Data("resonator dip wider than the spectrum".into())),
    };
    let scale_f = width.max(1.0);
    let obj = |x: &[f64]| {
        let f0 = f_min + x[0] * scale_f;
        let d = width * x[1].exp();
        let a = depth * x[2];
        let b = base + depth * x[3];
        sp.iter()
            .map(|&(f, y)| {
                let m = b - a * d * d / ((f - f0).powi(2) + d * d);
                (m - y).powi(2)
            })
            .sum::<f64>()
            / (depth * depth)
    };
    let m = nelder_mead(obj, &[0.0, 0.0, 1.0, 0.0], &[0.1, 0.1, 0.05, 0.05], MAX_ITER, REL_TOL);
    let m = nelder_mead(obj, &m.x, &[0.01, 0.01, 0.01, 0.01], MAX_ITER, REL_TOL);
    Ok((f_min + m.x[0] * scale_f, width * m.x[1].exp(), depth * m.x[2], base + depth * m.x[3]))
}

/// Bare resonator from its dip and Kittel constants from the magnon locus.
///
/// The locus regression uses `ω_r² = (γμ0)²H² + (γμ0)²·μ0Ms·H`, linear in
/// the two unknowns. Linewidths, when given, fix `α` through
/// `Δω = α(ω_H + ω_m/2)`.
pub fn fit_bare_modes(data: &OffResonanceData) -> Result<BareFit> {
    let (f0, df, depth, baseline) = fit_lorentzian_dip(&data.isrr_spectrum)?;
    let pts: Vec<_> = data.magnon_locus.iter().filter(|p| (p.1 - f0).abs() >= data.exclusion).collect();
    let distinct = {
        let mut h: Vec<f64> = pts.iter().map(|p| p.0).collect();
        h.sort_by(|a, b| a.partial_cmp(b).unwrap());
        h.dedup();
        h.len()
    };
    if distinct < 2 {
        let lo = crate::coupled_modes::kittel_field(crate::units::ang(f0 - data.exclusion), &KittelParams::default());
        let hi = crate::coupled_modes::kittel_field(crate::units::ang(f0 + data.exclusion), &KittelParams::default());
        return Err(Error::Data(format!(
            "magnon locus needs points at two or more fields outside {:.1}-{:.1} mT (frequencies outside {:.3}±{:.3} GHz)",
            lo * 1e3,
            hi * 1e3,
            f0 / 1e9,
            data.exclusion / 1e9
        )));
    }
    // Normal equations for y = a·H² + b·H with y = ω².
    let (mut s44, mut s33, mut s22, mut s2y, mut s1y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in &pts {
        let h = p.0;
        let y = crate::units::ang(p.1).powi(2);
        s44 += h.powi(4);
        s33 += h.powi(3);
        s22 += h * h;
        s2y += h * h * y;
        s1y += h * y;
    }
    let det = s44 * s22 - s33 * s33;
    if det.abs() <= f64::EPSILON * s44 * s22 {
        return Err(Error::Data("magnon locus fields are degenerate".into()));
    }
    let a = (s2y * s22 - s1y * s33) / det;
    let b = (s44 * s1y - s33 * s2y) / det;
    if !(a > 0.0) {
        return Err(Error::Data("magnon locus does not follow the Kittel form".into()));
    }
    let gamma_mu0 = a.sqrt();
    let mu0_ms = b / a;
    let mut kittel = KittelParams { gamma_mu0, mu0_ms, alpha: 0.0 };
    let widths: Vec<_> = pts.iter().filter_map(|p| p.2.map(|d| (p.0, d))).collect();
    if !widths.is_empty() {
        let (mut num, mut den) = (0.0, 0.0);
        for (h, d) in widths {
            let x = kittel.omega_h(h) + kittel.omega_m() / 2.0;
            num += x * crate::units::ang(d);
            den += x * x;
        }
        kittel.alpha = num / den;
    }
    kittel.validate()?;
    Ok(BareFit { isrr: BareMode::from_hz(f0, df)?, kittel, depth, baseline })
}

/// Observables a circuit calibration aims at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    /// Resonator frequency, rad/s.
    pub omega_isrr: f64,
    /// Resonator half linewidth, rad/s. `None` keeps the seed's.
    pub linewidth_isrr: Option<f64>,
    /// Coupling in the resonance convention.
    pub kappa: C64,
    /// Bare crossing field, T. Only checked, since it is fixed by the
    /// Kittel constants.
    pub crossing_field: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: CircuitParams,
    /// `κ` fitted to the calibrated circuit's modes.
    pub fitted_kappa: C64,
    /// Relative error of the resonator frequency.
    pub omega_residual: f64,
    /// Relative error of `|κ|`, which sets the branch gap.
    pub gap_residual: f64,
    /// Relative error of `Im κ`.
    pub asymmetry_residual: f64,
    /// Crossing field mismatch, T.
    pub crossing_residual: Option<f64>,
    pub converged: bool,
}

/// Field axis used to sample circuit modes around the crossing.
pub fn crossing_window(params: &CircuitParams, half_width: f64, points: usize) -> Result<Vec<f64>> {
    let w = params.isrr_mode()?.omega;
    let hx = crate::coupled_modes::kittel_field(w, &params.kittel);
    Ok((0..points).map(|k| hx - half_width + 2.0 * half_width * k as f64 / (points - 1) as f64).collect())
}

/// Bare-mode model implied by the circuit: loaded resonator, Kittel magnon
/// with Gilbert linewidth.
pub fn circuit_bare_modes(params: &CircuitParams) -> Result<ModePair> {
    Ok(ModePair { isrr: params.isrr_mode()?, kittel: params.kittel, magnon_linewidth: MagnonLinewidth::Gilbert })
}

/// Fits the closed-form two-mode model to the circuit's own natural
/// frequencies on `field`.
pub fn fit_circuit_modes(params: &CircuitParams, field: &[f64], co_fit: bool) -> Result<FitResult> {
    let mut up = Vec::with_capacity(field.len());
    let mut lo = Vec::with_capacity(field.len());
    for &h in field {
        let m = circuit_modes(params, h)?;
        up.push(m.upper);
        lo.push(m.lower);
    }
    let data = BranchData { field: field.to_vec(), upper: Some(up), lower: Some(lo), weights: None, direction: Some(Direction::Forward) };
    let modes = circuit_bare_modes(params)?;
    // κ² scales like Mc; start from the estimate κ ≈ √(ω_m/ω_H · Mc·L0/L_ISRR), conjugated.
    let hx = modes.crossing_field();
    let ratio = params.kittel.omega_m() / params.kittel.omega_h(hx).max(1.0);
    let guess = (params.mc.conj() * (ratio * params.l0 / params.l_isrr)).sqrt();
    let guess = if guess.norm() > 0.0 { guess } else { Complex::new(1e-3, 0.0) };
    if co_fit {
        fit_coupling_and_modes(&data, Coupling { kappa: guess }, &modes)
    } else {
        fit_coupling(&data, Coupling { kappa: guess }, &modes)
    }
}

/// Adjusts the resonator elements and `|Mc|` so that the circuit reproduces
/// the target resonator frequency, linewidth and `|κ|`, with
/// `arg Mc = −arg κ`.
pub fn calibrate_circuit(targets: &CalibrationTargets, seed: &CircuitParams) -> Result<Calibration> {
    seed.validate()?;
    if !(targets.omega_isrr > 0.0) || targets.kappa.norm() == 0.0 || !targets.kappa.re.is_finite() {
        return Err(Error::Domain("calibration targets must be a positive frequency and a nonzero finite coupling".into()));
    }
    let mut p = *seed;
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let iso = seed.isrr_mode()?;
    if !same(iso.omega, targets.omega_isrr) {
        let ct = 1.0 / (targets.omega_isrr.powi(2) * p.l_isrr);
        if ct <= p.c0 {
            return Err(Error::Domain(format!(
                "resonator frequency {:.4e} rad/s needs a total capacitance below the line capacitance",
                targets.omega_isrr
            )));
        }
        p.c_isrr = ct - p.c0;
    }
    if let Some(dw) = targets.linewidth_isrr {
        if !same(p.isrr_mode()?.linewidth, dw) {
            p.r_isrr = 1.0 / (2.0 * p.c_total() * dw);
        }
    }
    let dir = targets.kappa.conj() / targets.kappa.norm();
    let mag = seed.mc.norm();
    let mag = if mag > 0.0 { mag } else { 1e-3 };
    if (seed.mc / mag - dir).norm() > 1e-12 {
        p.mc = dir * mag;
    }
    let field = crossing_window(&p, 0.02, 41)?;
    let kfit = |q: &CircuitParams| -> Result<C64> { Ok(fit_circuit_modes(q, &field, false)?.kappa) };
    let target = targets.kappa.norm();
    let mut k = kfit(&p)?;
    let mut converged = ((k.norm() - target) / target).abs() < 1e-6;
    // Secant on log|Mc| against log|κ|; |κ|² ∝ |Mc| to leading order.
    let mut x0 = p.mc.norm().ln();
    let mut y0 = (k.norm() / target).ln();
    let mut x1 = x0 - 2.0 * y0;
    for _ in 0..60 {
        if converged {
            break;
        }
        let q = p.with_mc(dir * x1.exp());
        let k1 = kfit(&q)?;
        let y1 = (k1.norm() / target).ln();
        p = q;
        k = k1;
        if y1.abs() < 1e-8 {
            converged = true;
            break;
        }
        let slope = if (x1 - x0).abs() > 0.0 { (y1 - y0) / (x1 - x0) } else { 0.5 };
        let slope = if slope.abs() < 1e-3 { 0.5 } else { slope };
        x0 = x1;
        y0 = y1;
        x1 -= y1 / slope;
    }
    let crossing = targets
        .crossing_field
        .map(|hx| crate::coupled_modes::kittel_field(p.isrr_mode().map(|m| m.omega).unwrap_or(f64::NAN), &p.kittel) - hx);
    Ok(Calibration {
        params: p,
        fitted_kappa: k,
        omega_residual: (p.isrr_mode()?.omega - targets.omega_isrr) / targets.omega_isrr,
        gap_residual: (k.norm() - target) / target,
        asymmetry_residual: (k.im - targets.kappa.im) / targets.kappa.im.abs().max(1e-300),
        crossing_residual: crossing,
        converged,
    })
}
