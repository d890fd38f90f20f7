//! Field/frequency maps, negative-index regions and coupling studies.

use std::collections::VecDeque;

use num_complex::Complex;
use rayon::prelude::*;

use crate::circuit_model::{circuit_modes, material_sweep, slab_sparams, BlochBranch, CircuitParams};
use crate::coupled_modes::{track_branches, BranchLabel, Coupling, ModePair, TrackedBranches};
use crate::error::{Error, Result};
use crate::fitting::{circuit_bare_modes, crossing_window, fit_circuit_modes, FitResult};
use crate::nrw_extraction::Direction;
use crate::C64;

/// Layer names in storage order.
pub const LAYERS: [&str; 9] = ["s21_abs", "s21_arg", "n_re", "n_loss", "eps_re", "eps_loss", "mu_re", "mu_loss", "condition"];

/// Sampling axes of a map.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// T, strictly increasing.
    pub field: Vec<f64>,
    /// Hz, strictly increasing.
    pub freq: Vec<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

fn increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] > w[0])
}

impl Grid {
    pub fn new(field: Vec<f64>, freq: Vec<f64>) -> Result<Self> {
        let g = Self { field, freq };
        g.validate()?;
        Ok(g)
    }

    pub fn linear(f_lo: f64, f_hi: f64, nf: usize, h_lo: f64, h_hi: f64, nh: usize) -> Result<Self> {
        if nf == 0 || nh == 0 {
            return Err(Error::Domain("grid needs at least one point per axis".into()));
        }
        Self::new(linspace(h_lo, h_hi, nh), linspace(f_lo, f_hi, nf))
    }

    pub fn validate(&self) -> Result<()> {
        if self.field.is_empty() || self.freq.is_empty() {
            return Err(Error::Domain("empty grid axis".into()));
        }
        if !increasing(&self.field) || !increasing(&self.freq) {
            return Err(Error::Domain("grid axes must be finite and strictly increasing".into()));
        }
        if self.freq[0] <= 0.0 || self.field[0] < 0.0 {
            return Err(Error::Domain("grid needs positive frequencies and non-negative fields".into()));
        }
        Ok(())
    }

    fn step(v: &[f64]) -> f64 {
        if v.len() > 1 {
            (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
        } else {
            0.0
        }
    }

    /// Mean field step, T.
    pub fn field_step(&self) -> f64 {
        Self::step(&self.field)
    }

    /// Mean frequency step, Hz.
    pub fn freq_step(&self) -> f64 {
        Self::step(&self.freq)
    }
}

impl Default for Grid {
    /// 2.8–4.2 GHz in 701 points by 40–80 mT in 401 points.
    fn default() -> Self {
        Self { field: linspace(0.040, 0.080, 401), freq: linspace(2.8e9, 4.2e9, 701) }
    }
}

/// Named scalar layers over a field × frequency grid, stored field-major:
/// element `(i, j)` of a layer is at `i·nfreq + j` for field `i`,
/// frequency `j`. Masked points hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFrequencyMap {
    pub grid: Grid,
    pub layers: Vec<(String, Vec<f64>)>,
}

impl FieldFrequencyMap {
    pub fn new(grid: Grid) -> Result<Self> {
        grid.validate()?;
        Ok(Self { grid, layers: Vec::new() })
    }

    pub fn nfield(&self) -> usize {
        self.grid.field.len()
    }

    pub fn nfreq(&self) -> usize {
        self.grid.freq.len()
    }

    pub fn insert(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        if values.len() != self.nfield() * self.nfreq() {
            return Err(Error::Data(format!(
                "layer {name} has {} values, grid has {}",
                values.len(),
                self.nfield() * self.nfreq()
            )));
        }
        match self.layers.iter_mut().find(|l| l.0 == name) {
            Some(l) => l.1 = values,
            None => self.layers.push((name.to_string(), values)),
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&[f64]> {
        self.layers.iter().find(|l| l.0 == name).map(|l| l.1.as_slice())
    }

    pub fn get(&self, name: &str, i_field: usize, j_freq: usize) -> Option<f64> {
        self.layer(name).map(|v| v[i_field * self.nfreq() + j_freq])
    }

    /// One field row of a layer.
    pub fn row(&self, name: &str, i_field: usize) -> Option<&[f64]> {
        let n = self.nfreq();
        self.layer(name).map(|v| &v[i_field * n..(i_field + 1) * n])
    }
}

struct Row {
    s21: Vec<C64>,
    n: Vec<C64>,
    eps: Vec<C64>,
    mu: Vec<C64>,
    cond: Vec<f64>,
}

fn row(p: &CircuitParams, h: f64, freq: &[f64], with_s: bool) -> Row {
    let m = material_sweep(freq, h, p, BlochBranch::Principal);
    let nan = Complex::new(f64::NAN, f64::NAN);
    let s21 = if with_s {
        (0..freq.len())
            .map(|k| {
                if m.masked[k] {
                    return nan;
                }
                slab_sparams(m.n[k], m.z[k], freq[k], p.ls).map(|s| s.1).unwrap_or(nan)
            })
            .collect()
    } else {
        Vec::new()
    };
    Row { s21, n: m.n, eps: m.eps, mu: m.mu, cond: m.condition }
}

/// All layers for one propagation direction. Points where the circuit is
/// singular are carried as NaN.
///
/// `s21_*` come from a slab with the circuit's `(n, z)`; `*_loss` layers are
/// the loss-positive imaginary parts (`−Im`); `s21_arg` is in radians.
pub fn build_maps(params: &CircuitParams, grid: &Grid, dir: Direction) -> Result<FieldFrequencyMap> {
    params.validate()?;
    let mut map = FieldFrequencyMap::new(grid.clone())?;
    let pd = params.for_direction(dir);
    let rows: Vec<Row> = grid.field.par_iter().map(|&h| row(&pd, h, &grid.freq, true)).collect();
    let flat = |f: &dyn Fn(&Row) -> Vec<f64>| rows.iter().flat_map(f).collect::<Vec<f64>>();
    map.insert("s21_abs", flat(&|r| r.s21.iter().map(|z| z.norm()).collect()))?;
    map.insert("s21_arg", flat(&|r| r.s21.iter().map(|z| z.arg()).collect()))?;
    map.insert("n_re", flat(&|r| r.n.iter().map(|z| z.re).collect()))?;
    map.insert("n_loss", flat(&|r| r.n.iter().map(|z| -z.im).collect()))?;
    map.insert("eps_re", flat(&|r| r.eps.iter().map(|z| z.re).collect()))?;
    map.insert("eps_loss", flat(&|r| r.eps.iter().map(|z| -z.im).collect()))?;
    map.insert("mu_re", flat(&|r| r.mu.iter().map(|z| z.re).collect()))?;
    map.insert("mu_loss", flat(&|r| r.mu.iter().map(|z| -z.im).collect()))?;
    map.insert("condition", flat(&|r| r.cond.clone()))?;
    Ok(map)
}

/// Only the `n_re` layer; cheaper for sweeps.
pub fn index_map(params: &CircuitParams, grid: &Grid, dir: Direction) -> Result<FieldFrequencyMap> {
    params.validate()?;
    let mut map = FieldFrequencyMap::new(grid.clone())?;
    let pd = params.for_direction(dir);
    let rows: Vec<Row> = grid.field.par_iter().map(|&h| row(&pd, h, &grid.freq, false)).collect();
    map.insert("n_re", rows.iter().flat_map(|r| r.n.iter().map(|z| z.re)).collect())?;
    Ok(map)
}

/// Thresholds for calling a connected set of `n′ < 0` cells a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCriteria {
    pub min_cells: usize,
    /// Cells at or below this count as strongly negative.
    pub strong_level: f64,
    pub min_strong: usize,
}

impl Default for RegionCriteria {
    fn default() -> Self {
        Self { min_cells: 4, strong_level: -0.05, min_strong: 4 }
    }
}

/// A 4-connected set of grid cells with `n′ < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NriRegion {
    /// `(field index, frequency index)`.
    pub cells: Vec<(usize, usize)>,
    pub min_n: f64,
    /// T
    pub argmin_field: f64,
    /// Hz
    pub argmin_freq: f64,
    /// T
    pub field_range: (f64, f64),
    /// Hz
    pub freq_range: (f64, f64),
    /// Cell count times the grid cell area, T·Hz.
    pub area: f64,
    /// Hybrid branch nearest to the minimum, once associated.
    pub branch: Option<BranchLabel>,
}

impl NriRegion {
    pub fn field_span(&self) -> f64 {
        self.field_range.1 - self.field_range.0
    }

    pub fn freq_span(&self) -> f64 {
        self.freq_range.1 - self.freq_range.0
    }

    /// Distinct field indices covered.
    pub fn field_columns(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cells.iter().map(|c| c.0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Connected negative-index regions of the `n_re` layer, most negative
/// first.
pub fn detect_nri_regions(map: &FieldFrequencyMap, crit: &RegionCriteria) -> Result<Vec<NriRegion>> {
    let n = map.layer("n_re").ok_or_else(|| Error::Data("map has no n_re layer".into()))?;
    let (nh, nf) = (map.nfield(), map.nfreq());
    let mut seen = vec![false; n.len()];
    let mut out = Vec::new();
    let cell_area = map.grid.field_step() * map.grid.freq_step();
    for start in 0..n.len() {
        if seen[start] || !(n[start] < 0.0) {
            continue;
        }
        let mut cells = Vec::new();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = q.pop_front() {
            let (i, j) = (k / nf, k % nf);
            cells.push((i, j));
            let mut visit = |ii: usize, jj: usize| {
                let kk = ii * nf + jj;
                if !seen[kk] && n[kk] < 0.0 {
                    seen[kk] = true;
                    q.push_back(kk);
                }
            };
            if i > 0 {
                visit(i - 1, j);
            }
            if i + 1 < nh {
                visit(i + 1, j);
            }
            if j > 0 {
                visit(i, j - 1);
            }
            if j + 1 < nf {
                visit(i, j + 1);
            }
        }
        let strong = cells.iter().filter(|&&(i, j)| n[i * nf + j] <= crit.strong_level).count();
        if cells.len() < crit.min_cells || strong < crit.min_strong {
            continue;
        }
        let &(mi, mj) = cells
            .iter()
            .min_by(|a, b| n[a.0 * nf + a.1].partial_cmp(&n[b.0 * nf + b.1]).unwrap())
            .unwrap();
        let f = &map.grid.field;
        let w = &map.grid.freq;
        let (ilo, ihi) = cells.iter().fold((usize::MAX, 0), |(a, b), c| (a.min(c.0), b.max(c.0)));
        let (jlo, jhi) = cells.iter().fold((usize::MAX, 0), |(a, b), c| (a.min(c.1), b.max(c.1)));
        out.push(NriRegion {
            min_n: n[mi * nf + mj],
            argmin_field: f[mi],
            argmin_freq: w[mj],
            field_range: (f[ilo], f[ihi]),
            freq_range: (w[jlo], w[jhi]),
            area: cells.len() as f64 * cell_area,
            cells,
            branch: None,
        });
    }
    out.sort_by(|a, b| a.min_n.partial_cmp(&b.min_n).unwrap());
    Ok(out)
}

/// Circuit natural frequencies over a field axis, tracked into branches.
pub fn circuit_branches(params: &CircuitParams, field: &[f64], dir: Direction) -> Result<TrackedBranches> {
    let pd = params.for_direction(dir);
    let pairs = field.iter().map(|&h| circuit_modes(&pd, h)).collect::<Result<Vec<_>>>()?;
    track_branches(field, &pairs)
}

/// Labels each region with the branch whose real frequency is closest at
/// the region's minimum.
pub fn associate_branches(regions: &mut [NriRegion], params: &CircuitParams, dir: Direction) -> Result<()> {
    let pd = params.for_direction(dir);
    for r in regions {
        let m = circuit_modes(&pd, r.argmin_field)?;
        let w = crate::units::ang(r.argmin_freq);
        r.branch = Some(if (m.upper.re - w).abs() <= (m.lower.re - w).abs() { BranchLabel::Upper } else { BranchLabel::Lower });
    }
    Ok(())
}

/// Closed-form two-mode model calibrated to a circuit's natural frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeModel {
    pub modes: ModePair,
    pub coupling: Coupling,
    pub fit: FitResult,
}

impl ModeModel {
    /// Anti-damping interval of a branch, T.
    pub fn antidamping(&self, field: &[f64], branch: BranchLabel) -> Result<Option<(f64, f64)>> {
        self.modes.zero_damping(field, &self.coupling, branch)
    }

    /// Branch with the most negative linewidth on `field`, with its
    /// anti-damping interval.
    pub fn antidamped_branch(&self, field: &[f64]) -> Result<Option<(BranchLabel, (f64, f64))>> {
        let tr = self.modes.sweep(field, &self.coupling)?;
        let lo = |c: &crate::coupled_modes::BranchCurve| c.values.iter().map(|z| -z.im).fold(f64::INFINITY, f64::min);
        let (u, l) = (lo(&tr.upper), lo(&tr.lower));
        if u >= 0.0 && l >= 0.0 {
            return Ok(None);
        }
        let b = if u <= l { BranchLabel::Upper } else { BranchLabel::Lower };
        Ok(self.antidamping(field, b)?.map(|iv| (b, iv)))
    }
}

/// Fits the two-mode model to the circuit's modes within ±`half_width` of
/// the bare crossing, for one direction.
pub fn calibrate_mode_model(params: &CircuitParams, dir: Direction, half_width: f64) -> Result<ModeModel> {
    let pd = params.for_direction(dir);
    let field = crossing_window(&pd, half_width, 81)?;
    let fit = fit_circuit_modes(&pd, &field, false)?;
    let modes = circuit_bare_modes(&pd)?;
    Ok(ModeModel { modes, coupling: Coupling { kappa: fit.kappa }, fit })
}

/// Share of a region's field columns that fall inside an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub interval: Option<(f64, f64)>,
    pub region_field_range: (f64, f64),
    /// `None` when there is no anti-damping interval.
    pub fraction: Option<f64>,
}

/// Fraction of the region's field extent inside the anti-damping interval,
/// counted over grid columns.
pub fn correlate_antidamping(region: &NriRegion, grid: &Grid, interval: Option<(f64, f64)>) -> Containment {
    let cols = region.field_columns();
    let fraction = interval.map(|(a, b)| {
        let tol = 1e-9 + 0.5 * grid.field_step() * 1e-6;
        let inside = cols.iter().filter(|&&i| grid.field[i] >= a - tol && grid.field[i] <= b + tol).count();
        inside as f64 / cols.len() as f64
    });
    Containment { interval, region_field_range: region.field_range, fraction }
}

/// One point of a coupling-strength sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Scale applied to `Mc`.
    pub ratio: f64,
    /// `κ` of the mode model fitted at this scale.
    pub kappa: C64,
    pub nri_present: bool,
    /// Most negative `n′` on the map.
    pub peak_n: f64,
    /// Field span of the dominant region, T.
    pub nri_field_span: Option<f64>,
    /// Width of the anti-damping interval `H+ − H−`, T.
    pub dh_nd: Option<f64>,
    pub regions: usize,
}

/// Scales `Mc` by each ratio and records NRI presence, peak index and the
/// anti-damping width for one direction.
pub fn coupling_sweep(
    params: &CircuitParams,
    grid: &Grid,
    dir: Direction,
    ratios: &[f64],
    crit: &RegionCriteria,
) -> Result<Vec<SweepPoint>> {
    ratios
        .iter()
        .map(|&r| {
            if !(r >= 0.0) || !r.is_finite() {
                return Err(Error::Domain(format!("coupling ratio {r} must be non-negative")));
            }
            let p = params.with_mc(params.mc * r);
            let map = index_map(&p, grid, dir)?;
            let regions = detect_nri_regions(&map, crit)?;
            let peak_n = map.layer("n_re").unwrap().iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
            let (kappa, dh_nd) = if r == 0.0 {
                (Complex::new(0.0, 0.0), None)
            } else {
                let model = calibrate_mode_model(&p, dir, 0.02)?;
                let dh = model.antidamped_branch(&grid.field)?.map(|(_, (a, b))| b - a);
                (model.coupling.kappa, dh)
            };
            Ok(SweepPoint {
                ratio: r,
                kappa,
                nri_present: !regions.is_empty(),
                peak_n,
                nri_field_span: regions.first().map(|g| g.field_span()),
                dh_nd,
                regions: regions.len(),
            })
        })
        .collect()
}

/// Total NRI area for one imaginary part of `Mc`.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationPoint {
    pub mc: C64,
    /// T·Hz
    pub area: f64,
    pub cells: usize,
    pub regions: usize,
    pub peak_n: f64,
}

/// Holds `Re Mc` and sets `Im Mc` to each value in turn (forward
/// direction), summing the area of all detected regions.
pub fn im_coupling_ablation(
    params: &CircuitParams,
    grid: &Grid,
    im_values: &[f64],
    crit: &RegionCriteria,
) -> Result<Vec<AblationPoint>> {
    im_values
        .iter()
        .map(|&im| {
            let mc = Complex::new(params.mc.re, im);
            let p = params.with_mc(mc);
            let map = index_map(&p, grid, Direction::Forward)?;
            let regions = detect_nri_regions(&map, crit)?;
            let peak_n = map.layer("n_re").unwrap().iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
            Ok(AblationPoint {
                mc,
                area: regions.iter().map(|g| g.area).sum(),
                cells: regions.iter().map(|g| g.cells.len()).sum(),
                regions: regions.len(),
                peak_n,
            })
        })
        .collect()
}

/// Forward/reverse comparison of the dominant regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonreciprocity {
    /// Overlap of the two field ranges over the smaller range.
    pub field_overlap: f64,
    /// T
    pub argmin_field_shift: f64,
    /// Hz
    pub argmin_freq_shift: f64,
}

pub fn compare_directions(fwd: &NriRegion, rev: &NriRegion) -> Nonreciprocity {
    let lo = fwd.field_range.0.max(rev.field_range.0);
    let hi = fwd.field_range.1.min(rev.field_range.1);
    let small = fwd.field_span().min(rev.field_span());
    let field_overlap = if hi < lo {
        0.0
    } else if small > 0.0 {
        (hi - lo) / small
    } else {
        1.0
    };
    Nonreciprocity {
        field_overlap,
        argmin_field_shift: rev.argmin_field - fwd.argmin_field,
        argmin_freq_shift: rev.argmin_freq - fwd.argmin_freq,
    }
}
