//! Touchstone v1 two-port files, grid CSV and run configuration.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex;
use serde::Deserialize;

use crate::analysis::{FieldFrequencyMap, Grid, RegionCriteria};
use crate::circuit_model::CircuitDesign;
use crate::coupled_modes::{BareMode, Coupling, KittelParams, MagnonLinewidth, ModePair};
use crate::error::{Error, Result};
use crate::nrw_extraction::{Direction, ExtractionConfig, LogBranch, MaterialSpectrum, TwoPortSpectrum};
use crate::units::{self, defaults};
use crate::C64;

/// Complex number pair encoding in a Touchstone data row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumberFormat {
    #[default]
    Ri,
    Ma,
    Db,
}

/// Frequency unit of a Touchstone file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FreqUnit {
    Hz,
    Khz,
    Mhz,
    #[default]
    Ghz,
}

impl FreqUnit {
    pub fn scale(self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::Khz => 1e3,
            FreqUnit::Mhz => 1e6,
            FreqUnit::Ghz => 1e9,
        }
    }

    fn name(self) -> &'static str {
        match self {
            FreqUnit::Hz => "HZ",
            FreqUnit::Khz => "KHZ",
            FreqUnit::Mhz => "MHZ",
            FreqUnit::Ghz => "GHZ",
        }
    }
}

/// Parsed option line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionLine {
    pub unit: FreqUnit,
    pub format: NumberFormat,
    /// Reference resistance, Ω.
    pub resistance: f64,
}

impl Default for OptionLine {
    fn default() -> Self {
        Self { unit: FreqUnit::Ghz, format: NumberFormat::Ma, resistance: 50.0 }
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_option_line(text: &str, line: usize) -> Result<OptionLine> {
    let mut o = OptionLine::default();
    let toks: Vec<String> = text.trim_start_matches('#').split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
    let mut k = 0;
    while k < toks.len() {
        match toks[k].as_str() {
            "HZ" => o.unit = FreqUnit::Hz,
            "KHZ" => o.unit = FreqUnit::Khz,
            "MHZ" => o.unit = FreqUnit::Mhz,
            "GHZ" => o.unit = FreqUnit::Ghz,
            "S" => {}
            "Y" | "Z" | "H" | "G" => return Err(parse_err(line, format!("parameter type {} is not supported, only S", toks[k]))),
            "RI" => o.format = NumberFormat::Ri,
            "MA" => o.format = NumberFormat::Ma,
            "DB" => o.format = NumberFormat::Db,
            "R" => {
                let v = toks.get(k + 1).ok_or_else(|| parse_err(line, "option R needs a value"))?;
                o.resistance = v.parse().map_err(|_| parse_err(line, format!("bad reference resistance {v:?}")))?;
                if !(o.resistance > 0.0) {
                    return Err(parse_err(line, "reference resistance must be positive"));
                }
                k += 1;
            }
            t => return Err(parse_err(line, format!("unknown option token {t:?}"))),
        }
        k += 1;
    }
    Ok(o)
}

fn pair(a: f64, b: f64, f: NumberFormat) -> C64 {
    match f {
        NumberFormat::Ri => Complex::new(a, b),
        NumberFormat::Ma => Complex::from_polar(a, b.to_radians()),
        NumberFormat::Db => Complex::from_polar(10f64.powf(a / 20.0), b.to_radians()),
    }
}

/// Parses Touchstone v1 two-port text. Data rows may wrap across lines.
pub fn parse_touchstone(text: &str) -> Result<(TwoPortSpectrum, OptionLine)> {
    let mut opt: Option<OptionLine> = None;
    let mut toks: Vec<(f64, usize)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('!').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            return Err(parse_err(line, format!("Touchstone v2 keyword {} found; only v1 files are supported", body.split_whitespace().next().unwrap_or(body))));
        }
        if body.starts_with('#') {
            if opt.is_some() {
                return Err(parse_err(line, "second option line"));
            }
            opt = Some(parse_option_line(body, line)?);
            continue;
        }
        for t in body.split_whitespace() {
            let v: f64 = t.parse().map_err(|_| parse_err(line, format!("not a number: {t:?}")))?;
            toks.push((v, line));
        }
    }
    let opt = opt.unwrap_or_default();
    if opt.resistance != units::Z_REF {
        return Err(Error::Data(format!("reference resistance {} Ω is not supported, only 50 Ω", opt.resistance)));
    }
    if toks.len() % 9 != 0 {
        let line = toks.last().map_or(0, |t| t.1);
        return Err(parse_err(line, format!("two-port data needs 9 values per row; {} left over", toks.len() % 9)));
    }
    let rows = toks.len() / 9;
    if rows == 0 {
        return Err(parse_err(text.lines().count(), "no data rows"));
    }
    let mut freq = Vec::with_capacity(rows);
    let mut s = [Vec::with_capacity(rows), Vec::with_capacity(rows), Vec::with_capacity(rows), Vec::with_capacity(rows)];
    for r in 0..rows {
        let t = &toks[9 * r..9 * r + 9];
        let f = t[0].0 * opt.unit.scale();
        if let Some(&prev) = freq.last() {
            if !(f > prev) {
                return Err(parse_err(t[0].1, format!("frequency {} is not above the previous {}", t[0].0, prev / opt.unit.scale())));
            }
        }
        freq.push(f);
        for p in 0..4 {
            s[p].push(pair(t[1 + 2 * p].0, t[2 + 2 * p].0, opt.format));
        }
    }
    let [s11, s21, s12, s22] = s;
    Ok((TwoPortSpectrum::new(freq, s11, s21, s12, s22)?, opt))
}

pub fn read_touchstone(path: &Path) -> Result<TwoPortSpectrum> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_touchstone(&text)?.0)
}

/// Shortest-round-trip style output with `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.*e}", digits - 1, x);
    let (mant, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
    if (-5..digits as i32).contains(&exp) {
        let neg = mant.starts_with('-');
        let m = mant.trim_start_matches('-').replace('.', "");
        let out = if exp >= 0 {
            let e = exp as usize;
            if m.len() > e + 1 {
                format!("{}.{}", &m[..=e], &m[e + 1..])
            } else {
                format!("{}{}", m, "0".repeat(e + 1 - m.len()))
            }
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), m)
        };
        if neg {
            format!("-{out}")
        } else {
            out
        }
    } else {
        format!("{mant}e{exp}")
    }
}

/// Touchstone v1 text for a two-port spectrum.
pub fn format_touchstone(s: &TwoPortSpectrum, unit: FreqUnit, format: NumberFormat) -> String {
    let fname = match format {
        NumberFormat::Ri => "RI",
        NumberFormat::Ma => "MA",
        NumberFormat::Db => "DB",
    };
    let mut out = format!("# {} S {} R 50\n", unit.name(), fname);
    for k in 0..s.len() {
        let _ = write!(out, "{}", fmt_sig(s.freq[k] / unit.scale(), 12));
        for z in [s.s11[k], s.s21[k], s.s12[k], s.s22[k]] {
            let (a, b) = match format {
                NumberFormat::Ri => (z.re, z.im),
                NumberFormat::Ma => (z.norm(), z.arg().to_degrees()),
                NumberFormat::Db => (20.0 * z.norm().log10(), z.arg().to_degrees()),
            };
            let _ = write!(out, " {} {}", fmt_sig(a, 12), fmt_sig(b, 12));
        }
        out.push('\n');
    }
    out
}

pub fn write_touchstone(s: &TwoPortSpectrum, path: &Path, unit: FreqUnit, format: NumberFormat) -> Result<()> {
    std::fs::write(path, format_touchstone(s, unit, format)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Significant digits in grid CSV output.
pub const CSV_DIGITS: usize = 9;

/// Grid CSV: `field_mT,freq_GHz,<layers...>`, one row per grid point,
/// field-major.
pub fn format_grid_csv(map: &FieldFrequencyMap) -> String {
    let mut out = String::from("field_mT,freq_GHz");
    for (name, _) in &map.layers {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let nf = map.nfreq();
    for (i, h) in map.grid.field.iter().enumerate() {
        for (j, f) in map.grid.freq.iter().enumerate() {
            out.push_str(&fmt_sig(h * 1e3, CSV_DIGITS));
            out.push(',');
            out.push_str(&fmt_sig(f / 1e9, CSV_DIGITS));
            for (_, v) in &map.layers {
                out.push(',');
                out.push_str(&fmt_sig(v[i * nf + j], CSV_DIGITS));
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_grid_csv(map: &FieldFrequencyMap, path: &Path) -> Result<()> {
    std::fs::write(path, format_grid_csv(map)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_cell(t: &str, line: usize) -> Result<f64> {
    match t.trim() {
        "nan" | "NaN" => Ok(f64::NAN),
        v => v.parse().map_err(|_| parse_err(line, format!("not a number: {v:?}"))),
    }
}

/// Inverse of [`format_grid_csv`].
pub fn parse_grid_csv(text: &str) -> Result<FieldFrequencyMap> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty grid file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "field_mT" || cols[1] != "freq_GHz" {
        return Err(parse_err(1, "header must start with field_mT,freq_GHz"));
    }
    let names: Vec<String> = cols[2..].iter().map(|s| s.to_string()).collect();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (k, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let v = l.split(',').map(|t| parse_cell(t, k + 1)).collect::<Result<Vec<_>>>()?;
        if v.len() != cols.len() {
            return Err(parse_err(k + 1, format!("expected {} columns, found {}", cols.len(), v.len())));
        }
        rows.push((k + 1, v));
    }
    if rows.is_empty() {
        return Err(parse_err(2, "no data rows"));
    }
    let h0 = rows[0].1[0];
    let nf = rows.iter().take_while(|r| r.1[0] == h0).count();
    if rows.len() % nf != 0 {
        return Err(parse_err(rows[rows.len() - 1].0, "row count is not a multiple of the frequency axis length"));
    }
    let freq: Vec<f64> = rows[..nf].iter().map(|r| r.1[1] * 1e9).collect();
    let nh = rows.len() / nf;
    let mut field = Vec::with_capacity(nh);
    for i in 0..nh {
        let h = rows[i * nf].1[0];
        for j in 0..nf {
            let (line, r) = &rows[i * nf + j];
            if r[0] != h || r[1] * 1e9 != freq[j] {
                return Err(parse_err(*line, "rows are not a field-major grid"));
            }
        }
        field.push(h * 1e-3);
    }
    let grid = Grid::new(field, freq).map_err(|e| Error::Data(format!("grid axes: {e}")))?;
    let mut map = FieldFrequencyMap::new(grid)?;
    for (c, name) in names.iter().enumerate() {
        map.insert(name, rows.iter().map(|r| r.1[2 + c]).collect())?;
    }
    Ok(map)
}

pub fn read_grid_csv(path: &Path) -> Result<FieldFrequencyMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_grid_csv(&text)
}

/// Extracted spectrum as CSV: frequency, `n`, `z`, `ε`, `μ`, condition,
/// log branch and mask flag.
pub fn format_material_csv(m: &MaterialSpectrum) -> String {
    let mut out = String::from("freq_GHz,n_re,n_im,z_re,z_im,eps_re,eps_im,mu_re,mu_im,condition,branch,masked\n");
    let d = CSV_DIGITS;
    for k in 0..m.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_sig(m.freq[k] / 1e9, d),
            fmt_sig(m.n[k].re, d),
            fmt_sig(m.n[k].im, d),
            fmt_sig(m.z[k].re, d),
            fmt_sig(m.z[k].im, d),
            fmt_sig(m.eps[k].re, d),
            fmt_sig(m.eps[k].im, d),
            fmt_sig(m.mu[k].re, d),
            fmt_sig(m.mu[k].im, d),
            fmt_sig(m.condition[k], d),
            m.branch[k],
            u8::from(m.masked[k]),
        );
    }
    out
}

/// `[circuit]` keys. Frequencies in GHz, lengths in m.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub ls_m: Option<f64>,
    pub z_line_ohm: Option<f64>,
    pub delay_fraction: Option<f64>,
    pub f_isrr_ghz: Option<f64>,
    pub df_isrr_mhz: Option<f64>,
    pub inductance_ratio: Option<f64>,
    pub m0: Option<f64>,
    pub mc_re: Option<f64>,
    pub mc_im: Option<f64>,
    pub ext: Option<f64>,
    pub g: Option<f64>,
}

/// `[material]` keys.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub gamma_mu0_ghz_per_t: Option<f64>,
    pub mu0_ms_t: Option<f64>,
    /// Gilbert damping used by the circuit magnet inductance.
    pub alpha: Option<f64>,
}

/// `[modes]` keys: the closed-form two-mode model.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModesSection {
    pub f_isrr_ghz: Option<f64>,
    pub df_isrr_mhz: Option<f64>,
    pub df_magnon_mhz: Option<f64>,
    pub kappa_re: Option<f64>,
    pub kappa_im: Option<f64>,
    /// Field axis for branch sweeps, mT.
    pub h_min_mt: Option<f64>,
    pub h_max_mt: Option<f64>,
    pub nh: Option<usize>,
}

/// `[grid]` keys.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub f_min_ghz: Option<f64>,
    pub f_max_ghz: Option<f64>,
    pub nf: Option<usize>,
    pub h_min_mt: Option<f64>,
    pub h_max_mt: Option<f64>,
    pub nh: Option<usize>,
}

/// `[extraction]` keys.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExtractionSection {
    pub ls_m: Option<f64>,
    /// `forward` or `reverse`.
    pub direction: Option<String>,
    /// Reported jump threshold on `|Δn|`.
    pub jump_threshold: Option<f64>,
    /// Fixed log branch; continuity tracking when absent.
    pub fixed_branch: Option<i64>,
}

/// `[regions]` keys.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RegionsSection {
    pub min_cells: Option<usize>,
    pub strong_level: Option<f64>,
    pub min_strong: Option<usize>,
}

/// Whole run configuration. Every key is optional; unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub circuit: CircuitSection,
    #[serde(default)]
    pub material: MaterialSection,
    #[serde(default)]
    pub modes: ModesSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub extraction: ExtractionSection,
    #[serde(default)]
    pub regions: RegionsSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse { line, msg: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn kittel(&self) -> Result<KittelParams> {
        let d = KittelParams::default();
        let m = &self.material;
        KittelParams::new(
            m.gamma_mu0_ghz_per_t.map_or(d.gamma_mu0, |g| units::ang(g * 1e9)),
            m.mu0_ms_t.unwrap_or(d.mu0_ms),
            m.alpha.unwrap_or(d.alpha),
        )
    }

    pub fn circuit_design(&self) -> Result<CircuitDesign> {
        let mut d = CircuitDesign::default();
        let c = &self.circuit;
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut d.ls, c.ls_m);
        set(&mut d.z_line, c.z_line_ohm);
        set(&mut d.delay_fraction, c.delay_fraction);
        set(&mut d.f_isrr, c.f_isrr_ghz.map(|v| v * 1e9));
        set(&mut d.df_isrr, c.df_isrr_mhz.map(|v| v * 1e6));
        set(&mut d.inductance_ratio, c.inductance_ratio);
        set(&mut d.m0, c.m0);
        set(&mut d.mc.re, c.mc_re);
        set(&mut d.mc.im, c.mc_im);
        set(&mut d.ext, c.ext);
        set(&mut d.g, c.g);
        let m = &self.material;
        set(&mut d.kittel.gamma_mu0, m.gamma_mu0_ghz_per_t.map(|g| units::ang(g * 1e9)));
        set(&mut d.kittel.mu0_ms, m.mu0_ms_t);
        set(&mut d.kittel.alpha, m.alpha);
        d.kittel.validate()?;
        Ok(d)
    }

    /// Two-mode model; the magnon keeps a constant linewidth.
    pub fn mode_pair(&self) -> Result<ModePair> {
        let m = &self.modes;
        let isrr = BareMode::from_hz(
            m.f_isrr_ghz.map_or(defaults::F_ISRR, |v| v * 1e9),
            m.df_isrr_mhz.map_or(defaults::DF_ISRR, |v| v * 1e6),
        )?;
        let dr = units::ang(m.df_magnon_mhz.map_or(defaults::DF_MAGNON, |v| v * 1e6));
        if !(dr >= 0.0) {
            return Err(Error::Domain("magnon linewidth must be non-negative".into()));
        }
        Ok(ModePair { isrr, kittel: self.kittel()?, magnon_linewidth: MagnonLinewidth::Constant(dr) })
    }

    pub fn coupling(&self) -> Coupling {
        Coupling::new(
            self.modes.kappa_re.unwrap_or(defaults::KAPPA_RE),
            self.modes.kappa_im.unwrap_or(defaults::KAPPA_IM),
        )
    }

    /// Field axis of the two-mode sweeps, T.
    pub fn mode_field_axis(&self) -> Result<Vec<f64>> {
        let m = &self.modes;
        let (a, b, n) = (m.h_min_mt.unwrap_or(40.0), m.h_max_mt.unwrap_or(80.0), m.nh.unwrap_or(4001));
        if n < 2 || !(b > a) || a < 0.0 {
            return Err(Error::Domain("modes field axis needs 0 ≤ h_min_mt < h_max_mt and nh ≥ 2".into()));
        }
        Ok((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64) * 1e-3).collect())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::linear(
            g.f_min_ghz.unwrap_or(2.8) * 1e9,
            g.f_max_ghz.unwrap_or(4.2) * 1e9,
            g.nf.unwrap_or(701),
            g.h_min_mt.unwrap_or(40.0) * 1e-3,
            g.h_max_mt.unwrap_or(80.0) * 1e-3,
            g.nh.unwrap_or(401),
        )
    }

    pub fn extraction(&self) -> Result<ExtractionConfig> {
        let e = &self.extraction;
        let mut c = ExtractionConfig { ls: e.ls_m.or(self.circuit.ls_m).unwrap_or(defaults::LS), ..ExtractionConfig::default() };
        if let Some(d) = &e.direction {
            c.direction = d.parse::<Direction>()?;
        }
        c.branch = match (e.fixed_branch, e.jump_threshold) {
            (Some(k), _) => LogBranch::Fixed(k),
            (None, Some(t)) => LogBranch::Continuity { jump_threshold: t },
            (None, None) => LogBranch::default(),
        };
        Ok(c)
    }

    pub fn regions(&self) -> RegionCriteria {
        let d = RegionCriteria::default();
        let r = &self.regions;
        RegionCriteria {
            min_cells: r.min_cells.unwrap_or(d.min_cells),
            strong_level: r.strong_level.unwrap_or(d.strong_level),
            min_strong: r.min_strong.unwrap_or(d.min_strong),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ri_row_column_order() {
        let (s, _) = parse_touchstone("# GHz S RI R 50\n3.4 0 0 1 0 1 0 0 0\n").unwrap();
        assert_eq!(s.freq, vec![3.4e9]);
        assert_eq!(s.s21[0], Complex::new(1.0, 0.0));
        assert_eq!(s.s12[0], Complex::new(1.0, 0.0));
        assert_eq!(s.s11[0], Complex::new(0.0, 0.0));
    }

    #[test]
    fn db_and_ma() {
        let (s, _) = parse_touchstone("# MHz S DB R 50\n3400 -100 0 -6.0206 0 -6.0206 0 -100 0\n").unwrap();
        assert!((s.s21[0].norm() - 0.5).abs() < 1e-5);
        assert_eq!(s.freq[0], 3.4e9);
        let (s, _) = parse_touchstone("# Hz S MA R 50\n1e9 0 0 1 90 1 90 0 0\n").unwrap();
        assert!((s.s21[0] - Complex::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn default_option_line_is_ghz_ma() {
        let (s, o) = parse_touchstone("! no options\n1 0 0 1 0 1 0 0 0\n").unwrap();
        assert_eq!(o.format, NumberFormat::Ma);
        assert_eq!(s.freq[0], 1e9);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_touchstone("# GHz S RI R 50\n1 0 0 1 0 1 0 0 0\n0.5 0 0 1 0 1 0 0 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = parse_touchstone("# GHz S RI R 50\n1 0 0 1 0 1 0 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e:?}");
        let e = parse_touchstone("# GHz Y RI R 50\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_touchstone("[Version] 2.0\n# GHz S RI R 50\n").unwrap_err();
        assert!(e.to_string().contains("v2"));
    }

    #[test]
    fn wrapped_rows() {
        let (s, _) = parse_touchstone("# GHz S RI R 50\n1 0 0 1 0\n 1 0 0 0\n2 0 0 1 0 1 0 0 0\n").unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(3.4, 9), "3.4");
        assert_eq!(fmt_sig(-0.000123456789123, 9), "-0.000123456789");
        assert_eq!(fmt_sig(1.0e-7, 9), "1e-7");
        assert_eq!(fmt_sig(123456789.0, 9), "123456789");
        assert_eq!(fmt_sig(1234567891.0, 9), "1.23456789e9");
        assert_eq!(fmt_sig(f64::NAN, 9), "nan");
        assert_eq!(fmt_sig(0.0, 9), "0");
        assert_eq!(fmt_sig(100.0, 9), "100");
    }

    #[test]
    fn one_cell_grid_csv() {
        let mut m = FieldFrequencyMap::new(Grid::new(vec![0.06], vec![3.4e9]).unwrap()).unwrap();
        m.insert("n_re", vec![f64::NAN]).unwrap();
        let t = format_grid_csv(&m);
        assert_eq!(t, "field_mT,freq_GHz,n_re\n60,3.4,nan\n");
        let back = parse_grid_csv(&t).unwrap();
        assert!(back.get("n_re", 0, 0).unwrap().is_nan());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(RunConfig::parse("[grid]\nnf = 11\n").is_ok());
        let e = RunConfig::parse("[grid]\nnff = 11\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e:?}");
        assert!(RunConfig::parse("[gird]\nnf = 11\n").is_err());
    }

    #[test]
    fn config_units() {
        let c = RunConfig::parse("[grid]\nf_min_ghz = 3.0\nf_max_ghz = 3.5\nnf = 6\nh_min_mt = 50\nh_max_mt = 70\nnh = 3\n").unwrap();
        let g = c.grid().unwrap();
        assert_eq!(g.freq[0], 3.0e9);
        assert!((g.field[2] - 0.070).abs() < 1e-15);
    }
}
