use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex;

use pmhnri::analysis::{
    associate_branches, build_maps, calibrate_mode_model, compare_directions, correlate_antidamping, coupling_sweep,
    detect_nri_regions, im_coupling_ablation, FieldFrequencyMap, NriRegion,
};
use pmhnri::circuit_model::{circuit_spectrum, CircuitParams};
use pmhnri::cli_io::{fmt_sig, format_grid_csv, format_material_csv, format_touchstone, read_touchstone, FreqUnit, NumberFormat, RunConfig};
use pmhnri::coupled_modes::{BranchLabel, Coupling};
use pmhnri::fitting::{crossing_window, fit_circuit_modes, fit_coupling, fit_coupling_and_modes, BranchData, FitResult};
use pmhnri::nrw_extraction::{de_embed, extract, DeEmbedMode, Direction};
use pmhnri::units::{ang, hz};
use pmhnri::{Error, Result, C64};

#[derive(Parser)]
#[command(name = "pmhnri", version, about = "Photon-magnon hybrid negative-index toolkit", arg_required_else_help = true)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dirs {
    Forward,
    Reverse,
    Both,
}

impl Dirs {
    fn list(self) -> Vec<Direction> {
        match self {
            Dirs::Forward => vec![Direction::Forward],
            Dirs::Reverse => vec![Direction::Reverse],
            Dirs::Both => vec![Direction::Forward, Direction::Reverse],
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Ri,
    Ma,
    Db,
}

#[derive(Subcommand)]
enum Cmd {
    /// Circuit maps over the field/frequency grid as grid CSV.
    Synth(SynthArgs),
    /// Effective constants from a Touchstone two-port file.
    Extract(ExtractArgs),
    /// Hybrid branches and zero-damping fields of the two-mode model.
    Eigen(EigenArgs),
    /// NRI presence, peak index and anti-damping width against coupling scale.
    Sweep(SweepArgs),
    /// NRI area against the imaginary part of the resonator coupling.
    Ablate(AblateArgs),
    /// Coupling constant from branch data.
    Fit(FitArgs),
    /// Region statistics, anti-damping containment and nonreciprocity.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "both")]
    direction: Dirs,
    /// Also write a Touchstone file of the slab response at this field (mT).
    #[arg(long, requires = "s2p")]
    s2p_field: Option<f64>,
    #[arg(long, requires = "s2p_field")]
    s2p: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "ri")]
    s2p_format: Fmt,
}

#[derive(Args)]
struct ExtractArgs {
    input: PathBuf,
    /// Line-only measurement to remove first.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Remove the background by ratio instead of subtraction.
    #[arg(long)]
    ratio: bool,
    /// Overrides the configured direction.
    #[arg(long)]
    direction: Option<String>,
}

#[derive(Args)]
struct EigenArgs {
    /// Coupling, e.g. 0.0296+0.0088i.
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
    /// Use the conjugate coupling.
    #[arg(long)]
    reverse: bool,
    /// Write the branch curves as CSV to this path.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// `start:step:stop` or a comma list.
    #[arg(long, default_value = "0:0.1:1.5")]
    ratios: String,
    #[arg(long, default_value = "forward")]
    direction: String,
}

#[derive(Args)]
struct AblateArgs {
    /// Comma list of Im Mc values.
    #[arg(long, default_value = "-0.0028,-0.0024,-0.002,0", allow_hyphen_values = true)]
    im: String,
}

#[derive(Args)]
struct FitArgs {
    /// Branch CSV as written by `eigen --curves`.
    #[arg(long, conflicts_with = "circuit", required_unless_present = "circuit")]
    input: Option<PathBuf>,
    /// Fit the configured circuit's natural frequencies instead.
    #[arg(long)]
    circuit: bool,
    /// Also refine the bare resonator and magnon linewidths.
    #[arg(long)]
    co_fit: bool,
    /// Direction label of the data; both signs are tried when absent.
    #[arg(long)]
    direction: Option<String>,
    /// Initial coupling.
    #[arg(long, allow_hyphen_values = true)]
    kappa: Option<String>,
}

#[derive(Args)]
struct ReportArgs {}

fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Usage(format!("cannot read complex number `{s}` (expected a+bi)"));
    if let Some(body) = t.strip_suffix(['i', 'j']) {
        let split = body.char_indices().skip(1).filter(|&(k, c)| (c == '+' || c == '-') && !matches!(body.as_bytes()[k - 1], b'e' | b'E')).last();
        let (re, im) = match split {
            Some((k, _)) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "+" | "" => "1",
            "-" => "-1",
            x => x,
        };
        Ok(Complex::new(re.parse().map_err(|_| bad())?, im.trim_start_matches('+').parse().map_err(|_| bad())?))
    } else {
        Ok(Complex::new(t.parse().map_err(|_| bad())?, 0.0))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Usage(format!("cannot read list `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let (a, step, b) = (v[0], v[1], v[2]);
        if !(step > 0.0) || b < a {
            return Err(Error::Usage(format!("range `{s}` needs a positive step and stop ≥ start")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize + 1;
        // Round to the step's decimals so that 0.1·3 prints as 0.3.
        return Ok((0..n).map(|k| ((a + step * k as f64) * 1e12).round() / 1e12).collect());
    }
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
}

struct Ctx {
    cfg: RunConfig,
}

impl Ctx {
    fn params(&self) -> Result<CircuitParams> {
        self.cfg.circuit_design()?.build()
    }
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<String> {
    let p = ctx.params()?;
    let grid = ctx.cfg.grid()?;
    let mut all = FieldFrequencyMap::new(grid.clone())?;
    for d in a.direction.list() {
        let m = build_maps(&p, &grid, d)?;
        for (name, v) in m.layers {
            all.insert(&format!("{}_{}", d.name(), name), v)?;
        }
    }
    if let (Some(h), Some(path)) = (a.s2p_field, &a.s2p) {
        let (_, s) = circuit_spectrum(&p, h * 1e-3, &grid.freq, Direction::Forward)?;
        let (_, r) = circuit_spectrum(&p, h * 1e-3, &grid.freq, Direction::Reverse)?;
        // Port 1 to 2 sees Mc, port 2 to 1 sees conj Mc.
        let two = pmhnri::nrw_extraction::TwoPortSpectrum::new(s.freq.clone(), s.s11.clone(), s.s21.clone(), r.s21.clone(), r.s11.clone())?;
        let f = match a.s2p_format {
            Fmt::Ri => NumberFormat::Ri,
            Fmt::Ma => NumberFormat::Ma,
            Fmt::Db => NumberFormat::Db,
        };
        std::fs::write(path, format_touchstone(&two, FreqUnit::Ghz, f)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(format_grid_csv(&all))
}

fn extract_cmd(ctx: &Ctx, a: &ExtractArgs) -> Result<String> {
    let mut cfg = ctx.cfg.extraction()?;
    if let Some(d) = &a.direction {
        cfg.direction = d.parse()?;
    }
    let mut s = read_touchstone(&a.input)?;
    if let Some(b) = &a.background {
        let bg = read_touchstone(b)?;
        s = de_embed(&s, &bg, if a.ratio { DeEmbedMode::Ratio } else { DeEmbedMode::Subtract })?;
    }
    let m = extract(&s, &cfg)?;
    let mut out = String::new();
    for &k in &m.jumps {
        let _ = writeln!(out, "# jump above threshold at {} GHz", fmt_sig(m.freq[k] / 1e9, 9));
    }
    out.push_str(&format_material_csv(&m));
    Ok(out)
}

fn interval_cells(iv: Option<(f64, f64)>) -> (String, String) {
    match iv {
        Some((a, b)) => (fmt_sig(a * 1e3, 9), fmt_sig(b * 1e3, 9)),
        None => ("none".into(), "none".into()),
    }
}

fn eigen(ctx: &Ctx, a: &EigenArgs) -> Result<String> {
    let modes = ctx.cfg.mode_pair()?;
    let mut k = match &a.kappa {
        Some(s) => Coupling { kappa: parse_complex(s)? },
        None => ctx.cfg.coupling(),
    };
    if a.reverse {
        k = k.reversed();
    }
    let field = ctx.cfg.mode_field_axis()?;
    let tr = modes.sweep(&field, &k)?;
    if let Some(path) = &a.curves {
        let mut c = String::from("field_mT,upper_GHz,upper_width_MHz,lower_GHz,lower_width_MHz\n");
        for (i, h) in field.iter().enumerate() {
            let (u, l) = (tr.upper.values[i], tr.lower.values[i]);
            let _ = writeln!(
                c,
                "{},{},{},{},{}",
                fmt_sig(h * 1e3, 9),
                fmt_sig(hz(u.re) / 1e9, 12),
                fmt_sig(hz(-u.im) / 1e6, 12),
                fmt_sig(hz(l.re) / 1e9, 12),
                fmt_sig(hz(-l.im) / 1e6, 12)
            );
        }
        std::fs::write(path, c).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    let mut out = String::from("branch,H_minus_mT,H_plus_mT\n");
    for (name, b) in [("upper", BranchLabel::Upper), ("lower", BranchLabel::Lower)] {
        let (lo, hi) = interval_cells(modes.zero_damping(&field, &k, b)?);
        let _ = writeln!(out, "{name},{lo},{hi}");
    }
    Ok(out)
}

fn sweep(ctx: &Ctx, a: &SweepArgs) -> Result<String> {
    let ratios = parse_list(&a.ratios)?;
    let dir: Direction = a.direction.parse()?;
    let rows = coupling_sweep(&ctx.params()?, &ctx.cfg.grid()?, dir, &ratios, &ctx.cfg.regions())?;
    let mut out = String::from("ratio,kappa_re,kappa_im,nri_present,peak_n,nri_field_span_mT,dh_nd_mT,regions\n");
    let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| fmt_sig(x * 1e3, 9));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_sig(r.ratio, 9),
            fmt_sig(r.kappa.re, 9),
            fmt_sig(r.kappa.im, 9),
            r.nri_present,
            fmt_sig(r.peak_n, 9),
            opt(r.nri_field_span),
            opt(r.dh_nd),
            r.regions
        );
    }
    Ok(out)
}

fn ablate(ctx: &Ctx, a: &AblateArgs) -> Result<String> {
    let ims = parse_list(&a.im)?;
    let rows = im_coupling_ablation(&ctx.params()?, &ctx.cfg.grid()?, &ims, &ctx.cfg.regions())?;
    let mut out = String::from("mc_re,mc_im,area_mT_MHz,cells,regions,peak_n\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_sig(r.mc.re, 9),
            fmt_sig(r.mc.im, 9),
            fmt_sig(r.area * 1e3 / 1e6, 9),
            r.cells,
            r.regions,
            fmt_sig(r.peak_n, 9)
        );
    }
    Ok(out)
}

fn read_branch_csv(path: &PathBuf) -> Result<BranchData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "empty branch file".into() })?;
    if header.trim() != "field_mT,upper_GHz,upper_width_MHz,lower_GHz,lower_width_MHz" {
        return Err(Error::Parse { line: 1, msg: "expected header field_mT,upper_GHz,upper_width_MHz,lower_GHz,lower_width_MHz".into() });
    }
    let (mut field, mut up, mut lo) = (Vec::new(), Vec::new(), Vec::new());
    for (k, l) in lines {
        let v: Vec<f64> = l
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Parse { line: k + 1, msg: "not a number".into() })?;
        if v.len() != 5 {
            return Err(Error::Parse { line: k + 1, msg: format!("expected 5 columns, found {}", v.len()) });
        }
        field.push(v[0] * 1e-3);
        up.push(Complex::new(ang(v[1] * 1e9), -ang(v[2] * 1e6)));
        lo.push(Complex::new(ang(v[3] * 1e9), -ang(v[4] * 1e6)));
    }
    Ok(BranchData { field, upper: Some(up), lower: Some(lo), weights: None, direction: None })
}

fn fit_text(f: &FitResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kappa_re = {}", fmt_sig(f.kappa.re, 9));
    let _ = writeln!(out, "kappa_im = {}", fmt_sig(f.kappa.im, 9));
    let _ = writeln!(out, "f_isrr_GHz = {}", fmt_sig(hz(f.modes.isrr.omega) / 1e9, 9));
    let _ = writeln!(out, "df_isrr_MHz = {}", fmt_sig(hz(f.modes.isrr.linewidth) / 1e6, 9));
    let _ = writeln!(out, "residual = {}", fmt_sig(f.residual_norm, 9));
    if let Some(c) = f.conjugate_residual {
        let _ = writeln!(out, "conjugate_residual = {}", fmt_sig(c, 9));
    }
    let _ = writeln!(out, "iterations = {}", f.iterations);
    let _ = writeln!(out, "converged = {}", f.converged);
    out
}

fn fit_cmd(ctx: &Ctx, a: &FitArgs) -> Result<String> {
    if a.circuit {
        let p = ctx.params()?;
        let field = crossing_window(&p, 0.02, 81)?;
        return Ok(fit_text(&fit_circuit_modes(&p, &field, a.co_fit)?));
    }
    let mut data = read_branch_csv(a.input.as_ref().expect("clap enforces input"))?;
    if let Some(d) = &a.direction {
        data.direction = Some(d.parse()?);
    }
    let modes = ctx.cfg.mode_pair()?;
    let init = match &a.kappa {
        Some(s) => Coupling { kappa: parse_complex(s)? },
        None => ctx.cfg.coupling(),
    };
    let f = if a.co_fit { fit_coupling_and_modes(&data, init, &modes)? } else { fit_coupling(&data, init, &modes)? };
    Ok(fit_text(&f))
}

fn region_lines(out: &mut String, tag: &str, r: &NriRegion) {
    let _ = writeln!(out, "{tag}.min_n = {}", fmt_sig(r.min_n, 9));
    let _ = writeln!(out, "{tag}.argmin_field_mT = {}", fmt_sig(r.argmin_field * 1e3, 9));
    let _ = writeln!(out, "{tag}.argmin_freq_GHz = {}", fmt_sig(r.argmin_freq / 1e9, 9));
    let _ = writeln!(out, "{tag}.field_range_mT = {} {}", fmt_sig(r.field_range.0 * 1e3, 9), fmt_sig(r.field_range.1 * 1e3, 9));
    let _ = writeln!(out, "{tag}.freq_range_GHz = {} {}", fmt_sig(r.freq_range.0 / 1e9, 9), fmt_sig(r.freq_range.1 / 1e9, 9));
    let _ = writeln!(out, "{tag}.field_span_mT = {}", fmt_sig(r.field_span() * 1e3, 9));
    let _ = writeln!(out, "{tag}.freq_span_MHz = {}", fmt_sig(r.freq_span() / 1e6, 9));
    let _ = writeln!(out, "{tag}.cells = {}", r.cells.len());
    let b = match r.branch {
        Some(BranchLabel::Upper) => "upper",
        Some(BranchLabel::Lower) => "lower",
        None => "none",
    };
    let _ = writeln!(out, "{tag}.branch = {b}");
}

fn report(ctx: &Ctx) -> Result<String> {
    let p = ctx.params()?;
    let grid = ctx.cfg.grid()?;
    let crit = ctx.cfg.regions();
    let iso = p.isrr_mode()?;
    let mut out = String::new();
    let _ = writeln!(out, "f_isrr_GHz = {}", fmt_sig(hz(iso.omega) / 1e9, 9));
    let _ = writeln!(out, "df_isrr_MHz = {}", fmt_sig(hz(iso.linewidth) / 1e6, 9));
    let mut dominant = Vec::new();
    for d in [Direction::Forward, Direction::Reverse] {
        let tag = d.name();
        let map = build_maps(&p, &grid, d)?;
        let mut regions = detect_nri_regions(&map, &crit)?;
        associate_branches(&mut regions, &p, d)?;
        let min_n = map.layer("n_re").unwrap().iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
        let _ = writeln!(out, "{tag}.min_n = {}", fmt_sig(min_n, 9));
        let _ = writeln!(out, "{tag}.regions = {}", regions.len());
        let model = calibrate_mode_model(&p, d, 0.02)?;
        let _ = writeln!(out, "{tag}.kappa = {} {}", fmt_sig(model.coupling.kappa.re, 9), fmt_sig(model.coupling.kappa.im, 9));
        let ad = model.antidamped_branch(&grid.field)?;
        match ad {
            Some((b, (lo, hi))) => {
                let name = if b == BranchLabel::Upper { "upper" } else { "lower" };
                let _ = writeln!(out, "{tag}.antidamped_branch = {name}");
                let _ = writeln!(out, "{tag}.H_minus_mT = {}", fmt_sig(lo * 1e3, 9));
                let _ = writeln!(out, "{tag}.H_plus_mT = {}", fmt_sig(hi * 1e3, 9));
            }
            None => {
                let _ = writeln!(out, "{tag}.antidamped_branch = none");
            }
        }
        if let Some(r) = regions.first() {
            region_lines(&mut out, &format!("{tag}.region"), r);
            let c = correlate_antidamping(r, &grid, ad.map(|x| x.1));
            let _ = writeln!(out, "{tag}.containment = {}", c.fraction.map_or("no interval".to_string(), |f| fmt_sig(f, 9)));
            dominant.push(r.clone());
        }
    }
    if let [f, r] = &dominant[..] {
        let nr = compare_directions(f, r);
        let _ = writeln!(out, "nonreciprocity.field_overlap = {}", fmt_sig(nr.field_overlap, 9));
        let _ = writeln!(out, "nonreciprocity.argmin_field_shift_mT = {}", fmt_sig(nr.argmin_field_shift * 1e3, 9));
        let _ = writeln!(out, "nonreciprocity.argmin_freq_shift_MHz = {}", fmt_sig(nr.argmin_freq_shift / 1e6, 9));
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx { cfg };
    let text = match &cli.cmd {
        Cmd::Synth(a) => synth(&ctx, a)?,
        Cmd::Extract(a) => extract_cmd(&ctx, a)?,
        Cmd::Eigen(a) => eigen(&ctx, a)?,
        Cmd::Sweep(a) => sweep(&ctx, a)?,
        Cmd::Ablate(a) => ablate(&ctx, a)?,
        Cmd::Fit(a) => fit_cmd(&ctx, a)?,
        Cmd::Report(_) => report(&ctx)?,
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    eprint!("{}", e.render());
                    ExitCode::from(1)
                }
                _ => {
                    let msg = e.render().to_string();
                    let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
                    eprintln!("error: usage: {first}");
                    for l in msg.lines().skip(1) {
                        eprintln!("{l}");
                    }
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
