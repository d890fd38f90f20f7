use num_complex::Complex;
use proptest::prelude::*;

use pmhnri::analysis::{build_maps, Grid};
use pmhnri::circuit_model::{material_from_circuit, slab_sparams, CircuitParams};
use pmhnri::cli_io::{format_grid_csv, format_touchstone, parse_grid_csv, parse_touchstone, FreqUnit, NumberFormat};
use pmhnri::coupled_modes::{
    branch_linewidth, hybrid_eigenvalues, kittel_frequency, zero_damping_fields, BareMode, Coupling, DampingProfile,
    KittelParams, MagnonLinewidth, ModePair,
};
use pmhnri::fitting::{fit_coupling, BranchData};
use pmhnri::nrw_extraction::{extract, nri_condition, Direction, ExtractionConfig, TwoPortSpectrum};
use pmhnri::units::{ang, C0};
use pmhnri::C64;

fn close(a: C64, b: C64, rel: f64) -> bool {
    (a - b).norm() <= rel * a.norm().max(b.norm()).max(1e-300)
}

fn mode() -> impl Strategy<Value = BareMode> {
    (1.0e9..10.0e9f64, 0.0..100.0e6f64).prop_map(|(f, d)| BareMode::from_hz(f, d).unwrap())
}

fn kappa() -> impl Strategy<Value = Coupling> {
    (-0.1..0.1f64, -0.1..0.1f64).prop_map(|(a, b)| Coupling::new(a, b))
}

proptest! {
    #[test]
    fn trace_is_conserved(c in mode(), m in mode(), k in kappa()) {
        let p = hybrid_eigenvalues(&c, &m, &k);
        prop_assert!(close(p.upper + p.lower, c.complex() + m.complex(), 1e-14));
    }

    #[test]
    fn linewidth_sum_is_kappa_independent(c in mode(), m in mode(), k in kappa()) {
        let p = hybrid_eigenvalues(&c, &m, &k);
        let sum = -(p.upper.im + p.lower.im);
        let want = c.linewidth + m.linewidth;
        prop_assert!((sum - want).abs() <= 1e-12 * c.omega.max(m.omega));
    }

    #[test]
    fn conjugation_symmetry(c in mode(), m in mode(), k in kappa()) {
        let p = hybrid_eigenvalues(&c, &m, &k);
        // Conjugated bare modes have negative linewidths, so build them by hand.
        let cc = c.complex().conj();
        let mc = m.complex().conj();
        let kk = k.kappa.conj();
        let d = cc - mc;
        let root = (d * d + (kk * c.omega).powi(2)).sqrt();
        let a = (cc + mc + root) * 0.5;
        let b = cc + mc - a;
        let set = [p.upper.conj(), p.lower.conj()];
        prop_assert!(set.iter().all(|s| close(*s, a, 1e-10) || close(*s, b, 1e-10)));
    }

    #[test]
    fn swap_symmetry(c in mode(), m in mode(), k in kappa()) {
        let p = hybrid_eigenvalues(&c, &m, &k);
        let k2 = k.scaled(c.omega / m.omega);
        let q = hybrid_eigenvalues(&m, &c, &k2);
        prop_assert!(close(p.upper, q.upper, 1e-10) || close(p.upper, q.lower, 1e-10));
        prop_assert!(close(p.lower, q.lower, 1e-10) || close(p.lower, q.upper, 1e-10));
    }

    #[test]
    fn kittel_is_monotone(h1 in 1e-4..1.0f64, dh in 1e-6..0.5f64) {
        let kp = KittelParams::default();
        prop_assert!(kittel_frequency(h1 + dh, &kp).unwrap() > kittel_frequency(h1, &kp).unwrap());
    }

    #[test]
    fn antidamping_interval_is_negative_inside(kr in 0.01..0.06f64, ki in 0.002..0.02f64) {
        let mp = ModePair::default();
        let k = Coupling::new(kr, ki);
        let field: Vec<f64> = (0..801).map(|i| 0.04 + 0.00005 * i as f64).collect();
        let tr = mp.sweep(&field, &k).unwrap();
        for curve in [&tr.upper, &tr.lower] {
            let prof = branch_linewidth(curve);
            if let Some((a, b)) = zero_damping_fields(&prof).unwrap() {
                let inside: Vec<f64> = field.iter().zip(&prof.linewidth).filter(|(h, _)| **h > a && **h < b).map(|x| *x.1).collect();
                if !inside.is_empty() {
                    prop_assert!(inside.iter().cloned().fold(f64::INFINITY, f64::min) < 0.0);
                }
                let step = 0.00005;
                for (h, w) in field.iter().zip(&prof.linewidth) {
                    if *h < a - step || *h > b + step {
                        prop_assert!(*w > 0.0, "Δω = {w} at {h} outside ({a}, {b})");
                    }
                }
            }
        }
    }

    #[test]
    fn nrw_round_trip(nr in -2.0..4.0f64, ni in -1.0..0.0f64, zr in 0.05..4.0f64, zi in -2.0..2.0f64, f in 1.0e9..6.0e9f64) {
        let ls = 0.005;
        let n = Complex::new(nr, ni);
        let z = Complex::new(zr, zi);
        let k0 = ang(f) / C0;
        prop_assume!((k0 * n * ls).norm() < std::f64::consts::PI);
        let g = (z - 1.0) / (z + 1.0);
        prop_assume!(g.norm() < 0.999);
        let (s11, s21) = slab_sparams(n, z, f, ls).unwrap();
        let sp = TwoPortSpectrum::new(vec![f], vec![s11], vec![s21], vec![s21], vec![s11]).unwrap();
        let m = extract(&sp, &ExtractionConfig::default()).unwrap();
        prop_assert!(close(m.n[0], n, 1e-9), "{} vs {}", m.n[0], n);
        prop_assert!(close(m.z[0], z, 1e-9), "{} vs {}", m.z[0], z);
    }

    #[test]
    fn sign_theorem(er in -10.0..10.0f64, ei in 1e-6..10.0f64, mr in -10.0..10.0f64, mi in 1e-6..10.0f64) {
        let eps = Complex::new(er, -ei);
        let mu = Complex::new(mr, -mi);
        let mut n = (eps * mu).sqrt();
        if n.im > 0.0 {
            n = -n;
        }
        prop_assume!(-n.im > 1e-9 && n.re.abs() > 1e-12 * n.norm());
        let (v, _) = nri_condition(eps, mu);
        prop_assert_eq!(n.re < 0.0, v < 0.0);
    }

    #[test]
    fn circuit_material_identities(f in 2.8e9..4.2e9f64, h in 0.04..0.08f64) {
        let p = CircuitParams::default();
        let m = material_from_circuit(ang(f), h, &p).unwrap();
        prop_assert!(close(m.eps * m.mu, m.n * m.n, 1e-9));
        prop_assert!(close(m.n / m.z, m.eps, 1e-9));
        prop_assert!(m.theta.im <= 0.0);
    }

    #[test]
    fn geometric_factor_leaves_index(f in 2.8e9..4.2e9f64, h in 0.04..0.08f64, g in 0.2..5.0f64) {
        let p = CircuitParams::default();
        let q = CircuitParams { g, ..p };
        let a = material_from_circuit(ang(f), h, &p).unwrap();
        let b = material_from_circuit(ang(f), h, &q).unwrap();
        prop_assert!(close(a.n, b.n, 1e-12));
    }

    #[test]
    fn noiseless_fit_recovers_kappa(kr in 0.01..0.06f64, ki in -0.015..0.015f64) {
        let mp = ModePair::default();
        let k = Coupling::new(kr, ki);
        let field: Vec<f64> = (0..61).map(|i| 0.05 + 0.0004 * i as f64).collect();
        let mut d = BranchData::from_model(&field, &mp, &k).unwrap();
        d.direction = Some(Direction::Forward);
        let f = fit_coupling(&d, Coupling::new(0.03, 0.0), &mp).unwrap();
        prop_assert!((f.kappa - k.kappa).norm() < 1e-6, "{} vs {}", f.kappa, k.kappa);
    }

    #[test]
    fn touchstone_ri_round_trip(vals in prop::collection::vec(-1.0..1.0f64, 8..64)) {
        let n = vals.len() / 8;
        let c = |k: usize, o: usize| Complex::new(vals[8 * k + o], vals[8 * k + o + 1]);
        let freq: Vec<f64> = (0..n).map(|k| 1e9 + 1.5e6 * k as f64).collect();
        let s = TwoPortSpectrum::new(
            freq,
            (0..n).map(|k| c(k, 0)).collect(),
            (0..n).map(|k| c(k, 2)).collect(),
            (0..n).map(|k| c(k, 4)).collect(),
            (0..n).map(|k| c(k, 6)).collect(),
        ).unwrap();
        let t = format_touchstone(&s, FreqUnit::Ghz, NumberFormat::Ri);
        let (back, _) = parse_touchstone(&t).unwrap();
        let again = format_touchstone(&back, FreqUnit::Ghz, NumberFormat::Ri);
        prop_assert_eq!(&t, &again);
        for k in 0..n {
            prop_assert!((back.s21[k] - s.s21[k]).norm() < 1e-11);
            prop_assert!((back.freq[k] / s.freq[k] - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn grid_csv_round_trip(vals in prop::collection::vec(prop_oneof![Just(f64::NAN), -1e6..1e6f64], 12)) {
        let grid = Grid::linear(3.0e9, 3.3e9, 4, 0.05, 0.06, 3).unwrap();
        let mut m = pmhnri::analysis::FieldFrequencyMap::new(grid).unwrap();
        m.insert("n_re", vals.clone()).unwrap();
        let t = format_grid_csv(&m);
        let back = parse_grid_csv(&t).unwrap();
        prop_assert_eq!(format_grid_csv(&back), t);
        for (a, b) in back.layer("n_re").unwrap().iter().zip(&vals) {
            prop_assert!((a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-8 * b.abs());
        }
    }
}

#[test]
fn decoupled_circuit_is_field_independent() {
    let mut p = CircuitParams::default();
    p.m0 = 0.0;
    p.mc = Complex::new(0.0, 0.0);
    for f in [2.9e9, 3.4e9, 4.1e9] {
        let a = material_from_circuit(ang(f), 0.045, &p).unwrap();
        let b = material_from_circuit(ang(f), 0.075, &p).unwrap();
        assert_eq!(a.n, b.n);
    }
}

#[test]
fn maps_are_deterministic() {
    let g = Grid::linear(2.8e9, 4.2e9, 57, 0.04, 0.08, 17).unwrap();
    let p = CircuitParams::default();
    let a = build_maps(&p, &g, Direction::Reverse).unwrap();
    let b = build_maps(&p, &g, Direction::Reverse).unwrap();
    for ((na, va), (nb, vb)) in a.layers.iter().zip(&b.layers) {
        assert_eq!(na, nb);
        assert!(va.iter().zip(vb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn gilbert_magnon_linewidth_grows_with_field() {
    let mp = ModePair { magnon_linewidth: MagnonLinewidth::Gilbert, ..ModePair::default() };
    let a = mp.magnon(0.05).unwrap().linewidth;
    let b = mp.magnon(0.07).unwrap().linewidth;
    assert!(b > a);
    let prof = DampingProfile { field: vec![0.0, 1.0], linewidth: vec![1.0, 2.0] };
    assert_eq!(zero_damping_fields(&prof).unwrap(), None);
}
