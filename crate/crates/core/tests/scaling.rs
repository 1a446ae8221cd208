use std::collections::BTreeMap;

use xtal_core::block::Block;
use xtal_core::crop::{s4_crop, CropMethod, CropParams};
use xtal_core::scaling::{
    boundary_loss_ratio, contact_degrees, cubic_ball_surface_ratio, exact_ball_crop, exact_ball_points,
    fit_scaling_exponent, run_scaling_sweep, sweep_csv, synth_lattice, LatticeKind, ScalingPoint, ScalingSweepSpec,
    SyntheticLatticeSpec, SWEEP_CSV_HEADER,
};

fn spec(kind: LatticeKind, extent: usize, atoms_per_molecule: usize) -> SyntheticLatticeSpec {
    SyntheticLatticeSpec {
        kind,
        spacing: 4.0,
        extent,
        atoms_per_molecule,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lattice points `n` (integer, or half-integer sums for FCC) with
/// `0 < spacing * |n| <= r0`, counted directly.
fn lattice_neighbours(kind: LatticeKind, r0: f64) -> usize {
    let mut n = 0;
    for i in -6i32..=6 {
        for j in -6i32..=6 {
            for k in -6i32..=6 {
                if (i, j, k) == (0, 0, 0) {
                    continue;
                }
                let d = match kind {
                    // fcc points: integer triples with even sum, scaled so
                    // the shortest vector (1,1,0) has length 4
                    LatticeKind::Fcc if (i + j + k) % 2 != 0 => continue,
                    LatticeKind::Fcc => 4.0 * (((i * i + j * j + k * k) as f64) / 2.0).sqrt(),
                    _ => 4.0 * ((i * i + j * j + k * k) as f64).sqrt(),
                };
                if d <= r0 {
                    n += 1;
                }
            }
        }
    }
    n
}

#[test]
fn synthetic_lattices_have_the_named_packing() {
    let sc = synth_lattice(&spec(LatticeKind::SimpleCubic, 5, 1)).unwrap();
    assert_eq!(sc.molecules.len(), 125);
    let block = Block::from_crystal(&sc);
    let c = block.asu[0];
    let nearest = (0..block.len())
        .filter(|&m| m != c)
        .map(|m| (block.molecules[m].coords[0] - block.molecules[c].coords[0]).norm())
        .fold(f64::INFINITY, f64::min);
    assert!((nearest - 4.0).abs() < 1e-9);

    let fcc = synth_lattice(&spec(LatticeKind::Fcc, 4, 1)).unwrap();
    assert_eq!(fcc.molecules.len(), 4 * 64);
    let block = Block::from_crystal(&fcc);
    // interior molecules: at least one spacing away from the block faces
    let lo = block.molecules.iter().map(|m| m.coords[0]).fold(f64::INFINITY, |a, x| a.min(x.min()));
    let hi = block.molecules.iter().map(|m| m.coords[0]).fold(f64::NEG_INFINITY, |a, x| a.max(x.max()));
    let mut interior = 0;
    for (i, m) in block.molecules.iter().enumerate() {
        let x = m.coords[0];
        if x.iter().all(|&v| v > lo + 4.5 && v < hi - 4.5) {
            interior += 1;
            let coordination = block
                .molecules
                .iter()
                .enumerate()
                .filter(|(j, o)| *j != i && (o.coords[0] - x).norm() <= 4.5)
                .count();
            assert_eq!(coordination, 12);
        }
    }
    assert!(interior > 0);

    let two = synth_lattice(&spec(LatticeKind::TwoComponentCubic, 3, 1)).unwrap();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &k in &two.asu {
        *counts.entry(two.molecules[k].entity.as_str()).or_default() += 1;
    }
    assert_eq!(counts.values().collect::<Vec<_>>(), [&1, &1]);
    let mut all: BTreeMap<&str, usize> = BTreeMap::new();
    for m in &two.molecules {
        *all.entry(m.entity.as_str()).or_default() += 1;
    }
    assert_eq!(all["C"], all["N"]);

    for bad in [
        SyntheticLatticeSpec { extent: 2, ..Default::default() },
        SyntheticLatticeSpec { spacing: 0.0, ..Default::default() },
        SyntheticLatticeSpec { atoms_per_molecule: 0, ..Default::default() },
        SyntheticLatticeSpec { atoms_per_molecule: 4, ..Default::default() },
    ] {
        assert!(synth_lattice(&bad).is_err());
    }
}

#[test]
fn contact_degree_is_uniform_across_atoms() {
    for kind in [LatticeKind::SimpleCubic, LatticeKind::Fcc, LatticeKind::TwoComponentCubic] {
        let crystal = synth_lattice(&spec(kind, 3, 1)).unwrap();
        for r0 in [4.5, 6.0, 7.0, 8.5] {
            let deg = contact_degrees(&crystal, r0);
            let want = lattice_neighbours(if kind == LatticeKind::Fcc { kind } else { LatticeKind::SimpleCubic }, r0);
            assert!(deg.iter().all(|&d| d == want), "{kind:?} r0 {r0}: {:?} vs {want}", &deg[..4]);
        }
    }
    // two-atom chains: every atom is a chain end, so the degree is still
    // one constant (bonded partner plus lattice images)
    let chains = synth_lattice(&spec(LatticeKind::SimpleCubic, 3, 2)).unwrap();
    for r0 in [2.0, 4.5, 6.0] {
        let deg = contact_degrees(&chains, r0);
        assert!(deg.windows(2).all(|w| w[0] == w[1]), "r0 {r0}");
    }
    assert_eq!(lattice_neighbours(LatticeKind::SimpleCubic, 4.5), 6);
    assert_eq!(lattice_neighbours(LatticeKind::Fcc, 4.5), 12);
}

#[test]
fn ball_surface_to_volume_stays_bounded() {
    // sphere limit: 6 pi k^2 leaving bonds over (4 pi / 3)^(2/3) k^2
    let limit = 6.0 * std::f64::consts::PI / (4.0 * std::f64::consts::PI / 3.0).powf(2.0 / 3.0);
    let ratios: Vec<f64> = (2..=10).map(cubic_ball_surface_ratio).collect();
    for (k, r) in (2..=10).zip(&ratios) {
        assert!(*r > 0.6 * limit && *r < 1.4 * limit, "k {k}: {r} (limit {limit})");
    }

    // the same counts through the crop machinery on a 4 A lattice
    let block = Block::from_crystal(&synth_lattice(&spec(LatticeKind::SimpleCubic, 21, 1)).unwrap());
    let c = block.asu[0];
    for k in 2..=9i64 {
        let crop = exact_ball_crop(&block, c, 4.0 * k as f64 + 1e-6);
        let (edges, _) = boundary_loss_ratio(&block, &crop, 4.5).unwrap();
        let via_crop = edges as f64 / (crop.token_count as f64).powf(2.0 / 3.0);
        assert!((via_crop - cubic_ball_surface_ratio(k)).abs() < 1e-12, "k {k}");
    }
}

/// Boundary edges by the double loop over all heavy-atom pairs.
fn brute_edges(block: &Block, inside: &[usize], r0: f64) -> usize {
    let mut is_in = vec![false; block.len()];
    for &m in inside {
        is_in[m] = true;
    }
    let mut n = 0;
    for (i, a) in block.molecules.iter().enumerate() {
        for (j, b) in block.molecules.iter().enumerate() {
            if !is_in[i] || is_in[j] {
                continue;
            }
            for (za, xa) in a.species.iter().zip(&a.coords) {
                for (zb, xb) in b.species.iter().zip(&b.coords) {
                    if *za != 1 && *zb != 1 && (xa - xb).norm() <= r0 {
                        n += 1;
                    }
                }
            }
        }
    }
    n
}

#[test]
fn boundary_counts_match_brute_force() {
    let fixtures = [
        spec(LatticeKind::SimpleCubic, 5, 1),
        spec(LatticeKind::Fcc, 3, 1),
        spec(LatticeKind::TwoComponentCubic, 3, 1),
        spec(LatticeKind::SimpleCubic, 5, 2),
    ];
    for f in &fixtures {
        let block = Block::from_crystal(&synth_lattice(f).unwrap());
        for seed in 0..12u64 {
            let params = CropParams {
                t_max: [2, 7, 20, 45, 90, 400][seed as usize % 6],
                seed,
                ..CropParams::default()
            };
            let crop = s4_crop(&block, &params).unwrap();
            for r0 in [3.0, 4.5, 6.0] {
                let (edges, ratio) = boundary_loss_ratio(&block, &crop, r0).unwrap();
                assert_eq!(edges, brute_edges(&block, &crop.molecules, r0), "{f:?} seed {seed} r0 {r0}");
                assert_eq!(ratio, edges as f64 / crop.token_count as f64);
            }
        }
        let all = exact_ball_crop(&block, block.asu[0], 1e9);
        assert_eq!(boundary_loss_ratio(&block, &all, 4.5).unwrap(), (0, 0.0));
    }
    let block = Block::from_crystal(&synth_lattice(&spec(LatticeKind::SimpleCubic, 5, 1)).unwrap());
    let one = exact_ball_crop(&block, block.asu[0], 0.0);
    assert_eq!(boundary_loss_ratio(&block, &one, 4.5).unwrap(), (6, 6.0));
    assert!(boundary_loss_ratio(&block, &one, 0.0).is_err());
}

#[test]
fn fit_on_exact_and_flat_laws() {
    let point = |tokens: usize, ratio: f64| ScalingPoint {
        kind: LatticeKind::SimpleCubic,
        spacing: 4.0,
        r_cut: 4.5,
        r0: 4.5,
        seed: 0,
        t_target: tokens,
        tokens,
        boundary_edges: 1,
        boundary_loss: 1.0,
        ratio,
    };
    let exact: Vec<_> = [30, 60, 120, 240, 480, 960, 1920].iter().map(|&t| point(t, 5.0 * (t as f64).powf(-1.0 / 3.0))).collect();
    let fit = fit_scaling_exponent(&exact).unwrap();
    assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
    assert!((fit.intercept - 5f64.ln()).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert_eq!(fit.n_points, 7);
    let flat: Vec<_> = [30, 60, 120, 240, 480].iter().map(|&t| point(t, 0.4)).collect();
    assert!(fit_scaling_exponent(&flat).unwrap().slope.abs() < 1e-12);
    // repeated token counts do not count as distinct points
    let dup: Vec<_> = [30, 30, 60, 60, 120, 120, 240, 240].iter().map(|&t| point(t, 1.0)).collect();
    assert!(fit_scaling_exponent(&dup).is_err());
}

#[test]
fn exact_ball_pilot_recovers_the_exponent() {
    let lattice = spec(LatticeKind::SimpleCubic, 21, 1);
    let radii: Vec<f64> = (2..=9).map(|k| 4.0 * k as f64 + 1e-6).collect();
    let pts = exact_ball_points(&lattice, 4.5, &radii).unwrap();
    let fit = fit_scaling_exponent(&pts).unwrap();
    assert!((fit.slope + 1.0 / 3.0).abs() <= 0.03, "pilot slope {}", fit.slope);
    assert!(fit.r_squared > 0.99);
}

#[test]
fn default_sweep_trends() {
    let spec = ScalingSweepSpec::default();
    let pts = run_scaling_sweep(&spec).unwrap();
    assert_eq!(pts.len(), 7 * 32);
    let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for p in &pts {
        assert!(p.tokens <= p.t_target && p.tokens > 0);
        by_t.entry(p.t_target).or_default().push(p.ratio);
    }
    let med: Vec<f64> = by_t.into_values().map(median).collect();
    let inversions = med.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "medians {med:?}");
    let fit = fit_scaling_exponent(&pts).unwrap();
    assert!((-0.43..=-0.23).contains(&fit.slope) && fit.r_squared >= 0.9, "{fit:?}");
}

#[test]
fn boundary_loss_grows_with_contact_radius() {
    let spec = ScalingSweepSpec {
        lattice: SyntheticLatticeSpec { extent: 13, ..Default::default() },
        r0s: vec![3.0, 4.5, 6.0, 8.0],
        token_targets: vec![30, 120, 480],
        seeds: (0..8).collect(),
        ..Default::default()
    };
    let pts = run_scaling_sweep(&spec).unwrap();
    // same r_cut, seed and target give the same crop, so edges are
    // pointwise monotone in r0; medians follow
    let mut cells: BTreeMap<(usize, u64), Vec<(f64, usize)>> = BTreeMap::new();
    for p in &pts {
        cells.entry((p.t_target, p.seed)).or_default().push((p.r0, p.boundary_edges));
    }
    for v in cells.values() {
        assert!(v.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1), "{v:?}");
    }
    for t in [30, 120, 480] {
        let meds: Vec<f64> = spec
            .r0s
            .iter()
            .map(|&r0| median(pts.iter().filter(|p| p.t_target == t && p.r0 == r0).map(|p| p.boundary_loss).collect()))
            .collect();
        assert!(meds.windows(2).all(|w| w[0] <= w[1]), "T {t}: {meds:?}");
    }
}

#[test]
fn sweep_rows_and_determinism() {
    let one = ScalingSweepSpec {
        lattice: SyntheticLatticeSpec { extent: 9, ..Default::default() },
        token_targets: vec![60],
        seeds: vec![3],
        ..Default::default()
    };
    assert_eq!(run_scaling_sweep(&one).unwrap().len(), 1);

    let two = ScalingSweepSpec { seeds: vec![3, 4], ..one.clone() };
    let rows = run_scaling_sweep(&two).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].r_cut, rows[0].r0, rows[0].t_target), (rows[1].r_cut, rows[1].r0, rows[1].t_target));
    assert_eq!((rows[0].seed, rows[1].seed), (3, 4));

    let spec = ScalingSweepSpec {
        lattice: SyntheticLatticeSpec { extent: 11, ..Default::default() },
        r_cuts: vec![4.5, 6.0],
        token_targets: vec![30, 240],
        seeds: (0..6).collect(),
        ..Default::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sweep_csv(&run_scaling_sweep(&spec).unwrap()))
    };
    let a = run(1);
    assert_eq!(a, run(8));
    assert_eq!(a, run(3));
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some(SWEEP_CSV_HEADER));
    assert_eq!(lines.count(), 2 * 2 * 6);

    for method in [CropMethod::Knn, CropMethod::CentroidRadius] {
        let s = ScalingSweepSpec { method, ..spec.clone() };
        let rows = run_scaling_sweep(&s).unwrap();
        assert!(rows.iter().all(|p| p.tokens <= p.t_target));
    }

    let bad = [
        ScalingSweepSpec { seeds: vec![], ..spec.clone() },
        ScalingSweepSpec { r_cuts: vec![-1.0], ..spec.clone() },
        ScalingSweepSpec { token_targets: vec![0], ..spec.clone() },
        ScalingSweepSpec { p_max: 1.5, ..spec.clone() },
    ];
    for b in bad {
        assert!(run_scaling_sweep(&b).is_err());
    }
}
