//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS line with its measurements (run with `-- --nocapture` to see them;
//! the libtest per-test status lines carry the same pass/fail signal).
//!
//! Criteria with runtime caps assert wall-clock time measured around the
//! computation only.

use std::collections::BTreeMap;
use std::time::Instant;

use dyadic::covering::{cover, cover_naive, cover_with, RatInterval};
use dyadic::exact::{covering_constant, int, pow2, ratio, relative_distance, to_f64, Rational};
use dyadic::grids::{min_endpoint_gap, Domain, GridSpec};
use dyadic::haar::{
    carleson_chain_report, parseval_defect, random_finite_haar, verify_bmo_intersection,
};
use dyadic::maximal::{
    decompose_h1, random_atom, reconstruct_split, validate_atom, verify_maximal_comparability,
    AtomicDecomposition,
};
use dyadic::mesh::{enumerate_intervals, MeshWeight2D};
use dyadic::product::{
    haar2_transform, parseval2_defect, product_bmo_dyadic, product_weight_check,
    random_finite_product_haar, random_staircase, singleton_omegas, synthesize2,
    verify_strong_maximal_comparability, GridPair,
};
use dyadic::weights::{
    common_dyadic_doubling, generate_dyadic_doubling, rh1_ainfty_relation, verify_intersection_on,
    DoublingPair, PIndex, TwoGridGeometry, WeightClass,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn delta_set() -> Vec<Rational> {
    vec![ratio(1, 3), ratio(1, 5), ratio(2, 5), ratio(1, 7)]
}

#[test]
fn criterion_01_exact_delta_diagnostics() {
    let start = Instant::now();
    let d = relative_distance(&ratio(1, 3)).unwrap();
    let c = covering_constant(&ratio(1, 3)).unwrap();
    let elapsed = start.elapsed();
    assert_eq!(d, ratio(1, 3));
    assert_eq!(c, int(6));
    assert!(elapsed.as_micros() < 1000, "took {elapsed:?}");
    println!(
        "criterion 1 PASS: d(1/3) = 1/3 and C(1/3) = 6 exactly, in {:?}",
        elapsed
    );
}

#[test]
fn criterion_02_covering_soundness_exhaustive() {
    let start = Instant::now();
    let dom = Domain::torus(10);
    let mut total = 0usize;
    for delta in delta_set() {
        let shift = dyadic::exact::AdmissibleShift::new(&delta).unwrap();
        let c = covering_constant(&delta).unwrap();
        for ai in enumerate_intervals(dom, &dom.cell_len()).unwrap() {
            let q = ai.to_rat(dom);
            let (id, ratio) = cover_with(&q, &shift).unwrap();
            assert!(
                RatInterval::from_id(&id).contains_interval(&q),
                "containment failed: delta {delta}, Q {q:?}"
            );
            assert!(ratio <= c, "ratio bound failed: delta {delta}, Q {q:?}");
            total += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!(
        "criterion 2 PASS: {total} covers exact on torus L=10 over 4 deltas in {:?}",
        elapsed
    );
}

#[test]
fn criterion_03_large_scale_shift_necessity() {
    // Line window M=6, family realized at mesh resolution 1/4 (level 2):
    // every aligned Q = [a, b) with a < 0 < 1/3 < b and |Q| <= 2^6.
    let delta = ratio(1, 3);
    let dom = Domain::line(6, 2);
    let c = covering_constant(&delta).unwrap();
    let quarter = ratio(1, 4);
    let window = int(64);
    let mut checked = 0usize;
    let mut a = -window.clone();
    while a < int(0) {
        // b runs over multiples of 1/4 strictly above 1/3, i.e. from 1/2.
        let mut b = ratio(1, 2);
        while b < window && b.clone() - a.clone() <= window {
            let q = RatInterval::new(a.clone(), b.clone() - a.clone(), dom).unwrap();
            assert!(q.contains_point(&int(0)) && q.contains_point(&delta));
            let (id, ratio) = cover(&q, &delta).unwrap();
            assert!(RatInterval::from_id(&id).contains_interval(&q), "Q {q:?}");
            assert!(ratio <= c, "ratio {ratio} > {c} at Q {q:?}");
            for depth in 0..=6 {
                assert!(
                    cover_naive(&q, &delta, depth).unwrap().is_none(),
                    "naive cover unexpectedly succeeded at depth {depth} for {q:?}"
                );
            }
            checked += 1;
            b += quarter.clone();
        }
        a += quarter.clone();
    }
    println!(
        "criterion 3 PASS: {checked} intervals with 0 and delta interior; cover ratio <= 6, naive cover always empty"
    );
}

#[test]
fn criterion_04_separation_invariant() {
    for delta in delta_set() {
        let d = relative_distance(&delta).unwrap();
        for n in -10..=10i32 {
            let gap = min_endpoint_gap(&delta, n).unwrap();
            let bound = d.clone() * pow2(-(n as i64));
            assert!(gap >= bound, "delta {delta} level {n}: {gap} < {bound}");
            if delta == ratio(1, 3) && n < 0 && n % 2 == 0 {
                assert_eq!(gap, bound, "equality expected at even level {n}");
            }
        }
    }
    println!("criterion 4 PASS: endpoint separation >= d(delta) 2^-n for n in [-10,10], equality at even negative levels for 1/3");
}

#[test]
fn criterion_05_weight_class_bounds() {
    let start = Instant::now();
    let dom = Domain::torus(8);
    let classes = [
        WeightClass::Ap(PIndex::Finite(1.0)),
        WeightClass::Ap(PIndex::Finite(2.0)),
        WeightClass::Ap(PIndex::Finite(4.0)),
        WeightClass::Ap(PIndex::Infinity),
        WeightClass::RHp(PIndex::Finite(2.0)),
        WeightClass::RHp(PIndex::Infinity),
        WeightClass::RHp(PIndex::Finite(1.0)),
        WeightClass::Doubling,
    ];
    let mut rng = ChaCha20Rng::seed_from_u64(500);
    let mut count = 0usize;
    let geoms: BTreeMap<String, TwoGridGeometry> = delta_set()
        .into_iter()
        .map(|d| (d.to_string(), TwoGridGeometry::new(dom, &d).unwrap()))
        .collect();
    // 200 weights at delta = 1/3, plus a cross-delta sample.
    for i in 0..220usize {
        let b = 1.5 + rng.gen_range(0.0..2.5);
        let w = generate_dyadic_doubling(rng.gen(), dom, b).unwrap();
        let deltas = if i < 200 {
            vec![ratio(1, 3)]
        } else {
            vec![ratio(1, 5), ratio(2, 5), ratio(1, 7)]
        };
        for delta in deltas {
            let geom = &geoms[&delta.to_string()];
            let dy = DoublingPair::measure_on(&w, geom);
            for class in classes {
                let rep = verify_intersection_on(&w, geom, class, dy).unwrap();
                assert!(
                    rep.pass,
                    "weight {i} delta {delta} class {class:?}: {:?}",
                    rep.checks
                );
            }
        }
        count += 1;
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
    println!(
        "criterion 5 PASS: {count} cascade weights x 8 classes, monotone exact and two-grid bounds within 1e-9, in {:?}",
        elapsed
    );
}

#[test]
fn criterion_06_rh1_ainfty() {
    let dom = Domain::torus(8);
    let mut rng = ChaCha20Rng::seed_from_u64(600);
    for i in 0..200usize {
        let b = 1.5 + rng.gen_range(0.0..2.5);
        let w = generate_dyadic_doubling(rng.gen(), dom, b).unwrap();
        let rep = rh1_ainfty_relation(&w).unwrap();
        assert!(rep.pass, "weight {i}: {:?}", rep.checks);
    }
    println!("criterion 6 PASS: RH_1/e <= A_inf for 200 generated weights (tolerance 1e-9)");
}

#[test]
fn criterion_07_bmo_forward_chains_parseval() {
    let dom = Domain::torus(8);
    let delta = ratio(1, 3);
    let std = GridSpec::standard(dom);
    let sh = GridSpec::shifted(delta.clone(), dom).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(700);
    let mut k_max = 0.0f64;
    for i in 0..200usize {
        let f = random_finite_haar(&mut rng, dom, 12).unwrap();
        let rep = verify_bmo_intersection(&f, &delta, 64.0).unwrap();
        assert!(rep.pass, "function {i}: {:?}", rep.checks);
        // Forward inequality holds exactly.
        let grid_max = rep.constants["bmo_d"].max(rep.constants["bmo_delta"]);
        assert!(grid_max <= rep.constants["bmo_star"]);
        k_max = k_max.max(rep.constants["k_emp"]);
        for grid in [&std, &sh] {
            let chains = carleson_chain_report(&f, grid).unwrap();
            assert!(chains.pass, "function {i} chains: {:?}", chains.checks);
        }
        let cell = to_f64(&dom.cell_len());
        let l2: f64 = f.values().iter().map(|v| v * v * cell).sum();
        let d_std = parseval_defect(&f, &std).unwrap();
        assert!(
            d_std.abs() <= 1e-12 * l2.max(1.0),
            "Parseval defect {d_std}"
        );
    }
    assert!(k_max <= 64.0);
    println!(
        "criterion 7 PASS: 200 finite-Haar functions; forward inequality exact, chains within 1e-9, Parseval within 1e-12; max K_emp = {k_max:.3} <= 64"
    );
}

#[test]
fn criterion_08_maximal_comparability() {
    let dom = Domain::torus(8);
    let mut rng = ChaCha20Rng::seed_from_u64(800);
    let mut unweighted = 0usize;
    let mut weighted = 0usize;
    for delta in delta_set() {
        let w = generate_dyadic_doubling(rng.gen(), dom, 2.5).unwrap();
        for i in 0..14usize {
            let f = random_finite_haar(&mut rng, dom, 10).unwrap();
            let rep = verify_maximal_comparability(&f, &delta, None).unwrap();
            assert!(rep.pass, "delta {delta} f{i}: {:?}", rep.checks);
            unweighted += 1;
            if i % 3 == 0 {
                let rep = verify_maximal_comparability(&f, &delta, Some(&w)).unwrap();
                assert!(rep.pass, "weighted delta {delta} f{i}: {:?}", rep.checks);
                weighted += 1;
            }
        }
    }
    assert!(unweighted >= 50);
    println!(
        "criterion 8 PASS: {unweighted} unweighted + {weighted} weighted comparability checks, pointwise at every mesh cell"
    );
}

#[test]
fn criterion_09_atom_machinery() {
    let dom = Domain::torus(8);
    let delta = ratio(1, 3);
    let mut rng = ChaCha20Rng::seed_from_u64(900);
    let mut atoms = 0usize;
    for trial in 0..10usize {
        let w = generate_dyadic_doubling(rng.gen(), dom, 2.0).unwrap();
        let mut d = AtomicDecomposition::default();
        for _ in 0..12 {
            let a = random_atom(&mut rng, &w).unwrap();
            validate_atom(&a, &w).unwrap();
            d.terms.push((rng.gen_range(-3.0..3.0), a));
            atoms += 1;
        }
        let split = decompose_h1(&d, &w, &delta).unwrap();
        for (_, a) in split.std.terms.iter().chain(&split.shifted.terms) {
            validate_atom(a, &w).unwrap();
        }
        let orig = d.reconstruct(dom);
        let routed = reconstruct_split(&split, dom);
        assert_eq!(
            orig.values(),
            routed.values(),
            "trial {trial}: reconstruction differs"
        );
        let c = to_f64(&covering_constant(&delta).unwrap());
        let c_dy = common_dyadic_doubling(&w, &delta).unwrap();
        let c0 = c.sqrt() * c_dy.powf(0.5 * (4.0 * c).log2());
        let out = split.std.norm_proxy() + split.shifted.norm_proxy();
        assert!(out <= c0 * d.norm_proxy() * (1.0 + 1e-12));
    }
    assert!(atoms >= 100);
    println!(
        "criterion 9 PASS: {atoms} random atoms rescaled to valid grid atoms; decompositions reconstruct bit-for-bit within the C0 norm bound"
    );
}

#[test]
fn criterion_10_product_suite() {
    let start = Instant::now();
    let dx = Domain::torus(4);
    let dy = Domain::torus(4);
    let delta = ratio(1, 3);
    let mut rng = ChaCha20Rng::seed_from_u64(1000);
    let pairs = GridPair::four(&delta, dx, dy).unwrap();

    // Strong maximal two-sided bounds at all 256 points, 20 functions.
    for i in 0..20usize {
        let f = random_finite_product_haar(&mut rng, dx, dy, 8).unwrap();
        let rep = verify_strong_maximal_comparability(&f, &delta, None).unwrap();
        assert!(rep.pass, "function {i}: {:?}", rep.checks);
        let d = parseval2_defect(&f, &pairs[0]).unwrap();
        let hx = to_f64(&dx.cell_len());
        let l2: f64 = f.values().iter().map(|v| v * v * hx * hx).sum();
        assert!(d.abs() <= 1e-12 * l2.max(1.0), "2D Parseval defect {d}");
    }

    // Product weights: tensor cascades at p = 2.
    for _ in 0..4 {
        let wx = generate_dyadic_doubling(rng.gen(), dx, 2.0).unwrap();
        let wy = generate_dyadic_doubling(rng.gen(), dy, 2.0).unwrap();
        let w2 = MeshWeight2D::tensor(&wx, &wy);
        let rep = product_weight_check(&w2, PIndex::Finite(2.0), &delta).unwrap();
        assert!(rep.pass, "{:?}", rep.checks);
    }

    // Product BMO: monotone in the family; subset sums below total energy,
    // over at least 100 staircase open sets.
    let f = {
        let mut terms = BTreeMap::new();
        for _ in 0..6 {
            let lx = rng.gen_range(0..4);
            let ly = rng.gen_range(0..4);
            let kx = rng.gen_range(0..(1i64 << lx));
            let ky = rng.gen_range(0..(1i64 << ly));
            *terms.entry(((lx, kx), (ly, ky))).or_insert(0.0) += rng.gen_range(-1.0f64..1.0);
        }
        synthesize2(dx, dy, &terms).unwrap()
    };
    for pair in &pairs {
        let mut omegas = singleton_omegas(pair).unwrap();
        let (v1, _) = product_bmo_dyadic(&f, pair, &omegas).unwrap();
        for _ in 0..110 {
            omegas.push(random_staircase(&mut rng, dx, dy, 5));
        }
        let (v2, per) = product_bmo_dyadic(&f, pair, &omegas).unwrap();
        assert!(v2 >= v1, "monotonicity failed for {}", pair.tag());
        let total = haar2_transform(&f, pair).unwrap().energy();
        for (om, v) in omegas.iter().zip(&per) {
            assert!(
                v * om.measure(dx, dy) <= total * (1.0 + 1e-9),
                "Carleson sum exceeded total energy for {}",
                pair.tag()
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 120, "took {elapsed:?}");
    println!(
        "criterion 10 PASS: strong-maximal two-sided bounds (20 functions, 256 points), 2D Parseval 1e-12, tensor product-weight bounds, product BMO monotone over 110+ staircases, in {:?}",
        elapsed
    );
}

#[test]
fn criterion_11_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_dyadic");
    let tmp = std::env::temp_dir().join(format!("dyadic-accept-{}", std::process::id()));
    let run = |dir: &std::path::Path| {
        let out = std::process::Command::new(bin)
            .args([
                "verify",
                "all",
                "--delta",
                "1/3",
                "--level",
                "5",
                "--level-2d",
                "3",
                "--window",
                "4",
                "--seed",
                "7",
                "--weights",
                "3",
                "--functions",
                "6",
                "--out",
            ])
            .arg(dir)
            .output()
            .expect("cli runs");
        assert!(
            out.status.success(),
            "cli failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let d1 = tmp.join("run1");
    let d2 = tmp.join("run2");
    run(&d1);
    run(&d2);
    let strip = |path: &std::path::Path| -> String {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("\"timestamp\""))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let sub = "delta_1_3";
    let mut compared = 0;
    for entry in std::fs::read_dir(d1.join(sub)).unwrap() {
        let name = entry.unwrap().file_name();
        let a = strip(&d1.join(sub).join(&name));
        let b = strip(&d2.join(sub).join(&name));
        assert_eq!(a, b, "report {name:?} differs between runs");
        compared += 1;
    }
    assert!(compared >= 7, "expected all suite reports plus summary");
    std::fs::remove_dir_all(&tmp).ok();
    println!(
        "criterion 11 PASS: two seeded `verify all` runs produced {compared} byte-identical reports (timestamp excluded)"
    );
}
