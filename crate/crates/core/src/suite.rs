//! Verification suites: seeded, deterministic bundles of the per-theorem
//! verifiers, with JSON reports and a machine-readable summary.

use std::path::PathBuf;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::covering::{cover, cover_naive, RatInterval};
use crate::error::{Error, Result};
use crate::exact::{
    covering_constant, format_rational, int, pow2, relative_distance, to_f64, Rational,
};
use crate::grids::GridSpec;
use crate::grids::{min_endpoint_gap, Domain};
use crate::haar::{
    carleson_chain_report, parseval_defect, random_finite_haar, verify_bmo_intersection,
    vmo_truncation, BmoMode,
};
use crate::maximal::{
    decompose_h1, random_atom, reconstruct_split, validate_atom, verify_maximal_comparability,
    AtomicDecomposition,
};
use crate::mesh::{enumerate_intervals, MeshFunction1D, MeshWeight2D};
use crate::product::{
    haar2_transform, parseval2_defect, product_bmo_dyadic, product_weight_check,
    random_finite_product_haar, random_staircase, singleton_omegas,
    verify_strong_maximal_comparability, GridPair,
};
use crate::report::VerificationReport;
use crate::weights::{
    common_dyadic_doubling, generate_dyadic_doubling, rh1_ainfty_relation, PIndex, WeightClass,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteName {
    Covering,
    Weights,
    Bmo,
    Vmo,
    Maximal,
    Product,
}

impl SuiteName {
    pub const ALL: [SuiteName; 6] = [
        SuiteName::Covering,
        SuiteName::Weights,
        SuiteName::Bmo,
        SuiteName::Vmo,
        SuiteName::Maximal,
        SuiteName::Product,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "covering" => Ok(SuiteName::Covering),
            "weights" => Ok(SuiteName::Weights),
            "bmo" => Ok(SuiteName::Bmo),
            "vmo" => Ok(SuiteName::Vmo),
            "maximal" => Ok(SuiteName::Maximal),
            "product" => Ok(SuiteName::Product),
            other => Err(Error::Config(format!("unknown suite {other:?}"))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SuiteName::Covering => "covering",
            SuiteName::Weights => "weights",
            SuiteName::Bmo => "bmo",
            SuiteName::Vmo => "vmo",
            SuiteName::Maximal => "maximal",
            SuiteName::Product => "product",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub delta: Rational,
    pub level: i32,
    pub window: i32,
    pub level_2d: i32,
    pub seed: u64,
    pub suites: Vec<SuiteName>,
    pub k_cap: f64,
    pub weight_count: usize,
    pub function_count: usize,
    pub out_dir: Option<PathBuf>,
}

impl SuiteConfig {
    pub fn new(delta: Rational) -> Result<Self> {
        let d = relative_distance(&delta)?;
        if d == int(0) {
            return Err(Error::DyadicDelta(format_rational(&delta)));
        }
        Ok(SuiteConfig {
            delta,
            level: 8,
            window: 6,
            level_2d: 4,
            seed: 7,
            suites: SuiteName::ALL.to_vec(),
            k_cap: 64.0,
            weight_count: 25,
            function_count: 40,
            out_dir: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.level < 1 || self.level_2d < 1 || self.window < 0 {
            return Err(Error::Config("levels must be positive".into()));
        }
        if self.k_cap <= 1.0 {
            return Err(Error::Config("k_cap must exceed 1".into()));
        }
        Ok(())
    }

    fn rng_for(&self, suite: SuiteName) -> ChaCha20Rng {
        let offset = SuiteName::ALL.iter().position(|s| *s == suite).unwrap() as u64;
        ChaCha20Rng::seed_from_u64(
            self.seed
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(offset),
        )
    }
}

#[derive(Serialize, Debug)]
pub struct SuiteOutcome {
    pub suite: String,
    pub pass: bool,
    pub reports: Vec<VerificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<serde_json::Value>,
}

impl SuiteOutcome {
    fn new(name: SuiteName) -> Self {
        SuiteOutcome {
            suite: name.tag().into(),
            pass: true,
            reports: Vec::new(),
            failure: None,
        }
    }

    fn add(&mut self, rep: VerificationReport) {
        self.pass &= rep.pass;
        self.reports.push(rep);
    }

    fn add_with_input(&mut self, rep: VerificationReport, input: impl Fn() -> serde_json::Value) {
        if !rep.pass && self.failure.is_none() {
            self.failure = Some(serde_json::json!({
                "report": rep,
                "input": input(),
            }));
        }
        self.add(rep);
    }
}

pub fn suite_covering(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new(SuiteName::Covering);
    let delta = &cfg.delta;
    let d = relative_distance(delta)?;
    let c = covering_constant(delta)?;

    // Exhaustive covering soundness over the aligned torus family.
    let dom = Domain::torus(cfg.level.min(8));
    let shift = crate::exact::AdmissibleShift::new(delta)?;
    let mut rep = VerificationReport::new("covering-soundness").with_delta(delta);
    let mut checked = 0usize;
    let mut worst_ratio = int(0);
    'outer: for ai in enumerate_intervals(dom, &dom.cell_len())? {
        let q = ai.to_rat(dom);
        let (id, ratio) = crate::covering::cover_with(&q, &shift)?;
        let iv = RatInterval::from_id(&id);
        if !iv.contains_interval(&q) || ratio > c {
            rep.pass = false;
            rep.check_le_exact(
                format!(
                    "containment/ratio failed at left={} len={}",
                    format_rational(&q.left),
                    format_rational(&q.len)
                ),
                to_f64(&ratio),
                to_f64(&c),
            );
            break 'outer;
        }
        if ratio > worst_ratio {
            worst_ratio = ratio;
        }
        checked += 1;
    }
    rep.constant("intervals_checked", checked as f64);
    rep.constant("worst_ratio", to_f64(&worst_ratio));
    rep.headline(
        "worst |I|/|Q| <= 2/d",
        to_f64(&worst_ratio),
        to_f64(&c),
        0.0,
    );
    out.add(rep);

    // Naive-shift failure family on the line: 0 and delta interior.
    let line = Domain::line(cfg.window, 2);
    let mut rep = VerificationReport::new("naive-shift-necessity").with_delta(delta);
    let mut ok = true;
    let window = pow2(cfg.window as i64);
    let step = crate::exact::ratio(1, 4);
    let mut checked = 0usize;
    let mut a = -window.clone();
    while a < int(0) {
        let mut b = delta.clone().floor() + crate::exact::ratio(1, 2); // first multiple of 1/4 above delta
        while b <= window && b.clone() - a.clone() <= window {
            let q = RatInterval::new(a.clone(), b.clone() - a.clone(), line)?;
            if q.contains_point(&int(0)) && q.contains_point(delta) {
                let (id, ratio) = cover(&q, delta)?;
                ok &= RatInterval::from_id(&id).contains_interval(&q) && ratio <= c;
                ok &= cover_naive(&q, delta, cfg.window)?.is_none();
                checked += 1;
            }
            b += pow2(0) * step.clone() * int(8); // coarse stride keeps CLI fast
        }
        a += step.clone() * int(8);
    }
    rep.constant("intervals_checked", checked as f64);
    rep.headline(
        "cover succeeds and naive cover fails",
        if ok { 0.0 } else { 1.0 },
        0.0,
        0.0,
    );
    out.add(rep);

    // Separation of the two endpoint lattices at every level.
    let mut rep = VerificationReport::new("endpoint-separation").with_delta(delta);
    let mut ok = true;
    for n in -10..=10i32 {
        let gap = min_endpoint_gap(delta, n)?;
        let bound = d.clone() * pow2(-(n as i64));
        ok &= gap >= bound;
    }
    rep.headline(
        "min gap >= d(delta) 2^-n for n in [-10,10]",
        if ok { 0.0 } else { 1.0 },
        0.0,
        0.0,
    );
    out.add(rep);
    Ok(out)
}

pub fn suite_weights(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new(SuiteName::Weights);
    let dom = Domain::torus(cfg.level);
    let geom = crate::weights::TwoGridGeometry::new(dom, &cfg.delta)?;
    let mut rng = cfg.rng_for(SuiteName::Weights);
    let classes = [
        WeightClass::Ap(PIndex::Finite(1.0)),
        WeightClass::Ap(PIndex::Finite(2.0)),
        WeightClass::Ap(PIndex::Finite(4.0)),
        WeightClass::Ap(PIndex::Infinity),
        WeightClass::RHp(PIndex::Finite(1.0)),
        WeightClass::RHp(PIndex::Finite(2.0)),
        WeightClass::RHp(PIndex::Infinity),
        WeightClass::Doubling,
    ];
    for i in 0..cfg.weight_count {
        let b = 1.5 + rng.gen_range(0.0..2.0);
        let w = generate_dyadic_doubling(rng.gen(), dom, b)?;
        let dy = crate::weights::DoublingPair::measure_on(&w, &geom);
        for class in classes {
            let rep = crate::weights::verify_intersection_on(&w, &geom, class, dy)?;
            out.add_with_input(rep, || crate::mesh::function_to_json(w.as_fn()));
            if !out.pass {
                return Ok(out);
            }
        }
        let rep = rh1_ainfty_relation(&w)?;
        out.add_with_input(rep, || crate::mesh::function_to_json(w.as_fn()));
        if !out.pass {
            return Ok(out);
        }
        let _ = i;
    }
    Ok(out)
}

pub fn suite_bmo(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new(SuiteName::Bmo);
    let dom = Domain::torus(cfg.level);
    let mut rng = cfg.rng_for(SuiteName::Bmo);
    let std = GridSpec::standard(dom);
    let sh = GridSpec::shifted(cfg.delta.clone(), dom)?;
    let mut k_max = 0.0f64;
    for _ in 0..cfg.function_count {
        let f = random_finite_haar(&mut rng, dom, 10)?;
        let rep = verify_bmo_intersection(&f, &cfg.delta, cfg.k_cap)?;
        k_max = k_max.max(rep.constants["k_emp"]);
        out.add_with_input(rep, || crate::mesh::function_to_json(&f));
        for grid in [&std, &sh] {
            let rep = carleson_chain_report(&f, grid)?;
            out.add_with_input(rep, || crate::mesh::function_to_json(&f));
        }
        let cell = to_f64(&dom.cell_len());
        let l2: f64 = f.values().iter().map(|v| v * v * cell).sum();
        let mut rep = VerificationReport::new("parseval").with_delta(&cfg.delta);
        let d_std = parseval_defect(&f, &std)?;
        rep.check_le_rel(
            "|standard Parseval defect| <= 1e-12 ||f||^2",
            d_std.abs(),
            1e-12 * l2.max(1e-30),
            1e-9,
        );
        let d_sh = parseval_defect(&f, &sh)?;
        rep.check_le_rel(
            "shifted Bessel defect >= -tol",
            -d_sh,
            1e-12 * l2.max(1e-30),
            1e-9,
        );
        out.add_with_input(rep, || crate::mesh::function_to_json(&f));
        if !out.pass {
            return Ok(out);
        }
    }
    let mut rep = VerificationReport::new("bmo-kemp-summary").with_delta(&cfg.delta);
    rep.headline("max empirical reverse ratio <= cap", k_max, cfg.k_cap, 0.0);
    out.add(rep);
    Ok(out)
}

pub fn suite_vmo(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new(SuiteName::Vmo);
    let dom = Domain::line(2, cfg.level.min(4));
    let grid = GridSpec::standard(dom);
    let mut rng = cfg.rng_for(SuiteName::Vmo);
    let max_n = 2 + cfg.level.min(4);
    for _ in 0..cfg.function_count.min(50) {
        let f = random_finite_haar(&mut rng, dom, 8)?;
        let mut rep = VerificationReport::new("vmo-truncation");
        let mut prev = f64::INFINITY;
        let mut last = f64::INFINITY;
        let mut monotone = true;
        for n in 0..=max_n {
            let fname = vmo_truncation(&f, &grid, n)?;
            let diff = MeshFunction1D::new(
                dom,
                f.values()
                    .iter()
                    .zip(fname.values())
                    .map(|(a, b)| a - b)
                    .collect(),
            )?;
            let norm = crate::haar::bmo_dyadic(&diff, &grid, BmoMode::Carleson)?.norm_carleson;
            monotone &= norm <= prev + 1e-12;
            prev = norm;
            last = norm;
        }
        rep.check_le_exact(
            "residual Carleson norm nonincreasing",
            if monotone { 0.0 } else { 1.0 },
            0.0,
        );
        rep.headline(
            "residual vanishes once the window covers the terms",
            last,
            1e-12,
            0.0,
        );
        out.add_with_input(rep, || crate::mesh::function_to_json(&f));
        if !out.pass {
            return Ok(out);
        }
    }
    Ok(out)
}

pub fn suite_maximal(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new(SuiteName::Maximal);
    let dom = Domain::torus(cfg.level);
    let mut rng = cfg.rng_for(SuiteName::Maximal);
    for i in 0..cfg.function_count.min(20) {
        let f = random_finite_haar(&mut rng, dom, 8)?;
        let rep = verify_maximal_comparability(&f, &cfg.delta, None)?;
        out.add_with_input(rep, || crate::mesh::function_to_json(&f));
        if i % 4 == 0 {
            let w = generate_dyadic_doubling(rng.gen(), dom, 2.5)?;
            let rep = verify_maximal_comparability(&f, &cfg.delta, Some(&w))?;
            out.add_with_input(rep, || crate::mesh::function_to_json(&f));
        }
        if !out.pass {
            return Ok(out);
        }
    }
    // Atom machinery: rescale validity, decomposition reconstruction.
    let w = generate_dyadic_doubling(rng.gen(), dom, 2.0)?;
    let mut d = AtomicDecomposition::default();
    for _ in 0..10 {
        d.terms
            .push((rng.gen_range(-2.0..2.0), random_atom(&mut rng, &w)?));
    }
    let split = decompose_h1(&d, &w, &cfg.delta)?;
    let mut rep = VerificationReport::new("atomic-decomposition").with_delta(&cfg.delta);
    let c = to_f64(&covering_constant(&cfg.delta)?);
    let c_dy = common_dyadic_doubling(&w, &cfg.delta)?;
    let c0_exact = c.sqrt() * c_dy.powf(0.5 * (4.0 * c).log2());
    rep.check_le_rel(
        "routed norm <= C0 * input norm",
        split.std.norm_proxy() + split.shifted.norm_proxy(),
        c0_exact * d.norm_proxy(),
        1e-12,
    );
    let orig = d.reconstruct(dom);
    let routed = reconstruct_split(&split, dom);
    let identical = orig.values() == routed.values();
    rep.check_le_exact(
        "bit-for-bit reconstruction",
        if identical { 0.0 } else { 1.0 },
        0.0,
    );
    let mut atoms_ok = true;
    for (_, a) in split.std.terms.iter().chain(&split.shifted.terms) {
        atoms_ok &= validate_atom(a, &w).is_ok();
    }
    rep.check_le_exact("routed atoms valid", if atoms_ok { 0.0 } else { 1.0 }, 0.0);
    out.add(rep);
    Ok(out)
}

pub fn suite_product(cfg: &SuiteConfig) -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new(SuiteName::Product);
    let dx = Domain::torus(cfg.level_2d);
    let dy = Domain::torus(cfg.level_2d);
    let mut rng = cfg.rng_for(SuiteName::Product);
    let pairs = GridPair::four(&cfg.delta, dx, dy)?;

    for i in 0..cfg.function_count.min(10) {
        let f = random_finite_product_haar(&mut rng, dx, dy, 6)?;
        let rep = verify_strong_maximal_comparability(&f, &cfg.delta, None)?;
        out.add_with_input(rep, || crate::mesh::function2_to_json(&f));
        // 2D Parseval on the dd pair.
        let hx = to_f64(&dx.cell_len());
        let hy = to_f64(&dy.cell_len());
        let l2: f64 = f.values().iter().map(|v| v * v * hx * hy).sum();
        let mut rep = VerificationReport::new("parseval-2d");
        let d = parseval2_defect(&f, &pairs[0])?;
        rep.check_le_rel(
            "|dd Parseval defect| small",
            d.abs(),
            1e-12 * l2.max(1e-30),
            1e-9,
        );
        out.add_with_input(rep, || crate::mesh::function2_to_json(&f));
        if i == 0 {
            // Product BMO: monotone in the family and <= C |Omega|.
            for pair in &pairs {
                let mut omegas = singleton_omegas(pair)?;
                let (v1, _) = product_bmo_dyadic(&f, pair, &omegas)?;
                for _ in 0..25 {
                    omegas.push(random_staircase(&mut rng, dx, dy, 5));
                }
                let (v2, per) = product_bmo_dyadic(&f, pair, &omegas)?;
                let mut rep = VerificationReport::new("product-bmo").with_delta(&cfg.delta);
                rep.constant("pair", pairs.iter().position(|p| p == pair).unwrap() as f64);
                rep.check_le_exact("monotone in the omega family", v1, v2);
                let total = haar2_transform(&f, pair)?.energy();
                let mut worst = f64::NEG_INFINITY;
                for (om, v) in omegas.iter().zip(&per) {
                    worst = worst.max(v * om.measure(dx, dy));
                }
                rep.check_le_rel("sum over R in Omega <= total energy", worst, total, 1e-9);
                rep.headline(
                    "reported constant dominates every omega",
                    per.iter().cloned().fold(0.0, f64::max),
                    v2,
                    0.0,
                );
                out.add_with_input(rep, || crate::mesh::function2_to_json(&f));
            }
        }
        if !out.pass {
            return Ok(out);
        }
    }

    // Product weights: tensor cascades.
    for _ in 0..3 {
        let wx = generate_dyadic_doubling(rng.gen(), dx, 2.0)?;
        let wy = generate_dyadic_doubling(rng.gen(), dy, 2.0)?;
        let w2 = MeshWeight2D::tensor(&wx, &wy);
        let rep = product_weight_check(&w2, PIndex::Finite(2.0), &cfg.delta)?;
        out.add_with_input(rep, || crate::mesh::function2_to_json(w2.as_fn()));
        let rep = verify_strong_maximal_comparability(
            &random_finite_product_haar(&mut rng, dx, dy, 4)?,
            &cfg.delta,
            Some(&w2),
        )?;
        out.add(rep);
        if !out.pass {
            return Ok(out);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct Summary<'a> {
    schema: u32,
    delta: String,
    seed: u64,
    level: i32,
    level_2d: i32,
    pass: bool,
    suites: Vec<&'a SuiteOutcome>,
    timestamp: String,
}

/// Run the selected suites, write one JSON report per suite plus a summary
/// (when an output directory is set), and return overall pass/fail.
pub fn run_suite(cfg: &SuiteConfig) -> Result<(bool, Vec<SuiteOutcome>)> {
    cfg.validate()?;
    let mut outcomes = Vec::new();
    for name in &cfg.suites {
        let outcome = match name {
            SuiteName::Covering => suite_covering(cfg)?,
            SuiteName::Weights => suite_weights(cfg)?,
            SuiteName::Bmo => suite_bmo(cfg)?,
            SuiteName::Vmo => suite_vmo(cfg)?,
            SuiteName::Maximal => suite_maximal(cfg)?,
            SuiteName::Product => suite_product(cfg)?,
        };
        outcomes.push(outcome);
    }
    let pass = outcomes.iter().all(|o| o.pass);
    if let Some(dir) = &cfg.out_dir {
        std::fs::create_dir_all(dir)?;
        for o in &outcomes {
            let path = dir.join(format!("{}.json", o.suite));
            std::fs::write(path, serde_json::to_string_pretty(o)?)?;
        }
        let summary = Summary {
            schema: crate::report::SCHEMA_VERSION,
            delta: format_rational(&cfg.delta),
            seed: cfg.seed,
            level: cfg.level,
            level_2d: cfg.level_2d,
            pass,
            suites: outcomes.iter().collect(),
            timestamp: timestamp(),
        };
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
    }
    Ok((pass, outcomes))
}

fn timestamp() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("{now}")
}
