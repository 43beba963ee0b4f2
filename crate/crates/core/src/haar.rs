//! Haar analysis per grid: transforms, dyadic BMO via averages and via
//! Carleson sums of squared coefficients, continuous BMO via averages over
//! the aligned family, the two-grid BMO verifier, projections, and the
//! finite-Haar truncation used for VMO checks.
//!
//! Haar normalization: h_I = |I|^{-1/2} (+1 on the left half, -1 on the
//! right half). Shifted-grid inner products are taken on the common
//! refinement of the mesh with the interval's endpoints, so coefficients are
//! defined for every grid even though only the standard grid resolves mesh
//! functions (standard-grid Parseval is exact; shifted grids satisfy the
//! Bessel inequality with a genuine deficit).

use std::collections::BTreeMap;

use num_traits::ToPrimitive;
use rand::Rng;
use serde::Serialize;

use crate::covering::RatInterval;
use crate::error::{Error, Result};
use crate::exact::{format_rational, int, pow2, to_f64, Rational};
use crate::grids::{children, level_indices_resident, Domain, GridFamily, GridSpec, IntervalId};
use crate::mesh::MeshFunction1D;
use crate::report::VerificationReport;

pub type CoeffKey = (i32, i64);

#[derive(Clone, Debug)]
pub struct HaarCoefficients {
    pub grid: GridSpec,
    /// (level, index) -> (f, h_I); levels run from the coarsest to L-1.
    pub coeffs: BTreeMap<CoeffKey, f64>,
    /// Torus only: the mean term (f, 1).
    pub mean: Option<f64>,
    /// Finest level whose interval halves are unions of mesh cells.
    pub resolvable_level: Option<i32>,
}

impl HaarCoefficients {
    pub fn energy(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum::<f64>() + self.mean.map_or(0.0, |m| m * m)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let list: Vec<serde_json::Value> = self
            .coeffs
            .iter()
            .map(|(&(n, k), &c)| {
                let id = IntervalId::new(self.grid.clone(), n, k);
                serde_json::json!({ "intervalId": id, "coeff": c })
            })
            .collect();
        serde_json::json!({ "mean": self.mean, "coeffs": list })
    }
}

fn key_of(id: &IntervalId) -> CoeffKey {
    (
        id.level,
        id.index.to_i64().expect("interval index fits i64"),
    )
}

pub fn halves(id: &IntervalId) -> (RatInterval, RatInterval) {
    let q = RatInterval::from_id(id);
    let half = q.len.clone() / int(2);
    let left = RatInterval::new(q.left.clone(), half.clone(), q.domain).unwrap();
    let right = RatInterval::new(q.left + half.clone(), half, q.domain).unwrap();
    (left, right)
}

/// Coefficient levels of a grid on this domain: coarsest ..= L-1.
fn coeff_levels(domain: Domain) -> std::ops::RangeInclusive<i32> {
    domain.coarsest_level()..=domain.finest_level() - 1
}

/// (f, h_I) for every window-resident grid interval whose children exist,
/// plus the mean term on the torus.
pub fn haar_transform(f: &MeshFunction1D, grid: &GridSpec) -> Result<HaarCoefficients> {
    if grid.domain != f.domain() {
        return Err(Error::Config("haar_transform domain mismatch".into()));
    }
    let p = f.prefix();
    let mut coeffs = BTreeMap::new();
    for level in coeff_levels(grid.domain) {
        let norm = to_f64(&pow2(level as i64)).sqrt(); // |I|^{-1/2}
        for k in level_indices_resident(grid, level)? {
            let id = IntervalId::new(grid.clone(), level, k);
            let (l, r) = halves(&id);
            let c = norm * (f.integral_refined(&l, &p)? - f.integral_refined(&r, &p)?);
            coeffs.insert(key_of(&id), c);
        }
    }
    let mean = if grid.domain.is_torus() {
        let full = RatInterval::new(int(0), int(1), grid.domain)?;
        Some(f.integral_refined(&full, &p)?)
    } else {
        None
    };
    let resolvable_level = match grid.family {
        GridFamily::Standard => Some(grid.domain.finest_level() - 1),
        _ => None, // admissible shifts are never dyadic, so never mesh-aligned
    };
    Ok(HaarCoefficients {
        grid: grid.clone(),
        coeffs,
        mean,
        resolvable_level,
    })
}

/// Mesh realization of a standard-grid coefficient set (no mean term).
pub fn synthesize(domain: Domain, coeffs: &BTreeMap<CoeffKey, f64>) -> Result<MeshFunction1D> {
    let n = domain.cell_count();
    let mut vals = vec![0.0; n];
    let grid = GridSpec::standard(domain);
    let zero_fn = MeshFunction1D::constant(domain, 0.0);
    for (&(level, k), &c) in coeffs {
        if c == 0.0 {
            continue;
        }
        let id = IntervalId::new(grid.clone(), level, k);
        let (l, r) = halves(&id);
        let amp = c * to_f64(&pow2(level as i64)).sqrt();
        zero_fn.for_each_covered_cell(&l, |cell, wgt| {
            if wgt > 0.0 {
                vals[cell] += amp;
            }
        })?;
        zero_fn.for_each_covered_cell(&r, |cell, wgt| {
            if wgt > 0.0 {
                vals[cell] -= amp;
            }
        })?;
    }
    MeshFunction1D::new(domain, vals)
}

/// Squared-coefficient subtree sums S(J) = sum over I inside J of (f,h_I)^2,
/// for every grid interval J with coefficients.
pub fn subtree_sums(h: &HaarCoefficients) -> Result<BTreeMap<CoeffKey, f64>> {
    let mut sums: BTreeMap<CoeffKey, f64> = BTreeMap::new();
    let levels: Vec<i32> = coeff_levels(h.grid.domain).collect();
    for &level in levels.iter().rev() {
        for k in level_indices_resident(&h.grid, level)? {
            let id = IntervalId::new(h.grid.clone(), level, k);
            let key = key_of(&id);
            let own = h.coeffs.get(&key).map_or(0.0, |c| c * c);
            let mut total = own;
            if level < h.grid.domain.finest_level() - 1 {
                let (c1, c2) = children(&id)?;
                for ch in [c1, c2] {
                    if let Some(s) = sums.get(&key_of(&ch)) {
                        total += s;
                    }
                }
            }
            sums.insert(key, total);
        }
    }
    Ok(sums)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BmoMode {
    Avg,
    AvgP(f64),
    Carleson,
}

#[derive(Clone, Debug, Serialize)]
pub struct BMOReport {
    pub norm_avg: f64,
    pub norm_p2: f64,
    pub norm_carleson: f64,
    /// The norm selected by the requested mode.
    pub primary: f64,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_left: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax_len: Option<String>,
}

/// Dyadic BMO norms of f over one grid: mean oscillation, p-mean
/// oscillation, and the Carleson form sup_J ((1/|J|) S(J))^{1/2}.
pub fn bmo_dyadic(f: &MeshFunction1D, grid: &GridSpec, mode: BmoMode) -> Result<BMOReport> {
    let p = f.prefix();
    let dom = grid.domain;
    let extra_p = match mode {
        BmoMode::AvgP(q) => {
            if q < 1.0 {
                return Err(Error::ExponentBelowOne(q));
            }
            q
        }
        _ => 2.0,
    };
    let mut norm_avg = 0.0f64;
    let mut norm_p2 = 0.0f64;
    let mut norm_extra = 0.0f64;
    let mut arg_avg: Option<RatInterval> = None;
    for level in dom.coarsest_level()..=dom.finest_level() {
        for k in level_indices_resident(grid, level)? {
            let id = IntervalId::new(grid.clone(), level, k);
            let q = RatInterval::from_id(&id);
            let o1 = f.oscillation_refined(&q, &p, 1.0)?;
            let o2 = f.oscillation_refined(&q, &p, 2.0)?;
            if o1 > norm_avg {
                norm_avg = o1;
                arg_avg = Some(q.clone());
            }
            norm_p2 = norm_p2.max(o2);
            if extra_p != 2.0 {
                norm_extra = norm_extra.max(f.oscillation_refined(&q, &p, extra_p)?);
            } else {
                norm_extra = norm_p2;
            }
        }
    }
    let h = haar_transform(f, grid)?;
    let sums = subtree_sums(&h)?;
    let mut norm_carleson = 0.0f64;
    let mut arg_car: Option<IntervalId> = None;
    for (&(level, k), &s) in &sums {
        let val = (s * to_f64(&pow2(level as i64))).sqrt(); // (S(J)/|J|)^{1/2}
        if val > norm_carleson {
            norm_carleson = val;
            arg_car = Some(IntervalId::new(grid.clone(), level, k));
        }
    }
    let (primary, arg) = match mode {
        BmoMode::Avg => (norm_avg, arg_avg),
        BmoMode::AvgP(_) => (norm_extra, None),
        BmoMode::Carleson => (norm_carleson, arg_car.map(|id| RatInterval::from_id(&id))),
    };
    Ok(BMOReport {
        norm_avg,
        norm_p2,
        norm_carleson,
        primary,
        mode: match mode {
            BmoMode::Avg => "avg".into(),
            BmoMode::AvgP(q) => format!("avgp{q}"),
            BmoMode::Carleson => "carleson".into(),
        },
        argmax_left: arg.as_ref().map(|q| format_rational(&q.left)),
        argmax_len: arg.as_ref().map(|q| format_rational(&q.len)),
    })
}

/// Continuous BMO via averages over the mesh-aligned interval family.
pub fn bmo_continuous(f: &MeshFunction1D) -> Result<BMOReport> {
    let dom = f.domain();
    let n = dom.cell_count();
    let p = f.prefix();
    let vals = f.values();
    let mut norm_avg = 0.0f64;
    let mut norm_p2 = 0.0f64;
    let mut arg: Option<(usize, usize)> = None;
    let mut visit = |start: usize, len: usize| {
        let m = p.sum_wrap(start, len) / len as f64;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for c in start..start + len {
            let d = (vals[c % n] - m).abs();
            s1 += d;
            s2 += d * d;
        }
        let o1 = s1 / len as f64;
        if o1 > norm_avg {
            norm_avg = o1;
            arg = Some((start, len));
        }
        norm_p2 = norm_p2.max((s2 / len as f64).sqrt());
    };
    if dom.is_torus() {
        for start in 0..n {
            for len in 1..n {
                visit(start, len);
            }
            if start == 0 {
                visit(0, n);
            }
        }
    } else {
        for start in 0..n {
            for len in 1..=(n - start) {
                visit(start, len);
            }
        }
    }
    let arg_rat = arg.map(|(s, l)| crate::mesh::AlignedInterval { start: s, len: l }.to_rat(dom));
    Ok(BMOReport {
        norm_avg,
        norm_p2,
        norm_carleson: 0.0,
        primary: norm_avg,
        mode: "avg".into(),
        argmax_left: arg_rat.as_ref().map(|q| format_rational(&q.left)),
        argmax_len: arg_rat.as_ref().map(|q| format_rational(&q.len)),
    })
}

/// Forward BMO inequality (exact, as a family inclusion) plus the monitored
/// reverse ratio: the continuous norm is the supremum over the aligned
/// family together with both grid families.
pub fn verify_bmo_intersection(
    f: &MeshFunction1D,
    delta: &Rational,
    k_cap: f64,
) -> Result<VerificationReport> {
    let dom = f.domain();
    let std = GridSpec::standard(dom);
    let sh = GridSpec::shifted(delta.clone(), dom)?;
    let norm_d = bmo_dyadic(f, &std, BmoMode::Avg)?.norm_avg;
    let norm_s = bmo_dyadic(f, &sh, BmoMode::Avg)?.norm_avg;
    let aligned = bmo_continuous(f)?.norm_avg;
    let star = aligned.max(norm_d).max(norm_s);
    let grid_max = norm_d.max(norm_s);
    // Oscillations below roundoff scale are treated as zero; otherwise
    // near-constant inputs turn the reverse ratio into noise over noise.
    let linf = f.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-12 * linf.max(1e-300);
    if grid_max <= floor && star > 64.0 * floor {
        return Err(Error::Internal(
            "nonconstant function with zero dyadic BMO norms on both grids".into(),
        ));
    }
    let mut rep = VerificationReport::new("bmo-intersection").with_delta(delta);
    rep.constant("bmo_d", norm_d);
    rep.constant("bmo_delta", norm_s);
    rep.constant("bmo_star", star);
    rep.constant("bmo_star_aligned", aligned);
    let k_emp = if star <= floor { 1.0 } else { star / grid_max };
    rep.constant("k_emp", k_emp);
    rep.check_le_exact("forward: max(grid norms) <= continuous", grid_max, star);
    rep.headline("reverse ratio within monitored cap", k_emp, k_cap, 0.0);
    Ok(rep)
}

/// Carleson/average chain checks for one grid at every J:
/// (1/|J|) S(J) <= (p=2 oscillation)^2 on any grid (a Bessel bound), and on
/// grids that resolve the mesh also osc_1(J) <= (Carleson constant)^{1/2}.
pub fn carleson_chain_report(f: &MeshFunction1D, grid: &GridSpec) -> Result<VerificationReport> {
    let p = f.prefix();
    let h = haar_transform(f, grid)?;
    let sums = subtree_sums(&h)?;
    let resolves = h.resolvable_level.is_some();
    let carleson_sq = sums
        .iter()
        .map(|(&(n, _), &s)| s * to_f64(&pow2(n as i64)))
        .fold(0.0f64, f64::max);
    let mut rep = VerificationReport::new("carleson-average-chain");
    rep.constant("carleson_sq", carleson_sq);
    let mut worst_a = f64::NEG_INFINITY;
    let mut worst_a_bound = 0.0;
    let mut worst_b = f64::NEG_INFINITY;
    for (&(level, k), &s) in &sums {
        let id = IntervalId::new(grid.clone(), level, k);
        let q = RatInterval::from_id(&id);
        let lhs = s * to_f64(&pow2(level as i64));
        let o2 = f.oscillation_refined(&q, &p, 2.0)?;
        if lhs - o2 * o2 > worst_a - worst_a_bound {
            worst_a = lhs;
            worst_a_bound = o2 * o2;
        }
        if resolves {
            let o1 = f.oscillation_refined(&q, &p, 1.0)?;
            worst_b = worst_b.max(o1);
        }
    }
    if worst_a > f64::NEG_INFINITY {
        rep.check_le_rel("(1/|J|) S(J) <= osc_2(J)^2", worst_a, worst_a_bound, 1e-9);
    }
    if resolves && worst_b > f64::NEG_INFINITY {
        rep.check_le_rel(
            "osc_1(J) <= Carleson^{1/2}",
            worst_b,
            carleson_sq.sqrt(),
            1e-9,
        );
    }
    Ok(rep)
}

/// P_J f for a standard-grid interval J, realized on the mesh.
pub fn project(f: &MeshFunction1D, j: &IntervalId) -> Result<MeshFunction1D> {
    if j.grid.family != GridFamily::Standard {
        return Err(Error::Unresolvable(
            "projection is defined on the standard grid".into(),
        ));
    }
    let h = haar_transform(f, &j.grid)?;
    let jq = RatInterval::from_id(j);
    let kept: BTreeMap<CoeffKey, f64> = h
        .coeffs
        .into_iter()
        .filter(|&((level, k), _)| {
            let id = IntervalId::new(j.grid.clone(), level, k);
            jq.contains_interval(&RatInterval::from_id(&id))
        })
        .collect();
    synthesize(j.grid.domain, &kept)
}

/// Finite-Haar truncation: keep standard-grid terms with
/// 2^-n <= |I| <= 2^n and I inside B(0, 2^n) (position only binds on the
/// line). Returns the mesh realization of the kept terms.
pub fn vmo_truncation(f: &MeshFunction1D, grid: &GridSpec, n: i32) -> Result<MeshFunction1D> {
    if n < 0 {
        return Err(Error::Config("truncation index must be nonnegative".into()));
    }
    if grid.family != GridFamily::Standard {
        return Err(Error::Unresolvable(
            "finite-Haar truncation synthesizes on the standard grid".into(),
        ));
    }
    let h = haar_transform(f, grid)?;
    let kept = truncate_coeffs(&h, n);
    synthesize(grid.domain, &kept)
}

/// The truncation filter itself, usable on any grid's coefficients.
pub fn truncate_coeffs(h: &HaarCoefficients, n: i32) -> BTreeMap<CoeffKey, f64> {
    let radius = pow2(n as i64);
    h.coeffs
        .iter()
        .filter(|(&(level, k), _)| {
            let scale_ok = level.abs() <= n;
            if !scale_ok {
                return false;
            }
            if h.grid.domain.is_torus() {
                true
            } else {
                let id = IntervalId::new(h.grid.clone(), level, k);
                let q = RatInterval::from_id(&id);
                q.left >= -radius.clone() && q.right() <= radius.clone()
            }
        })
        .map(|(&key, &c)| (key, c))
        .collect()
}

/// Parseval defect ||f||^2 - (coarse terms)^2 - sum of coefficients^2.
/// Zero (to roundoff) for the standard grid; nonnegative for shifted grids.
pub fn parseval_defect(f: &MeshFunction1D, grid: &GridSpec) -> Result<f64> {
    let h = haar_transform(f, grid)?;
    let cell = to_f64(&grid.domain.cell_len());
    let l2_sq: f64 = f.values().iter().map(|v| v * v * cell).sum();
    let coarse = match h.mean {
        Some(m) => m * m,
        None => {
            // Line: energy of the coarsest-level resident averages.
            let p = f.prefix();
            let mut acc = 0.0;
            let level = grid.domain.coarsest_level();
            for k in level_indices_resident(grid, level)? {
                let id = IntervalId::new(grid.clone(), level, k);
                let q = RatInterval::from_id(&id);
                let integral = f.integral_refined(&q, &p)?;
                acc += integral * integral / to_f64(&q.len);
            }
            acc
        }
    };
    let coeff_energy: f64 = h.coeffs.values().map(|c| c * c).sum();
    Ok(l2_sq - coarse - coeff_energy)
}

/// Random finite linear combination of standard-grid Haar functions.
pub fn random_finite_haar(
    rng: &mut impl Rng,
    domain: Domain,
    max_terms: usize,
) -> Result<MeshFunction1D> {
    let grid = GridSpec::standard(domain);
    let mut coeffs: BTreeMap<CoeffKey, f64> = BTreeMap::new();
    let terms = rng.gen_range(1..=max_terms.max(1));
    let levels: Vec<i32> = coeff_levels(domain).collect();
    for _ in 0..terms {
        let level = levels[rng.gen_range(0..levels.len())];
        let ks = level_indices_resident(&grid, level).expect("resident indices");
        let k = &ks[rng.gen_range(0..ks.len())];
        let c = rng.gen_range(-1.0..1.0);
        *coeffs.entry((level, k.to_i64().unwrap())).or_insert(0.0) += c;
    }
    synthesize(domain, &coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn h_unit(domain: Domain) -> MeshFunction1D {
        // h_{[0,1)} = +1 on [0, 1/2), -1 on [1/2, 1).
        let n = domain.cell_count();
        let vals = (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect();
        MeshFunction1D::new(domain, vals).unwrap()
    }

    #[test]
    fn transform_examples() {
        let dom = Domain::torus(3);
        let grid = GridSpec::standard(dom);
        let f = h_unit(dom);
        let h = haar_transform(&f, &grid).unwrap();
        assert!((h.coeffs[&(0, 0)] - 1.0).abs() < 1e-14);
        for (&key, &c) in &h.coeffs {
            if key != (0, 0) {
                assert!(c.abs() < 1e-14, "{key:?}: {c}");
            }
        }
        assert!(h.mean.unwrap().abs() < 1e-14);
        assert_eq!(h.resolvable_level, Some(2));

        let c = MeshFunction1D::constant(dom, 3.25);
        let h = haar_transform(&c, &grid).unwrap();
        assert!(h.coeffs.values().all(|c| c.abs() < 1e-14));
        assert!((h.mean.unwrap() - 3.25).abs() < 1e-14);

        // Indicator of [0, 1/4) at L=2: frozen inner products.
        let dom = Domain::torus(2);
        let f = MeshFunction1D::new(dom, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let h = haar_transform(&f, &GridSpec::standard(dom)).unwrap();
        assert!((h.coeffs[&(0, 0)] - 0.25).abs() < 1e-14);
        assert!((h.coeffs[&(1, 0)] - 0.25 * 2.0f64.sqrt()).abs() < 1e-14);
        assert!(h.coeffs[&(1, 1)].abs() < 1e-14);
        assert!((h.mean.unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn standard_parseval_and_shifted_bessel() {
        let dom = Domain::torus(5);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..20 {
            let vals: Vec<f64> = (0..dom.cell_count())
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let f = MeshFunction1D::new(dom, vals).unwrap();
            let cell = 1.0 / dom.cell_count() as f64;
            let l2: f64 = f.values().iter().map(|v| v * v * cell).sum();
            let d_std = parseval_defect(&f, &GridSpec::standard(dom)).unwrap();
            assert!(d_std.abs() <= 1e-12 * l2.max(1.0), "{d_std}");
            let sh = GridSpec::shifted(ratio(1, 3), dom).unwrap();
            let d_sh = parseval_defect(&f, &sh).unwrap();
            assert!(d_sh >= -1e-12 * l2.max(1.0), "{d_sh}");
        }
    }

    #[test]
    fn bmo_examples() {
        let dom = Domain::torus(3);
        let c = MeshFunction1D::constant(dom, 5.0);
        for grid in [
            GridSpec::standard(dom),
            GridSpec::shifted(ratio(1, 3), dom).unwrap(),
        ] {
            let r = bmo_dyadic(&c, &grid, BmoMode::Avg).unwrap();
            assert!(r.norm_avg.abs() < 1e-14 && r.norm_carleson.abs() < 1e-14);
        }
        let f = h_unit(dom);
        let r = bmo_dyadic(&f, &GridSpec::standard(dom), BmoMode::Avg).unwrap();
        assert!((r.norm_avg - 1.0).abs() < 1e-14);
        assert!((r.norm_carleson - 1.0).abs() < 1e-14);
        assert!(r.norm_avg <= r.norm_p2 + 1e-14);

        let rc = bmo_continuous(&f).unwrap();
        assert!((rc.norm_avg - 1.0).abs() < 1e-14);
        assert_eq!(rc.argmax_left.as_deref(), Some("0"));
        assert_eq!(rc.argmax_len.as_deref(), Some("1"));

        let ind = MeshFunction1D::new(dom, (0..8).map(|i| if i < 4 { 1.0 } else { 0.0 }).collect())
            .unwrap();
        let rc = bmo_continuous(&ind).unwrap();
        assert!((rc.norm_avg - 0.5).abs() < 1e-14);
    }

    #[test]
    fn verify_bmo_examples() {
        let dom = Domain::torus(4);
        let c = MeshFunction1D::constant(dom, 1.0);
        let rep = verify_bmo_intersection(&c, &ratio(1, 3), 64.0).unwrap();
        assert!(rep.pass, "{:?}", rep.checks);
        assert!(rep.constants["bmo_star"] < 1e-13);

        let f = h_unit(dom);
        let rep = verify_bmo_intersection(&f, &ratio(1, 3), 64.0).unwrap();
        assert!(rep.pass, "{:?}", rep.checks);
        // The shifted norm never exceeds the continuous norm.
        assert!(rep.constants["bmo_delta"] <= rep.constants["bmo_star"]);
        assert!((rep.constants["bmo_d"] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn chains_hold_for_random_finite_haar() {
        let dom = Domain::torus(4);
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        for _ in 0..10 {
            let f = random_finite_haar(&mut rng, dom, 6).unwrap();
            for grid in [
                GridSpec::standard(dom),
                GridSpec::shifted(ratio(1, 3), dom).unwrap(),
            ] {
                let rep = carleson_chain_report(&f, &grid).unwrap();
                assert!(rep.pass, "{:?}", rep.checks);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let dom = Domain::torus(3);
        let grid = GridSpec::standard(dom);
        let j = IntervalId::new(grid.clone(), 1, 0);

        let c = MeshFunction1D::constant(dom, 2.0);
        let pj = project(&c, &j).unwrap();
        assert!(pj.values().iter().all(|v| v.abs() < 1e-14));

        // P_J h_J = h_J when J = [0,1).
        let f = h_unit(dom);
        let j0 = IntervalId::new(grid.clone(), 0, 0);
        let pj = project(&f, &j0).unwrap();
        for (a, b) in pj.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }

        // Restricted Parseval: ||P_J f||^2 = sum of (f,h_I)^2 over I in J.
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let vals: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = MeshFunction1D::new(dom, vals).unwrap();
        let pj = project(&f, &j).unwrap();
        let cell = 1.0 / 8.0;
        let l2: f64 = pj.values().iter().map(|v| v * v * cell).sum();
        let h = haar_transform(&f, &grid).unwrap();
        let jq = RatInterval::from_id(&j);
        let sum: f64 = h
            .coeffs
            .iter()
            .filter(|(&(n, k), _)| {
                jq.contains_interval(&RatInterval::from_id(&IntervalId::new(grid.clone(), n, k)))
            })
            .map(|(_, &c)| c * c)
            .sum();
        assert!((l2 - sum).abs() < 1e-12);
    }

    #[test]
    fn truncation_examples() {
        // A term far from the origin is dropped until the window reaches it.
        let dom = Domain::line(3, 2); // window [-8, 8)
        let grid = GridSpec::standard(dom);
        let mut coeffs = BTreeMap::new();
        coeffs.insert((1i32, 13i64), 1.0); // [6.5, 7) at level 1
        let f = synthesize(dom, &coeffs).unwrap();
        for n in 0..=2 {
            let truncated = vmo_truncation(&f, &grid, n).unwrap();
            assert!(fn_zero(&truncated), "n = {n} should drop the far term");
        }
        let f3 = vmo_truncation(&f, &grid, 3).unwrap();
        for (a, b) in f3.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }

        // Torus: everything inside the window once scales allow.
        let t = Domain::torus(3);
        let g = GridSpec::standard(t);
        let f = h_unit(t);
        let f0 = vmo_truncation(&f, &g, 0).unwrap();
        for (a, b) in f0.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    fn fn_zero(f: &MeshFunction1D) -> bool {
        f.values().iter().all(|v| v.abs() < 1e-13)
    }

    #[test]
    fn truncation_carleson_norm_monotone() {
        let dom = Domain::line(2, 3);
        let grid = GridSpec::standard(dom);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..10 {
            let f = random_finite_haar(&mut rng, dom, 8).unwrap();
            let mut prev = f64::INFINITY;
            for n in 0..=(2 + 3) {
                let fname = vmo_truncation(&f, &grid, n).unwrap();
                let diff = MeshFunction1D::new(
                    dom,
                    f.values()
                        .iter()
                        .zip(fname.values())
                        .map(|(a, b)| a - b)
                        .collect(),
                )
                .unwrap();
                let norm = bmo_dyadic(&diff, &grid, BmoMode::Carleson)
                    .unwrap()
                    .norm_carleson;
                assert!(
                    norm <= prev + 1e-12,
                    "norm {norm} rose past {prev} at n={n}"
                );
                prev = norm;
            }
            assert!(prev.abs() < 1e-12, "residual after full window: {prev}");
        }
    }
}
