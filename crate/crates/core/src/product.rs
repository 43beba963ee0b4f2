//! Two-parameter machinery over the four grid pairs: tensor Haar analysis,
//! dyadic product BMO over staircase open sets, strong maximal functions
//! (plain and weighted), biparameter weight checks, and the dyadic product
//! H^1 square-function norm.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::ToPrimitive;
use rand::Rng;
use serde::Serialize;

use crate::covering::RatInterval;
use crate::error::{Error, Result};
use crate::exact::{covering_constant, frac_mod_one, int, pow2, to_f64, Rational};
use crate::grids::{level_indices_resident, Domain, GridFamily, GridSpec, IntervalId};
use crate::haar::CoeffKey;
use crate::mesh::{
    covered_cells, AlignedInterval, MeshFunction1D, MeshFunction2D, MeshWeight1D, MeshWeight2D,
    Sat2,
};
use crate::report::VerificationReport;
use crate::weights::{class_constant, Family, PIndex, WeightClass};

/// Hard cap for continuous rectangle scans (cost grows like N^6).
pub const CONTINUOUS_2D_LEVEL_CAP: i32 = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct GridPair {
    pub x: GridSpec,
    pub y: GridSpec,
}

impl GridPair {
    pub fn new(x: GridSpec, y: GridSpec) -> Result<Self> {
        for g in [&x, &y] {
            if matches!(g.family, GridFamily::NaiveShifted(_)) {
                return Err(Error::Config(
                    "product pairs use standard or shifted grids".into(),
                ));
            }
        }
        Ok(GridPair { x, y })
    }

    /// The four pairs dd, d-delta, delta-d, delta-delta.
    pub fn four(delta: &Rational, dx: Domain, dy: Domain) -> Result<[GridPair; 4]> {
        let sx = GridSpec::standard(dx);
        let sy = GridSpec::standard(dy);
        let tx = GridSpec::shifted(delta.clone(), dx)?;
        let ty = GridSpec::shifted(delta.clone(), dy)?;
        Ok([
            GridPair::new(sx.clone(), sy.clone())?,
            GridPair::new(sx, ty.clone())?,
            GridPair::new(tx.clone(), sy)?,
            GridPair::new(tx, ty)?,
        ])
    }

    pub fn tag(&self) -> String {
        format!("{},{}", self.x.family.tag(), self.y.family.tag())
    }
}

// ---------------------------------------------------------------------------
// Per-factor bases: signed Haar cell integrals and plain interval coverage.
// ---------------------------------------------------------------------------

struct HaarItem {
    key: CoeffKey,
    interval: RatInterval,
    /// (cell, integral of h_I over the cell).
    weights: Vec<(usize, f64)>,
}

fn factor_haar(grid: &GridSpec) -> Result<Vec<HaarItem>> {
    let dom = grid.domain;
    let h = to_f64(&dom.cell_len());
    let probe = MeshFunction1D::constant(dom, 0.0);
    let mut items = Vec::new();
    for level in dom.coarsest_level()..=dom.finest_level() - 1 {
        let norm = to_f64(&pow2(level as i64)).sqrt();
        for k in level_indices_resident(grid, level)? {
            let id = IntervalId::new(grid.clone(), level, k.clone());
            let (l, r) = crate::haar::halves(&id);
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            probe.for_each_covered_cell(&l, |c, w| {
                *acc.entry(c).or_insert(0.0) += norm * w * h;
            })?;
            probe.for_each_covered_cell(&r, |c, w| {
                *acc.entry(c).or_insert(0.0) -= norm * w * h;
            })?;
            items.push(HaarItem {
                key: (level, k.to_i64().expect("index fits i64")),
                interval: RatInterval::from_id(&id),
                weights: acc.into_iter().collect(),
            });
        }
    }
    Ok(items)
}

struct CoverItem {
    interval: RatInterval,
    len: f64,
    /// (cell, coverage fraction in cell units).
    weights: Vec<(usize, f64)>,
    /// Cells fully inside the interval.
    contained: Vec<usize>,
}

/// Window-resident intervals of every level with their cell coverage.
fn factor_cover(grid: &GridSpec) -> Result<Vec<Vec<CoverItem>>> {
    let dom = grid.domain;
    let probe = MeshFunction1D::constant(dom, 0.0);
    let mut levels = Vec::new();
    for level in dom.coarsest_level()..=dom.finest_level() {
        let mut items = Vec::new();
        for k in level_indices_resident(grid, level)? {
            let id = IntervalId::new(grid.clone(), level, k);
            let iv = RatInterval::from_id(&id);
            let mut weights = Vec::new();
            probe.for_each_covered_cell(&iv, |c, w| weights.push((c, w)))?;
            let contained = weights
                .iter()
                .filter(|(_, w)| *w == 1.0)
                .map(|(c, _)| *c)
                .collect();
            items.push(CoverItem {
                len: to_f64(&iv.len),
                interval: iv,
                weights,
                contained,
            });
        }
        levels.push(items);
    }
    Ok(levels)
}

// ---------------------------------------------------------------------------
// Tensor Haar transform and Parseval.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct HaarCoefficients2 {
    pub pair: GridPair,
    pub coeffs: BTreeMap<(CoeffKey, CoeffKey), f64>,
}

impl HaarCoefficients2 {
    pub fn energy(&self) -> f64 {
        self.coeffs.values().map(|c| c * c).sum()
    }
}

pub fn haar2_transform(f: &MeshFunction2D, pair: &GridPair) -> Result<HaarCoefficients2> {
    let (dx, dy) = f.domains();
    if pair.x.domain != dx || pair.y.domain != dy {
        return Err(Error::Config("haar2 domain mismatch".into()));
    }
    let bx = factor_haar(&pair.x)?;
    let by = factor_haar(&pair.y)?;
    let ny = f.ny();
    let mut coeffs = BTreeMap::new();
    for ix in &bx {
        // temp[j] = sum_i u_i f(i, j)
        let mut temp = vec![0.0f64; ny];
        for &(i, u) in &ix.weights {
            for (j, t) in temp.iter_mut().enumerate() {
                *t += u * f.get(i, j);
            }
        }
        for jy in &by {
            let c: f64 = jy.weights.iter().map(|&(j, v)| v * temp[j]).sum();
            coeffs.insert((ix.key, jy.key), c);
        }
    }
    Ok(HaarCoefficients2 {
        pair: pair.clone(),
        coeffs,
    })
}

/// ||f||^2 minus the full tensor-basis energy (pure Haar block, the two
/// mixed mean blocks, and the corner mean). Torus x torus only.
pub fn parseval2_defect(f: &MeshFunction2D, pair: &GridPair) -> Result<f64> {
    let (dx, dy) = f.domains();
    if !dx.is_torus() || !dy.is_torus() {
        return Err(Error::Config(
            "2D Parseval check is stated on the torus".into(),
        ));
    }
    let hx = to_f64(&dx.cell_len());
    let hy = to_f64(&dy.cell_len());
    let l2: f64 = f.values().iter().map(|v| v * v * hx * hy).sum();
    let h2 = haar2_transform(f, pair)?;
    let pure = h2.energy();
    // Mixed blocks via the 1D transforms of the integrated marginals.
    let gx = MeshFunction1D::new(
        dx,
        (0..f.nx())
            .map(|i| (0..f.ny()).map(|j| f.get(i, j) * hy).sum())
            .collect(),
    )?;
    let gy = MeshFunction1D::new(
        dy,
        (0..f.ny())
            .map(|j| (0..f.nx()).map(|i| f.get(i, j) * hx).sum())
            .collect(),
    )?;
    let tx = crate::haar::haar_transform(&gx, &pair.x)?;
    let ty = crate::haar::haar_transform(&gy, &pair.y)?;
    let block_x: f64 = tx.coeffs.values().map(|c| c * c).sum();
    let block_y: f64 = ty.coeffs.values().map(|c| c * c).sum();
    let corner = tx.mean.unwrap_or(0.0);
    Ok(l2 - pure - block_x - block_y - corner * corner)
}

/// Mesh realization of standard x standard tensor-Haar coefficients.
pub fn synthesize2(
    dx: Domain,
    dy: Domain,
    terms: &BTreeMap<(CoeffKey, CoeffKey), f64>,
) -> Result<MeshFunction2D> {
    let gx = GridSpec::standard(dx);
    let gy = GridSpec::standard(dy);
    let probe_x = MeshFunction1D::constant(dx, 0.0);
    let probe_y = MeshFunction1D::constant(dy, 0.0);
    let (nx, ny) = (dx.cell_count(), dy.cell_count());
    let mut vals = vec![0.0f64; nx * ny];
    for (&(kx, ky), &c) in terms {
        if c == 0.0 {
            continue;
        }
        let idx = IntervalId::new(gx.clone(), kx.0, kx.1);
        let idy = IntervalId::new(gy.clone(), ky.0, ky.1);
        let ax = to_f64(&pow2(kx.0 as i64)).sqrt();
        let ay = to_f64(&pow2(ky.0 as i64)).sqrt();
        let mut ux: Vec<(usize, f64)> = Vec::new();
        let (lx, rx) = crate::haar::halves(&idx);
        probe_x.for_each_covered_cell(&lx, |cell, _| ux.push((cell, ax)))?;
        probe_x.for_each_covered_cell(&rx, |cell, _| ux.push((cell, -ax)))?;
        let mut uy: Vec<(usize, f64)> = Vec::new();
        let (ly, ry) = crate::haar::halves(&idy);
        probe_y.for_each_covered_cell(&ly, |cell, _| uy.push((cell, ay)))?;
        probe_y.for_each_covered_cell(&ry, |cell, _| uy.push((cell, -ay)))?;
        for &(i, a) in &ux {
            for &(j, b) in &uy {
                vals[i * ny + j] += c * a * b;
            }
        }
    }
    MeshFunction2D::new(dx, dy, vals)
}

pub fn random_finite_product_haar(
    rng: &mut impl Rng,
    dx: Domain,
    dy: Domain,
    max_terms: usize,
) -> Result<MeshFunction2D> {
    let gx = GridSpec::standard(dx);
    let gy = GridSpec::standard(dy);
    let levels_x: Vec<i32> = (dx.coarsest_level()..=dx.finest_level() - 1).collect();
    let levels_y: Vec<i32> = (dy.coarsest_level()..=dy.finest_level() - 1).collect();
    let mut terms: BTreeMap<(CoeffKey, CoeffKey), f64> = BTreeMap::new();
    for _ in 0..rng.gen_range(1..=max_terms.max(1)) {
        let lx = levels_x[rng.gen_range(0..levels_x.len())];
        let ly = levels_y[rng.gen_range(0..levels_y.len())];
        let kxs = level_indices_resident(&gx, lx)?;
        let kys = level_indices_resident(&gy, ly)?;
        let kx = kxs[rng.gen_range(0..kxs.len())].to_i64().unwrap();
        let ky = kys[rng.gen_range(0..kys.len())].to_i64().unwrap();
        *terms.entry(((lx, kx), (ly, ky))).or_insert(0.0) += rng.gen_range(-1.0..1.0);
    }
    synthesize2(dx, dy, &terms)
}

// ---------------------------------------------------------------------------
// Open-set approximations (staircase regions) and product BMO.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct MeshRectangle {
    pub x: AlignedIntervalDef,
    pub y: AlignedIntervalDef,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlignedIntervalDef {
    pub start: usize,
    pub len: usize,
}

/// A finite union of aligned mesh rectangles with exact membership tests.
#[derive(Clone, Debug)]
pub struct OpenSetApprox {
    nx: usize,
    ny: usize,
    mask: Vec<bool>,
    count_prefix: Vec<u32>,
    cell_count: usize,
    pub rects: Vec<MeshRectangle>,
}

impl OpenSetApprox {
    pub fn from_rects(
        dx: Domain,
        dy: Domain,
        rects: &[(AlignedInterval, AlignedInterval)],
    ) -> Result<Self> {
        let (nx, ny) = (dx.cell_count(), dy.cell_count());
        let mut mask = vec![false; nx * ny];
        for (rx, ry) in rects {
            for a in 0..rx.len {
                for b in 0..ry.len {
                    mask[((rx.start + a) % nx) * ny + ((ry.start + b) % ny)] = true;
                }
            }
        }
        Self::from_mask(
            nx,
            ny,
            mask,
            rects
                .iter()
                .map(|(rx, ry)| MeshRectangle {
                    x: AlignedIntervalDef {
                        start: rx.start,
                        len: rx.len,
                    },
                    y: AlignedIntervalDef {
                        start: ry.start,
                        len: ry.len,
                    },
                })
                .collect(),
        )
    }

    fn from_mask(nx: usize, ny: usize, mask: Vec<bool>, rects: Vec<MeshRectangle>) -> Result<Self> {
        let cell_count = mask.iter().filter(|&&b| b).count();
        if cell_count == 0 {
            return Err(Error::Config("open set has measure zero".into()));
        }
        let mut p = vec![0u32; (nx + 1) * (ny + 1)];
        for i in 0..nx {
            for j in 0..ny {
                p[(i + 1) * (ny + 1) + (j + 1)] =
                    mask[i * ny + j] as u32 + p[i * (ny + 1) + (j + 1)] + p[(i + 1) * (ny + 1) + j]
                        - p[i * (ny + 1) + j];
            }
        }
        Ok(OpenSetApprox {
            nx,
            ny,
            mask,
            count_prefix: p,
            cell_count,
            rects,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    pub fn measure(&self, dx: Domain, dy: Domain) -> f64 {
        self.cell_count as f64 * to_f64(&dx.cell_len()) * to_f64(&dy.cell_len())
    }

    fn count_box(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> i64 {
        let at = |i: usize, j: usize| self.count_prefix[i * (self.ny + 1) + j] as i64;
        at(i1, j1) - at(i0, j1) - at(i1, j0) + at(i0, j0)
    }

    /// True when every cell of the (wrapping) span lies inside the set.
    pub fn contains_span(&self, sx: (usize, usize), sy: (usize, usize)) -> bool {
        let mut total = 0i64;
        for (x0, x1) in split(sx, self.nx) {
            for (y0, y1) in split(sy, self.ny) {
                total += self.count_box(x0, x1, y0, y1);
            }
        }
        total == (sx.1 * sy.1) as i64
    }

    pub fn contains_cell(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.ny + j]
    }
}

fn split(span: (usize, usize), n: usize) -> Vec<(usize, usize)> {
    let (start, len) = span;
    let start = start % n;
    if start + len <= n {
        vec![(start, start + len)]
    } else {
        vec![(start, n), (0, start + len - n)]
    }
}

pub fn random_staircase(
    rng: &mut impl Rng,
    dx: Domain,
    dy: Domain,
    max_rects: usize,
) -> OpenSetApprox {
    let (nx, ny) = (dx.cell_count(), dy.cell_count());
    let count = rng.gen_range(1..=max_rects.max(1));
    let rects: Vec<(AlignedInterval, AlignedInterval)> = (0..count)
        .map(|_| {
            let lx = rng.gen_range(1..=nx);
            let ly = rng.gen_range(1..=ny);
            (
                AlignedInterval {
                    start: rng.gen_range(0..nx),
                    len: lx,
                },
                AlignedInterval {
                    start: rng.gen_range(0..ny),
                    len: ly,
                },
            )
        })
        .collect();
    OpenSetApprox::from_rects(dx, dy, &rects).expect("nonempty staircase")
}

/// Aligned cell-closures of all single grid rectangles of the pair (for the
/// dd pair these are the rectangles themselves).
pub fn singleton_omegas(pair: &GridPair) -> Result<Vec<OpenSetApprox>> {
    let (dx, dy) = (pair.x.domain, pair.y.domain);
    let cx = factor_cover(&pair.x)?;
    let cy = factor_cover(&pair.y)?;
    let mut out = Vec::new();
    for lx in &cx {
        for ix in lx {
            let sx = covered_cells(dx, &ix.interval)?;
            for ly in &cy {
                for jy in ly {
                    let sy = covered_cells(dy, &jy.interval)?;
                    out.push(OpenSetApprox::from_rects(
                        dx,
                        dy,
                        &[(
                            AlignedInterval {
                                start: sx.0,
                                len: sx.1,
                            },
                            AlignedInterval {
                                start: sy.0,
                                len: sy.1,
                            },
                        )],
                    )?);
                }
            }
        }
    }
    Ok(out)
}

/// max over the supplied open sets of (1/|Omega|) sum over R inside Omega of
/// (f, h_R)^2. A lower bound for the supremum over all open sets; the
/// supplied family should include (closures of) all single rectangles.
pub fn product_bmo_dyadic(
    f: &MeshFunction2D,
    pair: &GridPair,
    omegas: &[OpenSetApprox],
) -> Result<(f64, Vec<f64>)> {
    if omegas.is_empty() {
        return Err(Error::EmptyOmegaFamily);
    }
    let (dx, dy) = f.domains();
    let h2 = haar2_transform(f, pair)?;
    // Rectangle spans paired with squared coefficients.
    let gx = &pair.x;
    let gy = &pair.y;
    type SpanEntry = ((usize, usize), (usize, usize), f64);
    let entries: Vec<SpanEntry> = h2
        .coeffs
        .iter()
        .map(|(&(kx, ky), &c)| {
            let ix = IntervalId::new(gx.clone(), kx.0, kx.1);
            let jy = IntervalId::new(gy.clone(), ky.0, ky.1);
            let sx = covered_cells(dx, &RatInterval::from_id(&ix))?;
            let sy = covered_cells(dy, &RatInterval::from_id(&jy))?;
            Ok((sx, sy, c * c))
        })
        .collect::<Result<_>>()?;
    let mut per = Vec::with_capacity(omegas.len());
    let mut best = f64::NEG_INFINITY;
    for om in omegas {
        let mut s = 0.0;
        for (sx, sy, cc) in &entries {
            if om.contains_span(*sx, *sy) {
                s += cc;
            }
        }
        let v = s / om.measure(dx, dy);
        per.push(v);
        best = best.max(v);
    }
    Ok((best, per))
}

// ---------------------------------------------------------------------------
// Strong maximal functions.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum StrongFamily {
    Continuous,
    Grid(GridPair),
}

/// Strong maximal function: at every cell, the supremum over rectangles
/// containing the cell of the (omega-)average of |f|.
pub fn strong_maximal(
    f: &MeshFunction2D,
    family: &StrongFamily,
    w: Option<&MeshWeight2D>,
) -> Result<MeshFunction2D> {
    let (dx, dy) = f.domains();
    match family {
        StrongFamily::Continuous => {
            for d in [dx, dy] {
                if d.finest_level() > CONTINUOUS_2D_LEVEL_CAP {
                    return Err(Error::LevelCapExceeded(
                        d.finest_level(),
                        CONTINUOUS_2D_LEVEL_CAP,
                    ));
                }
                if d.finest_level() == CONTINUOUS_2D_LEVEL_CAP {
                    eprintln!(
                        "warning: continuous strong maximal at level {} is expensive",
                        d.finest_level()
                    );
                }
            }
            aligned_strong_maximal(f, w)
        }
        StrongFamily::Grid(pair) => grid_strong_maximal(f, pair, w),
    }
}

fn aligned_strong_maximal(f: &MeshFunction2D, w: Option<&MeshWeight2D>) -> Result<MeshFunction2D> {
    let (dx, dy) = f.domains();
    let (nx, ny) = (f.nx(), f.ny());
    let absf = f.map(f64::abs);
    let (num, den): (Sat2, Option<Sat2>) = match w {
        None => (Sat2::new(&absf, |v| v), None),
        Some(w) => {
            let fw = MeshFunction2D::new(
                dx,
                dy,
                absf.values()
                    .iter()
                    .zip(w.as_fn().values())
                    .map(|(a, b)| a * b)
                    .collect(),
            )?;
            (Sat2::new(&fw, |v| v), Some(Sat2::new(w.as_fn(), |v| v)))
        }
    };
    let mut out = vec![0.0f64; nx * ny];
    let xs = axis_intervals(dx);
    let ys = axis_intervals(dy);
    for &(sx, lx) in &xs {
        for &(sy, ly) in &ys {
            let avg = match &den {
                None => num.box_sum_wrap(sx, lx, sy, ly) / (lx * ly) as f64,
                Some(d) => num.box_sum_wrap(sx, lx, sy, ly) / d.box_sum_wrap(sx, lx, sy, ly),
            };
            for a in 0..lx {
                let i = (sx + a) % nx;
                for b in 0..ly {
                    let j = (sy + b) % ny;
                    let slot = &mut out[i * ny + j];
                    if avg > *slot {
                        *slot = avg;
                    }
                }
            }
        }
    }
    MeshFunction2D::new(dx, dy, out)
}

fn axis_intervals(d: Domain) -> Vec<(usize, usize)> {
    let n = d.cell_count();
    let mut out = Vec::new();
    if d.is_torus() {
        for start in 0..n {
            for len in 1..n {
                out.push((start, len));
            }
            if start == 0 {
                out.push((0, n));
            }
        }
    } else {
        for start in 0..n {
            for len in 1..=(n - start) {
                out.push((start, len));
            }
        }
    }
    out
}

fn grid_strong_maximal(
    f: &MeshFunction2D,
    pair: &GridPair,
    w: Option<&MeshWeight2D>,
) -> Result<MeshFunction2D> {
    let (dx, dy) = f.domains();
    let ny = f.ny();
    let hx = to_f64(&dx.cell_len());
    let hy = to_f64(&dy.cell_len());
    let absf = f.map(f64::abs);
    let cx = factor_cover(&pair.x)?;
    let cy = factor_cover(&pair.y)?;
    let mut out = vec![0.0f64; f.nx() * ny];
    for lx in &cx {
        for ix in lx {
            if ix.contained.is_empty() {
                continue;
            }
            for ly in &cy {
                for jy in ly {
                    if jy.contained.is_empty() {
                        continue;
                    }
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for &(i, wi) in &ix.weights {
                        for &(j, wj) in &jy.weights {
                            let cell_area = wi * wj * hx * hy;
                            match w {
                                None => num += absf.get(i, j) * cell_area,
                                Some(w) => {
                                    num += absf.get(i, j) * w.as_fn().get(i, j) * cell_area;
                                    den += w.as_fn().get(i, j) * cell_area;
                                }
                            }
                        }
                    }
                    let avg = match w {
                        None => num / (ix.len * jy.len),
                        Some(_) => num / den,
                    };
                    for &i in &ix.contained {
                        for &j in &jy.contained {
                            let slot = &mut out[i * ny + j];
                            if avg > *slot {
                                *slot = avg;
                            }
                        }
                    }
                }
            }
        }
    }
    MeshFunction2D::new(dx, dy, out)
}

/// Pointwise comparability of the continuous strong maximal function with
/// the four grid-pair variants (covering-lemma constants; weighted form uses
/// the measured slice-uniform doubling constant).
pub fn verify_strong_maximal_comparability(
    f: &MeshFunction2D,
    delta: &Rational,
    w: Option<&MeshWeight2D>,
) -> Result<VerificationReport> {
    let (dx, dy) = f.domains();
    if !dx.is_torus() || !dy.is_torus() {
        // Per-factor covering intervals can leave a line window, where the
        // grid variants carry no data; the two-sided bounds are asserted on
        // torus factors.
        return Err(Error::Config(
            "strong-maximal comparability is asserted on torus factors".into(),
        ));
    }
    let c = to_f64(&covering_constant(delta)?);
    let pairs = GridPair::four(delta, dx, dy)?;
    let mut variants = Vec::new();
    for p in &pairs {
        variants.push(strong_maximal(f, &StrongFamily::Grid(p.clone()), w)?);
    }
    let aligned = strong_maximal(f, &StrongFamily::Continuous, w)?;
    let mut rep = VerificationReport::new(if w.is_some() {
        "weighted-strong-maximal-comparability"
    } else {
        "strong-maximal-comparability"
    })
    .with_delta(delta);
    rep.constant("C_delta", c);
    let factor = match w {
        None => c * c,
        Some(w) => {
            let c_dy = slice_uniform_doubling(w, delta)?;
            rep.constant("C_dy_slices", c_dy);
            c * c * c_dy.powf(2.0 * (4.0 * c).log2())
        }
    };
    let mut sum_ok = true;
    let mut worst_sum = f64::NEG_INFINITY;
    let mut worst_sum_bound = 0.0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_bound = 0.0;
    for idx in 0..f.values().len() {
        let vals: Vec<f64> = variants.iter().map(|m| m.values()[idx]).collect();
        let m = vals.iter().cloned().fold(aligned.values()[idx], f64::max);
        let sum: f64 = vals.iter().sum();
        sum_ok &= sum <= 4.0 * m;
        if sum - 4.0 * m > worst_sum - worst_sum_bound {
            worst_sum = sum;
            worst_sum_bound = 4.0 * m;
        }
        let bound = match w {
            None => factor * vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Some(_) => factor * sum,
        };
        if m - bound > worst - worst_bound {
            worst = m;
            worst_bound = bound;
        }
    }
    rep.check_le_exact(
        "sum of four variants <= 4 M_s (worst point)",
        worst_sum,
        worst_sum_bound,
    );
    if !sum_ok {
        rep.pass = false;
    }
    let label = if w.is_some() {
        "M_sw <= C^2 C_dy^{2 log2 4C} (sum of four)"
    } else {
        "M_s <= C^2 max(four variants)"
    };
    rep.headline(label, worst, worst_bound, 1e-9);
    Ok(rep)
}

/// Largest 1D dyadic doubling constant over all rows and columns and both
/// grids: the uniform per-slice constant the weighted bounds need.
pub fn slice_uniform_doubling(w: &MeshWeight2D, delta: &Rational) -> Result<f64> {
    let f = w.as_fn();
    let (dx, dy) = f.domains();
    let mut best: f64 = 1.0;
    for j in 0..f.ny() {
        let row = MeshWeight1D::new(dx, f.slice_x(j).values().to_vec())?;
        best = best.max(crate::weights::common_dyadic_doubling(&row, delta)?);
    }
    for i in 0..f.nx() {
        let col = MeshWeight1D::new(dy, f.slice_y(i).values().to_vec())?;
        best = best.max(crate::weights::common_dyadic_doubling(&col, delta)?);
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Biparameter weight constants and the four-pair intersection check.
// ---------------------------------------------------------------------------

struct BiEval<'a> {
    p: PIndex,
    w: &'a MeshFunction2D,
    sat_w: Sat2,
    sat_aux: Option<Sat2>, // sigma, or ln(w) for p = infinity
}

impl<'a> BiEval<'a> {
    fn new(w: &'a MeshWeight2D, p: PIndex) -> Result<Self> {
        if let PIndex::Finite(q) = p {
            if q < 1.0 {
                return Err(Error::ExponentBelowOne(q));
            }
        }
        let f = w.as_fn();
        let sat_w = Sat2::new(f, |v| v);
        let sat_aux = match p {
            PIndex::Finite(q) if q > 1.0 => Some(Sat2::new(f, move |v| v.powf(-1.0 / (q - 1.0)))),
            PIndex::Finite(_) => None,
            PIndex::Infinity => Some(Sat2::new(f, |v| v.ln())),
        };
        Ok(BiEval {
            p,
            w: f,
            sat_w,
            sat_aux,
        })
    }

    fn finish(&self, avg_w: f64, avg_aux: f64, min_w: f64) -> f64 {
        match self.p {
            PIndex::Finite(q) if q > 1.0 => avg_w * avg_aux.powf(q - 1.0),
            PIndex::Finite(_) => avg_w / min_w,
            PIndex::Infinity => avg_w * (-avg_aux).exp(),
        }
    }

    fn aligned(&self, sx: (usize, usize), sy: (usize, usize)) -> f64 {
        let area = (sx.1 * sy.1) as f64;
        let avg_w = self.sat_w.box_sum_wrap(sx.0, sx.1, sy.0, sy.1) / area;
        let avg_aux = self
            .sat_aux
            .as_ref()
            .map(|s| s.box_sum_wrap(sx.0, sx.1, sy.0, sy.1) / area)
            .unwrap_or(0.0);
        let min_w = if matches!(self.p, PIndex::Finite(q) if q == 1.0) {
            let (nx, ny) = (self.w.nx(), self.w.ny());
            let mut m = f64::INFINITY;
            for a in 0..sx.1 {
                for b in 0..sy.1 {
                    m = m.min(self.w.get((sx.0 + a) % nx, (sy.0 + b) % ny));
                }
            }
            m
        } else {
            f64::NAN
        };
        self.finish(avg_w, avg_aux, min_w)
    }

    fn refined(&self, ix: &CoverItem, jy: &CoverItem, hx: f64, hy: f64) -> f64 {
        let area = ix.len * jy.len;
        let mut sw = 0.0;
        let mut sa = 0.0;
        let mut min_w = f64::INFINITY;
        let needs_aux = self.sat_aux.is_some();
        for &(i, wi) in &ix.weights {
            for &(j, wj) in &jy.weights {
                let v = self.w.get(i, j);
                let cell = wi * wj * hx * hy;
                sw += v * cell;
                if needs_aux {
                    sa += match self.p {
                        PIndex::Finite(q) if q > 1.0 => v.powf(-1.0 / (q - 1.0)) * cell,
                        PIndex::Infinity => v.ln() * cell,
                        _ => 0.0,
                    };
                }
                if wi > 0.0 && wj > 0.0 {
                    min_w = min_w.min(v);
                }
            }
        }
        self.finish(sw / area, sa / area, min_w)
    }
}

fn biparameter_aligned(w: &MeshWeight2D, p: PIndex) -> Result<f64> {
    let ev = BiEval::new(w, p)?;
    let (dx, dy) = w.as_fn().domains();
    let mut best = f64::NEG_INFINITY;
    for &sx in &axis_intervals(dx) {
        for &sy in &axis_intervals(dy) {
            best = best.max(ev.aligned(sx, sy));
        }
    }
    Ok(best)
}

fn biparameter_grid(w: &MeshWeight2D, p: PIndex, pair: &GridPair) -> Result<f64> {
    let ev = BiEval::new(w, p)?;
    let (dx, dy) = w.as_fn().domains();
    let hx = to_f64(&dx.cell_len());
    let hy = to_f64(&dy.cell_len());
    let cx = factor_cover(&pair.x)?;
    let cy = factor_cover(&pair.y)?;
    let mut best = f64::NEG_INFINITY;
    for lx in &cx {
        for ix in lx {
            for ly in &cy {
                for jy in ly {
                    best = best.max(ev.refined(ix, jy, hx, hy));
                }
            }
        }
    }
    Ok(best)
}

/// Slice-uniform 1D constants: sup over rows (and columns) of the 1D class
/// constant of the frozen-variable slice.
pub fn slice_uniform_constant(
    w: &MeshWeight2D,
    p: PIndex,
    family: Family,
    delta: Option<&Rational>,
) -> Result<(f64, f64)> {
    let f = w.as_fn();
    let (dx, dy) = f.domains();
    let mut rows: f64 = f64::NEG_INFINITY;
    for j in 0..f.ny() {
        let row = MeshWeight1D::new(dx, f.slice_x(j).values().to_vec())?;
        rows = rows.max(class_constant(&row, WeightClass::Ap(p), family, delta)?.value);
    }
    let mut cols: f64 = f64::NEG_INFINITY;
    for i in 0..f.nx() {
        let col = MeshWeight1D::new(dy, f.slice_y(i).values().to_vec())?;
        cols = cols.max(class_constant(&col, WeightClass::Ap(p), family, delta)?.value);
    }
    Ok((rows, cols))
}

/// Biparameter A_p intersection check: the continuous rectangle constant is
/// controlled by the four grid-pair constants via the iterated one-parameter
/// bound (C(delta)^{2p} for finite p; the infinity endpoint routes through
/// p = 2 as in one parameter).
pub fn product_weight_check(
    w: &MeshWeight2D,
    p: PIndex,
    delta: &Rational,
) -> Result<VerificationReport> {
    let (dx, dy) = w.as_fn().domains();
    let c = to_f64(&covering_constant(delta)?);
    let pairs = GridPair::four(delta, dx, dy)?;
    let aligned = biparameter_aligned(w, p)?;
    let mut grid_vals = Vec::new();
    for pair in &pairs {
        grid_vals.push(biparameter_grid(w, p, pair)?);
    }
    let grid_max = grid_vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let enriched = aligned.max(grid_max);
    let mut rep = VerificationReport::new("product-weight-intersection")
        .with_delta(delta)
        .with_class(WeightClass::Ap(p).tag());
    rep.constant("continuous", enriched);
    rep.constant("continuous_aligned", aligned);
    for (pair, v) in pairs.iter().zip(&grid_vals) {
        rep.constant(format!("pair_{}", pair.tag()), *v);
    }
    let (rows, cols) = slice_uniform_constant(w, p, Family::Continuous, None)?;
    rep.constant("slice_rows_continuous", rows);
    rep.constant("slice_cols_continuous", cols);
    for v in &grid_vals {
        rep.check_le_exact("monotone: grid-pair constant <= continuous", *v, enriched);
    }
    match p {
        PIndex::Finite(q) => {
            rep.headline(
                "biparameter A_p <= C^{2p} max(pairs)",
                enriched,
                c.powf(2.0 * q) * grid_max,
                1e-9,
            );
        }
        PIndex::Infinity => {
            let mut a2 = f64::NEG_INFINITY;
            for pair in &pairs {
                a2 = a2.max(biparameter_grid(w, PIndex::Finite(2.0), pair)?);
            }
            rep.constant("a2_pairs_max", a2);
            rep.headline(
                "biparameter A_inf <= C^4 max(A_2 pairs)",
                enriched,
                c.powi(4) * a2,
                1e-9,
            );
        }
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Dyadic product H^1 norm and the pairing.
// ---------------------------------------------------------------------------

/// || ( sum_R (f,h_R)^2 |R|^{-1} chi_R )^{1/2} ||_1 over the pair's
/// rectangles, evaluated exactly on the refinement of the mesh by the grid
/// endpoints.
pub fn product_h1_dyadic_norm(f: &MeshFunction2D, pair: &GridPair) -> Result<f64> {
    let (dx, dy) = f.domains();
    let h2 = haar2_transform(f, pair)?;
    let segs_x = refined_segments(dx, &pair.x)?;
    let segs_y = refined_segments(dy, &pair.y)?;
    // Per-axis membership lists: which segments lie inside each interval.
    let bx = factor_haar(&pair.x)?;
    let by = factor_haar(&pair.y)?;
    let memb =
        |items: &[HaarItem], segs: &[(Rational, Rational)]| -> BTreeMap<CoeffKey, Vec<usize>> {
            items
                .iter()
                .map(|it| {
                    let inside = segs
                        .iter()
                        .enumerate()
                        .filter(|(_, (mid, _))| it.interval.contains_point(mid))
                        .map(|(s, _)| s)
                        .collect();
                    (it.key, inside)
                })
                .collect()
        };
    let mx = memb(&bx, &segs_x);
    let my = memb(&by, &segs_y);
    let mut s = vec![0.0f64; segs_x.len() * segs_y.len()];
    for (&(kx, ky), &c) in &h2.coeffs {
        if c == 0.0 {
            continue;
        }
        let lenx = to_f64(&pow2(-(kx.0 as i64)));
        let leny = to_f64(&pow2(-(ky.0 as i64)));
        let add = c * c / (lenx * leny);
        for &sx in &mx[&kx] {
            for &sy in &my[&ky] {
                s[sx * segs_y.len() + sy] += add;
            }
        }
    }
    let mut norm = 0.0;
    for (ix, (_, lx)) in segs_x.iter().enumerate() {
        for (iy, (_, ly)) in segs_y.iter().enumerate() {
            let v = s[ix * segs_y.len() + iy];
            if v > 0.0 {
                norm += v.sqrt() * to_f64(lx) * to_f64(ly);
            }
        }
    }
    Ok(norm)
}

/// Refinement of the mesh by all grid-interval endpoints on one axis;
/// returns (midpoint, length) per refined segment.
fn refined_segments(d: Domain, grid: &GridSpec) -> Result<Vec<(Rational, Rational)>> {
    let mut cuts: BTreeSet<Rational> = BTreeSet::new();
    let (lo, hi) = d.window();
    for c in 0..d.cell_count() {
        cuts.insert(d.cell_left(c));
    }
    for level in d.coarsest_level()..=d.finest_level() {
        for k in level_indices_resident(grid, level)? {
            let id = IntervalId::new(grid.clone(), level, k);
            let iv = RatInterval::from_id(&id);
            for e in [iv.left.clone(), iv.right()] {
                let e = if d.is_torus() { frac_mod_one(&e) } else { e };
                if e >= lo && e < hi {
                    cuts.insert(e);
                }
            }
        }
    }
    let cuts: Vec<Rational> = cuts.into_iter().collect();
    let mut segs = Vec::with_capacity(cuts.len());
    for (i, c) in cuts.iter().enumerate() {
        let next = if i + 1 < cuts.len() {
            cuts[i + 1].clone()
        } else {
            hi.clone()
        };
        let len = next.clone() - c.clone();
        let mid = c.clone() + len.clone() / int(2);
        segs.push((mid, len));
    }
    Ok(segs)
}

/// Two-parameter finite-Haar truncation on the standard pair: keep tensor
/// terms whose rectangles satisfy 2^-n <= |R| <= 2^n and (on line factors)
/// sit inside B(0, 2^n) per factor.
pub fn vmo_truncation2(f: &MeshFunction2D, n: i32) -> Result<MeshFunction2D> {
    if n < 0 {
        return Err(Error::Config("truncation index must be nonnegative".into()));
    }
    let (dx, dy) = f.domains();
    let pair = GridPair::new(GridSpec::standard(dx), GridSpec::standard(dy))?;
    let h2 = haar2_transform(f, &pair)?;
    let radius = pow2(n as i64);
    let keep = |d: Domain, grid: &GridSpec, key: CoeffKey| -> bool {
        if d.is_torus() {
            return true;
        }
        let id = IntervalId::new(grid.clone(), key.0, key.1);
        let q = RatInterval::from_id(&id);
        q.left >= -radius.clone() && q.right() <= radius.clone()
    };
    let kept: BTreeMap<(CoeffKey, CoeffKey), f64> = h2
        .coeffs
        .into_iter()
        .filter(|&((kx, ky), _)| {
            let area_scale = -(kx.0 as i64) - ky.0 as i64; // log2 |R|
            area_scale.abs() <= n as i64 && keep(dx, &pair.x, kx) && keep(dy, &pair.y, ky)
        })
        .collect();
    synthesize2(dx, dy, &kept)
}

/// <f, g> = integral of f g over the product domain (exact on the mesh).
pub fn pairing(f: &MeshFunction2D, g: &MeshFunction2D) -> f64 {
    let (dx, dy) = f.domains();
    let cell = to_f64(&dx.cell_len()) * to_f64(&dy.cell_len());
    f.values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| a * b * cell)
        .sum()
}

/// Carleson-form dyadic product BMO constant over the singleton family
/// (used as the BMO side of the monitored duality bound).
pub fn product_bmo_singleton_constant(f: &MeshFunction2D, pair: &GridPair) -> Result<f64> {
    let omegas = singleton_omegas(pair)?;
    let (v, _) = product_bmo_dyadic(f, pair, &omegas)?;
    Ok(v)
}
