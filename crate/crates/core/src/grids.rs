//! Dyadic grids: the standard grid, the shifted grid with scale-dependent
//! extra translations at large scales, and the naive shifted grid.
//!
//! Level-n intervals have length 2^-n; left endpoints are k * 2^-n plus the
//! grid shift. On the circle only levels n >= 0 exist and arcs may wrap; on
//! the line the shifted grid picks up the extra translation s_n at negative
//! levels so coverings exist at all scales.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{
    ceil_big, floor_big, format_rational, frac_mod_one, int, pow2, relative_distance, Dyadic,
    Rational,
};

/// The sampled domain: the circle T = [0,1) at mesh 2^-L, or the line window
/// [-2^M, 2^M) with levels -M..=L.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Torus {
        #[serde(rename = "L")]
        finest_level: i32,
    },
    Line {
        #[serde(rename = "M")]
        window_exponent: i32,
        #[serde(rename = "L")]
        finest_level: i32,
    },
}

impl Domain {
    pub fn torus(finest_level: i32) -> Self {
        assert!(finest_level >= 1, "torus needs L >= 1");
        Domain::Torus { finest_level }
    }

    pub fn line(window_exponent: i32, finest_level: i32) -> Self {
        assert!(
            window_exponent >= 0 && finest_level >= 1,
            "line needs M >= 0, L >= 1"
        );
        Domain::Line {
            window_exponent,
            finest_level,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, Domain::Torus { .. })
    }

    pub fn finest_level(&self) -> i32 {
        match self {
            Domain::Torus { finest_level } | Domain::Line { finest_level, .. } => *finest_level,
        }
    }

    pub fn coarsest_level(&self) -> i32 {
        match self {
            Domain::Torus { .. } => 0,
            Domain::Line {
                window_exponent, ..
            } => -window_exponent,
        }
    }

    /// Mesh cell length 2^-L.
    pub fn cell_len(&self) -> Rational {
        pow2(-(self.finest_level() as i64))
    }

    pub fn cell_count(&self) -> usize {
        match self {
            Domain::Torus { finest_level } => 1usize << finest_level,
            Domain::Line {
                window_exponent,
                finest_level,
            } => 1usize << (window_exponent + finest_level + 1),
        }
    }

    /// Window [lo, hi): [0,1) on the torus, [-2^M, 2^M) on the line.
    pub fn window(&self) -> (Rational, Rational) {
        match self {
            Domain::Torus { .. } => (int(0), int(1)),
            Domain::Line {
                window_exponent, ..
            } => (
                -pow2(*window_exponent as i64),
                pow2(*window_exponent as i64),
            ),
        }
    }

    pub fn total_len(&self) -> Rational {
        let (lo, hi) = self.window();
        hi - lo
    }

    pub fn contains_point(&self, x: &Rational) -> bool {
        match self {
            Domain::Torus { .. } => true, // reduced mod 1
            Domain::Line { .. } => {
                let (lo, hi) = self.window();
                *x >= lo && *x < hi
            }
        }
    }

    pub fn check_level(&self, level: i32) -> Result<()> {
        let min = self.coarsest_level();
        let max = self.finest_level();
        // Levels finer than the mesh are geometrically meaningful; only levels
        // coarser than the domain supports are rejected.
        if level < min {
            return Err(Error::LevelOutOfRange { level, min, max });
        }
        Ok(())
    }

    /// Left endpoint of mesh cell `i`.
    pub fn cell_left(&self, i: usize) -> Rational {
        let (lo, _) = self.window();
        lo + int(i as i64) * self.cell_len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GridFamily {
    Standard,
    Shifted(Rational),
    NaiveShifted(Rational),
}

impl GridFamily {
    pub fn delta(&self) -> Option<&Rational> {
        match self {
            GridFamily::Standard => None,
            GridFamily::Shifted(d) | GridFamily::NaiveShifted(d) => Some(d),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            GridFamily::Standard => "std",
            GridFamily::Shifted(_) => "delta",
            GridFamily::NaiveShifted(_) => "naive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    pub family: GridFamily,
    pub domain: Domain,
}

impl GridSpec {
    pub fn standard(domain: Domain) -> Self {
        GridSpec {
            family: GridFamily::Standard,
            domain,
        }
    }

    pub fn shifted(delta: Rational, domain: Domain) -> Result<Self> {
        check_admissible(&delta)?;
        Ok(GridSpec {
            family: GridFamily::Shifted(delta),
            domain,
        })
    }

    /// For callers that validated the shift already.
    pub(crate) fn shifted_unchecked(delta: Rational, domain: Domain) -> Self {
        GridSpec {
            family: GridFamily::Shifted(delta),
            domain,
        }
    }

    pub fn naive_shifted(delta: Rational, domain: Domain) -> Result<Self> {
        check_admissible(&delta)?;
        Ok(GridSpec {
            family: GridFamily::NaiveShifted(delta),
            domain,
        })
    }

    /// Total translation of the level-n endpoint lattice relative to k * 2^-n.
    pub fn shift_at(&self, level: i32) -> Rational {
        match &self.family {
            GridFamily::Standard => int(0),
            GridFamily::NaiveShifted(d) => d.clone(),
            GridFamily::Shifted(d) => {
                if self.domain.is_torus() {
                    d.clone()
                } else {
                    d.clone() + level_shift(level)
                }
            }
        }
    }
}

fn check_admissible(delta: &Rational) -> Result<()> {
    let d = relative_distance(delta)?;
    if d.is_zero() {
        return Err(Error::DyadicDelta(format_rational(delta)));
    }
    Ok(())
}

/// A level-n interval of a grid: [left, left + 2^-n) with
/// left = shift_at(n) + k * 2^-n (reduced mod 1 on the torus).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalId {
    pub grid: GridSpec,
    pub level: i32,
    pub index: BigInt,
}

impl IntervalId {
    pub fn new(grid: GridSpec, level: i32, index: impl Into<BigInt>) -> Self {
        IntervalId {
            grid,
            level,
            index: index.into(),
        }
    }

    pub fn left(&self) -> Rational {
        let raw = self.grid.shift_at(self.level)
            + Rational::from_integer(self.index.clone()) * pow2(-(self.level as i64));
        if self.grid.domain.is_torus() {
            frac_mod_one(&raw)
        } else {
            raw
        }
    }

    pub fn len(&self) -> Rational {
        pow2(-(self.level as i64))
    }
}

impl Serialize for IntervalId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("IntervalId", 4)?;
        st.serialize_field("grid", self.grid.family.tag())?;
        st.serialize_field("delta", &self.grid.family.delta().map(format_rational))?;
        st.serialize_field("n", &self.level)?;
        st.serialize_field("k", &self.index.to_string())?;
        st.end()
    }
}

/// The extra large-scale translation s_n of the shifted grid on the line:
/// 0 for n >= 0, and sum of 2^-2j over j = ceil(n/2)+1 ..= 0 for n < 0,
/// which closes to (2^m - 1)/3 with m = |n| rounded up to an even integer.
pub fn level_shift(level: i32) -> Rational {
    if level >= 0 {
        return int(0);
    }
    let m = (-level) as i64;
    let m_even = if m % 2 == 0 { m } else { m + 1 };
    Rational::from_integer((pow2(m_even).to_integer() - BigInt::one()) / BigInt::from(3))
}

/// Exact endpoints of a grid interval. Torus arcs may wrap past 1.
pub fn interval(id: &IntervalId) -> Result<(Rational, Dyadic)> {
    id.grid.domain.check_level(id.level)?;
    if id.grid.domain.is_torus() {
        let n = id.level;
        if id.index.is_negative() || id.index >= (BigInt::one() << n.max(0) as usize) {
            return Err(Error::Internal(format!(
                "torus index {} out of range at level {n}",
                id.index
            )));
        }
    }
    Ok((id.left(), Dyadic::interval_length(id.level)))
}

/// The unique level-n interval of `grid` containing x.
pub fn locate(grid: &GridSpec, level: i32, x: &Rational) -> Result<IntervalId> {
    grid.domain.check_level(level)?;
    if !grid.domain.contains_point(x) {
        return Err(Error::OutsideDomain(format_rational(x)));
    }
    let shift = grid.shift_at(level);
    let scale = pow2(level as i64); // 1 / interval length
    let k = if grid.domain.is_torus() {
        let rel = frac_mod_one(&(x - shift));
        floor_big(&(rel * scale))
    } else {
        floor_big(&((x - shift) * scale))
    };
    Ok(IntervalId::new(grid.clone(), level, k))
}

/// Indices of all level-n intervals meeting the domain window.
pub fn level_indices_intersecting(grid: &GridSpec, level: i32) -> Result<Vec<BigInt>> {
    grid.domain.check_level(level)?;
    if grid.domain.is_torus() {
        let count = BigInt::one() << level.max(0) as usize;
        let mut out = Vec::new();
        let mut k = BigInt::zero();
        while k < count {
            out.push(k.clone());
            k += 1;
        }
        return Ok(out);
    }
    let (lo, hi) = grid.domain.window();
    let shift = grid.shift_at(level);
    let scale = pow2(level as i64);
    // Smallest k whose interval reaches past lo; largest k starting before hi.
    let k_lo = floor_big(&((lo - &shift) * scale.clone()));
    let hi_scaled = (hi - &shift) * scale;
    let mut k_hi = ceil_big(&hi_scaled) - BigInt::one();
    if Rational::from_integer(k_hi.clone()) == hi_scaled {
        k_hi -= 1;
    }
    let mut out = Vec::new();
    let mut k = k_lo;
    while k <= k_hi {
        out.push(k.clone());
        k += 1;
    }
    Ok(out)
}

/// Indices of level-n intervals contained in the domain window.
pub fn level_indices_resident(grid: &GridSpec, level: i32) -> Result<Vec<BigInt>> {
    if grid.domain.is_torus() {
        return level_indices_intersecting(grid, level);
    }
    let (lo, hi) = grid.domain.window();
    let len = pow2(-(level as i64));
    Ok(level_indices_intersecting(grid, level)?
        .into_iter()
        .filter(|k| {
            let left =
                grid.shift_at(level) + Rational::from_integer(k.clone()) * pow2(-(level as i64));
            left >= lo && left.clone() + len.clone() <= hi
        })
        .collect())
}

/// Left endpoints of the level-n intervals of each grid, within the domain.
pub fn endpoint_sets(
    g1: &GridSpec,
    g2: &GridSpec,
    level: i32,
) -> Result<(Vec<Rational>, Vec<Rational>)> {
    if g1.domain != g2.domain {
        return Err(Error::Config(
            "endpoint_sets needs grids on one domain".into(),
        ));
    }
    let one = endpoints_of(g1, level)?;
    let two = endpoints_of(g2, level)?;
    Ok((one, two))
}

fn endpoints_of(grid: &GridSpec, level: i32) -> Result<Vec<Rational>> {
    let (lo, hi) = grid.domain.window();
    let mut pts: Vec<Rational> = level_indices_intersecting(grid, level)?
        .into_iter()
        .map(|k| IntervalId::new(grid.clone(), level, k).left())
        .filter(|p| *p >= lo && *p < hi)
        .collect();
    pts.sort();
    Ok(pts)
}

/// Exact minimum gap between distinct points of A_n union A_n^delta on the
/// full line (the window-free infimum; the sets are 2^-n periodic).
pub fn min_endpoint_gap(delta: &Rational, level: i32) -> Result<Rational> {
    check_admissible(delta)?;
    let len = pow2(-(level as i64));
    let shift = delta.clone() + level_shift(level);
    // Offset of the shifted lattice relative to the standard one, mod 2^-n.
    let t = shift.clone() - Rational::from_integer(floor_big(&(shift / &len))) * len.clone();
    let cross = t.clone().min(len.clone() - t);
    Ok(cross.min(len))
}

/// The level-(n-1) interval of the same grid containing `id`.
pub fn parent(id: &IntervalId) -> Result<IntervalId> {
    locate(&id.grid, id.level - 1, &midpoint(id))
}

fn midpoint(id: &IntervalId) -> Rational {
    let m = id.left() + id.len() / int(2);
    if id.grid.domain.is_torus() {
        frac_mod_one(&m)
    } else {
        m
    }
}

/// The two level-(n+1) intervals of the same grid inside `id`.
pub fn children(id: &IntervalId) -> Result<(IntervalId, IntervalId)> {
    let left_child = locate(&id.grid, id.level + 1, &{
        let l = id.left();
        if id.grid.domain.is_torus() {
            frac_mod_one(&l)
        } else {
            l
        }
    })?;
    let right_point = id.left() + id.len() / int(2);
    let right_point = if id.grid.domain.is_torus() {
        frac_mod_one(&right_point)
    } else {
        right_point
    };
    let right_child = locate(&id.grid, id.level + 1, &right_point)?;
    Ok((left_child, right_child))
}
