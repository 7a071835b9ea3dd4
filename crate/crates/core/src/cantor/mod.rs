//! Nested `(a, b, c)`-pattern constructions in `[0, 1)^d` with exact rational
//! geometry, their dimension formula and a box-counting estimator.

mod large_sum;

pub use large_sum::{large_sum_cantor, Certificate, LargeSumCantor, LevelSummary};

use std::collections::HashSet;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn fmt_rational(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `ln` of a big natural number, accurate to a few ulp.
pub fn ln_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 53 {
        return n.to_f64().expect("fits").ln();
    }
    let shift = bits - 53;
    (n >> shift).to_f64().expect("fits").ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln` of a positive rational.
pub fn ln_rational(r: &BigRational) -> f64 {
    let n = r.numer().to_biguint().expect("positive");
    let d = r.denom().to_biguint().expect("positive");
    ln_biguint(&n) - ln_biguint(&d)
}

/// Half-open cube `corner + [0, side)^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CantorBox {
    pub corner: Vec<BigRational>,
    pub side: BigRational,
}

impl CantorBox {
    pub fn unit(d: usize) -> Self {
        Self {
            corner: vec![BigRational::zero(); d],
            side: BigRational::one(),
        }
    }

    pub fn dim(&self) -> usize {
        self.corner.len()
    }

    pub fn contains_box(&self, other: &CantorBox) -> bool {
        self.corner
            .iter()
            .zip(&other.corner)
            .all(|(a, b)| b >= a && b.clone() + &other.side <= a.clone() + &self.side)
    }

    pub fn disjoint(&self, other: &CantorBox) -> bool {
        self.corner.iter().zip(&other.corner).any(|(a, b)| {
            b.clone() >= a.clone() + &self.side || a.clone() >= b.clone() + &other.side
        })
    }

    pub fn center(&self) -> Vec<BigRational> {
        let h = &self.side / BigRational::from_integer(2.into());
        self.corner.iter().map(|c| c + &h).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Placement {
    Corner,
    Centered,
    SeededRandom(u64),
    /// Location supplied by a caller-provided oracle.
    OracleGuided,
}

/// `(a, b, c)`-pattern: one side-`c` box in each side-`b` cell of a side-`a`
/// box. Equalities `a = b` or `b = c` are accepted as degenerate patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSpec {
    pub a: BigRational,
    pub b: BigRational,
    pub c: BigRational,
    pub placement: Placement,
}

impl PatternSpec {
    pub fn new(
        a: BigRational,
        b: BigRational,
        c: BigRational,
        placement: Placement,
    ) -> Result<Self> {
        if !c.is_positive() || c > b || b > a {
            return Err(Error::InvalidPattern(format!(
                "need a >= b >= c > 0, got ({}, {}, {})",
                fmt_rational(&a),
                fmt_rational(&b),
                fmt_rational(&c)
            )));
        }
        if !(&a / &b).is_integer() {
            return Err(Error::InvalidPattern(format!(
                "a/b = {} is not an integer",
                fmt_rational(&(&a / &b))
            )));
        }
        Ok(Self { a, b, c, placement })
    }

    /// `a / b`.
    pub fn cells_per_side(&self) -> u64 {
        (&self.a / &self.b).to_integer().to_u64().expect("small")
    }
}

fn random_stream(parent: &CantorBox) -> u64 {
    let mut h = Sha256::new();
    for c in &parent.corner {
        h.update(fmt_rational(c).as_bytes());
        h.update(b",");
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// The `(a/b)^d` sub-boxes of `parent`, in row-major cell order.
///
/// For [`Placement::OracleGuided`] the oracle receives each cell and returns
/// the sub-box corner.
pub fn make_pattern_with<F>(
    parent: &CantorBox,
    spec: &PatternSpec,
    oracle: F,
) -> Result<Vec<CantorBox>>
where
    F: Fn(&CantorBox) -> Result<Vec<BigRational>>,
{
    if parent.side != spec.a {
        return Err(Error::InvalidPattern(format!(
            "box side {} differs from a = {}",
            fmt_rational(&parent.side),
            fmt_rational(&spec.a)
        )));
    }
    let d = parent.dim();
    let m = spec.cells_per_side();
    let total = m.pow(d as u32);
    let slack = &spec.b - &spec.c;
    let mut rng = match spec.placement {
        Placement::SeededRandom(seed) => {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(random_stream(parent));
            Some(r)
        }
        _ => None,
    };
    let mut out = Vec::with_capacity(total as usize);
    for idx in 0..total {
        let mut rest = idx;
        let mut cell_corner = vec![BigRational::zero(); d];
        for j in (0..d).rev() {
            let i = rest % m;
            rest /= m;
            cell_corner[j] = &parent.corner[j] + &spec.b * BigRational::from_integer(i.into());
        }
        let cell = CantorBox {
            corner: cell_corner,
            side: spec.b.clone(),
        };
        let corner = match spec.placement {
            Placement::Corner => cell.corner.clone(),
            Placement::Centered => {
                let h = &slack / BigRational::from_integer(2.into());
                cell.corner.iter().map(|c| c + &h).collect()
            }
            Placement::SeededRandom(_) => {
                let rng = rng.as_mut().expect("seeded");
                cell.corner
                    .iter()
                    .map(|c| {
                        let u: u32 = rng.gen();
                        c + &slack * BigRational::new(u.into(), (BigInt::one() << 32u32).clone())
                    })
                    .collect()
            }
            Placement::OracleGuided => oracle(&cell)?,
        };
        let sub = CantorBox {
            corner,
            side: spec.c.clone(),
        };
        if !cell.contains_box(&sub) {
            return Err(Error::InvalidPattern("placed box leaves its cell".into()));
        }
        out.push(sub);
    }
    Ok(out)
}

pub fn make_pattern(parent: &CantorBox, spec: &PatternSpec) -> Result<Vec<CantorBox>> {
    make_pattern_with(parent, spec, |_| {
        Err(Error::InvalidPattern(
            "oracle-guided placement needs an oracle".into(),
        ))
    })
}

/// `delta_0 = 1 > ... > delta_K` and `ell_1, ..., ell_K` with
/// `delta_k <= ell_k <= delta_{k-1}` and `delta_{k-1} / ell_k` integral.
#[derive(Clone, Debug, PartialEq)]
pub struct CantorSchedule {
    pub d: usize,
    pub delta: Vec<BigRational>,
    pub ell: Vec<BigRational>,
}

impl CantorSchedule {
    pub fn new(d: usize, delta: Vec<BigRational>, ell: Vec<BigRational>) -> Result<Self> {
        if d == 0 {
            return Err(Error::precondition("dimension must be >= 1"));
        }
        if delta.first() != Some(&BigRational::one()) {
            return Err(Error::InvalidSchedule {
                level: 0,
                reason: "delta_0 must be 1".into(),
            });
        }
        if delta.len() != ell.len() + 1 {
            return Err(Error::InvalidSchedule {
                level: 0,
                reason: "need one ell_k per level".into(),
            });
        }
        for k in 1..delta.len() {
            let (prev, cur, l) = (&delta[k - 1], &delta[k], &ell[k - 1]);
            if !cur.is_positive() || cur > l || l > prev {
                return Err(Error::InvalidSchedule {
                    level: k,
                    reason: format!(
                        "need delta_k <= ell_k <= delta_(k-1), got {} <= {} <= {}",
                        fmt_rational(cur),
                        fmt_rational(l),
                        fmt_rational(prev)
                    ),
                });
            }
            if !(prev / l).is_integer() {
                return Err(Error::InvalidSchedule {
                    level: k,
                    reason: "delta_(k-1) / ell_k is not an integer".into(),
                });
            }
        }
        Ok(Self { d, delta, ell })
    }

    /// `delta_k = r^{-k}`, `ell_k = delta_{k-1} / m`.
    pub fn geometric(d: usize, r: u64, m: u64, depth: usize) -> Result<Self> {
        let delta: Vec<BigRational> = (0..=depth)
            .map(|k| BigRational::new(BigInt::one(), BigInt::from(r).pow(k as u32)))
            .collect();
        let ell = (1..=depth)
            .map(|k| &delta[k - 1] / BigRational::from_integer(m.into()))
            .collect();
        Self::new(d, delta, ell)
    }

    pub fn depth(&self) -> usize {
        self.ell.len()
    }

    /// `q_k = (delta_{k-1} / ell_k)^d` for `k = 1..=K`.
    pub fn q(&self) -> Vec<BigUint> {
        (1..=self.depth())
            .map(|k| {
                let r = (&self.delta[k - 1] / &self.ell[k - 1]).to_integer();
                r.to_biguint().expect("positive").pow(self.d as u32)
            })
            .collect()
    }

    pub fn pattern(&self, k: usize, placement: Placement) -> Result<PatternSpec> {
        PatternSpec::new(
            self.delta[k - 1].clone(),
            self.ell[k - 1].clone(),
            self.delta[k].clone(),
            placement,
        )
    }
}

/// Depth-`k` boxes, with the index of each box's parent one level up.
#[derive(Clone, Debug)]
pub struct BoxCollection {
    pub depth: usize,
    pub boxes: Vec<CantorBox>,
    pub parents: Vec<usize>,
}

impl BoxCollection {
    pub fn from_boxes(depth: usize, boxes: Vec<CantorBox>) -> Self {
        let parents = vec![0; boxes.len()];
        Self {
            depth,
            boxes,
            parents,
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Natural-measure weight `1/|C_k|` carried by each box.
    pub fn weight(&self) -> BigRational {
        BigRational::new(BigInt::one(), BigInt::from(self.boxes.len()))
    }

    pub fn dim(&self) -> usize {
        self.boxes.first().map_or(0, |b| b.dim())
    }
}

/// All levels `C_0, ..., C_K`.
#[derive(Clone, Debug)]
pub struct CantorBuild {
    pub schedule: CantorSchedule,
    pub levels: Vec<BoxCollection>,
}

impl CantorBuild {
    pub fn last(&self) -> &BoxCollection {
        self.levels.last().expect("level 0 always present")
    }
}

/// Expands every parent with the given pattern, in parallel, keeping parent order.
pub(crate) fn expand_level<F>(
    parents: &BoxCollection,
    spec: &PatternSpec,
    oracle: F,
) -> Result<BoxCollection>
where
    F: Fn(&CantorBox) -> Result<Vec<BigRational>> + Sync,
{
    let children: Vec<Vec<CantorBox>> = parents
        .boxes
        .par_iter()
        .map(|b| make_pattern_with(b, spec, &oracle))
        .collect::<Result<_>>()?;
    let mut boxes = Vec::new();
    let mut parent_idx = Vec::new();
    for (i, kids) in children.into_iter().enumerate() {
        parent_idx.extend(std::iter::repeat_n(i, kids.len()));
        boxes.extend(kids);
    }
    Ok(BoxCollection {
        depth: parents.depth + 1,
        boxes,
        parents: parent_idx,
    })
}

pub fn build_cantor(
    schedule: &CantorSchedule,
    depth: usize,
    placement: Placement,
) -> Result<CantorBuild> {
    if depth > schedule.depth() {
        return Err(Error::InvalidSchedule {
            level: schedule.depth() + 1,
            reason: format!("schedule only reaches depth {}", schedule.depth()),
        });
    }
    let mut levels = vec![BoxCollection::from_boxes(
        0,
        vec![CantorBox::unit(schedule.d)],
    )];
    let q = schedule.q();
    let mut expected = BigUint::one();
    for k in 1..=depth {
        let spec = schedule
            .pattern(k, placement)
            .map_err(|e| Error::InvalidSchedule {
                level: k,
                reason: e.to_string(),
            })?;
        let next = expand_level(levels.last().unwrap(), &spec, |_| {
            Err(Error::InvalidPattern(
                "oracle-guided placement needs an oracle".into(),
            ))
        })?;
        expected *= &q[k - 1];
        assert_eq!(
            BigUint::from(next.len()),
            expected,
            "cardinality at depth {k}"
        );
        levels.push(next);
    }
    Ok(CantorBuild {
        schedule: schedule.clone(),
        levels,
    })
}

/// Every child inside its recorded parent, and the children pairwise disjoint.
pub fn audit(build: &CantorBuild) -> bool {
    build.levels.windows(2).all(|w| {
        let (up, down) = (&w[0], &w[1]);
        down.boxes
            .iter()
            .zip(&down.parents)
            .all(|(b, &i)| up.boxes[i].contains_box(b))
            && pairwise_disjoint(&down.boxes)
    })
}

/// Sweep on the first coordinate; exact.
pub fn pairwise_disjoint(boxes: &[CantorBox]) -> bool {
    let mut order: Vec<&CantorBox> = boxes.iter().collect();
    order.sort_by(|a, b| a.corner[0].cmp(&b.corner[0]));
    for (i, a) in order.iter().enumerate() {
        let end = a.corner[0].clone() + &a.side;
        for b in &order[i + 1..] {
            if b.corner[0] >= end {
                break;
            }
            if !a.disjoint(b) {
                return false;
            }
        }
    }
    true
}

/// `ln(prod_{i<=k} q_i) / (-ln delta_k)` for `k = 1..=K`.
pub fn dimension_profile(schedule: &CantorSchedule, k_max: usize) -> Vec<f64> {
    let q = schedule.q();
    let mut prod = BigUint::one();
    (1..=k_max.min(schedule.depth()))
        .map(|k| {
            prod *= &q[k - 1];
            ln_biguint(&prod) / -ln_rational(&schedule.delta[k])
        })
        .collect()
}

/// Minimum of [`dimension_profile`] over `k <= K_max`: a finite-depth
/// stand-in for the liminf.
pub fn dimension_formula(schedule: &CantorSchedule, k_max: usize) -> Result<f64> {
    if k_max < 2 {
        return Err(Error::precondition("K_max must be >= 2"));
    }
    if k_max > schedule.depth() {
        return Err(Error::precondition(format!(
            "schedule only reaches depth {}",
            schedule.depth()
        )));
    }
    Ok(dimension_profile(schedule, k_max)
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

fn cells_range(lo: &BigRational, side: &BigRational, m: u64) -> (u64, u64) {
    let mm = BigRational::from_integer(m.into());
    let start = (lo * &mm).floor().to_integer();
    let end = if side.is_zero() {
        &start + 1
    } else {
        ((lo + side) * &mm).ceil().to_integer()
    };
    let clamp = |v: BigInt| v.to_u64().unwrap_or(0).min(m);
    (clamp(start), clamp(end).max(1))
}

/// `N(1/M)`: grid cells of side `1/M` meeting the union of the boxes.
pub fn grid_count(boxes: &[CantorBox], m: u64) -> usize {
    let mut cells: HashSet<Vec<u64>> = HashSet::new();
    for b in boxes {
        let ranges: Vec<(u64, u64)> = b
            .corner
            .iter()
            .map(|c| cells_range(c, &b.side, m))
            .collect();
        let mut idx: Vec<u64> = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            cells.insert(idx.clone());
            for j in (0..idx.len()).rev() {
                idx[j] += 1;
                if idx[j] < ranges[j].1 {
                    continue 'outer;
                }
                idx[j] = ranges[j].0;
            }
            break;
        }
    }
    cells.len()
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxCountingReport {
    pub scales: Vec<u64>,
    pub counts: Vec<usize>,
    pub slope: f64,
}

/// Least-squares slope of `ln N(1/M)` against `ln M` over grid sizes `M`.
pub fn box_counting_dimension(boxes: &[CantorBox], scales: &[u64]) -> Result<BoxCountingReport> {
    let lo = scales.iter().copied().min().unwrap_or(0);
    let hi = scales.iter().copied().max().unwrap_or(0);
    let distinct: HashSet<_> = scales.iter().collect();
    if distinct.len() < 3 || lo == 0 || hi < 10 * lo {
        return Err(Error::TooFewScales(format!("{scales:?}")));
    }
    let counts: Vec<usize> = scales.iter().map(|&m| grid_count(boxes, m)).collect();
    let xs: Vec<f64> = scales.iter().map(|&m| (m as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(BoxCountingReport {
        scales: scales.to_vec(),
        counts,
        slope: sxy / sxx,
    })
}

/// Exact `floor(r)` of a non-negative rational as `u64`.
pub(crate) fn floor_u64(r: &BigRational) -> Option<u64> {
    r.numer().div_floor(r.denom()).to_u64()
}
