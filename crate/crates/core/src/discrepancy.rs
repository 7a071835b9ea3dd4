//! Unnormalized discrepancy of finite sequences mod 1 over open intervals,
//! star discrepancy, and the Koksma comparison with Weyl sums.
//!
//! Points are [`Phase`] values, so every quantity below is an exact integer
//! in units of `2^-64`; conversion to `f64` happens only on output.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::{e_eval, ComplexAcc, Phase};
use crate::weyl::{checkpoint_grid, phase_sequence, ExponentVector, TorusPoint};

const ONE: i128 = 1 << 64;

fn units_to_f64(v: i128) -> f64 {
    v as f64 / ONE as f64
}

/// Sorted points `y_1 <= ... <= y_N` of `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet1D {
    points: Vec<Phase>,
}

impl PointSet1D {
    pub fn new(mut points: Vec<Phase>) -> Self {
        points.sort_unstable();
        Self { points }
    }

    pub fn from_f64(points: &[f64]) -> Self {
        Self::new(points.iter().map(|&t| Phase::from_f64(t)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Phase] {
        &self.points
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.to_f64()).collect()
    }

    /// The multiset union with itself.
    pub fn doubled(&self) -> Self {
        let mut v = self.points.clone();
        v.extend_from_slice(&self.points);
        Self::new(v)
    }
}

/// Fractional parts of `x_1 n^{m_1} + ... + x_d n^{m_d}`, `n = 1..=N`, sorted.
pub fn poly_sequence(x: &TorusPoint, n: u64, m: &ExponentVector) -> Result<PointSet1D> {
    if n == 0 {
        return Err(Error::precondition("N must be >= 1"));
    }
    Ok(PointSet1D::new(phase_sequence(x, m, n)?))
}

/// Distinct values with `C(v) = #{y <= v}` and `C(v^-) = #{y < v}`.
fn runs(points: &[Phase]) -> Vec<(i128, i128, i128)> {
    let mut out: Vec<(i128, i128, i128)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let v = p.0 as i128;
        match out.last_mut() {
            Some(last) if last.0 == v => last.2 = i as i128 + 1,
            _ => out.push((v, i as i128, i as i128 + 1)),
        }
    }
    out
}

/// `D_N` in units of `2^-64`.
pub fn discrepancy_units(s: &PointSet1D) -> Result<i128> {
    let n = s.len() as i128;
    if n == 0 {
        return Err(Error::precondition("N must be >= 1"));
    }
    let runs = runs(&s.points);

    // excess: sup over blocks y_i..y_j (y_i > 0) of count - N (y_j - y_i),
    // approached by (y_i^-, y_j^+)
    let mut excess = 0i128;
    let mut best_left = i128::MIN; // max over v <= w of N v - C(v^-)
    for &(v, below, upto) in &runs {
        if v == 0 {
            continue;
        }
        best_left = best_left.max(n * v - ONE * below);
        excess = excess.max(ONE * upto - n * v + best_left);
    }

    // deficit: endpoints a < b in {0} u {y_i} u {1}, open interval (a, b)
    let mut candidates: Vec<(i128, i128, i128)> = Vec::with_capacity(runs.len() + 2);
    if runs.first().is_none_or(|r| r.0 != 0) {
        candidates.push((0, 0, 0));
    }
    candidates.extend(runs.iter().copied());
    candidates.push((ONE, n, n));
    let mut deficit = 0i128;
    let mut best_a = i128::MIN; // max over a of C(a) - N a
    for &(v, below, upto) in &candidates {
        if best_a != i128::MIN {
            deficit = deficit.max(n * v - ONE * below + best_a);
        }
        best_a = best_a.max(ONE * upto - n * v);
    }
    Ok(excess.max(deficit))
}

/// `D_N = sup_{0 <= a < b <= 1} |#{y_n in (a, b)} - (b - a) N|`.
pub fn discrepancy_exact(s: &PointSet1D) -> Result<f64> {
    discrepancy_units(s).map(units_to_f64)
}

/// `D*_N = N sup_t |#{y < t}/N - t|` in units of `2^-64`.
pub fn star_discrepancy_units(s: &PointSet1D) -> Result<i128> {
    let n = s.len() as i128;
    if n == 0 {
        return Err(Error::precondition("N must be >= 1"));
    }
    Ok(s.points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (i, y) = (i as i128 + 1, p.0 as i128);
            (ONE * i - n * y).max(n * y - ONE * (i - 1))
        })
        .max()
        .unwrap())
}

pub fn star_discrepancy(s: &PointSet1D) -> Result<f64> {
    star_discrepancy_units(s).map(units_to_f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct KoksmaReport {
    pub n: u64,
    pub sum_abs: f64,
    pub star_discrepancy: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

/// `|S_m(x; N)| <= 2 pi D*_N`, with the sum taken over the same phases.
pub fn koksma_relation_check(x: &TorusPoint, n: u64, m: &ExponentVector) -> Result<KoksmaReport> {
    if n == 0 {
        return Err(Error::precondition("N must be >= 1"));
    }
    let phases = phase_sequence(x, m, n)?;
    let sum_abs = phases
        .iter()
        .map(|&t| e_eval(t))
        .collect::<ComplexAcc>()
        .value()
        .norm();
    let star = star_discrepancy(&PointSet1D::new(phases))?;
    let bound = TAU * star;
    Ok(KoksmaReport {
        n,
        sum_abs,
        star_discrepancy: star,
        bound,
        ratio: if star > 0.0 { sum_abs / star } else { 0.0 },
        pass: sum_abs <= bound + 1e-6,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyRow {
    pub n: u64,
    pub discrepancy: f64,
    pub star_discrepancy: f64,
    pub sum_abs: f64,
    pub ratio: f64,
}

/// `D_N`, `D*_N`, `|S|` and `|S| / D*_N` at each checkpoint, from a single
/// phase sequence.
pub fn discrepancy_rows(
    x: &TorusPoint,
    m: &ExponentVector,
    checkpoints: &[u64],
) -> Result<Vec<DiscrepancyRow>> {
    if checkpoints.is_empty() || checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::precondition(
            "checkpoints must be positive and strictly increasing",
        ));
    }
    let phases = phase_sequence(x, m, *checkpoints.last().unwrap())?;
    // prefix sums in a single ordered pass
    let mut sums = Vec::with_capacity(checkpoints.len());
    let mut acc = ComplexAcc::new();
    let mut next = checkpoints.iter().peekable();
    for (k, &t) in phases.iter().enumerate() {
        acc.add(e_eval(t));
        if next.peek() == Some(&&(k as u64 + 1)) {
            next.next();
            sums.push(acc.value().norm());
        }
    }
    checkpoints
        .par_iter()
        .zip(sums)
        .map(|(&n, sum_abs)| {
            let s = PointSet1D::new(phases[..n as usize].to_vec());
            let d = discrepancy_exact(&s)?;
            let ds = star_discrepancy(&s)?;
            Ok(DiscrepancyRow {
                n,
                discrepancy: d,
                star_discrepancy: ds,
                sum_abs,
                ratio: if ds > 0.0 { sum_abs / ds } else { 0.0 },
            })
        })
        .collect()
}

/// Checkpoints `N <= N_max` with `D_N >= N^alpha`.
pub fn discrepancy_scan(
    x: &TorusPoint,
    alpha: f64,
    m: &ExponentVector,
    n_max: u64,
) -> Result<Vec<u64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::precondition(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    if n_max == 0 {
        return Err(Error::precondition("N_max must be >= 1"));
    }
    let rows = discrepancy_rows(x, m, &checkpoint_grid(n_max))?;
    Ok(rows
        .into_iter()
        .filter(|r| r.discrepancy >= (r.n as f64).powf(alpha))
        .map(|r| r.n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Endpoint enumeration with the four one-sided variants at each pair.
    fn brute_force(points: &[Phase]) -> i128 {
        let n = points.len() as i128;
        let mut ends: Vec<i128> = points.iter().map(|p| p.0 as i128).collect();
        ends.push(0);
        ends.push(ONE);
        ends.sort();
        ends.dedup();
        let mut best = 0i128;
        for (i, &a) in ends.iter().enumerate() {
            for &b in &ends[i..] {
                for a_incl in [false, true] {
                    for b_incl in [false, true] {
                        if (a_incl && a == 0) || (b_incl && b == ONE) {
                            continue;
                        }
                        if a == b && !(a_incl && b_incl) {
                            continue;
                        }
                        let count = points
                            .iter()
                            .filter(|p| {
                                let y = p.0 as i128;
                                (y > a || (a_incl && y == a)) && (y < b || (b_incl && y == b))
                            })
                            .count() as i128;
                        best = best.max((ONE * count - n * (b - a)).abs());
                    }
                }
            }
        }
        best
    }

    fn star_brute(points: &[Phase]) -> f64 {
        // t on the sample points and their right limits
        let n = points.len() as f64;
        let mut best = 0.0f64;
        for p in points {
            let t = p.to_f64();
            let below = points.iter().filter(|q| q.0 < p.0).count() as f64;
            let upto = points.iter().filter(|q| q.0 <= p.0).count() as f64;
            best = best.max((below - n * t).abs()).max((upto - n * t).abs());
        }
        best.max((n - n * 1.0f64).abs())
    }

    #[test]
    fn sequence_examples() {
        let z = poly_sequence(&TorusPoint::zero(1), 4, &ExponentVector::standard(1)).unwrap();
        assert!(z.points().iter().all(|p| p.0 == 0));
        let half = TorusPoint::rational(&[1], 2).unwrap();
        let s = poly_sequence(&half, 4, &ExponentVector::standard(1)).unwrap();
        assert_eq!(s.to_f64(), vec![0.0, 0.0, 0.5, 0.5]);
        let x = TorusPoint::rational(&[0, 1], 3).unwrap();
        let s = poly_sequence(&x, 3, &ExponentVector::standard(2)).unwrap();
        let third = crate::phase::phase_of_residue(1, 3);
        assert_eq!(s.points(), &[Phase::ZERO, third, third]);
    }

    #[test]
    fn discrepancy_examples() {
        let zeros = PointSet1D::new(vec![Phase::ZERO; 4]);
        assert_eq!(discrepancy_exact(&zeros).unwrap(), 4.0);
        assert_eq!(star_discrepancy(&zeros).unwrap(), 4.0);
        let single = PointSet1D::from_f64(&[0.5]);
        assert_eq!(discrepancy_exact(&single).unwrap(), 1.0);
        assert_eq!(star_discrepancy(&single).unwrap(), 0.5);
        let eq = PointSet1D::from_f64(&[1.0 / 8.0, 3.0 / 8.0, 5.0 / 8.0, 7.0 / 8.0]);
        assert_eq!(discrepancy_exact(&eq).unwrap(), 1.0);
        assert_eq!(star_discrepancy(&eq).unwrap(), 0.5);
        assert!(discrepancy_exact(&PointSet1D::new(vec![])).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_sets() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..=64);
            // coarse grids force ties and points at 0
            let grid: u64 = [0u64, 3, 8, 40][rng.gen_range(0..4)];
            let pts: Vec<Phase> = (0..n)
                .map(|_| {
                    if grid == 0 {
                        Phase(rng.gen())
                    } else {
                        crate::phase::phase_of_residue(rng.gen_range(0..grid), grid)
                    }
                })
                .collect();
            let s = PointSet1D::new(pts.clone());
            assert_eq!(discrepancy_units(&s).unwrap(), brute_force(&pts));
            let star = star_discrepancy(&s).unwrap();
            assert!((star - star_brute(s.points())).abs() <= 1e-9 * n as f64);
        }
    }

    #[test]
    fn koksma_examples() {
        let m2 = ExponentVector::standard(2);
        let r = koksma_relation_check(&TorusPoint::zero(2), 50, &m2).unwrap();
        assert_eq!(r.sum_abs, 50.0);
        assert_eq!(r.star_discrepancy, 50.0);
        assert!((r.ratio - 1.0).abs() < 1e-15 && r.pass);
        let x = TorusPoint::from_f64(&[0.2718281828, 0.3141592653]);
        let r = koksma_relation_check(&x, 1000, &m2).unwrap();
        assert!(r.pass && r.ratio <= TAU);
        let half = TorusPoint::rational(&[1], 2).unwrap();
        let r = koksma_relation_check(&half, 4, &ExponentVector::standard(1)).unwrap();
        assert!(r.sum_abs < 1e-15 && r.pass);
    }

    #[test]
    fn scan_examples() {
        let m = ExponentVector::standard(2);
        let all = discrepancy_scan(&TorusPoint::zero(2), 0.9, &m, 2000).unwrap();
        assert_eq!(all, checkpoint_grid(2000));
        let golden = TorusPoint::from_f64(&[(5f64.sqrt() - 1.0) / 2.0]);
        let hits = discrepancy_scan(&golden, 0.5, &ExponentVector::standard(1), 10_000).unwrap();
        assert!(hits.len() <= 5, "{hits:?}");
        assert!(discrepancy_scan(&golden, 0.0, &m, 10).is_err());
    }

    #[test]
    fn exceptional_points_reappear_in_discrepancy_scan() {
        // |S| >= N^{alpha} and |S| <= 2 pi D* <= 2 pi D give D >= N^alpha / (2 pi)
        let m = ExponentVector::standard(2);
        let x = TorusPoint::rational(&[0, 1], 5).unwrap();
        let exc = crate::weyl::exceptional_scan(&x, 0.6, &m, 200).unwrap();
        let rows = discrepancy_rows(&x, &m, &checkpoint_grid(200)).unwrap();
        for n in exc {
            let r = &rows[n as usize - 1];
            assert!(r.discrepancy >= (n as f64).powf(0.6) / TAU);
        }
    }

    #[test]
    fn rows_agree_with_direct_calls() {
        let x = TorusPoint::from_f64(&[0.1, 0.7, 0.3]);
        let m = ExponentVector::standard(3);
        let rows = discrepancy_rows(&x, &m, &[1, 7, 50, 333]).unwrap();
        for r in rows {
            let s = poly_sequence(&x, r.n, &m).unwrap();
            assert_eq!(r.discrepancy, discrepancy_exact(&s).unwrap());
            let w = crate::weyl::weyl_sum_m(&x, &m, r.n).unwrap().norm();
            assert_eq!(r.sum_abs.to_bits(), w.to_bits());
        }
    }

    fn point_set() -> impl Strategy<Value = Vec<Phase>> {
        prop_oneof![
            proptest::collection::vec(any::<u64>().prop_map(Phase), 1..80),
            proptest::collection::vec(
                (0u64..16).prop_map(|r| crate::phase::phase_of_residue(r, 16)),
                1..80
            ),
        ]
    }

    proptest! {
        #[test]
        fn sandwich(pts in point_set()) {
            let s = PointSet1D::new(pts);
            let d = discrepancy_units(&s).unwrap();
            let ds = star_discrepancy_units(&s).unwrap();
            prop_assert!(ds <= d && d <= 2 * ds);
        }

        #[test]
        fn duplication_doubles(pts in point_set()) {
            let s = PointSet1D::new(pts);
            prop_assert_eq!(discrepancy_units(&s.doubled()).unwrap(), 2 * discrepancy_units(&s).unwrap());
        }

        #[test]
        fn adding_a_point_moves_d_by_at_most_two(pts in point_set(), extra in any::<u64>()) {
            let s = PointSet1D::new(pts.clone());
            let mut more = pts;
            more.push(Phase(extra));
            let t = PointSet1D::new(more);
            let diff = (discrepancy_units(&t).unwrap() - discrepancy_units(&s).unwrap()).abs();
            prop_assert!(diff <= 2 * ONE);
        }

        #[test]
        fn agrees_with_brute_force(pts in point_set()) {
            let s = PointSet1D::new(pts.clone());
            prop_assert_eq!(discrepancy_units(&s).unwrap(), brute_force(&pts));
        }
    }
}
