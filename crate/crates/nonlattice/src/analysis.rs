//! Verification harness: certified sup-norm distances between the exact
//! law and its approximations, scaling sweeps across sample sizes,
//! brute-force oracles and the Student-statistic threshold map.
//!
//! Both the exact distribution function and the expansion are jump
//! functions, so a dense grid can silently miss `O(1/N)` spikes. The
//! sup-norm engine instead merges the exact support of the law with the
//! exact discontinuity set of the expansion, evaluates both functions from
//! the left and from the right at every merged location, and closes the
//! gaps between locations with a derivative-bound refinement. The result
//! is a certified lower bound together with an upper bound that is tight
//! to 1e-10 plus the tail budget beyond the scan range.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::exact_law::{build_exact_law, ExactLaw};
use crate::expansion::{breakpoints, psi_two_sided, BreakpointSet, SumRange, ThetaWeights};
use crate::numerics::{reduce_u64, std_normal_cdf, std_normal_pdf, std_normal_sf};
use crate::{Error, Result};

/// Which approximation the sup-norm distance is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// the expansion with its oscillatory correction
    Psi,
    /// the plain normal limit
    Phi,
}

/// Certified sup-norm result.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupResult {
    /// certified lower bound: an attained candidate value
    pub sup: f64,
    /// location of the attained candidate (reported on the positive
    /// half-axis; the law and both approximations are symmetric)
    pub argmax: f64,
    /// upper bound from the derivative-bound gap refinement plus tails
    pub upper_bound: f64,
    /// mass and normal tail beyond the scan range, included in the bound
    pub tail_budget: f64,
}

/// One row of the scaling report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingRow {
    pub n: u64,
    pub sup_f_psi: f64,
    pub sup_f_phi: f64,
    pub p0: f64,
    pub max_off_origin_mass: f64,
    pub n_breakpoints: u64,
    pub runtime_ms: u64,
}

/// Ordinary least squares of `log(value)` against `log(N)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub residual_max: f64,
}

/// Column selector for [`fit_loglog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    SupFPsi,
    SupFPhi,
    P0,
    MaxOffOriginMass,
}

impl Column {
    pub fn name(&self) -> &'static str {
        match self {
            Column::SupFPsi => "sup_f_psi",
            Column::SupFPhi => "sup_f_phi",
            Column::P0 => "p0",
            Column::MaxOffOriginMass => "max_off_origin_mass",
        }
    }

    fn extract(&self, row: &ScalingRow) -> f64 {
        match self {
            Column::SupFPsi => row.sup_f_psi,
            Column::SupFPhi => row.sup_f_phi,
            Column::P0 => row.p0,
            Column::MaxOffOriginMass => row.max_off_origin_mass,
        }
    }
}

impl std::str::FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup_f_psi" => Ok(Column::SupFPsi),
            "sup_f_phi" => Ok(Column::SupFPhi),
            "p0" => Ok(Column::P0),
            "max_off_origin_mass" => Ok(Column::MaxOffOriginMass),
            other => Err(Error::domain(format!("unknown column: {other}"))),
        }
    }
}

// One merged evaluation location on the positive half-axis: an atom of the
// law, a breakpoint of the expansion, or both (exact squared value num/den).
struct Location {
    w: f64,
    f_right: f64,
    f_left: f64,
    bp: Option<u32>,
}

/// Sup-norm distance between the law and the chosen approximation over
/// `[-w_max, w_max]`, certified by two-sided evaluation at every exact
/// discontinuity plus gap refinement. Requires `w_max >= 8` so that the
/// tail budget stays below 1e-14.
pub fn sup_distance(law: &ExactLaw, target: Target, w_max: f64) -> Result<SupResult> {
    if !(w_max >= 8.0) {
        return Err(Error::domain(format!(
            "sup_distance: w_max = {w_max} must be >= 8"
        )));
    }
    let weights = ThetaWeights::new(law.n_total());
    let bps = match target {
        Target::Psi => Some(breakpoints(&weights, w_max)),
        Target::Phi => None,
    };
    Ok(sup_distance_prepared(
        law,
        target,
        &weights,
        bps.as_ref(),
        w_max,
    ))
}

// shared by sup_distance and scaling_row so breakpoints are built once
fn sup_distance_prepared(
    law: &ExactLaw,
    target: Target,
    weights: &ThetaWeights,
    bps: Option<&BreakpointSet>,
    w_max: f64,
) -> SupResult {
    let locations = merge_locations(law, bps, w_max);

    // two-sided approximation values at every location
    let g_values: Vec<(f64, f64)> = locations
        .par_iter()
        .map(|loc| match target {
            Target::Phi => {
                let v = std_normal_cdf(loc.w);
                (v, v)
            }
            Target::Psi => {
                let hits = loc
                    .bp
                    .map(|i| {
                        let set = bps.expect("breakpoints exist for psi target");
                        set.contributors(&set.points()[i as usize])
                    })
                    .unwrap_or(&[]);
                psi_two_sided(weights, loc.w, hits, SumRange::Windowed)
            }
        })
        .collect();

    let mut sup = 0.0f64;
    let mut argmax = 0.0f64;
    for (loc, &(g_r, g_l)) in locations.iter().zip(&g_values) {
        let right = (loc.f_right - g_r).abs();
        let left = (loc.f_left - g_l).abs();
        let cand = right.max(left);
        if cand > sup {
            sup = cand;
            argmax = loc.w;
        }
    }

    // derivative bound between discontinuities
    let n = law.n_total() as f64;
    let slope_bound = match target {
        Target::Phi => std_normal_pdf(0.0),
        Target::Psi => {
            // |psi'| <= pdf(0) + N^{-1/2} sqrt(3/2) (sup|w pdf| * sum w_n / 2
            //           + pdf(0) * sum w_n sqrt(2n))
            std_normal_pdf(0.0)
                + (1.5f64).sqrt() / n.sqrt()
                    * (0.242_0 * 0.5 * weights.weight_sum()
                        + std_normal_pdf(0.0) * weights.weighted_sqrt_sum())
        }
    };

    // close the gaps: F is constant on each open gap, the approximation
    // moves at most slope_bound * width, and interior refinement bisects
    // until each segment's potential drops under the certification slack
    let slack = 1e-10;
    let mut upper = sup;
    let eval = |w: f64| -> f64 {
        match target {
            Target::Phi => std_normal_cdf(w),
            Target::Psi => psi_two_sided(weights, w, &[], SumRange::Windowed).0,
        }
    };
    for (i, pair) in locations.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let f_val = a.f_right;
        let ga = g_values[i].0; // right limit at a
        let gb = g_values[i + 1].1; // left limit at b
        let seg = refine_gap(
            a.w,
            b.w,
            ga,
            gb,
            f_val,
            slope_bound,
            &mut sup,
            &mut argmax,
            slack,
            &eval,
        );
        upper = upper.max(seg);
    }
    // gap from the last location to w_max
    if let Some(last) = locations.last() {
        if last.w < w_max {
            let f_val = last.f_right;
            let ga = g_values[locations.len() - 1].0;
            let gb = eval(w_max);
            let seg = refine_gap(
                last.w,
                w_max,
                ga,
                gb,
                f_val,
                slope_bound,
                &mut sup,
                &mut argmax,
                slack,
                &eval,
            );
            upper = upper.max(seg);
        }
    }

    // everything beyond w_max: remaining law mass, normal tail, and the
    // uniformly bounded correction term
    let law_tail = (law.total_mass() - law.cdf(w_max)).max(0.0);
    let tail_budget = law_tail
        + std_normal_sf(w_max)
        + (3.0 / (8.0 * n)).sqrt() * std_normal_pdf(w_max) * weights.weight_sum();

    SupResult {
        sup,
        argmax,
        upper_bound: upper + tail_budget,
        tail_budget,
    }
}

// Bounds sup over the open gap (a, b) where F = f_val and the smooth side
// runs from ga (right limit at a) to gb (left limit at b). Updates the
// global lower bound through interior evaluations; returns a certified
// upper bound for the segment.
#[allow(clippy::too_many_arguments)]
fn refine_gap(
    a: f64,
    b: f64,
    ga: f64,
    gb: f64,
    f_val: f64,
    slope_bound: f64,
    sup: &mut f64,
    argmax: &mut f64,
    slack: f64,
    eval: &impl Fn(f64) -> f64,
) -> f64 {
    let end_cand = (f_val - ga).abs().max((f_val - gb).abs());
    let potential = end_cand + slope_bound * (b - a) * 0.5;
    if potential <= *sup + slack || b - a < 1e-13 {
        return potential;
    }
    let mid = 0.5 * (a + b);
    if mid <= a || mid >= b {
        return potential;
    }
    let gm = eval(mid);
    let cand = (f_val - gm).abs();
    if cand > *sup {
        *sup = cand;
        *argmax = mid;
    }
    let left = refine_gap(a, mid, ga, gm, f_val, slope_bound, sup, argmax, slack, eval);
    let right = refine_gap(mid, b, gm, gb, f_val, slope_bound, sup, argmax, slack, eval);
    left.max(right)
}

// Merge the positive-side atoms of the law with the breakpoint set into a
// single ascending sequence of exact locations. Negative arguments need no
// scan: by the exact mirror symmetry of the law and the reflection
// identity of both approximations, every candidate at w < 0 equals the
// opposite-side candidate at -w.
fn merge_locations(law: &ExactLaw, bps: Option<&BreakpointSet>, w_max: f64) -> Vec<Location> {
    let atoms = law.atoms();
    let cum = law.cum();
    let zero_idx = atoms
        .binary_search_by(|a| a.key.cmp(&crate::numerics::RationalKey::zero()))
        .expect("law always carries the zero atom");

    let mut out = Vec::new();
    let mut ai = zero_idx;
    let mut bi = 0usize;
    let empty: &[crate::expansion::ExpansionBreakpoint] = &[];
    let points = bps.map_or(empty, |s| s.points());

    // exact squared value of atom i (positive side)
    let atom_sq = |i: usize| -> (u64, u64) {
        let (_, num, den) = atoms[i]
            .key
            .small_parts()
            .expect("enumerated laws have word-sized keys");
        (num, den)
    };

    while ai < atoms.len() || bi < points.len() {
        let a_ok = ai < atoms.len() && atoms[ai].w <= w_max;
        let b_ok = bi < points.len() && points[bi].w_loc <= w_max;
        if !a_ok && !b_ok {
            break;
        }
        let order = if a_ok && b_ok {
            let (an, ad) = atom_sq(ai);
            let bp = &points[bi];
            (an as u128 * bp.den as u128).cmp(&(bp.num as u128 * ad as u128))
        } else if a_ok {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        };
        match order {
            std::cmp::Ordering::Less => {
                out.push(Location {
                    w: atoms[ai].w,
                    f_right: cum[ai],
                    f_left: cum[ai] - atoms[ai].mass,
                    bp: None,
                });
                ai += 1;
            }
            std::cmp::Ordering::Greater => {
                let f = if ai > 0 { cum[ai - 1] } else { 0.0 };
                out.push(Location {
                    w: points[bi].w_loc,
                    f_right: f,
                    f_left: f,
                    bp: Some(bi as u32),
                });
                bi += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(Location {
                    w: atoms[ai].w,
                    f_right: cum[ai],
                    f_left: cum[ai] - atoms[ai].mass,
                    bp: Some(bi as u32),
                });
                ai += 1;
                bi += 1;
            }
        }
    }
    out
}

/// One scaling row: the law, its breakpoint set and both sup distances for
/// a single sample size.
pub fn scaling_row(n: u64, w_max: f64) -> Result<ScalingRow> {
    let start = Instant::now();
    let law = build_exact_law(n)?;
    let weights = ThetaWeights::new(n);
    let bps = breakpoints(&weights, w_max);
    let psi_res = sup_distance_prepared(&law, Target::Psi, &weights, Some(&bps), w_max);
    let phi_res = sup_distance_prepared(&law, Target::Phi, &weights, None, w_max);
    Ok(ScalingRow {
        n,
        sup_f_psi: psi_res.sup,
        sup_f_phi: phi_res.sup,
        p0: law.origin_mass(),
        max_off_origin_mass: law.max_off_origin_mass(),
        n_breakpoints: bps.len() as u64,
        runtime_ms: start.elapsed().as_millis() as u64,
    })
}

/// One row per sample size, in input order. Sizes must be sorted
/// ascending; a failing size aborts the sweep with its `N` named.
pub fn scaling_sweep(ns: &[u64], w_max: f64) -> Result<Vec<ScalingRow>> {
    if ns.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::domain(
            "scaling_sweep: sample sizes must be strictly ascending".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let row = scaling_row(n, w_max)
            .map_err(|e| Error::domain(format!("scaling_sweep failed at N = {n}: {e}")))?;
        rows.push(row);
    }
    Ok(rows)
}

/// OLS fit of `log(column)` against `log(N)` over the rows.
pub fn fit_loglog(rows: &[ScalingRow], column: Column) -> Result<FitResult> {
    if rows.len() < 3 {
        return Err(Error::domain(format!(
            "fit_loglog: need at least 3 rows, got {}",
            rows.len()
        )));
    }
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for row in rows {
        let v = column.extract(row);
        if !(v > 0.0) {
            return Err(Error::domain(format!(
                "fit_loglog: column {} non-positive at N = {}",
                column.name(),
                row.n
            )));
        }
        xs.push((row.n as f64).ln());
        ys.push(v.ln());
    }
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    let mut residual_max = 0.0f64;
    for (x, y) in xs.iter().zip(&ys) {
        let fitted = intercept + slope * x;
        ss_res += (y - fitted).powi(2);
        ss_tot += (y - y_mean).powi(2);
        residual_max = residual_max.max((y - fitted).abs());
    }
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        residual_max,
    })
}

/// Which statistic the brute-force oracle aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// `W = D / sqrt(T)`, zero when `T = 0`
    W,
    /// the Student ratio `sqrt(N) mean / sample standard deviation`,
    /// zero when the denominator degenerates
    StudentT,
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" => Ok(Statistic::W),
            "student-t" | "student_t" => Ok(Statistic::StudentT),
            other => Err(Error::domain(format!("unknown statistic: {other}"))),
        }
    }
}

/// Exhaustive enumeration of all `3^N` equally likely sign tuples,
/// aggregated by exact value key. The cost guard refuses `N > 14`.
///
/// Both statistics have exactly representable squared values: `W^2 =
/// d^2/t` and (off the degenerate set) `tau^2 = d^2 (N-1) / (N t - d^2)`,
/// so aggregation is collision-free in both cases. Degenerate Student
/// denominators (all draws equal) map to value 0, mirroring the `T = 0`
/// convention of `W`.
pub fn brute_force_law(n: u64, statistic: Statistic) -> Result<ExactLaw> {
    if n == 0 || n > 14 {
        return Err(Error::domain(format!(
            "brute_force_law: N = {n} outside 1..=14 (3^N enumeration)"
        )));
    }
    let mut counts: HashMap<(i8, u64, u64), u64> = HashMap::new();
    let mut zero_count = 0u64;

    let mut digits = vec![0u8; n as usize]; // values 0,1,2 meaning -1,0,+1
    let mut d: i64 = -(n as i64);
    let mut t: i64 = n as i64;
    loop {
        // classify current tuple
        let key = match statistic {
            Statistic::W => {
                if t == 0 || d == 0 {
                    None
                } else {
                    let (num, den) = reduce_u64((d * d) as u64, t as u64);
                    Some((d.signum() as i8, num, den))
                }
            }
            Statistic::StudentT => {
                let denom = n as i64 * t - d * d;
                if denom == 0 || d == 0 {
                    None
                } else {
                    let (num, den) = reduce_u64((d * d) as u64 * (n - 1), denom as u64);
                    Some((d.signum() as i8, num, den))
                }
            }
        };
        match key {
            None => zero_count += 1,
            Some(k) => *counts.entry(k).or_insert(0) += 1,
        }

        // odometer step over {-1, 0, +1}^N
        let mut i = 0usize;
        loop {
            if i == n as usize {
                break;
            }
            let old = digits[i] as i64 - 1;
            if digits[i] == 2 {
                digits[i] = 0;
                d += -1 - old;
                t += 1 - old * old;
                i += 1;
            } else {
                digits[i] += 1;
                let new = digits[i] as i64 - 1;
                d += new - old;
                t += new * new - old * old;
                break;
            }
        }
        if i == n as usize {
            break;
        }
    }

    let total = 3f64.powi(n as i32);
    let mut positives = Vec::new();
    for (&(sign, num, den), &count) in &counts {
        if sign > 0 {
            let neg = counts.get(&(-1, num, den)).copied().unwrap_or(0);
            debug_assert_eq!(neg, count, "sign symmetry of tuple counts");
            positives.push((num, den, count as f64 / total));
        }
    }
    Ok(ExactLaw::from_aggregate(
        n,
        zero_count as f64 / total,
        positives,
    ))
}

/// Threshold map carrying Student-statistic thresholds onto the `W` scale:
/// `sqrt(N/(N-1)) x / (1 + x^2/(N-1))` for `x >= 0`, `N >= 2`.
///
/// This is the asymptotic form; it agrees with the exact per-tuple
/// inverse [`w_from_student_threshold`] to `O(x(1+x^2)/N)`.
pub fn student_threshold_map(x: f64, n: u64) -> f64 {
    debug_assert!(x >= 0.0 && n >= 2);
    let nf = n as f64;
    (nf / (nf - 1.0)).sqrt() * x / (1.0 + x * x / (nf - 1.0))
}

/// Exact inverse of the per-tuple identity `tau = W sqrt(N-1) /
/// sqrt(N - W^2)`: thresholds satisfy `tau <= x` iff
/// `W <= x sqrt(N) / sqrt(N - 1 + x^2)` on nondegenerate tuples.
pub fn w_from_student_threshold(x: f64, n: u64) -> f64 {
    debug_assert!(x >= 0.0 && n >= 2);
    let nf = n as f64;
    x * nf.sqrt() / (nf - 1.0 + x * x).sqrt()
}

/// Outcome of the tuple-by-tuple threshold equivalence check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TupleCheckReport {
    pub n: u64,
    pub thresholds: u64,
    /// `{tau <= x}` vs `{W <= map(x)}` disagreements away from exact
    /// boundary hits, over nondegenerate tuples — the claim is that this
    /// is zero
    pub exceptions_off_atoms: u64,
    /// disagreements where the tuple sits exactly on a boundary
    pub boundary_hits: u64,
    /// tuples with a degenerate Student denominator (checked separately:
    /// they carry the convention value 0)
    pub degenerate_tuples: u64,
    /// degenerate tuples whose conventional value breaks the equivalence
    pub degenerate_mismatches: u64,
}

/// Per-tuple check that `{tau <= x}` and `{W <= w_from_student_threshold(x)}`
/// coincide over all `3^N` tuples for each threshold.
pub fn student_tuple_check(n: u64, thresholds: &[f64]) -> Result<TupleCheckReport> {
    if !(2..=14).contains(&n) {
        return Err(Error::domain(format!(
            "student_tuple_check: N = {n} outside 2..=14"
        )));
    }
    // enumerate tuple statistics once: (w, tau, degenerate)
    let mut stats: Vec<(f64, f64, bool)> = Vec::new();
    let mut digits = vec![0u8; n as usize];
    let mut d: i64 = -(n as i64);
    let mut t: i64 = n as i64;
    loop {
        let w = if t == 0 {
            0.0
        } else {
            d as f64 / (t as f64).sqrt()
        };
        let denom = n as i64 * t - d * d;
        let (tau, degenerate) = if denom == 0 {
            (0.0, true)
        } else {
            (
                d as f64 * ((n - 1) as f64).sqrt() / (denom as f64).sqrt(),
                false,
            )
        };
        stats.push((w, tau, degenerate));

        let mut i = 0usize;
        loop {
            if i == n as usize {
                break;
            }
            let old = digits[i] as i64 - 1;
            if digits[i] == 2 {
                digits[i] = 0;
                d += -1 - old;
                t += 1 - old * old;
                i += 1;
            } else {
                digits[i] += 1;
                let new = digits[i] as i64 - 1;
                d += new - old;
                t += new * new - old * old;
                break;
            }
        }
        if i == n as usize {
            break;
        }
    }

    let mut report = TupleCheckReport {
        n,
        thresholds: thresholds.len() as u64,
        exceptions_off_atoms: 0,
        boundary_hits: 0,
        degenerate_tuples: 0,
        degenerate_mismatches: 0,
    };
    report.degenerate_tuples = stats.iter().filter(|s| s.2).count() as u64;

    for &x in thresholds {
        let w_cut = w_from_student_threshold(x, n);
        for &(w, tau, degenerate) in &stats {
            let tau_in = tau <= x;
            let w_in = w <= w_cut;
            if tau_in == w_in {
                continue;
            }
            if degenerate {
                report.degenerate_mismatches += 1;
            } else if w == w_cut || tau == x {
                report.boundary_hits += 1;
            } else {
                report.exceptions_off_atoms += 1;
            }
        }
    }
    Ok(report)
}

/// Spearman rank correlation (average ranks on ties).
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && vals[idx[j + 1]] == vals[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}
