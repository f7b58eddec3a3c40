//! Exact probability law of `W = D / sqrt(T)`.
//!
//! `T` counts the nonzero draws among `N` i.i.d. uniform `{-1, 0, +1}`
//! variables (binomial `(N, 2/3)`); given `T`, the number of `+1` draws is
//! binomial `(T, 1/2)` and `D` is their signed difference. `W` is `0` when
//! `T = 0`. The law is discrete but non-lattice: its support consists of
//! quadratic surds `d / sqrt(t)` which must be aggregated by exact value,
//! never by float image — `(d, t)` and `(2d, 4t)` are the same outcome of
//! `W` and land on the same [`RationalKey`].

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::Write;

use crate::numerics::{compare_key_to_f64, dd::Dd, CompensatedSum, LogFactorialTable, RationalKey};
use crate::{Error, Result};

/// Largest sample size `build_exact_law` accepts. Enumeration is
/// `O(N^2)` lattice points in both time and memory; 4096 keeps the peak
/// resident set near a gigabyte.
pub const MAX_LAW_N: u64 = 4096;

/// One joint outcome `(T = t, D = d)` with its log-probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub t: u64,
    pub d: i64,
    pub log_mass: f64,
}

impl LatticePoint {
    /// Validate the parity and range constraints and attach the joint
    /// log-mass.
    pub fn new(table: &LogFactorialTable, n: u64, t: u64, d: i64) -> Result<Self> {
        let log_mass = joint_pmf_exact(table, n, t, d)?;
        Ok(LatticePoint { t, d, log_mass })
    }

    /// Exact key of the statistic value this outcome maps to.
    pub fn key(&self) -> RationalKey {
        if self.t == 0 || self.d == 0 {
            RationalKey::zero()
        } else {
            crate::numerics::rational_key(self.d, self.t as i64).expect("validated on construction")
        }
    }
}

/// An aggregated support point of the law: the exact key, its float image
/// and the total probability mass of every lattice point mapping to it.
#[derive(Debug, Clone)]
pub struct SupportAtom {
    pub key: RationalKey,
    pub w: f64,
    pub mass: f64,
}

/// The full law of `W` for one sample size: atoms sorted by value plus
/// prefix-summed cumulative masses.
#[derive(Debug, Clone)]
pub struct ExactLaw {
    n_total: u64,
    atoms: Vec<SupportAtom>,
    cum: Vec<f64>,
}

/// Joint log-probability `log P(T = t, D = d)`.
///
/// Composes `C(N,t) (2/3)^t (1/3)^(N-t) * C(t, (t+d)/2) 2^(-t)`, which
/// collapses to the single multinomial `N! / (3^N s! (t-s)! (N-t)!)` with
/// `s = (t+d)/2`. The factorial differences are taken in double-double so
/// the result carries full f64 accuracy even at `N` in the thousands.
pub fn joint_pmf_exact(table: &LogFactorialTable, n: u64, t: u64, d: i64) -> Result<f64> {
    if n == 0 || n as usize > table.max_n() {
        return Err(Error::domain(format!(
            "joint_pmf_exact: N = {n} outside table range 1..={}",
            table.max_n()
        )));
    }
    if t > n {
        return Err(Error::domain(format!("joint_pmf_exact: t = {t} > N = {n}")));
    }
    if d.unsigned_abs() > t {
        return Err(Error::domain(format!(
            "joint_pmf_exact: |d| = {} > t = {t}",
            d.unsigned_abs()
        )));
    }
    if (d.unsigned_abs() % 2) != (t % 2) {
        return Err(Error::domain(format!(
            "joint_pmf_exact: d = {d} and t = {t} must share parity"
        )));
    }
    Ok(log_pmf_dd(table, n, t, d, &ln3_times(n)))
}

fn ln3_times(n: u64) -> Dd {
    Dd::ln_f64(3.0).mul(Dd::from_f64(n as f64))
}

#[inline]
fn log_pmf_dd(table: &LogFactorialTable, n: u64, t: u64, d: i64, n_ln3: &Dd) -> f64 {
    let s = ((t as i64 + d) / 2) as usize;
    table
        .dd(n as usize)
        .sub(table.dd(s))
        .sub(table.dd(t as usize - s))
        .sub(table.dd((n - t) as usize))
        .sub(*n_ln3)
        .to_f64()
}

/// Explicit part of the Stirling form of the even-case joint pmf
/// `P(D = 2m, T = 2n)`:
/// `log(3^{3/2}/(2 pi N)) - 3(3 c^2 + m^2)/N - 9(c^3 - c m^2)/N^2` with
/// `c = n - N/3`. The dropped remainder is `O(1/N + (c^4 + m^4)/N^3)`.
pub fn joint_pmf_asymptotic(n_total: u64, half_t: u64, half_d: u64) -> Result<f64> {
    if half_d < 1 || half_d > half_t || 2 * half_t > n_total {
        return Err(Error::domain(format!(
            "joint_pmf_asymptotic: need 1 <= m <= n <= N/2, got m={half_d}, n={half_t}, N={n_total}"
        )));
    }
    let n = n_total as f64;
    let c = half_t as f64 - n / 3.0;
    let m = half_d as f64;
    let lead = (3f64.powf(1.5) / (2.0 * std::f64::consts::PI * n)).ln();
    Ok(lead - 3.0 * (3.0 * c * c + m * m) / n - 9.0 * (c * c * c - c * m * m) / (n * n))
}

/// Enumerate every joint outcome, aggregate by exact key, sort and
/// accumulate. Outcomes whose probability underflows f64 are dropped.
pub fn build_exact_law(n: u64) -> Result<ExactLaw> {
    if !(1..=MAX_LAW_N).contains(&n) {
        return Err(Error::domain(format!(
            "build_exact_law: N = {n} outside 1..={MAX_LAW_N}"
        )));
    }
    let table = LogFactorialTable::new(n as usize);
    let n_ln3 = ln3_times(n);

    // keyed by reduced (d^2, t); d = 0 (including t = 0) accumulates at zero
    let mut positives: HashMap<(u64, u64), f64> = HashMap::new();
    let mut zero_mass = 0.0f64;
    for t in 0..=n {
        let mut d = t % 2;
        if d == 0 {
            zero_mass += log_pmf_dd(&table, n, t, 0, &n_ln3).exp();
            d = 2;
        }
        while d <= t {
            let mass = log_pmf_dd(&table, n, t, d as i64, &n_ln3).exp();
            if mass > 0.0 {
                let (num, den) = crate::numerics::reduce_u64(d * d, t);
                *positives.entry((num, den)).or_insert(0.0) += mass;
            }
            d += 2;
        }
    }

    let entries: Vec<(u64, u64, f64)> = positives
        .into_iter()
        .map(|((num, den), mass)| (num, den, mass))
        .collect();
    Ok(ExactLaw::from_aggregate(n, zero_mass, entries))
}

impl ExactLaw {
    /// Assemble a law from aggregated positive-side entries `(num, den,
    /// mass)` plus the mass at zero. The negative side is mirrored
    /// bit-for-bit, which is what makes the symmetry of the law exact.
    pub(crate) fn from_aggregate(
        n_total: u64,
        zero_mass: f64,
        mut positive: Vec<(u64, u64, f64)>,
    ) -> ExactLaw {
        positive.sort_unstable_by(|a, b| cmp_reduced(a.0, a.1, b.0, b.1));

        let mut atoms = Vec::with_capacity(2 * positive.len() + 1);
        for &(num, den, mass) in positive.iter().rev() {
            atoms.push(SupportAtom {
                key: RationalKey::from_reduced_parts(-1, num, den),
                w: -(num as f64 / den as f64).sqrt(),
                mass,
            });
        }
        atoms.push(SupportAtom {
            key: RationalKey::zero(),
            w: 0.0,
            mass: zero_mass,
        });
        for &(num, den, mass) in positive.iter() {
            atoms.push(SupportAtom {
                key: RationalKey::from_reduced_parts(1, num, den),
                w: (num as f64 / den as f64).sqrt(),
                mass,
            });
        }

        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = CompensatedSum::new();
        for atom in &atoms {
            acc.add(atom.mass);
            cum.push(acc.value());
        }
        ExactLaw {
            n_total,
            atoms,
            cum,
        }
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn atoms(&self) -> &[SupportAtom] {
        &self.atoms
    }

    pub fn cum(&self) -> &[f64] {
        &self.cum
    }

    pub fn total_mass(&self) -> f64 {
        *self.cum.last().expect("law has at least the zero atom")
    }

    /// `P(W <= w)`, resolving the float threshold against exact keys.
    pub fn cdf(&self, w: f64) -> f64 {
        if w.is_nan() {
            return f64::NAN;
        }
        if w == f64::INFINITY {
            return self.total_mass();
        }
        if w == f64::NEG_INFINITY {
            return 0.0;
        }
        let idx = self
            .atoms
            .partition_point(|a| compare_key_to_f64(&a.key, w) != Ordering::Greater);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// `P(W < w)` — the left limit of the distribution function.
    pub fn cdf_left(&self, w: f64) -> f64 {
        if w.is_nan() {
            return f64::NAN;
        }
        if w == f64::INFINITY {
            return self.total_mass();
        }
        if w == f64::NEG_INFINITY {
            return 0.0;
        }
        let idx = self
            .atoms
            .partition_point(|a| compare_key_to_f64(&a.key, w) == Ordering::Less);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Aggregated mass at an exact support value, `0` off the support.
    pub fn point_mass(&self, key: &RationalKey) -> f64 {
        match self.atoms.binary_search_by(|a| a.key.cmp(key)) {
            Ok(idx) => self.atoms[idx].mass,
            Err(_) => 0.0,
        }
    }

    /// `P(W = 0)`.
    pub fn origin_mass(&self) -> f64 {
        self.point_mass(&RationalKey::zero())
    }

    /// Largest atom mass away from the origin.
    pub fn max_off_origin_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.key.sign() != 0)
            .map(|a| a.mass)
            .fold(0.0, f64::max)
    }

    /// CSV export: `w,sign,num,den,mass,cum`, one row per atom in value
    /// order, floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "w,sign,num,den,mass,cum")?;
        for (atom, cum) in self.atoms.iter().zip(&self.cum) {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt17(atom.w),
                atom.key.sign(),
                atom.key.num(),
                atom.key.den(),
                fmt17(atom.mass),
                fmt17(*cum),
            )?;
        }
        Ok(())
    }
}

/// Format a float with 17 significant digits (round-trip exact).
pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmp_reduced(an: u64, ad: u64, bn: u64, bd: u64) -> Ordering {
    (an as u128 * bd as u128).cmp(&(bn as u128 * ad as u128))
}
