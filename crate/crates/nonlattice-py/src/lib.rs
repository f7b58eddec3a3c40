//! Python bindings: the exact law, the expansion and the oscillatory
//! series as an in-process extension module.
//!
//! Usage from Python:
//!
//!     import nonlattice_py as nl
//!     law = nl.build_law(300)
//!     law.cdf(1.0), law.origin_mass()
//!     exp = nl.Expansion(300)
//!     exp.psi(1.0) - exp.psi_left(1.0)
//!     nl.witness(300)["value"]

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use nonlattice::analysis::{self, Statistic, Target};
use nonlattice::exact_law::{build_exact_law, ExactLaw};
use nonlattice::expansion::{self, SumRange, ThetaWeights};
use nonlattice::numerics;
use nonlattice::oscillatory::{self, KernelChoice, SeriesConfig};

fn to_py_err(e: nonlattice::Error) -> PyErr {
    match e {
        nonlattice::Error::Domain(msg) => PyValueError::new_err(msg),
        nonlattice::Error::Io(err) => PyIOError::new_err(err.to_string()),
    }
}

fn parse_kernel(name: &str) -> PyResult<KernelChoice> {
    match name {
        "unit" => Ok(KernelChoice::Unit),
        "figure1" => Ok(KernelChoice::Figure1),
        other => Err(PyValueError::new_err(format!(
            "unknown kernel {other:?}; expected \"unit\" or \"figure1\""
        ))),
    }
}

fn series_config(n: u64, m: Option<u32>, kernel: &str) -> PyResult<SeriesConfig> {
    let mut cfg = SeriesConfig::for_sample_size(n).with_kernel(parse_kernel(kernel)?);
    if let Some(m) = m {
        if m < 1 {
            return Err(PyValueError::new_err("m must be >= 1"));
        }
        cfg.truncation = m;
    }
    Ok(cfg)
}

/// Exact law of the self-normalized statistic for one sample size.
#[pyclass(name = "Law")]
struct PyLaw {
    inner: ExactLaw,
}

#[pymethods]
impl PyLaw {
    /// Sample size the law was built for.
    #[getter]
    fn n(&self) -> u64 {
        self.inner.n_total()
    }

    /// Number of support atoms.
    fn atom_count(&self) -> usize {
        self.inner.atoms().len()
    }

    /// `P(W <= w)`.
    fn cdf(&self, w: f64) -> f64 {
        self.inner.cdf(w)
    }

    /// `P(W < w)`.
    fn cdf_left(&self, w: f64) -> f64 {
        self.inner.cdf_left(w)
    }

    /// Probability mass at the exact value `d / sqrt(t)`.
    fn point_mass(&self, d: i64, t: i64) -> PyResult<f64> {
        if d == 0 {
            return Ok(self.inner.origin_mass());
        }
        let key = numerics::rational_key(d, t).map_err(to_py_err)?;
        Ok(self.inner.point_mass(&key))
    }

    /// `P(W = 0)`.
    fn origin_mass(&self) -> f64 {
        self.inner.origin_mass()
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn max_off_origin_mass(&self) -> f64 {
        self.inner.max_off_origin_mass()
    }

    /// All atoms as `(w, mass)` pairs in increasing value order.
    fn atoms(&self) -> Vec<(f64, f64)> {
        self.inner.atoms().iter().map(|a| (a.w, a.mass)).collect()
    }

    /// Write the law as CSV (`w,sign,num,den,mass,cum`).
    fn write_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        self.inner
            .write_csv(std::io::BufWriter::new(file))
            .map_err(to_py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.atoms().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Law(n={}, atoms={})",
            self.inner.n_total(),
            self.inner.atoms().len()
        )
    }
}

/// The normal approximation plus oscillatory correction for one sample
/// size, with left limits and the discontinuity set.
#[pyclass(name = "Expansion")]
struct PyExpansion {
    weights: ThetaWeights,
}

#[pymethods]
impl PyExpansion {
    #[new]
    fn new(n: u64) -> PyResult<Self> {
        if n < 1 {
            return Err(PyValueError::new_err("n must be >= 1"));
        }
        Ok(PyExpansion {
            weights: ThetaWeights::new(n),
        })
    }

    #[getter]
    fn n(&self) -> u64 {
        self.weights.n_total()
    }

    /// Right-continuous value of the approximating distribution function.
    fn psi(&self, w: f64) -> f64 {
        expansion::psi(&self.weights, w)
    }

    /// Left limit of `psi`.
    fn psi_left(&self, w: f64) -> f64 {
        expansion::psi_left(&self.weights, w)
    }

    /// The oscillatory correction term at `w >= 0` (the `O(N^-1/2)`
    /// deviation from the plain normal limit, before the `1/sqrt(N)`).
    fn correction(&self, w: f64) -> PyResult<f64> {
        expansion::lambda_capital(&self.weights, w, SumRange::Full).map_err(to_py_err)
    }

    /// Total Gaussian weight (asymptotic to 1).
    fn weight_sum(&self) -> f64 {
        self.weights.weight_sum()
    }

    /// Jump of the expansion at the origin, in closed form.
    fn origin_jump(&self) -> f64 {
        expansion::origin_jump(self.weights.n_total())
    }

    /// All discontinuities up to `w_max` as `(w, jump)` pairs.
    fn breakpoints(&self, w_max: f64) -> Vec<(f64, f64)> {
        expansion::breakpoints(&self.weights, w_max)
            .points()
            .iter()
            .map(|bp| (bp.w_loc, bp.jump))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Expansion(n={})", self.weights.n_total())
    }
}

/// Build the exact law by full enumeration of the joint lattice.
#[pyfunction]
fn build_law(n: u64) -> PyResult<PyLaw> {
    Ok(PyLaw {
        inner: build_exact_law(n).map_err(to_py_err)?,
    })
}

/// Exhaustive 3^N oracle law; `statistic` is `"w"` or `"student-t"`.
#[pyfunction]
#[pyo3(signature = (n, statistic = "w"))]
fn brute_force_law(n: u64, statistic: &str) -> PyResult<PyLaw> {
    let stat: Statistic = statistic.parse().map_err(to_py_err)?;
    Ok(PyLaw {
        inner: analysis::brute_force_law(n, stat).map_err(to_py_err)?,
    })
}

#[pyfunction]
fn std_normal_cdf(x: f64) -> f64 {
    numerics::std_normal_cdf(x)
}

#[pyfunction]
fn std_normal_pdf(x: f64) -> f64 {
    numerics::std_normal_pdf(x)
}

/// Fractional part of a nonnegative number.
#[pyfunction]
fn frac(x: f64) -> PyResult<f64> {
    numerics::frac(x).map_err(to_py_err)
}

/// Truncated sawtooth series for `frac(x) - 1/2`.
#[pyfunction]
fn tau_series(x: f64, terms: u32) -> PyResult<f64> {
    if x < 0.0 || terms < 1 {
        return Err(PyValueError::new_err("need x >= 0 and terms >= 1"));
    }
    Ok(oscillatory::tau_series(x, terms))
}

/// Truncated oscillatory series at `w > 0`.
#[pyfunction]
#[pyo3(signature = (n, w, m = None, kernel = "unit"))]
fn lambda_series(n: u64, w: f64, m: Option<u32>, kernel: &str) -> PyResult<f64> {
    if n < 3 || w <= 0.0 {
        return Err(PyValueError::new_err("need n >= 3 and w > 0"));
    }
    let cfg = series_config(n, m, kernel)?;
    Ok(oscillatory::lambda_series(n, w, &cfg))
}

/// Both sides of the Gaussian Poisson summation identity; returns
/// `(lhs, rhs, abs_diff)`.
#[pyfunction]
#[pyo3(signature = (z, b, tol = 1e-12))]
fn poisson_pair(z: f64, b: f64, tol: f64) -> PyResult<(f64, f64, f64)> {
    let pair = oscillatory::poisson_theta_pair(z, b, tol).map_err(to_py_err)?;
    Ok((pair.lhs.re, pair.rhs.re, (pair.lhs - pair.rhs).norm()))
}

/// One harmonic in raw-theta and closed dual form: `(exact, closed)`.
#[pyfunction]
fn theta_term(n: u64, k: u32, w: f64) -> PyResult<(f64, f64)> {
    if n < 3 || k < 1 || w <= 0.0 {
        return Err(PyValueError::new_err("need n >= 3, k >= 1 and w > 0"));
    }
    let t = oscillatory::theta_term(n, k, w);
    Ok((t.exact, t.closed))
}

/// Resonance witness for the lower bound; requires `n` divisible by 3.
#[pyfunction]
#[pyo3(signature = (n, m = None, kernel = "unit"))]
fn witness<'py>(
    py: Python<'py>,
    n: u64,
    m: Option<u32>,
    kernel: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = series_config(n, m, kernel)?;
    let w = oscillatory::lower_bound_witness(n, &cfg).map_err(to_py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("n", w.n)?;
    dict.set_item("w_star", w.w_star)?;
    dict.set_item("value", w.value)?;
    dict.set_item("k1_envelope", w.k1_envelope)?;
    dict.set_item("tail_bound", w.tail_bound)?;
    Ok(dict)
}

/// Certified sup-norm distance of the law at sample size `n` from the
/// expansion (`target="psi"`) or the plain normal limit (`target="phi"`);
/// returns `(sup, argmax, upper_bound)`.
#[pyfunction]
#[pyo3(signature = (n, target = "psi", w_max = 8.0))]
fn sup_distance(n: u64, target: &str, w_max: f64) -> PyResult<(f64, f64, f64)> {
    let target = match target {
        "psi" => Target::Psi,
        "phi" => Target::Phi,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown target {other:?}; expected \"psi\" or \"phi\""
            )))
        }
    };
    let law = build_exact_law(n).map_err(to_py_err)?;
    let res = analysis::sup_distance(&law, target, w_max).map_err(to_py_err)?;
    Ok((res.sup, res.argmax, res.upper_bound))
}

/// Threshold map from the Student scale to the `W` scale.
#[pyfunction]
fn student_threshold_map(x: f64, n: u64) -> PyResult<f64> {
    if x < 0.0 || n < 2 {
        return Err(PyValueError::new_err("need x >= 0 and n >= 2"));
    }
    Ok(analysis::student_threshold_map(x, n))
}

/// Jump of the expansion at the origin, `sqrt(3/(4 pi n))`.
#[pyfunction]
fn origin_jump(n: u64) -> PyResult<f64> {
    if n < 1 {
        return Err(PyValueError::new_err("n must be >= 1"));
    }
    Ok(expansion::origin_jump(n))
}

#[pymodule]
fn nonlattice_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLaw>()?;
    m.add_class::<PyExpansion>()?;
    m.add_function(wrap_pyfunction!(build_law, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force_law, m)?)?;
    m.add_function(wrap_pyfunction!(std_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(std_normal_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(frac, m)?)?;
    m.add_function(wrap_pyfunction!(tau_series, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_series, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_pair, m)?)?;
    m.add_function(wrap_pyfunction!(theta_term, m)?)?;
    m.add_function(wrap_pyfunction!(witness, m)?)?;
    m.add_function(wrap_pyfunction!(sup_distance, m)?)?;
    m.add_function(wrap_pyfunction!(student_threshold_map, m)?)?;
    m.add_function(wrap_pyfunction!(origin_jump, m)?)?;
    Ok(())
}
