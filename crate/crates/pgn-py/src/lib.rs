//! Python bindings: canvases, rigid systems, (n,γ)-systems, the lattice
//! minima engine and the exponent quadruple maps.  Values cross the
//! boundary as exact-rational strings ("p/q") and JSON documents.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pgn::lattice::{self, Direction};
use pgn::rat::{self, Rat};
use pgn::systems::{self, Canvas as RsCanvas, NGammaSystem};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_q(s: &str) -> PyResult<Rat> {
    rat::parse_rat(s).map_err(err)
}

fn direction_from(coords: Vec<i64>) -> PyResult<Direction> {
    if coords.len() < 2 || coords.iter().all(|&c| c == 0) {
        return Err(PyValueError::new_err(
            "direction needs ≥ 2 integer components, not all zero",
        ));
    }
    let v: Vec<_> = coords.into_iter().map(Into::into).collect();
    Ok(Direction::ExactNormal(lattice::primitive(&v)))
}

/// A canvas: integer point rows with the (k, ℓ) index sequences and mesh.
#[pyclass]
#[derive(Clone)]
struct Canvas {
    inner: RsCanvas,
}

#[pymethods]
impl Canvas {
    /// Parse from the canvas JSON format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: RsCanvas = serde_json::from_str(text).map_err(err)?;
        Ok(Canvas { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn mesh(&self) -> String {
        rat::fmt_rat(&self.inner.mesh)
    }

    /// Structural violations; empty when the canvas is valid.
    fn violations(&self) -> Vec<String> {
        systems::validate_canvas(&self.inner)
            .violations
            .iter()
            .map(|v| format!("{v:?}"))
            .collect()
    }

    fn is_valid(&self) -> bool {
        systems::validate_canvas(&self.inner).ok()
    }

    /// The switch numbers q_i (coordinate sums of the rows).
    fn switch_numbers(&self) -> PyResult<Vec<String>> {
        let r = systems::rigid_from_canvas(&self.inner).map_err(err)?;
        Ok(r.switch_numbers.iter().map(rat::fmt_rat).collect())
    }

    /// Component values (P₁(q), …, Pₙ(q)) as exact rationals.
    fn eval(&self, q: &str) -> PyResult<Vec<String>> {
        let r = systems::rigid_from_canvas(&self.inner).map_err(err)?;
        let q = parse_q(q)?;
        let vals = r.eval(&q).map_err(err)?;
        Ok(vals.iter().map(rat::fmt_rat).collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Canvas(n={}, rows={}, mesh={})",
            self.inner.n,
            self.inner.points.len(),
            rat::fmt_rat(&self.inner.mesh)
        )
    }
}

/// The 5-component worked example canvas.
#[pyfunction]
fn example_canvas() -> Canvas {
    Canvas { inner: systems::example_canvas() }
}

/// Self-similar n = 2 canvas with ratio ρ.
#[pyfunction]
fn geometric_canvas(rho: i64, steps: usize, delta: &str) -> PyResult<Canvas> {
    let d = parse_q(delta)?;
    Ok(Canvas { inner: systems::generate_geometric_canvas(rho, steps, &d) })
}

/// Seeded random valid canvas.
#[pyfunction]
fn random_canvas(n: usize, delta: &str, steps: usize, seed: u64) -> PyResult<Canvas> {
    let d = parse_q(delta)?;
    Ok(Canvas { inner: systems::random_rigid(n, &d, steps, seed) })
}

/// Successive minima of max{‖x‖, Q|x·u|} for u ∝ the integer direction:
/// returns {"lambda_sq_lo", "lambda_sq_hi", "L", "vectors", "exact"}.
#[pyfunction]
fn successive_minima(
    py: Python<'_>,
    direction: Vec<i64>,
    q_param: &str,
) -> PyResult<Py<PyAny>> {
    let u = direction_from(direction)?;
    let q = parse_q(q_param)?;
    let res = lattice::successive_minima(&u, &q).map_err(err)?;
    let l = res.l_values(96);
    let doc = serde_json::json!({
        "lambda_sq_lo": res.lambda_sq_lo.iter().map(rat::fmt_rat).collect::<Vec<_>>(),
        "lambda_sq_hi": res.lambda_sq_hi.iter().map(rat::fmt_rat).collect::<Vec<_>>(),
        "L": l.iter().map(|iv| iv.to_f64()).collect::<Vec<_>>(),
        "vectors": res.vectors.iter()
            .map(|v| v.iter().map(|c| c.to_string()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "exact": res.exact,
    });
    json_to_py(py, &doc)
}

/// Reduce an (n,γ)-system (JSON in, JSON out).
#[pyfunction]
fn reduce_system(text: &str) -> PyResult<String> {
    let sys: NGammaSystem = serde_json::from_str(text).map_err(err)?;
    let (out, _) = pgn::reduce::reduce(&sys).map_err(err)?;
    serde_json::to_string(&out).map_err(err)
}

/// Rigid canvas of mesh δ approximating a reduced system within 3n²δ.
#[pyfunction]
fn rigidify_system(text: &str, delta: &str, horizon: &str) -> PyResult<Canvas> {
    let sys: NGammaSystem = serde_json::from_str(text).map_err(err)?;
    let d = parse_q(delta)?;
    let h = parse_q(horizon)?;
    let out = pgn::rigidify::rigidify(&sys, &d, &h).map_err(err)?;
    Ok(Canvas { inner: out.canvas })
}

/// Build a direction whose minima profile tracks the canvas; returns the
/// primitive integer normal and the measured sup distance.
#[pyfunction]
#[pyo3(signature = (canvas, precision_bits = 256))]
fn realize(
    py: Python<'_>,
    canvas: &Canvas,
    precision_bits: u32,
) -> PyResult<Py<PyAny>> {
    let params = pgn::realize::RealizeParams { precision_bits, mesh_check: true };
    let out = pgn::realize::realize_canvas(&canvas.inner, &params).map_err(err)?;
    let rigid = systems::rigid_from_canvas(&canvas.inner).map_err(err)?;
    let measured =
        pgn::realize::measure_sup_dist(&out.direction, &rigid, precision_bits)
            .map_err(err)?;
    let normal = match &out.direction {
        Direction::ExactNormal(nv) => {
            nv.iter().map(|c| c.to_string()).collect::<Vec<_>>()
        }
        Direction::FloatVec(v) => v.iter().map(rat::fmt_rat).collect::<Vec<_>>(),
    };
    let doc = serde_json::json!({
        "normal": normal,
        "measured_sup": rat::fmt_rat(&measured),
        "measured_sup_approx": rat::rat_to_f64(&measured),
    });
    json_to_py(py, &doc)
}

/// θ(τ, τ̂, λ̂, λ) = (1/(τ+1), 1/(τ̂+1), λ̂/(λ̂+1), λ/(λ+1)); "inf" allowed.
#[pyfunction]
fn theta(quad: Vec<String>) -> PyResult<Vec<String>> {
    let q = parse_quadruple(&quad)?;
    let out = pgn::exponents::theta(&q).map_err(err)?;
    Ok(out.to_strings())
}

/// Inverse of theta on ratio quadruples in [0,1].
#[pyfunction]
fn theta_inv(quad: Vec<String>) -> PyResult<Vec<String>> {
    let q = parse_quadruple(&quad)?;
    let out = pgn::exponents::theta_inv(&q).map_err(err)?;
    Ok(out.to_strings())
}

/// Window extrema quadruple (min P₁/q, max P₁/q, min Pₙ/q, max Pₙ/q).
#[pyfunction]
fn ratio_quadruple(canvas: &Canvas, tail_start: &str, horizon: &str) -> PyResult<Vec<String>> {
    let r = systems::rigid_from_canvas(&canvas.inner).map_err(err)?;
    let a = parse_q(tail_start)?;
    let b = parse_q(horizon)?;
    let est = pgn::exponents::quadruple_estimate(&r, &a, &b).map_err(err)?;
    Ok(est.ratios.to_strings())
}

fn parse_quadruple(quad: &[String]) -> PyResult<pgn::exponents::Quadruple> {
    if quad.len() != 4 {
        return Err(PyValueError::new_err("quadruple needs exactly 4 entries"));
    }
    let mut parts = Vec::with_capacity(4);
    for s in quad {
        if s == "inf" {
            parts.push(pgn::exponents::ExtReal::Infinity);
        } else {
            parts.push(pgn::exponents::ExtReal::Finite(parse_q(s)?));
        }
    }
    Ok(pgn::exponents::Quadruple([
        parts[0].clone(),
        parts[1].clone(),
        parts[2].clone(),
        parts[3].clone(),
    ]))
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    let obj = json.call_method1("loads", (serde_json::to_string(v).map_err(err)?,))?;
    Ok(obj.unbind())
}

#[pymodule]
fn pgn_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Canvas>()?;
    m.add_function(wrap_pyfunction!(example_canvas, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_canvas, m)?)?;
    m.add_function(wrap_pyfunction!(random_canvas, m)?)?;
    m.add_function(wrap_pyfunction!(successive_minima, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_system, m)?)?;
    m.add_function(wrap_pyfunction!(rigidify_system, m)?)?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    m.add_function(wrap_pyfunction!(theta, m)?)?;
    m.add_function(wrap_pyfunction!(theta_inv, m)?)?;
    m.add_function(wrap_pyfunction!(ratio_quadruple, m)?)?;
    Ok(())
}
