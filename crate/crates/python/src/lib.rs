//! Python bindings. Tables cross the boundary as `dict[str, list]`: floats/None for continuous
//! columns, level strings for ordinal columns named in `ordinal`, other strings as text.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyString};

use twinsem::builders::{build_ace, AceSpec, TwinOptions};
use twinsem::mvn;
use twinsem::prep::{make_bin_cont_pair, parse_formula, ResidualSpec};
use twinsem::sim::{simulate, SimSpec};
use twinsem::{parse_exchange_str, parse_onyx_export, Column, ColumnTable, FitOptions, FitResult, Group, GroupedModel};

type Levels = BTreeMap<String, Vec<String>>;

fn err(e: twinsem::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn column_from_py(name: &str, values: &Bound<'_, PyList>, levels: Option<&Vec<String>>) -> PyResult<Column> {
    if let Some(levels) = levels {
        let codes = values
            .iter()
            .map(|v| {
                if v.is_none() {
                    return Ok(None);
                }
                let s: String = v.extract()?;
                levels
                    .iter()
                    .position(|l| *l == s)
                    .map(Some)
                    .ok_or_else(|| PyValueError::new_err(format!("`{s}` is not a level of `{name}`")))
            })
            .collect::<PyResult<_>>()?;
        return Ok(Column::Ordinal { levels: levels.clone(), codes });
    }
    if values.iter().any(|v| v.is_instance_of::<PyString>()) {
        let cells = values.iter().map(|v| v.extract::<Option<String>>()).collect::<PyResult<_>>()?;
        return Ok(Column::Text(cells));
    }
    let cells = values
        .iter()
        .map(|v| v.extract::<Option<f64>>().map(|x| x.filter(|x| !x.is_nan())))
        .collect::<PyResult<_>>()?;
    Ok(Column::Continuous(cells))
}

fn table_from_py(data: &Bound<'_, PyDict>, levels: &Levels) -> PyResult<ColumnTable> {
    let mut t = ColumnTable::new();
    for (k, v) in data.iter() {
        let name: String = k.extract()?;
        let list = v.cast::<PyList>().map_err(|_| PyValueError::new_err(format!("column `{name}` must be a list")))?;
        t.insert(&name, column_from_py(&name, list, levels.get(&name))?).map_err(err)?;
    }
    Ok(t)
}

fn table_to_py<'py>(py: Python<'py>, t: &ColumnTable) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    for (name, col) in t.columns() {
        match col {
            Column::Continuous(v) => out.set_item(name, v.clone())?,
            Column::Ordinal { levels, codes } => {
                let cells: Vec<Option<&str>> = codes.iter().map(|c| c.map(|c| levels[c].as_str())).collect();
                out.set_item(name, cells)?
            }
            Column::Text(v) => out.set_item(name, v.clone())?,
        }
    }
    Ok(out)
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn fit_to_py<'py>(py: Python<'py>, r: &FitResult) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &r.summary(twinsem::ReportFormat::Json, false))
}

fn options(seed: u64) -> FitOptions {
    FitOptions { seed, ..FitOptions::default() }
}

/// Parses an Onyx export (`format="onyx"`) or exchange JSON into an exchange document dict with
/// an added `diagnostics` list.
#[pyfunction]
#[pyo3(signature = (text, format = "onyx", name = "model"))]
fn parse_paths<'py>(py: Python<'py>, text: &str, format: &str, name: &str) -> PyResult<Bound<'py, PyAny>> {
    let set = match format {
        "onyx" => parse_onyx_export(text),
        "exchange" | "json" => parse_exchange_str(text),
        other => return Err(PyValueError::new_err(format!("unknown format `{other}`"))),
    }
    .map_err(err)?;
    let doc = json_to_py(py, &set.to_exchange(name).to_json())?;
    let diags: Vec<(usize, String)> = set.diagnostics.iter().map(|d| (d.line, d.message.clone())).collect();
    doc.set_item("diagnostics", diags)?;
    Ok(doc)
}

/// Fits an exchange-format model to one or more groups, `groups = {name: table}`.
#[pyfunction]
#[pyo3(signature = (model, groups, ordinal = None, seed = 0))]
fn fit_paths<'py>(
    py: Python<'py>,
    model: &str,
    groups: &Bound<'py, PyDict>,
    ordinal: Option<Levels>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let levels = ordinal.unwrap_or_default();
    let set = parse_exchange_str(model).map_err(err)?;
    let ram = set.to_model("model", None).map_err(err)?;
    let mut gm = GroupedModel::new(&ram.name);
    for (k, v) in groups.iter() {
        let name: String = k.extract()?;
        let table = table_from_py(v.cast::<PyDict>()?, &levels)?;
        let mut r = ram.clone();
        r.name = name.clone();
        gm.push(Group::new(&name, r).with_data(table)).map_err(err)?;
    }
    let result = twinsem::fit(&gm, &options(seed)).map_err(err)?;
    fit_to_py(py, &result)
}

/// Cholesky ACE model on wide MZ and DZ tables (`<var>_T1`, `<var>_T2` by default).
#[pyfunction]
#[pyo3(signature = (sel_dvs, mz, dz, ordinal = None, sep = "_T", dz_ar = 0.5, dz_cr = 1.0, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn fit_ace<'py>(
    py: Python<'py>,
    sel_dvs: Vec<String>,
    mz: &Bound<'py, PyDict>,
    dz: &Bound<'py, PyDict>,
    ordinal: Option<Levels>,
    sep: &str,
    dz_ar: f64,
    dz_cr: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let levels = ordinal.unwrap_or_default();
    let spec = AceSpec {
        name: "ACE".into(),
        sel_dvs,
        opts: TwinOptions { sep: sep.into(), dz_ar, dz_cr },
    };
    let model = build_ace(&spec, table_from_py(mz, &levels)?, table_from_py(dz, &levels)?).map_err(err)?;
    let result = twinsem::fit(&model, &options(seed)).map_err(err)?;
    fit_to_py(py, &result)
}

/// Simulated MZ and DZ tables from an ACE model at `truth` (labels `a_r1c1`, ..., `mean_<v>`).
#[pyfunction]
#[pyo3(signature = (sel_dvs, truth, n, seed = 0))]
fn simulate_ace<'py>(
    py: Python<'py>,
    sel_dvs: Vec<String>,
    truth: BTreeMap<String, f64>,
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = AceSpec { name: "ACE".into(), sel_dvs, opts: TwinOptions::default() };
    let pairs: Vec<(&str, f64)> = truth.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let out = simulate(&SimSpec::new(spec.model().map_err(err)?, &pairs, n, seed)).map_err(err)?;
    let groups = PyDict::new(py);
    for (name, table) in &out.groups {
        groups.set_item(name, table_to_py(py, table)?)?;
    }
    Ok(groups)
}

#[pyfunction]
#[pyo3(signature = (data, vars, censp, suffixes = None))]
fn bin_cont<'py>(
    py: Python<'py>,
    data: &Bound<'py, PyDict>,
    vars: Vec<String>,
    censp: f64,
    suffixes: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let t = table_from_py(data, &Levels::new())?;
    table_to_py(py, &make_bin_cont_pair(&t, &vars, censp, suffixes.as_deref()).map_err(err)?)
}

/// Replaces the formula's left-hand variable by its residuals; pooled across `suffixes`.
#[pyfunction]
#[pyo3(signature = (data, formula, suffixes = None))]
fn residualize<'py>(
    py: Python<'py>,
    data: &Bound<'py, PyDict>,
    formula: &str,
    suffixes: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyDict>> {
    let t = table_from_py(data, &Levels::new())?;
    let spec = ResidualSpec::Formula(parse_formula(formula).map_err(err)?);
    let r = twinsem::prep::residualize(&t, &spec, suffixes.as_deref()).map_err(err)?;
    table_to_py(py, &r.data)
}

/// P(lower <= X <= upper) for X ~ N(mu, sigma); use +-inf for open sides.
#[pyfunction]
fn mvn_rectangle(mu: Vec<f64>, sigma: Vec<Vec<f64>>, lower: Vec<f64>, upper: Vec<f64>) -> PyResult<f64> {
    let d = mu.len();
    if sigma.len() != d || sigma.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err(format!("sigma must be {d} x {d}")));
    }
    let s = nalgebra::DMatrix::from_fn(d, d, |i, j| sigma[i][j]);
    mvn::mvn_rectangle(&nalgebra::DVector::from_vec(mu), &s, &lower, &upper).map_err(err)
}

#[pymodule]
fn twinsem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_paths, m)?)?;
    m.add_function(wrap_pyfunction!(fit_paths, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ace, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ace, m)?)?;
    m.add_function(wrap_pyfunction!(bin_cont, m)?)?;
    m.add_function(wrap_pyfunction!(residualize, m)?)?;
    m.add_function(wrap_pyfunction!(mvn_rectangle, m)?)?;
    Ok(())
}
