//! RAM model representation and the expected-moment map.
//!
//! Variables are indexed manifests first (declaration order), then latents.
//! `A[to, from]` holds one-headed coefficients, `S` the symmetric two-headed
//! ones, and `M` the intercepts written by paths from the reserved `one`.
//! The filter `F` is implicit: it selects the first `manifests.len()` rows.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParameterVector;

/// Reserved pseudo-variable for means.
pub const ONE: &str = "one";
/// Prefix that marks a definition-variable reference.
pub const DEF_PREFIX: &str = "def_";

const PIVOT_TOLERANCE: f64 = 1e-12;

/// One arc of a path diagram, or a definition-variable declaration when `defn` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpec {
    pub from: String,
    pub to: String,
    pub arrows: u8,
    /// Absent in a document means free, as in mxPath.
    #[serde(default = "free_by_default")]
    pub free: bool,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub defn: bool,
}

fn free_by_default() -> bool {
    true
}

impl PathSpec {
    pub fn one_headed(from: &str, to: &str) -> Self {
        Self {
            from: from.to_string(),
            to: to.to_string(),
            arrows: 1,
            free: true,
            value: None,
            label: None,
            defn: false,
        }
    }

    pub fn two_headed(from: &str, to: &str) -> Self {
        Self {
            arrows: 2,
            ..Self::one_headed(from, to)
        }
    }

    pub fn variance(var: &str) -> Self {
        Self::two_headed(var, var)
    }

    pub fn mean(to: &str) -> Self {
        Self::one_headed(ONE, to)
    }

    /// Declares data column `column` as a definition variable.
    pub fn defn(column: &str) -> Self {
        Self {
            from: column.to_string(),
            to: def_name(column),
            arrows: 1,
            free: false,
            value: None,
            label: None,
            defn: true,
        }
    }

    pub fn fixed(mut self, value: f64) -> Self {
        self.free = false;
        self.value = Some(value);
        self
    }

    pub fn start(mut self, value: f64) -> Self {
        self.value = Some(value);
        self
    }

    pub fn label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }
}

/// Name of the proxy latent standing in for definition column `column`.
pub fn def_name(column: &str) -> String {
    format!("{DEF_PREFIX}{column}")
}

/// If `label` references a definition variable, the data column it names.
pub fn def_column(label: &str) -> Option<&str> {
    label.strip_prefix(DEF_PREFIX).filter(|c| !c.is_empty())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub value: f64,
    pub free: bool,
    pub label: Option<String>,
}

impl Cell {
    pub fn fixed(value: f64) -> Self {
        Self {
            value,
            free: false,
            label: None,
        }
    }

    pub fn free(value: f64, label: &str) -> Self {
        Self {
            value,
            free: true,
            label: Some(label.to_string()),
        }
    }

    fn is_structural(&self) -> bool {
        self.free || self.value != 0.0 || self.label.as_deref().and_then(def_column).is_some()
    }
}

/// Dense square table of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTable {
    n: usize,
    cells: Vec<Cell>,
}

impl CellTable {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            cells: vec![Cell::default(); n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.n + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut Cell {
        &mut self.cells[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cell: Cell) {
        self.cells[row * self.n + col] = cell;
    }

    fn grow(&mut self, n: usize) {
        let mut next = CellTable::new(n);
        for r in 0..self.n {
            for c in 0..self.n {
                next.set(r, c, self.get(r, c).clone());
            }
        }
        *self = next;
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &Cell)> {
        self.cells
            .iter()
            .enumerate()
            .map(move |(k, c)| (k / self.n, k % self.n, c))
    }
}

/// Which coefficient table a cell lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Matrix {
    A,
    S,
    M,
    Thresholds,
}

impl Matrix {
    pub fn as_str(&self) -> &'static str {
        match self {
            Matrix::A => "A",
            Matrix::S => "S",
            Matrix::M => "M",
            Matrix::Thresholds => "thresholds",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamModel {
    pub name: String,
    manifests: Vec<String>,
    latents: Vec<String>,
    a: CellTable,
    s: CellTable,
    m: Vec<Cell>,
    defvars: Vec<String>,
}

impl RamModel {
    pub fn new<S: AsRef<str>>(name: &str, manifests: &[S], latents: &[S]) -> Result<Self> {
        let manifests: Vec<String> = manifests.iter().map(|s| s.as_ref().to_string()).collect();
        let latents: Vec<String> = latents.iter().map(|s| s.as_ref().to_string()).collect();
        let mut seen = std::collections::HashSet::new();
        for v in manifests.iter().chain(latents.iter()) {
            if v == ONE {
                return Err(Error::ReservedName(v.clone()));
            }
            if v.is_empty() {
                return Err(Error::Model("empty variable name".into()));
            }
            if !seen.insert(v.as_str()) {
                return Err(Error::DuplicateVariable(v.clone()));
            }
        }
        let n = manifests.len() + latents.len();
        Ok(Self {
            name: name.to_string(),
            manifests,
            latents,
            a: CellTable::new(n),
            s: CellTable::new(n),
            m: vec![Cell::default(); n],
            defvars: Vec::new(),
        })
    }

    /// Builds a model from a list of paths; `defn` specs may appear anywhere before their use.
    pub fn from_paths<S: AsRef<str>>(
        name: &str,
        manifests: &[S],
        latents: &[S],
        paths: &[PathSpec],
    ) -> Result<Self> {
        let mut model = Self::new(name, manifests, latents)?;
        for p in paths {
            model.add_path(p)?;
        }
        Ok(model)
    }

    pub fn manifests(&self) -> &[String] {
        &self.manifests
    }

    pub fn latents(&self) -> &[String] {
        &self.latents
    }

    pub fn defvars(&self) -> &[String] {
        &self.defvars
    }

    pub fn n_vars(&self) -> usize {
        self.manifests.len() + self.latents.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = &String> {
        self.manifests.iter().chain(self.latents.iter())
    }

    pub fn var_name(&self, idx: usize) -> &str {
        let nm = self.manifests.len();
        if idx < nm {
            &self.manifests[idx]
        } else {
            &self.latents[idx - nm]
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.manifests
            .iter()
            .position(|v| v == name)
            .or_else(|| {
                self.latents
                    .iter()
                    .position(|v| v == name)
                    .map(|i| i + self.manifests.len())
            })
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn a(&self) -> &CellTable {
        &self.a
    }

    pub fn s(&self) -> &CellTable {
        &self.s
    }

    pub fn m(&self) -> &[Cell] {
        &self.m
    }

    /// Mutable access to a cell, keeping `S` symmetric.
    pub fn set_cell(&mut self, matrix: Matrix, row: usize, col: usize, cell: Cell) -> Result<()> {
        if let Some(label) = &cell.label {
            self.check_label(label, cell.free)?;
        }
        if cell.free && cell.label.as_deref().is_none_or(str::is_empty) {
            return Err(Error::UnlabeledFreeCell(format!(
                "{}[{},{}]",
                matrix.as_str(),
                self.var_name(row),
                self.var_name(col)
            )));
        }
        match matrix {
            Matrix::A => self.a.set(row, col, cell),
            Matrix::S => {
                self.s.set(row, col, cell.clone());
                self.s.set(col, row, cell);
            }
            Matrix::M => self.m[row] = cell,
            Matrix::Thresholds => {
                return Err(Error::Model("thresholds are not RAM cells".into()))
            }
        }
        Ok(())
    }

    pub fn add_latent(&mut self, name: &str) -> Result<usize> {
        if name == ONE {
            return Err(Error::ReservedName(name.to_string()));
        }
        if self.index_of(name).is_some() {
            return Err(Error::DuplicateVariable(name.to_string()));
        }
        self.latents.push(name.to_string());
        let n = self.n_vars();
        self.a.grow(n);
        self.s.grow(n);
        self.m.push(Cell::default());
        Ok(n - 1)
    }

    fn check_label(&self, label: &str, free: bool) -> Result<()> {
        if let Some(col) = def_column(label) {
            if free {
                return Err(Error::FreeDefinitionLabel(label.to_string()));
            }
            if !self.defvars.iter().any(|d| d == col) {
                return Err(Error::UndeclaredDefinitionVariable(col.to_string()));
            }
        }
        Ok(())
    }

    fn declare_defvar(&mut self, column: &str) -> Result<()> {
        if column.is_empty() || column == ONE {
            return Err(Error::Model(format!("invalid definition column `{column}`")));
        }
        if !self.defvars.iter().any(|d| d == column) {
            self.defvars.push(column.to_string());
        }
        let proxy = def_name(column);
        let idx = match self.index_of(&proxy) {
            Some(i) => i,
            None => self.add_latent(&proxy)?,
        };
        self.s.set(idx, idx, Cell::fixed(0.0));
        self.m[idx] = Cell {
            value: 0.0,
            free: false,
            label: Some(proxy),
        };
        Ok(())
    }

    /// Adds one path (or definition-variable declaration) to the model.
    pub fn add_path(&mut self, spec: &PathSpec) -> Result<()> {
        if spec.defn {
            return self.declare_defvar(&spec.from);
        }
        if spec.arrows != 1 && spec.arrows != 2 {
            return Err(Error::InvalidArrows(spec.arrows));
        }
        if spec.to == ONE || (spec.arrows == 2 && spec.from == ONE) {
            return Err(if spec.arrows == 2 {
                Error::TwoHeadedOne
            } else {
                Error::Model("paths cannot point into `one`".into())
            });
        }
        let to = self.require(&spec.to)?;
        let from = if spec.from == ONE {
            None
        } else {
            Some(self.require(&spec.from)?)
        };
        let label = match (&spec.label, spec.free) {
            (Some(l), _) if !l.is_empty() => Some(l.clone()),
            (_, true) => Some(auto_label(&spec.from, &spec.to, spec.arrows)),
            _ => None,
        };
        if let Some(l) = &label {
            self.check_label(l, spec.free)?;
        }
        let value = spec
            .value
            .unwrap_or_else(|| default_value(spec.free, spec.arrows, from, to));
        let cell = Cell {
            value,
            free: spec.free,
            label,
        };
        match (from, spec.arrows) {
            (None, _) => self.m[to] = cell,
            (Some(f), 1) => self.a.set(to, f, cell),
            (Some(f), _) => {
                self.s.set(to, f, cell.clone());
                self.s.set(f, to, cell);
            }
        }
        Ok(())
    }

    /// Serializes the model's non-empty cells back into a path list.
    pub fn to_paths(&self) -> Vec<PathSpec> {
        let mut out: Vec<PathSpec> = self
            .defvars
            .iter()
            .map(|d| PathSpec::defn(d))
            .collect();
        let is_proxy = |i: usize| {
            let name = self.var_name(i);
            def_column(name).is_some_and(|c| self.defvars.iter().any(|d| d == c))
        };
        for (to, from, cell) in self.a.iter() {
            if cell.is_structural() || cell.label.is_some() {
                out.push(cell_path(self.var_name(from), self.var_name(to), 1, cell));
            }
        }
        for (r, c, cell) in self.s.iter() {
            if c < r || (r == c && is_proxy(r)) {
                continue;
            }
            if cell.is_structural() || cell.label.is_some() {
                out.push(cell_path(self.var_name(r), self.var_name(c), 2, cell));
            }
        }
        for (i, cell) in self.m.iter().enumerate() {
            if is_proxy(i) {
                continue;
            }
            if cell.is_structural() || cell.label.is_some() {
                out.push(cell_path(ONE, self.var_name(i), 1, cell));
            }
        }
        out
    }

    /// Visits every cell with its matrix and position; `S` only on and above the diagonal.
    pub fn for_each_cell(&self, mut f: impl FnMut(Matrix, usize, usize, &Cell)) {
        for (r, c, cell) in self.a.iter() {
            f(Matrix::A, r, c, cell);
        }
        for (r, c, cell) in self.s.iter() {
            if r <= c {
                f(Matrix::S, r, c, cell);
            }
        }
        for (i, cell) in self.m.iter().enumerate() {
            f(Matrix::M, i, 0, cell);
        }
    }

    /// Writes `value` into every free cell labelled `label`. Returns the number of cells touched.
    pub fn set_parameter(&mut self, label: &str, value: f64) -> usize {
        let mut touched = 0;
        for cell in self
            .a
            .cells
            .iter_mut()
            .chain(self.s.cells.iter_mut())
            .chain(self.m.iter_mut())
        {
            if cell.free && cell.label.as_deref() == Some(label) {
                cell.value = value;
                touched += 1;
            }
        }
        touched
    }

    /// Fixes every cell labelled `label` at `value`.
    pub fn fix_parameter(&mut self, label: &str, value: f64) -> usize {
        let mut touched = 0;
        for cell in self
            .a
            .cells
            .iter_mut()
            .chain(self.s.cells.iter_mut())
            .chain(self.m.iter_mut())
        {
            if cell.label.as_deref() == Some(label) {
                cell.value = value;
                cell.free = false;
                touched += 1;
            }
        }
        touched
    }

    /// Renames a label everywhere it appears.
    pub fn rename_label(&mut self, from: &str, to: &str) {
        for cell in self
            .a
            .cells
            .iter_mut()
            .chain(self.s.cells.iter_mut())
            .chain(self.m.iter_mut())
        {
            if cell.label.as_deref() == Some(from) {
                cell.label = Some(to.to_string());
            }
        }
    }
}

fn cell_path(from: &str, to: &str, arrows: u8, cell: &Cell) -> PathSpec {
    PathSpec {
        from: from.to_string(),
        to: to.to_string(),
        arrows,
        free: cell.free,
        value: Some(cell.value),
        label: cell.label.clone(),
        defn: false,
    }
}

pub(crate) fn auto_label(from: &str, to: &str, arrows: u8) -> String {
    if arrows == 2 {
        format!("{from}_with_{to}")
    } else if let Some(col) = def_column(from) {
        // A `def_` prefix would read as a definition label.
        format!("b_{col}_to_{to}")
    } else {
        format!("{from}_to_{to}")
    }
}

fn default_value(free: bool, arrows: u8, from: Option<usize>, to: usize) -> f64 {
    match (from, arrows) {
        (None, _) => 0.0,
        (Some(f), 2) if f == to => 1.0,
        (Some(_), 2) => 0.0,
        _ if free => 0.9,
        _ => 1.0,
    }
}

/// Expected manifest means and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Param(usize),
    Def(usize),
}

#[derive(Debug, Clone)]
struct Slot {
    matrix: Matrix,
    row: usize,
    col: usize,
    source: Source,
}

/// A model compiled against a fixed parameter ordering and definition-column ordering.
#[derive(Debug, Clone)]
pub struct MomentProgram {
    n: usize,
    nm: usize,
    a: DMatrix<f64>,
    s: DMatrix<f64>,
    m: DVector<f64>,
    slots: Vec<Slot>,
    topo: Option<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    defvars: Vec<String>,
}

impl MomentProgram {
    /// `params` maps labels to positions in the parameter vector passed to [`evaluate`](Self::evaluate).
    pub fn compile(model: &RamModel, params: &HashMap<String, usize>) -> Result<Self> {
        let n = model.n_vars();
        let nm = model.manifests.len();
        let mut a = DMatrix::zeros(n, n);
        let mut s = DMatrix::zeros(n, n);
        let mut m = DVector::zeros(n);
        let mut slots = Vec::new();
        let mut structural = vec![Vec::new(); n];
        let mut err = None;
        model.for_each_cell(|matrix, row, col, cell| {
            if err.is_some() {
                return;
            }
            match matrix {
                Matrix::A => a[(row, col)] = cell.value,
                Matrix::S => {
                    s[(row, col)] = cell.value;
                    s[(col, row)] = cell.value;
                }
                Matrix::M => m[row] = cell.value,
                Matrix::Thresholds => {}
            }
            if matrix == Matrix::A && cell.is_structural() {
                structural[row].push(col);
            }
            let source = match (&cell.label, cell.free) {
                (Some(l), true) => match params.get(l) {
                    Some(&i) => Some(Source::Param(i)),
                    None => {
                        err = Some(Error::MissingParameter(l.clone()));
                        None
                    }
                },
                (Some(l), false) => def_column(l).and_then(|c| {
                    model
                        .defvars
                        .iter()
                        .position(|d| d == c)
                        .map(Source::Def)
                }),
                (None, true) => {
                    err = Some(Error::UnlabeledFreeCell(format!(
                        "{}[{},{}]",
                        matrix.as_str(),
                        model.var_name(row),
                        model.var_name(col)
                    )));
                    None
                }
                (None, false) => None,
            };
            if let Some(source) = source {
                slots.push(Slot {
                    matrix,
                    row,
                    col,
                    source,
                });
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        let topo = topological_order(&structural);
        Ok(Self {
            n,
            nm,
            a,
            s,
            m,
            slots,
            topo,
            parents: structural,
            defvars: model.defvars.clone(),
        })
    }

    pub fn defvars(&self) -> &[String] {
        &self.defvars
    }

    pub fn has_defvars(&self) -> bool {
        self.slots.iter().any(|s| matches!(s.source, Source::Def(_)))
    }

    /// True when definition values enter only through mean cells, so the covariance is the same
    /// for every row and the mean is affine in the definition values.
    pub fn defs_only_in_means(&self) -> bool {
        self.slots
            .iter()
            .all(|s| s.matrix == Matrix::M || !matches!(s.source, Source::Def(_)))
    }

    pub fn evaluate(&self, theta: &[f64], defvals: &[f64]) -> Result<Moments> {
        let (a, s, m) = self.fill(theta, Some(defvals))?;
        Ok(self.moments(&a, &s, &m)?.0)
    }

    /// Moments with every definition value at zero, plus the `nm x ndef` matrix `G` such that
    /// the row mean is `mu + G d`. Only valid when [`defs_only_in_means`](Self::defs_only_in_means).
    pub fn evaluate_affine(&self, theta: &[f64]) -> Result<(Moments, DMatrix<f64>)> {
        let (a, s, m) = self.fill(theta, None)?;
        let (moments, fb) = self.moments(&a, &s, &m)?;
        let mut g = DMatrix::zeros(self.nm, self.defvars.len());
        for slot in &self.slots {
            if let (Matrix::M, Source::Def(d)) = (slot.matrix, slot.source) {
                for i in 0..self.nm {
                    g[(i, d)] += fb[(i, slot.row)];
                }
            }
        }
        Ok((moments, g))
    }

    fn fill(
        &self,
        theta: &[f64],
        defvals: Option<&[f64]>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
        let mut a = self.a.clone();
        let mut s = self.s.clone();
        let mut m = self.m.clone();
        for slot in &self.slots {
            let v = match (slot.source, defvals) {
                (Source::Param(i), _) => theta[i],
                (Source::Def(_), None) => 0.0,
                (Source::Def(i), Some(d)) => *d
                    .get(i)
                    .ok_or_else(|| Error::MissingDefinitionValue(self.defvars[i].clone()))?,
            };
            match slot.matrix {
                Matrix::A => a[(slot.row, slot.col)] = v,
                Matrix::S => {
                    s[(slot.row, slot.col)] = v;
                    s[(slot.col, slot.row)] = v;
                }
                Matrix::M => m[slot.row] = v,
                Matrix::Thresholds => {}
            }
        }
        Ok((a, s, m))
    }

    fn moments(
        &self,
        a: &DMatrix<f64>,
        s: &DMatrix<f64>,
        m: &DVector<f64>,
    ) -> Result<(Moments, DMatrix<f64>)> {
        let b = match &self.topo {
            Some(order) => self.acyclic_inverse(a, order),
            None => lu_inverse(a)?,
        };
        let fb = b.rows(0, self.nm).into_owned();
        let mu = &fb * m;
        let fbs = &fb * s;
        let mut sigma = DMatrix::zeros(self.nm, self.nm);
        for i in 0..self.nm {
            for j in i..self.nm {
                let v = fbs.row(i).dot(&fb.row(j));
                sigma[(i, j)] = v;
                sigma[(j, i)] = v;
            }
        }
        Ok((Moments { mu, sigma }, fb))
    }

    /// (I - A)^-1 for a structurally acyclic A: B = I + A B, rows filled in topological order.
    fn acyclic_inverse(&self, a: &DMatrix<f64>, order: &[usize]) -> DMatrix<f64> {
        let mut b = DMatrix::<f64>::identity(self.n, self.n);
        for &i in order {
            for &j in &self.parents[i] {
                let coef = a[(i, j)];
                if coef == 0.0 {
                    continue;
                }
                for k in 0..self.n {
                    let bjk = b[(j, k)];
                    if bjk != 0.0 {
                        b[(i, k)] += coef * bjk;
                    }
                }
            }
        }
        b
    }
}

fn lu_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let i_minus_a = DMatrix::<f64>::identity(n, n) - a;
    let lu = i_minus_a.lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() < PIVOT_TOLERANCE) {
        return Err(Error::SingularIMinusA);
    }
    lu.try_inverse().ok_or(Error::SingularIMinusA)
}

/// Parents-before-children order, or `None` if the one-headed structure has a cycle.
fn topological_order(parents: &[Vec<usize>]) -> Option<Vec<usize>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut children = vec![Vec::new(); n];
    for (i, ps) in parents.iter().enumerate() {
        for &j in ps {
            children[j].push(i);
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    ready.reverse();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop() {
        order.push(i);
        for &c in &children[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Expected manifest moments at `theta`, substituting definition values from `defrow`.
pub fn expected_moments(
    model: &RamModel,
    theta: &ParameterVector,
    defrow: Option<&BTreeMap<String, f64>>,
) -> Result<Moments> {
    let index = theta.index();
    let program = MomentProgram::compile(model, &index)?;
    let defvals = model
        .defvars
        .iter()
        .map(|d| {
            defrow
                .and_then(|r| r.get(d).copied())
                .ok_or_else(|| Error::MissingDefinitionValue(d.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    program.evaluate(theta.values(), &defvals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_theta() -> ParameterVector {
        ParameterVector::default()
    }

    #[test]
    fn fixed_path_keeps_label() {
        let mut m = RamModel::new("t", &["x1"], &["icept"]).unwrap();
        m.add_path(&PathSpec::one_headed("icept", "x1").fixed(1.0).label("icept__x1"))
            .unwrap();
        let cell = m.a().get(0, 1);
        assert_eq!(cell.value, 1.0);
        assert!(!cell.free);
        assert_eq!(cell.label.as_deref(), Some("icept__x1"));
    }

    #[test]
    fn defn_creates_proxy_latent() {
        let mut m = RamModel::new("t", &["x1"], &[] as &[&str]).unwrap();
        m.add_path(&PathSpec::defn("varA1")).unwrap();
        assert_eq!(m.defvars(), &["varA1".to_string()]);
        let idx = m.index_of("def_varA1").unwrap();
        assert_eq!(m.s().get(idx, idx).value, 0.0);
        assert_eq!(m.m()[idx].label.as_deref(), Some("def_varA1"));
        assert!(!m.m()[idx].free);
    }

    #[test]
    fn two_headed_twice_is_one_symmetric_cell() {
        let mut m = RamModel::new("t", &["x1", "x2"], &[] as &[&str]).unwrap();
        let p = PathSpec::variance("x1").start(1.0).label("e");
        m.add_path(&p).unwrap();
        let once = m.clone();
        m.add_path(&p).unwrap();
        assert_eq!(m, once);
        m.add_path(&PathSpec::two_headed("x1", "x2").label("c12")).unwrap();
        assert_eq!(m.s().get(0, 1), m.s().get(1, 0));
    }

    #[test]
    fn path_errors() {
        let mut m = RamModel::new("t", &["x1"], &["f"]).unwrap();
        assert!(matches!(
            m.add_path(&PathSpec::one_headed("zz", "x1")),
            Err(Error::UnknownVariable(_))
        ));
        let mut bad = PathSpec::one_headed("f", "x1");
        bad.arrows = 3;
        assert!(matches!(m.add_path(&bad), Err(Error::InvalidArrows(3))));
        assert!(matches!(
            m.add_path(&PathSpec::two_headed("one", "x1")),
            Err(Error::TwoHeadedOne)
        ));
        m.add_path(&PathSpec::defn("age")).unwrap();
        assert!(matches!(
            m.add_path(&PathSpec::one_headed("f", "x1").label("def_age")),
            Err(Error::FreeDefinitionLabel(_))
        ));
        assert!(matches!(
            m.add_path(&PathSpec::one_headed("f", "x1").fixed(0.0).label("def_height")),
            Err(Error::UndeclaredDefinitionVariable(_))
        ));
        assert!(RamModel::new("t", &["one"], &[] as &[&str]).is_err());
        assert!(RamModel::new("t", &["x"], &["x"]).is_err());
    }

    #[test]
    fn default_start_values() {
        let mut m = RamModel::new("t", &["x1", "x2"], &["f"]).unwrap();
        m.add_path(&PathSpec::one_headed("f", "x1")).unwrap();
        m.add_path(&PathSpec::variance("x1")).unwrap();
        m.add_path(&PathSpec::two_headed("x1", "x2")).unwrap();
        m.add_path(&PathSpec::mean("x1")).unwrap();
        assert_eq!(m.a().get(0, 2).value, 0.9);
        assert_eq!(m.a().get(0, 2).label.as_deref(), Some("f_to_x1"));
        assert_eq!(m.s().get(0, 0).value, 1.0);
        assert_eq!(m.s().get(0, 1).value, 0.0);
        assert_eq!(m.m()[0].value, 0.0);
        assert_eq!(m.m()[0].label.as_deref(), Some("one_to_x1"));
    }

    #[test]
    fn identity_moments_for_empty_structure() {
        let mut m = RamModel::new("t", &["x1", "x2", "x3"], &[] as &[&str]).unwrap();
        for v in ["x1", "x2", "x3"] {
            m.add_path(&PathSpec::variance(v).fixed(1.0)).unwrap();
        }
        let mom = expected_moments(&m, &empty_theta(), None).unwrap();
        assert_eq!(mom.mu, DVector::zeros(3));
        assert_eq!(mom.sigma, DMatrix::identity(3, 3));
    }

    #[test]
    fn single_variable_moments() {
        let mut m = RamModel::new("t", &["x"], &[] as &[&str]).unwrap();
        m.add_path(&PathSpec::variance("x").fixed(2.5)).unwrap();
        m.add_path(&PathSpec::mean("x").fixed(1.0)).unwrap();
        let mom = expected_moments(&m, &empty_theta(), None).unwrap();
        assert_eq!(mom.mu[0], 1.0);
        assert_eq!(mom.sigma[(0, 0)], 2.5);
    }

    #[test]
    fn cyclic_structure_uses_lu() {
        let mut m = RamModel::new("t", &["x", "y"], &[] as &[&str]).unwrap();
        m.add_path(&PathSpec::one_headed("x", "y").fixed(0.5)).unwrap();
        m.add_path(&PathSpec::one_headed("y", "x").fixed(0.2)).unwrap();
        m.add_path(&PathSpec::variance("x").fixed(1.0)).unwrap();
        m.add_path(&PathSpec::variance("y").fixed(1.0)).unwrap();
        let mom = expected_moments(&m, &empty_theta(), None).unwrap();
        // (I-A)^-1 = 1/(1-0.1) [[1, .2],[.5, 1]]
        let k = 1.0 / 0.9;
        let b = DMatrix::from_row_slice(2, 2, &[k, 0.2 * k, 0.5 * k, k]);
        let expect = &b * b.transpose();
        assert!((mom.sigma - expect).abs().max() < 1e-14);

        let mut sing = RamModel::new("t", &["x", "y"], &[] as &[&str]).unwrap();
        sing.add_path(&PathSpec::one_headed("x", "y").fixed(1.0)).unwrap();
        sing.add_path(&PathSpec::one_headed("y", "x").fixed(1.0)).unwrap();
        assert!(matches!(
            expected_moments(&sing, &empty_theta(), None),
            Err(Error::SingularIMinusA)
        ));
    }

    #[test]
    fn missing_defrow_is_an_error() {
        let mut m = RamModel::new("t", &["x"], &[] as &[&str]).unwrap();
        m.add_path(&PathSpec::defn("age")).unwrap();
        m.add_path(&PathSpec::one_headed("def_age", "x").fixed(0.5)).unwrap();
        assert!(matches!(
            expected_moments(&m, &empty_theta(), None),
            Err(Error::MissingDefinitionValue(_))
        ));
        let row: BTreeMap<String, f64> = [("age".to_string(), 4.0)].into();
        let mom = expected_moments(&m, &empty_theta(), Some(&row)).unwrap();
        assert_eq!(mom.mu[0], 2.0);
        assert_eq!(mom.sigma[(0, 0)], 0.0);
    }

    #[test]
    fn def_label_substitutes_into_s_and_a() {
        let mut m = RamModel::new("t", &["x", "y"], &["f"]).unwrap();
        m.add_path(&PathSpec::defn("w")).unwrap();
        m.add_path(&PathSpec::variance("f").fixed(0.0).label("def_w")).unwrap();
        m.add_path(&PathSpec::one_headed("f", "x").fixed(0.0).label("def_w")).unwrap();
        m.add_path(&PathSpec::one_headed("f", "y").fixed(1.0)).unwrap();
        let row: BTreeMap<String, f64> = [("w".to_string(), 3.0)].into();
        let mom = expected_moments(&m, &empty_theta(), Some(&row)).unwrap();
        assert_eq!(mom.sigma[(0, 0)], 27.0);
        assert_eq!(mom.sigma[(0, 1)], 9.0);
        assert_eq!(mom.sigma[(1, 1)], 3.0);
    }

    #[test]
    fn to_paths_rebuilds_same_model() {
        let mut m = RamModel::new("t", &["x1", "x2"], &["f"]).unwrap();
        m.add_path(&PathSpec::defn("age")).unwrap();
        m.add_path(&PathSpec::one_headed("f", "x1").fixed(1.0)).unwrap();
        m.add_path(&PathSpec::one_headed("f", "x2").label("l2")).unwrap();
        m.add_path(&PathSpec::one_headed("def_age", "x1").label("b_age")).unwrap();
        m.add_path(&PathSpec::variance("f")).unwrap();
        m.add_path(&PathSpec::mean("x2").start(0.3)).unwrap();
        let latents: Vec<String> = m.latents().iter().filter(|l| !l.starts_with("def_")).cloned().collect();
        let rebuilt = RamModel::from_paths("t", m.manifests(), &latents, &m.to_paths()).unwrap();
        assert_eq!(rebuilt, m);
    }
}
