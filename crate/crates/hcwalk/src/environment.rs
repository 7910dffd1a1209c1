//! High-contrast periodic environments: ingestion, validation, and the site
//! partition / jump-table bookkeeping every other module builds on.
//!
//! An environment consists of a torus geometry, a partition of the cells into
//! astral sites and fast components, and a table of jump weights `(p0, v)`
//! per (cell, offset). The one-step law at contrast `eps` is
//! `p = p0 + eps^2 * v`; diagonals are always derived from row sums and never
//! read from the input document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::connectivity::{self, LiftVerdict};
use crate::geometry::TorusGeometry;
use crate::linalg::Matrix;

/// Absolute tolerance for all weight comparisons in validation.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Default ceiling for the admissible contrast parameter.
pub const DEFAULT_EPS_CEILING: f64 = 1.0;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation failed [{check}]: {detail}")]
    Validation { check: String, detail: String },
}

// ---------------------------------------------------------------------------
// Input document
// ---------------------------------------------------------------------------

/// One site of the periodicity cell in the input document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteSpec {
    pub coord: Vec<i64>,
    /// `"astral"` or `"fast:<i>"` with 1-based component index.
    pub class: String,
}

/// One stored jump entry in the input document. Both directions of every
/// jump must be listed; symmetry is validated, not assumed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub from: Vec<i64>,
    pub offset: Vec<i64>,
    pub p0: f64,
    pub v: f64,
}

/// The environment file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    pub dim: usize,
    pub period: Vec<i64>,
    pub sites: Vec<SiteSpec>,
    pub edges: Vec<EdgeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_ceiling: Option<f64>,
    /// Optional declared range bound; when present every offset must satisfy
    /// `|offset| <= c1`. When absent the bound is derived from the entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<i64>,
}

impl EnvironmentSpec {
    pub fn new(period: Vec<i64>) -> Self {
        EnvironmentSpec {
            dim: period.len(),
            period,
            sites: Vec::new(),
            edges: Vec::new(),
            eps_ceiling: None,
            c1: None,
        }
    }

    pub fn site(mut self, coord: &[i64], class: &str) -> Self {
        self.sites.push(SiteSpec {
            coord: coord.to_vec(),
            class: class.to_string(),
        });
        self
    }

    pub fn edge(mut self, from: &[i64], offset: &[i64], p0: f64, v: f64) -> Self {
        self.edges.push(EdgeSpec {
            from: from.to_vec(),
            offset: offset.to_vec(),
            p0,
            v,
        });
        self
    }

    /// Add an entry together with its reverse-direction partner.
    pub fn symmetric_edge(mut self, from: &[i64], offset: &[i64], p0: f64, v: f64) -> Self {
        let to: Vec<i64> = from
            .iter()
            .zip(offset)
            .zip(&self.period)
            .map(|((&f, &o), &p)| (f + o).rem_euclid(p))
            .collect();
        let back: Vec<i64> = offset.iter().map(|&o| -o).collect();
        self = self.edge(from, offset, p0, v);
        self.edge(&to, &back, p0, v)
    }
}

// ---------------------------------------------------------------------------
// Validated environment
// ---------------------------------------------------------------------------

/// Class of a torus cell: either the j-th astral site or a cell of the i-th
/// fast component (both 0-based internally).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SiteClass {
    Astral(usize),
    Fast(usize),
}

/// Component labels enumerate fast components first, then astral sites:
/// `0..n_fast` are the fast components in file order, `n_fast..n_fast+n_astral`
/// are the astral sites in cell order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SitePartition {
    pub n_fast: usize,
    pub n_astral: usize,
    /// Per cell: the component label.
    pub label_of_cell: Vec<usize>,
    pub class_of_cell: Vec<SiteClass>,
    /// Per fast component: its cells in increasing cell-index order.
    pub component_cells: Vec<Vec<usize>>,
    /// Per cell of a fast component: its index within `component_cells`.
    pub local_index: Vec<usize>,
    /// Per astral ordinal: the cell index.
    pub astral_cells: Vec<usize>,
}

impl SitePartition {
    pub fn n_labels(&self) -> usize {
        self.n_fast + self.n_astral
    }

    pub fn is_fast_label(&self, label: usize) -> bool {
        label < self.n_fast
    }

    pub fn label_name(&self, label: usize) -> String {
        if label < self.n_fast {
            format!("fast:{}", label + 1)
        } else {
            format!("astral:{}", label - self.n_fast + 1)
        }
    }
}

/// One stored jump: `offset` leads from the owning cell to `target` (its
/// canonical torus cell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpEntry {
    pub offset: Vec<i64>,
    pub target: usize,
    pub p0: f64,
    pub v: f64,
}

/// A fully validated high-contrast periodic environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    geometry: TorusGeometry,
    partition: SitePartition,
    rows: Vec<Vec<JumpEntry>>,
    p0_diag: Vec<f64>,
    v_diag: Vec<f64>,
    c1: i64,
    eps_max: f64,
}

impl Environment {
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let spec: EnvironmentSpec =
            serde_json::from_str(text).map_err(|e| EnvError::Schema(e.to_string()))?;
        Self::from_spec(&spec)
    }

    /// Validate a document and build the environment. The error names the
    /// first failing check.
    pub fn from_spec(spec: &EnvironmentSpec) -> Result<Self, EnvError> {
        let report = validate_spec(spec);
        if let Some(fail) = report.first_failure() {
            return Err(EnvError::Validation {
                check: fail.name.to_string(),
                detail: fail.detail.clone(),
            });
        }
        Ok(build_unchecked(spec).expect("validated spec must build"))
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn partition(&self) -> &SitePartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn n_labels(&self) -> usize {
        self.partition.n_labels()
    }

    /// Stored jump entries of a cell (diagonal excluded).
    pub fn row(&self, cell: usize) -> &[JumpEntry] {
        &self.rows[cell]
    }

    /// Derived diagonal `p0(y, y) = 1 - sum of off-diagonal p0`.
    pub fn p0_diag(&self, cell: usize) -> f64 {
        self.p0_diag[cell]
    }

    /// Derived diagonal `v(y, y) = -sum of off-diagonal v`.
    pub fn v_diag(&self, cell: usize) -> f64 {
        self.v_diag[cell]
    }

    pub fn c1(&self) -> i64 {
        self.c1
    }

    /// Largest contrast parameter for which every entry of `P0 + eps^2 V`
    /// stays in [0, 1] (clamped to the configured ceiling).
    pub fn eps_max(&self) -> f64 {
        self.eps_max
    }

    /// Component label of a lattice point (periodic reduction then lookup).
    pub fn component_index(&self, x: &[i64]) -> usize {
        self.partition.label_of_cell[self.geometry.cell_index(x)]
    }

    pub fn class_of_cell(&self, cell: usize) -> SiteClass {
        self.partition.class_of_cell[cell]
    }

    /// Canonical coordinate of the designated base fast cell (the fast cell
    /// with the smallest cell index). Used as the default start state.
    pub fn base_cell(&self) -> Vec<i64> {
        let cell = (0..self.geometry.cell_count())
            .find(|&c| matches!(self.partition.class_of_cell[c], SiteClass::Fast(_)))
            .expect("validated environment has a fast cell");
        self.geometry.cell_coord(cell)
    }

    /// Total `v`-weight from `cell` into the periodic orbit of `label`.
    pub fn coupling_to_label(&self, cell: usize, label: usize) -> f64 {
        self.rows[cell]
            .iter()
            .filter(|e| self.partition.label_of_cell[e.target] == label)
            .map(|e| e.v)
            .sum()
    }

    /// The four-block transition intensity table between component labels:
    /// rows from fast components are averaged over the component, rows from
    /// astral sites are plain sums. Diagonal entries are zero.
    pub fn alpha_table(&self) -> Matrix {
        let k = self.n_labels();
        let mut alpha = Matrix::zeros(k);
        for from in 0..k {
            let (cells, weight): (Vec<usize>, f64) = if self.partition.is_fast_label(from) {
                let cells = self.partition.component_cells[from].clone();
                let w = 1.0 / cells.len() as f64;
                (cells, w)
            } else {
                (vec![self.partition.astral_cells[from - self.partition.n_fast]], 1.0)
            };
            for to in 0..k {
                if to == from {
                    continue;
                }
                let total: f64 = cells
                    .iter()
                    .map(|&c| self.coupling_to_label(c, to))
                    .sum();
                alpha[(from, to)] = weight * total;
            }
        }
        alpha
    }

    /// Verdict of the periodic-lift analysis for each fast component.
    pub fn lift_connectivity(&self) -> Vec<LiftVerdict> {
        connectivity::lift_connectivity(&self.geometry, &self.partition, &self.rows)
    }

    /// Test-scaffolding constructor that skips validation. Deliberately
    /// bypasses every invariant; only for exercising degenerate inputs.
    #[doc(hidden)]
    pub fn from_spec_unchecked(spec: &EnvironmentSpec) -> Result<Self, EnvError> {
        build_unchecked(spec)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.status == CheckStatus::Fail)
    }
}

/// Names of all validation checks, in evaluation order.
pub const CHECK_NAMES: &[&str] = &[
    "geometry",
    "partition_cover",
    "partition_classes",
    "offset_range",
    "edges_unique",
    "symmetry",
    "p0_range",
    "row_sums",
    "v_sign",
    "p0_block",
    "eps_positive",
    "lift_connectivity",
    "irreducibility",
    "rates",
];

struct Checker {
    report: ValidationReport,
    failed: bool,
}

impl Checker {
    fn new() -> Self {
        Checker {
            report: ValidationReport {
                checks: Vec::new(),
                warnings: Vec::new(),
            },
            failed: false,
        }
    }

    fn record(&mut self, name: &'static str, result: Result<String, String>) {
        let check = match result {
            Ok(detail) => CheckResult {
                name,
                status: CheckStatus::Pass,
                detail,
            },
            Err(detail) => {
                self.failed = true;
                CheckResult {
                    name,
                    status: CheckStatus::Fail,
                    detail,
                }
            }
        };
        self.report.checks.push(check);
    }

    fn skip(&mut self, name: &'static str) {
        self.report.checks.push(CheckResult {
            name,
            status: CheckStatus::Skipped,
            detail: "not evaluated (earlier check failed)".into(),
        });
    }
}

fn fmt_coord(c: &[i64]) -> String {
    let parts: Vec<String> = c.iter().map(|x| x.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Run every validation check on a document, collecting a named pass/fail
/// report. Checks that depend on failed prerequisites are marked skipped.
pub fn validate_spec(spec: &EnvironmentSpec) -> ValidationReport {
    let mut ck = Checker::new();

    // geometry
    let geometry = match check_geometry(spec) {
        Ok(g) => {
            ck.record("geometry", Ok(format!("{} cells", g.cell_count())));
            Some(g)
        }
        Err(e) => {
            ck.record("geometry", Err(e));
            None
        }
    };
    let Some(geometry) = geometry else {
        for name in &CHECK_NAMES[1..] {
            ck.skip(name);
        }
        return ck.report;
    };

    // partition_cover + partition_classes
    let classes = check_partition(spec, &geometry, &mut ck);

    // offset_range, edges_unique, symmetry, p0_range
    let c1 = check_offsets(spec, &geometry, &mut ck);
    check_edges_unique(spec, &geometry, &mut ck);
    check_symmetry(spec, &geometry, &mut ck);
    check_p0_entry_range(spec, &mut ck);

    if ck.failed {
        for name in &["row_sums", "v_sign", "p0_block", "eps_positive", "lift_connectivity", "irreducibility", "rates"] {
            ck.skip(name);
        }
        return ck.report;
    }

    let classes = classes.expect("partition checks passed");
    let env = build_from_parts(spec, geometry, classes, c1.expect("offset checks passed"));

    check_row_sums(&env, &mut ck);
    check_v_sign(&env, &mut ck);
    check_p0_block(&env, &mut ck);
    if ck.failed {
        for name in &["eps_positive", "lift_connectivity", "irreducibility", "rates"] {
            ck.skip(name);
        }
        return ck.report;
    }

    // eps_positive
    if env.eps_max > 0.0 {
        ck.record("eps_positive", Ok(format!("eps_max = {}", env.eps_max)));
    } else {
        ck.record(
            "eps_positive",
            Err("no positive contrast keeps all entries in [0,1]".into()),
        );
    }

    // lift_connectivity
    let verdicts = env.lift_connectivity();
    let bad: Vec<String> = verdicts
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != LiftVerdict::ConnectedUnbounded)
        .map(|(i, v)| format!("fast:{} is {:?}", i + 1, v))
        .collect();
    if bad.is_empty() {
        ck.record(
            "lift_connectivity",
            Ok("every fast lift is connected and unbounded".into()),
        );
    } else {
        ck.record("lift_connectivity", Err(bad.join("; ")));
    }

    // irreducibility of the full walk (p0 or v edges)
    match connectivity::walk_irreducible(&env.geometry, &env.rows) {
        true => ck.record("irreducibility", Ok("full walk is irreducible".into())),
        false => ck.record(
            "irreducibility",
            Err("the walk with p0/v edges is not irreducible".into()),
        ),
    }

    // rates
    check_rates(&env, &mut ck);

    ck.report
}

fn check_geometry(spec: &EnvironmentSpec) -> Result<TorusGeometry, String> {
    if spec.dim == 0 {
        return Err("dim must be >= 1".into());
    }
    if spec.dim != spec.period.len() {
        return Err(format!(
            "dim = {} but period has {} entries",
            spec.dim,
            spec.period.len()
        ));
    }
    TorusGeometry::new(spec.period.clone())
}

fn check_partition(
    spec: &EnvironmentSpec,
    geometry: &TorusGeometry,
    ck: &mut Checker,
) -> Option<Vec<SiteClass>> {
    // cover: every cell listed exactly once
    let mut seen: Vec<Option<usize>> = vec![None; geometry.cell_count()];
    let mut cover_err = None;
    for (i, site) in spec.sites.iter().enumerate() {
        if site.coord.len() != geometry.dim() {
            cover_err = Some(format!(
                "site {} coord {} has wrong dimension",
                i,
                fmt_coord(&site.coord)
            ));
            break;
        }
        let cell = geometry.cell_index(&site.coord);
        if let Some(prev) = seen[cell] {
            cover_err = Some(format!(
                "sites {} and {} both name cell {}",
                prev,
                i,
                fmt_coord(&geometry.cell_coord(cell))
            ));
            break;
        }
        seen[cell] = Some(i);
    }
    if cover_err.is_none() {
        if let Some(cell) = seen.iter().position(Option::is_none) {
            cover_err = Some(format!(
                "cell {} is not listed in sites",
                fmt_coord(&geometry.cell_coord(cell))
            ));
        }
    }
    match cover_err {
        None => ck.record(
            "partition_cover",
            Ok(format!("{} sites cover the torus", spec.sites.len())),
        ),
        Some(e) => {
            ck.record("partition_cover", Err(e));
            ck.skip("partition_classes");
            return None;
        }
    }

    // classes: parse, fast indices contiguous, A and B nonempty
    let mut class_of_cell = vec![SiteClass::Astral(usize::MAX); geometry.cell_count()];
    let mut fast_indices: Vec<usize> = Vec::new();
    let mut astral_cells: Vec<usize> = Vec::new();
    for site in &spec.sites {
        let cell = geometry.cell_index(&site.coord);
        if site.class == "astral" {
            class_of_cell[cell] = SiteClass::Astral(0); // ordinal assigned below
            astral_cells.push(cell);
        } else if let Some(idx) = site.class.strip_prefix("fast:") {
            match idx.parse::<usize>() {
                Ok(i) if i >= 1 => {
                    class_of_cell[cell] = SiteClass::Fast(i - 1);
                    fast_indices.push(i - 1);
                }
                _ => {
                    ck.record(
                        "partition_classes",
                        Err(format!(
                            "site {} has malformed class {:?}",
                            fmt_coord(&site.coord),
                            site.class
                        )),
                    );
                    return None;
                }
            }
        } else {
            ck.record(
                "partition_classes",
                Err(format!(
                    "site {} has unknown class {:?}",
                    fmt_coord(&site.coord),
                    site.class
                )),
            );
            return None;
        }
    }
    if astral_cells.is_empty() {
        ck.record("partition_classes", Err("no astral sites (A is empty)".into()));
        return None;
    }
    if fast_indices.is_empty() {
        ck.record("partition_classes", Err("no fast cells (B is empty)".into()));
        return None;
    }
    let n_fast = fast_indices.iter().max().unwrap() + 1;
    for i in 0..n_fast {
        if !fast_indices.contains(&i) {
            ck.record(
                "partition_classes",
                Err(format!("fast component {} has no cells", i + 1)),
            );
            return None;
        }
    }
    // assign astral ordinals in cell order
    astral_cells.sort_unstable();
    for (j, &cell) in astral_cells.iter().enumerate() {
        class_of_cell[cell] = SiteClass::Astral(j);
    }
    ck.record(
        "partition_classes",
        Ok(format!("{} fast components, {} astral sites", n_fast, astral_cells.len())),
    );
    Some(class_of_cell)
}

fn check_offsets(
    spec: &EnvironmentSpec,
    geometry: &TorusGeometry,
    ck: &mut Checker,
) -> Option<i64> {
    let mut max_norm_sq: i64 = 0;
    for e in &spec.edges {
        if e.from.len() != geometry.dim() || e.offset.len() != geometry.dim() {
            ck.record(
                "offset_range",
                Err(format!(
                    "edge from {} offset {} has wrong dimension",
                    fmt_coord(&e.from),
                    fmt_coord(&e.offset)
                )),
            );
            return None;
        }
        let norm_sq = TorusGeometry::offset_norm_sq(&e.offset);
        if norm_sq == 0 {
            ck.record(
                "offset_range",
                Err(format!("zero offset at cell {}", fmt_coord(&e.from))),
            );
            return None;
        }
        if let Some(c1) = spec.c1 {
            if norm_sq > c1 * c1 {
                ck.record(
                    "offset_range",
                    Err(format!(
                        "offset {} at cell {} exceeds declared range bound c1 = {}",
                        fmt_coord(&e.offset),
                        fmt_coord(&e.from),
                        c1
                    )),
                );
                return None;
            }
        }
        max_norm_sq = max_norm_sq.max(norm_sq);
    }
    let c1 = spec
        .c1
        .unwrap_or_else(|| (max_norm_sq as f64).sqrt().ceil() as i64);
    ck.record("offset_range", Ok(format!("range bound c1 = {}", c1)));
    Some(c1.max(1))
}

fn check_edges_unique(spec: &EnvironmentSpec, geometry: &TorusGeometry, ck: &mut Checker) {
    let mut seen: BTreeMap<(usize, Vec<i64>), usize> = BTreeMap::new();
    for (i, e) in spec.edges.iter().enumerate() {
        if e.from.len() != geometry.dim() {
            return; // offset_range already failed
        }
        let cell = geometry.cell_index(&e.from);
        if let Some(prev) = seen.insert((cell, e.offset.clone()), i) {
            ck.record(
                "edges_unique",
                Err(format!(
                    "edges {} and {} both store (cell {}, offset {})",
                    prev,
                    i,
                    fmt_coord(&geometry.cell_coord(cell)),
                    fmt_coord(&e.offset)
                )),
            );
            return;
        }
    }
    ck.record("edges_unique", Ok(format!("{} entries", spec.edges.len())));
}

fn check_symmetry(spec: &EnvironmentSpec, geometry: &TorusGeometry, ck: &mut Checker) {
    let mut table: BTreeMap<(usize, Vec<i64>), (f64, f64)> = BTreeMap::new();
    for e in &spec.edges {
        if e.from.len() != geometry.dim() || e.offset.len() != geometry.dim() {
            return;
        }
        table.insert((geometry.cell_index(&e.from), e.offset.clone()), (e.p0, e.v));
    }
    for ((cell, offset), &(p0, v)) in &table {
        let coord = geometry.cell_coord(*cell);
        let target: Vec<i64> = coord.iter().zip(offset).map(|(c, o)| c + o).collect();
        let back: Vec<i64> = offset.iter().map(|o| -o).collect();
        let key = (geometry.cell_index(&target), back);
        match table.get(&key) {
            None => {
                ck.record(
                    "symmetry",
                    Err(format!(
                        "entry (cell {}, offset {}) has no reverse entry",
                        fmt_coord(&coord),
                        fmt_coord(offset)
                    )),
                );
                return;
            }
            Some(&(p0_back, v_back)) => {
                if (p0 - p0_back).abs() > WEIGHT_TOL || (v - v_back).abs() > WEIGHT_TOL {
                    ck.record(
                        "symmetry",
                        Err(format!(
                            "symmetry violation at (cell {}, offset {}): p0 {} vs {}, v {} vs {}",
                            fmt_coord(&coord),
                            fmt_coord(offset),
                            p0,
                            p0_back,
                            v,
                            v_back
                        )),
                    );
                    return;
                }
            }
        }
    }
    ck.record("symmetry", Ok("all stored pairs are symmetric".into()));
}

fn check_p0_entry_range(spec: &EnvironmentSpec, ck: &mut Checker) {
    for e in &spec.edges {
        if !(-WEIGHT_TOL..=1.0 + WEIGHT_TOL).contains(&e.p0) {
            ck.record(
                "p0_range",
                Err(format!(
                    "p0 = {} at (cell {}, offset {}) is outside [0,1]",
                    e.p0,
                    fmt_coord(&e.from),
                    fmt_coord(&e.offset)
                )),
            );
            return;
        }
    }
    ck.record("p0_range", Ok("all p0 entries in [0,1]".into()));
}

fn check_row_sums(env: &Environment, ck: &mut Checker) {
    for cell in 0..env.geometry.cell_count() {
        let diag = env.p0_diag[cell];
        if !(-WEIGHT_TOL..=1.0 + WEIGHT_TOL).contains(&diag) {
            ck.record(
                "row_sums",
                Err(format!(
                    "diagonal p0({c},{c}) = {diag} is outside [0,1]",
                    c = fmt_coord(&env.geometry.cell_coord(cell)),
                )),
            );
            return;
        }
    }
    ck.record("row_sums", Ok("all derived diagonals in [0,1]".into()));
}

fn check_v_sign(env: &Environment, ck: &mut Checker) {
    for cell in 0..env.geometry.cell_count() {
        for e in &env.rows[cell] {
            if e.p0 <= WEIGHT_TOL && e.v < -WEIGHT_TOL {
                ck.record(
                    "v_sign",
                    Err(format!(
                        "v = {} at (cell {}, offset {}) is negative where p0 = 0",
                        e.v,
                        fmt_coord(&env.geometry.cell_coord(cell)),
                        fmt_coord(&e.offset)
                    )),
                );
                return;
            }
        }
    }
    ck.record("v_sign", Ok("v >= 0 wherever p0 = 0".into()));
}

fn check_p0_block(env: &Environment, ck: &mut Checker) {
    for cell in 0..env.geometry.cell_count() {
        let from_class = env.partition.class_of_cell[cell];
        for e in &env.rows[cell] {
            if e.p0 <= WEIGHT_TOL {
                continue;
            }
            let to_class = env.partition.class_of_cell[e.target];
            let violation = match (from_class, to_class) {
                (SiteClass::Astral(_), _) | (_, SiteClass::Astral(_)) => true,
                (SiteClass::Fast(i), SiteClass::Fast(j)) => i != j,
            };
            if violation {
                ck.record(
                    "p0_block",
                    Err(format!(
                        "p0 = {} at (cell {}, offset {}) couples {} to {}",
                        e.p0,
                        fmt_coord(&env.geometry.cell_coord(cell)),
                        fmt_coord(&e.offset),
                        env.partition.label_name(env.partition.label_of_cell[cell]),
                        env.partition.label_name(env.partition.label_of_cell[e.target]),
                    )),
                );
                return;
            }
        }
    }
    ck.record(
        "p0_block",
        Ok("p0 is block diagonal over fast components".into()),
    );
}

fn check_rates(env: &Environment, ck: &mut Checker) {
    let alpha = env.alpha_table();
    let k = env.n_labels();
    for from in 0..k {
        let mut lambda = 0.0;
        for to in 0..k {
            if alpha[(from, to)] < -WEIGHT_TOL {
                ck.record(
                    "rates",
                    Err(format!(
                        "negative intensity alpha[{} -> {}] = {}",
                        env.partition.label_name(from),
                        env.partition.label_name(to),
                        alpha[(from, to)]
                    )),
                );
                return;
            }
            lambda += alpha[(from, to)];
        }
        if lambda <= WEIGHT_TOL {
            ck.record(
                "rates",
                Err(format!(
                    "lambda({}) = 0: the label never jumps",
                    env.partition.label_name(from)
                )),
            );
            return;
        }
    }
    // flag structurally-zero couplings (legitimate, but the jump chain may be
    // reducible)
    for from in 0..k {
        for to in 0..k {
            if from != to && alpha[(from, to)].abs() <= WEIGHT_TOL {
                ck.report.warnings.push(format!(
                    "alpha[{} -> {}] = 0",
                    env.partition.label_name(from),
                    env.partition.label_name(to)
                ));
            }
        }
    }
    ck.record("rates", Ok("all intensities nonnegative, lambda > 0".into()));
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

fn build_unchecked(spec: &EnvironmentSpec) -> Result<Environment, EnvError> {
    let geometry = check_geometry(spec).map_err(EnvError::Schema)?;
    let mut classes = vec![SiteClass::Astral(usize::MAX); geometry.cell_count()];
    let mut astral_cells = Vec::new();
    for site in &spec.sites {
        let cell = geometry.cell_index(&site.coord);
        if site.class == "astral" {
            astral_cells.push(cell);
            classes[cell] = SiteClass::Astral(0);
        } else if let Some(idx) = site.class.strip_prefix("fast:") {
            let i: usize = idx
                .parse()
                .ok()
                .and_then(|i: usize| i.checked_sub(1))
                .ok_or_else(|| EnvError::Schema(format!("bad class {:?}", site.class)))?;
            classes[cell] = SiteClass::Fast(i);
        } else {
            return Err(EnvError::Schema(format!("bad class {:?}", site.class)));
        }
    }
    astral_cells.sort_unstable();
    for (j, &cell) in astral_cells.iter().enumerate() {
        classes[cell] = SiteClass::Astral(j);
    }
    let c1 = spec.c1.unwrap_or_else(|| {
        let m = spec
            .edges
            .iter()
            .map(|e| TorusGeometry::offset_norm_sq(&e.offset))
            .max()
            .unwrap_or(1);
        (m as f64).sqrt().ceil() as i64
    });
    Ok(build_from_parts(spec, geometry, classes, c1.max(1)))
}

fn build_from_parts(
    spec: &EnvironmentSpec,
    geometry: TorusGeometry,
    class_of_cell: Vec<SiteClass>,
    c1: i64,
) -> Environment {
    let cell_count = geometry.cell_count();

    let n_fast = class_of_cell
        .iter()
        .filter_map(|c| match c {
            SiteClass::Fast(i) => Some(i + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut component_cells = vec![Vec::new(); n_fast];
    let mut astral_cells = Vec::new();
    for (cell, class) in class_of_cell.iter().enumerate() {
        match class {
            SiteClass::Fast(i) => component_cells[*i].push(cell),
            SiteClass::Astral(_) => astral_cells.push(cell),
        }
    }
    let n_astral = astral_cells.len();
    let mut label_of_cell = vec![0usize; cell_count];
    let mut local_index = vec![0usize; cell_count];
    for (i, cells) in component_cells.iter().enumerate() {
        for (local, &cell) in cells.iter().enumerate() {
            label_of_cell[cell] = i;
            local_index[cell] = local;
        }
    }
    for (j, &cell) in astral_cells.iter().enumerate() {
        label_of_cell[cell] = n_fast + j;
        local_index[cell] = 0;
    }
    let partition = SitePartition {
        n_fast,
        n_astral,
        label_of_cell,
        class_of_cell,
        component_cells,
        local_index,
        astral_cells,
    };

    let mut rows: Vec<Vec<JumpEntry>> = vec![Vec::new(); cell_count];
    for e in &spec.edges {
        let cell = geometry.cell_index(&e.from);
        let target_coord: Vec<i64> = geometry
            .cell_coord(cell)
            .iter()
            .zip(&e.offset)
            .map(|(c, o)| c + o)
            .collect();
        let target = geometry.cell_index(&target_coord);
        rows[cell].push(JumpEntry {
            offset: e.offset.clone(),
            target,
            p0: e.p0,
            v: e.v,
        });
    }
    for row in &mut rows {
        row.sort_by(|a, b| a.offset.cmp(&b.offset));
    }

    let p0_diag: Vec<f64> = rows
        .iter()
        .map(|row| 1.0 - row.iter().map(|e| e.p0).sum::<f64>())
        .collect();
    let v_diag: Vec<f64> = rows
        .iter()
        .map(|row| -row.iter().map(|e| e.v).sum::<f64>())
        .collect();

    let ceiling = spec.eps_ceiling.unwrap_or(DEFAULT_EPS_CEILING);
    let mut eps_sq = ceiling * ceiling;
    {
        let mut visit = |p0: f64, v: f64| {
            if v < -WEIGHT_TOL {
                eps_sq = eps_sq.min(p0.max(0.0) / -v);
            } else if v > WEIGHT_TOL {
                eps_sq = eps_sq.min((1.0 - p0).max(0.0) / v);
            }
        };
        for (cell, row) in rows.iter().enumerate() {
            for e in row {
                visit(e.p0, e.v);
            }
            visit(p0_diag[cell], v_diag[cell]);
        }
    }
    let eps_max = eps_sq.max(0.0).sqrt();

    Environment {
        geometry,
        partition,
        rows,
        p0_diag,
        v_diag,
        c1,
        eps_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn one_dimensional_example_loads() {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        assert_eq!(env.dim(), 1);
        assert_eq!(env.partition().n_fast, 1);
        assert_eq!(env.partition().n_astral, 1);
        assert_eq!(env.c1(), 2);
        assert!((env.eps_max() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(env.base_cell(), vec![0]);
        // derived diagonals
        assert!((env.p0_diag(0) - 0.0).abs() < 1e-15);
        assert!((env.v_diag(0) - 0.0).abs() < 1e-15);
        assert!((env.p0_diag(1) - 1.0).abs() < 1e-15);
        assert!((env.v_diag(1) + 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetry_violation_is_named() {
        // v(0,+1) = 1 while the stored reverse entry carries v = 2
        let spec = EnvironmentSpec::new(vec![2])
            .site(&[0], "fast:1")
            .site(&[1], "astral")
            .symmetric_edge(&[0], &[2], 0.5, -1.0)
            .edge(&[0], &[1], 0.0, 1.0)
            .edge(&[1], &[-1], 0.0, 2.0)
            .symmetric_edge(&[1], &[1], 0.0, 1.0);
        let err = Environment::from_spec(&spec).unwrap_err();
        match err {
            EnvError::Validation { check, detail } => {
                assert_eq!(check, "symmetry");
                assert!(detail.contains("(0)"), "detail should name the cell: {detail}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_row_sum_is_named() {
        // p0(0,+2) = p0(0,-2) = 0.7 makes the diagonal p0(0,0) = -0.4
        let spec = EnvironmentSpec::new(vec![2])
            .site(&[0], "fast:1")
            .site(&[1], "astral")
            .edge(&[0], &[2], 0.7, 0.0)
            .edge(&[0], &[-2], 0.7, 0.0)
            .symmetric_edge(&[0], &[1], 0.0, 1.0)
            .symmetric_edge(&[1], &[1], 0.0, 1.0);
        let err = Environment::from_spec(&spec).unwrap_err();
        match err {
            EnvError::Validation { check, detail } => {
                assert_eq!(check, "row_sums");
                assert!(detail.contains("outside [0,1]"), "detail: {detail}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_diagonal_rejected() {
        // the 1-d example without the compensating negative v on the fast
        // links: diagonal v(0,0) = -2 with p0(0,0) = 0 forces eps_max = 0
        let spec = EnvironmentSpec::new(vec![2])
            .site(&[0], "fast:1")
            .site(&[1], "astral")
            .symmetric_edge(&[0], &[2], 0.5, 0.0)
            .symmetric_edge(&[0], &[1], 0.0, 1.0)
            .symmetric_edge(&[1], &[1], 0.0, 1.0);
        let err = Environment::from_spec(&spec).unwrap_err();
        match err {
            EnvError::Validation { check, .. } => assert_eq!(check, "eps_positive"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn component_index_reduces_periodically() {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        assert_eq!(env.component_index(&[4]), 0);
        assert_eq!(env.component_index(&[-3]), 1);
        assert_eq!(env.component_index(&[0]), env.component_index(&[10]));
    }

    #[test]
    fn alpha_table_one_dimensional() {
        let env = Environment::from_spec(&presets::one_dimensional()).unwrap();
        let alpha = env.alpha_table();
        assert!((alpha[(0, 1)] - 2.0).abs() < 1e-14);
        assert!((alpha[(1, 0)] - 2.0).abs() < 1e-14);
        assert_eq!(alpha[(0, 0)], 0.0);
        assert_eq!(alpha[(1, 1)], 0.0);
    }
}
