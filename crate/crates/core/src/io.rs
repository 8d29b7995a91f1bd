//! JSON problem files. Complex numbers are `[re, im]` pairs and matrices
//! are arrays of rows.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::greens::KernelTable;
use crate::model::{Atom, GapDensity, SystemSpec};
use crate::propagate::RightHandSide;
use crate::{CMat, CVec, C64};

type JsonMatrix = Vec<Vec<[f64; 2]>>;
type JsonVector = Vec<[f64; 2]>;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AtomFile {
    x: f64,
    dq: JsonMatrix,
    dw: JsonMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GapFile {
    #[serde(rename = "Q")]
    q: JsonMatrix,
    #[serde(rename = "W")]
    w: JsonMatrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RhsFile {
    gaps: Vec<JsonVector>,
    atoms: Vec<JsonVector>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProblemFile {
    n: usize,
    a: f64,
    b: f64,
    #[serde(rename = "J")]
    j: JsonMatrix,
    atoms: Vec<AtomFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaps: Option<Vec<GapFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rhs: Option<RhsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boundary: Option<Vec<JsonVector>>,
}

/// A parsed problem: the system plus optional right-hand side and boundary
/// condition rows (coefficients over `[D_i basis, D_{−i} basis]`).
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: SystemSpec,
    pub rhs: Option<RightHandSide>,
    pub boundary: Option<CMat>,
}

fn matrix(rows: &JsonMatrix, n: usize, what: &str) -> Result<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{what} must be {n}x{n}")));
    }
    Ok(CMat::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

fn vector(v: &JsonVector, n: usize, what: &str) -> Result<CVec> {
    if v.len() != n {
        return Err(Error::Parse(format!("{what} must have {n} entries")));
    }
    Ok(CVec::from_iterator(n, v.iter().map(|z| C64::new(z[0], z[1]))))
}

pub fn parse_problem(text: &str) -> Result<Problem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let n = file.n;
    if n == 0 {
        return Err(Error::Parse("n must be positive".into()));
    }
    let j = matrix(&file.j, n, "J")?;
    let atoms = file
        .atoms
        .iter()
        .enumerate()
        .map(|(k, a)| {
            Ok(Atom {
                x: a.x,
                dq: matrix(&a.dq, n, &format!("atoms[{k}].dq"))?,
                dw: matrix(&a.dw, n, &format!("atoms[{k}].dw"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gaps = match &file.gaps {
        None => None,
        Some(g) => Some(
            g.iter()
                .enumerate()
                .map(|(k, g)| {
                    Ok(GapDensity {
                        q: matrix(&g.q, n, &format!("gaps[{k}].Q"))?,
                        w: matrix(&g.w, n, &format!("gaps[{k}].W"))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let spec = SystemSpec::new(j, file.a, file.b, atoms, gaps).map_err(|e| Error::Parse(e.to_string()))?;
    let rhs = file.rhs.as_ref().map(|r| rhs_from_file(r, &spec)).transpose()?;
    let boundary = file.boundary.as_deref().map(boundary_rows).transpose()?;
    Ok(Problem { spec, rhs, boundary })
}

/// A standalone right-hand side `{"gaps": [...], "atoms": [...]}` for `spec`.
pub fn parse_rhs(text: &str, spec: &SystemSpec) -> Result<RightHandSide> {
    let file: RhsFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    rhs_from_file(&file, spec)
}

/// Boundary condition rows, either a bare array of rows or `{"boundary": rows}`.
pub fn parse_boundary(text: &str) -> Result<CMat> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Rows {
        Bare(Vec<JsonVector>),
        Wrapped { boundary: Vec<JsonVector> },
    }
    let rows = match serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))? {
        Rows::Bare(r) | Rows::Wrapped { boundary: r } => r,
    };
    boundary_rows(&rows)
}

fn rhs_from_file(r: &RhsFile, spec: &SystemSpec) -> Result<RightHandSide> {
    let n = spec.n();
    let f = RightHandSide {
        gaps: r.gaps.iter().map(|v| vector(v, n, "rhs.gaps[]")).collect::<Result<_>>()?,
        atoms: r.atoms.iter().map(|v| vector(v, n, "rhs.atoms[]")).collect::<Result<_>>()?,
    };
    f.check_shape(spec).map_err(|e| Error::Parse(e.to_string()))?;
    Ok(f)
}

fn boundary_rows(rows: &[JsonVector]) -> Result<CMat> {
    let width = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Parse("boundary rows must have equal length".into()));
    }
    Ok(CMat::from_fn(rows.len(), width, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

pub fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn vector_json(v: &CVec) -> Value {
    Value::Array(v.iter().map(|&z| complex_json(z)).collect())
}

pub fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_json(m[(i, j)])).collect()))
            .collect(),
    )
}

fn to_rows(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn to_entries(v: &CVec) -> JsonVector {
    v.iter().map(|z| [z.re, z.im]).collect()
}

/// Problem file for a spec; zero gap densities are omitted.
pub fn problem_json(spec: &SystemSpec, rhs: Option<&RightHandSide>, boundary: Option<&CMat>) -> Value {
    let gaps = if spec.gaps().iter().all(|g| g.is_zero()) {
        None
    } else {
        Some(
            spec.gaps()
                .iter()
                .map(|g| GapFile {
                    q: to_rows(&g.q),
                    w: to_rows(&g.w),
                })
                .collect(),
        )
    };
    let file = ProblemFile {
        n: spec.n(),
        a: spec.a(),
        b: spec.b(),
        j: to_rows(spec.j()),
        atoms: spec
            .atoms()
            .iter()
            .map(|a| AtomFile {
                x: a.x,
                dq: to_rows(&a.dq),
                dw: to_rows(&a.dw),
            })
            .collect(),
        gaps,
        rhs: rhs.map(|f| RhsFile {
            gaps: f.gaps.iter().map(to_entries).collect(),
            atoms: f.atoms.iter().map(to_entries).collect(),
        }),
        boundary: boundary.map(to_rows),
    };
    serde_json::to_value(file).expect("problem file serializes")
}

/// `{"lambda", "points", "atoms", "K", "G"}` with `K[point][atom][row][col] = [re, im]`.
pub fn kernel_table_json(t: &KernelTable) -> Value {
    let blocks = |rows: &Vec<Vec<CMat>>| Value::Array(rows.iter().map(|r| Value::Array(r.iter().map(matrix_json).collect())).collect());
    json!({
        "lambda": complex_json(t.lambda),
        "points": t.points,
        "atoms": t.atoms,
        "K": blocks(&t.k),
        "G": blocks(&t.g),
    })
}

/// Parses `"re,im"` (or a bare real number).
pub fn parse_complex(s: &str) -> Result<C64> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {p:?}")));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(Error::Parse(format!("expected \"re,im\", got {s:?}"))),
    }
}
