//! Built-in matrix families, their published constants, and the JSON family
//! file format.
//!
//! A family file looks like
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "g2",
//!   "q": 1,
//!   "dim": 2,
//!   "d0": ["1", "2", "0", "0"],
//!   "d1": ["1", "2", "1", "0"],
//!   "polynomial_mask": 7
//! }
//! ```
//!
//! with row-major `"p/q"` entries. `d0_ref`/`d1_ref` (conjugated reference
//! matrices) and `polynomial_mask` (bit `i` = coefficient of `x^i`) are
//! optional.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::conjugate::{reference_corner, SentinelFactorization};
use crate::error::{Error, Result};
use crate::exactmat::{format_rational, parse_rational, poly_root_residual, RationalMatrix};
use crate::gle::ExponentReport;
use crate::words::words_of_length;

pub const FAMILY_SCHEMA_VERSION: u32 = 1;

/// A constant as printed, with the number of decimals shown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Printed {
    pub value: f64,
    pub decimals: u32,
}

impl Printed {
    fn parse(text: &str) -> Self {
        let decimals = text.split_once('.').map_or(0, |(_, d)| d.len() as u32);
        Self {
            value: text.parse().expect("static constant"),
            decimals,
        }
    }

    /// Exact constants, good to double precision.
    fn exact(value: f64) -> Self {
        Self { value, decimals: 16 }
    }

    pub fn resolution(&self) -> f64 {
        10f64.powi(-(self.decimals.min(16) as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceConstants {
    pub lambda: Printed,
    pub sigma2: Printed,
    /// `L(2) / ln 2`.
    pub avg: Printed,
    /// `sigma^2 / ln 2`.
    pub typ: Printed,
    /// Minimal polynomial of `e^{L(2)}`, highest degree first.
    pub minpoly: Vec<i64>,
    /// Smallest tolerance the double-precision pipeline is expected to reach
    /// for `lambda` and `sigma^2` at the default depth.
    pub lambda_floor: f64,
    pub sigma2_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFamily {
    pub name: String,
    pub alias: Option<String>,
    pub q: u32,
    pub d0: RationalMatrix,
    pub d1: RationalMatrix,
    pub d0_ref: Option<RationalMatrix>,
    pub d1_ref: Option<RationalMatrix>,
    /// Bit `i` is the coefficient of `x^i` of the polynomial whose powers
    /// the family counts.
    pub polynomial_mask: Option<u64>,
    pub constants: Option<ReferenceConstants>,
    factorization: SentinelFactorization,
}

/// Built-in family names in catalog order.
pub const FAMILY_NAMES: [&str; 8] = ["g1", "g2", "g3", "h3", "g4", "h4", "g5", "g6"];

const ALIASES: [(&str, &str); 8] = [
    ("g1", "binomial"),
    ("g2", "trinomial-I"),
    ("g3", "quadrinomial"),
    ("h3", "trinomial-II"),
    ("g4", "quintinomial"),
    ("h4", "trinomial-III"),
    ("g5", "sextinomial"),
    ("g6", "septinomial"),
];

impl MatrixFamily {
    /// Validates nonnegativity, `rank(D0^q) = 1` and `trace(D0^q) = 1`.
    pub fn new(name: &str, q: u32, d0: RationalMatrix, d1: RationalMatrix) -> Result<Self> {
        if d0.dim() != d1.dim() {
            return Err(Error::InvariantViolation(format!(
                "dimension: D0 is {0}x{0}, D1 is {1}x{1}",
                d0.dim(),
                d1.dim()
            )));
        }
        if !d0.is_nonnegative() || !d1.is_nonnegative() {
            return Err(Error::InvariantViolation("nonnegative: digit matrices must be nonnegative".into()));
        }
        let factorization = SentinelFactorization::new(&d0, &d1, q).map_err(|e| match e {
            Error::RankNotOne | Error::ZeroMatrix => {
                Error::InvariantViolation(format!("rank: D0^{q} does not have rank one"))
            }
            Error::NotIdempotentSimilar { trace } => {
                Error::InvariantViolation(format!("trace: trace of D0^{q} is {trace}, expected 1"))
            }
            other => other,
        })?;
        Ok(Self {
            name: name.to_string(),
            alias: None,
            q,
            d0,
            d1,
            d0_ref: None,
            d1_ref: None,
            polynomial_mask: None,
            constants: None,
            factorization,
        })
    }

    pub fn factorization(&self) -> &SentinelFactorization {
        &self.factorization
    }

    pub fn dim(&self) -> usize {
        self.d0.dim()
    }

    /// Default truncation depth for the series.
    pub fn default_max_len(&self) -> usize {
        if self.q >= 3 {
            30
        } else {
            36
        }
    }

    /// Serializes in the family file format.
    pub fn to_json(&self) -> String {
        let entries = |m: &RationalMatrix| m.entries().iter().map(format_rational).collect::<Vec<_>>();
        let file = FamilyFile {
            schema_version: FAMILY_SCHEMA_VERSION,
            name: self.name.clone(),
            q: self.q,
            dim: self.dim(),
            d0: entries(&self.d0),
            d1: entries(&self.d1),
            d0_ref: self.d0_ref.as_ref().map(entries),
            d1_ref: self.d1_ref.as_ref().map(entries),
            polynomial_mask: self.polynomial_mask,
        };
        serde_json::to_string_pretty(&file).expect("family serializes")
    }

    /// Checks the reference matrices against the corner values for every
    /// word of `chi(0^q)` up to `max_len`. Returns the first mismatch.
    pub fn check_reference_corners(&self, max_len: usize) -> Option<String> {
        let (r0, r1) = (self.d0_ref.as_ref()?, self.d1_ref.as_ref()?);
        (0..=max_len)
            .flat_map(|l| words_of_length(self.q, l))
            .find(|w| self.factorization.corner_value(w) != reference_corner(r0, r1, w))
            .map(|w| w.to_string())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FamilyFile {
    schema_version: u32,
    name: String,
    q: u32,
    dim: usize,
    d0: Vec<String>,
    d1: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d0_ref: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d1_ref: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    polynomial_mask: Option<u64>,
}

fn parse_matrix(origin: &str, field: &str, dim: usize, entries: &[String]) -> Result<RationalMatrix> {
    if entries.len() != dim * dim {
        return Err(Error::Parse {
            location: format!("{origin}: {field}"),
            message: format!("expected {} entries, found {}", dim * dim, entries.len()),
        });
    }
    let parsed = entries
        .iter()
        .enumerate()
        .map(|(i, s)| {
            parse_rational(s).ok_or_else(|| Error::Parse {
                location: format!("{origin}: {field}[{i}]"),
                message: format!("not a rational: {s:?}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RationalMatrix::from_entries(dim, parsed)
}

/// Parses a family from JSON text; `origin` labels error locations.
pub fn parse_family(text: &str, origin: &str) -> Result<MatrixFamily> {
    let file: FamilyFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{origin}:{}:{}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if file.schema_version != FAMILY_SCHEMA_VERSION {
        return Err(Error::Parse {
            location: format!("{origin}: schema_version"),
            message: format!("unsupported version {}", file.schema_version),
        });
    }
    if file.dim == 0 {
        return Err(Error::Parse {
            location: format!("{origin}: dim"),
            message: "dimension must be positive".into(),
        });
    }
    let d0 = parse_matrix(origin, "d0", file.dim, &file.d0)?;
    let d1 = parse_matrix(origin, "d1", file.dim, &file.d1)?;
    let mut fam = MatrixFamily::new(&file.name, file.q, d0, d1)?;
    fam.d0_ref = file.d0_ref.map(|e| parse_matrix(origin, "d0_ref", file.dim, &e)).transpose()?;
    fam.d1_ref = file.d1_ref.map(|e| parse_matrix(origin, "d1_ref", file.dim, &e)).transpose()?;
    fam.polynomial_mask = file.polynomial_mask;
    Ok(fam)
}

pub fn load_family_file(path: impl AsRef<Path>) -> Result<MatrixFamily> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_family(&text, &path.display().to_string())
}

fn rows(r: &[&[i64]]) -> RationalMatrix {
    RationalMatrix::from_rows(r)
}

fn text_rows(r: &[&[&str]]) -> RationalMatrix {
    let dim = r.len();
    let e = r.iter().flat_map(|row| row.iter().map(|s| parse_rational(s).expect("static entry"))).collect();
    RationalMatrix::from_entries(dim, e).expect("square")
}

struct Builtin {
    q: u32,
    d0: RationalMatrix,
    d1: RationalMatrix,
    d0_ref: RationalMatrix,
    d1_ref: RationalMatrix,
    mask: u64,
    constants: ReferenceConstants,
}

fn constants(
    lambda: Printed,
    sigma2: Printed,
    avg: Printed,
    typ: Printed,
    minpoly: &[i64],
    floors: (f64, f64),
) -> ReferenceConstants {
    ReferenceConstants {
        lambda,
        sigma2,
        avg,
        typ,
        minpoly: minpoly.to_vec(),
        lambda_floor: floors.0,
        sigma2_floor: floors.1,
    }
}

fn builtin(name: &str) -> Option<Builtin> {
    let ln2 = std::f64::consts::LN_2;
    let p = Printed::parse;
    let b = match name {
        "g1" => Builtin {
            q: 1,
            d0: rows(&[&[1]]),
            d1: rows(&[&[2]]),
            d0_ref: rows(&[&[1]]),
            d1_ref: rows(&[&[2]]),
            mask: 0b11,
            constants: constants(
                Printed::exact(ln2 / 2.0),
                Printed::exact(ln2 * ln2 / 4.0),
                Printed::exact(2.5f64.ln() / ln2),
                Printed::exact(ln2 / 4.0),
                &[2, -5],
                (1e-10, 1e-10),
            ),
        },
        "g2" => Builtin {
            q: 1,
            d0: rows(&[&[1, 2], &[0, 0]]),
            d1: rows(&[&[1, 2], &[1, 0]]),
            d0_ref: rows(&[&[1, 0], &[0, 0]]),
            d1_ref: rows(&[&[3, -4], &[1, -2]]),
            mask: 0b111,
            constants: constants(
                p("0.4299474333424527201146970"),
                p("0.1211367118847285164803949"),
                p("1.4924205743549514375202537"),
                p("0.1747633335056929866262498"),
                &[1, -2, -3, 2],
                (1e-8, 1e-7),
            ),
        },
        "g3" => Builtin {
            q: 2,
            d0: rows(&[&[1, 2, 0], &[0, 0, 1], &[0, 0, 0]]),
            d1: rows(&[&[0, 0, 0], &[2, 0, 0], &[0, 1, 2]]),
            d0_ref: rows(&[&[1, 0, 0], &[0, 0, 0], &[0, 1, 0]]),
            d1_ref: rows(&[&[4, -4, -6], &[0, 2, 1], &[2, -4, -4]]),
            mask: 0b1111,
            constants: constants(
                Printed::exact(ln2 / 2.0),
                p("0.12011325"),
                Printed::exact(2.5f64.ln() / ln2),
                p("0.17328679"),
                &[2, -5],
                (1e-6, 1e-6),
            ),
        },
        "h3" => Builtin {
            q: 2,
            d0: rows(&[&[1, 2, 1, 0], &[0, 0, 1, 1], &[0, 0, 0, 0], &[0, 0, 0, 0]]),
            d1: rows(&[&[1, 1, 1, 0], &[1, 0, 0, 1], &[0, 1, 0, 0], &[0, 0, 1, 1]]),
            d0_ref: rows(&[&[1, 0, 0, 0], &[0, 0, 0, 0], &[0, 1, 0, 0], &[0, 0, 0, 0]]),
            d1_ref: rows(&[&[3, -6, -2, 4], &[0, 1, 1, 0], &[1, -3, -2, 2], &[0, 1, 0, 0]]),
            mask: 0b1011,
            constants: constants(
                p("0.45454538229305"),
                p("0.12497319"),
                p("1.5459492845008943975543991"),
                p("0.18029820"),
                &[16, -40, -36, 22, 76, 7, -19, -19, 0, 2, 1],
                (1e-6, 1e-5),
            ),
        },
        "g4" => Builtin {
            q: 2,
            d0: rows(&[&[1, 1, 2, 0], &[0, 0, 0, 0], &[0, 1, 0, 2], &[0, 0, 0, 0]]),
            d1: rows(&[&[0, 1, 2, 0], &[1, 0, 0, 0], &[1, 0, 0, 2], &[0, 1, 0, 0]]),
            d0_ref: rows(&[&[1, 0, 0, 0], &[0, 0, 0, 0], &[0, 1, 0, 0], &[0, 0, 0, 0]]),
            d1_ref: rows(&[&[5, -10, -8, 4], &[1, -1, -2, -2], &[1, -3, -2, 4], &[0, 1, 0, -2]]),
            mask: 0b11111,
            constants: constants(
                p("0.504253705692"),
                p("0.11406217"),
                p("1.6534827473445406557431504"),
                p("0.16455692"),
                &[4, -8, -21, 14, -28, 126, 65, 68, 48, -56, -32],
                (1e-6, 1e-5),
            ),
        },
        "h4" => Builtin {
            q: 2,
            d0: rows(&[
                &[1, 0, 2, 0, 1, 2, 1, 1],
                &[0; 8],
                &[0, 1, 0, 2, 1, 0, 1, 1],
                &[0; 8],
                &[0; 8],
                &[0; 8],
                &[0; 8],
                &[0; 8],
            ]),
            d1: rows(&[
                &[1, 0, 1, 0, 0, 1, 0, 0],
                &[1, 0, 0, 0, 0, 0, 0, 0],
                &[0, 1, 0, 1, 1, 0, 0, 1],
                &[0, 1, 0, 0, 0, 0, 0, 0],
                &[0, 0, 1, 0, 0, 0, 0, 1],
                &[0, 0, 0, 1, 0, 0, 1, 0],
                &[0, 0, 0, 0, 1, 0, 0, 0],
                &[0, 0, 0, 0, 0, 1, 1, 0],
            ]),
            d0_ref: rows(&[
                &[1, 0, 0, 0, 0, 0, 0, 0],
                &[0; 8],
                &[0, 1, 0, 0, 0, 0, 0, 0],
                &[0; 8],
                &[0; 8],
                &[0; 8],
                &[0; 8],
                &[0; 8],
            ]),
            d1_ref: rows(&[
                &[3, 0, -2, -8, -4, -2, -4, -4],
                &[1, 0, -1, -4, -2, -1, -2, -2],
                &[0, 1, 0, -1, 0, 0, -1, 0],
                &[0, 1, 0, -2, -1, 0, -1, -1],
                &[0, 0, 1, 0, 0, 0, 0, 1],
                &[0, 0, 0, 1, 0, 0, 1, 0],
                &[0, 0, 0, 0, 1, 0, 0, 0],
                &[0, 0, 0, 0, 0, 1, 1, 0],
            ]),
            mask: 0b10011,
            constants: constants(
                p("0.45759385431410"),
                p("0.13055386"),
                p("1.5707744868006419128591802"),
                p("0.18834940"),
                &[32, -80, -8, -60, -232, 240, 44, 9, 11, -54, -4, 3, 1, 2],
                (1e-6, 1e-5),
            ),
        },
        "g5" => Builtin {
            q: 3,
            d0: rows(&[
                &[1, 1, 2, 2, 0, 0],
                &[0; 6],
                &[0, 1, 0, 0, 1, 1],
                &[0; 6],
                &[0; 6],
                &[0, 0, 0, 0, 1, 0],
            ]),
            d1: rows(&[
                &[0; 6],
                &[2, 2, 0, 0, 0, 0],
                &[0; 6],
                &[0, 0, 1, 1, 2, 2],
                &[0, 0, 0, 1, 0, 0],
                &[0; 6],
            ]),
            d0_ref: rows(&[
                &[1, 0, 0, 0, 0, 0],
                &[0; 6],
                &[0, 1, 0, 0, 0, 0],
                &[0, 0, 1, 0, 0, 0],
                &[0; 6],
                &[0; 6],
            ]),
            d1_ref: rows(&[
                &[6, -8, -8, -10, -4, -6],
                &[0, 0, 0, 0, 0, 1],
                &[2, -4, -4, -4, 0, -3],
                &[0; 6],
                &[2, -4, -4, -4, 0, -3],
                &[0, 2, 2, 1, -2, 1],
            ]),
            mask: 0b11_1111,
            constants: constants(
                p("0.5344481528"),
                p("0.0965"),
                p("1.6903750759639444915537652"),
                p("0.1392"),
                &[128, -640, 416, 1008, 416, -28, -3112, -2572, 346, 1887, 511, 144],
                (1e-5, 5e-4),
            ),
        },
        "g6" => Builtin {
            q: 3,
            d0: rows(&[
                &[1, 0, 1, 2, 0, 0],
                &[0; 6],
                &[0, 0, 0, 0, 1, 2],
                &[0, 2, 1, 0, 1, 0],
                &[0; 6],
                &[0; 6],
            ]),
            d1: rows(&[
                &[0, 0, 0, 2, 1, 0],
                &[1, 0, 0, 0, 0, 0],
                &[1, 0, 0, 0, 0, 2],
                &[0, 2, 1, 0, 0, 0],
                &[0, 0, 1, 0, 0, 0],
                &[0, 0, 0, 0, 1, 0],
            ]),
            d0_ref: rows(&[
                &[1, 0, 0, 0, 0, 0],
                &[0; 6],
                &[0, 1, 0, 0, 0, 0],
                &[0, 0, 1, 0, 0, 0],
                &[0; 6],
                &[0; 6],
            ]),
            d1_ref: text_rows(&[
                &["7", "-36", "-28", "-24", "4", "-4"],
                &["0", "0", "1", "0", "1/2", "-2"],
                &["3/2", "-8", "-8", "-6", "1/2", "1"],
                &["0", "0", "1", "0", "-1/2", "1"],
                &["2", "-12", "-10", "-8", "1", "0"],
                &["1", "-6", "-6", "-4", "1", "0"],
            ]),
            mask: 0b111_1111,
            constants: constants(
                p("0.53765282"),
                p("0.1082"),
                p("1.7258729504941114967801068"),
                p("0.1561"),
                &[
                    8, -4, -18, -335, 34, 474, 4072, 302, -3119, -16848, -1056, 7321, 29681, 910, -6690, -22628, -152,
                    1936, 6112, 0, -128, -512,
                ],
                (1e-5, 5e-4),
            ),
        },
        _ => return None,
    };
    Some(b)
}

/// Looks a family up by short name (`g2`) or alias (`trinomial-I`,
/// case-insensitive).
pub fn get_family(name: &str) -> Result<MatrixFamily> {
    let short = ALIASES
        .iter()
        .find(|(s, a)| s.eq_ignore_ascii_case(name) || a.eq_ignore_ascii_case(name))
        .map(|(s, _)| *s)
        .ok_or_else(|| Error::UnknownFamily(name.to_string()))?;
    let b = builtin(short).expect("alias table matches builtins");
    let mut fam = MatrixFamily::new(short, b.q, b.d0, b.d1)?;
    fam.alias = ALIASES.iter().find(|(s, _)| *s == short).map(|(_, a)| a.to_string());
    fam.d0_ref = Some(b.d0_ref);
    fam.d1_ref = Some(b.d1_ref);
    fam.polynomial_mask = Some(b.mask);
    fam.constants = Some(b.constants);
    Ok(fam)
}

pub fn all_families() -> Vec<MatrixFamily> {
    FAMILY_NAMES.iter().map(|n| get_family(n).expect("built-in family")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub quantity: String,
    pub computed: f64,
    pub reference: f64,
    pub tol: f64,
    pub pass: bool,
}

impl VerifyRow {
    pub fn new(quantity: impl Into<String>, computed: f64, reference: f64, tol: f64) -> Self {
        let pass = (computed - reference).abs() <= tol;
        Self {
            quantity: quantity.into(),
            computed,
            reference,
            tol,
            pass,
        }
    }
}

/// `max(printed resolution, floor)`. The error bar of the computation is
/// deliberately left out, so a shallow run cannot pass on a wide bar.
pub fn tolerance(reference: &Printed, floor: f64) -> f64 {
    reference.resolution().max(floor)
}

/// Minimal-polynomial residual bound for `e^{L(2)}`.
pub const MINPOLY_TOL: f64 = 1e-8;
/// Agreement required of `L(2) / ln 2` with the printed average.
pub const AVG_TOL: f64 = 1e-8;

/// Compares a report with the family's published constants. Families
/// without constants only get the zero-corner row.
pub fn verify_constants(family: &MatrixFamily, report: &ExponentReport) -> Vec<VerifyRow> {
    let ln2 = std::f64::consts::LN_2;
    let mut out = vec![VerifyRow::new("zero-corner words", report.skipped_words as f64, 0.0, 0.0)];
    let Some(c) = &family.constants else {
        return out;
    };
    let lam = report.lambda.accel;
    let s2 = report.sigma2.accel;
    out.push(VerifyRow::new(
        "lambda",
        lam,
        c.lambda.value,
        tolerance(&c.lambda, c.lambda_floor),
    ));
    out.push(VerifyRow::new(
        "sigma2",
        s2,
        c.sigma2.value,
        tolerance(&c.sigma2, c.sigma2_floor),
    ));
    out.push(VerifyRow::new(
        "sigma2/ln2",
        s2 / ln2,
        c.typ.value,
        tolerance(&c.typ, c.sigma2_floor / ln2),
    ));
    if let Some(xi) = report.replica_value(2) {
        out.push(VerifyRow::new("L(2)/ln2", xi.ln() / ln2, c.avg.value, c.avg.resolution().max(AVG_TOL)));
        out.push(VerifyRow::new(
            "minpoly residual of e^L(2)",
            poly_root_residual(&c.minpoly, xi),
            0.0,
            MINPOLY_TOL,
        ));
    }
    if family.name == "g1" {
        out.push(VerifyRow::new("kappa", report.kappa.accel, 2.0 * ln2, c.lambda_floor));
        out.push(VerifyRow::new("mu", report.mu.accel, 1.5 * ln2 * ln2, c.lambda_floor));
    }
    if family.name == "g3" {
        out.push(VerifyRow::new("sigma2/ln2 vs ln(2)/4", s2 / ln2, ln2 / 4.0, 1e-6));
    }
    out
}

pub fn all_pass(rows: &[VerifyRow]) -> bool {
    rows.iter().all(|r| r.pass)
}
