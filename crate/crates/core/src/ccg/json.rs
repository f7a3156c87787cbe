//! JSON form: `{"G": rows, "c", "A": rows, "b", "cones": [{"variant", "dim", ...}]}`.
//! Numbers are written with 17 significant digits.

use std::fmt::Write;

use serde::Deserialize;

use super::{Ccg, ConeSpec, Mat, Vector};
use crate::error::{Error, Result};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CcgDoc {
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(rename = "A", default)]
    a: Vec<Vec<f64>>,
    #[serde(default)]
    b: Vec<f64>,
    cones: Vec<ConeDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeDoc {
    variant: String,
    dim: usize,
    lo: Option<Vec<f64>>,
    hi: Option<Vec<f64>>,
    radius: Option<f64>,
}

pub(crate) fn fmt_f64(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").expect("writing to a String cannot fail");
}

fn write_vec(out: &mut String, v: &[f64]) {
    out.push('[');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        fmt_f64(out, *x);
    }
    out.push(']');
}

fn write_rows(out: &mut String, m: &Mat) {
    out.push('[');
    for i in 0..m.nrows() {
        if i > 0 {
            out.push_str(", ");
        }
        let row: Vec<f64> = m.row(i).iter().copied().collect();
        write_vec(out, &row);
    }
    out.push(']');
}

pub fn ccg_to_json(z: &Ccg) -> String {
    let mut out = String::from("{\"G\": ");
    write_rows(&mut out, z.g());
    out.push_str(", \"c\": ");
    write_vec(&mut out, z.c().as_slice());
    out.push_str(", \"A\": ");
    write_rows(&mut out, z.a());
    out.push_str(", \"b\": ");
    write_vec(&mut out, z.b().as_slice());
    out.push_str(", \"cones\": [");
    for (i, cone) in z.cones().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write!(out, "{{\"variant\": \"{}\", \"dim\": {}", cone.variant_name(), cone.dim()).unwrap();
        match cone {
            ConeSpec::Box { lo, hi } => {
                out.push_str(", \"lo\": ");
                write_vec(&mut out, lo);
                out.push_str(", \"hi\": ");
                write_vec(&mut out, hi);
            }
            ConeSpec::Ball2 { radius, .. } => {
                out.push_str(", \"radius\": ");
                fmt_f64(&mut out, *radius);
            }
            _ => {}
        }
        out.push('}');
    }
    out.push_str("]}");
    out
}

fn rows_to_mat(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<Mat> {
    let mut m = Mat::zeros(rows.len(), ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(Error::Invalid(format!(
                "{what} row {i} has {} entries, expected {ncols}",
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

fn cone_from_doc(doc: ConeDoc) -> Result<ConeSpec> {
    let missing = |field: &str| Error::Invalid(format!("{} cone is missing `{field}`", doc.variant));
    let cone = match doc.variant.as_str() {
        "Free" => ConeSpec::Free { dim: doc.dim },
        "NonNegative" => ConeSpec::NonNegative { dim: doc.dim },
        "SOC" => ConeSpec::Soc { dim: doc.dim },
        "Ball2" => ConeSpec::Ball2 {
            dim: doc.dim,
            radius: doc.radius.ok_or_else(|| missing("radius"))?,
        },
        "Box" => {
            let lo = doc.lo.clone().ok_or_else(|| missing("lo"))?;
            let hi = doc.hi.clone().ok_or_else(|| missing("hi"))?;
            if lo.len() != doc.dim {
                return Err(Error::Invalid(format!("Box cone dim {} but {} bounds", doc.dim, lo.len())));
            }
            ConeSpec::Box { lo, hi }
        }
        other => return Err(Error::Invalid(format!("unknown cone variant `{other}`"))),
    };
    cone.validate()?;
    Ok(cone)
}

pub fn ccg_from_json(text: &str) -> Result<Ccg> {
    let doc: CcgDoc = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("CCG JSON: {e}")))?;
    let cones = doc.cones.into_iter().map(cone_from_doc).collect::<Result<Vec<_>>>()?;
    let ng: usize = cones.iter().map(ConeSpec::dim).sum();
    let g = rows_to_mat(&doc.g, ng, "G")?;
    let a = rows_to_mat(&doc.a, ng, "A")?;
    Ccg::new(g, Vector::from_vec(doc.c), a, Vector::from_vec(doc.b), cones)
}
