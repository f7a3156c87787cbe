use serde::Serialize;

use crate::ccg::Vector;
use crate::conic::Backend;
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::reach::LiftedReachSet;

/// Pairwise intersection of lifted sets; inputs are shared, leading blocks equated.
#[derive(Clone, Debug)]
pub struct PairSets {
    pub pair: (usize, usize),
    pub names: (String, String),
    pub joint: LiftedReachSet,
}

impl PairSets {
    pub fn build(reach: &[LiftedReachSet]) -> Result<Vec<PairSets>> {
        let mut out = Vec::new();
        for i in 0..reach.len() {
            for j in i + 1..reach.len() {
                if !reach[i].same_layout(&reach[j]) {
                    return Err(Error::Invalid(format!(
                        "lifted layouts of `{}` and `{}` differ",
                        reach[i].mode, reach[j].mode
                    )));
                }
                out.push(PairSets {
                    pair: (i, j),
                    names: (reach[i].mode.clone(), reach[j].mode.clone()),
                    joint: LiftedReachSet {
                        set: reach[i].set.intersect(&reach[j].set, None)?,
                        mode: format!("{}&{}", reach[i].mode, reach[j].mode),
                        ..reach[i].clone()
                    },
                });
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCertificate {
    pub pair: (usize, usize),
    pub modes: (String, String),
    /// The sliced intersection is empty.
    pub empty: bool,
    /// Phase-1 infeasibility margin of the sliced intersection.
    pub margin: f64,
}

/// Emptiness of every pairwise intersection sliced at the input sequence `u`.
pub fn certify(pairs: &[PairSets], u: &Vector, backend: &Backend) -> Result<Vec<PairCertificate>> {
    par::map(pairs, Exec::Auto, |_, p| {
        let cert = backend.emptiness(&p.joint.slice_controls(u)?)?;
        Ok(PairCertificate {
            pair: p.pair,
            modes: p.names.clone(),
            empty: cert.empty,
            margin: cert.margin,
        })
    })
    .into_iter()
    .collect()
}

pub(crate) fn all_empty(certs: &[PairCertificate]) -> bool {
    certs.iter().all(|c| c.empty)
}
