use crate::domain::sheet::SheetMesh;
use crate::error::{invalid, Error, Result};

/// How free-boundary chain vertices are identified with junction nodes.
#[derive(Clone, Debug, Default)]
pub enum CorrespondencePolicy {
    /// Chain position `v` of every sheet is junction node `v`.
    #[default]
    Identity,
    /// Per sheet, the junction node of each chain position (after the chain
    /// has been oriented counter-clockwise). Must be strictly increasing.
    Explicit([Vec<usize>; 3]),
}

/// Three sheets glued along their free chains. Chain position `v` of every
/// sheet is junction node `v`; junction node 0 is `q-` and the last is `q+`.
#[derive(Clone, Debug, PartialEq)]
pub struct GluedDomain {
    sheets: [SheetMesh; 3],
}

impl GluedDomain {
    pub fn sheets(&self) -> &[SheetMesh; 3] {
        &self.sheets
    }

    pub fn sheet(&self, i: usize) -> &SheetMesh {
        &self.sheets[i]
    }

    pub fn junction_len(&self) -> usize {
        self.sheets[0].free_boundary().len()
    }
}

pub fn build_glued_domain(sheets: [SheetMesh; 3], policy: &CorrespondencePolicy) -> Result<GluedDomain> {
    let sheets = sheets.map(SheetMesh::canonicalized);
    let lens = sheets.each_ref().map(|s| s.free_boundary().len());
    if lens[1] != lens[0] || lens[2] != lens[0] {
        return Err(Error::Structural(format!("free-boundary chain lengths differ: {lens:?}")));
    }
    let sheets = match policy {
        CorrespondencePolicy::Identity => sheets,
        CorrespondencePolicy::Explicit(maps) => {
            for (i, m) in maps.iter().enumerate() {
                if m.len() != lens[i] {
                    return invalid(format!("correspondence {i} has length {}, chain has {}", m.len(), lens[i]));
                }
                if m.windows(2).any(|w| w[1] <= w[0]) {
                    return invalid(format!("correspondence {i} is not order-preserving"));
                }
                if m[0] != 0 || m[m.len() - 1] != lens[i] - 1 {
                    return invalid(format!("correspondence {i} does not map endpoints to endpoints"));
                }
            }
            // a strictly increasing bijection onto 0..M is the identity
            sheets
        }
    };
    Ok(GluedDomain { sheets })
}
