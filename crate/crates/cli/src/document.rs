//! The versioned complex document: four operator blocks, optional labels
//! and an optional registry of named (co)homology bases.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use cmtorsion::numkit::{c64, CMatrix};
use cmtorsion::torsion::ReferenceBases;
use cmtorsion::BiComplex;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::jsonfmt;

pub const SCHEMA_VERSION: &str = "cmtorsion/complex/v1";

/// Row-major entries as `[re, im]` pairs.
pub type Entries = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    /// Form degree of a Dolbeault wrapper.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, String>,
}

impl Labels {
    fn is_empty(&self) -> bool {
        *self == Labels::default()
    }
}

/// Representatives for one side, even parity first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParityBlocks {
    pub even: Entries,
    pub odd: Entries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedBasis {
    pub name: String,
    pub cohomology: ParityBlocks,
    pub homology: ParityBlocks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexDocument {
    pub schema_version: String,
    pub dims: [usize; 2],
    /// `d: C^0 -> C^1`, shape `n1 x n0`.
    pub d_eo: Entries,
    /// `d: C^1 -> C^0`, shape `n0 x n1`.
    pub d_oe: Entries,
    pub ds_eo: Entries,
    pub ds_oe: Entries,
    #[serde(default, skip_serializing_if = "Labels::is_empty")]
    pub labels: Labels,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bases: Vec<NamedBasis>,
}

pub fn entries(m: &CMatrix) -> Entries {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

/// Reads a block with a known row count; the column count is taken from
/// `cols` when given, otherwise from the first row.
fn matrix(name: &str, e: &Entries, rows: usize, cols: Option<usize>) -> Result<CMatrix, CliError> {
    if e.len() != rows {
        return Err(CliError::parse(format!(
            "{name}: expected {rows} rows, found {}",
            e.len()
        )));
    }
    let cols = cols.unwrap_or_else(|| e.first().map_or(0, Vec::len));
    if let Some(i) = e.iter().position(|r| r.len() != cols) {
        return Err(CliError::parse(format!(
            "{name}: row {i} has {} entries, expected {cols}",
            e[i].len()
        )));
    }
    if e.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::parse(format!("{name}: non-finite entry")));
    }
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        c64(e[i][j][0], e[i][j][1])
    }))
}

impl ComplexDocument {
    pub fn from_complex(c: &BiComplex, labels: Labels) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            dims: [c.n0, c.n1],
            d_eo: entries(&c.d.eo),
            d_oe: entries(&c.d.oe),
            ds_eo: entries(&c.ds.eo),
            ds_oe: entries(&c.ds.oe),
            labels,
            bases: Vec::new(),
        }
    }

    pub fn complex(&self) -> Result<BiComplex, CliError> {
        let [n0, n1] = self.dims;
        let c = BiComplex::new(
            matrix("d_eo", &self.d_eo, n1, Some(n0))?,
            matrix("d_oe", &self.d_oe, n0, Some(n1))?,
            matrix("ds_eo", &self.ds_eo, n1, Some(n0))?,
            matrix("ds_oe", &self.ds_oe, n0, Some(n1))?,
        );
        c.map_err(|e| CliError::parse(e.to_string()))
    }

    pub fn add_basis(&mut self, name: &str, bases: &ReferenceBases) {
        self.bases.push(NamedBasis {
            name: name.to_string(),
            cohomology: ParityBlocks {
                even: entries(&bases.coh[0]),
                odd: entries(&bases.coh[1]),
            },
            homology: ParityBlocks {
                even: entries(&bases.hom[0]),
                odd: entries(&bases.hom[1]),
            },
        });
    }

    pub fn basis(&self, name: &str) -> Result<ReferenceBases, CliError> {
        let b = self.bases.iter().find(|b| b.name == name).ok_or_else(|| {
            let known: Vec<&str> = self.bases.iter().map(|b| b.name.as_str()).collect();
            CliError::parse(format!("no basis named `{name}` (registry: {known:?})"))
        })?;
        let [n0, n1] = self.dims;
        let side = |label: &str, p: &ParityBlocks| -> Result<[CMatrix; 2], CliError> {
            Ok([
                matrix(&format!("{name}.{label}.even"), &p.even, n0, None)?,
                matrix(&format!("{name}.{label}.odd"), &p.odd, n1, None)?,
            ])
        };
        Ok(ReferenceBases {
            coh: side("cohomology", &b.cohomology)?,
            hom: side("homology", &b.homology)?,
            coh_id: name.to_string(),
            hom_id: name.to_string(),
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let doc: ComplexDocument = serde_json::from_str(text)
            .map_err(|e| CliError::parse(format!("malformed document: {e}")))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(CliError::parse(format!(
                "unrecognized schema_version `{}` (expected `{SCHEMA_VERSION}`)",
                doc.schema_version
            )));
        }
        doc.complex()?;
        for b in &doc.bases {
            doc.basis(&b.name)?;
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn write_to<W: Write>(&self, w: W) -> io::Result<()> {
        jsonfmt::write(w, self)
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }
}
