//! `DH2v1` containers: a directory with `manifest.json` describing the trees,
//! directions, blocks and ranks, plus one `CMX1` file per stored matrix.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClusterBasis, DH2Matrix};
use crate::blocktree::BlockTree;
use crate::clustering::ClusterTree;
use crate::directions::DirectionHierarchy;
use crate::error::{Error, Result};
use crate::linalg::{read_cmx_file, write_cmx_file, CMatrix};

pub const DH2_FORMAT: &str = "DH2v1";

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    dim: usize,
    tree: ClusterTree,
    directions: DirectionHierarchy,
    blocks: BlockTree,
    row_ranks: Vec<BTreeMap<usize, usize>>,
    col_ranks: Vec<BTreeMap<usize, usize>>,
    matrices: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    kind: Kind,
    /// Cluster id for basis matrices, block id otherwise.
    id: usize,
    direction: Option<usize>,
    file: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    RowLeaf,
    RowTransfer,
    ColLeaf,
    ColTransfer,
    Coupling,
    Nearfield,
}

impl Kind {
    fn dir(self) -> &'static str {
        match self {
            Kind::RowLeaf => "row_leaf",
            Kind::RowTransfer => "row_transfer",
            Kind::ColLeaf => "col_leaf",
            Kind::ColTransfer => "col_transfer",
            Kind::Coupling => "coupling",
            Kind::Nearfield => "nearfield",
        }
    }
}

pub fn save_dh2(a: &DH2Matrix, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    let mut entries = Vec::new();
    let mut jobs: Vec<(Kind, usize, Option<usize>, &CMatrix)> = Vec::new();
    for (kind_leaf, kind_tr, basis) in [
        (Kind::RowLeaf, Kind::RowTransfer, &a.row_basis),
        (Kind::ColLeaf, Kind::ColTransfer, &a.col_basis),
    ] {
        for (t, m) in basis.leaf.iter().enumerate() {
            jobs.extend(m.iter().map(|(&c, v)| (kind_leaf, t, Some(c), v)));
        }
        for (t, m) in basis.transfer.iter().enumerate() {
            jobs.extend(m.iter().map(|(&c, v)| (kind_tr, t, Some(c), v)));
        }
    }
    jobs.extend(a.coupling.iter().map(|(&b, m)| (Kind::Coupling, b, None, m)));
    jobs.extend(a.nearfield.iter().map(|(&b, m)| (Kind::Nearfield, b, None, m)));

    for kind in [
        Kind::RowLeaf,
        Kind::RowTransfer,
        Kind::ColLeaf,
        Kind::ColTransfer,
        Kind::Coupling,
        Kind::Nearfield,
    ] {
        fs::create_dir_all(dir.join(kind.dir()))?;
    }
    for (kind, id, direction, m) in jobs {
        let file = match direction {
            Some(c) => format!("{}/{id}_{c}.cmx", kind.dir()),
            None => format!("{}/{id}.cmx", kind.dir()),
        };
        write_cmx_file(dir.join(&file), m)?;
        entries.push(Entry {
            kind,
            id,
            direction,
            file,
        });
    }
    let manifest = Manifest {
        format: DH2_FORMAT.into(),
        dim: a.dim(),
        tree: a.tree.clone(),
        directions: a.dirs.clone(),
        blocks: a.blocks.clone(),
        row_ranks: a.row_basis.ranks.clone(),
        col_ranks: a.col_basis.ranks.clone(),
        matrices: entries,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec(&manifest)?)?;
    Ok(())
}

pub fn load_dh2(dir: impl AsRef<Path>) -> Result<DH2Matrix> {
    let dir = dir.as_ref();
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    if manifest.format != DH2_FORMAT {
        return Err(Error::Format(format!("unsupported container format {:?}", manifest.format)));
    }
    let n = manifest.tree.len();
    let mut row = ClusterBasis::empty(n);
    let mut col = ClusterBasis::empty(n);
    row.ranks = manifest.row_ranks;
    col.ranks = manifest.col_ranks;
    let mut coupling = BTreeMap::new();
    let mut nearfield = BTreeMap::new();
    for e in manifest.matrices {
        if e.file.contains("..") || Path::new(&e.file).is_absolute() {
            return Err(Error::Format(format!("matrix path {:?} leaves the container", e.file)));
        }
        let m = read_cmx_file(dir.join(&e.file))?;
        let need_dir = || e.direction.ok_or_else(|| Error::Format(format!("{} lacks a direction", e.file)));
        let slot = |maps: &mut Vec<BTreeMap<usize, CMatrix>>| -> Result<()> {
            let c = need_dir()?;
            maps.get_mut(e.id)
                .ok_or_else(|| Error::Format(format!("cluster {} out of range", e.id)))?
                .insert(c, m.clone());
            Ok(())
        };
        match e.kind {
            Kind::RowLeaf => slot(&mut row.leaf)?,
            Kind::RowTransfer => slot(&mut row.transfer)?,
            Kind::ColLeaf => slot(&mut col.leaf)?,
            Kind::ColTransfer => slot(&mut col.transfer)?,
            Kind::Coupling => {
                coupling.insert(e.id, m);
            }
            Kind::Nearfield => {
                nearfield.insert(e.id, m);
            }
        }
    }
    let a = DH2Matrix::new(manifest.tree, manifest.directions, manifest.blocks, row, col, coupling, nearfield)?;
    if a.dim() != manifest.dim {
        return Err(Error::DimensionMismatch {
            expected: manifest.dim,
            found: a.dim(),
        });
    }
    Ok(a)
}
