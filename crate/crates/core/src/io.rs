//! On-disk systems: a TOML manifest naming MatrixMarket files.
//!
//! ```text
//! system.toml   manifest
//! A.mtx B.mtx C.mtx [E.mtx] N1.mtx …
//! H.mtx                      sparse mode-1 matricization, n × n²
//! H1_a.mtx H1_b.mtx …        or factor pairs
//! ```
//!
//! Values are written with 17 significant digits, so a save/load round trip
//! reproduces every binary64 entry.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use nalgebra_sparse::io::load_coo_from_matrix_market_file;
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::{Hessian, Storage};
use crate::system::{QBSystem, ReducedModel};

pub const MANIFEST: &str = "system.toml";
const FORMAT: &str = "qbmor-system";
const VERSION: u32 = 1;
/// Mode-1 Hessians up to this state dimension load as dense storage.
const DENSE_LOAD_LIMIT: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Full,
    Reduced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianEntry {
    /// `mode1` or `factored`
    pub storage: String,
    pub symmetric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub kind: Kind,
    #[serde(default)]
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub a: String,
    pub b: String,
    pub c: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<String>,
    pub n_mats: Vec<String>,
    pub hessian: HessianEntry,
    /// Free-form provenance (method, order, seed, …).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_entries(path: &Path, rows: usize, cols: usize, entries: &[(usize, usize, f64)]) -> Result<()> {
    let mut out = String::with_capacity(32 * entries.len() + 64);
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{rows} {cols} {}\n", entries.len()));
    for &(i, j, v) in entries {
        out.push_str(&format!("{} {} {}\n", i + 1, j + 1, fmt(v)));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes the nonzeros of `m` in row-major order.
pub fn write_dense_mtx(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut entries = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    write_entries(path, m.nrows(), m.ncols(), &entries)
}

pub fn write_csr_mtx(path: &Path, m: &CsrMatrix<f64>) -> Result<()> {
    let entries: Vec<_> = m.triplet_iter().filter(|t| *t.2 != 0.0).map(|(i, j, v)| (i, j, *v)).collect();
    write_entries(path, m.nrows(), m.ncols(), &entries)
}

fn read_coo(path: &Path) -> Result<CooMatrix<f64>> {
    load_coo_from_matrix_market_file::<f64, _>(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn read_dense_mtx(path: &Path) -> Result<DMatrix<f64>> {
    let coo = read_coo(path)?;
    let mut m = DMatrix::zeros(coo.nrows(), coo.ncols());
    for (i, j, v) in coo.triplet_iter() {
        m[(i, j)] += *v;
    }
    Ok(m)
}

pub fn read_csr_mtx(path: &Path) -> Result<CsrMatrix<f64>> {
    Ok(CsrMatrix::from(&read_coo(path)?))
}

fn expect_shape(name: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Dimension(format!("{name} is {}×{}, manifest says {rows}×{cols}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Nonzeros of the mode-1 matricization as `(i, a·n + b, value)`.
fn mode1_entries(h: &Hessian) -> Vec<(usize, usize, f64)> {
    let n = h.n();
    let d = match h.storage() {
        Storage::Dense(d) => Cow::Borrowed(d),
        _ => Cow::Owned(h.to_dense()),
    };
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n * n {
            if d[(i, j)] != 0.0 {
                out.push((i, j, d[(i, j)]));
            }
        }
    }
    out
}

/// Packs a sparse mode-1 matricization into factor pairs: pair `j` carries
/// the `j`-th nonzero of every row as `value·e_a ⊗ e_b`.
fn pack_mode1(n: usize, coo: &CooMatrix<f64>) -> Result<Vec<(CsrMatrix<f64>, CsrMatrix<f64>)>> {
    let mut rows: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    let csr = CsrMatrix::from(coo);
    for (i, j, v) in csr.triplet_iter() {
        if *v != 0.0 {
            rows[i].push((j / n, j % n, *v));
        }
    }
    let depth = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut pairs = Vec::with_capacity(depth);
    for k in 0..depth {
        let mut a = CooMatrix::new(n, n);
        let mut b = CooMatrix::new(n, n);
        for (i, row) in rows.iter().enumerate() {
            if let Some(&(ia, ib, v)) = row.get(k) {
                a.push(i, ia, v);
                b.push(i, ib, 1.0);
            }
        }
        pairs.push((CsrMatrix::from(&a), CsrMatrix::from(&b)));
    }
    Ok(pairs)
}

fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST)
    } else {
        path.to_path_buf()
    }
}

/// Writes `sys` into directory `dir` (created if missing).
pub fn save_system(dir: &Path, sys: &QBSystem, kind: Kind, meta: BTreeMap<String, String>) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    write_dense_mtx(&dir.join("A.mtx"), sys.a())?;
    write_dense_mtx(&dir.join("B.mtx"), sys.b())?;
    write_dense_mtx(&dir.join("C.mtx"), sys.c())?;
    let e = match sys.e() {
        Some(e) => {
            write_dense_mtx(&dir.join("E.mtx"), e)?;
            Some("E.mtx".to_string())
        }
        None => None,
    };
    let mut n_mats = Vec::new();
    for (k, nk) in sys.n_mats().iter().enumerate() {
        let name = format!("N{}.mtx", k + 1);
        write_dense_mtx(&dir.join(&name), nk)?;
        n_mats.push(name);
    }
    let h = sys.h();
    let hessian = match h.storage() {
        Storage::Factored(pairs) => {
            let mut names = Vec::new();
            for (j, (a, b)) in pairs.iter().enumerate() {
                let na = format!("H{}_a.mtx", j + 1);
                let nb = format!("H{}_b.mtx", j + 1);
                write_csr_mtx(&dir.join(&na), a)?;
                write_csr_mtx(&dir.join(&nb), b)?;
                names.push([na, nb]);
            }
            HessianEntry { storage: "factored".into(), symmetric: h.is_symmetric(), file: None, pairs: names }
        }
        _ => {
            let n = h.n();
            write_entries(&dir.join("H.mtx"), n, n * n, &mode1_entries(h))?;
            HessianEntry { storage: "mode1".into(), symmetric: h.is_symmetric(), file: Some("H.mtx".into()), pairs: Vec::new() }
        }
    };
    let manifest = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        kind,
        label: sys.label().to_string(),
        n: sys.n(),
        m: sys.m(),
        p: sys.p(),
        a: "A.mtx".into(),
        b: "B.mtx".into(),
        c: "C.mtx".into(),
        e,
        n_mats,
        hessian,
        meta,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join(MANIFEST), text)?;
    Ok(manifest)
}

pub fn save_reduced(dir: &Path, red: &ReducedModel, meta: BTreeMap<String, String>) -> Result<Manifest> {
    save_system(dir, red.system(), Kind::Reduced, meta)
}

pub fn read_manifest(path: &Path) -> Result<(Manifest, PathBuf)> {
    let mpath = manifest_path(path);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::Io(format!("{}: {e}", mpath.display())))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", mpath.display())))?;
    if manifest.format != FORMAT || manifest.version != VERSION {
        return Err(Error::Parse(format!("{}: unsupported format {} v{}", mpath.display(), manifest.format, manifest.version)));
    }
    let dir = mpath.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, dir))
}

/// Loads a system from a manifest file or a directory holding one.
pub fn load_system(path: &Path) -> Result<(QBSystem, Manifest)> {
    let (mf, dir) = read_manifest(path)?;
    let (n, m, p) = (mf.n, mf.m, mf.p);
    let a = read_dense_mtx(&dir.join(&mf.a))?;
    expect_shape("A", &a, n, n)?;
    let b = read_dense_mtx(&dir.join(&mf.b))?;
    expect_shape("B", &b, n, m)?;
    let c = read_dense_mtx(&dir.join(&mf.c))?;
    expect_shape("C", &c, p, n)?;
    let e = match &mf.e {
        Some(f) => {
            let e = read_dense_mtx(&dir.join(f))?;
            expect_shape("E", &e, n, n)?;
            Some(e)
        }
        None => None,
    };
    let mut n_mats = Vec::new();
    for f in &mf.n_mats {
        let nk = read_dense_mtx(&dir.join(f))?;
        expect_shape("N_k", &nk, n, n)?;
        n_mats.push(nk);
    }
    let h = match mf.hessian.storage.as_str() {
        "factored" => {
            let mut pairs = Vec::new();
            for [fa, fb] in &mf.hessian.pairs {
                pairs.push((read_csr_mtx(&dir.join(fa))?, read_csr_mtx(&dir.join(fb))?));
            }
            Hessian::factored(n, pairs, mf.hessian.symmetric)?
        }
        "mode1" => {
            let f = mf.hessian.file.as_ref().ok_or_else(|| Error::Parse("mode1 Hessian without file".into()))?;
            let coo = read_coo(&dir.join(f))?;
            if coo.nrows() != n || coo.ncols() != n * n {
                return Err(Error::Dimension(format!("H is {}×{}, expected {n}×{}", coo.nrows(), coo.ncols(), n * n)));
            }
            if n <= DENSE_LOAD_LIMIT || mf.kind == Kind::Reduced {
                let mut d = DMatrix::zeros(n, n * n);
                for (i, j, v) in coo.triplet_iter() {
                    d[(i, j)] += *v;
                }
                Hessian::dense(d)?
            } else {
                Hessian::factored(n, pack_mode1(n, &coo)?, false)?
            }
        }
        other => return Err(Error::Parse(format!("unknown Hessian storage `{other}`"))),
    };
    let sys = QBSystem::new(a, h, n_mats, b, c, e)?.with_label(mf.label.clone());
    Ok((sys, mf))
}

pub fn load_reduced(path: &Path) -> Result<(ReducedModel, Manifest)> {
    let (sys, mf) = load_system(path)?;
    Ok((ReducedModel::from_system(sys)?, mf))
}
