//! Reading and writing systems as a directory of Matrix Market and text files.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use saddlekit::sparse::{read_matrix_market, read_vector, write_matrix_market, write_vector};
use saddlekit::{CsrMatrix, SaddlePointSystem};
use sha2::{Digest, Sha256};

use crate::args::SignConvention;
use crate::failure::Failure;

pub const FILE_NAMES: [&str; 5] = ["A.mtx", "B.mtx", "C.mtx", "f.txt", "g.txt"];

fn with_path<T>(path: &Path, r: saddlekit::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn matrix(dir: &Path, name: &str) -> Result<CsrMatrix, Failure> {
    let path = dir.join(name);
    with_path(&path, read_matrix_market(open(&path)?))
}

fn vector(dir: &Path, name: &str) -> Result<Vec<f64>, Failure> {
    let path = dir.join(name);
    with_path(&path, read_vector(open(&path)?))
}

pub fn load_system(dir: &Path, convention: SignConvention) -> Result<SaddlePointSystem, Failure> {
    let a = matrix(dir, "A.mtx")?;
    let b = matrix(dir, "B.mtx")?;
    let c = matrix(dir, "C.mtx")?;
    let f = vector(dir, "f.txt")?;
    let g = vector(dir, "g.txt")?;
    let sys = match convention {
        SignConvention::Paper => SaddlePointSystem::new(a, b, c, f, g),
        SignConvention::Symmetric => SaddlePointSystem::from_symmetric_form(a, b, c, f, g),
    };
    Ok(sys?)
}

/// Serialized bytes of each file, in [`FILE_NAMES`] order.
pub fn encode_system(sys: &SaddlePointSystem, convention: SignConvention) -> Result<Vec<Vec<u8>>, Failure> {
    let (b, g) = match convention {
        SignConvention::Paper => (sys.b().clone(), sys.g().to_vec()),
        SignConvention::Symmetric => sys.symmetric_form_blocks(),
    };
    let mut out = Vec::with_capacity(5);
    for m in [sys.a(), &b, sys.c()] {
        let mut buf = Vec::new();
        write_matrix_market(m, &mut buf)?;
        out.push(buf);
    }
    for v in [sys.f(), &g[..]] {
        let mut buf = Vec::new();
        write_vector(v, &mut buf)?;
        out.push(buf);
    }
    Ok(out)
}

/// Writes the system files and returns their SHA-256 digests.
pub fn save_system(
    dir: &Path,
    sys: &SaddlePointSystem,
    convention: SignConvention,
) -> Result<Vec<(String, String)>, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
    let mut sums = Vec::with_capacity(5);
    for (name, bytes) in FILE_NAMES.iter().zip(encode_system(sys, convention)?) {
        write_file(&dir.join(name), &bytes)?;
        sums.push((name.to_string(), hex::encode(Sha256::digest(&bytes))));
    }
    Ok(sums)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::config(format!("{}: {e}", path.display()));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(bytes).map_err(io)?;
    w.flush().map_err(io)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}
