#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xtal_core::canonical::to_canonical_json;
use xtal_core::crystal::Crystal;
use xtal_core::fixtures::{benzene, rotation, to_cif, Placement};
use xtal_core::lattice::{Lattice, Vec3};

pub fn xtal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xtal")).args(args).output().expect("binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Benzene in P2_1 with the cell scaled by `scale` and the molecule turned
/// by `turn` degrees about z.
pub fn benzene_cif(name: &str, scale: f64, turn: f64) -> String {
    let lattice = Lattice::from_parameters(7.6 * scale, 9.4 * scale, 7.2 * scale, 90.0, 104.0, 90.0).unwrap();
    let r = rotation(Vec3::new(1.0, 0.3, 0.2), 50.0) * rotation(Vec3::z(), 12.0 + turn);
    let placement = Placement::new(benzene(), r, Vec3::new(0.25, 0.2, 0.3));
    to_cif(name, &lattice, &["x,y,z", "-x,y+1/2,-z"], &[placement], true)
}

pub fn write_crystal(dir: &Path, id: &str, c: &Crystal) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let path = dir.join(format!("{id}.json"));
    std::fs::write(&path, to_canonical_json(c)).unwrap();
    path
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
