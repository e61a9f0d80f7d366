#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn cargo() -> String {
    std::env::var("CARGO").unwrap_or_else(|_| "cargo".into())
}

/// Every file under `root` with its bytes, keyed by relative path.
pub fn dir_contents(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let Ok(entries) = std::fs::read_dir(dir) else { return };
        for e in entries.flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn lib_file(target: &Path, crate_name: &str) -> PathBuf {
    let file = format!(
        "{}{}{}",
        std::env::consts::DLL_PREFIX,
        crate_name,
        std::env::consts::DLL_SUFFIX
    );
    target.join("debug").join(file)
}

/// Builds both sample modules once per test binary and returns the
/// directory of the resulting libraries.
pub fn plugin_libraries() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let root = workspace_root();
        let target = root.join("target/plugin-test");
        let status = Command::new(cargo())
            .current_dir(&root)
            .args(["build", "--offline", "-q", "-p", "sampleplug", "-p", "samplediscover", "--target-dir"])
            .arg(&target)
            .status()
            .expect("run cargo");
        assert!(status.success(), "building the sample modules failed");
        target
    })
}

/// Copies a sample module's init file and library into `dest` as
/// `<name>.ini` and `<name>.<dll ext>`, returning the init file path.
pub fn bundle(dest: &Path, crate_name: &str) -> PathBuf {
    let target = plugin_libraries();
    std::fs::create_dir_all(dest).unwrap();
    let ini = dest.join(format!("{crate_name}.ini"));
    std::fs::copy(workspace_root().join(format!("crates/{crate_name}/{crate_name}.ini")), &ini).unwrap();
    std::fs::copy(
        lib_file(target, crate_name),
        ini.with_extension(std::env::consts::DLL_EXTENSION),
    )
    .unwrap();
    ini
}

/// Writes an init file with a placeholder library next to it. Enough for
/// registry operations, which never load the library.
pub fn fake_module(dir: &Path, file: &str, name: &str, version: u32, kind: &str) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let ini = dir.join(format!("{file}.ini"));
    std::fs::write(
        &ini,
        format!("[SETTINGS]\nTYPE={kind}\nNAME={name}\nVERSION={version}\nAUTHOR=t\nINIT=\nDESC=d\n"),
    )
    .unwrap();
    std::fs::write(ini.with_extension(std::env::consts::DLL_EXTENSION), b"not a library").unwrap();
    ini
}
