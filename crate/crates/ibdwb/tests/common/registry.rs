//! Module install/uninstall sequences against a map-maximum reference.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ibdwb::platform::{InstallStatus, PlatformError};
use ibdwb::{Kernel, Platform, PlatformKind, Storage};
use ibdwb_core::initfile::ModuleKind;
use rand::Rng;

use crate::common::fake_module;

pub const NAMES: [&str; 5] = ["alpha", "beta", "gamma", "delta", "Apriori Text"];

#[derive(Debug, Clone)]
pub enum Op {
    Install { platform: usize, name: usize, version: u32, wizard: bool },
    Uninstall { platform: usize, name: usize },
}

pub fn random_ops(rng: &mut impl Rng, n: usize, platforms: usize) -> Vec<Op> {
    (0..n)
        .map(|_| {
            let platform = rng.random_range(0..platforms);
            let name = rng.random_range(0..NAMES.len());
            if rng.random_bool(0.8) {
                Op::Install {
                    platform,
                    name,
                    version: rng.random_range(1..=4),
                    wizard: rng.random_bool(0.5),
                }
            } else {
                Op::Uninstall { platform, name }
            }
        })
        .collect()
}

pub fn platforms(kernel: &Arc<Kernel>, sys: &Path) -> [Platform; 2] {
    [
        Platform::open(kernel.clone(), sys, PlatformKind::DataPlug).unwrap(),
        Platform::open(kernel.clone(), sys, PlatformKind::Discoverer).unwrap(),
    ]
}

pub type Registry = BTreeMap<String, (u32, ModuleKind)>;

pub fn registry(p: &Platform) -> Registry {
    p.list_modules().unwrap().into_iter().map(|m| (m.name, (m.version, m.kind))).collect()
}

fn render(r: &Result<InstallStatus, PlatformError>) -> (bool, String) {
    match r {
        Ok(s) => (true, s.to_string()),
        Err(e) => (false, e.to_string()),
    }
}

/// Expected (success, message) of installing `name` at `version`.
pub fn expected_install(model: &Registry, name: &str, version: u32) -> (bool, String) {
    match model.get(name) {
        None => (true, "Module installed".into()),
        Some((v, _)) if *v == version => (false, "Tool already installed".into()),
        Some((v, _)) if *v > version => (false, "Attempt to install older version".into()),
        Some((v, _)) => (true, format!("Module upgraded from version {v}")),
    }
}

/// Applies `ops` in a fresh system database, comparing every step's
/// result, message and registry state with the reference. Ends by
/// reopening the registry from disk.
pub fn check_ops(ops: &[Op]) -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("ibdwb.sys");
    let kernel = Arc::new(Kernel::new(Storage::new()));
    let ps = platforms(&kernel, &sys);
    let mut model: [Registry; 2] = Default::default();
    for (i, op) in ops.iter().enumerate() {
        match *op {
            Op::Install { platform, name, version, wizard } => {
                let kind = if wizard { "wizard" } else { "tool" };
                let ini = fake_module(&dir.path().join(format!("m{i}")), "mod", NAMES[name], version, kind);
                let got = render(&ps[platform].install_module(&ini));
                let want = expected_install(&model[platform], NAMES[name], version);
                if want.0 {
                    let k = if wizard { ModuleKind::Wizard } else { ModuleKind::Tool };
                    model[platform].insert(NAMES[name].to_string(), (version, k));
                }
                if got != want {
                    return Err(format!("op {i} {op:?}: got {got:?}, expected {want:?}"));
                }
            }
            Op::Uninstall { platform, name } => {
                let r = ps[platform].uninstall_module(NAMES[name]);
                let present = model[platform].remove(NAMES[name]).is_some();
                let good = if present {
                    r.is_ok()
                } else {
                    matches!(r, Err(PlatformError::ModuleNotFound(_)))
                };
                if !good {
                    return Err(format!("op {i} {op:?}: {r:?}"));
                }
            }
        }
        for p in 0..2 {
            if registry(&ps[p]) != model[p] {
                return Err(format!("op {i}: registry {:?} vs {:?}", registry(&ps[p]), model[p]));
            }
            let dm: Vec<(String, u32)> = ps[p].dmodule_entries().unwrap().into_iter().map(|d| (d.name, d.version)).collect();
            let want: Vec<(String, u32)> = model[p].iter().map(|(n, (v, _))| (n.clone(), *v)).collect();
            if dm != want {
                return Err(format!("op {i}: module index {dm:?} vs {want:?}"));
            }
        }
    }
    let again = platforms(&Arc::new(Kernel::new(Storage::new())), &sys);
    for p in 0..2 {
        if registry(&again[p]) != model[p] {
            return Err("registry differs after reopening".into());
        }
    }
    Ok(())
}
