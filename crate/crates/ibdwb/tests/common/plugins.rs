//! Sample modules driven through the platforms.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ibdwb::host::KernelHost;
use ibdwb::{Kernel, Platform, PlatformKind, SessionKey, Storage};
use ibdwb_core::host::LogLevel;
use rand::Rng;

use crate::common::bundle;

pub struct Setup {
    pub dir: tempfile::TempDir,
    pub kernel: Arc<Kernel>,
    pub sys: PathBuf,
    pub db: PathBuf,
}

pub fn setup() -> Setup {
    let dir = tempfile::tempdir().unwrap();
    let storage = Storage::new();
    let db = dir.path().join("mart");
    storage.open_database(&db, true).unwrap();
    let db = db.canonicalize().unwrap();
    Setup {
        sys: dir.path().join("ibdwb.sys"),
        kernel: Arc::new(Kernel::new(storage)),
        dir,
        db,
    }
}

pub fn query(kernel: &Kernel, db: &Path, sql: &str) -> Vec<Vec<Option<String>>> {
    let o = kernel.execute(&SessionKey::new(db, "check"), "", sql).unwrap();
    assert!(o.success, "{sql}: {:?}", o.error);
    o.dataset.rows.iter().map(|r| r.iter().map(|v| v.render()).collect()).collect()
}

pub const CSV: &str = "id,name,score\n1,ann,2.5\n2,\"bob, jr\",\n3,cy,4\n";

/// Installs the data plug from its init file, loads a three-row CSV
/// through `activate_module` and checks the loaded rows.
pub fn data_plug_round_trip() -> Result<(), String> {
    let s = setup();
    let ini = bundle(&s.dir.path().join("modules"), "sampleplug");
    let p = Platform::open(s.kernel.clone(), &s.sys, PlatformKind::DataPlug).map_err(|e| e.to_string())?;
    p.install_module(&ini).map_err(|e| e.to_string())?;
    let csv = s.dir.path().join("in.csv");
    std::fs::write(&csv, CSV).unwrap();
    let args: Vec<String> = vec![csv.to_string_lossy().into(), s.db.to_string_lossy().into(), "people".into()];
    let act = p.activate_module("sample", "alice", &args).map_err(|e| e.to_string())?;
    if act.status != 0 {
        return Err(format!("status {} log {:?}", act.status, act.log));
    }
    let rows = query(&s.kernel, &s.db, "SELECT ID, NAME, SCORE FROM PEOPLE ORDER BY ID");
    let want = vec![
        vec![Some("1".into()), Some("ann".into()), Some("2.5".into())],
        vec![Some("2".into()), Some("bob, jr".into()), None],
        vec![Some("3".into()), Some("cy".into()), Some("4.0".into())],
    ];
    if rows != want {
        return Err(format!("rows {rows:?}"));
    }
    if !p.active_entries().map_err(|e| e.to_string())?.is_empty() {
        return Err("activation left an active entry".into());
    }
    Ok(())
}

/// Random baskets over at most `max_items` items, stored as
/// (TXN, ITEM) rows.
pub fn baskets(rng: &mut impl Rng, max_items: usize) -> BTreeMap<String, BTreeSet<String>> {
    let n = rng.random_range(1..=max_items);
    (0..rng.random_range(1..25))
        .map(|t| {
            let b = (0..n).filter(|_| rng.random_bool(0.4)).map(|i| format!("item{i}")).collect();
            (format!("t{t:02}"), b)
        })
        .collect()
}

/// Every frequent itemset by direct enumeration, rendered as the module
/// logs them.
pub fn brute_force_itemsets(b: &BTreeMap<String, BTreeSet<String>>, minsup: usize) -> Vec<String> {
    let items: Vec<&String> = b.values().flatten().collect::<BTreeSet<_>>().into_iter().collect();
    let mut found: Vec<(usize, Vec<&String>, usize)> = Vec::new();
    for mask in 1u32..(1 << items.len()) {
        let set: Vec<&String> = (0..items.len()).filter(|i| mask >> i & 1 == 1).map(|i| items[i]).collect();
        let support = b.values().filter(|t| set.iter().all(|i| t.contains(*i))).count();
        if support >= minsup {
            found.push((set.len(), set, support));
        }
    }
    found.sort();
    found
        .into_iter()
        .map(|(_, set, s)| format!("{{{}}}:{s}", set.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(",")))
        .collect()
}

pub fn load_baskets(kernel: &Kernel, db: &Path, table: &str, b: &BTreeMap<String, BTreeSet<String>>) {
    let key = SessionKey::new(db, "loader");
    let run = |sql: &str| assert!(kernel.execute(&key, "", sql).unwrap().success, "{sql}");
    run(&format!("CREATE TABLE {table} (TXN VARCHAR(8) NOT NULL, ITEM VARCHAR(8))"));
    for (t, items) in b {
        for i in items {
            run(&format!("INSERT INTO {table} VALUES ('{t}', '{i}')"));
        }
        // Empty baskets still exist as a transaction with a NULL item.
        if items.is_empty() {
            run(&format!("INSERT INTO {table} VALUES ('{t}', NULL)"));
        }
    }
}

fn info(log: &[(LogLevel, String)]) -> Vec<String> {
    log.iter().filter(|(l, _)| *l == LogLevel::Info).map(|(_, m)| m.clone()).collect()
}

/// Runs the discoverer through the library boundary on random baskets
/// and compares its findings, logged and stored, with enumeration. The
/// shipped init file fixes minsup at 2.
pub fn discoverer_matches_enumeration(rng: &mut impl Rng, cases: usize) -> Result<(), String> {
    let s = setup();
    let ini = bundle(&s.dir.path().join("modules"), "samplediscover");
    let p = Platform::open(s.kernel.clone(), &s.sys, PlatformKind::Discoverer).map_err(|e| e.to_string())?;
    p.install_module(&ini).map_err(|e| e.to_string())?;
    for case in 0..cases {
        let b = baskets(rng, 12);
        let table = format!("B{case}");
        let out = format!("R{case}");
        load_baskets(&s.kernel, &s.db, &table, &b);
        let args: Vec<String> = [s.db.to_string_lossy().as_ref(), &table, "TXN", "ITEM", &out]
            .iter()
            .map(|x| x.to_string())
            .collect();
        let act = p.activate_module("sample-apriori", "miner", &args).map_err(|e| e.to_string())?;
        if act.status != 0 {
            return Err(format!("case {case}: status {} {:?}", act.status, act.log));
        }
        let want = brute_force_itemsets(&b, 2);
        let logged = info(&act.log);
        if logged != want {
            return Err(format!("case {case}: logged {logged:?}, expected {want:?}"));
        }
        let stored: Vec<String> = query(&s.kernel, &s.db, &format!("SELECT ITEMS, SUPPORT FROM {out}"))
            .into_iter()
            .map(|r| format!("{{{}}}:{}", r[0].clone().unwrap(), r[1].clone().unwrap()))
            .collect();
        if stored != want {
            return Err(format!("case {case}: stored {stored:?}"));
        }
        // The same module linked in directly gives the same answer.
        let host = KernelHost::new(s.kernel.clone(), {
            let mut a = vec!["miner".to_string()];
            a.extend(args[..4].iter().cloned());
            a
        });
        let status = samplediscover::run(&host, "minsup 2");
        if status != 0 || info(&host.take_log()) != want {
            return Err(format!("case {case}: in-process run differs"));
        }
    }
    if !p.active_entries().map_err(|e| e.to_string())?.is_empty() {
        return Err("activation left an active entry".into());
    }
    Ok(())
}
