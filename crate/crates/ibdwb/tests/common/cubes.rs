//! Cube catalog workloads shared by the property tests and the
//! acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use ibdwb::cube::{Aggregate, CubeBuilder, CubeError, DimensionRef};
use ibdwb::{Kernel, Storage};
use ibdwb_core::Value;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::common::dir_contents;
use crate::support::gen::random_table;
use crate::support::oracle;

pub struct World {
    pub dir: tempfile::TempDir,
    pub kernel: Arc<Kernel>,
    pub cubes: CubeBuilder,
    /// (database, table) -> columns
    pub tables: BTreeMap<(String, String), Vec<String>>,
    pub dbs: Vec<PathBuf>,
}

pub fn world(rng: &mut ChaCha8Rng, ndb: usize) -> World {
    let dir = tempfile::tempdir().unwrap();
    let storage = Storage::new();
    let mut tables = BTreeMap::new();
    let mut dbs = Vec::new();
    for d in 0..ndb {
        let p = dir.path().join(format!("user{d}"));
        let db = storage.open_database(&p, true).unwrap();
        let p = p.canonicalize().unwrap();
        for t in 0..rng.random_range(1..=3) {
            let gt = random_table(rng, &format!("T{t}"), 4, 5);
            for s in std::iter::once(gt.create_sql()).chain(gt.insert_sqls()) {
                assert!(storage.execute_autocommit(&db, &s).unwrap().success);
            }
            let cols = gt.columns.iter().map(|c| c.0.clone()).collect();
            tables.insert((p.to_string_lossy().into_owned(), gt.name.clone()), cols);
        }
        dbs.push(p);
    }
    let kernel = Arc::new(Kernel::new(storage));
    let cubes = CubeBuilder::open(kernel.clone(), &dir.path().join("ibdwb.sys"), "u").unwrap();
    cubes.init_catalog().unwrap();
    World { dir, kernel, cubes, tables, dbs }
}

pub type Quad = (String, String, String);

impl World {
    /// A dimension that usually exists, sometimes names a missing column
    /// or table.
    pub fn pick(&self, rng: &mut ChaCha8Rng) -> Quad {
        let keys: Vec<_> = self.tables.keys().collect();
        let (db, t) = (*keys.choose(rng).unwrap()).clone();
        match rng.random_range(0..12) {
            0 => (db, t, "NOPE".into()),
            1 => (db, "MISSING".into(), "C0".into()),
            _ => {
                let c = self.tables[&(db.clone(), t.clone())].choose(rng).unwrap().clone();
                (db, t, c)
            }
        }
    }

    pub fn valid(&self, q: &Quad) -> bool {
        self.tables
            .get(&(q.0.clone(), q.1.clone()))
            .is_some_and(|cols| cols.contains(&q.2))
    }

    pub fn user_files(&self) -> Vec<BTreeMap<PathBuf, Vec<u8>>> {
        self.dbs.iter().map(|p| dir_contents(p)).collect()
    }

    pub fn catalog_scan(&self) -> Vec<(String, String, String, i64, String)> {
        let key = ibdwb::SessionKey::new(self.cubes.catalog_path(), "scan");
        let o = self
            .kernel
            .execute(&key, "", "SELECT CUBENAME, DATABASENAME, TABLENAME, DNUMBER, DIMENSION FROM DIMENSIONLIST")
            .unwrap();
        o.dataset
            .rows
            .into_iter()
            .map(|r| {
                let s = |v: &Value| v.render().unwrap();
                let Value::Int(n) = r[3] else { panic!() };
                (s(&r[0]), s(&r[1]), s(&r[2]), n, s(&r[4]))
            })
            .collect()
    }
}

pub fn dref(q: &Quad) -> DimensionRef {
    DimensionRef::new(q.0.clone(), &q.1, &q.2)
}

const CUBES: [&str; 3] = ["SALES", "stock", "Mixed Cube"];

/// Random add/remove sequences against a reference map. Returns the
/// number of duplicate-dimension attempts seen.
pub fn cube_workload(seed: u64, ops: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = world(&mut rng, 2);
    let before = w.user_files();
    let mut model: BTreeMap<String, Vec<Quad>> = BTreeMap::new();
    let mut duplicates = 0;
    for step in 0..ops {
        let cube = CUBES.choose(&mut rng).unwrap().to_string();
        let fail = |m: String| Err(format!("step {step}: {m}"));
        match rng.random_range(0..10) {
            0 | 1 => {
                let dims: Vec<Quad> = (0..rng.random_range(0..4)).map(|_| w.pick(&mut rng)).collect();
                let r = w.cubes.add_cube(&cube, "owner", "desc", &dims.iter().map(dref).collect::<Vec<_>>());
                let distinct = dims.iter().collect::<BTreeSet<_>>().len() == dims.len();
                let ok = !model.contains_key(&cube) && distinct && dims.iter().all(|d| w.valid(d));
                if r.is_ok() != ok {
                    return fail(format!("add_cube {cube} {dims:?}: {r:?}"));
                }
                if ok {
                    model.insert(cube, dims);
                }
            }
            2..=5 => {
                // Often re-add an existing dimension.
                let q = match model.get(&cube) {
                    Some(ds) if !ds.is_empty() && rng.random_bool(0.3) => ds.choose(&mut rng).unwrap().clone(),
                    _ => w.pick(&mut rng),
                };
                let r = w.cubes.add_dimension(&cube, &dref(&q));
                match model.get_mut(&cube) {
                    None => {
                        if !matches!(r, Err(CubeError::CubeNotFound(_))) {
                            return fail(format!("{r:?}"));
                        }
                    }
                    Some(ds) if ds.contains(&q) => {
                        duplicates += 1;
                        if !matches!(r, Err(CubeError::DuplicateDimension { .. })) {
                            return fail(format!("duplicate accepted: {r:?}"));
                        }
                    }
                    Some(ds) if w.valid(&q) => {
                        ds.push(q);
                        if r.as_ref().ok() != Some(&(ds.len() as i64)) {
                            return fail(format!("dnumber {r:?}, expected {}", ds.len()));
                        }
                    }
                    Some(_) => {
                        if r.is_ok() {
                            return fail("invalid dimension accepted".into());
                        }
                    }
                }
            }
            6..=8 => {
                let q = match model.get(&cube) {
                    Some(ds) if !ds.is_empty() && rng.random_bool(0.8) => ds.choose(&mut rng).unwrap().clone(),
                    _ => w.pick(&mut rng),
                };
                let r = w.cubes.remove_dimension(&cube, &dref(&q));
                let ok = match model.get_mut(&cube) {
                    Some(ds) => match ds.iter().position(|d| *d == q) {
                        Some(i) => {
                            ds.remove(i);
                            true
                        }
                        None => false,
                    },
                    None => false,
                };
                if r.is_ok() != ok {
                    return fail(format!("remove_dimension {r:?}"));
                }
            }
            _ => {
                let r = w.cubes.remove_cube(&cube);
                if r.is_ok() != model.remove(&cube).is_some() {
                    return fail(format!("remove_cube {r:?}"));
                }
            }
        }

        // Catalog agrees with the model.
        let names: Vec<String> = w.cubes.display_all_cubes().unwrap().into_iter().map(|c| c.name).collect();
        if names != model.keys().cloned().collect::<Vec<_>>() {
            return fail(format!("cubes {names:?}"));
        }
        for (name, dims) in &model {
            let (_, got) = w.cubes.display_cube(name).unwrap();
            let got: Vec<(i64, Quad)> = got
                .into_iter()
                .map(|d| (d.dnumber, (d.database, d.table, d.dimension)))
                .collect();
            let want: Vec<(i64, Quad)> = dims.iter().cloned().enumerate().map(|(i, q)| (i as i64 + 1, q)).collect();
            if got != want {
                return fail(format!("{name}: {got:?} != {want:?}"));
            }
        }
        // Raw scan: no repeated quadruple, dnumbers exactly 1..n per cube.
        let scan = w.catalog_scan();
        let quads: BTreeSet<_> = scan.iter().map(|r| (&r.0, &r.1, &r.2, &r.4)).collect();
        if quads.len() != scan.len() {
            return fail("repeated quadruple".into());
        }
        let mut per: BTreeMap<&String, Vec<i64>> = BTreeMap::new();
        for r in &scan {
            per.entry(&r.0).or_default().push(r.3);
        }
        for (c, mut ns) in per {
            ns.sort();
            if ns != (1..=ns.len() as i64).collect::<Vec<_>>() {
                return fail(format!("{c}: dnumbers {ns:?}"));
            }
        }
        if w.user_files() != before {
            return fail("a user database changed".into());
        }
    }
    let _ = &w.dir;
    Ok(duplicates)
}

/// Builds a cube over one random table, evaluates a random selection and
/// compares with the directly executed GROUP BY and the naive evaluator.
pub fn evaluation_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let storage = Storage::new();
    let p = dir.path().join("src");
    let db = storage.open_database(&p, true).unwrap();
    let p = p.canonicalize().unwrap();
    let t = random_table(rng, "FACTS", 6, 120);
    for s in std::iter::once(t.create_sql()).chain(t.insert_sqls()) {
        assert!(storage.execute_autocommit(&db, &s).unwrap().success);
    }
    let kernel = Arc::new(Kernel::new(storage.clone()));
    let cubes = CubeBuilder::open(kernel, &dir.path().join("ibdwb.sys"), "analyst").unwrap();
    cubes.init_catalog().unwrap();
    let dims: Vec<DimensionRef> = t.columns.iter().map(|c| DimensionRef::new(p.to_string_lossy(), "facts", &c.0)).collect();
    cubes.add_cube("C", "o", "d", &dims).map_err(|e| e.to_string())?;

    let n = dims.len() as i64;
    let mut selected: Vec<i64> = (1..=n).filter(|_| rng.random_bool(0.5)).collect();
    if selected.is_empty() {
        selected.push(rng.random_range(1..=n));
    }
    let numeric: Vec<&String> = t.columns.iter().filter(|c| c.1.is_numeric()).map(|c| &c.0).collect();
    let use_measure = rng.random_bool(0.85);
    let (measure, agg) = match numeric.choose(rng) {
        Some(m) if use_measure => {
            let agg = *[Aggregate::Count, Aggregate::Sum, Aggregate::Avg, Aggregate::Min, Aggregate::Max]
                .choose(rng)
                .unwrap();
            ((*m).clone(), agg)
        }
        _ => ("*".to_string(), Aggregate::Count),
    };

    let got = cubes.evaluate_cube("C", &selected, &measure, agg).map_err(|e| e.to_string())?;

    let cols: Vec<&str> = selected.iter().map(|&i| t.columns[i as usize - 1].0.as_str()).collect();
    let sql = format!("SELECT {0}, {agg}({measure}) FROM FACTS GROUP BY {0}", cols.join(", "));
    let direct = storage.execute_autocommit(&db, &sql).unwrap().into_result().map_err(|e| e.to_string())?;
    if !oracle::same_multiset(&got.rows, &direct.rows) {
        return Err(format!("{sql}: cube and direct results differ"));
    }
    let parsed = match ibdwb_core::sql::parse_statement(&sql).unwrap() {
        ibdwb_core::sql::Statement::Select(s) => s,
        _ => unreachable!(),
    };
    let naive = oracle::run(&parsed, &t).ok_or("overflow")?;
    if !oracle::same_multiset(&got.rows, &naive.rows) {
        return Err(format!("{sql}: cube and naive results differ"));
    }
    Ok(())
}

