//! Cube catalog: named sets of (database, table, column) dimensions,
//! recorded without touching the source data, and their evaluation as a
//! GROUP BY over the original table.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ibdwb_core::sql::{parse_statement, quote, Statement};
use ibdwb_core::{DataSet, SqlError, TableSchema, Value};
use thiserror::Error;

use crate::kernel::{Kernel, KernelError, KernelRequest, KernelResponse};
use crate::platform::{open_system_database, SystemError, SystemTx};

pub const CUBETABLE_DDL: &str = "CREATE TABLE CUBETABLE(CUBENAME varchar(255) NOT NULL, CUBEOWNER varchar(255) NOT NULL, CUBEDESC varchar(255) NOT NULL, PRIMARY KEY (CUBENAME));";
pub const DIMENSIONLIST_DDL: &str = "CREATE TABLE DIMENSIONLIST(CUBENAME varchar(255) NOT NULL, DATABASENAME varchar(255) NOT NULL, TABLENAME varchar(255) NOT NULL, DNUMBER integer NOT NULL, DIMENSION varchar(255) NOT NULL);";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeRecord {
    pub name: String,
    pub owner: String,
    pub desc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DimensionRecord {
    pub cube: String,
    pub database: String,
    pub table: String,
    pub dnumber: i64,
    pub dimension: String,
}

/// A source column as given by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionRef {
    pub database: String,
    pub table: String,
    pub column: String,
}

impl DimensionRef {
    pub fn new(database: impl Into<String>, table: &str, column: &str) -> Self {
        DimensionRef {
            database: database.into(),
            table: table.to_ascii_uppercase(),
            column: column.to_ascii_uppercase(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregate {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl Aggregate {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_uppercase().as_str() {
            "COUNT" => Aggregate::Count,
            "SUM" => Aggregate::Sum,
            "AVG" => Aggregate::Avg,
            "MIN" => Aggregate::Min,
            "MAX" => Aggregate::Max,
            _ => return None,
        })
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Count => "COUNT",
            Aggregate::Sum => "SUM",
            Aggregate::Avg => "AVG",
            Aggregate::Min => "MIN",
            Aggregate::Max => "MAX",
        })
    }
}

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("catalog table {0} exists with a different schema")]
    SchemaConflict(String),
    #[error("cube {0} already exists")]
    CubeExists(String),
    #[error("cube {0} not found")]
    CubeNotFound(String),
    #[error("dimension {database}:{table}:{column} is already part of cube {cube}")]
    DuplicateDimension {
        cube: String,
        database: String,
        table: String,
        column: String,
    },
    #[error("dimension {database}:{table}:{column} is not part of cube {cube}")]
    DimensionNotFound {
        cube: String,
        database: String,
        table: String,
        column: String,
    },
    #[error("no dimension {dnumber} in cube {cube}")]
    NoSuchDnumber { cube: String, dnumber: i64 },
    #[error("unknown table {table} in {database}")]
    UnknownTable { database: String, table: String },
    #[error("unknown column {column} in {table}")]
    UnknownColumn { table: String, column: String },
    #[error("selected dimensions span more than one table")]
    CrossTableUnsupported,
    #[error("no dimensions selected")]
    EmptySelection,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("catalog: {0}")]
    Catalog(SqlError),
    #[error("query: {0}")]
    Query(SqlError),
}

impl From<SystemError> for CubeError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Kernel(e) => CubeError::Kernel(e),
            SystemError::Sql(e) => CubeError::Catalog(e),
        }
    }
}

fn text(v: &Value) -> String {
    v.render().unwrap_or_default()
}

/// Expected schema of a catalog table, derived from its DDL.
fn ddl_schema(ddl: &str) -> TableSchema {
    match parse_statement(ddl) {
        Ok(Statement::CreateTable(c)) => TableSchema::new(c.name, c.columns, c.primary_key).expect("catalog DDL"),
        other => unreachable!("catalog DDL parses as CREATE TABLE: {other:?}"),
    }
}

pub struct CubeBuilder {
    kernel: Arc<Kernel>,
    catalog: PathBuf,
    user: String,
}

impl CubeBuilder {
    /// Binds to the catalog database at `catalog`, creating it if absent.
    /// Call [`CubeBuilder::init_catalog`] before using it.
    pub fn open(kernel: Arc<Kernel>, catalog: &Path, user: &str) -> Result<Self, CubeError> {
        let catalog = open_system_database(&kernel, catalog)?;
        Ok(CubeBuilder {
            kernel,
            catalog,
            user: user.to_string(),
        })
    }

    pub fn catalog_path(&self) -> &Path {
        &self.catalog
    }

    fn write<R>(&self, f: impl FnOnce(&SystemTx<'_>) -> Result<R, CubeError>) -> Result<R, CubeError> {
        SystemTx::write(&self.kernel, &self.catalog, "ibdwb.cube", f)
    }

    fn read<R>(&self, f: impl FnOnce(&SystemTx<'_>) -> Result<R, CubeError>) -> Result<R, CubeError> {
        SystemTx::read(&self.kernel, &self.catalog, "ibdwb.cube", f)
    }

    /// Creates CUBETABLE and DIMENSIONLIST if missing. Existing tables
    /// must match exactly.
    pub fn init_catalog(&self) -> Result<(), CubeError> {
        let db = self.kernel.storage().open_database(&self.catalog, false).map_err(KernelError::from)?;
        self.write(|tx| {
            for ddl in [CUBETABLE_DDL, DIMENSIONLIST_DDL] {
                let want = ddl_schema(ddl);
                match db.schema(&want.name) {
                    Some(have) if have == want => {}
                    Some(_) => return Err(CubeError::SchemaConflict(want.name)),
                    None => {
                        tx.query(ddl)?;
                    }
                }
            }
            Ok(())
        })
    }

    fn cube_exists(&self, tx: &SystemTx<'_>, name: &str) -> Result<bool, CubeError> {
        let ds = tx.query(&format!("SELECT CUBENAME FROM CUBETABLE WHERE CUBENAME = {}", quote(name)))?;
        Ok(!ds.rows.is_empty())
    }

    fn dimensions(&self, tx: &SystemTx<'_>, cube: &str) -> Result<Vec<DimensionRecord>, CubeError> {
        let ds = tx.query(&format!(
            "SELECT CUBENAME, DATABASENAME, TABLENAME, DNUMBER, DIMENSION FROM DIMENSIONLIST \
             WHERE CUBENAME = {} ORDER BY DNUMBER",
            quote(cube)
        ))?;
        Ok(ds
            .rows
            .iter()
            .map(|r| DimensionRecord {
                cube: text(&r[0]),
                database: text(&r[1]),
                table: text(&r[2]),
                dnumber: match r[3] {
                    Value::Int(i) => i,
                    _ => 0,
                },
                dimension: text(&r[4]),
            })
            .collect())
    }

    /// Checks the referenced column exists, reading only committed schema.
    fn validate(&self, dim: &DimensionRef) -> Result<(), CubeError> {
        let db = self
            .kernel
            .storage()
            .open_database(Path::new(&dim.database), false)
            .map_err(KernelError::from)?;
        let schema = db.schema(&dim.table).ok_or_else(|| CubeError::UnknownTable {
            database: dim.database.clone(),
            table: dim.table.clone(),
        })?;
        if schema.column_index(&dim.column).is_none() {
            return Err(CubeError::UnknownColumn {
                table: dim.table.clone(),
                column: dim.column.clone(),
            });
        }
        Ok(())
    }

    fn insert_dimension(&self, tx: &SystemTx<'_>, cube: &str, dim: &DimensionRef) -> Result<i64, CubeError> {
        let existing = self.dimensions(tx, cube)?;
        if existing
            .iter()
            .any(|d| d.database == dim.database && d.table == dim.table && d.dimension == dim.column)
        {
            return Err(CubeError::DuplicateDimension {
                cube: cube.into(),
                database: dim.database.clone(),
                table: dim.table.clone(),
                column: dim.column.clone(),
            });
        }
        self.validate(dim)?;
        let dnumber = existing.iter().map(|d| d.dnumber).max().unwrap_or(0) + 1;
        tx.query(&format!(
            "INSERT INTO DIMENSIONLIST VALUES ({}, {}, {}, {dnumber}, {})",
            quote(cube),
            quote(&dim.database),
            quote(&dim.table),
            quote(&dim.column)
        ))?;
        Ok(dnumber)
    }

    /// Creates a cube with its dimensions numbered 1..n in the given
    /// order. Nothing is recorded if any dimension is rejected.
    pub fn add_cube(&self, name: &str, owner: &str, desc: &str, dims: &[DimensionRef]) -> Result<(), CubeError> {
        self.write(|tx| {
            if self.cube_exists(tx, name)? {
                return Err(CubeError::CubeExists(name.into()));
            }
            tx.query(&format!(
                "INSERT INTO CUBETABLE VALUES ({}, {}, {})",
                quote(name),
                quote(owner),
                quote(desc)
            ))?;
            for d in dims {
                self.insert_dimension(tx, name, d)?;
            }
            Ok(())
        })
    }

    /// Appends a dimension and returns its DNUMBER.
    pub fn add_dimension(&self, cube: &str, dim: &DimensionRef) -> Result<i64, CubeError> {
        self.write(|tx| {
            if !self.cube_exists(tx, cube)? {
                return Err(CubeError::CubeNotFound(cube.into()));
            }
            self.insert_dimension(tx, cube, dim)
        })
    }

    /// Removes a dimension; later dimensions move down to close the gap.
    pub fn remove_dimension(&self, cube: &str, dim: &DimensionRef) -> Result<(), CubeError> {
        self.write(|tx| {
            if !self.cube_exists(tx, cube)? {
                return Err(CubeError::CubeNotFound(cube.into()));
            }
            let dims = self.dimensions(tx, cube)?;
            let Some(gone) = dims
                .iter()
                .find(|d| d.database == dim.database && d.table == dim.table && d.dimension == dim.column)
            else {
                return Err(CubeError::DimensionNotFound {
                    cube: cube.into(),
                    database: dim.database.clone(),
                    table: dim.table.clone(),
                    column: dim.column.clone(),
                });
            };
            tx.query(&format!("DELETE FROM DIMENSIONLIST WHERE CUBENAME = {}", quote(cube)))?;
            let kept = dims.iter().filter(|d| d.dnumber != gone.dnumber);
            for (i, d) in kept.enumerate() {
                tx.query(&format!(
                    "INSERT INTO DIMENSIONLIST VALUES ({}, {}, {}, {}, {})",
                    quote(cube),
                    quote(&d.database),
                    quote(&d.table),
                    i + 1,
                    quote(&d.dimension)
                ))?;
            }
            Ok(())
        })
    }

    pub fn remove_cube(&self, name: &str) -> Result<(), CubeError> {
        self.write(|tx| {
            if !self.cube_exists(tx, name)? {
                return Err(CubeError::CubeNotFound(name.into()));
            }
            tx.query(&format!("DELETE FROM DIMENSIONLIST WHERE CUBENAME = {}", quote(name)))?;
            tx.query(&format!("DELETE FROM CUBETABLE WHERE CUBENAME = {}", quote(name)))?;
            Ok(())
        })
    }

    pub fn display_cube(&self, name: &str) -> Result<(CubeRecord, Vec<DimensionRecord>), CubeError> {
        self.read(|tx| {
            let ds = tx.query(&format!(
                "SELECT CUBENAME, CUBEOWNER, CUBEDESC FROM CUBETABLE WHERE CUBENAME = {}",
                quote(name)
            ))?;
            let r = ds.rows.first().ok_or_else(|| CubeError::CubeNotFound(name.into()))?;
            let record = CubeRecord {
                name: text(&r[0]),
                owner: text(&r[1]),
                desc: text(&r[2]),
            };
            Ok((record, self.dimensions(tx, name)?))
        })
    }

    pub fn display_all_cubes(&self) -> Result<Vec<CubeRecord>, CubeError> {
        self.read(|tx| {
            let ds = tx.query("SELECT CUBENAME, CUBEOWNER, CUBEDESC FROM CUBETABLE ORDER BY CUBENAME")?;
            Ok(ds
                .rows
                .iter()
                .map(|r| CubeRecord {
                    name: text(&r[0]),
                    owner: text(&r[1]),
                    desc: text(&r[2]),
                })
                .collect())
        })
    }

    /// Statement that evaluates the selected dimensions of `cube`, and
    /// the database it runs against. `measure` may be `*` with COUNT.
    pub fn cube_query(
        &self,
        cube: &str,
        selected: &[i64],
        measure: &str,
        agg: Aggregate,
    ) -> Result<(String, String), CubeError> {
        let (_, dims) = self.display_cube(cube)?;
        if selected.is_empty() {
            return Err(CubeError::EmptySelection);
        }
        let mut chosen: Vec<&DimensionRecord> = Vec::new();
        for &n in selected {
            let d = dims.iter().find(|d| d.dnumber == n).ok_or(CubeError::NoSuchDnumber {
                cube: cube.into(),
                dnumber: n,
            })?;
            if !chosen.iter().any(|c| c.dnumber == n) {
                chosen.push(d);
            }
        }
        let first = chosen[0];
        if chosen.iter().any(|d| d.database != first.database || d.table != first.table) {
            return Err(CubeError::CrossTableUnsupported);
        }
        let measure = if measure == "*" && agg == Aggregate::Count {
            "*".to_string()
        } else {
            let m = measure.to_ascii_uppercase();
            let db = self
                .kernel
                .storage()
                .open_database(Path::new(&first.database), false)
                .map_err(KernelError::from)?;
            let known = db.schema(&first.table).is_some_and(|s| s.column_index(&m).is_some());
            if !known {
                return Err(CubeError::UnknownColumn {
                    table: first.table.clone(),
                    column: m,
                });
            }
            m
        };
        let cols: Vec<&str> = chosen.iter().map(|d| d.dimension.as_str()).collect();
        let cols = cols.join(", ");
        let sql = format!("SELECT {cols}, {agg}({measure}) FROM {} GROUP BY {cols}", first.table);
        Ok((sql, first.database.clone()))
    }

    /// Runs the cube's GROUP BY against the source table through the
    /// kernel, as `user`.
    pub fn evaluate_cube(&self, cube: &str, selected: &[i64], measure: &str, agg: Aggregate) -> Result<DataSet, CubeError> {
        let (sql, database) = self.cube_query(cube, selected, measure, agg)?;
        let req = KernelRequest::execute(PathBuf::from(database), &self.user, &sql);
        match self.kernel.dispatch(&req)? {
            KernelResponse::Outcome(o) => o.into_result().map_err(CubeError::Query),
            other => unreachable!("EXECUTE answered with {other:?}"),
        }
    }
}
