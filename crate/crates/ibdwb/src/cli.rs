//! Command-line front end. [`run`] takes its streams as arguments so the
//! whole CLI can be driven in-process.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ibdwb_core::host::{Connection, LogLevel};
use ibdwb_core::ingest::convert_delimited;
use ibdwb_core::sql::quote;
use ibdwb_core::{DataSet, Value};

use crate::cube::{Aggregate, CubeBuilder, DimensionRef};
use crate::host::KernelHost;
use crate::kernel::{Kernel, SessionKey};
use crate::platform::{open_system_database, Platform, PlatformKind, SystemTx};
use crate::storage::Storage;

#[derive(Parser, Debug)]
#[command(name = "ibdwb", version, about = "Data-mart builder: embedded tables, plugin modules and cubes")]
struct Cli {
    /// System database holding module registries and the cube catalog.
    /// `IBDWB_HOME`, when set, takes precedence over this flag.
    #[arg(long, default_value = "ibdwb.sys", global = true)]
    home: PathBuf,
    /// User name for sessions and module activation.
    #[arg(long, default_value = "ibdwb", global = true)]
    user: String,
    #[arg(long, value_enum, default_value_t = Output::Table, global = true)]
    output: Output,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Table,
    Tsv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Create or list databases.
    #[command(subcommand)]
    Db(DbCommand),
    /// Load a delimited text file into a new table.
    Ingest {
        file: PathBuf,
        db: PathBuf,
        table: String,
        /// Field delimiter; `tab` for a tab.
        #[arg(long, default_value = ",")]
        delim: String,
        /// Treat the first record as data.
        #[arg(long)]
        no_header: bool,
    },
    /// Manage and run plugin modules.
    #[command(subcommand)]
    Module(ModuleCommand),
    /// Manage and evaluate cubes.
    #[command(subcommand)]
    Cube(CubeCommand),
    /// Run one statement.
    Query { db: PathBuf, statement: String },
    /// Read `;`-terminated statements from standard input; `\q` quits.
    Shell { db: PathBuf },
    /// Show the session table.
    Status,
}

#[derive(Subcommand, Debug)]
enum DbCommand {
    Create { path: PathBuf },
    List,
}

#[derive(Args, Debug)]
struct PlatformArg {
    #[arg(long, value_enum, default_value_t = PlatformChoice::Dataplug)]
    platform: PlatformChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlatformChoice {
    Dataplug,
    Discoverer,
}

impl From<PlatformChoice> for PlatformKind {
    fn from(p: PlatformChoice) -> Self {
        match p {
            PlatformChoice::Dataplug => PlatformKind::DataPlug,
            PlatformChoice::Discoverer => PlatformKind::Discoverer,
        }
    }
}

#[derive(Subcommand, Debug)]
enum ModuleCommand {
    /// Install from an init file; the library must sit next to it.
    Install {
        ini: PathBuf,
        #[command(flatten)]
        platform: PlatformArg,
    },
    Uninstall {
        name: String,
        #[command(flatten)]
        platform: PlatformArg,
    },
    List {
        #[command(flatten)]
        platform: PlatformArg,
    },
    /// Activate a module; arguments after `--` are passed to it.
    Run {
        name: String,
        #[command(flatten)]
        platform: PlatformArg,
        #[arg(last = true)]
        args: Vec<String>,
    },
    /// Clear an activation left behind by a crashed module.
    Deactivate {
        name: String,
        #[command(flatten)]
        platform: PlatformArg,
    },
}

#[derive(Subcommand, Debug)]
enum CubeCommand {
    Create {
        name: String,
        #[arg(long, default_value = "")]
        owner: String,
        #[arg(long, default_value = "")]
        desc: String,
        /// Dimension as `database:TABLE:COLUMN`; repeatable.
        #[arg(long = "dim")]
        dims: Vec<String>,
    },
    AddDim { cube: String, dim: String },
    RmDim { cube: String, dim: String },
    Drop { name: String },
    List,
    Show { name: String },
    /// Aggregate a measure over selected dimensions.
    Eval {
        cube: String,
        /// DNUMBERs of the dimensions to group by, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<i64>,
        #[arg(long)]
        measure: String,
        #[arg(long, default_value = "SUM")]
        agg: String,
    },
}

type Failure = Box<dyn std::error::Error>;

struct Ctx<'a> {
    cli: &'a Cli,
    kernel: Arc<Kernel>,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

/// Runs the CLI. Returns the process exit code: 0 on success, 1 when the
/// command failed, 2 on a usage error.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let mut cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                if e.kind() == clap::error::ErrorKind::InvalidSubcommand {
                    let _ = writeln!(err, "valid subcommands: {}", valid_subcommands(&args).join(", "));
                }
                2
            } else {
                let _ = write!(out, "{rendered}");
                0
            };
        }
    };
    if let Some(home) = std::env::var_os("IBDWB_HOME").filter(|h| !h.is_empty()) {
        cli.home = PathBuf::from(home);
    }
    let kernel = Arc::new(Kernel::new(Storage::new()));
    let mut ctx = Ctx {
        cli: &cli,
        kernel,
        out,
        err,
    };
    match ctx.command(stdin) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "error: {e}");
            1
        }
    }
}

/// Subcommands of the deepest command named in `args`.
fn valid_subcommands(args: &[std::ffi::OsString]) -> Vec<String> {
    use clap::CommandFactory;
    let mut cmd = Cli::command();
    for a in args.iter().skip(1) {
        let Some(next) = a.to_str().and_then(|a| cmd.find_subcommand(a)).cloned() else {
            continue;
        };
        cmd = next;
    }
    cmd.get_subcommands().map(|c| c.get_name().to_string()).collect()
}

const DATABASE_TABLE_DDL: &str =
    "CREATE TABLE DATABASETABLE (PATH VARCHAR(4096) NOT NULL, NAME VARCHAR(255) NOT NULL, PRIMARY KEY (PATH))";

fn parse_dim(spec: &str) -> Result<DimensionRef, String> {
    let mut parts = spec.rsplitn(3, ':');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(col), Some(table), Some(db)) if !col.is_empty() && !table.is_empty() && !db.is_empty() => {
            Ok(DimensionRef::new(canonical(Path::new(db)), table, col))
        }
        _ => Err(format!("dimension must be database:TABLE:COLUMN, found {spec:?}")),
    }
}

/// Absolute form of an existing path, so the same database is always
/// recorded under one name.
fn canonical(p: &Path) -> String {
    p.canonicalize().unwrap_or_else(|_| p.to_path_buf()).to_string_lossy().into_owned()
}

impl Ctx<'_> {
    fn command(&mut self, stdin: &mut dyn BufRead) -> Result<i32, Failure> {
        match &self.cli.command {
            Command::Db(DbCommand::Create { path }) => self.db_create(path),
            Command::Db(DbCommand::List) => self.db_list(),
            Command::Ingest {
                file,
                db,
                table,
                delim,
                no_header,
            } => self.ingest(file, db, table, delim, *no_header),
            Command::Module(m) => self.module(m),
            Command::Cube(c) => self.cube(c),
            Command::Query { db, statement } => {
                let ok = self.query(db, statement)?;
                Ok(if ok { 0 } else { 1 })
            }
            Command::Shell { db } => self.shell(db, stdin),
            Command::Status => {
                let rows = self
                    .kernel
                    .status()
                    .into_iter()
                    .map(|r| {
                        vec![
                            Value::Text(r.path.display().to_string()),
                            Value::Text(r.user),
                            Value::Int(r.open_tx as i64),
                            Value::Int(r.gauge as i64),
                        ]
                    })
                    .collect();
                self.print(&ds(&["PATH", "USER", "OPEN_TX", "GAUGE"], rows))?;
                Ok(0)
            }
        }
    }

    fn session(&self, db: &Path) -> SessionKey {
        SessionKey::new(db, self.cli.user.clone())
    }

    fn sysdb(&self) -> Result<PathBuf, Failure> {
        Ok(open_system_database(&self.kernel, &self.cli.home)?)
    }

    fn db_create(&mut self, path: &Path) -> Result<i32, Failure> {
        if path.join(ibdwb_core::codec::MANIFEST_FILE).exists() {
            return Err(format!("{}: database already exists", path.display()).into());
        }
        let db = self.kernel.storage().open_database(path, true)?;
        let sys = self.sysdb()?;
        let canon = db.path().to_string_lossy().into_owned();
        let name = db.path().file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        SystemTx::write(&self.kernel, &sys, "ibdwb.db", |tx| -> Result<(), Failure> {
            let have = self.kernel.storage().open_database(&sys, false)?.schema("DATABASETABLE").is_some();
            if !have {
                tx.query(DATABASE_TABLE_DDL)?;
            }
            tx.query(&format!("DELETE FROM DATABASETABLE WHERE PATH = {}", quote(&canon)))
                ?;
            tx.query(&format!("INSERT INTO DATABASETABLE VALUES ({}, {})", quote(&canon), quote(&name)))
                ?;
            Ok(())
        })?;
        writeln!(self.out, "created database {}", db.path().display())?;
        Ok(0)
    }

    fn db_list(&mut self) -> Result<i32, Failure> {
        let sys = self.sysdb()?;
        let has = self.kernel.storage().open_database(&sys, false)?.schema("DATABASETABLE").is_some();
        let data = if has {
            let o = self.kernel.execute(
                &SessionKey::new(&sys, "ibdwb.db"),
                "",
                "SELECT NAME, PATH FROM DATABASETABLE ORDER BY NAME, PATH",
            )?;
            o.into_result()?
        } else {
            ds(&["NAME", "PATH"], vec![])
        };
        self.print(&data)?;
        Ok(0)
    }

    fn ingest(&mut self, file: &Path, db: &Path, table: &str, delim: &str, no_header: bool) -> Result<i32, Failure> {
        let delimiter = match delim {
            "tab" | "\\t" => '\t',
            d if d.chars().count() == 1 => d.chars().next().unwrap_or(','),
            d => return Err(format!("delimiter must be one character, found {d:?}").into()),
        };
        self.kernel.storage().open_database(db, false)?;
        let text = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
        let host = KernelHost::new(self.kernel.clone(), vec![self.cli.user.clone()]);
        let path = db.to_string_lossy();
        let conn = Connection {
            host: &host,
            path: &path,
            user: &self.cli.user,
            password: "",
        };
        let n = convert_delimited(&text, delimiter, !no_header, &conn, table).map_err(|e| e.to_string())?;
        writeln!(self.out, "loaded {n} rows into {}", table.to_ascii_uppercase())?;
        Ok(0)
    }

    fn module(&mut self, cmd: &ModuleCommand) -> Result<i32, Failure> {
        let sys = self.sysdb()?;
        let (ModuleCommand::Install { platform, .. }
        | ModuleCommand::Uninstall { platform, .. }
        | ModuleCommand::List { platform }
        | ModuleCommand::Run { platform, .. }
        | ModuleCommand::Deactivate { platform, .. }) = cmd;
        let p = Platform::open(self.kernel.clone(), &sys, platform.platform.into())?;
        match cmd {
            ModuleCommand::Install { ini, .. } => {
                let status = p.install_module(ini)?;
                writeln!(self.out, "{status}")?;
            }
            ModuleCommand::Uninstall { name, .. } => {
                p.uninstall_module(name)?;
                writeln!(self.out, "Module uninstalled")?;
            }
            ModuleCommand::List { .. } => {
                let rows = p
                    .list_modules()?
                    .into_iter()
                    .map(|m| {
                        vec![
                            Value::Text(m.name),
                            Value::Int(i64::from(m.version)),
                            Value::Text(m.kind.as_str().into()),
                            Value::Text(m.author),
                            Value::Text(m.description),
                            Value::Text(m.path.display().to_string()),
                        ]
                    })
                    .collect();
                self.print(&ds(&["NAME", "VERSION", "TYPE", "AUTHOR", "DESCRIPTION", "PATH"], rows))?;
            }
            ModuleCommand::Run { name, args, .. } => {
                let a = p.activate_module(name, &self.cli.user, args)?;
                for (level, msg) in &a.log {
                    match level {
                        LogLevel::Info | LogLevel::Debug => writeln!(self.out, "{msg}")?,
                        LogLevel::Warn => writeln!(self.err, "warning: {msg}")?,
                        LogLevel::Error => writeln!(self.err, "error: {msg}")?,
                    }
                }
                if a.status != 0 {
                    writeln!(self.err, "error: module {name} finished with status {}", a.status)?;
                    return Ok(1);
                }
            }
            ModuleCommand::Deactivate { name, .. } => {
                p.deactivate_module(name, &self.cli.user)?;
            }
        }
        Ok(0)
    }

    fn cube(&mut self, cmd: &CubeCommand) -> Result<i32, Failure> {
        let cubes = CubeBuilder::open(self.kernel.clone(), &self.cli.home, &self.cli.user)?;
        cubes.init_catalog()?;
        match cmd {
            CubeCommand::Create { name, owner, desc, dims } => {
                let dims = dims.iter().map(|d| parse_dim(d)).collect::<Result<Vec<_>, _>>()?;
                let owner = if owner.is_empty() { &self.cli.user } else { owner };
                cubes.add_cube(name, owner, desc, &dims)?;
                writeln!(self.out, "created cube {name} with {} dimensions", dims.len())?;
            }
            CubeCommand::AddDim { cube, dim } => {
                let n = cubes.add_dimension(cube, &parse_dim(dim)?)?;
                writeln!(self.out, "added dimension {n}")?;
            }
            CubeCommand::RmDim { cube, dim } => {
                cubes.remove_dimension(cube, &parse_dim(dim)?)?;
                writeln!(self.out, "removed dimension")?;
            }
            CubeCommand::Drop { name } => {
                cubes.remove_cube(name)?;
                writeln!(self.out, "dropped cube {name}")?;
            }
            CubeCommand::List => {
                let rows = cubes
                    .display_all_cubes()?
                    .into_iter()
                    .map(|c| vec![Value::Text(c.name), Value::Text(c.owner), Value::Text(c.desc)])
                    .collect();
                self.print(&ds(&["CUBENAME", "CUBEOWNER", "CUBEDESC"], rows))?;
            }
            CubeCommand::Show { name } => {
                let (c, dims) = cubes.display_cube(name)?;
                writeln!(self.out, "cube {} owner {} desc {}", c.name, c.owner, c.desc)?;
                let rows = dims
                    .into_iter()
                    .map(|d| {
                        vec![
                            Value::Int(d.dnumber),
                            Value::Text(d.database),
                            Value::Text(d.table),
                            Value::Text(d.dimension),
                        ]
                    })
                    .collect();
                self.print(&ds(&["DNUMBER", "DATABASENAME", "TABLENAME", "DIMENSION"], rows))?;
            }
            CubeCommand::Eval {
                cube,
                dims,
                measure,
                agg,
            } => {
                let agg = Aggregate::parse(agg).ok_or_else(|| format!("unknown aggregate {agg}"))?;
                let data = cubes.evaluate_cube(cube, dims, measure, agg)?;
                self.print(&data)?;
            }
        }
        Ok(0)
    }

    /// Runs one statement and prints its result. Returns false if the
    /// statement failed.
    fn query(&mut self, db: &Path, statement: &str) -> Result<bool, Failure> {
        let key = self.session(db);
        let outcome = self.kernel.execute(&key, "", statement)?;
        match outcome.into_result() {
            Ok(data) if data.columns.is_empty() => {
                writeln!(self.out, "OK")?;
                Ok(true)
            }
            Ok(data) => {
                self.print(&data)?;
                Ok(true)
            }
            Err(e) => {
                writeln!(self.err, "error: {e}")?;
                Ok(false)
            }
        }
    }

    fn shell(&mut self, db: &Path, stdin: &mut dyn BufRead) -> Result<i32, Failure> {
        self.kernel.storage().open_database(db, false)?;
        let mut pending = String::new();
        let mut failures = 0;
        let mut line = String::new();
        loop {
            line.clear();
            if stdin.read_line(&mut line)? == 0 {
                break;
            }
            let trimmed = line.trim();
            if pending.is_empty() && trimmed == "\\q" {
                break;
            }
            if pending.is_empty() && trimmed.is_empty() {
                continue;
            }
            pending.push_str(&line);
            if trimmed.ends_with(';') {
                let stmt = std::mem::take(&mut pending);
                if !self.query(db, stmt.trim())? {
                    failures += 1;
                }
            }
        }
        if !pending.trim().is_empty() {
            writeln!(self.err, "error: unterminated statement at end of input")?;
            failures += 1;
        }
        Ok(if failures == 0 { 0 } else { 1 })
    }

    fn print(&mut self, data: &DataSet) -> std::io::Result<()> {
        let cells: Vec<Vec<String>> = data
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.render().unwrap_or_else(|| "NULL".into())).collect())
            .collect();
        match self.cli.output {
            Output::Tsv => {
                writeln!(self.out, "{}", data.columns.join("\t"))?;
                for r in &cells {
                    writeln!(self.out, "{}", r.join("\t"))?;
                }
            }
            Output::Table => {
                let mut widths: Vec<usize> = data.columns.iter().map(|c| c.chars().count()).collect();
                for r in &cells {
                    for (w, c) in widths.iter_mut().zip(r) {
                        *w = (*w).max(c.chars().count());
                    }
                }
                let line = |vals: &[String]| -> String {
                    vals.iter()
                        .zip(&widths)
                        .map(|(v, w)| format!("{v:<w$}"))
                        .collect::<Vec<_>>()
                        .join(" | ")
                        .trim_end()
                        .to_string()
                };
                writeln!(self.out, "{}", line(&data.columns))?;
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                writeln!(self.out, "{}", rule.join("-+-"))?;
                for r in &cells {
                    writeln!(self.out, "{}", line(r))?;
                }
                let n = cells.len();
                writeln!(self.out, "({n} {})", if n == 1 { "row" } else { "rows" })?;
            }
        }
        Ok(())
    }
}

fn ds(columns: &[&str], rows: Vec<Vec<Value>>) -> DataSet {
    DataSet {
        columns: columns.iter().map(|c| c.to_string()).collect(),
        rows,
        statement: String::new(),
    }
}
