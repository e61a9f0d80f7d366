//! Module init files.
//!
//! ```text
//! [SETTINGS]
//! TYPE=tool
//! NAME=APriori Text
//! VERSION=1
//! AUTHOR=ann
//! INIT=pagesize 4096
//! DESC=mines frequent itemsets
//! ```
//!
//! Keys are case-insensitive, values are taken verbatim after the first
//! `=`. NAME, TYPE and VERSION are mandatory.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    Tool,
    Wizard,
}

impl ModuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModuleKind::Tool => "tool",
            ModuleKind::Wizard => "wizard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tool" => Some(ModuleKind::Tool),
            "wizard" => Some(ModuleKind::Wizard),
            _ => None,
        }
    }

    /// Exported entry symbol of a module of this kind.
    pub fn entry_symbol(self) -> &'static str {
        match self {
            ModuleKind::Tool => "TOOLMAIN",
            ModuleKind::Wizard => "WIZARDMAIN",
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitFile {
    pub kind: ModuleKind,
    pub name: String,
    pub version: u32,
    pub author: String,
    pub init: String,
    pub desc: String,
    /// Non-fatal findings, such as unknown keys.
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitFileMalformed(pub String);

impl fmt::Display for InitFileMalformed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed init file: {}", self.0)
    }
}

pub fn parse_init_file(text: &str) -> Result<InitFile, InitFileMalformed> {
    let bad = |m: &str| InitFileMalformed(m.to_string());
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l));
    match lines.by_ref().find(|l| !l.trim().is_empty()) {
        Some(l) if l.trim() == "[SETTINGS]" => {}
        _ => return Err(bad("first line must be [SETTINGS]")),
    }
    let (mut kind, mut name, mut version) = (None, None, None);
    let (mut author, mut init, mut desc) = (String::new(), String::new(), String::new());
    let mut warnings = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(InitFileMalformed(alloc::format!("expected KEY=VALUE, found {line:?}")));
        };
        match key.trim().to_ascii_uppercase().as_str() {
            "TYPE" => {
                kind = Some(ModuleKind::parse(value).ok_or_else(|| {
                    InitFileMalformed(alloc::format!("TYPE must be tool or wizard, found {value:?}"))
                })?)
            }
            "NAME" => name = Some(value.to_string()),
            "VERSION" => {
                version = Some(
                    value
                        .trim()
                        .parse::<u32>()
                        .map_err(|_| InitFileMalformed(alloc::format!("VERSION must be an integer, found {value:?}")))?,
                )
            }
            "AUTHOR" => author = value.to_string(),
            "INIT" => init = value.to_string(),
            "DESC" => desc = value.to_string(),
            other => warnings.push(alloc::format!("ignoring unknown key {other}")),
        }
    }
    let name = name.filter(|n| !n.is_empty()).ok_or_else(|| bad("missing NAME"))?;
    let kind = kind.ok_or_else(|| bad("missing TYPE"))?;
    let version = version.ok_or_else(|| bad("missing VERSION"))?;
    Ok(InitFile {
        kind,
        name,
        version,
        author,
        init,
        desc,
        warnings,
    })
}
