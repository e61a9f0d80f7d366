//! Runtime of the IB-DWB data-mart builder: file-backed storage, the
//! session kernel, module platforms, the cube builder and the CLI.

pub mod cli;
pub mod cube;
pub mod host;
pub mod kernel;
pub mod platform;
pub mod storage;

pub use kernel::{Kernel, KernelRequest, KernelResponse, SessionKey};
pub use platform::{Platform, PlatformKind};
pub use storage::{Storage, TxMode, Verdict};
