//! Filesystem formats, model registry, timing harness, scoring service, and
//! the command-line interface around the core pipeline.

pub mod bench;
pub mod ckpt;
pub mod cli;
pub mod formats;
pub mod registry;
pub mod serve;
pub mod trainio;

/// Environment variable overriding the registry root directory.
pub const ENV_REGISTRY: &str = "PAIRSCORE_REGISTRY";
/// Environment variable overriding the service bind address.
pub const ENV_BIND: &str = "PAIRSCORE_BIND";

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}
