use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Writes `data` to `path` via a temp file in the same directory and a
/// rename, or to stdout when `path` is "-".
pub fn write_atomic(path: &str, data: &[u8]) -> std::io::Result<()> {
    if path == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(data)?;
        return out.flush();
    }
    let target = Path::new(path);
    let dir = target.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = target.file_name().ok_or_else(|| std::io::Error::other(format!("{path} names no file")))?;
    let mut tmp = PathBuf::from(dir);
    tmp.push(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, target).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run metadata kept next to an artifact, so the artifact itself stays
/// byte-identical across thread counts.
pub fn provenance(command: &str, config_hash: &str, threads: &str) -> serde_json::Value {
    serde_json::json!({
        "command": command,
        "config_sha256": config_hash,
        "versions": {
            "distal-cli": env!("CARGO_PKG_VERSION"),
            "distal-core": distal_core::VERSION,
        },
        "threads": threads,
    })
}

pub fn sidecar_path(path: &str) -> String {
    format!("{path}.provenance.json")
}
