//! Runs generated plotting scripts in a throwaway directory.
//!
//! This is a subprocess with a scratch working directory, a scrubbed
//! environment and a wall-clock limit. It is not a security boundary:
//! scripts from an untrusted model should run inside a container.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tempfile::TempDir;
use thiserror::Error;
use wait_timeout::ChildExt;

/// Bytes kept from each of stdout and stderr.
pub const OUTPUT_CAP: usize = 64 * 1024;

const SCRIPT_NAME: &str = "script.py";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxConfig {
    /// Command used to run the script; the script path is appended.
    pub interpreter: Vec<String>,
    #[serde(with = "secs")]
    pub timeout: Duration,
    /// Where per-run scratch directories are created. Defaults to the
    /// system temp directory.
    pub scratch_base: Option<PathBuf>,
    /// File extensions accepted as rendered images, without the dot.
    pub image_extensions: Vec<String>,
    /// Run inside a fresh network namespace via `unshare -rn` when the host
    /// allows it.
    pub isolate_network: bool,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            interpreter: vec!["python3".to_string()],
            timeout: Duration::from_secs(30),
            scratch_base: None,
            image_extensions: ["png", "jpg", "svg", "pdf"].map(String::from).to_vec(),
            isolate_network: true,
        }
    }
}

mod secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let x = f64::deserialize(d)?;
        Duration::try_from_secs_f64(x).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("script exceeded the {0:?} time limit")]
    Timeout(Duration),
    #[error("script exited with {}: {stderr}", code.map_or("a signal".to_string(), |c| format!("code {c}")))]
    NonzeroExit { code: Option<i32>, stderr: String },
    #[error("script exited cleanly but produced no image")]
    NoImageProduced,
    #[error("invalid sandbox configuration: {0}")]
    Config(String),
    #[error("sandbox I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// A successful run. The scratch directory lives as long as this value.
#[derive(Debug)]
pub struct VerifyResult {
    scratch: TempDir,
    image: PathBuf,
    pub stdout: String,
    pub stderr: String,
    pub duration: Duration,
}

impl VerifyResult {
    pub fn image_path(&self) -> &Path {
        &self.image
    }

    pub fn scratch_dir(&self) -> &Path {
        self.scratch.path()
    }

    /// Extension of the produced image, lowercased.
    pub fn image_extension(&self) -> String {
        self.image.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase()
    }
}

fn unshare_available() -> bool {
    static AVAILABLE: OnceLock<bool> = OnceLock::new();
    *AVAILABLE.get_or_init(|| {
        let ok = Command::new("unshare")
            .args(["-rn", "true"])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .status()
            .is_ok_and(|s| s.success());
        if !ok {
            log::warn!("unshare -rn unavailable; sandboxed scripts keep network access");
        }
        ok
    })
}

fn capture<R: Read + Send + 'static>(stream: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        if let Some(mut r) = stream {
            let mut buf = [0u8; 8192];
            while let Ok(n) = r.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let room = OUTPUT_CAP.saturating_sub(kept.len());
                kept.extend_from_slice(&buf[..n.min(room)]);
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

#[cfg(unix)]
fn kill_tree(child: &mut std::process::Child) {
    // the child leads its own process group, so this also reaps grandchildren
    let _ = Command::new("kill").args(["-KILL", "--", &format!("-{}", child.id())]).stderr(Stdio::null()).status();
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_tree(child: &mut std::process::Child) {
    let _ = child.kill();
}

/// First image (by file name) of non-zero size in `dir`.
fn find_image(dir: &Path, extensions: &[String]) -> std::io::Result<Option<PathBuf>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        let wanted = ext.is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(&e)));
        let meta = entry.metadata()?;
        if wanted && meta.is_file() && meta.len() > 0 {
            found.push(path);
        }
    }
    found.sort();
    Ok(found.into_iter().next())
}

/// Writes `script` into a fresh scratch directory and runs it there.
pub fn verify_script(script: &str, config: &SandboxConfig) -> Result<VerifyResult, SandboxError> {
    let (program, args) =
        config.interpreter.split_first().ok_or_else(|| SandboxError::Config("interpreter command is empty".into()))?;
    let scratch = match &config.scratch_base {
        Some(base) => tempfile::Builder::new().prefix("chartrel-").tempdir_in(base)?,
        None => tempfile::Builder::new().prefix("chartrel-").tempdir()?,
    };
    let dir = scratch.path();
    std::fs::write(dir.join(SCRIPT_NAME), script)?;

    let mut cmd = if config.isolate_network && unshare_available() {
        let mut c = Command::new("unshare");
        c.arg("-rn").arg(program);
        c
    } else {
        Command::new(program)
    };
    cmd.args(args)
        .arg(SCRIPT_NAME)
        .current_dir(dir)
        .env_clear()
        .env("HOME", dir)
        .env("TMPDIR", dir)
        .env("MPLBACKEND", "Agg")
        .env("MPLCONFIGDIR", dir)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    if let Some(path) = std::env::var_os("PATH") {
        cmd.env("PATH", path);
    }
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }

    let started = Instant::now();
    let mut child = cmd.spawn()?;
    let out = capture(child.stdout.take());
    let err = capture(child.stderr.take());
    let status = match child.wait_timeout(config.timeout)? {
        Some(s) => s,
        None => {
            kill_tree(&mut child);
            let _ = child.wait();
            let _ = (out.join(), err.join());
            return Err(SandboxError::Timeout(config.timeout));
        }
    };
    let duration = started.elapsed();
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();

    if !status.success() {
        return Err(SandboxError::NonzeroExit { code: status.code(), stderr });
    }
    let image = find_image(dir, &config.image_extensions)?.ok_or(SandboxError::NoImageProduced)?;
    log::debug!("script produced {} in {:?}", image.display(), duration);
    Ok(VerifyResult { scratch, image, stdout, stderr, duration })
}
