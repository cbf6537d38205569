use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime};

use chartrel_sim::llm::OFFLINE_PLOT_SCRIPT;
use chartrel_sim::{verify_script, SandboxConfig, SandboxError};

fn config_in(base: &Path) -> SandboxConfig {
    SandboxConfig { scratch_base: Some(base.to_path_buf()), timeout: Duration::from_secs(20), ..Default::default() }
}

type Snapshot = BTreeMap<PathBuf, (u64, Option<SystemTime>)>;

fn snapshot(dir: &Path) -> Snapshot {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let entry = entry.unwrap();
            let meta = entry.metadata().unwrap();
            if meta.is_dir() {
                stack.push(entry.path());
            }
            out.insert(entry.path(), (meta.len(), meta.modified().ok()));
        }
    }
    out
}

#[test]
fn one_pixel_png_verifies() {
    let base = tempfile::tempdir().unwrap();
    let run = verify_script(OFFLINE_PLOT_SCRIPT, &config_in(base.path())).unwrap();
    assert_eq!(run.image_extension(), "png");
    assert!(std::fs::metadata(run.image_path()).unwrap().len() > 0);
    assert!(run.image_path().starts_with(run.scratch_dir()));
}

#[test]
fn raising_script_is_nonzero_exit() {
    let base = tempfile::tempdir().unwrap();
    let err = verify_script("raise ValueError('boom')\n", &config_in(base.path())).unwrap_err();
    match err {
        SandboxError::NonzeroExit { code, stderr } => {
            assert_eq!(code, Some(1));
            assert!(stderr.contains("ValueError: boom"), "{stderr}");
        }
        other => panic!("expected NonzeroExit, got {other:?}"),
    }
}

#[test]
fn clean_exit_without_image() {
    let base = tempfile::tempdir().unwrap();
    let script = "open('notes.txt', 'w').write('x')\nopen('empty.png', 'wb').close()\n";
    let err = verify_script(script, &config_in(base.path())).unwrap_err();
    assert!(matches!(err, SandboxError::NoImageProduced), "{err:?}");
}

#[test]
fn infinite_loop_times_out() {
    let base = tempfile::tempdir().unwrap();
    let config = SandboxConfig { timeout: Duration::from_millis(500), ..config_in(base.path()) };
    let started = std::time::Instant::now();
    let err = verify_script("while True:\n    pass\n", &config).unwrap_err();
    assert!(matches!(err, SandboxError::Timeout(d) if d == Duration::from_millis(500)), "{err:?}");
    assert!(started.elapsed() < Duration::from_secs(10));
}

#[test]
fn timeout_also_stops_child_processes() {
    let base = tempfile::tempdir().unwrap();
    let config = SandboxConfig { timeout: Duration::from_millis(500), ..config_in(base.path()) };
    // the grandchild inherits stdout; the run must still return promptly
    let script = "import subprocess, sys\nsubprocess.Popen([sys.executable, '-c', 'import time; time.sleep(60)'])\nwhile True:\n    pass\n";
    let started = std::time::Instant::now();
    assert!(matches!(verify_script(script, &config), Err(SandboxError::Timeout(_))));
    assert!(started.elapsed() < Duration::from_secs(10));
}

#[test]
fn runs_in_scratch_with_scrubbed_environment() {
    let base = tempfile::tempdir().unwrap();
    std::env::set_var("CHARTREL_SECRET_PROBE", "leak");
    let script = format!(
        "import os\nprint(os.getcwd())\nprint(os.environ.get('HOME'))\nprint(os.environ.get('CHARTREL_SECRET_PROBE'))\n{OFFLINE_PLOT_SCRIPT}"
    );
    let run = verify_script(&script, &config_in(base.path())).unwrap();
    let lines: Vec<&str> = run.stdout.lines().collect();
    let scratch = run.scratch_dir().canonicalize().unwrap();
    assert_eq!(Path::new(lines[0]).canonicalize().unwrap(), scratch);
    assert_eq!(Path::new(lines[1]).canonicalize().unwrap(), scratch);
    assert_eq!(lines[2], "None");
}

#[test]
fn writes_stay_inside_scratch() {
    let arena = tempfile::tempdir().unwrap();
    let base = arena.path().join("scratch");
    let outside = arena.path().join("outside");
    std::fs::create_dir_all(&base).unwrap();
    std::fs::create_dir_all(&outside).unwrap();
    std::fs::write(outside.join("keep.txt"), "unchanged").unwrap();
    let before = snapshot(arena.path());

    // relative writes, a nested directory and a temp file
    let script = format!(
        "import os, tempfile\nos.makedirs('sub/deeper', exist_ok=True)\nopen('sub/deeper/a.txt', 'w').write('a')\n\
         tempfile.NamedTemporaryFile(delete=False).write(b'x')\n{OFFLINE_PLOT_SCRIPT}"
    );
    let run = verify_script(&script, &config_in(&base)).unwrap();
    let scratch = run.scratch_dir().to_path_buf();
    let during = snapshot(arena.path());
    for (path, meta) in &during {
        // the base directory gains the scratch entry, so only its contents are compared
        if !path.starts_with(&scratch) && path != &base {
            assert_eq!(before.get(path), Some(meta), "changed outside scratch: {}", path.display());
        }
    }
    assert!(before.keys().all(|p| during.contains_key(p)));
    drop(run);
    assert!(!scratch.exists(), "scratch dir is removed with the result");
    assert_eq!(std::fs::read_to_string(outside.join("keep.txt")).unwrap(), "unchanged");
}

#[test]
fn network_is_unreachable_when_isolated() {
    let unshare = std::process::Command::new("unshare").args(["-rn", "true"]).status().is_ok_and(|s| s.success());
    if !unshare {
        eprintln!("skipping: unshare -rn is not permitted here");
        return;
    }
    let base = tempfile::tempdir().unwrap();
    let script = format!(
        "import socket\ns = socket.socket()\ns.settimeout(2)\ntry:\n    s.connect(('1.1.1.1', 80))\n    print('connected')\n\
         except OSError:\n    print('blocked')\n{OFFLINE_PLOT_SCRIPT}"
    );
    let run = verify_script(&script, &config_in(base.path())).unwrap();
    assert_eq!(run.stdout.trim(), "blocked");
}

#[test]
fn missing_interpreter_is_io_error() {
    let base = tempfile::tempdir().unwrap();
    let config = SandboxConfig {
        interpreter: vec!["/nonexistent/python".into()],
        isolate_network: false,
        ..config_in(base.path())
    };
    assert!(matches!(verify_script("pass", &config), Err(SandboxError::Io(_))));
}
