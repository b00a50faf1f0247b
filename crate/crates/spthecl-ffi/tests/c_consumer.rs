//! Compiles and runs the C example against the generated header and the
//! freshly built static library — the full foreign-consumer path.

use std::path::PathBuf;
use std::process::Command;

#[test]
fn c_example_builds_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target_dir = std::env::var("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|_| manifest.join("../../target"));
    let staticlib = target_dir.join("debug/libspthecl_ffi.a");
    if !staticlib.exists() {
        eprintln!("skipping: staticlib not at {} (non-default layout)", staticlib.display());
        return;
    }
    let gcc_available = Command::new("gcc").arg("--version").output().is_ok();
    if !gcc_available {
        eprintln!("skipping: no C compiler");
        return;
    }

    let out_dir = tempfile_dir();
    let binary = out_dir.join("gain_laws_demo");
    let status = Command::new("gcc")
        .arg(manifest.join("examples/gain_laws_demo.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&staticlib)
        .args(["-lm", "-lpthread", "-ldl"])
        .arg("-o")
        .arg(&binary)
        .status()
        .expect("gcc runs");
    assert!(status.success(), "C example failed to compile");

    let output = Command::new(&binary).output().expect("demo runs");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "demo exited nonzero: {stdout}");
    assert!(stdout.contains("dataset 1 classification code 0"), "{stdout}");
    assert!(stdout.contains("dataset 3 classification code 1"), "{stdout}");
    assert!(stdout.contains("dataset 4 classification code 2"), "{stdout}");
    assert!(stdout.trim_end().ends_with("ok"), "{stdout}");
    std::fs::remove_dir_all(&out_dir).ok();
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spthecl-c-demo-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
