//! The generated header compiles as C and, when the static library is
//! present, links into a working program.

use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// `target/<profile>`, the parent of the running test's `deps` directory.
fn profile_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    Some(exe.parent()?.parent()?.to_path_buf())
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

fn cc(args: &[&Path], extra: &[&str]) -> std::process::Output {
    let include = manifest().join("include");
    Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(include)
        .args(args)
        .args(extra)
        .output()
        .expect("cc runs")
}

#[test]
fn header_is_current_and_declares_every_export() {
    let header = std::fs::read_to_string(manifest().join("include/sentry_bench.h")).unwrap();
    let source = std::fs::read_to_string(manifest().join("src/lib.rs")).unwrap();
    for line in source.lines() {
        let Some(rest) = line.split("extern \"C\" fn ").nth(1) else {
            continue;
        };
        let name = rest.split('(').next().unwrap();
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn smoke_program_compiles_against_header() {
    if !have_cc() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let smoke = manifest().join("tests/header_smoke.c");
    let o = cc(&[&smoke], &["-fsyntax-only"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let Some(lib) = profile_dir().map(|d| d.join("libsentry_bench_ffi.a")).filter(|p| p.is_file()) else {
        eprintln!("static library not built; link step skipped");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let o = cc(&[&smoke, &lib], &["-o", exe.to_str().unwrap(), "-lm", "-lpthread", "-ldl"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = Command::new(&exe).current_dir(dir.path()).output().unwrap();
    assert!(run.status.success());
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.contains(env!("CARGO_PKG_VERSION")), "{text}");
    assert!(text.contains("0.850000 0.750000 0"), "{text}");
}
