//! Shared helpers for the CLI integration suites: fixture staging and
//! running the `fsv` binary with captured output.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden")
}

pub fn copy_tree(src: &Path, dst: &Path) {
    std::fs::create_dir_all(dst).unwrap();
    for entry in std::fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let to = dst.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &to);
        } else {
            std::fs::copy(entry.path(), &to).unwrap();
        }
    }
}

/// Stage the golden fixture inputs (layer tree, base layers, config) into
/// `dst`, leaving the checked-in expected outputs behind.
pub fn copy_golden_inputs(dst: &Path) {
    let src = fixture_dir();
    copy_tree(&src.join("tree"), &dst.join("tree"));
    copy_tree(&src.join("base"), &dst.join("base"));
    std::fs::copy(src.join("config.toml"), dst.join("config.toml")).unwrap();
}

pub struct CmdResult {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn fsv(dir: &Path, args: &[&str]) -> CmdResult {
    fsv_env(dir, args, &[])
}

pub fn fsv_env(dir: &Path, args: &[&str], envs: &[(&str, &str)]) -> CmdResult {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fsv"));
    cmd.current_dir(dir).args(args).env_remove("FSV_DATA_ROOT");
    for (key, value) in envs {
        cmd.env(key, value);
    }
    let out = cmd.output().expect("spawn fsv");
    CmdResult {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

/// Run catalog + build + evaluate in `dir`, asserting all three succeed.
pub fn run_full_pipeline(dir: &Path) {
    for cmd in ["catalog", "build", "evaluate"] {
        let r = fsv(dir, &[cmd]);
        assert_eq!(r.code, 0, "{cmd} failed:\n{}", r.stderr);
    }
}
