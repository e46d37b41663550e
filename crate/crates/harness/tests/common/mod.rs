//! Shared helpers for the harness integration tests: a fast miniature
//! experiment config and `qadv` binary invocation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const MINI_CONFIG: &str = r#"
seed = 7
out_dir = "unused"

[dataset]
kind = "synth-blobs"
classes = 2
width = 8
height = 8
train_examples = 40
test_examples = 20

[[models]]
id = "qs"
family = "qvc"
qubits = 6
layers = 3

[[models]]
id = "ms"
family = "mlp"
hidden = [8]

[training]
epochs = 3
batch_size = 10
lr = 0.02

[attack]
kind = "pgd"
steps = 5
epsilon_grid = [0.05, 0.1, 0.15, 0.2, 0.3]
eval_examples = 10

[adv_training]
model = "ms"
epsilons = [0.1]

[detection]
classical = "ms"
quantum = "qs"
clean_pool = 30
attacked_pool = 30

[noise]
model = "qs"
kinds = ["bit-flip"]
strengths = [0.0, 0.2]
trajectories = 20
examples = 5

[transfer]
sources = ["qs"]
targets = ["qs", "ms"]
train_missing = true

[export]
model = "qs"
epsilon = 0.1
examples = 2
"#;

/// Scratch directory under the cargo-managed test tmp root.
pub fn scratch(tag: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("{tag}-{}", std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).expect("clear scratch dir");
    }
    fs::create_dir_all(&dir).expect("create scratch dir");
    dir
}

pub fn write_mini_config(dir: &Path) -> PathBuf {
    let path = dir.join("mini.toml");
    fs::write(&path, MINI_CONFIG).expect("write mini config");
    path
}

/// Run the `qadv` binary with the given arguments.
pub fn qadv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qadv")).args(args).output().expect("spawn qadv")
}

#[allow(dead_code)] // not every test binary asserts through this helper
pub fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "qadv failed ({:?}):\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
