//! Acceptance criterion 10: determinism of the binary. Running the reference
//! configuration twice must produce byte-identical output directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).expect("readable output dir") {
            let entry = entry.expect("dir entry");
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(dir)
                    .expect("child path")
                    .to_string_lossy()
                    .into_owned();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

#[test]
fn criterion_10_reference_run_is_byte_identical() {
    let bin = env!("CARGO_BIN_EXE_weakmfg");
    let tmp = std::env::temp_dir().join(format!("weakmfg-acceptance-{}", std::process::id()));
    let out_a = tmp.join("run_a");
    let out_b = tmp.join("run_b");
    for out in [&out_a, &out_b] {
        let status = Command::new(bin)
            .args([
                "solve",
                "--config",
                repo_config("reference.conf").to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .expect("solver runs");
        assert!(status.success(), "reference solve failed");
    }
    let tree_a = read_tree(&out_a);
    let tree_b = read_tree(&out_b);
    assert_eq!(
        tree_a.keys().collect::<Vec<_>>(),
        tree_b.keys().collect::<Vec<_>>(),
        "output file sets differ"
    );
    let mut bytes = 0usize;
    for (name, content) in &tree_a {
        assert_eq!(
            content, &tree_b[name],
            "output file {name} differs between identical runs"
        );
        bytes += content.len();
    }
    std::fs::remove_dir_all(&tmp).ok();
    println!(
        "[PASS] criterion 10: two reference runs byte-identical ({} files, {bytes} bytes)",
        tree_a.len()
    );
}
