//! End-to-end tests of the command-line interface: dataset emission, the
//! run matrix, reports, and the error paths users hit first.

use std::path::Path;
use std::process::Output;

fn seqeval(args: &[&str], cwd: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_seqeval"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_config(root: &Path, extra_run: &str) -> String {
    let path = root.join("exp.toml");
    std::fs::write(
        &path,
        format!(
            r#"
[env]
kind = "gridworld"
name = "grid6"
width = 6
height = 6
goal = [5, 5]
horizon = 14
step_reward = 0.0
goal_reward = 1.0
start = [0, 0]

[datasets]
tiers = ["random", "medium", "medium-replay", "medium-expert", "expert", "mixed"]
transitions_per_tier = 900
out_dir = "data"

[run]
algorithms = ["bc", "cql"]
datasets = ["random", "mixed"]
seeds = [0, 1]
eval_episodes = 3
out_dir = "runs"
{extra_run}

[hyper]
discount = 0.9
cql_alpha = 0.2
"#
        ),
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn make_datasets_emits_all_tiers_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = write_config(root, "");
    let out = seqeval(&["make-datasets", "--config", &config], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let data = root.join("data");
    for name in [
        "env.mdp",
        "random.ds",
        "medium.ds",
        "medium-replay.ds",
        "medium-expert.ds",
        "expert.ds",
        "mixed.ds",
        "checkpoint-medium.json",
        "checkpoint-expert.json",
    ] {
        assert!(data.join(name).exists(), "missing {name}");
    }
    let mixed = seqeval::dataset::OfflineDataset::load(data.join("mixed.ds")).unwrap();
    assert_eq!(mixed.segments.len(), 3);
    assert_eq!(mixed.len(), 2700);

    // Byte-identical on rerun with the same config.
    let before = std::fs::read(data.join("mixed.ds")).unwrap();
    let out = seqeval(&["make-datasets", "--config", &config], root);
    assert!(out.status.success());
    let after = std::fs::read(data.join("mixed.ds")).unwrap();
    assert_eq!(before, after);
}

#[test]
fn unknown_tier_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let path = root.join("bad.toml");
    std::fs::write(
        &path,
        r#"
[env]
kind = "chain"
name = "c"
n_states = 5
horizon = 10

[datasets]
tiers = ["golden"]
"#,
    )
    .unwrap();
    let out = seqeval(&["make-datasets", "--config", path.to_str().unwrap()], root);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("unknown tier"), "stderr: {stderr}");
}

#[test]
fn run_matrix_report_and_finetune_flow() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = write_config(root, "");
    assert!(seqeval(&["make-datasets", "--config", &config], root).status.success());

    // 2 algorithms x 2 datasets x 2 seeds.
    let out = seqeval(&["run", "--config", &config, "--workers", "2"], root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = root.join("runs");
    let curves: Vec<_> = std::fs::read_dir(&runs)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert_eq!(curves.len(), 8, "curves: {curves:?}");
    for name in [
        "manifest.txt",
        "config-resolved.json",
        "modelcard_bc.json",
        "modelcard_bc.txt",
        "modelcard_cql.json",
        "modelcard_cql.txt",
        "aggregate.txt",
        "aggregate.json",
    ] {
        assert!(runs.join(name).exists(), "missing {name}");
    }
    let manifest = std::fs::read_to_string(runs.join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("# config: "));
    let cells: Vec<&str> = manifest.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(cells.len(), 8);
    assert!(cells.iter().all(|l| l.starts_with("ok ")));

    // Curve files carry the fixed column order and the resolved config.
    let one = std::fs::read_to_string(runs.join(&curves[0])).unwrap();
    assert!(one.contains("data_count,grad_steps,phase,raw_score,norm_score,seed"));
    assert!(one.contains("# header: "));
    assert!(one.contains("\"t0\":500"));

    // Offline-only report: tables plus a fine-tune notice.
    let out = seqeval(&["report", runs.to_str().unwrap()], root);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("final offline scores"));
    assert!(text.contains("no online phase"));
    assert!(text.contains("mixed-dataset final scores"));
    assert!(text.contains("optimality_gap"));
    assert!(runs.join("report.txt").exists());

    // Fine-tuning appends an online phase and the report grows its table.
    let ft_runs = root.join("runs-ft");
    let out = seqeval(
        &[
            "run",
            "--config",
            &config,
            "--finetune-steps",
            "400",
            "--seeds",
            "0",
            "--out-dir",
            ft_runs.to_str().unwrap(),
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = seqeval(&["report", ft_runs.to_str().unwrap()], root);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("final fine-tuned scores"), "report: {text}");
}

#[test]
fn replay_ratio_sweep_and_minibatch_mode() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = write_config(root, "");
    assert!(seqeval(&["make-datasets", "--config", &config], root).status.success());

    let rr_runs = root.join("runs-rr");
    let out = seqeval(
        &[
            "run",
            "--config",
            &config,
            "--rr",
            "0.25,1,4",
            "--seeds",
            "0",
            "--out-dir",
            rr_runs.to_str().unwrap(),
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = std::fs::read_dir(&rr_runs)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    // 2 algorithms x 2 datasets x 1 seed x 3 ratios.
    assert_eq!(names.len(), 12);
    assert!(names.iter().any(|n| n.contains("_rr0.25_")));
    assert!(names.iter().any(|n| n.contains("_rr4_")));
    // The report excludes sweep cells from the tables but counts them.
    let out = seqeval(&["report", rr_runs.to_str().unwrap()], root);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("replay-ratio sweep curves: 12 file(s)"));

    let mb_runs = root.join("runs-mb");
    let out = seqeval(
        &[
            "run",
            "--config",
            &config,
            "--mode",
            "minibatch",
            "--seeds",
            "0",
            "--out-dir",
            mb_runs.to_str().unwrap(),
        ],
        root,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mb_curve = std::fs::read_to_string(
        std::fs::read_dir(&mb_runs)
            .unwrap()
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .find(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
            .unwrap(),
    )
    .unwrap();
    assert!(mb_curve.contains("\"mode\":\"minibatch\""));
}

#[test]
fn report_on_missing_directory_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = seqeval(&["report", "no-such-dir"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}
