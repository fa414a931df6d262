use std::path::Path;
use std::process::{Command, Output};

fn tlunet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlunet")).current_dir(dir).args(args).env_remove("TLUNET_DATA_ROOT").output().unwrap()
}

const TINY: &str = "label = tiny
output_dir = runs
synth.count = 24
synth.height = 32
synth.width = 32
model.encoder = resnet
model.resnet.stem = 4
model.resnet.widths = 4,6,8,8
model.resnet.blocks = 1,1,1,1
model.stages = 2
model.decoder_channels = 8,6
train.max_epochs = 1
train.batch_size = 8
";

#[test]
fn train_predict_compare_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("tiny.txt"), TINY).unwrap();

    let out = tlunet(d, &["prepare", "-c", "tiny.txt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = tlunet(d, &["train", "-c", "tiny.txt"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(tlunet(d, &["train", "-c", "tiny.txt"]).status.code(), Some(1));

    assert!(tlunet(d, &["export-encoder", "--checkpoint", "runs/tiny/checkpoint.tlar", "--out", "enc.tlar"]).status.success());
    let out = tlunet(d, &["train", "-c", "tiny.txt", "--label", "tiny2", "--init", "pretrained", "--pretrained", "enc.tlar"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    assert!(tlunet(d, &["compare", "runs/tiny2", "runs/tiny", "--out", "cmp"]).status.success());
    assert!(d.join("cmp/comparison_dice_hist.csv").exists());
    assert!(tlunet(d, &["report", "runs/tiny", "runs/tiny2", "--out", "rep"]).status.success());
    assert!(d.join("rep/convergence.csv").exists());

    assert!(tlunet(d, &["synth", "--out", "syn", "--count", "3", "--height", "32", "--width", "32"]).status.success());
    let out = tlunet(
        d,
        &["predict", "--checkpoint", "runs/tiny/checkpoint.tlar", "--truth", "syn/annotations.csv", "--overlay-dir", "ov", "syn/images/synth_000_00000.png"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 5);
    assert!(d.join("ov/synth_000_00000_overlay.png").exists());

    let out = tlunet(d, &["evaluate", "--checkpoint", "runs/tiny/checkpoint.tlar", "--images", "syn/images", "--annotations", "syn/annotations.csv", "--out", "ev"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("ev/test_summary.json").exists());
}

#[test]
fn exit_codes_follow_error_kind() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("tiny.txt"), TINY).unwrap();
    assert_eq!(tlunet(d, &["train", "-c", "tiny.txt", "--set", "train.bogus=1"]).status.code(), Some(1));
    assert_eq!(tlunet(d, &["train", "-c", "tiny.txt", "--set", "train.learning_rate=-1"]).status.code(), Some(1));
    assert_eq!(tlunet(d, &["train", "-c", "missing.txt"]).status.code(), Some(2));
    assert_eq!(
        tlunet(d, &["train", "-c", "tiny.txt", "--init", "pretrained", "--pretrained", "absent.tlar"]).status.code(),
        Some(2)
    );
    // A learning rate this large drives the weights to infinity.
    let out = tlunet(d, &["train", "-c", "tiny.txt", "--label", "boom", "--set", "train.learning_rate=1e38", "--set", "train.max_epochs=3"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
