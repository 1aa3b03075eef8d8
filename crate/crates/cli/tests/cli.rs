use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_facadereg"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn value(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing {key} in {text}"))
        .to_string()
}

fn synth_instance(dir: &Path, extra: &str) {
    fs::write(dir.join("spec.cfg"), format!("rows = 2\ncols = 3\ndoors = 1\nseed = 3\n{extra}")).unwrap();
    let out = run(&["synth", "--spec", "spec.cfg", "-o", "runs"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn full_pipeline_from_synth_to_histogram() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_instance(dir, "instances = 2\n");
    for k in 0..2 {
        let inst = dir.join(format!("runs/instance_{k:03}"));
        let truth = fs::read_to_string(inst.join("truth.txt")).unwrap();
        let bbox = value(&truth, "box");
        let out = run(
            &["fit-reference", "reference.pgm", "--labels", "window,door", "--p", "4", "-o", "model.lpmix"],
            &inst,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let out = run(
            &[
                "register", "model.lpmix", "target.lpm", "--box", &bbox, "-o", "result.txt", "--trace", "trace.tsv",
                "--posterior", "post.lpm",
            ],
            &inst,
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

        let result = fs::read_to_string(inst.join("result.txt")).unwrap();
        for key in ["tx", "ty", "s", "alpha", "R", "iterations"] {
            value(&result, key).parse::<f64>().unwrap();
        }
        assert_eq!(value(&result, "converged"), "true");
        let dx = value(&result, "tx").parse::<f64>().unwrap() - value(&truth, "tx").parse::<f64>().unwrap();
        let dy = value(&result, "ty").parse::<f64>().unwrap() - value(&truth, "ty").parse::<f64>().unwrap();
        assert!(dx.hypot(dy) < 2.0, "translation error {}", dx.hypot(dy));

        let trace = fs::read_to_string(inst.join("trace.tsv")).unwrap();
        assert!(trace.starts_with("t\tR\ttx\tty\ts\talpha"));
        assert!(trace.lines().count() > 2);
        assert!(fs::read(inst.join("post.lpm")).unwrap().starts_with(b"LPM1\n"));
    }
    let out = run(&["evaluate", "--runs", "runs", "-o", "hist.tsv"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let hist = fs::read_to_string(dir.join("hist.tsv")).unwrap();
    assert!(hist.contains("translation_px\t2\t1.000000"), "{hist}");
}

#[test]
fn repeated_boxes_report_the_selected_start() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    synth_instance(dir, "");
    let inst = dir.join("runs/instance_000");
    let bbox = value(&fs::read_to_string(inst.join("truth.txt")).unwrap(), "box");
    run(&["fit-reference", "reference.pgm", "--labels", "window,door", "-o", "m.lpmix"], &inst);
    let out = run(
        &["segment", "m.lpmix", "target.lpm", "--box", "0,0,30,30", "--box", &bbox, "-o", "seg.lpm", "--argmax", "seg.pgm"],
        &inst,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read(inst.join("seg.pgm")).unwrap().starts_with(b"P5"));
    let out = run(
        &["register", "m.lpmix", "target.lpm", "--box", "0,0,30,30", "--box", &bbox, "-o", "r.txt"],
        &inst,
    );
    assert!(out.status.success());
    let result = fs::read_to_string(inst.join("r.txt")).unwrap();
    assert!(value(&result, "selected").parse::<usize>().unwrap() < 2);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_eq!(run(&["register", "--bogus"], dir).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], dir).status.code(), Some(2));

    fs::write(dir.join("bad.cfg"), "rows = 2\ncolour = red\n").unwrap();
    let out = run(&["synth", "--spec", "bad.cfg", "-o", "x"], dir);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    synth_instance(dir, "");
    let inst = dir.join("runs/instance_000");
    run(&["fit-reference", "reference.pgm", "--labels", "window,door", "-o", "m.lpmix"], &inst);
    fs::write(inst.join("empty.lpm"), b"").unwrap();
    let out = run(&["register", "m.lpmix", "empty.lpm", "--box", "0,0,50,50", "-o", "r.txt"], &inst);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad magic"));
    assert!(!inst.join("r.txt").exists());

    let bbox = value(&fs::read_to_string(inst.join("truth.txt")).unwrap(), "box");
    let out = run(
        &["register", "m.lpmix", "target.lpm", "--box", &bbox, "--max-iters", "1", "--stride", "1", "-o", "r.txt"],
        &inst,
    );
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(value(&fs::read_to_string(inst.join("r.txt")).unwrap(), "converged"), "false");
}
