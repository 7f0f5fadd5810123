use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dh2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dh2")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for e in walk(dir) {
        out.push((e.strip_prefix(dir).unwrap().display().to_string(), fs::read(&e).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            v.extend(walk(&p));
        } else {
            v.push(p);
        }
    }
    v
}

const SMALL: [&str; 6] = ["--level", "2", "--kappa", "2", "--leaf-size", "4"];

#[test]
fn compress_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let csv = tmp.path().join(format!("{name}.csv"));
        let mut args = vec!["compress", "--no-timings", "--out", out.to_str().unwrap(), "--csv", csv.to_str().unwrap()];
        args.extend(SMALL);
        stdout(&dh2(&args));
        (fs::read(csv).unwrap(), files(&out))
    };
    let (csv1, f1) = run("a");
    let (csv2, f2) = run("b");
    assert_eq!(csv1, csv2);
    assert_eq!(f1, f2);
    let text = String::from_utf8(csv1).unwrap();
    assert!(text.starts_with("method,n,kappa,eps,"));
    assert!(text.lines().nth(1).unwrap().starts_with("compress,128,2,1.00000e-4,"));
}

#[test]
fn matvec_reads_a_stored_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("m");
    let mut args = vec!["assemble", "--no-error", "--order", "2", "--out", dir.to_str().unwrap()];
    args.extend(SMALL);
    stdout(&dh2(&args));
    let y = tmp.path().join("y.cmx");
    let text = stdout(&dh2(&["matvec", "--input", dir.to_str().unwrap(), "--out", y.to_str().unwrap()]));
    assert!(text.lines().nth(1).unwrap().starts_with("128,"));
    assert_eq!(&fs::read(y).unwrap()[..4], b"CMX1");
}

#[test]
fn dense_input_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g.cmx");
    let mut args = vec!["dense", "--out", g.to_str().unwrap()];
    args.extend(SMALL);
    stdout(&dh2(&args));
    let mut args = vec!["compress", "--no-timings", "--input", g.to_str().unwrap()];
    args.extend(SMALL);
    let from_file = stdout(&dh2(&args));
    let mut args = vec!["compress", "--no-timings"];
    args.extend(SMALL);
    assert_eq!(from_file, stdout(&dh2(&args)));
}

#[test]
fn compare_aca_prints_two_rows() {
    let mut args = vec!["compare-aca", "--no-timings"];
    args.extend(SMALL);
    let text = stdout(&dh2(&args));
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("compress,") && rows[2].starts_with("aca,"));
    assert!(rows[1].contains(",true,"));
}

#[test]
fn stats_and_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let tree = tmp.path().join("tree.jsonl");
    let blocks = tmp.path().join("blocks.csv");
    let mut args = vec!["stats", "--out", tree.to_str().unwrap(), "--blocks", blocks.to_str().unwrap()];
    args.extend(SMALL);
    let text = stdout(&dh2(&args));
    assert!(text.starts_with("level,clusters,diameter,directions,"));
    assert!(fs::read_to_string(tree).unwrap().lines().count() > 1);
    assert!(fs::read_to_string(blocks).unwrap().starts_with("tLevel,tId,sId,status,directionIndex"));
}

#[test]
fn mesh_writes_off() {
    let text = stdout(&dh2(&["mesh", "--level", "0"]));
    assert!(text.starts_with("OFF\n6 8 0\n"));
}

#[test]
fn errors_are_one_line_and_nonzero() {
    for args in [
        vec!["compress", "--level", "9"],
        vec!["compress", "--level", "2", "--eps", "0"],
        vec!["matvec", "--input", "/nonexistent/dir"],
    ] {
        let o = dh2(&args);
        assert!(!o.status.success());
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(err.lines().filter(|l| l.starts_with("error: ")).count(), 1, "{err}");
    }
}
