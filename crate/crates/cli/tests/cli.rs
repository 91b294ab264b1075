use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const XOR: &str = "input x1\ninput x2\ngate g1 XOR x1 x2\noutput g1\n";
const EIGHT: &str = "input a\ninput b\ninput c\n\
gate g1 AND a b\ngate g2 OR b c\ngate g3 XOR g1 g2\ngate g4 NAND a c\n\
gate g5 AND g3 g4\ngate g6 NOT g5\ngate g7 XOR g6 c\ngate g8 OR g7 g1\noutput g8\n";

fn iobp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iobp"))
        .args(args)
        .output()
        .expect("spawn iobp")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stat(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no `{key}` in {out}"))
        .to_string()
}

#[test]
fn compile_xor_within_bound() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "xor.ckt", XOR);
    let bp = dir.path().join("xor.bp");
    let o = iobp(&["compile-bp", s(&ckt), "--out", s(&bp)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(stat(&out, "length").parse::<usize>().unwrap() <= 4);
    assert_eq!(stat(&out, "width"), "5");
    assert_eq!(stat(&out, "bound"), "4");
    for (x, want) in [("00", "0"), ("01", "1"), ("10", "1"), ("11", "0")] {
        assert_eq!(stdout(&iobp(&["eval", s(&bp), x])).trim(), want);
    }
}

#[test]
fn pad_reaches_four_to_the_depth() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "eight.ckt", EIGHT);
    let o = iobp(&["compile-bp", s(&ckt), "--pad"]);
    assert!(o.status.success());
    let depth: u32 = stat(&String::from_utf8_lossy(&o.stderr), "depth").parse().unwrap();
    let header = stdout(&o).lines().next().unwrap().to_string();
    assert_eq!(header, format!("BP v1 5 {} 3", 4usize.pow(depth)));
}

#[test]
fn bad_circuit_exits_2_with_line() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "bad.ckt", "input a\ngate g FOO a\noutput g\n");
    for cmd in ["parse", "compile-bp"] {
        let o = iobp(&[cmd, s(&ckt)]);
        assert_eq!(o.status.code(), Some(2));
        assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    }
}

#[test]
fn obfuscated_xor_evaluates() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "xor.ckt", XOR);
    let gp = dir.path().join("xor.gp");
    let o = iobp(&["obfuscate", s(&ckt), "--seed", "7", "--out", s(&gp)]);
    assert!(o.status.success());
    let out = stdout(&o);
    let (n, d): (usize, usize) = (stat(&out, "n").parse().unwrap(), stat(&out, "d").parse().unwrap());
    assert_eq!(d, 4 * n + 15);
    assert_eq!(stat(&out, "encodings").parse::<usize>().unwrap(), 4 * d + 4 * n * d * d);
    assert_eq!(stdout(&iobp(&["eval", s(&gp), "01"])).trim(), "1");
    assert_eq!(stdout(&iobp(&["eval", s(&gp), "11"])).trim(), "0");

    let o = iobp(&["eval", s(&gp), "0"]);
    assert_eq!(o.status.code(), Some(4));

    let text = std::fs::read_to_string(&gp).unwrap();
    let cut = &text[..text.len() / 2];
    let broken = write(&dir, "broken.gp", &cut[..cut.rfind('\n').unwrap() + 1]);
    assert_eq!(iobp(&["eval", s(&broken), "01"]).status.code(), Some(5));
    let mangled = write(&dir, "mangled.gp", &text.replacen("GP v1", "GP v9", 1));
    assert_eq!(iobp(&["eval", s(&mangled), "01"]).status.code(), Some(5));
}

#[test]
fn same_seed_same_bytes() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "xor.ckt", XOR);
    let a = iobp(&["obfuscate", s(&ckt), "--seed", "7"]).stdout;
    let b = iobp(&["obfuscate", s(&ckt), "--seed", "7"]).stdout;
    let c = iobp(&["obfuscate", s(&ckt), "--seed", "8"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn universal_beyond_micro_family_exits_3() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "xor.ckt", XOR);
    let o = iobp(&["obfuscate", s(&ckt), "--mode", "universal"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("matrix dimension"));
}

#[test]
fn universal_single_gate_family_runs() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "not.ckt", "input a\ngate g NOT a\noutput g\n");
    let gp = dir.path().join("not.gp");
    assert!(iobp(&["obfuscate", s(&ckt), "--mode", "universal", "--out", s(&gp)])
        .status
        .success());
    let info = stdout(&iobp(&["inspect", s(&gp)]));
    assert_eq!(stat(&info, "free"), "1");
    assert_eq!(stdout(&iobp(&["eval", s(&gp), "0"])).trim(), "1");
    assert_eq!(stdout(&iobp(&["eval", s(&gp), "1"])).trim(), "0");
}

#[test]
fn polysize_identity_bundle_matches_circuit() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "eight.ckt", EIGHT);
    let bundle = dir.path().join("eight.iop");
    let o = iobp(&[
        "obfuscate",
        s(&ckt),
        "--target",
        "polysize",
        "--seed",
        "1",
        "--out",
        s(&bundle),
    ]);
    assert!(o.status.success());
    for x in ["000", "001", "010", "011", "100", "101", "110", "111"] {
        let want = stdout(&iobp(&["eval", s(&ckt), x]));
        assert_eq!(stdout(&iobp(&["eval", s(&bundle), x])), want, "input {x}");
    }
    assert_eq!(iobp(&["eval", s(&bundle), "01"]).status.code(), Some(4));
    let info = stdout(&iobp(&["inspect", s(&bundle)]));
    assert_eq!(stat(&info, "kind"), "bundle");
    assert_eq!(stat(&info, "fhe_secure"), "false");
}

#[test]
fn polysize_garbled_bundle_on_micro_circuit() {
    let dir = TempDir::new().unwrap();
    let ckt = write(&dir, "not.ckt", "input a\ngate g NOT a\noutput g\n");
    let bundle = dir.path().join("not.iop");
    let args = [
        "obfuscate",
        s(&ckt),
        "--target",
        "polysize",
        "--backend",
        "garbled",
        "--out",
        s(&bundle),
    ];
    assert!(iobp(&args).status.success());
    assert_eq!(stdout(&iobp(&["eval", s(&bundle), "0"])).trim(), "1");
    assert_eq!(stdout(&iobp(&["eval", s(&bundle), "1"])).trim(), "0");

    let big = write(&dir, "xor.ckt", XOR);
    let o = iobp(&["obfuscate", s(&big), "--target", "polysize", "--backend", "garbled"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn bench_tsv_shape() {
    let o = iobp(&["bench", "--from", "1", "--to", "2", "--seed", "5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(
        rows[0],
        [
            "depth",
            "length",
            "bound",
            "n",
            "d",
            "randomize_ms",
            "encode_ms",
            "eval_ms"
        ]
    );
    assert_eq!(rows.len(), 3);
    let lens: Vec<usize> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(lens[1] <= 4 * lens[0]);
    for r in &rows[1..] {
        assert!(r[1].parse::<usize>().unwrap() <= r[2].parse::<usize>().unwrap());
    }
    // the structural columns do not depend on timing
    let again = stdout(&iobp(&["bench", "--from", "1", "--to", "2", "--seed", "5"]));
    let cols = |s: &str| {
        s.lines()
            .map(|l| l.split('\t').take(5).collect::<Vec<_>>().join("\t"))
            .collect::<Vec<_>>()
    };
    assert_eq!(cols(&out), cols(&again));
}

#[test]
fn selftest_subset_reports_table() {
    let o = iobp(&["selftest", "--check", "2", "--check", "10", "--check", "11"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(out.ends_with("3 passed, 0 failed\n"));
}

#[test]
fn selftest_mutation_check_runs_with_zero_case() {
    let o = iobp(&["selftest", "--check", "3"]);
    let out = stdout(&o);
    assert!(o.status.success(), "{out}");
    assert!(out.contains("mutation: same-pattern bookends"));
}
