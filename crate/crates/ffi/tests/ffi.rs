use std::ffi::{c_char, CStr, CString};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use oracle_rank::corpus::{generate_synthetic_corpus, CountRange, SyntheticSpec};
use oracle_rank_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(oracle_rank_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

/// Small synthetic corpus on disk; returns (dir, records, outcomes).
fn corpus_files() -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        bugs: 4,
        failed_per_bug: CountRange { min: 5, max: 12 },
        passing_per_bug: 3,
        ..SyntheticSpec::default()
    };
    let [records, outcomes, _] = generate_synthetic_corpus(&spec, 2)
        .unwrap()
        .write_to(dir.path())
        .unwrap();
    (dir, records, outcomes)
}

#[test]
fn ingest_and_evaluate() {
    let (_dir, records, outcomes) = corpus_files();
    let mut corpus = ptr::null_mut();
    let s = unsafe { oracle_rank_corpus_ingest(cstr(&records).as_ptr(), cstr(&outcomes).as_ptr(), &mut corpus) };
    assert_eq!(s, OracleRankStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { oracle_rank_corpus_bug_count(corpus) }, 4);
    assert!(unsafe { oracle_rank_corpus_len(corpus) } >= 4 * 8);

    let ks = [1usize, 3];
    let seeds = [0u64, 1];
    let mut json: *mut c_char = ptr::null_mut();
    let s = unsafe {
        oracle_rank_evaluate(
            corpus,
            ks.as_ptr(),
            2,
            seeds.as_ptr(),
            2,
            OracleRankRanking::Random as i32,
            false,
            &mut json,
        )
    };
    assert_eq!(s, OracleRankStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    assert!(text.contains("\"ranking\": \"random\""));
    unsafe { oracle_rank_string_free(json) };

    let s = unsafe { oracle_rank_evaluate(corpus, ks.as_ptr(), 2, seeds.as_ptr(), 2, 42, false, &mut json) };
    assert_eq!(s, OracleRankStatus::InvalidArg);
    assert!(last_error().contains("unknown ranking"));
    let bad_k = [3usize, 1];
    let s = unsafe { oracle_rank_evaluate(corpus, bad_k.as_ptr(), 2, seeds.as_ptr(), 2, 0, false, &mut json) };
    assert_eq!(s, OracleRankStatus::InvalidArg);
    unsafe { oracle_rank_corpus_free(corpus) };
}

#[test]
fn ingest_errors_map_to_status() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    let mut corpus = ptr::null_mut();
    let s = unsafe { oracle_rank_corpus_ingest(cstr(&missing).as_ptr(), cstr(&missing).as_ptr(), &mut corpus) };
    assert_eq!(s, OracleRankStatus::Io);
    assert!(last_error().contains("missing.jsonl"));
    assert!(corpus.is_null());

    let bad = dir.path().join("bad.jsonl");
    fs::write(&bad, "{not json\n").unwrap();
    let s = unsafe { oracle_rank_corpus_ingest(cstr(&bad).as_ptr(), cstr(&bad).as_ptr(), &mut corpus) };
    assert_eq!(s, OracleRankStatus::Parse);
    assert!(last_error().contains(":1:"), "{}", last_error());
}

#[test]
fn forest_handle() {
    let rows = [0.0, 0.0, 0.1, 0.1, 0.2, 0.0, 0.0, 0.2, 0.1, 0.0, 9.0, 9.0];
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { oracle_rank_forest_fit(rows.as_ptr(), 6, 2, 100, 0, 7, &mut f) },
        OracleRankStatus::Ok
    );
    let (mut a, mut b) = (0.0, 0.0);
    assert_eq!(
        unsafe { oracle_rank_forest_score(f, rows.as_ptr(), 2, &mut a) },
        OracleRankStatus::Ok
    );
    assert_eq!(
        unsafe { oracle_rank_forest_score(f, rows[10..].as_ptr(), 2, &mut b) },
        OracleRankStatus::Ok
    );
    assert!(b > a && (0.0..1.0).contains(&a) && b < 1.0);
    assert_eq!(
        unsafe { oracle_rank_forest_score(f, rows.as_ptr(), 3, &mut a) },
        OracleRankStatus::InvalidArg
    );
    let nan = [f64::NAN, 0.0];
    assert_eq!(
        unsafe { oracle_rank_forest_score(f, nan.as_ptr(), 2, &mut a) },
        OracleRankStatus::InvalidArg
    );
    assert_eq!(
        unsafe { oracle_rank_forest_score(ptr::null(), rows.as_ptr(), 2, &mut a) },
        OracleRankStatus::NullArg
    );
    unsafe { oracle_rank_forest_free(f) };

    assert_eq!(
        unsafe { oracle_rank_forest_fit(rows.as_ptr(), 0, 2, 100, 0, 7, &mut f) },
        OracleRankStatus::InvalidArg
    );
    assert_eq!(
        unsafe { oracle_rank_forest_fit(rows.as_ptr(), 6, 2, 0, 0, 7, &mut f) },
        OracleRankStatus::InvalidArg
    );
    assert_eq!(
        unsafe { oracle_rank_forest_fit(ptr::null(), 6, 2, 10, 0, 7, &mut f) },
        OracleRankStatus::NullArg
    );
}

#[test]
fn scalar_functions() {
    let mut sim = 0.0;
    let (a, b) = (c"getValue returns value", c"returns the stored value");
    assert_eq!(
        unsafe { oracle_rank_tfidf_cosine(a.as_ptr(), b.as_ptr(), &mut sim) },
        OracleRankStatus::Ok
    );
    assert!((sim - 0.465_646_219_098_899_9).abs() < 1e-12);

    let x = [2.0, 4.0, 6.0, 8.0, 10.0];
    let y = [1.0, 2.0, 3.0, 4.0, 5.0];
    let (mut w, mut p) = (0.0, 0.0);
    assert_eq!(
        unsafe { oracle_rank_wilcoxon(x.as_ptr(), y.as_ptr(), 5, &mut w, &mut p) },
        OracleRankStatus::Ok
    );
    assert_eq!((w, p), (0.0, 0.0625));
    assert_eq!(
        unsafe { oracle_rank_wilcoxon(x.as_ptr(), y.as_ptr(), 0, &mut w, &mut p) },
        OracleRankStatus::InvalidArg
    );

    let (mut d, mut m) = (0.0, OracleRankMagnitude::Negligible);
    assert_eq!(
        unsafe { oracle_rank_cliffs_delta(x.as_ptr(), 5, y.as_ptr(), 5, &mut d, &mut m) },
        OracleRankStatus::Ok
    );
    // 19 of 25 pairs favour x, 2 tie, 4 favour y.
    assert_eq!(d, (19.0 - 4.0) / 25.0);
    assert_eq!(m, OracleRankMagnitude::Large);

    let ranks = [1usize, 4, 0, 2];
    let (mut count, mut frac) = (0usize, 0.0);
    assert_eq!(
        unsafe { oracle_rank_found_at_k(ranks.as_ptr(), 4, 2, &mut count, &mut frac) },
        OracleRankStatus::Ok
    );
    assert_eq!((count, frac), (2, 0.5));
    assert_eq!(
        unsafe { oracle_rank_found_at_k(ranks.as_ptr(), 4, 0, &mut count, &mut frac) },
        OracleRankStatus::InvalidArg
    );

    let trace = c"a.FooTest::test1\njava.lang.IllegalStateException: closed\n\tat a.Foo.get(Foo.java:3)";
    let mut name: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { oracle_rank_trace_exception(trace.as_ptr(), &mut name) },
        OracleRankStatus::Ok
    );
    assert_eq!(
        unsafe { CStr::from_ptr(name) }.to_str().unwrap(),
        "IllegalStateException"
    );
    unsafe { oracle_rank_string_free(name) };
    assert_eq!(
        unsafe { oracle_rank_trace_exception(c"one line".as_ptr(), &mut name) },
        OracleRankStatus::Parse
    );

    let v = unsafe { CStr::from_ptr(oracle_rank_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_every_export() {
    let header = fs::read_to_string(crate_dir().join("include/oracle_rank.h")).unwrap();
    let src = fs::read_to_string(crate_dir().join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split_once("extern \"C\" fn ").map(|(_, rest)| rest))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 15, "{exports:?}");
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    for ty in [
        "typedef struct OracleRankCorpus",
        "typedef struct OracleRankForest",
        "ORACLE_RANK_STATUS_PANIC = 6",
    ] {
        assert!(header.contains(ty), "{ty} missing from header");
    }
}

/// Compiles `tests/smoke.c` against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler ({cc})");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("liboracle_rank_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());

    let (dir, records, outcomes) = corpus_files();
    let bin = dir.path().join("smoke");
    let out = Command::new(&cc)
        .arg(crate_dir().join("tests/smoke.c"))
        .arg("-I")
        .arg(crate_dir().join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "cc failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).arg(&records).arg(&outcomes).output().unwrap();
    assert!(
        run.status.success(),
        "smoke failed: {}{}",
        String::from_utf8_lossy(&run.stdout),
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).contains("bugs=4"));
}
