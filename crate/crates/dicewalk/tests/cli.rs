//! End-to-end tests of the `dicewalk` binary: output schemas, exit codes,
//! format parity, and the dump/parse round trip.

use std::process::Command;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::Value;

use dicewalk::cli::parse_pgf_dump;
use dicewalk::stats::parse_decimal;

fn dicewalk(args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_dicewalk"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        output.status.code().expect("exit code"),
        String::from_utf8(output.stdout).expect("utf8 stdout"),
        String::from_utf8(output.stderr).expect("utf8 stderr"),
    )
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, stdout, stderr) = dicewalk(args);
    let value = serde_json::from_str(&stdout)
        .unwrap_or_else(|e| panic!("bad json ({e}): {stdout}\n{stderr}"));
    (code, value)
}

#[test]
fn run_json_schema_is_stable() {
    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--init",
        "0",
        "--rounds",
        "50",
        "--digits",
        "20",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let top: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    let expected = [
        "L_abs", "L_rel", "M", "R", "a_R", "corr", "cov", "kurt_T", "meta", "skew_T", "spec",
        "status", "tail", "var_N", "var_T",
    ];
    let mut sorted = top.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, expected);

    for key in ["num", "den", "decimal"] {
        assert!(v["a_R"].get(key).is_some(), "a_R.{key} missing");
    }
    assert_eq!(v["status"], "ok");
    assert_eq!(v["R"], 50);
    assert_eq!(v["spec"]["predicate"], "prime");
    assert_eq!(v["meta"]["W"], 6);
    // Exact values arrive as strings, never binary floats.
    assert!(v["a_R"]["num"].is_string());
    assert!(v["M"]["decimal"].is_string());
    // Irrational statistics carry their exact signed squares.
    assert!(v["skew_T"]["signed_square_num"].is_string());
    assert!(v["corr"]["decimal"].is_string());
}

#[test]
fn run_reproduces_published_expectations() {
    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--init",
        "0",
        "--rounds",
        "200",
        "--digits",
        "20",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["M"]["decimal"], "2.4284979136935041712");

    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "semiprime",
        "--init",
        "0",
        "--rounds",
        "400",
        "--digits",
        "10",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["M"]["decimal"], "3.788921291");
}

#[test]
fn csv_and_json_renderings_are_identical() {
    let args = |format: &str| {
        vec![
            "run".to_string(),
            "--die".to_string(),
            "1:2,2:1,5:1".to_string(),
            "--predicate".to_string(),
            "prime".to_string(),
            "--rounds".to_string(),
            "80".to_string(),
            "--digits".to_string(),
            "25".to_string(),
            "--format".to_string(),
            format.to_string(),
        ]
    };
    let (code, v) = json(&args("json").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);
    let (code, csv, _) = dicewalk(&args("csv").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, 0);

    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        vec![
            "R", "a_R", "tail", "M", "L_abs", "L_rel", "var_T", "skew_T", "kurt_T", "var_N", "cov",
            "corr", "status"
        ]
    );
    let by_name = |name: &str| row[header.iter().position(|h| *h == name).unwrap()];
    for key in [
        "a_R", "tail", "M", "L_abs", "L_rel", "var_T", "skew_T", "kurt_T", "var_N", "cov", "corr",
    ] {
        let json_decimal = v[key]["decimal"].as_str().unwrap();
        assert_eq!(by_name(key), json_decimal, "field {key}");
    }
    assert_eq!(by_name("R"), v["R"].to_string());
    assert_eq!(by_name("status"), v["status"].as_str().unwrap());
}

#[test]
fn exit_codes_are_distinct_and_machine_readable() {
    // Trivial start: init satisfies the predicate.
    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--init",
        "2",
        "--rounds",
        "5",
        "--format",
        "json",
    ]);
    assert_eq!(code, 3);
    assert_eq!(v["status"], "error");
    assert_eq!(v["error"]["kind"], "invalid-start");

    // The override turns it into a duration-0 game.
    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--init",
        "2",
        "--rounds",
        "5",
        "--allow-trivial-start",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["M"]["decimal"], "0");
    assert_eq!(
        v["a_R"]["decimal"].as_str().unwrap(),
        "1.00000000000000000000000000000"
    );

    // Nothing ever hits: conditional statistics are undefined.
    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "never",
        "--rounds",
        "5",
        "--format",
        "json",
    ]);
    assert_eq!(code, 4);
    assert_eq!(v["error"]["kind"], "no-hits");

    // Tail target out of reach within the round budget.
    let (code, _, stderr) = dicewalk(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--eps",
        "1e-30",
        "--rmax",
        "10",
    ]);
    assert_eq!(code, 5, "stderr: {stderr}");

    // Unknown predicate.
    let (code, _, _) = dicewalk(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "primes",
        "--rounds",
        "5",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn run_not_converged_still_emits_the_summary() {
    let (code, stdout, _) = dicewalk(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--eps",
        "1e-30",
        "--rmax",
        "10",
        "--format",
        "csv",
    ]);
    assert_eq!(code, 5);
    assert!(stdout.contains("not-converged"), "stdout: {stdout}");
    assert!(stdout.lines().count() >= 2);
}

#[test]
fn pgf_round_trip_reproduces_absorbed_mass() {
    let (code, dump, _) = dicewalk(&[
        "pgf",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--init",
        "0",
        "--rounds",
        "12",
    ]);
    assert_eq!(code, 0);
    let (w, rounds) = parse_pgf_dump(&dump).unwrap();
    assert_eq!(w, 6);
    assert_eq!(rounds.len(), 12);

    // Re-sum the dump: sum of num / W^scale over all rounds equals a_R.
    let mut total = BigRational::zero();
    for (k, terms) in &rounds {
        for (_, num, scale) in terms {
            assert_eq!(scale, k, "terms of round {k} carry scale {scale}");
            total += BigRational::new(num.clone().into(), BigUint::from(w).pow(*scale).into());
        }
    }
    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--rounds",
        "12",
        "--digits",
        "20",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    let a_r = BigRational::new(
        v["a_R"]["num"].as_str().unwrap().parse().unwrap(),
        v["a_R"]["den"].as_str().unwrap().parse().unwrap(),
    );
    assert_eq!(total, a_r);
}

#[test]
fn pgf_first_two_rounds_match_the_worked_example() {
    let (code, dump, _) = dicewalk(&[
        "pgf",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--init",
        "0",
        "--rounds",
        "2",
    ]);
    assert_eq!(code, 0);
    let expected = "# W=6\n# k=1\n2\t1\t1\n3\t1\t1\n5\t1\t1\n# k=2\n2\t1\t2\n3\t1\t2\n5\t2\t2\n7\t3\t2\n11\t1\t2\n";
    assert_eq!(dump, expected);
}

#[test]
fn pgf_degenerate_cases() {
    let (code, dump, _) = dicewalk(&[
        "pgf",
        "--faces",
        "6",
        "--predicate",
        "never",
        "--rounds",
        "3",
    ]);
    assert_eq!(code, 0);
    let (_, rounds) = parse_pgf_dump(&dump).unwrap();
    assert_eq!(rounds.len(), 3);
    assert!(rounds.iter().all(|(_, terms)| terms.is_empty()));

    let (code, dump, _) = dicewalk(&[
        "pgf",
        "--die",
        "1:1",
        "--predicate",
        "prime",
        "--rounds",
        "3",
    ]);
    assert_eq!(code, 0);
    let (_, rounds) = parse_pgf_dump(&dump).unwrap();
    let all_terms: Vec<_> = rounds
        .iter()
        .flat_map(|(k, t)| t.iter().map(move |x| (*k, x.clone())))
        .collect();
    assert_eq!(all_terms, vec![(2u32, (2u64, BigUint::one(), 2u32))]);
}

#[test]
fn guarantee_at_exactly_one_half() {
    let (code, v) = json(&[
        "guarantee",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--eps",
        "0.5",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["R"], 1);
    assert_eq!(v["survivor"]["num"], "1");
    assert_eq!(v["survivor"]["den"], "2");

    // Parity obstruction: distinct not-converged exit code.
    let (code, v) = json(&[
        "guarantee",
        "--die",
        "4:1,6:1",
        "--predicate",
        "prime",
        "--eps",
        "0.5",
        "--rmax",
        "30",
        "--format",
        "json",
    ]);
    assert_eq!(code, 5);
    assert_eq!(v["error"]["kind"], "not-converged");
}

#[test]
fn constant_matches_the_practically_certain_estimate() {
    let (code, v) = json(&[
        "constant",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--digits",
        "20",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["decimal"], "2.4284979136935042304");
    assert_eq!(v["target"], "duration");
}

#[test]
fn sweep_rows_reproduce_published_expectations() {
    let (code, csv, _) = dicewalk(&[
        "sweep",
        "--faces",
        "6..6",
        "--predicate",
        "prime",
        "--eps",
        "1e-7",
        "--digits",
        "12",
    ]);
    assert_eq!(code, 0);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "faces,R,tail,M,var,skew,kurt,status");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "6");
    // A sweep row summarizes at the guarantee truncation, so its M is the
    // conditional mean at that R (2.42849215...), which shares six digits
    // with the limiting 2.4284979... An independent run at the same eps
    // must agree exactly.
    assert!(row[3].starts_with("2.42849"), "M column: {}", row[3]);
    let (code, v) = json(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--eps",
        "1e-7",
        "--digits",
        "12",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0);
    assert_eq!(v["M"]["decimal"].as_str().unwrap(), row[3]);
    assert_eq!(row[7], "ok");

    let (code, csv, _) = dicewalk(&[
        "sweep",
        "--faces",
        "6..6",
        "--predicate",
        "distinct-prime-product:3",
        "--eps",
        "1e-7",
        "--digits",
        "12",
    ]);
    assert_eq!(code, 0);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(row[3].starts_with("17.616887"), "M column: {}", row[3]);

    let (code, csv, _) = dicewalk(&[
        "sweep",
        "--faces",
        "6..6",
        "--predicate",
        "distinct-prime-product:4",
        "--eps",
        "1e-7",
        "--digits",
        "12",
    ]);
    assert_eq!(code, 0);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert!(row[3].starts_with("112.907872"), "M column: {}", row[3]);
}

#[test]
fn sweep_records_errors_in_row_and_continues() {
    // Faces 1: the fair one-faced die walks 1,2 and stops; faces 2..3 behave
    // normally; predicate `never` rows carry the error without aborting.
    let (code, csv, _) = dicewalk(&[
        "sweep",
        "--faces",
        "2..4",
        "--predicate",
        "never",
        "--eps",
        "0.5",
        "--rmax",
        "10",
    ]);
    assert_eq!(code, 0);
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert!(row.ends_with("error:no-hits"), "row: {row}");
    }
}

#[test]
fn plotdata_rows_match_independent_runs() {
    let (code, csv, _) = dicewalk(&[
        "plotdata",
        "--faces",
        "2..20",
        "--predicate",
        "prime",
        "--init",
        "0",
        "--eps",
        "1e-7",
        "--digits",
        "12",
    ]);
    assert_eq!(code, 0);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "faces,init,M");
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 19);
    for row in &rows {
        let faces = &row[0];
        assert_eq!(row[1], "0");
        let mean = parse_decimal(&row[2]).unwrap();
        assert!(mean > BigRational::zero(), "faces {faces}: M = {}", row[2]);

        // Independent check: a fresh run at the same parameters.
        let (code, v) = json(&[
            "run",
            "--faces",
            faces,
            "--predicate",
            "prime",
            "--eps",
            "1e-7",
            "--digits",
            "12",
            "--format",
            "json",
        ]);
        assert_eq!(code, 0);
        assert_eq!(
            v["M"]["decimal"].as_str().unwrap(),
            row[2],
            "faces {faces}: plotdata vs run"
        );
    }
}

#[test]
fn simulate_is_reproducible_and_self_describing() {
    let args = [
        "simulate",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--trials",
        "20000",
        "--cap",
        "100",
        "--seed",
        "7",
        "--format",
        "json",
    ];
    let (code, a) = json(&args);
    assert_eq!(code, 0);
    let (_, b) = json(&args);
    assert_eq!(a, b);
    assert_eq!(a["meta"]["rng"], "chacha8");
    assert_eq!(a["trials"], 20000);
    let mean = a["mean_T"].as_f64().unwrap();
    assert!((mean - 2.4284979).abs() < 0.1, "mean_T = {mean}");
}

#[test]
fn output_file_flag_writes_the_same_bytes() {
    let dir = std::env::temp_dir().join("dicewalk-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("out.json");
    let path_str = path.to_str().unwrap();
    let (code, stdout, _) = dicewalk(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--rounds",
        "20",
        "--format",
        "json",
        "--output",
        path_str,
    ]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    let written = std::fs::read_to_string(&path).unwrap();
    let (_, direct, _) = dicewalk(&[
        "run",
        "--faces",
        "6",
        "--predicate",
        "prime",
        "--rounds",
        "20",
        "--format",
        "json",
    ]);
    assert_eq!(written, direct);
    std::fs::remove_file(&path).ok();
}
