//! End-to-end tests of the experiment binary: schema stability, seed
//! determinism, and the qualitative content the output formats promise.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pdmp-nuts"))
}

fn run_ok(args: &[&str]) {
    let out = bin().args(args).output().expect("spawn pdmp-nuts");
    assert!(
        out.status.success(),
        "pdmp-nuts {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

const SUMMARY_HEADER: &str = "schema,sampler,target,d,h,step_policy,scheme,horizon,steps,\
events,gradient_evaluations,acceptance_rate,ess_first_coordinate,ess_per_step,\
events_per_step,gradients_per_event";

const FUNNEL_HEADER: &str =
    "schema,sampler,label,param,steps,x1_mean,x1_std,ess_x1,gradient_evaluations,chain_file";

#[test]
fn gaussian_scaling_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    let args = |out: &Path, seed: &str| {
        vec![
            "gaussian-scaling".to_string(),
            "--dims".into(),
            "2,4".into(),
            "--scheme".into(),
            "order1".into(),
            "--step".into(),
            "fixed:2.0".into(),
            "--steps".into(),
            "100".into(),
            "--seed".into(),
            seed.into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    for (out, seed) in [(&a, "42"), (&b, "42"), (&c, "43")] {
        let args = args(out, seed);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        run_ok(&args);
    }
    assert_eq!(
        read(&a),
        read(&b),
        "same seed must give byte-identical output"
    );
    assert_ne!(read(&a), read(&c), "different seed must change the output");

    let mut rdr = csv::Reader::from_path(&a).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>().join(","),
        SUMMARY_HEADER
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for (row, d) in rows.iter().zip(["2", "4"]) {
        assert_eq!(&row[0], "summary.v1");
        assert_eq!(&row[1], "nuts-exact");
        assert_eq!(&row[3], d);
        // Every numeric column must parse.
        for idx in [4, 7, 11, 12, 13, 14, 15] {
            row[idx]
                .parse::<f64>()
                .unwrap_or_else(|e| panic!("column {idx}: {e}"));
        }
        let events: u64 = row[9].parse().unwrap();
        let grads: u64 = row[10].parse().unwrap();
        assert!(
            events > 0 && grads >= events,
            "events {events}, gradients {grads}"
        );
    }
}

#[test]
fn funnel_compare_summary_and_chain_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("funnel.csv");
    run_ok(&[
        "funnel-compare",
        "--steps",
        "300",
        "--epsilons",
        "0.5",
        "--step",
        "adaptive:0.01",
        "--scheme",
        "order1",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>().join(","),
        FUNNEL_HEADER
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][1], "doubly-adaptive");
    assert_eq!(&rows[1][1], "hmc");
    for row in &rows {
        assert_eq!(&row[0], "funnel.v1");
        let std: f64 = row[6].parse().unwrap();
        assert!(std > 0.0);
        // The advertised chain dump exists next to the summary and has one
        // data row per chain step.
        let chain = out.with_file_name(&row[9]);
        let mut chain_rdr = csv::Reader::from_path(&chain).unwrap();
        let n = chain_rdr
            .records()
            .map(|r| {
                let rec = r.unwrap();
                assert_eq!(&rec[0], "chain.v1");
                rec[2].parse::<f64>().unwrap();
            })
            .count();
        assert_eq!(n, 300);
    }
}

#[test]
fn trajectory_dump_format_determinism_and_neck_refinement() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for out in [&a, &b] {
        run_ok(&[
            "trajectory",
            "--scheme",
            "order0",
            "--step",
            "adaptive:0.01",
            "--horizon",
            "120",
            "--seed",
            "2",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    assert_eq!(
        read(&a),
        read(&b),
        "trajectory dump must be seed-deterministic"
    );

    let text = String::from_utf8(read(&a)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# trajectory.v1"));
    assert!(lines.next().unwrap().starts_with("T "));
    assert!(lines.next().unwrap().starts_with("I "));

    // One G line per gradient evaluation: "G <time> <x1> <x2>".
    let mut evals: Vec<(f64, f64)> = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("G ") {
            let fields: Vec<f64> = rest.split(' ').map(|f| f.parse().unwrap()).collect();
            assert_eq!(fields.len(), 3, "bad G line {line:?}");
            evals.push((fields[0], fields[1]));
        }
    }
    assert!(evals.len() > 200, "only {} evaluation lines", evals.len());
    evals.sort_by(|p, q| p.0.total_cmp(&q.0));

    // Adaptivity check: evaluations cluster in the funnel neck, so the
    // median spacing between consecutive evaluations deep in the neck
    // (x1 < -2) is smaller than out in the mouth (x1 > 2).
    let spacings = |pred: &dyn Fn(f64) -> bool| -> Vec<f64> {
        evals
            .windows(2)
            .filter(|w| pred(w[0].1) && pred(w[1].1))
            .map(|w| w[1].0 - w[0].0)
            .collect()
    };
    let median = |mut v: Vec<f64>| -> f64 {
        assert!(
            v.len() >= 30,
            "too few spacings ({}) for a stable median",
            v.len()
        );
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let neck = median(spacings(&|x1| x1 < -2.0));
    let mouth = median(spacings(&|x1| x1 > 2.0));
    assert!(
        neck < mouth,
        "neck spacing {neck} not finer than mouth spacing {mouth}"
    );
}

#[test]
fn single_run_uses_out_dir_env_default() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "single-run",
            "--target",
            "gaussian:d=2",
            "--sampler",
            "mh-bps",
            "--scheme",
            "order0",
            "--step",
            "fixed:0.1",
            "--horizon",
            "1",
            "--steps",
            "100",
            "--seed",
            "3",
        ])
        .env("PDMP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let file = dir.path().join("single_run.csv");
    let mut rdr = csv::Reader::from_path(&file).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][1], "mh-bps");
    let acc: f64 = rows[0][11].parse().unwrap();
    assert!(acc > 0.5 && acc <= 1.0, "acceptance {acc}");
}

#[test]
fn bad_configurations_exit_nonzero() {
    let cases: Vec<Vec<&str>> = vec![
        // HMC needs a fixed step size.
        vec![
            "single-run",
            "--target",
            "gaussian:d=2",
            "--sampler",
            "hmc",
            "--step",
            "adaptive:0.01",
            "--steps",
            "10",
            "--out",
            "/dev/null",
        ],
        // Unknown target family.
        vec![
            "single-run",
            "--target",
            "cauchy:d=2",
            "--sampler",
            "mh-bps",
            "--steps",
            "10",
        ],
        // HMC has no event structure to tabulate in the scaling study.
        vec![
            "gaussian-scaling",
            "--sampler",
            "hmc",
            "--steps",
            "10",
            "--out",
            "/dev/null",
        ],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "expected failure for {args:?}");
    }
}
