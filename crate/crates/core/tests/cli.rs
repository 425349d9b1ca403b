use std::path::Path;
use std::process::{Command, Output};

use dyncover::io::write_instance;
use dyncover::model::{fig1, DomainConstraint, Sense, Term};

fn dyncover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyncover"))
        .args(args)
        .env("DYNCOVER_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_fig1(dir: &Path) -> String {
    let p = dir.join("fig1.json");
    std::fs::write(&p, write_instance(&fig1())).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn generate_then_solve_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("g.json");
    let inst = inst.to_str().unwrap();
    let o = dyncover(&[
        "generate", "--seed", "3", "--users", "60", "--facilities", "6", "--periods", "2",
        "--domain", "ev", "--out", inst,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("runs.csv");
    let csv = csv.to_str().unwrap();
    let mut objectives = Vec::new();
    for m in ["bc", "ubbc", "abbc", "lb"] {
        let o = dyncover(&["solve", inst, "--method", m, "--csv", csv]);
        assert_eq!(o.status.code(), Some(0), "{m}");
        let text = stdout(&o);
        assert!(text.contains("status=optimal"), "{text}");
        let obj = text.split("objective=").nth(1).unwrap().split(' ').next().unwrap().to_string();
        objectives.push(obj);
    }
    assert!(objectives.windows(2).all(|w| w[0] == w[1]), "{objectives:?}");
    let table = std::fs::read_to_string(csv).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(table.starts_with("instance,method"));
}

#[test]
fn solve_writes_solution_that_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(dir.path());
    let sol = dir.path().join("x.json");
    let sol = sol.to_str().unwrap();
    let o = dyncover(&["solve", &inst, "--method", "lb", "--sub", "subb", "--sep", "sepb", "--solution-out", sol]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("objective=30"));
    let o = dyncover(&["evaluate", &inst, "--solution", sol]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "coverage 30\nper_period 30\nfeasible true\n");
}

#[test]
fn compare_writes_one_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(dir.path());
    let csv = dir.path().join("cmp.csv");
    let o = dyncover(&[
        "compare", &inst, "--methods", "greedy,ubbc,abbc,lb", "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let table = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.starts_with("fig1,")));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(dyncover(&[]).status.code(), Some(2));
    assert_eq!(dyncover(&["solve"]).status.code(), Some(2));
    assert_eq!(dyncover(&["solve", "x.json", "--method", "simplex"]).status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(dyncover(&["solve", missing.to_str().unwrap()]).status.code(), Some(1));
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\n  \"periods\": 1,\n  \"facilities\": \n}").unwrap();
    let o = dyncover(&["solve", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn infeasible_domain_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("inf.json");
    let base = fig1();
    let mut domain = base.domain().clone();
    domain.constraints.push(DomainConstraint::Linear {
        terms: (0..3).map(|facility| Term { facility, period: 0, coef: 1.0 }).collect(),
        sense: Sense::Ge,
        rhs: 3.0,
    });
    std::fs::write(&p, write_instance(&base.with_domain(domain).unwrap())).unwrap();
    let o = dyncover(&["solve", p.to_str().unwrap(), "--method", "abbc"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn zero_time_limit_reports_time_limit() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_fig1(dir.path());
    let o = dyncover(&["solve", &inst, "--method", "ubbc", "--time-limit", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("status=time_limit"));
}
