use crate::run;

struct Output {
    code: u8,
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

fn srkbench(args: &[&str]) -> Output {
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("srkbench").chain(args.iter().copied()), &mut stdout, &mut stderr);
    Output { code, stdout, stderr }
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn check_tableau_reports_orders() {
    let o = srkbench(&["check-tableau", "--method", "an3d1"]);
    assert_eq!(o.code, 0);
    let text = stdout(&o);
    assert!(text.contains("stochastic order 3, deterministic order 4"), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with('D')).count(), 8);

    let o = srkbench(&["check-tableau", "--method", "euler"]);
    assert!(stdout(&o).contains("stochastic order 1, deterministic order 1"));
}

#[test]
fn check_tableau_reports_parse_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "name = bad\ns = 1\nalpha = 1\nA =\nx y\nb1 = 1\nb2 = 0\n").unwrap();
    let o = srkbench(&["check-tableau", "--tableau", path.to_str().unwrap()]);
    assert_eq!(o.code, 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn moment_grid() {
    let o = srkbench(&["moments", "--dist", "d7", "--max-k", "8"]);
    assert_eq!(o.code, 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,normal,d7");
    assert_eq!(lines[6], "6,15,15");
    assert_eq!(lines[8], "8,105,87");
}

#[test]
fn tree_listing() {
    let o = srkbench(&["trees", "--max-order", "1", "--noise-dim", "1"]);
    let text = stdout(&o);
    assert!(text.contains("•_0,1,1"));
    assert!(text.contains("# 3 trees"));

    let o = srkbench(&["trees", "--relevant", "3", "--noise-dim", "2"]);
    assert!(stdout(&o).contains("13 shape families"));
}

#[test]
fn converge_writes_one_row_per_step_and_a_footer() {
    let o = srkbench(&[
        "converge", "--method", "an3d1", "--problem", "ex1", "--h-exp", "1:-4", "--paths", "2000", "--seed", "42",
    ]);
    assert_eq!(o.code, 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 8);
    assert_eq!(
        lines[0],
        "method,problem,h,M,seed,mu_hat,sigma2_mu,ci_lo,ci_hi,effort_per_path,diverged_paths"
    );
    assert!(lines[1].starts_with("an3d1,ex1,2.00000E+00,2000,42,-7."), "{}", lines[1]);
    assert!(lines[6].starts_with("an3d1,ex1,6.25000E-02,"));
    assert!(lines[7].starts_with("fitted_order,an3d1,"));
}

#[test]
fn effort_pairs() {
    let o = srkbench(&["effort", "--method", "an3d1,exem", "--problem", "ex3", "--h-exp", "0:-1", "--paths", "100"]);
    assert_eq!(o.code, 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "method,problem,h,effort_per_path,abs_mu_hat,ci_half_width");
    assert!(lines[1].starts_with("an3d1,ex3,1.00000E+00,1.60000E+01,"));
    assert!(lines[3].starts_with("exem,ex3,1.00000E+00,1.80000E+01,"));
}

#[test]
fn out_file_is_independent_of_threads() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = ["converge", "--method", "euler", "--problem", "ex2", "--h-exp", "0:-2", "--paths", "5000"];
    let o = srkbench(&[&args[..], &["--out", a.to_str().unwrap()]].concat());
    assert_eq!(o.code, 0);
    let o = srkbench(&[&args[..], &["--out", b.to_str().unwrap(), "--threads", "3"]].concat());
    assert_eq!(o.code, 0);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn divergence_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wild.txt");
    std::fs::write(&path, "name = wild\ns = 1\nalpha = 1e300\nA =\n0\nb1 = 0\nb2 = 0\n").unwrap();
    let o = srkbench(&[
        "converge", "--method", "", "--tableau", path.to_str().unwrap(), "--h-exp", "0", "--paths", "10",
    ]);
    assert_eq!(o.code, 2);
    let text = stdout(&o);
    assert!(text.lines().nth(1).unwrap().ends_with(",NaN,NaN,NaN,NaN,6.00000E+00,10"), "{text}");
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["converge", "--h-exp", "-4:1"][..],
        &["converge", "--paths", "1"],
        &["converge", "--method", "pl3"],
        &["converge", "--dist", "d4"],
        &["moments", "--dist", "uniform"],
        &["frobnicate"],
        &["converge", "--h-exp", "0:-1", "--problem", "ex1", "--method", "an3d1", "--paths", "10", "--threads", "x"],
    ] {
        let o = srkbench(args);
        assert_eq!(o.code, 1, "{args:?}");
    }
    assert_eq!(srkbench(&["--help"]).code, 0);
}
