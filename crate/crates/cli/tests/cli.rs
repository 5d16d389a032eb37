use std::path::PathBuf;
use std::process::{Command, Output};

fn ck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ck")).args(args).output().expect("spawn ck")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ck-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn help_succeeds_and_bad_flags_fail() {
    assert_eq!(ck(&["--help"]).status.code(), Some(0));
    assert_eq!(ck(&["solve", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(ck(&["solve", "--precond", "amg"]).status.code(), Some(1));
    assert_eq!(ck(&["richardson-table", "--table", "3"]).status.code(), Some(1));
}

#[test]
fn invalid_configuration_exits_with_one() {
    let o = ck(&["solve", "--q", "0", "--mesh-m", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert_eq!(ck(&["solve", "--t", "-1", "--mesh-m", "4"]).status.code(), Some(1));
    assert_eq!(ck(&["quad-table", "--q", "0"]).status.code(), Some(1));
}

#[test]
fn unconverged_solves_exit_with_two() {
    let o = ck(&["solve", "--mesh-m", "8", "--q", "8", "--method", "cg", "--precond", "none", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(2));
    // the partial result is still written
    assert!(stdout(&o).starts_with("t,error,norm_u"));
}

#[test]
fn converged_solve_reports_small_error() {
    let o = ck(&["solve", "--mesh-m", "12", "--t", "0.5", "--t", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,error,norm_u");
    assert_eq!(lines.len(), 3);
    let err: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(err < 1e-3, "{err}");
}

#[test]
fn table_headers() {
    let cases: [(&[&str], &str); 5] = [
        (&["quad-table"], "j,xi,x,y,dx,dy,eps_j"),
        (&["richardson-table"], "j,x,y,rho_z,phi_z,eps_z,rho_inv,phi_inv,mu_z,eps_tilde_z"),
        (
            &["richardson-table", "--table", "2"],
            "j,mu_z,rho_hat,phi_hat,eps_hat,rho_breve,phi_breve,eps_breve,precond_rho,precond_phi,precond_eps",
        ),
        (&["cg-table"], "j,x,y,eta_z,eta_tilde_z,mu_z,eta_tilde_mu0,mu0"),
        (
            &["iterations-table", "--mesh-m", "6", "--q", "6"],
            "j,richardson_inv,cg,cg_inv,cg_ic0,cg_sgs,norm_w,eps_j",
        ),
    ];
    for (args, header) in cases {
        let o = ck(args);
        assert_eq!(o.status.code(), Some(0), "{args:?}");
        assert_eq!(stdout(&o).lines().next().unwrap(), header, "{args:?}");
    }
    // every second node plus the extra point
    assert_eq!(stdout(&ck(&["richardson-table"])).lines().count(), 1 + 11 + 1);
    assert_eq!(stdout(&ck(&["cg-table", "--all"])).lines().count(), 1 + 21 + 1);
}

#[test]
fn json_output_parses() {
    let o = ck(&["cg-table", "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 12);
    assert!((rows[10]["eta_z"].as_f64().unwrap() - 0.9523).abs() < 5e-5);
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let args = ["iterations-table", "--mesh-m", "10", "--q", "10", "--all"];
    let a = ck(&args).stdout;
    let b = ck(&args).stdout;
    let mut one = vec!["--threads", "1"];
    one.extend(args);
    let c = ck(&one).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
    assert_eq!(a, c);
    let solve = ["solve", "--mesh-m", "10", "--cold", "--threads", "3"];
    assert_eq!(ck(&solve).stdout, ck(&solve).stdout);
}

#[test]
fn written_mesh_reads_back_to_the_same_solution() {
    let dir = scratch("mesh");
    let (node, ele) = (dir.join("t.node"), dir.join("t.ele"));
    let (node_s, ele_s) = (node.to_str().unwrap(), ele.to_str().unwrap());
    assert_eq!(ck(&["mesh", "--mesh-m", "10", "--node", node_s, "--ele", ele_s]).status.code(), Some(0));
    let from_files = ck(&["solve", "--mesh-files", node_s, ele_s]);
    let generated = ck(&["solve", "--mesh-m", "10"]);
    assert_eq!(from_files.status.code(), Some(0));
    assert_eq!(stdout(&from_files), stdout(&generated));
    assert_eq!(ck(&["solve", "--mesh-files", "/nonexistent.node", ele_s]).status.code(), Some(1));
    std::fs::remove_dir_all(dir).ok();
}

#[test]
fn points_file_and_history() {
    let dir = scratch("points");
    let points = dir.join("points.csv");
    let o = ck(&["solve", "--mesh-m", "8", "--points", points.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&points).unwrap();
    assert!(text.starts_with("j,x,y,mu,tolerance,iterations,converged,norm_w"));
    assert_eq!(text.lines().count(), 1 + 21);

    let o = ck(&["history", "--mesh-m", "8", "--j", "10", "--inv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("n,residual,error,energy_error,bound"));
    for line in out.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[3] <= f[4] * (1.0 + 1e-9), "{line}");
    }
    std::fs::remove_dir_all(dir).ok();
}
