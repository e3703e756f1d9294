use std::path::Path;
use std::process::{Command, Output};

fn pcrx(args: &[&str], dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pcrx"));
    cmd.args(args)
        .env_remove("PCRX_CONFIG_DIR")
        .env_remove("RAYON_NUM_THREADS");
    if let Some(d) = dir {
        cmd.env("PCRX_CONFIG_DIR", d);
    }
    cmd.output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL_SIM: &str = "[simulation]\ndt = 1e-3\nt_max = 2.0\nn_molecules = 3000\nseed = 4\n";

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn effective_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = stdout(&pcrx(&["config"], None));
    assert!(text.contains("[geometry]") && text.contains("D = 80.0"));
    let path = write_config(dir.path(), "echo.toml", &text);
    assert_eq!(stdout(&pcrx(&["config", "--config", &path], None)), text);
}

#[test]
fn taps_as_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "t.toml", "[region]\nalpha = 1.0\n[timing]\nL = 4\n");
    let csv = stdout(&pcrx(&["taps", "--config", &path], None));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "alpha_rad,alpha_deg,n,p_n,cumulative,tail_mass");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("1.000000000e0,"));
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&pcrx(&["taps", "--config", &path, "--format", "json"], None))).unwrap();
    assert_eq!(json["columns"][2], "n");
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn out_flag_writes_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("peak.csv");
    let out = pcrx(&["peak", "--out", target.to_str().unwrap()], None);
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    assert!(text.starts_with("gap_um,alpha_rad,t_peak_s,slope\n"));
    assert_eq!(text.lines().count(), 1 + 8 * 5);
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "s.toml", SMALL_SIM);
    let first = pcrx(&["simulate", "--config", &path], None);
    let text = stdout(&first);
    assert!(text.starts_with("molecule_id,hit_time_s,hit_angle_rad\n"));
    assert!(text.lines().count() > 100);
    for threads in ["1", "3"] {
        let again = pcrx(&["simulate", "--config", &path, "--threads", threads], None);
        assert_eq!(again.stdout, first.stdout, "{threads} threads");
    }
    let reseeded = pcrx(&["simulate", "--config", &path, "--seed", "5"], None);
    assert_ne!(reseeded.stdout, first.stdout);
}

#[test]
fn cdf_without_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "c.toml",
        "[region]\nalphas = [0.5, 3.14159]\n[timing]\ntimes = [0.1, 1.0]\n[simulation]\nenabled = false\n",
    );
    let text = stdout(&pcrx(&["cdf", "--config", &path], None));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "alpha_rad,time_s,f_analytic,f_empirical,n_molecules");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].ends_with(",,0"));
}

#[test]
fn cdf_with_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("[region]\nalpha = 1.0\n[timing]\ntimes = [0.5, 1.0, 2.0]\n{SMALL_SIM}");
    let path = write_config(dir.path(), "c.toml", &text);
    let a = stdout(&pcrx(&["cdf", "--config", &path], None));
    assert_eq!(a, stdout(&pcrx(&["cdf", "--config", &path, "--threads", "2"], None)));
    assert!(a.lines().nth(1).unwrap().ends_with(",3000"));
}

#[test]
fn ber_over_an_amount_grid() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "b.toml",
        "[region]\nalpha = 0.6\n[link]\nn_bits = 20000\nm_grid = [50, 200]\n",
    );
    let text = stdout(&pcrx(&["ber", "--config", &path], None));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "alpha_rad,alpha_deg,m,ber,ci_halfwidth,threshold_used,errors,bits"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].contains(",50,") && lines[2].contains(",200,"));
    assert!(lines[1].ends_with(",20000"));
}

#[test]
fn optimize_reports_boundary_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "o.toml",
        "[timing]\nt_s = 5.0\n[region]\nsid_step_deg = 1.0\n[link]\nsearch_minimum = false\n",
    );
    let text = stdout(&pcrx(&["optimize", "--config", &path], None));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "boundary");
    assert_eq!(row[1], "1.800000000e2");
    assert_eq!(row[4], "");
}

#[test]
fn config_directory_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "pcrx.toml",
        "[geometry]\ngaps = [5.0]\n[region]\nalpha = 3.141592653589793\n",
    );
    let text = stdout(&pcrx(&["peak"], Some(dir.path())));
    assert_eq!(text.lines().count(), 2);
    // relative names are resolved against the directory too
    write_config(
        dir.path(),
        "other.toml",
        "[geometry]\ngaps = [4.0, 6.0]\n[region]\nalpha = 1.0\n",
    );
    let text = stdout(&pcrx(&["peak", "--config", "other.toml"], Some(dir.path())));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn invalid_configs_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    for (text, field) in [
        ("[geometry]\nr0 = 3.0\n", "geometry.r0"),
        ("[geometry]\ncolour = 1\n", "colour"),
        ("[link]\nprior1 = 0.0\n", "link.prior1"),
        ("[region]\nalphas = []\n", "region.alphas"),
        ("not toml at all", "t.toml"),
    ] {
        let path = write_config(dir.path(), "t.toml", text);
        let out = pcrx(&["taps", "--config", &path], None);
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(field), "{text}");
    }
    assert_eq!(pcrx(&["nonsense"], None).status.code(), Some(2));
    assert_eq!(pcrx(&["taps", "--format", "xml"], None).status.code(), Some(2));
}

#[test]
fn io_failures_exit_with_code_four() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    assert_eq!(
        pcrx(&["taps", "--config", missing.to_str().unwrap()], None)
            .status
            .code(),
        Some(4)
    );
    let bad_out = dir.path().join("no/such/dir/out.csv");
    assert_eq!(
        pcrx(&["taps", "--out", bad_out.to_str().unwrap()], None).status.code(),
        Some(4)
    );
}
