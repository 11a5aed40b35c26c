use sgbot_service::config::{AppConfig, ConfigError};

fn no_env() -> Vec<(String, String)> {
    Vec::new()
}

#[test]
fn toml_and_json_files_agree() {
    let dir = tempfile::tempdir().unwrap();
    let toml = dir.path().join("c.toml");
    std::fs::write(
        &toml,
        "[planner]\nsigma = 0.02\n[icp]\nn = 3\n[server]\naddr = \"0.0.0.0:1\"\nsnapshot_dir = \"snaps\"\n",
    )
    .unwrap();
    let json = dir.path().join("c.json");
    std::fs::write(
        &json,
        r#"{"planner":{"sigma":0.02},"icp":{"n":3},"server":{"addr":"0.0.0.0:1","snapshot_dir":"snaps"}}"#,
    )
    .unwrap();
    let a = AppConfig::load(Some(&toml), no_env()).unwrap();
    let b = AppConfig::load(Some(&json), no_env()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.planner.sigma, 0.02);
    assert_eq!(a.icp.n, 3);
    assert_eq!(a.icp.max_iters, 50);
    assert_eq!(
        a.server.snapshot_dir.as_deref(),
        Some(std::path::Path::new("snaps"))
    );
}

#[test]
fn environment_beats_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[planner]\nsigma = 0.02\n").unwrap();
    let env = vec![("SGBOT_PLANNER_SIGMA".to_string(), "0.05".to_string())];
    assert_eq!(
        AppConfig::load(Some(&path), env).unwrap().planner.sigma,
        0.05
    );
}

#[test]
fn unknown_sections_and_extensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, "[planer]\nsigma = 0.02\n").unwrap();
    assert!(matches!(
        AppConfig::load(Some(&path), no_env()),
        Err(ConfigError::Parse { .. })
    ));
    let yaml = dir.path().join("c.yaml");
    std::fs::write(&yaml, "planner: {}\n").unwrap();
    assert!(matches!(
        AppConfig::load(Some(&yaml), no_env()),
        Err(ConfigError::Extension(_))
    ));
}
