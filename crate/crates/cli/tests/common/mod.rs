#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn kbc() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kbc"));
    for var in ["KBC_CONFIG", "KBC_KB", "KBC_RULES", "KBC_PROVIDER_SOURCE", "KBC_PORT", "KBC_FREQUENCY_WEIGHTS", "KBC_IMPORTANCE_WEIGHTS", "KBC_ENSEMBLE_MODEL"] {
        cmd.env_remove(var);
    }
    cmd
}

pub fn run(args: &[&str]) -> Output {
    kbc().args(args).output().expect("kbc runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A `kbc serve` child process on an ephemeral port, killed on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(args: &[&str]) -> Server {
        let mut child = kbc()
            .args(args)
            .args(["serve", "--port", "0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn kbc serve");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected banner {line:?}")).to_string();
        Server { child, base }
    }

    pub fn get(&self, path_and_query: &str) -> (u16, String) {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        let mut resp = agent.get(&format!("{}{}", self.base, path_and_query)).call().expect("request");
        let status = resp.status().as_u16();
        (status, resp.body_mut().read_to_string().unwrap())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Drops `elapsed_ms` so two responses can be compared byte for byte.
pub fn without_timing(body: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(body).unwrap();
    v["stats"].as_object_mut().unwrap().remove("elapsed_ms");
    v
}

pub fn answers_json(body: &str) -> String {
    let v: serde_json::Value = serde_json::from_str(body).unwrap();
    serde_json::to_string(&v["answers"]).unwrap()
}
