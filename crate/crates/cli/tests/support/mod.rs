//! Helpers shared by the CLI test targets.

#![allow(dead_code)]

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub fn sosg<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_sosg"))
        .args(args)
        .env_remove("SOSG_THREADS")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("process exited")
}

pub fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

/// The Fig. 1 slice as a two-source corpus: two compute log lines and two
/// database row changes about one VM and its address.
pub fn write_fig1_corpus(dir: &Path) {
    fs::create_dir_all(dir.join("log/ctl")).unwrap();
    fs::create_dir_all(dir.join("db/ctl")).unwrap();
    fs::write(
        dir.join("log/ctl/compute.log"),
        "2023-11-14T22:13:21Z INFO nova.scheduler scheduling instance xxx-xx1 on compute node\n\
         2023-11-14T22:13:23Z INFO nova.network instance xxx-xx1 acquired ip 10.1.0.12\n",
    )
    .unwrap();
    fs::write(
        dir.join("db/ctl/nova.dump"),
        "2023-11-14T22:13:22Z\tinstances\tINSERT\t{\"instance\":\"xxx-xx1\",\"state\":\"building\"}\n\
         2023-11-14T22:13:24Z\tinstances\tUPDATE\t{\"instance\":\"xxx-xx1\",\"ip\":\"10.1.0.12\",\"state\":\"active\"}\n",
    )
    .unwrap();
    fs::write(
        dir.join("sources.json"),
        r#"[
  {"glob": "db/*/*.dump", "source": "DB", "format": {"kind": "dbdump"}},
  {"glob": "log/*/*.log", "source": "Log", "format": {"kind": "syslog"}}
]
"#,
    )
    .unwrap();
}

pub fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}
