//! Synthetic OpenStack/Ceph-like operations corpus with a known topology.
//!
//! A fleet of hosts runs VMs, each with one network port and a number of
//! Ceph-backed images whose blocks are replicated on other hosts. Every
//! source of the ingest layer is emitted: nova/neutron database dumps,
//! libvirt and OVS snapshots, Ceph image listings and on-disk object
//! listings, component logs and Ceph logs. Most VMs run for the whole
//! window; a cohort is deleted half-way. Faults are injected on chosen VMs
//! and recorded in the ground truth.
//!
//! Host-level filler records (node info, tunnel ports, base-image objects,
//! resource logs) bring each source group to its target share of bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::ingest::{FormatSpec, SourceEntry, SourceType};
use crate::time::{format_micros, parse_instant, Micros, MICROS_PER_SEC};
use crate::time::TimestampFormat;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid fleet spec: {0}")]
    Spec(String),
    #[error("unsatisfiable data mix: {0}")]
    Mix(String),
    #[error("fault injection failed: {0}")]
    Fault(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

const HOUR: Micros = 3600 * MICROS_PER_SEC;
const DAY: Micros = 24 * HOUR;
pub const CONTROLLER: &str = "ctl-01";

/// Snapshot periods in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Periods {
    pub libvirt_s: u64,
    pub ovs_s: u64,
    pub cephimage_s: u64,
    pub cephfile_s: u64,
    /// Per-VM compute log cadence.
    pub vm_log_s: u64,
}

impl Default for Periods {
    fn default() -> Self {
        Periods {
            libvirt_s: 60,
            ovs_s: 60,
            cephimage_s: 600,
            cephfile_s: 3600,
            vm_log_s: 60,
        }
    }
}

/// Target share of corpus bytes per source group. The remainder goes to the
/// database dumps and Ceph image listings, which are not padded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixTargets {
    pub ovs: f64,
    pub logs: f64,
    pub cephfile: f64,
    pub libvirt: f64,
}

impl Default for MixTargets {
    fn default() -> Self {
        MixTargets {
            ovs: 0.50,
            logs: 0.24,
            cephfile: 0.15,
            libvirt: 0.09,
        }
    }
}

/// Byte accounting groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixGroup {
    Ovs,
    Logs,
    Cephfile,
    Libvirt,
    Other,
}

impl MixGroup {
    pub const PADDED: [MixGroup; 4] = [MixGroup::Ovs, MixGroup::Logs, MixGroup::Cephfile, MixGroup::Libvirt];

    pub fn of(source: SourceType) -> MixGroup {
        match source {
            SourceType::Ovs => MixGroup::Ovs,
            SourceType::Log | SourceType::Cephlog => MixGroup::Logs,
            SourceType::Cephfile => MixGroup::Cephfile,
            SourceType::Libvirt => MixGroup::Libvirt,
            SourceType::Db | SourceType::Cephimage => MixGroup::Other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MixGroup::Ovs => "ovs",
            MixGroup::Logs => "logs",
            MixGroup::Cephfile => "cephfile",
            MixGroup::Libvirt => "libvirt",
            MixGroup::Other => "db+cephimage",
        }
    }
}

impl MixTargets {
    pub fn get(&self, g: MixGroup) -> f64 {
        match g {
            MixGroup::Ovs => self.ovs,
            MixGroup::Logs => self.logs,
            MixGroup::Cephfile => self.cephfile,
            MixGroup::Libvirt => self.libvirt,
            MixGroup::Other => 1.0 - self.sum(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.ovs + self.logs + self.cephfile + self.libvirt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaultKind {
    OrphanOvsPorts,
    DbPhysicalMismatch,
    FailedMigration,
}

/// Knobs of the three fault archetypes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultParams {
    pub db_actions: u32,
    pub db_failures: u32,
    pub db_deleted_days_ago: u32,
    pub migration_skip_lines: u32,
    pub migration_total_lines: u32,
    /// Position of the fault in the window, as a fraction of its length.
    pub at_fraction: f64,
}

impl Default for FaultParams {
    fn default() -> Self {
        FaultParams {
            db_actions: 1707,
            db_failures: 1704,
            db_deleted_days_ago: 90,
            migration_skip_lines: 653,
            migration_total_lines: 1653,
            at_fraction: 0.3,
        }
    }
}

/// A fault requested in the fleet spec; the target is picked from the
/// long-running VMs when not given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultRequest {
    pub kind: FaultKind,
    #[serde(default)]
    pub target_vm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub kind: FaultKind,
    pub target_vm: String,
    pub params: FaultParams,
    /// Fault time, RFC 3339.
    pub at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub destination_host: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FleetSpec {
    pub n_hosts: usize,
    pub n_vms: usize,
    pub n_subnets: usize,
    pub images_per_vm: usize,
    pub blocks_per_image: usize,
    pub replicas: usize,
    /// Simulated window length in hours.
    pub duration_hours: f64,
    /// Window start, RFC 3339.
    pub start: String,
    pub periods: Periods,
    /// Multiplies every snapshot period (time compression for small corpora).
    pub period_scale: f64,
    pub deleted_fraction: f64,
    pub deleted_at_fraction: f64,
    pub mix_targets: MixTargets,
    /// Largest allowed absolute gap between target and achieved shares.
    pub mix_tolerance: f64,
    pub faults: Vec<FaultRequest>,
    pub fault_params: FaultParams,
    pub allow_multiple_faults: bool,
}

impl Default for FleetSpec {
    fn default() -> Self {
        FleetSpec {
            n_hosts: 20,
            n_vms: 200,
            n_subnets: 10,
            images_per_vm: 2,
            blocks_per_image: 3,
            replicas: 2,
            duration_hours: 2.0,
            start: "2026-01-05T00:00:00Z".into(),
            periods: Periods::default(),
            period_scale: 1.0,
            deleted_fraction: 0.1,
            deleted_at_fraction: 0.5,
            mix_targets: MixTargets::default(),
            mix_tolerance: 0.02,
            faults: Vec::new(),
            fault_params: FaultParams::default(),
            allow_multiple_faults: false,
        }
    }
}

impl FleetSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: &str| Err(SynthError::Spec(m.to_string()));
        if self.n_hosts == 0 || self.n_vms == 0 || self.n_subnets == 0 {
            return err("n_hosts, n_vms and n_subnets must be at least 1");
        }
        if self.images_per_vm == 0 || self.blocks_per_image == 0 || self.replicas == 0 {
            return err("images_per_vm, blocks_per_image and replicas must be at least 1");
        }
        if !(self.duration_hours > 0.0) || !(self.period_scale > 0.0) {
            return err("duration_hours and period_scale must be positive");
        }
        let p = &self.periods;
        if [p.libvirt_s, p.ovs_s, p.cephimage_s, p.cephfile_s, p.vm_log_s].contains(&0) {
            return err("periods must be positive");
        }
        if !(0.0..=1.0).contains(&self.deleted_fraction) || !(0.0..1.0).contains(&self.deleted_at_fraction) {
            return err("deleted_fraction must be in [0, 1] and deleted_at_fraction in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.fault_params.at_fraction) {
            return err("fault_params.at_fraction must be in [0, 1)");
        }
        if self.fault_params.db_failures > self.fault_params.db_actions
            || self.fault_params.migration_skip_lines > self.fault_params.migration_total_lines
        {
            return err("fault counts must not exceed their totals");
        }
        let m = &self.mix_targets;
        if [m.ovs, m.logs, m.cephfile, m.libvirt].iter().any(|f| !(0.0..=1.0).contains(f)) {
            return err("mix targets must be in [0, 1]");
        }
        if m.sum() > 1.0 + 1e-9 {
            return err("mix targets sum to more than 1");
        }
        if !(self.mix_tolerance > 0.0) {
            return err("mix_tolerance must be positive");
        }
        if parse_instant(&self.start).is_none() {
            return err("start is not an RFC 3339 instant");
        }
        Ok(())
    }

    fn start_micros(&self) -> Micros {
        parse_instant(&self.start).unwrap_or_default()
    }

    fn end_micros(&self) -> Micros {
        self.start_micros() + (self.duration_hours * HOUR as f64) as Micros
    }

    fn period(&self, seconds: u64) -> Micros {
        ((seconds as f64 * self.period_scale * MICROS_PER_SEC as f64) as Micros).max(MICROS_PER_SEC)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    LongRunning,
    Deleted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockTruth {
    pub block: String,
    pub hosts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTruth {
    pub image: String,
    pub object_id: String,
    pub blocks: Vec<BlockTruth>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmTruth {
    pub uuid: String,
    pub display_name: String,
    pub domain: String,
    pub host: String,
    pub subnet: String,
    pub ip: String,
    pub mac: String,
    pub port: String,
    pub lifecycle: Lifecycle,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deleted_at: Option<String>,
    pub images: Vec<ImageTruth>,
}

/// A relation between two identifiers that some record mentions together.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub kind: String,
    pub a: (String, String),
    pub b: (String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub start: String,
    pub end: String,
    pub controller: String,
    pub hosts: Vec<String>,
    pub subnets: Vec<String>,
    pub vms: Vec<VmTruth>,
    pub relations: Vec<Relation>,
    pub injected: Vec<FaultInjection>,
    pub expected_anomalies: Vec<String>,
}

impl GroundTruth {
    pub fn vm(&self, uuid: &str) -> Option<&VmTruth> {
        self.vms.iter().find(|v| v.uuid == uuid)
    }

    /// VMs with a block replica on `host`.
    pub fn vms_with_blocks_on(&self, host: &str) -> BTreeSet<String> {
        self.vms
            .iter()
            .filter(|v| {
                v.images
                    .iter()
                    .flat_map(|i| &i.blocks)
                    .any(|b| b.hosts.iter().any(|h| h == host))
            })
            .map(|v| v.uuid.clone())
            .collect()
    }
}

/// One emitted line. `vm` attributes it to a fleet VM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub source: SourceType,
    pub host: String,
    pub file: &'static str,
    pub ts: Micros,
    pub vm: Option<usize>,
    pub seq: u64,
    pub text: String,
}

impl Emission {
    fn bytes(&self) -> u64 {
        self.text.len() as u64 + 1
    }

    /// Path relative to the corpus root.
    pub fn rel_path(&self) -> String {
        format!("{}/{}/{}", source_dir(self.source), self.host, self.file)
    }
}

fn source_dir(s: SourceType) -> &'static str {
    match s {
        SourceType::Db => "db",
        SourceType::Libvirt => "libvirt",
        SourceType::Ovs => "ovs",
        SourceType::Cephimage => "cephimage",
        SourceType::Cephfile => "cephfile",
        SourceType::Cephlog => "cephlog",
        SourceType::Log => "log",
    }
}

pub const CEPHFILE_HEADER: &str = "ts,host,path,object_id,block,size,mtime,mode,owner,checksum";

/// Source mapping for a generated corpus.
pub fn source_entries() -> Vec<SourceEntry> {
    let jsonl = || FormatSpec::Jsonl {
        timestamp_key: "ts".into(),
        timestamp_format: TimestampFormat::Iso8601,
    };
    let syslog = || FormatSpec::Syslog {
        timestamp_format: TimestampFormat::Iso8601,
    };
    let entry = |glob: &str, source, format| SourceEntry {
        glob: glob.into(),
        source,
        format,
        dedupe: None,
    };
    vec![
        entry(
            "db/*/*.dump",
            SourceType::Db,
            FormatSpec::DbDump {
                timestamp_format: TimestampFormat::Iso8601,
            },
        ),
        entry("libvirt/*/*.jsonl", SourceType::Libvirt, jsonl()),
        entry("ovs/*/*.jsonl", SourceType::Ovs, jsonl()),
        entry("cephimage/*/*.jsonl", SourceType::Cephimage, jsonl()),
        entry(
            "cephfile/*/*.csv",
            SourceType::Cephfile,
            FormatSpec::Csv {
                timestamp_column: "ts".into(),
                timestamp_format: TimestampFormat::Iso8601,
                delimiter: ',',
            },
        ),
        entry("cephlog/*/*.log", SourceType::Cephlog, syslog()),
        entry("log/*/*.log", SourceType::Log, syslog()),
    ]
}

/// Achieved byte shares of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixReport {
    pub total_bytes: u64,
    pub bytes: BTreeMap<String, u64>,
    pub fractions: BTreeMap<String, f64>,
}

/// A generated corpus held in memory.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub spec: FleetSpec,
    pub truth: GroundTruth,
    pub emissions: Vec<Emission>,
    pub filler: Vec<Emission>,
    next_seq: u64,
    faulted: BTreeMap<usize, usize>,
}

struct Vm {
    idx: usize,
    uuid: String,
    name: String,
    domain: String,
    host: usize,
    subnet: usize,
    ip: String,
    mac: String,
    port: String,
    created: Micros,
    /// Snapshots and logs stop here; shared by the deleted cohort.
    stop: Option<Micros>,
    deleted: Option<Micros>,
    images: Vec<Image>,
}

struct Image {
    image: String,
    object_id: String,
    blocks: Vec<(String, Vec<usize>)>,
}

fn hex(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut s = String::with_capacity(n);
    for _ in 0..n {
        s.push(char::from_digit(rng.gen_range(0..16), 16).unwrap_or('0'));
    }
    s
}

fn uuid4(rng: &mut ChaCha8Rng) -> String {
    let mut b = [0u8; 16];
    rng.fill_bytes(&mut b);
    b[6] = (b[6] & 0x0f) | 0x40;
    b[8] = (b[8] & 0x3f) | 0x80;
    let h: String = b.iter().map(|x| format!("{x:02x}")).collect();
    format!("{}-{}-{}-{}-{}", &h[0..8], &h[8..12], &h[12..16], &h[16..20], &h[20..32])
}

fn host_name(i: usize) -> String {
    format!("node-{:03}", i + 1)
}

fn subnet_cidr(s: usize) -> String {
    format!("10.{}.0.0/16", s + 1)
}

fn ts(t: Micros) -> String {
    format_micros(t)
}

/// Times `start + k * period` inside `[start, end)`.
fn ticks(start: Micros, end: Micros, period: Micros) -> impl Iterator<Item = (u64, Micros)> {
    (0u64..)
        .map(move |k| (k, start + k as Micros * period))
        .take_while(move |&(_, t)| t < end)
}

struct Topology {
    hosts: Vec<String>,
    vms: Vec<Vm>,
}

fn topology(spec: &FleetSpec, rng: &mut ChaCha8Rng) -> Topology {
    let start = spec.start_micros();
    let end = spec.end_micros();
    let hosts: Vec<String> = (0..spec.n_hosts).map(host_name).collect();
    let mut order: Vec<usize> = (0..spec.n_vms).collect();
    order.shuffle(rng);
    let n_deleted = (spec.deleted_fraction * spec.n_vms as f64).round() as usize;
    let deleted: BTreeSet<usize> = order.into_iter().take(n_deleted).collect();
    let t_del = start + ((end - start) as f64 * spec.deleted_at_fraction) as Micros;

    let mut vms = Vec::with_capacity(spec.n_vms);
    for i in 0..spec.n_vms {
        let uuid = uuid4(rng);
        let host = i % spec.n_hosts;
        let subnet = i % spec.n_subnets;
        let j = i / spec.n_subnets;
        let port = uuid4(rng);
        let mut images = Vec::with_capacity(spec.images_per_vm);
        for k in 0..spec.images_per_vm {
            let image = if k == 0 {
                format!("{uuid}_disk")
            } else {
                format!("{uuid}_disk.eph{}", k - 1)
            };
            let object_id = format!("rbd_data.{}", hex(rng, 12));
            let candidates: Vec<usize> = if spec.n_hosts > spec.replicas {
                (0..spec.n_hosts).filter(|&h| h != host).collect()
            } else {
                (0..spec.n_hosts).collect()
            };
            let blocks = (0..spec.blocks_per_image)
                .map(|b| {
                    let mut placed: Vec<usize> = candidates
                        .choose_multiple(rng, spec.replicas.min(candidates.len()))
                        .copied()
                        .collect();
                    placed.sort_unstable();
                    (format!("{object_id}.{b:016x}"), placed)
                })
                .collect();
            images.push(Image {
                image,
                object_id,
                blocks,
            });
        }
        vms.push(Vm {
            idx: i,
            name: format!("vm-{:04}", i + 1),
            domain: format!("instance-{:08x}", 0x1000 + i),
            host,
            subnet,
            ip: format!("10.{}.{}.{}", subnet + 1, j / 250, j % 250 + 2),
            mac: format!("fa:16:3e:{:02x}:{:02x}:{:02x}", (i >> 16) & 0xff, (i >> 8) & 0xff, i & 0xff),
            port,
            created: start - DAY + i as Micros * 10 * MICROS_PER_SEC,
            stop: deleted.contains(&i).then_some(t_del),
            deleted: deleted.contains(&i).then_some(t_del + (1 + i as Micros % 50) * MICROS_PER_SEC),
            uuid,
            images,
        });
    }
    Topology { hosts, vms }
}

/// Collects emissions for one source with sequence numbers.
struct Sink {
    source: SourceType,
    out: Vec<Emission>,
}

impl Sink {
    fn new(source: SourceType) -> Self {
        Sink {
            source,
            out: Vec::new(),
        }
    }

    fn push(&mut self, host: &str, file: &'static str, t: Micros, vm: Option<usize>, text: String) {
        self.out.push(Emission {
            source: self.source,
            host: host.to_string(),
            file,
            ts: t,
            vm,
            seq: 0,
            text,
        });
    }
}

fn db_line(t: Micros, table: &str, op: &str, body: Value) -> String {
    format!("{}\t{table}\t{op}\t{body}", ts(t))
}

fn log_line(t: Micros, severity: &str, component: &str, text: &str) -> String {
    format!("{} {severity} {component} {text}", ts(t))
}

const NOVA_DUMP: &str = "nova.dump";
const NEUTRON_DUMP: &str = "neutron.dump";
const COMPUTE_LOG: &str = "nova-compute.log";
const SCHEDULER_LOG: &str = "nova-scheduler.log";
const NEUTRON_LOG: &str = "neutron-server.log";
const OSD_LOG: &str = "ceph-osd.log";

const VM_LOG_TEMPLATES: [&str; 4] = [
    "[instance: {u}] During sync_power_state the instance has a pending task (None). Skip.",
    "[instance: {u}] Checking state",
    "[instance: {u}] VM Resumed (Lifecycle Event)",
    "[instance: {u}] Updating instance info cache for network interfaces",
];

fn gen_db(spec: &FleetSpec, topo: &Topology) -> Vec<Emission> {
    let mut s = Sink::new(SourceType::Db);
    for vm in &topo.vms {
        let host = &topo.hosts[vm.host];
        let i = Some(vm.idx);
        let c = vm.created;
        let base = (vm.idx as u64) * 100;
        s.push(
            CONTROLLER,
            NOVA_DUMP,
            c,
            i,
            db_line(
                c,
                "nova.instances",
                "INSERT",
                json!({"uuid": vm.uuid, "display_name": vm.name, "host": host, "vm_state": "building",
                       "task_state": "scheduling", "flavor": "m1.small", "vcpus": 2, "memory_mb": 4096,
                       "created_at": ts(c)}),
            ),
        );
        s.push(
            CONTROLLER,
            NOVA_DUMP,
            c + 5 * MICROS_PER_SEC,
            i,
            db_line(
                c + 5 * MICROS_PER_SEC,
                "nova.instance_actions",
                "INSERT",
                json!({"id": base, "uuid": vm.uuid, "action": "create", "start_time": ts(c)}),
            ),
        );
        for (k, img) in vm.images.iter().enumerate() {
            let t = c + (10 + k as Micros) * MICROS_PER_SEC;
            s.push(
                CONTROLLER,
                NOVA_DUMP,
                t,
                i,
                db_line(
                    t,
                    "nova.block_device_mapping",
                    "INSERT",
                    json!({"id": base + 1 + k as u64, "uuid": vm.uuid, "image": img.image,
                           "device_name": format!("/dev/vd{}", (b'a' + k as u8) as char), "boot_index": k}),
                ),
            );
        }
        let t = c + 20 * MICROS_PER_SEC;
        let port_row = json!({"id": base, "port": vm.port, "mac": vm.mac, "ip": vm.ip,
                              "subnet": subnet_cidr(vm.subnet), "device_owner": "compute:nova", "status": "DOWN"});
        s.push(CONTROLLER, NEUTRON_DUMP, t, i, db_line(t, "neutron.ports", "INSERT", port_row));
        let t = c + 25 * MICROS_PER_SEC;
        s.push(
            CONTROLLER,
            NEUTRON_DUMP,
            t,
            i,
            db_line(t, "neutron.ports", "UPDATE", json!({"id": base, "port": vm.port, "status": "ACTIVE"})),
        );
        let t = c + 30 * MICROS_PER_SEC;
        s.push(
            CONTROLLER,
            NOVA_DUMP,
            t,
            i,
            db_line(
                t,
                "nova.instances",
                "UPDATE",
                json!({"uuid": vm.uuid, "display_name": vm.name, "host": host, "vm_state": "active",
                       "task_state": "none", "launched_at": ts(t)}),
            ),
        );
        if let Some(d) = vm.deleted {
            s.push(
                CONTROLLER,
                NOVA_DUMP,
                d,
                i,
                db_line(
                    d,
                    "nova.instance_actions",
                    "INSERT",
                    json!({"id": base + 50, "uuid": vm.uuid, "action": "delete", "start_time": ts(d)}),
                ),
            );
            for (k, img) in vm.images.iter().enumerate() {
                let t = d + MICROS_PER_SEC;
                s.push(
                    CONTROLLER,
                    NOVA_DUMP,
                    t,
                    i,
                    db_line(
                        t,
                        "nova.block_device_mapping",
                        "UPDATE",
                        json!({"id": base + 1 + k as u64, "uuid": vm.uuid, "image": img.image, "deleted": 1}),
                    ),
                );
            }
            let t = d + 2 * MICROS_PER_SEC;
            s.push(
                CONTROLLER,
                NOVA_DUMP,
                t,
                i,
                db_line(
                    t,
                    "nova.instances",
                    "UPDATE",
                    json!({"uuid": vm.uuid, "display_name": vm.name, "host": host, "vm_state": "deleted",
                           "task_state": "none", "deleted_at": ts(t)}),
                ),
            );
            let t = d + 3 * MICROS_PER_SEC;
            s.push(
                CONTROLLER,
                NEUTRON_DUMP,
                t,
                i,
                db_line(t, "neutron.ports", "DELETE", json!({"id": base, "port": vm.port})),
            );
        }
    }
    let _ = spec;
    s.out
}

fn libvirt_row(t: Micros, host: &str, vm: &Vm, k: u64, rng: &mut ChaCha8Rng) -> String {
    let cpu = 1_000_000_000u64 * (k + 1) + rng.gen_range(0..1_000_000u64);
    json!({
        "ts": ts(t), "host": host, "uuid": vm.uuid, "domain": vm.domain, "state": "running",
        "vcpus": 2, "memory_kb": 4194304, "max_memory_kb": 4194304, "cpu_time_ns": cpu,
        "vcpu": {
            "0": {"state": 1, "time": cpu / 2 + rng.gen_range(0..1000u64), "wait": rng.gen_range(0..100000u64)},
            "1": {"state": 1, "time": cpu / 2 + rng.gen_range(0..1000u64), "wait": rng.gen_range(0..100000u64)}
        },
        "balloon": {"current": 4194304, "maximum": 4194304, "swap_in": 0, "swap_out": 0,
                    "major_fault": rng.gen_range(0..5000u64), "minor_fault": rng.gen_range(0..5_000_000u64),
                    "unused": rng.gen_range(0..4_000_000u64), "available": 4030000, "rss": rng.gen_range(1_000_000..4_000_000u64)},
        "stats": {
            "vda": {"rd_bytes": 4096 * (k + 1), "wr_bytes": rng.gen_range(0..1u64 << 32), "rd_req": k + 1,
                    "wr_req": rng.gen_range(0..100000u64), "rd_total_times": rng.gen_range(0..1u64 << 30),
                    "wr_total_times": rng.gen_range(0..1u64 << 30), "fl_req": k, "fl_total_times": rng.gen_range(0..1u64 << 20)},
            "vnet0": {"rx_bytes": rng.gen_range(0..1u64 << 32), "rx_pkts": rng.gen_range(0..1u64 << 24), "rx_errs": 0, "rx_drop": 0,
                      "tx_bytes": rng.gen_range(0..1u64 << 32), "tx_pkts": rng.gen_range(0..1u64 << 24), "tx_errs": 0, "tx_drop": 0}
        }
    })
    .to_string()
}

fn gen_libvirt(spec: &FleetSpec, topo: &Topology, seed: u64) -> Vec<Emission> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11b7);
    let mut s = Sink::new(SourceType::Libvirt);
    let (start, end) = (spec.start_micros(), spec.end_micros());
    for (k, t) in ticks(start, end, spec.period(spec.periods.libvirt_s)) {
        for vm in &topo.vms {
            if vm.stop.is_some_and(|d| t >= d) {
                continue;
            }
            let host = &topo.hosts[vm.host];
            let row = libvirt_row(t, host, vm, k, &mut rng);
            s.push(host, "domains.jsonl", t, Some(vm.idx), row);
        }
    }
    s.out
}

/// Per-size packet counters as reported by the OVS interface table.
fn size_histogram(prefix: &str, packets: u64) -> serde_json::Map<String, Value> {
    const BUCKETS: [(&str, u64); 7] = [
        ("1_to_64", 30),
        ("65_to_127", 20),
        ("128_to_255", 10),
        ("256_to_511", 8),
        ("512_to_1023", 7),
        ("1024_to_1522", 20),
        ("1523_to_max", 5),
    ];
    BUCKETS
        .iter()
        .map(|(b, pct)| (format!("{prefix}_{b}_packets"), json!(packets * pct / 100)))
        .collect()
}

fn interface_statistics(rx: u64, tx: u64) -> Value {
    let mut stats = serde_json::Map::new();
    for (key, v) in [
        ("rx_bytes", rx),
        ("rx_packets", rx / 1500),
        ("rx_dropped", 0),
        ("rx_errors", 0),
        ("rx_crc_err", 0),
        ("rx_frame_err", 0),
        ("rx_over_err", 0),
        ("rx_multicast_packets", rx / 150_000),
        ("rx_broadcast_packets", rx / 300_000),
        ("tx_bytes", tx),
        ("tx_packets", tx / 1500),
        ("tx_dropped", 0),
        ("tx_errors", 0),
        ("tx_multicast_packets", tx / 200_000),
        ("tx_broadcast_packets", tx / 400_000),
        ("collisions", 0),
    ] {
        stats.insert(key.into(), json!(v));
    }
    stats.extend(size_histogram("rx", rx / 1500));
    stats.extend(size_histogram("tx", tx / 1500));
    Value::Object(stats)
}

fn ovs_row(t: Micros, host: &str, vm: &Vm, k: u64, rng: &mut ChaCha8Rng) -> String {
    let rx = 1500 * (k + 1) * 1000 + rng.gen_range(0..1000u64);
    let tx = 1500 * (k + 1) * 800 + rng.gen_range(0..1000u64);
    json!({
        "ts": ts(t), "host": host, "uuid": vm.uuid, "port": vm.port, "iface": format!("tap{}", &vm.port[..11]),
        "mac": vm.mac, "ip": vm.ip, "bridge": "br-int", "ofport": 10 + vm.idx % 200, "mtu": 1450,
        "admin_state": "up", "link_state": "up", "link_speed": 10_000_000_000u64, "duplex": "full",
        "ifindex": 20 + vm.idx % 200, "cfm_fault": false, "lacp_current": false, "link_resets": 1,
        "statistics": interface_statistics(rx, tx),
        "status": {"driver_name": "tun", "driver_version": "1.6", "firmware_version": ""},
        "other_config": {"stats-update-interval": "5000"},
        "ingress_policing_rate": 0, "ingress_policing_burst": 0
    })
    .to_string()
}

fn gen_ovs(spec: &FleetSpec, topo: &Topology, seed: u64) -> Vec<Emission> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0f5);
    let mut s = Sink::new(SourceType::Ovs);
    let (start, end) = (spec.start_micros(), spec.end_micros());
    for (k, t) in ticks(start, end, spec.period(spec.periods.ovs_s)) {
        for vm in &topo.vms {
            if vm.stop.is_some_and(|d| t >= d) {
                continue;
            }
            let host = &topo.hosts[vm.host];
            let row = ovs_row(t, host, vm, k, &mut rng);
            s.push(host, "interfaces.jsonl", t, Some(vm.idx), row);
        }
    }
    s.out
}

fn gen_cephimage(spec: &FleetSpec, topo: &Topology, seed: u64) -> Vec<Emission> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xce91);
    let mut s = Sink::new(SourceType::Cephimage);
    let (start, end) = (spec.start_micros(), spec.end_micros());
    for (_, t) in ticks(start, end, spec.period(spec.periods.cephimage_s)) {
        for vm in &topo.vms {
            if vm.stop.is_some_and(|d| t >= d) {
                continue;
            }
            for img in &vm.images {
                let row = json!({
                    "ts": ts(t), "pool": "vms", "image": img.image, "object_id": img.object_id,
                    "size": 21474836480u64, "objects": 5120, "order": 22, "format": 2,
                    "used_bytes": rng.gen_range(1u64 << 30..1u64 << 34)
                });
                s.push(CONTROLLER, "rbd_ls.jsonl", t, Some(vm.idx), row.to_string());
            }
        }
    }
    s.out
}

fn cephfile_row(t: Micros, host: usize, hosts: &[String], object_id: &str, block: &str, rng: &mut ChaCha8Rng) -> String {
    let osd = host * 4 + rng.gen_range(0..4);
    let path = format!(
        "/var/lib/ceph/osd/ceph-{osd}/current/2.{:x}_head/{block}__head_{:08X}__2",
        rng.gen_range(0..256),
        rng.gen::<u32>()
    );
    format!(
        "{},{},{},{},{},{},{},-rw-r--r--,ceph,{}",
        ts(t),
        hosts[host],
        path,
        object_id,
        block,
        4194304,
        ts(t - rng.gen_range(0..HOUR)),
        hex(rng, 32)
    )
}

fn gen_cephfile(spec: &FleetSpec, topo: &Topology, seed: u64) -> Vec<Emission> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xcef1);
    let mut s = Sink::new(SourceType::Cephfile);
    let (start, end) = (spec.start_micros(), spec.end_micros());
    for (_, t) in ticks(start, end, spec.period(spec.periods.cephfile_s)) {
        for vm in &topo.vms {
            if vm.stop.is_some_and(|d| t >= d) {
                continue;
            }
            for img in &vm.images {
                for (block, placed) in &img.blocks {
                    for &h in placed {
                        let row = cephfile_row(t, h, &topo.hosts, &img.object_id, block, &mut rng);
                        s.push(&topo.hosts[h], "objects.csv", t, Some(vm.idx), row);
                    }
                }
            }
        }
    }
    s.out
}

fn gen_logs(spec: &FleetSpec, topo: &Topology) -> Vec<Emission> {
    let mut s = Sink::new(SourceType::Log);
    let (start, end) = (spec.start_micros(), spec.end_micros());
    for vm in &topo.vms {
        let host = &topo.hosts[vm.host];
        let i = Some(vm.idx);
        let t = vm.created + MICROS_PER_SEC;
        s.push(
            CONTROLLER,
            SCHEDULER_LOG,
            t,
            i,
            log_line(t, "INFO", "nova.scheduler.filter_scheduler", &format!("Selected host {host} for instance {}", vm.uuid)),
        );
        let t = vm.created + 40 * MICROS_PER_SEC;
        s.push(
            host,
            COMPUTE_LOG,
            t,
            i,
            log_line(t, "INFO", "nova.compute.manager", &format!("[instance: {}] Instance spawned successfully.", vm.uuid)),
        );
        let period = spec.period(spec.periods.vm_log_s);
        let offset = (vm.idx as Micros * 7919 * 1000) % period;
        let lines = ticks(start, vm.stop.unwrap_or(end), period).count();
        for (k, t) in ticks(start + offset, Micros::MAX, period).take(lines) {
            let text = VM_LOG_TEMPLATES[k as usize % VM_LOG_TEMPLATES.len()].replace("{u}", &vm.uuid);
            s.push(host, COMPUTE_LOG, t, i, log_line(t, "INFO", "nova.compute.manager", &text));
        }
        if let Some(d) = vm.deleted {
            s.push(
                host,
                COMPUTE_LOG,
                d,
                i,
                log_line(d, "INFO", "nova.compute.manager", &format!("[instance: {}] Terminating instance", vm.uuid)),
            );
            let t = d + 3 * MICROS_PER_SEC;
            s.push(
                CONTROLLER,
                NEUTRON_LOG,
                t,
                i,
                log_line(t, "INFO", "neutron.plugins.ml2.plugin", &format!("Port {} removed for device {}", vm.port, vm.uuid)),
            );
        }
    }
    s.out
}

impl Corpus {
    fn seq(&mut self) -> u64 {
        self.next_seq += 1;
        self.next_seq
    }

    fn push(&mut self, source: SourceType, host: &str, file: &'static str, t: Micros, vm: usize, text: String) {
        let seq = self.seq();
        self.emissions.push(Emission {
            source,
            host: host.to_string(),
            file,
            ts: t,
            vm: Some(vm),
            seq,
            text,
        });
    }

    fn vm_index(&self, uuid: &str) -> Option<usize> {
        self.truth.vms.iter().position(|v| v.uuid == uuid)
    }

    /// Applies one fault to the in-memory corpus. Filler is not recomputed,
    /// so the byte mix may drift; [`generate`] injects spec faults before
    /// calibrating.
    pub fn inject(&mut self, kind: FaultKind, target_vm: &str, seed: u64) -> Result<FaultInjection, SynthError> {
        let i = self
            .vm_index(target_vm)
            .ok_or_else(|| SynthError::Fault(format!("no VM {target_vm} in the fleet")))?;
        if self.truth.vms[i].lifecycle != Lifecycle::LongRunning {
            return Err(SynthError::Fault(format!("VM {target_vm} is not long-running")));
        }
        if self.faulted.contains_key(&i) && !self.spec.allow_multiple_faults {
            return Err(SynthError::Fault(format!("VM {target_vm} already has a fault")));
        }
        let params = self.spec.fault_params.clone();
        let (start, end) = (self.spec.start_micros(), self.spec.end_micros());
        let at = start + ((end - start) as f64 * params.at_fraction) as Micros;
        let vm = self.truth.vms[i].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut destination = None;
        let fault_at;

        match kind {
            FaultKind::OrphanOvsPorts => {
                // Deleted like the normal cohort, but the port survives.
                fault_at = at;
                self.emissions.retain(|e| {
                    e.vm != Some(i)
                        || e.ts < at
                        || !matches!(e.source, SourceType::Libvirt | SourceType::Cephimage | SourceType::Cephfile)
                });
                let base = i as u64 * 100;
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    at,
                    i,
                    db_line(at, "nova.instance_actions", "INSERT", json!({"id": base + 50, "uuid": vm.uuid, "action": "delete", "start_time": ts(at)})),
                );
                for (k, img) in vm.images.iter().enumerate() {
                    let t = at + MICROS_PER_SEC;
                    self.push(
                        SourceType::Db,
                        CONTROLLER,
                        NOVA_DUMP,
                        t,
                        i,
                        db_line(t, "nova.block_device_mapping", "UPDATE", json!({"id": base + 1 + k as u64, "uuid": vm.uuid, "image": img.image, "deleted": 1})),
                    );
                }
                let t = at + 2 * MICROS_PER_SEC;
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    t,
                    i,
                    db_line(t, "nova.instances", "UPDATE", json!({"uuid": vm.uuid, "display_name": vm.display_name, "host": vm.host,
                        "vm_state": "deleted", "task_state": "none", "deleted_at": ts(t)})),
                );
                self.push(
                    SourceType::Log,
                    &vm.host,
                    COMPUTE_LOG,
                    at,
                    i,
                    log_line(at, "INFO", "nova.compute.manager", &format!("[instance: {}] Terminating instance", vm.uuid)),
                );
                self.emissions
                    .retain(|e| !(e.vm == Some(i) && e.source == SourceType::Log && e.file == COMPUTE_LOG && e.ts > at && e.text.contains("INFO nova.compute.manager [instance")));
                self.truth.vms[i].deleted_at = Some(ts(t));
            }
            FaultKind::DbPhysicalMismatch => {
                let deleted = start - params.db_deleted_days_ago as Micros * DAY;
                fault_at = deleted;
                let created = deleted - 7 * DAY;
                // Rewrite the nova history; neutron rows and physical state stay.
                self.emissions.retain(|e| {
                    !(e.vm == Some(i)
                        && e.source == SourceType::Db
                        && (e.text.contains("\tnova.instances\t") || e.text.contains("\tnova.instance_actions\t")))
                });
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    created,
                    i,
                    db_line(created, "nova.instances", "INSERT", json!({"uuid": vm.uuid, "display_name": vm.display_name, "host": vm.host,
                        "vm_state": "building", "task_state": "scheduling", "flavor": "m1.small", "vcpus": 2, "memory_mb": 4096, "created_at": ts(created)})),
                );
                let span = (deleted - created - HOUR).max(1);
                let n = params.db_actions.max(1) as Micros;
                let verbs = ["reboot", "start", "stop", "resize"];
                for a in 0..params.db_actions {
                    let t = created + HOUR / 2 + span * a as Micros / n;
                    let action = if a == 0 { "create" } else { verbs[a as usize % verbs.len()] };
                    let id = 1_000_000 + i as u64 * 10_000 + a as u64;
                    self.push(
                        SourceType::Db,
                        CONTROLLER,
                        NOVA_DUMP,
                        t,
                        i,
                        db_line(t, "nova.instance_actions", "INSERT", json!({"id": id, "uuid": vm.uuid, "action": action, "start_time": ts(t)})),
                    );
                    if a >= params.db_actions - params.db_failures {
                        let t = t + MICROS_PER_SEC;
                        self.push(
                            SourceType::Db,
                            CONTROLLER,
                            NOVA_DUMP,
                            t,
                            i,
                            db_line(t, "nova.instance_faults", "INSERT", json!({"id": id, "uuid": vm.uuid, "code": 500,
                                "message": "No valid host was found. There are not enough hosts available."})),
                        );
                    }
                }
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    deleted,
                    i,
                    db_line(deleted, "nova.instances", "UPDATE", json!({"uuid": vm.uuid, "display_name": vm.display_name, "host": vm.host,
                        "vm_state": "deleted", "task_state": "none", "deleted_at": ts(deleted)})),
                );
            }
            FaultKind::FailedMigration => {
                fault_at = at;
                let others: Vec<&String> = self.truth.hosts.iter().filter(|h| **h != vm.host).collect();
                let dst = others
                    .choose(&mut rng)
                    .map(|h| h.to_string())
                    .unwrap_or_else(|| vm.host.clone());
                self.emissions
                    .retain(|e| !(e.vm == Some(i) && e.source == SourceType::Libvirt && e.ts >= at));
                let base = i as u64 * 100;
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    at,
                    i,
                    db_line(at, "nova.instance_actions", "INSERT", json!({"id": base + 60, "uuid": vm.uuid, "action": "migrate", "start_time": ts(at)})),
                );
                let t = at + MICROS_PER_SEC;
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    t,
                    i,
                    db_line(t, "nova.instances", "UPDATE", json!({"uuid": vm.uuid, "display_name": vm.display_name, "host": vm.host,
                        "vm_state": "active", "task_state": "resize_migrating"})),
                );
                let t = at + 20 * MICROS_PER_SEC;
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    t,
                    i,
                    db_line(t, "nova.instance_faults", "INSERT", json!({"id": base + 60, "uuid": vm.uuid, "host": vm.host, "code": 500,
                        "message": format!("cannot remove config /etc/libvirt/qemu/{}.xml: Read-only file system", vm.domain)})),
                );
                let t = at + 21 * MICROS_PER_SEC;
                self.push(
                    SourceType::Db,
                    CONTROLLER,
                    NOVA_DUMP,
                    t,
                    i,
                    db_line(t, "nova.instance_faults", "INSERT", json!({"id": base + 61, "uuid": vm.uuid, "host": dst, "code": 500,
                        "message": "error removing image"})),
                );
                let existing = self
                    .emissions
                    .iter()
                    .filter(|e| e.vm == Some(i) && e.source == SourceType::Log)
                    .count() as u32;
                let others_needed = params.migration_total_lines - params.migration_skip_lines;
                if existing > others_needed {
                    return Err(SynthError::Fault(format!(
                        "VM {target_vm} already has {existing} log lines, more than the {others_needed} non-skip lines allowed"
                    )));
                }
                let t0 = at + 30 * MICROS_PER_SEC;
                let span = (end - t0).max(1);
                let n = params.migration_skip_lines.max(1) as Micros;
                for k in 0..params.migration_skip_lines {
                    let t = t0 + span * k as Micros / n;
                    self.push(
                        SourceType::Log,
                        &vm.host,
                        COMPUTE_LOG,
                        t,
                        i,
                        log_line(t, "INFO", "nova.compute.manager", &format!("[instance: {}] Instance not resizing, skipping migration.", vm.uuid)),
                    );
                }
                let extra = others_needed - existing;
                let n = extra.max(1) as Micros;
                for k in 0..extra {
                    let t = at + span * k as Micros / n;
                    self.push(
                        SourceType::Log,
                        &vm.host,
                        COMPUTE_LOG,
                        t,
                        i,
                        log_line(t, "WARNING", "nova.compute.manager", &format!(
                            "[instance: {}] During sync_power_state the instance has a pending task (resize_migrating). Skip.",
                            vm.uuid
                        )),
                    );
                }
                destination = Some(dst);
            }
        }

        let injection = FaultInjection {
            kind,
            target_vm: target_vm.to_string(),
            params,
            at: ts(fault_at),
            destination_host: destination,
        };
        *self.faulted.entry(i).or_default() += 1;
        self.truth.injected.push(injection.clone());
        let mut expected: BTreeSet<String> = self.truth.expected_anomalies.iter().cloned().collect();
        expected.insert(target_vm.to_string());
        self.truth.expected_anomalies = expected.into_iter().collect();
        Ok(injection)
    }

    fn group_bytes(&self) -> BTreeMap<MixGroup, u64> {
        let mut out: BTreeMap<MixGroup, u64> = BTreeMap::new();
        for e in self.emissions.iter().chain(&self.filler) {
            *out.entry(MixGroup::of(e.source)).or_default() += e.bytes();
        }
        out
    }

    /// Pads each group with host-level records until its byte share meets
    /// the targets within `mix_tolerance`.
    fn calibrate(&mut self, seed: u64) -> Result<(), SynthError> {
        self.filler.clear();
        let targets = self.spec.mix_targets.clone();
        let base = self.group_bytes();
        let b = |g| *base.get(&g).unwrap_or(&0) as f64;
        let mut total: f64 = 0.0;
        for g in MixGroup::PADDED {
            let f = targets.get(g);
            if f == 0.0 {
                if b(g) > 0.0 {
                    return Err(SynthError::Mix(format!(
                        "target for {} is 0 but the fleet's own records need {} bytes",
                        g.name(),
                        b(g)
                    )));
                }
                continue;
            }
            total = total.max(b(g) / f);
        }
        // Unpadded groups shrink the padded shares; bound the gap.
        let sum = targets.sum();
        let f_max = MixGroup::PADDED.iter().map(|&g| targets.get(g)).fold(0.0, f64::max);
        // Aim inside the band so byte rounding and headers stay within it.
        let tol = self.spec.mix_tolerance * 0.8;
        let other = b(MixGroup::Other);
        if f_max > tol && other > 0.0 {
            let denom = tol * sum + f_max * (1.0 - sum);
            total = total.max(other * (f_max - tol) / denom);
        }
        if total <= 0.0 {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf111);
        let mut filler = Vec::new();
        for g in MixGroup::PADDED {
            let need = (targets.get(g) * total - b(g)).max(0.0) as u64;
            filler.extend(self.pad(g, need, &mut rng));
        }
        for e in &mut filler {
            self.next_seq += 1;
            e.seq = self.next_seq;
        }
        self.filler = filler;
        Ok(())
    }

    fn pad(&self, group: MixGroup, need: u64, rng: &mut ChaCha8Rng) -> Vec<Emission> {
        let hosts = &self.truth.hosts;
        let (start, end) = (self.spec.start_micros(), self.spec.end_micros());
        let approx = match group {
            MixGroup::Ovs => 1300,
            MixGroup::Libvirt => 400,
            MixGroup::Cephfile => 300,
            _ => 100,
        };
        let expected = (need / approx).max(1) as Micros;
        let step = ((end - start) / expected).max(1);
        let mut out = Vec::new();
        let mut got = 0u64;
        let mut k: u64 = 0;
        while got < need {
            let h = (k as usize) % hosts.len();
            let host = &hosts[h];
            let t = start + (k as Micros * step) % (end - start).max(1);
            let (source, file, text) = match group {
                MixGroup::Ovs => (
                    SourceType::Ovs,
                    "interfaces.jsonl",
                    json!({
                        "ts": ts(t), "host": host, "iface": format!("vxlan-{:02x}", h), "type": "vxlan",
                        "bridge": "br-tun", "local_ip": format!("10.255.{}.{}", h / 250, h % 250 + 1),
                        "ofport": 2, "mtu": 1500, "admin_state": "up", "link_state": "up",
                        "statistics": interface_statistics(k * 9000 + rng.gen_range(0..9000u64), k * 8000 + rng.gen_range(0..8000u64)),
                        "link_resets": 0, "cfm_fault": false,
                        "options": {"df_default": "true", "in_key": "flow", "out_key": "flow", "dst_port": "4789"}
                    })
                    .to_string(),
                ),
                MixGroup::Libvirt => (
                    SourceType::Libvirt,
                    "node.jsonl",
                    json!({
                        "ts": ts(t), "host": host, "hypervisor": "QEMU", "libvirt_version": 8000000,
                        "node": {"cpus": 48, "mhz": 2400, "memory_kb": 263_882_752u64,
                                 "free_memory_kb": rng.gen_range(10_000_000u64..200_000_000), "sockets": 2,
                                 "cores": 12, "threads": 2, "cpu_model": "x86_64"},
                        "sample": k
                    })
                    .to_string(),
                ),
                MixGroup::Cephfile => {
                    let base_obj = format!("rbd_data.{:012x}", 0xba5e_0000_0000u64 + h as u64);
                    let block = format!("{base_obj}.{:016x}", k % 32);
                    (SourceType::Cephfile, "objects.csv", cephfile_row(t, h, hosts, &base_obj, &block, rng))
                }
                _ => {
                    if k % 2 == 0 {
                        let text = format!("Auditing locally available compute resources for {host} (free_ram={}MB)", rng.gen_range(8192..200_000));
                        (SourceType::Log, COMPUTE_LOG, log_line(t, "INFO", "nova.compute.resource_tracker", &text))
                    } else {
                        let osd = h * 4 + (k as usize % 4);
                        let text = format!("osd.{osd} heartbeat ok pgs={}", rng.gen_range(100..400));
                        (SourceType::Cephlog, OSD_LOG, log_line(t, "INFO", "ceph-osd", &text))
                    }
                }
            };
            let e = Emission {
                source,
                host: host.clone(),
                file,
                ts: t,
                vm: None,
                seq: 0,
                text,
            };
            got += e.bytes();
            out.push(e);
            k += 1;
        }
        out
    }

    /// Corpus files, relative path to content. Lines are ordered by
    /// timestamp within each file.
    pub fn files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut by_file: BTreeMap<String, Vec<&Emission>> = BTreeMap::new();
        for e in self.emissions.iter().chain(&self.filler) {
            by_file.entry(e.rel_path()).or_default().push(e);
        }
        by_file
            .into_par_iter()
            .map(|(path, mut lines)| {
                lines.sort_by_key(|e| (e.ts, e.seq));
                let mut buf = Vec::with_capacity(lines.iter().map(|e| e.text.len() + 1).sum::<usize>() + 64);
                if lines.first().is_some_and(|e| e.source == SourceType::Cephfile) {
                    buf.extend_from_slice(CEPHFILE_HEADER.as_bytes());
                    buf.push(b'\n');
                }
                for e in lines {
                    buf.extend_from_slice(e.text.as_bytes());
                    buf.push(b'\n');
                }
                (path, buf)
            })
            .collect()
    }

    /// Byte shares per group over the emitted files.
    pub fn mix(&self) -> MixReport {
        let mut bytes: BTreeMap<String, u64> = BTreeMap::new();
        for (path, content) in self.files() {
            let dir = path.split('/').next().unwrap_or_default();
            let source = SourceType::ALL
                .into_iter()
                .find(|s| source_dir(*s) == dir)
                .unwrap_or(SourceType::Db);
            *bytes.entry(MixGroup::of(source).name().to_string()).or_default() += content.len() as u64;
        }
        let total: u64 = bytes.values().sum();
        let fractions = bytes
            .iter()
            .map(|(k, &v)| (k.clone(), if total == 0 { 0.0 } else { v as f64 / total as f64 }))
            .collect();
        MixReport {
            total_bytes: total,
            bytes,
            fractions,
        }
    }

    /// Writes the corpus files, `sources.json` and `ground_truth.json`.
    pub fn write_to(&self, dir: &Path) -> Result<(), SynthError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| SynthError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        for (rel, content) in self.files() {
            let path = dir.join(&rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(io(parent))?;
            }
            fs::write(&path, content).map_err(io(&path))?;
        }
        let sources = dir.join("sources.json");
        let body = serde_json::to_string_pretty(&source_entries()).unwrap_or_default() + "\n";
        fs::write(&sources, body).map_err(io(&sources))?;
        let gt = dir.join("ground_truth.json");
        let body = serde_json::to_string_pretty(&self.truth).unwrap_or_default() + "\n";
        fs::write(&gt, body).map_err(io(&gt))?;
        Ok(())
    }
}

/// Generates a corpus: topology, every source's records, the spec's faults,
/// then mix calibration. Deterministic per `(spec, seed)`.
pub fn generate(spec: &FleetSpec, seed: u64) -> Result<Corpus, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topo = topology(spec, &mut rng);

    let sources = [
        SourceType::Db,
        SourceType::Libvirt,
        SourceType::Ovs,
        SourceType::Cephimage,
        SourceType::Cephfile,
        SourceType::Log,
    ];
    let parts: Vec<Vec<Emission>> = sources
        .par_iter()
        .map(|s| match s {
            SourceType::Db => gen_db(spec, &topo),
            SourceType::Libvirt => gen_libvirt(spec, &topo, seed),
            SourceType::Ovs => gen_ovs(spec, &topo, seed),
            SourceType::Cephimage => gen_cephimage(spec, &topo, seed),
            SourceType::Cephfile => gen_cephfile(spec, &topo, seed),
            _ => gen_logs(spec, &topo),
        })
        .collect();
    let mut emissions: Vec<Emission> = parts.into_iter().flatten().collect();
    for (k, e) in emissions.iter_mut().enumerate() {
        e.seq = k as u64;
    }

    let truth = ground_truth(spec, seed, &topo);
    let mut corpus = Corpus {
        spec: spec.clone(),
        truth,
        next_seq: emissions.len() as u64,
        emissions,
        filler: Vec::new(),
        faulted: BTreeMap::new(),
    };

    let mut frng = ChaCha8Rng::seed_from_u64(seed ^ 0xfa17);
    for req in &spec.faults {
        let target = match &req.target_vm {
            Some(t) => t.clone(),
            None => {
                let free: Vec<&VmTruth> = corpus
                    .truth
                    .vms
                    .iter()
                    .enumerate()
                    .filter(|(i, v)| v.lifecycle == Lifecycle::LongRunning && !corpus.faulted.contains_key(i))
                    .map(|(_, v)| v)
                    .collect();
                free.choose(&mut frng)
                    .map(|v| v.uuid.clone())
                    .ok_or_else(|| SynthError::Fault("no long-running VM left to target".into()))?
            }
        };
        corpus.inject(req.kind, &target, seed)?;
    }
    corpus.calibrate(seed)?;
    Ok(corpus)
}

fn ground_truth(spec: &FleetSpec, seed: u64, topo: &Topology) -> GroundTruth {
    let mut relations = BTreeSet::new();
    let rel = |kind: &str, a: (&str, &str), b: (&str, &str)| Relation {
        kind: kind.into(),
        a: (a.0.into(), a.1.into()),
        b: (b.0.into(), b.1.into()),
    };
    let vms: Vec<VmTruth> = topo
        .vms
        .iter()
        .map(|vm| {
            let host = &topo.hosts[vm.host];
            let subnet = subnet_cidr(vm.subnet);
            relations.insert(rel("vm-host", ("uuid", &vm.uuid), ("host", host)));
            relations.insert(rel("vm-port", ("uuid", &vm.uuid), ("port", &vm.port)));
            relations.insert(rel("port-subnet", ("port", &vm.port), ("subnet", &subnet)));
            let images = vm
                .images
                .iter()
                .map(|img| {
                    relations.insert(rel("vm-image", ("uuid", &vm.uuid), ("image", &img.image)));
                    relations.insert(rel("image-object", ("image", &img.image), ("object_id", &img.object_id)));
                    ImageTruth {
                        image: img.image.clone(),
                        object_id: img.object_id.clone(),
                        blocks: img
                            .blocks
                            .iter()
                            .map(|(b, hs)| {
                                relations.insert(rel("object-block", ("object_id", &img.object_id), ("block", b)));
                                for &h in hs {
                                    relations.insert(rel("block-host", ("block", b), ("host", &topo.hosts[h])));
                                }
                                BlockTruth {
                                    block: b.clone(),
                                    hosts: hs.iter().map(|&h| topo.hosts[h].clone()).collect(),
                                }
                            })
                            .collect(),
                    }
                })
                .collect();
            VmTruth {
                uuid: vm.uuid.clone(),
                display_name: vm.name.clone(),
                domain: vm.domain.clone(),
                host: host.clone(),
                subnet,
                ip: vm.ip.clone(),
                mac: vm.mac.clone(),
                port: vm.port.clone(),
                lifecycle: if vm.deleted.is_some() {
                    Lifecycle::Deleted
                } else {
                    Lifecycle::LongRunning
                },
                deleted_at: vm.deleted.map(|d| ts(d + 2 * MICROS_PER_SEC)),
                images,
            }
        })
        .collect();
    GroundTruth {
        seed,
        start: ts(spec.start_micros()),
        end: ts(spec.end_micros()),
        controller: CONTROLLER.into(),
        hosts: topo.hosts.clone(),
        subnets: (0..spec.n_subnets).map(subnet_cidr).collect(),
        vms,
        relations: relations.into_iter().collect(),
        injected: Vec::new(),
        expected_anomalies: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> FleetSpec {
        FleetSpec {
            n_hosts: 4,
            n_vms: 12,
            n_subnets: 3,
            duration_hours: 1.0,
            period_scale: 10.0,
            ..FleetSpec::default()
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in [
            FleetSpec { n_vms: 0, ..small() },
            FleetSpec { duration_hours: 0.0, ..small() },
            FleetSpec {
                mix_targets: MixTargets {
                    ovs: 0.9,
                    logs: 0.2,
                    ..MixTargets::default()
                },
                ..small()
            },
        ] {
            assert!(matches!(generate(&bad, 1), Err(SynthError::Spec(_))));
        }
    }

    #[test]
    fn zero_target_with_records_names_group() {
        let spec = FleetSpec {
            mix_targets: MixTargets {
                libvirt: 0.0,
                ..MixTargets::default()
            },
            ..small()
        };
        match generate(&spec, 1) {
            Err(SynthError::Mix(m)) => assert!(m.contains("libvirt"), "{m}"),
            other => panic!("{:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&small(), 7).unwrap().files();
        let b = generate(&small(), 7).unwrap().files();
        let c = generate(&small(), 8).unwrap().files();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn anti_affine_replicas() {
        let c = generate(&small(), 3).unwrap();
        for vm in &c.truth.vms {
            for b in vm.images.iter().flat_map(|i| &i.blocks) {
                assert_eq!(b.hosts.len(), 2);
                assert!(!b.hosts.contains(&vm.host));
            }
        }
    }

    #[test]
    fn fault_targets_are_exclusive() {
        let mut c = generate(&small(), 3).unwrap();
        let vm = c
            .truth
            .vms
            .iter()
            .find(|v| v.lifecycle == Lifecycle::LongRunning)
            .unwrap()
            .uuid
            .clone();
        c.inject(FaultKind::OrphanOvsPorts, &vm, 1).unwrap();
        assert!(matches!(c.inject(FaultKind::FailedMigration, &vm, 1), Err(SynthError::Fault(_))));
        assert!(matches!(c.inject(FaultKind::FailedMigration, "nope", 1), Err(SynthError::Fault(_))));
        assert_eq!(c.truth.expected_anomalies, vec![vm]);
    }
}
