//! Per-claim reasoning traces.
//!
//! Every backend call, retrieval, graph update and the final verdict becomes
//! one [`TraceEvent`]. Traces are JSON Lines files: a header line followed by
//! one event per line, flushed as they are recorded.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::graph::{ClaimGraph, Verdict};

pub const TRACE_SCHEMA: &str = "graphcheck-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace replay: {0}")]
    Replay(String),
    #[error("trace sink: {0}")]
    Sink(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Extract,
    Group,
    Question,
    Retrieve,
    IdentifyEntity,
    GraphUpdate,
    SubclaimGen,
    SubclaimVerify,
    Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub claim_id: String,
    pub seq: u64,
    pub stage: Stage,
    /// Milliseconds since the claim started, from the injected clock.
    pub elapsed_ms: u64,
    pub payload: Value,
}

impl TraceEvent {
    /// Events produced by a backend call carry the prompt role.
    pub fn is_backend_call(&self) -> bool {
        self.payload.get("role").is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: String,
    pub version: u32,
    pub claim_id: String,
    pub claim: String,
    pub started_unix_ms: u64,
}

impl TraceHeader {
    pub fn new(claim_id: &str, claim: &str) -> Self {
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or_default();
        TraceHeader {
            schema: TRACE_SCHEMA.into(),
            version: TRACE_VERSION,
            claim_id: claim_id.into(),
            claim: claim.into(),
            started_unix_ms,
        }
    }
}

pub trait Stopwatch: Send + Sync {
    fn elapsed(&self) -> Duration;
}

pub trait Clock: Send + Sync {
    fn stopwatch(&self) -> Box<dyn Stopwatch>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

struct InstantWatch(Instant);

impl Stopwatch for InstantWatch {
    fn elapsed(&self) -> Duration {
        self.0.elapsed()
    }
}

impl Clock for SystemClock {
    fn stopwatch(&self) -> Box<dyn Stopwatch> {
        Box::new(InstantWatch(Instant::now()))
    }
}

/// Deterministic clock: each reading advances the stopwatch by `step`.
#[derive(Debug, Clone, Copy)]
pub struct StepClock {
    pub step: Duration,
}

struct StepWatch {
    ticks: AtomicU64,
    step: Duration,
}

impl Stopwatch for StepWatch {
    fn elapsed(&self) -> Duration {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst) + 1;
        self.step * n as u32
    }
}

impl Clock for StepClock {
    fn stopwatch(&self) -> Box<dyn Stopwatch> {
        Box::new(StepWatch {
            ticks: AtomicU64::new(0),
            step: self.step,
        })
    }
}

/// LLM calls and knowledge-base round trips for one claim.
#[derive(Debug, Default)]
pub struct CostMeter {
    llm_calls: AtomicU64,
    kb_interactions: AtomicU64,
}

impl CostMeter {
    pub fn add_llm_call(&self) {
        self.llm_calls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn add_kb_interaction(&self) {
        self.kb_interactions.fetch_add(1, Ordering::Relaxed);
    }

    pub fn llm_calls(&self) -> u64 {
        self.llm_calls.load(Ordering::Relaxed)
    }

    pub fn kb_interactions(&self) -> u64 {
        self.kb_interactions.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostSnapshot {
    pub llm_calls: u64,
    pub kb_interactions: u64,
    pub inference_seconds: f64,
}

pub trait TraceWriter: Send {
    fn append(&mut self, event: &TraceEvent) -> Result<(), TraceError>;
}

pub trait TraceSink: Send + Sync {
    fn open(&self, header: &TraceHeader) -> Result<Box<dyn TraceWriter>, TraceError>;

    /// Where the trace for `claim_id` ends up, if it is persisted.
    fn location(&self, claim_id: &str) -> Option<PathBuf>;
}

/// Keeps events in memory only.
#[derive(Debug, Clone, Copy, Default)]
pub struct MemorySink;

struct NullWriter;

impl TraceWriter for NullWriter {
    fn append(&mut self, _event: &TraceEvent) -> Result<(), TraceError> {
        Ok(())
    }
}

impl TraceSink for MemorySink {
    fn open(&self, _header: &TraceHeader) -> Result<Box<dyn TraceWriter>, TraceError> {
        Ok(Box::new(NullWriter))
    }

    fn location(&self, _claim_id: &str) -> Option<PathBuf> {
        None
    }
}

/// Writes `<dir>/<claim_id>.jsonl`, one file per claim.
#[derive(Debug, Clone)]
pub struct DirSink {
    dir: PathBuf,
}

impl DirSink {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirSink { dir: dir.into() }
    }
}

pub fn trace_file_name(claim_id: &str) -> String {
    let safe: String = claim_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

struct FileWriter {
    path: PathBuf,
    out: BufWriter<fs::File>,
}

impl FileWriter {
    fn line<T: Serialize>(&mut self, value: &T) -> Result<(), TraceError> {
        let io = |e| TraceError::Io {
            path: self.path.clone(),
            source: e,
        };
        let json = serde_json::to_string(value).map_err(|e| TraceError::Sink(e.to_string()))?;
        writeln!(self.out, "{json}").map_err(io)?;
        self.out.flush().map_err(|e| TraceError::Io {
            path: self.path.clone(),
            source: e,
        })
    }
}

impl TraceWriter for FileWriter {
    fn append(&mut self, event: &TraceEvent) -> Result<(), TraceError> {
        self.line(event)
    }
}

impl TraceSink for DirSink {
    fn open(&self, header: &TraceHeader) -> Result<Box<dyn TraceWriter>, TraceError> {
        let io = |path: &Path, e| TraceError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        fs::create_dir_all(&self.dir).map_err(|e| io(&self.dir, e))?;
        let path = self.dir.join(trace_file_name(&header.claim_id));
        let file = fs::File::create(&path).map_err(|e| io(&path, e))?;
        let mut w = FileWriter {
            path,
            out: BufWriter::new(file),
        };
        w.line(header)?;
        Ok(Box::new(w))
    }

    fn location(&self, claim_id: &str) -> Option<PathBuf> {
        Some(self.dir.join(trace_file_name(claim_id)))
    }
}

struct RecorderState {
    events: Vec<TraceEvent>,
    writer: Box<dyn TraceWriter>,
    failure: Option<String>,
    context: Map<String, Value>,
}

/// Ordered event stream and cost meter for a single claim.
pub struct ClaimRecorder {
    claim_id: String,
    state: Mutex<RecorderState>,
    meter: CostMeter,
    watch: Box<dyn Stopwatch>,
}

impl ClaimRecorder {
    pub fn open(sink: &dyn TraceSink, clock: &dyn Clock, claim_id: &str, claim: &str) -> Self {
        let watch = clock.stopwatch();
        let (writer, failure): (Box<dyn TraceWriter>, _) = match sink.open(&TraceHeader::new(claim_id, claim)) {
            Ok(w) => (w, None),
            Err(e) => (Box::new(NullWriter), Some(e.to_string())),
        };
        ClaimRecorder {
            claim_id: claim_id.into(),
            state: Mutex::new(RecorderState {
                events: Vec::new(),
                writer,
                failure,
                context: Map::new(),
            }),
            meter: CostMeter::default(),
            watch,
        }
    }

    /// In-memory recorder with the system clock.
    pub fn in_memory(claim_id: &str) -> Self {
        Self::open(&MemorySink, &SystemClock, claim_id, "")
    }

    pub fn claim_id(&self) -> &str {
        &self.claim_id
    }

    pub fn meter(&self) -> &CostMeter {
        &self.meter
    }

    pub fn elapsed(&self) -> Duration {
        self.watch.elapsed()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, RecorderState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Fields merged into every subsequent payload object (e.g. iteration,
    /// placeholder). Replaces any previous context.
    pub fn set_context(&self, context: Value) {
        let map = match context {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        self.lock().context = map;
    }

    pub fn clear_context(&self) {
        self.lock().context.clear();
    }

    /// Appends an event. The first sink failure is remembered and reported by
    /// [`failure`](Self::failure); events are still kept in memory.
    pub fn record(&self, stage: Stage, payload: Value) -> Result<(), TraceError> {
        let elapsed_ms = self.watch.elapsed().as_millis() as u64;
        let mut st = self.lock();
        let payload = match payload {
            Value::Object(mut m) => {
                for (k, v) in &st.context {
                    m.entry(k.clone()).or_insert_with(|| v.clone());
                }
                Value::Object(m)
            }
            other => other,
        };
        let event = TraceEvent {
            claim_id: self.claim_id.clone(),
            seq: st.events.len() as u64,
            stage,
            elapsed_ms,
            payload,
        };
        let res = st.writer.append(&event);
        st.events.push(event);
        if let Err(e) = &res {
            st.failure.get_or_insert_with(|| e.to_string());
        }
        res
    }

    pub fn failure(&self) -> Option<String> {
        self.lock().failure.clone()
    }

    pub fn events(&self) -> Vec<TraceEvent> {
        self.lock().events.clone()
    }

    pub fn finish(self) -> (Vec<TraceEvent>, CostSnapshot) {
        let inference_seconds = self.watch.elapsed().as_secs_f64();
        let snapshot = CostSnapshot {
            llm_calls: self.meter.llm_calls(),
            kb_interactions: self.meter.kb_interactions(),
            inference_seconds,
        };
        let st = self.state.into_inner().unwrap_or_else(|e| e.into_inner());
        (st.events, snapshot)
    }
}

pub fn read_trace(path: &Path) -> Result<(TraceHeader, Vec<TraceEvent>), TraceError> {
    let file = fs::File::open(path).map_err(|e| TraceError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let parse_err = |line: usize, e: &dyn std::fmt::Display| TraceError::Parse {
        line: line + 1,
        message: e.to_string(),
    };
    let (i, first) = lines.next().ok_or_else(|| parse_err(0, &"empty trace file"))?;
    let first = first.map_err(|e| parse_err(i, &e))?;
    let header: TraceHeader = serde_json::from_str(&first).map_err(|e| parse_err(i, &e))?;
    if header.schema != TRACE_SCHEMA || header.version != TRACE_VERSION {
        return Err(parse_err(i, &format!("unsupported schema {} v{}", header.schema, header.version)));
    }
    let mut events = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| parse_err(i, &e))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line).map_err(|e| parse_err(i, &e))?);
    }
    Ok((header, events))
}

/// Final graph and verdict folded from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub graph: ClaimGraph,
    pub verdict: Verdict,
}

/// Rebuilds the final graph from the extracted graph plus every graph update,
/// and takes the verdict from the verdict event.
pub fn replay(claim: &str, events: &[TraceEvent]) -> Result<Replayed, TraceError> {
    let bad = |msg: String| TraceError::Replay(msg);
    let mut graph = ClaimGraph::empty(claim);
    let mut verdict = None;
    for ev in events {
        match ev.stage {
            Stage::Extract => {
                if let Some(g) = ev.payload.get("graph").filter(|g| !g.is_null()) {
                    graph = serde_json::from_value(g.clone()).map_err(|e| bad(e.to_string()))?;
                }
            }
            Stage::GraphUpdate => {
                let p = &ev.payload;
                let placeholder = p["placeholder"]
                    .as_u64()
                    .ok_or_else(|| bad(format!("event {}: missing placeholder", ev.seq)))?;
                let entity = p["entity"]
                    .as_str()
                    .ok_or_else(|| bad(format!("event {}: missing entity", ev.seq)))?;
                let ids: BTreeSet<u32> = serde_json::from_value(p["verified_ids"].clone())
                    .map_err(|e| bad(format!("event {}: {e}", ev.seq)))?;
                graph = graph
                    .resolve_placeholder(placeholder as u32, entity)
                    .and_then(|g| g.mark_verified(&ids))
                    .map_err(|e| bad(format!("event {}: {e}", ev.seq)))?;
            }
            Stage::Verdict => {
                verdict = Some(
                    serde_json::from_value(ev.payload["verdict"].clone())
                        .map_err(|e| bad(format!("event {}: {e}", ev.seq)))?,
                );
            }
            _ => {}
        }
    }
    Ok(Replayed {
        graph,
        verdict: verdict.ok_or_else(|| bad("no verdict event".into()))?,
    })
}
