//! Append-only time-series storage.
//!
//! Layout: one subdirectory per series, numbered segment files inside.
//! Each segment starts with a fixed header and holds length-prefixed
//! entries `[len u32 | time u64 | payload]` (big-endian). A segment that
//! reaches its entry budget is closed with a footer carrying a CRC32 of
//! its entry bytes and becomes immutable. Recovery replays the tail
//! segment and truncates at the first incomplete entry, so a crash loses
//! at most the final partial write.
//!
//! Numeric metrics store an 8-byte float payload; event documents store
//! raw JSON bytes through the same machinery.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use thiserror::Error;

use crate::time::SimTime;

const SEGMENT_MAGIC: &[u8; 8] = b"CWSEG01\0";
const FOOTER_MARKER: u32 = 0xFFFF_FFFF;
const HEADER_LEN: u64 = 12; // magic + version
const VERSION: u32 = 1;

/// Sparse index stride: one (time, offset) anchor per this many entries.
const INDEX_STRIDE: usize = 64;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("out-of-order append to {series}: {time:?} < last {last:?}")]
    OutOfOrder {
        series: String,
        time: SimTime,
        last: SimTime,
    },
    #[error("corrupt segment {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct StoreCfg {
    pub max_entries_per_segment: usize,
}

impl Default for StoreCfg {
    fn default() -> Self {
        StoreCfg {
            max_entries_per_segment: 4096,
        }
    }
}

struct SegmentMeta {
    path: PathBuf,
    min_time: Option<SimTime>,
    max_time: Option<SimTime>,
    entry_count: usize,
    /// (time, byte offset) anchors every `INDEX_STRIDE` entries.
    index: Vec<(SimTime, u64)>,
    closed: bool,
}

struct Series {
    dir: PathBuf,
    segments: Vec<SegmentMeta>,
    writer: Option<File>,
    last_time: Option<SimTime>,
    running_crc: u32,
    cfg: StoreCfg,
}

/// Append-only store: single writer per series, concurrent readers.
pub struct TimeSeriesStore {
    root: PathBuf,
    cfg: StoreCfg,
    series: Mutex<HashMap<String, Arc<RwLock<Series>>>>,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn crc32(bytes: &[u8], seed: u32) -> u32 {
    // CRC-32/ISO-HDLC, bitwise; entry volumes here are small enough that
    // a table is not worth the code.
    let mut crc = !seed;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xEDB8_8320 & mask);
        }
    }
    !crc
}

impl TimeSeriesStore {
    pub fn open(root: impl AsRef<Path>) -> Result<TimeSeriesStore, StoreError> {
        TimeSeriesStore::open_with(root, StoreCfg::default())
    }

    pub fn open_with(root: impl AsRef<Path>, cfg: StoreCfg) -> Result<TimeSeriesStore, StoreError> {
        let root = root.as_ref().to_path_buf();
        std::fs::create_dir_all(&root)?;
        let store = TimeSeriesStore {
            root,
            cfg,
            series: Mutex::new(HashMap::new()),
        };
        // Eagerly recover existing series so corruption surfaces at open.
        let entries = std::fs::read_dir(&store.root)?;
        for e in entries.flatten() {
            if e.path().is_dir() {
                if let Some(name) = e.file_name().to_str() {
                    store.series_handle(name)?;
                }
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn series_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.series.lock().unwrap().keys().cloned().collect();
        names.sort();
        names
    }

    pub fn append(&self, series: &str, time: SimTime, value: f64) -> Result<(), StoreError> {
        self.append_raw(series, time, &value.to_be_bytes())
    }

    pub fn append_raw(&self, series: &str, time: SimTime, payload: &[u8]) -> Result<(), StoreError> {
        let handle = self.series_handle(series)?;
        let mut s = handle.write().unwrap();
        s.append(series, time, payload)
    }

    /// Entries with `t1 <= time < t2`, in append order.
    pub fn query(&self, series: &str, t1: SimTime, t2: SimTime) -> Result<Vec<(SimTime, f64)>, StoreError> {
        Ok(self
            .query_raw(series, t1, t2)?
            .into_iter()
            .filter(|(_, p)| p.len() == 8)
            .map(|(t, p)| {
                let mut b = [0u8; 8];
                b.copy_from_slice(&p);
                (t, f64::from_be_bytes(b))
            })
            .collect())
    }

    pub fn query_raw(
        &self,
        series: &str,
        t1: SimTime,
        t2: SimTime,
    ) -> Result<Vec<(SimTime, Vec<u8>)>, StoreError> {
        if t2 <= t1 {
            return Ok(Vec::new());
        }
        let handle = self.series_handle(series)?;
        let s = handle.read().unwrap();
        s.query(t1, t2)
    }

    pub fn last(&self, series: &str) -> Result<Option<(SimTime, Vec<u8>)>, StoreError> {
        let handle = self.series_handle(series)?;
        let s = handle.read().unwrap();
        let Some(last_time) = s.last_time else {
            return Ok(None);
        };
        let hits = s.query(last_time, SimTime(last_time.0 + 1))?;
        Ok(hits.into_iter().next_back())
    }

    fn series_handle(&self, series: &str) -> Result<Arc<RwLock<Series>>, StoreError> {
        let mut map = self.series.lock().unwrap();
        if let Some(h) = map.get(series) {
            return Ok(h.clone());
        }
        let dir = self.root.join(sanitize(series));
        let s = Series::open(dir, self.cfg.clone())?;
        let handle = Arc::new(RwLock::new(s));
        map.insert(series.to_string(), handle.clone());
        Ok(handle)
    }
}

impl Series {
    fn open(dir: PathBuf, cfg: StoreCfg) -> Result<Series, StoreError> {
        std::fs::create_dir_all(&dir)?;
        let mut numbers: Vec<u64> = Vec::new();
        for e in std::fs::read_dir(&dir)?.flatten() {
            if let Some(name) = e.file_name().to_str() {
                if let Some(num) = name
                    .strip_prefix("seg-")
                    .and_then(|s| s.strip_suffix(".log"))
                    .and_then(|s| s.parse::<u64>().ok())
                {
                    numbers.push(num);
                }
            }
        }
        numbers.sort_unstable();
        let mut segments = Vec::with_capacity(numbers.len());
        for (i, num) in numbers.iter().enumerate() {
            let path = dir.join(format!("seg-{num:06}.log"));
            let is_tail = i + 1 == numbers.len();
            segments.push(recover_segment(&path, is_tail)?);
        }
        let last_time = segments.iter().rev().find_map(|s| s.max_time);
        let mut series = Series {
            dir,
            segments,
            writer: None,
            last_time,
            running_crc: 0,
            cfg,
        };
        // Reopen the tail for appending if it is still open.
        if let Some(tail) = series.segments.last() {
            if !tail.closed {
                let file = OpenOptions::new().append(true).open(&tail.path)?;
                series.running_crc = recompute_crc(&tail.path)?;
                series.writer = Some(file);
            }
        }
        Ok(series)
    }

    fn append(&mut self, series_name: &str, time: SimTime, payload: &[u8]) -> Result<(), StoreError> {
        if let Some(last) = self.last_time {
            if time < last {
                return Err(StoreError::OutOfOrder {
                    series: series_name.to_string(),
                    time,
                    last,
                });
            }
        }
        if self.writer.is_none() {
            self.start_segment()?;
        }
        let needs_roll = self
            .segments
            .last()
            .map(|s| s.entry_count >= self.cfg.max_entries_per_segment)
            .unwrap_or(false);
        if needs_roll {
            self.close_segment()?;
            self.start_segment()?;
        }

        let seg = self.segments.last_mut().expect("open segment");
        let mut entry = Vec::with_capacity(12 + payload.len());
        entry.extend_from_slice(&((8 + payload.len()) as u32).to_be_bytes());
        entry.extend_from_slice(&time.0.to_be_bytes());
        entry.extend_from_slice(payload);
        let writer = self.writer.as_mut().expect("writer open");
        let offset = writer.seek(SeekFrom::End(0))?;
        writer.write_all(&entry)?;
        self.running_crc = crc32(&entry, self.running_crc);

        if seg.entry_count % INDEX_STRIDE == 0 {
            seg.index.push((time, offset));
        }
        seg.entry_count += 1;
        seg.min_time.get_or_insert(time);
        seg.max_time = Some(time);
        self.last_time = Some(time);
        Ok(())
    }

    fn start_segment(&mut self) -> Result<(), StoreError> {
        let next = self
            .segments
            .last()
            .and_then(|s| {
                s.path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .and_then(|n| n.strip_prefix("seg-"))
                    .and_then(|n| n.strip_suffix(".log"))
                    .and_then(|n| n.parse::<u64>().ok())
            })
            .map(|n| n + 1)
            .unwrap_or(1);
        let path = self.dir.join(format!("seg-{next:06}.log"));
        let mut file = OpenOptions::new().create_new(true).append(true).open(&path)?;
        file.write_all(SEGMENT_MAGIC)?;
        file.write_all(&VERSION.to_be_bytes())?;
        self.running_crc = 0;
        self.segments.push(SegmentMeta {
            path,
            min_time: None,
            max_time: None,
            entry_count: 0,
            index: Vec::new(),
            closed: false,
        });
        self.writer = Some(file);
        Ok(())
    }

    /// Write the footer and make the segment immutable.
    fn close_segment(&mut self) -> Result<(), StoreError> {
        if let (Some(writer), Some(seg)) = (self.writer.as_mut(), self.segments.last_mut()) {
            let mut footer = Vec::with_capacity(16);
            footer.extend_from_slice(&FOOTER_MARKER.to_be_bytes());
            footer.extend_from_slice(&self.running_crc.to_be_bytes());
            footer.extend_from_slice(&(seg.entry_count as u32).to_be_bytes());
            writer.write_all(&footer)?;
            writer.sync_data()?;
            seg.closed = true;
        }
        self.writer = None;
        Ok(())
    }

    fn query(&self, t1: SimTime, t2: SimTime) -> Result<Vec<(SimTime, Vec<u8>)>, StoreError> {
        let mut out = Vec::new();
        for seg in &self.segments {
            let (Some(min), Some(max)) = (seg.min_time, seg.max_time) else {
                continue;
            };
            if max < t1 || min >= t2 {
                continue;
            }
            // Start from the last index anchor at or before t1.
            let start = seg
                .index
                .iter()
                .rev()
                .find(|(t, _)| *t <= t1)
                .map(|(_, off)| *off)
                .unwrap_or(HEADER_LEN);
            scan_entries(&seg.path, start, |time, payload| {
                if time >= t2 {
                    return false;
                }
                if time >= t1 {
                    out.push((time, payload.to_vec()));
                }
                true
            })?;
        }
        Ok(out)
    }
}

/// Walk entries from `offset`, calling `visit(time, payload)`; stops when
/// the visitor returns false, at the footer, or at a partial tail.
fn scan_entries(
    path: &Path,
    offset: u64,
    mut visit: impl FnMut(SimTime, &[u8]) -> bool,
) -> Result<u64, StoreError> {
    let mut file = File::open(path)?;
    file.seek(SeekFrom::Start(offset))?;
    let mut reader = std::io::BufReader::new(file);
    let mut pos = offset;
    let mut len_buf = [0u8; 4];
    loop {
        match reader.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(pos),
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_be_bytes(len_buf);
        if len == FOOTER_MARKER {
            return Ok(pos);
        }
        if len < 8 || len > 16 * 1024 * 1024 {
            return Err(StoreError::Corrupt {
                path: path.display().to_string(),
                reason: format!("entry length {len}"),
            });
        }
        let mut entry = vec![0u8; len as usize];
        match reader.read_exact(&mut entry) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(pos),
            Err(e) => return Err(e.into()),
        }
        let time = SimTime(u64::from_be_bytes(entry[0..8].try_into().unwrap()));
        if !visit(time, &entry[8..]) {
            return Ok(pos);
        }
        pos += 4 + len as u64;
    }
}

/// Rebuild segment metadata; for the tail segment, truncate any partial
/// final entry left by a crash.
fn recover_segment(path: &Path, is_tail: bool) -> Result<SegmentMeta, StoreError> {
    let mut file = File::open(path)?;
    let mut header = [0u8; HEADER_LEN as usize];
    if file.read_exact(&mut header).is_err() {
        // Shorter than a header: an empty just-created tail.
        return Ok(SegmentMeta {
            path: path.to_path_buf(),
            min_time: None,
            max_time: None,
            entry_count: 0,
            index: Vec::new(),
            closed: false,
        });
    }
    if &header[0..8] != SEGMENT_MAGIC {
        return Err(StoreError::Corrupt {
            path: path.display().to_string(),
            reason: "bad magic".into(),
        });
    }
    drop(file);

    let mut meta = SegmentMeta {
        path: path.to_path_buf(),
        min_time: None,
        max_time: None,
        entry_count: 0,
        index: Vec::new(),
        closed: false,
    };
    let mut offset_for_index = HEADER_LEN;
    let end = scan_entries(path, HEADER_LEN, |time, payload| {
        if meta.entry_count % INDEX_STRIDE == 0 {
            meta.index.push((time, offset_for_index));
        }
        offset_for_index += 4 + 8 + payload.len() as u64;
        meta.entry_count += 1;
        meta.min_time.get_or_insert(time);
        meta.max_time = Some(time);
        true
    })?;

    let file_len = std::fs::metadata(path)?.len();
    if end < file_len {
        // Either a footer or a torn tail write.
        let mut file = File::open(path)?;
        file.seek(SeekFrom::Start(end))?;
        let mut marker = [0u8; 4];
        let has_footer = file.read_exact(&mut marker).is_ok()
            && u32::from_be_bytes(marker) == FOOTER_MARKER;
        if has_footer {
            meta.closed = true;
        } else if is_tail {
            // Partial entry: drop it.
            let f = OpenOptions::new().write(true).open(path)?;
            f.set_len(end)?;
        } else {
            return Err(StoreError::Corrupt {
                path: path.display().to_string(),
                reason: "torn write in closed segment".into(),
            });
        }
    }
    Ok(meta)
}

fn recompute_crc(path: &Path) -> Result<u32, StoreError> {
    let mut crc = 0u32;
    scan_entries(path, HEADER_LEN, |_t, _p| true)?;
    // Recompute over the raw entry bytes.
    let mut file = File::open(path)?;
    file.seek(SeekFrom::Start(HEADER_LEN))?;
    let mut rest = Vec::new();
    file.read_to_end(&mut rest)?;
    // Only complete entries participate (scan_entries truncated already
    // on recovery, so the file holds whole entries here).
    crc = crc32(&rest, crc);
    Ok(crc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn t(secs: u64) -> SimTime {
        SimTime::from_secs(secs)
    }

    #[test]
    fn append_then_query_returns_entry() {
        let dir = TempDir::new().unwrap();
        let store = TimeSeriesStore::open(dir.path()).unwrap();
        store.append("imu-1.max_charge_pc", t(10), 1200.0).unwrap();
        let hits = store.query("imu-1.max_charge_pc", t(0), t(20)).unwrap();
        assert_eq!(hits, vec![(t(10), 1200.0)]);
    }

    #[test]
    fn empty_range_is_empty() {
        let dir = TempDir::new().unwrap();
        let store = TimeSeriesStore::open(dir.path()).unwrap();
        store.append("s", t(10), 1.0).unwrap();
        assert!(store.query("s", t(20), t(30)).unwrap().is_empty());
        assert!(store.query("s", t(10), t(10)).unwrap().is_empty());
    }

    #[test]
    fn range_bounds_are_half_open() {
        let dir = TempDir::new().unwrap();
        let store = TimeSeriesStore::open(dir.path()).unwrap();
        for s in 0..10u64 {
            store.append("s", t(s), s as f64).unwrap();
        }
        let hits = store.query("s", t(3), t(7)).unwrap();
        let times: Vec<u64> = hits.iter().map(|(ts, _)| ts.as_secs()).collect();
        assert_eq!(times, vec![3, 4, 5, 6]);
    }

    #[test]
    fn out_of_order_append_rejected() {
        let dir = TempDir::new().unwrap();
        let store = TimeSeriesStore::open(dir.path()).unwrap();
        store.append("s", t(10), 1.0).unwrap();
        assert!(matches!(
            store.append("s", t(5), 2.0),
            Err(StoreError::OutOfOrder { .. })
        ));
        // Equal timestamps are fine (nondecreasing).
        store.append("s", t(10), 3.0).unwrap();
    }

    #[test]
    fn segments_roll_and_remain_queryable() {
        let dir = TempDir::new().unwrap();
        let store = TimeSeriesStore::open_with(
            dir.path(),
            StoreCfg {
                max_entries_per_segment: 50,
            },
        )
        .unwrap();
        for s in 0..500u64 {
            store.append("s", t(s), s as f64).unwrap();
        }
        let seg_count = std::fs::read_dir(dir.path().join("s")).unwrap().count();
        assert!(seg_count >= 9, "expected several segments, got {seg_count}");
        let hits = store.query("s", t(0), t(500)).unwrap();
        assert_eq!(hits.len(), 500);
        assert!(hits.windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn reopen_preserves_data() {
        let dir = TempDir::new().unwrap();
        {
            let store = TimeSeriesStore::open(dir.path()).unwrap();
            for s in 0..100u64 {
                store.append("s", t(s), s as f64 * 2.0).unwrap();
            }
        }
        let store = TimeSeriesStore::open(dir.path()).unwrap();
        let hits = store.query("s", t(0), t(1000)).unwrap();
        assert_eq!(hits.len(), 100);
        assert_eq!(hits[99].1, 198.0);
        // Appends continue after the recovered tail.
        store.append("s", t(100), 1.0).unwrap();
        assert_eq!(store.query("s", t(0), t(1000)).unwrap().len(), 101);
    }

    #[test]
    fn truncated_tail_loses_at_most_final_entry() {
        let dir = TempDir::new().unwrap();
        {
            let store = TimeSeriesStore::open(dir.path()).unwrap();
            for s in 0..20u64 {
                store.append("s", t(s), s as f64).unwrap();
            }
        }
        // Chop into the middle of the final entry.
        let seg = dir.path().join("s").join("seg-000001.log");
        let len = std::fs::metadata(&seg).unwrap().len();
        let f = OpenOptions::new().write(true).open(&seg).unwrap();
        f.set_len(len - 5).unwrap();
        drop(f);

        let store = TimeSeriesStore::open(dir.path()).unwrap();
        let hits = store.query("s", t(0), t(1000)).unwrap();
        assert_eq!(hits.len(), 19, "exactly the torn entry is lost");
        // And the series accepts appends again.
        store.append("s", t(50), 7.0).unwrap();
        assert_eq!(store.query("s", t(0), t(1000)).unwrap().len(), 20);
    }

    #[test]
    fn raw_payloads_round_trip() {
        let dir = TempDir::new().unwrap();
        let store = TimeSeriesStore::open(dir.path()).unwrap();
        store.append_raw("events", t(1), br#"{"uuid":"a"}"#).unwrap();
        store.append_raw("events", t(2), br#"{"uuid":"b"}"#).unwrap();
        let hits = store.query_raw("events", t(0), t(10)).unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[1].1, br#"{"uuid":"b"}"#.to_vec());
    }

    #[test]
    fn randomized_workload_matches_naive_reference() {
        let dir = TempDir::new().unwrap();
        let store = TimeSeriesStore::open_with(
            dir.path(),
            StoreCfg {
                max_entries_per_segment: 128,
            },
        )
        .unwrap();
        let mut rng = crate::sim::seeded_rng(42, &["store-oracle"]);
        use rand::Rng;

        let series = ["a", "b", "c"];
        let mut reference: HashMap<&str, Vec<(SimTime, f64)>> = HashMap::new();
        let mut clocks: HashMap<&str, u64> = HashMap::new();
        for _ in 0..5000 {
            let s = series[rng.gen_range(0..series.len())];
            let clock = clocks.entry(s).or_insert(0);
            *clock += rng.gen_range(0..3);
            let time = SimTime(*clock);
            let value = rng.gen_range(-1e6..1e6);
            store.append(s, time, value).unwrap();
            reference.entry(s).or_default().push((time, value));
        }
        for _ in 0..200 {
            let s = series[rng.gen_range(0..series.len())];
            let a = rng.gen_range(0..6000u64);
            let b = rng.gen_range(0..6000u64);
            let (t1, t2) = (SimTime(a.min(b)), SimTime(a.max(b)));
            let got = store.query(s, t1, t2).unwrap();
            let want: Vec<(SimTime, f64)> = reference[s]
                .iter()
                .filter(|(ts, _)| *ts >= t1 && *ts < t2)
                .cloned()
                .collect();
            assert_eq!(got, want, "series {s} range {t1:?}..{t2:?}");
        }
    }
}
