//! The on-disk prediction-log format.
//!
//! ```text
//! <dir>/manifest.json        UTF-8 JSON, written last
//! <dir>/labels.bin           N x u32, little-endian
//! <dir>/clean_labels.bin     N x u32, little-endian (optional)
//! <dir>/epoch_<id>.bin       N x C x f32, row-major, little-endian
//! ```
//!
//! The manifest records a 64-bit FNV-1a digest of every data file as 16
//! lowercase hex digits. Checkpoint files are read one at a time, on demand.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::hash::Hasher;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use fnv::FnvHasher;
use fusekit_core::checkpoint::{check_header, scan_rows};
use fusekit_core::{Checkpoint, CheckpointSource};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;
pub const DTYPE: &str = "ieee754-single";
pub const CHECKSUM_ALGORITHM: &str = "fnv1a-64";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const LABELS_FILE: &str = "labels.bin";
pub const CLEAN_LABELS_FILE: &str = "clean_labels.bin";

pub fn epoch_file(epoch: u64) -> String {
    format!("epoch_{epoch}.bin")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub n_examples: usize,
    pub n_classes: usize,
    pub epochs: Vec<u64>,
    pub has_clean_labels: bool,
    pub dtype: String,
    pub checksum_algorithm: String,
    /// File name -> hex digest.
    pub checksums: BTreeMap<String, String>,
}

impl Manifest {
    pub fn slab_bytes(&self) -> usize {
        self.n_examples * self.n_classes * 4
    }
}

/// One violated invariant found by [`validate_log`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingManifest,
    MalformedManifest(String),
    MissingFile(String),
    Io { file: String, message: String },
    MissingChecksum(String),
    ChecksumMismatch { file: String, expected: String, actual: String },
    SizeMismatch { file: String, expected: u64, actual: u64 },
    /// A log-level invariant (shape, epoch order, label range).
    Header(fusekit_core::Error),
    /// A row or entry of checkpoint `checkpoint` (epoch `epoch`).
    Row { epoch: u64, error: fusekit_core::Error },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingManifest => write!(f, "missing manifest"),
            Violation::MalformedManifest(m) => write!(f, "malformed manifest: {m}"),
            Violation::MissingFile(file) => write!(f, "missing file {file}"),
            Violation::Io { file, message } => write!(f, "cannot read {file}: {message}"),
            Violation::MissingChecksum(file) => write!(f, "no checksum recorded for {file}"),
            Violation::ChecksumMismatch { file, expected, actual } => {
                write!(f, "checksum mismatch in {file}: manifest {expected}, actual {actual}")
            }
            Violation::SizeMismatch { file, expected, actual } => {
                write!(f, "size mismatch in {file}: expected {expected} bytes, actual {actual} bytes")
            }
            Violation::Header(e) => write!(f, "{e}"),
            Violation::Row { epoch, error } => write!(f, "epoch {epoch}: {error}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok");
        }
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid log: {0}")]
    Corrupt(Violation),
    #[error(transparent)]
    Invalid(#[from] fusekit_core::Error),
    #[error("writer: {0}")]
    Writer(String),
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io { path: path.to_path_buf(), source }
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    let mut h = FnvHasher::default();
    h.write(bytes);
    format!("{:016x}", h.finish())
}

fn u32s_to_le(values: &[u32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn f32s_to_le(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn le_to_u32s(bytes: &[u8]) -> Vec<u32> {
    bytes.chunks_exact(4).map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect()
}

/// Reads exactly `len` f32 values without an intermediate byte buffer.
fn read_f32_file(path: &Path, len: usize) -> io::Result<Vec<f32>> {
    let mut file = File::open(path)?;
    let actual = file.metadata()?.len();
    if actual != (len * 4) as u64 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("size mismatch: expected {} bytes, actual {actual} bytes", len * 4),
        ));
    }
    let mut values = vec![0f32; len];
    file.read_exact(bytemuck::cast_slice_mut(&mut values))?;
    if cfg!(target_endian = "big") {
        for v in &mut values {
            *v = f32::from_bits(u32::from_le(v.to_bits()));
        }
    }
    Ok(values)
}

/// Accounts for checkpoint slabs held by a [`DiskLog`] at any one time.
#[derive(Debug, Default)]
pub struct SlabMeter {
    live: AtomicUsize,
    peak: AtomicUsize,
}

impl SlabMeter {
    fn acquire(&self, bytes: usize) {
        let now = self.live.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.peak.fetch_max(now, Ordering::SeqCst);
    }

    fn release(&self, bytes: usize) {
        self.live.fetch_sub(bytes, Ordering::SeqCst);
    }

    pub fn live_bytes(&self) -> usize {
        self.live.load(Ordering::SeqCst)
    }

    pub fn peak_bytes(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn reset_peak(&self) {
        self.peak.store(self.live_bytes(), Ordering::SeqCst);
    }
}

/// A prediction log opened from disk. Checkpoints are read lazily, one file per
/// access; the log itself is immutable and can be shared across threads.
#[derive(Debug)]
pub struct DiskLog {
    dir: PathBuf,
    manifest: Manifest,
    labels: Vec<u32>,
    clean_labels: Option<Vec<u32>>,
    meter: SlabMeter,
    reads: Vec<AtomicUsize>,
}

impl DiskLog {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn meter(&self) -> &SlabMeter {
        &self.meter
    }

    /// Number of times each checkpoint file has been read since opening.
    pub fn read_counts(&self) -> Vec<usize> {
        self.reads.iter().map(|r| r.load(Ordering::SeqCst)).collect()
    }

    /// Digest of the manifest, which pins every data file through its checksum.
    pub fn digest(&self) -> String {
        checksum(serde_json::to_string(&self.manifest).expect("manifest serializes").as_bytes())
    }
}

impl CheckpointSource for DiskLog {
    fn n_examples(&self) -> usize {
        self.manifest.n_examples
    }
    fn n_classes(&self) -> usize {
        self.manifest.n_classes
    }
    fn epochs(&self) -> &[u64] {
        &self.manifest.epochs
    }
    fn labels(&self) -> &[u32] {
        &self.labels
    }
    fn clean_labels(&self) -> Option<&[u32]> {
        self.clean_labels.as_deref()
    }

    fn with_checkpoint<R>(&self, index: usize, f: impl FnOnce(&Checkpoint) -> R) -> fusekit_core::Result<R> {
        let epoch = *self
            .manifest
            .epochs
            .get(index)
            .ok_or(fusekit_core::Error::CheckpointOutOfRange { index, len: self.manifest.epochs.len() })?;
        let (n, c) = (self.manifest.n_examples, self.manifest.n_classes);
        let bytes = self.manifest.slab_bytes();
        self.reads[index].fetch_add(1, Ordering::SeqCst);
        self.meter.acquire(bytes);
        let result = read_f32_file(&self.dir.join(epoch_file(epoch)), n * c)
            .map_err(|e| fusekit_core::Error::Storage { checkpoint: index, message: e.to_string() })
            .and_then(|raw| Checkpoint::from_raw(index, n, c, raw))
            .map(|cp| f(&cp));
        self.meter.release(bytes);
        result
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OpenOptions {
    /// Verify checksums and every row before returning. Without it only the
    /// manifest, labels and file sizes are checked; rows are still checked as
    /// each checkpoint is read.
    pub verify_data: bool,
}

impl Default for OpenOptions {
    fn default() -> Self {
        OpenOptions { verify_data: true }
    }
}

pub fn open_log(dir: impl AsRef<Path>) -> Result<DiskLog, StoreError> {
    open_log_with(dir, OpenOptions::default())
}

pub fn open_log_with(dir: impl AsRef<Path>, options: OpenOptions) -> Result<DiskLog, StoreError> {
    let dir = dir.as_ref();
    let mut first = None;
    let manifest = scan_log(dir, options.verify_data, &mut |v| {
        first.get_or_insert(v);
    });
    if let Some(v) = first {
        return Err(StoreError::Corrupt(v));
    }
    let manifest = manifest.expect("no violations implies a manifest");
    let read_labels = |file: &str| -> Result<Vec<u32>, StoreError> {
        let path = dir.join(file);
        Ok(le_to_u32s(&fs::read(&path).map_err(|e| StoreError::io(&path, e))?))
    };
    let labels = read_labels(LABELS_FILE)?;
    let clean_labels = if manifest.has_clean_labels { Some(read_labels(CLEAN_LABELS_FILE)?) } else { None };
    check_header(manifest.n_examples, manifest.n_classes, &manifest.epochs, &labels, clean_labels.as_deref())?;
    let reads = manifest.epochs.iter().map(|_| AtomicUsize::new(0)).collect();
    Ok(DiskLog { dir: dir.to_path_buf(), manifest, labels, clean_labels, meter: SlabMeter::default(), reads })
}

/// Checks every invariant of the log at `dir`. Never fails; an empty report
/// means the log is well formed.
pub fn validate_log(dir: impl AsRef<Path>) -> ValidationReport {
    let mut report = ValidationReport::default();
    scan_log(dir.as_ref(), true, &mut |v| report.violations.push(v));
    report
}

/// Shared walk behind [`open_log`] and [`validate_log`]. Returns the manifest
/// when it could be parsed.
fn scan_log(dir: &Path, verify_data: bool, report: &mut dyn FnMut(Violation)) -> Option<Manifest> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&manifest_path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            report(Violation::MissingManifest);
            return None;
        }
        Err(e) => {
            report(Violation::Io { file: MANIFEST_FILE.into(), message: e.to_string() });
            return None;
        }
    };
    let manifest: Manifest = match serde_json::from_str(&text) {
        Ok(m) => m,
        Err(e) => {
            report(Violation::MalformedManifest(e.to_string()));
            return None;
        }
    };
    if manifest.format_version != FORMAT_VERSION {
        report(Violation::MalformedManifest(format!("unsupported format_version {}", manifest.format_version)));
    }
    if manifest.dtype != DTYPE {
        report(Violation::MalformedManifest(format!("unsupported dtype {:?}", manifest.dtype)));
    }
    if manifest.checksum_algorithm != CHECKSUM_ALGORITHM {
        report(Violation::MalformedManifest(format!(
            "unsupported checksum algorithm {:?}",
            manifest.checksum_algorithm
        )));
    }
    let (n, c) = (manifest.n_examples, manifest.n_classes);
    if let Err(e) = check_header(n, c, &manifest.epochs, &vec![0; n], None) {
        report(Violation::Header(e));
        if n == 0 || c < 2 {
            return Some(manifest);
        }
    }

    // Reads a file, checking presence, size and checksum.
    let read_checked = |file: &str, expected_len: u64, report: &mut dyn FnMut(Violation)| -> Option<Vec<u8>> {
        let path = dir.join(file);
        let actual = match fs::metadata(&path) {
            Ok(m) => m.len(),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                report(Violation::MissingFile(file.into()));
                return None;
            }
            Err(e) => {
                report(Violation::Io { file: file.into(), message: e.to_string() });
                return None;
            }
        };
        if actual != expected_len {
            report(Violation::SizeMismatch { file: file.into(), expected: expected_len, actual });
            return None;
        }
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                report(Violation::Io { file: file.into(), message: e.to_string() });
                return None;
            }
        };
        match manifest.checksums.get(file) {
            None => report(Violation::MissingChecksum(file.into())),
            Some(expected) => {
                let actual = checksum(&bytes);
                if &actual != expected {
                    report(Violation::ChecksumMismatch { file: file.into(), expected: expected.clone(), actual });
                }
            }
        }
        Some(bytes)
    };

    let mut label_files = vec![LABELS_FILE];
    if manifest.has_clean_labels {
        label_files.push(CLEAN_LABELS_FILE);
    }
    for file in label_files {
        if let Some(bytes) = read_checked(file, (n * 4) as u64, report) {
            for (index, label) in le_to_u32s(&bytes).into_iter().enumerate() {
                if label as usize >= c {
                    report(Violation::Header(fusekit_core::Error::LabelOutOfRange { index, label, classes: c }));
                }
            }
        }
    }

    for (k, &epoch) in manifest.epochs.iter().enumerate() {
        let file = epoch_file(epoch);
        let expected = (n * c * 4) as u64;
        if verify_data {
            if let Some(bytes) = read_checked(&file, expected, report) {
                let raw: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
                scan_rows(k, c, &raw, |error| report(Violation::Row { epoch, error }));
            }
        } else {
            match fs::metadata(dir.join(&file)) {
                Ok(m) if m.len() == expected => {}
                Ok(m) => report(Violation::SizeMismatch { file, expected, actual: m.len() }),
                Err(_) => report(Violation::MissingFile(file)),
            }
        }
    }
    Some(manifest)
}

/// Incremental, single-writer log writer. Data files are written as they
/// arrive; the manifest is written by [`LogWriter::finalize`], so an
/// interrupted run leaves a directory that fails validation.
#[derive(Debug)]
pub struct LogWriter {
    dir: PathBuf,
    n_examples: usize,
    n_classes: usize,
    has_clean_labels: bool,
    epochs: Vec<u64>,
    checksums: BTreeMap<String, String>,
}

impl LogWriter {
    pub fn create(
        dir: impl AsRef<Path>,
        n_classes: usize,
        labels: &[u32],
        clean_labels: Option<&[u32]>,
    ) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        check_header(labels.len(), n_classes, &[0], labels, clean_labels)?;
        fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        let mut writer = LogWriter {
            dir,
            n_examples: labels.len(),
            n_classes,
            has_clean_labels: clean_labels.is_some(),
            epochs: Vec::new(),
            checksums: BTreeMap::new(),
        };
        writer.write_file(LABELS_FILE, &u32s_to_le(labels))?;
        if let Some(clean) = clean_labels {
            writer.write_file(CLEAN_LABELS_FILE, &u32s_to_le(clean))?;
        }
        Ok(writer)
    }

    fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let path = self.dir.join(name);
        let mut file = File::create(&path).map_err(|e| StoreError::io(&path, e))?;
        file.write_all(bytes).map_err(|e| StoreError::io(&path, e))?;
        file.sync_data().map_err(|e| StoreError::io(&path, e))?;
        self.checksums.insert(name.to_string(), checksum(bytes));
        Ok(())
    }

    /// Appends one checkpoint. Values are stored bit-exactly; rows must already
    /// satisfy the probability invariants.
    pub fn append(&mut self, epoch: u64, matrix: &[f32]) -> Result<(), StoreError> {
        if self.epochs.last().is_some_and(|&last| epoch <= last) {
            return Err(fusekit_core::Error::EpochsNotIncreasing.into());
        }
        let expected = self.n_examples * self.n_classes;
        if matrix.len() != expected {
            return Err(fusekit_core::Error::LengthMismatch { what: "checkpoint matrix", expected, actual: matrix.len() }.into());
        }
        let index = self.epochs.len();
        let mut first = None;
        scan_rows(index, self.n_classes, matrix, |e| {
            first.get_or_insert(e);
        });
        if let Some(e) = first {
            return Err(e.into());
        }
        self.write_file(&epoch_file(epoch), &f32s_to_le(matrix))?;
        self.epochs.push(epoch);
        Ok(())
    }

    /// Writes the manifest. Fails if no checkpoint was appended.
    pub fn finalize(self) -> Result<PathBuf, StoreError> {
        if self.epochs.is_empty() {
            return Err(fusekit_core::Error::NoCheckpoints.into());
        }
        let manifest = Manifest {
            format_version: FORMAT_VERSION,
            n_examples: self.n_examples,
            n_classes: self.n_classes,
            epochs: self.epochs,
            has_clean_labels: self.has_clean_labels,
            dtype: DTYPE.into(),
            checksum_algorithm: CHECKSUM_ALGORITHM.into(),
            checksums: self.checksums,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        let tmp = self.dir.join("manifest.json.tmp");
        fs::write(&tmp, text).map_err(|e| StoreError::io(&tmp, e))?;
        let path = self.dir.join(MANIFEST_FILE);
        fs::rename(&tmp, &path).map_err(|e| StoreError::io(&path, e))?;
        Ok(self.dir)
    }
}

/// Writes a complete log from in-memory matrices.
pub fn write_log(
    dir: impl AsRef<Path>,
    n_classes: usize,
    epochs: &[u64],
    labels: &[u32],
    clean_labels: Option<&[u32]>,
    matrices: &[Vec<f32>],
) -> Result<PathBuf, StoreError> {
    if epochs.len() != matrices.len() {
        return Err(StoreError::Writer(format!("{} epochs but {} matrices", epochs.len(), matrices.len())));
    }
    let mut writer = LogWriter::create(dir, n_classes, labels, clean_labels)?;
    for (&epoch, m) in epochs.iter().zip(matrices) {
        writer.append(epoch, m)?;
    }
    writer.finalize()
}

/// Streams any source to disk, one checkpoint at a time, preserving raw values.
pub fn write_source<L: CheckpointSource + ?Sized>(dir: impl AsRef<Path>, log: &L) -> Result<PathBuf, StoreError> {
    let mut writer = LogWriter::create(dir, log.n_classes(), log.labels(), log.clean_labels())?;
    for (k, &epoch) in log.epochs().iter().enumerate() {
        log.with_checkpoint(k, |cp| writer.append(epoch, cp.raw()))??;
    }
    writer.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use fusekit_core::fixtures::t4;
    use fusekit_core::MemoryLog;

    fn t4_dir() -> (tempfile::TempDir, PathBuf) {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("t4");
        write_source(&dir, &t4()).unwrap();
        (tmp, dir)
    }

    #[test]
    fn minimal_log_opens() {
        let (_tmp, dir) = t4_dir();
        let log = open_log(&dir).unwrap();
        assert_eq!(log.n_checkpoints(), 3);
        assert_eq!(log.labels(), &[0, 1, 0, 1]);
        assert!(validate_log(&dir).is_valid());
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (_tmp, dir) = t4_dir();
        let log = open_log(&dir).unwrap();
        let mem = t4();
        for k in 0..3 {
            let a: Vec<u32> = log.with_checkpoint(k, |cp| cp.raw().iter().map(|v| v.to_bits()).collect()).unwrap();
            let b: Vec<u32> = mem.checkpoints()[k].raw().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(log.epochs(), mem.epochs());
    }

    #[test]
    fn write_rejects_bad_inputs() {
        let tmp = tempfile::tempdir().unwrap();
        let err = write_log(tmp.path().join("a"), 2, &[1], &[0, 2], None, &[vec![0.5; 4]]).unwrap_err();
        assert!(matches!(err, StoreError::Invalid(fusekit_core::Error::LabelOutOfRange { label: 2, .. })));
        let err = write_log(tmp.path().join("b"), 2, &[], &[0, 1], None, &[]).unwrap_err();
        assert!(matches!(err, StoreError::Invalid(fusekit_core::Error::NoCheckpoints)));
        let err = write_log(tmp.path().join("c"), 2, &[1], &[0], None, &[vec![0.5, 0.49]]).unwrap_err();
        assert!(matches!(err, StoreError::Invalid(fusekit_core::Error::RowSum { .. })));
    }

    #[test]
    fn writer_rejects_repeated_epoch_and_wrong_shape() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = LogWriter::create(tmp.path(), 2, &[0], None).unwrap();
        w.append(1, &[0.5, 0.5]).unwrap();
        assert!(w.append(1, &[0.5, 0.5]).is_err());
        assert!(w.append(2, &[0.2, 0.3, 0.5]).is_err());
    }

    #[test]
    fn interrupted_write_is_incomplete() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = LogWriter::create(tmp.path(), 2, &[0], None).unwrap();
        w.append(1, &[0.5, 0.5]).unwrap();
        drop(w);
        assert_eq!(validate_log(tmp.path()).violations, vec![Violation::MissingManifest]);
        assert!(matches!(open_log(tmp.path()), Err(StoreError::Corrupt(Violation::MissingManifest))));
    }

    #[test]
    fn corrupted_row_is_reported_with_coordinates() {
        let (_tmp, dir) = t4_dir();
        let path = dir.join("epoch_2.bin");
        let mut bytes = fs::read(&path).unwrap();
        // row 3, class 0 of epoch 2: 0.1 -> 0.2
        bytes[24..28].copy_from_slice(&0.2f32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        let report = validate_log(&dir);
        let rows: Vec<_> = report.violations.iter().filter(|v| matches!(v, Violation::Row { .. })).collect();
        assert_eq!(rows.len(), 1);
        assert!(matches!(rows[0], Violation::Row { epoch: 2, error: fusekit_core::Error::RowSum { checkpoint: 1, row: 3, .. } }));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::ChecksumMismatch { .. })));
        assert!(matches!(open_log(&dir), Err(StoreError::Corrupt(_))));
    }

    #[test]
    fn truncated_file_reports_sizes() {
        let (_tmp, dir) = t4_dir();
        let path = dir.join("epoch_3.bin");
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..20]).unwrap();
        let report = validate_log(&dir);
        assert_eq!(
            report.violations,
            vec![Violation::SizeMismatch { file: "epoch_3.bin".into(), expected: 32, actual: 20 }]
        );
        assert!(report.to_string().contains("size mismatch"));
    }

    #[test]
    fn epochs_out_of_order_in_manifest() {
        let (_tmp, dir) = t4_dir();
        let path = dir.join(MANIFEST_FILE);
        let mut m: Manifest = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        m.epochs = vec![3, 2, 1];
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        let err = open_log(&dir).unwrap_err();
        assert!(matches!(err, StoreError::Corrupt(Violation::Header(fusekit_core::Error::EpochsNotIncreasing))));
        assert!(err.to_string().contains("epochs not strictly increasing"));
    }

    #[test]
    fn lazy_reads_touch_one_file() {
        let (_tmp, dir) = t4_dir();
        let log = open_log(&dir).unwrap();
        assert_eq!(log.read_counts(), vec![0, 0, 0]);
        log.with_checkpoint(1, |_| ()).unwrap();
        assert_eq!(log.read_counts(), vec![0, 1, 0]);
        assert_eq!(log.meter().peak_bytes(), 32);
        assert_eq!(log.meter().live_bytes(), 0);
    }

    #[test]
    fn renormalizes_near_unit_rows_on_load() {
        let tmp = tempfile::tempdir().unwrap();
        write_log(tmp.path(), 2, &[1], &[0], None, &[vec![0.5004, 0.5001]]).unwrap();
        let log = open_log(tmp.path()).unwrap();
        let sum = log.with_checkpoint(0, |cp| cp.prob(0, 0) + cp.prob(0, 1)).unwrap();
        assert!((sum - 1.0).abs() < 1e-12);
        let mem = MemoryLog::from_matrices(2, vec![1], vec![0], None, vec![vec![0.5004, 0.5001]]).unwrap();
        assert_eq!(log.with_checkpoint(0, |cp| cp.clone()).unwrap(), mem.checkpoints()[0]);
    }
}
