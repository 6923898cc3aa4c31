use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CpiError, Result};
use crate::grid::SampledGrid;
use crate::scenario::ScenarioConfig;
use crate::speckle::FrameStack;

use super::{Cursor, Header};

const MAGIC: &[u8; 8] = b"CPIFRMS\0";
const VERSION: u32 = 1;
const CHUNK_TAG: &[u8; 4] = b"CHNK";
const INDEX_TAG: &[u8; 4] = b"INDX";
const END_MAGIC: &[u8; 8] = b"CPIFEND\0";
const CHUNK_HEADER: usize = 4 + 8 + 4;

pub const DEFAULT_CHUNK_FRAMES: usize = 256;

// Layout: magic, u32 version, u32 header length, header text, SHA-256 of the
// header text; then chunks (tag, u64 first frame, u32 count, S_a frames then
// S_b frames as f32 LE, SHA-256 of the chunk); then an index (tag, u64 count,
// per chunk u64 offset / u64 first frame / u32 count, SHA-256), the u64 index
// offset and an end marker. A file without a valid index is still readable
// by scanning its chunks, which is how interrupted runs are resumed.

#[derive(Debug, Clone, Copy, PartialEq)]
struct ChunkEntry {
    offset: u64,
    first_frame: u64,
    count: u32,
}

#[derive(Debug, Clone, PartialEq)]
struct Meta {
    grid_a: SampledGrid,
    grid_b: SampledGrid,
    seed: u64,
    first_frame: u64,
    scenario: ScenarioConfig,
    mask_spec: Option<String>,
    chunk_frames: usize,
}

impl Meta {
    fn of(stack: &FrameStack, chunk_frames: usize) -> Self {
        Meta {
            grid_a: stack.grid_a,
            grid_b: stack.grid_b,
            seed: stack.seed,
            first_frame: stack.first_frame,
            scenario: stack.scenario,
            mask_spec: stack.mask_spec.clone(),
            chunk_frames,
        }
    }

    fn header(&self) -> Header {
        let mut h = Header::default();
        h.set("kind", "frame-stack");
        h.set_grid("grid_a", &self.grid_a);
        h.set_grid("grid_b", &self.grid_b);
        h.set("seed", self.seed);
        h.set("first_frame", self.first_frame);
        h.set("chunk_frames", self.chunk_frames);
        if let Some(m) = &self.mask_spec {
            h.set("mask", m);
        }
        h.set_scenario(&self.scenario);
        h
    }

    fn from_header(h: &Header) -> Result<Self> {
        if h.get("kind")? != "frame-stack" {
            return Err(CpiError::Format("not a frame stack".into()));
        }
        Ok(Meta {
            grid_a: h.grid("grid_a")?,
            grid_b: h.grid("grid_b")?,
            seed: h.parse("seed")?,
            first_frame: h.parse("first_frame")?,
            scenario: h.scenario()?,
            mask_spec: h.opt("mask").map(str::to_string),
            chunk_frames: h.parse("chunk_frames")?,
        })
    }

    fn frame_len(&self) -> usize {
        self.grid_a.len() + self.grid_b.len()
    }

    fn chunk_bytes(&self, count: u32) -> u64 {
        (CHUNK_HEADER + 4 * self.frame_len() * count as usize + 32) as u64
    }

    fn stack(&self, first_frame: u64, fa: Vec<f32>, fb: Vec<f32>) -> Result<FrameStack> {
        FrameStack::new(
            self.grid_a,
            self.grid_b,
            fa,
            fb,
            self.seed,
            first_frame,
            self.scenario,
            self.mask_spec.clone(),
        )
    }
}

fn read_preamble(file: &mut File) -> Result<(Meta, u64)> {
    let mut fixed = [0u8; 16];
    file.read_exact(&mut fixed)
        .map_err(|_| CpiError::Format("frame stack too short".into()))?;
    let mut c = Cursor::new(&fixed);
    if c.take(8)? != MAGIC {
        return Err(CpiError::Format("not a frame stack (bad magic)".into()));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(CpiError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let hlen = c.u32()? as usize;
    let mut text = vec![0u8; hlen];
    let mut sum = [0u8; 32];
    file.read_exact(&mut text)
        .and_then(|_| file.read_exact(&mut sum))
        .map_err(|_| CpiError::Format("truncated frame stack header".into()))?;
    if Sha256::digest(&text).as_slice() != sum {
        return Err(CpiError::Checksum("frame stack header".into()));
    }
    let text = String::from_utf8(text).map_err(|_| CpiError::Format("header is not UTF-8".into()))?;
    let meta = Meta::from_header(&Header::from_text(&text)?)?;
    Ok((meta, (16 + hlen + 32) as u64))
}

/// Reads one chunk at `offset`; `None` if it is truncated or corrupt.
fn read_chunk_at(file: &mut File, meta: &Meta, offset: u64, len: u64) -> Result<Option<(ChunkEntry, Vec<u8>)>> {
    if offset + CHUNK_HEADER as u64 > len {
        return Ok(None);
    }
    file.seek(SeekFrom::Start(offset))?;
    let mut head = [0u8; CHUNK_HEADER];
    file.read_exact(&mut head)?;
    let mut c = Cursor::new(&head);
    if c.take(4)? != CHUNK_TAG {
        return Ok(None);
    }
    let first_frame = c.u64()?;
    let count = c.u32()?;
    let total = meta.chunk_bytes(count);
    if count == 0 || offset + total > len {
        return Ok(None);
    }
    let mut rest = vec![0u8; total as usize - CHUNK_HEADER];
    file.read_exact(&mut rest)?;
    let (payload, sum) = rest.split_at(rest.len() - 32);
    let mut h = Sha256::new();
    h.update(head);
    h.update(payload);
    if h.finalize().as_slice() != sum {
        return Ok(None);
    }
    rest.truncate(rest.len() - 32);
    Ok(Some((
        ChunkEntry {
            offset,
            first_frame,
            count,
        },
        rest,
    )))
}

/// Walks the chunk sequence from `start`, stopping at the first invalid or
/// discontinuous chunk. Returns the valid entries and the offset after them.
fn scan_chunks(file: &mut File, meta: &Meta, start: u64) -> Result<(Vec<ChunkEntry>, u64)> {
    let len = file.metadata()?.len();
    let mut entries = Vec::new();
    let mut offset = start;
    let mut next = meta.first_frame;
    while let Some((e, _)) = read_chunk_at(file, meta, offset, len)? {
        if e.first_frame != next {
            break;
        }
        next += e.count as u64;
        offset += meta.chunk_bytes(e.count);
        entries.push(e);
    }
    Ok((entries, offset))
}

fn read_index(file: &mut File, meta: &Meta, data_start: u64) -> Result<Option<Vec<ChunkEntry>>> {
    let len = file.metadata()?.len();
    if len < data_start + 16 {
        return Ok(None);
    }
    file.seek(SeekFrom::Start(len - 16))?;
    let mut tail = [0u8; 16];
    file.read_exact(&mut tail)?;
    if &tail[8..] != END_MAGIC {
        return Ok(None);
    }
    let index_at = u64::from_le_bytes(tail[..8].try_into().unwrap());
    if index_at < data_start || index_at + 12 + 32 + 16 > len {
        return Ok(None);
    }
    file.seek(SeekFrom::Start(index_at))?;
    let mut buf = vec![0u8; (len - 16 - index_at) as usize];
    file.read_exact(&mut buf)?;
    let (body, sum) = buf.split_at(buf.len() - 32);
    if Sha256::digest(body).as_slice() != sum {
        return Ok(None);
    }
    let mut c = Cursor::new(body);
    if c.take(4)? != INDEX_TAG {
        return Ok(None);
    }
    let n = c.u64()? as usize;
    let mut entries = Vec::with_capacity(n);
    let mut next = meta.first_frame;
    for _ in 0..n {
        let e = ChunkEntry {
            offset: c.u64()?,
            first_frame: c.u64()?,
            count: c.u32()?,
        };
        if e.first_frame != next {
            return Err(CpiError::Format("frame stack index is not contiguous".into()));
        }
        next += e.count as u64;
        entries.push(e);
    }
    Ok(Some(entries))
}

/// Streaming reader over a persisted frame stack.
pub struct FrameStackReader {
    file: File,
    meta: Meta,
    entries: Vec<ChunkEntry>,
    indexed: bool,
}

impl FrameStackReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = File::open(path.as_ref())?;
        let (meta, data_start) = read_preamble(&mut file)?;
        let (entries, indexed) = match read_index(&mut file, &meta, data_start)? {
            Some(e) => (e, true),
            None => {
                log::warn!("{}: no valid index, scanning chunks", path.as_ref().display());
                (scan_chunks(&mut file, &meta, data_start)?.0, false)
            }
        };
        Ok(FrameStackReader {
            file,
            meta,
            entries,
            indexed,
        })
    }

    /// Whether the file was closed cleanly with an index.
    pub fn is_complete(&self) -> bool {
        self.indexed
    }

    pub fn n_frames(&self) -> usize {
        self.entries.iter().map(|e| e.count as usize).sum()
    }

    pub fn n_chunks(&self) -> usize {
        self.entries.len()
    }

    pub fn seed(&self) -> u64 {
        self.meta.seed
    }

    pub fn first_frame(&self) -> u64 {
        self.meta.first_frame
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.meta.scenario
    }

    pub fn mask_spec(&self) -> Option<&str> {
        self.meta.mask_spec.as_deref()
    }

    pub fn grids(&self) -> (SampledGrid, SampledGrid) {
        (self.meta.grid_a, self.meta.grid_b)
    }

    pub fn read_chunk(&mut self, i: usize) -> Result<FrameStack> {
        let e = *self
            .entries
            .get(i)
            .ok_or_else(|| CpiError::Domain(format!("chunk {i} out of range")))?;
        let len = self.file.metadata()?.len();
        let (_, payload) = read_chunk_at(&mut self.file, &self.meta, e.offset, len)?
            .ok_or_else(|| CpiError::Checksum(format!("frame stack chunk {i}")))?;
        let floats: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let split = e.count as usize * self.meta.grid_a.len();
        let fb = floats[split..].to_vec();
        let mut fa = floats;
        fa.truncate(split);
        self.meta.stack(e.first_frame, fa, fb)
    }

    pub fn read_all(&mut self) -> Result<FrameStack> {
        let mut stack = self.meta.stack(self.meta.first_frame, Vec::new(), Vec::new())?;
        for i in 0..self.entries.len() {
            stack.extend(&self.read_chunk(i)?)?;
        }
        Ok(stack)
    }
}

/// Appends frames in fixed-size chunks and writes the index on `finish`.
pub struct FrameStackWriter {
    out: BufWriter<File>,
    path: PathBuf,
    meta: Meta,
    entries: Vec<ChunkEntry>,
    offset: u64,
}

impl FrameStackWriter {
    /// Creates the file with `stack`'s run metadata and writes its frames.
    pub fn create(path: impl AsRef<Path>, stack: &FrameStack, chunk_frames: usize) -> Result<Self> {
        if chunk_frames == 0 {
            return Err(CpiError::Domain("chunk size must be positive".into()));
        }
        let meta = Meta::of(stack, chunk_frames);
        let text = meta.header().to_text();
        let mut out = BufWriter::new(File::create(path.as_ref())?);
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(text.len() as u32).to_le_bytes())?;
        out.write_all(text.as_bytes())?;
        out.write_all(&Sha256::digest(text.as_bytes()))?;
        let mut w = FrameStackWriter {
            out,
            path: path.as_ref().to_path_buf(),
            meta,
            entries: Vec::new(),
            offset: (16 + text.len() + 32) as u64,
        };
        w.append(stack)?;
        Ok(w)
    }

    /// Reopens an existing stack for appending. Any index and any partial or
    /// corrupt trailing chunk are dropped.
    pub fn resume(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = OpenOptions::new().read(true).write(true).open(path)?;
        let (meta, data_start) = read_preamble(&mut file)?;
        let (entries, end) = scan_chunks(&mut file, &meta, data_start)?;
        file.set_len(end)?;
        file.seek(SeekFrom::Start(end))?;
        Ok(FrameStackWriter {
            out: BufWriter::new(file),
            path: path.to_path_buf(),
            meta,
            entries,
            offset: end,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.entries.iter().map(|e| e.count as usize).sum()
    }

    /// Substream id of the next frame to be written.
    pub fn next_frame(&self) -> u64 {
        self.meta.first_frame + self.n_frames() as u64
    }

    pub fn seed(&self) -> u64 {
        self.meta.seed
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.meta.scenario
    }

    pub fn mask_spec(&self) -> Option<&str> {
        self.meta.mask_spec.as_deref()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, stack: &FrameStack) -> Result<()> {
        if stack.grid_a != self.meta.grid_a
            || stack.grid_b != self.meta.grid_b
            || stack.seed != self.meta.seed
            || stack.scenario != self.meta.scenario
        {
            return Err(CpiError::Domain("frames belong to a different run".into()));
        }
        if stack.first_frame != self.next_frame() {
            return Err(CpiError::Domain(format!(
                "frames start at {} but the stack continues at {}",
                stack.first_frame,
                self.next_frame()
            )));
        }
        let (na, nb) = (self.meta.grid_a.len(), self.meta.grid_b.len());
        let n = stack.n_frames();
        let mut start = 0;
        while start < n {
            let count = self.meta.chunk_frames.min(n - start);
            let mut bytes = Vec::with_capacity(CHUNK_HEADER + 4 * count * (na + nb));
            bytes.extend_from_slice(CHUNK_TAG);
            bytes.extend_from_slice(&(stack.first_frame + start as u64).to_le_bytes());
            bytes.extend_from_slice(&(count as u32).to_le_bytes());
            for v in &stack.frames_a()[start * na..(start + count) * na] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            for v in &stack.frames_b()[start * nb..(start + count) * nb] {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            let sum = Sha256::digest(&bytes);
            self.out.write_all(&bytes)?;
            self.out.write_all(&sum)?;
            self.entries.push(ChunkEntry {
                offset: self.offset,
                first_frame: stack.first_frame + start as u64,
                count: count as u32,
            });
            self.offset += (bytes.len() + 32) as u64;
            start += count;
        }
        // chunks reach the disk as they complete, so an interrupted run can resume
        self.out.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        let mut idx = Vec::with_capacity(12 + 20 * self.entries.len());
        idx.extend_from_slice(INDEX_TAG);
        idx.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            idx.extend_from_slice(&e.offset.to_le_bytes());
            idx.extend_from_slice(&e.first_frame.to_le_bytes());
            idx.extend_from_slice(&e.count.to_le_bytes());
        }
        self.out.write_all(&idx)?;
        self.out.write_all(&Sha256::digest(&idx))?;
        self.out.write_all(&self.offset.to_le_bytes())?;
        self.out.write_all(END_MAGIC)?;
        self.out.flush()?;
        self.out.get_ref().sync_all()?;
        Ok(())
    }
}

pub fn write_frame_stack(path: impl AsRef<Path>, stack: &FrameStack, chunk_frames: usize) -> Result<()> {
    FrameStackWriter::create(path, stack, chunk_frames)?.finish()
}

pub fn read_frame_stack(path: impl AsRef<Path>) -> Result<FrameStack> {
    FrameStackReader::open(path)?.read_all()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack(first: u64, n: usize) -> FrameStack {
        let ga = SampledGrid::centered(4, 1e-5).unwrap();
        let gb = SampledGrid::centered(3, 7e-5).unwrap();
        let fa = (0..n * 4).map(|i| (first as usize * 4 + i) as f32 * 0.5).collect();
        let fb = (0..n * 3).map(|i| (first as usize * 3 + i) as f32 * 0.25).collect();
        FrameStack::new(ga, gb, fa, fb, 11, first, ScenarioConfig::paper_setup(), Some("slits:n=1,a=1e-5,d=1e-5".into()))
            .unwrap()
    }

    #[test]
    fn round_trip_across_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.frames");
        let s = stack(0, 10);
        write_frame_stack(&p, &s, 3).unwrap();
        let mut r = FrameStackReader::open(&p).unwrap();
        assert!(r.is_complete());
        assert_eq!(r.n_chunks(), 4);
        assert_eq!(r.read_chunk(1).unwrap(), stack(3, 3));
        assert_eq!(r.read_all().unwrap(), s);
    }

    #[test]
    fn resume_after_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.frames");
        let mut w = FrameStackWriter::create(&p, &stack(0, 5), 2).unwrap();
        w.append(&stack(5, 3)).unwrap();
        drop(w);
        // cut into the last chunk, as if the process died mid-write
        let len = std::fs::metadata(&p).unwrap().len();
        OpenOptions::new().write(true).open(&p).unwrap().set_len(len - 7).unwrap();

        let r = FrameStackReader::open(&p).unwrap();
        assert!(!r.is_complete());
        assert_eq!(r.n_frames(), 7);

        let mut w = FrameStackWriter::resume(&p).unwrap();
        assert_eq!(w.next_frame(), 7);
        w.append(&stack(7, 3)).unwrap();
        w.finish().unwrap();
        let full = read_frame_stack(&p).unwrap();
        assert_eq!(full.n_frames(), 10);
        assert_eq!(full, stack(0, 10));
    }

    #[test]
    fn discontinuous_append_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = FrameStackWriter::create(dir.path().join("s"), &stack(0, 2), 4).unwrap();
        assert!(w.append(&stack(5, 1)).is_err());
    }

    #[test]
    fn corrupted_chunk_fails_indexed_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.frames");
        write_frame_stack(&p, &stack(0, 4), 2).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        bytes[16 + hlen + 32 + CHUNK_HEADER + 1] ^= 0xff;
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_frame_stack(&p), Err(CpiError::Checksum(_))));
    }
}
