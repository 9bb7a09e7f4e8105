//! `rawvid` container: a 24-byte little-endian header followed by the raw
//! frame bytes.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "RVID"
//!      4     4  u32 version (1)
//!      8     4  u32 T
//!     12     4  u32 H
//!     16     4  u32 W
//!     20     4  u32 C
//!     24     …  T·H·W·C bytes, frame-major, row-major, channel-interleaved
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{VideoFrames, VideoRecord};
use crate::error::{Error, Result};

pub const RAWVID_MAGIC: &[u8; 4] = b"RVID";
pub const RAWVID_VERSION: u32 = 1;
pub const RAWVID_HEADER_LEN: usize = 24;

pub fn write_rawvid(record: &VideoRecord, path: impl AsRef<Path>) -> Result<()> {
    let f = &record.frames;
    let mut buf = Vec::with_capacity(RAWVID_HEADER_LEN + f.data.len());
    buf.extend_from_slice(RAWVID_MAGIC);
    buf.extend_from_slice(&RAWVID_VERSION.to_le_bytes());
    for dim in [f.frames, f.height, f.width, f.channels] {
        let dim = u32::try_from(dim).map_err(|_| Error::Range(format!("dimension {dim} exceeds u32")))?;
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    buf.extend_from_slice(&f.data);
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_rawvid(path: impl AsRef<Path>) -> Result<VideoFrames> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    decode(&bytes)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<VideoFrames> {
    if bytes.len() < RAWVID_HEADER_LEN {
        return Err(Error::format(bytes.len() as u64, "truncated header"));
    }
    if &bytes[0..4] != RAWVID_MAGIC {
        return Err(Error::format(0, format!("bad magic {:?}", String::from_utf8_lossy(&bytes[0..4]))));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let version = word(1);
    if version != RAWVID_VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let dims = [word(2), word(3), word(4), word(5)].map(|d| d as usize);
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(8, "dimension product overflows"))?;
    if dims.contains(&0) {
        return Err(Error::format(8, "zero dimension"));
    }
    let available = bytes.len() - RAWVID_HEADER_LEN;
    if available < payload {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated payload: expected {payload} bytes, found {available}"),
        ));
    }
    if available > payload {
        return Err(Error::format(
            (RAWVID_HEADER_LEN + payload) as u64,
            format!("{} trailing bytes", available - payload),
        ));
    }
    Ok(VideoFrames {
        frames: dims[0],
        height: dims[1],
        width: dims[2],
        channels: dims[3],
        data: bytes[RAWVID_HEADER_LEN..].to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{generate_dataset, DatasetConfig};

    fn record() -> VideoRecord {
        let cfg = DatasetConfig { num_train: 1, num_test: 1, frames: 8, ..Default::default() };
        generate_dataset(&cfg).unwrap().remove(0)
    }

    #[test]
    fn file_size_matches_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.rvid");
        let rec = record();
        write_rawvid(&rec, &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 24 + 8 * 32 * 32);
        assert_eq!(read_rawvid(&path).unwrap(), rec.frames);
    }

    #[test]
    fn header_is_little_endian() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.rvid");
        write_rawvid(&record(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..24], &[
            b'R', b'V', b'I', b'D', 1, 0, 0, 0, 8, 0, 0, 0, 32, 0, 0, 0, 32, 0, 0, 0, 1, 0, 0, 0
        ]);
    }

    #[test]
    fn format_errors_carry_offsets() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"XXXX");
        bytes.extend_from_slice(&[1, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 9, 9]);
        assert!(matches!(decode(&bytes), Err(Error::Format { offset: 0, .. })));

        bytes[..4].copy_from_slice(b"RVID");
        assert!(decode(&bytes).is_ok());

        assert!(matches!(decode(&bytes[..25]), Err(Error::Format { offset: 25, .. })));
        assert!(matches!(decode(&bytes[..10]), Err(Error::Format { offset: 10, .. })));

        let mut huge = bytes.clone();
        huge[8..24].copy_from_slice(&[0xff; 16]);
        assert!(matches!(decode(&huge), Err(Error::Format { offset: 8, .. })));

        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode(&v2), Err(Error::Format { offset: 4, .. })));
    }
}
