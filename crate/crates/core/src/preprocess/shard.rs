//! `.mms` shard files: magic `MMS1`, a little-endian `u32` format version,
//! then one zlib stream of length-prefixed records.
//!
//! Record payload (all integers little-endian):
//!
//! ```text
//! u16 id_len | id bytes (utf-8) | u32 z_index | u8 has_tumor (0 no, 1 yes, 2 unknown)
//! u8 geometry tag
//!   0 padded : u32 offset_y, offset_x, native_h, native_w
//!   1 cropped: u32 y0, y1, x0, x1, native_h, native_w
//! u32 channels | u32 height | u32 width | channels*height*width f32 values
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::image::{Box2d, Image};
use crate::scalar::Scalar;

use super::canvas::Geometry;
use super::SliceSample;

pub const SHARD_MAGIC: &[u8; 4] = b"MMS1";
pub const SHARD_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

/// Serializes one record payload (without the length prefix).
pub fn encode_record<F: Scalar>(sample: &SliceSample<F>) -> Vec<u8> {
    let (c, h, w) = sample.channels.shape();
    let id = sample.patient_id.as_bytes();
    let mut out = Vec::with_capacity(64 + id.len() + 4 * c * h * w);
    out.extend_from_slice(&(id.len() as u16).to_le_bytes());
    out.extend_from_slice(id);
    put_u32(&mut out, sample.z_index);
    out.push(match sample.has_tumor {
        Some(false) => 0,
        Some(true) => 1,
        None => 2,
    });
    match sample.geometry {
        Geometry::Padded {
            offset_y,
            offset_x,
            native_h,
            native_w,
        } => {
            out.push(0);
            for v in [offset_y, offset_x, native_h, native_w] {
                put_u32(&mut out, v);
            }
        }
        Geometry::Cropped {
            source,
            native_h,
            native_w,
        } => {
            out.push(1);
            for v in [source.y0, source.y1, source.x0, source.x1, native_h, native_w] {
                put_u32(&mut out, v);
            }
        }
    }
    for v in [c, h, w] {
        put_u32(&mut out, v);
    }
    for v in sample.channels.data() {
        out.extend_from_slice(&v.as_f32().to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Data("truncated shard record".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn decode_record<F: Scalar>(payload: &[u8]) -> Result<SliceSample<F>> {
    let mut cur = Cursor { buf: payload, pos: 0 };
    let id_len = cur.u16()? as usize;
    let patient_id = String::from_utf8(cur.take(id_len)?.to_vec())
        .map_err(|_| Error::Data("patient id is not utf-8".into()))?;
    let z_index = cur.u32()?;
    let has_tumor = match cur.u8()? {
        0 => Some(false),
        1 => Some(true),
        2 => None,
        t => return Err(Error::Data(format!("bad has_tumor flag {t}"))),
    };
    let geometry = match cur.u8()? {
        0 => Geometry::Padded {
            offset_y: cur.u32()?,
            offset_x: cur.u32()?,
            native_h: cur.u32()?,
            native_w: cur.u32()?,
        },
        1 => Geometry::Cropped {
            source: Box2d {
                y0: cur.u32()?,
                y1: cur.u32()?,
                x0: cur.u32()?,
                x1: cur.u32()?,
            },
            native_h: cur.u32()?,
            native_w: cur.u32()?,
        },
        t => return Err(Error::Data(format!("bad geometry tag {t}"))),
    };
    let (c, h, w) = (cur.u32()?, cur.u32()?, cur.u32()?);
    let raw = cur.take(4 * c * h * w)?;
    let data = raw
        .chunks_exact(4)
        .map(|b| F::of(f32::from_le_bytes(b.try_into().unwrap()) as f64))
        .collect();
    if cur.pos != payload.len() {
        return Err(Error::Data("trailing bytes in shard record".into()));
    }
    Ok(SliceSample {
        patient_id,
        z_index,
        channels: Image::from_vec(c, h, w, data)?,
        geometry,
        has_tumor,
    })
}

/// Streaming writer for one shard file. Call [`ShardWriter::finish`] to flush.
pub struct ShardWriter {
    path: PathBuf,
    encoder: ZlibEncoder<BufWriter<File>>,
    records: usize,
}

impl ShardWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        file.write_all(SHARD_MAGIC)
            .and_then(|_| file.write_all(&SHARD_VERSION.to_le_bytes()))
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            encoder: ZlibEncoder::new(file, Compression::default()),
            records: 0,
        })
    }

    pub fn write_payload(&mut self, payload: &[u8]) -> Result<()> {
        self.encoder
            .write_all(&(payload.len() as u32).to_le_bytes())
            .and_then(|_| self.encoder.write_all(payload))
            .map_err(|e| Error::io(&self.path, e))?;
        self.records += 1;
        Ok(())
    }

    pub fn write<F: Scalar>(&mut self, sample: &SliceSample<F>) -> Result<()> {
        self.write_payload(&encode_record(sample))
    }

    pub fn finish(self) -> Result<usize> {
        let path = self.path;
        self.encoder
            .finish()
            .and_then(|mut w| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        Ok(self.records)
    }
}

/// Sequential reader over one shard file.
pub struct ShardReader<F> {
    path: PathBuf,
    decoder: ZlibDecoder<BufReader<File>>,
    done: bool,
    _scalar: std::marker::PhantomData<F>,
}

impl<F: Scalar> ShardReader<F> {
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut head = [0u8; 8];
        file.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
        if &head[..4] != SHARD_MAGIC {
            return Err(Error::Data(format!("{} is not an MMS1 shard", path.display())));
        }
        let version = u32::from_le_bytes(head[4..].try_into().unwrap());
        if version != SHARD_VERSION {
            return Err(Error::Data(format!(
                "{} has unsupported shard version {version}",
                path.display()
            )));
        }
        Ok(Self {
            path: path.to_path_buf(),
            decoder: ZlibDecoder::new(file),
            done: false,
            _scalar: std::marker::PhantomData,
        })
    }

    fn next_record(&mut self) -> Result<Option<SliceSample<F>>> {
        let mut len = [0u8; 4];
        // EOF exactly at a record boundary ends the stream.
        let mut filled = 0;
        while filled < 4 {
            let n = self
                .decoder
                .read(&mut len[filled..])
                .map_err(|e| Error::io(&self.path, e))?;
            if n == 0 {
                if filled == 0 {
                    return Ok(None);
                }
                return Err(Error::io(
                    &self.path,
                    io::Error::new(io::ErrorKind::UnexpectedEof, "truncated length prefix"),
                ));
            }
            filled += n;
        }
        let mut payload = vec![0u8; u32::from_le_bytes(len) as usize];
        self.decoder
            .read_exact(&mut payload)
            .map_err(|e| Error::io(&self.path, e))?;
        decode_record(&payload).map(Some)
    }
}

impl<F: Scalar> Iterator for ShardReader<F> {
    type Item = Result<SliceSample<F>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(s)) => Some(Ok(s)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn read_shard<F: Scalar>(path: &Path) -> Result<Vec<SliceSample<F>>> {
    ShardReader::open(path)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(id: &str, z: usize, geometry: Geometry, seed: f32) -> SliceSample<f32> {
        SliceSample {
            patient_id: id.into(),
            z_index: z,
            channels: Image::from_fn(4, 6, 5, |c, y, x| seed + (c * 30 + y * 5 + x) as f32 * 0.25),
            geometry,
            has_tumor: Some(z % 2 == 0),
        }
    }

    proptest! {
        #[test]
        fn record_round_trip(
            id in "[A-Za-z0-9_]{1,24}",
            z in 0usize..500,
            crop in any::<bool>(),
            y0 in 0usize..100, x0 in 0usize..100,
            seed in -100f32..100f32,
        ) {
            let geometry = if crop {
                Geometry::Cropped { source: Box2d { y0, y1: y0 + 7, x0, x1: x0 + 9 }, native_h: 240, native_w: 240 }
            } else {
                Geometry::Padded { offset_y: 8, offset_x: 8, native_h: 240, native_w: 240 }
            };
            let s = sample(&id, z, geometry, seed);
            let back: SliceSample<f32> = decode_record(&encode_record(&s)).unwrap();
            prop_assert_eq!(back, s);
        }
    }

    #[test]
    fn file_round_trip_and_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.mms");
        let g = Geometry::Padded { offset_y: 8, offset_x: 8, native_h: 240, native_w: 240 };
        let samples: Vec<_> = (0..5).map(|z| sample("P1", z, g, z as f32)).collect();
        let mut w = ShardWriter::create(&path).unwrap();
        for s in &samples {
            w.write(s).unwrap();
        }
        assert_eq!(w.finish().unwrap(), 5);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"MMS1");
        assert_eq!(read_shard::<f32>(&path).unwrap(), samples);

        let bad = dir.path().join("b.mms");
        std::fs::write(&bad, b"NOPE0000").unwrap();
        assert!(ShardReader::<f32>::open(&bad).is_err());
    }
}
