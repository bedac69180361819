//! On-disk bundle layout: `manifest.json` plus one binary file per sample.
//!
//! Sample file: 16-byte little-endian header `"PCUP" | version u32 | n_input u32 | dims u32`,
//! then `f32` coordinates, input block followed by target block
//! (`r · n_input` points, `r` from the manifest).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetBundle, Manifest, Method, PairSample};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Similarity};

pub const SAMPLE_MAGIC: [u8; 4] = *b"PCUP";
pub const SAMPLE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
struct SampleEntry {
    file: String,
    source_model: String,
    part_id: usize,
    method: Method,
    n_input: usize,
    n_target: usize,
    transform: Similarity,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    version: u32,
    #[serde(flatten)]
    manifest: Manifest,
    samples: Vec<SampleEntry>,
}

fn push_points(buf: &mut Vec<u8>, cloud: &PointCloud) {
    for p in cloud.points() {
        for c in p.to_array() {
            buf.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
}

pub fn encode_sample(sample: &PairSample) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 12 * (sample.input.len() + sample.target.len()));
    buf.extend_from_slice(&SAMPLE_MAGIC);
    buf.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(sample.input.len() as u32).to_le_bytes());
    buf.extend_from_slice(&3u32.to_le_bytes());
    push_points(&mut buf, &sample.input);
    push_points(&mut buf, &sample.target);
    buf
}

/// Decode a sample payload into `(input, target)`.
pub fn decode_sample(bytes: &[u8], r: usize, origin: &Path) -> Result<(PointCloud, PointCloud)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(origin, "truncated header"));
    }
    if bytes[..4] != SAMPLE_MAGIC {
        return Err(Error::format(origin, "bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != SAMPLE_VERSION {
        return Err(Error::format(origin, format!("unsupported version {version}")));
    }
    let n_input = word(8) as usize;
    if word(12) != 3 {
        return Err(Error::format(origin, format!("expected 3 dims, found {}", word(12))));
    }
    let n_target = n_input * r;
    let expected = HEADER_LEN + 12 * (n_input + n_target);
    if bytes.len() != expected {
        return Err(Error::format(
            origin,
            format!("payload is {} bytes, expected {expected}", bytes.len()),
        ));
    }
    let coords: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let points: Vec<Point3> = coords.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect();
    let (input, target) = points.split_at(n_input);
    let cloud = |v: &[Point3]| PointCloud::new(v.to_vec()).map_err(|e| Error::format(origin, e.to_string()));
    Ok((cloud(input)?, cloud(target)?))
}

fn sample_file(i: usize) -> String {
    format!("sample_{i:05}.bin")
}

/// Write a bundle into directory `dir` (created if missing).
pub fn write_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(bundle.samples.len());
    for (i, s) in bundle.samples.iter().enumerate() {
        let file = sample_file(i);
        let path = dir.join(&file);
        fs::write(&path, encode_sample(s)).map_err(|e| Error::io(&path, e))?;
        entries.push(SampleEntry {
            file,
            source_model: s.source_model.clone(),
            part_id: s.part_id,
            method: s.method,
            n_input: s.input.len(),
            n_target: s.target.len(),
            transform: s.transform,
        });
    }
    let doc = ManifestFile {
        version: SAMPLE_VERSION,
        manifest: bundle.manifest.clone(),
        samples: entries,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
    text.push('\n');
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_bundle(dir: &Path) -> Result<DatasetBundle> {
    let mpath = dir.join(MANIFEST);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let doc: ManifestFile = serde_json::from_str(&text).map_err(|e| Error::format(&mpath, e.to_string()))?;
    if doc.version != SAMPLE_VERSION {
        return Err(Error::format(&mpath, format!("unsupported version {}", doc.version)));
    }
    let r = doc.manifest.r;
    let n_in = doc.manifest.spec.input_points();
    let mut samples = Vec::with_capacity(doc.samples.len());
    for e in doc.samples {
        if e.n_input != n_in || e.n_target != n_in * r {
            return Err(Error::format(
                &mpath,
                format!("{}: counts {}/{} disagree with manifest", e.file, e.n_input, e.n_target),
            ));
        }
        let path = dir.join(&e.file);
        let bytes = fs::read(&path).map_err(|err| Error::io(&path, err))?;
        let (input, target) = decode_sample(&bytes, r, &path)?;
        if input.len() != e.n_input {
            return Err(Error::format(&path, "point count disagrees with manifest"));
        }
        samples.push(PairSample {
            input,
            target,
            transform: e.transform,
            source_model: e.source_model,
            method: e.method,
            part_id: e.part_id,
        });
    }
    Ok(DatasetBundle {
        manifest: doc.manifest,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, AsSpec, BuildSpec, SourceModel};
    use crate::rng::Rng;

    fn bundle() -> DatasetBundle {
        let mut rng = Rng::new(3);
        let sources: Vec<SourceModel> = (0..2)
            .map(|i| SourceModel {
                name: format!("m{i}"),
                cloud: PointCloud::new(
                    (0..600)
                        .map(|_| Point3::new(rng.normal(), rng.normal(), rng.uniform_in(-4.0, 4.0)))
                        .collect(),
                )
                .unwrap(),
            })
            .collect();
        build_dataset(&sources, BuildSpec::As(AsSpec::new(128, 4).unwrap()), 4, 17).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle();
        write_bundle(&b, dir.path()).unwrap();
        assert_eq!(read_bundle(dir.path()).unwrap(), b);
    }

    #[test]
    fn corrupted_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&bundle(), dir.path()).unwrap();
        let f = dir.path().join("sample_00000.bin");
        let mut bytes = fs::read(&f).unwrap();
        bytes[0] = b'X';
        fs::write(&f, bytes).unwrap();
        let err = read_bundle(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
    }

    #[test]
    fn truncated_payload_rejected() {
        let b = bundle();
        let bytes = encode_sample(&b.samples[0]);
        assert!(decode_sample(&bytes[..bytes.len() - 4], 4, Path::new("x")).is_err());
        assert!(decode_sample(&bytes[..10], 4, Path::new("x")).is_err());
        assert!(decode_sample(&bytes, 3, Path::new("x")).is_err());
    }

    #[test]
    fn manifest_count_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&bundle(), dir.path()).unwrap();
        let m = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&m)
            .unwrap()
            .replacen("\"n_input\": 32", "\"n_input\": 31", 1);
        fs::write(&m, text).unwrap();
        assert!(read_bundle(dir.path()).is_err());
    }
}
