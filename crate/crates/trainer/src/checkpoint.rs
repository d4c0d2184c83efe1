//! Binary checkpoint container.
//!
//! Layout (little-endian): magic `S2CK` | version u32 | section count u32 |
//! sections | CRC-32 of every preceding byte (u32). Each section is
//! name length u16 | UTF-8 name | payload length u64 | payload CRC-32 u32 |
//! payload. Weight payloads are raw f32 values in manifest order; the
//! manifest sections list the named shapes as JSON.

use std::path::Path;

use sar2rgb_sargen::{Discriminator, Generator, Param, ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::train::{Checkpoint, SamplerState};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"S2CK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunState {
    step: u64,
    generator_adam_step: u64,
    discriminator_adam_step: Option<u64>,
    sampler: Option<SamplerState>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: [usize; 4],
}

fn manifest(ps: &ParamStore<f32>) -> Vec<u8> {
    let entries: Vec<ManifestEntry> = ps
        .iter()
        .map(|p| ManifestEntry {
            name: p.name.clone(),
            shape: p.value.shape(),
        })
        .collect();
    serde_json::to_vec(&entries).expect("manifest serializes")
}

fn blob<'a>(tensors: impl Iterator<Item = &'a Tensor<f32>>) -> Vec<u8> {
    let mut out = Vec::new();
    for t in tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Writer {
    buf: Vec<u8>,
    count: u32,
}

impl Writer {
    fn section(&mut self, name: &str, payload: &[u8]) {
        self.buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        self.buf.extend_from_slice(name.as_bytes());
        self.buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        self.buf.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
        self.buf.extend_from_slice(payload);
        self.count += 1;
    }

    fn model(&mut self, prefix: &str, ps: &ParamStore<f32>, adam: &AdamState) {
        self.section(&format!("{prefix}.manifest"), &manifest(ps));
        self.section(&format!("{prefix}.weights"), &blob(ps.iter().map(|p| &p.value)));
        self.section(&format!("{prefix}.adam_m"), &blob(adam.m.iter()));
        self.section(&format!("{prefix}.adam_v"), &blob(adam.v.iter()));
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut w = Writer {
        buf: Vec::new(),
        count: 0,
    };
    let state = RunState {
        step: ck.step,
        generator_adam_step: ck.generator_adam.step,
        discriminator_adam_step: ck.discriminator_adam.as_ref().map(|a| a.step),
        sampler: ck.sampler.clone(),
    };
    w.section("config", &serde_json::to_vec(&ck.config).expect("config serializes"));
    w.section("state", &serde_json::to_vec(&state).expect("state serializes"));
    w.model("generator", ck.generator.params(), &ck.generator_adam);
    if let (Some(d), Some(a)) = (&ck.discriminator, &ck.discriminator_adam) {
        w.model("discriminator", d.params(), a);
    }
    let mut out = Vec::with_capacity(w.buf.len() + 16);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&w.count.to_le_bytes());
    out.extend_from_slice(&w.buf);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("section runs past the end of the file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn floats(payload: &[u8]) -> Vec<f32> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

struct Sections<'a>(Vec<(String, &'a [u8])>);

impl<'a> Sections<'a> {
    fn get(&self, name: &str) -> Option<&'a [u8]> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, p)| *p)
    }

    fn require(&self, name: &str) -> Result<&'a [u8]> {
        self.get(name)
            .ok_or_else(|| Error::Format(format!("missing section {name}")))
    }

    fn json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        serde_json::from_slice(self.require(name)?)
            .map_err(|e| Error::Format(format!("section {name}: {e}")))
    }

    /// Splits a flat f32 payload into tensors shaped like `shapes`.
    fn tensors(&self, name: &str, shapes: &[[usize; 4]]) -> Result<Vec<Tensor<f32>>> {
        let data = floats(self.require(name)?);
        let want: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
        if data.len() != want || self.require(name)?.len() % 4 != 0 {
            return Err(Error::Format(format!(
                "section {name} holds {} values, manifest needs {want}",
                data.len()
            )));
        }
        let mut out = Vec::with_capacity(shapes.len());
        let mut at = 0;
        for &s in shapes {
            let n: usize = s.iter().product();
            out.push(Tensor::from_vec(s, data[at..at + n].to_vec())?);
            at += n;
        }
        Ok(out)
    }

    fn model(&self, prefix: &str, adam_step: u64) -> Result<(ParamStore<f32>, AdamState)> {
        let entries: Vec<ManifestEntry> = self.json(&format!("{prefix}.manifest"))?;
        let shapes: Vec<[usize; 4]> = entries.iter().map(|e| e.shape).collect();
        let weights = self.tensors(&format!("{prefix}.weights"), &shapes)?;
        let m = self.tensors(&format!("{prefix}.adam_m"), &shapes)?;
        let v = self.tensors(&format!("{prefix}.adam_v"), &shapes)?;
        let params = ParamStore::from_params(
            entries
                .into_iter()
                .zip(weights)
                .map(|(e, value)| Param { name: e.name, value })
                .collect(),
        );
        Ok((
            params,
            AdamState {
                step: adam_step,
                m,
                v,
            },
        ))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("missing S2CK magic".into()));
    }
    if bytes.len() < 8 {
        return Err(Error::Checksum { section: None });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    if bytes.len() < 16 {
        return Err(Error::Checksum { section: None });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
        return Err(Error::Checksum { section: None });
    }
    let mut r = Reader { bytes: body, pos: 8 };
    let count = r.u32()?;
    let mut sections = Vec::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("section name is not UTF-8".into()))?
            .to_string();
        let plen = usize::try_from(r.u64()?)
            .map_err(|_| Error::Format("section too large".into()))?;
        let crc = r.u32()?;
        let payload = r.take(plen)?;
        if crc32fast::hash(payload) != crc {
            return Err(Error::Checksum { section: Some(name) });
        }
        sections.push((name, payload));
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes after the last section".into()));
    }
    let s = Sections(sections);
    let config: TrainConfig = s.json("config")?;
    let state: RunState = s.json("state")?;
    let (gp, generator_adam) = s.model("generator", state.generator_adam_step)?;
    let generator = Generator::from_params(config.generator.clone(), gp)?;
    let (discriminator, discriminator_adam) = match state.discriminator_adam_step {
        Some(step) => {
            let (dp, adam) = s.model("discriminator", step)?;
            let d_in = config.generator.in_channels + config.generator.out_channels;
            (
                Some(Discriminator::from_params(config.discriminator.clone(), d_in, dp)?),
                Some(adam),
            )
        }
        None => (None, None),
    };
    if discriminator.is_some() != config.loss.uses_gan() {
        return Err(Error::Format(
            "discriminator presence does not match the loss configuration".into(),
        ));
    }
    Ok(Checkpoint {
        config,
        step: state.step,
        generator,
        discriminator,
        generator_adam,
        discriminator_adam,
        sampler: state.sampler,
    })
}

pub fn save_checkpoint(ck: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ck)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
