//! Binary checkpoint format.
//!
//! ```text
//! b"PICONVAE" | u32 version | u32 len | UTF-8 "key=value\n" config
//! u32 tensor count | { u16 name len | name | u32 rank | u64 dims.. | f64 data.. }
//! ```
//! All integers and floats are little-endian.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use super::config::{ModelConfig, UpdateMode};
use super::network::PiConvAe;
use crate::neural::{Layer, LrSchedule, OptimizerState, Tensor};
use crate::telemetry::{MinMax, CHANNELS};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PICONVAE";
pub const VERSION: u32 = 1;

fn config_block(m: &PiConvAe) -> String {
    let c = &m.config;
    let mut s = String::new();
    let mut kv = |k: &str, v: &dyn core::fmt::Display| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("window", &c.window);
    kv("channels", &c.channels);
    kv("enc_filters", &format!("{},{}", c.enc_filters[0], c.enc_filters[1]));
    kv("enc_kernels", &format!("{},{}", c.enc_kernels[0], c.enc_kernels[1]));
    kv("bottleneck", &c.bottleneck);
    kv("dropout", &c.dropout);
    kv("leaky_slope", &c.leaky_slope);
    kv("lambda_reg", &c.lambda_reg);
    kv("alpha_d", &c.alpha_d);
    kv("alpha_phy", &c.alpha_phy);
    kv("physics_enabled", &c.physics_enabled);
    kv("epochs", &c.epochs);
    kv("batch_size", &c.batch_size);
    kv("patience", &c.patience);
    kv("steps_per_epoch", &c.steps_per_epoch.map_or("none".to_string(), |v| v.to_string()));
    kv("lr_initial", &c.lr.initial);
    kv("lr_decay", &c.lr.decay);
    kv("lr_interval", &c.lr.interval);
    kv("update", &c.update.name());
    kv("seed", &c.seed);
    kv("epoch", &m.epoch);
    for (tag, opt) in [("enc", &m.encoder_opt), ("dec", &m.decoder_opt)] {
        kv(&format!("opt.{tag}.step"), &opt.step);
        kv(&format!("opt.{tag}.schedule_index"), &opt.schedule_index);
    }
    for (tag, seq) in [("enc", &m.encoder), ("dec", &m.decoder)] {
        for (k, layer) in seq.layers.iter().enumerate() {
            if let Layer::BatchNorm(bn) = layer {
                kv(&format!("{tag}.{k}.batches_seen"), &bn.batches_seen);
            }
        }
    }
    s
}

fn tensors(m: &PiConvAe) -> Vec<(String, Tensor)> {
    let mut out: Vec<(String, Tensor)> = Vec::new();
    for (tag, seq) in [("enc", &m.encoder), ("dec", &m.decoder)] {
        out.extend(seq.named_params(tag).into_iter().map(|(n, t)| (n, t.clone())));
        out.extend(seq.named_buffers(tag).into_iter().map(|(n, t)| (n, t.clone())));
    }
    if let Some(mm) = &m.minmax {
        out.push(("norm.min".into(), Tensor::new(alloc::vec![CHANNELS], mm.min.to_vec()).expect("six values")));
        out.push(("norm.max".into(), Tensor::new(alloc::vec![CHANNELS], mm.max.to_vec()).expect("six values")));
    }
    for (tag, opt) in [("enc", &m.encoder_opt), ("dec", &m.decoder_opt)] {
        for (k, t) in opt.first.iter().enumerate() {
            out.push((format!("opt.{tag}.m.{k}"), t.clone()));
        }
        for (k, t) in opt.second.iter().enumerate() {
            out.push((format!("opt.{tag}.v.{k}"), t.clone()));
        }
    }
    out
}

/// Serializes parameters, buffers, normalization constants, optimizer state
/// and configuration.
pub fn encode(m: &PiConvAe) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(MAGIC);
    b.extend_from_slice(&VERSION.to_le_bytes());
    let cfg = config_block(m);
    b.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    b.extend_from_slice(cfg.as_bytes());
    let ts = tensors(m);
    b.extend_from_slice(&(ts.len() as u32).to_le_bytes());
    for (name, t) in ts {
        b.extend_from_slice(&(name.len() as u16).to_le_bytes());
        b.extend_from_slice(name.as_bytes());
        b.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            b.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    b
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Truncated(format!("{what} at byte {}", self.pos))),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

struct Config<'a>(BTreeMap<&'a str, &'a str>);

impl Config<'_> {
    fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.0.get(key).ok_or_else(|| Error::BadFormat(format!("missing config key {key}")))?;
        raw.parse().map_err(|_| Error::BadFormat(format!("config key {key}: cannot parse {raw:?}")))
    }

    fn pair(&self, key: &str) -> Result<[usize; 2]> {
        let raw: String = self.get(key)?;
        let mut it = raw.split(',').map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(a)), Some(Ok(b)), None) => Ok([a, b]),
            _ => Err(Error::BadFormat(format!("config key {key}: expected two integers"))),
        }
    }
}

fn parse_config(text: &str) -> Result<Config<'_>> {
    let mut map = BTreeMap::new();
    for line in text.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::BadFormat(format!("config line {line:?}")))?;
        map.insert(k, v);
    }
    Ok(Config(map))
}

fn model_config(c: &Config<'_>) -> Result<ModelConfig> {
    let steps: String = c.get("steps_per_epoch")?;
    let update: String = c.get("update")?;
    Ok(ModelConfig {
        window: c.get("window")?,
        channels: c.get("channels")?,
        enc_filters: c.pair("enc_filters")?,
        enc_kernels: c.pair("enc_kernels")?,
        bottleneck: c.get("bottleneck")?,
        dropout: c.get("dropout")?,
        leaky_slope: c.get("leaky_slope")?,
        lambda_reg: c.get("lambda_reg")?,
        alpha_d: c.get("alpha_d")?,
        alpha_phy: c.get("alpha_phy")?,
        physics_enabled: c.get("physics_enabled")?,
        epochs: c.get("epochs")?,
        batch_size: c.get("batch_size")?,
        patience: c.get("patience")?,
        steps_per_epoch: match steps.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| Error::BadFormat(format!("steps_per_epoch {s:?}")))?),
        },
        lr: LrSchedule {
            initial: c.get("lr_initial")?,
            decay: c.get("lr_decay")?,
            interval: c.get("lr_interval")?,
        },
        update: match update.as_str() {
            "alternating" => UpdateMode::Alternating,
            "joint" => UpdateMode::Joint,
            other => return Err(Error::BadFormat(format!("update mode {other:?}"))),
        },
        seed: c.get("seed")?,
    })
}

fn put(target: &mut Tensor, src: Tensor, name: &str) -> Result<()> {
    if target.shape() != src.shape() {
        return Err(Error::BadFormat(format!(
            "tensor {name} has shape {:?}, model expects {:?}",
            src.shape(),
            target.shape()
        )));
    }
    *target = src;
    Ok(())
}

fn restore_opt(opt: &mut OptimizerState, tag: &str, c: &Config<'_>, ts: &mut BTreeMap<String, Tensor>) -> Result<()> {
    opt.step = c.get(&format!("opt.{tag}.step"))?;
    opt.schedule_index = c.get(&format!("opt.{tag}.schedule_index"))?;
    for (kind, slots) in [("m", &mut opt.first), ("v", &mut opt.second)] {
        for (k, slot) in slots.iter_mut().enumerate() {
            let name = format!("opt.{tag}.{kind}.{k}");
            let t = ts.remove(&name).ok_or_else(|| Error::BadFormat(format!("missing tensor {name}")))?;
            put(slot, t, &name)?;
        }
    }
    Ok(())
}

/// Inverse of [`encode`].
pub fn decode(bytes: &[u8]) -> Result<PiConvAe> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadFormat("missing PICONVAE magic".into()));
    }
    r.pos = MAGIC.len();
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let len = r.u32("config length")? as usize;
    let text = core::str::from_utf8(r.take(len, "config block")?)
        .map_err(|_| Error::BadFormat("config block is not UTF-8".into()))?;
    let cfg = parse_config(text)?;

    let count = r.u32("tensor count")?;
    let mut ts: BTreeMap<String, Tensor> = BTreeMap::new();
    for _ in 0..count {
        let nlen = r.u16("tensor name length")? as usize;
        let name = core::str::from_utf8(r.take(nlen, "tensor name")?)
            .map_err(|_| Error::BadFormat("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32("tensor rank")? as usize;
        let mut shape = Vec::new();
        for _ in 0..rank {
            shape.push(usize::try_from(r.u64("tensor dim")?).map_err(|_| Error::BadFormat(format!("tensor {name}: dimension too large")))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::BadFormat(format!("tensor {name}: size overflow")))?;
        let raw = r.take(n, &format!("data of tensor {name}"))?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let t = Tensor::new(shape, data)?;
        if ts.insert(name.clone(), t).is_some() {
            return Err(Error::BadFormat(format!("duplicate tensor {name}")));
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::BadFormat(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let mut m = PiConvAe::new(model_config(&cfg)?)?;
    m.epoch = cfg.get("epoch")?;
    for (tag, seq) in [("enc", &mut m.encoder), ("dec", &mut m.decoder)] {
        // params of every layer first, then buffers, as in `tensors`
        let seq_names: Vec<String> = seq
            .named_params(tag)
            .into_iter()
            .chain(seq.named_buffers(tag))
            .map(|(n, _)| n)
            .collect();
        let mut k = 0;
        for layer in seq.layers.iter_mut() {
            for t in layer.params_mut() {
                let name = &seq_names[k];
                let src = ts.remove(name).ok_or_else(|| Error::BadFormat(format!("missing tensor {name}")))?;
                put(t, src, name)?;
                k += 1;
            }
        }
        for (li, layer) in seq.layers.iter_mut().enumerate() {
            if let Layer::BatchNorm(bn) = layer {
                bn.batches_seen = cfg.get(&format!("{tag}.{li}.batches_seen"))?;
            }
            for t in layer.buffers_mut() {
                let name = &seq_names[k];
                let src = ts.remove(name).ok_or_else(|| Error::BadFormat(format!("missing tensor {name}")))?;
                put(t, src, name)?;
                k += 1;
            }
        }
    }
    match (ts.remove("norm.min"), ts.remove("norm.max")) {
        (Some(lo), Some(hi)) if lo.len() == CHANNELS && hi.len() == CHANNELS => {
            let mut mm = MinMax {
                min: [0.0; CHANNELS],
                max: [0.0; CHANNELS],
            };
            mm.min.copy_from_slice(lo.data());
            mm.max.copy_from_slice(hi.data());
            m = m.with_minmax(mm)?;
        }
        (None, None) => {}
        _ => return Err(Error::BadFormat("incomplete normalization tensors".into())),
    }
    restore_opt(&mut m.encoder_opt, "enc", &cfg, &mut ts)?;
    restore_opt(&mut m.decoder_opt, "dec", &cfg, &mut ts)?;
    if let Some(name) = ts.keys().next() {
        return Err(Error::BadFormat(format!("unexpected tensor {name}")));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Mode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> PiConvAe {
        let mm = MinMax {
            min: [0.9, 0.1, -0.2, -0.6, 0.1, 0.0],
            max: [1.1, 1.5, 0.1, 0.2, 1.2, 0.6],
        };
        let mut m = PiConvAe::new(ModelConfig {
            enc_filters: [4, 3],
            bottleneck: 4,
            steps_per_epoch: Some(3),
            ..ModelConfig::default()
        })
        .unwrap()
        .with_minmax(mm)
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::full(&[4, 16, 6], 0.4);
        m.forward(&x, Mode::Train, &mut rng).unwrap();
        m.epoch = 3;
        m.encoder_opt.step = 11;
        m.decoder_opt.schedule_index = 2;
        m.encoder_opt.first[0].data_mut()[0] = 0.125;
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = tiny();
        let back = decode(&encode(&m)).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode(&back), encode(&m));
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let bytes = encode(&tiny());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::BadFormat(_))));
        let mut v2 = bytes.clone();
        v2[8..12].copy_from_slice(&2u32.to_le_bytes());
        assert_eq!(decode(&v2).unwrap_err(), Error::Version { found: 2, expected: 1 });
        for cut in [3, 10, 20, bytes.len() / 2, bytes.len() - 1] {
            let e = decode(&bytes[..cut]).unwrap_err();
            assert!(matches!(e, Error::Truncated(_) | Error::BadFormat(_)), "{cut}: {e:?}");
        }
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode(&long), Err(Error::BadFormat(_))));
    }
}
