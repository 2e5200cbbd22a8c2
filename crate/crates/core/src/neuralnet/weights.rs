//! Binary weight files.
//!
//! Layout (little-endian): magic `CRNW`, u16 version, u32 tensor count, then
//! per tensor u16 name length, name bytes, u8 dtype (0 = f32, 1 = f64), u8
//! rank, u32 per dimension, and the data.

use std::io::{Read, Write};

use super::autograd::Tensor;
use super::model::{ArchConfig, ParamStore, RecommenderNet};
use super::NnError;

const MAGIC: &[u8; 4] = b"CRNW";
const VERSION: u16 = 1;
const ARCH_KEY: &str = "meta.arch";
const STATS: [&str; 2] = ["running_mean", "running_var"];

fn arch_tensor(a: &ArchConfig) -> Tensor {
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    let v = vec![
        a.in_shape.0 as f64,
        a.in_shape.1 as f64,
        a.in_shape.2 as f64,
        a.conv1_channels as f64,
        a.res1_channels as f64,
        a.res2_channels as f64,
        a.qk_reduction as f64,
        a.fc1_width as f64,
        a.n_classes as f64,
        b(a.use_cnn),
        b(a.use_resnet),
        b(a.use_attention),
    ];
    Tensor { shape: vec![v.len()], data: v }
}

fn arch_from(t: &Tensor) -> Result<ArchConfig, NnError> {
    let v = &t.data;
    if v.len() != 12 {
        return Err(NnError::BadWeights("architecture record".into()));
    }
    let u = |i: usize| v[i] as usize;
    Ok(ArchConfig {
        in_shape: (u(0), u(1), u(2)),
        conv1_channels: u(3),
        res1_channels: u(4),
        res2_channels: u(5),
        qk_reduction: u(6),
        fc1_width: u(7),
        n_classes: u(8),
        use_cnn: v[9] != 0.0,
        use_resnet: v[10] != 0.0,
        use_attention: v[11] != 0.0,
    })
}

pub fn write_weights<W: Write>(net: &RecommenderNet, mut w: W) -> Result<(), NnError> {
    let arch = arch_tensor(&net.arch);
    let mut entries: Vec<(&str, &Tensor)> = vec![(ARCH_KEY, &arch)];
    entries.extend(net.params.iter().map(|(k, p)| (k.as_str(), &p.tensor)));
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, t) in entries {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(1);
        buf.push(t.shape.len() as u8);
        for &d in &t.shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &x in &t.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let s = self.b.get(self.at..self.at + n).ok_or_else(|| NnError::BadWeights("truncated file".into()))?;
        self.at += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_weights<R: Read>(mut r: R) -> Result<RecommenderNet, NnError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { b: &bytes, at: 0 };
    if c.take(4)? != MAGIC {
        return Err(NnError::BadWeights("bad magic".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(NnError::BadWeights(format!("unsupported version {version}")));
    }
    let count = c.u32()?;
    let mut arch = None;
    let mut store = ParamStore::default();
    for _ in 0..count {
        let len = c.u16()? as usize;
        let name = String::from_utf8(c.take(len)?.to_vec()).map_err(|_| NnError::BadWeights("tensor name".into()))?;
        let dtype = c.u8()?;
        let rank = c.u8()? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| c.u32().map(|d| d as usize)).collect::<Result<_, _>>()?;
        let n: usize = shape.iter().product();
        let data: Vec<f64> = match dtype {
            0 => c.take(4 * n)?.chunks(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect(),
            1 => c.take(8 * n)?.chunks(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect(),
            d => return Err(NnError::BadWeights(format!("unknown dtype {d}"))),
        };
        let t = Tensor { shape, data };
        if name == ARCH_KEY {
            arch = Some(arch_from(&t)?);
        } else {
            let trainable = !STATS.iter().any(|s| name.ends_with(s));
            store.insert(&name, t, trainable);
        }
    }
    if c.at != bytes.len() {
        return Err(NnError::BadWeights("trailing bytes".into()));
    }
    let arch = arch.ok_or_else(|| NnError::BadWeights("missing architecture record".into()))?;
    let fresh = RecommenderNet::new(arch.clone(), 0)?;
    for (name, p) in fresh.params.iter() {
        match store.get(name) {
            Some(q) if q.tensor.shape == p.tensor.shape => {}
            _ => return Err(NnError::BadWeights(format!("tensor {name} missing or misshapen"))),
        }
    }
    if store.len() != fresh.params.len() {
        return Err(NnError::BadWeights("unexpected tensors".into()));
    }
    Ok(RecommenderNet { arch, params: store })
}
