//! Single-file binary model checkpoints.
//!
//! Little-endian layout, in order:
//!
//! ```text
//! magic      8 bytes  b"RAUDMDL\0"
//! version    u8       1
//! kind       u8       0 userknn, 1 itemknn, 2 bpr, 3 wrmf, 4 identity
//! seed       u64
//! config     u32 length + UTF-8 key=value lines (hyperparameter snapshot)
//! users      u32 count + count × u32 ids
//! items      u32 count + count × u32 ids
//! params     kind-specific (below)
//! ```
//!
//! KNN params: `user_based` u8, `k_neighbors` u32, list count u32, then per
//! list a u32 length and (u32 index, f64 similarity) pairs, then the per-user
//! train item lists in the same shape. MF params: `d` u32 followed by the
//! user factors, item factors, user biases and item biases as raw f64 runs.
//! Identity params: genre count u32, then per-user mixes and per-item genre
//! vectors as f64 runs.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{IdentityParams, KnnParams, MfParams, ModelHyper, ModelKind, Params, TrainedModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RAUDMDL\0";
const VERSION: u8 = 1;

fn kind_byte(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::UserKnn => 0,
        ModelKind::ItemKnn => 1,
        ModelKind::Bpr => 2,
        ModelKind::Wrmf => 3,
        ModelKind::IdentityOracle => 4,
    }
}

fn kind_from_byte(b: u8) -> Result<ModelKind> {
    Ok(match b {
        0 => ModelKind::UserKnn,
        1 => ModelKind::ItemKnn,
        2 => ModelKind::Bpr,
        3 => ModelKind::Wrmf,
        4 => ModelKind::IdentityOracle,
        other => {
            return Err(Error::Checkpoint(format!(
                "unknown model kind byte {other}"
            )))
        }
    })
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    fn u32s(&mut self, vs: &[u32]) {
        self.u32(vs.len() as u32);
        for &v in vs {
            self.u32(v);
        }
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u32(b.len() as u32);
        self.buf.extend_from_slice(b);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn u32s(&mut self) -> Result<Vec<u32>> {
        let n = self.u32()? as usize;
        (0..n).map(|_| self.u32()).collect()
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

pub fn save_model(path: &Path, model: &TrainedModel) -> Result<()> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u8(VERSION);
    w.u8(kind_byte(model.kind));
    w.u64(model.seed);
    w.bytes(model.hyper.snapshot_text().as_bytes());
    w.u32s(&model.users);
    w.u32s(&model.items);
    match &model.params {
        Params::Knn(knn) => {
            w.u8(u8::from(knn.user_based));
            w.u32(knn.k_neighbors as u32);
            w.u32(knn.neighbors.len() as u32);
            for list in &knn.neighbors {
                w.u32(list.len() as u32);
                for &(idx, sim) in list {
                    w.u32(idx);
                    w.f64(sim);
                }
            }
            w.u32(knn.user_items.len() as u32);
            for items in &knn.user_items {
                w.u32s(items);
            }
        }
        Params::Mf(mf) => {
            w.u32(mf.d as u32);
            w.f64s(&mf.user_factors);
            w.f64s(&mf.item_factors);
            w.f64s(&mf.user_bias);
            w.f64s(&mf.item_bias);
        }
        Params::Identity(id) => {
            let dim = id.prefs.first().map_or(0, Vec::len);
            w.u32(dim as u32);
            for p in &id.prefs {
                w.f64s(p);
            }
            for v in &id.item_vecs {
                w.f64s(v);
            }
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&w.buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { buf: &buf, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic header".into()));
    }
    let version = r.u8()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let kind = kind_from_byte(r.u8()?)?;
    let seed = r.u64()?;
    let config = std::str::from_utf8(r.bytes()?)
        .map_err(|_| Error::Checkpoint("config snapshot is not UTF-8".into()))?
        .to_string();
    let hyper = parse_hyper_snapshot(&config)?;
    let users = r.u32s()?;
    let items = r.u32s()?;
    let (n_users, n_items) = (users.len(), items.len());

    let params = match kind {
        ModelKind::UserKnn | ModelKind::ItemKnn => {
            let user_based = r.u8()? != 0;
            let k_neighbors = r.u32()? as usize;
            let n_lists = r.u32()? as usize;
            let mut neighbors = Vec::with_capacity(n_lists);
            for _ in 0..n_lists {
                let len = r.u32()? as usize;
                let mut list = Vec::with_capacity(len);
                for _ in 0..len {
                    let idx = r.u32()?;
                    let sim = r.f64()?;
                    list.push((idx, sim));
                }
                neighbors.push(list);
            }
            let n_user_lists = r.u32()? as usize;
            let mut user_items = Vec::with_capacity(n_user_lists);
            for _ in 0..n_user_lists {
                user_items.push(r.u32s()?);
            }
            Params::Knn(KnnParams::finalize(
                user_based,
                k_neighbors,
                neighbors,
                user_items,
            ))
        }
        ModelKind::Bpr | ModelKind::Wrmf => {
            let d = r.u32()? as usize;
            Params::Mf(MfParams {
                d,
                user_factors: r.f64s(n_users * d)?,
                item_factors: r.f64s(n_items * d)?,
                user_bias: r.f64s(n_users)?,
                item_bias: r.f64s(n_items)?,
            })
        }
        ModelKind::IdentityOracle => {
            let dim = r.u32()? as usize;
            let mut prefs = Vec::with_capacity(n_users);
            for _ in 0..n_users {
                prefs.push(r.f64s(dim)?);
            }
            let mut item_vecs = Vec::with_capacity(n_items);
            for _ in 0..n_items {
                item_vecs.push(r.f64s(dim)?);
            }
            Params::Identity(IdentityParams { prefs, item_vecs })
        }
    };
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes after params".into()));
    }
    Ok(TrainedModel::assemble(
        kind, seed, hyper, users, items, params,
    ))
}

fn parse_hyper_snapshot(text: &str) -> Result<ModelHyper> {
    let mut hyper = ModelHyper::default();
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        fn parsed<T: std::str::FromStr>(line: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad hyperparameter line {line:?}")))
        }
        match key {
            "knn_neighbors" => hyper.knn_neighbors = parsed(line, value)?,
            "bpr_factors" => hyper.bpr_factors = parsed(line, value)?,
            "bpr_learning_rate" => hyper.bpr_learning_rate = parsed(line, value)?,
            "bpr_reg" => hyper.bpr_reg = parsed(line, value)?,
            "bpr_epochs" => hyper.bpr_epochs = parsed(line, value)?,
            "wrmf_factors" => hyper.wrmf_factors = parsed(line, value)?,
            "wrmf_reg" => hyper.wrmf_reg = parsed(line, value)?,
            "wrmf_confidence_alpha" => hyper.wrmf_confidence_alpha = parsed(line, value)?,
            "wrmf_iterations" => hyper.wrmf_iterations = parsed(line, value)?,
            _ => {}
        }
    }
    Ok(hyper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::tiny_split;
    use crate::models::train;

    #[test]
    fn checkpoints_round_trip_for_every_kind() {
        let rows: Vec<(u32, u32)> = (1..=4u32)
            .flat_map(|u| (1..=3u32).map(move |i| (u, ((u + i) % 6) + 1)))
            .collect();
        let split = tiny_split(&rows, 6);
        let histories = crate::models::train_histories(&split);
        let hyper = ModelHyper {
            bpr_factors: 3,
            bpr_epochs: 4,
            wrmf_factors: 3,
            wrmf_iterations: 3,
            ..ModelHyper::default()
        };
        let dir = tempfile::tempdir().unwrap();
        for kind in [
            ModelKind::UserKnn,
            ModelKind::ItemKnn,
            ModelKind::Bpr,
            ModelKind::Wrmf,
            ModelKind::IdentityOracle,
        ] {
            let model = train(&split, kind, &hyper, 21).unwrap();
            let path = dir.path().join(format!("{}.mdl", kind.as_str()));
            save_model(&path, &model).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded.kind, model.kind);
            assert_eq!(loaded.seed, model.seed);
            assert_eq!(loaded.users, model.users);
            assert_eq!(loaded.items, model.items);
            for (&u, hist) in &histories {
                assert_eq!(
                    loaded.recommend_topk(u, 3, hist).unwrap(),
                    model.recommend_topk(u, 3, hist).unwrap(),
                    "{kind:?} scores changed across save/load"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.mdl");
        fs::write(&path, b"NOTAMODEL").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Checkpoint(_))));
    }
}
