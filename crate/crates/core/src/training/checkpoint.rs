use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::embeddings::EmbeddingTable;
use crate::error::{CheckpointFormatError, Error, Result};
use crate::networks::{JointModel, LstmClassifier};
use crate::numerics::{Matrix, NamedTensors, Parameters, RngState, Scalar};
use crate::text::Language;

use super::hyperparams::Hyperparams;

pub const MAGIC: &[u8; 4] = b"SNET";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Baseline,
    Joint,
}

impl ModelKind {
    fn tag(self) -> u8 {
        match self {
            ModelKind::Baseline => 0,
            ModelKind::Joint => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(ModelKind::Baseline),
            1 => Ok(ModelKind::Joint),
            t => Err(CheckpointFormatError::UnknownKind(t).into()),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Baseline => "baseline",
            ModelKind::Joint => "joint",
        })
    }
}

/// Serialized model: kind, hyperparameters, per-language vocabulary hashes and
/// every tensor (frozen embedding tables included as `embedding.<language>`).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub kind: ModelKind,
    pub hyperparams: Hyperparams,
    pub vocab_hashes: BTreeMap<Language, String>,
    pub tensors: NamedTensors<f32>,
}

fn embedding_name(language: Language) -> String {
    format!("embedding.{language}")
}

fn to_f32<T: Scalar>(named: NamedTensors<T>) -> NamedTensors<f32> {
    named.into_iter().map(|(k, v)| (k, v.convert())).collect()
}

impl Checkpoint {
    pub fn from_baseline<T: Scalar>(
        model: &LstmClassifier<T>,
        hyperparams: &Hyperparams,
        language: Language,
        table: &EmbeddingTable<T>,
    ) -> Self {
        Self::assemble(
            ModelKind::Baseline,
            model.to_named(),
            hyperparams,
            &[(language, table)],
        )
    }

    pub fn from_joint<T: Scalar>(
        model: &JointModel<T>,
        hyperparams: &Hyperparams,
        tables: &[(Language, &EmbeddingTable<T>)],
    ) -> Self {
        Self::assemble(ModelKind::Joint, model.to_named(), hyperparams, tables)
    }

    fn assemble<T: Scalar>(
        kind: ModelKind,
        named: NamedTensors<T>,
        hyperparams: &Hyperparams,
        tables: &[(Language, &EmbeddingTable<T>)],
    ) -> Self {
        let mut tensors = to_f32(named);
        let mut vocab_hashes = BTreeMap::new();
        for (lang, table) in tables {
            vocab_hashes.insert(*lang, table.vocab_hash());
            tensors.insert(embedding_name(*lang), table.vectors().convert());
        }
        Self {
            kind,
            hyperparams: hyperparams.clone(),
            vocab_hashes,
            tensors,
        }
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind.to_string(),
                found: self.kind.to_string(),
            })
        }
    }

    fn model_tensors(&self) -> NamedTensors<f32> {
        self.tensors
            .iter()
            .filter(|(k, _)| !k.starts_with("embedding."))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn baseline_model(&self) -> Result<LstmClassifier<f32>> {
        self.expect_kind(ModelKind::Baseline)?;
        let mut model =
            LstmClassifier::new(&self.hyperparams.lstm_config(), &mut RngState::new(0))?;
        model.load_named(&self.model_tensors())?;
        Ok(model)
    }

    pub fn joint_model(&self) -> Result<JointModel<f32>> {
        self.expect_kind(ModelKind::Joint)?;
        let mut model = JointModel::new(&self.hyperparams.joint_config(), &mut RngState::new(0))?;
        model.load_named(&self.model_tensors())?;
        Ok(model)
    }

    pub fn embedding(&self, language: Language) -> Option<&Matrix<f32>> {
        self.tensors.get(&embedding_name(language))
    }

    pub fn languages(&self) -> Vec<Language> {
        self.vocab_hashes.keys().copied().collect()
    }

    /// Fails unless `table` has the vocabulary this checkpoint was trained on.
    pub fn check_vocabulary<T: Scalar>(
        &self,
        language: Language,
        table: &EmbeddingTable<T>,
    ) -> Result<()> {
        let expected = self
            .vocab_hashes
            .get(&language)
            .ok_or_else(|| Error::NotFound(format!("checkpoint has no {language} embedding")))?;
        let found = table.vocab_hash();
        if *expected != found {
            return Err(Error::VocabularyMismatch {
                language: language.to_string(),
                expected: expected.clone(),
                found,
            });
        }
        Ok(())
    }

    /// Every tensor the kind and hyperparameters call for must be present
    /// with the right shape, and nothing else.
    fn validate(&self) -> Result<()> {
        self.hyperparams.validate()?;
        let skeleton: Vec<(String, (usize, usize))> = match self.kind {
            ModelKind::Baseline => {
                let m = LstmClassifier::<f32>::new(
                    &self.hyperparams.lstm_config(),
                    &mut RngState::new(0),
                )?;
                m.params()
                    .into_iter()
                    .map(|(n, t)| (n, t.shape()))
                    .collect()
            }
            ModelKind::Joint => {
                let m = JointModel::<f32>::new(
                    &self.hyperparams.joint_config(),
                    &mut RngState::new(0),
                )?;
                m.params()
                    .into_iter()
                    .map(|(n, t)| (n, t.shape()))
                    .collect()
            }
        };
        let mut expected: BTreeMap<String, Option<(usize, usize)>> =
            skeleton.into_iter().map(|(n, s)| (n, Some(s))).collect();
        for lang in self.vocab_hashes.keys() {
            expected.insert(embedding_name(*lang), None);
        }
        for name in self.tensors.keys() {
            if !expected.contains_key(name) {
                return Err(CheckpointFormatError::UnknownTensor(name.clone()).into());
            }
        }
        let mut offenders = Vec::new();
        for (name, shape) in &expected {
            match (self.tensors.get(name), shape) {
                (None, _) => offenders.push(format!("{name} (missing)")),
                (Some(t), Some(s)) if t.shape() != *s => {
                    offenders.push(format!("{name} (shape {:?}, expected {s:?})", t.shape()))
                }
                (Some(t), None) if t.cols() != self.hyperparams.embed_dim => {
                    offenders.push(format!(
                        "{name} (width {}, expected {})",
                        t.cols(),
                        self.hyperparams.embed_dim
                    ))
                }
                _ => {}
            }
        }
        if offenders.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompatibleCheckpoint { offenders })
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.kind.tag());
        put_str(&mut out, &self.hyperparams.to_string());
        put_u32(&mut out, self.vocab_hashes.len());
        for (lang, hash) in &self.vocab_hashes {
            put_str(&mut out, lang.as_str());
            put_str(&mut out, hash);
        }
        put_u32(&mut out, self.tensors.len());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            put_u32(&mut out, 2);
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(CheckpointFormatError::BadMagic.into());
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(CheckpointFormatError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            }
            .into());
        }
        let kind = ModelKind::from_tag(r.take(1, "kind")?[0])?;
        let hp_text = r.string("hyperparameters")?;
        let hyperparams = Hyperparams::from_text(Hyperparams::baseline(), &hp_text)
            .map_err(|e| CheckpointFormatError::Header(e.to_string()))?;
        let mut vocab_hashes = BTreeMap::new();
        for _ in 0..r.u32("vocabulary count")? {
            let lang: Language = r
                .string("language")?
                .parse()
                .map_err(|e: Error| CheckpointFormatError::Header(e.to_string()))?;
            vocab_hashes.insert(lang, r.string("vocabulary hash")?);
        }
        let mut tensors = NamedTensors::new();
        for _ in 0..r.u32("tensor count")? {
            let name = r.string("tensor name")?;
            let rank = r.u32("tensor rank")?;
            if rank != 2 {
                return Err(CheckpointFormatError::Header(format!(
                    "{name}: rank {rank}, expected 2"
                ))
                .into());
            }
            let rows = r.u64("tensor dims")? as usize;
            let cols = r.u64("tensor dims")? as usize;
            let count = rows
                .checked_mul(cols)
                .filter(|n| n.checked_mul(4).is_some())
                .ok_or_else(|| CheckpointFormatError::Header(format!("{name}: dims overflow")))?;
            let raw = r.take(count * 4, "tensor data")?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if tensors
                .insert(name.clone(), Matrix::from_vec(rows, cols, data)?)
                .is_some()
            {
                return Err(
                    CheckpointFormatError::Header(format!("duplicate tensor {name}")).into(),
                );
            }
        }
        if r.pos != bytes.len() {
            return Err(CheckpointFormatError::TrailingBytes(bytes.len() - r.pos).into());
        }
        let ckpt = Self {
            kind,
            hyperparams,
            vocab_hashes,
            tensors,
        };
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Writes to a sibling temporary file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("snet.tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(CheckpointFormatError::Truncated(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        let b = self.take(8, what)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(u64::from_le_bytes(a))
    }

    fn string(&mut self, what: &'static str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| CheckpointFormatError::Utf8(what).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_hp() -> Hyperparams {
        Hyperparams {
            embed_dim: 4,
            hidden: 3,
            layers: 2,
            hops: 2,
            attention_hidden: 5,
            fc_hidden: 6,
            ..Hyperparams::baseline()
        }
    }

    fn table(seed: u64, words: &[&str]) -> EmbeddingTable<f32> {
        let vectors =
            crate::numerics::init_uniform_xavier(words.len(), 4, &mut RngState::new(seed)).unwrap();
        EmbeddingTable::new(words.iter().map(|w| w.to_string()).collect(), vectors).unwrap()
    }

    fn baseline_ckpt() -> Checkpoint {
        let hp = small_hp();
        let model = LstmClassifier::<f32>::new(&hp.lstm_config(), &mut RngState::new(1)).unwrap();
        Checkpoint::from_baseline(&model, &hp, Language::Hindi, &table(2, &["a", "b", "c"]))
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ckpt = baseline_ckpt();
        let bytes = ckpt.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ckpt);
        assert_eq!(back.to_bytes(), bytes);
        let model = back.baseline_model().unwrap();
        assert_eq!(model.to_named().len() + 1, back.tensors.len());

        let mut hp = small_hp();
        hp.hidden = 2;
        let joint = JointModel::<f32>::new(&hp.joint_config(), &mut RngState::new(3)).unwrap();
        let tables = [table(4, &["x"]), table(5, &["y", "z"])];
        let ckpt = Checkpoint::from_joint(
            &joint,
            &hp,
            &[
                (Language::Hindi, &tables[0]),
                (Language::Bengali, &tables[1]),
            ],
        );
        let back = Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap();
        assert_eq!(back.joint_model().unwrap(), joint);
        assert_eq!(back.languages(), vec![Language::Hindi, Language::Bengali]);
    }

    #[test]
    fn truncation_detected() {
        let bytes = baseline_ckpt().to_bytes();
        let err = Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).unwrap_err();
        assert!(
            matches!(err, Error::Checkpoint(CheckpointFormatError::Truncated(_))),
            "{err}"
        );
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            Checkpoint::from_bytes(&extra),
            Err(Error::Checkpoint(CheckpointFormatError::TrailingBytes(1)))
        ));
    }

    #[test]
    fn header_corruption() {
        let mut bytes = baseline_ckpt().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Checkpoint(CheckpointFormatError::BadMagic))
        ));
        let mut bytes = baseline_ckpt().to_bytes();
        bytes[4] = 9;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Checkpoint(CheckpointFormatError::VersionMismatch {
                found: 9,
                ..
            }))
        ));
        let mut bytes = baseline_ckpt().to_bytes();
        bytes[8] = 7;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Checkpoint(CheckpointFormatError::UnknownKind(7)))
        ));
    }

    #[test]
    fn unknown_and_missing_tensors() {
        let mut ckpt = baseline_ckpt();
        ckpt.tensors
            .insert("head.extra".into(), Matrix::zeros(1, 1));
        assert!(matches!(
            Checkpoint::from_bytes(&ckpt.to_bytes()),
            Err(Error::Checkpoint(CheckpointFormatError::UnknownTensor(n))) if n == "head.extra"
        ));
        let mut ckpt = baseline_ckpt();
        ckpt.tensors.remove("head.bias");
        match Checkpoint::from_bytes(&ckpt.to_bytes()) {
            Err(Error::IncompatibleCheckpoint { offenders }) => {
                assert_eq!(offenders, vec!["head.bias (missing)".to_string()])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kind_mismatch() {
        let ckpt = baseline_ckpt();
        assert!(matches!(
            ckpt.joint_model(),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn vocabulary_check() {
        let ckpt = baseline_ckpt();
        assert!(ckpt
            .check_vocabulary(Language::Hindi, &table(9, &["a", "b", "c"]))
            .is_ok());
        assert!(matches!(
            ckpt.check_vocabulary(Language::Hindi, &table(9, &["a", "b", "d"])),
            Err(Error::VocabularyMismatch { .. })
        ));
        assert!(ckpt
            .check_vocabulary(Language::Bengali, &table(9, &["a"]))
            .is_err());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.snet");
        let ckpt = baseline_ckpt();
        ckpt.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ckpt);
        assert!(matches!(
            Checkpoint::load(&dir.path().join("missing.snet")),
            Err(Error::Io { .. })
        ));
    }
}
