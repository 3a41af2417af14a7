//! Frozen feature encoders.
//!
//! Both encoders are deterministic seeded linear maps that are *never*
//! trained: raw view tokens are lifted into the model width with offset
//! and range columns pre-scaled into a unit range, and instructions are
//! parsed into attribute ids, one-hot encoded, lifted, and L2-normalized.
//! The instruction templates are closed and invertible over the vocabulary.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::numkit::{matmul_nt, Matrix};
use crate::rng::rng_for;
use crate::worldsim::{attr_embedding, Difficulty, Observation, Vocab, D_ATTR, D_FEAT};

const ENC_VIEW_TAG: u64 = 0xf0de;
const ENC_INSTR_TAG: u64 = 0x1857;

#[derive(Debug, Clone, PartialEq)]
pub enum EncodeError {
    /// A word in the instruction is outside the closed vocabulary.
    UnknownWord(String),
    /// The instruction does not match any template.
    Template(String),
}

impl core::fmt::Display for EncodeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EncodeError::UnknownWord(w) => write!(f, "word not in vocabulary: {w:?}"),
            EncodeError::Template(t) => write!(f, "instruction does not match a template: {t:?}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EncodeError {}

/// Attributes recovered from an instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstructionAttrs {
    pub target_color: usize,
    pub target_kind: usize,
    pub via: Option<(usize, usize)>,
}

impl InstructionAttrs {
    pub fn difficulty(&self) -> Difficulty {
        if self.via.is_some() {
            Difficulty::Hard
        } else {
            Difficulty::Easy
        }
    }
}

/// Frozen (untrained) encoder weights. Constructed from a seed; excluded
/// from checkpoints and optimizer state by design.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenEncoders {
    /// d × D_FEAT lift for view tokens, offset/range columns pre-scaled.
    pub view_lift: Matrix,
    /// d_l × onehot_dim lift for instructions.
    pub instr_lift: Matrix,
    pub obs_scale: f64,
}

/// Width of the raw instruction feature row: target and via attribute
/// embedding blocks plus a two-way difficulty flag. Independent of
/// vocabulary size because attributes are embedded, not one-hot.
pub fn instr_feat_dim() -> usize {
    4 * D_ATTR + 2
}

impl FrozenEncoders {
    // `_vocab` is kept in the signature so vocabulary-dependent features can
    // come back without an API break; the current feature layout is
    // attribute-embedded and vocabulary-size independent.
    pub fn new(d: usize, d_l: usize, _vocab: &Vocab, obs_scale: f64, seed: u64) -> Self {
        let mut vr = rng_for(seed, &[ENC_VIEW_TAG]);
        let std = 1.0 / libm::sqrt(D_FEAT as f64);
        let mut view_lift = Matrix::randn(d, D_FEAT, std, &mut vr);
        // Offsets and range occupy the trailing four columns and arrive in
        // meters; fold the 1/obs_scale normalization into the frozen weights.
        for r in 0..d {
            for c in 2 * D_ATTR..D_FEAT {
                *view_lift.at_mut(r, c) /= obs_scale;
            }
        }
        let mut ir = rng_for(seed, &[ENC_INSTR_TAG]);
        let n = instr_feat_dim();
        let instr_lift = Matrix::randn(d_l, n, 1.0 / libm::sqrt(n as f64), &mut ir);
        FrozenEncoders {
            view_lift,
            instr_lift,
            obs_scale,
        }
    }

    /// Concatenated raw bytes of all frozen weights (frozen-ness checks).
    pub fn byte_fingerprint(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for m in [&self.view_lift, &self.instr_lift] {
            for v in &m.data {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        out
    }
}

/// Lift all five raw view token matrices into model width (rows preserved).
pub fn encode_observation(obs: &Observation, enc: &FrozenEncoders) -> [Matrix; 5] {
    core::array::from_fn(|v| matmul_nt(&obs.views[v], &enc.view_lift))
}

fn lookup(word: &str, list: &[String]) -> Result<usize, EncodeError> {
    list.iter()
        .position(|w| w == word)
        .ok_or_else(|| EncodeError::UnknownWord(word.to_string()))
}

fn parse_descriptor(desc: &str, vocab: &Vocab) -> Result<(usize, usize), EncodeError> {
    let mut it = desc.split(' ');
    let (c, k) = match (it.next(), it.next(), it.next()) {
        (Some(c), Some(k), None) => (c, k),
        _ => return Err(EncodeError::Template(desc.to_string())),
    };
    Ok((lookup(c, &vocab.colors)?, lookup(k, &vocab.kinds)?))
}

/// Invert the instruction templates back to attribute ids.
pub fn parse_instruction(text: &str, vocab: &Vocab) -> Result<InstructionAttrs, EncodeError> {
    let body = text
        .strip_prefix("Fly to the ")
        .and_then(|t| t.strip_suffix('.'))
        .ok_or_else(|| EncodeError::Template(text.to_string()))?;
    if let Some((via_part, tgt_part)) = body.split_once(", then continue to the ") {
        let via = parse_descriptor(via_part, vocab)?;
        let (tc, tk) = parse_descriptor(tgt_part, vocab)?;
        Ok(InstructionAttrs {
            target_color: tc,
            target_kind: tk,
            via: Some(via),
        })
    } else {
        let (tc, tk) = parse_descriptor(body, vocab)?;
        Ok(InstructionAttrs {
            target_color: tc,
            target_kind: tk,
            via: None,
        })
    }
}

/// Raw instruction features, laid out as [target color embed | target kind
/// embed | via color embed | via kind embed | easy flag | hard flag]. The
/// attribute blocks reuse the same global embedding tables the view tokens
/// carry, so instruction–landmark matching is a fixed linear alignment the
/// reasoner can learn once, rather than a per-pair lookup it would have to
/// memorize. Via blocks are all-zero for easy episodes.
pub fn instruction_features(attrs: &InstructionAttrs) -> Matrix {
    let mut m = Matrix::zeros(1, instr_feat_dim());
    m.data[..D_ATTR].copy_from_slice(&attr_embedding(0, attrs.target_color));
    m.data[D_ATTR..2 * D_ATTR].copy_from_slice(&attr_embedding(1, attrs.target_kind));
    if let Some((vc, vk)) = attrs.via {
        m.data[2 * D_ATTR..3 * D_ATTR].copy_from_slice(&attr_embedding(0, vc));
        m.data[3 * D_ATTR..4 * D_ATTR].copy_from_slice(&attr_embedding(1, vk));
        m.data[4 * D_ATTR + 1] = 1.0;
    } else {
        m.data[4 * D_ATTR] = 1.0;
    }
    m
}

/// Parse, one-hot, lift, and L2-normalize an instruction → 1×d_l.
pub fn encode_instruction(
    text: &str,
    vocab: &Vocab,
    enc: &FrozenEncoders,
) -> Result<Matrix, EncodeError> {
    let attrs = parse_instruction(text, vocab)?;
    let feats = instruction_features(&attrs);
    let mut e = matmul_nt(&feats, &enc.instr_lift);
    let norm = libm::sqrt(e.data.iter().map(|x| x * x).sum::<f64>());
    debug_assert!(norm > 0.0, "degenerate instruction embedding");
    for v in e.data.iter_mut() {
        *v /= norm;
    }
    Ok(e)
}
