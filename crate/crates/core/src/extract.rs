//! Randomness extraction: von Neumann debiasing and Toeplitz hashing.
//!
//! Bits are packed LSB-first into `u64` words (and LSB-first into bytes on
//! disk). Bits past `len` in the last word are always zero.

use std::fmt;

use crate::error::{Error, Result};
use crate::reduction::Reduction;

/// Matrix layout convention, recorded with every extraction.
pub const TOEPLITZ_LAYOUT: &str = "T[i][j] = seed[i - j + N - 1], bits packed LSB-first";

#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitBuffer {
    words: Vec<u64>,
    len: usize,
}

impl fmt::Debug for BitBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: String = self.iter().take(64).map(|b| if b { '1' } else { '0' }).collect();
        let more = if self.len > 64 { "…" } else { "" };
        write!(f, "BitBuffer({} bits: {shown}{more})", self.len)
    }
}

impl BitBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitBuffer {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    pub fn zeros(len: usize) -> Self {
        BitBuffer {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    /// Takes the first `len` bits of `words`.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() * 64 < len {
            return Err(Error::invalid("len", "exceeds the supplied words"));
        }
        words.truncate(len.div_ceil(64));
        let mut b = BitBuffer { words, len };
        b.clear_tail();
        Ok(b)
    }

    /// Unpacks LSB-first bytes; `len` defaults to all bits.
    pub fn from_bytes(bytes: &[u8], len: Option<usize>) -> Result<Self> {
        let len = len.unwrap_or(bytes.len() * 8);
        if len > bytes.len() * 8 {
            return Err(Error::invalid("len", "exceeds the supplied bytes"));
        }
        let words = bytes
            .chunks(8)
            .map(|c| {
                let mut w = [0u8; 8];
                w[..c.len()].copy_from_slice(c);
                u64::from_le_bytes(w)
            })
            .collect();
        Self::from_words(words, len)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / 64] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    /// Appends the low `count` bits of `value`, least significant first.
    pub fn push_word(&mut self, value: u64, count: u32) {
        debug_assert!(count <= 64);
        if count == 0 {
            return;
        }
        let value = if count == 64 { value } else { value & ((1u64 << count) - 1) };
        let sh = self.len % 64;
        if sh == 0 {
            self.words.push(value);
        } else {
            *self.words.last_mut().expect("non-empty") |= value << sh;
            if sh + count as usize > 64 {
                self.words.push(value >> (64 - sh));
            }
        }
        self.len += count as usize;
    }

    pub fn extend(&mut self, other: &BitBuffer) {
        let full = other.len / 64;
        for &w in &other.words[..full] {
            self.push_word(w, 64);
        }
        let r = other.len % 64;
        if r > 0 {
            self.push_word(other.words[full], r as u32);
        }
    }

    /// The 64 bits starting at bit `start`, zero past the end.
    fn window_word(&self, start: usize) -> u64 {
        let (w, sh) = (start / 64, start % 64);
        let lo = self.words.get(w).copied().unwrap_or(0);
        if sh == 0 {
            lo
        } else {
            let hi = self.words.get(w + 1).copied().unwrap_or(0);
            (lo >> sh) | (hi << (64 - sh))
        }
    }

    pub fn slice(&self, start: usize, len: usize) -> Result<BitBuffer> {
        if start.checked_add(len).is_none_or(|end| end > self.len) {
            return Err(Error::invalid("slice", format!("{start}+{len} exceeds {} bits", self.len)));
        }
        let words = (0..len.div_ceil(64)).map(|k| self.window_word(start + 64 * k)).collect();
        BitBuffer::from_words(words, len)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn xor(&self, other: &BitBuffer) -> Result<BitBuffer> {
        if self.len != other.len {
            return Err(Error::invalid("xor", "length mismatch"));
        }
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect();
        Ok(BitBuffer { words, len: self.len })
    }

    /// Bit order reversed.
    pub fn reversed(&self) -> BitBuffer {
        let mut out = BitBuffer::zeros(self.len);
        for i in 0..self.len {
            if self.get(i) {
                out.set(self.len - 1 - i, true);
            }
        }
        out
    }
}

impl FromIterator<bool> for BitBuffer {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut b = BitBuffer::new();
        for bit in iter {
            b.push(bit);
        }
        b
    }
}

/// Seed of a Toeplitz matrix with `out_len` rows and `in_len` columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: BitBuffer,
    in_len: usize,
    out_len: usize,
}

impl ToeplitzSeed {
    /// `bits.len()` must equal `out_len + in_len - 1`.
    pub fn new(bits: BitBuffer, in_len: usize, out_len: usize) -> Result<Self> {
        if in_len == 0 || out_len == 0 {
            return Err(Error::invalid("toeplitz", "dimensions must be >= 1"));
        }
        let need = seed_len(in_len, out_len);
        if bits.len() != need {
            return Err(Error::invalid(
                "seed",
                format!("has {} bits, a {out_len}x{in_len} matrix needs {need}", bits.len()),
            ));
        }
        Ok(ToeplitzSeed { bits, in_len, out_len })
    }

    pub fn bits(&self) -> &BitBuffer {
        &self.bits
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// Matrix entry `T[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.bits.get(i + self.in_len - 1 - j)
    }
}

pub fn seed_len(in_len: usize, out_len: usize) -> usize {
    in_len + out_len - 1
}

fn check_hash_args(raw: &BitBuffer, seed: &ToeplitzSeed, m: usize) -> Result<()> {
    if raw.len() != seed.in_len {
        return Err(Error::invalid(
            "raw",
            format!("has {} bits, the seed expects {}", raw.len(), seed.in_len),
        ));
    }
    if m != seed.out_len {
        return Err(Error::invalid(
            "out_len",
            format!("{m} does not match the seed's {}", seed.out_len),
        ));
    }
    Ok(())
}

/// Word-parallel Toeplitz hash. Row `i` is the seed window `i..i+N`
/// against the bit-reversed input, so each output bit is one parity.
pub fn toeplitz_hash(raw: &BitBuffer, seed: &ToeplitzSeed, m: usize) -> Result<BitBuffer> {
    check_hash_args(raw, seed, m)?;
    let rev = raw.reversed();
    let rev_words = rev.words();
    let mut out = BitBuffer::zeros(m);
    for i in 0..m {
        let mut acc = 0u64;
        for (k, &r) in rev_words.iter().enumerate() {
            acc ^= seed.bits.window_word(i + 64 * k) & r;
        }
        // Seed bits past the window meet the zero padding of `rev`.
        if acc.count_ones() & 1 == 1 {
            out.set(i, true);
        }
    }
    Ok(out)
}

/// Reference bit-by-bit matrix-vector product over GF(2).
pub fn toeplitz_hash_naive(raw: &BitBuffer, seed: &ToeplitzSeed, m: usize) -> Result<BitBuffer> {
    check_hash_args(raw, seed, m)?;
    Ok((0..m)
        .map(|i| (0..raw.len()).fold(false, |acc, j| acc ^ (seed.entry(i, j) & raw.get(j))))
        .collect())
}

/// Pairs 01 → 0, 10 → 1; 00, 11 and a trailing odd bit are dropped.
pub fn von_neumann(input: &BitBuffer) -> BitBuffer {
    von_neumann_prefix(input, usize::MAX).0
}

/// Debiases until `limit` output bits exist; also returns the input bits
/// consumed.
fn von_neumann_prefix(input: &BitBuffer, limit: usize) -> (BitBuffer, usize) {
    let mut out = BitBuffer::with_capacity(input.len() / 4);
    let mut pos = 0;
    while pos + 1 < input.len() && out.len() < limit {
        let (a, b) = (input.get(pos), input.get(pos + 1));
        if a != b {
            out.push(a);
        }
        pos += 2;
    }
    (out, pos)
}

/// Debiases the head of `raw` into a seed for an `out_len x in_len`
/// matrix. Returns the seed and how many raw bits it consumed.
pub fn generate_seed(raw: &BitBuffer, in_len: usize, out_len: usize) -> Result<(ToeplitzSeed, usize)> {
    if in_len == 0 || out_len == 0 {
        return Err(Error::invalid("toeplitz", "dimensions must be >= 1"));
    }
    let needed = seed_len(in_len, out_len);
    let (bits, consumed) = von_neumann_prefix(raw, needed);
    if bits.len() < needed {
        return Err(Error::NeedsMoreEntropy {
            deficit: needed - bits.len(),
        });
    }
    Ok((ToeplitzSeed::new(bits, in_len, out_len)?, consumed))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExtractorConfig {
    /// Raw block length `N`, bits.
    pub block_len: usize,
    /// Total reduction factor applied to each block.
    pub gamma_adc: f64,
}

impl ExtractorConfig {
    /// Fails with [`Error::UntrustedSource`] when the reduction is unbounded.
    pub fn from_reduction(block_len: usize, gamma: Reduction) -> Result<Self> {
        match gamma {
            Reduction::Untrusted => Err(Error::UntrustedSource),
            Reduction::Finite(g) => {
                let cfg = ExtractorConfig {
                    block_len,
                    gamma_adc: g,
                };
                cfg.validate()?;
                Ok(cfg)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_len < 1 {
            return Err(Error::invalid("block_len", "must be >= 1"));
        }
        if !self.gamma_adc.is_finite() {
            return Err(Error::UntrustedSource);
        }
        if !(self.gamma_adc >= 1.0) {
            return Err(Error::invalid("gamma_adc", "must be >= 1"));
        }
        if self.out_len() == 0 {
            return Err(Error::invalid(
                "block_len",
                format!("too short to yield output at reduction {}", self.gamma_adc),
            ));
        }
        Ok(())
    }

    /// `M = floor(N / Γ)`, rounding down.
    pub fn out_len(&self) -> usize {
        (self.block_len as f64 / self.gamma_adc).floor() as usize
    }
}

#[derive(Clone, Debug)]
pub enum SeedSource {
    /// Debias the head of the raw stream.
    FromRaw,
    Provided(ToeplitzSeed),
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub output: BitBuffer,
    pub seed: ToeplitzSeed,
    /// Raw bits spent on the seed.
    pub seed_raw_bits: usize,
    pub blocks: usize,
    /// Raw bits left over after the last full block.
    pub discarded_bits: usize,
    pub config: ExtractorConfig,
}

impl Extraction {
    /// Sidecar metadata as `key=value` lines.
    pub fn metadata(&self, seed_origin: &str) -> String {
        let c = &self.config;
        format!(
            "block_len_n={}\nout_len_m={}\ngamma_adc={}\nseed_len={}\nseed_origin={seed_origin}\n\
             seed_raw_bits={}\nseed_reuse=one seed per session, reused for every block\n\
             blocks={}\noutput_bits={}\ndiscarded_raw_bits={}\nlayout={TOEPLITZ_LAYOUT}\n",
            c.block_len,
            c.out_len(),
            c.gamma_adc,
            self.seed.bits.len(),
            self.seed_raw_bits,
            self.blocks,
            self.output.len(),
            self.discarded_bits,
        )
    }
}

/// Hashes every full `N`-bit block of `raw` (after any seed material) with
/// a single Toeplitz seed.
pub fn extraction_pipeline(raw: &BitBuffer, cfg: &ExtractorConfig, seed: SeedSource) -> Result<Extraction> {
    cfg.validate()?;
    let (n, m) = (cfg.block_len, cfg.out_len());
    let (seed, consumed) = match seed {
        SeedSource::FromRaw => generate_seed(raw, n, m)?,
        SeedSource::Provided(s) => {
            if s.in_len != n || s.out_len != m {
                return Err(Error::invalid(
                    "seed",
                    format!("built for {}x{}, the configuration needs {m}x{n}", s.out_len, s.in_len),
                ));
            }
            (s, 0)
        }
    };
    let avail = raw.len() - consumed;
    let blocks = avail / n;
    if blocks == 0 {
        return Err(Error::invalid(
            "raw",
            format!("{avail} bits after seeding, need at least one block of {n}"),
        ));
    }
    let hash_block = |b: usize| -> Result<BitBuffer> {
        let block = raw.slice(consumed + b * n, n)?;
        toeplitz_hash(&block, &seed, m)
    };

    #[cfg(feature = "parallel")]
    let hashed: Vec<BitBuffer> = {
        use rayon::prelude::*;
        (0..blocks).into_par_iter().map(hash_block).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let hashed: Vec<BitBuffer> = (0..blocks).map(hash_block).collect::<Result<_>>()?;

    let mut output = BitBuffer::with_capacity(blocks * m);
    for h in &hashed {
        output.extend(h);
    }
    Ok(Extraction {
        output,
        seed,
        seed_raw_bits: consumed,
        blocks,
        discarded_bits: avail - blocks * n,
        config: *cfg,
    })
}

/// Concatenates the low `n` bits of each sample, LSB-first.
pub fn samples_to_bits(samples: &[u16], n: u32) -> Result<BitBuffer> {
    if !(1..=16).contains(&n) {
        return Err(Error::invalid("n", "must lie in 1..=16"));
    }
    let limit = 1u32 << n;
    let mut out = BitBuffer::with_capacity(samples.len() * n as usize);
    for (i, &s) in samples.iter().enumerate() {
        if s as u32 >= limit {
            return Err(Error::InvalidInput(format!("sample {i} = {s} does not fit in {n} bits")));
        }
        out.push_word(s as u64, n);
    }
    Ok(out)
}

/// Monobit statistic `(ones - len/2) / (sqrt(len)/2)`, standard normal for
/// unbiased independent bits.
pub fn monobit_z(bits: &BitBuffer) -> f64 {
    let n = bits.len() as f64;
    (bits.count_ones() as f64 - n / 2.0) / (n.sqrt() / 2.0)
}
