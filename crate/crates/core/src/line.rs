//! Line and word addressing. Simulated memory is word addressed at 8-byte
//! granularity; every cache structure moves whole 64-byte lines.

pub const LINE_BYTES: usize = 64;
pub const WORD_BYTES: usize = 8;
pub const WORDS_PER_LINE: usize = LINE_BYTES / WORD_BYTES;

/// Contents of one cache line as eight raw 64-bit words. Integer, float and
/// bitmap payloads are all stored as bit patterns.
pub type Line = [u64; WORDS_PER_LINE];

/// Line address (byte address / 64).
#[inline]
pub fn line_of(addr: u64) -> u64 {
    addr / LINE_BYTES as u64
}

#[inline]
pub fn word_in_line(addr: u64) -> usize {
    (addr as usize % LINE_BYTES) / WORD_BYTES
}

#[inline]
pub fn line_base(line: u64) -> u64 {
    line * LINE_BYTES as u64
}

#[inline]
pub fn f64_word(v: f64) -> u64 {
    v.to_bits()
}

#[inline]
pub fn word_f64(w: u64) -> f64 {
    f64::from_bits(w)
}

#[inline]
pub fn i64_word(v: i64) -> u64 {
    v as u64
}

#[inline]
pub fn word_i64(w: u64) -> i64 {
    w as i64
}

pub fn line_from_i64(vals: [i64; WORDS_PER_LINE]) -> Line {
    vals.map(i64_word)
}

pub fn line_from_f64(vals: [f64; WORDS_PER_LINE]) -> Line {
    vals.map(f64_word)
}
