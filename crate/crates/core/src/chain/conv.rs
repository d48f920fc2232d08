//! Rate-1/2 terminated convolutional code, constraint length 7,
//! generators 171/133 (octal), with hard-decision Viterbi decoding.

use crate::error::{HscError, Result};

use super::Bitstream;

pub const CONSTRAINT_LENGTH: usize = 7;
pub const MEMORY: usize = CONSTRAINT_LENGTH - 1;
pub const TAIL_BITS: usize = MEMORY;
const G1: u32 = 0o171;
const G2: u32 = 0o133;
const STATES: usize = 1 << MEMORY;

#[inline]
fn outputs(state: usize, input: u8) -> (u8, u8) {
    // register holds the newest bit in the MSB position
    let reg = ((input as u32) << MEMORY) | state as u32;
    (((reg & G1).count_ones() & 1) as u8, ((reg & G2).count_ones() & 1) as u8)
}

#[inline]
fn next_state(state: usize, input: u8) -> usize {
    ((input as usize) << (MEMORY - 1)) | (state >> 1)
}

/// Encodes and appends the zero tail, so the output has `2(n + 6)` bits.
pub fn channel_encode(bits: &[u8]) -> Bitstream {
    let mut state = 0usize;
    let mut out = Vec::with_capacity(2 * (bits.len() + TAIL_BITS));
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, TAIL_BITS)) {
        let (a, c) = outputs(state, b);
        out.push(a);
        out.push(c);
        state = next_state(state, b);
    }
    out
}

/// Decodes a terminated codeword back to its information bits.
pub fn channel_decode(coded: &[u8]) -> Result<Bitstream> {
    if coded.len() % 2 != 0 || coded.len() < 2 * TAIL_BITS {
        return Err(HscError::dims(
            "convolutional codeword",
            format!("even length >= {}", 2 * TAIL_BITS),
            coded.len(),
        ));
    }
    let steps = coded.len() / 2;
    let info_len = steps - TAIL_BITS;
    const INF: u32 = u32::MAX / 2;
    let mut metric = vec![INF; STATES];
    metric[0] = 0;
    let mut next = vec![INF; STATES];
    // decisions[t][s] = input bit and predecessor for state s at step t
    let mut decisions: Vec<[u8; STATES]> = Vec::with_capacity(steps);
    let mut table = [[(0u8, 0u8, 0usize); 2]; STATES];
    for (s, row) in table.iter_mut().enumerate() {
        for input in 0..2u8 {
            let (a, c) = outputs(s, input);
            row[input as usize] = (a, c, next_state(s, input));
        }
    }
    for t in 0..steps {
        let r0 = coded[2 * t];
        let r1 = coded[2 * t + 1];
        next.iter_mut().for_each(|m| *m = INF);
        let mut dec = [0u8; STATES];
        for s in 0..STATES {
            let m = metric[s];
            if m >= INF {
                continue;
            }
            let inputs: &[u8] = if t >= info_len { &[0] } else { &[0, 1] };
            for &input in inputs {
                let (a, c, ns) = table[s][input as usize];
                let cost = m + (a ^ r0) as u32 + (c ^ r1) as u32;
                if cost < next[ns] {
                    next[ns] = cost;
                    // predecessor's low bit is what falls off the register
                    dec[ns] = (s & 1) as u8;
                }
            }
        }
        decisions.push(dec);
        std::mem::swap(&mut metric, &mut next);
    }
    // trace back from the zero state
    let mut state = 0usize;
    let mut decoded = vec![0u8; steps];
    for t in (0..steps).rev() {
        let input = (state >> (MEMORY - 1)) as u8;
        decoded[t] = input;
        let low = decisions[t][state] as usize;
        state = ((state << 1) & (STATES - 1)) | low;
    }
    decoded.truncate(info_len);
    Ok(decoded)
}
