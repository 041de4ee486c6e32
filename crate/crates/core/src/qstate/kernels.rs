//! Strided amplitude kernels shared by the state-vector and density-matrix
//! backends. A density matrix is handled as a vector over `2n` qubits, so the
//! same routines cover both.

use num_complex::Complex64 as C64;

pub(crate) type M2 = [[C64; 2]; 2];
pub(crate) type M4 = [[C64; 4]; 4];

pub(crate) fn apply_1q(amps: &mut [C64], q: usize, m: &M2) {
    let stride = 1usize << q;
    for base in (0..amps.len()).step_by(stride << 1) {
        for i in base..base + stride {
            let a0 = amps[i];
            let a1 = amps[i + stride];
            amps[i] = m[0][0] * a0 + m[0][1] * a1;
            amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

pub(crate) fn apply_diag_1q(amps: &mut [C64], q: usize, d0: C64, d1: C64) {
    let mask = 1usize << q;
    for (i, a) in amps.iter_mut().enumerate() {
        *a *= if i & mask == 0 { d0 } else { d1 };
    }
}

/// Insert zero bits at positions `lo < hi` into `i`.
#[inline]
fn deposit2(i: usize, lo: usize, hi: usize) -> usize {
    let low_mask = (1usize << lo) - 1;
    let x = (i & low_mask) | ((i & !low_mask) << 1);
    let hi_mask = (1usize << hi) - 1;
    (x & hi_mask) | ((x & !hi_mask) << 1)
}

/// Two-qubit gate; the local basis index is `bit(a) + 2 * bit(b)`.
pub(crate) fn apply_2q(amps: &mut [C64], a: usize, b: usize, m: &M4) {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let ma = 1usize << a;
    let mb = 1usize << b;
    for k in 0..amps.len() >> 2 {
        let i0 = deposit2(k, lo, hi);
        let idx = [i0, i0 | ma, i0 | mb, i0 | ma | mb];
        let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
        for (r, &out) in idx.iter().enumerate() {
            amps[out] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
        }
    }
}

/// Diagonal two-qubit phase: `d[bit(a) + 2 bit(b)]`.
pub(crate) fn apply_diag_2q(amps: &mut [C64], a: usize, b: usize, d: &[C64; 4]) {
    let ma = 1usize << a;
    let mb = 1usize << b;
    for (i, amp) in amps.iter_mut().enumerate() {
        let loc = usize::from(i & ma != 0) | (usize::from(i & mb != 0) << 1);
        *amp *= d[loc];
    }
}

/// Dense `2^k x 2^k` operator (row-major) on an arbitrary qubit list; local
/// index bit `t` corresponds to `qubits[t]`.
pub(crate) fn apply_local(amps: &mut [C64], qubits: &[usize], m: &[C64]) {
    let k = qubits.len();
    let local_dim = 1usize << k;
    debug_assert_eq!(m.len(), local_dim * local_dim);
    let mut sorted: Vec<usize> = qubits.to_vec();
    sorted.sort_unstable();
    let offsets: Vec<usize> = (0..local_dim)
        .map(|loc| {
            qubits.iter().enumerate().filter(|(t, _)| loc >> t & 1 == 1).fold(0usize, |acc, (_, &q)| acc | 1 << q)
        })
        .collect();
    let mut gathered = vec![C64::new(0.0, 0.0); local_dim];
    for blk in 0..amps.len() >> k {
        let mut base = blk;
        for &q in &sorted {
            let low = base & ((1usize << q) - 1);
            base = low | ((base & !((1usize << q) - 1)) << 1);
        }
        for (g, &off) in gathered.iter_mut().zip(&offsets) {
            *g = amps[base | off];
        }
        for (r, &off) in offsets.iter().enumerate() {
            let row = &m[r * local_dim..(r + 1) * local_dim];
            amps[base | off] = row.iter().zip(&gathered).map(|(x, y)| x * y).sum();
        }
    }
}

pub(crate) fn conj2(m: &M2) -> M2 {
    [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]]
}

pub(crate) fn conj4(m: &M4) -> M4 {
    let mut out = *m;
    for row in out.iter_mut() {
        for v in row.iter_mut() {
            *v = v.conj();
        }
    }
    out
}
