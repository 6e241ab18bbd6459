//! Dense statevector over at most [`MAX_NODES`](crate::graph::MAX_NODES) qubits.
//!
//! Qubit `q` is bit `q` of the basis-state index.

use num_complex::Complex64;
use rand::Rng;

pub type Gate = [[Complex64; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// |+⟩ on every qubit.
    pub fn uniform(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self { num_qubits, amps: vec![a; dim] }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Self {
        assert!(amps.len().is_power_of_two(), "amplitude count must be a power of two");
        Self { num_qubits: amps.len().trailing_zeros() as usize, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn apply_single(&mut self, qubit: usize, gate: &Gate) {
        let stride = 1usize << qubit;
        for block in self.amps.chunks_exact_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a0, *a1);
                *a0 = gate[0][0] * x + gate[0][1] * y;
                *a1 = gate[1][0] * x + gate[1][1] * y;
            }
        }
    }

    /// Multiplies amplitude `x` by `phases[counts[x]]`.
    pub fn apply_counted_phase(&mut self, counts: &[u8], phases: &[Complex64]) {
        debug_assert_eq!(counts.len(), self.amps.len());
        for (a, &k) in self.amps.iter_mut().zip(counts) {
            if k != 0 {
                *a *= phases[k as usize];
            }
        }
    }

    /// diag(1, 1, 1, e^{iθ}) on qubits `u`, `v`.
    pub fn apply_controlled_phase(&mut self, u: usize, v: usize, theta: f64) {
        let mask = (1usize << u) | (1usize << v);
        let phase = Complex64::from_polar(1.0, theta);
        for (x, a) in self.amps.iter_mut().enumerate() {
            if x & mask == mask {
                *a *= phase;
            }
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(Complex64::norm_sqr).collect()
    }

    /// P(qubit q reads 1) for every qubit.
    pub fn marginals(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_qubits];
        for (x, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            let mut bits = x;
            while bits != 0 {
                let q = bits.trailing_zeros() as usize;
                m[q] += p;
                bits &= bits - 1;
            }
        }
        m
    }
}

pub fn rz(angle: f64) -> Gate {
    let zero = Complex64::new(0.0, 0.0);
    [
        [Complex64::from_polar(1.0, -angle / 2.0), zero],
        [zero, Complex64::from_polar(1.0, angle / 2.0)],
    ]
}

pub fn ry(angle: f64) -> Gate {
    let (s, c) = (angle / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub fn matmul(a: &Gate, b: &Gate) -> Gate {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Rz(c)·Ry(b)·Rz(a): `a` acts first.
pub fn zyz(a: f64, b: f64, c: f64) -> Gate {
    matmul(&rz(c), &matmul(&ry(b), &rz(a)))
}

/// Cumulative outcome distribution for drawing computational-basis shots.
#[derive(Clone, Debug)]
pub struct OutcomeSampler {
    num_qubits: usize,
    cdf: Vec<f64>,
}

impl OutcomeSampler {
    pub fn new(state: &Statevector) -> Self {
        let mut acc = 0.0;
        let cdf = state
            .amps
            .iter()
            .map(|a| {
                acc += a.norm_sqr();
                acc
            })
            .collect();
        Self { num_qubits: state.num_qubits, cdf }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty distribution");
        let u = rng.random::<f64>() * total;
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    /// Per-qubit frequency of reading 1 over `shots` full-bitstring samples.
    pub fn sample_marginals<R: Rng + ?Sized>(&self, shots: u32, rng: &mut R) -> Vec<f64> {
        let mut ones = vec![0u32; self.num_qubits];
        for _ in 0..shots {
            let mut bits = self.sample(rng);
            while bits != 0 {
                ones[bits.trailing_zeros() as usize] += 1;
                bits &= bits - 1;
            }
        }
        ones.into_iter().map(|c| f64::from(c) / f64::from(shots)).collect()
    }
}
