//! Brute-force qubit-circuit oracles. These simulate the circuits gate by
//! gate on explicit density matrices and share no code with the closed-form
//! recurrences in [`crate::dv`].

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

type M = DMatrix<C64>;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn ket(bits: &[(f64, [u8; 2])]) -> Vec<C64> {
    let mut v = vec![c(0.0); 4];
    for (amp, b) in bits {
        v[(b[0] as usize) * 2 + b[1] as usize] += c(*amp);
    }
    v
}

/// Bell basis in order Φ+, Φ−, Ψ+, Ψ−.
pub fn bell_states() -> [Vec<C64>; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        ket(&[(s, [0, 0]), (s, [1, 1])]),
        ket(&[(s, [0, 0]), (-s, [1, 1])]),
        ket(&[(s, [0, 1]), (s, [1, 0])]),
        ket(&[(s, [0, 1]), (-s, [1, 0])]),
    ]
}

fn proj(v: &[C64]) -> M {
    let k = nalgebra::DVector::from_column_slice(v);
    &k * k.adjoint()
}

/// Werner state assembled in the Bell basis: F on Φ+, (1−F)/3 on the rest.
pub fn werner_bell_mixture(f: f64) -> M {
    let b = bell_states();
    let mut m = proj(&b[0]) * c(f);
    for v in &b[1..] {
        m += proj(v) * c((1.0 - f) / 3.0);
    }
    m
}

/// Full 2^n operator for `op` (2^k x 2^k) acting on `qubits` (qubit 0 is
/// the most significant bit).
fn embed(op: &M, qubits: &[usize], n: usize) -> M {
    let dim = 1usize << n;
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    DMatrix::from_fn(dim, dim, |r, col| {
        // identity on untouched qubits
        for q in 0..n {
            if !qubits.contains(&q) && bit(r, q) != bit(col, q) {
                return c(0.0);
            }
        }
        let sub = |idx: usize| qubits.iter().fold(0usize, |acc, &q| (acc << 1) | bit(idx, q));
        op[(sub(r), sub(col))]
    })
}

fn cnot() -> M {
    let mut m = M::zeros(4, 4);
    m[(0, 0)] = c(1.0);
    m[(1, 1)] = c(1.0);
    m[(2, 3)] = c(1.0);
    m[(3, 2)] = c(1.0);
    m
}

fn pauli(which: char) -> M {
    let mut m = M::zeros(2, 2);
    match which {
        'I' => {
            m[(0, 0)] = c(1.0);
            m[(1, 1)] = c(1.0);
        }
        'X' => {
            m[(0, 1)] = c(1.0);
            m[(1, 0)] = c(1.0);
        }
        'Z' => {
            m[(0, 0)] = c(1.0);
            m[(1, 1)] = c(-1.0);
        }
        _ => unreachable!(),
    }
    m
}

/// Partial trace keeping `keep` (sorted ascending) of an n-qubit matrix.
fn keep_qubits(rho: &M, keep: &[usize], n: usize) -> M {
    let dim = 1usize << n;
    let dk = 1usize << keep.len();
    let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
    let sub = |idx: usize| keep.iter().fold(0usize, |acc, &q| (acc << 1) | bit(idx, q));
    let mut out = M::zeros(dk, dk);
    for r in 0..dim {
        for col in 0..dim {
            let same_rest = (0..n).all(|q| keep.contains(&q) || bit(r, q) == bit(col, q));
            if same_rest {
                out[(sub(r), sub(col))] += rho[(r, col)];
            }
        }
    }
    out
}

fn fidelity_phi_plus(rho: &M) -> f64 {
    let b = bell_states();
    let v = nalgebra::DVector::from_column_slice(&b[0]);
    (v.adjoint() * rho * &v)[(0, 0)].re
}

/// Entanglement swap of two Werner pairs: Bell measurement on the middle
/// qubits, Pauli correction on the last qubit, averaged over outcomes.
/// Returns the fidelity of the outer pair.
pub fn swap_circuit(f: f64) -> f64 {
    let w = werner_bell_mixture(f);
    let rho = w.kronecker(&w);
    let bells = bell_states();
    let corrections: [&[char]; 4] = [&['I'], &['Z'], &['X'], &['X', 'Z']];
    let mut out = M::zeros(4, 4);
    for (b, corr) in bells.iter().zip(corrections) {
        let p = embed(&proj(b), &[1, 2], 4);
        let mut post = &p * &rho * &p;
        for &g in corr {
            let u = embed(&pauli(g), &[3], 4);
            post = &u * post * u.adjoint();
        }
        out += keep_qubits(&post, &[0, 3], 4);
    }
    fidelity_phi_plus(&out) / out.trace().re
}

/// Two-copy purification: bilateral CNOT from pair 1 onto pair 2, measure
/// pair 2 in Z, keep equal outcomes. Returns (fidelity, success prob).
pub fn purify_circuit(f: f64) -> (f64, f64) {
    let w = werner_bell_mixture(f);
    // qubit order A1 B1 A2 B2
    let rho = w.kronecker(&w);
    let u = embed(&cnot(), &[0, 2], 4) * embed(&cnot(), &[1, 3], 4);
    let rho = &u * rho * u.adjoint();
    let mut kept = M::zeros(4, 4);
    for outcome in [0usize, 1] {
        let mut pz = M::zeros(2, 2);
        pz[(outcome, outcome)] = c(1.0);
        let p = embed(&pz.kronecker(&pz), &[2, 3], 4);
        let post = &p * &rho * &p;
        kept += keep_qubits(&post, &[0, 1], 4);
    }
    let prob = kept.trace().re;
    (fidelity_phi_plus(&kept) / prob, prob)
}

/// Depolarizing channel p rho + (1−p) Tr_2(rho) ⊗ I/2 on the second qubit
/// of a two-qubit matrix, p = (4F−1)/3: the average map of teleporting that
/// qubit through a Werner pair of fidelity F.
pub fn depolarize_second(rho: &M, f: f64) -> M {
    let p = (4.0 * f - 1.0) / 3.0;
    let red = keep_qubits(rho, &[0], 2);
    rho * c(p) + red.kronecker(&(M::identity(2, 2) * c(0.5))) * c(1.0 - p)
}
