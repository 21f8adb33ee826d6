//! Dense state-vector simulation for small qubit registers.
//!
//! Conventions used throughout:
//!
//! * qubit 0 is the leftmost tensor factor, i.e. the most significant bit of
//!   a computational-basis index;
//! * operators are stored row-major as `dim * dim` complex entries;
//! * register size is capped by [`max_qubits`] (12 unless reconfigured).

mod eigen;
mod local;
mod operator;
mod state;

use std::sync::atomic::{AtomicUsize, Ordering};

pub use eigen::{
    extreme_eigenpair, extreme_eigenpair_with, extreme_eigenvalue, jacobi_eigen,
    Densify, lanczos_extreme,
    EigenMethod, Eigenpair, Which,
};
pub use local::{HermitianMap, LocalSum};
pub use operator::{dichotomic_observable, embed, kron, MeasurementAngles, Operator};
pub use state::{apply_gate, expectation, hyperspherical_state, StateVector};

pub use num_complex::Complex64 as C64;

static MAX_QUBITS: AtomicUsize = AtomicUsize::new(12);

/// Largest register size accepted by constructors that grow the dimension.
pub fn max_qubits() -> usize {
    MAX_QUBITS.load(Ordering::Relaxed)
}

/// Raise or lower the register cap. Dense storage is `4^n` entries, so
/// anything beyond ~14 is impractical.
pub fn set_max_qubits(n: usize) {
    MAX_QUBITS.store(n, Ordering::Relaxed);
}

/// Number of qubits spanned by `dim`, when it is a power of two.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    if dim.is_power_of_two() {
        Some(dim.trailing_zeros() as usize)
    } else {
        None
    }
}
