//! Pauli algebra, matrix realizations and locality measurements.

pub mod dense;
pub mod krylov;
pub mod locality;
pub mod matrix;
pub mod pauli;
pub mod vector;

pub use dense::CMat;
pub use locality::{
    conditional_expectation, conditional_expectation_qubits, locality_profile, locality_profile_dense,
    operator_norm, partial_trace, square_decomposition, LocalityProfile, SquareTerm,
};
pub use matrix::{realize, realize_dense, realize_sparse, Caps, CsrMatrix, LinearOperator, OperatorMatrix, PauliOperator, Storage};
pub use pauli::{commutes, pauli_mul, Pauli, PauliString, PauliSum, Phase};
