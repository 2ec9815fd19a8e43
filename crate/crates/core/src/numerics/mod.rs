//! Deterministic numerical core: tensors, a seedable PRNG with substreams,
//! a symmetric eigensolver, PCA, MDA and the binary model container.

mod container;
mod jacobi;
mod mda;
mod pca;
mod rng;
mod tensor;

pub use container::{tags, write_atomic, Container, ModelIo, Packer, Unpacker};
pub use jacobi::sym_eig;
pub use mda::{fit_mda, MdaModel};
pub use pca::{fit_pca, PcaModel};
pub use rng::Rng;
pub use tensor::Tensor;
