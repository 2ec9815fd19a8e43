//! Generic classifiers: random forests, a linear SVM and online logistic regression.

mod forest;
mod logreg;
mod svm;

pub use forest::{fit_forest, ForestConfig, ForestModel};
pub use logreg::OnlineLogRegModel;
pub use svm::{fit_linear_svm, LinearSvmConfig, LinearSvmModel};
