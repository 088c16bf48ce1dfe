//! Reifenberg-type parametrization driven by a coherent collection of balls and planes.

pub mod ccbp;
pub mod certify;
pub mod iterate;
pub mod partition;

pub use ccbp::{ccbp_from_tree, epsilon_at, epsilon_at_cached, flat_ccbp, radius, single_tilt, tilt_chain, validate_ccbp, Ccbp, CcbpLayer, EpsilonProfile, PairCache};
pub use certify::{bilip_certificate, certify, local_graph_fit, write_off, BilipCertificate, Certificate, CertifyConfig, GraphFit};
pub use iterate::{iterate, IterateConfig, SurfaceIterate};
pub use partition::{bump, partition_of_unity, sigma_k, Partition};
