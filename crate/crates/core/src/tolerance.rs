//! Numerical thresholds shared by every module.

/// Amplitudes with smaller magnitude are dropped from sparse states.
pub const PRUNE: f64 = 1e-12;

/// Default tolerance for comparing norms, overlaps and amplitudes.
pub const COMPARE: f64 = 1e-9;

/// Vectors whose residual norm falls below this during Gram-Schmidt are
/// treated as linearly dependent.
pub const GS_DROP: f64 = 1e-9;

/// Singular values below this count as zero when computing ranks.
pub const RANK: f64 = 1e-9;

/// Maximum constraint residual accepted for members of an attack family.
pub const FAMILY_RESIDUAL: f64 = 1e-10;

/// Convergence tolerance for numeric Gram-condition solving.
pub const GRAM_SOLVE: f64 = 1e-8;

/// Default per-mode photon cutoff for multi-photon expansions.
pub const DEFAULT_PHOTON_CUTOFF: u32 = 10;
