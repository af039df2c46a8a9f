//! Signals, spectra, decomposition into band-limited components, and log-Mel features.

pub mod correlation;
pub mod decompose;
pub mod ewt;
pub mod fd;
pub mod framing;
pub mod iir;
pub mod mel;
pub mod peaks;
pub mod signal;
pub mod spectrum;
pub mod wav;

pub use correlation::{component_correlation_matrix, pearson, CorrelationMatrix};
pub use decompose::{decompose, ComponentSet, DecompositionConfig, MergeStrategy, Method};
pub use ewt::ewt_decompose;
pub use fd::fd_decompose;
pub use framing::frame_sequence;
pub use mel::{mel_features, MelExtractor, MelFrames};
pub use peaks::detect_spectral_peaks;
pub use signal::Signal;
pub use spectrum::{real_fft, real_ifft, Spectrum};
pub use wav::{read_wav, write_components_wav, write_wav};
