pub mod csl_noise;
pub mod design_scan;
pub mod exclusion;
pub mod feldman_cousins;
pub mod fit_spectrum;
pub mod fit_thermal;
pub mod pipeline;
pub mod synth;
