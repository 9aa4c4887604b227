//! Reference parameter sets for the two devices this toolkit was built
//! around: a release-free optomechanical crystal and a suspended nanobeam,
//! both characterized at ~10 mK, plus the pump-filter stack and detection
//! chain in front of the photon counter.
//!
//! Values that were never published as a single number (the individual path
//! efficiencies behind the direct calibration) are stated here as the assumed
//! budget that reproduces the measured calibration rate; they are fixture
//! choices, not measurements.

use crate::detection::DetectionConfig;
use crate::filter::FilterStack;
use crate::model::{BathModel, DeviceParams, RepetitionModel};

/// Intrinsic mechanical decay of the release-free device measured by dark
/// ringdown (Hz). The low-power limit of the linewidth power law gives 510 kHz
/// and the device table lists 500 kHz; the three disagree at the 30% level and
/// are kept separate rather than averaged.
pub const RELEASE_FREE_GAMMA_0_RINGDOWN: f64 = 660e3;

/// Release-free device constants.
pub fn release_free_device() -> DeviceParams {
    DeviceParams::new(194.5867e12, 5.358e9, 1.63e9, 680e6, 500e3, 470e3).expect("valid preset")
}

/// Suspended nanobeam used for the noise-thermometry comparison.
pub fn suspended_device() -> DeviceParams {
    DeviceParams::new(195.7751e12, 5.983e9, 1.70e9, 1030e6, 500.0, 1069e3).expect("valid preset")
}

/// Hot/cold bath couplings of the release-free device under resonant pumping.
///
/// Bath occupations are representative fixture values: the cold bath sits
/// somewhat above the cryostat temperature and the hot bath is chosen so the
/// steady state reaches n_m ≈ 10 near n_c ≈ 6300.
pub fn release_free_bath() -> BathModel {
    BathModel::new(510e3, 0.25, 170.0, 0.98, 15.5).expect("valid preset")
}

/// Pulse-train and pump-probe noise model of the release-free device.
pub fn release_free_repetition() -> RepetitionModel {
    RepetitionModel::new(52e3, 0.114, 0.81, 64.0, 607e3).expect("valid preset")
}

/// The two cascaded Fabry–Pérot pump filters, centered on the detected sideband.
pub fn reference_filter_stack() -> FilterStack {
    FilterStack::new(13.2e6, 18.8e9, 2, 0.0).expect("valid preset")
}

/// Detection chain for the release-free device.
///
/// η_o = κ_e/κ and η_fc = 0.1 are measured; η_loss = 0.3477 and η_det = 0.5
/// are the assumed split that reproduces the direct calibration rate of
/// 24.7 counts/s at unit photon and phonon number. Dark counts 7 Hz; residual
/// pump transmission −113.6 dBc.
pub fn release_free_detection() -> DetectionConfig {
    let dev = release_free_device();
    DetectionConfig::new(
        dev.eta_o(),
        0.1,
        0.3477,
        0.5,
        7.0,
        10f64.powf(-11.36),
        0.0,
    )
    .expect("valid preset")
}
