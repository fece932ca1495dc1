//! Single-diode five-parameter PV model: STC identification, parameter
//! translation, i-v curve solution and maximum-power computation.

pub mod curve;
pub mod extract;
pub mod lambert;
pub mod model;
pub mod params;
pub mod test_fixtures;
pub mod types;

pub use curve::{
    iv_curve, max_power, max_power_module, max_power_point, open_circuit_voltage,
    open_circuit_voltage_root, solve_current, solve_current_bisect, IVCurve,
};
pub use extract::{extract_stc_parameters, stc_residuals};
pub use model::{diode_residual, partials, ModelScale, Partials};
pub use params::{band_gap, translate_parameters, StcParameters, TranslatedParameters};
pub use types::{OperatingConditions, PanelDatasheet, PlantModel, PlantTopology};

/// Boltzmann constant [J/K].
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Elementary charge [C].
pub const ELECTRON_CHARGE: f64 = 1.602176634e-19;
/// Boltzmann constant [eV/K].
pub const BOLTZMANN_EV: f64 = BOLTZMANN / ELECTRON_CHARGE;
/// Cell temperature at Standard Test Conditions [K].
pub const T_STC: f64 = 298.15;
/// Irradiance at Standard Test Conditions [W/m2].
pub const S_STC: f64 = 1000.0;
/// Guard on the diode exponent argument; beyond this the solve errors out
/// instead of producing silent infinities.
pub const EXP_GUARD: f64 = 700.0;
/// Irradiance below this is treated as a degenerate (night-time) input.
pub const S_MIN: f64 = 1.0;
/// Upper bound of the plausible irradiance range [W/m2].
pub const S_MAX: f64 = 1500.0;
