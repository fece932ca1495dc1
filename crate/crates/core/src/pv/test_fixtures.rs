//! Reference module datasheets used across the test suites and examples.

use std::sync::OnceLock;

use crate::pv::extract::extract_stc_parameters;
use crate::pv::params::StcParameters;
use crate::pv::types::{PanelDatasheet, PlantModel, PlantTopology};

/// 255 W polycrystalline, 60 cells. alpha = 0.05%/K of i_sc, beta = -0.32%/K.
pub fn datasheet_255w() -> PanelDatasheet {
    PanelDatasheet {
        v_oc_stc: 37.8,
        i_sc_stc: 8.86,
        v_mp_stc: 30.4,
        i_mp_stc: 8.39,
        alpha: 0.0005 * 8.86,
        beta: -0.0032,
        n_s: 60,
        n_p: 1,
    }
}

/// 330 W monocrystalline, 72 cells.
pub fn datasheet_330w() -> PanelDatasheet {
    PanelDatasheet {
        v_oc_stc: 45.9,
        i_sc_stc: 9.35,
        v_mp_stc: 37.4,
        i_mp_stc: 8.84,
        alpha: 0.0005 * 9.35,
        beta: -0.0029,
        n_s: 72,
        n_p: 1,
    }
}

/// 370 W half-cut layout: two parallel strings of 60 half cells.
pub fn datasheet_half_cut() -> PanelDatasheet {
    PanelDatasheet {
        v_oc_stc: 40.9,
        i_sc_stc: 11.32,
        v_mp_stc: 34.2,
        i_mp_stc: 10.82,
        alpha: 0.0005 * 11.32,
        beta: -0.0028,
        n_s: 60,
        n_p: 2,
    }
}

/// Identified STC parameters of the 255 W module (memoized; extraction is
/// deterministic).
pub fn stc_255w() -> StcParameters {
    static CELL: OnceLock<StcParameters> = OnceLock::new();
    *CELL.get_or_init(|| extract_stc_parameters(&datasheet_255w(), None).unwrap())
}

/// Rooftop plant: two strings of 14 modules on each of two converters,
/// aggregated as one equivalent array.
pub fn plant_topology_14kw() -> PlantTopology {
    PlantTopology {
        modules_per_string: 14,
        strings_per_converter: 2,
        converter_count: 2,
        rating_w: Some(14280.0),
    }
}

/// Full plant model of the 255 W module rooftop installation.
pub fn plant_model_14kw() -> PlantModel {
    PlantModel::new(datasheet_255w(), stc_255w(), plant_topology_14kw()).unwrap()
}

/// Single-module plant model, convenient for unit tests.
pub fn plant_model_single() -> PlantModel {
    PlantModel::new(datasheet_255w(), stc_255w(), PlantTopology::single_module()).unwrap()
}
