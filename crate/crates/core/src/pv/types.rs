//! Domain types: datasheet values, plant topology, operating conditions.

use crate::error::{Error, Result};
use crate::pv::params::StcParameters;
use crate::pv::model::ModelScale;

/// Manufacturer datasheet values at Standard Test Conditions for one module.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDatasheet {
    /// Open-circuit voltage [V].
    pub v_oc_stc: f64,
    /// Short-circuit current [A].
    pub i_sc_stc: f64,
    /// Voltage at the maximum-power point [V].
    pub v_mp_stc: f64,
    /// Current at the maximum-power point [A].
    pub i_mp_stc: f64,
    /// Short-circuit current temperature coefficient [A/K], module level.
    pub alpha: f64,
    /// Open-circuit voltage temperature coefficient [1/K], relative.
    pub beta: f64,
    /// Cells in series.
    pub n_s: u32,
    /// Cell strings in parallel.
    pub n_p: u32,
}

impl PanelDatasheet {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_mp_stc > 0.0 && self.v_mp_stc < self.v_oc_stc) {
            return Err(Error::invalid(
                "datasheet",
                format!(
                    "require 0 < v_mp ({}) < v_oc ({})",
                    self.v_mp_stc, self.v_oc_stc
                ),
            ));
        }
        if !(self.i_mp_stc > 0.0 && self.i_mp_stc < self.i_sc_stc) {
            return Err(Error::invalid(
                "datasheet",
                format!(
                    "require 0 < i_mp ({}) < i_sc ({})",
                    self.i_mp_stc, self.i_sc_stc
                ),
            ));
        }
        if self.n_s < 1 || self.n_p < 1 {
            return Err(Error::invalid("datasheet", "n_s and n_p must be >= 1"));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::invalid("datasheet", "non-finite coefficient"));
        }
        Ok(())
    }

    /// Nameplate power [W]: v_mp * i_mp.
    pub fn rated_power(&self) -> f64 {
        self.v_mp_stc * self.i_mp_stc
    }

    /// Module-level scale (one panel of n_s x n_p cells).
    pub fn module_scale(&self) -> ModelScale {
        ModelScale {
            n_s: self.n_s as f64,
            n_p: self.n_p as f64,
        }
    }

    /// Per-cell short-circuit temperature coefficient [A/K].
    pub fn alpha_cell(&self) -> f64 {
        self.alpha / self.n_p as f64
    }
}

/// Series/parallel layout of the plant DC side.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantTopology {
    pub modules_per_string: u32,
    pub strings_per_converter: u32,
    pub converter_count: u32,
    /// Declared plant rating [W], if known; checked against module count.
    pub rating_w: Option<f64>,
}

impl PlantTopology {
    /// A single free-standing module.
    pub fn single_module() -> Self {
        PlantTopology {
            modules_per_string: 1,
            strings_per_converter: 1,
            converter_count: 1,
            rating_w: None,
        }
    }

    pub fn validate(&self, datasheet: &PanelDatasheet) -> Result<()> {
        if self.modules_per_string < 1 || self.strings_per_converter < 1 || self.converter_count < 1
        {
            return Err(Error::invalid("topology", "all counts must be >= 1"));
        }
        if let Some(rating) = self.rating_w {
            let installed = self.module_count() as f64 * datasheet.rated_power();
            let mismatch = (installed - rating).abs() / rating;
            if mismatch > 0.01 {
                return Err(Error::invalid(
                    "topology",
                    format!(
                        "installed power {installed:.0} W differs from declared rating {rating:.0} W by {:.1}%",
                        mismatch * 100.0
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn module_count(&self) -> u32 {
        self.modules_per_string * self.strings_per_converter * self.converter_count
    }
}

/// A cell temperature and irradiance pair at which the model is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingConditions {
    /// Cell temperature [K].
    pub temperature: f64,
    /// Irradiance [W/m2].
    pub irradiance: f64,
}

impl OperatingConditions {
    pub fn new(temperature: f64, irradiance: f64) -> Result<Self> {
        let cond = OperatingConditions {
            temperature,
            irradiance,
        };
        cond.validate()?;
        Ok(cond)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid(
                "operating conditions",
                format!("temperature {} K must be positive", self.temperature),
            ));
        }
        // Zero irradiance makes the shunt translation and the
        // open-circuit log diverge.
        if !(self.irradiance > 0.0) || !self.irradiance.is_finite() {
            return Err(Error::invalid(
                "operating conditions",
                format!("irradiance {} W/m2 must be positive", self.irradiance),
            ));
        }
        Ok(())
    }
}

/// Identified model plus the array layout it is evaluated on. Bundles what
/// every estimator needs: per-cell STC parameters, the datasheet coefficients
/// and the series/parallel cell counts of the measured array.
#[derive(Debug, Clone)]
pub struct PlantModel {
    pub datasheet: PanelDatasheet,
    pub stc: StcParameters,
    pub topology: PlantTopology,
}

impl PlantModel {
    pub fn new(
        datasheet: PanelDatasheet,
        stc: StcParameters,
        topology: PlantTopology,
    ) -> Result<Self> {
        datasheet.validate()?;
        stc.validate()?;
        topology.validate(&datasheet)?;
        Ok(PlantModel {
            datasheet,
            stc,
            topology,
        })
    }

    /// Cell counts of the whole measured array: module cells scaled by the
    /// series/parallel layout. The array DC voltage spans one module string;
    /// the array DC current sums over all parallel strings.
    pub fn array_scale(&self) -> ModelScale {
        ModelScale {
            n_s: (self.datasheet.n_s * self.topology.modules_per_string) as f64,
            n_p: (self.datasheet.n_p
                * self.topology.strings_per_converter
                * self.topology.converter_count) as f64,
        }
    }

    pub fn module_scale(&self) -> ModelScale {
        self.datasheet.module_scale()
    }
}
