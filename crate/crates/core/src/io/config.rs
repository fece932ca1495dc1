//! Flat `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are dotted paths with
//! units spelled in the name (volts V, amperes A, kelvin K, W/m2 as Wm2).
//! The same format serves plant files, scenario files and run manifests.

use crate::error::{Error, Result};
use crate::estimators::SensorTolerances;
use crate::pv::types::{PanelDatasheet, PlantTopology};
use crate::sim::{
    CurtailLimit, CurtailmentWindow, NoiseSpec, Profile, ScenarioSpec, TemperatureModel,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Ordered flat key-value store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatConfig {
    entries: BTreeMap<String, String>,
    source: String,
}

impl FlatConfig {
    pub fn new() -> Self {
        FlatConfig::default()
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::MalformedData {
                path: source.to_string(),
                line: idx + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(FlatConfig {
            entries,
            source: source.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn keys_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> {
        self.entries
            .keys()
            .filter(move |k| k.starts_with(prefix))
            .map(|k| k.as_str())
    }

    fn missing(&self, key: &str) -> Error {
        Error::invalid(
            "config",
            format!("{}: missing required key '{key}'", self.source),
        )
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        let raw = self.get(key).ok_or_else(|| self.missing(key))?;
        raw.parse::<f64>().map_err(|_| {
            Error::invalid(
                "config",
                format!("{}: key '{key}' has non-numeric value '{raw}'", self.source),
            )
        })
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.require_f64(key),
        }
    }

    pub fn optional_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.require_f64(key).map(Some),
        }
    }

    pub fn require_u32(&self, key: &str) -> Result<u32> {
        let raw = self.get(key).ok_or_else(|| self.missing(key))?;
        raw.parse::<u32>().map_err(|_| {
            Error::invalid(
                "config",
                format!("{}: key '{key}' has non-integer value '{raw}'", self.source),
            )
        })
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw.parse::<u64>().map_err(|_| {
                Error::invalid(
                    "config",
                    format!("{}: key '{key}' has non-integer value '{raw}'", self.source),
                )
            }),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(other) => Err(Error::invalid(
                "config",
                format!("{}: key '{key}' has non-boolean value '{other}'", self.source),
            )),
        }
    }

    /// Serialize sorted, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Merge another config over this one (other wins on conflicts).
    pub fn overlay(&mut self, other: &FlatConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }
}

/// Datasheet, topology and sensor tolerances read from a plant file.
#[derive(Debug, Clone)]
pub struct PlantConfig {
    pub datasheet: PanelDatasheet,
    pub topology: PlantTopology,
    pub tolerances: SensorTolerances,
}

pub fn plant_from_config(cfg: &FlatConfig) -> Result<PlantConfig> {
    let datasheet = PanelDatasheet {
        v_oc_stc: cfg.require_f64("panel.v_oc_V")?,
        i_sc_stc: cfg.require_f64("panel.i_sc_A")?,
        v_mp_stc: cfg.require_f64("panel.v_mp_V")?,
        i_mp_stc: cfg.require_f64("panel.i_mp_A")?,
        alpha: cfg.require_f64("panel.alpha_A_per_K")?,
        beta: cfg.require_f64("panel.beta_per_K")?,
        n_s: cfg.require_u32("panel.cells_series")?,
        n_p: cfg.require_u32("panel.cell_strings_parallel")?,
    };
    datasheet.validate()?;
    let topology = PlantTopology {
        modules_per_string: cfg.require_u32("plant.modules_per_string")?,
        strings_per_converter: cfg.require_u32("plant.strings_per_converter")?,
        converter_count: cfg.require_u32("plant.converters")?,
        rating_w: cfg.optional_f64("plant.rating_W")?,
    };
    topology.validate(&datasheet)?;
    let tolerances = SensorTolerances {
        current_rel: cfg.f64_or("sensors.current_tolerance_rel", 0.002)?,
        voltage_rel: cfg.f64_or("sensors.voltage_tolerance_rel", 0.005)?,
        temperature_abs: cfg.f64_or("sensors.temperature_tolerance_K", 0.5)?,
        full_scale_referenced: match cfg.get("sensors.reference") {
            None | Some("full_scale") => true,
            Some("reading") => false,
            Some(other) => {
                return Err(Error::invalid(
                    "config",
                    format!("sensors.reference must be full_scale or reading, got '{other}'"),
                ))
            }
        },
    };
    Ok(PlantConfig {
        datasheet,
        topology,
        tolerances,
    })
}

pub fn plant_to_config(plant: &PlantConfig) -> FlatConfig {
    let mut cfg = FlatConfig::new();
    let d = &plant.datasheet;
    cfg.set("panel.v_oc_V", d.v_oc_stc);
    cfg.set("panel.i_sc_A", d.i_sc_stc);
    cfg.set("panel.v_mp_V", d.v_mp_stc);
    cfg.set("panel.i_mp_A", d.i_mp_stc);
    cfg.set("panel.alpha_A_per_K", d.alpha);
    cfg.set("panel.beta_per_K", d.beta);
    cfg.set("panel.cells_series", d.n_s);
    cfg.set("panel.cell_strings_parallel", d.n_p);
    let t = &plant.topology;
    cfg.set("plant.modules_per_string", t.modules_per_string);
    cfg.set("plant.strings_per_converter", t.strings_per_converter);
    cfg.set("plant.converters", t.converter_count);
    if let Some(r) = t.rating_w {
        cfg.set("plant.rating_W", r);
    }
    cfg.set("sensors.current_tolerance_rel", plant.tolerances.current_rel);
    cfg.set("sensors.voltage_tolerance_rel", plant.tolerances.voltage_rel);
    cfg.set(
        "sensors.temperature_tolerance_K",
        plant.tolerances.temperature_abs,
    );
    cfg.set(
        "sensors.reference",
        if plant.tolerances.full_scale_referenced {
            "full_scale"
        } else {
            "reading"
        },
    );
    cfg
}

/// Scenario and noise description read from a scenario file.
pub fn scenario_from_config(cfg: &FlatConfig) -> Result<(ScenarioSpec, NoiseSpec)> {
    let seed = cfg.u64_or("seed", 1)?;
    let duration = cfg.require_f64("duration_s")?;
    let sample_interval = cfg.f64_or("sample_interval_s", 1.0)?;

    let profile = match cfg.get("profile").ok_or_else(|| {
        Error::invalid("config", "missing required key 'profile'".to_string())
    })? {
        "clear_sky" => Profile::ClearSky {
            s_peak: cfg.f64_or("s_peak_Wm2", 900.0)?,
        },
        "partly_cloudy" => Profile::PartlyCloudy {
            s_peak: cfg.f64_or("s_peak_Wm2", 900.0)?,
            event_probability: cfg.f64_or("cloud_event_probability", 0.02)?,
            time_constant: cfg.f64_or("cloud_time_constant_s", 40.0)?,
        },
        "step" => {
            let mut levels = Vec::new();
            let mut keys: Vec<&str> = cfg.keys_with_prefix("step_").collect();
            keys.sort();
            for key in keys {
                let raw = cfg.get(key).unwrap();
                let parts: Vec<&str> = raw.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(Error::invalid(
                        "config",
                        format!("{key}: expected 'start_s irradiance', got '{raw}'"),
                    ));
                }
                let start = parts[0].parse::<f64>().map_err(|_| {
                    Error::invalid("config", format!("{key}: bad start '{}'", parts[0]))
                })?;
                let level = parts[1].parse::<f64>().map_err(|_| {
                    Error::invalid("config", format!("{key}: bad level '{}'", parts[1]))
                })?;
                levels.push((start, level));
            }
            Profile::Step(levels)
        }
        "custom_csv" => {
            let path = cfg.get("csv_path").ok_or_else(|| {
                Error::invalid("config", "custom_csv profile needs csv_path".to_string())
            })?;
            Profile::CustomCsv(PathBuf::from(path))
        }
        other => {
            return Err(Error::invalid(
                "config",
                format!("unknown profile '{other}'"),
            ))
        }
    };

    let mut spec = ScenarioSpec::new(profile, duration, sample_interval, seed);
    spec.temperature = TemperatureModel {
        ambient: cfg.f64_or("ambient_K", 293.15)?,
        k_th: cfg.f64_or("k_th_K_per_Wm2", 0.025)?,
        lag: cfg.f64_or("thermal_lag_s", 300.0)?,
    };
    spec.include_gni = cfg.bool_or("include_gni", false)?;
    spec.sensor_temperature_offset = cfg.bool_or("sensor_temperature_offset", false)?;

    let mut keys: Vec<&str> = cfg.keys_with_prefix("curtail_").collect();
    keys.sort();
    for key in keys {
        let raw = cfg.get(key).unwrap();
        let parts: Vec<&str> = raw.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::invalid(
                "config",
                format!("{key}: expected 'start_s end_s fraction|wattsW', got '{raw}'"),
            ));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::invalid("config", format!("{key}: bad number '{s}'")))
        };
        let limit = if let Some(watts) = parts[2].strip_suffix('W') {
            CurtailLimit::SetpointWatts(parse(watts)?)
        } else {
            CurtailLimit::Fraction(parse(parts[2])?)
        };
        spec.curtailment.push(CurtailmentWindow {
            start: parse(parts[0])?,
            end: parse(parts[1])?,
            limit,
        });
    }
    spec.validate()?;

    let noise = NoiseSpec {
        std_i: cfg.f64_or("noise.std_i_A", 0.0)?,
        std_v: cfg.f64_or("noise.std_v_V", 0.0)?,
        std_t: cfg.f64_or("noise.std_t_K", 0.0)?,
        seed: cfg.u64_or("noise.seed", seed)?,
    };
    noise.validate()?;
    Ok((spec, noise))
}

/// Serialize a fitted cluster model to the flat text format.
pub fn cluster_model_to_config(model: &crate::variance::ClusterModel) -> FlatConfig {
    let mut cfg = FlatConfig::new();
    cfg.set("clusters.k", model.k());
    cfg.set("clusters.window", model.window_length);
    for (idx, (c, var)) in model
        .centroids
        .iter()
        .zip(model.variances.iter())
        .enumerate()
    {
        cfg.set(&format!("clusters.{idx:02}.centroid_m"), c.m);
        cfg.set(&format!("clusters.{idx:02}.centroid_v"), c.v);
        cfg.set(&format!("clusters.{idx:02}.variance"), var);
    }
    cfg
}

pub fn cluster_model_from_config(cfg: &FlatConfig) -> Result<crate::variance::ClusterModel> {
    let k = cfg.require_u32("clusters.k")? as usize;
    let window = cfg.require_u32("clusters.window")? as usize;
    let mut centroids = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for idx in 0..k {
        centroids.push(crate::variance::FeatureVector {
            m: cfg.require_f64(&format!("clusters.{idx:02}.centroid_m"))?,
            v: cfg.require_f64(&format!("clusters.{idx:02}.centroid_v"))?,
        });
        variances.push(cfg.require_f64(&format!("clusters.{idx:02}.variance"))?);
    }
    let model = crate::variance::ClusterModel {
        centroids,
        variances,
        window_length: window,
    };
    model.validate()?;
    Ok(model)
}
