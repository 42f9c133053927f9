//! Deterministic ground-truth computation for the benchmark's formula
//! families, behind a registry keyed by formula id.
//!
//! Every function is pure, takes and returns f64 at full precision, and
//! never rounds intermediates; only display code rounds. Angles are degrees
//! at every interface; radians never cross this module boundary, because
//! exactly that ambiguity is a documented failure mode of the models being
//! evaluated. Unit conversion happens only through the explicit table in
//! [`UNIT_CONVERSIONS`], so every conversion in a run is auditable.

use std::collections::BTreeMap;

use crate::error::ErrorClass;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// km/h → m/s. Multiplying by this constant is the only sanctioned speed
/// conversion, so converted and pre-converted inputs agree bit-for-bit.
pub const KMH_TO_MS: f64 = 1.0 / 3.6;

/// Explicit unit-conversion table: (from, to, factor).
pub const UNIT_CONVERSIONS: &[(&str, &str, f64)] = &[
    ("km/h", "m/s", KMH_TO_MS),
    ("GHz", "Hz", 1e9),
    ("MHz", "Hz", 1e6),
    ("kHz", "Hz", 1e3),
    ("Mbit/s", "bit/s", 1e6),
    ("kbit/s", "bit/s", 1e3),
    ("km", "m", 1e3),
];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("{formula}: parameter {param} out of domain: {message}")]
    Domain {
        formula: &'static str,
        param: &'static str,
        message: String,
    },
    #[error("blade_power: omega*R is zero (singular rotor geometry)")]
    Singularity,
    #[error("elevation_angle: UAV and user positions coincide; angle undefined")]
    UndefinedAngle,
    #[error("{formula}: infeasible with zero {param}")]
    Infeasible {
        formula: &'static str,
        param: &'static str,
    },
    #[error("unknown formula id {0}")]
    UnknownFormula(String),
    #[error("{formula}: missing parameter {param}")]
    MissingParam { formula: String, param: String },
    #[error("{formula}: unexpected parameter {param}")]
    UnexpectedParam { formula: String, param: String },
    #[error("{formula}: parameter {param} has unit {got}, expected {expected} (no conversion)")]
    UnknownUnit {
        formula: String,
        param: String,
        got: String,
        expected: String,
    },
}

impl OracleError {
    pub fn class(&self) -> ErrorClass {
        ErrorClass::Validation
    }
}

fn require_positive(formula: &'static str, param: &'static str, v: f64) -> Result<(), OracleError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(OracleError::Domain {
            formula,
            param,
            message: format!("must be positive and finite, got {v}"),
        })
    }
}

fn require_non_negative(
    formula: &'static str,
    param: &'static str,
    v: f64,
) -> Result<(), OracleError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(OracleError::Domain {
            formula,
            param,
            message: format!("must be non-negative and finite, got {v}"),
        })
    }
}

// ---------------------------------------------------------------------------
// Formula implementations
// ---------------------------------------------------------------------------

/// Blade (profile) power in forward flight: P0 * (1 + 3 V^2 / (Ω^2 R^2)).
/// V in m/s, omega in rad/s, R in meters; result in the units of `p0`.
pub fn blade_power(p0: f64, v: f64, omega: f64, r: f64) -> Result<f64, OracleError> {
    if omega * r == 0.0 {
        return Err(OracleError::Singularity);
    }
    require_positive("blade_power", "omega", omega)?;
    require_positive("blade_power", "r", r)?;
    require_non_negative("blade_power", "v", v)?;
    let tip = omega * omega * r * r;
    Ok(p0 * (1.0 + 3.0 * v * v / tip))
}

/// Elevation angle in degrees [0, 90] from a ground user at `(x, y)` to a
/// UAV at `(x, y, z)`. A UAV directly overhead is 90 degrees.
pub fn elevation_angle(user: (f64, f64), uav: (f64, f64, f64)) -> Result<f64, OracleError> {
    let (ux, uy) = user;
    let (vx, vy, vz) = uav;
    require_non_negative("elevation_angle", "uav_z", vz)?;
    let horizontal = (vx - ux).hypot(vy - uy);
    if horizontal == 0.0 {
        if vz == 0.0 {
            return Err(OracleError::UndefinedAngle);
        }
        return Ok(90.0);
    }
    Ok((vz / horizontal).atan().to_degrees())
}

/// Sigmoid air-to-ground LoS probability: 1 / (1 + a exp(-b (θ - a))).
/// `theta` in degrees.
pub fn los_probability(a: f64, b: f64, theta: f64) -> Result<f64, OracleError> {
    require_positive("los_probability", "b", b)?;
    require_non_negative("los_probability", "a", a)?;
    Ok(1.0 / (1.0 + a * (-b * (theta - a)).exp()))
}

/// Shannon rate: B log2(1 + SNR), bits/s. `snr` is linear, not dB.
pub fn shannon_rate(bandwidth_hz: f64, snr: f64) -> Result<f64, OracleError> {
    require_positive("shannon_rate", "bandwidth", bandwidth_hz)?;
    require_non_negative("shannon_rate", "snr", snr)?;
    Ok(bandwidth_hz * (1.0 + snr).log2())
}

/// Bandwidth needed to carry `rate` bits/s at linear SNR: rate / log2(1+SNR).
/// Inverse of [`shannon_rate`].
pub fn required_bandwidth(rate: f64, snr: f64) -> Result<f64, OracleError> {
    require_positive("required_bandwidth", "rate", rate)?;
    if snr == 0.0 {
        return Err(OracleError::Infeasible {
            formula: "required_bandwidth",
            param: "snr",
        });
    }
    require_positive("required_bandwidth", "snr", snr)?;
    Ok(rate / (1.0 + snr).log2())
}

/// Free-space LoS path loss in dB: 20 log10(4π f d / c) + η_LoS.
pub fn path_loss_los(
    frequency_hz: f64,
    distance_m: f64,
    eta_los_db: f64,
) -> Result<f64, OracleError> {
    require_positive("path_loss_los", "frequency", frequency_hz)?;
    require_positive("path_loss_los", "distance", distance_m)?;
    Ok(
        20.0 * (4.0 * std::f64::consts::PI * frequency_hz * distance_m / SPEED_OF_LIGHT).log10()
            + eta_los_db,
    )
}

/// LoS-probability-weighted mean of LoS and NLoS path loss, dB.
pub fn avg_path_loss(p_los: f64, pl_los_db: f64, pl_nlos_db: f64) -> Result<f64, OracleError> {
    if !(0.0..=1.0).contains(&p_los) {
        return Err(OracleError::Domain {
            formula: "avg_path_loss",
            param: "p_los",
            message: format!("must be a probability in [0,1], got {p_los}"),
        });
    }
    Ok(p_los * pl_los_db + (1.0 - p_los) * pl_nlos_db)
}

/// Induced power in forward flight:
/// P_i * ( sqrt(1 + V^4 / (4 v0^4)) - V^2 / (2 v0^2) )^(1/2).
/// Equals P_i at hover and decreases with forward speed.
pub fn induced_power(p_i: f64, v0: f64, v: f64) -> Result<f64, OracleError> {
    require_positive("induced_power", "v0", v0)?;
    require_non_negative("induced_power", "v", v)?;
    let ratio2 = v * v / (2.0 * v0 * v0);
    let bracket = (1.0 + v.powi(4) / (4.0 * v0.powi(4))).sqrt() - ratio2;
    Ok(p_i * bracket.sqrt())
}

/// Parasite power against airframe drag: (1/2) d0 ρ s A V^3, watts.
pub fn parasite_power(d0: f64, rho: f64, s: f64, area: f64, v: f64) -> Result<f64, OracleError> {
    require_positive("parasite_power", "d0", d0)?;
    require_positive("parasite_power", "rho", rho)?;
    require_positive("parasite_power", "s", s)?;
    require_positive("parasite_power", "area", area)?;
    require_non_negative("parasite_power", "v", v)?;
    Ok(0.5 * d0 * rho * s * area * v * v * v)
}

/// Hover power from momentum theory: W^(3/2) / sqrt(2 ρ A), watts.
pub fn hover_power(thrust_n: f64, rho: f64, area: f64) -> Result<f64, OracleError> {
    require_non_negative("hover_power", "w", thrust_n)?;
    require_positive("hover_power", "rho", rho)?;
    require_positive("hover_power", "area", area)?;
    Ok(thrust_n.powf(1.5) / (2.0 * rho * area).sqrt())
}

/// Time to push `size_bits` through a link of bandwidth B at SNR P g / N0:
/// S / (B log2(1 + P g / N0)), seconds.
pub fn transmission_delay(
    size_bits: f64,
    bandwidth_hz: f64,
    power_w: f64,
    gain: f64,
    noise_w: f64,
) -> Result<f64, OracleError> {
    require_positive("transmission_delay", "s", size_bits)?;
    require_positive("transmission_delay", "bandwidth", bandwidth_hz)?;
    require_positive("transmission_delay", "power", power_w)?;
    require_positive("transmission_delay", "gain", gain)?;
    require_positive("transmission_delay", "noise", noise_w)?;
    let rate = bandwidth_hz * (1.0 + power_w * gain / noise_w).log2();
    if rate == 0.0 {
        return Err(OracleError::Infeasible {
            formula: "transmission_delay",
            param: "rate",
        });
    }
    Ok(size_bits / rate)
}

/// Total forward-flight power: blade + induced + parasite, watts.
pub fn total_forward_power(blade: f64, induced: f64, parasite: f64) -> Result<f64, OracleError> {
    require_non_negative("total_forward_power", "blade", blade)?;
    require_non_negative("total_forward_power", "induced", induced)?;
    require_non_negative("total_forward_power", "parasite", parasite)?;
    Ok(blade + induced + parasite)
}

/// Link-budget received power: P_t + G - L, all in dB domain (result dBm).
pub fn received_power(p_t_dbm: f64, gain_db: f64, path_loss_db: f64) -> Result<f64, OracleError> {
    for (param, v) in [
        ("p_t", p_t_dbm),
        ("gain", gain_db),
        ("path_loss", path_loss_db),
    ] {
        if !v.is_finite() {
            return Err(OracleError::Domain {
                formula: "received_power",
                param,
                message: format!("must be finite, got {v}"),
            });
        }
    }
    Ok(p_t_dbm + gain_db - path_loss_db)
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// A parameter value with its unit string ("" for dimensionless).
pub type ParamValue = (f64, String);

/// Named parameters supplied to [`FormulaRegistry::evaluate`].
pub type ParamMap = BTreeMap<String, ParamValue>;

/// One registered formula: its required parameters (name, canonical unit),
/// the compute function over values in declaration order, and a citation
/// string for the standard form it implements.
pub struct FormulaBinding {
    pub formula_id: &'static str,
    pub required_params: &'static [(&'static str, &'static str)],
    pub compute: fn(&[f64]) -> Result<f64, OracleError>,
    pub reference: &'static str,
}

/// Registry of all executable formula bindings.
pub struct FormulaRegistry {
    bindings: BTreeMap<&'static str, FormulaBinding>,
}

impl FormulaRegistry {
    /// The standard registry: the rotary-wing power decomposition, the
    /// sigmoid air-to-ground LoS model, free-space path loss, Shannon
    /// capacity, and the dB link budget.
    pub fn standard() -> Self {
        let mut bindings = BTreeMap::new();
        let all = [
            FormulaBinding {
                formula_id: "blade_power",
                required_params: &[("p0", ""), ("v", "m/s"), ("omega", "rad/s"), ("r", "m")],
                compute: |p| blade_power(p[0], p[1], p[2], p[3]),
                reference: "rotary-wing profile power term, forward flight",
            },
            FormulaBinding {
                formula_id: "elevation_angle",
                required_params: &[
                    ("user_x", "m"),
                    ("user_y", "m"),
                    ("uav_x", "m"),
                    ("uav_y", "m"),
                    ("uav_z", "m"),
                ],
                compute: |p| elevation_angle((p[0], p[1]), (p[2], p[3], p[4])),
                reference: "arctangent of altitude over ground distance",
            },
            FormulaBinding {
                formula_id: "los_probability",
                required_params: &[("a", ""), ("b", ""), ("theta", "deg")],
                compute: |p| los_probability(p[0], p[1], p[2]),
                reference: "sigmoid air-to-ground LoS probability model",
            },
            FormulaBinding {
                formula_id: "shannon_rate",
                required_params: &[("bandwidth", "Hz"), ("snr", "")],
                compute: |p| shannon_rate(p[0], p[1]),
                reference: "Shannon capacity of an AWGN channel",
            },
            FormulaBinding {
                formula_id: "required_bandwidth",
                required_params: &[("rate", "bit/s"), ("snr", "")],
                compute: |p| required_bandwidth(p[0], p[1]),
                reference: "inverse Shannon capacity",
            },
            FormulaBinding {
                formula_id: "path_loss_los",
                required_params: &[("frequency", "Hz"), ("distance", "m"), ("eta_los", "dB")],
                compute: |p| path_loss_los(p[0], p[1], p[2]),
                reference: "free-space path loss plus LoS excess",
            },
            FormulaBinding {
                formula_id: "avg_path_loss",
                required_params: &[("p_los", ""), ("pl_los", "dB"), ("pl_nlos", "dB")],
                compute: |p| avg_path_loss(p[0], p[1], p[2]),
                reference: "probability-weighted LoS/NLoS path loss",
            },
            FormulaBinding {
                formula_id: "induced_power",
                required_params: &[("p_i", "W"), ("v0", "m/s"), ("v", "m/s")],
                compute: |p| induced_power(p[0], p[1], p[2]),
                reference: "rotary-wing induced power term, forward flight",
            },
            FormulaBinding {
                formula_id: "parasite_power",
                required_params: &[
                    ("d0", ""),
                    ("rho", "kg/m^3"),
                    ("s", ""),
                    ("area", "m^2"),
                    ("v", "m/s"),
                ],
                compute: |p| parasite_power(p[0], p[1], p[2], p[3], p[4]),
                reference: "fuselage drag power, cubic in airspeed",
            },
            FormulaBinding {
                formula_id: "hover_power",
                required_params: &[("w", "N"), ("rho", "kg/m^3"), ("area", "m^2")],
                compute: |p| hover_power(p[0], p[1], p[2]),
                reference: "momentum-theory hover power",
            },
            FormulaBinding {
                formula_id: "transmission_delay",
                required_params: &[
                    ("s", "bit"),
                    ("bandwidth", "Hz"),
                    ("power", "W"),
                    ("gain", ""),
                    ("noise", "W"),
                ],
                compute: |p| transmission_delay(p[0], p[1], p[2], p[3], p[4]),
                reference: "payload size over Shannon rate",
            },
            FormulaBinding {
                formula_id: "total_forward_power",
                required_params: &[("blade", "W"), ("induced", "W"), ("parasite", "W")],
                compute: |p| total_forward_power(p[0], p[1], p[2]),
                reference: "sum of forward-flight power components",
            },
            FormulaBinding {
                formula_id: "received_power",
                required_params: &[("p_t", "dBm"), ("gain", "dB"), ("path_loss", "dB")],
                compute: |p| received_power(p[0], p[1], p[2]),
                reference: "dB link budget: transmit power plus gain minus loss",
            },
        ];
        for binding in all {
            bindings.insert(binding.formula_id, binding);
        }
        FormulaRegistry { bindings }
    }

    pub fn get(&self, formula_id: &str) -> Option<&FormulaBinding> {
        self.bindings.get(formula_id)
    }

    pub fn formula_ids(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.bindings.keys().copied()
    }

    /// Dispatch to a bound formula. Parameters must cover the required set
    /// exactly; units are converted through [`UNIT_CONVERSIONS`] first.
    pub fn evaluate(&self, formula_id: &str, params: &ParamMap) -> Result<f64, OracleError> {
        let binding = self
            .bindings
            .get(formula_id)
            .ok_or_else(|| OracleError::UnknownFormula(formula_id.to_string()))?;

        for name in params.keys() {
            if !binding.required_params.iter().any(|(n, _)| n == name) {
                return Err(OracleError::UnexpectedParam {
                    formula: formula_id.to_string(),
                    param: name.clone(),
                });
            }
        }

        let mut values = Vec::with_capacity(binding.required_params.len());
        for (name, expected_unit) in binding.required_params {
            let (value, unit) = params.get(*name).ok_or_else(|| OracleError::MissingParam {
                formula: formula_id.to_string(),
                param: (*name).to_string(),
            })?;
            values.push(convert_unit(formula_id, name, *value, unit, expected_unit)?);
        }
        (binding.compute)(&values)
    }
}

/// Convert `value` from `unit` to `expected`: identity when equal, a table
/// factor when listed, otherwise an error. An empty supplied unit means the
/// value is already in the canonical unit.
fn convert_unit(
    formula: &str,
    param: &str,
    value: f64,
    unit: &str,
    expected: &str,
) -> Result<f64, OracleError> {
    if unit == expected || unit.is_empty() {
        return Ok(value);
    }
    for (from, to, factor) in UNIT_CONVERSIONS {
        if *from == unit && *to == expected {
            return Ok(value * factor);
        }
    }
    Err(OracleError::UnknownUnit {
        formula: formula.to_string(),
        param: param.to_string(),
        got: unit.to_string(),
        expected: expected.to_string(),
    })
}
