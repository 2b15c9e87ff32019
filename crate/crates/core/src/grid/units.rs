//! Conversion of file units into the canonical analysis units:
//! precipitation in mm/day, temperatures in °C.

use super::{GridError, Variable};

pub const PR_CANONICAL: &str = "mm/day";
pub const TEMP_CANONICAL: &str = "degC";

const SECONDS_PER_DAY: f64 = 86_400.0;
const KELVIN_OFFSET: f64 = 273.15;

/// An affine map `canonical = raw * scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitConversion {
    pub scale: f64,
    pub offset: f64,
}

impl UnitConversion {
    pub const IDENTITY: UnitConversion = UnitConversion {
        scale: 1.0,
        offset: 0.0,
    };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    pub fn apply(&self, raw: f64) -> f64 {
        if self.is_identity() {
            raw
        } else if self.offset == 0.0 {
            raw * self.scale
        } else {
            raw * self.scale + self.offset
        }
    }

    /// Inverse map, used when writing fixtures in non-canonical units.
    pub fn invert(&self, canonical: f64) -> f64 {
        if self.is_identity() {
            canonical
        } else {
            (canonical - self.offset) / self.scale
        }
    }
}

fn normalize(units: &str) -> String {
    units
        .trim()
        .to_ascii_lowercase()
        .replace("**", "^")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn canonical_units(variable: Variable) -> &'static str {
    match variable {
        Variable::Pr => PR_CANONICAL,
        Variable::Tasmax | Variable::Tasmin => TEMP_CANONICAL,
    }
}

/// Finds the conversion from `units` to `variable`'s canonical units.
pub fn conversion_for(variable: Variable, units: &str) -> Result<UnitConversion, GridError> {
    let u = normalize(units);
    let unknown = || GridError::UnitUnknown {
        variable: variable.to_string(),
        units: units.to_string(),
    };
    match variable {
        Variable::Pr => match u.as_str() {
            "mm/day" | "mm day-1" | "mm d-1" | "mm/d" | "mm day^-1" => Ok(UnitConversion::IDENTITY),
            "kg m-2 s-1" | "kg/m2/s" | "kg m^-2 s^-1" | "kg/m^2/s" | "mm/s" | "mm s-1" => {
                Ok(UnitConversion {
                    scale: SECONDS_PER_DAY,
                    offset: 0.0,
                })
            }
            _ => Err(unknown()),
        },
        Variable::Tasmax | Variable::Tasmin => match u.as_str() {
            "degc" | "°c" | "c" | "celsius" | "degree_celsius" | "degrees_celsius" | "deg c" => {
                Ok(UnitConversion::IDENTITY)
            }
            "k" | "kelvin" | "degk" | "degrees_kelvin" => Ok(UnitConversion {
                scale: 1.0,
                offset: -KELVIN_OFFSET,
            }),
            _ => Err(unknown()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn freezing_point() {
        let c = conversion_for(Variable::Tasmax, "K").unwrap();
        assert_eq!(c.apply(273.15), 0.0);
    }

    #[test]
    fn flux_to_mm_per_day() {
        let c = conversion_for(Variable::Pr, "kg m-2 s-1").unwrap();
        assert_eq!(c.apply(1.0), 86_400.0);
    }

    #[test]
    fn canonical_is_identity() {
        for (v, u) in [(Variable::Pr, "mm/day"), (Variable::Tasmin, "degC")] {
            let c = conversion_for(v, u).unwrap();
            assert!(c.is_identity());
            for x in [-3.5, 0.0, 1e-9, 17.25] {
                assert_eq!(c.apply(x).to_bits(), x.to_bits());
            }
        }
    }

    #[test]
    fn unknown_units() {
        assert!(matches!(
            conversion_for(Variable::Pr, "furlongs"),
            Err(GridError::UnitUnknown { .. })
        ));
        assert!(conversion_for(Variable::Tasmax, "mm/day").is_err());
    }
}
