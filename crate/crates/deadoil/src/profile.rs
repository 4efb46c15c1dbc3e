//! Named analytic profiles for sources and targets, so runs need no data files.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use deadoil_core::{Field, Grid};

use crate::error::AppError;
use crate::io::read_field_csv;

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    Constant(f64),
    /// `amplitude · exp(−|x − c|² / radius²)`
    GaussianBump {
        cx: f64,
        cy: f64,
        radius: f64,
        amplitude: f64,
    },
    /// `amplitude · sin(kx·π·x/lx) · sin(ky·π·y/ly)`
    Sinusoid {
        kx: f64,
        ky: f64,
        amplitude: f64,
    },
    /// Field CSV in the `x,y,value` format.
    File(PathBuf),
}

impl Profile {
    /// Parses `zero`, `constant c`, `gaussian_bump cx cy radius amplitude`,
    /// `sinusoid kx ky amplitude` or `file PATH`. Relative paths resolve
    /// against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Profile, String> {
        let mut words = text.split_whitespace();
        let head = words.next().ok_or("empty profile")?;
        let rest: Vec<&str> = words.collect();
        let nums = |n: usize| -> Result<Vec<f64>, String> {
            if rest.len() != n {
                return Err(format!("'{head}' takes {n} numbers, got {}", rest.len()));
            }
            rest.iter()
                .map(|w| {
                    w.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| format!("'{w}' is not a finite number"))
                })
                .collect()
        };
        match head {
            "zero" => nums(0).map(|_| Profile::Zero),
            "constant" => nums(1).map(|v| Profile::Constant(v[0])),
            "gaussian_bump" => {
                let v = nums(4)?;
                if v[2] <= 0.0 {
                    return Err("gaussian_bump radius must be positive".into());
                }
                Ok(Profile::GaussianBump {
                    cx: v[0],
                    cy: v[1],
                    radius: v[2],
                    amplitude: v[3],
                })
            }
            "sinusoid" => nums(3).map(|v| Profile::Sinusoid {
                kx: v[0],
                ky: v[1],
                amplitude: v[2],
            }),
            "file" => match rest.as_slice() {
                [p] => Ok(Profile::File(base.join(p))),
                _ => Err("'file' takes exactly one path".into()),
            },
            other => Err(format!(
                "unknown profile '{other}' (zero, constant, gaussian_bump, sinusoid, file)"
            )),
        }
    }

    pub fn realize(&self, grid: Grid) -> Result<Field, AppError> {
        Ok(match *self {
            Profile::Zero => Field::zeros(grid),
            Profile::Constant(c) => Field::constant(grid, c),
            Profile::GaussianBump {
                cx,
                cy,
                radius,
                amplitude,
            } => Field::from_fn(grid, |x, y| {
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                amplitude * (-r2 / (radius * radius)).exp()
            }),
            Profile::Sinusoid { kx, ky, amplitude } => {
                let (lx, ly) = (grid.lx(), grid.ly());
                Field::from_fn(grid, |x, y| {
                    amplitude * (kx * PI * x / lx).sin() * (ky * PI * y / ly).sin()
                })
            }
            Profile::File(ref path) => read_field_csv(path, grid)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_profiles() {
        let base = Path::new("/tmp");
        assert_eq!(Profile::parse("zero", base).unwrap(), Profile::Zero);
        assert_eq!(
            Profile::parse("gaussian_bump 0.5 0.5 0.1 2", base).unwrap(),
            Profile::GaussianBump {
                cx: 0.5,
                cy: 0.5,
                radius: 0.1,
                amplitude: 2.0
            }
        );
        assert_eq!(
            Profile::parse("file data/u.csv", base).unwrap(),
            Profile::File(PathBuf::from("/tmp/data/u.csv"))
        );
        assert!(Profile::parse("sinusoid 1 2", base).is_err());
        assert!(Profile::parse("gaussian_bump 0 0 -1 1", base).is_err());
        assert!(Profile::parse("ramp 1", base).is_err());
    }

    #[test]
    fn bump_peaks_at_center() {
        let g = Grid::unit_square(3).unwrap();
        let f = Profile::parse("gaussian_bump 0.5 0.5 0.2 3", Path::new("."))
            .unwrap()
            .realize(g)
            .unwrap();
        assert_eq!(f.values()[g.index(1, 1)], 3.0);
    }
}
