//! JSON description of an evaluation problem.
//!
//! ```json
//! {"form": "theta", "coeffs": [[["0","0"], ["-1","0"]], [["1","0"]]],
//!  "initial_values": ["1"], "point": "1/2"}
//! ```

use std::path::Path;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use super::{Poly, ThetaOde};
use crate::arith::{GaussianInt, GaussianRational};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeForm {
    Theta,
    Dz,
}

/// Wire format; coefficient parts are decimal strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub form: OdeForm,
    pub coeffs: Vec<Vec<[String; 2]>>,
    pub initial_values: Vec<String>,
    pub point: String,
}

/// A validated operator with its initial values and evaluation point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub ode: ThetaOde,
    pub inits: Vec<GaussianRational>,
    pub point: GaussianRational,
}

fn parse_int(s: &str) -> Result<BigInt> {
    s.trim().parse().map_err(|_| Error::Parse { what: "integer", input: s.to_string() })
}

impl ProblemFile {
    pub fn into_problem(&self) -> Result<Problem> {
        let polys = self
            .coeffs
            .iter()
            .map(|p| {
                p.iter()
                    .map(|[re, im]| Ok(GaussianInt::new(parse_int(re)?, parse_int(im)?)))
                    .collect::<Result<Vec<_>>>()
                    .map(Poly::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let ode = match self.form {
            OdeForm::Theta => ThetaOde::new(polys)?,
            OdeForm::Dz => ThetaOde::from_dz(polys)?,
        };
        let inits = self.initial_values.iter().map(|s| s.parse()).collect::<Result<Vec<_>>>()?;
        if inits.len() != ode.order() {
            return Err(Error::Arity { expected: ode.order(), got: inits.len() });
        }
        let point = self.point.parse()?;
        Ok(Problem { ode, inits, point })
    }
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<ProblemFile>(text)?.into_problem()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// θ-form wire representation.
    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            form: OdeForm::Theta,
            coeffs: self
                .ode
                .coeffs()
                .iter()
                .map(|p| p.coeffs().iter().map(|c| [c.re.to_string(), c.im.to_string()]).collect())
                .collect(),
            initial_values: self.inits.iter().map(|x| x.to_string()).collect(),
            point: self.point.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_theta_and_dz() {
        let theta = r#"{"form":"theta","coeffs":[[["0","0"],["-1","0"]],[["1","0"]]],
            "initial_values":["1"],"point":"1/2"}"#;
        let dz = r#"{"form":"dz","coeffs":[[["-1","0"]],[["1","0"]]],
            "initial_values":["1"],"point":"1/2"}"#;
        let a = Problem::from_json(theta).unwrap();
        let b = Problem::from_json(dz).unwrap();
        assert_eq!(a, b);
        assert_eq!(Problem::from_json(&serde_json::to_string(&a.to_file()).unwrap()).unwrap(), a);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_int = r#"{"form":"theta","coeffs":[[["x","0"]],[["1","0"]]],
            "initial_values":["1"],"point":"1/2"}"#;
        assert!(matches!(Problem::from_json(bad_int), Err(Error::Parse { .. })));
        let arity = r#"{"form":"theta","coeffs":[[["0","0"]],[["1","0"]]],
            "initial_values":[],"point":"1/2"}"#;
        assert!(matches!(Problem::from_json(arity), Err(Error::Arity { .. })));
        let singular = r#"{"form":"theta","coeffs":[[["0","0"]],[["0","0"],["1","0"]]],
            "initial_values":["1"],"point":"1/2"}"#;
        assert!(matches!(Problem::from_json(singular), Err(Error::NotOrdinary)));
    }
}
