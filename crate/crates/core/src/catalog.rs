//! Built-in problems: operators in θ-form with initial values and a point.

use crate::arith::GaussianRational;
use crate::error::{Error, Result};
use crate::ode::{Poly, Problem, ThetaOde};

pub const NAMES: [&str; 4] = ["ln2", "exp", "arctan", "geometric"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub name: &'static str,
    pub description: &'static str,
    pub ode: ThetaOde,
    pub inits: Vec<GaussianRational>,
    pub point: GaussianRational,
}

impl Entry {
    pub fn problem(&self) -> Problem {
        Problem { ode: self.ode.clone(), inits: self.inits.clone(), point: self.point.clone() }
    }
}

fn ints(v: &[i64]) -> Vec<GaussianRational> {
    v.iter().map(|&x| GaussianRational::from_int(x)).collect()
}

pub fn get(name: &str) -> Result<Entry> {
    let half: GaussianRational = "1/2".parse()?;
    let (description, coeffs, inits, point) = match name {
        // (1-z)θ² - θ annihilates -ln(1-z).
        "ln2" => (
            "-ln(1-z) at z = 1/2",
            vec![Poly::zero(), Poly::from_ints(&[-1]), Poly::from_ints(&[1, -1])],
            ints(&[0, 1]),
            half,
        ),
        "exp" => (
            "exp(z) at z = 1",
            vec![Poly::from_ints(&[0, -1]), Poly::from_ints(&[1])],
            ints(&[1]),
            GaussianRational::one(),
        ),
        "arctan" => (
            "arctan(z) at z = 1/2",
            vec![Poly::zero(), Poly::from_ints(&[-1, 0, 1]), Poly::from_ints(&[1, 0, 1])],
            ints(&[0, 1]),
            half,
        ),
        "geometric" => (
            "1/(1-z) at z = 1/2",
            vec![Poly::from_ints(&[0, -1]), Poly::from_ints(&[1, -1])],
            ints(&[1]),
            half,
        ),
        _ => return Err(Error::UnknownProblem(name.to_string())),
    };
    let name = NAMES.iter().find(|&&n| n == name).unwrap();
    Ok(Entry { name, description, ode: ThetaOde::new(coeffs)?, inits, point })
}

pub fn all() -> Vec<Entry> {
    NAMES.iter().map(|n| get(n).unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{radius_lower_bound, EvalPoint};

    #[test]
    fn entries_are_valid() {
        for e in all() {
            assert_eq!(e.inits.len(), e.ode.order());
            // The crude root bound may only reach |ζ|; the tail certificate does the rest.
            if let Some(l) = radius_lower_bound(&e.ode) {
                assert!(EvalPoint::new(&e.point).modulus_upper() <= l, "{}", e.name);
            }
        }
        assert!(matches!(get("pi"), Err(Error::UnknownProblem(_))));
    }
}
