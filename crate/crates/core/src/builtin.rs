//! Built-in problems on the unit disk.

use crate::error::{Error, Result};
use crate::problem::{load_problem, ProblemSpec};

pub const BUILTIN_IDS: [&str; 3] = ["ex-3.1", "ex-3.2", "mean-field"];

const LAPLACIAN_DIRICHLET: &str = r#""operator": {"a11": "1", "a22": "1"},
      "boundary": {"kind": "dirichlet", "zeta": "1"}"#;

fn two_component_disk(components: [String; 2]) -> String {
    format!(
        r#"{{
  "domain": {{"type": "disk", "radius": 1}},
  "components": [
    {},
    {}
  ]
}}
"#,
        components[0], components[1]
    )
}

/// Returns the JSON document of a built-in problem.
pub fn builtin_document(id: &str) -> Result<String> {
    let doc = match id {
        "ex-3.1" => two_component_disk([
            format!(
                r#"{{
      {LAPLACIAN_DIRICHLET},
      "f": "w*exp(max(u1,u2))", "f_monotone": "inc",
      "w": {{"expr": "inv(INT(exp(max(u1,u2))))", "monotone": "dec"}},
      "h": {{"expr": "EVAL(1,[0,0])^2 + EVAL(2,[0,0])^(1/2)", "monotone": "inc"}},
      "lambda": "1/3", "eta": "1/4", "rho": 1
    }}"#
            ),
            format!(
                r#"{{
      {LAPLACIAN_DIRICHLET},
      "f": "w*max(u1,u2)^2", "f_monotone": "inc",
      "w": {{"expr": "inv(INT(exp(u1+u2)))", "monotone": "dec"}},
      "h": {{"expr": "EVAL(1,[0,0])^(1/4) + INT(u2)^2", "monotone": "inc"}},
      "lambda": "1/5", "eta": "1/15", "rho": 1
    }}"#
            ),
        ]),
        "ex-3.2" => two_component_disk([
            format!(
                r#"{{
      {LAPLACIAN_DIRICHLET},
      "f": "w*u1^2*sin(u2)", "f_monotone": "inc",
      "w": {{"expr": "inv(INT(exp(max(u1,u2))))", "monotone": "dec"}},
      "h": {{"expr": "EVAL(1,[0,0]) + EVAL(2,[0,0])^2", "monotone": "inc"}},
      "lambda": "1/2", "eta": "1/3", "rho": "pi/4"
    }}"#
            ),
            format!(
                r#"{{
      {LAPLACIAN_DIRICHLET},
      "f": "w*u2^4*cos(u1)",
      "w": {{"expr": "inv(INT(exp(u1+u2)))", "monotone": "dec"}},
      "h": {{"expr": "EVAL(1,[0,0]) + EVAL(2,[0,0])^3", "monotone": "inc"}},
      "lambda": "1/2", "eta": "1/4", "rho": "pi/2"
    }}"#
            ),
        ]),
        "mean-field" => r#"{
  "domain": {"type": "disk", "radius": 1},
  "components": [
    {
      "operator": {"a11": "1", "a22": "1"},
      "boundary": {"kind": "dirichlet", "zeta": "1"},
      "f": "w*exp(u1)", "f_monotone": "inc",
      "w": {"expr": "inv(INT(exp(u1)))", "monotone": "dec"},
      "h": {"expr": "0", "monotone": "inc"},
      "lambda": 1, "eta": 0, "rho": 2
    }
  ]
}
"#
        .to_string(),
        other => {
            return Err(Error::Usage(format!(
                "unknown example `{other}`; expected one of {}",
                BUILTIN_IDS.join(", ")
            )))
        }
    };
    Ok(doc)
}

pub fn builtin_example(id: &str) -> Result<ProblemSpec> {
    load_problem(&builtin_document(id)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn all_builtins_load() {
        for id in BUILTIN_IDS {
            builtin_example(id).unwrap_or_else(|e| panic!("{id}: {e}"));
        }
        assert!(builtin_example("ex-9").is_err());
    }

    #[test]
    fn parameters() {
        let p = builtin_example("ex-3.1").unwrap();
        let got: Vec<_> = p.components.iter().flat_map(|c| [c.lambda, c.eta]).collect();
        assert_eq!(got, vec![1.0 / 3.0, 0.25, 0.2, 1.0 / 15.0]);
        assert_eq!(p.rho(), vec![1.0, 1.0]);
        let p = builtin_example("ex-3.2").unwrap();
        assert_eq!(p.rho(), vec![PI / 4.0, PI / 2.0]);
    }
}
