//! Continuous models written as arithmetic expressions in a JSON document.
//!
//! Variables visible to every expression:
//!
//! | name            | meaning                         | type    |
//! |-----------------|---------------------------------|---------|
//! | `m`             | source mode                     | integer |
//! | `x0`, `x1`, ... | source coordinates              | float   |
//! | `n`             | target mode (density only)      | integer |
//! | `y0`, `y1`, ... | target coordinates (density)    | float   |
//!
//! Integer literals divide as integers (`3/4` is `0`), so write `0.75` or
//! `3.0/4.0`. Functions such as `min`, `max`, `if` and `math::sqrt` are
//! available.

use std::cell::RefCell;
use std::collections::BTreeMap;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, HashMapContext, Node, Value};
use serde::{Deserialize, Serialize};

use super::{ContinuousModel, Domain, Point};
use crate::error::{Error, Result};
use crate::lmc::Observation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionModelDocument {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "one")]
    pub modes: usize,
    #[serde(default)]
    pub ap: Vec<String>,
    /// Absent means the density is not Lipschitz in its source argument.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    pub density: String,
    /// Proposition name to boolean expression in `m` and `x*`.
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    /// Per target axis, expressions in `m`, `x*` and `n` locating jumps of
    /// the density.
    #[serde(default)]
    pub breakpoints: Vec<Vec<String>>,
}

fn one() -> usize {
    1
}

pub struct ExpressionModel {
    domain: Domain,
    ap: Vec<String>,
    lipschitz: f64,
    density: Node,
    labels: Vec<Node>,
    breakpoints: Vec<Vec<Node>>,
    context: RefCell<HashMapContext>,
}

impl std::fmt::Debug for ExpressionModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpressionModel")
            .field("domain", &self.domain)
            .field("ap", &self.ap)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

fn compile(what: &str, text: &str, allowed: &dyn Fn(&str) -> bool) -> Result<Node> {
    let node = build_operator_tree(text).map_err(|e| Error::Expression(format!("{what}: {e}")))?;
    if let Some(bad) = node.iter_variable_identifiers().find(|v| !allowed(v)) {
        return Err(Error::Expression(format!("{what}: unknown variable `{bad}`")));
    }
    Ok(node)
}

fn coordinate(prefix: char, dim: usize) -> impl Fn(&str) -> bool {
    move |v: &str| {
        v.strip_prefix(prefix)
            .and_then(|k| k.parse::<usize>().ok())
            .is_some_and(|k| k < dim)
    }
}

impl ExpressionModel {
    pub fn from_document(doc: &ExpressionModelDocument) -> Result<Self> {
        let domain = Domain::new(doc.lower.clone(), doc.upper.clone(), doc.modes)?;
        let d = domain.dim();
        let lipschitz = doc.lipschitz.unwrap_or(f64::INFINITY);
        if !(lipschitz >= 0.0) {
            return Err(Error::domain("Lipschitz constant must be non-negative"));
        }
        let xs = coordinate('x', d);
        let ys = coordinate('y', d);
        let source = |v: &str| v == "m" || xs(v);
        let kernel = |v: &str| source(v) || v == "n" || ys(v);
        let breakpoint_vars = |v: &str| source(v) || v == "n";

        let density = compile("density", &doc.density, &kernel)?;
        let mut ap = doc.ap.clone();
        for name in doc.labels.keys() {
            if !ap.contains(name) {
                ap.push(name.clone());
            }
        }
        let labels = ap
            .iter()
            .map(|name| match doc.labels.get(name) {
                Some(text) => compile(&format!("label `{name}`"), text, &source),
                None => compile(name, "false", &source),
            })
            .collect::<Result<Vec<_>>>()?;
        if doc.breakpoints.len() > d {
            return Err(Error::Dimension {
                expected: d,
                actual: doc.breakpoints.len(),
            });
        }
        let breakpoints = doc
            .breakpoints
            .iter()
            .enumerate()
            .map(|(axis, list)| {
                list.iter()
                    .map(|t| compile(&format!("breakpoint on axis {axis}"), t, &breakpoint_vars))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let model = ExpressionModel {
            domain,
            ap,
            lipschitz,
            density,
            labels,
            breakpoints,
            context: RefCell::new(HashMapContext::new()),
        };
        model.smoke_test()?;
        Ok(model)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ExpressionModelDocument =
            serde_json::from_str(text).map_err(|e| Error::Expression(e.to_string()))?;
        Self::from_document(&doc)
    }

    /// Evaluate everything once at the domain's lower corner so type errors
    /// surface at load time rather than as NaN during integration.
    fn smoke_test(&self) -> Result<()> {
        let p = Point::new(0, self.domain.lower.clone());
        self.bind_source(&p);
        for (name, node) in self.ap.iter().zip(&self.labels) {
            node.eval_boolean_with_context(&*self.context.borrow())
                .map_err(|e| Error::Expression(format!("label `{name}`: {e}")))?;
        }
        self.bind_target(0, &self.domain.lower);
        self.density
            .eval_number_with_context(&*self.context.borrow())
            .map_err(|e| Error::Expression(format!("density: {e}")))?;
        for list in &self.breakpoints {
            for node in list {
                node.eval_number_with_context(&*self.context.borrow())
                    .map_err(|e| Error::Expression(format!("breakpoint: {e}")))?;
            }
        }
        Ok(())
    }

    fn set(&self, name: String, value: Value) {
        // only fails for type changes of an existing binding, which we never do
        let _ = self.context.borrow_mut().set_value(name, value);
    }

    fn bind_source(&self, p: &Point) {
        self.set("m".into(), Value::Int(p.mode as i64));
        for (k, x) in p.x.iter().enumerate() {
            self.set(format!("x{k}"), Value::Float(*x));
        }
    }

    fn bind_target(&self, mode: usize, y: &[f64]) {
        self.set("n".into(), Value::Int(mode as i64));
        for (k, v) in y.iter().enumerate() {
            self.set(format!("y{k}"), Value::Float(*v));
        }
    }
}

impl ContinuousModel for ExpressionModel {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn ap(&self) -> &[String] {
        &self.ap
    }

    /// Evaluation errors become NaN, which quadrature reports as a failure.
    fn density(&self, from: &Point, to_mode: usize, to: &[f64]) -> f64 {
        self.bind_source(from);
        self.bind_target(to_mode, to);
        self.density
            .eval_number_with_context(&*self.context.borrow())
            .unwrap_or(f64::NAN)
    }

    fn label(&self, p: &Point) -> Observation {
        self.bind_source(p);
        let ctx = self.context.borrow();
        self.labels
            .iter()
            .enumerate()
            .fold(Observation::EMPTY, |obs, (i, node)| {
                if node.eval_boolean_with_context(&*ctx).unwrap_or(false) {
                    obs.with(i)
                } else {
                    obs
                }
            })
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn breakpoints(&self, from: &Point, to_mode: usize, axis: usize) -> Vec<f64> {
        let Some(list) = self.breakpoints.get(axis) else {
            return Vec::new();
        };
        self.bind_source(from);
        self.set("n".into(), Value::Int(to_mode as i64));
        let ctx = self.context.borrow();
        list.iter()
            .filter_map(|node| node.eval_number_with_context(&*ctx).ok())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::weather::weather_abstract;
    use crate::abstraction::{build_abstract, weather::weather_partition, Quadrature};

    const WEATHER: &str = r#"{
        "lower": [0.0], "upper": [1.0], "modes": 2,
        "ap": ["rain"],
        "density": "if(n == 1, (if(m == 1, 0.25, 0.0) + 0.75 * x0) * if(y0 < (1.0 + x0) / 2.0, 2.0 / (1.0 + x0), 0.0), (1.0 - if(m == 1, 0.25, 0.0) - 0.75 * x0) * if(y0 >= x0 / 2.0, 1.0 / (1.0 - x0 / 2.0), 0.0))",
        "labels": {"rain": "m == 1"},
        "breakpoints": [["(1.0 + x0) / 2.0", "x0 / 2.0"]]
    }"#;

    #[test]
    fn weather_as_expressions() {
        let m = ExpressionModel::from_json(WEATHER).unwrap();
        assert_eq!(m.lipschitz(), f64::INFINITY);
        let p = weather_partition(6).unwrap();
        let built = build_abstract(&m, &p, Quadrature::default()).unwrap();
        let closed = weather_abstract(6).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert!((built.prob(i, j) - closed.prob(i, j)).abs() < 1e-9);
            }
            assert_eq!(built.label(i), closed.label(i));
        }
    }

    #[test]
    fn rejects_unknown_variables() {
        let text = r#"{"lower": [0.0], "upper": [1.0], "density": "z + 1.0"}"#;
        assert!(matches!(ExpressionModel::from_json(text), Err(Error::Expression(_))));
        let text = r#"{"lower": [0.0], "upper": [1.0], "density": "y1"}"#;
        assert!(ExpressionModel::from_json(text).is_err());
    }

    #[test]
    fn rejects_syntax_and_type_errors() {
        let text = r#"{"lower": [0.0], "upper": [1.0], "density": "1.0 +"}"#;
        assert!(ExpressionModel::from_json(text).is_err());
        let text = r#"{"lower": [0.0], "upper": [1.0], "density": "1.0", "labels": {"a": "x0 + 1.0"}}"#;
        assert!(ExpressionModel::from_json(text).is_err());
    }

    #[test]
    fn uniform_square() {
        let text = r#"{"lower": [0.0, 0.0], "upper": [1.0, 2.0], "lipschitz": 0.0, "density": "0.5",
                       "labels": {"left": "x0 < 0.5"}}"#;
        let m = ExpressionModel::from_json(text).unwrap();
        assert_eq!(m.ap(), ["left".to_string()]);
        assert_eq!(m.label(&Point::new(0, vec![0.2, 1.0])), Observation::EMPTY.with(0));
        assert_eq!(m.label(&Point::new(0, vec![0.7, 1.0])), Observation::EMPTY);
        assert!((crate::abstraction::total_mass(&m, &Point::new(0, vec![0.1, 0.1]), Quadrature::default()).unwrap() - 1.0).abs() < 1e-12);
    }
}
