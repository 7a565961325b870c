//! Mamdani inference: fuzzification, MIN/MAX rule firing, MIN activation
//! (clipping), MAX aggregation, and centroid defuzzification over a uniform
//! sample grid.
//!
//! The centroid uses trapezoid-rule quadrature (endpoint samples at half
//! weight) so that coarse and fine grids agree to second order in the step.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Connector, FuzzyController, FuzzyVariable, Rule, TrapezoidShape};

pub const DEFAULT_SAMPLE_COUNT: usize = 1000;

/// Crisp input values keyed by input-variable name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InputVector(pub BTreeMap<String, f64>);

impl InputVector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, name: impl Into<String>, value: f64) -> Self {
        self.0.insert(name.into(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for InputVector {
    fn from_iter<T: IntoIterator<Item = (S, f64)>>(iter: T) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// The aggregated output membership curve: `n + 1` equally spaced samples
/// spanning the output domain.
#[derive(Debug, Clone)]
pub struct AggregatedOutput {
    pub domain_left: f64,
    pub domain_right: f64,
    /// Membership degree at each of the `n + 1` grid points.
    pub degrees: Vec<f64>,
}

impl AggregatedOutput {
    pub fn sample_x(&self, i: usize) -> f64 {
        let n = self.degrees.len() - 1;
        self.domain_left + (self.domain_right - self.domain_left) * i as f64 / n as f64
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.degrees.iter().enumerate().map(|(i, &d)| (self.sample_x(i), d))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InferenceError {
    #[error("input vector is missing variable `{0}`")]
    MissingInput(String),
    #[error("rule `{rule}` references unresolved clause `{variable}.{term}`")]
    DanglingClause {
        rule: String,
        variable: String,
        term: String,
    },
}

/// Outcome of a full inference pass.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub output: f64,
    pub fired_rule_count: usize,
    /// Input variables whose crisp value was clamped into the domain.
    pub clamped: Vec<String>,
    /// True when no rule fired and the output fell back to the domain midpoint.
    pub no_rule_fired: bool,
}

/// One entry per term: `(term name, membership degree)` at the clamped input.
pub fn fuzzify(variable: &FuzzyVariable, x: f64) -> BTreeMap<String, f64> {
    let clamped = x.clamp(variable.domain_left, variable.domain_right);
    variable
        .terms
        .iter()
        .map(|t| (t.name.clone(), t.shape.membership(clamped)))
        .collect()
}

/// Firing strength of a rule: MIN (and) or MAX (or) over the antecedent
/// clause degrees, scaled by the rule weight.
pub fn rule_strength(
    rule: &Rule,
    degrees: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<f64, InferenceError> {
    let mut clause_degrees = rule.antecedent.iter().map(|clause| {
        degrees
            .get(&clause.variable)
            .and_then(|terms| terms.get(&clause.term))
            .copied()
            .ok_or_else(|| InferenceError::DanglingClause {
                rule: rule.name.clone(),
                variable: clause.variable.clone(),
                term: clause.term.clone(),
            })
    });
    let first = clause_degrees.next().transpose()?.unwrap_or(0.0);
    let combined = clause_degrees.try_fold(first, |acc, d| {
        let d = d?;
        Ok(match rule.connector {
            Connector::And => acc.min(d),
            Connector::Or => acc.max(d),
        })
    })?;
    Ok(combined * rule.weight)
}

/// MIN-activation / MAX-aggregation over the output domain: at each grid
/// point, `max` over rules of `min(strength, consequent membership)`.
pub fn aggregate(fc: &FuzzyController, strengths: &[f64], n: usize) -> AggregatedOutput {
    let output = fc.output_variable().expect("controller has an output variable");
    let shapes: Vec<(f64, TrapezoidShape)> = fc
        .rule_base
        .iter()
        .zip(strengths)
        .map(|(rule, &s)| {
            let term = output
                .term(&rule.consequent.term)
                .expect("validated consequent term");
            (s, term.shape)
        })
        .collect();
    let mut degrees = Vec::with_capacity(n + 1);
    let width = output.domain_right - output.domain_left;
    for i in 0..=n {
        let x = output.domain_left + width * i as f64 / n as f64;
        let mut best = 0.0_f64;
        for (s, shape) in &shapes {
            best = best.max(s.min(shape.membership(x)));
        }
        degrees.push(best);
    }
    AggregatedOutput {
        domain_left: output.domain_left,
        domain_right: output.domain_right,
        degrees,
    }
}

/// Centroid of the aggregated curve via trapezoid-rule quadrature.
/// Returns `(value, no_rule_fired)`; a flat-zero curve falls back to the
/// domain midpoint.
pub fn defuzzify_centroid(agg: &AggregatedOutput) -> (f64, bool) {
    let n = agg.degrees.len() - 1;
    let mut sum_mu = 0.0;
    let mut sum_xmu = 0.0;
    for (i, &mu) in agg.degrees.iter().enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        let x = agg.sample_x(i);
        sum_mu += w * mu;
        sum_xmu += w * x * mu;
    }
    if sum_mu == 0.0 {
        ((agg.domain_left + agg.domain_right) / 2.0, true)
    } else {
        (sum_xmu / sum_mu, false)
    }
}

/// Full Mamdani pass: fuzzify -> rule strengths -> aggregate -> centroid.
pub fn infer(
    fc: &FuzzyController,
    input: &InputVector,
    n: usize,
) -> Result<InferenceResult, InferenceError> {
    let mut degrees = BTreeMap::new();
    let mut clamped = Vec::new();
    for v in fc.input_variables() {
        let x = input
            .get(&v.name)
            .ok_or_else(|| InferenceError::MissingInput(v.name.clone()))?;
        if x < v.domain_left || x > v.domain_right {
            clamped.push(v.name.clone());
        }
        degrees.insert(v.name.clone(), fuzzify(v, x));
    }
    let strengths = fc
        .rule_base
        .iter()
        .map(|r| rule_strength(r, &degrees))
        .collect::<Result<Vec<f64>, _>>()?;
    let fired_rule_count = strengths.iter().filter(|&&s| s > 0.0).count();
    let agg = aggregate(fc, &strengths, n);
    let (output, no_rule_fired) = defuzzify_centroid(&agg);
    Ok(InferenceResult {
        output,
        fired_rule_count,
        clamped,
        no_rule_fired,
    })
}

/// Precompiled controller for repeated inference over many inputs.
///
/// Resolves every clause to array indices once and groups rules by
/// consequent term, which is exact for MIN activation and MAX aggregation:
/// `max_r min(s_r, mu_t(x)) = min(max_r s_r, mu_t(x))` per term.
pub struct CompiledController {
    inputs: Vec<(TrapezoidShapeList, f64, f64)>,
    /// Per rule: (connector, weight, clause list as (input idx, term idx), output term idx).
    rules: Vec<(Connector, f64, Vec<(u16, u16)>, u16)>,
    output_terms: Vec<TrapezoidShape>,
    domain_left: f64,
    domain_right: f64,
}

type TrapezoidShapeList = Vec<TrapezoidShape>;

impl CompiledController {
    pub fn compile(fc: &FuzzyController) -> Result<Self, InferenceError> {
        let input_vars: Vec<&FuzzyVariable> = fc.input_variables().collect();
        let output = fc
            .output_variable()
            .ok_or_else(|| InferenceError::MissingInput("<output>".to_string()))?;
        let mut rules = Vec::with_capacity(fc.rule_base.len());
        for rule in &fc.rule_base {
            let mut clauses = Vec::with_capacity(rule.antecedent.len());
            for clause in &rule.antecedent {
                let (vi, var) = input_vars
                    .iter()
                    .enumerate()
                    .find(|(_, v)| v.name == clause.variable)
                    .ok_or_else(|| InferenceError::DanglingClause {
                        rule: rule.name.clone(),
                        variable: clause.variable.clone(),
                        term: clause.term.clone(),
                    })?;
                let ti = var
                    .terms
                    .iter()
                    .position(|t| t.name == clause.term)
                    .ok_or_else(|| InferenceError::DanglingClause {
                        rule: rule.name.clone(),
                        variable: clause.variable.clone(),
                        term: clause.term.clone(),
                    })?;
                clauses.push((vi as u16, ti as u16));
            }
            let oti = output
                .terms
                .iter()
                .position(|t| t.name == rule.consequent.term)
                .ok_or_else(|| InferenceError::DanglingClause {
                    rule: rule.name.clone(),
                    variable: rule.consequent.variable.clone(),
                    term: rule.consequent.term.clone(),
                })?;
            rules.push((rule.connector, rule.weight, clauses, oti as u16));
        }
        Ok(Self {
            inputs: input_vars
                .iter()
                .map(|v| {
                    (
                        v.terms.iter().map(|t| t.shape).collect(),
                        v.domain_left,
                        v.domain_right,
                    )
                })
                .collect(),
            rules,
            output_terms: output.terms.iter().map(|t| t.shape).collect(),
            domain_left: output.domain_left,
            domain_right: output.domain_right,
        })
    }

    /// Crisp output for inputs given in input-variable declaration order.
    /// Bit-identical to [`infer`] on the same controller.
    pub fn infer_ordered(&self, xs: &[f64], n: usize, scratch: &mut InferScratch) -> f64 {
        debug_assert_eq!(xs.len(), self.inputs.len());
        scratch.degrees.clear();
        scratch.bases.clear();
        for ((shapes, left, right), &x) in self.inputs.iter().zip(xs) {
            let x = x.clamp(*left, *right);
            scratch.bases.push(scratch.degrees.len());
            for shape in shapes {
                scratch.degrees.push(shape.membership(x));
            }
        }
        // Strongest firing per output term.
        scratch.term_strengths.clear();
        scratch.term_strengths.resize(self.output_terms.len(), 0.0);
        for (connector, weight, clauses, oti) in &self.rules {
            let mut acc = match connector {
                Connector::And => 1.0_f64,
                Connector::Or => 0.0_f64,
            };
            for &(vi, ti) in clauses {
                let d = scratch.degrees[scratch.bases[vi as usize] + ti as usize];
                acc = match connector {
                    Connector::And => acc.min(d),
                    Connector::Or => acc.max(d),
                };
            }
            let s = acc * weight;
            let slot = &mut scratch.term_strengths[*oti as usize];
            if s > *slot {
                *slot = s;
            }
        }

        let width = self.domain_right - self.domain_left;
        let mut sum_mu = 0.0;
        let mut sum_xmu = 0.0;
        for i in 0..=n {
            let x = self.domain_left + width * i as f64 / n as f64;
            let mut best = 0.0_f64;
            for (shape, &s) in self.output_terms.iter().zip(&scratch.term_strengths) {
                best = best.max(s.min(shape.membership(x)));
            }
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            sum_mu += w * best;
            sum_xmu += w * x * best;
        }
        if sum_mu == 0.0 {
            (self.domain_left + self.domain_right) / 2.0
        } else {
            sum_xmu / sum_mu
        }
    }
}

/// Reusable buffers for [`CompiledController::infer_ordered`].
#[derive(Default)]
pub struct InferScratch {
    degrees: Vec<f64>,
    bases: Vec<usize>,
    term_strengths: Vec<f64>,
}
