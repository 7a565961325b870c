//! In-memory representation of a fuzzy controller: variables, trapezoid
//! terms, rules, and the default Go win-rate knowledge base and rule grid.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Trapezoid membership function given by four abscissae `p1 <= p2 <= p3 <= p4`.
///
/// Shoulder shapes are expressed with degenerate edges (`p1 == p2` or
/// `p3 == p4`); the membership at the shared abscissa is 1.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TrapezoidShape {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
}

impl TrapezoidShape {
    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Self {
        Self { p1, p2, p3, p4 }
    }

    pub fn is_ordered(&self) -> bool {
        self.p1 <= self.p2 && self.p2 <= self.p3 && self.p3 <= self.p4
    }

    /// Piecewise-linear membership degree at `x`, in `[0, 1]`.
    #[inline]
    pub fn membership(&self, x: f64) -> f64 {
        if x < self.p1 || x > self.p4 {
            0.0
        } else if x >= self.p2 && x <= self.p3 {
            1.0
        } else if x < self.p2 {
            // x >= p1 and x < p2 imply p1 < p2, so the slope is finite.
            (x - self.p1) / (self.p2 - self.p1)
        } else {
            (self.p4 - x) / (self.p4 - self.p3)
        }
    }

    pub fn params(&self) -> [f64; 4] {
        [self.p1, self.p2, self.p3, self.p4]
    }
}

/// Linguistic hedge. Only `Normal` appears in the dialect we accept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Hedge {
    Normal,
}

impl fmt::Display for Hedge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hedge::Normal => write!(f, "Normal"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FuzzyTerm {
    pub name: String,
    pub hedge: Hedge,
    pub shape: TrapezoidShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum VariableKind {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FuzzyVariable {
    pub name: String,
    pub kind: VariableKind,
    pub domain_left: f64,
    pub domain_right: f64,
    /// Carried opaquely for round-trip; no runtime meaning here.
    pub scale: String,
    pub terms: Vec<FuzzyTerm>,
}

impl FuzzyVariable {
    pub fn term(&self, name: &str) -> Option<&FuzzyTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    pub fn domain_width(&self) -> f64 {
        self.domain_right - self.domain_left
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Connector {
    And,
    Or,
}

impl fmt::Display for Connector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Connector::And => write!(f, "and"),
            Connector::Or => write!(f, "or"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum RuleOperator {
    Min,
    Max,
}

impl fmt::Display for RuleOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleOperator::Min => write!(f, "MIN"),
            RuleOperator::Max => write!(f, "MAX"),
        }
    }
}

/// One `(variable, term)` reference inside a rule.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize)]
pub struct Clause {
    pub variable: String,
    pub term: String,
}

impl Clause {
    pub fn new(variable: impl Into<String>, term: impl Into<String>) -> Self {
        Self {
            variable: variable.into(),
            term: term.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Rule {
    pub name: String,
    pub connector: Connector,
    pub operator: RuleOperator,
    pub weight: f64,
    pub antecedent: Vec<Clause>,
    pub consequent: Clause,
}

/// Inference method settings of the rule base. The dialect fixes these to
/// Mamdani with MIN activation, MIN and, MAX or.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RuleBaseSettings {
    pub name: String,
    pub activation_method: RuleOperator,
    pub and_method: RuleOperator,
    pub or_method: RuleOperator,
    pub inference_type: String,
}

impl Default for RuleBaseSettings {
    fn default() -> Self {
        Self {
            name: "RuleBase1".to_string(),
            activation_method: RuleOperator::Min,
            and_method: RuleOperator::Min,
            or_method: RuleOperator::Max,
            inference_type: "mamdani".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FuzzyController {
    pub name: String,
    /// Opaque `ip` attribute, preserved for round-trip.
    pub ip: String,
    pub knowledge_base: Vec<FuzzyVariable>,
    pub settings: RuleBaseSettings,
    pub rule_base: Vec<Rule>,
}

impl FuzzyController {
    pub fn variable(&self, name: &str) -> Option<&FuzzyVariable> {
        self.knowledge_base.iter().find(|v| v.name == name)
    }

    pub fn input_variables(&self) -> impl Iterator<Item = &FuzzyVariable> {
        self.knowledge_base
            .iter()
            .filter(|v| v.kind == VariableKind::Input)
    }

    pub fn output_variable(&self) -> Option<&FuzzyVariable> {
        self.knowledge_base
            .iter()
            .find(|v| v.kind == VariableKind::Output)
    }

    pub fn term_count(&self) -> usize {
        self.knowledge_base.iter().map(|v| v.terms.len()).sum()
    }
}

/// A structural invariant violation found by [`validate_controller`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation(pub String);

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("consequent map returned unknown output term `{term}` for combination {combo}")]
    UnknownConsequentTerm { term: String, combo: String },
    #[error("knowledge base is missing an output variable")]
    MissingOutput,
    #[error("knowledge base has no input variables")]
    MissingInputs,
}

fn trapezoid(p: [f64; 4]) -> TrapezoidShape {
    TrapezoidShape::new(p[0], p[1], p[2], p[3])
}

fn term(name: &str, p: [f64; 4]) -> FuzzyTerm {
    FuzzyTerm {
        name: name.to_string(),
        hedge: Hedge::Normal,
        shape: trapezoid(p),
    }
}

fn variable(
    name: &str,
    kind: VariableKind,
    domain: (f64, f64),
    terms: Vec<FuzzyTerm>,
) -> FuzzyVariable {
    FuzzyVariable {
        name: name.to_string(),
        kind,
        domain_left: domain.0,
        domain_right: domain.1,
        scale: String::new(),
        terms,
    }
}

/// The seven variables of the Go win-rate knowledge base: six Darkforest
/// inputs (simulation numbers, win rates, top-move rates for Black and
/// White) and the ELF win-rate output EWR.
pub fn build_master_knowledge_base() -> Vec<FuzzyVariable> {
    let sim_terms = || {
        vec![
            term("Low", [0.0, 0.0, 0.4, 0.6]),
            term("High", [0.4, 0.6, 1.0, 1.0]),
        ]
    };
    let wr_terms = || {
        vec![
            term("Low", [0.0, 0.0, 0.3, 0.4]),
            term("Medium", [0.3, 0.4, 0.6, 0.7]),
            term("High", [0.6, 0.7, 1.0, 1.0]),
        ]
    };
    let tmr_terms = || {
        vec![
            term("Low", [-1.0, -1.0, -0.2, 0.2]),
            term("High", [-0.2, 0.2, 1.0, 1.0]),
        ]
    };
    vec![
        variable("DBSN", VariableKind::Input, (0.0, 1.0), sim_terms()),
        variable("DWSN", VariableKind::Input, (0.0, 1.0), sim_terms()),
        variable("DBWR", VariableKind::Input, (0.0, 1.0), wr_terms()),
        variable("DWWR", VariableKind::Input, (0.0, 1.0), wr_terms()),
        variable("DBTMR", VariableKind::Input, (-1.0, 1.0), tmr_terms()),
        variable("DWTMR", VariableKind::Input, (-1.0, 1.0), tmr_terms()),
        variable(
            "EWR",
            VariableKind::Output,
            (0.0, 1.0),
            vec![
                term("Low", [0.0, 0.0, 0.2, 0.3]),
                term("Medium_Low", [0.2, 0.3, 0.4, 0.55]),
                term("Medium_High", [0.4, 0.55, 0.7, 0.8]),
                term("High", [0.7, 0.8, 1.0, 1.0]),
            ],
        ),
    ]
}

/// Antecedent combination handed to a consequent map: one `(variable, term)`
/// pair per input variable, in knowledge-base order.
pub type Combination<'a> = [(&'a str, &'a str)];

/// Maps an antecedent combination to the name of an output term.
pub trait ConsequentMap {
    fn consequent(&self, combo: &Combination) -> String;
}

impl<F> ConsequentMap for F
where
    F: Fn(&Combination) -> String,
{
    fn consequent(&self, combo: &Combination) -> String {
        self(combo)
    }
}

/// Shipped default consequent mapping, driven by the (DBWR, DWWR) win-rate
/// pair. DBWR sets the band (Low -> Low, High -> High); when DBWR is Medium
/// the opponent rate decides (DWWR Low -> Medium_High, DWWR High ->
/// Medium_Low) and a Medium/Medium tie falls to DBTMR (High -> Medium_High,
/// Low -> Medium_Low). Simulation numbers never change the consequent.
/// Documented in docs/rule-map.md; override with a consequent-table file.
#[derive(Debug, Clone, Copy, Default)]
pub struct DefaultConsequentMap;

impl ConsequentMap for DefaultConsequentMap {
    fn consequent(&self, combo: &Combination) -> String {
        let get = |var: &str| {
            combo
                .iter()
                .find(|(v, _)| *v == var)
                .map(|(_, t)| *t)
                .unwrap_or("")
        };
        match get("DBWR") {
            "Low" => "Low",
            "High" => "High",
            _ => match get("DWWR") {
                "Low" => "Medium_High",
                "High" => "Medium_Low",
                _ => {
                    if get("DBTMR") == "High" {
                        "Medium_High"
                    } else {
                        "Medium_Low"
                    }
                }
            },
        }
        .to_string()
    }
}

/// A consequent map backed by an explicit table of combinations, falling
/// back to the default mapping for combinations not listed.
#[derive(Debug, Clone, Default)]
pub struct TableConsequentMap {
    /// Keyed by the antecedent term names in knowledge-base input order.
    pub entries: BTreeMap<Vec<String>, String>,
}

impl ConsequentMap for TableConsequentMap {
    fn consequent(&self, combo: &Combination) -> String {
        let key: Vec<String> = combo.iter().map(|(_, t)| t.to_string()).collect();
        match self.entries.get(&key) {
            Some(term) => term.clone(),
            None => DefaultConsequentMap.consequent(combo),
        }
    }
}

/// Enumerates the full Cartesian grid of antecedent combinations over the
/// input variables (first input outermost, last innermost; terms in
/// declaration order) and emits one `and`/MIN rule of weight 1 per
/// combination, named `Rule1`, `Rule2`, ... in enumeration order.
pub fn build_full_grid_rule_base(
    kb: &[FuzzyVariable],
    consequents: &dyn ConsequentMap,
) -> Result<Vec<Rule>, ModelError> {
    let inputs: Vec<&FuzzyVariable> = kb
        .iter()
        .filter(|v| v.kind == VariableKind::Input)
        .collect();
    if inputs.is_empty() {
        return Err(ModelError::MissingInputs);
    }
    let output = kb
        .iter()
        .find(|v| v.kind == VariableKind::Output)
        .ok_or(ModelError::MissingOutput)?;

    let total: usize = inputs.iter().map(|v| v.terms.len()).product();
    let mut rules = Vec::with_capacity(total);
    let mut indices = vec![0usize; inputs.len()];
    for rule_no in 1..=total {
        let combo: Vec<(&str, &str)> = inputs
            .iter()
            .zip(&indices)
            .map(|(v, &i)| (v.name.as_str(), v.terms[i].name.as_str()))
            .collect();
        let consequent_term = consequents.consequent(&combo);
        if output.term(&consequent_term).is_none() {
            return Err(ModelError::UnknownConsequentTerm {
                term: consequent_term,
                combo: format!("{combo:?}"),
            });
        }
        rules.push(Rule {
            name: format!("Rule{rule_no}"),
            connector: Connector::And,
            operator: RuleOperator::Min,
            weight: 1.0,
            antecedent: combo
                .iter()
                .map(|(v, t)| Clause::new(*v, *t))
                .collect(),
            consequent: Clause::new(output.name.as_str(), consequent_term),
        });
        // Odometer increment, last variable fastest.
        for pos in (0..indices.len()).rev() {
            indices[pos] += 1;
            if indices[pos] < inputs[pos].terms.len() {
                break;
            }
            indices[pos] = 0;
        }
    }
    Ok(rules)
}

/// The full master controller: master knowledge base plus the 144-rule
/// grid under the given consequent map.
pub fn build_master_controller(consequents: &dyn ConsequentMap) -> FuzzyController {
    let kb = build_master_knowledge_base();
    let rules = build_full_grid_rule_base(&kb, consequents).expect("master grid is total");
    FuzzyController {
        name: String::new(),
        ip: "localhost".to_string(),
        knowledge_base: kb,
        settings: RuleBaseSettings::default(),
        rule_base: rules,
    }
}

/// Checks every structural invariant and returns one violation per finding.
/// An empty result means the controller is valid. Never mutates.
pub fn validate_controller(fc: &FuzzyController) -> Vec<Violation> {
    let mut out = Vec::new();
    // Variable and term names are referenced from rule clauses as element
    // text, where surrounding whitespace is not significant; require them to
    // be non-empty and trimmed so every reference is unambiguous.
    let check_name = |out: &mut Vec<Violation>, what: String, name: &str| {
        if name.is_empty() {
            out.push(Violation(format!("{what} is empty")));
        } else if name.trim() != name {
            out.push(Violation(format!(
                "{what} `{name}` has leading or trailing whitespace"
            )));
        }
    };
    let mut seen_vars = HashSet::new();
    for v in &fc.knowledge_base {
        check_name(&mut out, "variable name".to_string(), &v.name);
        if !seen_vars.insert(v.name.as_str()) {
            out.push(Violation(format!("duplicate variable name `{}`", v.name)));
        }
        if !(v.domain_left < v.domain_right) {
            out.push(Violation(format!(
                "variable `{}`: domain [{}, {}] is not a proper interval",
                v.name, v.domain_left, v.domain_right
            )));
        }
        if v.terms.is_empty() {
            out.push(Violation(format!("variable `{}` has no terms", v.name)));
        }
        let mut seen_terms = HashSet::new();
        for t in &v.terms {
            check_name(
                &mut out,
                format!("variable `{}`: term name", v.name),
                &t.name,
            );
            if !seen_terms.insert(t.name.as_str()) {
                out.push(Violation(format!(
                    "variable `{}`: duplicate term name `{}`",
                    v.name, t.name
                )));
            }
            let p = t.shape.params();
            if !t.shape.is_ordered() {
                out.push(Violation(format!(
                    "term `{}.{}`: trapezoid parameters {:?} are not ascending",
                    v.name, t.name, p
                )));
            }
            if p.iter().any(|&x| x < v.domain_left || x > v.domain_right) {
                out.push(Violation(format!(
                    "term `{}.{}`: trapezoid parameters {:?} leave domain [{}, {}]",
                    v.name, t.name, p, v.domain_left, v.domain_right
                )));
            }
        }
    }

    let outputs: Vec<&FuzzyVariable> = fc
        .knowledge_base
        .iter()
        .filter(|v| v.kind == VariableKind::Output)
        .collect();
    if outputs.len() != 1 {
        out.push(Violation(format!(
            "controller must have exactly one output variable, found {}",
            outputs.len()
        )));
    }

    let mut seen_antecedents: HashSet<Vec<&Clause>> = HashSet::new();
    for rule in &fc.rule_base {
        if !(0.0..=1.0).contains(&rule.weight) {
            out.push(Violation(format!(
                "rule `{}`: weight {} outside [0, 1]",
                rule.name, rule.weight
            )));
        }
        for clause in &rule.antecedent {
            match fc.variable(&clause.variable) {
                None => out.push(Violation(format!(
                    "rule `{}`: antecedent references unknown variable `{}`",
                    rule.name, clause.variable
                ))),
                Some(v) => {
                    if v.kind != VariableKind::Input {
                        out.push(Violation(format!(
                            "rule `{}`: antecedent references non-input variable `{}`",
                            rule.name, clause.variable
                        )));
                    }
                    if v.term(&clause.term).is_none() {
                        out.push(Violation(format!(
                            "rule `{}`: antecedent references unknown term `{}.{}`",
                            rule.name, clause.variable, clause.term
                        )));
                    }
                }
            }
        }
        match fc.variable(&rule.consequent.variable) {
            None => out.push(Violation(format!(
                "rule `{}`: consequent references unknown variable `{}`",
                rule.name, rule.consequent.variable
            ))),
            Some(v) => {
                if v.kind != VariableKind::Output {
                    out.push(Violation(format!(
                        "rule `{}`: consequent references non-output variable `{}`",
                        rule.name, rule.consequent.variable
                    )));
                }
                if v.term(&rule.consequent.term).is_none() {
                    out.push(Violation(format!(
                        "rule `{}`: consequent references unknown term `{}.{}`",
                        rule.name, rule.consequent.variable, rule.consequent.term
                    )));
                }
            }
        }
        let key: Vec<&Clause> = rule.antecedent.iter().collect();
        if !seen_antecedents.insert(key) {
            out.push(Violation(format!(
                "rule `{}`: antecedent duplicates an earlier rule",
                rule.name
            )));
        }
    }
    out
}
