//! FML dialect reader/writer.
//!
//! The accepted grammar is exactly the Mamdani/trapezoid dialect described
//! in docs/fml-schema.md: `FuzzyController[ip,name]` containing one
//! `KnowledgeBase` of `FuzzyVariable`/`FuzzyTerm`/`TrapezoidShape` and one
//! `RuleBase` of `Rule`/`Antecedent`/`Consequent`/`Clause`. Unknown elements,
//! attributes, or hedges are parse errors. Serialization is deterministic:
//! fixed element and attribute order, shortest round-trip decimals.

use std::fmt;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::model::{
    validate_controller, Clause, Connector, FuzzyController, FuzzyTerm, FuzzyVariable, Hedge,
    Rule, RuleBaseSettings, RuleOperator, TrapezoidShape, VariableKind,
};

/// An FML document: raw XML text plus a name used in diagnostics.
#[derive(Debug, Clone)]
pub struct FmlDocument {
    pub text: String,
    pub source_name: String,
}

impl FmlDocument {
    pub fn new(text: impl Into<String>, source_name: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source_name: source_name.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone)]
pub struct ParseDiagnostic {
    pub severity: Severity,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {sev}: {}", self.line, self.column, self.message)
    }
}

/// Byte offset -> (line, column), both 1-based.
struct LineIndex {
    line_starts: Vec<usize>,
}

impl LineIndex {
    fn new(text: &str) -> Self {
        let mut line_starts = vec![0];
        for (i, b) in text.bytes().enumerate() {
            if b == b'\n' {
                line_starts.push(i + 1);
            }
        }
        Self { line_starts }
    }

    fn locate(&self, offset: usize) -> (usize, usize) {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        (line + 1, offset - self.line_starts[line] + 1)
    }
}

/// Minimal DOM used as the intermediate between XML events and the model.
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Element>,
    text: String,
    line: usize,
    column: usize,
}

impl Element {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }
}

struct Mapper<'a> {
    source: &'a str,
    diags: Vec<ParseDiagnostic>,
}

impl Mapper<'_> {
    fn error(&mut self, el: &Element, message: String) {
        self.diags.push(ParseDiagnostic {
            severity: Severity::Error,
            line: el.line,
            column: el.column,
            message,
        });
    }

    fn check_attrs(&mut self, el: &Element, allowed: &[&str]) {
        for (k, _) in &el.attrs {
            if !allowed.contains(&k.as_str()) {
                self.error(el, format!("unknown attribute `{k}` on <{}>", el.name));
            }
        }
    }

    fn required_attr(&mut self, el: &Element, name: &str) -> Option<String> {
        match el.attr(name) {
            Some(v) => Some(v.to_string()),
            None => {
                self.error(el, format!("missing attribute `{name}` on <{}>", el.name));
                None
            }
        }
    }

    fn numeric_attr(&mut self, el: &Element, name: &str) -> Option<f64> {
        let raw = self.required_attr(el, name)?;
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Some(v),
            _ => {
                self.error(
                    el,
                    format!("attribute `{name}`=\"{raw}\" on <{}> is not a number", el.name),
                );
                None
            }
        }
    }

    fn map_controller(&mut self, root: &Element) -> Option<FuzzyController> {
        if root.name != "FuzzyController" {
            self.error(root, format!("expected root <FuzzyController>, found <{}>", root.name));
            return None;
        }
        self.check_attrs(root, &["ip", "name"]);
        let ip = self.required_attr(root, "ip")?;
        let name = self.required_attr(root, "name")?;

        let mut knowledge_base = None;
        let mut rule_base = None;
        for child in &root.children {
            match child.name.as_str() {
                "KnowledgeBase" if knowledge_base.is_none() => {
                    knowledge_base = Some(self.map_knowledge_base(child))
                }
                "RuleBase" if rule_base.is_none() => rule_base = Some(self.map_rule_base(child)),
                "KnowledgeBase" | "RuleBase" => {
                    self.error(child, format!("duplicate <{}>", child.name))
                }
                other => self.error(child, format!("unknown element <{other}>")),
            }
        }
        if knowledge_base.is_none() {
            self.error(root, "missing <KnowledgeBase>".to_string());
        }
        if rule_base.is_none() {
            self.error(root, "missing <RuleBase>".to_string());
        }
        let (settings, rules) = rule_base??;
        Some(FuzzyController {
            name,
            ip,
            knowledge_base: knowledge_base??,
            settings,
            rule_base: rules,
        })
    }

    fn map_knowledge_base(&mut self, el: &Element) -> Option<Vec<FuzzyVariable>> {
        self.check_attrs(el, &[]);
        let mut vars = Vec::new();
        for child in &el.children {
            if child.name != "FuzzyVariable" {
                self.error(child, format!("unknown element <{}>", child.name));
                continue;
            }
            if let Some(v) = self.map_variable(child) {
                vars.push(v);
            }
        }
        Some(vars)
    }

    fn map_variable(&mut self, el: &Element) -> Option<FuzzyVariable> {
        self.check_attrs(el, &["domainleft", "domainright", "name", "scale", "type"]);
        let name = self.required_attr(el, "name")?;
        let domain_left = self.numeric_attr(el, "domainleft")?;
        let domain_right = self.numeric_attr(el, "domainright")?;
        let scale = self.required_attr(el, "scale")?;
        let kind = match self.required_attr(el, "type")?.as_str() {
            "input" => VariableKind::Input,
            "output" => VariableKind::Output,
            other => {
                self.error(el, format!("unknown variable type `{other}` (expected input|output)"));
                return None;
            }
        };
        let mut terms = Vec::new();
        for child in &el.children {
            if child.name != "FuzzyTerm" {
                self.error(child, format!("unknown element <{}>", child.name));
                continue;
            }
            if let Some(t) = self.map_term(child) {
                terms.push(t);
            }
        }
        Some(FuzzyVariable {
            name,
            kind,
            domain_left,
            domain_right,
            scale,
            terms,
        })
    }

    fn map_term(&mut self, el: &Element) -> Option<FuzzyTerm> {
        self.check_attrs(el, &["name", "hedge"]);
        let name = self.required_attr(el, "name")?;
        let hedge = match self.required_attr(el, "hedge")?.as_str() {
            "Normal" => Hedge::Normal,
            other => {
                self.error(el, format!("unknown hedge `{other}` (only Normal is supported)"));
                return None;
            }
        };
        let mut shape = None;
        for child in &el.children {
            if child.name != "TrapezoidShape" || shape.is_some() {
                self.error(child, format!("unexpected element <{}>", child.name));
                continue;
            }
            self.check_attrs(child, &["Param1", "Param2", "Param3", "Param4"]);
            let p1 = self.numeric_attr(child, "Param1")?;
            let p2 = self.numeric_attr(child, "Param2")?;
            let p3 = self.numeric_attr(child, "Param3")?;
            let p4 = self.numeric_attr(child, "Param4")?;
            shape = Some(TrapezoidShape::new(p1, p2, p3, p4));
        }
        match shape {
            Some(shape) => Some(FuzzyTerm { name, hedge, shape }),
            None => {
                self.error(el, format!("term `{name}` is missing <TrapezoidShape>"));
                None
            }
        }
    }

    fn operator_attr(&mut self, el: &Element, name: &str) -> Option<RuleOperator> {
        match self.required_attr(el, name)?.as_str() {
            "MIN" => Some(RuleOperator::Min),
            "MAX" => Some(RuleOperator::Max),
            other => {
                self.error(el, format!("attribute `{name}`=\"{other}\": expected MIN or MAX"));
                None
            }
        }
    }

    fn map_rule_base(&mut self, el: &Element) -> Option<(RuleBaseSettings, Vec<Rule>)> {
        self.check_attrs(
            el,
            &["activationMethod", "andMethod", "orMethod", "name", "type"],
        );
        let settings = RuleBaseSettings {
            name: self.required_attr(el, "name")?,
            activation_method: self.operator_attr(el, "activationMethod")?,
            and_method: self.operator_attr(el, "andMethod")?,
            or_method: self.operator_attr(el, "orMethod")?,
            inference_type: {
                let t = self.required_attr(el, "type")?;
                if t != "mamdani" {
                    self.error(el, format!("unsupported inference type `{t}` (only mamdani)"));
                    return None;
                }
                t
            },
        };
        let mut rules = Vec::new();
        for child in &el.children {
            if child.name != "Rule" {
                self.error(child, format!("unknown element <{}>", child.name));
                continue;
            }
            if let Some(r) = self.map_rule(child) {
                rules.push(r);
            }
        }
        Some((settings, rules))
    }

    fn map_rule(&mut self, el: &Element) -> Option<Rule> {
        self.check_attrs(el, &["name", "connector", "weight", "operator"]);
        let name = self.required_attr(el, "name")?;
        let connector = match self.required_attr(el, "connector")?.as_str() {
            "and" => Connector::And,
            "or" => Connector::Or,
            other => {
                self.error(el, format!("unknown connector `{other}` (expected and|or)"));
                return None;
            }
        };
        let weight = self.numeric_attr(el, "weight")?;
        let operator = self.operator_attr(el, "operator")?;

        let mut antecedent = None;
        let mut consequent = None;
        for child in &el.children {
            match child.name.as_str() {
                "Antecedent" if antecedent.is_none() => {
                    self.check_attrs(child, &[]);
                    let clauses: Vec<Clause> = child
                        .children
                        .iter()
                        .filter_map(|c| self.map_clause(c))
                        .collect();
                    if clauses.is_empty() {
                        self.error(child, "antecedent has no clauses".to_string());
                    }
                    antecedent = Some(clauses);
                }
                "Consequent" if consequent.is_none() => {
                    self.check_attrs(child, &[]);
                    let clauses: Vec<Clause> = child
                        .children
                        .iter()
                        .filter_map(|c| self.map_clause(c))
                        .collect();
                    if clauses.len() != 1 {
                        self.error(
                            child,
                            format!("consequent must hold exactly one clause, found {}", clauses.len()),
                        );
                    }
                    consequent = clauses.into_iter().next();
                }
                other => self.error(child, format!("unexpected element <{other}>")),
            }
        }
        if antecedent.is_none() {
            self.error(el, format!("rule `{name}` is missing <Antecedent>"));
        }
        if consequent.is_none() {
            self.error(el, format!("rule `{name}` is missing <Consequent>"));
        }
        Some(Rule {
            name,
            connector,
            operator,
            weight,
            antecedent: antecedent?,
            consequent: consequent?,
        })
    }

    fn map_clause(&mut self, el: &Element) -> Option<Clause> {
        if el.name != "Clause" {
            self.error(el, format!("unexpected element <{}>", el.name));
            return None;
        }
        self.check_attrs(el, &[]);
        let mut variable = None;
        let mut term = None;
        for child in &el.children {
            match child.name.as_str() {
                "Variable" if variable.is_none() => variable = Some(child.text.trim().to_string()),
                "Term" if term.is_none() => term = Some(child.text.trim().to_string()),
                other => self.error(child, format!("unexpected element <{other}>")),
            }
        }
        if variable.is_none() || term.is_none() {
            self.error(el, "clause must hold one <Variable> and one <Term>".to_string());
        }
        Some(Clause {
            variable: variable?,
            term: term?,
        })
    }

    fn root_location(&self) -> (usize, usize) {
        let _ = self.source;
        (1, 1)
    }
}

fn build_dom(doc: &FmlDocument) -> Result<Element, Vec<ParseDiagnostic>> {
    let index = LineIndex::new(&doc.text);
    let diag_at = |offset: usize, message: String| {
        let (line, column) = index.locate(offset.min(doc.text.len()));
        ParseDiagnostic {
            severity: Severity::Error,
            line,
            column,
            message,
        }
    };

    let mut reader = Reader::from_str(&doc.text);
    reader.config_mut().trim_text(true);

    let make_element = |start: &quick_xml::events::BytesStart, offset: usize| -> Result<Element, ParseDiagnostic> {
        let (line, column) = index.locate(offset);
        let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
        let mut attrs = Vec::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| diag_at(offset, format!("bad attribute: {e}")))?;
            let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
            let value = attr
                .unescape_value()
                .map_err(|e| diag_at(offset, format!("bad attribute value: {e}")))?
                .into_owned();
            attrs.push((key, value));
        }
        Ok(Element {
            name,
            attrs,
            children: Vec::new(),
            text: String::new(),
            line,
            column,
        })
    };

    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let offset = reader.buffer_position() as usize;
        match reader.read_event() {
            Err(e) => {
                return Err(vec![diag_at(
                    reader.buffer_position() as usize,
                    format!("malformed XML: {e}"),
                )])
            }
            Ok(Event::Eof) => break,
            Ok(Event::Decl(_)) | Ok(Event::Comment(_)) | Ok(Event::PI(_)) => {}
            Ok(Event::DocType(_)) => {
                return Err(vec![diag_at(offset, "DOCTYPE is not allowed".to_string())])
            }
            Ok(Event::CData(_)) => {
                return Err(vec![diag_at(offset, "CDATA is not allowed".to_string())])
            }
            Ok(Event::Start(start)) => {
                if root.is_some() && stack.is_empty() {
                    return Err(vec![diag_at(offset, "content after root element".to_string())]);
                }
                stack.push(make_element(&start, offset).map_err(|d| vec![d])?);
            }
            Ok(Event::Empty(start)) => {
                let el = make_element(&start, offset).map_err(|d| vec![d])?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => {
                        if root.is_some() {
                            return Err(vec![diag_at(offset, "content after root element".to_string())]);
                        }
                        root = Some(el);
                    }
                }
            }
            Ok(Event::End(_)) => {
                // quick-xml already enforces matching start/end names.
                let el = match stack.pop() {
                    Some(el) => el,
                    None => {
                        return Err(vec![diag_at(offset, "unmatched closing tag".to_string())])
                    }
                };
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Ok(Event::Text(text)) => {
                let value = text
                    .unescape()
                    .map_err(|e| vec![diag_at(offset, format!("bad text: {e}"))])?;
                match stack.last_mut() {
                    Some(parent) => parent.text.push_str(&value),
                    None if value.trim().is_empty() => {}
                    None => {
                        return Err(vec![diag_at(offset, "text outside root element".to_string())])
                    }
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(vec![diag_at(
            doc.text.len(),
            format!("unexpected end of document inside <{}>", stack.last().unwrap().name),
        )]);
    }
    root.ok_or_else(|| vec![diag_at(doc.text.len(), "empty document".to_string())])
}

/// Parses an FML document into a validated [`FuzzyController`].
///
/// On failure returns every diagnostic found; each carries a line/column.
/// The returned controller always passes [`validate_controller`].
pub fn parse_fml(doc: &FmlDocument) -> Result<FuzzyController, Vec<ParseDiagnostic>> {
    let root = build_dom(doc)?;
    let mut mapper = Mapper {
        source: &doc.text,
        diags: Vec::new(),
    };
    let controller = mapper.map_controller(&root);
    if let Some(fc) = &controller {
        let (line, column) = mapper.root_location();
        for violation in validate_controller(fc) {
            mapper.diags.push(ParseDiagnostic {
                severity: Severity::Error,
                line,
                column,
                message: violation.0,
            });
        }
    }
    match controller {
        Some(fc) if mapper.diags.iter().all(|d| d.severity != Severity::Error) => Ok(fc),
        _ => {
            if mapper.diags.is_empty() {
                mapper.diags.push(ParseDiagnostic {
                    severity: Severity::Error,
                    line: 1,
                    column: 1,
                    message: "document does not describe a fuzzy controller".to_string(),
                });
            }
            Err(mapper.diags)
        }
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

/// Shortest decimal that round-trips through `f64::parse`.
fn num(v: f64) -> String {
    format!("{v}")
}

/// Serializes a controller to its canonical FML text.
///
/// Output is byte-deterministic: fixed element/attribute order, two-space
/// indent, shortest round-trip decimals. Refuses invalid controllers.
pub fn serialize_fml(fc: &FuzzyController) -> Result<FmlDocument, Vec<crate::model::Violation>> {
    let violations = validate_controller(fc);
    if !violations.is_empty() {
        return Err(violations);
    }
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" ?>\n");
    out.push_str(&format!(
        "<FuzzyController ip=\"{}\" name=\"{}\">\n",
        escape_xml(&fc.ip),
        escape_xml(&fc.name)
    ));
    out.push_str("  <KnowledgeBase>\n");
    for v in &fc.knowledge_base {
        let kind = match v.kind {
            VariableKind::Input => "input",
            VariableKind::Output => "output",
        };
        out.push_str(&format!(
            "    <FuzzyVariable domainleft=\"{}\" domainright=\"{}\" name=\"{}\" scale=\"{}\" type=\"{}\">\n",
            num(v.domain_left),
            num(v.domain_right),
            escape_xml(&v.name),
            escape_xml(&v.scale),
            kind
        ));
        for t in &v.terms {
            out.push_str(&format!(
                "      <FuzzyTerm name=\"{}\" hedge=\"{}\">\n",
                escape_xml(&t.name),
                t.hedge
            ));
            let p = t.shape.params();
            out.push_str(&format!(
                "        <TrapezoidShape Param1=\"{}\" Param2=\"{}\" Param3=\"{}\" Param4=\"{}\" />\n",
                num(p[0]),
                num(p[1]),
                num(p[2]),
                num(p[3])
            ));
            out.push_str("      </FuzzyTerm>\n");
        }
        out.push_str("    </FuzzyVariable>\n");
    }
    out.push_str("  </KnowledgeBase>\n");
    out.push_str(&format!(
        "  <RuleBase activationMethod=\"{}\" andMethod=\"{}\" orMethod=\"{}\" name=\"{}\" type=\"{}\">\n",
        fc.settings.activation_method,
        fc.settings.and_method,
        fc.settings.or_method,
        escape_xml(&fc.settings.name),
        escape_xml(&fc.settings.inference_type)
    ));
    for rule in &fc.rule_base {
        out.push_str(&format!(
            "    <Rule name=\"{}\" connector=\"{}\" weight=\"{}\" operator=\"{}\">\n",
            escape_xml(&rule.name),
            rule.connector,
            num(rule.weight),
            rule.operator
        ));
        out.push_str("      <Antecedent>\n");
        for clause in &rule.antecedent {
            write_clause(&mut out, clause, "        ");
        }
        out.push_str("      </Antecedent>\n");
        out.push_str("      <Consequent>\n");
        write_clause(&mut out, &rule.consequent, "        ");
        out.push_str("      </Consequent>\n");
        out.push_str("    </Rule>\n");
    }
    out.push_str("  </RuleBase>\n");
    out.push_str("</FuzzyController>\n");
    Ok(FmlDocument::new(out, "<serialized>"))
}

fn write_clause(out: &mut String, clause: &Clause, indent: &str) {
    out.push_str(&format!("{indent}<Clause>\n"));
    out.push_str(&format!(
        "{indent}  <Variable>{}</Variable>\n",
        escape_xml(&clause.variable)
    ));
    out.push_str(&format!("{indent}  <Term>{}</Term>\n", escape_xml(&clause.term)));
    out.push_str(&format!("{indent}</Clause>\n"));
}
