//! Relation schemas: named relations defined by boolean expressions over
//! point-pair predicates, compiled to question-level expressions and checked
//! for mutual exclusivity and exhaustiveness.
//!
//! File format (line oriented, `#` starts a comment):
//!
//! ```text
//! schema tbdense
//! domain consistent
//! relation Before := es <=
//! relation Includes := (ss <= & ee >) | (ss < & ee >=)
//! vague Vague := complement
//! symmetry Before After
//! ```
//!
//! Point predicates are `<pair> <op>` with `op` one of `<`, `<=`, `=`, `>`,
//! `>=`, `~` (vague) or `in {before, equal, ...}`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, AtomParser, Expr, Lexer, Token, TokenKind};
use crate::logic::{self, Assignment, Atom, LogicExpr, MintermSet, Question};
use crate::point::{enumerate_consistent_configurations, ConsistencyMode, PointConfiguration, PointPair, PointRelation};

/// Nonempty subset of the four point relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationSet(u8);

impl RelationSet {
    pub fn new(relations: impl IntoIterator<Item = PointRelation>) -> Option<Self> {
        let bits = relations.into_iter().fold(0u8, |acc, z| acc | 1 << z.index());
        (bits != 0).then_some(RelationSet(bits))
    }

    pub fn single(z: PointRelation) -> Self {
        RelationSet(1 << z.index())
    }

    pub fn contains(self, z: PointRelation) -> bool {
        self.0 >> z.index() & 1 == 1
    }

    pub fn iter(self) -> impl Iterator<Item = PointRelation> {
        PointRelation::ALL.into_iter().filter(move |&z| self.contains(z))
    }

    pub fn is_vacuous(self) -> bool {
        self.0 == 0b1111
    }

    fn comparator(self) -> Option<&'static str> {
        use PointRelation::*;
        let set = |zs: &[PointRelation]| RelationSet::new(zs.iter().copied()).unwrap();
        [
            ("<", set(&[Before])),
            ("<=", set(&[Before, Equal])),
            ("=", set(&[Equal])),
            (">", set(&[After])),
            (">=", set(&[After, Equal])),
            ("~", set(&[Vague])),
        ]
        .into_iter()
        .find(|(_, s)| *s == self)
        .map(|(op, _)| op)
    }

    fn from_comparator(op: &str) -> Option<Self> {
        use PointRelation::*;
        let zs: &[PointRelation] = match op {
            "<" => &[Before],
            "<=" => &[Before, Equal],
            "=" => &[Equal],
            ">" => &[After],
            ">=" => &[After, Equal],
            "~" => &[Vague],
            _ => return None,
        };
        RelationSet::new(zs.iter().copied())
    }
}

/// "The relation of `pair` is one of `allowed`."
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PointPredicate {
    pub pair: PointPair,
    pub allowed: RelationSet,
}

impl PointPredicate {
    pub fn new(pair: PointPair, allowed: RelationSet) -> Self {
        PointPredicate { pair, allowed }
    }

    pub fn holds(&self, c: &PointConfiguration) -> bool {
        self.allowed.contains(c.get(self.pair))
    }

    /// Question-level form: the disjunction of the allowed relations' answer
    /// patterns, with the two-element sets that share an answer reduced to
    /// that single literal.
    pub fn compile(&self) -> LogicExpr {
        use PointRelation::*;
        let q = |question| Expr::Atom(Atom::new(self.pair, question));
        let set = |zs: [PointRelation; 2]| RelationSet::new(zs).unwrap();
        if self.allowed.is_vacuous() {
            Expr::Const(true)
        } else if self.allowed == set([Before, Equal]) {
            Expr::not(q(Question::Second))
        } else if self.allowed == set([After, Equal]) {
            Expr::not(q(Question::First))
        } else if self.allowed == set([Before, Vague]) {
            q(Question::First)
        } else if self.allowed == set([After, Vague]) {
            q(Question::Second)
        } else {
            Expr::or(self.allowed.iter().map(|z| logic::relation_minterm(self.pair, z)))
        }
    }
}

impl fmt::Display for PointPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.allowed.comparator() {
            Some(op) => write!(f, "{} {op}", self.pair),
            None => {
                let names: Vec<&str> = self.allowed.iter().map(|z| z.as_str()).collect();
                write!(f, "{} in {{{}}}", self.pair, names.join(", "))
            }
        }
    }
}

pub type PointExpr = Expr<PointPredicate>;

struct PredicateParser;

impl AtomParser for PredicateParser {
    type Atom = PointPredicate;

    fn parse_atom(&self, lex: &mut Lexer) -> Result<PointPredicate> {
        let column = lex.column();
        let pair = match lex.next_token() {
            Some(Token { kind: TokenKind::Ident(id), .. }) => id
                .parse::<PointPair>()
                .map_err(|_| lex.error(column, format!("unknown point pair `{id}`")))?,
            Some(t) => return Err(lex.error(t.column, format!("expected a point pair, found {:?}", t.kind))),
            None => return Err(lex.error(column, "expected a point pair, found end of input")),
        };
        let column = lex.column();
        let allowed = match lex.next_token() {
            Some(Token { kind: TokenKind::Sym(op), .. }) => RelationSet::from_comparator(&op)
                .ok_or_else(|| lex.error(column, format!("unknown comparator `{op}`")))?,
            Some(Token { kind: TokenKind::Ident(kw), .. }) if kw == "in" => {
                lex.expect_sym("{")?;
                let mut rels = Vec::new();
                loop {
                    let column = lex.column();
                    match lex.next_token() {
                        Some(Token { kind: TokenKind::Ident(name), .. }) => rels.push(
                            name.parse::<PointRelation>()
                                .map_err(|_| lex.error(column, format!("unknown point relation `{name}`")))?,
                        ),
                        _ => return Err(lex.error(column, "expected a point relation name")),
                    }
                    let column = lex.column();
                    match lex.next_token() {
                        Some(Token { kind: TokenKind::Sym(s), .. }) if s == "," => continue,
                        Some(Token { kind: TokenKind::Sym(s), .. }) if s == "}" => break,
                        _ => return Err(lex.error(column, "expected `,` or `}`")),
                    }
                }
                RelationSet::new(rels).expect("loop pushes at least one relation")
            }
            Some(t) => return Err(lex.error(t.column, format!("expected a comparator, found {:?}", t.kind))),
            None => return Err(lex.error(column, "expected a comparator, found end of input")),
        };
        Ok(PointPredicate::new(pair, allowed))
    }
}

pub fn parse_point_expr(text: &str) -> Result<PointExpr> {
    expr::parse(text, 1, 1, &PredicateParser)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDef {
    pub name: String,
    pub expr: PointExpr,
}

impl RelationDef {
    pub fn new(name: impl Into<String>, expr: PointExpr) -> Self {
        RelationDef { name: name.into(), expr }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum VaguePolicy {
    /// Vague holds exactly when no other relation does.
    Complement,
    Explicit(PointExpr),
}

/// Which binary question assignments a schema must partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationDomain {
    /// Every one of the 256 assignments.
    All256,
    /// Encodings of the interval-consistent configurations only.
    #[default]
    ConsistentOnly,
}

impl ValidationDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            ValidationDomain::All256 => "all",
            ValidationDomain::ConsistentOnly => "consistent",
        }
    }

    pub fn assignments(self) -> Vec<Assignment> {
        match self {
            ValidationDomain::All256 => Assignment::all().collect(),
            ValidationDomain::ConsistentOnly => enumerate_consistent_configurations(ConsistencyMode::Satisfiable)
                .iter()
                .map(Assignment::from_configuration)
                .collect(),
        }
    }
}

impl std::str::FromStr for ValidationDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" | "all_256" => Ok(ValidationDomain::All256),
            "consistent" | "consistent_only" => Ok(ValidationDomain::ConsistentOnly),
            other => Err(Error::InvalidConfig(format!("unknown validation domain `{other}`"))),
        }
    }
}

/// Question-level expressions for every relation, Vague last.
#[derive(Debug, Clone)]
pub struct CompiledSchema {
    pub names: Vec<String>,
    pub exprs: Vec<LogicExpr>,
    pub minterms: Vec<MintermSet>,
}

/// A named, ordered set of relations plus the Vague relation.
#[derive(Debug, Clone)]
pub struct RelationSchema {
    name: String,
    relations: Vec<RelationDef>,
    vague_name: String,
    vague_policy: VaguePolicy,
    domain: ValidationDomain,
    symmetry: Vec<(String, String)>,
    compiled: CompiledSchema,
}

impl PartialEq for RelationSchema {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.relations == other.relations
            && self.vague_name == other.vague_name
            && self.vague_policy == other.vague_policy
            && self.domain == other.domain
            && self.symmetry == other.symmetry
    }
}

impl RelationSchema {
    /// Build and compile a schema. Does not validate; see [`RelationSchema::validated`].
    pub fn new(
        name: impl Into<String>,
        relations: Vec<RelationDef>,
        vague_name: impl Into<String>,
        vague_policy: VaguePolicy,
    ) -> Result<Self> {
        let name = name.into();
        let vague_name = vague_name.into();
        if relations.is_empty() {
            return Err(Error::EmptySchema(name));
        }
        let mut seen = BTreeSet::new();
        for n in relations.iter().map(|r| r.name.as_str()).chain([vague_name.as_str()]) {
            if n.is_empty() {
                return Err(Error::InvalidConfig("relation names must be nonempty".into()));
            }
            if !seen.insert(n) {
                return Err(Error::DuplicateRelationName(n.to_string()));
            }
        }
        let compiled = compile_relations(&relations, &vague_name, &vague_policy);
        Ok(RelationSchema {
            name,
            relations,
            vague_name,
            vague_policy,
            domain: ValidationDomain::default(),
            symmetry: Vec::new(),
            compiled,
        })
    }

    pub fn with_domain(mut self, domain: ValidationDomain) -> Self {
        self.domain = domain;
        self
    }

    /// Declare `a` and `b` as each other's image when the events are swapped.
    pub fn with_symmetry(mut self, a: impl Into<String>, b: impl Into<String>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        for n in [&a, &b] {
            if !self.has_relation(n) {
                return Err(Error::unknown_relation(n.clone()));
            }
        }
        if self.symmetry.iter().any(|(x, y)| [x, y].contains(&&a) || [x, y].contains(&&b)) {
            return Err(Error::InvalidConfig(format!("relation `{a}` or `{b}` already has a symmetry partner")));
        }
        self.symmetry.push((a, b));
        Ok(self)
    }

    /// Fail with [`Error::Validation`] unless the schema partitions its declared domain.
    pub fn validated(self) -> Result<Self> {
        let report = validate(&self, self.domain);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::Validation(Box::new(report)))
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn relations(&self) -> &[RelationDef] {
        &self.relations
    }

    pub fn vague_name(&self) -> &str {
        &self.vague_name
    }

    pub fn vague_policy(&self) -> &VaguePolicy {
        &self.vague_policy
    }

    pub fn domain(&self) -> ValidationDomain {
        self.domain
    }

    pub fn compiled(&self) -> &CompiledSchema {
        &self.compiled
    }

    /// All relation names in declaration order, Vague last.
    pub fn relation_names(&self) -> &[String] {
        &self.compiled.names
    }

    pub fn non_vague_names(&self) -> &[String] {
        &self.compiled.names[..self.relations.len()]
    }

    pub fn vague_index(&self) -> usize {
        self.relations.len()
    }

    pub fn has_relation(&self, name: &str) -> bool {
        self.compiled.names.iter().any(|n| n == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.compiled.names.iter().position(|n| n == name)
    }

    pub fn require_index(&self, name: &str) -> Result<usize> {
        self.index_of(name).ok_or_else(|| Error::UnknownRelation {
            relation: name.to_string(),
            context: Some(format!("schema `{}`", self.name)),
        })
    }

    pub fn expr(&self, name: &str) -> Option<&LogicExpr> {
        self.index_of(name).map(|i| &self.compiled.exprs[i])
    }

    pub fn symmetry_pairs(&self) -> &[(String, String)] {
        &self.symmetry
    }

    /// Image of `name` under exchanging the two events; undeclared relations
    /// are their own image.
    pub fn symmetric<'a>(&'a self, name: &'a str) -> Result<&'a str> {
        self.require_index(name)?;
        for (a, b) in &self.symmetry {
            if a == name {
                return Ok(b);
            }
            if b == name {
                return Ok(a);
            }
        }
        Ok(name)
    }

    /// Indices of the relations whose compiled expression holds under `m`.
    pub fn matching(&self, m: Assignment) -> Vec<usize> {
        self.compiled
            .minterms
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(m))
            .map(|(i, _)| i)
            .collect()
    }
}

fn compile_relations(relations: &[RelationDef], vague_name: &str, vague_policy: &VaguePolicy) -> CompiledSchema {
    let compile_point = |e: &PointExpr| e.substitute(&|p: &PointPredicate| p.compile());
    let mut names: Vec<String> = relations.iter().map(|r| r.name.clone()).collect();
    let mut exprs: Vec<LogicExpr> = relations.iter().map(|r| compile_point(&r.expr)).collect();
    let vague = match vague_policy {
        VaguePolicy::Complement => Expr::not(Expr::or(exprs.iter().cloned())),
        VaguePolicy::Explicit(e) => compile_point(e),
    };
    names.push(vague_name.to_string());
    exprs.push(vague);
    let minterms = exprs.iter().map(logic::expand_minterms).collect();
    CompiledSchema { names, exprs, minterms }
}

/// Compile a schema to one question-level expression per relation name.
pub fn compile(s: &RelationSchema) -> Vec<(String, LogicExpr)> {
    s.compiled.names.iter().cloned().zip(s.compiled.exprs.iter().cloned()).collect()
}

/// An assignment satisfying two relations at once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlap {
    pub first: String,
    pub second: String,
    pub witness: Witness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub assignment: u8,
    pub configuration: PointConfiguration,
}

impl From<Assignment> for Witness {
    fn from(m: Assignment) -> Self {
        Witness {
            assignment: m.0,
            configuration: m.configuration(),
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [bits {:08b}]", self.configuration, self.assignment)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema: String,
    pub domain: ValidationDomain,
    pub domain_size: usize,
    pub exclusive: bool,
    pub exhaustive: bool,
    /// First witness for each overlapping relation pair.
    pub overlaps: Vec<Overlap>,
    /// Assignments satisfying no relation.
    pub gaps: Vec<Witness>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.exclusive && self.exhaustive
    }

    pub fn summary(&self) -> String {
        let mut parts = Vec::new();
        for o in &self.overlaps {
            parts.push(format!("`{}` and `{}` both hold at {}", o.first, o.second, o.witness));
        }
        if let Some(g) = self.gaps.first() {
            parts.push(format!("{} uncovered assignment(s), e.g. {g}", self.gaps.len()));
        }
        if parts.is_empty() {
            "exclusive and exhaustive".into()
        } else {
            parts.join("; ")
        }
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("schema      {}\n", self.schema));
        out.push_str(&format!("domain      {} ({} assignments)\n", self.domain.as_str(), self.domain_size));
        out.push_str(&format!("exclusive   {}\n", self.exclusive));
        out.push_str(&format!("exhaustive  {}\n", self.exhaustive));
        for o in &self.overlaps {
            out.push_str(&format!("overlap     {} / {} at {}\n", o.first, o.second, o.witness));
        }
        for g in &self.gaps {
            out.push_str(&format!("gap         {g}\n"));
        }
        out
    }
}

pub fn validate(s: &RelationSchema, domain: ValidationDomain) -> ValidationReport {
    let assignments = domain.assignments();
    let names = &s.compiled.names;
    let mut overlaps: Vec<Overlap> = Vec::new();
    let mut gaps = Vec::new();
    for &m in &assignments {
        let hits = s.matching(m);
        if hits.is_empty() {
            gaps.push(Witness::from(m));
        }
        for (k, &i) in hits.iter().enumerate() {
            for &j in &hits[k + 1..] {
                if !overlaps.iter().any(|o| o.first == names[i] && o.second == names[j]) {
                    overlaps.push(Overlap {
                        first: names[i].clone(),
                        second: names[j].clone(),
                        witness: Witness::from(m),
                    });
                }
            }
        }
    }
    ValidationReport {
        schema: s.name.clone(),
        domain,
        domain_size: assignments.len(),
        exclusive: overlaps.is_empty(),
        exhaustive: gaps.is_empty(),
        overlaps,
        gaps,
    }
}

/// The relation a configuration falls under; see [`crate::inference::convert`]
/// for the fallback on ambiguous assignments.
pub fn project<'a>(c: &PointConfiguration, s: &'a RelationSchema) -> &'a str {
    crate::inference::convert(Assignment::from_configuration(c), s).relation
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_')
}

/// Parse and validate schema text.
pub fn load_schema(text: &str) -> Result<RelationSchema> {
    parse_schema(text)?.validated()
}

/// Parse schema text without checking that it partitions its domain.
pub fn parse_schema(text: &str) -> Result<RelationSchema> {
    let mut name: Option<String> = None;
    let mut domain = ValidationDomain::default();
    let mut relations = Vec::new();
    let mut vague: Option<(String, VaguePolicy)> = None;
    let mut symmetry = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let trimmed = content.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let indent = content.chars().count() - trimmed.chars().count();
        let (keyword, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let rest_col = indent + keyword.chars().count() + 2;
        let err = |col: usize, msg: String| Error::parse(line_no, col, msg);
        match keyword {
            "schema" => {
                let n = rest.trim();
                if !is_identifier(n) {
                    return Err(err(rest_col, format!("invalid schema name `{n}`")));
                }
                if name.replace(n.to_string()).is_some() {
                    return Err(err(1 + indent, "duplicate `schema` line".into()));
                }
            }
            "domain" => {
                domain = rest
                    .trim()
                    .parse()
                    .map_err(|_| err(rest_col, format!("unknown domain `{}`", rest.trim())))?;
            }
            "relation" | "vague" => {
                let (lhs, rhs) = rest
                    .split_once(":=")
                    .ok_or_else(|| err(rest_col, "expected `<name> := <expression>`".into()))?;
                let rel_name = lhs.trim();
                if !is_identifier(rel_name) {
                    return Err(err(rest_col, format!("invalid relation name `{rel_name}`")));
                }
                let expr_col = rest_col + lhs.chars().count() + 2;
                let body = rhs.trim();
                if keyword == "vague" {
                    if vague.is_some() {
                        return Err(err(1 + indent, "duplicate `vague` line".into()));
                    }
                    let policy = if body == "complement" {
                        VaguePolicy::Complement
                    } else {
                        VaguePolicy::Explicit(expr::parse(rhs, line_no, expr_col, &PredicateParser)?)
                    };
                    vague = Some((rel_name.to_string(), policy));
                } else {
                    let e = expr::parse(rhs, line_no, expr_col, &PredicateParser)?;
                    relations.push(RelationDef::new(rel_name, e));
                }
            }
            "symmetry" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(err(rest_col, "expected `symmetry <relation> <relation>`".into()));
                }
                symmetry.push((line_no, parts[0].to_string(), parts[1].to_string()));
            }
            other => return Err(err(1 + indent, format!("unknown keyword `{other}`"))),
        }
    }

    let name = name.ok_or_else(|| Error::parse(1, 1, "missing `schema <name>` line"))?;
    let (vague_name, vague_policy) = vague.ok_or_else(|| Error::parse(1, 1, "missing `vague` line"))?;
    let mut schema = RelationSchema::new(name, relations, vague_name, vague_policy)?.with_domain(domain);
    for (line_no, a, b) in symmetry {
        schema = schema
            .with_symmetry(a, b)
            .map_err(|e| Error::parse(line_no, 1, e.to_string()))?;
    }
    Ok(schema)
}

pub fn save_schema(s: &RelationSchema) -> String {
    let mut out = format!("schema {}\ndomain {}\n", s.name, s.domain.as_str());
    for r in &s.relations {
        out.push_str(&format!("relation {} := {}\n", r.name, r.expr));
    }
    match &s.vague_policy {
        VaguePolicy::Complement => out.push_str(&format!("vague {} := complement\n", s.vague_name)),
        VaguePolicy::Explicit(e) => out.push_str(&format!("vague {} := {e}\n", s.vague_name)),
    }
    for (a, b) in &s.symmetry {
        out.push_str(&format!("symmetry {a} {b}\n"));
    }
    out
}

/// Schemas shipped with the library.
pub mod builtin {
    use super::*;

    pub const ALLEN13_TEXT: &str = include_str!("../data/schemas/allen13.schema");
    pub const TBDENSE_TEXT: &str = include_str!("../data/schemas/tbdense.schema");
    pub const MATRES_TEXT: &str = include_str!("../data/schemas/matres.schema");

    fn cached(cell: &'static OnceLock<RelationSchema>, text: &str) -> &'static RelationSchema {
        cell.get_or_init(|| load_schema(text).expect("built-in schema must load and validate"))
    }

    pub fn allen13() -> &'static RelationSchema {
        static CELL: OnceLock<RelationSchema> = OnceLock::new();
        cached(&CELL, ALLEN13_TEXT)
    }

    pub fn tbdense() -> &'static RelationSchema {
        static CELL: OnceLock<RelationSchema> = OnceLock::new();
        cached(&CELL, TBDENSE_TEXT)
    }

    pub fn matres() -> &'static RelationSchema {
        static CELL: OnceLock<RelationSchema> = OnceLock::new();
        cached(&CELL, MATRES_TEXT)
    }

    pub fn all() -> [&'static RelationSchema; 3] {
        [allen13(), tbdense(), matres()]
    }

    pub fn by_name(name: &str) -> Option<&'static RelationSchema> {
        match name.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "allen13" | "allen" => Some(allen13()),
            "tbdense" => Some(tbdense()),
            "matres" => Some(matres()),
            _ => None,
        }
    }
}

/// Symmetry table inferred from the compiled expressions: for each relation,
/// the relations its swapped configurations project to. Used to cross-check
/// declared symmetry partners.
pub fn inferred_symmetry(s: &RelationSchema) -> HashMap<String, BTreeSet<String>> {
    let mut out: HashMap<String, BTreeSet<String>> = HashMap::new();
    for c in enumerate_consistent_configurations(ConsistencyMode::Satisfiable) {
        let r = project(&c, s).to_string();
        let r_swapped = project(&c.swap_events(), s).to_string();
        out.entry(r).or_default().insert(r_swapped);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use PointRelation::*;

    fn pred(pair: PointPair, zs: &[PointRelation]) -> PointPredicate {
        PointPredicate::new(pair, RelationSet::new(zs.iter().copied()).unwrap())
    }

    fn truth_equal(a: &LogicExpr, b: &LogicExpr) -> bool {
        logic::expand_minterms(a) == logic::expand_minterms(b)
    }

    #[test]
    fn predicate_compiles_to_answer_patterns() {
        for bits in 1u8..16 {
            let allowed = RelationSet(bits);
            for pair in PointPair::ALL {
                let p = PointPredicate::new(pair, allowed);
                let e = p.compile();
                for m in Assignment::all() {
                    assert_eq!(logic::eval_hard(&e, m), p.holds(&m.configuration()), "{p} at {m:?}");
                }
            }
        }
    }

    #[test]
    fn le_compiles_to_not_q2() {
        let e = pred(PointPair::SS, &[Before, Equal]).compile();
        assert_eq!(e.to_string(), "!Q2_ss");
        let two_minterms = Expr::or([
            logic::relation_minterm(PointPair::SS, Before),
            logic::relation_minterm(PointPair::SS, Equal),
        ]);
        assert!(truth_equal(&e, &two_minterms));
        assert_eq!(pred(PointPair::EE, &[After, Equal]).compile().to_string(), "!Q1_ee");
    }

    #[test]
    fn matres_before_compiles_to_single_conjunction() {
        let s = builtin::matres();
        assert_eq!(s.expr("Before").unwrap().to_string(), "Q1_ss & !Q2_ss");
        assert_eq!(s.expr("Vague").unwrap().to_string(), "Q1_ss & Q2_ss");
    }

    #[test]
    fn tbdense_includes_question_form() {
        let s = builtin::tbdense();
        let expected = logic::parse_logic("(!Q2_ss & !Q1_ee & Q2_ee) | (Q1_ss & !Q2_ss & !Q1_ee)").unwrap();
        assert!(truth_equal(s.expr("Includes").unwrap(), &expected));
    }

    #[test]
    fn predicate_display_round_trip() {
        for text in ["ss <", "ee <=", "se =", "es >", "ss >=", "ee ~", "se in {before, vague}"] {
            let e = parse_point_expr(text).unwrap();
            assert_eq!(e.to_string(), text);
        }
        let e = parse_point_expr("ss in {equal}").unwrap();
        assert_eq!(e.to_string(), "ss =");
    }

    #[test]
    fn duplicate_and_empty_rejected() {
        let e = parse_point_expr("ss <").unwrap();
        let dup = RelationSchema::new(
            "d",
            vec![RelationDef::new("A", e.clone()), RelationDef::new("A", e.clone())],
            "V",
            VaguePolicy::Complement,
        );
        assert!(matches!(dup, Err(Error::DuplicateRelationName(n)) if n == "A"));
        let clash = RelationSchema::new("d", vec![RelationDef::new("V", e)], "V", VaguePolicy::Complement);
        assert!(matches!(clash, Err(Error::DuplicateRelationName(_))));
        let empty = RelationSchema::new("d", vec![], "V", VaguePolicy::Complement);
        assert!(matches!(empty, Err(Error::EmptySchema(_))));
    }

    #[test]
    fn copied_relation_reports_overlap_witness() {
        let e = parse_point_expr("ss <").unwrap();
        let s = RelationSchema::new(
            "copies",
            vec![RelationDef::new("A", e.clone()), RelationDef::new("B", e)],
            "V",
            VaguePolicy::Complement,
        )
        .unwrap();
        let report = validate(&s, ValidationDomain::ConsistentOnly);
        assert!(!report.exclusive);
        assert!(report.exhaustive);
        let o = &report.overlaps[0];
        assert_eq!((o.first.as_str(), o.second.as_str()), ("A", "B"));
        assert_eq!(o.witness.configuration.ss, Before);
        assert!(matches!(s.validated(), Err(Error::Validation(_))));
    }

    #[test]
    fn builtins_validate() {
        for s in builtin::all() {
            assert!(validate(s, ValidationDomain::ConsistentOnly).is_ok(), "{}", s.name());
        }
        assert!(validate(builtin::matres(), ValidationDomain::All256).is_ok());
        assert!(!validate(builtin::tbdense(), ValidationDomain::All256).exclusive);
    }

    #[test]
    fn save_load_round_trip() {
        for s in builtin::all() {
            let text = save_schema(s);
            let back = load_schema(&text).unwrap();
            assert_eq!(&back, s);
            assert_eq!(save_schema(&back), text);
            for (a, b) in back.compiled().exprs.iter().zip(&s.compiled().exprs) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn unknown_atom_is_parse_error() {
        let text = "schema bad\nrelation A := Q3_ss\nvague V := complement\n";
        match load_schema(text) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(column, 15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overlapping_file_is_validation_error() {
        let text = "schema overlap\nrelation A := ss <=\nrelation B := ss >=\nvague V := complement\n";
        match load_schema(text) {
            Err(Error::Validation(r)) => {
                assert_eq!(r.overlaps.len(), 1);
                assert_eq!(r.overlaps[0].witness.configuration.ss, Equal);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn declared_symmetry_matches_inferred() {
        for s in builtin::all() {
            for (r, images) in inferred_symmetry(s) {
                let declared = s.symmetric(&r).unwrap();
                assert_eq!(images.len(), 1, "{}: {r} -> {images:?}", s.name());
                assert!(images.contains(declared), "{}: {r} -> {images:?}", s.name());
            }
        }
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# header\n\nschema t # trailing\nrelation A := ss <\nrelation B := ss >\nrelation C := ss =\nvague V := complement\n";
        let s = load_schema(text).unwrap();
        assert_eq!(s.relation_names(), ["A", "B", "C", "V"]);
    }
}
