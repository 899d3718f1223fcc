//! The `.fol` problem format and its printer.
//!
//! ```text
//! # comment
//! vocab P/2, Q/1; const c;
//! @sigma Q;
//! exists x. forall z. exists v. (P(v, z) | Q(z)) & (P(x, v) | !Q(v))
//! ```
//!
//! Precedence from tightest: `!`, `&`, `|`, `->`, `<->`. `&`, `|` and `<->`
//! associate to the left, `->` to the right. A quantifier body extends as far
//! right as possible. Transition systems use `@statevars`, `@init`, `@trans`
//! and `@prop`; inside `@trans` the next-state copy of `x` is written `x_next`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::formula::{Atom, Formula, Term, Vocabulary};
use crate::{Error, Result};

const KEYWORDS: &[&str] = &["vocab", "const", "forall", "exists", "true", "false"];

/// Directives whose value is a formula over the state variables.
pub const FORMULA_DIRECTIVES: &[&str] = &["init", "trans", "prop"];

/// Suffix naming the next-state copy of a state variable inside `@trans`.
pub const NEXT_SUFFIX: &str = "_next";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub vocabulary: Vocabulary,
    pub formula: Formula,
    pub declared_free: Vec<String>,
    pub directives: BTreeMap<String, String>,
}

impl Problem {
    pub fn new(vocabulary: Vocabulary, formula: Formula) -> Problem {
        let declared_free = crate::formula::free_vars(&formula).into_iter().collect();
        Problem { vocabulary, formula, declared_free, directives: BTreeMap::new() }
    }

    /// The `@sigma` list, if present.
    pub fn sigma(&self) -> Option<BTreeSet<String>> {
        self.directives.get("sigma").map(|s| split_list(s).map(str::to_string).collect())
    }

    pub fn bound(&self) -> Option<usize> {
        self.directives.get("bound").and_then(|s| s.trim().parse().ok())
    }

    pub fn state_vars(&self) -> Vec<String> {
        self.directives.get("statevars").map(|s| split_list(s).map(str::to_string).collect()).unwrap_or_default()
    }

    /// Whitespace- or comma-separated words of a directive.
    pub fn words(&self, key: &str) -> Vec<String> {
        self.directives.get(key).map(|s| split_list(s).map(str::to_string).collect()).unwrap_or_default()
    }
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|w| !w.is_empty())
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    Directive(String),
    Slash,
    Comma,
    Semi,
    Dot,
    LParen,
    RParen,
    Bang,
    Amp,
    Bar,
    Arrow,
    DArrow,
    Eq,
    Neq,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    start: usize,
    end: usize,
}

fn err_at(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        let (tline, tcol) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i].1 == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                advance(1, &mut i);
            }
            continue;
        }
        let peek = chars.get(i + 1).map(|&(_, c)| c);
        let peek2 = chars.get(i + 2).map(|&(_, c)| c);
        let (tok, len) = if c.is_ascii_alphabetic() || c == '@' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().map(|&(_, c)| c).collect();
            if c == '@' {
                if word.len() == 1 || !word.as_bytes()[1].is_ascii_alphabetic() {
                    return Err(err_at(tline, tcol, "expected a directive name after '@'"));
                }
                (Tok::Directive(word[1..].to_string()), j - i)
            } else {
                (Tok::Ident(word), j - i)
            }
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].1.is_ascii_digit() {
                j += 1;
            }
            let digits: String = chars[i..j].iter().map(|&(_, c)| c).collect();
            let n = digits.parse().map_err(|_| err_at(tline, tcol, "number too large"))?;
            (Tok::Num(n), j - i)
        } else {
            match (c, peek, peek2) {
                ('<', Some('-'), Some('>')) => (Tok::DArrow, 3),
                ('-', Some('>'), _) => (Tok::Arrow, 2),
                ('!', Some('='), _) => (Tok::Neq, 2),
                ('!', ..) => (Tok::Bang, 1),
                ('&', ..) => (Tok::Amp, 1),
                ('|', ..) => (Tok::Bar, 1),
                ('=', ..) => (Tok::Eq, 1),
                ('/', ..) => (Tok::Slash, 1),
                (',', ..) => (Tok::Comma, 1),
                (';', ..) => (Tok::Semi, 1),
                ('.', ..) => (Tok::Dot, 1),
                ('(', ..) => (Tok::LParen, 1),
                (')', ..) => (Tok::RParen, 1),
                _ => return Err(err_at(tline, tcol, format!("unexpected character {c:?}"))),
            }
        };
        advance(len, &mut i);
        let end = chars.get(i).map_or(src.len(), |&(b, _)| b);
        out.push(Token { tok, line: tline, col: tcol, start, end });
    }
    Ok(out)
}

/// Parses a complete problem file.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let toks = lex(text)?;
    let mut vocab = Vocabulary::default();
    let mut declared_free: Vec<String> = Vec::new();
    let mut directives = BTreeMap::new();
    let mut formula_range: Option<(usize, usize)> = None;
    let mut directive_ranges: Vec<(String, usize, usize, usize)> = Vec::new();
    let eof = |toks: &[Token]| toks.last().map_or((1, 1), |t| (t.line, t.col + (t.end - t.start)));

    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        // End of the current statement: index of the terminating `;` or EOF.
        let stop = toks[i..].iter().position(|t| t.tok == Tok::Semi).map_or(toks.len(), |p| i + p);
        match &t.tok {
            Tok::Ident(w) if w == "vocab" => {
                let mut j = i + 1;
                while j < stop {
                    let (name, line, col) = ident_at(&toks, j)?;
                    check_symbol_name(&name, line, col)?;
                    expect(&toks, j + 1, &Tok::Slash, "'/'")?;
                    let arity = match toks.get(j + 2).map(|t| &t.tok) {
                        Some(Tok::Num(n)) => *n as usize,
                        _ => {
                            let (l, c) = toks.get(j + 2).map_or(eof(&toks), |t| (t.line, t.col));
                            return Err(err_at(l, c, "expected an arity"));
                        }
                    };
                    vocab.add_predicate(name, arity).map_err(|e| err_at(line, col, e.to_string()))?;
                    j += 3;
                    if j < stop {
                        expect(&toks, j, &Tok::Comma, "','")?;
                        j += 1;
                    }
                }
                require_semi(&toks, stop, eof(&toks))?;
            }
            Tok::Ident(w) if w == "const" => {
                let mut j = i + 1;
                while j < stop {
                    let (name, line, col) = ident_at(&toks, j)?;
                    check_symbol_name(&name, line, col)?;
                    vocab.add_constant(name).map_err(|e| err_at(line, col, e.to_string()))?;
                    j += 1;
                    if j < stop {
                        expect(&toks, j, &Tok::Comma, "','")?;
                        j += 1;
                    }
                }
                require_semi(&toks, stop, eof(&toks))?;
            }
            Tok::Directive(name) => {
                require_semi(&toks, stop, eof(&toks))?;
                let value = if stop > i + 1 {
                    text[toks[i + 1].start..toks[stop - 1].end].trim().to_string()
                } else {
                    String::new()
                };
                if name == "free" {
                    for j in i + 1..stop {
                        match &toks[j].tok {
                            Tok::Comma => {}
                            Tok::Ident(v) => {
                                check_var_name(v, &vocab, toks[j].line, toks[j].col)?;
                                if !declared_free.contains(v) {
                                    declared_free.push(v.clone());
                                }
                            }
                            _ => return Err(err_at(toks[j].line, toks[j].col, "expected a variable")),
                        }
                    }
                } else {
                    if directives.contains_key(name) {
                        return Err(err_at(t.line, t.col, format!("duplicate directive @{name}")));
                    }
                    directive_ranges.push((name.clone(), i, i + 1, stop));
                    directives.insert(name.clone(), value);
                }
            }
            _ => {
                if formula_range.is_some() {
                    return Err(err_at(t.line, t.col, "more than one formula"));
                }
                formula_range = Some((i, stop));
            }
        }
        i = stop + 1;
    }

    for (name, at, from, to) in &directive_ranges {
        let (line, col) = (toks[*at].line, toks[*at].col);
        match name.as_str() {
            "sigma" => {
                for j in *from..*to {
                    match &toks[j].tok {
                        Tok::Comma => {}
                        Tok::Ident(p) if vocab.arity(p).is_some() => {}
                        _ => return Err(err_at(toks[j].line, toks[j].col, "@sigma lists declared predicates")),
                    }
                }
            }
            "bound" => {
                if !(to - from == 1 && matches!(toks[*from].tok, Tok::Num(_))) {
                    return Err(err_at(line, col, "@bound takes one number"));
                }
            }
            "noeq" => {
                if to > from {
                    return Err(err_at(line, col, "@noeq takes no value"));
                }
            }
            "statevars" => {
                for j in *from..*to {
                    match &toks[j].tok {
                        Tok::Comma => {}
                        Tok::Ident(v) => check_var_name(v, &vocab, toks[j].line, toks[j].col)?,
                        _ => return Err(err_at(toks[j].line, toks[j].col, "expected a variable")),
                    }
                }
            }
            _ => {}
        }
    }

    let state: Vec<String> =
        directives.get("statevars").map(|s: &String| split_list(s).map(str::to_string).collect()).unwrap_or_default();
    for (name, _, from, to) in &directive_ranges {
        if FORMULA_DIRECTIVES.contains(&name.as_str()) {
            let mut free = state.clone();
            if name == "trans" {
                free.extend(state.iter().map(|v| format!("{v}{NEXT_SUFFIX}")));
            }
            let mut p = FormulaParser {
                toks: &toks[*from..*to],
                pos: 0,
                vocab: &vocab,
                free: &free,
                bound: Vec::new(),
                eof: eof(&toks),
            };
            p.parse_all()?;
        }
    }

    let formula = match formula_range {
        Some((from, to)) => {
            let mut p = FormulaParser {
                toks: &toks[from..to],
                pos: 0,
                vocab: &vocab,
                free: &declared_free,
                bound: Vec::new(),
                eof: eof(&toks),
            };
            p.parse_all()?
        }
        None => Formula::True,
    };
    if directives.contains_key("noeq") {
        if let Some(t) = toks.iter().find(|t| matches!(t.tok, Tok::Eq | Tok::Neq)) {
            return Err(err_at(t.line, t.col, "equality used under @noeq"));
        }
    }
    Ok(Problem { vocabulary: vocab, formula, declared_free, directives })
}

/// Parses a standalone formula over `vocab` with the given free variables.
pub fn parse_formula(vocab: &Vocabulary, free: &[String], text: &str) -> Result<Formula> {
    let toks = lex(text)?;
    let eof = toks.last().map_or((1, 1), |t| (t.line, t.col + (t.end - t.start)));
    FormulaParser { toks: &toks, pos: 0, vocab, free, bound: Vec::new(), eof }.parse_all()
}

fn ident_at(toks: &[Token], j: usize) -> Result<(String, usize, usize)> {
    match toks.get(j) {
        Some(Token { tok: Tok::Ident(n), line, col, .. }) => Ok((n.clone(), *line, *col)),
        Some(t) => Err(err_at(t.line, t.col, "expected an identifier")),
        None => Err(err_at(toks.last().map_or(1, |t| t.line), 1, "unexpected end of input")),
    }
}

fn expect(toks: &[Token], j: usize, tok: &Tok, what: &str) -> Result<()> {
    match toks.get(j) {
        Some(t) if &t.tok == tok => Ok(()),
        Some(t) => Err(err_at(t.line, t.col, format!("expected {what}"))),
        None => Err(err_at(toks.last().map_or(1, |t| t.line), 1, format!("expected {what}"))),
    }
}

fn require_semi(toks: &[Token], stop: usize, eof: (usize, usize)) -> Result<()> {
    if stop >= toks.len() {
        return Err(err_at(eof.0, eof.1, "expected ';'"));
    }
    Ok(())
}

fn check_symbol_name(name: &str, line: usize, col: usize) -> Result<()> {
    if KEYWORDS.contains(&name) {
        return Err(err_at(line, col, format!("{name} is a keyword")));
    }
    Ok(())
}

fn check_var_name(name: &str, vocab: &Vocabulary, line: usize, col: usize) -> Result<()> {
    check_symbol_name(name, line, col)?;
    if vocab.contains(name) {
        return Err(err_at(line, col, format!("{name} is a declared symbol, not a variable")));
    }
    Ok(())
}

struct FormulaParser<'a> {
    toks: &'a [Token],
    pos: usize,
    vocab: &'a Vocabulary,
    free: &'a [String],
    bound: Vec<String>,
    eof: (usize, usize),
}

impl<'a> FormulaParser<'a> {
    fn parse_all(&mut self) -> Result<Formula> {
        if self.toks.is_empty() {
            return Err(err_at(self.eof.0, self.eof.1, "expected a formula"));
        }
        let f = self.iff()?;
        if let Some(t) = self.toks.get(self.pos) {
            return Err(err_at(t.line, t.col, "unexpected token after formula"));
        }
        Ok(f)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.eof, |t| (t.line, t.col))
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        let (l, c) = self.here();
        err_at(l, c, msg)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn iff(&mut self) -> Result<Formula> {
        let mut left = self.imp()?;
        while self.eat(&Tok::DArrow) {
            left = Formula::iff(left, self.imp()?);
        }
        Ok(left)
    }

    fn imp(&mut self) -> Result<Formula> {
        let left = self.or()?;
        if self.eat(&Tok::Arrow) {
            return Ok(Formula::implies(left, self.imp()?));
        }
        Ok(left)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut left = self.and()?;
        while self.eat(&Tok::Bar) {
            left = Formula::or(left, self.and()?);
        }
        Ok(left)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut left = self.unary()?;
        while self.eat(&Tok::Amp) {
            left = Formula::and(left, self.unary()?);
        }
        Ok(left)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.eat(&Tok::Bang) {
            return Ok(Formula::not(self.unary()?));
        }
        if let Some(Tok::Ident(w)) = self.peek() {
            if w == "forall" || w == "exists" {
                let universal = w == "forall";
                self.pos += 1;
                let mut vars = Vec::new();
                loop {
                    match self.peek() {
                        Some(Tok::Ident(v)) => {
                            let (l, c) = self.here();
                            check_var_name(v, self.vocab, l, c)?;
                            vars.push(v.clone());
                            self.pos += 1;
                            self.eat(&Tok::Comma);
                        }
                        Some(Tok::Dot) if !vars.is_empty() => {
                            self.pos += 1;
                            break;
                        }
                        _ => return Err(self.error("expected a variable or '.'")),
                    }
                }
                let depth = self.bound.len();
                self.bound.extend(vars.iter().cloned());
                let body = self.iff()?;
                self.bound.truncate(depth);
                return Ok(if universal { Formula::forall_all(&vars, body) } else { Formula::exists_all(&vars, body) });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek().cloned() {
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.iff()?;
                if !self.eat(&Tok::RParen) {
                    return Err(self.error("expected ')'"));
                }
                Ok(f)
            }
            Some(Tok::Ident(w)) if w == "true" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Some(Tok::Ident(w)) if w == "false" => {
                self.pos += 1;
                Ok(Formula::False)
            }
            Some(Tok::Ident(name)) => {
                let (line, col) = self.here();
                if self.toks.get(self.pos + 1).map(|t| &t.tok) == Some(&Tok::LParen) {
                    let arity = match self.vocab.arity(&name) {
                        Some(a) => a,
                        None => return Err(err_at(line, col, format!("undeclared predicate {name}"))),
                    };
                    self.pos += 2;
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.term()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            if !self.eat(&Tok::Comma) {
                                return Err(self.error("expected ',' or ')'"));
                            }
                        }
                    }
                    if args.len() != arity {
                        return Err(err_at(
                            line,
                            col,
                            format!("{name} has arity {arity}, applied to {} arguments", args.len()),
                        ));
                    }
                    return Ok(Formula::Atom(Atom::Pred { name, args }));
                }
                if let Some(arity) = self.vocab.arity(&name) {
                    if arity != 0 {
                        return Err(err_at(line, col, format!("{name} has arity {arity}, applied to 0 arguments")));
                    }
                    self.pos += 1;
                    return Ok(Formula::Atom(Atom::Pred { name, args: vec![] }));
                }
                let s = self.term()?;
                let negated = match self.peek() {
                    Some(Tok::Eq) => false,
                    Some(Tok::Neq) => true,
                    _ => return Err(self.error("expected '=' or '!='")),
                };
                self.pos += 1;
                let t = self.term()?;
                let eq = Formula::eq(s, t);
                Ok(if negated { Formula::not(eq) } else { eq })
            }
            _ => Err(self.error("expected a formula")),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let (line, col) = self.here();
        let name = match self.peek() {
            Some(Tok::Ident(n)) => n.clone(),
            _ => return Err(self.error("expected a term")),
        };
        self.pos += 1;
        if self.vocab.is_constant(&name) {
            return Ok(Term::Const(name));
        }
        if self.vocab.arity(&name).is_some() {
            return Err(err_at(line, col, format!("predicate {name} used as a term")));
        }
        if KEYWORDS.contains(&name.as_str()) {
            return Err(err_at(line, col, format!("{name} is a keyword")));
        }
        if !self.bound.contains(&name) && !self.free.contains(&name) {
            return Err(err_at(line, col, format!("unbound variable {name} (declare it with @free)")));
        }
        Ok(Term::Var(name))
    }
}

/// Prints a problem so that `parse_problem(&render(p)) == Ok(p)`.
pub fn render(p: &Problem) -> String {
    let mut out = String::new();
    let preds: Vec<String> = p.vocabulary.predicates().iter().map(|(n, a)| format!("{n}/{a}")).collect();
    out.push_str(&format!("vocab {};", preds.join(", ")));
    if !p.vocabulary.constants().is_empty() {
        out.push_str(&format!(" const {};", p.vocabulary.constants().join(", ")));
    }
    out.push('\n');
    if !p.declared_free.is_empty() {
        out.push_str(&format!("@free {};\n", p.declared_free.join(", ")));
    }
    for (k, v) in &p.directives {
        if v.is_empty() {
            out.push_str(&format!("@{k};\n"));
        } else {
            out.push_str(&format!("@{k} {v};\n"));
        }
    }
    out.push_str(&p.formula.to_string());
    out.push('\n');
    out
}

// Binding strength used by the printer; quantifiers are parenthesized
// whenever they are an operand.
fn level(f: &Formula) -> u8 {
    match f {
        Formula::Forall(..) | Formula::Exists(..) => 0,
        Formula::Iff(..) => 1,
        Formula::Implies(..) => 2,
        Formula::Or(..) => 3,
        Formula::And(..) => 4,
        _ => 5,
    }
}

fn write_operand(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if level(f) < min || level(f) == 0 {
        write!(out, "({f})")
    } else {
        write!(out, "{f}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Pred { name, args } if args.is_empty() => f.write_str(name),
            Atom::Pred { name, args } => {
                let args: Vec<&str> = args.iter().map(Term::name).collect();
                write!(f, "{name}({})", args.join(", "))
            }
            Atom::Eq(s, t) => write!(f, "{s} = {t}"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let binary = |f: &mut fmt::Formatter<'_>, a: &Formula, op: &str, b: &Formula, lmin: u8, rmin: u8| {
            write_operand(a, lmin, f)?;
            write!(f, " {op} ")?;
            write_operand(b, rmin, f)
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(g) => match g.as_ref() {
                Formula::Atom(Atom::Eq(s, t)) => write!(f, "{s} != {t}"),
                g => {
                    f.write_str("!")?;
                    write_operand(g, 5, f)
                }
            },
            Formula::And(a, b) => binary(f, a, "&", b, 4, 5),
            Formula::Or(a, b) => binary(f, a, "|", b, 3, 4),
            Formula::Implies(a, b) => binary(f, a, "->", b, 3, 2),
            Formula::Iff(a, b) => binary(f, a, "<->", b, 1, 2),
            Formula::Forall(v, g) => write!(f, "forall {v}. {g}"),
            Formula::Exists(v, g) => write!(f, "exists {v}. {g}"),
        }
    }
}
