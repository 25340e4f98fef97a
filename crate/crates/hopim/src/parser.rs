//! Concrete syntax. Parallel composition binds loosest, postfix application
//! tightest, and a prefix extends to the next application-level term:
//!
//! ```text
//! term := par
//! par  := app ("|" app)*
//! app  := atom ("<" arg ">")*
//! atom := "0" | PVAR | NAME "(" PVAR ")" "." app | NAME "!" "(" term ")"
//!       | "<" PVAR ">" atom | "<" NVAR ">" atom | "(" term ")"
//! arg  := term | NAME
//! ```
//!
//! CCS-like sugar on input: `a.P` for `a(X).P` with fresh `X`, `a` for `a.0`,
//! and `a!` for `a!(0)`. A lowercase identifier is a name variable when bound
//! by an enclosing name abstraction or declared free, otherwise a constant.

use crate::error::{Error, Result};
use crate::sorts::{annotate, SortEnv};
use crate::syntax::{fresh_ident, Name, ProcVar, Term};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Zero,
    Upper(String),
    Lower(String),
    LParen,
    RParen,
    LAngle,
    RAngle,
    Bar,
    Bang,
    Dot,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '0' => {
                toks.push((Tok::Zero, i));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, i));
                i += 1;
            }
            '<' => {
                toks.push((Tok::LAngle, i));
                i += 1;
            }
            '>' => {
                toks.push((Tok::RAngle, i));
                i += 1;
            }
            '|' => {
                toks.push((Tok::Bar, i));
                i += 1;
            }
            '!' => {
                toks.push((Tok::Bang, i));
                i += 1;
            }
            '.' => {
                toks.push((Tok::Dot, i));
                i += 1;
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let ident = src[start..i].to_string();
                if c.is_ascii_uppercase() {
                    toks.push((Tok::Upper(ident), start));
                } else {
                    toks.push((Tok::Lower(ident), start));
                }
            }
            _ => {
                return Err(Error::Parse { pos: i, msg: format!("unexpected character '{c}'") });
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    env: &'a SortEnv,
    bound_names: Vec<String>,
    src_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }
    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(t, _)| t)
    }
    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.src_len)
    }
    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }
    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        match self.bump() {
            Some(t) if t == tok => Ok(()),
            other => Err(Error::Parse {
                pos: self.here().saturating_sub(1),
                msg: format!("expected {what}, found {other:?}"),
            }),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.here(), msg: msg.into() })
    }

    fn name(&self, ident: &str) -> Name {
        let is_var = self.bound_names.iter().any(|n| n == ident)
            || self.env.is_free_name_var(ident);
        if is_var {
            Name::variable(ident)
        } else {
            Name::constant(ident)
        }
    }

    fn term(&mut self) -> Result<Term> {
        let mut t = self.app()?;
        while self.peek() == Some(&Tok::Bar) {
            self.bump();
            let rhs = self.app()?;
            t = Term::par(t, rhs);
        }
        Ok(t)
    }

    fn app(&mut self) -> Result<Term> {
        let mut t = self.atom()?;
        while self.peek() == Some(&Tok::LAngle) {
            self.bump();
            // A lone lowercase identifier immediately closed is a name
            // argument; anything else is a term argument.
            if let (Some(Tok::Lower(id)), Some(Tok::RAngle)) = (self.peek(), self.peek2()) {
                let id = id.clone();
                self.bump();
                self.bump();
                let arg = self.name(&id);
                t = Term::name_app(t, arg);
            } else {
                let arg = self.term()?;
                self.expect(Tok::RAngle, "'>'")?;
                t = Term::proc_app(t, arg);
            }
        }
        Ok(t)
    }

    fn atom(&mut self) -> Result<Term> {
        match self.peek().cloned() {
            Some(Tok::Zero) => {
                self.bump();
                Ok(Term::Nil)
            }
            Some(Tok::Upper(id)) => {
                self.bump();
                Ok(Term::Var(ProcVar::proc(id)))
            }
            Some(Tok::Lower(id)) => {
                self.bump();
                match self.peek() {
                    Some(Tok::LParen) => {
                        self.bump();
                        let bound = match self.bump() {
                            Some(Tok::Upper(v)) => v,
                            _ => return self.err("expected a process variable after '('"),
                        };
                        self.expect(Tok::RParen, "')'")?;
                        self.expect(Tok::Dot, "'.'")?;
                        let body = self.app()?;
                        Ok(Term::input(self.name(&id), ProcVar::proc(bound), body))
                    }
                    Some(Tok::Bang) => {
                        self.bump();
                        if self.peek() == Some(&Tok::LParen) {
                            self.bump();
                            let payload = self.term()?;
                            self.expect(Tok::RParen, "')'")?;
                            Ok(Term::output(self.name(&id), payload))
                        } else {
                            // a! is a!(0)
                            Ok(Term::output(self.name(&id), Term::Nil))
                        }
                    }
                    Some(Tok::Dot) => {
                        // a.P is a(X).P with X fresh
                        self.bump();
                        let body = self.app()?;
                        Ok(Term::input(self.name(&id), ProcVar::proc(fresh_ident("X")), body))
                    }
                    _ => {
                        // bare a is a(X).0
                        Ok(Term::input(self.name(&id), ProcVar::proc(fresh_ident("X")), Term::Nil))
                    }
                }
            }
            Some(Tok::LAngle) => {
                self.bump();
                match self.bump() {
                    Some(Tok::Upper(v)) => {
                        self.expect(Tok::RAngle, "'>'")?;
                        let body = self.atom()?;
                        Ok(Term::proc_abs(ProcVar::proc(v), body))
                    }
                    Some(Tok::Lower(v)) => {
                        self.expect(Tok::RAngle, "'>'")?;
                        self.bound_names.push(v.clone());
                        let body = self.atom()?;
                        self.bound_names.pop();
                        Ok(Term::name_abs(Name::variable(v), body))
                    }
                    _ => self.err("expected a variable after '<'"),
                }
            }
            Some(Tok::LParen) => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            other => self.err(format!("expected a term, found {other:?}")),
        }
    }
}

/// Parse a term without sort checking. Binder scoping for name variables is
/// resolved against the declared context.
pub fn parse_raw(src: &str, env: &SortEnv) -> Result<Term> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, env, bound_names: Vec::new(), src_len: src.len() };
    let t = p.term()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input after term");
    }
    Ok(t)
}

/// Parse, sort-check, and annotate a term under the declared context.
pub fn parse(src: &str, env: &SortEnv) -> Result<Term> {
    let raw = parse_raw(src, env)?;
    Ok(annotate(&raw, env)?.term)
}

fn is_atom(t: &Term) -> bool {
    matches!(
        t,
        Term::Nil
            | Term::Var(_)
            | Term::Input { .. }
            | Term::Output { .. }
            | Term::ProcAbs { .. }
            | Term::NameAbs { .. }
    )
}

fn print_atom(t: &Term, out: &mut String) {
    if is_atom(t) {
        print_into(t, out);
    } else {
        out.push('(');
        print_into(t, out);
        out.push(')');
    }
}

fn print_app(t: &Term, out: &mut String) {
    if matches!(t, Term::Par(_, _)) {
        out.push('(');
        print_into(t, out);
        out.push(')');
    } else {
        print_into(t, out);
    }
}

/// Functor of an application. An input prefix or an abstraction over one
/// would swallow the following `<arg>` into its continuation, so only
/// application chains and terms whose printed form cannot extend rightwards
/// stay bare.
fn print_functor(t: &Term, out: &mut String) {
    match t {
        Term::ProcApp { .. } | Term::NameApp { .. } => print_into(t, out),
        Term::Nil | Term::Var(_) | Term::Output { .. } => print_into(t, out),
        _ => {
            out.push('(');
            print_into(t, out);
            out.push(')');
        }
    }
}

fn print_into(t: &Term, out: &mut String) {
    match t {
        Term::Nil => out.push('0'),
        Term::Var(v) => out.push_str(&v.ident),
        Term::Input { chan, bound, body } => {
            out.push_str(&chan.ident);
            out.push('(');
            out.push_str(&bound.ident);
            out.push_str(").");
            print_app(body, out);
        }
        Term::Output { chan, payload } => {
            out.push_str(&chan.ident);
            out.push_str("!(");
            print_into(payload, out);
            out.push(')');
        }
        Term::Par(l, r) => {
            // Left-nested pars print flat; a right-nested par keeps parens so
            // the reparse is structurally identical.
            print_into(l, out);
            out.push_str(" | ");
            print_app(r, out);
        }
        Term::ProcAbs { bound, body } => {
            out.push('<');
            out.push_str(&bound.ident);
            out.push('>');
            print_atom(body, out);
        }
        Term::NameAbs { bound, body } => {
            out.push('<');
            out.push_str(&bound.ident);
            out.push('>');
            print_atom(body, out);
        }
        Term::ProcApp { fun, arg } => {
            print_functor(fun, out);
            out.push('<');
            print_into(arg, out);
            out.push('>');
        }
        Term::NameApp { fun, arg } => {
            print_functor(fun, out);
            out.push('<');
            out.push_str(&arg.ident);
            out.push('>');
        }
    }
}

/// Deterministic canonical text for a term, reparsable by [`parse`].
pub fn print(t: &Term) -> String {
    let mut s = String::new();
    print_into(t, &mut s);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, NameKind};

    fn p(src: &str) -> Term {
        parse(src, &SortEnv::default()).unwrap()
    }

    #[test]
    fn parses_basic_input() {
        let t = p("a(X).0");
        assert_eq!(t, Term::input(Name::constant("a"), ProcVar::proc("X"), Term::Nil));
    }

    #[test]
    fn parses_application_of_abstraction() {
        let t = p("(<X>(X | X))<b!(0)>");
        let x = ProcVar::proc("X");
        let expected = Term::proc_app(
            Term::proc_abs(x.clone(), Term::par(Term::Var(x.clone()), Term::Var(x))),
            Term::output(Name::constant("b"), Term::Nil),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn parses_protocol_abstraction() {
        // A = <x>(b!(<Z> x!(Z)))
        let t = p("<x>(b!(<Z> x!(Z)))");
        match &t {
            Term::NameAbs { bound, body } => {
                assert_eq!(bound.ident, "x");
                match &**body {
                    Term::Output { chan, payload } => {
                        assert_eq!(chan.ident, "b");
                        match &**payload {
                            Term::ProcAbs { bound, body } => {
                                assert_eq!(bound.ident, "Z");
                                if let Term::Output { chan, .. } = &**body {
                                    assert_eq!(chan.kind, NameKind::Variable);
                                    assert_eq!(chan.ident, "x");
                                } else {
                                    panic!("expected output in Z body");
                                }
                            }
                            other => panic!("expected process abstraction, got {other:?}"),
                        }
                    }
                    other => panic!("expected output, got {other:?}"),
                }
            }
            other => panic!("expected name abstraction, got {other:?}"),
        }
    }

    #[test]
    fn ccs_sugar() {
        let t = p("a.b!");
        match t {
            Term::Input { chan, body, .. } => {
                assert_eq!(chan.ident, "a");
                assert_eq!(*body, Term::output(Name::constant("b"), Term::Nil));
            }
            other => panic!("expected input, got {other:?}"),
        }
        let t = p("a");
        assert!(matches!(t, Term::Input { body, .. } if *body == Term::Nil));
    }

    #[test]
    fn print_examples() {
        assert_eq!(print(&Term::Nil), "0");
        let t = Term::par(
            Term::output(Name::constant("a"), Term::Nil),
            Term::input(Name::constant("b"), ProcVar::proc("X"), Term::Var(ProcVar::proc("X"))),
        );
        assert_eq!(print(&t), "a!(0) | b(X).X");
        let t = Term::proc_app(Term::Var(ProcVar::proc("X")), Term::Nil);
        assert_eq!(print(&t), "X<0>");
    }

    #[test]
    fn roundtrip_misc() {
        for src in [
            "0",
            "a(X).a(X).0",
            "a!(0) | b(X).(X | 0)",
            "(<X>(X | X))<b!(0)>",
            "<x>(b!(<Z> x!(Z)))",
            "(<x>(x!(0)))<c>",
            "a(X).X<0> | a!(<Y>Y)",
        ] {
            let t = parse(src, &SortEnv::default()).unwrap();
            let printed = print(&t);
            let back = parse(&printed, &SortEnv::default()).unwrap();
            assert!(alpha_eq(&t, &back), "roundtrip failed: {src} -> {printed}");
        }
    }

    #[test]
    fn parse_error_position() {
        let e = parse("a(X.0", &SortEnv::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }
}
