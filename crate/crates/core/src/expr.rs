//! Coordinate expressions: lexing, Pratt parsing, rendering, evaluation.
//!
//! Metric components, 1-form components and coordinate maps are supplied as
//! strings over named coordinates. The grammar is small and fixed, with no
//! user-defined functions, so evaluation stays total on any [`Scalar`] ring:
//! the same AST evaluates on plain reals and on jets of any configuration.
//!
//! Precedence, loosest to tightest: `+ -`, `* /`, unary minus, `^`
//! (right-associative, and binding tighter than unary minus so `-u^2` is
//! `-(u^2)`), function application.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Byte range into the source string, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bytes {}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

/// Lexes a source string into tokens. Numbers accept decimal and scientific
/// notation; identifiers are ASCII letters/digits/underscores starting with a
/// letter; whitespace is skipped.
pub fn tokenize(source: &str) -> Result<Vec<Token>> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' | b',' => {
                i += 1;
                let kind = match b {
                    b'+' => TokenKind::Plus,
                    b'-' => TokenKind::Minus,
                    b'*' => TokenKind::Star,
                    b'/' => TokenKind::Slash,
                    b'^' => TokenKind::Caret,
                    b'(' => TokenKind::LParen,
                    b')' => TokenKind::RParen,
                    _ => TokenKind::Comma,
                };
                tokens.push(Token {
                    kind,
                    span: SourceSpan::new(start, i),
                });
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let span = SourceSpan::new(start, i);
                let text = &source[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Lex {
                    span,
                    msg: format!("malformed number `{text}`"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    span,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(source[start..i].to_string()),
                    span: SourceSpan::new(start, i),
                });
            }
            _ => {
                let ch_len = source[i..].chars().next().map_or(1, char::len_utf8);
                return Err(Error::Lex {
                    span: SourceSpan::new(i, i + ch_len),
                    msg: format!("illegal character `{}`", &source[i..i + ch_len]),
                });
            }
        }
    }
    Ok(tokens)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl UnaryOp {
    fn function_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }

    fn render_name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Parsed arithmetic expression over named coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    Var(String),
    Unary(UnaryOp, Box<ExprAst>),
    Binary(BinaryOp, Box<ExprAst>, Box<ExprAst>),
}

const BP_ADD: (u8, u8) = (10, 11);
const BP_MUL: (u8, u8) = (20, 21);
const BP_PREFIX_MINUS: u8 = 25;
const BP_POW: (u8, u8) = (31, 30);

struct Parser<'a> {
    tokens: &'a [Token],
    cursor: usize,
    source_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.cursor);
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn end_span(&self) -> SourceSpan {
        SourceSpan::new(self.source_len, self.source_len)
    }

    fn error(&self, span: SourceSpan, msg: impl Into<String>) -> Error {
        Error::Parse {
            span,
            msg: msg.into(),
        }
    }

    fn expect_rparen(&mut self, open: SourceSpan) -> Result<()> {
        match self.next().cloned() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => Ok(()),
            Some(t) => Err(self.error(t.span, "expected `)`")),
            None => Err(self.error(open, "unbalanced parenthesis")),
        }
    }

    fn primary(&mut self) -> Result<ExprAst> {
        let token = match self.next() {
            Some(t) => t.clone(),
            None => return Err(self.error(self.end_span(), "unexpected end of expression")),
        };
        match token.kind {
            TokenKind::Number(v) => Ok(ExprAst::Const(v)),
            TokenKind::Minus => {
                let operand = self.expr_bp(BP_PREFIX_MINUS)?;
                Ok(ExprAst::Unary(UnaryOp::Neg, Box::new(operand)))
            }
            TokenKind::LParen => {
                let inner = self.expr_bp(0)?;
                self.expect_rparen(token.span)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if matches!(
                    self.peek(),
                    Some(Token {
                        kind: TokenKind::LParen,
                        ..
                    })
                ) {
                    let op = UnaryOp::function_name(&name).ok_or_else(|| {
                        self.error(token.span, format!("unknown function name `{name}`"))
                    })?;
                    let open = self.next().expect("peeked").span;
                    let arg = self.expr_bp(0)?;
                    self.expect_rparen(open)?;
                    Ok(ExprAst::Unary(op, Box::new(arg)))
                } else {
                    Ok(ExprAst::Var(name))
                }
            }
            _ => Err(self.error(token.span, "expected a value")),
        }
    }

    fn expr_bp(&mut self, min_bp: u8) -> Result<ExprAst> {
        let mut lhs = self.primary()?;
        loop {
            let (op, lbp, rbp) = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => (BinaryOp::Add, BP_ADD.0, BP_ADD.1),
                Some(TokenKind::Minus) => (BinaryOp::Sub, BP_ADD.0, BP_ADD.1),
                Some(TokenKind::Star) => (BinaryOp::Mul, BP_MUL.0, BP_MUL.1),
                Some(TokenKind::Slash) => (BinaryOp::Div, BP_MUL.0, BP_MUL.1),
                Some(TokenKind::Caret) => (BinaryOp::Pow, BP_POW.0, BP_POW.1),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs = self.expr_bp(rbp)?;
            lhs = ExprAst::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }
}

/// Parses a token stream produced by [`tokenize`].
pub fn parse(tokens: &[Token], source_len: usize) -> Result<ExprAst> {
    let mut parser = Parser {
        tokens,
        cursor: 0,
        source_len,
    };
    let ast = parser.expr_bp(0)?;
    if let Some(t) = parser.peek() {
        return Err(parser.error(t.span, "trailing tokens after expression"));
    }
    Ok(ast)
}

impl ExprAst {
    /// Tokenizes and parses in one step.
    pub fn parse_str(source: &str) -> Result<ExprAst> {
        let tokens = tokenize(source)?;
        parse(&tokens, source.len())
    }

    /// All variable names referenced by the expression.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            ExprAst::Const(_) => {}
            ExprAst::Var(name) => {
                out.insert(name.clone());
            }
            ExprAst::Unary(_, a) => a.collect_variables(out),
            ExprAst::Binary(_, a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    /// Errors unless every referenced variable is in `allowed`.
    pub fn check_variables(&self, allowed: &[String]) -> Result<()> {
        for v in self.variables() {
            if !allowed.contains(&v) {
                return Err(Error::Config(format!(
                    "expression references `{v}`, which is not among the declared coordinates {allowed:?}"
                )));
            }
        }
        Ok(())
    }

    /// True when the expression is the literal constant zero.
    pub fn is_zero_const(&self) -> bool {
        matches!(self, ExprAst::Const(c) if *c == 0.0)
    }

    fn precedence(&self) -> u8 {
        match self {
            ExprAst::Const(_) | ExprAst::Var(_) => 100,
            ExprAst::Unary(UnaryOp::Neg, _) => BP_PREFIX_MINUS,
            ExprAst::Unary(_, _) => 100,
            ExprAst::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => BP_ADD.0,
            ExprAst::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => BP_MUL.0,
            ExprAst::Binary(BinaryOp::Pow, _, _) => BP_POW.0,
        }
    }

    /// Renders to a string that reparses to a structurally identical tree
    /// (for parser-shaped trees: non-negative finite constants).
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_child(child: &ExprAst, needs_parens: bool, out: &mut String) {
        if needs_parens {
            out.push('(');
            child.render_into(out);
            out.push(')');
        } else {
            child.render_into(out);
        }
    }

    fn render_into(&self, out: &mut String) {
        match self {
            ExprAst::Const(c) => out.push_str(&format!("{c:?}")),
            ExprAst::Var(name) => out.push_str(name),
            ExprAst::Unary(UnaryOp::Neg, a) => {
                out.push('-');
                Self::render_child(a, a.precedence() < BP_PREFIX_MINUS, out);
            }
            ExprAst::Unary(op, a) => {
                out.push_str(op.render_name());
                out.push('(');
                a.render_into(out);
                out.push(')');
            }
            ExprAst::Binary(op, a, b) => {
                // `^` is right-associative: its left child needs parens even
                // at equal precedence, its right child does not. The other
                // operators are the mirror image.
                let (sym, left_bp, rbp) = match op {
                    BinaryOp::Add => ('+', BP_ADD.0, BP_ADD.1),
                    BinaryOp::Sub => ('-', BP_ADD.0, BP_ADD.1),
                    BinaryOp::Mul => ('*', BP_MUL.0, BP_MUL.1),
                    BinaryOp::Div => ('/', BP_MUL.0, BP_MUL.1),
                    BinaryOp::Pow => ('^', BP_POW.0 + 1, BP_POW.1),
                };
                Self::render_child(a, a.precedence() < left_bp, out);
                out.push(sym);
                Self::render_child(b, b.precedence() < rbp, out);
            }
        }
    }
}

/// Evaluates `ast` with coordinates bound positionally: `names[i]` ↦
/// `values[i]`. Works on any [`Scalar`] ring; constants are lifted into the
/// ring of the bound values.
pub fn evaluate<S: Scalar>(ast: &ExprAst, names: &[String], values: &[S]) -> Result<S> {
    if names.len() != values.len() {
        return Err(Error::Eval(format!(
            "{} coordinate names but {} bound values",
            names.len(),
            values.len()
        )));
    }
    let exemplar = values
        .first()
        .ok_or_else(|| Error::Eval("cannot evaluate with no bound coordinates".into()))?;
    eval_rec(ast, names, values, exemplar)
}

fn eval_rec<S: Scalar>(ast: &ExprAst, names: &[String], values: &[S], exemplar: &S) -> Result<S> {
    match ast {
        ExprAst::Const(c) => Ok(exemplar.lift(*c)),
        ExprAst::Var(name) => names
            .iter()
            .position(|n| n == name)
            .map(|i| values[i].clone())
            .ok_or_else(|| Error::Eval(format!("unbound variable `{name}`"))),
        ExprAst::Unary(op, a) => {
            let v = eval_rec(a, names, values, exemplar)?;
            Ok(match op {
                UnaryOp::Neg => -v,
                UnaryOp::Sin => v.sin(),
                UnaryOp::Cos => v.cos(),
                UnaryOp::Exp => v.exp(),
                UnaryOp::Tanh => v.tanh(),
                UnaryOp::Log => v.try_ln()?,
                UnaryOp::Sqrt => v.try_sqrt()?,
            })
        }
        ExprAst::Binary(op, a, b) => {
            let x = eval_rec(a, names, values, exemplar)?;
            let y = eval_rec(b, names, values, exemplar)?;
            match op {
                BinaryOp::Add => Ok(x + y),
                BinaryOp::Sub => Ok(x - y),
                BinaryOp::Mul => Ok(x * y),
                BinaryOp::Div => x.try_div(&y),
                BinaryOp::Pow => {
                    // Integer constant exponents go through exact repeated
                    // multiplication, which is also valid for negative bases;
                    // everything else is exp(b·ln a) with a > 0 required.
                    if y.is_constant() {
                        let p = y.value();
                        if p.fract() == 0.0 && p.abs() < 2f64.powi(31) {
                            return x.powi(p as i64);
                        }
                        x.try_powf(p)
                    } else {
                        Ok((x.try_ln()? * y).exp())
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{seed_variable, JetConfig};

    fn parse_ok(src: &str) -> ExprAst {
        ExprAst::parse_str(src).unwrap()
    }

    #[test]
    fn tokenize_product() {
        let t = tokenize("u*v").unwrap();
        let kinds: Vec<_> = t.into_iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Ident("u".into()),
                TokenKind::Star,
                TokenKind::Ident("v".into()),
            ]
        );
    }

    #[test]
    fn tokenize_scientific_and_call() {
        let t = tokenize("-2.5e-1 + sin(x3)").unwrap();
        let kinds: Vec<_> = t.into_iter().map(|t| t.kind).collect();
        assert_eq!(
            kinds,
            vec![
                TokenKind::Minus,
                TokenKind::Number(0.25),
                TokenKind::Plus,
                TokenKind::Ident("sin".into()),
                TokenKind::LParen,
                TokenKind::Ident("x3".into()),
                TokenKind::RParen,
            ]
        );
    }

    #[test]
    fn tokenize_illegal_character_with_span() {
        match tokenize("u @ v") {
            Err(Error::Lex { span, .. }) => assert_eq!((span.start, span.end), (2, 3)),
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn parse_product() {
        assert_eq!(
            parse_ok("u*v"),
            ExprAst::Binary(
                BinaryOp::Mul,
                Box::new(ExprAst::Var("u".into())),
                Box::new(ExprAst::Var("v".into()))
            )
        );
    }

    #[test]
    fn unary_minus_over_power() {
        assert_eq!(
            parse_ok("-u^2"),
            ExprAst::Unary(
                UnaryOp::Neg,
                Box::new(ExprAst::Binary(
                    BinaryOp::Pow,
                    Box::new(ExprAst::Var("u".into())),
                    Box::new(ExprAst::Const(2.0))
                ))
            )
        );
    }

    #[test]
    fn unary_minus_tighter_than_product() {
        assert_eq!(
            parse_ok("-u*v"),
            ExprAst::Binary(
                BinaryOp::Mul,
                Box::new(ExprAst::Unary(
                    UnaryOp::Neg,
                    Box::new(ExprAst::Var("u".into()))
                )),
                Box::new(ExprAst::Var("v".into()))
            )
        );
    }

    #[test]
    fn power_right_associative() {
        assert_eq!(parse_ok("u^v^w"), parse_ok("u^(v^w)"));
        assert_ne!(parse_ok("u^v^w"), parse_ok("(u^v)^w"));
    }

    #[test]
    fn unbalanced_parenthesis() {
        match ExprAst::parse_str("2*(") {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("unbalanced") || msg.contains("end")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_function_name() {
        match ExprAst::parse_str("foo(x)") {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("unknown function")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_tokens_rejected() {
        assert!(matches!(
            ExprAst::parse_str("u v"),
            Err(Error::Parse { .. })
        ));
    }

    fn names(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn evaluate_on_reals() {
        let ast = parse_ok("u*v");
        let v = evaluate(&ast, &names(&["u", "v"]), &[0.7, 1.3]).unwrap();
        assert!((v - 0.91).abs() < 1e-15);

        let ast = parse_ok("exp(u)*sin(x3)");
        let v = evaluate(&ast, &names(&["u", "x3"]), &[0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn evaluate_on_jets_first_partial() {
        let ast = parse_ok("u*v");
        let cfg = JetConfig::new(2, 2).unwrap();
        let u = seed_variable(0, 0.7, cfg).unwrap();
        let v = seed_variable(1, 1.3, cfg).unwrap();
        let j = evaluate(&ast, &names(&["u", "v"]), &[u, v]).unwrap();
        assert!((j.partial(&[1]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let ast = parse_ok("u*w");
        assert!(matches!(
            evaluate(&ast, &names(&["u"]), &[1.0]),
            Err(Error::Eval(_))
        ));
    }

    #[test]
    fn integer_power_of_negative_base() {
        let ast = parse_ok("(0-2)^3");
        let v = evaluate(&ast, &names(&["u"]), &[0.0]).unwrap();
        assert_eq!(v, -8.0);
    }

    #[test]
    fn fractional_power_of_negative_base_is_domain_error() {
        let ast = parse_ok("(0-2)^0.5");
        assert!(matches!(
            evaluate(&ast, &names(&["u"]), &[0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn division_by_zero_value_is_domain_error() {
        let ast = parse_ok("1/u");
        assert!(matches!(
            evaluate(&ast, &names(&["u"]), &[0.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn jet_evaluation_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sources = [
            "u*v + sin(u)*cos(v)",
            "exp(0.3*u) / (1 + v^2)",
            "sqrt(2 + u) * tanh(v)",
            "u^2 - 3*v + 0.5*u*v",
            "log(2.5 + u*v)",
        ];
        let ns = names(&["u", "v"]);
        let cfg = JetConfig::new(2, 2).unwrap();
        let h = 1e-5;
        for src in sources {
            let ast = parse_ok(src);
            for _ in 0..20 {
                let u0: f64 = rng.gen_range(-0.9..0.9);
                let v0: f64 = rng.gen_range(-0.9..0.9);
                let ju = seed_variable(0, u0, cfg).unwrap();
                let jv = seed_variable(1, v0, cfg).unwrap();
                let jet = evaluate(&ast, &ns, &[ju, jv]).unwrap();
                for (var, delta) in [(0, [h, 0.0]), (1, [0.0, h])] {
                    let plus =
                        evaluate(&ast, &ns, &[u0 + delta[0], v0 + delta[1]]).unwrap();
                    let minus =
                        evaluate(&ast, &ns, &[u0 - delta[0], v0 - delta[1]]).unwrap();
                    let fd = (plus - minus) / (2.0 * h);
                    let jd = jet.partial(&[var]).unwrap();
                    let tol = 1e-6f64.max(1e-6 * jd.abs());
                    assert!((jd - fd).abs() < tol, "{src}: var {var}: {jd} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn real_and_order_zero_jet_agree_bitwise() {
        use crate::jet::Jet;
        let sources = ["u*v - 3/v", "exp(u)*tanh(v) + sqrt(v)", "u^3/(v+2)"];
        let ns = names(&["u", "v"]);
        for src in sources {
            let ast = parse_ok(src);
            let (u0, v0) = (0.37, 1.81);
            let real = evaluate(&ast, &ns, &[u0, v0]).unwrap();
            let cfg = JetConfig::new(2, 1).unwrap();
            let u = seed_variable(0, u0, cfg).unwrap().derivative(0).unwrap();
            let v = seed_variable(1, v0, cfg).unwrap().derivative(1).unwrap();
            // `derivative` collapsed both to order-0 jets holding the values.
            assert_eq!(u.order(), 0);
            let jet: Jet = evaluate(&ast, &ns, &[u.lift(u0), v.lift(v0)]).unwrap();
            assert_eq!(jet.value(), real);
        }
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_expr() -> impl Strategy<Value = ExprAst> {
        let leaf = prop_oneof![
            (0.0f64..100.0).prop_map(ExprAst::Const),
            prop_oneof![Just("u"), Just("v"), Just("x3")]
                .prop_map(|s| ExprAst::Var(s.to_string())),
        ];
        leaf.prop_recursive(5, 64, 8, |inner| {
            prop_oneof![
                (
                    prop_oneof![
                        Just(UnaryOp::Neg),
                        Just(UnaryOp::Sin),
                        Just(UnaryOp::Cos),
                        Just(UnaryOp::Exp),
                        Just(UnaryOp::Log),
                        Just(UnaryOp::Sqrt),
                        Just(UnaryOp::Tanh)
                    ],
                    inner.clone()
                )
                    .prop_map(|(op, a)| ExprAst::Unary(op, Box::new(a))),
                (
                    prop_oneof![
                        Just(BinaryOp::Add),
                        Just(BinaryOp::Sub),
                        Just(BinaryOp::Mul),
                        Just(BinaryOp::Div),
                        Just(BinaryOp::Pow)
                    ],
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, a, b)| ExprAst::Binary(op, Box::new(a), Box::new(b))),
            ]
        })
    }

    proptest! {
        // Round-trip: render(parse(s)) reparses to an identical tree.
        #[test]
        fn render_reparses_identically(ast in arb_expr()) {
            let rendered = ast.render();
            let reparsed = ExprAst::parse_str(&rendered).unwrap();
            prop_assert_eq!(reparsed, ast);
        }

        // The parser is total: every byte string yields Ok or a spanned Err,
        // never a panic.
        #[test]
        fn parser_never_panics(s in "\\PC*") {
            let _ = ExprAst::parse_str(&s);
        }

        #[test]
        fn parser_never_panics_ascii_ops(s in "[-+*/^().,a-z0-9 ]{0,40}") {
            let _ = ExprAst::parse_str(&s);
        }
    }
}
