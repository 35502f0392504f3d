//! Arithmetic expression mini-language for coefficient fields: coordinates
//! `x`, `y`, literals, `+ - * / ^` (standard precedence, `^` right
//! associative), unary minus, and the functions `sin cos exp log abs min
//! max`. Parsing is total or fails with a byte position; printing an AST and
//! reparsing yields the identical AST.

use std::fmt;

use anyhow::{bail, Result};

/// Binary operators in increasing precedence groups: `+ -` < `* /` < `^`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// Built-in functions; `log` is the natural logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Abs,
    Min,
    Max,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }
}

/// Coordinate variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Abstract syntax tree of an expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Axis),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    /// Evaluate at a point. Total: domain errors surface as NaN/±inf, which
    /// callers reject with a finiteness check.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Axis::X) => x,
            Expr::Var(Axis::Y) => y,
            Expr::Neg(e) => -e.eval(x, y),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(x, y), r.eval(x, y));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(x, y);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Abs => a.abs(),
                    Func::Min => a.min(args[1].eval(x, y)),
                    Func::Max => a.max(args[1].eval(x, y)),
                }
            }
        }
    }

    /// Precedence of the node's top-level construct (atoms bind tightest).
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // `min_prec` is the loosest precedence printable without parentheses
        // in the current position; structure-preserving for reparsing.
        fn show(e: &Expr, min_prec: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if e.precedence() < min_prec {
                write!(f, "(")?;
                show(e, 0, f)?;
                return write!(f, ")");
            }
            match e {
                Expr::Num(v) => write!(f, "{v}"),
                Expr::Var(Axis::X) => write!(f, "x"),
                Expr::Var(Axis::Y) => write!(f, "y"),
                Expr::Neg(inner) => {
                    write!(f, "-")?;
                    show(inner, 3, f)
                }
                Expr::Binary(op, l, r) => {
                    let p = op.precedence();
                    // `^` is right associative; the others are left
                    // associative, so equal precedence needs parens on the
                    // opposite side.
                    let (lp, rp) = if *op == BinOp::Pow { (p + 1, 3) } else { (p, p + 1) };
                    show(l, lp, f)?;
                    write!(f, " {} ", op.symbol())?;
                    show(r, rp, f)
                }
                Expr::Call(func, args) => {
                    write!(f, "{}(", func.name())?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        show(a, 0, f)?;
                    }
                    write!(f, ")")
                }
            }
        }
        show(self, 0, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

struct Lexer<'a> {
    src: &'a str,
    tokens: Vec<(Token, usize)>,
}

fn lex(src: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' => {
                tokens.push((Token::Op(c), i));
                i += 1;
            }
            '(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            ')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            ',' => {
                tokens.push((Token::Comma, i));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
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
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| anyhow::anyhow!("invalid number `{text}` at byte {start}"))?;
                tokens.push((Token::Num(value), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                tokens.push((Token::Ident(src[start..i].to_string()), start));
            }
            _ => bail!("unexpected character `{c}` at byte {i}"),
        }
    }
    Ok(tokens)
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.lexer.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.lexer
            .tokens
            .get(self.pos)
            .map(|(_, at)| *at)
            .unwrap_or(self.lexer.src.len())
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.lexer.tokens.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Token, what: &str) -> Result<()> {
        let at = self.here();
        match self.advance() {
            Some(ref t) if t == want => Ok(()),
            _ => bail!("expected {what} at byte {at}"),
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut lhs = self.product()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Token::Op('-')) = self.peek() {
            self.advance();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Token::Op('^')) = self.peek() {
            self.advance();
            // Right associative; the exponent may carry a unary minus.
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.here();
        match self.advance() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::LParen) => {
                let inner = self.sum()?;
                self.expect(&Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::Var(Axis::X)),
                "y" => Ok(Expr::Var(Axis::Y)),
                _ => {
                    let func = Func::from_name(&name).ok_or_else(|| {
                        anyhow::anyhow!("unknown identifier `{name}` at byte {at}")
                    })?;
                    self.expect(&Token::LParen, "`(` after function name")?;
                    let mut args = vec![self.sum()?];
                    while let Some(Token::Comma) = self.peek() {
                        self.advance();
                        args.push(self.sum()?);
                    }
                    self.expect(&Token::RParen, "`)`")?;
                    if args.len() != func.arity() {
                        bail!(
                            "{} takes {} argument(s), got {} at byte {at}",
                            func.name(),
                            func.arity(),
                            args.len()
                        );
                    }
                    Ok(Expr::Call(func, args))
                }
            },
            _ => bail!("expected a value at byte {at}"),
        }
    }
}

/// Parse an expression, or fail with the byte position of the problem.
pub fn parse(src: &str) -> Result<Expr> {
    let tokens = lex(src)?;
    let mut parser = Parser {
        lexer: Lexer { src, tokens },
        pos: 0,
    };
    let expr = parser.sum()?;
    if parser.pos != parser.lexer.tokens.len() {
        bail!("unexpected trailing input at byte {}", parser.here());
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval1(src: &str, x: f64) -> f64 {
        parse(src).unwrap().eval(x, 0.0)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval1("2*3+4*5", 0.0), 26.0);
        assert_eq!(eval1("2-3-4", 0.0), -5.0);
        assert_eq!(eval1("2^3^2", 0.0), 512.0);
        assert_eq!(eval1("24/4/2", 0.0), 3.0);
        assert_eq!(eval1("-2^2", 0.0), -4.0);
        assert_eq!(eval1("(-2)^2", 0.0), 4.0);
        assert_eq!(eval1("2^-1", 0.0), 0.5);
        assert_eq!(eval1("min(3, max(1, 2))", 0.0), 2.0);
        assert_eq!(eval1("abs(0 - x)", 4.0), 4.0);
        assert_eq!(parse("log(exp(1))").unwrap().eval(0.0, 0.0), 1.0);
    }

    #[test]
    fn oscillating_exponent_value() {
        // Hand value at x = 0.5: 0.5 + 0.4·sin(3.14159/2)² = 0.9 up to the
        // O(1e-12) error in the π literal.
        let e = parse("0.5 + 0.4*sin(3.14159*x)^2").unwrap();
        assert!((e.eval(0.5, 0.0) - 0.9).abs() < 1e-11);
        for i in 1..64 {
            let v = e.eval(i as f64 / 64.0, 0.0);
            assert!(v > 0.5 && v <= 0.9 + 1e-12);
        }
    }

    #[test]
    fn parse_errors_carry_positions() {
        for (src, needle) in [
            ("2 +", "byte 3"),
            ("sin()", "expected a value"),
            ("min(1)", "takes 2 argument(s)"),
            ("foo(2)", "unknown identifier `foo`"),
            ("2 @ 3", "unexpected character `@`"),
            ("(1 + 2", "expected `)`"),
            ("1 2", "trailing input"),
        ] {
            let err = parse(src).unwrap_err().to_string();
            assert!(err.contains(needle), "{src}: {err}");
        }
    }

    #[test]
    fn display_reparses_to_identical_ast() {
        for src in [
            "2 - (3 - 4)",
            "-(2*x)",
            "-x^2",
            "(2^3)^2",
            "x^(2*y)",
            "1 - -x",
            "max(x, y) / (x + 1)",
        ] {
            let ast = parse(src).unwrap();
            let printed = ast.to_string();
            let reparsed = parse(&printed).unwrap();
            assert_eq!(ast, reparsed, "{src} -> {printed}");
        }
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0..1e3f64).prop_map(Expr::Num),
            Just(Expr::Var(Axis::X)),
            Just(Expr::Var(Axis::Y)),
        ];
        leaf.prop_recursive(5, 48, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow),
                ])
                    .prop_map(|(l, r, op)| Expr::Binary(op, Box::new(l), Box::new(r))),
                inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
                (inner.clone(), prop_oneof![
                    Just(Func::Sin),
                    Just(Func::Cos),
                    Just(Func::Exp),
                    Just(Func::Log),
                    Just(Func::Abs),
                ])
                    .prop_map(|(a, f)| Expr::Call(f, vec![a])),
                (inner.clone(), inner, prop_oneof![Just(Func::Min), Just(Func::Max)])
                    .prop_map(|(a, b, f)| Expr::Call(f, vec![a, b])),
            ]
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_identity(ast in arb_expr()) {
            let printed = ast.to_string();
            let reparsed = parse(&printed).unwrap();
            prop_assert_eq!(&ast, &reparsed, "printed as {}", printed);
        }
    }
}
