//! A small OpenQASM 2 subset: one quantum register, the gates
//! `id x y z h rx ry rz cx`, `measure`, `barrier` (parsed and dropped) and a
//! `delay[d]` extension. Angles are literal arithmetic over numbers and `pi`,
//! or a bare identifier naming a parameter slot.

use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Angle, Gate, GateKind, TimedCircuit};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QasmErrorKind {
    Lexical,
    Syntax,
    UnknownGate,
    RegisterBounds,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct QasmError {
    pub kind: QasmErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QasmProgram {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    /// Parameter names, in order of first appearance.
    pub parameters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Real(f64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(v) => format!("'{v}'"),
            Tok::Real(v) => format!("'{v}'"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Sym(s) => format!("'{s}'"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, QasmError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| QasmError {
        kind: QasmErrorKind::Lexical,
        line,
        col,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let mut real = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            if real {
                Tok::Real(s.parse().map_err(|_| err(l0, c0, format!("bad number '{s}'")))?)
            } else {
                Tok::Int(s.parse().map_err(|_| err(l0, c0, format!("bad integer '{s}'")))?)
            }
        } else if c == '"' {
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'"') {
                return Err(err(l0, c0, "unterminated string".into()));
            }
            i += 1;
            Tok::Str(chars[start + 1..i - 1].iter().collect())
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            Tok::Sym("->")
        } else {
            let sym = match c {
                ';' => ";",
                ',' => ",",
                '(' => "(",
                ')' => ")",
                '[' => "[",
                ']' => "]",
                '+' => "+",
                '-' => "-",
                '*' => "*",
                '/' => "/",
                _ => return Err(err(l0, c0, format!("unexpected character '{c}'"))),
            };
            i += 1;
            Tok::Sym(sym)
        };
        col += i - start;
        out.push(Spanned {
            tok,
            line: l0,
            col: c0,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    qreg: Option<(String, usize)>,
    creg: Option<(String, usize)>,
    gates: Vec<Gate>,
    parameters: Vec<String>,
}

enum Expr {
    Value(f64),
    Param(String),
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(t: &Spanned, kind: QasmErrorKind, message: String) -> QasmError {
        QasmError {
            kind,
            line: t.line,
            col: t.col,
            message,
        }
    }

    fn expect_sym(&mut self, sym: &'static str) -> Result<(), QasmError> {
        let t = self.next();
        if t.tok == Tok::Sym(sym) {
            Ok(())
        } else {
            Err(Self::error_at(
                &t,
                QasmErrorKind::Syntax,
                format!("expected '{sym}', found {}", t.tok.describe()),
            ))
        }
    }

    fn is_sym(&self, sym: &'static str) -> bool {
        self.peek().tok == Tok::Sym(sym)
    }

    fn ident(&mut self) -> Result<(String, Spanned), QasmError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t)),
            other => Err(Self::error_at(
                &t,
                QasmErrorKind::Syntax,
                format!("expected identifier, found {}", other.describe()),
            )),
        }
    }

    fn integer(&mut self) -> Result<(u64, Spanned), QasmError> {
        let t = self.next();
        match t.tok {
            Tok::Int(v) => Ok((v, t)),
            ref other => Err(Self::error_at(
                &t,
                QasmErrorKind::Syntax,
                format!("expected integer, found {}", other.describe()),
            )),
        }
    }

    fn program(mut self) -> Result<QasmProgram, QasmError> {
        if matches!(&self.peek().tok, Tok::Ident(s) if s == "OPENQASM") {
            self.next();
            let t = self.next();
            match t.tok {
                Tok::Real(2.0) => {}
                Tok::Int(2) => {}
                ref other => {
                    return Err(Self::error_at(
                        &t,
                        QasmErrorKind::Unsupported,
                        format!("only OPENQASM 2.0 is supported, found {}", other.describe()),
                    ))
                }
            }
            self.expect_sym(";")?;
        }
        while self.peek().tok != Tok::Eof {
            self.statement()?;
        }
        let n_qubits = self.qreg.as_ref().map_or(0, |(_, n)| *n);
        Ok(QasmProgram {
            n_qubits,
            gates: self.gates,
            parameters: self.parameters,
        })
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let (name, at) = self.ident()?;
        match name.as_str() {
            "include" => {
                let t = self.next();
                if !matches!(t.tok, Tok::Str(_)) {
                    return Err(Self::error_at(
                        &t,
                        QasmErrorKind::Syntax,
                        format!("expected file name, found {}", t.tok.describe()),
                    ));
                }
                self.expect_sym(";")
            }
            "qreg" | "creg" => self.register(&name, &at),
            "barrier" => {
                self.qarg_list()?;
                self.expect_sym(";")
            }
            "measure" => self.measure(),
            "delay" => {
                self.expect_sym("[")?;
                let (d, _) = self.integer()?;
                self.expect_sym("]")?;
                let q = self.qubit()?;
                self.expect_sym(";")?;
                self.gates.push(Gate::one(GateKind::Delay(d), q));
                Ok(())
            }
            _ => self.gate(&name, &at),
        }
    }

    fn register(&mut self, which: &str, at: &Spanned) -> Result<(), QasmError> {
        let (name, _) = self.ident()?;
        self.expect_sym("[")?;
        let (size, st) = self.integer()?;
        self.expect_sym("]")?;
        self.expect_sym(";")?;
        let slot = if which == "qreg" { &mut self.qreg } else { &mut self.creg };
        if slot.is_some() {
            return Err(Self::error_at(
                at,
                QasmErrorKind::Unsupported,
                format!("only one {which} declaration is supported"),
            ));
        }
        if which == "qreg" && size == 0 {
            return Err(Self::error_at(&st, QasmErrorKind::RegisterBounds, "empty quantum register".into()));
        }
        *slot = Some((name, size as usize));
        Ok(())
    }

    /// `q[i]`, or a bare `q` meaning every qubit.
    fn qarg(&mut self) -> Result<Vec<usize>, QasmError> {
        let (name, t) = self.ident()?;
        let (reg, size) = match &self.qreg {
            Some((reg, size)) if *reg == name => (reg.clone(), *size),
            _ => {
                return Err(Self::error_at(
                    &t,
                    QasmErrorKind::RegisterBounds,
                    format!("unknown quantum register '{name}'"),
                ))
            }
        };
        if !self.is_sym("[") {
            return Ok((0..size).collect());
        }
        self.next();
        let (idx, it) = self.integer()?;
        self.expect_sym("]")?;
        if idx as usize >= size {
            return Err(Self::error_at(
                &it,
                QasmErrorKind::RegisterBounds,
                format!("index {idx} out of range for {reg}[{size}]"),
            ));
        }
        Ok(vec![idx as usize])
    }

    fn qubit(&mut self) -> Result<usize, QasmError> {
        let at = self.peek().clone();
        let qs = self.qarg()?;
        if qs.len() != 1 {
            return Err(Self::error_at(
                &at,
                QasmErrorKind::Unsupported,
                "register broadcast is only supported for measure and barrier".into(),
            ));
        }
        Ok(qs[0])
    }

    fn qarg_list(&mut self) -> Result<Vec<usize>, QasmError> {
        let mut out = self.qarg()?;
        while self.is_sym(",") {
            self.next();
            out.extend(self.qarg()?);
        }
        Ok(out)
    }

    fn measure(&mut self) -> Result<(), QasmError> {
        let qs = self.qarg()?;
        if self.is_sym("->") {
            self.next();
            let (name, t) = self.ident()?;
            let size = match &self.creg {
                Some((reg, size)) if *reg == name => *size,
                _ => {
                    return Err(Self::error_at(
                        &t,
                        QasmErrorKind::RegisterBounds,
                        format!("unknown classical register '{name}'"),
                    ))
                }
            };
            let bits = if self.is_sym("[") {
                self.next();
                let (idx, it) = self.integer()?;
                self.expect_sym("]")?;
                if idx as usize >= size {
                    return Err(Self::error_at(
                        &it,
                        QasmErrorKind::RegisterBounds,
                        format!("index {idx} out of range for {name}[{size}]"),
                    ));
                }
                1
            } else {
                size
            };
            if bits != qs.len() {
                return Err(Self::error_at(
                    &t,
                    QasmErrorKind::Syntax,
                    "measure source and target sizes differ".into(),
                ));
            }
        }
        self.expect_sym(";")?;
        self.gates
            .extend(qs.into_iter().map(|q| Gate::one(GateKind::Measure, q)));
        Ok(())
    }

    fn gate(&mut self, name: &str, at: &Spanned) -> Result<(), QasmError> {
        let rotation = matches!(name, "rx" | "ry" | "rz");
        let plain = match name {
            "id" => Some(GateKind::I),
            "x" => Some(GateKind::X),
            "y" => Some(GateKind::Y),
            "z" => Some(GateKind::Z),
            "h" => Some(GateKind::H),
            "cx" | "CX" => Some(GateKind::Cx),
            _ => None,
        };
        if plain.is_none() && !rotation {
            return Err(Self::error_at(
                at,
                QasmErrorKind::UnknownGate,
                format!("unknown gate '{name}'"),
            ));
        }
        let kind = if rotation {
            self.expect_sym("(")?;
            let angle = match self.angle()? {
                Expr::Value(v) => Angle::Value(v),
                Expr::Param(p) => Angle::Param(self.slot(p)),
            };
            self.expect_sym(")")?;
            match name {
                "rx" => GateKind::Rx(angle),
                "ry" => GateKind::Ry(angle),
                _ => GateKind::Rz(angle),
            }
        } else {
            plain.expect("checked above")
        };
        let mut qubits = vec![self.qubit()?];
        if kind == GateKind::Cx {
            self.expect_sym(",")?;
            let t = self.peek().clone();
            let target = self.qubit()?;
            if target == qubits[0] {
                return Err(Self::error_at(
                    &t,
                    QasmErrorKind::Syntax,
                    "cx control and target must differ".into(),
                ));
            }
            qubits.push(target);
        }
        self.expect_sym(";")?;
        self.gates.push(Gate::new(kind, &qubits));
        Ok(())
    }

    fn slot(&mut self, name: String) -> usize {
        match self.parameters.iter().position(|p| *p == name) {
            Some(i) => i,
            None => {
                self.parameters.push(name);
                self.parameters.len() - 1
            }
        }
    }

    fn angle(&mut self) -> Result<Expr, QasmError> {
        if let Tok::Ident(name) = &self.peek().tok {
            let is_bare = name != "pi" && self.toks[self.pos + 1].tok == Tok::Sym(")");
            if is_bare {
                let name = name.clone();
                self.next();
                return Ok(Expr::Param(name));
            }
        }
        let start = self.peek().clone();
        let v = self.expr()?;
        if !v.is_finite() {
            return Err(Self::error_at(&start, QasmErrorKind::Syntax, "angle is not finite".into()));
        }
        Ok(Expr::Value(v))
    }

    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut v = self.term()?;
        while self.is_sym("+") || self.is_sym("-") {
            let plus = self.is_sym("+");
            self.next();
            let rhs = self.term()?;
            v = if plus { v + rhs } else { v - rhs };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64, QasmError> {
        let mut v = self.factor()?;
        while self.is_sym("*") || self.is_sym("/") {
            let mul = self.is_sym("*");
            self.next();
            let rhs = self.factor()?;
            v = if mul { v * rhs } else { v / rhs };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<f64, QasmError> {
        let t = self.next();
        match &t.tok {
            Tok::Sym("-") => Ok(-self.factor()?),
            Tok::Sym("+") => self.factor(),
            Tok::Sym("(") => {
                let v = self.expr()?;
                self.expect_sym(")")?;
                Ok(v)
            }
            Tok::Int(v) => Ok(*v as f64),
            Tok::Real(v) => Ok(*v),
            Tok::Ident(s) if s == "pi" => Ok(std::f64::consts::PI),
            Tok::Ident(s) => Err(Self::error_at(
                &t,
                QasmErrorKind::Syntax,
                format!("parameter '{s}' must stand alone as the whole angle"),
            )),
            other => Err(Self::error_at(
                &t,
                QasmErrorKind::Syntax,
                format!("expected angle expression, found {}", other.describe()),
            )),
        }
    }
}

/// Parses QASM source into an unscheduled gate list.
pub fn parse(text: &str) -> Result<QasmProgram, QasmError> {
    let toks = lex(text)?;
    Parser {
        toks,
        pos: 0,
        qreg: None,
        creg: None,
        gates: Vec::new(),
        parameters: Vec::new(),
    }
    .program()
}

/// Shortest decimal that round-trips the value rounded to 12 significant digits.
pub fn format_angle(v: f64) -> String {
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    let s = format!("{rounded}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn statement(out: &mut String, kind: &GateKind, qubits: &[usize], parameters: &[String]) {
    match kind {
        GateKind::Measure => {
            let _ = writeln!(out, "measure q[{0}] -> c[{0}];", qubits[0]);
            return;
        }
        GateKind::Delay(d) => {
            let _ = writeln!(out, "delay[{d}] q[{}];", qubits[0]);
            return;
        }
        _ => {}
    }
    out.push_str(kind.name());
    match kind.angle() {
        Some(Angle::Value(v)) => {
            let _ = write!(out, "({})", format_angle(v));
        }
        Some(Angle::Param(p)) => {
            let _ = write!(out, "({})", parameters[p]);
        }
        None => {}
    }
    let args: Vec<String> = qubits.iter().map(|q| format!("q[{q}]")).collect();
    let _ = writeln!(out, " {};", args.join(","));
}

fn header(n_qubits: usize, measured: bool) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{n_qubits}];");
    if measured {
        let _ = writeln!(out, "creg c[{n_qubits}];");
    }
    out
}

/// Canonical text for a gate list. Parameter slots are written by name.
pub fn emit(gates: &[Gate], n_qubits: usize, parameters: &[String]) -> String {
    let measured = gates.iter().any(|g| g.kind == GateKind::Measure);
    let mut out = header(n_qubits, measured);
    for g in gates {
        statement(&mut out, &g.kind, &g.qubits, parameters);
    }
    out
}

pub fn emit_program(p: &QasmProgram) -> String {
    emit(&p.gates, p.n_qubits, &p.parameters)
}

/// Emits a scheduled circuit, writing every idle gap after a qubit's first
/// operation as an explicit `delay[d]` so the timing survives the round trip.
pub fn emit_timed(tc: &TimedCircuit) -> String {
    let measured = tc.gates.iter().any(|g| g.kind == GateKind::Measure);
    let mut out = header(tc.n_qubits, measured);
    let mut busy_until: Vec<Option<u64>> = vec![None; tc.n_qubits];
    for g in tc.gates.iter().filter(|g| !g.kind.is_delay()) {
        for &q in &g.qubits {
            if let Some(t) = busy_until[q].filter(|&t| g.start > t) {
                let _ = writeln!(out, "delay[{}] q[{q}];", g.start - t);
            }
        }
        statement(&mut out, &g.kind, &g.qubits, &tc.parameters);
        for &q in &g.qubits {
            busy_until[q] = Some(g.end());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_program() {
        let p = parse("qreg q[1]; x q[0];").unwrap();
        assert_eq!(p.n_qubits, 1);
        assert_eq!(p.gates, vec![Gate::one(GateKind::X, 0)]);
    }

    #[test]
    fn symbolic_parameter_becomes_slot() {
        let p = parse("OPENQASM 2.0;\nqreg q[1];\nrx(theta0) q[0];\nrz(theta0) q[0];").unwrap();
        assert_eq!(p.parameters, vec!["theta0".to_string()]);
        assert_eq!(p.gates[0].kind, GateKind::Rx(Angle::Param(0)));
        assert_eq!(p.gates[1].kind, GateKind::Rz(Angle::Param(0)));
    }

    #[test]
    fn pi_arithmetic() {
        let p = parse("qreg q[1]; rz(-pi/2) q[0]; ry(2*(pi - 1)) q[0]; rx(1.5e-3) q[0];").unwrap();
        let angles: Vec<f64> = p
            .gates
            .iter()
            .map(|g| g.kind.angle().unwrap().resolve(&[]))
            .collect();
        assert_eq!(angles[0], -std::f64::consts::FRAC_PI_2);
        assert!((angles[1] - 2.0 * (std::f64::consts::PI - 1.0)).abs() < 1e-15);
        assert_eq!(angles[2], 1.5e-3);
    }

    #[test]
    fn barrier_dropped_delay_kept() {
        let p = parse("qreg q[2]; h q[0]; barrier q; delay[799] q[0]; measure q -> c;")
            .unwrap_err();
        assert_eq!(p.kind, QasmErrorKind::RegisterBounds);
        let p = parse("qreg q[2]; creg c[2]; h q[0]; barrier q; delay[799] q[0]; measure q -> c;")
            .unwrap();
        assert_eq!(p.gates.len(), 4);
        assert_eq!(p.gates[1].kind, GateKind::Delay(799));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse("qreg q[1];\nfoo q[0];").unwrap_err();
        assert_eq!((e.kind, e.line, e.col), (QasmErrorKind::UnknownGate, 2, 1));
        let e = parse("qreg q[2];\ncx q[0], q[2];").unwrap_err();
        assert_eq!((e.kind, e.line, e.col), (QasmErrorKind::RegisterBounds, 2, 12));
        let e = parse("qreg q[1];\n  x q[0] $").unwrap_err();
        assert_eq!((e.kind, e.line, e.col), (QasmErrorKind::Lexical, 2, 10));
        let e = parse("qreg q[1];\nrx(theta + 1) q[0];").unwrap_err();
        assert_eq!((e.line, e.col), (2, 4));
    }

    #[test]
    fn emit_examples() {
        assert_eq!(emit(&[], 2, &[]), "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[2];\n");
        let text = emit(&[Gate::one(GateKind::H, 0), Gate::cx(0, 1)], 2, &[]);
        assert!(text.ends_with("qreg q[2];\nh q[0];\ncx q[0],q[1];\n"));
    }

    #[test]
    fn angle_formatting_is_stable() {
        let s = format_angle(std::f64::consts::PI);
        assert_eq!(s, "3.14159265359");
        assert_eq!(format_angle(s.parse().unwrap()), s);
        assert_eq!(format_angle(-0.0), "0");
        assert_eq!(format_angle(0.5), "0.5");
    }
}
