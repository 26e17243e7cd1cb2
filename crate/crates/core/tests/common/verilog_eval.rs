//! Evaluator for the flat combinational Verilog subset the emitter writes:
//! sized wires with continuous assignments, concatenation, replication,
//! bit and part selects, `+ - == < > & | ?:`, reduction or and `$signed`.

use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num { width: Option<u32>, value: u128 },
    Sym(&'static str),
}

fn tokenize(src: &str) -> Vec<Tok> {
    const SYMS: [&str; 18] = [
        "==", "=", "{", "}", "[", "]", "(", ")", ":", ",", ";", "+", "-", "?", "|", "&", ">", "<",
    ];
    let mut out = Vec::new();
    for line in src.lines() {
        let line = line.split("//").next().unwrap();
        let b = line.as_bytes();
        let mut i = 0;
        while i < b.len() {
            let c = b[i] as char;
            if c.is_whitespace() {
                i += 1;
            } else if c.is_ascii_alphabetic() || c == '_' || c == '$' {
                let s = i;
                while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                    i += 1;
                }
                out.push(Tok::Ident(line[s..i].to_string()));
            } else if c.is_ascii_digit() {
                let s = i;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
                let lead: u128 = line[s..i].parse().unwrap();
                if i < b.len() && b[i] == b'\'' {
                    let radix = match b[i + 1] {
                        b'b' => 2,
                        b'd' => 10,
                        other => panic!("unsupported base {}", other as char),
                    };
                    i += 2;
                    let s = i;
                    while i < b.len() && (b[i] as char).is_ascii_alphanumeric() {
                        i += 1;
                    }
                    let value = u128::from_str_radix(&line[s..i], radix).unwrap();
                    out.push(Tok::Num {
                        width: Some(lead as u32),
                        value,
                    });
                } else {
                    out.push(Tok::Num {
                        width: None,
                        value: lead,
                    });
                }
            } else {
                let sym = SYMS
                    .iter()
                    .find(|s| line[i..].starts_with(**s))
                    .unwrap_or_else(|| panic!("unexpected character {c:?} in {line:?}"));
                out.push(Tok::Sym(sym));
                i += sym.len();
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Val {
    v: u128,
    w: u32,
    signed: bool,
}

fn mask(w: u32) -> u128 {
    if w >= 128 {
        u128::MAX
    } else {
        (1u128 << w) - 1
    }
}

impl Val {
    fn new(v: u128, w: u32) -> Val {
        Val {
            v: v & mask(w),
            w,
            signed: false,
        }
    }

    fn as_i128(&self) -> i128 {
        if self.signed && self.w > 0 && self.v >> (self.w - 1) & 1 == 1 {
            self.v as i128 - (1i128 << self.w)
        } else {
            self.v as i128
        }
    }
}

struct Parser<'a> {
    toks: &'a [Tok],
    pos: usize,
    env: &'a HashMap<String, Val>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(t)) if *t == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) {
        assert!(self.eat(s), "expected {s:?} at {:?}", self.peek());
    }

    fn number(&mut self) -> u128 {
        match self.toks[self.pos].clone() {
            Tok::Num { value, .. } => {
                self.pos += 1;
                value
            }
            t => panic!("expected number, got {t:?}"),
        }
    }

    fn expr(&mut self) -> Val {
        let c = self.or();
        if self.eat("?") {
            let a = self.expr();
            self.expect(":");
            let b = self.expr();
            let w = a.w.max(b.w);
            let pick = if c.v != 0 { a } else { b };
            Val::new(pick.v, w)
        } else {
            c
        }
    }

    fn or(&mut self) -> Val {
        let mut a = self.and();
        while self.eat("|") {
            let b = self.and();
            a = Val::new(a.v | b.v, a.w.max(b.w));
        }
        a
    }

    fn and(&mut self) -> Val {
        let mut a = self.eq();
        while self.eat("&") {
            let b = self.eq();
            a = Val::new(a.v & b.v, a.w.max(b.w));
        }
        a
    }

    fn eq(&mut self) -> Val {
        let a = self.rel();
        if self.eat("==") {
            let b = self.rel();
            return Val::new(u128::from(a.v == b.v), 1);
        }
        a
    }

    fn rel(&mut self) -> Val {
        let a = self.add();
        for (op, gt) in [(">", true), ("<", false)] {
            if self.eat(op) {
                let b = self.add();
                let signed = a.signed && b.signed;
                let r = if signed {
                    (a.as_i128() > b.as_i128()) == gt && a.as_i128() != b.as_i128()
                } else {
                    (a.v > b.v) == gt && a.v != b.v
                };
                return Val::new(u128::from(r), 1);
            }
        }
        a
    }

    /// Sums are kept wide here and truncated by the assignment.
    fn add(&mut self) -> Val {
        let mut a = self.unary();
        loop {
            if self.eat("+") {
                let b = self.unary();
                a = Val::new(a.v.wrapping_add(b.v), 127);
            } else if self.eat("-") {
                let b = self.unary();
                a = Val::new(a.v.wrapping_sub(b.v), 127);
            } else {
                return a;
            }
        }
    }

    fn unary(&mut self) -> Val {
        if self.eat("|") {
            let a = self.unary();
            return Val::new(u128::from(a.v != 0), 1);
        }
        self.primary()
    }

    fn primary(&mut self) -> Val {
        if self.eat("(") {
            let v = self.expr();
            self.expect(")");
            return v;
        }
        if self.eat("{") {
            if let Some(Tok::Num { width: None, .. }) = self.peek() {
                let n = self.number() as u32;
                self.expect("{");
                let item = self.expr();
                self.expect("}");
                self.expect("}");
                let mut v = 0u128;
                for _ in 0..n {
                    v = v << item.w | item.v;
                }
                return Val::new(v, n * item.w);
            }
            let mut v = 0u128;
            let mut w = 0;
            loop {
                let item = self.expr();
                v = v << item.w | item.v;
                w += item.w;
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}");
            return Val::new(v, w);
        }
        match self.toks[self.pos].clone() {
            Tok::Num { width, value } => {
                self.pos += 1;
                Val::new(value, width.unwrap_or(32))
            }
            Tok::Ident(name) if name == "$signed" => {
                self.pos += 1;
                self.expect("(");
                let mut v = self.expr();
                self.expect(")");
                v.signed = true;
                v
            }
            Tok::Ident(name) => {
                self.pos += 1;
                let base = *self.env.get(&name).unwrap_or_else(|| panic!("undefined {name}"));
                if self.eat("[") {
                    let hi = self.number() as u32;
                    let lo = if self.eat(":") { self.number() as u32 } else { hi };
                    self.expect("]");
                    return Val::new(base.v >> lo, hi - lo + 1);
                }
                base
            }
            t => panic!("unexpected token {t:?}"),
        }
    }
}

/// Port widths and statements of a parsed module.
pub struct Module {
    toks: Vec<Tok>,
    body: usize,
    pub inputs: Vec<(String, u32)>,
    pub outputs: Vec<(String, u32)>,
}

impl Module {
    pub fn parse(src: &str) -> Module {
        let toks = tokenize(src);
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        let mut i = 0;
        while toks[i] != Tok::Sym(";") {
            if let Tok::Ident(dir) = &toks[i] {
                if dir == "input" || dir == "output" {
                    // dir wire [ hi : 0 ] name
                    let hi = match toks[i + 3] {
                        Tok::Num { value, .. } => value as u32,
                        _ => panic!("port without range"),
                    };
                    let Tok::Ident(name) = &toks[i + 7] else {
                        panic!("port name")
                    };
                    let port = (name.clone(), hi + 1);
                    if dir == "input" {
                        inputs.push(port);
                    } else {
                        outputs.push(port);
                    }
                    i += 8;
                    continue;
                }
            }
            i += 1;
        }
        Module {
            toks,
            body: i + 1,
            inputs,
            outputs,
        }
    }

    /// Evaluates the module for one assignment of the (single) input port.
    pub fn eval(&self, input: u128) -> HashMap<String, u128> {
        let mut env: HashMap<String, Val> = HashMap::new();
        let mut widths: HashMap<String, u32> = self.outputs.iter().cloned().collect();
        let (name, w) = &self.inputs[0];
        env.insert(name.clone(), Val::new(input, *w));
        let t = &self.toks;
        let mut i = self.body;
        loop {
            match &t[i] {
                Tok::Ident(k) if k == "endmodule" => break,
                Tok::Ident(k) if k == "wire" || k == "assign" => {
                    i += 1;
                    let mut width = 1;
                    if t[i] == Tok::Sym("[") {
                        let Tok::Num { value, .. } = t[i + 1] else {
                            panic!("range")
                        };
                        width = value as u32 + 1;
                        i += 5;
                    }
                    let Tok::Ident(name) = t[i].clone() else {
                        panic!("wire name")
                    };
                    if k == "assign" {
                        width = widths[&name];
                    }
                    widths.insert(name.clone(), width);
                    assert_eq!(t[i + 1], Tok::Sym("="));
                    let mut p = Parser {
                        toks: t,
                        pos: i + 2,
                        env: &env,
                    };
                    let v = p.expr();
                    p.expect(";");
                    i = p.pos;
                    env.insert(name, Val::new(v.v, width));
                }
                other => panic!("unexpected statement start {other:?}"),
            }
        }
        self.outputs.iter().map(|(n, _)| (n.clone(), env[n].v)).collect()
    }
}
