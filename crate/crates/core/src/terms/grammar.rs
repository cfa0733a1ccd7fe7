//! Text notation for messages.
//!
//! ```text
//! agent   A<n> | I | S        nonce  N<n>     keys  PK<n> | SK<n>
//! base    G<n>                mask   BM<code>:<len> | BMNULL
//! pair    {m,m}               aenc   {m}k     senc  {|m|}k    sig  [m]k
//! modexp  m^m (left assoc)    wat    Wat(m,m) jam   Jam(m,m)  group (m)
//! ```
//!
//! The key of an encryption or signature extends as far right as possible,
//! so an encryption used as a modexp base or exponent is parenthesized.

use std::fmt;

use thiserror::Error;

use super::index::BoundedIndex;
use super::message::{AgentId, Bitmask, KeyId, Message, SemanticBounds};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at {position}: expected {expected}")]
pub struct ParseError {
    pub position: usize,
    pub expected: String,
}

pub fn render(m: &Message) -> String {
    m.to_string()
}

fn is_postfix_keyed(m: &Message) -> bool {
    matches!(m, Message::AEnc(..) | Message::SEnc(..) | Message::Sig(..))
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentId::Legit(i) => write!(f, "A{i}"),
            AgentId::Intruder => f.write_str("I"),
            AgentId::Server => f.write_str("S"),
        }
    }
}

impl fmt::Display for Bitmask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bitmask::Null => f.write_str("BMNULL"),
            Bitmask::Bm { code, length } => write!(f, "BM{code}:{length}"),
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Agent(a) => write!(f, "{a}"),
            Message::Nonce(n) => write!(f, "N{n}"),
            Message::Key(KeyId::Public(i)) => write!(f, "PK{i}"),
            Message::Key(KeyId::Private(i)) => write!(f, "SK{i}"),
            Message::ExpBase(g) => write!(f, "G{g}"),
            Message::Bitmask(b) => write!(f, "{b}"),
            Message::Pair(a, b) => write!(f, "{{{a},{b}}}"),
            Message::AEnc(m, k) => write!(f, "{{{m}}}{k}"),
            Message::SEnc(m, k) => write!(f, "{{|{m}|}}{k}"),
            Message::Sig(m, k) => write!(f, "[{m}]{k}"),
            Message::Wat(m, b) => write!(f, "Wat({m},{b})"),
            Message::Jam(m, b) => write!(f, "Jam({m},{b})"),
            Message::ModExp(b, e) => {
                if is_postfix_keyed(b) {
                    write!(f, "({b})")?;
                } else {
                    write!(f, "{b}")?;
                }
                if is_postfix_keyed(e) || matches!(e.as_ref(), Message::ModExp(..)) {
                    write!(f, "^({e})")
                } else {
                    write!(f, "^{e}")
                }
            }
        }
    }
}

/// Parses message text, attaching the index bounds from `bounds`.
pub fn parse(text: &str, bounds: &SemanticBounds) -> Result<Message, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0, bounds };
    let m = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.error("end of input"));
    }
    Ok(m)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    bounds: &'a SemanticBounds,
}

impl Parser<'_> {
    fn error(&self, expected: &str) -> ParseError {
        ParseError { position: self.pos, expected: expected.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(tok.as_bytes()) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(&format!("'{tok}'")))
        }
    }

    fn expr(&mut self) -> Result<Message, ParseError> {
        let mut left = self.operand()?;
        while self.eat("^") {
            let right = self.operand()?;
            left = Message::modexp(left, right);
        }
        Ok(left)
    }

    fn operand(&mut self) -> Result<Message, ParseError> {
        if self.eat("(") {
            let m = self.expr()?;
            self.expect(")")?;
            return Ok(m);
        }
        if self.eat("{|") {
            let m = self.expr()?;
            self.expect("|}")?;
            let k = self.expr()?;
            return Ok(Message::senc(m, k));
        }
        if self.eat("{") {
            let a = self.expr()?;
            if self.eat(",") {
                let b = self.expr()?;
                self.expect("}")?;
                return Ok(Message::pair(a, b));
            }
            self.expect("}")?;
            let k = self.expr()?;
            return Ok(Message::aenc(a, k));
        }
        if self.eat("[") {
            let m = self.expr()?;
            self.expect("]")?;
            let k = self.expr()?;
            return Ok(Message::sig(m, k));
        }
        self.atom()
    }

    fn ident(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default()
    }

    fn number(&mut self, bound: usize, what: &str) -> Result<BoundedIndex, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        let value: usize =
            digits.parse().map_err(|_| ParseError { position: start, expected: format!("{what} number") })?;
        BoundedIndex::new(value, bound)
            .map_err(|_| ParseError { position: start, expected: format!("{what} index below {bound}") })
    }

    fn atom(&mut self) -> Result<Message, ParseError> {
        let start = self.pos;
        let word = self.ident().to_string();
        let b = *self.bounds;
        match word.as_str() {
            "Wat" | "Jam" => {
                self.expect("(")?;
                let m = self.expr()?;
                self.expect(",")?;
                let mask = self.expr()?;
                self.expect(")")?;
                Ok(if word == "Wat" { Message::wat(m, mask) } else { Message::jam(m, mask) })
            }
            "I" => Ok(Message::Agent(AgentId::Intruder)),
            "S" => Ok(Message::Agent(AgentId::Server)),
            "BMNULL" => Ok(Message::Bitmask(Bitmask::Null)),
            "A" => Ok(Message::Agent(AgentId::Legit(self.number(b.agents, "agent")?))),
            "N" => Ok(Message::Nonce(self.number(b.nonces, "nonce")?)),
            "PK" => Ok(Message::Key(KeyId::Public(self.number(b.pub_keys, "public key")?))),
            "SK" => Ok(Message::Key(KeyId::Private(self.number(b.priv_keys, "private key")?))),
            "G" => Ok(Message::ExpBase(self.number(b.exp_bases, "base")?)),
            "BM" => {
                let code = self.number(b.bitmask_codes, "bitmask code")?;
                if !self.src[self.pos..].starts_with(b":") {
                    return Err(self.error("':'"));
                }
                self.pos += 1;
                let length = self.number(b.bitmask_max_len, "bitmask length")?;
                Ok(Message::Bitmask(Bitmask::Bm { code, length }))
            }
            _ => {
                self.pos = start;
                Err(self.error("message"))
            }
        }
    }
}

/// Parses an agent token (`A<n>`, `I` or `S`).
pub fn parse_agent(text: &str, bounds: &SemanticBounds) -> Result<AgentId, ParseError> {
    match parse(text, bounds)? {
        Message::Agent(a) => Ok(a),
        _ => Err(ParseError { position: 0, expected: "agent".into() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::index::mk_index;

    fn bounds() -> SemanticBounds {
        SemanticBounds {
            agents: 2,
            nonces: 4,
            pub_keys: 3,
            priv_keys: 3,
            exp_bases: 1,
            bitmask_codes: 3,
            bitmask_max_len: 2,
        }
    }

    fn bm(code: usize, len: usize) -> Message {
        Message::Bitmask(Bitmask::Bm { code: mk_index(code, 3).unwrap(), length: mk_index(len, 2).unwrap() })
    }

    #[test]
    fn renders_fixed_examples() {
        let n0 = Message::Nonce(mk_index(0, 4).unwrap());
        let a0 = Message::Agent(AgentId::Legit(mk_index(0, 2).unwrap()));
        let w = Message::wat(Message::pair(n0, a0), bm(0, 1));
        assert_eq!(render(&w), "Wat({N0,A0},BM0:1)");
        assert_eq!(render(&Message::Agent(AgentId::Intruder)), "I");
        let enc = Message::aenc(
            Message::Nonce(mk_index(1, 4).unwrap()),
            Message::Key(KeyId::Public(mk_index(1, 3).unwrap())),
        );
        assert_eq!(render(&enc), "{N1}PK1");
        assert_eq!(render(&Message::null_mask()), "BMNULL");
    }

    #[test]
    fn parses_examples() {
        let b = bounds();
        let w = parse("Wat({N0,A0},BM0:1)", &b).unwrap();
        assert_eq!(render(&w), "Wat({N0,A0},BM0:1)");
        let j = parse("Jam(Wat(N0,BM0:1),BM1:1)", &b).unwrap();
        assert!(matches!(j, Message::Jam(ref p, _) if matches!(p.as_ref(), Message::Wat(..))));
        let err = parse("Wat(N0", &b).unwrap_err();
        assert_eq!(err.position, 6);
    }

    #[test]
    fn modexp_and_keys() {
        let b = bounds();
        let m = parse("{|N3|}G0^N0^N1", &b).unwrap();
        match &m {
            Message::SEnc(_, k) => assert_eq!(render(k), "G0^N0^N1"),
            other => panic!("unexpected {other:?}"),
        }
        let base = parse("({N1}PK1)^N0", &b).unwrap();
        assert!(matches!(base, Message::ModExp(..)));
        assert_eq!(render(&base), "({N1}PK1)^N0");
        let right = parse("G0^(N0^N1)", &b).unwrap();
        assert_eq!(render(&right), "G0^(N0^N1)");
    }

    #[test]
    fn rejects_out_of_bounds_and_garbage() {
        let b = bounds();
        assert!(parse("N4", &b).is_err());
        assert!(parse("BM0", &b).is_err());
        assert!(parse("Q1", &b).is_err());
        assert!(parse("{N0,N1", &b).is_err());
        assert!(parse("N0 N1", &b).is_err());
    }
}
