//! The universal first-order datum: symbols, integers and finite sequences.
//!
//! Sequences are persistent cons lists so that `car`/`cdr`/`cons` are O(1).
//! Every cell caches its length and a structural hash, which makes equality
//! checks on large program encodings cheap in the common (unequal) case.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use thiserror::Error;

/// An interned symbol. Two symbols with the same name share storage, so
/// equality is a pointer comparison.
#[derive(Clone)]
pub struct Symbol(Arc<str>);

fn interner() -> &'static Mutex<HashSet<Arc<str>>> {
    static INTERNER: OnceLock<Mutex<HashSet<Arc<str>>>> = OnceLock::new();
    INTERNER.get_or_init(|| Mutex::new(HashSet::new()))
}

impl Symbol {
    /// Interns `name`. The caller is responsible for it being a valid symbol
    /// name; use [`is_symbol_name`] to check untrusted input.
    pub fn new(name: &str) -> Symbol {
        let mut table = interner().lock().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = table.get(name) {
            return Symbol(existing.clone());
        }
        let arc: Arc<str> = Arc::from(name);
        table.insert(arc.clone());
        Symbol(arc)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Symbol) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(symbol_hash(self));
    }
}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Symbol) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Symbol) -> std::cmp::Ordering {
        self.0.cmp(&other.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(name: &str) -> Symbol {
        Symbol::new(name)
    }
}

fn is_symbol_start(c: char) -> bool {
    c.is_ascii_alphabetic() || "_+-*=<>?!.:".contains(c)
}

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_+-*=<>?!.:".contains(c)
}

fn looks_like_int(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// True if `name` is a well-formed symbol: it uses the symbol charset and
/// does not read as an integer.
pub fn is_symbol_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if is_symbol_start(c) => {}
        _ => return false,
    }
    chars.all(is_symbol_char) && !looks_like_int(name)
}

/// Arbitrary-precision integer with an inline fast path.
///
/// Invariant: `Big` only holds values outside the `i64` range, so the
/// derived equality is structural equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Int {
    Small(i64),
    Big(Arc<BigInt>),
}

impl Int {
    pub fn from_big(b: BigInt) -> Int {
        match b.to_i64() {
            Some(v) => Int::Small(v),
            None => Int::Big(Arc::new(b)),
        }
    }

    pub fn to_big(&self) -> BigInt {
        match self {
            Int::Small(v) => BigInt::from(*v),
            Int::Big(b) => (**b).clone(),
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Int::Small(v) => Some(*v),
            Int::Big(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Int::Small(0))
    }

    pub fn add(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_add(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() + other.to_big())
    }

    pub fn sub(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_sub(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() - other.to_big())
    }

    pub fn mul(&self, other: &Int) -> Int {
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_mul(*b) {
                return Int::Small(r);
            }
        }
        Int::from_big(self.to_big() * other.to_big())
    }

    /// Quotient truncated toward zero; `None` on division by zero.
    pub fn quotient(&self, other: &Int) -> Option<Int> {
        if other.is_zero() {
            return None;
        }
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_div(*b) {
                return Some(Int::Small(r));
            }
        }
        Some(Int::from_big(self.to_big() / other.to_big()))
    }

    /// Remainder with the sign of the dividend; `None` on division by zero.
    pub fn remainder(&self, other: &Int) -> Option<Int> {
        if other.is_zero() {
            return None;
        }
        if let (Int::Small(a), Int::Small(b)) = (self, other) {
            if let Some(r) = a.checked_rem(*b) {
                return Some(Int::Small(r));
            }
        }
        Some(Int::from_big(self.to_big() % other.to_big()))
    }

    pub fn less_than(&self, other: &Int) -> bool {
        match (self, other) {
            (Int::Small(a), Int::Small(b)) => a < b,
            _ => self.to_big() < other.to_big(),
        }
    }

    fn hash_code(&self) -> u64 {
        match self {
            Int::Small(v) => mix64(*v as u64 ^ 0x1f2e_3d4c_5b6a_7988),
            Int::Big(b) => {
                let mut h = 0x9e37_79b9_7f4a_7c15u64;
                for d in b.to_u64_digits().1 {
                    h = mix64(h ^ d);
                }
                if b.sign() == num_bigint::Sign::Minus {
                    h = mix64(!h);
                }
                h
            }
        }
    }
}

impl fmt::Display for Int {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Int::Small(v) => write!(f, "{v}"),
            Int::Big(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Debug for Int {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn symbol_hash(s: &Symbol) -> u64 {
    // Interned, so the address identifies the name within a process.
    mix64(Arc::as_ptr(&s.0) as *const u8 as usize as u64)
}

/// A persistent singly linked list of values.
#[derive(Clone, Default)]
pub struct List(Option<Arc<Cell>>);

struct Cell {
    head: Value,
    tail: List,
    len: usize,
    hash: u64,
}

const NIL_HASH: u64 = 0x6a09_e667_f3bc_c908;

impl List {
    pub fn nil() -> List {
        List(None)
    }

    pub fn cons(head: Value, tail: List) -> List {
        let hash = mix64(head.hash_code().rotate_left(17) ^ tail.hash_code().wrapping_mul(31));
        let len = tail.len() + 1;
        List(Some(Arc::new(Cell {
            head,
            tail,
            len,
            hash,
        })))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    pub fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |c| c.len)
    }

    pub fn head(&self) -> Option<&Value> {
        self.0.as_ref().map(|c| &c.head)
    }

    pub fn tail(&self) -> Option<&List> {
        self.0.as_ref().map(|c| &c.tail)
    }

    pub fn iter(&self) -> ListIter<'_> {
        ListIter { cur: self }
    }

    pub fn get(&self, index: usize) -> Option<&Value> {
        self.iter().nth(index)
    }

    fn hash_code(&self) -> u64 {
        self.0.as_ref().map_or(NIL_HASH, |c| c.hash)
    }

    fn ptr_eq(&self, other: &List) -> bool {
        match (&self.0, &other.0) {
            (Some(a), Some(b)) => Arc::ptr_eq(a, b),
            (None, None) => true,
            _ => false,
        }
    }
}

impl FromIterator<Value> for List {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> List {
        let items: Vec<Value> = iter.into_iter().collect();
        items
            .into_iter()
            .rev()
            .fold(List::nil(), |tail, head| List::cons(head, tail))
    }
}

impl Drop for List {
    fn drop(&mut self) {
        // Unlink the spine iteratively; long lists would otherwise recurse
        // once per cell.
        let mut cur = self.0.take();
        while let Some(cell) = cur {
            match Arc::try_unwrap(cell) {
                Ok(mut cell) => cur = cell.tail.0.take(),
                Err(_) => break,
            }
        }
    }
}

impl PartialEq for List {
    fn eq(&self, other: &List) -> bool {
        let (mut a, mut b) = (self, other);
        loop {
            if a.ptr_eq(b) {
                return true;
            }
            match (&a.0, &b.0) {
                (Some(x), Some(y)) => {
                    if x.hash != y.hash || x.len != y.len || x.head != y.head {
                        return false;
                    }
                    a = &x.tail;
                    b = &y.tail;
                }
                _ => return false,
            }
        }
    }
}

impl Eq for List {}

pub struct ListIter<'a> {
    cur: &'a List,
}

impl<'a> Iterator for ListIter<'a> {
    type Item = &'a Value;

    fn next(&mut self) -> Option<&'a Value> {
        let cell = self.cur.0.as_ref()?;
        self.cur = &cell.tail;
        Some(&cell.head)
    }
}

/// A datum: symbol, integer, or sequence.
#[derive(Clone, PartialEq, Eq)]
pub enum Value {
    Sym(Symbol),
    Int(Int),
    Seq(List),
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash_code());
    }
}

impl Value {
    pub fn sym(name: &str) -> Value {
        Value::Sym(Symbol::new(name))
    }

    pub fn int(v: i64) -> Value {
        Value::Int(Int::Small(v))
    }

    pub fn nil() -> Value {
        Value::Seq(List::nil())
    }

    pub fn list<I: IntoIterator<Item = Value>>(items: I) -> Value {
        Value::Seq(items.into_iter().collect())
    }

    pub fn bool(b: bool) -> Value {
        static BOOLS: OnceLock<(Symbol, Symbol)> = OnceLock::new();
        let (t, f) = BOOLS.get_or_init(|| (Symbol::new("true"), Symbol::new("false")));
        Value::Sym(if b { t.clone() } else { f.clone() })
    }

    /// Conditional truth: `false` and the empty sequence are false.
    pub fn is_truthy(&self) -> bool {
        match self {
            Value::Sym(s) => s.as_str() != "false",
            Value::Seq(l) => !l.is_empty(),
            Value::Int(_) => true,
        }
    }

    pub fn as_symbol(&self) -> Option<&Symbol> {
        match self {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&Int> {
        match self {
            Value::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&List> {
        match self {
            Value::Seq(l) => Some(l),
            _ => None,
        }
    }

    /// The items of a sequence, collected; `None` for atoms.
    pub fn items(&self) -> Option<Vec<&Value>> {
        self.as_list().map(|l| l.iter().collect())
    }

    pub fn is_symbol(&self, name: &str) -> bool {
        matches!(self, Value::Sym(s) if s.as_str() == name)
    }

    pub fn hash_code(&self) -> u64 {
        match self {
            Value::Sym(s) => symbol_hash(s),
            Value::Int(i) => i.hash_code(),
            Value::Seq(l) => l.hash_code(),
        }
    }
}

impl From<Symbol> for Value {
    fn from(s: Symbol) -> Value {
        Value::Sym(s)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Value {
        Value::int(v)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Sym(s) => f.write_str(s.as_str()),
            Value::Int(i) => write!(f, "{i}"),
            Value::Seq(l) => {
                f.write_str("(")?;
                for (i, item) in l.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Canonical text of a datum.
pub fn print_datum(v: &Value) -> String {
    v.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unexpected trailing input")]
    TrailingInput { line: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Atom(String),
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.char_indices().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    /// Next token with the position where it starts.
    fn next_token(&mut self) -> Result<Option<(Token, usize, usize)>, ParseError> {
        loop {
            match self.chars.peek() {
                None => return Ok(None),
                Some(&(_, c)) if c.is_whitespace() => {
                    self.bump();
                }
                Some(&(_, ';')) => {
                    while let Some(&(_, c)) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(_) => break,
            }
        }
        let (line, column) = (self.line, self.column);
        let c = self.bump().expect("peeked");
        let tok = match c {
            '(' => Token::Open,
            ')' => Token::Close,
            _ => {
                let mut s = String::new();
                s.push(c);
                while let Some(&(_, c)) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    self.bump();
                }
                Token::Atom(s)
            }
        };
        Ok(Some((tok, line, column)))
    }
}

fn atom_value(s: &str, line: usize, column: usize) -> Result<Value, ParseError> {
    if looks_like_int(s) {
        let v: BigInt = s.parse().map_err(|_| ParseError::Syntax {
            line,
            column,
            message: format!("bad integer `{s}`"),
        })?;
        return Ok(Value::Int(Int::from_big(v)));
    }
    if is_symbol_name(s) {
        return Ok(Value::sym(s));
    }
    Err(ParseError::Syntax {
        line,
        column,
        message: format!("invalid token `{s}`"),
    })
}

/// Parses exactly one datum from `text`.
pub fn parse_datum(text: &str) -> Result<Value, ParseError> {
    let mut lexer = Lexer::new(text);
    let mut stack: Vec<Vec<Value>> = Vec::new();
    let mut result = None;
    while let Some((tok, line, column)) = lexer.next_token()? {
        if result.is_some() {
            return Err(ParseError::TrailingInput { line, column });
        }
        let finished = match tok {
            Token::Open => {
                stack.push(Vec::new());
                None
            }
            Token::Close => match stack.pop() {
                Some(items) => Some(Value::list(items)),
                None => {
                    return Err(ParseError::Syntax {
                        line,
                        column,
                        message: "unbalanced `)`".into(),
                    })
                }
            },
            Token::Atom(s) => Some(atom_value(&s, line, column)?),
        };
        if let Some(v) = finished {
            match stack.last_mut() {
                Some(top) => top.push(v),
                None => result = Some(v),
            }
        }
    }
    match result {
        Some(v) if stack.is_empty() => Ok(v),
        _ => Err(ParseError::Syntax {
            line: lexer.line,
            column: lexer.column,
            message: if stack.is_empty() {
                "empty input".into()
            } else {
                "unexpected end of input".into()
            },
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integer() {
        assert_eq!(parse_datum("9").unwrap(), Value::int(9));
    }

    #[test]
    fn parses_pair() {
        assert_eq!(
            parse_datum("(3 2)").unwrap(),
            Value::list([Value::int(3), Value::int(2)])
        );
    }

    #[test]
    fn parses_nested() {
        let v = parse_datum("(pow (b e) ())").unwrap();
        assert_eq!(
            v,
            Value::list([
                Value::sym("pow"),
                Value::list([Value::sym("b"), Value::sym("e")]),
                Value::nil(),
            ])
        );
    }

    #[test]
    fn prints_canonically() {
        assert_eq!(print_datum(&Value::int(-4)), "-4");
        assert_eq!(print_datum(&Value::nil()), "()");
        assert_eq!(
            print_datum(&Value::list([Value::sym("e"), Value::int(2)])),
            "(e 2)"
        );
    }

    #[test]
    fn comments_and_whitespace() {
        let v = parse_datum("  ; leading\n ( a\n\t-3 ; inner\n )  ").unwrap();
        assert_eq!(v, Value::list([Value::sym("a"), Value::int(-3)]));
    }

    #[test]
    fn errors_carry_position() {
        match parse_datum("(a\n  b #)") {
            Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 5)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_datum("(a b"),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(parse_datum(")"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_datum(""), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn trailing_input_rejected() {
        assert_eq!(
            parse_datum("1 2"),
            Err(ParseError::TrailingInput { line: 1, column: 3 })
        );
    }

    #[test]
    fn big_integers_round_trip() {
        let text = "123456789012345678901234567890";
        let v = parse_datum(text).unwrap();
        assert!(matches!(v, Value::Int(Int::Big(_))));
        assert_eq!(print_datum(&v), text);
        // Values that fit are normalized to the inline form.
        let small = Int::from_big(BigInt::from(5));
        assert_eq!(small, Int::Small(5));
    }

    #[test]
    fn symbol_rules() {
        assert!(is_symbol_name("eq?"));
        assert!(is_symbol_name(":="));
        assert!(is_symbol_name("-"));
        assert!(is_symbol_name("l0"));
        assert!(!is_symbol_name("-12"));
        assert!(!is_symbol_name("0abc"));
        assert!(!is_symbol_name("a@b"));
        assert!(!is_symbol_name(""));
    }

    #[test]
    fn truthiness() {
        assert!(!Value::sym("false").is_truthy());
        assert!(!Value::nil().is_truthy());
        assert!(Value::sym("true").is_truthy());
        assert!(Value::int(0).is_truthy());
        assert!(Value::list([Value::nil()]).is_truthy());
    }

    #[test]
    fn long_lists_drop_without_overflow() {
        let mut l = List::nil();
        for i in 0..1_000_000 {
            l = List::cons(Value::int(i), l);
        }
        assert_eq!(l.len(), 1_000_000);
        drop(l);
    }

    #[test]
    fn shared_structure_equality() {
        let tail: List = (0..100).map(Value::int).collect();
        let a = Value::Seq(List::cons(Value::sym("x"), tail.clone()));
        let b = Value::Seq(List::cons(Value::sym("x"), tail));
        let c = Value::list(std::iter::once(Value::sym("x")).chain((0..100).map(Value::int)));
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a.hash_code(), c.hash_code());
    }
}
