//! The `.wgq` netlist format.
//!
//! One statement per line (`;` also ends a statement, `#` starts a comment),
//! a keyword followed by `key=value` arguments:
//!
//! ```text
//! circuit z
//! emitters 1
//! modes 1 2
//! input mode=1 pol=H emitters=+
//! scatter in=1 emitter=0 out=2 sink=D'1
//! detect D1=(2,V) D2=(2,H)
//! feedforward D1=I D2=Z
//! ```
//!
//! | statement | arguments |
//! |---|---|
//! | `circuit` | name |
//! | `emitters` | count |
//! | `modes` | mode numbers, in declaration order (may repeat) |
//! | `input` | `mode=` `pol=H\|V` `emitters=+-…` (default: first mode, H, all `+`) |
//! | `hwp` | `mode=` `theta=` degrees |
//! | `pbs` | `(m,P)->o` routes; unrouted slots are untouched |
//! | `mirror` | `in=` `out=` |
//! | `bs`, `bsprime` | `a=` `b=` `[out=u,l]` |
//! | `vbs` | `a=` `b=` `k=` `n=` `[out=u,l]` |
//! | `mixer` | `a=` `b=` `u00=re,im` `u01=` `u10=` `u11=` `[out=u,l]` |
//! | `atten` | `mode=` `c=re,im\|rnom^j` `sink=` |
//! | `scatter` | `in=` `emitter=` (0-based) `out=` `sink=` |
//! | `detect` | `ID=(m,P)` … |
//! | `feedforward` | `ID=IZ…` (one letter per emitter) |
//!
//! The header (`circuit`, `emitters`, `modes`, `input`) precedes the
//! components. `detect` must be the last component.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::circuit::{Circuit, Coefficient, Component, Correction, MixerKind, PhotonInput};
use crate::error::{Error, Result};
use crate::scatter::PolarizationMatrix;
use crate::state::{DetectorId, PmLabel, Polarization, SinkId, SpatialMode, MAX_EMITTERS};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical(String),
    UnknownComponent(String),
    MissingArgument(String),
    UnexpectedArgument(String),
    UndeclaredMode(u32),
    DuplicateSink(String),
    InvalidValue(String),
    Structure(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Lexical(m) => write!(f, "lexical error: {m}"),
            ParseErrorKind::UnknownComponent(k) => write!(f, "unknown component `{k}`"),
            ParseErrorKind::MissingArgument(m) => write!(f, "missing argument: {m}"),
            ParseErrorKind::UnexpectedArgument(m) => write!(f, "unexpected argument: {m}"),
            ParseErrorKind::UndeclaredMode(m) => write!(f, "mode {m} is not declared"),
            ParseErrorKind::DuplicateSink(s) => write!(f, "sink `{s}` is declared twice"),
            ParseErrorKind::InvalidValue(m) => write!(f, "invalid value: {m}"),
            ParseErrorKind::Structure(m) => write!(f, "{m}"),
        }
    }
}

/// Parse failure with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn err<T>(self, kind: ParseErrorKind) -> std::result::Result<T, ParseError> {
        Err(ParseError {
            line: self.line,
            column: self.column,
            kind,
        })
    }
}

type PResult<T> = std::result::Result<T, ParseError>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Eq,
    LParen,
    RParen,
    Comma,
    Arrow,
}

/// Splits the text into statements of positioned tokens.
fn lex(text: &str) -> PResult<Vec<Vec<(Tok, Pos)>>> {
    let mut statements = vec![Vec::new()];
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let pos = Pos {
                line: li + 1,
                column: i + 1,
            };
            let single = match c {
                '#' => break,
                ';' => {
                    statements.push(Vec::new());
                    i += 1;
                    continue;
                }
                c if c.is_whitespace() => {
                    i += 1;
                    continue;
                }
                '=' => Some(Tok::Eq),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                ',' => Some(Tok::Comma),
                '-' if chars.get(i + 1) == Some(&'>') => {
                    statements.last_mut().unwrap().push((Tok::Arrow, pos));
                    i += 2;
                    continue;
                }
                '>' => return pos.err(ParseErrorKind::Lexical("stray `>`".into())),
                c if c.is_control() => {
                    return pos.err(ParseErrorKind::Lexical(format!("unexpected character {c:?}")));
                }
                _ => None,
            };
            if let Some(tok) = single {
                statements.last_mut().unwrap().push((tok, pos));
                i += 1;
                continue;
            }
            let start = i;
            while i < chars.len() {
                let c = chars[i];
                let ends = c.is_whitespace()
                    || c.is_control()
                    || "=(),;#>".contains(c)
                    || (c == '-' && chars.get(i + 1) == Some(&'>'));
                if ends {
                    break;
                }
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            statements.last_mut().unwrap().push((Tok::Word(word), pos));
        }
        statements.push(Vec::new());
    }
    Ok(statements.into_iter().filter(|s| !s.is_empty()).collect())
}

#[derive(Debug, Clone)]
struct Word {
    text: String,
    pos: Pos,
}

#[derive(Debug, Clone)]
enum Value {
    /// `a` or `a,b,…`
    List(Vec<Word>),
    /// `(a,b,…)`
    Tuple(Vec<Word>),
}

#[derive(Debug, Clone)]
enum Arg {
    Positional(Word),
    Keyed { key: Word, value: Value },
    Route { from: Vec<Word>, to: Word, pos: Pos },
}

impl Arg {
    fn pos(&self) -> Pos {
        match self {
            Arg::Positional(w) => w.pos,
            Arg::Keyed { key, .. } => key.pos,
            Arg::Route { pos, .. } => *pos,
        }
    }
}

struct Cursor<'a> {
    toks: &'a [(Tok, Pos)],
    i: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.0)
    }

    fn end_pos(&self) -> Pos {
        let (_, p) = self.toks.last().expect("statements are non-empty");
        Pos {
            line: p.line,
            column: p.column + 1,
        }
    }

    fn next(&mut self) -> Option<(Tok, Pos)> {
        let t = self.toks.get(self.i).cloned();
        self.i += 1;
        t
    }

    fn word(&mut self, what: &str) -> PResult<Word> {
        match self.next() {
            Some((Tok::Word(text), pos)) => Ok(Word { text, pos }),
            Some((_, pos)) => pos.err(ParseErrorKind::Lexical(format!("expected {what}"))),
            None => self.end_pos().err(ParseErrorKind::MissingArgument(what.into())),
        }
    }

    fn tuple(&mut self) -> PResult<Vec<Word>> {
        let mut items = vec![self.word("tuple element")?];
        loop {
            match self.next() {
                Some((Tok::Comma, _)) => items.push(self.word("tuple element")?),
                Some((Tok::RParen, _)) => return Ok(items),
                Some((_, pos)) => return pos.err(ParseErrorKind::Lexical("expected `,` or `)`".into())),
                None => return self.end_pos().err(ParseErrorKind::Lexical("unclosed `(`".into())),
            }
        }
    }

    fn arg(&mut self) -> PResult<Arg> {
        let (tok, pos) = self.next().expect("caller checked");
        match tok {
            Tok::LParen => {
                let from = self.tuple()?;
                match self.next() {
                    Some((Tok::Arrow, _)) => Ok(Arg::Route {
                        from,
                        to: self.word("route target")?,
                        pos,
                    }),
                    Some((_, p)) => p.err(ParseErrorKind::Lexical("expected `->`".into())),
                    None => self.end_pos().err(ParseErrorKind::Lexical("expected `->`".into())),
                }
            }
            Tok::Word(text) => {
                let word = Word { text, pos };
                if self.peek() != Some(&Tok::Eq) {
                    return Ok(Arg::Positional(word));
                }
                self.i += 1;
                let value = if self.peek() == Some(&Tok::LParen) {
                    self.i += 1;
                    Value::Tuple(self.tuple()?)
                } else {
                    let mut items = vec![self.word("value")?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.i += 1;
                        items.push(self.word("value")?);
                    }
                    Value::List(items)
                };
                Ok(Arg::Keyed { key: word, value })
            }
            _ => pos.err(ParseErrorKind::Lexical("unexpected punctuation".into())),
        }
    }
}

struct Statement {
    keyword: Word,
    args: Vec<Arg>,
}

impl Statement {
    fn from_tokens(toks: &[(Tok, Pos)]) -> PResult<Self> {
        let mut cur = Cursor { toks, i: 0 };
        let keyword = cur.word("statement keyword")?;
        let mut args = Vec::new();
        while cur.peek().is_some() {
            args.push(cur.arg()?);
        }
        Ok(Statement { keyword, args })
    }

    fn positional(&self) -> PResult<Vec<Word>> {
        self.args
            .iter()
            .map(|a| match a {
                Arg::Positional(w) => Ok(w.clone()),
                other => other.pos().err(ParseErrorKind::UnexpectedArgument(format!(
                    "`{}` takes plain values",
                    self.keyword.text
                ))),
            })
            .collect()
    }

    /// Keyed arguments, checked against the allowed keys.
    fn keyed(&self, required: &[&str], optional: &[&str]) -> PResult<BTreeMap<String, (Word, Value)>> {
        let mut map = BTreeMap::new();
        for a in &self.args {
            let Arg::Keyed { key, value } = a else {
                return a.pos().err(ParseErrorKind::UnexpectedArgument(format!(
                    "`{}` takes key=value arguments",
                    self.keyword.text
                )));
            };
            if !required.contains(&key.text.as_str()) && !optional.contains(&key.text.as_str()) {
                return key.pos.err(ParseErrorKind::UnexpectedArgument(format!(
                    "`{}` has no argument `{}`",
                    self.keyword.text, key.text
                )));
            }
            if map.insert(key.text.clone(), (key.clone(), value.clone())).is_some() {
                return key.pos.err(ParseErrorKind::UnexpectedArgument(format!(
                    "`{}` given twice",
                    key.text
                )));
            }
        }
        for r in required {
            if !map.contains_key(*r) {
                return self.keyword.pos.err(ParseErrorKind::MissingArgument(format!(
                    "`{}` needs `{r}=`",
                    self.keyword.text
                )));
            }
        }
        Ok(map)
    }
}

fn single<'a>(key: &Word, value: &'a Value) -> PResult<&'a Word> {
    match value {
        Value::List(items) if items.len() == 1 => Ok(&items[0]),
        _ => key.pos.err(ParseErrorKind::InvalidValue(format!(
            "`{}` takes a single value",
            key.text
        ))),
    }
}

fn number<T: std::str::FromStr>(w: &Word, what: &str) -> PResult<T> {
    w.text.parse().or_else(|_| {
        w.pos.err(ParseErrorKind::InvalidValue(format!(
            "`{}` is not a valid {what}",
            w.text
        )))
    })
}

fn finite(w: &Word) -> PResult<f64> {
    let x: f64 = number(w, "number")?;
    if x.is_finite() {
        Ok(x)
    } else {
        w.pos
            .err(ParseErrorKind::InvalidValue(format!("`{}` is not finite", w.text)))
    }
}

fn polarization(w: &Word) -> PResult<Polarization> {
    match w.text.as_str() {
        "H" | "h" => Ok(Polarization::H),
        "V" | "v" => Ok(Polarization::V),
        _ => w.pos.err(ParseErrorKind::InvalidValue(format!(
            "`{}` is not a polarization (H or V)",
            w.text
        ))),
    }
}

fn complex(key: &Word, value: &Value) -> PResult<Complex64> {
    match value {
        Value::List(items) if items.len() == 2 => Ok(Complex64::new(finite(&items[0])?, finite(&items[1])?)),
        Value::List(items) if items.len() == 1 => Ok(Complex64::new(finite(&items[0])?, 0.0)),
        _ => key
            .pos
            .err(ParseErrorKind::InvalidValue(format!("`{}` expects re,im", key.text))),
    }
}

fn ident(w: &Word) -> PResult<String> {
    if w.text.chars().any(|c| c == '+' || c == '^') {
        return w.pos.err(ParseErrorKind::InvalidValue(format!(
            "`{}` is not a valid identifier",
            w.text
        )));
    }
    Ok(w.text.clone())
}

#[derive(Default)]
struct Builder {
    name: Option<String>,
    n: Option<usize>,
    modes: Vec<SpatialMode>,
    declared: BTreeSet<SpatialMode>,
    input: Option<PhotonInput>,
    components: Vec<Component>,
    sinks: BTreeSet<SinkId>,
    feedforward: BTreeMap<DetectorId, Vec<Correction>>,
    feedforward_pos: BTreeMap<DetectorId, Pos>,
    detect_pos: Option<Pos>,
}

impl Builder {
    fn mode(&self, w: &Word) -> PResult<SpatialMode> {
        let m = SpatialMode(number(w, "mode number")?);
        if !self.declared.contains(&m) {
            return w.pos.err(ParseErrorKind::UndeclaredMode(m.0));
        }
        Ok(m)
    }

    fn keyed_mode(&self, args: &BTreeMap<String, (Word, Value)>, key: &str) -> PResult<SpatialMode> {
        let (k, v) = &args[key];
        self.mode(single(k, v)?)
    }

    fn out_pair(
        &self,
        args: &BTreeMap<String, (Word, Value)>,
        a: SpatialMode,
        b: SpatialMode,
    ) -> PResult<(SpatialMode, SpatialMode)> {
        match args.get("out") {
            None => Ok((a, b)),
            Some((k, Value::List(items))) if items.len() == 2 => Ok((self.mode(&items[0])?, self.mode(&items[1])?)),
            Some((k, _)) => k
                .pos
                .err(ParseErrorKind::InvalidValue("`out` expects two modes u,l".into())),
        }
    }

    fn emitters(&self, kw: &Word) -> PResult<usize> {
        self.n.ok_or(()).or_else(|_| {
            kw.pos
                .err(ParseErrorKind::Structure("`emitters` must be declared first".into()))
        })
    }

    fn header_done(&self, kw: &Word) -> PResult<usize> {
        let n = self.emitters(kw)?;
        if self.modes.is_empty() {
            return kw.pos.err(ParseErrorKind::Structure(
                "`modes` must be declared before components".into(),
            ));
        }
        if self.detect_pos.is_some() {
            return kw
                .pos
                .err(ParseErrorKind::Structure("`detect` must be the last component".into()));
        }
        Ok(n)
    }

    fn sink(&mut self, args: &BTreeMap<String, (Word, Value)>) -> PResult<SinkId> {
        let (k, v) = &args["sink"];
        let w = single(k, v)?;
        let sink = SinkId::new(ident(w)?);
        if !self.sinks.insert(sink.clone()) {
            return w.pos.err(ParseErrorKind::DuplicateSink(w.text.clone()));
        }
        Ok(sink)
    }

    fn statement(&mut self, st: &Statement) -> PResult<()> {
        let kw = &st.keyword;
        match kw.text.as_str() {
            "circuit" => {
                let args = st.positional()?;
                if self.name.is_some() {
                    return kw.pos.err(ParseErrorKind::Structure("`circuit` given twice".into()));
                }
                match args.as_slice() {
                    [name] => self.name = Some(ident(name)?),
                    [] => return kw.pos.err(ParseErrorKind::MissingArgument("circuit name".into())),
                    [_, extra, ..] => {
                        return extra
                            .pos
                            .err(ParseErrorKind::UnexpectedArgument("circuit takes one name".into()))
                    }
                }
            }
            "emitters" => {
                let args = st.positional()?;
                if self.n.is_some() {
                    return kw.pos.err(ParseErrorKind::Structure("`emitters` given twice".into()));
                }
                let w = match args.as_slice() {
                    [w] => w,
                    [] => return kw.pos.err(ParseErrorKind::MissingArgument("emitter count".into())),
                    [_, extra, ..] => {
                        return extra
                            .pos
                            .err(ParseErrorKind::UnexpectedArgument("emitters takes one count".into()))
                    }
                };
                let n: usize = number(w, "emitter count")?;
                if !(1..=MAX_EMITTERS).contains(&n) {
                    return w.pos.err(ParseErrorKind::InvalidValue(format!(
                        "emitter count must be in 1..={MAX_EMITTERS}"
                    )));
                }
                self.n = Some(n);
            }
            "modes" => {
                let args = st.positional()?;
                if args.is_empty() {
                    return kw.pos.err(ParseErrorKind::MissingArgument("at least one mode".into()));
                }
                if !self.components.is_empty() {
                    return kw.pos.err(ParseErrorKind::Structure(
                        "modes must be declared before components".into(),
                    ));
                }
                for w in &args {
                    let m = SpatialMode(number(w, "mode number")?);
                    if !self.declared.insert(m) {
                        return w
                            .pos
                            .err(ParseErrorKind::InvalidValue(format!("mode {} declared twice", m.0)));
                    }
                    self.modes.push(m);
                }
            }
            "input" => {
                let n = self.emitters(kw)?;
                if self.input.is_some() || !self.components.is_empty() {
                    return kw.pos.err(ParseErrorKind::Structure(
                        "`input` must appear once, before components".into(),
                    ));
                }
                let args = st.keyed(&["mode", "pol", "emitters"], &[])?;
                let mode = self.keyed_mode(&args, "mode")?;
                let (k, v) = &args["pol"];
                let pol = polarization(single(k, v)?)?;
                let (k, v) = &args["emitters"];
                let w = single(k, v)?;
                let emitters = w
                    .text
                    .chars()
                    .map(PmLabel::from_symbol)
                    .collect::<Option<Vec<_>>>()
                    .filter(|l| l.len() == n)
                    .ok_or(())
                    .or_else(|_| {
                        w.pos.err(ParseErrorKind::InvalidValue(format!(
                            "expected {n} labels from + and -"
                        )))
                    })?;
                self.input = Some(PhotonInput { mode, pol, emitters });
            }
            "hwp" => {
                self.header_done(kw)?;
                let args = st.keyed(&["mode", "theta"], &[])?;
                let mode = self.keyed_mode(&args, "mode")?;
                let (k, v) = &args["theta"];
                let theta = finite(single(k, v)?)?;
                self.components.push(Component::Hwp { mode, theta });
            }
            "pbs" => {
                self.header_done(kw)?;
                let mut routing = BTreeMap::new();
                for a in &st.args {
                    let Arg::Route { from, to, pos } = a else {
                        return a.pos().err(ParseErrorKind::UnexpectedArgument(
                            "pbs takes (mode,pol)->mode routes".into(),
                        ));
                    };
                    let [m, p] = from.as_slice() else {
                        return pos.err(ParseErrorKind::InvalidValue("route source must be (mode,pol)".into()));
                    };
                    let key = (self.mode(m)?, polarization(p)?);
                    if routing.insert(key, self.mode(to)?).is_some() {
                        return pos.err(ParseErrorKind::InvalidValue("slot routed twice".into()));
                    }
                }
                if routing.is_empty() {
                    return kw
                        .pos
                        .err(ParseErrorKind::MissingArgument("pbs needs at least one route".into()));
                }
                self.components.push(Component::Pbs { routing });
            }
            "mirror" => {
                self.header_done(kw)?;
                let args = st.keyed(&["in", "out"], &[])?;
                let from = self.keyed_mode(&args, "in")?;
                let to = self.keyed_mode(&args, "out")?;
                self.components.push(Component::Mirror { from, to });
            }
            "bs" | "bsprime" | "vbs" | "mixer" => {
                self.header_done(kw)?;
                let required: &[&str] = match kw.text.as_str() {
                    "vbs" => &["a", "b", "k", "n"],
                    "mixer" => &["a", "b", "u00", "u01", "u10", "u11"],
                    _ => &["a", "b"],
                };
                let args = st.keyed(required, &["out"])?;
                let a = self.keyed_mode(&args, "a")?;
                let b = self.keyed_mode(&args, "b")?;
                let out = self.out_pair(&args, a, b)?;
                let kind = match kw.text.as_str() {
                    "bs" => MixerKind::Bs,
                    "bsprime" => MixerKind::BsPrime,
                    "vbs" => {
                        let (k, v) = &args["k"];
                        let kw_k = single(k, v)?;
                        let stage: usize = number(kw_k, "stage")?;
                        let (k, v) = &args["n"];
                        let n: usize = number(single(k, v)?, "emitter count")?;
                        if stage < 1 || stage > n {
                            return kw_k.pos.err(ParseErrorKind::InvalidValue(format!(
                                "stage {stage} out of range 1..={n}"
                            )));
                        }
                        MixerKind::Vbs { k: stage, n }
                    }
                    _ => {
                        let entry = |name: &str| {
                            let (k, v) = &args[name];
                            complex(k, v)
                        };
                        MixerKind::Custom(PolarizationMatrix([
                            [entry("u00")?, entry("u01")?],
                            [entry("u10")?, entry("u11")?],
                        ]))
                    }
                };
                self.components.push(Component::Mixer { a, b, out, kind });
            }
            "atten" => {
                self.header_done(kw)?;
                let args = st.keyed(&["mode", "c", "sink"], &[])?;
                let mode = self.keyed_mode(&args, "mode")?;
                let (k, v) = &args["c"];
                let coefficient = match v {
                    Value::List(items) if items.len() == 1 && items[0].text.starts_with("rnom^") => {
                        let w = &items[0];
                        let j = w.text["rnom^".len()..].parse::<u32>().or_else(|_| {
                            w.pos
                                .err(ParseErrorKind::InvalidValue(format!("bad exponent in `{}`", w.text)))
                        })?;
                        Coefficient::RNomPow(j)
                    }
                    _ => Coefficient::Fixed(complex(k, v)?),
                };
                let sink = self.sink(&args)?;
                self.components.push(Component::Attenuator {
                    mode,
                    coefficient,
                    sink,
                });
            }
            "scatter" => {
                let n = self.header_done(kw)?;
                let args = st.keyed(&["in", "emitter", "out", "sink"], &[])?;
                let in_mode = self.keyed_mode(&args, "in")?;
                let (k, v) = &args["emitter"];
                let w = single(k, v)?;
                let emitter: usize = number(w, "emitter index")?;
                if emitter >= n {
                    return w.pos.err(ParseErrorKind::InvalidValue(format!(
                        "emitter {emitter} out of range 0..{n}"
                    )));
                }
                let reflected_out = self.keyed_mode(&args, "out")?;
                let sink = self.sink(&args)?;
                self.components.push(Component::EmitterScatter {
                    in_mode,
                    emitter,
                    reflected_out,
                    sink,
                });
            }
            "detect" => {
                self.header_done(kw)?;
                let mut detectors = BTreeMap::new();
                let mut ids = BTreeSet::new();
                for a in &st.args {
                    let Arg::Keyed {
                        key,
                        value: Value::Tuple(slot),
                    } = a
                    else {
                        return a
                            .pos()
                            .err(ParseErrorKind::UnexpectedArgument("detect takes ID=(mode,pol)".into()));
                    };
                    let [m, p] = slot.as_slice() else {
                        return key
                            .pos
                            .err(ParseErrorKind::InvalidValue("detector slot must be (mode,pol)".into()));
                    };
                    let id = DetectorId::new(ident(key)?);
                    if !ids.insert(id.clone()) {
                        return key
                            .pos
                            .err(ParseErrorKind::InvalidValue(format!("detector {id} declared twice")));
                    }
                    if detectors.insert((self.mode(m)?, polarization(p)?), id).is_some() {
                        return key
                            .pos
                            .err(ParseErrorKind::InvalidValue("slot has two detectors".into()));
                    }
                }
                if detectors.is_empty() {
                    return kw.pos.err(ParseErrorKind::MissingArgument(
                        "detect needs at least one detector".into(),
                    ));
                }
                self.detect_pos = Some(kw.pos);
                self.components.push(Component::DetectorBank { detectors });
            }
            "feedforward" => {
                let n = self.emitters(kw)?;
                for a in &st.args {
                    let Arg::Keyed { key, value } = a else {
                        return a
                            .pos()
                            .err(ParseErrorKind::UnexpectedArgument("feedforward takes ID=IZ…".into()));
                    };
                    let w = single(key, value)?;
                    let rule = w
                        .text
                        .chars()
                        .map(Correction::from_symbol)
                        .collect::<Option<Vec<_>>>()
                        .filter(|r| r.len() == n)
                        .ok_or(())
                        .or_else(|_| {
                            w.pos.err(ParseErrorKind::InvalidValue(format!(
                                "expected {n} letters from I and Z"
                            )))
                        })?;
                    let id = DetectorId::new(ident(key)?);
                    if self.feedforward.insert(id.clone(), rule).is_some() {
                        return key.pos.err(ParseErrorKind::InvalidValue(format!(
                            "feedforward for {id} given twice"
                        )));
                    }
                    self.feedforward_pos.insert(id, key.pos);
                }
            }
            other => return kw.pos.err(ParseErrorKind::UnknownComponent(other.to_string())),
        }
        Ok(())
    }

    fn finish(self, end: Pos) -> PResult<Circuit> {
        let Some(name) = self.name else {
            return end.err(ParseErrorKind::Structure("missing `circuit` statement".into()));
        };
        let Some(n) = self.n else {
            return end.err(ParseErrorKind::Structure("missing `emitters` statement".into()));
        };
        let Some(detect_pos) = self.detect_pos else {
            return end.err(ParseErrorKind::Structure("missing `detect` statement".into()));
        };
        let bank = self.components.last();
        if let Some(Component::DetectorBank { detectors }) = bank {
            let ids: BTreeSet<_> = detectors.values().collect();
            for (id, pos) in &self.feedforward_pos {
                if !ids.contains(id) {
                    return pos.err(ParseErrorKind::InvalidValue(format!(
                        "feedforward names unknown detector {id}"
                    )));
                }
            }
        }
        let input = self.input.unwrap_or_else(|| PhotonInput {
            mode: self.modes[0],
            pol: Polarization::H,
            emitters: vec![PmLabel::Plus; n],
        });
        let circuit = Circuit {
            name,
            n_emitters: n,
            modes: self.modes,
            input,
            components: self.components,
            feedforward: self.feedforward,
        };
        circuit
            .validate()
            .or_else(|e| detect_pos.err(ParseErrorKind::Structure(e.to_string())))?;
        Ok(circuit)
    }
}

/// Parses a `.wgq` document into a validated circuit.
pub fn parse(text: &str) -> Result<Circuit> {
    parse_document(text).map_err(Error::from)
}

fn parse_document(text: &str) -> PResult<Circuit> {
    let statements = lex(text)?;
    let mut builder = Builder::default();
    let mut end = Pos { line: 1, column: 1 };
    for toks in &statements {
        let st = Statement::from_tokens(toks)?;
        end = st.keyword.pos;
        builder.statement(&st)?;
    }
    builder.finish(end)
}

fn complex_text(c: Complex64) -> String {
    format!("{},{}", c.re, c.im)
}

/// Canonical text form; `parse(&serialize(c))` reproduces `c`.
pub fn serialize(circuit: &Circuit) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "circuit {}", circuit.name);
    let _ = writeln!(out, "emitters {}", circuit.n_emitters);
    let modes: Vec<String> = circuit.modes.iter().map(|m| m.to_string()).collect();
    let _ = writeln!(out, "modes {}", modes.join(" "));
    let labels: String = circuit.input.emitters.iter().map(|l| l.symbol()).collect();
    let _ = writeln!(
        out,
        "input mode={} pol={} emitters={labels}",
        circuit.input.mode, circuit.input.pol
    );
    for c in &circuit.components {
        match c {
            Component::Pbs { routing } => {
                out.push_str("pbs");
                for ((m, p), o) in routing {
                    let _ = write!(out, " ({m},{p})->{o}");
                }
                out.push('\n');
            }
            Component::Mixer {
                a,
                b,
                out: (u, l),
                kind,
            } => {
                let _ = match kind {
                    MixerKind::Bs => write!(out, "bs a={a} b={b}"),
                    MixerKind::BsPrime => write!(out, "bsprime a={a} b={b}"),
                    MixerKind::Vbs { k, n } => write!(out, "vbs a={a} b={b} k={k} n={n}"),
                    MixerKind::Custom(m) => write!(
                        out,
                        "mixer a={a} b={b} u00={} u01={} u10={} u11={}",
                        complex_text(m.0[0][0]),
                        complex_text(m.0[0][1]),
                        complex_text(m.0[1][0]),
                        complex_text(m.0[1][1])
                    ),
                };
                let _ = writeln!(out, " out={u},{l}");
            }
            Component::Hwp { mode, theta } => {
                let _ = writeln!(out, "hwp mode={mode} theta={theta}");
            }
            Component::Attenuator {
                mode,
                coefficient,
                sink,
            } => {
                let c = match coefficient {
                    Coefficient::RNomPow(j) => format!("rnom^{j}"),
                    Coefficient::Fixed(c) => complex_text(*c),
                };
                let _ = writeln!(out, "atten mode={mode} c={c} sink={sink}");
            }
            Component::EmitterScatter {
                in_mode,
                emitter,
                reflected_out,
                sink,
            } => {
                let _ = writeln!(
                    out,
                    "scatter in={in_mode} emitter={emitter} out={reflected_out} sink={sink}"
                );
            }
            Component::Mirror { from, to } => {
                let _ = writeln!(out, "mirror in={from} out={to}");
            }
            Component::DetectorBank { detectors } => {
                let mut entries: Vec<_> = detectors.iter().collect();
                entries.sort_by(|a, b| a.1.cmp(b.1));
                out.push_str("detect");
                for ((m, p), id) in entries {
                    let _ = write!(out, " {id}=({m},{p})");
                }
                out.push('\n');
            }
        }
    }
    if !circuit.feedforward.is_empty() {
        out.push_str("feedforward");
        for (id, rule) in &circuit.feedforward {
            let r: String = rule.iter().map(|c| c.symbol()).collect();
            let _ = write!(out, " {id}={r}");
        }
        out.push('\n');
    }
    out
}
