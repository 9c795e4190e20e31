//! Minimal GDB/MI output parser: enough of the grammar to read result,
//! async and stream records.

use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum MiValue {
    Const(String),
    Tuple(BTreeMap<String, MiValue>),
    List(Vec<MiValue>),
}

impl MiValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            MiValue::Const(s) => Some(s),
            _ => None,
        }
    }

    pub fn get(&self, key: &str) -> Option<&MiValue> {
        match self {
            MiValue::Tuple(m) => m.get(key),
            _ => None,
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(MiValue::as_str)
    }

    pub fn items(&self) -> &[MiValue] {
        match self {
            MiValue::List(v) => v,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum MiRecord {
    /// `^class,results`
    Result { class: String, body: MiValue },
    /// `*class,results`
    Exec { class: String, body: MiValue },
    /// `=class,results`
    Notify { class: String, body: MiValue },
    /// `~`, `@` or `&` stream output.
    Stream(String),
    Prompt,
}

pub(crate) fn parse_record(line: &str) -> Option<MiRecord> {
    let line = line.trim_end_matches('\r');
    if line.trim_end() == "(gdb)" {
        return Some(MiRecord::Prompt);
    }
    // Strip an optional numeric token.
    let line = line.trim_start_matches(|c: char| c.is_ascii_digit());
    let mut chars = line.chars();
    let sigil = chars.next()?;
    let rest = chars.as_str();
    match sigil {
        '~' | '@' | '&' => {
            let mut p = Parser::new(rest);
            Some(MiRecord::Stream(p.cstring()?))
        }
        '^' | '*' | '=' => {
            let (class, results) = match rest.split_once(',') {
                Some((c, r)) => (c.to_owned(), r),
                None => (rest.to_owned(), ""),
            };
            let mut p = Parser::new(results);
            let body = p.results()?;
            Some(match sigil {
                '^' => MiRecord::Result { class, body },
                '*' => MiRecord::Exec { class, body },
                _ => MiRecord::Notify { class, body },
            })
        }
        _ => None,
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// `result ("," result)*` up to end of input, as a tuple.
    fn results(&mut self) -> Option<MiValue> {
        let mut map = BTreeMap::new();
        if self.peek().is_none() {
            return Some(MiValue::Tuple(map));
        }
        loop {
            let (k, v) = self.result()?;
            map.insert(k, v);
            if !self.eat(b',') {
                break;
            }
        }
        Some(MiValue::Tuple(map))
    }

    fn result(&mut self) -> Option<(String, MiValue)> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b == b'=' {
                break;
            }
            self.pos += 1;
        }
        let key = std::str::from_utf8(&self.src[start..self.pos]).ok()?.to_owned();
        if !self.eat(b'=') {
            return None;
        }
        Some((key, self.value()?))
    }

    fn value(&mut self) -> Option<MiValue> {
        match self.peek()? {
            b'"' => self.cstring().map(MiValue::Const),
            b'{' => {
                self.pos += 1;
                let mut map = BTreeMap::new();
                if self.eat(b'}') {
                    return Some(MiValue::Tuple(map));
                }
                loop {
                    let (k, v) = self.result()?;
                    map.insert(k, v);
                    if self.eat(b'}') {
                        break;
                    }
                    if !self.eat(b',') {
                        return None;
                    }
                }
                Some(MiValue::Tuple(map))
            }
            b'[' => {
                self.pos += 1;
                let mut items = Vec::new();
                if self.eat(b']') {
                    return Some(MiValue::List(items));
                }
                loop {
                    // Lists hold either values or `key=value` results.
                    let item = if matches!(self.peek(), Some(b'"' | b'{' | b'[')) {
                        self.value()?
                    } else {
                        self.result()?.1
                    };
                    items.push(item);
                    if self.eat(b']') {
                        break;
                    }
                    if !self.eat(b',') {
                        return None;
                    }
                }
                Some(MiValue::List(items))
            }
            _ => None,
        }
    }

    fn cstring(&mut self) -> Option<String> {
        if !self.eat(b'"') {
            return None;
        }
        let mut bytes = Vec::new();
        loop {
            let b = self.peek()?;
            self.pos += 1;
            match b {
                b'"' => break,
                b'\\' => {
                    let e = self.peek()?;
                    self.pos += 1;
                    match e {
                        b'n' => bytes.push(b'\n'),
                        b't' => bytes.push(b'\t'),
                        b'r' => bytes.push(b'\r'),
                        b'0'..=b'7' => {
                            // Octal escape, up to three digits.
                            let mut v = u32::from(e - b'0');
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        v = v * 8 + u32::from(d - b'0');
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            bytes.push(v as u8);
                        }
                        other => bytes.push(other),
                    }
                }
                other => bytes.push(other),
            }
        }
        Some(String::from_utf8_lossy(&bytes).into_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_stopped_record() {
        let rec = parse_record(r#"*stopped,reason="end-stepping-range",frame={addr="0x1",func="main",args=[],file="a.cpp",fullname="/tmp/g/a.cpp",line="4",arch="i386:x86-64"},thread-id="1",stopped-threads="all",core="0""#).unwrap();
        let MiRecord::Exec { class, body } = rec else {
            panic!("not exec")
        };
        assert_eq!(class, "stopped");
        assert_eq!(body.get_str("reason"), Some("end-stepping-range"));
        let frame = body.get("frame").unwrap();
        assert_eq!(frame.get_str("line"), Some("4"));
        assert_eq!(frame.get_str("fullname"), Some("/tmp/g/a.cpp"));
    }

    #[test]
    fn parses_variable_list_with_escapes() {
        let rec = parse_record(
            r#"^done,variables=[{name="k",type="std::string"},{name="c",type="char",value="97 'a'"},{name="s",type="const char *",value="0x4 \"hi\\n\""}]"#,
        )
        .unwrap();
        let MiRecord::Result { class, body } = rec else {
            panic!()
        };
        assert_eq!(class, "done");
        let vars = body.get("variables").unwrap().items();
        assert_eq!(vars.len(), 3);
        assert_eq!(vars[0].get_str("value"), None);
        assert_eq!(vars[1].get_str("value"), Some("97 'a'"));
        assert_eq!(vars[2].get_str("value"), Some("0x4 \"hi\\n\""));
    }

    #[test]
    fn parses_stream_and_prompt() {
        assert_eq!(
            parse_record(r#"~"3\tint main() {\n""#),
            Some(MiRecord::Stream("3\tint main() {\n".into()))
        );
        assert_eq!(parse_record("(gdb) "), Some(MiRecord::Prompt));
        assert_eq!(
            parse_record("^running"),
            Some(MiRecord::Result {
                class: "running".into(),
                body: MiValue::Tuple(Default::default())
            })
        );
    }

    #[test]
    fn parses_list_of_results() {
        let rec = parse_record(r#"^done,stack=[frame={level="0",func="f"},frame={level="1",func="main"}]"#).unwrap();
        let MiRecord::Result { body, .. } = rec else {
            panic!()
        };
        let frames = body.get("stack").unwrap().items();
        assert_eq!(frames[1].get_str("func"), Some("main"));
    }
}
