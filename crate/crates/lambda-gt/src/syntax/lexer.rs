use std::fmt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    /// Lowercase-leading identifier or integer literal.
    Lower(String),
    Upper(String),
    /// `$name`.
    Ctx(String),
    Nu,
    Case,
    Of,
    Otherwise,
    Let,
    In,
    Type,
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Dot,
    Colon,
    Semi,
    Bar,
    Eq,
    Arrow,
    Bowtie,
    Backslash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Lower(s) | Tok::Upper(s) => write!(f, "`{s}`"),
            Tok::Ctx(s) => write!(f, "`${s}`"),
            Tok::Nu => f.write_str("`nu`"),
            Tok::Case => f.write_str("`case`"),
            Tok::Of => f.write_str("`of`"),
            Tok::Otherwise => f.write_str("`otherwise`"),
            Tok::Let => f.write_str("`let`"),
            Tok::In => f.write_str("`in`"),
            Tok::Type => f.write_str("`type`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBrack => f.write_str("`[`"),
            Tok::RBrack => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Bar => f.write_str("`|`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Bowtie => f.write_str("`><`"),
            Tok::Backslash => f.write_str("`\\`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut adv = |n: usize, i: &mut usize| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            adv(1, &mut i);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                adv(1, &mut i);
            }
            continue;
        }
        let ident_len = |start: usize| {
            let mut j = start;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '\'') {
                j += 1;
            }
            j - start
        };
        let tok = if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            adv(j - i, &mut i);
            Tok::Lower(s)
        } else if c.is_alphabetic() || c == '_' {
            let n = ident_len(i);
            let s: String = chars[i..i + n].iter().collect();
            adv(n, &mut i);
            match s.as_str() {
                "nu" => Tok::Nu,
                "case" => Tok::Case,
                "of" => Tok::Of,
                "otherwise" => Tok::Otherwise,
                "let" => Tok::Let,
                "in" => Tok::In,
                "type" => Tok::Type,
                _ if c.is_uppercase() => Tok::Upper(s),
                _ if c == '_' => {
                    return Err(ParseError::new(tl, tc, "identifiers cannot start with `_`"))
                }
                _ => Tok::Lower(s),
            }
        } else if c == '$' {
            let n = ident_len(i + 1);
            if n == 0 || !chars[i + 1].is_lowercase() {
                return Err(ParseError::new(tl, tc, "expected a lowercase name after `$`"));
            }
            let s: String = chars[i + 1..i + 1 + n].iter().collect();
            adv(n + 1, &mut i);
            Tok::Ctx(s)
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let (t, n) = match two.as_str() {
                "->" => (Tok::Arrow, 2),
                "><" => (Tok::Bowtie, 2),
                _ => match c {
                    '(' => (Tok::LParen, 1),
                    ')' => (Tok::RParen, 1),
                    '[' => (Tok::LBrack, 1),
                    ']' => (Tok::RBrack, 1),
                    ',' => (Tok::Comma, 1),
                    '.' => (Tok::Dot, 1),
                    ':' => (Tok::Colon, 1),
                    ';' => (Tok::Semi, 1),
                    '|' => (Tok::Bar, 1),
                    '=' => (Tok::Eq, 1),
                    '\\' | 'λ' => (Tok::Backslash, 1),
                    '→' => (Tok::Arrow, 1),
                    '⋈' => (Tok::Bowtie, 1),
                    'ν' => (Tok::Nu, 1),
                    _ => {
                        return Err(ParseError::new(tl, tc, format!("unexpected character `{c}`")))
                    }
                },
            };
            adv(n, &mut i);
            t
        };
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
