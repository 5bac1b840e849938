//! Hand-rolled lexer for the Slang subset.

use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Identifier(String),
    Keyword(String),   // identifier followed by ':', colon included
    BinarySelector(String),
    Integer(i64),
    Character(char),
    Symbol(String),    // #foo or #foo:bar:
    Assign,            // :=
    Caret,             // ^
    Period,            // .
    Semicolon,         // ;
    LParen,
    RParen,
    LBracket,          // [
    RBracket,          // ]
    LBrace,            // {
    RBrace,            // }
    Colon,             // bare ':' (block parameter marker)
    VBar,              // | (temps delimiter; also a binary char, disambiguated here)
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
}

const BINARY_CHARS: &[char] = &['+', '-', '*', '/', '\\', '<', '>', '=', '~', '&', '@', '%', ','];

pub fn lex(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    // True when the previous token can end an expression; a '-' after such
    // a token is a binary send even when glued to digits.
    let mut prev_is_operand = false;

    macro_rules! err {
        ($l:expr, $c:expr, $($msg:tt)*) => {
            return Err(FrontendError::Parse {
                line: $l,
                column: $c,
                message: format!($($msg)*),
            })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let advance = |i: &mut usize, line: &mut u32, col: &mut u32| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };

        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
            continue;
        }
        // "comments" are double-quoted and nest-free
        if c == '"' {
            advance(&mut i, &mut line, &mut col);
            loop {
                if i >= chars.len() {
                    err!(tline, tcol, "unterminated comment");
                }
                let done = chars[i] == '"';
                advance(&mut i, &mut line, &mut col);
                if done {
                    break;
                }
            }
            continue;
        }

        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            if i < chars.len() && chars[i] == ':' && (i + 1 >= chars.len() || chars[i + 1] != '=') {
                advance(&mut i, &mut line, &mut col);
                prev_is_operand = false;
                Tok::Keyword(format!("{word}:"))
            } else {
                prev_is_operand = true;
                Tok::Identifier(word)
            }
        } else if c.is_ascii_digit()
            || (c == '-'
                && !prev_is_operand
                && i + 1 < chars.len()
                && chars[i + 1].is_ascii_digit())
        {
            let negative = c == '-';
            if negative {
                advance(&mut i, &mut line, &mut col);
            }
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col);
            }
            let digits: String = chars[start..i].iter().collect();
            let value: i64 = match digits.parse::<i64>() {
                Ok(v) => v,
                Err(_) => err!(tline, tcol, "integer literal out of range: {digits}"),
            };
            prev_is_operand = true;
            Tok::Integer(if negative { -value } else { value })
        } else if c == '$' {
            advance(&mut i, &mut line, &mut col);
            if i >= chars.len() {
                err!(tline, tcol, "dangling character literal");
            }
            let ch = chars[i];
            advance(&mut i, &mut line, &mut col);
            prev_is_operand = true;
            Tok::Character(ch)
        } else if c == '#' {
            advance(&mut i, &mut line, &mut col);
            if i >= chars.len() || !(chars[i].is_ascii_alphabetic() || chars[i] == '_') {
                err!(tline, tcol, "expected symbol name after '#'");
            }
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == ':')
            {
                advance(&mut i, &mut line, &mut col);
            }
            prev_is_operand = true;
            Tok::Symbol(chars[start..i].iter().collect())
        } else if c == ':' && i + 1 < chars.len() && chars[i + 1] == '=' {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            prev_is_operand = false;
            Tok::Assign
        } else if c == ':' {
            advance(&mut i, &mut line, &mut col);
            prev_is_operand = false;
            Tok::Colon
        } else if c == '|' {
            advance(&mut i, &mut line, &mut col);
            prev_is_operand = false;
            Tok::VBar
        } else if BINARY_CHARS.contains(&c) {
            let start = i;
            while i < chars.len() && BINARY_CHARS.contains(&chars[i]) && i - start < 2 {
                advance(&mut i, &mut line, &mut col);
            }
            prev_is_operand = false;
            Tok::BinarySelector(chars[start..i].iter().collect())
        } else {
            let single = match c {
                '^' => Tok::Caret,
                '.' => Tok::Period,
                ';' => Tok::Semicolon,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                other => err!(tline, tcol, "unexpected character {other:?}"),
            };
            prev_is_operand = matches!(single, Tok::RParen | Tok::RBracket | Tok::RBrace);
            advance(&mut i, &mut line, &mut col);
            single
        };
        tokens.push(Token { tok, line: tline, column: tcol });
    }
    tokens.push(Token { tok: Tok::Eof, line, column: col });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        let mut t = lex(src).unwrap();
        t.pop(); // Eof
        t.into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn keyword_vs_assign() {
        assert_eq!(
            toks("x := self at: 1"),
            vec![
                Tok::Identifier("x".into()),
                Tok::Assign,
                Tok::Identifier("self".into()),
                Tok::Keyword("at:".into()),
                Tok::Integer(1),
            ]
        );
    }

    #[test]
    fn negative_literal_vs_binary_minus() {
        assert_eq!(
            toks("x - 1"),
            vec![
                Tok::Identifier("x".into()),
                Tok::BinarySelector("-".into()),
                Tok::Integer(1)
            ]
        );
        assert_eq!(toks("-1"), vec![Tok::Integer(-1)]);
        // glued to an operand the '-' is still a send
        assert_eq!(
            toks("x -1"),
            vec![
                Tok::Identifier("x".into()),
                Tok::BinarySelector("-".into()),
                Tok::Integer(1)
            ]
        );
    }

    #[test]
    fn two_char_binary_selectors() {
        assert_eq!(
            toks("a // b \\\\ c <= d ~= e"),
            vec![
                Tok::Identifier("a".into()),
                Tok::BinarySelector("//".into()),
                Tok::Identifier("b".into()),
                Tok::BinarySelector("\\\\".into()),
                Tok::Identifier("c".into()),
                Tok::BinarySelector("<=".into()),
                Tok::Identifier("d".into()),
                Tok::BinarySelector("~=".into()),
                Tok::Identifier("e".into()),
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            toks("x \"a comment\" := 2"),
            vec![Tok::Identifier("x".into()), Tok::Assign, Tok::Integer(2)]
        );
    }

    #[test]
    fn symbols_and_braces() {
        assert_eq!(
            toks("#printOop { oop. 2 }"),
            vec![
                Tok::Symbol("printOop".into()),
                Tok::LBrace,
                Tok::Identifier("oop".into()),
                Tok::Period,
                Tok::Integer(2),
                Tok::RBrace,
            ]
        );
    }
}
