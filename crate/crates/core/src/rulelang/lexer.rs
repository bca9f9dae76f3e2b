use super::RuleLangError;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Sym(String),
    Var(String),
    Num(f64),
    ColonColon,
    ColonDash,
    Semi,
    Comma,
    Dot,
    LParen,
    RParen,
    Is,
    Star,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits rule-language source into tokens. `%` starts a comment that runs to
/// the end of the line. Lines and columns are 1-based, columns count chars.
pub fn tokenize(source: &str) -> Result<Vec<Token>, RuleLangError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;

    while i < chars.len() {
        let c = chars[i];
        let column = i - line_start + 1;
        let single = |kind| Token { kind, line, column };

        if c == '\n' {
            i += 1;
            line += 1;
            line_start = i;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }

        match c {
            ':' => match chars.get(i + 1) {
                Some(':') => {
                    tokens.push(single(TokenKind::ColonColon));
                    i += 2;
                }
                Some('-') => {
                    tokens.push(single(TokenKind::ColonDash));
                    i += 2;
                }
                _ => return Err(RuleLangError::Lex { line, column, found: c }),
            },
            ';' | ',' | '.' | '(' | ')' | '*' => {
                let kind = match c {
                    ';' => TokenKind::Semi,
                    ',' => TokenKind::Comma,
                    '.' => TokenKind::Dot,
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    _ => TokenKind::Star,
                };
                tokens.push(single(kind));
                i += 1;
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                // A dot is a decimal point only when a digit follows; otherwise it ends the clause.
                if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text
                    .parse::<f64>()
                    .map_err(|_| RuleLangError::Lex { line, column, found: c })?;
                tokens.push(single(TokenKind::Num(value)));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let kind = if c.is_ascii_uppercase() {
                    TokenKind::Var(text)
                } else if text == "is" {
                    TokenKind::Is
                } else {
                    TokenKind::Sym(text)
                };
                tokens.push(single(kind));
            }
            _ => return Err(RuleLangError::Lex { line, column, found: c }),
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::TokenKind::*;
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn prior_clause_line() {
        assert_eq!(
            kinds("0.10::salivation(X,decreased)."),
            vec![
                Num(0.10),
                ColonColon,
                Sym("salivation".into()),
                LParen,
                Var("X".into()),
                Comma,
                Sym("decreased".into()),
                RParen,
                Dot
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(kinds("").is_empty());
        assert!(kinds("  % only a comment\n\t").is_empty());
    }

    #[test]
    fn scaled_annotation() {
        assert_eq!(
            kinds("4*P::h(X)."),
            vec![
                Num(4.0),
                Star,
                Var("P".into()),
                ColonColon,
                Sym("h".into()),
                LParen,
                Var("X".into()),
                RParen,
                Dot
            ]
        );
    }

    #[test]
    fn number_before_clause_end() {
        assert_eq!(
            kinds("P is 0.2."),
            vec![Var("P".into()), Is, Num(0.2), Dot]
        );
        assert_eq!(kinds("4."), vec![Num(4.0), Dot]);
    }

    #[test]
    fn rule_and_comment() {
        assert_eq!(
            kinds("q :- a, b. % trailing\n"),
            vec![
                Sym("q".into()),
                ColonDash,
                Sym("a".into()),
                Comma,
                Sym("b".into()),
                Dot
            ]
        );
    }

    #[test]
    fn reports_position_of_bad_char() {
        let err = tokenize("a.\n  b :- c & d.").unwrap_err();
        assert_eq!(
            err,
            RuleLangError::Lex {
                line: 2,
                column: 10,
                found: '&'
            }
        );
        assert!(tokenize("_x").is_err());
        assert!(tokenize("a : b").is_err());
        assert!(tokenize("-1").is_err());
    }
}
