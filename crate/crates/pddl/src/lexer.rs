//! S-expression lexer with line/column tracking.
//!
//! Symbols are lowercased (PDDL keywords and names are case-insensitive);
//! `;` starts a comment running to end of line.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokKind {
    LPar,
    RPar,
    Sym,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
}

pub fn lex(text: &str) -> Vec<Token> {
    let mut toks = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let mut chars = text.chars().peekable();

    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                toks.push(Token {
                    kind: TokKind::LPar,
                    text: "(".into(),
                    line,
                    col,
                });
                chars.next();
                col += 1;
            }
            ')' => {
                toks.push(Token {
                    kind: TokKind::RPar,
                    text: ")".into(),
                    line,
                    col,
                });
                chars.next();
                col += 1;
            }
            _ => {
                let start_col = col;
                let mut sym = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    sym.push(c.to_ascii_lowercase());
                    chars.next();
                    col += 1;
                }
                toks.push(Token {
                    kind: TokKind::Sym,
                    text: sym,
                    line,
                    col: start_col,
                });
            }
        }
    }
    toks
}
