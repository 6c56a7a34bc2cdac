//! Lexical layer shared by the C, C++ and Java front ends.
//!
//! All three languages agree on `//` line comments, `/* */` block comments and
//! on double-quoted string and single-quoted char literals, which is all the
//! lexer needs to know to find comment boundaries and method bodies.

use log::warn;

use super::TokenizerMode;

/// Placeholder emitted for identifiers in normalized mode.
pub const ID_TOKEN: &str = "ID";
/// Placeholder emitted for numeric literals in normalized mode.
pub const NUM_TOKEN: &str = "NUM";
/// Placeholder emitted for string and char literals in normalized mode.
pub const STR_TOKEN: &str = "STR";

// Union of C, C++ and Java reserved words and primitive type names. These
// survive normalization so that control structure stays visible.
const KEYWORDS: &[&str] = &[
    "abstract",
    "alignas",
    "alignof",
    "asm",
    "assert",
    "auto",
    "bool",
    "boolean",
    "break",
    "byte",
    "case",
    "catch",
    "char",
    "class",
    "const",
    "const_cast",
    "constexpr",
    "continue",
    "decltype",
    "default",
    "delete",
    "do",
    "double",
    "dynamic_cast",
    "else",
    "enum",
    "explicit",
    "export",
    "extends",
    "extern",
    "false",
    "final",
    "finally",
    "float",
    "for",
    "friend",
    "goto",
    "if",
    "implements",
    "import",
    "inline",
    "instanceof",
    "int",
    "interface",
    "long",
    "mutable",
    "namespace",
    "native",
    "new",
    "noexcept",
    "null",
    "nullptr",
    "operator",
    "override",
    "package",
    "private",
    "protected",
    "public",
    "register",
    "reinterpret_cast",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "static_assert",
    "static_cast",
    "strictfp",
    "struct",
    "super",
    "switch",
    "synchronized",
    "template",
    "this",
    "throw",
    "throws",
    "transient",
    "true",
    "try",
    "typedef",
    "typeid",
    "typename",
    "union",
    "unsigned",
    "using",
    "var",
    "virtual",
    "void",
    "volatile",
    "while",
    "_Bool",
];

// Longest first so that maximal munch works with a linear scan.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->*", "<=>", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::", ".*",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexemeKind {
    Ident,
    Keyword,
    Number,
    Str,
    Char,
    Punct,
}

/// One token with its 1-based source line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lexeme<'a> {
    pub kind: LexemeKind,
    pub text: &'a str,
    pub line: usize,
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphanumeric()
}

/// Byte-indexed cursor over a source string.
struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, pos: 0, line: 1 }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    /// Consumes a quoted literal whose opening quote is at the cursor. Stops
    /// after the closing quote, or before the newline when unterminated.
    fn eat_quoted(&mut self, quote: char) {
        self.bump();
        while let Some(c) = self.peek() {
            match c {
                '\\' => {
                    self.bump();
                    if self.peek().is_some_and(|n| n != '\n') {
                        self.bump();
                    }
                }
                '\n' => return,
                c if c == quote => {
                    self.bump();
                    return;
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    /// Consumes a block comment starting at the cursor. Returns false when the
    /// comment runs off the end of the text.
    fn eat_block_comment(&mut self, mut on_newline: impl FnMut()) -> bool {
        self.bump();
        self.bump();
        loop {
            match self.peek() {
                None => return false,
                Some('*') if self.peek_nth(1) == Some('/') => {
                    self.bump();
                    self.bump();
                    return true;
                }
                Some('\n') => {
                    on_newline();
                    self.bump();
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }

    fn eat_line_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                return;
            }
            self.bump();
        }
    }
}

fn strip_impl(text: &str) -> (String, bool) {
    let mut out = String::with_capacity(text.len());
    let mut cur = Cursor::new(text);
    let mut terminated = true;
    while let Some(c) = cur.peek() {
        match c {
            '/' if cur.peek_nth(1) == Some('/') => cur.eat_line_comment(),
            '/' if cur.peek_nth(1) == Some('*') => {
                let mut newlines = 0usize;
                if !cur.eat_block_comment(|| newlines += 1) {
                    terminated = false;
                }
                if newlines == 0 {
                    out.push(' ');
                }
                out.extend(std::iter::repeat_n('\n', newlines));
            }
            '"' | '\'' => {
                let start = cur.pos;
                cur.eat_quoted(c);
                out.push_str(&text[start..cur.pos]);
            }
            _ => {
                out.push(c);
                cur.bump();
            }
        }
    }
    (out, terminated)
}

/// Removes `//` and `/* */` comments, leaving string and char literals intact.
///
/// A block comment becomes a space, or its newlines when it spans lines, so
/// tokens never fuse and every surviving line keeps its line number. An unterminated block comment
/// swallows the rest of the text and logs a warning.
pub fn strip_comments(text: &str) -> String {
    let (out, terminated) = strip_impl(text);
    if !terminated {
        warn!("unterminated block comment; stripped to end of text");
    }
    out
}

/// Number of lines holding at least one character that is neither whitespace
/// nor part of a comment.
pub fn count_loc(text: &str) -> usize {
    let (code, _) = strip_impl(text);
    code.lines().filter(|l| !l.trim().is_empty()).count()
}

/// Splits source text into lexemes, dropping whitespace and comments.
pub fn lex(text: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut cur = Cursor::new(text);
    while let Some(c) = cur.peek() {
        let start = cur.pos;
        let line = cur.line;
        let kind = match c {
            c if c.is_whitespace() => {
                cur.bump();
                continue;
            }
            '/' if cur.peek_nth(1) == Some('/') => {
                cur.eat_line_comment();
                continue;
            }
            '/' if cur.peek_nth(1) == Some('*') => {
                cur.eat_block_comment(|| {});
                continue;
            }
            '"' => {
                cur.eat_quoted('"');
                LexemeKind::Str
            }
            '\'' => {
                cur.eat_quoted('\'');
                LexemeKind::Char
            }
            c if c.is_ascii_digit() || (c == '.' && cur.peek_nth(1).is_some_and(|n| n.is_ascii_digit())) => {
                let mut prev = '\0';
                while let Some(n) = cur.peek() {
                    let exponent_sign = (n == '+' || n == '-') && matches!(prev, 'e' | 'E' | 'p' | 'P');
                    if n.is_ascii_alphanumeric() || n == '.' || n == '_' || exponent_sign {
                        prev = n;
                        cur.bump();
                    } else {
                        break;
                    }
                }
                LexemeKind::Number
            }
            c if is_ident_start(c) => {
                while cur.peek().is_some_and(is_ident_continue) {
                    cur.bump();
                }
                if is_keyword(&text[start..cur.pos]) {
                    LexemeKind::Keyword
                } else {
                    LexemeKind::Ident
                }
            }
            _ => {
                let rest = cur.rest();
                match OPERATORS.iter().find(|op| rest.starts_with(**op)) {
                    Some(op) => {
                        for _ in 0..op.len() {
                            cur.bump();
                        }
                    }
                    None => {
                        cur.bump();
                    }
                }
                LexemeKind::Punct
            }
        };
        out.push(Lexeme { kind, text: &text[start..cur.pos], line });
    }
    out
}

/// Token sequence of a method body.
///
/// `Raw` keeps every lexeme verbatim. `Normalized` additionally maps every
/// identifier to `ID`, every numeric literal to `NUM` and every string or char
/// literal to `STR`, so that renamed copies tokenize identically.
pub fn tokenize(text: &str, mode: TokenizerMode) -> Vec<String> {
    lex(text)
        .into_iter()
        .map(|lx| match (mode, lx.kind) {
            (TokenizerMode::Normalized, LexemeKind::Ident) => ID_TOKEN.to_owned(),
            (TokenizerMode::Normalized, LexemeKind::Number) => NUM_TOKEN.to_owned(),
            (TokenizerMode::Normalized, LexemeKind::Str | LexemeKind::Char) => STR_TOKEN.to_owned(),
            _ => lx.text.to_owned(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(text: &str) -> Vec<String> {
        tokenize(text, TokenizerMode::Raw)
    }

    fn norm(text: &str) -> Vec<String> {
        tokenize(text, TokenizerMode::Normalized)
    }

    #[test]
    fn strips_line_comment() {
        assert_eq!(strip_comments("int x; // note"), "int x; ");
    }

    #[test]
    fn strips_block_comment() {
        assert_eq!(strip_comments("/*a*/int y;"), " int y;");
        assert_eq!(strip_comments("a/**/b"), "a b");
        assert_eq!(strip_comments("x /* 1\n2 */ y"), "x \n y");
    }

    #[test]
    fn comment_markers_inside_strings_survive() {
        let src = "char*s=\"//not a comment\";";
        assert_eq!(strip_comments(src), src);
        let src = "c = '/'; d = \"/* no */\";";
        assert_eq!(strip_comments(src), src);
    }

    #[test]
    fn block_comment_keeps_line_structure() {
        let src = "a;\n/* one\ntwo\nthree */ b;\nc;";
        let out = strip_comments(src);
        assert_eq!(out.lines().count(), src.lines().count());
        assert_eq!(out, "a;\n\n\n b;\nc;");
    }

    #[test]
    fn unterminated_block_comment_strips_to_end() {
        assert_eq!(strip_comments("x = 1; /* open\nforever"), "x = 1; \n");
    }

    #[test]
    fn escaped_quote_does_not_end_string() {
        let src = r#"s = "a\"//b"; // tail"#;
        assert_eq!(strip_comments(src), r#"s = "a\"//b"; "#);
    }

    #[test]
    fn loc_counts() {
        assert_eq!(count_loc(""), 0);
        assert_eq!(count_loc("a\n\nb"), 2);
        let fixture = "\
int f(int a) {
    // comment only

    int b = a; // trailing comment, still a code line
    /* block comment */

    b++;

    return b;
}";
        // 3 blank lines, 2 comment-only lines, 5 code lines.
        assert_eq!(fixture.lines().count(), 10);
        assert_eq!(count_loc(fixture), 5);
    }

    #[test]
    fn raw_tokens() {
        assert_eq!(raw("a+b"), vec!["a", "+", "b"]);
        assert_eq!(raw("x>>=2;"), vec!["x", ">>=", "2", ";"]);
        assert_eq!(raw("p->q"), vec!["p", "->", "q"]);
        assert_eq!(raw("1.5e-3f+x"), vec!["1.5e-3f", "+", "x"]);
        assert_eq!(raw("s=\"a b\";"), vec!["s", "=", "\"a b\"", ";"]);
    }

    #[test]
    fn normalized_tokens() {
        assert_eq!(norm("x = 42;"), vec!["ID", "=", "NUM", ";"]);
        assert_eq!(norm("int sum(int a,int b){return a+b;}"), norm("int add(int x,int y){return x+y;}"));
        assert_eq!(norm("c = 'q' + \"s\";"), vec!["ID", "=", "STR", "+", "STR", ";"]);
        assert_eq!(norm("return this;"), vec!["return", "this", ";"]);
    }

    #[test]
    fn lex_tracks_lines_and_skips_comments() {
        let lx = lex("a /* x\ny */ b\n// c\nd");
        let got: Vec<(&str, usize)> = lx.iter().map(|l| (l.text, l.line)).collect();
        assert_eq!(got, vec![("a", 1), ("b", 2), ("d", 4)]);
    }

    #[test]
    fn keywords_are_classified() {
        let lx = lex("while (foo) return");
        assert_eq!(lx[0].kind, LexemeKind::Keyword);
        assert_eq!(lx[2].kind, LexemeKind::Ident);
        assert_eq!(lx[4].kind, LexemeKind::Keyword);
    }
}
