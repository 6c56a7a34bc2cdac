//! Brace-balance method finder for C-like sources.
//!
//! Works on the lexeme stream, so braces inside strings and comments never
//! count. A `{` opens a method when the tokens since the previous `;`, `{` or
//! `}` look like a signature: an identifier (or `operator` symbol) directly
//! followed by `(`, with no `=` in front of it. Every other `{` opens a
//! container (class, namespace, initializer) whose contents are scanned in
//! turn. Method bodies are never scanned for nested methods.

use super::lexer::{lex, Lexeme, LexemeKind};

/// Location of one method in a file. Lines are 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodSpan {
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
}

fn drop_preprocessor_lines(lexemes: Vec<Lexeme<'_>>) -> Vec<Lexeme<'_>> {
    let mut out = Vec::with_capacity(lexemes.len());
    let mut skip_line = None;
    let mut last_line = 0;
    for lx in lexemes {
        let first_on_line = lx.line != last_line;
        last_line = lx.line;
        if first_on_line {
            skip_line = (lx.text == "#").then_some(lx.line);
        }
        if skip_line != Some(lx.line) {
            out.push(lx);
        }
    }
    out
}

/// Skips leading Java annotations such as `@Override` or `@Foo(bar = 1)`.
fn skip_annotations<'s, 'a>(mut sig: &'s [Lexeme<'a>]) -> &'s [Lexeme<'a>] {
    while sig.first().is_some_and(|lx| lx.text == "@") {
        let mut i = 1;
        while i < sig.len() && (sig[i].kind == LexemeKind::Ident || sig[i].text == ".") {
            i += 1;
        }
        if sig.get(i).is_some_and(|lx| lx.text == "(") {
            let mut depth = 0usize;
            while i < sig.len() {
                match sig[i].text {
                    "(" => depth += 1,
                    ")" => {
                        depth -= 1;
                        if depth == 0 {
                            i += 1;
                            break;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
        }
        sig = &sig[i.min(sig.len())..];
    }
    sig
}

/// Returns the method name when `sig` reads like a function head.
fn signature_name(sig: &[Lexeme<'_>]) -> Option<String> {
    let sig = skip_annotations(sig);
    let open = sig.iter().position(|lx| lx.text == "(")?;
    if open == 0 {
        return None;
    }
    let before = &sig[..open];

    if let Some(op_pos) = before.iter().rposition(|lx| lx.text == "operator") {
        if before[..op_pos].iter().any(|lx| lx.text == "=") {
            return None;
        }
        let symbol: String = before[op_pos + 1..].iter().map(|lx| lx.text).collect();
        // `operator()(...)`: the call operator's own parens come first.
        let symbol = if symbol.is_empty() { "()".to_owned() } else { symbol };
        return Some(format!("operator{symbol}"));
    }

    if before.iter().any(|lx| lx.text == "=") {
        return None;
    }
    let name = &before[open - 1];
    (name.kind == LexemeKind::Ident).then(|| name.text.to_owned())
}

fn matching_brace(lexemes: &[Lexeme<'_>], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (i, lx) in lexemes.iter().enumerate().skip(open) {
        match lx.text {
            "{" => depth += 1,
            "}" => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Finds every method definition in `source`, in source order.
///
/// A method whose closing brace is missing is dropped; its span is reported
/// through the second return value so callers can warn.
pub fn find_methods(source: &str) -> (Vec<MethodSpan>, Vec<usize>) {
    let lexemes = drop_preprocessor_lines(lex(source));
    let mut methods = Vec::new();
    let mut unbalanced = Vec::new();
    let mut sig_start = 0usize;
    let mut i = 0usize;
    while i < lexemes.len() {
        match lexemes[i].text {
            ";" | "}" => sig_start = i + 1,
            ":" if i > 0 && matches!(lexemes[i - 1].text, "public" | "private" | "protected") && sig_start + 1 == i => {
                sig_start = i + 1;
            }
            "{" => {
                let sig = &lexemes[sig_start.min(i)..i];
                match signature_name(sig) {
                    Some(name) => match matching_brace(&lexemes, i) {
                        Some(close) => {
                            methods.push(MethodSpan { name, start_line: sig[0].line, end_line: lexemes[close].line });
                            i = close;
                            sig_start = close + 1;
                        }
                        None => {
                            unbalanced.push(sig[0].line);
                            break;
                        }
                    },
                    None => sig_start = i + 1,
                }
            }
            _ => {}
        }
        i += 1;
    }
    (methods, unbalanced)
}
