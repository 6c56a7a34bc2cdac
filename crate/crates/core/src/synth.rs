//! Seeded synthetic inputs: random unit vectors and a C corpus with planted
//! clones and a matching ground-truth file.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedder::EmbeddingVector;
use crate::metrics::{CloneType, FragmentSpan, GroundTruthPair};

/// `n` Gaussian-direction unit vectors with ids `0..n`.
pub fn random_unit_vectors(n: usize, dimension: usize, seed: u64) -> Vec<EmbeddingVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v: Vec<f64> = (0..dimension).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            EmbeddingVector { fragment_id: i as u64, values: v.iter().map(|x| (x / norm) as f32).collect() }
        })
        .collect()
}

/// Shape of a generated corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusSpec {
    /// Unrelated base functions.
    pub functions: usize,
    /// Clones with layout and comment edits only.
    pub t1: usize,
    /// Clones with consistent identifier renames and literal changes.
    pub t2: usize,
    /// Clones with inserted statements.
    pub st3: usize,
    pub files: usize,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec { functions: 200, t1: 20, t2: 20, st3: 20, files: 12, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCorpus {
    /// Relative path and content of each source file.
    pub files: Vec<(String, String)>,
    pub truth: Vec<GroundTruthPair>,
    /// Functions written, clones included.
    pub function_count: usize,
}

impl GeneratedCorpus {
    /// Writes the sources under `dir` and returns nothing else; use
    /// [`GeneratedCorpus::write_truth`] for the truth file.
    pub fn write_sources(&self, dir: &Path) -> io::Result<()> {
        for (rel, text) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        Ok(())
    }

    pub fn write_truth(&self, path: &Path) -> io::Result<()> {
        let mut out = String::from("file_a,start_a,end_a,file_b,start_b,end_b,type\n");
        for t in &self.truth {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t.a.file, t.a.start_line, t.a.end_line, t.b.file, t.b.start_line, t.b.end_line, t.clone_type
            );
        }
        fs::write(path, out)
    }
}

const WORDS: &[&str] = &[
    "count", "total", "index", "buf", "len", "node", "next", "prev", "key", "value", "sum", "acc", "tmp", "flag",
    "limit", "size", "offset", "cursor", "head", "tail", "item", "left", "right", "mid", "step", "delta", "scale",
    "width", "height", "depth", "level", "mask", "bits", "hash", "seed", "state", "mode", "rate", "score", "weight",
    "min", "max", "lo", "hi", "pos", "row", "col", "cell", "table", "entry", "block", "chunk", "frame", "packet",
];

const CALLS: &[&str] = &[
    "memcpy", "memset", "strlen", "printf", "abs", "check", "update", "emit", "push", "pop", "lookup", "store", "load",
    "flush", "reset", "merge", "split", "visit", "report", "trace",
];

const TYPES: &[&str] = &["int", "long", "unsigned", "double", "char", "short", "float"];

/// One statement as indented source lines. `depth` is the nesting level.
#[derive(Debug, Clone)]
struct Stmt {
    lines: Vec<(usize, String)>,
}

/// A function as a list of statements with named identifiers, so it can be
/// renamed and re-laid-out.
#[derive(Debug, Clone)]
struct Func {
    ret: &'static str,
    name: String,
    params: Vec<(&'static str, String)>,
    body: Vec<Stmt>,
}

struct Gen {
    rng: ChaCha8Rng,
    serial: usize,
}

impl Gen {
    fn ident(&mut self) -> String {
        let a = WORDS.choose(&mut self.rng).unwrap();
        let b = WORDS.choose(&mut self.rng).unwrap();
        self.serial += 1;
        match self.rng.random_range(0..3) {
            0 => format!("{a}_{b}{}", self.serial % 97),
            1 => format!("{a}{}", self.serial),
            _ => format!("{a}_{b}_{}", self.serial),
        }
    }

    fn num(&mut self) -> String {
        self.rng.random_range(0..500).to_string()
    }

    fn pick<'a>(&mut self, vars: &'a [String]) -> &'a str {
        vars.choose(&mut self.rng).unwrap()
    }

    fn expr(&mut self, vars: &[String]) -> String {
        let a = self.pick(vars).to_owned();
        let b = self.pick(vars).to_owned();
        let n = self.num();
        match self.rng.random_range(0..10) {
            0 => format!("{a} + {b}"),
            1 => format!("{a} * {n}"),
            2 => format!("({a} - {b}) / {}", self.rng.random_range(1..9)),
            3 => format!("{a} << {}", self.rng.random_range(1..5)),
            4 => format!("{a} % {}", self.rng.random_range(2..50)),
            5 => format!("{}({a}, {b})", CALLS.choose(&mut self.rng).unwrap()),
            6 => format!("{a} & {n}"),
            7 => format!("{a} ^ {b}"),
            8 => format!("{a} > {b} ? {a} : {b}"),
            _ => format!("{a}[{b}]"),
        }
    }

    fn cond(&mut self, vars: &[String]) -> String {
        let a = self.pick(vars).to_owned();
        let b = self.pick(vars).to_owned();
        let op = ["<", "<=", ">", ">=", "==", "!="].choose(&mut self.rng).unwrap();
        match self.rng.random_range(0..3) {
            0 => format!("{a} {op} {b}"),
            1 => format!("{a} {op} {} && {b} != 0", self.num()),
            _ => format!("!{a} || {b} {op} {}", self.num()),
        }
    }

    fn stmt(&mut self, vars: &mut Vec<String>, depth: usize) -> Stmt {
        let kind = if depth >= 2 { self.rng.random_range(0..5) } else { self.rng.random_range(0..11) };
        let lines = match kind {
            0 | 1 => {
                let v = self.pick(vars).to_owned();
                let e = self.expr(vars);
                let op = ["=", "+=", "-=", "|=", "*="].choose(&mut self.rng).unwrap();
                vec![(depth, format!("{v} {op} {e};"))]
            }
            2 => {
                let v = self.pick(vars).to_owned();
                vec![(depth, format!("{v}{};", if self.rng.random() { "++" } else { "--" }))]
            }
            3 => {
                let call = CALLS.choose(&mut self.rng).unwrap();
                let a = self.pick(vars).to_owned();
                let s = WORDS.choose(&mut self.rng).unwrap();
                vec![(depth, format!("{call}({a}, \"{s}\");"))]
            }
            4 => {
                let t = TYPES.choose(&mut self.rng).unwrap();
                let v = self.ident();
                let e = self.expr(vars);
                vars.push(v.clone());
                vec![(depth, format!("{t} {v} = {e};"))]
            }
            5 | 6 => {
                let c = self.cond(vars);
                let mut lines = vec![(depth, format!("if ({c}) {{"))];
                for _ in 0..self.rng.random_range(1..3) {
                    lines.extend(self.stmt(vars, depth + 1).lines);
                }
                if self.rng.random_bool(0.4) {
                    lines.push((depth, "} else {".to_owned()));
                    lines.extend(self.stmt(vars, depth + 1).lines);
                }
                lines.push((depth, "}".to_owned()));
                lines
            }
            7 => {
                let i = self.ident();
                let lim = self.pick(vars).to_owned();
                let mut lines = vec![(depth, format!("for (int {i} = 0; {i} < {lim}; {i}++) {{"))];
                vars.push(i);
                for _ in 0..self.rng.random_range(1..3) {
                    lines.extend(self.stmt(vars, depth + 1).lines);
                }
                vars.pop();
                lines.push((depth, "}".to_owned()));
                lines
            }
            8 => {
                let c = self.cond(vars);
                let mut lines = vec![(depth, format!("while ({c}) {{"))];
                lines.extend(self.stmt(vars, depth + 1).lines);
                let v = self.pick(vars).to_owned();
                lines.push((depth + 1, format!("{v} = {v} >> 1;")));
                lines.push((depth, "}".to_owned()));
                lines
            }
            9 => {
                let v = self.pick(vars).to_owned();
                let mut lines = vec![(depth, format!("switch ({v}) {{"))];
                for _ in 0..self.rng.random_range(2..4) {
                    lines.push((depth, format!("case {}:", self.num())));
                    lines.extend(self.stmt(vars, depth + 1).lines);
                    lines.push((depth + 1, "break;".to_owned()));
                }
                lines.push((depth, "default:".to_owned()));
                lines.push((depth + 1, "break;".to_owned()));
                lines.push((depth, "}".to_owned()));
                lines
            }
            _ => {
                let c = self.cond(vars);
                let v = self.pick(vars).to_owned();
                vec![(depth, format!("if ({c})")), (depth + 1, format!("return {v};"))]
            }
        };
        Stmt { lines }
    }

    fn function(&mut self) -> Func {
        let name = self.ident();
        let params: Vec<(&'static str, String)> =
            (0..self.rng.random_range(1..4)).map(|_| (*TYPES.choose(&mut self.rng).unwrap(), self.ident())).collect();
        let mut vars: Vec<String> = params.iter().map(|p| p.1.clone()).collect();
        let mut body = Vec::new();
        let t = TYPES.choose(&mut self.rng).unwrap();
        let first = self.ident();
        body.push(Stmt { lines: vec![(1, format!("{t} {first} = {};", self.num()))] });
        vars.push(first);
        for _ in 0..self.rng.random_range(5..11) {
            body.push(self.stmt(&mut vars, 1));
        }
        let r = self.pick(&vars).to_owned();
        body.push(Stmt { lines: vec![(1, format!("return {r};"))] });
        Func { ret: TYPES.choose(&mut self.rng).unwrap(), name, params, body }
    }

    /// Renames every identifier the function declares and changes numeric
    /// literals.
    fn rename(&mut self, f: &Func) -> Func {
        let mut names: Vec<String> = vec![f.name.clone()];
        names.extend(f.params.iter().map(|p| p.1.clone()));
        for s in &f.body {
            for (_, line) in &s.lines {
                for tok in line.split(|c: char| !(c.is_alphanumeric() || c == '_')) {
                    if (tok.contains('_') || tok.chars().last().is_some_and(|c| c.is_ascii_digit()))
                        && tok.chars().next().is_some_and(|c| c.is_alphabetic())
                        && !names.iter().any(|n| n == tok)
                    {
                        names.push(tok.to_owned());
                    }
                }
            }
        }
        let fresh: Vec<String> = names.iter().map(|_| self.ident()).collect();
        let map = |line: &str, rng: &mut ChaCha8Rng| -> String {
            let mut out = String::new();
            let mut word = String::new();
            let mut in_str = false;
            let flush = |word: &mut String, out: &mut String, rng: &mut ChaCha8Rng| {
                if word.is_empty() {
                    return;
                }
                if let Some(i) = names.iter().position(|n| n == word) {
                    out.push_str(&fresh[i]);
                } else if word.chars().all(|c| c.is_ascii_digit()) {
                    out.push_str(&rng.random_range(0..500).to_string());
                } else {
                    out.push_str(word);
                }
                word.clear();
            };
            for c in line.chars() {
                if c == '"' {
                    in_str = !in_str;
                }
                if !in_str && (c.is_alphanumeric() || c == '_') {
                    word.push(c);
                } else {
                    flush(&mut word, &mut out, rng);
                    out.push(c);
                }
            }
            flush(&mut word, &mut out, rng);
            out
        };
        Func {
            ret: f.ret,
            name: map(&f.name, &mut self.rng),
            params: f.params.iter().map(|(t, p)| (*t, map(p, &mut self.rng))).collect(),
            body: f
                .body
                .iter()
                .map(|s| Stmt { lines: s.lines.iter().map(|(d, l)| (*d, map(l, &mut self.rng))).collect() })
                .collect(),
        }
    }

    /// Inserts one or two fresh statements at random positions before the
    /// final return.
    fn insert_statements(&mut self, f: &Func) -> Func {
        let mut g = f.clone();
        let mut vars: Vec<String> = g.params.iter().map(|p| p.1.clone()).collect();
        for _ in 0..self.rng.random_range(1..3) {
            let at = self.rng.random_range(1..g.body.len());
            let mut s = self.stmt(&mut vars, 1);
            s.lines.truncate(3);
            if s.lines.last().is_some_and(|(_, l)| l.ends_with('{')) || s.lines.len() > 1 {
                let v = vars[0].clone();
                s = Stmt { lines: vec![(1, format!("{v} += {};", self.num()))] };
            }
            g.body.insert(at, s);
        }
        g
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    indent: &'static str,
    brace_own_line: bool,
    comments: bool,
    spread: bool,
}

impl Layout {
    const PLAIN: Layout = Layout { indent: "    ", brace_own_line: false, comments: false, spread: false };
}

fn render(f: &Func, layout: Layout, rng: &mut ChaCha8Rng) -> String {
    let params: Vec<String> = f.params.iter().map(|(t, n)| format!("{t} {n}")).collect();
    let mut out = String::new();
    if layout.brace_own_line {
        let _ = writeln!(out, "{} {}({})\n{{", f.ret, f.name, params.join(", "));
    } else {
        let _ = writeln!(out, "{} {}({}) {{", f.ret, f.name, params.join(", "));
    }
    for (i, s) in f.body.iter().enumerate() {
        if layout.comments && i % 3 == 1 {
            let w = WORDS.choose(rng).unwrap();
            let _ = writeln!(out, "{}// {w} handling", layout.indent);
        }
        for (depth, line) in &s.lines {
            let text = if layout.spread { line.replace(", ", " ,  ").replace(" = ", "  =  ") } else { line.clone() };
            let _ = writeln!(out, "{}{}", layout.indent.repeat(*depth), text);
        }
        if layout.spread && i % 4 == 2 {
            out.push('\n');
        }
    }
    out.push_str("}\n");
    out
}

struct Placed {
    file: usize,
    text: String,
}

/// Generates a corpus: `functions` unrelated functions plus the requested
/// clones, each planted against a distinct randomly chosen original and
/// placed in a random file.
pub fn generate_corpus(spec: &CorpusSpec) -> GeneratedCorpus {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(spec.seed), serial: 0 };
    let files = spec.files.max(1);
    let bases: Vec<Func> = (0..spec.functions).map(|_| g.function()).collect();
    let mut order: Vec<usize> = (0..bases.len()).collect();
    order.shuffle(&mut g.rng);
    let mut sources = order.into_iter();

    let mut placed: Vec<Placed> = Vec::new();
    let mut base_slot = Vec::with_capacity(bases.len());
    for f in &bases {
        base_slot.push(placed.len());
        let file = g.rng.random_range(0..files);
        placed.push(Placed { file, text: render(f, Layout::PLAIN, &mut g.rng) });
    }
    let mut planted: Vec<(usize, usize, CloneType)> = Vec::new();
    let plan = [(CloneType::T1, spec.t1), (CloneType::T2, spec.t2), (CloneType::ST3, spec.st3)];
    for (ty, count) in plan {
        for _ in 0..count {
            let Some(src) = sources.next() else { break };
            let layout = Layout {
                indent: ["  ", "\t", "        "].choose(&mut g.rng).unwrap(),
                brace_own_line: g.rng.random(),
                comments: true,
                spread: g.rng.random(),
            };
            let clone = match ty {
                CloneType::T1 => bases[src].clone(),
                CloneType::T2 => g.rename(&bases[src]),
                _ => {
                    let renamed = if g.rng.random_bool(0.5) { g.rename(&bases[src]) } else { bases[src].clone() };
                    g.insert_statements(&renamed)
                }
            };
            let file = g.rng.random_range(0..files);
            planted.push((base_slot[src], placed.len(), ty));
            placed.push(Placed { file, text: render(&clone, layout, &mut g.rng) });
        }
    }

    let names: Vec<String> = (0..files).map(|i| format!("src/unit_{i:02}.c")).collect();
    let mut contents = vec![String::new(); files];
    let mut spans = vec![FragmentSpan::new("", 1, 1); placed.len()];
    for (i, p) in placed.iter().enumerate() {
        let buf = &mut contents[p.file];
        if buf.is_empty() {
            buf.push_str("#include <stdio.h>\n#include <string.h>\n");
        }
        buf.push('\n');
        let start = buf.lines().count() + 1;
        buf.push_str(&p.text);
        let end = buf.lines().count();
        spans[i] = FragmentSpan::new(names[p.file].clone(), start, end);
    }
    let truth = planted
        .into_iter()
        .map(|(a, b, clone_type)| GroundTruthPair { a: spans[a].clone(), b: spans[b].clone(), clone_type })
        .collect();
    GeneratedCorpus {
        files: names.into_iter().zip(contents).filter(|(_, c)| !c.is_empty()).collect(),
        truth,
        function_count: placed.len(),
    }
}
