//! Typed layout documents.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use super::syntax::{lex, Arg, Command, Line, ParseError, Value};
use crate::beam::BeamIndex;
use crate::expr::{Expr, Scope};

/// Default wavelength when a document gives none, nm.
pub const DEFAULT_WAVELENGTH_NM: f64 = 780.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutDocument {
    /// Table size in inches.
    pub table: (f64, f64),
    pub wavelength_nm: f64,
    pub label: Option<String>,
    /// Extra catalog files, relative to the document.
    pub uses: Vec<String>,
    pub templates: Vec<Template>,
    pub instances: Vec<InstanceDecl>,
    /// SHA-256 of the source text, hex.
    pub source_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub default_type: Option<String>,
    pub params: Vec<(String, Expr)>,
    pub plate: Option<PlateDecl>,
    pub beams: Vec<BeamDecl>,
    pub elements: Vec<ElementDecl>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlateDecl {
    pub dx: Expr,
    pub dy: Expr,
    pub gap: Option<Expr>,
    pub dz: Option<Expr>,
    pub label: Option<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamDecl {
    pub name: String,
    pub x: Expr,
    pub y: Expr,
    pub angle: String,
    pub drill_width: Option<Expr>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Role(String),
    Component(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum MountChoice {
    /// Whatever the role or component specifies.
    Default,
    None,
    Id(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Distance,
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Place {
        beam: String,
        index: BeamIndex,
        constraint: Option<(ConstraintKind, Expr)>,
    },
    Part {
        x: Expr,
        y: Expr,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementDecl {
    pub name: String,
    pub target: Target,
    pub kind: ElementKind,
    pub angle: String,
    pub mount: MountChoice,
    pub block: Vec<BeamIndex>,
    /// Component parameter overrides (`p.<name>`), absolute millimetres.
    pub params: Vec<(String, Expr)>,
    /// First-mount parameter overrides (`m.<name>`).
    pub mount_params: Vec<(String, Expr)>,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub rows: u32,
    pub cols: u32,
    /// Inches.
    pub pitch: f64,
}

/// A plate instance (or a grid of them) on the table.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDecl {
    pub template: String,
    /// Table position in inches.
    pub x: f64,
    pub y: f64,
    /// Degrees.
    pub angle: f64,
    pub optic_type: Option<String>,
    pub name: Option<String>,
    pub params: Vec<(String, Expr)>,
    pub grid: Option<GridSpec>,
    pub line: usize,
}

/// Argument cursor over one command that tracks which keys were read.
struct Stmt<'a> {
    cmd: &'a Command,
    used: Vec<bool>,
}

impl<'a> Stmt<'a> {
    fn new(cmd: &'a Command) -> Result<Self, ParseError> {
        let mut seen = BTreeSet::new();
        for a in &cmd.args {
            if let Some(k) = &a.key {
                if !seen.insert(k.as_str()) {
                    return Err(ParseError::syntax(cmd.line, a.column, format!("duplicate key `{k}`")));
                }
            }
        }
        Ok(Stmt {
            cmd,
            used: vec![false; cmd.args.len()],
        })
    }

    fn err(&self, col: usize, m: impl Into<String>) -> ParseError {
        ParseError::syntax(self.cmd.line, col, m)
    }

    fn opt(&mut self, key: &str) -> Option<&'a Arg> {
        let i = self.cmd.args.iter().position(|a| a.key.as_deref() == Some(key))?;
        self.used[i] = true;
        Some(&self.cmd.args[i])
    }

    fn req(&mut self, key: &str) -> Result<&'a Arg, ParseError> {
        let kw = &self.cmd.keyword;
        let col = self.cmd.column;
        self.opt(key)
            .ok_or_else(|| ParseError::syntax(self.cmd.line, col, format!("`{kw}` needs `{key}=`")))
    }

    fn positional(&mut self) -> Vec<&'a Arg> {
        let mut out = Vec::new();
        for (i, a) in self.cmd.args.iter().enumerate() {
            if a.key.is_none() {
                self.used[i] = true;
                out.push(a);
            }
        }
        out
    }

    /// Unread keyed arguments, for statements that accept open-ended keys.
    fn rest(&mut self) -> Vec<&'a Arg> {
        let mut out = Vec::new();
        for (i, a) in self.cmd.args.iter().enumerate() {
            if !self.used[i] {
                self.used[i] = true;
                out.push(a);
            }
        }
        out
    }

    fn finish(self) -> Result<(), ParseError> {
        for (i, a) in self.cmd.args.iter().enumerate() {
            if self.used[i] {
                continue;
            }
            return Err(match &a.key {
                Some(k) => ParseError::UnknownKey {
                    line: self.cmd.line,
                    column: a.column,
                    key: k.clone(),
                    statement: self.cmd.keyword.clone(),
                },
                None => self.err(a.column, format!("unexpected argument `{}`", a.value.text())),
            });
        }
        Ok(())
    }

    fn expr(&self, a: &Arg) -> Result<Expr, ParseError> {
        match &a.value {
            Value::Raw(s) => Expr::parse(s).map_err(|e| self.err(a.column, e.to_string())),
            Value::Str(s) => Err(self.err(a.column, format!("expected a number or expression, found string \"{s}\""))),
        }
    }

    fn number(&self, a: &Arg) -> Result<f64, ParseError> {
        self.expr(a)?
            .eval(&Scope::standard())
            .map_err(|e| self.err(a.column, e.to_string()))
    }

    fn word(&self, a: &Arg) -> Result<String, ParseError> {
        match &a.value {
            Value::Raw(s) if s.chars().all(|c| c.is_ascii_alphanumeric() || "_-.:".contains(c)) => Ok(s.clone()),
            Value::Raw(s) => Err(self.err(a.column, format!("expected a name, found `{s}`"))),
            Value::Str(s) => Ok(s.clone()),
        }
    }

    fn string(&self, a: &Arg) -> String {
        a.value.text().to_string()
    }
}

/// Splits `(a, b, c)` at top-level commas.
fn tuple(s: &str) -> Option<Vec<String>> {
    let inner = s.strip_prefix('(')?.strip_suffix(')')?;
    let mut parts = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for c in inner.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    parts.push(cur);
    Some(parts.into_iter().map(|p| p.trim().to_string()).collect())
}

fn pose_tuple(st: &Stmt, a: &Arg) -> Result<(f64, f64, f64), ParseError> {
    let parts = tuple(a.value.text())
        .filter(|p| p.len() == 3)
        .ok_or_else(|| st.err(a.column, "expected `(x, y, angle)`"))?;
    let scope = Scope::standard();
    let mut v = [0.0; 3];
    for (k, p) in parts.iter().enumerate() {
        v[k] = Expr::parse(p)
            .and_then(|e| e.eval(&scope))
            .map_err(|e| st.err(a.column, e.to_string()))?;
    }
    Ok((v[0], v[1], v[2]))
}

fn overrides(st: &Stmt, args: &[&Arg]) -> Result<Vec<(String, Expr)>, ParseError> {
    args.iter()
        .map(|a| {
            let k = a.key.clone().ok_or_else(|| st.err(a.column, format!("unexpected argument `{}`", a.value.text())))?;
            if k.contains('.') {
                return Err(ParseError::UnknownKey {
                    line: st.cmd.line,
                    column: a.column,
                    key: k,
                    statement: st.cmd.keyword.clone(),
                });
            }
            Ok((k, st.expr(a)?))
        })
        .collect()
}

/// Parses `plate` and `grid` statements (everything after the keyword).
fn parse_instance(cmd: &Command) -> Result<InstanceDecl, ParseError> {
    let mut st = Stmt::new(cmd)?;
    let grid = if cmd.keyword == "grid" {
        let rows = st.req("rows")?;
        let cols = st.req("cols")?;
        let pitch = st.req("pitch")?;
        let count = |a: &Arg| -> Result<u32, ParseError> {
            let v = st.number(a)?;
            if v.fract() != 0.0 || !(1.0..=10_000.0).contains(&v) {
                return Err(st.err(a.column, format!("`{}` must be a whole number between 1 and 10000", a.key.as_deref().unwrap_or(""))));
            }
            Ok(v as u32)
        };
        let pitch_v = st.number(pitch)?;
        if !(pitch_v > 0.0) {
            return Err(st.err(pitch.column, "`pitch` must be positive"));
        }
        Some(GridSpec {
            rows: count(rows)?,
            cols: count(cols)?,
            pitch: pitch_v,
        })
    } else {
        None
    };
    let name = match st.opt("name") {
        Some(a) => Some(st.word(a)?),
        None => None,
    };
    let pos = st.positional();
    let mut it = pos.iter();
    let template = it
        .next()
        .ok_or_else(|| st.err(cmd.column, format!("`{}` needs a template name", cmd.keyword)))?;
    let template = st.word(template)?;
    match it.next() {
        Some(a) if a.value.text() == "at" => {}
        Some(a) => return Err(st.err(a.column, format!("expected `at`, found `{}`", a.value.text()))),
        None => return Err(st.err(cmd.column, "missing `at (x, y, angle)`")),
    }
    let p = it.next().ok_or_else(|| st.err(cmd.column, "missing `(x, y, angle)`"))?;
    let (x, y, angle) = pose_tuple(&st, p)?;
    let mut optic_type = None;
    if let Some(a) = it.next() {
        if a.value.text() != "with" {
            return Err(st.err(a.column, format!("expected `with`, found `{}`", a.value.text())));
        }
        let t = it.next().ok_or_else(|| st.err(a.column, "`with` needs an optic type"))?;
        optic_type = Some(st.word(t)?);
    }
    if let Some(a) = it.next() {
        return Err(st.err(a.column, format!("unexpected argument `{}`", a.value.text())));
    }
    let rest = st.rest();
    let params = overrides(&st, &rest)?;
    st.finish()?;
    Ok(InstanceDecl {
        template,
        x,
        y,
        angle,
        optic_type,
        name,
        params,
        grid,
        line: cmd.line,
    })
}

fn parse_index(st: &Stmt, a: &Arg) -> Result<BeamIndex, ParseError> {
    a.value.text().parse().map_err(|e: crate::beam::BeamIndexParseError| st.err(a.column, e.to_string()))
}

fn parse_element(cmd: &Command) -> Result<ElementDecl, ParseError> {
    let mut st = Stmt::new(cmd)?;
    let name = st.req("name")?;
    let name = st.word(name)?;
    let target = match (st.opt("role"), st.opt("component")) {
        (Some(r), None) => Target::Role(st.word(r)?),
        (None, Some(c)) => Target::Component(st.word(c)?),
        (Some(_), Some(c)) => return Err(st.err(c.column, "give either `role=` or `component=`, not both")),
        (None, None) => return Err(st.err(cmd.column, format!("`{}` needs `role=` or `component=`", cmd.keyword))),
    };
    let kind = if cmd.keyword == "place" {
        let beam = st.req("beam")?;
        let beam = st.word(beam)?;
        let index = match st.opt("index") {
            Some(a) => parse_index(&st, a)?,
            None => BeamIndex::ROOT,
        };
        let mut constraint = None;
        for (key, kind) in [("distance", ConstraintKind::Distance), ("x", ConstraintKind::X), ("y", ConstraintKind::Y)] {
            if let Some(a) = st.opt(key) {
                if constraint.is_some() {
                    return Err(st.err(a.column, "give at most one of `distance=`, `x=`, `y=`"));
                }
                constraint = Some((kind, st.expr(a)?));
            }
        }
        ElementKind::Place { beam, index, constraint }
    } else {
        let x = st.req("x")?;
        let y = st.req("y")?;
        ElementKind::Part {
            x: st.expr(x)?,
            y: st.expr(y)?,
        }
    };
    let angle = st.req("angle")?;
    let angle = st.string(angle);
    let mount = match st.opt("mount") {
        None => MountChoice::Default,
        Some(a) if a.value.text() == "none" => MountChoice::None,
        Some(a) => MountChoice::Id(st.word(a)?),
    };
    let mut block = Vec::new();
    if let Some(a) = st.opt("block") {
        for part in a.value.text().split(',') {
            block.push(part.trim().parse().map_err(|e: crate::beam::BeamIndexParseError| st.err(a.column, e.to_string()))?);
        }
    }
    let mut params = Vec::new();
    let mut mount_params = Vec::new();
    for a in st.rest() {
        let Some(k) = &a.key else {
            return Err(st.err(a.column, format!("unexpected argument `{}`", a.value.text())));
        };
        if let Some(p) = k.strip_prefix("p.").filter(|p| !p.is_empty()) {
            params.push((p.to_string(), st.expr(a)?));
        } else if let Some(m) = k.strip_prefix("m.").filter(|m| !m.is_empty()) {
            mount_params.push((m.to_string(), st.expr(a)?));
        } else {
            return Err(ParseError::UnknownKey {
                line: cmd.line,
                column: a.column,
                key: k.clone(),
                statement: cmd.keyword.clone(),
            });
        }
    }
    st.finish()?;
    Ok(ElementDecl {
        name,
        target,
        kind,
        angle,
        mount,
        block,
        params,
        mount_params,
        line: cmd.line,
    })
}

fn parse_template_line(t: &mut Template, cmd: &Command) -> Result<(), ParseError> {
    match cmd.keyword.as_str() {
        "param" => {
            let mut st = Stmt::new(cmd)?;
            let rest = st.rest();
            if rest.is_empty() {
                return Err(st.err(cmd.column, "`param` needs `name=value`"));
            }
            let ov = overrides(&st, &rest)?;
            st.finish()?;
            t.params.extend(ov);
        }
        "plate" => {
            let mut st = Stmt::new(cmd)?;
            if t.plate.is_some() {
                return Err(st.err(cmd.column, format!("template `{}` already has a plate", t.name)));
            }
            let dx = st.req("dx")?;
            let dy = st.req("dy")?;
            let decl = PlateDecl {
                dx: st.expr(dx)?,
                dy: st.expr(dy)?,
                gap: st.opt("gap").map(|a| st.expr(a)).transpose()?,
                dz: st.opt("dz").map(|a| st.expr(a)).transpose()?,
                label: st.opt("label").map(|a| st.string(a)),
                line: cmd.line,
            };
            st.finish()?;
            t.plate = Some(decl);
        }
        "beam" => {
            let mut st = Stmt::new(cmd)?;
            let name = st.req("name")?;
            let x = st.req("x")?;
            let y = st.req("y")?;
            let angle = st.req("angle")?;
            let decl = BeamDecl {
                name: st.word(name)?,
                x: st.expr(x)?,
                y: st.expr(y)?,
                angle: st.string(angle),
                drill_width: st.opt("drill_width").map(|a| st.expr(a)).transpose()?,
                line: cmd.line,
            };
            st.finish()?;
            t.beams.push(decl);
        }
        "place" | "part" => t.elements.push(parse_element(cmd)?),
        other => {
            return Err(ParseError::syntax(
                cmd.line,
                cmd.column,
                format!("unknown statement `{other}` inside a template (expected param, plate, beam, place, part or end)"),
            ))
        }
    }
    Ok(())
}

fn hex_sha256(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parses a layout document. Syntax errors carry line and column.
pub fn parse_document(text: &str) -> Result<LayoutDocument, ParseError> {
    let lines = lex(text)?;
    let mut doc = LayoutDocument {
        table: (0.0, 0.0),
        wavelength_nm: DEFAULT_WAVELENGTH_NM,
        label: None,
        uses: Vec::new(),
        templates: Vec::new(),
        instances: Vec::new(),
        source_sha256: hex_sha256(text),
    };
    let mut have_table = false;
    let mut open: Option<Template> = None;
    for l in &lines {
        let Line::Command(cmd) = l else { continue };
        if let Some(t) = open.as_mut() {
            if cmd.keyword == "end" {
                let st = Stmt::new(cmd)?;
                st.finish()?;
                let t = open.take().expect("open template");
                if t.plate.is_none() {
                    return Err(ParseError::syntax(t.line, 1, format!("template `{}` has no `plate` statement", t.name)));
                }
                doc.templates.push(t);
            } else {
                parse_template_line(t, cmd)?;
            }
            continue;
        }
        match cmd.keyword.as_str() {
            "table" => {
                let mut st = Stmt::new(cmd)?;
                if have_table {
                    return Err(st.err(cmd.column, "duplicate `table` statement"));
                }
                let dx = st.req("dx")?;
                let dy = st.req("dy")?;
                let (x, y) = (st.number(dx)?, st.number(dy)?);
                if !(x > 0.0 && y > 0.0) {
                    return Err(st.err(cmd.column, "table dimensions must be positive"));
                }
                st.finish()?;
                doc.table = (x, y);
                have_table = true;
            }
            "wavelength" => {
                let mut st = Stmt::new(cmd)?;
                let p = st.positional();
                let [a] = p.as_slice() else {
                    return Err(st.err(cmd.column, "`wavelength` takes one value in nm"));
                };
                let v = st.number(a)?;
                if !(v > 0.0) {
                    return Err(st.err(a.column, "wavelength must be positive"));
                }
                st.finish()?;
                doc.wavelength_nm = v;
            }
            "label" | "use" => {
                let mut st = Stmt::new(cmd)?;
                let p = st.positional();
                let [a] = p.as_slice() else {
                    return Err(st.err(cmd.column, format!("`{}` takes one quoted string", cmd.keyword)));
                };
                let Value::Str(s) = &a.value else {
                    return Err(st.err(a.column, "expected a quoted string"));
                };
                st.finish()?;
                if cmd.keyword == "label" {
                    doc.label = Some(s.clone());
                } else {
                    doc.uses.push(s.clone());
                }
            }
            "template" => {
                let mut st = Stmt::new(cmd)?;
                let default_type = match st.opt("default") {
                    Some(a) => Some(st.word(a)?),
                    None => None,
                };
                let p = st.positional();
                let [a] = p.as_slice() else {
                    return Err(st.err(cmd.column, "`template` takes one name"));
                };
                let name = st.word(a)?;
                st.finish()?;
                open = Some(Template {
                    name,
                    default_type,
                    params: Vec::new(),
                    plate: None,
                    beams: Vec::new(),
                    elements: Vec::new(),
                    line: cmd.line,
                });
            }
            "plate" | "grid" => doc.instances.push(parse_instance(cmd)?),
            "end" => return Err(ParseError::syntax(cmd.line, cmd.column, "`end` without `template`")),
            other => {
                return Err(ParseError::syntax(
                    cmd.line,
                    cmd.column,
                    format!("unknown statement `{other}`"),
                ))
            }
        }
    }
    if let Some(t) = open {
        return Err(ParseError::syntax(t.line, 1, format!("template `{}` is missing `end`", t.name)));
    }
    if !have_table {
        return Err(ParseError::EmptyTable);
    }
    Ok(doc)
}

/// Parses template definitions only (no table required).
pub fn parse_templates(text: &str) -> Result<Vec<Template>, ParseError> {
    let with_table = format!("table dx=1 dy=1\n{text}");
    let mut doc = parse_document(&with_table).map_err(|e| match e {
        ParseError::Syntax { line, column, message } => ParseError::Syntax {
            line: line - 1,
            column,
            message,
        },
        ParseError::UnknownKey {
            line,
            column,
            key,
            statement,
        } => ParseError::UnknownKey {
            line: line - 1,
            column,
            key,
            statement,
        },
        e => e,
    })?;
    Ok(std::mem::take(&mut doc.templates))
}

/// Expands a grid into individual instances at `start + (i, j) * pitch`,
/// named `<base>_r{i}_c{j}`.
pub fn generate_grid(template: &str, base_name: &str, grid: GridSpec, start: (f64, f64, f64)) -> Vec<InstanceDecl> {
    let mut out = Vec::with_capacity((grid.rows * grid.cols) as usize);
    for i in 0..grid.rows {
        for j in 0..grid.cols {
            out.push(InstanceDecl {
                template: template.to_string(),
                x: start.0 + i as f64 * grid.pitch,
                y: start.1 + j as f64 * grid.pitch,
                angle: start.2,
                optic_type: None,
                name: Some(format!("{base_name}_r{i}_c{j}")),
                params: Vec::new(),
                grid: None,
                line: 0,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_an_empty_table() {
        assert_eq!(parse_document(""), Err(ParseError::EmptyTable));
        assert_eq!(parse_document("# nothing\n\n"), Err(ParseError::EmptyTable));
    }

    #[test]
    fn minimal_document() {
        let d = parse_document("table dx=36 dy=22\nplate rb_sas at (20, 1, 90)\n").unwrap();
        assert_eq!(d.table, (36.0, 22.0));
        assert_eq!(d.instances.len(), 1);
        assert_eq!(d.instances[0].template, "rb_sas");
        assert_eq!((d.instances[0].x, d.instances[0].y, d.instances[0].angle), (20.0, 1.0, 90.0));
    }

    #[test]
    fn misspelled_key_names_line() {
        let src = "table dx=10 dy=10\ntemplate t\n  plate dx=inch dy=inch\n  beam name=b x=0 y=0 angle=up\n  place name=m role=mirror beam=b bean_index=0b1 distance=1 angle=up-right\nend\n";
        match parse_document(src) {
            Err(ParseError::UnknownKey { line, key, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(key, "bean_index");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn grid_names_and_positions() {
        let g = generate_grid("cell", "cell", GridSpec { rows: 2, cols: 3, pitch: 1.5 }, (1.0, 2.0, 0.0));
        assert_eq!(g.len(), 6);
        assert_eq!(g[5].name.as_deref(), Some("cell_r1_c2"));
        assert_eq!((g[5].x, g[5].y), (2.5, 5.0));
    }
}
