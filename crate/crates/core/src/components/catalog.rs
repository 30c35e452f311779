use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use super::optic_type::{parse_optic_type, OpticTypeTable};
use super::{
    CatalogError, ComponentSpec, Counterbore, DrillFeature, Footprint, HoleDepth, OpticalCenter, PocketDepth,
    ResolvedComponent, Side,
};
use crate::beam::OpticalBehavior;
use crate::expr::{Expr, Scope};
use crate::geometry::{Vec2, INCH};

const BUNDLED: [(&str, &str); 2] = [
    ("bundled:components.toml", include_str!("../../catalog/components.toml")),
    ("bundled:optic_types.toml", include_str!("../../catalog/optic_types.toml")),
];

/// Provenance of one catalog file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogSource {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
enum FootprintDef {
    Rect { width: Expr, depth: Expr, height: Expr },
    Disc { diameter: Expr, height: Expr },
}

#[derive(Debug, Clone, PartialEq)]
enum DrillDef {
    Hole {
        x: Expr,
        y: Expr,
        diameter: Expr,
        depth: Option<Expr>,
        counterbore: Option<(Expr, Expr, Side)>,
        thread: Option<String>,
    },
    Pocket {
        x: Expr,
        y: Expr,
        width: Expr,
        length: Expr,
        depth: Option<Expr>,
        tolerance: Expr,
    },
}

/// Parametric component definition as read from a catalog file.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentDef {
    pub id: String,
    pub description: String,
    pub file: String,
    pub params: BTreeMap<String, f64>,
    pub mount_chain: Vec<String>,
    footprint: FootprintDef,
    center: (Expr, Expr, Option<Expr>),
    aperture: Expr,
    behavior: Option<(String, BTreeMap<String, Expr>)>,
    drill: Vec<DrillDef>,
}

/// Scope used for every catalog expression.
pub(crate) fn catalog_scope() -> Scope {
    Scope::standard().with("gap", INCH / 8.0)
}

struct Ctx<'a> {
    file: &'a str,
    id: &'a str,
}

impl Ctx<'_> {
    fn err(&self, message: impl Into<String>) -> CatalogError {
        CatalogError::Invalid {
            file: self.file.to_string(),
            id: self.id.to_string(),
            message: message.into(),
        }
    }

    fn expr(&self, v: &Value, what: &str) -> Result<Expr, CatalogError> {
        match v {
            Value::Integer(i) => Ok(Expr::Num(*i as f64)),
            Value::Float(f) => Ok(Expr::Num(*f)),
            Value::Boolean(b) => Ok(Expr::Num(if *b { 1.0 } else { 0.0 })),
            Value::String(s) => Expr::parse(s).map_err(|e| self.err(format!("{what}: {e}"))),
            _ => Err(self.err(format!("{what} must be a number or expression"))),
        }
    }

    fn field(&self, t: &Table, key: &str, what: &str) -> Result<Expr, CatalogError> {
        let v = t.get(key).ok_or_else(|| self.err(format!("{what}: missing `{key}`")))?;
        self.expr(v, &format!("{what}.{key}"))
    }

    fn opt_field(&self, t: &Table, key: &str, what: &str) -> Result<Option<Expr>, CatalogError> {
        t.get(key).map(|v| self.expr(v, &format!("{what}.{key}"))).transpose()
    }

    fn table<'v>(&self, v: &'v Value, what: &str) -> Result<&'v Table, CatalogError> {
        v.as_table().ok_or_else(|| self.err(format!("{what} must be a table")))
    }

    fn check_keys(&self, t: &Table, allowed: &[&str], what: &str) -> Result<(), CatalogError> {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(self.err(format!("{what}: unknown key `{k}`")));
            }
        }
        Ok(())
    }
}

/// Flattens nested numeric tables into dotted names.
pub(crate) fn flatten_numbers(
    prefix: &str,
    t: &Table,
    out: &mut BTreeMap<String, f64>,
    scope: &Scope,
) -> Result<(), String> {
    for (k, v) in t {
        let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(inner) => flatten_numbers(&name, inner, out, scope)?,
            Value::Integer(i) => {
                out.insert(name, *i as f64);
            }
            Value::Float(f) => {
                out.insert(name, *f);
            }
            Value::Boolean(b) => {
                out.insert(name, if *b { 1.0 } else { 0.0 });
            }
            Value::String(s) => {
                let v = Expr::parse(s)
                    .and_then(|e| e.eval(scope))
                    .map_err(|e| format!("`{name}`: {e}"))?;
                out.insert(name, v);
            }
            _ => return Err(format!("`{name}` must be a number")),
        }
    }
    Ok(())
}

fn parse_component(file: &str, id: &str, v: &Value) -> Result<ComponentDef, CatalogError> {
    let cx = Ctx { file, id };
    let t = cx.table(v, "component")?;
    cx.check_keys(
        t,
        &[
            "description",
            "params",
            "footprint",
            "optical_center",
            "aperture",
            "behavior",
            "drill",
            "mount_chain",
        ],
        "component",
    )?;
    let description = t
        .get("description")
        .and_then(Value::as_str)
        .ok_or_else(|| cx.err("missing string `description`"))?
        .to_string();
    let mut params = BTreeMap::new();
    if let Some(p) = t.get("params") {
        flatten_numbers("", cx.table(p, "params")?, &mut params, &catalog_scope()).map_err(|m| cx.err(m))?;
    }
    let fp = cx.table(t.get("footprint").ok_or_else(|| cx.err("missing `footprint`"))?, "footprint")?;
    let footprint = match fp.get("shape").and_then(Value::as_str) {
        Some("rect") => {
            cx.check_keys(fp, &["shape", "width", "depth", "height"], "footprint")?;
            FootprintDef::Rect {
                width: cx.field(fp, "width", "footprint")?,
                depth: cx.field(fp, "depth", "footprint")?,
                height: cx.field(fp, "height", "footprint")?,
            }
        }
        Some("disc") => {
            cx.check_keys(fp, &["shape", "diameter", "height"], "footprint")?;
            FootprintDef::Disc {
                diameter: cx.field(fp, "diameter", "footprint")?,
                height: cx.field(fp, "height", "footprint")?,
            }
        }
        _ => return Err(cx.err("footprint.shape must be `rect` or `disc`")),
    };
    let center = match t.get("optical_center") {
        Some(v) => {
            let c = cx.table(v, "optical_center")?;
            cx.check_keys(c, &["x", "y", "height"], "optical_center")?;
            (
                cx.opt_field(c, "x", "optical_center")?.unwrap_or(Expr::Num(0.0)),
                cx.opt_field(c, "y", "optical_center")?.unwrap_or(Expr::Num(0.0)),
                cx.opt_field(c, "height", "optical_center")?,
            )
        }
        None => (Expr::Num(0.0), Expr::Num(0.0), None),
    };
    let aperture = cx.opt_field(t, "aperture", "component")?.unwrap_or(Expr::Num(0.0));
    let behavior = match t.get("behavior") {
        None => None,
        Some(Value::String(kind)) => Some((kind.clone(), BTreeMap::new())),
        Some(v) => {
            let b = cx.table(v, "behavior")?;
            let kind = b
                .get("kind")
                .and_then(Value::as_str)
                .ok_or_else(|| cx.err("behavior.kind missing"))?
                .to_string();
            let mut fields = BTreeMap::new();
            for (k, fv) in b {
                if k != "kind" {
                    fields.insert(k.clone(), cx.expr(fv, &format!("behavior.{k}"))?);
                }
            }
            Some((kind, fields))
        }
    };
    let mut drill = Vec::new();
    if let Some(d) = t.get("drill") {
        let arr = d.as_array().ok_or_else(|| cx.err("drill must be an array of tables"))?;
        for item in arr {
            let f = cx.table(item, "drill entry")?;
            let kind = f.get("type").and_then(Value::as_str).unwrap_or("");
            let x = cx.opt_field(f, "x", "drill")?.unwrap_or(Expr::Num(0.0));
            let y = cx.opt_field(f, "y", "drill")?.unwrap_or(Expr::Num(0.0));
            match kind {
                "hole" => {
                    cx.check_keys(
                        f,
                        &["type", "x", "y", "diameter", "depth", "counterbore", "thread"],
                        "drill hole",
                    )?;
                    let depth = match f.get("depth") {
                        None => None,
                        Some(Value::String(s)) if s == "through" => None,
                        Some(v) => Some(cx.expr(v, "drill.depth")?),
                    };
                    let counterbore = match f.get("counterbore") {
                        None => None,
                        Some(cv) => {
                            let c = cx.table(cv, "counterbore")?;
                            cx.check_keys(c, &["diameter", "depth", "side"], "counterbore")?;
                            let side = match c.get("side").and_then(Value::as_str).unwrap_or("bottom") {
                                "top" => Side::Top,
                                "bottom" => Side::Bottom,
                                other => return Err(cx.err(format!("counterbore.side `{other}`"))),
                            };
                            Some((
                                cx.field(c, "diameter", "counterbore")?,
                                cx.field(c, "depth", "counterbore")?,
                                side,
                            ))
                        }
                    };
                    drill.push(DrillDef::Hole {
                        x,
                        y,
                        diameter: cx.field(f, "diameter", "drill")?,
                        depth,
                        counterbore,
                        thread: f.get("thread").and_then(Value::as_str).map(str::to_string),
                    });
                }
                "pocket" => {
                    cx.check_keys(
                        f,
                        &["type", "x", "y", "width", "length", "depth", "tolerance"],
                        "drill pocket",
                    )?;
                    let depth = match f.get("depth") {
                        None => None,
                        Some(Value::String(s)) if s == "auto" => None,
                        Some(v) => Some(cx.expr(v, "drill.depth")?),
                    };
                    drill.push(DrillDef::Pocket {
                        x,
                        y,
                        width: cx.field(f, "width", "drill")?,
                        length: cx.field(f, "length", "drill")?,
                        depth,
                        tolerance: cx.opt_field(f, "tolerance", "drill")?.unwrap_or(Expr::Num(0.0)),
                    });
                }
                other => return Err(cx.err(format!("unknown drill type `{other}`"))),
            }
        }
    }
    let mount_chain = match t.get("mount_chain") {
        None => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| cx.err("mount_chain entries must be strings"))
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(cx.err("mount_chain must be an array")),
    };
    let def = ComponentDef {
        id: id.to_string(),
        description,
        file: file.to_string(),
        params,
        mount_chain,
        footprint,
        center,
        aperture,
        behavior,
        drill,
    };
    // Defaults must evaluate.
    def.instantiate(&BTreeMap::new()).map_err(|e| cx.err(e.to_string()))?;
    Ok(def)
}

impl ComponentDef {
    /// Evaluates the definition with parameter overrides.
    pub fn instantiate(&self, overrides: &BTreeMap<String, f64>) -> Result<ComponentSpec, CatalogError> {
        let mut params = self.params.clone();
        for (k, v) in overrides {
            if !params.contains_key(k) {
                return Err(CatalogError::UnknownParam {
                    component: self.id.clone(),
                    param: k.clone(),
                });
            }
            params.insert(k.clone(), *v);
        }
        let mut scope = catalog_scope();
        for (k, v) in &params {
            scope.set(k, *v);
        }
        let ev = |e: &Expr| {
            e.eval(&scope).map_err(|source| CatalogError::Expr {
                component: self.id.clone(),
                source,
            })
        };
        let footprint = match &self.footprint {
            FootprintDef::Rect { width, depth, height } => Footprint::Rect {
                width: ev(width)?,
                depth: ev(depth)?,
                height: ev(height)?,
            },
            FootprintDef::Disc { diameter, height } => Footprint::Disc {
                diameter: ev(diameter)?,
                height: ev(height)?,
            },
        };
        let optical_center = OpticalCenter {
            offset: Vec2::new(ev(&self.center.0)?, ev(&self.center.1)?),
            height: self.center.2.as_ref().map(&ev).transpose()?,
        };
        let behavior = match &self.behavior {
            None => None,
            Some((kind, fields)) => Some(self.behavior_from(kind, fields, &ev)?),
        };
        let mut drill = Vec::new();
        for d in &self.drill {
            drill.push(match d {
                DrillDef::Hole {
                    x,
                    y,
                    diameter,
                    depth,
                    counterbore,
                    thread,
                } => DrillFeature::Hole {
                    at: Vec2::new(ev(x)?, ev(y)?),
                    diameter: ev(diameter)?,
                    depth: match depth {
                        None => HoleDepth::Through,
                        Some(e) => HoleDepth::Blind(ev(e)?),
                    },
                    counterbore: match counterbore {
                        None => None,
                        Some((d, z, side)) => Some(Counterbore {
                            diameter: ev(d)?,
                            depth: ev(z)?,
                            side: *side,
                        }),
                    },
                    thread: thread.clone(),
                },
                DrillDef::Pocket {
                    x,
                    y,
                    width,
                    length,
                    depth,
                    tolerance,
                } => DrillFeature::Pocket {
                    at: Vec2::new(ev(x)?, ev(y)?),
                    width: ev(width)?,
                    length: ev(length)?,
                    depth: match depth {
                        None => PocketDepth::Auto,
                        Some(e) => PocketDepth::Fixed(ev(e)?),
                    },
                    tolerance: ev(tolerance)?,
                },
            });
        }
        Ok(ComponentSpec {
            id: self.id.clone(),
            description: self.description.clone(),
            params,
            footprint,
            optical_center,
            aperture: ev(&self.aperture)?,
            behavior,
            drill,
            mount_chain: self.mount_chain.clone(),
        })
    }

    fn behavior_from(
        &self,
        kind: &str,
        fields: &BTreeMap<String, Expr>,
        ev: &dyn Fn(&Expr) -> Result<f64, CatalogError>,
    ) -> Result<OpticalBehavior, CatalogError> {
        let invalid = |m: String| CatalogError::Invalid {
            file: self.file.clone(),
            id: self.id.clone(),
            message: m,
        };
        let allowed: &[&str] = match kind {
            "mirror" | "splitter" | "sink" | "inert" | "iris" => &[],
            "thin_lens" => &["focal_length"],
            "aom" => &["deflection", "rf_frequency", "order", "pass_zeroth"],
            "grating" => &["groove_density", "order", "pass_zeroth"],
            other => return Err(invalid(format!("unknown behavior kind `{other}`"))),
        };
        for k in fields.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(invalid(format!("behavior `{kind}` has no field `{k}`")));
            }
        }
        let get = |k: &str| -> Result<f64, CatalogError> {
            let e = fields
                .get(k)
                .ok_or_else(|| invalid(format!("behavior `{kind}` needs `{k}`")))?;
            ev(e)
        };
        let get_or = |k: &str, d: f64| -> Result<f64, CatalogError> {
            match fields.get(k) {
                Some(e) => ev(e),
                None => Ok(d),
            }
        };
        Ok(match kind {
            "mirror" => OpticalBehavior::Mirror,
            "splitter" => OpticalBehavior::Splitter,
            "sink" => OpticalBehavior::Sink,
            "inert" => OpticalBehavior::Inert,
            "iris" => OpticalBehavior::Iris {
                blocked: BTreeSet::new(),
            },
            "thin_lens" => {
                let f = get("focal_length")?;
                if f == 0.0 {
                    return Err(invalid("focal_length must be non-zero".into()));
                }
                OpticalBehavior::ThinLens { focal_length: f }
            }
            "aom" => OpticalBehavior::Aom {
                deflection: get("deflection")?,
                rf_frequency: get("rf_frequency")?,
                order: get_or("order", 1.0)?.round() as i32,
                pass_zeroth: get_or("pass_zeroth", 0.0)? != 0.0,
            },
            _ => OpticalBehavior::Grating {
                groove_density: get("groove_density")?,
                order: get_or("order", 1.0)?.round() as i32,
                pass_zeroth: get_or("pass_zeroth", 0.0)? != 0.0,
            },
        })
    }
}

/// Components and optic-type tables from one or more catalog files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    components: BTreeMap<String, ComponentDef>,
    optic_types: BTreeMap<String, OpticTypeTable>,
    sources: Vec<CatalogSource>,
}

fn span_to_line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, col)
}

impl Catalog {
    /// Parses one catalog file without cross-file validation.
    pub fn parse_source(name: &str, text: &str) -> Result<Catalog, CatalogError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| {
            let (line, column) = e.span().map_or((1, 1), |s| span_to_line_col(text, s.start));
            CatalogError::Parse {
                file: name.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        let mut cat = Catalog {
            sources: vec![CatalogSource {
                name: name.to_string(),
                sha256: hex_sha256(text.as_bytes()),
            }],
            ..Default::default()
        };
        for (section, v) in &root {
            let t = v.as_table().ok_or_else(|| CatalogError::Parse {
                file: name.to_string(),
                line: 1,
                column: 1,
                message: format!("top-level key `{section}` must be a table"),
            })?;
            match section.as_str() {
                "component" => {
                    for (id, def) in t {
                        cat.components.insert(id.clone(), parse_component(name, id, def)?);
                    }
                }
                "optic_type" => {
                    for (id, def) in t {
                        cat.optic_types.insert(id.clone(), parse_optic_type(name, id, def)?);
                    }
                }
                other => {
                    return Err(CatalogError::Invalid {
                        file: name.to_string(),
                        id: other.to_string(),
                        message: "unknown section (expected `component` or `optic_type`)".into(),
                    })
                }
            }
        }
        Ok(cat)
    }

    /// Adds another catalog's entries; ids must not collide.
    pub fn merge(&mut self, other: Catalog) -> Result<(), CatalogError> {
        for (id, def) in other.components {
            if let Some(first) = self.components.get(&id) {
                return Err(CatalogError::Duplicate {
                    kind: "component",
                    id,
                    first: first.file.clone(),
                    second: def.file,
                });
            }
            self.components.insert(id, def);
        }
        for (id, t) in other.optic_types {
            if let Some(first) = self.optic_types.get(&id) {
                return Err(CatalogError::Duplicate {
                    kind: "optic type",
                    id,
                    first: first.file.clone(),
                    second: t.file,
                });
            }
            self.optic_types.insert(id, t);
        }
        self.sources.extend(other.sources);
        Ok(())
    }

    /// Layers another catalog on top: its entries replace same-id entries.
    pub fn overlay(&mut self, other: Catalog) {
        self.components.extend(other.components);
        self.optic_types.extend(other.optic_types);
        self.sources.extend(other.sources);
    }

    /// Builds and validates a catalog from in-memory sources.
    pub fn from_sources(sources: &[(&str, &str)]) -> Result<Catalog, CatalogError> {
        let mut cat = Catalog::default();
        for (name, text) in sources {
            cat.merge(Catalog::parse_source(name, text)?)?;
        }
        cat.validate()?;
        Ok(cat)
    }

    /// The catalog shipped with the library.
    pub fn bundled() -> Catalog {
        Catalog::from_sources(&BUNDLED).expect("bundled catalog is valid")
    }

    /// Cross-reference checks: mount chains resolve and are acyclic, and
    /// every optic-type role names a known component.
    pub fn validate(&self) -> Result<(), CatalogError> {
        for def in self.components.values() {
            for m in &def.mount_chain {
                if !self.components.contains_key(m) {
                    return Err(CatalogError::DanglingMount {
                        component: def.id.clone(),
                        mount: m.clone(),
                    });
                }
            }
        }
        for def in self.components.values() {
            self.resolve(&def.id, &BTreeMap::new(), None, &BTreeMap::new())?;
        }
        for t in self.optic_types.values() {
            for role in t.roles.keys() {
                super::resolve_role(t, role, self)?;
            }
        }
        Ok(())
    }

    pub fn component(&self, id: &str) -> Option<&ComponentDef> {
        self.components.get(id)
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentDef> {
        self.components.values()
    }

    pub fn optic_type(&self, id: &str) -> Option<&OpticTypeTable> {
        self.optic_types.get(id)
    }

    pub fn optic_types(&self) -> impl Iterator<Item = &OpticTypeTable> {
        self.optic_types.values()
    }

    pub fn sources(&self) -> &[CatalogSource] {
        &self.sources
    }

    /// Registers a definition built in code (mesh imports).
    pub fn insert(&mut self, def: ComponentDef) -> Result<(), CatalogError> {
        let mut single = Catalog::default();
        single.components.insert(def.id.clone(), def);
        self.merge(single)
    }

    /// Component with default parameters.
    pub fn get(&self, id: &str) -> Result<ComponentSpec, CatalogError> {
        self.instantiate(id, &BTreeMap::new())
    }

    pub fn instantiate(&self, id: &str, params: &BTreeMap<String, f64>) -> Result<ComponentSpec, CatalogError> {
        self.components
            .get(id)
            .ok_or_else(|| CatalogError::UnknownComponent(id.to_string()))?
            .instantiate(params)
    }

    /// Instantiates an optic and expands its mount chain. `mounts` replaces
    /// the optic's own chain; `mount_params` apply to the first mount.
    pub fn resolve(
        &self,
        id: &str,
        params: &BTreeMap<String, f64>,
        mounts: Option<&[String]>,
        mount_params: &BTreeMap<String, f64>,
    ) -> Result<ResolvedComponent, CatalogError> {
        let optic = self.instantiate(id, params)?;
        let chain: Vec<String> = mounts.map(<[String]>::to_vec).unwrap_or_else(|| optic.mount_chain.clone());
        let mut out = Vec::new();
        let mut seen = BTreeSet::from([id.to_string()]);
        for (i, m) in chain.iter().enumerate() {
            let p = if i == 0 { mount_params.clone() } else { BTreeMap::new() };
            self.expand_mount(m, &p, &mut seen, &mut out)?;
        }
        Ok(ResolvedComponent { optic, mounts: out })
    }

    fn expand_mount(
        &self,
        id: &str,
        params: &BTreeMap<String, f64>,
        seen: &mut BTreeSet<String>,
        out: &mut Vec<ComponentSpec>,
    ) -> Result<(), CatalogError> {
        if !seen.insert(id.to_string()) {
            return Err(CatalogError::MountCycle(id.to_string()));
        }
        let spec = self.instantiate(id, params)?;
        let inner = spec.mount_chain.clone();
        out.push(spec);
        for m in &inner {
            self.expand_mount(m, &BTreeMap::new(), seen, out)?;
        }
        Ok(())
    }
}

pub(crate) fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads and validates catalog files. Later files may not redefine ids
/// from earlier ones.
pub fn load_catalog<P: AsRef<Path>>(paths: &[P]) -> Result<Catalog, CatalogError> {
    let cat = read_catalog_files(paths)?;
    cat.validate()?;
    Ok(cat)
}

fn read_catalog_files<P: AsRef<Path>>(paths: &[P]) -> Result<Catalog, CatalogError> {
    let mut cat = Catalog::default();
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| CatalogError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        })?;
        cat.merge(Catalog::parse_source(&p.display().to_string(), &text)?)?;
    }
    Ok(cat)
}

/// The bundled catalog overlaid by each layer in turn, so entries in later
/// layers win. Files within one layer may not share ids.
pub fn layered_catalog<P: AsRef<Path>>(layers: &[Vec<P>]) -> Result<Catalog, CatalogError> {
    let mut cat = Catalog::bundled();
    for layer in layers {
        cat.overlay(read_catalog_files(layer)?);
    }
    cat.validate()?;
    Ok(cat)
}

impl ComponentDef {
    /// Builds a definition from already evaluated values.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fixed(
        id: &str,
        description: &str,
        file: &str,
        footprint: Footprint,
        center: OpticalCenter,
        aperture: f64,
        behavior: Option<&str>,
        drill: Vec<DrillFeature>,
    ) -> ComponentDef {
        let fp = match footprint {
            Footprint::Rect { width, depth, height } => FootprintDef::Rect {
                width: Expr::Num(width),
                depth: Expr::Num(depth),
                height: Expr::Num(height),
            },
            Footprint::Disc { diameter, height } => FootprintDef::Disc {
                diameter: Expr::Num(diameter),
                height: Expr::Num(height),
            },
        };
        let drill = drill
            .into_iter()
            .filter_map(|d| match d {
                DrillFeature::Hole {
                    at,
                    diameter,
                    depth,
                    counterbore,
                    thread,
                } => Some(DrillDef::Hole {
                    x: Expr::Num(at.x),
                    y: Expr::Num(at.y),
                    diameter: Expr::Num(diameter),
                    depth: match depth {
                        HoleDepth::Through => None,
                        HoleDepth::Blind(z) => Some(Expr::Num(z)),
                    },
                    counterbore: counterbore.map(|c| (Expr::Num(c.diameter), Expr::Num(c.depth), c.side)),
                    thread,
                }),
                DrillFeature::Pocket {
                    at,
                    width,
                    length,
                    depth,
                    tolerance,
                } => Some(DrillDef::Pocket {
                    x: Expr::Num(at.x),
                    y: Expr::Num(at.y),
                    width: Expr::Num(width),
                    length: Expr::Num(length),
                    depth: match depth {
                        PocketDepth::Auto => None,
                        PocketDepth::Fixed(z) => Some(Expr::Num(z)),
                    },
                    tolerance: Expr::Num(tolerance),
                }),
                DrillFeature::Channel { .. } => None,
            })
            .collect();
        ComponentDef {
            id: id.to_string(),
            description: description.to_string(),
            file: file.to_string(),
            params: BTreeMap::new(),
            mount_chain: Vec::new(),
            footprint: fp,
            center: (
                Expr::Num(center.offset.x),
                Expr::Num(center.offset.y),
                center.height.map(Expr::Num),
            ),
            aperture: Expr::Num(aperture),
            behavior: behavior.map(|k| (k.to_string(), BTreeMap::new())),
            drill,
        }
    }
}
