use std::collections::BTreeMap;

use toml::Value;

use super::catalog::{catalog_scope, flatten_numbers};
use super::{Catalog, CatalogError, ResolvedComponent};
use crate::beam::PlacementConstraint;
use crate::expr::Expr;

/// Concrete part chosen for one abstract role.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleBinding {
    pub component: String,
    pub params: BTreeMap<String, f64>,
    /// Replaces the component's own mount chain when present.
    pub mounts: Option<Vec<String>>,
    pub mount_params: BTreeMap<String, f64>,
    /// Placement used when the layout gives none, in absolute millimetres.
    pub placement: Option<PlacementConstraint>,
}

/// Scale factor, plate build-up and role bindings for one family of optics.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticTypeTable {
    pub name: String,
    pub file: String,
    pub scale: f64,
    pub base_dz: f64,
    /// Height of the beam plane above the plate top; negative when inset.
    pub optics_dz: f64,
    pub beam_width: f64,
    pub roles: BTreeMap<String, RoleBinding>,
}

/// A role resolved to a component, with any default placement.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRole {
    pub component: ResolvedComponent,
    pub placement: Option<PlacementConstraint>,
}

pub(crate) fn parse_optic_type(file: &str, name: &str, v: &Value) -> Result<OpticTypeTable, CatalogError> {
    let err = |m: String| CatalogError::Invalid {
        file: file.to_string(),
        id: name.to_string(),
        message: m,
    };
    let t = v.as_table().ok_or_else(|| err("optic type must be a table".into()))?;
    let scope = catalog_scope();
    let num = |key: &str| -> Result<f64, CatalogError> {
        let v = t.get(key).ok_or_else(|| err(format!("missing `{key}`")))?;
        let e = match v {
            Value::Integer(i) => Expr::Num(*i as f64),
            Value::Float(f) => Expr::Num(*f),
            Value::String(s) => Expr::parse(s).map_err(|e| err(format!("`{key}`: {e}")))?,
            _ => return Err(err(format!("`{key}` must be a number"))),
        };
        e.eval(&scope).map_err(|e| err(format!("`{key}`: {e}")))
    };
    let scale = num("scale")?;
    if !(scale > 0.0) {
        return Err(err("scale must be positive".into()));
    }
    let mut table = OpticTypeTable {
        name: name.to_string(),
        file: file.to_string(),
        scale,
        base_dz: num("base_dz")?,
        optics_dz: num("optics_dz")?,
        beam_width: num("beam_width")?,
        roles: BTreeMap::new(),
    };
    for (key, value) in t {
        if matches!(key.as_str(), "scale" | "base_dz" | "optics_dz" | "beam_width") {
            continue;
        }
        let r = value
            .as_table()
            .ok_or_else(|| err(format!("unknown key `{key}` (roles must be tables)")))?;
        let component = r
            .get("component")
            .and_then(Value::as_str)
            .ok_or_else(|| err(format!("role `{key}` needs a `component`")))?
            .to_string();
        let mut binding = RoleBinding {
            component,
            params: BTreeMap::new(),
            mounts: None,
            mount_params: BTreeMap::new(),
            placement: None,
        };
        for (rk, rv) in r {
            match rk.as_str() {
                "component" => {}
                "mount" => {
                    binding.mounts = Some(match rv {
                        Value::String(s) => vec![s.clone()],
                        Value::Array(a) => a
                            .iter()
                            .map(|m| {
                                m.as_str()
                                    .map(str::to_string)
                                    .ok_or_else(|| err(format!("role `{key}`: mount ids must be strings")))
                            })
                            .collect::<Result<_, _>>()?,
                        _ => return Err(err(format!("role `{key}`: `mount` must be a string or array"))),
                    })
                }
                "mount_args" => {
                    let mt = rv
                        .as_table()
                        .ok_or_else(|| err(format!("role `{key}`: mount_args must be a table")))?;
                    flatten_numbers("", mt, &mut binding.mount_params, &scope)
                        .map_err(|m| err(format!("role `{key}`: {m}")))?;
                }
                "x" | "y" | "distance" => {
                    let mut tmp = BTreeMap::new();
                    let mut single = toml::Table::new();
                    single.insert(rk.clone(), rv.clone());
                    flatten_numbers("", &single, &mut tmp, &scope).map_err(|m| err(format!("role `{key}`: {m}")))?;
                    let v = tmp[rk.as_str()];
                    if binding.placement.is_some() {
                        return Err(err(format!("role `{key}` has more than one placement")));
                    }
                    binding.placement = Some(match rk.as_str() {
                        "x" => PlacementConstraint::AbsX(v),
                        "y" => PlacementConstraint::AbsY(v),
                        _ => PlacementConstraint::Distance(v),
                    });
                }
                _ => {
                    let mut single = toml::Table::new();
                    single.insert(rk.clone(), rv.clone());
                    flatten_numbers("", &single, &mut binding.params, &scope)
                        .map_err(|m| err(format!("role `{key}`: {m}")))?;
                }
            }
        }
        table.roles.insert(key.clone(), binding);
    }
    Ok(table)
}

/// Looks up a role in an optic-type table and instantiates its component
/// with the table's overrides.
pub fn resolve_role(table: &OpticTypeTable, role: &str, catalog: &Catalog) -> Result<ResolvedRole, CatalogError> {
    let b = table.roles.get(role).ok_or_else(|| CatalogError::UnknownRole {
        optic_type: table.name.clone(),
        role: role.to_string(),
    })?;
    let component = catalog.resolve(&b.component, &b.params, b.mounts.as_deref(), &b.mount_params)?;
    Ok(ResolvedRole {
        component,
        placement: b.placement,
    })
}
