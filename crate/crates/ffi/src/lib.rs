//! C ABI for the beamplan layout compiler.
//!
//! Catalogs and scenes are opaque handles created and released through this
//! API. Every fallible call returns a [`BpStatus`]; on failure the message
//! is available from [`bp_last_error`] on the same thread. Strings and byte
//! buffers handed out must be released with [`bp_string_free`] and
//! [`bp_bytes_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use beamplan::beam::littrow_angle;
use beamplan::components::{layered_catalog, Catalog, CatalogError};
use beamplan::export::{bom_csv, plate_stl};
use beamplan::layout::{compile, load_document, parse_document, LoadError, Scene};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The layout document failed to parse.
    Parse = 3,
    /// A catalog failed to load or validate.
    Catalog = 4,
    /// A file could not be read.
    Io = 5,
    /// The request is well formed but cannot be satisfied.
    Invalid = 6,
    /// An id or index does not exist.
    NotFound = 7,
    /// The library panicked; the handle arguments should be discarded.
    Panic = 8,
}

/// Opaque component catalog.
pub struct BpCatalog {
    inner: Catalog,
}

/// Opaque compiled scene.
pub struct BpScene {
    inner: Scene,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(BpStatus, String);

impl Failure {
    fn new(status: BpStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        let status = match e {
            CatalogError::Io { .. } => BpStatus::Io,
            _ => BpStatus::Catalog,
        };
        Failure(status, e.to_string())
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Parse { .. } => Failure(BpStatus::Parse, e.to_string()),
            LoadError::Io { .. } => Failure(BpStatus::Io, e.to_string()),
            LoadError::Catalog(c) => c.into(),
        }
    }
}

/// Runs `f`, recording the error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BpStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            BpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(BpStatus::NullArgument, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(BpStatus::InvalidUtf8, format!("`{name}`: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(BpStatus::NullArgument, format!("`{name}` is null")))
}

unsafe fn out_arg<T>(p: *mut T, name: &str) -> Result<&mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(BpStatus::NullArgument, format!("`{name}` is null")))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn catalog_or_bundled(cat: *const BpCatalog) -> Catalog {
    // SAFETY: callers pass either null or a live handle.
    unsafe { cat.as_ref() }.map_or_else(Catalog::bundled, |c| c.inner.clone())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn bp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn bp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by the library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a byte buffer returned by the library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bp_bytes_free(data: *mut u8, len: usize) {
    if !data.is_null() {
        drop(Box::from_raw(std::ptr::slice_from_raw_parts_mut(data, len)));
    }
}

/// Creates a handle to the bundled catalog.
#[no_mangle]
pub unsafe extern "C" fn bp_catalog_bundled(out: *mut *mut BpCatalog) -> BpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(BpCatalog {
            inner: Catalog::bundled(),
        }));
        Ok(())
    })
}

/// Loads the bundled catalog overlaid by `count` catalog files; later
/// files win over the bundled entries.
#[no_mangle]
pub unsafe extern "C" fn bp_catalog_load(paths: *const *const c_char, count: usize, out: *mut *mut BpCatalog) -> BpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mut files = Vec::with_capacity(count);
        if count > 0 {
            if paths.is_null() {
                return Err(Failure::new(BpStatus::NullArgument, "`paths` is null"));
            }
            for i in 0..count {
                files.push(PathBuf::from(str_arg(*paths.add(i), "paths[i]")?));
            }
        }
        let inner = layered_catalog(&[files])?;
        *out = Box::into_raw(Box::new(BpCatalog { inner }));
        Ok(())
    })
}

/// Releases a catalog handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bp_catalog_free(catalog: *mut BpCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Number of component definitions in the catalog.
#[no_mangle]
pub unsafe extern "C" fn bp_catalog_component_count(catalog: *const BpCatalog, out: *mut usize) -> BpStatus {
    guard(|| {
        let c = ref_arg(catalog, "catalog")?;
        *out_arg(out, "out")? = c.inner.components().count();
        Ok(())
    })
}

/// One component with default parameters as pretty JSON.
#[no_mangle]
pub unsafe extern "C" fn bp_catalog_component_json(
    catalog: *const BpCatalog,
    id: *const c_char,
    out: *mut *mut c_char,
) -> BpStatus {
    guard(|| {
        let c = ref_arg(catalog, "catalog")?;
        let id = str_arg(id, "id")?;
        let out = out_arg(out, "out")?;
        let spec = c.inner.get(id).map_err(|e| match e {
            CatalogError::UnknownComponent(_) => Failure::new(BpStatus::NotFound, e.to_string()),
            e => e.into(),
        })?;
        let json = serde_json::to_string_pretty(&spec).map_err(|e| Failure::new(BpStatus::Invalid, e.to_string()))?;
        *out = to_c_string(json);
        Ok(())
    })
}

/// Compiles layout source text. `catalog` may be null for the bundled
/// catalog. Documents with `use` statements need [`bp_compile_file`] so
/// the catalog paths can be resolved. Diagnostics do not make the call
/// fail; inspect them through the scene.
#[no_mangle]
pub unsafe extern "C" fn bp_compile(source: *const c_char, catalog: *const BpCatalog, out: *mut *mut BpScene) -> BpStatus {
    guard(|| {
        let text = str_arg(source, "source")?;
        let out = out_arg(out, "out")?;
        let doc = parse_document(text).map_err(|e| Failure::new(BpStatus::Parse, e.to_string()))?;
        if let Some(u) = doc.uses.first() {
            return Err(Failure::new(
                BpStatus::Invalid,
                format!("`use \"{u}\"` needs a document path; call bp_compile_file"),
            ));
        }
        let scene = compile(&doc, &catalog_or_bundled(catalog));
        *out = Box::into_raw(Box::new(BpScene { inner: scene }));
        Ok(())
    })
}

/// Compiles a layout file, resolving its `use` catalogs relative to it.
#[no_mangle]
pub unsafe extern "C" fn bp_compile_file(path: *const c_char, catalog: *const BpCatalog, out: *mut *mut BpScene) -> BpStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        let (doc, cat) = load_document(Path::new(path), &catalog_or_bundled(catalog))?;
        let scene = compile(&doc, &cat);
        *out = Box::into_raw(Box::new(BpScene { inner: scene }));
        Ok(())
    })
}

/// Releases a scene handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bp_scene_free(scene: *mut BpScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Plate, error-diagnostic and warning-diagnostic counts. Any output
/// pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn bp_scene_counts(
    scene: *const BpScene,
    plates: *mut usize,
    errors: *mut usize,
    warnings: *mut usize,
) -> BpStatus {
    guard(|| {
        let s = &ref_arg(scene, "scene")?.inner;
        if let Some(p) = plates.as_mut() {
            *p = s.plates.len();
        }
        if let Some(e) = errors.as_mut() {
            *e = s.error_count();
        }
        if let Some(w) = warnings.as_mut() {
            *w = s.warning_count();
        }
        Ok(())
    })
}

/// Diagnostics as text, one `severity code subject message` per line.
#[no_mangle]
pub unsafe extern "C" fn bp_scene_diagnostics(scene: *const BpScene, out: *mut *mut c_char) -> BpStatus {
    guard(|| {
        let s = &ref_arg(scene, "scene")?.inner;
        let out = out_arg(out, "out")?;
        *out = to_c_string(s.diagnostics.iter().map(|d| format!("{d}\n")).collect());
        Ok(())
    })
}

/// Name of plate `index`.
#[no_mangle]
pub unsafe extern "C" fn bp_scene_plate_name(scene: *const BpScene, index: usize, out: *mut *mut c_char) -> BpStatus {
    guard(|| {
        let s = &ref_arg(scene, "scene")?.inner;
        let out = out_arg(out, "out")?;
        let p = plate(s, index)?;
        *out = to_c_string(p.name.clone());
        Ok(())
    })
}

fn plate(s: &Scene, index: usize) -> Result<&beamplan::baseplate::Plate, Failure> {
    s.plates.get(index).ok_or_else(|| {
        Failure::new(
            BpStatus::NotFound,
            format!("plate index {index} out of range ({} plates)", s.plates.len()),
        )
    })
}

/// Canonical JSON dump of the scene.
#[no_mangle]
pub unsafe extern "C" fn bp_scene_dump_json(scene: *const BpScene, out: *mut *mut c_char) -> BpStatus {
    guard(|| {
        let s = &ref_arg(scene, "scene")?.inner;
        *out_arg(out, "out")? = to_c_string(s.dump());
        Ok(())
    })
}

/// Bill of materials CSV.
#[no_mangle]
pub unsafe extern "C" fn bp_scene_bom_csv(scene: *const BpScene, out: *mut *mut c_char) -> BpStatus {
    guard(|| {
        let s = &ref_arg(scene, "scene")?.inner;
        *out_arg(out, "out")? = to_c_string(bom_csv(s));
        Ok(())
    })
}

/// Binary STL of plate `index`, released with [`bp_bytes_free`].
#[no_mangle]
pub unsafe extern "C" fn bp_scene_plate_stl(
    scene: *const BpScene,
    index: usize,
    data: *mut *mut u8,
    len: *mut usize,
) -> BpStatus {
    guard(|| {
        let s = &ref_arg(scene, "scene")?.inner;
        let data = out_arg(data, "data")?;
        let len = out_arg(len, "len")?;
        let bytes = plate_stl(plate(s, index)?).map_err(|e| Failure::new(BpStatus::Invalid, e.to_string()))?;
        let boxed = bytes.into_boxed_slice();
        *len = boxed.len();
        *data = Box::into_raw(boxed).cast();
        Ok(())
    })
}

/// Littrow angle in degrees from the grating normal.
#[no_mangle]
pub unsafe extern "C" fn bp_littrow_angle(wavelength_nm: f64, groove_density: f64, order: i32, out: *mut f64) -> BpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let a = littrow_angle(wavelength_nm, groove_density, order)
            .map_err(|e| Failure::new(BpStatus::Invalid, e.to_string()))?;
        *out = a.to_degrees();
        Ok(())
    })
}
