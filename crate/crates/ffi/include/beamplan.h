#ifndef BEAMPLAN_H
#define BEAMPLAN_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  BP_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BP_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  BP_STATUS_INVALID_UTF8 = 2,
  /**
   * The layout document failed to parse.
   */
  BP_STATUS_PARSE = 3,
  /**
   * A catalog failed to load or validate.
   */
  BP_STATUS_CATALOG = 4,
  /**
   * A file could not be read.
   */
  BP_STATUS_IO = 5,
  /**
   * The request is well formed but cannot be satisfied.
   */
  BP_STATUS_INVALID = 6,
  /**
   * An id or index does not exist.
   */
  BP_STATUS_NOT_FOUND = 7,
  /**
   * The library panicked; the handle arguments should be discarded.
   */
  BP_STATUS_PANIC = 8,
} BpStatus;

/**
 * Opaque component catalog.
 */
typedef struct BpCatalog BpCatalog;

/**
 * Opaque compiled scene.
 */
typedef struct BpScene BpScene;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next call into the library on this thread.
 */
const char *bp_last_error(void);

/**
 * Library version as a static string.
 */
const char *bp_version(void);

/**
 * Releases a string returned by the library. Null is ignored.
 */
void bp_string_free(char *s);

/**
 * Releases a byte buffer returned by the library. Null is ignored.
 */
void bp_bytes_free(uint8_t *data, size_t len);

/**
 * Creates a handle to the bundled catalog.
 */
BpStatus bp_catalog_bundled(BpCatalog **out);

/**
 * Loads the bundled catalog overlaid by `count` catalog files; later
 * files win over the bundled entries.
 */
BpStatus bp_catalog_load(const char *const *paths, size_t count, BpCatalog **out);

/**
 * Releases a catalog handle. Null is ignored.
 */
void bp_catalog_free(BpCatalog *catalog);

/**
 * Number of component definitions in the catalog.
 */
BpStatus bp_catalog_component_count(const BpCatalog *catalog, size_t *out);

/**
 * One component with default parameters as pretty JSON.
 */
BpStatus bp_catalog_component_json(const BpCatalog *catalog, const char *id, char **out);

/**
 * Compiles layout source text. `catalog` may be null for the bundled
 * catalog. Documents with `use` statements need [`bp_compile_file`] so
 * the catalog paths can be resolved. Diagnostics do not make the call
 * fail; inspect them through the scene.
 */
BpStatus bp_compile(const char *source, const BpCatalog *catalog, BpScene **out);

/**
 * Compiles a layout file, resolving its `use` catalogs relative to it.
 */
BpStatus bp_compile_file(const char *path, const BpCatalog *catalog, BpScene **out);

/**
 * Releases a scene handle. Null is ignored.
 */
void bp_scene_free(BpScene *scene);

/**
 * Plate, error-diagnostic and warning-diagnostic counts. Any output
 * pointer may be null.
 */
BpStatus bp_scene_counts(const BpScene *scene, size_t *plates, size_t *errors, size_t *warnings);

/**
 * Diagnostics as text, one `severity code subject message` per line.
 */
BpStatus bp_scene_diagnostics(const BpScene *scene, char **out);

/**
 * Name of plate `index`.
 */
BpStatus bp_scene_plate_name(const BpScene *scene, size_t index, char **out);

/**
 * Canonical JSON dump of the scene.
 */
BpStatus bp_scene_dump_json(const BpScene *scene, char **out);

/**
 * Bill of materials CSV.
 */
BpStatus bp_scene_bom_csv(const BpScene *scene, char **out);

/**
 * Binary STL of plate `index`, released with [`bp_bytes_free`].
 */
BpStatus bp_scene_plate_stl(const BpScene *scene, size_t index, uint8_t **data, size_t *len);

/**
 * Littrow angle in degrees from the grating normal.
 */
BpStatus bp_littrow_angle(double wavelength_nm, double groove_density, int32_t order, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEAMPLAN_H */
