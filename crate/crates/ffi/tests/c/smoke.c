#include <stdio.h>
#include <string.h>
#include "beamplan.h"

static const char *DOC = "table dx=24 dy=10\nplate rb_sas at (1, 1, 0)\n";

int main(void) {
    BpScene *scene = NULL;
    if (bp_compile(DOC, NULL, &scene) != BP_STATUS_OK) {
        fprintf(stderr, "compile failed: %s\n", bp_last_error());
        return 1;
    }
    size_t plates = 0, errors = 0, warnings = 0;
    if (bp_scene_counts(scene, &plates, &errors, &warnings) != BP_STATUS_OK) return 2;
    uint8_t *stl = NULL;
    size_t len = 0;
    if (bp_scene_plate_stl(scene, 0, &stl, &len) != BP_STATUS_OK) return 3;
    uint32_t tris;
    memcpy(&tris, stl + 80, 4);
    printf("plates=%zu errors=%zu warnings=%zu stl_ok=%d\n", plates, errors, warnings, len == 84 + 50 * (size_t)tris);
    bp_bytes_free(stl, len);
    if (bp_scene_plate_stl(scene, 5, &stl, &len) != BP_STATUS_NOT_FOUND) return 4;
    bp_scene_free(scene);
    if (bp_compile(NULL, NULL, &scene) != BP_STATUS_NULL_ARGUMENT) return 5;
    return 0;
}
