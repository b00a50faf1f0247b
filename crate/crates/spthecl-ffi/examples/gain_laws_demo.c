/* Minimal consumer of the spthecl C API: creates a blow-up gain law, checks
 * its deadline and time-dilation round trip, and classifies the built-in
 * datasets.
 *
 * Build (from the workspace root, after `cargo build -p spthecl-ffi`):
 *
 *   gcc crates/spthecl-ffi/examples/gain_laws_demo.c \
 *       -Icrates/spthecl-ffi/include \
 *       target/debug/libspthecl_ffi.a -lm -lpthread -ldl \
 *       -o gain_laws_demo
 */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "spthecl.h"

static void check(SpthEclStatus status, const char *what) {
    if (status != SPTH_ECL_STATUS_OK) {
        char *message = spthecl_last_error_message();
        fprintf(stderr, "%s failed (%d): %s\n", what, (int)status,
                message ? message : "unknown");
        spthecl_string_free(message);
        exit(1);
    }
}

int main(void) {
    SpthEclLaw *law = NULL;
    check(spthecl_law_prescribed_time(8.0, &law), "law construction");

    double deadline = 0.0;
    check(spthecl_law_blow_up_time(law, 1.0, &deadline), "blow-up time");
    if (fabs(deadline - 8.0) > 1e-12) {
        fprintf(stderr, "deadline %f != 8\n", deadline);
        return 1;
    }

    /* dilate then contract must return the original time */
    double s = 0.0, t_back = 0.0;
    check(spthecl_law_dilate(law, 1.0, 4.0, &s), "dilate");
    check(spthecl_law_contract(law, 1.0, s, &t_back), "contract");
    if (fabs(t_back - 4.0) > 1e-9) {
        fprintf(stderr, "round trip gave %f\n", t_back);
        return 1;
    }

    /* a time past the deadline is a domain error, with a message */
    double ignored = 0.0;
    if (spthecl_law_solution(law, 1.0, 9.0, &ignored) != SPTH_ECL_STATUS_DOMAIN_ERROR) {
        fprintf(stderr, "expected a domain error past the deadline\n");
        return 1;
    }
    char *message = spthecl_last_error_message();
    printf("domain guard says: %s\n", message ? message : "(none)");
    spthecl_string_free(message);

    /* dataset classifications of the built-in benchmark */
    SpthEclRegistry *registry = NULL;
    check(spthecl_registry_builtin(&registry), "registry");
    size_t count = 0;
    check(spthecl_registry_len(registry, &count), "registry len");
    for (size_t id = 1; id <= count; ++id) {
        int32_t code = -1;
        check(spthecl_registry_classification(registry, id, &code), "classification");
        printf("dataset %zu classification code %d\n", id, (int)code);
    }

    spthecl_registry_free(registry);
    spthecl_law_free(law);
    printf("ok\n");
    return 0;
}
