#include <math.h>
#include <stdio.h>
#include <string.h>

#include "hrsnn.h"

static int calls = 0;

static int32_t peak(void *user, const char *json, double *score) {
    (void)json;
    int *n = user;
    *n += 1;
    *score = -(double)(*n % 7);
    return 0;
}

int main(void) {
    double x[] = {0.0, 1.0, 2.0};
    double y[] = {1.0, 2.0, 3.0};
    double d = 0.0;
    if (hrsnn_w2_1d(x, NULL, 3, y, NULL, 3, &d) != HRSNN_STATUS_OK || fabs(d - 1.0) > 1e-12) {
        return 1;
    }
    HrsnnConfig *cfg = hrsnn_config_new();
    if (hrsnn_config_set(cfg, "network.bogus", "1") != HRSNN_STATUS_CONFIG) {
        return 2;
    }
    if (strstr(hrsnn_last_error(), "network.bogus") == NULL) {
        return 3;
    }
    hrsnn_config_set(cfg, "bo.n_init", "2");
    hrsnn_config_set(cfg, "bo.budget", "4");
    hrsnn_config_set(cfg, "bo.pool_size", "8");
    hrsnn_config_set(cfg, "bo.samples", "16");
    hrsnn_config_set(cfg, "bo.projections", "8");
    double best = 0.0;
    char *json = NULL;
    if (hrsnn_optimize(cfg, peak, &calls, &best, &json) != HRSNN_STATUS_OK || calls != 4 || json == NULL) {
        return 4;
    }
    printf("best %g after %d calls: %s\n", best, calls, json);
    hrsnn_string_free(json);
    hrsnn_config_free(cfg);
    return 0;
}
