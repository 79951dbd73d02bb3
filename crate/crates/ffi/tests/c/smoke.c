#include <math.h>
#include <stdio.h>
#include <string.h>
#include "ncdk.h"

int main(void) {
    const double pts[3] = {-1.0, 0.0, 1.0};
    NcdkKernel *k = NULL;
    if (ncdk_kernel_new(NCDK_PROCESS_DYSON, 0.0, 0.0, pts, 3, &k) != NCDK_STATUS_OK) return 1;
    if (ncdk_kernel_particles(k) != 3) return 2;
    double v = 0.0;
    if (ncdk_kernel_density(k, 0.5, 0.1, &v) != NCDK_STATUS_OK || !(v > 0.0)) return 3;
    if (ncdk_kernel_eval(k, -1.0, 0.0, 0.5, 0.0, &v) != NCDK_STATUS_DOMAIN) return 4;
    char buf[256];
    if (ncdk_last_error(buf, sizeof buf) == 0 || strstr(buf, "s > 0") == NULL) return 5;
    ncdk_kernel_free(k);
    double c = ncdk_eq_circle_kernel(1.0, 5, 0.0, 0.0);
    if (fabs(c - 5.0 / (2.0 * 3.14159265358979323846)) > 1e-12) return 6;
    printf("ok %s\n", ncdk_version());
    return 0;
}
