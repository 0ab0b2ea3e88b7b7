#include <stdio.h>
#include <math.h>
#include "wigner_clt.h"

int main(void) {
    WcltCovarianceQuery q = {3, 3, 1.0, 1.0, 1.0, 1.0, 1};
    double v = 0.0;
    if (wclt_covariance(&q, WCLT_METHOD_SERIES, &v) != WCLT_STATUS_OK) return 10;
    if (fabs(v - 24.0) > 1e-12) return 11;

    WcltExperiment *exp = NULL;
    if (wclt_experiment_from_preset("chebyshev_decorrelation", &exp) != WCLT_STATUS_OK) return 12;
    size_t m = wclt_experiment_observable_count(exp);
    if (m != 16) return 13;
    wclt_experiment_free(exp);

    if (wclt_experiment_from_preset("missing", &exp) != WCLT_STATUS_USAGE) return 14;
    if (wclt_last_error() == NULL) return 15;
    printf("ok %s\n", wclt_version());
    return 0;
}
