/* Compiled against the generated header to check it is valid C. */
#include <math.h>
#include <stdio.h>

#include "sentry_bench.h"

int main(void) {
    SbMetrics m;
    if (sb_metrics_from_counts(8, 2, 9, 1, &m) != SB_STATUS_OK) {
        return 1;
    }
    double scores[4] = {0.9, 0.8, 0.3, 0.1};
    uint8_t truth[4] = {1, 0, 1, 0};
    double auc = NAN;
    SbStatus s = sb_roc_auc(scores, truth, 4, &auc);

    SbModel *model = NULL;
    if (sb_model_load("missing.json", &model) != SB_STATUS_OK) {
        char msg[256];
        size_t needed = 0;
        sb_last_error_message(msg, sizeof msg, &needed);
        printf("%s\n", msg);
    }
    sb_model_free(model);
    printf("%s %f %f %d\n", sb_version(), m.ar, auc, (int)s);
    return 0;
}
