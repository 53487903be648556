/* Minimal C caller: key rate at 40 dB, then an error path. */
#include <stdio.h>

#include "pmqkd.h"

int main(void) {
    PmqkdParams *params = NULL;
    PmqkdResult *result = NULL;
    double rate = 0.0;

    if (pmqkd_params_new(40.0, 1.9e-3, &params) != PMQKD_OK) {
        fprintf(stderr, "params: %s\n", pmqkd_last_error());
        return 1;
    }
    if (pmqkd_keyrate(params, &result) != PMQKD_OK || pmqkd_result_rate(result, &rate) != PMQKD_OK) {
        fprintf(stderr, "keyrate: %s\n", pmqkd_last_error());
        return 1;
    }
    printf("rate %.6e\n", rate);

    int code = pmqkd_params_set_p_s(params, 2.0);
    printf("bad p_s -> %d: %s\n", code, pmqkd_last_error());

    pmqkd_result_free(result);
    pmqkd_params_free(params);
    return (rate > 0.0 && code == PMQKD_E_USAGE) ? 0 : 1;
}
