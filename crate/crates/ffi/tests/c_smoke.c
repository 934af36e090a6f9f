#include <stdio.h>
#include <string.h>
#include "mdrecon.h"

int main(void) {
    MdDopplerAxis axis;
    if (md_doppler_axis(60.48e9, 0.27e-3, 64, &axis) != MD_STATUS_OK) return 1;
    if (axis.max_velocity < 4.5 || axis.max_velocity > 4.7) return 2;

    int8_t a[16], b[16];
    if (md_golay_pair(16, a, b) != MD_STATUS_OK) return 3;

    if (md_golay_pair(12, a, b) != MD_STATUS_INVALID_INPUT) return 4;
    char msg[128];
    if (md_last_error(msg, sizeof msg) == 0 || strlen(msg) == 0) return 5;

    MdConfig *cfg = NULL;
    if (md_config_from_toml("columns = 3\nsparsity = 2\n", &cfg) != MD_STATUS_OK) return 6;
    MdResult *res = NULL;
    if (md_pipeline_run(cfg, &res) != MD_STATUS_OK) return 7;
    size_t cols, win, gaps;
    md_result_shape(res, &cols, &win, &gaps);
    if (cols != 3 || win != 64 || gaps != 0) return 8;
    double buf[3 * 64];
    if (md_result_spectrogram(res, MD_SPECTROGRAM_KIND_SPARCS, buf, 3 * 64) != MD_STATUS_OK) return 9;
    md_result_free(res);
    md_config_free(cfg);
    printf("ok %s\n", md_version());
    return 0;
}
