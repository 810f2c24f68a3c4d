#include <math.h>
#include <stdio.h>
#include <string.h>

#include "fmm_ecg.h"

int main(void) {
    FmmWave w = {2.0, 1.0, 4.0, 0.1};
    double crest, v;
    if (fmm_crest_time(&w, &crest) != FMM_STATUS_OK) return 1;
    if (fmm_eval_wave(&w, crest, &v) != FMM_STATUS_OK) return 2;
    if (fabs(v - 2.0) > 1e-9) return 3;

    FmmSummary s;
    if (fmm_summarize(3542, 415, 0, &s) != FMM_STATUS_OK) return 4;
    if (s.se != 100.0 || s.ppv != 89.51 || s.der != 11.72 || s.f1 != 94.47) return 5;

    enum { N = 250 };
    double t[N], y[N];
    for (int i = 0; i < N; i++) {
        t[i] = i * 2.0 * M_PI / N;
        y[i] = 0.0;
    }
    FmmBeat *beat = NULL;
    if (fmm_beat_new(t, y, N, 250.0, 2.5, &beat) != FMM_STATUS_OK) return 6;
    FmmFitReport *report = NULL;
    FmmStatus st = fmm_fit_beat(beat, NULL, &report);
    if (st == FMM_STATUS_OK) return 7;
    const char *msg = fmm_last_error();
    if (msg == NULL || strlen(msg) == 0) return 8;
    fmm_beat_free(beat);
    printf("ok: %s\n", msg);
    return 0;
}
