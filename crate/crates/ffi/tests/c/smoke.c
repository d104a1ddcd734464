#include <stdio.h>
#include <string.h>

#include "admission_lab.h"

#define CHECK(call)                                                         \
    do {                                                                    \
        enum AlStatus s_ = (call);                                          \
        if (s_ != AL_STATUS_OK) {                                           \
            fprintf(stderr, "%s failed (%d): %s\n", #call, (int)s_,         \
                    al_last_error() ? al_last_error() : "");                \
            return 1;                                                       \
        }                                                                   \
    } while (0)

int main(void) {
    double tau = 0.0;
    CHECK(al_tau(0.75, &tau));
    double f = 0.0;
    CHECK(al_f_veto(tau, &f));
    if (f < 0.75 - 1e-12 || f > 0.75 + 1e-12) return 2;

    double values[] = {0.9, 0.1, 0.5};
    AlGroup *g = NULL;
    CHECK(al_group_new(values, 3, &g));
    double med = 0.0;
    CHECK(al_group_quantile(g, 0.5, &med));
    if (med != 0.5) return 3;
    if (al_group_insert(g, 2.0) != AL_STATUS_DOMAIN) return 4;
    al_group_free(g);

    double founder = 1.0;
    AlSimulation *sim = NULL;
    CHECK(al_simulation_new(AL_RULE_VETO, 0.25, &founder, 1, 7, &sim));
    CHECK(al_simulation_run(sim, 5000, 0));
    uint64_t accepted = 0;
    CHECK(al_simulation_counts(sim, NULL, &accepted));
    if (accepted != 5000) return 5;
    al_simulation_free(sim);

    AlRun *run = NULL;
    CHECK(al_run_config("{\"kind\":\"oracle\",\"seed\":1,\"rule\":\"majority\"}", &run));
    bool passed = false;
    CHECK(al_run_passed(run, &passed));
    char *summary = NULL;
    CHECK(al_run_summary_json(run, &summary));
    if (!passed || strstr(summary, "\"oracle\"") == NULL) return 6;
    al_string_free(summary);
    al_run_free(run);

    printf("ok %s\n", al_version());
    return 0;
}
