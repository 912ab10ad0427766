#include <stdio.h>
#include <string.h>
#include "mmwave_ho.h"

#define CHECK(x) do { if ((x) != MMWHO_STATUS_OK) { \
    char msg[512]; mmwho_last_error_message(msg, sizeof msg); \
    fprintf(stderr, "%s failed: %s\n", #x, msg); return 1; } } while (0)

int main(int argc, char **argv) {
    MmwhoConfig *cfg = NULL;
    MmwhoExperiment *exp = NULL;
    MmwhoSummary s;
    size_t n = 0;
    double p = 0.0;

    CHECK(mmwho_los_probability(10.0, &p));
    if (p != 1.0) return 2;
    if (mmwho_rate_bps(1.0, 500e6) != 5e8) return 3;
    if (mmwho_config_default(NULL) != MMWHO_STATUS_NULL_POINTER) return 4;

    CHECK(mmwho_config_default(&cfg));
    CHECK(mmwho_config_set_seed(cfg, 3));
    CHECK(mmwho_config_set_replications(cfg, 5));
    CHECK(mmwho_config_set_training_episodes(cfg, 50));
    CHECK(mmwho_config_set_t_d(cfg, 2.0));
    CHECK(mmwho_experiment_run(cfg, &exp));
    CHECK(mmwho_experiment_policy_count(exp, &n));
    for (size_t i = 0; i < n; i++) {
        CHECK(mmwho_experiment_summary(exp, i, &s));
        printf("%u %.6g %.3g\n", s.policy, s.mean_r_traj_bps, s.mean_handovers);
    }
    if (argc > 1) CHECK(mmwho_experiment_write_metrics(exp, argv[1]));
    mmwho_experiment_free(exp);
    mmwho_config_free(cfg);
    return n == 4 ? 0 : 5;
}
