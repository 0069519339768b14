#pragma once

#include <string>
#include <vector>

#include "compdiff/composer.hpp"
#include "compdiff/dataset.hpp"
#include "compdiff/fno.hpp"
#include "compdiff/grid.hpp"

namespace compdiff {

// Mean absolute error over all nt*nx points, in physical units.
double mae(const Field& pred, const Field& truth);
// Root mean squared error, same convention.
double rmse(const Field& pred, const Field& truth);

struct EvalRow {
    std::string system, method, field;
    double mae = 0.0, rmse = 0.0;
    int n_test = 0;
    double lambda = 0.0;
    int K = 0, T = 0;
    std::uint64_t seed = 0;
    std::string checkpoint_digest;
};

// Published full-scale reference errors, attached to reports for context
// (not desk-scale gates).
struct ReferenceError {
    const char* system;
    const char* method;
    const char* field;
    double mae;
    double rmse;
};
const std::vector<ReferenceError>& reference_error_table();

void write_report_csv(const std::string& path, const std::vector<EvalRow>& rows);
std::string render_report_table(const std::vector<EvalRow>& rows);

// Compose every test trajectory (coupled ground-truth dataset) and average
// per-field errors. n_limit <= 0 evaluates the whole set.
std::vector<EvalRow> evaluate_compose(const std::vector<Expert*>& experts,
                                      const NoiseSchedule& sched, const DatasetReader& test,
                                      const ComposeConfig& cfg, int n_limit,
                                      const std::string& method_name,
                                      const std::string& digest = "");

std::vector<EvalRow> evaluate_fno(Fno& net, const CheckpointMeta& meta, const DatasetReader& test,
                                  int n_limit, const std::string& digest = "");

// Space-time heatmap panels (one row per field set, one column per field)
// plus an absolute-error row (first vs last set when more than one is given),
// with the color scale shared per field. Returns the written file path.
std::string render_heatmaps(const std::vector<FieldSet>& sets, const std::string& out_dir);

}  // namespace compdiff
