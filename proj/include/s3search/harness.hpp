#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "s3search/core.hpp"
#include "s3search/model.hpp"
#include "s3search/search.hpp"

namespace s3s::harness {

inline constexpr const char* kSchemaVersion = "1.0";

// Reward hooks for the toy models. Profiles:
//   "target"  — graded per-position match against a designated target
//               terminal, chosen as the lowest-probability terminal of an
//               enumerable model (the density-quality mismatch by design).
//   "pattern" — planted-pattern score of a PlantedSynthetic model.
search::VerifierHooks make_toy_verifier(const DenoisingModel& model, const Schedule& schedule,
                                        const std::string& profile);

// The target terminal backing the "target" profile.
PartialState target_terminal(const DenoisingModel& model, const Schedule& schedule);

// Toy-scale accuracy: planted pattern hit or exact target match.
bool toy_correct(const DenoisingModel& model, const Schedule& schedule,
                 const std::string& profile, const PartialState& terminal);

// Stable digest of a serialized model (provenance field in records).
std::string model_digest(const DenoisingModel& model);

// One line-delimited record for a finished run.
std::string run_record_json(const RunConfig& config, const DenoisingModel& model,
                            const search::SearchResult& result, bool correct);

struct ExperimentGrid {
    std::vector<int> particles{1};
    std::vector<int> branching{1};
    std::vector<double> lambdas{1.0};
    std::vector<int> block_lengths{0};  // 0 = keep base config's value
    std::vector<Mode> modes{Mode::S3};
    uint64_t seed_begin = 0;
    int n_seeds = 1;
    RunConfig base;

    std::vector<RunConfig> expand() const;
};

// Executes every cell (up to `workers` concurrently), emitting one record
// per cell in deterministic grid order. Returns the number of failed cells.
int run_experiment(const ExperimentGrid& grid, const DenoisingModel& model, std::ostream& out,
                   int workers);

// Long-format (step, score, mode, run) table from per-step records, for
// score-distribution plots.
void emit_shift_data(const std::vector<std::pair<std::string, search::SearchResult>>& runs,
                     std::ostream& out);

}  // namespace s3s::harness
