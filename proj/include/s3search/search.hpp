#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "s3search/core.hpp"
#include "s3search/model.hpp"

namespace s3s::search {

// Terminal-state reward in [0,1]. Applied to clean predictions during the
// look-ahead and to terminals at selection time.
using ScoreFn = std::function<double(const PartialState&)>;

// Answer extraction for majority voting; nullopt when no answer can be read
// off the terminal (such terminals vote as singletons).
using AnswerFn = std::function<std::optional<std::string>(const PartialState&)>;

struct VerifierHooks {
    ScoreFn score;
    AnswerFn answer;
};

// One reverse step of instrumentation. The score/weight/offspring arrays are
// populated by the tree modes (length N*b); other modes record only the
// population confidence.
struct RunRecord {
    int step = 0;
    std::vector<double> scores;
    std::vector<double> weights;
    std::vector<double> xi;
    std::vector<int> counts;
    double ess = 0.0;
    double mean_confidence = 0.0;
};

struct SearchResult {
    PartialState output;
    std::vector<PartialState> terminal_population;
    std::vector<double> terminal_scores;
    std::vector<RunRecord> records;
    long transition_nfe = 0;   // headline figure: proposal evaluations
    long cleanpred_nfe = 0;    // look-ahead decodes, reported separately
};

SearchResult run_s3(const DenoisingModel& model, const VerifierHooks& verifier,
                    const RunConfig& config);
SearchResult run_baseline(const DenoisingModel& model, const VerifierHooks& verifier,
                          const RunConfig& config);
SearchResult run_best_of_k(const DenoisingModel& model, const VerifierHooks& verifier,
                           const RunConfig& config);
SearchResult run_tilting_only(const DenoisingModel& model, const VerifierHooks& verifier,
                              const RunConfig& config);
SearchResult run_lookahead_only(const DenoisingModel& model, const VerifierHooks& verifier,
                                const RunConfig& config);

// Dispatch on config.mode.
SearchResult run(const DenoisingModel& model, const VerifierHooks& verifier,
                 const RunConfig& config);

// Majority answer, ties (across groups and within the winning group) broken
// by lowest sequence NLL. Returns the index into `terminals`.
size_t majority_vote_select(const std::vector<PartialState>& terminals,
                            const DenoisingModel& model, const Schedule& schedule,
                            const AnswerFn& answer);

// Per-step mean top-1 confidence of the surviving population, length T.
std::vector<double> confidence_trace(const SearchResult& result);

}  // namespace s3s::search
