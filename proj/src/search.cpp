#include "s3search/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "s3search/resampling.hpp"

namespace s3s::search {

namespace {

constexpr uint64_t kParticleTag = 0x9A75ULL;
constexpr uint64_t kSspTag = 0x55F0ULL;
constexpr uint64_t kCopyTag = 0xD0B0ULL;

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

uint64_t initial_stream(uint64_t seed, int i) {
    return Rng::derive({seed, kParticleTag, static_cast<uint64_t>(i)});
}

uint64_t child_stream(uint64_t parent_stream, int t, int j) {
    return Rng::derive({parent_stream, static_cast<uint64_t>(t), static_cast<uint64_t>(j)});
}

double population_confidence(const DenoisingModel& model, const std::vector<Particle>& pop) {
    double sum = 0.0;
    for (const Particle& p : pop) sum += model.mean_top1_confidence(p.state);
    return sum / pop.size();
}

SearchResult finish_with_vote(std::vector<Particle> pop, const DenoisingModel& model,
                              const Schedule& schedule, const VerifierHooks& verifier,
                              SearchResult result) {
    result.terminal_population.reserve(pop.size());
    std::vector<PartialState> terminals;
    for (Particle& p : pop) terminals.push_back(std::move(p.state));
    result.terminal_scores.reserve(terminals.size());
    for (const PartialState& s : terminals) {
        result.terminal_scores.push_back(clamp_unit(verifier.score(s)));
    }
    size_t pick = majority_vote_select(terminals, model, schedule, verifier.answer);
    result.output = terminals[pick];
    result.terminal_population = std::move(terminals);
    return result;
}

// Shared tree-search loop: expand N particles into N*b scored children, then
// reduce back to N either by SSP resampling on tilted weights (S3) or by
// deterministic top-N selection (look-ahead ablation).
SearchResult run_tree(const DenoisingModel& model, const VerifierHooks& verifier,
                      const RunConfig& config, bool tilted) {
    config.validate();
    const Schedule schedule = config.make_schedule();
    const int N = config.particles;
    const int b = config.branching;
    const int T = schedule.steps();

    std::vector<Particle> pop(N);
    for (int i = 0; i < N; ++i) {
        pop[i].state = full_mask(model.vocabulary(), schedule);
        pop[i].rng_stream = initial_stream(config.seed, i);
    }

    SearchResult result;
    for (int t = T; t >= 1; --t) {
        RunRecord rec;
        rec.step = t;
        rec.mean_confidence = population_confidence(model, pop);

        struct Child {
            PartialState state;
            uint64_t stream;
            int parent;
        };
        std::vector<Child> frontier;
        frontier.reserve(static_cast<size_t>(N) * b);
        rec.scores.reserve(static_cast<size_t>(N) * b);
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < b; ++j) {
                uint64_t stream = child_stream(pop[i].rng_stream, t, j);
                Rng rng(stream);
                Child c{model.sample_transition(pop[i].state, schedule, t, rng), stream, i};
                ++result.transition_nfe;
                PartialState xhat = model.clean_prediction(c.state);
                ++result.cleanpred_nfe;
                rec.scores.push_back(clamp_unit(verifier.score(xhat)));
                frontier.push_back(std::move(c));
            }
        }

        std::vector<Particle> next;
        next.reserve(N);
        if (tilted) {
            rec.weights = resampling::tilt_weights(rec.scores, config.lambda);
            rec.xi.resize(rec.weights.size());
            for (size_t k = 0; k < rec.weights.size(); ++k) rec.xi[k] = N * rec.weights[k];
            Rng ssp_rng(Rng::derive({config.seed, kSspTag, static_cast<uint64_t>(t)}));
            rec.counts = resampling::ssp_round(rec.xi, ssp_rng);
            rec.ess = resampling::ess(rec.weights);
            for (size_t k = 0; k < frontier.size(); ++k) {
                for (int m = 0; m < rec.counts[k]; ++m) {
                    Particle p;
                    p.state = frontier[k].state;
                    p.lineage = frontier[k].parent;
                    p.rng_stream =
                        m == 0 ? frontier[k].stream
                               : Rng::derive({frontier[k].stream, kCopyTag,
                                              static_cast<uint64_t>(m)});
                    next.push_back(std::move(p));
                }
            }
        } else {
            // uniform top-N pruning: survivors by score, ties to lowest index
            std::vector<size_t> order(frontier.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t c) {
                return rec.scores[a] > rec.scores[c];
            });
            std::vector<size_t> keep(order.begin(), order.begin() + N);
            std::sort(keep.begin(), keep.end());
            rec.weights.assign(frontier.size(), 1.0 / frontier.size());
            rec.xi.assign(frontier.size(), 0.0);
            rec.counts.assign(frontier.size(), 0);
            for (size_t k : keep) {
                rec.counts[k] = 1;
                rec.xi[k] = 1.0;
                Particle p;
                p.state = frontier[k].state;
                p.lineage = frontier[k].parent;
                p.rng_stream = frontier[k].stream;
                next.push_back(std::move(p));
            }
            rec.ess = resampling::ess(rec.weights);
        }
        pop = std::move(next);
        result.records.push_back(std::move(rec));
    }
    return finish_with_vote(std::move(pop), model, schedule, verifier, std::move(result));
}

// K independent single trajectories with shared per-trajectory substreams;
// used by Baseline (K=1), BestOfK, and TiltingOnly.
struct IndependentRun {
    std::vector<Particle> pop;
    SearchResult result;
};

IndependentRun run_independent(const DenoisingModel& model, const RunConfig& config, int K) {
    const Schedule schedule = config.make_schedule();
    const int T = schedule.steps();

    IndependentRun out;
    out.pop.resize(K);
    for (int k = 0; k < K; ++k) {
        out.pop[k].state = full_mask(model.vocabulary(), schedule);
        out.pop[k].rng_stream = initial_stream(config.seed, k);
        out.pop[k].lineage = k;
    }
    for (int t = T; t >= 1; --t) {
        RunRecord rec;
        rec.step = t;
        rec.mean_confidence = population_confidence(model, out.pop);
        for (Particle& p : out.pop) {
            uint64_t stream = child_stream(p.rng_stream, t, 0);
            Rng rng(stream);
            p.state = model.sample_transition(p.state, schedule, t, rng);
            p.rng_stream = stream;
            ++out.result.transition_nfe;
        }
        out.result.records.push_back(std::move(rec));
    }
    return out;
}

}  // namespace

SearchResult run_s3(const DenoisingModel& model, const VerifierHooks& verifier,
                    const RunConfig& config) {
    if (config.mode != Mode::S3) throw std::invalid_argument("run_s3: wrong mode");
    return run_tree(model, verifier, config, /*tilted=*/true);
}

SearchResult run_lookahead_only(const DenoisingModel& model, const VerifierHooks& verifier,
                                const RunConfig& config) {
    if (config.mode != Mode::LookaheadOnly) {
        throw std::invalid_argument("run_lookahead_only: wrong mode");
    }
    return run_tree(model, verifier, config, /*tilted=*/false);
}

SearchResult run_baseline(const DenoisingModel& model, const VerifierHooks& verifier,
                          const RunConfig& config) {
    if (config.mode != Mode::Baseline) throw std::invalid_argument("run_baseline: wrong mode");
    config.validate();
    IndependentRun r = run_independent(model, config, 1);
    SearchResult result = std::move(r.result);
    result.output = std::move(r.pop[0].state);
    result.terminal_population = {result.output};
    result.terminal_scores = {clamp_unit(verifier.score(result.output))};
    return result;
}

SearchResult run_best_of_k(const DenoisingModel& model, const VerifierHooks& verifier,
                           const RunConfig& config) {
    if (config.mode != Mode::BestOfK) throw std::invalid_argument("run_best_of_k: wrong mode");
    config.validate();
    IndependentRun r = run_independent(model, config, config.budget_k());
    return finish_with_vote(std::move(r.pop), model, config.make_schedule(), verifier,
                            std::move(r.result));
}

SearchResult run_tilting_only(const DenoisingModel& model, const VerifierHooks& verifier,
                              const RunConfig& config) {
    if (config.mode != Mode::TiltingOnly) {
        throw std::invalid_argument("run_tilting_only: wrong mode");
    }
    config.validate();
    const Schedule schedule = config.make_schedule();
    IndependentRun r = run_independent(model, config, config.budget_k());
    SearchResult result = std::move(r.result);
    result.terminal_population.reserve(r.pop.size());
    for (Particle& p : r.pop) result.terminal_population.push_back(std::move(p.state));
    size_t best = 0;
    double best_nll = 0.0;
    for (size_t k = 0; k < result.terminal_population.size(); ++k) {
        result.terminal_scores.push_back(clamp_unit(verifier.score(result.terminal_population[k])));
        double nll = model.sequence_nll(result.terminal_population[k], schedule);
        // weighted argmax over exp(lambda f) == argmax f; NLL breaks ties
        if (k == 0 || result.terminal_scores[k] > result.terminal_scores[best] ||
            (result.terminal_scores[k] == result.terminal_scores[best] && nll < best_nll)) {
            best = k;
            best_nll = nll;
        }
    }
    result.output = result.terminal_population[best];
    return result;
}

SearchResult run(const DenoisingModel& model, const VerifierHooks& verifier,
                 const RunConfig& config) {
    switch (config.mode) {
        case Mode::Baseline: return run_baseline(model, verifier, config);
        case Mode::BestOfK: return run_best_of_k(model, verifier, config);
        case Mode::TiltingOnly: return run_tilting_only(model, verifier, config);
        case Mode::LookaheadOnly: return run_lookahead_only(model, verifier, config);
        case Mode::S3: return run_s3(model, verifier, config);
    }
    throw std::logic_error("unreachable");
}

size_t majority_vote_select(const std::vector<PartialState>& terminals,
                            const DenoisingModel& model, const Schedule& schedule,
                            const AnswerFn& answer) {
    if (terminals.empty()) throw std::invalid_argument("majority_vote_select: no terminals");
    std::vector<double> nll(terminals.size());
    for (size_t k = 0; k < terminals.size(); ++k) nll[k] = model.sequence_nll(terminals[k], schedule);

    std::map<std::string, std::vector<size_t>> groups;
    size_t orphan = 0;
    for (size_t k = 0; k < terminals.size(); ++k) {
        std::optional<std::string> a = answer ? answer(terminals[k]) : std::nullopt;
        // extraction failures vote as singletons under unique synthetic keys
        std::string key = a ? "a:" + *a : "\x01orphan:" + std::to_string(orphan++);
        groups[key].push_back(k);
    }
    size_t best_idx = 0;
    size_t best_size = 0;
    double best_nll = 0.0;
    for (const auto& [key, members] : groups) {
        size_t rep = members[0];
        for (size_t m : members) {
            if (nll[m] < nll[rep]) rep = m;
        }
        if (members.size() > best_size ||
            (members.size() == best_size && nll[rep] < best_nll)) {
            best_size = members.size();
            best_idx = rep;
            best_nll = nll[rep];
        }
    }
    return best_idx;
}

std::vector<double> confidence_trace(const SearchResult& result) {
    std::vector<double> trace;
    trace.reserve(result.records.size());
    for (const RunRecord& rec : result.records) trace.push_back(rec.mean_confidence);
    return trace;
}

}  // namespace s3s::search
