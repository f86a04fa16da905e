#include "s3search/harness.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace s3s::harness {

namespace {

std::string tokens_to_string(const PartialState& s) {
    std::string out;
    for (size_t i = 0; i < s.tokens.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(s.tokens[i]);
    }
    return out;
}

}  // namespace

PartialState target_terminal(const DenoisingModel& model, const Schedule& schedule) {
    if (!model.enumerable()) {
        throw std::invalid_argument("target profile requires an enumerable model");
    }
    std::vector<double> p0 = enumerate_terminal_distribution(model, schedule);
    size_t best = std::min_element(p0.begin(), p0.end()) - p0.begin();
    return terminal_from_index(best, model.vocabulary().size, schedule.length());
}

search::VerifierHooks make_toy_verifier(const DenoisingModel& model, const Schedule& schedule,
                                        const std::string& profile) {
    search::VerifierHooks hooks;
    if (profile == "target") {
        PartialState target = target_terminal(model, schedule);
        hooks.score = [target](const PartialState& s) {
            int match = 0;
            for (size_t i = 0; i < s.tokens.size(); ++i) {
                match += s.tokens[i] == target.tokens[i] ? 1 : 0;
            }
            return static_cast<double>(match) / target.tokens.size();
        };
        hooks.answer = [](const PartialState& s) -> std::optional<std::string> {
            return tokens_to_string(s);
        };
        return hooks;
    }
    if (profile == "pattern") {
        const auto* planted = dynamic_cast<const PlantedSynthetic*>(&model);
        if (!planted) throw std::invalid_argument("pattern profile requires a planted model");
        hooks.score = [planted](const PartialState& s) { return planted->pattern_score(s); };
        hooks.answer = [planted](const PartialState& s) -> std::optional<std::string> {
            if (auto m = planted->matched_pattern(s)) return "p" + std::to_string(*m);
            return std::nullopt;
        };
        return hooks;
    }
    throw std::invalid_argument("unknown toy verifier profile: " + profile);
}

bool toy_correct(const DenoisingModel& model, const Schedule& schedule,
                 const std::string& profile, const PartialState& terminal) {
    if (profile == "pattern") {
        const auto* planted = dynamic_cast<const PlantedSynthetic*>(&model);
        if (!planted) throw std::invalid_argument("pattern profile requires a planted model");
        return planted->contains_pattern(terminal);
    }
    return terminal.tokens == target_terminal(model, schedule).tokens;
}

std::string model_digest(const DenoisingModel& model) {
    std::string s = serialize_model(model);
    uint64_t d = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        d ^= c;
        d *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << d;
    return out.str();
}

std::string run_record_json(const RunConfig& config, const DenoisingModel& model,
                            const search::SearchResult& result, bool correct) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["mode"] = mode_name(config.mode);
    j["n"] = config.particles;
    j["b"] = config.branching;
    j["k"] = config.budget_k();
    j["lambda"] = config.lambda;
    j["block_length"] = config.block_length;
    j["steps"] = config.make_schedule().steps();
    j["policy"] = policy_name(config.policy);
    j["seed"] = config.seed;
    j["model"] = config.model;
    j["model_digest"] = model_digest(model);
    j["verifier_profile"] = config.verifier_profile;
    j["transition_nfe"] = result.transition_nfe;
    j["cleanpred_nfe"] = result.cleanpred_nfe;
    double mean_f = 0.0, max_f = 0.0;
    for (double s : result.terminal_scores) {
        mean_f += s;
        max_f = std::max(max_f, s);
    }
    if (!result.terminal_scores.empty()) mean_f /= result.terminal_scores.size();
    j["mean_terminal_f"] = mean_f;
    j["max_terminal_f"] = max_f;
    j["correct"] = correct;
    j["output_tokens"] = tokens_to_string(result.output);
    // effective-token analogue: whitespace word count of the rendered output
    j["word_count"] = static_cast<int>(result.output.tokens.size());
    return j.dump();
}

std::vector<RunConfig> ExperimentGrid::expand() const {
    std::vector<RunConfig> cells;
    for (Mode mode : modes) {
        for (int n : particles) {
            for (int b : branching) {
                for (double lambda : lambdas) {
                    for (int kblock : block_lengths) {
                        for (int s = 0; s < n_seeds; ++s) {
                            RunConfig c = base;
                            c.mode = mode;
                            c.particles = mode == Mode::Baseline ? 1 : n;
                            c.branching = mode == Mode::Baseline ? 1 : b;
                            c.lambda = lambda;
                            if (kblock > 0) c.block_length = kblock;
                            c.seed = seed_begin + static_cast<uint64_t>(s);
                            cells.push_back(c);
                        }
                    }
                }
            }
        }
    }
    return cells;
}

int run_experiment(const ExperimentGrid& grid, const DenoisingModel& model, std::ostream& out,
                   int workers) {
    std::vector<RunConfig> cells = grid.expand();
    std::vector<std::string> lines(cells.size());
    std::vector<char> failed(cells.size(), 0);
    std::atomic<size_t> cursor{0};

    auto work = [&]() {
        while (true) {
            size_t i = cursor.fetch_add(1);
            if (i >= cells.size()) return;
            try {
                Schedule schedule = cells[i].make_schedule();
                search::VerifierHooks hooks =
                    make_toy_verifier(model, schedule, cells[i].verifier_profile);
                search::SearchResult r = search::run(model, hooks, cells[i]);
                bool correct = toy_correct(model, schedule, cells[i].verifier_profile, r.output);
                lines[i] = run_record_json(cells[i], model, r, correct);
            } catch (const std::exception& e) {
                nlohmann::ordered_json j;
                j["schema_version"] = kSchemaVersion;
                j["error"] = e.what();
                j["seed"] = cells[i].seed;
                j["mode"] = mode_name(cells[i].mode);
                lines[i] = j.dump();
                failed[i] = 1;
            }
        }
    };

    int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
    std::vector<std::thread> pool;
    for (int k = 0; k < n_threads; ++k) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();

    // deterministic grid order regardless of scheduling
    for (const std::string& line : lines) out << line << '\n';
    int n_failed = 0;
    for (char f : failed) n_failed += f;
    return n_failed;
}

void emit_shift_data(const std::vector<std::pair<std::string, search::SearchResult>>& runs,
                     std::ostream& out) {
    out << "step\tscore\tmode\trun\n";
    for (size_t r = 0; r < runs.size(); ++r) {
        for (const search::RunRecord& rec : runs[r].second.records) {
            for (double s : rec.scores) {
                out << rec.step << '\t' << s << '\t' << runs[r].first << '\t' << r << '\n';
            }
        }
    }
}

}  // namespace s3s::harness
