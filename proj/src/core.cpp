#include "s3search/core.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace s3s {

Schedule::Schedule(int length, int block_length, UpdatePolicy policy, uint64_t seed)
    : length_(length), block_length_(block_length), policy_(policy) {
    if (length < 1) throw std::invalid_argument("schedule: length must be positive");
    if (block_length < 1) throw std::invalid_argument("schedule: block_length must be positive");
    steps_ = (length + block_length - 1) / block_length;

    // Whole blocks left to right; the final block holds the remainder when
    // block_length does not divide length.
    std::vector<std::vector<int>> blocks;
    for (int start = 0; start < length; start += block_length) {
        std::vector<int> block;
        for (int p = start; p < std::min(start + block_length, length); ++p) block.push_back(p);
        blocks.push_back(std::move(block));
    }

    std::vector<int> order(blocks.size());
    std::iota(order.begin(), order.end(), 0);
    if (policy == UpdatePolicy::RandomBlocks) {
        // Seed-determined permutation of whole blocks, fixed for the run.
        Rng rng(Rng::derive({seed, 0x6b1a7c3fULL}));
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = rng.next_below(i);
            std::swap(order[i - 1], order[j]);
        }
    }
    update_sets_.reserve(blocks.size());
    for (int idx : order) update_sets_.push_back(blocks[idx]);
}

const std::vector<int>& Schedule::updatable_positions(int t) const {
    if (t < 1 || t > steps_) throw std::out_of_range("schedule: step out of range");
    return update_sets_[steps_ - t];  // step T is the first entry
}

std::vector<bool> Schedule::masked_at(int t) const {
    if (t < 0 || t > steps_) throw std::out_of_range("schedule: step out of range");
    std::vector<bool> masked(length_, false);
    for (int s = t; s >= 1; --s) {
        for (int p : updatable_positions(s)) masked[p] = true;
    }
    return masked;
}

PartialState full_mask(const Vocabulary& vocab, const Schedule& schedule) {
    PartialState s;
    s.tokens.assign(schedule.length(), vocab.mask_id());
    s.step = schedule.steps();
    return s;
}

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::Baseline:      return "baseline";
        case Mode::BestOfK:       return "best-of-k";
        case Mode::TiltingOnly:   return "tilting-only";
        case Mode::LookaheadOnly: return "lookahead-only";
        case Mode::S3:            return "s3";
    }
    throw std::logic_error("unreachable");
}

Mode parse_mode(const std::string& name) {
    if (name == "baseline") return Mode::Baseline;
    if (name == "best-of-k" || name == "bok") return Mode::BestOfK;
    if (name == "tilting-only") return Mode::TiltingOnly;
    if (name == "lookahead-only") return Mode::LookaheadOnly;
    if (name == "s3") return Mode::S3;
    throw std::invalid_argument("unknown mode: " + name);
}

UpdatePolicy parse_policy(const std::string& name) {
    if (name == "left-to-right" || name == "ltr") return UpdatePolicy::LeftToRightBlocks;
    if (name == "random") return UpdatePolicy::RandomBlocks;
    throw std::invalid_argument("unknown policy: " + name);
}

std::string policy_name(UpdatePolicy p) {
    return p == UpdatePolicy::LeftToRightBlocks ? "left-to-right" : "random";
}

void RunConfig::validate() const {
    if (particles < 1) throw std::invalid_argument("config: particles must be >= 1");
    if (branching < 1) throw std::invalid_argument("config: branching must be >= 1");
    if (lambda < 0) throw std::invalid_argument("config: lambda must be >= 0");
    if (tau < 0) throw std::invalid_argument("config: tau must be >= 0");
    if (length < 1) throw std::invalid_argument("config: length must be >= 1");
    if (block_length < 1) throw std::invalid_argument("config: block_length must be >= 1");
    if (mode == Mode::Baseline && (particles != 1 || branching != 1)) {
        throw std::invalid_argument("config: baseline mode requires particles=1 branching=1");
    }
    int derived = (length + block_length - 1) / block_length;
    if (steps != 0 && steps != derived) {
        throw std::invalid_argument("config: steps must equal ceil(length / block_length)");
    }
}

Schedule RunConfig::make_schedule() const {
    return Schedule(length, block_length, policy, seed);
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string val = trim(stripped.substr(eq + 1));
        if (key == "particles")          cfg.particles = std::stoi(val);
        else if (key == "branching")     cfg.branching = std::stoi(val);
        else if (key == "lambda")        cfg.lambda = std::stod(val);
        else if (key == "tau")           cfg.tau = std::stod(val);
        else if (key == "block_length")  cfg.block_length = std::stoi(val);
        else if (key == "length")        cfg.length = std::stoi(val);
        else if (key == "steps")         cfg.steps = std::stoi(val);
        else if (key == "policy")        cfg.policy = parse_policy(val);
        else if (key == "seed")          cfg.seed = std::stoull(val);
        else if (key == "mode")          cfg.mode = parse_mode(val);
        else if (key == "model")         cfg.model = val;
        else if (key == "verifier_profile") cfg.verifier_profile = val;
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

}  // namespace s3s
