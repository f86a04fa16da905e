#include "s3search/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace s3s {

namespace {

void check_updatable(const PartialState& state, const Schedule& schedule, int t,
                     const Vocabulary& vocab) {
    if (state.step != t) throw std::invalid_argument("model: state.step does not match t");
    for (int p : schedule.updatable_positions(t)) {
        if (!vocab.is_mask(state.tokens[p])) {
            throw std::invalid_argument("model: update position already unmasked");
        }
    }
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    double u = rng.next_double();
    double acc = 0.0;
    for (size_t v = 0; v < probs.size(); ++v) {
        acc += probs[v];
        if (u < acc) return static_cast<int>(v);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace

PartialState DenoisingModel::sample_transition(const PartialState& state, const Schedule& schedule,
                                               int t, Rng& rng) const {
    check_updatable(state, schedule, t, vocabulary());
    PartialState next = state;
    for (int p : schedule.updatable_positions(t)) {
        // Conditioned on the parent state: within-block positions are
        // independent given x_t.
        next.tokens[p] = sample_categorical(conditional(state, p), rng);
    }
    next.step = t - 1;
    return next;
}

DenoisingModel::ChildTable DenoisingModel::transition_distribution(const PartialState& state,
                                                                   const Schedule& schedule,
                                                                   int t) const {
    if (!enumerable()) throw std::logic_error("model: full child table requires an enumerable model");
    check_updatable(state, schedule, t, vocabulary());
    const auto& positions = schedule.updatable_positions(t);
    const int V = vocabulary().size;
    std::vector<std::vector<double>> conds;
    conds.reserve(positions.size());
    for (int p : positions) conds.push_back(conditional(state, p));

    ChildTable table;
    const size_t n = static_cast<size_t>(std::pow(V, positions.size()) + 0.5);
    table.children.reserve(n);
    table.probs.reserve(n);
    std::vector<int> assign(positions.size(), 0);
    while (true) {
        PartialState child = state;
        double prob = 1.0;
        for (size_t k = 0; k < positions.size(); ++k) {
            child.tokens[positions[k]] = assign[k];
            prob *= conds[k][assign[k]];
        }
        child.step = t - 1;
        table.children.push_back(std::move(child));
        table.probs.push_back(prob);
        // lexicographic increment, last position fastest
        size_t k = positions.size();
        while (k > 0) {
            if (++assign[k - 1] < V) break;
            assign[k - 1] = 0;
            --k;
        }
        if (k == 0) break;
    }
    return table;
}

PartialState DenoisingModel::clean_prediction(const PartialState& state) const {
    PartialState out = state;
    const Vocabulary& vocab = vocabulary();
    for (size_t p = 0; p < state.tokens.size(); ++p) {
        if (!vocab.is_mask(state.tokens[p])) continue;
        std::vector<double> cond = conditional(state, static_cast<int>(p));
        out.tokens[p] = static_cast<Token>(
            std::max_element(cond.begin(), cond.end()) - cond.begin());  // ties -> lowest id
    }
    out.step = 0;
    return out;
}

double DenoisingModel::mean_top1_confidence(const PartialState& state) const {
    const Vocabulary& vocab = vocabulary();
    double sum = 0.0;
    int n = 0;
    for (size_t p = 0; p < state.tokens.size(); ++p) {
        if (!vocab.is_mask(state.tokens[p])) continue;
        std::vector<double> cond = conditional(state, static_cast<int>(p));
        sum += *std::max_element(cond.begin(), cond.end());
        ++n;
    }
    return n == 0 ? 1.0 : sum / n;
}

double DenoisingModel::sequence_nll(const PartialState& terminal, const Schedule& schedule) const {
    const Vocabulary& vocab = vocabulary();
    if (terminal.mask_count(vocab) != 0) throw std::invalid_argument("sequence_nll: terminal has masks");
    double nll = 0.0;
    for (int t = schedule.steps(); t >= 1; --t) {
        PartialState parent = terminal;
        std::vector<bool> masked = schedule.masked_at(t);
        for (int p = 0; p < schedule.length(); ++p) {
            if (masked[p]) parent.tokens[p] = vocab.mask_id();
        }
        parent.step = t;
        for (int p : schedule.updatable_positions(t)) {
            nll -= std::log(conditional(parent, p)[terminal.tokens[p]]);
        }
    }
    return nll;
}

std::string DenoisingModel::describe() const {
    std::ostringstream ss;
    ss << "s3model v1 kind=" << kind() << " seed=" << model_seed()
       << " vocab=" << vocabulary().size;
    return ss.str();
}

// ---------------------------------------------------------------------------
// EnumerableChain

EnumerableChain::EnumerableChain(int vocab_size, int length, uint64_t seed)
    : length_(length), seed_(seed) {
    if (vocab_size < 2 || vocab_size > 5) throw std::invalid_argument("chain: vocab size must be 2..5");
    if (length < 1 || length > 6) throw std::invalid_argument("chain: length must be 1..6");
    vocab_.size = vocab_size;
}

std::vector<double> EnumerableChain::conditional(const PartialState& state, int position) const {
    // Hash of the visible context (token, position pairs) keys the table.
    uint64_t ctx = Rng::derive({seed_, static_cast<uint64_t>(position)});
    for (size_t p = 0; p < state.tokens.size(); ++p) {
        if (!vocab_.is_mask(state.tokens[p])) {
            ctx = Rng::hash_combine(ctx, Rng::derive({static_cast<uint64_t>(p),
                                                      static_cast<uint64_t>(state.tokens[p])}));
        }
    }
    Rng rng(ctx);
    std::vector<double> probs(vocab_.size);
    double sum = 0.0;
    for (double& w : probs) {
        w = 0.15 + rng.next_double();  // floor keeps full support
        sum += w;
    }
    for (double& w : probs) w /= sum;
    return probs;
}

// ---------------------------------------------------------------------------
// PlantedSynthetic

PlantedSynthetic::PlantedSynthetic(int vocab_size, int length, uint64_t seed, int n_patterns,
                                   int pattern_length)
    : length_(length), seed_(seed) {
    if (vocab_size < 8 || vocab_size > 32) throw std::invalid_argument("planted: vocab size must be 8..32");
    if (length < 16 || length > 64) throw std::invalid_argument("planted: length must be 16..64");
    if (pattern_length < 2 || pattern_length > length) {
        throw std::invalid_argument("planted: bad pattern length");
    }
    vocab_.size = vocab_size;

    const int V = vocab_size;
    unigram_.assign(length, std::vector<double>(V));
    bigram_.assign(length, std::vector<std::vector<double>>(V, std::vector<double>(V)));
    for (int p = 0; p < length; ++p) {
        Rng rng(Rng::derive({seed, 0x756e69ULL, static_cast<uint64_t>(p)}));
        int preferred = static_cast<int>(rng.next_below(V));
        double sum = 0.0;
        for (int v = 0; v < V; ++v) {
            unigram_[p][v] = 0.05 + rng.next_double() + (v == preferred ? 4.0 : 0.0);
            sum += unigram_[p][v];
        }
        for (int v = 0; v < V; ++v) unigram_[p][v] /= sum;
        for (int prev = 0; prev < V; ++prev) {
            Rng brng(Rng::derive({seed, 0x626967ULL, static_cast<uint64_t>(p),
                                  static_cast<uint64_t>(prev)}));
            int bpref = static_cast<int>(brng.next_below(V));
            double bsum = 0.0;
            for (int v = 0; v < V; ++v) {
                bigram_[p][prev][v] = 0.05 + brng.next_double() + (v == bpref ? 4.0 : 0.0);
                bsum += bigram_[p][prev][v];
            }
            for (int v = 0; v < V; ++v) bigram_[p][prev][v] /= bsum;
        }
    }

    // Planted patterns: pick per-slot tokens among the globally least
    // preferred unigram symbols so the base model rarely emits them.
    std::vector<double> mean_prob(V, 0.0);
    for (int p = 0; p < length; ++p) {
        for (int v = 0; v < V; ++v) mean_prob[v] += unigram_[p][v] / length;
    }
    std::vector<int> by_rarity(V);
    std::iota(by_rarity.begin(), by_rarity.end(), 0);
    std::sort(by_rarity.begin(), by_rarity.end(),
              [&](int a, int b) { return mean_prob[a] < mean_prob[b]; });
    Rng prng(Rng::derive({seed, 0x706174ULL}));
    const int rare_pool = std::max(2, V / 3);
    for (int k = 0; k < n_patterns; ++k) {
        std::vector<Token> pat(pattern_length);
        for (int j = 0; j < pattern_length; ++j) {
            pat[j] = by_rarity[prng.next_below(rare_pool)];
        }
        patterns_.push_back(std::move(pat));
    }

    // Mismatch check: empirical pattern frequency under the base model,
    // measured along a canonical K=1 left-to-right schedule.
    Schedule probe(length, 1, UpdatePolicy::LeftToRightBlocks, seed);
    Rng mc(Rng::derive({seed, 0x6d63ULL}));
    int hits = 0;
    const int trials = 10000;
    for (int r = 0; r < trials; ++r) {
        PartialState s = full_mask(vocab_, probe);
        for (int t = probe.steps(); t >= 1; --t) s = sample_transition(s, probe, t, mc);
        hits += contains_pattern(s) ? 1 : 0;
    }
    base_pattern_rate_ = static_cast<double>(hits) / trials;
    if (base_pattern_rate_ >= 0.05) {
        throw std::runtime_error("planted: base pattern rate >= 0.05; pick another seed");
    }
}

std::vector<double> PlantedSynthetic::conditional(const PartialState& state, int position) const {
    if (position > 0 && !vocab_.is_mask(state.tokens[position - 1])) {
        return bigram_[position][state.tokens[position - 1]];
    }
    return unigram_[position];
}

bool PlantedSynthetic::contains_pattern(const PartialState& terminal) const {
    return matched_pattern(terminal).has_value();
}

std::optional<int> PlantedSynthetic::matched_pattern(const PartialState& terminal) const {
    for (size_t k = 0; k < patterns_.size(); ++k) {
        const auto& pat = patterns_[k];
        for (size_t o = 0; o + pat.size() <= terminal.tokens.size(); ++o) {
            bool all = true;
            for (size_t j = 0; j < pat.size() && all; ++j) {
                all = terminal.tokens[o + j] == pat[j];
            }
            if (all) return static_cast<int>(k);
        }
    }
    return std::nullopt;
}

double PlantedSynthetic::pattern_score(const PartialState& terminal) const {
    double best = 0.0;
    for (const auto& pat : patterns_) {
        for (size_t o = 0; o + pat.size() <= terminal.tokens.size(); ++o) {
            int match = 0;
            for (size_t j = 0; j < pat.size(); ++j) {
                match += terminal.tokens[o + j] == pat[j] ? 1 : 0;
            }
            best = std::max(best, static_cast<double>(match) / pat.size());
        }
    }
    return best;
}

std::string PlantedSynthetic::describe() const {
    std::ostringstream ss;
    ss << DenoisingModel::describe() << " length=" << length_
       << " n_patterns=" << patterns_.size()
       << " pattern_length=" << (patterns_.empty() ? 0 : patterns_[0].size())
       << " patterns=";
    for (size_t k = 0; k < patterns_.size(); ++k) {
        if (k) ss << ';';
        for (size_t j = 0; j < patterns_[k].size(); ++j) {
            if (j) ss << ',';
            ss << patterns_[k][j];
        }
    }
    return ss.str();
}

// ---------------------------------------------------------------------------

std::vector<double> enumerate_terminal_distribution(const DenoisingModel& model,
                                                    const Schedule& schedule) {
    if (!model.enumerable()) throw std::logic_error("enumerate: model not enumerable");
    const int V = model.vocabulary().size;
    double space = std::pow(V, schedule.length());
    if (space > 1e5) throw std::invalid_argument("enumerate: state space too large");

    // Forward sweep; under a fixed schedule every terminal has exactly one
    // path, so no merging is needed.
    std::vector<std::pair<PartialState, double>> level;
    level.emplace_back(full_mask(model.vocabulary(), schedule), 1.0);
    for (int t = schedule.steps(); t >= 1; --t) {
        std::vector<std::pair<PartialState, double>> next;
        for (const auto& [state, prob] : level) {
            auto table = model.transition_distribution(state, schedule, t);
            for (size_t c = 0; c < table.children.size(); ++c) {
                next.emplace_back(std::move(table.children[c]), prob * table.probs[c]);
            }
        }
        level = std::move(next);
    }
    std::vector<double> p0(static_cast<size_t>(space + 0.5), 0.0);
    for (const auto& [state, prob] : level) {
        p0[terminal_index(state, V)] += prob;
    }
    return p0;
}

uint64_t terminal_index(const PartialState& terminal, int vocab_size) {
    uint64_t idx = 0;
    for (Token t : terminal.tokens) idx = idx * vocab_size + static_cast<uint64_t>(t);
    return idx;
}

PartialState terminal_from_index(uint64_t index, int vocab_size, int length) {
    PartialState s;
    s.tokens.assign(length, 0);
    s.step = 0;
    for (int p = length - 1; p >= 0; --p) {
        s.tokens[p] = static_cast<Token>(index % vocab_size);
        index /= vocab_size;
    }
    return s;
}

std::unique_ptr<DenoisingModel> make_model(const std::string& kind, int vocab_size, int length,
                                           uint64_t seed) {
    if (kind == "chain") return std::make_unique<EnumerableChain>(vocab_size, length, seed);
    if (kind == "planted") return std::make_unique<PlantedSynthetic>(vocab_size, length, seed);
    throw std::invalid_argument("unknown model kind: " + kind);
}

std::string serialize_model(const DenoisingModel& model) {
    std::ostringstream ss;
    ss << model.describe();
    if (model.kind() == "chain") {
        const auto& chain = dynamic_cast<const EnumerableChain&>(model);
        ss << " length=" << chain.length();
    }
    return ss.str();
}

std::unique_ptr<DenoisingModel> deserialize_model(const std::string& text) {
    std::istringstream in(text);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "s3model") throw std::invalid_argument("model file: bad magic");
    if (version != "v1") throw std::invalid_argument("model file: unsupported version " + version);
    std::map<std::string, std::string> kv;
    std::string tok;
    while (in >> tok) {
        size_t eq = tok.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("model file: expected key=value");
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    const std::string kind = kv.at("kind");
    const uint64_t seed = std::stoull(kv.at("seed"));
    const int vocab = std::stoi(kv.at("vocab"));
    const int length = std::stoi(kv.at("length"));
    if (kind == "chain") return std::make_unique<EnumerableChain>(vocab, length, seed);
    if (kind == "planted") {
        return std::make_unique<PlantedSynthetic>(vocab, length, seed, std::stoi(kv.at("n_patterns")),
                                                  std::stoi(kv.at("pattern_length")));
    }
    throw std::invalid_argument("model file: unknown kind " + kind);
}

}  // namespace s3s
