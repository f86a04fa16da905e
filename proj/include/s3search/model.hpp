#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "s3search/core.hpp"

namespace s3s {

// Reverse-denoising model contract. Toy models are block-factorized: within
// an update set the per-position conditionals are independent given the
// parent state, which keeps exact enumeration tractable.
class DenoisingModel {
  public:
    virtual ~DenoisingModel() = default;

    virtual const Vocabulary& vocabulary() const = 0;
    virtual bool enumerable() const = 0;
    virtual std::string kind() const = 0;
    virtual uint64_t model_seed() const = 0;

    // Categorical over decodable symbols for one masked position, given the
    // parent state. Indexed 0..V-1; sums to 1.
    virtual std::vector<double> conditional(const PartialState& state, int position) const = 0;

    PartialState sample_transition(const PartialState& state, const Schedule& schedule, int t,
                                   Rng& rng) const;

    // Full child table over V^|U_t| completions (enumerable models only).
    // Children are ordered lexicographically by the tokens of U_t.
    struct ChildTable {
        std::vector<PartialState> children;
        std::vector<double> probs;
    };
    ChildTable transition_distribution(const PartialState& state, const Schedule& schedule,
                                       int t) const;

    // Fill every masked position with the argmax of its conditional given
    // the current state; ties break to the lowest symbol id.
    PartialState clean_prediction(const PartialState& state) const;

    // Top-1 conditional probability per masked position (for confidence
    // traces). Unmasked positions are skipped.
    double mean_top1_confidence(const PartialState& state) const;

    // -log p0(x0) along the fixed schedule factorization.
    double sequence_nll(const PartialState& terminal, const Schedule& schedule) const;

    // Serialized one-line description (kind, seed, V, L, extras).
    virtual std::string describe() const;
};

// Exactly enumerable chain for oracle validation. Conditionals are generated
// deterministically from (model seed, position, visible-context hash) with
// full support, so importance ratios stay bounded.
class EnumerableChain : public DenoisingModel {
  public:
    EnumerableChain(int vocab_size, int length, uint64_t seed);

    const Vocabulary& vocabulary() const override { return vocab_; }
    bool enumerable() const override { return true; }
    std::string kind() const override { return "chain"; }
    uint64_t model_seed() const override { return seed_; }
    int length() const { return length_; }

    std::vector<double> conditional(const PartialState& state, int position) const override;

  private:
    Vocabulary vocab_;
    int length_;
    uint64_t seed_;
};

// Larger synthetic model with a seed-generated positional-bigram preference
// table and a planted set of low-probability high-reward patterns, used to
// reproduce the density-quality mismatch at desk scale.
class PlantedSynthetic : public DenoisingModel {
  public:
    PlantedSynthetic(int vocab_size, int length, uint64_t seed, int n_patterns = 3,
                     int pattern_length = 4);

    const Vocabulary& vocabulary() const override { return vocab_; }
    bool enumerable() const override { return false; }
    std::string kind() const override { return "planted"; }
    uint64_t model_seed() const override { return seed_; }
    int length() const { return length_; }

    std::vector<double> conditional(const PartialState& state, int position) const override;

    const std::vector<std::vector<Token>>& patterns() const { return patterns_; }

    // True when some planted pattern appears contiguously in the terminal.
    bool contains_pattern(const PartialState& terminal) const;

    // Graded score in [0,1]: best fraction of matched positions over all
    // (pattern, offset) windows. 1.0 iff a full pattern is present.
    double pattern_score(const PartialState& terminal) const;

    // Index of the fully matched pattern, if any (lowest pattern id wins).
    std::optional<int> matched_pattern(const PartialState& terminal) const;

    // Empirical pattern frequency under the base model, measured at
    // construction time with 10^4 rollouts. Must stay below 0.05.
    double base_pattern_rate() const { return base_pattern_rate_; }

    std::string describe() const override;

  private:
    Vocabulary vocab_;
    int length_;
    uint64_t seed_;
    std::vector<std::vector<double>> unigram_;            // [position][token]
    std::vector<std::vector<std::vector<double>>> bigram_; // [position][prev][token]
    std::vector<std::vector<Token>> patterns_;
    double base_pattern_rate_ = 0.0;
};

// Exact terminal distribution p0 over all V^L sequences, by forward
// enumeration of the schedule (enumerable models, V^L <= 1e5).
std::vector<double> enumerate_terminal_distribution(const DenoisingModel& model,
                                                    const Schedule& schedule);

// Dense index of a terminal state in the V^L enumeration (base-V, position 0
// most significant).
uint64_t terminal_index(const PartialState& terminal, int vocab_size);
PartialState terminal_from_index(uint64_t index, int vocab_size, int length);

std::unique_ptr<DenoisingModel> make_model(const std::string& kind, int vocab_size, int length,
                                           uint64_t seed);

// Versioned one-line model files so a run is reconstructible from
// config + model file.
std::string serialize_model(const DenoisingModel& model);
std::unique_ptr<DenoisingModel> deserialize_model(const std::string& text);

}  // namespace s3s
