#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "s3search/rng.hpp"

namespace s3s {

using Token = int32_t;

// Token alphabet. Decodable symbols are the dense range 0..size-1 and the
// mask symbol is one past the end, so decodable distributions live on a
// contiguous index range.
struct Vocabulary {
    int size = 2;  // number of decodable symbols, >= 2

    Token mask_id() const { return size; }
    bool is_mask(Token t) const { return t == size; }
};

enum class UpdatePolicy { LeftToRightBlocks, RandomBlocks };

// Fixed decoding schedule: block length, update policy, step count, output
// length. Steps run T -> 1, producing states at T-1 -> 0. Block order is
// frozen at construction (seed-determined for RandomBlocks).
class Schedule {
  public:
    Schedule(int length, int block_length, UpdatePolicy policy, uint64_t seed);

    int length() const { return length_; }
    int block_length() const { return block_length_; }
    int steps() const { return steps_; }
    UpdatePolicy policy() const { return policy_; }

    // Positions (0-based) updated at step t, 1 <= t <= T. Step T updates the
    // first block in the frozen order, step 1 the last.
    const std::vector<int>& updatable_positions(int t) const;

    // Positions still masked at step t (the union of U_t..U_1).
    std::vector<bool> masked_at(int t) const;

  private:
    int length_;
    int block_length_;
    int steps_;
    UpdatePolicy policy_;
    std::vector<std::vector<int>> update_sets_;  // index 0 == step T
};

// Length-L token sequence over a vocabulary plus MASK, tagged with the
// diffusion step it sits at (T = fully masked, 0 = terminal).
struct PartialState {
    std::vector<Token> tokens;
    int step = 0;

    bool operator==(const PartialState& o) const { return tokens == o.tokens && step == o.step; }

    int mask_count(const Vocabulary& vocab) const {
        int n = 0;
        for (Token t : tokens) n += vocab.is_mask(t) ? 1 : 0;
        return n;
    }
};

PartialState full_mask(const Vocabulary& vocab, const Schedule& schedule);

struct Particle {
    PartialState state;
    int lineage = -1;          // index of the parent at the previous step
    uint64_t rng_stream = 0;   // substream key for this particle's draws
};

enum class Mode { Baseline, BestOfK, TiltingOnly, LookaheadOnly, S3 };

std::string mode_name(Mode m);
Mode parse_mode(const std::string& name);
UpdatePolicy parse_policy(const std::string& name);
std::string policy_name(UpdatePolicy p);

struct RunConfig {
    int particles = 1;    // N
    int branching = 1;    // b
    double lambda = 1.0;  // inverse temperature for tilt weights
    double tau = 1.0;     // Gibbs tilt temperature (oracle module)
    int block_length = 1;
    int length = 1;
    int steps = 0;        // 0 = derive as ceil(length / block_length)
    UpdatePolicy policy = UpdatePolicy::LeftToRightBlocks;
    uint64_t seed = 0;
    Mode mode = Mode::Baseline;
    std::string model = "chain";
    std::string verifier_profile = "target";

    int budget_k() const { return particles * branching; }
    void validate() const;
    Schedule make_schedule() const;
};

// Plain-text key=value configuration file. Unknown keys are an error.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace s3s
