#pragma once

#include <functional>
#include <map>
#include <vector>

#include "s3search/core.hpp"
#include "s3search/model.hpp"

namespace s3s::oracle {

// Explicit distribution over all V^L terminals, indexed by terminal_index.
struct TerminalTable {
    std::vector<double> p;
    int vocab_size = 0;
    int length = 0;

    void validate_normalized(double tol = 1e-9) const;
};

// Terminal reward in [0,1], evaluated on mask-free states.
using TerminalScoreFn = std::function<double(const PartialState&)>;

TerminalTable base_terminal_table(const DenoisingModel& model, const Schedule& schedule);

// f evaluated at every terminal index of the table's support.
std::vector<double> score_table(const TerminalTable& shape, const TerminalScoreFn& f);

// p~(x) = p0(x) exp(tau f(x)) / Z.
TerminalTable gibbs_tilt(const TerminalTable& p0, const std::vector<double>& f, double tau);

// 0.5 * sum |p - q|.
double tv_distance(const TerminalTable& p, const TerminalTable& q);

// Expected future exponentiated reward h_t for every reachable partial
// state, stored in log space. Boundary: log h_0 = tau * f.
class BackwardTable {
  public:
    BackwardTable(const DenoisingModel& model, const Schedule& schedule, const TerminalScoreFn& f,
                  double tau);

    double log_h(int t, const PartialState& state) const;
    double h(int t, const PartialState& state) const;
    int steps() const { return steps_; }

    // Largest |h_t(x) - sum_child p * h_{t-1}(child)| / h_t(x) over all
    // stored states; the recursion residual invariant.
    double max_recursion_residual(const DenoisingModel& model, const Schedule& schedule) const;

    // Largest per-state gap between the normalized product p_t(x_t) h_t(x_t)
    // and the step-t marginal of the tilted path measure.
    double max_tilted_marginal_residual(const DenoisingModel& model, const Schedule& schedule,
                                        const TerminalScoreFn& f, double tau) const;

  private:
    std::vector<std::map<std::vector<Token>, double>> logh_;  // [t][tokens]
    int steps_ = 0;
};

// Doob-twisted child distribution, aligned with
// transition_distribution(state, schedule, t).children ordering.
std::vector<double> twisted_kernel(const DenoisingModel& model, const Schedule& schedule,
                                   const BackwardTable& h, const PartialState& state, int t);

// One terminal drawn by chaining twisted kernels from the full mask; exact
// sampler for the Gibbs-tilted target.
PartialState exact_twisted_sample(const DenoisingModel& model, const Schedule& schedule,
                                  const BackwardTable& h, Rng& rng);

enum class ResampleKind { Multinomial, Ssp };

// SMC with base-kernel proposals and incremental potentials
// G_t = h_{t-1}(child) / h_t(parent); returns the weighted empirical
// terminal distribution over n_particles.
TerminalTable run_twisted_smc(const DenoisingModel& model, const Schedule& schedule,
                              const BackwardTable& h, int n_particles, ResampleKind kind,
                              Rng& rng);

// Exact E[max_{k<=K} f] via order statistics on the discrete (p0, f) pair.
double best_of_k_expectation(const TerminalTable& p0, const std::vector<double>& f, int K);

// Mean and standard deviation of f under p0 (the Q and sigma of the
// logarithmic best-of-K bound).
std::pair<double, double> score_mean_stddev(const TerminalTable& p0, const std::vector<double>& f);

}  // namespace s3s::oracle
