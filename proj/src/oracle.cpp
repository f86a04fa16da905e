#include "s3search/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "s3search/resampling.hpp"

namespace s3s::oracle {

namespace {

double logsumexp(const std::vector<double>& v) {
    double mx = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(mx)) return mx;
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

// All assignments over the currently unmasked positions at step t.
std::vector<PartialState> reachable_states(const DenoisingModel& model, const Schedule& schedule,
                                           int t) {
    const int V = model.vocabulary().size;
    const int L = schedule.length();
    std::vector<bool> masked = schedule.masked_at(t);
    std::vector<int> open;
    for (int i = 0; i < L; ++i) {
        if (!masked[i]) open.push_back(i);
    }
    uint64_t count = 1;
    for (size_t k = 0; k < open.size(); ++k) {
        count *= V;
        if (count > 100000) throw std::invalid_argument("oracle: state space too large");
    }
    std::vector<PartialState> states;
    states.reserve(count);
    for (uint64_t idx = 0; idx < count; ++idx) {
        PartialState s;
        s.tokens.assign(L, model.vocabulary().mask_id());
        s.step = t;
        uint64_t rem = idx;
        for (size_t k = open.size(); k-- > 0;) {
            s.tokens[open[k]] = static_cast<Token>(rem % V);
            rem /= V;
        }
        states.push_back(std::move(s));
    }
    return states;
}

}  // namespace

void TerminalTable::validate_normalized(double tol) const {
    double sum = 0.0;
    for (double v : p) {
        if (v < 0.0) throw std::invalid_argument("terminal table: negative mass");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > tol) throw std::invalid_argument("terminal table: not normalized");
}

TerminalTable base_terminal_table(const DenoisingModel& model, const Schedule& schedule) {
    TerminalTable t;
    t.vocab_size = model.vocabulary().size;
    t.length = schedule.length();
    t.p = enumerate_terminal_distribution(model, schedule);
    return t;
}

std::vector<double> score_table(const TerminalTable& shape, const TerminalScoreFn& f) {
    std::vector<double> out(shape.p.size());
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = f(terminal_from_index(i, shape.vocab_size, shape.length));
    }
    return out;
}

TerminalTable gibbs_tilt(const TerminalTable& p0, const std::vector<double>& f, double tau) {
    if (f.size() != p0.p.size()) throw std::invalid_argument("gibbs_tilt: size mismatch");
    if (tau < 0.0) throw std::invalid_argument("gibbs_tilt: tau must be >= 0");
    TerminalTable out = p0;
    double z = 0.0;
    for (size_t i = 0; i < out.p.size(); ++i) {
        out.p[i] = p0.p[i] * std::exp(tau * f[i]);
        z += out.p[i];
    }
    for (double& v : out.p) v /= z;
    return out;
}

double tv_distance(const TerminalTable& p, const TerminalTable& q) {
    if (p.p.size() != q.p.size()) throw std::invalid_argument("tv_distance: support mismatch");
    double s = 0.0;
    for (size_t i = 0; i < p.p.size(); ++i) s += std::fabs(p.p[i] - q.p[i]);
    return 0.5 * s;
}

BackwardTable::BackwardTable(const DenoisingModel& model, const Schedule& schedule,
                             const TerminalScoreFn& f, double tau) {
    steps_ = schedule.steps();
    logh_.resize(steps_ + 1);
    for (const PartialState& s : reachable_states(model, schedule, 0)) {
        logh_[0][s.tokens] = tau * f(s);
    }
    for (int t = 1; t <= steps_; ++t) {
        for (const PartialState& s : reachable_states(model, schedule, t)) {
            auto table = model.transition_distribution(s, schedule, t);
            std::vector<double> terms;
            terms.reserve(table.children.size());
            for (size_t k = 0; k < table.children.size(); ++k) {
                terms.push_back(std::log(table.probs[k]) +
                                logh_[t - 1].at(table.children[k].tokens));
            }
            logh_[t][s.tokens] = logsumexp(terms);
        }
    }
}

double BackwardTable::log_h(int t, const PartialState& state) const {
    return logh_.at(t).at(state.tokens);
}

double BackwardTable::h(int t, const PartialState& state) const {
    return std::exp(log_h(t, state));
}

double BackwardTable::max_recursion_residual(const DenoisingModel& model,
                                             const Schedule& schedule) const {
    double worst = 0.0;
    for (int t = 1; t <= steps_; ++t) {
        for (const auto& [tokens, lh] : logh_[t]) {
            PartialState s{tokens, t};
            auto table = model.transition_distribution(s, schedule, t);
            double sum = 0.0;
            for (size_t k = 0; k < table.children.size(); ++k) {
                sum += table.probs[k] * std::exp(logh_[t - 1].at(table.children[k].tokens));
            }
            worst = std::max(worst, std::fabs(sum - std::exp(lh)) / std::exp(lh));
        }
    }
    return worst;
}

double BackwardTable::max_tilted_marginal_residual(const DenoisingModel& model,
                                                   const Schedule& schedule,
                                                   const TerminalScoreFn& f, double tau) const {
    // The path from full mask to a terminal is unique under a fixed
    // schedule, so the tilted path marginal at step t sums the tilted
    // terminal mass consistent with each partial state.
    TerminalTable p0 = base_terminal_table(model, schedule);
    std::vector<double> fv = score_table(p0, f);
    TerminalTable target = gibbs_tilt(p0, fv, tau);

    double worst = 0.0;
    for (int t = 0; t <= steps_; ++t) {
        std::vector<PartialState> states = reachable_states(model, schedule, t);
        // base marginal p_t and tilted marginal at step t
        std::vector<double> base(states.size(), 0.0), tilted(states.size(), 0.0);
        std::vector<bool> masked = schedule.masked_at(t);
        for (size_t idx = 0; idx < p0.p.size(); ++idx) {
            PartialState term = terminal_from_index(idx, p0.vocab_size, p0.length);
            for (size_t si = 0; si < states.size(); ++si) {
                bool consistent = true;
                for (int pos = 0; pos < p0.length && consistent; ++pos) {
                    if (!masked[pos] && states[si].tokens[pos] != term.tokens[pos]) {
                        consistent = false;
                    }
                }
                if (consistent) {
                    base[si] += p0.p[idx];
                    tilted[si] += target.p[idx];
                }
            }
        }
        // normalized p_t * h_t must equal the tilted marginal
        std::vector<double> ph(states.size());
        double z = 0.0;
        for (size_t si = 0; si < states.size(); ++si) {
            ph[si] = base[si] * std::exp(logh_.at(t).at(states[si].tokens));
            z += ph[si];
        }
        for (size_t si = 0; si < states.size(); ++si) {
            worst = std::max(worst, std::fabs(ph[si] / z - tilted[si]));
        }
    }
    return worst;
}

std::vector<double> twisted_kernel(const DenoisingModel& model, const Schedule& schedule,
                                   const BackwardTable& h, const PartialState& state, int t) {
    auto table = model.transition_distribution(state, schedule, t);
    std::vector<double> out(table.children.size());
    double parent_lh = h.log_h(t, state);
    double sum = 0.0;
    for (size_t k = 0; k < table.children.size(); ++k) {
        out[k] = table.probs[k] * std::exp(h.log_h(t - 1, table.children[k]) - parent_lh);
        sum += out[k];
    }
    for (double& v : out) v /= sum;  // Doob identity gives sum == 1 already
    return out;
}

PartialState exact_twisted_sample(const DenoisingModel& model, const Schedule& schedule,
                                  const BackwardTable& h, Rng& rng) {
    PartialState state = full_mask(model.vocabulary(), schedule);
    for (int t = schedule.steps(); t >= 1; --t) {
        auto table = model.transition_distribution(state, schedule, t);
        std::vector<double> probs = twisted_kernel(model, schedule, h, state, t);
        double u = rng.next_double();
        double acc = 0.0;
        size_t pick = probs.size() - 1;
        for (size_t k = 0; k < probs.size(); ++k) {
            acc += probs[k];
            if (u < acc) {
                pick = k;
                break;
            }
        }
        state = table.children[pick];
    }
    return state;
}

TerminalTable run_twisted_smc(const DenoisingModel& model, const Schedule& schedule,
                              const BackwardTable& h, int n_particles, ResampleKind kind,
                              Rng& rng) {
    const int T = schedule.steps();
    std::vector<PartialState> pop(n_particles, full_mask(model.vocabulary(), schedule));
    std::vector<double> logw(n_particles, 0.0);

    for (int t = T; t >= 1; --t) {
        for (int i = 0; i < n_particles; ++i) {
            double parent_lh = h.log_h(t, pop[i]);
            pop[i] = model.sample_transition(pop[i], schedule, t, rng);
            logw[i] += h.log_h(t - 1, pop[i]) - parent_lh;  // log G_t
        }
        // normalize and resample every step
        double mx = *std::max_element(logw.begin(), logw.end());
        std::vector<double> w(n_particles);
        double sum = 0.0;
        for (int i = 0; i < n_particles; ++i) {
            w[i] = std::exp(logw[i] - mx);
            sum += w[i];
        }
        for (double& v : w) v /= sum;
        std::vector<int> counts(n_particles, 0);
        if (kind == ResampleKind::Ssp) {
            std::vector<double> xi(n_particles);
            for (int i = 0; i < n_particles; ++i) xi[i] = n_particles * w[i];
            counts = resampling::ssp_round(xi, rng);
        } else {
            std::vector<double> cdf(n_particles);
            std::partial_sum(w.begin(), w.end(), cdf.begin());
            for (int i = 0; i < n_particles; ++i) {
                double u = rng.next_double();
                size_t k = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
                if (k >= static_cast<size_t>(n_particles)) k = n_particles - 1;
                counts[k] += 1;
            }
        }
        std::vector<PartialState> next;
        next.reserve(n_particles);
        for (int i = 0; i < n_particles; ++i) {
            for (int c = 0; c < counts[i]; ++c) next.push_back(pop[i]);
        }
        pop = std::move(next);
        std::fill(logw.begin(), logw.end(), 0.0);
    }

    TerminalTable out;
    out.vocab_size = model.vocabulary().size;
    out.length = schedule.length();
    size_t terminals = 1;
    for (int i = 0; i < out.length; ++i) terminals *= out.vocab_size;
    out.p.assign(terminals, 0.0);
    for (const PartialState& s : pop) {
        out.p[terminal_index(s, out.vocab_size)] += 1.0 / n_particles;
    }
    return out;
}

double best_of_k_expectation(const TerminalTable& p0, const std::vector<double>& f, int K) {
    if (K < 1) throw std::invalid_argument("best_of_k_expectation: K >= 1");
    // aggregate the score distribution, then order statistics of the max
    std::map<double, double> mass;
    for (size_t i = 0; i < p0.p.size(); ++i) mass[f[i]] += p0.p[i];
    double e = 0.0, cdf = 0.0;
    for (const auto& [v, m] : mass) {
        double lo = std::pow(cdf, K);
        cdf += m;
        e += v * (std::pow(std::min(cdf, 1.0), K) - lo);
    }
    return e;
}

std::pair<double, double> score_mean_stddev(const TerminalTable& p0,
                                            const std::vector<double>& f) {
    double mean = 0.0;
    for (size_t i = 0; i < p0.p.size(); ++i) mean += p0.p[i] * f[i];
    double var = 0.0;
    for (size_t i = 0; i < p0.p.size(); ++i) var += p0.p[i] * (f[i] - mean) * (f[i] - mean);
    return {mean, std::sqrt(var)};
}

}  // namespace s3s::oracle
