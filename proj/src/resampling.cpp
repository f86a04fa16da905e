#include "s3search/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace s3s::resampling {

std::vector<double> tilt_weights(const std::vector<double>& scores, double lambda) {
    if (scores.empty()) throw std::invalid_argument("tilt_weights: empty scores");
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> w(scores.size());
    double sum = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
        w[i] = std::exp(lambda * (scores[i] - mx));
        sum += w[i];
    }
    if (!(sum > 0.0) || !std::isfinite(sum)) {
        // extreme lambda: uniform over the argmax set
        double n = 0.0;
        for (size_t i = 0; i < scores.size(); ++i) n += scores[i] == mx ? 1.0 : 0.0;
        for (size_t i = 0; i < scores.size(); ++i) w[i] = scores[i] == mx ? 1.0 / n : 0.0;
        return w;
    }
    for (double& v : w) v /= sum;
    return w;
}

double ess(const std::vector<double>& weights) {
    double s2 = 0.0;
    for (double w : weights) s2 += w * w;
    return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

std::vector<int> ssp_round(const std::vector<double>& xi, Rng& rng) {
    const size_t n = xi.size();
    std::vector<int> counts(n);
    std::vector<double> frac(n);
    std::vector<size_t> queue;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (xi[i] < 0.0) throw std::invalid_argument("ssp_round: negative expectation");
        total += xi[i];
        counts[i] = static_cast<int>(std::floor(xi[i]));
        frac[i] = xi[i] - counts[i];
        if (frac[i] < 1e-12) frac[i] = 0.0;          // snap to exact integers
        else if (frac[i] > 1.0 - 1e-12) {            // ditto from above
            frac[i] = 0.0;
            counts[i] += 1;
        }
        if (frac[i] > 0.0) queue.push_back(i);
    }
    if (std::fabs(total - std::round(total)) > 1e-6) {
        throw std::invalid_argument("ssp_round: expectations must sum to an integer");
    }
    // Pairwise residual rounding: repeatedly merge the two lowest-index
    // fractional entries until one (or zero) remains.
    size_t qi = 0;
    while (queue.size() - qi >= 2) {
        size_t a = queue[qi];
        size_t b = queue[qi + 1];
        double fa = frac[a], fb = frac[b];
        double d1 = std::min(fb, 1.0 - fa);  // b down / a up
        double d2 = std::min(fa, 1.0 - fb);  // a down / b up
        double u = rng.next_double();
        if (u < d2 / (d1 + d2)) {
            fa += d1;
            fb -= d1;
        } else {
            fa -= d2;
            fb += d2;
        }
        auto settle = [&](size_t idx, double f) {
            if (f <= 1e-12) {
                frac[idx] = 0.0;
                return true;
            }
            if (f >= 1.0 - 1e-12) {
                frac[idx] = 0.0;
                counts[idx] += 1;
                return true;
            }
            frac[idx] = f;
            return false;
        };
        bool a_done = settle(a, fa);
        bool b_done = settle(b, fb);
        // keep exactly one live entry at the queue head
        if (a_done && b_done) {
            qi += 2;
        } else if (a_done) {
            qi += 1;
        } else if (b_done) {
            queue[qi + 1] = a;
            qi += 1;
        } else {
            throw std::logic_error("ssp_round: pair left two live residuals");
        }
    }
    if (queue.size() - qi == 1) {
        size_t a = queue[qi];
        if (frac[a] > 0.5) counts[a] += 1;  // residual must be ~0 or ~1 here
    }
    return counts;
}

std::vector<int> materialize(const std::vector<int>& counts) {
    std::vector<int> parents;
    for (size_t i = 0; i < counts.size(); ++i) {
        for (int k = 0; k < counts[i]; ++k) parents.push_back(static_cast<int>(i));
    }
    return parents;
}

}  // namespace s3s::resampling
