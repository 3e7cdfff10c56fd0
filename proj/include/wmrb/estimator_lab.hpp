#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wmrb {

// Statistical study of the two rank estimators the trainer can use: the
// online one (sample irrelevant items until a violator appears, estimate
// floor((N-1)/trials)) and the sampled-batch one (count violators in a
// fixed-size candidate subset, scale by N/|Z|). Closed forms below treat the
// catalog as N items of which r = round(p*N) violate, so every run snaps the
// requested normalized rank p to r/N first; that keeps Monte Carlo runs,
// which count whole items, on exactly the same distribution.

struct Moments {
    double mean = 0.0;
    double stddev = 0.0;
};

// Trial count k is geometric with success probability p: P(k) = (1-p)^{k-1} p.
// Estimate is floor((N-1)/k); trial budgets beyond max_trials produce no
// violator and count as estimate 0. max_trials 0 means the default N-1
// (beyond which the estimate is 0 anyway, so N-1 equals "unbounded").
// Moments are exact sums over k, not sampled.
Moments online_estimator_moments(double p, uint64_t item_set_size,
                                 uint64_t max_trials = 0);

// Expected value of the normalized online estimate 1/k under the same
// geometric law: sum over k of (1/k) * p * (1-p)^{k-1}. Exceeds p for all
// p in (0,1) -- the estimator's overshoot at small ranks.
double online_normalized_mean(double p, uint64_t max_terms);

// Violators found in a without-replacement sample of |Z| = round(q*N) items
// follow a hypergeometric law; the estimate (N/|Z|) * count is exactly
// unbiased with std (N/|Z|) * sqrt(|Z| p(1-p) (N-|Z|)/(N-1)).
Moments batch_estimator_moments(double p, uint64_t item_set_size, double q);

// Same subset sampling, but violators carry hinge magnitudes instead of a
// 0/1 indicator. Magnitudes are taken evenly spaced in (0,1]: i/r for
// i = 1..r. Returns std relative to the full-population hinge sum.
double batch_hinge_relative_std(double p, uint64_t item_set_size, double q);

// 30 points log-spaced over [1e-5, 0.5].
std::vector<double> default_p_grid();

struct SimulateOptions {
    uint64_t item_set_size = 100000;
    std::vector<double> p_grid;  // empty -> default_p_grid()
    std::vector<double> q_list;  // empty -> {0.001, 0.01, 0.1}
    uint64_t trials = 10000;     // Monte Carlo draws per estimator; 0 -> closed forms only
    uint64_t seed = 42;
    uint32_t threads = 1;
    bool include_hinge = false;  // append hinge-variant columns
};

struct EstimatorStats {
    uint64_t item_set_size = 0;
    std::vector<double> q_list;
    uint64_t trials = 0;
    bool include_hinge = false;

    struct Row {
        double p = 0.0;  // snapped to true_rank / N
        uint64_t true_rank = 0;
        double online_rel_std = 0.0;
        double online_rel_bias = 0.0;
        std::vector<double> batch_rel_std;  // one per q
        // filled when trials > 0
        double online_rel_std_mc = 0.0;
        double online_rel_bias_mc = 0.0;
        std::vector<double> batch_rel_std_mc;
        std::vector<double> batch_rel_bias_mc;
        // filled when include_hinge
        std::vector<double> hinge_rel_std;
    };
    std::vector<Row> rows;

    // Header `p,true_rank,online_rel_std,online_rel_bias,batch_rel_std_q{q}...`;
    // Monte Carlo columns (suffix _mc) and hinge columns follow when present.
    // Values carry 6 significant digits.
    std::string to_csv() const;
};

// One row per grid p; rows are independent and computed on per-row RNG
// streams derived from the master seed, so results do not depend on the
// thread count.
EstimatorStats simulate_estimators(const SimulateOptions& options);

}  // namespace wmrb
