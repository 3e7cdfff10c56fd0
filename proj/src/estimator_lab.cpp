#include "wmrb/estimator_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "wmrb/errors.hpp"
#include "wmrb/parallel.hpp"

namespace wmrb {

namespace {

void check_p(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw ConfigError("normalized rank p must lie in (0,1), got " + std::to_string(p));
}

void check_n(uint64_t n) {
    if (n < 2) throw ConfigError("item set size must be >= 2");
}

uint64_t snap_rank(double p, uint64_t n) {
    auto r = static_cast<int64_t>(std::llround(p * double(n)));
    return uint64_t(std::clamp<int64_t>(r, 1, int64_t(n) - 1));
}

uint64_t sample_count(double q, uint64_t n) {
    if (!(q > 0.0 && q <= 1.0))
        throw ConfigError("sampling fraction q must lie in (0,1], got " + std::to_string(q));
    auto m = static_cast<int64_t>(std::llround(q * double(n)));
    return uint64_t(std::clamp<int64_t>(m, 1, int64_t(n)));
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Uniform in (0,1), never exactly 0 or 1 (safe under log()).
double next_unit(std::mt19937_64& rng) {
    return (double(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Geometric trial count via CDF inversion; exact law P(k)=(1-p)^{k-1} p.
uint64_t geometric_trials(double p, std::mt19937_64& rng) {
    double u = next_unit(rng);
    double k = std::floor(std::log(u) / std::log1p(-p));
    return 1 + uint64_t(std::max(0.0, k));
}

// log of binomial coefficients, table-backed for small populations.
class LogChoose {
public:
    explicit LogChoose(uint64_t max_n) {
        if (max_n <= 4'000'000) {
            log_fact_.resize(max_n + 1, 0.0);
            for (uint64_t i = 1; i <= max_n; ++i)
                log_fact_[i] = log_fact_[i - 1] + std::log(double(i));
        }
    }

    double operator()(uint64_t n, uint64_t k) const {
        if (k > n) return -std::numeric_limits<double>::infinity();
        if (!log_fact_.empty()) return log_fact_[n] - log_fact_[k] - log_fact_[n - k];
        return std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) -
               std::lgamma(double(n - k) + 1);
    }

private:
    std::vector<double> log_fact_;
};

// CDF of the violator count in a size-m without-replacement sample from n
// items of which r violate, over its support [lo, lo + size).
struct HyperCdf {
    int64_t lo = 0;
    std::vector<double> cdf;

    HyperCdf(uint64_t n, uint64_t r, uint64_t m, const LogChoose& lc) {
        lo = std::max<int64_t>(0, int64_t(m) - int64_t(n - r));
        int64_t hi = int64_t(std::min(r, m));
        cdf.reserve(size_t(hi - lo + 1));
        double base = lc(n, m);
        double running = 0.0;
        for (int64_t x = lo; x <= hi; ++x) {
            running += std::exp(lc(r, uint64_t(x)) + lc(n - r, m - uint64_t(x)) - base);
            cdf.push_back(running);
        }
    }

    int64_t sample(std::mt19937_64& rng) const {
        double u = next_unit(rng) * cdf.back();
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
        return lo + (it - cdf.begin());
    }
};

struct SampleStats {
    double sum = 0.0, sum_sq = 0.0;
    uint64_t count = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++count;
    }
    double mean() const { return count ? sum / double(count) : 0.0; }
    double stddev() const {
        if (count < 2) return 0.0;
        double var = (sum_sq - sum * sum / double(count)) / double(count - 1);
        return std::sqrt(std::max(0.0, var));
    }
};

void append_f(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    out += buf;
}

std::string q_label(double q) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", q);
    return buf;
}

}  // namespace

Moments online_estimator_moments(double p, uint64_t item_set_size, uint64_t max_trials) {
    check_p(p);
    check_n(item_set_size);
    uint64_t n = item_set_size;
    if (max_trials == 0) max_trials = n - 1;

    // Raw moments over the trial-count law; estimates are 0 past k = n-1,
    // and the residual mass past max_trials also maps to 0, so both
    // truncations contribute nothing.
    double m1 = 0.0, m2 = 0.0;
    double pk = p;  // P(first violator on trial k)
    for (uint64_t k = 1; k <= max_trials && pk > 0.0; ++k) {
        uint64_t est = (n - 1) / k;
        if (est == 0) break;
        double v = double(est);
        m1 += pk * v;
        m2 += pk * v * v;
        pk *= 1.0 - p;
    }
    return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

double online_normalized_mean(double p, uint64_t max_terms) {
    check_p(p);
    double sum = 0.0;
    double pk = p;
    // stop once terms cannot move the sum; also keeps pk out of the
    // denormal range, where the decay pk *= (1-p) stalls at the smallest
    // subnormal and never reaches zero
    for (uint64_t k = 1; k <= max_terms && pk > 1e-300; ++k) {
        sum += pk / double(k);
        pk *= 1.0 - p;
    }
    return sum;
}

Moments batch_estimator_moments(double p, uint64_t item_set_size, double q) {
    check_p(p);
    check_n(item_set_size);
    double n = double(item_set_size);
    double m = double(sample_count(q, item_set_size));
    double scale = n / m;
    double var_count = m * p * (1.0 - p) * (n - m) / (n - 1.0);
    return {p * n, scale * std::sqrt(var_count)};
}

double batch_hinge_relative_std(double p, uint64_t item_set_size, double q) {
    check_p(p);
    check_n(item_set_size);
    uint64_t n = item_set_size;
    uint64_t r = snap_rank(p, n);
    double m = double(sample_count(q, n));

    // Violator magnitudes i/r for i=1..r, zeros elsewhere.
    double total = double(r + 1) / 2.0;  // sum of magnitudes
    double sum_sq = double(r + 1) * double(2 * r + 1) / (6.0 * double(r));
    double mu = total / double(n);
    double var_pop = sum_sq / double(n) - mu * mu;

    double var_sum = m * var_pop * (double(n) - m) / (double(n) - 1.0);
    double std_est = (double(n) / m) * std::sqrt(std::max(0.0, var_sum));
    return std_est / total;
}

std::vector<double> default_p_grid() {
    constexpr int kPoints = 30;
    const double lo = std::log(1e-5), hi = std::log(0.5);
    std::vector<double> grid(kPoints);
    for (int j = 0; j < kPoints; ++j)
        grid[j] = std::exp(lo + (hi - lo) * double(j) / double(kPoints - 1));
    return grid;
}

EstimatorStats simulate_estimators(const SimulateOptions& options) {
    check_n(options.item_set_size);
    const uint64_t n = options.item_set_size;

    std::vector<double> p_grid = options.p_grid.empty() ? default_p_grid() : options.p_grid;
    std::vector<double> q_list =
        options.q_list.empty() ? std::vector<double>{0.001, 0.01, 0.1} : options.q_list;
    for (double p : p_grid) check_p(p);
    for (double q : q_list) (void)sample_count(q, n);

    EstimatorStats stats;
    stats.item_set_size = n;
    stats.q_list = q_list;
    stats.trials = options.trials;
    stats.include_hinge = options.include_hinge;
    stats.rows.resize(p_grid.size());

    const LogChoose log_choose(options.trials > 0 ? n : 0);

    parallel_for(p_grid.size(), options.threads, [&](size_t idx) {
        EstimatorStats::Row& row = stats.rows[idx];
        const uint64_t r = snap_rank(p_grid[idx], n);
        const double p = double(r) / double(n);
        row.p = p;
        row.true_rank = r;

        Moments online = online_estimator_moments(p, n);
        row.online_rel_std = online.stddev / double(r);
        row.online_rel_bias = (online.mean - double(r)) / double(r);

        for (double q : q_list) {
            Moments batch = batch_estimator_moments(p, n, q);
            row.batch_rel_std.push_back(batch.stddev / double(r));
            if (options.include_hinge)
                row.hinge_rel_std.push_back(batch_hinge_relative_std(p, n, q));
        }

        if (options.trials == 0) return;
        std::mt19937_64 rng(splitmix64(options.seed + 0x517cc1b727220a95ull * (idx + 1)));

        SampleStats online_mc;
        for (uint64_t t = 0; t < options.trials; ++t) {
            uint64_t k = geometric_trials(p, rng);
            online_mc.add(k <= n - 1 ? double((n - 1) / k) : 0.0);
        }
        row.online_rel_std_mc = online_mc.stddev() / double(r);
        row.online_rel_bias_mc = (online_mc.mean() - double(r)) / double(r);

        for (double q : q_list) {
            uint64_t m = sample_count(q, n);
            HyperCdf dist(n, r, m, log_choose);
            double scale = double(n) / double(m);
            SampleStats batch_mc;
            for (uint64_t t = 0; t < options.trials; ++t)
                batch_mc.add(scale * double(dist.sample(rng)));
            row.batch_rel_std_mc.push_back(batch_mc.stddev() / double(r));
            row.batch_rel_bias_mc.push_back((batch_mc.mean() - double(r)) / double(r));
        }
    });

    return stats;
}

std::string EstimatorStats::to_csv() const {
    std::string out = "p,true_rank,online_rel_std,online_rel_bias";
    for (double q : q_list) out += ",batch_rel_std_q" + q_label(q);
    if (trials > 0) {
        out += ",online_rel_std_mc,online_rel_bias_mc";
        for (double q : q_list) out += ",batch_rel_std_q" + q_label(q) + "_mc";
        for (double q : q_list) out += ",batch_rel_bias_q" + q_label(q) + "_mc";
    }
    if (include_hinge)
        for (double q : q_list) out += ",batch_hinge_rel_std_q" + q_label(q);
    out += '\n';

    for (const Row& row : rows) {
        append_f(out, row.p);
        out += ',';
        out += std::to_string(row.true_rank);
        out += ',';
        append_f(out, row.online_rel_std);
        out += ',';
        append_f(out, row.online_rel_bias);
        for (double v : row.batch_rel_std) {
            out += ',';
            append_f(out, v);
        }
        if (trials > 0) {
            out += ',';
            append_f(out, row.online_rel_std_mc);
            out += ',';
            append_f(out, row.online_rel_bias_mc);
            for (double v : row.batch_rel_std_mc) {
                out += ',';
                append_f(out, v);
            }
            for (double v : row.batch_rel_bias_mc) {
                out += ',';
                append_f(out, v);
            }
        }
        for (double v : row.hinge_rel_std) {
            out += ',';
            append_f(out, v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace wmrb
