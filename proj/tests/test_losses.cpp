#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "wmrb/errors.hpp"
#include "wmrb/losses.hpp"

using namespace wmrb;

namespace {

// One-pair batch over an explicit candidate list.
LossBatch one_pair_batch(uint32_t pos_item, std::vector<uint32_t> candidates,
                         std::vector<uint8_t> relevant, uint64_t total_items) {
    LossBatch b;
    b.pairs = {{0, pos_item}};
    b.candidates = std::move(candidates);
    b.relevant = std::move(relevant);
    b.total_items = total_items;
    return b;
}

std::vector<uint32_t> sample_without_replacement(uint32_t n, uint32_t k,
                                                 std::mt19937& rng) {
    std::vector<uint32_t> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (uint32_t j = 0; j < k; ++j) {
        std::uniform_int_distribution<uint32_t> pick(j, n - 1);
        std::swap(pool[j], pool[pick(rng)]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace

TEST_CASE("owa weightings: harmonic, top-of-list, uniform, custom") {
    auto harmonic = OwaWeights::harmonic();
    CHECK(harmonic.phi(0) == 0.0);
    CHECK(harmonic.phi(1) == doctest::Approx(1.0));
    CHECK(harmonic.phi(3) == doctest::Approx(1.0 + 0.5 + 1.0 / 3.0));
    CHECK(harmonic.phi(5) == doctest::Approx(1 + 0.5 + 1.0 / 3 + 0.25 + 0.2));
    CHECK(harmonic.phi(2) == doctest::Approx(1.5));  // cached prefix still right

    auto top1 = OwaWeights::top1();
    CHECK(top1.phi(1) == 1.0);
    CHECK(top1.phi(7) == 1.0);

    auto uniform = OwaWeights::uniform();
    CHECK(uniform.phi(4) == doctest::Approx(4.0));

    auto custom = OwaWeights::custom({0.5, 0.3, 0.3});
    CHECK(custom.phi(2) == doctest::Approx(0.8));
    CHECK(custom.phi(10) == doctest::Approx(1.1));  // past the series: zero alphas

    CHECK_THROWS_AS(OwaWeights::custom({0.3, 0.5}), ConfigError);
    CHECK_THROWS_AS(OwaWeights::custom({0.3, -0.1}), ConfigError);

    // increments never grow with rank
    double prev = harmonic.phi(1) - harmonic.phi(0);
    for (uint64_t r = 1; r < 200; ++r) {
        double inc = harmonic.phi(r + 1) - harmonic.phi(r);
        CHECK(inc <= prev + 1e-15);
        prev = inc;
    }
}

TEST_CASE("exact rank counts irrelevant items at or above the positive") {
    std::vector<double> others = {2.0, 1.0, 0.5, 3.0};
    std::vector<uint8_t> irrelevant = {1, 1, 1, 0};
    CHECK(exact_rank(1.0, others, irrelevant) == 2);  // 2.0 and the tie at 1.0

    std::mt19937 rng(31);
    std::normal_distribution<double> gauss;
    for (int it = 0; it < 300; ++it) {
        size_t n = 1 + rng() % 50;
        double pos = gauss(rng);
        std::vector<double> scores(n);
        std::vector<uint8_t> mask(n);
        for (size_t j = 0; j < n; ++j) {
            scores[j] = (rng() % 5 == 0) ? pos : gauss(rng);  // force ties sometimes
            mask[j] = rng() % 2;
        }
        uint64_t expect = 0;
        for (size_t j = 0; j < n; ++j)
            if (mask[j] == 1 && pos <= scores[j]) ++expect;
        CHECK(exact_rank(pos, scores, mask) == expect);
    }
}

TEST_CASE("sampling rank estimator: trial counting and the floor rule") {
    std::mt19937 rng(5);

    // Violation on the Nth scored draw, independent of which item comes up.
    auto run = [&](uint32_t violate_at, uint32_t num_items) {
        uint32_t calls = 0;
        auto score_item = [&](uint32_t) {
            ++calls;
            return calls >= violate_at ? 1.0 : -5.0;  // pos 1.0: margin hits at >=
        };
        return warp_sample_rank(1.0, score_item, num_items, {}, rng, 100000);
    };

    auto first = run(1, 100000);
    REQUIRE(first.has_value());
    CHECK(first->trials == 1);
    CHECK(first->estimated_rank == 99999);

    auto fifty = run(50, 100000);
    REQUIRE(fifty.has_value());
    CHECK(fifty->trials == 50);
    CHECK(fifty->estimated_rank == 1999);  // floor(99999 / 50)

    // Estimator never counts relevant draws: with all items but one relevant,
    // the single irrelevant item is found on trial 1.
    std::vector<uint32_t> relevant = {0, 1, 2, 3};
    auto only = warp_sample_rank(
        0.0, [](uint32_t item) { return item == 4 ? 0.5 : -100.0; }, 5, relevant,
        rng, 1000);
    REQUIRE(only.has_value());
    CHECK(only->trials == 1);
    CHECK(only->violator == 4);
    CHECK(only->estimated_rank == 4);

    // No irrelevant items at all: nothing to sample.
    std::vector<uint32_t> all = {0, 1, 2, 3, 4};
    CHECK_FALSE(warp_sample_rank(0.0, [](uint32_t) { return 1.0; }, 5, all, rng, 10)
                    .has_value());

    // No violator inside the budget: a normal no-update outcome.
    uint32_t calls = 0;
    auto quiet = warp_sample_rank(
        10.0, [&](uint32_t) { ++calls; return 0.0; }, 50, {}, rng, 20);
    CHECK_FALSE(quiet.has_value());
    CHECK(calls == 20);

    // Boundary: 1 + s == pos counts as a violation.
    auto edge = warp_sample_rank(1.5, [](uint32_t) { return 0.5; }, 10, {}, rng, 5);
    REQUIRE(edge.has_value());
    CHECK(edge->trials == 1);
}

TEST_CASE("rank-weighted hinge pair loss") {
    auto top1 = OwaWeights::top1();
    auto out = warp_pair_loss(0.2, 0.5, 3, top1);
    CHECK(out.loss == doctest::Approx(1.3));
    CHECK(out.d_pos == doctest::Approx(-1.0));
    CHECK(out.d_violator == doctest::Approx(1.0));

    auto harmonic = OwaWeights::harmonic();
    double w = 1.0 + 0.5 + 1.0 / 3.0;
    auto weighted = warp_pair_loss(0.2, 0.5, 3, harmonic);
    CHECK(weighted.loss == doctest::Approx(w * 1.3));
    CHECK(weighted.d_violator == doctest::Approx(w));

    auto inactive = warp_pair_loss(3.0, 0.5, 3, harmonic);
    CHECK(inactive.loss == 0.0);
    CHECK(inactive.d_pos == 0.0);

    auto kink = warp_pair_loss(1.5, 0.5, 3, harmonic);  // margin exactly 0
    CHECK(kink.loss == 0.0);
    CHECK(kink.d_violator == 0.0);
}

TEST_CASE("margin rank matches a scalar reference and the indicator twin") {
    std::mt19937 rng(77);
    std::normal_distribution<double> gauss;

    for (int it = 0; it < 100; ++it) {
        uint32_t n = 3 + rng() % 40;
        std::vector<uint32_t> cands(n);
        std::iota(cands.begin(), cands.end(), 0);
        std::vector<uint8_t> relevant(n);
        for (auto& m : relevant) m = rng() % 3 == 0;
        double pos = gauss(rng);
        std::vector<double> scores(n);
        for (auto& s : scores) s = (rng() % 6 == 0) ? pos : gauss(rng);

        auto batch = one_pair_batch(0, cands, relevant, n);
        auto ranks = margin_rank(batch, {&pos, 1}, scores);

        double expect = 0.0;
        for (uint32_t j = 0; j < n; ++j)
            if (!relevant[j]) expect += std::max(1.0 - pos + scores[j], 0.0);
        CHECK(ranks[0] == doctest::Approx(expect).epsilon(1e-12));

        // with the hinge replaced by an indicator and Z = Y, the sampled sum
        // is the exact rank
        auto counts = violation_count(batch, {&pos, 1}, scores);
        std::vector<uint8_t> irrelevant(n);
        for (uint32_t j = 0; j < n; ++j) irrelevant[j] = relevant[j] ? 0 : 1;
        CHECK(counts[0] == exact_rank(pos, scores, irrelevant));
    }
}

TEST_CASE("subsampled margin rank is an unbiased estimate of the full sum") {
    std::mt19937 rng(2024);
    std::normal_distribution<double> gauss;
    const uint32_t n = 500, z = 250;
    const int resamples = 10000;

    double pos = gauss(rng);
    std::vector<double> scores(n);
    for (auto& s : scores) s = gauss(rng);
    std::vector<uint8_t> relevant(n, 0);
    for (uint32_t j = 0; j < n; ++j) relevant[j] = rng() % 10 == 0;

    std::vector<uint32_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    auto full_batch = one_pair_batch(0, all, relevant, n);
    double full = margin_rank(full_batch, {&pos, 1}, scores)[0];

    double mean = 0.0;
    for (int t = 0; t < resamples; ++t) {
        auto subset = sample_without_replacement(n, z, rng);
        std::vector<double> sub_scores(z);
        std::vector<uint8_t> sub_rel(z);
        for (uint32_t j = 0; j < z; ++j) {
            sub_scores[j] = scores[subset[j]];
            sub_rel[j] = relevant[subset[j]];
        }
        auto batch = one_pair_batch(0, subset, sub_rel, n);
        mean += margin_rank(batch, {&pos, 1}, sub_scores)[0];
    }
    mean /= resamples;
    CHECK(std::abs(mean - full) / full < 0.02);
}

TEST_CASE("log-rank loss identities and concavity") {
    CHECK(wmrb_loss(0.0).loss == 0.0);
    CHECK(wmrb_loss(std::exp(1.0) - 1.0).loss == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wmrb_loss(0.0).d_rank == doctest::Approx(1.0));
    CHECK(wmrb_loss(1.0).d_rank == doctest::Approx(0.5));

    double prev = wmrb_loss(1.0).loss - wmrb_loss(0.0).loss;
    for (int r = 1; r < 100; ++r) {
        double inc = wmrb_loss(r + 1.0).loss - wmrb_loss(double(r)).loss;
        CHECK(inc < prev);
        prev = inc;
    }
}

TEST_CASE("batch log-rank gradients: hand-checked case and score-space checks") {
    // margins: 0.5 and 1.5 active, third inactive -> rank 2, d(log(1+r))/dr = 1/3
    double pos = 1.0;
    std::vector<double> scores = {0.5, 1.5, -1.0};
    auto batch = one_pair_batch(0, {0, 1, 2}, {0, 0, 0}, 3);
    auto out = wmrb_grad(batch, {&pos, 1}, scores);

    CHECK(out.loss == doctest::Approx(std::log(3.0)));
    CHECK(out.d_cand[0] == doctest::Approx(1.0 / 3.0));
    CHECK(out.d_cand[1] == doctest::Approx(1.0 / 3.0));
    CHECK(out.d_cand[2] == 0.0);
    CHECK(out.d_pos[0] == doctest::Approx(-2.0 / 3.0));

    // a relevant candidate is invisible no matter its score
    auto masked = one_pair_batch(0, {0, 1, 2}, {0, 0, 1}, 3);
    std::vector<double> spiked = {0.5, 1.5, 1000.0};
    auto out2 = wmrb_grad(masked, {&pos, 1}, spiked);
    CHECK(out2.loss == doctest::Approx(out.loss));
    CHECK(out2.d_pos[0] == doctest::Approx(out.d_pos[0]));
    CHECK(out2.d_cand[2] == 0.0);
}

TEST_CASE("batch loss gradients agree with numeric score derivatives") {
    std::mt19937 rng(11);
    std::normal_distribution<double> gauss;
    const double h = 1e-6;

    for (int it = 0; it < 50; ++it) {
        uint32_t n_cand = 2 + rng() % 12;
        uint32_t n_pairs = 1 + rng() % 3;
        LossBatch batch;
        for (uint32_t i = 0; i < n_pairs; ++i) batch.pairs.push_back({i, 0});
        batch.candidates.resize(n_cand);
        std::iota(batch.candidates.begin(), batch.candidates.end(), 0);
        batch.relevant.resize(size_t(n_pairs) * n_cand);
        for (auto& m : batch.relevant) m = rng() % 4 == 0;
        batch.total_items = n_cand * 2;

        std::vector<double> pos(n_pairs), cand(size_t(n_pairs) * n_cand);
        for (auto& v : pos) v = gauss(rng);
        for (auto& v : cand) v = gauss(rng);

        // keep every margin away from the hinge kink so the derivative exists
        bool near_kink = false;
        for (uint32_t i = 0; i < n_pairs; ++i)
            for (uint32_t j = 0; j < n_cand; ++j)
                if (std::abs(1.0 - pos[i] + cand[size_t(i) * n_cand + j]) < 1e-3)
                    near_kink = true;
        if (near_kink) continue;

        for (int which = 0; which < 2; ++which) {
            auto f = [&](std::span<const double> p, std::span<const double> c) {
                return which == 0 ? wmrb_grad(batch, p, c).loss
                                  : ce_loss(batch, p, c).loss;
            };
            auto out = which == 0 ? wmrb_grad(batch, pos, cand) : ce_loss(batch, pos, cand);

            for (uint32_t i = 0; i < n_pairs; ++i) {
                auto bumped = pos;
                bumped[i] += h;
                double up = f(bumped, cand);
                bumped[i] -= 2 * h;
                double down = f(bumped, cand);
                CHECK(out.d_pos[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4));
            }
            for (size_t j = 0; j < cand.size(); ++j) {
                auto bumped = cand;
                bumped[j] += h;
                double up = f(pos, bumped);
                bumped[j] -= 2 * h;
                double down = f(pos, bumped);
                double numeric = (up - down) / (2 * h);
                if (std::abs(numeric) < 1e-9)
                    CHECK(std::abs(out.d_cand[j]) < 1e-9);
                else
                    CHECK(out.d_cand[j] == doctest::Approx(numeric).epsilon(1e-4));
            }
        }
    }
}

TEST_CASE("sampled softmax: two-way tie costs log 2; gradients sum to zero") {
    double pos = 0.7;
    std::vector<double> scores = {0.7};
    auto batch = one_pair_batch(0, {0}, {0}, 10);
    auto out = ce_loss(batch, {&pos, 1}, scores);
    CHECK(out.loss == doctest::Approx(std::log(2.0)));
    CHECK(out.d_pos[0] == doctest::Approx(-0.5));
    CHECK(out.d_cand[0] == doctest::Approx(0.5));

    // fully masked candidates: the positive is the whole distribution
    auto all_rel = one_pair_batch(0, {0, 1}, {1, 1}, 10);
    std::vector<double> s2 = {5.0, -2.0};
    auto zero = ce_loss(all_rel, {&pos, 1}, s2);
    CHECK(zero.loss == doctest::Approx(0.0));
    CHECK(zero.d_pos[0] == doctest::Approx(0.0));
    CHECK(zero.d_cand[0] == 0.0);

    std::mt19937 rng(4);
    std::normal_distribution<double> gauss;
    for (int it = 0; it < 50; ++it) {
        uint32_t n = 1 + rng() % 20;
        std::vector<uint8_t> rel(n);
        for (auto& m : rel) m = rng() % 4 == 0;
        std::vector<uint32_t> cands(n);
        std::iota(cands.begin(), cands.end(), 0);
        double p = gauss(rng);
        std::vector<double> sc(n);
        for (auto& v : sc) v = gauss(rng) * 3.0;  // exercise the max-shift path

        auto o = ce_loss(one_pair_batch(0, cands, rel, n), {&p, 1}, sc);
        double total = o.d_pos[0];
        for (double g : o.d_cand) total += g;
        CHECK(total == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(o.loss >= -1e-12);  // -log softmax probability
    }
}
