#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "wmrb/data.hpp"
#include "wmrb/model.hpp"

namespace wmrb {

// Produces score vectors over the full catalog for one user at a time.
// Implementations must be safe for concurrent score_user calls.
class ItemScorer {
public:
    virtual ~ItemScorer() = default;
    virtual uint32_t num_items() const = 0;
    virtual void score_user(uint32_t user, std::span<double> out) const = 0;
};

class ModelScorer : public ItemScorer {
public:
    ModelScorer(const ModelParams& params, const FeatureMatrix& user_features,
                const FeatureMatrix& item_features)
        : scorer_(params, user_features, item_features, /*cache_items=*/true) {}

    uint32_t num_items() const override { return scorer_.num_items(); }
    void score_user(uint32_t user, std::span<double> out) const override {
        Repr u = scorer_.user_repr(user);
        for (uint32_t i = 0; i < num_items(); ++i) out[i] = scorer_.score(u, i);
    }

private:
    Scorer scorer_;
};

// Scores every item by its train interaction count, identically for all
// users; with the ascending-id tie rule this reproduces popularity_ranking.
class PopularityScorer : public ItemScorer {
public:
    explicit PopularityScorer(const InteractionDataset& dataset)
        : counts_(item_popularity(dataset)) {}

    uint32_t num_items() const override { return static_cast<uint32_t>(counts_.size()); }
    void score_user(uint32_t, std::span<double> out) const override {
        for (size_t i = 0; i < counts_.size(); ++i) out[i] = double(counts_[i]);
    }

private:
    std::vector<uint64_t> counts_;
};

// Top-k item ids by descending score, excluding `exclude` (sorted), ties
// broken by ascending id. Returns fewer than k if too few items remain.
std::vector<uint32_t> rank_items(std::span<const double> scores,
                                 std::span<const uint32_t> exclude, uint32_t k);

// hits / k.
double precision_at_k(std::span<const uint32_t> ranked,
                      std::span<const uint32_t> relevant, uint32_t k);
// hits / |relevant|.
double recall_at_k(std::span<const uint32_t> ranked,
                   std::span<const uint32_t> relevant, uint32_t k);
// Binary gains, discount 1/log2(position + 1) with positions from 1;
// ideal DCG over min(k, |relevant|).
double ndcg_at_k(std::span<const uint32_t> ranked,
                 std::span<const uint32_t> relevant, uint32_t k);

struct MetricsReport {
    std::vector<uint32_t> k_values;
    std::map<uint32_t, double> precision, recall, ndcg;
    uint64_t users_evaluated = 0;

    nlohmann::ordered_json to_json(bool percent = false) const;
};

// Means over users with non-empty test sets; their train items are excluded
// from the ranking. Throws DataError when no user is evaluable.
MetricsReport evaluate(const ItemScorer& scorer, const InteractionDataset& dataset,
                       std::span<const uint32_t> k_values, uint32_t threads = 1);

}  // namespace wmrb
