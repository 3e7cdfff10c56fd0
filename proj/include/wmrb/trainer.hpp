#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "wmrb/data.hpp"
#include "wmrb/losses.hpp"
#include "wmrb/model.hpp"
#include "wmrb/parallel.hpp"

namespace wmrb {

enum class LossKind { warp, wmrb, ce };

const char* loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);  // ConfigError on bad name

struct TrainConfig {
    LossKind loss = LossKind::wmrb;
    uint32_t dim = 32;
    uint32_t epochs = 10;
    double learning_rate = 0.05;
    double l2 = 0.0;
    uint32_t batch_size = 128;
    uint32_t candidate_count = 0;  // 0: min(1024, num_items)
    uint64_t seed = 42;
    double adagrad_epsilon = 1e-8;
    double init_scale = 0.05;
    uint32_t max_trials = 0;  // warp only; 0: num_items - 1
    OwaKind owa = OwaKind::harmonic;
    bool freeze_biases = false;
    uint32_t threads = 1;
};

struct EpochStats {
    double loss = 0.0;     // mean per-pair loss
    double seconds = 0.0;
    double mean_trials = 0.0;  // warp only: mean sampling draws consumed
    uint64_t pairs = 0;
};

struct TrainReport {
    LossKind loss_kind = LossKind::wmrb;
    std::vector<EpochStats> epochs;
    double total_seconds = 0.0;

    nlohmann::ordered_json to_json() const;
};

// Per-coordinate squared-gradient accumulators, always in double.
struct AdagradState {
    std::vector<double> user_embeddings, item_embeddings;
    std::vector<double> user_biases, item_biases;

    template <typename Real>
    static AdagradState like(const ParamsT<Real>& p) {
        AdagradState s;
        s.user_embeddings.assign(p.user_embeddings.size(), 0.0);
        s.item_embeddings.assign(p.item_embeddings.size(), 0.0);
        s.user_biases.assign(p.user_biases.size(), 0.0);
        s.item_biases.assign(p.item_biases.size(), 0.0);
        return s;
    }
};

// accum += g^2; theta -= lr * g / sqrt(accum + eps), with L2 folded into g.
template <typename Real>
void adagrad_coord(Real& theta, double& accum, double grad, double lr,
                   double l2, double eps) {
    double g = grad + l2 * double(theta);
    accum += g * g;
    theta -= static_cast<Real>(lr * g / std::sqrt(accum + eps));
}

// Gradients keyed by feature id; std::map keeps the application order
// deterministic.
struct SparseGrads {
    std::map<uint32_t, std::vector<double>> user_embeddings, item_embeddings;
    std::map<uint32_t, double> user_biases, item_biases;
};

template <typename Real>
void adagrad_step(ParamsT<Real>& params, AdagradState& state,
                  const SparseGrads& grads, double lr, double l2, double eps,
                  bool freeze_biases = false) {
    uint32_t dim = params.dim;
    for (const auto& [f, g] : grads.user_embeddings)
        for (uint32_t d = 0; d < dim; ++d)
            adagrad_coord(params.user_embeddings[size_t(f) * dim + d],
                          state.user_embeddings[size_t(f) * dim + d], g[d], lr, l2, eps);
    for (const auto& [f, g] : grads.item_embeddings)
        for (uint32_t d = 0; d < dim; ++d)
            adagrad_coord(params.item_embeddings[size_t(f) * dim + d],
                          state.item_embeddings[size_t(f) * dim + d], g[d], lr, l2, eps);
    if (!freeze_biases) {
        for (const auto& [f, g] : grads.user_biases)
            adagrad_coord(params.user_biases[f], state.user_biases[f], g, lr, l2, eps);
        for (const auto& [f, g] : grads.item_biases)
            adagrad_coord(params.item_biases[f], state.item_biases[f], g, lr, l2, eps);
    }
}

// Representations and scores for one batch. Candidate representations are
// shared across pairs; scores are laid out pairs x candidates.
struct BatchCompute {
    std::vector<Repr> user_reprs;  // per pair
    std::vector<Repr> pos_reprs;   // per pair
    std::vector<Repr> cand_reprs;  // per candidate
    std::vector<double> pos_scores;
    std::vector<double> cand_scores;
};

template <typename Real>
BatchCompute compute_batch_scores(const ParamsT<Real>& params,
                                  const FeatureMatrix& user_features,
                                  const FeatureMatrix& item_features,
                                  const LossBatch& batch, uint32_t threads = 1) {
    size_t n_pairs = batch.num_pairs();
    size_t n_cand = batch.num_candidates();
    BatchCompute bc;
    bc.user_reprs.resize(n_pairs);
    bc.pos_reprs.resize(n_pairs);
    bc.cand_reprs.resize(n_cand);
    bc.pos_scores.resize(n_pairs);
    bc.cand_scores.resize(n_pairs * n_cand);

    parallel_for(n_cand, threads, [&](size_t j) {
        bc.cand_reprs[j] = item_repr(params, item_features.row(batch.candidates[j]));
    });
    parallel_for(n_pairs, threads, [&](size_t i) {
        auto [user, pos] = batch.pairs[i];
        bc.user_reprs[i] = user_repr(params, user_features.row(user));
        bc.pos_reprs[i] = item_repr(params, item_features.row(pos));
        bc.pos_scores[i] = score(bc.user_reprs[i], bc.pos_reprs[i]);
        for (size_t j = 0; j < n_cand; ++j)
            bc.cand_scores[i * n_cand + j] = score(bc.user_reprs[i], bc.cand_reprs[j]);
    });
    return bc;
}

// Score-space gradients folded down to entity vectors, then scattered onto
// feature rows. `scale` multiplies every gradient (the trainer passes
// 1/batch_size so steps follow the mean batch loss).
struct EntityGrads {
    std::map<uint32_t, std::vector<double>> user_vecs, item_vecs;
    std::map<uint32_t, double> user_bias, item_bias;

    std::vector<double>& user_vec(uint32_t u, uint32_t dim) {
        auto it = user_vecs.find(u);
        if (it == user_vecs.end())
            it = user_vecs.emplace(u, std::vector<double>(dim, 0.0)).first;
        return it->second;
    }
    std::vector<double>& item_vec(uint32_t i, uint32_t dim) {
        auto it = item_vecs.find(i);
        if (it == item_vecs.end())
            it = item_vecs.emplace(i, std::vector<double>(dim, 0.0)).first;
        return it->second;
    }
};

namespace detail {
inline void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
    for (size_t d = 0; d < y.size(); ++d) y[d] += a * x[d];
}
}  // namespace detail

SparseGrads feature_grads(const EntityGrads& entity, const FeatureMatrix& user_features,
                          const FeatureMatrix& item_features, double scale);

// Chain rule from LossOutput score gradients to feature-level gradients.
template <typename Real>
SparseGrads batch_param_grads(const ParamsT<Real>& params,
                              const FeatureMatrix& user_features,
                              const FeatureMatrix& item_features,
                              const LossBatch& batch, const BatchCompute& bc,
                              const LossOutput& lo, double scale = 1.0) {
    size_t n_pairs = batch.num_pairs();
    size_t n_cand = batch.num_candidates();
    uint32_t dim = params.dim;
    EntityGrads eg;

    for (size_t i = 0; i < n_pairs; ++i) {
        auto [user, pos] = batch.pairs[i];
        double g_pos = lo.d_pos[i];
        auto& gu = eg.user_vec(user, dim);
        double g_user_bias = g_pos;
        detail::axpy(gu, g_pos, bc.pos_reprs[i].vec);
        for (size_t j = 0; j < n_cand; ++j) {
            double g = lo.d_cand[i * n_cand + j];
            if (g == 0.0) continue;
            detail::axpy(gu, g, bc.cand_reprs[j].vec);
            g_user_bias += g;
        }
        eg.user_bias[user] += g_user_bias;

        detail::axpy(eg.item_vec(pos, dim), g_pos, bc.user_reprs[i].vec);
        eg.item_bias[pos] += g_pos;
    }
    for (size_t j = 0; j < n_cand; ++j) {
        uint32_t item = batch.candidates[j];
        double g_bias = 0.0;
        std::vector<double>* gz = nullptr;
        for (size_t i = 0; i < n_pairs; ++i) {
            double g = lo.d_cand[i * n_cand + j];
            if (g == 0.0) continue;
            if (!gz) gz = &eg.item_vec(item, dim);
            detail::axpy(*gz, g, bc.user_reprs[i].vec);
            g_bias += g;
        }
        if (g_bias != 0.0) eg.item_bias[item] += g_bias;
    }
    return feature_grads(eg, user_features, item_features, scale);
}

// Builds a batch from given pairs: one candidate set Z per batch, uniform
// without replacement over all items; relevance masks from each user's
// train list.
LossBatch make_batch(const InteractionDataset& dataset,
                     std::span<const std::pair<uint32_t, uint32_t>> pairs,
                     std::mt19937& rng, uint32_t candidate_count);

// Pairs drawn uniformly from the training interactions.
LossBatch sample_batch(const InteractionDataset& dataset, std::mt19937& rng,
                       uint32_t batch_size, uint32_t candidate_count);

// Throws DivergedError if any parameter is non-finite.
void check_finite_params(const ModelParams& params, uint32_t epoch);

// One online pass over shuffled training pairs: per pair, run the sampling
// rank estimator, then apply the rank-weighted hinge update.
EpochStats train_warp_epoch(const InteractionDataset& dataset,
                            const FeatureMatrix& user_features,
                            const FeatureMatrix& item_features,
                            ModelParams& params, AdagradState& state,
                            OwaWeights& weights, const TrainConfig& config,
                            std::mt19937& rng);

struct TrainResult {
    ModelParams params;
    TrainReport report;
};

TrainResult train(const InteractionDataset& dataset,
                  const FeatureMatrix& user_features,
                  const FeatureMatrix& item_features, const TrainConfig& config);

}  // namespace wmrb
