#include "wmrb/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "wmrb/errors.hpp"

namespace wmrb {

const char* loss_kind_name(LossKind kind) {
    switch (kind) {
        case LossKind::warp: return "warp";
        case LossKind::wmrb: return "wmrb";
        case LossKind::ce: return "ce";
    }
    return "?";
}

LossKind parse_loss_kind(const std::string& name) {
    if (name == "warp") return LossKind::warp;
    if (name == "wmrb") return LossKind::wmrb;
    if (name == "ce") return LossKind::ce;
    throw ConfigError("unknown loss '" + name + "' (valid: warp, wmrb, ce)");
}

nlohmann::ordered_json TrainReport::to_json() const {
    nlohmann::ordered_json out;
    out["epochs"] = nlohmann::ordered_json::array();
    for (const auto& e : epochs) {
        nlohmann::ordered_json row = {{"loss", e.loss}, {"seconds", e.seconds}};
        if (loss_kind == LossKind::warp) row["mean_trials"] = e.mean_trials;
        out["epochs"].push_back(std::move(row));
    }
    out["total_seconds"] = total_seconds;
    return out;
}

SparseGrads feature_grads(const EntityGrads& entity, const FeatureMatrix& user_features,
                          const FeatureMatrix& item_features, double scale) {
    SparseGrads out;
    uint32_t dim = 0;
    for (const auto& [u, gvec] : entity.user_vecs) {
        dim = static_cast<uint32_t>(gvec.size());
        for (const auto& [f, w] : user_features.row(u)) {
            auto it = out.user_embeddings.find(f);
            if (it == out.user_embeddings.end())
                it = out.user_embeddings.emplace(f, std::vector<double>(dim, 0.0)).first;
            detail::axpy(it->second, double(w) * scale, gvec);
        }
    }
    for (const auto& [i, gvec] : entity.item_vecs) {
        dim = static_cast<uint32_t>(gvec.size());
        for (const auto& [f, w] : item_features.row(i)) {
            auto it = out.item_embeddings.find(f);
            if (it == out.item_embeddings.end())
                it = out.item_embeddings.emplace(f, std::vector<double>(dim, 0.0)).first;
            detail::axpy(it->second, double(w) * scale, gvec);
        }
    }
    for (const auto& [u, g] : entity.user_bias)
        for (const auto& [f, w] : user_features.row(u))
            out.user_biases[f] += double(w) * scale * g;
    for (const auto& [i, g] : entity.item_bias)
        for (const auto& [f, w] : item_features.row(i))
            out.item_biases[f] += double(w) * scale * g;
    return out;
}

LossBatch make_batch(const InteractionDataset& dataset,
                     std::span<const std::pair<uint32_t, uint32_t>> pairs,
                     std::mt19937& rng, uint32_t candidate_count) {
    if (candidate_count == 0 || candidate_count > dataset.num_items)
        throw ConfigError("candidate_count must be in [1, num_items]");

    LossBatch batch;
    batch.total_items = dataset.num_items;
    batch.pairs.assign(pairs.begin(), pairs.end());

    // Partial Fisher-Yates: first candidate_count slots form a uniform
    // without-replacement sample.
    std::vector<uint32_t> items(dataset.num_items);
    std::iota(items.begin(), items.end(), 0u);
    for (uint32_t i = 0; i < candidate_count; ++i) {
        std::uniform_int_distribution<uint32_t> pick(i, dataset.num_items - 1);
        std::swap(items[i], items[pick(rng)]);
    }
    batch.candidates.assign(items.begin(), items.begin() + candidate_count);

    batch.relevant.assign(batch.pairs.size() * candidate_count, 0);
    for (size_t i = 0; i < batch.pairs.size(); ++i) {
        uint32_t user = batch.pairs[i].first;
        for (size_t j = 0; j < candidate_count; ++j)
            if (dataset.in_train(user, batch.candidates[j]))
                batch.relevant[i * candidate_count + j] = 1;
    }
    return batch;
}

LossBatch sample_batch(const InteractionDataset& dataset, std::mt19937& rng,
                       uint32_t batch_size, uint32_t candidate_count) {
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (dataset.train_count == 0) throw ConfigError("dataset has no training interactions");
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
    pairs.reserve(batch_size);
    std::uniform_int_distribution<uint64_t> pick(0, dataset.train_count - 1);
    for (uint32_t i = 0; i < batch_size; ++i)
        pairs.push_back(dataset.train_pair(pick(rng)));
    return make_batch(dataset, pairs, rng, candidate_count);
}

void check_finite_params(const ModelParams& params, uint32_t epoch) {
    if (!params.all_finite())
        throw DivergedError("training diverged: non-finite parameters after epoch " +
                                std::to_string(epoch + 1),
                            epoch);
}

namespace {

struct ResolvedConfig {
    TrainConfig cfg;
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
};

ResolvedConfig resolve(const InteractionDataset& dataset,
                       const FeatureMatrix& user_features,
                       const FeatureMatrix& item_features, const TrainConfig& config) {
    if (user_features.num_entities != dataset.num_users)
        throw ConfigError("user feature matrix does not cover all users");
    if (item_features.num_entities != dataset.num_items)
        throw ConfigError("item feature matrix does not cover all items");
    if (config.learning_rate <= 0) throw ConfigError("learning_rate must be > 0");
    if (config.l2 < 0) throw ConfigError("l2 must be >= 0");
    if (config.adagrad_epsilon <= 0) throw ConfigError("adagrad_epsilon must be > 0");
    if (config.batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (dataset.train_count == 0) throw ConfigError("dataset has no training interactions");

    ResolvedConfig r;
    r.cfg = config;
    if (r.cfg.candidate_count == 0)
        r.cfg.candidate_count = std::min<uint32_t>(1024, dataset.num_items);
    if (r.cfg.candidate_count > dataset.num_items)
        throw ConfigError("candidate_count exceeds the number of items");
    if (r.cfg.max_trials == 0)
        r.cfg.max_trials = std::max<uint32_t>(1, dataset.num_items - 1);

    r.pairs.reserve(dataset.train_count);
    for (uint32_t u = 0; u < dataset.num_users; ++u)
        for (uint32_t item : dataset.train[u])
            r.pairs.emplace_back(u, item);
    return r;
}

// One pass over shuffled pairs in mini-batches with a batch loss function.
EpochStats train_batch_epoch(const InteractionDataset& dataset,
                             const FeatureMatrix& user_features,
                             const FeatureMatrix& item_features, ModelParams& params,
                             AdagradState& state, const TrainConfig& config,
                             std::vector<std::pair<uint32_t, uint32_t>>& pairs,
                             std::mt19937& rng) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < pairs.size(); start += config.batch_size) {
        size_t count = std::min<size_t>(config.batch_size, pairs.size() - start);
        LossBatch batch = make_batch(
            dataset, std::span(pairs).subspan(start, count), rng, config.candidate_count);
        BatchCompute bc = compute_batch_scores(params, user_features, item_features,
                                               batch, config.threads);
        LossOutput lo = config.loss == LossKind::ce
                            ? ce_loss(batch, bc.pos_scores, bc.cand_scores)
                            : wmrb_grad(batch, bc.pos_scores, bc.cand_scores);
        SparseGrads grads = batch_param_grads(params, user_features, item_features,
                                              batch, bc, lo, 1.0 / double(count));
        adagrad_step(params, state, grads, config.learning_rate, config.l2,
                     config.adagrad_epsilon, config.freeze_biases);
        loss_sum += lo.loss;
    }
    EpochStats stats;
    stats.pairs = pairs.size();
    stats.loss = loss_sum / double(pairs.size());
    return stats;
}

}  // namespace

EpochStats train_warp_epoch(const InteractionDataset& dataset,
                            const FeatureMatrix& user_features,
                            const FeatureMatrix& item_features, ModelParams& params,
                            AdagradState& state, OwaWeights& weights,
                            const TrainConfig& config, std::mt19937& rng) {
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
    pairs.reserve(dataset.train_count);
    for (uint32_t u = 0; u < dataset.num_users; ++u)
        for (uint32_t item : dataset.train[u]) pairs.emplace_back(u, item);
    std::shuffle(pairs.begin(), pairs.end(), rng);

    uint32_t max_trials = config.max_trials == 0
                              ? std::max<uint32_t>(1, dataset.num_items - 1)
                              : config.max_trials;
    double loss_sum = 0.0;
    uint64_t trials_sum = 0;
    for (auto [user, pos] : pairs) {
        const auto& relevant = dataset.train[user];
        if (relevant.size() >= dataset.num_items) continue;  // no irrelevant items

        Repr u = user_repr(params, user_features.row(user));
        Repr v = item_repr(params, item_features.row(pos));
        double pos_score = score(u, v);
        auto score_item = [&](uint32_t item) {
            return score(u, item_repr(params, item_features.row(item)));
        };
        auto sample = warp_sample_rank(pos_score, score_item, dataset.num_items,
                                       relevant, rng, max_trials);
        if (!sample) {
            trials_sum += max_trials;  // full budget consumed, no update
            continue;
        }
        trials_sum += sample->trials;
        WarpPairLoss pl =
            warp_pair_loss(pos_score, sample->violator_score, sample->estimated_rank, weights);
        loss_sum += pl.loss;
        if (pl.d_pos == 0.0 && pl.d_violator == 0.0) continue;

        Repr w = item_repr(params, item_features.row(sample->violator));
        EntityGrads eg;
        auto& gu = eg.user_vec(user, params.dim);
        detail::axpy(gu, pl.d_pos, v.vec);
        detail::axpy(gu, pl.d_violator, w.vec);
        eg.user_bias[user] += pl.d_pos + pl.d_violator;
        detail::axpy(eg.item_vec(pos, params.dim), pl.d_pos, u.vec);
        eg.item_bias[pos] += pl.d_pos;
        detail::axpy(eg.item_vec(sample->violator, params.dim), pl.d_violator, u.vec);
        eg.item_bias[sample->violator] += pl.d_violator;

        SparseGrads grads = feature_grads(eg, user_features, item_features, 1.0);
        adagrad_step(params, state, grads, config.learning_rate, config.l2,
                     config.adagrad_epsilon, config.freeze_biases);
    }

    EpochStats stats;
    stats.pairs = pairs.size();
    stats.loss = pairs.empty() ? 0.0 : loss_sum / double(pairs.size());
    stats.mean_trials = pairs.empty() ? 0.0 : double(trials_sum) / double(pairs.size());
    return stats;
}

TrainResult train(const InteractionDataset& dataset,
                  const FeatureMatrix& user_features,
                  const FeatureMatrix& item_features, const TrainConfig& config) {
    ResolvedConfig rc = resolve(dataset, user_features, item_features, config);
    const TrainConfig& cfg = rc.cfg;

    TrainResult result;
    result.params = init_params<float>(cfg.dim, user_features.num_features,
                                       item_features.num_features, cfg.seed,
                                       cfg.init_scale);
    result.report.loss_kind = cfg.loss;

    AdagradState state = AdagradState::like(result.params);
    OwaWeights weights = OwaWeights::make(cfg.owa);
    // Separate stream from init_params so init and sampling do not alias.
    std::mt19937 rng(static_cast<uint32_t>(cfg.seed) ^ 0x9e3779b9u);

    using clock = std::chrono::steady_clock;
    auto run_start = clock::now();
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto t0 = clock::now();
        EpochStats stats =
            cfg.loss == LossKind::warp
                ? train_warp_epoch(dataset, user_features, item_features,
                                   result.params, state, weights, cfg, rng)
                : train_batch_epoch(dataset, user_features, item_features,
                                    result.params, state, cfg, rc.pairs, rng);
        stats.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        check_finite_params(result.params, epoch);
        result.report.epochs.push_back(stats);
    }
    result.report.total_seconds =
        std::chrono::duration<double>(clock::now() - run_start).count();
    return result;
}

}  // namespace wmrb
