#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wmrb/data.hpp"
#include "wmrb/errors.hpp"

namespace wmrb {

// Latent-factor model over entity features: the score of (user, item) is
// <U(x), V(y)> + bu(x) + bv(y), where U/V and the biases are feature-weighted
// sums of per-feature embeddings. Stored in 32-bit floats; ParamsT<double>
// is used by tests as a 64-bit shadow of the same model.
template <typename Real>
struct ParamsT {
    uint32_t dim = 0;
    std::vector<Real> user_embeddings;  // num_user_features x dim, row-major
    std::vector<Real> item_embeddings;  // num_item_features x dim, row-major
    std::vector<Real> user_biases;
    std::vector<Real> item_biases;

    uint32_t num_user_features() const {
        return static_cast<uint32_t>(user_biases.size());
    }
    uint32_t num_item_features() const {
        return static_cast<uint32_t>(item_biases.size());
    }

    std::span<const Real> user_embedding(uint32_t f) const {
        return {user_embeddings.data() + size_t(f) * dim, dim};
    }
    std::span<const Real> item_embedding(uint32_t f) const {
        return {item_embeddings.data() + size_t(f) * dim, dim};
    }

    bool all_finite() const {
        for (const auto* arr : {&user_embeddings, &item_embeddings,
                                &user_biases, &item_biases})
            for (Real v : *arr)
                if (!std::isfinite(double(v))) return false;
        return true;
    }
};

using ModelParams = ParamsT<float>;

// Embeddings i.i.d. uniform in [-scale, scale], biases zero. Deterministic
// per seed; scale 0 gives an all-zero model.
template <typename Real>
ParamsT<Real> init_params(uint32_t dim, uint32_t num_user_features,
                          uint32_t num_item_features, uint64_t seed,
                          double scale) {
    if (dim == 0) throw ConfigError("embedding dim must be >= 1");
    if (num_user_features == 0 || num_item_features == 0)
        throw ConfigError("feature count must be >= 1");
    if (scale < 0) throw ConfigError("init scale must be >= 0");

    ParamsT<Real> p;
    p.dim = dim;
    p.user_embeddings.resize(size_t(num_user_features) * dim, Real(0));
    p.item_embeddings.resize(size_t(num_item_features) * dim, Real(0));
    p.user_biases.assign(num_user_features, Real(0));
    p.item_biases.assign(num_item_features, Real(0));
    if (scale > 0) {
        std::mt19937 rng(static_cast<uint32_t>(seed));
        std::uniform_real_distribution<double> dist(-scale, scale);
        for (Real& v : p.user_embeddings) v = static_cast<Real>(dist(rng));
        for (Real& v : p.item_embeddings) v = static_cast<Real>(dist(rng));
    }
    return p;
}

// The feature-weighted sum of one side's embeddings and biases; the cached
// half of a score. Always carried in double.
struct Repr {
    std::vector<double> vec;
    double bias = 0.0;
};

namespace detail {
template <typename Real>
Repr combine_features(std::span<const Real> embeddings, std::span<const Real> biases,
                      uint32_t dim, std::span<const std::pair<uint32_t, float>> row) {
    Repr r;
    r.vec.assign(dim, 0.0);
    for (const auto& [feature, weight] : row) {
        const Real* emb = embeddings.data() + size_t(feature) * dim;
        for (uint32_t d = 0; d < dim; ++d) r.vec[d] += double(weight) * double(emb[d]);
        r.bias += double(weight) * double(biases[feature]);
    }
    return r;
}
}  // namespace detail

template <typename Real>
Repr user_repr(const ParamsT<Real>& p, std::span<const std::pair<uint32_t, float>> row) {
    return detail::combine_features<Real>(p.user_embeddings, p.user_biases, p.dim, row);
}

template <typename Real>
Repr item_repr(const ParamsT<Real>& p, std::span<const std::pair<uint32_t, float>> row) {
    return detail::combine_features<Real>(p.item_embeddings, p.item_biases, p.dim, row);
}

// f_y(x) = <u, v> + bu + bv, accumulated in 64-bit.
inline double score(const Repr& user, const Repr& item) {
    double acc = 0.0;
    for (size_t d = 0; d < user.vec.size(); ++d) acc += user.vec[d] * item.vec[d];
    return acc + user.bias + item.bias;
}

// Bundles parameters with the feature matrices so items can be scored by id.
// Reads are safe to share across threads; the optional item cache must be
// built before concurrent use and the parameters must not change under it.
template <typename Real>
class ScorerT {
public:
    ScorerT(const ParamsT<Real>& params, const FeatureMatrix& user_features,
            const FeatureMatrix& item_features, bool cache_items = false)
        : params_(params), user_features_(user_features), item_features_(item_features) {
        if (user_features.num_features != params.num_user_features() ||
            item_features.num_features != params.num_item_features())
            throw ConfigError("feature matrices do not match model shape");
        if (cache_items) {
            item_cache_.reserve(item_features.num_entities);
            for (uint32_t i = 0; i < item_features.num_entities; ++i)
                item_cache_.push_back(wmrb::item_repr(params_, item_features_.row(i)));
        }
    }

    uint32_t num_items() const { return item_features_.num_entities; }

    Repr user_repr(uint32_t user) const {
        return wmrb::user_repr(params_, user_features_.row(user));
    }
    Repr item_repr(uint32_t item) const {
        if (!item_cache_.empty()) return item_cache_[item];
        return wmrb::item_repr(params_, item_features_.row(item));
    }

    double score(const Repr& user, uint32_t item) const {
        if (!item_cache_.empty()) return wmrb::score(user, item_cache_[item]);
        return wmrb::score(user, wmrb::item_repr(params_, item_features_.row(item)));
    }

    // Elementwise application of score(); identical accumulation per item.
    void score_batch(const Repr& user, std::span<const uint32_t> items,
                     std::span<double> out) const {
        for (size_t i = 0; i < items.size(); ++i) out[i] = score(user, items[i]);
    }

private:
    const ParamsT<Real>& params_;
    const FeatureMatrix& user_features_;
    const FeatureMatrix& item_features_;
    std::vector<Repr> item_cache_;
};

using Scorer = ScorerT<float>;

// Binary model file: magic "WMRBMDL1", little-endian uint32 header length,
// JSON header {dim, num_user_features, num_item_features}, then float32
// arrays in declared order.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

// Shape check against the feature matrices a model is about to serve.
void validate_shape(const ModelParams& params, uint32_t dim,
                    uint32_t num_user_features, uint32_t num_item_features);

}  // namespace wmrb
