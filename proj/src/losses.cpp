#include "wmrb/losses.hpp"

#include <algorithm>
#include <cmath>

#include "wmrb/errors.hpp"

namespace wmrb {

OwaWeights OwaWeights::custom(std::vector<double> alphas) {
    for (size_t j = 0; j < alphas.size(); ++j) {
        if (alphas[j] < 0.0)
            throw ConfigError("OWA alphas must be non-negative");
        if (j > 0 && alphas[j] > alphas[j - 1])
            throw ConfigError("OWA alphas must be non-increasing");
    }
    OwaWeights w(OwaKind::custom);
    w.custom_alphas_ = std::move(alphas);
    return w;
}

double OwaWeights::alpha(uint64_t j) const {
    switch (kind_) {
        case OwaKind::harmonic: return 1.0 / double(j);
        case OwaKind::top1: return j == 1 ? 1.0 : 0.0;
        case OwaKind::uniform: return 1.0;
        case OwaKind::custom:
            return j <= custom_alphas_.size() ? custom_alphas_[j - 1] : 0.0;
    }
    return 0.0;
}

double OwaWeights::phi(uint64_t rank) {
    while (prefix_.size() <= rank)
        prefix_.push_back(prefix_.back() + alpha(prefix_.size()));
    return prefix_[rank];
}

uint64_t exact_rank(double pos_score, std::span<const double> other_scores,
                    std::span<const uint8_t> irrelevant_mask) {
    double n = detail::masked_sum(pos_score, other_scores, irrelevant_mask, 1,
                                  [](double pos, double s) {
                                      return pos <= s ? 1.0 : 0.0;
                                  });
    return static_cast<uint64_t>(n);
}

std::optional<WarpSample> warp_sample_rank(
    double pos_score, const std::function<double(uint32_t)>& score_item,
    uint32_t num_items, std::span<const uint32_t> relevant_items,
    std::mt19937& rng, uint32_t max_trials) {
    if (relevant_items.size() >= num_items) return std::nullopt;
    std::uniform_int_distribution<uint32_t> draw(0, num_items - 1);
    uint32_t trials = 0;
    while (trials < max_trials) {
        uint32_t item = draw(rng);
        if (std::binary_search(relevant_items.begin(), relevant_items.end(), item))
            continue;  // relevant draws do not count as trials
        ++trials;
        double s = score_item(item);
        if (1.0 + s >= pos_score) {
            WarpSample out;
            out.trials = trials;
            out.estimated_rank = (uint64_t(num_items) - 1) / trials;
            out.violator = item;
            out.violator_score = s;
            return out;
        }
    }
    return std::nullopt;
}

WarpPairLoss warp_pair_loss(double pos_score, double violator_score,
                            uint64_t estimated_rank, OwaWeights& weights) {
    WarpPairLoss out;
    double weight = weights.phi(estimated_rank);
    double margin = 1.0 - pos_score + violator_score;
    if (margin > 0.0 && weight > 0.0) {
        out.loss = weight * margin;
        out.d_pos = -weight;
        out.d_violator = weight;
    }
    return out;
}

std::vector<double> margin_rank(const LossBatch& batch,
                                std::span<const double> pos_scores,
                                std::span<const double> candidate_scores) {
    size_t n_pairs = batch.num_pairs();
    size_t n_cand = batch.num_candidates();
    double scale = batch.scale();
    std::vector<double> ranks(n_pairs, 0.0);
    for (size_t i = 0; i < n_pairs; ++i) {
        auto row = candidate_scores.subspan(i * n_cand, n_cand);
        auto mask = std::span<const uint8_t>(batch.relevant).subspan(i * n_cand, n_cand);
        double sum = detail::masked_sum(pos_scores[i], row, mask, 0,
                                        [](double pos, double s) {
                                            return std::max(1.0 - pos + s, 0.0);
                                        });
        ranks[i] = scale * sum;
    }
    return ranks;
}

std::vector<uint64_t> violation_count(const LossBatch& batch,
                                      std::span<const double> pos_scores,
                                      std::span<const double> candidate_scores) {
    size_t n_pairs = batch.num_pairs();
    size_t n_cand = batch.num_candidates();
    std::vector<uint64_t> counts(n_pairs, 0);
    for (size_t i = 0; i < n_pairs; ++i) {
        auto row = candidate_scores.subspan(i * n_cand, n_cand);
        auto mask = std::span<const uint8_t>(batch.relevant).subspan(i * n_cand, n_cand);
        double n = detail::masked_sum(pos_scores[i], row, mask, 0,
                                      [](double pos, double s) {
                                          return pos <= s ? 1.0 : 0.0;
                                      });
        counts[i] = static_cast<uint64_t>(n);
    }
    return counts;
}

WmrbValue wmrb_loss(double rank) {
    return {std::log1p(rank), 1.0 / (1.0 + rank)};
}

LossOutput wmrb_grad(const LossBatch& batch, std::span<const double> pos_scores,
                     std::span<const double> candidate_scores) {
    size_t n_pairs = batch.num_pairs();
    size_t n_cand = batch.num_candidates();
    double scale = batch.scale();

    LossOutput out;
    out.d_pos.assign(n_pairs, 0.0);
    out.d_cand.assign(n_pairs * n_cand, 0.0);

    std::vector<double> ranks = margin_rank(batch, pos_scores, candidate_scores);
    for (size_t i = 0; i < n_pairs; ++i) {
        WmrbValue v = wmrb_loss(ranks[i]);
        out.loss += v.loss;
        double coef = v.d_rank * scale;
        size_t active = 0;
        for (size_t j = 0; j < n_cand; ++j) {
            if (batch.is_relevant(i, j)) continue;
            double margin = 1.0 - pos_scores[i] + candidate_scores[i * n_cand + j];
            if (margin > 0.0) {
                out.d_cand[i * n_cand + j] = coef;
                ++active;
            }
        }
        out.d_pos[i] = -coef * double(active);
    }
    return out;
}

LossOutput ce_loss(const LossBatch& batch, std::span<const double> pos_scores,
                   std::span<const double> candidate_scores) {
    size_t n_pairs = batch.num_pairs();
    size_t n_cand = batch.num_candidates();

    LossOutput out;
    out.d_pos.assign(n_pairs, 0.0);
    out.d_cand.assign(n_pairs * n_cand, 0.0);

    for (size_t i = 0; i < n_pairs; ++i) {
        double pos = pos_scores[i];
        double hi = pos;
        for (size_t j = 0; j < n_cand; ++j)
            if (!batch.is_relevant(i, j))
                hi = std::max(hi, candidate_scores[i * n_cand + j]);

        double denom = std::exp(pos - hi);
        for (size_t j = 0; j < n_cand; ++j)
            if (!batch.is_relevant(i, j))
                denom += std::exp(candidate_scores[i * n_cand + j] - hi);

        out.loss += hi + std::log(denom) - pos;
        out.d_pos[i] = std::exp(pos - hi) / denom - 1.0;
        for (size_t j = 0; j < n_cand; ++j)
            if (!batch.is_relevant(i, j))
                out.d_cand[i * n_cand + j] =
                    std::exp(candidate_scores[i * n_cand + j] - hi) / denom;
    }
    return out;
}

}  // namespace wmrb
