#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace wmrb {

// Ordered weighted average series: phi(r) = sum of the first r alphas, with
// alpha_1 >= alpha_2 >= ... >= 0. Controls how sharply the loss concentrates
// on top-of-list mistakes. Prefix sums grow lazily; one instance per worker.
enum class OwaKind { harmonic, top1, uniform, custom };

class OwaWeights {
public:
    static OwaWeights harmonic() { return OwaWeights(OwaKind::harmonic); }
    static OwaWeights top1() { return OwaWeights(OwaKind::top1); }
    static OwaWeights uniform() { return OwaWeights(OwaKind::uniform); }
    static OwaWeights make(OwaKind kind) { return OwaWeights(kind); }
    // Explicit alphas; ranks past the series accrue zero. Validates the
    // non-increasing non-negative invariant.
    static OwaWeights custom(std::vector<double> alphas);

    // phi(r); phi(0) = 0. Extends the cached prefix sums on demand.
    double phi(uint64_t rank);

    OwaKind kind() const { return kind_; }

private:
    explicit OwaWeights(OwaKind kind) : kind_(kind), prefix_{0.0} {}

    double alpha(uint64_t j) const;  // 1-based

    OwaKind kind_;
    std::vector<double> custom_alphas_;
    std::vector<double> prefix_;  // prefix_[r] = phi(r)
};

inline double owa_phi(OwaWeights& weights, uint64_t rank) { return weights.phi(rank); }

// A mini-batch of (user, positive item) pairs sharing one candidate set Z
// sampled without replacement from the full catalog. relevant[i*|Z|+j] marks
// candidates inside y_x of pair i; those are excluded from rank sums so
// positives never act as their own negatives.
struct LossBatch {
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
    std::vector<uint32_t> candidates;
    std::vector<uint8_t> relevant;
    uint64_t total_items = 0;  // |Y|

    size_t num_pairs() const { return pairs.size(); }
    size_t num_candidates() const { return candidates.size(); }
    bool is_relevant(size_t pair, size_t cand) const {
        return relevant[pair * candidates.size() + cand] != 0;
    }
    double scale() const {  // |Y| / |Z|
        return double(total_items) / double(candidates.size());
    }
};

// Loss over a batch (summed across pairs) and its gradients with respect to
// every involved score. Entries are zero wherever a margin is inactive.
struct LossOutput {
    double loss = 0.0;
    std::vector<double> d_pos;   // per pair
    std::vector<double> d_cand;  // num_pairs x num_candidates, row-major
};

namespace detail {
// Shared counting kernel: accumulates term(pos, score) over entries whose
// mask equals `include`. exact_rank and margin_rank are both instances.
template <typename Term>
double masked_sum(double pos_score, std::span<const double> scores,
                  std::span<const uint8_t> mask, uint8_t include, Term term) {
    double acc = 0.0;
    for (size_t j = 0; j < scores.size(); ++j)
        if (mask[j] == include) acc += term(pos_score, scores[j]);
    return acc;
}
}  // namespace detail

// Number of irrelevant items scoring at least the positive's score; ties
// count as violations.
uint64_t exact_rank(double pos_score, std::span<const double> other_scores,
                    std::span<const uint8_t> irrelevant_mask);

// Outcome of the iterative sampling procedure: N draws of irrelevant items
// were needed before one landed inside the unit margin of the positive.
struct WarpSample {
    uint32_t trials = 0;          // N
    uint64_t estimated_rank = 0;  // floor((|Y|-1)/N)
    uint32_t violator = 0;
    double violator_score = 0.0;
};

// Samples items uniformly with replacement until 1 + f_{y'} >= f_y, skipping
// relevant draws without counting them as trials. Returns nullopt if no
// violator turns up within max_trials (a normal outcome: zero loss, no
// update). relevant_items must be sorted and must not cover the catalog.
std::optional<WarpSample> warp_sample_rank(
    double pos_score, const std::function<double(uint32_t)>& score_item,
    uint32_t num_items, std::span<const uint32_t> relevant_items,
    std::mt19937& rng, uint32_t max_trials);

// Rank-weighted hinge update for one (positive, violator) pair:
// loss = phi(est_rank) * |1 - f_y + f_{y'}|_+.
struct WarpPairLoss {
    double loss = 0.0;
    double d_pos = 0.0;
    double d_violator = 0.0;
};

WarpPairLoss warp_pair_loss(double pos_score, double violator_score,
                            uint64_t estimated_rank, OwaWeights& weights);

// Sampled margin rank per pair:
//   r = (|Y|/|Z|) * sum_{y' in Z, y' irrelevant} |1 - f_y + f_{y'}|_+
// An unbiased estimator of the full-set margin rank for any |Z|.
std::vector<double> margin_rank(const LossBatch& batch,
                                std::span<const double> pos_scores,
                                std::span<const double> candidate_scores);

// Indicator specialization of the same sum (unscaled violation counts);
// with Z = Y this reproduces exact_rank.
std::vector<uint64_t> violation_count(const LossBatch& batch,
                                      std::span<const double> pos_scores,
                                      std::span<const double> candidate_scores);

// Rank-weighted batch loss L = log(r + 1) and its derivative in r. Concave
// and increasing on r >= 0, so small ranks dominate the gradient.
struct WmrbValue {
    double loss = 0.0;
    double d_rank = 0.0;
};

WmrbValue wmrb_loss(double rank);

// Full batch loss sum_i log(r_i + 1) with score gradients by the chain rule
// over the margin-rank sum. Margins exactly at the kink contribute nothing.
LossOutput wmrb_grad(const LossBatch& batch, std::span<const double> pos_scores,
                     std::span<const double> candidate_scores);

// Sampled softmax over {positive} + irrelevant candidates:
// L = -f_y + logsumexp(f_y, candidate scores); gradients are the softmax
// probabilities minus the one-hot positive.
LossOutput ce_loss(const LossBatch& batch, std::span<const double> pos_scores,
                   std::span<const double> candidate_scores);

}  // namespace wmrb
