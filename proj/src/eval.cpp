#include "wmrb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wmrb/errors.hpp"
#include "wmrb/parallel.hpp"

namespace wmrb {

std::vector<uint32_t> rank_items(std::span<const double> scores,
                                 std::span<const uint32_t> exclude, uint32_t k) {
    std::vector<uint32_t> ids;
    ids.reserve(scores.size());
    for (uint32_t i = 0; i < scores.size(); ++i)
        if (!std::binary_search(exclude.begin(), exclude.end(), i)) ids.push_back(i);

    auto better = [&](uint32_t a, uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    uint32_t take = std::min<uint32_t>(k, uint32_t(ids.size()));
    std::partial_sort(ids.begin(), ids.begin() + take, ids.end(), better);
    ids.resize(take);
    return ids;
}

static uint64_t hits_in_top_k(std::span<const uint32_t> ranked,
                              std::span<const uint32_t> relevant, uint32_t k) {
    uint64_t hits = 0;
    uint32_t cut = std::min<uint32_t>(k, uint32_t(ranked.size()));
    for (uint32_t i = 0; i < cut; ++i)
        if (std::binary_search(relevant.begin(), relevant.end(), ranked[i])) ++hits;
    return hits;
}

double precision_at_k(std::span<const uint32_t> ranked,
                      std::span<const uint32_t> relevant, uint32_t k) {
    if (k == 0) return 0.0;
    return double(hits_in_top_k(ranked, relevant, k)) / double(k);
}

double recall_at_k(std::span<const uint32_t> ranked,
                   std::span<const uint32_t> relevant, uint32_t k) {
    if (relevant.empty()) return 0.0;
    return double(hits_in_top_k(ranked, relevant, k)) / double(relevant.size());
}

double ndcg_at_k(std::span<const uint32_t> ranked,
                 std::span<const uint32_t> relevant, uint32_t k) {
    if (k == 0 || relevant.empty()) return 0.0;
    double dcg = 0.0;
    uint32_t cut = std::min<uint32_t>(k, uint32_t(ranked.size()));
    for (uint32_t i = 0; i < cut; ++i)
        if (std::binary_search(relevant.begin(), relevant.end(), ranked[i]))
            dcg += 1.0 / std::log2(double(i) + 2.0);
    double idcg = 0.0;
    uint32_t ideal = std::min<uint32_t>(k, uint32_t(relevant.size()));
    for (uint32_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(double(i) + 2.0);
    return dcg / idcg;
}

nlohmann::ordered_json MetricsReport::to_json(bool percent) const {
    double mul = percent ? 100.0 : 1.0;
    nlohmann::ordered_json j;
    j["k"] = k_values;
    auto fill = [&](const char* name, const std::map<uint32_t, double>& m) {
        nlohmann::ordered_json obj = nlohmann::ordered_json::object();
        for (const auto& [k, v] : m) obj[std::to_string(k)] = v * mul;
        j[name] = obj;
    };
    fill("precision", precision);
    fill("recall", recall);
    fill("ndcg", ndcg);
    j["users_evaluated"] = users_evaluated;
    return j;
}

MetricsReport evaluate(const ItemScorer& scorer, const InteractionDataset& dataset,
                       std::span<const uint32_t> k_values, uint32_t threads) {
    if (k_values.empty()) throw ConfigError("evaluate: need at least one cutoff");
    for (uint32_t k : k_values)
        if (k == 0) throw ConfigError("evaluate: cutoff must be positive");
    if (scorer.num_items() != dataset.num_items)
        throw DataError("evaluate: scorer covers " + std::to_string(scorer.num_items()) +
                        " items, dataset has " + std::to_string(dataset.num_items));

    std::vector<uint32_t> users;
    for (uint32_t u = 0; u < dataset.num_users; ++u)
        if (!dataset.test[u].empty()) users.push_back(u);
    if (users.empty()) throw DataError("evaluate: no users with test interactions");

    uint32_t max_k = *std::max_element(k_values.begin(), k_values.end());
    // per-user metric rows, reduced in fixed user order below
    std::vector<std::vector<double>> rows(users.size());
    parallel_for(users.size(), threads, [&](size_t idx) {
        uint32_t u = users[idx];
        std::vector<double> scores(dataset.num_items);
        scorer.score_user(u, scores);
        auto ranked = rank_items(scores, dataset.train[u], max_k);
        std::vector<double>& row = rows[idx];
        row.reserve(k_values.size() * 3);
        for (uint32_t k : k_values) {
            row.push_back(precision_at_k(ranked, dataset.test[u], k));
            row.push_back(recall_at_k(ranked, dataset.test[u], k));
            row.push_back(ndcg_at_k(ranked, dataset.test[u], k));
        }
    });

    MetricsReport report;
    report.k_values.assign(k_values.begin(), k_values.end());
    report.users_evaluated = users.size();
    for (size_t ki = 0; ki < k_values.size(); ++ki) {
        double p = 0, r = 0, n = 0;
        for (const auto& row : rows) {
            p += row[ki * 3];
            r += row[ki * 3 + 1];
            n += row[ki * 3 + 2];
        }
        double denom = double(users.size());
        report.precision[k_values[ki]] = p / denom;
        report.recall[k_values[ki]] = r / denom;
        report.ndcg[k_values[ki]] = n / denom;
    }
    return report;
}

}  // namespace wmrb
