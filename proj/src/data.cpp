#include "wmrb/data.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "wmrb/errors.hpp"

namespace wmrb {

namespace {

void sort_unique(std::vector<uint32_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

// Splits a line into tab-separated fields.
std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

uint32_t parse_u32(std::string_view field, const char* what, uint64_t lineno) {
    uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw DataError("line " + std::to_string(lineno) + ": malformed " +
                        what + " '" + std::string(field) + "'");
    }
    return value;
}

double parse_real(std::string_view field, const char* what, uint64_t lineno) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw DataError("line " + std::to_string(lineno) + ": malformed " +
                        what + " '" + std::string(field) + "'");
    }
    return value;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path);
    return in;
}

std::string resolve_relative(const std::string& path, const std::filesystem::path& base) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (base / p).lexically_normal().string();
}

}  // namespace

std::pair<uint32_t, uint32_t> InteractionDataset::train_pair(uint64_t index) const {
    auto it = std::upper_bound(train_offsets.begin(), train_offsets.end(), index);
    uint32_t user = static_cast<uint32_t>(it - train_offsets.begin() - 1);
    return {user, train[user][index - train_offsets[user]]};
}

bool InteractionDataset::in_train(uint32_t user, uint32_t item) const {
    const auto& list = train[user];
    return std::binary_search(list.begin(), list.end(), item);
}

InteractionDataset make_dataset(uint32_t num_users, uint32_t num_items,
                                std::vector<std::vector<uint32_t>> train,
                                std::vector<std::vector<uint32_t>> test) {
    if (num_users == 0 || num_items == 0)
        throw DataError("dataset needs at least one user and one item");
    if (train.size() > num_users || test.size() > num_users)
        throw DataError("more per-user lists than declared users");
    train.resize(num_users);
    test.resize(num_users);

    InteractionDataset ds;
    ds.num_users = num_users;
    ds.num_items = num_items;
    ds.train = std::move(train);
    ds.test = std::move(test);
    ds.train_offsets.assign(num_users + 1, 0);

    for (uint32_t u = 0; u < num_users; ++u) {
        sort_unique(ds.train[u]);
        sort_unique(ds.test[u]);
        for (uint32_t item : ds.train[u])
            if (item >= num_items)
                throw DataError("item id " + std::to_string(item) +
                                " out of bounds for user " + std::to_string(u));
        for (uint32_t item : ds.test[u]) {
            if (item >= num_items)
                throw DataError("item id " + std::to_string(item) +
                                " out of bounds for user " + std::to_string(u));
            if (ds.in_train(u, item))
                throw DataError("item " + std::to_string(item) +
                                " of user " + std::to_string(u) +
                                " appears in both train and test");
        }
        ds.train_count += ds.train[u].size();
        ds.test_count += ds.test[u].size();
        ds.train_offsets[u + 1] = ds.train_count;
    }
    return ds;
}

FeatureMatrix FeatureMatrix::identity(uint32_t num_entities) {
    FeatureMatrix m;
    m.num_entities = num_entities;
    m.num_features = num_entities;
    m.rows.resize(num_entities);
    for (uint32_t e = 0; e < num_entities; ++e)
        m.rows[e] = {{e, 1.0f}};
    return m;
}

FeatureMatrix make_feature_matrix(
    uint32_t num_entities, uint32_t num_features,
    std::vector<std::vector<std::pair<uint32_t, float>>> rows) {
    if (rows.size() > num_entities)
        throw DataError("more feature rows than declared entities");
    rows.resize(num_entities);
    for (uint32_t e = 0; e < num_entities; ++e) {
        auto& row = rows[e];
        std::sort(row.begin(), row.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (row.empty())
            throw DataError("entity " + std::to_string(e) + " has no features");
        for (size_t i = 0; i < row.size(); ++i) {
            if (row[i].first >= num_features)
                throw DataError("feature id " + std::to_string(row[i].first) +
                                " out of bounds for entity " + std::to_string(e));
            if (i > 0 && row[i].first == row[i - 1].first)
                throw DataError("duplicate feature " + std::to_string(row[i].first) +
                                " for entity " + std::to_string(e));
        }
    }
    FeatureMatrix m;
    m.num_entities = num_entities;
    m.num_features = num_features;
    m.rows = std::move(rows);
    return m;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in = open_input(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }
    if (!j.is_object()) throw DataError("manifest " + path + ": not a JSON object");

    static const char* known[] = {"interactions", "user_features", "item_features",
                                  "num_users",    "num_items",     "test_fraction",
                                  "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw DataError("manifest " + path + ": unknown key '" + it.key() + "'");
    }

    DatasetManifest m;
    try {
        m.interactions = j.at("interactions").get<std::string>();
        m.num_users = j.at("num_users").get<uint32_t>();
        m.num_items = j.at("num_items").get<uint32_t>();
        m.test_fraction = j.at("test_fraction").get<double>();
        m.seed = j.value("seed", uint64_t{0});
        m.user_features = j.value("user_features", std::string());
        m.item_features = j.value("item_features", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + path + ": " + e.what());
    }
    if (m.num_users == 0 || m.num_items == 0)
        throw DataError("manifest " + path + ": num_users and num_items must be positive");
    if (!(m.test_fraction >= 0.0 && m.test_fraction < 1.0))
        throw DataError("manifest " + path + ": test_fraction must be in [0, 1)");

    auto base = std::filesystem::path(path).parent_path();
    m.interactions = resolve_relative(m.interactions, base);
    m.user_features = resolve_relative(m.user_features, base);
    m.item_features = resolve_relative(m.item_features, base);
    return m;
}

std::vector<std::vector<uint32_t>> load_interaction_lists(
    const std::string& path, uint32_t num_users, uint32_t num_items) {
    std::ifstream in = open_input(path);
    std::vector<std::vector<uint32_t>> lists(num_users);
    std::string line;
    uint64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = split_tabs(line);
        if (fields.size() < 2 || fields.size() > 3)
            throw DataError("line " + std::to_string(lineno) +
                            ": expected user<TAB>item, got '" + line + "'");
        uint32_t user = parse_u32(fields[0], "user id", lineno);
        uint32_t item = parse_u32(fields[1], "item id", lineno);
        // An optional third column (interaction weight) is ignored: feedback
        // is binary. Still validated so garbage rows do not pass silently.
        if (fields.size() == 3) parse_real(fields[2], "weight", lineno);
        if (user >= num_users)
            throw DataError("line " + std::to_string(lineno) + ": user id " +
                            std::to_string(user) + " out of declared bounds (" +
                            std::to_string(num_users) + " users)");
        if (item >= num_items)
            throw DataError("line " + std::to_string(lineno) + ": item id " +
                            std::to_string(item) + " out of declared bounds (" +
                            std::to_string(num_items) + " items)");
        lists[user].push_back(item);
    }
    for (auto& list : lists) sort_unique(list);
    return lists;
}

InteractionDataset load_interactions(const std::string& path,
                                     const DatasetManifest& manifest) {
    auto lists = load_interaction_lists(path, manifest.num_users, manifest.num_items);
    return make_dataset(manifest.num_users, manifest.num_items, std::move(lists));
}

void save_interactions(const std::vector<std::vector<uint32_t>>& lists,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    for (uint32_t u = 0; u < lists.size(); ++u)
        for (uint32_t item : lists[u])
            out << u << '\t' << item << '\n';
    if (!out) throw DataError("write failed: " + path);
}

FeatureMatrix load_features(const std::string& path, uint32_t num_entities) {
    std::ifstream in = open_input(path);
    std::vector<std::vector<std::pair<uint32_t, float>>> rows(num_entities);
    std::string line;
    uint64_t lineno = 0;
    uint32_t max_feature = 0;
    bool any = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto fields = split_tabs(line);
        if (fields.size() != 3)
            throw DataError("line " + std::to_string(lineno) +
                            ": expected entity<TAB>feature<TAB>weight, got '" + line + "'");
        uint32_t entity = parse_u32(fields[0], "entity id", lineno);
        uint32_t feature = parse_u32(fields[1], "feature id", lineno);
        double weight = parse_real(fields[2], "weight", lineno);
        if (entity >= num_entities)
            throw DataError("line " + std::to_string(lineno) + ": entity id " +
                            std::to_string(entity) + " out of declared bounds (" +
                            std::to_string(num_entities) + " entities)");
        if (!std::isfinite(weight))
            throw DataError("line " + std::to_string(lineno) + ": non-finite weight");
        rows[entity].emplace_back(feature, static_cast<float>(weight));
        max_feature = std::max(max_feature, feature);
        any = true;
    }
    uint32_t num_features = any ? max_feature + 1 : 0;
    return make_feature_matrix(num_entities, num_features, std::move(rows));
}

InteractionDataset split_interactions(const InteractionDataset& dataset,
                                      double fraction, uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("split fraction must be in (0, 1)");
    if (dataset.test_count != 0)
        throw ConfigError("dataset is already split");

    std::mt19937 rng(static_cast<uint32_t>(seed));
    std::vector<std::vector<uint32_t>> train(dataset.num_users);
    std::vector<std::vector<uint32_t>> test(dataset.num_users);
    for (uint32_t u = 0; u < dataset.num_users; ++u) {
        std::vector<uint32_t> items = dataset.train[u];
        size_t n = items.size();
        if (n <= 1) {
            train[u] = std::move(items);
            continue;
        }
        auto n_test = static_cast<size_t>(std::llround(fraction * double(n)));
        n_test = std::min(n_test, n - 1);  // keep at least one train item
        // Partial Fisher-Yates: the first n_test slots are a uniform subset.
        for (size_t i = 0; i < n_test; ++i) {
            std::uniform_int_distribution<size_t> pick(i, n - 1);
            std::swap(items[i], items[pick(rng)]);
        }
        test[u].assign(items.begin(), items.begin() + n_test);
        train[u].assign(items.begin() + n_test, items.end());
    }
    return make_dataset(dataset.num_users, dataset.num_items,
                        std::move(train), std::move(test));
}

std::vector<uint64_t> item_popularity(const InteractionDataset& dataset) {
    std::vector<uint64_t> counts(dataset.num_items, 0);
    for (const auto& list : dataset.train)
        for (uint32_t item : list) ++counts[item];
    return counts;
}

std::vector<uint32_t> popularity_ranking(const InteractionDataset& dataset) {
    std::vector<uint64_t> counts = item_popularity(dataset);
    std::vector<uint32_t> order(dataset.num_items);
    for (uint32_t i = 0; i < dataset.num_items; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return a < b;
    });
    return order;
}

}  // namespace wmrb
