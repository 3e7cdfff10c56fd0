#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wmrb {

// Sparse user -> item implicit-feedback store. Per-user lists are sorted,
// duplicate-free, and train/test lists of one user are disjoint. Immutable
// after construction; safe for concurrent reads.
struct InteractionDataset {
    uint32_t num_users = 0;
    uint32_t num_items = 0;
    std::vector<std::vector<uint32_t>> train;  // one sorted list per user
    std::vector<std::vector<uint32_t>> test;
    uint64_t train_count = 0;
    uint64_t test_count = 0;

    // Prefix sums over train list sizes; maps a flat pair index to a user.
    std::vector<uint64_t> train_offsets;

    // Maps a flat index in [0, train_count) to its (user, item) pair.
    std::pair<uint32_t, uint32_t> train_pair(uint64_t index) const;

    bool in_train(uint32_t user, uint32_t item) const;
};

// Validates invariants, fills counts and offsets. Input lists may be
// unsorted and contain duplicates; they are canonicalized here.
InteractionDataset make_dataset(uint32_t num_users, uint32_t num_items,
                                std::vector<std::vector<uint32_t>> train,
                                std::vector<std::vector<uint32_t>> test = {});

// Sparse entity x feature weights. Every entity has at least one feature;
// row feature ids are strictly increasing.
struct FeatureMatrix {
    uint32_t num_entities = 0;
    uint32_t num_features = 0;
    std::vector<std::vector<std::pair<uint32_t, float>>> rows;

    // One indicator feature per entity: row e = {(e, 1.0)}. Reduces the
    // hybrid model to a plain per-entity embedding.
    static FeatureMatrix identity(uint32_t num_entities);

    std::span<const std::pair<uint32_t, float>> row(uint32_t e) const {
        return rows[e];
    }
};

FeatureMatrix make_feature_matrix(
    uint32_t num_entities, uint32_t num_features,
    std::vector<std::vector<std::pair<uint32_t, float>>> rows);

// Declares where a dataset lives and how to split it.
struct DatasetManifest {
    std::string interactions;
    std::string user_features;  // empty: identity features
    std::string item_features;  // empty: identity features
    uint32_t num_users = 0;
    uint32_t num_items = 0;
    double test_fraction = 0.0;
    uint64_t seed = 0;

    // Declared counts must cover every observed id.
    bool accepts(uint32_t max_user_id, uint32_t max_item_id) const {
        return num_users >= uint64_t(max_user_id) + 1 &&
               num_items >= uint64_t(max_item_id) + 1;
    }
};

// Reads a manifest JSON object. Unknown keys are rejected; relative file
// paths are resolved against the manifest's directory.
DatasetManifest load_manifest(const std::string& path);

// Parses `user<TAB>item` lines (a trailing weight column is ignored) into
// sorted deduplicated per-user lists. Malformed rows and out-of-bounds ids
// raise DataError with the offending line number.
std::vector<std::vector<uint32_t>> load_interaction_lists(
    const std::string& path, uint32_t num_users, uint32_t num_items);

InteractionDataset load_interactions(const std::string& path,
                                     const DatasetManifest& manifest);

// Writes per-user lists back in the interaction file format.
void save_interactions(const std::vector<std::vector<uint32_t>>& lists,
                       const std::string& path);

// Parses `entity<TAB>feature<TAB>weight` lines. Every entity must receive
// at least one feature; duplicate (entity, feature) cells are an error.
FeatureMatrix load_features(const std::string& path, uint32_t num_entities);

// Per-user uniform random split. Users with a single interaction keep it
// in train; everyone else keeps at least one train item. Deterministic for
// a fixed seed. The input dataset must be unsplit (empty test lists).
InteractionDataset split_interactions(const InteractionDataset& dataset,
                                      double fraction, uint64_t seed);

// Item ids ordered by train interaction count, descending; ties broken by
// ascending id. Always a permutation of 0..num_items-1.
std::vector<uint32_t> popularity_ranking(const InteractionDataset& dataset);

// Train interaction count per item.
std::vector<uint64_t> item_popularity(const InteractionDataset& dataset);

}  // namespace wmrb
