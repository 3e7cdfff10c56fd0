#include <doctest.h>

#include <algorithm>
#include <cstdio>

#include "wmrb/data.hpp"
#include "wmrb/errors.hpp"
#include "wmrb/model.hpp"
#include "util.hpp"

using namespace wmrb;
using testsup::TempDir;
using testsup::read_file;
using testsup::write_file;

TEST_CASE("init draws embeddings in range, zero biases, deterministic") {
    auto p = init_params<float>(4, 6, 8, 99, 0.05);
    CHECK(p.dim == 4);
    CHECK(p.user_embeddings.size() == 6 * 4);
    CHECK(p.item_embeddings.size() == 8 * 4);
    CHECK(p.num_user_features() == 6);
    CHECK(p.num_item_features() == 8);
    for (float v : p.user_embeddings) {
        CHECK(v >= -0.05f);
        CHECK(v <= 0.05f);
    }
    CHECK(std::all_of(p.user_biases.begin(), p.user_biases.end(),
                      [](float b) { return b == 0.0f; }));

    auto q = init_params<float>(4, 6, 8, 99, 0.05);
    CHECK(p.user_embeddings == q.user_embeddings);
    CHECK(p.item_embeddings == q.item_embeddings);

    auto r = init_params<float>(4, 6, 8, 100, 0.05);
    CHECK(p.user_embeddings != r.user_embeddings);

    auto zero = init_params<float>(4, 6, 8, 99, 0.0);
    CHECK(std::all_of(zero.item_embeddings.begin(), zero.item_embeddings.end(),
                      [](float v) { return v == 0.0f; }));

    CHECK_THROWS_AS(init_params<float>(0, 6, 8, 1, 0.1), ConfigError);
    CHECK_THROWS_AS(init_params<float>(4, 0, 8, 1, 0.1), ConfigError);
    CHECK_THROWS_AS(init_params<float>(4, 6, 8, 1, -0.1), ConfigError);
}

TEST_CASE("representations are feature-weighted sums; scores add biases") {
    ModelParams p;
    p.dim = 2;
    p.user_embeddings = {0.1f, -0.2f, 0.4f, 0.8f};  // f0, f1
    p.user_biases = {0.3f, -1.0f};
    p.item_embeddings = {1.0f, 2.0f};
    p.item_biases = {0.25f};

    std::vector<std::pair<uint32_t, float>> urow = {{0, 2.0f}, {1, 0.5f}};
    Repr u = user_repr(p, urow);
    CHECK(u.vec[0] == doctest::Approx(2.0 * 0.1 + 0.5 * 0.4));
    CHECK(u.vec[1] == doctest::Approx(2.0 * -0.2 + 0.5 * 0.8));
    CHECK(u.bias == doctest::Approx(2.0 * 0.3 + 0.5 * -1.0));

    std::vector<std::pair<uint32_t, float>> irow = {{0, 1.0f}};
    Repr v = item_repr(p, irow);
    double expect = u.vec[0] * 1.0 + u.vec[1] * 2.0 + u.bias + 0.25;
    CHECK(score(u, v) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("a double-precision shadow of float parameters scores identically") {
    auto pf = init_params<float>(3, 4, 5, 17, 0.2);
    ParamsT<double> pd;
    pd.dim = pf.dim;
    pd.user_embeddings.assign(pf.user_embeddings.begin(), pf.user_embeddings.end());
    pd.item_embeddings.assign(pf.item_embeddings.begin(), pf.item_embeddings.end());
    pd.user_biases.assign(pf.user_biases.begin(), pf.user_biases.end());
    pd.item_biases.assign(pf.item_biases.begin(), pf.item_biases.end());

    std::vector<std::pair<uint32_t, float>> urow = {{1, 1.0f}, {3, 0.25f}};
    std::vector<std::pair<uint32_t, float>> irow = {{0, 0.5f}, {4, 2.0f}};
    // float storage converts exactly to double, so both paths share arithmetic
    CHECK(score(user_repr(pf, urow), item_repr(pf, irow)) ==
          score(user_repr(pd, urow), item_repr(pd, irow)));
}

TEST_CASE("scorer caching and batch scoring change nothing") {
    auto p = init_params<float>(4, 5, 20, 3, 0.3);
    auto uf = FeatureMatrix::identity(5);
    auto itf = FeatureMatrix::identity(20);
    Scorer plain(p, uf, itf, false);
    Scorer cached(p, uf, itf, true);

    Repr u = plain.user_repr(2);
    std::vector<uint32_t> items(20);
    for (uint32_t i = 0; i < 20; ++i) items[i] = i;
    std::vector<double> batch(20);
    cached.score_batch(u, items, batch);
    for (uint32_t i = 0; i < 20; ++i) {
        CHECK(plain.score(u, i) == batch[i]);
        CHECK(cached.score(u, i) == batch[i]);
    }
}

TEST_CASE("scorer rejects mismatched feature matrices") {
    auto p = init_params<float>(4, 5, 20, 3, 0.3);
    auto uf = FeatureMatrix::identity(6);  // one too many
    auto itf = FeatureMatrix::identity(20);
    CHECK_THROWS_AS(Scorer(p, uf, itf), ConfigError);
}

TEST_CASE("model files round-trip exactly and reject corruption") {
    TempDir dir("model");
    auto p = init_params<float>(3, 4, 5, 41, 0.1);
    p.user_biases[1] = -0.75f;
    std::string path = dir.file("m.bin");
    save_model(p, path);

    auto q = load_model(path);
    CHECK(q.dim == p.dim);
    CHECK(q.user_embeddings == p.user_embeddings);
    CHECK(q.item_embeddings == p.item_embeddings);
    CHECK(q.user_biases == p.user_biases);
    CHECK(q.item_biases == p.item_biases);

    std::string bytes = read_file(path);

    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    write_file(dir.file("magic.bin"), bad_magic);
    CHECK_THROWS_AS(load_model(dir.file("magic.bin")), ModelFormatError);

    write_file(dir.file("trunc.bin"), bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_model(dir.file("trunc.bin")), ModelFormatError);

    write_file(dir.file("trail.bin"), bytes + "x");
    CHECK_THROWS_AS(load_model(dir.file("trail.bin")), ModelFormatError);

    CHECK_THROWS_AS(load_model(dir.file("absent.bin")), DataError);
}

TEST_CASE("shape validation names the expected dimensions") {
    auto p = init_params<float>(3, 4, 5, 41, 0.1);
    CHECK_NOTHROW(validate_shape(p, 3, 4, 5));
    CHECK_THROWS_AS(validate_shape(p, 3, 4, 6), DataError);
    CHECK_THROWS_AS(validate_shape(p, 2, 4, 5), DataError);
}
