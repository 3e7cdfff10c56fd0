#include "wmrb/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace wmrb {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; big-endian hosts are unsupported");

namespace {

constexpr char kMagic[8] = {'W', 'M', 'R', 'B', 'M', 'D', 'L', '1'};

void write_floats(std::ofstream& out, const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_floats(std::ifstream& in, std::vector<float>& v, size_t count,
                 const std::string& path) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != count * sizeof(float))
        throw ModelFormatError("truncated model file: " + path);
}

}  // namespace

void save_model(const ModelParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);

    nlohmann::json header = {
        {"dim", params.dim},
        {"num_user_features", params.num_user_features()},
        {"num_item_features", params.num_item_features()},
    };
    std::string header_str = header.dump();
    auto header_len = static_cast<uint32_t>(header_str.size());

    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), header_len);
    write_floats(out, params.user_embeddings);
    write_floats(out, params.item_embeddings);
    write_floats(out, params.user_biases);
    write_floats(out, params.item_biases);
    if (!out) throw DataError("write failed: " + path);
}

ModelParams load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw ModelFormatError("not a supported model file (bad magic): " + path);

    uint32_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (in.gcount() != sizeof(header_len))
        throw ModelFormatError("truncated model file: " + path);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (static_cast<size_t>(in.gcount()) != header_len)
        throw ModelFormatError("truncated model file: " + path);

    uint32_t dim = 0, nuf = 0, nif = 0;
    try {
        nlohmann::json header = nlohmann::json::parse(header_str);
        dim = header.at("dim").get<uint32_t>();
        nuf = header.at("num_user_features").get<uint32_t>();
        nif = header.at("num_item_features").get<uint32_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ModelFormatError("bad model header in " + path + ": " + e.what());
    }
    if (dim == 0 || nuf == 0 || nif == 0)
        throw ModelFormatError("bad model header in " + path + ": zero shape");

    ModelParams p;
    p.dim = dim;
    read_floats(in, p.user_embeddings, size_t(nuf) * dim, path);
    read_floats(in, p.item_embeddings, size_t(nif) * dim, path);
    read_floats(in, p.user_biases, nuf, path);
    read_floats(in, p.item_biases, nif, path);
    if (in.peek() != std::ifstream::traits_type::eof())
        throw ModelFormatError("trailing bytes in model file: " + path);
    return p;
}

void validate_shape(const ModelParams& params, uint32_t dim,
                    uint32_t num_user_features, uint32_t num_item_features) {
    if (params.dim != dim || params.num_user_features() != num_user_features ||
        params.num_item_features() != num_item_features)
        throw DataError(
            "model shape mismatch: file has dim=" + std::to_string(params.dim) +
            ", user features=" + std::to_string(params.num_user_features()) +
            ", item features=" + std::to_string(params.num_item_features()) +
            "; expected dim=" + std::to_string(dim) +
            ", user features=" + std::to_string(num_user_features) +
            ", item features=" + std::to_string(num_item_features));
}

}  // namespace wmrb
