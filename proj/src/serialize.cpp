#include "varlab/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "varlab/digest.hpp"
#include "varlab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary artifact formats are little-endian");

namespace varlab {

namespace {

constexpr char kMagic[4] = {'V', 'L', 'P', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}

}  // namespace

void write_matrix(const std::filesystem::path& path, const Tensor& matrix) {
    if (matrix.rank() != 2) throw ShapeError("write_matrix: rank must be 2");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_matrix: cannot open " + path.string());
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(matrix.shape[0]));
    write_u32(out, static_cast<std::uint32_t>(matrix.shape[1]));
    out.write(reinterpret_cast<const char*>(matrix.data.data()),
              static_cast<std::streamsize>(matrix.size() * sizeof(float)));
    if (!out) throw IoError("write_matrix: write failed for " + path.string());
}

Tensor read_matrix(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_matrix: cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw ParseError("read_matrix: bad magic in " + path.string());
    }
    const std::uint32_t version = read_u32(in);
    if (version != kVersion) {
        throw ParseError("read_matrix: unsupported version " + std::to_string(version));
    }
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = read_u32(in);
    Tensor t({static_cast<int>(rows), static_cast<int>(cols)});
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(t.size() * sizeof(float))) {
        throw ParseError("read_matrix: truncated payload in " + path.string());
    }
    return t;
}

void write_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& preds) {
    write_matrix(path, preds.logits);
}

PredictionMatrix read_prediction_matrix(const std::filesystem::path& path) {
    return PredictionMatrix{read_matrix(path)};
}

std::vector<unsigned char> params_payload(const Params& params) {
    std::size_t total = 0;
    for (const auto& nt : params.tensors) total += nt.tensor.size() * sizeof(float);
    std::vector<unsigned char> bytes(total);
    std::size_t off = 0;
    for (const auto& nt : params.tensors) {
        const std::size_t len = nt.tensor.size() * sizeof(float);
        std::memcpy(bytes.data() + off, nt.tensor.data.data(), len);
        off += len;
    }
    return bytes;
}

void write_params(const std::filesystem::path& bin_path,
                  const std::filesystem::path& sidecar_path, const Params& params) {
    const std::vector<unsigned char> bytes = params_payload(params);
    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_params: cannot open " + bin_path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write_params: write failed for " + bin_path.string());

    nlohmann::json sidecar;
    sidecar["tensors"] = nlohmann::json::array();
    for (const auto& nt : params.tensors) {
        sidecar["tensors"].push_back({{"name", nt.name},
                                      {"shape", nt.tensor.shape},
                                      {"sha256", sha256_hex(nt.tensor.data)}});
    }
    std::ofstream side(sidecar_path, std::ios::trunc);
    if (!side) throw IoError("write_params: cannot open " + sidecar_path.string());
    side << sidecar.dump(2) << "\n";
}

Params read_params(const std::filesystem::path& bin_path,
                   const std::filesystem::path& sidecar_path) {
    std::ifstream side(sidecar_path);
    if (!side) throw IoError("read_params: cannot open " + sidecar_path.string());
    nlohmann::json sidecar;
    try {
        side >> sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("read_params: bad sidecar JSON: " + std::string(e.what()));
    }

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw IoError("read_params: cannot open " + bin_path.string());

    Params params;
    for (const auto& entry : sidecar.at("tensors")) {
        Tensor t(entry.at("shape").get<std::vector<int>>());
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (in.gcount() != static_cast<std::streamsize>(t.size() * sizeof(float))) {
            throw ParseError("read_params: truncated payload in " + bin_path.string());
        }
        if (sha256_hex(t.data) != entry.at("sha256").get<std::string>()) {
            throw ChecksumError("read_params: tensor digest mismatch for " +
                                entry.at("name").get<std::string>());
        }
        params.tensors.push_back({entry.at("name").get<std::string>(), std::move(t)});
    }
    return params;
}

}  // namespace varlab
