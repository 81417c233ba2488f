#include "narsal/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace narsal {

namespace {

constexpr char kMagic[8] = {'N', 'S', 'A', 'L', 'C', 'K', 'P', 'T'};

void write_bytes(std::ofstream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& in, void* p, std::size_t n, const char* what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw std::runtime_error(std::string("checkpoint: truncated while reading ") + what);
    }
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json header;
    header["format_version"] = Checkpoint::kFormatVersion;
    header["seed"] = ckpt.seed;
    header["step"] = ckpt.step;
    header["meta"] = ckpt.meta;
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t offset = 0; // in doubles
    for (const auto& [name, t] : ckpt.tensors) {
        manifest.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
        offset += t.data.size();
    }
    header["tensors"] = manifest;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("checkpoint: cannot open for writing: " + path.string());
    }
    const std::string header_str = header.dump();
    const std::uint32_t version = Checkpoint::kFormatVersion;
    const std::uint64_t header_len = header_str.size();
    write_bytes(out, kMagic, sizeof(kMagic));
    write_bytes(out, &version, sizeof(version));
    write_bytes(out, &header_len, sizeof(header_len));
    write_bytes(out, header_str.data(), header_str.size());
    for (const auto& [name, t] : ckpt.tensors) {
        write_bytes(out, t.data.data(), t.data.size() * sizeof(double));
    }
    if (!out) {
        throw std::runtime_error("checkpoint: write failed: " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("checkpoint: cannot open: " + path.string());
    }
    char magic[8];
    read_bytes(in, magic, sizeof(magic), "magic");
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path.string());
    }
    std::uint32_t version = 0;
    read_bytes(in, &version, sizeof(version), "version");
    if (version != Checkpoint::kFormatVersion) {
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(version));
    }
    std::uint64_t header_len = 0;
    read_bytes(in, &header_len, sizeof(header_len), "header length");
    std::string header_str(header_len, '\0');
    read_bytes(in, header_str.data(), header_len, "header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("checkpoint: corrupt header: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    ckpt.step = header.at("step").get<std::int64_t>();
    ckpt.meta = header.value("meta", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        Tensor t(shape, 0.0);
        read_bytes(in, t.data.data(), t.data.size() * sizeof(double), name.c_str());
        ckpt.tensors.emplace(name, std::move(t));
    }
    return ckpt;
}

} // namespace narsal
