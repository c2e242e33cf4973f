#include "ft/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ft/error.hpp"

namespace ft {

namespace {

constexpr char kMagic[8] = {'F', 'T', 'C', 'K', 'P', 'T', '0', '1'};

std::filesystem::path with_ext(const std::filesystem::path& path, const char* ext) {
    std::filesystem::path p = path;
    if (p.extension() == ".ckpt" || p.extension() == ".json") p.replace_extension();
    p += ext;
    return p;
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}

} // namespace

Checkpoint snapshot_model(SeUNet& model) {
    Checkpoint ckpt;
    ckpt.config = model.config();
    for (const auto& p : model.parameters()) {
        NamedTensor t;
        t.name = p.name;
        t.kind = p.kind;
        t.shape = p.shape;
        t.values.reserve(p.values->size());
        for (double v : *p.values) t.values.push_back(static_cast<float>(v));
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

void restore_model(const Checkpoint& ckpt, SeUNet& model) {
    if (!(ckpt.config == model.config()))
        throw DataError("checkpoint: model config does not match checkpoint config");
    auto params = model.parameters();
    if (params.size() != ckpt.tensors.size())
        throw DataError("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = ckpt.tensors[i];
        auto& p = params[i];
        if (t.name != p.name || t.shape != p.shape || t.values.size() != p.values->size())
            throw DataError("checkpoint: tensor '" + t.name + "' does not match model parameter '" +
                            p.name + "'");
        for (std::size_t j = 0; j < t.values.size(); ++j) (*p.values)[j] = t.values[j];
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bin_path = with_ext(path, ".ckpt");
    const auto json_path = with_ext(path, ".json");

    std::ofstream out(bin_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + bin_path.string());
    out.write(kMagic, sizeof kMagic);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.kind));
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.values.data()),
                  static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    }
    if (!out) throw DataError("short write on checkpoint: " + bin_path.string());
    out.close();

    nlohmann::json meta;
    meta["config"] = {{"in_channels", ckpt.config.in_channels},
                      {"base_width", ckpt.config.base_width},
                      {"depth", ckpt.config.depth},
                      {"se_reduction", ckpt.config.se_reduction},
                      {"seed", ckpt.config.seed}};
    meta["seed"] = ckpt.seed;
    meta["epoch"] = ckpt.epoch;
    meta["val_loss"] = ckpt.val_loss;
    meta["normalization"] = {{"mean", ckpt.normalization.mean}, {"stddev", ckpt.normalization.stddev}};
    meta["data_fingerprint"] = ckpt.data_fingerprint;

    std::ofstream jout(json_path, std::ios::binary | std::ios::trunc);
    if (!jout) throw DataError("cannot write checkpoint metadata: " + json_path.string());
    jout << meta.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto bin_path = with_ext(path, ".ckpt");
    const auto json_path = with_ext(path, ".json");

    std::ifstream jin(json_path);
    if (!jin) throw DataError("missing checkpoint metadata: " + json_path.string());
    nlohmann::json meta;
    try {
        jin >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
    }

    Checkpoint ckpt;
    try {
        const auto& c = meta.at("config");
        ckpt.config.in_channels = c.at("in_channels").get<int>();
        ckpt.config.base_width = c.at("base_width").get<int>();
        ckpt.config.depth = c.at("depth").get<int>();
        ckpt.config.se_reduction = c.at("se_reduction").get<int>();
        ckpt.config.seed = c.at("seed").get<std::uint64_t>();
        ckpt.seed = meta.at("seed").get<std::uint64_t>();
        ckpt.epoch = meta.at("epoch").get<int>();
        ckpt.val_loss = meta.at("val_loss").get<double>();
        ckpt.normalization.mean = meta.at("normalization").at("mean").get<std::vector<double>>();
        ckpt.normalization.stddev = meta.at("normalization").at("stddev").get<std::vector<double>>();
        ckpt.data_fingerprint = meta.at("data_fingerprint").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt checkpoint metadata: ") + e.what());
    }

    std::ifstream in(bin_path, std::ios::binary);
    if (!in) throw DataError("missing checkpoint blob: " + bin_path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw DataError("corrupt checkpoint blob (bad magic): " + bin_path.string());
    const auto count = read_pod<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const auto name_len = read_pod<std::uint32_t>(in);
        if (!in || name_len > 4096) throw DataError("corrupt checkpoint blob: " + bin_path.string());
        t.name.resize(name_len);
        in.read(t.name.data(), name_len);
        t.kind = static_cast<ParamKind>(read_pod<std::uint8_t>(in));
        const auto ndim = read_pod<std::uint32_t>(in);
        if (!in || ndim > 8) throw DataError("corrupt checkpoint blob: " + bin_path.string());
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            const auto dim = read_pod<std::uint32_t>(in);
            t.shape.push_back(static_cast<int>(dim));
            numel *= dim;
        }
        t.values.resize(numel);
        in.read(reinterpret_cast<char*>(t.values.data()),
                static_cast<std::streamsize>(numel * sizeof(float)));
        if (!in) throw DataError("truncated checkpoint blob: " + bin_path.string());
        ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
}

} // namespace ft
