#include "conncrack/nn/checkpoint.hpp"

#include "conncrack/io_util.hpp"

#include <bit>
#include <cstring>

namespace conncrack::nn {
namespace {

constexpr char kMagic[] = "CKPT1";
constexpr std::size_t kMagicLen = 5;

} // namespace

const Tensor<float>& Checkpoint::at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint has no entry '" + name + "'");
    return it->second;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    io::ByteWriter w;
    w.bytes(kMagic, kMagicLen);
    w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
    for (const auto& [name, t] : ckpt.entries) {
        w.u32(static_cast<std::uint32_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u32(static_cast<std::uint32_t>(t.rank()));
        for (auto e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
        for (float v : t.storage()) w.f32(v);
    }
    return std::move(w).take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    io::ByteReader r(bytes);
    if (r.bytes(kMagicLen) != std::string(kMagic, kMagicLen))
        throw FormatError("not a CKPT1 checkpoint", 0);
    Checkpoint ckpt;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw FormatError("checkpoint entry '" + name + "' has rank " + std::to_string(rank), static_cast<long long>(r.offset()));
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32());
        const std::size_t n = shape_volume(shape);
        if (n > r.remaining() / 4)
            throw FormatError("checkpoint entry '" + name + "' is truncated",
                              static_cast<long long>(r.offset()));
        std::vector<float> data(n);
        for (auto& v : data) v = r.f32();
        if (!ckpt.entries.emplace(name, Tensor<float>(shape, std::move(data))).second)
            throw FormatError("duplicate checkpoint entry '" + name + "'");
    }
    if (r.remaining() != 0)
        throw FormatError("trailing bytes after checkpoint", static_cast<long long>(r.offset()));
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    try {
        return decode_checkpoint(io::read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    io::write_file_atomic(path, encode_checkpoint(ckpt));
}

template <typename T>
Checkpoint snapshot(const ParamList<T>& params) {
    Checkpoint c;
    for (auto* p : params) {
        if (!c.entries.emplace(p->name, p->value.template cast<float>()).second)
            throw ConfigError("duplicate parameter name '" + p->name + "'");
    }
    return c;
}

template <typename T>
void restore(const Checkpoint& ckpt, const ParamList<T>& params) {
    for (auto* p : params) {
        const auto& src = ckpt.at(p->name);
        if (src.shape() != p->value.shape())
            throw FormatError("checkpoint entry '" + p->name + "' has shape " +
                              shape_string(src.shape()) + ", model expects " +
                              shape_string(p->value.shape()));
        p->value = src.template cast<T>();
        p->grad.zero();
        p->mean_square.zero();
    }
}

template Checkpoint snapshot(const ParamList<float>&);
template Checkpoint snapshot(const ParamList<double>&);
template void restore(const Checkpoint&, const ParamList<float>&);
template void restore(const Checkpoint&, const ParamList<double>&);

} // namespace conncrack::nn
