#include "humid/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace humid {

namespace {

constexpr std::uint32_t kMagic = 0x48434B50;  // "HCKP"
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_str(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    write_u64(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("checkpoint: truncated file");
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error("checkpoint: truncated file");
    return v;
}

std::string read_str(std::istream& in) {
    const std::uint64_t len = read_u64(in);
    if (len > (1u << 20)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(len, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(len)))
        throw std::runtime_error("checkpoint: truncated file");
    return s;
}

std::vector<double> read_doubles(std::istream& in) {
    const std::uint64_t n = read_u64(in);
    if (n > (1ull << 32)) throw std::runtime_error("checkpoint: implausible array length");
    std::vector<double> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(n * sizeof(double))))
        throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    write_u32(out, kMagic);
    write_u32(out, kVersion);

    write_u64(out, ckpt.meta.size());
    for (const auto& [k, v] : ckpt.meta) {
        write_str(out, k);
        write_str(out, v);
    }

    write_u64(out, ckpt.params.names().size());
    for (const auto& name : ckpt.params.names()) {
        const Tensor& t = ckpt.params.get(name);
        write_str(out, name);
        write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int d : t.shape) write_u32(out, static_cast<std::uint32_t>(d));
        write_doubles(out, t.data);
    }

    write_u64(out, ckpt.extras.size());
    for (const auto& [k, v] : ckpt.extras) {
        write_str(out, k);
        write_doubles(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    if (read_u32(in) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

    Checkpoint ckpt;
    const std::uint64_t n_meta = read_u64(in);
    for (std::uint64_t i = 0; i < n_meta; ++i) {
        std::string k = read_str(in);
        ckpt.meta[k] = read_str(in);
    }

    const std::uint64_t n_params = read_u64(in);
    for (std::uint64_t i = 0; i < n_params; ++i) {
        std::string name = read_str(in);
        const std::uint32_t ndim = read_u32(in);
        if (ndim > 8) throw std::runtime_error("checkpoint: implausible tensor rank");
        std::vector<int> shape;
        std::int64_t expect = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            shape.push_back(static_cast<int>(read_u32(in)));
            expect *= shape.back();
        }
        std::vector<double> data = read_doubles(in);
        if (static_cast<std::int64_t>(data.size()) != expect)
            throw std::runtime_error("checkpoint: size mismatch for parameter " + name);
        ckpt.params.add(name, Tensor(std::move(shape), std::move(data)));
    }

    const std::uint64_t n_extras = read_u64(in);
    for (std::uint64_t i = 0; i < n_extras; ++i) {
        std::string k = read_str(in);
        ckpt.extras[k] = read_doubles(in);
    }
    return ckpt;
}

}  // namespace humid
