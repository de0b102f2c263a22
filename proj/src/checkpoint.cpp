// SPDX-License-Identifier: Apache-2.0
#include "attnvar/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace attnvar::ckpt {

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw std::runtime_error("checkpoint: truncated integer");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return v;
}

void write_f64(std::ostream& out, double d) { write_u64(out, std::bit_cast<std::uint64_t>(d)); }

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::string read_bytes(std::istream& in, std::uint64_t n) {
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

} // namespace

void save(const std::string& path, const std::string& config_echo,
          const std::vector<const ad::Parameter*>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    write_u64(out, config_echo.size());
    out.write(config_echo.data(), static_cast<std::streamsize>(config_echo.size()));
    write_u64(out, params.size());
    for (const ad::Parameter* p : params) {
        write_u64(out, p->name.size());
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u64(out, static_cast<std::uint64_t>(p->value.rows()));
        write_u64(out, static_cast<std::uint64_t>(p->value.cols()));
        for (Eigen::Index i = 0; i < p->value.size(); ++i) write_f64(out, p->value.data()[i]);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);

    Checkpoint ckpt;
    ckpt.config_echo = read_bytes(in, read_u64(in));
    const std::uint64_t count = read_u64(in);
    for (std::uint64_t b = 0; b < count; ++b) {
        std::string name = read_bytes(in, read_u64(in));
        const auto rows = static_cast<Eigen::Index>(read_u64(in));
        const auto cols = static_cast<Eigen::Index>(read_u64(in));
        if (rows < 0 || cols < 0 || rows * cols > (1LL << 32))
            throw std::runtime_error("checkpoint: implausible block shape for " + name);
        Mat m(rows, cols);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_f64(in);
        ckpt.blocks.emplace_back(std::move(name), std::move(m));
    }
    return ckpt;
}

void restore(const Checkpoint& ckpt, const std::vector<ad::Parameter*>& params) {
    std::unordered_map<std::string, const Mat*> by_name;
    for (const auto& [name, m] : ckpt.blocks)
        if (!by_name.emplace(name, &m).second)
            throw std::runtime_error("checkpoint: duplicate block " + name);

    if (by_name.size() != params.size())
        throw std::runtime_error("checkpoint: block count mismatch");
    for (ad::Parameter* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: missing block " + p->name);
        const Mat& m = *it->second;
        if (m.rows() != p->value.rows() || m.cols() != p->value.cols())
            throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
        p->value = m;
    }
}

} // namespace attnvar::ckpt
