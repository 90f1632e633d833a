#include "vseq/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vseq {

const Tensor<float>& CheckpointData::tensor(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return t;
    throw std::runtime_error("checkpoint: missing tensor " + name);
}

void save_checkpoint(const CheckpointData& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write: " + path);
    out << "VSQCKPT1\n";
    for (const auto& [k, v] : ckpt.meta) out << k << "=" << v << "\n";
    out << "\n";
    for (const auto& [name, t] : ckpt.tensors) {
        std::ostringstream head;
        head << "tensor=" << name << " dtype=f32 shape=";
        for (size_t i = 0; i < t.shape.size(); ++i) head << (i ? "," : "") << t.shape[i];
        head << " bytes=" << t.size() * 4 << "\n";
        const std::string h = head.str();
        out.write(h.data(), static_cast<std::streamsize>(h.size()));
        std::vector<char> raw(static_cast<size_t>(t.size()) * 4);
        for (int64_t i = 0; i < t.size(); ++i) {
            const auto u = std::bit_cast<uint32_t>(t[i]);
            raw[static_cast<size_t>(4 * i)] = static_cast<char>(u & 0xff);
            raw[static_cast<size_t>(4 * i + 1)] = static_cast<char>((u >> 8) & 0xff);
            raw[static_cast<size_t>(4 * i + 2)] = static_cast<char>((u >> 16) & 0xff);
            raw[static_cast<size_t>(4 * i + 3)] = static_cast<char>((u >> 24) & 0xff);
        }
        out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
        out << "\n";
    }
    out << "end\n";
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "VSQCKPT1")
        throw std::runtime_error("checkpoint: bad magic: " + path);
    CheckpointData ckpt;
    while (std::getline(in, line)) {
        if (line.empty()) break;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("checkpoint: malformed metadata line: " + path);
        ckpt.meta[line.substr(0, eq)] = line.substr(eq + 1);
    }
    while (std::getline(in, line)) {
        if (line == "end") return ckpt;
        std::map<std::string, std::string> kv;
        std::stringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("checkpoint: malformed tensor header: " + path);
            kv[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
        if (!kv.count("tensor") || kv["dtype"] != "f32")
            throw std::runtime_error("checkpoint: unsupported tensor record: " + path);
        std::vector<int> shape;
        std::stringstream shapes(kv["shape"]);
        std::string d;
        while (std::getline(shapes, d, ',')) shape.push_back(std::stoi(d));
        Tensor<float> t(shape);
        const auto bytes = static_cast<size_t>(std::stoll(kv["bytes"]));
        if (bytes != static_cast<size_t>(t.size()) * 4)
            throw std::runtime_error("checkpoint: tensor byte count mismatch: " + path);
        std::vector<char> raw(bytes);
        in.read(raw.data(), static_cast<std::streamsize>(bytes));
        if (in.gcount() != static_cast<std::streamsize>(bytes))
            throw std::runtime_error("checkpoint: truncated tensor payload: " + path);
        for (int64_t i = 0; i < t.size(); ++i) {
            const uint32_t u = static_cast<uint8_t>(raw[static_cast<size_t>(4 * i)]) |
                               (static_cast<uint32_t>(static_cast<uint8_t>(raw[static_cast<size_t>(4 * i + 1)])) << 8) |
                               (static_cast<uint32_t>(static_cast<uint8_t>(raw[static_cast<size_t>(4 * i + 2)])) << 16) |
                               (static_cast<uint32_t>(static_cast<uint8_t>(raw[static_cast<size_t>(4 * i + 3)])) << 24);
            t[i] = std::bit_cast<float>(u);
        }
        char nl;
        in.read(&nl, 1);
        ckpt.tensors.emplace_back(kv["tensor"], std::move(t));
    }
    throw std::runtime_error("checkpoint: missing end marker: " + path);
}

}  // namespace vseq
