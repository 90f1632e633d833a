#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vseq/tensor.hpp"

namespace vseq {

// Versioned checkpoint container:
//   magic line "VSQCKPT1", then key=value metadata lines, then a blank
//   line, then per-tensor records
//     tensor=<name> dtype=f32 shape=d0,d1,... bytes=N\n
//   followed by N raw little-endian bytes and a newline, closed by "end".
// Keys are written in sorted order so identical contents give identical
// bytes.
struct CheckpointData {
    std::map<std::string, std::string> meta;
    std::vector<std::pair<std::string, Tensor<float>>> tensors;

    const Tensor<float>& tensor(const std::string& name) const;
};

void save_checkpoint(const CheckpointData& ckpt, const std::string& path);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace vseq
