// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "attnvar/graph.hpp"

#include <string>
#include <utility>
#include <vector>

namespace attnvar::ckpt {

/// Binary layout: magic "ATTNVAR1"; u64 length + config echo bytes; u64 block
/// count; per block u64 name length, name bytes, u64 rows, u64 cols, then
/// rows*cols doubles. All integers and doubles little-endian; doubles are the
/// raw IEEE-754 bits, so round-trips are bit-exact.
inline constexpr char kMagic[8] = {'A', 'T', 'T', 'N', 'V', 'A', 'R', '1'};

struct Checkpoint {
    std::string config_echo;
    std::vector<std::pair<std::string, Mat>> blocks;
};

void save(const std::string& path, const std::string& config_echo,
          const std::vector<const ad::Parameter*>& params);

Checkpoint load(const std::string& path);

/// Assigns blocks to parameters by name. Every parameter must find a block of
/// its exact shape; leftover blocks are an error.
void restore(const Checkpoint& ckpt, const std::vector<ad::Parameter*>& params);

} // namespace attnvar::ckpt
