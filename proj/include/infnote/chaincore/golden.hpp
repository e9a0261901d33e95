#pragma once

#include "infnote/chaincore/block.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace infnote::chaincore {

// Golden-vector files hold one serialized block per line as lowercase hex.
// Blank lines are ignored. The same format carries chain export/import.

Result<std::vector<Block>> read_golden_blocks(const std::filesystem::path& path);
Status write_golden_blocks(const std::filesystem::path& path, std::span<const Block> blocks);

}  // namespace infnote::chaincore
