#include "infnote/chaincore/golden.hpp"

#include <fstream>

namespace infnote::chaincore {

Result<std::vector<Block>> read_golden_blocks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return make_error(Errc::io_error, "cannot open " + path.string());
    std::vector<Block> blocks;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto block = block_from_hex(line);
        if (!block) return make_error(block.code(), path.string() + ":" + std::to_string(line_no) + ": " +
                                                        block.error().detail);
        blocks.push_back(std::move(*block));
    }
    return blocks;
}

Status write_golden_blocks(const std::filesystem::path& path, std::span<const Block> blocks) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) return make_error(Errc::io_error, "cannot write " + path.string());
    for (const auto& block : blocks) out << block_to_hex(block) << '\n';
    if (!out) return make_error(Errc::io_error, "write failed for " + path.string());
    return {};
}

}  // namespace infnote::chaincore
