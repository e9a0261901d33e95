// Writes blocks.hex, records.jsonl and manifest.json into the given directory.

#include "golden_corpus.hpp"

#include "infnote/chaincore/golden.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: gen_golden DIR\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    const auto c = infnote::golden::build_corpus();
    if (auto st = infnote::chaincore::write_golden_blocks(dir / "blocks.hex", c.blocks); !st) {
        std::cerr << st.error().message() << '\n';
        return 1;
    }
    std::ofstream records(dir / "records.jsonl", std::ios::binary);
    for (const auto& r : c.records) records << infnote::apps::record_to_json(r) << '\n';
    nlohmann::json manifest = {{"owner_seed", c.owner_seed_hex},
                               {"author_seeds", c.author_seed_hex},
                               {"genesis_time", c.genesis_time},
                               {"label", c.label},
                               {"block_records", c.block_records},
                               {"blocks_file", "blocks.hex"},
                               {"records_file", "records.jsonl"}};
    std::ofstream(dir / "manifest.json", std::ios::binary) << manifest.dump(2) << '\n';
    return records ? 0 : 1;
}
