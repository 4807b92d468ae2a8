#pragma once

#include <cstdint>
#include <vector>

namespace patchsim {

struct PathCell {
    int i = 0;  // reference (row) descriptor index
    int j = 0;  // positive (column) descriptor index
    bool operator==(const PathCell&) const = default;
};

// A monotone match path through the banded similarity matrix. Steps between
// consecutive cells are (0,1), (1,0) or (1,1); kept[k] is false for cells
// inside long horizontal/vertical runs (treated as occlusions).
struct MatchPath {
    std::vector<PathCell> cells;
    std::vector<std::uint8_t> kept;
    double mean_energy = 0.0;
    int iterations = 0;  // parametric-iteration count, diagnostic only

    std::size_t size() const { return cells.size(); }
    std::size_t kept_count() const {
        std::size_t n = 0;
        for (std::uint8_t k : kept) n += k ? 1 : 0;
        return n;
    }
};

}  // namespace patchsim
