#include "mcf/grid.hpp"

#include "mcf/error.hpp"

#include <numbers>

namespace mcf {

namespace {
const char* kModule = "graph-state";
}

Grid::Grid(ManifoldSpec spec, std::vector<int> shape) : spec_(std::move(spec)), shape_(std::move(shape)) {
    spec_.validate();
    const int n = spec_.dim;
    if (static_cast<int>(shape_.size()) != n) {
        throw ConfigError(kModule, "grid resolution needs one count per domain dimension");
    }
    size_ = 1;
    for (int a = 0; a < n; ++a) {
        if (shape_[a] < 8) {
            throw ConfigError(kModule, "grid resolution must be at least 8 per dimension, got " +
                                           std::to_string(shape_[a]));
        }
        size_ *= static_cast<std::size_t>(shape_[a]);
    }
    if (size_ > 0xffffffffu) {
        throw ConfigError(kModule, "grid too large");
    }
    spacing_.resize(n);
    topology_.resize(n);
    for (int a = 0; a < n; ++a) {
        if (spec_.is_torus()) {
            topology_[a] = AxisTopology::Periodic;
            spacing_[a] = spec_.periods[a] / shape_[a];
        } else if (a < n - 1) {
            topology_[a] = AxisTopology::Colatitude;
            spacing_[a] = std::numbers::pi / shape_[a];
        } else {
            if (shape_[a] % 2 != 0) {
                throw ConfigError(kModule, "sphere longitude count must be even");
            }
            topology_[a] = AxisTopology::Periodic;
            spacing_[a] = 2.0 * std::numbers::pi / shape_[a];
        }
    }

    slots_ = 2 * n + 4 * (n * (n - 1) / 2);
    table_.resize(size_ * static_cast<std::size_t>(slots_));
    for (std::size_t node = 0; node < size_; ++node) {
        std::uint32_t* row = table_.data() + node * slots_;
        for (int a = 0; a < n; ++a) {
            std::array<int, kMaxDomainDim> off{};
            off[a] = 1;
            row[2 * a] = static_cast<std::uint32_t>(neighbor(node, off));
            off[a] = -1;
            row[2 * a + 1] = static_cast<std::uint32_t>(neighbor(node, off));
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const int base = 2 * n + 4 * pair_index(i, j);
                const int si[4] = {1, 1, -1, -1};
                const int sj[4] = {1, -1, 1, -1};
                for (int c = 0; c < 4; ++c) {
                    std::array<int, kMaxDomainDim> off{};
                    off[i] = si[c];
                    off[j] = sj[c];
                    row[base + c] = static_cast<std::uint32_t>(neighbor(node, off));
                }
            }
        }
    }
}

std::array<int, kMaxDomainDim> Grid::unravel(std::size_t node) const {
    std::array<int, kMaxDomainDim> index{};
    for (int a = dim() - 1; a >= 0; --a) {
        index[a] = static_cast<int>(node % shape_[a]);
        node /= shape_[a];
    }
    return index;
}

std::size_t Grid::ravel(std::span<const int> index) const {
    std::size_t node = 0;
    for (int a = 0; a < dim(); ++a) {
        node = node * shape_[a] + static_cast<std::size_t>(index[a]);
    }
    return node;
}

std::array<double, kMaxDomainDim> Grid::coordinates(std::size_t node) const {
    const auto index = unravel(node);
    std::array<double, kMaxDomainDim> x{};
    for (int a = 0; a < dim(); ++a) {
        const double offset = topology_[a] == AxisTopology::Colatitude ? 0.5 : 0.0;
        x[a] = (index[a] + offset) * spacing_[a];
    }
    return x;
}

std::size_t Grid::neighbor(std::size_t node, std::array<int, kMaxDomainDim> offset) const {
    auto index = unravel(node);
    for (int a = 0; a < dim(); ++a) {
        index[a] += offset[a];
    }
    return resolve(index);
}

std::size_t Grid::resolve(std::array<int, kMaxDomainDim> index) const {
    const int n = dim();
    for (int a = 0; a < n; ++a) {
        if (topology_[a] != AxisTopology::Colatitude) {
            continue;
        }
        const int count = shape_[a];
        if (index[a] >= 0 && index[a] < count) {
            continue;
        }
        // Crossing a pole: c -> -c (or 2 pi - c), later colatitudes c -> pi - c,
        // longitude -> longitude + pi.
        index[a] = index[a] < 0 ? -1 - index[a] : 2 * count - 1 - index[a];
        for (int b = a + 1; b < n; ++b) {
            if (topology_[b] == AxisTopology::Colatitude) {
                index[b] = shape_[b] - 1 - index[b];
            } else {
                index[b] += shape_[b] / 2;
            }
        }
    }
    for (int a = 0; a < n; ++a) {
        if (topology_[a] == AxisTopology::Periodic) {
            const int count = shape_[a];
            index[a] = ((index[a] % count) + count) % count;
        }
    }
    return ravel(std::span<const int>(index.data(), n));
}

double Grid::cell_volume() const {
    double v = 1.0;
    for (double h : spacing_) {
        v *= h;
    }
    return v;
}

Grid make_grid(const ManifoldSpec& spec, const std::vector<int>& resolution) {
    return Grid(spec, resolution);
}

} // namespace mcf
