#pragma once

#include "mcf/manifold.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace mcf {

enum class AxisTopology {
    Periodic,   // torus axes and sphere longitude
    Colatitude  // staggered rows (j + 1/2) * pi / N, reflected across the poles
};

// Uniform structured grid over the domain chart. Node indices are row-major
// with the last axis fastest. Sphere grids keep every node strictly inside the
// chart; stencils that step past a pole land on the reflected node
// (colatitude mirrored, later colatitudes flipped, longitude shifted by pi).
class Grid {
public:
    Grid(ManifoldSpec spec, std::vector<int> shape);

    const ManifoldSpec& spec() const { return spec_; }
    int dim() const { return spec_.dim; }
    const std::vector<int>& shape() const { return shape_; }
    const std::vector<double>& spacing() const { return spacing_; }
    const std::vector<AxisTopology>& topology() const { return topology_; }
    std::size_t size() const { return size_; }

    std::array<int, kMaxDomainDim> unravel(std::size_t node) const;
    std::size_t ravel(std::span<const int> index) const;

    // Chart coordinates of a node.
    std::array<double, kMaxDomainDim> coordinates(std::size_t node) const;

    // Node reached from `node` by integer offsets along each axis.
    std::size_t neighbor(std::size_t node, std::array<int, kMaxDomainDim> offset) const;

    // Precomputed second-order stencil: +e_i, -e_i, and the four diagonal
    // neighbours (+i+j, +i-j, -i+j, -i-j) for each pair i < j.
    std::uint32_t plus(std::size_t node, int axis) const { return table_[node * slots_ + 2 * axis]; }
    std::uint32_t minus(std::size_t node, int axis) const { return table_[node * slots_ + 2 * axis + 1]; }
    std::uint32_t diagonal(std::size_t node, int i, int j, int corner) const {
        return table_[node * slots_ + 2 * dim() + 4 * pair_index(i, j) + corner];
    }

    // Sphere longitude axis index, or -1 for tori.
    int longitude_axis() const { return spec_.is_sphere() ? dim() - 1 : -1; }

    // Product of nodal spacings (chart cell volume).
    double cell_volume() const;

    friend bool operator==(const Grid& a, const Grid& b) {
        return a.spec_ == b.spec_ && a.shape_ == b.shape_;
    }

private:
    static int pair_index(int i, int j) { return i == 0 ? j - 1 : 2; }
    std::size_t resolve(std::array<int, kMaxDomainDim> index) const;

    ManifoldSpec spec_;
    std::vector<int> shape_;
    std::vector<double> spacing_;
    std::vector<AxisTopology> topology_;
    std::size_t size_ = 0;
    int slots_ = 0;
    std::vector<std::uint32_t> table_;
};

// Resolution must be >= 8 per axis; sphere longitudes must be even so the
// pole reflection lands on a node.
Grid make_grid(const ManifoldSpec& spec, const std::vector<int>& resolution);

} // namespace mcf
