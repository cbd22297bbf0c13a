#pragma once

#include "degen/assembly.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace degen {

/// Test vectors come from std::mt19937_64, whose output sequence is fixed by
/// the C++ standard. Vector `index` of a run with seed `seed` uses the engine
/// seeded with seed + index * 0x9E3779B97F4A7C15 (mod 2^64), and each draw
/// maps to [-1, 1) as 2 (x >> 11) 2^-53 - 1. Library distributions are not
/// used because their algorithms differ between standard libraries.
inline std::mt19937_64 engine_for(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(seed + index * 0x9E3779B97F4A7C15ULL);
}

inline double uniform_pm1(std::mt19937_64& gen) { return double(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

/// Nodal vector with independent entries in [-1, 1) at interior nodes and
/// zeros on the Dirichlet boundary.
inline Eigen::VectorXd random_admissible(const OperatorPair& ops, std::uint64_t seed, std::uint64_t index) {
    auto gen = engine_for(seed, index);
    Eigen::VectorXd v(ops.dofs());
    for (Eigen::Index d = 0; d < v.size(); ++d) v[d] = uniform_pm1(gen);
    return ops.to_nodes(v);
}

} // namespace degen
