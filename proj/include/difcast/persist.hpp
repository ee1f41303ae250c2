#pragma once

#include "difcast/basis.hpp"
#include "difcast/propagator.hpp"

#include <filesystem>
#include <memory>

namespace difcast {

// Operators, bases and propagators are DFM1 matrices with a ".meta" sidecar.
// Each sidecar records the file it was derived from, so loading a propagator
// also loads its basis, operator and training series.

//! Writes T^ (dense N x N, or nnz x 3 triplets for knn) plus q and D as N x 1 files.
void save_operator(const std::filesystem::path& path, const DiffusionOperator& op,
                   const std::filesystem::path& training_path);
std::shared_ptr<const DiffusionOperator> load_operator(const std::filesystem::path& path);

void save_basis(const std::filesystem::path& path, const BasisSet& basis, const std::filesystem::path& op_path);
std::shared_ptr<const BasisSet> load_basis(const std::filesystem::path& path);

void save_propagator(const std::filesystem::path& path, const Propagator& prop,
                     const std::filesystem::path& basis_path);
Propagator load_propagator(const std::filesystem::path& path);

}  // namespace difcast
