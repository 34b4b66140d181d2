#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "discourse/embedstore.hpp"

namespace discourse::projection {

enum class Method { pca, umap };
const char* method_name(Method m) noexcept;

struct Projection2D {
  std::vector<std::string> ids;
  std::vector<double> coords;  // n×2, row-major
  Method method = Method::pca;
  std::optional<std::array<double, 2>> explained_variance;  // pca only
};

// Mean-centered projection onto the top-2 principal components (covariance
// eigenvectors via cyclic Jacobi). Sign convention: each component's
// largest-magnitude entry is positive.
Projection2D pca2d(const embedstore::EmbeddingMatrix& X);

// Neighbor-graph layout: fuzzy k-NN edge weights, seeded SGD with negative
// sampling. Reproducible for a fixed seed on a fixed platform.
Projection2D umap2d(const embedstore::EmbeddingMatrix& X, int n_neighbors = 15,
                    double min_dist = 0.1, uint64_t seed = 42);

}  // namespace discourse::projection
