#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lhids/neural.hpp"
#include "lhids/rng.hpp"

namespace lhids {

// Average path length of an unsuccessful BST search over n points:
// 2 H(n-1) - 2(n-1)/n with H(i) = ln(i) + Euler-Mascheroni; 0 for n <= 1.
double c_factor(std::uint64_t n);

// Source of uniform draws in [0, 1) for tree construction. Kept abstract so
// a recorded draw sequence can be replayed through an independent builder.
class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual double next() = 0;
};

class RngSource final : public UniformSource {
 public:
  explicit RngSource(Rng& rng) : rng_(rng) {}
  double next() override { return uniform01(rng_); }

 private:
  Rng& rng_;
};

// Flat preorder node; the left child of an internal node is the next node.
struct ITreeNode {
  std::int32_t split_dim = -1;  // -1 marks a leaf
  double split_value = 0.0;
  std::uint64_t size = 0;       // leaf only
  std::uint32_t right = 0;      // internal only: index of the right child

  bool is_leaf() const { return split_dim < 0; }
  friend bool operator==(const ITreeNode&, const ITreeNode&) = default;
};

struct ITree {
  std::vector<ITreeNode> nodes;

  std::size_t depth() const;
  friend bool operator==(const ITree&, const ITree&) = default;
};

// Recursive isolation: a node becomes a leaf at the height limit, with at most
// one point, or when no dimension has a nonzero range. Otherwise one draw picks
// the split dimension among the non-constant ones and further draws pick a
// value strictly inside (min, max); points with x < value go left.
//
// Draw protocol per internal node, in preorder:
//   dim   = candidates[min(floor(u * m), m - 1)]
//   value = min + u * (max - min), redrawn until strictly inside (min, max)
ITree build_tree(std::span<const FeatureVector* const> sample, std::size_t height_limit,
                 UniformSource& draws);
ITree build_tree(const std::vector<FeatureVector>& sample, std::size_t height_limit,
                 UniformSource& draws);

// Edges to the reached leaf plus c_factor(leaf size).
double path_length(const ITree& tree, std::span<const double> x);

struct IsolationForestModel {
  std::vector<ITree> trees;
  std::uint64_t psi = 256;         // requested subsample size
  std::uint64_t sample_size = 0;   // realized min(psi, n)
  std::uint32_t height_limit = 0;  // ceil(log2(sample_size))
  std::uint32_t dim = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const IsolationForestModel&, const IsolationForestModel&) = default;
};

std::uint32_t height_limit_for(std::uint64_t sample_size);

// Indices drawn without replacement for tree `tree_index`. Each tree owns a
// generator derived from (seed, tree_index), so trees build independently.
std::vector<std::size_t> subsample_indices(std::size_t n, std::uint64_t psi, std::uint64_t seed,
                                           std::size_t tree_index);
Rng tree_rng(std::uint64_t seed, std::size_t tree_index);

IsolationForestModel fit_forest(const std::vector<FeatureVector>& features, std::size_t trees,
                                std::uint64_t psi, std::uint64_t seed);

double mean_path_length(const IsolationForestModel& forest, std::span<const double> x);
// s(x) = 2^(-E[h(x)] / c(sample_size)); higher is more anomalous.
double anomaly_score(const IsolationForestModel& forest, std::span<const double> x);
double score_from_path_length(double mean_path, std::uint64_t sample_size);

std::string encode_forest(const IsolationForestModel& forest);
IsolationForestModel decode_forest(std::string_view bytes);
void save_forest(const std::filesystem::path& path, const IsolationForestModel& forest);
IsolationForestModel load_forest(const std::filesystem::path& path);

}  // namespace lhids
