#include "lhids/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lhids/artifact.hpp"
#include "lhids/errors.hpp"
#include "lhids/parallel.hpp"

namespace lhids {
namespace {

constexpr std::uint32_t kForestTag = section_tag("IFOR");

void build_node(std::vector<const FeatureVector*>& points, std::size_t begin, std::size_t end,
                std::size_t depth, std::size_t height_limit, UniformSource& draws,
                std::vector<ITreeNode>& nodes) {
  const std::size_t count = end - begin;
  const std::size_t self = nodes.size();
  nodes.push_back({});
  if (depth >= height_limit || count <= 1) {
    nodes[self].size = count;
    return;
  }

  const std::size_t dims = points[begin]->size();
  std::vector<std::size_t> candidates;
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t d = 0; d < dims; ++d) {
    double lo = (*points[begin])[d], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = std::min(lo, (*points[i])[d]);
      hi = std::max(hi, (*points[i])[d]);
    }
    if (hi > lo) {
      candidates.push_back(d);
      ranges.emplace_back(lo, hi);
    }
  }
  if (candidates.empty()) {
    nodes[self].size = count;
    return;
  }

  const std::size_t m = candidates.size();
  const std::size_t pick = std::min(static_cast<std::size_t>(draws.next() * static_cast<double>(m)), m - 1);
  const std::size_t dim = candidates[pick];
  const auto [lo, hi] = ranges[pick];
  double value;
  do {
    value = lo + draws.next() * (hi - lo);
  } while (!(value > lo && value < hi));

  const auto mid = std::stable_partition(
      points.begin() + static_cast<std::ptrdiff_t>(begin),
      points.begin() + static_cast<std::ptrdiff_t>(end),
      [&](const FeatureVector* p) { return (*p)[dim] < value; });
  const auto split = static_cast<std::size_t>(mid - points.begin());
  if (split == begin || split == end) {
    fail(ErrorCode::kEmptySample, "split produced an empty partition");
  }

  nodes[self].split_dim = static_cast<std::int32_t>(dim);
  nodes[self].split_value = value;
  build_node(points, begin, split, depth + 1, height_limit, draws, nodes);
  nodes[self].right = static_cast<std::uint32_t>(nodes.size());
  build_node(points, split, end, depth + 1, height_limit, draws, nodes);
}

std::size_t node_depth(const ITree& tree, std::size_t index) {
  const ITreeNode& n = tree.nodes[index];
  if (n.is_leaf()) return 0;
  return 1 + std::max(node_depth(tree, index + 1), node_depth(tree, n.right));
}

void encode_tree(ByteWriter& w, const ITree& tree) {
  w.u32(static_cast<std::uint32_t>(tree.nodes.size()));
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      w.u8(0);
      w.u64(n.size);
    } else {
      w.u8(1);
      w.u32(static_cast<std::uint32_t>(n.split_dim));
      w.f64(n.split_value);
    }
  }
}

// Rebuilds right-child links from the preorder sequence.
std::size_t link_subtree(ITree& tree, std::size_t index) {
  if (index >= tree.nodes.size()) fail(ErrorCode::kCorruptArtifact, "truncated tree");
  ITreeNode& n = tree.nodes[index];
  if (n.is_leaf()) return index + 1;
  const std::size_t right = link_subtree(tree, index + 1);
  tree.nodes[index].right = static_cast<std::uint32_t>(right);
  return link_subtree(tree, right);
}

ITree decode_tree(ByteReader& r, std::uint32_t dim) {
  ITree tree;
  const std::uint32_t count = r.u32();
  if (count == 0 || count > r.remaining() / 9) fail(ErrorCode::kCorruptArtifact, "bad node count");
  tree.nodes.resize(count);
  for (auto& n : tree.nodes) {
    const std::uint8_t type = r.u8();
    if (type == 0) {
      n.size = r.u64();
    } else if (type == 1) {
      const std::uint32_t d = r.u32();
      if (d >= dim) fail(ErrorCode::kCorruptArtifact, "split dimension out of range");
      n.split_dim = static_cast<std::int32_t>(d);
      n.split_value = r.f64();
    } else {
      fail(ErrorCode::kCorruptArtifact, "bad node type");
    }
  }
  if (link_subtree(tree, 0) != tree.nodes.size()) {
    fail(ErrorCode::kCorruptArtifact, "tree has trailing nodes");
  }
  return tree;
}

}  // namespace

double c_factor(std::uint64_t n) {
  if (n <= 1) return 0.0;
  const double nd = static_cast<double>(n);
  const double harmonic = std::log(nd - 1.0) + std::numbers::egamma;
  return 2.0 * harmonic - 2.0 * (nd - 1.0) / nd;
}

std::size_t ITree::depth() const { return nodes.empty() ? 0 : node_depth(*this, 0); }

ITree build_tree(std::span<const FeatureVector* const> sample, std::size_t height_limit,
                 UniformSource& draws) {
  if (sample.empty()) fail(ErrorCode::kEmptySample, "cannot build a tree on no points");
  const std::size_t dims = sample.front()->size();
  for (const auto* p : sample) {
    if (p->size() != dims) fail(ErrorCode::kDimensionMismatch, "ragged feature vectors");
  }
  std::vector<const FeatureVector*> points(sample.begin(), sample.end());
  ITree tree;
  build_node(points, 0, points.size(), 0, height_limit, draws, tree.nodes);
  return tree;
}

ITree build_tree(const std::vector<FeatureVector>& sample, std::size_t height_limit,
                 UniformSource& draws) {
  std::vector<const FeatureVector*> ptrs;
  for (const auto& f : sample) ptrs.push_back(&f);
  return build_tree(ptrs, height_limit, draws);
}

double path_length(const ITree& tree, std::span<const double> x) {
  std::size_t i = 0;
  std::size_t edges = 0;
  while (!tree.nodes[i].is_leaf()) {
    const ITreeNode& n = tree.nodes[i];
    if (static_cast<std::size_t>(n.split_dim) >= x.size()) {
      fail(ErrorCode::kDimensionMismatch, "query has " + std::to_string(x.size()) + " dims");
    }
    i = x[static_cast<std::size_t>(n.split_dim)] < n.split_value ? i + 1 : n.right;
    ++edges;
  }
  // An empty leaf counts as a single point.
  return static_cast<double>(edges) + c_factor(std::max<std::uint64_t>(tree.nodes[i].size, 1));
}

std::uint32_t height_limit_for(std::uint64_t sample_size) {
  std::uint32_t h = 0;
  while (h < 64 && (std::uint64_t{1} << h) < sample_size) ++h;
  return h;
}

Rng tree_rng(std::uint64_t seed, std::size_t tree_index) {
  return Rng(derive_seed(derive_seed(seed, stream::kForest), tree_index));
}

namespace {

std::vector<std::size_t> draw_subsample(std::size_t n, std::uint64_t psi, Rng& rng) {
  const std::size_t m = static_cast<std::size_t>(std::min<std::uint64_t>(psi, n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  }
  idx.resize(m);
  return idx;
}

}  // namespace

std::vector<std::size_t> subsample_indices(std::size_t n, std::uint64_t psi, std::uint64_t seed,
                                           std::size_t tree_index) {
  Rng rng = tree_rng(seed, tree_index);
  return draw_subsample(n, psi, rng);
}

IsolationForestModel fit_forest(const std::vector<FeatureVector>& features, std::size_t trees,
                                std::uint64_t psi, std::uint64_t seed) {
  if (features.empty()) fail(ErrorCode::kEmptyTrainingSet, "no feature vectors to fit");
  if (trees == 0) fail(ErrorCode::kBadParameter, "forest needs at least one tree");
  if (psi < 2) fail(ErrorCode::kBadParameter, "subsample size must be >= 2");
  const std::size_t dim = features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim) fail(ErrorCode::kDimensionMismatch, "ragged feature vectors");
  }

  IsolationForestModel forest;
  forest.psi = psi;
  forest.sample_size = std::min<std::uint64_t>(psi, features.size());
  forest.height_limit = height_limit_for(forest.sample_size);
  forest.dim = static_cast<std::uint32_t>(dim);
  forest.seed = seed;
  forest.trees.resize(trees);
  parallel_for(trees, [&](std::size_t t) {
    Rng rng = tree_rng(seed, t);
    const auto idx = draw_subsample(features.size(), psi, rng);
    std::vector<const FeatureVector*> sample;
    sample.reserve(idx.size());
    for (std::size_t i : idx) sample.push_back(&features[i]);
    RngSource draws(rng);
    forest.trees[t] = build_tree(sample, forest.height_limit, draws);
  });
  return forest;
}

double mean_path_length(const IsolationForestModel& forest, std::span<const double> x) {
  if (x.size() != forest.dim) {
    fail(ErrorCode::kDimensionMismatch, "query dim " + std::to_string(x.size()) + " vs forest dim " +
                                            std::to_string(forest.dim));
  }
  double sum = 0.0;
  for (const auto& tree : forest.trees) sum += path_length(tree, x);
  return sum / static_cast<double>(forest.trees.size());
}

double score_from_path_length(double mean_path, std::uint64_t sample_size) {
  const double c = c_factor(sample_size);
  if (c == 0.0) return 0.5;  // a single-point sample carries no information
  return std::exp2(-mean_path / c);
}

double anomaly_score(const IsolationForestModel& forest, std::span<const double> x) {
  return score_from_path_length(mean_path_length(forest, x), forest.sample_size);
}

std::string encode_forest(const IsolationForestModel& forest) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(forest.trees.size()));
  w.u64(forest.psi);
  w.u64(forest.sample_size);
  w.u32(forest.height_limit);
  w.u32(forest.dim);
  w.u64(forest.seed);
  for (const auto& tree : forest.trees) encode_tree(w, tree);
  return encode_container(ArtifactKind::kForest, {{kForestTag, w.take()}});
}

IsolationForestModel decode_forest(std::string_view bytes) {
  const auto sections = decode_container(bytes, ArtifactKind::kForest);
  ByteReader r(require_section(sections, kForestTag, "IFOR").payload);
  IsolationForestModel forest;
  const std::uint32_t count = r.u32();
  forest.psi = r.u64();
  forest.sample_size = r.u64();
  forest.height_limit = r.u32();
  forest.dim = r.u32();
  forest.seed = r.u64();
  if (count == 0) fail(ErrorCode::kCorruptArtifact, "forest without trees");
  for (std::uint32_t i = 0; i < count; ++i) forest.trees.push_back(decode_tree(r, forest.dim));
  r.expect_done("IFOR");
  return forest;
}

void save_forest(const std::filesystem::path& path, const IsolationForestModel& forest) {
  write_binary_file(path, encode_forest(forest));
}

IsolationForestModel load_forest(const std::filesystem::path& path) {
  return decode_forest(read_binary_file(path));
}

}  // namespace lhids
