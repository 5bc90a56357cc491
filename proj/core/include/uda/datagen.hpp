#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uda/tensor.hpp"

namespace uda {

using Rng = std::mt19937_64;

// A labeled or unlabeled sample set from one domain.
struct Dataset {
  Tensor features;                        // N x d
  std::optional<std::vector<int>> labels; // length N, each in [0, class_count)
  std::string domain_tag;
  std::size_t class_count = 0;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool has_labels() const { return labels.has_value(); }

  // Throws ContractError/RangeError when the invariants do not hold.
  void validate() const;
};

enum class ShiftBase { kTwoMoons, kGaussianBlobs };

std::string to_string(ShiftBase base);
ShiftBase parse_shift_base(const std::string& name);

// Recipe for a synthetic source/target pair. The target is drawn from the
// source distribution and then rotated about the origin (in the plane of the
// first two coordinates), translated, and perturbed with Gaussian noise.
struct ShiftSpec {
  ShiftBase base = ShiftBase::kTwoMoons;
  std::size_t n_per_domain = 500;
  double rotation_deg = 0.0;
  std::vector<double> translation;  // empty means zero; else length d
  double noise_sigma = 0.0;
  std::size_t class_count = 2;
  std::size_t dim = 2;              // feature width for gaussian_blobs
  std::uint64_t seed = 0;

  void validate() const;
};

// Per-domain seed salts; the domain rng is seeded with spec.seed ^ salt.
inline constexpr std::uint64_t kSourceSeedSalt = 0x5eed'0000'0000'0001ULL;
inline constexpr std::uint64_t kTargetSeedSalt = 0x5eed'0000'0000'0002ULL;

// Standard two-moons layout: upper arc on the unit circle at the origin,
// lower arc centred at (1, 0.5). Not recentred, so a rotation about the
// origin also moves the data centroid.
inline constexpr double kMoonsJitter = 0.1;
// Gaussian blobs: class c centred at kBlobRadius * (cos 2pi c/C, sin 2pi c/C, 0...).
inline constexpr double kBlobRadius = 2.5;
inline constexpr double kBlobStd = 0.5;

std::pair<Dataset, Dataset> make_shift_pair(const ShiftSpec& spec);

Dataset add_gaussian_noise(const Dataset& d, double sigma, std::uint64_t seed);

// label_column empty => no labels. class_count 0 => inferred as max label + 1.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 std::size_t class_count);
// Writes f0..f{d-1}[,label] with 17 significant digits.
void save_csv(const Dataset& d, const std::string& path, const std::string& label_column = "label");

// A 2B-sample mini-batch: B source rows followed (in z) by B target rows.
struct BatchPair {
  Tensor xs;                                     // B x d
  std::vector<int> ys;                           // B source labels
  Tensor xt;                                     // B x d
  std::vector<double> z;                         // 2B domain flags: B ones then B zeros
  std::vector<std::pair<std::size_t, int>> yt_labeled;  // (row in xt, label)
  std::vector<std::size_t> source_index;
  std::vector<std::size_t> target_index;

  std::size_t batch_size() const { return ys.size(); }
};

// Draws B rows from each domain, without replacement when the domain has at
// least B rows and with replacement otherwise. known_target_labels, when
// non-empty, has one entry per target row (-1 = unlabeled) and feeds
// yt_labeled.
BatchPair sample_balanced_batch(const Dataset& source, const Dataset& target, std::size_t batch,
                                Rng& rng, std::span<const int> known_target_labels = {});

// Projection onto the top-2 principal components of the centred rows.
Tensor pca2(const Tensor& features);

}  // namespace uda
