#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ewn {

// Row-major feature matrix plus labels. Binary sets use y in {-1,+1},
// multiclass sets use class indices 0..k-1.
struct LabeledSet {
  std::vector<double> X;  // m*d
  std::vector<int> y;
  int m = 0, d = 0;
  bool binary = true;
  std::string name;
  uint64_t seed = 0;

  const double* row(int i) const { return X.data() + static_cast<size_t>(i) * d; }
  int num_classes() const;
};

// The single positive point (2,1).
LabeledSet gen_simple_traj();

// Four corners of the square, XOR-labeled: (1,1),(-1,-1) -> +1.
LabeledSet gen_xor();

// Linearly separable planar-style set: points uniform in [-1,1]^d, labeled by
// a random unit separator through the origin, points closer than `margin` to
// the boundary rejected. Separability is certified by the hard-margin oracle.
LabeledSet gen_linsep(int m, int d, double margin, uint64_t seed);

// Procedurally rendered digit glyphs (seven-segment skeletons with random
// affine jitter and pixel noise), 28x28, classes 0..9, class-balanced.
LabeledSet gen_digits(int m, uint64_t seed);

// IDX-format reader (big-endian, magic 0x803 images / 0x801 labels). Pixels
// scaled to [0,1]. subset > 0 keeps a deterministic class-stratified sample;
// classes, when given, filters to those labels first.
LabeledSet load_mnist_idx(const std::string& images_path, const std::string& labels_path,
                          int subset, const std::vector<int>* classes, uint64_t seed);

void save_idx(const LabeledSet& set, const std::string& images_path,
              const std::string& labels_path);

void save_csv(const LabeledSet& set, const std::string& path);
LabeledSet load_csv(const std::string& path);

// FNV-1a over the byte-quantized pixels of one image; pins file identity.
uint64_t image_checksum(const LabeledSet& set, int index);

}  // namespace ewn
