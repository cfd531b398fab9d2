#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace lautum {

// Column-per-sample dataset. Image inputs are scaled to [0,1]; labels are
// class indices in [0, num_classes).
struct Dataset {
  Eigen::MatrixXd inputs;   // D x N
  std::vector<int> labels;  // length N
  int num_classes = 0;
  std::string name;
  std::string split;  // "train" | "test"

  Eigen::Index dim() const { return inputs.rows(); }
  Eigen::Index size() const { return inputs.cols(); }

  // K x N one-hot encoding of the labels.
  Eigen::MatrixXd onehot() const;

  void validate() const;
};

// ---- IDX container (big-endian headers, ubyte payloads) ----

// Parses an images file (magic 0x00000803, dims N x rows x cols) and a labels
// file (magic 0x00000801). Pixels are scaled to [0,1]; labels are validated.
// Malformed input throws FormatError naming the byte offset.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path);

// Inverse of load_idx for datasets whose inputs are multiples of 1/255;
// exact round-trip for anything load_idx produced.
void save_idx(const Dataset& ds, Eigen::Index rows, Eigen::Index cols,
              const std::string& images_path, const std::string& labels_path);

// ---- Synthetic covariate-shift benchmark ----

// Gaussian class blobs with means on the coordinate axes; the target domain
// rotates the means (block-diagonal plane rotations) and adds a constant
// offset, keeping label semantics. Everything is a pure function of the spec.
struct SyntheticShiftSpec {
  int classes = 4;
  int dim = 16;
  double mean_scale = 2.0;
  double within_std = 1.0;
  double shift_angle_deg = 30.0;
  double shift_offset = 0.0;
  int train_per_class = 250;
  int test_per_class = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticShiftData {
  Dataset source_train;
  Dataset source_test;
  Dataset target_train;
  Dataset target_test;
};

SyntheticShiftData gen_synthetic_shift(const SyntheticShiftSpec& spec);

// Class means of both domains (columns are classes); exposed so tests can
// check the zero-shift and rotation geometry directly.
struct SyntheticMeans {
  Eigen::MatrixXd source;  // D x K
  Eigen::MatrixXd target;  // D x K
};
SyntheticMeans synthetic_class_means(const SyntheticShiftSpec& spec);

}  // namespace lautum
