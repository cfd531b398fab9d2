#include "lautum/dataset.hpp"

#include <cmath>
#include <fstream>

#include "lautum/errors.hpp"
#include "lautum/rng.hpp"

namespace lautum {

Eigen::MatrixXd Dataset::onehot() const {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(num_classes, size());
  for (Eigen::Index i = 0; i < size(); ++i) {
    y(labels[static_cast<std::size_t>(i)], i) = 1.0;
  }
  return y;
}

void Dataset::validate() const {
  if (size() < 1) throw DataError("dataset '" + name + "' is empty");
  if (static_cast<Eigen::Index>(labels.size()) != size()) {
    throw DataError("dataset '" + name + "': label count " +
                    std::to_string(labels.size()) + " != sample count " +
                    std::to_string(size()));
  }
  if (num_classes < 1) throw DataError("dataset needs at least one class");
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw DataError("dataset '" + name + "': label " + std::to_string(l) +
                      " outside [0," + std::to_string(num_classes) + ")");
    }
  }
  if (!inputs.allFinite()) {
    throw DataError("dataset '" + name + "' contains NaN or Inf");
  }
}

// ---- IDX ----

namespace {

std::uint32_t read_be32(const std::vector<unsigned char>& buf,
                        std::size_t offset, const std::string& path) {
  if (offset + 4 > buf.size()) {
    throw FormatError(path + ": truncated at offset " +
                      std::to_string(offset) + " (need 4 header bytes)");
  }
  return (static_cast<std::uint32_t>(buf[offset]) << 24) |
         (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
         static_cast<std::uint32_t>(buf[offset + 3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const unsigned char bytes[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(is), {});
}

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  const std::vector<unsigned char> img = read_file(images_path);
  const std::vector<unsigned char> lab = read_file(labels_path);

  if (read_be32(img, 0, images_path) != kImagesMagic) {
    throw FormatError(images_path + ": bad magic at offset 0, expected " +
                      std::to_string(kImagesMagic));
  }
  const std::uint32_t n = read_be32(img, 4, images_path);
  const std::uint32_t rows = read_be32(img, 8, images_path);
  const std::uint32_t cols = read_be32(img, 12, images_path);
  const std::size_t pixels = static_cast<std::size_t>(n) * rows * cols;
  if (img.size() != 16 + pixels) {
    throw FormatError(images_path + ": payload has " +
                      std::to_string(img.size() - 16) + " bytes at offset 16, "
                      "header declares " + std::to_string(pixels));
  }

  if (read_be32(lab, 0, labels_path) != kLabelsMagic) {
    throw FormatError(labels_path + ": bad magic at offset 0, expected " +
                      std::to_string(kLabelsMagic));
  }
  const std::uint32_t n_labels = read_be32(lab, 4, labels_path);
  if (n_labels != n) {
    throw FormatError(labels_path + ": label count " +
                      std::to_string(n_labels) + " at offset 4 != image count " +
                      std::to_string(n));
  }
  if (lab.size() != 8 + n_labels) {
    throw FormatError(labels_path + ": payload has " +
                      std::to_string(lab.size() - 8) +
                      " bytes at offset 8, header declares " +
                      std::to_string(n_labels));
  }

  Dataset ds;
  ds.name = images_path;
  ds.split = "train";
  const Eigen::Index d = static_cast<Eigen::Index>(rows) * cols;
  ds.inputs.resize(d, n);
  for (std::uint32_t s = 0; s < n; ++s) {
    for (Eigen::Index p = 0; p < d; ++p) {
      ds.inputs(p, s) =
          static_cast<double>(img[16 + static_cast<std::size_t>(s) * d + p]) /
          255.0;
    }
  }
  ds.labels.resize(n);
  int max_label = 0;
  for (std::uint32_t s = 0; s < n; ++s) {
    ds.labels[s] = static_cast<int>(lab[8 + s]);
    max_label = std::max(max_label, ds.labels[s]);
  }
  ds.num_classes = max_label + 1;
  ds.validate();
  return ds;
}

void save_idx(const Dataset& ds, Eigen::Index rows, Eigen::Index cols,
              const std::string& images_path,
              const std::string& labels_path) {
  if (rows * cols != ds.dim()) {
    throw ShapeError("rows*cols must equal the dataset dimension");
  }
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path + " for writing");
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (Eigen::Index s = 0; s < ds.size(); ++s) {
    for (Eigen::Index p = 0; p < ds.dim(); ++p) {
      const double v = ds.inputs(p, s) * 255.0;
      img.put(static_cast<char>(
          static_cast<unsigned char>(std::lround(v))));
    }
  }
  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path + " for writing");
  write_be32(lab, kLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int l : ds.labels) lab.put(static_cast<char>(l));
  if (!img || !lab) throw IoError("IDX write failed");
}

// ---- Synthetic shift ----

void SyntheticShiftSpec::validate() const {
  if (classes < 2) throw ConfigError("need at least 2 classes");
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (classes > 2 * dim) {
    throw ConfigError("cannot construct " + std::to_string(classes) +
                      " distinct axis means in dimension " +
                      std::to_string(dim) + " (max " +
                      std::to_string(2 * dim) + ")");
  }
  if (within_std <= 0.0) throw ConfigError("within_std must be positive");
  if (train_per_class < 1 || test_per_class < 1) {
    throw ConfigError("per-class sample counts must be >= 1");
  }
}

namespace {

// Block-diagonal rotation by `angle` over coordinate pairs (0,1), (2,3), ...
Eigen::MatrixXd plane_rotation(int dim, double angle_rad) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(dim, dim);
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  for (int i = 0; i + 1 < dim; i += 2) {
    r(i, i) = c;
    r(i, i + 1) = -s;
    r(i + 1, i) = s;
    r(i + 1, i + 1) = c;
  }
  return r;
}

Dataset sample_blobs(const Eigen::MatrixXd& means, double within_std,
                     int per_class, Rng& rng, const std::string& name,
                     const std::string& split) {
  const int k = static_cast<int>(means.cols());
  const Eigen::Index d = means.rows();
  Dataset ds;
  ds.name = name;
  ds.split = split;
  ds.num_classes = k;
  ds.inputs.resize(d, static_cast<Eigen::Index>(k) * per_class);
  ds.labels.resize(static_cast<std::size_t>(k) * per_class);
  Eigen::Index col = 0;
  for (int c = 0; c < k; ++c) {
    for (int i = 0; i < per_class; ++i, ++col) {
      for (Eigen::Index p = 0; p < d; ++p) {
        ds.inputs(p, col) = means(p, c) + within_std * rng.normal();
      }
      ds.labels[static_cast<std::size_t>(col)] = c;
    }
  }
  return ds;
}

}  // namespace

SyntheticMeans synthetic_class_means(const SyntheticShiftSpec& spec) {
  spec.validate();
  SyntheticMeans m;
  m.source = Eigen::MatrixXd::Zero(spec.dim, spec.classes);
  for (int c = 0; c < spec.classes; ++c) {
    const int axis = c % spec.dim;
    const double sign = c < spec.dim ? 1.0 : -1.0;
    m.source(axis, c) = sign * spec.mean_scale;
  }
  const Eigen::MatrixXd r =
      plane_rotation(spec.dim, spec.shift_angle_deg * M_PI / 180.0);
  const Eigen::VectorXd offset =
      spec.shift_offset *
      Eigen::VectorXd::Ones(spec.dim) / std::sqrt(double(spec.dim));
  m.target = (r * m.source).colwise() + offset;
  return m;
}

SyntheticShiftData gen_synthetic_shift(const SyntheticShiftSpec& spec) {
  const SyntheticMeans means = synthetic_class_means(spec);
  SyntheticShiftData data;
  Rng rng_src_train(mix_seed(spec.seed, 1));
  Rng rng_src_test(mix_seed(spec.seed, 2));
  Rng rng_tgt_train(mix_seed(spec.seed, 3));
  Rng rng_tgt_test(mix_seed(spec.seed, 4));
  data.source_train = sample_blobs(means.source, spec.within_std,
                                   spec.train_per_class, rng_src_train,
                                   "synthetic-source", "train");
  data.source_test =
      sample_blobs(means.source, spec.within_std, spec.test_per_class,
                   rng_src_test, "synthetic-source", "test");
  data.target_train = sample_blobs(means.target, spec.within_std,
                                   spec.train_per_class, rng_tgt_train,
                                   "synthetic-target", "train");
  data.target_test =
      sample_blobs(means.target, spec.within_std, spec.test_per_class,
                   rng_tgt_test, "synthetic-target", "test");
  return data;
}

}  // namespace lautum
