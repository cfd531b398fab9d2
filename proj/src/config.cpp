#include "lautum/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "lautum/errors.hpp"
#include "lautum/rng.hpp"

namespace lautum {

std::string to_string(TrainingMode mode) {
  return mode == TrainingMode::kStandardTransfer ? "standard_transfer"
                                                 : "lautum";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + value + "' is not a number");
  }
  if (pos != value.size()) {
    throw ConfigError("key '" + key + "': trailing characters in '" + value +
                      "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': '" + value + "' is not an integer");
  }
  if (pos != value.size()) {
    throw ConfigError("key '" + key + "': trailing characters in '" + value +
                      "'");
  }
  return v;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in the open interval (0,1), got " +
                      fmt_double(alpha));
  }
  if (jitter <= 0.0) throw ConfigError("jitter must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (labeled_count < 1) throw ConfigError("labeled_count must be >= 1");
  if (epochs_pre < 1) throw ConfigError("pretrain epochs must be >= 1");
  if (epochs_post < 1) throw ConfigError("finetune epochs must be >= 1");
  if (adam_pre.lr <= 0.0 || adam_post.lr <= 0.0) {
    throw ConfigError("learning rates must be positive");
  }
  if (arch != "mlp" && arch != "conv") {
    throw ConfigError("network arch must be 'mlp' or 'conv', got '" + arch +
                      "'");
  }
  if (arch == "mlp") {
    if (hidden_dims.empty()) throw ConfigError("mlp needs >= 1 hidden layer");
    for (Eigen::Index h : hidden_dims) {
      if (h < 1) throw ConfigError("hidden layer widths must be >= 1");
    }
  }
  if (data_kind == "synthetic") {
    synthetic.validate();
  } else if (data_kind == "idx") {
    if (source_train_images.empty() || source_train_labels.empty() ||
        source_test_images.empty() || source_test_labels.empty() ||
        target_train_images.empty() || target_train_labels.empty() ||
        target_test_images.empty() || target_test_labels.empty()) {
      throw ConfigError("idx data requires all eight file paths");
    }
  } else {
    throw ConfigError("data kind must be 'synthetic' or 'idx', got '" +
                      data_kind + "'");
  }
  if (mode == TrainingMode::kStandardTransfer && lambda != 0.0) {
    throw ConfigError("internal: standard_transfer must carry lambda == 0");
  }
}

std::uint64_t ExperimentConfig::effective_split_seed() const {
  return split_seed_set ? split_seed : mix_seed(seed, 0x73706c69 /*"spli"*/);
}

std::string ExperimentConfig::effective_output_dir() const {
  if (!output_dir.empty()) return output_dir;
  if (const char* env = std::getenv("LAUTUM_OUTPUT_DIR");
      env != nullptr && env[0] != '\0') {
    return env;
  }
  return ".";
}

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  os << "mode = " << to_string(mode) << "\n";
  os << "lambda = " << fmt_double(lambda) << "\n";
  os << "alpha = " << fmt_double(alpha) << "\n";
  os << "jitter = " << fmt_double(jitter) << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "seed = " << seed << "\n";
  os << "run_name = " << run_name << "\n";
  os << "timing = " << (record_wall_time ? "real" : "off") << "\n";
  os << "[data]\n";
  os << "kind = " << data_kind << "\n";
  if (data_kind == "synthetic") {
    os << "classes = " << synthetic.classes << "\n";
    os << "dim = " << synthetic.dim << "\n";
    os << "mean_scale = " << fmt_double(synthetic.mean_scale) << "\n";
    os << "within_std = " << fmt_double(synthetic.within_std) << "\n";
    os << "shift_angle_deg = " << fmt_double(synthetic.shift_angle_deg)
       << "\n";
    os << "shift_offset = " << fmt_double(synthetic.shift_offset) << "\n";
    os << "train_per_class = " << synthetic.train_per_class << "\n";
    os << "test_per_class = " << synthetic.test_per_class << "\n";
    os << "data_seed = " << synthetic.seed << "\n";
  } else {
    os << "source_train_images = " << source_train_images << "\n";
    os << "source_train_labels = " << source_train_labels << "\n";
    os << "source_test_images = " << source_test_images << "\n";
    os << "source_test_labels = " << source_test_labels << "\n";
    os << "target_train_images = " << target_train_images << "\n";
    os << "target_train_labels = " << target_train_labels << "\n";
    os << "target_test_images = " << target_test_images << "\n";
    os << "target_test_labels = " << target_test_labels << "\n";
  }
  os << "[split]\n";
  os << "labeled_count = " << labeled_count << "\n";
  os << "seed = " << effective_split_seed() << "\n";
  os << "[network]\n";
  os << "arch = " << arch << "\n";
  if (arch == "mlp") {
    os << "hidden = ";
    for (std::size_t i = 0; i < hidden_dims.size(); ++i) {
      if (i > 0) os << ",";
      os << hidden_dims[i];
    }
    os << "\n";
  }
  os << "[pretrain]\n";
  os << "epochs = " << epochs_pre << "\n";
  os << "lr = " << fmt_double(adam_pre.lr) << "\n";
  os << "beta1 = " << fmt_double(adam_pre.beta1) << "\n";
  os << "beta2 = " << fmt_double(adam_pre.beta2) << "\n";
  os << "eps = " << fmt_double(adam_pre.eps) << "\n";
  os << "[finetune]\n";
  os << "epochs = " << epochs_post << "\n";
  os << "lr = " << fmt_double(adam_post.lr) << "\n";
  os << "beta1 = " << fmt_double(adam_post.beta1) << "\n";
  os << "beta2 = " << fmt_double(adam_post.beta2) << "\n";
  os << "eps = " << fmt_double(adam_post.eps) << "\n";
  return os.str();
}

ParsedConfig parse_config_text(const std::string& text) {
  ParsedConfig out;
  ExperimentConfig& cfg = out.config;
  bool lambda_set = false;

  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unterminated section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section != "data" && section != "split" && section != "network" &&
          section != "pretrain" && section != "finetune") {
        throw ConfigError("line " + std::to_string(lineno) +
                          ": unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    }

    auto unknown = [&]() -> ConfigError {
      return ConfigError("line " + std::to_string(lineno) +
                         ": unknown key '" + key + "'" +
                         (section.empty() ? "" : " in section [" + section +
                                                     "]"));
    };

    if (section.empty()) {
      if (key == "mode") {
        if (value == "standard_transfer") {
          cfg.mode = TrainingMode::kStandardTransfer;
        } else if (value == "lautum") {
          cfg.mode = TrainingMode::kLautum;
        } else {
          throw ConfigError("mode must be 'standard_transfer' or 'lautum', "
                            "got '" + value + "'");
        }
      } else if (key == "lambda") {
        cfg.lambda = parse_double(key, value);
        lambda_set = true;
      } else if (key == "alpha") {
        cfg.alpha = parse_double(key, value);
      } else if (key == "jitter") {
        cfg.jitter = parse_double(key, value);
      } else if (key == "batch_size") {
        cfg.batch_size = parse_int(key, value);
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
      } else if (key == "output_dir") {
        cfg.output_dir = value;
      } else if (key == "run_name") {
        cfg.run_name = value;
      } else if (key == "timing") {
        if (value == "off") {
          cfg.record_wall_time = false;
        } else if (value == "real") {
          cfg.record_wall_time = true;
        } else {
          throw ConfigError("timing must be 'off' or 'real'");
        }
      } else {
        throw unknown();
      }
    } else if (section == "data") {
      if (key == "kind") {
        cfg.data_kind = value;
      } else if (key == "classes") {
        cfg.synthetic.classes = static_cast<int>(parse_int(key, value));
      } else if (key == "dim") {
        cfg.synthetic.dim = static_cast<int>(parse_int(key, value));
      } else if (key == "mean_scale") {
        cfg.synthetic.mean_scale = parse_double(key, value);
      } else if (key == "within_std") {
        cfg.synthetic.within_std = parse_double(key, value);
      } else if (key == "shift_angle_deg") {
        cfg.synthetic.shift_angle_deg = parse_double(key, value);
      } else if (key == "shift_offset") {
        cfg.synthetic.shift_offset = parse_double(key, value);
      } else if (key == "train_per_class") {
        cfg.synthetic.train_per_class = static_cast<int>(parse_int(key, value));
      } else if (key == "test_per_class") {
        cfg.synthetic.test_per_class = static_cast<int>(parse_int(key, value));
      } else if (key == "data_seed") {
        cfg.synthetic.seed = static_cast<std::uint64_t>(parse_int(key, value));
      } else if (key == "source_train_images") {
        cfg.source_train_images = value;
      } else if (key == "source_train_labels") {
        cfg.source_train_labels = value;
      } else if (key == "source_test_images") {
        cfg.source_test_images = value;
      } else if (key == "source_test_labels") {
        cfg.source_test_labels = value;
      } else if (key == "target_train_images") {
        cfg.target_train_images = value;
      } else if (key == "target_train_labels") {
        cfg.target_train_labels = value;
      } else if (key == "target_test_images") {
        cfg.target_test_images = value;
      } else if (key == "target_test_labels") {
        cfg.target_test_labels = value;
      } else {
        throw unknown();
      }
    } else if (section == "split") {
      if (key == "labeled_count") {
        cfg.labeled_count = parse_int(key, value);
      } else if (key == "seed") {
        cfg.split_seed = static_cast<std::uint64_t>(parse_int(key, value));
        cfg.split_seed_set = true;
      } else {
        throw unknown();
      }
    } else if (section == "network") {
      if (key == "arch") {
        cfg.arch = value;
      } else if (key == "hidden") {
        cfg.hidden_dims.clear();
        std::istringstream hs(value);
        std::string item;
        while (std::getline(hs, item, ',')) {
          cfg.hidden_dims.push_back(parse_int(key, trim(item)));
        }
        if (cfg.hidden_dims.empty()) {
          throw ConfigError("hidden must list at least one width");
        }
      } else {
        throw unknown();
      }
    } else if (section == "pretrain" || section == "finetune") {
      nn::AdamParams& adam =
          section == "pretrain" ? cfg.adam_pre : cfg.adam_post;
      if (key == "epochs") {
        (section == "pretrain" ? cfg.epochs_pre : cfg.epochs_post) =
            static_cast<int>(parse_int(key, value));
      } else if (key == "lr") {
        adam.lr = parse_double(key, value);
      } else if (key == "beta1") {
        adam.beta1 = parse_double(key, value);
      } else if (key == "beta2") {
        adam.beta2 = parse_double(key, value);
      } else if (key == "eps") {
        adam.eps = parse_double(key, value);
      } else {
        throw unknown();
      }
    }
  }

  if (cfg.mode == TrainingMode::kStandardTransfer) {
    if (lambda_set && cfg.lambda != 0.0) {
      out.warnings.push_back(
          "lambda = " + fmt_double(cfg.lambda) +
          " is ignored in standard_transfer mode; forcing lambda = 0");
    }
    cfg.lambda = 0.0;
  }

  cfg.validate();
  return out;
}

ParsedConfig parse_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace lautum
