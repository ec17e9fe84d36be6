#include "canet/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "canet/errors.hpp"

namespace canet {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  return static_cast<int>(to_long(key, v));
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <typename T>
std::string join(const T& values, const std::function<std::string(
                                      typename T::value_type)>& fmt) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    out += fmt(v);
  }
  return out;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& name, const std::string&)>
      set;
};

template <std::size_t N>
void set_int_array(std::array<int, N>& dst, const std::string& name,
                   const std::string& v) {
  const auto items = split_list(v);
  if (items.size() != N) {
    throw ConfigError(name + ": expected " + std::to_string(N) + " values");
  }
  for (std::size_t i = 0; i < N; ++i) dst[i] = to_int(name, items[i]);
}

template <std::size_t N>
std::string get_int_array(const std::array<int, N>& a) {
  std::string out;
  for (std::size_t i = 0; i < N; ++i) {
    if (i) out += ",";
    out += std::to_string(a[i]);
  }
  return out;
}

#define CANET_INT(sec, key, expr)                                             \
  Field{sec, key, [](const RunConfig& c) { return std::to_string(c.expr); },  \
        [](RunConfig& c, const std::string& n, const std::string& v) {        \
          c.expr = to_int(n, v);                                              \
        }}
#define CANET_LONG(sec, key, expr)                                            \
  Field{sec, key, [](const RunConfig& c) { return std::to_string(c.expr); },  \
        [](RunConfig& c, const std::string& n, const std::string& v) {        \
          c.expr = to_long(n, v);                                             \
        }}
#define CANET_DOUBLE(sec, key, expr)                                          \
  Field{sec, key, [](const RunConfig& c) { return fmt_double(c.expr); },      \
        [](RunConfig& c, const std::string& n, const std::string& v) {        \
          c.expr = to_double(n, v);                                           \
        }}
#define CANET_BOOL(sec, key, expr)                                            \
  Field{sec, key, [](const RunConfig& c) { return fmt_bool(c.expr); },        \
        [](RunConfig& c, const std::string& n, const std::string& v) {        \
          c.expr = to_bool(n, v);                                             \
        }}
#define CANET_STRING(sec, key, expr)                                          \
  Field{sec, key, [](const RunConfig& c) { return c.expr; },                  \
        [](RunConfig& c, const std::string&, const std::string& v) {          \
          c.expr = v;                                                         \
        }}
#define CANET_INT_ARRAY(sec, key, expr)                                       \
  Field{sec, key, [](const RunConfig& c) { return get_int_array(c.expr); },   \
        [](RunConfig& c, const std::string& n, const std::string& v) {        \
          set_int_array(c.expr, n, v);                                        \
        }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CANET_INT_ARRAY("backbone", "stage_blocks", model.backbone.stage_blocks),
      CANET_INT("backbone", "stem_channels", model.backbone.stem_channels),
      CANET_INT_ARRAY("backbone", "stage_channels",
                      model.backbone.stage_channels),
      CANET_INT_ARRAY("backbone", "dilations", model.backbone.dilations),
      CANET_BOOL("backbone", "bottleneck", model.backbone.bottleneck),

      Field{"cam", "scales",
            [](const RunConfig& c) {
              return join<std::vector<int>>(
                  c.model.cam.scales, [](int v) { return std::to_string(v); });
            },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              c.model.cam.scales.clear();
              for (const auto& item : split_list(v)) {
                c.model.cam.scales.push_back(to_int(n, item));
              }
            }},
      CANET_INT("cam", "width", model.cam.width),
      CANET_INT("cam", "fsm_channels", model.cam.fsm_channels),
      Field{"cam", "topology",
            [](const RunConfig& c) { return to_string(c.model.cam.topology); },
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.model.cam.topology = parse_topology(v);
            }},
      CANET_BOOL("cam", "use_global_flow", model.cam.use_global_flow),
      CANET_BOOL("cam", "use_fsm", model.cam.use_fsm),

      CANET_INT("decoder", "low_level_channels_out",
                model.decoder.low_level_channels_out),
      CANET_INT("decoder", "fuse_channels", model.decoder.fuse_channels),
      CANET_INT("decoder", "num_classes", model.decoder.num_classes),
      CANET_BOOL("decoder", "use_decoder", model.use_decoder),
      CANET_BOOL("decoder", "use_aux", model.use_aux),

      CANET_DOUBLE("train", "base_lr", train.base_lr),
      CANET_DOUBLE("train", "power", train.power),
      CANET_DOUBLE("train", "momentum", train.momentum),
      CANET_DOUBLE("train", "weight_decay", train.weight_decay),
      CANET_LONG("train", "total_iters", train.total_iters),
      CANET_INT("train", "batch_size", train.batch_size),
      CANET_DOUBLE("train", "lambda_aux", train.lambda_aux),
      CANET_INT("train", "crop", train.crop),
      Field{"train", "seed",
            [](const RunConfig& c) { return std::to_string(c.train.seed); },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              c.train.seed = static_cast<std::uint64_t>(to_long(n, v));
            }},
      Field{"train", "eval_scales",
            [](const RunConfig& c) {
              return join<std::vector<double>>(c.train.eval_scales, fmt_double);
            },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              c.train.eval_scales.clear();
              for (const auto& item : split_list(v)) {
                c.train.eval_scales.push_back(to_double(n, item));
              }
            }},
      CANET_BOOL("train", "eval_flip", train.eval_flip),
      CANET_BOOL("train", "augment", train.augment),
      CANET_DOUBLE("train", "flip_prob", train.flip_prob),
      CANET_DOUBLE("train", "scale_min", train.scale_min),
      CANET_DOUBLE("train", "scale_max", train.scale_max),
      CANET_DOUBLE("train", "blur_sigma_max", train.blur_sigma_max),
      CANET_INT("train", "log_every", train.log_every),
      CANET_INT("train", "eval_every", train.eval_every),

      CANET_INT("scene", "num_classes", scene.num_classes),
      CANET_INT("scene", "height", scene.height),
      CANET_INT("scene", "width", scene.width),
      CANET_DOUBLE("scene", "small_min", scene.small.min_radius),
      CANET_DOUBLE("scene", "small_max", scene.small.max_radius),
      CANET_DOUBLE("scene", "medium_min", scene.medium.min_radius),
      CANET_DOUBLE("scene", "medium_max", scene.medium.max_radius),
      CANET_DOUBLE("scene", "large_min", scene.large.min_radius),
      CANET_DOUBLE("scene", "large_max", scene.large.max_radius),
      CANET_INT("scene", "objects_per_image", scene.objects_per_image),
      CANET_DOUBLE("scene", "noise", scene.noise),
      Field{"scene", "seed",
            [](const RunConfig& c) { return std::to_string(c.scene.seed); },
            [](RunConfig& c, const std::string& n, const std::string& v) {
              c.scene.seed = static_cast<std::uint64_t>(to_long(n, v));
            }},

      CANET_STRING("paths", "train_data", train_data),
      CANET_STRING("paths", "eval_data", eval_data),
      CANET_STRING("paths", "output_dir", output_dir),
  };
  return table;
}

#undef CANET_INT
#undef CANET_LONG
#undef CANET_DOUBLE
#undef CANET_BOOL
#undef CANET_STRING
#undef CANET_INT_ARRAY

}  // namespace

void TrainConfig::validate() const {
  if (!(power > 0.0)) throw ConfigError("train.power must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("train.momentum must be in [0,1)");
  }
  if (total_iters < 0) throw ConfigError("train.total_iters must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (base_lr < 0.0) throw ConfigError("train.base_lr must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (crop < 1) throw ConfigError("train.crop must be positive");
  if (eval_scales.empty()) throw ConfigError("train.eval_scales must be non-empty");
  for (double s : eval_scales) {
    if (!(s > 0.0)) throw ConfigError("train.eval_scales entries must be > 0");
  }
  if (!(scale_min > 0.0 && scale_max >= scale_min)) {
    throw ConfigError("train.scale_min/scale_max must satisfy 0 < min <= max");
  }
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
}

void RunConfig::validate() const {
  model.backbone.validate();
  model.cam.validate();
  model.decoder.validate();
  train.validate();
  scene.validate();
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": malformed section header '" + line + "'");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const Field& f : fields()) known = known || f.section == section;
      if (!known) throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string name = section + "." + key;
    const Field* field = nullptr;
    for (const Field& f : fields()) {
      if (f.section == section && f.key == key) field = &f;
    }
    if (field == nullptr) throw ConfigError("unknown key '" + name + "'");
    if (!seen.insert(name).second) {
      throw ConfigError("duplicate key '" + name + "'");
    }
    field->set(cfg, name, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

}  // namespace canet
