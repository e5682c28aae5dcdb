#include "uta/core.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace uta {

void log_info(const std::string& msg) {
  std::fprintf(stderr, "[info] %s\n", msg.c_str());
}
void log_warn(const std::string& msg) {
  std::fprintf(stderr, "[warn] %s\n", msg.c_str());
}

Tensor normalize_depth(const Tensor& raw, int bit_depth) {
  const Shape s = raw.shape();
  if (s.c != 1)
    throw ShapeError("normalize_depth: expected single channel, got " +
                     s.str());
  const double full_range = std::pow(2.0, bit_depth) - 1.0;
  const std::int64_t per = static_cast<std::int64_t>(s.h) * s.w;
  Tensor out(s);
  for (int b = 0; b < s.b; ++b) {
    const double* p = raw.data() + raw.idx(b, 0, 0, 0);
    double mx = 0.0;
    for (std::int64_t i = 0; i < per; ++i) mx = std::max(mx, p[i]);
    if (mx == 0.0) {
      log_warn("normalize_depth: all-zero depth image, emitting floor map");
      mx = full_range;
    }
    double* q = out.data() + out.idx(b, 0, 0, 0);
    for (std::int64_t i = 0; i < per; ++i) {
      double v = p[i] / mx;
      q[i] = std::min(1.0, std::max(kEpsDepth, v));
    }
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "': expected boolean, got '" + v +
                    "'");
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + v +
                      "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + v +
                      "'");
  }
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  for (const auto& item : split_commas(v)) out.push_back(parse_int(item, key));
  if (out.empty())
    throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::vector<double> parse_double_list(const std::string& v,
                                      const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_commas(v))
    out.push_back(parse_double(item, key));
  if (out.empty())
    throw ConfigError("config key '" + key + "': empty list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

}  // namespace

void apply_kv(Config& c, const std::string& rawkey, const std::string& rawval) {
  const std::string key = trim(rawkey);
  const std::string v = trim(rawval);
  using Setter = std::function<void(Config&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"backbone", [](Config& c, const std::string& v) {
         if (v != "tiny" && v != "resnet50")
           throw ConfigError("backbone must be 'tiny' or 'resnet50', got '" +
                             v + "'");
         c.backbone = v;
       }},
      {"cprime", [](Config& c, const std::string& v) {
         c.cprime = parse_int(v, "cprime");
       }},
      {"scales", [](Config& c, const std::string& v) {
         c.scales = parse_int_list(v, "scales");
       }},
      {"gamma", [](Config& c, const std::string& v) {
         c.gamma = parse_double_list(v, "gamma");
       }},
      {"lambda", [](Config& c, const std::string& v) {
         c.lambda = parse_double_list(v, "lambda");
       }},
      {"lr_backbone", [](Config& c, const std::string& v) {
         c.lr_backbone = parse_double(v, "lr_backbone");
       }},
      {"lr_head", [](Config& c, const std::string& v) {
         c.lr_head = parse_double(v, "lr_head");
       }},
      {"momentum", [](Config& c, const std::string& v) {
         c.momentum = parse_double(v, "momentum");
       }},
      {"weight_decay", [](Config& c, const std::string& v) {
         c.weight_decay = parse_double(v, "weight_decay");
       }},
      {"batch_size", [](Config& c, const std::string& v) {
         c.batch_size = parse_int(v, "batch_size");
       }},
      {"grad_accum", [](Config& c, const std::string& v) {
         c.grad_accum = parse_int(v, "grad_accum");
       }},
      {"epochs", [](Config& c, const std::string& v) {
         c.epochs = parse_int(v, "epochs");
       }},
      {"warmup_frac", [](Config& c, const std::string& v) {
         c.warmup_frac = parse_double(v, "warmup_frac");
       }},
      {"seed", [](Config& c, const std::string& v) {
         c.seed = static_cast<std::uint64_t>(std::stoull(v));
       }},
      {"data_root", [](Config& c, const std::string& v) { c.data_root = v; }},
      {"eval_roots", [](Config& c, const std::string& v) { c.eval_roots = v; }},
      {"depth_source", [](Config& c, const std::string& v) {
         if (v != "captured" && v != "estimated")
           throw ConfigError("depth_source must be 'captured' or 'estimated'");
         c.depth_source = v;
       }},
      {"out_dir", [](Config& c, const std::string& v) { c.out_dir = v; }},
      {"backbone_weights", [](Config& c, const std::string& v) {
         c.backbone_weights = v;
       }},
      {"variant", [](Config& c, const std::string& v) { c.variant = v; }},
      {"augment", [](Config& c, const std::string& v) {
         c.augment = parse_bool(v, "augment");
       }},
      {"crop_min_area", [](Config& c, const std::string& v) {
         c.crop_min_area = parse_double(v, "crop_min_area");
       }},
      {"bce_single_term", [](Config& c, const std::string& v) {
         c.bce_single_term = parse_bool(v, "bce_single_term");
       }},
      {"gms_prob_fusion", [](Config& c, const std::string& v) {
         c.gms_prob_fusion = parse_bool(v, "gms_prob_fusion");
       }},
      {"f_mean_adaptive", [](Config& c, const std::string& v) {
         c.f_mean_adaptive = parse_bool(v, "f_mean_adaptive");
       }},
      {"edge_dilate", [](Config& c, const std::string& v) {
         c.edge_dilate = parse_int(v, "edge_dilate");
       }},
      {"gms_kernel", [](Config& c, const std::string& v) {
         c.gms_kernel = parse_int(v, "gms_kernel");
       }},
      {"dec_window", [](Config& c, const std::string& v) {
         c.dec_window = parse_int(v, "dec_window");
       }},
      {"dump_error_maps", [](Config& c, const std::string& v) {
         c.dump_error_maps = parse_bool(v, "dump_error_maps");
       }},
      {"keep_checkpoints", [](Config& c, const std::string& v) {
         c.keep_checkpoints = parse_bool(v, "keep_checkpoints");
       }},
      {"use_dac", [](Config& c, const std::string& v) {
         c.use_dac = parse_bool(v, "use_dac");
       }},
      {"use_spm", [](Config& c, const std::string& v) {
         c.use_spm = parse_bool(v, "use_spm");
       }},
      {"use_caf", [](Config& c, const std::string& v) {
         c.use_caf = parse_bool(v, "use_caf");
       }},
      {"use_gms", [](Config& c, const std::string& v) {
         c.use_gms = parse_bool(v, "use_gms");
       }},
      {"use_mls", [](Config& c, const std::string& v) {
         c.use_mls = parse_bool(v, "use_mls");
       }},
  };
  auto it = setters.find(key);
  if (it == setters.end())
    throw ConfigError("unknown config key '" + key + "'");
  it->second(c, v);
}

namespace {

Config parse_config_lines(std::istream& in, const std::string& origin) {
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    apply_kv(c, line.substr(0, eq), line.substr(eq + 1));
  }
  return c;
}

}  // namespace

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  return parse_config_lines(in, path);
}

Config config_from_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config_lines(in, "<config>");
}

void validate(const Config& c) {
  if (c.cprime < 1) throw ConfigError("cprime must be >= 1");
  if (c.scales.empty()) throw ConfigError("scale set must be non-empty");
  for (std::size_t i = 1; i < c.scales.size(); ++i)
    if (c.scales[i] <= c.scales[i - 1])
      throw ConfigError("scales must be strictly ascending");
  for (int s : c.scales)
    if (s < 1) throw ConfigError("scales must be positive");
  if (c.gamma.size() != c.scales.size())
    throw ConfigError("gamma must have one weight per scale (" +
                      std::to_string(c.scales.size()) + " scales, " +
                      std::to_string(c.gamma.size()) + " gammas)");
  if (c.lambda.size() != 5)
    throw ConfigError("lambda must list 5 stage weights, got " +
                      std::to_string(c.lambda.size()));
  if (c.lr_backbone <= 0 || c.lr_head <= 0)
    throw ConfigError("learning rates must be > 0");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (c.grad_accum < 1) throw ConfigError("grad_accum must be >= 1");
  if (c.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (c.warmup_frac < 0 || c.warmup_frac >= 1)
    throw ConfigError("warmup_frac must be in [0,1)");
  if (c.crop_min_area <= 0 || c.crop_min_area > 1)
    throw ConfigError("crop_min_area must be in (0,1]");
  if (c.edge_dilate < 1 || c.edge_dilate % 2 == 0)
    throw ConfigError("edge_dilate must be odd and >= 1");
  if (c.gms_kernel < 1 || c.gms_kernel % 2 == 0)
    throw ConfigError("gms_kernel must be odd and >= 1");
  if (c.dec_window < 1 || c.dec_window % 2 == 0)
    throw ConfigError("dec_window must be odd and >= 1");
  if (c.use_spm && !c.use_dac)
    throw ConfigError(
        "use_spm needs use_dac: cross-modal fusion consumes depth decoder "
        "features");
  if (c.backbone != "tiny" && c.backbone != "resnet50")
    throw ConfigError("unknown backbone: " + c.backbone);
  if (c.depth_source != "captured" && c.depth_source != "estimated")
    throw ConfigError("unknown depth_source: " + c.depth_source);
  if (c.variant != "standard" && c.variant != "dual" &&
      c.variant != "depth-only")
    throw ConfigError("unknown variant: " + c.variant);
  const int div = c.backbone == "resnet50" ? 32 : 16;
  for (int s : c.scales)
    if (s % div != 0)
      throw ConfigError("scale " + std::to_string(s) +
                        " not divisible by backbone stride " +
                        std::to_string(div));
}

std::string config_to_string(const Config& c) {
  std::ostringstream os;
  os.precision(17);  // doubles survive the round trip exactly
  os << "backbone = " << c.backbone << "\n";
  os << "cprime = " << c.cprime << "\n";
  os << "scales = " << join(c.scales) << "\n";
  os << "gamma = " << join(c.gamma) << "\n";
  os << "lambda = " << join(c.lambda) << "\n";
  os << "lr_backbone = " << c.lr_backbone << "\n";
  os << "lr_head = " << c.lr_head << "\n";
  os << "momentum = " << c.momentum << "\n";
  os << "weight_decay = " << c.weight_decay << "\n";
  os << "batch_size = " << c.batch_size << "\n";
  os << "grad_accum = " << c.grad_accum << "\n";
  os << "epochs = " << c.epochs << "\n";
  os << "warmup_frac = " << c.warmup_frac << "\n";
  os << "seed = " << c.seed << "\n";
  os << "data_root = " << c.data_root << "\n";
  os << "eval_roots = " << c.eval_roots << "\n";
  os << "depth_source = " << c.depth_source << "\n";
  os << "out_dir = " << c.out_dir << "\n";
  os << "backbone_weights = " << c.backbone_weights << "\n";
  os << "variant = " << c.variant << "\n";
  os << "augment = " << (c.augment ? "true" : "false") << "\n";
  os << "crop_min_area = " << c.crop_min_area << "\n";
  os << "bce_single_term = " << (c.bce_single_term ? "true" : "false") << "\n";
  os << "gms_prob_fusion = " << (c.gms_prob_fusion ? "true" : "false") << "\n";
  os << "f_mean_adaptive = " << (c.f_mean_adaptive ? "true" : "false") << "\n";
  os << "edge_dilate = " << c.edge_dilate << "\n";
  os << "gms_kernel = " << c.gms_kernel << "\n";
  os << "dec_window = " << c.dec_window << "\n";
  os << "dump_error_maps = " << (c.dump_error_maps ? "true" : "false") << "\n";
  os << "keep_checkpoints = " << (c.keep_checkpoints ? "true" : "false")
     << "\n";
  os << "use_dac = " << (c.use_dac ? "true" : "false") << "\n";
  os << "use_spm = " << (c.use_spm ? "true" : "false") << "\n";
  os << "use_caf = " << (c.use_caf ? "true" : "false") << "\n";
  os << "use_gms = " << (c.use_gms ? "true" : "false") << "\n";
  os << "use_mls = " << (c.use_mls ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace uta
