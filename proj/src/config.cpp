#include "dpool/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <type_traits>

#include "dpool/error.hpp"

namespace pt = boost::property_tree;

namespace dpool {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::ddi: return "ddi";
    case Channel::ddni: return "ddni";
    case Channel::ddmni: return "ddmni";
  }
  return "?";
}

std::vector<Channel> parse_channels(std::string_view text) {
  std::vector<Channel> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    std::string item(text.substr(pos, comma - pos));
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (item == "ddi") {
      out.push_back(Channel::ddi);
    } else if (item == "ddni") {
      out.push_back(Channel::ddni);
    } else if (item == "ddmni") {
      out.push_back(Channel::ddmni);
    } else if (!item.empty()) {
      throw Error(ErrorKind::InvalidArgument, "unknown channel '" + item + "'");
    }
    pos = comma + 1;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw Error(ErrorKind::InvalidArgument, "at least one channel is required");
  return out;
}

std::string format_channels(const std::vector<Channel>& channels) {
  std::string out;
  for (Channel c : channels) {
    if (!out.empty()) out += ',';
    out += channel_name(c);
  }
  return out;
}

std::vector<std::string> image_keys(const std::vector<Channel>& channels) {
  std::vector<std::string> keys;
  for (Channel c : channels) {
    keys.push_back(std::string(channel_name(c)) + "_fwd");
    keys.push_back(std::string(channel_name(c)) + "_bwd");
  }
  return keys;
}

void PipelineConfig::validate() const {
  if (!(depth_scale > 0.0)) throw Error(ErrorKind::InvalidArgument, "depth_scale must be > 0");
  qom.validate();
  bg.validate();
  gmm.validate();
  pool.validate();
  hierarchy.validate();
  if (channels.empty()) throw Error(ErrorKind::InvalidArgument, "at least one channel is required");
  if (jobs < 1) throw Error(ErrorKind::InvalidArgument, "jobs must be >= 1");
  if (baseline_size < 2) throw Error(ErrorKind::InvalidArgument, "baseline_size must be >= 2");
}

GmmParams PipelineConfig::gmm_params() const {
  GmmParams p = gmm;
  p.seed = seed;
  return p;
}

namespace {

struct Key {
  std::string section;
  std::string name;
  std::string comment;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&)> set;
};

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  if (!(in >> value) || !(in >> std::ws).eof()) {
    throw Error(ErrorKind::InvalidArgument, "cannot parse value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw Error(ErrorKind::InvalidArgument, "cannot parse boolean '" + text + "' for " + key);
}

template <typename T>
std::string show(const T& v) {
  if constexpr (std::is_floating_point_v<T>) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  } else {
    std::ostringstream out;
    out << v;
    return out.str();
  }
}

#define DPOOL_KEY(section, name, comment, field, type)                                                  \
  Key {                                                                                                 \
    section, name, comment, [](const PipelineConfig& c) { return show(c.field); },                      \
        [](PipelineConfig& c, const std::string& v) { c.field = parse_value<type>(section "." name, v); } \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      DPOOL_KEY("io", "depth_scale", "multiplier applied to every loaded depth sample", depth_scale, double),
      DPOOL_KEY("qom", "threshold", "depth difference that marks a pixel as moved", qom.threshold_qom, int),
      DPOOL_KEY("qom", "tail_fraction", "share of the average action length sampled at each segment end",
                qom.tail_fraction, double),
      DPOOL_KEY("qom", "window_divisor", "sliding window = floor(L / window_divisor)", qom.window_divisor, int),
      DPOOL_KEY("background", "hist_bins", "depth histogram bins", bg.hist_bins, int),
      DPOOL_KEY("background", "tolerance", "subtracted from the last histogram peak", bg.tolerance, double),
      DPOOL_KEY("background", "min_peak_mass", "minimum pixel share of a histogram peak", bg.min_peak_mass, double),
      DPOOL_KEY("gmm", "components", "Gaussians per pixel", gmm.components, int),
      DPOOL_KEY("gmm", "learning_rate", "per-frame model update rate", gmm.learning_rate, double),
      DPOOL_KEY("gmm", "mahalanobis_threshold", "squared normalised match distance", gmm.mahalanobis_threshold,
                double),
      DPOOL_KEY("gmm", "background_ratio", "weight mass treated as background", gmm.background_ratio, double),
      DPOOL_KEY("gmm", "initial_variance", "variance of a newly created component", gmm.initial_variance, double),
      DPOOL_KEY("gmm", "min_variance", "variance floor", gmm.min_variance, double),
      DPOOL_KEY("rank_pool", "lambda", "hinge-loss weight", pool.lambda, double),
      DPOOL_KEY("rank_pool", "max_iters", "solver passes over all frame pairs", pool.max_iters, int),
      DPOOL_KEY("rank_pool", "tol", "relative duality-gap target", pool.tol, double),
      Key{"rank_pool", "use_smoothing", "pool running means of the features",
          [](const PipelineConfig& c) { return std::string(c.pool.use_smoothing ? "true" : "false"); },
          [](PipelineConfig& c, const std::string& v) { c.pool.use_smoothing = parse_bool("use_smoothing", v); }},
      DPOOL_KEY("hierarchy", "layers", "rank pooling layers", hierarchy.layers, int),
      DPOOL_KEY("hierarchy", "window", "window size per layer", hierarchy.window, std::size_t),
      DPOOL_KEY("hierarchy", "stride", "stride per layer", hierarchy.stride, std::size_t),
      Key{"hierarchy", "smooth_intermediate", "smooth pooled sequences above the first layer too",
          [](const PipelineConfig& c) { return std::string(c.hierarchy.smooth_intermediate ? "true" : "false"); },
          [](PipelineConfig& c, const std::string& v) {
            c.hierarchy.smooth_intermediate = parse_bool("smooth_intermediate", v);
          }},
      Key{"pipeline", "channels", "subset of ddi,ddni,ddmni",
          [](const PipelineConfig& c) { return format_channels(c.channels); },
          [](PipelineConfig& c, const std::string& v) { c.channels = parse_channels(v); }},
      Key{"pipeline", "output_dir", "where encode writes images and manifests",
          [](const PipelineConfig& c) { return c.output_dir.string(); },
          [](PipelineConfig& c, const std::string& v) { c.output_dir = v; }},
      DPOOL_KEY("pipeline", "seed", "seed for every randomised step", seed, std::uint64_t),
      DPOOL_KEY("pipeline", "jobs", "worker threads", jobs, std::size_t),
      DPOOL_KEY("pipeline", "baseline_size", "side of the downsampled baseline images", baseline_size,
                std::size_t),
  };
  return table;
}

#undef DPOOL_KEY

}  // namespace

PipelineConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("config: ") + e.what());
  }
  PipelineConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw Error(ErrorKind::InvalidArgument, "config: key '" + section + "' outside a section");
    for (const auto& [name, value] : body) {
      const auto& table = keys();
      auto it = std::find_if(table.begin(), table.end(),
                             [&](const Key& k) { return k.section == section && k.name == name; });
      if (it == table.end()) throw Error(ErrorKind::InvalidArgument, "config: unknown key " + section + "." + name);
      it->set(config, value.data());
    }
  }
  config.validate();
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingPath, "cannot open config " + path.string());
  return parse_config(in);
}

void dump_config(const PipelineConfig& config, std::ostream& out) {
  std::string section;
  for (const auto& key : keys()) {
    if (key.section != section) {
      if (!section.empty()) out << '\n';
      section = key.section;
      out << '[' << section << "]\n";
    }
    out << "; " << key.comment << '\n' << key.name << " = " << key.get(config) << '\n';
  }
}

}  // namespace dpool
