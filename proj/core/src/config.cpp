#include "ssa/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ssa {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

const char* source_name(Config::Source s) {
  switch (s) {
    case Config::Source::kDefault: return "default";
    case Config::Source::kFile: return "file";
    case Config::Source::kOverride: return "cli";
  }
  return "?";
}

}  // namespace

Config Config::defaults() {
  Config c;
  auto d = [&](const char* k, const char* v) {
    c.entries_[k] = {v, Source::kDefault};
  };
  d("seed", "1");

  d("data.side", "16");
  d("data.classes_source", "20");
  d("data.classes_target", "10");
  d("data.samples_per_class", "30");
  d("data.class_contrast", "0.18");
  d("data.template_symmetry", "0.9");
  d("data.noise_sigma", "0.10");
  d("data.shift_contrast", "0.95");
  d("data.shift_brightness", "0.02");
  d("data.shift_blur_width", "1");
  d("data.mirror_in_baseline", "false");

  d("model.embedding_dim", "128");
  d("model.hidden", "256,256");
  d("model.classifier", "softmax");  // softmax | angular-margin
  d("model.scale", "16");
  d("model.margin", "0.3");

  d("loss.gamma", "2");
  d("loss.rho", "0.6");

  d("train.epochs", "50");
  d("train.lr", "0.1");
  d("train.adapt_lr", "0.0001");
  d("train.decay_divisor", "10");
  d("train.decay_interval", "12");
  d("train.momentum", "0.9");
  d("train.batch_source", "32");
  d("train.batch_target", "32");

  d("eval.fpr_targets", "1e-4,1e-3,1e-2,1e-1");
  d("eval.fpir_targets", "1e-2,1e-1");
  d("eval.rank_ks", "1,5,10");
  d("eval.known_fraction", "0.5");

  d("sweep.rhos", "0.0,0.5,0.6,0.7,0.8,0.9");
  return c;
}

void Config::set(const std::string& key, const std::string& value,
                 Source source) {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw ConfigError("unknown config key '" + key + "'");
  it->second = {value, source};
}

bool Config::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)), Source::kFile);
  }
}

void Config::apply_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key=value, got '" +
                      assignment + "'");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)),
      Source::kOverride);
}

const std::string& Config::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw ConfigError("unknown config key '" + key + "'");
  return it->second.value;
}

double Config::get_double(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not a number: '" + v + "'");
  }
}

std::size_t Config::get_size(const std::string& key) const {
  const double d = get_double(key);
  if (d < 0 || d != static_cast<double>(static_cast<std::size_t>(d)))
    throw ConfigError("config key '" + key + "' must be a non-negative integer");
  return static_cast<std::size_t>(d);
}

std::uint64_t Config::get_u64(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const unsigned long long u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' is not an integer: '" + v + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad list element '" +
                        item + "'");
    }
  }
  return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  for (double d : get_double_list(key)) {
    if (d < 0 || d != std::floor(d))
      throw ConfigError("config key '" + key + "': list element not an integer");
    out.push_back(static_cast<std::size_t>(d));
  }
  return out;
}

void Config::write_snapshot(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write config snapshot: " + path);
  os << "# resolved configuration (key = value), source in trailing comment\n";
  for (const auto& [key, entry] : entries_)
    os << key << " = " << entry.value << "  # " << source_name(entry.source)
       << "\n";
}

}  // namespace ssa
