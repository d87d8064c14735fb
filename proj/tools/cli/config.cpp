// Copyright 2026 The cstgl Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cstgl/errors.hpp"
#include "cstgl/text.hpp"

namespace cstgl::cli {

namespace {

std::size_t parse_size(const std::string& key, const std::string& v) {
  const auto d = text::parse_double(v);
  if (!d || *d < 0 || *d != static_cast<double>(static_cast<std::size_t>(*d))) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(*d);
}

double parse_real(const std::string& key, const std::string& v) {
  const auto d = text::parse_double(v);
  if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  for (auto& item : text::split(v, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) { return text::format_double(v); }

template <typename T>
std::string join(const std::vector<T>& values, const std::function<std::string(const T&)>& f) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + f(values[i]);
  return out;
}

}  // namespace

RunConfig::RunConfig() : synthetic(benchmark_spec()) {
  register_fields();
}

void RunConfig::register_fields() {
  auto str = [&](std::string key, std::string* target) {
    fields_.push_back({std::move(key), [target](const std::string& v) { *target = v; },
                       [target] { return *target; }});
  };
  auto size = [&](std::string key, std::size_t* target) {
    fields_.push_back({key, [key, target](const std::string& v) { *target = parse_size(key, v); },
                       [target] { return std::to_string(*target); }});
  };
  auto real = [&](std::string key, double* target) {
    fields_.push_back({key, [key, target](const std::string& v) { *target = parse_real(key, v); },
                       [target] { return fmt(*target); }});
  };
  auto boolean = [&](std::string key, bool* target) {
    fields_.push_back({key, [key, target](const std::string& v) { *target = parse_bool(key, v); },
                       [target] { return *target ? std::string("true") : std::string("false"); }});
  };

  str("data.dir", &data.dir);
  str("data.train", &data.train);
  str("data.test", &data.test);
  str("data.labels", &data.labels);
  str("data.label_column", &data.label_column);
  str("data.metadata", &data.metadata);
  real("data.sample_interval_seconds", &data.sample_interval_seconds);
  size("data.skip_initial", &data.skip_initial);
  fields_.push_back({"data.skip_scope",
                     [this](const std::string& v) {
                       if (v != "train_only" && v != "train_and_test") {
                         throw ConfigError("data.skip_scope: expected train_only or "
                                           "train_and_test, got '" + v + "'");
                       }
                       data.skip_scope = v;
                     },
                     [this] { return data.skip_scope; }});
  size("data.downsample_stride", &data.downsample_stride);
  real("data.validation_ratio", &data.validation_ratio);

  size("synthetic.channels", &synthetic.channels);
  size("synthetic.train_length", &synthetic.train_length);
  size("synthetic.test_length", &synthetic.test_length);
  fields_.push_back({"synthetic.edges",
                     [this](const std::string& v) {
                       try {
                         synthetic.edges = parse_edges(v);
                       } catch (const Error& e) {
                         throw ConfigError(std::string("synthetic.edges: ") + e.what());
                       }
                     },
                     [this] { return format_edges(synthetic.edges); }});
  fields_.push_back({"synthetic.anomaly_types",
                     [this](const std::string& v) {
                       std::vector<AnomalyType> types;
                       try {
                         for (const auto& item : split_list(v)) types.push_back(parse_anomaly_type(item));
                       } catch (const Error& e) {
                         throw ConfigError(std::string("synthetic.anomaly_types: ") + e.what());
                       }
                       synthetic.anomaly_types = std::move(types);
                     },
                     [this] {
                       return join<AnomalyType>(synthetic.anomaly_types,
                                                [](const AnomalyType& t) { return to_string(t); });
                     }});
  real("synthetic.anomaly_rate", &synthetic.anomaly_rate);
  size("synthetic.min_segment", &synthetic.min_segment);
  size("synthetic.max_segment", &synthetic.max_segment);
  size("synthetic.min_gap", &synthetic.min_gap);
  real("synthetic.noise", &synthetic.noise);
  real("synthetic.spike_magnitude", &synthetic.spike_magnitude);
  real("synthetic.sample_interval_seconds", &synthetic.sample_interval_seconds);
  fields_.push_back({"synthetic.seed",
                     [this](const std::string& v) { synthetic.seed = parse_size("synthetic.seed", v); },
                     [this] { return std::to_string(synthetic.seed); }});

  size("model.window", &model.window);
  size("model.layers", &model.layers);
  size("model.residual_channels", &model.residual_channels);
  size("model.skip_channels", &model.skip_channels);
  size("model.end_channels", &model.end_channels);
  size("model.node_dim", &model.node_dim);
  real("model.saturation", &model.saturation);
  size("model.top_k", &model.top_k);
  size("model.propagation_depth", &model.propagation_depth);
  real("model.retain_ratio", &model.retain_ratio);
  size("model.dilation_base", &model.dilation_base);
  fields_.push_back({"model.kernel_widths",
                     [this](const std::string& v) {
                       std::vector<std::size_t> widths;
                       for (const auto& item : split_list(v)) {
                         widths.push_back(parse_size("model.kernel_widths", item));
                       }
                       if (widths.empty()) throw ConfigError("model.kernel_widths: empty list");
                       model.kernel_widths = std::move(widths);
                     },
                     [this] {
                       return join<std::size_t>(model.kernel_widths, [](const std::size_t& w) {
                         return std::to_string(w);
                       });
                     }});
  boolean("model.share_direction_weights", &model.share_direction_weights);
  fields_.push_back({"model.ablation",
                     [this](const std::string& v) { model.ablation = parse_ablation(v); },
                     [this] { return to_string(model.ablation); }});

  size("train.epochs", &train.epochs);
  size("train.batch_size", &train.batch_size);
  real("train.learning_rate", &train.adam.learning_rate);
  real("train.beta1", &train.adam.beta1);
  real("train.beta2", &train.adam.beta2);
  real("train.adam_epsilon", &train.adam.epsilon);
  real("train.clip_grad_norm", &train.clip_grad_norm);
  boolean("train.shuffle", &train.shuffle);

  size("scorer.window_length", &scorer_window);
  real("scorer.epsilon", &scorer_epsilon);
  real("scorer.smape_target", &components.smape_target);
  boolean("scorer.full_rank_fallback", &components.full_rank_fallback);
  size("scorer.components", &fixed_components);

  fields_.push_back({"evaluate.delays_minutes",
                     [this](const std::string& v) {
                       std::vector<double> delays;
                       for (const auto& item : split_list(v)) {
                         const double d = parse_real("evaluate.delays_minutes", item);
                         if (d < 0) throw ConfigError("evaluate.delays_minutes: negative delay");
                         delays.push_back(d);
                       }
                       evaluate.delays_minutes = std::move(delays);
                     },
                     [this] {
                       return join<double>(evaluate.delays_minutes,
                                           [](const double& d) { return fmt(d); });
                     }});

  size("diagnose.top_m", &diagnose.top_m);
  size("diagnose.rc_k", &diagnose.rc_k);
  fields_.push_back({"diagnose.ranking_point",
                     [this](const std::string& v) {
                       if (v != "peak" && v != "onset") {
                         throw ConfigError("diagnose.ranking_point: expected peak or onset, got '" +
                                           v + "'");
                       }
                       diagnose.ranking_point = v;
                     },
                     [this] { return diagnose.ranking_point; }});
  real("diagnose.onset_minutes", &diagnose.onset_minutes);

  fields_.push_back({"run.seed",
                     [this](const std::string& v) { seed = parse_size("run.seed", v); },
                     [this] { return std::to_string(seed); }});
  str("run.output_dir", &output_dir);
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (auto& f : fields_) {
    if (f.key == key) {
      try {
        f.set(value);
      } catch (const ConfigError&) {
        throw;
      } catch (const Error& e) {
        throw ConfigError(key + ": " + e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
  for (const auto& f : fields_)
    if (f.key == key) return f.get();
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& f : fields_) out.push_back(f.key);
  return out;
}

void RunConfig::merge_text(const std::string& content, const std::string& origin) {
  std::istringstream in(content);
  std::string line, section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string t = text::trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError(origin + ":" + std::to_string(n) + ": malformed section header");
      }
      section = text::trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": key outside a [section]");
    }
    const std::string key = section + "." + text::trim(t.substr(0, eq));
    try {
      set(key, text::trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path.string());
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields_) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
      section = s;
    }
    out << f.key.substr(dot + 1) << " = " << f.get() << '\n';
  }
  return out.str();
}

PipelineConfig RunConfig::pipeline() const {
  PipelineConfig p;
  p.model = model;
  p.model.seed = seed;
  p.train = train;
  p.train.seed = seed;
  p.validation_ratio = data.validation_ratio;
  if (scorer_window > 0) p.normalizer_window = scorer_window;
  p.epsilon = scorer_epsilon;
  p.components = components;
  if (fixed_components > 0) p.components.fixed = fixed_components;
  return p;
}

std::filesystem::path RunConfig::train_path() const {
  if (!data.train.empty()) return data.train;
  if (!data.dir.empty()) return std::filesystem::path(data.dir) / "train.csv";
  throw ConfigError("no training data: set data.train or data.dir");
}

std::filesystem::path RunConfig::test_path() const {
  if (!data.test.empty()) return data.test;
  if (!data.dir.empty()) return std::filesystem::path(data.dir) / "test.csv";
  throw ConfigError("no test data: set data.test or data.dir");
}

std::filesystem::path RunConfig::metadata_path() const {
  if (!data.metadata.empty()) return data.metadata;
  if (!data.dir.empty()) {
    const auto p = std::filesystem::path(data.dir) / "metadata.txt";
    if (std::filesystem::exists(p)) return p;
  }
  return {};
}

LoadOptions RunConfig::load_options() const {
  LoadOptions o;
  if (!data.labels.empty()) o.label_path = data.labels;
  o.label_column = data.label_column;
  o.sample_interval_seconds = data.sample_interval_seconds;
  o.skip_initial = data.skip_initial;
  o.skip_scope = data.skip_scope == "train_only" ? SkipScope::TrainOnly : SkipScope::TrainAndTest;
  o.downsample_stride = data.downsample_stride;
  const auto meta = metadata_path();
  if (!meta.empty()) o.metadata_path = meta;
  return o;
}

}  // namespace cstgl::cli
