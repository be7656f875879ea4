#include "exitrisk/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rng.hpp"

namespace exitrisk {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

constexpr double kProbTolerance = 1e-6;
constexpr double kRangeSlack = 1e-9;

[[noreturn]] void fail(const std::string& path, std::size_t line,
                       const std::string& message) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + message);
}

std::string meta_sidecar_path(const std::string& path) { return path + ".meta"; }

struct Meta {
  int num_exits = 0;
  int num_classes = 0;  // 0 = not declared
  double loss_bound = 1.0;
  std::vector<std::string> loss_names;
  bool has_loss_names = false;
};

Meta parse_meta_object(const json& m, const std::string& path,
                       std::size_t line) {
  Meta meta;
  if (!m.contains("L") || !m["L"].is_number_integer()) {
    fail(path, line, "meta must declare an integer \"L\"");
  }
  meta.num_exits = m["L"].get<int>();
  if (meta.num_exits < 2) fail(path, line, "meta field \"L\" must be >= 2");
  if (m.contains("K") && !m["K"].is_null()) {
    meta.num_classes = m["K"].get<int>();
    if (meta.num_classes < 2) fail(path, line, "meta field \"K\" must be >= 2");
  }
  if (m.contains("loss_bound") && !m["loss_bound"].is_null()) {
    meta.loss_bound = m["loss_bound"].get<double>();
    if (!(meta.loss_bound > 0.0)) {
      fail(path, line, "meta field \"loss_bound\" must be > 0");
    }
  }
  if (m.contains("loss_names") && !m["loss_names"].is_null()) {
    meta.has_loss_names = true;
    for (const auto& name : m["loss_names"]) {
      meta.loss_names.push_back(name.get<std::string>());
    }
  }
  return meta;
}

// Accepts a distribution row, renormalizing away float32 export noise.
void accept_distribution_row(std::vector<double>& row, const std::string& path,
                             std::size_t line, const std::string& id) {
  double sum = 0.0;
  for (double& v : row) {
    if (v < -kRangeSlack) {
      fail(path, line, "sample \"" + id + "\": negative probability");
    }
    if (v < 0.0) v = 0.0;
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbTolerance) {
    fail(path, line,
         "sample \"" + id + "\": probability row not normalized (sum " +
             std::to_string(sum) + ")");
  }
  for (double& v : row) v /= sum;
}

void check_confidences(const std::vector<double>& conf, int num_exits,
                       const std::string& path, std::size_t line,
                       const std::string& id) {
  if (static_cast<int>(conf.size()) != num_exits - 1) {
    fail(path, line,
         "sample \"" + id + "\": expected " + std::to_string(num_exits - 1) +
             " confidences, got " + std::to_string(conf.size()));
  }
  for (double c : conf) {
    if (!(c >= 0.0 && c <= 1.0)) {
      fail(path, line, "sample \"" + id + "\": confidence out of range [0,1]");
    }
  }
}

void check_losses(const std::map<std::string, std::vector<double>>& losses,
                  const Meta& meta, const std::string& path, std::size_t line,
                  const std::string& id) {
  for (const auto& name : meta.loss_names) {
    auto it = losses.find(name);
    if (it == losses.end()) {
      fail(path, line, "sample \"" + id + "\": missing loss \"" + name + "\"");
    }
    if (static_cast<int>(it->second.size()) != meta.num_exits) {
      fail(path, line,
           "sample \"" + id + "\": loss \"" + name + "\" must have " +
               std::to_string(meta.num_exits) + " entries");
    }
    for (double v : it->second) {
      if (v < -kRangeSlack || v > meta.loss_bound + kRangeSlack) {
        fail(path, line,
             "sample \"" + id + "\": loss \"" + name +
                 "\" outside [0, " + std::to_string(meta.loss_bound) + "]");
      }
    }
  }
  for (const auto& [name, _] : losses) {
    if (std::find(meta.loss_names.begin(), meta.loss_names.end(), name) ==
        meta.loss_names.end()) {
      fail(path, line, "sample \"" + id + "\": undeclared loss \"" + name + "\"");
    }
  }
}

TraceSet load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);

  std::string line_text;
  std::size_t line_no = 0;
  bool have_meta = false;
  Meta meta;

  std::vector<std::pair<std::size_t, json>> records;
  while (std::getline(in, line_text)) {
    ++line_no;
    if (line_text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line_text);
    } catch (const json::parse_error& e) {
      fail(path, line_no, std::string("malformed record: ") + e.what());
    }
    if (!have_meta && records.empty() && j.is_object() && j.contains("meta")) {
      meta = parse_meta_object(j["meta"], path, line_no);
      have_meta = true;
      continue;
    }
    records.emplace_back(line_no, std::move(j));
  }

  if (!have_meta) {
    const std::string sidecar = meta_sidecar_path(path);
    std::ifstream ms(sidecar);
    if (!ms) {
      throw std::runtime_error(
          path + ": no leading {\"meta\": ...} line and no sidecar meta file " +
          sidecar);
    }
    json m;
    try {
      m = json::parse(ms);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(sidecar + ": malformed meta: " + e.what());
    }
    meta = parse_meta_object(m.contains("meta") ? m["meta"] : m, sidecar, 1);
  }

  TraceSet ts;
  ts.num_exits = meta.num_exits;
  ts.num_classes = meta.num_classes;
  ts.loss_bound = meta.loss_bound;

  bool names_inferred = false;
  for (auto& [line, j] : records) {
    if (!j.is_object()) fail(path, line, "record is not a JSON object");
    ExitTrace t;
    if (!j.contains("id") || !j["id"].is_string()) {
      fail(path, line, "record has no string \"id\"");
    }
    t.id = j["id"].get<std::string>();
    if (!j.contains("conf") || !j["conf"].is_array()) {
      fail(path, line, "sample \"" + t.id + "\": missing \"conf\" array");
    }
    t.confidences = j["conf"].get<std::vector<double>>();
    check_confidences(t.confidences, ts.num_exits, path, line, t.id);

    if (j.contains("label") && !j["label"].is_null()) {
      t.label = j["label"].get<int>();
    }
    if (j.contains("dist") && !j["dist"].is_null()) {
      t.distributions = j["dist"].get<std::vector<std::vector<double>>>();
      if (static_cast<int>(t.distributions.size()) != ts.num_exits) {
        fail(path, line,
             "sample \"" + t.id + "\": expected " +
                 std::to_string(ts.num_exits) + " distribution rows");
      }
      if (ts.num_classes == 0) {
        ts.num_classes = static_cast<int>(t.distributions.front().size());
        if (ts.num_classes < 2) {
          fail(path, line, "sample \"" + t.id + "\": fewer than 2 classes");
        }
      }
      for (auto& row : t.distributions) {
        if (static_cast<int>(row.size()) != ts.num_classes) {
          fail(path, line,
               "sample \"" + t.id + "\": inconsistent class count (expected " +
                   std::to_string(ts.num_classes) + ")");
        }
        accept_distribution_row(row, path, line, t.id);
      }
    }
    if (j.contains("losses") && !j["losses"].is_null()) {
      for (const auto& [name, arr] : j["losses"].items()) {
        t.losses[name] = arr.get<std::vector<double>>();
      }
    }
    if (!meta.has_loss_names && !names_inferred && !t.losses.empty()) {
      for (const auto& [name, _] : t.losses) meta.loss_names.push_back(name);
      names_inferred = true;
    }
    check_losses(t.losses, meta, path, line, t.id);

    if (t.distributions.empty() && t.losses.empty()) {
      fail(path, line,
           "sample \"" + t.id + "\": needs distributions or losses");
    }
    if (t.label && ts.num_classes > 0 &&
        (*t.label < 0 || *t.label >= ts.num_classes)) {
      fail(path, line, "sample \"" + t.id + "\": label out of range");
    }
    if (t.label && *t.label < 0) {
      fail(path, line, "sample \"" + t.id + "\": negative label");
    }
    ts.samples.push_back(std::move(t));
  }

  ts.loss_names = meta.loss_names;
  std::set<std::string> unique(ts.loss_names.begin(), ts.loss_names.end());
  if (unique.size() != ts.loss_names.size()) {
    throw std::runtime_error(path + ": duplicate loss names in meta");
  }
  return ts;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& path,
                    std::size_t line, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(path, line, "cannot parse " + what + " value \"" + s + "\"");
  }
}

TraceSet load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);

  std::string header;
  if (!std::getline(in, header)) {
    throw std::runtime_error(path + ": empty file");
  }
  const auto cols = split_csv_line(header);

  int conf_count = 0;
  int label_col = -1;
  // loss name -> per-exit column indices
  std::map<std::string, std::vector<int>> loss_cols;
  std::vector<std::string> loss_order;
  if (cols.empty() || cols[0] != "id") {
    fail(path, 1, "first CSV column must be \"id\"");
  }
  for (std::size_t c = 1; c < cols.size(); ++c) {
    const std::string& name = cols[c];
    if (name.rfind("conf_", 0) == 0) {
      const int idx = std::stoi(name.substr(5));
      if (idx != ++conf_count) fail(path, 1, "confidence columns must be conf_1..conf_{L-1} in order");
      continue;
    }
    if (name == "label") {
      label_col = static_cast<int>(c);
      continue;
    }
    if (name.rfind("loss_", 0) == 0) {
      const auto sep = name.rfind('_');
      if (sep == 4) fail(path, 1, "malformed loss column \"" + name + "\"");
      const std::string loss_name = name.substr(5, sep - 5);
      const int idx = std::stoi(name.substr(sep + 1));
      auto [it, inserted] = loss_cols.try_emplace(loss_name);
      if (inserted) loss_order.push_back(loss_name);
      if (idx != static_cast<int>(it->second.size()) + 1) {
        fail(path, 1, "loss columns for \"" + loss_name + "\" must be 1..L in order");
      }
      it->second.push_back(static_cast<int>(c));
      continue;
    }
    fail(path, 1, "unknown CSV column \"" + name + "\"");
  }
  if (conf_count == 0) fail(path, 1, "no conf_* columns");

  Meta meta;
  meta.num_exits = conf_count + 1;
  meta.loss_names = loss_order;
  meta.has_loss_names = true;
  // Optional sidecar for fields CSV cannot carry (loss_bound, K).
  {
    std::ifstream ms(meta_sidecar_path(path));
    if (ms) {
      json m = json::parse(ms);
      const Meta side =
          parse_meta_object(m.contains("meta") ? m["meta"] : m,
                            meta_sidecar_path(path), 1);
      if (side.num_exits != meta.num_exits) {
        throw std::runtime_error(meta_sidecar_path(path) +
                                 ": meta L disagrees with CSV header");
      }
      meta.loss_bound = side.loss_bound;
      meta.num_classes = side.num_classes;
    }
  }
  for (const auto& [name, idx] : loss_cols) {
    if (static_cast<int>(idx.size()) != meta.num_exits) {
      fail(path, 1, "loss \"" + name + "\" must have exactly L columns");
    }
  }

  TraceSet ts;
  ts.num_exits = meta.num_exits;
  ts.num_classes = meta.num_classes;
  ts.loss_bound = meta.loss_bound;
  ts.loss_names = meta.loss_names;

  std::string line_text;
  std::size_t line_no = 1;
  while (std::getline(in, line_text)) {
    ++line_no;
    if (line_text.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_csv_line(line_text);
    if (fields.size() != cols.size()) {
      fail(path, line_no, "expected " + std::to_string(cols.size()) +
                              " fields, got " + std::to_string(fields.size()));
    }
    ExitTrace t;
    t.id = fields[0];
    for (int k = 1; k <= conf_count; ++k) {
      t.confidences.push_back(
          parse_double(fields[k], path, line_no, "confidence"));
    }
    check_confidences(t.confidences, ts.num_exits, path, line_no, t.id);
    if (label_col >= 0 && !fields[label_col].empty()) {
      t.label = static_cast<int>(
          parse_double(fields[label_col], path, line_no, "label"));
      if (*t.label < 0) fail(path, line_no, "sample \"" + t.id + "\": negative label");
      if (ts.num_classes > 0 && *t.label >= ts.num_classes) {
        fail(path, line_no, "sample \"" + t.id + "\": label out of range");
      }
    }
    for (const auto& [name, idx] : loss_cols) {
      auto& vec = t.losses[name];
      for (int c : idx) {
        vec.push_back(parse_double(fields[c], path, line_no, "loss"));
      }
    }
    check_losses(t.losses, meta, path, line_no, t.id);
    if (t.losses.empty()) {
      fail(path, line_no, "sample \"" + t.id + "\": needs distributions or losses");
    }
    ts.samples.push_back(std::move(t));
  }
  return ts;
}

void save_jsonl(const TraceSet& ts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  ordered_json meta;
  meta["L"] = ts.num_exits;
  if (ts.num_classes > 0) {
    meta["K"] = ts.num_classes;
  } else {
    meta["K"] = nullptr;
  }
  meta["loss_names"] = ts.loss_names;
  meta["loss_bound"] = ts.loss_bound;
  out << ordered_json{{"meta", meta}}.dump() << "\n";
  for (const auto& t : ts.samples) {
    ordered_json j;
    j["id"] = t.id;
    j["conf"] = t.confidences;
    if (t.label) {
      j["label"] = *t.label;
    } else {
      j["label"] = nullptr;
    }
    if (t.has_distributions()) {
      j["dist"] = t.distributions;
    } else {
      j["dist"] = nullptr;
    }
    if (!t.losses.empty()) {
      j["losses"] = t.losses;
    } else {
      j["losses"] = nullptr;
    }
    out << j.dump() << "\n";
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Trim to the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[32];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    if (std::stod(probe) == v) return probe;
  }
  return buf;
}

void save_csv(const TraceSet& ts, const std::string& path) {
  for (const auto& t : ts.samples) {
    if (t.has_distributions()) {
      throw std::invalid_argument(
          "csv cannot store distributions; use jsonl for this trace set");
    }
  }
  const bool any_label = std::any_of(ts.samples.begin(), ts.samples.end(),
                                     [](const ExitTrace& t) { return t.label.has_value(); });
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << "id";
  for (int l = 1; l < ts.num_exits; ++l) out << ",conf_" << l;
  if (any_label) out << ",label";
  for (const auto& name : ts.loss_names) {
    for (int l = 1; l <= ts.num_exits; ++l) out << ",loss_" << name << "_" << l;
  }
  out << "\n";
  for (const auto& t : ts.samples) {
    out << t.id;
    for (double c : t.confidences) out << "," << format_double(c);
    if (any_label) {
      out << ",";
      if (t.label) out << *t.label;
    }
    for (const auto& name : ts.loss_names) {
      for (double v : t.losses.at(name)) out << "," << format_double(v);
    }
    out << "\n";
  }
  out.close();

  ordered_json meta;
  meta["L"] = ts.num_exits;
  if (ts.num_classes > 0) {
    meta["K"] = ts.num_classes;
  } else {
    meta["K"] = nullptr;
  }
  meta["loss_names"] = ts.loss_names;
  meta["loss_bound"] = ts.loss_bound;
  std::ofstream ms(meta_sidecar_path(path));
  if (!ms) throw std::runtime_error("cannot write meta file: " + meta_sidecar_path(path));
  ms << ordered_json{{"meta", meta}}.dump() << "\n";
}

}  // namespace

std::string to_string(RiskKind kind) {
  return kind == RiskKind::gap ? "gap" : "consistency";
}

std::string to_string(RiskTarget target) {
  return target == RiskTarget::prediction ? "prediction" : "distribution";
}

RiskKind risk_kind_from_string(const std::string& s) {
  if (s == "gap") return RiskKind::gap;
  if (s == "consistency") return RiskKind::consistency;
  throw std::invalid_argument("unknown risk kind: " + s);
}

RiskTarget risk_target_from_string(const std::string& s) {
  if (s == "prediction") return RiskTarget::prediction;
  if (s == "distribution") return RiskTarget::distribution;
  throw std::invalid_argument("unknown risk target: " + s);
}

ThresholdGrid::ThresholdGrid(double step) : step_(step) {
  if (!(step > 0.0 && step < 1.0)) {
    throw std::invalid_argument("grid step must lie in (0, 1)");
  }
  for (std::size_t k = 0;; ++k) {
    const double v = 1.0 - static_cast<double>(k) * step;
    if (v <= 1e-12) break;  // strictly positive values only
    values_.push_back(v);
  }
}

TraceFormat trace_format_from_path(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  return ext == ".csv" ? TraceFormat::csv : TraceFormat::jsonl;
}

TraceSet load_traces(const std::string& path, TraceFormat format) {
  return format == TraceFormat::jsonl ? load_jsonl(path) : load_csv(path);
}

TraceSet load_traces(const std::string& path) {
  return load_traces(path, trace_format_from_path(path));
}

void save_traces(const TraceSet& ts, const std::string& path,
                 TraceFormat format) {
  if (format == TraceFormat::jsonl) {
    save_jsonl(ts, path);
  } else {
    save_csv(ts, path);
  }
}

std::pair<TraceSet, TraceSet> split(const TraceSet& ts, double cal_fraction,
                                    std::uint64_t seed) {
  const std::size_t n = ts.size();
  if (n < 2) throw std::invalid_argument("split needs at least 2 samples");
  if (!(cal_fraction > 0.0 && cal_fraction < 1.0)) {
    throw std::invalid_argument("cal_fraction must lie in (0, 1)");
  }
  const auto n_cal = static_cast<std::size_t>(
      std::llround(cal_fraction * static_cast<double>(n)));
  if (n_cal == 0 || n_cal == n) {
    throw std::invalid_argument("cal_fraction yields an empty part");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  detail::Rng rng(detail::mix_seed(seed, 0));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.next_below(i + 1);
    std::swap(idx[i], idx[j]);
  }

  std::vector<bool> in_cal(n, false);
  for (std::size_t i = 0; i < n_cal; ++i) in_cal[idx[i]] = true;

  TraceSet cal = ts;
  TraceSet test = ts;
  cal.samples.clear();
  test.samples.clear();
  cal.samples.reserve(n_cal);
  test.samples.reserve(n - n_cal);
  for (std::size_t i = 0; i < n; ++i) {
    (in_cal[i] ? cal.samples : test.samples).push_back(ts.samples[i]);
  }
  return {std::move(cal), std::move(test)};
}

bool ValidationReport::ok() const {
  for (const auto& c : checks) {
    if (c.violations > 0) return false;
  }
  return true;
}

std::string ValidationReport::to_json() const {
  ordered_json j;
  j["num_samples"] = num_samples;
  j["ok"] = ok();
  ordered_json arr = ordered_json::array();
  for (const auto& c : checks) {
    arr.push_back({{"name", c.name},
                   {"violations", c.violations},
                   {"details", c.details}});
  }
  j["checks"] = arr;
  j["mean_confidence"] = mean_confidence;
  j["mean_loss"] = mean_loss;
  if (!mean_zero_one.empty()) j["mean_zero_one"] = mean_zero_one;
  if (!mean_brier.empty()) j["mean_brier"] = mean_brier;
  return j.dump(2);
}

ValidationReport validate(const TraceSet& ts) {
  constexpr std::size_t kMaxDetails = 16;
  ValidationReport report;
  report.num_samples = ts.size();

  ValidationCheck shape{"num_exits_at_least_2", 0, {}};
  if (ts.num_exits < 2) {
    shape.violations = 1;
    shape.details.push_back("num_exits = " + std::to_string(ts.num_exits));
  }

  ValidationCheck names{"loss_names_unique", 0, {}};
  {
    std::set<std::string> seen;
    for (const auto& name : ts.loss_names) {
      if (!seen.insert(name).second) {
        ++names.violations;
        if (names.details.size() < kMaxDetails) names.details.push_back(name);
      }
    }
  }

  ValidationCheck conf_count{"confidence_count", 0, {}};
  ValidationCheck conf_range{"confidence_range", 0, {}};
  ValidationCheck dist_shape{"distribution_shape", 0, {}};
  ValidationCheck dist_norm{"distribution_normalized", 0, {}};
  ValidationCheck label_range{"label_range", 0, {}};
  ValidationCheck loss_shape{"loss_shape", 0, {}};
  ValidationCheck loss_range{"loss_range", 0, {}};
  ValidationCheck payload{"distributions_or_losses_present", 0, {}};

  auto flag = [&](ValidationCheck& c, const std::string& id) {
    ++c.violations;
    if (c.details.size() < kMaxDetails) c.details.push_back(id);
  };

  const int L = ts.num_exits;
  std::vector<double> conf_sum(L > 1 ? L - 1 : 0, 0.0);
  std::map<std::string, std::vector<double>> loss_sum;
  for (const auto& name : ts.loss_names) {
    loss_sum[name].assign(L, 0.0);
  }
  std::vector<double> zo_sum(L, 0.0);
  std::vector<double> brier_sum(L, 0.0);
  std::size_t labelled_with_dist = 0;

  for (const auto& t : ts.samples) {
    if (static_cast<int>(t.confidences.size()) != L - 1) {
      flag(conf_count, t.id);
    } else {
      for (int l = 0; l < L - 1; ++l) conf_sum[l] += t.confidences[l];
    }
    for (double c : t.confidences) {
      if (!(c >= 0.0 && c <= 1.0)) {
        flag(conf_range, t.id);
        break;
      }
    }
    if (!t.has_distributions() && t.losses.empty()) flag(payload, t.id);
    if (t.has_distributions()) {
      bool bad_shape = static_cast<int>(t.distributions.size()) != L;
      bool bad_norm = false;
      for (const auto& row : t.distributions) {
        if (static_cast<int>(row.size()) != ts.num_classes) bad_shape = true;
        double sum = 0.0;
        for (double v : row) {
          if (v < -kRangeSlack) bad_norm = true;
          sum += v;
        }
        if (std::abs(sum - 1.0) > kProbTolerance) bad_norm = true;
      }
      if (bad_shape) flag(dist_shape, t.id);
      if (bad_norm) flag(dist_norm, t.id);
      if (t.label && !bad_shape) {
        if (*t.label < 0 || *t.label >= ts.num_classes) {
          flag(label_range, t.id);
        } else {
          ++labelled_with_dist;
          for (int l = 0; l < L; ++l) {
            const auto& row = t.distributions[l];
            int argmax = 0;
            for (int k = 1; k < ts.num_classes; ++k) {
              if (row[k] > row[argmax]) argmax = k;
            }
            zo_sum[l] += (argmax == *t.label) ? 0.0 : 1.0;
            double b = 0.0;
            for (int k = 0; k < ts.num_classes; ++k) {
              const double target = (k == *t.label) ? 1.0 : 0.0;
              b += (row[k] - target) * (row[k] - target);
            }
            brier_sum[l] += b;
          }
        }
      }
    } else if (t.label && *t.label < 0) {
      flag(label_range, t.id);
    }
    for (const auto& [name, vec] : t.losses) {
      if (static_cast<int>(vec.size()) != L ||
          loss_sum.find(name) == loss_sum.end()) {
        flag(loss_shape, t.id);
        continue;
      }
      bool bad = false;
      for (double v : vec) {
        if (v < -kRangeSlack || v > ts.loss_bound + kRangeSlack) bad = true;
      }
      if (bad) flag(loss_range, t.id);
      for (int l = 0; l < L; ++l) loss_sum[name][l] += vec[l];
    }
  }

  const auto n = static_cast<double>(ts.size());
  if (ts.size() > 0) {
    for (double& v : conf_sum) v /= n;
    report.mean_confidence = conf_sum;
    for (auto& [name, sums] : loss_sum) {
      for (double& v : sums) v /= n;
      report.mean_loss[name] = sums;
    }
    if (labelled_with_dist > 0) {
      const auto m = static_cast<double>(labelled_with_dist);
      for (double& v : zo_sum) v /= m;
      for (double& v : brier_sum) v /= m;
      report.mean_zero_one = zo_sum;
      report.mean_brier = brier_sum;
    }
  }

  report.checks = {shape,      names,      conf_count, conf_range, dist_shape,
                   dist_norm,  label_range, loss_shape, loss_range, payload};
  return report;
}

}  // namespace exitrisk
