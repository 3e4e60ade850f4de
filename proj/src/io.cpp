// Copyright 2026 The htvs-opt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "htvs/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <Eigen/Cholesky>

#include "htvs/error.hpp"

namespace htvs {
namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(const std::string& line, long lineno) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"' && trim(cur).empty()) {
      quoted = true;
      was_quoted = true;
      cur.clear();
    } else if (ch == ',') {
      fields.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw ParseError(ErrorCode::kParseError, lineno, "unterminated quoted field");
  fields.push_back(was_quoted ? cur : trim(cur));
  return fields;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

// Shortest round-trip form; plain decimals in the everyday range so costs
// print as 400000 rather than 4e+05.
std::string shortest(double v) {
  char buf[512];
  const double a = std::fabs(v);
  const bool fixed = a == 0.0 || (a >= 1e-5 && a < 1e15);
  auto res = fixed ? std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed)
                   : std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double round9(double v) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

json real_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return round9(v);
}

json optional_json(const std::optional<double>& v) { return v ? real_json(*v) : json(nullptr); }

double json_real(const json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_real(j.get<std::string>());
  throw Error(ErrorCode::kParseError, what + " must be a number");
}

const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::kParseError, where + " is missing key '" + key + "'");
  }
  return j.at(key);
}

std::uint64_t json_seed(const json& j) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  throw Error(ErrorCode::kParseError, "seed must be a non-negative integer");
}

int json_count(const json& j, const std::string& what) {
  if (!j.is_number_integer()) throw Error(ErrorCode::kParseError, what + " must be an integer");
  return j.get<int>();
}

void expect_single_key(const json& j, const std::string& where) {
  if (!j.is_object() || j.size() != 1) {
    throw Error(ErrorCode::kInvalidArgument, where + " must have exactly one entry");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

double parse_real(const std::string& token) {
  const std::string t = trim(token);
  if (t == "-inf") return -kInf;
  if (t == "inf" || t == "+inf") return kInf;
  double v = 0.0;
  const char* first = t.data();
  const char* last = t.data() + t.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || t.empty()) {
    throw Error(ErrorCode::kParseError, "not a number: '" + t + "'");
  }
  return v;
}

std::string format_real(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  return shortest(round9(value));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// Score tables

ScoreTable parse_score_table(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long lineno = 0;

  if (!std::getline(in, line)) throw ParseError(ErrorCode::kParseError, 1, "missing header");
  ++lineno;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_record(line, lineno);
  if (header.empty() || header[0] != "id") {
    throw ParseError(ErrorCode::kParseError, lineno, "first header field must be 'id'");
  }
  const bool has_label = header.size() >= 2 && header.back() == "label";
  std::vector<std::string> names(header.begin() + 1, header.end() - (has_label ? 1 : 0));
  if (names.empty()) throw ParseError(ErrorCode::kParseError, lineno, "no score columns");
  {
    std::set<std::string> seen;
    for (const auto& n : names) {
      if (n.empty()) throw ParseError(ErrorCode::kParseError, lineno, "empty column name");
      if (n == "label") throw ParseError(ErrorCode::kParseError, lineno, "'label' must be the last column");
      if (!seen.insert(n).second) throw Error(ErrorCode::kDuplicateColumn, "duplicate column '" + n + "'");
    }
  }

  const std::size_t width = header.size();
  const std::size_t d = names.size();
  std::vector<double> values;
  std::vector<std::string> ids;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, lineno);
    if (fields.size() != width) {
      throw ParseError(ErrorCode::kParseError, lineno,
                       "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    ids.push_back(fields[0]);
    for (std::size_t j = 0; j < d; ++j) {
      const std::string& f = fields[j + 1];
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(ErrorCode::kParseError, lineno, "column '" + names[j] + "': not a number '" + f + "'");
      }
      if (!std::isfinite(v)) {
        throw ParseError(ErrorCode::kNonFiniteScore, lineno, "column '" + names[j] + "' is not finite");
      }
      values.push_back(v);
    }
    if (has_label) {
      const std::string& f = fields.back();
      if (f != "0" && f != "1") throw ParseError(ErrorCode::kParseError, lineno, "label must be 0 or 1");
      labels.push_back(f == "1" ? 1 : 0);
    }
  }

  const auto n = static_cast<Eigen::Index>(ids.size());
  Eigen::MatrixXd rows(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      rows(r, static_cast<Eigen::Index>(j)) = values[static_cast<std::size_t>(r) * d + j];
    }
  }
  std::optional<std::vector<int>> lab;
  if (has_label) lab = std::move(labels);
  return ScoreTable(std::move(names), std::move(rows), std::move(lab), std::move(ids));
}

ScoreTable load_score_table(const std::filesystem::path& path) { return parse_score_table(read_text_file(path)); }

std::string format_score_table(const ScoreTable& table) {
  std::string out = "id";
  for (const auto& n : table.column_names()) out += "," + quote_if_needed(n);
  if (table.has_labels()) out += ",label";
  out += "\n";
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    out += table.ids() ? quote_if_needed((*table.ids())[r]) : std::to_string(r + 1);
    for (std::size_t j = 0; j < table.num_columns(); ++j) {
      out += ",";
      out += shortest(table.rows()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
    }
    if (table.has_labels()) out += (*table.labels())[r] ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& path) {
  write_text_file(path, format_score_table(table));
}

ScoreTable negate_columns(const ScoreTable& table, const std::vector<std::string>& names) {
  Eigen::MatrixXd rows = table.rows();
  for (const auto& n : names) {
    auto c = table.find_column(n);
    if (!c) throw Error(ErrorCode::kColumnMissing, "cannot negate missing column '" + n + "'");
    rows.col(static_cast<Eigen::Index>(*c)) *= -1.0;
  }
  return ScoreTable(table.column_names(), std::move(rows), table.labels(), table.ids());
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

Eigen::MatrixXd synthetic_covariance(double rho) {
  if (!std::isfinite(rho) || rho <= -1.0 || rho >= 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "rho must lie in (-1, 1), got " + format_real(rho));
  }
  Eigen::MatrixXd s(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const int lag = std::abs(i - j);
      s(i, j) = lag == 0 ? 1.0 : rho - 0.1 * (lag - 1);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "synthetic covariance is not positive-definite for rho = " + format_real(rho));
  }
  return s;
}

GmmModel synthetic_model(double rho) {
  return GmmModel::gaussian(Eigen::VectorXd::Zero(4), synthetic_covariance(rho), {"s1", "s2", "s3", "s4"});
}

ScoreTable generate_synthetic(double rho, std::size_t n, std::uint64_t seed) {
  return sample(synthetic_model(rho), n, seed);
}

PipelineSpec paper_synthetic_pipeline() {
  PipelineSpec spec;
  spec.stages = {{"s1", 1.0, 0}, {"s2", 10.0, 1}, {"s3", 100.0, 2}, {"s4", 1000.0, 3}};
  spec.final_threshold = kPaperFinalThreshold;
  spec.population = kPaperPopulation;
  return spec;
}

// ---------------------------------------------------------------------------
// GMM

json to_json(const GmmModel& model) {
  json comps = json::array();
  for (const auto& c : model.components()) {
    json mean = json::array();
    for (Eigen::Index i = 0; i < c.mean.size(); ++i) mean.push_back(c.mean(i));
    json cov = json::array();
    for (Eigen::Index i = 0; i < c.cov.rows(); ++i) {
      for (Eigen::Index j = 0; j < c.cov.cols(); ++j) cov.push_back(c.cov(i, j));
    }
    comps.push_back({{"weight", c.weight}, {"mean", mean}, {"cov", cov}});
  }
  return {{"dim", model.dim()}, {"columns", model.column_names()}, {"components", comps}};
}

GmmModel gmm_from_json(const json& j) {
  try {
    const int dim = json_count(require(j, "dim", "model"), "dim");
    if (dim < 1) throw Error(ErrorCode::kInvalidArgument, "model dim must be positive");
    auto columns = require(j, "columns", "model").get<std::vector<std::string>>();
    const auto d = static_cast<Eigen::Index>(dim);
    std::vector<GaussianComponent> comps;
    for (const auto& cj : require(j, "components", "model")) {
      GaussianComponent c;
      c.weight = json_real(require(cj, "weight", "component"), "weight");
      auto mean = require(cj, "mean", "component").get<std::vector<double>>();
      auto cov = require(cj, "cov", "component").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(mean.size()) != d || static_cast<Eigen::Index>(cov.size()) != d * d) {
        throw Error(ErrorCode::kBadDimension, "component shape does not match dim");
      }
      c.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), d);
      c.cov = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cov.data(), d, d);
      comps.push_back(std::move(c));
    }
    if (static_cast<int>(columns.size()) != dim) throw Error(ErrorCode::kBadDimension, "columns length != dim");
    return GmmModel(std::move(comps), std::move(columns));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed model JSON: ") + e.what());
  }
}

GmmModel load_gmm(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, "'" + path.string() + "': " + e.what());
  }
  return gmm_from_json(j);
}

void write_gmm(const GmmModel& model, const std::filesystem::path& path) {
  write_text_file(path, to_json(model).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Reports

json to_json(const Policy& policy) {
  json a = json::array();
  for (double t : policy.thresholds) a.push_back(real_json(t));
  return a;
}

Policy policy_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::kParseError, "policy must be an array");
  Policy p;
  for (const auto& t : j) p.thresholds.push_back(json_real(t, "threshold"));
  return p;
}

json to_json(const ObjectiveReport& report) {
  json counts = json::array();
  for (double c : report.expected_counts) counts.push_back(real_json(c));
  return {{"reward", real_json(report.reward)},
          {"expected_counts", counts},
          {"expected_total_cost", real_json(report.expected_total_cost)},
          {"relative_reward", real_json(report.relative_reward)},
          {"normalized_cost", real_json(report.normalized_cost)},
          {"joint_value", real_json(report.joint_value)}};
}

json to_json(const OptimizationResult& result) {
  return {{"policy", to_json(result.policy)},
          {"report", to_json(result.report)},
          {"feasible", result.feasible},
          {"evaluations", result.evaluations}};
}

json to_json(const SimReport& report) {
  json metrics = nullptr;
  if (report.metrics) {
    metrics = {{"accuracy", optional_json(report.metrics->accuracy)},
               {"sensitivity", optional_json(report.metrics->sensitivity)},
               {"specificity", optional_json(report.metrics->specificity)},
               {"f1", optional_json(report.metrics->f1)}};
  }
  return {{"survivors_per_stage", report.survivors_per_stage},
          {"detected", report.detected},
          {"total_cost", real_json(report.total_cost)},
          {"effective_cost", optional_json(report.effective_cost)},
          {"savings_vs_reference", optional_json(report.savings_vs_reference)},
          {"metrics", metrics},
          {"policy_used", to_json(report.policy_used)},
          {"baseline_top_fraction", optional_json(report.baseline_top_fraction)}};
}

std::string format_budget_curve_csv(const BudgetCurve& curve) {
  std::size_t width = 0;
  bool empirical = false;
  for (const auto& p : curve.points) {
    width = std::max(width, p.policy.thresholds.size());
    empirical = empirical || p.empirical_detected.has_value();
  }
  std::string out = "budget,expected_detected";
  for (std::size_t i = 1; i <= width; ++i) out += ",threshold_" + std::to_string(i);
  if (empirical) out += ",empirical_detected";
  out += "\n";
  for (const auto& p : curve.points) {
    if (p.policy.thresholds.size() != width) {
      throw Error(ErrorCode::kLengthMismatch, "budget curve rows have different policy lengths");
    }
    out += format_real(p.budget) + "," + format_real(p.expected_detected);
    for (double t : p.policy.thresholds) out += "," + format_real(t);
    if (empirical) out += "," + (p.empirical_detected ? format_real(*p.empirical_detected) : std::string());
    out += "\n";
  }
  return out;
}

BudgetCurve parse_budget_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  long lineno = 1;
  if (!std::getline(in, line)) throw ParseError(ErrorCode::kParseError, 1, "missing header");
  auto header = split_record(line, lineno);
  if (header.size() < 2 || header[0] != "budget" || header[1] != "expected_detected") {
    throw ParseError(ErrorCode::kParseError, lineno, "header must start with budget,expected_detected");
  }
  const bool empirical = header.back() == "empirical_detected";
  const std::size_t width = header.size() - 2 - (empirical ? 1 : 0);
  for (std::size_t i = 0; i < width; ++i) {
    if (header[2 + i] != "threshold_" + std::to_string(i + 1)) {
      throw ParseError(ErrorCode::kParseError, lineno, "unexpected column '" + header[2 + i] + "'");
    }
  }
  BudgetCurve curve;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split_record(line, lineno);
    if (f.size() != header.size()) throw ParseError(ErrorCode::kParseError, lineno, "wrong number of fields");
    try {
      BudgetCurvePoint p;
      p.budget = parse_real(f[0]);
      p.expected_detected = parse_real(f[1]);
      for (std::size_t i = 0; i < width; ++i) p.policy.thresholds.push_back(parse_real(f[2 + i]));
      if (empirical && !f.back().empty()) p.empirical_detected = parse_real(f.back());
      // The CSV carries no feasibility column; a policy blocking everything at
      // stage 1 with nothing detected is how infeasible rows are written.
      p.feasible = !(p.expected_detected == 0.0 && width > 0 && p.policy.thresholds[0] == kInf);
      curve.points.push_back(std::move(p));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(ErrorCode::kParseError, lineno, e.what());
    }
  }
  return curve;
}

BudgetCurve load_budget_curve(const std::filesystem::path& path) {
  return parse_budget_curve_csv(read_text_file(path));
}

void write_report(const OptimizationResult& result, const std::filesystem::path& path, ReportFormat format) {
  if (format != ReportFormat::kJson) throw Error(ErrorCode::kInvalidArgument, "optimization results are JSON only");
  write_text_file(path, to_json(result).dump(2) + "\n");
}

void write_report(const SimReport& report, const std::filesystem::path& path, ReportFormat format) {
  if (format != ReportFormat::kJson) throw Error(ErrorCode::kInvalidArgument, "simulation reports are JSON only");
  write_text_file(path, to_json(report).dump(2) + "\n");
}

void write_report(const BudgetCurve& curve, const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    write_text_file(path, format_budget_curve_csv(curve));
    return;
  }
  json pts = json::array();
  for (const auto& p : curve.points) {
    pts.push_back({{"budget", real_json(p.budget)},
                   {"expected_detected", real_json(p.expected_detected)},
                   {"policy", to_json(p.policy)},
                   {"feasible", p.feasible},
                   {"empirical_detected", optional_json(p.empirical_detected)}});
  }
  write_text_file(path, json{{"points", pts}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Campaign configuration

CampaignConfig campaign_from_json(const json& j) {
  try {
    CampaignConfig c;
    if (!j.is_object()) throw Error(ErrorCode::kParseError, "config must be a JSON object");
    static const std::set<std::string> known_keys = {"pipeline", "mode",      "distribution", "integration",
                                                     "optimizer", "em",       "negate",       "seed"};
    for (const auto& [key, value] : j.items()) {
      if (!known_keys.count(key)) throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
    if (j.contains("seed")) c.seed = json_seed(j.at("seed"));

    const json& pj = require(j, "pipeline", "config");
    for (const auto& sj : require(pj, "stages", "pipeline")) {
      Stage s;
      s.name = require(sj, "name", "stage").get<std::string>();
      s.cost = json_real(require(sj, "cost", "stage"), "cost");
      const int col = json_count(require(sj, "column", "stage"), "column");
      if (col < 0) throw Error(ErrorCode::kInvalidArgument, "stage column must be non-negative");
      s.column = static_cast<std::size_t>(col);
      c.pipeline.stages.push_back(std::move(s));
    }
    c.pipeline.final_threshold = json_real(require(pj, "final_threshold", "pipeline"), "final_threshold");
    const json& pop = require(pj, "population", "pipeline");
    if (pop.is_number_integer()) {
      c.pipeline.population = pop.get<long long>();
    } else {
      const double p = json_real(pop, "population");
      if (p != std::floor(p)) throw Error(ErrorCode::kInvalidArgument, "population must be an integer");
      c.pipeline.population = static_cast<long long>(p);
    }

    const json& mj = require(j, "mode", "config");
    expect_single_key(mj, "mode");
    if (mj.contains("budgeted")) {
      c.mode = BudgetedMode{json_real(require(mj.at("budgeted"), "budget", "mode.budgeted"), "budget")};
    } else if (mj.contains("joint")) {
      c.mode = JointMode{json_real(require(mj.at("joint"), "alpha", "mode.joint"), "alpha")};
    } else {
      throw Error(ErrorCode::kInvalidArgument, "mode must be 'budgeted' or 'joint'");
    }

    const json& dj = require(j, "distribution", "config");
    expect_single_key(dj, "distribution");
    if (dj.contains("known")) {
      c.distribution = KnownDistribution{require(dj.at("known"), "path", "distribution.known").get<std::string>()};
    } else if (dj.contains("fit")) {
      const json& fj = dj.at("fit");
      FitDistribution f;
      f.path = require(fj, "path", "distribution.fit").get<std::string>();
      if (fj.contains("train_fraction")) f.train_fraction = json_real(fj.at("train_fraction"), "train_fraction");
      if (fj.contains("k")) {
        const json& k = fj.at("k");
        if (k.is_string() && k.get<std::string>() == "auto") {
          f.k.reset();
        } else {
          f.k = json_count(k, "k");
        }
      }
      if (fj.contains("k_max")) f.k_max = json_count(fj.at("k_max"), "k_max");
      c.distribution = f;
    } else if (dj.contains("synthetic")) {
      c.distribution = SyntheticDistribution{json_real(require(dj.at("synthetic"), "rho", "distribution.synthetic"), "rho")};
    } else {
      throw Error(ErrorCode::kInvalidArgument, "distribution must be 'known', 'fit' or 'synthetic'");
    }

    // Sub-seeds default to the campaign seed.
    c.integration.seed = c.seed;
    c.optimizer.seed = c.seed;
    c.em.seed = c.seed;
    if (j.contains("integration")) {
      const json& ij = j.at("integration");
      if (ij.contains("n_points")) c.integration.n_points = json_count(ij.at("n_points"), "n_points");
      if (ij.contains("n_randomizations")) {
        c.integration.n_randomizations = json_count(ij.at("n_randomizations"), "n_randomizations");
      }
      if (ij.contains("seed")) c.integration.seed = json_seed(ij.at("seed"));
    }
    if (j.contains("optimizer")) {
      const json& oj = j.at("optimizer");
      if (oj.contains("seed_levels")) c.optimizer.seed_levels = oj.at("seed_levels").get<std::vector<double>>();
      if (oj.contains("lhs_seeds")) c.optimizer.lhs_seeds = json_count(oj.at("lhs_seeds"), "lhs_seeds");
      if (oj.contains("n_polish")) c.optimizer.n_polish = json_count(oj.at("n_polish"), "n_polish");
      if (oj.contains("polish_iters")) c.optimizer.polish_iters = json_count(oj.at("polish_iters"), "polish_iters");
      if (oj.contains("penalty")) c.optimizer.penalty = json_real(oj.at("penalty"), "penalty");
      if (oj.contains("seed")) c.optimizer.seed = json_seed(oj.at("seed"));
      if (oj.contains("search_points")) {
        c.optimizer.search_integration.n_points = json_count(oj.at("search_points"), "search_points");
      }
      if (oj.contains("search_randomizations")) {
        c.optimizer.search_integration.n_randomizations =
            json_count(oj.at("search_randomizations"), "search_randomizations");
      }
      if (oj.contains("polish_points")) {
        c.optimizer.polish_integration.n_points = json_count(oj.at("polish_points"), "polish_points");
      }
      if (oj.contains("polish_randomizations")) {
        c.optimizer.polish_integration.n_randomizations =
            json_count(oj.at("polish_randomizations"), "polish_randomizations");
      }
      if (oj.contains("threads")) c.optimizer.threads = json_count(oj.at("threads"), "threads");
    }
    if (j.contains("em")) {
      const json& ej = j.at("em");
      if (ej.contains("max_iters")) c.em.max_iters = json_count(ej.at("max_iters"), "max_iters");
      if (ej.contains("tol")) c.em.tol = json_real(ej.at("tol"), "tol");
      if (ej.contains("reg_floor")) c.em.reg_floor = json_real(ej.at("reg_floor"), "reg_floor");
      if (ej.contains("seed")) c.em.seed = json_seed(ej.at("seed"));
    }
    if (j.contains("negate")) c.negate = j.at("negate").get<std::vector<std::string>>();
    c.optimizer.integration = c.integration;

    validate(c.pipeline);
    validate(c.integration);
    validate(c.optimizer);
    if (c.em.max_iters < 1 || !(c.em.tol > 0.0) || !(c.em.reg_floor > 0.0)) {
      throw Error(ErrorCode::kInvalidArgument, "em needs max_iters >= 1, tol > 0 and reg_floor > 0");
    }
    if (const auto* f = std::get_if<FitDistribution>(&c.distribution)) {
      if (!(f->train_fraction > 0.0 && f->train_fraction < 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "train_fraction must lie in (0, 1)");
      }
      if ((f->k && *f->k < 1) || f->k_max < 1) throw Error(ErrorCode::kInvalidArgument, "k must be positive");
    }
    if (const auto* m = std::get_if<JointMode>(&c.mode)) {
      if (!(m->alpha >= 0.0 && m->alpha <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in [0, 1]");
    }
    if (const auto* b = std::get_if<BudgetedMode>(&c.mode)) {
      if (!(b->budget >= 0.0) || !std::isfinite(b->budget)) {
        throw Error(ErrorCode::kInvalidArgument, "budget must be a non-negative finite number");
      }
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("malformed config: ") + e.what());
  }
}

json campaign_to_json(const CampaignConfig& c) {
  json stages = json::array();
  for (const auto& s : c.pipeline.stages) {
    stages.push_back({{"name", s.name}, {"cost", real_json(s.cost)}, {"column", s.column}});
  }
  json j;
  j["pipeline"] = {{"stages", stages},
                   {"final_threshold", real_json(c.pipeline.final_threshold)},
                   {"population", c.pipeline.population}};
  if (const auto* b = std::get_if<BudgetedMode>(&c.mode)) {
    j["mode"] = {{"budgeted", {{"budget", real_json(b->budget)}}}};
  } else {
    j["mode"] = {{"joint", {{"alpha", real_json(std::get<JointMode>(c.mode).alpha)}}}};
  }
  if (const auto* k = std::get_if<KnownDistribution>(&c.distribution)) {
    j["distribution"] = {{"known", {{"path", k->path}}}};
  } else if (const auto* f = std::get_if<FitDistribution>(&c.distribution)) {
    json k = f->k ? json(*f->k) : json("auto");
    j["distribution"] = {
        {"fit", {{"path", f->path}, {"train_fraction", real_json(f->train_fraction)}, {"k", k}, {"k_max", f->k_max}}}};
  } else {
    j["distribution"] = {{"synthetic", {{"rho", real_json(std::get<SyntheticDistribution>(c.distribution).rho)}}}};
  }
  j["integration"] = {{"n_points", c.integration.n_points},
                      {"n_randomizations", c.integration.n_randomizations},
                      {"seed", c.integration.seed}};
  json levels = json::array();
  for (double l : c.optimizer.seed_levels) levels.push_back(real_json(l));
  j["optimizer"] = {{"seed_levels", levels},
                    {"lhs_seeds", c.optimizer.lhs_seeds},
                    {"n_polish", c.optimizer.n_polish},
                    {"polish_iters", c.optimizer.polish_iters},
                    {"penalty", real_json(c.optimizer.penalty)},
                    {"seed", c.optimizer.seed},
                    {"polish_points", c.optimizer.polish_integration.n_points},
                    {"polish_randomizations", c.optimizer.polish_integration.n_randomizations},
                    {"search_points", c.optimizer.search_integration.n_points},
                    {"search_randomizations", c.optimizer.search_integration.n_randomizations},
                    {"threads", c.optimizer.threads}};
  j["em"] = {{"max_iters", c.em.max_iters},
             {"tol", real_json(c.em.tol)},
             {"reg_floor", real_json(c.em.reg_floor)},
             {"seed", c.em.seed}};
  j["negate"] = c.negate;
  j["seed"] = c.seed;
  return j;
}

CampaignConfig load_campaign(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, "'" + path.string() + "': " + e.what());
  }
  return campaign_from_json(j);
}

ResolvedDistribution resolve_distribution(const CampaignConfig& config, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  if (const auto* k = std::get_if<KnownDistribution>(&config.distribution)) {
    return {load_gmm(resolve(k->path)), std::nullopt, std::nullopt};
  }
  if (const auto* s = std::get_if<SyntheticDistribution>(&config.distribution)) {
    return {synthetic_model(s->rho), std::nullopt, std::nullopt};
  }
  const auto& f = std::get<FitDistribution>(config.distribution);
  ScoreTable table = negate_columns(load_score_table(resolve(f.path)), config.negate);
  auto [train, eval] = split_table(table, f.train_fraction, config.seed);
  if (f.k) return {fit_gmm(train, *f.k, config.em), std::move(eval), std::nullopt};
  auto sel = select_components(train, f.k_max, config.em);
  GmmModel model = sel.model;
  return {std::move(model), std::move(eval), std::move(sel)};
}

CampaignConfig paper_synthetic_campaign(double rho) {
  synthetic_covariance(rho);  // validates rho
  CampaignConfig c;
  c.pipeline = paper_synthetic_pipeline();
  c.mode = JointMode{0.5};
  c.distribution = SyntheticDistribution{rho};
  c.optimizer.integration = c.integration;
  return c;
}

}  // namespace htvs
