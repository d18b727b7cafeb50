#include "txp/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"

namespace txp {

using json = nlohmann::json;

ActionSet::ActionSet(std::vector<Action> actions) : actions_(std::move(actions)) {
  if (actions_.size() < 2) {
    throw ConfigError("action set needs at least 2 actions, got " +
                      std::to_string(actions_.size()));
  }
  std::set<std::string> seen;
  for (const auto& a : actions_) {
    if (a.label.empty()) throw ConfigError("empty action label");
    if (!seen.insert(a.label).second) {
      throw ConfigError("duplicate action label '" + a.label + "'");
    }
    if (!(a.cost >= 0.0 && a.cost <= 1.0)) {
      throw ConfigError("cost of action '" + a.label + "' must lie in [0,1]");
    }
  }
}

std::vector<std::string> ActionSet::labels() const {
  std::vector<std::string> out;
  out.reserve(actions_.size());
  for (const auto& a : actions_) out.push_back(a.label);
  return out;
}

std::optional<std::size_t> ActionSet::find(const std::string& label) const {
  for (std::size_t a = 0; a < actions_.size(); ++a) {
    if (actions_[a].label == label) return a;
  }
  return std::nullopt;
}

std::size_t ActionSet::index_of(const std::string& label) const {
  if (auto a = find(label)) return *a;
  throw ParseError("unknown action label '" + label + "'");
}

std::optional<std::size_t> ActionSet::first_zero_cost() const {
  for (std::size_t a = 0; a < actions_.size(); ++a) {
    if (actions_[a].cost == 0.0) return a;
  }
  return std::nullopt;
}

ActionSet parse_action_set(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("action set: ") + e.what());
  }
  if (!doc.contains("actions") || !doc["actions"].is_array()) {
    throw ConfigError("action set: missing \"actions\" array");
  }
  std::vector<ActionSet::Action> actions;
  for (const auto& item : doc["actions"]) {
    if (!item.contains("label") || !item["label"].is_string()) {
      throw ConfigError("action set: every action needs a string \"label\"");
    }
    ActionSet::Action a;
    a.label = item["label"].get<std::string>();
    if (item.contains("cost")) {
      if (!item["cost"].is_number()) {
        throw ConfigError("action set: cost of '" + a.label + "' is not a number");
      }
      a.cost = item["cost"].get<double>();
    }
    actions.push_back(std::move(a));
  }
  return ActionSet(std::move(actions));
}

ActionSet load_action_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open action set " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_action_set(ss.str());
}

std::string action_set_to_json(const ActionSet& actions) {
  json doc;
  doc["actions"] = json::array();
  for (const auto& a : actions.actions()) {
    doc["actions"].push_back({{"label", a.label}, {"cost", a.cost}});
  }
  return doc.dump();
}

Cohort Cohort::subset(std::span<const std::size_t> rows) const {
  Cohort out;
  out.feature_names = feature_names;
  out.X = X.select_rows(rows);
  out.Y = Y.select_rows(rows);
  out.ids.reserve(rows.size());
  for (auto r : rows) out.ids.push_back(ids.at(r));
  if (doctor_action) {
    std::vector<std::size_t> doc;
    doc.reserve(rows.size());
    for (auto r : rows) doc.push_back(doctor_action->at(r));
    out.doctor_action = std::move(doc);
  }
  return out;
}

void Cohort::validate(const ActionSet& actions) const {
  if (Y.rows() != X.rows()) throw ShapeError("X and Y row counts differ");
  if (Y.cols() != actions.size()) {
    throw ShapeError("Y has " + std::to_string(Y.cols()) + " columns but the action set has " +
                     std::to_string(actions.size()));
  }
  if (ids.size() != X.rows()) throw ShapeError("id count differs from row count");
  if (feature_names.size() != X.cols()) {
    throw ShapeError("feature name count differs from feature count");
  }
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw DataError("non-finite feature value");
  }
  for (auto y : Y.data()) {
    if (y > 1) throw DataError("benefit entries must be 0 or 1");
  }
  if (doctor_action) {
    if (doctor_action->size() != X.rows()) {
      throw ShapeError("doctor_action length differs from row count");
    }
    for (auto a : *doctor_action) {
      if (a >= actions.size()) throw DataError("doctor_action index out of range");
    }
  }
}

Cohort load_cohort(const std::filesystem::path& path, const ActionSet& actions) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty cohort file " + path.string());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) {
    line.erase(0, 3);  // UTF-8 BOM
  }
  auto header = csv::split(line);
  for (auto& h : header) h = std::string(csv::trim(h));

  std::optional<std::size_t> id_col, doc_col;
  std::vector<std::optional<std::size_t>> y_col(actions.size());
  std::vector<std::size_t> feat_cols;
  Cohort cohort;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& h = header[c];
    if (h == "id") {
      id_col = c;
    } else if (h == "doctor_action") {
      doc_col = c;
    } else if (h.rfind("y_", 0) == 0) {
      auto a = actions.find(h.substr(2));
      if (!a) throw SchemaError("column " + h + " names no action in the action set");
      y_col[*a] = c;
    } else {
      feat_cols.push_back(c);
      cohort.feature_names.push_back(h);
    }
  }
  if (!id_col) throw SchemaError("missing required column id");
  for (std::size_t a = 0; a < actions.size(); ++a) {
    if (!y_col[a]) throw SchemaError("missing required column y_" + actions.label(a));
  }

  cohort.X = MatrixD(0, feat_cols.size());
  cohort.Y = Matrix<std::uint8_t>(0, actions.size());
  std::vector<std::size_t> doctor;
  std::vector<double> xrow(feat_cols.size());
  std::vector<std::uint8_t> yrow(actions.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    auto fields = csv::split(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string id(csv::trim(fields[*id_col]));
    bool missing_outcome = false;
    for (std::size_t a = 0; a < actions.size(); ++a) {
      auto field = csv::trim(fields[*y_col[a]]);
      if (field.empty() || field == "NA" || field == "nan") {
        missing_outcome = true;
        break;
      }
      auto v = csv::parse_double(field);
      if (!v || (*v != 0.0 && *v != 1.0)) {
        throw ParseError("row id " + id + ": y_" + actions.label(a) + " = '" +
                         std::string(field) + "' is not 0 or 1");
      }
      yrow[a] = static_cast<std::uint8_t>(*v);
    }
    if (missing_outcome) continue;  // incomplete susceptibility panel
    for (std::size_t j = 0; j < feat_cols.size(); ++j) {
      auto v = csv::parse_double(fields[feat_cols[j]]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("row id " + id + ": feature " + cohort.feature_names[j] +
                         " = '" + fields[feat_cols[j]] + "' is not a finite number");
      }
      xrow[j] = *v;
    }
    if (doc_col) {
      const std::string label(csv::trim(fields[*doc_col]));
      auto a = actions.find(label);
      if (!a) {
        throw ParseError("row id " + id + ": unknown doctor_action '" + label + "'");
      }
      doctor.push_back(*a);
    }
    cohort.ids.push_back(id);
    cohort.X.append_row(xrow);
    cohort.Y.append_row(yrow);
  }
  if (doc_col) cohort.doctor_action = std::move(doctor);
  return cohort;
}

void write_cohort(const std::filesystem::path& path, const Cohort& cohort,
                  const ActionSet& actions) {
  cohort.validate(actions);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write cohort file " + path.string());
  out << "id";
  for (const auto& f : cohort.feature_names) out << ',' << csv::quote(f);
  for (const auto& l : actions.labels()) out << ",y_" << csv::quote(l);
  if (cohort.doctor_action) out << ",doctor_action";
  out << '\n';
  for (std::size_t i = 0; i < cohort.n(); ++i) {
    out << csv::quote(cohort.ids[i]);
    for (double v : cohort.X.row(i)) out << ',' << csv::format_double(v);
    for (auto y : cohort.Y.row(i)) out << ',' << static_cast<int>(y);
    if (cohort.doctor_action) {
      out << ',' << csv::quote(actions.label((*cohort.doctor_action)[i]));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing cohort file " + path.string());
}

void RewardSpec::validate() const {
  if (!(omega >= 0.0 && omega <= 1.0)) throw ConfigError("omega must lie in [0,1]");
  if (!(lambda_defer >= 0.0) || !std::isfinite(lambda_defer)) {
    throw ConfigError("lambda_defer must be a finite nonnegative number");
  }
}

RewardTable build_rewards(const Cohort& cohort, const ActionSet& actions,
                          const RewardSpec& spec) {
  spec.validate();
  if (cohort.k() != actions.size()) {
    throw ShapeError("cohort outcome table does not match the action set");
  }
  if (spec.defers() && !cohort.has_doctor()) {
    throw ConfigError("deferral requested (lambda_defer > 0) but the cohort has no doctor_action");
  }
  const std::size_t k = actions.size();
  RewardTable table;
  table.has_defer = spec.defers();
  table.r = MatrixD(cohort.n(), k + (table.has_defer ? 1 : 0));
  for (std::size_t i = 0; i < cohort.n(); ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      const double v = spec.omega * cohort.Y(i, a) + (1.0 - spec.omega) * (1.0 - actions.cost(a));
      if (v < 0.0) throw ContractError("negative reward produced by configuration");
      table.r(i, a) = v;
    }
    if (table.has_defer) {
      table.r(i, k) = table.r(i, (*cohort.doctor_action)[i]) + spec.lambda_defer;
    }
  }
  return table;
}

Standardizer Standardizer::fit(const MatrixD& X) {
  Standardizer s;
  const std::size_t m = X.cols();
  s.mean.assign(m, 0.0);
  s.sd.assign(m, 1.0);
  if (X.rows() == 0) return s;
  const double n = static_cast<double>(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) s.mean[j] += X(i, j);
  }
  for (auto& v : s.mean) v /= n;
  std::vector<double> ss(m, 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = X(i, j) - s.mean[j];
      ss[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double sd = std::sqrt(ss[j] / n);
    s.sd[j] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t m) {
  return Standardizer{std::vector<double>(m, 0.0), std::vector<double>(m, 1.0)};
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  if (x.size() != mean.size() || out.size() != mean.size()) {
    throw ShapeError("feature row has " + std::to_string(x.size()) + " columns, expected " +
                     std::to_string(mean.size()));
  }
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / sd[j];
}

MatrixD Standardizer::apply(const MatrixD& X) const {
  if (X.cols() != mean.size()) {
    throw ShapeError("feature matrix has " + std::to_string(X.cols()) + " columns, expected " +
                     std::to_string(mean.size()));
  }
  MatrixD out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) apply(X.row(i), out.row(i));
  return out;
}

std::size_t argmax_canonical(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < values.size(); ++a) {
    const double tol = 1e-12 * std::max(1.0, std::abs(values[best]));
    if (values[a] > values[best] + tol) best = a;
  }
  return best;
}

std::size_t argmin_canonical(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < values.size(); ++a) {
    const double tol = 1e-12 * std::max(1.0, std::abs(values[best]));
    if (values[a] < values[best] - tol) best = a;
  }
  return best;
}

std::vector<std::size_t> apply_policy(const Policy& policy, const MatrixD& X) {
  if (X.rows() > 0 && X.cols() != policy.num_features()) {
    throw ShapeError("policy expects " + std::to_string(policy.num_features()) +
                     " features, matrix has " + std::to_string(X.cols()));
  }
  std::vector<std::size_t> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    out[i] = policy.decide(X.row(i));
    if (out[i] >= policy.num_outputs()) throw DataError("policy returned an invalid action index");
  }
  return out;
}

ConstantPolicy::ConstantPolicy(std::size_t m, std::size_t outputs, std::size_t action,
                               bool defers)
    : m_(m), outputs_(outputs), action_(action), defers_(defers) {
  if (action >= outputs) throw ConfigError("constant action out of range");
}

}  // namespace txp
