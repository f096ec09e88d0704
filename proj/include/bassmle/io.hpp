#pragma once

#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bassmle/estimator.hpp"
#include "bassmle/experiments.hpp"
#include "bassmle/observed_path.hpp"

namespace bassmle::io {

using nlohmann::json;

/// Malformed or unreadable input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest-safe lossless decimal form (17 significant digits).
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError("not a number: '" + s + "'");
  }
  while (used < s.size() && (s[used] == ' ' || s[used] == '\r' || s[used] == '\t')) ++used;
  if (used != s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

inline std::string read_file(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot read " + file);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write " + file);
  out << text;
  if (!out) throw FormatError("write failed: " + file);
}

// ---- observed paths -------------------------------------------------------

inline json path_to_json(const ObservedPath& path) {
  json segs = json::array();
  for (const auto& s : path.price_path.segments())
    segs.push_back({{"start", s.start}, {"end", s.end}, {"price", s.price}});
  return {{"m", path.m},
          {"horizon", path.horizon},
          {"price_segments", segs},
          {"adoption_times", path.adoption_times}};
}

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw FormatError("unknown key '" + key + "' in " + where);
}

template <typename T>
T required(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw FormatError("missing key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

}  // namespace detail

inline ObservedPath path_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("path document must be an object");
  detail::reject_unknown_keys(j, {"m", "horizon", "price_segments", "adoption_times"}, "path");
  ObservedPath path;
  path.m = detail::required<Count>(j, "m", "path");
  path.horizon = detail::required<double>(j, "horizon", "path");
  path.adoption_times = detail::required<std::vector<double>>(j, "adoption_times", "path");
  std::vector<PriceSegment> segs;
  for (const auto& s : detail::required<json>(j, "price_segments", "path")) {
    detail::reject_unknown_keys(s, {"start", "end", "price"}, "price segment");
    segs.push_back({detail::required<double>(s, "start", "price segment"),
                    detail::required<double>(s, "end", "price segment"),
                    detail::required<double>(s, "price", "price segment")});
  }
  try {
    path.price_path = PricePath(std::move(segs));
    path.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid path: ") + e.what());
  }
  return path;
}

/// CSV layout:
///   #m=<int>,horizon=<float>
///   #segments
///   start,end,price
///   <rows>
///   #adoptions
///   <one time per line>
inline std::string path_to_csv(const ObservedPath& path) {
  std::string out = "#m=" + std::to_string(path.m) + ",horizon=" + format_double(path.horizon) +
                    "\n#segments\nstart,end,price\n";
  for (const auto& s : path.price_path.segments())
    out += format_double(s.start) + "," + format_double(s.end) + "," + format_double(s.price) + "\n";
  out += "#adoptions\n";
  for (double t : path.adoption_times) out += format_double(t) + "\n";
  return out;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  return out;
}

inline std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

inline std::vector<PriceSegment> parse_segment_rows(const std::vector<std::string>& rows) {
  std::vector<PriceSegment> segs;
  for (const auto& row : rows) {
    const auto f = split(row, ',');
    if (f.size() != 3) throw FormatError("segment row needs 3 fields: '" + row + "'");
    segs.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2])});
  }
  return segs;
}

inline ObservedPath path_from_csv(const std::string& text) {
  const auto lines = lines_of(text);
  if (lines.size() < 3 || lines[0].rfind("#m=", 0) != 0)
    throw FormatError("CSV path must start with '#m=<int>,horizon=<float>'");
  const auto head = split(lines[0].substr(1), ',');
  if (head.size() != 2 || head[1].rfind("horizon=", 0) != 0)
    throw FormatError("bad CSV header line");
  ObservedPath path;
  try {
    path.m = std::stoll(head[0].substr(2));
  } catch (const std::exception&) {
    throw FormatError("bad market size in CSV header");
  }
  path.horizon = parse_double(head[1].substr(8));
  if (lines[1] != "#segments" || lines[2] != "start,end,price")
    throw FormatError("expected '#segments' then 'start,end,price'");
  std::size_t k = 3;
  std::vector<std::string> rows;
  for (; k < lines.size() && lines[k] != "#adoptions"; ++k) rows.push_back(lines[k]);
  if (k == lines.size()) throw FormatError("missing '#adoptions' section");
  for (++k; k < lines.size(); ++k) path.adoption_times.push_back(parse_double(lines[k]));
  try {
    path.price_path = PricePath(parse_segment_rows(rows));
    path.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid path: ") + e.what());
  }
  return path;
}

inline bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline ObservedPath read_path(const std::string& file) {
  const auto text = read_file(file);
  if (has_suffix(file, ".csv")) return path_from_csv(text);
  try {
    return path_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bad JSON in ") + file + ": " + e.what());
  }
}

inline void write_path(const std::string& file, const ObservedPath& path) {
  write_file(file, has_suffix(file, ".csv") ? path_to_csv(path) : path_to_json(path).dump(2) + "\n");
}

/// Price schedule CSV with header `start,end,price`.
inline PricePath read_price_csv(const std::string& file) {
  auto lines = lines_of(read_file(file));
  if (lines.empty() || lines[0] != "start,end,price")
    throw FormatError("price file must start with 'start,end,price'");
  lines.erase(lines.begin());
  try {
    return PricePath(parse_segment_rows(lines));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid price file: ") + e.what());
  }
}

// ---- fit reports ----------------------------------------------------------

inline json fit_to_json(const FitResult& f) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"alpha_p_hat", num(f.tp_hat.alpha_p)},
          {"beta_p_hat", num(f.tp_hat.beta_p)},
          {"alpha_hat", num(f.natural_hat.alpha)},
          {"beta_hat", num(f.natural_hat.beta)},
          {"loglik", num(f.loglik)},
          {"std_err_alpha_p", num(f.std_errors[0])},
          {"std_err_beta_p", num(f.std_errors[1])},
          {"std_err_alpha", num(f.natural_std_errors[0])},
          {"std_err_beta", num(f.natural_std_errors[1])},
          {"gradient_norm", num(f.gradient_norm())},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"boundary", f.boundary},
          {"bracket", {num(f.bracket.first), num(f.bracket.second)}}};
}

// ---- experiment configs ---------------------------------------------------

inline ResponseSpec response_from_json(const json& j) {
  ResponseSpec r;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "const") return r;
    if (s == "exp") {
      r.kind = ResponseSpec::Kind::exponential;
      return r;
    }
    throw FormatError("x must be 'const' or 'exp'");
  }
  if (!j.is_object()) throw FormatError("x must be a string or an object");
  detail::reject_unknown_keys(j, {"kind", "scale"}, "x");
  const auto kind = detail::required<std::string>(j, "kind", "x");
  if (kind == "exp") r.kind = ResponseSpec::Kind::exponential;
  else if (kind != "const") throw FormatError("x.kind must be 'const' or 'exp'");
  if (j.contains("scale")) r.scale = detail::required<double>(j, "scale", "x");
  return r;
}

inline json response_to_json(const ResponseSpec& r) {
  if (r.kind == ResponseSpec::Kind::exponential) return {{"kind", "exp"}};
  return {{"kind", "const"}, {"scale", r.scale}};
}

inline PolicySpec policy_from_json(const json& j) {
  PolicySpec p;
  if (j.is_number()) {
    p.price = j.get<double>();
    return p;
  }
  if (!j.is_object()) throw FormatError("policy must be a number or an object");
  detail::reject_unknown_keys(j, {"kind", "price", "slope"}, "policy");
  const auto kind = detail::required<std::string>(j, "kind", "policy");
  if (kind == "state_feedback") p.kind = PolicySpec::Kind::state_feedback;
  else if (kind != "constant") throw FormatError("policy.kind must be 'constant' or 'state_feedback'");
  p.price = detail::required<double>(j, "price", "policy");
  if (j.contains("slope")) p.slope = detail::required<double>(j, "slope", "policy");
  return p;
}

inline json policy_to_json(const PolicySpec& p) {
  if (p.kind == PolicySpec::Kind::state_feedback)
    return {{"kind", "state_feedback"}, {"price", p.price}, {"slope", p.slope}};
  return {{"kind", "constant"}, {"price", p.price}};
}

/// Optional market-size sweep attached to an experiment config.
struct MInvarianceSpec {
  Count n = 0;
  std::vector<Count> m_grid;
};

struct RunConfig {
  ExperimentConfig experiment;
  DeltaBar delta_bar;
  std::optional<MInvarianceSpec> m_invariance;
};

/// Parses a run config. Truth is given as {alpha, beta, m} or
/// {alpha_p, beta_p, m}; unknown keys are rejected.
inline RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  detail::reject_unknown_keys(
      j, {"alpha", "beta", "alpha_p", "beta_p", "m", "x", "policy", "n_grid", "replications",
          "seed", "tail", "bootstrap_resamples", "threads", "delta_bar1", "delta_bar2",
          "m_invariance"},
      "config");
  RunConfig rc;
  auto& e = rc.experiment;
  const Count m = detail::required<Count>(j, "m", "config");
  const bool natural = j.contains("alpha") || j.contains("beta");
  const bool transformed = j.contains("alpha_p") || j.contains("beta_p");
  if (natural == transformed)
    throw FormatError("config needs exactly one of {alpha, beta} or {alpha_p, beta_p}");
  try {
    if (natural) {
      e.truth = {detail::required<double>(j, "alpha", "config"),
                 detail::required<double>(j, "beta", "config"), m};
    } else {
      e.truth = from_transformed({detail::required<double>(j, "alpha_p", "config"),
                                  detail::required<double>(j, "beta_p", "config")}, m);
    }
  } catch (const std::invalid_argument& ex) {
    throw FormatError(ex.what());
  }
  if (j.contains("x")) e.response = response_from_json(j.at("x"));
  if (j.contains("policy")) e.policy = policy_from_json(j.at("policy"));
  e.n_grid = detail::required<std::vector<Count>>(j, "n_grid", "config");
  e.replications = detail::required<Count>(j, "replications", "config");
  e.seed = detail::required<std::uint64_t>(j, "seed", "config");
  if (j.contains("tail")) e.tail = detail::required<double>(j, "tail", "config");
  if (j.contains("bootstrap_resamples"))
    e.bootstrap_resamples = detail::required<int>(j, "bootstrap_resamples", "config");
  if (j.contains("threads")) e.threads = detail::required<unsigned>(j, "threads", "config");
  if (j.contains("delta_bar1")) rc.delta_bar.alpha = detail::required<double>(j, "delta_bar1", "config");
  if (j.contains("delta_bar2")) rc.delta_bar.beta = detail::required<double>(j, "delta_bar2", "config");
  if (j.contains("m_invariance")) {
    const auto& mi = j.at("m_invariance");
    detail::reject_unknown_keys(mi, {"n", "m_grid"}, "m_invariance");
    rc.m_invariance = MInvarianceSpec{detail::required<Count>(mi, "n", "m_invariance"),
                                      detail::required<std::vector<Count>>(mi, "m_grid", "m_invariance")};
  }
  try {
    e.validate();
  } catch (const std::invalid_argument& ex) {
    throw FormatError(ex.what());
  }
  return rc;
}

inline json run_config_to_json(const RunConfig& rc) {
  const auto& e = rc.experiment;
  json j = {{"alpha", e.truth.alpha},
            {"beta", e.truth.beta},
            {"m", e.truth.m},
            {"x", response_to_json(e.response)},
            {"policy", policy_to_json(e.policy)},
            {"n_grid", e.n_grid},
            {"replications", e.replications},
            {"seed", e.seed},
            {"tail", e.tail},
            {"bootstrap_resamples", e.bootstrap_resamples},
            {"delta_bar1", rc.delta_bar.alpha},
            {"delta_bar2", rc.delta_bar.beta}};
  if (rc.m_invariance)
    j["m_invariance"] = {{"n", rc.m_invariance->n}, {"m_grid", rc.m_invariance->m_grid}};
  return j;
}

// ---- experiment reports ---------------------------------------------------

inline std::string report_to_csv(const MseReport& report) {
  std::string out =
      "n,replications,included,excluded,invalid,mse_alpha_p,mse_beta_p,mse_beta_natural,"
      "mse_total,mse_total_x_n_plus_1,mc_se_total,mc_se_beta_natural,mean_iterations\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.n) + "," + std::to_string(r.replications) + "," +
           std::to_string(r.included) + "," + std::to_string(r.excluded) + "," +
           (r.invalid ? "1" : "0") + "," + format_double(r.mse_alpha_p) + "," +
           format_double(r.mse_beta_p) + "," + format_double(r.mse_beta_natural) + "," +
           format_double(r.mse_total) + "," + format_double(r.scaled_total) + "," +
           format_double(r.mc_se_total) + "," + format_double(r.mc_se_beta_natural) + "," +
           format_double(r.mean_iterations) + "\n";
  }
  return out;
}

inline json slope_to_json(const SlopeEstimate& s) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"slope", num(s.slope)}, {"ci_low", num(s.ci_low)}, {"ci_high", num(s.ci_high)}};
}

inline json report_to_json(const RunConfig& rc, const MseReport& report, const BoundCheck& bound,
                           const std::optional<MInvarianceReport>& minv) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"n", r.n},
                    {"replications", r.replications},
                    {"included", r.included},
                    {"excluded", r.excluded},
                    {"invalid", r.invalid},
                    {"mse_alpha_p", num(r.mse_alpha_p)},
                    {"mse_beta_p", num(r.mse_beta_p)},
                    {"mse_beta_natural", num(r.mse_beta_natural)},
                    {"mse_total", num(r.mse_total)},
                    {"mse_total_x_n_plus_1", num(r.scaled_total)},
                    {"mc_se_total", num(r.mc_se_total)},
                    {"mc_se_beta_natural", num(r.mc_se_beta_natural)},
                    {"mean_iterations", num(r.mean_iterations)}});
  }
  json bound_rows = json::array();
  for (const auto& b : bound.rows)
    bound_rows.push_back({{"n", b.n}, {"mse_total", num(b.mse_total)}, {"bound", num(b.bound)}, {"pass", b.pass}});
  json j = {{"config", run_config_to_json(rc)},
            {"rows", rows},
            {"slope_total", slope_to_json(report.total_slope)},
            {"slope_beta_natural", slope_to_json(report.beta_natural_slope)},
            {"slope_scaled_total", slope_to_json(report.scaled_slope)},
            {"scaled_ratio", num(report.scaled_ratio)},
            {"scaled_no_upward_trend", report.scaled_no_upward_trend},
            {"bound_check",
             {{"alpha_theta", num(bound.alpha_theta)},
              {"empirical_constant", num(bound.empirical_constant)},
              {"all_pass", bound.all_pass},
              {"required_delta_bar", num(bound.required_delta_bar)},
              {"rows", bound_rows}}}};
  if (minv) {
    json mrows = json::array();
    for (const auto& r : minv->rows)
      mrows.push_back({{"m", r.m},
                       {"mse_total", num(r.row.mse_total)},
                       {"included", r.row.included},
                       {"excluded", r.row.excluded}});
    j["m_invariance"] = {{"n", minv->n}, {"slope", num(minv->slope)}, {"spread", num(minv->spread)},
                         {"pass", minv->pass}, {"rows", mrows}};
  }
  return j;
}

/// Reads the rows of a report.json back into an MseReport (rows only).
inline MseReport report_from_json(const json& j) {
  MseReport report;
  for (const auto& r : detail::required<json>(j, "rows", "report")) {
    MseRow row;
    row.n = detail::required<Count>(r, "n", "report row");
    auto get = [&](const char* key) {
      const auto& v = r.at(key);
      return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
    };
    row.mse_total = get("mse_total");
    row.scaled_total = get("mse_total_x_n_plus_1");
    row.mse_alpha_p = get("mse_alpha_p");
    row.mse_beta_p = get("mse_beta_p");
    row.mse_beta_natural = get("mse_beta_natural");
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace bassmle::io
