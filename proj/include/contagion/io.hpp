#pragma once

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contagion/error.hpp"
#include "contagion/loss_engine.hpp"
#include "contagion/pricing.hpp"
#include "contagion/reference_models.hpp"
#include "contagion/simulation.hpp"

namespace contagion {

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline int parse_int(const std::string& text, const std::string& source, int line, const std::string& field) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(source, line, field, "expected an integer, got '" + text + "'");
  }
}

inline double parse_real(const std::string& text, const std::string& source, int line, const std::string& field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(source, line, field, "expected a number, got '" + text + "'");
  }
}

inline Rational parse_exact(const std::string& text, const std::string& source, int line, const std::string& field) {
  try {
    return parse_rational(text);
  } catch (const DomainError& e) {
    throw ParseError(source, line, field, e.what());
  }
}

}  // namespace detail

// Flat key = value model description:
//   n, T, p, q, sigma_x | variance_x, sigma_y | variance_y,
//   f_threshold | f_table (comma separated), g_rule (fresh|domino|custom),
//   g_table (rows u = 0,1,.. separated by ';', entries l = 0,1,.. by ',').
// Numbers are read exactly, so p = 0.1 means 1/10.
inline ModelSpec parse_model(std::istream& in, const std::string& source = "<model>") {
  std::map<std::string, std::pair<std::string, int>> kv;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    raw = detail::trim(raw);
    if (raw.empty()) continue;
    const auto eq = raw.find_first_of("=:");
    if (eq == std::string::npos) throw ParseError(source, line, "", "expected key = value");
    const std::string key = detail::trim(raw.substr(0, eq));
    const std::string value = detail::trim(raw.substr(eq + 1));
    static const char* known[] = {"n", "T", "p", "q", "sigma_x", "sigma_y", "variance_x", "variance_y",
                                  "f_threshold", "f_table", "g_rule", "g_table"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known))
      throw ParseError(source, line, key, "unknown key");
    if (value.empty()) throw ParseError(source, line, key, "missing value");
    if (kv.count(key)) throw ParseError(source, line, key, "duplicate key");
    kv[key] = {value, line};
  }
  auto need = [&](const std::string& key) -> const std::pair<std::string, int>& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(source, line, key, "required key missing");
    return it->second;
  };
  auto exact = [&](const std::string& key) {
    const auto& [v, l] = need(key);
    return detail::parse_exact(v, source, l, key);
  };

  ModelSpec spec;
  spec.n = detail::parse_int(need("n").first, source, need("n").second, "n");
  spec.periods = detail::parse_int(need("T").first, source, need("T").second, "T");

  auto law = [&](const std::string& mean_key, const std::string& sd_key, const std::string& var_key) {
    const Rational mean = exact(mean_key);
    Rational var(0);
    if (kv.count(sd_key) && kv.count(var_key))
      throw ParseError(source, kv[var_key].second, var_key, "give either " + sd_key + " or " + var_key);
    if (kv.count(sd_key)) {
      const Rational sd = exact(sd_key);
      if (sd < 0) throw ParseError(source, kv[sd_key].second, sd_key, "must be nonnegative");
      var = sd * sd;
    } else if (kv.count(var_key)) {
      var = exact(var_key);
    }
    try {
      return MixingLaw::from_variance(mean, var);
    } catch (const DomainError& e) {
      const std::string key = kv.count(sd_key) ? sd_key : kv.count(var_key) ? var_key : mean_key;
      throw ParseError(source, kv[key].second, key, e.what());
    }
  };
  spec.direct = law("p", "sigma_x", "variance_x");
  spec.infection = law("q", "sigma_y", "variance_y");

  InfectorRule g = InfectorRule::fresh_only;
  if (kv.count("g_rule")) {
    const auto& [v, l] = kv["g_rule"];
    if (v == "fresh") g = InfectorRule::fresh_only;
    else if (v == "domino") g = InfectorRule::domino;
    else if (v == "custom") g = InfectorRule::custom;
    else throw ParseError(source, l, "g_rule", "expected fresh, domino or custom");
  }
  const bool has_g_table = kv.count("g_table") > 0;
  if ((g == InfectorRule::custom) != has_g_table) {
    const int l = has_g_table ? kv["g_table"].second : kv["g_rule"].second;
    throw ParseError(source, l, "g_table", "g_table goes with g_rule = custom and only then");
  }

  if (kv.count("f_threshold") && kv.count("f_table"))
    throw ParseError(source, kv["f_table"].second, "f_table", "give either f_threshold or f_table");
  if (kv.count("f_table")) {
    const auto& [v, l] = kv["f_table"];
    std::vector<int> table;
    for (const auto& cell : detail::split(v, ',')) table.push_back(detail::parse_int(cell, source, l, "f_table"));
    try {
      spec.rule = InfectionRule::table(table, g == InfectorRule::custom ? InfectorRule::fresh_only : g);
    } catch (const DomainError& e) {
      throw ParseError(source, l, "f_table", e.what());
    }
  } else {
    int theta = 1;
    if (kv.count("f_threshold"))
      theta = detail::parse_int(kv["f_threshold"].first, source, kv["f_threshold"].second, "f_threshold");
    try {
      spec.rule = InfectionRule::threshold(theta, g == InfectorRule::custom ? InfectorRule::fresh_only : g);
    } catch (const DomainError& e) {
      throw ParseError(source, kv["f_threshold"].second, "f_threshold", e.what());
    }
  }
  if (g == InfectorRule::custom) {
    const auto& [v, l] = kv["g_table"];
    std::vector<std::vector<int>> rows;
    for (const auto& row : detail::split(v, ';')) {
      std::vector<int> cells;
      for (const auto& cell : detail::split(row, ',')) cells.push_back(detail::parse_int(cell, source, l, "g_table"));
      rows.push_back(std::move(cells));
    }
    spec.rule = spec.rule.with_custom_g(std::move(rows));
  }
  try {
    spec.validate();
  } catch (const DomainError& e) {
    throw ParseError(source, line, "", e.what());
  }
  return spec;
}

inline ModelSpec load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "", "cannot open model file");
  return parse_model(in, path);
}

// Quote CSV: '# key=value' metadata lines (as_of, maturity, frequency, rate,
// recovery, names), then `instrument,attachment,detachment,quote,unit`.
inline QuoteSet parse_quotes(std::istream& in, const std::string& source = "<quotes>") {
  QuoteSet qs;
  std::string raw;
  int line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    std::string text = detail::trim(raw);
    if (text.empty()) continue;
    if (text.front() == '#') {
      text = detail::trim(text.substr(1));
      const auto eq = text.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = detail::trim(text.substr(0, eq));
      const std::string value = detail::trim(text.substr(eq + 1));
      if (key == "as_of") qs.as_of = value;
      else if (key == "maturity") qs.maturity = detail::parse_real(value, source, line, key);
      else if (key == "frequency") qs.frequency = detail::parse_int(value, source, line, key);
      else if (key == "rate") qs.rate = detail::parse_real(value, source, line, key);
      else if (key == "recovery") qs.recovery = detail::parse_real(value, source, line, key);
      else if (key == "names") qs.names = detail::parse_int(value, source, line, key);
      else throw ParseError(source, line, key, "unknown metadata key");
      continue;
    }
    const auto cells = detail::split(text, ',');
    if (!header) {
      if (cells != std::vector<std::string>{"instrument", "attachment", "detachment", "quote", "unit"})
        throw ParseError(source, line, "", "expected header instrument,attachment,detachment,quote,unit");
      header = true;
      continue;
    }
    if (cells.size() != 5) throw ParseError(source, line, "", "expected 5 fields");
    Instrument ins;
    ins.name = cells[0];
    if (ins.name.empty()) throw ParseError(source, line, "instrument", "empty name");
    ins.tranche.attachment = detail::parse_real(cells[1], source, line, "attachment");
    ins.tranche.detachment = detail::parse_real(cells[2], source, line, "detachment");
    ins.quote = detail::parse_real(cells[3], source, line, "quote");
    if (cells[4] == "bp") ins.tranche.unit = QuoteUnit::running_bp;
    else if (cells[4] == "pct-upfront") ins.tranche.unit = QuoteUnit::upfront_pct;
    else throw ParseError(source, line, "unit", "expected bp or pct-upfront");
    try {
      ins.tranche.validate();
    } catch (const DomainError& e) {
      throw ParseError(source, line, "detachment", e.what());
    }
    if (!(ins.quote > 0.0)) throw ParseError(source, line, "quote", "must be positive");
    qs.instruments.push_back(ins);
  }
  if (!header) throw ParseError(source, line, "", "missing header line");
  try {
    qs.validate();
  } catch (const DomainError& e) {
    throw ParseError(source, line, "", e.what());
  }
  return qs;
}

inline QuoteSet load_quotes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "", "cannot open quote file");
  return parse_quotes(in, path);
}

inline std::string format_probability(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

// Exact value rounded (half away from zero) to 15 significant digits, laid
// out like %.15g.
inline std::string format_probability(const Rational& v) {
  if (v == 0) return "0";
  const bool negative = v < 0;
  const Rational a = negative ? Rational(-v) : v;
  long e = static_cast<long>(std::floor(std::log10(a.get_d())));
  mpz_class digits;
  auto scaled = [&](long exp10) {
    mpz_class pow;
    mpz_ui_pow_ui(pow.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(exp10)));
    Rational x = exp10 >= 0 ? Rational(a * pow) : Rational(a / pow);
    mpz_class q = (x.get_num() * 2 + x.get_den()) / (x.get_den() * 2);
    return q;
  };
  const mpz_class lo("100000000000000"), hi("1000000000000000");
  for (int iter = 0; iter < 4; ++iter) {
    digits = scaled(14 - e);
    if (digits >= hi) ++e;
    else if (digits < lo) --e;
    else break;
  }
  std::string d = digits.get_str();
  while (d.size() > 1 && d.back() == '0') d.pop_back();
  std::string out = negative ? "-" : "";
  if (e < -4 || e >= 15) {
    out += d.substr(0, 1);
    if (d.size() > 1) out += "." + d.substr(1);
    char buf[32];
    std::snprintf(buf, sizeof buf, "e%c%02ld", e < 0 ? '-' : '+', std::labs(e));
    out += buf;
  } else if (e < 0) {
    out += "0." + std::string(static_cast<std::size_t>(-e - 1), '0') + d;
  } else {
    const auto int_digits = static_cast<std::size_t>(e + 1);
    if (d.size() <= int_digits) {
      out += d + std::string(int_digits - d.size(), '0');
    } else {
      out += d.substr(0, int_digits) + "." + d.substr(int_digits);
    }
  }
  return out;
}

template <typename S>
void write_surface_csv(std::ostream& out, const LossSurface<S>& surface) {
  out << "t,r,probability\n";
  for (int t = 0; t <= surface.periods(); ++t)
    for (int r = 0; r <= surface.n; ++r) out << t << ',' << r << ',' << format_probability(surface.rows[t][r]) << '\n';
}

inline void write_rational_sidecar(std::ostream& out, const LossSurface<Rational>& surface) {
  out << "t,r,probability\n";
  for (int t = 0; t <= surface.periods(); ++t)
    for (int r = 0; r <= surface.n; ++r) out << t << ',' << r << ',' << surface.rows[t][r].get_str() << '\n';
}

inline LossSurface<double> read_surface_csv(std::istream& in, const std::string& source = "<surface>") {
  std::string raw;
  int line = 0;
  std::vector<std::tuple<int, int, double>> cells;
  bool header = false;
  int max_t = -1, max_r = -1;
  while (std::getline(in, raw)) {
    ++line;
    raw = detail::trim(raw);
    if (raw.empty()) continue;
    if (!header) {
      if (raw != "t,r,probability") throw ParseError(source, line, "", "expected header t,r,probability");
      header = true;
      continue;
    }
    const auto f = detail::split(raw, ',');
    if (f.size() != 3) throw ParseError(source, line, "", "expected 3 fields");
    const int t = detail::parse_int(f[0], source, line, "t");
    const int r = detail::parse_int(f[1], source, line, "r");
    if (t < 0 || r < 0) throw ParseError(source, line, "", "negative index");
    cells.emplace_back(t, r, detail::parse_real(f[2], source, line, "probability"));
    max_t = std::max(max_t, t);
    max_r = std::max(max_r, r);
  }
  if (cells.empty()) throw ParseError(source, line, "", "no rows");
  LossSurface<double> s;
  s.n = max_r;
  s.rows.assign(static_cast<std::size_t>(max_t) + 1, std::vector<double>(static_cast<std::size_t>(max_r) + 1, 0.0));
  for (const auto& [t, r, v] : cells) s.rows[t][r] = v;
  return s;
}

inline void write_empirical_csv(std::ostream& out, const EmpiricalSurface& surface) {
  const auto stats = empirical_stats(surface);
  out << "t,r,count,frequency,se\n";
  for (std::size_t t = 0; t < surface.counts.size(); ++t)
    for (std::size_t r = 0; r < surface.counts[t].size(); ++r)
      out << t << ',' << r << ',' << surface.counts[t][r] << ',' << format_probability(stats[t].frequency[r]) << ','
          << format_probability(stats[t].frequency_se[r]) << '\n';
}

inline void write_figures_csv(std::ostream& out, const std::vector<FigureRow>& rows) {
  out << "model,t,mean,variance,p_ge_6,p_eq_n\n";
  for (const auto& r : rows)
    out << r.model << ',' << r.t << ',' << format_probability(r.mean) << ',' << format_probability(r.variance) << ','
        << format_probability(r.p_ge_6) << ',' << format_probability(r.p_eq_n) << '\n';
}

inline nlohmann::json params_json(const ModelParams& m) {
  return {{"p", m.p}, {"sigma_x", m.sigma_x}, {"q", m.q}};
}

inline nlohmann::json calibration_json(const CalibrationResult& r, const QuoteSet& quotes) {
  nlohmann::json instruments = nlohmann::json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    const auto& ins = quotes.instruments[i];
    instruments.push_back({{"instrument", r.names[i]},
                           {"attachment", ins.tranche.attachment},
                           {"detachment", ins.tranche.detachment},
                           {"unit", ins.tranche.unit == QuoteUnit::upfront_pct ? "pct-upfront" : "bp"},
                           {"market", r.market[i]},
                           {"model", r.model[i]},
                           {"included", static_cast<bool>(r.included[i])}});
  }
  nlohmann::json starts = nlohmann::json::array();
  for (const auto& s : r.starts)
    starts.push_back({{"start", params_json(s.start)},
                      {"best", params_json(s.best)},
                      {"rmse", s.rmse},
                      {"evaluations", s.evaluations},
                      {"restarts", s.restarts},
                      {"converged", s.converged}});
  return {{"as_of", quotes.as_of},
          {"variant", r.variant},
          {"alpha_star", params_json(r.alpha_star)},
          {"rmse", r.rmse},
          {"instruments", instruments},
          {"diagnostics",
           {{"converged", r.converged}, {"restarts", r.restarts}, {"iterations", r.iterations}, {"starts", starts}}}};
}

// Market row, one row per variant with excluded instruments dashed, then the
// fitted parameters.
inline void write_calibration_table(std::ostream& out, const QuoteSet& quotes,
                                    const std::vector<CalibrationResult>& results) {
  auto cell = [](const std::string& s) {
    std::ostringstream o;
    o << std::setw(12) << s;
    return o.str();
  };
  auto num = [](double v, int digits) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << v;
    return o.str();
  };
  out << std::left << std::setw(16) << "" << std::right;
  for (const auto& ins : quotes.instruments) out << cell(ins.name);
  out << cell("RMSE") << '\n';
  out << std::left << std::setw(16) << "Market quotes" << std::right;
  for (const auto& ins : quotes.instruments) out << cell(num(ins.quote, 2));
  out << cell("-") << '\n';
  for (const auto& r : results) {
    out << std::left << std::setw(16) << ("Calibration " + std::to_string(r.variant)) << std::right;
    for (std::size_t i = 0; i < r.model.size(); ++i) out << cell(r.included[i] ? num(r.model[i], 2) : "-");
    out << cell(num(r.rmse, 6)) << '\n';
  }
  out << '\n' << std::left << std::setw(16) << "" << std::right << cell("p*") << cell("sigma_X*") << cell("q*") << '\n';
  for (const auto& r : results) {
    out << std::left << std::setw(16) << ("Calibration " + std::to_string(r.variant)) << std::right
        << cell(num(r.alpha_star.p, 6)) << cell(num(r.alpha_star.sigma_x, 6)) << cell(num(r.alpha_star.q, 6))
        << (r.converged ? "" : "  (not converged)") << '\n';
  }
}

}  // namespace contagion
