#include "sbl/report_io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace sbl {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

namespace {

std::string join(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v(i));
  }
  return s;
}

json to_json_array(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

const char* kBlockNames[6] = {"stationarity_w", "scaled_lower", "eta1",
                              "zeta_active",    "eta_rest",     "complementarity"};

}  // namespace

std::string report_to_key_value(const SBKKTReport& rep) {
  std::ostringstream out;
  out << "multipliers=" << to_string(rep.source) << '\n';
  out << "tolerance=" << format_double(rep.tolerance) << '\n';
  out << "scale=" << format_double(rep.scale) << '\n';
  out << "cond=" << format_double(rep.cond) << '\n';
  out << "active=";
  for (std::size_t k = 0; k < rep.active.indices.size(); ++k) {
    if (k) out << ',';
    out << rep.active.indices[k];
  }
  out << '\n';
  for (std::size_t b = 0; b < 6; ++b) {
    out << "block" << b + 1 << '.' << kBlockNames[b]
        << ".violation=" << format_double(rep.block_violation[b]) << '\n';
    out << "block" << b + 1 << '.' << kBlockNames[b]
        << ".pass=" << (rep.pass[b] ? "true" : "false") << '\n';
  }
  out << "res_stationarity_w=" << join(rep.res_stationarity_w) << '\n';
  out << "res_scaled_lower=" << join(rep.res_scaled_lower) << '\n';
  out << "res_eta1=" << format_double(rep.res_eta1) << '\n';
  out << "res_zeta_active=" << join(rep.res_zeta_active) << '\n';
  out << "res_eta_rest=" << join(rep.res_eta_rest) << '\n';
  out << "res_complementarity=" << format_double(rep.res_complementarity)
      << '\n';
  out << "w=" << join(rep.w) << '\n';
  out << "lambda=" << join(rep.lambda) << '\n';
  out << "zeta=" << join(rep.mult.zeta) << '\n';
  out << "eta=" << join(rep.mult.eta) << '\n';
  out << "all_pass=" << (rep.all_pass() ? "true" : "false") << '\n';
  return out.str();
}

std::string report_to_json(const SBKKTReport& rep) {
  json j;
  j["multipliers"] = to_string(rep.source);
  j["tolerance"] = rep.tolerance;
  j["scale"] = rep.scale;
  j["cond"] = rep.cond;
  j["active"] = rep.active.indices;
  json blocks = json::array();
  for (std::size_t b = 0; b < 6; ++b) {
    blocks.push_back({{"name", kBlockNames[b]},
                      {"violation", rep.block_violation[b]},
                      {"pass", rep.pass[b]}});
  }
  j["blocks"] = blocks;
  j["res_stationarity_w"] = to_json_array(rep.res_stationarity_w);
  j["res_scaled_lower"] = to_json_array(rep.res_scaled_lower);
  j["res_eta1"] = rep.res_eta1;
  j["res_zeta_active"] = to_json_array(rep.res_zeta_active);
  j["res_eta_rest"] = to_json_array(rep.res_eta_rest);
  j["res_complementarity"] = rep.res_complementarity;
  j["w"] = to_json_array(rep.w);
  j["lambda"] = to_json_array(rep.lambda);
  j["zeta"] = to_json_array(rep.mult.zeta);
  j["eta"] = to_json_array(rep.mult.eta);
  j["all_pass"] = rep.all_pass();
  return j.dump(2) + "\n";
}

std::string assumptions_to_json(const AssumptionReport& rep) {
  json j;
  j["A1"] = {{"tail_min_lambda1", rep.a1_tail_min}, {"ok", rep.a1_ok}};
  j["A2"] = {{"max_norm", rep.a2_max_norm}, {"ok", rep.a2_ok}};
  j["A3"] = {{"applicable", rep.a3_applicable},
             {"margins", rep.a3_margins},
             {"ok", rep.a3_ok}};
  j["A4"] = {{"min_singular_value", rep.a4_min_singular_value},
             {"columns", rep.a4_columns},
             {"ok", rep.a4_ok}};
  return j.dump(2) + "\n";
}

std::string trace_to_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  out << "k,mu,lambda_change,cond,sparsity,f";
  const Eigen::Index r = rows.empty() ? 0 : rows.front().lambda.size();
  for (Eigen::Index j = 0; j < r; ++j) out << ",lambda_" << j + 1;
  out << '\n';
  for (const auto& row : rows) {
    out << row.k << ',' << format_double(row.mu) << ','
        << format_double(row.lambda_change) << ',' << format_double(row.cond)
        << ',' << format_double(row.sparsity) << ','
        << format_double(row.upper_value);
    for (Eigen::Index j = 0; j < row.lambda.size(); ++j) {
      out << ',' << format_double(row.lambda(j));
    }
    out << '\n';
  }
  return out.str();
}

std::string trace_to_json(const std::vector<TraceRow>& rows) {
  json a = json::array();
  for (const auto& row : rows) {
    a.push_back({{"k", row.k},
                 {"mu", row.mu},
                 {"lambda_change", row.lambda_change},
                 {"cond", row.cond},
                 {"sparsity", row.sparsity},
                 {"f", row.upper_value},
                 {"lambda", to_json_array(row.lambda)}});
  }
  return a.dump(2) + "\n";
}

std::string vector_to_text(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    s += format_double(v(i));
    s += '\n';
  }
  return s;
}

Vector parse_vector_text(const std::string& text) {
  std::vector<double> vals;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] != ',' && text[j] != '\n' &&
           text[j] != ' ' && text[j] != '\t' && text[j] != '\r') {
      ++j;
    }
    const char* first = text.data() + i;
    if (*first == '+') ++first;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(first, text.data() + j, v);
    if (ec != std::errc{} || ptr != text.data() + j || !std::isfinite(v)) {
      throw ParseError("invalid number '" + text.substr(i, j - i) + "'", line);
    }
    vals.push_back(v);
    i = j;
  }
  Vector out(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) {
    out(static_cast<Eigen::Index>(k)) = vals[k];
  }
  return out;
}

}  // namespace sbl
