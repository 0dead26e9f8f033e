#pragma once

#include <string>
#include <vector>

#include "sbl/diagnostics.hpp"
#include "sbl/driver.hpp"
#include "sbl/stationarity.hpp"

namespace sbl {

/// Shortest decimal text that parses back to exactly `x`.
std::string format_double(double x);

/// Line-oriented `key=value` rendering; vectors are comma-separated.
std::string report_to_key_value(const SBKKTReport& rep);
std::string report_to_json(const SBKKTReport& rep);

std::string assumptions_to_json(const AssumptionReport& rep);

/// Header `k,mu,lambda_change,cond,sparsity,f,lambda_1,...`.
std::string trace_to_csv(const std::vector<TraceRow>& rows);
std::string trace_to_json(const std::vector<TraceRow>& rows);

/// One value per line.
std::string vector_to_text(const Vector& v);
/// Accepts one value per line or comma/whitespace separated values.
Vector parse_vector_text(const std::string& text);

}  // namespace sbl
