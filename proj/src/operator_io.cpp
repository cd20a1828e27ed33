#include "specflow/operator_io.hpp"

#include "specflow/errors.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace specflow {

std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

namespace {

template <typename Get>
void write_array(std::ostringstream& out, Eigen::Index count, Get get) {
  out << '[';
  for (Eigen::Index i = 0; i < count; ++i) {
    if (i) out << ", ";
    out << format_real(get(i));
  }
  out << ']';
}

std::vector<double> read_numbers(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw InvalidInput(std::string("operator text: missing array field '") + key + "'");
  }
  std::vector<double> out;
  for (const auto& v : doc[key]) {
    if (!v.is_number()) throw InvalidInput(std::string("operator text: non-numeric entry in ") + key);
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string to_text(const FramedOperator& a) {
  const Eigen::Index n = a.dim();
  const Matrix& m = a.block();
  std::ostringstream out;
  out << "{\n  \"n\": " << n << ",\n  \"real_parts\": ";
  write_array(out, n * n, [&](Eigen::Index k) { return m(k / n, k % n).real(); });
  out << ",\n  \"imag_parts\": ";
  write_array(out, n * n, [&](Eigen::Index k) { return m(k / n, k % n).imag(); });
  out << ",\n  \"essential_points\": ";
  const auto& ess = a.essential_points();
  write_array(out, static_cast<Eigen::Index>(ess.size()),
              [&](Eigen::Index k) { return ess[static_cast<std::size_t>(k)]; });
  out << "\n}\n";
  return out.str();
}

FramedOperator operator_from_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("operator text: ") + e.what());
  }
  if (!doc.contains("n") || !doc["n"].is_number_integer() || doc["n"].get<long long>() < 0) {
    throw InvalidInput("operator text: field 'n' must be a non-negative integer");
  }
  const auto n = static_cast<Eigen::Index>(doc["n"].get<long long>());
  const auto re = read_numbers(doc, "real_parts");
  const auto im = read_numbers(doc, "imag_parts");
  if (static_cast<Eigen::Index>(re.size()) != n * n || static_cast<Eigen::Index>(im.size()) != n * n) {
    throw InvalidInput("operator text: real_parts/imag_parts must have n*n entries");
  }
  std::vector<double> ess;
  if (doc.contains("essential_points")) ess = read_numbers(doc, "essential_points");
  Matrix m(n, n);
  for (Eigen::Index k = 0; k < n * n; ++k) {
    m(k / n, k % n) = Complex(re[static_cast<std::size_t>(k)], im[static_cast<std::size_t>(k)]);
  }
  return FramedOperator(std::move(m), std::move(ess));
}

void write_operator(const std::filesystem::path& path, const FramedOperator& a) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out << to_text(a);
}

FramedOperator read_operator(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return operator_from_text(buf.str());
}

}  // namespace specflow
