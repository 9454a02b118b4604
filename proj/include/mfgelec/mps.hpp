#pragma once

#include <fmt/core.h>

#include <string>
#include <vector>

#include "mfgelec/errors.hpp"
#include "mfgelec/lp.hpp"

namespace mfgelec {

/// Free-format MPS text of a LinearProgram. Column and row
/// names come from the program when present, else C<j> / R<i>.
inline std::string to_mps(const LinearProgram& lp, const std::string& name = "MFGELEC") {
  lp.check();
  const std::size_t m = lp.rows(), n = lp.columns();
  auto col = [&](std::size_t j) { return lp.column_names.size() == n ? lp.column_names[j] : fmt::format("C{}", j); };
  auto row = [&](std::size_t i) { return lp.row_names.size() == m ? lp.row_names[i] : fmt::format("R{}", i); };
  auto num = [](double v) { return fmt::format("{:.17g}", v); };

  // Column-major view of A.
  std::vector<std::vector<std::pair<std::size_t, double>>> cols(n);
  for (std::size_t i = 0; i < m; ++i) lp.A.for_row(i, [&](std::size_t j, double v) { cols[j].emplace_back(i, v); });

  std::string s = "NAME " + name + "\nOBJSENSE\n    MAX\nROWS\n N  OBJ\n";
  for (std::size_t i = 0; i < m; ++i) s += " E  " + row(i) + "\n";
  s += "COLUMNS\n";
  for (std::size_t j = 0; j < n; ++j) {
    if (lp.c[j] != 0.0) s += "    " + col(j) + "  OBJ  " + num(lp.c[j]) + "\n";
    for (const auto& [i, v] : cols[j]) s += "    " + col(j) + "  " + row(i) + "  " + num(v) + "\n";
  }
  s += "RHS\n";
  for (std::size_t i = 0; i < m; ++i)
    if (lp.b[i] != 0.0) s += "    RHS  " + row(i) + "  " + num(lp.b[i]) + "\n";
  s += "ENDATA\n";
  return s;
}

}  // namespace mfgelec
