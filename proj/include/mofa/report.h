#pragma once
#include <string>
#include <vector>

#include "json.hpp"
#include "mofa/analyzer.h"
#include "mofa/passes.h"

namespace mofa {

inline constexpr const char* kBenchLabel =
    "reference kernels — not comparable to paper runtimes";

struct BenchRow {
  std::string kind;
  Dims4 shape;
  double median_ms = 0.0;
  int iterations = 0;
  double iqr_ms = 0.0;
  std::uint64_t multiplies = 0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  std::string environment;
  std::string label = kBenchLabel;
};

// one bar per layer in topological order, y = mac_share; byte-deterministic
std::string render_distribution_svg(const CostReport& r);
void emit_distribution_chart(const CostReport& r, const std::string& path);

// format is csv | json | markdown; markdown cell values are the exact strings
// the csv uses, so the two round-trip
std::string trajectory_table(const PassTrace& t, const std::string& format);
void emit_trajectory_table(const PassTrace& t, const std::string& format,
                           const std::string& path);

// times the reference kernels; median over >=30 iterations per case, split of
// the wall-clock budget across cases; multiply counts come along so cost
// ratios can be read off next to the timings
BenchResult microbench(const std::vector<std::string>& kinds,
                       const std::vector<Dims4>& shapes,
                       double budget_seconds);

nlohmann::ordered_json bench_to_json(const BenchResult& b);
std::string bench_to_text(const BenchResult& b);

// published numbers from the MOFA roadmap publication, quoted verbatim for
// side-by-side reading; nothing here is measured by this tool
std::string reference_citation_text();

void write_text_file(const std::string& path, const std::string& content);

}  // namespace mofa
