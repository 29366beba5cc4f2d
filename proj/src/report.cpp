#include "mofa/report.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "mofa/interpreter.h"

#ifdef __linux__
#include <sched.h>
#endif

namespace mofa {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw Error(ErrorCode::io_error, "cannot open '" + path + "' for writing");
  }
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!f) {
    throw Error(ErrorCode::io_error, "failed writing '" + path + "'");
  }
}

namespace {

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

const char* stage_color(const std::string& stage) {
  if (stage.rfind("enc", 0) == 0) return "#2b6cb0";
  if (stage.rfind("dec", 0) == 0) return "#c05621";
  if (stage == "middle") return "#6b46c1";
  return "#718096";
}

}  // namespace

std::string render_distribution_svg(const CostReport& r) {
  if (r.per_layer.empty()) {
    throw Error(ErrorCode::empty_report, "cannot chart an empty report");
  }
  const int n = static_cast<int>(r.per_layer.size());
  const int slot = 16, bar = 12;
  const int ml = 56, mr = 16, mt = 44, mb = 70;
  const int plot_h = 260;
  const int width = ml + n * slot + mr;
  const int height = mt + plot_h + mb;
  double max_share = 0.0;
  for (const auto& row : r.per_layer) max_share = std::max(max_share, row.mac_share);
  if (max_share <= 0.0) max_share = 1.0;

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
       std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  s += "<text x=\"" + std::to_string(ml) +
       "\" y=\"18\" font-family=\"monospace\" font-size=\"13\">per-layer "
       "share of total compute (" +
       convention_name(r.convention) + ")</text>\n";
  s += "<text x=\"" + std::to_string(ml) +
       "\" y=\"34\" font-family=\"monospace\" font-size=\"11\" "
       "fill=\"#555555\">" +
       std::string(kConventionNote) + "; input " +
       dims_to_string(r.input_shape) + "</text>\n";
  // y axis
  const int y0 = mt + plot_h;
  s += "<line x1=\"" + std::to_string(ml - 4) + "\" y1=\"" +
       std::to_string(y0) + "\" x2=\"" + std::to_string(width - mr) +
       "\" y2=\"" + std::to_string(y0) +
       "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  s += "<text x=\"4\" y=\"" + std::to_string(mt + 4) +
       "\" font-family=\"monospace\" font-size=\"10\">" +
       fmt(max_share * 100.0) + "%</text>\n";
  s += "<text x=\"4\" y=\"" + std::to_string(y0) +
       "\" font-family=\"monospace\" font-size=\"10\">0%</text>\n";
  for (int i = 0; i < n; ++i) {
    const auto& row = r.per_layer[static_cast<std::size_t>(i)];
    const double frac = row.mac_share / max_share;
    const int h = static_cast<int>(frac * plot_h + 0.5);
    const int x = ml + i * slot + (slot - bar) / 2;
    const int y = y0 - h;
    s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
         "\" width=\"" + std::to_string(bar) + "\" height=\"" +
         std::to_string(h) + "\" fill=\"" + stage_color(row.stage) +
         "\"><title>" + row.id + " (" + row.stage + "): " +
         fmt(row.mac_share * 100.0, "%.4f") + "%</title></rect>\n";
    // label each bar with its node id, rotated to fit
    s += "<text x=\"" + std::to_string(x + bar / 2) + "\" y=\"" +
         std::to_string(y0 + 6) + "\" font-family=\"monospace\" " +
         "font-size=\"7\" text-anchor=\"end\" transform=\"rotate(-60 " +
         std::to_string(x + bar / 2) + " " + std::to_string(y0 + 6) +
         ")\">" + row.id + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

void emit_distribution_chart(const CostReport& r, const std::string& path) {
  write_text_file(path, render_distribution_svg(r));
}

std::string trajectory_table(const PassTrace& t, const std::string& format) {
  if (t.rows.empty()) {
    throw Error(ErrorCode::empty_report,
                "trajectory table needs a non-empty trace");
  }
  if (format == "csv") return trace_to_csv(t);
  if (format == "json") return trace_to_json(t).dump(2) + "\n";
  if (format == "markdown") {
    std::string s =
        "| pass | layers rewritten | params before | params after | delta "
        "params | macs before | macs after | delta macs |\n";
    s += "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : t.rows) {
      const std::int64_t dp = static_cast<std::int64_t>(r.params_after) -
                              static_cast<std::int64_t>(r.params_before);
      const std::int64_t dm = static_cast<std::int64_t>(r.macs_after) -
                              static_cast<std::int64_t>(r.macs_before);
      s += "| " + r.name + " | " + std::to_string(r.layers_rewritten) + " | " +
           std::to_string(r.params_before) + " | " +
           std::to_string(r.params_after) + " | " + std::to_string(dp) +
           " | " + std::to_string(r.macs_before) + " | " +
           std::to_string(r.macs_after) + " | " + std::to_string(dm) + " |\n";
    }
    s += "\ninput " + dims_to_string(t.input) + "; " + kConventionNote + "\n";
    return s;
  }
  throw Error(ErrorCode::config_error,
              "unknown trajectory format '" + format + "'");
}

void emit_trajectory_table(const PassTrace& t, const std::string& format,
                           const std::string& path) {
  write_text_file(path, trajectory_table(t, format));
}

namespace {

LayerKind bench_kind(const std::string& name, Dims4 shape) {
  const std::int64_t c = shape.c;
  if (name == "vanilla") return VanillaConv{{c, c, 3, 1, true}};
  if (name == "depthwise") return DepthwiseConv{{c, c, 3, 1, true}};
  if (name == "pointwise") return PointwiseConv{{c, c, 1, 1, true}};
  if (name == "separable")
    return SeparableConv{{c, c, 3, 1, true}, {c, c, 1, 1, true}};
  if (name == "pconv") return PConv{{c, c, 3, 1, true}, {1, 4}};
  if (name == "pdw") return PDWConv{{c, c, 3, 1, true}, {1, 4}};
  if (name == "deconv") return Deconv{{c, c, 3, 2, true}};
  if (name == "avgpool") return AvgPool2x2{};
  if (name == "interp") return Interp2x{};
  if (name == "relu") return Activation{};
  throw Error(ErrorCode::config_error, "unknown bench op '" + name + "'");
}

}  // namespace

BenchResult microbench(const std::vector<std::string>& kinds,
                       const std::vector<Dims4>& shapes,
                       double budget_seconds) {
  if (budget_seconds <= 0.0) {
    throw Error(ErrorCode::config_error, "bench budget must be positive");
  }
#ifdef __linux__
  // pin to one cpu for steadier numbers; best effort only
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(0, &set);
  sched_setaffinity(0, sizeof(set), &set);
#endif
  BenchResult result;
  result.environment = std::string("compiler ") + __VERSION__ +
                       ", single thread, float32 reference kernels";
  const std::size_t cases = kinds.size() * shapes.size();
  if (cases == 0) return result;
  const double per_case = budget_seconds / static_cast<double>(cases);
  volatile std::uint64_t sink = 0;
  for (const auto& kind_name : kinds) {
    for (const auto& shape : shapes) {
      LayerKind kind = bench_kind(kind_name, shape);
      NodeWeights w = make_layer_weights(kind, "bench_" + kind_name, 0);
      Tensor x = tensor_from_seed(shape, 0);
      std::uint64_t mults = 0;
      Tensor out = run_layer(kind, w, x, &mults);  // warmup + count
      sink += checksum(out);
      std::vector<double> times_ms;
      auto t_begin = std::chrono::steady_clock::now();
      for (int i = 0; i < 1000000; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Tensor o = run_layer(kind, w, x, nullptr);
        auto t1 = std::chrono::steady_clock::now();
        sink += o.data.empty() ? 0u : std::bit_cast<std::uint32_t>(o.data[0]);
        times_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
        const double elapsed =
            std::chrono::duration<double>(t1 - t_begin).count();
        if (i + 1 >= 30 && elapsed >= per_case) break;
      }
      std::sort(times_ms.begin(), times_ms.end());
      const std::size_t nt = times_ms.size();
      BenchRow row;
      row.kind = kind_name;
      row.shape = shape;
      row.iterations = static_cast<int>(nt);
      row.median_ms = times_ms[(nt - 1) / 2];
      row.iqr_ms = times_ms[(nt * 3) / 4] - times_ms[nt / 4];
      row.multiplies = mults;
      result.rows.push_back(row);
    }
  }
  (void)sink;
  return result;
}

nlohmann::ordered_json bench_to_json(const BenchResult& b) {
  nlohmann::ordered_json j;
  j["label"] = b.label;
  j["environment"] = b.environment;
  j["convention_note"] = kConventionNote;
  j["generator_version"] = kGeneratorVersion;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : b.rows) {
    j["rows"].push_back({{"kind", r.kind},
                         {"shape", {r.shape.n, r.shape.c, r.shape.h, r.shape.w}},
                         {"median_ms", r.median_ms},
                         {"iterations", r.iterations},
                         {"iqr_ms", r.iqr_ms},
                         {"multiplies", r.multiplies}});
  }
  return j;
}

std::string bench_to_text(const BenchResult& b) {
  std::string s = std::string(b.label) + "\n" + b.environment + "\n" +
                  kConventionNote + "\n";
  s += "kind         shape            median_ms   iqr_ms      iters  "
       "multiplies\n";
  for (const auto& r : b.rows) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %-16s %-11.4f %-11.4f %-6d %llu",
                  r.kind.c_str(), dims_to_string(r.shape).c_str(), r.median_ms,
                  r.iqr_ms, r.iterations,
                  static_cast<unsigned long long>(r.multiplies));
    s += line;
    s += "\n";
  }
  return s;
}

std::string reference_citation_text() {
  return
      "Reference values quoted from the MOFA roadmap publication (citations, "
      "not measurements):\n"
      "  trajectory at 3x256x256: baseline 1.15 G / 1.03 M; after P1 2.12 G / "
      "2.84 M;\n"
      "  after P2(enc3,dec2) 3.25 G / 3.86 M; after P3 3.69 G / 4.44 M; full "
      "roadmap 1.11 G / 0.97 M\n"
      "  middle-pair params: (enc3,dec2) 3.86 M > (enc2,dec3) 2.93 M > "
      "(enc1,dec4) 2.86 M\n"
      "  threshold sweep params: T=0 0.94 M, T=16 0.95 M, T=32 0.97 M, T=64 "
      "1.21 M, T=128 1.25 M\n"
      "  GPU/mobile runtime columns are intentionally not reproduced\n";
}

}  // namespace mofa
