#include "mofa/cli.h"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "mofa/analyzer.h"
#include "mofa/builders.h"
#include "mofa/interpreter.h"
#include "mofa/oracle.h"
#include "mofa/passes.h"
#include "mofa/report.h"

namespace mofa {

namespace {

std::uint64_t env_seed() {
  if (const char* s = std::getenv("MOFA_SEED")) {
    try {
      return std::stoull(s);
    } catch (...) {
      throw Error(ErrorCode::config_error,
                  "MOFA_SEED must be a non-negative integer");
    }
  }
  return 0;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorCode::io_error, "cannot open '" + path + "'");
  try {
    nlohmann::json j;
    f >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error,
                "bad json in '" + path + "': " + e.what());
  }
}

// CxHxW with batch fixed at 1
Dims4 parse_chw(const std::string& s) {
  std::vector<std::int64_t> parts;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t next = s.find('x', pos);
    if (next == std::string::npos) next = s.size();
    const std::string tok = s.substr(pos, next - pos);
    try {
      std::size_t used = 0;
      parts.push_back(std::stoll(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (...) {
      throw Error(ErrorCode::invalid_shape,
                  "input shape must look like CxHxW, got '" + s + "'");
    }
    pos = next + 1;
    if (next == s.size()) break;
  }
  if (parts.size() != 3) {
    throw Error(ErrorCode::invalid_shape,
                "input shape must look like CxHxW, got '" + s + "'");
  }
  return {1, parts[0], parts[1], parts[2]};
}

NetGraph load_model(const std::string& path) {
  NetGraph g = path.empty() ? build_pmrid_like()
                            : model_from_json(read_json_file(path));
  auto violations = validate(g);
  if (!violations.empty()) {
    throw Error(ErrorCode::config_error,
                "model fails validation: " + violations.front());
  }
  return g;
}

int run_build(const std::string& cfg_path, const std::string& out_path) {
  ModelConfig cfg =
      cfg_path.empty() ? ModelConfig{} : parse_config(read_json_file(cfg_path));
  NetGraph g = build_pmrid_like(cfg);
  auto violations = validate(g);
  if (!violations.empty()) {
    throw Error(ErrorCode::config_error,
                "built graph fails validation: " + violations.front());
  }
  const std::string text = graph_to_json(g).dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text_file(out_path, text);
    std::cout << "wrote " << out_path << " (" << g.nodes.size()
              << " nodes)\n";
  }
  return 0;
}

int run_analyze(const std::string& model_path, const std::string& input,
                const std::string& convention, const std::string& out_path,
                const std::string& csv_path, const std::string& svg_path) {
  NetGraph g = load_model(model_path);
  const Dims4 in = parse_chw(input);
  const Convention conv = convention == "vanilla"
                              ? Convention::all_vanilla_estimate
                              : Convention::actual;
  CostReport r = analyze(g, in, conv);
  if (!csv_path.empty()) write_text_file(csv_path, report_to_csv(r));
  if (!svg_path.empty()) emit_distribution_chart(r, svg_path);
  if (out_path.empty()) {
    std::cout << report_to_json(r).dump(2) << "\n";
  } else {
    write_text_file(out_path, report_to_json(r).dump(2) + "\n");
    std::cout << "params " << r.total_params << "  macs " << r.total_macs
              << "  (" << convention_name(r.convention) << "; "
              << kConventionNote << ")\n";
  }
  return 0;
}

int run_apply(const std::string& model_path, const std::string& plan_path,
              const std::string& input, const std::string& out_path,
              const std::string& trace_path) {
  NetGraph g = load_model(model_path);
  PassPlan plan = plan_path.empty() ? PassPlan{}
                                    : plan_from_json(read_json_file(plan_path));
  const Dims4 in = parse_chw(input);
  auto [rewritten, trace] = run_roadmap(g, plan, in);
  for (const auto& row : trace.rows) {
    std::cout << row.name << ": rewrote " << row.layers_rewritten
              << " layer(s), params " << row.params_before << " -> "
              << row.params_after << ", macs " << row.macs_before << " -> "
              << row.macs_after << "\n";
  }
  if (!out_path.empty()) {
    write_text_file(out_path, graph_to_json(rewritten).dump(2) + "\n");
  }
  if (!trace_path.empty()) {
    write_text_file(trace_path, trace_to_json(trace).dump(2) + "\n");
  }
  return 0;
}

struct CheckResult {
  std::string name;
  std::string fail;  // empty = ok
};

template <typename Fn>
CheckResult run_check(const std::string& name, Fn&& fn) {
  try {
    return {name, fn()};
  } catch (const std::exception& e) {
    return {name, e.what()};
  }
}

int run_verify(const std::string& model_path, std::uint64_t seed) {
  NetGraph g = model_path.empty() ? build_pmrid_like()
                                  : model_from_json(read_json_file(model_path));
  const Dims4 big{1, 3, 256, 256};
  std::vector<CheckResult> results;

  results.push_back(run_check("graph validates", [&] {
    auto v = validate(g);
    return v.empty() ? std::string{} : v.front();
  }));

  results.push_back(
      run_check("analyzer == interpreter on 250 random layers", [&] {
        Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x1234567);
        for (int i = 0; i < 250; ++i) {
          OracleCase c = random_oracle_case(rng);
          std::string err = check_oracle_case(c, seed + i);
          if (!err.empty()) return err;
        }
        return std::string{};
      }));

  results.push_back(
      run_check("pconv/pdwconv slice semantics, 60 random cases", [&] {
        Rng rng(seed * 0x9E3779B97F4A7C15ULL + 0x7654321);
        for (int i = 0; i < 60; ++i) {
          OracleCase c = random_partial_case(rng, i % 2 == 0);
          std::string err = check_partial_case(c, seed + i);
          if (!err.empty()) return err;
        }
        return std::string{};
      }));

  results.push_back(
      run_check("whole-graph multiply counts match analyzer", [&] {
        const Dims4 in{1, 3, 64, 64};
        Weights w = make_weights(g, seed);
        Tensor x = tensor_from_seed(in, seed ^ 0xABCDEFULL);
        auto stats = forward(g, w, x).second;
        CostReport r = analyze(g, in);
        for (const auto& row : r.per_layer) {
          if (stats.multiplies.at(row.id) != row.macs) {
            return "node '" + row.id + "': analyzer " +
                   std::to_string(row.macs) + " vs interpreter " +
                   std::to_string(stats.multiplies.at(row.id));
          }
        }
        return std::string{};
      }));

  const std::set<std::string> cheap =
      cheap_layers(analyze(g, big, Convention::all_vanilla_estimate));
  struct NamedPass {
    std::string name;
    std::function<NetGraph(const NetGraph&)> fn;
  };
  const std::vector<NamedPass> passes = {
      {"P1_pconv", [](const NetGraph& x) { return p1_to_pconv(x); }},
      {"P2_middle",
       [](const NetGraph& x) {
         return p2_widen_middle(x, {"enc3", "dec2"});
       }},
      {"P3_cheap",
       [&](const NetGraph& x) { return p3_widen_cheap(x, cheap); }},
      {"P4_updown",
       [](const NetGraph& x) { return p4_decouple_updown(x); }},
      {"P5_pdw",
       [](const NetGraph& x) { return p5_pconv_to_pdw(x, 32); }}};

  for (const auto& pass : passes) {
    results.push_back(run_check("idempotent: " + pass.name, [&] {
      NetGraph once = pass.fn(g);
      NetGraph twice = pass.fn(once);
      return graph_equal(once, twice)
                 ? std::string{}
                 : "second application changed the graph";
    }));
  }

  results.push_back(run_check("passes preserve end-to-end shape", [&] {
    auto out_shape = [&](const NetGraph& x) {
      ShapeMap shapes = infer_shapes(x, big);
      for (const auto& n : x.nodes) {
        if (n.role == RoleTag::io && n.stage == "output")
          return shapes.at(n.id);
      }
      return shapes.at(x.nodes.back().id);
    };
    const Dims4 want = out_shape(g);
    NetGraph cur = g;
    for (const auto& pass : passes) {
      cur = pass.fn(cur);
      const Dims4 got = out_shape(cur);
      if (!(got == want)) {
        return pass.name + " changed the end-to-end shape to " +
               dims_to_string(got);
      }
    }
    return std::string{};
  }));

  results.push_back(run_check("io layers untouched by the roadmap", [&] {
    auto [final_g, trace] = run_roadmap(g, PassPlan{}, big);
    (void)trace;
    for (const auto& n : g.nodes) {
      if (n.role != RoleTag::io) continue;
      const LayerNode* after = final_g.find(n.id);
      if (!after || !node_equal(n, *after)) {
        return "io node '" + n.id + "' was modified";
      }
    }
    auto v = validate(final_g);
    if (!v.empty()) return "roadmap output fails validation: " + v.front();
    return std::string{};
  }));

  int failed = 0;
  for (const auto& r : results) {
    if (r.fail.empty()) {
      std::cout << "ok: " << r.name << "\n";
    } else {
      std::cout << "FAIL: " << r.name << ": " << r.fail << "\n";
      ++failed;
    }
  }
  if (failed == 0) {
    std::cout << "all checks passed\n";
    return 0;
  }
  std::cout << failed << " of " << results.size() << " checks failed\n";
  return 1;
}

int run_bench(const std::string& ops, const std::string& shapes,
              double budget_ms, const std::string& out_path) {
  std::vector<std::string> kinds;
  std::size_t pos = 0;
  while (pos <= ops.size() && !ops.empty()) {
    std::size_t next = ops.find(',', pos);
    if (next == std::string::npos) next = ops.size();
    if (next > pos) kinds.push_back(ops.substr(pos, next - pos));
    pos = next + 1;
    if (next == ops.size()) break;
  }
  std::vector<Dims4> dims;
  pos = 0;
  while (pos <= shapes.size() && !shapes.empty()) {
    std::size_t next = shapes.find(',', pos);
    if (next == std::string::npos) next = shapes.size();
    if (next > pos) dims.push_back(parse_chw(shapes.substr(pos, next - pos)));
    pos = next + 1;
    if (next == shapes.size()) break;
  }
  BenchResult b = microbench(kinds, dims, budget_ms / 1000.0);
  std::cout << bench_to_text(b);
  if (!out_path.empty()) {
    write_text_file(out_path, bench_to_json(b).dump(2) + "\n");
  }
  return 0;
}

int run_report(const std::string& trace_path, const std::string& format,
               const std::string& out_path, bool paper_reference) {
  PassTrace trace = trace_from_json(read_json_file(trace_path));
  const std::string table = trajectory_table(trace, format);
  if (out_path.empty()) {
    std::cout << table;
  } else {
    write_text_file(out_path, table);
    std::cout << "wrote " << out_path << "\n";
  }
  if (paper_reference) std::cout << "\n" << reference_citation_text();
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "graph-IR toolkit: builds encoder/decoder networks, costs them "
      "(params/MACs), and applies the MOFA simplification roadmap"};
  app.require_subcommand(1);
  int rc = 0;

  auto* build = app.add_subcommand("build", "construct and validate a model");
  std::string b_cfg, b_out;
  build->add_option("--config", b_cfg, "model config json");
  build->add_option("--out", b_out, "output graph json (stdout if omitted)");
  build->callback([&] { rc = run_build(b_cfg, b_out); });

  auto* analyze_cmd =
      app.add_subcommand("analyze", "per-layer params and MAC report");
  std::string a_model, a_input = "3x256x256", a_conv = "actual";
  std::string a_out, a_csv, a_svg;
  analyze_cmd->add_option("--model", a_model,
                          "graph or config json (default: built-in model)");
  analyze_cmd->add_option("--input", a_input, "input size CxHxW (batch 1)");
  analyze_cmd->add_option("--convention", a_conv, "actual | vanilla")
      ->check(CLI::IsMember({"actual", "vanilla"}));
  analyze_cmd->add_option("--out", a_out, "report json path");
  analyze_cmd->add_option("--csv", a_csv, "per-layer csv path");
  analyze_cmd->add_option("--svg", a_svg, "distribution chart path");
  analyze_cmd->callback(
      [&] { rc = run_analyze(a_model, a_input, a_conv, a_out, a_csv, a_svg); });

  auto* apply_cmd =
      app.add_subcommand("apply", "run the simplification roadmap");
  std::string p_model, p_plan, p_input = "3x256x256", p_out, p_trace;
  apply_cmd->add_option("--model", p_model,
                        "graph or config json (default: built-in model)");
  apply_cmd->add_option("--plan", p_plan, "pass plan json (default plan if omitted)");
  apply_cmd->add_option("--input", p_input, "input size CxHxW for the trace");
  apply_cmd->add_option("--out", p_out, "rewritten graph json path");
  apply_cmd->add_option("--trace", p_trace, "pass trace json path");
  apply_cmd->callback(
      [&] { rc = run_apply(p_model, p_plan, p_input, p_out, p_trace); });

  auto* verify_cmd = app.add_subcommand(
      "verify", "cross-check analyzer vs interpreter and pass invariants");
  std::string v_model;
  std::uint64_t v_seed = 0;
  bool v_seed_set = false;
  verify_cmd->add_option("--model", v_model,
                         "graph or config json (default: built-in model)");
  verify_cmd->add_option("--seed", v_seed, "override seed (default MOFA_SEED or 0)")
      ->each([&](const std::string&) { v_seed_set = true; });
  verify_cmd->callback(
      [&] { rc = run_verify(v_model, v_seed_set ? v_seed : env_seed()); });

  auto* bench_cmd =
      app.add_subcommand("bench", "micro-time the reference kernels");
  std::string n_ops = "pconv,pdw", n_shapes = "256x32x32", n_out;
  double n_budget = 2000.0;
  bench_cmd->add_option("--ops", n_ops,
                        "comma list: vanilla,depthwise,pointwise,separable,"
                        "pconv,pdw,deconv,avgpool,interp,relu");
  bench_cmd->add_option("--shapes", n_shapes, "comma list of CxHxW");
  bench_cmd->add_option("--budget-ms", n_budget, "total time budget");
  bench_cmd->add_option("--out", n_out, "bench result json path");
  bench_cmd->callback([&] { rc = run_bench(n_ops, n_shapes, n_budget, n_out); });

  auto* report_cmd =
      app.add_subcommand("report", "format a pass trace as a table");
  std::string r_trace, r_format = "markdown", r_out;
  bool r_paper = false;
  report_cmd->add_option("--trace", r_trace, "pass trace json")->required();
  report_cmd->add_option("--format", r_format, "csv | json | markdown")
      ->check(CLI::IsMember({"csv", "json", "markdown"}));
  report_cmd->add_option("--out", r_out, "output path (stdout if omitted)");
  report_cmd->add_flag("--paper-reference", r_paper,
                       "also print published reference values (citations)");
  report_cmd->callback(
      [&] { rc = run_report(r_trace, r_format, r_out, r_paper); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

int cli_main(const std::vector<std::string>& args) {
  std::vector<std::string> full;
  full.reserve(args.size() + 1);
  full.push_back("mofa");
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  argv.reserve(full.size());
  for (const auto& s : full) argv.push_back(s.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace mofa
