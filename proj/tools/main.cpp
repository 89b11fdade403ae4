// wbundle command-line front end. Flags become keys of the JSON run configuration;
// --config supplies a base object that flags override.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "wbundle/wbundle.h"

namespace {

using json = nlohmann::json;

enum class Kind { kDouble, kInt, kString, kDoubles, kInts, kFlag };

struct Flag {
  const char* name;  // --name, also the config key (dashes become underscores)
  Kind kind;
  const char* help;
};

const std::map<std::string, std::vector<Flag>>& subcommands() {
  static const Flag p{"p", Kind::kDouble, "exponent"};
  static const Flag level{"level", Kind::kInt, "icosphere level"};
  static const Flag mesh{"mesh", Kind::kString, "OFF mesh instead of an icosphere"};
  static const Flag seed{"seed", Kind::kInt, "RNG seed"};
  static const Flag tol{"tol", Kind::kDouble, "tolerance"};
  static const Flag restarts{"restarts", Kind::kInt, "search restarts"};
  static const Flag field{"field", Kind::kString, "monopole, three-charge, zero, a .json field or a grid file"};
  static const Flag center{"center", Kind::kDoubles, "x y z"};
  static const Flag radius{"radius", Kind::kDouble, "sphere or ball radius"};
  static const Flag plot{"plot", Kind::kString, "two-column plot data file"};
  static const Flag write{"write", Kind::kString, "artifact output path"};
  static const Flag phi{"phi", Kind::kString, "constant, two-lobe, self or a cochain CSV"};
  static const Flag k{"k", Kind::kInt, "preset degree"};
  static const std::map<std::string, std::vector<Flag>> table{
      {"mesh", {level, mesh, write}},
      {"dist",
       {p, level, mesh, {"h1", Kind::kString, "first cochain CSV"}, {"h2", Kind::kString, "second cochain CSV"}, tol,
        restarts, seed, {"max-moves", Kind::kInt, "accepted moves per restart"}}},
      {"flux",
       {field, {"spheres", Kind::kInt, "random spheres"}, level, seed, tol,
        {"scale", Kind::kDouble, "field scale (analytic fields)"}}},
      {"slice", {field, level, mesh, center, radius, p, write}},
      {"holder", {field, p, {"pairs", Kind::kInt, "ball pairs"}, seed, level, tol, restarts, {"r-min", Kind::kDouble, "smallest radius"}}},
      {"energy",
       {field, p, center, radius, {"expected", Kind::kDouble, "reference value"}, {"rel-tol", Kind::kDouble, "relative tolerance"},
        {"csv", Kind::kString, "profile CSV"}, plot}},
      {"monotonicity",
       {field, p, center, {"r0", Kind::kDouble, "first radius"}, {"ratio", Kind::kDouble, "radius ratio"},
        {"n", Kind::kInt, "number of radii"}, {"rel-tol", Kind::kDouble, "relative tolerance"},
        {"abs-tol", Kind::kDouble, "absolute tolerance"}, plot}},
      {"blowup",
       {p, level, {"rho", Kind::kDoubles, "rho values"}, {"cap", Kind::kDouble, "cap on |x|"},
        {"resolution", Kind::kDouble, "cells per rho"}, {"slope-tol", Kind::kDouble, "slope tolerance"}, plot}},
      {"metrize",
       {p, level, mesh, {"bands", Kind::kInts, "harmonic degrees"}, {"charge", Kind::kDoubles, "x y z"}, tol, restarts,
        {"wild", Kind::kFlag, "drop the equibound"}}},
      {"plateau",
       {p, level, mesh, phi, k, {"kappa", Kind::kDouble, "two-lobe concentration"}, {"grid", Kind::kInt, "cells per axis"},
        {"levels", Kind::kInts, "coarse-to-fine grid sizes"}, restarts, seed, tol, write}},
      {"trace",
       {field, p, level, mesh, phi, k, {"kappa", Kind::kDouble, "two-lobe concentration"},
        {"rho", Kind::kDoubles, "rho values"}, tol, restarts, plot}},
      {"audit-all",
       {level, p, seed, {"only", Kind::kInts, "criteria to run"}, {"skip", Kind::kInts, "criteria to skip"}}},
  };
  return table;
}

std::string key_of(const char* name) {
  std::string k = name;
  for (char& c : k)
    if (c == '-') c = '_';
  return k;
}

struct Values {
  std::map<std::string, double> d;
  std::map<std::string, long long> i;
  std::map<std::string, std::string> s;
  std::map<std::string, std::vector<double>> dv;
  std::map<std::string, std::vector<int>> iv;
  std::map<std::string, bool> f;
};

int usage_error(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slice-distance and Sobolev bundle toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_path;
  app.add_option("--config", config_path, "JSON configuration merged under the flags");
  app.add_option("--out", out_path, "write the JSON report here instead of stdout");
  app.set_version_flag("--version", std::string(wb_version()));

  Values values;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& [name, flags] : subcommands()) {
    CLI::App* sub = app.add_subcommand(name);
    subs[name] = sub;
    for (const Flag& fl : flags) {
      const std::string key = key_of(fl.name), opt = std::string("--") + fl.name;
      const std::string id = name + "." + key;
      CLI::Option* o = nullptr;
      switch (fl.kind) {
        case Kind::kDouble: o = sub->add_option(opt, values.d[id], fl.help); break;
        case Kind::kInt: o = sub->add_option(opt, values.i[id], fl.help); break;
        case Kind::kString: o = sub->add_option(opt, values.s[id], fl.help); break;
        case Kind::kDoubles: o = sub->add_option(opt, values.dv[id], fl.help); break;
        case Kind::kInts: o = sub->add_option(opt, values.iv[id], fl.help); break;
        case Kind::kFlag: o = sub->add_flag(opt, values.f[id], fl.help); break;
      }
      options[name].emplace_back(key, o);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  json cfg = json::object();
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) return usage_error("cannot open " + config_path);
    try {
      cfg = json::parse(is);
    } catch (const json::parse_error& e) {
      return usage_error(std::string("bad config: ") + e.what());
    }
    if (!cfg.is_object()) return usage_error("config must be a JSON object");
  }
  for (const auto& [key, opt] : options[command]) {
    if (opt->count() == 0) continue;
    const std::string id = command + "." + key;
    if (values.d.count(id)) cfg[key] = values.d[id];
    else if (values.i.count(id)) cfg[key] = values.i[id];
    else if (values.s.count(id)) cfg[key] = values.s[id];
    else if (values.dv.count(id)) cfg[key] = values.dv[id];
    else if (values.iv.count(id)) cfg[key] = values.iv[id];
    else if (key == "wild") cfg["equibounded"] = false;
  }

  if (const char* t = std::getenv("WB_THREADS")) {
    const int n = std::atoi(t);
    if (n < 1) return usage_error("WB_THREADS must be a positive integer");
    wb_set_threads(n);
  }

  wb_report* rep = nullptr;
  const wb_status st = wb_run(command.c_str(), cfg.dump().c_str(), &rep);
  if (st != WB_OK) {
    std::cerr << "error (" << wb_status_name(st) << "): " << wb_last_error() << "\n";
    const bool usage = st == WB_INVALID_ARGUMENT || st == WB_DOMAIN || st == WB_IO;
    return usage ? 2 : 1;
  }
  const std::string text = std::string(wb_report_json(rep)) + "\n";
  const bool passed = wb_report_passed(rep) != 0;
  wb_report_free(rep);

  if (out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(out_path);
    if (!(os << text)) return usage_error("cannot write " + out_path);
  }
  if (!passed) {
    const json j = json::parse(text);
    std::cerr << "audit failed:\n";
    for (const auto& f : j["failures"]) std::cerr << "  " << f.get<std::string>() << "\n";
    return 1;
  }
  return 0;
}
