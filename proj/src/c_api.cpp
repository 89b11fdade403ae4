#include "wbundle/wbundle.h"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "wbundle/energy_reg.hpp"
#include "wbundle/error.hpp"
#include "wbundle/field3.hpp"
#include "wbundle/runner.hpp"
#include "wbundle/slice_metric.hpp"

struct wb_mesh {
  wb::MeshPtr mesh;
};
struct wb_cochain {
  wb::TwoCochain c;
};
struct wb_field {
  wb::AnalyticField f;
};
struct wb_report {
  std::string json;
  bool passed = false;
};

namespace {

thread_local std::string g_last_error;
std::atomic<int> g_threads{1};

wb_status to_status(wb::ErrorCode c) { return static_cast<wb_status>(static_cast<int>(c)); }

// Runs `body`, mapping exceptions to status codes and the thread-local message.
template <class F>
wb_status guard(F&& body) {
  try {
    body();
    g_last_error.clear();
    return WB_OK;
  } catch (const wb::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return WB_INVALID_ARGUMENT;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return WB_RESOURCE_LIMIT;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return WB_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) wb::fail(wb::ErrorCode::kInvalidArgument, std::string("null ") + what);
}

wb::Vec3 vec(const double x[3]) { return wb::Vec3(x[0], x[1], x[2]); }

}  // namespace

extern "C" {

const char* wb_version(void) { return "0.1.0"; }

const char* wb_status_name(wb_status s) {
  switch (s) {
    case WB_OK: return "ok";
    case WB_DOMAIN: return "domain";
    case WB_INFEASIBLE: return "infeasible";
    case WB_NOT_CONVERGED: return "not_converged";
    case WB_RESOURCE_LIMIT: return "resource_limit";
    case WB_DEGENERATE: return "degenerate";
    case WB_IO: return "io";
    case WB_INVALID_ARGUMENT: return "invalid_argument";
    case WB_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* wb_last_error(void) { return g_last_error.c_str(); }

void wb_set_threads(int threads) { g_threads = std::max(1, threads); }

wb_status wb_mesh_icosphere(int level, wb_mesh** out) {
  return guard([&] {
    need(out, "output");
    wb::require(level >= 0 && level <= wb::kMaxIcosphereLevel, wb::ErrorCode::kInvalidArgument, "level out of range");
    *out = new wb_mesh{wb::build_icosphere(level)};
  });
}

wb_status wb_mesh_read_off(const char* path, wb_mesh** out) {
  return guard([&] {
    need(path, "path");
    need(out, "output");
    std::ifstream is(path);
    wb::require(static_cast<bool>(is), wb::ErrorCode::kIo, std::string("cannot open ") + path);
    *out = new wb_mesh{wb::read_off(is)};
  });
}

wb_status wb_mesh_write_off(const wb_mesh* mesh, const char* path) {
  return guard([&] {
    need(mesh, "mesh");
    need(path, "path");
    std::ofstream os(path);
    wb::require(static_cast<bool>(os), wb::ErrorCode::kIo, std::string("cannot write ") + path);
    wb::write_off(os, *mesh->mesh);
  });
}

int wb_mesh_num_faces(const wb_mesh* mesh) { return mesh ? mesh->mesh->num_faces() : -1; }

void wb_mesh_free(wb_mesh* mesh) { delete mesh; }

wb_status wb_field_from_json(const char* json, wb_field** out) {
  return guard([&] {
    need(json, "json");
    need(out, "output");
    *out = new wb_field{wb::analytic_field_from_json(nlohmann::json::parse(json))};
  });
}

wb_status wb_field_monopole(double x, double y, double z, int k, wb_field** out) {
  return guard([&] {
    need(out, "output");
    *out = new wb_field{wb::monopole(wb::Vec3(x, y, z), k)};
  });
}

wb_status wb_field_value(const wb_field* field, const double x[3], double out[3]) {
  return guard([&] {
    need(field, "field");
    need(x, "point");
    need(out, "output");
    const wb::Vec3 v = field->f.value(vec(x));
    for (int i = 0; i < 3; ++i) out[i] = v[i];
  });
}

void wb_field_free(wb_field* field) { delete field; }

wb_status wb_slice(const wb_field* field, const double x[3], double r, const wb_mesh* mesh, wb_cochain** out) {
  return guard([&] {
    need(field, "field");
    need(x, "center");
    need(mesh, "mesh");
    need(out, "output");
    *out = new wb_cochain{wb::restrict_to_sphere(field->f, vec(x), r, mesh->mesh)};
  });
}

wb_status wb_cochain_read_csv(const char* path, const wb_mesh* mesh, wb_cochain** out) {
  return guard([&] {
    need(path, "path");
    need(mesh, "mesh");
    need(out, "output");
    std::ifstream is(path);
    wb::require(static_cast<bool>(is), wb::ErrorCode::kIo, std::string("cannot open ") + path);
    *out = new wb_cochain{wb::read_cochain_csv(is, mesh->mesh)};
  });
}

wb_status wb_cochain_write_csv(const wb_cochain* c, const char* path) {
  return guard([&] {
    need(c, "cochain");
    need(path, "path");
    std::ofstream os(path);
    wb::require(static_cast<bool>(os), wb::ErrorCode::kIo, std::string("cannot write ") + path);
    wb::write_cochain_csv(os, c->c);
  });
}

wb_status wb_cochain_values(const wb_cochain* c, double* values, size_t n) {
  return guard([&] {
    need(c, "cochain");
    need(values, "buffer");
    wb::require(n == static_cast<size_t>(c->c.values.size()), wb::ErrorCode::kInvalidArgument,
                "buffer size does not match the face count");
    std::copy(c->c.values.data(), c->c.values.data() + n, values);
  });
}

double wb_cochain_degree(const wb_cochain* c) { return c ? c->c.degree() : 0.0; }

void wb_cochain_free(wb_cochain* c) { delete c; }

wb_status wb_distance(const wb_cochain* h1, const wb_cochain* h2, double p, double tol, double* distance,
                      double* gap) {
  return guard([&] {
    need(h1, "h1");
    need(h2, "h2");
    need(distance, "output");
    wb::require(tol > 0.0, wb::ErrorCode::kInvalidArgument, "tolerance must be positive");
    wb::DistanceOptions o;
    o.tol = tol;
    const wb::DistanceResult r = wb::slice_distance(h1->c, h2->c, p, o);
    *distance = r.value;
    if (gap) *gap = r.gap;
  });
}

wb_status wb_energy_ball(const wb_field* field, const double x[3], double r, double p, double* energy) {
  return guard([&] {
    need(field, "field");
    need(x, "center");
    need(energy, "output");
    *energy = wb::lp_energy(field->f, wb::Ball{vec(x), r}, p);
  });
}

wb_status wb_run(const char* command, const char* config_json, wb_report** out) {
  return guard([&] {
    need(command, "command");
    need(out, "output");
    const nlohmann::json cfg = (config_json && *config_json) ? nlohmann::json::parse(config_json) : nlohmann::json::object();
    const nlohmann::json rep = wb::run_command(command, cfg, g_threads.load());
    *out = new wb_report{rep.dump(2), rep.at("passed").get<bool>()};
  });
}

const char* wb_report_json(const wb_report* report) { return report ? report->json.c_str() : ""; }

int wb_report_passed(const wb_report* report) { return report && report->passed ? 1 : 0; }

void wb_report_free(wb_report* report) { delete report; }

}  // extern "C"
