#ifndef WBUNDLE_H
#define WBUNDLE_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define WB_API __declspec(dllexport)
#else
#define WB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum wb_status {
  WB_OK = 0,
  WB_DOMAIN = 1,
  WB_INFEASIBLE = 2,
  WB_NOT_CONVERGED = 3,
  WB_RESOURCE_LIMIT = 4,
  WB_DEGENERATE = 5,
  WB_IO = 6,
  WB_INVALID_ARGUMENT = 7,
  WB_INTERNAL = 99
} wb_status;

typedef struct wb_mesh wb_mesh;
typedef struct wb_cochain wb_cochain;
typedef struct wb_field wb_field;
typedef struct wb_report wb_report;

WB_API const char* wb_version(void);
WB_API const char* wb_status_name(wb_status s);
/* Message of the last failure on the calling thread; empty after success. */
WB_API const char* wb_last_error(void);
/* Worker threads for wb_run; values below 1 are clamped. */
WB_API void wb_set_threads(int threads);

/* Meshes */
WB_API wb_status wb_mesh_icosphere(int level, wb_mesh** out);
WB_API wb_status wb_mesh_read_off(const char* path, wb_mesh** out);
WB_API wb_status wb_mesh_write_off(const wb_mesh* mesh, const char* path);
WB_API int wb_mesh_num_faces(const wb_mesh* mesh);
WB_API void wb_mesh_free(wb_mesh* mesh);

/* Fields: JSON description {"charges":[{"center":[x,y,z],"k":k}],"abc":{...},"scale":s} */
WB_API wb_status wb_field_from_json(const char* json, wb_field** out);
WB_API wb_status wb_field_monopole(double x, double y, double z, int k, wb_field** out);
WB_API wb_status wb_field_value(const wb_field* field, const double x[3], double out[3]);
WB_API void wb_field_free(wb_field* field);

/* Slice cochains: face values of the field restricted to the sphere S(x, r). */
WB_API wb_status wb_slice(const wb_field* field, const double x[3], double r, const wb_mesh* mesh,
                          wb_cochain** out);
WB_API wb_status wb_cochain_read_csv(const char* path, const wb_mesh* mesh, wb_cochain** out);
WB_API wb_status wb_cochain_write_csv(const wb_cochain* c, const char* path);
WB_API wb_status wb_cochain_values(const wb_cochain* c, double* values, size_t n);
WB_API double wb_cochain_degree(const wb_cochain* c);
WB_API void wb_cochain_free(wb_cochain* c);

/* Slice distance and its relative duality gap. */
WB_API wb_status wb_distance(const wb_cochain* h1, const wb_cochain* h2, double p, double tol, double* distance,
                             double* gap);
WB_API wb_status wb_energy_ball(const wb_field* field, const double x[3], double r, double p, double* energy);

/* Subcommands with a JSON configuration; see the CLI for the names. */
WB_API wb_status wb_run(const char* command, const char* config_json, wb_report** out);
/* Owned by the report, valid until wb_report_free. */
WB_API const char* wb_report_json(const wb_report* report);
WB_API int wb_report_passed(const wb_report* report);
WB_API void wb_report_free(wb_report* report);

#ifdef __cplusplus
}
#endif

#endif
