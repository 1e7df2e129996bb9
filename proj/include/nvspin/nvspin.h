#ifndef NVSPIN_H
#define NVSPIN_H

/* C interface to the nvspin library. Every function returns an nvspin_status;
 * on failure nvspin_last_error() describes the problem (per thread). Strings
 * returned through char** are allocated by the library and released with
 * nvspin_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NVSPIN_API __declspec(dllexport)
#else
#define NVSPIN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nvspin_status {
  NVSPIN_OK = 0,
  NVSPIN_ERR_DOMAIN = 1,
  NVSPIN_ERR_SINGULARITY = 2,
  NVSPIN_ERR_CONVERGENCE = 3,
  NVSPIN_ERR_RANK = 4,
  NVSPIN_ERR_VALIDATION = 5,
  NVSPIN_ERR_IO = 6,
  NVSPIN_ERR_INTERNAL = 7
} nvspin_status;

typedef struct nvspin_context nvspin_context;

NVSPIN_API const char* nvspin_version(void);
NVSPIN_API const char* nvspin_last_error(void);
NVSPIN_API const char* nvspin_status_name(nvspin_status status);
NVSPIN_API void nvspin_free(void* p);

/* config_json may be NULL or empty for the built-in defaults. */
NVSPIN_API nvspin_status nvspin_context_create(const char* config_json, nvspin_context** out);
NVSPIN_API nvspin_status nvspin_context_create_from_file(const char* path, nvspin_context** out);
NVSPIN_API void nvspin_context_destroy(nvspin_context* ctx);

/* threads = 0 uses the hardware concurrency. */
NVSPIN_API nvspin_status nvspin_context_set_threads(nvspin_context* ctx, unsigned threads);
NVSPIN_API nvspin_status nvspin_context_set_seed(nvspin_context* ctx, uint64_t seed);
NVSPIN_API nvspin_status nvspin_context_set_format(nvspin_context* ctx, const char* format);
NVSPIN_API nvspin_status nvspin_context_config_json(const nvspin_context* ctx, char** out);
NVSPIN_API nvspin_status nvspin_context_config_hash(const nvspin_context* ctx, uint64_t* out);
/* File extension of tabular outputs for the configured format ("csv" or "json"). */
NVSPIN_API const char* nvspin_context_table_extension(const nvspin_context* ctx);

/* Spectrum field along the NV axis at standoff distance_m and time t_s. */
NVSPIN_API nvspin_status nvspin_field_at(nvspin_context* ctx, double distance_m, double t_s,
                                         double* field_T, double* error_T);

/* Field series over both echo windows plus the resulting echo phase and
 * mean field. table receives the series (t_s, B_T) in the configured format. */
NVSPIN_API nvspin_status nvspin_field_series(nvspin_context* ctx, double distance_m, char** table,
                                             double* phase_rad, double* bbar_T, double* error_T);

/* First-window mean field of the spectrum at distance_m. */
NVSPIN_API nvspin_status nvspin_model_bbar(nvspin_context* ctx, double distance_m, double* bbar_T,
                                           double* error_T);

/* mode: "distance" or "velocity". Outputs: JSON fit result, residual table
 * and a densely sampled fitted curve. */
NVSPIN_API nvspin_status nvspin_fit(nvspin_context* ctx, const char* mode, const char* data_csv,
                                    char** result_json, char** residuals, char** curve);

/* noise_T < 0 uses the configured noise level. prior_csv may be NULL: the
 * curve is produced and verdict_json is set to NULL. */
NVSPIN_API nvspin_status nvspin_sensitivity(nvspin_context* ctx, double noise_T, const char* prior_csv,
                                            char** curve, char** verdict_json);

NVSPIN_API nvspin_status nvspin_backgrounds(nvspin_context* ctx, char** report_json);

/* mode: "distance", "velocity" or "fringe". noise < 0 uses the configured
 * level (T for distance/velocity, signal units for fringe). Output is CSV. */
NVSPIN_API nvspin_status nvspin_synth(nvspin_context* ctx, const char* mode, double noise, char** csv);

/* Run manifest for the outputs named in names[i] with contents[i]. Error
 * bounds recorded by earlier calls on ctx are included. */
NVSPIN_API nvspin_status nvspin_manifest(const nvspin_context* ctx, const char* command, double wall_time_s,
                                         const char* const* names, const char* const* contents, size_t count,
                                         char** manifest_json);

/* Scalar helpers. */
NVSPIN_API nvspin_status nvspin_mean_field_from_phase(const nvspin_context* ctx, double phi_rad, double* bbar_T);
NVSPIN_API nvspin_status nvspin_exotic_field_point(const nvspin_context* ctx, const double r_m[3], double v_y_mps,
                                                   double lambda_m, double f_perp, double* field_T);

#ifdef __cplusplus
}
#endif

#endif
