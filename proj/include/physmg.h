/* C interface to the physical-misgeneralization toolkit.
 *
 * All functions return PHYSMG_OK on success, PHYSMG_ERR_INVALID for
 * configuration/validation failures, and PHYSMG_ERR_RUNTIME for runtime
 * failures. On error, physmg_last_error() returns a message owned by the
 * context. Configuration documents use the JSON schema described in the
 * repository README; results are written as files into the output
 * directory (JSON reports, CSV tables).
 */
#ifndef PHYSMG_H
#define PHYSMG_H

#ifdef __cplusplus
extern "C" {
#endif

#define PHYSMG_OK 0
#define PHYSMG_ERR_RUNTIME 1
#define PHYSMG_ERR_INVALID 2

typedef struct physmg_ctx physmg_ctx;

physmg_ctx* physmg_ctx_new(void);
void physmg_ctx_free(physmg_ctx* ctx);
const char* physmg_last_error(const physmg_ctx* ctx);

/* Sample (or, for the pendulum, curate) a dataset and write
 * dataset.csv + dataset_meta.json. */
int physmg_generate(physmg_ctx* ctx, const char* config_json, const char* out_dir);

/* Recover the physical quantity per trajectory and write recoveries.csv
 * and marginal.csv. csv_path/meta_path may be NULL to generate the dataset
 * from the configuration instead of ingesting one. */
int physmg_recover(physmg_ctx* ctx, const char* config_json, const char* csv_path,
                   const char* meta_path, const char* out_dir);

/* Estimate the transport kernel at kernel.sigma and write
 * drift_report.json plus marginal and KDE plot-data CSVs. */
int physmg_predict(physmg_ctx* ctx, const char* config_json, const char* out_dir);

/* One drift report per configured sigma (report_NN.json) plus
 * sweep_summary.csv. */
int physmg_sweep(physmg_ctx* ctx, const char* config_json, const char* out_dir);

/* Ingest externally generated samples and write audit.json with
 * TV(model, prior) and TV(model, data). */
int physmg_audit(physmg_ctx* ctx, const char* config_json, const char* csv_path,
                 const char* meta_path, const char* out_dir);

/* mode "reweight": write reweight.csv and inverse_prior.csv.
 * mode "transform": optimize the code pairing and write pairing.json. */
int physmg_mitigate(physmg_ctx* ctx, const char* config_json, const char* mode,
                    const char* out_dir);

/* Finite-horizon Lyapunov exponent along the family rule at (r, x0), plus
 * the closed-form value where one exists (NaN otherwise). */
int physmg_lyapunov(physmg_ctx* ctx, const char* family, double r, double x0,
                    int horizon, double* lambda_finite, double* lambda_closed);

#ifdef __cplusplus
}
#endif

#endif /* PHYSMG_H */
