/* conncrack: pavement crack detection with connectivity maps and a
 * conditional Wasserstein GAN.
 *
 * Every function returns a cc_status. On failure, cc_last_error() returns a
 * message for the calling thread that stays valid until its next call into
 * the library. Objects are opaque handles released with the matching
 * *_free function; free functions accept NULL. Strings returned through
 * char** are released with cc_string_free.
 */
#ifndef CONNCRACK_H
#define CONNCRACK_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(CONNCRACK_BUILDING)
#    define CC_API __declspec(dllexport)
#  else
#    define CC_API __declspec(dllimport)
#  endif
#else
#  define CC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cc_status {
    CC_OK = 0,
    CC_ERR_CONFIG = 1,           /* invalid configuration or parameter value */
    CC_ERR_DIMENSION = 2,        /* shape mismatch */
    CC_ERR_FORMAT = 3,           /* malformed file or JSON */
    CC_ERR_IO = 4,               /* file system failure */
    CC_ERR_DIVERGENCE = 5,       /* non-finite training loss */
    CC_ERR_INVALID_ARGUMENT = 6, /* NULL pointer or out-of-range argument */
    CC_ERR_INTERNAL = 7
} cc_status;

CC_API const char* cc_last_error(void);
CC_API const char* cc_status_name(cc_status status);
CC_API const char* cc_version(void);
CC_API void cc_string_free(char* s);

/* ---- images and masks --------------------------------------------------- */

typedef struct cc_image cc_image;
typedef struct cc_mask cc_mask;

/* PNG, PGM or PPM (8-bit). */
CC_API cc_status cc_image_load(const char* path, cc_image** out);
/* Format by extension: .png, .pgm, .ppm, .pnm. Written atomically. */
CC_API cc_status cc_image_save(const cc_image* image, const char* path);
/* channels is 1 or 3; pixels are interleaved row-major (may be NULL for zeros). */
CC_API cc_status cc_image_create(uint32_t width, uint32_t height, uint32_t channels,
                                 const uint8_t* pixels, cc_image** out);
CC_API cc_status cc_image_info(const cc_image* image, uint32_t* width, uint32_t* height,
                               uint32_t* channels);
CC_API const uint8_t* cc_image_pixels(const cc_image* image);
CC_API void cc_image_free(cc_image* image);

/* Any nonzero sample is crack. */
CC_API cc_status cc_mask_load(const char* path, cc_mask** out);
/* Crack pixels are written as 255. */
CC_API cc_status cc_mask_save(const cc_mask* mask, const char* path);
/* values: height*width entries of 0 or 1 (may be NULL for an empty mask). */
CC_API cc_status cc_mask_create(uint32_t height, uint32_t width, const uint8_t* values, cc_mask** out);
CC_API cc_status cc_mask_info(const cc_mask* mask, uint32_t* height, uint32_t* width, uint64_t* crack_pixels);
CC_API const uint8_t* cc_mask_values(const cc_mask* mask);
CC_API void cc_mask_free(cc_mask* mask);

/* ---- mount geometry ----------------------------------------------------- */

/* Pixels per centimetre on the road for the row at fov_fraction of the
 * field of view; 0 at or past the horizon. reachable may be NULL. */
CC_API cc_status cc_geometry_resolution(double camera_height_m, double tilt_alpha_deg,
                                        double fov_theta_deg, uint32_t vertical_pixels,
                                        double fov_fraction, double* px_per_cm, int* reachable);
/* CSV "fraction,resolution_px_per_cm,reachable" for strictly increasing fractions. */
CC_API cc_status cc_geometry_profile_csv(double camera_height_m, double tilt_alpha_deg,
                                         double fov_theta_deg, uint32_t vertical_pixels,
                                         const double* fractions, size_t count, char** csv);

/* ---- connectivity maps -------------------------------------------------- */

typedef struct cc_maps cc_maps;

CC_API cc_status cc_maps_encode(const cc_mask* mask, cc_maps** out);
/* reciprocal != 0 requires both directions of a link to reach tau. */
CC_API cc_status cc_maps_decode(const cc_maps* maps, float tau, int reciprocal, cc_mask** out);
CC_API cc_status cc_maps_info(const cc_maps* maps, uint32_t* height, uint32_t* width);
/* 8 * height * width floats, direction-major. */
CC_API const float* cc_maps_values(const cc_maps* maps);
/* CMAP1 binary stack. */
CC_API cc_status cc_maps_save(const cc_maps* maps, const char* path);
CC_API cc_status cc_maps_load(const char* path, cc_maps** out);
/* Direction k (0..7: NW, W, SW, N, S, NE, E, SE) as a gray image. */
CC_API cc_status cc_maps_channel_image(const cc_maps* maps, uint32_t k, cc_image** out);
CC_API void cc_maps_free(cc_maps* maps);

/* ---- synthetic data ----------------------------------------------------- */

/* spec_json: SynthSpec fields (missing keys take defaults; NULL for all
 * defaults). The pair is fully determined by the synthesis seed and index. */
CC_API cc_status cc_synth_sample(const char* spec_json, uint64_t index, cc_image** image, cc_mask** mask);
/* Resolved spec as JSON (every field present). */
CC_API cc_status cc_synth_resolve(const char* spec_json, char** resolved_json);

/* Shuffle (image, mask) path pairs with seed and assign 70/10/20 splits;
 * writes a JSON-lines manifest. Relative paths are kept as given. */
CC_API cc_status cc_manifest_write(const char* const* images, const char* const* masks, size_t count,
                                   uint64_t seed, const char* path);

/* ---- training ----------------------------------------------------------- */

/* config_json: {"generator", "critic", "train", "data"} (see README).
 * Writes train_log.csv, train_timing.csv, gen_<iter>.ckpt and
 * crit_<iter>.ckpt into out_dir. summary_json (may be NULL) receives the
 * resolved configuration and output file names. */
CC_API cc_status cc_train_resolve(const char* config_json, char** resolved_json);
CC_API cc_status cc_train(const char* config_json, const char* out_dir, char** summary_json);

/* ---- detection ---------------------------------------------------------- */

typedef struct cc_detector cc_detector;

/* Generator checkpoint (CKPT1); the architecture is read from it. */
CC_API cc_status cc_detector_load(const char* checkpoint_path, cc_detector** out);
/* params_json: {"patch_size", "overlap", "tau", "min_area", "reciprocal",
 * "threads"}; NULL for defaults. stats_json (may be NULL) receives the
 * resolved parameters, tile count and component statistics. */
CC_API cc_status cc_detect(cc_detector* detector, const cc_image* image, const char* params_json,
                           cc_mask** mask, char** stats_json);
CC_API cc_status cc_detect_resolve(const char* params_json, char** resolved_json);
CC_API void cc_detector_free(cc_detector* detector);

/* 8-connected components with area >= min_area. */
CC_API cc_status cc_filter_components(const cc_mask* mask, uint64_t min_area, cc_mask** out,
                                      uint64_t* components_before, uint64_t* components_kept);

/* ---- evaluation --------------------------------------------------------- */

typedef struct cc_metrics {
    uint64_t tp;
    uint64_t fp;
    uint64_t fn;
    double precision;
    double recall;
    double f1;
    double tolerance_px;
} cc_metrics;

CC_API cc_status cc_evaluate(const cc_mask* pred, const cc_mask* truth, double tolerance_px, cc_metrics* out);
/* Sums counts and recomputes the ratios. */
CC_API cc_status cc_metrics_accumulate(const cc_metrics* reports, size_t count, cc_metrics* out);
/* Per-cell CSV for a rows x cols grid (remainder pixels go to the last
 * row and column; cells without cracks leave the metric fields empty). */
CC_API cc_status cc_region_grid_csv(const cc_mask* pred, const cc_mask* truth, uint32_t rows, uint32_t cols,
                                    double tolerance_px, char** csv);
/* name,precision,recall,f1,efficiency */
CC_API cc_status cc_report_table(const char* const* names, const cc_metrics* metrics,
                                 const double* sec_per_image, size_t count, char** csv);

CC_API cc_status cc_baseline_sobel(const cc_image* image, double threshold, cc_mask** out);
CC_API cc_status cc_baseline_canny(const cc_image* image, double low, double high, double sigma, cc_mask** out);

/* ---- diagnostics -------------------------------------------------------- */

/* Finite-difference check of every layer kind in double precision.
 * report_csv receives "layer,kind,max_rel_error,probes,skipped";
 * worst_rel_error receives the largest relative error. */
CC_API cc_status cc_gradcheck(uint64_t seed, char** report_csv, double* worst_rel_error);

#ifdef __cplusplus
}
#endif

#endif /* CONNCRACK_H */
