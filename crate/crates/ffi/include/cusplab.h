#ifndef CUSPLAB_H
#define CUSPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Status returned by every fallible call.
typedef enum CusplabStatus {
  CUSPLAB_STATUS_OK = 0,
  CUSPLAB_STATUS_NULL_POINTER = 1,
  // Bad input: configuration, profile or dimension.
  CUSPLAB_STATUS_INVALID_ARGUMENT = 2,
  // Point or parameter outside the domain of an operation.
  CUSPLAB_STATUS_DOMAIN = 3,
  // Meshing, assembly, solver or quadrature failure.
  CUSPLAB_STATUS_NUMERICAL = 4,
  CUSPLAB_STATUS_INSUFFICIENT_DATA = 5,
  CUSPLAB_STATUS_PANIC = 6,
} CusplabStatus;

// Kind tag of an extended real.
typedef enum CusplabXKind {
  CUSPLAB_X_KIND_FINITE = 0,
  // `value + δ` for arbitrarily small δ > 0.
  CUSPLAB_X_KIND_ABOVE = 1,
  CUSPLAB_X_KIND_ARBITRARY_LARGE = 2,
  CUSPLAB_X_KIND_INFINITE = 3,
} CusplabXKind;

// Opaque geometry context.
typedef struct CusplabGeometry CusplabGeometry;

// Opaque graded mesh.
typedef struct CusplabMesh CusplabMesh;

// Opaque finite element solution.
typedef struct CusplabSolution CusplabSolution;

typedef struct CusplabXReal {
  enum CusplabXKind kind;
  // Meaningful for `Finite` and `Above`; +∞ otherwise.
  double value;
} CusplabXReal;

typedef struct CusplabThresholds {
  struct CusplabXReal r1;
  struct CusplabXReal r2;
  struct CusplabXReal q1;
  struct CusplabXReal q2;
} CusplabThresholds;

typedef struct CusplabSlice {
  double r;
  double rho_hat;
  double z_hat;
} CusplabSlice;

typedef struct CusplabErrorNorms {
  double l2;
  double h1_semi;
} CusplabErrorNorms;

typedef struct CusplabAnnulusFit {
  double slope;
  double r_squared;
  double s;
  double effective_dimension;
  struct CusplabXReal critical_exponent;
  uintptr_t rings_used;
  bool reliable;
} CusplabAnnulusFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failure on this thread; empty after success.
// Valid until the next call into the library on the same thread.
const char *cusplab_last_error(void);

// Homogeneous-data thresholds r₁, r₂, q₁, q₂. `p0 = INFINITY` is allowed.
//
// # Safety
// `out` must be null or point to writable memory for one struct.
enum CusplabStatus cusplab_homogeneous_thresholds(uintptr_t d,
                                                  double theta,
                                                  double p0,
                                                  double alpha0,
                                                  struct CusplabThresholds *out);

// Geometry context for the power profile σ(ρ) = ρ^θ on (0, r0] in dimension `dim`.
//
// # Safety
// `out` must be null or point to writable memory for one pointer.
enum CusplabStatus cusplab_geometry_new(double theta,
                                        double r0,
                                        uintptr_t dim,
                                        struct CusplabGeometry **out);

// # Safety
// `h` must be null or a handle from `cusplab_geometry_new` not yet freed.
void cusplab_geometry_free(struct CusplabGeometry *h);

// M(z) = ∫₀^{|z|} μ.
//
// # Safety
// `h` must be a live geometry handle and `out` writable.
enum CusplabStatus cusplab_geometry_big_m(const struct CusplabGeometry *h, double z, double *out);

// g(x) = √(½|x̄|² + M(x_d)) at a point with `n` = dim coordinates.
//
// # Safety
// `h` must be a live geometry handle, `x` must hold `n` doubles and `out` be writable.
enum CusplabStatus cusplab_geometry_g(const struct CusplabGeometry *h,
                                      const double *x,
                                      uintptr_t n,
                                      double *out);

// Γ_R ∩ S: radius ρ̂ and height ẑ.
//
// # Safety
// `h` must be a live geometry handle and `out` writable.
enum CusplabStatus cusplab_geometry_level_set_slice(const struct CusplabGeometry *h,
                                                    double big_r,
                                                    struct CusplabSlice *out);

// Graded mesh of the box around the tip for σ(ρ) = ρ^θ.
//
// # Safety
// `out` must be null or point to writable memory for one pointer.
enum CusplabStatus cusplab_mesh_build(double theta,
                                      double r0,
                                      double h0,
                                      double beta,
                                      uintptr_t levels,
                                      struct CusplabMesh **out);

// # Safety
// `h` must be null or a handle from `cusplab_mesh_build` not yet freed.
void cusplab_mesh_free(struct CusplabMesh *h);

// Number of nodes, or 0 for a null handle.
//
// # Safety
// `h` must be null or a live mesh handle.
uintptr_t cusplab_mesh_node_count(const struct CusplabMesh *h);

// Number of triangles, or 0 for a null handle.
//
// # Safety
// `h` must be null or a live mesh handle.
uintptr_t cusplab_mesh_triangle_count(const struct CusplabMesh *h);

// Solves a manufactured case (`smooth_bulk`, `interface_flux`,
// `cone_reference`) or, when `case_name` is null, −div(κ∇u) = 1 with zero
// boundary data. The mesh handle stays owned by the caller.
//
// # Safety
// `mesh` must be a live mesh handle, `case_name` null or a NUL-terminated
// string, and `out` writable.
enum CusplabStatus cusplab_solve(const struct CusplabMesh *mesh,
                                 const char *case_name,
                                 double kappa1,
                                 double kappa2,
                                 double tol,
                                 struct CusplabSolution **out);

// # Safety
// `h` must be null or a handle from `cusplab_solve` not yet freed.
void cusplab_solution_free(struct CusplabSolution *h);

// Copies up to `len` nodal values into `buf` and stores the node count in `count`.
//
// # Safety
// `h` must be a live solution handle, `buf` null or valid for `len`
// doubles, and `count` null or writable.
enum CusplabStatus cusplab_solution_values(const struct CusplabSolution *h,
                                           double *buf,
                                           uintptr_t len,
                                           uintptr_t *count);

// L² and H¹-seminorm errors against the exact solution of a manufactured case.
//
// # Safety
// `h` must be a live solution handle and `out` writable.
enum CusplabStatus cusplab_solution_error_norms(const struct CusplabSolution *h,
                                                struct CusplabErrorNorms *out);

// Annulus fit of |∇u_h|^p on region 1, 2, or both (0).
//
// # Safety
// `h` must be a live solution handle and `out` writable.
enum CusplabStatus cusplab_probe_gradient(const struct CusplabSolution *h,
                                          uint32_t region,
                                          double p,
                                          struct CusplabAnnulusFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CUSPLAB_H */
