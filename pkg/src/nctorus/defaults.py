"""Single table of numeric defaults used across the library and the CLI.

Every entry can be overridden per experiment config (see cli.py).  Tests pin
their own tolerances explicitly; the values here are the library defaults.
"""

DEFAULTS = {
    # spectral-gap floor for functional calculus / inversion preconditions
    "gap": 1e-8,
    # relative tolerance for exact algebraic identities
    "algebra_tol": 1e-12,
    # residual tolerance for the inverse_element post-check
    "inverse_post_tol": 1e-6,
    # relative coefficient mass that may be clipped before a matrix build
    "clip_tol": 1e-12,
    # relative pruning floor applied to functional-calculus outputs
    "prune_tol": 1e-14,
    # finite-difference base step for xi-derivatives (scaled by max(1, |xi|))
    "fd_h0": 1e-3,
    # cap on |alpha| for xi-derivatives
    "max_xi_derivative": 4,
    # sphere samples for ellipticity checks (n = 2 angular grid)
    "sphere_samples": 64,
    # random probe vectors for the elliptic estimate
    "probe_samples": 32,
    # default RNG seed recorded in outputs
    "seed": 1234,
    # Meyer window construction
    "meyer_quad_points": 16384,
    "meyer_check_radius": 8,
    "meyer_phi0_tol": 1e-10,
    "meyer_lattice_tol": 1e-8,
    "meyer_integral_tol": 1e-6,
    # integral-trace quadrature
    "quad_step": 0.5,
    "quad_box_pad": 12.0,
    # shell diagnostics
    "shell_radii": [4, 8, 16, 32],
    "points_per_shell": None,  # None = full shells
    # default truncations per task (overridable)
    "K": 12,
    "margin": 2,
}
