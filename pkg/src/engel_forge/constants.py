"""Numerical tolerances and default parameters, pinned in one place.

All angles are radians, all coordinates live on the closed unit ball D3
(or its product with [0,1]) with the Euclidean metric.
"""

# Unit-length / orthogonality tolerances (two orders above double-precision
# noise for composed operations).
TAU_UNIT = 1e-9
TAU_ORTH = 1e-9

# Regularity: a curve is "stalled" when its speed falls below this.
TAU_REG = 1e-7

# Affine chart domain guard: forward chart requires x > TAU_CHART.
TAU_CHART = 1e-6

# Closed-curve gluing: endpoint gap and derivative-jet matching order.
TAU_GLUE = 1e-8
J_GLUE = 4

# Finite differences on [0,1]-normalized parameters; second derivatives use
# 5-point stencils.
H_FD = 1e-5

# Curve-family slice agreement / continuity budget (per unit parameter step).
TAU_FAMILY = 1e-6
LIPSCHITZ_FAMILY = 200.0

# Support-parametrization closure residual and positivity floor.
TAU_CLOSE = 1e-8
TAU_RHO = 1e-9

# Convexity decision grid and self-intersection threshold.
CONVEXITY_SAMPLES = 2048
SELF_INTERSECT_TOL = 1e-6

# Inflection clustering threshold for tameness reports, and the flatness
# budget for horizontal-band certificates (absolute, orders 0..J_GLUE).
INFLECTION_CLUSTER_TOL = 1e-5
TAU_BAND = 1e-3

# Engel criterion branch tolerances.
TOL_CONVEX = 1e-6
TOL_CONTACT = 1e-6
TAU_FLAG = 1e-8

# Shell geometry defaults.
RHO = 0.2                 # radial band [RHO, 2*RHO] strictly inside (0,1)
COLLAR_WIDTH = 0.05       # width of Op(boundary) in each coordinate
TAU_DOM = 1e-3            # domination margin
TAU_ROOT = 1e-9           # monotone root finding (bisection + Newton polish)

# Filling pipeline defaults.
PULL_MARGIN = 1.5707963267948966   # pi/2 safety margin on the pull constant
DELTA_CUTOFF = 0.1                 # radial cutoff width of the insertion
EPS_STRETCH = 0.05                 # stretch window of the stage-3 deformation
BLEND_WINDOW = 0.02                # junction smoothing window (parameter fraction)

# Grids.
GRID_RADIAL = (257, 257)           # (radius, t) for radially symmetric checks
GRID_FULL = (33, 33, 33, 65)       # (x, y, z, t) product grid
