# Cross-route validation: binning lattice laws onto comparison grids, distances and moments,
# route comparisons, convergence studies, and the files that record them.

from .binning import (chain_steps, dilation_for, site_factor, common_spacing, units_to_grid, histogram,
                      project_field)
from .metrics import Distance, distance, units_moments
from .study import (Scenario, RouteResult, ComparisonReport, Route, routes, route_grid, compare_routes,
                    convergence_study, trend_holds, stable_tau, constant_rate)
from .writers import (format_number, write_csv, write_json, write_trajectories, write_absorptions, write_fields,
                      write_line_grids, write_triangle_matrix, write_triangle_points, boundary_summary,
                      write_manifest, versions)

from . import binning, metrics, study, writers
