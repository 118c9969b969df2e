"""Monge maps with distance cost on finite geodesic spaces, built from transport rays."""

from .disintegration import (ConditionalFamily, check_equintegrability, check_regularity, disintegrate,
                             evolution_profile, evolve_set, plan_families)
from .errors import GeoMongeError
from .flow import DiscreteCurrent, boundary, build_current, density_rho, solve_transport_equation
from .kantorovich import (DiscreteMeasure, MonotoneCertificate, PotentialPair, TransportPlan, certify_monotone,
                          compute_potential, enumerate_vertex_couplings, solve_kantorovich)
from .mcp import McpParams, McpReport, c_K_bound, mcp_contract_check, s_K, verify_density_bounds, verify_tv_bound
from .monge import (TransportMap, assemble_monge_map, fix_common_mass, monotone_rearrangement_1d,
                    verify_cost_identity)
from .rays import (RaySystem, build_G, build_ray_system, check_structure_axioms, close_cycles, endpoints,
                   ray_system_for, transport_sets)
from .scenarios import Scenario, export_report, run_scenario
from .space import (INFINITY, FiniteGeodesicSpace, GeodesicPath, StructureReport, build_counterexample_space,
                    build_segment, geodesic_between, validate_structure)

__version__ = "0.1.0"
