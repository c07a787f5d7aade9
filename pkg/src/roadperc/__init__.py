"""Road-network robustness: simplified intersection graphs, bond percolation
under random failure and betweenness attack, and service reachability."""
from .geo_io import (
    CATEGORIES,
    GeoPoint,
    InputError,
    ParseError,
    PathRecord,
    ValidationError,
    VenueRecord,
    haversine_km,
    parse_paths_file,
    parse_venues_file,
    read_paths,
    read_venues,
)
from .road_graph import RoadNetwork, NetworkMetrics, build_network, compute_metrics
from .percolation import (
    Checkpoint,
    PercolationEnsemble,
    PercolationRun,
    detect_threshold,
    pearson,
    run_attack,
    run_error,
    run_error_ensemble,
)
from .betweenness import edge_betweenness
from .services import AvailabilityReport, assign_venues, availability_at_threshold

__version__ = "0.1.0"
