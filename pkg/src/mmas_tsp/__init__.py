"""Parallel MAX-MIN Ant System for the symmetric TSP."""

from .colony import MmasConfig, RunResult, run
from .errors import ConfigError, ParseError, SelectionError, TourError
from .instance import (DistanceMatrix, NeighborLists, Tour, TspInstance, build_distance_matrix,
                       build_neighbor_lists, load_instance, parse_tsplib)
from .local_search import two_opt
from .pheromone import MmasParams
from .stats import FriedmanResult, friedman_test
from .tabu import make_tabu

__version__ = "0.1.0"
