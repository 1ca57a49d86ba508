from multiscale.clustering import Clustering, louvain, topology_graph
from multiscale.fusion import FIXED_MIX, MultiScaleFusion, ScoreBundle, population_std

__all__ = [
    "FIXED_MIX",
    "Clustering",
    "MultiScaleFusion",
    "ScoreBundle",
    "louvain",
    "population_std",
    "topology_graph",
]
