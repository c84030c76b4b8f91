"""k-hop message passing with closed-walk, centrality and positional features."""
from .graph import Graph, from_edge_list, permute, closed_walk_profile, adjacency_power, normalized_khop_weights
from .model import ModelConfig, init_params, forward_embed

__all__ = [
    "Graph",
    "from_edge_list",
    "permute",
    "closed_walk_profile",
    "adjacency_power",
    "normalized_khop_weights",
    "ModelConfig",
    "init_params",
    "forward_embed",
]
__version__ = "0.1.0"
