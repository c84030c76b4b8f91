"""Structural (k-hop) and positional encoders, readouts and projection heads."""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Literal, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .features import GraphBatch, StructuralFeatureSet, featurize
from .graph import Graph

Mode = Literal["train", "eval"]


@dataclass(frozen=True)
class ModelConfig:
    in_dim: int = 1
    edge_dim: int = 0
    layers: int = 3
    hops: int = 3
    hidden_dim: int = 32
    pe_dim: int = 6
    mlp_depth: int = 2
    use_closed_walks: bool = True
    use_high_order: bool = True
    use_positional: bool = True
    use_edge_centrality: bool = True
    use_raw_edge_features: bool = True
    raw_closed_walks: bool = False
    khop_denominator: Literal["khop", "one_hop"] = "khop"
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        for name in ("in_dim", "layers", "hidden_dim", "pe_dim", "mlp_depth"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.edge_dim < 0:
            raise ValueError("edge_dim must be nonnegative")
        if self.hops < 2:
            raise ValueError("hops must be >= 2")
        if self.khop_denominator not in ("khop", "one_hop"):
            raise ValueError(f"unknown k-hop denominator {self.khop_denominator!r}")

    @property
    def embedding_dim(self) -> int:
        return self.hidden_dim * (2 if self.use_positional else 1)

    @classmethod
    def variant(cls, name: str, **overrides) -> "ModelConfig":
        """Named ablations: full, pos_only, cw_only, local_only."""
        flags = {
            "full": {},
            "pos_only": dict(use_closed_walks=False, use_high_order=False, use_positional=True),
            "cw_only": dict(use_closed_walks=True, use_high_order=False, use_positional=False),
            "local_only": dict(use_closed_walks=False, use_high_order=False, use_positional=False),
        }
        if name not in flags:
            raise ValueError(f"unknown variant {name!r}; choose from {sorted(flags)}")
        return cls(**{**flags[name], **overrides})


@dataclass
class ModelParams:
    config: ModelConfig
    tensors: dict[str, Tensor]
    bn_state: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def trainable(self) -> list[Tensor]:
        return list(self.tensors.values())

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.config,
            {k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.tensors.items()},
            {k: {s: a.copy() for s, a in v.items()} for k, v in self.bn_state.items()},
        )


@dataclass
class GraphEmbeddingOutput:
    node_struct: Tensor
    node_pos: Tensor | None
    node_concat: Tensor
    z: Tensor
    node_offsets: np.ndarray

    def nodes_of(self, i: int) -> slice:
        return slice(int(self.node_offsets[i]), int(self.node_offsets[i + 1]))


# parameter construction ------------------------------------------------------

class _Init:
    def __init__(self, seed: int):
        self.rng = np.random.default_rng(seed)
        self.tensors: dict[str, Tensor] = {}
        self.bn: dict[str, dict[str, np.ndarray]] = {}

    def linear(self, name: str, fan_in: int, fan_out: int) -> None:
        bound = 1.0 / np.sqrt(fan_in)
        self.tensors[f"{name}.W"] = Tensor(self.rng.uniform(-bound, bound, (fan_in, fan_out)), requires_grad=True)
        self.tensors[f"{name}.b"] = Tensor(self.rng.uniform(-bound, bound, (fan_out,)), requires_grad=True)

    def batch_norm(self, name: str, dim: int) -> None:
        self.tensors[f"{name}.gamma"] = Tensor(np.ones(dim), requires_grad=True)
        self.tensors[f"{name}.beta"] = Tensor(np.zeros(dim), requires_grad=True)
        self.bn[name] = {"mean": np.zeros(dim), "var": np.ones(dim)}

    def mlp(self, name: str, dims: Sequence[int], norm: bool) -> None:
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.linear(f"{name}.{i}", a, b)
            if norm and i < len(dims) - 2:
                self.batch_norm(f"{name}.{i}.bn", b)

    def scalar(self, name: str, value: float = 0.0) -> None:
        self.tensors[name] = Tensor(np.full(1, value), requires_grad=True)


def _mlp_dims(d_in: int, d: int, depth: int) -> list[int]:
    return [d_in] + [d] * depth


def init_params(config: ModelConfig, seed: int = 0) -> ModelParams:
    """Uniform ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))`` weights, ``eps = 0``."""
    init = _Init(seed)
    d, T = config.hidden_dim, config.layers
    for l in range(T):
        d_in = config.in_dim if l == 0 else d
        init.scalar(f"struct.{l}.eps")
        init.mlp(f"struct.{l}.phi", _mlp_dims(d_in, d, config.mlp_depth), norm=True)
        init.mlp(f"struct.{l}.edge_c", [3, d_in, d_in], norm=False)
        if config.edge_dim:
            init.mlp(f"struct.{l}.edge_b", [config.edge_dim, d_in, d_in], norm=False)
    init.mlp("struct.theta", [T * d, d, d], norm=False)
    init.mlp("struct.proj", [d, d, d], norm=False)
    if config.use_positional:
        init.linear("pos.in", config.pe_dim, d)
        for l in range(T):
            init.scalar(f"pos.{l}.eps")
            init.mlp(f"pos.{l}.phi", _mlp_dims(d, d, config.mlp_depth), norm=True)
            init.mlp(f"pos.{l}.edge_c", [3, d, d], norm=False)
            if config.edge_dim:
                init.mlp(f"pos.{l}.edge_b", [config.edge_dim, d, d], norm=False)
        init.mlp("pos.theta", [T * d, d, d], norm=False)
        init.mlp("pos.proj", [d, d, d], norm=False)
    return ModelParams(config, init.tensors, init.bn)


# building blocks --------------------------------------------------------------

def linear(params: ModelParams, name: str, x) -> Tensor:
    return ad.add(ad.matmul(x, params[f"{name}.W"]), params[f"{name}.b"])


def run_mlp(params: ModelParams, name: str, x, n_layers: int, mode: Mode, track_stats: bool = True) -> Tensor:
    """Linear layers with BN + ReLU between them (BN only where it was initialised)."""
    for i in range(n_layers):
        x = linear(params, f"{name}.{i}", x)
        if i == n_layers - 1:
            break
        bn_name = f"{name}.{i}.bn"
        if bn_name in params.bn_state:
            x = _batch_norm(params, bn_name, x, mode, track_stats)
        x = ad.relu(x)
    return x


def _batch_norm(params: ModelParams, name: str, x: Tensor, mode: Mode, track_stats: bool) -> Tensor:
    cfg = params.config
    gamma, beta = params[f"{name}.gamma"], params[f"{name}.beta"]
    state = params.bn_state[name]
    if mode == "eval":
        return ad.affine_norm(x, state["mean"], state["var"], gamma, beta, cfg.bn_eps)
    y, mu, var = ad.batch_norm(x, gamma, beta, cfg.bn_eps)
    if track_stats:
        n = x.shape[0]
        unbiased = var * n / (n - 1) if n > 1 else var
        mom = cfg.bn_momentum
        state["mean"] = mom * state["mean"] + (1 - mom) * mu
        state["var"] = mom * state["var"] + (1 - mom) * unbiased
    return y


def local_message(batch: GraphBatch, h, edge_emb) -> Tensor:
    """``sum_{u in N(v)} (h_u + e_vu)``."""
    msg = ad.spmm(batch.adjacency, h)
    if edge_emb is not None:
        msg = ad.add(msg, ad.spmm(batch.incidence, edge_emb))
    return msg


def genhop_preactivation(
    batch: GraphBatch,
    h,
    edge_emb,
    eps,
    use_closed_walks: bool = True,
    use_high_order: bool = True,
) -> Tensor:
    """The bracket fed to the layer MLP: self, local, closed-walk and k-hop terms."""
    h = ad.as_tensor(h)
    out = ad.add(ad.add(h, ad.mul(h, eps)), local_message(batch, h, edge_emb))
    if use_closed_walks:
        out = ad.add(out, ad.mul(h, batch.walk_coeff[:, None]))
    if use_high_order:
        out = ad.add(out, ad.spmm(batch.khop, h))
    return out


def genhop_layer(batch, h, edge_emb, eps, mlp: Callable[[Tensor], Tensor], config: ModelConfig) -> Tensor:
    return mlp(genhop_preactivation(batch, h, edge_emb, eps, config.use_closed_walks, config.use_high_order))


def pos_layer(batch, h, edge_emb, eps, mlp: Callable[[Tensor], Tensor]) -> Tensor:
    return mlp(genhop_preactivation(batch, h, edge_emb, eps, use_closed_walks=False, use_high_order=False))


def edge_embedding(params: ModelParams, batch: GraphBatch, prefix: str) -> Tensor | None:
    cfg = params.config
    emb = None
    if cfg.use_edge_centrality and batch.num_edges:
        emb = run_mlp(params, f"{prefix}.edge_c", batch.centrality, 2, "train")
    if cfg.use_raw_edge_features and cfg.edge_dim and batch.edge_attr is not None and batch.num_edges:
        eb = run_mlp(params, f"{prefix}.edge_b", batch.edge_attr, 2, "train")
        emb = eb if emb is None else ad.add(emb, eb)
    return emb


# forward ---------------------------------------------------------------------

def _branch(params, batch, prefix, h, mode, track_stats, config, structural: bool):
    per_layer = []
    for l in range(config.layers):
        edge_emb = edge_embedding(params, batch, f"{prefix}.{l}")
        mlp = lambda x, l=l: ad.relu(run_mlp(params, f"{prefix}.{l}.phi", x, config.mlp_depth, mode, track_stats))
        eps = params[f"{prefix}.{l}.eps"]
        if structural:
            h = genhop_layer(batch, h, edge_emb, eps, mlp, config)
        else:
            h = pos_layer(batch, h, edge_emb, eps, mlp)
        per_layer.append(h)
    pooled = ad.spmm(batch.pool, ad.concat(per_layer, axis=1))
    z = run_mlp(params, f"{prefix}.theta", pooled, 2, mode)
    nodes = run_mlp(params, f"{prefix}.proj", h, 2, mode)
    return nodes, z


def forward_batch(
    batch: GraphBatch,
    params: ModelParams,
    mode: Mode = "eval",
    track_stats: bool = True,
) -> GraphEmbeddingOutput:
    cfg = params.config
    if batch.x.shape[1] != cfg.in_dim:
        raise ValueError(f"node features have width {batch.x.shape[1]}, model expects {cfg.in_dim}")
    s_nodes, s_z = _branch(params, batch, "struct", batch.x, mode, track_stats, cfg, structural=True)
    if not cfg.use_positional:
        return GraphEmbeddingOutput(s_nodes, None, s_nodes, s_z, batch.node_offsets)
    h0 = linear(params, "pos.in", batch.pe)
    p_nodes, p_z = _branch(params, batch, "pos", h0, mode, track_stats, cfg, structural=False)
    return GraphEmbeddingOutput(
        s_nodes, p_nodes, ad.concat([s_nodes, p_nodes], axis=1), ad.concat([s_z, p_z], axis=1), batch.node_offsets
    )


def prepare(graphs: Graph | Sequence[Graph], config: ModelConfig) -> list[StructuralFeatureSet]:
    graphs = [graphs] if isinstance(graphs, Graph) else list(graphs)
    return [featurize(g, config.hops, config.pe_dim, config.khop_denominator) for g in graphs]


def forward_embed(
    g: Graph | Sequence[Graph] | Sequence[StructuralFeatureSet],
    params: ModelParams,
    mode: Mode = "eval",
    seed: int | np.random.Generator | None = None,
    track_stats: bool = True,
) -> GraphEmbeddingOutput:
    """Embed one graph or a batch.

    Train mode flips PE signs at random (seeded) and normalises with batch
    statistics; eval mode uses canonical signs and running statistics.
    """
    cfg = params.config
    items = [g] if isinstance(g, (Graph, StructuralFeatureSet)) else list(g)
    feats = [it if isinstance(it, StructuralFeatureSet) else prepare(it, cfg)[0] for it in items]
    rng = None
    if mode == "train":
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    elif mode != "eval":
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    batch = GraphBatch.from_features(feats, cfg.raw_closed_walks, rng)
    return forward_batch(batch, params, mode, track_stats)


# checkpoint ------------------------------------------------------------------

CHECKPOINT_MAGIC = b"GHNCKPT\x00"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: ModelParams, path: str | Path, extra: dict | None = None) -> None:
    """Magic, version, JSON header length, JSON header, then float64 LE blobs."""
    blobs, entries, offset = [], [], 0
    for name, t in params.tensors.items():
        raw = np.ascontiguousarray(t.data, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(t.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = {
        "config": asdict(params.config),
        "tensors": entries,
        "bn_state": {k: {s: a.tolist() for s, a in v.items()} for k, v in params.bn_state.items()},
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(head)))
        f.write(head)
        for b in blobs:
            f.write(b)


def load_checkpoint(path: str | Path) -> tuple[ModelParams, dict]:
    data = Path(path).read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a model checkpoint")
    pos = len(CHECKPOINT_MAGIC)
    version, hlen = struct.unpack_from("<II", data, pos)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos += 8
    header = json.loads(data[pos : pos + hlen].decode("utf-8"))
    body = pos + hlen
    tensors = {}
    for e in header["tensors"]:
        start = body + e["offset"]
        if start + e["nbytes"] > len(data):
            raise ValueError(f"{path}: truncated tensor {e['name']}")
        arr = np.frombuffer(data, dtype="<f8", count=e["nbytes"] // 8, offset=start).reshape(e["shape"])
        tensors[e["name"]] = Tensor(arr.astype(np.float64), requires_grad=True)
    bn = {k: {s: np.asarray(a, dtype=np.float64) for s, a in v.items()} for k, v in header["bn_state"].items()}
    return ModelParams(ModelConfig(**header["config"]), tensors, bn), header["extra"]
