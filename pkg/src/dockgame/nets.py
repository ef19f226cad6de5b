"""E(3)-equivariant message-passing layers and the three player models.

The shared layer updates node features, coordinates and dense atom-residue
pair embeddings. Feature updates consume only invariant quantities
(features, squared distances, pair embeddings); coordinate updates move
each node along relative position vectors, which keeps the whole stack
equivariant under rotations and translations.

Three assemblies are built from the same layer:

* pocket model — classifies pocket residues and predicts the pocket
  centroid; both coordinate streams stay frozen.
* ligand model — refines ligand atom coordinates inside the pocket
  subgraph; residue coordinates are fixed context.
* protein model — refines pocket residue coordinates; atom coordinates
  are fixed context.
"""

import io
import json
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import PocketSelection

CHECKPOINT_VERSION = "dockgame-checkpoint-v1"

# forward-pass instrumentation, used by loop-count tests
FORWARD_COUNTS = {"pocket": 0, "ligand": 0, "protein": 0}


def reset_forward_counts():
    for k in FORWARD_COUNTS:
        FORWARD_COUNTS[k] = 0


@dataclass(frozen=True)
class NetConfig:
    d_l: int = 8
    d_p: int = 16
    layers_pocket: int = 1
    layers_ligand: int = 5
    layers_protein: int = 5
    hidden_pocket: int = 128
    hidden_ligand: int = 512
    hidden_protein: int = 512
    tau: float = 1.0
    eps: float = 1e-8
    k_min: int = 8


def tiny_config(**overrides):
    """Desk-scale preset: {1,2,2} layers with {16,32,32} hidden units."""
    base = dict(
        layers_pocket=1, layers_ligand=2, layers_protein=2,
        hidden_pocket=16, hidden_ligand=32, hidden_protein=32,
    )
    base.update(overrides)
    return NetConfig(**base)


class ModelParams:
    """Named parameter store with gradient buffers; shapes fixed at build."""

    def __init__(self):
        self._tensors = {}

    def add(self, name, array):
        if name in self._tensors:
            raise ValueError(f"duplicate parameter {name}")
        t = Tensor(np.array(array, dtype=np.float64), requires_grad=True)
        t.zero_grad()
        self._tensors[name] = t
        return t

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def names(self):
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def zero_grad(self):
        for t in self._tensors.values():
            t.zero_grad()

    def scale_grads(self, factor):
        for t in self._tensors.values():
            t.grad *= factor

    def max_abs_grad(self):
        return max((np.abs(t.grad).max() for t in self._tensors.values()
                    if t.grad.size), default=0.0)

    def copy(self):
        out = ModelParams()
        for name, t in self._tensors.items():
            out.add(name, t.data.copy())
        return out

    def perturbed(self, rng, magnitude):
        out = ModelParams()
        for name, t in self._tensors.items():
            out.add(name, t.data + magnitude * rng.standard_normal(t.data.shape))
        return out

    def state_dict(self):
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_state_dict(self, state):
        if set(state) != set(self._tensors):
            missing = set(self._tensors) - set(state)
            extra = set(state) - set(self._tensors)
            raise ValueError(f"parameter name mismatch: missing={missing}, extra={extra}")
        for name, arr in state.items():
            t = self._tensors[name]
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}")
            t.data = arr.copy()
            t.zero_grad()


@dataclass
class LayerState:
    atom_feats: Tensor      # (n_l, d)
    residue_feats: Tensor   # (n_p', d)
    atom_coords: Tensor     # (n_l, 3)
    residue_coords: Tensor  # (n_p', 3)
    pair_embed: Tensor      # (n_l * n_p', d), row-major over (atom, residue)


def _init_linear(params, rng, prefix, n_in, n_out, scale=None):
    if scale is None:
        scale = 1.0 / np.sqrt(n_in)
    params.add(prefix + ".w", scale * rng.standard_normal((n_in, n_out)))
    params.add(prefix + ".b", np.zeros(n_out))


def _init_mlp(params, rng, prefix, n_in, n_hidden, n_out, out_scale=None):
    _init_linear(params, rng, prefix + ".l1", n_in, n_hidden)
    _init_linear(params, rng, prefix + ".l2", n_hidden, n_out, scale=out_scale)


def _linear(params, prefix, x):
    return x @ params[prefix + ".w"] + params[prefix + ".b"]


def _mlp(params, prefix, x, dropout=0.0, rng=None):
    h = ad.silu(_linear(params, prefix + ".l1", x))
    if dropout > 0.0:
        h = ad.dropout(h, dropout, rng)
    return _linear(params, prefix + ".l2", h)


def _init_layer(params, rng, prefix, d, update_atoms, update_residues):
    _init_mlp(params, rng, prefix + ".msg_lig", 2 * d + 1, d, d)
    _init_mlp(params, rng, prefix + ".msg_prot", 2 * d + 1, d, d)
    _init_mlp(params, rng, prefix + ".msg_int", 3 * d + 1, d, d)
    _init_mlp(params, rng, prefix + ".upd_l", 2 * d, d, d)
    _init_mlp(params, rng, prefix + ".upd_p", 2 * d, d, d)
    _init_linear(params, rng, prefix + ".pair", d, d)
    # small-gain coordinate heads so fresh models start near the identity map
    if update_atoms:
        _init_mlp(params, rng, prefix + ".coord_lig", d, d, 1, out_scale=0.01)
        _init_mlp(params, rng, prefix + ".coord_int_l", d, d, 1, out_scale=0.01)
    if update_residues:
        _init_mlp(params, rng, prefix + ".coord_prot", d, d, 1, out_scale=0.01)
        _init_mlp(params, rng, prefix + ".coord_int_p", d, d, 1, out_scale=0.01)


def _init_model(rng, cfg, *, hidden, layers, update_atoms, update_residues,
                cls_head):
    params = ModelParams()
    _init_linear(params, rng, "embed_l", cfg.d_l, hidden)
    _init_linear(params, rng, "embed_p", cfg.d_p, hidden)
    for i in range(layers):
        _init_layer(params, rng, f"L{i}", hidden, update_atoms, update_residues)
    if cls_head:
        _init_mlp(params, rng, "cls", hidden, hidden, 1)
    return params


def init_pocket_model(cfg, rng):
    return _init_model(rng, cfg, hidden=cfg.hidden_pocket,
                       layers=cfg.layers_pocket, update_atoms=False,
                       update_residues=False, cls_head=True)


def init_ligand_model(cfg, rng):
    return _init_model(rng, cfg, hidden=cfg.hidden_ligand,
                       layers=cfg.layers_ligand, update_atoms=True,
                       update_residues=False, cls_head=False)


def init_protein_model(cfg, rng):
    return _init_model(rng, cfg, hidden=cfg.hidden_protein,
                       layers=cfg.layers_protein, update_atoms=False,
                       update_residues=True, cls_head=False)


def _degrees(dst, n):
    deg = np.bincount(dst, minlength=n).astype(np.float64)
    return np.maximum(deg, 1.0)[:, None]


def _edge_messages(params, prefix, feats_src, feats_dst, x_src, x_dst,
                   extra=None, dropout=0.0, rng=None):
    diff = x_src - x_dst
    d2 = ad.tsum(ad.square(diff), axis=1, keepdims=True)
    parts = [feats_src, feats_dst, d2]
    if extra is not None:
        parts.append(extra)
    m = _mlp(params, prefix, ad.concat(parts, axis=1), dropout=dropout, rng=rng)
    return m, diff, d2


def _coord_shift(params, prefix, m, diff, d2, dst, n, eps):
    # move dst along (x_dst - x_src); diff is src - dst, hence the sign flip
    dist = ad.sqrt(d2 + eps)
    w = _mlp(params, prefix, m)
    per_edge = (-diff) * (w / (dist + 1.0))
    return ad.segment_sum(per_edge, dst, n) * (1.0 / _degrees(dst, n))


def fabind_layer_forward(state, graph, params, layer_index,
                         freeze_residue_coords=False, freeze_atom_coords=False,
                         *, eps=1e-8, dropout=0.0, rng=None):
    """One message-passing layer over the heterogeneous complex graph."""
    n_l, n_p = graph.n_atoms, graph.n_residues
    if state.atom_feats.shape[0] != n_l or state.residue_feats.shape[0] != n_p:
        raise ValueError("layer state does not match graph shape")
    pre = f"L{layer_index}"
    h_l, h_p = state.atom_feats, state.residue_feats
    x_l, x_p = state.atom_coords, state.residue_coords
    d = h_l.shape[1]

    zero_l = Tensor(np.zeros((n_l, d)))
    zero_p = Tensor(np.zeros((n_p, d)))

    # intra-ligand messages (chemical bonds, both directions)
    lig_src, lig_dst = graph.directed(graph.ligand_edges)
    if lig_src.size:
        m_lig, diff_lig, d2_lig = _edge_messages(
            params, pre + ".msg_lig", ad.rows(h_l, lig_src), ad.rows(h_l, lig_dst),
            ad.rows(x_l, lig_src), ad.rows(x_l, lig_dst),
            dropout=dropout, rng=rng)
        agg_lig = ad.segment_sum(m_lig, lig_dst, n_l) * (1.0 / _degrees(lig_dst, n_l))
    else:
        m_lig, agg_lig = None, zero_l

    # intra-protein messages (spatial neighbourhood, both directions)
    prot_src, prot_dst = graph.directed(graph.protein_edges)
    if prot_src.size:
        m_prot, diff_prot, d2_prot = _edge_messages(
            params, pre + ".msg_prot", ad.rows(h_p, prot_src), ad.rows(h_p, prot_dst),
            ad.rows(x_p, prot_src), ad.rows(x_p, prot_dst),
            dropout=dropout, rng=rng)
        agg_prot = ad.segment_sum(m_prot, prot_dst, n_p) * (1.0 / _degrees(prot_dst, n_p))
    else:
        m_prot, agg_prot = None, zero_p

    # interface messages, shared by both sides and by the pair update
    pair = state.pair_embed
    ie = graph.interface_edges
    if ie.size:
        ai = ie[:, 0].astype(np.int64)
        rj = ie[:, 1].astype(np.int64)
        flat = ai * n_p + rj
        m_int, diff_int, d2_int = _edge_messages(
            params, pre + ".msg_int", ad.rows(h_l, ai), ad.rows(h_p, rj),
            ad.rows(x_l, ai), ad.rows(x_p, rj), extra=ad.rows(pair, flat),
            dropout=dropout, rng=rng)
        agg_int_l = ad.segment_sum(m_int, ai, n_l) * (1.0 / _degrees(ai, n_l))
        agg_int_p = ad.segment_sum(m_int, rj, n_p) * (1.0 / _degrees(rj, n_p))
        pair = pair + ad.segment_sum(_linear(params, pre + ".pair", m_int),
                                     flat, n_l * n_p)
    else:
        m_int, agg_int_l, agg_int_p = None, zero_l, zero_p

    new_h_l = h_l + _mlp(params, pre + ".upd_l",
                         ad.concat([h_l, agg_lig + agg_int_l], axis=1),
                         dropout=dropout, rng=rng)
    new_h_p = h_p + _mlp(params, pre + ".upd_p",
                         ad.concat([h_p, agg_prot + agg_int_p], axis=1),
                         dropout=dropout, rng=rng)

    new_x_l = x_l
    if not freeze_atom_coords:
        if m_lig is not None:
            new_x_l = new_x_l + _coord_shift(
                params, pre + ".coord_lig", m_lig, diff_lig, d2_lig, lig_dst, n_l, eps)
        if m_int is not None:
            # for atoms the interface direction is x_atom - x_residue
            new_x_l = new_x_l + _coord_shift(
                params, pre + ".coord_int_l", m_int,
                -diff_int, d2_int, ai, n_l, eps)

    new_x_p = x_p
    if not freeze_residue_coords:
        if m_prot is not None:
            new_x_p = new_x_p + _coord_shift(
                params, pre + ".coord_prot", m_prot, diff_prot, d2_prot,
                prot_dst, n_p, eps)
        if m_int is not None:
            new_x_p = new_x_p + _coord_shift(
                params, pre + ".coord_int_p", m_int, diff_int, d2_int, rj, n_p, eps)

    return LayerState(new_h_l, new_h_p, new_x_l, new_x_p, pair)


def _initial_state(params, graph, atom_coords, residue_coords, hidden):
    h_l = _linear(params, "embed_l", Tensor(graph.atom_feats))
    h_p = _linear(params, "embed_p", Tensor(graph.residue_feats))
    pair = Tensor(np.zeros((graph.n_atoms * graph.n_residues, hidden)))
    return LayerState(h_l, h_p, ad.as_tensor(atom_coords),
                      ad.as_tensor(residue_coords), pair)


def _run_stack(params, graph, state, n_layers, *, freeze_atoms, freeze_residues,
               eps, dropout=0.0, rng=None, frame_center=None):
    """Run stacked layers, optionally in a frame centred on ``frame_center``.

    Centering uses a constant shift, so it preserves exact translation
    equivariance while keeping coordinate magnitudes small.
    """
    if frame_center is not None:
        c = np.asarray(frame_center, dtype=np.float64)
        state = replace(state,
                        atom_coords=state.atom_coords - c,
                        residue_coords=state.residue_coords - c)
    for i in range(n_layers):
        state = fabind_layer_forward(
            state, graph, params, i,
            freeze_residue_coords=freeze_residues,
            freeze_atom_coords=freeze_atoms,
            eps=eps, dropout=dropout, rng=rng)
    if frame_center is not None:
        state = replace(state,
                        atom_coords=state.atom_coords + c,
                        residue_coords=state.residue_coords + c)
    return state


def pocket_predict(graph, params, cfg, *, rng=None, sample_gumbel=False,
                   dropout=0.0):
    """Predict pocket membership probabilities and the pocket centroid.

    Returns ``(selection, probs_tensor, center_tensor)``; the tensors stay
    attached to the tape for the classification and centroid losses. The
    centroid is the residue-coordinate average weighted by the (optionally
    Gumbel-perturbed) softmax of the classification logits. If no residue
    clears the 0.5 threshold, the ``k_min`` residues nearest the predicted
    centroid are selected instead.
    """
    FORWARD_COUNTS["pocket"] += 1
    state = _initial_state(params, graph, graph.ligand_coords,
                           graph.residue_coords, cfg.hidden_pocket)
    state = _run_stack(params, graph, state, cfg.layers_pocket,
                       freeze_atoms=True, freeze_residues=True, eps=cfg.eps,
                       dropout=dropout, rng=rng)
    logits = ad.reshape(_mlp(params, "cls", state.residue_feats,
                             dropout=dropout, rng=rng), (graph.n_residues,))
    probs = ad.sigmoid(logits)

    w_logits = logits * (1.0 / cfg.tau)
    if sample_gumbel:
        if rng is None:
            raise ValueError("sampled mode needs an rng")
        u = rng.uniform(1e-12, 1.0, size=graph.n_residues)
        w_logits = w_logits + (-np.log(-np.log(u)))
    weights = ad.softmax(w_logits, axis=0)
    center = ad.reshape(
        ad.reshape(weights, (1, graph.n_residues)) @ Tensor(graph.residue_coords),
        (3,))

    indicator = (probs.data >= 0.5).astype(np.int64)
    if indicator.sum() == 0:
        k = min(cfg.k_min, graph.n_residues)
        dist = np.linalg.norm(graph.residue_coords - center.data, axis=1)
        nearest = np.argsort(dist, kind="stable")[:k]
        indicator = np.zeros(graph.n_residues, dtype=np.int64)
        indicator[nearest] = 1
    sel = PocketSelection(indicator=indicator, probs=probs.data.copy(),
                          center=center.data.copy())
    return sel, probs, center


def ligand_dock_forward(subgraph, params, cfg, atom_coords, residue_coords,
                        *, dropout=0.0, rng=None):
    """Predict refined ligand atom coordinates; residues are fixed context."""
    FORWARD_COUNTS["ligand"] += 1
    res = ad.as_tensor(residue_coords)
    state = _initial_state(params, subgraph, atom_coords, res.detach(),
                           cfg.hidden_ligand)
    frame = state.residue_coords.data.mean(axis=0)
    state = _run_stack(params, subgraph, state, cfg.layers_ligand,
                       freeze_atoms=False, freeze_residues=True, eps=cfg.eps,
                       dropout=dropout, rng=rng, frame_center=frame)
    return state.atom_coords


def pocket_dock_forward(subgraph, params, cfg, atom_coords, residue_coords,
                        *, dropout=0.0, rng=None):
    """Predict refined pocket residue coordinates; atoms are fixed context."""
    FORWARD_COUNTS["protein"] += 1
    atoms = ad.as_tensor(atom_coords)
    state = _initial_state(params, subgraph, atoms.detach(), residue_coords,
                           cfg.hidden_protein)
    frame = state.atom_coords.data.mean(axis=0)
    state = _run_stack(params, subgraph, state, cfg.layers_protein,
                       freeze_atoms=True, freeze_residues=False, eps=cfg.eps,
                       dropout=dropout, rng=rng, frame_center=frame)
    return state.residue_coords


def save_checkpoint(path, players, cfg, extra=None):
    """Write all player parameter stores plus the net config to ``path``.

    ``players`` maps player names (``pocket``, ``ligand``, ``protein``) to
    :class:`ModelParams`.
    """
    arrays = {}
    for model_name, params in players.items():
        for name, t in params.items():
            arrays[f"{model_name}/{name}"] = t.data
    meta = {
        "version": CHECKPOINT_VERSION,
        "net_config": {k: getattr(cfg, k) for k in NetConfig.__dataclass_fields__},
        "extra": extra or {},
    }
    arrays["__meta__"] = np.frombuffer(
        json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Load a checkpoint; returns ``(players, cfg, extra)`` with validated shapes."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"].tobytes()).decode("utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version: {meta.get('version')}")
        cfg = NetConfig(**meta["net_config"])
        rng = np.random.default_rng(0)
        players = {
            "pocket": init_pocket_model(cfg, rng),
            "ligand": init_ligand_model(cfg, rng),
            "protein": init_protein_model(cfg, rng),
        }
        for model_name, params in players.items():
            prefix = model_name + "/"
            state = {k[len(prefix):]: data[k] for k in data.files
                     if k.startswith(prefix)}
            params.load_state_dict(state)
    return players, cfg, meta.get("extra", {})
