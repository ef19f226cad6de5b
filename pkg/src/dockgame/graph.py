"""Heterogeneous protein--ligand complex graphs and their geometric ops.

A complex couples a ligand subgraph (atoms, chemical bonds), a protein
subgraph (residues, distance edges) and distance-defined interface edges
between the two sides. Residue pairs are connected within 8 A, interface
pairs within 10 A; both cutoffs are inclusive and configurable.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels


class InvalidComplexError(ValueError):
    """Raised when a record or graph violates a structural invariant."""


@dataclass(frozen=True)
class GraphConfig:
    residue_cutoff: float = 8.0
    interface_cutoff: float = 10.0

    def __post_init__(self):
        if self.residue_cutoff <= 0 or self.interface_cutoff <= 0:
            raise ValueError("cutoffs must be positive")


@dataclass
class ComplexRecord:
    """One training sample: paired apo/holo geometry plus features."""

    complex_id: str
    atom_feats: np.ndarray      # (n_l, d_l)
    apo_ligand: np.ndarray      # (n_l, 3)
    holo_ligand: np.ndarray     # (n_l, 3)
    residue_feats: np.ndarray   # (n_p, d_p)
    apo_residues: np.ndarray    # (n_p, 3)
    holo_residues: np.ndarray   # (n_p, 3)
    pocket_labels: np.ndarray   # (n_p,) in {0, 1}
    bonds: np.ndarray           # (n_bonds, 2) atom index pairs

    @property
    def n_atoms(self):
        return self.atom_feats.shape[0]

    @property
    def n_residues(self):
        return self.residue_feats.shape[0]

    def validate(self):
        n_l, n_p = self.n_atoms, self.n_residues
        if n_l == 0 or n_p == 0:
            raise InvalidComplexError(f"{self.complex_id}: empty ligand or protein")
        if self.apo_ligand.shape != (n_l, 3) or self.holo_ligand.shape != (n_l, 3):
            raise InvalidComplexError(f"{self.complex_id}: ligand coord shape mismatch")
        if self.apo_residues.shape != (n_p, 3) or self.holo_residues.shape != (n_p, 3):
            raise InvalidComplexError(f"{self.complex_id}: residue coord shape mismatch")
        if self.pocket_labels.shape != (n_p,):
            raise InvalidComplexError(f"{self.complex_id}: pocket label shape mismatch")
        if int(self.pocket_labels.sum()) < 1:
            raise InvalidComplexError(f"{self.complex_id}: no pocket residue labelled")
        for arr in (self.apo_ligand, self.holo_ligand, self.apo_residues,
                    self.holo_residues, self.atom_feats, self.residue_feats):
            if not np.all(np.isfinite(arr)):
                raise InvalidComplexError(f"{self.complex_id}: non-finite values")
        if self.bonds.size and (self.bonds.min() < 0 or self.bonds.max() >= n_l):
            raise InvalidComplexError(f"{self.complex_id}: bond index out of range")
        return self


@dataclass
class PocketSelection:
    """Per-residue pocket membership plus the predicted pocket centroid."""

    indicator: np.ndarray  # (n_p,) in {0, 1}
    probs: np.ndarray      # (n_p,) in [0, 1]
    center: np.ndarray     # (3,)

    @property
    def selected(self):
        return np.nonzero(self.indicator)[0]


@dataclass
class ComplexGraph:
    atom_feats: np.ndarray
    residue_feats: np.ndarray
    ligand_coords: np.ndarray
    residue_coords: np.ndarray
    ligand_edges: np.ndarray      # (e, 2) unordered atom pairs
    protein_edges: np.ndarray     # (e, 2) unordered residue pairs, i < j
    interface_edges: np.ndarray   # (e, 2) (atom, residue) pairs
    cfg: GraphConfig
    # maps subgraph residue rows back to the parent protein; identity for
    # full graphs
    residue_index: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.residue_index is None:
            self.residue_index = np.arange(self.residue_feats.shape[0])

    @property
    def n_atoms(self):
        return self.atom_feats.shape[0]

    @property
    def n_residues(self):
        return self.residue_feats.shape[0]

    def directed(self, edges):
        """Both directions of an unordered edge list as (src, dst) arrays."""
        if edges.size == 0:
            e = np.zeros(0, dtype=np.int64)
            return e, e
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        return src.astype(np.int64), dst.astype(np.int64)


def _pair_array(ii, jj):
    if len(ii) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.stack([ii, jj], axis=1)


def _interface_edges(ligand_coords, residue_coords, cutoff):
    ii, jj = kernels.radius_pairs(
        np.ascontiguousarray(ligand_coords),
        np.ascontiguousarray(residue_coords),
        cutoff,
    )
    return _pair_array(ii, jj)


def build_complex_graph(record, cfg=GraphConfig()):
    """Build the full complex graph from a record's apo geometry."""
    record.validate()
    ii, jj = kernels.radius_pairs(
        np.ascontiguousarray(record.apo_residues),
        np.ascontiguousarray(record.apo_residues),
        cfg.residue_cutoff,
        skip_same_index=True,
    )
    return ComplexGraph(
        atom_feats=record.atom_feats.copy(),
        residue_feats=record.residue_feats.copy(),
        ligand_coords=record.apo_ligand.copy(),
        residue_coords=record.apo_residues.copy(),
        ligand_edges=record.bonds.astype(np.int64).reshape(-1, 2),
        protein_edges=_pair_array(ii, jj),
        interface_edges=_interface_edges(
            record.apo_ligand, record.apo_residues, cfg.interface_cutoff
        ),
        cfg=cfg,
    )


def place_ligand_at_center(graph, target):
    """Rigidly translate the ligand so its centroid hits ``target``.

    Interface edges are distance-defined, so they are recomputed.
    """
    target = np.asarray(target, dtype=np.float64)
    shift = target - graph.ligand_coords.mean(axis=0)
    coords = graph.ligand_coords + shift
    return replace(
        graph,
        ligand_coords=coords,
        interface_edges=_interface_edges(
            coords, graph.residue_coords, graph.cfg.interface_cutoff
        ),
    )


def protein_center(graph):
    """Arithmetic mean of the residue C-alpha coordinates."""
    return graph.residue_coords.mean(axis=0)


def extract_pocket_subgraph(graph, sel):
    """Restrict the protein side to the selected residues.

    Keeps all ligand atoms, remaps protein edges onto the selection and
    recomputes interface edges against the surviving residues. The
    ``residue_index`` of the result maps subgraph rows back to the parent
    protein.
    """
    if sel.indicator.shape[0] != graph.n_residues:
        raise InvalidComplexError("selection length does not match residue count")
    keep = np.nonzero(sel.indicator)[0]
    if keep.size == 0:
        raise InvalidComplexError("empty pocket selection; apply fallback first")
    remap = -np.ones(graph.n_residues, dtype=np.int64)
    remap[keep] = np.arange(keep.size)

    pe = graph.protein_edges
    if pe.size:
        mask = (remap[pe[:, 0]] >= 0) & (remap[pe[:, 1]] >= 0)
        pe = remap[pe[mask]]
    else:
        pe = np.zeros((0, 2), dtype=np.int64)

    coords = graph.residue_coords[keep]
    return ComplexGraph(
        atom_feats=graph.atom_feats,
        residue_feats=graph.residue_feats[keep],
        ligand_coords=graph.ligand_coords,
        residue_coords=coords,
        ligand_edges=graph.ligand_edges,
        protein_edges=pe,
        interface_edges=_interface_edges(
            graph.ligand_coords, coords, graph.cfg.interface_cutoff
        ),
        cfg=graph.cfg,
        residue_index=graph.residue_index[keep],
    )
