"""Loss terms for the two players and their composite payoffs.

All public functions accept either autodiff tensors or plain arrays and
return an autodiff :class:`~dockgame.autodiff.Tensor`; use ``.item()`` for
the scalar value. Batched variants take lists with one entry per complex
and average over the batch.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels

PROB_CLAMP = 1e-7
HUBER_DELTA = 1.0


@dataclass(frozen=True)
class LossWeights:
    """Composite-loss coefficients; defaults follow the training recipe."""

    alpha_cls: float = 1.0
    alpha_center: float = 0.05
    alpha2: float = 50.0
    beta: float = 15.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha_cls", "alpha_center", "alpha2", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class LossReport:
    pocket_cls: float = 0.0
    pocket_center: float = 0.0
    pocket_pred: float = 0.0
    ligand_coord: float = 0.0
    pocket_coord: float = 0.0
    dis_map: float = 0.0
    j_ligand: float = 0.0
    j_protein: float = 0.0
    potential: float = 0.0

    CSV_FIELDS = (
        "pocket_cls", "pocket_center", "ligand_coord",
        "pocket_coord", "dis_map", "j_ligand", "j_protein", "potential",
    )

    def csv_values(self):
        return [getattr(self, f) for f in self.CSV_FIELDS]


def pocket_cls_loss(probs_batch, labels_batch):
    """Imbalance-weighted BCE over residues, averaged over complexes.

    Per complex the BCE terms are *summed* over residues and scaled by
    total-residues / pocket-residues.
    """
    total = None
    for probs, labels in zip(probs_batch, labels_batch):
        labels = np.asarray(labels, dtype=np.float64)
        p_i = labels.shape[0]
        q_i = int(labels.sum())
        if q_i < 1:
            raise ValueError("complex without labelled pocket residues")
        probs = ad.clip(ad.as_tensor(probs), PROB_CLAMP, 1.0 - PROB_CLAMP)
        bce = -(labels * ad.log(probs) + (1.0 - labels) * ad.log(1.0 - probs))
        term = (p_i / q_i) * bce.sum()
        total = term if total is None else total + term
    return total * (1.0 / len(probs_batch))


def huber(residuals, delta=HUBER_DELTA):
    """Summed elementwise Huber penalty of a residual array."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return ad.huber_elem(ad.as_tensor(residuals), delta).sum()


def pocket_center_loss(pred_centers, true_centers, delta=HUBER_DELTA):
    """Mean over complexes of the Huber penalty summed over xyz."""
    total = None
    for pred, true in zip(pred_centers, true_centers):
        term = huber(ad.as_tensor(pred) - np.asarray(true, dtype=np.float64), delta)
        total = term if total is None else total + term
    return total * (1.0 / len(pred_centers))


def pocket_pred_loss(cls_loss, center_loss, weights):
    return weights.alpha_cls * ad.as_tensor(cls_loss) \
        + weights.alpha_center * ad.as_tensor(center_loss)


def _coord_loss(pred_batch, true_batch, delta):
    total = None
    for pred, true in zip(pred_batch, true_batch):
        true = np.asarray(true, dtype=np.float64)
        term = huber(ad.as_tensor(pred) - true, delta) * (1.0 / true.shape[0])
        total = term if total is None else total + term
    return total * (1.0 / len(pred_batch))


def ligand_coord_loss(pred_batch, true_batch, delta=HUBER_DELTA):
    """Per-atom-normalised Huber distance to the true holo ligand."""
    return _coord_loss(pred_batch, true_batch, delta)


def pocket_coord_loss(pred_batch, true_batch, delta=HUBER_DELTA):
    """Per-residue-normalised Huber distance to the true holo pocket."""
    return _coord_loss(pred_batch, true_batch, delta)


def distance_map(atom_coords, residue_coords):
    """Plain ndarray distance matrix between atoms and pocket residues."""
    return kernels.pairwise_distances(
        np.ascontiguousarray(np.asarray(atom_coords, dtype=np.float64)),
        np.ascontiguousarray(np.asarray(residue_coords, dtype=np.float64)),
    )


def dis_map_loss(pred_atoms_batch, pred_residues_batch,
                 true_atoms_batch, true_residues_batch):
    """MSE between predicted and true atom-to-pocket distance maps.

    The true map comes from holo coordinates; the predicted map couples
    both players' predicted coordinates, which makes this the shared
    interaction term of the game.
    """
    total = None
    for pa, pr, ta, tr in zip(pred_atoms_batch, pred_residues_batch,
                              true_atoms_batch, true_residues_batch):
        true_map = distance_map(ta, tr)
        pred_map = ad.pairwise_distance(ad.as_tensor(pa), ad.as_tensor(pr))
        term = ad.square(pred_map - true_map).mean()
        total = term if total is None else total + term
    return total * (1.0 / len(pred_atoms_batch))


def payoff_ligand(pocket_pred, ligand_coord, dis_map, weights):
    """J for the ligand player; ``dis_map`` must be the shared term."""
    return ad.as_tensor(pocket_pred) + weights.alpha2 * ad.as_tensor(ligand_coord) \
        + weights.gamma * ad.as_tensor(dis_map)


def payoff_protein(pocket_coord, dis_map, weights):
    """J for the protein player; ``dis_map`` must be the shared term."""
    return weights.beta * ad.as_tensor(pocket_coord) \
        + weights.gamma * ad.as_tensor(dis_map)


def make_report(cls_loss, center_loss, ligand_coord, pocket_coord, dis_map,
                weights):
    """Assemble a LossReport with consistent composite fields."""
    pocket_pred = weights.alpha_cls * cls_loss + weights.alpha_center * center_loss
    j_l = pocket_pred + weights.alpha2 * ligand_coord + weights.gamma * dis_map
    j_p = weights.beta * pocket_coord + weights.gamma * dis_map
    return LossReport(
        pocket_cls=cls_loss,
        pocket_center=center_loss,
        pocket_pred=pocket_pred,
        ligand_coord=ligand_coord,
        pocket_coord=pocket_coord,
        dis_map=dis_map,
        j_ligand=j_l,
        j_protein=j_p,
        potential=j_l + weights.beta * pocket_coord,
    )
