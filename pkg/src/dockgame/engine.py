"""Alternating loop self-play training of the two docking players.

Each training step runs the acting player's two-level loop: the outer loop
exchanges poses with the frozen opponent, the inner loop feeds the acting
model's own predicted coordinates back into itself. Gradients never flow
through the frozen opponent; its forwards run without a tape.
"""

import csv
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from . import losses, nets
from .autodiff import Tensor
from .graph import (build_complex_graph, extract_pocket_subgraph,
                    place_ligand_at_center, protein_center)
from .losses import LossReport, LossWeights

log = logging.getLogger("dockgame")


class NumericalError(RuntimeError):
    """A non-finite loss or gradient aborted the computation."""


@dataclass(frozen=True)
class LoopConfig:
    m_ligand: int = 2
    m_protein: int = 2
    n_ligand: int = 6
    n_protein: int = 6
    epochs: int = 200
    batch_size: int = 4
    learning_rate: float = 5e-5
    dropout: float = 0.1
    alternation_period: int = 1
    recompute_interface: str = "outer"   # outer | inner | never
    exchange_uses_refined: bool = False
    sample_gumbel: bool = False

    def __post_init__(self):
        if min(self.m_ligand, self.m_protein, self.n_ligand, self.n_protein) < 1:
            raise ValueError("loop counts must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.recompute_interface not in ("outer", "inner", "never"):
            raise ValueError("recompute_interface must be outer|inner|never")


@dataclass
class TraceEntry:
    step: int
    epoch: int
    acting: str
    report: LossReport
    wall_time: float


@dataclass
class TrainTrace:
    entries: list = field(default_factory=list)

    def append(self, entry):
        if self.entries and entry.step <= self.entries[-1].step:
            raise ValueError("trace steps must be strictly increasing")
        self.entries.append(entry)

    CSV_HEADER = ["step", "acting_player", "pocket_cls", "pocket_center",
                  "ligand_coord", "pocket_coord", "dis_map", "J_L", "J_P", "F"]

    def write_csv(self, path):
        # wall time is deliberately excluded so identical runs produce
        # bitwise-identical files
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.CSV_HEADER)
            for e in self.entries:
                writer.writerow([e.step, e.acting]
                                + [repr(v) for v in e.report.csv_values()])


class Adam:
    """Adam with a skip-step guard against non-finite gradients."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.t = 0
        self.skipped = 0

    def step(self, lr):
        for _, t in self.params.items():
            if not np.all(np.isfinite(t.grad)):
                self.skipped += 1
                log.warning("non-finite gradient: skipping optimizer step "
                            "(%d skipped so far)", self.skipped)
                return False
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, t in self.params.items():
            g = t.grad
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            t.data -= lr * (self.m[name] / bc1) / (np.sqrt(self.v[name] / bc2)
                                                   + self.eps)
        return True


def linear_lr(base_lr, epoch, total_epochs):
    """Linear decay from ``base_lr`` toward zero over the training run."""
    return base_lr * max(0.0, 1.0 - epoch / total_epochs)


def true_pocket_center(record):
    return record.apo_residues[record.pocket_labels == 1].mean(axis=0)


def _with_interface(sub, atom_coords, residue_coords):
    from .graph import _interface_edges
    return replace(sub, interface_edges=_interface_edges(
        atom_coords, residue_coords, sub.cfg.interface_cutoff))


def _phase_forward(record, players, weights, net_cfg, loop_cfg, graph_cfg,
                   acting, rng=None):
    """Run one acting-player step; returns the payoff tensor and report.

    The opponent's forwards (and, in the protein phase, pocket prediction)
    run without a tape, so only the acting player's parameters receive
    gradients.
    """
    dropout = loop_cfg.dropout if rng is not None else 0.0
    graph = build_complex_graph(record, graph_cfg)
    graph = place_ligand_at_center(graph, protein_center(graph))

    if acting == "L":
        sel, probs_t, center_t = nets.pocket_predict(
            graph, players["pocket"], net_cfg, rng=rng,
            sample_gumbel=loop_cfg.sample_gumbel and rng is not None,
            dropout=dropout)
    else:
        with ad.no_grad():
            sel, probs_t, center_t = nets.pocket_predict(
                graph, players["pocket"], net_cfg)

    cls_t = losses.pocket_cls_loss([probs_t], [record.pocket_labels])
    cen_t = losses.pocket_center_loss([center_t], [true_pocket_center(record)])

    # reposition the ligand at the predicted pocket center (geometry only,
    # no gradient through the placement) and cut out the pocket subgraph
    placed = place_ligand_at_center(graph, sel.center)
    sub = extract_pocket_subgraph(placed, sel)
    sel_idx = sub.residue_index
    true_atoms = record.holo_ligand
    true_res = record.holo_residues[sel_idx]

    atoms0 = sub.ligand_coords.copy()
    res0 = sub.residue_coords.copy()

    if acting == "L":
        m_loops, n_loops = loop_cfg.m_ligand, loop_cfg.n_ligand
        x_k = Tensor(atoms0)
        r_k = res0
        subk = sub
        for k in range(m_loops):
            if k > 0 and loop_cfg.recompute_interface != "never":
                subk = _with_interface(sub, x_k.data, r_k)
            x_in = x_k
            for _ in range(n_loops):
                x_in = nets.ligand_dock_forward(
                    subk, players["ligand"], net_cfg, x_in, r_k,
                    dropout=dropout, rng=rng)
                if loop_cfg.recompute_interface == "inner":
                    subk = _with_interface(sub, x_in.data, r_k)
            exch = x_in.data if loop_cfg.exchange_uses_refined else x_k.data
            with ad.no_grad():
                r_k = nets.pocket_dock_forward(
                    subk, players["protein"], net_cfg, exch, r_k).data
            x_k = x_in
        pred_atoms, pred_res = x_k, r_k
    else:
        m_loops, n_loops = loop_cfg.m_protein, loop_cfg.n_protein
        r_k = Tensor(res0)
        x_k = atoms0
        subk = sub
        for k in range(m_loops):
            if k > 0 and loop_cfg.recompute_interface != "never":
                subk = _with_interface(sub, x_k, r_k.data)
            r_in = r_k
            for _ in range(n_loops):
                r_in = nets.pocket_dock_forward(
                    subk, players["protein"], net_cfg, x_k, r_in,
                    dropout=dropout, rng=rng)
                if loop_cfg.recompute_interface == "inner":
                    subk = _with_interface(sub, x_k, r_in.data)
            exch = r_in.data if loop_cfg.exchange_uses_refined else r_k.data
            with ad.no_grad():
                x_k = nets.ligand_dock_forward(
                    subk, players["ligand"], net_cfg, x_k, exch).data
            r_k = r_in
        pred_atoms, pred_res = x_k, r_k

    lig_t = losses.ligand_coord_loss([pred_atoms], [true_atoms])
    poc_t = losses.pocket_coord_loss([pred_res], [true_res])
    dm_t = losses.dis_map_loss([pred_atoms], [pred_res],
                               [true_atoms], [true_res])
    pred_t = losses.pocket_pred_loss(cls_t, cen_t, weights)
    j_l = losses.payoff_ligand(pred_t, lig_t, dm_t, weights)
    j_p = losses.payoff_protein(poc_t, dm_t, weights)

    report = losses.make_report(cls_t.item(), cen_t.item(), lig_t.item(),
                                poc_t.item(), dm_t.item(), weights)
    loss_t = j_l if acting == "L" else j_p
    if not np.isfinite(loss_t.data):
        raise NumericalError(
            f"non-finite {'J_L' if acting == 'L' else 'J_P'} on "
            f"{record.complex_id}: {report}")
    return loss_t, report


def ligand_phase_step(record, players, weights, net_cfg, loop_cfg, graph_cfg,
                      rng=None):
    """Forward + backward for the ligand player; opponent stays frozen."""
    loss_t, report = _phase_forward(record, players, weights, net_cfg,
                                    loop_cfg, graph_cfg, "L", rng=rng)
    ad.backward(loss_t)
    return report


def protein_phase_step(record, players, weights, net_cfg, loop_cfg, graph_cfg,
                       rng=None):
    """Forward + backward for the protein player; opponent stays frozen."""
    loss_t, report = _phase_forward(record, players, weights, net_cfg,
                                    loop_cfg, graph_cfg, "P", rng=rng)
    ad.backward(loss_t)
    return report


def _mean_report(reports, weights):
    mean = lambda attr: float(np.mean([getattr(r, attr) for r in reports]))
    return losses.make_report(mean("pocket_cls"), mean("pocket_center"),
                              mean("ligand_coord"), mean("pocket_coord"),
                              mean("dis_map"), weights)


def acting_player_for_epoch(epoch, alternation_period):
    return "L" if (epoch // alternation_period) % 2 == 0 else "P"


def init_players(net_cfg, seed):
    rng = np.random.default_rng([seed, 0])
    return {
        "pocket": nets.init_pocket_model(net_cfg, rng),
        "ligand": nets.init_ligand_model(net_cfg, rng),
        "protein": nets.init_protein_model(net_cfg, rng),
    }


def train(dataset, weights, net_cfg, loop_cfg, graph_cfg, seed,
          checkpoint_dir=None, players=None):
    """Full LoopPlay run; returns ``(players, trace)``.

    The acting player switches every ``alternation_period`` epochs starting
    with the ligand player. Complex order is reshuffled per epoch from the
    seeded generator, and one trace entry is recorded per batch.
    """
    if not dataset:
        raise ValueError("empty training dataset")
    if players is None:
        players = init_players(net_cfg, seed)
    shuffle_rng = np.random.default_rng([seed, 1])
    dropout_rng = np.random.default_rng([seed, 2])
    opts = {name: Adam(params) for name, params in players.items()}
    acting_stores = {"L": ("pocket", "ligand"), "P": ("protein",)}
    trace = TrainTrace()
    step = 0

    for epoch in range(loop_cfg.epochs):
        acting = acting_player_for_epoch(epoch, loop_cfg.alternation_period)
        lr = linear_lr(loop_cfg.learning_rate, epoch, loop_cfg.epochs)
        order = shuffle_rng.permutation(len(dataset))
        for start in range(0, len(dataset), loop_cfg.batch_size):
            batch = [dataset[i] for i in order[start:start + loop_cfg.batch_size]]
            t0 = time.perf_counter()
            for name in players:
                players[name].zero_grad()
            reports = []
            for record in batch:
                loss_t, report = _phase_forward(
                    record, players, weights, net_cfg, loop_cfg, graph_cfg,
                    acting, rng=dropout_rng)
                ad.backward(loss_t)
                reports.append(report)
            for name in acting_stores[acting]:
                players[name].scale_grads(1.0 / len(batch))
                opts[name].step(lr)
            step += 1
            trace.append(TraceEntry(step=step, epoch=epoch, acting=acting,
                                    report=_mean_report(reports, weights),
                                    wall_time=time.perf_counter() - t0))
        if checkpoint_dir is not None:
            nets.save_checkpoint(
                f"{checkpoint_dir}/checkpoint.npz", players, net_cfg,
                extra={"epoch": epoch, "seed": seed})
    return players, trace


@dataclass
class InferResult:
    ligand_coords: np.ndarray
    pocket_coords: np.ndarray
    selection: object
    residue_index: np.ndarray
    elapsed: float


def infer(record, players, net_cfg, loop_cfg, graph_cfg):
    """Frozen-model inference with the same two-level loop structure."""
    t0 = time.perf_counter()
    with ad.no_grad():
        graph = build_complex_graph(record, graph_cfg)
        graph = place_ligand_at_center(graph, protein_center(graph))
        sel, _, _ = nets.pocket_predict(graph, players["pocket"], net_cfg)
        placed = place_ligand_at_center(graph, sel.center)
        sub = extract_pocket_subgraph(placed, sel)

        x_k = sub.ligand_coords.copy()
        r_k = sub.residue_coords.copy()
        subk = sub
        for k in range(loop_cfg.m_ligand):
            if k > 0 and loop_cfg.recompute_interface != "never":
                subk = _with_interface(sub, x_k, r_k)
            x_in = x_k
            for _ in range(loop_cfg.n_ligand):
                x_in = nets.ligand_dock_forward(
                    subk, players["ligand"], net_cfg, x_in, r_k).data
            r_in = r_k
            for _ in range(loop_cfg.n_protein):
                r_in = nets.pocket_dock_forward(
                    subk, players["protein"], net_cfg, x_k, r_in).data
            x_k, r_k = x_in, r_in
    return InferResult(
        ligand_coords=x_k,
        pocket_coords=r_k,
        selection=sel,
        residue_index=sub.residue_index,
        elapsed=time.perf_counter() - t0,
    )
